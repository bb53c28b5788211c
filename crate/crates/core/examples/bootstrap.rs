// Plug-in bounds from a simulated sample and percentile bootstrap intervals
// for each endpoint.

use demsm::estimate::{bootstrap_ci, plugin_bounds, BootstrapReport, Observation, Sample};
use demsm::{Model, SensitivitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two strata; outcomes on {0, ..., 4} shifted up under treatment.
pub fn simulate(n: usize, seed: u64) -> demsm::Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let old = rng.gen_bool(0.4);
            let t = rng.gen_bool(if old { 0.6 } else { 0.35 });
            let y = rng.gen_range(0..3) + u32::from(t) + u32::from(old && rng.gen_bool(0.5));
            Observation {
                y: y as f64,
                t: t as u8,
                x: if old { "old" } else { "young" }.into(),
            }
        })
        .collect();
    Sample::new(rows)
}

pub fn run_example() -> demsm::Result<BootstrapReport> {
    let sample = simulate(2000, 42)?;
    let spec = SensitivitySpec::symmetric(1.5)?;
    let point = plugin_bounds(&sample, &spec, Model::Demsm)?;
    let boot = bootstrap_ci(&sample, &spec, Model::Demsm, 300, 0.95, 7)?;

    println!("plug-in ATE bounds [{:.4}, {:.4}]", point.ate.lo, point.ate.hi);
    println!(
        "  lower endpoint 95% CI [{:.4}, {:.4}]",
        boot.ate_lo.lower, boot.ate_lo.upper
    );
    println!(
        "  upper endpoint 95% CI [{:.4}, {:.4}]",
        boot.ate_hi.lower, boot.ate_hi.upper
    );
    let env = boot.ate_envelope();
    println!("envelope [{:.4}, {:.4}]", env.lo, env.hi);
    Ok(boot)
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
