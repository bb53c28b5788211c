// Builds the binary-confounder joint law that attains the upper bound on
// E(Y^1 | T = 0) and the lower bound on E(Y^0 | T = 1) at once, then audits it.

use demsm::bounds::StratumParams;
use demsm::{build_witness, verify_witness, GammaPair, LambdaPair, WeightedDistribution, WitnessAudit};

pub fn run_example() -> demsm::Result<WitnessAudit> {
    let d1 = WeightedDistribution::from_pairs([(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (5.0, 1.0)])?;
    let d0 = WeightedDistribution::from_pairs([(-1.0, 2.0), (0.5, 2.0), (3.0, 1.0)])?;
    let params = StratumParams {
        lam: LambdaPair::new(0.5, 2.5)?,
        gam: GammaPair::new(0.3, 3.0)?,
        gam_prime: GammaPair::symmetric(2.0)?,
        delta: None,
    };

    let w = build_witness(&d1, &d0, 0.4, params.lam, params.gam, params.gam_prime)?;
    println!("Q(U=1 | T=1) = {:.4}, Q(U=1 | T=0) = {:.4}", w.u_given_t1, w.u_given_t0);
    println!("Y^1 | U=1: {:?}", w.y1.given_u1);
    println!("Y^1 | U=0: {:?}", w.y1.given_u0);

    let audit = verify_witness(&w, &d1, &d0, &params, 1e-10)?;
    for c in &audit.checks {
        println!("{:<28} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }
    println!(
        "E(Y^1 | T=0): attained {:.6}, bound {:.6}",
        audit.attained_nu1, audit.target_nu1_hi
    );
    println!(
        "E(Y^0 | T=1): attained {:.6}, bound {:.6}",
        audit.attained_nu0, audit.target_nu0_lo
    );
    Ok(audit)
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
