// Where the three models meet: with delta = 0.5 the recommended eMSM matches
// the deMSM with the matched outcome box, and also the MSM with a narrower
// treatment box.

use demsm::{
    demsm_nu1_bounds, emsm_implied_lambdas, emsm_nu1_bounds_recommended, matching_gammas, msm_nu1_bounds, EmsmDelta,
    Interval, LambdaPair, WeightedDistribution,
};

pub struct Comparison {
    pub msm: Interval,
    pub demsm_matched: Interval,
    pub emsm: Interval,
    pub msm_narrowed: Interval,
}

pub fn run_example() -> demsm::Result<Comparison> {
    let y = WeightedDistribution::from_pairs([(0.0, 0.2), (1.0, 0.3), (2.5, 0.4), (6.0, 0.1)])?;
    let lam = LambdaPair::new(0.4, 3.0)?;
    let delta = EmsmDelta::new(0.5)?;

    let gam = matching_gammas(delta, lam.tau())?;
    let narrowed = emsm_implied_lambdas(delta, lam);
    println!("tau = {:.4}", lam.tau());
    println!("matched outcome box ({:.4}, {:.4})", gam.lower(), gam.bounded_upper()?);
    println!(
        "narrowed treatment box ({:.4}, {:.4})",
        narrowed.lower(),
        narrowed.upper()
    );

    let c = Comparison {
        msm: msm_nu1_bounds(&y, lam),
        demsm_matched: demsm_nu1_bounds(&y, lam, gam)?,
        emsm: emsm_nu1_bounds_recommended(&y, lam, delta)?,
        msm_narrowed: msm_nu1_bounds(&y, narrowed),
    };
    for (name, i) in [
        ("msm", c.msm),
        ("demsm, matched box", c.demsm_matched),
        ("emsm, recommended", c.emsm),
        ("msm, narrowed box", c.msm_narrowed),
    ] {
        println!("{name:<20} [{:.6}, {:.6}]", i.lo, i.hi);
    }
    Ok(c)
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
