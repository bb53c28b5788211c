// Bounds on E(Y^1 | T = 0) and the ATE for outcomes uniform on {0, 1, 2}
// with Lambda = Gamma = 2, under the MSM, the deMSM and the recommended eMSM.

use demsm::{
    aggregate_bounds, demsm_nu1_bounds, emsm_nu1_bounds_recommended, implied_lambda, msm_nu1_bounds, EmsmDelta,
    GammaPair, Interval, LambdaPair, Model, ObservedLaw, SensitivitySpec, WeightedDistribution,
};

pub struct WorkedInstance {
    pub tau_bar: f64,
    pub msm_nu1: Interval,
    pub demsm_nu1: Interval,
    pub emsm_nu1: Interval,
    pub ate: Interval,
}

pub fn run_example() -> demsm::Result<WorkedInstance> {
    let y = WeightedDistribution::uniform(&[0.0, 1.0, 2.0])?;
    let lam = LambdaPair::symmetric(2.0)?;
    let gam = GammaPair::symmetric(2.0)?;

    let implied = implied_lambda(lam, gam)?;
    println!(
        "implied treatment box ({:.4}, {:.4}), switch level {:.4}",
        implied.lambda_bar1, implied.lambda_bar2, implied.tau_bar
    );

    let msm_nu1 = msm_nu1_bounds(&y, lam);
    let demsm_nu1 = demsm_nu1_bounds(&y, lam, gam)?;
    let emsm_nu1 = emsm_nu1_bounds_recommended(&y, lam, EmsmDelta::new(0.5)?)?;
    println!("nu1  msm   [{:.4}, {:.4}]", msm_nu1.lo, msm_nu1.hi);
    println!("nu1  demsm [{:.4}, {:.4}]", demsm_nu1.lo, demsm_nu1.hi);
    println!("nu1  emsm  [{:.4}, {:.4}]  (delta = 0.5)", emsm_nu1.lo, emsm_nu1.hi);

    let law = ObservedLaw::single(0.5, y.clone(), y)?;
    let report = aggregate_bounds(&law, &SensitivitySpec::new(lam, gam, gam), Model::Demsm)?;
    println!("ATE  demsm [{:.4}, {:.4}]", report.ate.lo, report.ate.hi);

    Ok(WorkedInstance {
        tau_bar: implied.tau_bar,
        msm_nu1,
        demsm_nu1,
        emsm_nu1,
        ate: report.ate,
    })
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
