// A sensitivity curve: ATE bounds as Lambda = Gamma grows, for a law with two
// strata, next to the MSM curve at the same Lambda.

use demsm::{sensitivity_curve, CurveMode, CurveRow, ObservedLaw, Stratum, WeightedDistribution};

pub fn two_strata_law() -> demsm::Result<ObservedLaw> {
    let stratum = |id: &str, weight, propensity, y1: &[(f64, f64)], y0: &[(f64, f64)]| -> demsm::Result<Stratum> {
        Ok(Stratum {
            id: id.into(),
            weight,
            propensity,
            dist1: Some(WeightedDistribution::from_pairs(y1.iter().copied())?),
            dist0: Some(WeightedDistribution::from_pairs(y0.iter().copied())?),
        })
    };
    ObservedLaw::new(vec![
        stratum(
            "a",
            0.6,
            0.3,
            &[(1.0, 1.0), (2.0, 2.0), (4.0, 1.0)],
            &[(0.0, 1.0), (1.0, 2.0), (3.0, 1.0)],
        )?,
        stratum(
            "b",
            0.4,
            0.7,
            &[(2.0, 1.0), (3.0, 1.0), (5.0, 2.0)],
            &[(1.0, 2.0), (2.0, 1.0), (4.0, 1.0)],
        )?,
    ])
}

pub fn run_example() -> demsm::Result<(Vec<CurveRow>, Vec<CurveRow>)> {
    let law = two_strata_law()?;
    let grid = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0];
    let demsm = sensitivity_curve(&law, &grid, CurveMode::Demsm)?;
    let msm = sensitivity_curve(&law, &grid, CurveMode::Msm)?;

    println!("{:>6} {:>18} {:>18}", "value", "deMSM ATE", "MSM ATE");
    for (d, m) in demsm.iter().zip(&msm) {
        println!(
            "{:>6.2} [{:>7.4}, {:>7.4}] [{:>7.4}, {:>7.4}]",
            d.value, d.ate.lo, d.ate.hi, m.ate.lo, m.ate.hi
        );
    }
    Ok((demsm, msm))
}

#[allow(dead_code)]
fn main() -> demsm::Result<()> {
    run_example().map(|_| ())
}
