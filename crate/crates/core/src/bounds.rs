//! Closed-form sharp bounds on the counterfactual means `nu1 = E(Y^1 | T = 0, x)`
//! and `nu0 = E(Y^0 | T = 1, x)`, their aggregation into bounds on `mu1`, `mu0`
//! and the ATE, and sensitivity curves over parameter grids.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::WeightedDistribution;
use crate::error::{Arm, Error, Result};
use crate::params::{implied_lambda, implied_lambda_control, EmsmDelta, GammaPair, ImpliedLambda, LambdaPair};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `other` lies inside `self`, up to `tol` at each end.
    pub fn contains(&self, other: &Interval, tol: f64) -> bool {
        self.lo <= other.lo + tol && other.hi <= self.hi + tol
    }
}

/// MSM-style bounds for a box `[l1, l2]`:
/// `mean -/+ (l2 - l1) E[rho(Y, q)]` at levels `1 - tau` and `tau`.
fn box_bounds(d: &WeightedDistribution, lower: f64, upper: f64) -> Interval {
    let mean = d.mean();
    let width = upper - lower;
    if width == 0.0 {
        return Interval::point(mean);
    }
    let tau = crate::params::switch_level(lower, upper);
    Interval::new(
        mean - width * d.quantile_deviation(1.0 - tau),
        mean + width * d.quantile_deviation(tau),
    )
}

fn implied_bounds(d: &WeightedDistribution, imp: &ImpliedLambda) -> Interval {
    box_bounds(d, imp.lambda_bar1, imp.lambda_bar2)
}

/// MSM bounds on `nu1` with treatment box `lam`.
pub fn msm_nu1_bounds(d: &WeightedDistribution, lam: LambdaPair) -> Interval {
    box_bounds(d, lam.lower(), lam.upper())
}

/// MSM bounds on `nu0`; the control arm sees the box `(1 / L2, 1 / L1)`.
pub fn msm_nu0_bounds(d0: &WeightedDistribution, lam: LambdaPair) -> Result<Interval> {
    let control = lam.control()?;
    Ok(box_bounds(d0, control.lower(), control.upper()))
}

/// deMSM sharp bounds on `nu1`: the MSM bounds at the implied parameters.
pub fn demsm_nu1_bounds(d: &WeightedDistribution, lam: LambdaPair, gam: GammaPair) -> Result<Interval> {
    Ok(implied_bounds(d, &implied_lambda(lam, gam)?))
}

/// deMSM sharp upper bound on `nu1` written directly in the treatment and
/// outcome parameters as a minimum of four quantile-deviation terms.
pub fn demsm_nu1_upper_minform(d: &WeightedDistribution, lam: LambdaPair, gam: GammaPair) -> Result<f64> {
    let g2 = gam.bounded_upper()?;
    let tau = lam.tau();
    let tau_g = gam.tau()?;
    let terms = [
        tau_g * d.quantile_deviation(1.0 - tau),
        (1.0 - tau_g) * d.quantile_deviation(tau),
        tau * d.quantile_deviation(1.0 - tau_g),
        (1.0 - tau) * d.quantile_deviation(tau_g),
    ];
    let smallest = terms.into_iter().fold(f64::INFINITY, f64::min);
    Ok(d.mean() + lam.width() * (g2 - gam.lower()) * smallest)
}

/// deMSM sharp bounds on `nu0` under the control-arm outcome box `gam_prime`.
pub fn demsm_nu0_bounds(d0: &WeightedDistribution, lam: LambdaPair, gam_prime: GammaPair) -> Result<Interval> {
    Ok(implied_bounds(d0, &implied_lambda_control(lam, gam_prime)?))
}

/// Recommended-specification eMSM bounds on `nu1`; needs `tau >= 1/2`.
pub fn emsm_nu1_bounds_recommended(d: &WeightedDistribution, lam: LambdaPair, delta: EmsmDelta) -> Result<Interval> {
    let tau = lam.tau();
    if tau < 0.5 {
        return Err(Error::TauBelowHalf(tau));
    }
    let mean = d.mean();
    let scale = delta.value() * lam.width();
    Ok(Interval::new(
        mean - scale * d.quantile_deviation(1.0 - tau),
        mean + scale * d.quantile_deviation(tau),
    ))
}

/// Recommended-specification eMSM bounds on `nu0`, obtained by relabelling the
/// arms: the treated-arm formula evaluated at the control box.
pub fn emsm_nu0_bounds_recommended(d0: &WeightedDistribution, lam: LambdaPair, delta: EmsmDelta) -> Result<Interval> {
    emsm_nu1_bounds_recommended(d0, lam.control()?, delta)
}

/// Which sensitivity model a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Msm,
    Demsm,
    EmsmRec,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Msm => "msm",
            Model::Demsm => "demsm",
            Model::EmsmRec => "emsm_rec",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "msm" => Ok(Model::Msm),
            "demsm" => Ok(Model::Demsm),
            "emsm" | "emsm_rec" | "emsm-rec" => Ok(Model::EmsmRec),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// One covariate stratum of the observed-data law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: String,
    /// P(X = x).
    pub weight: f64,
    /// P(T = 1 | X = x).
    pub propensity: f64,
    /// Law of Y given T = 1, X = x.
    #[serde(default)]
    pub dist1: Option<WeightedDistribution>,
    /// Law of Y given T = 0, X = x.
    #[serde(default)]
    pub dist0: Option<WeightedDistribution>,
}

/// Observed law of `(Y, T, X)` with categorical `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw")]
pub struct ObservedLaw {
    strata: Vec<Stratum>,
}

#[derive(Deserialize)]
struct RawLaw {
    strata: Vec<Stratum>,
}

impl TryFrom<RawLaw> for ObservedLaw {
    type Error = Error;
    fn try_from(raw: RawLaw) -> Result<Self> {
        ObservedLaw::new(raw.strata)
    }
}

impl ObservedLaw {
    pub fn new(strata: Vec<Stratum>) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::InvalidLaw("no strata".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &strata {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidLaw(format!("duplicate stratum id '{}'", s.id)));
            }
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::InvalidLaw(format!("stratum '{}' has weight {}", s.id, s.weight)));
            }
            if !(0.0..=1.0).contains(&s.propensity) {
                return Err(Error::InvalidLaw(format!(
                    "stratum '{}' has propensity {} outside [0, 1]",
                    s.id, s.propensity
                )));
            }
        }
        let total: f64 = strata.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!("stratum weights sum to {total}, expected 1")));
        }
        Ok(Self { strata })
    }

    /// A law with a single stratum labelled `"all"`.
    pub fn single(propensity: f64, dist1: WeightedDistribution, dist0: WeightedDistribution) -> Result<Self> {
        Self::new(vec![Stratum {
            id: "all".into(),
            weight: 1.0,
            propensity,
            dist1: Some(dist1),
            dist0: Some(dist0),
        }])
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    /// Arms with no outcome distribution, by stratum.
    pub fn missing_arms(&self) -> Vec<(String, Arm)> {
        let mut out = Vec::new();
        for s in &self.strata {
            if s.dist1.is_none() {
                out.push((s.id.clone(), Arm::Treated));
            }
            if s.dist0.is_none() {
                out.push((s.id.clone(), Arm::Control));
            }
        }
        out
    }

    /// Point-identified values under unconfoundedness.
    pub fn reference(&self) -> Result<Reference> {
        let mut mu1 = 0.0;
        let mut mu0 = 0.0;
        for s in &self.strata {
            if s.weight == 0.0 {
                continue;
            }
            mu1 += s.weight * required(s, Arm::Treated)?.mean();
            mu0 += s.weight * required(s, Arm::Control)?.mean();
        }
        Ok(Reference {
            mu1,
            mu0,
            ate: mu1 - mu0,
        })
    }
}

fn required(s: &Stratum, arm: Arm) -> Result<&WeightedDistribution> {
    let dist = match arm {
        Arm::Treated => s.dist1.as_ref(),
        Arm::Control => s.dist0.as_ref(),
    };
    dist.ok_or_else(|| Error::MissingStratumDistribution {
        stratum: s.id.clone(),
        arm,
    })
}

/// Parameter values that replace the global ones inside one stratum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lam: Option<LambdaPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gam: Option<GammaPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gam_prime: Option<GammaPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<EmsmDelta>,
}

/// Sensitivity parameters for both arms, optionally varying by stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySpec {
    pub lam: LambdaPair,
    /// Outcome box for `Y^1`.
    pub gam: GammaPair,
    /// Outcome box for `Y^0`.
    pub gam_prime: GammaPair,
    /// eMSM reparameterization constant, needed only for [`Model::EmsmRec`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<EmsmDelta>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, StratumOverride>,
}

/// Parameters in force inside one stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumParams {
    pub lam: LambdaPair,
    pub gam: GammaPair,
    pub gam_prime: GammaPair,
    pub delta: Option<EmsmDelta>,
}

impl SensitivitySpec {
    pub fn new(lam: LambdaPair, gam: GammaPair, gam_prime: GammaPair) -> Self {
        Self {
            lam,
            gam,
            gam_prime,
            delta: None,
            overrides: BTreeMap::new(),
        }
    }

    /// `Lambda = Gamma = Gamma' = value` with symmetric boxes.
    pub fn symmetric(value: f64) -> Result<Self> {
        let lam = LambdaPair::symmetric(value)?;
        let gam = GammaPair::symmetric(value)?;
        Ok(Self::new(lam, gam, gam))
    }

    pub fn with_delta(mut self, delta: EmsmDelta) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn for_stratum(&self, id: &str) -> StratumParams {
        let o = self.overrides.get(id);
        StratumParams {
            lam: o.and_then(|o| o.lam).unwrap_or(self.lam),
            gam: o.and_then(|o| o.gam).unwrap_or(self.gam),
            gam_prime: o.and_then(|o| o.gam_prime).unwrap_or(self.gam_prime),
            delta: o.and_then(|o| o.delta).or(self.delta),
        }
    }
}

/// `nu1` bounds in one stratum under `model`.
pub fn nu1_bounds(model: Model, d1: &WeightedDistribution, p: &StratumParams) -> Result<Interval> {
    match model {
        Model::Msm => Ok(msm_nu1_bounds(d1, p.lam)),
        Model::Demsm => demsm_nu1_bounds(d1, p.lam, p.gam),
        Model::EmsmRec => emsm_nu1_bounds_recommended(d1, p.lam, delta_for(p)?),
    }
}

/// `nu0` bounds in one stratum under `model`.
pub fn nu0_bounds(model: Model, d0: &WeightedDistribution, p: &StratumParams) -> Result<Interval> {
    match model {
        Model::Msm => msm_nu0_bounds(d0, p.lam),
        Model::Demsm => demsm_nu0_bounds(d0, p.lam, p.gam_prime),
        Model::EmsmRec => emsm_nu0_bounds_recommended(d0, p.lam, delta_for(p)?),
    }
}

fn delta_for(p: &StratumParams) -> Result<EmsmDelta> {
    p.delta
        .ok_or_else(|| Error::InvalidParameter("the eMSM model needs a delta value".into()))
}

/// Point-identified means under unconfoundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub mu1: f64,
    pub mu0: f64,
    pub ate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumBounds {
    pub id: String,
    pub weight: f64,
    pub propensity: f64,
    /// `None` when the stratum contributes nothing to the `mu1` bounds.
    pub nu1: Option<Interval>,
    pub nu0: Option<Interval>,
    pub reference_nu1: Option<f64>,
    pub reference_nu0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub model: Model,
    pub spec: SensitivitySpec,
    pub strata: Vec<StratumBounds>,
    pub mu1: Interval,
    pub mu0: Interval,
    pub ate: Interval,
    pub reference: Reference,
}

/// Aggregates per-stratum bounds into bounds on `mu1`, `mu0` and the ATE.
///
/// `mu1` collects `w * [e * E(Y | T=1) + (1 - e) * nu1]` and `mu0` collects
/// `w * [(1 - e) * E(Y | T=0) + e * nu0]`. ATE bounds contrast opposite
/// endpoints, which is sharp because one joint law attains the upper `mu1`
/// and lower `mu0` bounds together.
pub fn aggregate_bounds(law: &ObservedLaw, spec: &SensitivitySpec, model: Model) -> Result<BoundsReport> {
    let mut mu1 = Interval::point(0.0);
    let mut mu0 = Interval::point(0.0);
    let mut ref1 = 0.0;
    let mut ref0 = 0.0;
    let mut strata = Vec::with_capacity(law.strata.len());

    for s in &law.strata {
        let p = spec.for_stratum(&s.id);
        let e = s.propensity;
        let w = s.weight;
        let mut row = StratumBounds {
            id: s.id.clone(),
            weight: w,
            propensity: e,
            nu1: None,
            nu0: None,
            reference_nu1: None,
            reference_nu0: None,
        };

        // observed treated mean (weight w*e) and nu1 (weight w*(1-e)) both read dist1
        if w * e > 0.0 || w * (1.0 - e) > 0.0 {
            let d1 = required(s, Arm::Treated)?;
            let m1 = d1.mean();
            let nu1 = nu1_bounds(model, d1, &p)?;
            mu1.lo += w * (e * m1 + (1.0 - e) * nu1.lo);
            mu1.hi += w * (e * m1 + (1.0 - e) * nu1.hi);
            ref1 += w * m1;
            row.nu1 = Some(nu1);
            row.reference_nu1 = Some(m1);
        }
        if w > 0.0 {
            let d0 = required(s, Arm::Control)?;
            let m0 = d0.mean();
            let nu0 = nu0_bounds(model, d0, &p)?;
            mu0.lo += w * ((1.0 - e) * m0 + e * nu0.lo);
            mu0.hi += w * ((1.0 - e) * m0 + e * nu0.hi);
            ref0 += w * m0;
            row.nu0 = Some(nu0);
            row.reference_nu0 = Some(m0);
        }
        strata.push(row);
    }

    Ok(BoundsReport {
        model,
        spec: spec.clone(),
        strata,
        mu1,
        mu0,
        ate: Interval::new(mu1.lo - mu0.hi, mu1.hi - mu0.lo),
        reference: Reference {
            mu1: ref1,
            mu0: ref0,
            ate: ref1 - ref0,
        },
    })
}

/// How the grid values of a sensitivity curve are interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMode {
    /// deMSM with `Lambda = Gamma = Gamma' = value`.
    Demsm,
    /// MSM with `Lambda = value`.
    Msm,
    /// Recommended eMSM with fixed symmetric `Lambda` and `delta = value`.
    EmsmRec { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub value: f64,
    pub mu1: Interval,
    pub mu0: Interval,
    pub ate: Interval,
    pub reference: Reference,
}

/// Bounds at every value of `grid`; rows come back in grid order.
pub fn sensitivity_curve(law: &ObservedLaw, grid: &[f64], mode: CurveMode) -> Result<Vec<CurveRow>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter()
        .map(|&value| {
            let (spec, model) = match mode {
                CurveMode::Demsm => (SensitivitySpec::symmetric(value)?, Model::Demsm),
                CurveMode::Msm => (
                    SensitivitySpec::new(
                        LambdaPair::symmetric(value)?,
                        GammaPair::uninformative(),
                        GammaPair::uninformative(),
                    ),
                    Model::Msm,
                ),
                CurveMode::EmsmRec { lambda } => (
                    SensitivitySpec::new(
                        LambdaPair::symmetric(lambda)?,
                        GammaPair::uninformative(),
                        GammaPair::uninformative(),
                    )
                    .with_delta(EmsmDelta::new(value)?),
                    Model::EmsmRec,
                ),
            };
            let report = aggregate_bounds(law, &spec, model)?;
            Ok(CurveRow {
                value,
                mu1: report.mu1,
                mu0: report.mu0,
                ate: report.ate,
                reference: report.reference,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::tests::arb_dist;
    use crate::params::tests::{arb_gamma, arb_lambda};
    use crate::params::{emsm_implied_lambdas, matching_gammas};
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn uniform3() -> WeightedDistribution {
        WeightedDistribution::uniform(&[0.0, 1.0, 2.0]).unwrap()
    }

    fn half_two() -> LambdaPair {
        LambdaPair::new(0.5, 2.0).unwrap()
    }

    fn assert_interval(got: Interval, lo: f64, hi: f64) {
        assert!(
            (got.lo - lo).abs() <= EPS && (got.hi - hi).abs() <= EPS,
            "got {got:?}, expected ({lo}, {hi})"
        );
    }

    fn uniform_law() -> ObservedLaw {
        ObservedLaw::single(0.5, uniform3(), uniform3()).unwrap()
    }

    #[test]
    fn msm_examples() {
        assert_interval(msm_nu1_bounds(&uniform3(), half_two()), 0.5, 1.5);
        assert_interval(msm_nu1_bounds(&uniform3(), LambdaPair::unit()), 1.0, 1.0);
        let point = WeightedDistribution::point_mass(2.5).unwrap();
        assert_interval(msm_nu1_bounds(&point, half_two()), 2.5, 2.5);
    }

    #[test]
    fn demsm_examples() {
        let g = GammaPair::new(0.5, 2.0).unwrap();
        assert_interval(demsm_nu1_bounds(&uniform3(), half_two(), g).unwrap(), 0.75, 1.25);
        assert_interval(
            demsm_nu1_bounds(&uniform3(), half_two(), GammaPair::unit()).unwrap(),
            1.0,
            1.0,
        );
        let only_treatment = demsm_nu1_bounds(&uniform3(), half_two(), GammaPair::uninformative()).unwrap();
        let only_outcome = demsm_nu1_bounds(&uniform3(), LambdaPair::new(0.0, 1e300).unwrap(), g);
        // an unbounded treatment box is not representable; the outcome-only
        // model is the MSM formula applied to the outcome box
        let outcome_as_msm = msm_nu1_bounds(&uniform3(), g.as_lambda().unwrap());
        assert_interval(only_treatment, 0.5, 1.5);
        assert_interval(outcome_as_msm, 0.5, 1.5);
        assert_interval(only_outcome.unwrap(), 0.5, 1.5);
    }

    #[test]
    fn minform_examples() {
        let g = GammaPair::new(0.5, 2.0).unwrap();
        assert!((demsm_nu1_upper_minform(&uniform3(), half_two(), g).unwrap() - 1.25).abs() <= EPS);
        assert_eq!(
            demsm_nu1_upper_minform(&uniform3(), half_two(), GammaPair::unit()).unwrap(),
            1.0
        );
        assert!(demsm_nu1_upper_minform(&uniform3(), half_two(), GammaPair::uninformative()).is_err());
    }

    #[test]
    fn nu0_examples() {
        let g = GammaPair::new(0.5, 2.0).unwrap();
        assert_interval(demsm_nu0_bounds(&uniform3(), half_two(), g).unwrap(), 0.75, 1.25);
        assert_interval(
            demsm_nu0_bounds(&uniform3(), half_two(), GammaPair::unit()).unwrap(),
            1.0,
            1.0,
        );
        assert_interval(demsm_nu0_bounds(&uniform3(), LambdaPair::unit(), g).unwrap(), 1.0, 1.0);
    }

    #[test]
    fn emsm_examples() {
        let d = uniform3();
        let half = EmsmDelta::new(0.5).unwrap();
        assert_interval(emsm_nu1_bounds_recommended(&d, half_two(), half).unwrap(), 0.75, 1.25);
        assert_interval(
            emsm_nu1_bounds_recommended(&d, half_two(), EmsmDelta::new(1.0).unwrap()).unwrap(),
            0.5,
            1.5,
        );
        assert_interval(
            emsm_nu1_bounds_recommended(&d, half_two(), EmsmDelta::new(0.0).unwrap()).unwrap(),
            1.0,
            1.0,
        );
        let low_tau = LambdaPair::new(0.2, 1.5).unwrap();
        assert!(matches!(
            emsm_nu1_bounds_recommended(&d, low_tau, half),
            Err(Error::TauBelowHalf(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let law = uniform_law();
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        let r = aggregate_bounds(&law, &spec, Model::Demsm).unwrap();
        assert_interval(r.mu1, 0.875, 1.125);
        assert_interval(r.mu0, 0.875, 1.125);
        assert_interval(r.ate, -0.25, 0.25);

        let msm = aggregate_bounds(&law, &spec, Model::Msm).unwrap();
        assert_interval(msm.ate, -0.5, 0.5);
        assert!(msm.ate.contains(&r.ate, 0.0) && msm.ate.width() > r.ate.width());

        let treated_only = ObservedLaw::new(vec![Stratum {
            id: "t".into(),
            weight: 1.0,
            propensity: 1.0,
            dist1: Some(uniform3()),
            dist0: Some(WeightedDistribution::point_mass(0.0).unwrap()),
        }])
        .unwrap();
        let r = aggregate_bounds(&treated_only, &spec, Model::Demsm).unwrap();
        assert_interval(r.mu1, 1.0, 1.0);
    }

    #[test]
    fn missing_arm_handling() {
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        let law = ObservedLaw::new(vec![Stratum {
            id: "a".into(),
            weight: 1.0,
            propensity: 0.0,
            dist1: None,
            dist0: Some(uniform3()),
        }])
        .unwrap();
        assert!(matches!(
            aggregate_bounds(&law, &spec, Model::Demsm),
            Err(Error::MissingStratumDistribution { arm: Arm::Treated, .. })
        ));
        let law = ObservedLaw::new(vec![
            Stratum {
                id: "a".into(),
                weight: 1.0,
                propensity: 0.5,
                dist1: Some(uniform3()),
                dist0: Some(uniform3()),
            },
            Stratum {
                id: "b".into(),
                weight: 0.0,
                propensity: 0.0,
                dist1: None,
                dist0: None,
            },
        ])
        .unwrap();
        let r = aggregate_bounds(&law, &spec, Model::Demsm).unwrap();
        assert_interval(r.ate, -0.25, 0.25);
        assert!(r.strata[1].nu1.is_none() && r.strata[1].nu0.is_none());
        assert_eq!(law.missing_arms().len(), 2);
    }

    #[test]
    fn law_validation() {
        let s = |id: &str, w: f64| Stratum {
            id: id.into(),
            weight: w,
            propensity: 0.5,
            dist1: Some(uniform3()),
            dist0: Some(uniform3()),
        };
        assert!(ObservedLaw::new(vec![s("a", 0.5), s("b", 0.4)]).is_err());
        assert!(ObservedLaw::new(vec![s("a", 0.5), s("a", 0.5)]).is_err());
        assert!(ObservedLaw::new(vec![]).is_err());
        let json = serde_json::to_string(&ObservedLaw::new(vec![s("a", 0.5), s("b", 0.5)]).unwrap()).unwrap();
        let back: ObservedLaw = serde_json::from_str(&json).unwrap();
        assert_eq!(back.strata().len(), 2);
    }

    #[test]
    fn overrides_apply_per_stratum() {
        let mut spec = SensitivitySpec::symmetric(2.0).unwrap();
        spec.overrides.insert(
            "b".into(),
            StratumOverride {
                gam: Some(GammaPair::unit()),
                gam_prime: Some(GammaPair::unit()),
                ..Default::default()
            },
        );
        let law = ObservedLaw::new(vec![
            Stratum {
                id: "a".into(),
                weight: 0.5,
                propensity: 0.5,
                dist1: Some(uniform3()),
                dist0: Some(uniform3()),
            },
            Stratum {
                id: "b".into(),
                weight: 0.5,
                propensity: 0.5,
                dist1: Some(uniform3()),
                dist0: Some(uniform3()),
            },
        ])
        .unwrap();
        let r = aggregate_bounds(&law, &spec, Model::Demsm).unwrap();
        assert_interval(r.strata[0].nu1.unwrap(), 0.75, 1.25);
        assert_interval(r.strata[1].nu1.unwrap(), 1.0, 1.0);
    }

    #[test]
    fn curve_examples() {
        let law = uniform_law();
        let rows = sensitivity_curve(&law, &[1.0], CurveMode::Demsm).unwrap();
        assert_interval(rows[0].ate, 0.0, 0.0);
        assert_interval(rows[0].mu1, rows[0].reference.mu1, rows[0].reference.mu1);

        let rows = sensitivity_curve(&law, &[1.0, 2.0], CurveMode::Demsm).unwrap();
        assert_interval(rows[1].mu1, 0.875, 1.125);
        assert_interval(rows[1].ate, -0.25, 0.25);

        let rows = sensitivity_curve(&law, &[2.0, 3.0], CurveMode::Demsm).unwrap();
        assert!(rows[1].ate.contains(&rows[0].ate, 0.0));
        assert!(matches!(
            sensitivity_curve(&law, &[], CurveMode::Msm),
            Err(Error::EmptyGrid)
        ));
        assert!(sensitivity_curve(&law, &[0.5], CurveMode::Demsm).is_err());

        let rows = sensitivity_curve(&law, &[0.0, 0.5, 1.0], CurveMode::EmsmRec { lambda: 2.0 }).unwrap();
        assert_interval(rows[2].ate, -0.5, 0.5);
    }

    proptest! {
        #[test]
        fn minform_equals_implied_form(d in arb_dist(), lam in arb_lambda(), gam in arb_gamma()) {
            let hi = demsm_nu1_bounds(&d, lam, gam).unwrap().hi;
            let min_form = demsm_nu1_upper_minform(&d, lam, gam).unwrap();
            prop_assert!((hi - min_form).abs() <= 1e-9, "{} vs {}", hi, min_form);
        }

        #[test]
        fn demsm_tightens_msm(d in arb_dist(), lam in arb_lambda(), gam in arb_gamma()) {
            let de = demsm_nu1_bounds(&d, lam, gam).unwrap();
            prop_assert!(msm_nu1_bounds(&d, lam).contains(&de, 1e-9));
            let inner = LambdaPair::new(
                lam.lower().max(gam.lower()),
                lam.upper().min(gam.upper().unwrap()),
            ).unwrap();
            prop_assert!(msm_nu1_bounds(&d, inner).contains(&de, 1e-9));
        }

        #[test]
        fn swap_symmetry(d in arb_dist(), lam in arb_lambda(), gam in arb_gamma()) {
            let a = demsm_nu1_bounds(&d, lam, gam).unwrap();
            let b = demsm_nu1_bounds(&d, gam.as_lambda().unwrap(), GammaPair::from(lam)).unwrap();
            prop_assert!((a.lo - b.lo).abs() <= 1e-9 && (a.hi - b.hi).abs() <= 1e-9);
        }

        #[test]
        fn emsm_matches_demsm_and_msm(d in arb_dist(), lambda in 1.0f64..8.0, delta in 0.0f64..=1.0) {
            let lam = LambdaPair::symmetric(lambda).unwrap();
            prop_assume!(lam.tau() < 1.0);
            let delta = EmsmDelta::new(delta).unwrap();
            let e = emsm_nu1_bounds_recommended(&d, lam, delta).unwrap();
            let de = demsm_nu1_bounds(&d, lam, matching_gammas(delta, lam.tau()).unwrap()).unwrap();
            let m = msm_nu1_bounds(&d, emsm_implied_lambdas(delta, lam));
            prop_assert!((e.lo - de.lo).abs() <= 1e-9 && (e.hi - de.hi).abs() <= 1e-9);
            prop_assert!((e.lo - m.lo).abs() <= 1e-9 && (e.hi - m.hi).abs() <= 1e-9);
        }

        #[test]
        fn symmetric_deviation_halves(d in arb_dist()) {
            let lam = LambdaPair::symmetric(2.0).unwrap();
            let gam = GammaPair::symmetric(2.0).unwrap();
            let de = demsm_nu1_bounds(&d, lam, gam).unwrap();
            let msm = msm_nu1_bounds(&d, lam);
            let mean = d.mean();
            prop_assert!(((de.hi - mean) - 0.5 * (msm.hi - mean)).abs() <= 1e-12);
            prop_assert!(((mean - de.lo) - 0.5 * (mean - msm.lo)).abs() <= 1e-12);
        }

        #[test]
        fn widths_monotone(d in arb_dist(), l in 1.0f64..6.0, g in 1.0f64..6.0, bump in 0.0f64..3.0) {
            let w = |l: f64, g: f64| {
                demsm_nu1_bounds(&d, LambdaPair::symmetric(l).unwrap(), GammaPair::symmetric(g).unwrap())
                    .unwrap()
            };
            let base = w(l, g);
            prop_assert!(w(l + bump, g).contains(&base, 1e-12));
            prop_assert!(w(l, g + bump).contains(&base, 1e-12));
            let small = w(l.min(g), l.min(g));
            let large = w(l.max(g), l.max(g));
            prop_assert!(base.contains(&small, 1e-12) && large.contains(&base, 1e-12));
        }
    }
}
