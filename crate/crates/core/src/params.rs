//! Sensitivity parameters and the algebra relating the treatment box, the
//! outcome box, the implied MSM box and the recommended eMSM deltas.

use serde::{Deserialize, Serialize};

use crate::dist::WeightedDistribution;
use crate::error::{Error, Result};

/// Level at which the optimal density ratio switches from the lower to the
/// upper end of the box `[lower, upper]`: `(upper - 1) / (upper - lower)`,
/// with the degenerate box `[1, 1]` mapped to 1/2.
pub fn switch_level(lower: f64, upper: f64) -> f64 {
    if lower == 1.0 && upper == 1.0 {
        0.5
    } else {
        (upper - 1.0) / (upper - lower)
    }
}

/// `c / (1 - c)`.
pub fn odds(c: f64) -> f64 {
    c / (1.0 - c)
}

/// Treatment sensitivity parameters `0 <= lower <= 1 <= upper < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLambda")]
pub struct LambdaPair {
    lower: f64,
    upper: f64,
}

#[derive(Deserialize)]
struct RawLambda {
    lower: f64,
    upper: f64,
}

impl TryFrom<RawLambda> for LambdaPair {
    type Error = Error;
    fn try_from(raw: RawLambda) -> Result<Self> {
        LambdaPair::new(raw.lower, raw.upper)
    }
}

impl LambdaPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&lower) && upper >= 1.0 && upper.is_finite() {
            Ok(Self { lower, upper })
        } else {
            Err(Error::InvalidLambda { lower, upper })
        }
    }

    /// The symmetric choice `(1 / lambda, lambda)` for `lambda >= 1`.
    pub fn symmetric(lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be ≥ 1 for symmetric specification, got {lambda}"
            )));
        }
        Self::new(1.0 / lambda, lambda)
    }

    /// No unmeasured confounding of treatment.
    pub fn unit() -> Self {
        Self { lower: 1.0, upper: 1.0 }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn tau(&self) -> f64 {
        switch_level(self.lower, self.upper)
    }

    /// The box governing the control arm, `(1 / upper, 1 / lower)`.
    pub fn control(&self) -> Result<Self> {
        if self.lower == 0.0 {
            return Err(Error::ZeroLowerLambda);
        }
        Ok(Self {
            lower: 1.0 / self.upper,
            upper: 1.0 / self.lower,
        })
    }
}

/// Outcome sensitivity parameters `0 <= lower <= 1 <= upper`, where the upper
/// parameter may be unbounded (`None`) only together with `lower == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGamma")]
pub struct GammaPair {
    lower: f64,
    upper: Option<f64>,
}

#[derive(Deserialize)]
struct RawGamma {
    lower: f64,
    upper: Option<f64>,
}

impl TryFrom<RawGamma> for GammaPair {
    type Error = Error;
    fn try_from(raw: RawGamma) -> Result<Self> {
        match raw.upper {
            Some(upper) => GammaPair::new(raw.lower, upper),
            None if raw.lower == 0.0 => Ok(GammaPair::uninformative()),
            None => Err(Error::UnboundedGammaWithNonzeroGamma1(raw.lower)),
        }
    }
}

impl GammaPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if upper == f64::INFINITY {
            return if lower == 0.0 {
                Ok(Self::uninformative())
            } else {
                Err(Error::UnboundedGammaWithNonzeroGamma1(lower))
            };
        }
        if (0.0..=1.0).contains(&lower) && upper >= 1.0 && upper.is_finite() {
            Ok(Self {
                lower,
                upper: Some(upper),
            })
        } else {
            Err(Error::InvalidGamma { lower, upper })
        }
    }

    /// `(1 / gamma, gamma)`; `gamma = inf` gives the uninformative pair.
    pub fn symmetric(gamma: f64) -> Result<Self> {
        if gamma == f64::INFINITY {
            return Ok(Self::uninformative());
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be ≥ 1 for symmetric specification, got {gamma}"
            )));
        }
        Self::new(1.0 / gamma, gamma)
    }

    /// `(0, inf)`: the outcome constraint is void.
    pub fn uninformative() -> Self {
        Self {
            lower: 0.0,
            upper: None,
        }
    }

    pub fn unit() -> Self {
        Self {
            lower: 1.0,
            upper: Some(1.0),
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    pub fn is_uninformative(&self) -> bool {
        self.upper.is_none()
    }

    pub fn bounded_upper(&self) -> Result<f64> {
        self.upper.ok_or(Error::UnboundedGamma)
    }

    /// `tau_Gamma`; requires a bounded pair.
    pub fn tau(&self) -> Result<f64> {
        Ok(switch_level(self.lower, self.bounded_upper()?))
    }

    /// The same box viewed as treatment parameters.
    pub fn as_lambda(&self) -> Result<LambdaPair> {
        LambdaPair::new(self.lower, self.bounded_upper()?)
    }
}

impl From<LambdaPair> for GammaPair {
    fn from(lam: LambdaPair) -> Self {
        Self {
            lower: lam.lower,
            upper: Some(lam.upper),
        }
    }
}

/// The MSM box implied jointly by a treatment box and an outcome box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedLambda {
    pub lambda_bar1: f64,
    pub lambda_bar2: f64,
    pub tau_bar: f64,
}

impl ImpliedLambda {
    fn from_box(lower: f64, upper: f64) -> Self {
        Self {
            lambda_bar1: lower,
            lambda_bar2: upper,
            tau_bar: switch_level(lower, upper),
        }
    }

    pub fn width(&self) -> f64 {
        self.lambda_bar2 - self.lambda_bar1
    }

    pub fn as_pair(&self) -> LambdaPair {
        LambdaPair {
            lower: self.lambda_bar1,
            upper: self.lambda_bar2,
        }
    }
}

/// Implied MSM parameters of the treated-arm model.
///
/// Evaluated in the product form
/// `1 - min{(1 - L1)(1 - G1), (L2 - 1)(G2 - 1)}` and
/// `1 + min{(1 - L1)(G2 - 1), (L2 - 1)(1 - G1)}`, which equals the
/// `(L2 - L1)(G2 - G1) min[...]` form with the switch levels expanded and
/// stays exact for degenerate boxes.
pub fn implied_lambda(lam: LambdaPair, gam: GammaPair) -> Result<ImpliedLambda> {
    let Some(g2) = gam.upper else {
        return Ok(ImpliedLambda::from_box(lam.lower, lam.upper));
    };
    let (l1, l2, g1) = (lam.lower, lam.upper, gam.lower);
    let lower = 1.0 - ((1.0 - l1) * (1.0 - g1)).min((l2 - 1.0) * (g2 - 1.0));
    let upper = 1.0 + ((1.0 - l1) * (g2 - 1.0)).min((l2 - 1.0) * (1.0 - g1));
    Ok(ImpliedLambda::from_box(lower, upper))
}

/// Implied MSM parameters of the control-arm model: the treated-arm map
/// applied to the control box `(1 / L2, 1 / L1)` and the control outcome box.
pub fn implied_lambda_control(lam: LambdaPair, gam_prime: GammaPair) -> Result<ImpliedLambda> {
    implied_lambda(lam.control()?, gam_prime)
}

/// The reparameterization constant of the recommended eMSM specification.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EmsmDelta(f64);

impl EmsmDelta {
    pub fn new(delta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&delta) {
            Ok(Self(delta))
        } else {
            Err(Error::DeltaOutOfRange(delta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EmsmDelta {
    type Error = Error;
    fn try_from(delta: f64) -> Result<Self> {
        Self::new(delta)
    }
}

impl From<EmsmDelta> for f64 {
    fn from(delta: EmsmDelta) -> f64 {
        delta.0
    }
}

/// Mean-constraint parameters `(Delta1, Delta2)` implied by an outcome box.
pub fn implied_emsm_deltas(gam: GammaPair, d: &WeightedDistribution) -> Result<(f64, f64)> {
    let g2 = gam.bounded_upper()?;
    let width = g2 - gam.lower;
    let tau_g = switch_level(gam.lower, g2);
    Ok((
        width * d.quantile_deviation(1.0 - tau_g),
        width * d.quantile_deviation(tau_g),
    ))
}

/// The recommended `(Delta1, Delta2)` specification indexed by `delta`.
pub fn emsm_recommended_deltas(delta: EmsmDelta, lam: LambdaPair, d: &WeightedDistribution) -> (f64, f64) {
    let tau = lam.tau();
    let m = tau.max(1.0 - tau);
    if delta.0 == 0.0 || m >= 1.0 {
        // m = 1 only for a one-sided box; the deviations vanish there
        return (0.0, 0.0);
    }
    let scale = delta.0 / (1.0 - m);
    (scale * d.quantile_deviation(1.0 - m), scale * d.quantile_deviation(m))
}

/// Smallest outcome box `(1 - delta, 1 + delta * odds(tau))` whose deMSM bounds
/// reproduce the recommended eMSM bounds.
pub fn matching_gammas(delta: EmsmDelta, tau: f64) -> Result<GammaPair> {
    if tau.is_nan() || tau < 0.5 {
        return Err(Error::TauBelowHalf(tau));
    }
    if tau >= 1.0 {
        return Err(Error::InvalidParameter(format!("tau must be below 1, got {tau}")));
    }
    GammaPair::new(1.0 - delta.0, 1.0 + delta.0 * odds(tau))
}

/// Whether the symmetric box `(1 - delta, 1 / (1 - delta))` also reproduces
/// the recommended eMSM bounds, i.e. `delta >= (2 tau - 1) / tau`.
pub fn symmetric_matching_feasible(delta: EmsmDelta, tau: f64) -> bool {
    delta.0 >= (2.0 * tau - 1.0) / tau
}

/// MSM parameters whose bounds coincide with the recommended eMSM bounds.
pub fn emsm_implied_lambdas(delta: EmsmDelta, lam: LambdaPair) -> LambdaPair {
    LambdaPair {
        lower: 1.0 - delta.0 * (1.0 - lam.lower),
        upper: 1.0 + delta.0 * (lam.upper - 1.0),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= EPS
    }

    fn half_two() -> LambdaPair {
        LambdaPair::new(0.5, 2.0).unwrap()
    }

    fn uniform3() -> WeightedDistribution {
        WeightedDistribution::uniform(&[0.0, 1.0, 2.0]).unwrap()
    }

    /// The min[...] form with explicit switch levels.
    fn implied_tau_form(lam: LambdaPair, g1: f64, g2: f64) -> (f64, f64) {
        let tau = lam.tau();
        let tg = switch_level(g1, g2);
        let pre = lam.width() * (g2 - g1);
        (
            1.0 - pre * ((1.0 - tau) * (1.0 - tg)).min(tau * tg),
            1.0 + pre * ((1.0 - tau) * tg).min(tau * (1.0 - tg)),
        )
    }

    #[test]
    fn validation() {
        assert!(LambdaPair::new(1.2, 2.0).is_err());
        assert!(LambdaPair::new(0.5, 0.9).is_err());
        assert!(LambdaPair::new(0.5, f64::INFINITY).is_err());
        assert!(LambdaPair::symmetric(0.5).is_err());
        assert!(GammaPair::new(-0.1, 2.0).is_err());
        assert!(matches!(
            GammaPair::new(0.2, f64::INFINITY),
            Err(Error::UnboundedGammaWithNonzeroGamma1(_))
        ));
        assert!(GammaPair::new(0.0, f64::INFINITY).unwrap().is_uninformative());
        assert!(EmsmDelta::new(1.1).is_err());
        assert!(LambdaPair::new(0.0, 2.0).unwrap().control().is_err());
    }

    #[test]
    fn tau_examples() {
        assert!(close(half_two().tau(), 2.0 / 3.0));
        assert_eq!(LambdaPair::unit().tau(), 0.5);
        assert!(close(LambdaPair::symmetric(3.0).unwrap().tau(), 0.75));
    }

    #[test]
    fn implied_examples() {
        let imp = implied_lambda(half_two(), GammaPair::new(0.5, 2.0).unwrap()).unwrap();
        assert_eq!((imp.lambda_bar1, imp.lambda_bar2), (0.75, 1.5));
        assert_eq!(imp.tau_bar, 2.0 / 3.0);

        let imp = implied_lambda(half_two(), GammaPair::unit()).unwrap();
        assert_eq!((imp.lambda_bar1, imp.lambda_bar2, imp.tau_bar), (1.0, 1.0, 0.5));

        let imp = implied_lambda(half_two(), GammaPair::uninformative()).unwrap();
        assert_eq!((imp.lambda_bar1, imp.lambda_bar2), (0.5, 2.0));
    }

    #[test]
    fn implied_control_examples() {
        let imp = implied_lambda_control(half_two(), GammaPair::new(0.5, 2.0).unwrap()).unwrap();
        assert!(close(imp.lambda_bar1, 0.75) && close(imp.lambda_bar2, 1.5));
        assert!(close(imp.tau_bar, 2.0 / 3.0));
        let control = half_two().control().unwrap();
        assert!(close(control.tau(), 2.0 * (1.0 - half_two().tau())));

        let imp = implied_lambda_control(half_two(), GammaPair::unit()).unwrap();
        assert_eq!((imp.lambda_bar1, imp.lambda_bar2), (1.0, 1.0));
        let imp = implied_lambda_control(LambdaPair::unit(), GammaPair::new(0.3, 4.0).unwrap()).unwrap();
        assert_eq!((imp.lambda_bar1, imp.lambda_bar2), (1.0, 1.0));
    }

    #[test]
    fn implied_delta_examples() {
        let (d1, d2) = implied_emsm_deltas(GammaPair::new(0.5, 2.0).unwrap(), &uniform3()).unwrap();
        assert!(close(d1, 0.5) && close(d2, 0.5));
        assert_eq!(implied_emsm_deltas(GammaPair::unit(), &uniform3()).unwrap(), (0.0, 0.0));
        let point = WeightedDistribution::point_mass(3.0).unwrap();
        assert_eq!(
            implied_emsm_deltas(GammaPair::new(0.2, 7.0).unwrap(), &point).unwrap(),
            (0.0, 0.0)
        );
        assert!(implied_emsm_deltas(GammaPair::uninformative(), &uniform3()).is_err());
    }

    #[test]
    fn recommended_delta_examples() {
        let d = uniform3();
        let (a, b) = emsm_recommended_deltas(EmsmDelta::new(0.5).unwrap(), half_two(), &d);
        assert!(close(a, 0.5) && close(b, 0.5));
        assert_eq!(
            emsm_recommended_deltas(EmsmDelta::new(0.0).unwrap(), half_two(), &d),
            (0.0, 0.0)
        );
        let (a, b) = emsm_recommended_deltas(EmsmDelta::new(1.0).unwrap(), half_two(), &d);
        assert!(close(a, 1.0) && close(b, 1.0));
    }

    #[test]
    fn matching_examples() {
        let delta = EmsmDelta::new(0.5).unwrap();
        let g = matching_gammas(delta, 2.0 / 3.0).unwrap();
        assert!(close(g.lower(), 0.5) && close(g.upper().unwrap(), 2.0));
        assert!(close(g.tau().unwrap(), 2.0 / 3.0));
        assert_eq!(
            matching_gammas(EmsmDelta::new(0.0).unwrap(), 0.7).unwrap(),
            GammaPair::unit()
        );
        assert!(matches!(matching_gammas(delta, 0.4), Err(Error::TauBelowHalf(_))));
        assert!(symmetric_matching_feasible(delta, 2.0 / 3.0));
        assert!(!symmetric_matching_feasible(EmsmDelta::new(0.49).unwrap(), 2.0 / 3.0));
    }

    #[test]
    fn emsm_lambda_examples() {
        let l = emsm_implied_lambdas(EmsmDelta::new(0.5).unwrap(), half_two());
        assert_eq!((l.lower(), l.upper()), (0.75, 1.5));
        assert_eq!(
            emsm_implied_lambdas(EmsmDelta::new(1.0).unwrap(), half_two()),
            half_two()
        );
        assert_eq!(
            emsm_implied_lambdas(EmsmDelta::new(0.0).unwrap(), half_two()),
            LambdaPair::unit()
        );
    }

    #[test]
    fn simplified_regime() {
        for (l, g) in [(1.5, 3.0), (2.0, 2.0), (1.2, 6.0), (4.0, 1.5)] {
            let lam = LambdaPair::symmetric(l).unwrap();
            let gam = GammaPair::symmetric(g).unwrap();
            let imp = implied_lambda(lam, gam).unwrap();
            let (small, large) = if l <= g { (l, g) } else { (g, l) };
            assert!(close(imp.lambda_bar1, 1.0 - (1.0 - 1.0 / large) * (1.0 - 1.0 / small)));
            assert!(close(imp.lambda_bar2, 1.0 + (1.0 - 1.0 / large) * (small - 1.0)));
            assert!(close(imp.tau_bar, LambdaPair::symmetric(small).unwrap().tau()));
        }
    }

    pub(crate) fn arb_lambda() -> impl Strategy<Value = LambdaPair> {
        (0.0f64..=1.0, 1.0f64..8.0).prop_map(|(a, b)| LambdaPair::new(a, b).unwrap())
    }

    pub(crate) fn arb_gamma() -> impl Strategy<Value = GammaPair> {
        (0.0f64..=1.0, 1.0f64..8.0).prop_map(|(a, b)| GammaPair::new(a, b).unwrap())
    }

    proptest! {
        #[test]
        fn product_form_matches_tau_form(lam in arb_lambda(), gam in arb_gamma()) {
            let imp = implied_lambda(lam, gam).unwrap();
            let (a, b) = implied_tau_form(lam, gam.lower(), gam.upper().unwrap());
            prop_assert!((imp.lambda_bar1 - a).abs() < 1e-9);
            prop_assert!((imp.lambda_bar2 - b).abs() < 1e-9);
        }

        #[test]
        fn sandwich(lam in arb_lambda(), gam in arb_gamma()) {
            let imp = implied_lambda(lam, gam).unwrap();
            let g2 = gam.upper().unwrap();
            prop_assert!(lam.lower().max(gam.lower()) <= imp.lambda_bar1 + 1e-12);
            prop_assert!(imp.lambda_bar1 <= 1.0 && 1.0 <= imp.lambda_bar2);
            prop_assert!(imp.lambda_bar2 <= lam.upper().min(g2) + 1e-12);
            prop_assert!((0.0..=1.0).contains(&imp.tau_bar));
        }

        #[test]
        fn swap_symmetry(lam in arb_lambda(), gam in arb_gamma()) {
            let a = implied_lambda(lam, gam).unwrap();
            let b = implied_lambda(gam.as_lambda().unwrap(), GammaPair::from(lam)).unwrap();
            prop_assert!((a.lambda_bar1 - b.lambda_bar1).abs() < 1e-15);
            prop_assert!((a.lambda_bar2 - b.lambda_bar2).abs() < 1e-15);
        }

        #[test]
        fn monotone_in_upper_parameters(
            lam in arb_lambda(), gam in arb_gamma(), bump in 0.0f64..3.0
        ) {
            let base = implied_lambda(lam, gam).unwrap();
            let wider_l = LambdaPair::new(lam.lower(), lam.upper() + bump).unwrap();
            let wider_g = GammaPair::new(gam.lower(), gam.upper().unwrap() + bump).unwrap();
            for imp in [implied_lambda(wider_l, gam).unwrap(), implied_lambda(lam, wider_g).unwrap()] {
                prop_assert!(imp.lambda_bar2 >= base.lambda_bar2 - 1e-15);
                prop_assert!(imp.lambda_bar1 <= base.lambda_bar1 + 1e-15);
            }
            let lower_l = LambdaPair::new(lam.lower() * 0.5, lam.upper()).unwrap();
            let lower_g = GammaPair::new(gam.lower() * 0.5, gam.upper().unwrap()).unwrap();
            for imp in [implied_lambda(lower_l, gam).unwrap(), implied_lambda(lam, lower_g).unwrap()] {
                prop_assert!(imp.lambda_bar2 >= base.lambda_bar2 - 1e-15);
                prop_assert!(imp.lambda_bar1 <= base.lambda_bar1 + 1e-15);
            }
        }

        #[test]
        fn matching_round_trip(
            d in crate::dist::tests::arb_dist(),
            lambda in 1.0f64..8.0,
            delta in 0.0f64..=1.0,
            skew in 1.0f64..3.0
        ) {
            // asymmetric boxes with tau >= 1/2
            let lam = LambdaPair::new(1.0 / (lambda * skew), lambda).unwrap();
            prop_assume!(lam.tau() >= 0.5 && lam.tau() < 1.0);
            let delta = EmsmDelta::new(delta).unwrap();
            let gam = matching_gammas(delta, lam.tau()).unwrap();
            let implied = implied_emsm_deltas(gam, &d).unwrap();
            let recommended = emsm_recommended_deltas(delta, lam, &d);
            prop_assert!((implied.0 - recommended.0).abs() < 1e-9);
            prop_assert!((implied.1 - recommended.1).abs() < 1e-9);
        }
    }
}
