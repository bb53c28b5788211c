//! Independent checks on the closed-form bounds: an exact greedy solver for
//! the box-constrained density-ratio program, a grid search over binary
//! unmeasured confounders, and an explicit joint law attaining the bounds
//! together with an auditor for it.

use serde::{Deserialize, Serialize};

use crate::bounds::{demsm_nu0_bounds, demsm_nu1_bounds, StratumParams};
use crate::dist::WeightedDistribution;
use crate::error::{Error, Result};
use crate::params::{implied_lambda, implied_lambda_control, odds, GammaPair, LambdaPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Max,
    Min,
}

/// Optimal density ratio for `E[ratio(Y) * Y]` subject to
/// `lower <= ratio(y) <= upper` and `E[ratio(Y)] = 1`.
///
/// Fractional-knapsack greedy: every point starts at `lower`, then points are
/// raised to `upper` in order of decreasing (max) or increasing (min) value
/// until the normalization budget is spent, with one fractional pivot.
pub fn greedy_ratios(d: &WeightedDistribution, lower: f64, upper: f64, direction: Direction) -> Result<Vec<f64>> {
    greedy_ratios_slice(d.probs(), lower, upper, direction)
}

fn greedy_ratios_slice(probs: &[f64], lower: f64, upper: f64, direction: Direction) -> Result<Vec<f64>> {
    if !(lower <= 1.0 && upper >= 1.0) {
        return Err(Error::InfeasibleBox { lower, upper });
    }
    let n = probs.len();
    let mut ratios = vec![lower; n];
    let mut budget = 1.0 - lower;
    let order: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Max => Box::new((0..n).rev()),
        Direction::Min => Box::new(0..n),
    };
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let room = probs[i] * (upper - lower);
        let add = room.min(budget);
        ratios[i] = if add == room { upper } else { lower + add / probs[i] };
        budget -= add;
    }
    Ok(ratios)
}

fn weighted_value(support: &[f64], probs: &[f64], ratios: &[f64]) -> f64 {
    support.iter().zip(probs).zip(ratios).map(|((y, p), r)| y * p * r).sum()
}

/// Optimal value of the density-ratio program over the box `lam`.
pub fn greedy_density_ratio_bound(d: &WeightedDistribution, lam: LambdaPair, direction: Direction) -> Result<f64> {
    let ratios = greedy_ratios(d, lam.lower(), lam.upper(), direction)?;
    Ok(weighted_value(d.support(), d.probs(), &ratios))
}

/// Best `E_Q(Y^1 | T = 0)` over joint laws with a binary confounder, found by
/// grid search over `p = Q(U = 1 | T = 1)` and the ratio `lambda(1)`.
///
/// For fixed `(p, lambda(1))` the other ratio is forced by normalization and
/// the objective is `lambda(0) E(Y) + p (lambda(1) - lambda(0)) S`, where
/// `S = E[omega(Y, 1) Y]` is itself a density-ratio program whose box keeps
/// both `omega(y, 1)` and the implied `omega(y, 0)` inside the outcome box.
/// The search never exceeds the sharp bound and approaches it as the grid is
/// refined.
pub fn binary_u_grid_oracle(
    d: &WeightedDistribution,
    lam: LambdaPair,
    gam: GammaPair,
    direction: Direction,
    resolution: f64,
) -> Result<f64> {
    let g2 = gam.bounded_upper()?;
    let g1 = gam.lower();
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::ResolutionOutOfRange(resolution));
    }
    const FEASIBILITY_TOL: f64 = 1e-12;
    let steps = (1.0 / resolution).ceil() as usize;
    let mean = d.mean();
    let (l1, l2) = (lam.lower(), lam.upper());
    let mut best = match direction {
        Direction::Max => f64::NEG_INFINITY,
        Direction::Min => f64::INFINITY,
    };

    for i in 1..steps {
        let p = i as f64 / steps as f64;
        // both ends straddle 1 exactly; clamp away rounding
        let inner_lower = g1.max((1.0 - (1.0 - p) * g2) / p).min(1.0);
        let inner_upper = g2.min((1.0 - (1.0 - p) * g1) / p).max(1.0);
        let s_max = weighted_value(
            d.support(),
            d.probs(),
            &greedy_ratios(d, inner_lower, inner_upper, Direction::Max)?,
        );
        let s_min = weighted_value(
            d.support(),
            d.probs(),
            &greedy_ratios(d, inner_lower, inner_upper, Direction::Min)?,
        );
        for k in 0..=steps {
            let ratio1 = l1 + (l2 - l1) * k as f64 / steps as f64;
            let ratio0 = (1.0 - p * ratio1) / (1.0 - p);
            if ratio0 < l1 - FEASIBILITY_TOL || ratio0 > l2 + FEASIBILITY_TOL {
                continue;
            }
            let slope = p * (ratio1 - ratio0);
            let value = match direction {
                Direction::Max => ratio0 * mean + slope * if slope >= 0.0 { s_max } else { s_min },
                Direction::Min => ratio0 * mean + slope * if slope >= 0.0 { s_min } else { s_max },
            };
            best = match direction {
                Direction::Max => best.max(value),
                Direction::Min => best.min(value),
            };
        }
    }
    Ok(best)
}

/// One arm of a witness: the observed law of `Y` in that arm and the laws of
/// the potential outcome given each value of the binary confounder, all on
/// the observed support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmWitness {
    pub support: Vec<f64>,
    pub observed: Vec<f64>,
    pub given_u0: Vec<f64>,
    pub given_u1: Vec<f64>,
}

impl ArmWitness {
    fn mean_given(&self, u: u8) -> f64 {
        let probs = if u == 1 { &self.given_u1 } else { &self.given_u0 };
        self.support.iter().zip(probs).map(|(y, p)| y * p).sum()
    }

    pub fn law_given(&self, u: u8) -> Result<WeightedDistribution> {
        let probs = if u == 1 { &self.given_u1 } else { &self.given_u0 };
        WeightedDistribution::from_pairs(self.support.iter().copied().zip(probs.iter().copied()))
    }
}

/// How the two potential outcomes are joined given `(T, U)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `Y^0` and `Y^1` independent given `(T, U)`, with laws free of `T`.
    Product,
}

/// Joint law of `(Y^0, Y^1, T, U)` within one stratum, with binary `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessJoint {
    /// Q(T = 1).
    pub p_treat: f64,
    /// Q(U = 1 | T = 1).
    pub u_given_t1: f64,
    /// Q(U = 1 | T = 0).
    pub u_given_t0: f64,
    /// Laws of `Y^1` given U.
    pub y1: ArmWitness,
    /// Laws of `Y^0` given U.
    pub y0: ArmWitness,
    pub coupling: Coupling,
}

impl WitnessJoint {
    /// `E_Q(Y^1 | T = 0)`.
    pub fn nu1(&self) -> f64 {
        self.u_given_t0 * self.y1.mean_given(1) + (1.0 - self.u_given_t0) * self.y1.mean_given(0)
    }

    /// `E_Q(Y^0 | T = 1)`.
    pub fn nu0(&self) -> f64 {
        self.u_given_t1 * self.y0.mean_given(1) + (1.0 - self.u_given_t1) * self.y0.mean_given(0)
    }

    /// `E_Q(Y^1)`.
    pub fn mu1(&self) -> f64 {
        let treated = self.u_given_t1 * self.y1.mean_given(1) + (1.0 - self.u_given_t1) * self.y1.mean_given(0);
        self.p_treat * treated + (1.0 - self.p_treat) * self.nu1()
    }

    /// `E_Q(Y^0)`.
    pub fn mu0(&self) -> f64 {
        let control = self.u_given_t0 * self.y0.mean_given(1) + (1.0 - self.u_given_t0) * self.y0.mean_given(0);
        (1.0 - self.p_treat) * control + self.p_treat * self.nu0()
    }

    /// Treatment density ratios `Q(u | T = 0) / Q(u | T = 1)` for `u = 0, 1`;
    /// `None` where `Q(u | T = 1) = 0`.
    pub fn treatment_ratios(&self) -> [Option<f64>; 2] {
        let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
        [
            ratio(1.0 - self.u_given_t0, 1.0 - self.u_given_t1),
            ratio(self.u_given_t0, self.u_given_t1),
        ]
    }
}

/// Builds one arm: `given_u1` has density ratio `clip.0` below the quantile at
/// `level` and `clip.1` above it, with the atom at the quantile split so the
/// ratio stays normalized; `given_u0` solves the mixture identity
/// `(1 - w1) given_u0 + w1 given_u1 = observed`.
fn build_arm(d: &WeightedDistribution, level: f64, clip: (f64, f64), w1: f64) -> Result<ArmWitness> {
    let support = d.support().to_vec();
    let observed = d.probs().to_vec();
    let pivot = d.quantile_index(level);
    let below: f64 = observed[..pivot].iter().sum();
    let atom = observed[pivot];
    let to_upper = ((below + atom - level) / atom).clamp(0.0, 1.0);

    let given_u1: Vec<f64> = observed
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let ratio = match i.cmp(&pivot) {
                std::cmp::Ordering::Less => clip.0,
                std::cmp::Ordering::Greater => clip.1,
                std::cmp::Ordering::Equal => to_upper * clip.1 + (1.0 - to_upper) * clip.0,
            };
            p * ratio
        })
        .collect();

    let given_u0 = if w1 < 1.0 {
        let mut out = Vec::with_capacity(observed.len());
        for ((&y, &p), &q1) in support.iter().zip(&observed).zip(&given_u1) {
            let mass = (p - w1 * q1) / (1.0 - w1);
            if mass < -1e-12 {
                return Err(Error::NegativeImpliedDensity { value: y, mass });
            }
            out.push(mass.max(0.0));
        }
        out
    } else {
        // U = 0 carries no mass in this arm
        observed.clone()
    };
    Ok(ArmWitness {
        support,
        observed,
        given_u0,
        given_u1,
    })
}

/// Constructs a joint law with binary `U` that lies in the complete deMSM and
/// attains the upper `nu1` bound and the lower `nu0` bound simultaneously.
pub fn build_witness(
    d1: &WeightedDistribution,
    d0: &WeightedDistribution,
    propensity: f64,
    lam: LambdaPair,
    gam: GammaPair,
    gam_prime: GammaPair,
) -> Result<WitnessJoint> {
    if !(0.0..=1.0).contains(&propensity) {
        return Err(Error::InvalidParameter(format!(
            "propensity {propensity} outside [0, 1]"
        )));
    }
    let (g1, g2) = (gam.lower(), gam.bounded_upper()?);
    let (h1, h2) = (gam_prime.lower(), gam_prime.bounded_upper()?);
    let tau = lam.tau();
    let implied = implied_lambda(lam, gam)?;
    let implied_control = implied_lambda_control(lam, gam_prime)?;

    let u_given_t1 = 1.0 - tau;
    let u_given_t0 = lam.upper() * (1.0 - tau);

    // ratios of Y^1 | U = 1, clipped so that Y^1 | U = 0 stays in [g1, g2]
    let clip1 = if u_given_t1 > 0.0 {
        let o = odds(tau);
        (g1.max(1.0 + o * (1.0 - g2)), g2.min(1.0 + o * (1.0 - g1)))
    } else {
        (1.0, 1.0)
    };
    let y1 = build_arm(d1, implied.tau_bar, clip1, u_given_t1)?;

    let clip0 = if u_given_t0 > 0.0 {
        let o = odds(1.0 - u_given_t0);
        (h1.max(1.0 + o * (1.0 - h2)), h2.min(1.0 + o * (1.0 - h1)))
    } else {
        (1.0, 1.0)
    };
    let y0 = build_arm(d0, 1.0 - implied_control.tau_bar, clip0, u_given_t0)?;

    Ok(WitnessJoint {
        p_treat: propensity,
        u_given_t1,
        u_given_t0,
        y1,
        y0,
        coupling: Coupling::Product,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    /// Largest violation found; zero when the check is exact.
    pub max_violation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessAudit {
    pub tol: f64,
    pub checks: Vec<AuditCheck>,
    /// `E_Q(Y^1 | T = 0)` under the witness.
    pub attained_nu1: f64,
    /// `E_Q(Y^0 | T = 1)` under the witness.
    pub attained_nu0: f64,
    pub target_nu1_hi: f64,
    pub target_nu0_lo: f64,
}

impl WitnessAudit {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Auditor {
    tol: f64,
    checks: Vec<AuditCheck>,
}

impl Auditor {
    fn record(&mut self, name: &str, violation: f64, detail: String) {
        let violation = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation.max(0.0)
        };
        self.checks.push(AuditCheck {
            name: name.into(),
            passed: violation <= self.tol,
            max_violation: violation,
            detail,
        });
    }
}

fn box_violation(x: f64, lower: f64, upper: f64) -> f64 {
    (lower - x).max(x - upper).max(0.0)
}

fn audit_arm(
    a: &mut Auditor,
    label: &str,
    arm: &ArmWitness,
    d: &WeightedDistribution,
    w1: f64,
    lower: f64,
    upper: f64,
) {
    let aligned = arm.support == d.support()
        && arm.given_u0.len() == arm.support.len()
        && arm.given_u1.len() == arm.support.len();
    a.record(
        &format!("{label}_support"),
        if aligned { 0.0 } else { f64::INFINITY },
        "conditional laws live on the observed support".into(),
    );
    if !aligned {
        return;
    }

    let mut law_err: f64 = 0.0;
    for probs in [&arm.given_u0, &arm.given_u1] {
        let total: f64 = probs.iter().sum();
        law_err = law_err.max((total - 1.0).abs());
        law_err = probs.iter().fold(law_err, |m, &p| m.max(-p));
    }
    a.record(
        &format!("{label}_valid_laws"),
        law_err,
        "conditional laws are probability vectors".into(),
    );

    let mixture_err = d
        .probs()
        .iter()
        .zip(&arm.given_u0)
        .zip(&arm.given_u1)
        .map(|((p, q0), q1)| ((1.0 - w1) * q0 + w1 * q1 - p).abs())
        .fold(0.0, f64::max);
    a.record(
        &format!("{label}_mixture"),
        mixture_err,
        format!("mixture over U with weight {w1} on U=1 reproduces the observed law"),
    );

    let mut ratio_err: f64 = 0.0;
    for probs in [&arm.given_u0, &arm.given_u1] {
        for (q, p) in probs.iter().zip(d.probs()) {
            ratio_err = ratio_err.max(box_violation(q / p, lower, upper));
        }
    }
    a.record(
        &format!("{label}_outcome_ratio"),
        ratio_err,
        format!("outcome density ratios within [{lower}, {upper}]"),
    );
}

/// Audits a witness against the observed arm laws and sensitivity parameters.
pub fn verify_witness(
    w: &WitnessJoint,
    d1: &WeightedDistribution,
    d0: &WeightedDistribution,
    params: &StratumParams,
    tol: f64,
) -> Result<WitnessAudit> {
    let lam = params.lam;
    let gam = params.gam;
    let gam_prime = params.gam_prime;
    let mut a = Auditor {
        tol,
        checks: Vec::new(),
    };

    let prob_err = [w.p_treat, w.u_given_t1, w.u_given_t0]
        .iter()
        .map(|&p| box_violation(p, 0.0, 1.0))
        .fold(0.0, f64::max);
    a.record(
        "probabilities",
        prob_err,
        "Q(T=1), Q(U=1|T=1), Q(U=1|T=0) in [0, 1]".into(),
    );

    // treatment ratios: lambda(1) = L2 and lambda(0) = L1 by construction
    let mut ratio_err: f64 = 0.0;
    let mut exact_err: f64 = 0.0;
    let expected = [lam.lower(), lam.upper()];
    let u_t0 = [1.0 - w.u_given_t0, w.u_given_t0];
    for (u, ratio) in w.treatment_ratios().into_iter().enumerate() {
        match ratio {
            Some(r) => {
                ratio_err = ratio_err.max(box_violation(r, lam.lower(), lam.upper()));
                exact_err = exact_err.max((r - expected[u]).abs());
            }
            // U = u absent among the treated must be absent among the controls
            None => ratio_err = ratio_err.max(u_t0[u]),
        }
    }
    a.record(
        "treatment_ratio_box",
        ratio_err,
        format!("Q(u|T=0)/Q(u|T=1) within [{}, {}]", lam.lower(), lam.upper()),
    );
    a.record(
        "treatment_ratio_endpoints",
        exact_err,
        "lambda(U=0) = lower and lambda(U=1) = upper treatment parameter".into(),
    );

    let (g1, g2) = (gam.lower(), gam.upper().unwrap_or(f64::INFINITY));
    let (h1, h2) = (gam_prime.lower(), gam_prime.upper().unwrap_or(f64::INFINITY));
    audit_arm(&mut a, "y1", &w.y1, d1, w.u_given_t1, g1, g2);
    audit_arm(&mut a, "y0", &w.y0, d0, w.u_given_t0, h1, h2);

    let target_nu1_hi = demsm_nu1_bounds(d1, lam, gam)?.hi;
    let target_nu0_lo = demsm_nu0_bounds(d0, lam, gam_prime)?.lo;
    let attained_nu1 = w.nu1();
    let attained_nu0 = w.nu0();
    a.record(
        "attains_nu1_upper",
        (attained_nu1 - target_nu1_hi).abs(),
        format!("E_Q(Y1|T=0) = {attained_nu1}, sharp upper bound {target_nu1_hi}"),
    );
    a.record(
        "attains_nu0_lower",
        (attained_nu0 - target_nu0_lo).abs(),
        format!("E_Q(Y0|T=1) = {attained_nu0}, sharp lower bound {target_nu0_lo}"),
    );

    a.record(
        "latent_unconfoundedness",
        if w.coupling == Coupling::Product {
            0.0
        } else {
            f64::INFINITY
        },
        "laws of (Y0, Y1) given U do not depend on T".into(),
    );

    Ok(WitnessAudit {
        tol,
        checks: a.checks,
        attained_nu1,
        attained_nu0,
        target_nu1_hi,
        target_nu0_lo,
    })
}
