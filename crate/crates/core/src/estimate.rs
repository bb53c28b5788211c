//! Plug-in estimation of the bounds from unit-level data, with percentile
//! bootstrap intervals for each bound endpoint.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{aggregate_bounds, BoundsReport, Interval, Model, ObservedLaw, SensitivitySpec, Stratum};
use crate::dist::WeightedDistribution;
use crate::error::{Arm, Error, Result};

/// One observed unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    pub t: u8,
    pub x: String,
}

/// Observed `(Y, T, X)` rows with categorical `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    rows: Vec<Observation>,
}

impl Sample {
    pub fn new(rows: Vec<Observation>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.t > 1 {
                return Err(Error::Data(format!("row {}: t must be 0 or 1, got {}", i + 1, r.t)));
            }
            if !r.y.is_finite() {
                return Err(Error::Data(format!("row {}: y is not finite", i + 1)));
            }
        }
        Ok(Self { rows })
    }

    /// Reads CSV with header `y,t,x`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("CSV header is missing column '{name}'")))
        };
        let (iy, it, ix) = (column("y")?, column("t")?, column("x")?);
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let y: f64 = record[iy]
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: cannot parse y '{}'", &record[iy])))?;
            let t = match &record[it] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::Data(format!("line {line}: t must be 0 or 1, got '{other}'"))),
            };
            rows.push(Observation {
                y,
                t,
                x: record[ix].to_string(),
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Empirical law: stratum weights and propensities from counts, arm laws from
/// the empirical conditional distributions. Strata come out sorted by label.
/// An arm with no observations is left as `None`; see
/// [`ObservedLaw::missing_arms`] and [`require_complete`].
pub fn empirical_observed_law(s: &Sample) -> Result<ObservedLaw> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &s.rows {
        let entry = groups.entry(r.x.as_str()).or_default();
        if r.t == 1 {
            entry.0.push(r.y);
        } else {
            entry.1.push(r.y);
        }
    }
    let n = s.rows.len() as f64;
    let strata = groups
        .into_iter()
        .map(|(id, (treated, control))| {
            let size = (treated.len() + control.len()) as f64;
            Ok(Stratum {
                id: id.to_string(),
                weight: size / n,
                propensity: treated.len() as f64 / size,
                dist1: non_empty(&treated)?,
                dist0: non_empty(&control)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObservedLaw::new(strata)
}

fn non_empty(values: &[f64]) -> Result<Option<WeightedDistribution>> {
    if values.is_empty() {
        Ok(None)
    } else {
        WeightedDistribution::uniform(values).map(Some)
    }
}

/// Errors with the first stratum that lacks an arm.
pub fn require_complete(law: &ObservedLaw) -> Result<()> {
    match law.missing_arms().into_iter().next() {
        Some((stratum, arm)) => Err(Error::EmptyArmInStratum { stratum, arm }),
        None => Ok(()),
    }
}

/// Bounds evaluated at the empirical law.
pub fn plugin_bounds(s: &Sample, spec: &SensitivitySpec, model: Model) -> Result<BoundsReport> {
    let law = empirical_observed_law(s)?;
    require_complete(&law)?;
    aggregate_bounds(&law, spec, model)
}

/// Percentile interval for one bound endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointCi {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    /// Resamples discarded because they lost an arm.
    pub redraws: usize,
    pub mu1_lo: EndpointCi,
    pub mu1_hi: EndpointCi,
    pub mu0_lo: EndpointCi,
    pub mu0_hi: EndpointCi,
    pub ate_lo: EndpointCi,
    pub ate_hi: EndpointCi,
}

impl BootstrapReport {
    /// Outer envelope `[lower CI of the lower bound, upper CI of the upper bound]`.
    pub fn ate_envelope(&self) -> Interval {
        Interval::new(self.ate_lo.lower, self.ate_hi.upper)
    }

    pub fn mu1_envelope(&self) -> Interval {
        Interval::new(self.mu1_lo.lower, self.mu1_hi.upper)
    }

    pub fn mu0_envelope(&self) -> Interval {
        Interval::new(self.mu0_lo.lower, self.mu0_hi.upper)
    }
}

/// Rows recoded as (stratum, arm, value) indices over the canonical row order.
struct Encoded {
    strata: Vec<String>,
    /// Distinct outcome values per stratum and arm (0 = control, 1 = treated).
    values: Vec<[Vec<f64>; 2]>,
    rows: Vec<(usize, usize, usize)>,
}

impl Encoded {
    fn new(s: &Sample) -> Self {
        let mut rows: Vec<&Observation> = s.rows.iter().collect();
        rows.sort_by(|a, b| a.x.cmp(&b.x).then(a.t.cmp(&b.t)).then(a.y.total_cmp(&b.y)));

        let mut strata: Vec<String> = Vec::new();
        let mut values: Vec<[Vec<f64>; 2]> = Vec::new();
        let mut coded = Vec::with_capacity(rows.len());
        for r in rows {
            if strata.last() != Some(&r.x) {
                strata.push(r.x.clone());
                values.push([Vec::new(), Vec::new()]);
            }
            let si = strata.len() - 1;
            let arm = &mut values[si][r.t as usize];
            if arm.last() != Some(&r.y) {
                arm.push(r.y);
            }
            coded.push((si, r.t as usize, arm.len() - 1));
        }
        Self {
            strata,
            values,
            rows: coded,
        }
    }

    /// Law of a resample given by per-row multiplicities; `None` when a
    /// stratum present in the resample lacks an arm.
    fn law(&self, counts: &[[Vec<u32>; 2]]) -> Result<Option<ObservedLaw>> {
        let n: u32 = counts.iter().flat_map(|c| c.iter()).flatten().sum();
        let mut strata = Vec::new();
        for (si, arms) in counts.iter().enumerate() {
            let n1: u32 = arms[1].iter().sum();
            let n0: u32 = arms[0].iter().sum();
            if n1 + n0 == 0 {
                continue;
            }
            if n1 == 0 || n0 == 0 {
                return Ok(None);
            }
            let dist = |arm: usize| {
                WeightedDistribution::from_pairs(
                    self.values[si][arm]
                        .iter()
                        .copied()
                        .zip(arms[arm].iter().map(|&c| c as f64)),
                )
            };
            strata.push(Stratum {
                id: self.strata[si].clone(),
                weight: (n1 + n0) as f64 / n as f64,
                propensity: n1 as f64 / (n1 + n0) as f64,
                dist1: Some(dist(1)?),
                dist0: Some(dist(0)?),
            });
        }
        ObservedLaw::new(strata).map(Some)
    }

    fn empty_counts(&self) -> Vec<[Vec<u32>; 2]> {
        self.values
            .iter()
            .map(|[c, t]| [vec![0; c.len()], vec![0; t.len()]])
            .collect()
    }
}

/// Type-7 sample quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nonparametric percentile bootstrap for every bound endpoint.
///
/// This is a stand-in for proper inference on the bound functionals: it is
/// not doubly robust and can undercover when a quantile used by a bound sits
/// on a jump of the outcome distribution.
///
/// Rows are put in a canonical order before resampling, so the result depends
/// only on the multiset of rows and `seed`. Replicate `b` draws from its own
/// ChaCha stream `(seed, b)`. A resample that loses an arm in some stratum is
/// redrawn; more than `10 * replicates` redraws in total is an error.
pub fn bootstrap_ci(
    s: &Sample,
    spec: &SensitivitySpec,
    model: Model,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapReport> {
    if replicates < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 bootstrap replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let point = plugin_bounds(s, spec, model)?;
    let enc = Encoded::new(s);
    let n = enc.rows.len();
    let max_redraws = 10 * replicates;
    let mut redraws = 0;
    let mut draws: [Vec<f64>; 6] = Default::default();

    for b in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let law = loop {
            let mut counts = enc.empty_counts();
            for _ in 0..n {
                let (si, arm, vi) = enc.rows[rng.gen_range(0..n)];
                counts[si][arm][vi] += 1;
            }
            if let Some(law) = enc.law(&counts)? {
                break law;
            }
            redraws += 1;
            if redraws > max_redraws {
                return Err(Error::DegenerateResample { attempts: redraws + b });
            }
        };
        let r = aggregate_bounds(&law, spec, model)?;
        for (slot, v) in draws
            .iter_mut()
            .zip([r.mu1.lo, r.mu1.hi, r.mu0.lo, r.mu0.hi, r.ate.lo, r.ate.hi])
        {
            slot.push(v);
        }
    }

    let alpha = (1.0 - level) / 2.0;
    let estimates = [
        point.mu1.lo,
        point.mu1.hi,
        point.mu0.lo,
        point.mu0.hi,
        point.ate.lo,
        point.ate.hi,
    ];
    let mut cis = draws.iter_mut().zip(estimates).map(|(v, estimate)| {
        v.sort_by(f64::total_cmp);
        EndpointCi {
            estimate,
            lower: sorted_quantile(v, alpha),
            upper: sorted_quantile(v, 1.0 - alpha),
        }
    });
    let mut next = || cis.next().expect("six endpoints");
    Ok(BootstrapReport {
        replicates,
        level,
        seed,
        redraws,
        mu1_lo: next(),
        mu1_hi: next(),
        mu0_lo: next(),
        mu0_hi: next(),
        ate_lo: next(),
        ate_hi: next(),
    })
}

/// Missing-arm diagnostics for a sample, as `(stratum, arm)` pairs.
pub fn empty_arms(s: &Sample) -> Result<Vec<(String, Arm)>> {
    Ok(empirical_observed_law(s)?.missing_arms())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(y: f64, t: u8, x: &str) -> Observation {
        Observation { y, t, x: x.into() }
    }

    /// `copies` rows of each value 0, 1, 2 in both arms of one stratum.
    fn uniform_sample(copies: usize) -> Sample {
        let mut rows = Vec::new();
        for _ in 0..copies {
            for y in [0.0, 1.0, 2.0] {
                rows.push(obs(y, 1, "a"));
                rows.push(obs(y, 0, "a"));
            }
        }
        Sample::new(rows).unwrap()
    }

    #[test]
    fn counting_law() {
        let s = Sample::new(vec![
            obs(0.0, 1, "a"),
            obs(2.0, 1, "a"),
            obs(1.0, 0, "a"),
            obs(1.0, 0, "a"),
        ])
        .unwrap();
        let law = empirical_observed_law(&s).unwrap();
        let st = &law.strata()[0];
        assert_eq!((st.weight, st.propensity), (1.0, 0.5));
        let d1 = st.dist1.as_ref().unwrap();
        assert_eq!((d1.support(), d1.probs()), (&[0.0, 2.0][..], &[0.5, 0.5][..]));
        let d0 = st.dist0.as_ref().unwrap();
        assert_eq!((d0.support(), d0.probs()), (&[1.0][..], &[1.0][..]));
    }

    #[test]
    fn two_strata_weights() {
        let s = Sample::new(vec![
            obs(0.0, 1, "b"),
            obs(1.0, 0, "b"),
            obs(0.0, 1, "a"),
            obs(1.0, 0, "a"),
        ])
        .unwrap();
        let law = empirical_observed_law(&s).unwrap();
        let ids: Vec<_> = law.strata().iter().map(|s| (s.id.as_str(), s.weight)).collect();
        assert_eq!(ids, vec![("a", 0.5), ("b", 0.5)]);
    }

    #[test]
    fn missing_arm_is_reported() {
        let s = Sample::new(vec![
            obs(0.0, 0, "a"),
            obs(1.0, 0, "a"),
            obs(0.0, 1, "b"),
            obs(1.0, 0, "b"),
        ])
        .unwrap();
        let law = empirical_observed_law(&s).unwrap();
        assert_eq!(law.missing_arms(), vec![("a".to_string(), Arm::Treated)]);
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        assert!(matches!(
            plugin_bounds(&s, &spec, Model::Demsm),
            Err(Error::EmptyArmInStratum { ref stratum, arm: Arm::Treated }) if stratum == "a"
        ));
        assert!(matches!(Sample::new(vec![]), Err(Error::EmptySample)));
    }

    #[test]
    fn csv_parsing() {
        let text = "y,t,x\n0.5,1,a\n1.5, 0 ,b\n";
        let s = Sample::from_csv(text.as_bytes()).unwrap();
        assert_eq!(s.rows()[1], obs(1.5, 0, "b"));
        assert!(Sample::from_csv("y,t,x\n1,2,a\n".as_bytes()).is_err());
        assert!(Sample::from_csv("y,t\n1,1\n".as_bytes()).is_err());
        assert!(Sample::from_csv("y,t,x\nfoo,1,a\n".as_bytes()).is_err());
    }

    #[test]
    fn plugin_examples() {
        let s = uniform_sample(5);
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        let r = plugin_bounds(&s, &spec, Model::Demsm).unwrap();
        assert!((r.ate.lo + 0.25).abs() < 1e-12 && (r.ate.hi - 0.25).abs() < 1e-12);

        let r = plugin_bounds(&s, &SensitivitySpec::symmetric(1.0).unwrap(), Model::Demsm).unwrap();
        assert_eq!(r.ate.lo, r.ate.hi);
        assert_eq!(r.ate.lo, r.reference.ate);

        let msm = plugin_bounds(&s, &spec, Model::Msm).unwrap();
        assert!(msm
            .ate
            .contains(&plugin_bounds(&s, &spec, Model::Demsm).unwrap().ate, 1e-12));
    }

    #[test]
    fn bootstrap_is_deterministic_and_order_free() {
        let mut rows = Vec::new();
        for i in 0..60 {
            rows.push(obs(
                (i % 5) as f64,
                (i % 3 == 0) as u8,
                if i % 2 == 0 { "a" } else { "b" },
            ));
        }
        let s = Sample::new(rows.clone()).unwrap();
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        let a = bootstrap_ci(&s, &spec, Model::Demsm, 200, 0.9, 7).unwrap();
        let b = bootstrap_ci(&s, &spec, Model::Demsm, 200, 0.9, 7).unwrap();
        assert_eq!(a, b);
        rows.reverse();
        let c = bootstrap_ci(&Sample::new(rows).unwrap(), &spec, Model::Demsm, 200, 0.9, 7).unwrap();
        assert_eq!(a, c);
        let d = bootstrap_ci(&s, &spec, Model::Demsm, 200, 0.9, 8).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn bootstrap_level_narrows() {
        let mut rows = Vec::new();
        for i in 0..90 {
            rows.push(obs(((i * 7) % 11) as f64, (i % 2) as u8, "a"));
        }
        let s = Sample::new(rows).unwrap();
        let spec = SensitivitySpec::symmetric(1.5).unwrap();
        let wide = bootstrap_ci(&s, &spec, Model::Demsm, 300, 0.95, 1).unwrap();
        let narrow = bootstrap_ci(&s, &spec, Model::Demsm, 300, 0.01, 1).unwrap();
        let width = |c: EndpointCi| c.upper - c.lower;
        assert!(width(narrow.ate_hi) < width(wide.ate_hi));
        assert!(width(narrow.ate_lo) < width(wide.ate_lo));
    }

    #[test]
    fn bootstrap_argument_checks() {
        let s = uniform_sample(3);
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        assert!(bootstrap_ci(&s, &spec, Model::Demsm, 50, 0.9, 1).is_err());
        assert!(bootstrap_ci(&s, &spec, Model::Demsm, 100, 1.0, 1).is_err());
    }

    #[test]
    fn degenerate_resamples_give_up() {
        // thirty two-row strata: almost every resample splits one of them
        let mut rows = Vec::new();
        for i in 0..30 {
            rows.push(obs(1.0, 1, &format!("s{i}")));
            rows.push(obs(0.0, 0, &format!("s{i}")));
        }
        let s = Sample::new(rows).unwrap();
        let spec = SensitivitySpec::symmetric(2.0).unwrap();
        assert!(matches!(
            bootstrap_ci(&s, &spec, Model::Demsm, 100, 0.9, 3),
            Err(Error::DegenerateResample { .. })
        ));
    }

    #[test]
    fn quantile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(sorted_quantile(&v, 1.0), 4.0);
        assert_eq!(sorted_quantile(&v, 0.5), 2.5);
    }
}
