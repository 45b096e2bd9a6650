//! Weight sequences and rate sequences: construction, the growth and
//! convexity conditions on them, quasianalyticity probes, and the
//! projective-description checks.
//!
//! All comparisons run in log space so that horizons like K = 100 for
//! factorial-type sequences stay finite; exact rational values are exposed
//! where the kind permits (integer Gevrey exponent, constant, table).

use crate::scalar::{factorial_rat, ln_factorial, rat_from_f64, Rat};
use crate::multiindex::{all_compositions, MultiIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("empty input: all table entries are zero")]
    EmptyInput,
}

/// Finite-horizon decision thresholds. The limits in the underlying
/// conditions quantify over all orders; these constants turn them into
/// desk-scale verdicts and are deliberately overridable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightConfig {
    /// A sup-type estimate at or above this value is reported divergent.
    pub divergence_threshold: f64,
    /// Mean per-order relative growth of the running sup over the last
    /// quarter of the horizon must stay below this for "stabilized".
    pub stabilization_tol: f64,
    /// Log-regression slope at or above this classifies partial-sum
    /// increments as harmonic-like (diverging sum).
    pub diverging_slope: f64,
    /// Increments decaying faster than k^(-converging_decay) classify as
    /// converging.
    pub converging_decay: f64,
    /// Additive slack for log-space inequality checks.
    pub ln_eps: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            divergence_threshold: 1e6,
            stabilization_tol: 0.01,
            diverging_slope: -1.2,
            converging_decay: 1.5,
            ln_eps: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// M_k = (k!)^s, s >= 0.
    Gevrey { s: f64 },
    /// M_k = q^(k^2), q > 1.
    QSquare { q: f64 },
    /// M_k = 1.
    ConstantOne,
    /// Explicit positive values; extended by repeating the last entry.
    Table { values: Vec<f64> },
}

/// A weight sequence M = (M_k) with M_0 = 1 <= M_1 and all M_k > 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    kind: WeightKind,
}

impl WeightSequence {
    pub fn new(kind: WeightKind) -> Result<Self, WeightError> {
        match &kind {
            WeightKind::Gevrey { s } => {
                if !s.is_finite() || *s < 0.0 {
                    return Err(WeightError::InvalidSequence(
                        "gevrey exponent must be a real >= 0".into(),
                    ));
                }
            }
            WeightKind::QSquare { q } => {
                if !q.is_finite() || *q <= 1.0 {
                    return Err(WeightError::InvalidSequence(
                        "qsquare base must be > 1".into(),
                    ));
                }
            }
            WeightKind::ConstantOne => {}
            WeightKind::Table { values } => {
                if values.is_empty() || values[0] != 1.0 {
                    return Err(WeightError::InvalidSequence("table must start with M_0 = 1".into()));
                }
                if values.len() >= 2 && values[1] < 1.0 {
                    return Err(WeightError::InvalidSequence("table requires M_1 >= 1".into()));
                }
                if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(WeightError::InvalidSequence("table entries must be positive".into()));
                }
            }
        }
        Ok(WeightSequence { kind })
    }

    pub fn gevrey(s: f64) -> Result<Self, WeightError> {
        Self::new(WeightKind::Gevrey { s })
    }
    pub fn qsquare(q: f64) -> Result<Self, WeightError> {
        Self::new(WeightKind::QSquare { q })
    }
    pub fn constant_one() -> Self {
        WeightSequence {
            kind: WeightKind::ConstantOne,
        }
    }
    pub fn table(values: Vec<f64>) -> Result<Self, WeightError> {
        Self::new(WeightKind::Table { values })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// ln M_k.
    pub fn ln_value(&self, k: usize) -> f64 {
        match &self.kind {
            WeightKind::Gevrey { s } => s * ln_factorial(k),
            WeightKind::QSquare { q } => (k * k) as f64 * q.ln(),
            WeightKind::ConstantOne => 0.0,
            WeightKind::Table { values } => {
                let v = values[k.min(values.len() - 1)];
                v.ln()
            }
        }
    }

    /// ln M_0 .. ln M_k in one pass.
    pub fn ln_values(&self, k: usize) -> Vec<f64> {
        match &self.kind {
            WeightKind::Gevrey { s } => {
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(k + 1);
                out.push(0.0);
                for i in 1..=k {
                    acc += (i as f64).ln();
                    out.push(s * acc);
                }
                out
            }
            _ => (0..=k).map(|i| self.ln_value(i)).collect(),
        }
    }

    /// M_k as f64 (may overflow to infinity for large horizons).
    pub fn value(&self, k: usize) -> f64 {
        self.ln_value(k).exp()
    }

    /// Exact rational M_k where the kind permits it.
    pub fn exact(&self, k: usize) -> Option<Rat> {
        match &self.kind {
            WeightKind::Gevrey { s } => {
                if s.fract() == 0.0 && *s >= 0.0 && *s <= 8.0 {
                    let f = factorial_rat(k);
                    let mut acc = Rat::from_integer(1.into());
                    for _ in 0..*s as usize {
                        acc *= f.clone();
                    }
                    Some(acc)
                } else {
                    None
                }
            }
            WeightKind::ConstantOne => Some(Rat::from_integer(1.into())),
            WeightKind::Table { values } => rat_from_f64(values[k.min(values.len() - 1)]),
            WeightKind::QSquare { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqProperty {
    LogConvex,
    WeaklyLogConvex,
    DerivationClosed,
    ModerateGrowth,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: SeqProperty,
    pub horizon: usize,
    pub holds_up_to_k: bool,
    /// For pointwise properties: the index pair where the inequality fails.
    pub witness: Option<(usize, usize)>,
    /// For sup-type properties: the running sup over the horizon.
    pub constant_estimate: Option<f64>,
    /// Whether the running sup settled over the last quarter of the horizon.
    pub stabilized: Option<bool>,
}

/// Mean per-order relative growth of the running sup over the last quarter
/// below the configured tolerance, and the final value finite.
fn stabilized(running_sup: &[f64], cfg: &WeightConfig) -> bool {
    let len = running_sup.len();
    if len < 2 {
        return true;
    }
    let last = running_sup[len - 1];
    if !last.is_finite() {
        return false;
    }
    let q = len.div_ceil(4).max(1);
    let base = running_sup[len - 1 - q.min(len - 1)];
    let growth = (last - base) / last.max(f64::MIN_POSITIVE);
    growth < cfg.stabilization_tol * q as f64
}

pub fn check_property(
    m: &WeightSequence,
    property: SeqProperty,
    horizon: usize,
    cfg: &WeightConfig,
) -> Result<PropertyVerdict, WeightError> {
    if horizon < 2 {
        return Err(WeightError::PreconditionFailed("horizon must be >= 2".into()));
    }
    let k_max = horizon;
    let ln_m = m.ln_values(k_max + 1);
    let eps = cfg.ln_eps;
    match property {
        SeqProperty::LogConvex | SeqProperty::WeaklyLogConvex => {
            let weighted: Vec<f64> = ln_m
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    if property == SeqProperty::WeaklyLogConvex {
                        v + ln_factorial(k)
                    } else {
                        v
                    }
                })
                .collect();
            let mut witness = None;
            for k in 1..k_max {
                if 2.0 * weighted[k] > weighted[k - 1] + weighted[k + 1] + eps {
                    witness = Some((k, k));
                    break;
                }
            }
            Ok(PropertyVerdict {
                property,
                horizon,
                holds_up_to_k: witness.is_none(),
                witness,
                constant_estimate: None,
                stabilized: None,
            })
        }
        SeqProperty::DerivationClosed => {
            // running sup over k of (M_{k+1}/M_k)^{1/k}
            let mut sup = f64::NEG_INFINITY;
            let mut arg = (1, 1);
            let mut running = Vec::new();
            for k in 1..=k_max {
                let r = ((ln_m[k + 1] - ln_m[k]) / k as f64).exp();
                if r > sup {
                    sup = r;
                    arg = (k, k + 1);
                }
                running.push(sup);
            }
            let stab = stabilized(&running, cfg);
            let holds = sup < cfg.divergence_threshold && stab;
            Ok(PropertyVerdict {
                property,
                horizon,
                holds_up_to_k: holds,
                witness: if holds { None } else { Some(arg) },
                constant_estimate: Some(sup),
                stabilized: Some(stab),
            })
        }
        SeqProperty::ModerateGrowth => {
            // running sup over j,k >= 1, j+k <= s of (M_{j+k}/(M_j M_k))^{1/(j+k)}
            let mut sup = f64::NEG_INFINITY;
            let mut arg = (1, 1);
            let mut running = Vec::new();
            for s in 2..=k_max {
                for j in 1..s {
                    let k = s - j;
                    let r = ((ln_m[s] - ln_m[j] - ln_m[k]) / s as f64).exp();
                    if r > sup {
                        sup = r;
                        arg = (j, k);
                    }
                }
                running.push(sup);
            }
            let stab = stabilized(&running, cfg);
            let holds = sup < cfg.divergence_threshold && stab;
            Ok(PropertyVerdict {
                property,
                horizon,
                holds_up_to_k: holds,
                witness: if holds { None } else { Some(arg) },
                constant_estimate: Some(sup),
                stabilized: Some(stab),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumTrend {
    Diverging,
    Converging,
    Undecided,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartialSumReport {
    /// S_K = sum_{k=1..K} (k! M_k)^(-1/k), for K = 1..horizon.
    pub partial_sums: Vec<f64>,
    pub trend: SumTrend,
    /// Fitted slope of ln(increment) against ln k over the tail.
    pub tail_slope: f64,
}

/// Partial sums of the quasianalyticity series with a tail-trend verdict.
pub fn quasianalytic_partial_sums(
    m: &WeightSequence,
    horizon: usize,
    cfg: &WeightConfig,
) -> Result<PartialSumReport, WeightError> {
    if horizon < 10 {
        return Err(WeightError::PreconditionFailed("horizon must be >= 10".into()));
    }
    let ln_m = m.ln_values(horizon);
    let mut sums = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    let mut terms = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let t = (-(ln_factorial(k) + ln_m[k]) / k as f64).exp();
        acc += t;
        terms.push(t);
        sums.push(acc);
    }
    // least-squares slope of ln t_k vs ln k over the last half
    let tail: Vec<(f64, f64)> = (horizon / 2..horizon)
        .map(|i| (((i + 1) as f64).ln(), terms[i].ln()))
        .collect();
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let trend = if slope >= cfg.diverging_slope {
        SumTrend::Diverging
    } else if slope < -cfg.converging_decay {
        SumTrend::Converging
    } else {
        SumTrend::Undecided
    };
    Ok(PartialSumReport {
        partial_sums: sums,
        trend,
        tail_slope: slope,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivedInequalityReport {
    /// M_j M_k <= M_{j+k} for all j + k <= horizon.
    pub alg_ok: bool,
    /// M_1^j M_k >= M_j M_{a_1} ... M_{a_j} over all compositions, k <= min(horizon, 12).
    pub fdb_ok: bool,
    /// Smallest C >= 1 with (k+j)! M_{k+j} <= C^(j(k+j)) k! M_k on the horizon.
    pub dc1_min_c: f64,
}

/// Consequence checks for log-convex sequences plus the derivation-closure
/// constant.
pub fn verify_derived_inequalities(
    m: &WeightSequence,
    horizon: usize,
    cfg: &WeightConfig,
) -> Result<DerivedInequalityReport, WeightError> {
    let lc = check_property(m, SeqProperty::LogConvex, horizon, cfg)?;
    if !lc.holds_up_to_k {
        return Err(WeightError::PreconditionFailed(
            "sequence is not log-convex up to the horizon".into(),
        ));
    }
    let ln_m = m.ln_values(horizon);
    let eps = cfg.ln_eps;
    let mut alg_ok = true;
    for j in 0..=horizon {
        for k in 0..=horizon - j {
            if ln_m[j] + ln_m[k] > ln_m[j + k] + eps {
                alg_ok = false;
            }
        }
    }
    let mut fdb_ok = true;
    for k in 1..=horizon.min(12) {
        for comp in all_compositions(k) {
            let j = comp.len();
            let lhs = j as f64 * ln_m[1] + ln_m[k];
            let rhs = ln_m[j] + comp.iter().map(|&a| ln_m[a]).sum::<f64>();
            if lhs + eps < rhs {
                fdb_ok = false;
            }
        }
    }
    let dc = check_property(m, SeqProperty::DerivationClosed, horizon, cfg)?;
    if !dc.holds_up_to_k {
        return Err(WeightError::PreconditionFailed(
            "sequence is not derivation closed up to the horizon".into(),
        ));
    }
    let mut min_c = 1.0f64;
    for j in 1..=horizon {
        for k in 0..=horizon - j {
            let s = k + j;
            let num = ln_factorial(s) + ln_m[s] - ln_factorial(k) - ln_m[k];
            let c = (num / (j * s) as f64).exp();
            min_c = min_c.max(c);
        }
    }
    Ok(DerivedInequalityReport {
        alg_ok,
        fdb_ok,
        dc1_min_c: min_c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    /// r_k = rho^(-k)/k!.
    FactorialDecay { rho: f64 },
    /// r_k = c^(k^2), 0 < c < 1.
    SuperExp { c: f64 },
    /// r_k = sigma^(-k).
    Geometric { sigma: f64 },
    Table { values: Vec<f64> },
}

/// A rate sequence (r_k) of positive reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSequence {
    kind: RateKind,
}

impl RateSequence {
    pub fn new(kind: RateKind) -> Result<Self, WeightError> {
        match &kind {
            RateKind::FactorialDecay { rho } if !(rho > &0.0) => {
                return Err(WeightError::InvalidSequence("factorial_decay needs rho > 0".into()))
            }
            RateKind::SuperExp { c } if !(*c > 0.0 && *c < 1.0) => {
                return Err(WeightError::InvalidSequence("superexp needs c in (0,1)".into()))
            }
            RateKind::Geometric { sigma } if !(sigma > &0.0) => {
                return Err(WeightError::InvalidSequence("geometric needs sigma > 0".into()))
            }
            RateKind::Table { values } => {
                if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
                    return Err(WeightError::InvalidSequence("table entries must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(RateSequence { kind })
    }

    pub fn factorial_decay(rho: f64) -> Result<Self, WeightError> {
        Self::new(RateKind::FactorialDecay { rho })
    }
    pub fn superexp(c: f64) -> Result<Self, WeightError> {
        Self::new(RateKind::SuperExp { c })
    }
    pub fn geometric(sigma: f64) -> Result<Self, WeightError> {
        Self::new(RateKind::Geometric { sigma })
    }

    pub fn ln_value(&self, k: usize) -> f64 {
        match &self.kind {
            RateKind::FactorialDecay { rho } => -(k as f64) * rho.ln() - ln_factorial(k),
            RateKind::SuperExp { c } => (k * k) as f64 * c.ln(),
            RateKind::Geometric { sigma } => -(k as f64) * sigma.ln(),
            RateKind::Table { values } => values[k.min(values.len() - 1)].ln(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateMembership {
    /// Trend evidence that r_k sigma^k -> 0 for every probed sigma.
    pub in_r: bool,
    /// Exact check of r_k r_l >= r_{k+l} for k + l <= horizon.
    pub in_r_prime: bool,
}

pub fn rate_membership(
    r: &RateSequence,
    horizon: usize,
    sigma_set: &[f64],
    cfg: &WeightConfig,
) -> Result<RateMembership, WeightError> {
    if horizon < 10 || sigma_set.is_empty() {
        return Err(WeightError::PreconditionFailed(
            "need horizon >= 10 and a non-empty sigma set".into(),
        ));
    }
    let ln_r: Vec<f64> = (0..=horizon).map(|k| r.ln_value(k)).collect();
    let mut in_r = true;
    for &sigma in sigma_set {
        for k in horizon / 2..horizon {
            let cur = ln_r[k] + k as f64 * sigma.ln();
            let next = ln_r[k + 1] + (k + 1) as f64 * sigma.ln();
            if next >= cur - cfg.ln_eps {
                in_r = false;
            }
        }
    }
    let mut in_r_prime = in_r;
    'outer: for k in 0..=horizon {
        for l in 0..=horizon - k {
            if ln_r[k] + ln_r[l] + cfg.ln_eps < ln_r[k + l] {
                in_r_prime = false;
                break 'outer;
            }
        }
    }
    Ok(RateMembership { in_r, in_r_prime })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectiveProbe {
    /// Estimate of the smallest sigma with sup a_alpha / sigma^|alpha| finite.
    pub sigma_star: f64,
    /// Largest probed delta witnessing the weighted-sup condition.
    pub delta_star: f64,
    /// Whether the probed implication chain held at the horizon.
    pub chain_ok: bool,
}

/// Numeric probe of the three-way equivalence for a coefficient table
/// `a` over multi-indices of degree <= K and a rate sequence in R'.
pub fn projective_probe(
    a: &[(MultiIndex, f64)],
    r: &RateSequence,
    horizon: usize,
    cfg: &WeightConfig,
) -> Result<ProjectiveProbe, WeightError> {
    let membership = rate_membership(r, horizon.max(10), &[1.0, 2.0], cfg)?;
    if !membership.in_r_prime {
        return Err(WeightError::PreconditionFailed(
            "rate sequence is not in R'".into(),
        ));
    }
    if a.iter().all(|(_, v)| *v == 0.0) {
        return Ok(ProjectiveProbe {
            sigma_star: 0.0,
            delta_star: 0.0,
            chain_ok: true,
        });
    }
    let mut b = vec![0.0f64; horizon + 1];
    for (alpha, v) in a {
        let d = alpha.degree();
        if d <= horizon {
            b[d] = b[d].max(v.abs());
        }
    }
    let sigma_star = (1..=horizon)
        .filter(|&k| b[k] > 0.0)
        .map(|k| b[k].powf(1.0 / k as f64))
        .fold(0.0f64, f64::max);
    // condition (3) witness: largest delta on a geometric grid with
    // sup_k delta^k r_k b_k <= sup_k b_k / sigma_star^k
    let target = (0..=horizon)
        .filter(|&k| b[k] > 0.0)
        .map(|k| b[k].ln() - k as f64 * sigma_star.max(f64::MIN_POSITIVE).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut delta_star = 0.0;
    for e in (-40..=40).rev() {
        let delta = 2f64.powi(e);
        let sup = (0..=horizon)
            .filter(|&k| b[k] > 0.0)
            .map(|k| k as f64 * delta.ln() + r.ln_value(k) + b[k].ln())
            .fold(f64::NEG_INFINITY, f64::max);
        if sup <= target + cfg.ln_eps {
            delta_star = delta;
            break;
        }
    }
    Ok(ProjectiveProbe {
        sigma_star,
        delta_star,
        chain_ok: delta_star > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WeightConfig {
        WeightConfig::default()
    }

    #[test]
    fn construction_examples() {
        let g0 = WeightSequence::gevrey(0.0).unwrap();
        for k in 0..10 {
            assert_eq!(g0.value(k), 1.0);
        }
        let g1 = WeightSequence::gevrey(1.0).unwrap();
        assert!((g1.value(4) - 24.0).abs() < 1e-9);
        assert!(WeightSequence::table(vec![1.0, 0.5]).is_err());
        assert!(WeightSequence::qsquare(1.0).is_err());
        assert!(WeightSequence::gevrey(-1.0).is_err());
    }

    #[test]
    fn gevrey1_log_convex() {
        let m = WeightSequence::gevrey(1.0).unwrap();
        let v = check_property(&m, SeqProperty::LogConvex, 30, &cfg()).unwrap();
        assert!(v.holds_up_to_k);
        assert!(v.witness.is_none());
    }

    #[test]
    fn gevrey2_moderate_growth_stabilizes() {
        let m = WeightSequence::gevrey(2.0).unwrap();
        let v = check_property(&m, SeqProperty::ModerateGrowth, 30, &cfg()).unwrap();
        assert!(v.holds_up_to_k);
        let est = v.constant_estimate.unwrap();
        assert!(est <= 4.0 + 1e-9, "estimate {est}");
        assert_eq!(v.stabilized, Some(true));
    }

    #[test]
    fn qsquare_non_moderate() {
        let m = WeightSequence::qsquare(2.0).unwrap();
        let v = check_property(&m, SeqProperty::ModerateGrowth, 20, &cfg()).unwrap();
        // closed form 2^(2jk/(j+k)) peaks at j = k = 10 with 2^10
        let est = v.constant_estimate.unwrap();
        assert!((est - 1024.0).abs() / 1024.0 < 1e-9, "estimate {est}");
        assert!(!v.holds_up_to_k);
        assert_eq!(v.stabilized, Some(false));
    }

    #[test]
    fn table_log_convex_failure_witness() {
        let m = WeightSequence::table(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let v = check_property(&m, SeqProperty::LogConvex, 3, &cfg()).unwrap();
        assert!(!v.holds_up_to_k);
        assert_eq!(v.witness, Some((2, 2)));
    }

    #[test]
    fn quasianalytic_trends() {
        let one = WeightSequence::constant_one();
        let r = quasianalytic_partial_sums(&one, 100, &cfg()).unwrap();
        assert!(r.partial_sums[99] >= 10.0);
        assert_eq!(r.trend, SumTrend::Diverging);

        let g1 = WeightSequence::gevrey(1.0).unwrap();
        let r1 = quasianalytic_partial_sums(&g1, 100, &cfg()).unwrap();
        assert_eq!(r1.trend, SumTrend::Converging);

        let g0 = WeightSequence::gevrey(0.0).unwrap();
        let r0 = quasianalytic_partial_sums(&g0, 10, &cfg()).unwrap();
        for w in r0.partial_sums.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn derived_inequalities_gevrey1() {
        let m = WeightSequence::gevrey(1.0).unwrap();
        let r = verify_derived_inequalities(&m, 12, &cfg()).unwrap();
        assert!(r.alg_ok);
        assert!(r.fdb_ok);
    }

    #[test]
    fn dc1_constant_one_lower_bound() {
        let m = WeightSequence::constant_one();
        let r = verify_derived_inequalities(&m, 12, &cfg()).unwrap();
        // at k = 0, j = 2: 2! <= C^4, so C >= 2^(1/4)
        assert!(r.dc1_min_c >= 2f64.powf(0.25) - 1e-12);
    }

    #[test]
    fn derived_inequalities_precondition() {
        let m = WeightSequence::table(vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        assert!(matches!(
            verify_derived_inequalities(&m, 3, &cfg()),
            Err(WeightError::PreconditionFailed(_))
        ));
    }

    #[test]
    fn rate_membership_examples() {
        let c = cfg();
        let fd = RateSequence::factorial_decay(1.0).unwrap();
        let v = rate_membership(&fd, 40, &[1.0, 2.0, 4.0, 8.0], &c).unwrap();
        assert!(v.in_r);
        assert!(v.in_r_prime);

        let geo = RateSequence::geometric(2.0).unwrap();
        let v2 = rate_membership(&geo, 40, &[4.0], &c).unwrap();
        assert!(!v2.in_r);

        let se = RateSequence::superexp(0.5).unwrap();
        let v3 = rate_membership(&se, 20, &[1.0, 2.0, 4.0, 8.0], &c).unwrap();
        assert!(v3.in_r);
        assert!(v3.in_r_prime);
    }

    #[test]
    fn projective_probe_examples() {
        let c = cfg();
        let r = RateSequence::superexp(0.5).unwrap();
        let horizon = 12;
        // a_alpha = 1 -> sigma_star = 1
        let table: Vec<(MultiIndex, f64)> = MultiIndex::up_to_degree(2, horizon)
            .into_iter()
            .map(|m| (m, 1.0))
            .collect();
        let p = projective_probe(&table, &r, horizon, &c).unwrap();
        assert!((p.sigma_star - 1.0).abs() < 1e-12);
        assert!(p.chain_ok);

        // a_alpha = 2^|alpha| -> sigma_star = 2
        let table2: Vec<(MultiIndex, f64)> = MultiIndex::up_to_degree(2, horizon)
            .into_iter()
            .map(|m| {
                let d = m.degree() as i32;
                (m, 2f64.powi(d))
            })
            .collect();
        let p2 = projective_probe(&table2, &r, horizon, &c).unwrap();
        assert!((p2.sigma_star - 2.0).abs() < 1e-12);

        // a_alpha = |alpha|! with factorial-decay rates: exact cancellation
        let fd = RateSequence::factorial_decay(1.0).unwrap();
        let table3: Vec<(MultiIndex, f64)> = MultiIndex::up_to_degree(1, horizon)
            .into_iter()
            .map(|m| {
                let d = m.degree();
                (m, crate::scalar::factorial_f64(d))
            })
            .collect();
        let p3 = projective_probe(&table3, &fd, horizon, &c).unwrap();
        assert!(p3.delta_star >= 1.0, "delta_star {}", p3.delta_star);

        // all-zero table reports sigma_star = 0
        let z: Vec<(MultiIndex, f64)> = vec![(MultiIndex::zero(1), 0.0)];
        let pz = projective_probe(&z, &r, horizon, &c).unwrap();
        assert_eq!(pz.sigma_star, 0.0);
    }
}
