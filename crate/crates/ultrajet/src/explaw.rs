//! The exponential-law engine: curry/uncurry on sampled functions, the
//! mixed-vs-joint seminorm inequalities with the explicit constants from
//! their derivations, the small combinatorial inequality kit (exact
//! rationals), and the non-moderate-growth counterexample lab.

use crate::classnorms::{lp_norm_alpha, ClassSpec, Family, NormError};
use crate::grid::GridSpec;
use crate::jet::Jet;
use crate::multiindex::MultiIndex;
use crate::sampled::SampledFunction;
use crate::scalar::{factorial_rat, ln_factorial, Rat};
use crate::weightseq::{check_property, SeqProperty, WeightConfig, WeightSequence};
use num::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpLawError {
    #[error("split mismatch: {0}")]
    SplitMismatch(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("search exhausted at n = {n}: best ratio {best_ratio:.6} below target {target:.6}")]
    SearchExhausted { n: usize, best_ratio: f64, target: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// The curried view of a function on R^(l+m): per (outer node, inner node),
/// the joint Taylor coefficients reindexed by split multi-index pairs.
/// Pure reindexing, so uncurry . curry is bit-identical.
#[derive(Clone, Debug)]
pub struct CurriedFamily {
    pub outer_grid: GridSpec,
    pub inner_grid: GridSpec,
    pub split: (usize, usize),
    pub order: usize,
    pub target_dim: usize,
    /// tables[outer][inner]: (alpha1, alpha2) -> coefficient vector.
    pub tables: Vec<Vec<BTreeMap<(MultiIndex, MultiIndex), Vec<f64>>>>,
}

pub fn curry(f: &SampledFunction, l: usize) -> Result<CurriedFamily, ExpLawError> {
    let n = f.grid.dim();
    if l == 0 || l >= n {
        return Err(ExpLawError::SplitMismatch(format!(
            "split {l}|{} of a {n}-dimensional grid",
            n as isize - l as isize
        )));
    }
    let (outer_grid, inner_grid) = f.grid.split(l);
    let inner_count = inner_grid.node_count();
    let target_dim = f.target_dim();
    let mut tables = vec![vec![BTreeMap::new(); inner_count]; outer_grid.node_count()];
    for (idx, jet) in f.jets.iter().enumerate() {
        let oi = idx / inner_count;
        let ii = idx % inner_count;
        for (alpha, v) in jet.coeffs() {
            let (a1, a2) = alpha.split(l);
            tables[oi][ii].insert((a1, a2), v.clone());
        }
    }
    Ok(CurriedFamily {
        outer_grid,
        inner_grid,
        split: (l, n - l),
        order: f.order,
        target_dim,
        tables,
    })
}

pub fn uncurry(c: &CurriedFamily) -> Result<SampledFunction, ExpLawError> {
    let grid = c.outer_grid.product(&c.inner_grid);
    let inner_count = c.inner_grid.node_count();
    let mut jets = Vec::with_capacity(grid.node_count());
    for idx in 0..grid.node_count() {
        let oi = idx / inner_count;
        let ii = idx % inner_count;
        let base = grid.node(idx);
        let mut jet = Jet::new(base, c.target_dim, c.order);
        for ((a1, a2), v) in &c.tables[oi][ii] {
            jet.set_coeff(a1.concat(a2), v.clone());
        }
        jets.push(jet);
    }
    Ok(SampledFunction::from_jets(grid, c.order, jets))
}

impl CurriedFamily {
    /// The mixed partial d2^a2 [ (f^vee)^(a1) ] at a node pair, i.e. the
    /// joint partial derivative read through the curried table.
    pub fn mixed_partial(
        &self,
        outer: usize,
        inner: usize,
        a1: &MultiIndex,
        a2: &MultiIndex,
    ) -> Vec<f64> {
        let fac = (a1.factorial() * a2.factorial()) as f64;
        match self.tables[outer][inner].get(&(a1.clone(), a2.clone())) {
            Some(v) => v.iter().map(|x| x * fac).collect(),
            None => vec![0.0; self.target_dim],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpLawReport {
    pub family: Family,
    pub mixed_norm: f64,
    pub joint_norm: f64,
    pub direction1_ok: bool,
    pub direction2_ok: bool,
    /// Worst signed slack rhs - lhs over all direction-1 checks (>= 0 iff ok).
    pub direction1_slack: f64,
    pub direction2_slack: f64,
    pub tau_used: Option<f64>,
    pub rho_joint: Option<f64>,
    pub fubini_discrepancy: Option<f64>,
}

/// Per-node split table t[k1][k2] = sum over |a1| = k1, |a2| = k2 of the
/// Euclidean norms of the Taylor coefficients; the common kernel of every
/// mixed/joint upper bound here.
fn split_tables(f: &SampledFunction, l: usize) -> Vec<Vec<Vec<f64>>> {
    let k = f.order;
    f.jets
        .iter()
        .map(|jet| {
            let mut t = vec![vec![0.0; k + 1]; k + 1];
            for (alpha, v) in jet.coeffs() {
                let (a1, a2) = alpha.split(l);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                t[a1.degree()][a2.degree()] += norm;
            }
            t
        })
        .collect()
}

fn node_weights(f: &SampledFunction, l: usize) -> Vec<(f64, f64)> {
    (0..f.grid.node_count())
        .map(|i| {
            let x = f.grid.node(i);
            let a1 = x[..l].iter().map(|v| v * v).sum::<f64>().sqrt();
            let a2 = x[l..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (a1, a2)
        })
        .collect()
}

const SLACK_EPS: f64 = 1e-9;

/// Compare the mixed (curried) double-weighted sup with the joint norm,
/// in both directions, using the constants from the norm derivations.
/// Both sides use the same coefficient upper brackets, so each direction
/// is a theorem at truncation and any failure is a bug.
pub fn explaw_compare(
    f: &SampledFunction,
    spec: &ClassSpec,
    l: usize,
    rho1: f64,
    rho2: f64,
    cfg: &WeightConfig,
) -> Result<ExpLawReport, ExpLawError> {
    spec.validate()?;
    let n = f.grid.dim();
    if l == 0 || l >= n {
        return Err(ExpLawError::SplitMismatch(format!("split {l} of {n} axes")));
    }
    let horizon = f.order;
    match spec.family {
        Family::B | Family::D => compare_b(f, l, spec.family),
        Family::S => compare_s(f, l),
        Family::BM | Family::DM => compare_bm(f, spec, l, rho1, rho2, cfg),
        Family::SLM => compare_slm(f, spec, l, rho1, rho2, cfg),
        Family::Wp | Family::WMp => compare_wp(f, spec, l, horizon),
    }
}

fn compare_b(f: &SampledFunction, l: usize, family: Family) -> Result<ExpLawReport, ExpLawError> {
    if family == Family::D && f.support_flag.is_none() {
        return Err(ExpLawError::PreconditionFailed(
            "family D requires detected compact support".into(),
        ));
    }
    let k_max = f.order;
    let tables = split_tables(f, l);
    // grid sups of the block norms
    let mut mixed = vec![vec![0.0f64; k_max + 1]; k_max + 1];
    let mut joint = vec![0.0f64; k_max + 1];
    for t in &tables {
        for k1 in 0..=k_max {
            for k2 in 0..=k_max - k1 {
                let m = ln_factorial(k1).exp() * ln_factorial(k2).exp() * t[k1][k2];
                mixed[k1][k2] = mixed[k1][k2].max(m);
            }
        }
        for k in 0..=k_max {
            let s: f64 = (0..=k).map(|k1| t[k1][k - k1]).sum();
            joint[k] = joint[k].max(ln_factorial(k).exp() * s);
        }
    }
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    for k in 0..=k_max {
        let mut blockmax = 0.0f64;
        for k1 in 0..=k {
            let m = mixed[k1][k - k1];
            blockmax = blockmax.max(m);
            d1 = d1.min(joint[k] - m + SLACK_EPS * joint[k].max(1.0));
        }
        let scale = (k + 1) as f64 * 2f64.powi(k as i32);
        d2 = d2.min(scale * blockmax - joint[k] + SLACK_EPS * joint[k].max(1.0));
    }
    Ok(ExpLawReport {
        family,
        mixed_norm: mixed.iter().flatten().copied().fold(0.0, f64::max),
        joint_norm: joint.iter().copied().fold(0.0, f64::max),
        direction1_ok: d1 >= 0.0,
        direction2_ok: d2 >= 0.0,
        direction1_slack: d1,
        direction2_slack: d2,
        tau_used: None,
        rho_joint: None,
        fubini_discrepancy: None,
    })
}

/// Weight powers probed for the rapidly-decreasing family.
const S_WEIGHT_MAX: usize = 2;

fn compare_s(f: &SampledFunction, l: usize) -> Result<ExpLawReport, ExpLawError> {
    let k_max = f.order;
    let tables = split_tables(f, l);
    let weights = node_weights(f, l);
    let pw = S_WEIGHT_MAX;
    // mixed[p1][p2][k1][k2], joint[p][k] with the product norm a1 + a2
    let mut mixed = vec![vec![vec![vec![0.0f64; k_max + 1]; k_max + 1]; pw + 1]; pw + 1];
    let mut joint = vec![vec![0.0f64; k_max + 1]; 2 * pw + 1];
    for (t, &(a1, a2)) in tables.iter().zip(&weights) {
        for p1 in 0..=pw {
            for p2 in 0..=pw {
                let w = (1.0 + a1).powi(p1 as i32) * (1.0 + a2).powi(p2 as i32);
                for k1 in 0..=k_max {
                    for k2 in 0..=k_max - k1 {
                        let m = w * ln_factorial(k1).exp() * ln_factorial(k2).exp() * t[k1][k2];
                        mixed[p1][p2][k1][k2] = mixed[p1][p2][k1][k2].max(m);
                    }
                }
            }
        }
        for p in 0..=2 * pw {
            let w = (1.0 + a1 + a2).powi(p as i32);
            for k in 0..=k_max {
                let s: f64 = (0..=k).map(|k1| t[k1][k - k1]).sum();
                joint[p][k] = joint[p][k].max(w * ln_factorial(k).exp() * s);
            }
        }
    }
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    // direction 1: mixed(p1,k1,p2,k2) <= joint(p1+p2, k1+k2)
    for p1 in 0..=pw {
        for p2 in 0..=pw {
            for k1 in 0..=k_max {
                for k2 in 0..=k_max - k1 {
                    let j = joint[p1 + p2][k1 + k2];
                    d1 = d1.min(j - mixed[p1][p2][k1][k2] + SLACK_EPS * j.max(1.0));
                }
            }
        }
    }
    // direction 2: joint(p,k) <= (k+1) 2^k max_{k1+k2=k} mixed(p,p,k1,k2)
    for p in 0..=pw {
        for k in 0..=k_max {
            let blockmax = (0..=k)
                .map(|k1| mixed[p][p][k1][k - k1])
                .fold(0.0f64, f64::max);
            let scale = (k + 1) as f64 * 2f64.powi(k as i32);
            d2 = d2.min(scale * blockmax - joint[p][k] + SLACK_EPS * joint[p][k].max(1.0));
        }
    }
    Ok(ExpLawReport {
        family: Family::S,
        mixed_norm: mixed
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .fold(0.0, f64::max),
        joint_norm: joint.iter().flatten().copied().fold(0.0, f64::max),
        direction1_ok: d1 >= 0.0,
        direction2_ok: d2 >= 0.0,
        direction1_slack: d1,
        direction2_slack: d2,
        tau_used: None,
        rho_joint: None,
        fubini_discrepancy: None,
    })
}

/// Stabilized moderate-growth constant, required by direction 1.
fn tau_of(m: &WeightSequence, horizon: usize, cfg: &WeightConfig) -> Result<f64, ExpLawError> {
    let v = check_property(m, SeqProperty::ModerateGrowth, horizon.max(2), cfg)
        .map_err(|e| ExpLawError::PreconditionFailed(e.to_string()))?;
    if v.stabilized != Some(true) {
        return Err(ExpLawError::PreconditionFailed(
            "moderate-growth constant did not stabilize over the horizon".into(),
        ));
    }
    Ok(v.constant_estimate.unwrap().max(1.0))
}

fn require_wlc(m: &WeightSequence, horizon: usize, cfg: &WeightConfig) -> Result<(), ExpLawError> {
    let v = check_property(m, SeqProperty::WeaklyLogConvex, horizon.max(2), cfg)
        .map_err(|e| ExpLawError::PreconditionFailed(e.to_string()))?;
    if !v.holds_up_to_k {
        return Err(ExpLawError::PreconditionFailed(
            "weight sequence is not weakly log-convex up to the horizon".into(),
        ));
    }
    Ok(())
}

fn compare_bm(
    f: &SampledFunction,
    spec: &ClassSpec,
    l: usize,
    rho1: f64,
    rho2: f64,
    cfg: &WeightConfig,
) -> Result<ExpLawReport, ExpLawError> {
    if spec.family == Family::DM && f.support_flag.is_none() {
        return Err(ExpLawError::PreconditionFailed(
            "family D^M requires detected compact support".into(),
        ));
    }
    let m = spec.m.as_ref().unwrap();
    let k_max = f.order;
    require_wlc(m, k_max, cfg)?;
    let tau = tau_of(m, k_max.max(30), cfg)?;
    let tables = split_tables(f, l);
    let ln_m = m.ln_values(k_max);
    let rho_bar = rho1.min(rho2);
    let rho_joint = rho_bar / (2.0 * tau);

    // mixed(r1, r2) = sup t[k1][k2] / (r1^k1 M_k1 r2^k2 M_k2)
    let mixed_at = |r1: f64, r2: f64| -> f64 {
        let mut sup = 0.0f64;
        for t in &tables {
            for k1 in 0..=k_max {
                for k2 in 0..=k_max - k1 {
                    if t[k1][k2] == 0.0 {
                        continue;
                    }
                    let d = (k1 as f64 * r1.ln() + ln_m[k1] + k2 as f64 * r2.ln() + ln_m[k2])
                        .exp();
                    sup = sup.max(t[k1][k2] / d);
                }
            }
        }
        sup
    };
    // joint(r) = sup_k sum_{k1+k2=k} t / (r^k M_k)
    let joint_at = |r: f64| -> f64 {
        let mut sup = 0.0f64;
        for t in &tables {
            for k in 0..=k_max {
                let s: f64 = (0..=k).map(|k1| t[k1][k - k1]).sum();
                if s == 0.0 {
                    continue;
                }
                let d = (k as f64 * r.ln() + ln_m[k]).exp();
                sup = sup.max(s / d);
            }
        }
        sup
    };

    let mixed = mixed_at(rho1, rho2);
    let joint = joint_at(rho_joint);
    let d1 = joint - mixed + SLACK_EPS * joint.max(1.0);

    let mixed_bar = mixed_at(rho_bar, rho_bar);
    let joint2 = joint_at(2.0 * rho_bar);
    let scale = (k_max + 1) as f64;
    let d2 = scale * mixed_bar - joint2 + SLACK_EPS * joint2.max(1.0);

    Ok(ExpLawReport {
        family: spec.family,
        mixed_norm: mixed,
        joint_norm: joint,
        direction1_ok: d1 >= 0.0,
        direction2_ok: d2 >= 0.0,
        direction1_slack: d1,
        direction2_slack: d2,
        tau_used: Some(tau),
        rho_joint: Some(rho_joint),
        fubini_discrepancy: None,
    })
}

fn compare_slm(
    f: &SampledFunction,
    spec: &ClassSpec,
    l: usize,
    rho1: f64,
    rho2: f64,
    cfg: &WeightConfig,
) -> Result<ExpLawReport, ExpLawError> {
    let m = spec.m.as_ref().unwrap();
    let lw = spec.l.as_ref().unwrap();
    let k_max = f.order;
    require_wlc(m, k_max, cfg)?;
    require_wlc(lw, k_max, cfg)?;
    let tau = tau_of(m, k_max.max(30), cfg)?.max(tau_of(lw, k_max.max(30), cfg)?);
    let tables = split_tables(f, l);
    let weights = node_weights(f, l);
    let ln_m = m.ln_values(k_max);
    let ln_l = lw.ln_values(k_max);
    let rho_bar = rho1.min(rho2);
    let rho_joint = rho_bar / (2.0 * tau);
    let kw_max = S_WEIGHT_MAX;

    let mixed_at = |r1: f64, r2: f64| -> f64 {
        let mut sup = 0.0f64;
        for (t, &(a1, a2)) in tables.iter().zip(&weights) {
            for k1 in 0..=kw_max {
                for k2 in 0..=kw_max {
                    let w = (1.0 + a1).powi(k1 as i32) * (1.0 + a2).powi(k2 as i32);
                    for l1 in 0..=k_max {
                        for l2 in 0..=k_max - l1 {
                            if t[l1][l2] == 0.0 {
                                continue;
                            }
                            let d = ((k1 + l1) as f64 * r1.ln()
                                + (k2 + l2) as f64 * r2.ln()
                                + ln_factorial(k1)
                                + ln_factorial(k2)
                                + ln_l[k1]
                                + ln_l[k2]
                                + ln_m[l1]
                                + ln_m[l2])
                                .exp();
                            sup = sup.max(w * t[l1][l2] / d);
                        }
                    }
                }
            }
        }
        sup
    };
    let joint_at = |r: f64| -> f64 {
        let mut sup = 0.0f64;
        for (t, &(a1, a2)) in tables.iter().zip(&weights) {
            for k in 0..=2 * kw_max {
                let w = (1.0 + a1 + a2).powi(k as i32);
                for deg in 0..=k_max {
                    let s: f64 = (0..=deg).map(|l1| t[l1][deg - l1]).sum();
                    if s == 0.0 {
                        continue;
                    }
                    let d = ((k + deg) as f64 * r.ln() + ln_factorial(k) + ln_l[k] + ln_m[deg])
                        .exp();
                    sup = sup.max(w * s / d);
                }
            }
        }
        sup
    };

    let mixed = mixed_at(rho1, rho2);
    let joint = joint_at(rho_joint);
    let d1 = joint - mixed + SLACK_EPS * joint.max(1.0);

    let mixed_bar = mixed_at(rho_bar, rho_bar);
    let joint2 = joint_at(2.0 * rho_bar);
    let scale = ((k_max + 1) * (k_max + 1)) as f64;
    let d2 = scale * mixed_bar - joint2 + SLACK_EPS * joint2.max(1.0);

    Ok(ExpLawReport {
        family: Family::SLM,
        mixed_norm: mixed,
        joint_norm: joint,
        direction1_ok: d1 >= 0.0,
        direction2_ok: d2 >= 0.0,
        direction1_slack: d1,
        direction2_slack: d2,
        tau_used: Some(tau),
        rho_joint: Some(rho_joint),
        fubini_discrepancy: None,
    })
}

/// For the p-integrable families the exponential law is the Fubini
/// identity: the iterated quadrature of the curried mixed partials must
/// agree with the joint quadrature for every split multi-index pair.
fn compare_wp(
    f: &SampledFunction,
    spec: &ClassSpec,
    l: usize,
    horizon: usize,
) -> Result<ExpLawReport, ExpLawError> {
    let p = spec.p.unwrap();
    let (outer, inner) = f.grid.split(l);
    let inner_count = inner.node_count();
    let mut worst = 0.0f64;
    let mut sup_mixed = 0.0f64;
    let mut sup_joint = 0.0f64;
    for alpha in MultiIndex::up_to_degree(f.grid.dim(), horizon) {
        let joint = lp_norm_alpha(f, &alpha, p)?;
        // iterated: outer quadrature of the inner L^p norms' p-th powers
        let mut acc = 0.0;
        for oi in 0..outer.node_count() {
            let mut inner_acc = 0.0;
            for ii in 0..inner_count {
                let jet = &f.jets[oi * inner_count + ii];
                let v: f64 = jet
                    .partial(&alpha)
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                inner_acc += inner.simpson_weight(ii) * v.powf(p);
            }
            acc += outer.simpson_weight(oi) * inner_acc;
        }
        let iterated = acc.powf(1.0 / p);
        worst = worst.max((iterated - joint).abs());
        let (it_w, j_w) = if spec.family == Family::WMp {
            let m = spec.m.as_ref().unwrap();
            let rho = spec.rho.unwrap();
            let k = alpha.degree();
            let d = (k as f64 * rho.ln() + ln_factorial(k) + m.ln_value(k)).exp();
            (iterated / d, joint / d)
        } else {
            (iterated, joint)
        };
        sup_mixed = sup_mixed.max(it_w);
        sup_joint = sup_joint.max(j_w);
    }
    let ok = worst <= 1e-8;
    Ok(ExpLawReport {
        family: spec.family,
        mixed_norm: sup_mixed,
        joint_norm: sup_joint,
        direction1_ok: ok,
        direction2_ok: ok,
        direction1_slack: 1e-8 - worst,
        direction2_slack: 1e-8 - worst,
        tau_used: None,
        rho_joint: None,
        fubini_discrepancy: Some(worst),
    })
}

/// Exact-rational witness for one inequality-kit case.
#[derive(Clone, Debug)]
pub struct KitReport {
    pub holds: bool,
    /// lhs - rhs (or the analogous signed slack), as a rational.
    pub slack: Rat,
}

fn rat_pow(base: &Rat, e: usize) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..e {
        acc *= base.clone();
    }
    acc
}

/// sum_{k1+k2=k} (1+a1)^k1 (1+a2)^k2 >= 2^-k (2+a1+a2)^k >= 2^-k (1+a1+a2)^k.
pub fn eq_n(a1: &Rat, a2: &Rat, k: usize) -> KitReport {
    let one = Rat::one();
    let b1 = one.clone() + a1.clone();
    let b2 = one.clone() + a2.clone();
    let lhs: Rat = (0..=k)
        .map(|k1| rat_pow(&b1, k1) * rat_pow(&b2, k - k1))
        .sum();
    let two_pow = rat_pow(&(one.clone() + one.clone()), k);
    let mid = rat_pow(&(b1 + b2.clone() - one.clone() + one.clone()), k) / two_pow.clone();
    let low = rat_pow(&(b2 + a1.clone()), k) / two_pow;
    let holds = lhs >= mid && mid >= low;
    KitReport { slack: lhs - mid, holds }
}

/// a_{k1,k2} <= b_k <= (k+1) max_{k1+k2=k} a_{k1,k2} for b_k = sum a.
pub fn eq_abelem(a: &[Rat]) -> KitReport {
    let k = a.len() - 1;
    let b: Rat = a.iter().cloned().sum();
    let maxa = a.iter().cloned().fold(Rat::zero(), |acc, v| acc.max(v));
    let rhs = Rat::from_integer(((k + 1) as i64).into()) * maxa;
    let holds = a.iter().all(|v| *v <= b) && b <= rhs;
    KitReport { slack: rhs - b, holds }
}

fn exact_weight(m: &WeightSequence, k: usize) -> Result<Rat, ExpLawError> {
    m.exact(k).ok_or_else(|| {
        ExpLawError::PreconditionFailed("weight kind has no exact rational values".into())
    })
}

/// k1! k2! M_k1 M_k2 <= (k1+k2)! M_{k1+k2}.
pub fn eq_wlc(m: &WeightSequence, k1: usize, k2: usize) -> Result<KitReport, ExpLawError> {
    let lhs = factorial_rat(k1) * factorial_rat(k2) * exact_weight(m, k1)? * exact_weight(m, k2)?;
    let rhs = factorial_rat(k1 + k2) * exact_weight(m, k1 + k2)?;
    Ok(KitReport { holds: lhs <= rhs, slack: rhs - lhs })
}

/// M_{j+k} <= tau^{j+k} M_j M_k for the given tau.
pub fn eq_mg(m: &WeightSequence, tau: &Rat, j: usize, k: usize) -> Result<KitReport, ExpLawError> {
    let lhs = exact_weight(m, j + k)?;
    let rhs = rat_pow(tau, j + k) * exact_weight(m, j)? * exact_weight(m, k)?;
    Ok(KitReport { holds: lhs <= rhs, slack: rhs - lhs })
}

/// Norm axioms of |(x1,x2)| := |x1| + |x2| built on exact l^1 component
/// norms: triangle inequality and domination of both components.
pub fn eq_productnorm(x1: &[Rat], y1: &[Rat], x2: &[Rat], y2: &[Rat]) -> KitReport {
    let l1 = |v: &[Rat]| -> Rat { v.iter().map(|x| x.abs()).sum() };
    let sum = |a: &[Rat], b: &[Rat]| -> Vec<Rat> {
        a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect()
    };
    let nx = l1(x1) + l1(x2);
    let ny = l1(y1) + l1(y2);
    let nsum = l1(&sum(x1, y1)) + l1(&sum(x2, y2));
    let holds = nsum <= nx.clone() + ny.clone() && l1(x1) <= nx.clone() && l1(x2) <= nx.clone();
    KitReport { slack: nx + ny - nsum, holds }
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterexampleRun {
    /// (j_n, k_n) for n = 1..=N, each satisfying the ratio threshold.
    pub pairs: Vec<(usize, usize)>,
    /// ln h_k for the prescribed derivative magnitudes h_k = k! M_k.
    pub ln_h: Vec<f64>,
    pub sigma_set: Vec<f64>,
    /// lower_bounds[s][n-1] = n^{2 k_n} / sigma_s^{k_n}.
    pub lower_bounds: Vec<Vec<f64>>,
    /// ln of the intermediate chain value (the functional term at q = k_n).
    pub ln_intermediate: Vec<Vec<f64>>,
    /// Strict growth of the lower bounds from n = 2 on, for every sigma.
    pub diverging: bool,
}

/// Reproduce the divergence lab for a non-moderate weight sequence: find
/// index pairs realizing the ratio threshold, prescribe the surrogate jet
/// magnitudes, and evaluate the lower-bound chain per sigma.
pub fn counterexample_run(
    m: &WeightSequence,
    lseq: &WeightSequence,
    n_max: usize,
    sigma_set: &[f64],
    k_search: usize,
    cfg: &WeightConfig,
) -> Result<CounterexampleRun, ExpLawError> {
    let mg = check_property(m, SeqProperty::ModerateGrowth, k_search.max(2), cfg)
        .map_err(|e| ExpLawError::PreconditionFailed(e.to_string()))?;
    if mg.stabilized == Some(true) {
        return Err(ExpLawError::PreconditionFailed(
            "sequence has stabilized moderate growth; no counterexample expected".into(),
        ));
    }
    let ln_m = m.ln_values(2 * k_search);
    let mut pairs = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        // target: (M_{k+j}/(M_k M_j))^{1/(k+j)} >= n^2 n! L_n, with j >= n
        let ln_target = 2.0 * (n as f64).ln() + ln_factorial(n) + lseq.ln_value(n);
        let mut found = None;
        let mut best = f64::NEG_INFINITY;
        'search: for s in 2..=2 * k_search {
            for j in n..s {
                let k = s - j;
                if j > k_search || k > k_search || k < 1 {
                    continue;
                }
                let ln_ratio = (ln_m[s] - ln_m[j] - ln_m[k]) / s as f64;
                best = best.max(ln_ratio);
                if ln_ratio >= ln_target - cfg.ln_eps {
                    found = Some((j, k));
                    break 'search;
                }
            }
        }
        match found {
            Some(p) => pairs.push(p),
            None => {
                return Err(ExpLawError::SearchExhausted {
                    n,
                    best_ratio: best.exp(),
                    target: ln_target.exp(),
                })
            }
        }
    }
    let h_max = pairs.iter().map(|&(j, k)| j + k).max().unwrap_or(0);
    let ln_h: Vec<f64> = (0..=h_max)
        .map(|k| ln_factorial(k) + ln_m[k])
        .collect();
    let mut lower_bounds = Vec::with_capacity(sigma_set.len());
    let mut ln_intermediate = Vec::with_capacity(sigma_set.len());
    for &sigma in sigma_set {
        let mut lows = Vec::with_capacity(n_max);
        let mut mids = Vec::with_capacity(n_max);
        for (n, &(j, k)) in pairs.iter().enumerate().map(|(i, p)| (i + 1, p)) {
            let nf = n as f64;
            lows.push((2.0 * k as f64 * nf.ln() - k as f64 * sigma.ln()).exp());
            // h_{j+k} / (n! L_n k! j! M_k M_j n^{n+j} sigma^k)
            let ln_mid = ln_h[j + k]
                - ln_factorial(n)
                - lseq.ln_value(n)
                - ln_factorial(k)
                - ln_factorial(j)
                - ln_m[k]
                - ln_m[j]
                - (n + j) as f64 * nf.ln()
                - k as f64 * sigma.ln();
            mids.push(ln_mid);
        }
        lower_bounds.push(lows);
        ln_intermediate.push(mids);
    }
    // the chain value must dominate the closed-form lower bound, and the
    // lower bounds must increase strictly from n = 2
    let mut diverging = true;
    for (s, lows) in lower_bounds.iter().enumerate() {
        for (i, &v) in lows.iter().enumerate() {
            if ln_intermediate[s][i] < v.ln() - 1e-9 {
                diverging = false;
            }
        }
        for w in lows[1.min(lows.len() - 1)..].windows(2) {
            if w[1] <= w[0] {
                diverging = false;
            }
        }
    }
    Ok(CounterexampleRun {
        pairs,
        ln_h,
        sigma_set: sigma_set.to_vec(),
        lower_bounds,
        ln_intermediate,
        diverging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdsl::parse;
    use crate::grid::{Axis, GridSpec};

    fn grid_2d(half: f64, points: usize) -> GridSpec {
        GridSpec::new(vec![
            Axis { a: -half, b: half, points },
            Axis { a: -half, b: half, points },
        ])
        .unwrap()
    }

    fn gaussian_2d(points: usize, order: usize) -> SampledFunction {
        let e = parse("exp(-x1^2-x2^2)", 2).unwrap();
        SampledFunction::sample(&e, &grid_2d(6.0, points), order).unwrap()
    }

    #[test]
    fn curry_round_trip_bit_identical() {
        let f = gaussian_2d(21, 4);
        let c = curry(&f, 1).unwrap();
        let back = uncurry(&c).unwrap();
        assert_eq!(f.jets, back.jets);
        assert_eq!(f.grid, back.grid);
    }

    #[test]
    fn bad_split_rejected() {
        let f = gaussian_2d(11, 2);
        assert!(matches!(curry(&f, 0), Err(ExpLawError::SplitMismatch(_))));
        assert!(matches!(curry(&f, 2), Err(ExpLawError::SplitMismatch(_))));
    }

    #[test]
    fn mixed_partial_identity() {
        // d2^b [ (f^vee)^(a) ] equals the joint partial for all sampled pairs
        let e = parse("x1^2*x2 + x1*x2^3", 2).unwrap();
        let f = SampledFunction::sample(&e, &grid_2d(1.0, 5), 4).unwrap();
        let c = curry(&f, 1).unwrap();
        let inner_count = c.inner_grid.node_count();
        for (idx, jet) in f.jets.iter().enumerate() {
            let (oi, ii) = (idx / inner_count, idx % inner_count);
            for a1 in 0..=2u32 {
                for a2 in 0..=2u32 {
                    let joint = jet.partial(&MultiIndex(vec![a1, a2]));
                    let mixed = c.mixed_partial(
                        oi,
                        ii,
                        &MultiIndex(vec![a1]),
                        &MultiIndex(vec![a2]),
                    );
                    assert!((joint[0] - mixed[0]).abs() <= 1e-12 * joint[0].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn explaw_bm_gaussian() {
        let f = gaussian_2d(41, 6);
        let m = WeightSequence::gevrey(1.0).unwrap();
        let spec = ClassSpec::weighted(Family::BM, m, 1.0).unwrap();
        let r = explaw_compare(&f, &spec, 1, 1.0, 1.0, &WeightConfig::default()).unwrap();
        assert!(r.direction1_ok, "slack {}", r.direction1_slack);
        assert!(r.direction2_ok, "slack {}", r.direction2_slack);
        assert!(r.tau_used.unwrap() >= 1.0);
    }

    #[test]
    fn explaw_polynomial_trivial() {
        let e = parse("(x1+x2)^2", 2).unwrap();
        let f = SampledFunction::sample(&e, &grid_2d(2.0, 21), 6).unwrap();
        let spec = ClassSpec::plain(Family::B).unwrap();
        let r = explaw_compare(&f, &spec, 1, 1.0, 1.0, &WeightConfig::default()).unwrap();
        assert!(r.direction1_ok && r.direction2_ok);
    }

    #[test]
    fn explaw_s_family() {
        let f = gaussian_2d(41, 4);
        let spec = ClassSpec::plain(Family::S).unwrap();
        let r = explaw_compare(&f, &spec, 1, 1.0, 1.0, &WeightConfig::default()).unwrap();
        assert!(r.direction1_ok, "slack {}", r.direction1_slack);
        assert!(r.direction2_ok, "slack {}", r.direction2_slack);
    }

    #[test]
    fn fubini_gaussian() {
        let f = gaussian_2d(81, 2);
        let spec = ClassSpec::lp(2.0).unwrap();
        let r = explaw_compare(&f, &spec, 1, 1.0, 1.0, &WeightConfig::default()).unwrap();
        assert!(r.fubini_discrepancy.unwrap() <= 1e-8);
        assert!(r.direction1_ok);
    }

    #[test]
    fn explaw_requires_stabilized_tau() {
        let f = gaussian_2d(11, 4);
        let m = WeightSequence::qsquare(2.0).unwrap();
        let spec = ClassSpec::weighted(Family::BM, m, 1.0).unwrap();
        assert!(matches!(
            explaw_compare(&f, &spec, 1, 1.0, 1.0, &WeightConfig::default()),
            Err(ExpLawError::PreconditionFailed(_))
        ));
    }

    #[test]
    fn kit_examples() {
        let z = Rat::zero();
        let r = eq_n(&z, &z, 5);
        assert!(r.holds);
        // LHS = 6, middle = 1
        assert_eq!(r.slack, Rat::from_integer(5.into()));

        let ones = vec![Rat::one(); 4];
        let r2 = eq_abelem(&ones);
        assert!(r2.holds);
        assert_eq!(r2.slack, Rat::zero());

        let m = WeightSequence::gevrey(1.0).unwrap();
        let r3 = eq_wlc(&m, 2, 2).unwrap();
        assert!(r3.holds);
        // 16 <= 576
        assert_eq!(r3.slack, Rat::from_integer(560.into()));

        let tau = Rat::from_integer(2.into());
        let r4 = eq_mg(&m, &tau, 3, 4).unwrap();
        assert!(r4.holds);
    }

    #[test]
    fn counterexample_qsquare() {
        let m = WeightSequence::qsquare(2.0).unwrap();
        let l = WeightSequence::constant_one();
        let run =
            counterexample_run(&m, &l, 5, &[1.0, 2.0, 4.0, 8.0], 40, &WeightConfig::default())
                .unwrap();
        assert_eq!(run.pairs[1], (3, 3));
        assert!(run.diverging);
        for lows in &run.lower_bounds {
            for w in lows[1..].windows(2) {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn counterexample_requires_non_moderate() {
        let m = WeightSequence::gevrey(1.0).unwrap();
        let l = WeightSequence::constant_one();
        assert!(matches!(
            counterexample_run(&m, &l, 3, &[1.0], 20, &WeightConfig::default()),
            Err(ExpLawError::PreconditionFailed(_))
        ));
    }
}
