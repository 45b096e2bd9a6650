//! Seminorm estimation on grid-sampled functions: the global function
//! classes B / S / B^M / S^M_L, the p-integrable families W / W^{M,p},
//! compact-support variants D / D^M, type-radius classification, the trace
//! inequality check, the tensor seminorm, and a 1-D continuous Fourier
//! transform for the factorization identity.

use crate::grid::GridSpec;
use crate::jet::{Jet, JetError};
use crate::multiindex::MultiIndex;
use crate::sampled::SampledFunction;
use crate::scalar::{factorial_f64, ln_factorial};
use crate::weightseq::WeightSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("unsupported indices: {0}")]
    UnsupportedIndices(String),
    #[error("quadrature box too small: {0}")]
    QuadratureBoxTooSmall(String),
    #[error("invalid class spec: {0}")]
    InvalidSpec(String),
    #[error("empty representation")]
    EmptyRepresentation,
    #[error("jet error: {0}")]
    Jet(#[from] JetError),
}

/// Relative boundary-mass threshold for the quadrature guard.
pub const BOUNDARY_MASS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    B,
    S,
    BM,
    SLM,
    Wp,
    WMp,
    D,
    DM,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSpec {
    pub family: Family,
    pub m: Option<WeightSequence>,
    pub l: Option<WeightSequence>,
    pub rho: Option<f64>,
    pub p: Option<f64>,
}

impl ClassSpec {
    pub fn plain(family: Family) -> Result<Self, NormError> {
        let s = ClassSpec { family, m: None, l: None, rho: None, p: None };
        s.validate()?;
        Ok(s)
    }

    pub fn weighted(family: Family, m: WeightSequence, rho: f64) -> Result<Self, NormError> {
        let s = ClassSpec { family, m: Some(m), l: None, rho: Some(rho), p: None };
        s.validate()?;
        Ok(s)
    }

    pub fn lp(p: f64) -> Result<Self, NormError> {
        let s = ClassSpec { family: Family::Wp, m: None, l: None, rho: None, p: Some(p) };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), NormError> {
        let needs_m = matches!(self.family, Family::BM | Family::SLM | Family::WMp | Family::DM);
        if needs_m && self.m.is_none() {
            return Err(NormError::InvalidSpec("family requires a weight sequence M".into()));
        }
        if !needs_m && (self.m.is_some() || self.l.is_some()) {
            return Err(NormError::InvalidSpec("plain family forbids M and L".into()));
        }
        if self.family == Family::SLM && self.l.is_none() {
            return Err(NormError::InvalidSpec("S^M_L requires a second sequence L".into()));
        }
        if needs_m && !self.rho.map(|r| r > 0.0).unwrap_or(false) {
            return Err(NormError::InvalidSpec("weighted family requires rho > 0".into()));
        }
        if matches!(self.family, Family::Wp | Family::WMp)
            && !self.p.map(|p| p >= 1.0).unwrap_or(false)
        {
            return Err(NormError::InvalidSpec("L^p family requires p >= 1".into()));
        }
        Ok(())
    }
}

/// A two-sided estimate: lower <= true value <= upper.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn point(v: f64) -> Bracket {
        Bracket { lower: v, upper: v }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeminormReport {
    /// Keyed by rendered index: "k=2", "k=1,l=0", "alpha=[1,0]", "sup".
    pub entries: BTreeMap<String, Bracket>,
    pub truncation: usize,
    pub finite_at_truncation: bool,
    /// Present for the compactly supported families.
    pub support: Option<SupportVerdict>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportVerdict {
    pub compact: bool,
    pub radius: Option<f64>,
}

/// Which seminorm entries to compute.
#[derive(Clone, Debug)]
pub enum IndexSet {
    /// Derivative orders, for B/D.
    Orders(Vec<usize>),
    /// (weight power, derivative order) pairs, for S.
    WeightedOrders(Vec<(usize, usize)>),
    /// Multi-indices for the L^p families.
    Alphas(Vec<MultiIndex>),
    /// Everything up to the truncation order.
    All,
}

/// Quasi-random unit directions: the coordinate axes, the normalized
/// all-ones diagonal, then seeded uniform fill up to `count`.
pub fn unit_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(count);
    for i in 0..n.min(count) {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        dirs.push(v);
    }
    if n > 1 && dirs.len() < count {
        let s = 1.0 / (n as f64).sqrt();
        dirs.push(vec![s; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d1ec7);
    while dirs.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            dirs.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

pub fn default_direction_count(n: usize) -> usize {
    (2 * n).max(64)
}

/// Bracket for the symmetric multilinear norm of the k-th derivative:
/// lower from directional sampling (polarization equivalence), upper from
/// the triangle-inequality majorant sum_{|a|=k} (k!/a!) |d^a f|.
pub fn opnorm_bracket(
    jet: &Jet<f64>,
    k: usize,
    directions: &[Vec<f64>],
) -> Result<Bracket, NormError> {
    if k > jet.order() {
        return Err(NormError::Jet(JetError::OrderMismatch(format!(
            "order {k} exceeds jet order {}",
            jet.order()
        ))));
    }
    let kfac = factorial_f64(k);
    let mut upper = 0.0;
    for (alpha, v) in jet.coeffs() {
        if alpha.degree() == k {
            // (k!/a!)|d^a f| = k! |coeff|
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            upper += kfac * norm;
        }
    }
    let mut lower = 0.0f64;
    for v in directions {
        let d = jet.directional_derivative(v, k)?;
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        lower = lower.max(norm);
    }
    Ok(Bracket { lower: lower.min(upper), upper })
}

fn max_bracket(a: Bracket, b: Bracket) -> Bracket {
    Bracket { lower: a.lower.max(b.lower), upper: a.upper.max(b.upper) }
}

fn scale_bracket(b: Bracket, w: f64) -> Bracket {
    Bracket { lower: b.lower * w, upper: b.upper * w }
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Grid sup of the opnorm bracket for one derivative order, optionally
/// weighted by (1+|x|)^kw.
fn sup_weighted(
    f: &SampledFunction,
    order: usize,
    kw: usize,
    dirs: &[Vec<f64>],
) -> Result<Bracket, NormError> {
    let mut out = Bracket::point(0.0);
    for (idx, jet) in f.jets.iter().enumerate() {
        let b = opnorm_bracket(jet, order, dirs)?;
        let w = if kw == 0 {
            1.0
        } else {
            (1.0 + euclid(&f.grid.node(idx))).powi(kw as i32)
        };
        out = max_bracket(out, scale_bracket(b, w));
    }
    Ok(out)
}

/// L^p norm of d^alpha f over the grid box by composite Simpson, with the
/// boundary-mass guard.
pub fn lp_norm_alpha(f: &SampledFunction, alpha: &MultiIndex, p: f64) -> Result<f64, NormError> {
    let mut interior_max = 0.0f64;
    let mut boundary_max = 0.0f64;
    let mut acc = 0.0;
    for (idx, jet) in f.jets.iter().enumerate() {
        let v = euclid(&jet.partial(alpha));
        if f.grid.is_boundary(idx) {
            boundary_max = boundary_max.max(v);
        } else {
            interior_max = interior_max.max(v);
        }
        acc += f.grid.simpson_weight(idx) * v.powf(p);
    }
    if boundary_max > BOUNDARY_MASS_TOL * interior_max {
        return Err(NormError::QuadratureBoxTooSmall(format!(
            "boundary magnitude {boundary_max:.3e} vs interior {interior_max:.3e} for alpha {:?}",
            alpha.0
        )));
    }
    Ok(acc.powf(1.0 / p))
}

/// ln(rho^k k! M_k), the weighted-family denominator in log space.
fn ln_denom(rho: f64, k: usize, m: &WeightSequence) -> f64 {
    k as f64 * rho.ln() + ln_factorial(k) + m.ln_value(k)
}

fn support_verdict(f: &SampledFunction) -> SupportVerdict {
    match &f.support_flag {
        Some(s) => SupportVerdict { compact: true, radius: Some(s.radius()) },
        None => SupportVerdict { compact: false, radius: None },
    }
}

pub fn seminorm(
    f: &SampledFunction,
    spec: &ClassSpec,
    indices: &IndexSet,
) -> Result<SeminormReport, NormError> {
    spec.validate()?;
    let order = f.order;
    let n = f.grid.dim();
    let dirs = unit_directions(n, default_direction_count(n));
    let mut entries = BTreeMap::new();
    let mut support = None;
    match spec.family {
        Family::B | Family::D => {
            let ks: Vec<usize> = match indices {
                IndexSet::Orders(v) => v.clone(),
                IndexSet::All => (0..=order).collect(),
                _ => return Err(NormError::UnsupportedIndices("family B takes orders".into())),
            };
            for &k in &ks {
                if k > order {
                    return Err(NormError::UnsupportedIndices(format!(
                        "order {k} exceeds truncation {order}"
                    )));
                }
                entries.insert(format!("k={k}"), sup_weighted(f, k, 0, &dirs)?);
            }
            if spec.family == Family::D {
                support = Some(support_verdict(f));
            }
        }
        Family::S => {
            let kls: Vec<(usize, usize)> = match indices {
                IndexSet::WeightedOrders(v) => v.clone(),
                IndexSet::All => (0..=order)
                    .flat_map(|k| (0..=order).map(move |l| (k, l)))
                    .collect(),
                _ => {
                    return Err(NormError::UnsupportedIndices(
                        "family S takes (k,l) pairs".into(),
                    ))
                }
            };
            for &(k, l) in &kls {
                if l > order {
                    return Err(NormError::UnsupportedIndices(format!(
                        "derivative order {l} exceeds truncation {order}"
                    )));
                }
                entries.insert(format!("k={k},l={l}"), sup_weighted(f, l, k, &dirs)?);
            }
        }
        Family::BM | Family::DM => {
            let m = spec.m.as_ref().unwrap();
            let rho = spec.rho.unwrap();
            let mut sup = Bracket::point(0.0);
            for k in 0..=order {
                let d = ln_denom(rho, k, m).exp();
                let b = scale_bracket(sup_weighted(f, k, 0, &dirs)?, 1.0 / d);
                entries.insert(format!("k={k}"), b);
                sup = max_bracket(sup, b);
            }
            entries.insert("sup".into(), sup);
            if spec.family == Family::DM {
                support = Some(support_verdict(f));
            }
        }
        Family::SLM => {
            let m = spec.m.as_ref().unwrap();
            let l_seq = spec.l.as_ref().unwrap();
            let rho = spec.rho.unwrap();
            let mut sup = Bracket::point(0.0);
            for l in 0..=order {
                for k in 0..=order {
                    let d = ((k + l) as f64 * rho.ln()
                        + ln_factorial(k)
                        + ln_factorial(l)
                        + l_seq.ln_value(k)
                        + m.ln_value(l))
                    .exp();
                    let b = scale_bracket(sup_weighted(f, l, k, &dirs)?, 1.0 / d);
                    entries.insert(format!("k={k},l={l}"), b);
                    sup = max_bracket(sup, b);
                }
            }
            entries.insert("sup".into(), sup);
        }
        Family::Wp | Family::WMp => {
            let p = spec.p.unwrap();
            let alphas: Vec<MultiIndex> = match indices {
                IndexSet::Alphas(v) => v.clone(),
                IndexSet::All => MultiIndex::up_to_degree(n, order),
                _ => {
                    return Err(NormError::UnsupportedIndices(
                        "L^p families take multi-indices".into(),
                    ))
                }
            };
            let mut sup = Bracket::point(0.0);
            for alpha in &alphas {
                if alpha.degree() > order {
                    return Err(NormError::UnsupportedIndices(format!(
                        "degree {} exceeds truncation {order}",
                        alpha.degree()
                    )));
                }
                let mut v = lp_norm_alpha(f, alpha, p)?;
                if spec.family == Family::WMp {
                    let m = spec.m.as_ref().unwrap();
                    let rho = spec.rho.unwrap();
                    v /= ln_denom(rho, alpha.degree(), m).exp();
                }
                let b = Bracket::point(v);
                entries.insert(format!("alpha={:?}", alpha.0), b);
                sup = max_bracket(sup, b);
            }
            if spec.family == Family::WMp {
                entries.insert("sup".into(), sup);
            }
        }
    }
    let finite = entries.values().all(|b| b.upper.is_finite())
        && support.as_ref().map(|s| s.compact).unwrap_or(true);
    Ok(SeminormReport {
        entries,
        truncation: order,
        finite_at_truncation: finite,
        support,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeClass {
    BeurlingLike,
    RoumieuLike,
    Outside,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeRadius {
    pub rho_star: f64,
    pub classification: TypeClass,
    /// k-th roots (sup_x |f^{(k)}(x)| / (k! M_k))^{1/k} for k = 1..K.
    pub roots: Vec<f64>,
}

/// Estimate of the type radius rho* separating the Beurling and Roumieu
/// regimes for f against the scale M.
pub fn type_radius(
    f: &SampledFunction,
    m: &WeightSequence,
    horizon: usize,
) -> Result<TypeRadius, NormError> {
    if horizon < 6 || horizon > f.order {
        return Err(NormError::UnsupportedIndices(format!(
            "need 6 <= horizon <= truncation, got {horizon} vs {}",
            f.order
        )));
    }
    let n = f.grid.dim();
    let dirs = unit_directions(n, default_direction_count(n));
    let mut roots = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let sup = sup_weighted(f, k, 0, &dirs)?.upper;
        let root = if sup == 0.0 {
            0.0
        } else {
            ((sup.ln() - ln_factorial(k) - m.ln_value(k)) / k as f64).exp()
        };
        roots.push(root);
    }
    let tail = &roots[horizon / 2 - 1..];
    let rho_star = tail.iter().copied().fold(0.0f64, f64::max);
    let classification = if rho_star < 1e-6 {
        TypeClass::BeurlingLike
    } else if !rho_star.is_finite() {
        TypeClass::Outside
    } else {
        // still climbing at the horizon -> no finite-type evidence
        let q = (horizon / 4).max(1);
        let early = roots[..horizon - q].iter().copied().fold(0.0f64, f64::max);
        if early > 0.0 && rho_star / early > 1.5 {
            TypeClass::Outside
        } else {
            TypeClass::RoumieuLike
        }
    };
    Ok(TypeRadius { rho_star, classification, roots })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Empirical check of the trace inequality: the L^p norm of the slice
/// f(x0, .) against the first-order Sobolev norm of f on the product.
/// The W^{1,p} aggregate is the summation convention sum_{|a|<=1} |f^(a)|_p.
pub fn trace_check(f: &SampledFunction, x0: f64, p: f64) -> Result<TraceReport, NormError> {
    let n = f.grid.dim();
    if n < 2 {
        return Err(NormError::UnsupportedIndices(
            "trace check needs a product grid with at least 2 axes".into(),
        ));
    }
    // nearest slice index on axis 0
    let ax = &f.grid.axes[0];
    let h = f.grid.spacing(0);
    let i0 = (((x0 - ax.a) / h).round().max(0.0) as usize).min(ax.points - 1);
    let (_, inner) = f.grid.split(1);
    let mut acc = 0.0;
    for inner_idx in 0..inner.node_count() {
        let mut full = vec![i0];
        full.extend(inner.unflatten(inner_idx));
        let jet = &f.jets[f.grid.flatten(&full)];
        acc += inner.simpson_weight(inner_idx) * euclid(&jet.value()).powf(p);
    }
    let lhs = acc.powf(1.0 / p);
    let mut rhs = 0.0;
    for alpha in MultiIndex::up_to_degree(n, 1) {
        rhs += lp_norm_alpha(f, &alpha, p)?;
    }
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(TraceReport { lhs, rhs, ratio })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorReport {
    /// The representation-wise tensor seminorm value.
    pub value: f64,
    /// Direct L^p norm of the mixed derivative of h = sum f_i (x) g_i.
    pub direct: f64,
    pub majorizes: bool,
}

/// Evaluate the tensor seminorm for a GIVEN representation sum f_i (x) g_i
/// at 1-D derivative orders (alpha, beta): the l^p norm of (|g_i^(beta)|_p)
/// times the sup over sampled unit-L^q test functions u of the l^q norm of
/// (int f_i^(alpha) u). No infimum over representations is searched.
pub fn tensor_seminorm(
    pairs: &[(SampledFunction, SampledFunction)],
    alpha: usize,
    beta: usize,
    p: f64,
) -> Result<TensorReport, NormError> {
    if pairs.is_empty() {
        return Err(NormError::EmptyRepresentation);
    }
    let fg = &pairs[0].0.grid;
    let gg = &pairs[0].1.grid;
    let a_idx = MultiIndex(vec![alpha as u32]);
    let b_idx = MultiIndex(vec![beta as u32]);
    let fa: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(f, _)| f.jets.iter().map(|j| j.partial(&a_idx)[0]).collect())
        .collect();
    let gb: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(_, g)| g.jets.iter().map(|j| j.partial(&b_idx)[0]).collect())
        .collect();
    let wf: Vec<f64> = (0..fg.node_count()).map(|i| fg.simpson_weight(i)).collect();
    let wg: Vec<f64> = (0..gg.node_count()).map(|i| gg.simpson_weight(i)).collect();

    let q = if p > 1.0 { p / (p - 1.0) } else { f64::INFINITY };
    let lq_quad = |vals: &[f64]| -> f64 {
        if q.is_finite() {
            vals.iter()
                .zip(&wf)
                .map(|(v, w)| w * v.abs().powf(q))
                .sum::<f64>()
                .powf(1.0 / q)
        } else {
            vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
        }
    };
    let lq_seq = |vals: &[f64]| -> f64 {
        if q.is_finite() {
            vals.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
        } else {
            vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
        }
    };
    let lp_seq = |vals: &[f64]| -> f64 {
        vals.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    };

    // candidate test functions: the L^q-dual witness of each f_i^(alpha)
    // and of every sign combination of the family
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let push_dual = |target: &[f64], candidates: &mut Vec<Vec<f64>>| {
        // u = sign(t)|t|^(p-1), then normalized in L^q; attains Hoelder for t
        let u: Vec<f64> = target
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    0.0
                } else {
                    t.signum() * t.abs().powf(p - 1.0)
                }
            })
            .collect();
        let norm = lq_quad(&u);
        if norm > 0.0 {
            candidates.push(u.into_iter().map(|v| v / norm).collect());
        }
    };
    for t in &fa {
        push_dual(t, &mut candidates);
    }
    let m = pairs.len();
    for mask in 0..(1u32 << (m - 1)) {
        let combo: Vec<f64> = (0..fg.node_count())
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let s = if j > 0 && mask >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 };
                        s * fa[j][i]
                    })
                    .sum()
            })
            .collect();
        push_dual(&combo, &mut candidates);
    }

    let g_norms: Vec<f64> = gb
        .iter()
        .map(|g| {
            g.iter()
                .zip(&wg)
                .map(|(v, w)| w * v.abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        })
        .collect();
    let mut sup = 0.0f64;
    for u in &candidates {
        let s: Vec<f64> = fa
            .iter()
            .map(|t| t.iter().zip(u).zip(&wf).map(|((a, b), w)| w * a * b).sum())
            .collect();
        sup = sup.max(lq_seq(&s));
    }
    let value = lp_seq(&g_norms) * sup;

    // direct L^p norm of the mixed derivative of h on the product grid
    let mut acc = 0.0;
    for (i, wx) in wf.iter().enumerate() {
        for (j, wy) in wg.iter().enumerate() {
            let h: f64 = (0..m).map(|t| fa[t][i] * gb[t][j]).sum();
            acc += wx * wy * h.abs().powf(p);
        }
    }
    let direct = acc.powf(1.0 / p);
    Ok(TensorReport {
        value,
        direct,
        majorizes: value >= direct - 1e-9 * direct.max(1.0),
    })
}

/// Continuous Fourier transform Ff(xi) = int f(x) e^{-2 pi i x xi} dx of a
/// 1-D sample, returned as a value-level sample with (re, im) target.
pub fn fourier_1d(
    f: &SampledFunction,
    xi_grid: &GridSpec,
) -> Result<SampledFunction, NormError> {
    if f.grid.dim() != 1 || xi_grid.dim() != 1 {
        return Err(NormError::UnsupportedIndices("fourier_1d is one-dimensional".into()));
    }
    let vals: Vec<f64> = f.jets.iter().map(|j| j.value()[0]).collect();
    let max_abs = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let b0 = vals[0].abs().max(vals[vals.len() - 1].abs());
    if b0 > 1e-8 * max_abs.max(1e-300) && b0 > 1e-300 {
        return Err(NormError::QuadratureBoxTooSmall(format!(
            "sample magnitude {b0:.3e} at the box boundary"
        )));
    }
    let xs: Vec<f64> = (0..f.grid.node_count()).map(|i| f.grid.node(i)[0]).collect();
    let ws: Vec<f64> = (0..f.grid.node_count()).map(|i| f.grid.simpson_weight(i)).collect();
    let jets: Vec<Jet<f64>> = (0..xi_grid.node_count())
        .map(|i| {
            let xi = xi_grid.node(i)[0];
            let mut re = 0.0;
            let mut im = 0.0;
            for ((&x, &w), &v) in xs.iter().zip(&ws).zip(&vals) {
                let phase = -2.0 * std::f64::consts::PI * x * xi;
                re += w * v * phase.cos();
                im += w * v * phase.sin();
            }
            Jet::constant(vec![xi], vec![re, im], 0)
        })
        .collect();
    Ok(SampledFunction::from_jets(xi_grid.clone(), 0, jets))
}

/// Max pointwise discrepancy between the joint 2-D transform of f and the
/// iterated one (transform in x1, then in x2) on the given xi grid.
pub fn factorization_check(
    f: &SampledFunction,
    xi_grid: &GridSpec,
) -> Result<f64, NormError> {
    if f.grid.dim() != 2 || xi_grid.dim() != 2 {
        return Err(NormError::UnsupportedIndices("factorization check is 2-D".into()));
    }
    let g = &f.grid;
    let (gx, gy) = g.split(1);
    let vals: Vec<f64> = f.jets.iter().map(|j| j.value()[0]).collect();
    let max_abs = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bmax = (0..g.node_count())
        .filter(|&i| g.is_boundary(i))
        .map(|i| vals[i].abs())
        .fold(0.0, f64::max);
    if bmax > 1e-8 * max_abs.max(1e-300) && bmax > 1e-300 {
        return Err(NormError::QuadratureBoxTooSmall(format!(
            "sample magnitude {bmax:.3e} at the box boundary"
        )));
    }
    let tau = -2.0 * std::f64::consts::PI;
    let mut worst = 0.0f64;
    for oi in 0..xi_grid.axes[0].points {
        let xi1 = xi_grid.coordinate(0, oi);
        // inner transform in x1 at each x2 node
        let mut a_re = vec![0.0; gy.node_count()];
        let mut a_im = vec![0.0; gy.node_count()];
        for i in 0..gx.node_count() {
            let x = gx.node(i)[0];
            let w = gx.simpson_weight(i);
            let ph = tau * x * xi1;
            let (c, s) = (ph.cos(), ph.sin());
            for j in 0..gy.node_count() {
                let v = vals[g.flatten(&[i, j])];
                a_re[j] += w * v * c;
                a_im[j] += w * v * s;
            }
        }
        for oj in 0..xi_grid.axes[1].points {
            let xi2 = xi_grid.coordinate(1, oj);
            // outer transform in x2
            let mut it_re = 0.0;
            let mut it_im = 0.0;
            // joint transform, accumulated in the same pass
            let mut j_re = 0.0;
            let mut j_im = 0.0;
            for j in 0..gy.node_count() {
                let y = gy.node(j)[0];
                let w = gy.simpson_weight(j);
                let ph = tau * y * xi2;
                let (c, s) = (ph.cos(), ph.sin());
                it_re += w * (a_re[j] * c - a_im[j] * s);
                it_im += w * (a_re[j] * s + a_im[j] * c);
                for i in 0..gx.node_count() {
                    let x = gx.node(i)[0];
                    let wx = gx.simpson_weight(i);
                    let php = tau * (x * xi1 + y * xi2);
                    let v = vals[g.flatten(&[i, j])];
                    j_re += w * wx * v * php.cos();
                    j_im += w * wx * v * php.sin();
                }
            }
            worst = worst.max(((it_re - j_re).powi(2) + (it_im - j_im).powi(2)).sqrt());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdsl::parse;
    use crate::grid::{Axis, GridSpec};
    use approx::assert_relative_eq;

    fn sample_1d(src: &str, half: f64, points: usize, order: usize) -> SampledFunction {
        let e = parse(src, 1).unwrap();
        SampledFunction::sample(&e, &GridSpec::symmetric_1d(half, points).unwrap(), order)
            .unwrap()
    }

    #[test]
    fn opnorm_collapses_in_one_dimension() {
        let f = sample_1d("exp(-x1^2)", 6.0, 61, 4);
        let dirs = unit_directions(1, 4);
        for jet in &f.jets {
            for k in 0..=4 {
                let b = opnorm_bracket(jet, k, &dirs).unwrap();
                assert_relative_eq!(b.lower, b.upper, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn opnorm_xy_example() {
        // f(x,y) = xy at 0: upper = 2, lower >= 1 from the diagonal
        let e = parse("x1*x2", 2).unwrap();
        let j = crate::funcdsl::eval_jet::<f64>(&e, &[0.0, 0.0], 2).unwrap();
        let dirs = unit_directions(2, 64);
        let b = opnorm_bracket(&j, 2, &dirs).unwrap();
        assert_relative_eq!(b.upper, 2.0, max_relative = 1e-12);
        assert!(b.lower >= 1.0 - 1e-12);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn b_family_sin_derivatives() {
        let f = sample_1d("sin(x1)", 2.0 * std::f64::consts::PI, 257, 4);
        let spec = ClassSpec::plain(Family::B).unwrap();
        let r = seminorm(&f, &spec, &IndexSet::Orders((0..=4).collect())).unwrap();
        for k in 0..=4 {
            let b = r.entries[&format!("k={k}")];
            assert!(b.upper > 0.99 && b.upper < 1.01, "k={k}: {b:?}");
        }
    }

    #[test]
    fn s_family_gaussian_weighted_sup() {
        let f = sample_1d("exp(-x1^2)", 6.0, 241, 2);
        let spec = ClassSpec::plain(Family::S).unwrap();
        let r = seminorm(&f, &spec, &IndexSet::WeightedOrders(vec![(1, 0)])).unwrap();
        let b = r.entries["k=1,l=0"];
        // max of (1+|x|)exp(-x^2)
        assert!((b.upper - 1.1947).abs() < 1e-3, "{b:?}");
    }

    #[test]
    fn gaussian_l2_closed_form() {
        let f = sample_1d("exp(-x1^2)", 6.0, 241, 0);
        let spec = ClassSpec::lp(2.0).unwrap();
        let r = seminorm(&f, &spec, &IndexSet::Alphas(vec![MultiIndex::zero(1)])).unwrap();
        let got = r.entries["alpha=[0]"].upper;
        let expect = (std::f64::consts::PI / 2.0).powf(0.25);
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn bump_is_compactly_supported_d_member() {
        let f = sample_1d("bump(x1)", 6.0, 241, 3);
        let spec = ClassSpec::plain(Family::D).unwrap();
        let r = seminorm(&f, &spec, &IndexSet::Orders(vec![0])).unwrap();
        let s = r.support.unwrap();
        assert!(s.compact);
        assert!((s.radius.unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn bm_seminorm_monotone_in_rho() {
        let f = sample_1d("exp(-x1^2)", 6.0, 121, 6);
        let m = WeightSequence::gevrey(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for rho in [0.5, 1.0, 2.0, 4.0] {
            let spec = ClassSpec::weighted(Family::BM, m.clone(), rho).unwrap();
            let r = seminorm(&f, &spec, &IndexSet::All).unwrap();
            let sup = r.entries["sup"].upper;
            assert!(sup <= prev + 1e-12);
            prev = sup;
        }
    }

    #[test]
    fn seminorm_positively_homogeneous() {
        let f = sample_1d("exp(-x1^2)", 6.0, 61, 3);
        let g = f.scaled(2.5);
        let spec = ClassSpec::plain(Family::B).unwrap();
        let rf = seminorm(&f, &spec, &IndexSet::Orders(vec![0, 1, 2])).unwrap();
        let rg = seminorm(&g, &spec, &IndexSet::Orders(vec![0, 1, 2])).unwrap();
        for (k, b) in &rf.entries {
            assert_relative_eq!(rg.entries[k].upper, 2.5 * b.upper, max_relative = 1e-12);
        }
    }

    #[test]
    fn type_radius_polynomial_is_beurling_like() {
        let f = sample_1d("x1^2 + 1", 2.0, 41, 12);
        let m = WeightSequence::constant_one();
        let t = type_radius(&f, &m, 12).unwrap();
        assert_eq!(t.classification, TypeClass::BeurlingLike);
        assert!(t.rho_star < 1e-6);
    }

    #[test]
    fn type_radius_exponential_finite() {
        let e = parse("exp(x1)", 1).unwrap();
        let g = GridSpec::new(vec![Axis { a: 0.0, b: 1.0, points: 41 }]).unwrap();
        let f = SampledFunction::sample(&e, &g, 12).unwrap();
        let m = WeightSequence::constant_one();
        let t = type_radius(&f, &m, 12).unwrap();
        assert_eq!(t.classification, TypeClass::RoumieuLike);
        assert!(t.rho_star > 0.0 && t.rho_star.is_finite());
    }

    #[test]
    fn trace_check_gaussian() {
        let e = parse("exp(-x1^2-x2^2)", 2).unwrap();
        let g = GridSpec::new(vec![
            Axis { a: -6.0, b: 6.0, points: 121 },
            Axis { a: -6.0, b: 6.0, points: 121 },
        ])
        .unwrap();
        let f = SampledFunction::sample(&e, &g, 1).unwrap();
        let r = trace_check(&f, 0.0, 2.0).unwrap();
        let expect = (std::f64::consts::PI / 2.0).powf(0.25);
        assert!((r.lhs - expect).abs() < 1e-6);
        assert!(r.ratio < 1.0);
    }

    #[test]
    fn tensor_single_pair_attains_equality() {
        let f = sample_1d("exp(-x1^2)", 6.0, 121, 2);
        let g = sample_1d("exp(-2*x1^2)", 6.0, 121, 2);
        let r = tensor_seminorm(&[(f, g)], 0, 0, 2.0).unwrap();
        assert!(r.majorizes);
        assert_relative_eq!(r.value, r.direct, max_relative = 1e-9);
    }

    #[test]
    fn tensor_two_terms_majorizes() {
        let pairs = vec![
            (
                sample_1d("exp(-x1^2)", 6.0, 121, 2),
                sample_1d("exp(-x1^2)", 6.0, 121, 2),
            ),
            (
                sample_1d("x1*exp(-x1^2)", 6.0, 121, 2),
                sample_1d("exp(-2*x1^2)", 6.0, 121, 2),
            ),
        ];
        let r = tensor_seminorm(&pairs, 0, 0, 2.0).unwrap();
        assert!(r.majorizes);
        assert!(r.value > r.direct);
    }

    #[test]
    fn gaussian_self_transform() {
        // exp(-pi x^2) is its own transform
        let e = parse("exp(-3.14159265358979323846*x1^2)", 1).unwrap();
        let g = GridSpec::symmetric_1d(8.0, 1025).unwrap();
        let f = SampledFunction::sample(&e, &g, 0).unwrap();
        let xi = GridSpec::symmetric_1d(4.0, 81).unwrap();
        let ft = fourier_1d(&f, &xi).unwrap();
        let mut worst = 0.0f64;
        for (i, jet) in ft.jets.iter().enumerate() {
            let x = xi.node(i)[0];
            let expect = (-std::f64::consts::PI * x * x).exp();
            let v = jet.value();
            worst = worst.max((v[0] - expect).abs().max(v[1].abs()));
        }
        assert!(worst <= 1e-6, "worst {worst:.3e}");
    }

    #[test]
    fn real_even_transform_is_real() {
        let f = sample_1d("exp(-x1^2)", 8.0, 513, 0);
        let xi = GridSpec::symmetric_1d(2.0, 41).unwrap();
        let ft = fourier_1d(&f, &xi).unwrap();
        for jet in &ft.jets {
            assert!(jet.value()[1].abs() <= 1e-10);
        }
    }

    #[test]
    fn factorization_2d_gaussian() {
        let e = parse("exp(-x1^2-x2^2)", 2).unwrap();
        let g = GridSpec::new(vec![
            Axis { a: -7.0, b: 7.0, points: 141 },
            Axis { a: -7.0, b: 7.0, points: 141 },
        ])
        .unwrap();
        let f = SampledFunction::sample(&e, &g, 0).unwrap();
        let xi = GridSpec::new(vec![
            Axis { a: -1.0, b: 1.0, points: 9 },
            Axis { a: -1.0, b: 1.0, points: 9 },
        ])
        .unwrap();
        let d = factorization_check(&f, &xi).unwrap();
        assert!(d <= 1e-8, "discrepancy {d:.3e}");
    }
}
