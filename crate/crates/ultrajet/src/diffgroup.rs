//! Near-identity diffeomorphisms Id + f: membership check via the inf-det
//! condition, composition and numerical inversion of the perturbations,
//! the operator-norm inverse bound, and bound-certificate propagation
//! through composition and inversion.

use crate::funcdsl::{eval_jet, EvalError, Expr};
use crate::grid::GridSpec;
use crate::jet::{determinant, invert_matrix, Jet};
use crate::multiindex::{compositions_into, MultiIndex};
use crate::sampled::SampledFunction;
use crate::scalar::ln_factorial;
use crate::weightseq::{check_property, SeqProperty, WeightConfig, WeightSequence};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("not a diffeomorphism: det(I + df) = {det:.6} at node {node:?}")]
    NotADiffeo { node: Vec<f64>, det: f64 },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("no convergence at node {node:?}: residual {residual:.3e}")]
    NoConvergence { node: Vec<f64>, residual: f64 },
    #[error("singular derivative")]
    SingularDerivative,
    #[error("singular matrix")]
    SingularMatrix,
    #[error("k-th root sequence still increasing at horizon {horizon}")]
    DivergentAtHorizon { horizon: usize },
    #[error("incompatible weight sequences")]
    IncompatibleWeightSequences,
    #[error("contraction factor {factor:.4} >= 1 at order {order}")]
    ContractionFailure { factor: f64, order: usize },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

/// The perturbation f of a map Id + f, either a closed-form expression or
/// the composition closure g + f o (Id + g), so it stays evaluable
/// off-grid.
#[derive(Clone, Debug)]
pub enum MapRepr {
    Expr(Expr),
    /// Perturbation of (Id+f) o (Id+g): h(x) = g(x) + f(x + g(x)).
    Composed(Box<MapRepr>, Box<MapRepr>),
}

impl MapRepr {
    /// Jet of the perturbation at `x` to the given order.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<Jet<f64>, DiffError> {
        match self {
            MapRepr::Expr(e) => {
                let j = eval_jet::<f64>(e, x, order)?;
                if j.target_dim() == x.len() {
                    Ok(j)
                } else if j.target_dim() == 1 && x.len() == 1 {
                    Ok(j)
                } else {
                    Err(DiffError::PreconditionFailed(format!(
                        "target dim {} != {}",
                        j.target_dim(),
                        x.len()
                    )))
                }
            }
            MapRepr::Composed(f, g) => {
                let jg = g.jet(x, order)?;
                let inner = Jet::identity(x.to_vec(), order)
                    .add(&jg)
                    .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
                let y: Vec<f64> = inner.value();
                let jf = f.jet(&y, order)?;
                let comp = jf
                    .compose(&inner)
                    .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
                jg.add(&comp)
                    .map_err(|e| DiffError::PreconditionFailed(e.to_string()))
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>, DiffError> {
        Ok(self.jet(x, 0)?.value())
    }
}

#[derive(Clone, Debug)]
pub struct DiffMap {
    pub repr: MapRepr,
    pub report_grid: GridSpec,
    pub inf_det_estimate: f64,
}

impl DiffMap {
    pub fn dim(&self) -> usize {
        self.report_grid.dim()
    }

    /// F(x) = x + f(x).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, DiffError> {
        let f = self.repr.value(x)?;
        Ok(x.iter().zip(&f).map(|(a, b)| a + b).collect())
    }

    /// Jacobian I + df(x).
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, DiffError> {
        let n = x.len();
        let jet = self.repr.jet(x, 1)?;
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for j in 0..n {
            let c = jet.partial(&MultiIndex::unit(n, j));
            for (i, row) in a.iter_mut().enumerate() {
                row[j] += c[i];
            }
        }
        Ok(a)
    }
}

fn inf_det(repr: &MapRepr, grid: &GridSpec) -> Result<f64, DiffError> {
    let n = grid.dim();
    let dets: Vec<(usize, f64)> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let x = grid.node(idx);
            let jet = repr.jet(&x, 1)?;
            let mut a = vec![vec![0.0; n]; n];
            for (i, row) in a.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            for j in 0..n {
                let c = jet.partial(&MultiIndex::unit(n, j));
                for (i, row) in a.iter_mut().enumerate() {
                    row[j] += c[i];
                }
            }
            Ok((idx, determinant(&a)))
        })
        .collect::<Result<_, DiffError>>()?;
    let (worst_idx, min) = dets
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    if min <= 0.0 {
        return Err(DiffError::NotADiffeo { node: grid.node(worst_idx), det: min });
    }
    Ok(min)
}

/// Accept Id + f as a diffeomorphism candidate when det(I + df) stays
/// positive on the report grid.
pub fn make_diffmap(f: Expr, grid: &GridSpec) -> Result<DiffMap, DiffError> {
    let n = grid.dim();
    let target = f.target_dim();
    if target != n || f.min_arity() > n {
        return Err(DiffError::PreconditionFailed(format!(
            "perturbation must map R^{n} to itself (target dim {target})"
        )));
    }
    let repr = MapRepr::Expr(f);
    let inf = inf_det(&repr, grid)?;
    Ok(DiffMap { repr, report_grid: grid.clone(), inf_det_estimate: inf })
}

/// (Id+f) o (Id+g) = Id + h with h(x) = g(x) + f(x + g(x)).
pub fn compose_diff(f: &DiffMap, g: &DiffMap) -> Result<DiffMap, DiffError> {
    if f.dim() != g.dim() {
        return Err(DiffError::PreconditionFailed("dimension mismatch".into()));
    }
    let repr = MapRepr::Composed(Box::new(f.repr.clone()), Box::new(g.repr.clone()));
    let grid = g.report_grid.clone();
    let inf = inf_det(&repr, &grid)?;
    Ok(DiffMap { repr, report_grid: grid, inf_det_estimate: inf })
}

#[derive(Clone, Debug)]
pub struct InversePayload {
    pub grid: GridSpec,
    /// Per node x: the solution g(x) of g(x) = -f(x + g(x)).
    pub g_values: Vec<Vec<f64>>,
    /// Per node: ||F(x + g(x)) - x||.
    pub residuals: Vec<f64>,
    /// Jets of G = F^{-1} at the image points F(node).
    pub g_jets: Vec<Jet<f64>>,
    pub max_residual: f64,
    /// Worst coefficient defect of the jet-level round trip G o F vs Id.
    pub max_roundtrip_defect: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn solve_node(map: &DiffMap, x: &[f64], tol: f64) -> Result<Vec<f64>, DiffError> {
    let n = x.len();
    let f0 = map.repr.value(x)?;
    let mut g: Vec<f64> = f0.iter().map(|v| -v).collect();
    let residual = |g: &[f64]| -> Result<(Vec<f64>, f64), DiffError> {
        let y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
        let fy = map.repr.value(&y)?;
        let r: Vec<f64> = g.iter().zip(&fy).map(|(a, b)| a + b).collect();
        let nr = norm2(&r);
        Ok((r, nr))
    };
    let (_, mut res) = residual(&g)?;
    // damped fixed point g <- g + lambda(-f(x+g) - g)
    let mut lambda = 1.0;
    for _ in 0..60 {
        if res <= tol {
            return Ok(g);
        }
        let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        let fy = map.repr.value(&y)?;
        let cand: Vec<f64> = g
            .iter()
            .zip(&fy)
            .map(|(gi, fi)| gi + lambda * (-fi - gi))
            .collect();
        let (_, cres) = residual(&cand)?;
        if cres < res {
            g = cand;
            res = cres;
            lambda = (lambda * 1.5).min(1.0);
        } else {
            lambda *= 0.5;
            if lambda < 1e-4 {
                break;
            }
        }
    }
    // Newton fallback on H(g) = g + f(x+g), H'(g) = I + df(x+g)
    for _ in 0..40 {
        if res <= tol {
            return Ok(g);
        }
        let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        let jac = map.jacobian(&y)?;
        let inv = invert_matrix(&jac).ok_or(DiffError::SingularDerivative)?;
        let (r, _) = residual(&g)?;
        for (i, gi) in g.iter_mut().enumerate() {
            let step: f64 = (0..n).map(|j| inv[i][j] * r[j]).sum();
            *gi -= step;
        }
        let (_, nres) = residual(&g)?;
        if !(nres < res) && nres > tol {
            return Err(DiffError::NoConvergence { node: x.to_vec(), residual: nres });
        }
        res = nres;
    }
    if res <= tol {
        Ok(g)
    } else {
        Err(DiffError::NoConvergence { node: x.to_vec(), residual: res })
    }
}

/// Invert Id + f node by node and at jet level: the value solve uses the
/// fixed-point identity g(x) = -f(x + g(x)), the jets come from inverting
/// the local jet of F.
pub fn invert_diff(map: &DiffMap, tol: f64, order: usize) -> Result<InversePayload, DiffError> {
    if map.inf_det_estimate <= 0.0 {
        return Err(DiffError::PreconditionFailed("inf det estimate <= 0".into()));
    }
    let grid = map.report_grid.clone();
    let n = grid.dim();
    let per_node: Vec<(Vec<f64>, f64, Jet<f64>, f64)> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            let x = grid.node(idx);
            let g = solve_node(map, &x, tol)?;
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
            let fy = map.repr.value(&y)?;
            let img: Vec<f64> = y.iter().zip(&fy).map(|(a, b)| a + b).collect();
            let res = norm2(&x.iter().zip(&img).map(|(a, b)| b - a).collect::<Vec<_>>());
            // local jet of F at x, inverted
            let f_jet = map.repr.jet(&x, order)?;
            let cap_f = Jet::identity(x.clone(), order)
                .add(&f_jet)
                .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
            let g_jet = cap_f.invert().map_err(|_| DiffError::SingularDerivative)?;
            // round trip G o F vs Id at jet level
            let round = g_jet
                .compose(&cap_f)
                .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
            let id = Jet::identity(x.clone(), order);
            let mut defect = 0.0f64;
            for alpha in MultiIndex::up_to_degree(n, order) {
                let a = round.coeff(&alpha);
                let b = id.coeff(&alpha);
                for (u, v) in a.iter().zip(&b) {
                    defect = defect.max((u - v).abs());
                }
            }
            Ok((g, res, g_jet, defect))
        })
        .collect::<Result<_, DiffError>>()?;
    let mut payload = InversePayload {
        grid,
        g_values: Vec::new(),
        residuals: Vec::new(),
        g_jets: Vec::new(),
        max_residual: 0.0,
        max_roundtrip_defect: 0.0,
    };
    for (g, res, jet, defect) in per_node {
        payload.max_residual = payload.max_residual.max(res);
        payload.max_roundtrip_defect = payload.max_roundtrip_defect.max(defect);
        payload.g_values.push(g);
        payload.residuals.push(res);
        payload.g_jets.push(jet);
    }
    Ok(payload)
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixBoundReport {
    /// ||A^{-1}|| (spectral norm).
    pub lhs: f64,
    /// |det A|^{-1} ||A||^{n-1}.
    pub rhs: f64,
    pub holds: bool,
}

/// Spectral norm by power iteration on A^T A, deterministic start.
pub fn spectral_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut prev = 0.0;
    for _ in 0..10_000 {
        // w = A^T (A v)
        let av: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i][j] * v[j]).sum()).collect();
        let w: Vec<f64> = (0..n).map(|j| (0..n).map(|i| a[i][j] * av[i]).sum()).collect();
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let est = nw.sqrt();
        v = w.iter().map(|x| x / nw).collect();
        if (est - prev).abs() <= 1e-10 * est.max(1.0) {
            return est;
        }
        prev = est;
    }
    prev
}

/// ||A^{-1}|| <= |det A|^{-1} ||A||^{n-1}.
pub fn matrix_inverse_bound(a: &[Vec<f64>]) -> Result<MatrixBoundReport, DiffError> {
    let n = a.len();
    let det: f64 = determinant(a);
    if det == 0.0 {
        return Err(DiffError::SingularMatrix);
    }
    let inv = invert_matrix(a).ok_or(DiffError::SingularMatrix)?;
    let lhs = spectral_norm(&inv);
    let rhs = spectral_norm(a).powi(n as i32 - 1) / det.abs();
    Ok(MatrixBoundReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCertificate {
    pub c: f64,
    pub rho: f64,
    pub m: WeightSequence,
    pub from_order: usize,
    pub horizon: usize,
}

impl BoundCertificate {
    /// ln of the order-k bound C rho^k k! M_k.
    pub fn ln_bound(&self, k: usize) -> f64 {
        self.c.ln() + k as f64 * self.rho.ln() + ln_factorial(k) + self.m.ln_value(k)
    }
}

/// ln of the per-order derivative sups: sup over nodes of the coefficient
/// upper bracket k! sum |coeff|, for k = 0..=order.
pub fn order_ln_sups(f: &SampledFunction) -> Vec<f64> {
    let k_max = f.order;
    let mut sups = vec![f64::NEG_INFINITY; k_max + 1];
    for jet in &f.jets {
        let mut acc = vec![0.0f64; k_max + 1];
        for (alpha, v) in jet.coeffs() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            acc[alpha.degree()] += norm;
        }
        for (k, s) in acc.iter().enumerate() {
            if *s > 0.0 {
                sups[k] = sups[k].max(ln_factorial(k) + s.ln());
            }
        }
    }
    sups
}

/// Issue a certificate from per-order ln sups: rho from the tail of the
/// k-th root sequence (with 25% headroom), C as the resulting sup, so the
/// invariant holds at the horizon by construction.
pub fn certificate_from_ln_sups(
    ln_sups: &[f64],
    m: &WeightSequence,
    from_order: usize,
    horizon: usize,
) -> Result<BoundCertificate, DiffError> {
    let k_max = horizon.min(ln_sups.len() - 1);
    if from_order > k_max {
        return Err(DiffError::PreconditionFailed("empty order range".into()));
    }
    let roots: Vec<(usize, f64)> = (from_order.max(1)..=k_max)
        .filter(|&k| ln_sups[k].is_finite())
        .map(|k| {
            let ln_root = (ln_sups[k] - ln_factorial(k) - m.ln_value(k)) / k as f64;
            (k, ln_root)
        })
        .collect();
    if roots.is_empty() {
        // identically zero beyond the constant term: any certificate works
        return Ok(BoundCertificate {
            c: 1e-300,
            rho: 1.0,
            m: m.clone(),
            from_order,
            horizon,
        });
    }
    // divergence scan: still strictly increasing over the last quarter
    if roots.len() >= 4 {
        let q = roots.len().div_ceil(4);
        let tail = &roots[roots.len() - q - 1..];
        let increasing = tail.windows(2).all(|w| w[1].1 > w[0].1 + 1e-12);
        let is_max = roots.iter().all(|r| r.1 <= roots[roots.len() - 1].1 + 1e-12);
        if increasing && is_max && tail[tail.len() - 1].1 - tail[0].1 > 0.01 * q as f64 {
            return Err(DiffError::DivergentAtHorizon { horizon });
        }
    }
    let tail_start = roots.len() / 2;
    let ln_rho_star = roots[tail_start..]
        .iter()
        .map(|r| r.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let rho = ln_rho_star.exp() * 1.25;
    let mut c = 0.0f64;
    for &(k, _) in &roots {
        let ln_c = ln_sups[k] - k as f64 * rho.ln() - ln_factorial(k) - m.ln_value(k);
        c = c.max(ln_c.exp());
    }
    if from_order == 0 && ln_sups[0].is_finite() {
        c = c.max((ln_sups[0] - m.ln_value(0)).exp());
    }
    Ok(BoundCertificate { c: c.max(1e-300), rho, m: m.clone(), from_order, horizon })
}

pub fn certificate_estimate(
    f: &SampledFunction,
    m: &WeightSequence,
    from_order: usize,
    horizon: usize,
) -> Result<BoundCertificate, DiffError> {
    certificate_from_ln_sups(&order_ln_sups(f), m, from_order, horizon)
}

/// The order-k composite bound M1 Cf Cg rf rg^k (1 + M1 rf Cg)^(k-1).
pub fn compose_bound_value(m1: f64, cf: f64, cg: f64, rf: f64, rg: f64, k: usize) -> f64 {
    m1 * cf * cg * rf * rg.powi(k as i32) * (1.0 + m1 * rf * cg).powi(k as i32 - 1)
}

#[derive(Clone, Copy, Debug)]
pub enum PropagateMode {
    /// Direct constants from the displayed composite bound.
    Plain,
    /// Tune the factor radii via rho = sqrt(sigma) + sigma to hit a
    /// requested composite radius.
    Beurling { rho_target: f64 },
    /// Geometric variant with ratio (1 + M1 rho_f)/2.
    Roumieu,
}

fn same_weights(a: &WeightSequence, b: &WeightSequence, horizon: usize) -> bool {
    let la = a.ln_values(horizon);
    let lb = b.ln_values(horizon);
    la.iter().zip(&lb).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// Propagate certificates through composition f o g.
pub fn propagate_compose(
    cert_f: &BoundCertificate,
    cert_g: &BoundCertificate,
    mode: PropagateMode,
    cfg: &WeightConfig,
) -> Result<BoundCertificate, DiffError> {
    let horizon = cert_f.horizon.min(cert_g.horizon);
    if !same_weights(&cert_f.m, &cert_g.m, horizon) {
        return Err(DiffError::IncompatibleWeightSequences);
    }
    let lc = check_property(&cert_f.m, SeqProperty::LogConvex, horizon.max(2), cfg)
        .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
    if !lc.holds_up_to_k {
        return Err(DiffError::PreconditionFailed("weight sequence is not log-convex".into()));
    }
    let m1 = cert_f.m.value(1);
    let (c, rho) = match mode {
        PropagateMode::Plain => {
            let c = m1 * cert_f.c * cert_g.c * cert_f.rho;
            let rho = cert_g.rho * (1.0 + m1 * cert_f.rho * cert_g.c);
            (c, rho)
        }
        PropagateMode::Beurling { rho_target } => {
            // rho = sqrt(sigma) + sigma, rho_g = sqrt(sigma),
            // rho_f = (Cg M1)^{-1} sqrt(sigma)
            if rho_target <= 0.0 {
                return Err(DiffError::PreconditionFailed("rho_target must be > 0".into()));
            }
            let s = (-1.0 + (1.0 + 4.0 * rho_target).sqrt()) / 2.0; // sqrt(sigma)
            let rho_f = s / (cert_g.c * m1);
            let rho_g = s;
            // a certificate at a smaller radius implies one at a larger
            // radius with the same C, so the tuned radii must dominate
            if cert_f.rho > rho_f || cert_g.rho > rho_g {
                return Err(DiffError::PreconditionFailed(format!(
                    "certificate radii ({:.4}, {:.4}) exceed the tuned radii ({rho_f:.4}, {rho_g:.4})",
                    cert_f.rho, cert_g.rho
                )));
            }
            let c = m1 * cert_f.c * cert_g.c * rho_f;
            let rho = rho_g * (1.0 + m1 * rho_f * cert_g.c);
            (c, rho)
        }
        PropagateMode::Roumieu => {
            let c = m1 * cert_f.c * cert_f.rho / (1.0 + m1 * cert_f.rho);
            let rho = cert_g.rho * (1.0 + m1 * cert_f.rho);
            (c, rho)
        }
    };
    Ok(BoundCertificate { c, rho, m: cert_f.m.clone(), from_order: cert_f.from_order, horizon })
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseBoundTable {
    /// table[k] bounds ||G^(k)|| / (k! M_k) for k = 1..=K (index 0 unused).
    pub table: Vec<f64>,
    pub contraction_factor: f64,
    pub c_fit: f64,
    pub rho_fit: f64,
}

/// Order-by-order upper bounds for the inverse perturbation, from the
/// fixed-point identity differentiated via Faa di Bruno: the order-k term
/// of f o (Id+g) that contains g^(k) is split off and absorbed with a
/// contraction factor, leaving a recursion in the lower orders.
pub fn propagate_inverse(
    cert_f: &BoundCertificate,
    delta: f64,
    dim: usize,
    horizon: usize,
    cfg: &WeightConfig,
) -> Result<InverseBoundTable, DiffError> {
    if delta <= 0.0 {
        return Err(DiffError::PreconditionFailed("delta must be > 0".into()));
    }
    if cert_f.from_order != 1 {
        return Err(DiffError::PreconditionFailed("certificate must start at order 1".into()));
    }
    let lc = check_property(&cert_f.m, SeqProperty::LogConvex, horizon.max(2), cfg)
        .map_err(|e| DiffError::PreconditionFailed(e.to_string()))?;
    if !lc.holds_up_to_k {
        return Err(DiffError::PreconditionFailed("weight sequence is not log-convex".into()));
    }
    let m = &cert_f.m;
    let s1 = cert_f.c * cert_f.rho * m.value(1);
    // ||T|| <= delta^{-1} ||I + df||^{n-1} via the operator-norm bound
    let t = (1.0 + s1).powi(dim as i32 - 1) / delta;
    let c_factor = t * s1;
    if c_factor >= 1.0 {
        return Err(DiffError::ContractionFailure { factor: c_factor, order: 1 });
    }
    let gain = t / (1.0 - c_factor);
    // a[k] bounds ||g^(k)|| / k!
    let mut a = vec![0.0f64; horizon + 1];
    a[1] = gain * s1;
    for k in 2..=horizon {
        let mut total = 0.0;
        for j in 2..=k {
            let coeff = cert_f.c * cert_f.rho.powi(j as i32) * m.value(j);
            let mut comp_sum = 0.0;
            for comp in compositions_into(k, j) {
                let mut prod = 1.0;
                for &ai in &comp {
                    prod *= if ai == 1 { 1.0 + a[1] } else { a[ai] };
                }
                comp_sum += prod;
            }
            total += coeff * comp_sum;
        }
        a[k] = gain * total;
        if !a[k].is_finite() {
            return Err(DiffError::ContractionFailure { factor: a[k], order: k });
        }
    }
    // table entry 1 covers G' = I + g'
    let mut table = vec![0.0f64; horizon + 1];
    table[1] = (1.0 + a[1]) / m.value(1);
    for k in 2..=horizon {
        table[k] = a[k] / m.value(k);
    }
    let ln_rho_fit = (1..=horizon)
        .filter(|&k| table[k] > 0.0)
        .map(|k| table[k].ln() / k as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let rho_fit = if ln_rho_fit.is_finite() { ln_rho_fit.exp() } else { 1.0 };
    let c_fit = (1..=horizon)
        .map(|k| table[k] / rho_fit.powi(k as i32))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    Ok(InverseBoundTable { table, contraction_factor: c_factor, c_fit, rho_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdsl::parse;
    use crate::scalar::factorial_f64;
    use approx::assert_relative_eq;

    fn grid_1d() -> GridSpec {
        GridSpec::symmetric_1d(6.0, 121).unwrap()
    }

    #[test]
    fn identity_map_inf_det_one() {
        let f = parse("0", 1).unwrap();
        let map = make_diffmap(f, &grid_1d()).unwrap();
        assert_relative_eq!(map.inf_det_estimate, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn reflection_rejected() {
        let f = parse("-2*x1", 1).unwrap();
        assert!(matches!(
            make_diffmap(f, &grid_1d()),
            Err(DiffError::NotADiffeo { det, .. }) if (det + 1.0).abs() < 1e-9
        ));
    }

    #[test]
    fn compose_matches_pointwise() {
        let f = make_diffmap(parse("0.1*x1*exp(-x1^2)", 1).unwrap(), &grid_1d()).unwrap();
        let g = make_diffmap(parse("0.1*x1*exp(-x1^2)", 1).unwrap(), &grid_1d()).unwrap();
        let h = compose_diff(&f, &g).unwrap();
        for (_, x) in h.report_grid.nodes() {
            let gx = g.apply(&x).unwrap();
            let fgx = f.apply(&gx).unwrap();
            let hx = h.apply(&x).unwrap();
            assert!((hx[0] - fgx[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn invert_bump_perturbation() {
        let map = make_diffmap(parse("0.4*x1*exp(-x1^2)", 1).unwrap(), &grid_1d()).unwrap();
        let inv = invert_diff(&map, 1e-12, 6).unwrap();
        assert!(inv.max_residual <= 1e-10, "residual {}", inv.max_residual);
        assert!(inv.max_roundtrip_defect <= 1e-8, "defect {}", inv.max_roundtrip_defect);
        // g decays with f
        for (idx, x) in map.report_grid.nodes() {
            if x[0].abs() >= 5.0 {
                assert!(inv.g_values[idx][0].abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn invert_linear_closed_form() {
        // F(x) = 2x as Id + x
        let grid = GridSpec::symmetric_1d(2.0, 21).unwrap();
        let map = make_diffmap(parse("x1", 1).unwrap(), &grid).unwrap();
        let inv = invert_diff(&map, 1e-13, 3).unwrap();
        for (idx, x) in grid.nodes() {
            // g(x) solves g = -(x+g), so g = -x/2 and G(y) = y/2
            assert!((inv.g_values[idx][0] + x[0] / 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn det_chain_rule_identity() {
        let e = parse("[0.2*x1*exp(-x1^2-x2^2), 0.1*sin(x1)*exp(-x2^2)]", 2).unwrap();
        let grid = GridSpec::new(vec![
            crate::grid::Axis { a: -3.0, b: 3.0, points: 13 },
            crate::grid::Axis { a: -3.0, b: 3.0, points: 13 },
        ])
        .unwrap();
        let map = make_diffmap(e, &grid).unwrap();
        let inv = invert_diff(&map, 1e-12, 3).unwrap();
        for (idx, x) in grid.nodes() {
            let df = map.jacobian(&x).unwrap();
            let g_jet = &inv.g_jets[idx];
            let n = 2;
            let mut dg = vec![vec![0.0; n]; n];
            for j in 0..n {
                let c = g_jet.partial(&MultiIndex::unit(n, j));
                for (i, row) in dg.iter_mut().enumerate() {
                    row[j] = c[i];
                }
            }
            let prod: f64 = determinant(&dg) * determinant(&df);
            assert!((prod - 1.0).abs() <= 1e-9, "node {x:?}: {prod}");
        }
    }

    #[test]
    fn lem_la_diagonal_cases() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = matrix_inverse_bound(&id).unwrap();
        assert!(r.holds);
        assert_relative_eq!(r.lhs, 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.rhs, 1.0, max_relative = 1e-9);

        let two = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let r2 = matrix_inverse_bound(&two).unwrap();
        assert_relative_eq!(r2.lhs, 0.5, max_relative = 1e-9);
        assert_relative_eq!(r2.rhs, 0.5, max_relative = 1e-9);

        let d = vec![vec![1.0, 0.0], vec![0.0, 4.0]];
        let r3 = matrix_inverse_bound(&d).unwrap();
        assert_relative_eq!(r3.lhs, 1.0, max_relative = 1e-9);
        assert_relative_eq!(r3.rhs, 1.0, max_relative = 1e-9);
        assert!(r3.holds);
    }

    #[test]
    fn certificate_gaussian() {
        let e = parse("exp(-x1^2)", 1).unwrap();
        let f = SampledFunction::sample(&e, &GridSpec::symmetric_1d(4.0, 81).unwrap(), 12)
            .unwrap();
        let m = WeightSequence::constant_one();
        let cert = certificate_estimate(&f, &m, 0, 12).unwrap();
        assert!(cert.c > 0.0 && cert.rho > 0.0);
        // the invariant holds at every order by construction
        let sups = order_ln_sups(&f);
        for (k, &s) in sups.iter().enumerate() {
            if s.is_finite() {
                assert!(s <= cert.ln_bound(k) + 1e-9, "order {k}");
            }
        }
    }

    #[test]
    fn certificate_rejects_nonmoderate_surrogate() {
        // h_k = k! 2^(k^2) against gevrey(1): k-th roots 2^k keep rising
        let ln_sups: Vec<f64> = (0..=16)
            .map(|k| ln_factorial(k) + (k * k) as f64 * 2f64.ln())
            .collect();
        let m = WeightSequence::gevrey(1.0).unwrap();
        assert!(matches!(
            certificate_from_ln_sups(&ln_sups, &m, 1, 16),
            Err(DiffError::DivergentAtHorizon { .. })
        ));
    }

    #[test]
    fn compose_bound_reference_values() {
        assert_relative_eq!(compose_bound_value(1.0, 1.0, 1.0, 1.0, 1.0, 3), 4.0);
        assert_relative_eq!(compose_bound_value(2.0, 1.0, 1.0, 1.0, 1.0, 2), 6.0);
        // k = 1: no growth factor
        assert_relative_eq!(compose_bound_value(2.0, 3.0, 1.0, 1.0, 5.0, 1), 30.0);
    }

    #[test]
    fn propagate_compose_majorizes_measured() {
        let grid = grid_1d();
        let m = WeightSequence::constant_one();
        let ef = parse("0.1*sin(x1)", 1).unwrap();
        let eg = parse("0.1*x1*exp(-x1^2)", 1).unwrap();
        let order = 8;
        let sf = SampledFunction::sample(&ef, &grid, order).unwrap();
        let sg = SampledFunction::sample(&eg, &grid, order).unwrap();
        let cf = certificate_estimate(&sf, &m, 0, order).unwrap();
        let cg = certificate_estimate(&sg, &m, 0, order).unwrap();
        let ch = propagate_compose(&cf, &cg, PropagateMode::Plain, &WeightConfig::default())
            .unwrap();
        // measured composite as h = g + f o (Id + g) minus Id? no: plain
        // function composition f o g here, sampled directly
        let fmap = make_diffmap(parse("0.1*sin(x1)", 1).unwrap(), &grid).unwrap();
        let gmap = make_diffmap(parse("0.1*x1*exp(-x1^2)", 1).unwrap(), &grid).unwrap();
        let hmap = compose_diff(&fmap, &gmap).unwrap();
        for (idx, _) in grid.nodes() {
            let x = grid.node(idx);
            let jet = hmap.repr.jet(&x, order).unwrap();
            for k in 1..=order {
                let s: f64 = jet
                    .coeffs()
                    .iter()
                    .filter(|(al, _)| al.degree() == k)
                    .map(|(_, v)| v[0].abs())
                    .sum::<f64>()
                    * factorial_f64(k);
                // composite perturbation h = g + f o (Id+g): bound by the
                // g-certificate plus the propagated f o G bound with G's
                // certificate shifted by the identity
                let gid = BoundCertificate {
                    c: cg.c + 1.0,
                    rho: cg.rho.max(1.0),
                    m: m.clone(),
                    from_order: 0,
                    horizon: order,
                };
                let cfg2 =
                    propagate_compose(&cf, &gid, PropagateMode::Plain, &WeightConfig::default())
                        .unwrap();
                let bound = cg.ln_bound(k).exp() + cfg2.ln_bound(k).exp();
                assert!(s <= bound * (1.0 + 1e-9), "k={k}: {s} > {bound}");
            }
        }
        assert!(ch.c > 0.0);
    }

    #[test]
    fn propagate_inverse_majorizes_catalan() {
        // F(x) = x + x^2 near 0; G coefficients are signed Catalan numbers
        let m = WeightSequence::constant_one();
        let cert = BoundCertificate { c: 0.19, rho: 2.3, m: m.clone(), from_order: 1, horizon: 8 };
        // check the certificate against f = x^2 on |x| <= 0.1
        // (|f'| <= 0.2 <= 0.19*2.3, |f''|/2 = 1 <= 0.19*2.3^2)
        assert!(0.2 <= cert.ln_bound(1).exp());
        assert!(2.0 <= cert.ln_bound(2).exp());
        let table = propagate_inverse(&cert, 0.8, 1, 8, &WeightConfig::default()).unwrap();
        // Catalan numbers C_0.. = 1,1,2,5,14,...: |G^(k)(0)|/k! = C_{k-1}
        let catalan = [1.0, 1.0, 2.0, 5.0, 14.0, 42.0, 132.0, 429.0];
        for k in 2..=8usize {
            assert!(table.table[k] >= catalan[k - 1], "k={k}");
        }
    }

    #[test]
    fn propagate_inverse_identity_and_blowup() {
        let m = WeightSequence::constant_one();
        let tiny = BoundCertificate { c: 1e-12, rho: 1.0, m: m.clone(), from_order: 1, horizon: 6 };
        let t = propagate_inverse(&tiny, 1.0, 1, 6, &WeightConfig::default()).unwrap();
        assert!((t.table[1] - 1.0).abs() <= 1e-9);
        for k in 2..=6 {
            assert!(t.table[k] <= 1e-9);
        }
        let cert = BoundCertificate { c: 1.0, rho: 1.0, m, from_order: 1, horizon: 6 };
        assert!(matches!(
            propagate_inverse(&cert, 1e-6, 1, 6, &WeightConfig::default()),
            Err(DiffError::ContractionFailure { .. })
        ));
    }
}
