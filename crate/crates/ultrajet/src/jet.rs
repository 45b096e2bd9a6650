//! Truncated multivariate Taylor expansions (jets) and their algebra:
//! ring operations, composition, compositional inversion, directional
//! derivatives, and the partition-sum oracle for composition bounds.

use crate::multiindex::{all_compositions, MultiIndex};
use crate::scalar::Scalar;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum JetError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("order mismatch: {0}")]
    OrderMismatch(String),
    #[error("base point mismatch: inner value {got:?} differs from outer base point component {expected:?}")]
    BasePointMismatch { got: f64, expected: f64 },
    #[error("singular derivative: linear part is not invertible")]
    SingularDerivative,
    #[error("partition sum horizon exceeded: k = {0} > 12")]
    HorizonExceeded(usize),
    #[error("division by a jet with zero value")]
    DivisionByZero,
}

/// Truncated Taylor expansion of a map R^n -> R^m at a point.
///
/// `coeffs` stores the Taylor coefficients d^a f(x0)/a! for |a| <= order;
/// missing indices are zero. The order-0 coefficient is the value at the
/// base point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S: Scalar> {
    base_point: Vec<S>,
    source_dim: usize,
    target_dim: usize,
    order: usize,
    coeffs: BTreeMap<MultiIndex, Vec<S>>,
}

impl<S: Scalar> Jet<S> {
    pub fn new(base_point: Vec<S>, target_dim: usize, order: usize) -> Self {
        let source_dim = base_point.len();
        Jet {
            base_point,
            source_dim,
            target_dim,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    /// Constant jet with the given value.
    pub fn constant(base_point: Vec<S>, value: Vec<S>, order: usize) -> Self {
        let mut j = Jet::new(base_point, value.len(), order);
        j.set_coeff(MultiIndex::zero(j.source_dim), value);
        j
    }

    /// Scalar jet of the coordinate function x_i.
    pub fn variable(base_point: Vec<S>, i: usize, order: usize) -> Self {
        let n = base_point.len();
        let value = base_point[i].clone();
        let mut j = Jet::new(base_point, 1, order);
        j.set_coeff(MultiIndex::zero(n), vec![value]);
        if order >= 1 {
            j.set_coeff(MultiIndex::unit(n, i), vec![S::one()]);
        }
        j
    }

    /// Identity jet R^n -> R^n.
    pub fn identity(base_point: Vec<S>, order: usize) -> Self {
        let n = base_point.len();
        let mut j = Jet::new(base_point.clone(), n, order);
        j.set_coeff(MultiIndex::zero(n), base_point);
        if order >= 1 {
            for i in 0..n {
                let mut v = vec![S::zero(); n];
                v[i] = S::one();
                j.set_coeff(MultiIndex::unit(n, i), v);
            }
        }
        j
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }
    pub fn target_dim(&self) -> usize {
        self.target_dim
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn base_point(&self) -> &[S] {
        &self.base_point
    }
    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Vec<S>> {
        &self.coeffs
    }

    /// Taylor coefficient d^a f/a! (zero vector if absent).
    pub fn coeff(&self, alpha: &MultiIndex) -> Vec<S> {
        self.coeffs
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| vec![S::zero(); self.target_dim])
    }

    /// Partial derivative d^a f(x0) = a! * coeff.
    pub fn partial(&self, alpha: &MultiIndex) -> Vec<S> {
        let fac = S::from_i64(alpha.factorial() as i64);
        self.coeff(alpha)
            .into_iter()
            .map(|c| c * fac.clone())
            .collect()
    }

    pub fn value(&self) -> Vec<S> {
        self.coeff(&MultiIndex::zero(self.source_dim))
    }

    pub fn set_coeff(&mut self, alpha: MultiIndex, value: Vec<S>) {
        debug_assert_eq!(alpha.len(), self.source_dim);
        debug_assert_eq!(value.len(), self.target_dim);
        debug_assert!(alpha.degree() <= self.order);
        if value.iter().all(|v| v.is_zero()) {
            self.coeffs.remove(&alpha);
        } else {
            self.coeffs.insert(alpha, value);
        }
    }

    /// Component i as a scalar jet.
    pub fn component(&self, i: usize) -> Jet<S> {
        let mut j = Jet::new(self.base_point.clone(), 1, self.order);
        for (alpha, v) in &self.coeffs {
            j.set_coeff(alpha.clone(), vec![v[i].clone()]);
        }
        j
    }

    /// Assemble a vector-valued jet from scalar components.
    pub fn from_components(parts: &[Jet<S>]) -> Result<Jet<S>, JetError> {
        let first = &parts[0];
        let m = parts.len();
        let mut out = Jet::new(first.base_point.clone(), m, first.order);
        let mut keys: Vec<MultiIndex> = Vec::new();
        for p in parts {
            if p.source_dim != first.source_dim || p.order != first.order {
                return Err(JetError::DimensionMismatch(
                    "components must share base point and order".into(),
                ));
            }
            if p.target_dim != 1 {
                return Err(JetError::DimensionMismatch(
                    "components must be scalar-valued".into(),
                ));
            }
            keys.extend(p.coeffs.keys().cloned());
        }
        keys.sort();
        keys.dedup();
        for alpha in keys {
            let v: Vec<S> = parts.iter().map(|p| p.coeff(&alpha)[0].clone()).collect();
            out.set_coeff(alpha, v);
        }
        Ok(out)
    }

    fn check_compatible(&self, other: &Jet<S>) -> Result<(), JetError> {
        if self.source_dim != other.source_dim || self.base_point != other.base_point {
            return Err(JetError::DimensionMismatch(
                "jets must share source dimension and base point".into(),
            ));
        }
        if self.order != other.order {
            return Err(JetError::OrderMismatch(format!(
                "orders {} and {}",
                self.order, other.order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet<S>) -> Result<Jet<S>, JetError> {
        self.check_compatible(other)?;
        if self.target_dim != other.target_dim {
            return Err(JetError::DimensionMismatch("target dims differ".into()));
        }
        let mut out = Jet::new(self.base_point.clone(), self.target_dim, self.order);
        let mut keys: Vec<_> = self.coeffs.keys().chain(other.coeffs.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        for alpha in keys {
            let a = self.coeff(&alpha);
            let b = other.coeff(&alpha);
            let v: Vec<S> = a.into_iter().zip(b).map(|(x, y)| x + y).collect();
            out.set_coeff(alpha, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Jet<S>) -> Result<Jet<S>, JetError> {
        self.add(&other.scale(&(-S::one())))
    }

    pub fn scale(&self, lambda: &S) -> Jet<S> {
        let mut out = Jet::new(self.base_point.clone(), self.target_dim, self.order);
        for (alpha, v) in &self.coeffs {
            out.set_coeff(
                alpha.clone(),
                v.iter().map(|x| x.clone() * lambda.clone()).collect(),
            );
        }
        out
    }

    /// Truncated product of scalar-valued jets.
    pub fn mul(&self, other: &Jet<S>) -> Result<Jet<S>, JetError> {
        self.check_compatible(other)?;
        if self.target_dim != 1 || other.target_dim != 1 {
            return Err(JetError::DimensionMismatch(
                "mul requires scalar-valued jets".into(),
            ));
        }
        let mut out = Jet::new(self.base_point.clone(), 1, self.order);
        let mut acc: BTreeMap<MultiIndex, S> = BTreeMap::new();
        for (a, va) in &self.coeffs {
            for (b, vb) in &other.coeffs {
                if a.degree() + b.degree() > self.order {
                    continue;
                }
                let sum = MultiIndex(
                    a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
                );
                let term = va[0].clone() * vb[0].clone();
                acc.entry(sum)
                    .and_modify(|e| *e = e.clone() + term.clone())
                    .or_insert(term);
            }
        }
        for (alpha, v) in acc {
            out.set_coeff(alpha, vec![v]);
        }
        Ok(out)
    }

    /// Truncated reciprocal of a scalar jet with nonzero value.
    pub fn recip(&self) -> Result<Jet<S>, JetError> {
        if self.target_dim != 1 {
            return Err(JetError::DimensionMismatch("recip requires scalar jet".into()));
        }
        let v0 = self.value()[0].clone();
        let inv0 = v0.recip().ok_or(JetError::DivisionByZero)?;
        // 1/(v0 + d) = (1/v0) sum_j (-d/v0)^j, d = self - v0
        let mut delta = self.clone();
        delta.set_coeff(MultiIndex::zero(self.source_dim), vec![S::zero()]);
        let neg_scaled = delta.scale(&(-inv0.clone()));
        let mut acc = Jet::constant(self.base_point.clone(), vec![S::one()], self.order);
        let mut pow = Jet::constant(self.base_point.clone(), vec![S::one()], self.order);
        for _ in 1..=self.order {
            pow = pow.mul(&neg_scaled)?;
            acc = acc.add(&pow)?;
        }
        Ok(acc.scale(&inv0))
    }

    /// a^j truncated, j >= 0, scalar jets.
    pub fn powi(&self, j: u32) -> Result<Jet<S>, JetError> {
        let mut acc = Jet::constant(self.base_point.clone(), vec![S::one()], self.order);
        for _ in 0..j {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Directional derivative d_v^k f(x0) = sum_{|a|=k} (k!/a!) d^a f v^a.
    pub fn directional_derivative(&self, v: &[f64], k: usize) -> Result<Vec<f64>, JetError>
    where
        S: Scalar,
    {
        if k > self.order {
            return Err(JetError::OrderMismatch(format!(
                "requested order {} exceeds jet order {}",
                k, self.order
            )));
        }
        if v.len() != self.source_dim {
            return Err(JetError::DimensionMismatch("direction dimension".into()));
        }
        let kfac = crate::scalar::factorial_f64(k);
        let mut out = vec![0.0; self.target_dim];
        for (alpha, c) in &self.coeffs {
            if alpha.degree() != k {
                continue;
            }
            // (k!/a!) d^a f = k! * coeff
            let w = kfac * alpha.monomial(v);
            for (o, ci) in out.iter_mut().zip(c) {
                *o += w * ci.to_f64();
            }
        }
        Ok(out)
    }

    /// Compose `self` (at y0) with `g` (at x0, g(x0) = y0): jet of self o g at x0.
    pub fn compose(&self, g: &Jet<S>) -> Result<Jet<S>, JetError> {
        if g.target_dim != self.source_dim {
            return Err(JetError::DimensionMismatch(format!(
                "inner target dim {} != outer source dim {}",
                g.target_dim, self.source_dim
            )));
        }
        let order = self.order.min(g.order);
        let gval = g.value();
        for (got, expected) in gval.iter().zip(&self.base_point) {
            if S::EXACT {
                if got != expected {
                    return Err(JetError::BasePointMismatch {
                        got: got.to_f64(),
                        expected: expected.to_f64(),
                    });
                }
            } else if (got.to_f64() - expected.to_f64()).abs() > 1e-12 {
                return Err(JetError::BasePointMismatch {
                    got: got.to_f64(),
                    expected: expected.to_f64(),
                });
            }
        }
        // h_i = g_i - y0_i, constant term dropped; substitute into the outer series
        let mut shifted: Vec<Jet<S>> = Vec::with_capacity(self.source_dim);
        for i in 0..self.source_dim {
            let mut h = g.component(i).truncated(order);
            h.set_coeff(MultiIndex::zero(g.source_dim), vec![S::zero()]);
            shifted.push(h);
        }
        let mut out_components: Vec<Jet<S>> = (0..self.target_dim)
            .map(|_| Jet::new(g.base_point.clone(), 1, order))
            .collect();
        for (beta, fc) in &self.coeffs {
            if beta.degree() > order {
                continue;
            }
            // monomial (g - y0)^beta, truncated
            let mut mono = Jet::constant(g.base_point.clone(), vec![S::one()], order);
            for (i, &b) in beta.0.iter().enumerate() {
                if b > 0 {
                    mono = mono.mul(&shifted[i].powi(b)?)?;
                }
            }
            for (i, comp) in out_components.iter_mut().enumerate() {
                if !fc[i].is_zero() {
                    *comp = comp.add(&mono.scale(&fc[i]))?;
                }
            }
        }
        Jet::from_components(&out_components)
    }

    /// Copy truncated to a (lower or equal) order.
    pub fn truncated(&self, order: usize) -> Jet<S> {
        let mut out = Jet::new(self.base_point.clone(), self.target_dim, order);
        for (alpha, v) in &self.coeffs {
            if alpha.degree() <= order {
                out.set_coeff(alpha.clone(), v.clone());
            }
        }
        out
    }

    /// Jet of the inverse map at F(x0), for F: R^n -> R^n with invertible dF(x0).
    ///
    /// Solves G = T + phi o G with phi = Id - T o F, where T is the affine
    /// linearization inverse; phi has vanishing value and derivative at x0,
    /// so each iteration determines one more order.
    pub fn invert(&self) -> Result<Jet<S>, JetError> {
        let n = self.source_dim;
        if self.target_dim != n {
            return Err(JetError::DimensionMismatch(
                "inversion requires source dim = target dim".into(),
            ));
        }
        let order = self.order;
        let y0 = self.value();
        // linear part A[i][j] = d_j F_i
        let mut a = vec![vec![S::zero(); n]; n];
        for j in 0..n {
            let c = self.coeff(&MultiIndex::unit(n, j));
            for i in 0..n {
                a[i][j] = c[i].clone();
            }
        }
        let ainv = invert_matrix(&a).ok_or(JetError::SingularDerivative)?;

        // Work with centered jets: Fh(u) = F(x0+u) - y0 as series in u, Fh(0)=0.
        let mut fh = self.clone();
        fh.base_point = vec![S::zero(); n];
        fh.set_coeff(MultiIndex::zero(n), vec![S::zero(); n]);

        // phi_h(u) = u - Ainv * Fh(u): order >= 2 terms only.
        let id = Jet::identity(vec![S::zero(); n], order);
        let tf = apply_matrix(&ainv, &fh)?;
        let phi = id.sub(&tf)?;

        // G_h(v) = Ainv v + phi_h(G_h(v)); iterate to fixed point.
        let t_jet = {
            let mut j = Jet::new(vec![S::zero(); n], n, order);
            if order >= 1 {
                for col in 0..n {
                    let v: Vec<S> = (0..n).map(|row| ainv[row][col].clone()).collect();
                    j.set_coeff(MultiIndex::unit(n, col), v);
                }
            }
            j
        };
        let mut g = t_jet.clone();
        for _ in 2..=order {
            g = t_jet.add(&phi.compose(&g)?)?;
        }
        // Recenter: G at y0 with G(y0) = x0.
        let mut out = g;
        out.base_point = y0;
        let x0 = self.base_point.clone();
        out.set_coeff(MultiIndex::zero(n), x0);
        Ok(out)
    }
}

/// Dense n x n inversion by Gauss-Jordan with magnitude pivoting.
pub fn invert_matrix<S: Scalar>(a: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut inv: Vec<Vec<S>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { S::one() } else { S::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs_f64()
                .partial_cmp(&m[j][col].abs_f64())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].is_zero() {
            return None;
        }
        if !S::EXACT && m[pivot][col].abs_f64() < 1e-10 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col].clone().recip()?;
        for j in 0..n {
            m[col][j] = m[col][j].clone() * p.clone();
            inv[col][j] = inv[col][j].clone() * p.clone();
        }
        for i in 0..n {
            if i == col || m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].clone();
            for j in 0..n {
                m[i][j] = m[i][j].clone() - f.clone() * m[col][j].clone();
                inv[i][j] = inv[i][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

/// Matrix determinant over a scalar field (fraction-free for small n via LU).
pub fn determinant<S: Scalar>(a: &[Vec<S>]) -> S {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = S::one();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs_f64()
                .partial_cmp(&m[j][col].abs_f64())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let pivot = match pivot {
            Some(p) => p,
            None => return S::zero(),
        };
        if m[pivot][col].is_zero() {
            return S::zero();
        }
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        det = det * m[col][col].clone();
        let inv = m[col][col].clone().recip().unwrap();
        for i in col + 1..n {
            let f = m[i][col].clone() * inv.clone();
            for j in col..n {
                m[i][j] = m[i][j].clone() - f.clone() * m[col][j].clone();
            }
        }
    }
    det
}

/// Apply a constant matrix to a vector-valued jet.
fn apply_matrix<S: Scalar>(mat: &[Vec<S>], jet: &Jet<S>) -> Result<Jet<S>, JetError> {
    let n = mat.len();
    let comps: Vec<Jet<S>> = (0..n)
        .map(|i| {
            let mut acc = Jet::new(jet.base_point().to_vec(), 1, jet.order());
            for (j, row) in mat[i].iter().enumerate() {
                if !row.is_zero() {
                    acc = acc.add(&jet.component(j).scale(row)).unwrap();
                }
            }
            acc
        })
        .collect();
    Jet::from_components(&comps)
}

/// Right-hand side of the composition formula for derivative magnitudes:
/// sum over j >= 1 and compositions a of k into j positive parts of
/// f[j]/j! * prod_i g[a_i]/a_i!.
///
/// `f_derivs[j]` and `g_derivs[i]` are indexed by derivative order.
pub fn fdb_partition_sum<S: Scalar>(
    f_derivs: &[S],
    g_derivs: &[S],
    k: usize,
) -> Result<S, JetError> {
    if k > 12 {
        return Err(JetError::HorizonExceeded(k));
    }
    if k == 0 {
        return Ok(S::zero());
    }
    let mut total = S::zero();
    for comp in all_compositions(k) {
        let j = comp.len();
        if j >= f_derivs.len() {
            continue;
        }
        let jfac = S::from_i64(crate::scalar::factorial_f64(j) as i64);
        let mut term = f_derivs[j].clone() * jfac.recip().unwrap();
        for &ai in &comp {
            if ai >= g_derivs.len() {
                term = S::zero();
                break;
            }
            let afac = S::from_i64(crate::scalar::factorial_f64(ai) as i64);
            term = term * g_derivs[ai].clone() * afac.recip().unwrap();
        }
        total = total + term;
    }
    Ok(total)
}

/// Serialize a float jet into the interchange form
/// `{base_point, n, m, K, coeffs: [[alpha...], [values...]]...}` with
/// coefficients in graded-lex order.
pub fn jet_to_json(jet: &Jet<f64>) -> serde_json::Value {
    let coeffs: Vec<serde_json::Value> = jet
        .coeffs()
        .iter()
        .map(|(alpha, v)| {
            serde_json::json!([alpha.0, v])
        })
        .collect();
    serde_json::json!({
        "base_point": jet.base_point(),
        "n": jet.source_dim(),
        "m": jet.target_dim(),
        "K": jet.order(),
        "coeffs": coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    fn rat(n: i64, d: i64) -> Rat {
        <Rat as Scalar>::from_ratio(n, d)
    }

    fn poly1(base: Rat, coeffs: &[(i64, i64)], order: usize) -> Jet<Rat> {
        // 1-D scalar jet with given Taylor coefficients
        let mut j = Jet::new(vec![base], 1, order);
        for (k, &(n, d)) in coeffs.iter().enumerate() {
            j.set_coeff(MultiIndex(vec![k as u32]), vec![rat(n, d)]);
        }
        j
    }

    #[test]
    fn add_complements_to_constant() {
        let x = poly1(rat(0, 1), &[(0, 1), (1, 1)], 2);
        let one_minus_x = poly1(rat(0, 1), &[(1, 1), (-1, 1)], 2);
        let s = x.add(&one_minus_x).unwrap();
        assert_eq!(s.coeff(&MultiIndex(vec![0])), vec![rat(1, 1)]);
        assert_eq!(s.coeff(&MultiIndex(vec![1])), vec![rat(0, 1)]);
    }

    #[test]
    fn mul_squares_one_plus_x() {
        let j = poly1(rat(0, 1), &[(1, 1), (1, 1)], 2);
        let sq = j.mul(&j).unwrap();
        assert_eq!(sq.coeff(&MultiIndex(vec![0])), vec![rat(1, 1)]);
        assert_eq!(sq.coeff(&MultiIndex(vec![1])), vec![rat(2, 1)]);
        assert_eq!(sq.coeff(&MultiIndex(vec![2])), vec![rat(1, 1)]);
    }

    #[test]
    fn scale_by_zero_annihilates() {
        let j = poly1(rat(0, 1), &[(0, 1), (0, 1), (1, 1)], 2);
        let z = j.scale(&rat(0, 1));
        assert!(z.coeffs().is_empty());
    }

    #[test]
    fn compose_square_of_one_plus_x() {
        // f(u) = u^2 at u0 = 1, g(x) = 1 + x at 0
        let f = poly1(rat(1, 1), &[(1, 1), (2, 1), (1, 1)], 2);
        let g = poly1(rat(0, 1), &[(1, 1), (1, 1)], 2);
        let c = f.compose(&g).unwrap();
        assert_eq!(c.coeff(&MultiIndex(vec![0])), vec![rat(1, 1)]);
        assert_eq!(c.coeff(&MultiIndex(vec![1])), vec![rat(2, 1)]);
        assert_eq!(c.coeff(&MultiIndex(vec![2])), vec![rat(1, 1)]);
    }

    #[test]
    fn compose_exp_with_x_plus_x2() {
        // exp-jet at 0 order 3: coeffs 1, 1, 1/2, 1/6; g = x + x^2
        let f = poly1(rat(0, 1), &[(1, 1), (1, 1), (1, 2), (1, 6)], 3);
        let g = poly1(rat(0, 1), &[(0, 1), (1, 1), (1, 1)], 3);
        let c = f.compose(&g).unwrap();
        assert_eq!(c.coeff(&MultiIndex(vec![0])), vec![rat(1, 1)]);
        assert_eq!(c.coeff(&MultiIndex(vec![1])), vec![rat(1, 1)]);
        assert_eq!(c.coeff(&MultiIndex(vec![2])), vec![rat(3, 2)]);
        assert_eq!(c.coeff(&MultiIndex(vec![3])), vec![rat(7, 6)]);
    }

    #[test]
    fn compose_with_identity_outer() {
        let g = poly1(rat(0, 1), &[(2, 1), (3, 1), (5, 1)], 2);
        let id = Jet::identity(vec![rat(2, 1)], 2);
        let c = id.compose(&g).unwrap();
        assert_eq!(c, g);
    }

    #[test]
    fn compose_base_point_mismatch() {
        let f = poly1(rat(5, 1), &[(1, 1)], 2);
        let g = poly1(rat(0, 1), &[(0, 1), (1, 1)], 2);
        assert!(matches!(
            f.compose(&g),
            Err(JetError::BasePointMismatch { .. })
        ));
    }

    #[test]
    fn invert_linear() {
        let f = poly1(rat(0, 1), &[(0, 1), (2, 1)], 3);
        let g = f.invert().unwrap();
        assert_eq!(g.coeff(&MultiIndex(vec![1])), vec![rat(1, 2)]);
        assert_eq!(g.coeff(&MultiIndex(vec![2])), vec![rat(0, 1)]);
    }

    #[test]
    fn invert_x_plus_x2_gives_signed_catalan() {
        let f = poly1(rat(0, 1), &[(0, 1), (1, 1), (1, 1)], 5);
        let g = f.invert().unwrap();
        let expect = [(0, 1), (1, 1), (-1, 1), (2, 1), (-5, 1), (14, 1)];
        for (k, &(n, d)) in expect.iter().enumerate() {
            assert_eq!(g.coeff(&MultiIndex(vec![k as u32])), vec![rat(n, d)], "k={k}");
        }
    }

    #[test]
    fn invert_shear_2d() {
        // F(x,y) = (x + y^2, y) at 0 -> G(u,v) = (u - v^2, v)
        let mut f: Jet<Rat> = Jet::new(vec![rat(0, 1), rat(0, 1)], 2, 3);
        f.set_coeff(MultiIndex(vec![1, 0]), vec![rat(1, 1), rat(0, 1)]);
        f.set_coeff(MultiIndex(vec![0, 1]), vec![rat(0, 1), rat(1, 1)]);
        f.set_coeff(MultiIndex(vec![0, 2]), vec![rat(1, 1), rat(0, 1)]);
        let g = f.invert().unwrap();
        assert_eq!(g.coeff(&MultiIndex(vec![1, 0])), vec![rat(1, 1), rat(0, 1)]);
        assert_eq!(g.coeff(&MultiIndex(vec![0, 1])), vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(g.coeff(&MultiIndex(vec![0, 2])), vec![rat(-1, 1), rat(0, 1)]);
        // round trip
        let round = f.compose(&g).unwrap();
        let id = Jet::identity(vec![rat(0, 1), rat(0, 1)], 3);
        assert_eq!(round, id);
    }

    #[test]
    fn invert_singular_rejected() {
        let f = poly1(rat(0, 1), &[(0, 1), (0, 1), (1, 1)], 3);
        assert_eq!(f.invert().unwrap_err(), JetError::SingularDerivative);
    }

    #[test]
    fn partition_sum_hand_enumeration() {
        // f_j = j!, g_i = i!, k = 3 -> 4 compositions each contributing 1
        let f: Vec<Rat> = (0..=3).map(|j| crate::scalar::factorial_rat(j)).collect();
        let g = f.clone();
        assert_eq!(fdb_partition_sum(&f, &g, 3).unwrap(), rat(4, 1));
        assert_eq!(fdb_partition_sum(&f, &g, 1).unwrap(), rat(1, 1));
        assert_eq!(fdb_partition_sum(&f, &g, 0).unwrap(), rat(0, 1));
    }

    #[test]
    fn partition_sum_matches_compose() {
        // f(u) = u^2 at 1, g(x) = 1 + x: k-th coefficient of compose * k!
        let f = poly1(rat(1, 1), &[(1, 1), (2, 1), (1, 1)], 2);
        let g = poly1(rat(0, 1), &[(1, 1), (1, 1)], 2);
        let c = f.compose(&g).unwrap();
        for k in 1..=2usize {
            let fd: Vec<Rat> = (0..=2)
                .map(|j| f.partial(&MultiIndex(vec![j as u32]))[0].clone())
                .collect();
            let gd: Vec<Rat> = (0..=2)
                .map(|j| g.partial(&MultiIndex(vec![j as u32]))[0].clone())
                .collect();
            let expect = c.partial(&MultiIndex(vec![k as u32]))[0].clone()
                * crate::scalar::factorial_rat(k).recip();
            assert_eq!(fdb_partition_sum(&fd, &gd, k).unwrap(), expect);
        }
    }

    #[test]
    fn partition_sum_horizon() {
        let f: Vec<Rat> = vec![rat(1, 1); 20];
        assert!(matches!(
            fdb_partition_sum(&f, &f, 13),
            Err(JetError::HorizonExceeded(13))
        ));
    }

    #[test]
    fn directional_derivative_examples() {
        // f(x,y) = xy at 0, v = (1,1)/sqrt(2), k = 2 -> 1
        let mut f: Jet<f64> = Jet::new(vec![0.0, 0.0], 1, 2);
        f.set_coeff(MultiIndex(vec![1, 1]), vec![1.0]);
        let s = 1.0 / 2f64.sqrt();
        let d = f.directional_derivative(&[s, s], 2).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-14);
        // k = 0 gives the value
        let v = f.directional_derivative(&[1.0, 0.0], 0).unwrap();
        assert_eq!(v[0], 0.0);
        // f(x) = x^3, k = 3 -> 6
        let mut g: Jet<f64> = Jet::new(vec![0.0], 1, 3);
        g.set_coeff(MultiIndex(vec![3]), vec![1.0]);
        let d3 = g.directional_derivative(&[1.0], 3).unwrap();
        assert!((d3[0] - 6.0).abs() < 1e-14);
    }
}
