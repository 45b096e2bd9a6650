//! A small expression language for test functions R^n -> R^m, with jet
//! evaluation to arbitrary order via truncated-Taylor arithmetic.

mod parser;

pub use parser::{parse, ParseError};

use crate::jet::{Jet, JetError};
use crate::multiindex::MultiIndex;
use crate::scalar::{Rat, Scalar};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Exp,
    Sin,
    Cos,
    /// sqrt(1 + u).
    Sqrt1p,
    /// bump(u) = exp(-1/(1-u^2)) for |u| < 1, else 0.
    Bump,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Rat),
    /// Zero-based variable index; surface syntax x1..xn.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Builtin(Builtin, Box<Expr>),
    Vector(Vec<Expr>),
}

impl Expr {
    pub fn target_dim(&self) -> usize {
        match self {
            Expr::Vector(parts) => parts.len(),
            _ => 1,
        }
    }

    /// Largest variable index used, plus one.
    pub fn min_arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Builtin(_, e) => e.min_arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.min_arity().max(b.min_arity())
            }
            Expr::Vector(parts) => parts.iter().map(|p| p.min_arity()).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("sqrt1p of a value <= -1")]
    Sqrt1pDomain,
    #[error("negative power of a zero base")]
    ZeroToNegativePower,
    #[error("builtin not exactly representable at this point in rational mode")]
    NotExact,
    #[error("jet algebra error: {0}")]
    Jet(#[from] JetError),
}

/// Scalars that can expand the builtins into truncated power series.
pub trait EvalScalar: Scalar {
    /// Taylor coefficients c_0..c_k of the builtin around `u0`
    /// (so builtin(u0 + d) = sum c_j d^j + O(d^{k+1})).
    fn builtin_series(b: Builtin, u0: &Self, k: usize) -> Result<Vec<Self>, EvalError>;
}

impl EvalScalar for f64 {
    fn builtin_series(b: Builtin, u0: &f64, k: usize) -> Result<Vec<f64>, EvalError> {
        let u0 = *u0;
        let mut out = Vec::with_capacity(k + 1);
        match b {
            Builtin::Exp => {
                let e = u0.exp();
                let mut fac = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        fac *= j as f64;
                    }
                    out.push(e / fac);
                }
            }
            Builtin::Sin | Builtin::Cos => {
                let phase = if b == Builtin::Sin { 0.0 } else { std::f64::consts::FRAC_PI_2 };
                let mut fac = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        fac *= j as f64;
                    }
                    out.push((u0 + phase + j as f64 * std::f64::consts::FRAC_PI_2).sin() / fac);
                }
            }
            Builtin::Sqrt1p => {
                let base = 1.0 + u0;
                if base <= 0.0 {
                    return Err(EvalError::Sqrt1pDomain);
                }
                // c_j = binom(1/2, j) base^(1/2 - j)
                let mut coef = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        coef *= (0.5 - (j as f64 - 1.0)) / j as f64;
                    }
                    out.push(coef * base.powf(0.5 - j as f64));
                }
            }
            Builtin::Bump => {
                if u0.abs() >= 1.0 {
                    return Ok(vec![0.0; k + 1]);
                }
                // series via 1-D jet arithmetic: exp(-1/(1 - u^2)) around u0
                let t = Jet::<f64>::variable(vec![u0], 0, k);
                let one = Jet::<f64>::constant(vec![u0], vec![1.0], k);
                let v = one.sub(&t.mul(&t)?)?; // 1 - u^2, positive at u0
                let w = v.recip()?.scale(&-1.0); // -1/(1-u^2)
                let w0 = w.value()[0];
                let series = f64::builtin_series(Builtin::Exp, &w0, k)?;
                let e = compose_univariate(&series, &w)?;
                for j in 0..=k {
                    out.push(e.coeff(&MultiIndex(vec![j as u32]))[0]);
                }
            }
        }
        Ok(out)
    }
}

impl EvalScalar for Rat {
    fn builtin_series(b: Builtin, u0: &Rat, k: usize) -> Result<Vec<Rat>, EvalError> {
        match b {
            Builtin::Exp => {
                if !num::Zero::is_zero(u0) {
                    return Err(EvalError::NotExact);
                }
                Ok((0..=k)
                    .map(|j| crate::scalar::factorial_rat(j).recip())
                    .collect())
            }
            Builtin::Sin => {
                if !num::Zero::is_zero(u0) {
                    return Err(EvalError::NotExact);
                }
                Ok((0..=k)
                    .map(|j| match j % 4 {
                        1 => crate::scalar::factorial_rat(j).recip(),
                        3 => -crate::scalar::factorial_rat(j).recip(),
                        _ => <Rat as Scalar>::zero(),
                    })
                    .collect())
            }
            Builtin::Cos => {
                if !num::Zero::is_zero(u0) {
                    return Err(EvalError::NotExact);
                }
                Ok((0..=k)
                    .map(|j| match j % 4 {
                        0 => crate::scalar::factorial_rat(j).recip(),
                        2 => -crate::scalar::factorial_rat(j).recip(),
                        _ => <Rat as Scalar>::zero(),
                    })
                    .collect())
            }
            Builtin::Sqrt1p => {
                if !num::Zero::is_zero(u0) {
                    return Err(EvalError::NotExact);
                }
                // binom(1/2, j), rational
                let mut out = Vec::with_capacity(k + 1);
                let mut coef = <Rat as Scalar>::one();
                let half = <Rat as Scalar>::from_ratio(1, 2);
                for j in 0..=k {
                    if j > 0 {
                        let prev = half.clone() - <Rat as Scalar>::from_i64(j as i64 - 1);
                        coef = coef * prev / <Rat as Scalar>::from_i64(j as i64);
                    }
                    out.push(coef.clone());
                }
                Ok(out)
            }
            Builtin::Bump => {
                // exactly zero outside the open support; not exact inside
                let one = <Rat as Scalar>::one();
                if num::Signed::abs(u0) >= one {
                    Ok(vec![<Rat as Scalar>::zero(); k + 1])
                } else {
                    Err(EvalError::NotExact)
                }
            }
        }
    }
}

/// Substitute a scalar jet into a univariate power series around the jet's value.
fn compose_univariate<S: Scalar>(series: &[S], inner: &Jet<S>) -> Result<Jet<S>, EvalError> {
    let n = inner.source_dim();
    let order = inner.order();
    let mut delta = inner.clone();
    delta.set_coeff(MultiIndex::zero(n), vec![S::zero()]);
    let mut acc = Jet::constant(inner.base_point().to_vec(), vec![series[0].clone()], order);
    let mut pow = Jet::constant(inner.base_point().to_vec(), vec![S::one()], order);
    for c in series.iter().skip(1) {
        pow = pow.mul(&delta)?;
        if !c.is_zero() {
            acc = acc.add(&pow.scale(c))?;
        }
    }
    Ok(acc)
}

/// Evaluate the jet of an expression at a point through order `k`.
pub fn eval_jet<S: EvalScalar>(e: &Expr, point: &[S], order: usize) -> Result<Jet<S>, EvalError> {
    match e {
        Expr::Vector(parts) => {
            let comps: Vec<Jet<S>> = parts
                .iter()
                .map(|p| eval_scalar_jet(p, point, order))
                .collect::<Result<_, _>>()?;
            Ok(Jet::from_components(&comps)?)
        }
        _ => eval_scalar_jet(e, point, order),
    }
}

fn eval_scalar_jet<S: EvalScalar>(
    e: &Expr,
    point: &[S],
    order: usize,
) -> Result<Jet<S>, EvalError> {
    match e {
        Expr::Num(r) => Ok(Jet::constant(point.to_vec(), vec![s_from_rat::<S>(r)], order)),
        Expr::Var(i) => Ok(Jet::variable(point.to_vec(), *i, order)),
        Expr::Neg(a) => Ok(eval_scalar_jet(a, point, order)?.scale(&(-S::one()))),
        Expr::Add(a, b) => {
            Ok(eval_scalar_jet(a, point, order)?.add(&eval_scalar_jet(b, point, order)?)?)
        }
        Expr::Sub(a, b) => {
            Ok(eval_scalar_jet(a, point, order)?.sub(&eval_scalar_jet(b, point, order)?)?)
        }
        Expr::Mul(a, b) => {
            Ok(eval_scalar_jet(a, point, order)?.mul(&eval_scalar_jet(b, point, order)?)?)
        }
        Expr::Div(a, b) => {
            let bj = eval_scalar_jet(b, point, order)?;
            if bj.value()[0].is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            Ok(eval_scalar_jet(a, point, order)?.mul(&bj.recip()?)?)
        }
        Expr::Pow(a, p) => {
            let aj = eval_scalar_jet(a, point, order)?;
            if *p >= 0 {
                Ok(aj.powi(*p as u32)?)
            } else {
                if aj.value()[0].is_zero() {
                    return Err(EvalError::ZeroToNegativePower);
                }
                Ok(aj.recip()?.powi((-p) as u32)?)
            }
        }
        Expr::Builtin(b, a) => {
            let aj = eval_scalar_jet(a, point, order)?;
            let u0 = aj.value()[0].clone();
            let series = S::builtin_series(*b, &u0, order)?;
            compose_univariate(&series, &aj)
        }
        Expr::Vector(_) => Err(EvalError::Jet(JetError::DimensionMismatch(
            "nested vector expressions are not supported".into(),
        ))),
    }
}

fn s_from_bigint<S: Scalar>(v: &num::bigint::BigInt) -> S {
    use num::Integer;
    let base_i = 1_000_000_000_000_000_000i64;
    let base = num::bigint::BigInt::from(base_i);
    let negative = num::Signed::is_negative(v);
    let mut rest = num::Signed::abs(v);
    let mut digits = Vec::new();
    loop {
        let (q, r) = rest.div_rem(&base);
        digits.push(num::ToPrimitive::to_i64(&r).unwrap());
        rest = q;
        if num::Zero::is_zero(&rest) {
            break;
        }
    }
    let mut acc = S::zero();
    for &d in digits.iter().rev() {
        acc = acc * S::from_i64(base_i) + S::from_i64(d);
    }
    if negative {
        -acc
    } else {
        acc
    }
}

fn s_from_rat<S: Scalar>(r: &Rat) -> S {
    // exact reconstruction of a decimal literal of any length
    s_from_bigint::<S>(r.numer()) / s_from_bigint::<S>(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> Rat {
        <Rat as Scalar>::from_ratio(n, d)
    }

    #[test]
    fn exp_series_exact() {
        let e = parse("exp(x1)", 1).unwrap();
        let j = eval_jet::<Rat>(&e, &[rat(0, 1)], 3).unwrap();
        assert_eq!(j.coeff(&MultiIndex(vec![0]))[0], rat(1, 1));
        assert_eq!(j.coeff(&MultiIndex(vec![1]))[0], rat(1, 1));
        assert_eq!(j.coeff(&MultiIndex(vec![2]))[0], rat(1, 2));
        assert_eq!(j.coeff(&MultiIndex(vec![3]))[0], rat(1, 6));
    }

    #[test]
    fn bump_outside_support_is_zero_jet() {
        let e = parse("bump(x1)", 1).unwrap();
        let j = eval_jet::<f64>(&e, &[1.5], 4).unwrap();
        assert!(j.coeffs().is_empty());
    }

    #[test]
    fn product_jet_at_point() {
        let e = parse("x1*x2", 2).unwrap();
        let j = eval_jet::<f64>(&e, &[1.0, 2.0], 2).unwrap();
        assert_eq!(j.value()[0], 2.0);
        assert_eq!(j.coeff(&MultiIndex(vec![1, 0]))[0], 2.0);
        assert_eq!(j.coeff(&MultiIndex(vec![0, 1]))[0], 1.0);
        assert_eq!(j.coeff(&MultiIndex(vec![1, 1]))[0], 1.0);
    }

    #[test]
    fn rational_mode_rejects_inexact_builtin_points() {
        let e = parse("exp(x1)", 1).unwrap();
        assert_eq!(
            eval_jet::<Rat>(&e, &[rat(1, 1)], 2).unwrap_err(),
            EvalError::NotExact
        );
    }

    #[test]
    fn division_by_zero_detected() {
        let e = parse("1/x1", 1).unwrap();
        assert_eq!(
            eval_jet::<f64>(&e, &[0.0], 2).unwrap_err(),
            EvalError::DivisionByZero
        );
    }

    #[test]
    fn finite_difference_first_order() {
        let exprs = [
            ("exp(-x1^2)", 0.7),
            ("sin(x1)*cos(x1)", 0.3),
            ("sqrt1p(x1^2)", -0.4),
            ("bump(x1/2)", 0.9),
        ];
        let h = 1e-5;
        for (src, x) in exprs {
            let e = parse(src, 1).unwrap();
            let j = eval_jet::<f64>(&e, &[x], 1).unwrap();
            let d = j.coeff(&MultiIndex(vec![1]))[0];
            let fp = eval_jet::<f64>(&e, &[x + h], 0).unwrap().value()[0];
            let fm = eval_jet::<f64>(&e, &[x - h], 0).unwrap().value()[0];
            let fd = (fp - fm) / (2.0 * h);
            let denom = d.abs().max(1.0);
            assert!(
                (d - fd).abs() / denom < 1e-7,
                "{src}: jet {d} vs fd {fd}"
            );
        }
    }

    #[test]
    fn bump_flattens_toward_boundary() {
        let e = parse("bump(x1)", 1).unwrap();
        let mut prev = f64::INFINITY;
        for exp in 1..=3 {
            let eps = 10f64.powi(-exp);
            let j = eval_jet::<f64>(&e, &[1.0 - eps], 4).unwrap();
            let mag: f64 = (0..=4)
                .map(|k| j.coeff(&MultiIndex(vec![k as u32]))[0].abs())
                .fold(0.0, f64::max);
            assert!(mag < prev);
            prev = mag;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn dsl_composition_matches_jet_compose() {
        // f(u) = u^2 written literally vs composed jets, exact mode
        let fg = parse("(x1 + x1^2)^2", 1).unwrap();
        let direct = eval_jet::<Rat>(&fg, &[rat(0, 1)], 4).unwrap();
        let g = eval_jet::<Rat>(&parse("x1 + x1^2", 1).unwrap(), &[rat(0, 1)], 4).unwrap();
        let f = eval_jet::<Rat>(&parse("x1^2", 1).unwrap(), &[rat(0, 1)], 4).unwrap();
        let composed = f.compose(&g).unwrap();
        assert_eq!(direct, composed);
    }
}
