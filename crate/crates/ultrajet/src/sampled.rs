//! Functions sampled as jets on a rectangular grid: the carrier for all
//! seminorm estimation.

use crate::funcdsl::{eval_jet, EvalError, Expr};
use crate::grid::GridSpec;
use crate::jet::Jet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("evaluation failed at node {node:?}: {source}")]
    Eval { node: Vec<f64>, source: EvalError },
    #[error("expression arity {arity} does not match grid dimension {dim}")]
    ArityMismatch { arity: usize, dim: usize },
}

/// Detected compact support: per-axis bounds of the sub-box outside of
/// which every jet vanishes, with margin at least 2h to the grid boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBox {
    pub bounds: Vec<(f64, f64)>,
}

impl SupportBox {
    /// Radius of the smallest origin-centered box containing the support.
    pub fn radius(&self) -> f64 {
        self.bounds
            .iter()
            .map(|(a, b)| a.abs().max(b.abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SampledFunction {
    pub grid: GridSpec,
    pub order: usize,
    /// One jet per grid node, in flattened node order.
    pub jets: Vec<Jet<f64>>,
    pub source_expr: Option<Expr>,
    pub support_flag: Option<SupportBox>,
}

impl SampledFunction {
    /// Evaluate the jet of `e` at every grid node in parallel.
    pub fn sample(e: &Expr, grid: &GridSpec, order: usize) -> Result<Self, SampleError> {
        let arity = e.min_arity();
        if arity > grid.dim() {
            return Err(SampleError::ArityMismatch { arity, dim: grid.dim() });
        }
        let jets: Vec<Jet<f64>> = (0..grid.node_count())
            .into_par_iter()
            .map(|i| {
                let x = grid.node(i);
                eval_jet::<f64>(e, &x, order).map_err(|source| SampleError::Eval {
                    node: x,
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        let mut f = SampledFunction {
            grid: grid.clone(),
            order,
            jets,
            source_expr: Some(e.clone()),
            support_flag: None,
        };
        f.support_flag = f.detect_support();
        Ok(f)
    }

    pub fn from_jets(grid: GridSpec, order: usize, jets: Vec<Jet<f64>>) -> Self {
        let mut f = SampledFunction {
            grid,
            order,
            jets,
            source_expr: None,
            support_flag: None,
        };
        f.support_flag = f.detect_support();
        f
    }

    pub fn target_dim(&self) -> usize {
        self.jets[0].target_dim()
    }

    pub fn jet(&self, idx: usize) -> &Jet<f64> {
        &self.jets[idx]
    }

    /// Scale every jet by lambda (positive homogeneity of all seminorms).
    pub fn scaled(&self, lambda: f64) -> SampledFunction {
        let jets = self.jets.iter().map(|j| j.scale(&lambda)).collect();
        SampledFunction {
            grid: self.grid.clone(),
            order: self.order,
            jets,
            source_expr: None,
            support_flag: self.support_flag.clone(),
        }
    }

    fn node_is_zero(&self, idx: usize) -> bool {
        self.jets[idx].coeffs().is_empty()
    }

    /// Bounding box of the nonzero nodes, reported only when it clears the
    /// grid boundary by at least 2h on every axis (so the support is honestly
    /// interior). All-zero samples report a degenerate box of radius 0.
    fn detect_support(&self) -> Option<SupportBox> {
        let n = self.grid.dim();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        let mut any = false;
        for idx in 0..self.jets.len() {
            if self.node_is_zero(idx) {
                continue;
            }
            any = true;
            for (axis, &i) in self.grid.unflatten(idx).iter().enumerate() {
                lo[axis] = lo[axis].min(i);
                hi[axis] = hi[axis].max(i);
            }
        }
        if !any {
            return Some(SupportBox { bounds: vec![(0.0, 0.0); n] });
        }
        for axis in 0..n {
            if lo[axis] < 2 || hi[axis] + 2 >= self.grid.axes[axis].points {
                return None;
            }
        }
        let bounds = (0..n)
            .map(|axis| {
                (
                    self.grid.coordinate(axis, lo[axis]),
                    self.grid.coordinate(axis, hi[axis]),
                )
            })
            .collect();
        Some(SupportBox { bounds })
    }

    /// Re-evaluate the source expression at 5 deterministic nodes and
    /// compare with the stored jets. True when no expression is attached.
    pub fn spot_check(&self) -> bool {
        let Some(e) = &self.source_expr else { return true };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5a5a);
        for _ in 0..5 {
            let idx = rng.random_range(0..self.jets.len());
            let x = self.grid.node(idx);
            match eval_jet::<f64>(e, &x, self.order) {
                Ok(j) => {
                    if j != self.jets[idx] {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcdsl::parse;

    fn grid_1d() -> GridSpec {
        GridSpec::symmetric_1d(6.0, 241).unwrap()
    }

    #[test]
    fn gaussian_has_no_support_flag() {
        let e = parse("exp(-x1^2)", 1).unwrap();
        let f = SampledFunction::sample(&e, &grid_1d(), 6).unwrap();
        assert_eq!(f.jets.len(), 241);
        assert!(f.support_flag.is_none());
        assert!(f.spot_check());
    }

    #[test]
    fn scaled_bump_support_radius() {
        let e = parse("bump(x1/2)", 1).unwrap();
        let f = SampledFunction::sample(&e, &grid_1d(), 6).unwrap();
        let s = f.support_flag.expect("compact support expected");
        assert!((s.radius() - 2.0).abs() <= 0.1);
    }

    #[test]
    fn zero_function_support_radius_zero() {
        let e = parse("0", 1).unwrap();
        let f = SampledFunction::sample(&e, &grid_1d(), 4).unwrap();
        assert_eq!(f.support_flag.unwrap().radius(), 0.0);
    }
}
