//! Rectangular grids with composite-Simpson quadrature weights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub a: f64,
    pub b: f64,
    pub points: usize,
}

/// A uniform product grid; per-axis point counts are odd (>= 3) so that
/// midpoints exist and composite Simpson applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self, GridError> {
        if axes.is_empty() {
            return Err(GridError::Invalid("need at least one axis".into()));
        }
        for ax in &axes {
            if !(ax.a < ax.b) {
                return Err(GridError::Invalid(format!("need a < b, got [{}, {}]", ax.a, ax.b)));
            }
            if ax.points < 3 || ax.points % 2 == 0 {
                return Err(GridError::Invalid(format!(
                    "points per axis must be odd and >= 3, got {}",
                    ax.points
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    /// Symmetric 1-D grid [-half, half].
    pub fn symmetric_1d(half: f64, points: usize) -> Result<Self, GridError> {
        Self::new(vec![Axis { a: -half, b: half, points }])
    }

    /// Parse one axis from "a:b:points".
    pub fn parse_axis(s: &str) -> Result<Axis, GridError> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(GridError::Invalid(format!("axis '{s}' is not a:b:points")));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| GridError::Invalid(format!("bad axis start '{}'", parts[0])))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| GridError::Invalid(format!("bad axis end '{}'", parts[1])))?;
        let points: usize = parts[2]
            .parse()
            .map_err(|_| GridError::Invalid(format!("bad point count '{}'", parts[2])))?;
        Ok(Axis { a, b, points })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let ax = &self.axes[axis];
        (ax.b - ax.a) / (ax.points - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.axes[axis].a + self.spacing(axis) * i as f64
    }

    /// Flattened (row-major, last axis fastest) index -> per-axis indices.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let p = self.axes[axis].points;
            out[axis] = idx % p;
            idx /= p;
        }
        out
    }

    pub fn flatten(&self, indices: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in indices.iter().enumerate() {
            idx = idx * self.axes[axis].points + i;
        }
        idx
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.unflatten(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coordinate(axis, i))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        (0..self.node_count()).map(move |i| (i, self.node(i)))
    }

    /// Composite Simpson weight of node `i` along one axis.
    pub fn simpson_weight_1d(&self, axis: usize, i: usize) -> f64 {
        let p = self.axes[axis].points;
        let h = self.spacing(axis);
        let w = if i == 0 || i == p - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * h / 3.0
    }

    /// Tensor-product Simpson weight of a flattened node index.
    pub fn simpson_weight(&self, idx: usize) -> f64 {
        self.unflatten(idx)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.simpson_weight_1d(axis, i))
            .product()
    }

    /// True if the node lies on the boundary of the box.
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.unflatten(idx)
            .iter()
            .enumerate()
            .any(|(axis, &i)| i == 0 || i == self.axes[axis].points - 1)
    }

    /// Product of two grids (self x other).
    pub fn product(&self, other: &GridSpec) -> GridSpec {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.clone());
        GridSpec { axes }
    }

    /// Split into the first `l` axes and the rest.
    pub fn split(&self, l: usize) -> (GridSpec, GridSpec) {
        (
            GridSpec { axes: self.axes[..l].to_vec() },
            GridSpec { axes: self.axes[l..].to_vec() },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let g = GridSpec::symmetric_1d(1.0, 5).unwrap();
        // integral of x^3 + 1 over [-1,1] = 2
        let total: f64 = g
            .nodes()
            .map(|(i, x)| g.simpson_weight(i) * (x[0].powi(3) + 1.0))
            .sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_weights_integrate_2d() {
        let g = GridSpec::new(vec![
            Axis { a: 0.0, b: 1.0, points: 5 },
            Axis { a: 0.0, b: 2.0, points: 7 },
        ])
        .unwrap();
        // integral of x*y over [0,1]x[0,2] = 1
        let total: f64 = g
            .nodes()
            .map(|(i, x)| g.simpson_weight(i) * x[0] * x[1])
            .sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_even_point_counts() {
        assert!(GridSpec::new(vec![Axis { a: 0.0, b: 1.0, points: 4 }]).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let g = GridSpec::new(vec![
            Axis { a: 0.0, b: 1.0, points: 3 },
            Axis { a: 0.0, b: 1.0, points: 5 },
        ])
        .unwrap();
        for idx in 0..g.node_count() {
            assert_eq!(g.flatten(&g.unflatten(idx)), idx);
        }
    }
}
