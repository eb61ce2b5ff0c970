//! Coarse-to-fine grid maximization used by the brute-force oracles.
//!
//! Each pass evaluates a tensor grid of `points_per_axis` points per axis.
//! The first pass covers `center ± half_width`; every refinement re-centres a
//! box of two cells on either side of the incumbent and resamples it.

use crate::error::{DreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_axis: usize,
    pub refinements: usize,
    /// Box centre; the origin when `None`.
    pub center: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width: 4.0,
            points_per_axis: 21,
            refinements: 2,
            center: None,
        }
    }
}

impl GridSpec {
    pub fn with_half_width(half_width: f64) -> GridSpec {
        GridSpec {
            half_width,
            ..GridSpec::default()
        }
    }

    pub fn centered(mut self, center: Vec<f64>) -> GridSpec {
        self.center = Some(center);
        self
    }

    /// Cell width after the last refinement.
    pub fn final_step(&self) -> f64 {
        let intervals = (self.points_per_axis - 1) as f64;
        let mut step = 2.0 * self.half_width / intervals;
        for _ in 0..self.refinements {
            step = 4.0 * step / intervals;
        }
        step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMax {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub final_step: f64,
}

impl GridMax {
    /// Worst-case gap between the grid maximum and the true supremum of a
    /// concave quadratic whose negated Hessian has largest eigenvalue
    /// `curvature`, given the maximizer lies inside the last box.
    pub fn quadratic_gap_bound(&self, curvature: f64) -> f64 {
        let d = self.argmax.len() as f64;
        0.5 * curvature.max(0.0) * d * (0.5 * self.final_step).powi(2)
    }
}

/// Maximizes `f` over `dim` variables.
///
/// Fails with [`DreError::SearchBoxTooSmall`] when the incumbent of any pass
/// sits on the boundary of that pass's box.
pub fn maximize<F>(dim: usize, spec: &GridSpec, mut f: F) -> Result<GridMax>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(spec.points_per_axis >= 3, "grid needs at least 3 points per axis");
    let mut center = spec.center.clone().unwrap_or_else(|| vec![0.0; dim]);
    assert_eq!(center.len(), dim, "grid centre has wrong dimension");
    let intervals = (spec.points_per_axis - 1) as f64;
    let mut half = spec.half_width;
    let mut best = (f64::NEG_INFINITY, center.clone());

    for _pass in 0..=spec.refinements {
        let step = 2.0 * half / intervals;
        let mut idx = vec![0usize; dim];
        let mut best_idx = vec![0usize; dim];
        let mut best_dist = usize::MAX;
        let mut point = vec![0.0; dim];
        let mid = spec.points_per_axis / 2;
        best.0 = f64::NEG_INFINITY;
        loop {
            for d in 0..dim {
                point[d] = center[d] - half + step * idx[d] as f64;
            }
            let v = f(&point);
            // ties go to the point nearest the box centre
            let dist: usize = idx.iter().map(|&i| i.abs_diff(mid)).sum();
            if v > best.0 || (v == best.0 && dist < best_dist) {
                best.0 = v;
                best_dist = dist;
                best.1.copy_from_slice(&point);
                best_idx.copy_from_slice(&idx);
            }
            // odometer increment
            let mut d = 0;
            while d < dim {
                idx[d] += 1;
                if idx[d] < spec.points_per_axis {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
        if let Some(axis) = best_idx
            .iter()
            .position(|&i| i == 0 || i == spec.points_per_axis - 1)
        {
            return Err(DreError::SearchBoxTooSmall { axis });
        }
        center.copy_from_slice(&best.1);
        half = 2.0 * step;
    }

    Ok(GridMax {
        value: best.0,
        argmax: best.1,
        final_step: spec.final_step(),
    })
}
