//! Mapping the degeneracy set: discriminant scans over parameter planes,
//! zero refinement, continuation of EP lines and EP-order probes.

mod classify;
mod line;
mod scan;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{FamilyError, OperatorFamily, ParameterPoint};
use crate::holonomy::{HolonomyError, Permutation};
use crate::spectra::{char_poly, discriminant, discriminant_ladder, SpectraError};

pub use classify::{classify_ep, Classification, ProbeOptions};
pub use line::{trace_line, trace_line_report, LineOptions, LineStop, LineTrace};
pub use scan::{refine_zeros, scan_plane, DiscriminantField, PlaneSpec, REFINE_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CartographyError {
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("invalid probe: {0}")]
    InvalidProbe(String),
    #[error("Jacobian degenerates at {point:?} after {steps_completed} steps (junction of EP lines)")]
    JacobianDegenerate { point: Vec<f64>, steps_completed: usize },
    #[error("another candidate at {other:?} lies {distance:.3e} from the probe centre (radius {radius:.3e})")]
    AmbiguousEnclosure { other: Vec<f64>, distance: f64, radius: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Holonomy(#[from] HolonomyError),
}

/// A point where the discriminant (nearly) vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPCandidate {
    pub location: ParameterPoint,
    pub refined: bool,
    /// `|Δ|` at `location`.
    pub residual: f64,
    /// Loop permutation of an encircling probe, if one was run.
    #[serde(default)]
    pub signature: Option<Permutation>,
    #[serde(default)]
    pub probe_radius: Option<f64>,
}

impl EPCandidate {
    /// Cycle lengths of the probe signature.
    pub fn cycle_type(&self) -> Option<Vec<usize>> {
        self.signature.as_ref().map(Permutation::cycle_type)
    }
}

/// Scale used to make discriminant-like quantities dimensionless: the
/// operator norm raised to the homogeneity degree `k`.
fn norm_power(norm: f64, k: usize) -> f64 {
    norm.max(1.0).powi(k as i32)
}

/// Discriminant at `x` and its natural magnitude `max(1, ‖M‖∞)^{n(n−1)}`.
pub fn discriminant_at(f: &OperatorFamily, x: &ParameterPoint) -> Result<(Complex64, f64), CartographyError> {
    let m = f.evaluate(x)?;
    let n = m.dim();
    Ok((discriminant(&char_poly(&m)), norm_power(m.norm_inf(), n * (n - 1))))
}

/// `psc_j(p, p′)` at `x` with its natural magnitude.
fn ladder_at(f: &OperatorFamily, x: &ParameterPoint, j: usize) -> Result<(Complex64, f64), CartographyError> {
    let m = f.evaluate(x)?;
    let n = m.dim();
    let ladder = discriminant_ladder(&char_poly(&m));
    let value = ladder
        .get(j)
        .copied()
        .ok_or_else(|| CartographyError::InvalidSeed(format!("no subresultant of index {j} for n = {n}")))?;
    Ok((value, norm_power(m.norm_inf(), (n - j) * (n - j - 1))))
}

/// Minimum-norm solution of `J δ = −F` for a 2×k Jacobian (k = 2 or 3),
/// falling back to the rank-1 pseudo-inverse. `None` if `J` vanishes.
fn min_norm_step(j: &[Vec<f64>; 2], f: [f64; 2]) -> Option<Vec<f64>> {
    let k = j[0].len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a, b, d) = (dot(&j[0], &j[0]), dot(&j[0], &j[1]), dot(&j[1], &j[1]));
    let tr = a + d;
    if !(tr > 0.0) || !tr.is_finite() {
        return None;
    }
    let det = a * d - b * b;
    let y = if det > 1e-14 * tr * tr {
        // (J Jᵀ)⁻¹ F
        [(d * f[0] - b * f[1]) / det, (a * f[1] - b * f[0]) / det]
    } else {
        [f[0] / tr, f[1] / tr]
    };
    Some((0..k).map(|c| -(j[0][c] * y[0] + j[1][c] * y[1])).collect())
}

/// Singular values (largest first) of a 2×k matrix.
fn singular_values(j: &[Vec<f64>; 2]) -> (f64, f64) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a, b, d) = (dot(&j[0], &j[0]), dot(&j[0], &j[1]), dot(&j[1], &j[1]));
    let mean = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    ((mean + disc).max(0.0).sqrt(), (mean - disc).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_step_solves_square_systems() {
        let j = [vec![2.0, 1.0], vec![1.0, 3.0]];
        let d = min_norm_step(&j, [1.0, 2.0]).unwrap();
        assert!((2.0 * d[0] + d[1] + 1.0).abs() < 1e-14);
        assert!((d[0] + 3.0 * d[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn min_norm_step_handles_rank_one() {
        // second equation identically zero, as for a real-valued Δ
        let j = [vec![3.0, 4.0], vec![0.0, 0.0]];
        let d = min_norm_step(&j, [5.0, 0.0]).unwrap();
        assert!((d[0] + 0.6).abs() < 1e-15 && (d[1] + 0.8).abs() < 1e-15);
        assert!(min_norm_step(&[vec![0.0, 0.0], vec![0.0, 0.0]], [1.0, 1.0]).is_none());
    }

    #[test]
    fn singular_values_of_a_2x3() {
        let (s1, s2) = singular_values(&[vec![3.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]);
        assert!((s1 - 3.0).abs() < 1e-15 && (s2 - 2.0).abs() < 1e-15);
    }
}
