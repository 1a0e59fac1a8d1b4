//! Based loops and bridges in parameter space, eigenvalue continuation along
//! them, and the permutations they induce.
//!
//! All permutations are reported in base-point labels: label `k` is the k-th
//! eigenvalue of the top-to-bottom ordering at the first sample.

mod group;
mod path;
mod permutation;
mod trace;

use thiserror::Error;

use crate::family::{FamilyError, OperatorFamily, ParameterPoint};
use crate::spectra::SpectraError;

pub use group::{is_abelian, lambda_group, AbelianCheck, LambdaGroup};
pub use path::{
    discretize, winding_number, DiscretizedPath, Orientation, PathSpec, Plane, PointSpec, ResolvedPlane, Sample,
    JOIN_TOL,
};
pub use permutation::{compose, conjugate, inverse, Permutation, PermutationError};
pub use trace::{best_assignment, loop_permutation, trace, trace_with, SpectralTrace, SpectrumSource, TrackingOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HolonomyError {
    #[error(transparent)]
    Permutation(#[from] PermutationError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("degenerate path: {0}")]
    DegenerateSpec(String),
    #[error("segment {segment} starts {gap:.3e} away from the end of the previous segment")]
    Discontinuous { segment: usize, gap: f64 },
    #[error("paths live in parameter spaces of different dimension")]
    SizeMismatch,
    #[error("sample {sample} at {point:?} is on the discriminant (eigenvalue gap {min_gap:.3e})")]
    OnDiscriminant { sample: usize, point: Vec<f64>, min_gap: f64 },
    #[error("tracking ambiguous in step {step} near {point:?} after {depth} bisections")]
    TrackingAmbiguous {
        step: usize,
        /// Geometric piece of the path the step lies on.
        segment: Option<usize>,
        point: Vec<f64>,
        depth: u32,
    },
    #[error("path is not a loop")]
    NotALoop,
    #[error("loop base point is {distance:.3e} away from the bridge end")]
    BasePointMismatch { distance: f64 },
    #[error("spectrum source returned {got} eigenvalues, expected {expected}")]
    SpectrumSize { expected: usize, got: usize },
    #[error("{0}")]
    Source(String),
}

/// An open path from `from` to `to`, used to compare labellings at two base
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct Bridge {
    path: DiscretizedPath,
}

impl Bridge {
    pub fn new(path: DiscretizedPath) -> Self {
        Self {
            path: path.into_open(),
        }
    }

    /// Stationary bridge at `x`.
    pub fn zero(x: ParameterPoint) -> Self {
        Self::new(DiscretizedPath::from_points(vec![x.clone(), x]))
    }

    pub fn path(&self) -> &DiscretizedPath {
        &self.path
    }

    pub fn from(&self) -> &ParameterPoint {
        self.path.first()
    }

    pub fn to(&self) -> &ParameterPoint {
        self.path.last()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.path.reversed())
    }
}

/// `b⁻¹ γ b`: walk the bridge, run the loop, walk back. Based at `b.from()`.
pub fn pull_back(b: &Bridge, lp: &DiscretizedPath) -> Result<DiscretizedPath, HolonomyError> {
    if !lp.is_loop() {
        return Err(HolonomyError::NotALoop);
    }
    if lp.first().dim() != b.to().dim() {
        return Err(HolonomyError::SizeMismatch);
    }
    let scale = lp.first().coords().iter().chain(b.to().coords()).fold(1.0_f64, |m, x| m.max(x.abs()));
    let distance = lp.first().distance(b.to());
    if distance > JOIN_TOL * scale {
        return Err(HolonomyError::BasePointMismatch { distance });
    }
    let back = b.path.reversed();
    DiscretizedPath::concat(&[&b.path, lp, &back])
}

/// Label map from `b.from()` to `b.to()` obtained by continuing along `b`:
/// label `k` at the start becomes label `apply(k)` at the end.
pub fn bridge_relabeling(f: &OperatorFamily, b: &Bridge, opts: &TrackingOptions) -> Result<Permutation, HolonomyError> {
    Ok(trace(f, &b.path, opts)?.net_permutation())
}
