//! Small dense complex linear algebra: characteristic polynomials, roots,
//! discriminants, eigenvalue labelling and PT-symmetry checks.
//!
//! Tolerances are relative to `scale = max(1, spectral radius)` so that a
//! rescaled family behaves the same way.

mod matrix;
mod poly;
mod roots;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::family::{FamilyError, OperatorFamily, ParameterPoint};

pub use matrix::{ComplexMatrix, MAX_DIM};
pub use poly::{
    char_poly, discriminant, discriminant_cubic, discriminant_ladder, discriminant_resultant,
    resultant, subresultant_coefficient, CharPoly,
};
pub use roots::roots;

/// Two eigenvalues closer than this (times scale) count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Imaginary parts closer than this (times scale) tie when labelling.
pub const TIE_TOL: f64 = 1e-9;
/// Roots closer than this (times scale) form one multiplicity cluster.
pub const CLUSTER_TOL: f64 = 1e-7;
/// Max entry of `P·conj(M)·P − M`, relative to `max(1, max|M_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// `|Im λ|` below this (times scale) counts as real.
pub const REALITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("unsupported matrix dimension {0} (must be 1..=8)")]
    Dimension(usize),
    #[error("matrix is not square ({rows} rows, row of length {cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("degenerate spectrum: eigenvalue gap {min_gap:.3e} below tolerance {tolerance:.3e}")]
    DegenerateSpectrum { min_gap: f64, tolerance: f64 },
    #[error("no parity operator declared for this family")]
    NotApplicable,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// Unordered multiset of eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
}

/// A group of roots that agree to within [`CLUSTER_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: Complex64,
    pub multiplicity: usize,
}

impl Spectrum {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max(1, max |λ|)`.
    pub fn scale(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(1.0, f64::max)
    }

    /// Smallest pairwise distance; infinite for fewer than two values.
    pub fn min_gap(&self) -> f64 {
        min_pairwise_gap(&self.values)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let s = self.scale();
        self.values.iter().all(|z| z.im.abs() <= tol * s)
    }

    /// Single-linkage clusters at [`CLUSTER_TOL`].
    pub fn clusters(&self) -> Vec<Cluster> {
        let tol = CLUSTER_TOL * self.scale();
        let n = self.values.len();
        let mut group: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in i + 1..n {
                if (self.values[i] - self.values[j]).norm() <= tol {
                    let (gi, gj) = (group[i], group[j]);
                    for g in group.iter_mut() {
                        if *g == gj {
                            *g = gi;
                        }
                    }
                }
            }
        }
        let mut seen: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        for &g in &group {
            if seen.contains(&g) {
                continue;
            }
            seen.push(g);
            let members: Vec<Complex64> = (0..n).filter(|&k| group[k] == g).map(|k| self.values[k]).collect();
            let center = members.iter().sum::<Complex64>() / members.len() as f64;
            out.push(Cluster {
                center,
                multiplicity: members.len(),
            });
        }
        out
    }
}

pub(crate) fn min_pairwise_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Eigenvalues ordered top to bottom: descending imaginary part, ties broken
/// by ascending real part. Position `k` carries label `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledSpectrum {
    values: Vec<Complex64>,
}

impl LabeledSpectrum {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Eigenvalue carrying the 1-based `label`.
    pub fn get(&self, label: usize) -> Option<Complex64> {
        label.checked_sub(1).and_then(|k| self.values.get(k).copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Orders a spectrum by the top-to-bottom labelling convention.
pub fn label(s: &Spectrum) -> Result<LabeledSpectrum, SpectraError> {
    let scale = s.scale();
    let tolerance = DEGENERACY_TOL * scale;
    let min_gap = s.min_gap();
    if min_gap <= tolerance {
        return Err(SpectraError::DegenerateSpectrum { min_gap, tolerance });
    }
    Ok(LabeledSpectrum {
        values: order_top_to_bottom(s.values(), TIE_TOL * scale),
    })
}

/// Deterministic for any input order of the same multiset: sort on a total
/// key, then re-sort runs of tied imaginary parts by real part.
pub(crate) fn order_top_to_bottom(values: &[Complex64], tie: f64) -> Vec<Complex64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    let mut start = 0;
    while start < v.len() {
        let mut end = start + 1;
        while end < v.len() && (v[end - 1].im - v[end].im).abs() <= tie {
            end += 1;
        }
        v[start..end].sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
        start = end;
    }
    v
}

/// Eigenvalues of the family member at `x`.
pub fn eigenvalues(f: &OperatorFamily, x: &ParameterPoint) -> Result<Spectrum, SpectraError> {
    let m = f.evaluate(x)?;
    roots(&char_poly(&m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PtPhase {
    Exact,
    Broken,
    NotSymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtReport {
    pub symmetric: bool,
    pub phase: PtPhase,
    pub max_violation: f64,
}

/// PT classification of a single matrix against parity `p` (time reversal is
/// complex conjugation).
pub fn pt_classify_matrix(m: &ComplexMatrix, parity: &ComplexMatrix) -> Result<PtReport, SpectraError> {
    let transformed = parity.matmul(&m.conj()).matmul(parity);
    let max_violation = transformed.sub(m).max_abs();
    let symmetric = max_violation <= SYMMETRY_TOL * m.max_abs().max(1.0);
    let phase = if !symmetric {
        PtPhase::NotSymmetric
    } else if roots(&char_poly(m))?.is_real(REALITY_TOL) {
        PtPhase::Exact
    } else {
        PtPhase::Broken
    };
    Ok(PtReport {
        symmetric,
        phase,
        max_violation,
    })
}

/// PT classification at a parameter point using the family's parity operator.
pub fn pt_classify(f: &OperatorFamily, x: &ParameterPoint) -> Result<PtReport, SpectraError> {
    let parity = f.parity().ok_or(SpectraError::NotApplicable)?;
    pt_classify_matrix(&f.evaluate(x)?, parity)
}
