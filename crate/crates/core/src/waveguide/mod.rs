//! Emulated waveguide measurements: integrate `i dE/dx = H E`, read an
//! eigenvalue off a single-mode profile, and repeat this along a loop to
//! obtain measured eigenvalue loci.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{FamilyError, OperatorFamily, ParameterPoint};
use crate::holonomy::{trace_with, DiscretizedPath, HolonomyError, SpectralTrace, SpectrumSource, TrackingOptions};
use crate::spectra::{eigenvalues, ComplexMatrix, SpectraError, Spectrum};

/// Largest tolerated relative change of `‖E‖²` in one step.
pub const MAX_ENERGY_DRIFT: f64 = 1e-2;
/// Share of leading samples left out of the eigenvalue fit.
pub const FIT_SKIP: f64 = 0.1;
const UNDERFLOW: f64 = 1e-250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveguideError {
    #[error("invalid step: dx = {dx}, x_max = {x_max}")]
    InvalidStep { dx: f64, x_max: f64 },
    #[error("field has {got} amplitudes, operator is {expected}x{expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("energy changed by {drift:.3e} in one step at x = {x:.6}; reduce dx (gain too strong for this resolution)")]
    StepTooLarge { x: f64, drift: f64 },
    #[error("amplitude of component {component} underflows")]
    Underflow { component: usize },
    #[error("log-linear fit residual {residual:.3e} exceeds {tolerance:.1e}; the seed is not a single mode")]
    PoorFit { residual: f64, tolerance: f64 },
    #[error("record has too few samples to fit ({0})")]
    ShortRecord(usize),
    #[error("could not build an eigenmode for λ = {0}")]
    NoMode(Complex64),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Family(#[from] FamilyError),
}

impl From<WaveguideError> for HolonomyError {
    fn from(e: WaveguideError) -> Self {
        match e {
            WaveguideError::Spectra(s) => HolonomyError::Spectra(s),
            WaveguideError::Family(f) => HolonomyError::Family(f),
            other => HolonomyError::Source(other.to_string()),
        }
    }
}

/// Amplitudes in each waveguide at position `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub x: f64,
    pub amplitudes: Vec<Complex64>,
}

impl FieldState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { x: 0.0, amplitudes }
    }

    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRecord {
    xs: Vec<f64>,
    states: Vec<Vec<Complex64>>,
    operator: ComplexMatrix,
}

impl PropagationRecord {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn states(&self) -> &[Vec<Complex64>] {
        &self.states
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }

    pub fn state(&self, k: usize) -> FieldState {
        FieldState {
            x: self.xs[k],
            amplitudes: self.states[k].clone(),
        }
    }

    pub fn last(&self) -> FieldState {
        self.state(self.xs.len() - 1)
    }

    /// CSV: `x`, then re/im of each amplitude.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.operator.dim();
        let mut header = vec!["x".to_string()];
        for k in 1..=n {
            header.push(format!("re_E{k}"));
            header.push(format!("im_E{k}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (x, s) in self.xs.iter().zip(&self.states) {
            let mut row = vec![format!("{x:.16e}")];
            for a in s {
                row.push(format!("{:.16e}", a.re));
                row.push(format!("{:.16e}", a.im));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Classical RK4 for `dE/dx = −i H E` from `e0.x` to `e0.x + x_max`. The
/// step is `x_max / ceil(x_max / dx)`, so it never exceeds `dx`.
pub fn propagate(h: &ComplexMatrix, e0: &FieldState, x_max: f64, dx: f64) -> Result<PropagationRecord, WaveguideError> {
    if !(dx.is_finite() && dx > 0.0 && x_max.is_finite() && x_max >= dx) {
        return Err(WaveguideError::InvalidStep { dx, x_max });
    }
    let n = h.dim();
    if e0.amplitudes.len() != n {
        return Err(WaveguideError::SizeMismatch {
            expected: n,
            got: e0.amplitudes.len(),
        });
    }
    let steps = ((x_max / dx) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let step = x_max / steps as f64;
    // A = −i H
    let a = h.scale(Complex64::new(0.0, -1.0));
    let f = |e: &[Complex64]| a.matvec(e);
    let axpy = |e: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        e.iter().zip(k).map(|(x, y)| x + y * s).collect()
    };
    let mut xs = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut e = e0.amplitudes.clone();
    xs.push(e0.x);
    states.push(e.clone());
    for k in 1..=steps {
        let k1 = f(&e);
        let k2 = f(&axpy(&e, &k1, 0.5 * step));
        let k3 = f(&axpy(&e, &k2, 0.5 * step));
        let k4 = f(&axpy(&e, &k3, step));
        let next: Vec<Complex64> = (0..n)
            .map(|i| e[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (step / 6.0))
            .collect();
        let before: f64 = e.iter().map(|z| z.norm_sqr()).sum();
        let after: f64 = next.iter().map(|z| z.norm_sqr()).sum();
        let x = e0.x + step * k as f64;
        if before > 0.0 {
            let drift = (after - before).abs() / before;
            if !(drift <= MAX_ENERGY_DRIFT) {
                return Err(WaveguideError::StepTooLarge { x, drift });
            }
        }
        e = next;
        xs.push(x);
        states.push(e.clone());
    }
    Ok(PropagationRecord {
        xs,
        states,
        operator: h.clone(),
    })
}

/// Eigenvalue read off one component of a single-mode record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    pub lambda: Complex64,
    /// RMS deviation of the complex log-amplitude from the fitted line.
    pub residual: f64,
}

/// Least-squares fit of `log E_k(x) = log E_k(0) − iλx` over the record
/// after dropping the first 10% of samples.
pub fn extract_eigenvalue(rec: &PropagationRecord, component: usize, tolerance: f64) -> Result<Extraction, WaveguideError> {
    let n = rec.operator.dim();
    if component >= n {
        return Err(WaveguideError::SizeMismatch {
            expected: n,
            got: component + 1,
        });
    }
    let skip = (rec.xs.len() as f64 * FIT_SKIP).floor() as usize;
    let xs = &rec.xs[skip..];
    if xs.len() < 3 {
        return Err(WaveguideError::ShortRecord(xs.len()));
    }
    let mut logs: Vec<Complex64> = Vec::with_capacity(xs.len());
    for s in &rec.states[skip..] {
        let a = s[component];
        if !(a.norm() > UNDERFLOW) || !a.norm().is_finite() {
            return Err(WaveguideError::Underflow { component });
        }
        let mut arg = a.arg();
        if let Some(prev) = logs.last() {
            let turns = ((prev.im - arg) / std::f64::consts::TAU).round();
            arg += turns * std::f64::consts::TAU;
        }
        logs.push(Complex64::new(a.norm().ln(), arg));
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let lbar = logs.iter().sum::<Complex64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxl: Complex64 = xs.iter().zip(&logs).map(|(x, l)| (l - lbar) * (x - xbar)).sum();
    let slope = sxl / sxx;
    let intercept = lbar - slope * xbar;
    let residual = (xs
        .iter()
        .zip(&logs)
        .map(|(x, l)| (l - intercept - slope * x).norm_sqr())
        .sum::<f64>()
        / m)
        .sqrt();
    if !(residual <= tolerance) {
        return Err(WaveguideError::PoorFit { residual, tolerance });
    }
    // slope = −iλ
    Ok(Extraction {
        lambda: slope * Complex64::new(0.0, 1.0),
        residual,
    })
}

/// Approximate eigenvector for `lambda` by shifted inverse iteration.
fn eigenmode(h: &ComplexMatrix, lambda: Complex64) -> Result<Vec<Complex64>, WaveguideError> {
    let n = h.dim();
    let scale = h.norm_inf().max(1.0);
    for shift_exp in [-10, -8, -6] {
        let mu = lambda + Complex64::new(10f64.powi(shift_exp) * scale, 0.0);
        let shifted = h.sub(&ComplexMatrix::identity(n).scale(mu));
        let mut v: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0, 0.1 * k as f64)).collect();
        let mut ok = true;
        for _ in 0..4 {
            match shifted.solve(&v) {
                Some(w) if w.iter().all(|z| z.is_finite()) => {
                    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if !(norm > 0.0) {
                        ok = false;
                        break;
                    }
                    v = w.into_iter().map(|z| z / norm).collect();
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(v);
        }
    }
    Err(WaveguideError::NoMode(lambda))
}

/// Controls for the eigenvalue measurement route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// Bound on `|Im λ| · x_max` (overall gain or loss of the seeded mode).
    pub gain_budget: f64,
    /// Bound on `(max Im λ_j − Im λ_k) · x_max` (growth of residual
    /// admixtures of faster-growing modes).
    pub contamination_budget: f64,
    /// Propagation length when no budget binds.
    pub max_length: f64,
    /// Bound on `max |λ| · dx`.
    pub phase_step: f64,
    pub min_steps: usize,
    pub fit_tolerance: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            gain_budget: 30.0,
            contamination_budget: 10.0,
            max_length: 10.0,
            phase_step: 0.004,
            min_steps: 200,
            fit_tolerance: 1e-6,
        }
    }
}

impl SimulationSettings {
    /// Propagation length and step for measuring `values[k]`.
    pub fn plan(&self, values: &[Complex64], k: usize) -> (f64, f64) {
        let im_k = values[k].im;
        let im_max = values.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
        let mut x_max = self.max_length;
        if im_k.abs() > 0.0 {
            x_max = x_max.min(self.gain_budget / im_k.abs());
        }
        if im_max - im_k > 0.0 {
            x_max = x_max.min(self.contamination_budget / (im_max - im_k));
        }
        let rate = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut dx = x_max / self.min_steps as f64;
        if rate > 0.0 {
            dx = dx.min(self.phase_step / rate);
        }
        (x_max, dx)
    }
}

/// One eigenvalue measured through propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMeasurement {
    /// Directly computed eigenvalue used to prepare the seed.
    pub theory: Complex64,
    pub measured: Complex64,
    pub residual: f64,
    pub component: usize,
    pub x_max: f64,
    pub dx: f64,
}

/// Seeds each theoretical eigenmode of `h`, propagates it and fits its
/// eigenvalue from the strongest component.
pub fn measure_eigenvalues(h: &ComplexMatrix, settings: &SimulationSettings) -> Result<Vec<ModeMeasurement>, WaveguideError> {
    let spectrum = crate::spectra::roots(&crate::spectra::char_poly(h))?;
    let values = spectrum.values().to_vec();
    (0..values.len())
        .map(|k| {
            let (rec, component) = seed_and_propagate(h, &values, k, settings)?;
            let fit = extract_eigenvalue(&rec, component, settings.fit_tolerance)?;
            let (x_max, dx) = settings.plan(&values, k);
            Ok(ModeMeasurement {
                theory: values[k],
                measured: fit.lambda,
                residual: fit.residual,
                component,
                x_max,
                dx,
            })
        })
        .collect()
}

/// Propagation of the `k`-th eigenmode of `h`, and the component it is
/// strongest in.
pub fn seed_and_propagate(
    h: &ComplexMatrix,
    values: &[Complex64],
    k: usize,
    settings: &SimulationSettings,
) -> Result<(PropagationRecord, usize), WaveguideError> {
    let mode = eigenmode(h, values[k])?;
    let component = (0..mode.len())
        .max_by(|&a, &b| mode[a].norm().total_cmp(&mode[b].norm()))
        .unwrap_or(0);
    let (x_max, dx) = settings.plan(values, k);
    Ok((propagate(h, &FieldState::new(mode), x_max, dx)?, component))
}

/// Spectrum source that measures eigenvalues through propagation.
pub struct PropagationSource<'a> {
    pub family: &'a OperatorFamily,
    pub settings: SimulationSettings,
}

impl SpectrumSource for PropagationSource<'_> {
    fn spectrum(&self, x: &ParameterPoint) -> Result<Spectrum, HolonomyError> {
        let h = self.family.evaluate(x)?;
        let measured = measure_eigenvalues(&h, &self.settings)?;
        Ok(Spectrum::new(measured.iter().map(|m| m.measured).collect()))
    }
}

/// Eigenvalue loci along `path` measured through propagation, matched by the
/// same continuation as direct tracing.
pub fn merging_path_measurement(
    f: &OperatorFamily,
    path: &DiscretizedPath,
    settings: &SimulationSettings,
    tracking: &TrackingOptions,
) -> Result<SpectralTrace, HolonomyError> {
    let source = PropagationSource {
        family: f,
        settings: *settings,
    };
    trace_with(&source, path, tracking)
}

/// Direct spectrum at `x`, for comparison with measured values.
pub fn direct_eigenvalues(f: &OperatorFamily, x: &ParameterPoint) -> Result<Vec<Complex64>, WaveguideError> {
    Ok(eigenvalues(f, x)?.values().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn t_at(re_z: f64, im_z: f64, cc: f64) -> ComplexMatrix {
        builtin("waveguide_T")
            .unwrap()
            .evaluate(&ParameterPoint::new(vec![re_z, im_z, cc]))
            .unwrap()
    }

    #[test]
    fn zero_operator_keeps_the_field() {
        let e0 = FieldState::new(vec![c(1.0, 0.5), c(-0.3, 0.0)]);
        let rec = propagate(&ComplexMatrix::zeros(2), &e0, 1.0, 0.1).unwrap();
        assert_eq!(rec.xs().len(), 11);
        assert_eq!(rec.last().amplitudes, e0.amplitudes);
        assert!((rec.last().x - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hermitian_evolution_conserves_energy() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.5, 0.2), c(0.0, 0.0)],
            vec![c(0.5, -0.2), c(-0.4, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.0)],
        ])
        .unwrap();
        let e0 = FieldState::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.0)]);
        let rec = propagate(&h, &e0, 10.0, 1e-3).unwrap();
        assert!((rec.last().energy() - e0.energy()).abs() < 1e-8);
    }

    #[test]
    fn real_eigenmode_only_rotates_its_phase() {
        let h = t_at(0.0, -1.0, -1.0);
        let lambda = c(3f64.sqrt(), 0.0);
        let mode = eigenmode(&h, lambda).unwrap();
        let rec = propagate(&h, &FieldState::new(mode.clone()), 5.0, 1e-3).unwrap();
        let end = rec.last();
        let phase = (c(0.0, -5.0) * lambda).exp();
        for (a, m) in end.amplitudes.iter().zip(&mode) {
            assert!((a - m * phase).norm() < 1e-9);
            assert!((a.norm() - m.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn extraction_recovers_sqrt3() {
        let h = t_at(0.0, -1.0, -1.0);
        let measured = measure_eigenvalues(&h, &SimulationSettings::default()).unwrap();
        let mut found = measured.iter().map(|m| m.measured).collect::<Vec<_>>();
        found.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (got, want) in found.iter().zip([-(3f64.sqrt()), 0.0, 3f64.sqrt()]) {
            assert!((got - c(want, 0.0)).norm() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn scalar_gain() {
        let h = ComplexMatrix::diagonal(&[c(0.0, 2.0)]);
        let rec = propagate(&h, &FieldState::new(vec![c(1.0, 0.0)]), 5.0, 1e-3).unwrap();
        assert!((rec.last().amplitudes[0].norm() - 10f64.exp()).abs() < 1e-6 * 10f64.exp());
        let fit = extract_eigenvalue(&rec, 0, 1e-6).unwrap();
        assert!((fit.lambda - c(0.0, 2.0)).norm() < 1e-9);
    }

    #[test]
    fn mixed_modes_are_a_poor_fit() {
        let h = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let e0 = FieldState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let rec = propagate(&h, &FieldState::new(vec![c(1.0, 0.0), c(0.0, 0.0)]), 5.0, 1e-2).unwrap();
        assert!(extract_eigenvalue(&rec, 0, 1e-6).is_ok());
        // a 2×2 coupler mixes both components
        let h = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.5]]).unwrap();
        let rec = propagate(&h, &e0, 5.0, 1e-2).unwrap();
        assert!(matches!(extract_eigenvalue(&rec, 0, 1e-6), Err(WaveguideError::PoorFit { .. })));
    }

    #[test]
    fn coarse_steps_under_strong_gain_are_rejected() {
        let h = ComplexMatrix::diagonal(&[c(0.0, 5.0)]);
        let err = propagate(&h, &FieldState::new(vec![c(1.0, 0.0)]), 1.0, 0.1).unwrap_err();
        assert!(matches!(err, WaveguideError::StepTooLarge { .. }));
    }

    #[test]
    fn invalid_steps_rejected() {
        let h = ComplexMatrix::zeros(1);
        let e0 = FieldState::new(vec![c(1.0, 0.0)]);
        assert!(propagate(&h, &e0, 1.0, 0.0).is_err());
        assert!(propagate(&h, &e0, 0.01, 0.1).is_err());
        assert!(propagate(&h, &FieldState::new(vec![]), 1.0, 0.1).is_err());
    }

    #[test]
    fn record_csv_layout() {
        let rec = propagate(&ComplexMatrix::zeros(2), &FieldState::new(vec![c(1.0, 0.0), c(0.0, 0.0)]), 1.0, 0.5).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x,re_E1,im_E1,re_E2,im_E2");
        assert_eq!(text.lines().count(), 4);
    }
}
