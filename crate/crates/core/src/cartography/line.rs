use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ladder_at, min_norm_step, singular_values, CartographyError, EPCandidate};
use crate::family::{OperatorFamily, ParameterPoint};
use crate::spectra::eigenvalues;

/// Corrector convergence: `|psc_j| ≤ LINE_TOL · natural magnitude`.
const LINE_TOL: f64 = 1e-11;
/// Junction when `σ_min(J) < JUNCTION_RATIO · ‖J‖`.
const JUNCTION_RATIO: f64 = 1e-6;
/// A higher ladder coefficient this small (relative) marks a junction.
const EVENT_TOL: f64 = 1e-6;
/// Eigenvalues within this (times scale) count towards the seed multiplicity.
const MULTIPLICITY_TOL: f64 = 1e-3;
const MAX_HALVINGS: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineOptions {
    /// Three coordinates to continue in; others stay at the seed values.
    /// Defaults to the family's first three parameters.
    #[serde(default)]
    pub axes: Option<[String; 3]>,
    pub step: f64,
    pub steps: usize,
    /// Continuation stops on leaving any of these intervals.
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    /// Start against the default tangent orientation.
    #[serde(default)]
    pub reverse: bool,
}

impl LineOptions {
    pub fn new(step: f64, steps: usize) -> Self {
        Self {
            axes: None,
            step,
            steps,
            bounds: BTreeMap::new(),
            reverse: false,
        }
    }

    pub fn bound(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.bounds.insert(name.to_string(), [lo, hi]);
        self
    }

    pub fn reversed(mut self) -> Self {
        self.reverse = !self.reverse;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum LineStop {
    Completed,
    Boundary,
    Junction { point: ParameterPoint },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineTrace {
    pub points: Vec<ParameterPoint>,
    pub stop: LineStop,
    /// Index `j` of the subresultant coefficient that was continued
    /// (0 for EP2 lines, 1 for EP3 lines, ...).
    pub ladder_index: usize,
}

/// Continues the EP line through `seed`; a junction is an error.
pub fn trace_line(f: &OperatorFamily, seed: &EPCandidate, opts: &LineOptions) -> Result<Vec<ParameterPoint>, CartographyError> {
    let t = trace_line_report(f, seed, opts)?;
    match t.stop {
        LineStop::Junction { point } => Err(CartographyError::JacobianDegenerate {
            point: point.coords().to_vec(),
            steps_completed: t.points.len() - 1,
        }),
        _ => Ok(t.points),
    }
}

/// Predictor-corrector continuation of the zero set of `psc_j(p, p′)` in three
/// real coordinates, where `j + 2` is the eigenvalue multiplicity at the seed.
/// For EP2 lines this is the discriminant itself; on EP3 lines the
/// discriminant vanishes to second order and the next coefficient is used.
pub fn trace_line_report(f: &OperatorFamily, seed: &EPCandidate, opts: &LineOptions) -> Result<LineTrace, CartographyError> {
    if !seed.refined {
        return Err(CartographyError::InvalidSeed("seed is not refined".into()));
    }
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(CartographyError::InvalidSeed(format!("step {} is not positive", opts.step)));
    }
    let axes = resolve_axes(f, opts)?;
    let bounds: Vec<(usize, [f64; 2])> = opts
        .bounds
        .iter()
        .map(|(name, b)| {
            f.param_index(name)
                .map(|k| (k, *b))
                .ok_or_else(|| CartographyError::InvalidSeed(format!("unknown bound `{name}`")))
        })
        .collect::<Result<_, _>>()?;
    let spectrum = eigenvalues(f, &seed.location)?;
    let tol = MULTIPLICITY_TOL * spectrum.scale();
    let values = spectrum.values();
    let multiplicity = values
        .iter()
        .map(|a| values.iter().filter(|b| (*a - **b).norm() <= tol).count())
        .max()
        .unwrap_or(1);
    if multiplicity < 2 {
        return Err(CartographyError::InvalidSeed("no repeated eigenvalue at the seed".into()));
    }
    let j = multiplicity - 2;
    let length = bounds.iter().map(|(_, b)| b[1] - b[0]).fold(1.0_f64, f64::max);
    let line = Line {
        f,
        axes,
        j,
        h: 1e-6 * length,
        has_event: j + 1 < f.dim().saturating_sub(1),
    };

    let mut x = line
        .correct(&seed.location)?
        .ok_or_else(|| CartographyError::InvalidSeed("corrector does not converge at the seed".into()))?;
    let jac = line.jacobian(&x)?;
    let (s1, s2) = singular_values(&jac);
    if s1 == 0.0 || s2 < JUNCTION_RATIO * s1 {
        return Err(CartographyError::JacobianDegenerate {
            point: x.coords().to_vec(),
            steps_completed: 0,
        });
    }
    let mut tangent = normalize(cross(&jac[0], &jac[1]));
    if opts.reverse {
        tangent = tangent.map(|c| -c);
    }
    let mut points = vec![x.clone()];
    for _ in 0..opts.steps {
        let mut h = opts.step;
        let mut halvings = 0;
        let accepted = loop {
            if let Some(h_event) = line.event_distance(&x, &tangent)? {
                if h_event > 0.0 && h_event < h {
                    h = h_event;
                }
            }
            match line.advance(&x, &tangent, h)? {
                Some(next) => break Some(next),
                None => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        break None;
                    }
                    h *= 0.5;
                }
            }
        };
        let Some((y, t_new)) = accepted else {
            return Ok(LineTrace {
                points,
                stop: LineStop::Junction { point: x },
                ladder_index: j,
            });
        };
        if bounds.iter().any(|(k, b)| y[*k] < b[0] || y[*k] > b[1]) {
            return Ok(LineTrace {
                points,
                stop: LineStop::Boundary,
                ladder_index: j,
            });
        }
        points.push(y.clone());
        if line.at_event(&y)? {
            return Ok(LineTrace {
                points,
                stop: LineStop::Junction { point: y },
                ladder_index: j,
            });
        }
        x = y;
        tangent = t_new;
    }
    Ok(LineTrace {
        points,
        stop: LineStop::Completed,
        ladder_index: j,
    })
}

fn resolve_axes(f: &OperatorFamily, opts: &LineOptions) -> Result<[usize; 3], CartographyError> {
    if f.params().len() < 3 {
        return Err(CartographyError::InvalidSeed("line tracing needs at least three parameters".into()));
    }
    let names: [String; 3] = match &opts.axes {
        Some(a) => a.clone(),
        None => [f.params()[0].clone(), f.params()[1].clone(), f.params()[2].clone()],
    };
    let mut axes = [0; 3];
    for (k, name) in names.iter().enumerate() {
        axes[k] = f
            .param_index(name)
            .ok_or_else(|| CartographyError::InvalidSeed(format!("unknown axis `{name}`")))?;
        if axes[..k].contains(&axes[k]) {
            return Err(CartographyError::InvalidSeed(format!("axis `{name}` repeated")));
        }
    }
    Ok(axes)
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

struct Line<'a> {
    f: &'a OperatorFamily,
    axes: [usize; 3],
    j: usize,
    h: f64,
    has_event: bool,
}

impl Line<'_> {
    fn shifted(&self, x: &ParameterPoint, d: &[f64]) -> ParameterPoint {
        let mut y = x.clone();
        for (k, &a) in self.axes.iter().enumerate() {
            y.coords_mut()[a] += d[k];
        }
        y
    }

    fn value(&self, x: &ParameterPoint) -> Result<(Complex64, f64), CartographyError> {
        ladder_at(self.f, x, self.j)
    }

    fn gradient(&self, x: &ParameterPoint, j: usize) -> Result<[Complex64; 3], CartographyError> {
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let mut d = [0.0; 3];
            d[k] = self.h;
            let (p, _) = ladder_at(self.f, &self.shifted(x, &d), j)?;
            d[k] = -self.h;
            let (m, _) = ladder_at(self.f, &self.shifted(x, &d), j)?;
            *gk = (p - m) / (2.0 * self.h);
        }
        Ok(g)
    }

    fn jacobian(&self, x: &ParameterPoint) -> Result<[Vec<f64>; 2], CartographyError> {
        let g = self.gradient(x, self.j)?;
        Ok([g.iter().map(|z| z.re).collect(), g.iter().map(|z| z.im).collect()])
    }

    /// Newton with minimum-norm steps back onto the zero set.
    fn correct(&self, start: &ParameterPoint) -> Result<Option<ParameterPoint>, CartographyError> {
        let mut x = start.clone();
        let (mut v, mut norm) = self.value(&x)?;
        for _ in 0..30 {
            if v.norm() <= LINE_TOL * norm {
                return Ok(Some(x));
            }
            let jac = self.jacobian(&x)?;
            let Some(step) = min_norm_step(&jac, [v.re, v.im]) else {
                return Ok(None);
            };
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let y = self.shifted(&x, &step.iter().map(|s| s * lambda).collect::<Vec<_>>());
                let (vy, ny) = self.value(&y)?;
                if vy.norm() < v.norm() {
                    x = y;
                    v = vy;
                    norm = ny;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok((v.norm() <= LINE_TOL * norm).then_some(x))
    }

    /// One predictor-corrector step of length `h`, or `None` if it must be
    /// shortened.
    fn advance(
        &self,
        x: &ParameterPoint,
        tangent: &[f64; 3],
        h: f64,
    ) -> Result<Option<(ParameterPoint, [f64; 3])>, CartographyError> {
        let predicted = self.shifted(x, &tangent.map(|c| c * h));
        let Some(y) = self.correct(&predicted)? else {
            return Ok(None);
        };
        if y.distance(&predicted) > 0.5 * h {
            return Ok(None);
        }
        let jac = self.jacobian(&y)?;
        let (s1, s2) = singular_values(&jac);
        if s1 == 0.0 || s2 < JUNCTION_RATIO * s1 {
            return Ok(None);
        }
        let mut t = normalize(cross(&jac[0], &jac[1]));
        let cos: f64 = t.iter().zip(tangent).map(|(a, b)| a * b).sum();
        if cos < 0.0 {
            t = t.map(|c| -c);
        }
        if cos.abs() < 0.9 {
            return Ok(None);
        }
        Ok(Some((y, t)))
    }

    /// Arc length along `tangent` at which the next ladder coefficient is
    /// predicted to vanish (linearised), if it does so ahead of `x`.
    fn event_distance(&self, x: &ParameterPoint, tangent: &[f64; 3]) -> Result<Option<f64>, CartographyError> {
        if !self.has_event {
            return Ok(None);
        }
        let (g, _) = ladder_at(self.f, x, self.j + 1)?;
        let grad = self.gradient(x, self.j + 1)?;
        let dg: Complex64 = grad.iter().zip(tangent).map(|(z, t)| z * t).sum();
        if dg.norm_sqr() == 0.0 {
            return Ok(None);
        }
        let s = -(g * dg.conj()).re / dg.norm_sqr();
        // only trust the estimate when the linear model nearly hits zero
        let miss = (g + dg * s).norm();
        Ok((s > 0.0 && miss <= 0.1 * g.norm()).then_some(s))
    }

    fn at_event(&self, x: &ParameterPoint) -> Result<bool, CartographyError> {
        if !self.has_event {
            return Ok(false);
        }
        let (g, norm) = ladder_at(self.f, x, self.j + 1)?;
        Ok(g.norm() <= EVENT_TOL * norm)
    }
}
