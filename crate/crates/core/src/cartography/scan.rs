use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{discriminant_at, min_norm_step, CartographyError, EPCandidate};
use crate::family::{OperatorFamily, ParameterPoint};
use crate::holonomy::{Plane, ResolvedPlane};

/// A refined zero satisfies `|Δ| ≤ REFINE_TOL · max(1, ‖M‖∞)^{n(n−1)}`.
pub const REFINE_TOL: f64 = 1e-12;

const NEWTON_ITERATIONS: usize = 80;
/// Newton may drift this many grid cells from its starting node.
const MAX_DRIFT_CELLS: f64 = 4.0;

/// Rectangular grid on an axis-aligned parameter plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub free_axes: [String; 2],
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// `[[u_min, u_max], [v_min, v_max]]`.
    pub window: [[f64; 2]; 2],
    /// Node counts along each free axis.
    pub resolution: [usize; 2],
}

impl PlaneSpec {
    pub fn new(u: &str, v: &str, fixed: &[(&str, f64)], window: [[f64; 2]; 2], resolution: [usize; 2]) -> Self {
        Self {
            free_axes: [u.to_string(), v.to_string()],
            fixed: fixed.iter().map(|(k, x)| (k.to_string(), *x)).collect(),
            window,
            resolution,
        }
    }

    pub fn plane(&self) -> Plane {
        Plane {
            axes: self.free_axes.clone(),
            fixed: self.fixed.clone(),
        }
    }

    fn validate(&self, f: &OperatorFamily) -> Result<ResolvedPlane, CartographyError> {
        if self.resolution.iter().any(|&r| r < 16) {
            return Err(CartographyError::InvalidPlane(format!(
                "resolution {:?} is below 16×16",
                self.resolution
            )));
        }
        for (axis, w) in self.free_axes.iter().zip(&self.window) {
            if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
                return Err(CartographyError::InvalidPlane(format!("window for `{axis}` is empty or not finite")));
            }
        }
        self.plane()
            .resolve(f.params())
            .map_err(|e| CartographyError::InvalidPlane(e.to_string()))
    }

    /// Node coordinate along `axis`; symmetric windows hit their centre exactly.
    pub fn node(&self, axis: usize, i: usize) -> f64 {
        let s = i as f64 / (self.resolution[axis] - 1) as f64;
        self.window[axis][0] * (1.0 - s) + self.window[axis][1] * s
    }

    fn cell(&self, axis: usize) -> f64 {
        (self.window[axis][1] - self.window[axis][0]) / (self.resolution[axis] - 1) as f64
    }

    fn extent(&self, axis: usize) -> f64 {
        self.window[axis][1] - self.window[axis][0]
    }
}

/// Complex discriminant on every node of a plane grid, row-major in the
/// second axis (`index = j · nu + i`).
#[derive(Debug, Clone)]
pub struct DiscriminantField {
    spec: PlaneSpec,
    plane: ResolvedPlane,
    values: Vec<Complex64>,
    norms: Vec<f64>,
}

/// Evaluates the discriminant on every node of `plane`.
pub fn scan_plane(f: &OperatorFamily, plane: &PlaneSpec) -> Result<DiscriminantField, CartographyError> {
    let resolved = plane.validate(f)?;
    let [nu, nv] = plane.resolution;
    let evaluated: Vec<Result<(Complex64, f64), CartographyError>> = (0..nu * nv)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % nu, k / nu);
            discriminant_at(f, &resolved.point(plane.node(0, i), plane.node(1, j)))
        })
        .collect();
    let mut values = Vec::with_capacity(nu * nv);
    let mut norms = Vec::with_capacity(nu * nv);
    for r in evaluated {
        let (d, n) = r?;
        values.push(d);
        norms.push(n);
    }
    Ok(DiscriminantField {
        spec: plane.clone(),
        plane: resolved,
        values,
        norms,
    })
}

impl DiscriminantField {
    pub fn spec(&self) -> &PlaneSpec {
        &self.spec
    }

    pub fn plane(&self) -> &ResolvedPlane {
        &self.plane
    }

    pub fn resolution(&self) -> [usize; 2] {
        self.spec.resolution
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.spec.resolution[0] + i]
    }

    /// `|Δ|` divided by its natural magnitude at node `(i, j)`.
    pub fn relative(&self, i: usize, j: usize) -> f64 {
        let k = j * self.spec.resolution[0] + i;
        self.values[k].norm() / self.norms[k]
    }

    pub fn point(&self, i: usize, j: usize) -> ParameterPoint {
        self.plane.point(self.spec.node(0, i), self.spec.node(1, j))
    }

    /// Grid nodes whose `|Δ|` is no larger than any of their neighbours and
    /// whose relative `|Δ|` is at most `threshold`.
    pub fn local_minima(&self, threshold: f64) -> Vec<(usize, usize)> {
        let [nu, nv] = self.spec.resolution;
        let mut out = Vec::new();
        for j in 0..nv {
            for i in 0..nu {
                if self.relative(i, j) > threshold {
                    continue;
                }
                let here = self.value(i, j).norm();
                let mut is_min = true;
                'nb: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= nu as i64 || jj >= nv as i64 {
                            continue;
                        }
                        if self.value(ii as usize, jj as usize).norm() < here {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// CSV: both axis values, then re/im/abs of the discriminant.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let [nu, nv] = self.spec.resolution;
        writeln!(w, "{},{},re_disc,im_disc,abs_disc", self.spec.free_axes[0], self.spec.free_axes[1])?;
        for j in 0..nv {
            for i in 0..nu {
                let d = self.value(i, j);
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.spec.node(0, i),
                    self.spec.node(1, j),
                    d.re,
                    d.im,
                    d.norm()
                )?;
            }
        }
        Ok(())
    }
}

/// Local minima of `|Δ|` with relative size at most `threshold`, each polished
/// by Newton's method on `(Re Δ, Im Δ)` over the two free coordinates.
/// Candidates that fail to converge are returned unrefined; duplicates are
/// merged.
pub fn refine_zeros(f: &OperatorFamily, field: &DiscriminantField, threshold: f64) -> Vec<EPCandidate> {
    let minima = field.local_minima(threshold);
    let mut cands: Vec<EPCandidate> = minima.par_iter().map(|&(i, j)| polish(f, field, i, j)).collect();
    cands.sort_by(|a, b| b.refined.cmp(&a.refined).then(a.residual.total_cmp(&b.residual)));
    let spec = field.spec();
    let merge = 1e-6 * spec.extent(0).hypot(spec.extent(1));
    let mut kept: Vec<EPCandidate> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| k.location.distance(&c.location) > merge) {
            kept.push(c);
        }
    }
    let axes = field.plane().axes();
    kept.sort_by(|a, b| {
        a.location[axes[0]]
            .total_cmp(&b.location[axes[0]])
            .then(a.location[axes[1]].total_cmp(&b.location[axes[1]]))
    });
    kept
}

fn polish(f: &OperatorFamily, field: &DiscriminantField, i: usize, j: usize) -> EPCandidate {
    let spec = field.spec();
    let plane = field.plane();
    let start = [spec.node(0, i), spec.node(1, j)];
    let eval = |u: f64, v: f64| discriminant_at(f, &plane.point(u, v)).ok();
    let unrefined = EPCandidate {
        location: field.point(i, j),
        refined: false,
        residual: field.value(i, j).norm(),
        signature: None,
        probe_radius: None,
    };
    let Some((mut d, mut norm)) = eval(start[0], start[1]) else {
        return unrefined;
    };
    let mut x = start;
    let h = [1e-6 * spec.extent(0), 1e-6 * spec.extent(1)];
    let cell = [spec.cell(0), spec.cell(1)];
    // Iterate to stagnation: the residual tolerance alone is too loose near
    // higher-order structure, where Δ is small far from its zero.
    for _ in 0..NEWTON_ITERATIONS {
        if d.norm() == 0.0 {
            break;
        }
        let mut jac = [vec![0.0; 2], vec![0.0; 2]];
        for axis in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h[axis];
            xm[axis] -= h[axis];
            let (Some((dp, _)), Some((dm, _))) = (eval(xp[0], xp[1]), eval(xm[0], xm[1])) else {
                return unrefined;
            };
            let g = (dp - dm) / (2.0 * h[axis]);
            jac[0][axis] = g.re;
            jac[1][axis] = g.im;
        }
        let Some(step) = min_norm_step(&jac, [d.re, d.im]) else {
            return unrefined;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let y = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if let Some((dy, ny)) = eval(y[0], y[1]) {
                if dy.norm() < d.norm() {
                    accepted = Some((y, dy, ny));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((y, dy, ny)) = accepted else {
            break;
        };
        let drift = ((y[0] - start[0]) / cell[0]).hypot((y[1] - start[1]) / cell[1]);
        if drift > MAX_DRIFT_CELLS {
            return unrefined;
        }
        let moved = ((y[0] - x[0]) / spec.extent(0)).hypot((y[1] - x[1]) / spec.extent(1));
        x = y;
        d = dy;
        norm = ny;
        if moved < 1e-15 {
            break;
        }
    }
    if d.norm() <= REFINE_TOL * norm {
        EPCandidate {
            location: plane.point(x[0], x[1]),
            refined: true,
            residual: d.norm(),
            signature: None,
            probe_radius: None,
        }
    } else {
        unrefined
    }
}
