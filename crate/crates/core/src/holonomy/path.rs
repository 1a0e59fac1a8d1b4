use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::HolonomyError;
use crate::family::ParameterPoint;

/// Relative tolerance for snapping segment endpoints together.
pub const JOIN_TOL: f64 = 1e-9;

/// Axis-aligned 2-plane: two free coordinates, every other parameter fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plane {
    pub axes: [String; 2],
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

/// A plane bound to a concrete parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPlane {
    axes: [usize; 2],
    base: ParameterPoint,
}

impl Plane {
    pub fn new(u: &str, v: &str, fixed: &[(&str, f64)]) -> Self {
        Self {
            axes: [u.to_string(), v.to_string()],
            fixed: fixed.iter().map(|(k, x)| (k.to_string(), *x)).collect(),
        }
    }

    pub fn resolve(&self, params: &[String]) -> Result<ResolvedPlane, HolonomyError> {
        let find = |name: &str| {
            params
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| HolonomyError::DegenerateSpec(format!("unknown plane axis `{name}`")))
        };
        let axes = [find(&self.axes[0])?, find(&self.axes[1])?];
        if axes[0] == axes[1] {
            return Err(HolonomyError::DegenerateSpec("plane axes coincide".into()));
        }
        let mut base = vec![0.0; params.len()];
        for (name, value) in &self.fixed {
            let k = find(name)?;
            if axes.contains(&k) {
                return Err(HolonomyError::DegenerateSpec(format!("`{name}` is both free and fixed")));
            }
            if !value.is_finite() {
                return Err(HolonomyError::DegenerateSpec(format!("`{name}` is not finite")));
            }
            base[k] = *value;
        }
        for (k, name) in params.iter().enumerate() {
            if !axes.contains(&k) && !self.fixed.contains_key(name) {
                return Err(HolonomyError::DegenerateSpec(format!("parameter `{name}` is neither free nor fixed")));
            }
        }
        Ok(ResolvedPlane {
            axes,
            base: ParameterPoint::new(base),
        })
    }
}

impl ResolvedPlane {
    pub fn axes(&self) -> [usize; 2] {
        self.axes
    }

    pub fn point(&self, u: f64, v: f64) -> ParameterPoint {
        let mut p = self.base.clone();
        p.coords_mut()[self.axes[0]] = u;
        p.coords_mut()[self.axes[1]] = v;
        p
    }

    pub fn project(&self, x: &ParameterPoint) -> [f64; 2] {
        [x[self.axes[0]], x[self.axes[1]]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    #[default]
    #[serde(alias = "ccw")]
    CCW,
    #[serde(alias = "cw")]
    CW,
}

/// A point either by parameter name or as a coordinate list in family order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Named(BTreeMap<String, f64>),
    Coords(Vec<f64>),
}

impl PointSpec {
    pub fn resolve(&self, params: &[String]) -> Result<ParameterPoint, HolonomyError> {
        let coords = match self {
            PointSpec::Coords(c) => {
                if c.len() != params.len() {
                    return Err(HolonomyError::DegenerateSpec(format!(
                        "point has {} coordinates, family has {}",
                        c.len(),
                        params.len()
                    )));
                }
                c.clone()
            }
            PointSpec::Named(m) => {
                if let Some(extra) = m.keys().find(|k| !params.contains(k)) {
                    return Err(HolonomyError::DegenerateSpec(format!("unknown parameter `{extra}`")));
                }
                params
                    .iter()
                    .map(|p| {
                        m.get(p)
                            .copied()
                            .ok_or_else(|| HolonomyError::DegenerateSpec(format!("point misses `{p}`")))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        let p = ParameterPoint::new(coords);
        if !p.is_finite() {
            return Err(HolonomyError::DegenerateSpec("non-finite point".into()));
        }
        Ok(p)
    }
}

/// Declarative path description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Circle {
        plane: Plane,
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        orientation: Orientation,
        #[serde(default)]
        start_angle: f64,
    },
    Polyline {
        points: Vec<PointSpec>,
    },
    /// Executed first to last.
    Concat {
        parts: Vec<PathSpec>,
    },
    Reverse {
        path: Box<PathSpec>,
    },
}

impl PathSpec {
    pub fn circle(plane: Plane, center: [f64; 2], radius: f64, orientation: Orientation, start_angle: f64) -> Self {
        PathSpec::Circle {
            plane,
            center,
            radius,
            orientation,
            start_angle,
        }
    }

    pub fn reversed(self) -> Self {
        PathSpec::Reverse { path: Box::new(self) }
    }

    pub fn then(self, next: PathSpec) -> Self {
        match self {
            PathSpec::Concat { mut parts } => {
                parts.push(next);
                PathSpec::Concat { parts }
            }
            first => PathSpec::Concat {
                parts: vec![first, next],
            },
        }
    }
}

/// Geometric piece a sample lies on; used to place bisection midpoints on
/// the true curve rather than on the chord.
#[derive(Debug, Clone, PartialEq)]
enum Curve {
    Arc {
        plane: ResolvedPlane,
        center: [f64; 2],
        radius: f64,
        angle0: f64,
        sweep: f64,
    },
    Line {
        from: ParameterPoint,
        to: ParameterPoint,
    },
}

impl Curve {
    fn at(&self, s: f64) -> ParameterPoint {
        match self {
            Curve::Arc {
                plane,
                center,
                radius,
                angle0,
                sweep,
            } => {
                let a = angle0 + sweep * s;
                plane.point(center[0] + radius * a.cos(), center[1] + radius * a.sin())
            }
            Curve::Line { from, to } => from.lerp(to, s),
        }
    }

    fn length(&self) -> f64 {
        match self {
            Curve::Arc { radius, sweep, .. } => radius * sweep.abs(),
            Curve::Line { from, to } => from.distance(to),
        }
    }

    fn reversed(&self) -> Self {
        match self {
            Curve::Arc {
                plane,
                center,
                radius,
                angle0,
                sweep,
            } => Curve::Arc {
                plane: plane.clone(),
                center: *center,
                radius: *radius,
                angle0: angle0 + sweep,
                sweep: -sweep,
            },
            Curve::Line { from, to } => Curve::Line {
                from: to.clone(),
                to: from.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Locator {
    piece: usize,
    s: f64,
}

/// One path sample with its global path parameter `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: ParameterPoint,
    pub t: f64,
    loc: Option<Locator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPath {
    samples: Vec<Sample>,
    pieces: Vec<Curve>,
    is_loop: bool,
}

/// Samples `spec` for a family with parameter names `params`.
pub fn discretize(spec: &PathSpec, params: &[String], min_samples: usize) -> Result<DiscretizedPath, HolonomyError> {
    let mut path = discretize_inner(spec, params, min_samples)?;
    path.assign_t();
    Ok(path)
}

fn discretize_inner(spec: &PathSpec, params: &[String], min_samples: usize) -> Result<DiscretizedPath, HolonomyError> {
    match spec {
        PathSpec::Circle {
            plane,
            center,
            radius,
            orientation,
            start_angle,
        } => {
            if min_samples < 16 {
                return Err(HolonomyError::DegenerateSpec("circles need at least 16 samples".into()));
            }
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(HolonomyError::DegenerateSpec(format!("circle radius {radius} is not positive")));
            }
            if !(center.iter().all(|c| c.is_finite()) && start_angle.is_finite()) {
                return Err(HolonomyError::DegenerateSpec("non-finite circle geometry".into()));
            }
            let plane = plane.resolve(params)?;
            let sweep = match orientation {
                Orientation::CCW => TAU,
                Orientation::CW => -TAU,
            };
            let arc = Curve::Arc {
                plane,
                center: *center,
                radius: *radius,
                angle0: *start_angle,
                sweep,
            };
            let mut samples: Vec<Sample> = (0..min_samples)
                .map(|k| {
                    let s = k as f64 / min_samples as f64;
                    Sample {
                        point: arc.at(s),
                        t: 0.0,
                        loc: Some(Locator { piece: 0, s }),
                    }
                })
                .collect();
            let mut last = samples[0].clone();
            last.loc = Some(Locator { piece: 0, s: 1.0 });
            samples.push(last);
            Ok(DiscretizedPath {
                samples,
                pieces: vec![arc],
                is_loop: true,
            })
        }
        PathSpec::Polyline { points } => {
            let mut pts: Vec<ParameterPoint> = Vec::with_capacity(points.len());
            for p in points {
                let p = p.resolve(params)?;
                if pts.last() != Some(&p) {
                    pts.push(p);
                }
            }
            match pts.len() {
                0 => Err(HolonomyError::DegenerateSpec("empty polyline".into())),
                1 => Ok(DiscretizedPath::from_points(vec![pts[0].clone(), pts[0].clone()])),
                _ => {
                    let pieces: Vec<Curve> = pts
                        .windows(2)
                        .map(|w| Curve::Line {
                            from: w[0].clone(),
                            to: w[1].clone(),
                        })
                        .collect();
                    let total: f64 = pieces.iter().map(Curve::length).sum();
                    let mut samples = vec![Sample {
                        point: pts[0].clone(),
                        t: 0.0,
                        loc: Some(Locator { piece: 0, s: 0.0 }),
                    }];
                    for (k, piece) in pieces.iter().enumerate() {
                        let steps = ((min_samples.max(1) as f64 * piece.length() / total).ceil() as usize).max(1);
                        for j in 1..=steps {
                            let s = j as f64 / steps as f64;
                            let point = if j == steps { pts[k + 1].clone() } else { piece.at(s) };
                            samples.push(Sample {
                                point,
                                t: 0.0,
                                loc: Some(Locator { piece: k, s }),
                            });
                        }
                    }
                    let is_loop = pts.first() == pts.last();
                    Ok(DiscretizedPath {
                        samples,
                        pieces,
                        is_loop,
                    })
                }
            }
        }
        PathSpec::Concat { parts } => {
            if parts.is_empty() {
                return Err(HolonomyError::DegenerateSpec("empty concatenation".into()));
            }
            let parts = parts
                .iter()
                .map(|p| discretize_inner(p, params, min_samples))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&DiscretizedPath> = parts.iter().collect();
            DiscretizedPath::concat_raw(&refs)
        }
        PathSpec::Reverse { path } => Ok(discretize_inner(path, params, min_samples)?.reversed_raw()),
    }
}

fn joins(a: &ParameterPoint, b: &ParameterPoint) -> bool {
    let scale = a.coords().iter().chain(b.coords()).fold(1.0_f64, |m, x| m.max(x.abs()));
    a.distance(b) <= JOIN_TOL * scale
}

impl DiscretizedPath {
    /// Free path through explicit points; bisection uses linear interpolation.
    /// A path whose first and last points coincide is a loop.
    pub fn from_points(points: Vec<ParameterPoint>) -> Self {
        let n = points.len();
        let is_loop = n >= 2 && points.first() == points.last();
        let samples = points
            .into_iter()
            .enumerate()
            .map(|(k, point)| Sample {
                point,
                t: if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 },
                loc: None,
            })
            .collect();
        let mut p = Self {
            samples,
            pieces: Vec::new(),
            is_loop,
        };
        p.assign_t();
        p
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn points(&self) -> Vec<ParameterPoint> {
        self.samples.iter().map(|s| s.point.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_loop(&self) -> bool {
        self.is_loop
    }

    pub fn first(&self) -> &ParameterPoint {
        &self.samples[0].point
    }

    pub fn last(&self) -> &ParameterPoint {
        &self.samples[self.samples.len() - 1].point
    }

    /// Same samples, never treated as a loop.
    pub fn into_open(mut self) -> Self {
        self.is_loop = false;
        self
    }

    pub fn reversed(&self) -> Self {
        let mut r = self.clone().reversed_raw();
        r.assign_t();
        r
    }

    fn reversed_raw(mut self) -> Self {
        let np = self.pieces.len();
        self.samples.reverse();
        for s in &mut self.samples {
            s.t = 1.0 - s.t;
            if let Some(loc) = &mut s.loc {
                loc.piece = np - 1 - loc.piece;
                loc.s = 1.0 - loc.s;
            }
        }
        self.pieces = self.pieces.iter().rev().map(Curve::reversed).collect();
        self
    }

    /// Joins paths end to start. Endpoints within `JOIN_TOL` are snapped; the
    /// result is a loop when its ends coincide.
    pub fn concat(parts: &[&DiscretizedPath]) -> Result<Self, HolonomyError> {
        let mut p = Self::concat_raw(parts)?;
        p.assign_t();
        Ok(p)
    }

    fn concat_raw(parts: &[&DiscretizedPath]) -> Result<Self, HolonomyError> {
        let first = parts
            .first()
            .ok_or_else(|| HolonomyError::DegenerateSpec("empty concatenation".into()))?;
        let mut out = (*first).clone();
        for (k, part) in parts.iter().enumerate().skip(1) {
            if part.first().dim() != out.first().dim() {
                return Err(HolonomyError::SizeMismatch);
            }
            if !joins(out.last(), part.first()) {
                return Err(HolonomyError::Discontinuous {
                    segment: k,
                    gap: out.last().distance(part.first()),
                });
            }
            let offset = out.pieces.len();
            out.pieces.extend(part.pieces.iter().cloned());
            for s in part.samples.iter().skip(1) {
                out.samples.push(Sample {
                    point: s.point.clone(),
                    t: s.t,
                    loc: s.loc.map(|l| Locator {
                        piece: l.piece + offset,
                        s: l.s,
                    }),
                });
            }
        }
        // stationary pieces (zero bridges) leave repeated samples behind
        out.samples.dedup_by(|b, a| a.point == b.point);
        if out.samples.len() == 1 {
            let only = out.samples[0].clone();
            out.samples.push(only);
        }
        let n = out.samples.len();
        if n >= 2 && joins(out.first(), out.last()) {
            out.samples[n - 1].point = out.samples[0].point.clone();
            out.is_loop = true;
        } else {
            out.is_loop = false;
        }
        Ok(out)
    }

    /// Same pieces, new sample list (used by the tracer after bisection).
    pub(crate) fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            pieces: self.pieces.clone(),
            is_loop: self.is_loop,
        }
    }

    /// Sets `t` from cumulative piece length, or from sample spacing on free
    /// paths.
    fn assign_t(&mut self) {
        let n = self.samples.len();
        if n < 2 {
            return;
        }
        let mut cum = vec![0.0; n];
        for k in 1..n {
            cum[k] = cum[k - 1] + self.samples[k - 1].point.distance(&self.samples[k].point);
        }
        let total = cum[n - 1];
        for (k, s) in self.samples.iter_mut().enumerate() {
            s.t = if total > 0.0 {
                cum[k] / total
            } else {
                k as f64 / (n - 1) as f64
            };
        }
    }

    /// Point halfway between two adjacent samples, on the underlying curve
    /// when both lie on the same piece.
    pub fn midpoint(&self, a: &Sample, b: &Sample) -> Sample {
        let t = 0.5 * (a.t + b.t);
        if let Some(lb) = b.loc {
            let sa = match a.loc {
                Some(la) if la.piece == lb.piece => Some(la.s),
                Some(la) if la.piece + 1 == lb.piece && la.s == 1.0 => Some(0.0),
                _ => None,
            };
            if let Some(sa) = sa {
                let s = 0.5 * (sa + lb.s);
                return Sample {
                    point: self.pieces[lb.piece].at(s),
                    t,
                    loc: Some(Locator { piece: lb.piece, s }),
                };
            }
        }
        Sample {
            point: a.point.lerp(&b.point, 0.5),
            t,
            loc: None,
        }
    }

    /// Index of the geometric piece a sample lies on, if any.
    pub fn piece_of(&self, s: &Sample) -> Option<usize> {
        s.loc.map(|l| l.piece)
    }

    /// Replaces sample points by `f(t, point)`; endpoints of a loop are kept
    /// identical. The result is a free path.
    pub fn map_points(&self, mut f: impl FnMut(f64, &ParameterPoint) -> ParameterPoint) -> Self {
        let mut pts: Vec<ParameterPoint> = self.samples.iter().map(|s| f(s.t, &s.point)).collect();
        if self.is_loop {
            let n = pts.len();
            pts[n - 1] = pts[0].clone();
        }
        let mut p = Self::from_points(pts);
        p.is_loop = self.is_loop;
        p
    }
}

/// Signed number of turns of `path`, projected onto the plane of coordinates
/// `axes`, around `point`.
pub fn winding_number(path: &DiscretizedPath, axes: [usize; 2], point: [f64; 2]) -> f64 {
    let angle = |x: &ParameterPoint| (x[axes[1]] - point[1]).atan2(x[axes[0]] - point[0]);
    let mut total = 0.0;
    for w in path.samples().windows(2) {
        let mut d = angle(&w[1].point) - angle(&w[0].point);
        if d > std::f64::consts::PI {
            d -= TAU;
        } else if d < -std::f64::consts::PI {
            d += TAU;
        }
        total += d;
    }
    total / TAU
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Vec<String> {
        ["re_z", "im_z", "c"].iter().map(|s| s.to_string()).collect()
    }

    fn circle(center: [f64; 2], r: f64, o: Orientation) -> PathSpec {
        PathSpec::circle(Plane::new("im_z", "c", &[("re_z", 0.0)]), center, r, o, 0.0)
    }

    #[test]
    fn circle_sampling_closes_exactly() {
        let p = discretize(&circle([0.0, -1.0], 0.5, Orientation::CCW), &params(), 64).unwrap();
        assert_eq!(p.len(), 65);
        assert!(p.is_loop());
        assert_eq!(p.first(), p.last());
        assert_eq!(p.first().coords(), &[0.0, 0.5, -1.0]);
        assert!((winding_number(&p, [1, 2], [0.0, -1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_circle_samples_or_zero_radius_rejected() {
        assert!(discretize(&circle([0.0, 0.0], 0.5, Orientation::CCW), &params(), 8).is_err());
        assert!(matches!(
            discretize(&circle([0.0, 0.0], 0.0, Orientation::CCW), &params(), 32),
            Err(HolonomyError::DegenerateSpec(_))
        ));
        let empty = PathSpec::Polyline { points: vec![] };
        assert!(matches!(discretize(&empty, &params(), 32), Err(HolonomyError::DegenerateSpec(_))));
    }

    #[test]
    fn reverse_traverses_same_points_backwards() {
        let c = circle([0.0, -1.0], 0.5, Orientation::CCW);
        let fwd = discretize(&c, &params(), 32).unwrap();
        let rev = discretize(&c.clone().reversed(), &params(), 32).unwrap();
        let mut a = fwd.points();
        a.reverse();
        assert_eq!(a, rev.points());
        assert!((winding_number(&rev, [1, 2], [0.0, -1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn concat_of_loops_visits_base_twice() {
        let a = circle([0.0, -1.0], 0.5, Orientation::CCW);
        let b = PathSpec::circle(Plane::new("im_z", "c", &[("re_z", 0.0)]), [1.0, -1.0], 0.5, Orientation::CCW, std::f64::consts::PI);
        let p = discretize(&a.then(b), &params(), 32).unwrap();
        assert!(p.is_loop());
        assert_eq!(p.len(), 65);
        let base = p.first().clone();
        assert_eq!(p.points().iter().filter(|x| x.distance(&base) < 1e-12).count(), 3);
    }

    #[test]
    fn discontinuous_concat_rejected() {
        let a = circle([0.0, -1.0], 0.5, Orientation::CCW);
        let b = circle([5.0, -1.0], 0.5, Orientation::CCW);
        assert!(matches!(
            discretize(&a.then(b), &params(), 32),
            Err(HolonomyError::Discontinuous { segment: 1, .. })
        ));
    }

    #[test]
    fn midpoints_lie_on_the_arc() {
        let p = discretize(&circle([0.0, -1.0], 0.5, Orientation::CCW), &params(), 16).unwrap();
        let s = p.samples();
        let m = p.midpoint(&s[3], &s[4]);
        let [u, v] = [m.point[1], m.point[2] + 1.0];
        assert!(((u * u + v * v).sqrt() - 0.5).abs() < 1e-14);
        assert!(m.t > s[3].t && m.t < s[4].t);
    }

    #[test]
    fn polyline_accepts_named_points_and_closes() {
        let json = r#"{"type":"polyline","points":[
            {"re_z":0,"im_z":0,"c":0},{"re_z":1,"im_z":0,"c":0},{"re_z":0,"im_z":0,"c":0}]}"#;
        let spec: PathSpec = serde_json::from_str(json).unwrap();
        let p = discretize(&spec, &params(), 10).unwrap();
        assert!(p.is_loop());
        assert_eq!(p.len(), 11);
        assert_eq!(p.samples()[5].point.coords(), &[1.0, 0.0, 0.0]);
        assert!((p.samples()[5].t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stationary_polyline_has_two_samples() {
        let spec = PathSpec::Polyline {
            points: vec![PointSpec::Coords(vec![0.0, 1.0, 2.0])],
        };
        let p = discretize(&spec, &params(), 10).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.is_loop());
    }

    #[test]
    fn plane_must_cover_all_parameters() {
        let spec = PathSpec::circle(Plane::new("im_z", "c", &[]), [0.0, 0.0], 1.0, Orientation::CCW, 0.0);
        assert!(discretize(&spec, &params(), 32).is_err());
    }
}
