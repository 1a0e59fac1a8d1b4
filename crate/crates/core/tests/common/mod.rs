//! Loop geometry around the EP2/EP3 pair of the waveguide family at c = −0.9,
//! with the EP2 located by scan and refinement.

#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use spectral_holonomy::cartography::{refine_zeros, scan_plane, PlaneSpec};
use spectral_holonomy::family::{builtin, parse_family, OperatorFamily, ParameterPoint};
use spectral_holonomy::holonomy::{
    discretize, loop_permutation, trace, DiscretizedPath, HolonomyError, Orientation, PathSpec, Permutation, Plane,
    PointSpec, TrackingOptions,
};

pub const C_PLANE: f64 = -0.9;
pub const SAMPLES: usize = 64;

pub struct EpPair {
    pub family: OperatorFamily,
    /// Height of the EP2 above z = 0.
    pub d: f64,
    /// Base point (re_z, im_z).
    pub base: [f64; 2],
}

pub fn plane() -> Plane {
    Plane::new("re_z", "im_z", &[("c", C_PLANE)])
}

/// Scans a small window around z = 0 and returns the refined EP2 height.
pub fn locate_ep2(f: &OperatorFamily) -> f64 {
    let spec = PlaneSpec::new("re_z", "im_z", &[("c", C_PLANE)], [[-0.02, 0.02], [-0.02, 0.02]], [41, 41]);
    let field = scan_plane(f, &spec).expect("scan");
    let cands = refine_zeros(f, &field, 1e-2);
    let ep2 = cands
        .iter()
        .filter(|c| c.refined && c.location[1] > 1e-4)
        .min_by(|a, b| a.location[1].total_cmp(&b.location[1]))
        .expect("an EP2 above z = 0");
    ep2.location[1]
}

impl EpPair {
    pub fn new() -> Self {
        let family = builtin("waveguide_T").unwrap();
        let d = locate_ep2(&family);
        Self {
            family,
            d,
            base: [-0.5 * d, 0.5 * d],
        }
    }

    fn circle_through_base(&self, center: [f64; 2]) -> PathSpec {
        let dx = self.base[0] - center[0];
        let dy = self.base[1] - center[1];
        PathSpec::circle(plane(), center, dx.hypot(dy), Orientation::CW, dy.atan2(dx))
    }

    /// Around the EP2.
    pub fn gamma1(&self) -> PathSpec {
        self.circle_through_base([0.0, self.d])
    }

    /// Around the EP3 at z = 0.
    pub fn gamma2(&self) -> PathSpec {
        self.circle_through_base([0.0, 0.0])
    }

    /// Encloses both.
    pub fn big(&self) -> PathSpec {
        self.circle_through_base([self.d, 0.5 * self.d])
    }

    /// γ₂ followed by γ₁ traversed backwards.
    pub fn figure8(&self) -> PathSpec {
        self.gamma2().then(self.gamma1().reversed())
    }

    pub fn reversed_figure8(&self) -> PathSpec {
        self.figure8().reversed()
    }

    pub fn radius(&self) -> f64 {
        self.d * FRAC_1_SQRT_2
    }

    pub fn discretize(&self, spec: &PathSpec) -> DiscretizedPath {
        discretize(spec, self.family.params(), SAMPLES).unwrap()
    }

    pub fn permutation(&self, spec: &PathSpec) -> Result<Permutation, HolonomyError> {
        let path = self.discretize(spec);
        loop_permutation(&trace(&self.family, &path, &TrackingOptions::default())?)
    }

    pub fn permutation_of(&self, path: &DiscretizedPath) -> Result<Permutation, HolonomyError> {
        loop_permutation(&trace(&self.family, path, &TrackingOptions::default())?)
    }
}

pub fn cycles(s: &str) -> Permutation {
    Permutation::parse_cycles(s, 3).unwrap()
}

/// Random closed loop through `base`: a circle in a random coordinate plane or
/// a random triangle.
pub fn random_loop(rng: &mut ChaCha8Rng, params: &[String], base: &ParameterPoint) -> PathSpec {
    if rng.gen_bool(0.5) {
        let a = rng.gen_range(0..params.len());
        let b = (a + rng.gen_range(1..params.len())) % params.len();
        let r = rng.gen_range(0.1..1.2);
        let phi: f64 = rng.gen_range(0.0..TAU);
        let center = [base[a] - r * phi.cos(), base[b] - r * phi.sin()];
        let fixed: Vec<(&str, f64)> = (0..params.len())
            .filter(|&k| k != a && k != b)
            .map(|k| (params[k].as_str(), base[k]))
            .collect();
        let orientation = if rng.gen_bool(0.5) { Orientation::CCW } else { Orientation::CW };
        PathSpec::circle(Plane::new(&params[a], &params[b], &fixed), center, r, orientation, phi)
    } else {
        let mut pts = vec![PointSpec::Coords(base.coords().to_vec())];
        for _ in 0..2 {
            pts.push(PointSpec::Coords(base.coords().iter().map(|x| x + rng.gen_range(-1.0..1.0)).collect()));
        }
        pts.push(PointSpec::Coords(base.coords().to_vec()));
        PathSpec::Polyline { points: pts }
    }
}

pub fn traced(f: &OperatorFamily, spec: &PathSpec) -> Result<Permutation, HolonomyError> {
    let path = discretize(spec, f.params(), 64)?;
    loop_permutation(&trace(f, &path, &TrackingOptions::default())?)
}

/// `A + u·B + v·C` with random real-symmetric A, B, C.
pub fn random_symmetric_family(rng: &mut ChaCha8Rng) -> OperatorFamily {
    let mut sym = || {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    };
    let (a, b, c) = (sym(), sym(), sym());
    let entries: Vec<Vec<String>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| format!("({:?})+({:?})*u+({:?})*v", a[i][j], b[i][j], c[i][j]))
                .collect()
        })
        .collect();
    let doc = serde_json::json!({ "n": 3, "params": ["u", "v"], "entries": entries });
    parse_family(&doc.to_string()).unwrap()
}
