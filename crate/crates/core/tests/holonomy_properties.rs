mod common;

use std::f64::consts::TAU;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_loop, random_symmetric_family, traced, EpPair};
use spectral_holonomy::family::{builtin, ParameterPoint};
use spectral_holonomy::holonomy::{
    compose, conjugate, discretize, inverse, loop_permutation, pull_back, trace, Bridge, DiscretizedPath, Orientation,
    PathSpec, PointSpec, TrackingOptions,
};

fn ep_pair() -> &'static EpPair {
    static FIG: OnceLock<EpPair> = OnceLock::new();
    FIG.get_or_init(EpPair::new)
}

fn random_base(rng: &mut ChaCha8Rng) -> ParameterPoint {
    ParameterPoint::new(vec![
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.5..1.5),
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concatenation_composes(seed in any::<u64>()) {
        let f = builtin("waveguide_T").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_base(&mut rng);
        let g1 = random_loop(&mut rng, f.params(), &base);
        let g2 = random_loop(&mut rng, f.params(), &base);
        let (Ok(p1), Ok(p2)) = (traced(&f, &g1), traced(&f, &g2)) else { return Ok(()) };
        if let Ok(p12) = traced(&f, &g1.then(g2)) {
            prop_assert_eq!(p12, compose(&p2, &p1).unwrap());
        }
    }

    #[test]
    fn reversal_inverts(seed in any::<u64>()) {
        let f = builtin("waveguide_T").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_base(&mut rng);
        let g = random_loop(&mut rng, f.params(), &base);
        let (Ok(p), Ok(r)) = (traced(&f, &g), traced(&f, &g.reversed())) else { return Ok(()) };
        prop_assert_eq!(r, inverse(&p));
    }

    #[test]
    fn real_symmetric_loops_are_trivial(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_symmetric_family(&mut rng);
        let base = ParameterPoint::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let g = random_loop(&mut rng, f.params(), &base);
        if let Ok(p) = traced(&f, &g) {
            prop_assert!(p.is_identity(), "got {}", p);
        }
    }

    /// Moving the start point around a circle conjugates the permutation.
    #[test]
    fn cycle_type_is_independent_of_start(
        cx in -1.0..1.0f64, cy in -1.0..1.0f64, c in -1.5..1.5f64,
        r in 0.2..1.5f64, a0 in 0.0..TAU, a1 in 0.0..TAU,
    ) {
        let f = builtin("waveguide_T").unwrap();
        let plane = spectral_holonomy::holonomy::Plane::new("re_z", "im_z", &[("c", c)]);
        let at = |a: f64| PathSpec::circle(plane.clone(), [cx, cy], r, Orientation::CCW, a);
        let (Ok(p0), Ok(p1)) = (traced(&f, &at(a0)), traced(&f, &at(a1))) else { return Ok(()) };
        prop_assert_eq!(p0.cycle_type(), p1.cycle_type());
    }

    #[test]
    fn traces_satisfy_safe_matching(seed in any::<u64>()) {
        let f = builtin("waveguide_T").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_base(&mut rng);
        let spec = random_loop(&mut rng, f.params(), &base);
        let path = discretize(&spec, f.params(), 48).unwrap();
        let Ok(t) = trace(&f, &path, &TrackingOptions::default()) else { return Ok(()) };
        let spectra = t.spectra();
        prop_assert_eq!(t.matchings().len() + 1, spectra.len());
        let mut net = spectral_holonomy::holonomy::Permutation::identity(3);
        for (k, m) in t.matchings().iter().enumerate() {
            let (a, b) = (spectra[k].values(), spectra[k + 1].values());
            let gap = |v: &[num_complex::Complex64]| {
                let mut g = f64::INFINITY;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        g = g.min((v[i] - v[j]).norm());
                    }
                }
                g
            };
            let moved = (0..3).map(|i| (a[i] - b[m.apply(i)]).norm()).fold(0.0, f64::max);
            prop_assert!(moved < 0.5 * gap(a).min(gap(b)), "step {}: moved {} gaps {} {}", k, moved, gap(a), gap(b));
            net = compose(m, &net).unwrap();
        }
        prop_assert_eq!(loop_permutation(&t).unwrap(), net);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Smooth small deformations of the reference loops keep their permutations.
    #[test]
    fn small_deformations_preserve_permutation(
        which in 0usize..4,
        coeffs in proptest::collection::vec(-1.0..1.0f64, 9),
    ) {
        let fig = ep_pair();
        let spec = [fig.gamma1(), fig.gamma2(), fig.big(), fig.figure8()][which].clone();
        let path = fig.discretize(&spec);
        let amp = 0.05 * fig.d / 3.0;
        let bent = path.map_points(|t, p| {
            let mut q = p.clone();
            for m in 0..3 {
                let s = (std::f64::consts::PI * (m + 1) as f64 * t).sin() * (std::f64::consts::PI * t).sin();
                for k in 0..3 {
                    q.coords_mut()[k] += amp * coeffs[3 * m + k] * s;
                }
            }
            q
        });
        prop_assert_eq!(fig.permutation_of(&bent).unwrap(), fig.permutation_of(&path).unwrap());
    }

    /// Pull-backs along two bridges differ by conjugation with the bridge loop.
    #[test]
    fn bridges_conjugate(y_above in 1.3..2.5f64, y_below in -1.5..-0.3f64, x in 0.5..1.0f64) {
        let fig = ep_pair();
        let d = fig.d;
        let line = |pts: &[[f64; 2]]| {
            let spec = PathSpec::Polyline {
                points: pts.iter().map(|p| PointSpec::Coords(vec![p[0] * d, p[1] * d, common::C_PLANE])).collect(),
            };
            fig.discretize(&spec)
        };
        let (x1, x2) = ([-x, 1.0], [x, 1.0]);
        let b = Bridge::new(line(&[x1, [-x, y_above], [x, y_above], x2]));
        let bt = Bridge::new(line(&[x1, [-x, y_below], [x, y_below], x2]));
        let gamma = fig.discretize(&PathSpec::circle(common::plane(), [0.0, d], x * d, Orientation::CCW, 0.0));
        let pb = fig.permutation_of(&pull_back(&b, &gamma).unwrap()).unwrap();
        let pbt = fig.permutation_of(&pull_back(&bt, &gamma).unwrap()).unwrap();
        let back = b.path().reversed();
        let q = fig.permutation_of(&DiscretizedPath::concat(&[bt.path(), &back]).unwrap()).unwrap();
        prop_assert_eq!(pbt, conjugate(&pb, &q).unwrap());
    }
}
