//! Durand–Kerner simultaneous iteration for monic polynomials.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::poly::CharPoly;
use super::{SpectraError, Spectrum};

const MAX_ITERATIONS: usize = 800;
const STALL_LIMIT: usize = 12;

/// All roots of a monic polynomial, with multiplicity.
pub fn roots(p: &CharPoly) -> Result<Spectrum, SpectraError> {
    let n = p.degree();
    if n == 0 {
        return Err(SpectraError::Dimension(0));
    }
    // exact zero roots factor out
    let zeros = p.coeffs().iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
    let reduced = CharPoly::monic(p.coeffs()[zeros..].to_vec());
    let mut out = vec![Complex64::new(0.0, 0.0); zeros];
    match reduced.degree() {
        0 => {}
        1 => out.push(-reduced.coeffs()[0]),
        _ => out.extend(durand_kerner(&reduced)?),
    }
    Ok(Spectrum::new(out))
}

/// Fujiwara's bound on the root moduli.
fn root_radius(p: &CharPoly) -> f64 {
    let n = p.degree();
    let coeffs = p.coeffs();
    (1..=n)
        .map(|k| {
            let c = coeffs[n - k].norm();
            let c = if k == n { c / 2.0 } else { c };
            c.powf(1.0 / k as f64)
        })
        .fold(0.0, f64::max)
        * 2.0
}

fn residual_ok(p: &CharPoly, z: Complex64) -> bool {
    let r = p.eval(z).norm();
    r <= 1e-10 * p.coeff_norm() || r <= p.eval_error_bound(z) * 8.0
}

fn durand_kerner(p: &CharPoly) -> Result<Vec<Complex64>, SpectraError> {
    let n = p.degree();
    let radius = root_radius(p).max(f64::MIN_POSITIVE.sqrt());
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius * 0.5, TAU * k as f64 / n as f64 + 0.4))
        .collect();

    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step: f64 = 0.0;
        let mut max_mag: f64 = 1.0;
        for i in 0..n {
            let zi = z[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            if denom == Complex64::new(0.0, 0.0) {
                // coincident iterates: nudge apart
                z[i] = zi + Complex64::new(radius, radius) * 1e-8;
                max_step = f64::INFINITY;
                continue;
            }
            let step = p.eval(zi) / denom;
            z[i] = zi - step;
            max_step = max_step.max(step.norm());
            max_mag = max_mag.max(z[i].norm());
        }
        if !z.iter().all(|w| w.re.is_finite() && w.im.is_finite()) {
            return Err(SpectraError::NoConvergence { iterations: MAX_ITERATIONS });
        }
        if max_step <= 4.0 * f64::EPSILON * max_mag {
            converged = true;
            break;
        }
        if max_step < best * 0.5 {
            best = max_step;
            stalled = 0;
        } else {
            stalled += 1;
            // multiple roots converge only linearly and then wander at the
            // rounding level
            if stalled >= STALL_LIMIT && z.iter().all(|&w| residual_ok(p, w)) {
                converged = true;
                break;
            }
        }
    }
    if !converged && !z.iter().all(|&w| residual_ok(p, w)) {
        return Err(SpectraError::NoConvergence { iterations: MAX_ITERATIONS });
    }

    // one Newton step per root, kept only if it lowers the residual
    for zi in z.iter_mut() {
        let (v, dv) = p.eval_with_derivative(*zi);
        if dv.norm() > 0.0 {
            let cand = *zi - v / dv;
            if cand.re.is_finite() && cand.im.is_finite() && p.eval(cand).norm() < v.norm() {
                *zi = cand;
            }
        }
    }
    if !z.iter().all(|&w| residual_ok(p, w)) {
        return Err(SpectraError::NoConvergence { iterations: MAX_ITERATIONS });
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn triple_zero() {
        let s = roots(&CharPoly::monic(vec![c(0.0, 0.0); 3])).unwrap();
        assert_eq!(s.values(), &[c(0.0, 0.0); 3]);
    }

    #[test]
    fn depressed_cubic() {
        let s = roots(&CharPoly::monic(vec![c(0.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0)])).unwrap();
        let got = sorted(s.values().to_vec());
        let r3 = 3f64.sqrt();
        for (g, w) in got.iter().zip([c(-r3, 0.0), c(0.0, 0.0), c(r3, 0.0)]) {
            assert!((g - w).norm() < 1e-14, "{g} vs {w}");
        }
    }

    #[test]
    fn quadratic_pair() {
        let s = roots(&CharPoly::monic(vec![c(2.0, 0.0), c(-2.0, 0.0)])).unwrap();
        let got = sorted(s.values().to_vec());
        assert!((got[0] - c(1.0, -1.0)).norm() < 1e-14);
        assert!((got[1] - c(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn planted_double_root_is_clustered() {
        let p = CharPoly::from_roots(&[c(0.5, 0.5), c(0.5, 0.5), c(-1.0, 2.0)]);
        let s = roots(&p).unwrap();
        let clusters = s.clusters();
        assert_eq!(clusters.len(), 2);
        assert!(clusters.iter().any(|cl| cl.multiplicity == 2));
    }

    #[test]
    fn degree_eight() {
        let planted: Vec<Complex64> = (0..8).map(|k| c(k as f64 - 3.5, (k as f64).sin())).collect();
        let s = roots(&CharPoly::from_roots(&planted)).unwrap();
        for w in &planted {
            let d = s.values().iter().map(|g| (g - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "missing root {w}");
        }
    }
}
