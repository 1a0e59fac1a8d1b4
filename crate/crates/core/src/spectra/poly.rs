use num_complex::Complex64;

use super::matrix::{determinant, ComplexMatrix};

const EPS: f64 = f64::EPSILON;

/// Monic polynomial `λⁿ + c_{n−1}λ^{n−1} + … + c₀`, stored as `[c₀, …, c_{n−1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    coeffs: Vec<Complex64>,
}

impl CharPoly {
    /// Monic polynomial from its lower coefficients `[c₀, …, c_{n−1}]`.
    pub fn monic(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        // full[k] is the coefficient of λ^k
        let mut full = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); full.len() + 1];
            for (k, a) in full.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            full = next;
        }
        full.pop();
        Self { coeffs: full }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Lower coefficients `[c₀, …, c_{n−1}]`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// All coefficients including the leading one, lowest degree first.
    pub fn full_coeffs(&self) -> Vec<Complex64> {
        let mut v = self.coeffs.clone();
        v.push(Complex64::new(1.0, 0.0));
        v
    }

    /// `max(1, |c_k|)` over all coefficients.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(1.0, 0.0), |acc, c| acc * x + c)
    }

    /// Value and first derivative at `x`.
    pub fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// Running-error bound for Horner evaluation at `x`.
    pub fn eval_error_bound(&self, x: Complex64) -> f64 {
        let r = x.norm();
        let mut acc = 1.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c.norm();
        }
        4.0 * (self.degree() as f64 + 1.0) * EPS * acc
    }

    /// Derivative coefficients, lowest degree first (not monic).
    pub fn derivative(&self) -> Vec<Complex64> {
        self.full_coeffs()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect()
    }
}

/// Characteristic polynomial `det(λI − m)` by the Faddeev–LeVerrier recursion.
///
/// Coefficients whose modulus is below the rounding floor of the recursion are
/// set to exactly zero, so exact degeneracies stay exact.
pub fn char_poly(m: &ComplexMatrix) -> CharPoly {
    let n = m.dim();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    let ident = ComplexMatrix::identity(n);
    let mut mk = ComplexMatrix::zeros(n);
    let mut prev_coeff = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        mk = m.matmul(&mk).add(&ident.scale(prev_coeff));
        let c = -m.matmul(&mk).trace() / k as f64;
        coeffs[n - k] = c;
        prev_coeff = c;
    }
    let norm = m.norm_inf().max(1.0);
    let mut binom = 1.0;
    for k in 1..=n {
        binom = binom * (n + 1 - k) as f64 / k as f64;
        let floor = 8.0 * n as f64 * EPS * binom * norm.powi(k as i32);
        if coeffs[n - k].norm() <= floor {
            coeffs[n - k] = Complex64::new(0.0, 0.0);
        }
    }
    CharPoly { coeffs }
}

/// Discriminant of a monic polynomial.
///
/// Degree 3 uses the closed form, other degrees go through the Sylvester
/// resultant of `p` and `p′`.
pub fn discriminant(p: &CharPoly) -> Complex64 {
    match p.degree() {
        0 | 1 => Complex64::new(1.0, 0.0),
        2 => {
            let (c0, c1) = (p.coeffs[0], p.coeffs[1]);
            c1 * c1 - 4.0 * c0
        }
        3 => discriminant_cubic(p),
        _ => discriminant_resultant(p),
    }
}

/// Closed-form discriminant of `λ³ + aλ² + bλ + c`.
pub fn discriminant_cubic(p: &CharPoly) -> Complex64 {
    assert_eq!(p.degree(), 3, "cubic discriminant needs a degree-3 polynomial");
    let (c, b, a) = (p.coeffs[0], p.coeffs[1], p.coeffs[2]);
    18.0 * a * b * c - 4.0 * a * a * a * c + a * a * b * b - 4.0 * b * b * b - 27.0 * c * c
}

/// Discriminant via `(−1)^{n(n−1)/2} · Res(p, p′)` for monic `p`.
pub fn discriminant_resultant(p: &CharPoly) -> Complex64 {
    let n = p.degree();
    if n < 2 {
        return Complex64::new(1.0, 0.0);
    }
    let res = resultant(&p.full_coeffs(), &p.derivative());
    if (n * (n - 1) / 2) % 2 == 1 {
        -res
    } else {
        res
    }
}

/// Sylvester resultant of two polynomials given lowest-degree-first.
pub fn resultant(p: &[Complex64], q: &[Complex64]) -> Complex64 {
    subresultant_coefficient(p, q, 0)
}

/// Principal subresultant coefficient `psc_j(p, q)`; `psc_0` is the resultant.
///
/// Built from the `(m+l−2j)`-square leading block of the Sylvester matrix with
/// `l−j` shifted copies of `p` and `m−j` shifted copies of `q`.
pub fn subresultant_coefficient(p: &[Complex64], q: &[Complex64], j: usize) -> Complex64 {
    let m = p.len() - 1;
    let l = q.len() - 1;
    assert!(j <= m.min(l), "subresultant index exceeds degree");
    let size = m + l - 2 * j;
    if size == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut a = vec![Complex64::new(0.0, 0.0); size * size];
    let mut row = 0;
    for (poly, count) in [(p, l - j), (q, m - j)] {
        for shift in 0..count {
            for (k, coeff) in poly.iter().rev().enumerate() {
                let col = shift + k;
                if col < size {
                    a[row * size + col] = *coeff;
                }
            }
            row += 1;
        }
    }
    determinant(size, a)
}

/// Principal subresultant coefficients of `p` and `p′` for `j = 0..n−1`.
///
/// `p` has exactly `n − k` distinct roots iff `psc_0 … psc_{k−1}` vanish and
/// `psc_k` does not.
pub fn discriminant_ladder(p: &CharPoly) -> Vec<Complex64> {
    let full = p.full_coeffs();
    let dp = p.derivative();
    (0..p.degree().saturating_sub(1))
        .map(|j| subresultant_coefficient(&full, &dp, j))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diag_123() {
        let m = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let p = char_poly(&m);
        let want = [c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0)];
        for (got, w) in p.coeffs().iter().zip(want) {
            assert!((got - w).norm() < 1e-13, "{got} vs {w}");
        }
    }

    #[test]
    fn from_roots_matches_product() {
        let p = CharPoly::from_roots(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.coeffs(), &[c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0)]);
    }

    #[test]
    fn small_discriminants() {
        let cube = CharPoly::monic(vec![c(0.0, 0.0); 3]);
        assert_eq!(discriminant(&cube), c(0.0, 0.0));
        let p = CharPoly::monic(vec![c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((discriminant(&p) - c(-27.0, 0.0)).norm() < 1e-12);
        assert!((discriminant_resultant(&p) - c(-27.0, 0.0)).norm() < 1e-12);
        let sq = CharPoly::monic(vec![c(1.0, 0.0), c(-2.0, 0.0)]);
        assert_eq!(discriminant(&sq), c(0.0, 0.0));
        assert!(discriminant_resultant(&sq).norm() < 1e-14);
    }

    #[test]
    fn first_subresultant_of_cubic_is_minus_two_a2_minus_3b() {
        let (a, b, cc) = (c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.2));
        let p = CharPoly::monic(vec![cc, b, a]);
        let psc1 = subresultant_coefficient(&p.full_coeffs(), &p.derivative(), 1);
        let want = -2.0 * (a * a - 3.0 * b);
        assert!((psc1 - want).norm() < 1e-12, "{psc1} vs {want}");
    }

    #[test]
    fn quartic_discriminant_matches_root_product() {
        let roots = [c(1.0, 0.5), c(-0.5, 0.0), c(0.0, 2.0), c(1.5, -1.0)];
        let p = CharPoly::from_roots(&roots);
        let mut prod = c(1.0, 0.0);
        for i in 0..4 {
            for j in i + 1..4 {
                let d = roots[i] - roots[j];
                prod *= d * d;
            }
        }
        let got = discriminant(&p);
        assert!((got - prod).norm() < 1e-10 * prod.norm(), "{got} vs {prod}");
    }
}
