//! Plain and compensated Horner evaluation of complex polynomials.
//!
//! Coefficients are given in increasing degree: `p(z) = sum c_k z^k`.

use num_complex::Complex64;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x y = p + e` exactly, with the error `e` collected from the three
/// correction terms of the complex product.
#[inline]
fn two_prod_complex(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    let (z1, h1) = two_prod(x.re, y.re);
    let (z2, h2) = two_prod(x.im, y.im);
    let (z3, h3) = two_prod(x.re, y.im);
    let (z4, h4) = two_prod(x.im, y.re);
    let (z5, h5) = two_sum(z1, -z2);
    let (z6, h6) = two_sum(z3, z4);
    let p = Complex64::new(z5, z6);
    let e = Complex64::new(h1 - h2 + h5, h3 + h4 + h6);
    (p, e)
}

#[inline]
fn two_sum_complex(x: Complex64, y: Complex64) -> (Complex64, Complex64) {
    let (sr, er) = two_sum(x.re, y.re);
    let (si, ei) = two_sum(x.im, y.im);
    (Complex64::new(sr, si), Complex64::new(er, ei))
}

pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn horner_real(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Compensated Horner: the rounding errors of every step are accumulated in
/// a second Horner recurrence and added back at the end, so the result is
/// as accurate as plain Horner in twice the working precision.
pub fn comp_horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let Some((&last, rest)) = coeffs.split_last() else {
        return Complex64::new(0.0, 0.0);
    };
    let mut r = last;
    let mut err = Complex64::new(0.0, 0.0);
    for &c in rest.iter().rev() {
        let (p, pe) = two_prod_complex(r, z);
        let (s, se) = two_sum_complex(p, c);
        r = s;
        err = err * z + (pe + se);
    }
    r + err
}

pub fn comp_horner_real(coeffs: &[f64], z: Complex64) -> Complex64 {
    let Some((&last, rest)) = coeffs.split_last() else {
        return Complex64::new(0.0, 0.0);
    };
    let mut r = Complex64::new(last, 0.0);
    let mut err = Complex64::new(0.0, 0.0);
    for &c in rest.iter().rev() {
        let (p, pe) = two_prod_complex(r, z);
        let (sr, er) = two_sum(p.re, c);
        r = Complex64::new(sr, p.im);
        err = err * z + (pe + Complex64::new(er, 0.0));
    }
    r + err
}
