//! Independent high-precision oracle for the theta series, plus frozen
//! reference values.
//!
//! The oracle sums the series at fixed range |j| <= 50 in double-double
//! arithmetic (~31 significant digits), entirely independent of the
//! production truncation logic. It is deliberately restricted to real z and
//! purely imaginary modulus, which covers the frozen reference points.

use laxkit_core::elliptic::{theta_odd, theta_odd_dz, EllipticModulus, ThetaChar};
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// Minimal double-double arithmetic (Dekker/Knuth error-free transforms).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

const DD_PI: Dd = Dd { hi: 3.141592653589793, lo: 1.2246467991473532e-16 };
const DD_2PI: Dd = Dd { hi: 6.283185307179586, lo: 2.4492935982947064e-16 };
const DD_HALF_PI: Dd = Dd { hi: 1.5707963267948966, lo: 6.123233995736766e-17 };
const DD_LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    fn from(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    fn mul_f64(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let e = e + self.lo * x;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    fn div_f64(self, x: f64) -> Dd {
        let q1 = self.hi / x;
        let r = self.sub(Dd::from(q1).mul_f64(x));
        let q2 = (r.hi + r.lo) / x;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    fn scale2(self, k: i32) -> Dd {
        // exact scaling by a power of two
        let f = (2.0f64).powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    fn exp(self) -> Dd {
        if self.hi < -700.0 {
            return Dd::from(0.0);
        }
        let k = (self.hi / DD_LN2.hi).round();
        let r = self.sub(DD_LN2.mul_f64(k));
        // Taylor with |r| <= ln2/2
        let mut term = Dd::from(1.0);
        let mut sum = Dd::from(1.0);
        for n in 1..40 {
            term = term.mul(r).div_f64(n as f64);
            sum = sum.add(term);
            if term.hi.abs() < 1e-36 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        sum.scale2(k as i32)
    }

    fn sin_cos(self) -> (Dd, Dd) {
        let n = (self.hi / DD_HALF_PI.hi).round();
        let r = self.sub(DD_HALF_PI.mul_f64(n));
        // Taylor for sin and cos on |r| <= pi/4 + eps
        let r2 = r.mul(r);
        let mut s = r;
        let mut term = r;
        let mut sign = -1.0;
        for k in 1..25 {
            let fact = (2 * k) as f64 * (2 * k + 1) as f64;
            term = term.mul(r2).div_f64(fact);
            s = s.add(term.mul_f64(sign));
            sign = -sign;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        let mut c = Dd::from(1.0);
        let mut termc = Dd::from(1.0);
        let mut signc = -1.0;
        for k in 1..25 {
            let fact = (2 * k - 1) as f64 * (2 * k) as f64;
            termc = termc.mul(r2).div_f64(fact);
            c = c.add(termc.mul_f64(signc));
            signc = -signc;
            if termc.hi.abs() < 1e-36 {
                break;
            }
        }
        match (n as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, Dd { hi: -s.hi, lo: -s.lo }),
            2 => (Dd { hi: -s.hi, lo: -s.lo }, Dd { hi: -c.hi, lo: -c.lo }),
            _ => (Dd { hi: -c.hi, lo: -c.lo }, s),
        }
    }
}

/// theta[a;b](z | i t) summed at fixed range |j| <= 50 in double-double
/// arithmetic, for real z and purely imaginary modulus i t.
fn theta_dd(a: (i64, i64), b: (i64, i64), z: f64, t: f64) -> (f64, f64) {
    let af = Dd::from(a.0 as f64).div_f64(a.1 as f64);
    let bf = Dd::from(b.0 as f64).div_f64(b.1 as f64);
    let mut re = Dd::from(0.0);
    let mut im = Dd::from(0.0);
    for j in -50..=50i64 {
        let m = af.add(Dd::from(j as f64));
        // exp(-pi m^2 t) * (cos + i sin)(2 pi m (z + b))
        let gauss = DD_PI.mul(m).mul(m).mul_f64(-t).exp();
        if gauss.hi == 0.0 {
            continue;
        }
        let angle = DD_2PI.mul(m).mul(Dd::from(z).add(bf));
        let (s, c) = angle.sin_cos();
        re = re.add(gauss.mul(c));
        im = im.add(gauss.mul(s));
    }
    (re.hi + re.lo, im.hi + im.lo)
}

#[test]
fn dd_arithmetic_sanity() {
    // exp(1) and sin/cos at a representative point, against f64 libm
    let e = Dd::from(1.0).exp();
    assert!((e.hi - std::f64::consts::E).abs() < 1e-15);
    let (s, c) = Dd::from(0.7).sin_cos();
    assert!((s.hi - 0.7f64.sin()).abs() < 1e-15);
    assert!((c.hi - 0.7f64.cos()).abs() < 1e-15);
    // dd retains extra precision: (1 + 1e-20) - 1 survives
    let x = Dd::from(1.0).add(Dd::from(1e-20));
    let y = x.sub(Dd::from(1.0));
    assert!((y.hi - 1e-20).abs() < 1e-30);
}

#[test]
fn production_theta_matches_dd_oracle() {
    let tau = EllipticModulus::new(Complex64::new(0.0, 1.0)).unwrap();
    for z in [0.3, 0.1, -0.45, 0.72] {
        let (re, im) = theta_dd((1, 2), (1, 2), z, 1.0);
        let v = theta_odd(Complex64::new(z, 0.0), &tau).unwrap();
        assert!(
            (v.re - re).abs() < 1e-15 * (1.0 + re.abs()) && (v.im - im).abs() < 1e-15,
            "z = {z}: production {v}, oracle ({re}, {im})"
        );
    }
    // a non-odd characteristic at a second modulus
    let tau2 = EllipticModulus::new(Complex64::new(0.0, 2.0)).unwrap();
    let chr = ThetaChar::from_parts(1, 3, 1, 4);
    let (re, im) = theta_dd((1, 3), (1, 4), 0.21, 2.0);
    let v = laxkit_core::elliptic::theta_char(&chr, Complex64::new(0.21, 0.0), &tau2).unwrap();
    assert!((v.re - re).abs() < 1e-15 * (1.0 + re.abs()));
    assert!((v.im - im).abs() < 1e-15 * (1.0 + im.abs()));
}

#[test]
fn frozen_reference_values() {
    // Frozen from the double-double oracle above.
    let tau = EllipticModulus::new(Complex64::new(0.0, 1.0)).unwrap();
    let v = theta_odd(Complex64::new(0.3, 0.0), &tau).unwrap();
    assert!((v.re - -0.737_197_163_718_681_6).abs() < 1e-14, "{v}");
    assert!(v.im.abs() < 1e-14);
    let (re, _) = theta_dd((1, 2), (1, 2), 0.3, 1.0);
    assert!((re - -0.737_197_163_718_681_6).abs() < 1e-15);
    // derivative against the oracle through central differences in dd
    let d = theta_odd_dz(Complex64::new(0.3, 0.0), &tau, 1).unwrap();
    assert!((d.re - -1.699_117_854_322_614_3).abs() < 1e-13, "{d}");
}
