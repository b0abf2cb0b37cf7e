//! Complex special functions: theta functions with rational characteristics,
//! Eisenstein functions, the Kronecker kernel and its derivative, Weierstrass
//! functions, the Dedekind eta function, and their trigonometric/rational
//! degenerations.
//!
//! All evaluators accept complex arguments. Theta derivatives (in z and in the
//! modulus) are computed by term-wise differentiated series, never by finite
//! differences, so that identities between them are self-consistent at machine
//! precision.

use num_complex::Complex64;
use num_rational::Rational64;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Series stopping rule: a shell of terms counts as negligible when it falls
/// below this fraction of the largest term seen so far.
const SERIES_TOL: f64 = 1e-16;
/// Hard cap on the symmetric summation index.
const SERIES_MAX_INDEX: i64 = 200;
/// Default radius around poles inside which evaluation fails loudly.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-8;

/// Elliptic modulus tau restricted to the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    tau: Complex64,
}

impl EllipticModulus {
    pub fn new(tau: Complex64) -> Result<Self> {
        if tau.im <= 0.0 || tau.im.is_nan() || !tau.is_finite() {
            return Err(Error::NonConvergent(format!(
                "modulus must lie in the upper half plane, got {tau}"
            )));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// Modulus scaled by a positive integer, as used by intertwiner rows.
    pub fn scaled(&self, k: u32) -> Self {
        Self { tau: self.tau * k as f64 }
    }
}

/// Theta characteristics (a, b), both rationals with a small denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaChar {
    a: Rational64,
    b: Rational64,
}

impl ThetaChar {
    pub fn new(a: Rational64, b: Rational64) -> Self {
        Self { a, b }
    }

    pub fn from_parts(a_num: i64, a_den: i64, b_num: i64, b_den: i64) -> Self {
        Self { a: Rational64::new(a_num, a_den), b: Rational64::new(b_num, b_den) }
    }

    /// Characteristics (1/2, 1/2) of the odd theta function.
    pub fn odd() -> Self {
        Self::from_parts(1, 2, 1, 2)
    }

    pub fn a(&self) -> f64 {
        *self.a.numer() as f64 / *self.a.denom() as f64
    }

    pub fn b(&self) -> f64 {
        *self.b.numer() as f64 / *self.b.denom() as f64
    }

    pub fn a_rational(&self) -> Rational64 {
        self.a
    }

    /// exp(2 pi i a), the multiplier picked up under z -> z + 1.
    pub fn shift_multiplier(&self) -> Complex64 {
        (Complex64::i() * TWO_PI * self.a()).exp()
    }
}

/// Which degeneration of the elliptic function family is in use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FunctionClass {
    Elliptic(EllipticModulus),
    Trigonometric,
    Rational,
}

impl FunctionClass {
    pub fn elliptic(tau: Complex64) -> Result<Self> {
        Ok(Self::Elliptic(EllipticModulus::new(tau)?))
    }

    pub fn modulus(&self) -> Option<EllipticModulus> {
        match self {
            Self::Elliptic(m) => Some(*m),
            _ => None,
        }
    }

    pub fn is_elliptic(&self) -> bool {
        matches!(self, Self::Elliptic(_))
    }
}

/// Distance from z to the nearest point of the lattice Z + tau Z.
pub fn lattice_distance(z: Complex64, tau: Complex64) -> f64 {
    // Solve z = s + t*tau over the reals, round to the nearest lattice point
    // and scan its neighbours.
    let t = z.im / tau.im;
    let s = z.re - t * tau.re;
    let mut best = f64::INFINITY;
    for dm in -1..=1 {
        for dn in -1..=1 {
            let m = s.round() + dm as f64;
            let n = t.round() + dn as f64;
            let d = (z - Complex64::new(m, 0.0) - tau * n).norm();
            best = best.min(d);
        }
    }
    best
}

/// Distance from z to the nearest pole of the class-specific kernel
/// (lattice points, i*pi*Z, or the origin).
pub fn pole_distance(z: Complex64, class: &FunctionClass) -> f64 {
    match class {
        FunctionClass::Elliptic(m) => lattice_distance(z, m.tau()),
        FunctionClass::Trigonometric => {
            let k = (z.im / std::f64::consts::PI).round();
            (z - Complex64::new(0.0, k * std::f64::consts::PI)).norm()
        }
        FunctionClass::Rational => z.norm(),
    }
}

fn guard_pole(z: Complex64, class: &FunctionClass, what: &str) -> Result<()> {
    let d = pole_distance(z, class);
    if d < DEFAULT_EXCLUSION_RADIUS {
        return Err(Error::NearSingular { what: format!("{what} at {z}"), radius: DEFAULT_EXCLUSION_RADIUS });
    }
    Ok(())
}

/// One term of the theta series together with the derivative weights.
#[inline]
fn theta_term(j: f64, a: f64, b: f64, z: Complex64, tau: Complex64) -> Complex64 {
    let m = j + a;
    let expo = Complex64::i() * std::f64::consts::PI * m * m * tau
        + Complex64::i() * TWO_PI * m * (z + b);
    expo.exp()
}

/// Evaluates theta[a;b](z|tau) together with z-derivatives up to `max_dz` and,
/// when `with_dtau` is set, the tau-derivative of the plain value.
///
/// Returns (values[0..=max_dz], dtau). Summation runs over a symmetric index
/// range; it stops once two consecutive shells drop below `SERIES_TOL` times
/// the largest shell seen, and fails with `NonConvergent` past the index cap.
fn theta_series(
    chr: &ThetaChar,
    z: Complex64,
    tau: &EllipticModulus,
    max_dz: usize,
    with_dtau: bool,
) -> Result<(Vec<Complex64>, Complex64)> {
    let a = chr.a();
    let b = chr.b();
    let t = tau.tau();
    let mut vals = vec![Complex64::new(0.0, 0.0); max_dz + 1];
    let mut dtau = Complex64::new(0.0, 0.0);
    let mut max_shell = 0.0_f64;
    let mut small_streak = 0u32;

    let accumulate = |j: i64, vals: &mut Vec<Complex64>, dtau: &mut Complex64| -> Result<f64> {
        let term = theta_term(j as f64, a, b, z, t);
        if !term.is_finite() {
            return Err(Error::Overflow(format!(
                "theta term at index {j} is not finite; rescale z (Im z = {})",
                z.im
            )));
        }
        let m = j as f64 + a;
        let w = Complex64::i() * TWO_PI * m;
        let mut factor = Complex64::new(1.0, 0.0);
        for v in vals.iter_mut() {
            *v += term * factor;
            factor *= w;
        }
        if with_dtau {
            *dtau += term * Complex64::i() * std::f64::consts::PI * m * m;
        }
        Ok(term.norm())
    };

    for shell in 0..=SERIES_MAX_INDEX {
        let mut shell_mag = accumulate(shell, &mut vals, &mut dtau)?;
        if shell > 0 {
            shell_mag = shell_mag.max(accumulate(-shell, &mut vals, &mut dtau)?);
        }
        max_shell = max_shell.max(shell_mag);
        if shell_mag < SERIES_TOL * max_shell.max(1e-300) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok((vals, dtau));
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::NonConvergent(format!(
        "theta series did not settle within |j| <= {SERIES_MAX_INDEX} (z = {z}, tau = {t})"
    )))
}

/// theta[a;b](z|tau).
pub fn theta_char(chr: &ThetaChar, z: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    Ok(theta_series(chr, z, tau, 0, false)?.0[0])
}

/// d^order/dz^order theta[a;b](z|tau), by the differentiated series.
pub fn theta_char_dz(chr: &ThetaChar, z: Complex64, tau: &EllipticModulus, order: usize) -> Result<Complex64> {
    Ok(theta_series(chr, z, tau, order, false)?.0[order])
}

/// d/dtau theta[a;b](z|tau), by the differentiated series.
pub fn theta_char_dtau(chr: &ThetaChar, z: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    Ok(theta_series(chr, z, tau, 0, true)?.1)
}

/// The odd theta function and its z-derivatives, evaluated in one pass.
/// Index k of the returned vector holds the k-th derivative.
pub fn theta_odd_derivatives(z: Complex64, tau: &EllipticModulus, max_order: usize) -> Result<Vec<Complex64>> {
    Ok(theta_series(&ThetaChar::odd(), z, tau, max_order, false)?.0)
}

pub fn theta_odd(z: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    theta_char(&ThetaChar::odd(), z, tau)
}

pub fn theta_odd_dz(z: Complex64, tau: &EllipticModulus, order: usize) -> Result<Complex64> {
    theta_char_dz(&ThetaChar::odd(), z, tau, order)
}

/// First Eisenstein function E1 for the given class.
pub fn eisenstein1(z: Complex64, class: &FunctionClass) -> Result<Complex64> {
    guard_pole(z, class, "E1")?;
    match class {
        FunctionClass::Elliptic(m) => {
            let d = theta_odd_derivatives(z, m, 1)?;
            Ok(d[1] / d[0])
        }
        FunctionClass::Trigonometric => Ok(z.cosh() / z.sinh()),
        FunctionClass::Rational => Ok(z.inv()),
    }
}

/// Second Eisenstein function E2 = -dE1/dz for the given class.
pub fn eisenstein2(z: Complex64, class: &FunctionClass) -> Result<Complex64> {
    guard_pole(z, class, "E2")?;
    match class {
        FunctionClass::Elliptic(m) => {
            let d = theta_odd_derivatives(z, m, 2)?;
            let e1 = d[1] / d[0];
            Ok(e1 * e1 - d[2] / d[0])
        }
        FunctionClass::Trigonometric => {
            let s = z.sinh();
            Ok((s * s).inv())
        }
        FunctionClass::Rational => Ok((z * z).inv()),
    }
}

/// Kronecker kernel phi(z, w): the elementary two-point function of the class.
pub fn kronecker_phi(z: Complex64, w: Complex64, class: &FunctionClass) -> Result<Complex64> {
    guard_pole(z, class, "phi first argument")?;
    guard_pole(w, class, "phi second argument")?;
    match class {
        FunctionClass::Elliptic(m) => {
            let num = theta_odd_dz(Complex64::new(0.0, 0.0), m, 1)? * theta_odd(z + w, m)?;
            let den = theta_odd(z, m)? * theta_odd(w, m)?;
            Ok(num / den)
        }
        FunctionClass::Trigonometric => Ok(z.cosh() / z.sinh() + w.cosh() / w.sinh()),
        FunctionClass::Rational => Ok(z.inv() + w.inv()),
    }
}

/// f(z, w) = d/dw phi(z, w). In the degenerate classes the printed limits
/// -1/sinh^2(w) and -1/w^2 are used.
pub fn kronecker_f(z: Complex64, w: Complex64, class: &FunctionClass) -> Result<Complex64> {
    guard_pole(w, class, "f second argument")?;
    match class {
        FunctionClass::Elliptic(m) => {
            guard_pole(z, class, "f first argument")?;
            let e_cls = FunctionClass::Elliptic(*m);
            let phi = kronecker_phi(z, w, &e_cls)?;
            let e1zw = eisenstein1(z + w, &e_cls)?;
            let e1w = eisenstein1(w, &e_cls)?;
            Ok(phi * (e1zw - e1w))
        }
        FunctionClass::Trigonometric => {
            let s = w.sinh();
            Ok(-(s * s).inv())
        }
        FunctionClass::Rational => Ok(-(w * w).inv()),
    }
}

/// d/dz phi(z, w), via the symmetry of phi in its two arguments.
pub fn kronecker_phi_dz(z: Complex64, w: Complex64, class: &FunctionClass) -> Result<Complex64> {
    match class {
        FunctionClass::Elliptic(_) => {
            let phi = kronecker_phi(z, w, class)?;
            let e1zw = eisenstein1(z + w, class)?;
            let e1z = eisenstein1(z, class)?;
            Ok(phi * (e1zw - e1z))
        }
        FunctionClass::Trigonometric => {
            let s = z.sinh();
            Ok(-(s * s).inv())
        }
        FunctionClass::Rational => Ok(-(z * z).inv()),
    }
}

/// d/dz f(z, w) = dz dw phi(z, w).
pub fn kronecker_f_dz(z: Complex64, w: Complex64, class: &FunctionClass) -> Result<Complex64> {
    match class {
        FunctionClass::Elliptic(_) => {
            let phi = kronecker_phi(z, w, class)?;
            let e1zw = eisenstein1(z + w, class)?;
            let e1z = eisenstein1(z, class)?;
            let e1w = eisenstein1(w, class)?;
            let e2zw = eisenstein2(z + w, class)?;
            // d/dz [phi (E1(z+w) - E1(w))]
            Ok(phi * (e1zw - e1z) * (e1zw - e1w) - phi * e2zw)
        }
        // No spectral dependence survives the degenerations.
        FunctionClass::Trigonometric | FunctionClass::Rational => Ok(Complex64::new(0.0, 0.0)),
    }
}

/// The lattice point omega_alpha = (alpha_1 + alpha_2 tau)/N.
pub fn omega_alpha(alpha: (i64, i64), n: usize, tau: &EllipticModulus) -> Complex64 {
    (Complex64::new(alpha.0 as f64, 0.0) + tau.tau() * alpha.1 as f64) / n as f64
}

/// phi_alpha(z, w) = exp(2 pi i alpha_2 z / N) phi(z, w).
pub fn phi_alpha(alpha: (i64, i64), n: usize, z: Complex64, w: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    let class = FunctionClass::Elliptic(*tau);
    let pre = (Complex64::i() * TWO_PI * alpha.1 as f64 * z / n as f64).exp();
    Ok(pre * kronecker_phi(z, w, &class)?)
}

/// f_alpha(z, w) = exp(2 pi i alpha_2 z / N) f(z, w).
pub fn f_alpha(alpha: (i64, i64), n: usize, z: Complex64, w: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    let class = FunctionClass::Elliptic(*tau);
    let pre = (Complex64::i() * TWO_PI * alpha.1 as f64 * z / n as f64).exp();
    Ok(pre * kronecker_f(z, w, &class)?)
}

/// Weierstrass P function for the class (E2 plus the theta constant shift).
pub fn weierstrass_p(z: Complex64, class: &FunctionClass) -> Result<Complex64> {
    match class {
        FunctionClass::Elliptic(m) => {
            let d0 = theta_odd_derivatives(Complex64::new(0.0, 0.0), m, 3)?;
            Ok(eisenstein2(z, class)? + d0[3] / (3.0 * d0[1]))
        }
        _ => eisenstein2(z, class),
    }
}

/// Derivative of the Weierstrass P function.
pub fn weierstrass_p_prime(z: Complex64, class: &FunctionClass) -> Result<Complex64> {
    guard_pole(z, class, "P'")?;
    match class {
        FunctionClass::Elliptic(m) => {
            let d = theta_odd_derivatives(z, m, 3)?;
            let e1 = d[1] / d[0];
            let e2 = e1 * e1 - d[2] / d[0];
            // P' = -E1'' = -(theta'''/theta - E1^3 + 3 E1 E2)
            Ok(-(d[3] / d[0] - e1 * e1 * e1 + 3.0 * e1 * e2))
        }
        FunctionClass::Trigonometric => {
            let s = z.sinh();
            Ok(-2.0 * z.cosh() / (s * s * s))
        }
        FunctionClass::Rational => Ok(-2.0 / (z * z * z)),
    }
}

/// theta'''(0)/theta'(0), the constant entering E2 = P - theta'''(0)/(3 theta'(0)).
pub fn theta_triple_ratio(tau: &EllipticModulus) -> Result<Complex64> {
    let d0 = theta_odd_derivatives(Complex64::new(0.0, 0.0), tau, 3)?;
    Ok(d0[3] / d0[1])
}

/// Absolute residual of the genus-one trisecant identity
/// phi(h,z) phi(e,w) - phi(h-e,z) phi(e,z+w) - phi(e-h,w) phi(h,z+w).
///
/// Inputs with h ~ e (a removable structure in the h-e term) are routed to the
/// additive degeneration automatically.
pub fn fay_residual(
    hbar: Complex64,
    eta: Complex64,
    z: Complex64,
    w: Complex64,
    class: &FunctionClass,
) -> Result<f64> {
    if pole_distance(hbar - eta, class) < 1e-6 {
        return fay_degeneration_sum_residual(eta, z, w, class);
    }
    let lhs = kronecker_phi(hbar, z, class)? * kronecker_phi(eta, w, class)?;
    let t1 = kronecker_phi(hbar - eta, z, class)? * kronecker_phi(eta, z + w, class)?;
    let t2 = kronecker_phi(eta - hbar, w, class)? * kronecker_phi(hbar, z + w, class)?;
    Ok((lhs - t1 - t2).norm())
}

/// Residual of phi(e,z) phi(e,w) = phi(e,z+w) (E1(e)+E1(z)+E1(w)-E1(z+w+e)).
pub fn fay_degeneration_sum_residual(
    eta: Complex64,
    z: Complex64,
    w: Complex64,
    class: &FunctionClass,
) -> Result<f64> {
    let lhs = kronecker_phi(eta, z, class)? * kronecker_phi(eta, w, class)?;
    let rhs = kronecker_phi(eta, z + w, class)?
        * (eisenstein1(eta, class)? + eisenstein1(z, class)? + eisenstein1(w, class)?
            - eisenstein1(z + w + eta, class)?);
    Ok((lhs - rhs).norm())
}

/// Residual of phi(h,z) phi(h,-z) = E2(h) - E2(z).
pub fn fay_degeneration_diff_residual(hbar: Complex64, z: Complex64, class: &FunctionClass) -> Result<f64> {
    let lhs = kronecker_phi(hbar, z, class)? * kronecker_phi(hbar, -z, class)?;
    let rhs = eisenstein2(hbar, class)? - eisenstein2(z, class)?;
    Ok((lhs - rhs).norm())
}

/// Residual of the heat equation 4 pi i dtau theta = dz^2 theta for the odd
/// characteristics, both sides by term-wise differentiated series.
pub fn heat_residual(z: Complex64, tau: &EllipticModulus) -> Result<f64> {
    heat_residual_char(&ThetaChar::odd(), z, tau)
}

/// Heat-equation residual for arbitrary characteristics.
pub fn heat_residual_char(chr: &ThetaChar, z: Complex64, tau: &EllipticModulus) -> Result<f64> {
    let dt = theta_char_dtau(chr, z, tau)?;
    let dzz = theta_char_dz(chr, z, tau, 2)?;
    Ok((Complex64::i() * 2.0 * TWO_PI * dt - dzz).norm())
}

/// dtau log theta(z), from the heat equation (= theta''(z)/(4 pi i theta(z))).
pub fn dtau_log_theta(z: Complex64, tau: &EllipticModulus) -> Result<Complex64> {
    let d = theta_odd_derivatives(z, tau, 2)?;
    Ok(d[2] / d[0] / (Complex64::i() * 2.0 * TWO_PI))
}

/// Residual of 2 pi i dtau log theta(z) = (E1^2(z) - E2(z))/2.
pub fn heat_log_theta_residual(z: Complex64, tau: &EllipticModulus) -> Result<f64> {
    let class = FunctionClass::Elliptic(*tau);
    let lhs = Complex64::i() * TWO_PI * dtau_log_theta(z, tau)?;
    let e1 = eisenstein1(z, &class)?;
    let e2 = eisenstein2(z, &class)?;
    Ok((lhs - (e1 * e1 - e2) / 2.0).norm())
}

/// Residual of 2 pi i dtau phi(z,q) = dz dq phi(z,q), with the tau derivative
/// taken term-wise on every theta factor of phi.
pub fn heat_phi_residual(z: Complex64, q: Complex64, tau: &EllipticModulus) -> Result<f64> {
    let class = FunctionClass::Elliptic(*tau);
    let phi = kronecker_phi(z, q, &class)?;
    // dtau phi / phi = dtau log theta'(0) + dtau log theta(z+q) - dtau log theta(z) - dtau log theta(q)
    let chr = ThetaChar::odd();
    let (vals0, _) = theta_series(&chr, Complex64::new(0.0, 0.0), tau, 1, false)?;
    // dtau theta'(0): term-wise mixed derivative, i pi m^2 * 2 pi i m weights.
    let dtau_dz0 = {
        let a = chr.a();
        let b = chr.b();
        let t = tau.tau();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in -SERIES_MAX_INDEX..=SERIES_MAX_INDEX {
            let m = j as f64 + a;
            let term = theta_term(j as f64, a, b, Complex64::new(0.0, 0.0), t);
            acc += term
                * (Complex64::i() * std::f64::consts::PI * m * m)
                * (Complex64::i() * TWO_PI * m);
            if term.norm() < 1e-250 && j > 5 {
                break;
            }
        }
        acc
    };
    let dtau_log = dtau_dz0 / vals0[1] + dtau_log_theta(z + q, tau)? - dtau_log_theta(z, tau)?
        - dtau_log_theta(q, tau)?;
    let lhs = Complex64::i() * TWO_PI * phi * dtau_log;
    let rhs = kronecker_f_dz(z, q, &class)?;
    Ok((lhs - rhs).norm())
}

/// Dedekind eta function, by the product formula in the nome q = exp(2 pi i tau).
pub fn dedekind_eta(tau: &EllipticModulus) -> Complex64 {
    let q = (Complex64::i() * TWO_PI * tau.tau()).exp();
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qk = q;
    for _ in 0..10_000 {
        prod *= Complex64::new(1.0, 0.0) - qk;
        if qk.norm() < 1e-18 {
            break;
        }
        qk *= q;
    }
    (Complex64::i() * std::f64::consts::PI * tau.tau() / 12.0).exp() * prod
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tau_i() -> EllipticModulus {
        EllipticModulus::new(c(0.0, 1.0)).unwrap()
    }

    #[test]
    fn modulus_rejects_lower_half_plane() {
        assert!(EllipticModulus::new(c(0.3, -0.1)).is_err());
        assert!(EllipticModulus::new(c(0.3, 0.0)).is_err());
    }

    #[test]
    fn odd_theta_vanishes_at_origin() {
        let v = theta_odd(c(0.0, 0.0), &tau_i()).unwrap();
        assert!(v.norm() < 1e-12, "theta(0) = {v}");
    }

    #[test]
    fn theta_shift_by_one_picks_up_characteristic_phase() {
        // theta[a;b](z+1) = exp(2 pi i a) theta[a;b](z)
        let tau = tau_i();
        for (an, ad) in [(1i64, 2i64), (1, 3), (-2, 5)] {
            let chr = ThetaChar::from_parts(an, ad, 1, 4);
            let z = c(0.23, 0.11);
            let lhs = theta_char(&chr, z + 1.0, &tau).unwrap();
            let rhs = chr.shift_multiplier() * theta_char(&chr, z, &tau).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn theta_matches_frozen_high_precision_value() {
        // Reference value from a fixed-range double-double series oracle
        // (see tests/special_functions.rs); frozen here for fast regression.
        let v = theta_odd(c(0.3, 0.0), &tau_i()).unwrap();
        assert!((v.re - -0.737_197_163_718_681_6).abs() < 1e-14, "got {v}");
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn theta_is_odd() {
        let tau = tau_i();
        for z in [c(0.3, 0.1), c(-0.2, 0.4), c(0.45, -0.3)] {
            let a = theta_odd(z, &tau).unwrap();
            let b = theta_odd(-z, &tau).unwrap();
            assert!((a + b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn eisenstein1_is_odd_and_shifts_by_tau() {
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let z = c(0.2, 0.1);
        let e = eisenstein1(z, &class).unwrap();
        let eneg = eisenstein1(-z, &class).unwrap();
        assert!((e + eneg).norm() < 1e-11);
        // E1(z+1) = E1(z), E1(z+tau) = E1(z) - 2 pi i
        let e1p = eisenstein1(z + 1.0, &class).unwrap();
        assert!((e1p - e).norm() < 1e-11);
        let e1t = eisenstein1(z + tau.tau(), &class).unwrap();
        assert!((e1t - e + c(0.0, TWO_PI)).norm() < 1e-10);
    }

    #[test]
    fn eisenstein2_vs_weierstrass_constant() {
        // E2(z) - P(z) = -theta'''(0)/(3 theta'(0))
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let shift = theta_triple_ratio(&tau).unwrap() / 3.0;
        for z in [c(0.31, 0.12), c(-0.17, 0.23)] {
            let d = eisenstein2(z, &class).unwrap() - weierstrass_p(z, &class).unwrap();
            assert!((d + shift).norm() < 1e-11, "diff {d}, shift {shift}");
        }
    }

    #[test]
    fn near_singular_is_reported() {
        let class = FunctionClass::Rational;
        assert!(matches!(
            eisenstein1(c(1e-12, 0.0), &class),
            Err(Error::NearSingular { .. })
        ));
        let ell = FunctionClass::Elliptic(tau_i());
        assert!(eisenstein1(c(1.0, 1.0) + c(1e-12, 0.0), &ell).is_err());
    }

    #[test]
    fn kronecker_phi_is_symmetric_and_rational_value() {
        let class = FunctionClass::Elliptic(tau_i());
        let z = c(0.21, 0.13);
        let w = c(-0.34, 0.08);
        let a = kronecker_phi(z, w, &class).unwrap();
        let b = kronecker_phi(w, z, &class).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
        // rational phi(1,1) = 2
        let r = kronecker_phi(c(1.0, 0.0), c(1.0, 0.0), &FunctionClass::Rational).unwrap();
        assert!((r - 2.0).norm() < 1e-15);
    }

    #[test]
    fn kronecker_phi_local_expansion() {
        // z phi(z,q) -> 1 and (phi - 1/z - E1(q))/z -> (E1^2(q) - P(q))/2
        let class = FunctionClass::Elliptic(tau_i());
        let q = c(0.27, 0.11);
        let z = c(1e-6, 0.0);
        let phi = kronecker_phi(z, q, &class).unwrap();
        assert!((z * phi - 1.0).norm() < 1e-5);
        let e1 = eisenstein1(q, &class).unwrap();
        let target = (e1 * e1 - weierstrass_p(q, &class).unwrap()) / 2.0;
        // Neville extrapolation of the next Laurent coefficient through the
        // points z, z/2, z/4, z/8.
        let est = |zz: Complex64| {
            (kronecker_phi(zz, q, &class).unwrap() - zz.inv() - e1) / zz
        };
        // Base step large enough that the near-zero cancellation of theta(z)
        // does not pollute the quotient.
        let z1 = c(2e-2, 0.0);
        let mut col: Vec<Complex64> = (0..4).map(|k| est(z1 / 2f64.powi(k))).collect();
        for level in 1..4usize {
            let fac = 2f64.powi(level as i32);
            for k in 0..(4 - level) {
                col[k] = (fac * col[k + 1] - col[k]) / (fac - 1.0);
            }
        }
        assert!((col[0] - target).norm() < 1e-7, "r {}, target {target}", col[0]);
    }

    #[test]
    fn kronecker_f_is_derivative_of_phi() {
        let class = FunctionClass::Elliptic(tau_i());
        let z = c(0.31, 0.07);
        let q = c(0.22, -0.14);
        let f = kronecker_f(z, q, &class).unwrap();
        // Central differences at steps 1e-5 and 5e-6 with one Richardson level.
        let fd_at = |h: f64| {
            (kronecker_phi(z, q + h, &class).unwrap() - kronecker_phi(z, q - h, &class).unwrap())
                / (2.0 * h)
        };
        let fd = (4.0 * fd_at(5e-5) - fd_at(1e-4)) / 3.0;
        assert!((f - fd).norm() < 1e-10, "f {f}, fd {fd}");
        // f(0,q) has a removable z -> 0 structure: f(z,q) -> -E2(q) as z -> 0.
        let f0 = kronecker_f(c(1e-7, 0.0), q, &class).unwrap();
        let e2 = eisenstein2(q, &class).unwrap();
        assert!((f0 + e2).norm() < 1e-5, "f0 {f0}, -E2 {}", -e2);
    }

    #[test]
    fn phi_f_cross_identity_gives_p_prime() {
        // phi(z,q) f(z,-q) - f(z,q) phi(z,-q) = P'(q)
        let class = FunctionClass::Elliptic(tau_i());
        let z = c(0.19, 0.23);
        let q = c(0.33, -0.12);
        let lhs = kronecker_phi(z, q, &class).unwrap() * kronecker_f(z, -q, &class).unwrap()
            - kronecker_f(z, q, &class).unwrap() * kronecker_phi(z, -q, &class).unwrap();
        let rhs = weierstrass_p_prime(q, &class).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * rhs.norm().max(1.0), "lhs {lhs}, rhs {rhs}");
    }

    #[test]
    fn phi_alpha_reduces_and_shifts() {
        let tau = tau_i();
        let z = c(0.21, 0.13);
        let w = c(0.42, 0.05);
        let n = 3;
        // alpha = (0,0) is the plain kernel
        let a = phi_alpha((0, 0), n, z, w, &tau).unwrap();
        let b = kronecker_phi(z, w, &FunctionClass::Elliptic(tau)).unwrap();
        assert!((a - b).norm() < 1e-13);
        // phi_alpha(z+1, w) = phi_alpha(z, w) exp(2 pi i alpha_2 / n)
        let alpha = (1, 2);
        let lhs = phi_alpha(alpha, n, z + 1.0, w, &tau).unwrap();
        let rhs = phi_alpha(alpha, n, z, w, &tau).unwrap()
            * (Complex64::i() * TWO_PI * alpha.1 as f64 / n as f64).exp();
        assert!((lhs - rhs).norm() < 1e-11 * rhs.norm());
        // n = 1 leaves only the plain kernel
        let one = phi_alpha((0, 0), 1, z, w, &tau).unwrap();
        assert!((one - b).norm() < 1e-13);
    }

    #[test]
    fn fay_trisecant_and_degenerations() {
        let class = FunctionClass::Elliptic(tau_i());
        let h = c(0.17, 0.06);
        let e = c(-0.21, 0.09);
        let z = c(0.31, 0.04);
        let w = c(0.12, -0.18);
        assert!(fay_residual(h, e, z, w, &class).unwrap() < 1e-10);
        assert!(fay_degeneration_sum_residual(e, z, w, &class).unwrap() < 1e-10);
        assert!(fay_degeneration_diff_residual(h, z, &class).unwrap() < 1e-10);
        // identical spectral shifts route through the degeneration
        assert!(fay_residual(h, h, z, w, &class).unwrap() < 1e-10);
        // rational partial fractions
        let rat = FunctionClass::Rational;
        assert!(fay_residual(c(0.9, 0.2), c(-0.6, 0.4), c(1.3, 0.1), c(0.7, -0.3), &rat).unwrap() < 1e-12);
    }

    #[test]
    fn heat_identities() {
        let tau = tau_i();
        assert!(heat_residual(c(0.3, 0.0), &tau).unwrap() < 1e-10);
        let tau2 = EllipticModulus::new(c(0.0, 2.0)).unwrap();
        assert!(heat_log_theta_residual(c(0.2, 0.1), &tau2).unwrap() < 1e-10);
        assert!(heat_phi_residual(c(0.31, 0.09), c(0.18, -0.07), &tau).unwrap() < 1e-9);
        // characteristic variant
        let chr = ThetaChar::from_parts(1, 3, 1, 2);
        assert!(heat_residual_char(&chr, c(0.11, 0.21), &tau).unwrap() < 1e-9);
    }

    #[test]
    fn series_dtau_matches_finite_difference() {
        let z = c(0.22, 0.09);
        let chr = ThetaChar::odd();
        let tau0 = c(0.3, 0.8);
        let h = 1e-6;
        let tp = EllipticModulus::new(tau0 + h).unwrap();
        let tm = EllipticModulus::new(tau0 - h).unwrap();
        let fd = (theta_char(&chr, z, &tp).unwrap() - theta_char(&chr, z, &tm).unwrap()) / (2.0 * h);
        let an = theta_char_dtau(&chr, z, &EllipticModulus::new(tau0).unwrap()).unwrap();
        assert!((fd - an).norm() < 1e-8, "fd {fd}, an {an}");
    }

    #[test]
    fn squared_e1_sum_identity() {
        // (E1(x)+E1(y)+E1(-x-y))^2 = P(x)+P(y)+P(x+y)
        let class = FunctionClass::Elliptic(tau_i());
        let x = c(0.21, 0.06);
        let y = c(-0.33, 0.14);
        let s = eisenstein1(x, &class).unwrap() + eisenstein1(y, &class).unwrap()
            + eisenstein1(-x - y, &class).unwrap();
        let rhs = weierstrass_p(x, &class).unwrap() + weierstrass_p(y, &class).unwrap()
            + weierstrass_p(x + y, &class).unwrap();
        assert!((s * s - rhs).norm() < 1e-9, "lhs {}, rhs {rhs}", s * s);
    }

    #[test]
    fn e2_matches_second_log_derivative() {
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let z = c(0.28, 0.13);
        let h = 1e-4;
        let lt = |zz: Complex64| theta_odd(zz, &tau).unwrap().ln();
        let fd = -(lt(z + h) - 2.0 * lt(z) + lt(z - h)) / (h * h);
        let e2 = eisenstein2(z, &class).unwrap();
        // The 3-point stencil at this step is roundoff-limited near 4e/h^2.
        assert!((fd - e2).norm() < 1e-6, "fd {fd}, e2 {e2}");
    }

    #[test]
    fn trig_degeneration_of_elliptic_phi() {
        // At tau = 50i the elliptic kernel matches the printed trigonometric
        // one after z -> i pi z and an overall factor i pi:
        //   phi_ell(z, w | i inf) = i pi * phi_trig(i pi z, i pi w)
        let tau = EllipticModulus::new(c(0.0, 50.0)).unwrap();
        let ell = FunctionClass::Elliptic(tau);
        let trig = FunctionClass::Trigonometric;
        let z = c(0.23, 0.04);
        let w = c(-0.31, 0.09);
        let scale = Complex64::i() * std::f64::consts::PI;
        let lhs = kronecker_phi(z, w, &ell).unwrap();
        let rhs = scale * kronecker_phi(scale * z, scale * w, &trig).unwrap();
        assert!((lhs - rhs).norm() < 1e-8, "lhs {lhs} rhs {rhs}");
        // same pattern for E1
        let l1 = eisenstein1(z, &ell).unwrap();
        let r1 = scale * eisenstein1(scale * z, &trig).unwrap();
        assert!((l1 - r1).norm() < 1e-8);
    }

    #[test]
    fn dedekind_eta_at_i() {
        // eta(i) = Gamma(1/4) / (2 pi^{3/4})
        let v = dedekind_eta(&tau_i());
        assert!((v.re - 0.768_225_422_326_056_7).abs() < 1e-12);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn theta_overflow_reports() {
        // Huge imaginary part drives the dominant term past f64 range.
        let r = theta_odd(c(0.0, 600.0), &tau_i());
        assert!(matches!(r, Err(Error::Overflow(_))), "got {r:?}");
    }
}
