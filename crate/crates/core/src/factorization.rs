//! Intertwining matrices g(z,q) = Xi(z,q) (D0)^{-1} per function class, their
//! analytic z- and time-derivatives, the Laurent data of g^{-1} near z = 0,
//! the factorized Lax forms they generate, and the rank-one spin matrices of
//! the gauge-equivalent tops.

use crate::elliptic::{
    self, dedekind_eta, theta_char_dz, theta_odd, theta_odd_dz, EllipticModulus,
    FunctionClass, ThetaChar, TWO_PI,
};
use crate::error::{Error, Result};
use crate::linalg::{cr, residue_at, ComplexMatrix, ResidueConfig, C64};
use crate::models::{diag_product, ModelKind, ModelSpec, PhasePoint};

/// Alternative algebraic routes to the same factorized RS Lax matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsRoute {
    /// D0 Xi^{-1}(z) Xi(z + shift) (D0)^{-1} e^{P/c}.
    Shifted,
    /// Constant-matrix route: the shift replaced by C_h (rational) or Y(h)
    /// (trigonometric) acting inside the same conjugation.
    ConstantMatrix,
    /// Rational-only: the z-independent Vandermonde V(q) with C_h.
    ConstantMatrixQ,
}

/// Alternative algebraic routes to the factorized CM Lax matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmRoute {
    /// P + nu' D0 Xi^{-1} (dz Xi) (D0)^{-1}.
    Derivative,
    /// Constant-matrix route: C_0 (rational) or log Y (trigonometric).
    ConstantMatrix,
}

/// The z-degenerate gauge matrix of a model class, with evaluators for the
/// polynomial/theta block Xi, the diagonal normalization D0, and g itself.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    pub class: FunctionClass,
    pub spectral: bool,
    pub n: usize,
}

impl Intertwiner {
    pub fn new(class: FunctionClass, spectral: bool, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("N must be positive".into()));
        }
        if class.is_elliptic() && !spectral {
            return Err(Error::InvalidSpec(
                "the elliptic intertwiner carries a spectral parameter".into(),
            ));
        }
        Ok(Self { class, spectral, n })
    }

    fn check_distinct(&self, q: &[C64]) -> Result<()> {
        let n = q.len();
        if n != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for an intertwiner of size {}",
                n, self.n
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if elliptic::pole_distance(q[i] - q[j], &self.class) < 1e-10 {
                    return Err(Error::DegenerateConfiguration(format!(
                        "coordinates {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Xi(z, q) and its z-derivatives up to `order`, all in one pass.
    pub fn xi_with_derivatives(&self, z: C64, q: &[C64], order: usize) -> Result<Vec<ComplexMatrix>> {
        self.check_distinct(q)?;
        let n = self.n;
        let mut out = vec![ComplexMatrix::zeros(n, n); order + 1];
        match (&self.class, self.spectral) {
            (FunctionClass::Elliptic(m), _) => {
                let tau_n = m.scaled(n as u32);
                let total: C64 = q.iter().sum();
                for i in 1..=n {
                    let chr = ThetaChar::from_parts(n as i64 - 2 * i as i64, 2 * n as i64, n as i64, 2);
                    for j in 0..n {
                        let arg = z - q[j] * n as f64 + total;
                        for (k, slot) in out.iter_mut().enumerate() {
                            slot[(i - 1, j)] = theta_char_dz(&chr, arg, &tau_n, k)?;
                        }
                    }
                }
            }
            (FunctionClass::Trigonometric, true) => {
                // rows x_j^{i-1} for i < N, and x^{N-1} + (-1)^N / x for i = N,
                // with x_j = exp(-2 q_j + 2 z + 2 qbar); dz x = 2x.
                let qbar: C64 = q.iter().sum::<C64>() / n as f64;
                for j in 0..n {
                    let x = (-q[j] * 2.0 + z * 2.0 + qbar * 2.0).exp();
                    for i in 1..=n {
                        for (k, slot) in out.iter_mut().enumerate() {
                            slot[(i - 1, j)] = if i < n {
                                let pw = (i - 1) as f64;
                                (2.0 * pw).powi(k as i32) * x.powi(i as i32 - 1)
                            } else {
                                let pw = (n - 1) as f64;
                                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                                (2.0 * pw).powi(k as i32) * x.powi(n as i32 - 1)
                                    + sign * (-2.0f64).powi(k as i32) * x.inv()
                            };
                        }
                    }
                }
            }
            (FunctionClass::Trigonometric, false) => {
                // V~_ij = exp((2i - 1 - N)(z - q_j))
                for i in 1..=n {
                    let w = (2 * i) as f64 - 1.0 - n as f64;
                    for j in 0..n {
                        let base = (cr(w) * (z - q[j])).exp();
                        for (k, slot) in out.iter_mut().enumerate() {
                            slot[(i - 1, j)] = w.powi(k as i32) * base;
                        }
                    }
                }
            }
            (FunctionClass::Rational, spectral_flag) => {
                // exponent i-1 for i < N; the top row is N (spectral Xi) or
                // N-1 (the plain Vandermonde used without spectral parameter).
                let qbar: C64 = q.iter().sum::<C64>() / n as f64;
                for i in 1..=n {
                    let rho: i32 = if i < n {
                        (i - 1) as i32
                    } else if spectral_flag {
                        n as i32
                    } else {
                        (n - 1) as i32
                    };
                    for j in 0..n {
                        let base = z - q[j] + qbar;
                        for (k, slot) in out.iter_mut().enumerate() {
                            let mut coef = 1.0;
                            for step in 0..k as i32 {
                                coef *= (rho - step) as f64;
                            }
                            let pw = rho - k as i32;
                            slot[(i - 1, j)] = if pw < 0 && coef == 0.0 {
                                C64::new(0.0, 0.0)
                            } else {
                                cr(coef) * base.powi(pw)
                            };
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn xi(&self, z: C64, q: &[C64]) -> Result<ComplexMatrix> {
        Ok(self.xi_with_derivatives(z, q, 0)?.pop().unwrap())
    }

    /// The diagonal normalization D0 of the class.
    pub fn d0(&self, q: &[C64]) -> Result<Vec<C64>> {
        self.check_distinct(q)?;
        let n = self.n;
        match (&self.class, self.spectral) {
            (FunctionClass::Elliptic(m), _) => {
                let class = FunctionClass::Elliptic(*m);
                diag_product(q, C64::new(0.0, 0.0), &class)
            }
            (FunctionClass::Trigonometric, true) => Ok((0..n)
                .map(|i| {
                    let mut p = cr(1.0);
                    for k in 0..n {
                        if k != i {
                            p *= (-q[i] * 2.0).exp() - (-q[k] * 2.0).exp();
                        }
                    }
                    p
                })
                .collect()),
            (FunctionClass::Trigonometric, false) => {
                diag_product(q, C64::new(0.0, 0.0), &FunctionClass::Trigonometric)
            }
            (FunctionClass::Rational, _) => {
                diag_product(q, C64::new(0.0, 0.0), &FunctionClass::Rational)
            }
        }
    }

    /// Logarithmic time derivative of D0 under velocities v: (d/dt D0_i)/D0_i.
    pub fn d0_log_deriv(&self, q: &[C64], v: &[C64]) -> Result<Vec<C64>> {
        self.check_distinct(q)?;
        let n = self.n;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                if k == i {
                    continue;
                }
                s += match (&self.class, self.spectral) {
                    (FunctionClass::Elliptic(m), _) => {
                        let class = FunctionClass::Elliptic(*m);
                        (v[i] - v[k]) * elliptic::eisenstein1(q[i] - q[k], &class)?
                    }
                    (FunctionClass::Trigonometric, true) => {
                        let ei = (-q[i] * 2.0).exp();
                        let ek = (-q[k] * 2.0).exp();
                        (-v[i] * 2.0 * ei + v[k] * 2.0 * ek) / (ei - ek)
                    }
                    (FunctionClass::Trigonometric, false) => {
                        let d = q[i] - q[k];
                        (v[i] - v[k]) * d.cosh() / d.sinh()
                    }
                    (FunctionClass::Rational, _) => (v[i] - v[k]) / (q[i] - q[k]),
                };
            }
            out.push(s);
        }
        Ok(out)
    }

    /// g(z,q) = Xi(z,q) (D0)^{-1}.
    pub fn g(&self, z: C64, q: &[C64]) -> Result<ComplexMatrix> {
        let xi = self.xi(z, q)?;
        let d0 = self.d0(q)?;
        let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
        Ok(xi.mul_diag(&dinv))
    }

    /// g and its first `order` z-derivatives.
    pub fn g_with_derivatives(&self, z: C64, q: &[C64], order: usize) -> Result<Vec<ComplexMatrix>> {
        let xis = self.xi_with_derivatives(z, q, order)?;
        let d0 = self.d0(q)?;
        let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
        Ok(xis.into_iter().map(|m| m.mul_diag(&dinv)).collect())
    }

    /// Full time derivative of g under coordinate velocities v, assembled from
    /// the chain-rule structure of Xi's argument and the D0 product.
    pub fn g_time_derivative(&self, z: C64, q: &[C64], v: &[C64]) -> Result<ComplexMatrix> {
        let gs = self.g_with_derivatives(z, q, 1)?;
        let g = &gs[0];
        let gp = &gs[1];
        let n = self.n;
        let vsum: C64 = v.iter().sum();
        // Xi-part: g' * (chain matrix); the chain matrix is diagonal plus a
        // multiple of the identity, fixed by how q enters Xi's argument.
        let chain = match (&self.class, self.spectral) {
            // argument z - N q_j + sum q: -N diag(v) + (sum v) I
            (FunctionClass::Elliptic(_), _) => {
                let mut m = ComplexMatrix::zeros(n, n);
                for j in 0..n {
                    m[(j, j)] = -v[j] * n as f64 + vsum;
                }
                m
            }
            // arguments z - q_j + qbar / x_j = exp(2(z - q_j + qbar)):
            // -diag(v) + (sum v / N) I
            (FunctionClass::Rational, _) | (FunctionClass::Trigonometric, true) => {
                let mut m = ComplexMatrix::zeros(n, n);
                for j in 0..n {
                    m[(j, j)] = -v[j] + vsum / n as f64;
                }
                m
            }
            // argument z - q_j: -diag(v)
            (FunctionClass::Trigonometric, false) => {
                let mut m = ComplexMatrix::zeros(n, n);
                for j in 0..n {
                    m[(j, j)] = -v[j];
                }
                m
            }
        };
        let dlog = self.d0_log_deriv(q, v)?;
        let mut gdot = gp.mul_mat(&chain);
        let gd = g.mul_diag(&dlog);
        gdot = &gdot - &gd;
        Ok(gdot)
    }

    /// Explicit modulus derivative of g, using the heat equation to trade the
    /// tau derivative of every theta factor for a second z-derivative:
    /// 2 pi i dtau g = (N/2) g'' - 2 pi i g dtau(log D0). Elliptic class only.
    pub fn g_dtau_explicit_2pii(&self, z: C64, q: &[C64]) -> Result<ComplexMatrix> {
        let m = self
            .class
            .modulus()
            .ok_or_else(|| Error::InvalidSpec("modulus derivative needs the elliptic class".into()))?;
        let gs = self.g_with_derivatives(z, q, 2)?;
        let n = self.n;
        // dtau log D0_i = sum_k theta''(q_ik) / (4 pi i theta(q_ik))
        let mut dlog = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                if k != i {
                    s += elliptic::dtau_log_theta(q[i] - q[k], &m)?;
                }
            }
            dlog.push(s * C64::i() * TWO_PI);
        }
        let part1 = gs[2].scale(cr(n as f64 / 2.0));
        let part2 = gs[0].mul_diag(&dlog);
        Ok(&part1 - &part2)
    }

    /// Closed form of det Xi in the elliptic class:
    /// C_N(tau) theta(z) prod_{i<j} theta(q_j - q_i), with
    /// C_N = (-1)^{N-1} / (i eta(tau))^{(N-1)(N-2)/2}.
    pub fn det_xi_closed_form(&self, z: C64, q: &[C64]) -> Result<C64> {
        let m = self
            .class
            .modulus()
            .ok_or_else(|| Error::InvalidSpec("closed-form determinant needs the elliptic class".into()))?;
        let n = self.n;
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        let expo = ((n - 1) * n.saturating_sub(2) / 2) as i32;
        let cn = cr(sign) / (C64::i() * dedekind_eta(&m)).powi(expo);
        let mut prod = theta_odd(z, &m)?;
        for i in 0..n {
            for j in (i + 1)..n {
                prod *= theta_odd(q[j] - q[i], &m)?;
            }
        }
        Ok(cn * prod)
    }
}

/// Laurent data of g^{-1}(z) near z = 0: the rank-one residue and the
/// constant term.
#[derive(Debug, Clone)]
pub struct LaurentData {
    pub residue: ComplexMatrix,
    pub constant: ComplexMatrix,
}

impl LaurentData {
    /// The column vector rho = (1, ..., 1)^T spanning ker g(0).
    pub fn rho(n: usize) -> Vec<C64> {
        vec![cr(1.0); n]
    }

    /// psi = rho^T residue / N, the row-vector factor of the rank-one residue.
    pub fn psi(&self) -> Vec<C64> {
        let n = self.residue.rows();
        (0..n)
            .map(|j| (0..n).map(|i| self.residue[(i, j)]).sum::<C64>() / n as f64)
            .collect()
    }
}

/// Extracts the Laurent data of g^{-1} at z = 0 by contour quadrature for the
/// residue and a Richardson-extrapolated even average for the constant term.
pub fn laurent_data(iw: &Intertwiner, q: &[C64]) -> Result<LaurentData> {
    let residue = residue_at(
        |z| iw.g(z, q)?.inverse(),
        C64::new(0.0, 0.0),
        ResidueConfig::default(),
    )?;
    let a_est = |eps: f64| -> Result<ComplexMatrix> {
        let gp = iw.g(cr(eps), q)?.inverse()?;
        let gm = iw.g(cr(-eps), q)?.inverse()?;
        Ok((&gp + &gm).scale(cr(0.5)))
    };
    let a1 = a_est(1e-3)?;
    let a2 = a_est(5e-4)?;
    let constant = &a2.scale(cr(4.0 / 3.0)) - &a1.scale(cr(1.0 / 3.0));
    let sv = residue.singular_values()?;
    if sv[0] > 0.0 && sv[1] / sv[0] >= 1e-8 {
        return Err(Error::RankDeficiencyViolation { ratio: sv[1] / sv[0] });
    }
    Ok(LaurentData { residue, constant })
}

/// Lower-triangular binomial shift matrix with (i,j) entry
/// (i-1)! lambda^{i-j} / ((j-1)!(i-j)!); satisfies V(z + lambda) = C V(z).
pub fn binomial_shift_matrix(lambda: C64, n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 1..=n {
        for j in 1..=i {
            let mut coef = 1.0;
            for t in 0..(i - j) {
                coef *= (i - 1 - t) as f64 / (t + 1) as f64;
            }
            m[(i - 1, j - 1)] = cr(coef) * lambda.powi((i - j) as i32);
        }
    }
    m
}

/// Subdiagonal derivative matrix with (i, i-1) entry i-1; V'(z) = C_0 V(z).
pub fn derivative_matrix(n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 2..=n {
        m[(i - 1, i - 2)] = cr((i - 1) as f64);
    }
    m
}

/// Diagonal exponential shift Y(lambda)_ii = exp(-(N+1-2i) lambda) of the
/// trigonometric Vandermonde.
pub fn y_matrix(lambda: C64, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (-(cr((n as f64) + 1.0 - 2.0 * (i + 1) as f64)) * lambda).exp()
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Diagonal logarithm (log Y)_ii = nu (2i - 1 - N).
pub fn log_y_matrix(nu: C64, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            nu * (2.0 * (i + 1) as f64 - 1.0 - n as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Plain power Vandermonde V(q)_ij = (-q_j)^{i-1} of the rational class.
pub fn vandermonde_q(q: &[C64]) -> ComplexMatrix {
    let n = q.len();
    ComplexMatrix::from_fn(n, n, |i, j| (-q[j]).powi(i as i32))
}

fn exp_p_over_c(phase: &PhasePoint, c_light: C64) -> Vec<C64> {
    phase.p.iter().map(|p| (p / c_light).exp()).collect()
}

/// Scalar normalization of the elliptic factorized RS form: theta'(0)/theta(h).
pub fn elliptic_rs_prefactor(hbar: C64, tau: &EllipticModulus) -> Result<C64> {
    Ok(theta_odd_dz(C64::new(0.0, 0.0), tau, 1)? / theta_odd(hbar, tau)?)
}

/// The factorized RS Lax matrix. For the elliptic class this is
/// (theta'(0)/theta(h)) g^{-1}(z) g(z + N h) e^{P/c}; the degenerate classes
/// use the D0-conjugated shift with step h, optionally replaced by the
/// constant-matrix routes.
pub fn factorized_lax_rs(
    iw: &Intertwiner,
    phase: &PhasePoint,
    z: C64,
    hbar: C64,
    c_light: C64,
    route: RsRoute,
) -> Result<ComplexMatrix> {
    let n = iw.n;
    let ep = exp_p_over_c(phase, c_light);
    match &iw.class {
        FunctionClass::Elliptic(m) => {
            if route != RsRoute::Shifted {
                return Err(Error::InvalidSpec("elliptic factorization has no constant-matrix route".into()));
            }
            let pref = elliptic_rs_prefactor(hbar, m)?;
            let g1 = iw.g(z, &phase.q)?;
            let g2 = iw.g(z + hbar * n as f64, &phase.q)?;
            Ok(g1.inverse()?.mul_mat(&g2).mul_diag(&ep).scale(pref))
        }
        _ => {
            let d0 = iw.d0(&phase.q)?;
            let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
            let core = match route {
                RsRoute::Shifted => {
                    let x1 = iw.xi(z, &phase.q)?;
                    let x2 = iw.xi(z + hbar, &phase.q)?;
                    x1.inverse()?.mul_mat(&x2)
                }
                RsRoute::ConstantMatrix => {
                    let x1 = iw.xi(z, &phase.q)?;
                    let cm = match &iw.class {
                        FunctionClass::Rational => binomial_shift_matrix(hbar, n),
                        FunctionClass::Trigonometric => {
                            if iw.spectral {
                                return Err(Error::InvalidSpec(
                                    "the spectral trigonometric block has no constant shift".into(),
                                ));
                            }
                            y_matrix(hbar, n)
                        }
                        FunctionClass::Elliptic(_) => unreachable!(),
                    };
                    x1.inverse()?.mul_mat(&cm).mul_mat(&x1)
                }
                RsRoute::ConstantMatrixQ => {
                    if iw.class != FunctionClass::Rational || iw.spectral {
                        return Err(Error::InvalidSpec(
                            "the V(q) route exists for the rational class without spectral parameter".into(),
                        ));
                    }
                    let v = vandermonde_q(&phase.q);
                    v.inverse()?.mul_mat(&binomial_shift_matrix(hbar, n)).mul_mat(&v)
                }
            };
            Ok(ComplexMatrix::diag_mul(&d0, &core.mul_diag(&dinv)).mul_diag(&ep))
        }
    }
}

/// The factorized form of the primed RS Lax matrix, obtained from the
/// unprimed factorization by transposition and q -> -q, conjugated back by
/// the primed velocity diagonal.
pub fn factorized_lax_rs_prime(
    iw: &Intertwiner,
    phase: &PhasePoint,
    z: C64,
    hbar: C64,
    c_light: C64,
) -> Result<ComplexMatrix> {
    let n = iw.n;
    if let FunctionClass::Elliptic(m) = &iw.class {
        // (theta'(0)/theta(h)) (D^h)^{-1} Xi^T(z+Nh,-q) (Xi^T)^{-1}(z,-q) D^h e^{P/c}
        let pref = elliptic_rs_prefactor(hbar, m)?;
        let qneg: Vec<C64> = phase.q.iter().map(|x| -x).collect();
        let dp = diag_product(&phase.q, hbar, &iw.class)?;
        let dpinv: Vec<C64> = dp.iter().map(|x| x.inv()).collect();
        let x1t = iw.xi(z + hbar * n as f64, &qneg)?.transpose();
        let x2t = iw.xi(z, &qneg)?.transpose();
        let ep = exp_p_over_c(phase, c_light);
        let core = x1t.mul_mat(&x2t.inverse()?);
        return Ok(ComplexMatrix::diag_mul(&dpinv, &core.mul_diag(&dp))
            .mul_diag(&ep)
            .scale(pref));
    }
    // Degenerate classes via the same transposition route:
    // L'(q,p) = X^{-1} L(-q,p)^T X with X = diag of primed velocities.
    let qneg: Vec<C64> = phase.q.iter().map(|x| -x).collect();
    let neg_phase = PhasePoint::new(qneg, phase.p.clone())?;
    let lt = factorized_lax_rs(iw, &neg_phase, z, hbar, c_light, RsRoute::Shifted)?.transpose();
    let num = diag_product(&phase.q, hbar, &iw.class)?;
    let den = diag_product(&phase.q, C64::new(0.0, 0.0), &iw.class)?;
    let x: Vec<C64> = (0..n)
        .map(|i| (phase.p[i] / c_light).exp() * num[i] / den[i])
        .collect();
    let xinv: Vec<C64> = x.iter().map(|v| v.inv()).collect();
    Ok(ComplexMatrix::diag_mul(&xinv, &lt.mul_diag(&x)))
}

/// The factorized CM Lax matrix P + nu' g^{-1} g' in the class conventions
/// (nu' = N nu for the elliptic class, nu otherwise).
pub fn factorized_lax_cm(
    iw: &Intertwiner,
    phase: &PhasePoint,
    z: C64,
    nu: C64,
    route: CmRoute,
) -> Result<ComplexMatrix> {
    let n = iw.n;
    let p = ComplexMatrix::diagonal(&phase.p);
    match &iw.class {
        FunctionClass::Elliptic(_) => {
            if route != CmRoute::Derivative {
                return Err(Error::InvalidSpec("elliptic factorization has no constant-matrix route".into()));
            }
            let gs = iw.g_with_derivatives(z, &phase.q, 1)?;
            let core = gs[0].inverse()?.mul_mat(&gs[1]);
            Ok(&p + &core.scale(nu * n as f64))
        }
        _ => {
            let core = match route {
                CmRoute::Derivative => {
                    let xis = iw.xi_with_derivatives(z, &phase.q, 1)?;
                    xis[0].inverse()?.mul_mat(&xis[1])
                }
                CmRoute::ConstantMatrix => match &iw.class {
                    FunctionClass::Rational => {
                        if iw.spectral {
                            return Err(Error::InvalidSpec(
                                "the C0 route exists for the rational class without spectral parameter".into(),
                            ));
                        }
                        let v = vandermonde_q(&phase.q);
                        v.inverse()?.mul_mat(&derivative_matrix(n)).mul_mat(&v)
                    }
                    FunctionClass::Trigonometric => {
                        if iw.spectral {
                            return Err(Error::InvalidSpec(
                                "the log Y route exists for the trigonometric class without spectral parameter".into(),
                            ));
                        }
                        let x = iw.xi(z, &phase.q)?;
                        // log Y carries the coupling; strip it from the outer scale.
                        let ly = log_y_matrix(cr(1.0), n);
                        x.inverse()?.mul_mat(&ly).mul_mat(&x)
                    }
                    FunctionClass::Elliptic(_) => unreachable!(),
                },
            };
            let d0 = iw.d0(&phase.q)?;
            let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
            let dressed = ComplexMatrix::diag_mul(&d0, &core.mul_diag(&dinv));
            Ok(&p + &dressed.scale(nu))
        }
    }
}

/// The rank-one spin matrix of the gauge-equivalent top.
///
/// Relativistic: S = (theta'(0)/theta(h)) g(Nh) e^{P/c} gbreve(0).
/// Non-relativistic: S = g(0) P gbreve(0) + N nu g'(0) gbreve(0).
pub fn spin_from_phase(
    iw: &Intertwiner,
    phase: &PhasePoint,
    hbar: C64,
    c_light: C64,
    relativistic: bool,
    nu: C64,
) -> Result<ComplexMatrix> {
    let m = iw
        .class
        .modulus()
        .ok_or_else(|| Error::InvalidSpec("spin matrices use the elliptic class".into()))?;
    let n = iw.n;
    let ld = laurent_data(iw, &phase.q)?;
    let s = if relativistic {
        let pref = elliptic_rs_prefactor(hbar, &m)?;
        let ep = exp_p_over_c(phase, c_light);
        iw.g(hbar * n as f64, &phase.q)?
            .mul_diag(&ep)
            .mul_mat(&ld.residue)
            .scale(pref)
    } else {
        let gs = iw.g_with_derivatives(C64::new(0.0, 0.0), &phase.q, 1)?;
        let p = ComplexMatrix::diagonal(&phase.p);
        let t1 = gs[0].mul_mat(&p).mul_mat(&ld.residue);
        let t2 = gs[1].mul_mat(&ld.residue).scale(nu * n as f64);
        &t1 + &t2
    };
    let sv = s.singular_values()?;
    if sv[0] > 0.0 && sv[1] / sv[0] >= 1e-8 {
        return Err(Error::RankDeficiencyViolation { ratio: sv[1] / sv[0] });
    }
    Ok(s)
}

/// psi through the velocity route:
/// (theta(h)/theta'(0)) rho^T D^{-h} (D^0)^{-1} g^{-1}(N h).
/// Agrees with LaurentData::psi for every h.
pub fn psi_from_velocities(iw: &Intertwiner, q: &[C64], hbar: C64) -> Result<Vec<C64>> {
    let m = iw
        .class
        .modulus()
        .ok_or_else(|| Error::InvalidSpec("psi formulas use the elliptic class".into()))?;
    let n = iw.n;
    let class = FunctionClass::Elliptic(m);
    let dm = diag_product(q, -hbar, &class)?;
    let d0 = diag_product(q, C64::new(0.0, 0.0), &class)?;
    let ginv = iw.g(hbar * n as f64, q)?.inverse()?;
    let pref = theta_odd(hbar, &m)? / theta_odd_dz(C64::new(0.0, 0.0), &m, 1)?;
    let row: Vec<C64> = (0..n).map(|j| dm[j] / d0[j]).collect();
    Ok((0..n)
        .map(|j| pref * (0..n).map(|k| row[k] * ginv[(k, j)]).sum::<C64>())
        .collect())
}

/// Residual of the column-shift identity of the elliptic intertwiner:
/// (theta(h)/theta'(0)) sum_k g_ik(z) phi(z, q_kj + h)
///   = g_ij(z + N h) prod_{m != j} theta(q_mj)/theta(q_mj + h).
pub fn column_shift_residual(iw: &Intertwiner, q: &[C64], z: C64, hbar: C64) -> Result<f64> {
    let m = iw
        .class
        .modulus()
        .ok_or_else(|| Error::InvalidSpec("the column identity is elliptic".into()))?;
    let class = FunctionClass::Elliptic(m);
    let n = iw.n;
    let g1 = iw.g(z, q)?;
    let g2 = iw.g(z + hbar * n as f64, q)?;
    let pref = theta_odd(hbar, &m)? / theta_odd_dz(C64::new(0.0, 0.0), &m, 1)?;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let mut lhs = C64::new(0.0, 0.0);
            for k in 0..n {
                lhs += g1[(i, k)] * elliptic::kronecker_phi(z, q[k] - q[j] + hbar, &class)?;
            }
            lhs *= pref;
            let mut ratio = cr(1.0);
            for mm in 0..n {
                if mm != j {
                    ratio *= theta_odd(q[mm] - q[j], &m)? / theta_odd(q[mm] - q[j] + hbar, &m)?;
                }
            }
            let rhs = g2[(i, j)] * ratio;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

/// Residual of the gauge equivalence L^RS(z) = g^{-1}(z) L^h(S(p,q), z) g(z),
/// with L^h built from the Baxter-Belavin R-matrix trace. Also asserts the
/// second-order-pole cancellation g(0) Res L^RS gbreve(0) = 0.
pub fn gauge_equivalence_residual(
    phase: &PhasePoint,
    z: C64,
    hbar: C64,
    c_light: C64,
    tau: &EllipticModulus,
) -> Result<f64> {
    let n = phase.n();
    let class = FunctionClass::Elliptic(*tau);
    let iw = Intertwiner::new(class, true, n)?;
    let spec = ModelSpec::rs(class, true, n, hbar, c_light)?;
    let s = spin_from_phase(&iw, phase, hbar, c_light, true, C64::new(0.0, 0.0))?;
    let lh = crate::rmatrix::lax_from_r_trace(&s, z, hbar, tau)?;
    let g = iw.g(z, &phase.q)?;
    let direct = crate::models::lax_rs(&spec, phase, z)?;
    let conj = g.inverse()?.mul_mat(&lh).mul_mat(&g);
    let resid = (&direct - &conj).norm_max();

    // pole cancellation sub-check
    let ld = laurent_data(&iw, &phase.q)?;
    let res_l = residue_at(|w| crate::models::lax_rs(&spec, phase, w), C64::new(0.0, 0.0), ResidueConfig::default())?;
    let g0 = iw.g(C64::new(0.0, 0.0), &phase.q)?;
    let cancel = g0.mul_mat(&res_l).mul_mat(&ld.residue).norm_max();
    if cancel > 1e-8 * (1.0 + res_l.norm_max()) {
        return Err(Error::NonConverged(format!(
            "second-order pole cancellation violated: {cancel:e}"
        )));
    }
    Ok(resid)
}

/// Builds an intertwiner matching a many-body model spec.
pub fn intertwiner_for(spec: &ModelSpec) -> Result<Intertwiner> {
    let spectral = match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime | ModelKind::Cm => spec.spectral,
        _ => true,
    };
    Intertwiner::new(spec.class, spectral, spec.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::models::{lax_cm, lax_rs};

    fn tau_i() -> EllipticModulus {
        EllipticModulus::new(c(0.0, 1.0)).unwrap()
    }

    fn phase3() -> PhasePoint {
        PhasePoint::new(
            vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)],
            vec![c(0.15, -0.07), c(-0.4, 0.02), c(0.3, 0.1)],
        )
        .unwrap()
    }

    #[test]
    fn elliptic_rs_factorization_matches_direct() {
        let class = FunctionClass::Elliptic(tau_i());
        let phase = phase3();
        let h = c(0.11, 0.02);
        let cl = c(1.3, 0.0);
        let z = c(0.27, 0.13);
        let spec = ModelSpec::rs(class, true, 3, h, cl).unwrap();
        let iw = Intertwiner::new(class, true, 3).unwrap();
        let direct = lax_rs(&spec, &phase, z).unwrap();
        let fact = factorized_lax_rs(&iw, &phase, z, h, cl, RsRoute::Shifted).unwrap();
        let err = (&direct - &fact).norm_max();
        assert!(err < 1e-10 * (1.0 + direct.norm_max()), "err {err:e}");
    }

    #[test]
    fn elliptic_rs_prime_factorization_matches_direct() {
        let class = FunctionClass::Elliptic(tau_i());
        let phase = phase3();
        let h = c(0.11, 0.02);
        let cl = c(1.3, 0.0);
        let z = c(0.27, 0.13);
        let spec = ModelSpec::rs_prime(class, true, 3, h, cl).unwrap();
        let iw = Intertwiner::new(class, true, 3).unwrap();
        let direct = lax_rs(&spec, &phase, z).unwrap();
        let fact = factorized_lax_rs_prime(&iw, &phase, z, h, cl).unwrap();
        let err = (&direct - &fact).norm_max();
        assert!(err < 1e-10 * (1.0 + direct.norm_max()), "err {err:e}");
    }

    #[test]
    fn elliptic_cm_factorization_and_explicit_entries() {
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let phase = phase3();
        let nu = c(0.37, 0.0);
        let z = c(0.27, 0.13);
        let spec = ModelSpec::cm(class, true, 3, nu).unwrap();
        let iw = Intertwiner::new(class, true, 3).unwrap();
        let direct = lax_cm(&spec, &phase, z).unwrap();
        let fact = factorized_lax_cm(&iw, &phase, z, nu, CmRoute::Derivative).unwrap();
        assert!((&direct - &fact).norm_max() < 1e-10 * (1.0 + direct.norm_max()));
        // explicit entries of g^{-1} g':
        // (1/N)d_ij (E1(z) - sum E1(q_ik)) + (1/N)(1-d_ij) phi(z, q_ij)
        let gs = iw.g_with_derivatives(z, &phase.q, 1).unwrap();
        let gig = gs[0].inverse().unwrap().mul_mat(&gs[1]);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j {
                    let mut s = elliptic::eisenstein1(z, &class).unwrap();
                    for k in 0..3 {
                        if k != i {
                            s -= elliptic::eisenstein1(phase.qij(i, k), &class).unwrap();
                        }
                    }
                    s / 3.0
                } else {
                    elliptic::kronecker_phi(z, phase.qij(i, j), &class).unwrap() / 3.0
                };
                assert!((gig[(i, j)] - expect).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn all_degenerate_class_factorizations_match_direct() {
        let phase = PhasePoint::new(
            vec![c(1.1, 0.2), c(-0.4, -0.15), c(0.3, 0.35)],
            vec![c(0.15, -0.07), c(-0.4, 0.02), c(0.3, 0.1)],
        )
        .unwrap();
        let h = c(0.21, 0.04);
        let cl = c(1.1, 0.0);
        let nu = c(0.41, 0.13);
        let z = c(0.31, 0.17);
        for class in [FunctionClass::Trigonometric, FunctionClass::Rational] {
            for spectral in [true, false] {
                let iw = Intertwiner::new(class, spectral, 3).unwrap();
                let rs = ModelSpec::rs(class, spectral, 3, h, cl).unwrap();
                let direct = lax_rs(&rs, &phase, z).unwrap();
                let fact = factorized_lax_rs(&iw, &phase, z, h, cl, RsRoute::Shifted).unwrap();
                assert!(
                    (&direct - &fact).norm_max() < 1e-10 * (1.0 + direct.norm_max()),
                    "RS {class:?} spectral={spectral}"
                );
                let prime = ModelSpec::rs_prime(class, spectral, 3, h, cl).unwrap();
                let directp = lax_rs(&prime, &phase, z).unwrap();
                let factp = factorized_lax_rs_prime(&iw, &phase, z, h, cl).unwrap();
                assert!(
                    (&directp - &factp).norm_max() < 1e-10 * (1.0 + directp.norm_max()),
                    "RS' {class:?} spectral={spectral}"
                );
                let cm = ModelSpec::cm(class, spectral, 3, nu).unwrap();
                let directc = lax_cm(&cm, &phase, z).unwrap();
                let factc = factorized_lax_cm(&iw, &phase, z, nu, CmRoute::Derivative).unwrap();
                assert!(
                    (&directc - &factc).norm_max() < 1e-10 * (1.0 + directc.norm_max()),
                    "CM {class:?} spectral={spectral}"
                );
                // constant-matrix routes where they exist
                if !spectral {
                    let fq = factorized_lax_rs(&iw, &phase, z, h, cl, RsRoute::ConstantMatrix).unwrap();
                    assert!((&direct - &fq).norm_max() < 1e-10 * (1.0 + direct.norm_max()));
                    let fc = factorized_lax_cm(&iw, &phase, z, nu, CmRoute::ConstantMatrix).unwrap();
                    assert!((&directc - &fc).norm_max() < 1e-10 * (1.0 + directc.norm_max()));
                }
                if class == FunctionClass::Rational && !spectral {
                    let fq = factorized_lax_rs(&iw, &phase, z, h, cl, RsRoute::ConstantMatrixQ).unwrap();
                    assert!((&direct - &fq).norm_max() < 1e-10 * (1.0 + direct.norm_max()));
                }
            }
        }
    }

    #[test]
    fn vandermonde_shift_and_derivative_identities() {
        // V(z + h) = C_h V(z) and V'(z) = C_0 V(z)
        let iw = Intertwiner::new(FunctionClass::Rational, false, 4).unwrap();
        let q = vec![c(1.1, 0.2), c(-0.4, -0.15), c(0.3, 0.35), c(-1.2, 0.1)];
        let z = c(0.31, 0.17);
        let h = c(0.21, 0.04);
        let v1 = iw.xi(z, &q).unwrap();
        let v2 = iw.xi(z + h, &q).unwrap();
        let ch = binomial_shift_matrix(h, 4);
        assert!((&v2 - &ch.mul_mat(&v1)).norm_max() < 1e-11);
        let xis = iw.xi_with_derivatives(z, &q, 1).unwrap();
        let c0 = derivative_matrix(4);
        assert!((&xis[1] - &c0.mul_mat(&xis[0])).norm_max() < 1e-11);
        // the trig analog V~(z+h) = Y'(h) V~(z)
        let iwt = Intertwiner::new(FunctionClass::Trigonometric, false, 4).unwrap();
        let vt1 = iwt.xi(z, &q).unwrap();
        let vt2 = iwt.xi(z + h, &q).unwrap();
        let y = y_matrix(h, 4);
        assert!((&vt2 - &y.mul_mat(&vt1)).norm_max() < 1e-11);
    }

    #[test]
    fn rational_n2_vandermonde_matches_hand_value() {
        let q = vec![c(1.0, 0.0), c(-1.0, 0.0)];
        let v = vandermonde_q(&q);
        assert!((v[(0, 0)] - cr(1.0)).norm() < 1e-15);
        assert!((v[(0, 1)] - cr(1.0)).norm() < 1e-15);
        assert!((v[(1, 0)] - cr(-1.0)).norm() < 1e-15);
        assert!((v[(1, 1)] - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn det_xi_matches_closed_form() {
        for n in [2usize, 3, 4] {
            let iw = Intertwiner::new(FunctionClass::Elliptic(tau_i()), true, n).unwrap();
            let q: Vec<C64> = (0..n)
                .map(|k| c(0.21 - 0.17 * k as f64, 0.11 * (k as f64 - 0.4)))
                .collect();
            let z = c(0.27, 0.13);
            let d = iw.xi(z, &q).unwrap().det().unwrap();
            let pred = iw.det_xi_closed_form(z, &q).unwrap();
            assert!((d - pred).norm() < 1e-9 * d.norm(), "N={n}: det {d}, closed {pred}");
        }
    }

    #[test]
    fn det_g_has_first_order_zero_and_rho_kernel() {
        for (class, spectral) in [
            (FunctionClass::Elliptic(tau_i()), true),
            (FunctionClass::Rational, true),
            (FunctionClass::Trigonometric, true),
        ] {
            let iw = Intertwiner::new(class, spectral, 3).unwrap();
            let q = vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)];
            // log|det g(eps)| - log eps constant across three decades; the
            // trigonometric determinant has a linear Taylor correction, so
            // there the constancy is first order in eps.
            let vals: Vec<f64> = [1e-3, 1e-4, 1e-5]
                .iter()
                .map(|&e| iw.g(cr(e), &q).unwrap().det().unwrap().norm().ln() - e.ln())
                .collect();
            if class == FunctionClass::Trigonometric {
                assert!((vals[0] - vals[1]).abs() < 1e-2, "{class:?}: {vals:?}");
                assert!((vals[1] - vals[2]).abs() < 1e-3, "{class:?}: {vals:?}");
            } else {
                assert!((vals[0] - vals[1]).abs() < 1e-5, "{class:?}: {vals:?}");
                assert!((vals[1] - vals[2]).abs() < 1e-6, "{class:?}: {vals:?}");
            }
            // g(0) rho = 0
            let g0 = iw.g(C64::new(0.0, 0.0), &q).unwrap();
            let rho = LaurentData::rho(3);
            let img = g0.matvec(&rho);
            let scale = g0.norm_max();
            for v in img {
                assert!(v.norm() < 1e-9 * scale, "{class:?}");
            }
        }
    }

    #[test]
    fn laurent_residue_is_rank_one_with_rho_factor() {
        let iw = Intertwiner::new(FunctionClass::Elliptic(tau_i()), true, 3).unwrap();
        let q = vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)];
        let ld = laurent_data(&iw, &q).unwrap();
        let sv = ld.residue.singular_values().unwrap();
        assert!(sv[1] / sv[0] < 1e-10);
        // residue = rho (x) psi
        let psi = ld.psi();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ld.residue[(i, j)] - psi[j]).norm() < 1e-9 * sv[0]);
            }
        }
        // toy modification diag(z,1,...,1): residue = e1 (x) e1
        let toy = residue_at(
            |z| {
                ComplexMatrix::from_rows(vec![
                    vec![z, C64::new(0.0, 0.0)],
                    vec![C64::new(0.0, 0.0), cr(1.0)],
                ])?
                .inverse()
            },
            C64::new(0.0, 0.0),
            ResidueConfig::default(),
        )
        .unwrap();
        assert!((toy[(0, 0)] - cr(1.0)).norm() < 1e-12);
        assert!(toy[(0, 1)].norm() + toy[(1, 0)].norm() + toy[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn psi_routes_agree_and_are_hbar_independent() {
        let iw = Intertwiner::new(FunctionClass::Elliptic(tau_i()), true, 3).unwrap();
        let q = vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)];
        let ld = laurent_data(&iw, &q).unwrap();
        let psi0 = ld.psi();
        for h in [c(0.11, 0.02), c(0.23, -0.07)] {
            let psi1 = psi_from_velocities(&iw, &q, h).unwrap();
            // exact agreement, which subsumes collinearity
            for (a, b) in psi0.iter().zip(&psi1) {
                assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()), "h = {h}");
            }
        }
    }

    #[test]
    fn spin_matrices_are_rank_one_and_related_in_the_limit() {
        let iw = Intertwiner::new(FunctionClass::Elliptic(tau_i()), true, 3).unwrap();
        let phase = phase3();
        let nu = c(0.29, 0.0);
        let srel = spin_from_phase(&iw, &phase, c(0.11, 0.02), cr(1.3), true, nu).unwrap();
        let sv = srel.singular_values().unwrap();
        assert!(sv[1] / sv[0] < 1e-10);
        let snon = spin_from_phase(&iw, &phase, c(0.11, 0.02), cr(1.3), false, nu).unwrap();
        let sv = snon.singular_values().unwrap();
        assert!(sv[1] / sv[0] < 1e-10);
        // nu S_rel(h = nu/c) -> S_nonrel at order >= 1 in 1/c
        let mut errs = Vec::new();
        for cc in [1e2, 1e3, 1e4] {
            let h = nu / cc;
            let sr = spin_from_phase(&iw, &phase, h, cr(cc), true, nu).unwrap();
            errs.push((&sr.scale(nu) - &snon).norm_max());
        }
        let slope = (errs[0] / errs[2]).log10() / 2.0;
        // order >= 1 in 1/c, allowing for fit noise at the last decade
        assert!(slope >= 0.95, "errors {errs:?}, slope {slope}");
    }

    #[test]
    fn spin_is_residue_of_gauged_lax() {
        // S = Res_{z=0} g(z) L^RS(z) g^{-1}(z)
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let iw = Intertwiner::new(class, true, 2).unwrap();
        let phase = PhasePoint::new(
            vec![c(0.31, 0.05), c(-0.22, -0.08)],
            vec![c(0.15, -0.07), c(-0.4, 0.02)],
        )
        .unwrap();
        let h = c(0.17, 0.03);
        let cl = c(1.3, 0.0);
        let spec = ModelSpec::rs(class, true, 2, h, cl).unwrap();
        let s = spin_from_phase(&iw, &phase, h, cl, true, C64::new(0.0, 0.0)).unwrap();
        let res = residue_at(
            |z| {
                let g = iw.g(z, &phase.q)?;
                Ok(g.mul_mat(&crate::models::lax_rs(&spec, &phase, z)?).mul_mat(&g.inverse()?))
            },
            C64::new(0.0, 0.0),
            ResidueConfig::default(),
        )
        .unwrap();
        assert!((&res - &s).norm_max() < 1e-9, "{:e}", (&res - &s).norm_max());
    }

    #[test]
    fn column_shift_identity_holds() {
        let iw = Intertwiner::new(FunctionClass::Elliptic(tau_i()), true, 3).unwrap();
        let q = vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)];
        let r = column_shift_residual(&iw, &q, c(0.27, 0.13), c(0.11, 0.02)).unwrap();
        assert!(r < 1e-9, "residual {r:e}");
    }

    #[test]
    fn nonrelativistic_limit_of_factorized_rs() {
        // g^{-1}(z) g(z + N h) e^{P/c} = 1 + L^CM/c + O(c^{-2}) at h = nu/c
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let iw = Intertwiner::new(class, true, 3).unwrap();
        let phase = phase3();
        let nu = c(0.37, 0.0);
        let z = c(0.27, 0.13);
        let mut errs = Vec::new();
        for cc in [1e2, 1e3, 1e4] {
            let h = nu / cc;
            let g1 = iw.g(z, &phase.q).unwrap();
            let g2 = iw.g(z + h * 3.0, &phase.q).unwrap();
            let ep: Vec<C64> = phase.p.iter().map(|p| (p / cc).exp()).collect();
            let prod = g1.inverse().unwrap().mul_mat(&g2).mul_diag(&ep);
            let spec = ModelSpec::cm(class, true, 3, nu).unwrap();
            let lcm = lax_cm(&spec, &phase, z).unwrap();
            let pred = &ComplexMatrix::identity(3) + &lcm.scale(cr(1.0 / cc));
            errs.push((&prod - &pred).norm_max());
        }
        let slope = (errs[0] / errs[2]).log10() / 2.0;
        assert!(slope >= 1.0, "errors {errs:?}");
    }

    #[test]
    fn top_boundary_conditions_of_gauged_cm() {
        // L_top = g L^CM g^{-1} obeys L(z+1) = Q^{-1} L Q and
        // L(z+tau) = Lambda^{-1} L Lambda.
        let tau = tau_i();
        let class = FunctionClass::Elliptic(tau);
        let iw = Intertwiner::new(class, true, 2).unwrap();
        let phase = PhasePoint::new(
            vec![c(0.31, 0.05), c(-0.22, -0.08)],
            vec![c(0.15, -0.07), c(-0.4, 0.02)],
        )
        .unwrap();
        let nu = c(0.29, 0.0);
        let spec = ModelSpec::cm(class, true, 2, nu).unwrap();
        let ltop = |z: C64| -> ComplexMatrix {
            let g = iw.g(z, &phase.q).unwrap();
            let l = lax_cm(&spec, &phase, z).unwrap();
            g.mul_mat(&l).mul_mat(&g.inverse().unwrap())
        };
        let z = c(0.27, 0.13);
        let l0 = ltop(z);
        let l1 = ltop(z + 1.0);
        let qm = crate::linalg::clock_matrix(2);
        let conj = qm.inverse().unwrap().mul_mat(&l0).mul_mat(&qm);
        assert!((&l1 - &conj).norm_max() < 1e-9, "{:e}", (&l1 - &conj).norm_max());
        // Under z -> z + tau the identity-proportional E1(z) part of the CM
        // Lax matrix shifts by -2 pi i nu, so the boundary condition holds for
        // the trace-free parts.
        let lt = ltop(z + tau.tau()).trace_free();
        let lam = crate::linalg::shift_matrix(2);
        let conj = lam.inverse().unwrap().mul_mat(&l0.trace_free()).mul_mat(&lam);
        assert!((&lt - &conj).norm_max() < 1e-9, "{:e}", (&lt - &conj).norm_max());
    }

    #[test]
    fn degenerate_configuration_is_rejected() {
        let iw = Intertwiner::new(FunctionClass::Rational, true, 2).unwrap();
        let q = vec![cr(1.0), cr(1.0)];
        assert!(matches!(iw.xi(cr(0.3), &q), Err(Error::DegenerateConfiguration(_))));
    }

    #[test]
    fn g_time_derivative_matches_finite_difference() {
        for (class, spectral) in [
            (FunctionClass::Elliptic(tau_i()), true),
            (FunctionClass::Trigonometric, true),
            (FunctionClass::Trigonometric, false),
            (FunctionClass::Rational, true),
            (FunctionClass::Rational, false),
        ] {
            let iw = Intertwiner::new(class, spectral, 3).unwrap();
            let q = vec![c(0.21, 0.11), c(-0.32, 0.05), c(0.05, -0.22)];
            let v = vec![c(0.4, -0.1), c(-0.2, 0.3), c(0.1, 0.05)];
            let z = c(0.27, 0.13);
            let gdot = iw.g_time_derivative(z, &q, &v).unwrap();
            let h = 1e-6;
            let qp: Vec<C64> = q.iter().zip(&v).map(|(qq, vv)| qq + vv * h).collect();
            let qm: Vec<C64> = q.iter().zip(&v).map(|(qq, vv)| qq - vv * h).collect();
            let fd = (&iw.g(z, &qp).unwrap() - &iw.g(z, &qm).unwrap()).scale(cr(1.0 / (2.0 * h)));
            assert!(
                (&gdot - &fd).norm_max() < 1e-7 * (1.0 + gdot.norm_max()),
                "{class:?} spectral={spectral}: {:e}",
                (&gdot - &fd).norm_max()
            );
        }
    }

    #[test]
    fn canonical_map_relates_rs_and_rs_prime_trajectories() {
        // Evolving q under RS' from (q0, p0) equals evolving under RS from
        // (q0, p0 + c log prod theta(q+h)/theta(q-h)).
        let class = FunctionClass::Elliptic(tau_i());
        let h = c(0.11, 0.02);
        let cl = c(1.3, 0.0);
        let phase = phase3();
        let rs = ModelSpec::rs(class, true, 3, h, cl).unwrap();
        let rsp = ModelSpec::rs_prime(class, true, 3, h, cl).unwrap();
        let mut shifted = phase.clone();
        for j in 0..3 {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..3 {
                if k != j {
                    let num = theta_odd(phase.qij(j, k) + h, &tau_i()).unwrap();
                    let den = theta_odd(phase.qij(j, k) - h, &tau_i()).unwrap();
                    s += (num / den).ln();
                }
            }
            shifted.p[j] += cl * s;
        }
        // one RK4 step of length t for each flow
        let step = |spec: &ModelSpec, ph: &PhasePoint, dt: f64| -> PhasePoint {
            let f = |ph: &PhasePoint| crate::models::eom_rhs(spec, ph).unwrap();
            let add = |ph: &PhasePoint, d: &(Vec<C64>, Vec<C64>), s: f64| {
                PhasePoint::new(
                    ph.q.iter().zip(&d.0).map(|(a, b)| a + b * s).collect(),
                    ph.p.iter().zip(&d.1).map(|(a, b)| a + b * s).collect(),
                )
                .unwrap()
            };
            let k1 = f(ph);
            let k2 = f(&add(ph, &k1, dt / 2.0));
            let k3 = f(&add(ph, &k2, dt / 2.0));
            let k4 = f(&add(ph, &k3, dt));
            let mut out = ph.clone();
            for i in 0..3 {
                out.q[i] += (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]) * (dt / 6.0);
                out.p[i] += (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]) * (dt / 6.0);
            }
            out
        };
        let mut a = phase.clone();
        let mut b = shifted;
        for _ in 0..20 {
            a = step(&rsp, &a, 0.005);
            b = step(&rs, &b, 0.005);
        }
        for i in 0..3 {
            assert!((a.q[i] - b.q[i]).norm() < 1e-9, "q{i}: {} vs {}", a.q[i], b.q[i]);
        }
    }
}
