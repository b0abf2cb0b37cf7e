//! Direct (non-factorized) Lax and M matrices of the Ruijsenaars-Schneider
//! and Calogero-Moser family in the elliptic, trigonometric and rational
//! classes, with and without spectral parameter, plus the elliptic and
//! relativistic tops.
//!
//! Conventions: every M matrix and Hamiltonian routes through `velocity_map`,
//! so the two velocity definitions of the RS model (the sign of the coupling
//! in the diagonal product) are a single switch. Empty products are 1 and
//! empty sums 0, which makes N = 1 degenerate cleanly.

use crate::elliptic::{
    self, eisenstein1, eisenstein2, f_alpha, kronecker_f, kronecker_phi, omega_alpha, phi_alpha,
    weierstrass_p, weierstrass_p_prime, EllipticModulus, FunctionClass,
};
use crate::error::{Error, Result};
use crate::linalg::{cr, heisenberg_t, ComplexMatrix, C64};

/// Canonical coordinates of the N-body phase space; complex-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<C64>,
    pub p: Vec<C64>,
}

impl PhasePoint {
    pub fn new(q: Vec<C64>, p: Vec<C64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates vs {} momenta",
                q.len(),
                p.len()
            )));
        }
        Ok(Self { q, p })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn qij(&self, i: usize, j: usize) -> C64 {
        self.q[i] - self.q[j]
    }

    /// Smallest pairwise coordinate distance (in the flat metric).
    pub fn min_separation(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.qij(i, j).norm());
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rs,
    RsPrime,
    Cm,
    EllipticTop,
    RelativisticTop,
}

/// Which model, function class, spectral mode and couplings are in play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub class: FunctionClass,
    pub spectral: bool,
    pub hbar: C64,
    pub nu: C64,
    pub c_light: C64,
    pub n: usize,
}

impl ModelSpec {
    pub fn rs(class: FunctionClass, spectral: bool, n: usize, hbar: C64, c_light: C64) -> Result<Self> {
        Self::many_body(ModelKind::Rs, class, spectral, n, hbar, C64::new(0.0, 0.0), c_light)
    }

    pub fn rs_prime(class: FunctionClass, spectral: bool, n: usize, hbar: C64, c_light: C64) -> Result<Self> {
        Self::many_body(ModelKind::RsPrime, class, spectral, n, hbar, C64::new(0.0, 0.0), c_light)
    }

    pub fn cm(class: FunctionClass, spectral: bool, n: usize, nu: C64) -> Result<Self> {
        Self::many_body(ModelKind::Cm, class, spectral, n, C64::new(0.0, 0.0), nu, cr(1.0))
    }

    fn many_body(
        kind: ModelKind,
        class: FunctionClass,
        spectral: bool,
        n: usize,
        hbar: C64,
        nu: C64,
        c_light: C64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("N must be positive".into()));
        }
        if class.is_elliptic() && !spectral {
            return Err(Error::InvalidSpec(
                "the elliptic Lax representation carries a spectral parameter".into(),
            ));
        }
        match kind {
            ModelKind::Rs | ModelKind::RsPrime => {
                if hbar.norm() == 0.0 || c_light.norm() == 0.0 {
                    return Err(Error::InvalidSpec("RS requires hbar and c".into()));
                }
            }
            ModelKind::Cm => {
                if nu.norm() == 0.0 {
                    return Err(Error::InvalidSpec("CM requires nu".into()));
                }
            }
            _ => return Err(Error::InvalidSpec("top models use TopSpec".into())),
        }
        Ok(Self { kind, class, spectral, hbar, nu, c_light, n })
    }

    fn check_phase(&self, phase: &PhasePoint) -> Result<()> {
        if phase.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "phase point of size {} for a model with N = {}",
                phase.n(),
                self.n
            )));
        }
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = elliptic::pole_distance(phase.qij(i, j), &self.class);
                if d < elliptic::DEFAULT_EXCLUSION_RADIUS {
                    return Err(Error::NearSingular {
                        what: format!("pair ({i}, {j}) separation"),
                        radius: elliptic::DEFAULT_EXCLUSION_RADIUS,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Product over k != j of the class kernel of (q_j - q_k + eta); the diagonal
/// dressings D_j^eta of the RS Lax matrices.
pub fn diag_product(q: &[C64], eta: C64, class: &FunctionClass) -> Result<Vec<C64>> {
    let n = q.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut prod = cr(1.0);
        for k in 0..n {
            if k == j {
                continue;
            }
            let arg = q[j] - q[k] + eta;
            prod *= match class {
                FunctionClass::Elliptic(m) => elliptic::theta_odd(arg, m)?,
                FunctionClass::Trigonometric => arg.sinh(),
                FunctionClass::Rational => arg,
            };
        }
        out.push(prod);
    }
    Ok(out)
}

/// Velocities induced by the model: the RS family uses the dressed momenta
/// exp(p_j/c) D_j^{-h}/D_j^0 (RS') with the opposite coupling sign), and CM
/// uses p_i - nu sum E1(q_ik).
pub fn velocity_map(spec: &ModelSpec, phase: &PhasePoint) -> Result<Vec<C64>> {
    spec.check_phase(phase)?;
    let n = spec.n;
    match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime => {
            let sign = if spec.kind == ModelKind::Rs { -1.0 } else { 1.0 };
            let num = diag_product(&phase.q, spec.hbar * sign, &spec.class)?;
            let den = diag_product(&phase.q, C64::new(0.0, 0.0), &spec.class)?;
            Ok((0..n)
                .map(|j| (phase.p[j] / spec.c_light).exp() * num[j] / den[j])
                .collect())
        }
        ModelKind::Cm => {
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    if k != i {
                        s += eisenstein1(phase.qij(i, k), &spec.class)?;
                    }
                }
                v.push(phase.p[i] - spec.nu * s);
            }
            Ok(v)
        }
        _ => Err(Error::InvalidSpec("velocity_map applies to many-body models".into())),
    }
}

/// The Lax matrix of the RS model (and its primed variant).
pub fn lax_rs(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    if !matches!(spec.kind, ModelKind::Rs | ModelKind::RsPrime) {
        return Err(Error::InvalidSpec("lax_rs needs an RS spec".into()));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let h = spec.hbar;
    let class = &spec.class;
    let v = velocity_map(spec, phase)?;
    let nf = n as f64;
    match class {
        FunctionClass::Elliptic(_) => ComplexMatrix::try_from_fn(n, n, |i, j| {
            Ok(kronecker_phi(z, phase.qij(i, j) + h, class)? * v[j])
        }),
        FunctionClass::Trigonometric => {
            if spec.spectral {
                let pref = (h * (nf - 2.0)).exp() * h.sinh();
                let cz = coth(z * nf);
                ComplexMatrix::try_from_fn(n, n, |i, j| {
                    Ok(pref * (coth(phase.qij(i, j) + h) + cz) * v[j])
                })
            } else {
                ComplexMatrix::try_from_fn(n, n, |i, j| {
                    Ok(h.sinh() / (phase.qij(i, j) + h).sinh() * v[j])
                })
            }
        }
        FunctionClass::Rational => {
            if spec.spectral {
                let zterm = (z * nf).inv();
                ComplexMatrix::try_from_fn(n, n, |i, j| {
                    Ok(h * ((phase.qij(i, j) + h).inv() + zterm) * v[j])
                })
            } else {
                ComplexMatrix::try_from_fn(n, n, |i, j| Ok(h / (phase.qij(i, j) + h) * v[j]))
            }
        }
    }
}

/// The M matrix accompanying `lax_rs` in the Lax equation.
pub fn m_rs(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    if !matches!(spec.kind, ModelKind::Rs | ModelKind::RsPrime) {
        return Err(Error::InvalidSpec("m_rs needs an RS spec".into()));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let h = spec.hbar;
    let class = &spec.class;
    let v = velocity_map(spec, phase)?;
    let nf = n as f64;
    let e1 = |x: C64| eisenstein1(x, class);
    // spectral scalar added to every off-diagonal kernel and to the diagonal
    let zpart = if spec.spectral {
        match class {
            FunctionClass::Elliptic(_) => None, // handled through phi(z, .)
            FunctionClass::Trigonometric => Some(coth(z * nf)),
            FunctionClass::Rational => Some((z * nf).inv()),
        }
    } else {
        None
    };
    ComplexMatrix::try_from_fn(n, n, |i, j| {
        if i != j {
            let kernel = match class {
                FunctionClass::Elliptic(_) => kronecker_phi(z, phase.qij(i, j), class)?,
                FunctionClass::Trigonometric => match zpart {
                    Some(cz) => coth(phase.qij(i, j)) + cz,
                    None => phase.qij(i, j).sinh().inv(),
                },
                FunctionClass::Rational => match zpart {
                    Some(zt) => phase.qij(i, j).inv() + zt,
                    None => phase.qij(i, j).inv(),
                },
            };
            Ok(-kernel * v[j])
        } else {
            let own = match class {
                FunctionClass::Elliptic(_) => e1(z)? + e1(h)?,
                FunctionClass::Trigonometric => coth(h) + zpart.unwrap_or_default(),
                FunctionClass::Rational => h.inv() + zpart.unwrap_or_default(),
            };
            let mut s = v[i] * own;
            for k in 0..n {
                if k != i {
                    s += v[k] * (e1(phase.qij(i, k) + h)? - e1(phase.qij(i, k))?);
                }
            }
            Ok(-s)
        }
    })
}

/// The Lax matrix of the CM model.
pub fn lax_cm(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    if spec.kind != ModelKind::Cm {
        return Err(Error::InvalidSpec("lax_cm needs a CM spec".into()));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let nu = spec.nu;
    let class = &spec.class;
    let v = velocity_map(spec, phase)?;
    let nf = n as f64;
    match class {
        FunctionClass::Elliptic(_) => {
            let e1z = eisenstein1(z, class)?;
            ComplexMatrix::try_from_fn(n, n, |i, j| {
                if i == j {
                    Ok(v[i] + nu * e1z)
                } else {
                    Ok(nu * kronecker_phi(z, phase.qij(i, j), class)?)
                }
            })
        }
        FunctionClass::Trigonometric => {
            if spec.spectral {
                let cz = coth(z * nf);
                ComplexMatrix::try_from_fn(n, n, |i, j| {
                    if i == j {
                        Ok(v[i] + nu * (nf - 2.0) + nu * cz)
                    } else {
                        Ok(nu * (coth(phase.qij(i, j)) + cz))
                    }
                })
            } else {
                ComplexMatrix::try_from_fn(n, n, |i, j| {
                    if i == j {
                        Ok(v[i])
                    } else {
                        Ok(nu / phase.qij(i, j).sinh())
                    }
                })
            }
        }
        FunctionClass::Rational => {
            let zterm = if spec.spectral { nu * (z * nf).inv() } else { C64::new(0.0, 0.0) };
            ComplexMatrix::try_from_fn(n, n, |i, j| {
                if i == j {
                    Ok(v[i] + zterm)
                } else {
                    Ok(nu / phase.qij(i, j) + zterm)
                }
            })
        }
    }
}

/// The M matrix accompanying `lax_cm`; note the spectral-free trigonometric
/// model pairs with a cosh-dressed kernel while the spectral one uses the
/// plain 1/sinh^2 limit.
pub fn m_cm(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    if spec.kind != ModelKind::Cm {
        return Err(Error::InvalidSpec("m_cm needs a CM spec".into()));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let nu = spec.nu;
    let class = &spec.class;
    ComplexMatrix::try_from_fn(n, n, |i, j| {
        if i == j {
            let mut d = C64::new(0.0, 0.0);
            for k in 0..n {
                if k != i {
                    d += eisenstein2(phase.qij(i, k), class)?;
                }
            }
            Ok(nu * d)
        } else {
            match class {
                FunctionClass::Elliptic(_) => Ok(nu * kronecker_f(z, phase.qij(i, j), class)?),
                FunctionClass::Trigonometric => {
                    let s = phase.qij(i, j).sinh();
                    if spec.spectral {
                        Ok(-nu / (s * s))
                    } else {
                        Ok(-nu * phase.qij(i, j).cosh() / (s * s))
                    }
                }
                FunctionClass::Rational => {
                    let d = phase.qij(i, j);
                    Ok(-nu / (d * d))
                }
            }
        }
    })
}

/// Dispatch to the Lax matrix of the given many-body model.
pub fn lax(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime => lax_rs(spec, phase, z),
        ModelKind::Cm => lax_cm(spec, phase, z),
        _ => Err(Error::InvalidSpec("lax applies to many-body models".into())),
    }
}

/// Dispatch to the M matrix of the given many-body model.
pub fn m_matrix(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<ComplexMatrix> {
    match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime => m_rs(spec, phase, z),
        ModelKind::Cm => m_cm(spec, phase, z),
        _ => Err(Error::InvalidSpec("m_matrix applies to many-body models".into())),
    }
}

/// Hamiltonian of the model: c Sum_j qdot_j for the RS family and
/// Sum qdot^2/2 - nu^2 Sum_{i>j} P(q_ij) for CM.
pub fn hamiltonian(spec: &ModelSpec, phase: &PhasePoint) -> Result<C64> {
    let v = velocity_map(spec, phase)?;
    match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime => Ok(spec.c_light * v.iter().sum::<C64>()),
        ModelKind::Cm => {
            let mut h: C64 = v.iter().map(|x| x * x / 2.0).sum();
            for i in 0..spec.n {
                for j in 0..i {
                    h -= spec.nu * spec.nu * weierstrass_p(phase.qij(i, j), &spec.class)?;
                }
            }
            Ok(h)
        }
        _ => Err(Error::InvalidSpec("hamiltonian applies to many-body models".into())),
    }
}

/// The RS Hamiltonian extracted from the trace of the Lax matrix at a given
/// spectral point; independent of z by construction.
pub fn rs_hamiltonian_from_trace(spec: &ModelSpec, phase: &PhasePoint, z: C64) -> Result<C64> {
    let l = lax_rs(spec, phase, z)?;
    let n = spec.n as f64;
    let h = spec.hbar;
    let norm = match &spec.class {
        FunctionClass::Elliptic(_) => kronecker_phi(z, h, &spec.class)?,
        FunctionClass::Trigonometric => {
            if spec.spectral {
                (h * (n - 2.0)).exp() * h.sinh() * (coth(h) + coth(z * n))
            } else {
                cr(1.0)
            }
        }
        FunctionClass::Rational => {
            if spec.spectral {
                h * (h.inv() + (z * n).inv())
            } else {
                cr(1.0)
            }
        }
    };
    Ok(spec.c_light * l.trace() / norm)
}

/// Canonical vector field (dq/dt, dp/dt) of the model Hamiltonian, with all
/// gradients taken analytically.
pub fn eom_rhs(spec: &ModelSpec, phase: &PhasePoint) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = spec.n;
    let v = velocity_map(spec, phase)?;
    let class = &spec.class;
    match spec.kind {
        ModelKind::Rs | ModelKind::RsPrime => {
            // H = c sum_j v_j with v_j = exp(p_j/c) prod_k s(q_jk + s*h)/s(q_jk)
            let sign = if spec.kind == ModelKind::Rs { -1.0 } else { 1.0 };
            let h = spec.hbar * sign;
            let mut dp = vec![C64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    if k != i {
                        s += v[i]
                            * (eisenstein1(phase.qij(i, k) + h, class)?
                                - eisenstein1(phase.qij(i, k), class)?);
                        s -= v[k]
                            * (eisenstein1(phase.qij(k, i) + h, class)?
                                - eisenstein1(phase.qij(k, i), class)?);
                    }
                }
                dp[i] = -spec.c_light * s;
            }
            Ok((v, dp))
        }
        ModelKind::Cm => {
            let nu = spec.nu;
            let mut dp = vec![C64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                // sum_j v_j dv_j/dq_i with dv_j/dq_i = nu [d_ij sum_k E2(q_jk) - (1-d_ij) E2(q_ji)]
                for j in 0..n {
                    let dv = if j == i {
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..n {
                            if k != j {
                                acc += eisenstein2(phase.qij(j, k), class)?;
                            }
                        }
                        nu * acc
                    } else {
                        -nu * eisenstein2(phase.qij(j, i), class)?
                    };
                    s += v[j] * dv;
                }
                for k in 0..n {
                    if k != i {
                        s -= nu * nu * weierstrass_p_prime(phase.qij(i, k), class)?;
                    }
                }
                dp[i] = -s;
            }
            Ok((v, dp))
        }
        _ => Err(Error::InvalidSpec("eom_rhs applies to many-body models".into())),
    }
}

fn coth(x: C64) -> C64 {
    x.cosh() / x.sinh()
}

/// A Lax pair frozen at one phase point: the maps z -> L(z) and z -> M(z)
/// plus the residue data of L at z = 0. Captures the spec and phase by value,
/// so it can be shared read-only across threads.
#[derive(Debug, Clone)]
pub struct LaxEvaluator {
    spec: ModelSpec,
    phase: PhasePoint,
}

impl LaxEvaluator {
    pub fn new(spec: ModelSpec, phase: PhasePoint) -> Result<Self> {
        spec.check_phase(&phase)?;
        Ok(Self { spec, phase })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn phase(&self) -> &PhasePoint {
        &self.phase
    }

    pub fn l(&self, z: C64) -> Result<ComplexMatrix> {
        lax(&self.spec, &self.phase, z)
    }

    pub fn m(&self, z: C64) -> Result<ComplexMatrix> {
        m_matrix(&self.spec, &self.phase, z)
    }

    /// Residue of L at z = 0 by contour quadrature (spectral models only).
    pub fn residue_at_origin(&self) -> Result<ComplexMatrix> {
        if !self.spec.spectral {
            return Err(Error::InvalidSpec(
                "the spectral-free Lax matrix has no pole at the origin".into(),
            ));
        }
        crate::linalg::residue_at(
            |z| lax(&self.spec, &self.phase, z),
            C64::new(0.0, 0.0),
            crate::linalg::ResidueConfig::default(),
        )
    }

    /// Shift of z by one period: L(z + 1) - L(z), which vanishes for the
    /// periodic classes.
    pub fn period_defect(&self, z: C64) -> Result<f64> {
        let a = self.l(z + cr(1.0))?;
        let b = self.l(z)?;
        Ok((&a - &b).norm_max())
    }
}

// ---------------------------------------------------------------------------
// Tops.
// ---------------------------------------------------------------------------

/// Parameters of the Euler-Arnold-type top models.
#[derive(Debug, Clone, Copy)]
pub struct TopSpec {
    pub n: usize,
    pub tau: EllipticModulus,
    pub relativistic: bool,
    /// Relativistic spectral shift; ignored in the non-relativistic model.
    pub eta: C64,
}

/// Coefficients S_alpha = tr(S T_{-alpha})/N of the expansion over the
/// Heisenberg basis, indexed by representatives in [0, N)^2.
pub fn spin_coefficients(s: &ComplexMatrix, n: usize) -> Vec<((i64, i64), C64)> {
    let mut out = Vec::with_capacity(n * n);
    for a1 in 0..n as i64 {
        for a2 in 0..n as i64 {
            let coeff = s.mul_mat(&heisenberg_t(-a1, -a2, n)).trace() / n as f64;
            out.push(((a1, a2), coeff));
        }
    }
    out
}

/// Lax pair (L, M) of the top at spectral point z.
pub fn lax_top(s: &ComplexMatrix, z: C64, spec: &TopSpec) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = spec.n;
    if elliptic::lattice_distance(z, spec.tau.tau()) < elliptic::DEFAULT_EXCLUSION_RADIUS {
        return Err(Error::NearSingular { what: "top spectral point".into(), radius: elliptic::DEFAULT_EXCLUSION_RADIUS });
    }
    let coeffs = spin_coefficients(s, n);
    let mut l = ComplexMatrix::zeros(n, n);
    let mut m = ComplexMatrix::zeros(n, n);
    for (alpha, sa) in &coeffs {
        let zero = alpha.0 == 0 && alpha.1 == 0;
        let om = omega_alpha(*alpha, n, &spec.tau);
        let t = heisenberg_t(alpha.0, alpha.1, n);
        if spec.relativistic {
            let lw = phi_alpha(*alpha, n, z, om + spec.eta, &spec.tau)?;
            l = &l + &t.scale(*sa * lw);
            if !zero {
                let mw = -phi_alpha(*alpha, n, z, om, &spec.tau)?;
                m = &m + &t.scale(*sa * mw);
            }
        } else if !zero {
            let lw = phi_alpha(*alpha, n, z, om, &spec.tau)?;
            let mw = f_alpha(*alpha, n, z, om, &spec.tau)?;
            l = &l + &t.scale(*sa * lw);
            m = &m + &t.scale(*sa * mw);
        }
    }
    Ok((l, m))
}

/// The inertia map J(S) driving dS/dt = [S, J(S)].
pub fn top_inertia(s: &ComplexMatrix, spec: &TopSpec) -> Result<ComplexMatrix> {
    let n = spec.n;
    let class = FunctionClass::Elliptic(spec.tau);
    let coeffs = spin_coefficients(s, n);
    let mut j = ComplexMatrix::zeros(n, n);
    for (alpha, sa) in &coeffs {
        if alpha.0 == 0 && alpha.1 == 0 {
            continue;
        }
        let om = omega_alpha(*alpha, n, &spec.tau);
        let w = if spec.relativistic {
            eisenstein1(spec.eta + om, &class)? - eisenstein1(om, &class)?
        } else {
            -eisenstein2(om, &class)?
        };
        j = &j + &heisenberg_t(alpha.0, alpha.1, n).scale(*sa * w);
    }
    Ok(j)
}

/// Right-hand side of the top equations of motion, [S, J(S)].
pub fn top_eom(s: &ComplexMatrix, spec: &TopSpec) -> Result<ComplexMatrix> {
    let j = top_inertia(s, spec)?;
    Ok(crate::linalg::commutator(s, &j))
}

/// The relativistic top Hamiltonian S_0 (the alpha = 0 spin coefficient).
pub fn top_hamiltonian_rel(s: &ComplexMatrix, n: usize) -> C64 {
    s.trace() / n as f64
}
