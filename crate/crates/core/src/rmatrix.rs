//! The three quantum R-matrices (Baxter-Belavin, Felder, and the
//! Arutyunov-Chekhov-Frolov semi-dynamical one), their Yang-Baxter equations,
//! the IRF-Vertex relations conjugating them into each other through the
//! intertwiner, and the trace construction of the RS M-matrix.
//!
//! Dynamical shifts q + h^(a) are literal substitutions q_k -> q_k + h on the
//! basis label of component a: every shifted operator is block diagonal in
//! that component, so the substitution is evaluated entrywise.

use crate::elliptic::{
    eisenstein1, kronecker_phi, omega_alpha, phi_alpha, EllipticModulus, FunctionClass,
};
use crate::error::{Error, Result};
use crate::factorization::{laurent_data, Intertwiner};
use crate::linalg::{
    cr, e_ij, heisenberg_t, o12_operator, trace_over_site, ComplexMatrix, Site, TwoSiteOperator,
    C64,
};
use crate::models::{velocity_map, ModelSpec, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RMatrixKind {
    BaxterBelavin,
    Felder,
    Acf,
}

/// Specification of a quantum R-matrix on the two-site space.
#[derive(Debug, Clone)]
pub struct RMatrixSpec {
    pub kind: RMatrixKind,
    pub n: usize,
    pub hbar: C64,
    pub tau: EllipticModulus,
    pub dynamical_q: Option<Vec<C64>>,
}

impl RMatrixSpec {
    pub fn new(
        kind: RMatrixKind,
        n: usize,
        hbar: C64,
        tau: EllipticModulus,
        dynamical_q: Option<Vec<C64>>,
    ) -> Result<Self> {
        match kind {
            RMatrixKind::BaxterBelavin => {
                if dynamical_q.is_some() {
                    return Err(Error::InvalidSpec(
                        "the Baxter-Belavin R-matrix is non-dynamical".into(),
                    ));
                }
            }
            RMatrixKind::Felder | RMatrixKind::Acf => match &dynamical_q {
                None => {
                    return Err(Error::MissingDynamical(format!("{kind:?} needs coordinates")))
                }
                Some(q) if q.len() != n => {
                    return Err(Error::DimensionMismatch(format!(
                        "{} dynamical coordinates for N = {n}",
                        q.len()
                    )))
                }
                _ => {}
            },
        }
        Ok(Self { kind, n, hbar, tau, dynamical_q })
    }

    fn q(&self) -> &[C64] {
        self.dynamical_q.as_deref().unwrap_or(&[])
    }
}

/// Baxter-Belavin R^h(z) = sum_a T_a (x) T_{-a} phi_a(z, omega_a + h).
pub fn baxter_belavin(n: usize, hbar: C64, z: C64, tau: &EllipticModulus) -> Result<TwoSiteOperator> {
    let mut r = TwoSiteOperator::zeros(n);
    for a1 in 0..n as i64 {
        for a2 in 0..n as i64 {
            let om = omega_alpha((a1, a2), n, tau);
            let w = phi_alpha((a1, a2), n, z, om + hbar, tau)?;
            r.add_kron(&heisenberg_t(a1, a2, n), &heisenberg_t(-a1, -a2, n), w);
        }
    }
    Ok(r)
}

/// Normalized variant R^B(h, z) = (1/N) R^{h/N}(z).
pub fn baxter_belavin_normalized(n: usize, hbar: C64, z: C64, tau: &EllipticModulus) -> Result<TwoSiteOperator> {
    let r = baxter_belavin(n, hbar / n as f64, z, tau)?;
    TwoSiteOperator::new(n, r.matrix().scale(cr(1.0 / n as f64)))
}

/// Felder's dynamical R-matrix.
pub fn felder(n: usize, hbar: C64, z12: C64, q: &[C64], tau: &EllipticModulus) -> Result<TwoSiteOperator> {
    let class = FunctionClass::Elliptic(*tau);
    let mut r = TwoSiteOperator::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let qij = q[i] - q[j];
                r.add_kron(&e_ij(i, i, n), &e_ij(j, j, n), kronecker_phi(hbar, -qij, &class)?);
                r.add_kron(&e_ij(i, j, n), &e_ij(j, i, n), kronecker_phi(z12, qij, &class)?);
            } else {
                r.add_kron(&e_ij(i, i, n), &e_ij(i, i, n), kronecker_phi(hbar, z12, &class)?);
            }
        }
    }
    Ok(r)
}

/// The Arutyunov-Chekhov-Frolov semi-dynamical R-matrix.
pub fn acf(
    n: usize,
    hbar: C64,
    z1: C64,
    z2: C64,
    q: &[C64],
    tau: &EllipticModulus,
) -> Result<TwoSiteOperator> {
    let class = FunctionClass::Elliptic(*tau);
    let mut r = TwoSiteOperator::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let qij = q[i] - q[j];
            r.add_kron(&e_ij(i, i, n), &e_ij(j, j, n), kronecker_phi(hbar, qij, &class)?);
            r.add_kron(&e_ij(i, j, n), &e_ij(j, i, n), kronecker_phi(z1 - z2, qij, &class)?);
            r.add_kron(&e_ij(i, j, n), &e_ij(j, j, n), -kronecker_phi(z1 + hbar, qij, &class)?);
            r.add_kron(&e_ij(j, j, n), &e_ij(i, j, n), kronecker_phi(z2, qij, &class)?);
        }
    }
    let s = eisenstein1(hbar, &class)? + eisenstein1(z1 - z2, &class)? + eisenstein1(z2, &class)?
        - eisenstein1(z1 + hbar, &class)?;
    for i in 0..n {
        r.add_kron(&e_ij(i, i, n), &e_ij(i, i, n), s);
    }
    Ok(r)
}

/// Evaluates the specified R-matrix at spectral points (z1, z2).
pub fn r_matrix(spec: &RMatrixSpec, z1: C64, z2: C64) -> Result<TwoSiteOperator> {
    match spec.kind {
        RMatrixKind::BaxterBelavin => baxter_belavin(spec.n, spec.hbar, z1 - z2, &spec.tau),
        RMatrixKind::Felder => felder(spec.n, spec.hbar, z1 - z2, spec.q(), &spec.tau),
        RMatrixKind::Acf => acf(spec.n, spec.hbar, z1, z2, spec.q(), &spec.tau),
    }
}

/// The classical r-matrix r(z) = 1 (x) 1 E1(z) + sum_{a != 0} T_a (x) T_{-a}
/// phi_a(z, omega_a); the h^0 coefficient of the Baxter-Belavin expansion.
pub fn classical_r(z: C64, tau: &EllipticModulus, n: usize) -> Result<TwoSiteOperator> {
    let class = FunctionClass::Elliptic(*tau);
    let mut r = TwoSiteOperator::zeros(n);
    let e1 = eisenstein1(z, &class)?;
    for i in 0..n * n {
        r.matrix_mut()[(i, i)] = e1;
    }
    for a1 in 0..n as i64 {
        for a2 in 0..n as i64 {
            if a1 == 0 && a2 == 0 {
                continue;
            }
            let om = omega_alpha((a1, a2), n, tau);
            let w = phi_alpha((a1, a2), n, z, om, tau)?;
            r.add_kron(&heisenberg_t(a1, a2, n), &heisenberg_t(-a1, -a2, n), w);
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Three-site embeddings.
// ---------------------------------------------------------------------------

fn site_indices(sites: (usize, usize), i: [usize; 3], j: [usize; 3]) -> (usize, usize, usize, usize, usize, usize) {
    // returns (a_row, a_col, b_row, b_col, spectator_row, spectator_col)
    let (s1, s2) = sites;
    let sp = 3 - s1 - s2; // 0-based site labels sum to 3
    (i[s1], j[s1], i[s2], j[s2], i[sp], j[sp])
}

/// Embeds a two-site operator into the three-site space on `sites` (0-based).
pub fn embed_three_site(op: &TwoSiteOperator, sites: (usize, usize)) -> ComplexMatrix {
    let n = op.site_dim();
    let dim = n * n * n;
    let mut out = ComplexMatrix::zeros(dim, dim);
    let m = op.matrix();
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                for j1 in 0..n {
                    for j2 in 0..n {
                        for j3 in 0..n {
                            let i = [i1, i2, i3];
                            let j = [j1, j2, j3];
                            let (ar, ac, br, bc, sr, sc) = site_indices(sites, i, j);
                            if sr != sc {
                                continue;
                            }
                            let v = m[(ar * n + br, ac * n + bc)];
                            if v != C64::new(0.0, 0.0) {
                                out[((i1 * n + i2) * n + i3, (j1 * n + j2) * n + j3)] = v;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Embeds a builder of two-site operators whose dynamical coordinates are
/// shifted by `shift` on the basis label of the spectator site.
fn embed_three_site_shifted(
    build: &mut impl FnMut(Vec<C64>) -> Result<TwoSiteOperator>,
    q: &[C64],
    shift: C64,
    sites: (usize, usize),
) -> Result<ComplexMatrix> {
    let n = q.len();
    let dim = n * n * n;
    let mut out = ComplexMatrix::zeros(dim, dim);
    let mut blocks = Vec::with_capacity(n);
    for k in 0..n {
        let mut qq = q.to_vec();
        qq[k] += shift;
        blocks.push(build(qq)?);
    }
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                for j1 in 0..n {
                    for j2 in 0..n {
                        for j3 in 0..n {
                            let i = [i1, i2, i3];
                            let j = [j1, j2, j3];
                            let (ar, ac, br, bc, sr, sc) = site_indices(sites, i, j);
                            if sr != sc {
                                continue;
                            }
                            let v = blocks[sr].matrix()[(ar * n + br, ac * n + bc)];
                            if v != C64::new(0.0, 0.0) {
                                out[((i1 * n + i2) * n + i3, (j1 * n + j2) * n + j3)] = v;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Max-entry residual of the Yang-Baxter equation appropriate to the R-matrix
/// kind: the plain quantum one for Baxter-Belavin, the dynamical one with
/// coordinate shifts for Felder, and the spectral-shifted one for ACF.
pub fn yang_baxter_residual(spec: &RMatrixSpec, z1: C64, z2: C64, z3: C64) -> Result<f64> {
    let n = spec.n;
    let tau = spec.tau;
    let h = spec.hbar;
    match spec.kind {
        RMatrixKind::BaxterBelavin => {
            let r12 = embed_three_site(&baxter_belavin(n, h, z1 - z2, &tau)?, (0, 1));
            let r13 = embed_three_site(&baxter_belavin(n, h, z1 - z3, &tau)?, (0, 2));
            let r23 = embed_three_site(&baxter_belavin(n, h, z2 - z3, &tau)?, (1, 2));
            let lhs = r12.mul_mat(&r13).mul_mat(&r23);
            let rhs = r23.mul_mat(&r13).mul_mat(&r12);
            Ok((&lhs - &rhs).norm_max())
        }
        RMatrixKind::Felder => {
            let q = spec.q().to_vec();
            let r12 = embed_three_site(&felder(n, h, z1 - z2, &q, &tau)?, (0, 1));
            let r23 = embed_three_site(&felder(n, h, z2 - z3, &q, &tau)?, (1, 2));
            let r13 = embed_three_site(&felder(n, h, z1 - z3, &q, &tau)?, (0, 2));
            let r13_s2 = embed_three_site_shifted(
                &mut |qq| felder(n, h, z1 - z3, &qq, &tau),
                &q,
                -h,
                (0, 2),
            )?;
            let r23_s1 = embed_three_site_shifted(
                &mut |qq| felder(n, h, z2 - z3, &qq, &tau),
                &q,
                -h,
                (1, 2),
            )?;
            let r12_s3 = embed_three_site_shifted(
                &mut |qq| felder(n, h, z1 - z2, &qq, &tau),
                &q,
                -h,
                (0, 1),
            )?;
            let lhs = r12.mul_mat(&r13_s2).mul_mat(&r23);
            let rhs = r23_s1.mul_mat(&r13).mul_mat(&r12_s3);
            Ok((&lhs - &rhs).norm_max())
        }
        RMatrixKind::Acf => {
            let q = spec.q().to_vec();
            let r = |a: C64, b: C64, sites| -> Result<ComplexMatrix> {
                Ok(embed_three_site(&acf(n, h, a, b, &q, &tau)?, sites))
            };
            let lhs = r(z1, z2, (0, 1))?
                .mul_mat(&r(z1 - h, z3 - h, (0, 2))?)
                .mul_mat(&r(z2, z3, (1, 2))?);
            let rhs = r(z2 - h, z3 - h, (1, 2))?
                .mul_mat(&r(z1, z3, (0, 2))?)
                .mul_mat(&r(z1 - h, z2 - h, (0, 1))?);
            Ok((&lhs - &rhs).norm_max())
        }
    }
}

// ---------------------------------------------------------------------------
// IRF-Vertex relations.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrfVariant {
    /// g2(z2,q) g1(z1,q+h^(2)) R^F = R^B g1(z1,q) g2(z2,q+h^(1))
    FelderBb,
    /// R^F = g1^{-1}(z1,q+h^(2)) g1(z1+h,q) R^ACF g2^{-1}(z2+h,q) g2(z2,q+h^(1))
    AcfFelder,
    /// R^B = g1(z1+h,q) g2(z2,q) R^ACF g2^{-1}(z2+h,q) g1^{-1}(z1,q)
    AcfBb,
    /// (1/N) gbreve_2(0,q) R^h(z1) = g1(z1+Nh,q) O12 g2^{-1}(Nh,q) g1^{-1}(z1,q)
    Residue,
}

/// g acting on the first site, optionally with the coordinates shifted by h
/// on the basis label of the second site.
fn g1_op(iw: &Intertwiner, z: C64, q: &[C64], shift2: Option<C64>) -> Result<ComplexMatrix> {
    let n = q.len();
    let mut out = ComplexMatrix::zeros(n * n, n * n);
    for k in 0..n {
        let g = match shift2 {
            Some(h) => {
                let mut qq = q.to_vec();
                qq[k] += h;
                iw.g(z, &qq)?
            }
            None => iw.g(z, q)?,
        };
        for i1 in 0..n {
            for j1 in 0..n {
                out[(i1 * n + k, j1 * n + k)] = g[(i1, j1)];
            }
        }
    }
    Ok(out)
}

/// g acting on the second site, optionally shifted on the first-site label.
fn g2_op(iw: &Intertwiner, z: C64, q: &[C64], shift1: Option<C64>) -> Result<ComplexMatrix> {
    let n = q.len();
    let mut out = ComplexMatrix::zeros(n * n, n * n);
    for k in 0..n {
        let g = match shift1 {
            Some(h) => {
                let mut qq = q.to_vec();
                qq[k] += h;
                iw.g(z, &qq)?
            }
            None => iw.g(z, q)?,
        };
        for i2 in 0..n {
            for j2 in 0..n {
                out[(k * n + i2, k * n + j2)] = g[(i2, j2)];
            }
        }
    }
    Ok(out)
}

/// Max-entry residual of the chosen IRF-Vertex relation.
pub fn irf_vertex_residual(
    variant: IrfVariant,
    n: usize,
    hbar: C64,
    tau: &EllipticModulus,
    q: &[C64],
    z1: C64,
    z2: C64,
) -> Result<f64> {
    let class = FunctionClass::Elliptic(*tau);
    let iw = Intertwiner::new(class, true, n)?;
    match variant {
        IrfVariant::FelderBb => {
            let rf = felder(n, hbar, z1 - z2, q, tau)?;
            let rb = baxter_belavin_normalized(n, hbar, z1 - z2, tau)?;
            let lhs = g2_op(&iw, z2, q, None)?
                .mul_mat(&g1_op(&iw, z1, q, Some(hbar))?)
                .mul_mat(rf.matrix());
            let rhs = rb
                .matrix()
                .mul_mat(&g1_op(&iw, z1, q, None)?)
                .mul_mat(&g2_op(&iw, z2, q, Some(hbar))?);
            Ok((&lhs - &rhs).norm_max())
        }
        IrfVariant::AcfFelder => {
            let rf = felder(n, hbar, z1 - z2, q, tau)?;
            let racf = acf(n, hbar, z1, z2, q, tau)?;
            let rhs = g1_op(&iw, z1, q, Some(hbar))?
                .inverse()?
                .mul_mat(&g1_op(&iw, z1 + hbar, q, None)?)
                .mul_mat(racf.matrix())
                .mul_mat(&g2_op(&iw, z2 + hbar, q, None)?.inverse()?)
                .mul_mat(&g2_op(&iw, z2, q, Some(hbar))?);
            Ok((rf.matrix() - &rhs).norm_max())
        }
        IrfVariant::AcfBb => {
            let rb = baxter_belavin_normalized(n, hbar, z1 - z2, tau)?;
            let racf = acf(n, hbar, z1, z2, q, tau)?;
            let rhs = g1_op(&iw, z1 + hbar, q, None)?
                .mul_mat(&g2_op(&iw, z2, q, None)?)
                .mul_mat(racf.matrix())
                .mul_mat(&g2_op(&iw, z2 + hbar, q, None)?.inverse()?)
                .mul_mat(&g1_op(&iw, z1, q, None)?.inverse()?);
            Ok((rb.matrix() - &rhs).norm_max())
        }
        IrfVariant::Residue => {
            let ld = laurent_data(&iw, q)?;
            let r = baxter_belavin(n, hbar, z1, tau)?;
            let gb2 = crate::linalg::kron(&ComplexMatrix::identity(n), &ld.residue);
            let lhs = gb2.mul_mat(r.matrix()).scale(cr(1.0 / n as f64));
            let o12 = o12_operator(n);
            let g2inv = g2_op(&iw, hbar * n as f64, q, None)?.inverse()?;
            let rhs = g1_op(&iw, z1 + hbar * n as f64, q, None)?
                .mul_mat(o12.matrix())
                .mul_mat(&g2inv)
                .mul_mat(&g1_op(&iw, z1, q, None)?.inverse()?);
            Ok((&lhs - &rhs).norm_max())
        }
    }
}

/// The residue of the ACF R-matrix in its second spectral argument at 0,
/// which reproduces the operator sum_ij E_ii (x) E_ji.
pub fn acf_residue_operator(n: usize, hbar: C64, z1: C64, q: &[C64], tau: &EllipticModulus) -> Result<ComplexMatrix> {
    crate::linalg::residue_at(
        |z2| Ok(acf(n, hbar, z1, z2, q, tau)?.matrix().clone()),
        C64::new(0.0, 0.0),
        crate::linalg::ResidueConfig::default(),
    )
}

/// The top Lax matrix from the R-matrix trace: L^h(S, z) = tr_2(R^h(z) S_2)/N.
pub fn lax_from_r_trace(s: &ComplexMatrix, z: C64, hbar: C64, tau: &EllipticModulus) -> Result<ComplexMatrix> {
    let n = s.rows();
    let r = baxter_belavin(n, hbar, z, tau)?;
    Ok(trace_over_site(&r, Site::Two, s)?.scale(cr(1.0 / n as f64)))
}

/// The top M matrix from the classical r-matrix trace:
/// M^h(S, z) = -tr_2(r(z) S_2)/N.
pub fn m_from_r_trace(s: &ComplexMatrix, z: C64, tau: &EllipticModulus) -> Result<ComplexMatrix> {
    let n = s.rows();
    let r = classical_r(z, tau, n)?;
    Ok(trace_over_site(&r, Site::Two, s)?.scale(cr(-1.0 / n as f64)))
}

// ---------------------------------------------------------------------------
// RS M-matrix from the intertwiner.
// ---------------------------------------------------------------------------

/// The diagonal matrices G and F of the trace construction:
/// G = tr_2(O12 pref gbreve_2(0) g_2(Nh) e^{P_2/c}),
/// F = tr_2(O12 pref A_2 g_2(Nh) e^{P_2/c}).
pub fn theorem1_g_f(
    iw: &Intertwiner,
    phase: &PhasePoint,
    hbar: C64,
    c_light: C64,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let m = iw
        .class
        .modulus()
        .ok_or_else(|| Error::InvalidSpec("the trace construction is elliptic".into()))?;
    let n = iw.n;
    let ld = laurent_data(iw, &phase.q)?;
    let pref = crate::factorization::elliptic_rs_prefactor(hbar, &m)?;
    let ep: Vec<C64> = phase.p.iter().map(|p| (p / c_light).exp()).collect();
    let gnh = iw.g(hbar * n as f64, &phase.q)?;
    let o12 = o12_operator(n);
    let wg = ld.residue.mul_mat(&gnh).mul_diag(&ep).scale(pref);
    let wf = ld.constant.mul_mat(&gnh).mul_diag(&ep).scale(pref);
    Ok((
        trace_over_site(&o12, Site::Two, &wg)?,
        trace_over_site(&o12, Site::Two, &wf)?,
    ))
}

/// The RS M-matrix assembled from the intertwiner:
/// M = -g^{-1} g' G - F + g^{-1} dg/dt (elliptic class), and the closed-form
/// variants -g^{-1} g' diag(qdot) - F - diag(dD0/dt / D0) for the degenerate
/// classes, with F_ii = sum_k kernel(q_i - q_k + h) qdot_k.
pub fn m_rs_from_intertwiner(
    spec: &ModelSpec,
    phase: &PhasePoint,
    z: C64,
) -> Result<ComplexMatrix> {
    let iw = crate::factorization::intertwiner_for(spec)?;
    let n = spec.n;
    let v = velocity_map(spec, phase)?;
    match &spec.class {
        FunctionClass::Elliptic(_) => {
            let (g_big, f_big) = theorem1_g_f(&iw, phase, spec.hbar, spec.c_light)?;
            let gs = iw.g_with_derivatives(z, &phase.q, 1)?;
            let ginv = gs[0].inverse()?;
            let gdot = iw.g_time_derivative(z, &phase.q, &v)?;
            let t1 = ginv.mul_mat(&gs[1]).mul_mat(&g_big);
            let t3 = ginv.mul_mat(&gdot);
            Ok(&(&t3 - &t1) - &f_big)
        }
        FunctionClass::Trigonometric | FunctionClass::Rational => {
            let gs = iw.g_with_derivatives(z, &phase.q, 1)?;
            let ginv = gs[0].inverse()?;
            let mut f = ComplexMatrix::zeros(n, n);
            for i in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    let arg = phase.qij(i, k) + spec.hbar;
                    s += match spec.class {
                        FunctionClass::Trigonometric => arg.cosh() / arg.sinh(),
                        FunctionClass::Rational => arg.inv(),
                        _ => unreachable!(),
                    } * v[k];
                }
                f[(i, i)] = s;
            }
            let dlog = iw.d0_log_deriv(&phase.q, &v)?;
            let t1 = ginv.mul_mat(&gs[1]).mul_mat(&ComplexMatrix::diagonal(&v));
            let mut out = &(-&t1) - &f;
            for i in 0..n {
                out[(i, i)] -= dlog[i];
            }
            Ok(out)
        }
    }
}

/// Residual of the order-h^{-1} coefficient of the residue identity:
/// gbreve_2(0) = g_1(z) O12 g_1^{-1}(z) gbreve_2(0).
pub fn order_minus_one_residual(iw: &Intertwiner, q: &[C64], z: C64) -> Result<f64> {
    let n = iw.n;
    let ld = laurent_data(iw, q)?;
    let gb2 = crate::linalg::kron(&ComplexMatrix::identity(n), &ld.residue);
    let g = iw.g(z, q)?;
    let g1 = crate::linalg::kron(&g, &ComplexMatrix::identity(n));
    let g1inv = crate::linalg::kron(&g.inverse()?, &ComplexMatrix::identity(n));
    let rhs = g1.mul_mat(o12_operator(n).matrix()).mul_mat(&g1inv).mul_mat(&gb2);
    Ok((&gb2 - &rhs).norm_max())
}
