//! The rational BC_N Calogero-Moser family: the (2N+1)-dimensional Lax matrix
//! with couplings (m1, m2, m4), the B/C/D root-system presets, the
//! Vandermonde factorization formulas of the C/D and B cases, and the
//! supporting block identities.
//!
//! As in the A-series modules, the Lax diagonal carries the velocity-dressed
//! momenta: the conserved Hamiltonian substitutes qdot_i = A_ii(q, p) into
//! the kinetic term, which makes tr L^2 / 4 the energy on the nose.

use crate::error::{Error, Result};
use crate::linalg::{cr, ComplexMatrix, C64};
use crate::models::PhasePoint;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSystem {
    BcN,
    Bn,
    Cn,
    Dn,
}

/// Couplings of the rational BC_N model together with the root-system label.
#[derive(Debug, Clone, Copy)]
pub struct BcnSpec {
    pub n: usize,
    pub m1: C64,
    pub m2: C64,
    pub m4: C64,
    pub root_system: RootSystem,
}

impl BcnSpec {
    /// Raw constructor; the Lax-validity constraint is tracked as a flag, not
    /// enforced.
    pub fn new(n: usize, m1: C64, m2: C64, m4: C64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("N must be positive".into()));
        }
        Ok(Self { n, m1, m2, m4, root_system: RootSystem::BcN })
    }

    /// D_N preset: m1 = m4 = 0.
    pub fn dn(n: usize, m2: C64) -> Result<Self> {
        Ok(Self { root_system: RootSystem::Dn, m1: C64::new(0.0, 0.0), m4: C64::new(0.0, 0.0), ..Self::new(n, C64::new(0.0, 0.0), m2, C64::new(0.0, 0.0))? })
    }

    /// C_N preset: m1 = 0, m4 free.
    pub fn cn(n: usize, m2: C64, m4: C64) -> Result<Self> {
        Ok(Self { root_system: RootSystem::Cn, m1: C64::new(0.0, 0.0), ..Self::new(n, C64::new(0.0, 0.0), m2, m4)? })
    }

    /// B_N preset: m4 = 0 and m1^2 = 2 m2^2 (the sign fixed to m1 = sqrt2 m2,
    /// which matches the corner entries of the factorized form).
    pub fn bn(n: usize, m2: C64) -> Result<Self> {
        Ok(Self { root_system: RootSystem::Bn, m1: m2 * SQRT2, m4: C64::new(0.0, 0.0), ..Self::new(n, m2 * SQRT2, m2, C64::new(0.0, 0.0))? })
    }

    /// m^2 = m4^2 + 4 m1^2, the coupling of the 1/(2q)^2 term.
    pub fn m_squared(&self) -> C64 {
        self.m4 * self.m4 + self.m1 * self.m1 * 4.0
    }

    /// The combination m1 (m1^2 - 2 m2^2 + sqrt2 m2 m4) whose vanishing makes
    /// the Lax equations close.
    pub fn lax_constraint(&self) -> C64 {
        self.m1 * (self.m1 * self.m1 - self.m2 * self.m2 * 2.0 + self.m2 * self.m4 * SQRT2)
    }

    pub fn constraint_satisfied(&self) -> bool {
        self.lax_constraint().norm() < 1e-12
    }

    fn check_phase(&self, phase: &PhasePoint) -> Result<()> {
        if phase.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "phase point of size {} for N = {}",
                phase.n(),
                self.n
            )));
        }
        for i in 0..self.n {
            if phase.q[i].norm() < 1e-9 {
                return Err(Error::NearSingular { what: format!("q_{i} at the reflection point"), radius: 1e-9 });
            }
            for j in 0..self.n {
                if i != j
                    && ((phase.q[i] - phase.q[j]).norm() < 1e-9
                        || (phase.q[i] + phase.q[j]).norm() < 1e-9)
                {
                    return Err(Error::NearSingular { what: format!("pair ({i},{j})"), radius: 1e-9 });
                }
            }
        }
        Ok(())
    }
}

/// The velocity-dressing of the diagonal: qdot_i = p_i - shift_i(q) with
/// shift_i = sqrt2 m4/(2 q_i) + sqrt2 m1/q_i + m2 sum_k (1/(q_i-q_k) + 1/(q_i+q_k)).
pub fn bcn_velocities(spec: &BcnSpec, phase: &PhasePoint) -> Result<Vec<C64>> {
    spec.check_phase(phase)?;
    let n = spec.n;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut shift = spec.m4 * SQRT2 / (phase.q[i] * 2.0) + spec.m1 * SQRT2 / phase.q[i];
        for k in 0..n {
            if k != i {
                shift += spec.m2 * ((phase.q[i] - phase.q[k]).inv() + (phase.q[i] + phase.q[k]).inv());
            }
        }
        out.push(phase.p[i] - shift);
    }
    Ok(out)
}

/// The (2N+1) x (2N+1) Lax matrix with block structure
/// (A B C; -B -A -C; -C^T C^T 0).
pub fn lax_bcn(spec: &BcnSpec, phase: &PhasePoint) -> Result<ComplexMatrix> {
    spec.check_phase(phase)?;
    let n = spec.n;
    let v = bcn_velocities(spec, phase)?;
    let mut a = ComplexMatrix::zeros(n, n);
    let mut b = ComplexMatrix::zeros(n, n);
    let mut cvec = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        a[(i, i)] = v[i];
        b[(i, i)] = spec.m4 * SQRT2 / (phase.q[i] * 2.0);
        cvec[i] = spec.m1 / phase.q[i];
        for j in 0..n {
            if i != j {
                a[(i, j)] = spec.m2 / (phase.q[i] - phase.q[j]);
                b[(i, j)] = spec.m2 / (phase.q[i] + phase.q[j]);
            }
        }
    }
    let sz = 2 * n + 1;
    let mut l = ComplexMatrix::zeros(sz, sz);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] = a[(i, j)];
            l[(i, n + j)] = b[(i, j)];
            l[(n + i, j)] = -b[(i, j)];
            l[(n + i, n + j)] = -a[(i, j)];
        }
        l[(i, 2 * n)] = cvec[i];
        l[(n + i, 2 * n)] = -cvec[i];
        l[(2 * n, i)] = -cvec[i];
        l[(2 * n, n + i)] = cvec[i];
    }
    Ok(l)
}

/// For the C/D cases (m1 = 0) the last row and column vanish; this asserts
/// that and returns the 2N x 2N truncation.
pub fn lax_bcn_truncated(spec: &BcnSpec, phase: &PhasePoint) -> Result<ComplexMatrix> {
    let l = lax_bcn(spec, phase)?;
    let n = spec.n;
    let mut border = 0.0_f64;
    for k in 0..(2 * n + 1) {
        border = border.max(l[(k, 2 * n)].norm()).max(l[(2 * n, k)].norm());
    }
    if border >= 1e-12 {
        return Err(Error::InvalidSpec(format!(
            "border entries of size {border:e}; the 2N truncation needs m1 = 0"
        )));
    }
    Ok(ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| l[(i, j)]))
}

/// The conserved energy: (1/2) sum qdot^2 minus the printed potential, which
/// equals tr L^2 / 4 identically.
pub fn bcn_hamiltonian(spec: &BcnSpec, phase: &PhasePoint) -> Result<C64> {
    let v = bcn_velocities(spec, phase)?;
    let mut h: C64 = v.iter().map(|x| x * x / 2.0).sum();
    let n = spec.n;
    for i in 0..n {
        for j in 0..i {
            let d = phase.q[i] - phase.q[j];
            let s = phase.q[i] + phase.q[j];
            h -= spec.m2 * spec.m2 * ((d * d).inv() + (s * s).inv());
        }
        let twoq = phase.q[i] * 2.0;
        h -= spec.m_squared() / (twoq * twoq);
    }
    Ok(h)
}

/// Canonical vector field of `bcn_hamiltonian`, with analytic gradients.
pub fn bcn_eom_rhs(spec: &BcnSpec, phase: &PhasePoint) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = spec.n;
    let v = bcn_velocities(spec, phase)?;
    // dH/dq_i = sum_j v_j dv_j/dq_i - dV/dq_i with V the (negative) potential
    let mut dp = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = C64::new(0.0, 0.0);
        // dv_j/dq_i = -dshift_j/dq_i
        for j in 0..n {
            let dshift = if j == i {
                let mut acc = -spec.m4 * SQRT2 / (phase.q[i] * phase.q[i] * 2.0)
                    - spec.m1 * SQRT2 / (phase.q[i] * phase.q[i]);
                for k in 0..n {
                    if k != i {
                        let d = phase.q[i] - phase.q[k];
                        let u = phase.q[i] + phase.q[k];
                        acc -= spec.m2 * ((d * d).inv() + (u * u).inv());
                    }
                }
                acc
            } else {
                let d = phase.q[j] - phase.q[i];
                let u = phase.q[j] + phase.q[i];
                spec.m2 * ((d * d).inv() - (u * u).inv())
            };
            s -= v[j] * dshift;
        }
        // potential part: -d/dq_i of -(sum m2^2(...) + sum m^2/(2q)^2)
        for k in 0..n {
            if k != i {
                let d = phase.q[i] - phase.q[k];
                let u = phase.q[i] + phase.q[k];
                s += spec.m2 * spec.m2 * 2.0 * ((d * d * d).inv() + (u * u * u).inv());
            }
        }
        let q3 = phase.q[i] * phase.q[i] * phase.q[i];
        s += spec.m_squared() / (q3 * 2.0);
        dp[i] = -s;
    }
    Ok((v, dp))
}

// ---------------------------------------------------------------------------
// Factorization blocks.
// ---------------------------------------------------------------------------

/// D0 of the C/D factorization: entries +-2 q_i prod (q_i^2 - q_k^2) over the
/// two reflection copies.
pub fn dc_d0(q: &[C64]) -> Vec<C64> {
    let n = q.len();
    let mut out = vec![C64::new(0.0, 0.0); 2 * n];
    for i in 0..n {
        let mut p = cr(1.0);
        for k in 0..n {
            if k != i {
                p *= (q[i] - q[k]) * (q[i] + q[k]);
            }
        }
        out[i] = q[i] * 2.0 * p;
        out[n + i] = -q[i] * 2.0 * p;
    }
    out
}

/// The doubled Vandermonde with columns (q_j, -q_j).
pub fn dc_vandermonde(q: &[C64]) -> ComplexMatrix {
    let n = q.len();
    ComplexMatrix::from_fn(2 * n, 2 * n, |row, col| {
        let base = if col < n { q[col] } else { -q[col - n] };
        base.powi(row as i32)
    })
}

/// Subdiagonal matrix with unit entries at even rows (1-based).
pub fn even_subdiagonal(sz: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(sz, sz);
    for i in (2..=sz).step_by(2) {
        m[(i - 1, i - 2)] = cr(1.0);
    }
    m
}

/// The factorized C/D Lax matrix:
/// P - D0 V^{-1} (m2 C0 - (m2 - sqrt2 m4) Ctilde) V D0^{-1}.
pub fn factorized_lax_dc(spec: &BcnSpec, phase: &PhasePoint) -> Result<ComplexMatrix> {
    if spec.m1.norm() != 0.0 {
        return Err(Error::InvalidSpec("the C/D factorization needs m1 = 0".into()));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let d0 = dc_d0(&phase.q);
    let v = dc_vandermonde(&phase.q);
    let c0 = crate::factorization::derivative_matrix(2 * n);
    let ct = even_subdiagonal(2 * n);
    let core = &c0.scale(spec.m2) - &ct.scale(spec.m2 - spec.m4 * SQRT2);
    let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
    let dressed = ComplexMatrix::diag_mul(&d0, &v.inverse()?.mul_mat(&core).mul_mat(&v).mul_diag(&dinv));
    let mut p = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        p[(i, i)] = phase.p[i];
        p[(n + i, n + i)] = -phase.p[i];
    }
    Ok(&p - &dressed)
}

/// D0 of the B factorization, including the product of -q_k^2 in the corner.
pub fn b_d0(q: &[C64]) -> Vec<C64> {
    let n = q.len();
    let mut out = vec![C64::new(0.0, 0.0); 2 * n + 1];
    for i in 0..n {
        let mut p = cr(1.0);
        for k in 0..n {
            if k != i {
                p *= (q[i] - q[k]) * (q[i] + q[k]);
            }
        }
        out[i] = q[i] * q[i] * SQRT2 * p;
        out[n + i] = q[i] * q[i] * SQRT2 * p;
    }
    let mut last = cr(1.0);
    for k in 0..n {
        last *= -(q[k] * q[k]);
    }
    out[2 * n] = last;
    out
}

/// The (2N+1) Vandermonde of the B case, with the extra unit column e_1.
pub fn b_vandermonde(q: &[C64]) -> ComplexMatrix {
    let n = q.len();
    let sz = 2 * n + 1;
    ComplexMatrix::from_fn(sz, sz, |row, col| {
        if col < n {
            q[col].powi(row as i32)
        } else if col < 2 * n {
            (-q[col - n]).powi(row as i32)
        } else if row == 0 {
            cr(1.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// The factorized B_N Lax matrix at couplings (m1, m2, m4) = (sqrt2 m2, m2, 0):
/// P - m2 D0 V^{-1} (C0 + Ctilde) V D0^{-1}.
pub fn factorized_lax_b(spec: &BcnSpec, phase: &PhasePoint) -> Result<ComplexMatrix> {
    if spec.m4.norm() != 0.0 || (spec.m1 - spec.m2 * SQRT2).norm() > 1e-14 * spec.m2.norm().max(1.0) {
        return Err(Error::InvalidSpec(
            "the B factorization needs m4 = 0 and m1 = sqrt2 m2".into(),
        ));
    }
    spec.check_phase(phase)?;
    let n = spec.n;
    let sz = 2 * n + 1;
    let d0 = b_d0(&phase.q);
    let v = b_vandermonde(&phase.q);
    let c0 = crate::factorization::derivative_matrix(sz);
    let ct = even_subdiagonal(sz);
    let core = &c0 + &ct;
    let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
    let dressed = ComplexMatrix::diag_mul(&d0, &v.inverse()?.mul_mat(&core).mul_mat(&v).mul_diag(&dinv))
        .scale(spec.m2);
    let mut p = ComplexMatrix::zeros(sz, sz);
    for i in 0..n {
        p[(i, i)] = phase.p[i];
        p[(n + i, n + i)] = -phase.p[i];
    }
    Ok(&p - &dressed)
}

/// The block matrix J = D0 V^{-1} Ctilde V D0^{-1} of the C/D proof; its
/// closed form has +-delta_ij/(2 q_i) blocks.
pub fn dc_j_matrix(q: &[C64]) -> Result<ComplexMatrix> {
    let n = q.len();
    let d0 = dc_d0(q);
    let v = dc_vandermonde(q);
    let ct = even_subdiagonal(2 * n);
    let dinv: Vec<C64> = d0.iter().map(|x| x.inv()).collect();
    Ok(ComplexMatrix::diag_mul(&d0, &v.inverse()?.mul_mat(&ct).mul_mat(&v).mul_diag(&dinv)))
}
