//! Dense complex matrices with the operations the identity checks need:
//! LU solves and inverses with a condition estimate, a shifted-QR eigenvalue
//! routine, tensor products over a two-site space with partial traces, the
//! finite Heisenberg-group basis, and contour-quadrature residue extraction.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense row-major complex matrix. Entries are validated finite on
/// construction paths that take user data.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cr(1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<C64> = rows.into_iter().flatten().collect();
        Self::from_vec(r, c, data)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Like `from_fn` but the generator may fail.
    pub fn try_from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<C64>,
    ) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j)?;
            }
        }
        Ok(m)
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// A - (tr A / n) I, the comparison form for identities that hold only up
    /// to a multiple of the identity.
    pub fn trace_free(&self) -> Self {
        let n = self.rows;
        let shift = self.trace() / n as f64;
        let mut m = self.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        m
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Right-multiplication by a diagonal matrix given as a slice.
    pub fn mul_diag(&self, d: &[C64]) -> Self {
        assert_eq!(self.cols, d.len());
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j])
    }

    /// Left-multiplication by a diagonal matrix given as a slice.
    pub fn diag_mul(d: &[C64], m: &Self) -> Self {
        assert_eq!(m.rows, d.len());
        Self::from_fn(m.rows, m.cols, |i, j| d[i] * m[(i, j)])
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<C64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)]).sum())
            .collect()
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::new(self)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu()?.inverse()
    }

    /// Inverse together with the infinity-norm condition estimate
    /// cond = |A|_inf |A^-1|_inf, so identity tolerances can be scaled.
    pub fn inverse_with_cond(&self) -> Result<(Self, f64)> {
        let inv = self.inverse()?;
        let cond = self.norm_inf() * inv.norm_inf();
        Ok((inv, cond))
    }

    pub fn det(&self) -> Result<C64> {
        Ok(self.lu()?.det())
    }

    /// All eigenvalues by complex Hessenberg reduction followed by a
    /// Wilkinson-shifted QR iteration.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        eigenvalues(self)
    }

    /// Singular values in decreasing order, by one-sided Jacobi sweeps
    /// (accurate for tiny trailing values, unlike the Gram-matrix route).
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let m = self.rows;
        let n = self.cols;
        let mut cols: Vec<Vec<C64>> = (0..n)
            .map(|j| (0..m).map(|i| self[(i, j)]).collect())
            .collect();
        let dot = |u: &[C64], v: &[C64]| -> C64 {
            u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
        };
        for _sweep in 0..60 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let a = dot(&cols[p], &cols[p]).re;
                    let b = dot(&cols[q], &cols[q]).re;
                    let cpq = dot(&cols[p], &cols[q]);
                    let mag = cpq.norm();
                    if mag <= 1e-300 || mag <= 1e-17 * (a * b).sqrt() {
                        continue;
                    }
                    off = off.max(mag / (a * b).sqrt().max(1e-300));
                    let phase = cpq / mag;
                    let tau = (b - a) / (2.0 * mag);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = t * cs;
                    for i in 0..m {
                        let u = cols[p][i];
                        let v = cols[q][i] * phase.conj();
                        cols[p][i] = u * cs - v * sn;
                        cols[q][i] = (u * sn + v * cs) * phase;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut sv: Vec<f64> = cols
            .iter()
            .map(|col| col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(sv)
    }

    pub fn matrix_power(&self, k: usize) -> Self {
        assert!(self.is_square());
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = out.mul_mat(self);
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.mul_mat(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(cr(-1.0))
    }
}

/// [A, B] = AB - BA.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &a.mul_mat(b) - &b.mul_mat(a)
}

/// Partial-pivot LU factorization of a square matrix.
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn new(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("LU of a non-square matrix".into()));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut pivot = k;
            let mut best = lu[(k, k)].norm();
            for i in (k + 1)..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix(format!("zero pivot at column {k}")));
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot, j)];
                    lu[(pivot, j)] = tmp;
                }
                perm.swap(k, pivot);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let sub = f * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn det(&self) -> C64 {
        let n = self.lu.rows;
        let mut d = cr(self.sign);
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.rows;
        let mut y: Vec<C64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            for j in 0..i {
                let s = self.lu[(i, j)] * y[j];
                y[i] -= s;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let s = self.lu[(i, j)] * y[j];
                y[i] -= s;
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let n = self.lu.rows;
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = cr(1.0);
            let col = self.solve_vec(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
            e[j] = C64::new(0.0, 0.0);
        }
        Ok(inv)
    }
}

// ---------------------------------------------------------------------------
// Eigenvalues: complex Hessenberg + shifted QR.
// ---------------------------------------------------------------------------

fn hessenberg_in_place(h: &mut ComplexMatrix) {
    let n = h.rows;
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k below the subdiagonal.
        let mut xnorm = 0.0;
        for i in (k + 1)..n {
            xnorm += h[(i, k)].norm_sqr();
        }
        let xnorm = xnorm.sqrt();
        if xnorm < 1e-300 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { cr(1.0) };
        let alpha = -phase * xnorm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vn2 < 1e-300 {
            continue;
        }
        let beta = 2.0 / vn2;
        // H <- P H with P = I - beta v v^H on rows k+1..n
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (idx, i) in (k + 1..n).enumerate() {
                s += v[idx].conj() * h[(i, j)];
            }
            s *= beta;
            for (idx, i) in (k + 1..n).enumerate() {
                let upd = v[idx] * s;
                h[(i, j)] -= upd;
            }
        }
        // H <- H P on columns k+1..n
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (idx, j) in (k + 1..n).enumerate() {
                s += h[(i, j)] * v[idx];
            }
            s *= beta;
            for (idx, j) in (k + 1..n).enumerate() {
                let upd = s * v[idx].conj();
                h[(i, j)] -= upd;
            }
        }
    }
}

/// Eigenvalues of the trailing 2x2 block; returns the one closer to the
/// bottom-right entry (the Wilkinson shift).
fn wilkinson_shift(h: &ComplexMatrix, m: usize) -> C64 {
    let a = h[(m - 1, m - 1)];
    let b = h[(m - 1, m)];
    let cc = h[(m, m - 1)];
    let d = h[(m, m)];
    let tr = a + d;
    let det = a * d - b * cc;
    let disc = (tr * tr - 4.0 * det).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(vec![]);
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let eps = 1e-14;
    let mut iters_since_deflation = 0usize;
    let mut total_iters = 0usize;
    let max_total = 200 * n;

    loop {
        // Deflate converged trailing entries.
        while hi > 0 {
            let s = h[(hi - 1, hi - 1)].norm() + h[(hi, hi)].norm();
            if h[(hi, hi - 1)].norm() <= eps * s.max(1e-300) {
                eigs.push(h[(hi, hi)]);
                hi -= 1;
                iters_since_deflation = 0;
            } else {
                break;
            }
        }
        if hi == 0 {
            eigs.push(h[(0, 0)]);
            break;
        }
        // Find the active window [lo..=hi].
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if h[(lo, lo - 1)].norm() <= eps * s.max(1e-300) {
                break;
            }
            lo -= 1;
        }
        total_iters += 1;
        iters_since_deflation += 1;
        if total_iters > max_total {
            return Err(Error::NonConverged("QR eigenvalue iteration stalled".into()));
        }
        // Shifted QR sweep on the window via Givens rotations.
        let mut mu = wilkinson_shift(&h, hi);
        if iters_since_deflation % 12 == 0 {
            // Exceptional shift to break symmetry-induced stalls.
            mu = h[(hi, hi)] + h[(hi, hi - 1)] * 1.5;
        }
        for i in lo..=hi {
            h[(i, i)] -= mu;
        }
        let mut rot: Vec<(C64, C64)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (cs, sn) = if r < 1e-300 {
                (cr(1.0), C64::new(0.0, 0.0))
            } else {
                (x.conj() / r, y.conj() / r)
            };
            rot.push((cs, sn));
            for j in k..n {
                let hk = h[(k, j)];
                let hk1 = h[(k + 1, j)];
                h[(k, j)] = cs * hk + sn * hk1;
                h[(k + 1, j)] = -sn.conj() * hk + cs.conj() * hk1;
            }
        }
        for (k, (cs, sn)) in (lo..hi).zip(rot) {
            for i in 0..=(k + 1).min(hi) {
                let hik = h[(i, k)];
                let hik1 = h[(i, k + 1)];
                h[(i, k)] = hik * cs.conj() + hik1 * sn.conj();
                h[(i, k + 1)] = -hik * sn + hik1 * cs;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += mu;
        }
    }
    Ok(eigs)
}

/// Eigenvalues sorted lexicographically by (re, im); a stable order for
/// drift comparisons along trajectories.
pub fn sorted_eigenvalues(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let mut ev = eigenvalues(a)?;
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    Ok(ev)
}

// ---------------------------------------------------------------------------
// Two-site operators.
// ---------------------------------------------------------------------------

/// Operator on C^n (x) C^n stored as an n^2 x n^2 matrix with the row index
/// convention i1*n + i2 (site 1 varies slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteOperator {
    n: usize,
    mat: ComplexMatrix,
}

impl TwoSiteOperator {
    pub fn new(n: usize, mat: ComplexMatrix) -> Result<Self> {
        if mat.rows() != n * n || mat.cols() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "two-site operator needs size {0}x{0}",
                n * n
            )));
        }
        Ok(Self { n, mat })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, mat: ComplexMatrix::zeros(n * n, n * n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, mat: ComplexMatrix::identity(n * n) }
    }

    pub fn site_dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.mat
    }

    pub fn from_kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let n = a.rows();
        assert_eq!(n, b.rows());
        Self { n, mat: kron(a, b) }
    }

    pub fn add_kron(&mut self, a: &ComplexMatrix, b: &ComplexMatrix, w: C64) {
        let n = self.n;
        for i1 in 0..n {
            for j1 in 0..n {
                let aij = a[(i1, j1)];
                if aij == C64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..n {
                    for j2 in 0..n {
                        self.mat[(i1 * n + i2, j1 * n + j2)] += w * aij * b[(i2, j2)];
                    }
                }
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { n: self.n, mat: self.mat.mul_mat(&other.mat) }
    }

    /// Applies the operator to a product vector u (x) v.
    pub fn apply_product(&self, u: &[C64], v: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                x[i * n + j] = u[i] * v[j];
            }
        }
        self.mat.matvec(&x)
    }
}

/// Kronecker product with the (site1, site2) index convention.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i1 in 0..ar {
        for j1 in 0..ac {
            let v = a[(i1, j1)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            for i2 in 0..br {
                for j2 in 0..bc {
                    out[(i1 * br + i2, j1 * bc + j2)] = v * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Standard basis matrix E_ij.
pub fn e_ij(i: usize, j: usize, n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    m[(i, j)] = cr(1.0);
    m
}

// ---------------------------------------------------------------------------
// Finite Heisenberg group basis.
// ---------------------------------------------------------------------------

/// Clock matrix Q with entries delta_kl exp(2 pi i k / N), k = 1..N.
pub fn clock_matrix(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (C64::i() * crate::elliptic::TWO_PI * (i + 1) as f64 / n as f64).exp()
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Cyclic shift matrix Lambda with entries delta_{k-l+1 = 0 mod N}.
pub fn shift_matrix(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| {
        if (j + n - i) % n == 1 % n {
            cr(1.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn int_matrix_power(m: &ComplexMatrix, k: i64) -> ComplexMatrix {
    let n = m.rows();
    if k == 0 {
        return ComplexMatrix::identity(n);
    }
    let base = if k > 0 { m.clone() } else { m.inverse().expect("unitary basis matrix") };
    let mut out = ComplexMatrix::identity(n);
    for _ in 0..k.unsigned_abs() {
        out = out.mul_mat(&base);
    }
    out
}

/// Heisenberg basis element T_a = exp(pi i a1 a2 / N) Q^{a1} Lambda^{a2},
/// defined for arbitrary integer labels.
pub fn heisenberg_t(a1: i64, a2: i64, n: usize) -> ComplexMatrix {
    let phase = (C64::i() * std::f64::consts::PI * (a1 * a2) as f64 / n as f64).exp();
    int_matrix_power(&clock_matrix(n), a1)
        .mul_mat(&int_matrix_power(&shift_matrix(n), a2))
        .scale(phase)
}

/// Structure constant kappa with T_a T_b = kappa_{a,b} T_{a+b}.
pub fn heisenberg_kappa(a: (i64, i64), b: (i64, i64), n: usize) -> C64 {
    (C64::i() * std::f64::consts::PI * (b.0 * a.1 - b.1 * a.0) as f64 / n as f64).exp()
}

/// Permutation operator P12 built in the standard basis; the builder asserts
/// that the Heisenberg-basis representation (1/N) sum_a T_a (x) T_{-a} agrees
/// entrywise.
pub fn permutation_operator(n: usize) -> Result<TwoSiteOperator> {
    let mut p = TwoSiteOperator::zeros(n);
    for i in 0..n {
        for j in 0..n {
            p.add_kron(&e_ij(i, j, n), &e_ij(j, i, n), cr(1.0));
        }
    }
    let mut alt = TwoSiteOperator::zeros(n);
    for a1 in 0..n as i64 {
        for a2 in 0..n as i64 {
            alt.add_kron(
                &heisenberg_t(a1, a2, n),
                &heisenberg_t(-a1, -a2, n),
                cr(1.0 / n as f64),
            );
        }
    }
    let diff = (&p.mat - &alt.mat).norm_max();
    if diff >= 1e-12 {
        return Err(Error::DimensionMismatch(format!(
            "permutation operator representations disagree by {diff:e}"
        )));
    }
    Ok(p)
}

/// The operator sum_ij E_ii (x) E_ji appearing in the trace formulas.
pub fn o12_operator(n: usize) -> TwoSiteOperator {
    let mut o = TwoSiteOperator::zeros(n);
    for i in 0..n {
        for j in 0..n {
            o.add_kron(&e_ij(i, i, n), &e_ij(j, i, n), cr(1.0));
        }
    }
    o
}

// ---------------------------------------------------------------------------
// Partial traces.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    One,
    Two,
}

/// tr_site(X (W on site)), i.e. tr_2(X (1 (x) W)) or tr_1(X (W (x) 1)).
pub fn trace_over_site(op: &TwoSiteOperator, site: Site, weight: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = op.site_dim();
    if weight.rows() != n || weight.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight must be {n}x{n} for site dimension {n}"
        )));
    }
    let x = op.matrix();
    let mut out = ComplexMatrix::zeros(n, n);
    match site {
        Site::Two => {
            // out_{i1 j1} = sum_{i2,k} X_{(i1 i2),(j1 k)} W_{k, i2}
            for i1 in 0..n {
                for j1 in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for i2 in 0..n {
                        for k in 0..n {
                            s += x[(i1 * n + i2, j1 * n + k)] * weight[(k, i2)];
                        }
                    }
                    out[(i1, j1)] = s;
                }
            }
        }
        Site::One => {
            // out_{i2 j2} = sum_{i1,k} X_{(i1 i2),(k j2)} W_{k, i1}
            for i2 in 0..n {
                for j2 in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for i1 in 0..n {
                        for k in 0..n {
                            s += x[(i1 * n + i2, k * n + j2)] * weight[(k, i1)];
                        }
                    }
                    out[(i2, j2)] = s;
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Residue extraction by contour quadrature.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ResidueConfig {
    pub radius: f64,
    pub nodes: usize,
    /// Agreement required between the M-node and 2M-node quadratures.
    pub tol: f64,
}

impl Default for ResidueConfig {
    fn default() -> Self {
        Self { radius: 1e-2, nodes: 64, tol: 1e-10 }
    }
}

fn contour_average(
    f: &mut impl FnMut(C64) -> Result<ComplexMatrix>,
    z0: C64,
    radius: f64,
    nodes: usize,
) -> Result<ComplexMatrix> {
    let mut acc: Option<ComplexMatrix> = None;
    for k in 0..nodes {
        let th = crate::elliptic::TWO_PI * k as f64 / nodes as f64;
        let w = C64::new(0.0, th).exp() * radius;
        let val = f(z0 + w)?.scale(w / nodes as f64);
        acc = Some(match acc {
            None => val,
            Some(a) => &a + &val,
        });
    }
    Ok(acc.unwrap())
}

/// Residue of a matrix-valued function at z0, assuming at most a first-order
/// pole there. Doubling the node count must reproduce the answer within
/// `cfg.tol`; a halved radius must reproduce it within a factor, otherwise the
/// pole order is higher than one.
pub fn residue_at(
    mut f: impl FnMut(C64) -> Result<ComplexMatrix>,
    z0: C64,
    cfg: ResidueConfig,
) -> Result<ComplexMatrix> {
    let r1 = contour_average(&mut f, z0, cfg.radius, cfg.nodes)?;
    let r2 = contour_average(&mut f, z0, cfg.radius, cfg.nodes * 2)?;
    let scale = r2.norm_max().max(1.0);
    if (&r1 - &r2).norm_max() > cfg.tol * scale {
        return Err(Error::NonConverged(format!(
            "residue quadrature changed by {:e} when doubling nodes",
            (&r1 - &r2).norm_max()
        )));
    }
    let half = contour_average(&mut f, z0, cfg.radius / 2.0, cfg.nodes * 2)?;
    let denom = r2.norm_max().max(1e-300);
    let ratio = half.norm_max() / denom;
    if (&half - &r2).norm_max() > 0.5 * denom && (ratio >= 1.8 || ratio <= 0.55) {
        return Err(Error::PoleOrderTooHigh(format!(
            "half-radius estimate differs by factor {ratio:.2}"
        )));
    }
    Ok(r2)
}
