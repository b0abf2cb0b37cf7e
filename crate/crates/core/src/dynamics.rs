//! Trajectory integration (adaptive RK4 with step doubling) and the generic
//! verification engines: finite-difference Lax-equation residual profiles
//! with convergence-order estimation, conservation drift along trajectories,
//! and the seeded random phase-point sampler used by the suites.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptic::{self, FunctionClass};
use crate::error::{Error, Result};
use crate::linalg::{commutator, sorted_eigenvalues, ComplexMatrix, C64};
use crate::models::{eom_rhs, lax, ModelSpec, PhasePoint, TopSpec};
use crate::rootsys::{bcn_eom_rhs, lax_bcn, BcnSpec};

/// A time-ordered set of phase-space states.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

/// Residual norms of a finite-difference identity at a ladder of step sizes,
/// with the least-squares slope of log(residual) against log(h).
#[derive(Debug, Clone)]
pub struct ResidualProfile {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub estimated_order: f64,
    pub fit_residual: f64,
}

fn log_log_fit(steps: &[f64], residuals: &[f64]) -> (f64, f64) {
    let n = steps.len() as f64;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let fit_res = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = ym + slope * (x - xm);
            (y - pred) * (y - pred)
        })
        .sum::<f64>()
        .sqrt();
    (slope, fit_res)
}

impl ResidualProfile {
    pub fn from_measurements(steps: Vec<f64>, residuals: Vec<f64>) -> Self {
        let (estimated_order, fit_residual) = log_log_fit(&steps, &residuals);
        Self { steps, residuals, estimated_order, fit_residual }
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Generic vector-state RK4.
// ---------------------------------------------------------------------------

fn axpy(y: &[C64], d: &[C64], s: f64) -> Vec<C64> {
    y.iter().zip(d).map(|(a, b)| a + b * s).collect()
}

fn rk4_step(f: &mut impl FnMut(&[C64]) -> Result<Vec<C64>>, y: &[C64], h: f64) -> Result<Vec<C64>> {
    let k1 = f(y)?;
    let k2 = f(&axpy(y, &k1, h / 2.0))?;
    let k3 = f(&axpy(y, &k2, h / 2.0))?;
    let k4 = f(&axpy(y, &k3, h))?;
    Ok(y
        .iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

/// Integrates dy/dt = f(y) to t_end with step-doubling error control at the
/// given relative tolerance, recording every accepted state.
pub fn integrate_adaptive(
    mut f: impl FnMut(&[C64]) -> Result<Vec<C64>>,
    y0: Vec<C64>,
    t_end: f64,
    tol: f64,
    mut on_state: impl FnMut(f64, &[C64]) -> Result<()>,
) -> Result<Vec<(f64, Vec<C64>)>> {
    let mut t = 0.0;
    let mut y = y0;
    let mut h = (t_end / 64.0).clamp(1e-6, 0.05);
    let mut out = vec![(0.0, y.clone())];
    on_state(0.0, &y)?;
    let mut guard = 0usize;
    while t < t_end {
        guard += 1;
        if guard > 2_000_000 {
            return Err(Error::StepUnderflow(t));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let full = rk4_step(&mut f, &y, h)?;
        let half = rk4_step(&mut f, &y, h / 2.0)?;
        let two = rk4_step(&mut f, &half, h / 2.0)?;
        let scale: f64 = y.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let err = full
            .iter()
            .zip(&two)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / 15.0;
        let target = tol * scale * (h / t_end.max(1e-12));
        if err <= target.max(1e-15 * scale) {
            // accept with local extrapolation
            y = two
                .iter()
                .zip(&full)
                .map(|(a, b)| a + (a - b) / 15.0)
                .collect();
            t += h;
            on_state(t, &y)?;
            out.push((t, y.clone()));
            let grow = if err > 0.0 { 0.9 * (target / err).powf(0.2) } else { 5.0 };
            h *= grow.clamp(1.0, 5.0);
        } else {
            h *= (0.9 * (target / err).powf(0.25)).clamp(0.1, 0.9);
            if h < 1e-12 {
                return Err(Error::StepUnderflow(t));
            }
        }
    }
    Ok(out)
}

fn pack(phase: &PhasePoint) -> Vec<C64> {
    phase.q.iter().chain(phase.p.iter()).copied().collect()
}

fn unpack(y: &[C64]) -> PhasePoint {
    let n = y.len() / 2;
    PhasePoint { q: y[..n].to_vec(), p: y[n..].to_vec() }
}

/// The flow map of a many-body model as a vector field on packed states.
fn model_field(spec: &ModelSpec) -> impl FnMut(&[C64]) -> Result<Vec<C64>> + '_ {
    move |y| {
        let phase = unpack(y);
        let (dq, dp) = eom_rhs(spec, &phase)?;
        Ok(dq.into_iter().chain(dp).collect())
    }
}

fn bcn_field(spec: &BcnSpec) -> impl FnMut(&[C64]) -> Result<Vec<C64>> + '_ {
    move |y| {
        let phase = unpack(y);
        let (dq, dp) = bcn_eom_rhs(spec, &phase)?;
        Ok(dq.into_iter().chain(dp).collect())
    }
}

/// Integrates a many-body model, aborting with `CollisionDetected` when any
/// pairwise separation falls below the exclusion radius (0.02 in the flat
/// metric, well above the evaluators' own guard).
pub fn integrate(spec: &ModelSpec, initial: &PhasePoint, t_end: f64, tol: f64) -> Result<Trajectory> {
    let exclusion = 0.02;
    let states = integrate_adaptive(model_field(spec), pack(initial), t_end, tol, |t, y| {
        let phase = unpack(y);
        let n = phase.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if elliptic::pole_distance(phase.qij(i, j), &spec.class) < exclusion {
                    return Err(Error::CollisionDetected { time: t, pair: (i, j) });
                }
            }
        }
        Ok(())
    })?;
    Ok(Trajectory {
        times: states.iter().map(|(t, _)| *t).collect(),
        states: states.iter().map(|(_, y)| unpack(y)).collect(),
    })
}

/// Integrates a BC_N model with the reflection-aware collision guard.
pub fn integrate_bcn(spec: &BcnSpec, initial: &PhasePoint, t_end: f64, tol: f64) -> Result<Trajectory> {
    let exclusion = 0.02;
    let states = integrate_adaptive(bcn_field(spec), pack(initial), t_end, tol, |t, y| {
        let phase = unpack(y);
        let n = phase.n();
        for i in 0..n {
            if phase.q[i].norm() < exclusion {
                return Err(Error::CollisionDetected { time: t, pair: (i, i) });
            }
            for j in (i + 1)..n {
                if (phase.q[i] - phase.q[j]).norm() < exclusion
                    || (phase.q[i] + phase.q[j]).norm() < exclusion
                {
                    return Err(Error::CollisionDetected { time: t, pair: (i, j) });
                }
            }
        }
        Ok(())
    })?;
    Ok(Trajectory {
        times: states.iter().map(|(t, _)| *t).collect(),
        states: states.iter().map(|(_, y)| unpack(y)).collect(),
    })
}

/// One high-accuracy flow step of signed length h (fixed substeps, tolerance
/// well below the finite-difference truncation being measured).
fn flow_step(spec: &ModelSpec, phase: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let substeps = 8;
    let mut y = pack(phase);
    let mut f = model_field(spec);
    for _ in 0..substeps {
        y = rk4_step(&mut f, &y, h / substeps as f64)?;
    }
    Ok(unpack(&y))
}

/// Central-difference Lax residual ||(L(t+h) - L(t-h))/2h - [L, M]|| at a
/// ladder of steps; the slope of the profile is 2 when the pair closes.
pub fn lax_equation_profile(
    spec: &ModelSpec,
    phase: &PhasePoint,
    z: C64,
    steps: &[f64],
) -> Result<ResidualProfile> {
    let l0 = lax(spec, phase, z)?;
    let m0 = crate::models::m_matrix(spec, phase, z)?;
    let bracket = commutator(&l0, &m0);
    let mut residuals = Vec::with_capacity(steps.len());
    for &h in steps {
        let lp = lax(spec, &flow_step(spec, phase, h)?, z)?;
        let lm = lax(spec, &flow_step(spec, phase, -h)?, z)?;
        let ld = (&lp - &lm).scale(crate::linalg::cr(1.0 / (2.0 * h)));
        residuals.push((&ld - &bracket).norm_max());
    }
    Ok(ResidualProfile::from_measurements(steps.to_vec(), residuals))
}

/// Same profile with a deliberately corrupted M (diagonal zeroed): the
/// residual then saturates at O(1) and the fitted order collapses.
pub fn lax_equation_profile_corrupted(
    spec: &ModelSpec,
    phase: &PhasePoint,
    z: C64,
    steps: &[f64],
) -> Result<ResidualProfile> {
    let l0 = lax(spec, phase, z)?;
    let mut m0 = crate::models::m_matrix(spec, phase, z)?;
    for i in 0..m0.rows() {
        m0[(i, i)] = C64::new(0.0, 0.0);
    }
    let bracket = commutator(&l0, &m0);
    let mut residuals = Vec::with_capacity(steps.len());
    for &h in steps {
        let lp = lax(spec, &flow_step(spec, phase, h)?, z)?;
        let lm = lax(spec, &flow_step(spec, phase, -h)?, z)?;
        let ld = (&lp - &lm).scale(crate::linalg::cr(1.0 / (2.0 * h)));
        residuals.push((&ld - &bracket).norm_max());
    }
    Ok(ResidualProfile::from_measurements(steps.to_vec(), residuals))
}

/// Lax residual profile for the top models, along the spin flow dS = [S, J(S)].
pub fn top_lax_profile(
    s0: &ComplexMatrix,
    spec: &TopSpec,
    z: C64,
    steps: &[f64],
) -> Result<ResidualProfile> {
    let n = spec.n;
    let field = |y: &[C64]| -> Result<Vec<C64>> {
        let s = ComplexMatrix::from_vec(n, n, y.to_vec())?;
        let ds = crate::models::top_eom(&s, spec)?;
        Ok((0..n * n).map(|k| ds[(k / n, k % n)]).collect())
    };
    let flow = |h: f64| -> Result<ComplexMatrix> {
        let mut y: Vec<C64> = (0..n * n).map(|k| s0[(k / n, k % n)]).collect();
        let mut f = field;
        for _ in 0..8 {
            y = rk4_step(&mut f, &y, h / 8.0)?;
        }
        ComplexMatrix::from_vec(n, n, y)
    };
    let (l0, m0) = crate::models::lax_top(s0, z, spec)?;
    let bracket = commutator(&l0, &m0);
    let mut residuals = Vec::with_capacity(steps.len());
    for &h in steps {
        let (lp, _) = crate::models::lax_top(&flow(h)?, z, spec)?;
        let (lm, _) = crate::models::lax_top(&flow(-h)?, z, spec)?;
        let ld = (&lp - &lm).scale(crate::linalg::cr(1.0 / (2.0 * h)));
        residuals.push((&ld - &bracket).norm_max());
    }
    Ok(ResidualProfile::from_measurements(steps.to_vec(), residuals))
}

/// Drift of tr L^k (k = 1..N) and of the sorted spectrum along a trajectory.
#[derive(Debug, Clone)]
pub struct ConservationReport {
    pub trace_drifts: Vec<(usize, f64)>,
    pub eigenvalue_drift: f64,
    pub energy_drift: f64,
}

pub fn conservation_report(spec: &ModelSpec, traj: &Trajectory, z: C64) -> Result<ConservationReport> {
    let n = spec.n;
    let l0 = lax(spec, &traj.states[0], z)?;
    let tr0: Vec<C64> = (1..=n).map(|k| l0.matrix_power(k).trace()).collect();
    let ev0 = sorted_eigenvalues(&l0)?;
    let h0 = crate::models::hamiltonian(spec, &traj.states[0])?;
    let mut drifts = vec![0.0_f64; n];
    let mut ev_drift = 0.0_f64;
    let mut h_drift = 0.0_f64;
    // Sampling a handful of states is enough to catch drift.
    let stride = (traj.states.len() / 16).max(1);
    for state in traj.states.iter().skip(1).step_by(stride).chain(traj.states.last()) {
        let l = lax(spec, state, z)?;
        for k in 1..=n {
            let tr = l.matrix_power(k).trace();
            drifts[k - 1] = drifts[k - 1].max((tr - tr0[k - 1]).norm());
        }
        let ev = sorted_eigenvalues(&l)?;
        for (a, b) in ev0.iter().zip(&ev) {
            ev_drift = ev_drift.max((a - b).norm());
        }
        h_drift = h_drift.max((crate::models::hamiltonian(spec, state)? - h0).norm());
    }
    Ok(ConservationReport {
        trace_drifts: (1..=n).zip(drifts).collect(),
        eigenvalue_drift: ev_drift,
        energy_drift: h_drift,
    })
}

/// Eigenvalue drift of the BC_N Lax matrix along a trajectory.
pub fn bcn_eigenvalue_drift(spec: &BcnSpec, traj: &Trajectory) -> Result<f64> {
    let ev0 = sorted_eigenvalues(&lax_bcn(spec, &traj.states[0])?)?;
    let mut drift = 0.0_f64;
    let stride = (traj.states.len() / 8).max(1);
    for state in traj.states.iter().skip(1).step_by(stride).chain(traj.states.last()) {
        let ev = sorted_eigenvalues(&lax_bcn(spec, state)?)?;
        for (a, b) in ev0.iter().zip(&ev) {
            drift = drift.max((a - b).norm());
        }
    }
    Ok(drift)
}

// ---------------------------------------------------------------------------
// Seeded phase-point sampler.
// ---------------------------------------------------------------------------

/// Draws nonsingular phase points: pairwise separations at least `sep` away
/// from the relevant pole set (including the shifts by +-h used by the RS
/// kernels), coordinates confined to the interior of the fundamental cell in
/// the elliptic class.
pub struct PhaseSampler {
    rng: ChaCha8Rng,
}

impl PhaseSampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn candidate(&mut self, n: usize, class: &FunctionClass) -> PhasePoint {
        let (re_box, im_box) = match class {
            FunctionClass::Elliptic(_) => (0.47, 0.20),
            _ => (1.5, 0.35),
        };
        let q: Vec<C64> = (0..n)
            .map(|_| {
                C64::new(
                    self.rng.gen_range(-re_box..re_box),
                    self.rng.gen_range(-im_box..im_box),
                )
            })
            .collect();
        let p: Vec<C64> = (0..n)
            .map(|_| {
                C64::new(
                    self.rng.gen_range(-0.5..0.5),
                    self.rng.gen_range(-0.15..0.15),
                )
            })
            .collect();
        PhasePoint { q, p }
    }

    /// A nonsingular sample for the given class, with every q_ij and q_ij +- h
    /// at distance >= `sep` from the pole set.
    pub fn sample(&mut self, n: usize, class: &FunctionClass, hbar: C64, sep: f64) -> PhasePoint {
        'outer: for _ in 0..100_000 {
            let cand = self.candidate(n, class);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = cand.qij(i, j);
                    if elliptic::pole_distance(d, class) < sep
                        || elliptic::pole_distance(d + hbar, class) < sep * 0.5
                        || elliptic::pole_distance(d - hbar, class) < sep * 0.5
                    {
                        continue 'outer;
                    }
                }
            }
            return cand;
        }
        panic!("sampler failed to find a nonsingular configuration");
    }

    /// Sample for BC_N: positive-real-part coordinates separated from both
    /// q_i - q_j and q_i + q_j collisions and from the reflection point.
    pub fn sample_bcn(&mut self, n: usize, sep: f64) -> PhasePoint {
        'outer: for _ in 0..100_000 {
            let q: Vec<C64> = (0..n)
                .map(|_| C64::new(self.rng.gen_range(0.6..2.8), self.rng.gen_range(-0.25..0.25)))
                .collect();
            let p: Vec<C64> = (0..n)
                .map(|_| C64::new(self.rng.gen_range(-0.5..0.5), self.rng.gen_range(-0.15..0.15)))
                .collect();
            for i in 0..n {
                if q[i].norm() < sep {
                    continue 'outer;
                }
                for j in 0..n {
                    if i != j && ((q[i] - q[j]).norm() < sep || (q[i] + q[j]).norm() < sep) {
                        continue 'outer;
                    }
                }
            }
            return PhasePoint { q, p };
        }
        panic!("sampler failed to find a nonsingular reflection configuration");
    }

    /// A random spin matrix with entries in the unit box.
    pub fn sample_spin(&mut self, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
        })
    }

    /// A random spectral point away from the pole set.
    pub fn sample_spectral(&mut self, class: &FunctionClass, sep: f64) -> C64 {
        loop {
            let z = C64::new(self.rng.gen_range(-0.45..0.45), self.rng.gen_range(0.05..0.3));
            if elliptic::pole_distance(z, class) >= sep {
                return z;
            }
        }
    }
}

/// Spectral-parameter-and-couplings defaults shared by the suites.
pub fn default_spectral_point() -> C64 {
    C64::new(0.27, 0.13)
}
