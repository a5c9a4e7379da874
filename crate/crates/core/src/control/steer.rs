//! Shooting over piecewise-constant signals, and the vortex-transfer diagram.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::rank::{lie_rank, RankOptions};
use super::{ControlError, ControlSystem};
use crate::liecore::{check_dim, raw_exp, GroupElement};
use crate::signal::ControlSignal;
use crate::vortex::VortexBasis;

/// Slack added to the diagram tolerance for roundoff in the left shifts.
pub const COMMUTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SteerOptions {
    /// Success threshold on the Frobenius distance to the target.
    pub tol: f64,
    /// Once below `tol`, keep refining until this distance (or stagnation).
    pub polish_tol: f64,
    pub max_starts: usize,
    pub max_iterations: usize,
    /// Starts evaluated together; results do not depend on thread count.
    pub batch: usize,
    pub seed: u64,
    pub fd_step: f64,
    /// Wall-clock budget in seconds, checked between iterations.
    pub time_limit: Option<f64>,
    /// Record the bracket rank at the initial point.
    pub check_rank: bool,
}

impl Default for SteerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-2,
            polish_tol: 1e-10,
            max_starts: 16,
            max_iterations: 80,
            batch: 4,
            seed: 0,
            fd_step: 1e-7,
            time_limit: None,
            check_rank: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerResult {
    pub signal: ControlSignal,
    pub distance: f64,
    /// Index of the start that produced the signal (0 is the zero signal).
    pub start: usize,
    pub starts_tried: usize,
    pub iterations: usize,
    /// Number of single-segment flows evaluated.
    pub segment_flows: usize,
    pub wall_time_s: f64,
    pub rank_at_start: Option<usize>,
}

struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

struct Problem<'a> {
    csys: &'a ControlSystem,
    g0: DMatrix<f64>,
    target: DMatrix<f64>,
    k: usize,
}

struct Eval {
    residual: DVector<f64>,
    states: Vec<DMatrix<f64>>,
}

impl Problem<'_> {
    fn rows(&self, p: &[f64]) -> Vec<Vec<f64>> {
        p.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    fn eval(&self, p: &[f64]) -> Eval {
        let states = self.csys.raw_segment_states(&self.g0, &self.rows(p));
        let end = states.last().expect("nonempty");
        Eval { residual: DVector::from_column_slice((end - &self.target).as_slice()), states }
    }

    /// Forward differences, restarting each column from the cached breakpoint state.
    fn jacobian(&self, p: &[f64], base: &Eval, step: f64) -> (DMatrix<f64>, usize) {
        let rows = self.rows(p);
        let cols = crate::parallel::map((0..p.len()).collect(), |idx| {
            let (j, i) = (idx / self.k, idx % self.k);
            let mut row = rows[j].clone();
            // step inward so the probe stays inside the box
            let h = if row[i] + step > self.csys.epsilon() { -step } else { step };
            row[i] += h;
            let mut g = self.csys.raw_segment(&base.states[j], &row, 1.0);
            for r in &rows[j + 1..] {
                g = self.csys.raw_segment(&g, r, 1.0);
            }
            let end = base.states.last().expect("nonempty");
            ((g - end) / h).as_slice().to_vec()
        });
        let flows: usize = (0..p.len()).map(|idx| rows.len() - idx / self.k).sum();
        let jac = DMatrix::from_fn(base.residual.len(), p.len(), |r, c| cols[c][r]);
        (jac, flows)
    }
}

struct StartOutcome {
    p: Vec<f64>,
    distance: f64,
    iterations: usize,
    flows: usize,
}

fn levenberg_marquardt(prob: &Problem, start: Vec<f64>, opts: &SteerOptions, clock: &Clock) -> StartOutcome {
    let eps = prob.csys.epsilon();
    let nseg = prob.csys.segments();
    let mut p = start;
    let mut cur = prob.eval(&p);
    let mut dist = cur.residual.norm();
    let mut flows = nseg;
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut polish = 0;
    while iterations < opts.max_iterations && dist > opts.polish_tol {
        if opts.time_limit.is_some_and(|t| clock.elapsed() > t) {
            break;
        }
        iterations += 1;
        let (jac, f) = prob.jacobian(&p, &cur, opts.fd_step);
        flows += f;
        let grad = jac.transpose() * &cur.residual;
        // freeze coordinates pinned at the box where descent points outward
        let free: Vec<bool> =
            (0..p.len()).map(|i| !((p[i] >= eps && grad[i] < 0.0) || (p[i] <= -eps && grad[i] > 0.0))).collect();
        let mut jf = jac.clone();
        for (i, ok) in free.iter().enumerate() {
            if !ok {
                jf.column_mut(i).fill(0.0);
            }
        }
        let jtj = jf.transpose() * &jf;
        let g = jf.transpose() * &cur.residual;
        let scale = jtj.diagonal().max().max(1e-12);
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * scale;
            }
            let Some(chol) = a.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> =
                (0..p.len()).map(|i| if free[i] { (p[i] + delta[i]).clamp(-eps, eps) } else { p[i] }).collect();
            let ev = prob.eval(&trial);
            flows += nseg;
            let d = ev.residual.norm();
            if d < dist {
                let gain = (dist - d) / dist;
                p = trial;
                cur = ev;
                dist = d;
                mu = (mu / 3.0).max(1e-9);
                accepted = true;
                if dist < opts.tol {
                    polish += 1;
                    if gain < 1e-6 {
                        polish = usize::MAX;
                    }
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted || polish > 30 {
            break;
        }
    }
    StartOutcome { p, distance: dist, iterations, flows }
}

fn start_point(index: usize, len: usize, eps: f64, seed: u64) -> Vec<f64> {
    if index == 0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..len).map(|_| rng.random_range(-eps..=eps)).collect()
}

/// Multi-start projected Levenberg–Marquardt over the `N×k` segment values,
/// minimizing `‖Φ_u(g0) - g_target‖_F`. Start 0 is the zero signal; the
/// others are uniform in the box, drawn from per-start streams of `seed`.
pub fn steer(
    csys: &ControlSystem,
    g0: &GroupElement,
    g_target: &GroupElement,
    opts: &SteerOptions,
) -> Result<SteerResult, ControlError> {
    check_dim(csys.n(), g0.dim())?;
    check_dim(csys.n(), g_target.dim())?;
    if opts.max_starts == 0 || opts.batch == 0 || !(opts.tol > 0.0) || !(opts.fd_step > 0.0) {
        return Err(ControlError::InvalidParameters("need positive tol, fd_step, max_starts and batch"));
    }
    let clock = Clock::start();
    let rank_at_start = if opts.check_rank && !csys.control_dirs().is_empty() {
        lie_rank(csys, g0, &RankOptions::default()).ok().map(|r| r.rank)
    } else {
        None
    };
    let k = csys.control_dirs().len().max(1);
    let len = k * csys.segments();
    let prob = Problem { csys, g0: g0.matrix().clone(), target: g_target.matrix().clone(), k };

    let mut best: Option<(usize, StartOutcome)> = None;
    let mut flows = 0;
    let mut tried = 0;
    while tried < opts.max_starts {
        let batch: Vec<usize> = (tried..(tried + opts.batch).min(opts.max_starts)).collect();
        tried += batch.len();
        let outcomes = crate::parallel::map(batch.clone(), |i| {
            let start = start_point(i, len, csys.epsilon(), opts.seed);
            if csys.control_dirs().is_empty() {
                // nothing to optimize
                let d = prob.eval(&start).residual.norm();
                return StartOutcome { p: start, distance: d, iterations: 0, flows: csys.segments() };
            }
            levenberg_marquardt(&prob, start, opts, &clock)
        });
        for (i, o) in batch.into_iter().zip(outcomes) {
            flows += o.flows;
            // the lowest successful start wins; otherwise the closest one
            if best.as_ref().is_none_or(|(_, b)| b.distance > opts.tol && o.distance < b.distance) {
                best = Some((i, o));
            }
        }
        let done = best.as_ref().is_some_and(|(_, b)| b.distance <= opts.tol);
        if done || opts.time_limit.is_some_and(|t| clock.elapsed() > t) {
            break;
        }
    }
    let (start, o) = best.expect("at least one start");
    let signal = ControlSignal::from_flat(&o.p, k, csys.horizon())?;
    csys.check_signal(&signal)?;
    let result = SteerResult {
        signal,
        distance: o.distance,
        start,
        starts_tried: tried,
        iterations: o.iterations,
        segment_flows: flows,
        wall_time_s: clock.elapsed(),
        rank_at_start,
    };
    if result.distance <= opts.tol {
        Ok(result)
    } else {
        Err(ControlError::BudgetExhausted(Box::new(result)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferEntry {
    pub s: f64,
    pub basis_index: usize,
    /// `‖Φ_u(exp(sξ)h₁) - exp(sξ)h₂‖_F`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    /// `‖Φ_u(h₁) - h₂‖_F`.
    pub residual: f64,
    pub entries: Vec<TransferEntry>,
    pub worst_defect: f64,
    /// `10 · residual + COMMUTE_TOL`; the factor is an engineering margin.
    pub tolerance: f64,
    pub passed: bool,
    /// Distance from `h₁` after running the signal backwards from `h₂`.
    pub reverse_return: f64,
    pub steer: Option<SteerResult>,
}

/// Checks the transfer diagram for a given signal.
pub fn transfer_with_signal(
    csys: &ControlSystem,
    basis: &VortexBasis,
    h1: &GroupElement,
    h2: &GroupElement,
    signal: &ControlSignal,
    s_grid: &[f64],
) -> Result<TransferReport, ControlError> {
    check_dim(csys.n(), basis.n())?;
    let residual = csys.flow(h1, signal)?.distance(h2);
    let reverse_return = csys.flow_reversed(h2, signal)?.distance(h1);
    let mut entries = Vec::new();
    for &s in s_grid {
        for (i, xi) in basis.basis.iter().enumerate() {
            let shift = raw_exp(&(xi.matrix() * s));
            let a = GroupElement::from_raw(&shift * h1.matrix());
            let b = GroupElement::from_raw(&shift * h2.matrix());
            entries.push(TransferEntry { s, basis_index: i, defect: csys.flow(&a, signal)?.distance(&b) });
        }
    }
    let worst_defect = entries.iter().map(|e| e.defect).fold(0.0, f64::max);
    let tolerance = 10.0 * residual + COMMUTE_TOL;
    Ok(TransferReport {
        residual,
        passed: worst_defect <= tolerance,
        entries,
        worst_defect,
        tolerance,
        reverse_return,
        steer: None,
    })
}

/// Steers `h₁ → h₂`, then carries the pair along every vortex direction.
pub fn vortex_transfer(
    csys: &ControlSystem,
    basis: &VortexBasis,
    h1: &GroupElement,
    h2: &GroupElement,
    s_grid: &[f64],
    opts: &SteerOptions,
) -> Result<TransferReport, ControlError> {
    let result = steer(csys, h1, h2, opts)?;
    let mut report = transfer_with_signal(csys, basis, h1, h2, &result.signal, s_grid)?;
    report.steer = Some(result);
    Ok(report)
}
