//! Time integration of the semidiscrete system `W' = (A_1 + A_l) W + g(t)`.
//!
//! Douglas ADI (theta = 1/2) for two axes, Crank–Nicolson for one axis (the
//! same code with the second axis absent), and a damped start of two
//! factored backward Euler half-steps. American problems use either the
//! explicit payoff (EP) projection or the Ikonen–Toivanen (IT) splitting with
//! a Lagrange multiplier.
//!
//! Values are stored row-major with the primary axis slow: `W[j * n2 + k]`.
//! Each step makes one forward pass that builds the right-hand side and
//! eliminates along the primary axis, and one backward pass that also
//! finishes each row: second-axis solve and complementarity update.

use crate::error::Result;
use crate::grid::{AxisOperator, Obstacle};
use crate::tridiag::TridiagonalLu;

/// Rows finished together in the backward sweep.
const ROW_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintMode {
    Unconstrained,
    /// Explicit payoff: `W = max(W_bar, Psi)` after each step.
    ExplicitPayoff,
    /// Ikonen–Toivanen operator splitting.
    IkonenToivanen,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Unconstrained => "none",
            ConstraintMode::ExplicitPayoff => "ep",
            ConstraintMode::IkonenToivanen => "it",
        }
    }
}

impl std::str::FromStr for ConstraintMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ep" => Ok(ConstraintMode::ExplicitPayoff),
            "it" => Ok(ConstraintMode::IkonenToivanen),
            "none" | "unconstrained" => Ok(ConstraintMode::Unconstrained),
            other => Err(crate::error::Error::Domain(format!("unknown constraint mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveState {
    pub step: usize,
    pub time: f64,
    pub values: Vec<f64>,
    /// Lagrange multiplier, present for IT runs only.
    pub multiplier: Option<Vec<f64>>,
}

impl SolveState {
    pub fn new(values: Vec<f64>, mode: ConstraintMode) -> Self {
        let multiplier = (mode == ConstraintMode::IkonenToivanen).then(|| vec![0.0; values.len()]);
        SolveState { step: 0, time: 0.0, values, multiplier }
    }
}

/// One semidiscrete problem on a one- or two-axis tensor grid.
pub struct Problem<'a> {
    pub primary: AxisOperator,
    pub secondary: Option<AxisOperator>,
    pub initial: Vec<f64>,
    pub obstacle: Option<&'a dyn Obstacle>,
    pub maturity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepKind {
    Douglas,
    BackwardEuler,
}

pub struct Stepper<'a> {
    primary: &'a AxisOperator,
    secondary: Option<&'a AxisOperator>,
    /// Factors of `I - dt/2 A_k`.
    lu_primary: TridiagonalLu,
    lu_secondary: Option<TridiagonalLu>,
    dt: f64,
    width: usize,
    obstacle: Option<&'a dyn Obstacle>,
    rhs: Vec<f64>,
    zero_row: Vec<f64>,
    /// `c2 * (sub, diag, sup)` of the second-axis operator.
    scaled: Vec<[f64; 3]>,
    /// Second-axis lines of one row block, interleaved `[k][row]`.
    block: Vec<[f64; ROW_BLOCK]>,
    obstacle_row: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        primary: &'a AxisOperator,
        secondary: Option<&'a AxisOperator>,
        dt: f64,
        obstacle: Option<&'a dyn Obstacle>,
    ) -> Result<Self> {
        let lu_primary = TridiagonalLu::factor(&primary.matrix.identity_plus(-0.5 * dt))?;
        let lu_secondary = secondary
            .map(|op| TridiagonalLu::factor(&op.matrix.identity_plus(-0.5 * dt)))
            .transpose()?;
        let width = secondary.map_or(1, |op| op.len());
        Ok(Stepper {
            primary,
            secondary,
            lu_primary,
            lu_secondary,
            dt,
            width,
            obstacle,
            rhs: vec![0.0; primary.len() * width],
            zero_row: vec![0.0; width],
            block: vec![[0.0; ROW_BLOCK]; width],
            scaled: vec![[0.0; 3]; width],
            obstacle_row: vec![0.0; width],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Unconstrained Douglas step (Crank–Nicolson with one axis).
    pub fn douglas_step(&mut self, state: &mut SolveState) {
        self.step(state, ConstraintMode::Unconstrained)
    }

    pub fn ep_step(&mut self, state: &mut SolveState) {
        self.step(state, ConstraintMode::ExplicitPayoff)
    }

    pub fn it_step(&mut self, state: &mut SolveState) {
        self.step(state, ConstraintMode::IkonenToivanen)
    }

    /// One regular time step `t_{n-1} -> t_n` under `mode`.
    pub fn step(&mut self, state: &mut SolveState, mode: ConstraintMode) {
        let t_old = state.time;
        let t_new = (state.step + 1) as f64 * self.dt;
        self.advance(state, StepKind::Douglas, t_old, t_new, mode);
        state.step += 1;
    }

    /// Two backward Euler half-steps in ADI-factored form, each followed by
    /// the constraint update of `mode`.
    pub fn damped_step(&mut self, state: &mut SolveState, mode: ConstraintMode) {
        let t0 = state.time;
        let t1 = (state.step + 1) as f64 * self.dt;
        let half = 0.5 * (t0 + t1);
        self.advance(state, StepKind::BackwardEuler, t0, half, mode);
        self.advance(state, StepKind::BackwardEuler, half, t1, mode);
        state.step += 1;
    }

    /// The damped first step of a run.
    pub fn rannacher_start(&mut self, state: &mut SolveState, mode: ConstraintMode) {
        debug_assert_eq!(state.step, 0);
        self.damped_step(state, mode)
    }

    fn advance(&mut self, state: &mut SolveState, kind: StepKind, t_old: f64, t_new: f64, mode: ConstraintMode) {
        let h = t_new - t_old;
        let n1 = self.primary.len();
        let n2 = self.width;
        let a1 = &self.primary.matrix;

        if mode == ConstraintMode::IkonenToivanen && state.multiplier.is_none() {
            state.multiplier = Some(vec![0.0; state.values.len()]);
        }
        let w = &mut state.values;
        let mu = match mode {
            ConstraintMode::IkonenToivanen => state.multiplier.as_mut(),
            _ => None,
        };

        let (c1, c2, c3) = match kind {
            StepKind::Douglas => (0.5 * h, h, -0.5 * h),
            StepKind::BackwardEuler => (0.0, 0.0, 0.0),
        };
        let (p_lo_old, p_hi_old) = self.primary.source_ends(t_old);
        let (p_lo_new, p_hi_new) = self.primary.source_ends(t_new);
        let (s_lo_old, s_hi_old) = self.secondary.map_or((0.0, 0.0), |op| op.source_ends(t_old));
        let (s_lo_new, s_hi_new) = self.secondary.map_or((0.0, 0.0), |op| op.source_ends(t_new));
        // Boundary terms of the predictor.
        let (p_lo, p_hi, s_lo, s_hi) = match kind {
            StepKind::Douglas => (
                0.5 * h * (p_lo_old + p_lo_new),
                0.5 * h * (p_hi_old + p_hi_new),
                h * s_lo_old,
                h * s_hi_old,
            ),
            StepKind::BackwardEuler => (h * p_lo_new, h * p_hi_new, h * s_lo_new, h * s_hi_new),
        };
        // Boundary terms of the second-axis correction.
        let (q_lo, q_hi) = match kind {
            StepKind::Douglas => (0.5 * h * (s_lo_new - s_lo_old), 0.5 * h * (s_hi_new - s_hi_old)),
            StepKind::BackwardEuler => (0.0, 0.0),
        };

        // Pass 1: right-hand side of the primary-axis solve and its forward
        // elimination, one row at a time.
        let scaled = &mut self.scaled;
        match self.secondary {
            Some(sec) if c2 != 0.0 => {
                let m = &sec.matrix;
                for k in 0..n2 {
                    scaled[k] = [c2 * m.sub[k], c2 * m.diag[k], c2 * m.sup[k]];
                }
            }
            _ => scaled.iter_mut().for_each(|v| *v = [0.0; 3]),
        }
        let zero = &self.zero_row[..];
        for j in 0..n1 {
            let wm = if j > 0 { &w[(j - 1) * n2..j * n2] } else { zero };
            let wp = if j + 1 < n1 { &w[(j + 1) * n2..(j + 2) * n2] } else { zero };
            let wj = &w[j * n2..(j + 1) * n2];
            let muj = mu.as_deref().map_or(zero, |mu| &mu[j * n2..(j + 1) * n2]);
            let (a, b, c) = (c1 * a1.sub[j], c1 * a1.diag[j], c1 * a1.sup[j]);
            let l = if j > 0 { self.lu_primary.lower[j] } else { 0.0 };
            let (head, tail) = self.rhs.split_at_mut(j * n2);
            let prev = if j > 0 { &head[(j - 1) * n2..] } else { zero };
            let out = &mut tail[..n2];
            let (wm, wp, wj, muj, prev, scaled) = (&wm[..n2], &wp[..n2], &wj[..n2], &muj[..n2], &prev[..n2], &scaled[..n2]);

            let row_value = |k: usize, left: f64, right: f64| {
                let [ss, sd, su] = scaled[k];
                wj[k] + (a * wm[k] + b * wj[k] + c * wp[k]) + (ss * left + sd * wj[k] + su * right) + h * muj[k]
                    - l * prev[k]
            };
            if n2 == 1 {
                out[0] = row_value(0, 0.0, 0.0);
            } else {
                out[0] = row_value(0, 0.0, wj[1]);
                for k in 1..n2 - 1 {
                    out[k] = row_value(k, wj[k - 1], wj[k + 1]);
                }
                out[n2 - 1] = row_value(n2 - 1, wj[n2 - 2], 0.0);
            }
            if self.secondary.is_some() {
                out[0] += s_lo;
                out[n2 - 1] += s_hi;
            }
            if j == 0 {
                out.iter_mut().for_each(|o| *o += p_lo);
            }
            if j + 1 == n1 {
                out.iter_mut().for_each(|o| *o += p_hi);
            }
        }

        let lu = &self.lu_primary;
        // Pass 3: back substitution in blocks of rows; each block then gets
        // its second-axis solves batched (interleaved so that the recurrences
        // of different rows run side by side) and its constraint update.
        let factors = match (mode, self.obstacle) {
            (ConstraintMode::Unconstrained, _) | (_, None) => None,
            (_, Some(obs)) => Some(obs.prepare(t_new)),
        };
        let mut mu = mu;
        let mut hi = n1;
        while hi > 0 {
            let lo = hi.saturating_sub(ROW_BLOCK);
            let rows = hi - lo;
            for j in (lo..hi).rev() {
                let ip = lu.inv_pivot[j];
                if j + 1 == n1 {
                    self.rhs[j * n2..].iter_mut().for_each(|v| *v *= ip);
                } else {
                    let u = lu.upper[j];
                    let (cur, next) = self.rhs[j * n2..(j + 2) * n2].split_at_mut(n2);
                    cur.iter_mut().zip(next.iter()).for_each(|(c, nx)| *c = (*c - u * nx) * ip);
                }
            }

            let block = &mut self.block;
            {
                let zero = &self.zero_row[..];
                let z1: [&[f64]; ROW_BLOCK] =
                    std::array::from_fn(|b| if b < rows { &self.rhs[(lo + b) * n2..(lo + b + 1) * n2] } else { zero });
                match (self.secondary, self.lu_secondary.as_ref()) {
                    (Some(sec), Some(lu2)) => {
                        let wr: [&[f64]; ROW_BLOCK] =
                            std::array::from_fn(|b| if b < rows { &w[(lo + b) * n2..(lo + b + 1) * n2] } else { zero });
                        fill_block(block, &z1, &wr, &sec.matrix, c3);
                        block[0].iter_mut().for_each(|v| *v += q_lo);
                        block[n2 - 1].iter_mut().for_each(|v| *v += q_hi);
                        solve_block(lu2, block);
                    }
                    _ => {
                        for (k, lane) in block.iter_mut().enumerate() {
                            *lane = std::array::from_fn(|b| z1[b][k]);
                        }
                    }
                }
            }

            for b in 0..rows {
                let j = lo + b;
                let block = &block[..n2];
                let bar = |k: usize| block[k][b];
                let wj = &mut w[j * n2..(j + 1) * n2];
                match (&factors, self.obstacle) {
                    (Some(f), Some(obs)) => {
                        obs.fill_row(f, j, &mut self.obstacle_row);
                        let psi = &self.obstacle_row[..n2];
                        match mu.as_deref_mut() {
                            Some(mu) if mode == ConstraintMode::IkonenToivanen => {
                                let muj = &mut mu[j * n2..(j + 1) * n2];
                                let wj = &mut wj[..n2];
                                let inv_h = 1.0 / h;
                                for k in 0..n2 {
                                    let (wb, m, p) = (bar(k), muj[k], psi[k]);
                                    wj[k] = (wb - h * m).max(p);
                                    muj[k] = (m + (p - wb) * inv_h).max(0.0);
                                }
                            }
                            _ => {
                                for k in 0..n2 {
                                    wj[k] = bar(k).max(psi[k]);
                                }
                            }
                        }
                    }
                    _ => {
                        for k in 0..n2 {
                            wj[k] = bar(k);
                        }
                    }
                }
            }
            hi = lo;
        }
        state.time = t_new;
    }
}

/// `block[k][b] = z1[b][k] + c3 (A w[b])[k]`.
fn fill_block(
    block: &mut [[f64; ROW_BLOCK]],
    z1: &[&[f64]; ROW_BLOCK],
    w: &[&[f64]; ROW_BLOCK],
    m: &crate::tridiag::Tridiagonal,
    c3: f64,
) {
    let n = block.len();
    if c3 == 0.0 || n == 1 {
        for (k, lane) in block.iter_mut().enumerate() {
            *lane = std::array::from_fn(|b| z1[b][k] + c3 * m.diag[k] * w[b][k]);
        }
        return;
    }
    let (d0, u0) = (c3 * m.diag[0], c3 * m.sup[0]);
    block[0] = std::array::from_fn(|b| z1[b][0] + d0 * w[b][0] + u0 * w[b][1]);
    for k in 1..n - 1 {
        let (s, d, u) = (c3 * m.sub[k], c3 * m.diag[k], c3 * m.sup[k]);
        block[k] = std::array::from_fn(|b| {
            let r = &w[b][k - 1..k + 2];
            z1[b][k] + (s * r[0] + d * r[1] + u * r[2])
        });
    }
    let (s, d) = (c3 * m.sub[n - 1], c3 * m.diag[n - 1]);
    block[n - 1] = std::array::from_fn(|b| z1[b][n - 1] + s * w[b][n - 2] + d * w[b][n - 1]);
}

/// Solves every lane of `block` with the same factorisation.
fn solve_block(lu: &TridiagonalLu, block: &mut [[f64; ROW_BLOCK]]) {
    let n = block.len();
    for k in 1..n {
        let (l, prev) = (lu.lower[k], block[k - 1]);
        block[k].iter_mut().zip(prev).for_each(|(v, p)| *v -= l * p);
    }
    let ip = lu.inv_pivot[n - 1];
    block[n - 1].iter_mut().for_each(|v| *v *= ip);
    for k in (0..n - 1).rev() {
        let (u, ip, next) = (lu.upper[k], lu.inv_pivot[k], block[k + 1]);
        block[k].iter_mut().zip(next).for_each(|(v, nx)| *v = (*v - u * nx) * ip);
    }
}

/// Runs `steps` uniform time steps to the problem's maturity with a damped
/// first step.
pub fn integrate(problem: &Problem<'_>, steps: usize, mode: ConstraintMode) -> Result<SolveState> {
    integrate_with(problem, steps, mode, true)
}

pub fn integrate_with(problem: &Problem<'_>, steps: usize, mode: ConstraintMode, damping: bool) -> Result<SolveState> {
    assert!(steps >= 1, "need at least one time step");
    let dt = problem.maturity / steps as f64;
    let mut stepper = Stepper::new(&problem.primary, problem.secondary.as_ref(), dt, problem.obstacle)?;
    let mut state = SolveState::new(problem.initial.clone(), mode);
    if damping {
        stepper.rannacher_start(&mut state, mode);
    } else {
        stepper.step(&mut state, mode);
    }
    for _ in 1..steps {
        stepper.step(&mut state, mode);
    }
    Ok(state)
}
