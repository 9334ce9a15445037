//! Fixed-point solver for the optimal phase-wise dividend barriers.
//!
//! Starting from zero, each sweep recomputes, for every phase `i`,
//!
//! * the barrier `b_i` as the grid argmax of
//!   `(c + Σ_{j≠i} λ_ij V_j(x)) / (λ_i + δ) - x` over the previous iterate,
//! * the phase value `V_i` from the boundary value at `b_i`, the exact
//!   exponential-kernel integral below it, and the slope-one extension above,
//!
//! and then refreshes the claim-state function
//! `V_{n+1}(x) = β e^{-βx} ∫₀ˣ e^{βy} Σ πᵢ Vᵢ(y) dy` from the *current*
//! phase functions. Iterates increase pointwise and the sweep stops when the
//! sup-norm change over all `n + 1` functions drops below the tolerance.
//!
//! Below a barrier the phase update is evaluated by a backward one-cell
//! recursion, `V(x) = e^{-a h} V(x+h) + (1/c)∫ₓ^{x+h} e^{-a(u-x)} w(u) du`,
//! which telescopes into the integral form exactly; each cell integral is in
//! closed form, so the grid never sees generic quadrature error.

use serde::Serialize;

use thiserror::Error;

use crate::phase_type::PhaseTypeModel;
use crate::valuefn::{
    exp_linear_cell, exp_shortfall, one_minus_exp_neg, Grid, ValueFnError, ValueFunction,
};

/// Pointwise slack for the monotone-iterate assertion.
const MONOTONE_TOL: f64 = 1e-12;

/// Regrowths of `x_max` attempted before giving up.
const MAX_REGROWTHS: usize = 3;

/// Premium, discounting, claim severity, and the driving environment chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    premium_rate: f64,
    discount_rate: f64,
    claim_rate: f64,
    env: PhaseTypeModel,
}

/// Rejected construction of a [`RiskModel`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} must be strictly positive, got {value}")]
pub struct RiskModelError {
    pub name: &'static str,
    pub value: f64,
}

impl RiskModel {
    /// `c`, `delta`, `beta` must all be strictly positive.
    pub fn new(
        premium_rate: f64,
        discount_rate: f64,
        claim_rate: f64,
        env: PhaseTypeModel,
    ) -> Result<Self, RiskModelError> {
        for (name, value) in [
            ("premium rate c", premium_rate),
            ("discount rate delta", discount_rate),
            ("claim rate beta", claim_rate),
        ] {
            if value <= 0.0 || !value.is_finite() {
                return Err(RiskModelError { name, value });
            }
        }
        Ok(Self {
            premium_rate,
            discount_rate,
            claim_rate,
            env,
        })
    }

    pub fn premium_rate(&self) -> f64 {
        self.premium_rate
    }

    pub fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    /// Rate β of the exponential claim sizes.
    pub fn claim_rate(&self) -> f64 {
        self.claim_rate
    }

    pub fn env(&self) -> &PhaseTypeModel {
        &self.env
    }

    /// λ_i + δ, the effective discount rate while sitting in phase `i`.
    pub fn leave_plus_discount(&self, i: usize) -> f64 {
        self.env.total_rate(i) + self.discount_rate
    }
}

/// Grid, stopping tolerance, iteration cap, and domain-regrowth factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub grid: Grid,
    /// Sup-norm stopping tolerance (money units).
    pub tol: f64,
    pub max_iters: usize,
    /// Factor applied to `x_max` when a barrier lands on the grid end.
    pub domain_growth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: Grid::from_spacing(30.0, 1e-3).expect("default grid"),
            tol: 1e-8,
            max_iters: 10_000,
            domain_growth: 1.5,
        }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<(), SolveError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolveError::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidInput(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.domain_growth.is_nan() || self.domain_growth <= 1.0 {
            return Err(SolveError::InvalidInput(format!(
                "domain growth factor must exceed 1, got {}",
                self.domain_growth
            )));
        }
        Ok(())
    }
}

/// Solver failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(
        "barrier for phase {} reached the grid end (x_max = {x_max}) after {regrowths} regrowth(s)",
        phase + 1
    )]
    DomainTooSmall {
        phase: usize,
        x_max: f64,
        regrowths: usize,
    },
    #[error("no convergence after {iterations} iterations; last sup-norm diff {final_sup_diff:e}")]
    MaxItersExceeded {
        iterations: usize,
        final_sup_diff: f64,
    },
    #[error(
        "iterate decreased by {drop:e} at function {}, x = {x}; exceeds the {MONOTONE_TOL:e} slack",
        index + 1
    )]
    MonotonicityViolated { index: usize, x: f64, drop: f64 },
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Value(#[from] ValueFnError),
}

/// Converged barriers, value functions, and iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Per-phase barriers after quadratic refinement of the grid argmax.
    pub barriers: Vec<f64>,
    /// Raw grid-located barriers (the tail anchors of `values`).
    pub grid_barriers: Vec<f64>,
    /// Per-phase value functions, tail-anchored at their grid barrier.
    pub values: Vec<ValueFunction>,
    /// Claim-state function `V_{n+1}`; grid-only, no tail.
    pub claim_value: ValueFunction,
    pub iterations: usize,
    pub final_sup_diff: f64,
    /// Grid barriers recorded at every iteration.
    pub barrier_history: Vec<Vec<f64>>,
    /// Most negative pointwise step `V⁽ᵏ⁾ - V⁽ᵏ⁻¹⁾` seen across the run;
    /// the monotone-iterate property holds when this is ≥ -1e-12.
    pub min_iterate_gap: f64,
}

impl SolveResult {
    /// Grid shared by every stored function.
    pub fn grid(&self) -> Grid {
        self.claim_value.grid()
    }

    /// Fault-injection hook for verification tests: bump one node of one
    /// phase function below its barrier, bypassing validation.
    pub fn inject_value_fault(&mut self, phase: usize, amount: f64) {
        let grid = self.grid();
        let anchor = grid.nearest_node(self.grid_barriers[phase]);
        let node = anchor / 2;
        let mut values = self.values[phase].values().to_vec();
        values[node] += amount;
        self.values[phase] =
            ValueFunction::from_parts_unchecked(grid, values, self.values[phase].tail_anchor());
    }
}

/// Weighted continuation `w_i(x) = Σ_{j≠i} λ_ij V_j(x) + t_i V_{n+1}(x)`
/// accumulated over grid nodes. `funcs` holds the `n` phase functions
/// followed by the claim-state function.
#[allow(clippy::needless_range_loop)]
pub(crate) fn coupling_into<S: AsRef<[f64]>>(
    model: &RiskModel,
    funcs: &[S],
    i: usize,
    out: &mut [f64],
) {
    let n = model.env().n();
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        if j == i {
            continue;
        }
        let rate = model.env().rate(i, j);
        if rate > 0.0 {
            for (o, v) in out.iter_mut().zip(funcs[j].as_ref()) {
                *o += rate * v;
            }
        }
    }
    let exit = model.env().exit_rate(i);
    if exit > 0.0 {
        for (o, v) in out.iter_mut().zip(funcs[n].as_ref()) {
            *o += exit * v;
        }
    }
}

/// Grid argmax of `(c + w(x))/(λ_i+δ) - x`; ties keep the smallest x.
fn grid_argmax(c: f64, lam_delta: f64, w: &[f64], grid: Grid) -> usize {
    let mut best_k = 0;
    let mut best = (c + w[0]) / lam_delta;
    for (k, &wk) in w.iter().enumerate().skip(1) {
        let candidate = (c + wk) / lam_delta - grid.point(k);
        if candidate > best {
            best = candidate;
            best_k = k;
        }
    }
    best_k
}

/// Fill one phase function from its barrier node and continuation `w`:
/// boundary value at the barrier, backward closed-form recursion below,
/// slope-one extension above.
fn fill_phase(c: f64, lam_delta: f64, w: &[f64], b_idx: usize, grid: Grid, out: &mut [f64]) {
    let h = grid.spacing();
    let a = lam_delta / c;
    let decay = (-a * h).exp();
    out[b_idx] = (c + w[b_idx]) / lam_delta;
    for k in (0..b_idx).rev() {
        let q = (w[k + 1] - w[k]) / h;
        let cell = exp_linear_cell(w[k], q, a, h);
        out[k] = decay * out[k + 1] + cell / c;
    }
    for k in (b_idx + 1)..out.len() {
        out[k] = out[b_idx] + (k - b_idx) as f64 * h;
    }
}

/// Fill the claim-state function `g(x) = β e^{-βx} ∫₀ˣ e^{βy} s(y) dy` for a
/// piecewise-linear restart mix `s`, by the exact forward recursion
/// `g(x+h) = e^{-βh} g(x) + s(x)·(1-e^{-βh}) + s'·(βh - 1 + e^{-βh})/β`.
fn fill_claim(beta: f64, grid: Grid, mix: &[f64], out: &mut [f64]) {
    let h = grid.spacing();
    let z = beta * h;
    let decay = (-z).exp();
    let e1 = one_minus_exp_neg(z);
    let e2 = exp_shortfall(z);
    out[0] = 0.0;
    for k in 0..grid.cells() {
        let q = (mix[k + 1] - mix[k]) / h;
        out[k + 1] = decay * out[k] + mix[k] * e1 + q * e2 / beta;
    }
}

fn check_funcs<'a>(
    model: &RiskModel,
    funcs: &'a [ValueFunction],
    expected: usize,
    what: &str,
) -> Result<(Grid, Vec<&'a [f64]>), SolveError> {
    if funcs.len() != expected {
        return Err(SolveError::InvalidInput(format!(
            "{what} needs {expected} functions for an {}-phase model, got {}",
            model.env().n(),
            funcs.len()
        )));
    }
    let grid = funcs[0].grid();
    for f in funcs {
        if f.grid() != grid {
            return Err(SolveError::InvalidInput(format!(
                "{what}: all functions must share one grid"
            )));
        }
    }
    Ok((grid, funcs.iter().map(|f| f.values()).collect()))
}

/// One barrier update: the grid point maximizing
/// `(c + Σ_{j≠i} λ_ij V_j(x))/(λ_i+δ) - x` over the previous iterate
/// (`prev` = n phase functions plus the claim-state function, in that order).
pub fn barrier_step(
    model: &RiskModel,
    prev: &[ValueFunction],
    i: usize,
) -> Result<f64, SolveError> {
    let n = model.env().n();
    let (grid, slices) = check_funcs(model, prev, n + 1, "barrier_step")?;
    let mut w = vec![0.0; grid.len()];
    coupling_into(model, &slices, i, &mut w);
    let b_idx = grid_argmax(model.premium_rate(), model.leave_plus_discount(i), &w, grid);
    if b_idx == grid.cells() {
        return Err(SolveError::DomainTooSmall {
            phase: i,
            x_max: grid.x_max(),
            regrowths: 0,
        });
    }
    Ok(grid.point(b_idx))
}

/// One phase value update at barrier `b` (snapped to the nearest grid node).
pub fn value_update(
    model: &RiskModel,
    prev: &[ValueFunction],
    i: usize,
    b: f64,
) -> Result<ValueFunction, SolveError> {
    let n = model.env().n();
    let (grid, slices) = check_funcs(model, prev, n + 1, "value_update")?;
    if b < 0.0 || !grid.contains(b) {
        return Err(SolveError::Value(ValueFnError::QueryBeyondDomain {
            x: b,
            x_max: grid.x_max(),
        }));
    }
    let b_idx = grid.nearest_node(b);
    let mut w = vec![0.0; grid.len()];
    coupling_into(model, &slices, i, &mut w);
    let mut out = vec![0.0; grid.len()];
    fill_phase(
        model.premium_rate(),
        model.leave_plus_discount(i),
        &w,
        b_idx,
        grid,
        &mut out,
    );
    Ok(ValueFunction::new(grid, out, Some(grid.point(b_idx)))?)
}

/// Claim-state update `V_{n+1}` from the current phase functions.
pub fn claim_value(
    model: &RiskModel,
    phases: &[ValueFunction],
) -> Result<ValueFunction, SolveError> {
    let n = model.env().n();
    let (grid, slices) = check_funcs(model, phases, n, "claim_value")?;
    let mut mix = vec![0.0; grid.len()];
    for (j, slice) in slices.iter().enumerate() {
        let p = model.env().restart_probs()[j];
        if p > 0.0 {
            for (o, v) in mix.iter_mut().zip(*slice) {
                *o += p * v;
            }
        }
    }
    let mut out = vec![0.0; grid.len()];
    fill_claim(model.claim_rate(), grid, &mix, &mut out);
    Ok(ValueFunction::new(grid, out, None)?)
}

/// Drift residual `c V_i'(x) + Σ_{j≠i} λ_ij V_j(x) - (λ_i+δ) V_i(x)` of a
/// converged result at the grid node nearest `x`. The derivative is a central
/// difference in the interior and one-sided at the grid ends.
pub fn hjb_residual(
    model: &RiskModel,
    result: &SolveResult,
    i: usize,
    x: f64,
) -> Result<f64, SolveError> {
    let grid = result.grid();
    if x < 0.0 || !grid.contains(x) {
        return Err(SolveError::Value(ValueFnError::QueryBeyondDomain {
            x,
            x_max: grid.x_max(),
        }));
    }
    let k = grid.nearest_node(x);
    let vi = result.values[i].values();
    let slope = crate::valuefn::grid_slope(vi, k, grid.spacing());
    let n = model.env().n();
    let mut acc = model.premium_rate() * slope - model.leave_plus_discount(i) * vi[k];
    for j in 0..n {
        if j != i {
            acc += model.env().rate(i, j) * result.values[j].values()[k];
        }
    }
    acc += model.env().exit_rate(i) * result.claim_value.values()[k];
    Ok(acc)
}

/// Run the barrier/value iteration to convergence.
///
/// Deterministic and single-threaded; given the same model and config the
/// result is bit-reproducible. If a barrier lands on the grid end, `x_max`
/// is multiplied by `domain_growth` (keeping the spacing) and the solve
/// restarts from zero, up to three times.
pub fn solve(model: &RiskModel, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    cfg.check()?;
    let mut grid = cfg.grid;
    let mut regrowths = 0usize;
    loop {
        match solve_on_grid(model, grid, cfg) {
            Err(SolveError::DomainTooSmall { phase, x_max, .. }) => {
                if regrowths >= MAX_REGROWTHS {
                    return Err(SolveError::DomainTooSmall {
                        phase,
                        x_max,
                        regrowths,
                    });
                }
                regrowths += 1;
                grid = Grid::from_spacing(grid.x_max() * cfg.domain_growth, cfg.grid.spacing())?;
            }
            other => return other,
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn solve_on_grid(
    model: &RiskModel,
    grid: Grid,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let n = model.env().n();
    let m = grid.cells();
    let c = model.premium_rate();

    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; m + 1]; n + 1];
    let mut next: Vec<Vec<f64>> = vec![vec![0.0; m + 1]; n + 1];
    let mut prev_anchors: Vec<Option<usize>> = vec![None; n];
    let mut anchors: Vec<usize> = vec![0; n];
    let mut w = vec![0.0; m + 1];
    let mut mix = vec![0.0; m + 1];
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut last_diff = f64::INFINITY;

    for iter in 1..=cfg.max_iters {
        for i in 0..n {
            coupling_into(model, &prev, i, &mut w);
            let lam_delta = model.leave_plus_discount(i);
            let b_idx = grid_argmax(c, lam_delta, &w, grid);
            if b_idx == m {
                return Err(SolveError::DomainTooSmall {
                    phase: i,
                    x_max: grid.x_max(),
                    regrowths: 0,
                });
            }
            anchors[i] = b_idx;
            fill_phase(c, lam_delta, &w, b_idx, grid, &mut next[i]);
        }

        mix.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let p = model.env().restart_probs()[i];
            if p > 0.0 {
                for (o, v) in mix.iter_mut().zip(&next[i]) {
                    *o += p * v;
                }
            }
        }
        fill_claim(model.claim_rate(), grid, &mix, &mut next[n]);

        let mut diff = 0.0f64;
        for f in 0..=n {
            for k in 0..=m {
                let step = next[f][k] - prev[f][k];
                if step < min_gap {
                    min_gap = step;
                }
                if step < -MONOTONE_TOL {
                    return Err(SolveError::MonotonicityViolated {
                        index: f,
                        x: grid.point(k),
                        drop: -step,
                    });
                }
                if step.abs() > diff {
                    diff = step.abs();
                }
            }
        }
        // Slope-one tails differ by a constant; fold that into the sup norm.
        for i in 0..n {
            if let Some(pa) = prev_anchors[i] {
                let tail_new = next[i][anchors[i]] - grid.point(anchors[i]);
                let tail_old = prev[i][pa] - grid.point(pa);
                diff = diff.max((tail_new - tail_old).abs());
            }
        }

        history.push(anchors.iter().map(|&k| grid.point(k)).collect());
        std::mem::swap(&mut prev, &mut next);
        for (dst, &src) in prev_anchors.iter_mut().zip(&anchors) {
            *dst = Some(src);
        }
        last_diff = diff;

        if iter > 1 && diff < cfg.tol {
            return Ok(build_result(
                model, grid, prev, anchors, iter, diff, history, min_gap,
            ));
        }
    }

    Err(SolveError::MaxItersExceeded {
        iterations: cfg.max_iters,
        final_sup_diff: last_diff,
    })
}

/// Quadratic refinement of a grid barrier: fit the update objective at the
/// argmax node and its neighbors and take the vertex, clamped to one cell.
fn refine_barrier(grid: Grid, c: f64, lam_delta: f64, w: &[f64], b_idx: usize) -> f64 {
    let b = grid.point(b_idx);
    if b_idx == 0 || b_idx >= grid.cells() {
        return b;
    }
    let psi = |k: usize| (c + w[k]) / lam_delta - grid.point(k);
    let (lo, mid, hi) = (psi(b_idx - 1), psi(b_idx), psi(b_idx + 1));
    let curvature = lo - 2.0 * mid + hi;
    if curvature >= 0.0 {
        return b;
    }
    let shift = 0.5 * (lo - hi) / curvature;
    b + shift.clamp(-1.0, 1.0) * grid.spacing()
}

#[allow(clippy::too_many_arguments)]
fn build_result(
    model: &RiskModel,
    grid: Grid,
    vals: Vec<Vec<f64>>,
    anchors: Vec<usize>,
    iterations: usize,
    final_sup_diff: f64,
    barrier_history: Vec<Vec<f64>>,
    min_iterate_gap: f64,
) -> SolveResult {
    let n = model.env().n();
    let mut w = vec![0.0; grid.len()];
    let mut barriers = Vec::with_capacity(n);
    for (i, &b_idx) in anchors.iter().enumerate() {
        coupling_into(model, &vals, i, &mut w);
        barriers.push(refine_barrier(
            grid,
            model.premium_rate(),
            model.leave_plus_discount(i),
            &w,
            b_idx,
        ));
    }
    let grid_barriers: Vec<f64> = anchors.iter().map(|&k| grid.point(k)).collect();

    let mut it = vals.into_iter();
    let values: Vec<ValueFunction> = (0..n)
        .map(|i| {
            ValueFunction::from_parts_unchecked(grid, it.next().unwrap(), Some(grid_barriers[i]))
        })
        .collect();
    let claim_value = ValueFunction::from_parts_unchecked(grid, it.next().unwrap(), None);

    SolveResult {
        barriers,
        grid_barriers,
        values,
        claim_value,
        iterations,
        final_sup_diff,
        barrier_history,
        min_iterate_gap,
    }
}

/// Serializable summary of a solve, used by the structured CLI output.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub barriers: Vec<f64>,
    pub grid_barriers: Vec<f64>,
    pub values_at_zero: Vec<f64>,
    pub iterations: usize,
    pub final_sup_diff: f64,
}

impl From<&SolveResult> for SolveSummary {
    fn from(r: &SolveResult) -> Self {
        Self {
            barriers: r.barriers.clone(),
            grid_barriers: r.grid_barriers.clone(),
            values_at_zero: r.values.iter().map(|v| v.values()[0]).collect(),
            iterations: r.iterations,
            final_sup_diff: r.final_sup_diff,
        }
    }
}
