//! Piecewise-linear value functions on a uniform grid.
//!
//! A [`ValueFunction`] stores node values on a uniform grid over `[0, x_max]`
//! and optionally carries a *tail anchor* `b`: beyond `b` the function is the
//! exact linear extension `f(b) + x - b` (slope one), evaluated analytically
//! rather than from node data.
//!
//! The module also provides the exponential-kernel quadrature
//! `∫ₓᵇ e^{-a(u-x)} f(u) du`, computed in closed form per grid cell (the
//! antiderivative of `e^{-a u}(p + q u)` is explicit), so the only
//! approximation anywhere is the piecewise-linear representation itself.
//!
//! Value functions are immutable after construction and every operation here
//! is pure, so instances can be shared and queried concurrently.

use thiserror::Error;

/// Errors from grid and value-function operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueFnError {
    /// A query landed outside `[0, x_max]` with no tail anchor to cover it.
    #[error("query at x = {x} is outside the domain [0, {x_max}]")]
    QueryBeyondDomain { x: f64, x_max: f64 },
    /// Two functions with different grids were combined.
    #[error("grid mismatch: {m_left}+1 points on [0, {x_max_left}] vs {m_right}+1 points on [0, {x_max_right}]")]
    GridMismatch {
        x_max_left: f64,
        m_left: usize,
        x_max_right: f64,
        m_right: usize,
    },
    /// Construction rejected the supplied grid or node values.
    #[error("invalid value function: {0}")]
    Invalid(String),
}

/// Uniform grid on `[0, x_max]` with `m` cells (`m + 1` nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_max: f64,
    m: usize,
}

/// Relative slack used when an off-grid query sits within rounding of the
/// domain end.
const END_SLACK: f64 = 1e-9;

impl Grid {
    /// Grid with `m` cells on `[0, x_max]`.
    pub fn new(x_max: f64, m: usize) -> Result<Self, ValueFnError> {
        if x_max <= 0.0 || !x_max.is_finite() {
            return Err(ValueFnError::Invalid(format!(
                "x_max must be positive and finite, got {x_max}"
            )));
        }
        if m == 0 {
            return Err(ValueFnError::Invalid("grid needs at least one cell".into()));
        }
        Ok(Self { x_max, m })
    }

    /// Grid with spacing as close to `h` as a whole number of cells allows.
    pub fn from_spacing(x_max: f64, h: f64) -> Result<Self, ValueFnError> {
        if h <= 0.0 || !h.is_finite() {
            return Err(ValueFnError::Invalid(format!(
                "spacing must be positive and finite, got {h}"
            )));
        }
        let m = (x_max / h).round().max(1.0);
        if m > 1e9 {
            return Err(ValueFnError::Invalid(format!(
                "grid would need {m} cells; refuse to allocate"
            )));
        }
        Self::new(x_max, m as usize)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.m
    }

    /// Number of nodes (`cells + 1`).
    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width.
    pub fn spacing(&self) -> f64 {
        self.x_max / self.m as f64
    }

    /// Coordinate of node `k`.
    pub fn point(&self, k: usize) -> f64 {
        debug_assert!(k <= self.m);
        k as f64 * self.spacing()
    }

    /// Last node coordinate (`point(m)`, equal to `x_max` up to rounding).
    pub fn end(&self) -> f64 {
        self.point(self.m)
    }

    /// True when `x` lies in `[0, end]` allowing `END_SLACK` rounding slack.
    pub fn contains(&self, x: f64) -> bool {
        let slack = END_SLACK * self.spacing();
        x >= -slack && x <= self.end() + slack
    }

    /// Index of the cell containing `x`, clamped to `[0, m-1]`.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = (x / self.spacing()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.m - 1)
        }
    }

    /// Index of the node nearest to `x`, clamped to `[0, m]`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let k = (x / self.spacing()).round();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.m)
        }
    }

    fn mismatch(&self, other: &Grid) -> ValueFnError {
        ValueFnError::GridMismatch {
            x_max_left: self.x_max,
            m_left: self.m,
            x_max_right: other.x_max,
            m_right: other.m,
        }
    }
}

/// `1 - e^{-z}` for `z >= 0`, accurate near zero.
pub(crate) fn one_minus_exp_neg(z: f64) -> f64 {
    -(-z).exp_m1()
}

/// `1 - e^{-z}(1 + z)` (the integral `∫₀ᶻ t e^{-t} dt`), accurate near zero.
pub(crate) fn exp_ramp_moment(z: f64) -> f64 {
    if z < 1e-2 {
        // Series: z²/2 - z³/3 + z⁴/8 - z⁵/30 + z⁶/144, truncation < 1e-16 here.
        let z2 = z * z;
        z2 * (0.5 - z / 3.0 + z2 / 8.0 - z2 * z / 30.0 + z2 * z2 / 144.0)
    } else {
        1.0 - (-z).exp() * (1.0 + z)
    }
}

/// `z - 1 + e^{-z}` (the integral `∫₀ᶻ (1 - e^{-t}) dt`), accurate near zero.
pub(crate) fn exp_shortfall(z: f64) -> f64 {
    if z < 1e-2 {
        let z2 = z * z;
        z2 * (0.5 - z / 6.0 + z2 / 24.0 - z2 * z / 120.0)
    } else {
        z - 1.0 + (-z).exp()
    }
}

/// `∫₀ᴴ e^{-a s}(p + q s) ds` in closed form.
pub(crate) fn exp_linear_cell(p: f64, q: f64, a: f64, len: f64) -> f64 {
    let z = a * len;
    (p * one_minus_exp_neg(z) + q * exp_ramp_moment(z) / a) / a
}

/// Finite-difference slope of node data at node `k`: central in the
/// interior, second-order one-sided at the grid ends.
pub(crate) fn grid_slope(values: &[f64], k: usize, h: f64) -> f64 {
    let m = values.len() - 1;
    if m < 2 {
        return (values[m] - values[0]) / (m as f64 * h);
    }
    if k == 0 {
        (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    } else if k == m {
        (3.0 * values[m] - 4.0 * values[m - 1] + values[m - 2]) / (2.0 * h)
    } else {
        (values[k + 1] - values[k - 1]) / (2.0 * h)
    }
}

/// Nonnegative, nondecreasing piecewise-linear function on a [`Grid`],
/// optionally extended past a tail anchor with exact slope one.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    grid: Grid,
    values: Vec<f64>,
    tail_anchor: Option<f64>,
}

/// Slack factor for the nondecreasing check: drops up to `1e-9 * h` are
/// attributed to rounding, anything larger is a hard error.
const MONOTONE_SLACK: f64 = 1e-9;

impl ValueFunction {
    /// Wrap node values, validating finiteness, nonnegativity, monotonicity
    /// (within `1e-9·h`), and consistency of any nodes past the tail anchor
    /// with the slope-one extension.
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        tail_anchor: Option<f64>,
    ) -> Result<Self, ValueFnError> {
        if values.len() != grid.len() {
            return Err(ValueFnError::Invalid(format!(
                "expected {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(ValueFnError::Invalid(format!(
                    "node {k} holds {v}; values must be finite and nonnegative"
                )));
            }
        }
        let slack = MONOTONE_SLACK * grid.spacing();
        for k in 0..grid.cells() {
            if values[k + 1] < values[k] - slack {
                return Err(ValueFnError::Invalid(format!(
                    "values decrease by {:e} between nodes {k} and {} (slack {slack:e})",
                    values[k] - values[k + 1],
                    k + 1
                )));
            }
        }
        if let Some(b) = tail_anchor {
            if !b.is_finite() || b < 0.0 || b > grid.end() + END_SLACK * grid.spacing() {
                return Err(ValueFnError::Invalid(format!(
                    "tail anchor {b} outside [0, {}]",
                    grid.x_max()
                )));
            }
            let f = Self {
                grid,
                values,
                tail_anchor: None,
            };
            let at_b = f.interp(b.min(grid.end()));
            for k in (grid.cell_of(b) + 1)..grid.len() {
                let expect = at_b + (grid.point(k) - b);
                let tol = 1e-9 * (1.0 + expect.abs());
                if (f.values[k] - expect).abs() > tol {
                    return Err(ValueFnError::Invalid(format!(
                        "node {k} holds {} but the slope-one tail from {b} requires {expect}",
                        f.values[k]
                    )));
                }
            }
            return Ok(Self {
                tail_anchor: Some(b),
                ..f
            });
        }
        Ok(Self {
            grid,
            values,
            tail_anchor,
        })
    }

    /// Zero function with no tail.
    pub fn zero(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            tail_anchor: None,
        }
    }

    /// Constructor that skips validation; for fault-injection hooks and the
    /// solver hot path where invariants hold by construction.
    pub(crate) fn from_parts_unchecked(
        grid: Grid,
        values: Vec<f64>,
        tail_anchor: Option<f64>,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid,
            values,
            tail_anchor,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_anchor(&self) -> Option<f64> {
        self.tail_anchor
    }

    /// Linear interpolation of the node data; `x` must lie in the grid span.
    fn interp(&self, x: f64) -> f64 {
        let k = self.grid.cell_of(x);
        let h = self.grid.spacing();
        let t = ((x - self.grid.point(k)) / h).clamp(0.0, 1.0);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// Evaluate at `x >= 0`: grid interpolation up to the tail anchor, the
    /// exact slope-one extension beyond it.
    pub fn eval(&self, x: f64) -> Result<f64, ValueFnError> {
        if x < 0.0 {
            return Err(ValueFnError::QueryBeyondDomain {
                x,
                x_max: self.grid.x_max(),
            });
        }
        if let Some(b) = self.tail_anchor {
            if x >= b {
                return Ok(self.interp(b.min(self.grid.end())) + (x - b));
            }
        }
        if !self.grid.contains(x) {
            return Err(ValueFnError::QueryBeyondDomain {
                x,
                x_max: self.grid.x_max(),
            });
        }
        Ok(self.interp(x.min(self.grid.end())))
    }

    /// `∫ₓᵇ e^{-a(u-x)} f(u) du`, exact for the piecewise-linear interpolant.
    ///
    /// Both endpoints may be off-grid; cells are integrated with the closed
    /// form for `e^{-a u}(p + q u)`, never by generic quadrature.
    pub fn exp_kernel_integral(&self, x: f64, b: f64, a: f64) -> Result<f64, ValueFnError> {
        assert!(a > 0.0, "kernel rate must be positive, got {a}");
        if x < 0.0 || !self.grid.contains(x) {
            return Err(ValueFnError::QueryBeyondDomain {
                x,
                x_max: self.grid.x_max(),
            });
        }
        if b < x || !self.grid.contains(b) {
            return Err(ValueFnError::QueryBeyondDomain {
                x: b,
                x_max: self.grid.x_max(),
            });
        }
        if b <= x {
            return Ok(0.0);
        }
        let h = self.grid.spacing();
        let first = self.grid.cell_of(x);
        let last = self.grid.cell_of(b);
        let mut total = 0.0;
        let mut decay = 1.0;
        let mut left = x;
        for k in first..=last {
            let right = if k == last {
                b
            } else {
                b.min(self.grid.point(k + 1))
            };
            let len = right - left;
            if len > 0.0 {
                let q = (self.values[k + 1] - self.values[k]) / h;
                let p = self.values[k] + q * (left - self.grid.point(k));
                total += decay * exp_linear_cell(p, q, a, len);
                decay *= (-a * len).exp();
            }
            left = right;
        }
        Ok(total)
    }

    /// Max over nodes of `|f - g|`, plus the difference of the tail constants
    /// `f(b_f) - b_f` vs `g(b_g) - b_g` when both functions carry a tail
    /// (slope-one tails differ by a constant). With at most one tail the
    /// comparison is over the grid alone.
    pub fn sup_norm_diff(&self, other: &ValueFunction) -> Result<f64, ValueFnError> {
        if self.grid != other.grid {
            return Err(self.grid.mismatch(&other.grid));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            worst = worst.max((a - b).abs());
        }
        if let (Some(bf), Some(bg)) = (self.tail_anchor, other.tail_anchor) {
            let cf = self.interp(bf.min(self.grid.end())) - bf;
            let cg = other.interp(bg.min(other.grid.end())) - bg;
            worst = worst.max((cf - cg).abs());
        }
        Ok(worst)
    }

    /// Max of the centered second difference `(f[k-1] - 2f[k] + f[k+1])/h²`
    /// over interior nodes with coordinate in `[lo, hi]`.
    ///
    /// Returns `-inf` when no interior node falls in the window.
    pub fn second_difference_max(&self, lo: f64, hi: f64) -> Result<f64, ValueFnError> {
        if lo < 0.0 || !self.grid.contains(lo) {
            return Err(ValueFnError::QueryBeyondDomain {
                x: lo,
                x_max: self.grid.x_max(),
            });
        }
        if hi < lo || !self.grid.contains(hi) {
            return Err(ValueFnError::QueryBeyondDomain {
                x: hi,
                x_max: self.grid.x_max(),
            });
        }
        let h = self.grid.spacing();
        let k_lo = ((lo / h - END_SLACK).ceil().max(1.0)) as usize;
        let k_hi = ((hi / h + END_SLACK).floor() as usize).min(self.grid.cells() - 1);
        let mut worst = f64::NEG_INFINITY;
        for k in k_lo..=k_hi {
            let dd = (self.values[k - 1] - 2.0 * self.values[k] + self.values[k + 1]) / (h * h);
            worst = worst.max(dd);
        }
        Ok(worst)
    }
}
