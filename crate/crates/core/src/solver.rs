//! Time integration of `u_t = u_xx + mu(x) u (1 - u)` on a uniform grid.
//!
//! Diffusion is implicit (backward Euler or Crank-Nicolson, one tridiagonal
//! solve per step) and the reaction is explicit with `mu` frozen at the grid
//! nodes. The left edge is a Dirichlet boundary (value [`Field::left_value`]),
//! the right edge is Dirichlet `0`. During [`Solver::run`] the window grows to
//! the right ahead of the front and the saturated region on the left is cut
//! off.
//!
//! Values are never clamped: anything outside `[-1e-10, 1 + 1e-10]` is a
//! [`Error::MaximumPrincipleViolation`].

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::GrowthRate;
use crate::special::ln_erfc;

/// Admissible overshoot of `[0, 1]` before a step is rejected.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-10;

/// Saturation tolerance for trimming the left region.
pub const TRIM_TOLERANCE: f64 = 1e-8;

/// Level at which the front is considered to have reached a position when
/// checking for domain overrun.
pub const OVERRUN_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImexBe,
    ImexCn,
}

/// Variable the solver evolves.
///
/// `Density` works on `u` directly. `Log` evolves `w = ln u` through
/// `w_t = w_xx + w_x^2 + mu (1 - e^w)`, which keeps tails far below the
/// smallest positive `f64` alive; observers still see `u = e^w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    #[default]
    Density,
    Log,
}

impl Scheme {
    /// Implicit weight of the diffusion operator.
    fn implicitness(self) -> f64 {
        match self {
            Scheme::ImexBe => 1.0,
            Scheme::ImexCn => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dx: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Distance kept between the rightmost `extension_threshold` crossing and
    /// the right boundary.
    pub right_margin: f64,
    pub extension_threshold: f64,
    /// Steps between bound checks and trace samples.
    pub bound_check_stride: usize,
    pub max_cells: usize,
    /// Replace the saturated left region by the Dirichlet boundary.
    pub trim_left: bool,
    pub representation: Representation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dx: 0.05,
            dt: 0.02,
            scheme: Scheme::ImexBe,
            right_margin: 20.0,
            extension_threshold: 1e-250,
            bound_check_stride: 25,
            max_cells: 20_000_000,
            trim_left: true,
            representation: Representation::Density,
        }
    }
}

impl SolverConfig {
    /// Checks the step-size constraints against the largest growth rate.
    pub fn validate(&self, mu_plus: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad(format!("dx must be positive, got {}", self.dx));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.dt * mu_plus > 0.5 {
            return bad(format!("dt * mu_plus = {} exceeds 1/2", self.dt * mu_plus));
        }
        if !(self.extension_threshold > 0.0 && self.extension_threshold < 1.0) {
            return bad("extension_threshold must lie in (0, 1)".into());
        }
        // the window is re-examined after every step
        let light_cone_step = 4.0 * mu_plus.sqrt() * self.dt;
        if !(self.right_margin >= light_cone_step) {
            return bad(format!(
                "right_margin {} below 4 sqrt(mu_plus) dt = {light_cone_step}",
                self.right_margin
            ));
        }
        if self.bound_check_stride == 0 {
            return bad("bound_check_stride must be at least 1".into());
        }
        if self.representation == Representation::Log && self.scheme != Scheme::ImexBe {
            return bad("the log representation only supports imex-be".into());
        }
        Ok(())
    }

    /// Steps needed to reach `t_end`.
    pub fn steps_for(&self, t_end: f64) -> usize {
        (t_end / self.dt).round().max(0.0) as usize
    }
}

/// Discrete solution `u(t, x_left + i dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub t: f64,
    pub x_left: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    /// Dirichlet value imposed just left of the window.
    pub left_value: f64,
}

impl Field {
    pub fn new(t: f64, x_left: f64, dx: f64, values: Vec<f64>, left_value: f64) -> Self {
        Self {
            t,
            x_left,
            dx,
            values,
            left_value,
        }
    }

    /// Nodes `x_left + i dx` for `i < count`, each holding the cell average
    /// of `height * 1_(lo, hi)` over `[x - dx/2, x + dx/2]`.
    pub fn cell_average_box(x_left: f64, dx: f64, count: usize, lo: f64, hi: f64, height: f64) -> Self {
        let values = (0..count)
            .map(|i| {
                let x = x_left + i as f64 * dx;
                let overlap = (hi.min(x + 0.5 * dx) - lo.max(x - 0.5 * dx)).max(0.0);
                height * (overlap / dx).min(1.0)
            })
            .collect();
        let left_value = if lo == f64::NEG_INFINITY { height } else { 0.0 };
        Self::new(0.0, x_left, dx, values, left_value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.dx
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.values.len().saturating_sub(1))
    }

    pub fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &u)| (self.x(i), u))
    }

    /// Linear interpolation of the nodal values, continued by the boundary
    /// values outside the window.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        let s = (x - self.x_left) / self.dx;
        if s < -1.0 {
            return self.left_value;
        }
        if s < 0.0 {
            return self.left_value + (self.values[0] - self.left_value) * (s + 1.0);
        }
        let i = s.floor() as usize;
        if i >= n {
            return 0.0;
        }
        let right = if i + 1 < n { self.values[i + 1] } else { 0.0 };
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + right * w
    }

    /// Index range of the nodes inside `[a, b]`.
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let n = self.values.len();
        let lo = ((a - self.x_left) / self.dx).ceil().max(0.0);
        let hi = ((b - self.x_left) / self.dx).floor() + 1.0;
        let lo = (lo as usize).min(n);
        let hi = if hi <= 0.0 { 0 } else { (hi as usize).min(n) };
        lo..hi.max(lo)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Binary restart image: `t, x_left, dx` as f64, `count` as u64, then the
    /// values; all little-endian.
    pub fn write_restart<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.x_left.to_le_bytes())?;
        w.write_all(&self.dx.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a restart image; the left boundary value is set to `1`.
    pub fn read_restart<R: Read>(mut r: R) -> io::Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let t = f64::from_le_bytes(next(&mut r)?);
        let x_left = f64::from_le_bytes(next(&mut r)?);
        let dx = f64::from_le_bytes(next(&mut r)?);
        let count = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self::new(t, x_left, dx, values, 1.0))
    }

    /// CSV rows `t,x,u`, keeping every `every`-th node.
    pub fn write_csv_rows<W: Write>(&self, mut w: W, every: usize) -> io::Result<()> {
        for (i, (x, u)) in self.positions().enumerate() {
            if i % every.max(1) == 0 {
                writeln!(w, "{},{},{}", self.t, x, u)?;
            }
        }
        Ok(())
    }
}

/// Indicator initial datum `1_(-inf, 0)` on `[a, b]`, cell-averaged.
pub fn init_field(config: &SolverConfig, a: f64, b: f64) -> Result<Field> {
    if !(a < 0.0 && 0.0 < b) {
        return Err(Error::InvalidParameter(format!(
            "domain [{a}, {b}] must contain 0 in its interior"
        )));
    }
    let cells = ((b - a) / config.dx).round() as usize + 1;
    if cells > config.max_cells {
        return Err(Error::GridError {
            cells,
            cap: config.max_cells,
        });
    }
    Ok(Field::cell_average_box(
        a,
        config.dx,
        cells,
        f64::NEG_INFINITY,
        0.0,
        1.0,
    ))
}

/// Read-only consumer of snapshots during [`Solver::run`].
pub trait Observer {
    /// Called every `stride()` steps, including step 0.
    fn stride(&self) -> usize {
        1
    }

    fn observe(&mut self, field: &Field) -> Result<()>;

    /// Asks [`Solver::run`] to stop after the current snapshot.
    fn finished(&self) -> bool {
        false
    }
}

/// Counters describing one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub extensions: usize,
    pub trims: usize,
    pub max_cells: usize,
    pub final_cells: usize,
}

/// LU factors of the constant-coefficient matrix `tridiag(-l, 1 + 2l, -l)`.
#[derive(Debug, Clone, Default)]
struct Factor {
    lambda: f64,
    inv_pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl Factor {
    fn build(lambda: f64, n: usize) -> Result<Self> {
        let diag = 1.0 + 2.0 * lambda;
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut prev_upper = 0.0;
        for row in 0..n {
            let pivot = diag + lambda * prev_upper;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::TridiagonalSingular { row });
            }
            let inv = 1.0 / pivot;
            prev_upper = -lambda * inv;
            inv_pivot.push(inv);
            upper.push(prev_upper);
        }
        Ok(Self {
            lambda,
            inv_pivot,
            upper,
        })
    }

    /// Overwrites `rhs` with the solution.
    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.inv_pivot.len());
        let l = self.lambda;
        let mut prev = 0.0;
        for (r, &inv) in rhs.iter_mut().zip(&self.inv_pivot) {
            prev = (*r + l * prev) * inv;
            *r = prev;
        }
        let mut next = 0.0;
        for (r, &up) in rhs.iter_mut().zip(&self.upper).rev() {
            next = *r - up * next;
            *r = next;
        }
    }
}

/// Stepping engine bound to one growth-rate landscape.
pub struct Solver<'m, M: GrowthRate + ?Sized> {
    config: SolverConfig,
    media: &'m M,
    mu: Vec<f64>,
    mu_x_left: f64,
    factor: Factor,
    scratch: Vec<f64>,
    stats: RunStats,
}

impl<'m, M: GrowthRate + ?Sized> Solver<'m, M> {
    pub fn new(config: SolverConfig, media: &'m M) -> Result<Self> {
        config.validate(media.mu_max())?;
        Ok(Self {
            config,
            media,
            mu: Vec::new(),
            mu_x_left: f64::NAN,
            factor: Factor::default(),
            scratch: Vec::new(),
            stats: RunStats::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    fn lambda(&self) -> f64 {
        self.config.scheme.implicitness() * self.config.dt / (self.config.dx * self.config.dx)
    }

    fn sync_caches(&mut self, field: &Field) -> Result<()> {
        let n = field.len();
        if self.mu.len() != n || self.mu_x_left != field.x_left {
            self.mu = (0..n).map(|i| self.media.mu(field.x(i))).collect();
            self.mu_x_left = field.x_left;
        }
        if self.factor.inv_pivot.len() != n {
            self.factor = Factor::build(self.lambda(), n)?;
        }
        Ok(())
    }

    /// Advances `field` by one time step.
    pub fn step(&mut self, field: &mut Field) -> Result<()> {
        if (field.dx - self.config.dx).abs() > 1e-15 * self.config.dx {
            return Err(Error::InvalidParameter(format!(
                "field spacing {} differs from solver dx {}",
                field.dx, self.config.dx
            )));
        }
        let n = field.len();
        if n == 0 {
            field.t += self.config.dt;
            return Ok(());
        }
        self.sync_caches(field)?;
        let dt = self.config.dt;
        let lam_full = dt / (self.config.dx * self.config.dx);
        let implicit = self.config.scheme.implicitness();
        let explicit_lam = (1.0 - implicit) * lam_full;
        let lam = implicit * lam_full;

        let u = &field.values;
        let rhs = &mut self.scratch;
        rhs.clear();
        rhs.extend(u.iter().zip(&self.mu).map(|(&v, &m)| v + dt * m * v * (1.0 - v)));
        if explicit_lam != 0.0 {
            for i in 0..n {
                let left = if i == 0 { field.left_value } else { u[i - 1] };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                rhs[i] += explicit_lam * (left - 2.0 * u[i] + right);
            }
        }
        rhs[0] += lam * field.left_value;
        self.factor.solve(rhs);
        std::mem::swap(&mut field.values, &mut self.scratch);
        field.t += dt;

        for (i, &v) in field.values.iter().enumerate() {
            if !(-MAX_PRINCIPLE_SLACK..=1.0 + MAX_PRINCIPLE_SLACK).contains(&v) {
                return Err(Error::MaximumPrincipleViolation {
                    t: field.t,
                    x: field.x(i),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Appends zero nodes when the rightmost threshold crossing comes
    /// within `right_margin` of the right edge.
    fn extend_right(&mut self, field: &mut Field) -> Result<()> {
        let threshold = self.config.extension_threshold;
        let crossing = match field.values.iter().rposition(|&v| v >= threshold) {
            Some(i) => field.x(i),
            None => return Ok(()),
        };
        if field.x_right() - crossing >= self.config.right_margin {
            return Ok(());
        }
        let target = crossing + 3.0 * self.config.right_margin;
        let extra = ((target - field.x_right()) / field.dx).ceil() as usize;
        let cells = field.len() + extra;
        if cells > self.config.max_cells {
            return Err(Error::GridError {
                cells,
                cap: self.config.max_cells,
            });
        }
        field.values.resize(cells, 0.0);
        self.stats.extensions += 1;
        Ok(())
    }

    /// Drops a saturated prefix once it is long enough to be worth it.
    fn trim_left(&mut self, field: &mut Field) {
        const KEEP: usize = 16;
        const MIN_CHUNK: usize = 4096;
        if !self.config.trim_left || field.left_value != 1.0 {
            return;
        }
        let saturated = field
            .values
            .iter()
            .position(|&v| (1.0 - v).abs() > TRIM_TOLERANCE)
            .unwrap_or(field.len());
        if saturated < KEEP + MIN_CHUNK || saturated == field.len() {
            return;
        }
        let cut = saturated - KEEP;
        field.values.drain(..cut);
        field.x_left += cut as f64 * field.dx;
        self.stats.trims += 1;
    }

    fn check_overrun(&self, field: &Field) -> Result<()> {
        let Some(end) = self.media.construction_end() else {
            return Ok(());
        };
        if field.x_right() < end {
            return Ok(());
        }
        let range = field.index_range(end, f64::INFINITY);
        if let Some(i) = range.clone().rev().find(|&i| field.values[i] >= OVERRUN_LEVEL) {
            return Err(Error::DomainOverrun {
                t: field.t,
                x: field.x(i),
                end,
            });
        }
        Ok(())
    }

    /// Integrates to `field.t + t_end`, calling each observer every
    /// `stride()` steps (step 0 included), keeping the window adapted.
    pub fn run(&mut self, field: &mut Field, t_end: f64, observers: &mut [&mut dyn Observer]) -> Result<RunStats> {
        if !(t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
        }
        let steps = self.config.steps_for(t_end);
        let t0 = field.t;
        self.stats = RunStats {
            max_cells: field.len(),
            ..RunStats::default()
        };
        self.extend_right(field)?;
        for k in 0..=steps {
            if k > 0 {
                self.step(field)?;
                field.t = t0 + k as f64 * self.config.dt;
                self.extend_right(field)?;
                if k % 64 == 0 {
                    self.trim_left(field);
                }
                self.stats.steps = k;
                self.stats.max_cells = self.stats.max_cells.max(field.len());
            }
            if k % self.config.bound_check_stride == 0 || k == steps {
                self.check_overrun(field)?;
            }
            for obs in observers.iter_mut() {
                if k % obs.stride().max(1) == 0 {
                    obs.observe(field)?;
                }
            }
            if observers.iter().any(|o| o.finished()) {
                break;
            }
        }
        self.stats.final_cells = field.len();
        Ok(self.stats.clone())
    }
}

/// One step of the same scheme without window management.
pub fn step<M: GrowthRate + ?Sized>(field: &Field, config: &SolverConfig, media: &M) -> Result<Field> {
    let mut solver = Solver::new(config.clone(), media)?;
    let mut next = field.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// One IMEX step on a periodic grid with nodal growth rates `mu`.
///
/// The cyclic system is reduced to two tridiagonal solves (Sherman-Morrison).
pub fn step_periodic(values: &mut [f64], mu: &[f64], dt: f64, dx: f64, scheme: Scheme) -> Result<()> {
    let n = values.len();
    if n < 3 || mu.len() != n {
        return Err(Error::InvalidParameter(
            "periodic step needs n >= 3 and matching mu".into(),
        ));
    }
    let lam_full = dt / (dx * dx);
    let implicit = scheme.implicitness();
    let lam = implicit * lam_full;
    let explicit_lam = (1.0 - implicit) * lam_full;
    let mut rhs: Vec<f64> = (0..n)
        .map(|i| {
            let v = values[i];
            let lap = values[(i + n - 1) % n] - 2.0 * v + values[(i + 1) % n];
            v + dt * mu[i] * v * (1.0 - v) + explicit_lam * lap
        })
        .collect();
    // A = B + u v^T with u = (g, 0, .., 0, -lam) and v = (1, 0, .., 0, -lam/g)
    let diag = 1.0 + 2.0 * lam;
    let g = -diag;
    let mut b_diag = vec![diag; n];
    b_diag[0] -= g;
    b_diag[n - 1] -= lam * lam / g;
    let solve = |d: &mut [f64]| -> Result<()> {
        // general Thomas with constant off-diagonals -lam
        let mut c_prime = vec![0.0; n];
        let mut prev_c = 0.0;
        let mut prev_d = 0.0;
        for i in 0..n {
            let pivot = b_diag[i] + lam * prev_c;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::TridiagonalSingular { row: i });
            }
            prev_c = -lam / pivot;
            prev_d = (d[i] + lam * prev_d) / pivot;
            c_prime[i] = prev_c;
            d[i] = prev_d;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c_prime[i] * d[i + 1];
        }
        Ok(())
    };
    let mut z = vec![0.0; n];
    z[0] = g;
    z[n - 1] = -lam;
    solve(&mut rhs)?;
    solve(&mut z)?;
    let v_dot = |y: &[f64]| y[0] - lam / g * y[n - 1];
    let factor = v_dot(&rhs) / (1.0 + v_dot(&z));
    for (v, (r, zz)) in values.iter_mut().zip(rhs.iter().zip(&z)) {
        *v = r - factor * zz;
    }
    Ok(())
}

/// Margin below the reachability floor at which log tails are dropped.
pub const LOG_FLOOR_MARGIN: f64 = 50.0;

/// `w = ln u` on a uniform grid; the left boundary is `u = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogField {
    pub t: f64,
    pub x_left: f64,
    pub dx: f64,
    pub w: Vec<f64>,
}

impl LogField {
    /// Indicator `1_(-inf, 0)` smoothed by the heat flow over `dx^2`, so the
    /// node at `0` holds `1/2` like the cell-averaged density datum.
    pub fn indicator(config: &SolverConfig, a: f64, b: f64) -> Result<Self> {
        let density = init_field(config, a, b)?;
        let scale = 2.0 * config.dx;
        let w = density
            .positions()
            .map(|(x, _)| ln_erfc(x / scale) - std::f64::consts::LN_2)
            .collect();
        Ok(Self {
            t: 0.0,
            x_left: a,
            dx: config.dx,
            w,
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.dx
    }

    pub fn x_right(&self) -> f64 {
        self.x(self.w.len().saturating_sub(1))
    }

    /// Writes `u = e^w` into `out`, reusing its allocation.
    pub fn density_into(&self, out: &mut Field) {
        out.t = self.t;
        out.x_left = self.x_left;
        out.dx = self.dx;
        out.left_value = 1.0;
        out.values.clear();
        out.values
            .extend(self.w.iter().map(|&w| if w < -746.0 { 0.0 } else { w.exp() }));
    }

    pub fn to_density(&self) -> Field {
        let mut out = Field::new(self.t, self.x_left, self.dx, Vec::new(), 1.0);
        self.density_into(&mut out);
        out
    }
}

/// Stepping engine for [`Representation::Log`].
///
/// Diffusion is backward Euler. The gradient term uses the Godunov upwind
/// value of `w_x^2`, linearised as `p^n p^{n+1}` so the system stays an
/// M-matrix. The reaction is explicit. The right edge extrapolates linearly
/// and sits where `w` can no longer climb to `0` before the end of the run.
pub struct LogSolver<'m, M: GrowthRate + ?Sized> {
    config: SolverConfig,
    media: &'m M,
    mu: Vec<f64>,
    mu_x_left: f64,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    stats: RunStats,
}

impl<'m, M: GrowthRate + ?Sized> LogSolver<'m, M> {
    pub fn new(config: SolverConfig, media: &'m M) -> Result<Self> {
        config.validate(media.mu_max())?;
        if config.representation != Representation::Log {
            return Err(Error::InvalidParameter("LogSolver needs representation = log".into()));
        }
        Ok(Self {
            config,
            media,
            mu: Vec::new(),
            mu_x_left: f64::NAN,
            upper: Vec::new(),
            rhs: Vec::new(),
            stats: RunStats::default(),
        })
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    fn sync_mu(&mut self, field: &LogField) {
        let n = field.len();
        if self.mu.len() == n && self.mu_x_left == field.x_left {
            return;
        }
        if self.mu_x_left == field.x_left && self.mu.len() < n {
            let start = self.mu.len();
            self.mu.extend((start..n).map(|i| self.media.mu(field.x(i))));
        } else {
            self.mu = (0..n).map(|i| self.media.mu(field.x(i))).collect();
        }
        self.mu_x_left = field.x_left;
    }

    /// Advances `field` by one time step.
    pub fn step(&mut self, field: &mut LogField) -> Result<()> {
        let n = field.len();
        if n < 2 {
            return Err(Error::InvalidParameter("log field needs at least two nodes".into()));
        }
        self.sync_mu(field);
        let dt = self.config.dt;
        let dx = field.dx;
        let lam = dt / (dx * dx);
        let inv_dx = 1.0 / dx;
        let dt_dx = dt / dx;
        let w = &field.w;
        // forward elimination fused with assembly: `upper` keeps the
        // eliminated super-diagonal and `rhs` the eliminated right side
        self.upper.resize(n, 0.0);
        self.rhs.resize(n, 0.0);
        let (mut c_prev, mut r_prev) = (0.0, 0.0);
        for i in 0..n {
            let wl = if i == 0 { 0.0 } else { w[i - 1] };
            let last = i + 1 == n;
            let wr = if last { 2.0 * w[i] - w[i - 1] } else { w[i + 1] };
            let back = ((w[i] - wl) * inv_dx).min(0.0);
            let ahead = ((wr - w[i]) * inv_dx).max(0.0);
            let growth = if w[i] < -40.0 { 1.0 } else { -w[i].exp_m1() };
            let mut r = w[i] + dt * self.mu[i] * growth;
            let (mut lo, mut d, mut up) = if last {
                (0.0, 1.0, 0.0)
            } else {
                (-lam, 1.0 + 2.0 * lam, -lam)
            };
            if back * back >= ahead * ahead {
                let k = dt_dx * back;
                d -= k;
                lo += k;
            } else if last {
                r += dt * ahead * ahead;
            } else {
                let k = dt_dx * ahead;
                d += k;
                up -= k;
            }
            // the boundary value w = 0 contributes nothing to the right side
            if i == 0 {
                lo = 0.0;
            }
            let pivot = d - lo * c_prev;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::TridiagonalSingular { row: i });
            }
            let inv = 1.0 / pivot;
            c_prev = up * inv;
            r_prev = (r - lo * r_prev) * inv;
            self.upper[i] = c_prev;
            self.rhs[i] = r_prev;
        }
        for i in (0..n - 1).rev() {
            self.rhs[i] -= self.upper[i] * self.rhs[i + 1];
        }
        std::mem::swap(&mut field.w, &mut self.rhs);
        field.t += dt;
        for (i, &v) in field.w.iter().enumerate() {
            if !(v <= MAX_PRINCIPLE_SLACK) {
                return Err(Error::MaximumPrincipleViolation {
                    t: field.t,
                    x: field.x(i),
                    value: v.exp(),
                });
            }
        }
        Ok(())
    }

    /// Keeps the right edge near the level `floor` below which a node
    /// cannot reach `u = 1` by the end of the run.
    fn adapt_right(&mut self, field: &mut LogField, floor: f64) -> Result<()> {
        const KEEP: usize = 16;
        let n = field.len();
        if field.w[n - 1] > floor {
            let extra = ((3.0 * self.config.right_margin) / field.dx).ceil() as usize;
            let cells = n + extra;
            if cells > self.config.max_cells {
                return Err(Error::GridError {
                    cells,
                    cap: self.config.max_cells,
                });
            }
            let slope = field.w[n - 1] - field.w[n - 2];
            let last = field.w[n - 1];
            field.w.extend((1..=extra).map(|k| last + k as f64 * slope));
            self.stats.extensions += 1;
            return Ok(());
        }
        let cut = floor - 2.0 * LOG_FLOOR_MARGIN;
        if let Some(i) = field.w.iter().rposition(|&v| v >= cut) {
            let keep = (i + 1 + KEEP).max(KEEP);
            if keep + 4096 < n {
                field.w.truncate(keep);
                self.stats.trims += 1;
            }
        }
        Ok(())
    }

    fn trim_left(&mut self, field: &mut LogField) {
        const KEEP: usize = 16;
        const MIN_CHUNK: usize = 4096;
        if !self.config.trim_left {
            return;
        }
        let saturated = field
            .w
            .iter()
            .position(|&v| v.abs() > TRIM_TOLERANCE)
            .unwrap_or(field.len());
        if saturated < KEEP + MIN_CHUNK || saturated + 2 >= field.len() {
            return;
        }
        let cut = saturated - KEEP;
        field.w.drain(..cut);
        field.x_left += cut as f64 * field.dx;
        self.stats.trims += 1;
    }

    fn check_overrun(&self, field: &LogField) -> Result<()> {
        let Some(end) = self.media.construction_end() else {
            return Ok(());
        };
        if field.x_right() < end {
            return Ok(());
        }
        let first = ((end - field.x_left) / field.dx).ceil().max(0.0) as usize;
        let level = OVERRUN_LEVEL.ln();
        if let Some(i) = (first..field.len()).rev().find(|&i| field.w[i] >= level) {
            return Err(Error::DomainOverrun {
                t: field.t,
                x: field.x(i),
                end,
            });
        }
        Ok(())
    }

    /// Same contract as [`Solver::run`]; observers receive `u = e^w`.
    pub fn run(&mut self, field: &mut LogField, t_end: f64, observers: &mut [&mut dyn Observer]) -> Result<RunStats> {
        if !(t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
        }
        let steps = self.config.steps_for(t_end);
        let t0 = field.t;
        let t_final = t0 + steps as f64 * self.config.dt;
        let mu_max = self.media.mu_max();
        let floor = |t: f64| -mu_max * (t_final - t) - LOG_FLOOR_MARGIN;
        self.stats = RunStats {
            max_cells: field.len(),
            ..RunStats::default()
        };
        let mut snapshot = Field::new(field.t, field.x_left, field.dx, Vec::new(), 1.0);
        self.adapt_right(field, floor(field.t))?;
        for k in 0..=steps {
            if k > 0 {
                self.step(field)?;
                field.t = t0 + k as f64 * self.config.dt;
                self.adapt_right(field, floor(field.t))?;
                if k % 64 == 0 {
                    self.trim_left(field);
                }
                self.stats.steps = k;
                self.stats.max_cells = self.stats.max_cells.max(field.len());
            }
            if k % self.config.bound_check_stride == 0 || k == steps {
                self.check_overrun(field)?;
            }
            let due = |o: &&mut dyn Observer| k % o.stride().max(1) == 0;
            if observers.iter().any(due) {
                field.density_into(&mut snapshot);
                for obs in observers.iter_mut() {
                    if k % obs.stride().max(1) == 0 {
                        obs.observe(&snapshot)?;
                    }
                }
            }
            if observers.iter().any(|o| o.finished()) {
                break;
            }
        }
        self.stats.final_cells = field.len();
        Ok(self.stats.clone())
    }
}

/// Integrates the indicator datum on `domain` for `t_end` time units with the
/// configured representation and returns the final density.
pub fn evolve<M: GrowthRate + ?Sized>(
    config: &SolverConfig,
    media: &M,
    domain: [f64; 2],
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<(Field, RunStats)> {
    match config.representation {
        Representation::Density => {
            let mut field = init_field(config, domain[0], domain[1])?;
            let stats = Solver::new(config.clone(), media)?.run(&mut field, t_end, observers)?;
            Ok((field, stats))
        }
        Representation::Log => {
            let mut field = LogField::indicator(config, domain[0], domain[1])?;
            let stats = LogSolver::new(config.clone(), media)?.run(&mut field, t_end, observers)?;
            Ok((field.to_density(), stats))
        }
    }
}
