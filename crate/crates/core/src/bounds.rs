//! Closed-form sub- and supersolutions, the constants that parametrize
//! them, and pointwise comparison of a run against each of them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Homogeneous, SequencePair};
use crate::solver::{Field, Observer, Representation, Solver, SolverConfig};
use crate::special::ln_erfc_diff;

/// The three members of the admissibility chain `0 < a < b < d` for `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonChain {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl EpsilonChain {
    pub fn holds(&self) -> bool {
        0.0 < self.a && self.a < self.b && self.b < self.d
    }
}

pub fn epsilon_chain(mu_minus: f64, mu_plus: f64, eps: f64) -> EpsilonChain {
    let gap = (mu_plus - mu_minus).sqrt();
    let cross = 2.0 * (mu_minus * (mu_plus - mu_minus)).sqrt();
    EpsilonChain {
        a: (2.0 * mu_plus - eps - 2.0 * mu_minus) / (2.0 * (mu_plus - 2.0 * eps) * gap),
        b: 2.0 * gap / (mu_plus + cross),
        d: 1.0 / (2.0 * mu_minus.sqrt()),
    }
}

fn check_regime(mu_minus: f64, mu_plus: f64) -> Result<()> {
    if !(mu_minus > 0.0 && mu_plus > 2.0 * mu_minus) {
        return Err(Error::RegimeError(format!(
            "need mu_plus > 2 mu_minus > 0, got mu_minus = {mu_minus}, mu_plus = {mu_plus}"
        )));
    }
    Ok(())
}

/// Largest `eps in (0, mu_minus)` satisfying the chain.
///
/// `a` is increasing in `eps` when `mu_plus > 2 mu_minus`, so the admissible
/// set is an interval starting at 0 and bisection applies.
pub fn epsilon_max(mu_minus: f64, mu_plus: f64) -> Result<f64> {
    check_regime(mu_minus, mu_plus)?;
    let ok = |e: f64| epsilon_chain(mu_minus, mu_plus, e).holds();
    let top = mu_minus * (1.0 - 1e-10);
    if ok(top) {
        return Ok(top);
    }
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > 1e-10 * hi.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 {
        Ok(lo)
    } else {
        Err(Error::RegimeError("the epsilon chain admits no positive value".into()))
    }
}

/// Smallest `R` with `pi^2 / (4 R^2) <= eps`, rounded up to one decimal.
pub fn radius_for(eps: f64) -> f64 {
    (10.0 * PI / (2.0 * eps.sqrt())).ceil() / 10.0
}

/// Limits of `I/t`: the lower bound of the limsup and the upper bound
/// `2(sqrt(mu_plus) - sqrt(mu_minus))`.
pub fn theorem_rates(mu_minus: f64, mu_plus: f64) -> (f64, f64) {
    let lower = mu_plus / (mu_plus - mu_minus).sqrt() - 2.0 * mu_minus.sqrt();
    let upper = 2.0 * (mu_plus.sqrt() - mu_minus.sqrt());
    (lower, upper)
}

/// The `eps`-dependent lower rate that the finite-`eps` argument delivers.
pub fn eps_rate(mu_minus: f64, mu_plus: f64, eps: f64) -> f64 {
    2.0 * (mu_plus - 2.0 * eps) * (mu_plus - mu_minus).sqrt() / (2.0 * mu_plus - eps - 2.0 * mu_minus)
        - 2.0 * mu_minus.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub eps: f64,
    pub eps0: f64,
    pub r: f64,
    /// `Gamma = eps / mu_plus`.
    pub gamma_cap: f64,
    pub gamma: f64,
    pub ell: f64,
    pub theta: f64,
    pub t_cal: f64,
    pub c_harnack: f64,
}

/// Floor applied to the measured Harnack constant.
pub const HARNACK_FLOOR: f64 = 1e-3;

impl BoundParams {
    /// Defaults: `eps = eps0 / 2`, `gamma = Gamma / 2`, uncalibrated
    /// `theta = 1` and `C` at its floor.
    pub fn new(mu_minus: f64, mu_plus: f64) -> Result<Self> {
        let eps0 = epsilon_max(mu_minus, mu_plus)?;
        let mut p = Self {
            mu_minus,
            mu_plus,
            eps: 0.0,
            eps0,
            r: 0.0,
            gamma_cap: 0.0,
            gamma: 0.0,
            ell: 0.0,
            theta: 1.0,
            t_cal: 0.0,
            c_harnack: HARNACK_FLOOR,
        };
        p.set_eps(eps0 / 2.0)?;
        Ok(p)
    }

    fn set_eps(&mut self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps <= self.eps0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} outside (0, eps0 = {}]",
                self.eps0
            )));
        }
        self.eps = eps;
        self.r = radius_for(eps);
        self.gamma_cap = eps / self.mu_plus;
        self.set_gamma(self.gamma_cap / 2.0)
    }

    fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma <= self.gamma_cap) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} outside (0, Gamma = {}]",
                self.gamma_cap
            )));
        }
        self.gamma = gamma;
        self.ell = 1.25 * (-gamma.ln() / self.mu_minus.sqrt());
        Ok(())
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        self.set_eps(eps)?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.set_gamma(gamma)?;
        Ok(self)
    }

    pub fn with_calibration(mut self, t_cal: f64) -> Self {
        self.t_cal = t_cal;
        self.theta = (-self.mu_minus * t_cal).exp();
        self
    }

    pub fn with_harnack(mut self, c: f64) -> Self {
        self.c_harnack = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("bound parameters: {what}")));
        if !(0.0 < self.eps && self.eps <= self.eps0 && self.eps0 < self.mu_minus) {
            return bad("need 0 < eps <= eps0 < mu_minus");
        }
        if PI * PI / (4.0 * self.r * self.r) > self.eps {
            return bad("need pi^2/(4 R^2) <= eps");
        }
        if (self.gamma_cap - self.eps / self.mu_plus).abs() > 1e-15 {
            return bad("need Gamma = eps / mu_plus");
        }
        if !(0.0 < self.gamma && self.gamma <= self.gamma_cap) {
            return bad("need gamma in (0, Gamma]");
        }
        if !(self.ell > -self.gamma.ln() / self.mu_minus.sqrt()) {
            return bad("need ell > -ln(gamma)/sqrt(mu_minus)");
        }
        if !(0.0 < self.theta && self.theta < 1.0) {
            return bad("need theta in (0, 1)");
        }
        if !(0.0 < self.c_harnack && self.c_harnack < 1.0) {
            return bad("need C in (0, 1)");
        }
        if !epsilon_chain(self.mu_minus, self.mu_plus, self.eps).holds() {
            return bad("epsilon chain fails");
        }
        Ok(())
    }

    /// Speed `2 sqrt(mu_minus - eps)` bounding the Gaussian estimate's region.
    pub fn probe_speed(&self) -> f64 {
        2.0 * (self.mu_minus - self.eps).sqrt()
    }
}

/// `min(exp(2 mu_plus t - sqrt(mu_plus) x), 1)`.
pub fn exp_upper_bound(mu_plus: f64, t: f64, x: f64) -> f64 {
    let e = 2.0 * mu_plus * t - mu_plus.sqrt() * x;
    if e >= 0.0 {
        1.0
    } else {
        e.exp()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(())
}

/// Heat kernel mass of `(-1, 0)` seen from `x` after time `t`.
pub fn heat_band_integral(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    let s = 2.0 * t.sqrt();
    let (a, b) = (x / s, (x + 1.0) / s);
    let v = if a >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else if b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    };
    Ok(0.5 * v)
}

/// `ln` of [`heat_band_integral`], finite far into the tails.
pub fn ln_heat_band_integral(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    let s = 2.0 * t.sqrt();
    Ok(-std::f64::consts::LN_2 + ln_erfc_diff(x / s, (x + 1.0) / s))
}

/// `theta gamma exp((mu_minus - eps) t) * heat_band_integral(t, x)` on
/// `x >= 2 sqrt(mu_minus - eps) t`.
pub fn gaussian_lower_bound(params: &BoundParams, t: f64, x: f64) -> Result<f64> {
    let edge = params.probe_speed() * t;
    if !(t > 0.0) || x < edge {
        return Err(Error::OutsideValidity {
            t,
            x,
            reason: format!("need t > 0 and x >= {edge}"),
        });
    }
    let ln_amplitude = params.theta.ln() + params.gamma.ln() + (params.mu_minus - params.eps) * t;
    // for x >= 0 the band integral is at most the kernel at z = 0
    if ln_amplitude - x * x / (4.0 * t) - 0.5 * (4.0 * PI * t).ln() < -746.0 {
        return Ok(0.0);
    }
    Ok((ln_amplitude + ln_heat_band_integral(t, x)?).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub t_cal: f64,
    pub theta: f64,
}

struct CalibrationProbe {
    speed: f64,
    level: f64,
    hold: f64,
    since: Option<f64>,
    done: bool,
}

impl Observer for CalibrationProbe {
    fn observe(&mut self, field: &Field) -> Result<()> {
        let v = field.value_at(self.speed * field.t);
        if v >= self.level {
            let since = *self.since.get_or_insert(field.t);
            self.done = field.t - since >= self.hold;
        } else {
            self.since = None;
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.done
    }
}

/// Finds `T` with `V(t, 2 sqrt(mu_minus - eps) t) >= Gamma` on `[T, T + hold]`
/// for the homogeneous solution started from `Gamma 1_(-1, 0)`.
pub fn calibrate_theta(
    eps: f64,
    gamma_cap: f64,
    mu_minus: f64,
    config: &SolverConfig,
    hold: f64,
    budget: f64,
) -> Result<Calibration> {
    if !(0.0 < eps && eps < mu_minus) {
        return Err(Error::InvalidParameter(format!("need 0 < eps < mu_minus, got {eps}")));
    }
    if !(0.0 < gamma_cap && gamma_cap < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < Gamma < 1, got {gamma_cap}")));
    }
    let media = Homogeneous::new(mu_minus);
    let left = -60.0;
    let cells = ((40.0 - left) / config.dx).round() as usize + 1;
    let mut field = Field::cell_average_box(left, config.dx, cells, -1.0, 0.0, gamma_cap);
    let mut probe = CalibrationProbe {
        speed: 2.0 * (mu_minus - eps).sqrt(),
        level: gamma_cap,
        hold,
        since: None,
        done: false,
    };
    let config = SolverConfig {
        representation: Representation::Density,
        ..config.clone()
    };
    Solver::new(config, &media)?.run(&mut field, budget + hold, &mut [&mut probe])?;
    match (probe.done, probe.since) {
        (true, Some(t_cal)) => Ok(Calibration {
            t_cal,
            theta: (-mu_minus * t_cal).exp(),
        }),
        _ => Err(Error::CalibrationTimeout { budget }),
    }
}

fn outside(t: f64, x: f64, reason: String) -> Error {
    Error::OutsideValidity { t, x, reason }
}

/// Block `n` read off the sequences: `(y_n, x_{n+1})`.
fn slow_block(n: usize, seq: &SequencePair) -> Result<(f64, f64)> {
    if n + 1 >= seq.len() {
        return Err(Error::InvalidParameter(format!(
            "index {n} needs x_(n+1), but only {} pairs exist",
            seq.len()
        )));
    }
    Ok((seq.ys()[n], seq.xs()[n + 1]))
}

pub fn s_n(n: usize, seq: &SequencePair, mu_plus: f64) -> f64 {
    seq.ys()[n] / (2.0 * mu_plus.sqrt())
}

/// Supersolution on `[s_n, inf) x [y_n, x_(n+1)]`.
pub fn supersolution_vbar(n: usize, seq: &SequencePair, mu_minus: f64, mu_plus: f64, t: f64, x: f64) -> Result<f64> {
    let (y, x1) = slow_block(n, seq)?;
    let s = s_n(n, seq, mu_plus);
    if t < s || x < y || x > x1 {
        return Err(outside(t, x, format!("need t >= {s} and {y} <= x <= {x1}")));
    }
    let k = (mu_plus - mu_minus).sqrt();
    let first = 2.0 * mu_minus * (t - s) - mu_minus.sqrt() * (x - y);
    let second = std::f64::consts::LN_2 + mu_plus * (t - s) + k * (x - x1) - k * (x1 - y);
    Ok(first.exp() + second.exp())
}

/// Supersolution on `[s_n, inf) x [y_n, inf)`, constant in `x` past `x_(n+1)`.
pub fn supersolution_ubar(n: usize, seq: &SequencePair, mu_minus: f64, mu_plus: f64, t: f64, x: f64) -> Result<f64> {
    let (y, x1) = slow_block(n, seq)?;
    let s = s_n(n, seq, mu_plus);
    if t < s || x < y {
        return Err(outside(t, x, format!("need t >= {s} and x >= {y}")));
    }
    let k = (mu_plus - mu_minus).sqrt();
    let growth = mu_plus * (t - s);
    if x < x1 {
        Ok((growth - k * (x - y)).exp() + (growth + k * (x - x1) - k * (x1 - y)).exp())
    } else {
        Ok((std::f64::consts::LN_2 + growth - k * (x1 - y)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSchedule {
    pub n: usize,
    pub gap: f64,
    pub s_n: f64,
    pub tau_prime: f64,
    pub ln_alpha: f64,
    pub alpha: f64,
    pub tau_dprime: f64,
    pub tau: f64,
    /// Leading-order prediction of `tau` for comparison.
    pub tau_asymptotic: f64,
    /// Left end `x_(n+1) + 1` of the bump support.
    pub support_left: f64,
}

impl BumpSchedule {
    pub fn center(&self, r: f64) -> f64 {
        self.support_left + r
    }
}

pub fn tau_prime(gap: f64, r: f64, mu_minus: f64, mu_plus: f64) -> f64 {
    (gap + 2.0 * r + 2.0) / (2.0 * (mu_plus - mu_minus).sqrt())
}

/// Growth-time schedule of the bump in the fast plateau right of `x_(n+1)`.
pub fn bump_schedule(n: usize, seq: &SequencePair, params: &BoundParams) -> Result<BumpSchedule> {
    let (y, x1) = slow_block(n, seq)?;
    let p = params;
    let gap = x1 - y;
    let tp = tau_prime(gap, p.r, p.mu_minus, p.mu_plus);
    let reach = 2.0 * (p.mu_minus - p.eps).sqrt() * tp;
    if gap < reach {
        return Err(Error::GateFailed {
            n,
            reason: format!("x_(n+1) - y_n = {gap} < 2 sqrt(mu_minus - eps) tau' = {reach}"),
        });
    }
    let support_right = x1 + 2.0 * p.r + 1.0;
    if let Some(&y1) = seq.ys().get(n + 1) {
        if support_right > y1 - 1.0 {
            return Err(Error::GateFailed {
                n,
                reason: format!(
                    "bump support ends at {support_right}, past the fast plateau end {}",
                    y1 - 1.0
                ),
            });
        }
    }
    let width = gap + 2.0 * p.r + 2.0;
    let ln_alpha = (p.theta * p.c_harnack * p.gamma).ln() + (p.mu_minus - p.eps) * tp
        - width * width / (4.0 * tp)
        - 0.5 * (4.0 * PI * tp).ln();
    let ln_gamma = p.gamma.ln();
    if ln_alpha >= ln_gamma {
        return Err(Error::AlphaTooLarge { n, ln_alpha, ln_gamma });
    }
    let rate = p.mu_plus - 2.0 * p.eps;
    let tau_dprime = (ln_gamma - ln_alpha) / rate;
    let coefficient = (2.0 * p.mu_plus - p.eps - 2.0 * p.mu_minus) / (2.0 * rate * (p.mu_plus - p.mu_minus).sqrt());
    Ok(BumpSchedule {
        n,
        gap,
        s_n: s_n(n, seq, p.mu_plus),
        tau_prime: tp,
        ln_alpha,
        alpha: ln_alpha.exp(),
        tau_dprime,
        tau: 1.0 + tp + tau_dprime,
        tau_asymptotic: coefficient * gap,
        support_left: x1 + 1.0,
    })
}

/// Bump `alpha cos(pi (x - center) / (2R)) exp((mu_plus - 2 eps) t)` on its
/// own clock, which starts at `t_(n,gamma) + 1 + tau'`.
pub fn bump_subsolution(schedule: &BumpSchedule, params: &BoundParams, t: f64, x: f64) -> Result<f64> {
    let r = params.r;
    let (a, b) = (schedule.support_left, schedule.support_left + 2.0 * r);
    if !(0.0..=schedule.tau_dprime).contains(&t) || x < a || x > b {
        return Err(outside(
            t,
            x,
            format!("need 0 <= t <= {} and {a} <= x <= {b}", schedule.tau_dprime),
        ));
    }
    let phase = (PI * (x - schedule.center(r)) / (2.0 * r)).cos().max(0.0);
    Ok((schedule.ln_alpha + (params.mu_plus - 2.0 * params.eps) * t).exp() * phase)
}

/// Window on which `X-(t) <= ell + y_n + 2 sqrt(mu_minus)(t - s_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XMinusWindow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub m: f64,
    /// Both largeness conditions hold at this index.
    pub valid: bool,
    pub y_n: f64,
    pub s_n: f64,
    pub ell: f64,
    pub slope: f64,
}

impl XMinusWindow {
    pub fn line(&self, t: f64) -> f64 {
        self.ell + self.y_n + self.slope * (t - self.s_n)
    }
}

pub fn constant_m(params: &BoundParams) -> Result<f64> {
    let p = params;
    let floor = (-p.ell * p.mu_minus.sqrt()).exp();
    if p.gamma <= floor {
        return Err(Error::DomainError(format!(
            "gamma = {} <= exp(-ell sqrt(mu_minus)) = {floor}",
            p.gamma
        )));
    }
    let denominator = p.mu_plus + 2.0 * (p.mu_minus * (p.mu_plus - p.mu_minus)).sqrt();
    Ok(((p.gamma - floor).ln() - std::f64::consts::LN_2 - p.ell * (p.mu_plus - p.mu_minus).sqrt()) / denominator)
}

pub fn xminus_window(n: usize, seq: &SequencePair, params: &BoundParams) -> Result<XMinusWindow> {
    let (y, x1) = slow_block(n, seq)?;
    let p = params;
    let m = constant_m(p)?;
    let gap = x1 - y;
    let cross = (p.mu_minus * (p.mu_plus - p.mu_minus)).sqrt();
    let denominator = p.mu_plus + 2.0 * cross;
    let reach = 2.0 * (p.mu_plus - p.mu_minus).sqrt() / denominator * gap;
    let first = p.ell + 2.0 * m * p.mu_minus.sqrt() + 4.0 * cross / denominator * gap < gap;
    let second = m + reach >= 0.0;
    let s = s_n(n, seq, p.mu_plus);
    Ok(XMinusWindow {
        t_lo: s,
        t_hi: s + m + reach,
        m,
        valid: first && second,
        y_n: y,
        s_n: s,
        ell: p.ell,
        slope: 2.0 * p.mu_minus.sqrt(),
    })
}

/// `1 + R - ell + gap - 2 sqrt(mu_minus)(t + tau - s)`: the lower bound of
/// `I_gamma(t + tau)` for crossing time `t`.
pub fn width_line(params: &BoundParams, schedule: &BumpSchedule, t_cross: f64) -> f64 {
    1.0 + params.r - params.ell + schedule.gap - 2.0 * params.mu_minus.sqrt() * (t_cross + schedule.tau - schedule.s_n)
}

/// Space-time rectangle of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// A bound together with everything needed to evaluate it at `(t, x)` of
/// the run's clock.
#[derive(Debug, Clone)]
pub enum Bound {
    ExpUpper {
        mu_plus: f64,
    },
    GaussianLower {
        params: BoundParams,
    },
    Vbar {
        n: usize,
        seq: SequencePair,
        mu_minus: f64,
        mu_plus: f64,
    },
    Ubar {
        n: usize,
        seq: SequencePair,
        mu_minus: f64,
        mu_plus: f64,
    },
    /// `start` is the run time at which the bump's own clock reads 0.
    Bump {
        schedule: BumpSchedule,
        params: BoundParams,
        start: f64,
    },
}

impl Bound {
    pub fn name(&self) -> &'static str {
        match self {
            Bound::ExpUpper { .. } => "exp-upper",
            Bound::GaussianLower { .. } => "gaussian-lower",
            Bound::Vbar { .. } => "vbar",
            Bound::Ubar { .. } => "ubar",
            Bound::Bump { .. } => "bump",
        }
    }

    pub fn is_upper(&self) -> bool {
        matches!(self, Bound::ExpUpper { .. } | Bound::Vbar { .. } | Bound::Ubar { .. })
    }

    /// `None` outside the bound's validity region.
    pub fn evaluate(&self, t: f64, x: f64) -> Option<f64> {
        match self {
            Bound::ExpUpper { mu_plus } => Some(exp_upper_bound(*mu_plus, t, x)),
            Bound::GaussianLower { params } => gaussian_lower_bound(params, t, x).ok(),
            Bound::Vbar {
                n,
                seq,
                mu_minus,
                mu_plus,
            } => supersolution_vbar(*n, seq, *mu_minus, *mu_plus, t, x).ok(),
            Bound::Ubar {
                n,
                seq,
                mu_minus,
                mu_plus,
            } => supersolution_ubar(*n, seq, *mu_minus, *mu_plus, t, x).ok(),
            Bound::Bump {
                schedule,
                params,
                start,
            } => bump_subsolution(schedule, params, t - start, x).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound: String,
    pub region: Region,
    pub points_checked: u64,
    pub violations: u64,
    /// Largest `u - bound` (upper) or `bound - u` (lower) seen.
    pub max_excess: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Observer comparing snapshots against a bound inside a region.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub bound: Bound,
    pub region: Region,
    pub tolerance: f64,
    stride: usize,
    report: BoundReport,
}

impl BoundCheck {
    pub fn new(bound: Bound, region: Region, tolerance: f64, stride: usize) -> Self {
        let report = BoundReport {
            bound: bound.name().to_string(),
            region,
            points_checked: 0,
            violations: 0,
            max_excess: f64::NEG_INFINITY,
            worst_t: f64::NAN,
            worst_x: f64::NAN,
            tolerance,
        };
        Self {
            bound,
            region,
            tolerance,
            stride: stride.max(1),
            report,
        }
    }

    pub fn report(&self) -> BoundReport {
        let mut r = self.report.clone();
        if r.points_checked == 0 {
            r.max_excess = 0.0;
            r.worst_t = 0.0;
            r.worst_x = 0.0;
        }
        r
    }
}

impl Observer for BoundCheck {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, field: &Field) -> Result<()> {
        check_bound(field, &self.bound, &self.region, self.tolerance, &mut self.report);
        Ok(())
    }
}

/// Compares one snapshot against `bound` at every node of `region`,
/// accumulating into `report`.
pub fn check_bound(field: &Field, bound: &Bound, region: &Region, tolerance: f64, report: &mut BoundReport) {
    let t = field.t;
    if t < region.t_lo || t > region.t_hi {
        return;
    }
    let upper = bound.is_upper();
    for i in field.index_range(region.x_lo, region.x_hi) {
        let x = field.x(i);
        let Some(b) = bound.evaluate(t, x) else {
            continue;
        };
        let u = field.values[i];
        let excess = if upper { u - b } else { b - u };
        report.points_checked += 1;
        if excess > tolerance {
            report.violations += 1;
        }
        if excess > report.max_excess {
            report.max_excess = excess;
            report.worst_t = t;
            report.worst_x = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::GeneratorTag;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn epsilon_max_for_one_four() {
        let e = epsilon_max(1.0, 4.0).unwrap();
        // scalar root of (6 - e)(4 + 2 sqrt 3) = 48 - 24 e
        let k = 4.0 + 2.0 * 3f64.sqrt();
        let root = (48.0 - 6.0 * k) / (24.0 - k);
        assert!(close(e, root, 1e-9), "{e} vs {root}");
        assert!(close(e, 0.19446, 2e-5));
        assert!(epsilon_chain(1.0, 4.0, e).holds());
        assert!(!epsilon_chain(1.0, 4.0, 1.01 * e).holds());
        for k in 1..100 {
            assert!(epsilon_chain(1.0, 4.0, e * k as f64 / 100.0).holds());
        }
    }

    #[test]
    fn epsilon_max_regimes() {
        assert!(matches!(epsilon_max(1.0, 2.0), Err(Error::RegimeError(_))));
        let e = epsilon_max(1.0, 100.0).unwrap();
        assert!(e > 0.0 && e < 1.0);
        assert!(epsilon_chain(1.0, 100.0, e / 2.0).holds());
    }

    #[test]
    fn exp_upper_bound_cases() {
        assert!(close(exp_upper_bound(4.0, 1.0, 10.0), (-12f64).exp(), 1e-20));
        assert!(close(exp_upper_bound(4.0, 1.0, 10.0), 6.1442e-6, 1e-9));
        assert_eq!(exp_upper_bound(4.0, 3.0, 12.0), 1.0);
        assert_eq!(exp_upper_bound(4.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn heat_band_cases() {
        let v = heat_band_integral(1.0, 2.0).unwrap();
        assert!(close(v, 0.5 * (libm::erf(1.5) - libm::erf(1.0)), 1e-15));
        assert!(close(v, 0.0617018, 1e-6));
        for &x in &[-3.0, 0.25, 4.0] {
            let a = heat_band_integral(2.0, x).unwrap();
            let b = heat_band_integral(2.0, -1.0 - x).unwrap();
            assert!(close(a, b, 1e-15));
        }
        for &t in &[10.0, 100.0, 1e4] {
            assert!(heat_band_integral(t, 3.0).unwrap() <= 1.0 / (4.0 * PI * t).sqrt());
        }
        assert!(matches!(heat_band_integral(0.0, 1.0), Err(Error::DomainError(_))));
        let direct = heat_band_integral(3.0, 5.0).unwrap().ln();
        assert!(close(ln_heat_band_integral(3.0, 5.0).unwrap(), direct, 1e-12));
        assert!(ln_heat_band_integral(1.0, 400.0).unwrap().is_finite());
    }

    fn params() -> BoundParams {
        BoundParams::new(1.0, 4.0).unwrap()
    }

    #[test]
    fn default_parameters_are_consistent() {
        let p = params().with_calibration(2.0).with_harnack(0.5);
        p.validate().unwrap();
        assert!(close(p.eps, p.eps0 / 2.0, 1e-15));
        assert!(PI * PI / (4.0 * p.r * p.r) <= p.eps);
        assert!(PI * PI / (4.0 * (p.r - 0.1).powi(2)) > p.eps);
        assert!(close(p.gamma, p.gamma_cap / 2.0, 1e-18));
        assert!(params().validate().is_err());
    }

    #[test]
    fn gaussian_lower_bound_cases() {
        let p = params().with_calibration(3.0);
        assert!(matches!(
            gaussian_lower_bound(&p, 1.0, 0.5 * p.probe_speed()),
            Err(Error::OutsideValidity { .. })
        ));
        let mut unit = p.clone();
        unit.theta = 1.0;
        unit.gamma = unit.gamma_cap;
        let (t, x) = (2.0, 10.0);
        let expected = unit.gamma_cap * ((1.0 - unit.eps) * t).exp() * heat_band_integral(t, x).unwrap();
        assert!(close(gaussian_lower_bound(&unit, t, x).unwrap(), expected, 1e-15));
        let edge = gaussian_lower_bound(&p, 5.0, p.probe_speed() * 5.0).unwrap();
        assert!(edge <= p.gamma_cap);
    }

    fn ci_seq() -> SequencePair {
        SequencePair::new(vec![20.0, 120.0], vec![24.0, 900.0], GeneratorTag::Explicit).unwrap()
    }

    #[test]
    fn vbar_and_ubar_cases() {
        let seq = ci_seq();
        let s = s_n(0, &seq, 4.0);
        assert_eq!(s, 6.0);
        let at_y = supersolution_vbar(0, &seq, 1.0, 4.0, s, 24.0).unwrap();
        assert!(close(at_y, 1.0 + 2.0 * (-2.0 * 3f64.sqrt() * 96.0).exp(), 1e-15));
        let at_x1 = supersolution_vbar(0, &seq, 1.0, 4.0, s, 120.0).unwrap();
        assert!(close(at_x1 / (-96f64).exp(), 1.0, 1e-12));
        let (a, b) = (40.0, 80.0);
        let mid = supersolution_vbar(0, &seq, 1.0, 4.0, 20.0, 0.5 * (a + b)).unwrap();
        let ends = 0.5
            * (supersolution_vbar(0, &seq, 1.0, 4.0, 20.0, a).unwrap()
                + supersolution_vbar(0, &seq, 1.0, 4.0, 20.0, b).unwrap());
        assert!(mid <= ends);
        assert!(supersolution_vbar(0, &seq, 1.0, 4.0, 5.0, 30.0).is_err());

        let k = 3f64.sqrt();
        let t = 30.0;
        let junction = 2.0 * (4.0 * (t - s) - k * 96.0).exp();
        let left = supersolution_ubar(0, &seq, 1.0, 4.0, t, 120.0 - 1e-12).unwrap();
        let right = supersolution_ubar(0, &seq, 1.0, 4.0, t, 120.0).unwrap();
        assert!(close(left / junction, 1.0, 1e-9) && close(right / junction, 1.0, 1e-12));
        let start = supersolution_ubar(0, &seq, 1.0, 4.0, s, 24.0).unwrap();
        assert!(close(start, 1.0 + (-2.0 * k * 96.0).exp(), 1e-15));
        for &(t, x) in &[(6.0, 30.0), (20.0, 100.0), (40.0, 119.0)] {
            let vbar = supersolution_vbar(0, &seq, 1.0, 4.0, t, x).unwrap();
            let second = vbar - (2.0 * (t - s) - (x - 24.0)).exp();
            assert!(supersolution_ubar(0, &seq, 1.0, 4.0, t, x).unwrap() >= 0.5 * second);
        }
    }

    #[test]
    fn bump_schedule_components() {
        let seq = ci_seq();
        let mut p = params().with_calibration(2.0).with_harnack(0.5);
        p.r = 5.0;
        let tp = tau_prime(96.0, 5.0, 1.0, 4.0);
        assert!(close(tp, 108.0 / (2.0 * 3f64.sqrt()), 1e-12));
        assert!(close(tp, 31.1769, 1e-4));
        let b = bump_schedule(0, &seq, &p).unwrap();
        assert_eq!(b.s_n, 6.0);
        assert!(b.alpha < p.gamma);
        let center = bump_subsolution(&b, &p, b.tau_dprime, b.center(p.r)).unwrap();
        assert!(close(center / p.gamma, 1.0, 1e-12));
        assert!(close(
            bump_subsolution(&b, &p, 0.0, b.center(p.r)).unwrap(),
            b.alpha,
            1e-15 * b.alpha
        ));
        assert!(bump_subsolution(&b, &p, 0.0, b.support_left).unwrap() < 1e-15 * b.alpha);
        assert!(bump_subsolution(&b, &p, 0.0, b.support_left + 2.0 * p.r).unwrap() < 1e-15 * b.alpha);
        assert!(bump_subsolution(&b, &p, -1.0, b.center(p.r)).is_err());

        let tight = SequencePair::new(vec![20.0, 60.0], vec![50.0, 900.0], GeneratorTag::Explicit).unwrap();
        assert!(matches!(bump_schedule(0, &tight, &p), Err(Error::GateFailed { .. })));
    }

    #[test]
    fn bump_schedule_approaches_asymptotics() {
        let seq = SequencePair::new(
            vec![20.0, 500.0, 12500.0, 312500.0],
            vec![100.0, 2500.0, 62500.0, 1562500.0],
            GeneratorTag::Explicit,
        )
        .unwrap();
        let p = params().with_calibration(2.0).with_harnack(0.5);
        let a = bump_schedule(1, &seq, &p).unwrap();
        let b = bump_schedule(2, &seq, &p).unwrap();
        let da = (a.tau / a.tau_asymptotic - 1.0).abs();
        let db = (b.tau / b.tau_asymptotic - 1.0).abs();
        assert!(db < da, "{da} {db}");
    }

    #[test]
    fn xminus_window_cases() {
        let mut p = params();
        p.gamma = 0.02;
        p.ell = 5.0;
        let m = constant_m(&p).unwrap();
        let k = 4.0 + 2.0 * 3f64.sqrt();
        let oracle = ((0.02 - (-5f64).exp()).ln() - 2f64.ln() - 5.0 * 3f64.sqrt()) / k;
        assert!(close(m, oracle, 1e-14));
        assert!(close(m, -1.8323, 1e-4));
        p.ell = 3.0;
        assert!(matches!(constant_m(&p), Err(Error::DomainError(_))));
        assert_eq!(theorem_rates(1.0, 2.0).0, 0.0);
    }

    #[test]
    fn theorem_rate_values() {
        let (lo, hi) = theorem_rates(1.0, 4.0);
        assert!(close(lo, 4.0 / 3f64.sqrt() - 2.0, 1e-15) && close(lo, 0.30940, 1e-5));
        assert_eq!(hi, 2.0);
        // the lower rate is positive exactly when mu_plus > 2 sqrt(mu_minus (mu_plus - mu_minus)),
        // which fails only at mu_plus = 2 mu_minus
        for &mp in &[1.2, 1.5, 1.9, 2.5, 9.0] {
            let lo = theorem_rates(1.0, mp).0;
            assert_eq!(lo > 0.0, mp > 2.0 * (mp - 1.0f64).sqrt(), "{mp}");
        }
        assert!(theorem_rates(1.0, 1.5).0 < theorem_rates(1.0, 4.0).0);
        let mut prev = theorem_rates(1.0, 2.0).0;
        for k in 1..200 {
            let next = theorem_rates(1.0, 2.0 + 0.05 * k as f64).0;
            assert!(next > prev);
            prev = next;
        }
    }

    #[test]
    fn check_bound_counts_violations() {
        let f = Field::new(0.0, 0.0, 1.0, vec![1.0, 0.5, 0.2], 1.0);
        let region = Region {
            t_lo: 0.0,
            t_hi: 2.0,
            x_lo: 0.0,
            x_hi: 2.0,
        };
        let mut check = BoundCheck::new(Bound::ExpUpper { mu_plus: 0.01 }, region, 0.0, 1);
        check.observe(&f).unwrap();
        let r = check.report();
        assert_eq!(r.points_checked, 3);
        // exp(-0.1 x) stays above 0.8 on [0, 2]
        assert_eq!(r.violations, 0);
        let mut strict = BoundCheck::new(Bound::ExpUpper { mu_plus: 4.0 }, region, 0.0, 1);
        strict.observe(&f).unwrap();
        assert_eq!(strict.report().violations, 2);
        assert_eq!(strict.report().worst_x, 1.0);
    }
}
