//! Heterogeneous growth-rate landscapes `mu(x)` and the logistic reaction
//! term `f(x, s) = mu(x) s (1 - s)`.
//!
//! A [`MediaProfile`] alternates fast plateaus `mu_plus` on `[x_n + 1, y_n - 1]`
//! with slow plateaus `mu_minus` on `[y_n, x_{n+1}]`, joined by unit-width
//! transition zones. Plateau values are returned bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `s` outside `[0, 1]` accepted by [`GrowthRate::reaction`].
pub const DENSITY_TOLERANCE: f64 = 1e-12;

/// Anything that can serve as the growth-rate landscape of the solver.
pub trait GrowthRate: Sync {
    fn mu(&self, x: f64) -> f64;

    /// Infimum of `mu` over the real line.
    fn mu_min(&self) -> f64;

    /// Supremum of `mu` over the real line.
    fn mu_max(&self) -> f64;

    /// Position beyond which the landscape is no longer the intended
    /// construction, if any.
    fn construction_end(&self) -> Option<f64> {
        None
    }

    fn reaction(&self, x: f64, s: f64) -> Result<f64> {
        if !(-DENSITY_TOLERANCE..=1.0 + DENSITY_TOLERANCE).contains(&s) {
            return Err(Error::DomainError(format!("density {s} outside [0, 1] at x = {x}")));
        }
        Ok(self.mu(x) * s * (1.0 - s))
    }
}

/// Spatially constant growth rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homogeneous {
    pub mu: f64,
}

impl Homogeneous {
    pub fn new(mu: f64) -> Self {
        Self { mu }
    }
}

impl GrowthRate for Homogeneous {
    fn mu(&self, _x: f64) -> f64 {
        self.mu
    }

    fn mu_min(&self) -> f64 {
        self.mu
    }

    fn mu_max(&self) -> f64 {
        self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorTag {
    Factorial,
    FactorialOffset,
    Geometric,
    Explicit,
}

/// Recipe for the interval sequences `x_n`, `y_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSpec {
    /// `x_n = (2n+3)!`, `y_n = (2n+4)!`.
    Factorial,
    /// `x_n = m!`, `y_n = m! + alpha m^beta` with `m = start + n`.
    FactorialOffset {
        alpha: f64,
        beta: f64,
        start: u32,
    },
    /// `x_n = x0 ratio^n`, `y_n = y0 ratio^n`.
    Geometric {
        x0: f64,
        y0: f64,
        ratio: f64,
    },
    Explicit {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

impl SequenceSpec {
    pub fn tag(&self) -> GeneratorTag {
        match self {
            SequenceSpec::Factorial => GeneratorTag::Factorial,
            SequenceSpec::FactorialOffset { .. } => GeneratorTag::FactorialOffset,
            SequenceSpec::Geometric { .. } => GeneratorTag::Geometric,
            SequenceSpec::Explicit { .. } => GeneratorTag::Explicit,
        }
    }
}

/// Validated pair of increasing sequences delimiting the plateaus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequencePair {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tag: GeneratorTag,
}

fn factorial(m: u32) -> f64 {
    (2..=m).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Builds the first `n_max` terms of the sequences described by `spec`.
///
/// Explicit sequences are truncated to `n_max` terms.
pub fn generate_sequences(spec: &SequenceSpec, n_max: usize) -> Result<SequencePair> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = match spec {
        SequenceSpec::Factorial => (0..n_max as u32)
            .map(|n| (factorial(2 * n + 3), factorial(2 * n + 4)))
            .unzip(),
        SequenceSpec::FactorialOffset { alpha, beta, start } => {
            if !(*alpha > 0.0 && *beta > 0.0) {
                return Err(Error::InvalidParameter(
                    "factorial-offset needs alpha > 0 and beta > 0".into(),
                ));
            }
            (0..n_max as u32)
                .map(|n| {
                    let m = start + n;
                    let x = factorial(m);
                    (x, x + alpha * f64::from(m).powf(*beta))
                })
                .unzip()
        }
        SequenceSpec::Geometric { x0, y0, ratio } => (0..n_max as i32)
            .map(|n| (x0 * ratio.powi(n), y0 * ratio.powi(n)))
            .unzip(),
        SequenceSpec::Explicit { xs, ys } => {
            let k = n_max.min(xs.len()).min(ys.len()).max(1);
            if xs.len() != ys.len() {
                return Err(Error::ConstraintViolation {
                    n: 0,
                    which: format!("xs and ys have different lengths ({} vs {})", xs.len(), ys.len()),
                });
            }
            (
                xs.iter().take(k).copied().collect(),
                ys.iter().take(k).copied().collect(),
            )
        }
    };
    SequencePair::new(xs, ys, spec.tag())
}

impl SequencePair {
    /// Checks the ordering `0 < x_n < y_n - 2 < y_n < x_{n+1}`, strict growth of
    /// `y_n - x_n` and non-increase of `y_n / x_{n+1}`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, tag: GeneratorTag) -> Result<Self> {
        let violation = |n: usize, which: String| Err(Error::ConstraintViolation { n, which });
        if xs.is_empty() || xs.len() != ys.len() {
            return violation(0, "xs and ys must have the same length N >= 1".into());
        }
        let count = xs.len();
        for n in 0..count {
            let (x, y) = (xs[n], ys[n]);
            if !(x.is_finite() && y.is_finite()) {
                return violation(n, format!("x{n}, y{n} finite"));
            }
            if !(x > 0.0) {
                return violation(n, format!("0 < x{n}"));
            }
            if !(x < y - 2.0) {
                return violation(n, format!("x{n} < y{n} - 2"));
            }
            if n + 1 < count && !(y < xs[n + 1]) {
                return violation(n, format!("y{n} < x{}", n + 1));
            }
            if n > 0 && !(y - x > ys[n - 1] - xs[n - 1]) {
                return violation(n, format!("y{n} - x{n} > y{} - x{}", n - 1, n - 1));
            }
            if n >= 1 && n + 1 < count && ys[n] / xs[n + 1] > ys[n - 1] / xs[n] {
                return violation(n, format!("y{n}/x{} <= y{}/x{n}", n + 1, n - 1));
            }
        }
        Ok(Self { xs, ys, tag })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn tag(&self) -> GeneratorTag {
        self.tag
    }
}

/// Shape of the unit-width zones joining the plateaus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transition {
    /// `psi(s) = g(s) / (g(s) + g(1 - s))` with `g(s) = exp(-1/s)`: C-infinity.
    #[default]
    SmoothExp,
    Linear,
    /// Jump at the middle of the zone. Not continuous.
    None,
}

impl Transition {
    /// Blend weight in `[0, 1]` for relative position `s` in the zone.
    pub fn weight(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            Transition::SmoothExp => {
                let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
                let (a, b) = (g(s), g(1.0 - s));
                a / (a + b)
            }
            Transition::Linear => s,
            Transition::None => {
                if s < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Lipschitz constant of [`Transition::weight`]; infinite for `None`.
    pub fn lipschitz(self) -> f64 {
        match self {
            Transition::SmoothExp => 2.0,
            Transition::Linear => 1.0,
            Transition::None => f64::INFINITY,
        }
    }

    fn blend(self, from: f64, to: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return from;
        }
        if s >= 1.0 {
            return to;
        }
        from + (to - from) * self.weight(s)
    }
}

/// The landscape `mu(x)` built on a [`SequencePair`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediaProfile {
    mu_minus: f64,
    mu_plus: f64,
    seq: SequencePair,
    transition: Transition,
    left_rate: f64,
    right_rate: f64,
    zlatos_regime: bool,
}

impl MediaProfile {
    /// Profile in the diverging-interface regime `mu_plus > 2 mu_minus > 0`,
    /// with `mu_minus` on both tails.
    pub fn new(mu_minus: f64, mu_plus: f64, seq: SequencePair, transition: Transition) -> Result<Self> {
        Self::build(mu_minus, mu_plus, seq, transition, false)
    }

    /// Profile with `mu_minus < mu_plus < 2 mu_minus`, where bounded
    /// interfaces are expected.
    pub fn zlatos(mu_minus: f64, mu_plus: f64, seq: SequencePair, transition: Transition) -> Result<Self> {
        Self::build(mu_minus, mu_plus, seq, transition, true)
    }

    fn build(
        mu_minus: f64,
        mu_plus: f64,
        seq: SequencePair,
        transition: Transition,
        zlatos_regime: bool,
    ) -> Result<Self> {
        if !(mu_minus > 0.0 && mu_minus.is_finite() && mu_plus.is_finite()) {
            return Err(Error::RegimeError(format!(
                "need finite mu_minus > 0, got mu_minus = {mu_minus}, mu_plus = {mu_plus}"
            )));
        }
        if zlatos_regime {
            if !(mu_minus < mu_plus && mu_plus < 2.0 * mu_minus) {
                return Err(Error::RegimeError(format!(
                    "zlatos regime needs mu_minus < mu_plus < 2 mu_minus, got ({mu_minus}, {mu_plus})"
                )));
            }
        } else if !(mu_plus > 2.0 * mu_minus) {
            return Err(Error::RegimeError(format!(
                "need mu_plus > 2 mu_minus, got ({mu_minus}, {mu_plus})"
            )));
        }
        Ok(Self {
            mu_minus,
            mu_plus,
            seq,
            transition,
            left_rate: mu_minus,
            right_rate: mu_minus,
            zlatos_regime,
        })
    }

    /// Overrides the tail rates. Both must lie in `[mu_minus, mu_plus]`.
    pub fn with_tail_rates(mut self, left_rate: f64, right_rate: f64) -> Result<Self> {
        let range = self.mu_minus..=self.mu_plus;
        if !range.contains(&left_rate) || !range.contains(&right_rate) {
            return Err(Error::InvalidParameter(format!(
                "tail rates ({left_rate}, {right_rate}) outside [{}, {}]",
                self.mu_minus, self.mu_plus
            )));
        }
        self.left_rate = left_rate;
        self.right_rate = right_rate;
        Ok(self)
    }

    pub fn mu_minus(&self) -> f64 {
        self.mu_minus
    }

    pub fn mu_plus(&self) -> f64 {
        self.mu_plus
    }

    pub fn seq(&self) -> &SequencePair {
        &self.seq
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    pub fn is_zlatos_regime(&self) -> bool {
        self.zlatos_regime
    }

    pub fn mu_at(&self, x: f64) -> f64 {
        let xs = self.seq.xs();
        let ys = self.seq.ys();
        if x <= xs[0] {
            return self.left_rate;
        }
        let n = xs.partition_point(|&v| v <= x) - 1;
        let last = n + 1 == xs.len();
        let (xn, yn) = (xs[n], ys[n]);
        if x < xn + 1.0 {
            let from = if n == 0 { self.left_rate } else { self.mu_minus };
            self.transition.blend(from, self.mu_plus, x - xn)
        } else if x <= yn - 1.0 {
            self.mu_plus
        } else if x < yn {
            let to = if last { self.right_rate } else { self.mu_minus };
            self.transition.blend(self.mu_plus, to, x - (yn - 1.0))
        } else if last {
            self.right_rate
        } else {
            self.mu_minus
        }
    }

    /// `x` positions covering every plateau and, densely, every transition
    /// zone. Used for sampled KPP checks.
    pub fn sample_points(&self, per_zone: usize) -> Vec<f64> {
        let per_zone = per_zone.max(2);
        let mut pts = Vec::new();
        let zone = |start: f64, pts: &mut Vec<f64>| {
            for k in 0..=per_zone {
                pts.push(start + k as f64 / per_zone as f64);
            }
        };
        let xs = self.seq.xs();
        let ys = self.seq.ys();
        pts.push(xs[0] - 2.0);
        for n in 0..xs.len() {
            zone(xs[n], &mut pts);
            pts.push(0.5 * (xs[n] + ys[n]));
            zone(ys[n] - 1.0, &mut pts);
            if n + 1 < xs.len() {
                pts.push(0.5 * (ys[n] + xs[n + 1]));
            }
        }
        pts.push(ys[ys.len() - 1] + 2.0);
        pts
    }
}

impl GrowthRate for MediaProfile {
    fn mu(&self, x: f64) -> f64 {
        self.mu_at(x)
    }

    fn mu_min(&self) -> f64 {
        self.mu_minus
    }

    fn mu_max(&self) -> f64 {
        self.mu_plus
    }

    /// The terminal slow block `[y_last, +inf)` is held at `right_rate`; it
    /// is taken to be meaningful for as long as the last fast block.
    fn construction_end(&self) -> Option<f64> {
        let xs = self.seq.xs();
        let ys = self.seq.ys();
        let (x, y) = (xs[xs.len() - 1], ys[ys.len() - 1]);
        Some(y + (y - x))
    }
}

/// Infimum over sampled `x` of `f(x,s1)/s1 - f(x,s2)/s2` for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KppPairReport {
    pub s1: f64,
    pub s2: f64,
    pub infimum: f64,
    pub argmin_x: f64,
    /// `mu_min (s2 - s1)`: the value the infimum must reach.
    pub required: f64,
}

const KPP_TOLERANCE: f64 = 1e-12;

/// Sampled check of the Fisher-KPP monotonicity of `f(x, s)/s`.
///
/// Fails on the first pair whose infimum drops below `mu_min (s2 - s1)`
/// (up to `1e-12`) or is not strictly positive.
pub fn verify_kpp<M: GrowthRate + ?Sized>(media: &M, pairs: &[(f64, f64)], xs: &[f64]) -> Result<Vec<KppPairReport>> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter("no sample positions".into()));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(s1, s2) in pairs {
        if !(0.0 < s1 && s1 < s2 && s2 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < s1 < s2 <= 1, got ({s1}, {s2})"
            )));
        }
        let required = media.mu_min() * (s2 - s1);
        let mut infimum = f64::INFINITY;
        let mut argmin_x = xs[0];
        for &x in xs {
            let d = media.reaction(x, s1)? / s1 - media.reaction(x, s2)? / s2;
            if d < infimum {
                infimum = d;
                argmin_x = x;
            }
        }
        if !(infimum > 0.0) || infimum < required - KPP_TOLERANCE {
            return Err(Error::KppViolation {
                x: argmin_x,
                s1,
                s2,
                difference: infimum,
            });
        }
        out.push(KppPairReport {
            s1,
            s2,
            infimum,
            argmin_x,
            required,
        });
    }
    Ok(out)
}

/// Evenly spaced `(x, mu(x))` samples on `[a, b]` with `points >= 2`.
pub fn preview<M: GrowthRate + ?Sized>(media: &M, a: f64, b: f64, points: usize) -> Vec<(f64, f64)> {
    let points = points.max(2);
    (0..points)
        .map(|k| {
            let x = a + (b - a) * k as f64 / (points - 1) as f64;
            (x, media.mu(x))
        })
        .collect()
}
