//! Level-set extrema `X-(t) <= X+(t)` of a discrete field, the interface
//! diameter `I(t) = X+ - X-`, and first-passage times at fixed probes.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{Field, Observer};

/// Leftmost point with `u <= gamma` and rightmost point with `u >= gamma`,
/// linearly interpolated between nodes.
pub fn level_positions(field: &Field, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("level {gamma} outside (0, 1)")));
    }
    let u = &field.values;
    let not_bracketed = Error::LevelNotBracketed { gamma };
    let j = u.iter().position(|&v| v <= gamma).ok_or(not_bracketed.clone())?;
    let i = u.iter().rposition(|&v| v >= gamma).ok_or(not_bracketed)?;

    let x_minus = if j == 0 {
        field.x(0)
    } else {
        let (a, b) = (u[j - 1], u[j]);
        field.x(j - 1) + field.dx * (a - gamma) / (a - b)
    };
    let x_plus = if i + 1 == u.len() {
        field.x(i)
    } else {
        let (a, b) = (u[i], u[i + 1]);
        field.x(i) + field.dx * (a - gamma) / (a - b)
    };
    Ok((x_minus, x_plus))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSample {
    pub t: f64,
    pub x_minus: f64,
    pub x_plus: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTrace {
    pub gamma: f64,
    pub samples: Vec<LevelSample>,
}

impl LevelTrace {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            samples: Vec::new(),
        }
    }

    pub fn record(&mut self, field: &Field) -> Result<()> {
        let (x_minus, x_plus) = level_positions(field, self.gamma)?;
        self.samples.push(LevelSample {
            t: field.t,
            x_minus,
            x_plus,
            width: (x_plus - x_minus).max(0.0),
        });
        Ok(())
    }

    /// Sample taken at the first recorded time `>= t`.
    pub fn at_or_after(&self, t: f64) -> Option<&LevelSample> {
        let k = self.samples.partition_point(|s| s.t < t);
        self.samples.get(k)
    }

    /// Rows `gamma,t,x_minus,x_plus,width`.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.samples {
            writeln!(w, "{},{},{},{},{}", self.gamma, s.t, s.x_minus, s.x_plus, s.width)?;
        }
        Ok(())
    }
}

pub const TRACE_CSV_HEADER: &str = "gamma,t,x_minus,x_plus,width";

/// Records one [`LevelTrace`] per level on a fixed step stride.
#[derive(Debug, Clone)]
pub struct LevelTracer {
    pub traces: Vec<LevelTrace>,
    stride: usize,
    pub missed: usize,
}

impl LevelTracer {
    pub fn new(levels: &[f64], stride: usize) -> Self {
        Self {
            traces: levels.iter().map(|&g| LevelTrace::new(g)).collect(),
            stride: stride.max(1),
            missed: 0,
        }
    }

    pub fn trace(&self, gamma: f64) -> Option<&LevelTrace> {
        self.traces.iter().find(|t| t.gamma == gamma)
    }
}

impl Observer for LevelTracer {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, field: &Field) -> Result<()> {
        for trace in &mut self.traces {
            match trace.record(field) {
                Ok(()) => {}
                Err(Error::LevelNotBracketed { .. }) => self.missed += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Extremes of `width / t` over samples with `t >= t_min` (and `t > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioExtrema {
    pub max: f64,
    pub min: f64,
    pub t_max: f64,
    pub t_min: f64,
}

pub fn ratio_extrema(trace: &LevelTrace, t_min: f64) -> Result<RatioExtrema> {
    let mut out: Option<RatioExtrema> = None;
    for s in trace.samples.iter().filter(|s| s.t >= t_min && s.t > 0.0) {
        let r = s.width / s.t;
        match out.as_mut() {
            None => {
                out = Some(RatioExtrema {
                    max: r,
                    min: r,
                    t_max: s.t,
                    t_min: s.t,
                })
            }
            Some(e) => {
                if r > e.max {
                    e.max = r;
                    e.t_max = s.t;
                }
                if r < e.min {
                    e.min = r;
                    e.t_min = s.t;
                }
            }
        }
    }
    out.ok_or(Error::EmptyWindow)
}

/// First time the sampled series `(t, u)` reaches `gamma`, linearly
/// interpolated between the bracketing samples.
pub fn crossing_time(position: f64, samples: &[(f64, f64)], gamma: f64) -> Result<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for &(t, u) in samples {
        if u >= gamma {
            return Ok(match prev {
                None => t,
                Some((t0, u0)) => t0 + (gamma - u0) / (u - u0) * (t - t0),
            });
        }
        prev = Some((t, u));
    }
    Err(Error::NeverCrossed { x: position, gamma })
}

/// Streaming version of [`crossing_time`] for a set of probes and levels.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    pub positions: Vec<f64>,
    pub gamma: f64,
    last: Vec<Option<(f64, f64)>>,
    /// `crossings[k]` is the first passage time at `positions[k]`.
    pub crossings: Vec<Option<f64>>,
}

impl CrossingDetector {
    pub fn new(positions: Vec<f64>, gamma: f64) -> Self {
        let n = positions.len();
        Self {
            positions,
            gamma,
            last: vec![None; n],
            crossings: vec![None; n],
        }
    }

    pub fn crossing(&self, k: usize) -> Result<f64> {
        self.crossings[k].ok_or(Error::NeverCrossed {
            x: self.positions[k],
            gamma: self.gamma,
        })
    }
}

impl Observer for CrossingDetector {
    fn observe(&mut self, field: &Field) -> Result<()> {
        for k in 0..self.positions.len() {
            if self.crossings[k].is_some() {
                continue;
            }
            let u = field.value_at(self.positions[k]);
            if u >= self.gamma {
                let t = field.t;
                self.crossings[k] = Some(match self.last[k] {
                    None => t,
                    Some((t0, u0)) => t0 + (self.gamma - u0) / (u - u0) * (t - t0),
                });
            }
            self.last[k] = Some((field.t, u));
        }
        Ok(())
    }
}
