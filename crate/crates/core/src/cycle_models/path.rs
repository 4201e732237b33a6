//! Finite-breakpoint càdlàg paths for one regeneration cycle.
//!
//! A path is stored relative to the start of its cycle, so it always starts
//! at `(0, 0)`. Between breakpoints it is either held constant (step mode,
//! right-continuous) or interpolated linearly. An optional linear drift
//! `drift · t` is added on top; centering a model by its mean rate is
//! expressed through this term, which keeps step paths exact after
//! centering.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{RegenError, Result};

/// How a path behaves between breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Holds the value of the last breakpoint at or before `t`.
    StepRightContinuous,
    /// Linear between breakpoints, constant after the final one.
    PiecewiseLinear,
}

pub(crate) type Breakpoints = SmallVec<[(f64, f64); 4]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePath {
    breakpoints: Breakpoints,
    mode: Interpolation,
    #[serde(default)]
    drift: f64,
}

impl CyclePath {
    /// Builds a path from `(time, value)` pairs. The first pair must be
    /// `(0, 0)` and times must be strictly increasing.
    pub fn new<I>(breakpoints: I, mode: Interpolation) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let breakpoints: Breakpoints = breakpoints.into_iter().collect();
        match breakpoints.first() {
            Some(&(t, v)) if t == 0.0 && v == 0.0 => {}
            _ => {
                return Err(RegenError::Validation(
                    "path must start at breakpoint (0, 0)".into(),
                ))
            }
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(RegenError::Validation(format!(
                    "breakpoint times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if breakpoints
            .iter()
            .any(|&(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(RegenError::Validation("non-finite breakpoint".into()));
        }
        Ok(CyclePath {
            breakpoints,
            mode,
            drift: 0.0,
        })
    }

    /// Constructor for internally generated paths that are valid by
    /// construction.
    pub(crate) fn from_parts(breakpoints: Breakpoints, mode: Interpolation) -> Self {
        debug_assert!(breakpoints.first() == Some(&(0.0, 0.0)));
        debug_assert!(breakpoints.windows(2).all(|w| w[1].0 > w[0].0));
        CyclePath {
            breakpoints,
            mode,
            drift: 0.0,
        }
    }

    /// The identically zero path.
    pub fn zero() -> Self {
        Self::from_parts(smallvec::smallvec![(0.0, 0.0)], Interpolation::StepRightContinuous)
    }

    /// Returns this path with `rate · t` added.
    pub fn with_drift(mut self, rate: f64) -> Self {
        self.drift += rate;
        self
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn last_time(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].0
    }

    /// Index of the last breakpoint with time `<= t` (t >= 0).
    fn segment(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&(bt, _)| bt <= t) - 1
    }

    fn base_value(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, v0) = self.breakpoints[i];
        match self.mode {
            Interpolation::StepRightContinuous => v0,
            Interpolation::PiecewiseLinear => match self.breakpoints.get(i + 1) {
                Some(&(t1, v1)) => v0 + (v1 - v0) * ((t - t0) / (t1 - t0)),
                None => v0,
            },
        }
    }

    /// Unchecked evaluation for `t >= 0`.
    pub(crate) fn eval(&self, t: f64) -> f64 {
        if self.mode == Interpolation::PiecewiseLinear {
            let i = self.segment(t);
            let (t0, v0) = self.breakpoints[i];
            if let Some(&(t1, v1)) = self.breakpoints.get(i + 1) {
                // interpolate between drifted end values, clamped so no
                // interior point rounds past the segment ends
                let w0 = v0 + self.drift * t0;
                let w1 = v1 + self.drift * t1;
                let w = w0 + (w1 - w0) * ((t - t0) / (t1 - t0));
                return w.clamp(w0.min(w1), w0.max(w1));
            }
        }
        if self.drift == 0.0 {
            self.base_value(t)
        } else {
            self.base_value(t) + self.drift * t
        }
    }

    /// Candidate magnitudes whose maximum is the supremum of `|path|` over
    /// `[0, xi)`. Step pieces contribute both their left end and the left
    /// limit at their right end; linear paths are continuous so breakpoints
    /// and the endpoint suffice.
    fn sup_open(&self, xi: f64) -> f64 {
        let bp = &self.breakpoints;
        let mut sup: f64 = 0.0;
        match self.mode {
            Interpolation::StepRightContinuous => {
                for (i, &(t0, v)) in bp.iter().enumerate() {
                    if t0 >= xi {
                        break;
                    }
                    let end = bp.get(i + 1).map_or(xi, |&(t1, _)| t1.min(xi));
                    sup = sup.max((v + self.drift * t0).abs());
                    if self.drift != 0.0 {
                        sup = sup.max((v + self.drift * end).abs());
                    }
                }
            }
            Interpolation::PiecewiseLinear => {
                for &(t0, _) in bp.iter().take_while(|&&(t0, _)| t0 <= xi) {
                    sup = sup.max(self.eval(t0).abs());
                }
                sup = sup.max(self.eval(xi).abs());
            }
        }
        sup
    }

    fn integral(&self, xi: f64) -> f64 {
        let bp = &self.breakpoints;
        let mut total = 0.0;
        for (i, &(t0, v0)) in bp.iter().enumerate() {
            if t0 >= xi {
                break;
            }
            match (self.mode, bp.get(i + 1)) {
                (Interpolation::StepRightContinuous, next) => {
                    let end = next.map_or(xi, |&(t1, _)| t1.min(xi));
                    total += v0 * (end - t0);
                }
                (Interpolation::PiecewiseLinear, Some(&(t1, v1))) if t1 <= xi => {
                    total += 0.5 * (v0 + v1) * (t1 - t0);
                }
                (Interpolation::PiecewiseLinear, Some(_)) => {
                    let vx = self.base_value(xi);
                    total += 0.5 * (v0 + vx) * (xi - t0);
                }
                (Interpolation::PiecewiseLinear, None) => {
                    total += v0 * (xi - t0);
                }
            }
        }
        if self.drift != 0.0 {
            total += 0.5 * self.drift * xi * xi;
        }
        total
    }
}

/// One i.i.d. cycle: a duration and the path increment over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSample {
    xi: f64,
    path: CyclePath,
}

/// Relative slack when testing whether a duration sits on a lattice.
const LATTICE_RTOL: f64 = 1e-9;

impl CycleSample {
    pub fn new(xi: f64, path: CyclePath) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(RegenError::Validation(format!(
                "cycle duration must be positive and finite, got {xi}"
            )));
        }
        if path.last_time() > xi {
            return Err(RegenError::Validation(format!(
                "breakpoint at {} lies beyond the cycle end {xi}",
                path.last_time()
            )));
        }
        Ok(CycleSample { xi, path })
    }

    pub(crate) fn from_parts(xi: f64, path: CyclePath) -> Self {
        debug_assert!(xi > 0.0 && path.last_time() <= xi);
        CycleSample { xi, path }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn path(&self) -> &CyclePath {
        &self.path
    }

    pub(crate) fn into_centered(self, a: f64) -> Self {
        CycleSample {
            xi: self.xi,
            path: self.path.with_drift(-a),
        }
    }

    /// Path value at local time `t` in `[0, xi]`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.xi).contains(&t) {
            return Err(RegenError::Domain(format!(
                "local time {t} outside [0, {}]",
                self.xi
            )));
        }
        Ok(self.path.eval(t))
    }

    /// Value at the cycle end, the increment `eta` of the cycle.
    pub fn eta(&self) -> f64 {
        self.path.eval(self.xi)
    }

    /// Supremum of `|path|` over the closed interval `[0, xi]`.
    pub fn sup_abs(&self) -> f64 {
        self.sup_abs_open().max(self.eta().abs())
    }

    /// Supremum of `|path|` over `[0, xi)`, excluding a jump at the end.
    pub fn sup_abs_open(&self) -> f64 {
        self.path.sup_open(self.xi)
    }

    /// Exact integral of the path over `[0, xi]`.
    pub fn integral(&self) -> f64 {
        self.path.integral(self.xi)
    }

    /// Number of lattice steps `xi / d`, or a domain error when the
    /// duration is not a multiple of `d`.
    pub fn lattice_steps(&self, d: f64) -> Result<u64> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(RegenError::Validation(format!("span must be positive, got {d}")));
        }
        let k = (self.xi / d).round();
        if k < 1.0 || (self.xi - k * d).abs() > LATTICE_RTOL * self.xi {
            return Err(RegenError::Domain(format!(
                "duration {} is not a multiple of span {d}",
                self.xi
            )));
        }
        Ok(k as u64)
    }

    /// `d * sum_{k=1}^{xi/d - 1} path(k d)`.
    pub fn lattice_sum(&self, d: f64) -> Result<f64> {
        let steps = self.lattice_steps(d)?;
        let sum: f64 = (1..steps).map(|k| self.path.eval(k as f64 * d)).sum();
        Ok(d * sum)
    }
}
