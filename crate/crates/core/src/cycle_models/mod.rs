//! Cycle data model and the registry of built-in generative models.
//!
//! Each model draws i.i.d. `(xi, path)` cycles and declares its analytic
//! metadata up front: arithmetic span, cycle moments and which moment
//! hypotheses hold. Nothing here is inferred from samples.

mod path;

pub use path::{CyclePath, CycleSample, Interpolation};

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::smallvec;

use crate::error::{RegenError, Result};
use path::Breakpoints;

/// Parameters of a built-in model. The serde form is the `[model]` table of
/// an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// `xi = duration` always; the path rises linearly to `slope * duration`.
    DeterministicDrift {
        #[serde(default = "one")]
        duration: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    /// `xi ~ Exp(rate)`; linear path ending at `slope * xi`.
    LinearToEta {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    /// `xi ~ Exp(rate)`; path 0 with a unit jump at the cycle end, so
    /// `Z(t) = N(t)` is a Poisson process.
    PoissonCount { rate: f64 },
    /// `xi ~ Uniform(0, upper)`; counting path.
    UniformCount {
        #[serde(default = "two")]
        upper: f64,
    },
    /// `xi = k * span` with `P(k) = pmf[k - 1]`; counting path.
    ArithmeticCount {
        #[serde(default = "one")]
        span: f64,
        #[serde(default = "unit_pmf")]
        pmf: Vec<f64>,
    },
    /// `P(xi > s) = s^-alpha` for `s >= 1`; the path is 0 on `[0, 1)`,
    /// `xi^beta` on `[1, xi)` and 0 again at `xi`.
    ParetoCounterexample { alpha: f64, beta: f64 },
    /// `xi ~ Exp(rate)`; path jumps to `H` at `xi / 2` and back to 0 at `xi`,
    /// with `P(H > x) = 1 / x` for `x >= 1`.
    HeavySpike {
        #[serde(default = "one")]
        rate: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn unit_pmf() -> Vec<f64> {
    vec![1.0]
}

/// Closed-form cycle moments: `mu = E xi`, `a = E eta / mu`,
/// `sigma2 = Var(eta - a xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnownMoments {
    pub mu: f64,
    pub a: f64,
    pub sigma2: f64,
}

/// Which moment hypotheses the model satisfies. `M` is the per-cycle
/// supremum of `|path|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentFlags {
    /// `E[xi^2] < inf`
    pub duration_l2: bool,
    /// `E[M] < inf`
    pub sup_l1: bool,
    /// `E[M^2] < inf`
    pub sup_l2: bool,
    /// `E[xi M] < inf`
    pub duration_sup_l1: bool,
}

impl MomentFlags {
    /// Hypotheses of the O(1) mean expansion.
    pub fn expansion_holds(&self) -> bool {
        self.duration_l2 && self.sup_l1 && self.duration_sup_l1
    }
}

/// One row of the model catalog.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub params: &'static str,
    pub constraints: &'static str,
    pub properties: &'static str,
}

/// Every built-in model kind, in registry order.
pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        kind: "deterministic_drift",
        params: "duration=1, slope=1",
        constraints: "duration>0",
        properties: "xi = duration a.s. (span = duration); Z(t) = slope*t; sigma^2 = 0",
    },
    CatalogEntry {
        kind: "linear_to_eta",
        params: "rate=1, slope=1",
        constraints: "rate>0",
        properties: "xi ~ Exp(rate); eta = slope*xi; sigma^2 = 0; all moments finite",
    },
    CatalogEntry {
        kind: "poisson_count",
        params: "rate",
        constraints: "rate>0",
        properties: "xi ~ Exp(rate); Z(t) = N(t); a = rate, sigma^2 = 1; all moments finite",
    },
    CatalogEntry {
        kind: "uniform_count",
        params: "upper=2",
        constraints: "upper>0",
        properties: "xi ~ U(0, upper); Z(t) = N(t); sigma^2 = 1/3; all moments finite",
    },
    CatalogEntry {
        kind: "arithmetic_count",
        params: "span=1, pmf=[1]",
        constraints: "span>0, pmf>=0 sums to 1",
        properties: "xi in span*{1,2,..} (arithmetic); Z(t) = N(t); all moments finite",
    },
    CatalogEntry {
        kind: "pareto_counterexample",
        params: "alpha, beta",
        constraints: "alpha>1, beta>0",
        properties: "P(xi>s) = s^-alpha; a = 0; M = xi^beta; E[M] < inf iff beta < alpha; \
                     E[xi^2] < inf iff alpha > 2",
    },
    CatalogEntry {
        kind: "heavy_spike",
        params: "rate=1",
        constraints: "rate>0",
        properties: "xi ~ Exp(rate); spike H with P(H>x) = 1/x; a = 0; E[M1]=inf, M1<inf a.s.",
    },
];

/// A validated generative model for i.i.d. cycles.
///
/// `centering` is subtracted from every path as `centering * t`; it is zero
/// for the built-in models and set by [`center_model`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleModel {
    kind: ModelKind,
    centering: f64,
    #[serde(skip)]
    cumulative_pmf: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RegenError::Validation(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl CycleModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let mut cumulative_pmf = Vec::new();
        match &kind {
            ModelKind::DeterministicDrift { duration, slope } => {
                positive("duration", *duration)?;
                if !slope.is_finite() {
                    return Err(RegenError::Validation("slope must be finite".into()));
                }
            }
            ModelKind::LinearToEta { rate, slope } => {
                positive("rate", *rate)?;
                if !slope.is_finite() {
                    return Err(RegenError::Validation("slope must be finite".into()));
                }
            }
            ModelKind::PoissonCount { rate } | ModelKind::HeavySpike { rate } => {
                positive("rate", *rate)?
            }
            ModelKind::UniformCount { upper } => positive("upper", *upper)?,
            ModelKind::ArithmeticCount { span, pmf } => {
                positive("span", *span)?;
                validate_pmf(pmf)?;
                let mut acc = 0.0;
                cumulative_pmf = pmf
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
            }
            ModelKind::ParetoCounterexample { alpha, beta } => {
                if !(*alpha > 1.0 && alpha.is_finite()) {
                    return Err(RegenError::Validation(format!(
                        "pareto_counterexample requires alpha > 1, got {alpha}"
                    )));
                }
                positive("beta", *beta)?;
            }
        }
        Ok(CycleModel {
            kind,
            centering: 0.0,
            cumulative_pmf,
        })
    }

    /// Parses a `[model]`-style TOML table and validates it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let kind: ModelKind = toml::from_str(text).map_err(|e| RegenError::Config(e.to_string()))?;
        Self::new(kind)
    }

    pub fn poisson_count(rate: f64) -> Result<Self> {
        Self::new(ModelKind::PoissonCount { rate })
    }

    pub fn uniform_count(upper: f64) -> Result<Self> {
        Self::new(ModelKind::UniformCount { upper })
    }

    pub fn deterministic_drift(duration: f64, slope: f64) -> Result<Self> {
        Self::new(ModelKind::DeterministicDrift { duration, slope })
    }

    pub fn linear_to_eta(rate: f64, slope: f64) -> Result<Self> {
        Self::new(ModelKind::LinearToEta { rate, slope })
    }

    pub fn arithmetic_count(span: f64, pmf: Vec<f64>) -> Result<Self> {
        Self::new(ModelKind::ArithmeticCount { span, pmf })
    }

    pub fn pareto_counterexample(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(ModelKind::ParetoCounterexample { alpha, beta })
    }

    pub fn heavy_spike(rate: f64) -> Result<Self> {
        Self::new(ModelKind::HeavySpike { rate })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::DeterministicDrift { .. } => "deterministic_drift",
            ModelKind::LinearToEta { .. } => "linear_to_eta",
            ModelKind::PoissonCount { .. } => "poisson_count",
            ModelKind::UniformCount { .. } => "uniform_count",
            ModelKind::ArithmeticCount { .. } => "arithmetic_count",
            ModelKind::ParetoCounterexample { .. } => "pareto_counterexample",
            ModelKind::HeavySpike { .. } => "heavy_spike",
        }
    }

    /// The drift subtracted from every path.
    pub fn centering(&self) -> f64 {
        self.centering
    }

    /// Arithmetic span, present iff every duration is a multiple of it.
    pub fn span(&self) -> Option<f64> {
        match self.kind {
            ModelKind::DeterministicDrift { duration, .. } => Some(duration),
            ModelKind::ArithmeticCount { span, .. } => Some(span),
            _ => None,
        }
    }

    /// True when the path is a pure counting path (`Z(t) = N(t)`).
    pub fn is_counting(&self) -> bool {
        self.centering == 0.0
            && matches!(
                self.kind,
                ModelKind::PoissonCount { .. }
                    | ModelKind::UniformCount { .. }
                    | ModelKind::ArithmeticCount { .. }
            )
    }

    /// Declared `(mu, a, sigma2)`.
    pub fn known_moments(&self) -> KnownMoments {
        let (mu, a, sigma2) = match &self.kind {
            ModelKind::DeterministicDrift { duration, slope } => (*duration, *slope, 0.0),
            ModelKind::LinearToEta { rate, slope } => (1.0 / rate, *slope, 0.0),
            ModelKind::PoissonCount { rate } => (1.0 / rate, *rate, 1.0),
            ModelKind::UniformCount { upper } => (upper / 2.0, 2.0 / upper, 1.0 / 3.0),
            ModelKind::ArithmeticCount { span, pmf } => {
                let (m1, m2) = pmf_moments(pmf);
                let mu = span * m1;
                let var = span * span * (m2 - m1 * m1);
                (mu, 1.0 / mu, var / (mu * mu))
            }
            ModelKind::ParetoCounterexample { alpha, .. } => (alpha / (alpha - 1.0), 0.0, 0.0),
            ModelKind::HeavySpike { rate } => (1.0 / rate, 0.0, 0.0),
        };
        // eta - a xi is unchanged by centering: both eta and a shift by
        // the same drift.
        KnownMoments {
            mu,
            a: a - self.centering,
            sigma2,
        }
    }

    /// Declared `E[xi^2]`, infinite when the second moment diverges.
    pub fn duration_second_moment(&self) -> f64 {
        match &self.kind {
            ModelKind::DeterministicDrift { duration, .. } => duration * duration,
            ModelKind::LinearToEta { rate, .. }
            | ModelKind::PoissonCount { rate }
            | ModelKind::HeavySpike { rate } => 2.0 / (rate * rate),
            ModelKind::UniformCount { upper } => upper * upper / 3.0,
            ModelKind::ArithmeticCount { span, pmf } => span * span * pmf_moments(pmf).1,
            ModelKind::ParetoCounterexample { alpha, .. } => {
                if *alpha > 2.0 {
                    alpha / (alpha - 2.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn moment_flags(&self) -> MomentFlags {
        match &self.kind {
            ModelKind::ParetoCounterexample { alpha, beta } => MomentFlags {
                duration_l2: *alpha > 2.0,
                sup_l1: beta < alpha,
                sup_l2: 2.0 * beta < *alpha,
                duration_sup_l1: 1.0 + beta < *alpha,
            },
            ModelKind::HeavySpike { .. } => MomentFlags {
                duration_l2: true,
                sup_l1: false,
                sup_l2: false,
                duration_sup_l1: false,
            },
            _ => MomentFlags {
                duration_l2: true,
                sup_l1: true,
                sup_l2: true,
                duration_sup_l1: true,
            },
        }
    }

    /// Distribution function of the cycle duration.
    pub fn duration_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModelKind::DeterministicDrift { duration, .. } => (t >= *duration) as u8 as f64,
            ModelKind::LinearToEta { rate, .. }
            | ModelKind::PoissonCount { rate }
            | ModelKind::HeavySpike { rate } => -(-rate * t).exp_m1(),
            ModelKind::UniformCount { upper } => (t / upper).min(1.0),
            ModelKind::ArithmeticCount { span, .. } => {
                let k = (t / span + 1e-9).floor() as usize;
                if k == 0 {
                    0.0
                } else {
                    self.cumulative_pmf[(k - 1).min(self.cumulative_pmf.len() - 1)].min(1.0)
                }
            }
            ModelKind::ParetoCounterexample { alpha, .. } => {
                if t < 1.0 {
                    0.0
                } else {
                    1.0 - t.powf(-alpha)
                }
            }
        }
    }

    /// Draws one cycle.
    pub fn sample_cycle<R: Rng + ?Sized>(&self, rng: &mut R) -> CycleSample {
        let sample = self.sample_raw(rng);
        if self.centering == 0.0 {
            sample
        } else {
            sample.into_centered(self.centering)
        }
    }

    fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> CycleSample {
        use Interpolation::*;
        let counting = |xi: f64| {
            let bp: Breakpoints = smallvec![(0.0, 0.0), (xi, 1.0)];
            CycleSample::from_parts(xi, CyclePath::from_parts(bp, StepRightContinuous))
        };
        let linear = |xi: f64, slope: f64| {
            let bp: Breakpoints = smallvec![(0.0, 0.0), (xi, slope * xi)];
            CycleSample::from_parts(xi, CyclePath::from_parts(bp, PiecewiseLinear))
        };
        match &self.kind {
            ModelKind::DeterministicDrift { duration, slope } => linear(*duration, *slope),
            ModelKind::LinearToEta { rate, slope } => linear(exponential(rng, *rate), *slope),
            ModelKind::PoissonCount { rate } => counting(exponential(rng, *rate)),
            ModelKind::UniformCount { upper } => {
                let u: f64 = rng.sample(Open01);
                counting(upper * u)
            }
            ModelKind::ArithmeticCount { span, .. } => {
                let u: f64 = rng.random();
                let k = self
                    .cumulative_pmf
                    .partition_point(|&c| c <= u)
                    .min(self.cumulative_pmf.len() - 1);
                // skip zero-mass atoms that the search can land on at the top
                let k = (0..=k).rev().find(|&i| self.pmf_at(i) > 0.0).unwrap_or(k);
                counting((k + 1) as f64 * span)
            }
            ModelKind::ParetoCounterexample { alpha, beta } => {
                let xi = pareto_unit(rng, *alpha);
                let bp: Breakpoints = smallvec![(0.0, 0.0), (1.0, xi.powf(*beta)), (xi, 0.0)];
                CycleSample::from_parts(xi, CyclePath::from_parts(bp, StepRightContinuous))
            }
            ModelKind::HeavySpike { rate } => {
                let xi = exponential(rng, *rate);
                let h = pareto_unit(rng, 1.0);
                let bp: Breakpoints = smallvec![(0.0, 0.0), (0.5 * xi, h), (xi, 0.0)];
                CycleSample::from_parts(xi, CyclePath::from_parts(bp, StepRightContinuous))
            }
        }
    }

    fn pmf_at(&self, i: usize) -> f64 {
        match &self.kind {
            ModelKind::ArithmeticCount { pmf, .. } => pmf[i],
            _ => 0.0,
        }
    }

    /// Lattice probabilities `P(xi = k * span)` for `k = 1, 2, ...`.
    pub fn lattice_pmf(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::DeterministicDrift { .. } => Some(vec![1.0]),
            ModelKind::ArithmeticCount { pmf, .. } => Some(pmf.clone()),
            _ => None,
        }
    }
}

/// Wraps `model` so each path has `a * t` subtracted. Durations are drawn
/// from the same stream positions, so a centered model fed the same stream
/// sees the same cycles up to the drift.
pub fn center_model(model: &CycleModel, a: f64) -> CycleModel {
    let mut m = model.clone();
    m.centering += a;
    m
}

fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(RegenError::Validation("pmf must not be empty".into()));
    }
    if pmf.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(RegenError::Validation("pmf entries must be nonnegative".into()));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(RegenError::Validation(format!("pmf sums to {total}, not 1")));
    }
    Ok(())
}

fn pmf_moments(pmf: &[f64]) -> (f64, f64) {
    pmf.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (i, p)| {
        let k = (i + 1) as f64;
        (m1 + p * k, m2 + p * k * k)
    })
}

/// Inverse transform for `Exp(rate)`; strictly positive.
fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// Inverse transform for `P(X > s) = s^-alpha`, `s >= 1`; strictly above 1.
fn pareto_unit<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    u.powf(-1.0 / alpha)
}
