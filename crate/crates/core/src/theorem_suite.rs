//! Falsifiable Monte Carlo checks of the limit theorems.
//!
//! Every check takes its parameters as a plain struct, draws from streams
//! derived from the [`StreamSeed`] it is handed, and returns a [`Verdict`].
//! [`Check`] bundles a check with its parameters for config-driven runs and
//! derives the check's streams from `(seed, check name)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cycle_models::CycleModel;
use crate::error::{RegenError, Result};
use crate::estimators::{
    empirical_abs_moment, estimate_expansion_constant, ks_distance, mean_se, normalized_laws,
    probe_grid, EmpiricalDistribution, POINT_MASS_ATOL,
};
use crate::process::cycle_statistics;
use crate::renewal_numerics::{renewal_function_for, renewal_function_numeric, size_biased_tails};
use crate::stream::{replicate_map, StreamSeed};

/// Statistics at or below this magnitude count as exactly zero in decay
/// rules, so identically-zero statistics survive rounding.
pub const ZERO_ATOL: f64 = 1e-9;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    /// `(t or n, statistic)` pairs in grid order.
    pub statistic_trajectory: Vec<(f64, f64)>,
    pub threshold: f64,
    pub pass: bool,
    pub details: BTreeMap<String, Value>,
}

impl Verdict {
    fn new(name: &str, statistic_trajectory: Vec<(f64, f64)>, threshold: f64, pass: bool) -> Self {
        Verdict {
            name: name.to_string(),
            statistic_trajectory,
            threshold,
            pass,
            details: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    /// Final statistic value, if any.
    pub fn final_value(&self) -> Option<f64> {
        self.statistic_trajectory.last().map(|p| p.1)
    }
}

/// The `(p, q, r)` moment bookkeeping behind the `o(t^r)` mean expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCondition {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl RateCondition {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0 && r > 0.0 && r <= 1.0) || !p.is_finite() || !q.is_finite() {
            return Err(RegenError::Validation(format!(
                "need p >= 1, q >= 1, 0 < r <= 1; got p = {p}, q = {q}, r = {r}"
            )));
        }
        Ok(RateCondition { p, q, r })
    }

    /// `p (1 - 1/q) >= 1 - r` and `p >= 2 - r`.
    pub fn satisfied(&self) -> bool {
        self.p * (1.0 - 1.0 / self.q) >= 1.0 - self.r && self.p >= 2.0 - self.r
    }
}

/// True when no step along the grid increases by more than two combined
/// standard errors.
fn no_significant_increase(values: &[f64], ses: &[f64]) -> bool {
    values
        .windows(2)
        .zip(ses.windows(2))
        .all(|(v, s)| v[1] - v[0] <= 2.0 * s[0].hypot(s[1]))
}

/// Decay rule for `o(t^r)` statistics: the final value is below half the
/// initial one and below `initial * (t_first / t_last)^(r/2)`.
fn decays(values: &[f64], t_grid: &[f64], r: f64) -> (bool, f64) {
    let first = values[0];
    let last = values[values.len() - 1];
    let floor = first * (t_grid[0] / t_grid[t_grid.len() - 1]).powf(r / 2.0);
    let pass = last.abs() <= ZERO_ATOL || (last < first / 2.0 && last < floor);
    (pass, floor)
}

fn check_rate(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(RegenError::Validation(format!("rate exponent must lie in (0, 1], got {r}")))
    }
}

fn zip_grid(t_grid: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    t_grid.iter().copied().zip(values.iter().copied()).collect()
}

fn default_grid() -> Vec<f64> {
    vec![250.0, 500.0, 1000.0, 2000.0]
}

fn long_grid() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0, 10_000.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltParams {
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    pub threshold: f64,
}

impl Default for CltParams {
    fn default() -> Self {
        CltParams {
            t_grid: default_grid(),
            replicates: 10_000,
            threshold: 0.03,
        }
    }
}

/// KS distance of `(Z(t) - a t) / sqrt(t)` to `N(0, sigma2 / mu)` along the
/// grid, using the model's declared moments. A point mass replaces the
/// normal law when `sigma2 = 0`.
pub fn verify_clt(model: &CycleModel, p: &CltParams, seed: &StreamSeed, max_cycles: u64) -> Result<Verdict> {
    let km = model.known_moments();
    let variance = km.sigma2 / km.mu;
    let laws = normalized_laws(model, km.a, &p.t_grid, p.replicates, seed, max_cycles)?;
    let ks: Vec<f64> = laws.iter().map(|l| ks_distance(l, variance)).collect::<Result<_>>()?;
    let se = vec![1.0 / (p.replicates as f64).sqrt(); ks.len()];
    let last = ks[ks.len() - 1];
    let pass = last < p.threshold && no_significant_increase(&ks, &se);
    Ok(Verdict::new("clt", zip_grid(&p.t_grid, &ks), p.threshold, pass)
        .with("replicates", p.replicates)
        .with("a", km.a)
        .with("limit_variance", variance)
        .with("degenerate", variance == 0.0)
        .with("ks_standard_error", se[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentParams {
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    pub rel_tol: f64,
}

impl Default for MomentParams {
    fn default() -> Self {
        MomentParams {
            r: 2.0,
            t_grid: default_grid(),
            replicates: 10_000,
            rel_tol: 0.05,
        }
    }
}

/// Second moment of the normalized statistic against `sigma2 / mu`. The
/// trajectory is the relative error, or the raw moment when the limit is 0.
pub fn verify_moment_convergence(
    model: &CycleModel,
    p: &MomentParams,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Verdict> {
    if p.r != 2.0 {
        return Err(RegenError::Validation(format!(
            "moment convergence is checked for r = 2 only, got {}",
            p.r
        )));
    }
    let km = model.known_moments();
    let target = km.sigma2 / km.mu;
    let laws = normalized_laws(model, km.a, &p.t_grid, p.replicates, seed, max_cycles)?;
    let moments: Vec<f64> = laws.iter().map(|l| empirical_abs_moment(l, p.r)).collect();
    let (stat, threshold): (Vec<f64>, f64) = if target > 0.0 {
        (moments.iter().map(|m| (m - target).abs() / target).collect(), p.rel_tol)
    } else {
        (moments.clone(), POINT_MASS_ATOL * POINT_MASS_ATOL)
    };
    let last = stat[stat.len() - 1];
    let pass = if target > 0.0 { last < threshold } else { last <= threshold };
    Ok(Verdict::new("moment_convergence", zip_grid(&p.t_grid, &stat), threshold, pass)
        .with("replicates", p.replicates)
        .with("target", target)
        .with("moments", &moments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfNormalizedParams {
    pub t: f64,
    pub replicates: usize,
    pub threshold: f64,
}

impl Default for SelfNormalizedParams {
    fn default() -> Self {
        SelfNormalizedParams {
            t: 2000.0,
            replicates: 10_000,
            threshold: 0.03,
        }
    }
}

/// KS distance to `N(0, 1)` of `Z(t)` standardized by its own sample mean
/// and standard deviation.
pub fn verify_self_normalized_clt(
    model: &CycleModel,
    p: &SelfNormalizedParams,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Verdict> {
    if model.known_moments().sigma2 == 0.0 {
        return Err(RegenError::Hypothesis(format!(
            "{} has sigma2 = 0; the self-normalized limit needs positive variance",
            model.kind_name()
        )));
    }
    let zs = probe_grid(model, &[p.t], p.replicates, seed, max_cycles, |pr| pr.z)?.remove(0);
    let raw = EmpiricalDistribution::new(zs)?;
    let (mean, sd) = (raw.mean(), raw.variance().sqrt());
    if sd == 0.0 {
        return Err(RegenError::Hypothesis("sample standard deviation is 0".into()));
    }
    let std = EmpiricalDistribution::new(raw.values().iter().map(|z| (z - mean) / sd).collect())?;
    let ks = ks_distance(&std, 1.0)?;
    Ok(Verdict::new("self_normalized_clt", vec![(p.t, ks)], p.threshold, ks < p.threshold)
        .with("replicates", p.replicates)
        .with("sample_mean", mean)
        .with("sample_sd", sd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakLlnParams {
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    pub eps: f64,
    pub threshold: f64,
}

impl Default for WeakLlnParams {
    fn default() -> Self {
        WeakLlnParams {
            t_grid: long_grid(),
            replicates: 2_000,
            eps: 0.1,
            threshold: 0.05,
        }
    }
}

/// `P(|Z(t)/t - a| > eps)` along the grid.
pub fn verify_weak_lln(model: &CycleModel, p: &WeakLlnParams, seed: &StreamSeed, max_cycles: u64) -> Result<Verdict> {
    if !(p.eps > 0.0) {
        return Err(RegenError::Validation(format!("eps must be positive, got {}", p.eps)));
    }
    let a = model.known_moments().a;
    let eps = p.eps;
    let cols = probe_grid(model, &p.t_grid, p.replicates, seed, max_cycles, |pr| {
        ((pr.z / pr.t - a).abs() > eps) as u8 as f64
    })?;
    let (probs, ses): (Vec<f64>, Vec<f64>) = cols.iter().map(|c| mean_se(c)).unzip();
    let pass = probs[probs.len() - 1] < p.threshold && no_significant_increase(&probs, &ses);
    Ok(Verdict::new("weak_lln", zip_grid(&p.t_grid, &probs), p.threshold, pass)
        .with("replicates", p.replicates)
        .with("eps", eps)
        .with("a", a)
        .with("standard_errors", &ses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongLlnGapParams {
    pub eps: f64,
    pub j_min: u32,
    pub j_max: u32,
    /// First block that must be empty for the light-tailed model.
    pub light_from: u32,
    pub replicates: usize,
}

impl Default for StrongLlnGapParams {
    fn default() -> Self {
        StrongLlnGapParams {
            eps: 1.0,
            j_min: 8,
            j_max: 14,
            light_from: 6,
            replicates: 200,
        }
    }
}

/// Mean over replicates of `#{n in [2^j, 2^(j+1)) : M_n > eps n}` for
/// `j = 0..=j_max`, with standard errors.
pub fn dyadic_block_counts(
    model: &CycleModel,
    eps: f64,
    j_max: u32,
    replicates: usize,
    seed: &StreamSeed,
) -> Result<Vec<(f64, f64)>> {
    let n_max: u64 = 1 << (j_max + 1);
    let rows = replicate_map(seed, replicates, |rng| {
        let mut counts = vec![0.0; j_max as usize + 1];
        for n in 1..n_max {
            let m = model.sample_cycle(rng).sup_abs();
            if m > eps * n as f64 {
                counts[63 - n.leading_zeros() as usize] += 1.0;
            }
        }
        Ok(counts)
    })?;
    Ok((0..=j_max as usize)
        .map(|j| mean_se(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect())
}

/// Contrasts `heavy_spike` (`E M = inf`) with `poisson_count`: the heavy
/// model's dyadic record counts stay near `ln 2 / eps` per block, so
/// `sum P(M_n > eps n)` diverges; the light model's blocks empty out.
pub fn verify_strong_lln_gap(p: &StrongLlnGapParams, seed: &StreamSeed) -> Result<Verdict> {
    if !(p.eps > 0.0) || p.j_min > p.j_max || p.light_from > p.j_max || p.j_max > 30 || p.replicates < 2 {
        return Err(RegenError::Validation(format!(
            "need eps > 0, j_min <= j_max <= 30, light_from <= j_max and replicates >= 2; got {p:?}"
        )));
    }
    let heavy = CycleModel::heavy_spike(1.0)?;
    let light = CycleModel::poisson_count(2.0)?;
    let hc = dyadic_block_counts(&heavy, p.eps, p.j_max, p.replicates, &seed.derive("heavy_spike"))?;
    let lc = dyadic_block_counts(&light, p.eps, p.j_max, p.replicates, &seed.derive("poisson_count"))?;
    let lambda = std::f64::consts::LN_2 / p.eps;
    let blocks = p.j_min as usize..=p.j_max as usize;
    let heavy_ok = blocks
        .clone()
        .all(|j| hc[j].0 >= lambda / 2.0 && hc[j].0 <= 2.0 * lambda);
    let light_ok = (p.light_from as usize..=p.j_max as usize).all(|j| lc[j].0 == 0.0);
    let traj = blocks.clone().map(|j| (j as f64, hc[j].0)).collect();
    Ok(Verdict::new("strong_lln_gap", traj, lambda, heavy_ok && light_ok)
        .with("replicates", p.replicates)
        .with("eps", p.eps)
        .with("band", [lambda / 2.0, 2.0 * lambda])
        .with("heavy_pass", heavy_ok)
        .with("heavy_standard_errors", blocks.map(|j| hc[j].1).collect::<Vec<_>>())
        .with("light_pass", light_ok)
        .with("light_block_means", lc.iter().map(|c| c.0).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessParams {
    pub c_list: Vec<f64>,
    pub t: f64,
    /// Cycles for the size-biased estimate.
    pub n: usize,
    pub replicates: usize,
}

impl Default for TightnessParams {
    fn default() -> Self {
        TightnessParams {
            c_list: vec![1.0, 2.0, 4.0, 8.0],
            t: 500.0,
            n: 100_000,
            replicates: 10_000,
        }
    }
}

/// Simulated `P(Y_tau(t) > c)` against the size-biased limit `lambda_c`,
/// with `Y = M + |a| xi`.
pub fn verify_tightness_limit(
    model: &CycleModel,
    p: &TightnessParams,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Verdict> {
    let km = model.known_moments();
    if p.t < 100.0 * km.mu {
        return Err(RegenError::Precondition(format!(
            "t = {} is below 100 mu = {}",
            p.t,
            100.0 * km.mu
        )));
    }
    if p.c_list.is_empty() || p.c_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RegenError::Validation("c_list must be nonempty and increasing".into()));
    }
    let a = km.a;
    let ys = probe_grid(model, &[p.t], p.replicates, &seed.derive("trajectories"), max_cycles, |pr| {
        cycle_statistics(&pr.cover, a, None).map(|s| s.y).unwrap_or(f64::NAN)
    })?
    .remove(0);
    let tails = size_biased_tails(model, a, &p.c_list, p.n, &mut seed.derive("size_biased").stream(0))?;
    let nf = p.replicates as f64;
    let mut traj = Vec::new();
    let mut sim = Vec::new();
    let mut agree = true;
    for tail in &tails {
        let ph = ys.iter().filter(|y| **y > tail.c).count() as f64 / nf;
        let se = (ph * (1.0 - ph) / nf).sqrt();
        agree &= (ph - tail.lambda).abs() <= 3.0 * se.hypot(tail.se);
        traj.push((tail.c, ph));
        sim.push(json!({"c": tail.c, "p_hat": ph, "se": se, "lambda": tail.lambda, "lambda_se": tail.se}));
    }
    let monotone = tails.windows(2).all(|w| w[1].lambda <= w[0].lambda);
    let vanishing = tails[tails.len() - 1].lambda <= 0.1 * tails[0].lambda;
    Ok(Verdict::new("tightness_limit", traj, 3.0, agree && monotone && vanishing)
        .with("replicates", p.replicates)
        .with("size_biased_cycles", p.n)
        .with("t", p.t)
        .with("per_threshold", sim)
        .with("agree", agree)
        .with("lambda_monotone", monotone)
        .with("lambda_vanishing", vanishing))
}

/// Which per-cycle functional of the covering cycle plays `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum YSelector {
    /// `M`
    Sup,
    /// `M + |a| xi`
    #[default]
    SupPlusDrift,
    /// `xi`
    Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OvershootParams {
    pub selector: YSelector,
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub replicates: usize,
}

impl Default for OvershootParams {
    fn default() -> Self {
        OvershootParams {
            selector: YSelector::SupPlusDrift,
            r: 0.5,
            t_grid: long_grid(),
            replicates: 5_000,
        }
    }
}

/// `t^-r E[Y_tau(t)]` along the grid.
pub fn verify_overshoot_rate(
    model: &CycleModel,
    p: &OvershootParams,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Verdict> {
    check_rate(p.r)?;
    let a = model.known_moments().a;
    let sel = p.selector;
    let cols = probe_grid(model, &p.t_grid, p.replicates, seed, max_cycles, |pr| {
        match cycle_statistics(&pr.cover, a, None) {
            Ok(s) => match sel {
                YSelector::Sup => s.m,
                YSelector::SupPlusDrift => s.y,
                YSelector::Duration => s.xi,
            },
            Err(_) => f64::NAN,
        }
    })?;
    let (mut stat, mut ses) = (Vec::new(), Vec::new());
    let mut means = Vec::new();
    for (col, &t) in cols.iter().zip(&p.t_grid) {
        let (m, se) = mean_se(col);
        means.push(m);
        stat.push(m / t.powf(p.r));
        ses.push(se / t.powf(p.r));
    }
    let (pass, floor) = decays(&stat, &p.t_grid, p.r);
    Ok(Verdict::new("overshoot_rate", zip_grid(&p.t_grid, &stat), floor, pass)
        .with("replicates", p.replicates)
        .with("selector", sel)
        .with("r", p.r)
        .with("mean_overshoot", &means)
        .with("standard_errors", &ses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanRateParams {
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub replicates: usize,
}

impl Default for MeanRateParams {
    fn default() -> Self {
        MeanRateParams {
            r: 1.0,
            t_grid: long_grid(),
            replicates: 10_000,
        }
    }
}

/// `|E Z(t) - a t| / t^r` along the grid, from raw replicate means.
pub fn verify_mean_rate(model: &CycleModel, p: &MeanRateParams, seed: &StreamSeed, max_cycles: u64) -> Result<Verdict> {
    check_rate(p.r)?;
    let a = model.known_moments().a;
    let cols = probe_grid(model, &p.t_grid, p.replicates, seed, max_cycles, |pr| pr.z - a * pr.t)?;
    let (mut stat, mut ses) = (Vec::new(), Vec::new());
    for (col, &t) in cols.iter().zip(&p.t_grid) {
        let (m, se) = mean_se(col);
        stat.push(m.abs() / t.powf(p.r));
        ses.push(se / t.powf(p.r));
    }
    let (pass, floor) = decays(&stat, &p.t_grid, p.r);
    Ok(Verdict::new("mean_rate", zip_grid(&p.t_grid, &stat), floor, pass)
        .with("replicates", p.replicates)
        .with("r", p.r)
        .with("a", a)
        .with("standard_errors", &ses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanExpansionParams {
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    /// Cycles for the expansion-constant estimate.
    pub cycles: usize,
    /// Step of the renewal-function solver used for counting models.
    pub h: f64,
}

impl Default for MeanExpansionParams {
    fn default() -> Self {
        MeanExpansionParams {
            t_grid: vec![25.0, 50.0, 100.0, 200.0],
            replicates: 100_000,
            cycles: 100_000,
            h: 0.005,
        }
    }
}

/// One grid point of the mean expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetPoint {
    pub t: f64,
    /// `E Z(t) - a t` by the renewal-reward identity.
    pub offset: f64,
    pub se: f64,
    /// Same quantity from raw replicate means of `Z(t)`.
    pub raw_offset: f64,
    pub raw_se: f64,
}

/// Both estimates of `E Z(t) - a t` from one set of trajectories. The
/// renewal-reward form `a (T_tau - t) - (Z(T_tau) - Z(t))` has bounded
/// variance in `t`; the raw form is reported alongside.
pub fn mean_offsets(
    model: &CycleModel,
    a: f64,
    t_grid: &[f64],
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Vec<OffsetPoint>> {
    let cols = probe_grid(model, t_grid, replicates, seed, max_cycles, |pr| {
        (a * pr.overshoot_time() - pr.overshoot_value(), pr.z - a * pr.t)
    })?;
    Ok(t_grid
        .iter()
        .zip(cols)
        .map(|(&t, col)| {
            let (w, raw): (Vec<f64>, Vec<f64>) = col.into_iter().unzip();
            let (offset, se) = mean_se(&w);
            let (raw_offset, raw_se) = mean_se(&raw);
            OffsetPoint {
                t,
                offset,
                se,
                raw_offset,
                raw_se,
            }
        })
        .collect())
}

/// `E Z(t) - a t` against the estimated expansion constant; counting models
/// are also checked against `U(t) - 1 - a t` from the renewal solver.
pub fn verify_mean_expansion(
    model: &CycleModel,
    p: &MeanExpansionParams,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Verdict> {
    let km = model.known_moments();
    if let Some(d) = model.span() {
        if let Some(t) = p
            .t_grid
            .iter()
            .find(|t| ((**t / d).round() * d - **t).abs() > 1e-9 * t.abs().max(1.0))
        {
            return Err(RegenError::Domain(format!("t = {t} is off the lattice of span {d}")));
        }
    }
    let pts = mean_offsets(model, km.a, &p.t_grid, p.replicates, &seed.derive("trajectories"), max_cycles)?;
    let c = estimate_expansion_constant(model, p.cycles, &mut seed.derive("cycles").stream(0))?;
    let last = pts[pts.len() - 1];
    let diffs: Vec<f64> = pts.iter().map(|q| (q.offset - c.c_hat).abs()).collect();
    let threshold = 3.0 * last.se.hypot(c.se) + ZERO_ATOL;
    let mut pass = diffs[diffs.len() - 1] <= threshold;

    let mut v = Verdict::new("mean_expansion", zip_grid(&p.t_grid, &diffs), threshold, false)
        .with("replicates", p.replicates)
        .with("cycles", p.cycles)
        .with("a", km.a)
        .with("expansion_constant", c)
        .with("offsets", &pts);
    if model.is_counting() {
        let t_max = p.t_grid[p.t_grid.len() - 1];
        // discretized tables: use step h/2 and bound its error by twice the
        // change from step h
        let coarse = renewal_function_for(model, p.h, t_max)?;
        let fine = match model.span() {
            Some(_) => None,
            None => Some(renewal_function_for(model, p.h / 2.0, t_max)?),
        };
        let mut solver = Vec::new();
        let mut agree = true;
        for q in &pts {
            let (u, slack) = match &fine {
                None => (coarse.value_at(q.t)?, ZERO_ATOL),
                Some(f) => {
                    let u = f.value_at(q.t)?;
                    (u, 2.0 * (coarse.value_at(q.t)? - u).abs() + ZERO_ATOL)
                }
            };
            let solver_offset = u - 1.0 - km.a * q.t;
            agree &= (q.offset - solver_offset).abs() <= 3.0 * q.se + slack;
            solver.push(json!({"t": q.t, "offset": solver_offset, "error_bound": slack}));
        }
        pass &= agree;
        v = v
            .with("solver_offsets", solver)
            .with("solver_step", p.h)
            .with("solver_agrees", agree);
    }
    v.pass = pass;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleParams {
    pub alpha: f64,
    pub beta: f64,
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    /// Step of the renewal-function solver.
    pub h: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            alpha: 1.5,
            beta: 1.0,
            t_grid: vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            replicates: 10_000,
            h: 0.01,
        }
    }
}

/// Exponent pair violating the rate condition for the Pareto construction
/// with `r = 1 + beta - alpha`: `q` is the midpoint of
/// `[max(1, 1/beta), alpha/beta)` and `p = beta q`. `None` unless
/// `0 < r < 1`.
pub fn counterexample_condition(alpha: f64, beta: f64) -> Option<RateCondition> {
    let r = 1.0 + beta - alpha;
    if !(r > 0.0 && r < 1.0) {
        return None;
    }
    let lo = (1.0 / beta).max(1.0);
    let q = 0.5 * (lo + alpha / beta);
    RateCondition::new(beta * q, q, r).ok()
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Pareto counterexample: the identity
/// `P(Z(t) > t^beta) = U(t - 1) t^-alpha`, growth of `E Z(t)` like
/// `t^max(1 + beta - alpha, 0)`, and the violated rate condition.
pub fn verify_counterexample(p: &CounterexampleParams, seed: &StreamSeed, max_cycles: u64) -> Result<Verdict> {
    let (alpha, beta) = (p.alpha, p.beta);
    if !(alpha > 1.0 && beta > 0.0 && beta < alpha) {
        return Err(RegenError::Validation(format!(
            "need alpha > 1 and 0 < beta < alpha, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if p.t_grid.len() < 3 || p.t_grid[0] < 1.0 {
        return Err(RegenError::Validation(
            "counterexample grid needs at least 3 points, all >= 1".into(),
        ));
    }
    let model = CycleModel::pareto_counterexample(alpha, beta)?;
    let mu = model.known_moments().mu;
    let cols = probe_grid(&model, &p.t_grid, p.replicates, seed, max_cycles, |pr| {
        (pr.z, pr.z > pr.t.powf(beta))
    })?;
    let t_max = p.t_grid[p.t_grid.len() - 1];
    let table = renewal_function_numeric(|t| model.duration_cdf(t), p.h, t_max)?;
    let nf = p.replicates as f64;

    let mut traj = Vec::new();
    let mut per_t = Vec::new();
    let mut means = Vec::new();
    let mut identity_ok = true;
    for (col, &t) in cols.iter().zip(&p.t_grid) {
        let hits = col.iter().filter(|c| c.1).count() as f64;
        let ph = hits / nf;
        let exact = table.value_at(t - 1.0)? * t.powf(-alpha);
        let se = (exact * (1.0 - exact) / nf).sqrt();
        // first-order solver error, carried into the band
        let slack = p.h / mu * t.powf(-alpha);
        let ok = (ph - exact).abs() <= 3.0 * se + slack;
        identity_ok &= ok;
        let (m, m_se) = mean_se(&col.iter().map(|c| c.0).collect::<Vec<_>>());
        means.push(m);
        traj.push((t, ph));
        per_t.push(json!({
            "t": t, "p_hat": ph, "exact": exact, "se": se, "within_band": ok,
            "mean": m, "mean_se": m_se, "scaled_probability": t.powf(alpha - 1.0) * ph,
        }));
    }
    let k0 = p.t_grid.len() / 2;
    let slope = log_log_slope(&p.t_grid[k0..], &means[k0..]);
    let r = 1.0 + beta - alpha;
    let expected = r.max(0.0);
    let slope_ok = (slope - expected).abs() <= 0.1;
    let cond = counterexample_condition(alpha, beta);
    let cond_ok = cond.is_none_or(|c| !c.satisfied());
    let bookkeeping = match cond {
        Some(c) => json!({"p": c.p, "q": c.q, "r": c.r, "satisfied": c.satisfied()}),
        None => json!({"r": r, "applicable": false}),
    };
    Ok(
        Verdict::new("counterexample", traj, 3.0, identity_ok && slope_ok && cond_ok)
            .with("replicates", p.replicates)
            .with("alpha", alpha)
            .with("beta", beta)
            .with("identity_pass", identity_ok)
            .with("per_t", per_t)
            .with("slope", slope)
            .with("expected_slope", expected)
            .with("slope_pass", slope_ok)
            .with("rate_condition", bookkeeping)
            .with("limit_scaled_probability", 1.0 / mu),
    )
}

/// A check together with its parameters, as named in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Check {
    Clt(CltParams),
    MomentConvergence(MomentParams),
    SelfNormalizedClt(SelfNormalizedParams),
    WeakLln(WeakLlnParams),
    StrongLlnGap(StrongLlnGapParams),
    TightnessLimit(TightnessParams),
    OvershootRate(OvershootParams),
    MeanRate(MeanRateParams),
    MeanExpansion(MeanExpansionParams),
    Counterexample(CounterexampleParams),
}

/// Every check name accepted in configs.
pub const CHECK_NAMES: &[&str] = &[
    "clt",
    "moment_convergence",
    "self_normalized_clt",
    "weak_lln",
    "strong_lln_gap",
    "tightness_limit",
    "overshoot_rate",
    "mean_rate",
    "mean_expansion",
    "counterexample",
];

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty()
        || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite()))
        || t_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(RegenError::Config("t_grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Clt(_) => "clt",
            Check::MomentConvergence(_) => "moment_convergence",
            Check::SelfNormalizedClt(_) => "self_normalized_clt",
            Check::WeakLln(_) => "weak_lln",
            Check::StrongLlnGap(_) => "strong_lln_gap",
            Check::TightnessLimit(_) => "tightness_limit",
            Check::OvershootRate(_) => "overshoot_rate",
            Check::MeanRate(_) => "mean_rate",
            Check::MeanExpansion(_) => "mean_expansion",
            Check::Counterexample(_) => "counterexample",
        }
    }

    /// Whether the check runs against the configured model.
    pub fn needs_model(&self) -> bool {
        !matches!(self, Check::StrongLlnGap(_) | Check::Counterexample(_))
    }

    /// Static validation of grids and sizes.
    pub fn validate(&self) -> Result<()> {
        let reps = match self {
            Check::Clt(p) => (Some(&p.t_grid), p.replicates),
            Check::MomentConvergence(p) => (Some(&p.t_grid), p.replicates),
            Check::SelfNormalizedClt(p) => (None, p.replicates),
            Check::WeakLln(p) => (Some(&p.t_grid), p.replicates),
            Check::StrongLlnGap(_) => (None, usize::MAX),
            Check::TightnessLimit(p) => (None, p.replicates),
            Check::OvershootRate(p) => (Some(&p.t_grid), p.replicates),
            Check::MeanRate(p) => (Some(&p.t_grid), p.replicates),
            Check::MeanExpansion(p) => (Some(&p.t_grid), p.replicates),
            Check::Counterexample(p) => (Some(&p.t_grid), p.replicates),
        };
        if let Some(g) = reps.0 {
            validate_grid(g)?;
        }
        if reps.1 < 1000 {
            return Err(RegenError::Config(format!(
                "{}: replicates must be at least 1000, got {}",
                self.name(),
                reps.1
            )));
        }
        Ok(())
    }

    /// Runs the check on streams derived from `(seed, check name)`.
    pub fn run(&self, model: Option<&CycleModel>, seed: u64, max_cycles: u64) -> Result<Verdict> {
        let s = StreamSeed::new(seed).derive(self.name());
        let need = || {
            model.ok_or_else(|| RegenError::Config(format!("check {} needs a [model] table", self.name())))
        };
        match self {
            Check::Clt(p) => verify_clt(need()?, p, &s, max_cycles),
            Check::MomentConvergence(p) => verify_moment_convergence(need()?, p, &s, max_cycles),
            Check::SelfNormalizedClt(p) => verify_self_normalized_clt(need()?, p, &s, max_cycles),
            Check::WeakLln(p) => verify_weak_lln(need()?, p, &s, max_cycles),
            Check::StrongLlnGap(p) => verify_strong_lln_gap(p, &s),
            Check::TightnessLimit(p) => verify_tightness_limit(need()?, p, &s, max_cycles),
            Check::OvershootRate(p) => verify_overshoot_rate(need()?, p, &s, max_cycles),
            Check::MeanRate(p) => verify_mean_rate(need()?, p, &s, max_cycles),
            Check::MeanExpansion(p) => verify_mean_expansion(need()?, p, &s, max_cycles),
            Check::Counterexample(p) => verify_counterexample(p, &s, max_cycles),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_models::center_model;
    use crate::process::DEFAULT_MAX_CYCLES;

    const CAP: u64 = DEFAULT_MAX_CYCLES;

    #[test]
    fn rate_condition_cases() {
        assert!(RateCondition::new(2.0, 2.0, 1.0).unwrap().satisfied());
        assert!(!RateCondition::new(1.0, 1.0, 0.5).unwrap().satisfied());
        assert!(RateCondition::new(0.5, 1.0, 0.5).is_err());
        assert!(RateCondition::new(1.0, 1.0, 0.0).is_err());
        let c = counterexample_condition(1.5, 1.0).unwrap();
        assert_eq!((c.p, c.q, c.r), (1.25, 1.25, 0.5));
        assert!(!c.satisfied());
        assert!(counterexample_condition(2.5, 1.0).is_none());
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((log_log_slope(&xs, &ys) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn clt_deterministic_is_trivial() {
        let m = CycleModel::deterministic_drift(1.0, 1.0).unwrap();
        let p = CltParams {
            t_grid: vec![10.0, 20.0],
            replicates: 1000,
            threshold: 0.03,
        };
        let v = verify_clt(&m, &p, &StreamSeed::new(1), CAP).unwrap();
        assert!(v.pass);
        assert!(v.statistic_trajectory.iter().all(|x| x.1 == 0.0));
    }

    #[test]
    fn clt_centering_gives_same_trajectory() {
        let m = CycleModel::poisson_count(2.0).unwrap();
        let c = center_model(&m, 2.0);
        let p = CltParams {
            t_grid: vec![50.0, 100.0],
            replicates: 2000,
            threshold: 0.05,
        };
        let a = verify_clt(&m, &p, &StreamSeed::new(9), CAP).unwrap();
        let b = verify_clt(&c, &p, &StreamSeed::new(9), CAP).unwrap();
        for (x, y) in a.statistic_trajectory.iter().zip(&b.statistic_trajectory) {
            assert!((x.1 - y.1).abs() <= 1e-12, "{x:?} {y:?}");
        }
    }

    #[test]
    fn self_normalized_rejects_degenerate() {
        let m = CycleModel::deterministic_drift(1.0, 1.0).unwrap();
        let err = verify_self_normalized_clt(&m, &SelfNormalizedParams::default(), &StreamSeed::new(1), CAP);
        assert!(matches!(err, Err(RegenError::Hypothesis(_))));
    }

    #[test]
    fn weak_lln_deterministic_zero() {
        let m = CycleModel::deterministic_drift(1.0, 2.0).unwrap();
        let p = WeakLlnParams {
            t_grid: vec![10.0, 100.0],
            replicates: 1000,
            ..Default::default()
        };
        let v = verify_weak_lln(&m, &p, &StreamSeed::new(2), CAP).unwrap();
        assert!(v.pass);
        assert!(v.statistic_trajectory.iter().all(|x| x.1 == 0.0));
    }

    #[test]
    fn block_counts_deterministic_empty() {
        let m = CycleModel::deterministic_drift(1.0, 1.0).unwrap();
        // M_n = 1, never above n for n >= 1
        let c = dyadic_block_counts(&m, 1.0, 10, 4, &StreamSeed::new(3)).unwrap();
        assert!(c.iter().all(|b| b.0 == 0.0));
    }

    #[test]
    fn tightness_zero_path() {
        let m = center_model(&CycleModel::deterministic_drift(1.0, 1.0).unwrap(), 1.0);
        let p = TightnessParams {
            t: 200.0,
            n: 1000,
            replicates: 1000,
            ..Default::default()
        };
        let v = verify_tightness_limit(&m, &p, &StreamSeed::new(4), CAP).unwrap();
        assert!(v.pass);
        assert!(v.statistic_trajectory.iter().all(|x| x.1 == 0.0));
        let short = TightnessParams { t: 50.0, ..p };
        assert!(matches!(
            verify_tightness_limit(&m, &short, &StreamSeed::new(4), CAP),
            Err(RegenError::Precondition(_))
        ));
    }

    #[test]
    fn overshoot_zero_and_rate_one() {
        let zero = center_model(&CycleModel::deterministic_drift(1.0, 1.0).unwrap(), 1.0);
        let p = OvershootParams {
            t_grid: vec![10.0, 100.0, 1000.0],
            replicates: 1000,
            ..Default::default()
        };
        let v = verify_overshoot_rate(&zero, &p, &StreamSeed::new(5), CAP).unwrap();
        assert!(v.pass && v.statistic_trajectory.iter().all(|x| x.1 == 0.0));

        let exp = CycleModel::poisson_count(1.0).unwrap();
        let p1 = OvershootParams {
            selector: YSelector::Duration,
            r: 1.0,
            ..p
        };
        let v = verify_overshoot_rate(&exp, &p1, &StreamSeed::new(5), CAP).unwrap();
        assert!(v.pass, "{v:?}");
        for (t, s) in &v.statistic_trajectory {
            assert!((s * t - 2.0).abs() < 0.15 * 2.0, "{t} {s}");
        }
        assert!(verify_overshoot_rate(&exp, &OvershootParams { r: 1.5, ..p1 }, &StreamSeed::new(5), CAP).is_err());
    }

    #[test]
    fn mean_rate_linear_zero() {
        let m = CycleModel::linear_to_eta(1.0, 0.5).unwrap();
        let p = MeanRateParams {
            t_grid: vec![10.0, 100.0],
            replicates: 1000,
            ..Default::default()
        };
        let v = verify_mean_rate(&m, &p, &StreamSeed::new(6), CAP).unwrap();
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn mean_expansion_arithmetic_and_lattice() {
        let m = CycleModel::arithmetic_count(1.0, vec![1.0]).unwrap();
        let p = MeanExpansionParams {
            t_grid: vec![3.0, 7.0, 20.0],
            replicates: 1000,
            cycles: 1000,
            h: 0.01,
        };
        let v = verify_mean_expansion(&m, &p, &StreamSeed::new(7), CAP).unwrap();
        assert!(v.pass);
        assert!(v.statistic_trajectory.iter().all(|x| x.1 == 0.0));
        let off = MeanExpansionParams {
            t_grid: vec![2.5],
            ..p
        };
        assert!(matches!(
            verify_mean_expansion(&m, &off, &StreamSeed::new(7), CAP),
            Err(RegenError::Domain(_))
        ));
    }

    #[test]
    fn counterexample_validation() {
        let bad = CounterexampleParams {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(verify_counterexample(&bad, &StreamSeed::new(8), CAP).is_err());
        let bad = CounterexampleParams {
            beta: 2.0,
            ..Default::default()
        };
        assert!(verify_counterexample(&bad, &StreamSeed::new(8), CAP).is_err());
    }

    #[test]
    fn check_config_parsing() {
        let c: Check = toml::from_str("name = \"clt\"\nreplicates = 2000").unwrap();
        assert_eq!(c.name(), "clt");
        assert!(c.validate().is_ok());
        assert!(toml::from_str::<Check>("name = \"nope\"").is_err());
        assert!(toml::from_str::<Check>("name = \"clt\"\nbogus = 1").is_err());
        let g: Check = toml::from_str("name = \"mean_rate\"\nt_grid = [2.0, 1.0]").unwrap();
        assert!(g.validate().is_err());
        assert_eq!(CHECK_NAMES.len(), 10);
    }
}
