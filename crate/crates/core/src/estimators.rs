//! Monte Carlo estimators for the quantities the limit theorems consume.
//!
//! Per-cycle estimators stream cycles from one generator. Per-time
//! estimators run independent replicate trajectories (one stream per
//! replicate, see [`crate::stream::replicate_map`]) and reuse each
//! trajectory for every time on the grid.

use rand::Rng;
use serde::Serialize;

use crate::cycle_models::CycleModel;
use crate::error::{RegenError, Result};
use crate::process::{cycle_statistics, walk, Probe};
use crate::stream::{replicate_map, StreamSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mu_hat: f64,
    pub a_hat: f64,
    pub sigma2_hat: f64,
    pub n: usize,
    pub se_mu: f64,
    pub se_a: f64,
    pub se_sigma2: f64,
}

/// Plug-in estimates of `mu = E xi`, `a = E eta / mu` and
/// `sigma2 = Var(eta - a xi)` from `n` cycles.
pub fn estimate_cycle_moments<R: Rng + ?Sized>(
    model: &CycleModel,
    n: usize,
    rng: &mut R,
) -> Result<MomentSummary> {
    if n < 100 {
        return Err(RegenError::Validation(format!("need n >= 100 cycles, got {n}")));
    }
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let c = model.sample_cycle(rng);
            (c.xi(), c.eta())
        })
        .collect();
    Ok(moments_from_pairs(&pairs))
}

/// Moment summary from `(xi, eta)` pairs.
pub fn moments_from_pairs(pairs: &[(f64, f64)]) -> MomentSummary {
    let n = pairs.len();
    let nf = n as f64;
    let mu_hat = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let eta_bar = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let a_hat = eta_bar / mu_hat;
    let resid: Vec<f64> = pairs.iter().map(|&(x, e)| e - a_hat * x).collect();
    let r_bar = resid.iter().sum::<f64>() / nf;
    let sigma2_hat = resid.iter().map(|r| (r - r_bar).powi(2)).sum::<f64>() / (nf - 1.0);
    let m4 = resid.iter().map(|r| (r - r_bar).powi(4)).sum::<f64>() / nf;
    let var_xi = pairs.iter().map(|p| (p.0 - mu_hat).powi(2)).sum::<f64>() / (nf - 1.0);
    MomentSummary {
        mu_hat,
        a_hat,
        sigma2_hat,
        n,
        se_mu: (var_xi / nf).sqrt(),
        se_a: (sigma2_hat / nf).sqrt() / mu_hat,
        se_sigma2: ((m4 - sigma2_hat * sigma2_hat).max(0.0) / nf).sqrt(),
    }
}

/// Estimate of the constant `C` in `E Z(t) = a t + C + o(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionConstant {
    pub c_hat: f64,
    pub se: f64,
    pub arithmetic: bool,
    pub span: Option<f64>,
    /// Arithmetic case only: the same constant written with the lattice sum
    /// running to `xi / d` and `- a d / 2`.
    pub c_hat_upper_form: Option<f64>,
}

/// Non-arithmetic:
/// `C = a E[xi^2] / (2 mu) + E[int_0^xi Z - xi eta] / mu`.
///
/// Arithmetic with span `d`:
/// `C = a E[xi^2] / (2 mu) + a d / 2 + E[d sum_{k<xi/d} Z(k d) - xi eta] / mu`.
pub fn estimate_expansion_constant<R: Rng + ?Sized>(
    model: &CycleModel,
    n: usize,
    rng: &mut R,
) -> Result<ExpansionConstant> {
    if n < 1000 {
        return Err(RegenError::Validation(format!("need n >= 1000 cycles, got {n}")));
    }
    let span = model.span();
    let rows: Vec<[f64; 5]> = (0..n)
        .map(|_| {
            let s = cycle_statistics(&model.sample_cycle(rng), 0.0, span)?;
            let area = s.lattice_sum.unwrap_or(s.integral);
            Ok([s.xi, s.eta, s.xi * s.xi, area - s.xi * s.eta, s.eta])
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = |j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / nf;
    let (m_xi, m_eta, m_2, m_w) = (mean(0), mean(1), mean(2), mean(3));
    let a_hat = m_eta / m_xi;
    let half_d = span.map_or(0.0, |d| 0.5 * d);
    let c_hat = a_hat * m_2 / (2.0 * m_xi) + a_hat * half_d + m_w / m_xi;
    let c_hat_upper_form = span.map(|d| {
        // sum to xi/d adds d * eta per cycle
        let m_w_upper = rows.iter().map(|r| r[3] + d * r[4]).sum::<f64>() / nf;
        a_hat * m_2 / (2.0 * m_xi) - a_hat * half_d + m_w_upper / m_xi
    });

    // delta method through the linear influence of each cycle
    let g = [
        -m_eta * m_2 / m_xi.powi(3) - m_w / (m_xi * m_xi) - m_eta * half_d / (m_xi * m_xi),
        m_2 / (2.0 * m_xi * m_xi) + half_d / m_xi,
        m_eta / (2.0 * m_xi * m_xi),
        1.0 / m_xi,
    ];
    let centers = [m_xi, m_eta, m_2, m_w];
    let infl: Vec<f64> = rows
        .iter()
        .map(|r| (0..4).map(|j| g[j] * (r[j] - centers[j])).sum())
        .collect();
    let var = infl.iter().map(|x| x * x).sum::<f64>() / (nf - 1.0);
    Ok(ExpansionConstant {
        c_hat,
        se: (var / nf).sqrt(),
        arithmetic: span.is_some(),
        span,
        c_hat_upper_form,
    })
}

/// A sorted sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RegenError::Validation("empty sample".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(RegenError::Validation("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted: values })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.count() as f64
    }

    /// Unbiased sample variance (0 for a single value).
    pub fn variance(&self) -> f64 {
        let n = self.count();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.sorted.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

/// Values within this distance of 0 count as 0 when comparing against a
/// point mass, so exact-in-theory zeros survive rounding.
pub const POINT_MASS_ATOL: f64 = 1e-9;

/// Kolmogorov distance between the sample and `N(0, variance)`; with
/// `variance == 0` the reference is the point mass at 0.
pub fn ks_distance(emp: &EmpiricalDistribution, variance: f64) -> Result<f64> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(RegenError::Validation(format!(
            "variance must be finite and nonnegative, got {variance}"
        )));
    }
    let xs = emp.values();
    let n = xs.len() as f64;
    let sd = variance.sqrt();
    // (F(x-), F(x)) for the reference law
    let reference = |x: f64| -> (f64, f64) {
        if variance == 0.0 {
            if x.abs() <= POINT_MASS_ATOL {
                (0.0, 1.0)
            } else if x > 0.0 {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        } else {
            let p = normal_cdf(x / sd);
            (p, p)
        }
    };
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let (f_left, f_at) = reference(xs[i]);
        d = d.max((i as f64 / n - f_left).abs());
        d = d.max(((j + 1) as f64 / n - f_at).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Mean of `|x|^r` over the sample.
pub fn empirical_abs_moment(emp: &EmpiricalDistribution, r: f64) -> f64 {
    emp.values().iter().map(|x| x.abs().powf(r)).sum::<f64>() / emp.count() as f64
}

/// Standard normal distribution function. Rational approximation with
/// absolute error below `7.5e-8` (Abramowitz and Stegun 26.2.17).
pub fn normal_cdf(x: f64) -> f64 {
    const P: f64 = 0.231_641_9;
    const B: [f64; 5] = [
        0.319_381_530,
        -0.356_563_782,
        1.781_477_937,
        -1.821_255_978,
        1.330_274_429,
    ];
    if x.is_nan() {
        return f64::NAN;
    }
    let z = x.abs();
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    let upper = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(RegenError::Validation("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RegenError::Validation(
            "time grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Runs one trajectory per replicate through `t_grid` and maps each probe.
/// Returns `out[k][i]` = value for grid point `k`, replicate `i`.
pub fn probe_grid<T, F>(
    model: &CycleModel,
    t_grid: &[f64],
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
    f: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send + Clone,
    F: Fn(&Probe) -> T + Sync + Send,
{
    check_grid(t_grid)?;
    if replicates == 0 {
        return Err(RegenError::Validation("need at least one replicate".into()));
    }
    let rows = replicate_map(seed, replicates, |rng| {
        Ok(walk(model, t_grid, rng, max_cycles)?.iter().map(&f).collect::<Vec<T>>())
    })?;
    Ok((0..t_grid.len())
        .map(|k| rows.iter().map(|r| r[k].clone()).collect())
        .collect())
}

/// Laws of `(Z(t) - a t) / sqrt(t)` for each `t` in the grid.
pub fn normalized_laws(
    model: &CycleModel,
    a: f64,
    t_grid: &[f64],
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Vec<EmpiricalDistribution>> {
    probe_grid(model, t_grid, replicates, seed, max_cycles, |p| {
        (p.z - a * p.t) / p.t.sqrt()
    })?
    .into_iter()
    .map(EmpiricalDistribution::new)
    .collect()
}

/// Law of `(Z(t) - a t) / sqrt(t)` from independent trajectories.
pub fn empirical_normalized_law(
    model: &CycleModel,
    a: f64,
    t: f64,
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<EmpiricalDistribution> {
    Ok(normalized_laws(model, a, &[t], replicates, seed, max_cycles)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E Z(t)` on the grid, with standard errors from the replicate spread.
pub fn estimate_mean_curve(
    model: &CycleModel,
    t_grid: &[f64],
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Vec<MeanPoint>> {
    let cols = probe_grid(model, t_grid, replicates, seed, max_cycles, |p| p.z)?;
    Ok(t_grid
        .iter()
        .zip(cols)
        .map(|(&t, v)| {
            let (mean, se) = mean_se(&v);
            MeanPoint { t, mean, se }
        })
        .collect())
}

/// `E Z(t) - a t` on the grid through the renewal-reward identity
/// `E Z(T_tau(t)) = a E T_tau(t)`, valid when `a` is the true rate:
///
/// `E Z(t) - a t = E[a (T_tau - t) - (Z(T_tau) - Z(t))]`.
///
/// The summand only involves the cycle covering `t`, so its variance stays
/// bounded in `t`, unlike `Z(t) - a t` itself.
pub fn estimate_mean_offset(
    model: &CycleModel,
    a: f64,
    t_grid: &[f64],
    replicates: usize,
    seed: &StreamSeed,
    max_cycles: u64,
) -> Result<Vec<MeanPoint>> {
    let cols = probe_grid(model, t_grid, replicates, seed, max_cycles, |p| {
        a * p.overshoot_time() - p.overshoot_value()
    })?;
    Ok(t_grid
        .iter()
        .zip(cols)
        .map(|(&t, v)| {
            let (mean, se) = mean_se(&v);
            MeanPoint { t, mean, se }
        })
        .collect())
}
