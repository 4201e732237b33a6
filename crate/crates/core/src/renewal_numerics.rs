//! Deterministic renewal computations.
//!
//! The renewal function `U(t) = E N(t) + 1 = sum_n P(T_n <= t)` satisfies
//! `U = 1 + F * U`. For arithmetic durations the recursion on the lattice
//! is exact; otherwise the duration is discretized onto a grid of step `h`
//! by rounding to the nearest grid point (but never to zero), and the
//! resulting lattice recursion is solved. Rounding to the nearest point keeps
//! the mean duration accurate to `O(h^2)`, so the table carries the lattice
//! offset `h / (2 mu)` as its leading, first-order error.

use rand::Rng;
use serde::Serialize;

use crate::cycle_models::CycleModel;
use crate::error::{RegenError, Result};
use crate::process::cycle_statistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableMode {
    ArithmeticExact,
    Discretized,
}

/// `U` on the grid `0, step, 2 step, ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTable {
    step: f64,
    values: Vec<f64>,
    mode: TableMode,
}

impl RenewalTable {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> TableMode {
        self.mode
    }

    /// Largest grid time covered.
    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(RegenError::Domain(format!("time {t} is negative")));
        }
        let i = (t / self.step + 1e-9).floor() as usize;
        if i >= self.values.len() {
            return Err(RegenError::Domain(format!(
                "time {t} beyond table end {}",
                self.t_max()
            )));
        }
        Ok(i)
    }

    /// `U(t)` with `t` truncated down to the grid (U is right-continuous
    /// and constant between lattice points).
    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.index_of(t)?])
    }
}

/// Exact lattice recursion `U(m d) = 1 + sum_{k=1}^m pmf_k U((m-k) d)`,
/// where `pmf[k - 1] = P(xi = k d)`.
pub fn renewal_function_arithmetic(pmf: &[f64], span: f64, m_max: usize) -> Result<RenewalTable> {
    if pmf.is_empty() || pmf.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(RegenError::Validation("pmf entries must be nonnegative".into()));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(RegenError::Validation(format!("pmf sums to {total}, not 1")));
    }
    if !(span > 0.0 && span.is_finite()) {
        return Err(RegenError::Validation(format!("span must be positive, got {span}")));
    }
    // pmf indexed from lattice step 1
    let mut weights = Vec::with_capacity(pmf.len() + 1);
    weights.push(0.0);
    weights.extend_from_slice(pmf);
    Ok(RenewalTable {
        step: span,
        values: lattice_recursion(&weights, m_max),
        mode: TableMode::ArithmeticExact,
    })
}

/// `weights[k] = P(step count = k)`, `weights[0] = 0`.
fn lattice_recursion(weights: &[f64], m_max: usize) -> Vec<f64> {
    let support: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, w)| **w > 0.0)
        .map(|(k, w)| (k, *w))
        .collect();
    let mut u = Vec::with_capacity(m_max + 1);
    u.push(1.0);
    for m in 1..=m_max {
        let mut acc = 0.0;
        for &(k, w) in &support {
            if k > m {
                break;
            }
            acc += w * u[m - k];
        }
        u.push(1.0 + acc);
    }
    u
}

/// Discretized solution of `U = 1 + F * U` on `[0, t_max]` with step `h`.
pub fn renewal_function_numeric<F>(cdf: F, h: f64, t_max: f64) -> Result<RenewalTable>
where
    F: Fn(f64) -> f64,
{
    if !(h > 0.0 && t_max > 0.0 && h <= t_max / 10.0) {
        return Err(RegenError::Validation(format!(
            "need 0 < h <= t_max / 10, got h = {h}, t_max = {t_max}"
        )));
    }
    if cdf(0.0) != 0.0 {
        return Err(RegenError::Validation(
            "cdf must vanish at 0 (durations are positive)".into(),
        ));
    }
    let m_max = (t_max / h).round() as usize;
    // cell k collects durations in [(k - 1/2) h, (k + 1/2) h); cell 1 also
    // takes (0, h/2)
    let mut weights = vec![0.0; m_max + 1];
    let mut prev = 0.0;
    for (k, w) in weights.iter_mut().enumerate().skip(1) {
        let cur = cdf((k as f64 + 0.5) * h);
        if cur < prev - 1e-15 {
            return Err(RegenError::Validation(format!(
                "cdf decreases near t = {}",
                (k as f64 + 0.5) * h
            )));
        }
        *w = (cur - prev).max(0.0);
        prev = cur;
    }
    Ok(RenewalTable {
        step: h,
        values: lattice_recursion(&weights, m_max),
        mode: TableMode::Discretized,
    })
}

/// Renewal table for a model: exact for arithmetic models, discretized
/// otherwise.
pub fn renewal_function_for(model: &CycleModel, h: f64, t_max: f64) -> Result<RenewalTable> {
    match (model.lattice_pmf(), model.span()) {
        (Some(pmf), Some(d)) => renewal_function_arithmetic(&pmf, d, (t_max / d).ceil() as usize),
        _ => renewal_function_numeric(|t| model.duration_cdf(t), h, t_max),
    }
}

/// A nonnegative function on `[0, inf)` to be convolved with `U`.
///
/// `decreasing` together with a finite `integral_bound` certifies direct
/// Riemann integrability.
pub struct TailFunction {
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    decreasing: bool,
    integral_bound: Option<f64>,
}

impl std::fmt::Debug for TailFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TailFunction")
            .field("decreasing", &self.decreasing)
            .field("integral_bound", &self.integral_bound)
            .finish()
    }
}

impl TailFunction {
    /// A function without a DRI certificate.
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TailFunction {
            eval: Box::new(eval),
            decreasing: false,
            integral_bound: None,
        }
    }

    /// A function declared decreasing with `integral <= bound < inf`.
    pub fn decreasing(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, bound: f64) -> Self {
        TailFunction {
            eval: Box::new(eval),
            decreasing: true,
            integral_bound: Some(bound),
        }
    }

    pub fn zero() -> Self {
        Self::decreasing(|_| 0.0, 0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            (self.eval)(s)
        }
    }

    pub fn is_certified(&self) -> bool {
        self.decreasing && self.integral_bound.is_some_and(f64::is_finite)
    }
}

/// `(U * h)(t) = sum_j h(t - u_j) (U(u_j) - U(u_{j-1}))`, including the
/// unit atom of `U` at 0.
pub fn key_renewal_convolution(table: &RenewalTable, h: &TailFunction, t: f64) -> Result<f64> {
    let m = table.index_of(t)?;
    let u = table.values();
    let mut acc = h.eval(t) * u[0];
    for j in 1..=m {
        acc += h.eval(t - j as f64 * table.step()) * (u[j] - u[j - 1]);
    }
    Ok(acc)
}

/// `(1/mu) * integral_0^inf h(s) ds` for a certified DRI function.
pub fn key_renewal_limit(h: &TailFunction, mu: f64) -> Result<f64> {
    if !h.is_certified() {
        return Err(RegenError::Precondition(
            "h must be declared decreasing with a finite integral bound".into(),
        ));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(RegenError::Validation(format!("mu must be positive, got {mu}")));
    }
    Ok(integrate_half_line(|s| h.eval(s), 1e-10) / mu)
}

/// Integral over `[0, inf)` of a decreasing nonnegative function, summed
/// over dyadic blocks `[0,1], [1,2], [2,4], ...`. Once the block integrals
/// settle into a geometric decay the remaining tail is added in closed form.
fn integrate_half_line(f: impl Fn(f64) -> f64, rtol: f64) -> f64 {
    let mut total = adaptive_simpson(&f, 0.0, 1.0, rtol * 1e-2, 50);
    let mut prev_block = total;
    let mut lo = 1.0;
    for _ in 0..80 {
        let hi = 2.0 * lo;
        let block = adaptive_simpson(&f, lo, hi, rtol * 1e-2 * total.max(1e-300), 50);
        total += block;
        if block <= rtol * 1e-3 * total {
            break;
        }
        let ratio = block / prev_block;
        if block > 0.0 && prev_block > 0.0 && ratio < 0.9 {
            // tail estimate for a power-law or faster decay
            let tail = block * ratio / (1.0 - ratio);
            if tail <= rtol * total {
                total += tail;
                break;
            }
        }
        prev_block = block;
        lo = hi;
    }
    total
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol.max(1e-300), depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Monte Carlo estimate of `lambda_c = E[xi 1{Y > c}] / E[xi]` with
/// `Y = M + |a| xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeBiasedTail {
    pub c: f64,
    pub lambda: f64,
    pub se: f64,
}

/// Estimates `lambda_c` for each threshold in `cs` from one set of `n`
/// cycles, so the estimates are exactly nonincreasing in `c`.
pub fn size_biased_tails<R: Rng + ?Sized>(
    model: &CycleModel,
    a: f64,
    cs: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<SizeBiasedTail>> {
    if n < 1000 {
        return Err(RegenError::Validation(format!("need n >= 1000 samples, got {n}")));
    }
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let s = cycle_statistics(&model.sample_cycle(rng), a, None)?;
            Ok((s.xi, s.y))
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean_xi = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    Ok(cs
        .iter()
        .map(|&c| {
            let num = pairs.iter().filter(|p| p.1 > c).map(|p| p.0).sum::<f64>() / nf;
            let lambda = num / mean_xi;
            // ratio estimator: Var(X - lambda W) / (n W_bar^2)
            let var = pairs
                .iter()
                .map(|&(xi, y)| {
                    let x = if y > c { xi } else { 0.0 };
                    (x - lambda * xi).powi(2)
                })
                .sum::<f64>()
                / (nf - 1.0);
            SizeBiasedTail {
                c,
                lambda,
                se: (var / nf).sqrt() / mean_xi,
            }
        })
        .collect())
}

/// Single-threshold form of [`size_biased_tails`].
pub fn size_biased_tail<R: Rng + ?Sized>(
    model: &CycleModel,
    a: f64,
    c: f64,
    n: usize,
    rng: &mut R,
) -> Result<SizeBiasedTail> {
    Ok(size_biased_tails(model, a, &[c], n, rng)?[0])
}
