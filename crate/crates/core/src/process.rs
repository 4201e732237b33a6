//! Assembling `Z(t)` from an i.i.d. cycle stream.
//!
//! Two ways in: [`simulate_trajectory`] materializes every cycle up to a
//! horizon so one trajectory can answer many queries, and [`walk`] streams
//! cycles past a sorted list of query times without storing them.

use rand::Rng;
use serde::Serialize;

use crate::cycle_models::{CycleModel, CycleSample};
use crate::error::{RegenError, Result};

/// Default cap on cycles per trajectory.
pub const DEFAULT_MAX_CYCLES: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTrajectory {
    cycles: Vec<CycleSample>,
    /// `T_0 = 0, T_1, ..., T_n`
    cum_times: Vec<f64>,
    /// `V_0 = 0, V_1, ..., V_n` with `V_k = Z(T_k)`
    cum_values: Vec<f64>,
    horizon: f64,
}

/// Simulates cycles until the renewal epoch passes `horizon`.
///
/// The returned trajectory holds `tau(horizon) = N(horizon) + 1` cycles.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    model: &CycleModel,
    horizon: f64,
    rng: &mut R,
    max_cycles: u64,
) -> Result<RenewalTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(RegenError::Validation(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let mut cycles = Vec::new();
    let mut cum_times = vec![0.0];
    let mut cum_values = vec![0.0];
    let (mut t, mut v) = (0.0, 0.0);
    while t <= horizon {
        if cycles.len() as u64 >= max_cycles {
            return Err(RegenError::Budget { limit: max_cycles });
        }
        let c = model.sample_cycle(rng);
        t += c.xi();
        v += c.eta();
        cum_times.push(t);
        cum_values.push(v);
        cycles.push(c);
    }
    Ok(RenewalTrajectory {
        cycles,
        cum_times,
        cum_values,
        horizon,
    })
}

impl RenewalTrajectory {
    pub fn cycles(&self) -> &[CycleSample] {
        &self.cycles
    }

    pub fn cum_times(&self) -> &[f64] {
        &self.cum_times
    }

    pub fn cum_values(&self) -> &[f64] {
        &self.cum_values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(RegenError::Domain(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `N(t) = max{n : T_n <= t}`.
    pub fn count_n(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.cum_times.partition_point(|&tn| tn <= t) - 1)
    }

    /// `tau(t) = N(t) + 1`, the index of the cycle covering `t`.
    pub fn tau(&self, t: f64) -> Result<usize> {
        Ok(self.count_n(t)? + 1)
    }

    /// `Z(t) = V_{N(t)} + path_{N(t)+1}(t - T_{N(t)})`.
    pub fn evaluate_z(&self, t: f64) -> Result<f64> {
        let n = self.count_n(t)?;
        let c = &self.cycles[n];
        Ok(self.cum_values[n] + c.path().eval(local_time(t, self.cum_times[n], c.xi())))
    }

    /// The cycle in progress at time `t` (cycle number `tau(t)`).
    pub fn covering_cycle(&self, t: f64) -> Result<&CycleSample> {
        let n = self.count_n(t)?;
        Ok(&self.cycles[n])
    }
}

/// `t - T_n`, kept strictly inside the cycle when rounding of the cumulative
/// sum would push it onto the end point.
#[inline]
fn local_time(t: f64, start: f64, xi: f64) -> f64 {
    let s = t - start;
    if s < xi {
        s
    } else {
        xi.next_down()
    }
}

/// Per-cycle functionals consumed by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleStats {
    pub xi: f64,
    /// `Z(T_1) - Z(T_0)`
    pub eta: f64,
    /// sup of `|path|` over `[0, xi]`
    pub m: f64,
    /// sup of `|path|` over `[0, xi)`
    pub m_open: f64,
    pub integral: f64,
    pub lattice_sum: Option<f64>,
    /// `m + |a| xi`
    pub y: f64,
}

impl CycleStats {
    /// `eta - a xi`, the centered cycle increment.
    pub fn residual(&self, a: f64) -> f64 {
        self.eta - a * self.xi
    }
}

pub fn cycle_statistics(sample: &CycleSample, a: f64, span: Option<f64>) -> Result<CycleStats> {
    let lattice_sum = span.map(|d| sample.lattice_sum(d)).transpose()?;
    let m = sample.sup_abs();
    Ok(CycleStats {
        xi: sample.xi(),
        eta: sample.eta(),
        m,
        m_open: sample.sup_abs_open(),
        integral: sample.integral(),
        lattice_sum,
        y: m + a.abs() * sample.xi(),
    })
}

/// State of the process at one query time, as seen by [`walk`].
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub t: f64,
    pub z: f64,
    /// `N(t)`
    pub count: u64,
    /// `T_{N(t)}`
    pub epoch: f64,
    /// `V_{N(t)} = Z(T_{N(t)})`
    pub value_at_epoch: f64,
    /// The cycle covering `t`.
    pub cover: CycleSample,
}

impl Probe {
    /// `T_{tau(t)} - t`, the residual life at `t`.
    pub fn overshoot_time(&self) -> f64 {
        self.epoch + self.cover.xi() - self.t
    }

    /// `Z(T_{tau(t)}) - Z(t)`.
    pub fn overshoot_value(&self) -> f64 {
        self.value_at_epoch + self.cover.eta() - self.z
    }
}

/// Streams cycles of `model` past the nondecreasing query `times` and
/// returns one [`Probe`] per query. Memory use does not grow with the
/// number of cycles.
pub fn walk<R: Rng + ?Sized>(
    model: &CycleModel,
    times: &[f64],
    rng: &mut R,
    max_cycles: u64,
) -> Result<Vec<Probe>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(RegenError::Validation(
            "query times must be nonnegative and nondecreasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(times.len());
    let (mut epoch, mut value) = (0.0f64, 0.0f64);
    let mut count = 0u64;
    let mut next = 0;
    while next < times.len() {
        if count >= max_cycles {
            return Err(RegenError::Budget { limit: max_cycles });
        }
        let c = model.sample_cycle(rng);
        let end = epoch + c.xi();
        while next < times.len() && times[next] < end {
            let t = times[next];
            out.push(Probe {
                t,
                z: value + c.path().eval(local_time(t, epoch, c.xi())),
                count,
                epoch,
                value_at_epoch: value,
                cover: c.clone(),
            });
            next += 1;
        }
        epoch = end;
        value += c.eta();
        count += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_models::center_model;
    use crate::stream::StreamSeed;

    fn rng(i: u64) -> crate::stream::Stream {
        StreamSeed::new(99).stream(i)
    }

    #[test]
    fn deterministic_epochs() {
        let m = CycleModel::deterministic_drift(1.0, 1.0).unwrap();
        let tr = simulate_trajectory(&m, 10.0, &mut rng(0), 1000).unwrap();
        assert_eq!(tr.cycles().len(), 11);
        for (n, t) in tr.cum_times().iter().enumerate() {
            assert_eq!(*t, n as f64);
        }
        assert_eq!(tr.count_n(2.5).unwrap(), 2);
        assert_eq!(tr.count_n(0.0).unwrap(), 0);
        assert_eq!(tr.count_n(3.0).unwrap(), 3);
        assert_eq!(tr.tau(3.0).unwrap(), 4);
    }

    #[test]
    fn linear_drift_is_exact() {
        let m = CycleModel::deterministic_drift(1.0, 0.5).unwrap();
        let tr = simulate_trajectory(&m, 20.0, &mut rng(0), 1000).unwrap();
        for k in 0..=80 {
            let t = k as f64 * 0.25;
            assert_eq!(tr.evaluate_z(t).unwrap(), 0.5 * t);
        }
    }

    #[test]
    fn counting_equals_n() {
        let m = CycleModel::uniform_count(2.0).unwrap();
        let tr = simulate_trajectory(&m, 50.0, &mut rng(1), 10_000).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.1;
            assert_eq!(tr.evaluate_z(t).unwrap(), tr.count_n(t).unwrap() as f64);
        }
        // exactly at an epoch the jump has happened
        let t3 = tr.cum_times()[3];
        assert_eq!(tr.evaluate_z(t3).unwrap(), 3.0);
    }

    #[test]
    fn counterexample_vanishes_at_epochs() {
        let m = CycleModel::pareto_counterexample(1.5, 1.0).unwrap();
        let tr = simulate_trajectory(&m, 200.0, &mut rng(2), 10_000).unwrap();
        for &t in tr.cum_times().iter().filter(|&&t| t <= 200.0) {
            assert_eq!(tr.evaluate_z(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn horizon_coverage_and_errors() {
        let m = CycleModel::poisson_count(2.0).unwrap();
        let tr = simulate_trajectory(&m, 30.0, &mut rng(3), 10_000).unwrap();
        let ct = tr.cum_times();
        assert!(ct[ct.len() - 1] > 30.0);
        assert!(ct[ct.len() - 2] <= 30.0);
        assert_eq!(tr.cycles().len(), tr.tau(30.0).unwrap());
        assert!(matches!(tr.count_n(30.5), Err(RegenError::Domain(_))));
        assert!(matches!(tr.evaluate_z(31.0), Err(RegenError::Domain(_))));
        assert!(simulate_trajectory(&m, 0.0, &mut rng(3), 10).is_err());
        assert_eq!(
            simulate_trajectory(&m, 1000.0, &mut rng(3), 10),
            Err(RegenError::Budget { limit: 10 })
        );
    }

    #[test]
    fn poisson_cycle_rate() {
        let m = CycleModel::poisson_count(2.0).unwrap();
        let seed = StreamSeed::new(4);
        let counts: Vec<f64> = (0..200)
            .map(|i| {
                let tr = simulate_trajectory(&m, 1000.0, &mut seed.stream(i), 1 << 20).unwrap();
                tr.count_n(1000.0).unwrap() as f64 / 1000.0
            })
            .collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sd / n.sqrt(), "{mean}");
    }

    #[test]
    fn determinism() {
        let m = CycleModel::heavy_spike(1.0).unwrap();
        let a = simulate_trajectory(&m, 100.0, &mut rng(5), 10_000).unwrap();
        let b = simulate_trajectory(&m, 100.0, &mut rng(5), 10_000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn walk_matches_trajectory() {
        let m = CycleModel::heavy_spike(1.0).unwrap();
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.5).collect();
        let tr = simulate_trajectory(&m, 100.0, &mut rng(6), 10_000).unwrap();
        let probes = walk(&m, &times, &mut rng(6), 10_000).unwrap();
        for p in &probes {
            assert_eq!(p.z, tr.evaluate_z(p.t).unwrap());
            assert_eq!(p.count as usize, tr.count_n(p.t).unwrap());
            assert_eq!(&p.cover, tr.covering_cycle(p.t).unwrap());
        }
        assert!(walk(&m, &[2.0, 1.0], &mut rng(6), 10).is_err());
    }

    #[test]
    fn cycle_statistics_examples() {
        use crate::cycle_models::{CyclePath, Interpolation};
        let c = CycleSample::new(
            2.0,
            CyclePath::new([(0.0, 0.0), (2.0, 1.0)], Interpolation::StepRightContinuous).unwrap(),
        )
        .unwrap();
        let s = cycle_statistics(&c, 0.5, None).unwrap();
        assert_eq!((s.eta, s.m, s.m_open, s.integral, s.y), (1.0, 1.0, 0.0, 0.0, 2.0));

        let b = 1.75;
        let l = CycleModel::deterministic_drift(1.0, b).unwrap().sample_cycle(&mut rng(0));
        let s = cycle_statistics(&l, b, None).unwrap();
        assert_eq!(s.eta, b);
        assert_eq!(s.residual(b), 0.0);

        let spike = CycleSample::new(
            2.0,
            CyclePath::new(
                [(0.0, 0.0), (1.0, 7.0), (2.0, 0.0)],
                Interpolation::StepRightContinuous,
            )
            .unwrap(),
        )
        .unwrap();
        let s = cycle_statistics(&spike, 0.0, None).unwrap();
        assert_eq!((s.m, s.eta, s.y), (7.0, 0.0, 7.0));

        assert!(cycle_statistics(&c, 0.0, Some(0.75)).is_err());
        assert_eq!(cycle_statistics(&c, 0.0, Some(0.5)).unwrap().lattice_sum, Some(0.0));
    }

    #[test]
    fn centering_examples() {
        let b = 2.5;
        let m = CycleModel::deterministic_drift(1.0, b).unwrap();
        let c = center_model(&m, b).sample_cycle(&mut rng(0));
        assert_eq!(c.sup_abs(), 0.0);

        let p = CycleModel::poisson_count(2.0).unwrap();
        let cp = center_model(&p, 2.0);
        let mut r1 = rng(7);
        let mut r2 = rng(7);
        let mut sum = 0.0;
        let n = 10_000;
        for _ in 0..n {
            let raw = p.sample_cycle(&mut r1);
            let cen = cp.sample_cycle(&mut r2);
            assert_eq!(raw.xi(), cen.xi());
            assert!(cen.sup_abs() <= raw.sup_abs() + 2.0 * raw.xi());
            assert_eq!(cen.eta(), 1.0 - 2.0 * raw.xi());
            sum += cen.eta();
        }
        assert!((sum / n as f64).abs() < 0.05);
    }
}
