//! Simulated system under test and the minimum-capacity search.
//!
//! Consumer lag follows a clamped fluid model: every sample interval the
//! backlog grows by the arrivals minus what `m` instances of capacity `c`
//! can process, plus bounded uniform noise, and never drops below zero. A
//! deployment meets the SLO when the least-squares trend of its lag after
//! warmup stays below a threshold.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("instance count must be at least 1, got {0}")]
    InvalidCapacity(u32),
    #[error("need at least 2 samples after warmup, got {0}")]
    InsufficientSamples(usize),
    #[error("no instance count up to {m_max} keeps lag bounded at {load} events/s")]
    NoFeasibleCapacity { load: f64, m_max: u32 },
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("no loads given")]
    EmptyLoads,
}

fn invalid(field: &'static str, reason: &str) -> CapacityError {
    CapacityError::InvalidParameter { field, reason: reason.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SutModel {
    /// Events per second one instance processes.
    pub per_instance_capacity: f64,
    pub warmup_s: f64,
    /// Half-width of the uniform noise added to each lag sample, in events.
    pub noise_amplitude: f64,
    pub sample_interval_s: f64,
}

impl SutModel {
    pub fn new(per_instance_capacity: f64) -> Result<Self, CapacityError> {
        let sut = SutModel {
            per_instance_capacity,
            warmup_s: 60.0,
            noise_amplitude: 0.0,
            sample_interval_s: 1.0,
        };
        sut.validate()?;
        Ok(sut)
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        if !(self.per_instance_capacity > 0.0 && self.per_instance_capacity.is_finite()) {
            return Err(invalid("per_instance_capacity", "must be positive"));
        }
        if !(self.warmup_s >= 0.0) {
            return Err(invalid("warmup_s", "must be non-negative"));
        }
        if !(self.noise_amplitude >= 0.0) {
            return Err(invalid("noise_amplitude", "must be non-negative"));
        }
        if !(self.sample_interval_s > 0.0) {
            return Err(invalid("sample_interval_s", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagSample {
    pub time_s: f64,
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LagSeries {
    samples: Vec<LagSample>,
}

impl LagSeries {
    /// Builds a series; times must be strictly increasing and lag non-negative.
    pub fn new(samples: Vec<LagSample>) -> Result<Self, CapacityError> {
        if samples.windows(2).any(|w| w[1].time_s <= w[0].time_s) {
            return Err(invalid("samples", "times must be strictly increasing"));
        }
        if samples.iter().any(|s| !(s.lag >= 0.0)) {
            return Err(invalid("samples", "lag must be non-negative"));
        }
        Ok(LagSeries { samples })
    }

    pub fn samples(&self) -> &[LagSample] {
        &self.samples
    }
}

pub fn simulate_lag(
    load: f64,
    instances: u32,
    sut: &SutModel,
    duration_s: f64,
    seed: u64,
) -> Result<LagSeries, CapacityError> {
    if instances < 1 {
        return Err(CapacityError::InvalidCapacity(instances));
    }
    if !(duration_s >= sut.sample_interval_s) {
        return Err(invalid("duration_s", "must cover at least one sample interval"));
    }
    let dt = sut.sample_interval_s;
    let drift = dt * (load - f64::from(instances) * sut.per_instance_capacity);
    let steps = (duration_s / dt + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lag = 0.0_f64;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(LagSample { time_s: 0.0, lag });
    for i in 1..=steps {
        let noise = if sut.noise_amplitude > 0.0 {
            rng.random_range(-sut.noise_amplitude..=sut.noise_amplitude)
        } else {
            0.0
        };
        lag = (lag + drift + noise).max(0.0);
        samples.push(LagSample { time_s: i as f64 * dt, lag });
    }
    Ok(LagSeries { samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SloPolicy {
    /// Largest admissible lag trend, events per second.
    pub max_lag_trend: f64,
    pub warmup_s: f64,
}

/// How the trend threshold is derived for a given load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendLimit {
    Absolute(f64),
    /// Threshold is this fraction of the arrival rate (per second).
    FractionOfLoad(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SloRule {
    pub limit: TrendLimit,
    pub warmup_s: f64,
}

impl Default for SloRule {
    fn default() -> Self {
        SloRule { limit: TrendLimit::FractionOfLoad(0.1), warmup_s: 60.0 }
    }
}

impl SloRule {
    pub fn policy_for(&self, load: f64) -> SloPolicy {
        let max_lag_trend = match self.limit {
            TrendLimit::Absolute(v) => v,
            TrendLimit::FractionOfLoad(f) => f * load,
        };
        SloPolicy { max_lag_trend, warmup_s: self.warmup_s }
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        let v = match self.limit {
            TrendLimit::Absolute(v) | TrendLimit::FractionOfLoad(v) => v,
        };
        if !(v >= 0.0) {
            return Err(invalid("max_lag_trend", "must be non-negative"));
        }
        if !(self.warmup_s >= 0.0) {
            return Err(invalid("warmup_s", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SloVerdict {
    pub pass: bool,
    pub slope: f64,
}

/// Ordinary least-squares slope of `y` over `x`.
pub fn ols_slope(points: impl Iterator<Item = (f64, f64)> + Clone) -> Option<f64> {
    let (n, sx, sy) = points
        .clone()
        .fold((0usize, 0.0, 0.0), |(n, sx, sy), (x, y)| (n + 1, sx + x, sy + y));
    if n < 2 {
        return None;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (sxy, sxx) = points.fold((0.0, 0.0), |(sxy, sxx), (x, y)| {
        let dx = x - mx;
        (sxy + dx * (y - my), sxx + dx * dx)
    });
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn slo_check(series: &LagSeries, policy: &SloPolicy) -> Result<SloVerdict, CapacityError> {
    let post = series
        .samples
        .iter()
        .filter(|s| s.time_s >= policy.warmup_s)
        .map(|s| (s.time_s, s.lag));
    let count = post.clone().count();
    let slope = ols_slope(post).ok_or(CapacityError::InsufficientSamples(count))?;
    Ok(SloVerdict { pass: slope <= policy.max_lag_trend, slope })
}

/// Seed for one probe, independent of probe order.
pub fn probe_seed(seed: u64, load: f64, instances: u32) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let golden = 0x9e37_79b9_7f4a_7c15_u64;
    let a = mix(seed.wrapping_add(golden));
    let b = mix(a ^ load.to_bits().wrapping_add(golden));
    mix(b ^ u64::from(instances).wrapping_add(golden))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub instances: u32,
    pub slope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    pub load: f64,
    pub m_star: u32,
    /// Every probed instance count, in probe order.
    pub probes: Vec<Probe>,
}

/// Smallest instance count in `1..=m_max` whose simulated lag meets the SLO.
///
/// Starts at `ceil(load / c)` and walks down while probes pass, or up until
/// one passes. With a noiseless model feasibility is monotone in `m`, so
/// this agrees with a full scan.
pub fn find_min_instances(
    load: f64,
    sut: &SutModel,
    policy: &SloPolicy,
    m_max: u32,
    duration_s: f64,
    seed: u64,
) -> Result<CapacityResult, CapacityError> {
    if m_max < 1 {
        return Err(CapacityError::InvalidCapacity(m_max));
    }
    let mut probes = Vec::new();
    let mut probe = |m: u32| -> Result<bool, CapacityError> {
        let series = simulate_lag(load, m, sut, duration_s, probe_seed(seed, load, m))?;
        let verdict = slo_check(&series, policy)?;
        probes.push(Probe { instances: m, slope: verdict.slope, pass: verdict.pass });
        Ok(verdict.pass)
    };

    let start = ((load / sut.per_instance_capacity).ceil() as u32).clamp(1, m_max);
    let m_star = if probe(start)? {
        let mut best = start;
        while best > 1 && probe(best - 1)? {
            best -= 1;
        }
        best
    } else {
        let mut m = start;
        loop {
            if m == m_max {
                return Err(CapacityError::NoFeasibleCapacity { load, m_max });
            }
            m += 1;
            if probe(m)? {
                break m;
            }
        }
    };
    Ok(CapacityResult { load, m_star, probes })
}

/// Search parameters shared by every load of a capacity profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacitySearch {
    pub sut: SutModel,
    pub rule: SloRule,
    pub m_max: u32,
    pub duration_s: f64,
    pub seed: u64,
}

impl CapacitySearch {
    pub fn new(sut: SutModel) -> Self {
        CapacitySearch { sut, rule: SloRule::default(), m_max: 64, duration_s: 600.0, seed: 0 }
    }

    pub fn run(&self, load: f64) -> Result<CapacityResult, CapacityError> {
        let policy = self.rule.policy_for(load);
        find_min_instances(load, &self.sut, &policy, self.m_max, self.duration_s, self.seed)
    }
}

/// Minimum instances for each load, in input order.
pub fn capacity_profile(
    loads: &[f64],
    search: &CapacitySearch,
) -> Result<Vec<CapacityResult>, CapacityError> {
    if loads.is_empty() {
        return Err(CapacityError::EmptyLoads);
    }
    loads.iter().map(|l| search.run(*l)).collect()
}

pub const CAPACITY_CSV_HEADER: [&str; 4] = ["load", "m_probed", "slope", "verdict"];

/// Audit trail: one row per probe.
pub fn write_capacity_csv<W: io::Write>(out: W, results: &[CapacityResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CAPACITY_CSV_HEADER)?;
    for r in results {
        for p in &r.probes {
            w.write_record([
                r.load.to_string(),
                p.instances.to_string(),
                p.slope.to_string(),
                if p.pass { "pass" } else { "fail" }.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(c: f64) -> SutModel {
        SutModel::new(c).unwrap()
    }

    #[test]
    fn overprovisioned_lag_stays_zero() {
        let s = simulate_lag(100.0, 2, &noiseless(100.0), 120.0, 1).unwrap();
        assert!(s.samples().iter().all(|x| x.lag == 0.0));
        assert_eq!(s.samples().len(), 121);
    }

    #[test]
    fn underprovisioned_lag_is_linear() {
        let s = simulate_lag(100.0, 1, &noiseless(80.0), 120.0, 1).unwrap();
        for x in s.samples() {
            assert_eq!(x.lag, 20.0 * x.time_s);
        }
    }

    #[test]
    fn noisy_series_is_deterministic() {
        let sut = SutModel { noise_amplitude: 5.0, ..noiseless(100.0) };
        let a = simulate_lag(150.0, 1, &sut, 300.0, 42).unwrap();
        let b = simulate_lag(150.0, 1, &sut, 300.0, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_lag(150.0, 1, &sut, 300.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_rejects_zero_instances() {
        assert_eq!(
            simulate_lag(1.0, 0, &noiseless(1.0), 10.0, 0),
            Err(CapacityError::InvalidCapacity(0))
        );
    }

    #[test]
    fn slo_examples() {
        let policy = SloPolicy { max_lag_trend: 0.0, warmup_s: 0.0 };
        let flat = LagSeries::new(
            (0..10).map(|i| LagSample { time_s: i as f64, lag: 7.0 }).collect(),
        )
        .unwrap();
        let v = slo_check(&flat, &policy).unwrap();
        assert_eq!((v.slope, v.pass), (0.0, true));

        let line = simulate_lag(100.0, 1, &noiseless(80.0), 120.0, 0).unwrap();
        let v = slo_check(&line, &SloPolicy { max_lag_trend: 1.0, warmup_s: 60.0 }).unwrap();
        assert!((v.slope - 20.0).abs() <= 20.0 * 1e-9);
        assert!(!v.pass);

        let short = LagSeries::new(vec![
            LagSample { time_s: 0.0, lag: 0.0 },
            LagSample { time_s: 70.0, lag: 1.0 },
        ])
        .unwrap();
        assert_eq!(
            slo_check(&short, &SloPolicy { max_lag_trend: 1.0, warmup_s: 60.0 }),
            Err(CapacityError::InsufficientSamples(1))
        );
    }

    #[test]
    fn series_validation() {
        let bad = vec![LagSample { time_s: 1.0, lag: 0.0 }, LagSample { time_s: 1.0, lag: 0.0 }];
        assert!(LagSeries::new(bad).is_err());
        assert!(LagSeries::new(vec![LagSample { time_s: 0.0, lag: -1.0 }]).is_err());
    }

    #[test]
    fn min_instances_examples() {
        let sut = noiseless(100.0);
        let rule = SloRule::default();
        let r = find_min_instances(250.0, &sut, &rule.policy_for(250.0), 32, 300.0, 0).unwrap();
        assert_eq!(r.m_star, 3);
        let r = find_min_instances(0.0, &sut, &rule.policy_for(0.0), 32, 300.0, 0).unwrap();
        assert_eq!(r.m_star, 1);
        let strict = SloPolicy { max_lag_trend: 0.0, warmup_s: 60.0 };
        let r = find_min_instances(100.0, &sut, &strict, 32, 300.0, 0).unwrap();
        assert_eq!(r.m_star, 1);
        assert_eq!(r.probes[0].slope, 0.0);
    }

    #[test]
    fn infeasible_load() {
        let sut = noiseless(100.0);
        let err = find_min_instances(1000.0, &sut, &SloRule::default().policy_for(1000.0), 4, 300.0, 0)
            .unwrap_err();
        assert_eq!(err, CapacityError::NoFeasibleCapacity { load: 1000.0, m_max: 4 });
    }

    #[test]
    fn profile_examples() {
        let search = CapacitySearch { duration_s: 300.0, ..CapacitySearch::new(noiseless(100.0)) };
        let ms: Vec<_> = capacity_profile(&[100.0, 200.0, 300.0], &search)
            .unwrap()
            .iter()
            .map(|r| r.m_star)
            .collect();
        assert_eq!(ms, vec![1, 2, 3]);
        assert_eq!(capacity_profile(&[50.0], &search).unwrap().len(), 1);
        let small = CapacitySearch { m_max: 2, ..search };
        assert_eq!(
            capacity_profile(&[100.0, 500.0, 900.0], &small),
            Err(CapacityError::NoFeasibleCapacity { load: 500.0, m_max: 2 })
        );
        assert_eq!(capacity_profile(&[], &search), Err(CapacityError::EmptyLoads));
    }

    #[test]
    fn probe_seeds_differ() {
        assert_ne!(probe_seed(1, 100.0, 1), probe_seed(1, 100.0, 2));
        assert_ne!(probe_seed(1, 100.0, 1), probe_seed(1, 200.0, 1));
        assert_ne!(probe_seed(1, 100.0, 1), probe_seed(2, 100.0, 1));
        assert_eq!(probe_seed(1, 100.0, 1), probe_seed(1, 100.0, 1));
    }

    #[test]
    fn model_validation() {
        assert!(SutModel::new(0.0).is_err());
        let bad = SutModel { sample_interval_s: 0.0, ..noiseless(1.0) };
        assert!(bad.validate().is_err());
    }
}
