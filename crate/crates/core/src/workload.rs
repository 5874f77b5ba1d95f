//! Open-workload load generation.
//!
//! A [`LoadProfile`] emulates `sensors` devices that each emit one reading
//! every `emit_interval`, independent of how fast the system consumes them.
//! Each sensor starts at a seeded random phase in `[0, emit_interval)` so
//! that sensors do not all fire at the same instant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use thiserror::Error;

use crate::time::Micros;

/// Upper bound (exclusive) of emitted sensor values.
pub const VALUE_RANGE: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("emit interval must be positive and representable in microseconds")]
    InvalidInterval,
    #[error("duration must be non-negative and representable in microseconds")]
    InvalidDuration,
    #[error("expected {expected} phase offsets, got {actual}")]
    PhaseCount { expected: usize, actual: usize },
    #[error("phase offset {0} outside [0, emit interval)")]
    PhaseOutOfRange(Micros),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadProfile {
    sensors: u32,
    emit_interval: Micros,
    duration: Micros,
    seed: u64,
}

impl LoadProfile {
    pub fn new(
        sensors: u32,
        emit_interval_s: Decimal,
        duration_s: Decimal,
        seed: u64,
    ) -> Result<Self, WorkloadError> {
        let emit_interval =
            Micros::from_decimal_secs(emit_interval_s).ok_or(WorkloadError::InvalidInterval)?;
        let duration = Micros::from_decimal_secs(duration_s).ok_or(WorkloadError::InvalidDuration)?;
        Self::from_micros(sensors, emit_interval, duration, seed)
    }

    pub fn from_micros(
        sensors: u32,
        emit_interval: Micros,
        duration: Micros,
        seed: u64,
    ) -> Result<Self, WorkloadError> {
        if emit_interval.0 <= 0 {
            return Err(WorkloadError::InvalidInterval);
        }
        if duration.0 < 0 {
            return Err(WorkloadError::InvalidDuration);
        }
        Ok(LoadProfile { sensors, emit_interval, duration, seed })
    }

    /// One sensor per second for `duration_s` seconds: sensor count equals
    /// request rate.
    pub fn per_second(sensors: u32, duration_s: i64, seed: u64) -> Result<Self, WorkloadError> {
        Self::from_micros(sensors, Micros::from_secs(1), Micros::from_secs(duration_s), seed)
    }

    pub fn sensors(&self) -> u32 {
        self.sensors
    }

    pub fn emit_interval(&self) -> Micros {
        self.emit_interval
    }

    pub fn duration(&self) -> Micros {
        self.duration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Aggregate arrival rate in events per second.
pub fn arrival_rate(profile: &LoadProfile) -> Decimal {
    Decimal::from(profile.sensors) / profile.emit_interval.as_decimal_secs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub sensor_id: String,
    pub timestamp: Micros,
    pub value: f64,
}

impl Event {
    pub fn new(sensor_id: impl Into<String>, timestamp: Micros, value: f64) -> Self {
        Event { sensor_id: sensor_id.into(), timestamp, value }
    }
}

/// Events ordered by timestamp, ties broken by sensor id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSchedule {
    events: Vec<Event>,
}

impl EventSchedule {
    /// Sorts the given events into schedule order.
    pub fn from_events(mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.sensor_id.cmp(&b.sensor_id))
        });
        EventSchedule { events }
    }

    /// Builds the schedule for explicit per-sensor phase offsets. Values
    /// still come from the profile's seeded generator.
    pub fn from_phases(profile: &LoadProfile, phases: &[Micros]) -> Result<Self, WorkloadError> {
        if phases.len() != profile.sensors as usize {
            return Err(WorkloadError::PhaseCount {
                expected: profile.sensors as usize,
                actual: phases.len(),
            });
        }
        if let Some(bad) = phases
            .iter()
            .find(|p| p.0 < 0 || p.0 >= profile.emit_interval.0)
        {
            return Err(WorkloadError::PhaseOutOfRange(*bad));
        }
        let mut rng = value_rng(profile.seed);
        Ok(build(profile, phases, &mut rng))
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl<'a> IntoIterator for &'a EventSchedule {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;
    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

pub fn sensor_id(index: u32) -> String {
    format!("s{index}")
}

/// Deterministic schedule for the profile: same profile and seed give a
/// bit-identical result.
pub fn generate_schedule(profile: &LoadProfile) -> EventSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let phases: Vec<Micros> = (0..profile.sensors)
        .map(|_| Micros(rng.random_range(0..profile.emit_interval.0)))
        .collect();
    build(profile, &phases, &mut rng)
}

// Values use a stream separate from phase drawing so that `from_phases`
// stays reproducible on its own.
fn value_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn build(profile: &LoadProfile, phases: &[Micros], rng: &mut ChaCha8Rng) -> EventSchedule {
    if profile.duration.0 == 0 {
        return EventSchedule::default();
    }
    let mut events = Vec::with_capacity(expected_len(profile, phases));
    for (k, phase) in phases.iter().enumerate() {
        let id = sensor_id(k as u32);
        let mut t = *phase;
        while t < profile.duration {
            events.push(Event::new(id.clone(), t, rng.random_range(0.0..VALUE_RANGE)));
            t = t + profile.emit_interval;
        }
    }
    EventSchedule::from_events(events)
}

/// Σ_k floor((duration − φ_k) / interval) + 1 over sensors with φ_k < duration.
pub fn expected_len(profile: &LoadProfile, phases: &[Micros]) -> usize {
    phases
        .iter()
        .filter(|p| **p < profile.duration)
        .map(|p| ((profile.duration.0 - p.0 - 1) / profile.emit_interval.0 + 1) as usize)
        .sum()
}
