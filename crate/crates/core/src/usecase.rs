//! Reference executors for the two benchmark applications.
//!
//! * UC1 transforms each event into a database record and persists it.
//! * UC2 aggregates events per sensor over hopping windows.
//!
//! UC2 runs on one of two state backends. The function backend keeps every
//! open window as a document in an external store and performs a
//! read-modify-write on each window the event belongs to. The stream
//! processing backend keeps window state in operator memory. Both emit the
//! same aggregates; only the counted store accesses differ.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::time::Micros;
use crate::workload::{Event, EventSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UsecaseError {
    #[error("cannot aggregate an empty window")]
    EmptyWindow,
    #[error("invalid window: {0}")]
    InvalidWindow(&'static str),
    #[error("sink rejected record `{key}`: {reason}")]
    Sink { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UseCase {
    Uc1,
    Uc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Faas,
    Dsp,
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UseCase::Uc1 => "uc1",
            UseCase::Uc2 => "uc2",
        })
    }
}

impl FromStr for UseCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uc1" => Ok(UseCase::Uc1),
            "uc2" => Ok(UseCase::Uc2),
            other => Err(format!("unknown use case `{other}` (expected uc1 or uc2)")),
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::Faas => "faas",
            Platform::Dsp => "dsp",
        })
    }
}

impl FromStr for Platform {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faas" => Ok(Platform::Faas),
            "dsp" => Ok(Platform::Dsp),
            other => Err(format!("unknown platform `{other}` (expected faas or dsp)")),
        }
    }
}

/// Hopping window of `size` advancing every `hop`; `size` must be a whole
/// multiple of `hop`. Windows are aligned to time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    size: Micros,
    hop: Micros,
}

impl WindowSpec {
    pub fn new(size: Micros, hop: Micros) -> Result<Self, UsecaseError> {
        if hop.0 <= 0 {
            return Err(UsecaseError::InvalidWindow("hop must be positive"));
        }
        if hop > size {
            return Err(UsecaseError::InvalidWindow("hop must not exceed size"));
        }
        if size.0 % hop.0 != 0 {
            return Err(UsecaseError::InvalidWindow("size must be a multiple of hop"));
        }
        Ok(WindowSpec { size, hop })
    }

    pub fn from_decimal_secs(size_s: Decimal, hop_s: Decimal) -> Result<Self, UsecaseError> {
        let size = Micros::from_decimal_secs(size_s)
            .ok_or(UsecaseError::InvalidWindow("size not representable"))?;
        let hop = Micros::from_decimal_secs(hop_s)
            .ok_or(UsecaseError::InvalidWindow("hop not representable"))?;
        Self::new(size, hop)
    }

    pub fn size(&self) -> Micros {
        self.size
    }

    pub fn hop(&self) -> Micros {
        self.hop
    }

    pub fn windows_per_event(&self) -> u32 {
        (self.size.0 / self.hop.0) as u32
    }
}

impl Default for WindowSpec {
    /// 30 s windows starting every 3 s.
    fn default() -> Self {
        WindowSpec { size: Micros::from_secs(30), hop: Micros::from_secs(3) }
    }
}

/// Starts of every window containing `t`, ascending.
pub fn windows_for(t: Micros, spec: &WindowSpec) -> Vec<Micros> {
    let last = Micros(t.floor_div(spec.hop) * spec.hop.0);
    let n = spec.windows_per_event() as i64;
    (0..n)
        .map(|i| Micros(last.0 - (n - 1 - i) * spec.hop.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreRecord {
    pub key: String,
    pub value: f64,
    pub write_units: u32,
}

pub fn transform(event: &Event) -> StoreRecord {
    StoreRecord {
        key: format!("{}#{}", event.sensor_id, event.timestamp),
        value: event.value,
        write_units: 1,
    }
}

/// Summary statistics over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn single(v: f64) -> Self {
        Stats { count: 1, sum: v, min: v, max: v }
    }

    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

pub fn aggregate(values: &[f64]) -> Result<Stats, UsecaseError> {
    let (first, rest) = values.split_first().ok_or(UsecaseError::EmptyWindow)?;
    let mut stats = Stats::single(*first);
    for v in rest {
        stats.push(*v);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub window_start: Micros,
    pub key: String,
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Aggregate {
    pub fn new(window_start: Micros, key: impl Into<String>, stats: Stats) -> Self {
        Aggregate {
            window_start,
            key: key.into(),
            count: stats.count,
            sum: stats.sum,
            min: stats.min,
            max: stats.max,
            mean: stats.mean(),
        }
    }
}

pub const AGGREGATE_CSV_HEADER: [&str; 7] =
    ["key", "window_start", "count", "sum", "min", "max", "mean"];

/// Writes aggregates as CSV lines `key,window_start,count,sum,min,max,mean`.
pub fn write_aggregates_csv<W: io::Write>(out: W, aggregates: &[Aggregate]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_CSV_HEADER)?;
    for a in aggregates {
        w.write_record([
            a.key.clone(),
            a.window_start.to_string(),
            a.count.to_string(),
            a.sum.to_string(),
            a.min.to_string(),
            a.max.to_string(),
            a.mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-event resource accesses of one deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AccessProfile {
    pub db_reads_per_event: u32,
    pub db_writes_per_event: u32,
    pub messages_per_event: u32,
}

impl AccessProfile {
    pub const fn new(reads: u32, writes: u32, messages: u32) -> Self {
        AccessProfile {
            db_reads_per_event: reads,
            db_writes_per_event: writes,
            messages_per_event: messages,
        }
    }
}

/// Access counts depend only on use case, platform and window shape.
pub fn access_profile(use_case: UseCase, platform: Platform, spec: &WindowSpec) -> AccessProfile {
    match (use_case, platform) {
        (UseCase::Uc1, _) => AccessProfile::new(0, 1, 1),
        (UseCase::Uc2, Platform::Faas) => {
            let w = spec.windows_per_event();
            AccessProfile::new(w, w, 1)
        }
        (UseCase::Uc2, Platform::Dsp) => AccessProfile::new(0, 0, 1),
    }
}

/// Totals observed while executing a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AccessCounts {
    pub events: u64,
    pub reads: u64,
    pub writes: u64,
    pub messages: u64,
}

pub trait RecordSink {
    fn write(&mut self, record: StoreRecord) -> Result<(), UsecaseError>;
}

impl RecordSink for Vec<StoreRecord> {
    fn write(&mut self, record: StoreRecord) -> Result<(), UsecaseError> {
        self.push(record);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uc1Outcome {
    pub records_written: u64,
    pub access: AccessProfile,
    pub counts: AccessCounts,
}

pub fn run_uc1<S: RecordSink + ?Sized>(
    schedule: &EventSchedule,
    sink: &mut S,
) -> Result<Uc1Outcome, UsecaseError> {
    let mut counts = AccessCounts::default();
    for event in schedule {
        counts.events += 1;
        counts.messages += 1;
        let record = transform(event);
        counts.writes += u64::from(record.write_units);
        sink.write(record)?;
    }
    Ok(Uc1Outcome {
        records_written: counts.writes,
        access: AccessProfile::new(0, 1, 1),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uc2Outcome {
    pub aggregates: Vec<Aggregate>,
    pub access: AccessProfile,
    pub counts: AccessCounts,
}

type WindowKey = (Micros, String);

trait WindowBackend {
    fn update(&mut self, key: WindowKey, value: f64);
    /// Removes and returns windows starting strictly before `start_bound`.
    fn drain_before(&mut self, start_bound: Micros) -> Vec<(WindowKey, Stats)>;
    fn drain_all(&mut self) -> Vec<(WindowKey, Stats)>;
    fn counts(&self) -> (u64, u64);
}

fn split_before(
    map: &mut BTreeMap<WindowKey, Stats>,
    start_bound: Micros,
) -> Vec<(WindowKey, Stats)> {
    let rest = map.split_off(&(start_bound, String::new()));
    std::mem::replace(map, rest).into_iter().collect()
}

/// Operator-local keyed window state.
#[derive(Default)]
struct LocalState {
    windows: BTreeMap<WindowKey, Stats>,
}

impl WindowBackend for LocalState {
    fn update(&mut self, key: WindowKey, value: f64) {
        self.windows
            .entry(key)
            .and_modify(|s| s.push(value))
            .or_insert_with(|| Stats::single(value));
    }

    fn drain_before(&mut self, start_bound: Micros) -> Vec<(WindowKey, Stats)> {
        split_before(&mut self.windows, start_bound)
    }

    fn drain_all(&mut self) -> Vec<(WindowKey, Stats)> {
        std::mem::take(&mut self.windows).into_iter().collect()
    }

    fn counts(&self) -> (u64, u64) {
        (0, 0)
    }
}

/// One document per (window, key) in an external store. Every update is a
/// counted read followed by a counted write.
#[derive(Default)]
struct DocumentStore {
    docs: BTreeMap<WindowKey, Stats>,
    reads: u64,
    writes: u64,
}

impl DocumentStore {
    fn get(&mut self, key: &WindowKey) -> Option<Stats> {
        self.reads += 1;
        self.docs.get(key).copied()
    }

    fn put(&mut self, key: WindowKey, stats: Stats) {
        self.writes += 1;
        self.docs.insert(key, stats);
    }
}

impl WindowBackend for DocumentStore {
    fn update(&mut self, key: WindowKey, value: f64) {
        let next = match self.get(&key) {
            Some(mut s) => {
                s.push(value);
                s
            }
            None => Stats::single(value),
        };
        self.put(key, next);
    }

    // Emission reads happen on the store side, outside any invocation.
    fn drain_before(&mut self, start_bound: Micros) -> Vec<(WindowKey, Stats)> {
        split_before(&mut self.docs, start_bound)
    }

    fn drain_all(&mut self) -> Vec<(WindowKey, Stats)> {
        std::mem::take(&mut self.docs).into_iter().collect()
    }

    fn counts(&self) -> (u64, u64) {
        (self.reads, self.writes)
    }
}

/// Hopping-window aggregation per sensor.
///
/// A window `[s, s + size)` is emitted once the watermark (maximum event time
/// seen so far) reaches `s + size`; whatever is still open when the input
/// ends is flushed. Windows without events are never emitted. Output is
/// ordered by window start, then key.
pub fn run_uc2(schedule: &EventSchedule, spec: &WindowSpec, platform: Platform) -> Uc2Outcome {
    let mut backend: Box<dyn WindowBackend> = match platform {
        Platform::Faas => Box::<DocumentStore>::default(),
        Platform::Dsp => Box::<LocalState>::default(),
    };
    let mut aggregates = Vec::new();
    let mut counts = AccessCounts::default();
    let emit = |closed: Vec<(WindowKey, Stats)>, out: &mut Vec<Aggregate>| {
        out.extend(closed.into_iter().map(|((start, key), s)| Aggregate::new(start, key, s)));
    };

    for event in schedule {
        counts.events += 1;
        counts.messages += 1;
        for start in windows_for(event.timestamp, spec) {
            backend.update((start, event.sensor_id.clone()), event.value);
        }
        // Windows with start + size <= watermark can no longer receive events.
        let watermark = event.timestamp;
        let bound = Micros(watermark.0 - spec.size.0 + 1);
        emit(backend.drain_before(bound), &mut aggregates);
    }
    emit(backend.drain_all(), &mut aggregates);

    let (reads, writes) = backend.counts();
    counts.reads = reads;
    counts.writes = writes;
    Uc2Outcome {
        aggregates,
        access: access_profile(UseCase::Uc2, platform, spec),
        counts,
    }
}
