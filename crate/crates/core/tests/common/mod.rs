use evcost::time::Micros;
use evcost::usecase::{aggregate, Aggregate, WindowSpec};
use evcost::workload::EventSchedule;

/// Scans every hop-aligned window overlapping the schedule and aggregates
/// the events that fall inside it, one (window, key) pair at a time.
pub fn oracle(schedule: &EventSchedule, spec: &WindowSpec) -> Vec<Aggregate> {
    let events = schedule.events();
    let Some(first) = events.first() else { return Vec::new() };
    let last = events.last().unwrap();
    let (size, hop) = (spec.size().0, spec.hop().0);
    let mut keys: Vec<&str> = events.iter().map(|e| e.sensor_id.as_str()).collect();
    keys.sort();
    keys.dedup();

    let mut out = Vec::new();
    let mut k = (first.timestamp.0 - size).div_euclid(hop);
    while k * hop <= last.timestamp.0 {
        let start = k * hop;
        for key in &keys {
            let values: Vec<f64> = events
                .iter()
                .filter(|e| e.sensor_id == *key && e.timestamp.0 >= start && e.timestamp.0 < start + size)
                .map(|e| e.value)
                .collect();
            if let Ok(stats) = aggregate(&values) {
                out.push(Aggregate::new(Micros(start), *key, stats));
            }
        }
        k += 1;
    }
    out
}
