//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use evcost::analysis::{break_even, CostCurve};
use evcost::capacity::{
    capacity_profile, find_min_instances, ols_slope, probe_seed, simulate_lag, slo_check, CapacitySearch,
    SloRule, SutModel,
};
use evcost::cli::{cmd_compare, cmd_validate, RunArgs, EXIT_OK};
use evcost::deployment::CostDimension;
use evcost::pricing::load_catalog;
use evcost::scenario::{load_scenario, load_sut_file, LoadedScenario, Overrides};
use evcost::time::Micros;
use evcost::usecase::{run_uc2, windows_for, Platform, WindowSpec};
use evcost::workload::{generate_schedule, LoadProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn scenario(name: &str) -> LoadedScenario {
    load_scenario(&data(&format!("scenarios/{name}.toml")), &Overrides::default()).unwrap()
}

fn curve(name: &str) -> CostCurve {
    scenario(name).scenario.curve().unwrap()
}

fn window_semantics() -> Outcome {
    let spec = WindowSpec::from_decimal_secs(Decimal::from(30), Decimal::from(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let t = Micros(rng.random_range(-1_000_000_000i64..1_000_000_000));
        if windows_for(t, &spec).len() != 10 {
            return outcome(false, format!("event at {t} s maps to {} windows", windows_for(t, &spec).len()));
        }
    }
    let profile = LoadProfile::per_second(5, 120, 3).unwrap();
    let schedule = generate_schedule(&profile);
    let out = run_uc2(&schedule, &spec, Platform::Faas);
    let n = out.counts.events;
    let pass = n > 0
        && out.counts.reads == 10 * n
        && out.counts.writes == 10 * n
        && out.access.db_reads_per_event == 10
        && out.access.db_writes_per_event == 10;
    outcome(pass, format!("{n} invocations, {} reads, {} writes", out.counts.reads, out.counts.writes))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut events = 0;
    for trial in 0..100 {
        let sensors = rng.random_range(1..=10);
        let interval = Micros(rng.random_range(100_000..=5_000_000));
        let duration = Micros(rng.random_range(0..=120_000_000));
        let hop_s = rng.random_range(1..=5);
        let spec = WindowSpec::new(Micros::from_secs(hop_s * rng.random_range(1..=10)), Micros::from_secs(hop_s))
            .unwrap();
        let profile = LoadProfile::from_micros(sensors, interval, duration, rng.random()).unwrap();
        let schedule = generate_schedule(&profile);
        events += schedule.len();
        let expected = common::oracle(&schedule, &spec);
        for platform in [Platform::Faas, Platform::Dsp] {
            if run_uc2(&schedule, &spec, platform).aggregates != expected {
                return outcome(false, format!("trial {trial} differs on {platform}"));
            }
        }
    }
    outcome(true, format!("100 schedules, {events} events"))
}

const SHIPPED_SCENARIOS: [&str; 14] = [
    "uc1-faas-baseline",
    "uc1-faas-go",
    "uc1-faas-nodejs",
    "uc1-faas-pubsub",
    "uc1-faas-aws",
    "uc2-faas-baseline",
    "uc1-dsp-baseline",
    "uc1-dsp-autopilot",
    "uc1-dsp-pubsub",
    "uc1-dsp-aws",
    "uc1-dsp-dataflow",
    "uc2-dsp-baseline",
    "uc2-dsp-autopilot",
    "uc2-dsp-dataflow",
];

fn cost_shape() -> Outcome {
    let mut checked = 0;
    for name in SHIPPED_SCENARIOS {
        let loaded = scenario(name);
        let s = &loaded.scenario;
        match s.platform() {
            Platform::Faas => {
                let doubled = evcost::analysis::Scenario {
                    loads: s.loads.iter().map(|l| l * Decimal::TWO).collect(),
                    ..s.clone()
                };
                let (one, two) = (s.curve().unwrap(), doubled.curve().unwrap());
                for (a, b) in one.points.iter().zip(&two.points) {
                    if (a.cost.total * Decimal::TWO).round_dp(2) != b.cost.total.round_dp(2) {
                        return outcome(false, format!("{name}: C(2*{}) != 2*C({})", a.load, a.load));
                    }
                    checked += 1;
                }
            }
            Platform::Dsp => {
                for p in s.curve().unwrap().points {
                    let c = &p.cost;
                    let sum: Decimal = c.components.values().copied().sum();
                    let parts = c.fixed_part() + c.per_request_part() + c.step_part();
                    let no_faas_terms = c.component(CostDimension::Invocation).is_zero()
                        && c.component(CostDimension::ComputeDuration).is_zero();
                    if sum != c.total || parts != c.total || !no_faas_terms {
                        return outcome(false, format!("{name} at {}: components do not sum to total", p.load));
                    }
                    checked += 1;
                }
            }
        }
    }
    outcome(true, format!("{checked} curve points"))
}

fn crossing(faas: &str, dsp: &str) -> Option<Decimal> {
    break_even(&curve(faas), &curve(dsp)).unwrap().crossing.map(|c| c.load)
}

fn break_even_ordering() -> Outcome {
    let uc1 = crossing("uc1-faas-baseline", "uc1-dsp-baseline");
    let uc2 = crossing("uc2-faas-baseline", "uc2-dsp-baseline");
    let (Some(uc1), Some(uc2)) = (uc1, uc2) else {
        return outcome(false, format!("missing crossing: uc1 {uc1:?}, uc2 {uc2:?}"));
    };
    let ratio = uc1 / uc2;
    let pass = uc2 < uc1 && ratio >= Decimal::from(10);
    outcome(pass, format!("uc1 {:.1} req/s, uc2 {:.2} req/s, ratio {:.1}", uc1, uc2, ratio))
}

fn exhaustive(load: f64, search: &CapacitySearch) -> Option<u32> {
    let policy = search.rule.policy_for(load);
    (1..=search.m_max).find(|m| {
        let s = simulate_lag(load, *m, &search.sut, search.duration_s, probe_seed(search.seed, load, *m)).unwrap();
        slo_check(&s, &policy).unwrap().pass
    })
}

fn capacity_search() -> Outcome {
    let grid: Vec<f64> = (0..=80).map(|i| f64::from(i) * 25.0).chain([1.0, 2.0, 5.0, 1100.0]).collect();
    let mut grid = grid;
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut points = 0;
    for c in [50.0, 100.0, 1100.0] {
        let mut search = CapacitySearch::new(SutModel::new(c).unwrap());
        search.m_max = 64;
        let profile = capacity_profile(&grid, &search).unwrap();
        for r in &profile {
            if exhaustive(r.load, &search) != Some(r.m_star) {
                return outcome(false, format!("c={c}, load {}: search {} vs scan", r.load, r.m_star));
            }
            points += 1;
        }
        if !profile.windows(2).all(|w| w[0].m_star <= w[1].m_star) {
            return outcome(false, format!("c={c}: profile decreases"));
        }
    }
    let eks = load_sut_file(&data("sut/uc1-eks.toml")).unwrap();
    let single = find_min_instances(1100.0, &eks, &SloRule::default().policy_for(1100.0), 64, 600.0, 0)
        .map(|r| r.m_star);
    if single != Ok(1) {
        return outcome(false, format!("uc1-eks at 1100 req/s needs {single:?} instances"));
    }
    outcome(true, format!("{points} grid points, one taskmanager at 1100 req/s"))
}

fn slo_check_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(-1e4..1e4);
        let b: f64 = rng.random_range(-1e3..1e3);
        let n = rng.random_range(10..2000);
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (f64::from(i) * 0.5, a + b * f64::from(i) * 0.5)).collect();
        let s = ols_slope(pts.iter().copied()).unwrap();
        worst = worst.max((s - b).abs() / b.abs());
    }
    if worst > 1e-9 {
        return outcome(false, format!("linear series slope relative error {worst:e}"));
    }

    let rule = SloRule::default();
    let (mut trials, mut agree) = (0, 0);
    while trials < 1000 {
        let load: f64 = rng.random_range(10.0..2000.0);
        let c: f64 = rng.random_range(10.0..500.0);
        let m: u32 = rng.random_range(1..=((load / c).ceil() as u32 + 2));
        if (load - f64::from(m) * c).abs() < 0.05 * load {
            continue;
        }
        trials += 1;
        let policy = rule.policy_for(load);
        let clean = SutModel::new(c).unwrap();
        let mut noisy = clean;
        noisy.noise_amplitude = 0.01 * load * clean.sample_interval_s;
        let seed = rng.random();
        let v0 = slo_check(&simulate_lag(load, m, &clean, 600.0, seed).unwrap(), &policy).unwrap();
        let v1 = slo_check(&simulate_lag(load, m, &noisy, 600.0, seed).unwrap(), &policy).unwrap();
        if v0.pass == v1.pass {
            agree += 1;
        }
    }
    let pass = agree * 100 >= trials * 99;
    outcome(pass, format!("slope error {worst:.1e}; {agree}/{trials} noisy verdicts agree"))
}

fn relative_gaps(serverless: &CostCurve, managed: &CostCurve) -> Vec<f64> {
    serverless
        .points
        .iter()
        .zip(&managed.points)
        .map(|(s, m)| ((s.cost.total - m.cost.total) / m.cost.total).to_f64().unwrap())
        .collect()
}

fn serverless_premium() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for uc in ["uc1", "uc2"] {
        let auto = curve(&format!("{uc}-dsp-autopilot"));
        let base = curve(&format!("{uc}-dsp-baseline"));
        let gaps = relative_gaps(&auto, &base);
        let dominates = gaps.iter().all(|g| *g >= 0.0);
        let shrinking = gaps.windows(2).all(|w| w[1] <= w[0]);
        let ok = dominates && shrinking;
        pass &= ok;
        detail.push(format!(
            "{uc} {} (premium {:.1}% -> {:.1}%{}{})",
            if ok { "ok" } else { "fails" },
            gaps[0] * 100.0,
            gaps[gaps.len() - 1] * 100.0,
            if dominates { "" } else { ", below baseline" },
            if shrinking { "" } else { ", gap grows" },
        ));
    }
    outcome(pass, detail.join("; "))
}

fn fixed_constants() -> Outcome {
    let mut files = Vec::new();
    for e in fs::read_dir(data("catalogs")).unwrap() {
        files.push(e.unwrap().path());
    }
    files.sort();
    if cmd_validate(&files) != EXIT_OK {
        return outcome(false, "shipped catalogs do not validate");
    }
    let bound = Decimal::new(4, 2) / Decimal::from(1_000_000);
    let base = load_catalog(&data("catalogs/gcp-baseline.toml")).unwrap();
    if base.cluster_fee_per_hour != Decimal::new(10, 2) {
        return outcome(false, format!("cluster fee {}", base.cluster_fee_per_hour));
    }
    for f in &files {
        let cat = load_catalog(f).unwrap();
        if cat.per_message > bound {
            return outcome(false, format!("{} per_message {}", cat.label, cat.per_message));
        }
    }
    outcome(true, format!("cluster fee 0.10, per_message <= {bound} in {} catalogs", files.len()))
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let args = RunArgs {
        scenarios: vec![data("scenarios/uc1-faas-baseline.toml"), data("scenarios/uc1-dsp-baseline.toml")],
        out: out.clone(),
        seed: None,
        grid: None,
    };
    cmd_compare(&args).unwrap();
    let first = tree(&out);
    fs::remove_dir_all(&out).unwrap();
    cmd_compare(&args).unwrap();
    let second = tree(&out);
    outcome(first == second && !first.is_empty(), format!("{} files compared", first.len()))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 window semantics", window_semantics, Some(Duration::from_secs(1))),
        ("2 oracle equivalence", oracle_equivalence, Some(Duration::from_secs(10))),
        ("3 cost-shape properties", cost_shape, None),
        ("4 break-even ordering", break_even_ordering, Some(Duration::from_secs(5))),
        ("5 capacity search", capacity_search, Some(Duration::from_secs(10))),
        ("6 SLO check", slo_check_criterion, Some(Duration::from_secs(30))),
        ("7 serverless-k8s premium", serverless_premium, Some(Duration::from_secs(5))),
        ("8 fixed constants", fixed_constants, None),
        ("9 reproducibility", reproducibility, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                result.pass = false;
                result.detail.push_str(&format!("; exceeded {limit:?}"));
            }
        }
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2?}]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
