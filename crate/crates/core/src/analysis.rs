//! Cost curves, break-even points and comparison reports.

use std::collections::BTreeMap;
use std::io;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::capacity::{CapacityError, CapacityResult, CapacitySearch};
use crate::deployment::{
    cost_shares, dsp_hourly_cost, faas_hourly_cost, CostDimension, Deployment, DeploymentError,
    HourlyCost,
};
use crate::pricing::{catalog_diff, FieldDiff, PricingCatalog};
use crate::usecase::{Platform, UseCase};

/// Load grid used when a scenario does not set one, in events per second.
pub const DEFAULT_GRID: [u32; 10] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000];

pub const TIE_RULE: &str =
    "at equal cost the alternative (fixed-cost) deployment is considered no worse";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("load grids of `{a}` and `{b}` differ")]
    GridMismatch { a: String, b: String },
    #[error("loads must be non-negative and strictly increasing")]
    UnsortedLoads,
    #[error("stream processing curves need a capacity search configuration")]
    MissingCapacitySearch,
    #[error("no scenarios given")]
    NoScenarios,
    #[error("scenario `{scenario}`: {source}")]
    Capacity { scenario: String, source: CapacityError },
    #[error("scenario `{scenario}`: {source}")]
    Cost { scenario: String, source: DeploymentError },
}

impl AnalysisError {
    fn with_scenario(self, label: &str) -> Self {
        match self {
            AnalysisError::Capacity { source, .. } => {
                AnalysisError::Capacity { scenario: label.to_string(), source }
            }
            AnalysisError::Cost { source, .. } => {
                AnalysisError::Cost { scenario: label.to_string(), source }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub load: Decimal,
    pub cost: HourlyCost,
    /// Capacity search evidence for stream processing points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacityResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl CostCurve {
    pub fn loads(&self) -> Vec<Decimal> {
        self.points.iter().map(|p| p.load).collect()
    }

    pub fn totals(&self) -> Vec<Decimal> {
        self.points.iter().map(|p| p.cost.total).collect()
    }

    pub fn capacity_results(&self) -> Vec<CapacityResult> {
        self.points.iter().filter_map(|p| p.capacity.clone()).collect()
    }
}

fn check_loads(loads: &[Decimal]) -> Result<(), AnalysisError> {
    let sorted = loads.windows(2).all(|w| w[0] < w[1]);
    if !sorted || loads.iter().any(|l| l.is_sign_negative() && !l.is_zero()) {
        return Err(AnalysisError::UnsortedLoads);
    }
    Ok(())
}

pub fn cost_curve(
    deployment: &Deployment,
    loads: &[Decimal],
    catalog: &PricingCatalog,
    search: Option<&CapacitySearch>,
) -> Result<CostCurve, AnalysisError> {
    check_loads(loads)?;
    let label = deployment.label().to_string();
    let points = match deployment {
        Deployment::Faas(dep) => loads
            .iter()
            .map(|load| CurvePoint {
                load: *load,
                cost: faas_hourly_cost(dep, *load, catalog),
                capacity: None,
            })
            .collect(),
        Deployment::Dsp(dep) => {
            let search = search.ok_or(AnalysisError::MissingCapacitySearch)?;
            loads
                .iter()
                .map(|load| {
                    let capacity = search
                        .run(load.to_f64().unwrap_or(f64::MAX))
                        .map_err(|source| AnalysisError::Capacity { scenario: label.clone(), source })?;
                    let cost = dsp_hourly_cost(dep, *load, catalog, capacity.m_star)
                        .map_err(|source| AnalysisError::Cost { scenario: label.clone(), source })?;
                    Ok(CurvePoint { load: *load, cost, capacity: Some(capacity) })
                })
                .collect::<Result<_, AnalysisError>>()?
        }
    };
    Ok(CostCurve { label, points })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Crossing {
    /// Interpolated load where the alternative becomes no more expensive.
    pub load: Decimal,
    /// Last grid load where the alternative was more expensive, if any.
    pub lower: Option<Decimal>,
    /// First grid load where the alternative is no more expensive.
    pub upper: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BreakEven {
    pub crossing: Option<Crossing>,
}

/// Smallest grid load where `alternative` (the step-cost deployment) costs
/// no more than `reference` (the linear-cost deployment).
///
/// The reported load interpolates the cost difference linearly between the
/// bracketing grid points. A crossing at the first grid point has no lower
/// bracket and reports that point.
pub fn break_even(reference: &CostCurve, alternative: &CostCurve) -> Result<BreakEven, AnalysisError> {
    if reference.loads() != alternative.loads() {
        return Err(AnalysisError::GridMismatch {
            a: reference.label.clone(),
            b: alternative.label.clone(),
        });
    }
    let diffs: Vec<(Decimal, Decimal)> = reference
        .points
        .iter()
        .zip(&alternative.points)
        .map(|(r, a)| (r.load, a.cost.total - r.cost.total))
        .collect();
    let Some(idx) = diffs.iter().position(|(_, d)| *d <= Decimal::ZERO) else {
        return Ok(BreakEven { crossing: None });
    };
    let (upper, d_upper) = diffs[idx];
    let crossing = if idx == 0 {
        Crossing { load: upper, lower: None, upper }
    } else {
        let (lower, d_lower) = diffs[idx - 1];
        let load = lower + (upper - lower) * d_lower / (d_lower - d_upper);
        Crossing { load, lower: Some(lower), upper }
    };
    Ok(BreakEven { crossing: Some(crossing) })
}

/// Everything needed to evaluate one deployment over a load grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub use_case: UseCase,
    pub deployment: Deployment,
    pub catalog: PricingCatalog,
    pub loads: Vec<Decimal>,
    pub search: Option<CapacitySearch>,
}

impl Scenario {
    pub fn platform(&self) -> Platform {
        self.deployment.platform()
    }

    pub fn curve(&self) -> Result<CostCurve, AnalysisError> {
        let mut curve = cost_curve(&self.deployment, &self.loads, &self.catalog, self.search.as_ref())
            .map_err(|e| e.with_scenario(&self.label))?;
        curve.label = self.label.clone();
        Ok(curve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub label: String,
    pub use_case: UseCase,
    pub platform: Platform,
    pub deployment: String,
    pub catalog: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEvenEntry {
    pub reference: String,
    pub alternative: String,
    pub result: BreakEven,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareEntry {
    pub scenario: String,
    /// Shares of the cost summed over all grid loads.
    pub shares: BTreeMap<CostDimension, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogDiffEntry {
    pub a: String,
    pub b: String,
    pub diffs: Vec<FieldDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenarios: Vec<ScenarioSummary>,
    pub tie_rule: &'static str,
    pub break_evens: Vec<BreakEvenEntry>,
    pub shares: Vec<ShareEntry>,
    pub catalog_diffs: Vec<CatalogDiffEntry>,
    pub curves: Vec<CostCurve>,
}

fn summed_shares(curve: &CostCurve) -> Option<BTreeMap<CostDimension, f64>> {
    let summed = HourlyCost::from_components(
        curve
            .points
            .iter()
            .flat_map(|p| p.cost.components.iter().map(|(d, v)| (*d, *v))),
    );
    cost_shares(&summed).ok()
}

/// Evaluates every scenario and compares each pair.
///
/// For each pair `(i, j)` with `i < j`, a function scenario paired with a
/// stream processing scenario is always the reference side; otherwise the
/// earlier scenario is. All scenarios must share one load grid.
pub fn compare_report(scenarios: &[Scenario]) -> Result<Report, AnalysisError> {
    let first = scenarios.first().ok_or(AnalysisError::NoScenarios)?;
    if let Some(other) = scenarios.iter().find(|s| s.loads != first.loads) {
        return Err(AnalysisError::GridMismatch { a: first.label.clone(), b: other.label.clone() });
    }
    let curves = scenarios.iter().map(Scenario::curve).collect::<Result<Vec<_>, _>>()?;

    let mut break_evens = Vec::new();
    let mut catalog_diffs = Vec::new();
    for i in 0..scenarios.len() {
        for j in i + 1..scenarios.len() {
            let (r, a) = match (scenarios[i].platform(), scenarios[j].platform()) {
                (Platform::Dsp, Platform::Faas) => (j, i),
                _ => (i, j),
            };
            break_evens.push(BreakEvenEntry {
                reference: scenarios[r].label.clone(),
                alternative: scenarios[a].label.clone(),
                result: break_even(&curves[r], &curves[a])?,
            });
            catalog_diffs.push(CatalogDiffEntry {
                a: scenarios[i].label.clone(),
                b: scenarios[j].label.clone(),
                diffs: catalog_diff(&scenarios[i].catalog, &scenarios[j].catalog),
            });
        }
    }

    let shares = curves
        .iter()
        .filter_map(|c| summed_shares(c).map(|shares| ShareEntry { scenario: c.label.clone(), shares }))
        .collect();
    let summaries = scenarios
        .iter()
        .map(|s| ScenarioSummary {
            label: s.label.clone(),
            use_case: s.use_case,
            platform: s.platform(),
            deployment: s.deployment.label().to_string(),
            catalog: s.catalog.label.clone(),
        })
        .collect();
    Ok(Report {
        scenarios: summaries,
        tie_rule: TIE_RULE,
        break_evens,
        shares,
        catalog_diffs,
        curves,
    })
}

/// Columns: label, load, total, then one per cost dimension.
pub fn write_curve_csv<W: io::Write>(out: W, curve: &CostCurve) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label", "load", "total"];
    header.extend(CostDimension::ALL.iter().map(|d| d.as_str()));
    w.write_record(&header)?;
    for p in &curve.points {
        let mut row = vec![curve.label.clone(), p.load.normalize().to_string(), p.cost.total.normalize().to_string()];
        row.extend(CostDimension::ALL.iter().map(|d| p.cost.component(*d).normalize().to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format for plotting: scenario, load, dimension, usd_per_hour.
pub fn write_long_csv<W: io::Write>(out: W, curves: &[CostCurve]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "load", "dimension", "usd_per_hour"])?;
    for c in curves {
        for p in &c.points {
            for d in CostDimension::ALL {
                w.write_record([
                    c.label.clone(),
                    p.load.normalize().to_string(),
                    d.as_str().to_string(),
                    p.cost.component(d).normalize().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::{DspDeployment, DspKind, FaasDeployment};
    use crate::usecase::AccessProfile;
    use rust_decimal_macros::dec;

    fn flat_curve(label: &str, loads: &[Decimal], f: impl Fn(Decimal) -> Decimal) -> CostCurve {
        CostCurve {
            label: label.into(),
            points: loads
                .iter()
                .map(|l| CurvePoint {
                    load: *l,
                    cost: HourlyCost::from_components([(CostDimension::Vm, f(*l))]),
                    capacity: None,
                })
                .collect(),
        }
    }

    fn grid() -> Vec<Decimal> {
        DEFAULT_GRID.iter().map(|g| Decimal::from(*g)).collect()
    }

    #[test]
    fn break_even_interpolates() {
        let faas = flat_curve("faas", &grid(), |l| l * dec!(0.001));
        let dsp = flat_curve("dsp", &grid(), |_| dec!(0.2));
        let c = break_even(&faas, &dsp).unwrap().crossing.unwrap();
        assert_eq!(c.load, dec!(200));
        assert_eq!((c.lower, c.upper), (Some(dec!(100)), dec!(200)));

        let coarse = [dec!(100), dec!(500)];
        let c = break_even(
            &flat_curve("f", &coarse, |l| l * dec!(0.001)),
            &flat_curve("d", &coarse, |_| dec!(0.2)),
        )
        .unwrap()
        .crossing
        .unwrap();
        assert_eq!(c.load, dec!(200));
    }

    #[test]
    fn no_crossing_and_ties() {
        let faas = flat_curve("faas", &grid(), |l| l * dec!(0.0001));
        let dsp = flat_curve("dsp", &grid(), |_| dec!(1));
        assert_eq!(break_even(&faas, &dsp).unwrap().crossing, None);
        let c = break_even(&faas, &faas).unwrap().crossing.unwrap();
        assert_eq!((c.load, c.lower), (dec!(1), None));
    }

    #[test]
    fn mismatched_grids() {
        let a = flat_curve("a", &[dec!(1), dec!(2)], |_| dec!(1));
        let b = flat_curve("b", &[dec!(1), dec!(3)], |_| dec!(1));
        assert_eq!(
            break_even(&a, &b),
            Err(AnalysisError::GridMismatch { a: "a".into(), b: "b".into() })
        );
    }

    #[test]
    fn faas_curve_is_linear() {
        let mut cat = PricingCatalog::zero("c");
        cat.per_invocation = dec!(0.0000004);
        cat.per_db_write = dec!(0.0000018);
        let dep = Deployment::Faas(FaasDeployment::new("f", 256, dec!(45), AccessProfile::new(0, 1, 1)).unwrap());
        let curve = cost_curve(&dep, &grid(), &cat, None).unwrap();
        let unit = curve.points[0].cost.total;
        for p in &curve.points {
            assert_eq!(p.cost.total, unit * p.load);
        }
    }

    #[test]
    fn dsp_curve_requires_search() {
        let dep = Deployment::Dsp(DspDeployment::new("d", DspKind::SelfManagedK8s, AccessProfile::new(0, 1, 1)));
        assert_eq!(
            cost_curve(&dep, &grid(), &PricingCatalog::zero("c"), None),
            Err(AnalysisError::MissingCapacitySearch)
        );
    }

    #[test]
    fn unsorted_loads_rejected() {
        let dep = Deployment::Faas(FaasDeployment::new("f", 256, dec!(45), AccessProfile::new(0, 1, 1)).unwrap());
        assert_eq!(
            cost_curve(&dep, &[dec!(2), dec!(1)], &PricingCatalog::zero("c"), None),
            Err(AnalysisError::UnsortedLoads)
        );
    }

    #[test]
    fn curve_csv_header() {
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &flat_curve("x", &[dec!(1)], |_| dec!(0.5))).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "label,load,total,invocation,compute_duration,db_read,db_write,message,vm,cluster_fee,lb_fee,container"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "x,1,0.5,0,0,0,0,0,0.5,0,0,0");
    }
}
