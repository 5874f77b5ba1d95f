//! Scenario files and the SUT model files they reference.
//!
//! A scenario ties one load grid, one pricing catalog and one deployment
//! descriptor together. Stream processing scenarios additionally reference a
//! SUT model and carry SLO settings; function scenarios must not. Referenced
//! paths are resolved relative to the scenario file.

use std::fmt;
use std::path::{Path, PathBuf};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::analysis::{Scenario, DEFAULT_GRID};
use crate::capacity::{CapacitySearch, SloRule, SutModel, TrendLimit};
use crate::deployment::{parse_descriptor, DeploymentDescriptor};
use crate::kv::{parse_decimal_list, KvDoc, KvError, KvWriter};
use crate::pricing::{parse_catalog, CatalogError, PricingCatalog};
use crate::usecase::{access_profile, Platform, UseCase, WindowSpec};
use crate::workload::{arrival_rate, LoadProfile};

pub const DEFAULT_M_MAX: u32 = 64;
pub const DEFAULT_SIM_DURATION_S: f64 = 600.0;

/// Keys only stream processing scenarios may carry.
const DSP_ONLY_KEYS: [&str; 6] = [
    "sut",
    "slo_trend_fraction",
    "slo_max_lag_trend",
    "slo_warmup_s",
    "m_max",
    "sim_duration_s",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    Io(String),
    Invalid { field: Option<String>, message: String },
}

/// A problem with one configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub kind: ConfigErrorKind,
}

impl ConfigError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        ConfigError { path: path.to_path_buf(), kind: ConfigErrorKind::Io(e.to_string()) }
    }

    fn invalid(path: &Path, field: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.to_path_buf(),
            kind: ConfigErrorKind::Invalid {
                field: field.map(str::to_string),
                message: message.into(),
            },
        }
    }

    fn kv(path: &Path, e: KvError) -> Self {
        Self::invalid(path, e.field(), e.to_string())
    }

    fn catalog(path: &Path, e: CatalogError) -> Self {
        match e {
            CatalogError::Parse { message, .. } => Self::invalid(path, None, message),
            CatalogError::Validation { field, reason } => {
                Self::invalid(path, Some(&field), format!("field `{field}`: {reason}"))
            }
        }
    }

    pub fn field(&self) -> Option<&str> {
        match &self.kind {
            ConfigErrorKind::Invalid { field, .. } => field.as_deref(),
            ConfigErrorKind::Io(_) => None,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self.kind, ConfigErrorKind::Io(_))
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ConfigErrorKind::Io(msg) => write!(f, "{}: {msg}", self.path.display()),
            ConfigErrorKind::Invalid { message, .. } => write!(f, "{}: {message}", self.path.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))
}

pub fn load_catalog_file(path: &Path) -> Result<PricingCatalog, ConfigError> {
    parse_catalog(&read(path)?).map_err(|e| ConfigError::catalog(path, e))
}

pub fn load_descriptor_file(path: &Path) -> Result<DeploymentDescriptor, ConfigError> {
    parse_descriptor(&read(path)?).map_err(|e| ConfigError::kv(path, e))
}

pub fn parse_sut(text: &str) -> Result<SutModel, KvError> {
    let mut doc = KvDoc::parse(text)?;
    doc.opt_str("label")?;
    doc.opt_str("notes")?;
    let sut = SutModel {
        per_instance_capacity: doc.req_f64("per_instance_capacity")?,
        warmup_s: doc.opt_f64("warmup_s")?.unwrap_or(60.0),
        noise_amplitude: doc.opt_f64("noise_amplitude")?.unwrap_or(0.0),
        sample_interval_s: doc.opt_f64("sample_interval_s")?.unwrap_or(1.0),
    };
    doc.finish()?;
    sut.validate().map_err(|e| match e {
        crate::capacity::CapacityError::InvalidParameter { field, reason } => {
            KvError::invalid(field, reason)
        }
        other => KvError::Parse(other.to_string()),
    })?;
    Ok(sut)
}

pub fn load_sut_file(path: &Path) -> Result<SutModel, ConfigError> {
    parse_sut(&read(path)?).map_err(|e| ConfigError::kv(path, e))
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Sensor counts replacing the file's grid.
    pub grid: Option<Vec<Decimal>>,
}

/// A scenario file with its references resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub path: PathBuf,
    pub scenario: Scenario,
    pub sensors: Vec<u32>,
    pub emit_interval_s: Decimal,
    pub seed: u64,
    pub catalog_path: PathBuf,
    pub deployment_path: PathBuf,
    pub sut_path: Option<PathBuf>,
}

fn sensor_counts(path: &Path, field: &str, values: &[Decimal]) -> Result<Vec<u32>, ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::invalid(path, Some(field), format!("`{field}` must not be empty")));
    }
    let counts = values
        .iter()
        .map(|v| {
            (v.fract().is_zero() && !v.is_sign_negative())
                .then(|| v.to_u32())
                .flatten()
                .ok_or_else(|| {
                    ConfigError::invalid(path, Some(field), format!("`{v}` is not a sensor count"))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::invalid(
            path,
            Some(field),
            format!("`{field}` must be strictly increasing"),
        ));
    }
    Ok(counts)
}

pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<LoadedScenario, ConfigError> {
    let kv = |e: KvError| ConfigError::kv(path, e);
    let mut doc = KvDoc::parse(&read(path)?).map_err(kv)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let label = doc.req_str("label").map_err(kv)?;
    let use_case: UseCase = doc
        .req_str("use_case")
        .map_err(kv)?
        .parse()
        .map_err(|e: String| ConfigError::invalid(path, Some("use_case"), e))?;
    let platform: Platform = doc
        .req_str("platform")
        .map_err(kv)?
        .parse()
        .map_err(|e: String| ConfigError::invalid(path, Some("platform"), e))?;
    let catalog_path = base.join(doc.req_str("catalog").map_err(kv)?);
    let deployment_path = base.join(doc.req_str("deployment").map_err(kv)?);
    let file_seed = doc.opt_u64("seed").map_err(kv)?.unwrap_or(0);
    let emit_interval_s = doc.opt_decimal("emit_interval_s").map_err(kv)?.unwrap_or(Decimal::ONE);
    let window = WindowSpec::from_decimal_secs(
        doc.opt_decimal("window_size_s").map_err(kv)?.unwrap_or(Decimal::from(30)),
        doc.opt_decimal("window_hop_s").map_err(kv)?.unwrap_or(Decimal::from(3)),
    )
    .map_err(|e| ConfigError::invalid(path, Some("window_hop_s"), e.to_string()))?;
    let file_grid = match doc.opt_str("grid").map_err(kv)? {
        Some(g) => parse_decimal_list("grid", &g).map_err(kv)?,
        None => DEFAULT_GRID.iter().map(|g| Decimal::from(*g)).collect(),
    };

    let present_dsp_keys: Vec<&str> =
        DSP_ONLY_KEYS.iter().copied().filter(|k| doc.contains(k)).collect();
    let (sut_path, search_params) = match platform {
        Platform::Faas => {
            if let Some(key) = present_dsp_keys.first() {
                return Err(ConfigError::invalid(
                    path,
                    Some(key),
                    format!("function scenarios must not set `{key}`"),
                ));
            }
            (None, None)
        }
        Platform::Dsp => {
            let sut = doc
                .opt_str("sut")
                .map_err(kv)?
                .ok_or_else(|| {
                    ConfigError::invalid(path, Some("sut"), "stream processing scenarios need a `sut` model")
                })?;
            let fraction = doc.opt_f64("slo_trend_fraction").map_err(kv)?;
            let absolute = doc.opt_f64("slo_max_lag_trend").map_err(kv)?;
            let limit = match (fraction, absolute) {
                (Some(f), None) => TrendLimit::FractionOfLoad(f),
                (None, Some(a)) => TrendLimit::Absolute(a),
                (None, None) => {
                    return Err(ConfigError::invalid(
                        path,
                        Some("slo_trend_fraction"),
                        "stream processing scenarios need an SLO: set `slo_trend_fraction` or `slo_max_lag_trend`",
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(ConfigError::invalid(
                        path,
                        Some("slo_max_lag_trend"),
                        "set only one of `slo_trend_fraction` and `slo_max_lag_trend`",
                    ))
                }
            };
            let rule = SloRule {
                limit,
                warmup_s: doc.opt_f64("slo_warmup_s").map_err(kv)?.unwrap_or(60.0),
            };
            rule.validate()
                .map_err(|e| ConfigError::invalid(path, Some("slo_trend_fraction"), e.to_string()))?;
            let m_max = doc.opt_u32("m_max").map_err(kv)?.unwrap_or(DEFAULT_M_MAX);
            if m_max == 0 {
                return Err(ConfigError::invalid(path, Some("m_max"), "`m_max` must be at least 1"));
            }
            let duration = doc.opt_f64("sim_duration_s").map_err(kv)?.unwrap_or(DEFAULT_SIM_DURATION_S);
            (Some(base.join(sut)), Some((rule, m_max, duration)))
        }
    };
    doc.finish().map_err(kv)?;

    let grid_source = if overrides.grid.is_some() { "--grid" } else { "grid" };
    let sensors = sensor_counts(path, grid_source, overrides.grid.as_ref().unwrap_or(&file_grid))?;
    let seed = overrides.seed.unwrap_or(file_seed);
    let loads = sensors
        .iter()
        .map(|s| {
            LoadProfile::new(*s, emit_interval_s, Decimal::ZERO, seed)
                .map(|p| arrival_rate(&p))
                .map_err(|e| ConfigError::invalid(path, Some("emit_interval_s"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let catalog = load_catalog_file(&catalog_path)?;
    let descriptor = load_descriptor_file(&deployment_path)?;
    if descriptor.platform() != platform {
        return Err(ConfigError::invalid(
            path,
            Some("platform"),
            format!(
                "scenario platform `{platform}` does not match deployment `{}` ({})",
                descriptor.label(),
                descriptor.platform()
            ),
        ));
    }
    let deployment = descriptor
        .into_deployment(access_profile(use_case, platform, &window))
        .map_err(|e| ConfigError::invalid(&deployment_path, None, e.to_string()))?;

    let search = match (&sut_path, search_params) {
        (Some(sp), Some((rule, m_max, duration_s))) => {
            let sut = load_sut_file(sp)?;
            if duration_s < sut.sample_interval_s + rule.warmup_s {
                return Err(ConfigError::invalid(
                    path,
                    Some("sim_duration_s"),
                    "`sim_duration_s` must exceed the SLO warmup by at least one sample interval",
                ));
            }
            Some(CapacitySearch { sut, rule, m_max, duration_s, seed })
        }
        _ => None,
    };

    Ok(LoadedScenario {
        path: path.to_path_buf(),
        scenario: Scenario { label, use_case, deployment, catalog, loads, search },
        sensors,
        emit_interval_s,
        seed,
        catalog_path,
        deployment_path,
        sut_path,
    })
}

/// Kind of configuration file, guessed from its keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Scenario,
    Catalog,
    Deployment,
    Sut,
}

pub fn detect_kind(path: &Path) -> Result<ConfigKind, ConfigError> {
    let doc = KvDoc::parse(&read(path)?).map_err(|e| ConfigError::kv(path, e))?;
    if doc.contains("use_case") {
        Ok(ConfigKind::Scenario)
    } else if doc.contains("kind") {
        Ok(ConfigKind::Deployment)
    } else if doc.contains("per_instance_capacity") {
        Ok(ConfigKind::Sut)
    } else if doc.contains("per_invocation") || doc.contains("per_vm_hour") {
        Ok(ConfigKind::Catalog)
    } else {
        Err(ConfigError::invalid(path, None, "cannot tell what kind of configuration file this is"))
    }
}

/// Validates any supported configuration file, following scenario references.
pub fn validate_file(path: &Path) -> Result<ConfigKind, ConfigError> {
    let kind = detect_kind(path)?;
    match kind {
        ConfigKind::Scenario => load_scenario(path, &Overrides::default()).map(|_| ()),
        ConfigKind::Catalog => load_catalog_file(path).map(|_| ()),
        ConfigKind::Deployment => load_descriptor_file(path).map(|_| ()),
        ConfigKind::Sut => load_sut_file(path).map(|_| ()),
    }?;
    Ok(kind)
}

/// Flat record of every parameter a run used.
pub fn manifest_entries(w: &mut KvWriter, prefix: &str, loaded: &LoadedScenario) {
    let s = &loaded.scenario;
    let key = |k: &str| format!("{prefix}{k}");
    w.display(&key("file"), loaded.path.display());
    w.str(&key("label"), &s.label);
    w.display(&key("use_case"), s.use_case);
    w.display(&key("platform"), s.platform());
    w.display(&key("catalog"), loaded.catalog_path.display());
    w.str(&key("catalog_label"), &s.catalog.label);
    w.display(&key("deployment"), loaded.deployment_path.display());
    w.str(&key("deployment_label"), s.deployment.label());
    w.int(&key("seed"), loaded.seed);
    w.decimal(&key("emit_interval_s"), loaded.emit_interval_s);
    let join = |v: Vec<String>| v.join(",");
    w.str(&key("sensors"), &join(loaded.sensors.iter().map(u32::to_string).collect()));
    w.str(&key("loads"), &join(s.loads.iter().map(|l| l.normalize().to_string()).collect()));
    let a = s.deployment.access();
    w.int(&key("db_reads_per_event"), u64::from(a.db_reads_per_event));
    w.int(&key("db_writes_per_event"), u64::from(a.db_writes_per_event));
    w.int(&key("messages_per_event"), u64::from(a.messages_per_event));
    if let (Some(sut_path), Some(search)) = (&loaded.sut_path, &s.search) {
        w.display(&key("sut"), sut_path.display());
        w.display(&key("per_instance_capacity"), search.sut.per_instance_capacity);
        w.display(&key("noise_amplitude"), search.sut.noise_amplitude);
        w.display(&key("sample_interval_s"), search.sut.sample_interval_s);
        match search.rule.limit {
            TrendLimit::FractionOfLoad(f) => w.display(&key("slo_trend_fraction"), f),
            TrendLimit::Absolute(v) => w.display(&key("slo_max_lag_trend"), v),
        };
        w.display(&key("slo_warmup_s"), search.rule.warmup_s);
        w.int(&key("m_max"), u64::from(search.m_max));
        w.display(&key("sim_duration_s"), search.duration_s);
    }
}
