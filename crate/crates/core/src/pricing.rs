//! Pricing catalogs.
//!
//! A catalog holds every unit price for one provider/deployment flavor as an
//! exact decimal. Catalogs are flat: one VM type, one database and one
//! transport each; comparing options means comparing catalogs.

use std::path::Path;

use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::kv::{KvDoc, KvError, KvWriter};

/// Smallest container request billed by the serverless Kubernetes flavor.
pub const DEFAULT_CONTAINER_MIN_VCPU: Decimal = Decimal::from_parts(25, 0, 0, false, 2);
pub const DEFAULT_CONTAINER_MIN_GB: Decimal = Decimal::from_parts(5, 0, 0, false, 1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl CatalogError {
    pub fn field(&self) -> Option<&str> {
        match self {
            CatalogError::Parse { .. } => None,
            CatalogError::Validation { field, .. } => Some(field),
        }
    }
}

impl From<KvError> for CatalogError {
    fn from(e: KvError) -> Self {
        match e {
            KvError::Parse(message) => CatalogError::Parse { path: "<input>".into(), message },
            KvError::Missing(field) => {
                CatalogError::Validation { field, reason: "missing required field".into() }
            }
            KvError::Invalid { field, reason } => CatalogError::Validation { field, reason },
            KvError::Unknown(field) => {
                CatalogError::Validation { field, reason: "unknown field".into() }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PricingCatalog {
    pub label: String,
    /// Where the prices were taken from.
    pub source: Option<String>,
    pub per_invocation: Decimal,
    pub per_gb_second: Decimal,
    pub per_db_read: Decimal,
    pub per_db_write: Decimal,
    pub per_message: Decimal,
    pub per_vm_hour: Decimal,
    pub cluster_fee_per_hour: Decimal,
    pub lb_fee_per_hour: Decimal,
    pub per_container_vcpu_hour: Decimal,
    pub per_container_gb_hour: Decimal,
    pub container_min_vcpu: Decimal,
    pub container_min_gb: Decimal,
}

/// Price fields that must appear in every catalog file.
pub const REQUIRED_PRICE_FIELDS: [&str; 7] = [
    "per_invocation",
    "per_gb_second",
    "per_db_read",
    "per_db_write",
    "per_vm_hour",
    "cluster_fee_per_hour",
    "lb_fee_per_hour",
];

impl PricingCatalog {
    /// A catalog with every price zero and default container minimums.
    pub fn zero(label: impl Into<String>) -> Self {
        PricingCatalog {
            label: label.into(),
            source: None,
            per_invocation: Decimal::ZERO,
            per_gb_second: Decimal::ZERO,
            per_db_read: Decimal::ZERO,
            per_db_write: Decimal::ZERO,
            per_message: Decimal::ZERO,
            per_vm_hour: Decimal::ZERO,
            cluster_fee_per_hour: Decimal::ZERO,
            lb_fee_per_hour: Decimal::ZERO,
            per_container_vcpu_hour: Decimal::ZERO,
            per_container_gb_hour: Decimal::ZERO,
            container_min_vcpu: DEFAULT_CONTAINER_MIN_VCPU,
            container_min_gb: DEFAULT_CONTAINER_MIN_GB,
        }
    }

    /// All numeric fields by name, in file order.
    pub fn prices(&self) -> [(&'static str, Decimal); 12] {
        [
            ("per_invocation", self.per_invocation),
            ("per_gb_second", self.per_gb_second),
            ("per_db_read", self.per_db_read),
            ("per_db_write", self.per_db_write),
            ("per_message", self.per_message),
            ("per_vm_hour", self.per_vm_hour),
            ("cluster_fee_per_hour", self.cluster_fee_per_hour),
            ("lb_fee_per_hour", self.lb_fee_per_hour),
            ("per_container_vcpu_hour", self.per_container_vcpu_hour),
            ("per_container_gb_hour", self.per_container_gb_hour),
            ("container_min_vcpu", self.container_min_vcpu),
            ("container_min_gb", self.container_min_gb),
        ]
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.label.trim().is_empty() {
            return Err(CatalogError::Validation {
                field: "label".into(),
                reason: "must not be empty".into(),
            });
        }
        for (field, value) in self.prices() {
            if value.is_sign_negative() && !value.is_zero() {
                return Err(CatalogError::Validation {
                    field: field.into(),
                    reason: format!("price must be non-negative, got {value}"),
                });
            }
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        w.str("label", &self.label);
        if let Some(source) = &self.source {
            w.str("source", source);
        }
        for (field, value) in self.prices() {
            w.decimal(field, value);
        }
        w.finish()
    }
}

pub fn parse_catalog(text: &str) -> Result<PricingCatalog, CatalogError> {
    let mut doc = KvDoc::parse(text)?;
    let catalog = PricingCatalog {
        label: doc.req_str("label")?,
        source: doc.opt_str("source")?,
        per_invocation: doc.req_decimal("per_invocation")?,
        per_gb_second: doc.req_decimal("per_gb_second")?,
        per_db_read: doc.req_decimal("per_db_read")?,
        per_db_write: doc.req_decimal("per_db_write")?,
        per_message: doc.opt_decimal("per_message")?.unwrap_or_default(),
        per_vm_hour: doc.req_decimal("per_vm_hour")?,
        cluster_fee_per_hour: doc.req_decimal("cluster_fee_per_hour")?,
        lb_fee_per_hour: doc.req_decimal("lb_fee_per_hour")?,
        per_container_vcpu_hour: doc.opt_decimal("per_container_vcpu_hour")?.unwrap_or_default(),
        per_container_gb_hour: doc.opt_decimal("per_container_gb_hour")?.unwrap_or_default(),
        container_min_vcpu: doc
            .opt_decimal("container_min_vcpu")?
            .unwrap_or(DEFAULT_CONTAINER_MIN_VCPU),
        container_min_gb: doc
            .opt_decimal("container_min_gb")?
            .unwrap_or(DEFAULT_CONTAINER_MIN_GB),
    };
    doc.finish()?;
    catalog.validate()?;
    Ok(catalog)
}

pub fn load_catalog(path: &Path) -> Result<PricingCatalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_catalog(&text).map_err(|e| match e {
        CatalogError::Parse { message, .. } => {
            CatalogError::Parse { path: path.display().to_string(), message }
        }
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldDiff {
    pub field: &'static str,
    pub a: String,
    pub b: String,
}

/// Fields whose values differ between two catalogs. The `source` note is
/// provenance, not a price, and is ignored.
pub fn catalog_diff(a: &PricingCatalog, b: &PricingCatalog) -> Vec<FieldDiff> {
    let mut diffs = Vec::new();
    if a.label != b.label {
        diffs.push(FieldDiff { field: "label", a: a.label.clone(), b: b.label.clone() });
    }
    for ((field, va), (_, vb)) in a.prices().into_iter().zip(b.prices()) {
        if va != vb {
            diffs.push(FieldDiff {
                field,
                a: va.normalize().to_string(),
                b: vb.normalize().to_string(),
            });
        }
    }
    diffs
}
