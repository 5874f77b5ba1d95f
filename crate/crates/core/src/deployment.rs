//! Hourly cost models for function and stream processing deployments.
//!
//! Function deployments are billed per request only, so their hourly cost is
//! a linear form in the arrival rate. Stream processing deployments combine
//! three parts: fixed fees (cluster management, load balancer), a
//! per-request part (database and transport accesses) and a part that grows
//! in node-sized steps with the number of worker instances.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::kv::{KvDoc, KvError, KvWriter};
use crate::pricing::PricingCatalog;
use crate::usecase::{AccessProfile, Platform};

const SECONDS_PER_HOUR: Decimal = Decimal::from_parts(3600, 0, 0, false, 0);

pub const DEFAULT_SLOTS_PER_NODE: u32 = 4;
pub const DEFAULT_FIXED_OVERHEAD_SLOTS: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeploymentError {
    #[error("instance count must be at least 1, got {0}")]
    InvalidCapacity(u32),
    #[error("cost total is zero; shares are undefined")]
    ZeroTotal,
    #[error(transparent)]
    Descriptor(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostDimension {
    Invocation,
    ComputeDuration,
    DbRead,
    DbWrite,
    Message,
    Vm,
    ClusterFee,
    LbFee,
    Container,
}

impl CostDimension {
    pub const ALL: [CostDimension; 9] = [
        CostDimension::Invocation,
        CostDimension::ComputeDuration,
        CostDimension::DbRead,
        CostDimension::DbWrite,
        CostDimension::Message,
        CostDimension::Vm,
        CostDimension::ClusterFee,
        CostDimension::LbFee,
        CostDimension::Container,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostDimension::Invocation => "invocation",
            CostDimension::ComputeDuration => "compute_duration",
            CostDimension::DbRead => "db_read",
            CostDimension::DbWrite => "db_write",
            CostDimension::Message => "message",
            CostDimension::Vm => "vm",
            CostDimension::ClusterFee => "cluster_fee",
            CostDimension::LbFee => "lb_fee",
            CostDimension::Container => "container",
        }
    }

    /// Dimensions that scale with the request rate.
    pub fn is_per_request(self) -> bool {
        matches!(
            self,
            CostDimension::Invocation
                | CostDimension::ComputeDuration
                | CostDimension::DbRead
                | CostDimension::DbWrite
                | CostDimension::Message
        )
    }
}

impl fmt::Display for CostDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// USD per hour, broken down by dimension. Every dimension is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HourlyCost {
    pub total: Decimal,
    pub components: BTreeMap<CostDimension, Decimal>,
}

impl HourlyCost {
    pub fn from_components(parts: impl IntoIterator<Item = (CostDimension, Decimal)>) -> Self {
        let mut components: BTreeMap<_, _> =
            CostDimension::ALL.iter().map(|d| (*d, Decimal::ZERO)).collect();
        for (dim, value) in parts {
            *components.get_mut(&dim).expect("all dimensions present") += value;
        }
        let total = components.values().copied().sum();
        HourlyCost { total, components }
    }

    pub fn component(&self, dim: CostDimension) -> Decimal {
        self.components[&dim]
    }

    /// Sum of the components that scale with the request rate.
    pub fn per_request_part(&self) -> Decimal {
        self.components
            .iter()
            .filter(|(d, _)| d.is_per_request())
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn fixed_part(&self) -> Decimal {
        self.component(CostDimension::ClusterFee) + self.component(CostDimension::LbFee)
    }

    /// Worker-dependent part: VM nodes or billed containers.
    pub fn step_part(&self) -> Decimal {
        self.component(CostDimension::Vm) + self.component(CostDimension::Container)
    }
}

/// Function vCPU share for a memory size, following the provider's
/// memory-to-CPU tiers (smallest tier that fits the memory).
pub fn vcpu_for_memory(memory_mb: u32) -> Decimal {
    const TIERS: [(u32, Decimal); 9] = [
        (128, Decimal::from_parts(833, 0, 0, false, 4)),
        (256, Decimal::from_parts(1667, 0, 0, false, 4)),
        (512, Decimal::from_parts(3333, 0, 0, false, 4)),
        (1024, Decimal::from_parts(5833, 0, 0, false, 4)),
        (2048, Decimal::from_parts(1, 0, 0, false, 0)),
        (4096, Decimal::from_parts(2, 0, 0, false, 0)),
        (8192, Decimal::from_parts(2, 0, 0, false, 0)),
        (16384, Decimal::from_parts(4, 0, 0, false, 0)),
        (32768, Decimal::from_parts(8, 0, 0, false, 0)),
    ];
    TIERS
        .iter()
        .find(|(mb, _)| memory_mb <= *mb)
        .map(|(_, cpu)| *cpu)
        .unwrap_or(TIERS[TIERS.len() - 1].1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaasDeployment {
    pub label: String,
    pub memory_mb: u32,
    pub vcpu_fraction: Decimal,
    pub duration_ms: Decimal,
    pub access: AccessProfile,
}

impl FaasDeployment {
    pub fn new(
        label: impl Into<String>,
        memory_mb: u32,
        duration_ms: Decimal,
        access: AccessProfile,
    ) -> Result<Self, DeploymentError> {
        if memory_mb == 0 {
            return Err(KvError::invalid("memory_mb", "must be positive").into());
        }
        if duration_ms <= Decimal::ZERO {
            return Err(KvError::invalid("duration_ms", "must be positive").into());
        }
        Ok(FaasDeployment {
            label: label.into(),
            memory_mb,
            vcpu_fraction: vcpu_for_memory(memory_mb),
            duration_ms,
            access,
        })
    }

    /// Cost of a single invocation, per dimension.
    fn unit_costs(&self, cat: &PricingCatalog) -> [(CostDimension, Decimal); 5] {
        let gb = Decimal::from(self.memory_mb) / Decimal::from(1024);
        let seconds = self.duration_ms / Decimal::from(1000);
        [
            (CostDimension::Invocation, cat.per_invocation),
            (CostDimension::ComputeDuration, cat.per_gb_second * gb * seconds),
            (CostDimension::DbRead, Decimal::from(self.access.db_reads_per_event) * cat.per_db_read),
            (CostDimension::DbWrite, Decimal::from(self.access.db_writes_per_event) * cat.per_db_write),
            (CostDimension::Message, Decimal::from(self.access.messages_per_event) * cat.per_message),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DspKind {
    /// Engine on a self-managed Kubernetes cluster of VMs.
    SelfManagedK8s,
    /// Provider-managed stream processing billed per worker VM.
    ServerlessDsp,
    /// Engine on Kubernetes billed per container request.
    ServerlessK8s,
}

impl DspKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DspKind::SelfManagedK8s => "self-managed-k8s",
            DspKind::ServerlessDsp => "serverless-dsp",
            DspKind::ServerlessK8s => "serverless-k8s",
        }
    }
}

impl FromStr for DspKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "self-managed-k8s" => Ok(DspKind::SelfManagedK8s),
            "serverless-dsp" => Ok(DspKind::ServerlessDsp),
            "serverless-k8s" => Ok(DspKind::ServerlessK8s),
            other => Err(format!("unknown deployment kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DspDeployment {
    pub label: String,
    pub kind: DspKind,
    /// Worker slots that fit on one VM node.
    pub slots_per_node: u32,
    /// Slots taken by coordinator, brokers, ingress bridge and monitoring.
    pub fixed_overhead_slots: u32,
    pub per_instance_vcpu: Decimal,
    pub per_instance_gb: Decimal,
    pub access: AccessProfile,
}

impl DspDeployment {
    pub fn new(label: impl Into<String>, kind: DspKind, access: AccessProfile) -> Self {
        DspDeployment {
            label: label.into(),
            kind,
            slots_per_node: DEFAULT_SLOTS_PER_NODE,
            fixed_overhead_slots: DEFAULT_FIXED_OVERHEAD_SLOTS,
            per_instance_vcpu: Decimal::ONE,
            per_instance_gb: Decimal::from(4),
            access,
        }
    }

    /// VM nodes needed for `instances` workers plus the fixed components.
    pub fn node_count(&self, instances: u32) -> u32 {
        (instances + self.fixed_overhead_slots)
            .div_ceil(self.slots_per_node)
            .max(1)
    }

    fn validate(&self) -> Result<(), DeploymentError> {
        if self.slots_per_node == 0 {
            return Err(KvError::invalid("slots_per_node", "must be at least 1").into());
        }
        for (field, v) in [
            ("per_instance_vcpu", self.per_instance_vcpu),
            ("per_instance_gb", self.per_instance_gb),
        ] {
            if v < Decimal::ZERO {
                return Err(KvError::invalid(field, "must be non-negative").into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "platform", rename_all = "lowercase")]
pub enum Deployment {
    Faas(FaasDeployment),
    Dsp(DspDeployment),
}

impl Deployment {
    pub fn label(&self) -> &str {
        match self {
            Deployment::Faas(d) => &d.label,
            Deployment::Dsp(d) => &d.label,
        }
    }

    pub fn platform(&self) -> Platform {
        match self {
            Deployment::Faas(_) => Platform::Faas,
            Deployment::Dsp(_) => Platform::Dsp,
        }
    }

    pub fn access(&self) -> AccessProfile {
        match self {
            Deployment::Faas(d) => d.access,
            Deployment::Dsp(d) => d.access,
        }
    }
}

fn requests_per_hour(rate: Decimal) -> Decimal {
    debug_assert!(rate >= Decimal::ZERO, "arrival rate must be non-negative");
    rate * SECONDS_PER_HOUR
}

pub fn faas_hourly_cost(dep: &FaasDeployment, rate: Decimal, cat: &PricingCatalog) -> HourlyCost {
    let per_hour = requests_per_hour(rate);
    HourlyCost::from_components(
        dep.unit_costs(cat)
            .into_iter()
            .map(|(dim, unit)| (dim, per_hour * unit)),
    )
}

pub fn dsp_hourly_cost(
    dep: &DspDeployment,
    rate: Decimal,
    cat: &PricingCatalog,
    instances: u32,
) -> Result<HourlyCost, DeploymentError> {
    if instances < 1 {
        return Err(DeploymentError::InvalidCapacity(instances));
    }
    let per_hour = requests_per_hour(rate);
    let access = dep.access;
    let mut parts = vec![
        (CostDimension::DbRead, per_hour * Decimal::from(access.db_reads_per_event) * cat.per_db_read),
        (CostDimension::DbWrite, per_hour * Decimal::from(access.db_writes_per_event) * cat.per_db_write),
        (CostDimension::Message, per_hour * Decimal::from(access.messages_per_event) * cat.per_message),
    ];
    match dep.kind {
        DspKind::SelfManagedK8s => {
            parts.push((CostDimension::ClusterFee, cat.cluster_fee_per_hour));
            parts.push((CostDimension::LbFee, cat.lb_fee_per_hour));
            parts.push((
                CostDimension::Vm,
                Decimal::from(dep.node_count(instances)) * cat.per_vm_hour,
            ));
        }
        DspKind::ServerlessDsp => {
            parts.push((CostDimension::Vm, Decimal::from(instances) * cat.per_vm_hour));
        }
        DspKind::ServerlessK8s => {
            parts.push((CostDimension::ClusterFee, cat.cluster_fee_per_hour));
            parts.push((CostDimension::LbFee, cat.lb_fee_per_hour));
            // Each container is billed at least the provider minimum.
            let per_container = dep.per_instance_vcpu.max(cat.container_min_vcpu)
                * cat.per_container_vcpu_hour
                + dep.per_instance_gb.max(cat.container_min_gb) * cat.per_container_gb_hour;
            let containers = Decimal::from(instances + dep.fixed_overhead_slots);
            parts.push((CostDimension::Container, containers * per_container));
        }
    }
    Ok(HourlyCost::from_components(parts))
}

/// Fraction of the total contributed by each dimension.
pub fn cost_shares(cost: &HourlyCost) -> Result<BTreeMap<CostDimension, f64>, DeploymentError> {
    if cost.total.is_zero() {
        return Err(DeploymentError::ZeroTotal);
    }
    Ok(cost
        .components
        .iter()
        .map(|(dim, v)| (*dim, (*v / cost.total).to_f64().unwrap_or(0.0)))
        .collect())
}

/// Deployment shape as written in a descriptor file. Access counts come from
/// the use case unless the file overrides them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeploymentDescriptor {
    Faas {
        label: String,
        memory_mb: u32,
        duration_ms: Decimal,
        access: Option<AccessProfile>,
    },
    Dsp {
        label: String,
        kind: DspKind,
        slots_per_node: u32,
        fixed_overhead_slots: u32,
        per_instance_vcpu: Decimal,
        per_instance_gb: Decimal,
        access: Option<AccessProfile>,
        notes: Option<String>,
    },
}

impl DeploymentDescriptor {
    pub fn platform(&self) -> Platform {
        match self {
            DeploymentDescriptor::Faas { .. } => Platform::Faas,
            DeploymentDescriptor::Dsp { .. } => Platform::Dsp,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            DeploymentDescriptor::Faas { label, .. } | DeploymentDescriptor::Dsp { label, .. } => label,
        }
    }

    pub fn into_deployment(self, default_access: AccessProfile) -> Result<Deployment, DeploymentError> {
        match self {
            DeploymentDescriptor::Faas { label, memory_mb, duration_ms, access } => Ok(
                Deployment::Faas(FaasDeployment::new(
                    label,
                    memory_mb,
                    duration_ms,
                    access.unwrap_or(default_access),
                )?),
            ),
            DeploymentDescriptor::Dsp {
                label,
                kind,
                slots_per_node,
                fixed_overhead_slots,
                per_instance_vcpu,
                per_instance_gb,
                access,
                notes: _,
            } => {
                let dep = DspDeployment {
                    label,
                    kind,
                    slots_per_node,
                    fixed_overhead_slots,
                    per_instance_vcpu,
                    per_instance_gb,
                    access: access.unwrap_or(default_access),
                };
                dep.validate()?;
                Ok(Deployment::Dsp(dep))
            }
        }
    }

    pub fn to_kv_string(&self) -> String {
        let mut w = KvWriter::new();
        let access = match self {
            DeploymentDescriptor::Faas { label, memory_mb, duration_ms, access } => {
                w.str("kind", "faas").str("label", label);
                w.int("memory_mb", u64::from(*memory_mb)).decimal("duration_ms", *duration_ms);
                access
            }
            DeploymentDescriptor::Dsp {
                label,
                kind,
                slots_per_node,
                fixed_overhead_slots,
                per_instance_vcpu,
                per_instance_gb,
                access,
                notes,
            } => {
                w.str("kind", kind.as_str()).str("label", label);
                if let Some(n) = notes {
                    w.str("notes", n);
                }
                w.int("slots_per_node", u64::from(*slots_per_node))
                    .int("fixed_overhead_slots", u64::from(*fixed_overhead_slots))
                    .decimal("per_instance_vcpu", *per_instance_vcpu)
                    .decimal("per_instance_gb", *per_instance_gb);
                access
            }
        };
        if let Some(a) = access {
            w.int("db_reads_per_event", u64::from(a.db_reads_per_event))
                .int("db_writes_per_event", u64::from(a.db_writes_per_event))
                .int("messages_per_event", u64::from(a.messages_per_event));
        }
        w.finish()
    }
}

fn read_access(doc: &mut KvDoc) -> Result<Option<AccessProfile>, KvError> {
    let reads = doc.opt_u32("db_reads_per_event")?;
    let writes = doc.opt_u32("db_writes_per_event")?;
    let messages = doc.opt_u32("messages_per_event")?;
    match (reads, writes, messages) {
        (None, None, None) => Ok(None),
        (Some(r), Some(w), Some(m)) => Ok(Some(AccessProfile::new(r, w, m))),
        _ => Err(KvError::invalid(
            "db_reads_per_event",
            "access overrides need all of db_reads_per_event, db_writes_per_event, messages_per_event",
        )),
    }
}

pub fn parse_descriptor(text: &str) -> Result<DeploymentDescriptor, KvError> {
    let mut doc = KvDoc::parse(text)?;
    let kind = doc.req_str("kind")?;
    let label = doc.req_str("label")?;
    if label.trim().is_empty() {
        return Err(KvError::invalid("label", "must not be empty"));
    }
    let desc = if kind == "faas" {
        let memory_mb = doc.req_u32("memory_mb")?;
        let duration_ms = doc.req_decimal("duration_ms")?;
        if memory_mb == 0 {
            return Err(KvError::invalid("memory_mb", "must be positive"));
        }
        if duration_ms <= Decimal::ZERO {
            return Err(KvError::invalid("duration_ms", "must be positive"));
        }
        DeploymentDescriptor::Faas { label, memory_mb, duration_ms, access: read_access(&mut doc)? }
    } else {
        let kind = kind.parse::<DspKind>().map_err(|e| KvError::invalid("kind", e))?;
        let slots_per_node = doc.opt_u32("slots_per_node")?.unwrap_or(DEFAULT_SLOTS_PER_NODE);
        if slots_per_node == 0 {
            return Err(KvError::invalid("slots_per_node", "must be at least 1"));
        }
        let desc = DeploymentDescriptor::Dsp {
            label,
            kind,
            notes: doc.opt_str("notes")?,
            slots_per_node,
            fixed_overhead_slots: doc
                .opt_u32("fixed_overhead_slots")?
                .unwrap_or(DEFAULT_FIXED_OVERHEAD_SLOTS),
            per_instance_vcpu: doc.opt_decimal("per_instance_vcpu")?.unwrap_or(Decimal::ONE),
            per_instance_gb: doc.opt_decimal("per_instance_gb")?.unwrap_or(Decimal::from(4)),
            access: read_access(&mut doc)?,
        };
        if let DeploymentDescriptor::Dsp { per_instance_vcpu, per_instance_gb, .. } = &desc {
            if *per_instance_vcpu < Decimal::ZERO {
                return Err(KvError::invalid("per_instance_vcpu", "must be non-negative"));
            }
            if *per_instance_gb < Decimal::ZERO {
                return Err(KvError::invalid("per_instance_gb", "must be non-negative"));
            }
        }
        desc
    };
    doc.finish()?;
    Ok(desc)
}

pub fn load_descriptor(path: &Path) -> Result<DeploymentDescriptor, KvError> {
    parse_descriptor(&std::fs::read_to_string(path).map_err(|e| KvError::Parse(e.to_string()))?)
}
