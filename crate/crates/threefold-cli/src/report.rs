//! JSON report schemas. Field order is declaration order and every map is
//! ordered, so identical inputs serialize to byte-identical reports.

use serde::Serialize;
use threefold_core::cech::{CohomologyBasis, GrowthPattern};
use threefold_core::series::TruncationPolicy;

#[derive(Clone, Debug, Serialize)]
pub struct WindowJson {
    pub u_deg: u32,
    pub z_min: i32,
    pub z_max: i32,
}

impl From<TruncationPolicy> for WindowJson {
    fn from(p: TruncationPolicy) -> Self {
        WindowJson { u_deg: p.u_deg_max, z_min: p.z_min, z_max: p.z_max }
    }
}

pub fn pattern_string(p: &GrowthPattern) -> String {
    let dims: Vec<String> =
        p.dims_by_u_cap.iter().map(|(cap, d)| format!("{d} at u-deg {cap}")).collect();
    format!("growing families [{}]; dimensions {}", p.families.join("; "), dims.join(", "))
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    pub dimension: usize,
    pub certified_window: WindowJson,
    pub classes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_pattern: Option<String>,
    pub stabilized: bool,
}

impl BasisReport {
    pub fn from_basis(basis: &CohomologyBasis) -> Self {
        BasisReport {
            dimension: basis.dimension(),
            certified_window: basis.certified_window.into(),
            classes: basis.classes.iter().map(|c| c.to_string()).collect(),
            family_pattern: basis.family_pattern.as_ref().map(pattern_string),
            stabilized: basis.stabilized,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtReport {
    pub j1: i32,
    pub j2: i32,
    pub dimension: usize,
    pub certified_window: WindowJson,
    pub cocycles: Vec<String>,
    pub generator_monomials: Vec<String>,
    pub stabilized: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModuliJson {
    pub j: i32,
    pub spec_hash: String,
    pub count: usize,
    pub projective_dimension: i64,
    pub generators: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionsReport {
    pub j: i32,
    pub p: String,
    pub neighborhood: u32,
    pub dimension: usize,
    pub basis: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitTypeReport {
    pub a1: i32,
    pub a2: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoReport {
    pub verdict: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegrateReport {
    pub integrable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AffineIsoReport {
    pub j1: u32,
    pub j2: u32,
    pub verdict: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyMapReport {
    pub holomorphic: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheckJson {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteJson {
    pub checks: Vec<SuiteCheckJson>,
    pub passed: usize,
    pub failed: usize,
    pub recorded: usize,
    pub window_limited: usize,
}
