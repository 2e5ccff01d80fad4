//! Build version, config hash and numerical tolerances.

use serde::Serialize;
use sha2::{Digest, Sha256};
use stirflow_core::field::DOMAIN_TOLERANCE;
use stirflow_core::protocol::CLEARANCE_MARGIN;
use stirflow_core::transport::{GRAZE_DISTANCE, LEAVE_TOLERANCE};

use crate::config::{ExperimentConfig, Resolved};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    /// SHA-256 of the canonical JSON form of the parsed config.
    pub config_hash: String,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub dt: f64,
    pub order: usize,
    pub outer_order: usize,
    pub nodes_per_boundary: usize,
    pub residual_tolerance: f64,
    pub min_singular_ratio: f64,
    pub domain_tolerance: f64,
    pub leave_tolerance: f64,
    pub graze_distance: f64,
    pub clearance_margin: f64,
    pub curve_delta: Option<f64>,
    pub curve_max_turn: Option<f64>,
    pub vertex_budget: Option<usize>,
}

/// Hex SHA-256 of the config after parsing and defaulting, so formatting
/// and key order in the file do not matter.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn provenance(config: &ExperimentConfig, resolved: &Resolved) -> Provenance {
    let curve = config.diagnostics.curve.as_ref();
    Provenance {
        version: VERSION,
        config_hash: config_hash(config),
        tolerances: Tolerances {
            dt: resolved.integrator.dt,
            order: resolved.solver.order,
            outer_order: resolved.solver.outer_order,
            nodes_per_boundary: resolved.solver.nodes_per_boundary,
            residual_tolerance: resolved.solver.residual_tolerance,
            min_singular_ratio: resolved.solver.min_singular_ratio,
            domain_tolerance: DOMAIN_TOLERANCE,
            leave_tolerance: LEAVE_TOLERANCE,
            graze_distance: GRAZE_DISTANCE,
            clearance_margin: CLEARANCE_MARGIN,
            curve_delta: curve.map(|c| c.delta),
            curve_max_turn: curve.map(|c| c.max_turn),
            vertex_budget: curve.map(|c| c.vertex_budget),
        },
    }
}

/// One-line human-readable form.
pub fn version_and_provenance(config: &ExperimentConfig, resolved: &Resolved) -> String {
    let p = provenance(config, resolved);
    format!(
        "stirflow {} config {} dt {} K {} nodes {}",
        p.version,
        p.config_hash,
        p.tolerances.dt,
        p.tolerances.order,
        p.tolerances.nodes_per_boundary
    )
}
