//! JSON experiment configuration.
//!
//! Every field except `protocol` has a default. Units are nondimensional:
//! the outer wall is the unit circle and, unless `time_per_move` says
//! otherwise, each braid letter takes one time unit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stirflow_core::braid::{parse_braid, BraidWord};
use stirflow_core::diagnostics::{
    CurveOptions, CurveShape, MaterialCurve, VorticityField, DEFAULT_DELTA, DEFAULT_MAX_TURN,
    DEFAULT_REFINEMENTS_PER_PERIOD, DEFAULT_VERTEX_BUDGET,
};
use stirflow_core::field::{FlowConditions, SolverOptions};
use stirflow_core::protocol::{build_protocol, Handedness, Move, StirrerConfig, StirringProtocol};
use stirflow_core::transport::IntegratorOptions;
use stirflow_core::Vec2;

use crate::Error;

/// Default RK4 steps per protocol period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    /// Braid word such as `"1 -2"`; mutually exclusive with `moves`.
    #[serde(default)]
    pub word: Option<String>,
    #[serde(default)]
    pub moves: Option<Vec<MoveSpec>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_centers")]
    pub centers: [[f64; 2]; 3],
    /// Duration of each word letter. Defaults to 1, or to `period / len`
    /// when `period` is given.
    #[serde(default)]
    pub time_per_move: Option<f64>,
    /// Full period. With `moves` it must equal the sum of the durations.
    #[serde(default)]
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MoveSpec {
    Swap {
        slot: u8,
        #[serde(default)]
        handedness: HandednessSpec,
        #[serde(default = "one")]
        duration: f64,
    },
    Hold {
        #[serde(default = "one")]
        duration: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandednessSpec {
    #[default]
    Ccw,
    Cw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub vorticity: f64,
    /// `[Γ₀, Γ₁, Γ₂, Γ₃]`: outer wall first, fluid on the left.
    #[serde(default = "zero_circulations")]
    pub circulations: Vec<f64>,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            vorticity: 0.0,
            circulations: zero_circulations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Defaults to twice `order`.
    #[serde(default)]
    pub outer_order: Option<usize>,
    #[serde(default = "default_nodes")]
    pub nodes_per_boundary: usize,
    #[serde(default = "default_residual_tolerance")]
    pub residual_tolerance: f64,
    #[serde(default = "default_singular_ratio")]
    pub min_singular_ratio: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            order: default_order(),
            outer_order: None,
            nodes_per_boundary: default_nodes(),
            residual_tolerance: default_residual_tolerance(),
            min_singular_ratio: default_singular_ratio(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    /// Fixed RK4 step; overrides `steps_per_period`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub steps_per_period: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub gradient: Option<GradientSpec>,
    #[serde(default)]
    pub circulation: Option<CirculationSpec>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            periods: default_periods(),
            curve: None,
            gradient: None,
            circulation: None,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Segment { start: [f64; 2], end: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub shape: ShapeSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_turn")]
    pub max_turn: f64,
    #[serde(default = "default_budget")]
    pub vertex_budget: usize,
    #[serde(default = "default_refinements")]
    pub refinements_per_period: usize,
    /// Keep the curve winding around stirrers by splitting segments whose
    /// preimages can no longer be bisected at their image midpoint.
    #[serde(default = "yes")]
    pub image_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VorticitySpec {
    Constant {
        value: f64,
    },
    LinearX,
    GaussianBump {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSpec {
    pub vorticity: VorticitySpec,
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Distance kept from every boundary; defaults to ε/2.
    #[serde(default)]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirculationSpec {
    pub curve: CurveSpec,
    /// Defaults to `diagnostics.periods`.
    #[serde(default)]
    pub periods: Option<usize>,
}

/// Declared pass/fail thresholds; absent ones are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub min_curve_rate: Option<f64>,
    #[serde(default)]
    pub max_curve_rate: Option<f64>,
    #[serde(default)]
    pub min_gradient_rate: Option<f64>,
    #[serde(default)]
    pub max_circulation_drift: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    StirrerConfig::default().epsilon
}
fn default_centers() -> [[f64; 2]; 3] {
    StirrerConfig::default().centers.map(|c| [c.x, c.y])
}
fn zero_circulations() -> Vec<f64> {
    vec![0.0; 4]
}
fn default_order() -> usize {
    SolverOptions::default().order
}
fn default_nodes() -> usize {
    SolverOptions::default().nodes_per_boundary
}
fn default_residual_tolerance() -> f64 {
    SolverOptions::default().residual_tolerance
}
fn default_singular_ratio() -> f64 {
    SolverOptions::default().min_singular_ratio
}
fn default_periods() -> usize {
    8
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_max_turn() -> f64 {
    DEFAULT_MAX_TURN
}
fn yes() -> bool {
    true
}

fn default_budget() -> usize {
    DEFAULT_VERTEX_BUDGET
}
fn default_refinements() -> usize {
    DEFAULT_REFINEMENTS_PER_PERIOD
}
fn default_grid() -> usize {
    32
}

fn point(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl ShapeSpec {
    pub fn to_shape(&self) -> CurveShape {
        match *self {
            ShapeSpec::Segment { start, end } => CurveShape::Segment {
                start: point(start),
                end: point(end),
            },
            ShapeSpec::Circle { center, radius } => CurveShape::Circle {
                center: point(center),
                radius,
            },
        }
    }
}

impl CurveSpec {
    pub fn new(shape: ShapeSpec) -> Self {
        CurveSpec {
            shape,
            delta: DEFAULT_DELTA,
            max_turn: DEFAULT_MAX_TURN,
            vertex_budget: DEFAULT_VERTEX_BUDGET,
            refinements_per_period: DEFAULT_REFINEMENTS_PER_PERIOD,
            image_fallback: true,
        }
    }

    pub fn curve(&self) -> MaterialCurve {
        MaterialCurve::new(self.shape.to_shape())
            .with_delta(self.delta)
            .with_max_turn(self.max_turn)
    }

    pub fn options(&self, integrator: IntegratorOptions) -> CurveOptions {
        CurveOptions {
            integrator,
            vertex_budget: self.vertex_budget,
            refinements_per_period: self.refinements_per_period,
            image_fallback: self.image_fallback,
        }
    }
}

impl VorticitySpec {
    pub fn field(&self) -> VorticityField {
        match *self {
            VorticitySpec::Constant { value } => VorticityField::Constant(value),
            VorticitySpec::LinearX => VorticityField::LinearX,
            VorticitySpec::GaussianBump {
                center,
                width,
                amplitude,
            } => VorticityField::GaussianBump {
                center: point(center),
                width,
                amplitude,
            },
        }
    }
}

impl ProtocolSpec {
    pub fn from_word(word: &str) -> Self {
        ProtocolSpec {
            word: Some(word.to_string()),
            moves: None,
            epsilon: default_epsilon(),
            centers: default_centers(),
            time_per_move: None,
            period: None,
        }
    }
}

impl ExperimentConfig {
    /// Canonical protocol experiment with every other section defaulted.
    pub fn for_word(word: &str) -> Self {
        ExperimentConfig {
            name: None,
            protocol: ProtocolSpec::from_word(word),
            flow: FlowSpec::default(),
            solver: SolverSpec::default(),
            integrator: IntegratorSpec::default(),
            diagnostics: DiagnosticsSpec::default(),
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Builds the core objects and checks cross-field consistency.
    pub fn resolve(&self) -> Result<Resolved, Error> {
        let stirrers = StirrerConfig {
            epsilon: self.protocol.epsilon,
            centers: self.protocol.centers.map(point),
        };
        let (protocol, word) = match (&self.protocol.word, &self.protocol.moves) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "protocol takes either `word` or `moves`, not both".into(),
                ))
            }
            (None, None) => return Err(Error::Config("protocol needs `word` or `moves`".into())),
            (Some(text), None) => {
                let word =
                    parse_braid(text).map_err(|e| Error::Config(format!("protocol word: {e}")))?;
                let per_move = match (self.protocol.time_per_move, self.protocol.period) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "protocol takes either `time_per_move` or `period`, not both".into(),
                        ))
                    }
                    (Some(t), None) => t,
                    (None, Some(t)) => t / word.len().max(1) as f64,
                    (None, None) => 1.0,
                };
                if !(per_move > 0.0 && per_move.is_finite()) {
                    return Err(Error::Config("protocol timing must be positive".into()));
                }
                let p = build_protocol(&word, stirrers, 1.0 / per_move)
                    .map_err(|e| Error::Config(format!("protocol: {e}")))?;
                (p, word)
            }
            (None, Some(moves)) => {
                stirrers
                    .validate()
                    .map_err(|e| Error::Config(format!("protocol: {e}")))?;
                let moves: Vec<Move> = moves.iter().map(MoveSpec::to_move).collect();
                let p = StirringProtocol::from_moves(stirrers, moves)
                    .map_err(|e| Error::Config(format!("protocol: {e}")))?;
                if let Some(t) = self.protocol.period {
                    if (t - p.period()).abs() > 1e-9 * t.abs().max(1.0) {
                        return Err(Error::Config(format!(
                            "period {t} does not match the move durations (sum {})",
                            p.period()
                        )));
                    }
                }
                let word = p.word();
                (p, word)
            }
        };
        let report = stirflow_core::protocol::validate(&protocol, 100);
        if !report.passed() {
            return Err(Error::Config(format!(
                "protocol is not admissible: {report:?}"
            )));
        }

        if self.flow.circulations.len() != 4 {
            return Err(Error::Config(format!(
                "flow.circulations needs 4 values (outer wall, then stirrers), got {}",
                self.flow.circulations.len()
            )));
        }
        let conditions = FlowConditions::new(
            self.flow.vorticity,
            self.flow.circulations.clone(),
            protocol.epsilon(),
        )
        .map_err(|e| Error::Config(format!("flow: {e}")))?;

        let solver = SolverOptions {
            order: self.solver.order,
            outer_order: self.solver.outer_order.unwrap_or(2 * self.solver.order),
            nodes_per_boundary: self.solver.nodes_per_boundary,
            min_singular_ratio: self.solver.min_singular_ratio,
            residual_tolerance: self.solver.residual_tolerance,
        };
        solver
            .validate()
            .map_err(|e| Error::Config(format!("solver: {e}")))?;

        let period = protocol.period();
        let dt = match (self.integrator.dt, self.integrator.steps_per_period) {
            (Some(dt), _) => dt,
            (None, Some(n)) if n > 0 => period / n as f64,
            (None, Some(_)) => {
                return Err(Error::Config("steps_per_period must be positive".into()))
            }
            (None, None) => period / DEFAULT_STEPS_PER_PERIOD as f64,
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config("integrator dt must be positive".into()));
        }
        for (i, m) in protocol.moves().iter().enumerate() {
            let steps = m.duration() / dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
                return Err(Error::Config(format!(
                    "dt = {dt} does not divide the duration {} of move {i}",
                    m.duration()
                )));
            }
        }

        let d = &self.diagnostics;
        for curve in d.curve.iter().chain(d.circulation.iter().map(|c| &c.curve)) {
            if !(curve.delta > 0.0
                && curve.max_turn > 0.0
                && curve.vertex_budget > 0
                && curve.refinements_per_period > 0)
            {
                return Err(Error::Config(
                    "curve refinement parameters must be positive".into(),
                ));
            }
        }
        if let Some(c) = &d.circulation {
            if !matches!(c.curve.shape, ShapeSpec::Circle { .. }) {
                return Err(Error::Config(
                    "circulation needs a closed (circle) curve".into(),
                ));
            }
        }
        if let Some(g) = &d.gradient {
            if g.grid < 2 {
                return Err(Error::Config("gradient grid must be at least 2".into()));
            }
        }

        Ok(Resolved {
            protocol,
            word,
            conditions,
            solver,
            integrator: IntegratorOptions { dt },
        })
    }
}

impl MoveSpec {
    fn to_move(&self) -> Move {
        match *self {
            MoveSpec::Swap {
                slot,
                handedness,
                duration,
            } => Move::Swap {
                slot,
                handedness: match handedness {
                    HandednessSpec::Ccw => Handedness::Ccw,
                    HandednessSpec::Cw => Handedness::Cw,
                },
                duration,
            },
            MoveSpec::Hold { duration } => Move::Hold { duration },
        }
    }
}

/// Core objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub protocol: StirringProtocol,
    pub word: BraidWord,
    pub conditions: FlowConditions,
    pub solver: SolverOptions,
    pub integrator: IntegratorOptions,
}
