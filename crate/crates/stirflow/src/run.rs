//! One experiment: build the flow, run the selected diagnostics, write the
//! artifacts.

use std::path::Path;

use serde::Serialize;
use stirflow_core::braid::{self, BraidWord};
use stirflow_core::diagnostics::{
    circulation_drift, estimate_growth_rate, evolve_curve, interior_grid,
    vorticity_gradient_growth, GrowthFit, GrowthSeries,
};
use stirflow_core::transport::VelocityProvider;

use crate::config::{
    CirculationSpec, CurveSpec, ExperimentConfig, GradientSpec, Resolved, ShapeSpec, VorticitySpec,
};
use crate::output::{ensure_dir, write_csv, write_json};
use crate::provenance::{provenance, Provenance};
use crate::Error;

/// A resolved config with its velocity provider.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub resolved: Resolved,
    pub provider: VelocityProvider,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, Error> {
        let resolved = config.resolve()?;
        let provider = VelocityProvider::new(
            resolved.protocol.clone(),
            resolved.conditions.clone(),
            resolved.solver,
            0.5 * resolved.integrator.dt,
        )?;
        Ok(Experiment {
            config,
            resolved,
            provider,
        })
    }

    pub fn periods(&self) -> usize {
        self.config.diagnostics.periods
    }

    /// Residuals of every cached snapshot, in time order.
    pub fn residuals(&self) -> Result<Vec<ResidualRow>, Error> {
        self.provider.precompute()?;
        let times = if self.provider.cache_len() == 0 {
            vec![0.0]
        } else {
            self.provider.cache_times()
        };
        times
            .into_iter()
            .map(|t| {
                let m = self.provider.model(t)?;
                let r = m.residual();
                Ok(ResidualRow {
                    time: t,
                    max_normal_residual: r.max_normal_residual,
                    max_circulation_error: r.max_circulation_error(),
                    condition_number: r.condition_number,
                })
            })
            .collect()
    }

    pub fn curve(&self, spec: &CurveSpec) -> Result<CurveReport, Error> {
        let evo = evolve_curve(
            spec.curve(),
            &self.provider,
            self.periods(),
            &spec.options(self.resolved.integrator),
        )?;
        Ok(CurveReport {
            fit: fit(&evo.series),
            values: evo.series.values,
            vertex_counts: evo.series.vertex_counts,
            budget_exceeded: evo.series.budget_exceeded,
        })
    }

    pub fn gradient(&self, spec: &GradientSpec) -> Result<GradientReport, Error> {
        let margin = spec
            .margin
            .unwrap_or(0.5 * self.resolved.protocol.epsilon());
        let grid = interior_grid(&self.provider.domain(0.0), spec.grid, margin);
        let series = vorticity_gradient_growth(
            &spec.vorticity.field(),
            &self.provider,
            &grid,
            self.periods(),
            &self.resolved.integrator,
        )?;
        Ok(GradientReport {
            fit: fit(&series),
            grid_points: grid.len(),
            degenerate: series.degenerate,
            values: series.values,
        })
    }

    pub fn circulation(&self, spec: &CirculationSpec) -> Result<CirculationReport, Error> {
        let series = circulation_drift(
            &self.provider,
            spec.curve.curve(),
            spec.periods.unwrap_or(self.periods()),
            &spec.curve.options(self.resolved.integrator),
        )?;
        Ok(CirculationReport {
            drift: series.drift(),
            values: series.values,
            vertex_counts: series.vertex_counts,
            budget_exceeded: series.budget_exceeded,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub time: f64,
    pub max_normal_residual: f64,
    pub max_circulation_error: f64,
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub window: [usize; 2],
}

impl From<GrowthFit> for FitReport {
    fn from(f: GrowthFit) -> Self {
        FitReport {
            slope: f.slope,
            intercept: f.intercept,
            max_residual: f.max_residual,
            window: [f.window.0, f.window.1],
        }
    }
}

/// `None` for series that are too short or not positive.
fn fit(series: &GrowthSeries) -> Option<FitReport> {
    estimate_growth_rate(series).ok().map(FitReport::from)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveReport {
    pub values: Vec<f64>,
    pub vertex_counts: Vec<usize>,
    pub budget_exceeded: bool,
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub values: Vec<f64>,
    pub grid_points: usize,
    pub degenerate: bool,
    pub fit: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CirculationReport {
    pub values: Vec<f64>,
    pub vertex_counts: Vec<usize>,
    pub budget_exceeded: bool,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BraidSummary {
    pub word: String,
    pub reduced: String,
    pub matrix: [[i64; 2]; 2],
    pub trace: i64,
    pub class: &'static str,
    pub lambda: Option<f64>,
    pub log_lambda: Option<f64>,
}

impl BraidSummary {
    pub fn new(word: &BraidWord) -> Result<Self, Error> {
        let r = braid::report(word)?;
        Ok(BraidSummary {
            word: word.to_string(),
            reduced: r.reduced.to_string(),
            matrix: [[r.matrix.a, r.matrix.b], [r.matrix.c, r.matrix.d]],
            trace: r.class.trace(),
            class: r.class.name(),
            lambda: r.class.expansion(),
            log_lambda: r.entropy_bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub snapshots: usize,
    pub max_normal_residual: f64,
    pub max_circulation_error: f64,
    pub max_condition_number: f64,
}

impl ResidualSummary {
    fn new(rows: &[ResidualRow]) -> Self {
        let max = |f: fn(&ResidualRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        ResidualSummary {
            snapshots: rows.len(),
            max_normal_residual: max(|r| r.max_normal_residual),
            max_circulation_error: max(|r| r.max_circulation_error),
            max_condition_number: max(|r| r.condition_number),
        }
    }
}

/// A declared threshold and how the run compares to it. `margin` is
/// positive when the check passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCheck {
    pub name: &'static str,
    pub threshold: f64,
    pub value: Option<f64>,
    pub margin: Option<f64>,
    pub passed: bool,
}

impl ThresholdCheck {
    fn at_least(name: &'static str, threshold: f64, value: Option<f64>) -> Self {
        let margin = value.map(|v| v - threshold);
        ThresholdCheck {
            name,
            threshold,
            value,
            margin,
            passed: margin.is_some_and(|m| m >= 0.0),
        }
    }

    fn at_most(name: &'static str, threshold: f64, value: Option<f64>) -> Self {
        let margin = value.map(|v| threshold - v);
        ThresholdCheck {
            name,
            threshold,
            value,
            margin,
            passed: margin.is_some_and(|m| m >= 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: Option<String>,
    pub provenance: Provenance,
    pub braid: BraidSummary,
    pub periods: usize,
    pub residuals: ResidualSummary,
    pub curve: Option<CurveReport>,
    pub gradient: Option<GradientReport>,
    pub circulation: Option<CirculationReport>,
    pub checks: Vec<ThresholdCheck>,
    pub passed: bool,
}

impl Summary {
    /// `Err(Error::Thresholds)` listing the failed checks.
    pub fn verdict(&self) -> Result<(), Error> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| match c.value {
                Some(v) => format!("{} = {v} vs {}", c.name, c.threshold),
                None => format!("{} unavailable", c.name),
            })
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Thresholds(failed))
        }
    }
}

fn series_rows(values: &[f64], counts: Option<&[usize]>) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let mut row = vec![n.to_string(), v.to_string()];
            if let Some(c) = counts {
                row.push(c[n].to_string());
            }
            row
        })
        .collect()
}

/// Runs every diagnostic the config selects and writes, into `out`:
/// `braid.json`, `residuals.csv`, `curve.csv`, `gradient.csv`,
/// `circulation.csv` (each only when selected) and `summary.json`.
/// Threshold failures are reported in the summary, not as an error.
pub fn run(config: ExperimentConfig, out: &Path) -> Result<Summary, Error> {
    let exp = Experiment::new(config)?;
    ensure_dir(out)?;

    let braid = BraidSummary::new(&exp.resolved.word)?;
    write_json(&out.join("braid.json"), &braid)?;

    let rows = exp.residuals()?;
    write_csv(
        &out.join("residuals.csv"),
        &[
            "time",
            "max_normal_residual",
            "max_circulation_error",
            "condition_number",
        ],
        rows.iter().map(|r| {
            [
                r.time,
                r.max_normal_residual,
                r.max_circulation_error,
                r.condition_number,
            ]
            .map(|x| x.to_string())
        }),
    )?;

    let d = exp.config.diagnostics.clone();
    let curve = d.curve.as_ref().map(|s| exp.curve(s)).transpose()?;
    if let Some(c) = &curve {
        write_csv(
            &out.join("curve.csv"),
            &["n", "length", "vertices"],
            series_rows(&c.values, Some(&c.vertex_counts)),
        )?;
    }
    let gradient = d.gradient.as_ref().map(|s| exp.gradient(s)).transpose()?;
    if let Some(g) = &gradient {
        write_csv(
            &out.join("gradient.csv"),
            &["n", "max_gradient"],
            series_rows(&g.values, None),
        )?;
    }
    let circulation = d
        .circulation
        .as_ref()
        .map(|s| exp.circulation(s))
        .transpose()?;
    if let Some(c) = &circulation {
        write_csv(
            &out.join("circulation.csv"),
            &["n", "circulation", "vertices"],
            series_rows(&c.values, Some(&c.vertex_counts)),
        )?;
    }

    let t = &d.thresholds;
    let curve_rate = curve.as_ref().and_then(|c| c.fit.as_ref()).map(|f| f.slope);
    let gradient_rate = gradient
        .as_ref()
        .and_then(|g| g.fit.as_ref())
        .map(|f| f.slope);
    let mut checks = Vec::new();
    if let Some(x) = t.min_curve_rate {
        checks.push(ThresholdCheck::at_least("curve_rate", x, curve_rate));
    }
    if let Some(x) = t.max_curve_rate {
        checks.push(ThresholdCheck::at_most("curve_rate", x, curve_rate));
    }
    if let Some(x) = t.min_gradient_rate {
        checks.push(ThresholdCheck::at_least("gradient_rate", x, gradient_rate));
    }
    if let Some(x) = t.max_circulation_drift {
        let drift = circulation.as_ref().map(|c| c.drift);
        checks.push(ThresholdCheck::at_most("circulation_drift", x, drift));
    }

    let summary = Summary {
        name: exp.config.name.clone(),
        provenance: provenance(&exp.config, &exp.resolved),
        braid,
        periods: exp.periods(),
        residuals: ResidualSummary::new(&rows),
        curve,
        gradient,
        circulation,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Default essential arc: the vertical chord through the gap between the
/// first two stirrers.
pub fn default_curve(config: &ExperimentConfig) -> CurveSpec {
    let [a, b, _] = config.protocol.centers;
    let x = 0.5 * (a[0] + b[0]);
    let y = (1.0 - x * x).max(0.0).sqrt();
    CurveSpec::new(ShapeSpec::Segment {
        start: [x, -y],
        end: [x, y],
    })
}

/// Default gradient diagnostic: `ω₀ = x` on a 32 × 32 grid.
pub fn default_gradient() -> GradientSpec {
    GradientSpec {
        vorticity: VorticitySpec::LinearX,
        grid: 32,
        margin: None,
    }
}

/// Default circulation loop: a circle around the second stirrer reaching
/// halfway to its nearest neighbour's wall.
pub fn default_circulation(config: &ExperimentConfig) -> CirculationSpec {
    let c = config.protocol.centers;
    let gap = [c[0], c[2]]
        .iter()
        .map(|o| ((o[0] - c[1][0]).powi(2) + (o[1] - c[1][1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    CirculationSpec {
        curve: CurveSpec::new(ShapeSpec::Circle {
            center: c[1],
            radius: 0.5 * gap,
        }),
        periods: Some(1),
    }
}
