//! Growth and conservation measurements on the transported flow.
//!
//! Material curves are stored as parameter values on a fixed initial shape
//! together with their current images. Refinement bisects in parameter space
//! and advects the new point from `t = 0`, so inserted vertices lie on the
//! true image curve up to integration error. Curves are refined several
//! times per period: a stirrer can drag a long filament out of a short
//! segment whose ends close up again behind it.
//!
//! Near the stagnation point in front of a moving stirrer, neighbouring
//! parameters separate faster than any fixed precision can follow, and the
//! filament that stays attached to the stirrer is lost: the polyline then
//! no longer winds around it. Under [`CurveOptions::image_fallback`], on by
//! default, a long segment whose parameter gap has reached the floating-point
//! floor is split at its image midpoint instead, pushed out of any stirrer it
//! falls in.
//! Such vertices have no preimage (their parameter is NaN) and are carried
//! forward as ordinary tracers.

use alloc::vec::Vec;

use thiserror::Error;

use crate::field::DomainSnapshot;
use crate::geom::{abs, cos, exp, sin, Mat2, Point, Vec2, TAU};
use crate::transport::{
    advect_in_place, inverse_flow, inverse_flow_series, IntegratorOptions, TransportError,
    VelocityProvider, GRAZE_DISTANCE, LEAVE_TOLERANCE,
};

/// Default maximum segment length.
pub const DEFAULT_DELTA: f64 = 5e-3;
/// Default maximum turning angle between consecutive segments, radians.
pub const DEFAULT_MAX_TURN: f64 = 0.2;
/// Default cap on the number of curve vertices.
pub const DEFAULT_VERTEX_BUDGET: usize = 2_000_000;
/// Segments shorter than `delta / TURN_FLOOR` are not split for turning.
pub const TURN_FLOOR: f64 = 16.0;
/// Default number of refinement passes per period.
pub const DEFAULT_REFINEMENTS_PER_PERIOD: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("invalid curve: {0}")]
    BadCurve(&'static str),
    #[error("series has {0} values, need at least 4")]
    SeriesTooShort(usize),
    #[error("series value {value} at index {index} is not positive")]
    DegenerateSeries { index: usize, value: f64 },
}

/// Initial shape of a material curve, parameterized on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveShape {
    Segment {
        start: Point,
        end: Point,
    },
    /// Counterclockwise circle.
    Circle {
        center: Point,
        radius: f64,
    },
}

impl CurveShape {
    pub fn point(&self, s: f64) -> Point {
        match *self {
            CurveShape::Segment { start, end } => start + (end - start) * s,
            CurveShape::Circle { center, radius } => {
                let a = TAU * s;
                center + Vec2::new(cos(a), sin(a)) * radius
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, CurveShape::Circle { .. })
    }
}

/// A curve carried by the flow, known at the end of `periods` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialCurve {
    shape: CurveShape,
    params: Vec<f64>,
    vertices: Vec<Point>,
    periods: usize,
    time: f64,
    pub delta: f64,
    pub max_turn: f64,
}

impl MaterialCurve {
    pub fn new(shape: CurveShape) -> Self {
        let params = alloc::vec![0.0, 0.5, 1.0];
        let vertices = params.iter().map(|&s| shape.point(s)).collect();
        MaterialCurve {
            shape,
            params,
            vertices,
            periods: 0,
            time: 0.0,
            delta: DEFAULT_DELTA,
            max_turn: DEFAULT_MAX_TURN,
        }
    }

    pub fn segment(start: Point, end: Point) -> Self {
        Self::new(CurveShape::Segment { start, end })
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Self::new(CurveShape::Circle { center, radius })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_max_turn(mut self, max_turn: f64) -> Self {
        self.max_turn = max_turn;
        self
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    pub fn is_closed(&self) -> bool {
        self.shape.is_closed()
    }

    /// Current vertices. A closed curve does not repeat its first vertex.
    pub fn vertices(&self) -> &[Point] {
        let n = self.vertices.len();
        if self.is_closed() {
            &self.vertices[..n - 1]
        } else {
            &self.vertices
        }
    }

    /// Parameters of [`vertices`](Self::vertices) on the initial shape; NaN
    /// for vertices inserted in the image.
    pub fn params(&self) -> &[f64] {
        let n = self.params.len();
        if self.is_closed() {
            &self.params[..n - 1]
        } else {
            &self.params
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices().len()
    }

    /// Whole periods elapsed since the initial shape.
    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Time the vertices are images at.
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Polyline length, including the closing segment of a closed curve.
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Vertices inserted in the image rather than from a preimage.
    pub fn image_vertex_count(&self) -> usize {
        self.params().iter().filter(|s| s.is_nan()).count()
    }

    pub fn max_segment(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .fold(0.0, f64::max)
    }

    /// Trapezoid-rule `∮ X·dr` of the model at `t` along the polyline.
    pub fn circulation(&self, vp: &VelocityProvider, t: f64) -> Result<f64, TransportError> {
        let model = vp.model(t)?;
        let v: Vec<Vec2> = self
            .vertices
            .iter()
            .map(|&z| model.velocity_unchecked(z))
            .collect();
        Ok(self
            .vertices
            .windows(2)
            .zip(v.windows(2))
            .map(|(p, u)| (u[0] + u[1]).dot(p[1] - p[0]) * 0.5)
            .sum())
    }

    fn check(&self) -> Result<(), DiagnosticsError> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(DiagnosticsError::BadCurve("delta must be positive"));
        }
        if !(self.max_turn > 0.0) {
            return Err(DiagnosticsError::BadCurve("max_turn must be positive"));
        }
        if let CurveShape::Circle { radius, .. } = self.shape {
            if !(radius > 0.0) {
                return Err(DiagnosticsError::BadCurve("circle radius must be positive"));
            }
        }
        if let CurveShape::Segment { start, end } = self.shape {
            if start == end {
                return Err(DiagnosticsError::BadCurve("segment endpoints coincide"));
            }
        }
        Ok(())
    }

    fn turn_at(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        let (prev, next) = if i == 0 || i == n - 1 {
            if !self.is_closed() {
                return 0.0;
            }
            (self.vertices[n - 2], self.vertices[1])
        } else {
            (self.vertices[i - 1], self.vertices[i + 1])
        };
        let a = self.vertices[i] - prev;
        let b = next - self.vertices[i];
        libm::atan2(abs(a.cross(b)), a.dot(b))
    }

    fn splits(&self, image_fallback: bool) -> Vec<(usize, bool)> {
        let floor = self.delta / TURN_FLOOR;
        let turns: Vec<f64> = (0..self.vertices.len()).map(|i| self.turn_at(i)).collect();
        (0..self.vertices.len() - 1)
            .filter_map(|j| {
                let len = self.vertices[j].distance(self.vertices[j + 1]);
                // NaN for image vertices, so those segments are never exact.
                let gap = self.params[j + 1] - self.params[j];
                let exact = gap > 4.0 * f64::EPSILON;
                let bent = turns[j].max(turns[j + 1]) > self.max_turn && len > floor;
                if exact && (len > self.delta || bent) {
                    Some((j, true))
                } else if image_fallback && !exact && len > self.delta {
                    Some((j, false))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Splits segments until every segment is at most `delta` long and no
    /// turning angle above `max_turn` sits next to a segment longer than
    /// `delta / TURN_FLOOR`. Returns `false` if the budget stopped it.
    pub fn refine(
        &mut self,
        vp: &VelocityProvider,
        opts: &CurveOptions,
    ) -> Result<bool, DiagnosticsError> {
        self.check()?;
        let t = self.time;
        let domain = vp.domain(t);
        loop {
            let split = self.splits(opts.image_fallback);
            if split.is_empty() {
                return Ok(true);
            }
            if self.vertex_count() + split.len() > opts.vertex_budget {
                return Ok(false);
            }
            let new_params: Vec<f64> = split
                .iter()
                .map(|&(j, exact)| {
                    if exact {
                        0.5 * (self.params[j] + self.params[j + 1])
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            let mut traced: Vec<Point> = new_params
                .iter()
                .filter(|s| !s.is_nan())
                .map(|&s| self.shape.point(s))
                .collect();
            if t != 0.0 {
                advect_in_place(&mut traced, 0.0, t, vp, &opts.integrator)?;
            }
            let mut traced = traced.into_iter();
            let new_points: Vec<Point> = split
                .iter()
                .map(|&(j, exact)| {
                    if exact {
                        traced.next().expect("one traced point per exact split")
                    } else {
                        outside_walls(&domain, (self.vertices[j] + self.vertices[j + 1]) * 0.5)
                    }
                })
                .collect();
            let total = self.params.len() + split.len();
            let mut params = Vec::with_capacity(total);
            let mut vertices = Vec::with_capacity(total);
            let mut k = 0;
            for j in 0..self.params.len() {
                params.push(self.params[j]);
                vertices.push(self.vertices[j]);
                if k < split.len() && split[k].0 == j {
                    params.push(new_params[k]);
                    vertices.push(new_points[k]);
                    k += 1;
                }
            }
            self.params = params;
            self.vertices = vertices;
        }
    }

    /// Advects the curve one period, refining `opts.refinements_per_period`
    /// times on the way. Returns `false` if the budget stopped refinement.
    fn advance(
        &mut self,
        vp: &VelocityProvider,
        opts: &CurveOptions,
    ) -> Result<bool, DiagnosticsError> {
        let m = opts.refinements_per_period.max(1);
        let base = self.periods as f64;
        for k in 1..=m {
            let t1 = (base + k as f64 / m as f64) * vp.period();
            let n = self.vertices.len();
            let body = if self.is_closed() { n - 1 } else { n };
            advect_in_place(
                &mut self.vertices[..body],
                self.time,
                t1,
                vp,
                &opts.integrator,
            )?;
            if self.is_closed() {
                self.vertices[n - 1] = self.vertices[0];
            }
            self.time = t1;
            if k == m {
                self.periods += 1;
            }
            if !self.refine(vp, opts)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_inside(&self, vp: &VelocityProvider) -> Result<(), DiagnosticsError> {
        let t = self.time;
        let domain = vp.domain(t);
        match self
            .vertices
            .iter()
            .find(|&&z| !domain.contains(z, LEAVE_TOLERANCE))
        {
            Some(&z) => Err(TransportError::StartsOutside(z).into()),
            None => Ok(()),
        }
    }
}

/// Moves `z` to `GRAZE_DISTANCE` inside the fluid if it is outside or
/// closer than that to a wall.
fn outside_walls(domain: &DomainSnapshot, z: Point) -> Point {
    let prox = domain.proximity(z);
    if prox.depth > -GRAZE_DISTANCE {
        z + prox.inward_normal * (prox.depth + GRAZE_DISTANCE)
    } else {
        z
    }
}

/// Options for curve evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    pub integrator: IntegratorOptions,
    pub vertex_budget: usize,
    pub refinements_per_period: usize,
    /// Split segments at the parameter floor in the image.
    pub image_fallback: bool,
}

impl CurveOptions {
    pub fn new(integrator: IntegratorOptions) -> Self {
        CurveOptions {
            integrator,
            vertex_budget: DEFAULT_VERTEX_BUDGET,
            refinements_per_period: DEFAULT_REFINEMENTS_PER_PERIOD,
            image_fallback: true,
        }
    }
}

/// Per-period values `v_0 .. v_N`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowthSeries {
    pub values: Vec<f64>,
    /// Curve vertex counts per period; empty for gradient series.
    pub vertex_counts: Vec<usize>,
    /// The vertex budget ran out; `values` stops early.
    pub budget_exceeded: bool,
    /// Every value is zero.
    pub degenerate: bool,
}

impl GrowthSeries {
    pub fn new(values: Vec<f64>) -> Self {
        let degenerate = !values.is_empty() && values.iter().all(|&v| v == 0.0);
        GrowthSeries {
            values,
            degenerate,
            ..Default::default()
        }
    }

    /// Index of the last recorded period.
    pub fn last_period(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

/// Least-squares fit of `log v_n = intercept + slope · n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// Rate per period.
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log v_n − fit|` inside the window.
    pub max_residual: f64,
    /// First and last period of the fit window.
    pub window: (usize, usize),
}

/// Fits the last half `⌈N/2⌉ ..= N` of the series.
pub fn estimate_growth_rate(series: &GrowthSeries) -> Result<GrowthFit, DiagnosticsError> {
    let len = series.values.len();
    if len < 4 {
        return Err(DiagnosticsError::SeriesTooShort(len));
    }
    let last = len - 1;
    let first = last.div_ceil(2);
    fit_window(&series.values, first, last)
}

/// Fits `log v_n` over periods `first ..= last`.
pub fn fit_window(
    values: &[f64],
    first: usize,
    last: usize,
) -> Result<GrowthFit, DiagnosticsError> {
    if last >= values.len() || last <= first {
        return Err(DiagnosticsError::SeriesTooShort(values.len()));
    }
    let mut logs = Vec::with_capacity(last - first + 1);
    for (index, &value) in values.iter().enumerate().take(last + 1).skip(first) {
        if !(value > 0.0 && value.is_finite()) {
            return Err(DiagnosticsError::DegenerateSeries { index, value });
        }
        logs.push((index as f64, libm::log(value)));
    }
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_residual = logs
        .iter()
        .map(|&(x, y)| abs(y - intercept - slope * x))
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        slope,
        intercept,
        max_residual,
        window: (first, last),
    })
}

/// Final state of [`evolve_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEvolution {
    pub series: GrowthSeries,
    pub curve: MaterialCurve,
}

/// Advects `curve` for `periods` periods, refining after each, and records
/// its length at every period boundary.
pub fn evolve_curve(
    curve: MaterialCurve,
    vp: &VelocityProvider,
    periods: usize,
    opts: &CurveOptions,
) -> Result<CurveEvolution, DiagnosticsError> {
    evolve_curve_with(curve, vp, periods, opts, |_| Ok(()))
}

/// [`evolve_curve`] calling `each` with the refined curve at every period
/// boundary, including the initial one.
pub fn evolve_curve_with(
    mut curve: MaterialCurve,
    vp: &VelocityProvider,
    periods: usize,
    opts: &CurveOptions,
    mut each: impl FnMut(&MaterialCurve) -> Result<(), DiagnosticsError>,
) -> Result<CurveEvolution, DiagnosticsError> {
    curve.check()?;
    curve.check_inside(vp)?;
    let mut series = GrowthSeries::default();
    let mut ok = curve.refine(vp, opts)?;
    loop {
        if !ok {
            series.budget_exceeded = true;
            break;
        }
        series.values.push(curve.length());
        series.vertex_counts.push(curve.vertex_count());
        each(&curve)?;
        if curve.periods() == periods {
            break;
        }
        ok = curve.advance(vp, opts)?;
    }
    Ok(CurveEvolution { series, curve })
}

/// Circulation along an advected closed curve at each period boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculationSeries {
    pub values: Vec<f64>,
    pub vertex_counts: Vec<usize>,
    pub budget_exceeded: bool,
}

impl CirculationSeries {
    /// `max_n |C_n − C_0|`.
    pub fn drift(&self) -> f64 {
        let c0 = self.values.first().copied().unwrap_or(0.0);
        self.values.iter().map(|&c| abs(c - c0)).fold(0.0, f64::max)
    }
}

pub fn circulation_drift(
    vp: &VelocityProvider,
    curve: MaterialCurve,
    periods: usize,
    opts: &CurveOptions,
) -> Result<CirculationSeries, DiagnosticsError> {
    if !curve.is_closed() {
        return Err(DiagnosticsError::BadCurve(
            "circulation needs a closed curve",
        ));
    }
    let mut values = Vec::with_capacity(periods + 1);
    let evo = evolve_curve_with(curve, vp, periods, opts, |c| {
        values.push(c.circulation(vp, c.periods() as f64 * vp.period())?);
        Ok(())
    })?;
    Ok(CirculationSeries {
        values,
        vertex_counts: evo.series.vertex_counts,
        budget_exceeded: evo.series.budget_exceeded,
    })
}

/// Closed-form initial vorticity with closed-form gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VorticityField {
    Constant(f64),
    /// `ω₀(x, y) = x`.
    LinearX,
    /// `amplitude · exp(−|z − center|² / (2 width²))`.
    GaussianBump {
        center: Point,
        width: f64,
        amplitude: f64,
    },
}

impl VorticityField {
    pub fn value(&self, z: Point) -> f64 {
        match *self {
            VorticityField::Constant(w) => w,
            VorticityField::LinearX => z.x,
            VorticityField::GaussianBump {
                center,
                width,
                amplitude,
            } => amplitude * exp(-(z - center).norm_sq() / (2.0 * width * width)),
        }
    }

    pub fn gradient(&self, z: Point) -> Vec2 {
        match *self {
            VorticityField::Constant(_) => Vec2::ZERO,
            VorticityField::LinearX => Vec2::new(1.0, 0.0),
            VorticityField::GaussianBump { center, width, .. } => {
                (z - center) * (-self.value(z) / (width * width))
            }
        }
    }
}

/// `ω_n(z) = ω₀(φ_n⁻¹(z))` for each point, `z` taken at `t = nT`.
pub fn transported_vorticity(
    omega0: &VorticityField,
    vp: &VelocityProvider,
    points: &[Point],
    periods: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<f64>, TransportError> {
    if let VorticityField::Constant(w) = *omega0 {
        return Ok(alloc::vec![w; points.len()]);
    }
    let back = inverse_flow(points, periods, vp, opts)?;
    Ok(back.iter().map(|s| omega0.value(s.point)).collect())
}

/// `∇ω_n(z) = (Dφ_n⁻¹(z))ᵀ ∇ω₀(φ_n⁻¹(z))`.
pub fn transported_gradient(omega0: &VorticityField, preimage: Point, jacobian: &Mat2) -> Vec2 {
    jacobian.transpose().apply(omega0.gradient(preimage))
}

/// Per-period values of `max_grid |∇ω_n|`, `n = 0..=periods`.
pub fn vorticity_gradient_growth(
    omega0: &VorticityField,
    vp: &VelocityProvider,
    grid: &[Point],
    periods: usize,
    opts: &IntegratorOptions,
) -> Result<GrowthSeries, TransportError> {
    let max0 = grid
        .iter()
        .map(|&z| omega0.gradient(z).norm())
        .fold(0.0, f64::max);
    if let VorticityField::Constant(_) = omega0 {
        return Ok(GrowthSeries::new(alloc::vec![0.0; periods + 1]));
    }
    let mut values = alloc::vec![max0];
    for level in inverse_flow_series(grid, periods, vp, opts)? {
        let g = level
            .iter()
            .map(|s| transported_gradient(omega0, s.point, &s.jacobian).norm())
            .fold(0.0, f64::max);
        values.push(g);
    }
    Ok(GrowthSeries::new(values))
}

/// `n × n` grid over `[−1, 1]²` kept if at least `margin` inside the fluid.
pub fn interior_grid(domain: &DomainSnapshot, n: usize, margin: f64) -> Vec<Point> {
    let mut pts = Vec::new();
    if n < 2 {
        return pts;
    }
    let step = 2.0 / (n - 1) as f64;
    for j in 0..n {
        for i in 0..n {
            let z = Vec2::new(-1.0 + i as f64 * step, -1.0 + j as f64 * step);
            if domain.proximity(z).depth <= -margin {
                pts.push(z);
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FlowConditions, SolverOptions};
    use crate::geom::{sqrt, PI};

    fn solid_body(omega: f64) -> VelocityProvider {
        let cond = FlowConditions::new(omega, alloc::vec![omega * PI], 0.0).unwrap();
        VelocityProvider::stationary(alloc::vec![], 0.0, cond, SolverOptions::with_order(4), 1.0)
            .unwrap()
    }

    #[test]
    fn geometric_series_fit_is_exact() {
        let lam: f64 = 2.618033988749895;
        let s = GrowthSeries::new((0..=8).map(|n| 3.0 * lam.powi(n)).collect());
        let fit = estimate_growth_rate(&s).unwrap();
        assert!((fit.slope - libm::log(lam)).abs() < 1e-12);
        assert_eq!(fit.window, (4, 8));
        let flat = GrowthSeries::new(alloc::vec![2.0; 9]);
        assert!(estimate_growth_rate(&flat).unwrap().slope.abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_bad_series() {
        assert_eq!(
            estimate_growth_rate(&GrowthSeries::new(alloc::vec![1.0; 3])),
            Err(DiagnosticsError::SeriesTooShort(3))
        );
        let zeros = GrowthSeries::new(alloc::vec![0.0; 6]);
        assert!(zeros.degenerate);
        assert!(matches!(
            estimate_growth_rate(&zeros),
            Err(DiagnosticsError::DegenerateSeries { .. })
        ));
    }

    #[test]
    fn zero_field_curve_is_constant() {
        let vp = solid_body(0.0);
        let c = MaterialCurve::segment(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5));
        let evo = evolve_curve(
            c,
            &vp,
            4,
            &CurveOptions::new(IntegratorOptions { dt: 0.05 }),
        )
        .unwrap();
        for &v in &evo.series.values {
            assert!((v - sqrt(2.0)).abs() < 1e-12);
        }
        assert!(evo.curve.max_segment() <= DEFAULT_DELTA);
        assert!(estimate_growth_rate(&evo.series).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn rotating_circle_keeps_length() {
        let vp = solid_body(1.5);
        let c = MaterialCurve::circle(Vec2::ZERO, 0.4);
        let evo = evolve_curve(
            c,
            &vp,
            3,
            &CurveOptions::new(IntegratorOptions { dt: 0.01 }),
        )
        .unwrap();
        let l0 = evo.series.values[0];
        // Inscribed polygon of a circle with segments ≤ δ.
        assert!((l0 - 0.8 * PI).abs() < 1e-4);
        for &v in &evo.series.values {
            assert!((v - l0).abs() < 1e-9);
        }
    }

    #[test]
    fn circulation_of_solid_body_loop() {
        let omega = 2.0;
        let vp = solid_body(omega);
        let c = MaterialCurve::circle(Vec2::new(0.1, 0.0), 0.3).with_delta(1e-3);
        let s = circulation_drift(
            &vp,
            c,
            2,
            &CurveOptions::new(IntegratorOptions { dt: 0.01 }),
        )
        .unwrap();
        assert!((s.values[0] - omega * PI * 0.09).abs() < 1e-5);
        assert!(s.drift() < 1e-9);
    }

    #[test]
    fn vorticity_fields() {
        let z = Vec2::new(0.3, -0.2);
        assert_eq!(VorticityField::Constant(2.0).gradient(z), Vec2::ZERO);
        assert_eq!(VorticityField::LinearX.value(z), 0.3);
        let g = VorticityField::GaussianBump {
            center: Vec2::new(0.1, 0.1),
            width: 0.2,
            amplitude: 1.5,
        };
        let h = 1e-6;
        let fd = Vec2::new(
            (g.value(z + Vec2::new(h, 0.0)) - g.value(z - Vec2::new(h, 0.0))) / (2.0 * h),
            (g.value(z + Vec2::new(0.0, h)) - g.value(z - Vec2::new(0.0, h))) / (2.0 * h),
        );
        assert!((fd - g.gradient(z)).norm() < 1e-8);
    }

    #[test]
    fn gradient_growth_controls() {
        let vp = solid_body(0.0);
        let domain = vp.domain(0.0);
        let grid = interior_grid(&domain, 8, 0.05);
        assert!(!grid.is_empty());
        let opts = IntegratorOptions { dt: 0.1 };
        let s = vorticity_gradient_growth(&VorticityField::Constant(1.0), &vp, &grid, 4, &opts)
            .unwrap();
        assert!(s.degenerate);
        let s = vorticity_gradient_growth(&VorticityField::LinearX, &vp, &grid, 4, &opts).unwrap();
        assert!(s.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        // Solid body with Ω = 1 rotates by t/2; period π gives a quarter turn.
        let cond = FlowConditions::new(1.0, alloc::vec![PI], 0.0).unwrap();
        let vp = VelocityProvider::stationary(
            alloc::vec![],
            0.0,
            cond,
            SolverOptions::with_order(4),
            PI,
        )
        .unwrap();
        let z = Vec2::new(0.2, 0.5);
        let w = transported_vorticity(
            &VorticityField::LinearX,
            &vp,
            &[z],
            1,
            &IntegratorOptions { dt: PI / 500.0 },
        )
        .unwrap();
        assert!((w[0] - z.y).abs() < 1e-10);
    }
}
