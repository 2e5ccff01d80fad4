//! Constant-vorticity stream function on one snapshot of the stirred domain.
//!
//! The fluid occupies the unit disk minus `m` round holes of common radius
//! `ε`. On each snapshot we seek `Ψ` with `ΔΨ = −Ω`, prescribed circulations
//! and the kinematic condition `X · n = U_i · n` on every boundary circle,
//! where `X = J ∇Ψ = (Ψ_y, −Ψ_x)` and `U_i` is the rigid velocity of circle
//! `i` (zero for the outer wall).
//!
//! # Representation
//!
//! ```text
//! Ψ(z) = −Ω|z|²/4
//!        + Re Σ_{k=0..K} A_k z^k
//!        + Σ_i [ a_i log|z − c_i| + Re Σ_{k=1..K} B_ik (ε / (z − c_i))^k ]
//! ```
//!
//! Every term except the first is harmonic, so `ΔΨ = −Ω` and `div X = 0`
//! hold identically and `curl X = Ω`. The inner Laurent terms are written in
//! the scaled variable `ε/(z − c)` so all basis functions are O(1) on the
//! fluid domain.
//!
//! # Circulations
//!
//! Circulations are measured with the fluid on the left: the outer circle
//! counterclockwise, the holes clockwise. Only the particular term and the
//! logarithms carry circulation. Going counterclockwise around a hole,
//! `a log|z − c|` contributes `−2πa` and the particular term contributes
//! `Ω π ε²`; reversing the orientation gives
//!
//! ```text
//! Γ_i = 2π a_i − Ω π ε²    ⇒    a_i = (Γ_i + Ω π ε²) / 2π
//! ```
//!
//! and the outer circulation `Γ_0 = Ω π − 2π Σ a_i` follows, so
//! `Σ Γ_i = Ω π (1 − m ε²)` is the only compatibility condition.
//!
//! # Boundary condition
//!
//! On a circle translating rigidly with velocity `U`, the function
//! `f = U_1 y − U_2 x` satisfies `J ∇f = U`. Since `(J ∇g) · n` is the
//! tangential derivative of `g` along the circle, the condition
//! `(J ∇Ψ) · n = U · n` is equivalent to `Ψ − f` being constant on the
//! circle. The constants `s_i` become unknowns (with `s_0 = 0` on the outer
//! wall fixing the gauge) and the remaining coefficients are found by linear
//! least squares over equispaced collocation nodes.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::geom::{abs, log, sqrt, Mat2, Point, Vec2, PI, TAU};
use crate::protocol::{StirringProtocol, OUTER_RADIUS};

/// Points this far outside the fluid still count as inside.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

/// Points per call of the batched evaluators.
pub const LANES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("circulations sum to {sum}, expected Ω·area = {expected}")]
    IncompatibleCirculations { sum: f64, expected: f64 },
    #[error("expected {expected} circulations, got {got}")]
    CirculationCount { expected: usize, got: usize },
    #[error("expected {expected} boundary velocities, got {got}")]
    VelocityCount { expected: usize, got: usize },
    #[error("outer boundary velocity must be zero")]
    MovingOuterWall,
    #[error("invalid solver options: {0}")]
    BadOptions(&'static str),
    #[error("least-squares matrix is ill conditioned (σ_min/σ_max = {0:e})")]
    IllConditioned(f64),
    #[error("boundary normal-velocity residual {residual:e} exceeds {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("point ({}, {}) is outside the fluid domain", .0.x, .0.y)]
    OutOfDomain(Point),
}

/// The fluid region at one instant: the unit disk minus round holes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSnapshot {
    pub centers: Vec<Point>,
    pub radius: f64,
    pub time: f64,
}

/// Which boundary a point is closest to, with signed depth beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProximity {
    /// 0 for the outer wall, `i + 1` for hole `i`.
    pub boundary: usize,
    /// Positive outside the fluid, negative inside.
    pub depth: f64,
    /// Unit normal pointing into the fluid.
    pub inward_normal: Vec2,
}

impl DomainSnapshot {
    pub fn new(centers: Vec<Point>, radius: f64, time: f64) -> Self {
        DomainSnapshot {
            centers,
            radius,
            time,
        }
    }

    pub fn from_protocol(p: &StirringProtocol, t: f64) -> Self {
        DomainSnapshot {
            centers: p.positions(t).to_vec(),
            radius: p.epsilon(),
            time: t,
        }
    }

    pub fn hole_count(&self) -> usize {
        self.centers.len()
    }

    pub fn fluid_area(&self) -> f64 {
        PI * (OUTER_RADIUS * OUTER_RADIUS - self.centers.len() as f64 * self.radius * self.radius)
    }

    /// The nearest boundary to `z` in the sense of largest signed depth.
    pub fn proximity(&self, z: Point) -> BoundaryProximity {
        nearest_boundary(self.centers.iter().copied(), self.radius, z)
    }

    pub fn contains(&self, z: Point, tolerance: f64) -> bool {
        self.proximity(z).depth <= tolerance
    }
}

fn nearest_boundary(
    centers: impl Iterator<Item = Point>,
    radius: f64,
    z: Point,
) -> BoundaryProximity {
    let r = sqrt(z.norm_sq());
    let mut best = BoundaryProximity {
        boundary: 0,
        depth: r - OUTER_RADIUS,
        inward_normal: if r > 0.0 {
            -(z / r)
        } else {
            Vec2::new(-1.0, 0.0)
        },
    };
    for (i, c) in centers.enumerate() {
        let d = z - c;
        let rho = sqrt(d.norm_sq());
        let depth = radius - rho;
        if depth > best.depth {
            best = BoundaryProximity {
                boundary: i + 1,
                depth,
                inward_normal: if rho > 0.0 {
                    d / rho
                } else {
                    Vec2::new(1.0, 0.0)
                },
            };
        }
    }
    best
}

/// Vorticity and boundary circulations (fluid on the left).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConditions {
    vorticity: f64,
    circulations: Vec<f64>,
}

impl FlowConditions {
    /// `circulations[0]` is the outer wall, `circulations[i]` hole `i − 1`.
    pub fn new(vorticity: f64, circulations: Vec<f64>, radius: f64) -> Result<Self, FieldError> {
        let holes = circulations.len().saturating_sub(1);
        if circulations.is_empty() {
            return Err(FieldError::CirculationCount {
                expected: 1,
                got: 0,
            });
        }
        let expected = vorticity * PI * (1.0 - holes as f64 * radius * radius);
        let sum: f64 = circulations.iter().sum();
        if abs(sum - expected) > 1e-12 * abs(vorticity).max(1.0) {
            return Err(FieldError::IncompatibleCirculations { sum, expected });
        }
        Ok(FlowConditions {
            vorticity,
            circulations,
        })
    }

    /// Fills in the outer circulation from the hole circulations.
    pub fn balanced(vorticity: f64, holes: &[f64], radius: f64) -> Self {
        let area = PI * (1.0 - holes.len() as f64 * radius * radius);
        let mut circulations = Vec::with_capacity(holes.len() + 1);
        circulations.push(vorticity * area - holes.iter().sum::<f64>());
        circulations.extend_from_slice(holes);
        FlowConditions {
            vorticity,
            circulations,
        }
    }

    /// Ω = 0 and every circulation zero.
    pub fn quiescent(holes: usize) -> Self {
        FlowConditions {
            vorticity: 0.0,
            circulations: vec![0.0; holes + 1],
        }
    }

    pub fn vorticity(&self) -> f64 {
        self.vorticity
    }

    pub fn circulations(&self) -> &[f64] {
        &self.circulations
    }

    pub fn hole_count(&self) -> usize {
        self.circulations.len() - 1
    }

    /// Same conditions with hole circulations reassigned:
    /// hole `i` receives the circulation of hole `source[i]`.
    pub fn permuted_holes(&self, source: &[usize]) -> Self {
        let mut circulations = Vec::with_capacity(self.circulations.len());
        circulations.push(self.circulations[0]);
        circulations.extend(source.iter().map(|&j| self.circulations[j + 1]));
        FlowConditions {
            vorticity: self.vorticity,
            circulations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Truncation order K of the Laurent series about each hole.
    pub order: usize,
    /// Truncation order of the Taylor series for the outer wall. Wall images
    /// of holes at distance `r` from the origin converge like `r^k`, so this
    /// is normally larger than `order`.
    pub outer_order: usize,
    pub nodes_per_boundary: usize,
    /// Smallest allowed `σ_min / σ_max` of the column-scaled system.
    pub min_singular_ratio: f64,
    /// Largest allowed normal-velocity residual.
    pub residual_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            order: 12,
            outer_order: 24,
            nodes_per_boundary: 128,
            min_singular_ratio: 1e-10,
            residual_tolerance: 1e-5,
        }
    }
}

impl SolverOptions {
    /// Hole order `order`, outer order `2 · order`.
    pub fn with_order(order: usize) -> Self {
        SolverOptions {
            order,
            outer_order: 2 * order,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.order == 0 || self.outer_order == 0 {
            return Err(FieldError::BadOptions("orders must be positive"));
        }
        if self.nodes_per_boundary < 4 * self.order {
            return Err(FieldError::BadOptions(
                "need at least 4K nodes per boundary",
            ));
        }
        if !(self.min_singular_ratio >= 0.0 && self.residual_tolerance > 0.0) {
            return Err(FieldError::BadOptions("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Accuracy of a solved model on its own snapshot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualReport {
    /// Max of `|X·n − U·n|` over all boundaries.
    pub max_normal_residual: f64,
    /// Per boundary, `|∮ X·dr − Γ_i|` by the trapezoid rule.
    pub circulation_errors: Vec<f64>,
    /// `σ_max / σ_min` of the column-scaled least-squares matrix.
    pub condition_number: f64,
}

impl ResidualReport {
    pub fn max_circulation_error(&self) -> f64 {
        self.circulation_errors.iter().fold(0.0, |m, &e| m.max(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Hole {
    center: Point,
    log_strength: f64,
    /// `B_k`, `k = 1..=K`.
    laurent: Vec<Complex64>,
    /// `−k B_k`, for `W'`.
    d1: Vec<Complex64>,
    /// `k (k + 1) B_k`, for `W''`.
    d2: Vec<Complex64>,
}

/// A solved stream function. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamModel {
    vorticity: f64,
    radius: f64,
    /// `A_k`, `k = 0..=K`.
    taylor: Vec<Complex64>,
    /// `k A_k` for `k = 1..=K`, stored from index 0.
    taylor_d1: Vec<Complex64>,
    /// `k (k − 1) A_k` for `k = 2..=K`, stored from index 0.
    taylor_d2: Vec<Complex64>,
    holes: Vec<Hole>,
    /// `s_0 .. s_m`, `s_0 = 0`.
    constants: Vec<f64>,
    order: usize,
    residual: ResidualReport,
}

#[inline]
fn inverse(d: Complex64) -> Complex64 {
    let n = 1.0 / d.norm_sqr();
    Complex64::new(d.re * n, -d.im * n)
}

/// Lane-parallel Horner evaluation.
#[inline]
fn horner_lanes(
    coeffs: &[Complex64],
    zr: &[f64; LANES],
    zi: &[f64; LANES],
) -> ([f64; LANES], [f64; LANES]) {
    let mut ar = [0.0; LANES];
    let mut ai = [0.0; LANES];
    for c in coeffs.iter().rev() {
        for l in 0..LANES {
            let r = ar[l] * zr[l] - ai[l] * zi[l] + c.re;
            ai[l] = ar[l] * zi[l] + ai[l] * zr[l] + c.im;
            ar[l] = r;
        }
    }
    (ar, ai)
}

/// `Σ c_k z^k`. Long series run as four independent chains in `z⁴`.
#[inline]
fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if coeffs.len() < 8 {
        return coeffs.iter().rev().fold(zero, |acc, &c| acc * z + c);
    }
    let z2 = z * z;
    let z4 = z2 * z2;
    let blocks = coeffs.chunks_exact(4);
    let mut acc = [zero; 4];
    for (a, &c) in acc.iter_mut().zip(blocks.remainder()) {
        *a = c;
    }
    for b in blocks.rev() {
        acc = [
            acc[0] * z4 + b[0],
            acc[1] * z4 + b[1],
            acc[2] * z4 + b[2],
            acc[3] * z4 + b[3],
        ];
    }
    acc[0] + acc[1] * z + (acc[2] + acc[3] * z) * z2
}

impl StreamModel {
    /// Builds a model from explicit coefficients. `laurent[i]` holds `B_ik`
    /// for `k = 1..=K` and `taylor` holds `A_k` for `k = 0..=K`.
    pub fn from_coefficients(
        vorticity: f64,
        radius: f64,
        taylor: Vec<Complex64>,
        centers: &[Point],
        log_strengths: &[f64],
        laurent: Vec<Vec<Complex64>>,
        constants: Vec<f64>,
    ) -> Self {
        let order = laurent.first().map_or(0, |b| b.len());
        let taylor_d1 = taylor
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| a * k as f64)
            .collect();
        let taylor_d2 = taylor
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, &a)| a * (k * (k - 1)) as f64)
            .collect();
        let holes = centers
            .iter()
            .zip(log_strengths)
            .zip(laurent)
            .map(|((&center, &log_strength), laurent)| {
                let d1 = laurent
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| b * -((j + 1) as f64))
                    .collect();
                let d2 = laurent
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| b * ((j + 1) * (j + 2)) as f64)
                    .collect();
                Hole {
                    center,
                    log_strength,
                    laurent,
                    d1,
                    d2,
                }
            })
            .collect();
        StreamModel {
            vorticity,
            radius,
            taylor,
            taylor_d1,
            taylor_d2,
            holes,
            constants,
            order,
            residual: ResidualReport::default(),
        }
    }

    /// `Ψ ≡ 0` on the unit disk without holes.
    pub fn zero() -> Self {
        Self::from_coefficients(
            0.0,
            0.0,
            vec![Complex64::new(0.0, 0.0)],
            &[],
            &[],
            vec![],
            vec![0.0],
        )
    }

    pub fn vorticity(&self) -> f64 {
        self.vorticity
    }

    /// Laurent order K about the holes.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn outer_order(&self) -> usize {
        self.taylor.len().saturating_sub(1)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.holes.iter().map(|h| h.center)
    }

    pub fn log_strengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.holes.iter().map(|h| h.log_strength)
    }

    pub fn taylor_coefficients(&self) -> &[Complex64] {
        &self.taylor
    }

    pub fn laurent_coefficients(&self, hole: usize) -> &[Complex64] {
        &self.holes[hole].laurent
    }

    /// Boundary constants `s_0 .. s_m`.
    pub fn boundary_constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn residual(&self) -> &ResidualReport {
        &self.residual
    }

    pub fn proximity(&self, z: Point) -> BoundaryProximity {
        nearest_boundary(self.centers(), self.radius, z)
    }

    pub fn contains(&self, z: Point) -> bool {
        if z.norm() > OUTER_RADIUS + DOMAIN_TOLERANCE {
            return false;
        }
        self.holes
            .iter()
            .all(|h| (z - h.center).norm() >= self.radius - DOMAIN_TOLERANCE)
    }

    fn check(&self, z: Point) -> Result<(), FieldError> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(FieldError::OutOfDomain(z))
        }
    }

    pub fn stream_function(&self, z: Point) -> Result<f64, FieldError> {
        self.check(z)?;
        Ok(self.stream_function_unchecked(z))
    }

    pub fn stream_function_unchecked(&self, z: Point) -> f64 {
        let zc = z.to_complex();
        let mut psi = -0.25 * self.vorticity * z.norm_sq() + horner(&self.taylor, zc).re;
        for h in &self.holes {
            let d = zc - h.center.to_complex();
            let w = Complex64::new(self.radius, 0.0) / d;
            psi += h.log_strength * log(d.norm()) + (horner(&h.laurent, w) * w).re;
        }
        psi
    }

    /// `W'(z)` of the harmonic part `Ψ_h = Re W`.
    #[inline]
    fn complex_derivative(&self, z: Point) -> Complex64 {
        let zc = z.to_complex();
        let mut w1 = horner(&self.taylor_d1, zc);
        for h in &self.holes {
            let u = inverse(zc - h.center.to_complex());
            w1 += u * (h.log_strength + horner(&h.d1, u * self.radius) * u * self.radius);
        }
        w1
    }

    /// `W'(z)` and `W''(z)` of the harmonic part `Ψ_h = Re W`.
    #[inline]
    fn complex_derivatives(&self, z: Point) -> (Complex64, Complex64) {
        let zc = z.to_complex();
        let mut w1 = horner(&self.taylor_d1, zc);
        let mut w2 = horner(&self.taylor_d2, zc);
        for h in &self.holes {
            let u = inverse(zc - h.center.to_complex());
            let w = u * self.radius;
            w1 += u * (h.log_strength + horner(&h.d1, w) * w);
            w2 += u * u * (horner(&h.d2, w) * w - h.log_strength);
        }
        (w1, w2)
    }

    pub fn velocity(&self, z: Point) -> Result<Vec2, FieldError> {
        self.check(z)?;
        Ok(self.velocity_unchecked(z))
    }

    /// `X = (Ψ_y, −Ψ_x)` without the domain check.
    #[inline]
    pub fn velocity_unchecked(&self, z: Point) -> Vec2 {
        let w1 = self.complex_derivative(z);
        let half = 0.5 * self.vorticity;
        Vec2::new(-w1.im - half * z.y, -w1.re + half * z.x)
    }

    /// [`velocity_unchecked`](Self::velocity_unchecked) at [`LANES`]
    /// points at once. Same arithmetic, lane-parallel.
    #[inline]
    pub fn velocity_lanes(&self, z: &[Point; LANES]) -> [Vec2; LANES] {
        let zr = z.map(|p| p.x);
        let zi = z.map(|p| p.y);
        let (mut wr, mut wi) = horner_lanes(&self.taylor_d1, &zr, &zi);
        for h in &self.holes {
            let mut ur = [0.0; LANES];
            let mut ui = [0.0; LANES];
            let mut sr = [0.0; LANES];
            let mut si = [0.0; LANES];
            for l in 0..LANES {
                let dr = zr[l] - h.center.x;
                let di = zi[l] - h.center.y;
                let n = 1.0 / (dr * dr + di * di);
                ur[l] = dr * n;
                ui[l] = -di * n;
                sr[l] = ur[l] * self.radius;
                si[l] = ui[l] * self.radius;
            }
            let (br, bi) = horner_lanes(&h.d1, &sr, &si);
            for l in 0..LANES {
                // u · (a + b w)
                let tr = h.log_strength + br[l] * sr[l] - bi[l] * si[l];
                let ti = br[l] * si[l] + bi[l] * sr[l];
                wr[l] += ur[l] * tr - ui[l] * ti;
                wi[l] += ur[l] * ti + ui[l] * tr;
            }
        }
        let half = 0.5 * self.vorticity;
        core::array::from_fn(|l| Vec2::new(-wi[l] - half * zi[l], -wr[l] + half * zr[l]))
    }

    pub fn velocity_gradient(&self, z: Point) -> Result<Mat2, FieldError> {
        self.check(z)?;
        Ok(self.velocity_and_gradient_unchecked(z).1)
    }

    /// Velocity and its Jacobian `[[∂X₁/∂x, ∂X₁/∂y], [∂X₂/∂x, ∂X₂/∂y]]`.
    #[inline]
    pub fn velocity_and_gradient_unchecked(&self, z: Point) -> (Vec2, Mat2) {
        let (w1, w2) = self.complex_derivatives(z);
        let half = 0.5 * self.vorticity;
        let v = Vec2::new(-w1.im - half * z.y, -w1.re + half * z.x);
        let g = Mat2::new(-w2.im, -w2.re - half, -w2.re + half, w2.im);
        (v, g)
    }
}

/// Log strength of a hole carrying clockwise circulation `gamma`.
pub fn log_strength(gamma: f64, vorticity: f64, radius: f64) -> f64 {
    (gamma + vorticity * PI * radius * radius) / TAU
}

/// Solves for the stream function on `domain`.
///
/// `boundary_velocities[0]` belongs to the outer wall and must be zero;
/// `boundary_velocities[i + 1]` is the translation velocity of hole `i`.
pub fn solve_stream(
    domain: &DomainSnapshot,
    conditions: &FlowConditions,
    boundary_velocities: &[Vec2],
    opts: &SolverOptions,
) -> Result<StreamModel, FieldError> {
    opts.validate()?;
    let m = domain.hole_count();
    if conditions.hole_count() != m {
        return Err(FieldError::CirculationCount {
            expected: m + 1,
            got: conditions.circulations.len(),
        });
    }
    if boundary_velocities.len() != m + 1 {
        return Err(FieldError::VelocityCount {
            expected: m + 1,
            got: boundary_velocities.len(),
        });
    }
    if boundary_velocities[0] != Vec2::ZERO {
        return Err(FieldError::MovingOuterWall);
    }

    let omega = conditions.vorticity;
    let eps = domain.radius;
    let k_max = opts.order;
    let k_outer = opts.outer_order;
    let n = opts.nodes_per_boundary;
    let logs: Vec<f64> = conditions.circulations[1..]
        .iter()
        .map(|&g| log_strength(g, omega, eps))
        .collect();

    // Columns: A_0 (real), (Re, Im) A_k for k ≥ 1, (Re, Im) B_ik, then s_1..s_m.
    let taylor_cols = 1 + 2 * k_outer;
    let hole_cols = 2 * k_max;
    let cols = taylor_cols + m * hole_cols + m;
    let rows = n * (m + 1);
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);

    let node = |boundary: usize, j: usize| -> Point {
        let theta = TAU * j as f64 / n as f64;
        let dir = Vec2::new(libm::cos(theta), libm::sin(theta));
        if boundary == 0 {
            dir
        } else {
            domain.centers[boundary - 1] + dir * eps
        }
    };

    let mut row = 0;
    for boundary in 0..=m {
        let u = boundary_velocities[boundary];
        for j in 0..n {
            let z = node(boundary, j);
            let zc = z.to_complex();

            // Re(A z^k) = p Re z^k + q Im z^k with A = p − i q.
            a[(row, 0)] = 1.0;
            let mut zk = Complex64::new(1.0, 0.0);
            for k in 1..=k_outer {
                zk *= zc;
                a[(row, 2 * k - 1)] = zk.re;
                a[(row, 2 * k)] = zk.im;
            }
            for (i, &c) in domain.centers.iter().enumerate() {
                let w = Complex64::new(eps, 0.0) / (zc - c.to_complex());
                let base = taylor_cols + i * hole_cols;
                let mut wk = Complex64::new(1.0, 0.0);
                for k in 1..=k_max {
                    wk *= w;
                    a[(row, base + 2 * (k - 1))] = wk.re;
                    a[(row, base + 2 * (k - 1) + 1)] = wk.im;
                }
            }
            if boundary > 0 {
                a[(row, taylor_cols + m * hole_cols + boundary - 1)] = -1.0;
            }

            let mut rhs = u.x * z.y - u.y * z.x + 0.25 * omega * z.norm_sq();
            for (i, &c) in domain.centers.iter().enumerate() {
                rhs -= logs[i] * log((z - c).norm());
            }
            b[row] = rhs;
            row += 1;
        }
    }

    let (x, condition_number) = least_squares(a, b, opts.min_singular_ratio)?;

    let complex_pair = |base: usize| Complex64::new(x[base], -x[base + 1]);
    let mut taylor = Vec::with_capacity(k_outer + 1);
    taylor.push(Complex64::new(x[0], 0.0));
    for k in 1..=k_outer {
        taylor.push(complex_pair(2 * k - 1));
    }
    let laurent: Vec<Vec<Complex64>> = (0..m)
        .map(|i| {
            let base = taylor_cols + i * hole_cols;
            (0..k_max).map(|k| complex_pair(base + 2 * k)).collect()
        })
        .collect();
    let mut constants = vec![0.0];
    constants.extend((0..m).map(|i| x[taylor_cols + m * hole_cols + i]));

    let mut model = StreamModel::from_coefficients(
        omega,
        eps,
        taylor,
        &domain.centers,
        &logs,
        laurent,
        constants,
    );
    let mut report = residual_report(&model, domain, conditions, boundary_velocities, 4 * n);
    report.condition_number = condition_number;
    if !(report.max_normal_residual <= opts.residual_tolerance) {
        return Err(FieldError::ResidualTooLarge {
            residual: report.max_normal_residual,
            tolerance: opts.residual_tolerance,
        });
    }
    model.residual = report;
    Ok(model)
}

/// Column-scaled least squares by Householder QR. Returns the solution and
/// the condition number of the scaled matrix.
fn least_squares(
    mut a: DMatrix<f64>,
    b: DVector<f64>,
    min_ratio: f64,
) -> Result<(DVector<f64>, f64), FieldError> {
    let cols = a.ncols();
    let mut scale = DVector::<f64>::zeros(cols);
    for (j, mut col) in a.column_iter_mut().enumerate() {
        let norm = col.norm();
        let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        col *= s;
        scale[j] = s;
    }
    let qr = a.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio >= min_ratio) || ratio == 0.0 {
        return Err(FieldError::IllConditioned(ratio));
    }
    let mut rhs = b;
    qr.q_tr_mul(&mut rhs);
    let rhs = rhs.rows(0, cols).into_owned();
    let y = r
        .solve_upper_triangular(&rhs)
        .ok_or(FieldError::IllConditioned(ratio))?;
    Ok((y.component_mul(&scale), 1.0 / ratio))
}

/// Boundary residuals of `model` sampled at `samples` equispaced points per
/// circle. The condition number is left at zero.
pub fn residual_report(
    model: &StreamModel,
    domain: &DomainSnapshot,
    conditions: &FlowConditions,
    boundary_velocities: &[Vec2],
    samples: usize,
) -> ResidualReport {
    let m = domain.hole_count();
    let mut max_normal_residual: f64 = 0.0;
    let mut circulation_errors = Vec::with_capacity(m + 1);
    let dtheta = TAU / samples as f64;
    for boundary in 0..=m {
        let (center, radius, orientation) = if boundary == 0 {
            (Vec2::ZERO, OUTER_RADIUS, 1.0)
        } else {
            (domain.centers[boundary - 1], domain.radius, -1.0)
        };
        let u = boundary_velocities
            .get(boundary)
            .copied()
            .unwrap_or(Vec2::ZERO);
        let mut circulation = 0.0;
        for j in 0..samples {
            let theta = j as f64 * dtheta;
            let n = Vec2::new(libm::cos(theta), libm::sin(theta));
            let z = center + n * radius;
            let x = model.velocity_unchecked(z);
            max_normal_residual = max_normal_residual.max(abs((x - u).dot(n)));
            circulation += orientation * x.dot(n.perp()) * radius * dtheta;
        }
        let gamma = conditions
            .circulations
            .get(boundary)
            .copied()
            .unwrap_or(0.0);
        circulation_errors.push(abs(circulation - gamma));
    }
    ResidualReport {
        max_normal_residual,
        circulation_errors,
        condition_number: 0.0,
    }
}
