//! Tracer and flow-map integration under the solved, time-dependent field.
//!
//! Trajectories use fixed-step classical RK4. Jacobians of the flow map come
//! from the variational equation `dJ/dt = ∇X(φ_t) J`, `J(t₀) = I`,
//! integrated alongside the trajectory with the same stages.

use alloc::borrow::Cow;
use alloc::boxed::Box;
use alloc::vec::Vec;

use once_cell::race::OnceBox;
use thiserror::Error;

use crate::field::{
    solve_stream, DomainSnapshot, FieldError, FlowConditions, SolverOptions, StreamModel, LANES,
};
use crate::geom::{abs, Mat2, Point, Vec2};
use crate::protocol::{permutation_order, StirringProtocol};

/// Excursions beyond the fluid larger than this abort the integration.
pub const LEAVE_TOLERANCE: f64 = 1e-6;
/// Points closer than this to a wall are pushed this far inside it.
pub const GRAZE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("tracer at ({}, {}) left the fluid by {depth:e} at t = {time}", .point.x, .point.y)]
    LeftDomain { point: Point, depth: f64, time: f64 },
    #[error("tracer starts outside the fluid at ({}, {})", .0.x, .0.y)]
    StartsOutside(Point),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("time step must be positive and finite")]
    BadStep,
}

#[derive(Debug, Clone)]
enum Stirrers {
    Protocol(StirringProtocol),
    /// Holes that never move; `period` is only a time unit.
    Fixed {
        centers: Vec<Point>,
        radius: f64,
        period: f64,
    },
}

/// Supplies the velocity field `X(z, t)` compatible with a stirring protocol.
///
/// Stream models are memoized on a time grid of spacing `quantum` covering
/// the cycle after which the field repeats. When the hole circulations are
/// invariant under the period permutation that cycle is one period,
/// otherwise it is `order(σ)` periods. Times off the grid are solved on
/// demand and not cached.
pub struct VelocityProvider {
    stirrers: Stirrers,
    conditions: FlowConditions,
    solver: SolverOptions,
    steady: Option<StreamModel>,
    quantum: f64,
    cycle: usize,
    cache: Vec<OnceBox<StreamModel>>,
}

impl core::fmt::Debug for VelocityProvider {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("VelocityProvider")
            .field("period", &self.period())
            .field("quantum", &self.quantum)
            .field("cycle", &self.cycle)
            .field("steady", &self.steady.is_some())
            .finish()
    }
}

impl VelocityProvider {
    /// Provider for a stirring protocol; `quantum` is the cache spacing,
    /// normally half the RK4 step.
    pub fn new(
        protocol: StirringProtocol,
        conditions: FlowConditions,
        solver: SolverOptions,
        quantum: f64,
    ) -> Result<Self, TransportError> {
        if conditions.hole_count() != 3 {
            return Err(FieldError::CirculationCount {
                expected: 4,
                got: conditions.circulations().len(),
            }
            .into());
        }
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(TransportError::BadStep);
        }
        solver.validate()?;
        let period = protocol.period();
        let sigma = protocol.permutation();
        let gammas = &conditions.circulations()[1..];
        let invariant = (0..3).all(|i| gammas[sigma[i]] == gammas[i]);
        let cycle = if invariant {
            1
        } else {
            permutation_order(&sigma)
        };
        let keys = libm::round(period / quantum);
        let on_grid = abs(keys * quantum - period) <= 1e-9 * period;
        let keys_per_period = if on_grid { keys as usize } else { 0 };

        let mut vp = VelocityProvider {
            stirrers: Stirrers::Protocol(protocol),
            conditions,
            solver,
            steady: None,
            quantum,
            cycle,
            cache: Vec::new(),
        };
        let stationary = matches!(&vp.stirrers, Stirrers::Protocol(p) if p.is_stationary());
        if stationary {
            vp.steady = Some(vp.solve_at(0.0)?);
        } else {
            vp.cache = (0..keys_per_period * cycle)
                .map(|_| OnceBox::new())
                .collect();
        }
        Ok(vp)
    }

    /// Steady field around holes that never move. `period` sets the time
    /// unit used by period-based operations.
    pub fn stationary(
        centers: Vec<Point>,
        radius: f64,
        conditions: FlowConditions,
        solver: SolverOptions,
        period: f64,
    ) -> Result<Self, TransportError> {
        let mut vp = VelocityProvider {
            stirrers: Stirrers::Fixed {
                centers,
                radius,
                period,
            },
            conditions,
            solver,
            steady: None,
            quantum: period,
            cycle: 1,
            cache: Vec::new(),
        };
        vp.steady = Some(vp.solve_at(0.0)?);
        Ok(vp)
    }

    pub fn period(&self) -> f64 {
        match &self.stirrers {
            Stirrers::Protocol(p) => p.period(),
            Stirrers::Fixed { period, .. } => *period,
        }
    }

    pub fn protocol(&self) -> Option<&StirringProtocol> {
        match &self.stirrers {
            Stirrers::Protocol(p) => Some(p),
            Stirrers::Fixed { .. } => None,
        }
    }

    pub fn conditions(&self) -> &FlowConditions {
        &self.conditions
    }

    pub fn solver_options(&self) -> &SolverOptions {
        &self.solver
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    /// Whether `X(·, t + T) = X(·, t)`.
    pub fn is_periodic(&self) -> bool {
        self.steady.is_some() || self.cycle == 1
    }

    pub fn is_steady(&self) -> bool {
        self.steady.is_some()
    }

    pub fn domain(&self, t: f64) -> DomainSnapshot {
        match &self.stirrers {
            Stirrers::Protocol(p) => DomainSnapshot::from_protocol(p, t),
            Stirrers::Fixed {
                centers, radius, ..
            } => DomainSnapshot::new(centers.clone(), *radius, t),
        }
    }

    /// Outer wall velocity (zero) followed by hole velocities at `t`.
    pub fn boundary_velocities(&self, t: f64) -> Vec<Vec2> {
        let mut v = alloc::vec![Vec2::ZERO];
        match &self.stirrers {
            Stirrers::Protocol(p) => v.extend_from_slice(&p.velocities(t)),
            Stirrers::Fixed { centers, .. } => v.extend(centers.iter().map(|_| Vec2::ZERO)),
        }
        v
    }

    /// Solves the snapshot at `t`, bypassing the cache.
    pub fn solve_at(&self, t: f64) -> Result<StreamModel, FieldError> {
        let domain = self.domain(t);
        solve_stream(
            &domain,
            &self.conditions,
            &self.boundary_velocities(t),
            &self.solver,
        )
    }

    fn cache_slot(&self, t: f64) -> Option<usize> {
        if self.cache.is_empty() {
            return None;
        }
        let span = self.period() * self.cycle as f64;
        let phase = t - libm::floor(t / span) * span;
        let key = libm::round(phase / self.quantum);
        if abs(key * self.quantum - phase) > 1e-9 * self.quantum.max(1.0) {
            return None;
        }
        Some((key as usize) % self.cache.len())
    }

    /// The stream model in force at time `t`.
    pub fn model(&self, t: f64) -> Result<Cow<'_, StreamModel>, FieldError> {
        if let Some(m) = &self.steady {
            return Ok(Cow::Borrowed(m));
        }
        match self.cache_slot(t) {
            Some(slot) => {
                let m = self.cache[slot].get_or_try_init(|| self.solve_at(t).map(Box::new))?;
                Ok(Cow::Borrowed(m))
            }
            None => Ok(Cow::Owned(self.solve_at(t)?)),
        }
    }

    /// Number of cached time keys.
    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    /// Times of every cache key.
    pub fn cache_times(&self) -> Vec<f64> {
        (0..self.cache.len())
            .map(|k| k as f64 * self.quantum)
            .collect()
    }

    /// Solves every cached snapshot up front.
    pub fn precompute(&self) -> Result<(), FieldError> {
        let times = self.cache_times();
        for_each_index(times.len(), |k| self.model(times[k]).map(|_| ()))
    }

    pub fn velocity(&self, z: Point, t: f64) -> Result<Vec2, FieldError> {
        self.model(t)?.velocity(z)
    }

    pub fn velocity_gradient(&self, z: Point, t: f64) -> Result<Mat2, FieldError> {
        self.model(t)?.velocity_gradient(z)
    }
}

#[cfg(feature = "parallel")]
fn for_each_index<E: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<(), E> + Sync + Send,
) -> Result<(), E> {
    use rayon::prelude::*;
    (0..n).into_par_iter().try_for_each(f)
}

#[cfg(not(feature = "parallel"))]
fn for_each_index<E>(n: usize, f: impl Fn(usize) -> Result<(), E>) -> Result<(), E> {
    (0..n).try_for_each(f)
}

#[cfg(feature = "parallel")]
fn for_each_mut<T: Send, E: Send>(
    items: &mut [T],
    f: impl Fn(&mut T) -> Result<(), E> + Sync + Send,
) -> Result<(), E> {
    use rayon::prelude::*;
    items.par_iter_mut().with_min_len(64).try_for_each(f)
}

#[cfg(not(feature = "parallel"))]
fn for_each_mut<T, E>(items: &mut [T], f: impl Fn(&mut T) -> Result<(), E>) -> Result<(), E> {
    items.iter_mut().try_for_each(f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub dt: f64,
}

impl IntegratorOptions {
    /// `T / 2000`.
    pub fn for_period(period: f64) -> Self {
        IntegratorOptions {
            dt: period / 2000.0,
        }
    }

    pub fn steps_per_period(period: f64, steps: usize) -> Self {
        IntegratorOptions {
            dt: period / steps as f64,
        }
    }
}

/// A flow-map sample: image point and Jacobian over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMapSample {
    pub point: Point,
    pub jacobian: Mat2,
    pub t0: f64,
    pub t1: f64,
}

/// Projects an RK stage point to just inside the fluid. Stage points of a
/// step that ends inside may overshoot a curved wall by O(h²).
#[inline]
fn stage_point(model: &StreamModel, z: Point) -> Point {
    let prox = model.proximity(z);
    if prox.depth > -GRAZE_DISTANCE {
        z + prox.inward_normal * (prox.depth + GRAZE_DISTANCE)
    } else {
        z
    }
}

/// Pushes grazing points inside; fails on real excursions.
#[inline]
fn guard(model: &StreamModel, z: Point, t: f64) -> Result<Point, TransportError> {
    let prox = model.proximity(z);
    if prox.depth > LEAVE_TOLERANCE || !z.is_finite() {
        return Err(TransportError::LeftDomain {
            point: z,
            depth: prox.depth,
            time: t,
        });
    }
    if prox.depth > -GRAZE_DISTANCE {
        Ok(z + prox.inward_normal * (prox.depth + GRAZE_DISTANCE))
    } else {
        Ok(z)
    }
}

struct Stage<'a> {
    start: Cow<'a, StreamModel>,
    mid: Cow<'a, StreamModel>,
    end: Cow<'a, StreamModel>,
    t: f64,
    h: f64,
}

impl Stage<'_> {
    #[inline]
    fn point(&self, z: Point) -> Result<Point, TransportError> {
        let (h, t) = (self.h, self.t);
        let k1 = self.start.velocity_unchecked(stage_point(&self.start, z));
        let k2 = self
            .mid
            .velocity_unchecked(stage_point(&self.mid, z + k1 * (0.5 * h)));
        let k3 = self
            .mid
            .velocity_unchecked(stage_point(&self.mid, z + k2 * (0.5 * h)));
        let k4 = self
            .end
            .velocity_unchecked(stage_point(&self.end, z + k3 * h));
        let next = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        guard(&self.end, next, t + h)
    }

    /// [`point`](Self::point) on a chunk, lane-parallel when it is full.
    fn chunk(&self, zs: &mut [Point]) -> Result<(), TransportError> {
        let Ok(z) = <&mut [Point; LANES]>::try_from(&mut *zs) else {
            for z in zs {
                *z = self.point(*z)?;
            }
            return Ok(());
        };
        let h = self.h;
        let lanes =
            |m: &StreamModel, p: [Point; LANES]| m.velocity_lanes(&p.map(|q| stage_point(m, q)));
        let k1 = lanes(&self.start, *z);
        let k2 = lanes(
            &self.mid,
            core::array::from_fn(|l| z[l] + k1[l] * (0.5 * h)),
        );
        let k3 = lanes(
            &self.mid,
            core::array::from_fn(|l| z[l] + k2[l] * (0.5 * h)),
        );
        let k4 = lanes(&self.end, core::array::from_fn(|l| z[l] + k3[l] * h));
        for l in 0..LANES {
            let next = z[l] + (k1[l] + k2[l] * 2.0 + k3[l] * 2.0 + k4[l]) * (h / 6.0);
            z[l] = guard(&self.end, next, self.t + h)?;
        }
        Ok(())
    }

    #[inline]
    fn with_jacobian(&self, z: Point, j: Mat2) -> Result<(Point, Mat2), TransportError> {
        let (h, t) = (self.h, self.t);
        let (v1, g1) = self
            .start
            .velocity_and_gradient_unchecked(stage_point(&self.start, z));
        let j1 = g1 * j;
        let (v2, g2) = self
            .mid
            .velocity_and_gradient_unchecked(stage_point(&self.mid, z + v1 * (0.5 * h)));
        let j2 = g2 * (j + j1.scale(0.5 * h));
        let (v3, g3) = self
            .mid
            .velocity_and_gradient_unchecked(stage_point(&self.mid, z + v2 * (0.5 * h)));
        let j3 = g3 * (j + j2.scale(0.5 * h));
        let (v4, g4) = self
            .end
            .velocity_and_gradient_unchecked(stage_point(&self.end, z + v3 * h));
        let j4 = g4 * (j + j3.scale(h));
        let next = z + (v1 + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
        let jn = j + (j1 + j2.scale(2.0) + j3.scale(2.0) + j4).scale(h / 6.0);
        Ok((guard(&self.end, next, t + h)?, jn))
    }
}

/// Drives `step` over `[t0, t1]` in equal steps of size close to `opts.dt`.
fn march<T, F>(
    states: &mut [T],
    t0: f64,
    t1: f64,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
    step: F,
) -> Result<(), TransportError>
where
    T: Send,
    F: Fn(&Stage<'_>, &mut T) -> Result<(), TransportError> + Sync + Send,
{
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(TransportError::BadStep);
    }
    let span = t1 - t0;
    let n = libm::round(abs(span) / opts.dt).max(1.0) as usize;
    if span == 0.0 || states.is_empty() {
        return Ok(());
    }
    let h = span / n as f64;
    let mut start = vp.model(t0)?;
    for i in 0..n {
        let t = t0 + span * (i as f64 / n as f64);
        let t_end = t0 + span * ((i + 1) as f64 / n as f64);
        let mid = vp.model(0.5 * (t + t_end))?;
        let end = vp.model(t_end)?;
        let stage = Stage {
            start,
            mid,
            end,
            t,
            h,
        };
        for_each_mut(states, |s| step(&stage, s))?;
        start = stage.end;
    }
    Ok(())
}

fn check_start(vp: &VelocityProvider, points: &[Point], t0: f64) -> Result<(), TransportError> {
    let model = vp.model(t0)?;
    match points
        .iter()
        .find(|&&z| model.proximity(z).depth > LEAVE_TOLERANCE)
    {
        Some(&z) => Err(TransportError::StartsOutside(z)),
        None => Ok(()),
    }
}

/// Positions at `t1` of tracers released at `t0`. Backward in time when
/// `t1 < t0`.
pub fn advect(
    points: &[Point],
    t0: f64,
    t1: f64,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<Vec<Point>, TransportError> {
    check_start(vp, points, t0)?;
    let mut states = points.to_vec();
    advect_in_place(&mut states, t0, t1, vp, opts)?;
    Ok(states)
}

/// [`advect`] on a caller-owned buffer.
pub fn advect_in_place(
    points: &mut [Point],
    t0: f64,
    t1: f64,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<(), TransportError> {
    let mut chunks: Vec<&mut [Point]> = points.chunks_mut(LANES).collect();
    march(&mut chunks, t0, t1, vp, opts, |stage, zs| stage.chunk(zs))
}

/// Positions and flow-map Jacobians at `t1`.
pub fn advect_with_jacobian(
    points: &[Point],
    t0: f64,
    t1: f64,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<Vec<FlowMapSample>, TransportError> {
    check_start(vp, points, t0)?;
    let mut states: Vec<FlowMapSample> = points
        .iter()
        .map(|&point| FlowMapSample {
            point,
            jacobian: Mat2::IDENTITY,
            t0,
            t1: t0,
        })
        .collect();
    continue_with_jacobian(&mut states, t1, vp, opts)?;
    Ok(states)
}

/// Extends each sample from its `t1` to `t_end`, composing Jacobians.
/// All samples must share the same `t1`.
pub fn continue_with_jacobian(
    samples: &mut [FlowMapSample],
    t_end: f64,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<(), TransportError> {
    let Some(first) = samples.first() else {
        return Ok(());
    };
    let t_start = first.t1;
    march(samples, t_start, t_end, vp, opts, |stage, s| {
        let (z, j) = stage.with_jacobian(s.point, s.jacobian)?;
        s.point = z;
        s.jacobian = j;
        Ok(())
    })?;
    for s in samples.iter_mut() {
        s.t1 = t_end;
    }
    Ok(())
}

/// `φ_n⁻¹` and its Jacobian at `points`: backward integration from `nT` to 0.
pub fn inverse_flow(
    points: &[Point],
    periods: usize,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<Vec<FlowMapSample>, TransportError> {
    let t_n = periods as f64 * vp.period();
    advect_with_jacobian(points, t_n, 0.0, vp, opts)
}

/// `φ_n⁻¹` for every `n = 1..=max_periods`. For a T-periodic field
/// `φ_n⁻¹ = φ_1⁻¹ ∘ φ_{n−1}⁻¹`, so each level costs one period; otherwise
/// every level is integrated from `nT`.
pub fn inverse_flow_series(
    points: &[Point],
    max_periods: usize,
    vp: &VelocityProvider,
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<FlowMapSample>>, TransportError> {
    let period = vp.period();
    let mut out = Vec::with_capacity(max_periods);
    if vp.is_periodic() {
        check_start(vp, points, 0.0)?;
        let mut states: Vec<FlowMapSample> = points
            .iter()
            .map(|&point| FlowMapSample {
                point,
                jacobian: Mat2::IDENTITY,
                t0: 0.0,
                t1: period,
            })
            .collect();
        for n in 1..=max_periods {
            // Each pass applies the one-period backward map T → 0.
            continue_with_jacobian(&mut states, 0.0, vp, opts)?;
            out.push(
                states
                    .iter()
                    .map(|s| FlowMapSample {
                        t0: n as f64 * period,
                        t1: 0.0,
                        ..*s
                    })
                    .collect(),
            );
            for s in states.iter_mut() {
                s.t1 = period;
            }
        }
    } else {
        for n in 1..=max_periods {
            out.push(inverse_flow(points, n, vp, opts)?);
        }
    }
    Ok(out)
}
