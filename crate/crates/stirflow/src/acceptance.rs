//! Reference checks for the whole pipeline, one per criterion.
//!
//! Every check returns an [`Outcome`] instead of panicking, so a failing
//! criterion is reported and the rest still run. Expected values come from
//! closed forms in [`oracle`], never from the code under test.

use std::fmt;
use std::time::Instant;

use once_cell::sync::OnceCell;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stirflow_core::braid::{burau_at_minus_one, classify, parse_braid, BraidWord, TnClass};
use stirflow_core::diagnostics::{
    circulation_drift, estimate_growth_rate, evolve_curve, interior_grid,
    vorticity_gradient_growth, CurveOptions, GrowthSeries, MaterialCurve, VorticityField,
    DEFAULT_DELTA,
};
use stirflow_core::field::{
    residual_report, solve_stream, DomainSnapshot, FlowConditions, SolverOptions,
};
use stirflow_core::protocol::{build_protocol, StirrerConfig, StirringProtocol};
use stirflow_core::transport::{advect, advect_with_jacobian, IntegratorOptions, VelocityProvider};
use stirflow_core::{Point, Vec2};

/// RK4 steps per braid letter. Two letters per period give `T / 2000` for
/// the canonical protocol.
pub const STEPS_PER_LETTER: usize = 1000;
/// Periods of the growth experiments; fits use periods 4 to 8.
pub const GROWTH_PERIODS: usize = 8;
pub const CANONICAL_WORD: &str = "1 -2";
/// Coarser of the two curve resolutions in the growth experiment.
pub const GROWTH_DELTA: f64 = 1e-2;
pub const FINITE_ORDER_WORD: &str = "1 2 1 2 1 2 1 2 1 2 1 2";
/// Vertex budget of the finite-order control. Reaching it already rules out
/// a rate of 0.2.
pub const CONTRAST_BUDGET: usize = 200_000;

/// Closed-form expectations.
pub mod oracle {
    use super::*;

    pub type M = [[i64; 2]; 2];

    pub const SIGMA1: M = [[1, 1], [0, 1]];
    pub const SIGMA2: M = [[1, 0], [-1, 1]];

    pub fn mul(a: M, b: M) -> M {
        let mut c = [[0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    /// Inverse of a determinant-one matrix.
    pub fn inv(a: M) -> M {
        [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
    }

    /// Product of the reference generator images, letter by letter.
    pub fn chi(word: &BraidWord) -> M {
        word.letters().iter().fold([[1, 0], [0, 1]], |acc, l| {
            let g = if l.generator() == 1 { SIGMA1 } else { SIGMA2 };
            mul(acc, if l.is_inverse() { inv(g) } else { g })
        })
    }

    /// `(3 + √5) / 2`, the larger root of `x² − 3x + 1`.
    pub fn golden_square() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    /// Point vortex of strength `gamma` at the origin.
    pub fn vortex_velocity(gamma: f64, z: Point) -> Vec2 {
        Vec2::new(-z.y, z.x) * (gamma / (2.0 * std::f64::consts::PI * z.norm_sq()))
    }

    /// Rigid rotation with vorticity `omega`.
    pub fn solid_body_velocity(omega: f64, z: Point) -> Vec2 {
        Vec2::new(-z.y, z.x) * (0.5 * omega)
    }

    /// Exact position after `t` of solid-body rotation with vorticity `omega`.
    pub fn solid_body_position(omega: f64, z: Point, t: f64) -> Point {
        let (s, c) = (0.5 * omega * t).sin_cos();
        Vec2::new(c * z.x - s * z.y, s * z.x + c * z.y)
    }

    /// The vertical chord `x = const` through the gap between the first two
    /// stirrers.
    pub fn gap_chord(config: &StirrerConfig) -> (Point, Point) {
        let x = 0.5 * (config.centers[0].x + config.centers[1].x);
        let y = (1.0 - x * x).sqrt();
        (Vec2::new(x, -y), Vec2::new(x, y))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {} ({}) [{:.1} s]: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.detail
        )
    }
}

pub const TITLES: [&str; 9] = [
    "braid algebra exactness",
    "exact-solution recovery",
    "solver residuals on moving domains",
    "area preservation and RK4 order",
    "pseudo-Anosov curve growth",
    "vorticity gradient growth",
    "contrast controls",
    "circulation preservation",
    "braid round trip",
];

type Check = Result<(bool, String), String>;

fn fail(e: impl fmt::Display) -> String {
    e.to_string()
}

/// Shared flows, built on first use.
#[derive(Default)]
pub struct Suite {
    canonical: OnceCell<VelocityProvider>,
}

/// Canonical protocol flow (Ω = 0, every Γ = 0) or any other word with the
/// same per-letter timing.
pub fn provider_for(word: &str, conditions: FlowConditions) -> Result<VelocityProvider, String> {
    let w = parse_braid(word).map_err(fail)?;
    let p = build_protocol(&w, StirrerConfig::default(), 1.0).map_err(fail)?;
    provider(p, conditions)
}

fn provider(p: StirringProtocol, conditions: FlowConditions) -> Result<VelocityProvider, String> {
    let dt = integrator(&p).dt;
    VelocityProvider::new(p, conditions, SolverOptions::default(), 0.5 * dt).map_err(fail)
}

/// `STEPS_PER_LETTER` steps per time unit.
pub fn integrator(p: &StirringProtocol) -> IntegratorOptions {
    let letters = p.period().round().max(1.0) as usize;
    IntegratorOptions::steps_per_period(p.period(), STEPS_PER_LETTER * letters)
}

fn essential_arc(delta: f64) -> MaterialCurve {
    let (a, b) = oracle::gap_chord(&StirrerConfig::default());
    MaterialCurve::segment(a, b).with_delta(delta)
}

fn rate(series: &GrowthSeries) -> Result<f64, String> {
    Ok(estimate_growth_rate(series).map_err(fail)?.slope)
}

fn fitted(series: &GrowthSeries) -> Option<f64> {
    estimate_growth_rate(series).ok().map(|f| f.slope)
}

fn describe(series: &GrowthSeries, rate: Option<f64>) -> String {
    let budget = if series.budget_exceeded {
        format!(
            ", vertex budget exceeded after period {}",
            series.values.len() - 1
        )
    } else {
        String::new()
    };
    match rate {
        Some(r) => format!("rate {r:.4}{budget}"),
        None => match series.values.as_slice() {
            [first, .., last] if *first > 0.0 && *last > 0.0 => format!(
                "too few periods to fit, mean log growth {:.4} per period{budget}",
                (last / first).ln() / (series.values.len() - 1) as f64
            ),
            _ => format!("too few periods to fit{budget}"),
        },
    }
}

fn lengths(series: &GrowthSeries) -> String {
    let l: Vec<String> = series.values.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", l.join(", "))
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn canonical(&self) -> Result<&VelocityProvider, String> {
        self.canonical.get_or_try_init(|| {
            let vp = provider_for(CANONICAL_WORD, FlowConditions::quiescent(3))?;
            vp.precompute().map_err(fail)?;
            Ok(vp)
        })
    }

    pub fn run(&self, id: usize) -> Outcome {
        let start = Instant::now();
        let result = match id {
            1 => self.braid_algebra(),
            2 => self.exact_solutions(),
            3 => self.moving_residuals(),
            4 => self.area_preservation(),
            5 => self.curve_growth(),
            6 => self.gradient_growth(),
            7 => self.contrast_controls(),
            8 => self.circulation(),
            9 => self.round_trip(),
            _ => Err(format!("no criterion {id}")),
        };
        let seconds = start.elapsed().as_secs_f64();
        let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        Outcome {
            id,
            title: TITLES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown"),
            passed,
            detail,
            seconds,
        }
    }

    /// Runs every criterion in order, calling `each` as results arrive.
    pub fn run_all(&self, mut each: impl FnMut(&Outcome)) -> Vec<Outcome> {
        (1..=TITLES.len())
            .map(|id| {
                let o = self.run(id);
                each(&o);
                o
            })
            .collect()
    }

    fn braid_algebra(&self) -> Check {
        let start = Instant::now();
        let chi = |s: &str| -> Result<oracle::M, String> {
            let m = burau_at_minus_one(&parse_braid(s).map_err(fail)?).map_err(fail)?;
            Ok([[m.a, m.b], [m.c, m.d]])
        };
        let mut bad = Vec::new();
        if chi("1")? != oracle::SIGMA1 || chi("2")? != oracle::SIGMA2 {
            bad.push("generator images".to_string());
        }
        if chi("1 2 1 2 1 2")? != [[-1, 0], [0, -1]] {
            bad.push("(s1 s2)^3 != -I".into());
        }
        let canonical = classify(&parse_braid(CANONICAL_WORD).map_err(fail)?).map_err(fail)?;
        let lambda = oracle::golden_square();
        match canonical {
            TnClass::PseudoAnosov {
                trace: 3,
                expansion,
            } if (expansion - lambda).abs() < 1e-12 => {}
            other => bad.push(format!("canonical class {other:?}")),
        }

        let words: Vec<BraidWord> = (0..=4).flat_map(BraidWord::all_of_length).collect();
        let images: Vec<oracle::M> = words
            .iter()
            .map(|w| burau_at_minus_one(w).map(|m| [[m.a, m.b], [m.c, m.d]]))
            .collect::<Result<_, _>>()
            .map_err(fail)?;
        let mut checked = 0usize;
        for (w, &m) in words.iter().zip(&images) {
            if m != oracle::chi(w) {
                bad.push(format!("image of {w}"));
            }
            if m[0][0] * m[1][1] - m[0][1] * m[1][0] != 1 {
                bad.push(format!("det of {w}"));
            }
            let inv = burau_at_minus_one(&w.inverse()).map_err(fail)?;
            if [[inv.a, inv.b], [inv.c, inv.d]] != oracle::inv(m) {
                bad.push(format!("inverse of {w}"));
            }
        }
        for (u, &mu) in words.iter().zip(&images) {
            let mu_inv = oracle::inv(mu);
            for (v, &mv) in words.iter().zip(&images) {
                let uv = burau_at_minus_one(&u.concat(v)).map_err(fail)?;
                if [[uv.a, uv.b], [uv.c, uv.d]] != oracle::mul(mu, mv) {
                    bad.push(format!("homomorphism at {u} | {v}"));
                }
                let conj = u.concat(v).concat(&u.inverse());
                let cm = oracle::mul(oracle::mul(mu, mv), mu_inv);
                let class = classify(&conj).map_err(fail)?;
                if class.trace() != cm[0][0] + cm[1][1]
                    || class.trace() != mv[0][0] + mv[1][1]
                    || class.name() != classify(v).map_err(fail)?.name()
                {
                    bad.push(format!("conjugacy at {u} | {v}"));
                }
                checked += 1;
            }
            if bad.len() > 10 {
                break;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        if secs >= 1.0 {
            bad.push(format!("took {secs:.2} s"));
        }
        Ok((
            bad.is_empty(),
            format!(
                "{} words, {checked} pairs, lambda = {:.15}, {}",
                words.len(),
                canonical.expansion().unwrap_or(f64::NAN),
                if bad.is_empty() {
                    "all exact".into()
                } else {
                    bad.join("; ")
                }
            ),
        ))
    }

    fn exact_solutions(&self) -> Check {
        let start = Instant::now();
        let opts = SolverOptions::with_order(8);
        let mut rng = StdRng::seed_from_u64(2);

        let (eps, gamma) = (0.1, 0.7);
        let dom = DomainSnapshot::new(vec![Vec2::ZERO], eps, 0.0);
        let cond = FlowConditions::new(0.0, vec![gamma, -gamma], eps).map_err(fail)?;
        let m = solve_stream(&dom, &cond, &[Vec2::ZERO; 2], &opts).map_err(fail)?;
        let mut annulus: f64 = 0.0;
        for _ in 0..100 {
            let r = rng.gen_range(eps + 0.01..0.99);
            let z = Vec2::new(r, 0.0).rotated(rng.gen_range(0.0..std::f64::consts::TAU));
            let exact = oracle::vortex_velocity(gamma, z);
            let v = m.velocity(z).map_err(fail)?;
            annulus = annulus.max((v - exact).norm() / exact.norm());
        }

        let omega = 1.3;
        let dom = DomainSnapshot::new(vec![], 0.0, 0.0);
        let cond =
            FlowConditions::new(omega, vec![omega * std::f64::consts::PI], 0.0).map_err(fail)?;
        let m = solve_stream(&dom, &cond, &[Vec2::ZERO], &opts).map_err(fail)?;
        let mut solid: f64 = 0.0;
        for _ in 0..100 {
            let r = rng.gen_range(0.01..0.99);
            let z = Vec2::new(r, 0.0).rotated(rng.gen_range(0.0..std::f64::consts::TAU));
            let exact = oracle::solid_body_velocity(omega, z);
            let v = m.velocity(z).map_err(fail)?;
            solid = solid.max((v - exact).norm() / exact.norm());
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((
            annulus < 1e-6 && solid < 1e-6 && secs < 5.0,
            format!("max relative error: annulus {annulus:.2e}, solid body {solid:.2e} (< 1e-6)"),
        ))
    }

    fn moving_residuals(&self) -> Check {
        let start = Instant::now();
        let vp = self.canonical()?;
        let (mut normal, mut circ): (f64, f64) = (0.0, 0.0);
        let times = vp.cache_times();
        for &t in &times {
            let m = vp.model(t).map_err(fail)?;
            let r = residual_report(
                &m,
                &vp.domain(t),
                vp.conditions(),
                &vp.boundary_velocities(t),
                512,
            );
            normal = normal.max(r.max_normal_residual);
            circ = circ.max(r.max_circulation_error());
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((
            normal < 1e-5 && circ < 1e-8 && secs < 60.0,
            format!(
                "{} stage snapshots, K = 12, 128 nodes: normal residual {normal:.2e} (< 1e-5), \
                 circulation error {circ:.2e} (< 1e-8)",
                times.len()
            ),
        ))
    }

    fn area_preservation(&self) -> Check {
        let vp = self.canonical()?;
        let t = vp.period();
        let dom = vp.domain(0.0);
        let mut rng = StdRng::seed_from_u64(4);
        let mut tracers = Vec::with_capacity(100);
        while tracers.len() < 100 {
            let z = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if dom.proximity(z).depth < -0.02 {
                tracers.push(z);
            }
        }
        let samples = advect_with_jacobian(&tracers, 0.0, t, vp, &IntegratorOptions::for_period(t))
            .map_err(fail)?;
        let area = samples
            .iter()
            .map(|s| (s.jacobian.det() - 1.0).abs())
            .fold(0.0, f64::max);

        let omega = 2.0;
        let cond =
            FlowConditions::new(omega, vec![omega * std::f64::consts::PI], 0.0).map_err(fail)?;
        let solid =
            VelocityProvider::stationary(vec![], 0.0, cond, SolverOptions::with_order(4), 1.0)
                .map_err(fail)?;
        let z0 = Vec2::new(0.6, 0.1);
        let span = 2.0 * std::f64::consts::PI;
        let exact = oracle::solid_body_position(omega, z0, span);
        let err = |dt: f64| -> Result<f64, String> {
            let z = advect(&[z0], 0.0, span, &solid, &IntegratorOptions { dt }).map_err(fail)?;
            Ok((z[0] - exact).norm())
        };
        let h = span / 40.0;
        let ratio = err(h)? / err(0.5 * h)?;
        Ok((
            area < 1e-5 && (12.0..=20.0).contains(&ratio),
            format!(
                "max |det - 1| = {area:.2e} over 100 tracers (< 1e-5); \
                 RK4 error ratio {ratio:.2} (in [12, 20])"
            ),
        ))
    }

    fn curve_growth(&self) -> Check {
        let vp = self.canonical()?;
        let opts = CurveOptions::new(IntegratorOptions::for_period(vp.period()));
        let bound = 0.9 * oracle::golden_square().ln();
        let mut passed = true;
        let mut parts = Vec::new();
        for delta in [GROWTH_DELTA, 0.5 * GROWTH_DELTA] {
            let evo =
                evolve_curve(essential_arc(delta), vp, GROWTH_PERIODS, &opts).map_err(fail)?;
            let r = fitted(&evo.series);
            passed &= r.is_some_and(|r| r >= bound) && !evo.series.budget_exceeded;
            parts.push(format!(
                "delta {delta:.1e}: {}, lengths {}, {} vertices",
                describe(&evo.series, r),
                lengths(&evo.series),
                evo.curve.vertex_count()
            ));
        }
        Ok((passed, format!("{} (bound {bound:.4})", parts.join("; "))))
    }

    fn gradient_growth(&self) -> Check {
        let vp = self.canonical()?;
        let grid = interior_grid(&vp.domain(0.0), 32, 0.5 * StirrerConfig::default().epsilon);
        let series = vorticity_gradient_growth(
            &VorticityField::LinearX,
            vp,
            &grid,
            GROWTH_PERIODS,
            &IntegratorOptions::for_period(vp.period()),
        )
        .map_err(fail)?;
        let r = rate(&series)?;
        let bound = 0.9 * oracle::golden_square().ln();
        Ok((
            r >= bound,
            format!(
                "rate {r:.4} (>= {bound:.4}) over {} grid points, max |grad| {}",
                grid.len(),
                lengths(&series)
            ),
        ))
    }

    fn contrast_controls(&self) -> Check {
        let hold_p = StirringProtocol::hold(StirrerConfig::default(), 2.0).map_err(fail)?;
        let hold = provider(hold_p, FlowConditions::quiescent(3))?;
        let opts = CurveOptions::new(integrator(hold.protocol().expect("protocol flow")));
        let evo = evolve_curve(essential_arc(DEFAULT_DELTA), &hold, GROWTH_PERIODS, &opts)
            .map_err(fail)?;
        let hold_rate = fitted(&evo.series);
        let hold_text = describe(&evo.series, hold_rate);

        let finite = provider_for(FINITE_ORDER_WORD, FlowConditions::quiescent(3))?;
        let opts = CurveOptions {
            vertex_budget: CONTRAST_BUDGET,
            ..CurveOptions::new(integrator(finite.protocol().expect("protocol flow")))
        };
        let evo = evolve_curve(essential_arc(DEFAULT_DELTA), &finite, GROWTH_PERIODS, &opts)
            .map_err(fail)?;
        let finite_rate = fitted(&evo.series);
        let stop = if evo.series.budget_exceeded {
            format!(
                ", length {:.1} at t = {:.2} (period {})",
                evo.curve.length(),
                evo.curve.time(),
                finite.period()
            )
        } else {
            String::new()
        };
        let pa = oracle::golden_square().ln() * 0.9;
        Ok((
            hold_rate.is_some_and(|r| r <= 0.05)
                && finite_rate.is_some_and(|r| r <= 0.2 && r < pa)
                && !evo.series.budget_exceeded,
            format!(
                "hold {hold_text} (<= 0.05); (s1 s2)^6 {} (<= 0.2), lengths {}{stop}",
                describe(&evo.series, finite_rate),
                lengths(&evo.series)
            ),
        ))
    }

    fn circulation(&self) -> Check {
        let holes = [0.1, 0.1, 0.1];
        let cfg = StirrerConfig::default();
        let cond = FlowConditions::balanced(0.0, &holes, cfg.epsilon);
        let vp = provider_for(CANONICAL_WORD, cond)?;
        let opts = CurveOptions::new(IntegratorOptions::for_period(vp.period()));
        let loop_ = MaterialCurve::circle(cfg.centers[1], 0.25);
        let series = circulation_drift(&vp, loop_, 1, &opts).map_err(fail)?;
        let drift = series.drift();
        Ok((
            drift < 1e-4,
            format!(
                "circulation {:?} around stirrer 2 (enclosed strength {}), drift {drift:.2e} (< 1e-4)",
                series.values, holes[1]
            ),
        ))
    }

    fn round_trip(&self) -> Check {
        let mut bad = Vec::new();
        let words: Vec<BraidWord> = (0..=4).flat_map(BraidWord::all_of_length).collect();
        for w in &words {
            let p = build_protocol(w, StirrerConfig::default(), 1.0).map_err(fail)?;
            match p.extract_braid(4000) {
                Ok(back) if back.reduced() == w.reduced() => {}
                Ok(back) => bad.push(format!("{w} -> {back}")),
                Err(e) => bad.push(format!("{w}: {e}")),
            }
        }
        Ok((
            bad.is_empty(),
            format!(
                "{} words of length <= 4, {} mismatches{}",
                words.len(),
                bad.len(),
                if bad.is_empty() {
                    String::new()
                } else {
                    format!(": {}", bad.join(", "))
                }
            ),
        ))
    }
}
