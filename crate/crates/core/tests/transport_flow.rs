use std::f64::consts::{PI, TAU};

use stirflow_core::braid::parse_braid;
use stirflow_core::field::{FlowConditions, SolverOptions};
use stirflow_core::protocol::{build_protocol, StirrerConfig};
use stirflow_core::transport::{
    advect, advect_with_jacobian, inverse_flow, inverse_flow_series, IntegratorOptions,
    VelocityProvider,
};
use stirflow_core::{Point, Vec2};

fn solid_body(omega: f64) -> VelocityProvider {
    let cond = FlowConditions::new(omega, vec![omega * PI], 0.0).unwrap();
    VelocityProvider::stationary(vec![], 0.0, cond, SolverOptions::with_order(4), 1.0).unwrap()
}

fn annulus(gamma: f64, eps: f64) -> VelocityProvider {
    let cond = FlowConditions::new(0.0, vec![gamma, -gamma], eps).unwrap();
    VelocityProvider::stationary(
        vec![Vec2::ZERO],
        eps,
        cond,
        SolverOptions::with_order(8),
        1.0,
    )
    .unwrap()
}

/// Three fixed holes with unequal circulations: a steady, nontrivial field.
fn steady_three() -> VelocityProvider {
    let cfg = StirrerConfig::default();
    let cond = FlowConditions::balanced(0.3, &[0.15, -0.05, 0.1], cfg.epsilon);
    VelocityProvider::stationary(
        cfg.centers.to_vec(),
        cfg.epsilon,
        cond,
        SolverOptions::default(),
        1.0,
    )
    .unwrap()
}

fn canonical(conditions: FlowConditions) -> VelocityProvider {
    let p = build_protocol(&parse_braid("1 -2").unwrap(), StirrerConfig::default(), 1.0).unwrap();
    VelocityProvider::new(p, conditions, SolverOptions::default(), 0.0005).unwrap()
}

fn rotate(z: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * z.x - s * z.y, s * z.x + c * z.y)
}

#[test]
fn rk4_is_fourth_order() {
    let omega = 2.0;
    let vp = solid_body(omega);
    let z0 = Vec2::new(0.6, 0.1);
    let span = TAU;
    let exact = rotate(z0, 0.5 * omega * span);
    let err = |dt: f64| {
        (advect(&[z0], 0.0, span, &vp, &IntegratorOptions { dt }).unwrap()[0] - exact).norm()
    };
    let h = span / 40.0;
    let ratio = err(h) / err(0.5 * h);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn solid_body_orbits_are_exact_rotations() {
    let omega = 1.5;
    let vp = solid_body(omega);
    let z0 = Vec2::new(-0.3, 0.55);
    let t = 2.7;
    let z = advect(&[z0], 0.0, t, &vp, &IntegratorOptions { dt: 1e-3 }).unwrap()[0];
    assert!((z - rotate(z0, 0.5 * omega * t)).norm() < 1e-10);
    assert!((z.norm() - z0.norm()).abs() < 1e-10);
}

#[test]
fn annulus_orbits_advance_at_the_vortex_rate() {
    let (gamma, eps) = (0.5, 0.1);
    let vp = annulus(gamma, eps);
    for r in [0.2, 0.5, 0.8] {
        let z0 = Vec2::new(r, 0.0);
        let t = 1.3;
        let z = advect(&[z0], 0.0, t, &vp, &IntegratorOptions { dt: 1e-3 }).unwrap()[0];
        let expected = rotate(z0, gamma * t / (TAU * r * r));
        assert!(
            (z - expected).norm() < 1e-8,
            "r = {r}: {z:?} vs {expected:?}"
        );
        assert!((z.norm() - r).abs() < 1e-9);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let vp = steady_three();
    let opts = IntegratorOptions { dt: 2e-3 };
    let (t0, t1) = (0.0, 3.0);
    for z in [
        Vec2::new(-0.25, 0.3),
        Vec2::new(0.3, -0.4),
        Vec2::new(0.0, 0.7),
    ] {
        let s = &advect_with_jacobian(&[z], t0, t1, &vp, &opts).unwrap()[0];
        let h = 1e-6;
        let f = |d: Vec2| advect(&[z + d], t0, t1, &vp, &opts).unwrap()[0];
        let dx = (f(Vec2::new(h, 0.0)) - f(Vec2::new(-h, 0.0))) * (0.5 / h);
        let dy = (f(Vec2::new(0.0, h)) - f(Vec2::new(0.0, -h))) * (0.5 / h);
        let j = s.jacobian;
        let scale = j.max_abs().max(1.0);
        assert!((j.a - dx.x).abs() < 1e-5 * scale && (j.c - dx.y).abs() < 1e-5 * scale);
        assert!((j.b - dy.x).abs() < 1e-5 * scale && (j.d - dy.y).abs() < 1e-5 * scale);
        assert!((j.det() - 1.0).abs() < 1e-8, "det {}", j.det());
    }
}

#[test]
fn forward_then_backward_returns_home() {
    let vp = canonical(FlowConditions::quiescent(3));
    let opts = IntegratorOptions::for_period(vp.period());
    let start = vec![
        Vec2::new(-0.25, 0.2),
        Vec2::new(0.1, -0.6),
        Vec2::new(0.6, 0.3),
    ];
    let there = advect(&start, 0.0, 0.5, &vp, &opts).unwrap();
    let back = advect(&there, 0.5, 0.0, &vp, &opts).unwrap();
    for (a, b) in start.iter().zip(&back) {
        assert!((*a - *b).norm() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn protocol_flow_preserves_area() {
    let vp = canonical(FlowConditions::quiescent(3));
    let opts = IntegratorOptions::for_period(vp.period());
    let pts = vec![
        Vec2::new(-0.25, 0.1),
        Vec2::new(0.2, 0.3),
        Vec2::new(-0.6, -0.4),
    ];
    for s in advect_with_jacobian(&pts, 0.0, 0.6, &vp, &opts).unwrap() {
        assert!(
            (s.jacobian.det() - 1.0).abs() < 1e-6,
            "det {}",
            s.jacobian.det()
        );
    }
}

#[test]
fn provider_is_periodic_in_time() {
    // Equal hole circulations are invariant under the period permutation.
    let vp = canonical(FlowConditions::balanced(0.0, &[0.1, 0.1, 0.1], 0.05));
    let t = vp.period();
    for s in [0.1, 0.75, 1.6] {
        for z in [Vec2::new(0.3, 0.6), Vec2::new(-0.7, -0.2)] {
            let a = vp.velocity(z, s).unwrap();
            let b = vp.solve_at(s + t).unwrap().velocity(z).unwrap();
            assert!((a - b).norm() < 1e-10, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn unequal_circulations_need_the_permutation_order() {
    let vp = canonical(FlowConditions::balanced(0.0, &[0.2, 0.0, -0.1], 0.05));
    let t = vp.period();
    // σ₁σ₂⁻¹ induces a 3-cycle, so the field repeats after three periods.
    let z = Vec2::new(0.3, 0.6);
    let a = vp.solve_at(0.4).unwrap().velocity(z).unwrap();
    let b = vp.solve_at(0.4 + t).unwrap().velocity(z).unwrap();
    let c = vp.solve_at(0.4 + 3.0 * t).unwrap().velocity(z).unwrap();
    assert!((a - b).norm() > 1e-6);
    assert!((a - c).norm() < 1e-10);
}

#[test]
fn inverse_flow_undoes_the_forward_map() {
    let vp = steady_three();
    let opts = IntegratorOptions { dt: 2e-3 };
    let z0 = vec![Vec2::new(-0.2, 0.4), Vec2::new(0.35, -0.3)];
    let forward = advect(&z0, 0.0, 2.0, &vp, &opts).unwrap();
    let back = inverse_flow(&forward, 2, &vp, &opts).unwrap();
    for (s, z) in back.iter().zip(&z0) {
        assert!((s.point - *z).norm() < 1e-8);
        assert!((s.jacobian.det() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn inverse_flow_series_matches_direct_inverse() {
    let vp = steady_three();
    let opts = IntegratorOptions { dt: 2e-3 };
    let pts = vec![Vec2::new(0.1, 0.45), Vec2::new(-0.6, 0.1)];
    let series = inverse_flow_series(&pts, 3, &vp, &opts).unwrap();
    assert_eq!(series.len(), 3);
    for (n, level) in series.iter().enumerate() {
        let direct = inverse_flow(&pts, n + 1, &vp, &opts).unwrap();
        for (a, b) in level.iter().zip(&direct) {
            assert!((a.point - b.point).norm() < 1e-9);
            assert!((a.jacobian - b.jacobian).max_abs() < 1e-7 * b.jacobian.max_abs().max(1.0));
        }
    }
}
