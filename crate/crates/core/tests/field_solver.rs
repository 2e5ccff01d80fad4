use std::f64::consts::{PI, TAU};

use stirflow_core::braid::parse_braid;
use stirflow_core::field::{
    residual_report, solve_stream, DomainSnapshot, FlowConditions, SolverOptions, StreamModel,
};
use stirflow_core::protocol::{build_protocol, StirrerConfig};
use stirflow_core::{Point, Vec2};

const H: f64 = 1e-4;

fn psi(m: &StreamModel, z: Point) -> f64 {
    m.stream_function(z).unwrap()
}

/// Five-point Laplacian of Ψ.
fn fd_laplacian(m: &StreamModel, z: Point) -> f64 {
    let c = psi(m, z);
    let sum = psi(m, z + Vec2::new(H, 0.0))
        + psi(m, z - Vec2::new(H, 0.0))
        + psi(m, z + Vec2::new(0.0, H))
        + psi(m, z - Vec2::new(0.0, H));
    (sum - 4.0 * c) / (H * H)
}

/// `(Ψ_y, −Ψ_x)` by central differences.
fn fd_velocity(m: &StreamModel, z: Point) -> Vec2 {
    let px = (psi(m, z + Vec2::new(H, 0.0)) - psi(m, z - Vec2::new(H, 0.0))) / (2.0 * H);
    let py = (psi(m, z + Vec2::new(0.0, H)) - psi(m, z - Vec2::new(0.0, H))) / (2.0 * H);
    Vec2::new(py, -px)
}

/// Three moving holes with circulation and vorticity.
fn busy_snapshot(
    nodes: usize,
    order: usize,
) -> (StreamModel, DomainSnapshot, FlowConditions, Vec<Vec2>) {
    let centers = vec![
        Vec2::new(-0.45, 0.1),
        Vec2::new(0.05, -0.2),
        Vec2::new(0.5, 0.15),
    ];
    let dom = DomainSnapshot::new(centers, 0.05, 0.0);
    let cond = FlowConditions::balanced(0.8, &[0.2, -0.1, 0.05], 0.05);
    let vels = vec![
        Vec2::ZERO,
        Vec2::new(0.3, -0.2),
        Vec2::new(-0.1, 0.4),
        Vec2::new(0.0, -0.25),
    ];
    let opts = SolverOptions {
        nodes_per_boundary: nodes,
        ..SolverOptions::with_order(order)
    };
    let m = solve_stream(&dom, &cond, &vels, &opts).unwrap();
    (m, dom, cond, vels)
}

fn probes() -> Vec<Point> {
    vec![
        Vec2::new(0.0, 0.5),
        Vec2::new(-0.3, -0.4),
        Vec2::new(0.7, -0.3),
        Vec2::new(-0.45, 0.2),
        Vec2::new(0.2, -0.2),
        Vec2::new(-0.8, 0.1),
    ]
}

#[test]
fn laplacian_equals_minus_vorticity() {
    let (m, ..) = busy_snapshot(128, 12);
    for z in probes() {
        let lap = fd_laplacian(&m, z);
        assert!((lap + 0.8).abs() < 1e-4, "laplacian {lap} at {z:?}");
    }
}

#[test]
fn velocity_is_the_skew_gradient_of_psi() {
    let (m, ..) = busy_snapshot(128, 12);
    for z in probes() {
        let v = m.velocity(z).unwrap();
        let fd = fd_velocity(&m, z);
        assert!((v - fd).norm() < 1e-6 * (1.0 + v.norm()), "{v:?} vs {fd:?}");
    }
}

#[test]
fn divergence_free_with_curl_equal_to_vorticity() {
    let (m, ..) = busy_snapshot(128, 12);
    for z in probes() {
        let vx = |d: Vec2| m.velocity(z + d).unwrap();
        let dx = (vx(Vec2::new(H, 0.0)) - vx(Vec2::new(-H, 0.0))) * (0.5 / H);
        let dy = (vx(Vec2::new(0.0, H)) - vx(Vec2::new(0.0, -H))) * (0.5 / H);
        let div = dx.x + dy.y;
        let curl = dx.y - dy.x;
        assert!(div.abs() < 1e-6, "div {div}");
        assert!((curl - 0.8).abs() < 1e-6, "curl {curl}");
        let g = m.velocity_gradient(z).unwrap();
        assert!((g.a - dx.x).abs() < 1e-6 && (g.c - dx.y).abs() < 1e-6);
        assert!((g.b - dy.x).abs() < 1e-6 && (g.d - dy.y).abs() < 1e-6);
    }
}

#[test]
fn boundary_conditions_hold_off_the_collocation_nodes() {
    let (m, dom, cond, vels) = busy_snapshot(128, 12);
    let r = residual_report(&m, &dom, &cond, &vels, 701);
    assert!(r.max_normal_residual < 1e-6, "{r:?}");
    assert!(r.max_circulation_error() < 1e-8, "{r:?}");

    // Independent check on the first hole: normal velocity and circulation.
    let c = dom.centers[0];
    let eps = dom.radius;
    let n = 2000;
    let mut circ = 0.0;
    for k in 0..n {
        let th = TAU * k as f64 / n as f64;
        let normal = Vec2::new(th.cos(), th.sin());
        let z = c + normal * eps;
        let v = m.velocity_unchecked(z);
        assert!((v.dot(normal) - vels[1].dot(normal)).abs() < 1e-6);
        // Clockwise tangent: fluid on the left.
        circ += v.dot(Vec2::new(normal.y, -normal.x)) * eps * TAU / n as f64;
    }
    assert!((circ - cond.circulations()[1]).abs() < 1e-8, "{circ}");
}

#[test]
fn solution_does_not_depend_on_node_count() {
    let (a, ..) = busy_snapshot(128, 12);
    let (b, ..) = busy_snapshot(192, 12);
    for z in probes() {
        let (va, vb) = (a.velocity(z).unwrap(), b.velocity(z).unwrap());
        assert!((va - vb).norm() < 1e-8, "{va:?} vs {vb:?}");
    }
}

#[test]
fn refining_the_order_converges() {
    let (reference, ..) = busy_snapshot(160, 20);
    let err = |k: usize| {
        let (m, ..) = busy_snapshot(128, k);
        probes()
            .into_iter()
            .map(|z| (m.velocity(z).unwrap() - reference.velocity(z).unwrap()).norm())
            .fold(0.0, f64::max)
    };
    let (e8, e12, e16) = (err(8), err(12), err(16));
    assert!(e12 < e8 && e16 < e12, "{e8:e} {e12:e} {e16:e}");
    assert!(e16 < 1e-8, "{e16:e}");
}

#[test]
fn annulus_matches_the_point_vortex() {
    let gamma = 0.4;
    let eps = 0.08;
    let dom = DomainSnapshot::new(vec![Vec2::ZERO], eps, 0.0);
    let cond = FlowConditions::new(0.0, vec![gamma, -gamma], eps).unwrap();
    let m = solve_stream(&dom, &cond, &[Vec2::ZERO; 2], &SolverOptions::with_order(8)).unwrap();
    for k in 0..20 {
        let r = eps + (0.99 - eps) * (k as f64 + 0.5) / 20.0;
        let z = Vec2::new(r, 0.0).rotated(0.7 * k as f64);
        // Ψ = −(Γ/2π) log r up to a constant.
        let exact_psi = -(gamma / TAU) * r.ln();
        let shift = psi(&m, Vec2::new(0.5, 0.0)) + (gamma / TAU) * 0.5f64.ln();
        assert!((psi(&m, z) - shift - exact_psi).abs() < 1e-10);
        let speed = m.velocity(z).unwrap().norm();
        assert!((speed - gamma / (TAU * r)).abs() < 1e-8 * speed);
    }
}

#[test]
fn moving_single_stirrer_snapshot() {
    let dom = DomainSnapshot::new(vec![Vec2::new(0.3, -0.2)], 0.05, 0.0);
    let cond = FlowConditions::quiescent(1);
    let vels = [Vec2::ZERO, Vec2::new(0.5, 0.8)];
    let m = solve_stream(&dom, &cond, &vels, &SolverOptions::with_order(12)).unwrap();
    let r = residual_report(&m, &dom, &cond, &vels, 512);
    assert!(r.max_normal_residual < 1e-6, "{r:?}");
    // Velocity tends to zero on the fixed wall's normal.
    let z = Vec2::new(0.0, 1.0);
    assert!(m.velocity_unchecked(z).dot(z).abs() < 1e-6);
}

#[test]
fn protocol_snapshots_respect_the_stirrer_velocities() {
    let p = build_protocol(&parse_braid("1 -2").unwrap(), StirrerConfig::default(), 1.0).unwrap();
    for t in [0.13, 0.5, 1.27, 1.9] {
        let dom = DomainSnapshot::from_protocol(&p, t);
        let mut vels = vec![Vec2::ZERO];
        vels.extend_from_slice(&p.velocities(t));
        let cond = FlowConditions::quiescent(3);
        let m = solve_stream(&dom, &cond, &vels, &SolverOptions::default()).unwrap();
        let r = residual_report(&m, &dom, &cond, &vels, 512);
        assert!(r.max_normal_residual < 1e-5, "t = {t}: {r:?}");
        assert!(r.max_circulation_error() < 1e-8, "t = {t}: {r:?}");
    }
}

#[test]
fn solid_body_is_recovered_without_holes() {
    let omega = -0.9;
    let dom = DomainSnapshot::new(vec![], 0.0, 0.0);
    let cond = FlowConditions::new(omega, vec![omega * PI], 0.0).unwrap();
    let m = solve_stream(&dom, &cond, &[Vec2::ZERO], &SolverOptions::with_order(8)).unwrap();
    for z in probes() {
        let exact = Vec2::new(-z.y, z.x) * (0.5 * omega);
        assert!((m.velocity(z).unwrap() - exact).norm() < 1e-12);
    }
}
