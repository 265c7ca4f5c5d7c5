use std::f64::consts::PI;

use mcf_lab::curveflow::{init_curve, remesh, run, CurveShape, DiscreteCurve, FlowConfig, TerminalKind};
use mcf_lab::potential::PotentialField;
use proptest::prelude::*;

fn ellipse_points(a: f64, b: f64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let mut p = vec![a * t.cos(), b * t.sin()];
            p.resize(dim, 0.0);
            p
        })
        .collect()
}

fn extinction_error(n: usize) -> f64 {
    let c = init_curve(&CurveShape::Circle { r: 1.0 }, n).unwrap();
    let trace = run(&c, &PotentialField::constant(2), &FlowConfig::new(1.0)).unwrap();
    assert_eq!(trace.terminal.kind, TerminalKind::Extinction);
    (trace.terminal.t - 0.5).abs()
}

#[test]
fn extinction_time_converges_in_n() {
    let (coarse, fine) = (extinction_error(128), extinction_error(256));
    assert!(coarse / fine >= 3.0, "{coarse:e} {fine:e}");
}

#[test]
fn mirror_symmetry_is_preserved() {
    let n = 128;
    let c = init_curve(&CurveShape::Ellipse { a: 2.0, b: 1.0 }, n).unwrap();
    let field = PotentialField::QuadraticDiagonal {
        coefficients: vec![1.0, 1.5],
    };
    let trace = run(&c, &field, &FlowConfig::new(0.1)).unwrap();
    let v = trace.final_curve.vertices();
    // x ↦ −x sends vertex i to vertex n/2 − i
    for i in 0..n {
        let j = (n / 2 + n - i) % n;
        assert!((v[i].x + v[j].x).abs() <= 1e-10, "{i}");
        assert!((v[i].y - v[j].y).abs() <= 1e-10, "{i}");
    }
}

#[test]
fn coordinate_plane_is_preserved() {
    let c = DiscreteCurve::new(3, &ellipse_points(2.0, 1.0, 128, 3)).unwrap();
    let field = PotentialField::QuadraticDiagonal {
        coefficients: vec![1.0, 1.5, 2.0],
    };
    let trace = run(&c, &field, &FlowConfig::new(0.1)).unwrap();
    assert_eq!(trace.terminal.kind, TerminalKind::ReachedHorizon);
    assert!(trace.final_curve.vertices().iter().all(|p| p.z.abs() <= 1e-10));
}

#[test]
fn space_circle_shrinks_like_planar_one() {
    let r = 0.6;
    let c = init_curve(&CurveShape::TiltedCircle { r, tilt: 0.7 }, 128).unwrap();
    let trace = run(&c, &PotentialField::constant(3), &FlowConfig::new(1.0)).unwrap();
    assert_eq!(trace.terminal.kind, TerminalKind::Extinction);
    assert!((trace.terminal.t - r * r / 2.0).abs() < 0.01 * r * r / 2.0);
}

#[test]
fn wavy_space_curve_flows_smoothly() {
    let c = init_curve(&CurveShape::WavySpaceCurve { r: 1.0, amplitude: 0.2 }, 128).unwrap();
    let field = PotentialField::RadialQuadratic { dimension: 3, c: 0.5 };
    let trace = run(&c, &field, &FlowConfig::new(0.2)).unwrap();
    assert_eq!(trace.terminal.kind, TerminalKind::ReachedHorizon);
    assert!(trace.records.iter().all(|r| r.min_kappa.is_none()));
}

fn rotate(p: &[f64], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn rotation_equivariance(angle in 0.0f64..(2.0 * PI)) {
        let star = init_curve(&CurveShape::Star { r: 1.0, amplitude: 0.2, lobes: 5 }, 96).unwrap();
        let center = [0.3, 0.1];
        let bump = |c: Vec<f64>| PotentialField::GaussianBump { amplitude: 0.5, center: c, width: 1.0 };
        let rotated: Vec<Vec<f64>> = star.points().map(|p| rotate(p, angle)).collect();
        let turned = DiscreteCurve::new(2, &rotated).unwrap();
        let config = FlowConfig::new(0.02);
        let a = run(&star, &bump(center.to_vec()), &config).unwrap();
        let b = run(&turned, &bump(rotate(&center, angle)), &config).unwrap();
        prop_assert_eq!(a.records.len(), b.records.len());
        for (p, q) in a.final_curve.points().zip(b.final_curve.points()) {
            let p = rotate(p, angle);
            prop_assert!((p[0] - q[0]).abs() <= 1e-10 && (p[1] - q[1]).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn remesh_keeps_count_orientation_and_length(
        jitter in proptest::collection::vec(-0.05f64..0.05, 64),
        warp in 0.0f64..0.12,
    ) {
        let pts: Vec<Vec<f64>> = jitter
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let s = i as f64 / 64.0;
                let t = 2.0 * PI * (s + warp * (2.0 * PI * s).sin());
                let r = 1.0 + j;
                vec![r * t.cos(), r * t.sin()]
            })
            .collect();
        let c = DiscreteCurve::new(2, &pts).unwrap();
        let r = remesh(&c).unwrap();
        prop_assert_eq!(r.len(), c.len());
        prop_assert!(r.signed_area() > 0.0);
        prop_assert_eq!(r.vertices()[0], c.vertices()[0]);
        prop_assert!(r.length() <= c.length() * (1.0 + 1e-12));
    }
}
