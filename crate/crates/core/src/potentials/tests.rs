use super::*;
use crate::boundary::{build_boundary, CurveDesc, CurveKind, Motion};
use crate::numerics::quad;
use crate::treegrid::build_resolving_tree;
use std::f64::consts::PI;

fn heat_kernel(r2: f64, t: f64) -> f64 {
    (-r2 / (4.0 * t)).exp() / (4.0 * PI * t)
}

fn circle_desc(center: Point, radius: f64, panels: usize) -> CurveDesc {
    CurveDesc { kind: CurveKind::Circle { center, radius }, motion: Motion::Stationary, panels }
}

/// Plain Gauss-Legendre rule in u = -log(t - tau) over the slab [t-a, t-b],
/// a > b: returns elapsed times t - tau_j and weights.
fn slab_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (-a.ln(), -b.ln());
    let (xs, ws) = legendre_rule(n);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (
        xs.iter().map(|&x| (-(mid + half * x)).exp()).collect(),
        ws.iter().map(|&w| w * half).collect(),
    )
}

/// Spatial boundary integral of the layer kernel over a circle, windowed
/// around the parameter of closest approach so narrow kernels are resolved.
fn circle_bg(
    x: Point,
    c: Point,
    r: f64,
    delta: f64,
    sigma: &dyn Fn(f64) -> f64,
    double: bool,
) -> f64 {
    let f = |th: f64| {
        let y = [c[0] + r * th.cos(), c[1] + r * th.sin()];
        let d2 = crate::dist2(x, y);
        let g = (-d2 / delta).exp();
        let k = if double {
            let nu = [th.cos(), th.sin()];
            2.0 * ((x[0] - y[0]) * nu[0] + (x[1] - y[1]) * nu[1]) / delta * g
        } else {
            g
        };
        k * sigma(th) * r
    };
    let theta0 = (x[1] - c[1]).atan2(x[0] - c[0]);
    let w = (60.0f64 * delta).sqrt() / (0.6 * r);
    // The double kernel divides an O(eps_mach) dot-product roundoff by delta,
    // so its integrand carries ~1e-16 r^2 / delta of noise; an adaptive
    // tolerance below that floor never terminates.
    let noise = if double { 1e-15 * r * r / delta } else { 0.0 };
    if w >= PI {
        let tol = (1e-15f64).max(noise * PI);
        let mut total = 0.0;
        for i in 0..16 {
            let a = theta0 + 2.0 * PI * i as f64 / 16.0;
            total += quad::adaptive(&f, a, a + 2.0 * PI / 16.0, tol);
        }
        total
    } else {
        let tol = (1e-14f64).max(4.0 * noise * w);
        quad::adaptive(&f, theta0 - w, theta0, tol)
            + quad::adaptive(&f, theta0, theta0 + w, tol)
    }
}

/// Brute-force layer potential over a circle for elapsed times in
/// [lo, hi]: adaptive quadrature in w = log(t - tau).
fn circle_slab_oracle(
    x: Point,
    c: Point,
    r: f64,
    sigma: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    double: bool,
) -> f64 {
    let f = |w: f64| {
        let s = w.exp();
        circle_bg(x, c, r, 4.0 * s, sigma, double) / (4.0 * PI)
    };
    // The integrand is smooth in w = log s, so a fixed composite rule beats
    // nesting two adaptive passes (the outer one would chase the inner noise).
    let (xs, ws) = legendre_rule(30);
    let (wa, wb) = (lo.ln(), hi.ln());
    let n_pan = 8;
    let mut total = 0.0;
    for p in 0..n_pan {
        let a = wa + (wb - wa) * p as f64 / n_pan as f64;
        let b = wa + (wb - wa) * (p + 1) as f64 / n_pan as f64;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (&u, &w) in xs.iter().zip(ws.iter()) {
            total += w * half * f(mid + half * u);
        }
    }
    total
}

#[test]
fn initial_gaussian_obeys_the_semigroup() {
    let t0 = 0.05;
    let dt = 0.02;
    let eps = 1e-9;
    let x0 = [0.1, -0.05];
    let u0 = move |p: Point| heat_kernel(crate::dist2(p, x0), t0);
    let (tree, _) = build_resolving_tree(&u0, 1e-10, 8, [0.0, 0.0], 1.5).unwrap();
    let ext = Arc::new(crate::fgt::extend_free_space_grid(&tree, dt, eps).unwrap());
    let gf = GridFunction::from_fn(ext, &u0);
    let out = initial_potential(&gf, dt, eps, false).unwrap();
    for p in [[0.0, 0.0], [0.1, -0.05], [0.4, 0.3], [-0.5, 0.1]] {
        let want = heat_kernel(crate::dist2(p, x0), t0 + dt);
        let got = out.eval(p).unwrap();
        assert!((got - want).abs() < 1e-8, "at {p:?}: {got} vs {want}");
    }
}

#[test]
fn periodic_constant_initial_data_is_preserved() {
    let mut tree = QuadTree::new([0.0, 0.0], 0.5, 8).unwrap();
    for id in tree.leaves() {
        tree.subdivide(id).unwrap();
    }
    let tree = Arc::new(tree);
    let gf = GridFunction::from_fn(tree, &|_| 0.7);
    let out = initial_potential(&gf, 0.01, 1e-9, true).unwrap();
    for p in [[0.0, 0.0], [0.31, -0.44], [-0.25, 0.25]] {
        assert!((out.eval(p).unwrap() - 0.7).abs() < 1e-9);
    }
}

#[test]
fn initial_potential_matches_dense_quadrature() {
    let dt = 0.005;
    let eps = 1e-9;
    let u0 = |p: Point| {
        (-((p[0] - 0.1).powi(2) + (p[1] + 0.2).powi(2)) / 0.02).exp() * (1.0 + 0.3 * p[0])
    };
    let (tree, _) = build_resolving_tree(&u0, 1e-11, 8, [0.0, 0.0], 1.0).unwrap();
    let ext = Arc::new(crate::fgt::extend_free_space_grid(&tree, dt, eps).unwrap());
    let gf = GridFunction::from_fn(ext, &u0);
    let out = initial_potential(&gf, dt, eps, false).unwrap();
    for p in [[0.1, -0.2], [0.0, 0.0], [0.3, 0.1], [-0.2, -0.4]] {
        let want = crate::oracle::gauss_integral(&gf, 4.0 * dt, p) / (4.0 * PI * dt);
        let got = out.eval(p).unwrap();
        assert!((got - want).abs() < 1e-8, "at {p:?}: {got} vs {want}");
    }
}

#[test]
fn unextended_free_space_grid_is_rejected() {
    let tree = Arc::new(QuadTree::new([0.0, 0.0], 0.5, 8).unwrap());
    let gf = GridFunction::from_fn(tree, &|_| 1.0);
    let err = initial_potential(&gf, 0.01, 1e-9, false).unwrap_err();
    assert!(matches!(err, Error::InvalidState(_)), "got {err:?}");
}

#[test]
fn constant_volume_forcing_integrates_to_dt() {
    let mut tree = QuadTree::new([0.0, 0.0], 0.5, 8).unwrap();
    for id in tree.leaves() {
        tree.subdivide(id).unwrap();
    }
    let tree = Arc::new(tree);
    let f = GridFunction::from_fn(tree, &|_| 1.0);
    let dt = 0.003;
    let out = volume_potential_local(&f, &f, dt, 1e-10, true).unwrap();
    for p in [[0.0, 0.0], [0.2, -0.3]] {
        assert!((out.eval(p).unwrap() - dt).abs() < 1e-12);
    }
}

#[test]
fn linear_in_time_forcing_is_integrated_exactly() {
    let mut tree = QuadTree::new([0.0, 0.0], 0.5, 8).unwrap();
    for id in tree.leaves() {
        tree.subdivide(id).unwrap();
    }
    let tree = Arc::new(tree);
    let (a, b, dt) = (0.8, -1.3, 0.004);
    // F(y, tau) = a + b (t - tau): F_now = a, F_prev = a + b dt.
    let f_now = GridFunction::from_fn(tree.clone(), &|_| a);
    let f_prev = GridFunction::from_fn(tree, &|_| a + b * dt);
    let out = volume_potential_local(&f_now, &f_prev, dt, 1e-10, true).unwrap();
    let want = a * dt + 0.5 * b * dt * dt;
    assert!((out.eval([0.1, 0.1]).unwrap() - want).abs() < 1e-13);
}

#[test]
fn trapezoid_volume_rule_is_third_order() {
    // F(y, tau) = sin(2 pi y1) e^tau: sin(2 pi y1) is a periodic heat
    // eigenfunction with rate lambda = 4 pi^2, so the local volume potential
    // at t = dt has the closed form sin(2 pi x1) (e^dt - e^{-lambda dt}) /
    // (1 + lambda).
    let mut tree = QuadTree::new([0.0, 0.0], 0.5, 10).unwrap();
    for _ in 0..2 {
        for id in tree.leaves() {
            tree.subdivide(id).unwrap();
        }
    }
    let tree = Arc::new(tree);
    let lambda = 4.0 * PI * PI;
    let x = [0.13, -0.22];
    let err_at = |dt: f64| {
        let f_now = GridFunction::from_fn(tree.clone(), &|p| (2.0 * PI * p[0]).sin() * dt.exp());
        let f_prev = GridFunction::from_fn(tree.clone(), &|p| (2.0 * PI * p[0]).sin());
        let out = volume_potential_local(&f_now, &f_prev, dt, 1e-12, true).unwrap();
        let want = (2.0 * PI * x[0]).sin() * (dt.exp() - (-lambda * dt).exp()) / (1.0 + lambda);
        (out.eval(x).unwrap() - want).abs()
    };
    let e1 = err_at(0.01);
    let e2 = err_at(0.005);
    assert!(e1 / e2 > 5.0 && e1 / e2 < 12.0, "ratio {}", e1 / e2);
}

#[test]
fn split_construction_and_empty_slabs() {
    let sp = PotentialSplit::new(1e-3, 1e-9, 24).unwrap();
    assert!(sp.eps_asym > 0.0 && sp.eps_asym <= 1e-4);
    // A loose tolerance is capped at delta / 10.
    let sp2 = PotentialSplit::new(1e-3, 1e-2, 24).unwrap();
    assert!((sp2.eps_asym - 1e-4).abs() < 1e-18);
    let (off, w) = sp.graded_nodes(sp.eps_asym);
    assert!(off.is_empty() && w.is_empty());
    assert!(PotentialSplit::with_eps(1e-3, 1e-3, 24).is_err());
    // Empty rule evaluates to zero.
    let frame = build_boundary(&[circle_desc([0.0, 0.0], 0.3, 8)], 8, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let frames: Vec<&BoundaryFrame> = Vec::new();
    let denss: Vec<&Density> = Vec::new();
    let vals = layer_local_quadrature(
        &frames,
        &denss,
        &[],
        &[],
        &[[0.3, 0.0]],
        1e-9,
        BoundaryKernel::Single,
    )
    .unwrap();
    assert_eq!(vals, vec![0.0]);
    drop(dens);
}

#[test]
fn on_surface_single_layer_asymptotic_matches_the_expansion() {
    let frame = build_boundary(&[circle_desc([0.0, 0.0], 1.0, 16)], 16, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let ddt = Density::zeros(&frame);
    let eps = 1e-6;
    let vals = layer_local_asymptotic(
        &frame,
        &dens,
        eps,
        0.0,
        BoundaryKernel::Single,
        true,
        Some(&ddt),
    )
    .unwrap();
    // kappa = 1, v = 0, sigma constant: sqrt(eps/pi) + eps^{3/2}/(12 sqrt(pi)).
    let want = (eps / PI).sqrt() + eps.powf(1.5) / (12.0 * PI.sqrt());
    for panel in &vals {
        for &v in panel {
            assert!((v - want).abs() < 1e-12 * want, "{v} vs {want}");
        }
    }
}

#[test]
fn on_surface_double_layer_uses_curvature_minus_velocity() {
    // A translating circle: at each node kappa - v = 1/r - u.nu, which
    // vanishes where the normal aligns with u / |u| for |u| = 1/r.
    let r = 0.5;
    let curve = CurveDesc {
        kind: CurveKind::Circle { center: [0.0, 0.0], radius: r },
        motion: Motion::Translation { velocity: [1.0 / r, 0.0] },
        panels: 12,
    };
    let frame = build_boundary(&[curve], 12, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let eps = 1e-6;
    let vals =
        layer_local_asymptotic(&frame, &dens, eps, 0.0, BoundaryKernel::Double, true, None)
            .unwrap();
    for (j, g) in frame.geom.iter().enumerate() {
        for i in 0..frame.k {
            let want = -(eps / PI).sqrt() * 0.5 * (g.curvature[i] - g.vel_n[i]);
            assert!((vals[j][i] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn off_surface_asymptotic_error_scales_with_the_stated_order() {
    let r = 1.0;
    let frame = build_boundary(&[circle_desc([0.0, 0.0], r, 16)], 16, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let c = 0.5;
    let g0 = &frame.geom[0];
    let mut errs = Vec::new();
    for eps in [2e-6, 1e-6, 5e-7] {
        let vals = layer_local_asymptotic(
            &frame,
            &dens,
            eps,
            c,
            BoundaryKernel::Single,
            false,
            None,
        )
        .unwrap();
        // Target at the first node of panel 0, offset inward.
        let i = 2;
        let x = [
            g0.pos[i][0] - c * eps.sqrt() * g0.normal[i][0],
            g0.pos[i][1] - c * eps.sqrt() * g0.normal[i][1],
        ];
        let d = c * eps.sqrt();
        let want =
            circle_slab_oracle(x, [0.0, 0.0], r, &|_| 1.0, d * d / 240.0, eps, false);
        errs.push((vals[0][i] - want).abs());
    }
    // O(eps^{3/2}) remainder: halving eps cuts the error by about 2 sqrt(2).
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(ratio > 2.0 && ratio < 4.0, "errors {errs:?}");
    }
}

#[test]
fn graded_slab_quadrature_matches_brute_force() {
    let r = 1.0;
    let frame = build_boundary(&[circle_desc([0.0, 0.0], r, 16)], 16, 0.0).unwrap();
    let sigma = |th: f64| 1.0 + 0.3 * th.cos();
    let dens = Density::from_fn(&frame, &|p: Point| sigma(p[1].atan2(p[0])));
    let split = PotentialSplit::with_eps(1e-3, 1e-7, 24).unwrap();
    let (off, w) = split.graded_nodes(split.delta);
    let frames: Vec<&BoundaryFrame> = vec![&frame; off.len()];
    let denss: Vec<&Density> = vec![&dens; off.len()];
    let x = frame.geom[3].pos[5];
    for double in [false, true] {
        let kernel = if double { BoundaryKernel::Double } else { BoundaryKernel::Single };
        let got =
            layer_local_quadrature(&frames, &denss, &off, &w, &[x], 1e-12, kernel).unwrap()[0];
        let want = circle_slab_oracle(x, [0.0, 0.0], r, &sigma, split.eps_asym, split.delta, double);
        assert!((got - want).abs() < 1e-10, "double {double}: {got} vs {want}");
    }
}

#[test]
fn doubling_time_nodes_collapses_the_quadrature_error() {
    let frame = build_boundary(&[circle_desc([0.0, 0.0], 1.0, 16)], 16, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|p: Point| 1.0 + 0.5 * p[0]);
    let x = frame.geom[0].pos[0];
    let value_at = |n: usize| {
        let split = PotentialSplit::with_eps(1e-3, 1e-7, n).unwrap();
        let (off, w) = split.graded_nodes(split.delta);
        let frames: Vec<&BoundaryFrame> = vec![&frame; off.len()];
        let denss: Vec<&Density> = vec![&dens; off.len()];
        layer_local_quadrature(&frames, &denss, &off, &w, &[x], 1e-13, BoundaryKernel::Single)
            .unwrap()[0]
    };
    let v3 = value_at(3);
    let v24 = value_at(24);
    let v32 = value_at(32);
    assert!((v24 - v32).abs() < 1e-12, "24 vs 32: {}", (v24 - v32).abs());
    assert!((v3 - v24).abs() > 100.0 * (v24 - v32).abs().max(1e-16));
}

#[test]
fn history_mismatched_density_count_is_rejected() {
    let frame = build_boundary(&[circle_desc([0.0, 0.0], 1.0, 8)], 8, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let err = layer_local_quadrature(
        &[&frame, &frame],
        &[&dens],
        &[1e-3, 2e-3],
        &[0.1, 0.1],
        &[[0.0, 0.0]],
        1e-9,
        BoundaryKernel::Single,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidState(_)));
}

#[test]
fn zero_history_and_increment_stay_zero() {
    let tree = Arc::new(QuadTree::new([0.0, 0.0], 0.5, 8).unwrap());
    let state = HistoryState::new(tree.clone());
    let z = GridFunction::zeros(tree);
    let next = far_history_update(&state, &z, &z, 1e-3, 1e-9, false).unwrap();
    assert_eq!(next.step, 1);
    assert!(next.u_fh.max_abs() == 0.0 && next.v_fh.max_abs() == 0.0);
}

/// Uniform depth 3, then two extra levels around the circle of radius `r`
/// where the sampled layer fields vary on the sqrt(delta) scale.
fn ring_tree(hw: f64, r: f64, k: usize) -> Arc<QuadTree> {
    let mut tree = QuadTree::new([0.0, 0.0], hw, k).unwrap();
    for _ in 0..3 {
        for id in tree.leaves() {
            tree.subdivide(id).unwrap();
        }
    }
    for _ in 0..2 {
        for id in tree.leaves() {
            let c = tree.box_center(id);
            let h = tree.box_halfwidth(id);
            let d = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if (d - r).abs() < 0.15 + 1.5 * h {
                tree.subdivide(id).unwrap();
            }
        }
    }
    Arc::new(crate::treegrid::balance(&tree))
}

#[test]
fn far_history_propagates_a_slab_like_brute_force() {
    // Density sigma = 1 on a circle, supported only on tau in [0, delta]
    // (the slab [t - 2 delta, t - delta] at t = 2 delta). One update
    // propagates to t = 3 delta.
    let r = 0.35;
    let delta = 1e-3;
    let eps = 1e-6;
    let frame = build_boundary(&[circle_desc([0.0, 0.0], r, 16)], 16, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|_| 1.0);
    let tree = ring_tree(1.0, r, 8);
    let (off, w) = slab_nodes(2.0 * delta, delta, 16);
    let frames: Vec<&BoundaryFrame> = vec![&frame; off.len()];
    let denss: Vec<&Density> = vec![&dens; off.len()];
    let u_inc =
        sample_layer_increment(&frames, &denss, &off, &w, &tree, 1e-12, BoundaryKernel::Single)
            .unwrap();
    let v_inc = GridFunction::zeros(tree.clone());
    let state = HistoryState::new(tree);
    let next = far_history_update(&state, &u_inc, &v_inc, delta, eps, false).unwrap();
    let scale = next.u_fh.max_abs();
    for x in [[0.0, 0.0], [0.2, 0.1], [r, 0.0], [0.6, -0.3]] {
        // Elapsed times (t + delta) - tau run over [2 delta, 3 delta].
        let want =
            circle_slab_oracle(x, [0.0, 0.0], r, &|_| 1.0, 2.0 * delta, 3.0 * delta, false);
        let got = next.u_fh.eval_clamped(x).unwrap();
        assert!(
            (got - want).abs() < 3e-6 * scale,
            "at {x:?}: {got} vs {want} (scale {scale:.3e})"
        );
    }
}

#[test]
fn two_empty_updates_compose_like_one_double_step() {
    let u0 = |p: Point| (-crate::dist2(p, [0.1, 0.0]) / 0.05).exp();
    let (tree, _) = build_resolving_tree(&u0, 1e-10, 8, [0.0, 0.0], 1.5).unwrap();
    let dt = 0.01;
    let eps = 1e-9;
    let ext = Arc::new(crate::fgt::extend_free_space_grid(&tree, 2.0 * dt, eps).unwrap());
    let gf = GridFunction::from_fn(ext.clone(), &u0);
    let z = GridFunction::zeros(ext.clone());
    let state = HistoryState {
        u_fh: gf.clone(),
        v_fh: GridFunction::zeros(ext.clone()),
        step: 0,
    };
    let one = far_history_update(&state, &z, &z, dt, eps, false).unwrap();
    let zz = GridFunction::zeros(one.u_fh.tree.clone());
    let two = far_history_update(&one, &zz, &zz, dt, eps, false).unwrap();
    let big = far_history_update(&state, &z, &z, 2.0 * dt, eps, false).unwrap();
    for x in [[0.0, 0.0], [0.1, 0.0], [0.3, -0.2]] {
        let a = two.u_fh.eval_clamped(x).unwrap();
        let b = big.u_fh.eval_clamped(x).unwrap();
        assert!((a - b).abs() < 5e-9, "at {x:?}: {a} vs {b}");
    }
}

/// Marches a constant-in-time density on a stationary circle up to t = 3
/// delta and returns the history state plus everything needed to evaluate
/// the full potential there.
struct CircleSetup {
    frame: BoundaryFrame,
    dens: Density,
    state: HistoryState,
    split: PotentialSplit,
}

fn shared_setup() -> &'static CircleSetup {
    static SETUP: std::sync::OnceLock<CircleSetup> = std::sync::OnceLock::new();
    SETUP.get_or_init(|| march_circle(&|th| 1.0 + 0.4 * th.cos(), 1e-3))
}

fn march_circle(sigma: &dyn Fn(f64) -> f64, delta: f64) -> CircleSetup {
    let r = 0.35;
    let frame = build_boundary(&[circle_desc([0.0, 0.0], r, 16)], 16, 0.0).unwrap();
    let dens = Density::from_fn(&frame, &|p: Point| sigma(p[1].atan2(p[0])));
    let split = PotentialSplit::with_eps(delta, 1e-6 * delta, 24).unwrap();
    let tree = ring_tree(1.0, r, 8);
    // u_FH(2 delta) = 0; the first nonzero update carries S_NH(., 2 delta)
    // over [0, delta] to t = 3 delta.
    let (off, w) = slab_nodes(2.0 * delta, delta, 16);
    let frames: Vec<&BoundaryFrame> = vec![&frame; off.len()];
    let denss: Vec<&Density> = vec![&dens; off.len()];
    let u_inc =
        sample_layer_increment(&frames, &denss, &off, &w, &tree, 1e-12, BoundaryKernel::Single)
            .unwrap();
    let v_inc =
        sample_layer_increment(&frames, &denss, &off, &w, &tree, 1e-12, BoundaryKernel::Double)
            .unwrap();
    let state = HistoryState::new(tree);
    let state = far_history_update(&state, &u_inc, &v_inc, delta, 1e-6, false).unwrap();
    CircleSetup { frame, dens, state, split }
}

fn eval_circle(setup: &CircleSetup, c: f64, kernel: BoundaryKernel) -> Vec<Vec<f64>> {
    let (off, w) = setup.split.graded_nodes(2.0 * setup.split.delta);
    let frames: Vec<&BoundaryFrame> = vec![&setup.frame; off.len()];
    let denss: Vec<&Density> = vec![&setup.dens; off.len()];
    let ddt = Density::zeros(&setup.frame);
    eval_layer_potential(
        &setup.state,
        &frames,
        &denss,
        &off,
        &w,
        &setup.frame,
        &setup.dens,
        Some(&ddt),
        &setup.split,
        c,
        1e-12,
        kernel,
    )
    .unwrap()
}

#[test]
fn single_layer_is_continuous_across_the_boundary() {
    let setup = shared_setup();
    let inner = eval_circle(setup, 0.01, BoundaryKernel::Single);
    let outer = eval_circle(setup, -0.01, BoundaryKernel::Single);
    let scale = setup.dens.max_abs(&setup.frame);
    for (pi, po) in inner.iter().zip(outer.iter()) {
        for (a, b) in pi.iter().zip(po.iter()) {
            assert!((a - b).abs() < 1e-3 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn double_layer_jump_is_minus_the_density() {
    let setup = shared_setup();
    let inner = eval_circle(setup, 0.01, BoundaryKernel::Double);
    let outer = eval_circle(setup, -0.01, BoundaryKernel::Double);
    let scale = setup.dens.max_abs(&setup.frame);
    for (j, (pi, po)) in inner.iter().zip(outer.iter()).enumerate() {
        for i in 0..setup.frame.k {
            let mu = setup.dens.eval(j, setup.frame.nodes()[i]);
            let jump = pi[i] - po[i];
            assert!((jump + mu).abs() < 1e-3 * scale, "jump {jump} vs {}", -mu);
        }
    }
}

#[test]
fn composed_potential_matches_brute_force_off_surface() {
    let sigma = |th: f64| 1.0 + 0.4 * th.cos();
    let delta = 1e-3;
    let setup = shared_setup();
    let c = 3.0;
    let vals = eval_circle(setup, c, BoundaryKernel::Single);
    let eps = setup.split.eps_asym;
    let r = 0.35;
    for (j, i) in [(0usize, 2usize), (7, 9), (12, 5)] {
        let g = &setup.frame.geom[j];
        let x = [
            g.pos[i][0] - c * eps.sqrt() * g.normal[i][0],
            g.pos[i][1] - c * eps.sqrt() * g.normal[i][1],
        ];
        let d = c * eps.sqrt();
        let want =
            circle_slab_oracle(x, [0.0, 0.0], r, &sigma, (d * d / 240.0).min(eps), 3.0 * delta, false);
        let got = vals[j][i];
        assert!((got - want).abs() < 1e-7, "at panel {j} node {i}: {got} vs {want}");
    }
}
