//! Time-dependent boundary geometry and the boundary Gauss transform.
//!
//! A boundary is a union of closed curves, each discretized into panels
//! carrying k-term Legendre series for both coordinates over s in [-1, 1].
//! A [`BoundaryFrame`] freezes the geometry at one time instant and caches
//! positions, tangents, outward normals, curvature, arc-length weights, and
//! normal velocities at the panel quadrature nodes. Layer densities are
//! stored panel by panel in the same Legendre basis.
//!
//! [`boundary_fgt`] evaluates single- and double-layer Gauss transforms
//! against a frame. Panels are integrated by their native k-node rule when
//! the kernel is wide relative to the panel; sharply peaked kernels are
//! corrected by locating the non-negligible subinterval of the panel and
//! integrating the interpolated density there.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::gauss::{
    legendre_derivative_coeffs, legendre_eval, legendre_fit_matrix, legendre_rule,
};
use crate::treegrid::QuadTree;
use crate::{dist2, Point};

/// Fixed order of the corrected subinterval quadrature.
pub const K_CORR: usize = 20;

/// Analytic curve shapes accepted by [`build_boundary`].
#[derive(Clone, Debug)]
pub enum CurveKind {
    /// Circle of the given radius.
    Circle {
        /// Center at time zero.
        center: Point,
        /// Radius, positive.
        radius: f64,
    },
    /// Axis-aligned ellipse.
    Ellipse {
        /// Center at time zero.
        center: Point,
        /// Semi-axis along x1.
        rx: f64,
        /// Semi-axis along x2.
        ry: f64,
    },
    /// Star-shaped curve r(theta) = r0 + sum a_m cos(m theta) + b_m sin(m theta).
    Fourier {
        /// Center at time zero.
        center: Point,
        /// Mean radius r0.
        base_radius: f64,
        /// Cosine amplitudes a_1, a_2, ...
        cos_coeffs: Vec<f64>,
        /// Sine amplitudes b_1, b_2, ...
        sin_coeffs: Vec<f64>,
    },
}

/// Rigid motion applied to a curve over time.
#[derive(Clone, Debug)]
pub enum Motion {
    /// The curve does not move.
    Stationary,
    /// Translation at constant velocity.
    Translation {
        /// Velocity vector.
        velocity: Point,
    },
    /// Rotation about the curve center at a constant rate (radians per unit
    /// time, counterclockwise).
    Rotation {
        /// Angular rate.
        rate: f64,
    },
}

/// One boundary curve: shape, motion, and panel count.
#[derive(Clone, Debug)]
pub struct CurveDesc {
    /// Shape at time zero.
    pub kind: CurveKind,
    /// Motion over time.
    pub motion: Motion,
    /// Number of panels the curve is split into.
    pub panels: usize,
}

impl CurveDesc {
    fn center(&self) -> Point {
        match &self.kind {
            CurveKind::Circle { center, .. }
            | CurveKind::Ellipse { center, .. }
            | CurveKind::Fourier { center, .. } => *center,
        }
    }

    /// Position at parameter theta of the unmoved curve.
    fn base_position(&self, theta: f64) -> Point {
        let (st, ct) = theta.sin_cos();
        match &self.kind {
            CurveKind::Circle { center, radius } => {
                [center[0] + radius * ct, center[1] + radius * st]
            }
            CurveKind::Ellipse { center, rx, ry } => [center[0] + rx * ct, center[1] + ry * st],
            CurveKind::Fourier { center, base_radius, cos_coeffs, sin_coeffs } => {
                let mut r = *base_radius;
                for (m, &a) in cos_coeffs.iter().enumerate() {
                    r += a * ((m as f64 + 1.0) * theta).cos();
                }
                for (m, &b) in sin_coeffs.iter().enumerate() {
                    r += b * ((m as f64 + 1.0) * theta).sin();
                }
                [center[0] + r * ct, center[1] + r * st]
            }
        }
    }

    /// Position at parameter theta and time t, with the motion applied.
    pub fn position(&self, theta: f64, t: f64) -> Point {
        let p = self.base_position(theta);
        match &self.motion {
            Motion::Stationary => p,
            Motion::Translation { velocity } => {
                [p[0] + velocity[0] * t, p[1] + velocity[1] * t]
            }
            Motion::Rotation { rate } => {
                let c = self.center();
                let (s, co) = (rate * t).sin_cos();
                let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
                [c[0] + co * dx - s * dy, c[1] + s * dx + co * dy]
            }
        }
    }

    /// Material velocity of the point at parameter theta and time t.
    pub fn velocity(&self, theta: f64, t: f64) -> Point {
        match &self.motion {
            Motion::Stationary => [0.0, 0.0],
            Motion::Translation { velocity } => *velocity,
            Motion::Rotation { rate } => {
                let c = self.center();
                let p = self.position(theta, t);
                [-rate * (p[1] - c[1]), rate * (p[0] - c[0])]
            }
        }
    }
}

/// One boundary segment: Legendre series of both coordinates over s in [-1, 1].
#[derive(Clone, Debug)]
pub struct Panel {
    /// Coefficients of x1(s).
    pub coeffs_x1: Vec<f64>,
    /// Coefficients of x2(s).
    pub coeffs_x2: Vec<f64>,
}

impl Panel {
    /// Position at parameter s.
    pub fn position(&self, s: f64) -> Point {
        [legendre_eval(&self.coeffs_x1, s), legendre_eval(&self.coeffs_x2, s)]
    }
}

/// Geometry cache at the k quadrature nodes of one panel.
#[derive(Clone, Debug)]
pub struct PanelGeom {
    /// Node positions.
    pub pos: Vec<Point>,
    /// Unit tangents (positively oriented).
    pub tangent: Vec<Point>,
    /// Outward unit normals.
    pub normal: Vec<Point>,
    /// Signed curvature.
    pub curvature: Vec<f64>,
    /// Parametrization speed |d(x1,x2)/ds|.
    pub speed: Vec<f64>,
    /// Normal component of the material velocity.
    pub vel_n: Vec<f64>,
}

/// All panels of a boundary at one time instant, with cached geometry.
#[derive(Clone, Debug)]
pub struct BoundaryFrame {
    /// Panel order (terms per Legendre series).
    pub k: usize,
    /// Time instant the frame represents.
    pub time: f64,
    /// Panels in chain order, curve by curve.
    pub panels: Vec<Panel>,
    /// Geometry cache parallel to `panels`.
    pub geom: Vec<PanelGeom>,
    /// Index of the owning curve for each panel.
    pub curve_of_panel: Vec<usize>,
    /// Arc length of each panel.
    pub lengths: Vec<f64>,
    /// Bounding disk center of each panel.
    pub disk_centers: Vec<Point>,
    /// Bounding disk radius of each panel.
    pub disk_radii: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl BoundaryFrame {
    /// Total arc length over all panels.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// The k Gauss-Legendre nodes the geometry is cached at.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The matching quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Signed enclosed area via the divergence theorem,
    /// area = (1/2) oint x . nu ds.
    pub fn enclosed_area(&self) -> f64 {
        let mut total = 0.0;
        for (g, _) in self.geom.iter().zip(self.panels.iter()) {
            for i in 0..self.k {
                total += 0.5
                    * self.weights[i]
                    * g.speed[i]
                    * (g.pos[i][0] * g.normal[i][0] + g.pos[i][1] * g.normal[i][1]);
            }
        }
        total
    }
}

/// Layer density in the panel Legendre basis, one coefficient block per panel.
#[derive(Clone, Debug)]
pub struct Density {
    /// Terms per panel.
    pub k: usize,
    /// Per-panel coefficients.
    pub coeffs: Vec<Vec<f64>>,
}

impl Density {
    /// The zero density on the given frame.
    pub fn zeros(frame: &BoundaryFrame) -> Density {
        Density { k: frame.k, coeffs: vec![vec![0.0; frame.k]; frame.panels.len()] }
    }

    /// Fit a function of position onto the frame's panels.
    pub fn from_fn(frame: &BoundaryFrame, f: &dyn Fn(Point) -> f64) -> Density {
        let vals: Vec<Vec<f64>> = frame
            .geom
            .iter()
            .map(|g| g.pos.iter().map(|&p| f(p)).collect())
            .collect();
        Density::from_node_values(frame, &vals)
    }

    /// Build from samples at the frame's quadrature nodes.
    pub fn from_node_values(frame: &BoundaryFrame, vals: &[Vec<f64>]) -> Density {
        let k = frame.k;
        let fit = legendre_fit_matrix(k);
        let coeffs = vals
            .iter()
            .map(|v| {
                (0..k)
                    .map(|j| (0..k).map(|i| fit[j * k + i] * v[i]).sum())
                    .collect()
            })
            .collect();
        Density { k, coeffs }
    }

    /// Evaluate the density on panel `panel` at parameter s.
    pub fn eval(&self, panel: usize, s: f64) -> f64 {
        legendre_eval(&self.coeffs[panel], s)
    }

    /// Values at the frame's quadrature nodes, panel by panel.
    pub fn node_values(&self, frame: &BoundaryFrame) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|c| frame.nodes.iter().map(|&s| legendre_eval(c, s)).collect())
            .collect()
    }

    /// Largest absolute node value over all panels.
    pub fn max_abs(&self, frame: &BoundaryFrame) -> f64 {
        self.node_values(frame)
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Which layer kernel [`boundary_fgt`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKernel {
    /// exp(-|x - y|^2 / delta).
    Single,
    /// Normal-y derivative of the Gaussian, 2 (x - y).nu_y / delta times it.
    Double,
}

/// Discretize curves into a frame at time `time` with `k` terms per panel.
///
/// Panels split each curve's parameter range evenly; the Legendre fits must
/// reproduce the curve at 2k check nodes to 1e-10 of the curve diameter, and
/// the parametrization speed must stay positive at all nodes, otherwise a
/// geometry failure is returned.
pub fn build_boundary(curves: &[CurveDesc], k: usize, time: f64) -> Result<BoundaryFrame> {
    if k < 4 {
        return Err(Error::InvalidArgument("build_boundary: k must be at least 4".into()));
    }
    if curves.is_empty() {
        return Err(Error::InvalidArgument("build_boundary: no curves".into()));
    }
    let (nodes, weights) = legendre_rule(k);
    let fit = legendre_fit_matrix(k);
    let mut frame = BoundaryFrame {
        k,
        time,
        panels: Vec::new(),
        geom: Vec::new(),
        curve_of_panel: Vec::new(),
        lengths: Vec::new(),
        disk_centers: Vec::new(),
        disk_radii: Vec::new(),
        nodes,
        weights,
    };
    for (ci, curve) in curves.iter().enumerate() {
        if curve.panels == 0 {
            return Err(Error::InvalidArgument("build_boundary: zero panel count".into()));
        }
        // Curve diameter estimate for tolerance scaling.
        let samples: Vec<Point> =
            (0..64).map(|i| curve.position(2.0 * std::f64::consts::PI * i as f64 / 64.0, time)).collect();
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for p in &samples {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt().max(1e-300);
        let step = 2.0 * std::f64::consts::PI / curve.panels as f64;
        let mut first_start: Option<Point> = None;
        let mut prev_end: Option<Point> = None;
        for j in 0..curve.panels {
            let t0 = j as f64 * step;
            let theta = |s: f64| t0 + 0.5 * (s + 1.0) * step;
            let xs: Vec<f64> =
                frame.nodes.iter().map(|&s| curve.position(theta(s), time)[0]).collect();
            let ys: Vec<f64> =
                frame.nodes.iter().map(|&s| curve.position(theta(s), time)[1]).collect();
            // Fitting the deviation from the panel mean keeps the roundoff in
            // the higher coefficients proportional to the panel's extent, not
            // to the coordinate magnitude; the derivative coefficients (and so
            // the curvature) are noticeably cleaner for it.
            let mx = xs.iter().sum::<f64>() / k as f64;
            let my = ys.iter().sum::<f64>() / k as f64;
            let mut fit1: Vec<f64> = (0..k)
                .map(|j| (0..k).map(|i| fit[j * k + i] * (xs[i] - mx)).sum())
                .collect();
            let mut fit2: Vec<f64> = (0..k)
                .map(|j| (0..k).map(|i| fit[j * k + i] * (ys[i] - my)).sum())
                .collect();
            fit1[0] += mx;
            fit2[0] += my;
            let panel = Panel { coeffs_x1: fit1, coeffs_x2: fit2 };
            // Reproduction check at 2k nodes.
            let mut disk_r = 0.0f64;
            let c0 = panel.position(0.0);
            for i in 0..2 * k {
                let s = -1.0 + 2.0 * (i as f64 + 0.5) / (2 * k) as f64;
                let got = panel.position(s);
                let want = curve.position(theta(s), time);
                let err = dist2(got, want).sqrt();
                if err > 1e-10 * diam {
                    return Err(Error::GeometryFailure(format!(
                        "panel {j} of curve {ci} under-resolved: fit error {err:.3e} \
                         (increase panel count or k)"
                    )));
                }
                disk_r = disk_r.max(dist2(want, c0).sqrt());
            }
            for s in [-1.0, 1.0] {
                disk_r = disk_r.max(dist2(panel.position(s), c0).sqrt());
            }
            let geom = panel_geometry(curve, &panel, &frame.nodes, theta, time)?;
            let length: f64 =
                frame.weights.iter().zip(geom.speed.iter()).map(|(w, sp)| w * sp).sum();
            if let Some(pe) = prev_end {
                let gap = dist2(pe, panel.position(-1.0)).sqrt();
                if gap > 1e-10 * diam {
                    return Err(Error::GeometryFailure(format!(
                        "curve {ci}: chain gap {gap:.3e} before panel {j}"
                    )));
                }
            }
            if first_start.is_none() {
                first_start = Some(panel.position(-1.0));
            }
            prev_end = Some(panel.position(1.0));
            frame.lengths.push(length);
            frame.disk_centers.push(c0);
            frame.disk_radii.push(disk_r * (1.0 + 1e-12) + 1e-14 * diam);
            frame.panels.push(panel);
            frame.geom.push(geom);
            frame.curve_of_panel.push(ci);
        }
        let gap = dist2(first_start.unwrap(), prev_end.unwrap()).sqrt();
        if gap > 1e-10 * diam {
            return Err(Error::GeometryFailure(format!("curve {ci}: not closed, gap {gap:.3e}")));
        }
    }
    Ok(frame)
}

fn panel_geometry(
    curve: &CurveDesc,
    panel: &Panel,
    nodes: &[f64],
    theta: impl Fn(f64) -> f64,
    time: f64,
) -> Result<PanelGeom> {
    let d1x = legendre_derivative_coeffs(&panel.coeffs_x1);
    let d1y = legendre_derivative_coeffs(&panel.coeffs_x2);
    let d2x = legendre_derivative_coeffs(&d1x);
    let d2y = legendre_derivative_coeffs(&d1y);
    let mut g = PanelGeom {
        pos: Vec::new(),
        tangent: Vec::new(),
        normal: Vec::new(),
        curvature: Vec::new(),
        speed: Vec::new(),
        vel_n: Vec::new(),
    };
    let scale = panel
        .coeffs_x1
        .iter()
        .chain(panel.coeffs_x2.iter())
        .fold(0.0f64, |m, &c| m.max(c.abs()))
        .max(1e-300);
    for &s in nodes {
        let p = panel.position(s);
        let xp = legendre_eval(&d1x, s);
        let yp = legendre_eval(&d1y, s);
        let speed = (xp * xp + yp * yp).sqrt();
        if speed <= 1e-12 * scale {
            return Err(Error::GeometryFailure(format!(
                "vanishing parametrization speed at s = {s:.3}"
            )));
        }
        let tau = [xp / speed, yp / speed];
        // Positively oriented curve: the outward normal is the tangent
        // rotated clockwise.
        let nu = [tau[1], -tau[0]];
        let xpp = legendre_eval(&d2x, s);
        let ypp = legendre_eval(&d2y, s);
        let kappa = (xp * ypp - yp * xpp) / (speed * speed * speed);
        let vel = curve.velocity(theta(s), time);
        g.pos.push(p);
        g.tangent.push(tau);
        g.normal.push(nu);
        g.curvature.push(kappa);
        g.speed.push(speed);
        g.vel_n.push(vel[0] * nu[0] + vel[1] * nu[1]);
    }
    Ok(g)
}

/// Evaluate a panel density on the subinterval [a, b] at `k_c` Gauss-Legendre
/// subnodes (mapped from [-1, 1]).
pub fn interp_density(coeffs: &[f64], a: f64, b: f64, k_c: usize) -> Vec<f64> {
    let (xs, _) = legendre_rule(k_c);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    xs.iter().map(|&u| legendre_eval(coeffs, mid + half * u)).collect()
}

fn kernel_value(kernel: BoundaryKernel, x: Point, y: Point, nu: Point, delta: f64) -> f64 {
    let g = (-dist2(x, y) / delta).exp();
    match kernel {
        BoundaryKernel::Single => g,
        BoundaryKernel::Double => {
            2.0 * ((x[0] - y[0]) * nu[0] + (x[1] - y[1]) * nu[1]) / delta * g
        }
    }
}

/// Boundary Gauss transform: the integral over the frame of the single- or
/// double-layer Gaussian kernel times the density, at each target.
///
/// Panels whose bounding disk lies farther than sqrt(delta log(1/eps)) from a
/// target are skipped. Wide kernels (delta > |panel|^2) use the native k-node
/// rule; sharp kernels are integrated over the non-negligible subinterval
/// with the density interpolated to composite [`K_CORR`]-node rules.
pub fn boundary_fgt(
    frame: &BoundaryFrame,
    density: &Density,
    delta_g: f64,
    targets: &[Point],
    eps: f64,
    kernel: BoundaryKernel,
) -> Result<Vec<f64>> {
    if !(delta_g > 0.0) {
        return Err(Error::InvalidArgument("boundary_fgt: delta_g must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument("boundary_fgt: eps must lie in (0, 1)".into()));
    }
    if density.k != frame.k || density.coeffs.len() != frame.panels.len() {
        return Err(Error::InvalidArgument("boundary_fgt: density does not match frame".into()));
    }
    let node_vals = density.node_values(frame);
    let r_cut = (delta_g * (1.0 / eps).ln()).sqrt();
    let values = targets
        .par_iter()
        .map(|&x| {
            let mut total = 0.0;
            for j in 0..frame.panels.len() {
                let gap = dist2(x, frame.disk_centers[j]).sqrt() - frame.disk_radii[j];
                if gap > r_cut {
                    continue;
                }
                if delta_g > frame.lengths[j] * frame.lengths[j] {
                    let g = &frame.geom[j];
                    for i in 0..frame.k {
                        total += frame.weights[i]
                            * g.speed[i]
                            * node_vals[j][i]
                            * kernel_value(kernel, x, g.pos[i], g.normal[i], delta_g);
                    }
                } else {
                    total += corrected_panel(frame, density, j, delta_g, x, r_cut, kernel);
                }
            }
            total
        })
        .collect();
    Ok(values)
}

/// Sharp-kernel path: locate the subinterval of panel `j` within `r_cut` of
/// the target by bisection, then integrate with composite K_CORR-node rules
/// whose sub-panels span at most ~2 sqrt(delta) of arc.
fn corrected_panel(
    frame: &BoundaryFrame,
    density: &Density,
    j: usize,
    delta: f64,
    x: Point,
    r_cut: f64,
    kernel: BoundaryKernel,
) -> f64 {
    let panel = &frame.panels[j];
    let d1x = legendre_derivative_coeffs(&panel.coeffs_x1);
    let d1y = legendre_derivative_coeffs(&panel.coeffs_x2);
    let dist = |s: f64| dist2(x, panel.position(s)).sqrt();
    // Coarse scan; the panel is short and smooth, so the in-range set is an
    // interval up to this resolution.
    let m = 4 * frame.k;
    let s_of = |i: usize| -1.0 + 2.0 * i as f64 / m as f64;
    let dists: Vec<f64> = (0..=m).map(|i| dist(s_of(i))).collect();
    // Crossing bisection: walks [outside, inside] down to the cutoff and
    // returns the outside end.
    let cross = |mut out: f64, mut ins: f64| {
        for _ in 0..30 {
            let mid = 0.5 * (out + ins);
            if dist(mid) <= r_cut {
                ins = mid;
            } else {
                out = mid;
            }
        }
        out
    };
    let (mut a, mut b);
    if let Some(first) = dists.iter().position(|&d| d <= r_cut) {
        let last = dists.iter().rposition(|&d| d <= r_cut).unwrap();
        a = s_of(first);
        b = s_of(last);
        if first > 0 {
            a = cross(s_of(first - 1), a);
        }
        if last < m {
            b = cross(s_of(last + 1), b);
        }
    } else {
        // The in-range set can be narrower than the scan spacing when the
        // target sits just off the curve and r_cut is small. Minimize the
        // distance around the closest sample before giving up.
        let im = (0..=m).min_by(|&i, &j| dists[i].total_cmp(&dists[j])).unwrap();
        let (mut lo, mut hi) = (s_of(im.saturating_sub(1)), s_of((im + 1).min(m)));
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(m1) <= dist(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let s_min = 0.5 * (lo + hi);
        if dist(s_min) > r_cut {
            return 0.0;
        }
        a = cross(s_of(im.saturating_sub(1)), s_min);
        b = cross(s_of((im + 1).min(m)), s_min);
    }
    // Arc length of [a, b] from the node speeds (the panel speed varies
    // slowly), then sub-panels of about 2 sqrt(delta).
    let speed_mid = {
        let s = 0.5 * (a + b);
        let xp = legendre_eval(&d1x, s);
        let yp = legendre_eval(&d1y, s);
        (xp * xp + yp * yp).sqrt()
    };
    let arc = speed_mid * (b - a);
    let n_sub = ((arc / (2.0 * delta.sqrt())).ceil() as usize).clamp(1, 64);
    let (xs, ws) = legendre_rule(K_CORR);
    let mut total = 0.0;
    for p in 0..n_sub {
        let pa = a + (b - a) * p as f64 / n_sub as f64;
        let pb = a + (b - a) * (p + 1) as f64 / n_sub as f64;
        let vals = interp_density(&density.coeffs[j], pa, pb, K_CORR);
        let mid = 0.5 * (pa + pb);
        let half = 0.5 * (pb - pa);
        for (i, (&u, &w)) in xs.iter().zip(ws.iter()).enumerate() {
            let s = mid + half * u;
            let y = panel.position(s);
            let xp = legendre_eval(&d1x, s);
            let yp = legendre_eval(&d1y, s);
            let speed = (xp * xp + yp * yp).sqrt();
            let nu = [yp / speed, -xp / speed];
            total += w * half * speed * vals[i] * kernel_value(kernel, x, y, nu, delta);
        }
    }
    total
}

/// Warnings for panels out of proportion with the tree leaf that contains
/// their center (longer than twice the leaf side, or outside the tree).
pub fn commensurability_warnings(frame: &BoundaryFrame, tree: &QuadTree) -> Vec<String> {
    let mut out = Vec::new();
    for j in 0..frame.panels.len() {
        let c = frame.disk_centers[j];
        match tree.locate_leaf(c) {
            Some(leaf) => {
                let side = 2.0 * tree.box_halfwidth(leaf);
                if frame.lengths[j] > 2.0 * side {
                    out.push(format!(
                        "panel {j} has length {:.3e}, more than twice the side {side:.3e} \
                         of its leaf; refine the boundary or the tree",
                        frame.lengths[j]
                    ));
                }
            }
            None => out.push(format!(
                "panel {j} center ({:.3}, {:.3}) lies outside the tree", c[0], c[1]
            )),
        }
    }
    out
}
