//! Time-marching drivers: implicit Adams-Moulton stepping for periodic
//! semilinear problems u_t = Laplace(u) + F(u, x, t), and Volterra marching
//! of the double-layer density for Dirichlet boundary value problems.
//!
//! Both reduce every heat propagation to the potential evaluators: the
//! Adams-Moulton history terms are periodic Gauss transforms of stored
//! forcing grids at kernel width 4 i dt, and the Dirichlet march advances
//! its far history by one [`far_history_update_frozen`] per step.

use std::sync::Arc;
use std::time::Instant;

use crate::boundary::{
    build_boundary, BoundaryFrame, BoundaryKernel, CurveDesc, Density, Motion,
};
use crate::error::{Error, Result};
use crate::fgt::{fgt_apply, periodic_fgt_apply, FgtPlan};
use crate::numerics::gauss::legendre_rule;
use crate::potentials::{
    check_free_space_extent, child_grid_points, far_history_update_frozen, fit_from_points,
    initial_potential, layer_local_asymptotic, layer_local_quadrature, sample_layer_increment,
    volume_potential_local, HistoryState, PotentialSplit,
};
use crate::treegrid::{balance, balance_periodic, cheb_fit, GridFunction, QuadTree};
use crate::Point;

/// Semilinear right-hand side F(u, x, t).
pub type Semilinear<'a> = &'a dyn Fn(f64, Point, f64) -> f64;

/// Implicit Adams-Moulton scheme of order 1..=6: the step reads
/// u_{n+1} = I[u_n](dt) + dt sum_{i=0}^{s-1} b_i U_i, where U_0 is the
/// implicit forcing term at t_{n+1} and U_i propagates the stored forcing
/// grid from t_{n+1-i}.
#[derive(Clone, Debug)]
pub struct AmScheme {
    /// Scheme order s.
    pub order: usize,
    /// Weights b_0..b_{s-1}; they sum to one.
    pub b: Vec<f64>,
}

impl AmScheme {
    /// Scheme of the given order.
    pub fn new(order: usize) -> Result<AmScheme> {
        let b: Vec<f64> = match order {
            1 => vec![1.0],
            2 => vec![0.5, 0.5],
            3 => vec![5.0 / 12.0, 2.0 / 3.0, -1.0 / 12.0],
            4 => [9.0, 19.0, -5.0, 1.0].iter().map(|v| v / 24.0).collect(),
            5 => [251.0, 646.0, -264.0, 106.0, -19.0].iter().map(|v| v / 720.0).collect(),
            6 => {
                [475.0, 1427.0, -798.0, 482.0, -173.0, 27.0].iter().map(|v| v / 1440.0).collect()
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "AmScheme: order must lie in 1..=6".into(),
                ))
            }
        };
        let sum: f64 = b.iter().sum();
        debug_assert!((sum - 1.0).abs() < 1e-14, "weights must sum to one");
        Ok(AmScheme { order, b })
    }
}

/// Marching state of the semilinear solver at time step * dt.
#[derive(Clone)]
pub struct SolverState {
    /// Completed steps.
    pub step: usize,
    /// Step size.
    pub dt: f64,
    /// Periodic (unit-cell) propagation.
    pub periodic: bool,
    /// Current solution grid.
    pub u: GridFunction,
    /// Forcing grids F(u_m, ., t_m) at the most recent steps, oldest first.
    pub f_hist: Vec<GridFunction>,
    /// Explicit part g of the last step, kept for spatial adaptivity.
    pub g: Option<GridFunction>,
    /// Implicit weight dt b_0 of the last step.
    pub c: f64,
    /// Worst secant iteration count of the last step.
    pub last_iters: usize,
}

impl SolverState {
    /// Initial state at t = 0.
    pub fn new(
        u0: GridFunction,
        f: Semilinear,
        dt: f64,
        periodic: bool,
    ) -> Result<SolverState> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("SolverState: dt must be positive".into()));
        }
        let f0 = forcing_grid(&u0, f, 0.0)?;
        Ok(SolverState {
            step: 0,
            dt,
            periodic,
            u: u0,
            f_hist: vec![f0],
            g: None,
            c: 0.0,
            last_iters: 0,
        })
    }

    /// Time of the current state.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }
}

fn leaf_node_points(tree: &QuadTree) -> Vec<Point> {
    let mut pts = Vec::new();
    for &id in &tree.leaves() {
        pts.extend(tree.leaf_nodes(id));
    }
    pts
}

fn fit_values(tree: &Arc<QuadTree>, vals: &[f64]) -> Result<GridFunction> {
    let leaves = tree.leaves();
    let k2 = tree.k * tree.k;
    let mut gf = GridFunction::zeros(tree.clone());
    for (n, &id) in leaves.iter().enumerate() {
        gf.patches[id as usize] = Some(cheb_fit(tree, id, &vals[n * k2..(n + 1) * k2])?);
    }
    Ok(gf)
}

fn forcing_grid(u: &GridFunction, f: Semilinear, t: f64) -> Result<GridFunction> {
    let tree = u.tree.clone();
    fit_from_points(&tree, |pts| {
        pts.iter().map(|&x| Ok(f(u.eval(x)?, x, t))).collect()
    })
}

/// Point evaluation of I[src](., elapsed) = G(., elapsed) * src.
fn point_apply(
    src: &GridFunction,
    elapsed: f64,
    eps: f64,
    periodic: bool,
    pts: &[Point],
) -> Result<Vec<f64>> {
    if !periodic {
        check_free_space_extent(src, elapsed, eps)?;
    }
    let plan = FgtPlan::new(src.tree.clone(), 4.0 * elapsed, eps, periodic)?;
    let out = if periodic {
        periodic_fgt_apply(&plan, src, &[], false, pts)?
    } else {
        fgt_apply(&plan, src, &[], false, pts)?
    };
    let scale = 1.0 / (4.0 * std::f64::consts::PI * elapsed);
    Ok(out.point_values.iter().map(|v| v * scale).collect())
}

/// Solve u = g_val + c F(u) by secant iteration from the two guesses, to a
/// residual below 1e-12 (1 + |u|) within 50 iterations.
pub fn secant_solve(
    g_val: f64,
    c: f64,
    f: &dyn Fn(f64) -> f64,
    u_guess0: f64,
    u_guess1: f64,
) -> Result<f64> {
    let (u, _, ok) = secant_iter(g_val, c, f, u_guess0, u_guess1);
    if ok {
        Ok(u)
    } else {
        Err(Error::AccuracyFailure("secant iteration did not converge".into()))
    }
}

fn secant_iter(
    g_val: f64,
    c: f64,
    f: &dyn Fn(f64) -> f64,
    u_guess0: f64,
    u_guess1: f64,
) -> (f64, usize, bool) {
    let res = |u: f64| u - g_val - c * f(u);
    let mut x0 = u_guess0;
    let mut r0 = res(x0);
    if r0.abs() <= 1e-12 * (1.0 + x0.abs()) {
        return (x0, 0, true);
    }
    let mut x1 = if u_guess1 != u_guess0 {
        u_guess1
    } else {
        u_guess0 + 1e-8 * (1.0 + u_guess0.abs())
    };
    let mut r1 = res(x1);
    for it in 1..=50 {
        if r1.abs() <= 1e-12 * (1.0 + x1.abs()) {
            return (x1, it, true);
        }
        let d = r1 - r0;
        if d == 0.0 {
            break;
        }
        let x2 = x1 - r1 * (x1 - x0) / d;
        if !x2.is_finite() {
            break;
        }
        x0 = x1;
        r0 = r1;
        x1 = x2;
        r1 = res(x1);
    }
    (x1, 50, false)
}

/// Scalar step equation with a bisection fallback on a doubling bracket
/// around the previous value.
fn solve_node(
    g_val: f64,
    c: f64,
    f: &dyn Fn(f64) -> f64,
    u_prev: f64,
    u_guess1: f64,
) -> Result<(f64, usize)> {
    if c == 0.0 {
        return Ok((g_val, 0));
    }
    let (u, iters, ok) = secant_iter(g_val, c, f, u_prev, u_guess1);
    if ok {
        return Ok((u, iters));
    }
    let res = |u: f64| u - g_val - c * f(u);
    let mut h = 1.0 + u_prev.abs();
    for _ in 0..4 {
        let (a, b) = (u_prev - h, u_prev + h);
        let n = 64;
        let mut xp = a;
        let mut rp = res(a);
        let mut bracket = None;
        for i in 1..=n {
            let x = a + (b - a) * i as f64 / n as f64;
            let r = res(x);
            if rp == 0.0 {
                return Ok((xp, 50));
            }
            if rp.signum() != r.signum() {
                bracket = Some((xp, x, rp));
                break;
            }
            xp = x;
            rp = r;
        }
        if let Some((mut lo, mut hi, mut rlo)) = bracket {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let rm = res(mid);
                if rm.abs() <= 1e-12 * (1.0 + mid.abs()) {
                    return Ok((mid, 50));
                }
                if rm.signum() == rlo.signum() {
                    lo = mid;
                    rlo = rm;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * (1.0 + lo.abs()) {
                    break;
                }
            }
            let mid = 0.5 * (lo + hi);
            if res(mid).abs() <= 1e-9 * (1.0 + mid.abs()) {
                return Ok((mid, 50));
            }
        }
        h *= 2.0;
    }
    Err(Error::AccuracyFailure(
        "node equation: secant diverged and no bracket was found".into(),
    ))
}

/// One implicit Adams-Moulton step. The explicit part g is assembled by
/// Gauss transforms of the current solution and the stored forcing grids,
/// then u_{n+1}(x) = g(x) + dt b_0 F(u_{n+1}, x, t_{n+1}) is solved per
/// node and refit.
pub fn am_step(
    state: &SolverState,
    scheme: &AmScheme,
    f: Semilinear,
    eps: f64,
) -> Result<SolverState> {
    let s = scheme.order;
    if state.f_hist.len() < s - 1 {
        return Err(Error::InvalidState(format!(
            "order-{s} step needs {} stored forcing grids, have {}",
            s - 1,
            state.f_hist.len()
        )));
    }
    let dt = state.dt;
    let t_n = state.time();
    let t_next = t_n + dt;
    let tree = state.u.tree.clone();
    let nodes = leaf_node_points(&tree);
    let mut gvals = point_apply(&state.u, dt, eps, state.periodic, &nodes)?;
    for i in 1..s {
        let fm = &state.f_hist[state.f_hist.len() - i];
        let vals = point_apply(fm, i as f64 * dt, eps, state.periodic, &nodes)?;
        let w = dt * scheme.b[i];
        for (g, v) in gvals.iter_mut().zip(vals) {
            *g += w * v;
        }
    }
    let c = dt * scheme.b[0];
    let mut uvals = Vec::with_capacity(nodes.len());
    let mut fvals = Vec::with_capacity(nodes.len());
    let mut last_iters = 0;
    for (&x, &gv) in nodes.iter().zip(gvals.iter()) {
        let un = state.u.eval(x)?;
        let fx = |u: f64| f(u, x, t_next);
        let (un1, it) = solve_node(gv, c, &fx, un, gv + c * f(un, x, t_n))
            .map_err(|e| Error::StepFailure { t: t_next, msg: e.to_string() })?;
        last_iters = last_iters.max(it);
        uvals.push(un1);
        fvals.push(fx(un1));
    }
    let mut f_hist = state.f_hist.clone();
    f_hist.push(fit_values(&tree, &fvals)?);
    while f_hist.len() > 5 {
        f_hist.remove(0);
    }
    Ok(SolverState {
        step: state.step + 1,
        dt,
        periodic: state.periodic,
        u: fit_values(&tree, &uvals)?,
        f_hist,
        g: Some(fit_values(&tree, &gvals)?),
        c,
        last_iters,
    })
}

/// Starting values u_1 .. u_{s-1} for an order-s scheme: trapezoidal marches
/// at dt / 2^m on the fixed initial tree, combined by Richardson
/// extrapolation in the step size to cancel the h^2 .. h^{s-1} error terms.
/// Empty for s <= 2, which self-starts.
pub fn richardson_bootstrap(
    u0: &GridFunction,
    f: Semilinear,
    order: usize,
    dt: f64,
    periodic: bool,
    eps: f64,
) -> Result<Vec<GridFunction>> {
    if order < 1 || order > 6 {
        return Err(Error::InvalidArgument("bootstrap: order must lie in 1..=6".into()));
    }
    if order <= 2 {
        return Ok(Vec::new());
    }
    let levels = order - 1;
    let am2 = AmScheme::new(2)?;
    let tree = u0.tree.clone();
    let nodes = leaf_node_points(&tree);
    // table[m][j] holds u((j + 1) dt) marched at step dt / 2^m.
    let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(levels);
    for m in 0..levels {
        let sub = 1usize << m;
        let h = dt / sub as f64;
        let mut st = SolverState::new(u0.clone(), f, h, periodic)?;
        let mut recs = Vec::with_capacity(order - 1);
        for _ in 1..order {
            for _ in 0..sub {
                st = am_step(&st, &am2, f, eps)?;
            }
            recs.push(nodes.iter().map(|&x| st.u.eval(x)).collect::<Result<Vec<f64>>>()?);
        }
        table.push(recs);
    }
    // Neville sweep: combining h and h / 2 as A_fine + (A_fine - A_coarse) /
    // (2^p - 1) cancels the h^p term, p = 2, 3, ...
    for k in 0..levels - 1 {
        let fac = 1.0 / ((1u64 << (k + 2)) as f64 - 1.0);
        for m in 0..levels - 1 - k {
            for j in 0..order - 1 {
                for i in 0..nodes.len() {
                    let coarse = table[m][j][i];
                    let fine = table[m + 1][j][i];
                    table[m][j][i] = fine + (fine - coarse) * fac;
                }
            }
        }
    }
    table[0].iter().map(|vals| fit_values(&tree, vals)).collect()
}

/// State ready for order-s stepping: the bootstrap solutions and their
/// forcing grids stacked into the history.
pub fn am_initialize(
    u0: GridFunction,
    scheme: &AmScheme,
    f: Semilinear,
    dt: f64,
    periodic: bool,
    eps: f64,
) -> Result<SolverState> {
    let mut st = SolverState::new(u0, f, dt, periodic)?;
    if scheme.order <= 2 {
        return Ok(st);
    }
    let starters = richardson_bootstrap(&st.u, f, scheme.order, dt, periodic, eps)?;
    for (j, u) in starters.into_iter().enumerate() {
        let t = (j + 1) as f64 * dt;
        st.f_hist.push(forcing_grid(&u, f, t)?);
        st.u = u;
        st.step = j + 1;
    }
    while st.f_hist.len() > 5 {
        st.f_hist.remove(0);
    }
    Ok(st)
}

/// Spatial adaptivity after a step: the node equation u = g + c F(u) is
/// re-solved at probe points, leaves whose u or F interpolant misses the
/// re-solved values by more than tol are split, over-resolved sibling quads
/// are merged, and the tree is re-balanced. `tol` is relative to the larger
/// of the u and F scales.
pub fn spatial_adapt(state: &SolverState, f: Semilinear, tol: f64) -> Result<SolverState> {
    let Some(g0) = &state.g else {
        return Err(Error::InvalidState(
            "spatial_adapt: no assembled step data; march one step first".into(),
        ));
    };
    let t = state.time();
    let c = state.c;
    let f_now = state.f_hist.last().expect("state holds at least one forcing grid");
    let scale = state.u.max_abs().max(f_now.max_abs()).max(1e-300);
    let tol_abs = tol * scale;
    let rebalance = |tr: QuadTree| if state.periodic { balance_periodic(&tr) } else { balance(&tr) };

    let mut u = state.u.clone();
    let mut fg = f_now.clone();
    let mut g = g0.clone();
    let solve_at = |g: &GridFunction, u: &GridFunction, x: Point| -> Result<f64> {
        let gv = g.eval_clamped(x)?;
        let fx = |v: f64| f(v, x, t);
        let guess = u.eval_clamped(x)?;
        let (v, _) = solve_node(gv, c, &fx, guess, gv + c * fx(guess))
            .map_err(|e| Error::StepFailure { t, msg: e.to_string() })?;
        Ok(v)
    };

    // Refine: compare each leaf interpolant against re-solved values on the
    // child grid.
    for _round in 0..12 {
        let tree = u.tree.clone();
        let leaves = tree.leaves();
        let mut to_split = Vec::new();
        for &id in &leaves {
            let mut err = 0.0f64;
            for p in child_grid_points(&tree, id) {
                let us = solve_at(&g, &u, p)?;
                err = err.max((u.eval(p)? - us).abs());
                err = err.max((fg.eval(p)? - f(us, p, t)).abs());
                if err > tol_abs {
                    break;
                }
            }
            if err > tol_abs {
                to_split.push(id);
            }
        }
        if to_split.is_empty() {
            break;
        }
        let mut raw = (*tree).clone();
        for id in to_split {
            raw.subdivide(id)?;
        }
        let nt = Arc::new(rebalance(raw));
        g = g.resample_to(nt.clone())?;
        let mut uvals = Vec::new();
        for &x in &leaf_node_points(&nt) {
            uvals.push(solve_at(&g, &u, x)?);
        }
        u = fit_values(&nt, &uvals)?;
        fg = forcing_grid(&u, f, t)?;
    }

    // Coarsen: collapse sibling quads whose parent fit reproduces both u and
    // F at the child nodes.
    loop {
        let tree = u.tree.clone();
        let mut collapsed = Vec::new();
        for id in 0..tree.boxes.len() as u32 {
            let Some(children) = tree.boxes[id as usize].children else { continue };
            if !children.iter().all(|&cid| tree.boxes[cid as usize].is_leaf()) {
                continue;
            }
            let su: Result<Vec<f64>> =
                tree.leaf_nodes(id).iter().map(|&p| u.eval_clamped(p)).collect();
            let pu = cheb_fit(&tree, id, &su?)?;
            let sf: Result<Vec<f64>> =
                tree.leaf_nodes(id).iter().map(|&p| fg.eval_clamped(p)).collect();
            let pf = cheb_fit(&tree, id, &sf?)?;
            let mut err = 0.0f64;
            for &cid in &children {
                for p in tree.leaf_nodes(cid) {
                    err = err
                        .max((crate::treegrid::cheb_eval(&tree, &pu, p)? - u.eval(p)?).abs());
                    err = err
                        .max((crate::treegrid::cheb_eval(&tree, &pf, p)? - fg.eval(p)?).abs());
                }
            }
            if err <= tol_abs {
                collapsed.push(id);
            }
        }
        if collapsed.is_empty() {
            break;
        }
        let mut raw = (*tree).clone();
        for id in collapsed {
            raw.undivide(id)?;
        }
        let raw = rebalance(raw);
        if raw.same_structure(&tree) {
            break;
        }
        let nt = Arc::new(raw);
        u = u.resample_to(nt.clone())?;
        fg = fg.resample_to(nt.clone())?;
        g = g.resample_to(nt.clone())?;
    }

    let mut out = state.clone();
    out.u = u;
    *out.f_hist.last_mut().expect("nonempty") = fg;
    out.g = Some(g);
    Ok(out)
}

/// Dirichlet marching variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarchScheme {
    /// Piecewise-constant density in time, first order.
    Euler,
    /// One predict-evaluate-correct pass with a linear-in-time density on
    /// the local slab, second order.
    PredictorCorrector,
}

/// A Dirichlet boundary value problem: u_t = Laplace(u) + F on one side of
/// the curves, u = bc on them, u(., 0) = u0.
pub struct BvpProblem {
    /// Boundary curves with their motions and panel counts.
    pub curves: Vec<CurveDesc>,
    /// Nodes per panel.
    pub k: usize,
    /// Dirichlet data on the curves.
    pub bc: Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>,
    /// Initial field; zero when absent.
    pub u0: Option<Arc<dyn Fn(Point) -> f64 + Send + Sync>>,
    /// Volume forcing; zero when absent.
    pub forcing: Option<Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>>,
    /// Solution region: outside the curves instead of inside.
    pub exterior: bool,
    /// Periodic unit cell instead of free space.
    pub periodic: bool,
}

impl BvpProblem {
    /// Check the boundary data against the initial field at t = 0; a
    /// mismatch excites an O(1) starting transient of the density march.
    pub fn compatibility_warnings(&self) -> Result<Vec<String>> {
        let frame = build_boundary(&self.curves, self.k, 0.0)?;
        let mut scale = 0.0f64;
        let mut worst: Vec<(usize, f64)> = vec![(0, 0.0); frame.panels.len()];
        for (j, g) in frame.geom.iter().enumerate() {
            for i in 0..frame.k {
                let b = (self.bc)(g.pos[i], 0.0);
                let u = self.u0.as_ref().map_or(0.0, |u0| u0(g.pos[i]));
                scale = scale.max(b.abs()).max(u.abs());
                let d = (b - u).abs();
                if d > worst[j].1 {
                    worst[j] = (j, d);
                }
            }
        }
        let tol = 1e-8 * (1.0 + scale);
        Ok(worst
            .into_iter()
            .filter(|&(_, d)| d > tol)
            .map(|(j, d)| {
                format!("boundary data and initial field disagree by {d:.3e} on panel {j} at t = 0")
            })
            .collect())
    }
}

/// Step sizes and tolerances of a Dirichlet march.
pub struct MarchParams {
    /// Time step; must equal the split's delta.
    pub dt: f64,
    /// Number of steps.
    pub steps: usize,
    /// Marching variant.
    pub scheme: MarchScheme,
    /// Time splitting of the layer potentials.
    pub split: PotentialSplit,
    /// Quadrature nodes on the near-history slab [delta, 2 delta].
    pub n_hist: usize,
    /// Gauss transform tolerance.
    pub eps: f64,
}

/// Per-step record of a Dirichlet march.
#[derive(Clone, Copy, Debug)]
pub struct StepLog {
    /// Time at the end of the step.
    pub t: f64,
    /// L2 norm of the density over the boundary.
    pub mu_l2: f64,
    /// L2 norm of the effective boundary data f - u^(V).
    pub ftilde_l2: f64,
    /// Seconds spent advancing the far history and volume part.
    pub wall_history: f64,
    /// Seconds spent assembling and solving the density update.
    pub wall_solve: f64,
}

/// Output of [`dirichlet_march`]: the density history, the far-history
/// state, and the volume part at the final time.
pub struct DirichletRun {
    frames: Vec<BoundaryFrame>,
    /// Densities mu_0 .. mu_steps; mu_n applies on [n dt, (n + 1) dt).
    pub densities: Vec<Density>,
    /// Far history at the final time.
    pub state: HistoryState,
    /// Volume part u^(V) at the final time, when the problem has one.
    pub uv: Option<GridFunction>,
    /// Time splitting used.
    pub split: PotentialSplit,
    /// Step size.
    pub dt: f64,
    /// Gauss transform tolerance used.
    pub eps: f64,
    /// Near-history node count used.
    pub n_hist: usize,
    /// Solution region sign (see [`BvpProblem::exterior`]).
    pub exterior: bool,
    /// Per-step records.
    pub log: Vec<StepLog>,
}

impl DirichletRun {
    /// Boundary frame at step n (a single shared frame when stationary).
    pub fn frame(&self, n: usize) -> &BoundaryFrame {
        if self.frames.len() == 1 {
            &self.frames[0]
        } else {
            &self.frames[n]
        }
    }
}

/// Gauss-Legendre rule in u = -log(t - tau) over elapsed times [b, a].
fn log_slab_rule(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = -a.ln();
    let hi = -b.ln();
    let (xs, ws) = legendre_rule(n);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let offsets = xs.iter().map(|&x| (-(mid + half * x)).exp()).collect();
    let weights = ws.iter().map(|&w| w * half).collect();
    (offsets, weights)
}

fn boundary_l2(frame: &BoundaryFrame, vals: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (g, pv) in frame.geom.iter().zip(vals.iter()) {
        for i in 0..frame.k {
            s += frame.weights()[i] * g.speed[i] * pv[i] * pv[i];
        }
    }
    s.sqrt()
}

fn linear_blend(a: &Density, b: &Density, theta: f64) -> Density {
    let coeffs = a
        .coeffs
        .iter()
        .zip(b.coeffs.iter())
        .map(|(ca, cb)| ca.iter().zip(cb.iter()).map(|(&x, &y)| x + theta * (y - x)).collect())
        .collect();
    Density { k: a.k, coeffs }
}

/// March the double-layer density of a Dirichlet problem: each step solves
/// mu_{n+1} = 2 s (D_L[mu] + D_NH[mu_{n-1}] + v_FH - ftilde) on the boundary
/// nodes (s = +1 interior, -1 exterior) and advances the far history on the
/// carrier tree by one frozen update.
pub fn dirichlet_march(
    problem: &BvpProblem,
    tree: Arc<QuadTree>,
    params: &MarchParams,
) -> Result<DirichletRun> {
    let dt = params.dt;
    let delta = params.split.delta;
    if !(dt > 0.0) || (delta - dt).abs() > 1e-12 * dt {
        return Err(Error::InvalidArgument(
            "dirichlet_march: the split delta must equal the time step".into(),
        ));
    }
    if params.steps == 0 || params.n_hist < 2 {
        return Err(Error::InvalidArgument(
            "dirichlet_march: need at least one step and two history nodes".into(),
        ));
    }
    let stationary = problem.curves.iter().all(|c| matches!(c.motion, Motion::Stationary));
    let frames: Vec<BoundaryFrame> = if stationary {
        vec![build_boundary(&problem.curves, problem.k, 0.0)?]
    } else {
        (0..=params.steps)
            .map(|n| build_boundary(&problem.curves, problem.k, n as f64 * dt))
            .collect::<Result<_>>()?
    };
    let frame_of = |n: usize| if stationary { &frames[0] } else { &frames[n] };
    let frame_at = |t: f64| -> Result<BoundaryFrame> {
        build_boundary(&problem.curves, problem.k, t)
    };
    let sgn = if problem.exterior { -1.0 } else { 1.0 };
    let eps = params.eps;

    // Volume part and effective boundary data ftilde = bc - u^(V).
    let has_volume = problem.u0.is_some() || problem.forcing.is_some();
    let mut uv: Option<GridFunction> = if has_volume {
        let u0 = problem.u0.clone();
        Some(GridFunction::from_fn(tree.clone(), &move |p| {
            u0.as_ref().map_or(0.0, |f| f(p))
        }))
    } else {
        None
    };
    let mut f_prev: Option<GridFunction> = problem.forcing.as_ref().map(|fc| {
        let fc = fc.clone();
        GridFunction::from_fn(tree.clone(), &move |p| fc(p, 0.0))
    });
    let ftilde = |frame: &BoundaryFrame, t: f64, uv: &Option<GridFunction>| -> Result<Vec<Vec<f64>>> {
        frame
            .geom
            .iter()
            .map(|g| {
                (0..frame.k)
                    .map(|i| {
                        let v = match uv {
                            Some(u) => u.eval_clamped(g.pos[i])?,
                            None => 0.0,
                        };
                        Ok((problem.bc)(g.pos[i], t) - v)
                    })
                    .collect()
            })
            .collect()
    };

    let ft0 = ftilde(frame_of(0), 0.0, &uv)?;
    let mu0: Vec<Vec<f64>> =
        ft0.iter().map(|pv| pv.iter().map(|v| -2.0 * sgn * v).collect()).collect();
    let mut densities = vec![Density::from_node_values(frame_of(0), &mu0)];
    let mut state = HistoryState::new(tree.clone());
    let (goff, gw) = params.split.graded_nodes(delta);
    let (hoff, hw) = log_slab_rule(2.0 * delta, delta, params.n_hist);
    let mut log = Vec::with_capacity(params.steps);

    for n in 0..params.steps {
        let t1 = (n + 1) as f64 * dt;
        let clock = Instant::now();

        if let Some(u) = uv.take() {
            let mut next = initial_potential(&u, dt, eps, problem.periodic)?;
            if let Some(fc) = &problem.forcing {
                let fc2 = fc.clone();
                let f_now = GridFunction::from_fn(tree.clone(), &move |p| fc2(p, t1));
                let prev = f_prev.take().expect("forcing grid tracked");
                next.add_scaled(&volume_potential_local(&f_now, &prev, dt, eps, problem.periodic)?, 1.0)?;
                f_prev = Some(f_now);
            }
            uv = Some(next);
        }

        // Advance the far history to cover [0, t_{n+1} - 2 delta]: the slab
        // [t_{n-2}, t_{n-1}] carries mu_{n-2} and is seen from t_n.
        if n >= 2 {
            let hist_frames: Vec<BoundaryFrame>;
            let frefs: Vec<&BoundaryFrame> = if stationary {
                vec![&frames[0]; hoff.len()]
            } else {
                let t_n = n as f64 * dt;
                hist_frames =
                    hoff.iter().map(|&e| frame_at(t_n - e)).collect::<Result<_>>()?;
                hist_frames.iter().collect()
            };
            let denss: Vec<&Density> = vec![&densities[n - 2]; hoff.len()];
            let v_inc = sample_layer_increment(
                &frefs,
                &denss,
                &hoff,
                &hw,
                &tree,
                eps,
                BoundaryKernel::Double,
            )?;
            let u_inc = GridFunction::zeros(tree.clone());
            state = far_history_update_frozen(&state, &u_inc, &v_inc, dt, eps, problem.periodic)?;
        }
        let wall_history = clock.elapsed().as_secs_f64();
        let clock = Instant::now();

        let fr1 = frame_of(n + 1);
        let targets: Vec<Point> =
            fr1.geom.iter().flat_map(|g| g.pos.iter().copied()).collect();
        let vfh: Vec<f64> = targets
            .iter()
            .map(|&x| state.v_fh.eval_clamped(x))
            .collect::<Result<_>>()?;
        let dnh: Vec<f64> = if n >= 1 {
            let hist_frames: Vec<BoundaryFrame>;
            let frefs: Vec<&BoundaryFrame> = if stationary {
                vec![&frames[0]; hoff.len()]
            } else {
                hist_frames =
                    hoff.iter().map(|&e| frame_at(t1 - e)).collect::<Result<_>>()?;
                hist_frames.iter().collect()
            };
            let denss: Vec<&Density> = vec![&densities[n - 1]; hoff.len()];
            layer_local_quadrature(
                &frefs,
                &denss,
                &hoff,
                &hw,
                &targets,
                eps,
                BoundaryKernel::Double,
            )?
        } else {
            vec![0.0; targets.len()]
        };
        let ft = ftilde(fr1, t1, &uv)?;

        // D_L over [eps_asym, delta] plus the analytic window; the corrector
        // pass blends linearly towards the predicted density.
        let local_frames: Vec<BoundaryFrame>;
        let lrefs: Vec<&BoundaryFrame> = if stationary {
            vec![&frames[0]; goff.len()]
        } else {
            local_frames = goff.iter().map(|&e| frame_at(t1 - e)).collect::<Result<_>>()?;
            local_frames.iter().collect()
        };
        let mu_n = &densities[n];
        let d_local = |pred: Option<&Density>| -> Result<Vec<Vec<f64>>> {
            let blended: Vec<Density>;
            let drefs: Vec<&Density> = match pred {
                None => vec![mu_n; goff.len()],
                Some(p) => {
                    blended = goff
                        .iter()
                        .map(|&e| linear_blend(mu_n, p, 1.0 - e / delta))
                        .collect();
                    blended.iter().collect()
                }
            };
            let near = layer_local_quadrature(
                &lrefs,
                &drefs,
                &goff,
                &gw,
                &targets,
                eps,
                BoundaryKernel::Double,
            )?;
            let asym = layer_local_asymptotic(
                fr1,
                pred.unwrap_or(mu_n),
                params.split.eps_asym,
                0.0,
                BoundaryKernel::Double,
                true,
                None,
            )?;
            Ok(asym
                .iter()
                .enumerate()
                .map(|(j, pv)| {
                    (0..fr1.k).map(|i| pv[i] + near[j * fr1.k + i]).collect()
                })
                .collect())
        };
        let assemble = |dl: &[Vec<f64>]| -> Vec<Vec<f64>> {
            dl.iter()
                .enumerate()
                .map(|(j, pv)| {
                    (0..fr1.k)
                        .map(|i| {
                            2.0 * sgn
                                * (pv[i] + dnh[j * fr1.k + i] + vfh[j * fr1.k + i] - ft[j][i])
                        })
                        .collect()
                })
                .collect()
        };
        let mu_vals = {
            let pred = assemble(&d_local(None)?);
            match params.scheme {
                MarchScheme::Euler => pred,
                MarchScheme::PredictorCorrector => {
                    let mu_pred = Density::from_node_values(fr1, &pred);
                    assemble(&d_local(Some(&mu_pred))?)
                }
            }
        };
        let mu_l2 = boundary_l2(fr1, &mu_vals);
        let ftilde_l2 = boundary_l2(fr1, &ft);
        densities.push(Density::from_node_values(fr1, &mu_vals));
        log.push(StepLog {
            t: t1,
            mu_l2,
            ftilde_l2,
            wall_history,
            wall_solve: clock.elapsed().as_secs_f64(),
        });
    }

    Ok(DirichletRun {
        frames,
        densities,
        state,
        uv,
        split: params.split.clone(),
        dt,
        eps,
        n_hist: params.n_hist,
        exterior: problem.exterior,
        log,
    })
}

/// Field of a completed march at the final time, at targets well separated
/// from the boundary (distance large against sqrt(eps_asym); the analytic
/// window is dropped as negligible there).
pub fn evaluate_solution(
    run: &DirichletRun,
    problem: &BvpProblem,
    targets: &[Point],
) -> Result<Vec<f64>> {
    let n = run.densities.len() - 1;
    let t = n as f64 * run.dt;
    let delta = run.split.delta;
    let stationary = run.frames.len() == 1;
    let mut out = vec![0.0; targets.len()];
    for (o, &x) in out.iter_mut().zip(targets.iter()) {
        if let Some(uv) = &run.uv {
            *o += uv.eval_clamped(x)?;
        }
        *o += run.state.v_fh.eval_clamped(x)?;
    }
    let frame_at = |tau: f64| -> Result<BoundaryFrame> {
        build_boundary(&problem.curves, problem.k, tau)
    };
    let mut add_slab = |off: &[f64], w: &[f64], dens: &Density| -> Result<()> {
        let built: Vec<BoundaryFrame>;
        let frefs: Vec<&BoundaryFrame> = if stationary {
            vec![&run.frames[0]; off.len()]
        } else {
            built = off.iter().map(|&e| frame_at(t - e)).collect::<Result<_>>()?;
            built.iter().collect()
        };
        let drefs: Vec<&Density> = vec![dens; off.len()];
        let vals =
            layer_local_quadrature(&frefs, &drefs, off, w, targets, run.eps, BoundaryKernel::Double)?;
        for (o, v) in out.iter_mut().zip(vals) {
            *o += v;
        }
        Ok(())
    };
    let (goff, gw) = run.split.graded_nodes(delta);
    add_slab(&goff, &gw, &run.densities[n - 1])?;
    if n >= 2 {
        let (hoff, hw) = log_slab_rule(2.0 * delta, delta, run.n_hist);
        add_slab(&hoff, &hw, &run.densities[n - 2])?;
    }
    Ok(out)
}
