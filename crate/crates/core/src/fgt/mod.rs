//! Hierarchical fast Gauss transform on level-restricted quadtrees.
//!
//! Evaluates sums and integrals of exp(-|x - y|^2 / delta) against point
//! charges and Chebyshev patch sources, to a requested accuracy eps, in time
//! linear in the number of grid points. Heat-potential callers pass
//! delta = 4t and apply the 1/(4 pi t) prefactor themselves.
//!
//! Two regimes, selected by the plan:
//!
//! - When the root side is at most sqrt(2 delta), a single Hermite expansion
//!   about the root center is accurate everywhere and no tree traversal is
//!   needed (flat-kernel limit).
//! - Otherwise the standard two-pass scheme runs: Hermite expansions are
//!   formed at source leaves and merged upward; local expansions accumulate
//!   interaction-list and cross-level contributions downward; leaves add the
//!   near field by direct patch quadrature. Interactions between boxes at
//!   levels where the side is at least r_c sqrt(delta) (r_c^2 = log(1/eps))
//!   are dropped: such boxes only interact through the near field because the
//!   kernel decays below eps across one box side.
//!
//! The periodic variant wraps the interaction lists around the unit cell and
//! adds distant lattice images through a root-level local correction.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::cheb;
use crate::treegrid::{cheb_fit, compute_lists, ChebPatch, GridFunction, ListSet, QuadTree};
use crate::{dist2, Point};

mod expansion;
mod extend;
mod near;
mod periodic;

pub use expansion::{
    eval_expansion, form_hermite, hermite_error_bound, to_planewave, translate, Expansion,
    ExpansionCoeffs, ExpansionKind, K_HERMITE, P_MAX,
};
pub use extend::extend_free_space_grid;

use expansion::{
    add_charge_moments, choose_order, fact, hermite_values, hh_matrix, hl_matrix, ll_matrix,
    patch_moments, sandwich, sandwich_rect,
};
use near::NearTables;
use periodic::WrappedLists;

/// Safety margin applied to eps when selecting expansion orders, absorbing
/// composed translation errors and dropped coarse-level interactions.
const EPS_MARGIN: f64 = 0.1;

/// Execution plan for a fast Gauss transform over one tree.
pub struct FgtPlan {
    /// Requested accuracy (relative to the total source mass).
    pub eps: f64,
    /// Gaussian variance parameter of the kernel exp(-|x-y|^2/delta).
    pub delta: f64,
    /// Representative expansion order (the largest order in use).
    pub p: usize,
    /// Cutoff radius multiplier, r_c = sqrt(log(1/eps)).
    pub r_c: f64,
    /// Finest level whose box side is >= r_c sqrt(delta); -1 if none.
    pub cutoff_level: i32,
    /// Free-space interaction lists of the tree.
    pub lists: ListSet,
    /// Whether the plan wraps around the unit cell.
    pub periodic: bool,
    /// Verify a few target values against brute-force summation after every
    /// apply (slow; intended for diagnostics).
    pub self_check: bool,
    tree: Arc<QuadTree>,
    wl: WrappedLists,
    p_level: Vec<usize>,
    start_level: u32,
    max_level: u32,
    single_root: bool,
    root_p: usize,
    image_p: usize,
    image_radius: i64,
    near: NearTables,
}

impl FgtPlan {
    /// Build a plan for the given tree, kernel width, and accuracy.
    pub fn new(tree: Arc<QuadTree>, delta: f64, eps: f64, periodic: bool) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument("fgt: delta must be positive".into()));
        }
        if !(eps > 0.0 && eps < 0.1) {
            return Err(Error::InvalidArgument("fgt: eps must lie in (0, 0.1)".into()));
        }
        if periodic && (tree.root_halfwidth - 0.5).abs() > 1e-12 {
            return Err(Error::InvalidArgument("periodic fgt requires the unit cell".into()));
        }
        if periodic && !tree.is_balanced_periodic() {
            return Err(Error::InvalidState(
                "periodic fgt requires a periodically balanced tree".into(),
            ));
        }
        let lists = compute_lists(&tree)?;
        let s = delta.sqrt();
        let side = 2.0 * tree.root_halfwidth;
        let r_c = (1.0 / eps).ln().sqrt();
        let max_level = tree.level_count() - 1;
        let eps_sel = eps * EPS_MARGIN;
        let mut cutoff_level = -1i32;
        for l in 0..=max_level {
            if side / (1u64 << l) as f64 >= r_c * s {
                cutoff_level = l as i32;
            }
        }
        let r_root = side / (2.0f64.sqrt() * s);
        let single_root = r_root <= 1.0;
        let root_p = choose_order(eps_sel, r_root, 1.0).unwrap_or(P_MAX);
        let start_level = ((cutoff_level + 1).max(1)) as u32;
        let mut p_level = vec![0usize; max_level as usize + 1];
        for l in start_level..=max_level {
            let side_l = side / (1u64 << l) as f64;
            let r_l = side_l / (2.0f64.sqrt() * s);
            let t_min = 1.5 * side_l / s;
            let slack = (-t_min * t_min / 2.0).exp();
            p_level[l as usize] = choose_order(eps_sel, r_l, slack).unwrap_or(P_MAX);
        }
        // Distant lattice images: separation is at least one cell, so the
        // correction is only needed once r_c sqrt(delta) reaches the cell.
        let image_radius = if periodic && (single_root || r_c * s >= 1.0) {
            (r_c * s).ceil() as i64 + 1
        } else {
            0
        };
        let image_p = if single_root {
            root_p
        } else {
            let slack = (-1.125 / delta).exp();
            choose_order(eps_sel, 0.5 * 2.0f64.sqrt() / s, slack).unwrap_or(P_MAX)
        };
        let p = if single_root {
            root_p
        } else {
            p_level[start_level as usize..]
                .iter()
                .copied()
                .max()
                .unwrap_or(1)
                .max(1)
        };
        let near = NearTables::new(delta, tree.k);
        let wl = if periodic {
            periodic::wrapped_lists(&tree)
        } else {
            periodic::from_free_space(&lists)
        };
        Ok(FgtPlan {
            eps,
            delta,
            p,
            r_c,
            cutoff_level,
            lists,
            periodic,
            self_check: false,
            tree,
            wl,
            p_level,
            start_level,
            max_level,
            single_root,
            root_p,
            image_p,
            image_radius,
            near,
        })
    }

    /// The tree this plan was built over.
    pub fn tree(&self) -> &Arc<QuadTree> {
        &self.tree
    }

    /// Per-level diagnostics (box counts and chosen orders) as CSV text.
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("level,boxes,side,order,bound\n");
        let side = 2.0 * self.tree.root_halfwidth;
        for l in 0..=self.max_level {
            let n = self.tree.boxes_at_level(l).len();
            let side_l = side / (1u64 << l) as f64;
            let p = if self.single_root {
                if l == 0 {
                    self.root_p
                } else {
                    0
                }
            } else {
                self.p_level[l as usize]
            };
            let bound = if p > 0 {
                hermite_error_bound(p, side_l / (2.0f64.sqrt() * self.delta.sqrt()), 1.0)
            } else {
                0.0
            };
            s.push_str(&format!("{l},{n},{side_l:.6e},{p},{bound:.3e}\n"));
        }
        s
    }
}

/// Result of an FGT application.
pub struct FgtOutput {
    /// Values fitted back onto the tree's leaf patches, when requested.
    pub grid: Option<GridFunction>,
    /// Values at the requested target points, in order.
    pub point_values: Vec<f64>,
}

/// Apply a free-space plan to a grid source plus optional point charges.
pub fn fgt_apply(
    plan: &FgtPlan,
    source: &GridFunction,
    charges: &[(Point, f64)],
    want_grid: bool,
    points: &[Point],
) -> Result<FgtOutput> {
    if plan.periodic {
        return Err(Error::InvalidArgument(
            "fgt_apply: plan is periodic; use periodic_fgt_apply".into(),
        ));
    }
    apply_inner(plan, source, charges, want_grid, points)
}

/// Apply a periodic plan: the output is the sum over all integer lattice
/// images of the free-space result.
pub fn periodic_fgt_apply(
    plan: &FgtPlan,
    source: &GridFunction,
    charges: &[(Point, f64)],
    want_grid: bool,
    points: &[Point],
) -> Result<FgtOutput> {
    if !plan.periodic {
        return Err(Error::InvalidArgument(
            "periodic_fgt_apply: plan was built without the periodic flag".into(),
        ));
    }
    apply_inner(plan, source, charges, want_grid, points)
}

struct Ctx<'a> {
    plan: &'a FgtPlan,
    source: &'a GridFunction,
    charges_by_leaf: HashMap<u32, Vec<(Point, f64)>>,
    herm: Vec<Option<Vec<f64>>>,
    local: Vec<Option<Vec<f64>>>,
    root_herm: Option<Vec<f64>>,
    img_local: Option<Vec<f64>>,
}

fn patch_of<'a>(source: &'a GridFunction, id: u32) -> Option<&'a ChebPatch> {
    source.patches[id as usize]
        .as_ref()
        .filter(|p| p.coeffs.iter().any(|&c| c != 0.0))
}

fn apply_inner(
    plan: &FgtPlan,
    source: &GridFunction,
    charges: &[(Point, f64)],
    want_grid: bool,
    points: &[Point],
) -> Result<FgtOutput> {
    let tree = &plan.tree;
    if !source.tree.same_structure(tree) {
        return Err(Error::InvalidArgument("fgt: source grid is on a different tree".into()));
    }
    let mut charges_by_leaf: HashMap<u32, Vec<(Point, f64)>> = HashMap::new();
    for &(y, q) in charges {
        let leaf = tree
            .locate_leaf(y)
            .ok_or(Error::OutOfDomain(y[0], y[1]))?;
        charges_by_leaf.entry(leaf).or_default().push((y, q));
    }
    // Which subtrees carry sources at all.
    let mut has_source = vec![false; tree.boxes.len()];
    for l in (0..=plan.max_level).rev() {
        for id in tree.boxes_at_level(l) {
            let b = &tree.boxes[id as usize];
            has_source[id as usize] = match b.children {
                Some(cs) => cs.iter().any(|&c| has_source[c as usize]),
                None => patch_of(source, id).is_some() || charges_by_leaf.contains_key(&id),
            };
        }
    }

    let mut ctx = Ctx {
        plan,
        source,
        charges_by_leaf,
        herm: vec![None; tree.boxes.len()],
        local: vec![None; tree.boxes.len()],
        root_herm: None,
        img_local: None,
    };

    if plan.single_root {
        let mom = root_moments(&ctx, plan.root_p);
        if plan.periodic {
            // All images, the principal cell included, merge into one local
            // expansion about the root center.
            let p = plan.root_p;
            let s = plan.delta.sqrt();
            let mut loc = vec![0.0; p * p];
            let j = plan.image_radius;
            for jx in -j..=j {
                for jy in -j..=j {
                    let m1 = hl_matrix(-jx as f64 / s, p, p);
                    let m2 = hl_matrix(-jy as f64 / s, p, p);
                    add_into(&mut loc, &sandwich(&m1, &mom, &m2, p, p));
                }
            }
            ctx.img_local = Some(loc);
        } else {
            ctx.root_herm = Some(mom);
        }
    } else {
        upward_pass(&mut ctx, &has_source);
        downward_pass(&mut ctx, &has_source);
        if plan.periodic && plan.image_radius >= 2 {
            let p = plan.image_p;
            let s = plan.delta.sqrt();
            let mom = root_moments(&ctx, p);
            let mut loc = vec![0.0; p * p];
            let j = plan.image_radius;
            for jx in -j..=j {
                for jy in -j..=j {
                    if jx.abs().max(jy.abs()) < 2 {
                        continue;
                    }
                    let m1 = hl_matrix(-jx as f64 / s, p, p);
                    let m2 = hl_matrix(-jy as f64 / s, p, p);
                    add_into(&mut loc, &sandwich(&m1, &mom, &m2, p, p));
                }
            }
            ctx.img_local = Some(loc);
        }
    }

    let grid = if want_grid {
        let leaves = tree.leaves();
        let vals: Vec<(u32, Vec<f64>)> = leaves
            .par_iter()
            .map(|&leaf| (leaf, eval_leaf_nodes(&ctx, leaf)))
            .collect();
        let mut gf = GridFunction::zeros(tree.clone());
        for (leaf, v) in vals {
            gf.patches[leaf as usize] = Some(cheb_fit(tree, leaf, &v)?);
        }
        Some(gf)
    } else {
        None
    };
    let point_values: Vec<f64> = points
        .par_iter()
        .map(|&x| eval_at_point(&ctx, x))
        .collect::<Result<Vec<f64>>>()?;

    if plan.self_check {
        self_check(plan, source, charges, &grid, points, &point_values)?;
    }
    Ok(FgtOutput { grid, point_values })
}

/// Hermite moments of the entire source about the root center.
fn root_moments(ctx: &Ctx, p: usize) -> Vec<f64> {
    let tree = &ctx.plan.tree;
    let center = tree.root_center;
    let delta = ctx.plan.delta;
    let mut mom = vec![0.0; p * p];
    for &leaf in &tree.leaves() {
        if let Some(patch) = patch_of(ctx.source, leaf) {
            add_into(&mut mom, &patch_moments(tree, patch, center, delta, p));
        }
        if let Some(ch) = ctx.charges_by_leaf.get(&leaf) {
            add_charge_moments(&mut mom, ch, center, delta, p);
        }
    }
    mom
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

fn upward_pass(ctx: &mut Ctx, has_source: &[bool]) {
    let plan = ctx.plan;
    let tree = &plan.tree;
    let s = plan.delta.sqrt();
    for l in (plan.start_level..=plan.max_level).rev() {
        let p = plan.p_level[l as usize];
        let ids = tree.boxes_at_level(l);
        let results: Vec<(u32, Option<Vec<f64>>)> = ids
            .par_iter()
            .map(|&id| {
                if !has_source[id as usize] {
                    return (id, None);
                }
                let b = &tree.boxes[id as usize];
                let center = tree.box_center(id);
                let mut mom = vec![0.0; p * p];
                match b.children {
                    None => {
                        if let Some(patch) = patch_of(ctx.source, id) {
                            add_into(&mut mom, &patch_moments(tree, patch, center, plan.delta, p));
                        }
                        if let Some(ch) = ctx.charges_by_leaf.get(&id) {
                            add_charge_moments(&mut mom, ch, center, plan.delta, p);
                        }
                    }
                    Some(cs) => {
                        let pc = plan.p_level[l as usize + 1];
                        for c in cs {
                            if let Some(child) = ctx.herm[c as usize].as_ref() {
                                let cc = tree.box_center(c);
                                let m1 = hh_matrix((cc[0] - center[0]) / s, p, pc);
                                let m2 = hh_matrix((cc[1] - center[1]) / s, p, pc);
                                add_into(&mut mom, &sandwich(&m1, child, &m2, p, pc));
                            }
                        }
                    }
                }
                (id, Some(mom))
            })
            .collect();
        for (id, mom) in results {
            ctx.herm[id as usize] = mom;
        }
    }
}

fn downward_pass(ctx: &mut Ctx, has_source: &[bool]) {
    let plan = ctx.plan;
    let tree = &plan.tree;
    let s = plan.delta.sqrt();
    for l in plan.start_level..=plan.max_level {
        let p = plan.p_level[l as usize];
        let ids = tree.boxes_at_level(l);
        let results: Vec<(u32, Option<Vec<f64>>)> = ids
            .par_iter()
            .map(|&id| {
                let center = tree.box_center(id);
                let mut acc: Option<Vec<f64>> = None;
                // Parent local, recentred.
                if l > plan.start_level {
                    let parent = tree.boxes[id as usize].parent.expect("non-root box");
                    if let Some(pl) = ctx.local[parent as usize].as_ref() {
                        let pp = plan.p_level[l as usize - 1];
                        let pc = tree.box_center(parent);
                        let m1 = ll_matrix((center[0] - pc[0]) / s, p, pp);
                        let m2 = ll_matrix((center[1] - pc[1]) / s, p, pp);
                        add_into(
                            acc.get_or_insert_with(|| vec![0.0; p * p]),
                            &sandwich(&m1, pl, &m2, p, pp),
                        );
                    }
                }
                // Same-level well-separated boxes: Hermite to local.
                for &(src, sh) in &plan.wl.interaction_list[id as usize] {
                    if let Some(a) = ctx.herm[src as usize].as_ref() {
                        let sc = tree.box_center(src);
                        let m1 = hl_matrix((center[0] - sc[0] - sh[0]) / s, p, p);
                        let m2 = hl_matrix((center[1] - sc[1] - sh[1]) / s, p, p);
                        add_into(
                            acc.get_or_insert_with(|| vec![0.0; p * p]),
                            &sandwich(&m1, a, &m2, p, p),
                        );
                    }
                }
                // Coarse leaves whose s-list contains this box: their sources
                // enter this local expansion directly.
                for &(leaf, sh) in &plan.wl.coarse_interaction_list[id as usize] {
                    if !has_source[leaf as usize] {
                        continue;
                    }
                    let dst = acc.get_or_insert_with(|| vec![0.0; p * p]);
                    if let Some(patch) = patch_of(ctx.source, leaf) {
                        add_into(dst, &local_from_patch(tree, patch, sh, center, plan.delta, p));
                    }
                    if let Some(ch) = ctx.charges_by_leaf.get(&leaf) {
                        local_from_charges(dst, ch, sh, center, plan.delta, p);
                    }
                }
                (id, acc)
            })
            .collect();
        for (id, acc) in results {
            ctx.local[id as usize] = acc;
        }
    }
}

/// Local coefficients of a patch source: B_b = ((-1)^b / b!) int f(y)
/// h_b((center - y - shift)/s) dy, separated per axis.
fn local_from_patch(
    tree: &QuadTree,
    patch: &ChebPatch,
    shift: Point,
    center: Point,
    delta: f64,
    p: usize,
) -> Vec<f64> {
    let k = tree.k;
    let s = delta.sqrt();
    let cs = tree.box_center(patch.box_id);
    let hs = tree.box_halfwidth(patch.box_id);
    let axis = |c_ax: f64, cs_ax: f64| -> Vec<f64> {
        hermite_cheb_integrals(s, hs, cs_ax, c_ax, k, p)
    };
    let l1 = axis(center[0] - shift[0], cs[0]);
    let l2 = axis(center[1] - shift[1], cs[1]);
    let mut b = sandwich_rect(&l1, &patch.coeffs, &l2, p, k);
    for b1 in 0..p {
        for b2 in 0..p {
            let sign = if (b1 + b2) % 2 == 0 { 1.0 } else { -1.0 };
            b[b1 * p + b2] *= sign / (fact(b1) * fact(b2));
        }
    }
    b
}

/// 1D integrals L[b][j] = int_{cs-hs}^{cs+hs} h_b((c - y)/s) T_j((y-cs)/hs) dy.
fn hermite_cheb_integrals(s: f64, hs: f64, cs: f64, c: f64, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * k];
    let zmax = 9.3 + (2.0 * p as f64 + 1.0).sqrt();
    let lo = (c - s * zmax).max(cs - hs);
    let hi = (c + s * zmax).min(cs + hs);
    if lo >= hi {
        return out;
    }
    let panel_len = (1.5 * s / (p as f64).sqrt().max(1.0)).min(hi - lo);
    let n_panels = ((hi - lo) / panel_len).ceil().max(1.0) as usize;
    let step = (hi - lo) / n_panels as f64;
    let (gx, gw) = crate::numerics::gauss::legendre_rule(20);
    for pnl in 0..n_panels {
        let a = lo + pnl as f64 * step;
        let mid = a + 0.5 * step;
        let half = 0.5 * step;
        for (&u, &w) in gx.iter().zip(gw.iter()) {
            let y = mid + half * u;
            let hv = hermite_values(p - 1, (c - y) / s);
            let tv = cheb::t_values(k, (y - cs) / hs);
            let wt = w * half;
            for b in 0..p {
                for j in 0..k {
                    out[b * k + j] += wt * hv[b] * tv[j];
                }
            }
        }
    }
    out
}

fn local_from_charges(
    dst: &mut [f64],
    charges: &[(Point, f64)],
    shift: Point,
    center: Point,
    delta: f64,
    p: usize,
) {
    let s = delta.sqrt();
    for &(y, q) in charges {
        let h1 = hermite_values(p - 1, (center[0] - y[0] - shift[0]) / s);
        let h2 = hermite_values(p - 1, (center[1] - y[1] - shift[1]) / s);
        for b1 in 0..p {
            let s1 = if b1 % 2 == 0 { 1.0 } else { -1.0 };
            for b2 in 0..p {
                let s2 = if b2 % 2 == 0 { 1.0 } else { -1.0 };
                dst[b1 * p + b2] += q * s1 * s2 * h1[b1] * h2[b2] / (fact(b1) * fact(b2));
            }
        }
    }
}

/// vals[i1*k+i2] += sum_{a1,a2} e1[i1*p+a1] a[a1*p+a2] e2[i2*p+a2].
fn block_eval(vals: &mut [f64], e1: &[f64], a: &[f64], e2: &[f64], k: usize, p: usize) {
    let mut tmp = vec![0.0; p * k];
    for a1 in 0..p {
        for i2 in 0..k {
            let mut v = 0.0;
            for a2 in 0..p {
                v += a[a1 * p + a2] * e2[i2 * p + a2];
            }
            tmp[a1 * k + i2] = v;
        }
    }
    for i1 in 0..k {
        for i2 in 0..k {
            let mut v = 0.0;
            for a1 in 0..p {
                v += e1[i1 * p + a1] * tmp[a1 * k + i2];
            }
            vals[i1 * k + i2] += v;
        }
    }
}

fn herm_axis_matrix(xs: &[f64], center: f64, s: f64, p: usize) -> Vec<f64> {
    let mut m = vec![0.0; xs.len() * p];
    for (i, &x) in xs.iter().enumerate() {
        let hv = hermite_values(p - 1, (x - center) / s);
        m[i * p..(i + 1) * p].copy_from_slice(&hv);
    }
    m
}

fn power_axis_matrix(xs: &[f64], center: f64, s: f64, p: usize) -> Vec<f64> {
    let mut m = vec![0.0; xs.len() * p];
    for (i, &x) in xs.iter().enumerate() {
        let t = (x - center) / s;
        let mut acc = 1.0;
        for a in 0..p {
            m[i * p + a] = acc;
            acc *= t;
        }
    }
    m
}

/// Near-field source categories of a leaf: itself plus touching leaves at the
/// same, coarser, and finer levels.
fn near_sources(plan: &FgtPlan, leaf: u32) -> Vec<(u32, Point)> {
    let tree = &plan.tree;
    let mut v: Vec<(u32, Point)> = Vec::new();
    for &(c, sh) in &plan.wl.colleagues[leaf as usize] {
        if tree.boxes[c as usize].is_leaf() {
            v.push((c, sh));
        }
    }
    v.extend(plan.wl.coarse_neighbors[leaf as usize].iter().copied());
    v.extend(plan.wl.fine_neighbors[leaf as usize].iter().copied());
    v
}

fn eval_leaf_nodes(ctx: &Ctx, leaf: u32) -> Vec<f64> {
    let plan = ctx.plan;
    let tree = &plan.tree;
    let k = tree.k;
    let s = plan.delta.sqrt();
    let center = tree.box_center(leaf);
    let h = tree.box_halfwidth(leaf);
    let lvl = tree.boxes[leaf as usize].level;
    let xs: Vec<f64> = tree.nodes1d().iter().map(|&xi| center[0] + h * xi).collect();
    let ys: Vec<f64> = tree.nodes1d().iter().map(|&xi| center[1] + h * xi).collect();
    let mut vals = vec![0.0; k * k];

    if let Some(a) = ctx.root_herm.as_ref() {
        let p = plan.root_p;
        let e1 = herm_axis_matrix(&xs, tree.root_center[0], s, p);
        let e2 = herm_axis_matrix(&ys, tree.root_center[1], s, p);
        block_eval(&mut vals, &e1, a, &e2, k, p);
    }
    if let Some(b) = ctx.img_local.as_ref() {
        let p = if plan.single_root { plan.root_p } else { plan.image_p };
        let e1 = power_axis_matrix(&xs, tree.root_center[0], s, p);
        let e2 = power_axis_matrix(&ys, tree.root_center[1], s, p);
        block_eval(&mut vals, &e1, b, &e2, k, p);
    }
    if plan.single_root {
        // Near field and lists are folded into the root expansion.
        return vals;
    }
    if let Some(b) = ctx.local[leaf as usize].as_ref() {
        let p = plan.p_level[lvl as usize];
        let e1 = power_axis_matrix(&xs, center[0], s, p);
        let e2 = power_axis_matrix(&ys, center[1], s, p);
        block_eval(&mut vals, &e1, b, &e2, k, p);
    }
    // Finer well-separated boxes: evaluate their Hermite expansions here.
    for &(src, sh) in &plan.wl.s_list[leaf as usize] {
        if let Some(a) = ctx.herm[src as usize].as_ref() {
            let p = plan.p_level[tree.boxes[src as usize].level as usize];
            let sc = tree.box_center(src);
            let e1 = herm_axis_matrix(&xs, sc[0] + sh[0], s, p);
            let e2 = herm_axis_matrix(&ys, sc[1] + sh[1], s, p);
            block_eval(&mut vals, &e1, a, &e2, k, p);
        }
    }
    // Near field: direct quadrature of touching patches, direct kernel sums
    // over nearby charges.
    for (src, sh) in near_sources(plan, leaf) {
        let sc = tree.box_center(src);
        let sl = tree.boxes[src as usize].level;
        if let Some(patch) = patch_of(ctx.source, src) {
            let tabx = plan.near.node_table(tree, sl, lvl, center[0] - sc[0] - sh[0]);
            let taby = plan.near.node_table(tree, sl, lvl, center[1] - sc[1] - sh[1]);
            let add = near::apply_tables(&tabx, &patch.coeffs, &taby, k);
            add_into(&mut vals, &add);
        }
        if let Some(ch) = ctx.charges_by_leaf.get(&src) {
            for &(y, q) in ch {
                let yy = [y[0] + sh[0], y[1] + sh[1]];
                for (i1, &x1) in xs.iter().enumerate() {
                    for (i2, &x2) in ys.iter().enumerate() {
                        vals[i1 * k + i2] += q * (-dist2([x1, x2], yy) / plan.delta).exp();
                    }
                }
            }
        }
    }
    vals
}

fn eval_at_point(ctx: &Ctx, x: Point) -> Result<f64> {
    let plan = ctx.plan;
    let tree = &plan.tree;
    let k = tree.k;
    let s = plan.delta.sqrt();
    let leaf = tree.locate_leaf(x).ok_or(Error::OutOfDomain(x[0], x[1]))?;
    let lvl = tree.boxes[leaf as usize].level;
    let mut val = 0.0;

    let eval_block = |a: &[f64], p: usize, c: Point| -> f64 {
        let h1 = hermite_values(p - 1, (x[0] - c[0]) / s);
        let h2 = hermite_values(p - 1, (x[1] - c[1]) / s);
        let mut total = 0.0;
        for a1 in 0..p {
            let mut row = 0.0;
            for a2 in 0..p {
                row += a[a1 * p + a2] * h2[a2];
            }
            total += h1[a1] * row;
        }
        total
    };
    let eval_local_block = |b: &[f64], p: usize, c: Point| -> f64 {
        let pw = |t: f64| {
            let mut v = Vec::with_capacity(p);
            let mut acc = 1.0;
            for _ in 0..p {
                v.push(acc);
                acc *= t;
            }
            v
        };
        let v1 = pw((x[0] - c[0]) / s);
        let v2 = pw((x[1] - c[1]) / s);
        let mut total = 0.0;
        for b1 in 0..p {
            let mut row = 0.0;
            for b2 in 0..p {
                row += b[b1 * p + b2] * v2[b2];
            }
            total += v1[b1] * row;
        }
        total
    };

    if let Some(a) = ctx.root_herm.as_ref() {
        val += eval_block(a, plan.root_p, tree.root_center);
    }
    if let Some(b) = ctx.img_local.as_ref() {
        let p = if plan.single_root { plan.root_p } else { plan.image_p };
        val += eval_local_block(b, p, tree.root_center);
    }
    if plan.single_root {
        return Ok(val);
    }
    if let Some(b) = ctx.local[leaf as usize].as_ref() {
        val += eval_local_block(b, plan.p_level[lvl as usize], tree.box_center(leaf));
    }
    for &(src, sh) in &plan.wl.s_list[leaf as usize] {
        if let Some(a) = ctx.herm[src as usize].as_ref() {
            let p = plan.p_level[tree.boxes[src as usize].level as usize];
            let sc = tree.box_center(src);
            val += eval_block(a, p, [sc[0] + sh[0], sc[1] + sh[1]]);
        }
    }
    for (src, sh) in near_sources(plan, leaf) {
        let sc = tree.box_center(src);
        let hs = tree.box_halfwidth(src);
        if let Some(patch) = patch_of(ctx.source, src) {
            let ix = plan.near.integrals(hs, &[x[0] - sc[0] - sh[0]]);
            let iy = plan.near.integrals(hs, &[x[1] - sc[1] - sh[1]]);
            for j1 in 0..k {
                for j2 in 0..k {
                    val += patch.coeffs[j1 * k + j2] * ix[j1] * iy[j2];
                }
            }
        }
        if let Some(ch) = ctx.charges_by_leaf.get(&src) {
            for &(y, q) in ch {
                let yy = [y[0] + sh[0], y[1] + sh[1]];
                val += q * (-dist2(x, yy) / plan.delta).exp();
            }
        }
    }
    Ok(val)
}

fn self_check(
    plan: &FgtPlan,
    source: &GridFunction,
    charges: &[(Point, f64)],
    grid: &Option<GridFunction>,
    points: &[Point],
    point_values: &[f64],
) -> Result<()> {
    let q_total: f64 =
        source.integral_abs() + charges.iter().map(|&(_, q)| q.abs()).sum::<f64>();
    let tol = plan.eps * q_total.max(1e-300);
    let reference = |x: Point| -> f64 {
        if plan.periodic {
            let images = plan.image_radius.max(5);
            crate::oracle::gauss_integral_periodic(source, plan.delta, x, images)
                + crate::oracle::gauss_sum_periodic(charges, plan.delta, x, images)
        } else {
            crate::oracle::gauss_integral(source, plan.delta, x)
                + crate::oracle::gauss_sum(charges, plan.delta, x)
        }
    };
    let mut samples: Vec<(Point, f64)> = Vec::new();
    if let Some(g) = grid {
        for &leaf in plan.tree.leaves().iter().take(3) {
            let nodes = plan.tree.leaf_nodes(leaf);
            let vals = g.leaf_values(leaf);
            samples.push((nodes[0], vals[0]));
        }
    }
    for (x, v) in points.iter().zip(point_values.iter()).take(3) {
        samples.push((*x, *v));
    }
    for (x, v) in samples {
        let want = reference(x);
        if (v - want).abs() > tol {
            return Err(Error::AccuracyFailure(format!(
                "fgt self-check: value {v:.6e} vs reference {want:.6e} at ({}, {}) exceeds {tol:.3e}",
                x[0], x[1]
            )));
        }
    }
    Ok(())
}
