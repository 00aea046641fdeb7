//! Level-restricted adaptive quadtrees over a square domain with
//! tensor-product Chebyshev leaf patches, plus refinement/coarsening
//! primitives and the interaction lists that drive the fast Gauss transform.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::cheb;
use crate::Point;

mod serial;
pub use serial::{deserialize_grid, serialize_grid};

/// Hard cap on refinement depth; exceeding it is a resolution failure.
pub const MAX_DEPTH: u32 = 30;

/// One box of the quadtree, addressed by integer coordinates at its level.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeBox {
    /// Refinement level; the root is level 0.
    pub level: u32,
    /// Integer x-coordinate in [0, 2^level).
    pub ix: u32,
    /// Integer y-coordinate in [0, 2^level).
    pub iy: u32,
    /// Parent box id (None for the root).
    pub parent: Option<u32>,
    /// Child ids in (qx + 2 qy) order, or None for a leaf.
    pub children: Option<[u32; 4]>,
    /// Leaves flagged empty carry no source data (free-space extension region).
    pub empty: bool,
}

impl TreeBox {
    /// Whether this box is a leaf.
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// A level-restricted quadtree over the square
/// [root_center - root_halfwidth, root_center + root_halfwidth]^2.
#[derive(Clone, Debug)]
pub struct QuadTree {
    /// Center of the root box.
    pub root_center: Point,
    /// Half the side length of the root box.
    pub root_halfwidth: f64,
    /// Chebyshev points per dimension on each leaf.
    pub k: usize,
    /// Flat box pool; id 0 is the root.
    pub boxes: Vec<TreeBox>,
    index: HashMap<(u32, u32, u32), u32>,
    nodes1d: Vec<f64>,
    fitmat: Vec<f64>,
}

impl QuadTree {
    /// Single-leaf tree over the given square.
    pub fn new(root_center: Point, root_halfwidth: f64, k: usize) -> Result<Self> {
        if !(4..=16).contains(&k) {
            return Err(Error::InvalidArgument(format!("leaf order k={k} outside 4..=16")));
        }
        if !(root_halfwidth > 0.0) {
            return Err(Error::InvalidArgument("root halfwidth must be positive".into()));
        }
        let root = TreeBox { level: 0, ix: 0, iy: 0, parent: None, children: None, empty: false };
        let mut index = HashMap::new();
        index.insert((0, 0, 0), 0);
        Ok(QuadTree {
            root_center,
            root_halfwidth,
            k,
            boxes: vec![root],
            index,
            nodes1d: cheb::nodes(k),
            fitmat: cheb::fit_matrix(k),
        })
    }

    /// Number of levels present (max level + 1).
    pub fn level_count(&self) -> u32 {
        self.boxes.iter().map(|b| b.level).max().unwrap_or(0) + 1
    }

    /// Center of box `id`.
    pub fn box_center(&self, id: u32) -> Point {
        let b = &self.boxes[id as usize];
        let side = 2.0 * self.root_halfwidth / (1u64 << b.level) as f64;
        [
            self.root_center[0] - self.root_halfwidth + (b.ix as f64 + 0.5) * side,
            self.root_center[1] - self.root_halfwidth + (b.iy as f64 + 0.5) * side,
        ]
    }

    /// Half the side length of box `id`.
    pub fn box_halfwidth(&self, id: u32) -> f64 {
        self.root_halfwidth / (1u64 << self.boxes[id as usize].level) as f64
    }

    /// Ids of all leaf boxes.
    pub fn leaves(&self) -> Vec<u32> {
        (0..self.boxes.len() as u32).filter(|&i| self.boxes[i as usize].is_leaf()).collect()
    }

    /// Ids of all boxes at the given level.
    pub fn boxes_at_level(&self, level: u32) -> Vec<u32> {
        (0..self.boxes.len() as u32).filter(|&i| self.boxes[i as usize].level == level).collect()
    }

    /// Id of the box at (level, ix, iy), if present.
    pub fn box_at(&self, level: u32, ix: u32, iy: u32) -> Option<u32> {
        self.index.get(&(level, ix, iy)).copied()
    }

    /// Deepest existing box whose area contains the cell (level, ix, iy).
    pub fn covering_box(&self, level: u32, ix: u32, iy: u32) -> Option<u32> {
        let (mut l, mut x, mut y) = (level, ix, iy);
        loop {
            if let Some(&id) = self.index.get(&(l, x, y)) {
                return Some(id);
            }
            if l == 0 {
                return None;
            }
            l -= 1;
            x >>= 1;
            y >>= 1;
        }
    }

    /// Subdivide a leaf in place, appending four children.
    pub fn subdivide(&mut self, id: u32) -> Result<[u32; 4]> {
        let b = self.boxes[id as usize].clone();
        if !b.is_leaf() {
            return Err(Error::InvalidArgument(format!("box {id} is not a leaf")));
        }
        if b.level >= MAX_DEPTH {
            let c = self.box_center(id);
            return Err(Error::ResolutionFailure { x: c[0], y: c[1], depth: b.level as usize });
        }
        let mut ids = [0u32; 4];
        for q in 0..4 {
            let (qx, qy) = ((q & 1) as u32, (q >> 1) as u32);
            let child = TreeBox {
                level: b.level + 1,
                ix: 2 * b.ix + qx,
                iy: 2 * b.iy + qy,
                parent: Some(id),
                children: None,
                empty: b.empty,
            };
            let cid = self.boxes.len() as u32;
            self.index.insert((child.level, child.ix, child.iy), cid);
            self.boxes.push(child);
            ids[q] = cid;
        }
        self.boxes[id as usize].children = Some(ids);
        Ok(ids)
    }

    /// Remove the four children of `parent_id`, making it a leaf again.
    ///
    /// All four children must be leaves. Box ids of other boxes are preserved
    /// (the freed slots are compacted away).
    pub fn undivide(&mut self, parent_id: u32) -> Result<()> {
        let children = self.boxes[parent_id as usize]
            .children
            .ok_or_else(|| Error::InvalidArgument(format!("box {parent_id} has no children")))?;
        for &c in &children {
            if !self.boxes[c as usize].is_leaf() {
                return Err(Error::InvalidArgument(format!("child {c} is not a leaf")));
            }
        }
        for &c in &children {
            let b = &self.boxes[c as usize];
            self.index.remove(&(b.level, b.ix, b.iy));
        }
        self.boxes[parent_id as usize].children = None;
        // Compact: rebuild the pool without the removed boxes, remapping ids.
        let removed: Vec<u32> = children.to_vec();
        let mut remap = vec![u32::MAX; self.boxes.len()];
        let mut new_boxes = Vec::with_capacity(self.boxes.len() - 4);
        for (old, b) in self.boxes.iter().enumerate() {
            if removed.contains(&(old as u32)) {
                continue;
            }
            remap[old] = new_boxes.len() as u32;
            new_boxes.push(b.clone());
        }
        for b in new_boxes.iter_mut() {
            b.parent = b.parent.map(|p| remap[p as usize]);
            b.children = b.children.map(|cs| cs.map(|c| remap[c as usize]));
        }
        self.boxes = new_boxes;
        self.index = self
            .boxes
            .iter()
            .enumerate()
            .map(|(i, b)| ((b.level, b.ix, b.iy), i as u32))
            .collect();
        Ok(())
    }

    /// The k*k Chebyshev nodes of a leaf, in (i1*k + i2) order where i1 indexes
    /// x and i2 indexes y, both ascending.
    pub fn leaf_nodes(&self, id: u32) -> Vec<Point> {
        let c = self.box_center(id);
        let h = self.box_halfwidth(id);
        let k = self.k;
        let mut out = Vec::with_capacity(k * k);
        for i1 in 0..k {
            for i2 in 0..k {
                out.push([c[0] + h * self.nodes1d[i1], c[1] + h * self.nodes1d[i2]]);
            }
        }
        out
    }

    /// Reference 1D Chebyshev nodes used by every leaf.
    pub fn nodes1d(&self) -> &[f64] {
        &self.nodes1d
    }

    /// Leaf containing the point (ties resolved toward larger coordinates).
    pub fn locate_leaf(&self, p: Point) -> Option<u32> {
        let lo = [
            self.root_center[0] - self.root_halfwidth,
            self.root_center[1] - self.root_halfwidth,
        ];
        let side = 2.0 * self.root_halfwidth;
        let fx = (p[0] - lo[0]) / side;
        let fy = (p[1] - lo[1]) / side;
        if !(-1e-12..=1.0 + 1e-12).contains(&fx) || !(-1e-12..=1.0 + 1e-12).contains(&fy) {
            return None;
        }
        let mut id = 0u32;
        loop {
            let b = &self.boxes[id as usize];
            match b.children {
                None => return Some(id),
                Some(cs) => {
                    let c = self.box_center(id);
                    let qx = usize::from(p[0] >= c[0]);
                    let qy = usize::from(p[1] >= c[1]);
                    id = cs[qx + 2 * qy];
                }
            }
        }
    }

    /// Whether the closed squares of two boxes share at least a point.
    pub fn boxes_touch(&self, a: u32, b: u32) -> bool {
        let (ba, bb) = (&self.boxes[a as usize], &self.boxes[b as usize]);
        cells_touch(
            ba.level, ba.ix, ba.iy, bb.level, bb.ix as i64, bb.iy as i64,
        )
    }

    /// True if every pair of touching leaves differs by at most one level.
    pub fn is_balanced(&self) -> bool {
        self.first_unbalanced(false).is_none()
    }

    /// Like [`is_balanced`](Self::is_balanced), but adjacency wraps around
    /// the domain, so leaves meeting across the periodic boundary also obey
    /// the level restriction.
    pub fn is_balanced_periodic(&self) -> bool {
        self.first_unbalanced(true).is_none()
    }

    /// Find a leaf whose neighborhood violates the level restriction.
    fn first_unbalanced(&self, wrap: bool) -> Option<u32> {
        for &id in &self.leaves() {
            let b = &self.boxes[id as usize];
            if b.level < 2 {
                continue;
            }
            // A violation exists iff some neighboring cell at level-1 is
            // covered only by a box at level <= level-2.
            let n = 1i64 << (b.level - 1);
            let (px, py) = ((b.ix >> 1) as i64, (b.iy >> 1) as i64);
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let (nx, ny) = (px + dx, py + dy);
                    if !wrap && (nx < 0 || ny < 0 || nx >= n || ny >= n) {
                        continue;
                    }
                    if !cells_touch(b.level, b.ix, b.iy, b.level - 1, nx, ny) {
                        continue;
                    }
                    let (wx, wy) = (nx.rem_euclid(n) as u32, ny.rem_euclid(n) as u32);
                    if let Some(c) = self.covering_box(b.level - 1, wx, wy) {
                        if self.boxes[c as usize].is_leaf()
                            && self.boxes[c as usize].level + 2 <= b.level
                        {
                            return Some(id);
                        }
                    }
                }
            }
        }
        None
    }

    /// Structural equality: same box pool in the same order.
    pub fn same_structure(&self, other: &QuadTree) -> bool {
        self.root_center == other.root_center
            && self.root_halfwidth == other.root_halfwidth
            && self.k == other.k
            && self.boxes == other.boxes
    }

    pub(crate) fn fit_matrix(&self) -> &[f64] {
        &self.fitmat
    }
}

/// Closed-square adjacency of the cells (l1, x1, y1) and (l2, x2, y2); the
/// second cell's coordinates may be shifted (periodic images use multiples of
/// 2^l2).
pub(crate) fn cells_touch(l1: u32, x1: u32, y1: u32, l2: u32, x2: i64, y2: i64) -> bool {
    // Compare in units of the finer level.
    let l = l1.max(l2);
    let (s1, s2) = ((l - l1) as i64, (l - l2) as i64);
    let a = [(x1 as i64) << s1, (y1 as i64) << s1];
    let a1 = [((x1 as i64) + 1) << s1, ((y1 as i64) + 1) << s1];
    let b = [x2 << s2, y2 << s2];
    let b1 = [(x2 + 1) << s2, (y2 + 1) << s2];
    a1[0] >= b[0] && b1[0] >= a[0] && a1[1] >= b[1] && b1[1] >= a[1]
}

/// Balance: refine until any two touching leaves differ by at most one level.
///
/// Queue-based: each pass subdivides every leaf that sits two or more levels
/// above a finer touching leaf, repeating until stable. Output leaves cover
/// the same area and none is coarser than its input counterpart.
pub fn balance(tree: &QuadTree) -> QuadTree {
    balance_impl(tree, false)
}

/// Balance with adjacency wrapped around the domain, for trees used with
/// periodic kernels: leaves meeting across the boundary also end up within
/// one level of each other.
pub fn balance_periodic(tree: &QuadTree) -> QuadTree {
    balance_impl(tree, true)
}

fn balance_impl(tree: &QuadTree, wrap: bool) -> QuadTree {
    let mut t = tree.clone();
    loop {
        let mut to_split: Vec<u32> = Vec::new();
        for &id in &t.leaves() {
            let b = &t.boxes[id as usize];
            if b.level < 2 {
                continue;
            }
            let n = 1i64 << (b.level - 1);
            let (px, py) = ((b.ix >> 1) as i64, (b.iy >> 1) as i64);
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let (nx, ny) = (px + dx, py + dy);
                    if !wrap && (nx < 0 || ny < 0 || nx >= n || ny >= n) {
                        continue;
                    }
                    if !cells_touch(b.level, b.ix, b.iy, b.level - 1, nx, ny) {
                        continue;
                    }
                    let (wx, wy) = (nx.rem_euclid(n) as u32, ny.rem_euclid(n) as u32);
                    if let Some(c) = t.covering_box(b.level - 1, wx, wy) {
                        let cb = &t.boxes[c as usize];
                        if cb.is_leaf() && cb.level + 2 <= b.level && !to_split.contains(&c) {
                            to_split.push(c);
                        }
                    }
                }
            }
        }
        if to_split.is_empty() {
            return t;
        }
        for id in to_split {
            t.subdivide(id).expect("balance splits leaves only");
        }
    }
}

// ---------------------------------------------------------------------------
// Chebyshev leaf patches and grid functions
// ---------------------------------------------------------------------------

/// Tensor-product Chebyshev coefficients on one leaf.
///
/// `coeffs[j1*k + j2]` multiplies T_{j1}(xi_1) T_{j2}(xi_2) in local
/// coordinates xi in [-1, 1]^2.
#[derive(Clone, Debug)]
pub struct ChebPatch {
    /// k*k coefficient block, row-major in (j1, j2).
    pub coeffs: Vec<f64>,
    /// Owning leaf id.
    pub box_id: u32,
}

/// Fit a patch from samples at the leaf's Chebyshev nodes (same ordering as
/// [`QuadTree::leaf_nodes`]).
pub fn cheb_fit(tree: &QuadTree, box_id: u32, samples: &[f64]) -> Result<ChebPatch> {
    let k = tree.k;
    if samples.len() != k * k {
        return Err(Error::InvalidArgument(format!(
            "expected {} samples, got {}",
            k * k,
            samples.len()
        )));
    }
    let m = tree.fit_matrix();
    // c = M S M^T, applied as two 1D transforms.
    let mut tmp = vec![0.0; k * k];
    for j1 in 0..k {
        for i2 in 0..k {
            let mut s = 0.0;
            for i1 in 0..k {
                s += m[j1 * k + i1] * samples[i1 * k + i2];
            }
            tmp[j1 * k + i2] = s;
        }
    }
    let mut coeffs = vec![0.0; k * k];
    for j1 in 0..k {
        for j2 in 0..k {
            let mut s = 0.0;
            for i2 in 0..k {
                s += m[j2 * k + i2] * tmp[j1 * k + i2];
            }
            coeffs[j1 * k + j2] = s;
        }
    }
    Ok(ChebPatch { coeffs, box_id })
}

/// Evaluate a patch at a point inside its leaf.
pub fn cheb_eval(tree: &QuadTree, patch: &ChebPatch, x: Point) -> Result<f64> {
    let c = tree.box_center(patch.box_id);
    let h = tree.box_halfwidth(patch.box_id);
    let xi = (x[0] - c[0]) / h;
    let eta = (x[1] - c[1]) / h;
    if xi.abs() > 1.0 + 1e-12 || eta.abs() > 1.0 + 1e-12 {
        return Err(Error::OutOfDomain(x[0], x[1]));
    }
    Ok(eval_local(&patch.coeffs, tree.k, xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0)))
}

/// Evaluate a k x k coefficient block at local coordinates.
pub(crate) fn eval_local(coeffs: &[f64], k: usize, xi: f64, eta: f64) -> f64 {
    // Contract the y-direction first, then Clenshaw in x.
    let t2 = cheb::t_values(k, eta);
    let mut cx = vec![0.0; k];
    for j1 in 0..k {
        let row = &coeffs[j1 * k..(j1 + 1) * k];
        cx[j1] = row.iter().zip(t2.iter()).map(|(c, t)| c * t).sum();
    }
    cheb::eval(&cx, xi)
}

/// A scalar field over a quadtree: one Chebyshev patch per non-empty leaf.
#[derive(Clone, Debug)]
pub struct GridFunction {
    /// The carrier tree.
    pub tree: Arc<QuadTree>,
    /// Patch per box id; None for internal boxes and empty leaves.
    pub patches: Vec<Option<ChebPatch>>,
}

impl GridFunction {
    /// Zero field: every non-empty leaf carries a zero patch.
    pub fn zeros(tree: Arc<QuadTree>) -> Self {
        let k2 = tree.k * tree.k;
        let patches = (0..tree.boxes.len() as u32)
            .map(|id| {
                let b = &tree.boxes[id as usize];
                (b.is_leaf() && !b.empty).then(|| ChebPatch { coeffs: vec![0.0; k2], box_id: id })
            })
            .collect();
        GridFunction { tree, patches }
    }

    /// Sample a function at every non-empty leaf's nodes and fit patches.
    pub fn from_fn(tree: Arc<QuadTree>, f: &dyn Fn(Point) -> f64) -> Self {
        let mut gf = GridFunction::zeros(tree.clone());
        for &id in &tree.leaves() {
            if tree.boxes[id as usize].empty {
                continue;
            }
            let samples: Vec<f64> = tree.leaf_nodes(id).iter().map(|&p| f(p)).collect();
            gf.patches[id as usize] = Some(cheb_fit(&tree, id, &samples).expect("sample count"));
        }
        gf
    }

    /// Values at the nodes of one leaf (zeros for empty leaves).
    pub fn leaf_values(&self, id: u32) -> Vec<f64> {
        let k = self.tree.k;
        match &self.patches[id as usize] {
            None => vec![0.0; k * k],
            Some(p) => {
                let n = self.tree.nodes1d();
                let mut out = Vec::with_capacity(k * k);
                for i1 in 0..k {
                    for i2 in 0..k {
                        out.push(eval_local(&p.coeffs, k, n[i1], n[i2]));
                    }
                }
                out
            }
        }
    }

    /// Point evaluation (zero on empty leaves).
    pub fn eval(&self, p: Point) -> Result<f64> {
        let id = self
            .locate(p)
            .ok_or(Error::OutOfDomain(p[0], p[1]))?;
        match &self.patches[id as usize] {
            None => Ok(0.0),
            Some(patch) => cheb_eval(&self.tree, patch, p),
        }
    }

    fn locate(&self, p: Point) -> Option<u32> {
        self.tree.locate_leaf(p)
    }

    /// self += a * other; trees must share structure.
    pub fn add_scaled(&mut self, other: &GridFunction, a: f64) -> Result<()> {
        if !self.tree.same_structure(&other.tree) {
            return Err(Error::InvalidArgument("tree mismatch in add_scaled".into()));
        }
        for (mine, theirs) in self.patches.iter_mut().zip(other.patches.iter()) {
            match (mine, theirs) {
                (Some(m), Some(t)) => {
                    for (cm, ct) in m.coeffs.iter_mut().zip(t.coeffs.iter()) {
                        *cm += a * ct;
                    }
                }
                (_, None) => {}
                (mine @ None, Some(t)) => {
                    let mut c = t.clone();
                    c.coeffs.iter_mut().for_each(|v| *v *= a);
                    *mine = Some(c);
                }
            }
        }
        Ok(())
    }

    /// Multiply the field by a scalar.
    pub fn scale(&mut self, a: f64) {
        for p in self.patches.iter_mut().flatten() {
            p.coeffs.iter_mut().for_each(|v| *v *= a);
        }
    }

    /// Max of |f| over all leaf nodes.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for &id in &self.tree.leaves() {
            for v in self.leaf_values(id) {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Area-weighted discrete L2 norm (Fejer-1 weights per leaf).
    pub fn norm_l2(&self) -> f64 {
        let k = self.tree.k;
        let w = cheb::fejer1_weights(k);
        let mut s = 0.0;
        for &id in &self.tree.leaves() {
            let h = self.tree.box_halfwidth(id);
            let vals = self.leaf_values(id);
            let mut leaf = 0.0;
            for i1 in 0..k {
                for i2 in 0..k {
                    let v = vals[i1 * k + i2];
                    leaf += w[i1] * w[i2] * v * v;
                }
            }
            s += leaf * h * h * 0.25 * 4.0; // (h/1)^2 Jacobian of [-1,1]^2 -> leaf
        }
        s.sqrt()
    }

    /// Integral of the field over the domain.
    pub fn integral(&self) -> f64 {
        let k = self.tree.k;
        // int_{-1}^{1} T_j = 0 (j odd), 2/(1-j^2) (j even).
        let tj: Vec<f64> = (0..k)
            .map(|j| if j % 2 == 1 { 0.0 } else { 2.0 / (1.0 - (j * j) as f64) })
            .collect();
        let mut s = 0.0;
        for &id in &self.tree.leaves() {
            if let Some(p) = &self.patches[id as usize] {
                let h = self.tree.box_halfwidth(id);
                let mut leaf = 0.0;
                for j1 in 0..k {
                    for j2 in 0..k {
                        leaf += p.coeffs[j1 * k + j2] * tj[j1] * tj[j2];
                    }
                }
                s += leaf * h * h;
            }
        }
        s
    }

    /// Integral of |f| (quadrature of the interpolant's absolute value).
    pub fn integral_abs(&self) -> f64 {
        let k = self.tree.k;
        let w = cheb::fejer1_weights(k);
        let mut s = 0.0;
        for &id in &self.tree.leaves() {
            let h = self.tree.box_halfwidth(id);
            let vals = self.leaf_values(id);
            let mut leaf = 0.0;
            for i1 in 0..k {
                for i2 in 0..k {
                    leaf += w[i1] * w[i2] * vals[i1 * k + i2].abs();
                }
            }
            s += leaf * h * h;
        }
        s
    }

    /// Resample onto a different tree by point evaluation of the interpolant.
    pub fn resample_to(&self, tree: Arc<QuadTree>) -> Result<GridFunction> {
        let mut gf = GridFunction::zeros(tree.clone());
        for &id in &tree.leaves() {
            if tree.boxes[id as usize].empty {
                continue;
            }
            let samples: Result<Vec<f64>> =
                tree.leaf_nodes(id).iter().map(|&p| self.eval_clamped(p)).collect();
            gf.patches[id as usize] = Some(cheb_fit(&tree, id, &samples?)?);
        }
        Ok(gf)
    }

    /// Evaluation that clamps points marginally outside the domain onto it
    /// (resampling across trees with differing extents).
    pub fn eval_clamped(&self, p: Point) -> Result<f64> {
        let hw = self.tree.root_halfwidth;
        let c = self.tree.root_center;
        let q = [
            p[0].clamp(c[0] - hw, c[0] + hw),
            p[1].clamp(c[1] - hw, c[1] + hw),
        ];
        if crate::dist2(p, q) > 1e-20 * hw * hw {
            // Outside the carrier domain entirely: treat as zero.
            return Ok(0.0);
        }
        self.eval(q)
    }
}

// ---------------------------------------------------------------------------
// Resolving-tree construction
// ---------------------------------------------------------------------------

/// Discrete L2 error of a leaf's interpolant on the 2k x 2k child grid
/// against direct evaluation of f.
pub fn e2_error(gf: &GridFunction, id: u32, f: &dyn Fn(Point) -> f64) -> f64 {
    let tree = &gf.tree;
    let k = tree.k;
    let c = tree.box_center(id);
    let h = tree.box_halfwidth(id);
    let patch = match &gf.patches[id as usize] {
        Some(p) => p,
        None => return 0.0,
    };
    let n = tree.nodes1d();
    let mut s = 0.0;
    for q in 0..4 {
        let (qx, qy) = ((q & 1) as f64, (q >> 1) as f64);
        let cc = [c[0] + h * (qx - 0.5), c[1] + h * (qy - 0.5)];
        for i1 in 0..k {
            for i2 in 0..k {
                let p = [cc[0] + 0.5 * h * n[i1], cc[1] + 0.5 * h * n[i2]];
                let xi = (p[0] - c[0]) / h;
                let eta = (p[1] - c[1]) / h;
                let d = eval_local(&patch.coeffs, k, xi, eta) - f(p);
                s += d * d;
            }
        }
    }
    (s / (4 * k * k) as f64).sqrt()
}

/// Build a balanced tree whose leaves resolve f to the E_2 <= eps_f test,
/// returning the tree and the sampled grid function.
pub fn build_resolving_tree(
    f: &dyn Fn(Point) -> f64,
    eps_f: f64,
    k: usize,
    root_center: Point,
    root_halfwidth: f64,
) -> Result<(Arc<QuadTree>, GridFunction)> {
    if !(eps_f > 0.0) {
        return Err(Error::InvalidArgument("eps_f must be positive".into()));
    }
    let mut tree = QuadTree::new(root_center, root_halfwidth, k)?;
    loop {
        let gf = GridFunction::from_fn(Arc::new(tree.clone()), f);
        let mut to_split = Vec::new();
        for &id in &gf.tree.leaves() {
            if e2_error(&gf, id, f) > eps_f {
                to_split.push(id);
            }
        }
        if to_split.is_empty() {
            break;
        }
        for id in to_split {
            tree.subdivide(id)?;
        }
    }
    let tree = Arc::new(balance(&tree));
    let gf = GridFunction::from_fn(tree.clone(), f);
    Ok((tree, gf))
}

// ---------------------------------------------------------------------------
// Refinement / coarsening primitives
// ---------------------------------------------------------------------------

/// How to regenerate patches after a topology change.
pub enum Resampler<'a> {
    /// Interpolate from the existing patch data.
    Interpolate,
    /// Evaluate a fresh function.
    Function(&'a dyn Fn(Point) -> f64),
}

/// Subdivide one leaf and regenerate the child patches. The caller must
/// re-establish balance before computing lists.
pub fn refine_leaf(gf: &GridFunction, leaf_id: u32, rs: &Resampler) -> Result<GridFunction> {
    let mut tree = (*gf.tree).clone();
    let children = tree.subdivide(leaf_id)?;
    let tree = Arc::new(tree);
    let mut out = GridFunction::zeros(tree.clone());
    for (id, p) in gf.patches.iter().enumerate() {
        if id != leaf_id as usize {
            out.patches[id] = p.clone();
        }
    }
    for &cid in &children {
        if tree.boxes[cid as usize].empty {
            continue;
        }
        let samples: Vec<f64> = match rs {
            Resampler::Function(f) => tree.leaf_nodes(cid).iter().map(|&p| f(p)).collect(),
            Resampler::Interpolate => {
                let parent = gf.patches[leaf_id as usize]
                    .as_ref()
                    .ok_or_else(|| Error::InvalidState("no parent patch to interpolate".into()))?;
                let c = tree.box_center(leaf_id);
                let h = tree.box_halfwidth(leaf_id);
                tree.leaf_nodes(cid)
                    .iter()
                    .map(|&p| {
                        eval_local(&parent.coeffs, tree.k, (p[0] - c[0]) / h, (p[1] - c[1]) / h)
                    })
                    .collect()
            }
        };
        out.patches[cid as usize] = Some(cheb_fit(&tree, cid, &samples)?);
    }
    Ok(out)
}

/// Merge four sibling leaves back into their parent, regenerating its patch.
pub fn coarsen_siblings(gf: &GridFunction, parent_id: u32, rs: &Resampler) -> Result<GridFunction> {
    let old_tree = &gf.tree;
    let children = old_tree.boxes[parent_id as usize]
        .children
        .ok_or_else(|| Error::InvalidArgument("parent has no children".into()))?;
    // Capture parent-node samples before the topology change.
    let samples: Vec<f64> = match rs {
        // Function resampling happens after the topology change below.
        Resampler::Function(_) => Vec::new(),
        Resampler::Interpolate => {
            let mut v = Vec::with_capacity(old_tree.k * old_tree.k);
            let c = old_tree.box_center(parent_id);
            let h = old_tree.box_halfwidth(parent_id);
            let n = old_tree.nodes1d();
            for i1 in 0..old_tree.k {
                for i2 in 0..old_tree.k {
                    let p = [c[0] + h * n[i1], c[1] + h * n[i2]];
                    let cid = children[usize::from(p[0] >= c[0]) + 2 * usize::from(p[1] >= c[1])];
                    let val = match &gf.patches[cid as usize] {
                        Some(patch) => cheb_eval(old_tree, patch, p)?,
                        None => 0.0,
                    };
                    v.push(val);
                }
            }
            v
        }
    };
    let mut tree = (**old_tree).clone();
    tree.undivide(parent_id)?;
    // Ids changed under compaction; rebuild a remap by coordinates.
    let tree = Arc::new(tree);
    let mut out = GridFunction::zeros(tree.clone());
    for (old_id, p) in gf.patches.iter().enumerate() {
        if let Some(p) = p {
            let ob = &old_tree.boxes[old_id];
            if children.contains(&(old_id as u32)) {
                continue;
            }
            if let Some(nid) = tree.box_at(ob.level, ob.ix, ob.iy) {
                let mut np = p.clone();
                np.box_id = nid;
                out.patches[nid as usize] = Some(np);
            }
        }
    }
    let pb = &old_tree.boxes[parent_id as usize];
    let new_parent = tree
        .box_at(pb.level, pb.ix, pb.iy)
        .ok_or_else(|| Error::InvalidState("parent lost in coarsening".into()))?;
    let samples = match rs {
        Resampler::Function(f) => tree.leaf_nodes(new_parent).iter().map(|&p| f(p)).collect(),
        Resampler::Interpolate => samples,
    };
    if !tree.boxes[new_parent as usize].empty {
        out.patches[new_parent as usize] = Some(cheb_fit(&tree, new_parent, &samples)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Interaction lists
// ---------------------------------------------------------------------------

/// Per-box neighbor categories of a balanced tree.
///
/// All lists are indexed by box id. `colleagues` includes the box itself.
#[derive(Clone, Debug, Default)]
pub struct ListSet {
    /// Same level, touching (including self).
    pub colleagues: Vec<Vec<u32>>,
    /// Leaves one level coarser, touching.
    pub coarse_neighbors: Vec<Vec<u32>>,
    /// Leaves one level finer, touching (populated for leaves).
    pub fine_neighbors: Vec<Vec<u32>>,
    /// Children of colleagues that do not touch the box.
    pub s_list: Vec<Vec<u32>>,
    /// Same level, parents touch, box pair does not touch.
    pub interaction_list: Vec<Vec<u32>>,
    /// Coarser leaves whose s-list contains this box.
    pub coarse_interaction_list: Vec<Vec<u32>>,
}

/// Compute the interaction lists of a balanced tree (free-space adjacency).
pub fn compute_lists(tree: &QuadTree) -> Result<ListSet> {
    if !tree.is_balanced() {
        return Err(Error::InvalidState("compute_lists requires a balanced tree".into()));
    }
    let n = tree.boxes.len();
    let mut ls = ListSet {
        colleagues: vec![Vec::new(); n],
        coarse_neighbors: vec![Vec::new(); n],
        fine_neighbors: vec![Vec::new(); n],
        s_list: vec![Vec::new(); n],
        interaction_list: vec![Vec::new(); n],
        coarse_interaction_list: vec![Vec::new(); n],
    };
    for id in 0..n as u32 {
        let b = tree.boxes[id as usize].clone();
        let side = 1i64 << b.level;
        // Colleagues: the 3x3 coordinate neighborhood present in the tree.
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                let (nx, ny) = (b.ix as i64 + dx, b.iy as i64 + dy);
                if nx < 0 || ny < 0 || nx >= side || ny >= side {
                    continue;
                }
                if let Some(c) = tree.box_at(b.level, nx as u32, ny as u32) {
                    ls.colleagues[id as usize].push(c);
                }
            }
        }
        ls.colleagues[id as usize].sort_unstable();
        // Coarse neighbors: leaves among parent's colleagues that touch b.
        if let Some(parent) = b.parent {
            let pb = &tree.boxes[parent as usize];
            let pside = 1i64 << pb.level;
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let (nx, ny) = (pb.ix as i64 + dx, pb.iy as i64 + dy);
                    if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= pside || ny >= pside {
                        continue;
                    }
                    if let Some(c) = tree.box_at(pb.level, nx as u32, ny as u32) {
                        if tree.boxes[c as usize].is_leaf() && tree.boxes_touch(id, c) {
                            ls.coarse_neighbors[id as usize].push(c);
                        }
                    }
                }
            }
            ls.coarse_neighbors[id as usize].sort_unstable();
            // Interaction list: same level, parents touch, boxes do not touch.
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let (nx, ny) = (pb.ix as i64 + dx, pb.iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= pside || ny >= pside {
                        continue;
                    }
                    if let Some(pc) = tree.box_at(pb.level, nx as u32, ny as u32) {
                        if let Some(cs) = tree.boxes[pc as usize].children {
                            for c in cs {
                                if !tree.boxes_touch(id, c) {
                                    ls.interaction_list[id as usize].push(c);
                                }
                            }
                        }
                    }
                }
            }
            ls.interaction_list[id as usize].sort_unstable();
        }
        // Fine neighbors and s-list: children of colleagues.
        for &c in &ls.colleagues[id as usize] {
            if c == id {
                continue;
            }
            if let Some(cs) = tree.boxes[c as usize].children {
                for ch in cs {
                    if tree.boxes_touch(id, ch) {
                        if tree.boxes[ch as usize].is_leaf() {
                            ls.fine_neighbors[id as usize].push(ch);
                        }
                    } else {
                        ls.s_list[id as usize].push(ch);
                    }
                }
            }
        }
        ls.fine_neighbors[id as usize].sort_unstable();
        ls.s_list[id as usize].sort_unstable();
    }
    // Coarse interaction lists by inversion of leaf s-lists.
    for id in 0..n as u32 {
        if !tree.boxes[id as usize].is_leaf() {
            continue;
        }
        for &c in &ls.s_list[id as usize] {
            ls.coarse_interaction_list[c as usize].push(id);
        }
    }
    for v in &mut ls.coarse_interaction_list {
        v.sort_unstable();
    }
    Ok(ls)
}

#[cfg(test)]
mod tests;
