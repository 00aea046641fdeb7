//! Direct near-field quadrature of Chebyshev patch sources.
//!
//! The Gaussian kernel factors per axis, so the contribution of a source
//! patch to a target value is TabX * C * TabY^T with 1D integral tables
//! Tab[i][j] = int exp(-(x_i - y)^2/delta) T_j((y - c)/h) dy. Tables between
//! leaf node grids depend only on the two levels and the integer offset of
//! the boxes, and are memoized per plan.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::numerics::{cheb, gauss};
use crate::treegrid::QuadTree;

/// Memoized 1D Gauss-times-Chebyshev integral tables.
pub(crate) struct NearTables {
    delta: f64,
    k: usize,
    gl: (Vec<f64>, Vec<f64>),
    memo: Mutex<HashMap<(u32, u32, i64), Arc<Vec<f64>>>>,
}

impl NearTables {
    pub fn new(delta: f64, k: usize) -> Self {
        NearTables {
            delta,
            k,
            gl: gauss::legendre_rule(20),
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// 1D integrals I[m][j] = int_{-hs}^{hs} e^{-(x_m - y)^2/delta} T_j(y/hs) dy
    /// for each target abscissa x_m (relative to the source box center).
    pub fn integrals(&self, hs: f64, xs: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; xs.len() * k];
        // Beyond this distance the kernel is below 4e-18 and the window is cut.
        let w = (40.0 * self.delta).sqrt();
        let panel_len = (2.0 * self.delta.sqrt()).min(2.0 * hs);
        let (gx, gw) = &self.gl;
        for (m, &x) in xs.iter().enumerate() {
            let lo = (x - w).max(-hs);
            let hi = (x + w).min(hs);
            if lo >= hi {
                continue;
            }
            let n_panels = ((hi - lo) / panel_len).ceil().max(1.0) as usize;
            let step = (hi - lo) / n_panels as f64;
            for pnl in 0..n_panels {
                let a = lo + pnl as f64 * step;
                let mid = a + 0.5 * step;
                let half = 0.5 * step;
                for (&u, &gwt) in gx.iter().zip(gw.iter()) {
                    let y = mid + half * u;
                    let d = x - y;
                    let g = gwt * half * (-d * d / self.delta).exp();
                    let t = cheb::t_values(k, y / hs);
                    for j in 0..k {
                        out[m * k + j] += g * t[j];
                    }
                }
            }
        }
        out
    }

    /// Table between a source box at `lvl_s` and the k leaf nodes of a target
    /// box at `lvl_t`, with center offset `off` along one axis (target center
    /// minus effective source center). The offset is an exact multiple of a
    /// quarter source width for tree boxes, which keys the memo.
    pub fn node_table(&self, tree: &QuadTree, lvl_s: u32, lvl_t: u32, off: f64) -> Arc<Vec<f64>> {
        let hs = tree.root_halfwidth / (1u64 << lvl_s) as f64;
        let ht = tree.root_halfwidth / (1u64 << lvl_t) as f64;
        let q = (off / hs * 4.0).round() as i64;
        debug_assert!((off / hs * 4.0 - q as f64).abs() < 1e-9);
        let key = (lvl_s, lvl_t, q);
        if let Some(t) = self.memo.lock().unwrap().get(&key) {
            return t.clone();
        }
        let xs: Vec<f64> = tree.nodes1d().iter().map(|&xi| off + ht * xi).collect();
        let table = Arc::new(self.integrals(hs, &xs));
        self.memo.lock().unwrap().insert(key, table.clone());
        table
    }
}

/// tabx * c * taby^T for k x k blocks: the target values on a node grid.
pub(crate) fn apply_tables(tabx: &[f64], c: &[f64], taby: &[f64], k: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let m = tabx[i * k + l];
            if m == 0.0 {
                continue;
            }
            for j in 0..k {
                tmp[i * k + j] += m * c[l * k + j];
            }
        }
    }
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut v = 0.0;
            for l in 0..k {
                v += tmp[i * k + l] * taby[j * k + l];
            }
            out[i * k + j] = v;
        }
    }
    out
}
