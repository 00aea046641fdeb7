//! Domain extension for free-space marching.
//!
//! Heat released from a source box of side rho spreads a distance of order
//! sqrt(T log(T/eps)) before falling below eps, so marching to time T on a
//! grid of side 2^m rho >= rho + 2 sqrt(T log(T/eps)) keeps the truncated
//! field below the tolerance. The extended tree keeps the original boxes in
//! place (the original level-1 cells reappear at level m+1) and surrounds
//! them with geometrically coarsening empty leaves.

use crate::error::Result;
use crate::treegrid::{balance, QuadTree};

/// Build the enlarged tree for marching to time `t_final` at accuracy `eps`.
pub fn extend_free_space_grid(tree: &QuadTree, t_final: f64, eps: f64) -> Result<QuadTree> {
    let side = 2.0 * tree.root_halfwidth;
    let spread = (t_final * (t_final / eps).ln().max(0.0)).sqrt();
    let required = side + 2.0 * spread;
    let mut m = 0u32;
    while side * ((1u64 << m) as f64) < required {
        m += 1;
    }
    if m == 0 {
        return Ok(tree.clone());
    }
    let mut out = QuadTree::new(
        tree.root_center,
        tree.root_halfwidth * (1u64 << m) as f64,
        tree.k,
    )?;
    // Subdivide the four cells around the center down to level m+1; the other
    // siblings created along the way stay as coarse exterior leaves.
    let mut central = vec![0u32];
    for level in 0..=m {
        let mut next = Vec::new();
        for id in central {
            let children = out.subdivide(id)?;
            if level == m {
                next.extend_from_slice(&children);
            } else {
                // Children adjacent to the root center, one per quadrant.
                let half = 1u32 << level; // cells per side at level+1 is 2*half
                for c in children {
                    let b = &out.boxes[c as usize];
                    if (b.ix == half - 1 || b.ix == half) && (b.iy == half - 1 || b.iy == half) {
                        next.push(c);
                    }
                }
            }
        }
        central = next;
    }
    // Replicate the original structure below its level-1 cells, which now sit
    // at level m+1 of the extended tree.
    if let Some(orig_children) = tree.boxes[0].children {
        for oc in orig_children {
            let ob = &tree.boxes[oc as usize];
            let nid = out
                .box_at(m + 1, ob.ix + (1u32 << m) - 1, ob.iy + (1u32 << m) - 1)
                .expect("central cells were just created");
            replicate(tree, oc, &mut out, nid)?;
        }
    }
    let mut out = balance(&out);
    // Leaves outside the original domain carry no data yet.
    let h = tree.root_halfwidth;
    for id in out.leaves() {
        let c = out.box_center(id);
        let inside = (c[0] - tree.root_center[0]).abs() < h && (c[1] - tree.root_center[1]).abs() < h;
        let empty = if inside {
            tree.locate_leaf(c)
                .map(|l| tree.boxes[l as usize].empty)
                .unwrap_or(true)
        } else {
            true
        };
        out.boxes[id as usize].empty = empty;
    }
    Ok(out)
}

fn replicate(src: &QuadTree, sid: u32, dst: &mut QuadTree, did: u32) -> Result<()> {
    if let Some(children) = src.boxes[sid as usize].children {
        let dch = dst.subdivide(did)?;
        for (sc, dc) in children.iter().zip(dch.iter()) {
            replicate(src, *sc, dst, *dc)?;
        }
    }
    Ok(())
}
