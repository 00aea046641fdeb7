//! Interaction lists with periodic wrap-around on the unit cell.
//!
//! Same categories as the free-space lists, but every entry carries the
//! lattice shift to apply to the source box position. A box near the domain
//! edge sees wrapped images of boxes at the far side; at the root the box is
//! its own colleague under all nine shifts. These lists account for image
//! cells |j|_inf <= 1; farther images enter through the root-level lattice
//! correction.

use crate::treegrid::{cells_touch, QuadTree};
use crate::Point;

/// Per-box lists of (source box, lattice shift added to the source position).
#[derive(Clone, Debug, Default)]
pub(crate) struct WrappedLists {
    pub colleagues: Vec<Vec<(u32, Point)>>,
    pub coarse_neighbors: Vec<Vec<(u32, Point)>>,
    pub fine_neighbors: Vec<Vec<(u32, Point)>>,
    pub s_list: Vec<Vec<(u32, Point)>>,
    pub interaction_list: Vec<Vec<(u32, Point)>>,
    pub coarse_interaction_list: Vec<Vec<(u32, Point)>>,
}

/// Convert free-space lists to the wrapped representation with zero shifts.
pub(crate) fn from_free_space(ls: &crate::treegrid::ListSet) -> WrappedLists {
    let wrap = |v: &Vec<Vec<u32>>| -> Vec<Vec<(u32, Point)>> {
        v.iter()
            .map(|l| l.iter().map(|&id| (id, [0.0, 0.0])).collect())
            .collect()
    };
    WrappedLists {
        colleagues: wrap(&ls.colleagues),
        coarse_neighbors: wrap(&ls.coarse_neighbors),
        fine_neighbors: wrap(&ls.fine_neighbors),
        s_list: wrap(&ls.s_list),
        interaction_list: wrap(&ls.interaction_list),
        coarse_interaction_list: wrap(&ls.coarse_interaction_list),
    }
}

/// Wrapped coordinate lookup: the box covering cell (x, y) at `level` where
/// the coordinates may run past the domain, plus the shift in cells of that
/// level needed to place its image there.
fn wrapped_box(tree: &QuadTree, level: u32, x: i64, y: i64) -> Option<(u32, i64, i64)> {
    let n = 1i64 << level;
    let (wx, wy) = (x.rem_euclid(n), y.rem_euclid(n));
    let id = tree.box_at(level, wx as u32, wy as u32)?;
    Some((id, x - wx, y - wy))
}

fn shift_point(tree: &QuadTree, level: u32, sx: i64, sy: i64) -> Point {
    let cell = 2.0 * tree.root_halfwidth / (1u64 << level) as f64;
    [sx as f64 * cell, sy as f64 * cell]
}

/// Periodic analogue of the free-space list computation.
pub(crate) fn wrapped_lists(tree: &QuadTree) -> WrappedLists {
    let n = tree.boxes.len();
    let mut ls = WrappedLists {
        colleagues: vec![Vec::new(); n],
        coarse_neighbors: vec![Vec::new(); n],
        fine_neighbors: vec![Vec::new(); n],
        s_list: vec![Vec::new(); n],
        interaction_list: vec![Vec::new(); n],
        coarse_interaction_list: vec![Vec::new(); n],
    };
    for id in 0..n as u32 {
        let b = tree.boxes[id as usize].clone();
        let l = b.level;
        // Colleagues: the 3x3 neighborhood with wrap; at coarse levels the box
        // itself reappears under nonzero shifts.
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                let (nx, ny) = (b.ix as i64 + dx, b.iy as i64 + dy);
                if let Some((c, sx, sy)) = wrapped_box(tree, l, nx, ny) {
                    if tree.boxes[c as usize].level == l {
                        ls.colleagues[id as usize].push((c, shift_point(tree, l, sx, sy)));
                    }
                }
            }
        }
        if let Some(parent) = b.parent {
            let pb = &tree.boxes[parent as usize];
            let pl = pb.level;
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let (nx, ny) = (pb.ix as i64 + dx, pb.iy as i64 + dy);
                    let Some((pc, psx, psy)) = wrapped_box(tree, pl, nx, ny) else {
                        continue;
                    };
                    let pcb = &tree.boxes[pc as usize];
                    if pcb.level != pl {
                        continue;
                    }
                    // Coarse neighbors: leaves among the parent's colleagues
                    // that touch b as images.
                    let touches_parent_cell =
                        cells_touch(l, b.ix, b.iy, pl, pcb.ix as i64 + psx, pcb.iy as i64 + psy);
                    if !(dx == 0 && dy == 0 && psx == 0 && psy == 0)
                        && pcb.is_leaf()
                        && touches_parent_cell
                    {
                        ls.coarse_neighbors[id as usize]
                            .push((pc, shift_point(tree, pl, psx, psy)));
                    }
                    // Interaction list: their children whose images do not
                    // touch b.
                    if let Some(cs) = pcb.children {
                        for c in cs {
                            let cb = &tree.boxes[c as usize];
                            let (csx, csy) = (psx * 2, psy * 2);
                            if !cells_touch(l, b.ix, b.iy, l, cb.ix as i64 + csx, cb.iy as i64 + csy)
                            {
                                ls.interaction_list[id as usize]
                                    .push((c, shift_point(tree, l, csx, csy)));
                            }
                        }
                    }
                }
            }
        }
        // Fine neighbors and s-list from colleagues' children.
        let colleagues = ls.colleagues[id as usize].clone();
        for &(c, sh) in &colleagues {
            if c == id && sh == [0.0, 0.0] {
                continue;
            }
            let cb = &tree.boxes[c as usize];
            let cell = 2.0 * tree.root_halfwidth / (1u64 << l) as f64;
            let (sx, sy) = ((sh[0] / cell).round() as i64, (sh[1] / cell).round() as i64);
            if let Some(cs) = cb.children {
                for ch in cs {
                    let chb = &tree.boxes[ch as usize];
                    let (csx, csy) = (sx * 2, sy * 2);
                    let touches = cells_touch(
                        l,
                        b.ix,
                        b.iy,
                        chb.level,
                        chb.ix as i64 + csx,
                        chb.iy as i64 + csy,
                    );
                    let shp = shift_point(tree, chb.level, csx, csy);
                    if touches {
                        if chb.is_leaf() {
                            ls.fine_neighbors[id as usize].push((ch, shp));
                        }
                    } else {
                        ls.s_list[id as usize].push((ch, shp));
                    }
                }
            }
        }
    }
    // Coarse interaction lists by inversion of leaf s-lists, with the shift
    // seen from the other side.
    for id in 0..n as u32 {
        if !tree.boxes[id as usize].is_leaf() {
            continue;
        }
        let sl = ls.s_list[id as usize].clone();
        for (c, sh) in sl {
            ls.coarse_interaction_list[c as usize].push((id, [-sh[0], -sh[1]]));
        }
    }
    ls
}
