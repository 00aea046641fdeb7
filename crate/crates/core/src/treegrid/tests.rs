use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_tree(k: usize) -> QuadTree {
    QuadTree::new([0.0, 0.0], 0.5, k).unwrap()
}

fn uniform_tree(k: usize, depth: u32) -> QuadTree {
    let mut t = unit_tree(k);
    for _ in 0..depth {
        for id in t.leaves() {
            t.subdivide(id).unwrap();
        }
    }
    t
}

fn random_tree(seed: u64, max_depth: u32) -> QuadTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = unit_tree(8);
    for _ in 0..max_depth {
        for id in t.leaves() {
            if t.boxes[id as usize].level < max_depth && rng.gen_bool(0.45) {
                t.subdivide(id).unwrap();
            }
        }
    }
    balance(&t)
}

#[test]
fn cheb_fit_constant_and_t2() {
    let t = unit_tree(8);
    let samples = vec![3.0; 64];
    let p = cheb_fit(&t, 0, &samples).unwrap();
    assert!((p.coeffs[0] - 3.0).abs() < 1e-14);
    assert!(p.coeffs[1..].iter().all(|c| c.abs() < 1e-13));

    // Samples of T_2 in x1 (box-scaled): coefficient (2,0) only.
    let nodes = t.leaf_nodes(0);
    let samples: Vec<f64> = nodes
        .iter()
        .map(|p| {
            let xi = p[0] / 0.5;
            2.0 * xi * xi - 1.0
        })
        .collect();
    let p = cheb_fit(&t, 0, &samples).unwrap();
    for j1 in 0..8 {
        for j2 in 0..8 {
            let expect = if (j1, j2) == (2, 0) { 1.0 } else { 0.0 };
            assert!((p.coeffs[j1 * 8 + j2] - expect).abs() < 1e-13);
        }
    }
}

#[test]
fn cheb_fit_dimension_mismatch() {
    let t = unit_tree(8);
    assert!(matches!(
        cheb_fit(&t, 0, &[1.0; 10]),
        Err(crate::Error::InvalidArgument(_))
    ));
}

#[test]
fn cheb_fit_matches_dense_evaluation() {
    let t = unit_tree(8);
    let f = |p: Point| (3.0 * p[0] + p[1]).sin().exp();
    let samples: Vec<f64> = t.leaf_nodes(0).iter().map(|&p| f(p)).collect();
    let patch = cheb_fit(&t, 0, &samples).unwrap();
    let tail: f64 = (0..8)
        .flat_map(|j1| (0..8).map(move |j2| (j1, j2)))
        .filter(|&(j1, j2)| j1 + j2 >= 7)
        .map(|(j1, j2)| patch.coeffs[j1 * 8 + j2].abs())
        .fold(0.0, f64::max);
    for i in 0..64 {
        for j in 0..64 {
            let p = [-0.5 + (i as f64 + 0.5) / 64.0, -0.5 + (j as f64 + 0.5) / 64.0];
            let err = (cheb_eval(&t, &patch, p).unwrap() - f(p)).abs();
            assert!(err < 30.0 * tail, "err={err} tail={tail}");
        }
    }
}

#[test]
fn cheb_eval_trivials_and_oracle() {
    let t = unit_tree(8);
    let mut coeffs = vec![0.0; 64];
    coeffs[0] = 5.0;
    let p = ChebPatch { coeffs, box_id: 0 };
    assert_eq!(cheb_eval(&t, &p, [0.21, -0.4]).unwrap(), 5.0);

    // c(1,0) = 1 on [-1,1]^2 equivalent: value is the scaled x1 coordinate.
    let mut coeffs = vec![0.0; 64];
    coeffs[8] = 1.0;
    let p = ChebPatch { coeffs, box_id: 0 };
    let v = cheb_eval(&t, &p, [0.15, 0.37]).unwrap();
    assert!((v - 0.3).abs() < 1e-14);

    // Random coefficients vs naive double sum.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coeffs: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p = ChebPatch { coeffs: coeffs.clone(), box_id: 0 };
    for _ in 0..20 {
        let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let (xi, eta) = (x[0] / 0.5, x[1] / 0.5);
        let t1 = cheb::t_values(8, xi);
        let t2 = cheb::t_values(8, eta);
        let mut naive = 0.0;
        for j1 in 0..8 {
            for j2 in 0..8 {
                naive += coeffs[j1 * 8 + j2] * t1[j1] * t2[j2];
            }
        }
        let v = cheb_eval(&t, &p, x).unwrap();
        assert!((v - naive).abs() <= 1e-14 * (1.0 + naive.abs()));
    }
    assert!(cheb_eval(&t, &p, [0.9, 0.0]).is_err());
}

#[test]
fn resolving_tree_constant_is_single_leaf() {
    let (tree, _) = build_resolving_tree(&|_| 1.0, 1e-9, 8, [0.0, 0.0], 0.5).unwrap();
    assert_eq!(tree.boxes.len(), 1);
}

#[test]
fn resolving_tree_periodized_gaussian() {
    // 5 sum_{|j|<=4} exp(-|x-j|^2 / 0.1): refinement concentrates at the center.
    let f = |p: Point| {
        let mut s = 0.0;
        for jx in -4i32..=4 {
            for jy in -4i32..=4 {
                let dx = p[0] - jx as f64;
                let dy = p[1] - jy as f64;
                s += (-(dx * dx + dy * dy) / 0.1).exp();
            }
        }
        5.0 * s
    };
    let (tree, gf) = build_resolving_tree(&f, 1e-7, 8, [0.0, 0.0], 0.5).unwrap();
    // Independent post-hoc audit of the E2 test at every leaf.
    for &id in &tree.leaves() {
        let e = e2_error(&gf, id, &f);
        assert!(e <= 1e-7 * 1.01, "leaf {id}: E2={e}");
    }
    // The deepest refinement level is reached near the center peak.
    let max_level = tree.level_count() - 1;
    assert!(max_level >= 2);
    let deepest_at_center = tree.leaves().iter().any(|&id| {
        let b = &tree.boxes[id as usize];
        let c = tree.box_center(id);
        b.level == max_level && c[0].abs() < 0.3 && c[1].abs() < 0.3
    });
    assert!(deepest_at_center);
}

#[test]
fn balance_noop_on_balanced_tree() {
    let t = uniform_tree(8, 2);
    let b = balance(&t);
    assert_eq!(t.boxes.len(), b.boxes.len());
}

#[test]
fn balance_splits_coarse_neighbor() {
    // Refine toward the center so a level-3 leaf touches level-1 leaves.
    let mut t = unit_tree(8);
    let c0 = t.subdivide(0).unwrap();
    t.subdivide(c0[0]).unwrap();
    let inner = t.box_at(2, 1, 1).unwrap();
    t.subdivide(inner).unwrap();
    assert!(!t.is_balanced());
    let b = balance(&t);
    assert!(b.is_balanced());
    // Exhaustive adjacent-pair check.
    let leaves = b.leaves();
    for &a in &leaves {
        for &c in &leaves {
            if a != c && b.boxes_touch(a, c) {
                let la = b.boxes[a as usize].level as i64;
                let lc = b.boxes[c as usize].level as i64;
                assert!((la - lc).abs() <= 1);
            }
        }
    }
}

#[test]
fn balance_random_trees_pass_pair_scan() {
    for seed in 0..30 {
        let t = random_tree(seed, 5);
        let leaves = t.leaves();
        for &a in &leaves {
            for &c in &leaves {
                if a != c && t.boxes_touch(a, c) {
                    let la = t.boxes[a as usize].level as i64;
                    let lc = t.boxes[c as usize].level as i64;
                    assert!((la - lc).abs() <= 1, "seed {seed}: leaves {a},{c}");
                }
            }
        }
    }
}

#[test]
fn lists_uniform_tree_interior_box() {
    // Uniform tree with an 8x8 finest level; a truly interior box sees
    // 9 colleagues (incl. self) and 27 interaction-list boxes.
    let t = uniform_tree(8, 3);
    let ls = compute_lists(&t).unwrap();
    let id = t.box_at(3, 3, 4).unwrap();
    assert_eq!(ls.colleagues[id as usize].len(), 9);
    assert_eq!(ls.interaction_list[id as usize].len(), 27);
    assert!(ls.coarse_neighbors[id as usize].is_empty());
    assert!(ls.fine_neighbors[id as usize].is_empty());
    assert!(ls.s_list[id as usize].is_empty());
}

#[test]
fn lists_require_balanced_tree() {
    let mut t = unit_tree(8);
    let c0 = t.subdivide(0).unwrap();
    t.subdivide(c0[0]).unwrap();
    let inner = t.box_at(2, 1, 1).unwrap();
    t.subdivide(inner).unwrap();
    assert!(matches!(compute_lists(&t), Err(crate::Error::InvalidState(_))));
}

#[test]
fn lists_mixed_level_categories() {
    // One quadrant refined one level deeper: cross-level lists populate.
    let mut t = unit_tree(8);
    let c0 = t.subdivide(0).unwrap();
    for &c in &c0 {
        t.subdivide(c).unwrap();
    }
    // Refine the (0,0) quadrant's (1,1) child once more.
    let fine_parent = t.box_at(2, 1, 1).unwrap();
    t.subdivide(fine_parent).unwrap();
    let t = balance(&t);
    let ls = compute_lists(&t).unwrap();
    // The level-3 children must list level-2 touching leaves as coarse neighbors.
    let child = t.box_at(3, 3, 3).unwrap();
    assert!(!ls.coarse_neighbors[child as usize].is_empty());
    for &cn in &ls.coarse_neighbors[child as usize] {
        assert_eq!(t.boxes[cn as usize].level, 2);
        assert!(t.boxes_touch(child, cn));
        assert!(t.boxes[cn as usize].is_leaf());
    }
    // And those coarse leaves see the level-3 boxes as fine neighbors.
    let coarse = ls.coarse_neighbors[child as usize][0];
    assert!(ls.fine_neighbors[coarse as usize].contains(&child));
    // s-list members are children of colleagues not touching the box.
    for &s in &ls.s_list[coarse as usize] {
        let sp = t.boxes[s as usize].parent.unwrap();
        assert!(ls.colleagues[coarse as usize].contains(&sp));
        assert!(!t.boxes_touch(coarse, s));
        // Dual membership in the coarse interaction list.
        assert!(ls.coarse_interaction_list[s as usize].contains(&coarse));
    }
}

/// Exhaustive coverage audit: every ordered leaf pair (source S, target T)
/// is accounted for exactly once across the near/far categories.
fn coverage_count(t: &QuadTree, ls: &ListSet, s: u32, tt: u32) -> usize {
    let mut n = 0;
    if s == tt {
        n += 1; // self interaction, handled in the near field
    } else {
        if ls.colleagues[tt as usize].contains(&s) {
            n += 1;
        }
        if ls.coarse_neighbors[tt as usize].contains(&s) {
            n += 1;
        }
        if ls.fine_neighbors[tt as usize].contains(&s) {
            n += 1;
        }
    }
    // (a) same-level interaction list between any ancestor pair.
    let ancestors = |mut id: u32| {
        let mut v = vec![id];
        while let Some(p) = t.boxes[id as usize].parent {
            v.push(p);
            id = p;
        }
        v
    };
    let sa = ancestors(s);
    let ta = ancestors(tt);
    for &a in &ta {
        for &b in &sa {
            if t.boxes[a as usize].level == t.boxes[b as usize].level
                && ls.interaction_list[a as usize].contains(&b)
            {
                n += 1;
            }
        }
    }
    // (b) an ancestor of S (or S) in the s-list of leaf T: source-side
    // expansion evaluated at T.
    for &b in &sa {
        if ls.s_list[tt as usize].contains(&b) {
            n += 1;
        }
    }
    // (c) coarse leaf S scatters a local expansion into an ancestor of T
    // (or T itself): S in that box's coarse interaction list.
    for &a in &ta {
        if ls.coarse_interaction_list[a as usize].contains(&s) {
            n += 1;
        }
    }
    n
}

#[test]
fn lists_coverage_audit_random_trees() {
    for seed in [1u64, 5, 9, 23, 41] {
        let t = random_tree(seed, 4);
        let ls = compute_lists(&t).unwrap();
        let leaves = t.leaves();
        for &s in &leaves {
            for &tt in &leaves {
                let n = coverage_count(&t, &ls, s, tt);
                assert_eq!(
                    n, 1,
                    "seed {seed}: pair ({s},{tt}) covered {n} times (levels {}, {})",
                    t.boxes[s as usize].level, t.boxes[tt as usize].level
                );
            }
        }
    }
}

#[test]
fn refine_coarsen_round_trip() {
    let tree = Arc::new(unit_tree(8));
    let f = |p: Point| (2.0 * p[0]).cos() * (1.0 + p[1]);
    let gf = GridFunction::from_fn(tree, &f);
    let refined = refine_leaf(&gf, 0, &Resampler::Interpolate).unwrap();
    // Constant check: each child of a refined constant is constant.
    let gc = GridFunction::from_fn(Arc::new(unit_tree(8)), &|_| 2.5);
    let rc = refine_leaf(&gc, 0, &Resampler::Interpolate).unwrap();
    for &id in &rc.tree.leaves() {
        let p = rc.patches[id as usize].as_ref().unwrap();
        assert!((p.coeffs[0] - 2.5).abs() < 1e-14);
        assert!(p.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
    }
    // Round trip back to the parent recovers the original patch.
    let back = coarsen_siblings(&refined, 0, &Resampler::Interpolate).unwrap();
    let orig = gf.patches[0].as_ref().unwrap();
    let rec = back.patches[0].as_ref().unwrap();
    for (a, b) in orig.coeffs.iter().zip(rec.coeffs.iter()) {
        assert!((a - b).abs() < 1e-13);
    }
    // Child patches match direct sampling to the parent's interpolation
    // error, which is governed by the parent's coefficient tail.
    let k = gf.tree.k;
    let mut tail: f64 = 0.0;
    for j1 in 0..k {
        for j2 in 0..k {
            if j1 >= k - 2 || j2 >= k - 2 {
                tail = tail.max(orig.coeffs[j1 * k + j2].abs());
            }
        }
    }
    let direct = refine_leaf(&gf, 0, &Resampler::Function(&f)).unwrap();
    for &id in &refined.tree.leaves() {
        let a = refined.patches[id as usize].as_ref().unwrap();
        let b = direct.patches[id as usize].as_ref().unwrap();
        for (x, y) in a.coeffs.iter().zip(b.coeffs.iter()) {
            assert!((x - y).abs() < 10.0 * tail, "diff {} tail {tail}", (x - y).abs());
        }
    }
}

#[test]
fn serialization_round_trip() {
    let f = |p: Point| (3.0 * p[0]).sin() + p[1] * p[1];
    let (_, gf) = build_resolving_tree(&f, 1e-6, 8, [0.1, -0.2], 0.7).unwrap();
    let text = serialize_grid(&gf);
    let back = deserialize_grid(&text).unwrap();
    assert!(back.tree.same_structure(&gf.tree));
    for (a, b) in gf.patches.iter().zip(back.patches.iter()) {
        match (a, b) {
            (Some(a), Some(b)) => {
                assert_eq!(a.box_id, b.box_id);
                for (x, y) in a.coeffs.iter().zip(b.coeffs.iter()) {
                    assert_eq!(x, y, "17 significant digits must round-trip f64 exactly");
                }
            }
            (None, None) => {}
            _ => panic!("patch presence mismatch"),
        }
    }
}

#[test]
fn grid_function_calculus() {
    let tree = Arc::new(uniform_tree(8, 2));
    let f = |p: Point| p[0] * p[0] + 0.3 * p[1];
    let gf = GridFunction::from_fn(tree.clone(), &f);
    // integral of x^2 over [-0.5,0.5]^2 = 1/12; the x2 term integrates to 0.
    assert!((gf.integral() - 1.0 / 12.0).abs() < 1e-13);
    let mut g2 = gf.clone();
    g2.add_scaled(&gf, 1.0).unwrap();
    assert!((g2.integral() - 2.0 / 12.0).abs() < 1e-13);
    assert!((gf.eval([0.2, 0.3]).unwrap() - f([0.2, 0.3])).abs() < 1e-13);
    // L2 norm of f over the box, against adaptive quadrature of f^2.
    let exact = {
        // int x^4 = 1/80; int 2*0.3 x^2 y = 0; int 0.09 y^2 = 0.09/12.
        (1.0 / 80.0 + 0.09 / 12.0f64).sqrt()
    };
    assert!((gf.norm_l2() - exact).abs() < 1e-12);
}
