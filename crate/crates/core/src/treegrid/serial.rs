//! Line-oriented text serialization of a tree plus grid function.
//!
//! Format (all values space separated, floats with 17 significant digits):
//!
//! ```text
//! heatpot-grid v1
//! root_center <x> <y>
//! root_halfwidth <h>
//! k <k>
//! boxes <count>
//! <id> <level> <cx> <cy> <parent|-1> <child0..child3|-1 -1 -1 -1> <leaf 0|1> <empty 0|1>
//! ...
//! patches <count>
//! <box_id>
//! <k*k coefficients, row-major in (j1, j2)>
//! ...
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::{ChebPatch, GridFunction, QuadTree, TreeBox};
use crate::error::{Error, Result};
use crate::numerics::cheb;

/// Serialize a grid function (tree structure plus patches) to text.
pub fn serialize_grid(gf: &GridFunction) -> String {
    let t = &gf.tree;
    let mut s = String::new();
    s.push_str("heatpot-grid v1\n");
    let _ = writeln!(s, "root_center {:.17e} {:.17e}", t.root_center[0], t.root_center[1]);
    let _ = writeln!(s, "root_halfwidth {:.17e}", t.root_halfwidth);
    let _ = writeln!(s, "k {}", t.k);
    let _ = writeln!(s, "boxes {}", t.boxes.len());
    for (id, b) in t.boxes.iter().enumerate() {
        let c = t.box_center(id as u32);
        let p = b.parent.map(|v| v as i64).unwrap_or(-1);
        let ch = b.children.map(|cs| cs.map(|v| v as i64)).unwrap_or([-1; 4]);
        let _ = writeln!(
            s,
            "{} {} {:.17e} {:.17e} {} {} {} {} {} {} {}",
            id,
            b.level,
            c[0],
            c[1],
            p,
            ch[0],
            ch[1],
            ch[2],
            ch[3],
            u8::from(b.is_leaf()),
            u8::from(b.empty),
        );
    }
    let patches: Vec<&ChebPatch> = gf.patches.iter().flatten().collect();
    let _ = writeln!(s, "patches {}", patches.len());
    for p in patches {
        let _ = writeln!(s, "{}", p.box_id);
        let mut line = String::new();
        for (i, c) in p.coeffs.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{c:.17e}");
        }
        s.push_str(&line);
        s.push('\n');
    }
    s
}

fn parse_err(msg: &str) -> Error {
    Error::Format(msg.to_string())
}

/// Parse the text produced by [`serialize_grid`].
pub fn deserialize_grid(text: &str) -> Result<GridFunction> {
    let mut lines = text.lines();
    let mut next = || lines.next().ok_or_else(|| parse_err("unexpected end of input"));
    if next()?.trim() != "heatpot-grid v1" {
        return Err(parse_err("bad magic line"));
    }
    let rc: Vec<f64> = parse_tail(next()?, "root_center", 2)?;
    let rh: Vec<f64> = parse_tail(next()?, "root_halfwidth", 1)?;
    let kv: Vec<f64> = parse_tail(next()?, "k", 1)?;
    let k = kv[0] as usize;
    let nb: Vec<f64> = parse_tail(next()?, "boxes", 1)?;
    let n = nb[0] as usize;
    let root_center = [rc[0], rc[1]];
    let root_halfwidth = rh[0];
    let mut boxes = Vec::with_capacity(n);
    for _ in 0..n {
        let toks: Vec<&str> = next()?.split_whitespace().collect();
        if toks.len() != 11 {
            return Err(parse_err("bad box line"));
        }
        let level: u32 = toks[1].parse().map_err(|_| parse_err("bad level"))?;
        let cx: f64 = toks[2].parse().map_err(|_| parse_err("bad center"))?;
        let cy: f64 = toks[3].parse().map_err(|_| parse_err("bad center"))?;
        let parent: i64 = toks[4].parse().map_err(|_| parse_err("bad parent"))?;
        let mut ch = [0i64; 4];
        for (i, c) in ch.iter_mut().enumerate() {
            *c = toks[5 + i].parse().map_err(|_| parse_err("bad child"))?;
        }
        let empty = toks[10] == "1";
        let side = 2.0 * root_halfwidth / (1u64 << level) as f64;
        let ix = ((cx - (root_center[0] - root_halfwidth)) / side).floor() as u32;
        let iy = ((cy - (root_center[1] - root_halfwidth)) / side).floor() as u32;
        boxes.push(TreeBox {
            level,
            ix: ix.min((1u32 << level) - 1),
            iy: iy.min((1u32 << level) - 1),
            parent: (parent >= 0).then_some(parent as u32),
            children: (ch[0] >= 0).then(|| ch.map(|v| v as u32)),
            empty,
        });
    }
    let index: HashMap<(u32, u32, u32), u32> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.level, b.ix, b.iy), i as u32))
        .collect();
    let tree = QuadTree {
        root_center,
        root_halfwidth,
        k,
        boxes,
        index,
        nodes1d: cheb::nodes(k),
        fitmat: cheb::fit_matrix(k),
    };
    let tree = Arc::new(tree);
    let mut gf = GridFunction::zeros(tree.clone());
    for p in gf.patches.iter_mut() {
        *p = None;
    }
    let np: Vec<f64> = parse_tail(next()?, "patches", 1)?;
    for _ in 0..np[0] as usize {
        let box_id: u32 = next()?.trim().parse().map_err(|_| parse_err("bad patch box id"))?;
        let coeffs: Vec<f64> = next()?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err("bad coefficient")))
            .collect::<Result<_>>()?;
        if coeffs.len() != k * k {
            return Err(parse_err("coefficient block size mismatch"));
        }
        if box_id as usize >= tree.boxes.len() {
            return Err(parse_err("patch references unknown box"));
        }
        gf.patches[box_id as usize] = Some(ChebPatch { coeffs, box_id });
    }
    Ok(gf)
}

fn parse_tail(line: &str, key: &str, n: usize) -> Result<Vec<f64>> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some(key) {
        return Err(parse_err(&format!("expected key '{key}'")));
    }
    let vals: Vec<f64> = toks
        .map(|t| t.parse().map_err(|_| parse_err(&format!("bad value for '{key}'"))))
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(parse_err(&format!("wrong arity for '{key}'")));
    }
    Ok(vals)
}
