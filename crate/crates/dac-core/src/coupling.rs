//! Cluster-uniform coupling and exact crossing thresholds.
//!
//! One uniform is attached to every bond cluster (at its minimum-index
//! vertex); coloring at level `r` turns a cluster black exactly when its
//! uniform is below `r`. All levels are therefore coupled monotonically, and
//! one activation sweep over clusters sorted by uniform value recovers the
//! exact level at which each crossing event first holds.

use rand::Rng;

use crate::bonds::{ClusterLabels, UnionFind};
use crate::error::{Error, Result};
use crate::lattice::{Adjacency, LatticeWindow};

/// Per-cluster uniforms, stored at cluster representatives. Entries at
/// non-representative vertices are NaN so that accidental reads surface.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformAssignment {
    pub u: Vec<f64>,
}

impl UniformAssignment {
    /// Uniform value governing the color of vertex `v`.
    pub fn for_vertex(&self, labels: &ClusterLabels, v: u32) -> f64 {
        self.u[labels.rep[v as usize] as usize]
    }
}

/// A black/white vertex coloring, constant on bond clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorConfig {
    pub black: Vec<bool>,
}

/// Exact coloring levels at which the plain and star crossing events first
/// hold for one trial. A trial hit by the long-connection event `F` carries
/// `(1, 1)` by convention.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdPair {
    pub r1: f64,
    pub r1_star: f64,
    pub f_hit: bool,
}

/// Draws one uniform per vertex in vertex order and retains the value at
/// each cluster representative. Exactly `vertex_count` draws are consumed so
/// that the stream position after this call does not depend on the cluster
/// structure.
pub fn assign_uniforms<R: Rng + ?Sized>(
    labels: &ClusterLabels,
    rng: &mut R,
) -> UniformAssignment {
    let u = labels
        .rep
        .iter()
        .enumerate()
        .map(|(v, &rep)| {
            let draw = rng.gen::<f64>();
            if rep as usize == v {
                draw
            } else {
                f64::NAN
            }
        })
        .collect();
    UniformAssignment { u }
}

/// Colors vertex `v` black iff the uniform of its cluster is below `r`.
pub fn color_at_level(
    labels: &ClusterLabels,
    uniforms: &UniformAssignment,
    r: f64,
) -> Result<ColorConfig> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "coloring level r must lie in [0, 1], got {r}"
        )));
    }
    if uniforms.u.len() != labels.rep.len() {
        return Err(Error::SizeMismatch(format!(
            "uniform assignment covers {} vertices, labels cover {}",
            uniforms.u.len(),
            labels.rep.len()
        )));
    }
    let black = labels
        .rep
        .iter()
        .map(|&rep| uniforms.u[rep as usize] < r)
        .collect();
    Ok(ColorConfig { black })
}

fn flood_crossing(
    adj: &Adjacency,
    in_rect: &[bool],
    side_a: &[bool],
    side_b: &[bool],
    black: &[bool],
) -> bool {
    let n = black.len();
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    for v in 0..n {
        if side_a[v] && black[v] {
            visited[v] = true;
            stack.push(v as u32);
        }
    }
    while let Some(v) = stack.pop() {
        if side_b[v as usize] {
            return true;
        }
        for &w in adj.neighbors(v) {
            let w_us = w as usize;
            if !visited[w_us] && in_rect[w_us] && black[w_us] {
                visited[w_us] = true;
                stack.push(w);
            }
        }
    }
    false
}

/// The composite crossing event: a black left-right crossing of `R` together
/// with a black up-down crossing of the left square `S`, both using only
/// vertices inside the respective rectangle. With `star` set, paths may also
/// use face diagonals. Corner vertices carry both side flags, so a crossing
/// may legitimately start and end on them.
pub fn crossing_event(window: &LatticeWindow, colors: &ColorConfig, star: bool) -> Result<bool> {
    if colors.black.len() != window.vertex_count as usize {
        return Err(Error::SizeMismatch(format!(
            "color config covers {} vertices, window has {}",
            colors.black.len(),
            window.vertex_count
        )));
    }
    let adj = if star {
        &window.star_adj
    } else {
        &window.bond_adj
    };
    let lr = flood_crossing(adj, &window.in_r, &window.r_left, &window.r_right, &colors.black);
    if !lr {
        return Ok(false);
    }
    let ud = flood_crossing(
        adj,
        &window.in_s,
        &window.s_bottom,
        &window.s_top,
        &colors.black,
    );
    Ok(ud)
}

// One incremental connectivity structure: a union-find over the vertices of
// one rectangle plus two virtual terminals for its designated sides.
struct SweepStructure<'a> {
    adj: &'a Adjacency,
    in_rect: &'a [bool],
    side_a: &'a [bool],
    side_b: &'a [bool],
    uf: UnionFind,
    term_a: u32,
    term_b: u32,
    first_hold: Option<f64>,
}

impl<'a> SweepStructure<'a> {
    fn new(
        vertex_count: u32,
        adj: &'a Adjacency,
        in_rect: &'a [bool],
        side_a: &'a [bool],
        side_b: &'a [bool],
    ) -> Self {
        SweepStructure {
            adj,
            in_rect,
            side_a,
            side_b,
            uf: UnionFind::new(vertex_count + 2),
            term_a: vertex_count,
            term_b: vertex_count + 1,
            first_hold: None,
        }
    }

    fn activate(&mut self, members: &[u32], active: &[bool], value: f64) {
        if self.first_hold.is_some() {
            return;
        }
        for &v in members {
            let v_us = v as usize;
            if !self.in_rect[v_us] {
                continue;
            }
            if self.side_a[v_us] {
                self.uf.union(v, self.term_a);
            }
            if self.side_b[v_us] {
                self.uf.union(v, self.term_b);
            }
            for &w in self.adj.neighbors(v) {
                if self.in_rect[w as usize] && active[w as usize] {
                    self.uf.union(v, w);
                }
            }
        }
        if self.uf.connected(self.term_a, self.term_b) {
            self.first_hold = Some(value);
        }
    }
}

fn combine(first: Option<f64>, second: Option<f64>) -> f64 {
    match (first, second) {
        (Some(a), Some(b)) => a.max(b),
        _ => 1.0,
    }
}

/// Computes the exact threshold levels of both crossing events for one trial
/// by activating clusters in increasing order of their uniforms and
/// maintaining four incremental connectivity structures (plain/star crossed
/// with `R`/`S`). Both events are monotone in the level, so the threshold of
/// the composite event is the larger of its two sub-event activation values;
/// a sub-event that never holds leaves the threshold at 1. Trials hit by `F`
/// return `(1, 1)` without sweeping.
pub fn compute_thresholds(
    window: &LatticeWindow,
    labels: &ClusterLabels,
    uniforms: &UniformAssignment,
    f_hit: bool,
) -> Result<ThresholdPair> {
    let n = window.vertex_count as usize;
    if labels.rep.len() != n {
        return Err(Error::SizeMismatch(format!(
            "labels cover {} vertices, window has {}",
            labels.rep.len(),
            n
        )));
    }
    if uniforms.u.len() != n {
        return Err(Error::SizeMismatch(format!(
            "uniform assignment covers {} vertices, window has {}",
            uniforms.u.len(),
            n
        )));
    }
    if f_hit {
        return Ok(ThresholdPair {
            r1: 1.0,
            r1_star: 1.0,
            f_hit: true,
        });
    }

    // Group vertices by representative (counting sort keeps this linear).
    let mut counts = vec![0u32; n];
    for &rep in &labels.rep {
        counts[rep as usize] += 1;
    }
    let mut starts = vec![0u32; n + 1];
    for v in 0..n {
        starts[v + 1] = starts[v] + counts[v];
    }
    let mut cursor = starts.clone();
    let mut members = vec![0u32; n];
    for v in 0..n {
        let rep = labels.rep[v] as usize;
        members[cursor[rep] as usize] = v as u32;
        cursor[rep] += 1;
    }

    // Activation order: by uniform value, ties broken by representative
    // index so results stay deterministic.
    let mut order: Vec<(f64, u32)> = (0..n as u32)
        .filter(|&v| labels.rep[v as usize] == v)
        .map(|v| (uniforms.u[v as usize], v))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let vc = window.vertex_count;
    let mut structures = [
        SweepStructure::new(vc, &window.bond_adj, &window.in_r, &window.r_left, &window.r_right),
        SweepStructure::new(vc, &window.bond_adj, &window.in_s, &window.s_bottom, &window.s_top),
        SweepStructure::new(vc, &window.star_adj, &window.in_r, &window.r_left, &window.r_right),
        SweepStructure::new(vc, &window.star_adj, &window.in_s, &window.s_bottom, &window.s_top),
    ];

    let mut active = vec![false; n];
    for &(value, rep) in &order {
        let slice =
            &members[starts[rep as usize] as usize..starts[rep as usize + 1] as usize];
        for &v in slice {
            active[v as usize] = true;
        }
        for structure in structures.iter_mut() {
            structure.activate(slice, &active, value);
        }
        if structures.iter().all(|s| s.first_hold.is_some()) {
            break;
        }
    }

    let r1 = combine(structures[0].first_hold, structures[1].first_hold);
    let r1_star = combine(structures[2].first_hold, structures[3].first_hold);
    debug_assert!(r1_star <= r1);
    Ok(ThresholdPair {
        r1,
        r1_star,
        f_hit: false,
    })
}
