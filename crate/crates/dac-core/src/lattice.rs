//! Finite simulation windows on the square and hexagonal lattices.
//!
//! A window is the minimal `2L x L` vertex grid (with `L = s + 2*ell`)
//! containing the crossing rectangle `R` and its isolation margin. The
//! hexagonal lattice is embedded brick-wall style on the same integer grid:
//! all horizontal edges are present, vertical edges only where `x + y` is
//! even. Star adjacency adds the diagonals of every lattice face and governs
//! the matching (dual) notion of connectivity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice family of a simulation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeKind {
    #[serde(rename = "z2")]
    Square,
    #[serde(rename = "hex")]
    Hexagonal,
}

impl LatticeKind {
    /// Bond percolation threshold of the infinite lattice.
    ///
    /// Square: exactly 1/2. Hexagonal: `1 - 2 sin(pi/18)`.
    pub fn bond_pc(self) -> f64 {
        match self {
            LatticeKind::Square => 0.5,
            LatticeKind::Hexagonal => 1.0 - 2.0 * (std::f64::consts::PI / 18.0).sin(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LatticeKind::Square => "z2",
            LatticeKind::Hexagonal => "hex",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "z2" | "square" => Some(LatticeKind::Square),
            "hex" | "hexagonal" => Some(LatticeKind::Hexagonal),
            _ => None,
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Closed axis-aligned rectangle of vertex coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }
}

/// Geometry parameters of a window: `s` is the side of the crossing squares,
/// `ell` the isolation margin. The window spans `[0, 2s+4*ell] x [0, s+2*ell]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub s: u32,
    pub ell: u32,
}

impl RegionSpec {
    pub fn new(s: u32, ell: u32) -> Result<Self> {
        if s < 1 || ell < 1 {
            return Err(Error::InvalidParameter(format!(
                "region requires s >= 1 and ell >= 1, got s={s}, ell={ell}"
            )));
        }
        Ok(RegionSpec { s, ell })
    }

    /// Block pitch `k = s + 2*ell`.
    pub fn k(&self) -> u32 {
        self.s + 2 * self.ell
    }

    /// Window height scale `L = s + 2*ell` (the window is `2L x L`).
    pub fn side_l(&self) -> u32 {
        self.k()
    }

    /// Largest x coordinate, `2s + 4*ell`.
    pub fn x_max(&self) -> u32 {
        2 * self.s + 4 * self.ell
    }

    /// Largest y coordinate, `s + 2*ell`.
    pub fn y_max(&self) -> u32 {
        self.s + 2 * self.ell
    }

    /// Number of vertex columns.
    pub fn cols(&self) -> u32 {
        self.x_max() + 1
    }

    /// Number of vertex rows.
    pub fn rows(&self) -> u32 {
        self.y_max() + 1
    }

    /// The crossing rectangle `R = [ell, 2s+3*ell] x [ell, s+ell]`, a
    /// horizontal 2:1 rectangle with margin exactly `ell` to the window
    /// boundary on all four sides.
    pub fn r_rect(&self) -> Rect {
        Rect {
            x0: self.ell,
            y0: self.ell,
            x1: 2 * self.s + 3 * self.ell,
            y1: self.s + self.ell,
        }
    }

    /// The left crossing square `S = [ell, ell+s] x [ell, ell+s]`.
    pub fn s_rect(&self) -> Rect {
        Rect {
            x0: self.ell,
            y0: self.ell,
            x1: self.ell + self.s,
            y1: self.ell + self.s,
        }
    }
}

/// Compressed adjacency with parallel edge indices, built once per window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    edge_ids: Vec<u32>,
}

impl Adjacency {
    fn build(vertex_count: u32, edges: &[(u32, u32)]) -> Result<Self> {
        let n = vertex_count as usize;
        let directed = edges
            .len()
            .checked_mul(2)
            .filter(|&d| d < u32::MAX as usize)
            .ok_or_else(|| Error::WindowTooLarge("edge count overflows adjacency index".into()))?;
        let mut degree = vec![0u32; n];
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    index: a.max(b),
                    count: vertex_count,
                });
            }
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; directed];
        let mut edge_ids = vec![0u32; directed];
        for (e, &(a, b)) in edges.iter().enumerate() {
            let ca = cursor[a as usize] as usize;
            targets[ca] = b;
            edge_ids[ca] = e as u32;
            cursor[a as usize] += 1;
            let cb = cursor[b as usize] as usize;
            targets[cb] = a;
            edge_ids[cb] = e as u32;
            cursor[b as usize] += 1;
        }
        Ok(Adjacency {
            offsets,
            targets,
            edge_ids,
        })
    }

    pub(crate) fn neighbors(&self, v: u32) -> &[u32] {
        let lo = self.offsets[v as usize] as usize;
        let hi = self.offsets[v as usize + 1] as usize;
        &self.targets[lo..hi]
    }

    pub(crate) fn neighbor_edges(&self, v: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let lo = self.offsets[v as usize] as usize;
        let hi = self.offsets[v as usize + 1] as usize;
        self.targets[lo..hi]
            .iter()
            .copied()
            .zip(self.edge_ids[lo..hi].iter().copied())
    }
}

/// Raw ingredients of a window. `into_window` validates them, builds both
/// adjacency structures, and computes graph distances to `R`, so custom
/// graphs (small test fixtures in particular) go through the same machinery
/// as lattice windows.
#[derive(Debug, Clone)]
pub struct WindowParts {
    pub kind: LatticeKind,
    pub region: RegionSpec,
    pub vertex_count: u32,
    pub edges: Vec<(u32, u32)>,
    pub star_edges: Vec<(u32, u32)>,
    pub in_r: Vec<bool>,
    pub in_s: Vec<bool>,
    pub r_left: Vec<bool>,
    pub r_right: Vec<bool>,
    pub s_top: Vec<bool>,
    pub s_bottom: Vec<bool>,
}

impl WindowParts {
    pub fn into_window(self) -> Result<LatticeWindow> {
        let n = self.vertex_count as usize;
        for (name, flags) in [
            ("in_r", &self.in_r),
            ("in_s", &self.in_s),
            ("r_left", &self.r_left),
            ("r_right", &self.r_right),
            ("s_top", &self.s_top),
            ("s_bottom", &self.s_bottom),
        ] {
            if flags.len() != n {
                return Err(Error::SizeMismatch(format!(
                    "flag array {name} has length {} for {} vertices",
                    flags.len(),
                    n
                )));
            }
        }
        for v in 0..n {
            if (self.r_left[v] || self.r_right[v]) && !self.in_r[v] {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} carries an R side flag but is not in R"
                )));
            }
            if (self.s_top[v] || self.s_bottom[v]) && !self.in_s[v] {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} carries an S side flag but is not in S"
                )));
            }
            if self.in_s[v] && !self.in_r[v] {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} is in S but not in R"
                )));
            }
        }
        let bond_adj = Adjacency::build(self.vertex_count, &self.edges)?;
        let star_adj = Adjacency::build(self.vertex_count, &self.star_edges)?;
        let dist_to_r = bfs_distance_to(&bond_adj, &self.in_r, self.vertex_count);
        Ok(LatticeWindow {
            kind: self.kind,
            region: self.region,
            vertex_count: self.vertex_count,
            edges: self.edges,
            star_edges: self.star_edges,
            in_r: self.in_r,
            in_s: self.in_s,
            r_left: self.r_left,
            r_right: self.r_right,
            s_top: self.s_top,
            s_bottom: self.s_bottom,
            dist_to_r,
            bond_adj,
            star_adj,
        })
    }
}

/// A finite simulation window: bond and star adjacency, region membership
/// flags, and graph distance to the crossing rectangle `R`.
///
/// Vertices are indexed row-major with x fastest: `index(x, y) = y*cols + x`.
/// A built window is immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWindow {
    pub kind: LatticeKind,
    pub region: RegionSpec,
    pub vertex_count: u32,
    /// Bond edges in generation order (one row scan, horizontal before
    /// vertical at each site). Sampling draws one uniform per entry.
    pub edges: Vec<(u32, u32)>,
    /// Bond edges followed by all face diagonals.
    pub star_edges: Vec<(u32, u32)>,
    pub in_r: Vec<bool>,
    pub in_s: Vec<bool>,
    pub r_left: Vec<bool>,
    pub r_right: Vec<bool>,
    pub s_top: Vec<bool>,
    pub s_bottom: Vec<bool>,
    /// Graph distance (over bond edges) to the nearest vertex of `R`;
    /// zero exactly on `R`.
    pub dist_to_r: Vec<u32>,
    pub(crate) bond_adj: Adjacency,
    pub(crate) star_adj: Adjacency,
}

impl LatticeWindow {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertex index of grid coordinates.
    pub fn index(&self, x: u32, y: u32) -> u32 {
        y * self.region.cols() + x
    }

    /// Grid coordinates of a vertex index.
    pub fn coords(&self, v: u32) -> (u32, u32) {
        let cols = self.region.cols();
        (v % cols, v / cols)
    }

    /// Bond neighbors of `v`.
    pub fn neighbors(&self, v: u32) -> Result<&[u32]> {
        self.check_vertex(v)?;
        Ok(self.bond_adj.neighbors(v))
    }

    /// Bond neighbors plus all same-face diagonal partners of `v` inside the
    /// window.
    pub fn star_neighbors(&self, v: u32) -> Result<&[u32]> {
        self.check_vertex(v)?;
        Ok(self.star_adj.neighbors(v))
    }

    fn check_vertex(&self, v: u32) -> Result<()> {
        if v >= self.vertex_count {
            return Err(Error::VertexOutOfRange {
                index: v,
                count: self.vertex_count,
            });
        }
        Ok(())
    }
}

fn bfs_distance_to(adj: &Adjacency, sources: &[bool], vertex_count: u32) -> Vec<u32> {
    let n = vertex_count as usize;
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if sources[v] {
            dist[v] = 0;
            queue.push_back(v as u32);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize] + 1;
        for &w in adj.neighbors(v) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = d;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Builds the simulation window for the given lattice and region parameters.
///
/// Rejects `s < 1`, `ell < 1`, and dimensions whose vertex count overflows
/// the u32 vertex index.
pub fn build_window(kind: LatticeKind, s: u32, ell: u32) -> Result<LatticeWindow> {
    let region = RegionSpec::new(s, ell)?;
    let cols = region.cols() as u64;
    let rows = region.rows() as u64;
    let count = cols * rows;
    if count > u32::MAX as u64 {
        return Err(Error::WindowTooLarge(format!(
            "{cols} x {rows} window has {count} vertices, beyond the u32 index range"
        )));
    }
    let vertex_count = count as u32;
    let cols = cols as u32;
    let rows = rows as u32;
    let index = |x: u32, y: u32| y * cols + x;

    let mut edges = Vec::new();
    for y in 0..rows {
        for x in 0..cols {
            if x + 1 < cols {
                edges.push((index(x, y), index(x + 1, y)));
            }
            if y + 1 < rows {
                let vertical_present = match kind {
                    LatticeKind::Square => true,
                    LatticeKind::Hexagonal => (x + y) % 2 == 0,
                };
                if vertical_present {
                    edges.push((index(x, y), index(x, y + 1)));
                }
            }
        }
    }

    let mut star_edges = edges.clone();
    match kind {
        LatticeKind::Square => {
            // Unit square faces: two diagonals each.
            for y in 0..rows - 1 {
                for x in 0..cols - 1 {
                    star_edges.push((index(x, y), index(x + 1, y + 1)));
                    star_edges.push((index(x + 1, y), index(x, y + 1)));
                }
            }
        }
        LatticeKind::Hexagonal => {
            // Brick faces are 6-cycles spanning columns [x0, x0+2] and rows
            // [y, y+1] with vertical edges at both ends; each face
            // contributes the 9 vertex pairs that are not cycle edges.
            for y in 0..rows - 1 {
                let x_start = if y % 2 == 0 { 0 } else { 1 };
                let mut x0 = x_start;
                while x0 + 2 < cols {
                    let a = index(x0, y);
                    let b = index(x0 + 1, y);
                    let c = index(x0 + 2, y);
                    let d = index(x0, y + 1);
                    let e = index(x0 + 1, y + 1);
                    let f = index(x0 + 2, y + 1);
                    star_edges.extend_from_slice(&[
                        (a, c),
                        (a, e),
                        (a, f),
                        (b, d),
                        (b, e),
                        (b, f),
                        (c, d),
                        (c, e),
                        (d, f),
                    ]);
                    x0 += 2;
                }
            }
        }
    }

    let r = region.r_rect();
    let sq = region.s_rect();
    let n = vertex_count as usize;
    let mut in_r = vec![false; n];
    let mut in_s = vec![false; n];
    let mut r_left = vec![false; n];
    let mut r_right = vec![false; n];
    let mut s_top = vec![false; n];
    let mut s_bottom = vec![false; n];
    for y in 0..rows {
        for x in 0..cols {
            let v = index(x, y) as usize;
            if r.contains(x, y) {
                in_r[v] = true;
                r_left[v] = x == r.x0;
                r_right[v] = x == r.x1;
            }
            if sq.contains(x, y) {
                in_s[v] = true;
                s_top[v] = y == sq.y1;
                s_bottom[v] = y == sq.y0;
            }
        }
    }

    WindowParts {
        kind,
        region,
        vertex_count,
        edges,
        star_edges,
        in_r,
        in_s,
        r_left,
        r_right,
        s_top,
        s_bottom,
    }
    .into_window()
}
