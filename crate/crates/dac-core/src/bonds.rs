//! Bernoulli edge sampling, bond-cluster labeling, and the long-connection
//! event `F`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeWindow;

/// An edge configuration: one open/closed bit per window edge, parallel to
/// `window.edges`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BondConfig {
    pub open: Vec<bool>,
}

/// Bond-cluster decomposition. `rep[v]` is the smallest vertex index in the
/// cluster of `v`, so representatives are canonical regardless of the order
/// in which edges were merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub rep: Vec<u32>,
    pub cluster_count: u32,
}

/// Union-find with union by size and path compression.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: u32) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len as usize],
        }
    }

    pub fn find(&mut self, v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = v;
        while cur != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns true when the call actually merged two components.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    pub fn connected(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }
}

/// Draws the edge configuration: each edge open independently with
/// probability `p`, consuming exactly one uniform per edge in edge-list
/// order. The draw happens even for `p` of 0 or 1 so that runs with the same
/// seed but different `p` stay stream-aligned.
pub fn sample_bonds<R: Rng + ?Sized>(
    window: &LatticeWindow,
    p: f64,
    rng: &mut R,
) -> Result<BondConfig> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge density p must lie in [0, 1], got {p}"
        )));
    }
    let open = window
        .edges
        .iter()
        .map(|_| rng.gen::<f64>() < p)
        .collect();
    Ok(BondConfig { open })
}

/// Labels bond clusters, normalizing every representative to the smallest
/// vertex index of its cluster.
pub fn label_clusters(window: &LatticeWindow, bonds: &BondConfig) -> Result<ClusterLabels> {
    if bonds.open.len() != window.edges.len() {
        return Err(Error::SizeMismatch(format!(
            "bond config has {} entries for {} edges",
            bonds.open.len(),
            window.edges.len()
        )));
    }
    let n = window.vertex_count;
    let mut uf = UnionFind::new(n);
    for (&(a, b), &open) in window.edges.iter().zip(&bonds.open) {
        if open {
            uf.union(a, b);
        }
    }
    // Ascending scan: the first vertex hitting a root is the cluster minimum.
    let mut min_of_root = vec![u32::MAX; n as usize];
    let mut rep = vec![0u32; n as usize];
    let mut cluster_count = 0u32;
    for v in 0..n {
        let root = uf.find(v) as usize;
        if min_of_root[root] == u32::MAX {
            min_of_root[root] = v;
            cluster_count += 1;
        }
        rep[v as usize] = min_of_root[root];
    }
    Ok(ClusterLabels { rep, cluster_count })
}

/// The long-connection event: some bond cluster contains both a vertex of
/// `R` and a vertex at graph distance at least `ell` from `R`. A trial where
/// this happens cannot certify either crossing event.
pub fn detect_f(window: &LatticeWindow, labels: &ClusterLabels) -> Result<bool> {
    if labels.rep.len() != window.vertex_count as usize {
        return Err(Error::SizeMismatch(format!(
            "labels cover {} vertices, window has {}",
            labels.rep.len(),
            window.vertex_count
        )));
    }
    let ell = window.region.ell;
    let n = window.vertex_count as usize;
    let mut touches_r = vec![false; n];
    let mut reaches_far = vec![false; n];
    for v in 0..n {
        let rep = labels.rep[v] as usize;
        if window.in_r[v] {
            if reaches_far[rep] {
                return Ok(true);
            }
            touches_r[rep] = true;
        }
        if window.dist_to_r[v] >= ell {
            if touches_r[rep] {
                return Ok(true);
            }
            reaches_far[rep] = true;
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_window, LatticeKind, RegionSpec, WindowParts};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn degenerate_densities() {
        let w = build_window(LatticeKind::Square, 2, 1).unwrap();
        let closed = sample_bonds(&w, 0.0, &mut rng(1)).unwrap();
        assert!(closed.open.iter().all(|&o| !o));
        let open = sample_bonds(&w, 1.0, &mut rng(1)).unwrap();
        assert!(open.open.iter().all(|&o| o));
        assert!(sample_bonds(&w, -0.1, &mut rng(1)).is_err());
        assert!(sample_bonds(&w, 1.1, &mut rng(1)).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let w = build_window(LatticeKind::Hexagonal, 3, 1).unwrap();
        let a = sample_bonds(&w, 0.37, &mut rng(99)).unwrap();
        let b = sample_bonds(&w, 0.37, &mut rng(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_open_fraction_within_three_sigma() {
        let w = build_window(LatticeKind::Square, 4, 1).unwrap();
        let p = 0.3;
        let samples = 100_000;
        let mut r = rng(7);
        let mut opens = 0u64;
        for _ in 0..samples {
            let bonds = sample_bonds(&w, p, &mut r).unwrap();
            opens += bonds.open.iter().filter(|&&o| o).count() as u64;
        }
        let total = (samples * w.edge_count()) as f64;
        let frac = opens as f64 / total;
        let sigma = (p * (1.0 - p) / total).sqrt();
        assert!(
            (frac - p).abs() < 3.0 * sigma,
            "fraction {frac} vs p={p}, sigma={sigma}"
        );
    }

    fn bfs_labels(window: &LatticeWindow, bonds: &BondConfig) -> Vec<u32> {
        // Independent labeling: breadth-first search over open edges only.
        let n = window.vertex_count as usize;
        let mut open_adj = vec![Vec::new(); n];
        for (&(a, b), &open) in window.edges.iter().zip(&bonds.open) {
            if open {
                open_adj[a as usize].push(b);
                open_adj[b as usize].push(a);
            }
        }
        let mut rep = vec![u32::MAX; n];
        for start in 0..n {
            if rep[start] != u32::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start as u32]);
            rep[start] = start as u32;
            while let Some(v) = queue.pop_front() {
                for &w in &open_adj[v as usize] {
                    if rep[w as usize] == u32::MAX {
                        rep[w as usize] = start as u32;
                        queue.push_back(w);
                    }
                }
            }
        }
        rep
    }

    #[test]
    fn all_closed_gives_singletons() {
        let w = build_window(LatticeKind::Square, 2, 1).unwrap();
        let bonds = sample_bonds(&w, 0.0, &mut rng(3)).unwrap();
        let labels = label_clusters(&w, &bonds).unwrap();
        assert_eq!(labels.cluster_count, w.vertex_count);
        for v in 0..w.vertex_count {
            assert_eq!(labels.rep[v as usize], v);
        }
    }

    #[test]
    fn all_open_gives_single_cluster() {
        for kind in [LatticeKind::Square, LatticeKind::Hexagonal] {
            let w = build_window(kind, 2, 1).unwrap();
            let bonds = sample_bonds(&w, 1.0, &mut rng(3)).unwrap();
            let labels = label_clusters(&w, &bonds).unwrap();
            assert_eq!(labels.cluster_count, 1);
            assert!(labels.rep.iter().all(|&r| r == 0));
        }
    }

    #[test]
    fn labels_match_bfs_oracle() {
        for kind in [LatticeKind::Square, LatticeKind::Hexagonal] {
            let w = build_window(kind, 3, 1).unwrap();
            let mut r = rng(11);
            for _ in 0..50 {
                let bonds = sample_bonds(&w, 0.5, &mut r).unwrap();
                let labels = label_clusters(&w, &bonds).unwrap();
                assert_eq!(labels.rep, bfs_labels(&w, &bonds));
                let distinct = labels
                    .rep
                    .iter()
                    .enumerate()
                    .filter(|&(v, &r)| v as u32 == r)
                    .count();
                assert_eq!(distinct as u32, labels.cluster_count);
            }
        }
    }

    #[test]
    fn rep_is_idempotent_and_minimal() {
        let w = build_window(LatticeKind::Square, 4, 1).unwrap();
        let bonds = sample_bonds(&w, 0.45, &mut rng(21)).unwrap();
        let labels = label_clusters(&w, &bonds).unwrap();
        for v in 0..w.vertex_count {
            let r = labels.rep[v as usize];
            assert!(r <= v);
            assert_eq!(labels.rep[r as usize], r);
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let w = build_window(LatticeKind::Square, 2, 1).unwrap();
        let bonds = BondConfig { open: vec![false] };
        assert!(label_clusters(&w, &bonds).is_err());
        let labels = ClusterLabels {
            rep: vec![0],
            cluster_count: 1,
        };
        assert!(detect_f(&w, &labels).is_err());
    }

    #[test]
    fn f_event_degenerate_cases() {
        let w = build_window(LatticeKind::Square, 3, 2).unwrap();
        let closed = label_clusters(&w, &sample_bonds(&w, 0.0, &mut rng(5)).unwrap()).unwrap();
        assert!(!detect_f(&w, &closed).unwrap());
        let open = label_clusters(&w, &sample_bonds(&w, 1.0, &mut rng(5)).unwrap()).unwrap();
        assert!(detect_f(&w, &open).unwrap());
    }

    #[test]
    fn f_event_is_monotone_in_the_configuration() {
        let w = build_window(LatticeKind::Square, 3, 1).unwrap();
        let mut r = rng(17);
        for _ in 0..200 {
            let lower = sample_bonds(&w, 0.3, &mut r).unwrap();
            let mut upper = lower.clone();
            for slot in upper.open.iter_mut() {
                if !*slot && r.gen::<f64>() < 0.2 {
                    *slot = true;
                }
            }
            let f_lower = detect_f(&w, &label_clusters(&w, &lower).unwrap()).unwrap();
            let f_upper = detect_f(&w, &label_clusters(&w, &upper).unwrap()).unwrap();
            assert!(!f_lower || f_upper, "opening edges flipped F to false");
        }
    }

    // 4x3 grid with a hand-placed 2x1 rectangle R and margin 2 (so only the
    // grid corners count as far): small enough to enumerate every edge
    // configuration exactly.
    fn tiny_window() -> LatticeWindow {
        let cols = 4u32;
        let rows = 3u32;
        let index = |x: u32, y: u32| y * cols + x;
        let mut edges = Vec::new();
        for y in 0..rows {
            for x in 0..cols {
                if x + 1 < cols {
                    edges.push((index(x, y), index(x + 1, y)));
                }
                if y + 1 < rows {
                    edges.push((index(x, y), index(x, y + 1)));
                }
            }
        }
        let n = (cols * rows) as usize;
        let mut in_r = vec![false; n];
        in_r[index(1, 1) as usize] = true;
        in_r[index(2, 1) as usize] = true;
        WindowParts {
            kind: LatticeKind::Square,
            region: RegionSpec::new(1, 2).unwrap(),
            vertex_count: cols * rows,
            star_edges: edges.clone(),
            edges,
            in_s: vec![false; n],
            r_left: vec![false; n],
            r_right: vec![false; n],
            s_top: vec![false; n],
            s_bottom: vec![false; n],
            in_r,
        }
        .into_window()
        .unwrap()
    }

    #[test]
    fn f_probability_matches_exhaustive_enumeration() {
        let w = tiny_window();
        let p = 0.5f64;
        let m = w.edge_count();
        assert!(m <= 20, "enumeration requires a tiny window");

        // Exact P(F) by enumerating all configurations and checking the
        // cluster condition by BFS, independently of detect_f.
        let mut exact = 0.0f64;
        for mask in 0u32..(1 << m) {
            let bonds = BondConfig {
                open: (0..m).map(|e| mask >> e & 1 == 1).collect(),
            };
            let rep = bfs_labels(&w, &bonds);
            let n = w.vertex_count as usize;
            let mut touches_r = vec![false; n];
            let mut reaches_far = vec![false; n];
            let mut f = false;
            for v in 0..n {
                let r = rep[v] as usize;
                if w.in_r[v] {
                    touches_r[r] = true;
                }
                if w.dist_to_r[v] >= w.region.ell {
                    reaches_far[r] = true;
                }
            }
            for v in 0..n {
                f |= touches_r[v] && reaches_far[v];
            }
            if f {
                let opens = (mask.count_ones()) as i32;
                exact += p.powi(opens) * (1.0 - p).powi(m as i32 - opens);
            }
        }

        let samples = 100_000u32;
        let mut r = rng(23);
        let mut hits = 0u32;
        for _ in 0..samples {
            let bonds = sample_bonds(&w, p, &mut r).unwrap();
            let labels = label_clusters(&w, &bonds).unwrap();
            if detect_f(&w, &labels).unwrap() {
                hits += 1;
            }
        }
        let est = hits as f64 / samples as f64;
        let sigma = (exact * (1.0 - exact) / samples as f64).sqrt();
        assert!(
            (est - exact).abs() < 3.0 * sigma,
            "estimate {est} vs exact {exact} (sigma {sigma})"
        );
    }
}
