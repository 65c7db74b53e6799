//! Experiment orchestration: independent trials, order-statistic confidence
//! intervals, and margin calibration.
//!
//! Trial `i` draws its own generator from a fixed 64-bit mix of the master
//! seed and the trial index, so results are bit-identical for a given
//! configuration no matter how trials are scheduled across threads.

use std::collections::{HashSet, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonds::{detect_f, label_clusters, sample_bonds, BondConfig, ClusterLabels};
use crate::coupling::{assign_uniforms, compute_thresholds, ThresholdPair, UniformAssignment};
use crate::error::{Error, Result};
use crate::lattice::{build_window, LatticeKind, LatticeWindow};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the generator feeding one trial (or any other derived stream).
/// The map `index -> seed` is injective for a fixed master seed.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// The per-trial generator. ChaCha output is identical across platforms.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Full parameter set of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lattice: LatticeKind,
    pub p: f64,
    pub s: u32,
    pub ell: u32,
    pub n: u32,
    pub m: u32,
    pub epsilon: f64,
    pub q: f64,
    pub master_seed: u64,
    /// Worker threads; zero picks the default pool size.
    pub jobs: usize,
    /// Densities at or above the bond threshold make the criterion vacuous
    /// (the critical coloring level is zero there); require an explicit
    /// override to run anyway.
    pub allow_supercritical: bool,
    /// Optional cap on estimated memory; falls back to the system's
    /// available memory when unset.
    pub memory_budget: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(lattice: LatticeKind, p: f64, s: u32, ell: u32) -> Self {
        ExperimentConfig {
            lattice,
            p,
            s,
            ell,
            n: 400,
            m: 373,
            epsilon: 1e-6,
            q: crate::binom::DEFAULT_CRITERION_Q,
            master_seed: 0,
            jobs: 0,
            allow_supercritical: false,
            memory_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::lattice::RegionSpec::new(self.s, self.ell)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!(
                "edge density p must lie in [0, 1], got {}",
                self.p
            )));
        }
        let pc = self.lattice.bond_pc();
        if self.p >= pc && !self.allow_supercritical {
            return Err(Error::InvalidParameter(format!(
                "p = {} is at or above the bond threshold {pc:.6} of {}; \
                 the interval method needs p < pc (override to run anyway)",
                self.p, self.lattice
            )));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.m < 1 || self.m > self.n {
            return Err(Error::InvalidParameter(format!(
                "m must satisfy 1 <= m <= n, got m={}, n={}",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Thresholds of one trial plus its private stream seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u32,
    pub r1: f64,
    pub r1_star: f64,
    pub f_hit: bool,
    pub substream_seed: u64,
}

/// The confidence interval `[1 - r*_(m), r_(m)]` with degeneracy flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub lower: f64,
    pub upper: f64,
    pub f_count: u32,
    /// True when the interval is the uninformative [0, 1] or inverted
    /// (lower > upper, possible with probability below epsilon). Reported
    /// as-is, never clamped.
    pub degenerate: bool,
}

/// Everything one trial produces, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub bonds: BondConfig,
    pub labels: ClusterLabels,
    pub f_hit: bool,
    pub uniforms: UniformAssignment,
    pub thresholds: ThresholdPair,
}

/// Runs the full pipeline of one trial from its substream seed: sample
/// bonds, label clusters, test the long-connection event, draw cluster
/// uniforms, and sweep out both thresholds.
pub fn run_trial_detailed(window: &LatticeWindow, p: f64, seed: u64) -> Result<TrialData> {
    let mut rng = trial_rng(seed);
    let bonds = sample_bonds(window, p, &mut rng)?;
    let labels = label_clusters(window, &bonds)?;
    let f_hit = detect_f(window, &labels)?;
    let uniforms = assign_uniforms(&labels, &mut rng);
    let thresholds = compute_thresholds(window, &labels, &uniforms, f_hit)?;
    Ok(TrialData {
        bonds,
        labels,
        f_hit,
        uniforms,
        thresholds,
    })
}

/// Bytes of scratch one concurrent trial needs on top of the shared window.
pub fn estimate_trial_memory(window: &LatticeWindow) -> u64 {
    let n = window.vertex_count as u64;
    let e = window.edge_count() as u64;
    // bonds + labels + uniforms + grouping arrays + activity + four
    // union-find structures over vertices plus terminals.
    e + 4 * n + 8 * n + 16 * n + n + 4 * (8 * (n + 2))
}

/// Bytes held by the immutable window itself.
pub fn estimate_window_memory(window: &LatticeWindow) -> u64 {
    let n = window.vertex_count as u64;
    let e = window.edge_count() as u64;
    let se = window.star_edges.len() as u64;
    // edge lists, both adjacency structures, flags, distances.
    8 * e + 8 * se + (16 * e + 16 * se + 8 * n) + 6 * n + 4 * n
}

fn available_memory_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("MemAvailable:") {
            let kb: u64 = rest.trim().trim_end_matches(" kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

/// Runs `config.n` independent trials and returns their records ordered by
/// trial index. Bit-identical output for identical configurations, whatever
/// the thread count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let window = build_window(config.lattice, config.s, config.ell)?;

    let workers = if config.jobs == 0 {
        rayon::current_num_threads()
    } else {
        config.jobs
    };
    let estimate =
        estimate_window_memory(&window) + workers as u64 * estimate_trial_memory(&window);
    let budget = config.memory_budget.or_else(available_memory_bytes);
    if let Some(budget) = budget {
        if estimate > budget {
            return Err(Error::WindowTooLarge(format!(
                "estimated {estimate} bytes for s={}, ell={} with {workers} workers \
                 exceeds the budget of {budget} bytes",
                config.s, config.ell
            )));
        }
    }

    let seeds: Vec<u64> = (0..config.n)
        .map(|i| substream_seed(config.master_seed, i as u64))
        .collect();
    let distinct: HashSet<u64> = seeds.iter().copied().collect();
    assert_eq!(
        distinct.len(),
        seeds.len(),
        "substream seeds collided; the mixing function must be injective"
    );

    let run_all = |window: &LatticeWindow| -> Result<Vec<TrialRecord>> {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| {
                let data = run_trial_detailed(window, config.p, seed)?;
                Ok(TrialRecord {
                    index: i as u32,
                    r1: data.thresholds.r1,
                    r1_star: data.thresholds.r1_star,
                    f_hit: data.f_hit,
                    substream_seed: seed,
                })
            })
            .collect()
    };

    if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
        pool.install(|| run_all(&window))
    } else {
        run_all(&window)
    }
}

fn kth_smallest(values: &[f64], m: u32) -> f64 {
    let mut scratch = values.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(m as usize - 1, f64::total_cmp);
    *kth
}

/// Forms `[1 - r*_(m), r_(m)]` from the m-th smallest thresholds
/// (1-indexed) of the two families.
pub fn confidence_interval(records: &[TrialRecord], m: u32) -> Result<IntervalResult> {
    if m < 1 || m as usize > records.len() {
        return Err(Error::InvalidParameter(format!(
            "order-statistic rank m={m} out of range for {} trials",
            records.len()
        )));
    }
    let r1: Vec<f64> = records.iter().map(|t| t.r1).collect();
    let r1_star: Vec<f64> = records.iter().map(|t| t.r1_star).collect();
    let upper = kth_smallest(&r1, m);
    let star_m = kth_smallest(&r1_star, m);
    // Per-trial dominance carries over to order statistics.
    if records.iter().all(|t| t.r1_star <= t.r1) {
        assert!(
            star_m <= upper,
            "order-statistic dominance violated: {star_m} > {upper}"
        );
    }
    let lower = 1.0 - star_m;
    let f_count = records.iter().filter(|t| t.f_hit).count() as u32;
    let degenerate = (lower == 0.0 && upper == 1.0) || lower > upper;
    Ok(IntervalResult {
        lower,
        upper,
        f_count,
        degenerate,
    })
}

/// Outcome of a margin calibration: the selected `ell`, the matching `s`,
/// and the certified estimate of the long-connection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ell: u32,
    pub s: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u32,
}

// Whether the long-connection event holds in a lazily sampled edge
// configuration: breadth-first search from the far vertex set through open
// edges, where each edge's uniform is a fixed hash of (seed, edge index).
// Equal in law to sampling the whole configuration up front.
fn lazy_f_event(
    window: &LatticeWindow,
    p: f64,
    seed: u64,
    far: &[u32],
    visited: &mut [u32],
    stamp: u32,
    queue: &mut VecDeque<u32>,
) -> bool {
    for &start in far {
        if visited[start as usize] == stamp {
            continue;
        }
        visited[start as usize] = stamp;
        queue.clear();
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for (w, e) in window.bond_adj.neighbor_edges(v) {
                if visited[w as usize] == stamp {
                    continue;
                }
                if unit_f64(substream_seed(seed, e as u64)) < p {
                    if window.in_r[w as usize] {
                        return true;
                    }
                    visited[w as usize] = stamp;
                    queue.push_back(w);
                }
            }
        }
    }
    false
}

/// Monte Carlo estimate of the long-connection probability for one window.
/// Exposed for cross-checking the calibration path against the full trial
/// pipeline.
pub fn estimate_f_probability(
    window: &LatticeWindow,
    p: f64,
    trials: u32,
    seed: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge density p must lie in [0, 1], got {p}"
        )));
    }
    let far: Vec<u32> = (0..window.vertex_count)
        .filter(|&v| window.dist_to_r[v as usize] >= window.region.ell)
        .collect();
    let mut visited = vec![0u32; window.vertex_count as usize];
    let mut queue = VecDeque::new();
    let mut hits = 0u64;
    for t in 0..trials {
        let trial_seed = substream_seed(seed, t as u64);
        if lazy_f_event(window, p, trial_seed, &far, &mut visited, t + 1, &mut queue) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Finds the smallest margin `ell` in `[1, (L-2)/2]` whose estimated
/// long-connection probability over `trials` samples is at most `target`,
/// building each candidate window with `s = L - 2*ell`. Candidates are
/// abandoned as soon as their hit count can no longer meet the target; the
/// returned `ell` is certified by its own full-sample estimate.
pub fn calibrate_ell<R: RngCore + ?Sized>(
    lattice: LatticeKind,
    p: f64,
    l: u32,
    target: f64,
    trials: u32,
    rng: &mut R,
) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&p) || p >= lattice.bond_pc() {
        return Err(Error::InvalidParameter(format!(
            "calibration requires 0 <= p < pc, got p={p} on {lattice}"
        )));
    }
    if l < 6 {
        return Err(Error::InvalidParameter(format!(
            "calibration requires L >= 6, got {l}"
        )));
    }
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!(
            "calibration requires at least 1000 trials, got {trials}"
        )));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target probability must lie in (0, 1), got {target}"
        )));
    }

    let master = rng.next_u64();
    let max_hits = (target * trials as f64).floor() as u64;
    let max_ell = (l - 2) / 2;
    for ell in 1..=max_ell {
        let s = l - 2 * ell;
        let window = build_window(lattice, s, ell)?;
        let far: Vec<u32> = (0..window.vertex_count)
            .filter(|&v| window.dist_to_r[v as usize] >= ell)
            .collect();
        let seed_base = substream_seed(master, ell as u64);
        let mut visited = vec![0u32; window.vertex_count as usize];
        let mut queue = VecDeque::new();
        let mut hits = 0u64;
        let mut aborted = false;
        for t in 0..trials {
            let trial_seed = substream_seed(seed_base, t as u64);
            if lazy_f_event(&window, p, trial_seed, &far, &mut visited, t + 1, &mut queue) {
                hits += 1;
                if hits > max_hits {
                    aborted = true;
                    break;
                }
            }
        }
        if !aborted {
            let estimate = hits as f64 / trials as f64;
            let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
            return Ok(Calibration {
                ell,
                s,
                estimate,
                std_error,
                trials,
            });
        }
    }
    Err(Error::CalibrationFailed(format!(
        "no margin in [1, {max_ell}] meets the target {target} at p={p} on {lattice} (L={l})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substream_seeds_are_deterministic_and_distinct() {
        let a = substream_seed(42, 7);
        let b = substream_seed(42, 7);
        assert_eq!(a, b);
        let seeds: HashSet<u64> = (0..10_000).map(|i| substream_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(substream_seed(42, 0), substream_seed(43, 0));
    }

    #[test]
    fn saturated_config_degenerates_to_unit_interval() {
        let mut config = ExperimentConfig::new(LatticeKind::Square, 1.0, 4, 1);
        config.n = 12;
        config.m = 10;
        config.allow_supercritical = true;
        config.master_seed = 5;
        let records = run_trials(&config).unwrap();
        assert!(records.iter().all(|t| t.f_hit && t.r1 == 1.0 && t.r1_star == 1.0));
        let interval = confidence_interval(&records, config.m).unwrap();
        assert_eq!(interval.lower, 0.0);
        assert_eq!(interval.upper, 1.0);
        assert!(interval.degenerate);
        assert_eq!(interval.f_count, 12);
    }

    #[test]
    fn empty_lattice_never_hits_f() {
        let mut config = ExperimentConfig::new(LatticeKind::Square, 0.0, 6, 1);
        config.n = 20;
        config.m = 18;
        config.master_seed = 9;
        let records = run_trials(&config).unwrap();
        assert!(records.iter().all(|t| !t.f_hit));
        assert!(records.iter().all(|t| t.r1_star <= t.r1));
    }

    #[test]
    fn schedules_do_not_change_results() {
        let mut config = ExperimentConfig::new(LatticeKind::Hexagonal, 0.3, 8, 2);
        config.n = 24;
        config.m = 20;
        config.master_seed = 1234;
        config.jobs = 1;
        let serial = run_trials(&config).unwrap();
        config.jobs = 8;
        let parallel = run_trials(&config).unwrap();
        assert_eq!(serial, parallel);
        for (i, t) in serial.iter().enumerate() {
            assert_eq!(t.index, i as u32);
            assert_eq!(t.substream_seed, substream_seed(1234, i as u64));
        }
    }

    #[test]
    fn supercritical_requires_override() {
        let config = ExperimentConfig::new(LatticeKind::Square, 0.6, 4, 1);
        assert!(run_trials(&config).is_err());
        let mut allowed = config;
        allowed.allow_supercritical = true;
        allowed.n = 2;
        allowed.m = 1;
        assert!(run_trials(&allowed).is_ok());
    }

    #[test]
    fn memory_budget_rejects_before_running() {
        let mut config = ExperimentConfig::new(LatticeKind::Square, 0.2, 50, 2);
        config.n = 4;
        config.m = 2;
        config.memory_budget = Some(1024);
        match run_trials(&config) {
            Err(Error::WindowTooLarge(_)) => {}
            other => panic!("expected WindowTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn interval_from_known_records() {
        let mk = |i: u32, r1: f64, r1_star: f64| TrialRecord {
            index: i,
            r1,
            r1_star,
            f_hit: false,
            substream_seed: i as u64,
        };
        let records = vec![mk(0, 0.5, 0.4), mk(1, 0.7, 0.3), mk(2, 0.6, 0.45)];
        let interval = confidence_interval(&records, 2).unwrap();
        assert_eq!(interval.upper, 0.6);
        assert_eq!(interval.lower, 1.0 - 0.4);
        assert!(!interval.degenerate);
        assert!(confidence_interval(&records, 0).is_err());
        assert!(confidence_interval(&records, 4).is_err());
    }

    #[test]
    fn selection_matches_full_sort() {
        let mut rng = trial_rng(77);
        for _ in 0..50 {
            let n = 1 + (rng.next_u32() % 40) as usize;
            let records: Vec<TrialRecord> = (0..n)
                .map(|i| {
                    let r1_star = rng.gen::<f64>();
                    TrialRecord {
                        index: i as u32,
                        r1: r1_star + (1.0 - r1_star) * rng.gen::<f64>(),
                        r1_star,
                        f_hit: false,
                        substream_seed: i as u64,
                    }
                })
                .collect();
            let m = 1 + (rng.next_u32() as usize % n) as u32;
            let interval = confidence_interval(&records, m).unwrap();
            let mut sorted_r1: Vec<f64> = records.iter().map(|t| t.r1).collect();
            sorted_r1.sort_by(f64::total_cmp);
            let mut sorted_star: Vec<f64> = records.iter().map(|t| t.r1_star).collect();
            sorted_star.sort_by(f64::total_cmp);
            assert_eq!(interval.upper.to_bits(), sorted_r1[m as usize - 1].to_bits());
            assert_eq!(
                interval.lower.to_bits(),
                (1.0 - sorted_star[m as usize - 1]).to_bits()
            );
        }
    }

    #[test]
    fn calibration_on_the_empty_lattice_picks_the_smallest_margin() {
        let mut rng = trial_rng(3);
        let cal = calibrate_ell(LatticeKind::Square, 0.0, 40, 0.001, 1000, &mut rng).unwrap();
        assert_eq!(cal.ell, 1);
        assert_eq!(cal.s, 38);
        assert_eq!(cal.estimate, 0.0);
        assert_eq!(cal.std_error, 0.0);
    }

    #[test]
    fn calibration_rejects_bad_inputs() {
        let mut rng = trial_rng(3);
        assert!(calibrate_ell(LatticeKind::Square, 0.6, 40, 0.001, 1000, &mut rng).is_err());
        assert!(calibrate_ell(LatticeKind::Square, 0.1, 4, 0.001, 1000, &mut rng).is_err());
        assert!(calibrate_ell(LatticeKind::Square, 0.1, 40, 0.001, 10, &mut rng).is_err());
        assert!(calibrate_ell(LatticeKind::Square, 0.1, 40, 0.0, 1000, &mut rng).is_err());
    }

    #[test]
    fn infeasible_targets_fail_cleanly() {
        let mut rng = trial_rng(5);
        match calibrate_ell(LatticeKind::Square, 0.45, 8, 1e-6, 1000, &mut rng) {
            Err(Error::CalibrationFailed(_)) => {}
            other => panic!("expected CalibrationFailed, got {other:?}"),
        }
    }

    #[test]
    fn lazy_sampler_agrees_with_the_trial_pipeline() {
        // Same window, two independent estimators of P(F): the lazy
        // edge-hash search and the full sample/label/detect pipeline.
        let window = build_window(LatticeKind::Square, 6, 2).unwrap();
        let p = 0.45;
        let trials = 20_000u32;
        let lazy = estimate_f_probability(&window, p, trials, 321).unwrap();

        let mut hits = 0u32;
        for t in 0..trials {
            let data = run_trial_detailed(&window, p, substream_seed(9876, t as u64)).unwrap();
            if data.f_hit {
                hits += 1;
            }
        }
        let pipeline = hits as f64 / trials as f64;
        let sigma = (lazy * (1.0 - lazy) / trials as f64
            + pipeline * (1.0 - pipeline) / trials as f64)
            .sqrt();
        assert!(
            (lazy - pipeline).abs() < 3.0 * sigma,
            "lazy {lazy} vs pipeline {pipeline} (sigma {sigma})"
        );
    }
}
