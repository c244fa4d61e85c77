//! Identity measures: the optimal truth-to-result match and the IDP, IDR and
//! IDF1 scores derived from it.
//!
//! The bipartite graph has one row per true trajectory plus one false-positive
//! node `f⁺` per computed trajectory, and one column per computed trajectory
//! plus one false-negative node `f⁻` per true trajectory. Every cost is a
//! frame count, so the whole pipeline runs on integers.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min_cost_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{is_miss, overlaps, PairCost};
use crate::model::{CameraId, Frame, Observation, Scenario};

/// Label of the irregular node standing in for a missing computed partner.
pub const FN_TAG: &str = "FN";
/// Label of the irregular node standing in for a missing true partner.
pub const FP_TAG: &str = "FP";

/// Dense cost matrix for the truth-to-result graph plus the sparse table of
/// regular pairs that share at least one overlapping site.
#[derive(Debug, Clone)]
pub struct IdGraph {
    pub matrix: CostMatrix<i64>,
    pub n_truth: usize,
    pub n_computed: usize,
    /// `(truth index, computed index) -> number of matching sites`.
    pub overlaps: HashMap<(u32, u32), u64>,
    truth_len: Vec<u64>,
    computed_len: Vec<u64>,
}

impl IdGraph {
    pub fn pair_cost(&self, truth: usize, computed: usize) -> PairCost {
        let hits = self
            .overlaps
            .get(&(truth as u32, computed as u32))
            .copied()
            .unwrap_or(0);
        PairCost {
            fn_count: self.truth_len[truth] - hits,
            fp_count: self.computed_len[computed] - hits,
        }
    }
}

/// Counts, for every (truth, computed) pair, the sites where both are present
/// and pass the overlap test.
fn count_overlaps(scenario: &Scenario) -> Result<HashMap<(u32, u32), u64>> {
    let mode = scenario.mode();
    let mut by_camera: BTreeMap<CameraId, CameraEntries<'_>> = BTreeMap::new();
    for (i, t) in scenario.truth().iter().enumerate() {
        for o in t.observations() {
            by_camera
                .entry(o.site.camera)
                .or_default()
                .0
                .push((o.site.frame, i as u32, o));
        }
    }
    for (j, g) in scenario.computed().iter().enumerate() {
        for o in g.observations() {
            by_camera
                .entry(o.site.camera)
                .or_default()
                .1
                .push((o.site.frame, j as u32, o));
        }
    }

    let partial = by_camera
        .into_par_iter()
        .map(|(_, (mut truth, mut computed))| {
            truth.sort_unstable_by_key(|e| (e.0, e.1));
            computed.sort_unstable_by_key(|e| (e.0, e.1));
            let mut hits: HashMap<(u32, u32), u64> = HashMap::new();
            let (mut i, mut j) = (0, 0);
            while i < truth.len() && j < computed.len() {
                let (ft, fc) = (truth[i].0, computed[j].0);
                if ft < fc {
                    i += 1;
                } else if fc < ft {
                    j += 1;
                } else {
                    let i_end = i + truth[i..].iter().take_while(|e| e.0 == ft).count();
                    let j_end = j + computed[j..].iter().take_while(|e| e.0 == ft).count();
                    for &(_, ti, a) in &truth[i..i_end] {
                        for &(_, ci, b) in &computed[j..j_end] {
                            if overlaps(a, b, mode)? {
                                *hits.entry((ti, ci)).or_default() += 1;
                            }
                        }
                    }
                    i = i_end;
                    j = j_end;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total: HashMap<(u32, u32), u64> = HashMap::new();
    for part in partial {
        for (k, v) in part {
            *total.entry(k).or_default() += v;
        }
    }
    Ok(total)
}

type CameraEntries<'a> = (
    Vec<(Frame, u32, &'a Observation)>,
    Vec<(Frame, u32, &'a Observation)>,
);

/// Builds the square `(|truth| + |computed|)` cost matrix.
///
/// Regular pairs that never overlap get `len(τ) + len(γ)`, the same total as
/// sending both to their irregular nodes, so optima are unchanged. Pairings
/// with another trajectory's irregular node get a sentinel larger than any
/// feasible total.
pub fn build_id_graph(scenario: &Scenario) -> Result<IdGraph> {
    let truth_len: Vec<u64> = scenario.truth().iter().map(|t| t.len() as u64).collect();
    let computed_len: Vec<u64> = scenario.computed().iter().map(|g| g.len() as u64).collect();
    let (nt, nc) = (truth_len.len(), computed_len.len());
    let n = nt + nc;
    let overlaps = count_overlaps(scenario)?;

    let forbidden = (truth_len.iter().sum::<u64>() + computed_len.iter().sum::<u64>() + 1) as i64;
    let mut data = vec![forbidden; n * n];
    for i in 0..nt {
        let row = &mut data[i * n..(i + 1) * n];
        for (j, &lc) in computed_len.iter().enumerate() {
            row[j] = (truth_len[i] + lc) as i64;
        }
        row[nc + i] = truth_len[i] as i64;
    }
    for (&(i, j), &hits) in &overlaps {
        data[i as usize * n + j as usize] -= 2 * hits as i64;
    }
    for j in 0..nc {
        let row = &mut data[(nt + j) * n..(nt + j + 1) * n];
        row[j] = computed_len[j] as i64;
        row[nc..].fill(0);
    }

    Ok(IdGraph {
        matrix: CostMatrix::square(n, data)?,
        n_truth: nt,
        n_computed: nc,
        overlaps,
        truth_len,
        computed_len,
    })
}

/// One line of the truth-to-result mapping. `None` marks an irregular partner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth: Option<String>,
    pub computed: Option<String>,
    pub fn_count: u64,
    pub fp_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthToResultMatch {
    /// Every truth identity then every unmatched computed identity, once each.
    /// `(f⁺, f⁻)` pairs are tallied in `idtn` only.
    pub pairs: Vec<MatchedPair>,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub idtn: u64,
    /// Minimum total cost of the bipartite match, `IDFP + IDFN`.
    pub total_cost: u64,
    /// `γ_m`, by trajectory index: the computed partner of each true trajectory.
    pub gamma_m: Vec<Option<usize>>,
    /// `τ_m`, by trajectory index: the true partner of each computed trajectory.
    pub tau_m: Vec<Option<usize>>,
}

impl TruthToResultMatch {
    /// Indices of the matched true trajectories (`MT`).
    pub fn matched_truth(&self) -> impl Iterator<Item = usize> + '_ {
        self.gamma_m
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|_| i))
    }

    /// Indices of the matched computed trajectories (`MC`).
    pub fn matched_computed(&self) -> impl Iterator<Item = usize> + '_ {
        self.tau_m
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|_| j))
    }

    /// Writes `truth_id,computed_id,fn,fp` lines, with `FP`/`FN` standing in
    /// for irregular partners.
    pub fn write_mapping(&self, mut out: impl Write) -> std::io::Result<()> {
        for p in &self.pairs {
            writeln!(
                out,
                "{},{},{},{}",
                p.truth.as_deref().unwrap_or(FP_TAG),
                p.computed.as_deref().unwrap_or(FN_TAG),
                p.fn_count,
                p.fp_count
            )?;
        }
        Ok(())
    }
}

/// Solves the truth-to-result graph and classifies every selected pair.
///
/// A regular pair selected with no overlapping site costs exactly as much as
/// its two irregular alternatives; it is reported as one false-negative and
/// one false-positive identity rather than as a match.
pub fn match_truth_to_result(scenario: &Scenario) -> Result<TruthToResultMatch> {
    let graph = build_id_graph(scenario)?;
    let assignment = solve_min_cost_assignment(&graph.matrix);
    let (nt, nc) = (graph.n_truth, graph.n_computed);

    let mut gamma_m = vec![None; nt];
    let mut tau_m = vec![None; nc];
    for (row, col) in assignment.pairs().take(nt) {
        if col < nc && graph.overlaps.contains_key(&(row as u32, col as u32)) {
            gamma_m[row] = Some(col);
            tau_m[col] = Some(row);
        }
    }

    let mut pairs = Vec::with_capacity(nt + nc);
    let (mut idfn, mut idfp) = (0, 0);
    for (i, t) in scenario.truth().iter().enumerate() {
        let (computed, cost) = match gamma_m[i] {
            Some(j) => (
                Some(scenario.computed()[j].identity().to_owned()),
                graph.pair_cost(i, j),
            ),
            None => (
                None,
                PairCost {
                    fn_count: graph.truth_len[i],
                    fp_count: 0,
                },
            ),
        };
        idfn += cost.fn_count;
        idfp += cost.fp_count;
        pairs.push(MatchedPair {
            truth: Some(t.identity().to_owned()),
            computed,
            fn_count: cost.fn_count,
            fp_count: cost.fp_count,
        });
    }
    for (j, g) in scenario.computed().iter().enumerate() {
        if tau_m[j].is_none() {
            idfp += graph.computed_len[j];
            pairs.push(MatchedPair {
                truth: None,
                computed: Some(g.identity().to_owned()),
                fn_count: 0,
                fp_count: graph.computed_len[j],
            });
        }
    }

    let total_cost = idfn + idfp;
    debug_assert_eq!(total_cost as i64, assignment.total_cost);
    let total_truth: u64 = graph.truth_len.iter().sum();
    let matched = gamma_m.iter().flatten().count() as u64;
    Ok(TruthToResultMatch {
        pairs,
        idtp: total_truth - idfn,
        idfp,
        idfn,
        // each matched pair frees one f⁺ row for an f⁻ column
        idtn: matched,
        total_cost,
        gamma_m,
        tau_m,
    })
}

/// An exact fraction; zero denominators are kept as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    /// The value, or 0 for a zero denominator.
    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdScores {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl IdScores {
    pub fn from_counts(idtp: u64, idfp: u64, idfn: u64) -> Self {
        IdScores {
            idp: Ratio::new(idtp, idtp + idfp).value(),
            idr: Ratio::new(idtp, idtp + idfn).value(),
            idf1: Ratio::new(2 * idtp, 2 * idtp + idfp + idfn).value(),
            idtp,
            idfp,
            idfn,
        }
    }

    pub fn precision_ratio(&self) -> Ratio {
        Ratio::new(self.idtp, self.idtp + self.idfp)
    }

    pub fn recall_ratio(&self) -> Ratio {
        Ratio::new(self.idtp, self.idtp + self.idfn)
    }
}

/// IDP, IDR and IDF1. Any zero denominator yields a score of 0.
pub fn id_scores(m: &TruthToResultMatch) -> IdScores {
    IdScores::from_counts(m.idtp, m.idfp, m.idfn)
}

/// Ground-truth and tracker-output coverage, computed site by site from the
/// match's bijection alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub truth: Ratio,
    pub computed: Ratio,
}

pub fn coverage_oracle(scenario: &Scenario, m: &TruthToResultMatch) -> Result<Coverage> {
    let (truth, computed) = (scenario.truth(), scenario.computed());
    if m.gamma_m.len() != truth.len() || m.tau_m.len() != computed.len() {
        return Err(Error::validation("match does not belong to this scenario"));
    }
    let mode = scenario.mode();

    let mut covered_t = 0u64;
    for (i, j) in m
        .gamma_m
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
    {
        let (tau, gamma) = (&truth[i], &computed[j]);
        let mut misses = 0u64;
        for o in tau.observations() {
            misses += u64::from(is_miss(Some(o), gamma.at(o.site), mode)?);
        }
        covered_t += tau.len() as u64 - misses;
    }
    let mut covered_c = 0u64;
    for (j, i) in m
        .tau_m
        .iter()
        .enumerate()
        .filter_map(|(j, i)| i.map(|i| (j, i)))
    {
        let (tau, gamma) = (&truth[i], &computed[j]);
        let mut misses = 0u64;
        for o in gamma.observations() {
            misses += u64::from(is_miss(tau.at(o.site), Some(o), mode)?);
        }
        covered_c += gamma.len() as u64 - misses;
    }

    Ok(Coverage {
        truth: Ratio::new(covered_t, scenario.total_truth() as u64),
        computed: Ratio::new(covered_c, scenario.total_computed() as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pair_cost, BBox};
    use crate::model::{build_scenario, plain_cameras, Detection, OverlapMode};

    fn b() -> Option<BBox> {
        Some(BBox::new(0.0, 0.0, 10.0, 10.0))
    }

    fn scenario(truth: &[(&str, u32)], computed: &[(&str, u32)]) -> Scenario {
        let rows = |v: &[(&str, u32)]| -> Vec<Detection> {
            v.iter()
                .map(|&(id, f)| Detection::new(1, f, id, b(), None))
                .collect()
        };
        build_scenario(
            &rows(truth),
            &rows(computed),
            plain_cameras([1]),
            OverlapMode::iou(0.5),
        )
        .unwrap()
    }

    fn fig1(id1_frames: impl Fn(u32) -> bool) -> Scenario {
        let truth: Vec<_> = (1..=90).map(|f| ("A", f)).collect();
        let computed: Vec<_> = (1..=90)
            .map(|f| (if id1_frames(f) { "1" } else { "2" }, f))
            .collect();
        scenario(&truth, &computed)
    }

    #[test]
    fn switch_case_a_match() {
        let s = fig1(|f| f <= 60);
        let g = build_id_graph(&s).unwrap();
        assert_eq!(g.matrix.rows(), 3);
        let m = match_truth_to_result(&s).unwrap();
        assert_eq!(m.gamma_m, [Some(0)]);
        assert_eq!((m.idtp, m.idfn, m.idfp), (60, 30, 30));
        let sc = id_scores(&m);
        assert!((sc.idf1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((sc.idp - 2.0 / 3.0).abs() < 1e-12);
        assert!((sc.idr - 2.0 / 3.0).abs() < 1e-12);
        let cov = coverage_oracle(&s, &m).unwrap();
        assert_eq!(cov.truth, Ratio::new(60, 90));
        assert_eq!(cov.computed, Ratio::new(60, 90));
    }

    #[test]
    fn switch_case_c_variant() {
        let s = fig1(|f| f <= 75);
        let m = match_truth_to_result(&s).unwrap();
        assert_eq!(m.idfn, 15);
    }

    #[test]
    fn perfect_tracker() {
        let rows: Vec<_> = (1..=10)
            .map(|f| ("A", f))
            .chain((3..=8).map(|f| ("B", f)))
            .collect();
        let s = scenario(&rows, &rows);
        let g = build_id_graph(&s).unwrap();
        assert_eq!(g.matrix.get(0, 0), 0);
        assert_eq!(g.matrix.get(1, 1), 0);
        let m = match_truth_to_result(&s).unwrap();
        assert_eq!((m.idfp, m.idfn, m.idtp), (0, 0, 16));
        let cov = coverage_oracle(&s, &m).unwrap();
        assert_eq!(cov.truth.value(), 1.0);
        assert_eq!(cov.computed.value(), 1.0);
    }

    #[test]
    fn no_computed() {
        let s = scenario(&[("A", 1), ("A", 2), ("A", 3)], &[]);
        let g = build_id_graph(&s).unwrap();
        assert_eq!(g.matrix.rows(), 1);
        assert_eq!(g.matrix.get(0, 0), 3);
        let m = match_truth_to_result(&s).unwrap();
        assert_eq!((m.idtp, m.idfn, m.idfp), (0, 3, 0));
        assert_eq!(m.pairs[0].computed, None);
    }

    #[test]
    fn empty_scenario() {
        let s = scenario(&[], &[]);
        assert_eq!(build_id_graph(&s).unwrap().matrix.rows(), 0);
        let sc = id_scores(&match_truth_to_result(&s).unwrap());
        assert_eq!((sc.idp, sc.idr, sc.idf1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn graph_costs_agree_with_pair_cost() {
        let s = scenario(
            &[("A", 1), ("A", 2), ("A", 3), ("B", 2), ("B", 5)],
            &[("1", 2), ("1", 3), ("1", 9), ("2", 5), ("2", 6)],
        );
        let g = build_id_graph(&s).unwrap();
        for (i, t) in s.truth().iter().enumerate() {
            for (j, c) in s.computed().iter().enumerate() {
                let direct = pair_cost(Some(t), Some(c), s.mode()).unwrap();
                assert_eq!(g.pair_cost(i, j), direct);
                assert_eq!(g.matrix.get(i, j), direct.total() as i64);
            }
        }
    }

    #[test]
    fn unmatched_trajectories_count_fully() {
        // B never overlaps anything; 2 exists only in computed
        let s = scenario(
            &[("A", 1), ("A", 2), ("B", 7)],
            &[("1", 1), ("1", 2), ("2", 9)],
        );
        let m = match_truth_to_result(&s).unwrap();
        assert_eq!((m.idtp, m.idfn, m.idfp), (2, 1, 1));
        assert_eq!(m.matched_truth().collect::<Vec<_>>(), [0]);
        assert_eq!(m.matched_computed().collect::<Vec<_>>(), [0]);
        let mut out = Vec::new();
        m.write_mapping(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "A,1,0,0\nB,FN,1,0\nFP,2,0,1\n"
        );
    }

    #[test]
    fn swap_symmetry() {
        let s = fig1(|f| f % 3 != 0);
        let a = id_scores(&match_truth_to_result(&s).unwrap());
        let b = id_scores(&match_truth_to_result(&s.swapped()).unwrap());
        assert_eq!(a.idp, b.idr);
        assert_eq!(a.idr, b.idp);
        assert_eq!(a.idf1, b.idf1);
    }

    #[test]
    fn harmonic_mean_identity() {
        let (p, r): (f64, f64) = (0.7917, 0.4497);
        let f1 = 2.0 * p * r / (p + r);
        assert!((f1 - 0.5736).abs() < 1e-4);
    }
}
