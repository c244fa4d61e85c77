//! Event-based baseline measures: per-frame CLEAR matching, fragmentations,
//! merges and their within-camera/handover split, MOTA, MOTP, MT/ML/FRG and
//! MCTA.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min_cost_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{gated_cost, iou};
use crate::model::{CameraId, Frame, Observation, OverlapMode, Scenario, Site};

/// Counts split by whether the two sites involved share a camera.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub within: u64,
    pub handover: u64,
}

impl Split {
    pub fn total(&self) -> u64 {
        self.within + self.handover
    }

    fn bump(&mut self, same_camera: bool) {
        if same_camera {
            self.within += 1;
        } else {
            self.handover += 1;
        }
    }
}

impl std::ops::Add for Split {
    type Output = Split;

    fn add(self, o: Split) -> Split {
        Split {
            within: self.within + o.within,
            handover: self.handover + o.handover,
        }
    }
}

/// One matched (truth, computed) detection pair at a site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMatch {
    pub site: Site,
    pub truth: usize,
    pub computed: usize,
    /// IoU in image mode, distance in meters on the ground plane.
    pub quality: f64,
}

/// Detection counts at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTally {
    pub site: Site,
    pub truth: u32,
    pub computed: u32,
    pub tp: u32,
}

impl FrameTally {
    pub fn fp(&self) -> u32 {
        self.computed - self.tp
    }

    pub fn fn_(&self) -> u32 {
        self.truth - self.tp
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearTallies {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Sum of IoU (image mode) or distance (ground mode) over true positives.
    pub quality_sum: f64,
}

/// Everything per-frame matching decided, kept for the scans that follow.
#[derive(Debug, Clone)]
pub struct ClearHistory {
    pub mode: OverlapMode,
    /// Sorted by site.
    pub matches: Vec<SiteMatch>,
    /// Sorted by site.
    pub frames: Vec<FrameTally>,
    /// For each true trajectory, the computed trajectory matched at each of its
    /// observations (aligned with `Trajectory::observations`).
    pub truth_assigned: Vec<Vec<Option<usize>>>,
    /// Same for computed trajectories.
    pub computed_assigned: Vec<Vec<Option<usize>>>,
    pub tallies: ClearTallies,
}

type Entry<'a> = (Frame, usize, usize, &'a Observation);

struct CameraOutcome {
    matches: Vec<(SiteMatch, usize, usize)>,
    frames: Vec<FrameTally>,
}

/// Frame-by-frame CLEAR matching, each camera on its own.
///
/// Matches carried over from the previous frame survive while still within
/// the overlap gate. The rest are assigned by minimum total cost (`1 − IoU`
/// or distance), gated by the same test.
pub fn clear_match(scenario: &Scenario) -> Result<ClearHistory> {
    let mode = scenario.mode();
    let mut by_camera: BTreeMap<CameraId, (Vec<Entry<'_>>, Vec<Entry<'_>>)> = BTreeMap::new();
    for (i, t) in scenario.truth().iter().enumerate() {
        for (k, o) in t.observations().iter().enumerate() {
            by_camera
                .entry(o.site.camera)
                .or_default()
                .0
                .push((o.site.frame, i, k, o));
        }
    }
    for (j, g) in scenario.computed().iter().enumerate() {
        for (k, o) in g.observations().iter().enumerate() {
            by_camera
                .entry(o.site.camera)
                .or_default()
                .1
                .push((o.site.frame, j, k, o));
        }
    }

    let outcomes = by_camera
        .into_par_iter()
        .map(|(camera, (t, c))| match_camera(camera, t, c, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut truth_assigned: Vec<Vec<Option<usize>>> = scenario
        .truth()
        .iter()
        .map(|t| vec![None; t.len()])
        .collect();
    let mut computed_assigned: Vec<Vec<Option<usize>>> = scenario
        .computed()
        .iter()
        .map(|g| vec![None; g.len()])
        .collect();
    let mut matches = Vec::new();
    let mut frames = Vec::new();
    let mut tallies = ClearTallies::default();
    for out in outcomes {
        for (m, kt, kc) in out.matches {
            truth_assigned[m.truth][kt] = Some(m.computed);
            computed_assigned[m.computed][kc] = Some(m.truth);
            tallies.quality_sum += m.quality;
            matches.push(m);
        }
        for f in out.frames {
            tallies.tp += u64::from(f.tp);
            tallies.fp += u64::from(f.fp());
            tallies.fn_ += u64::from(f.fn_());
            frames.push(f);
        }
    }
    matches.sort_by(|a, b| a.site.cmp(&b.site).then(a.truth.cmp(&b.truth)));
    frames.sort_by_key(|f| f.site);

    Ok(ClearHistory {
        mode,
        matches,
        frames,
        truth_assigned,
        computed_assigned,
        tallies,
    })
}

fn quality(a: &Observation, b: &Observation, mode: OverlapMode) -> f64 {
    match mode {
        OverlapMode::Iou { .. } => match (&a.bbox, &b.bbox) {
            (Some(x), Some(y)) => iou(x, y),
            _ => 0.0,
        },
        OverlapMode::GroundPlane { .. } => match (&a.world, &b.world) {
            (Some(x), Some(y)) => x.distance(y),
            _ => f64::INFINITY,
        },
    }
}

fn match_camera(
    camera: CameraId,
    mut truth: Vec<Entry<'_>>,
    mut computed: Vec<Entry<'_>>,
    mode: OverlapMode,
) -> Result<CameraOutcome> {
    truth.sort_unstable_by_key(|e| (e.0, e.1));
    computed.sort_unstable_by_key(|e| (e.0, e.1));

    // truth index -> computed index, carried across frames
    let mut previous: HashMap<usize, usize> = HashMap::new();
    let mut out = CameraOutcome {
        matches: Vec::new(),
        frames: Vec::new(),
    };
    let (mut i, mut j) = (0, 0);
    while i < truth.len() || j < computed.len() {
        let frame = match (truth.get(i), computed.get(j)) {
            (Some(a), Some(b)) => a.0.min(b.0),
            (Some(a), None) => a.0,
            (None, Some(b)) => b.0,
            (None, None) => unreachable!(),
        };
        let i_end = i + truth[i..].iter().take_while(|e| e.0 == frame).count();
        let j_end = j + computed[j..].iter().take_while(|e| e.0 == frame).count();
        let ts = &truth[i..i_end];
        let cs = &computed[j..j_end];
        let site = Site::new(camera, frame);

        let mut t_done = vec![false; ts.len()];
        let mut c_done = vec![false; cs.len()];
        let mut current: HashMap<usize, usize> = HashMap::new();
        let mut record = |out: &mut CameraOutcome, a: usize, b: usize| {
            let (t, c) = (&ts[a], &cs[b]);
            out.matches.push((
                SiteMatch {
                    site,
                    truth: t.1,
                    computed: c.1,
                    quality: quality(t.3, c.3, mode),
                },
                t.2,
                c.2,
            ));
            current.insert(t.1, c.1);
        };

        // carried-over matches
        if !previous.is_empty() {
            let c_pos: HashMap<usize, usize> =
                cs.iter().enumerate().map(|(k, e)| (e.1, k)).collect();
            for (a, t) in ts.iter().enumerate() {
                if let Some(b) = previous.get(&t.1).and_then(|c| c_pos.get(c)).copied() {
                    if gated_cost(t.3, cs[b].3, mode)?.is_some() {
                        t_done[a] = true;
                        c_done[b] = true;
                        record(&mut out, a, b);
                    }
                }
            }
        }

        let free_t: Vec<usize> = (0..ts.len()).filter(|&a| !t_done[a]).collect();
        let free_c: Vec<usize> = (0..cs.len()).filter(|&b| !c_done[b]).collect();
        if !free_t.is_empty() && !free_c.is_empty() {
            let mut data = Vec::with_capacity(free_t.len() * free_c.len());
            let mut allowed = Vec::with_capacity(data.capacity());
            let mut worst = 0.0f64;
            for &a in &free_t {
                for &b in &free_c {
                    let g = gated_cost(ts[a].3, cs[b].3, mode)?;
                    allowed.push(g.is_some());
                    let v = g.unwrap_or(0.0);
                    worst = worst.max(v);
                    data.push(v);
                }
            }
            if allowed.iter().any(|&x| x) {
                // A gated-out pair costs more than any set of admissible pairs,
                // so the solver first maximizes the number of valid matches.
                let blocked = (worst + 1.0) * (free_t.len().min(free_c.len()) + 1) as f64;
                for (v, ok) in data.iter_mut().zip(&allowed) {
                    if !ok {
                        *v = blocked;
                    }
                }
                let m = CostMatrix::new(free_t.len(), free_c.len(), data)?;
                let sol = solve_min_cost_assignment(&m);
                for (r, c) in sol.pairs() {
                    if allowed[r * free_c.len() + c] {
                        record(&mut out, free_t[r], free_c[c]);
                    }
                }
            }
        }

        out.frames.push(FrameTally {
            site,
            truth: ts.len() as u32,
            computed: cs.len() as u32,
            tp: current.len() as u32,
        });
        previous = current;
        i = i_end;
        j = j_end;
    }
    Ok(out)
}

/// A change of partner along one trajectory's matched observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchEvent {
    /// Index of the trajectory whose partner changed: a true trajectory for
    /// fragmentations, a computed one for merges.
    pub subject: usize,
    pub from_site: Site,
    pub to_site: Site,
    pub from_partner: usize,
    pub to_partner: usize,
}

impl MismatchEvent {
    pub fn is_handover(&self) -> bool {
        self.from_site.camera != self.to_site.camera
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatches {
    pub fragmentations: Split,
    pub merges: Split,
    pub fragmentation_events: Vec<MismatchEvent>,
    pub merge_events: Vec<MismatchEvent>,
}

impl Mismatches {
    /// `M = Φ + Γ`, with the same split.
    pub fn mismatches(&self) -> Split {
        self.fragmentations + self.merges
    }
}

fn scan(
    sides: &[crate::model::Trajectory],
    assigned: &[Vec<Option<usize>>],
    counts: &mut Split,
    events: &mut Vec<MismatchEvent>,
) {
    for (subject, (traj, partners)) in sides.iter().zip(assigned).enumerate() {
        let mut last: Option<(usize, Site)> = None;
        for (o, p) in traj.observations().iter().zip(partners) {
            let Some(p) = *p else { continue };
            if let Some((q, from_site)) = last {
                if q != p {
                    let e = MismatchEvent {
                        subject,
                        from_site,
                        to_site: o.site,
                        from_partner: q,
                        to_partner: p,
                    };
                    counts.bump(!e.is_handover());
                    events.push(e);
                }
            }
            last = Some((p, o.site));
        }
    }
}

/// Fragmentations along each true trajectory and merges along each computed
/// one, comparing consecutive matched observations in time order.
pub fn count_mismatches(scenario: &Scenario, history: &ClearHistory) -> Mismatches {
    let mut m = Mismatches::default();
    scan(
        scenario.truth(),
        &history.truth_assigned,
        &mut m.fragmentations,
        &mut m.fragmentation_events,
    );
    scan(
        scenario.computed(),
        &history.computed_assigned,
        &mut m.merges,
        &mut m.merge_events,
    );
    m
}

/// Which mismatch count enters MOTA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotaMismatches {
    /// Fragmentations only.
    #[default]
    Phi,
    /// Fragmentations plus merges.
    Mu,
}

/// `MOTA = 1 − (FN + FP + Φ) / T` and MOTP (mean IoU, or `1 − mean(d / Δ)` on
/// the ground plane, 0 without true positives).
pub fn mota_motp(
    tallies: &ClearTallies,
    mismatches: &Mismatches,
    total_truth: u64,
    mode: OverlapMode,
    which: MotaMismatches,
) -> Result<(f64, f64)> {
    if total_truth == 0 {
        return Err(Error::UndefinedMeasure(
            "MOTA needs at least one true detection",
        ));
    }
    let switches = match which {
        MotaMismatches::Phi => mismatches.fragmentations.total(),
        MotaMismatches::Mu => mismatches.mismatches().total(),
    };
    let mota = 1.0 - (tallies.fn_ + tallies.fp + switches) as f64 / total_truth as f64;
    Ok((mota, motp(tallies, mode)))
}

pub fn motp(tallies: &ClearTallies, mode: OverlapMode) -> f64 {
    if tallies.tp == 0 {
        return 0.0;
    }
    let mean = tallies.quality_sum / tallies.tp as f64;
    match mode {
        OverlapMode::Iou { .. } => mean,
        OverlapMode::GroundPlane { max_distance } => 1.0 - mean / max_distance,
    }
}

pub const MOSTLY_TRACKED: f64 = 0.8;
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackQuality {
    pub mt: u64,
    pub ml: u64,
    pub frg: u64,
}

/// Mostly tracked (matched on ≥ 80% of observations), mostly lost (≤ 20%) and
/// track fragments (times matching resumes after an interruption).
pub fn mt_ml_frg(history: &ClearHistory) -> TrackQuality {
    let mut q = TrackQuality::default();
    for partners in &history.truth_assigned {
        if partners.is_empty() {
            continue;
        }
        let matched = partners.iter().filter(|p| p.is_some()).count();
        let ratio = matched as f64 / partners.len() as f64;
        if ratio >= MOSTLY_TRACKED {
            q.mt += 1;
        } else if ratio <= MOSTLY_LOST {
            q.ml += 1;
        }
        let mut seen = false;
        let mut gap = false;
        for p in partners {
            match (p.is_some(), seen) {
                (true, true) if gap => {
                    q.frg += 1;
                    gap = false;
                }
                (true, _) => seen = true,
                (false, true) => gap = true,
                (false, false) => {}
            }
        }
    }
    q
}

/// Ground-truth transitions between consecutive observations of one identity:
/// `T^w` counts same-camera steps, `T^h` camera changes.
pub fn truth_transitions(scenario: &Scenario) -> Split {
    let mut s = Split::default();
    for t in scenario.truth() {
        for w in t.observations().windows(2) {
            s.bump(w[0].site.camera == w[1].site.camera);
        }
    }
    s
}

fn ratio_or(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

/// `MCTA = F1 · (1 − M^w / T^w) · (1 − M^h / T^h)`.
///
/// A penalty term whose denominator is zero counts as 1. Terms are clamped at
/// 0 so the product stays in `[0, 1]`.
pub fn mcta(tallies: &ClearTallies, mismatches: &Mismatches, transitions: Split) -> f64 {
    let p = ratio_or(tallies.tp, tallies.tp + tallies.fp, 0.0);
    let r = ratio_or(tallies.tp, tallies.tp + tallies.fn_, 0.0);
    let f1 = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    let m = mismatches.mismatches();
    mcta_terms(f1, m, transitions)
}

pub fn mcta_terms(f1: f64, m: Split, t: Split) -> f64 {
    let within = (1.0 - ratio_or(m.within, t.within, 0.0)).max(0.0);
    let handover = (1.0 - ratio_or(m.handover, t.handover, 0.0)).max(0.0);
    f1 * within * handover
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScores {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fragmentations: Split,
    pub merges: Split,
    pub mismatches: Split,
    /// `None` when there are no true detections.
    pub mota: Option<f64>,
    pub motp: f64,
    pub precision: f64,
    pub recall: f64,
    pub mt: u64,
    pub ml: u64,
    pub frg: u64,
    pub mcta: f64,
    pub transitions: Split,
}

/// Event measures together with the history they were derived from.
#[derive(Debug, Clone)]
pub struct EventAnalysis {
    pub history: ClearHistory,
    pub mismatches: Mismatches,
    pub scores: EventScores,
}

pub fn evaluate_events(scenario: &Scenario, which: MotaMismatches) -> Result<EventAnalysis> {
    let history = clear_match(scenario)?;
    let mismatches = count_mismatches(scenario, &history);
    let t = &history.tallies;
    let mota = match mota_motp(
        t,
        &mismatches,
        scenario.total_truth() as u64,
        scenario.mode(),
        which,
    ) {
        Ok((mota, _)) => Some(mota),
        Err(Error::UndefinedMeasure(_)) => None,
        Err(e) => return Err(e),
    };
    let quality = mt_ml_frg(&history);
    let transitions = truth_transitions(scenario);
    let scores = EventScores {
        tp: t.tp,
        fp: t.fp,
        fn_: t.fn_,
        fragmentations: mismatches.fragmentations,
        merges: mismatches.merges,
        mismatches: mismatches.mismatches(),
        mota,
        motp: motp(t, scenario.mode()),
        precision: ratio_or(t.tp, t.tp + t.fp, 0.0),
        recall: ratio_or(t.tp, t.tp + t.fn_, 0.0),
        mt: quality.mt,
        ml: quality.ml,
        frg: quality.frg,
        mcta: mcta(t, &mismatches, transitions),
        transitions,
    };
    Ok(EventAnalysis {
        history,
        mismatches,
        scores,
    })
}
