//! Cross-measure analysis: handover difficulty from single- versus
//! multi-camera identity matches, per-camera score tables, and handovers where
//! event-based and identity-based verdicts disagree.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event_measures::{evaluate_events, EventAnalysis, EventScores, MotaMismatches};
use crate::geometry::is_miss;
use crate::id_measures::{id_scores, match_truth_to_result, IdScores, TruthToResultMatch};
use crate::model::{CameraId, Scenario, Site};

/// `E_M − E_S` and the matching score gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverDifficulty {
    /// `IDFP + IDFN` of the multi-camera match.
    pub e_multi: u64,
    /// Sum over cameras of `IDFP + IDFN` of each single-camera match.
    pub e_single: u64,
    pub difference: u64,
    pub multi: IdScores,
    /// Scores from the summed single-camera counts.
    pub single: IdScores,
    pub idp_gap: f64,
    pub idr_gap: f64,
    pub idf1_gap: f64,
    pub note: Option<String>,
}

pub fn handover_difficulty(scenario: &Scenario) -> Result<HandoverDifficulty> {
    let multi = id_scores(&match_truth_to_result(scenario)?);
    let cameras: Vec<CameraId> = scenario.cameras().keys().copied().collect();
    let per_camera = cameras
        .par_iter()
        .map(|&c| {
            let sub = scenario.restrict_to_camera(c)?;
            Ok(id_scores(&match_truth_to_result(&sub)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (idtp, idfp, idfn) = per_camera.iter().fold((0, 0, 0), |acc, s| {
        (acc.0 + s.idtp, acc.1 + s.idfp, acc.2 + s.idfn)
    });
    let single = IdScores::from_counts(idtp, idfp, idfn);

    let e_multi = multi.idfp + multi.idfn;
    let e_single = single.idfp + single.idfn;
    let used_cameras = scenario
        .timeline_stats()
        .per_camera
        .values()
        .filter(|s| s.truth_detections + s.computed_detections > 0)
        .count();
    Ok(HandoverDifficulty {
        e_multi,
        e_single,
        difference: e_multi.saturating_sub(e_single),
        idp_gap: single.idp - multi.idp,
        idr_gap: single.idr - multi.idr,
        idf1_gap: single.idf1 - multi.idf1,
        multi,
        single,
        note: (used_cameras <= 1)
            .then(|| "single camera: no cross-camera constraint to measure".to_owned()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandoverClass {
    /// Event measures see a handover fragmentation; the identities are right.
    FragButCorrect,
    /// Event measures see a handover merge; the identities are right.
    MergeButCorrect,
    /// Event measures see no error; the true identity is split across the handover.
    CorrectButFragMissed,
    /// Event measures see no error; the identity carried across belongs to someone else.
    CorrectButMergeMissed,
    Clean,
    Incorrect,
}

impl HandoverClass {
    pub const ALL: [HandoverClass; 6] = [
        HandoverClass::FragButCorrect,
        HandoverClass::MergeButCorrect,
        HandoverClass::CorrectButFragMissed,
        HandoverClass::CorrectButMergeMissed,
        HandoverClass::Clean,
        HandoverClass::Incorrect,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            HandoverClass::FragButCorrect => "frag-but-correct",
            HandoverClass::MergeButCorrect => "merge-but-correct",
            HandoverClass::CorrectButFragMissed => "correct-but-frag-missed",
            HandoverClass::CorrectButMergeMissed => "correct-but-merge-missed",
            HandoverClass::Clean => "clean",
            HandoverClass::Incorrect => "incorrect",
        }
    }

    pub fn is_discrepancy(&self) -> bool {
        !matches!(self, HandoverClass::Clean | HandoverClass::Incorrect)
    }
}

impl fmt::Display for HandoverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverCase {
    pub truth: String,
    pub from_camera: CameraId,
    pub to_camera: CameraId,
    pub from_frame: u32,
    pub to_frame: u32,
    pub class: HandoverClass,
    /// Frames next to the handover whose per-frame partner disagrees with the
    /// dominant partner of their camera segment.
    pub fragment_length: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverReport {
    pub cases: Vec<HandoverCase>,
    pub histogram: BTreeMap<HandoverClass, u64>,
}

impl HandoverReport {
    pub fn total(&self) -> u64 {
        self.histogram.values().sum()
    }

    pub fn count(&self, class: HandoverClass) -> u64 {
        self.histogram.get(&class).copied().unwrap_or(0)
    }
}

fn dominant(partners: &[Option<usize>]) -> Option<usize> {
    let mut counts: BTreeMap<Option<usize>, usize> = BTreeMap::new();
    for p in partners {
        *counts.entry(*p).or_default() += 1;
    }
    // ties go to the smaller index, so the result is deterministic
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .and_then(|(p, _)| p)
}

/// Compares, at every ground-truth camera change, the event-based verdict
/// (a handover mismatch spans the transition) with the identity-based one
/// (the bijection partner explains most of both camera segments).
pub fn classify_handovers(
    scenario: &Scenario,
    id_match: &TruthToResultMatch,
    events: &EventAnalysis,
) -> Result<HandoverReport> {
    let mode = scenario.mode();
    let history = &events.history;
    let mut report = HandoverReport {
        histogram: HandoverClass::ALL.iter().map(|&c| (c, 0)).collect(),
        ..Default::default()
    };

    let frag_spans = |ti: usize, before: Site, after: Site| {
        events.mismatches.fragmentation_events.iter().any(|e| {
            e.subject == ti && e.is_handover() && e.from_site <= before && e.to_site >= after
        })
    };
    let merge_spans = |ti: usize, before: Site, after: Site| {
        events.mismatches.merge_events.iter().any(|e| {
            (e.from_partner == ti || e.to_partner == ti)
                && e.is_handover()
                && e.from_site <= after
                && e.to_site >= before
        })
    };

    for (ti, tau) in scenario.truth().iter().enumerate() {
        let obs = tau.observations();
        let partners = &history.truth_assigned[ti];
        // segment boundaries: indices where the camera changes
        let breaks: Vec<usize> = (1..obs.len())
            .filter(|&k| obs[k].site.camera != obs[k - 1].site.camera)
            .collect();
        for (n, &k) in breaks.iter().enumerate() {
            let seg_start = if n == 0 { 0 } else { breaks[n - 1] };
            let seg_end = breaks.get(n + 1).copied().unwrap_or(obs.len());
            let (before, after) = (seg_start..k, k..seg_end);
            let (s_before, s_after) = (obs[k - 1].site, obs[k].site);

            let id_correct = match id_match.gamma_m[ti] {
                Some(j) => {
                    let gamma = &scenario.computed()[j];
                    let mut ok = true;
                    for range in [before.clone(), after.clone()] {
                        let mut hits = 0usize;
                        for o in &obs[range.clone()] {
                            hits += usize::from(!is_miss(Some(o), gamma.at(o.site), mode)?);
                        }
                        ok &= 2 * hits > range.len();
                    }
                    ok
                }
                None => false,
            };

            let dom_before = dominant(&partners[before.clone()]);
            let dom_after = dominant(&partners[after.clone()]);
            let frag = frag_spans(ti, s_before, s_after);
            let merge = merge_spans(ti, s_before, s_after);

            let class = match (frag || merge, id_correct) {
                (true, true) if frag => HandoverClass::FragButCorrect,
                (true, true) => HandoverClass::MergeButCorrect,
                (true, false) => HandoverClass::Incorrect,
                (false, true) => HandoverClass::Clean,
                (false, false) if dom_before != dom_after => HandoverClass::CorrectButFragMissed,
                (false, false) => HandoverClass::CorrectButMergeMissed,
            };

            let trailing = partners[before]
                .iter()
                .rev()
                .take_while(|p| **p != dom_before)
                .count();
            let leading = partners[after]
                .iter()
                .take_while(|p| **p != dom_after)
                .count();

            *report.histogram.entry(class).or_default() += 1;
            report.cases.push(HandoverCase {
                truth: tau.identity().to_owned(),
                from_camera: s_before.camera,
                to_camera: s_after.camera,
                from_frame: s_before.frame,
                to_frame: s_after.frame,
                class,
                fragment_length: (trailing + leading) as u64,
            });
        }
    }
    Ok(report)
}

/// One line of the per-camera table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRow {
    /// Camera id, or `None` for the multi-camera row.
    pub camera: Option<CameraId>,
    /// Number of true identities.
    pub gt: u64,
    pub id: IdScores,
    pub events: EventScores,
}

/// Identity and event scores for each camera on its own, then for all cameras
/// together.
pub fn per_camera_report(scenario: &Scenario, which: MotaMismatches) -> Result<Vec<CameraRow>> {
    let row = |camera: Option<CameraId>, s: &Scenario| -> Result<CameraRow> {
        Ok(CameraRow {
            camera,
            gt: s.truth().len() as u64,
            id: id_scores(&match_truth_to_result(s)?),
            events: evaluate_events(s, which)?.scores,
        })
    };
    let mut rows = scenario
        .cameras()
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&c| row(Some(c), &scenario.restrict_to_camera(c)?))
        .collect::<Result<Vec<_>>>()?;
    rows.push(row(None, scenario)?);
    Ok(rows)
}
