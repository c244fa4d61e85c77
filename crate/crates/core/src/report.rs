//! Evaluation pipeline and report serialization.
//!
//! JSON layout (keys appear in this order; optional sections are omitted when
//! not requested):
//!
//! ```text
//! tool, version
//! scenario   { truth_rows, computed_rows, truth_identities, computed_identities,
//!              cameras, mode, delta }
//! id         { idp, idr, idf1, idtp, idfp, idfn }
//! clear      { tp, fp, fn, fragmentations, merges, mismatches, mota, motp,
//!              precision, recall, mt, ml, frg, mota_mismatches }
//! mcta       { mcta, t_within, t_handover, m_within, m_handover }
//! per_camera [ { camera, gt, fp, fn, ids, frg, mota, motp, mt, ml, idp, idr, idf1 } ]
//! handover   { e_multi, e_single, difference, idp_gap, idr_gap, idf1_gap,
//!              note, histogram, cases }
//! mapping    [ { truth, computed, fn, fp } ]
//! ```
//!
//! Every score is written with exactly four decimals; counts are integers.
//! `fragmentations`, `merges` and `mismatches` are `{within, handover, total}`.
//! `mota` is `null` when the ground truth is empty. No timestamps are written,
//! so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::diagnostics::{
    classify_handovers, handover_difficulty, per_camera_report, CameraRow, HandoverCase,
};
use crate::error::{Error, Result};
use crate::event_measures::{evaluate_events, MotaMismatches, Split};
use crate::id_measures::{id_scores, match_truth_to_result, IdScores, MatchedPair};
use crate::model::{CameraId, Scenario};

pub const TOOL: &str = "mtmc-eval";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A real score, serialized with four decimals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score(pub f64);

impl Score {
    pub fn text(&self) -> String {
        let v = if self.0 == 0.0 { 0.0 } else { self.0 };
        format!("{v:.4}")
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Score)
    }
}

impl From<f64> for Score {
    fn from(v: f64) -> Self {
        Score(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub within: u64,
    pub handover: u64,
    pub total: u64,
}

impl From<Split> for SplitCounts {
    fn from(s: Split) -> Self {
        SplitCounts {
            within: s.within,
            handover: s.handover,
            total: s.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDigest {
    pub truth_rows: u64,
    pub computed_rows: u64,
    pub truth_identities: u64,
    pub computed_identities: u64,
    pub cameras: Vec<CameraId>,
    pub mode: String,
    pub delta: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdSection {
    pub idp: Score,
    pub idr: Score,
    pub idf1: Score,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl From<&IdScores> for IdSection {
    fn from(s: &IdScores) -> Self {
        IdSection {
            idp: s.idp.into(),
            idr: s.idr.into(),
            idf1: s.idf1.into(),
            idtp: s.idtp,
            idfp: s.idfp,
            idfn: s.idfn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearSection {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fragmentations: SplitCounts,
    pub merges: SplitCounts,
    pub mismatches: SplitCounts,
    pub mota: Option<Score>,
    pub motp: Score,
    pub precision: Score,
    pub recall: Score,
    pub mt: u64,
    pub ml: u64,
    pub frg: u64,
    pub mota_mismatches: MotaMismatches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctaSection {
    pub mcta: Score,
    pub t_within: u64,
    pub t_handover: u64,
    pub m_within: u64,
    pub m_handover: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraLine {
    /// Camera id, or `"all"` for the multi-camera row.
    pub camera: String,
    pub gt: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ids: u64,
    pub frg: u64,
    pub mota: Option<Score>,
    pub motp: Score,
    pub mt: u64,
    pub ml: u64,
    pub idp: Score,
    pub idr: Score,
    pub idf1: Score,
}

impl From<&CameraRow> for CameraLine {
    fn from(r: &CameraRow) -> Self {
        CameraLine {
            camera: r.camera.map_or_else(|| "all".to_owned(), |c| c.to_string()),
            gt: r.gt,
            fp: r.events.fp,
            fn_: r.events.fn_,
            ids: r.events.fragmentations.total(),
            frg: r.events.frg,
            mota: r.events.mota.map(Score),
            motp: r.events.motp.into(),
            mt: r.events.mt,
            ml: r.events.ml,
            idp: r.id.idp.into(),
            idr: r.id.idr.into(),
            idf1: r.id.idf1.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverSection {
    pub e_multi: u64,
    pub e_single: u64,
    pub difference: u64,
    pub idp_gap: Score,
    pub idr_gap: Score,
    pub idf1_gap: Score,
    pub note: Option<String>,
    pub histogram: BTreeMap<String, u64>,
    pub cases: Vec<HandoverCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingLine {
    pub truth: String,
    pub computed: String,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
}

impl From<&MatchedPair> for MappingLine {
    fn from(p: &MatchedPair) -> Self {
        MappingLine {
            truth: p
                .truth
                .clone()
                .unwrap_or_else(|| crate::id_measures::FP_TAG.to_owned()),
            computed: p
                .computed
                .clone()
                .unwrap_or_else(|| crate::id_measures::FN_TAG.to_owned()),
            fn_: p.fn_count,
            fp: p.fp_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub scenario: ScenarioDigest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<IdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear: Option<ClearSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcta: Option<MctaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_camera: Option<Vec<CameraLine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handover: Option<HandoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Vec<MappingLine>>,
}

/// Which measure families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measures {
    pub id: bool,
    pub clear: bool,
    pub mcta: bool,
}

impl Default for Measures {
    fn default() -> Self {
        Measures {
            id: true,
            clear: true,
            mcta: true,
        }
    }
}

impl std::str::FromStr for Measures {
    type Err = Error;

    /// Comma-separated subset of `id`, `clear`, `mcta`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = Measures {
            id: false,
            clear: false,
            mcta: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "id" => m.id = true,
                "clear" => m.clear = true,
                "mcta" => m.mcta = true,
                other => return Err(Error::validation(format!("unknown measure `{other}`"))),
            }
        }
        if !(m.id || m.clear || m.mcta) {
            return Err(Error::validation("no measures requested"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub measures: Measures,
    pub per_camera: bool,
    pub diagnostics: bool,
    pub mapping: bool,
    pub mota_mismatches: MotaMismatches,
}

/// Runs the requested analyses and assembles the report.
pub fn evaluate(scenario: &Scenario, opts: &EvalOptions) -> Result<ReportDocument> {
    let need_id = opts.measures.id || opts.diagnostics || opts.mapping;
    let need_events = opts.measures.clear || opts.measures.mcta || opts.diagnostics;

    let (id_match, events) = rayon::join(
        || need_id.then(|| match_truth_to_result(scenario)).transpose(),
        || {
            need_events
                .then(|| evaluate_events(scenario, opts.mota_mismatches))
                .transpose()
        },
    );
    let (id_match, events) = (id_match?, events?);

    let mode = scenario.mode();
    let mut doc = ReportDocument {
        tool: TOOL.to_owned(),
        version: VERSION.to_owned(),
        scenario: ScenarioDigest {
            truth_rows: scenario.total_truth() as u64,
            computed_rows: scenario.total_computed() as u64,
            truth_identities: scenario.truth().len() as u64,
            computed_identities: scenario.computed().len() as u64,
            cameras: scenario.cameras().keys().copied().collect(),
            mode: mode.name().to_owned(),
            delta: mode.delta().into(),
        },
        id: None,
        clear: None,
        mcta: None,
        per_camera: None,
        handover: None,
        mapping: None,
    };

    if let (true, Some(m)) = (opts.measures.id, &id_match) {
        doc.id = Some(IdSection::from(&id_scores(m)));
    }
    if let Some(e) = &events {
        let s = &e.scores;
        if opts.measures.clear {
            doc.clear = Some(ClearSection {
                tp: s.tp,
                fp: s.fp,
                fn_: s.fn_,
                fragmentations: s.fragmentations.into(),
                merges: s.merges.into(),
                mismatches: s.mismatches.into(),
                mota: s.mota.map(Score),
                motp: s.motp.into(),
                precision: s.precision.into(),
                recall: s.recall.into(),
                mt: s.mt,
                ml: s.ml,
                frg: s.frg,
                mota_mismatches: opts.mota_mismatches,
            });
        }
        if opts.measures.mcta {
            doc.mcta = Some(MctaSection {
                mcta: s.mcta.into(),
                t_within: s.transitions.within,
                t_handover: s.transitions.handover,
                m_within: s.mismatches.within,
                m_handover: s.mismatches.handover,
            });
        }
    }
    if opts.per_camera {
        let rows = per_camera_report(scenario, opts.mota_mismatches)?;
        doc.per_camera = Some(rows.iter().map(CameraLine::from).collect());
    }
    if opts.diagnostics {
        let (m, e) = (id_match.as_ref().unwrap(), events.as_ref().unwrap());
        let d = handover_difficulty(scenario)?;
        let h = classify_handovers(scenario, m, e)?;
        doc.handover = Some(HandoverSection {
            e_multi: d.e_multi,
            e_single: d.e_single,
            difference: d.difference,
            idp_gap: d.idp_gap.into(),
            idr_gap: d.idr_gap.into(),
            idf1_gap: d.idf1_gap.into(),
            note: d.note,
            histogram: h
                .histogram
                .iter()
                .map(|(k, v)| (k.as_str().to_owned(), *v))
                .collect(),
            cases: h.cases,
        });
    }
    if opts.mapping {
        let m = id_match.as_ref().unwrap();
        doc.mapping = Some(m.pairs.iter().map(MappingLine::from).collect());
    }
    Ok(doc)
}

impl ReportDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Human-readable summary; the per-camera table follows the usual
    /// `FP FN IDS FRG MOTA MOTP GT MT ML | IDP IDR IDF1` layout.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.scenario;
        let _ = writeln!(
            out,
            "{} {}: {} truth rows ({} ids), {} computed rows ({} ids), {} camera(s), mode {} delta {}",
            self.tool,
            self.version,
            d.truth_rows,
            d.truth_identities,
            d.computed_rows,
            d.computed_identities,
            d.cameras.len(),
            d.mode,
            d.delta.text()
        );
        if let Some(id) = &self.id {
            let _ = writeln!(
                out,
                "IDP {}  IDR {}  IDF1 {}  (IDTP {} IDFP {} IDFN {})",
                id.idp.text(),
                id.idr.text(),
                id.idf1.text(),
                id.idtp,
                id.idfp,
                id.idfn
            );
        }
        if let Some(c) = &self.clear {
            let _ = writeln!(
                out,
                "TP {}  FP {}  FN {}  Frag {} (w {} h {})  Merge {} (w {} h {})  MOTA {}  MOTP {}  P {}  R {}  MT {}  ML {}  FRG {}",
                c.tp,
                c.fp,
                c.fn_,
                c.fragmentations.total,
                c.fragmentations.within,
                c.fragmentations.handover,
                c.merges.total,
                c.merges.within,
                c.merges.handover,
                c.mota.map_or_else(|| "n/a".to_owned(), |m| m.text()),
                c.motp.text(),
                c.precision.text(),
                c.recall.text(),
                c.mt,
                c.ml,
                c.frg
            );
        }
        if let Some(m) = &self.mcta {
            let _ = writeln!(
                out,
                "MCTA {}  (M^w {} / T^w {}, M^h {} / T^h {})",
                m.mcta.text(),
                m.m_within,
                m.t_within,
                m.m_handover,
                m.t_handover
            );
        }
        if let Some(rows) = &self.per_camera {
            let _ = writeln!(
                out,
                "\n{:>5} {:>8} {:>8} {:>6} {:>6} {:>8} {:>8} {:>6} {:>6} {:>6} | {:>7} {:>7} {:>7}",
                "Cam",
                "FP",
                "FN",
                "IDS",
                "FRG",
                "MOTA",
                "MOTP",
                "GT",
                "MT",
                "ML",
                "IDP",
                "IDR",
                "IDF1"
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:>5} {:>8} {:>8} {:>6} {:>6} {:>8} {:>8} {:>6} {:>6} {:>6} | {:>7} {:>7} {:>7}",
                    r.camera,
                    r.fp,
                    r.fn_,
                    r.ids,
                    r.frg,
                    r.mota.map_or_else(|| "n/a".to_owned(), |m| m.text()),
                    r.motp.text(),
                    r.gt,
                    r.mt,
                    r.ml,
                    r.idp.text(),
                    r.idr.text(),
                    r.idf1.text()
                );
            }
        }
        if let Some(h) = &self.handover {
            let _ = writeln!(
                out,
                "\nHandover difficulty: E_M {} - E_S {} = {}  (IDP gap {}, IDR gap {}, IDF1 gap {})",
                h.e_multi,
                h.e_single,
                h.difference,
                h.idp_gap.text(),
                h.idr_gap.text(),
                h.idf1_gap.text()
            );
            if let Some(note) = &h.note {
                let _ = writeln!(out, "  note: {note}");
            }
            for (class, n) in &h.histogram {
                let _ = writeln!(out, "  {class:<26} {n}");
            }
        }
        out
    }
}

/// Writes the JSON and/or text renderings.
pub fn write_report(
    doc: &ReportDocument,
    json_path: Option<&Path>,
    text_path: Option<&Path>,
) -> Result<()> {
    if let Some(p) = json_path {
        std::fs::write(p, doc.to_json()?).map_err(|e| Error::io(p, e))?;
    }
    if let Some(p) = text_path {
        std::fs::write(p, doc.to_text()).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_switch_case, SwitchCase};

    #[test]
    fn score_formatting() {
        assert_eq!(Score(1.0).text(), "1.0000");
        assert_eq!(Score(2.0 / 3.0).text(), "0.6667");
        assert_eq!(Score(-0.0).text(), "0.0000");
        assert_eq!(serde_json::to_string(&Score(0.5)).unwrap(), "0.5000");
        assert_eq!(serde_json::to_string(&Score(f64::NAN)).unwrap(), "null");
    }

    #[test]
    fn perfect_report() {
        let s = make_switch_case(SwitchCase::A);
        let perfect = crate::model::build_scenario(
            &s.to_rows().0,
            &s.to_rows().0,
            s.cameras().clone(),
            s.mode(),
        )
        .unwrap();
        let doc = evaluate(&perfect, &EvalOptions::default()).unwrap();
        let json = doc.to_json().unwrap();
        assert!(json.contains("\"mota\": 1.0000"), "{json}");
        assert!(json.contains("\"idf1\": 1.0000"), "{json}");
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let opts = EvalOptions {
            per_camera: true,
            diagnostics: true,
            mapping: true,
            ..Default::default()
        };
        let doc = evaluate(&make_switch_case(SwitchCase::B), &opts).unwrap();
        let json = doc.to_json().unwrap();
        let again = ReportDocument::from_json(&json).unwrap().to_json().unwrap();
        assert_eq!(json, again);
    }

    #[test]
    fn eight_cameras_give_nine_rows() {
        let p = crate::synth::RandomParams {
            cameras: 8,
            identities: 20,
            ..Default::default()
        };
        let (_, s) = crate::synth::random_scenario(&p).unwrap();
        let opts = EvalOptions {
            per_camera: true,
            ..Default::default()
        };
        let rows = evaluate(&s, &opts).unwrap().per_camera.unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows.last().unwrap().camera, "all");
    }

    #[test]
    fn measures_flag() {
        let m: Measures = "id".parse().unwrap();
        assert!(m.id && !m.clear && !m.mcta);
        assert!("id,foo".parse::<Measures>().is_err());
        assert!("".parse::<Measures>().is_err());
    }

    #[test]
    fn text_table_layout() {
        let opts = EvalOptions {
            per_camera: true,
            ..Default::default()
        };
        let text = evaluate(&make_switch_case(SwitchCase::A), &opts)
            .unwrap()
            .to_text();
        assert!(text.contains("IDP"));
        assert!(text.lines().any(|l| l.trim_start().starts_with("all")));
    }
}
