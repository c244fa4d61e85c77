//! Deterministic scenario generation: the fixed preset layouts and
//! randomized ground truth with parameterized corruption operators.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a given seed yields the same files on every platform.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, WorldPoint};
use crate::model::{
    build_scenario, plain_cameras, CameraId, Detection, Frame, OverlapMode, Scenario,
};

/// Box a camera sees for a person standing at `p`: 20 px per meter, 30x60 px.
pub fn canonical_box(p: WorldPoint) -> BBox {
    BBox::new(20.0 * p.x, 20.0 * p.y, 30.0, 60.0)
}

fn det(camera: CameraId, frame: Frame, id: &str, p: WorldPoint) -> Detection {
    Detection::new(camera, frame, id, Some(canonical_box(p)), Some(p))
}

/// Person walking at one meter per frame along y = 0.
fn walker(frame: Frame) -> WorldPoint {
    WorldPoint::new(f64::from(frame), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchCase {
    A,
    B,
    C,
}

/// Frames of the 90-frame truth `A` labeled `1` by the tracker; the rest are `2`.
fn switch_case_labels(case: SwitchCase) -> Vec<RangeInclusive<Frame>> {
    match case {
        SwitchCase::A => vec![1..=60],
        // eight fragments, 60 frames of id 1, 7 switches
        SwitchCase::B => vec![1..=45, 51..=55, 62..=66, 74..=78],
        // eight fragments, 75 frames of id 1, 7 switches
        SwitchCase::C => vec![1..=60, 65..=69, 74..=78, 83..=87],
    }
}

/// One true identity `A` over frames 1–90 on camera 1, tracked by `1` and `2`
/// with boxes that coincide with the truth.
pub fn make_switch_case(case: SwitchCase) -> Scenario {
    let id1 = switch_case_labels(case);
    let truth: Vec<_> = (1..=90).map(|f| det(1, f, "A", walker(f))).collect();
    let computed: Vec<_> = (1..=90)
        .map(|f| {
            let id = if id1.iter().any(|r| r.contains(&f)) {
                "1"
            } else {
                "2"
            };
            det(1, f, id, walker(f))
        })
        .collect();
    build_scenario(
        &truth,
        &computed,
        plain_cameras([1]),
        OverlapMode::iou(OverlapMode::DEFAULT_IOU),
    )
    .expect("switch case construction is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlindSpotCase {
    A,
    B,
}

pub const BLIND_SPOT_CAMERA_1: RangeInclusive<Frame> = 1..=45;
pub const BLIND_SPOT_CAMERA_2: RangeInclusive<Frame> = 51..=95;

/// `A` walks through camera 1 (frames 1–45), a blind spot, then camera 2
/// (frames 51–95).
///
/// (a) id `1` throughout except a one-frame id `2` at the end of camera 1.
/// (b) id `1` in camera 1 and on the first frame of camera 2, id `2` after.
pub fn make_blind_spot_case(case: BlindSpotCase) -> Scenario {
    let mut truth = Vec::new();
    let mut computed = Vec::new();
    for (camera, frames) in [(1, BLIND_SPOT_CAMERA_1), (2, BLIND_SPOT_CAMERA_2)] {
        for f in frames {
            truth.push(det(camera, f, "A", walker(f)));
            let id = match case {
                BlindSpotCase::A if f == *BLIND_SPOT_CAMERA_1.end() => "2",
                BlindSpotCase::A => "1",
                BlindSpotCase::B if camera == 2 && f > *BLIND_SPOT_CAMERA_2.start() => "2",
                BlindSpotCase::B => "1",
            };
            computed.push(det(camera, f, id, walker(f)));
        }
    }
    build_scenario(
        &truth,
        &computed,
        plain_cameras([1, 2]),
        OverlapMode::iou(OverlapMode::DEFAULT_IOU),
    )
    .expect("blind spot construction is valid")
}

/// A corruption applied to the computed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Corruption {
    /// From `at_frame` on, `identity` is reported as `new_identity`.
    Fragment {
        identity: String,
        at_frame: Frame,
        new_identity: String,
    },
    /// `absorbed` is relabeled `kept`; where both occupy a site, `kept` wins.
    Merge { kept: String, absorbed: String },
    /// `a` and `b` swap labels over `frames`.
    Flip {
        a: String,
        b: String,
        frames: RangeInclusive<Frame>,
    },
    /// `identity` disappears over `frames`.
    Drop {
        identity: String,
        frames: RangeInclusive<Frame>,
    },
    /// A stationary false track.
    Spurious {
        identity: String,
        camera: CameraId,
        frames: RangeInclusive<Frame>,
        position: WorldPoint,
    },
    /// Uniform noise on every detection: `meters` on the ground plane, `pixels`
    /// on box corners.
    Jitter { meters: f64, pixels: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub op: Corruption,
    pub seed: u64,
}

fn span_of(rows: &[Detection], id: &str) -> Option<RangeInclusive<Frame>> {
    let mut frames = rows
        .iter()
        .filter(|d| d.identity == id)
        .map(|d| d.site.frame);
    let first = frames.next()?;
    let (lo, hi) = frames.fold((first, first), |(lo, hi), f| (lo.min(f), hi.max(f)));
    Some(lo..=hi)
}

fn require_within(rows: &[Detection], id: &str, frames: &RangeInclusive<Frame>) -> Result<()> {
    let span = span_of(rows, id)
        .ok_or_else(|| Error::validation(format!("no computed trajectory `{id}`")))?;
    if frames.start() > frames.end() || frames.start() < span.start() || frames.end() > span.end() {
        return Err(Error::validation(format!(
            "frames {frames:?} fall outside `{id}`'s span {span:?}"
        )));
    }
    Ok(())
}

impl CorruptionSpec {
    pub fn new(op: Corruption, seed: u64) -> Self {
        CorruptionSpec { op, seed }
    }

    /// Applies the corruption to computed rows. Deterministic given the seed.
    pub fn apply(&self, rows: &mut Vec<Detection>) -> Result<()> {
        match &self.op {
            Corruption::Fragment {
                identity,
                at_frame,
                new_identity,
            } => {
                require_within(rows, identity, &(*at_frame..=*at_frame))?;
                for d in rows.iter_mut().filter(|d| &d.identity == identity) {
                    if d.site.frame >= *at_frame {
                        d.identity = new_identity.clone();
                    }
                }
            }
            Corruption::Merge { kept, absorbed } => {
                span_of(rows, kept)
                    .ok_or_else(|| Error::validation(format!("no computed trajectory `{kept}`")))?;
                span_of(rows, absorbed).ok_or_else(|| {
                    Error::validation(format!("no computed trajectory `{absorbed}`"))
                })?;
                let taken: HashSet<_> = rows
                    .iter()
                    .filter(|d| &d.identity == kept)
                    .map(|d| d.site)
                    .collect();
                rows.retain(|d| !(&d.identity == absorbed && taken.contains(&d.site)));
                for d in rows.iter_mut().filter(|d| &d.identity == absorbed) {
                    d.identity = kept.clone();
                }
            }
            Corruption::Flip { a, b, frames } => {
                require_within(rows, a, frames)?;
                require_within(rows, b, frames)?;
                for d in rows.iter_mut().filter(|d| frames.contains(&d.site.frame)) {
                    if &d.identity == a {
                        d.identity = b.clone();
                    } else if &d.identity == b {
                        d.identity = a.clone();
                    }
                }
            }
            Corruption::Drop { identity, frames } => {
                require_within(rows, identity, frames)?;
                rows.retain(|d| !(&d.identity == identity && frames.contains(&d.site.frame)));
            }
            Corruption::Spurious {
                identity,
                camera,
                frames,
                position,
            } => {
                if frames.start() > frames.end() {
                    return Err(Error::validation("spurious track has an empty frame range"));
                }
                if rows.iter().any(|d| &d.identity == identity) {
                    return Err(Error::validation(format!(
                        "spurious identity `{identity}` already exists"
                    )));
                }
                rows.extend(frames.clone().map(|f| det(*camera, f, identity, *position)));
            }
            Corruption::Jitter { meters, pixels } => {
                if !(*meters >= 0.0 && *pixels >= 0.0) {
                    return Err(Error::validation("jitter magnitudes must be non-negative"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut noise = |m: f64| {
                    if m > 0.0 {
                        rng.random_range(-m..=m)
                    } else {
                        0.0
                    }
                };
                for d in rows.iter_mut() {
                    if let Some(w) = d.world.as_mut() {
                        w.x += noise(*meters);
                        w.y += noise(*meters);
                    }
                    if let Some(b) = d.bbox.as_mut() {
                        b.left += noise(*pixels);
                        b.top += noise(*pixels);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-trajectory probabilities of each corruption, plus jitter magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRates {
    pub fragment: f64,
    pub merge: f64,
    pub flip: f64,
    pub drop: f64,
    pub spurious: f64,
    /// Ground-plane jitter in meters (20 px per meter on boxes).
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub cameras: u32,
    pub identities: u32,
    pub mean_length: u32,
    /// Probability that a camera change happens inside overlapping views
    /// rather than across a blind spot.
    pub overlap_fraction: f64,
    pub rates: CorruptionRates,
    pub seed: u64,
    pub mode: OverlapMode,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            cameras: 2,
            identities: 4,
            mean_length: 30,
            overlap_fraction: 0.25,
            rates: CorruptionRates::default(),
            seed: 0,
            mode: OverlapMode::iou(OverlapMode::DEFAULT_IOU),
        }
    }
}

impl RandomParams {
    fn validate(&self) -> Result<()> {
        let r = &self.rates;
        if self.cameras == 0 || self.identities == 0 || self.mean_length == 0 {
            return Err(Error::validation(
                "cameras, identities and mean length must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return Err(Error::validation(format!(
                "overlap fraction must lie in [0, 1], got {}",
                self.overlap_fraction
            )));
        }
        for (name, v) in [
            ("fragment", r.fragment),
            ("merge", r.merge),
            ("flip", r.flip),
            ("drop", r.drop),
            ("spurious", r.spurious),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "{name} rate must lie in [0, 1], got {v}"
                )));
            }
        }
        if !(r.jitter >= 0.0 && r.jitter.is_finite()) {
            return Err(Error::validation("jitter must be non-negative"));
        }
        self.mode.validate()
    }
}

/// Ground-truth rows: each identity walks its own lane (5 m apart) along a
/// piecewise-linear path and passes through a random sequence of cameras.
fn random_truth(p: &RandomParams, rng: &mut ChaCha8Rng) -> Vec<Detection> {
    let mut rows = Vec::new();
    let mean = p.mean_length;
    let horizon = mean.saturating_mul(2);
    for i in 0..p.identities {
        let id = format!("T{i}");
        let lane = 5.0 * f64::from(i);
        let len = rng.random_range((mean / 2).max(1)..=mean + mean / 2);
        let start = rng.random_range(0..=horizon);

        // camera visits
        let visits = rng.random_range(1..=p.cameras.min(3));
        let mut cams = vec![rng.random_range(1..=p.cameras)];
        while cams.len() < visits as usize {
            let mut c = rng.random_range(1..=p.cameras - 1);
            if c >= *cams.last().unwrap() {
                c += 1;
            }
            cams.push(c);
        }
        let base = len / visits;
        let mut sites: Vec<(CameraId, Frame)> = Vec::with_capacity(len as usize);
        let mut cursor = start;
        // end of the segment before the current one; an overlap must not
        // reach back past it, or a revisited camera would see a frame twice
        let mut prev_end = start;
        for (k, &c) in cams.iter().enumerate() {
            let seg = if k + 1 == cams.len() {
                len - base * (visits - 1)
            } else {
                base
            };
            sites.extend((cursor..cursor + seg).map(|f| (c, f)));
            cursor += seg;
            let room = (cursor - prev_end).min(seg).min(3);
            prev_end = cursor;
            if k + 1 < cams.len() {
                if rng.random_bool(p.overlap_fraction) && room >= 1 {
                    let back = rng.random_range(1..=room);
                    cursor -= back;
                } else {
                    cursor += rng.random_range(1..=5);
                }
            }
        }

        // piecewise-linear path: new velocity every 20 frames
        let mut x = rng.random_range(0.0..10.0);
        let mut wiggle = 0.0f64;
        let (mut vx, mut vy) = (0.0, 0.0);
        let mut last_frame = None;
        for (c, f) in sites {
            if last_frame != Some(f) {
                if (f - start) % 20 == 0 {
                    vx = rng.random_range(0.05..0.5);
                    vy = rng.random_range(-0.05..0.05);
                }
                x += vx;
                wiggle = (wiggle + vy).clamp(-0.5, 0.5);
                last_frame = Some(f);
            }
            rows.push(det(c, f, &id, WorldPoint::new(x, lane + wiggle)));
        }
    }
    rows
}

fn frames_of(rows: &[Detection], id: &str) -> Vec<Frame> {
    let mut v: Vec<Frame> = rows
        .iter()
        .filter(|d| d.identity == id)
        .map(|d| d.site.frame)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn sub_range(rng: &mut ChaCha8Rng, lo: Frame, hi: Frame, max_len: Frame) -> RangeInclusive<Frame> {
    let a = rng.random_range(lo..=hi);
    let len = rng.random_range(0..=max_len.max(1) - 1);
    a..=(a + len).min(hi)
}

/// Corruptions drawn for the given truth rows, in application order.
fn draw_corruptions(
    p: &RandomParams,
    truth: &[Detection],
    rng: &mut ChaCha8Rng,
) -> Vec<CorruptionSpec> {
    let r = p.rates;
    let ids: Vec<String> = (0..p.identities).map(|i| format!("T{i}")).collect();
    let spans: BTreeMap<&str, RangeInclusive<Frame>> = ids
        .iter()
        .filter_map(|id| span_of(truth, id).map(|s| (id.as_str(), s)))
        .collect();
    let mut out = Vec::new();

    for w in ids.windows(2) {
        if rng.random_bool(r.flip) {
            let (sa, sb) = (&spans[w[0].as_str()], &spans[w[1].as_str()]);
            let (lo, hi) = (*sa.start().max(sb.start()), *sa.end().min(sb.end()));
            if lo <= hi {
                out.push(CorruptionSpec::new(
                    Corruption::Flip {
                        a: w[0].clone(),
                        b: w[1].clone(),
                        frames: sub_range(rng, lo, hi, hi - lo + 1),
                    },
                    0,
                ));
            }
        }
    }
    for id in &ids {
        if rng.random_bool(r.drop) {
            let s = &spans[id.as_str()];
            let len = (s.end() - s.start() + 1) / 4;
            out.push(CorruptionSpec::new(
                Corruption::Drop {
                    identity: id.clone(),
                    frames: sub_range(rng, *s.start(), *s.end(), len),
                },
                0,
            ));
        }
    }
    for w in ids.windows(2) {
        if rng.random_bool(r.merge) {
            out.push(CorruptionSpec::new(
                Corruption::Merge {
                    kept: w[0].clone(),
                    absorbed: w[1].clone(),
                },
                0,
            ));
        }
    }
    // fragments and spurious tracks depend on earlier edits; they are resolved
    // against the rows at application time
    for (k, id) in ids.iter().enumerate() {
        if rng.random_bool(r.fragment) {
            out.push(CorruptionSpec::new(
                Corruption::Fragment {
                    identity: id.clone(),
                    at_frame: 0, // placeholder, filled in by `random_scenario`
                    new_identity: format!("{id}~{k}"),
                },
                rng.random(),
            ));
        }
    }
    for k in 0..p.identities {
        if rng.random_bool(r.spurious) {
            let camera = rng.random_range(1..=p.cameras);
            let start = rng.random_range(0..=p.mean_length.saturating_mul(2));
            let len = rng.random_range(5..=20);
            out.push(CorruptionSpec::new(
                Corruption::Spurious {
                    identity: format!("S{k}"),
                    camera,
                    frames: start..=start + len - 1,
                    position: WorldPoint::new(
                        rng.random_range(0.0..10.0),
                        -10.0 - 5.0 * f64::from(k),
                    ),
                },
                0,
            ));
        }
    }
    if r.jitter > 0.0 {
        out.push(CorruptionSpec::new(
            Corruption::Jitter {
                meters: r.jitter,
                pixels: 20.0 * r.jitter,
            },
            rng.random(),
        ));
    }
    out
}

fn clip(rows: &[Detection], ids: &[&String], frames: &mut RangeInclusive<Frame>) -> bool {
    let (mut lo, mut hi) = (*frames.start(), *frames.end());
    for id in ids {
        match span_of(rows, id) {
            Some(s) => {
                lo = lo.max(*s.start());
                hi = hi.min(*s.end());
            }
            None => return false,
        }
    }
    *frames = lo..=hi;
    lo <= hi
}

/// A random clean scenario (computed = truth) and its corrupted counterpart.
pub fn random_scenario(p: &RandomParams) -> Result<(Scenario, Scenario)> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let truth = random_truth(p, &mut rng);
    let cameras = plain_cameras(1..=p.cameras);
    let clean = build_scenario(&truth, &truth, cameras.clone(), p.mode)?;

    let mut computed = truth.clone();
    for mut spec in draw_corruptions(p, &truth, &mut rng) {
        // Earlier edits can shrink or remove a track; ranges drawn against the
        // truth are clipped to what is left, and dropped when nothing is.
        let live = match &mut spec.op {
            Corruption::Fragment {
                identity, at_frame, ..
            } => {
                let frames = frames_of(&computed, identity);
                if frames.len() >= 2 {
                    let mut local = ChaCha8Rng::seed_from_u64(spec.seed);
                    *at_frame = frames[local.random_range(1..frames.len())];
                }
                frames.len() >= 2
            }
            Corruption::Drop { identity, frames } => clip(&computed, &[identity], frames),
            Corruption::Flip { a, b, frames } => clip(&computed, &[a, b], frames),
            Corruption::Merge { kept, absorbed } => {
                kept != absorbed
                    && span_of(&computed, kept).is_some()
                    && span_of(&computed, absorbed).is_some()
            }
            Corruption::Spurious { .. } | Corruption::Jitter { .. } => true,
        };
        if live {
            spec.apply(&mut computed)?;
        }
    }
    let corrupted = build_scenario(&truth, &computed, cameras, p.mode)?;
    Ok((clean, corrupted))
}

/// Named scenario presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig2a,
    Fig2b,
    Random,
}

impl Preset {
    pub fn scenario(&self) -> Option<Scenario> {
        Some(match self {
            Preset::Fig1a => make_switch_case(SwitchCase::A),
            Preset::Fig1b => make_switch_case(SwitchCase::B),
            Preset::Fig1c => make_switch_case(SwitchCase::C),
            Preset::Fig2a => make_blind_spot_case(BlindSpotCase::A),
            Preset::Fig2b => make_blind_spot_case(BlindSpotCase::B),
            Preset::Random => return None,
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fig1a" => Preset::Fig1a,
            "fig1b" => Preset::Fig1b,
            "fig1c" => Preset::Fig1c,
            "fig2a" => Preset::Fig2a,
            "fig2b" => Preset::Fig2b,
            "random" => Preset::Random,
            other => return Err(Error::validation(format!("unknown preset `{other}`"))),
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Random => "random",
        })
    }
}
