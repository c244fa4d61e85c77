//! Trajectory data model: sites on a synchronized global timeline, detections,
//! trajectories grouped by identity, and validated scenarios.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Homography, WorldPoint};

pub type CameraId = u32;
pub type Frame = u32;

/// A (camera, frame) pair. Two detections at the same site are simultaneous.
///
/// Sites order by frame first, then camera, so sorting a trajectory's sites
/// yields its time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub camera: CameraId,
    pub frame: Frame,
}

impl Site {
    pub fn new(camera: CameraId, frame: Frame) -> Self {
        Site { camera, frame }
    }
}

impl Ord for Site {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.frame, self.camera).cmp(&(other.frame, other.camera))
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Truth,
    Computed,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Truth => f.write_str("truth"),
            Side::Computed => f.write_str("computed"),
        }
    }
}

/// One input observation, before grouping into trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub site: Site,
    pub identity: String,
    pub bbox: Option<BBox>,
    pub world: Option<WorldPoint>,
}

impl Detection {
    pub fn new(
        camera: CameraId,
        frame: Frame,
        identity: impl Into<String>,
        bbox: Option<BBox>,
        world: Option<WorldPoint>,
    ) -> Self {
        Detection {
            site: Site::new(camera, frame),
            identity: identity.into(),
            bbox,
            world,
        }
    }

    fn check(&self) -> Result<()> {
        if self.bbox.is_none() && self.world.is_none() {
            return Err(Error::validation(format!(
                "detection of `{}` at camera {} frame {} has neither box nor world point",
                self.identity, self.site.camera, self.site.frame
            )));
        }
        if let Some(b) = &self.bbox {
            if !(b.width > 0.0 && b.height > 0.0) {
                return Err(Error::validation(format!(
                    "detection of `{}` at camera {} frame {} has non-positive box size {}x{}",
                    self.identity, self.site.camera, self.site.frame, b.width, b.height
                )));
            }
        }
        Ok(())
    }
}

/// The geometry of one trajectory at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub site: Site,
    pub bbox: Option<BBox>,
    pub world: Option<WorldPoint>,
}

/// All observations of one identity on one side, sorted by site.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    identity: String,
    side: Side,
    observations: Vec<Observation>,
}

impl Trajectory {
    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Number of detections, `|T_τ|`.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn at(&self, site: Site) -> Option<&Observation> {
        self.observations
            .binary_search_by(|o| o.site.cmp(&site))
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn first_site(&self) -> Site {
        self.observations[0].site
    }

    pub fn last_site(&self) -> Site {
        self.observations[self.observations.len() - 1].site
    }
}

/// How spatial overlap between two simultaneous detections is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OverlapMode {
    /// Image plane: a miss when IoU < `threshold`.
    Iou { threshold: f64 },
    /// Ground plane: a miss when the distance exceeds `max_distance` meters.
    GroundPlane { max_distance: f64 },
}

impl OverlapMode {
    pub const DEFAULT_IOU: f64 = 0.5;
    pub const DEFAULT_DISTANCE: f64 = 1.0;

    pub fn iou(threshold: f64) -> Self {
        OverlapMode::Iou { threshold }
    }

    pub fn ground_plane(max_distance: f64) -> Self {
        OverlapMode::GroundPlane { max_distance }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            OverlapMode::Iou { threshold } => threshold,
            OverlapMode::GroundPlane { max_distance } => max_distance,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OverlapMode::Iou { .. } => "iou",
            OverlapMode::GroundPlane { .. } => "ground",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OverlapMode::Iou { threshold } if !(threshold > 0.0 && threshold < 1.0) => Err(
                Error::validation(format!("IoU threshold must lie in (0, 1), got {threshold}")),
            ),
            OverlapMode::GroundPlane { max_distance }
                if !(max_distance > 0.0 && max_distance.is_finite()) =>
            {
                Err(Error::validation(format!(
                    "ground-plane distance threshold must be positive, got {max_distance}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Per-camera metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CameraInfo {
    pub homography: Option<Homography>,
    /// Added to every local frame index of this camera at ingestion.
    pub frame_offset: i64,
}

pub type Cameras = BTreeMap<CameraId, CameraInfo>;

/// Convenience for cameras without metadata.
pub fn plain_cameras(ids: impl IntoIterator<Item = CameraId>) -> Cameras {
    ids.into_iter()
        .map(|c| (c, CameraInfo::default()))
        .collect()
}

/// A validated evaluation instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    truth: Vec<Trajectory>,
    computed: Vec<Trajectory>,
    cameras: Cameras,
    mode: OverlapMode,
}

impl Scenario {
    pub fn truth(&self) -> &[Trajectory] {
        &self.truth
    }

    pub fn computed(&self) -> &[Trajectory] {
        &self.computed
    }

    pub fn cameras(&self) -> &Cameras {
        &self.cameras
    }

    pub fn mode(&self) -> OverlapMode {
        self.mode
    }

    pub fn side(&self, side: Side) -> &[Trajectory] {
        match side {
            Side::Truth => &self.truth,
            Side::Computed => &self.computed,
        }
    }

    /// `T`: the total number of true detections.
    pub fn total_truth(&self) -> usize {
        self.truth.iter().map(Trajectory::len).sum()
    }

    pub fn total_computed(&self) -> usize {
        self.computed.iter().map(Trajectory::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty() && self.computed.is_empty()
    }

    /// The same scenario with every truth and computed trajectory swapped.
    pub fn swapped(&self) -> Scenario {
        let flip = |ts: &[Trajectory], side| {
            ts.iter()
                .map(|t| Trajectory { side, ..t.clone() })
                .collect()
        };
        Scenario {
            truth: flip(&self.computed, Side::Truth),
            computed: flip(&self.truth, Side::Computed),
            cameras: self.cameras.clone(),
            mode: self.mode,
        }
    }

    /// Keeps only detections seen by `camera`. Trajectories left empty are dropped.
    pub fn restrict_to_camera(&self, camera: CameraId) -> Result<Scenario> {
        if !self.cameras.contains_key(&camera) {
            return Err(Error::validation(format!("unknown camera {camera}")));
        }
        let keep = |ts: &[Trajectory]| -> Vec<Trajectory> {
            ts.iter()
                .filter_map(|t| {
                    let observations: Vec<_> = t
                        .observations
                        .iter()
                        .filter(|o| o.site.camera == camera)
                        .copied()
                        .collect();
                    (!observations.is_empty()).then(|| Trajectory {
                        identity: t.identity.clone(),
                        side: t.side,
                        observations,
                    })
                })
                .collect()
        };
        Ok(Scenario {
            truth: keep(&self.truth),
            computed: keep(&self.computed),
            cameras: self.cameras.clone(),
            mode: self.mode,
        })
    }

    pub fn timeline_stats(&self) -> TimelineStats {
        let mut per_camera: BTreeMap<CameraId, CameraStats> = self
            .cameras
            .keys()
            .map(|&c| (c, CameraStats::default()))
            .collect();
        for (side, ts) in [(Side::Truth, &self.truth), (Side::Computed, &self.computed)] {
            for t in ts {
                let mut seen_in = Vec::new();
                for o in &t.observations {
                    let s = per_camera.entry(o.site.camera).or_default();
                    s.first_frame =
                        Some(s.first_frame.map_or(o.site.frame, |f| f.min(o.site.frame)));
                    s.last_frame = Some(s.last_frame.map_or(o.site.frame, |f| f.max(o.site.frame)));
                    match side {
                        Side::Truth => s.truth_detections += 1,
                        Side::Computed => s.computed_detections += 1,
                    }
                    if !seen_in.contains(&o.site.camera) {
                        seen_in.push(o.site.camera);
                        match side {
                            Side::Truth => s.truth_identities += 1,
                            Side::Computed => s.computed_identities += 1,
                        }
                    }
                }
            }
        }
        TimelineStats {
            total_truth: self.total_truth(),
            total_computed: self.total_computed(),
            per_camera,
        }
    }

    /// Flattens back to input rows, undoing per-camera frame offsets.
    pub fn to_rows(&self) -> (Vec<Detection>, Vec<Detection>) {
        let flatten = |ts: &[Trajectory]| {
            ts.iter()
                .flat_map(|t| {
                    t.observations.iter().map(move |o| {
                        let offset = self
                            .cameras
                            .get(&o.site.camera)
                            .map_or(0, |c| c.frame_offset);
                        Detection {
                            site: Site::new(o.site.camera, (o.site.frame as i64 - offset) as Frame),
                            identity: t.identity.clone(),
                            bbox: o.bbox,
                            world: o.world,
                        }
                    })
                })
                .collect()
        };
        (flatten(&self.truth), flatten(&self.computed))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CameraStats {
    pub first_frame: Option<Frame>,
    pub last_frame: Option<Frame>,
    pub truth_detections: usize,
    pub computed_detections: usize,
    pub truth_identities: usize,
    pub computed_identities: usize,
}

impl CameraStats {
    pub fn frames_spanned(&self) -> u64 {
        match (self.first_frame, self.last_frame) {
            (Some(a), Some(b)) => u64::from(b - a) + 1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineStats {
    /// `T`.
    pub total_truth: usize,
    pub total_computed: usize,
    pub per_camera: BTreeMap<CameraId, CameraStats>,
}

/// Groups rows into trajectories and validates the result.
pub fn build_scenario(
    truth_rows: &[Detection],
    computed_rows: &[Detection],
    cameras: Cameras,
    mode: OverlapMode,
) -> Result<Scenario> {
    mode.validate()?;
    let truth = group(truth_rows, Side::Truth, &cameras, mode)?;
    let computed = group(computed_rows, Side::Computed, &cameras, mode)?;
    Ok(Scenario {
        truth,
        computed,
        cameras,
        mode,
    })
}

fn group(
    rows: &[Detection],
    side: Side,
    cameras: &Cameras,
    mode: OverlapMode,
) -> Result<Vec<Trajectory>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<(Observation, usize)>)> = Vec::new();

    for (row, det) in rows.iter().enumerate() {
        det.check()?;
        let camera = cameras.get(&det.site.camera).ok_or_else(|| {
            Error::validation(format!(
                "{side} row {row}: unknown camera {}",
                det.site.camera
            ))
        })?;
        let frame = i64::from(det.site.frame) + camera.frame_offset;
        let frame = Frame::try_from(frame).map_err(|_| {
            Error::validation(format!(
                "{side} row {row}: frame {} with camera offset {} leaves the global timeline",
                det.site.frame, camera.frame_offset
            ))
        })?;
        let site = Site::new(det.site.camera, frame);

        let mut world = det.world;
        match mode {
            OverlapMode::Iou { .. } => {
                if det.bbox.is_none() {
                    return Err(Error::validation(format!(
                        "{side} row {row}: IoU mode requires a box (identity `{}`, camera {}, frame {})",
                        det.identity, det.site.camera, det.site.frame
                    )));
                }
            }
            OverlapMode::GroundPlane { .. } => {
                if world.is_none() {
                    world = match (&camera.homography, &det.bbox) {
                        (Some(h), Some(b)) => Some(h.project(b.foot_point())?),
                        _ => {
                            return Err(Error::validation(format!(
                                "{side} row {row}: ground-plane mode requires a world point or a box with a camera homography (identity `{}`, camera {}, frame {})",
                                det.identity, det.site.camera, det.site.frame
                            )))
                        }
                    };
                }
            }
        }

        let obs = Observation {
            site,
            bbox: det.bbox,
            world,
        };
        let slot = *index.entry(det.identity.as_str()).or_insert_with(|| {
            groups.push((det.identity.as_str(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push((obs, row));
    }

    groups
        .into_iter()
        .map(|(identity, mut obs)| {
            obs.sort_by(|a, b| a.0.site.cmp(&b.0.site).then(a.1.cmp(&b.1)));
            if let Some(w) = obs.windows(2).find(|w| w[0].0.site == w[1].0.site) {
                return Err(Error::DuplicateDetection {
                    side,
                    identity: identity.to_owned(),
                    site: w[1].0.site,
                    row: w[1].1,
                });
            }
            Ok(Trajectory {
                identity: identity.to_owned(),
                side,
                observations: obs.into_iter().map(|(o, _)| o).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(left: f64) -> Option<BBox> {
        Some(BBox::new(left, 0.0, 10.0, 20.0))
    }

    fn det(cam: CameraId, frame: Frame, id: &str) -> Detection {
        Detection::new(cam, frame, id, bx(frame as f64), None)
    }

    fn iou() -> OverlapMode {
        OverlapMode::iou(0.5)
    }

    #[test]
    fn groups_single_identity() {
        let rows = vec![det(1, 3, "A"), det(1, 1, "A"), det(1, 2, "A")];
        let s = build_scenario(&rows, &[], plain_cameras([1]), iou()).unwrap();
        assert_eq!(s.truth().len(), 1);
        let t = &s.truth()[0];
        assert_eq!(t.len(), 3);
        let frames: Vec<_> = t.observations().iter().map(|o| o.site.frame).collect();
        assert_eq!(frames, [1, 2, 3]);
    }

    #[test]
    fn switch_case_a_layout() {
        let truth: Vec<_> = (1..=90).map(|f| det(1, f, "A")).collect();
        let computed: Vec<_> = (1..=90)
            .map(|f| det(1, f, if f <= 60 { "1" } else { "2" }))
            .collect();
        let s = build_scenario(&truth, &computed, plain_cameras([1]), iou()).unwrap();
        assert_eq!(s.truth().len(), 1);
        assert_eq!(s.computed().len(), 2);
        assert_eq!(s.timeline_stats().total_truth, 90);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let rows = vec![det(1, 1, "A"), det(1, 2, "A"), det(1, 1, "A")];
        let err = build_scenario(&rows, &[], plain_cameras([1]), iou()).unwrap_err();
        match err {
            Error::DuplicateDetection {
                row, site, side, ..
            } => {
                assert_eq!(row, 2);
                assert_eq!(site, Site::new(1, 1));
                assert_eq!(side, Side::Truth);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn same_site_on_different_sides_is_fine() {
        let rows = vec![det(1, 1, "A")];
        build_scenario(&rows, &rows, plain_cameras([1]), iou()).unwrap();
    }

    #[test]
    fn unknown_camera_rejected() {
        let err = build_scenario(&[det(3, 1, "A")], &[], plain_cameras([1]), iou()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("unknown camera 3")));
    }

    #[test]
    fn missing_box_in_iou_mode() {
        let rows = vec![
            det(1, 1, "A"),
            Detection::new(1, 2, "A", None, Some(WorldPoint::new(0.0, 0.0))),
        ];
        let err = build_scenario(&rows, &[], plain_cameras([1]), iou()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("row 1")));
    }

    #[test]
    fn ground_mode_derives_world_from_homography() {
        let mut cams = plain_cameras([1]);
        cams.get_mut(&1).unwrap().homography = Some(Homography::identity());
        let rows = vec![Detection::new(
            1,
            1,
            "A",
            Some(BBox::new(10.0, 20.0, 4.0, 8.0)),
            None,
        )];
        let s = build_scenario(&rows, &[], cams, OverlapMode::ground_plane(1.0)).unwrap();
        assert_eq!(
            s.truth()[0].observations()[0].world,
            Some(WorldPoint::new(12.0, 28.0))
        );

        let err = build_scenario(
            &rows,
            &[],
            plain_cameras([1]),
            OverlapMode::ground_plane(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn frame_offsets_applied() {
        let mut cams = plain_cameras([1, 2]);
        cams.get_mut(&2).unwrap().frame_offset = 100;
        let rows = vec![det(1, 5, "A"), det(2, 5, "A")];
        let s = build_scenario(&rows, &[], cams.clone(), iou()).unwrap();
        let sites: Vec<_> = s.truth()[0].observations().iter().map(|o| o.site).collect();
        assert_eq!(sites, [Site::new(1, 5), Site::new(2, 105)]);
        let (back, _) = s.to_rows();
        assert_eq!(back, rows);

        cams.get_mut(&2).unwrap().frame_offset = -10;
        assert!(build_scenario(&rows, &[], cams, iou()).is_err());
    }

    #[test]
    fn restriction() {
        let rows = vec![det(1, 1, "A"), det(2, 2, "A"), det(2, 3, "B")];
        let s = build_scenario(&rows, &[], plain_cameras([1, 2, 3]), iou()).unwrap();

        let one = s.restrict_to_camera(1).unwrap();
        assert_eq!(one.truth().len(), 1);
        assert_eq!(one.truth()[0].identity(), "A");
        assert_eq!(one.truth()[0].len(), 1);

        let two = s.restrict_to_camera(2).unwrap();
        assert_eq!(two.truth().len(), 2);

        assert!(s.restrict_to_camera(3).unwrap().is_empty());
        assert!(s.restrict_to_camera(9).is_err());

        let single = build_scenario(&rows[..1], &[], plain_cameras([1]), iou()).unwrap();
        assert_eq!(single.restrict_to_camera(1).unwrap(), single);
    }

    #[test]
    fn stats() {
        let mut truth: Vec<_> = (0..50).map(|f| det(1, f, "A")).collect();
        truth.extend((0..50).map(|f| det(2, f, "B")));
        let s = build_scenario(&truth, &[], plain_cameras([1, 2]), iou()).unwrap();
        let stats = s.timeline_stats();
        assert_eq!(stats.total_truth, 100);
        assert_eq!(stats.per_camera[&1].frames_spanned(), 50);
        assert_eq!(stats.per_camera[&2].truth_identities, 1);

        let empty = build_scenario(&[], &[], plain_cameras([1]), iou()).unwrap();
        assert_eq!(empty.timeline_stats().total_truth, 0);
    }

    #[test]
    fn site_order_is_time_major() {
        let mut v = vec![Site::new(2, 1), Site::new(1, 2), Site::new(1, 1)];
        v.sort();
        assert_eq!(v, [Site::new(1, 1), Site::new(2, 1), Site::new(1, 2)]);
    }
}
