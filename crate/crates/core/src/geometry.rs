//! Spatial predicates: box IoU, ground-plane distance, homography projection,
//! and the per-site miss predicate that drives all identity costs.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Observation, OverlapMode, Trajectory};

/// Image box in pixels: left, top, width, height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        BBox {
            left,
            top,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Bottom-center of the box, where a standing person touches the ground.
    pub fn foot_point(&self) -> (f64, f64) {
        (self.left + 0.5 * self.width, self.top + self.height)
    }
}

/// Ground-plane position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64) -> Self {
        WorldPoint { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.left + a.width).min(b.left + b.width) - a.left.max(b.left);
    let h = (a.top + a.height).min(b.top + b.height) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Image-to-ground-plane homography, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography([[f64; 3]; 3]);

impl Homography {
    const MIN_DET: f64 = 1e-12;
    const MIN_W: f64 = 1e-9;

    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("homography has non-finite entries"));
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det.abs() < Self::MIN_DET {
            return Err(Error::validation(format!(
                "homography is singular (determinant {det:e})"
            )));
        }
        Ok(Homography(m))
    }

    pub fn identity() -> Self {
        Homography([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn project(&self, (u, v): (f64, f64)) -> Result<WorldPoint> {
        let m = &self.0;
        let x = m[0][0] * u + m[0][1] * v + m[0][2];
        let y = m[1][0] * u + m[1][1] * v + m[1][2];
        let w = m[2][0] * u + m[2][1] * v + m[2][2];
        if w.abs() < Self::MIN_W {
            return Err(Error::DegenerateProjection { w });
        }
        Ok(WorldPoint::new(x / w, y / w))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse().map_err(|e| match e {
            Error::Validation(m) => Error::validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

impl FromStr for Homography {
    type Err = Error;

    /// Nine whitespace-separated numbers, row-major.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::validation(format!("homography entry `{t}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 9 {
            return Err(Error::validation(format!(
                "homography needs 9 numbers, found {}",
                values.len()
            )));
        }
        let mut m = [[0.0; 3]; 3];
        for (i, v) in values.into_iter().enumerate() {
            m[i / 3][i % 3] = v;
        }
        Homography::new(m)
    }
}

fn require_box(o: &Observation) -> Result<&BBox> {
    o.bbox.as_ref().ok_or_else(|| {
        Error::validation(format!(
            "IoU mode needs a box at camera {} frame {}",
            o.site.camera, o.site.frame
        ))
    })
}

fn require_world(o: &Observation) -> Result<&WorldPoint> {
    o.world.as_ref().ok_or_else(|| {
        Error::validation(format!(
            "ground-plane mode needs a world point at camera {} frame {}",
            o.site.camera, o.site.frame
        ))
    })
}

/// Whether two simultaneous regular detections overlap in space.
/// Ties sit on the overlapping side: IoU exactly Δ, or distance exactly Δ.
pub fn overlaps(a: &Observation, b: &Observation, mode: OverlapMode) -> Result<bool> {
    match mode {
        OverlapMode::Iou { threshold } => Ok(iou(require_box(a)?, require_box(b)?) >= threshold),
        OverlapMode::GroundPlane { max_distance } => {
            Ok(require_world(a)?.distance(require_world(b)?) <= max_distance)
        }
    }
}

/// Gated matching cost for per-frame assignment: `1 − IoU` or distance in
/// meters, `None` when the pair fails the overlap test.
pub fn gated_cost(a: &Observation, b: &Observation, mode: OverlapMode) -> Result<Option<f64>> {
    match mode {
        OverlapMode::Iou { threshold } => {
            let v = iou(require_box(a)?, require_box(b)?);
            Ok((v >= threshold).then_some(1.0 - v))
        }
        OverlapMode::GroundPlane { max_distance } => {
            let d = require_world(a)?.distance(require_world(b)?);
            Ok((d <= max_distance).then_some(d))
        }
    }
}

/// The miss predicate at one site. An absent detection on either side is a
/// miss; both absent is undefined.
pub fn is_miss(
    truth: Option<&Observation>,
    computed: Option<&Observation>,
    mode: OverlapMode,
) -> Result<bool> {
    match (truth, computed) {
        (Some(a), Some(b)) => Ok(!overlaps(a, b, mode)?),
        (None, None) => Err(Error::validation(
            "miss predicate is undefined when both detections are absent",
        )),
        _ => Ok(true),
    }
}

/// False-negative and false-positive frame counts for one pairing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCost {
    pub fn_count: u64,
    pub fp_count: u64,
}

impl PairCost {
    pub fn total(&self) -> u64 {
        self.fn_count + self.fp_count
    }
}

/// Cost of pairing `truth` with `computed`; `None` stands for the irregular
/// partner (`f⁻` on the computed side, `f⁺` on the truth side).
pub fn pair_cost(
    truth: Option<&Trajectory>,
    computed: Option<&Trajectory>,
    mode: OverlapMode,
) -> Result<PairCost> {
    let (tau, gamma) = match (truth, computed) {
        (None, None) => return Ok(PairCost::default()),
        (Some(t), None) => {
            return Ok(PairCost {
                fn_count: t.len() as u64,
                fp_count: 0,
            })
        }
        (None, Some(g)) => {
            return Ok(PairCost {
                fn_count: 0,
                fp_count: g.len() as u64,
            })
        }
        (Some(t), Some(g)) => (t.observations(), g.observations()),
    };

    let mut cost = PairCost::default();
    let (mut i, mut j) = (0, 0);
    while i < tau.len() || j < gamma.len() {
        let order = match (tau.get(i), gamma.get(j)) {
            (Some(a), Some(b)) => a.site.cmp(&b.site),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match order {
            std::cmp::Ordering::Less => {
                cost.fn_count += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                cost.fp_count += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                if is_miss(Some(&tau[i]), Some(&gamma[j]), mode)? {
                    cost.fn_count += 1;
                    cost.fp_count += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    Ok(cost)
}
