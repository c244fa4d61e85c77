//! Detection CSV files and homography directories.
//!
//! Each data line has exactly nine comma-separated fields:
//!
//! ```text
//! camera,frame,id,bb_left,bb_top,bb_width,bb_height,world_x,world_y
//! ```
//!
//! A box of width and height `-1` is absent; a world coordinate of
//! `-1000000000` marks the world point absent. An optional header line is
//! recognized by a non-numeric first field.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Homography, WorldPoint};
use crate::model::{
    build_scenario, CameraId, CameraInfo, Cameras, Detection, Frame, OverlapMode, Scenario,
};

pub const HEADER: &str = "camera,frame,id,bb_left,bb_top,bb_width,bb_height,world_x,world_y";
pub const BOX_ABSENT: f64 = -1.0;
pub const WORLD_ABSENT: f64 = -1e9;
const FIELDS: usize = 9;

/// A parsed line; sentinels are already mapped to `None`.
pub type DetectionRow = Detection;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_line(text: &str, line: usize) -> Result<DetectionRow> {
    let mut fields: [&str; FIELDS] = [""; FIELDS];
    let mut n = 0;
    for f in text.split(',') {
        if n == FIELDS {
            n += 1;
            break;
        }
        fields[n] = f.trim();
        n += 1;
    }
    if n != FIELDS {
        let found = text.split(',').count();
        return Err(parse_err(
            line,
            1,
            format!("expected {FIELDS} comma-separated fields, found {found}"),
        ));
    }

    let int = |col: usize, what: &str| -> Result<u32> {
        fields[col].parse::<u32>().map_err(|_| {
            parse_err(
                line,
                col + 1,
                format!("{what} `{}` is not a non-negative integer", fields[col]),
            )
        })
    };
    let real = |col: usize| -> Result<f64> {
        match fields[col].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_err(
                line,
                col + 1,
                format!("`{}` is not a finite number", fields[col]),
            )),
        }
    };

    let camera: CameraId = int(0, "camera")?;
    let frame: Frame = int(1, "frame")?;
    let identity = fields[2];
    if identity.is_empty() {
        return Err(parse_err(line, 3, "empty identity"));
    }
    let (left, top, width, height) = (real(3)?, real(4)?, real(5)?, real(6)?);
    let bbox = if width == BOX_ABSENT && height == BOX_ABSENT {
        None
    } else if width > 0.0 && height > 0.0 {
        Some(BBox::new(left, top, width, height))
    } else {
        let col = if width > 0.0 { 7 } else { 6 };
        return Err(parse_err(
            line,
            col,
            "box width and height must be positive (or both -1)",
        ));
    };
    let (x, y) = (real(7)?, real(8)?);
    let world = if x <= WORLD_ABSENT || y <= WORLD_ABSENT {
        None
    } else {
        Some(WorldPoint::new(x, y))
    };
    if bbox.is_none() && world.is_none() {
        return Err(parse_err(
            line,
            4,
            "neither a box nor a world point is present",
        ));
    }
    Ok(Detection::new(camera, frame, identity, bbox, world))
}

fn is_header(text: &str) -> bool {
    let first = text.split(',').next().unwrap_or("").trim();
    first.parse::<f64>().is_err()
}

/// Parses detection rows from a reader. Blank lines are skipped.
pub fn read_detections(reader: impl Read) -> Result<Vec<DetectionRow>> {
    let mut rows = Vec::new();
    let mut reader = BufReader::with_capacity(1 << 16, reader);
    let mut buf = String::new();
    let mut line = 0usize;
    let mut seen_data = false;
    loop {
        buf.clear();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| parse_err(line + 1, 1, format!("read failed: {e}")))?;
        if n == 0 {
            break;
        }
        line += 1;
        let text = buf.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        if !seen_data {
            seen_data = true;
            if is_header(text) {
                continue;
            }
        }
        rows.push(parse_line(text, line)?);
    }
    Ok(rows)
}

pub fn parse_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_detections(file)
}

/// Writes rows with a header line. Floats use the shortest representation that
/// reads back to the same value.
pub fn write_detections(mut out: impl Write, rows: &[DetectionRow]) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for d in rows {
        write!(out, "{},{},{},", d.site.camera, d.site.frame, d.identity)?;
        match &d.bbox {
            Some(b) => write!(out, "{},{},{},{},", b.left, b.top, b.width, b.height)?,
            None => write!(out, "-1,-1,-1,-1,")?,
        }
        match &d.world {
            Some(w) => writeln!(out, "{},{}", w.x, w.y)?,
            None => writeln!(out, "{WORLD_ABSENT},{WORLD_ABSENT}")?,
        }
    }
    Ok(())
}

pub fn save_detections(path: impl AsRef<Path>, rows: &[DetectionRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_detections(&mut w, rows).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads every `camera<k>.txt` in `dir` as the homography of camera `k`.
pub fn load_homographies(dir: impl AsRef<Path>) -> Result<BTreeMap<CameraId, Homography>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(k) = name
            .strip_prefix("camera")
            .and_then(|s| s.strip_suffix(".txt"))
            .and_then(|s| s.parse::<CameraId>().ok())
        else {
            continue;
        };
        out.insert(k, Homography::from_file(entry.path())?);
    }
    Ok(out)
}

/// Reads both CSVs and builds a scenario. The camera set is every camera
/// seen in either file, in the homography directory or in `frame_offsets`.
pub fn load_scenario(
    gt: &Path,
    res: &Path,
    mode: OverlapMode,
    homographies: Option<&Path>,
    frame_offsets: &BTreeMap<CameraId, i64>,
) -> Result<Scenario> {
    mode.validate()?;
    let (truth, computed) = rayon::join(|| parse_detections(gt), || parse_detections(res));
    let (truth, computed) = (truth?, computed?);
    let mut homographies = match homographies {
        Some(dir) => load_homographies(dir)?,
        None => BTreeMap::new(),
    };
    let ids: BTreeSet<CameraId> = truth
        .iter()
        .chain(&computed)
        .map(|d| d.site.camera)
        .chain(homographies.keys().copied())
        .chain(frame_offsets.keys().copied())
        .collect();
    let cameras: Cameras = ids
        .into_iter()
        .map(|c| {
            let info = CameraInfo {
                homography: homographies.remove(&c),
                frame_offset: frame_offsets.get(&c).copied().unwrap_or(0),
            };
            (c, info)
        })
        .collect();
    build_scenario(&truth, &computed, cameras, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_only_row() {
        let rows = read_detections("1,100,A,10,20,50,100,-1,-1000000000\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        let d = &rows[0];
        assert_eq!(
            (d.site.camera, d.site.frame, d.identity.as_str()),
            (1, 100, "A")
        );
        assert_eq!(d.bbox, Some(BBox::new(10.0, 20.0, 50.0, 100.0)));
        assert_eq!(d.world, None);
    }

    #[test]
    fn world_only_row() {
        let rows = read_detections("2,5,7,-1,-1,-1,-1,3.5,-2\n".as_bytes()).unwrap();
        assert_eq!(rows[0].bbox, None);
        assert_eq!(rows[0].world, Some(WorldPoint::new(3.5, -2.0)));
    }

    #[test]
    fn wrong_arity() {
        let text = "1,1,A,0,0,1,1,0,0\n1,2,A,0,0,1,1,0\n";
        match read_detections(text.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        let text = "1,1,A,0,0,1,1,0,0,9\n";
        assert!(matches!(
            read_detections(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn header_skipped() {
        let text = format!("{HEADER}\n1,1,A,0,0,1,1,0,0\n");
        assert_eq!(read_detections(text.as_bytes()).unwrap().len(), 1);
        // only the first line may be a header
        let text = format!("1,1,A,0,0,1,1,0,0\n{HEADER}\n");
        assert!(read_detections(text.as_bytes()).is_err());
    }

    #[test]
    fn empty_input() {
        assert!(read_detections("".as_bytes()).unwrap().is_empty());
        assert!(read_detections("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn bad_fields_report_column() {
        let cases = [
            ("x1,1,A,0,0,1,1,0,0\n1,z,A,0,0,1,1,0,0", 2, 2),
            ("1,-3,A,0,0,1,1,0,0", 1, 2),
            ("1,1,,0,0,1,1,0,0", 1, 3),
            ("1,1,A,0,0,0,1,0,0", 1, 6),
            ("1,1,A,0,0,1,nan,0,0", 1, 7),
            ("1,1,A,-1,-1,-1,-1,-1e9,0", 1, 4),
        ];
        for (text, l, c) in cases {
            match read_detections(text.as_bytes()) {
                Err(Error::Parse { line, column, .. }) => {
                    assert_eq!((line, column), (l, c), "{text}")
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn homography_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("camera3.txt"), "1 0 0 0 1 0 0 0 1").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let h = load_homographies(dir.path()).unwrap();
        assert_eq!(h.keys().copied().collect::<Vec<_>>(), [3]);
    }

    fn arb_row() -> impl Strategy<Value = DetectionRow> {
        let bbox = proptest::option::of(
            (-1e4..1e4f64, -1e4..1e4f64, 0.001..1e3f64, 0.001..1e3f64)
                .prop_map(|(l, t, w, h)| BBox::new(l, t, w, h)),
        );
        let world = proptest::option::of(
            (-1e6..1e6f64, -1e6..1e6f64).prop_map(|(x, y)| WorldPoint::new(x, y)),
        );
        (0u32..100, 0u32..1_000_000, "[A-Za-z0-9_]{1,8}", bbox, world)
            .prop_filter("needs geometry", |r| r.3.is_some() || r.4.is_some())
            .prop_map(|(c, f, id, b, w)| Detection::new(c, f, id, b, w))
    }

    proptest! {
        #[test]
        fn round_trip(rows in proptest::collection::vec(arb_row(), 0..20)) {
            let mut buf = Vec::new();
            write_detections(&mut buf, &rows).unwrap();
            prop_assert_eq!(read_detections(buf.as_slice()).unwrap(), rows);
        }
    }
}
