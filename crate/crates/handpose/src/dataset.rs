//! Annotation files and depth sidecars.
//!
//! An annotation file starts with the line `handpose-annotations 1`. Every
//! other non-empty line not starting with `#` is one frame: an identifier
//! followed by 63 numbers, the `(x, y, z)` of the 21 joints in flat joint
//! order. `x` and `y` are normalized image coordinates and `z` is depth. A
//! `nan` coordinate marks the joint invalid.
//!
//! The depth image of frame `id` lives next to the annotation file in
//! `id.depth`, in the binary grid format of the core crate. Its fill value
//! is the background depth.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use handpose_core::hand::{JointLocations, LayerSet, JOINT_COUNT};
use handpose_core::spatial::{decode_grid, encode_grid};
use handpose_core::synth::{Camera, DepthFrame};
use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const ANNOTATION_HEADER: &str = "handpose-annotations 1";
pub const SIDECAR_EXTENSION: &str = "depth";

/// Joint annotations of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: String,
    pub joints: JointLocations,
}

/// A frame with its annotation.
#[derive(Clone, Debug, PartialEq)]
pub struct Annotated {
    pub id: String,
    pub frame: DepthFrame,
    pub joints: JointLocations,
}

/// Parsed records plus the tolerated anomalies, which are also logged.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
}

pub fn frame_id(index: usize) -> String {
    format!("frame_{index:06}")
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.starts_with('#') || id.contains(|c: char| c.is_whitespace() || c == '/')
    {
        return Err(Error::Config(format!("unusable frame id {id:?}")));
    }
    Ok(())
}

/// Writes `records` as an annotation file. Numbers use the shortest text
/// that reads back to the same `f64`.
pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut out = String::with_capacity(records.len() * 64 * 20);
    out.push_str(ANNOTATION_HEADER);
    out.push('\n');
    for r in records {
        check_id(&r.id)?;
        if r.joints.len() != JOINT_COUNT {
            return Err(Error::Core(handpose_core::Error::JointSetMismatch(
                format!("frame {} has {} joints", r.id, r.joints.len()),
            )));
        }
        out.push_str(&r.id);
        for (p, valid) in r.joints.points().iter().zip(r.joints.validity()) {
            for c in p.iter() {
                let v = if *valid { *c } else { f64::NAN };
                write!(out, " {v:?}").expect("string write");
            }
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn read_records(path: &Path) -> Result<Loaded<Record>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == ANNOTATION_HEADER => {}
        _ => {
            return Err(parse_err(
                1,
                format!("expected header {ANNOTATION_HEADER:?}"),
            ))
        }
    }
    let mut loaded = Loaded {
        items: Vec::new(),
        warnings: Vec::new(),
    };
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().expect("non-empty line").to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("frame {id}: bad number {f:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 3 * JOINT_COUNT {
            return Err(parse_err(
                line_no,
                format!(
                    "frame {id}: expected {JOINT_COUNT} joints ({} numbers), found {} numbers",
                    3 * JOINT_COUNT,
                    values.len()
                ),
            ));
        }
        let points: Vec<Vector3<f64>> = values
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        let valid: Vec<bool> = points
            .iter()
            .map(|p| p.iter().all(|c| !c.is_nan()))
            .collect();
        let outside = points
            .iter()
            .zip(&valid)
            .filter(|(p, v)| {
                let inside = (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y);
                **v && !inside
            })
            .count();
        if outside > 0 {
            let w = format!(
                "{}:{line_no}: frame {id} has {outside} joints outside the image",
                path.display()
            );
            log::warn!("{w}");
            loaded.warnings.push(w);
        }
        let joints = JointLocations::with_validity(LayerSet::ALL, points, valid)?;
        loaded.items.push(Record { id, joints });
    }
    Ok(loaded)
}

pub fn sidecar_path(annotations: &Path, id: &str) -> PathBuf {
    annotations
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("{id}.{SIDECAR_EXTENSION}"))
}

/// Writes the annotation file and one depth sidecar per frame beside it.
pub fn save_annotations(path: &Path, frames: &[Annotated]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
    }
    for f in frames {
        check_id(&f.id)?;
        write_file(&sidecar_path(path, &f.id), &encode_grid(f.frame.depth()))?;
    }
    let records: Vec<Record> = frames
        .iter()
        .map(|f| Record {
            id: f.id.clone(),
            joints: f.joints.clone(),
        })
        .collect();
    write_records(path, &records)
}

pub fn load_annotations(path: &Path) -> Result<Loaded<Annotated>> {
    let records = read_records(path)?;
    let items = records
        .items
        .into_iter()
        .map(|r| {
            let frame = read_frame(&sidecar_path(path, &r.id), &r.id)?;
            Ok(Annotated {
                id: r.id,
                frame,
                joints: r.joints,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Loaded {
        items,
        warnings: records.warnings,
    })
}

fn read_frame(path: &Path, id: &str) -> Result<DepthFrame> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingSidecar {
            frame: id.to_string(),
            path: path.to_path_buf(),
        },
        _ => Error::io(path)(e),
    })?;
    let grid = decode_grid(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    let camera = Camera {
        width: grid.width(),
        height: grid.height(),
        background_depth: grid.fill(),
    };
    Ok(DepthFrame::from_depth(grid, camera)?)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}
