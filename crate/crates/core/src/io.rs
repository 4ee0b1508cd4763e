//! JSONL/JSON interchange files.
//!
//! Every reader reports the file and 1-based line of the first bad record.
//! Frames in files are recording frames (1-based); window trajectories are
//! written with their recording frame, not the window-local one.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::radio::RadioModel;
use crate::search::WindowResult;
use crate::sim::{GroundTruth, Scene};
use crate::tracklet::Tracklet;
use crate::types::{Basestation, Detection, DetectionKind, FrameIndex, RadioMeasurement};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.to_string(),
    }
}

/// Parses one JSON object per non-blank line.
pub fn parse_jsonl<R: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<R>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(path, i + 1, e)))
        .collect()
}

pub fn read_jsonl<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_jsonl(&text, path)
}

pub fn write_jsonl<R: Serialize>(path: &Path, records: impl IntoIterator<Item = R>) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&r).map_err(|e| parse_err(path, 0, e))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<R: Serialize + ?Sized>(path: &Path, value: &R) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, 0, e))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<R: DeserializeOwned>(path: &Path) -> Result<R> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioRecord {
    pub frame: usize,
    pub ap: String,
    pub rssi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackletRecord {
    pub id: String,
    pub frames: Vec<usize>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl TrackletRecord {
    pub fn from_tracklet(t: &Tracklet<f64>, offset: usize) -> Self {
        let mut rec = TrackletRecord {
            id: t.id().to_string(),
            frames: vec![],
            xs: vec![],
            ys: vec![],
        };
        for d in t.detections() {
            let p = d.position().expect("tracklets hold camera detections");
            rec.frames.push(d.frame().0 + offset);
            rec.xs.push(p.x);
            rec.ys.push(p.y);
        }
        rec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub frame: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub kind: DetectionKind,
}

impl TrajectoryRecord {
    pub fn position(&self) -> Option<Point2<f64>> {
        Some(Point2::new(self.x?, self.y?))
    }
}

/// One true position per walker and frame; `in_fov` marks camera coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub walker: usize,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub in_fov: bool,
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection<f64>>> {
    let recs: Vec<DetectionRecord> = read_jsonl(path)?;
    recs.iter()
        .map(|r| {
            if r.frame == 0 {
                return Err(parse_err(path, 0, "frames start at 1"));
            }
            Ok(Detection::camera(
                FrameIndex(r.frame),
                Point2::new(r.x, r.y),
            ))
        })
        .collect()
}

pub fn write_detections(path: &Path, detections: &[Detection<f64>]) -> Result<()> {
    write_jsonl(
        path,
        detections.iter().filter_map(|d| {
            d.position().map(|p| DetectionRecord {
                frame: d.frame().0,
                x: p.x,
                y: p.y,
            })
        }),
    )
}

pub fn read_radio(path: &Path) -> Result<Vec<RadioMeasurement<f64>>> {
    let recs: Vec<RadioRecord> = read_jsonl(path)?;
    Ok(recs
        .into_iter()
        .map(|r| RadioMeasurement {
            frame: FrameIndex(r.frame),
            basestation: r.ap.as_str().into(),
            rssi: r.rssi,
        })
        .collect())
}

pub fn write_radio(path: &Path, radio: &[RadioMeasurement<f64>]) -> Result<()> {
    write_jsonl(path, radio)
}

/// Accepts a JSON array or one object per line.
pub fn read_basestations(path: &Path) -> Result<Vec<Basestation<f64>>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let list: Vec<Basestation<f64>> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e))?
    } else {
        parse_jsonl(&text, path)?
    };
    let mut seen = std::collections::BTreeSet::new();
    for b in &list {
        if !seen.insert(b.id.clone()) {
            return Err(parse_err(
                path,
                0,
                format!("duplicate basestation {}", b.id),
            ));
        }
    }
    Ok(list)
}

pub fn write_tracklets(path: &Path, tracklets: &[Tracklet<f64>], offset: usize) -> Result<()> {
    write_jsonl(
        path,
        tracklets
            .iter()
            .map(|t| TrackletRecord::from_tracklet(t, offset)),
    )
}

pub fn trajectory_records(result: &WindowResult<f64>, offset: usize) -> Vec<TrajectoryRecord> {
    result
        .trajectory
        .iter()
        .map(|p| TrajectoryRecord {
            frame: p.frame.0 + offset,
            x: p.position.map(|q| q.x),
            y: p.position.map(|q| q.y),
            kind: p.kind,
        })
        .collect()
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let recs: Vec<TrajectoryRecord> = read_jsonl(path)?;
    for (i, r) in recs.iter().enumerate() {
        if r.x.is_some() != r.y.is_some() || (r.kind == DetectionKind::Empty) != r.x.is_none() {
            return Err(parse_err(
                path,
                i + 1,
                "position must be absent exactly for kind \"empty\"",
            ));
        }
    }
    Ok(recs)
}

pub fn truth_records(truth: &GroundTruth) -> Vec<TruthRecord> {
    truth
        .positions
        .iter()
        .enumerate()
        .flat_map(|(walker, row)| {
            row.iter().enumerate().map(move |(i, p)| TruthRecord {
                walker,
                frame: i + 1,
                x: p.x,
                y: p.y,
                in_fov: truth.fov.contains(*p),
            })
        })
        .collect()
}

/// Camera-view trajectory of one walker, keyed by recording frame.
pub fn read_truth(path: &Path, walker: usize) -> Result<BTreeMap<usize, Option<Point2<f64>>>> {
    let recs: Vec<TruthRecord> = read_jsonl(path)?;
    let map: BTreeMap<_, _> = recs
        .into_iter()
        .filter(|r| r.walker == walker)
        .map(|r| (r.frame, r.in_fov.then(|| Point2::new(r.x, r.y))))
        .collect();
    if map.is_empty() {
        return Err(parse_err(
            path,
            0,
            format!("no records for walker {walker}"),
        ));
    }
    Ok(map)
}

pub fn read_model(path: &Path) -> Result<RadioModel<f64>> {
    let m: RadioModel<f64> = read_json(path)?;
    m.validate()?;
    Ok(m)
}

/// File names written by [`write_scene`].
pub fn scene_files(scene: &Scene) -> Vec<String> {
    let mut names = vec![
        "ground_truth.jsonl".to_string(),
        "detections.jsonl".to_string(),
    ];
    names.extend(scene.radio.keys().map(|w| format!("rssi_{w}.jsonl")));
    names.push("basestations.json".into());
    names
}

/// Writes ground truth, detections, per-walker RSSI and basestations into
/// `dir`; returns the paths in a fixed order.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let names = scene_files(scene);
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    write_jsonl(&paths[0], truth_records(&scene.truth))?;
    write_detections(&paths[1], &scene.detections)?;
    for (i, radio) in scene.radio.values().enumerate() {
        write_radio(&paths[2 + i], radio)?;
    }
    write_json(
        paths.last().expect("basestations path"),
        &scene.config.basestations,
    )?;
    Ok(paths)
}
