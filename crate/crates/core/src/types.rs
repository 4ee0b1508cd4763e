//! Measurement vocabulary and the window contract.
//!
//! A window covers frames `1..=W`. Every frame has a (possibly empty) slot of
//! camera detections; radio samples are keyed by `(frame, basestation)`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::Real;

/// 1-based frame index within a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameIndex(pub usize);

impl FrameIndex {
    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based slot offset.
    pub fn slot(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for FrameIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Camera,
    Synthetic,
    Empty,
}

impl DetectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionKind::Camera => "camera",
            DetectionKind::Synthetic => "synthetic",
            DetectionKind::Empty => "empty",
        }
    }
}

/// One ground-plane observation. `Empty` detections never carry a position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    frame: FrameIndex,
    kind: DetectionKind,
    position: Option<Point2<T>>,
}

impl<T: Real> Detection<T> {
    pub fn camera(frame: FrameIndex, position: Point2<T>) -> Self {
        Self {
            frame,
            kind: DetectionKind::Camera,
            position: Some(position),
        }
    }

    pub fn synthetic(frame: FrameIndex, position: Point2<T>) -> Self {
        Self {
            frame,
            kind: DetectionKind::Synthetic,
            position: Some(position),
        }
    }

    pub fn empty(frame: FrameIndex) -> Self {
        Self {
            frame,
            kind: DetectionKind::Empty,
            position: None,
        }
    }

    pub fn frame(&self) -> FrameIndex {
        self.frame
    }

    pub fn kind(&self) -> DetectionKind {
        self.kind
    }

    pub fn position(&self) -> Option<Point2<T>> {
        self.position
    }

    pub fn is_empty(&self) -> bool {
        self.kind == DetectionKind::Empty
    }

    pub fn is_camera(&self) -> bool {
        self.kind == DetectionKind::Camera
    }

    /// Same detection moved to another frame index.
    pub fn with_frame(mut self, frame: FrameIndex) -> Self {
        self.frame = frame;
        self
    }
}

/// Radio basestation (access point) identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasestationId(pub String);

impl fmt::Display for BasestationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for BasestationId {
    fn from(s: &str) -> Self {
        BasestationId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMeasurement<T> {
    pub frame: FrameIndex,
    #[serde(rename = "ap")]
    pub basestation: BasestationId,
    /// Received signal strength, dBm.
    pub rssi: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basestation<T> {
    #[serde(rename = "ap")]
    pub id: BasestationId,
    #[serde(flatten)]
    pub position: Point2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig<T> {
    pub window_size_frames: usize,
    pub fps: T,
}

impl<T: Real> WindowConfig<T> {
    pub fn new(window_size_frames: usize, fps: T) -> Result<Self> {
        let cfg = Self {
            window_size_frames,
            fps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size_frames <= 1 {
            return Err(Error::config("window.window_size_frames", "must be > 1"));
        }
        if !(self.fps > T::zero() && self.fps.is_finite()) {
            return Err(Error::config("window.fps", "must be a finite value > 0"));
        }
        Ok(())
    }

    /// Seconds between consecutive frames.
    pub fn frame_period(&self) -> T {
        self.fps.recip()
    }

    pub fn duration_secs(&self) -> T {
        T::lit(self.window_size_frames as f64) * self.frame_period()
    }
}

/// Inputs for one window after validation: exactly `W` detection slots and
/// radio samples sorted by `(frame, basestation)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBundle<T> {
    config: WindowConfig<T>,
    frames: Vec<Vec<Point2<T>>>,
    radio: Vec<RadioMeasurement<T>>,
}

impl<T: Real> WindowBundle<T> {
    pub fn config(&self) -> &WindowConfig<T> {
        &self.config
    }

    pub fn window_size(&self) -> usize {
        self.config.window_size_frames
    }

    /// Camera detection positions at `frame`, in input order.
    pub fn detections_at(&self, frame: FrameIndex) -> &[Point2<T>] {
        &self.frames[frame.slot()]
    }

    pub fn frames(&self) -> &[Vec<Point2<T>>] {
        &self.frames
    }

    pub fn radio(&self) -> &[RadioMeasurement<T>] {
        &self.radio
    }

    pub fn camera_detection_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Camera detections as typed values, frame-major in input order.
    pub fn camera_detections(&self) -> Vec<Detection<T>> {
        self.frames
            .iter()
            .enumerate()
            .flat_map(|(slot, pts)| {
                pts.iter()
                    .map(move |&p| Detection::camera(FrameIndex(slot + 1), p))
            })
            .collect()
    }

    /// Copy of this bundle with all radio samples removed.
    pub fn without_radio(&self) -> Self {
        Self {
            config: self.config,
            frames: self.frames.clone(),
            radio: Vec::new(),
        }
    }
}

/// Checks one window's raw inputs and packs them into a [`WindowBundle`].
///
/// Detections must be camera detections; synthetic and empty detections are
/// produced only by tree completion.
pub fn validate_window_inputs<T: Real>(
    detections: &[Detection<T>],
    radio: &[RadioMeasurement<T>],
    cfg: WindowConfig<T>,
) -> Result<WindowBundle<T>> {
    cfg.validate()?;
    let w = cfg.window_size_frames;
    let check_frame = |frame: FrameIndex| {
        if frame.0 == 0 || frame.0 > w {
            Err(Error::FrameOutOfWindow {
                frame: frame.0,
                window: w,
            })
        } else {
            Ok(())
        }
    };

    let mut frames = vec![Vec::new(); w];
    for det in detections {
        check_frame(det.frame())?;
        let pos = match (det.kind(), det.position()) {
            (DetectionKind::Camera, Some(p)) => p,
            (kind, _) => {
                return Err(Error::InvalidPath(format!(
                    "input detections must be camera detections, got {}",
                    kind.as_str()
                )))
            }
        };
        if !pos.is_finite() {
            return Err(Error::NonFinite(format!(
                "detection coordinates at frame {}",
                det.frame()
            )));
        }
        frames[det.frame().slot()].push(pos);
    }

    let mut seen = BTreeSet::new();
    for m in radio {
        check_frame(m.frame)?;
        if !m.rssi.is_finite() {
            return Err(Error::NonFinite(format!(
                "rssi at frame {} for {}",
                m.frame, m.basestation
            )));
        }
        if !seen.insert((m.frame, m.basestation.clone())) {
            return Err(Error::DuplicateRadioSample {
                frame: m.frame.0,
                basestation: m.basestation.0.clone(),
            });
        }
    }
    let mut radio = radio.to_vec();
    radio.sort_by(|a, b| (a.frame, &a.basestation).cmp(&(b.frame, &b.basestation)));

    Ok(WindowBundle {
        config: cfg,
        frames,
        radio,
    })
}

/// A longer capture (frames `1..=total_frames`) that can be cut into windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub total_frames: usize,
    pub camera: Vec<Detection<T>>,
    pub radio: Vec<RadioMeasurement<T>>,
}

impl<T: Real> Recording<T> {
    /// Frame offsets of consecutive windows of `window` frames advanced by
    /// `stride`. Only complete windows are produced.
    pub fn window_offsets(total_frames: usize, window: usize, stride: usize) -> Vec<usize> {
        if window == 0 || stride == 0 || window > total_frames {
            return Vec::new();
        }
        (0..=total_frames - window).step_by(stride).collect()
    }

    /// Cuts the window starting after `offset` frames and re-indexes it to
    /// frames `1..=W`.
    pub fn window(&self, offset: usize, cfg: WindowConfig<T>) -> Result<WindowBundle<T>> {
        let w = cfg.window_size_frames;
        let in_range = |f: FrameIndex| f.0 > offset && f.0 <= offset + w;
        let camera: Vec<_> = self
            .camera
            .iter()
            .filter(|d| in_range(d.frame()))
            .map(|d| d.with_frame(FrameIndex(d.frame().0 - offset)))
            .collect();
        let radio: Vec<_> = self
            .radio
            .iter()
            .filter(|m| in_range(m.frame))
            .map(|m| RadioMeasurement {
                frame: FrameIndex(m.frame.0 - offset),
                ..m.clone()
            })
            .collect();
        validate_window_inputs(&camera, &radio, cfg)
    }
}
