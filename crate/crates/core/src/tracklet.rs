//! Conservative tracklet generation.
//!
//! Detections are chained frame by frame only while the continuation is
//! unambiguous: a single next-frame detection within the displacement gate
//! (pair rule) or a single one whose motion cost stays under the threshold
//! (triple rule). The accepted detection must also be the only current-frame
//! detection within the gate of it, so merges stop tracklets as well.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::num::Real;
use crate::types::{Detection, FrameIndex, WindowBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrackletId(pub usize);

impl fmt::Display for TrackletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Camera detections on consecutive frames believed to belong to one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet<T> {
    id: TrackletId,
    detections: Vec<Detection<T>>,
}

impl<T: Real> Tracklet<T> {
    /// Builds a tracklet from camera positions starting at `start`.
    pub fn new(id: TrackletId, start: FrameIndex, positions: &[Point2<T>]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyInput("tracklet positions"));
        }
        let detections = positions
            .iter()
            .enumerate()
            .map(|(k, &p)| Detection::camera(FrameIndex(start.0 + k), p))
            .collect();
        Ok(Self { id, detections })
    }

    pub fn id(&self) -> TrackletId {
        self.id
    }

    pub fn detections(&self) -> &[Detection<T>] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn start(&self) -> FrameIndex {
        self.detections[0].frame()
    }

    pub fn end(&self) -> FrameIndex {
        self.detections[self.detections.len() - 1].frame()
    }

    pub fn first_position(&self) -> Point2<T> {
        self.detections[0].position().expect("camera detection")
    }

    pub fn last_position(&self) -> Point2<T> {
        self.detections[self.detections.len() - 1]
            .position()
            .expect("camera detection")
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2<T>> + '_ {
        self.detections.iter().filter_map(Detection::position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackletGenConfig<T> {
    /// Largest displacement of a target between consecutive frames (m).
    #[serde(rename = "max_displacement_dt")]
    pub max_displacement: T,
    #[serde(rename = "w_d")]
    pub direction_weight: T,
    #[serde(rename = "w_s")]
    pub speed_weight: T,
    #[serde(rename = "q_threshold")]
    pub cost_threshold: T,
}

impl<T: Real> Default for TrackletGenConfig<T> {
    fn default() -> Self {
        Self {
            max_displacement: T::lit(1.0),
            direction_weight: T::lit(0.5),
            speed_weight: T::lit(0.5),
            cost_threshold: T::lit(0.3),
        }
    }
}

impl<T: Real> TrackletGenConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_displacement > T::zero()) {
            return Err(Error::config("tracklet.max_displacement_dt", "must be > 0"));
        }
        if !(self.direction_weight >= T::zero()) || !(self.speed_weight >= T::zero()) {
            return Err(Error::config("tracklet.w_d", "weights must be >= 0"));
        }
        if !(self.direction_weight + self.speed_weight > T::zero()) {
            return Err(Error::config("tracklet.w_s", "w_d + w_s must be > 0"));
        }
        if !(self.cost_threshold > T::zero()) {
            return Err(Error::config("tracklet.q_threshold", "must be > 0"));
        }
        Ok(())
    }
}

/// `1 - cos(turn angle)` between the steps `a -> b` and `b -> c`, in `[0, 2]`.
pub fn direction_cost<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Result<T> {
    let u = b - a;
    let v = c - b;
    let (nu, nv) = (u.norm(), v.norm());
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::DegenerateStep);
    }
    let cost = T::one() - u.dot(v) / (nu * nv);
    Ok(cost.max(T::zero()).min(T::lit(2.0)))
}

/// `1 - 2 sqrt(a b) / (a + b)` for step lengths `a`, `b`, in `[0, 1]`.
pub fn speed_cost<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Result<T> {
    let la = (b - a).norm();
    let lb = (c - b).norm();
    let total = la + lb;
    if total == T::zero() {
        return Err(Error::DegenerateStep);
    }
    let cost = T::one() - T::lit(2.0) * (la * lb).sqrt() / total;
    Ok(cost.max(T::zero()).min(T::one()))
}

/// Weighted motion-smoothness cost of extending `a, b` with `c`.
pub fn motion_cost<T: Real>(
    a: Point2<T>,
    b: Point2<T>,
    c: Point2<T>,
    cfg: &TrackletGenConfig<T>,
) -> Result<T> {
    Ok(cfg.direction_weight * direction_cost(a, b, c)? + cfg.speed_weight * speed_cost(a, b, c)?)
}

/// Partitions the window's camera detections into tracklets.
///
/// Frames are scanned chronologically and detections within a frame in input
/// order; each tracklet is grown as far as it goes before the next one starts.
pub fn generate_tracklets<T: Real>(
    bundle: &WindowBundle<T>,
    cfg: &TrackletGenConfig<T>,
) -> Vec<Tracklet<T>> {
    let frames = bundle.frames();
    let gate = cfg.max_displacement;
    let mut visited: Vec<Vec<bool>> = frames.iter().map(|f| vec![false; f.len()]).collect();
    let mut tracklets = Vec::new();

    for start_slot in 0..frames.len() {
        for start_idx in 0..frames[start_slot].len() {
            if visited[start_slot][start_idx] {
                continue;
            }
            visited[start_slot][start_idx] = true;
            let mut chain: Vec<Point2<T>> = vec![frames[start_slot][start_idx]];
            let mut slot = start_slot;

            while slot + 1 < frames.len() {
                let last = chain[chain.len() - 1];
                let next = &frames[slot + 1];
                let near = next
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| last.distance(c) < gate);

                // Triple rule only applies when the previous step has a direction.
                let prev = (chain.len() >= 2)
                    .then(|| chain[chain.len() - 2])
                    .filter(|&p| p.distance(last) > T::zero());
                let mut passing = near.filter(|(_, &c)| match prev {
                    None => true,
                    Some(p) => match motion_cost(p, last, c, cfg) {
                        Ok(q) => q < cfg.cost_threshold,
                        // Zero-length candidate step: pair rule.
                        Err(_) => true,
                    },
                });
                let (idx, cand) = match (passing.next(), passing.next()) {
                    (Some((i, &c)), None) => (i, c),
                    _ => break,
                };
                if visited[slot + 1][idx] {
                    break;
                }
                let backward = frames[slot]
                    .iter()
                    .filter(|&&p| p.distance(cand) < gate)
                    .count();
                if backward != 1 {
                    break;
                }
                visited[slot + 1][idx] = true;
                chain.push(cand);
                slot += 1;
            }

            let id = TrackletId(tracklets.len());
            tracklets.push(
                Tracklet::new(id, FrameIndex(start_slot + 1), &chain).expect("non-empty chain"),
            );
        }
    }
    tracklets
}
