//! Tracklet trees and hypothesis completion.
//!
//! Trees are rooted at tracklets that start early in the window. A tracklet's
//! children are the tracklets that begin shortly after it ends and close to
//! its last detection; every tracklet node also gets an end-of-trajectory
//! (EOT) leaf. Each root-to-leaf path is completed into a full-window
//! [`Hypothesis`] with synthetic and empty detections.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::num::Real;
use crate::tracklet::{Tracklet, TrackletId};
use crate::types::{Detection, DetectionKind, FrameIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig<T> {
    /// Tracklets starting at or before this frame may root a tree.
    pub start_frame_threshold: usize,
    pub max_gap_frames: usize,
    pub max_gap_distance: T,
    pub boundary_margin: T,
    /// Distance gate for edges whose parent ends and child starts at the FOV
    /// boundary (the target left and came back in). Defaults to unlimited.
    pub max_reentry_distance: T,
    /// A skip edge `P -> C` is dropped when some child `B` of `P` also leads
    /// to `C` and every detection of `B` is closer than this to the straight
    /// fill between `P` and `C`. Zero keeps every edge.
    pub skip_tolerance: T,
    /// Upper bound on tracklet nodes, and therefore on hypotheses, per window.
    pub max_hypotheses: usize,
}

impl<T: Real> Default for TreeConfig<T> {
    fn default() -> Self {
        Self {
            start_frame_threshold: 10,
            max_gap_frames: 20,
            max_gap_distance: T::lit(3.0),
            boundary_margin: T::lit(0.5),
            max_reentry_distance: T::infinity(),
            skip_tolerance: T::lit(0.5),
            max_hypotheses: 10_000,
        }
    }
}

impl<T: Real> TreeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_gap_distance >= T::zero()) {
            return Err(Error::config("tree.max_gap_distance", "must be >= 0"));
        }
        if !(self.boundary_margin >= T::zero()) {
            return Err(Error::config("tree.boundary_margin", "must be >= 0"));
        }
        if !(self.max_reentry_distance >= T::zero()) {
            return Err(Error::config("tree.max_reentry_distance", "must be >= 0"));
        }
        if !(self.skip_tolerance >= T::zero()) {
            return Err(Error::config("tree.skip_tolerance", "must be >= 0"));
        }
        if self.max_hypotheses == 0 {
            return Err(Error::config("tree.max_hypotheses", "must be >= 1"));
        }
        Ok(())
    }
}

/// True iff `point` lies within `margin` of the FOV border.
pub fn is_boundary<T: Real>(point: Point2<T>, fov: &Rect<T>, margin: T) -> bool {
    let d = if fov.contains(point) {
        fov.edge_distance(point)
    } else {
        point.distance(fov.clamp(point))
    };
    d <= margin
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodePayload {
    Tracklet(TrackletId),
    Eot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub payload: NodePayload,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: usize,
}

/// Arena holding every tree of a window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Forest {
    nodes: Vec<TreeNode>,
    roots: Vec<NodeId>,
    truncated: bool,
}

impl Forest {
    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether tree growth stopped at the hypothesis cap.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty()).count()
    }

    /// Tracklet ids from the root down to `id` (EOT payloads skipped).
    pub fn path_to(&self, id: NodeId) -> Vec<TrackletId> {
        let mut path = Vec::new();
        let mut cur = Some(id);
        while let Some(n) = cur {
            let node = self.node(n);
            if let NodePayload::Tracklet(t) = node.payload {
                path.push(t);
            }
            cur = node.parent;
        }
        path.reverse();
        path
    }

    /// EOT leaves under `root`, depth-first in child order.
    pub fn leaves_under(&self, root: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = self.node(n);
            if node.children.is_empty() {
                out.push(n);
            }
            stack.extend(node.children.iter().rev().copied());
        }
        out
    }

    /// Nested JSON dump of the forest for inspection.
    pub fn to_json(&self) -> Value {
        fn walk(f: &Forest, id: NodeId) -> Value {
            let node = f.node(id);
            match node.payload {
                NodePayload::Eot => json!({ "eot": true }),
                NodePayload::Tracklet(t) => json!({
                    "tracklet": t.to_string(),
                    "children": node.children.iter().map(|&c| walk(f, c)).collect::<Vec<_>>(),
                }),
            }
        }
        json!({
            "truncated": self.truncated,
            "roots": self.roots.iter().map(|&r| walk(self, r)).collect::<Vec<_>>(),
        })
    }

    fn push(&mut self, payload: NodePayload, parent: Option<NodeId>) -> NodeId {
        let depth = parent.map_or(0, |p| self.nodes[p.0].depth + 1);
        let id = NodeId(self.nodes.len());
        self.nodes.push(TreeNode {
            payload,
            parent,
            children: Vec::new(),
            depth,
        });
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        id
    }
}

fn successors<T: Real>(
    tracklets: &[Tracklet<T>],
    fov: &Rect<T>,
    cfg: &TreeConfig<T>,
) -> Vec<Vec<usize>> {
    let edges = gated_edges(tracklets, fov, cfg);
    (0..tracklets.len())
        .map(|p| {
            edges[p]
                .iter()
                .copied()
                .filter(|&c| {
                    !edges[p].iter().any(|&b| {
                        b != c
                            && edges[b].contains(&c)
                            && on_fill(
                                &tracklets[b],
                                &tracklets[p],
                                &tracklets[c],
                                cfg.skip_tolerance,
                            )
                    })
                })
                .collect()
        })
        .collect()
}

/// Whether `mid` lies within `tol` of the gap fill from `from` to `to`.
fn on_fill<T: Real>(mid: &Tracklet<T>, from: &Tracklet<T>, to: &Tracklet<T>, tol: T) -> bool {
    let (a, b) = (from.last_position(), to.first_position());
    let (fa, fb) = (from.end().0, to.start().0);
    let span = T::lit((fb - fa) as f64);
    mid.detections().iter().all(|d| {
        let at = a.lerp(b, T::lit((d.frame().0 - fa) as f64) / span);
        d.position().is_some_and(|p| p.distance(at) < tol)
    })
}

fn gated_edges<T: Real>(
    tracklets: &[Tracklet<T>],
    fov: &Rect<T>,
    cfg: &TreeConfig<T>,
) -> Vec<Vec<usize>> {
    tracklets
        .iter()
        .map(|parent| {
            let end = parent.end().0;
            let last = parent.last_position();
            let exits = is_boundary(last, fov, cfg.boundary_margin);
            tracklets
                .iter()
                .enumerate()
                .filter(|(_, child)| {
                    let start = child.start().0;
                    if start <= end || start - end > cfg.max_gap_frames {
                        return false;
                    }
                    let d = last.distance(child.first_position());
                    if d <= cfg.max_gap_distance {
                        return true;
                    }
                    exits
                        && is_boundary(child.first_position(), fov, cfg.boundary_margin)
                        && d <= cfg.max_reentry_distance
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect()
}

/// Builds the tracklet forest breadth-first.
///
/// Growth stops once `cfg.max_hypotheses` tracklet nodes exist, so shallow
/// paths are kept before deep ones; [`Forest::truncated`] reports the cut.
pub fn build_trees<T: Real>(
    tracklets: &[Tracklet<T>],
    fov: &Rect<T>,
    cfg: &TreeConfig<T>,
) -> Forest {
    let succ = successors(tracklets, fov, cfg);
    let mut forest = Forest::default();
    let mut queue = VecDeque::new();
    let mut budget = cfg.max_hypotheses;

    for (i, t) in tracklets.iter().enumerate() {
        if t.start().0 > cfg.start_frame_threshold {
            continue;
        }
        if budget == 0 {
            forest.truncated = true;
            break;
        }
        budget -= 1;
        let id = forest.push(NodePayload::Tracklet(t.id()), None);
        forest.roots.push(id);
        queue.push_back((id, i));
    }

    'grow: while let Some((node, idx)) = queue.pop_front() {
        for &child in &succ[idx] {
            if budget == 0 {
                forest.truncated = true;
                break 'grow;
            }
            budget -= 1;
            let id = forest.push(NodePayload::Tracklet(tracklets[child].id()), Some(node));
            queue.push_back((id, child));
        }
    }

    let tracklet_nodes: Vec<NodeId> = (0..forest.nodes.len()).map(NodeId).collect();
    for n in tracklet_nodes {
        forest.push(NodePayload::Eot, Some(n));
    }
    forest
}

/// Which completion rule fills the frames after the last tracklet of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    /// Path terminates at an EOT leaf: the target stays at its last position.
    Eot,
    /// Plain path: empty if the last detection is at the boundary, otherwise
    /// synthetic at the last position.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentRule {
    Tracklet(TrackletId),
    First(DetectionKind),
    Gap(DetectionKind),
    Last(DetectionKind),
    Eot,
}

/// A run of frames `[start, end]` produced by one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSegment {
    pub rule: SegmentRule,
    pub start: FrameIndex,
    pub end: FrameIndex,
}

/// A full-window candidate trajectory: one detection per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    detections: Vec<Detection<T>>,
    segments: Vec<PathSegment>,
}

impl<T: Real> Hypothesis<T> {
    /// Wraps an explicit detection list; frames must be `1..=W` in order.
    pub fn from_detections(detections: Vec<Detection<T>>) -> Result<Self> {
        for (k, d) in detections.iter().enumerate() {
            if d.frame() != FrameIndex(k + 1) {
                return Err(Error::InvalidPath(format!(
                    "detection {k} has frame {}",
                    d.frame()
                )));
            }
        }
        Ok(Self {
            detections,
            segments: Vec::new(),
        })
    }

    pub fn detections(&self) -> &[Detection<T>] {
        &self.detections
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn tracklet_ids(&self) -> Vec<TrackletId> {
        self.segments
            .iter()
            .filter_map(|s| match s.rule {
                SegmentRule::Tracklet(id) => Some(id),
                _ => None,
            })
            .collect()
    }

    pub fn camera_count(&self) -> usize {
        self.detections.iter().filter(|d| d.is_camera()).count()
    }

    /// `|H|`: number of non-empty detections.
    pub fn non_empty_count(&self) -> usize {
        self.detections.iter().filter(|d| !d.is_empty()).count()
    }

    pub fn first_camera(&self) -> Option<&Detection<T>> {
        self.detections.iter().find(|d| d.is_camera())
    }
}

fn fill<T: Real>(
    out: &mut Vec<Detection<T>>,
    segments: &mut Vec<PathSegment>,
    frames: std::ops::RangeInclusive<usize>,
    rule: impl Fn(DetectionKind) -> SegmentRule,
    kind: DetectionKind,
    at: impl Fn(usize) -> Point2<T>,
) {
    if frames.is_empty() {
        return;
    }
    let (start, end) = (*frames.start(), *frames.end());
    for f in frames {
        out.push(match kind {
            DetectionKind::Empty => Detection::empty(FrameIndex(f)),
            DetectionKind::Synthetic => Detection::synthetic(FrameIndex(f), at(f)),
            DetectionKind::Camera => unreachable!("gap fill never emits camera detections"),
        });
    }
    segments.push(PathSegment {
        rule: rule(kind),
        start: FrameIndex(start),
        end: FrameIndex(end),
    });
}

/// Completes a chronological tracklet path into a `window`-frame hypothesis.
pub fn complete_path<T: Real>(
    path: &[&Tracklet<T>],
    fov: &Rect<T>,
    window: usize,
    cfg: &TreeConfig<T>,
    end: PathEnd,
) -> Result<Hypothesis<T>> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::InvalidPath("empty path".into())),
    };
    for pair in path.windows(2) {
        if pair[1].start() <= pair[0].end() {
            return Err(Error::InvalidPath(format!(
                "{} (frames {}-{}) overlaps {} (frames {}-{})",
                pair[0].id(),
                pair[0].start(),
                pair[0].end(),
                pair[1].id(),
                pair[1].start(),
                pair[1].end()
            )));
        }
    }
    if last.end().0 > window {
        return Err(Error::InvalidPath(format!(
            "{} ends after frame {window}",
            last.id()
        )));
    }
    let boundary = |p: Point2<T>| is_boundary(p, fov, cfg.boundary_margin);

    let mut dets = Vec::with_capacity(window);
    let mut segs = Vec::with_capacity(2 * path.len() + 2);

    let head = first.first_position();
    let kind = if boundary(head) {
        DetectionKind::Empty
    } else {
        DetectionKind::Synthetic
    };
    fill(
        &mut dets,
        &mut segs,
        1..=first.start().0 - 1,
        SegmentRule::First,
        kind,
        |_| head,
    );

    for (i, t) in path.iter().enumerate() {
        if i > 0 {
            let prev = path[i - 1];
            let (a, b) = (prev.last_position(), t.first_position());
            let (fa, fb) = (prev.end().0, t.start().0);
            let kind = if boundary(a) && boundary(b) {
                DetectionKind::Empty
            } else {
                DetectionKind::Synthetic
            };
            let span = T::lit((fb - fa) as f64);
            fill(
                &mut dets,
                &mut segs,
                fa + 1..=fb - 1,
                SegmentRule::Gap,
                kind,
                |f| a.lerp(b, T::lit((f - fa) as f64) / span),
            );
        }
        dets.extend_from_slice(t.detections());
        segs.push(PathSegment {
            rule: SegmentRule::Tracklet(t.id()),
            start: t.start(),
            end: t.end(),
        });
    }

    let tail = last.last_position();
    let tail_frames = last.end().0 + 1..=window;
    match end {
        PathEnd::Eot => {
            fill(
                &mut dets,
                &mut segs,
                tail_frames,
                |_| SegmentRule::Eot,
                DetectionKind::Synthetic,
                |_| tail,
            );
        }
        PathEnd::Open => {
            let kind = if boundary(tail) {
                DetectionKind::Empty
            } else {
                DetectionKind::Synthetic
            };
            fill(
                &mut dets,
                &mut segs,
                tail_frames,
                SegmentRule::Last,
                kind,
                |_| tail,
            );
        }
    }
    debug_assert_eq!(dets.len(), window);
    Ok(Hypothesis {
        detections: dets,
        segments: segs,
    })
}

/// Hypotheses of a forest in depth-first root order.
#[derive(Debug, Clone)]
pub struct Enumeration<T> {
    pub hypotheses: Vec<Hypothesis<T>>,
    pub truncated: bool,
}

/// Completes every root-to-leaf path of `forest` into a hypothesis.
pub fn enumerate_hypotheses<T: Real>(
    forest: &Forest,
    tracklets: &[Tracklet<T>],
    fov: &Rect<T>,
    window: usize,
    cfg: &TreeConfig<T>,
) -> Result<Enumeration<T>> {
    let by_id = |id: TrackletId| -> Result<&Tracklet<T>> {
        tracklets
            .iter()
            .find(|t| t.id() == id)
            .ok_or_else(|| Error::InvalidPath(format!("unknown tracklet {id}")))
    };
    // Ids are dense indices when tracklets come from `generate_tracklets`.
    let dense = tracklets.iter().enumerate().all(|(i, t)| t.id().0 == i);
    let lookup = |id: TrackletId| -> Result<&Tracklet<T>> {
        if dense {
            tracklets
                .get(id.0)
                .ok_or_else(|| Error::InvalidPath(format!("unknown tracklet {id}")))
        } else {
            by_id(id)
        }
    };

    let per_root: Vec<Result<Vec<Hypothesis<T>>>> = forest
        .roots()
        .par_iter()
        .map(|&root| {
            forest
                .leaves_under(root)
                .into_iter()
                .map(|leaf| {
                    let ids = forest.path_to(leaf);
                    let path = ids
                        .iter()
                        .map(|&id| lookup(id))
                        .collect::<Result<Vec<_>>>()?;
                    let end = match forest.node(leaf).payload {
                        NodePayload::Eot => PathEnd::Eot,
                        NodePayload::Tracklet(_) => PathEnd::Open,
                    };
                    complete_path(&path, fov, window, cfg, end)
                })
                .collect()
        })
        .collect();

    let mut hypotheses = Vec::new();
    for r in per_root {
        hypotheses.extend(r?);
    }
    Ok(Enumeration {
        hypotheses,
        truncated: forest.truncated(),
    })
}
