//! Joint visual/radio scoring of hypotheses and selection of `(H, lambda)`.

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{run_hypothesis_filter, FilterConfig, FilterCursor};
use crate::geom::{Point2, Rect};
use crate::num::Real;
use crate::radio::{
    model_grid, PreparedModel, PriorConfig, RadioIndex, RadioModel, RadioMoments, RadioStats,
};
use crate::tracklet::{generate_tracklets, TrackletGenConfig};
use crate::tree::{build_trees, enumerate_hypotheses, Hypothesis, TreeConfig};
use crate::types::{Basestation, DetectionKind, FrameIndex, RadioMeasurement, WindowBundle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Per-hypothesis rows kept in the diagnostics score table.
    pub max_reported_scores: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_reported_scores: 20,
        }
    }
}

/// Everything the window tracker needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig<T> {
    pub fov: Rect<T>,
    pub tracklet: TrackletGenConfig<T>,
    pub tree: TreeConfig<T>,
    pub filter: FilterConfig<T>,
    pub prior: PriorConfig<T>,
    pub search: SearchConfig,
}

impl<T: Real> TrackerConfig<T> {
    pub fn new(fov: Rect<T>) -> Self {
        Self {
            fov,
            tracklet: TrackletGenConfig::default(),
            tree: TreeConfig::default(),
            filter: FilterConfig::default(),
            prior: PriorConfig::default(),
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fov.is_degenerate() {
            return Err(Error::config("fov", "rectangle must have positive area"));
        }
        self.tracklet.validate()?;
        self.tree.validate()?;
        self.filter.validate()?;
        self.prior.validate()
    }
}

/// One `(hypothesis, model)` pair with its score components.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHypothesis<T> {
    /// Position in enumeration order.
    pub hypothesis_index: usize,
    pub model_index: usize,
    pub model: RadioModel<T>,
    pub trajectory: Arc<[Option<Point2<T>>]>,
    pub camera_count: usize,
    pub visual_score: T,
    pub radio_score: T,
    pub total: T,
}

/// Ordering used by `select_best`: higher total, then more camera
/// detections, then earlier hypothesis, then earlier model.
fn rank<T: Real>(a: (T, usize, usize, usize), b: (T, usize, usize, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
        .then(b.2.cmp(&a.2))
        .then(b.3.cmp(&a.3))
}

impl<T: Real> ScoredHypothesis<T> {
    fn key(&self) -> (T, usize, usize, usize) {
        (
            self.total,
            self.camera_count,
            self.hypothesis_index,
            self.model_index,
        )
    }
}

/// Per-hypothesis work that does not depend on the radio model.
struct Evaluated<T> {
    visual: T,
    non_empty: usize,
    stats: RadioStats<T>,
    camera: usize,
}

/// Filters and summarises every hypothesis.
///
/// Hypotheses come out of the tree depth-first, so neighbours share long
/// detection prefixes; the per-frame filter and radio state of the previous
/// hypothesis is reused up to the first differing frame.
fn evaluate<T: Real>(
    hypotheses: &[Hypothesis<T>],
    radio: &[RadioMeasurement<T>],
    basestations: &[Basestation<T>],
    filter: &FilterConfig<T>,
    frame_period: T,
) -> Result<Vec<Evaluated<T>>> {
    let window = hypotheses.iter().map(Hypothesis::len).max().unwrap_or(0);
    let index = RadioIndex::new(radio, basestations, window)?;
    let mut trail: Vec<(FilterCursor<T>, RadioMoments<T>)> = Vec::with_capacity(window);
    let mut prev: Option<&Hypothesis<T>> = None;
    let mut out = Vec::with_capacity(hypotheses.len());
    for h in hypotheses {
        let common = prev.map_or(0, |p| {
            p.detections()
                .iter()
                .zip(h.detections())
                .take_while(|(a, b)| a == b)
                .count()
        });
        trail.truncate(common);
        let (mut cursor, mut moments) = trail
            .last()
            .copied()
            .unwrap_or((FilterCursor::default(), index.moments()));
        for (slot, d) in h.detections().iter().enumerate().skip(common) {
            if let Some(x) = cursor.step(d, filter, frame_period)? {
                moments.add_frame(x, index.at(slot));
            }
            trail.push((cursor, moments));
        }
        out.push(Evaluated {
            visual: cursor.visual_score()?,
            non_empty: cursor.non_empty(),
            stats: moments.stats(),
            camera: h.camera_count(),
        });
        prev = Some(h);
    }
    Ok(out)
}

/// Scores every hypothesis under every model (`K * G` entries, hypothesis-major).
pub fn score_all<T: Real>(
    hypotheses: &[Hypothesis<T>],
    radio: &[RadioMeasurement<T>],
    basestations: &[Basestation<T>],
    models: &[RadioModel<T>],
    filter: &FilterConfig<T>,
    prior: &PriorConfig<T>,
    frame_period: T,
) -> Result<Vec<ScoredHypothesis<T>>> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("hypotheses"));
    }
    let runs = hypotheses
        .par_iter()
        .map(|h| {
            let run = run_hypothesis_filter(h, filter, frame_period)?;
            let stats = RadioStats::collect(&run.trajectory, radio, basestations)?;
            Ok((run, stats, h.camera_count()))
        })
        .collect::<Result<Vec<_>>>()?;
    let prepared = PreparedModel::prepare_all(models, prior);
    let prepared = &prepared;
    Ok(runs
        .into_iter()
        .enumerate()
        .flat_map(|(hi, (run, stats, camera))| {
            let trajectory: Arc<[Option<Point2<T>>]> = run.trajectory.into();
            let visual = run.visual_score;
            let non_empty = run.non_empty;
            prepared.iter().enumerate().map(move |(mi, m)| {
                let radio_score = m.score(&stats, non_empty);
                ScoredHypothesis {
                    hypothesis_index: hi,
                    model_index: mi,
                    model: m.model,
                    trajectory: trajectory.clone(),
                    camera_count: camera,
                    visual_score: visual,
                    radio_score,
                    total: visual + radio_score,
                }
            })
        })
        .collect())
}

/// Maximal total with deterministic tie-breaking.
pub fn select_best<T: Real>(scored: &[ScoredHypothesis<T>]) -> Result<&ScoredHypothesis<T>> {
    scored
        .iter()
        .reduce(|best, s| {
            if rank(s.key(), best.key()) == Ordering::Greater {
                s
            } else {
                best
            }
        })
        .ok_or(Error::EmptyInput("scored hypotheses"))
}

/// One output frame: filtered position plus the kind of detection behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint<T> {
    pub frame: FrameIndex,
    pub kind: DetectionKind,
    pub position: Option<Point2<T>>,
}

/// Row of the diagnostics score table: a hypothesis under its best model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow<T> {
    pub hypothesis: usize,
    pub tracklets: Vec<usize>,
    pub camera_detections: usize,
    pub visual_score: T,
    pub radio_score: T,
    pub total: T,
    pub model: RadioModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitHint<T> {
    pub frame: FrameIndex,
    pub position: Point2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostics<T> {
    pub tracklets: usize,
    pub hypotheses: usize,
    pub truncated: bool,
    pub models: usize,
    pub best_hypothesis: Option<usize>,
    pub model: Option<RadioModel<T>>,
    pub visual_score: Option<T>,
    pub radio_score: Option<T>,
    pub total: Option<T>,
    pub hint: Option<InitHint<T>>,
    pub scores: Vec<ScoreRow<T>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult<T> {
    pub trajectory: Vec<TrajectoryPoint<T>>,
    pub hypothesis: Option<Hypothesis<T>>,
    pub diagnostics: WindowDiagnostics<T>,
}

impl<T: Real> WindowResult<T> {
    pub fn positions(&self) -> Vec<Option<Point2<T>>> {
        self.trajectory.iter().map(|p| p.position).collect()
    }

    pub fn model(&self) -> Option<RadioModel<T>> {
        self.diagnostics.model
    }

    fn all_empty(window: usize, diagnostics: WindowDiagnostics<T>) -> Self {
        let trajectory = (1..=window)
            .map(|f| TrajectoryPoint {
                frame: FrameIndex(f),
                kind: DetectionKind::Empty,
                position: None,
            })
            .collect();
        Self {
            trajectory,
            hypothesis: None,
            diagnostics,
        }
    }
}

struct Candidates<T> {
    tracklets: usize,
    hypotheses: Vec<Hypothesis<T>>,
    truncated: bool,
}

fn candidates<T: Real>(bundle: &WindowBundle<T>, cfg: &TrackerConfig<T>) -> Result<Candidates<T>> {
    let tracklets = generate_tracklets(bundle, &cfg.tracklet);
    let forest = build_trees(&tracklets, &cfg.fov, &cfg.tree);
    let en = enumerate_hypotheses(
        &forest,
        &tracklets,
        &cfg.fov,
        bundle.window_size(),
        &cfg.tree,
    )?;
    Ok(Candidates {
        tracklets: tracklets.len(),
        hypotheses: en.hypotheses,
        truncated: en.truncated,
    })
}

/// Best `(model index, radio score)` for one hypothesis, earliest model on ties.
fn best_model<T: Real>(ev: &Evaluated<T>, models: &[PreparedModel<T>]) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (mi, m) in models.iter().enumerate() {
        let s = m.score(&ev.stats, ev.non_empty);
        if s > best.1 || mi == 0 {
            best = (mi, s);
        }
    }
    best
}

fn search<T: Real>(
    bundle: &WindowBundle<T>,
    basestations: &[Basestation<T>],
    cfg: &TrackerConfig<T>,
    models: &[RadioModel<T>],
    keep: impl Fn(&Hypothesis<T>) -> bool,
    hint: Option<InitHint<T>>,
) -> Result<WindowResult<T>> {
    cfg.validate()?;
    let cand = candidates(bundle, cfg)?;
    let mut diagnostics = WindowDiagnostics {
        tracklets: cand.tracklets,
        hypotheses: cand.hypotheses.len(),
        truncated: cand.truncated,
        models: models.len(),
        best_hypothesis: None,
        model: None,
        visual_score: None,
        radio_score: None,
        total: None,
        hint,
        scores: Vec::new(),
        warnings: Vec::new(),
    };
    if cand.truncated {
        diagnostics
            .warnings
            .push("hypothesis budget reached; tree truncated".into());
    }
    if cand.hypotheses.is_empty() {
        diagnostics
            .warnings
            .push("no tracklets in window; trajectory is empty".into());
        return Ok(WindowResult::all_empty(bundle.window_size(), diagnostics));
    }

    let mut allowed: Vec<usize> = (0..cand.hypotheses.len())
        .filter(|&i| keep(&cand.hypotheses[i]))
        .collect();
    if allowed.is_empty() {
        diagnostics
            .warnings
            .push("no hypothesis matches the initial hint; hint ignored".into());
        allowed = (0..cand.hypotheses.len()).collect();
    }

    let evaluated = evaluate(
        &cand.hypotheses,
        bundle.radio(),
        basestations,
        &cfg.filter,
        bundle.config().frame_period(),
    )?;
    let prepared = PreparedModel::prepare_all(models, &cfg.prior);
    let rows: Vec<(usize, usize, T, T)> = allowed
        .par_iter()
        .map(|&hi| {
            let ev = &evaluated[hi];
            let (mi, r) = best_model(ev, &prepared);
            (hi, mi, ev.visual, r)
        })
        .collect();

    let key = |row: &(usize, usize, T, T)| (row.2 + row.3, evaluated[row.0].camera, row.0, row.1);
    let best = *rows
        .iter()
        .reduce(|b, r| {
            if rank(key(r), key(b)) == Ordering::Greater {
                r
            } else {
                b
            }
        })
        .expect("non-empty");

    let mut table: Vec<&(usize, usize, T, T)> = rows.iter().collect();
    table.sort_by(|a, b| rank(key(b), key(a)));
    diagnostics.scores = table
        .into_iter()
        .take(cfg.search.max_reported_scores)
        .map(|&(hi, mi, v, r)| ScoreRow {
            hypothesis: hi,
            tracklets: cand.hypotheses[hi]
                .tracklet_ids()
                .iter()
                .map(|t| t.0)
                .collect(),
            camera_detections: evaluated[hi].camera,
            visual_score: v,
            radio_score: r,
            total: v + r,
            model: models[mi],
        })
        .collect();

    let (hi, mi, v, r) = best;
    diagnostics.best_hypothesis = Some(hi);
    diagnostics.model = Some(models[mi]);
    diagnostics.visual_score = Some(v);
    diagnostics.radio_score = Some(r);
    diagnostics.total = Some(v + r);

    let hypothesis = cand
        .hypotheses
        .into_iter()
        .nth(hi)
        .expect("index from enumeration");
    let run = run_hypothesis_filter(&hypothesis, &cfg.filter, bundle.config().frame_period())?;
    let trajectory = hypothesis
        .detections()
        .iter()
        .zip(&run.trajectory)
        .map(|(d, p)| TrajectoryPoint {
            frame: d.frame(),
            kind: d.kind(),
            position: *p,
        })
        .collect();
    Ok(WindowResult {
        trajectory,
        hypothesis: Some(hypothesis),
        diagnostics,
    })
}

/// Full pipeline with the prior's model grid.
pub fn track_window_ravel<T: Real>(
    bundle: &WindowBundle<T>,
    basestations: &[Basestation<T>],
    cfg: &TrackerConfig<T>,
) -> Result<WindowResult<T>> {
    track_window_with_models(bundle, basestations, cfg, &model_grid(&cfg.prior))
}

/// Full pipeline over an explicit model list.
pub fn track_window_with_models<T: Real>(
    bundle: &WindowBundle<T>,
    basestations: &[Basestation<T>],
    cfg: &TrackerConfig<T>,
    models: &[RadioModel<T>],
) -> Result<WindowResult<T>> {
    if models.is_empty() {
        return Err(Error::EmptyInput("radio models"));
    }
    search(bundle, basestations, cfg, models, |_| true, None)
}

/// Vision-only baseline: argmax of `L^v` alone.
///
/// With a hint, only hypotheses whose first camera detection is the
/// detection nearest the hint (at the hint frame) are considered.
pub fn track_window_vision_only<T: Real>(
    bundle: &WindowBundle<T>,
    cfg: &TrackerConfig<T>,
    hint: Option<InitHint<T>>,
) -> Result<WindowResult<T>> {
    let silent = bundle.without_radio();
    let anchor = hint.as_ref().and_then(|h| {
        silent
            .detections_at(h.frame)
            .iter()
            .copied()
            .min_by(|a, b| {
                a.distance(h.position)
                    .partial_cmp(&b.distance(h.position))
                    .unwrap_or(Ordering::Equal)
            })
            .map(|p| (h.frame, p))
    });
    let keep = |hyp: &Hypothesis<T>| match anchor {
        None => true,
        Some((frame, p)) => hyp
            .first_camera()
            .is_some_and(|d| d.frame() == frame && d.position() == Some(p)),
    };
    let zero = [RadioModel {
        sigma: T::one(),
        ..cfg.prior.mode_model()
    }];
    let mut result = search(&silent, &[], cfg, &zero, keep, hint)?;
    // Radio plays no part in the baseline; report it as zero.
    let d = &mut result.diagnostics;
    d.model = None;
    d.radio_score = d.radio_score.map(|_| T::zero());
    d.total = d.visual_score;
    for row in &mut d.scores {
        row.radio_score = T::zero();
        row.total = row.visual_score;
    }
    Ok(result)
}

/// Final-frame position estimate of each window.
pub fn track_online<T: Real>(
    bundles: &[WindowBundle<T>],
    basestations: &[Basestation<T>],
    cfg: &TrackerConfig<T>,
) -> Result<Vec<Option<Point2<T>>>> {
    let models = model_grid(&cfg.prior);
    bundles
        .par_iter()
        .map(|b| {
            let r = track_window_with_models(b, basestations, cfg, &models)?;
            Ok(r.trajectory.last().and_then(|p| p.position))
        })
        .collect()
}

/// `max_H L(H, R, lambda)` for every model of the grid, in grid order.
pub fn fitness_surface<T: Real>(
    bundle: &WindowBundle<T>,
    basestations: &[Basestation<T>],
    cfg: &TrackerConfig<T>,
    models: &[RadioModel<T>],
) -> Result<Vec<(RadioModel<T>, T)>> {
    cfg.validate()?;
    let cand = candidates(bundle, cfg)?;
    if cand.hypotheses.is_empty() {
        return Err(Error::EmptyInput("hypotheses"));
    }
    let evaluated = evaluate(
        &cand.hypotheses,
        bundle.radio(),
        basestations,
        &cfg.filter,
        bundle.config().frame_period(),
    )?;
    Ok(PreparedModel::prepare_all(models, &cfg.prior)
        .par_iter()
        .map(|m| {
            let best = evaluated
                .iter()
                .map(|ev| ev.visual + m.score(&ev.stats, ev.non_empty))
                .fold(T::neg_infinity(), T::max);
            (m.model, best)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{validate_window_inputs, Detection, WindowConfig};

    fn scored(hi: usize, total: f64, camera: usize) -> ScoredHypothesis<f64> {
        ScoredHypothesis {
            hypothesis_index: hi,
            model_index: 0,
            model: RadioModel {
                p0: -60.0,
                n: 2.5,
                sigma: 4.0,
            },
            trajectory: Arc::from(vec![None]),
            camera_count: camera,
            visual_score: total,
            radio_score: 0.0,
            total,
        }
    }

    #[test]
    fn select_best_basics() {
        assert!(select_best::<f64>(&[]).is_err());
        let one = [scored(0, -3.0, 1)];
        assert_eq!(select_best(&one).unwrap().hypothesis_index, 0);
        let two = [scored(0, -5.0, 1), scored(1, -4.0, 1)];
        assert_eq!(select_best(&two).unwrap().hypothesis_index, 1);
    }

    #[test]
    fn ties_prefer_camera_then_order() {
        let s = [scored(0, -4.0, 3), scored(1, -4.0, 5), scored(2, -4.0, 5)];
        assert_eq!(select_best(&s).unwrap().hypothesis_index, 1);
    }

    fn straight_walk(w: usize) -> WindowBundle<f64> {
        let dets: Vec<_> = (1..=w)
            .map(|f| Detection::camera(FrameIndex(f), Point2::new(2.0 + 0.3 * f as f64, 5.0)))
            .collect();
        validate_window_inputs(&dets, &[], WindowConfig::new(w, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn single_walker_is_recovered() {
        let bundle = straight_walk(20);
        let cfg = TrackerConfig::new(Rect::new(0.0, 0.0, 11.0, 12.0));
        let r = track_window_ravel(&bundle, &[], &cfg).unwrap();
        assert_eq!(r.trajectory.len(), 20);
        for (k, p) in r.trajectory.iter().enumerate() {
            let truth = Point2::new(2.0 + 0.3 * (k + 1) as f64, 5.0);
            assert!(p.position.unwrap().distance(truth) < 0.3);
            assert_eq!(p.kind, DetectionKind::Camera);
        }
        let v = track_window_vision_only(&bundle, &cfg, None).unwrap();
        assert_eq!(v.positions(), r.positions());
    }

    #[test]
    fn no_tracklets_yields_empty_trajectory() {
        let bundle =
            validate_window_inputs::<f64>(&[], &[], WindowConfig::new(5, 2.0).unwrap()).unwrap();
        let cfg = TrackerConfig::new(Rect::new(0.0, 0.0, 11.0, 12.0));
        let r = track_window_ravel(&bundle, &[], &cfg).unwrap();
        assert_eq!(r.trajectory.len(), 5);
        assert!(r.trajectory.iter().all(|p| p.position.is_none()));
        assert!(!r.diagnostics.warnings.is_empty());
    }

    #[test]
    fn score_all_cardinality() {
        let bundle = straight_walk(10);
        let cfg = TrackerConfig::new(Rect::new(0.0, 0.0, 11.0, 12.0));
        let cand = candidates(&bundle, &cfg).unwrap();
        let models = model_grid(&PriorConfig {
            grid_step_p0: 10.0,
            grid_step_n: 1.0,
            ..PriorConfig::default()
        });
        let all = score_all(
            &cand.hypotheses,
            &[],
            &[],
            &models,
            &cfg.filter,
            &cfg.prior,
            0.5,
        )
        .unwrap();
        assert_eq!(all.len(), cand.hypotheses.len() * models.len());
        for s in &all {
            assert!((s.total - (s.visual_score + s.radio_score)).abs() < 1e-12);
        }
    }
}
