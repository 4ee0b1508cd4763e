//! Simulator-driven experiments shared by the CLI sweeps and the
//! acceptance suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::metrics::{offline_location_error, online_location_error, overlap_error};
use crate::radio::{model_grid, RadioModel};
use crate::search::{
    fitness_surface, track_window_ravel, track_window_vision_only, InitHint, TrackerConfig,
    WindowResult,
};
use crate::sim::{self, Scene, SceneConfig};
use crate::types::{FrameIndex, Recording, WindowBundle, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ravel,
    Vision,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ravel => "ravel",
            Algorithm::Vision => "vision",
        }
    }
}

/// Tracker settings matching a scene's camera.
pub fn tracker_for(scene: &SceneConfig) -> TrackerConfig<f64> {
    TrackerConfig::new(scene.fov)
}

/// Camera detections plus the radio of one tracked walker.
pub fn recording(scene: &Scene, walker: usize) -> Result<Recording<f64>> {
    let radio = scene.radio.get(&walker).ok_or_else(|| {
        Error::config(
            "scene.tracked_walker_ids",
            format!("walker {walker} is not tracked"),
        )
    })?;
    Ok(Recording {
        total_frames: scene.config.duration_frames,
        camera: scene.detections.clone(),
        radio: radio.clone(),
    })
}

/// One window cut from a scene, with the walker's camera-view truth.
pub struct SceneWindow {
    pub bundle: WindowBundle<f64>,
    pub truth: Vec<Option<Point2<f64>>>,
}

pub fn scene_window(
    scene: &Scene,
    walker: usize,
    offset: usize,
    window: usize,
) -> Result<SceneWindow> {
    let rec = recording(scene, walker)?;
    let bundle = rec.window(offset, WindowConfig::new(window, scene.config.fps)?)?;
    let truth = scene.truth.trajectory(walker)[offset..offset + window].to_vec();
    Ok(SceneWindow { bundle, truth })
}

/// The vision baseline's hint: the walker's true position at its first
/// in-FOV frame of the window.
pub fn truth_hint(truth: &[Option<Point2<f64>>]) -> Option<InitHint<f64>> {
    truth.iter().enumerate().find_map(|(i, p)| {
        p.map(|position| InitHint {
            frame: FrameIndex(i + 1),
            position,
        })
    })
}

pub fn run_algorithm(
    algorithm: Algorithm,
    w: &SceneWindow,
    scene: &SceneConfig,
    cfg: &TrackerConfig<f64>,
) -> Result<WindowResult<f64>> {
    match algorithm {
        Algorithm::Ravel => track_window_ravel(&w.bundle, &scene.basestations, cfg),
        Algorithm::Vision => track_window_vision_only(&w.bundle, cfg, truth_hint(&w.truth)),
    }
}

/// Detector used by the experiment scenes: occasional misses, rare splits
/// and sparse clutter.
pub fn experiment_detector(cfg: SceneConfig) -> SceneConfig {
    SceneConfig {
        detect_miss_prob: 0.03,
        split_prob: 0.01,
        false_positive_rate: 0.05,
        detection_noise_std: 0.05,
        ..cfg
    }
}

/// Random-walk scene used by the sweeps.
pub fn random_scene(seed: u64, duration_frames: usize, rssi_rate_hz: f64) -> SceneConfig {
    experiment_detector(SceneConfig {
        duration_frames,
        rssi_rate_hz,
        walkers: 3,
        seed,
        ..SceneConfig::default()
    })
}

/// Errors of one algorithm on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub offline: Option<f64>,
    pub online: Option<f64>,
    pub overlap: f64,
}

pub fn evaluate(
    result: &WindowResult<f64>,
    truth: &[Option<Point2<f64>>],
) -> Result<WindowOutcome> {
    let est = result.positions();
    Ok(WindowOutcome {
        offline: offline_location_error(&est, truth)?,
        online: online_location_error(&est, truth)?,
        overlap: overlap_error(&est, truth)?.overlap,
    })
}

/// Mean and standard error of the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub undefined: usize,
}

pub fn mean_se(values: &[Option<f64>]) -> MeanSe {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    let n = v.len();
    let mean = if n > 0 {
        v.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let se = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            / (n as f64).sqrt()
    } else {
        f64::NAN
    };
    MeanSe {
        mean,
        se,
        n,
        undefined: values.len() - n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub point: f64,
    pub offline: MeanSe,
}

fn sweep(
    points: &[f64],
    seeds: &[u64],
    make: impl Fn(f64, u64) -> SceneConfig + Sync,
    window_of: impl Fn(f64) -> usize + Sync,
) -> Result<Vec<SweepRow>> {
    if points.is_empty() || seeds.is_empty() {
        return Err(Error::EmptyInput("sweep range"));
    }
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<[Option<f64>; 2]> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cfg = make(points[i], seed);
            let scene = sim::simulate(&cfg)?;
            let window = window_of(points[i]);
            let tracker = tracker_for(&cfg);
            let mut errors = [Vec::new(), Vec::new()];
            for offset in Recording::<f64>::window_offsets(cfg.duration_frames, window, window) {
                let w = scene_window(&scene, cfg.tracked_walker_ids[0], offset, window)?;
                for (k, algo) in [Algorithm::Ravel, Algorithm::Vision]
                    .into_iter()
                    .enumerate()
                {
                    let r = run_algorithm(algo, &w, &cfg, &tracker)?;
                    errors[k].extend(evaluate(&r, &w.truth)?.offline);
                }
            }
            Ok(errors.map(|e| (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (k, algo) in [Algorithm::Ravel, Algorithm::Vision]
        .into_iter()
        .enumerate()
    {
        for (i, &p) in points.iter().enumerate() {
            let vals: Vec<Option<f64>> = jobs
                .iter()
                .zip(&results)
                .filter(|((j, _), _)| *j == i)
                .map(|(_, r)| r[k])
                .collect();
            rows.push(SweepRow {
                algorithm: algo,
                point: p,
                offline: mean_se(&vals),
            });
        }
    }
    Ok(rows)
}

/// Mean offline error against the window length (frames). Each seed's
/// recording lasts as long as the largest window and is tiled into
/// non-overlapping windows; a seed's value is the mean over its windows.
pub fn window_size_sweep(
    windows: &[usize],
    seeds: &[u64],
    rssi_rate_hz: f64,
) -> Result<Vec<SweepRow>> {
    let duration = windows
        .iter()
        .copied()
        .max()
        .ok_or(Error::EmptyInput("sweep range"))?;
    let points: Vec<f64> = windows.iter().map(|&w| w as f64).collect();
    sweep(
        &points,
        seeds,
        |_, seed| random_scene(seed, duration, rssi_rate_hz),
        |w| w as usize,
    )
}

/// Mean offline error against the RSSI sampling rate (Hz).
pub fn rssi_rate_sweep(rates: &[f64], seeds: &[u64], window: usize) -> Result<Vec<SweepRow>> {
    sweep(
        rates,
        seeds,
        |r, seed| random_scene(seed, window, r),
        |_| window,
    )
}

pub fn sweep_csv(rows: &[SweepRow], point_name: &str) -> String {
    let mut out = format!("algorithm,{point_name},mean_error_m,se_m,n,undefined\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm.as_str(),
            r.point,
            r.offline.mean,
            r.offline.se,
            r.offline.n,
            r.offline.undefined
        ));
    }
    out
}

/// Scene used for radio-model learning: the tracked walker and one other,
/// both staying in view for 100 s.
pub fn model_learning_scene(seed: u64) -> SceneConfig {
    experiment_detector(SceneConfig {
        walkers: 2,
        exit_entry: false,
        duration_frames: 200,
        seed,
        ..SceneConfig::default()
    })
}

/// Learned `(P0, n)` of one scene.
pub fn learn_model(cfg: &SceneConfig) -> Result<RadioModel<f64>> {
    let scene = sim::simulate(cfg)?;
    let w = scene_window(&scene, cfg.tracked_walker_ids[0], 0, cfg.duration_frames)?;
    let r = track_window_ravel(&w.bundle, &cfg.basestations, &tracker_for(cfg))?;
    r.model().ok_or(Error::EmptyInput("hypotheses"))
}

/// `max_H L(H; lambda)` over the prior grid, as CSV `P0,n,fitness`.
pub fn fitness_csv(cfg: &SceneConfig) -> Result<String> {
    let scene = sim::simulate(cfg)?;
    let w = scene_window(&scene, cfg.tracked_walker_ids[0], 0, cfg.duration_frames)?;
    let tracker = tracker_for(cfg);
    let surface = fitness_surface(
        &w.bundle,
        &cfg.basestations,
        &tracker,
        &model_grid(&tracker.prior),
    )?;
    let mut out = String::from("P0,n,fitness\n");
    for (m, f) in surface {
        out.push_str(&format!("{},{},{}\n", m.p0, m.n, f));
    }
    Ok(out)
}

/// Did each algorithm follow walker 0 after the split of a crossing scene?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub ravel: bool,
    pub vision: bool,
}

/// An estimate follows walker 0 after `from` if, over those frames, it is
/// on average closer to walker 0 than to walker 1.
fn follows_walker0(est: &[Option<Point2<f64>>], scene: &Scene, from: usize) -> bool {
    let (mut d0, mut d1, mut n) = (0.0, 0.0, 0);
    for f in from..est.len() {
        if let Some(e) = est[f] {
            d0 += e.distance(scene.truth.positions[0][f]);
            d1 += e.distance(scene.truth.positions[1][f]);
            n += 1;
        }
    }
    n > 0 && d0 < d1
}

pub fn crossing_trial(seed: u64) -> Result<TrialOutcome> {
    let cfg = sim::make_crossing_scene(seed);
    let scene = sim::simulate(&cfg)?;
    let w = scene_window(&scene, 0, 0, cfg.duration_frames)?;
    let tracker = tracker_for(&cfg);
    // Frames after the fork, where the branches are more than a metre apart.
    let from = (0..cfg.duration_frames)
        .find(|&f| {
            scene.truth.positions[0][f].distance(scene.truth.positions[1][f]) > 1.0
                && f > cfg.duration_frames / 2
        })
        .unwrap_or(cfg.duration_frames - 1);
    let ravel = run_algorithm(Algorithm::Ravel, &w, &cfg, &tracker)?;
    let vision = run_algorithm(Algorithm::Vision, &w, &cfg, &tracker)?;
    Ok(TrialOutcome {
        ravel: follows_walker0(&ravel.positions(), &scene, from),
        vision: follows_walker0(&vision.positions(), &scene, from),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTrial {
    pub ravel_recovered: bool,
    pub vision_recovered: bool,
    pub ravel_zero_overlap: bool,
    pub vision_zero_overlap: bool,
}

/// Post-re-entry offline error below 1 m counts as recovering the walker.
pub fn exit_reenter_trial(seed: u64) -> Result<ExitTrial> {
    let cfg = sim::make_exit_reenter_scene(seed);
    let scene = sim::simulate(&cfg)?;
    let ev = sim::exit_reentry(&scene.truth).ok_or(Error::EmptyInput("re-entry"))?;
    let w = scene_window(&scene, 0, 0, cfg.duration_frames)?;
    let tracker = tracker_for(&cfg);
    let after = ev.reentry - 1;
    let judge = |r: &WindowResult<f64>| -> Result<(bool, bool)> {
        let est = r.positions();
        let post = offline_location_error(&est[after..], &w.truth[after..])?;
        let overlap = overlap_error(&est, &w.truth)?.overlap;
        Ok((post.is_some_and(|e| e < 1.0), overlap == 0.0))
    };
    let (ravel_recovered, ravel_zero_overlap) =
        judge(&run_algorithm(Algorithm::Ravel, &w, &cfg, &tracker)?)?;
    let (vision_recovered, vision_zero_overlap) =
        judge(&run_algorithm(Algorithm::Vision, &w, &cfg, &tracker)?)?;
    Ok(ExitTrial {
        ravel_recovered,
        vision_recovered,
        ravel_zero_overlap,
        vision_zero_overlap,
    })
}

/// Offline and online errors of RAVEL on consecutive windows of one scene.
pub fn online_offline_trial(
    seed: u64,
    window: usize,
    windows: usize,
) -> Result<Vec<WindowOutcome>> {
    let cfg = random_scene(seed, window * windows, 2.0);
    let scene = sim::simulate(&cfg)?;
    let tracker = tracker_for(&cfg);
    Recording::<f64>::window_offsets(cfg.duration_frames, window, window)
        .into_iter()
        .map(|offset| {
            let w = scene_window(&scene, 0, offset, window)?;
            evaluate(
                &track_window_ravel(&w.bundle, &cfg.basestations, &tracker)?,
                &w.truth,
            )
        })
        .collect()
}
