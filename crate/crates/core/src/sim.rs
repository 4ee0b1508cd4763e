//! Synthetic multi-walker scenes with a noisy detector and RSSI.
//!
//! Every walker lives in an arena (the FOV, grown by [`ARENA_MARGIN`] when
//! walkers may leave it). Motion, detections and radio each draw from their
//! own ChaCha stream, so changing the RSSI rate leaves trajectories and
//! detections untouched, and a shorter scene is a prefix of a longer one.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point2, Rect};
use crate::radio::{expected_rss, RadioModel};
use crate::types::{Basestation, Detection, FrameIndex, RadioMeasurement};

/// How far outside the FOV random walkers may roam (m).
pub const ARENA_MARGIN: f64 = 3.0;
/// Largest heading change of a random walker per frame (rad).
const MAX_TURN: f64 = 0.6;

const STREAM_DETECTIONS: u64 = 1;
const STREAM_MOTION: u64 = 1 << 20;
const STREAM_RADIO: u64 = 2 << 20;

/// Waypoint of a scripted walker; positions between keyframes are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

impl Keyframe {
    pub fn new(frame: usize, p: Point2<f64>) -> Self {
        Self {
            frame,
            x: p.x,
            y: p.y,
        }
    }

    fn point(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedWalker {
    pub keyframes: Vec<Keyframe>,
}

impl ScriptedWalker {
    /// Position at a 1-based frame, clamped to the first/last keyframe.
    pub fn position(&self, frame: usize) -> Point2<f64> {
        let k = &self.keyframes;
        if frame <= k[0].frame {
            return k[0].point();
        }
        for w in k.windows(2) {
            if frame <= w[1].frame {
                let t = (frame - w[0].frame) as f64 / (w[1].frame - w[0].frame) as f64;
                return w[0].point().lerp(w[1].point(), t);
            }
        }
        k[k.len() - 1].point()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub fov: Rect<f64>,
    pub duration_frames: usize,
    pub fps: f64,
    /// Random-waypoint walkers, numbered after the scripted ones.
    pub walkers: usize,
    pub scripted: Vec<ScriptedWalker>,
    pub tracked_walker_ids: Vec<usize>,
    /// m/s.
    pub speed_range: [f64; 2],
    pub pause_prob: f64,
    pub exit_entry: bool,
    pub detect_miss_prob: f64,
    pub split_prob: f64,
    pub merge_distance: f64,
    pub false_positive_rate: f64,
    pub detection_noise_std: f64,
    pub radio_model: RadioModel<f64>,
    pub basestations: Vec<Basestation<f64>>,
    pub rssi_rate_hz: f64,
    pub seed: u64,
}

/// One access point per FOV corner, named `ap0..ap3`.
pub fn corner_basestations(fov: &Rect<f64>) -> Vec<Basestation<f64>> {
    [
        (fov.min_x, fov.min_y),
        (fov.max_x, fov.min_y),
        (fov.max_x, fov.max_y),
        (fov.min_x, fov.max_y),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(x, y))| Basestation {
        id: format!("ap{i}").as_str().into(),
        position: Point2::new(x, y),
    })
    .collect()
}

impl Default for SceneConfig {
    fn default() -> Self {
        let fov = Rect::new(0.0, 0.0, 11.0, 12.0);
        Self {
            fov,
            duration_frames: 120,
            fps: 2.0,
            walkers: 8,
            scripted: Vec::new(),
            tracked_walker_ids: vec![0],
            speed_range: [0.6, 1.4],
            pause_prob: 0.02,
            exit_entry: true,
            detect_miss_prob: 0.1,
            split_prob: 0.05,
            merge_distance: 0.6,
            false_positive_rate: 0.2,
            detection_noise_std: 0.1,
            radio_model: RadioModel {
                p0: -64.0,
                n: 2.2,
                sigma: 4.0,
            },
            basestations: corner_basestations(&fov),
            rssi_rate_hz: 2.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn total_walkers(&self) -> usize {
        self.scripted.len() + self.walkers
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |key: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("probability {v} outside [0, 1]"),
                ))
            }
        };
        prob("scene.pause_prob", self.pause_prob)?;
        prob("scene.detect_miss_prob", self.detect_miss_prob)?;
        prob("scene.split_prob", self.split_prob)?;
        if self.fov.is_degenerate() {
            return Err(Error::config(
                "scene.fov",
                "rectangle must have positive area",
            ));
        }
        if self.duration_frames == 0 {
            return Err(Error::config("scene.duration_frames", "must be >= 1"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::config("scene.fps", "must be > 0"));
        }
        if !(self.rssi_rate_hz > 0.0 && self.rssi_rate_hz.is_finite()) {
            return Err(Error::config("scene.rssi_rate_hz", "must be > 0"));
        }
        let [lo, hi] = self.speed_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config("scene.speed_range", "need 0 < min <= max"));
        }
        for (key, v) in [
            ("scene.merge_distance", self.merge_distance),
            ("scene.false_positive_rate", self.false_positive_rate),
            ("scene.detection_noise_std", self.detection_noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be >= 0"));
            }
        }
        self.radio_model.validate().map_err(|e| match e {
            Error::InvalidConfig { key, message } => {
                Error::config(format!("scene.radio_model.{key}"), message)
            }
            other => other,
        })?;
        for s in &self.scripted {
            if s.keyframes.is_empty() || s.keyframes.windows(2).any(|w| w[1].frame <= w[0].frame) {
                return Err(Error::config(
                    "scene.scripted",
                    "keyframes must be non-empty with increasing frames",
                ));
            }
        }
        if let Some(&id) = self
            .tracked_walker_ids
            .iter()
            .find(|&&id| id >= self.total_walkers())
        {
            return Err(Error::config(
                "scene.tracked_walker_ids",
                format!("walker {id} does not exist"),
            ));
        }
        Ok(())
    }

    fn arena(&self) -> Rect<f64> {
        if self.exit_entry {
            let f = &self.fov;
            Rect::new(
                f.min_x - ARENA_MARGIN,
                f.min_y - ARENA_MARGIN,
                f.max_x + ARENA_MARGIN,
                f.max_y + ARENA_MARGIN,
            )
        } else {
            self.fov
        }
    }
}

/// True walker positions, one row per walker and one entry per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub fov: Rect<f64>,
    pub positions: Vec<Vec<Point2<f64>>>,
}

impl GroundTruth {
    pub fn in_fov(&self, walker: usize, frame: FrameIndex) -> bool {
        self.fov.contains(self.positions[walker][frame.slot()])
    }

    /// Camera-view trajectory: present only on in-FOV frames.
    pub fn trajectory(&self, walker: usize) -> Vec<Option<Point2<f64>>> {
        self.positions[walker]
            .iter()
            .map(|&p| self.fov.contains(p).then_some(p))
            .collect()
    }
}

/// Counts of detector artefacts, for checking presets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub merged: usize,
    pub merged_frames: usize,
    pub split: usize,
    pub missed: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub truth: GroundTruth,
    /// Camera detections in frame order, shuffled within each frame.
    pub detections: Vec<Detection<f64>>,
    /// Radio samples per tracked walker.
    pub radio: BTreeMap<usize, Vec<RadioMeasurement<f64>>>,
    pub stats: DetectorStats,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform_in(rng: &mut ChaCha8Rng, r: &Rect<f64>) -> Point2<f64> {
    Point2::new(
        rng.random_range(r.min_x..=r.max_x),
        rng.random_range(r.min_y..=r.max_y),
    )
}

fn random_walk(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Point2<f64>> {
    let arena = cfg.arena();
    let [lo, hi] = cfg.speed_range;
    let mut pos = uniform_in(rng, &arena);
    let mut goal = uniform_in(rng, &arena);
    let mut step = rng.random_range(lo..=hi) / cfg.fps;
    let to_goal = goal - pos;
    let mut heading = to_goal.y.atan2(to_goal.x);
    let mut out = Vec::with_capacity(cfg.duration_frames);
    out.push(pos);
    for _ in 1..cfg.duration_frames {
        let pause = rng.random::<f64>() < cfg.pause_prob;
        if !pause {
            if pos.distance(goal) <= step {
                goal = uniform_in(rng, &arena);
                step = rng.random_range(lo..=hi) / cfg.fps;
            }
            let d = goal - pos;
            let want = d.y.atan2(d.x);
            let mut turn = want - heading;
            turn = (turn + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            heading += turn.clamp(-MAX_TURN, MAX_TURN);
            pos = arena.clamp(pos + Point2::new(heading.cos(), heading.sin()) * step);
        }
        out.push(pos);
    }
    out
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

/// Runs the scene. Fully determined by `cfg` (including its seed).
pub fn simulate(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let n_walkers = cfg.total_walkers();
    let frames = cfg.duration_frames;

    let mut positions: Vec<Vec<Point2<f64>>> = cfg
        .scripted
        .iter()
        .map(|s| (1..=frames).map(|f| s.position(f)).collect())
        .collect();
    for w in cfg.scripted.len()..n_walkers {
        positions.push(random_walk(
            cfg,
            &mut stream(cfg.seed, STREAM_MOTION + w as u64),
        ));
    }
    let truth = GroundTruth {
        fov: cfg.fov,
        positions,
    };

    let mut rng = stream(cfg.seed, STREAM_DETECTIONS);
    let noise = Normal::new(0.0, cfg.detection_noise_std)
        .map_err(|e| Error::config("scene.detection_noise_std", e.to_string()))?;
    let fp = (cfg.false_positive_rate > 0.0)
        .then(|| Poisson::new(cfg.false_positive_rate))
        .transpose()
        .map_err(|e| Error::config("scene.false_positive_rate", e.to_string()))?;
    let mut stats = DetectorStats::default();
    let mut detections = Vec::new();

    for f in 0..frames {
        let visible: Vec<usize> = (0..n_walkers)
            .filter(|&w| cfg.fov.contains(truth.positions[w][f]))
            .collect();
        let mut parent: Vec<usize> = (0..visible.len()).collect();
        for i in 0..visible.len() {
            for j in i + 1..visible.len() {
                if truth.positions[visible[i]][f].distance(truth.positions[visible[j]][f])
                    < cfg.merge_distance
                {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..visible.len() {
            let root = find(&mut parent, i);
            clusters.entry(root).or_default().push(visible[i]);
        }

        let mut frame_dets = Vec::new();
        let mut merged_here = false;
        for members in clusters.values() {
            let centroid = members
                .iter()
                .fold(Point2::new(0.0, 0.0), |acc, &w| acc + truth.positions[w][f])
                * (1.0 / members.len() as f64);
            if members.len() > 1 {
                stats.merged += 1;
                merged_here = true;
            }
            if rng.random::<f64>() < cfg.detect_miss_prob {
                stats.missed += 1;
                continue;
            }
            let jitter = Point2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            frame_dets.push(centroid + jitter);
            if members.len() == 1 && rng.random::<f64>() < cfg.split_prob {
                let w = members[0];
                let motion = if f > 0 {
                    truth.positions[w][f] - truth.positions[w][f - 1]
                } else {
                    Point2::new(0.0, 0.0)
                };
                let len = motion.norm();
                let lateral = if len > 0.0 {
                    Point2::new(-motion.y / len, motion.x / len)
                } else {
                    Point2::new(0.0, 1.0)
                };
                let jitter = Point2::new(noise.sample(&mut rng), noise.sample(&mut rng));
                frame_dets.push(centroid + lateral * cfg.detection_noise_std + jitter);
                stats.split += 1;
            }
        }
        if merged_here {
            stats.merged_frames += 1;
        }
        if let Some(p) = &fp {
            let k = p.sample(&mut rng) as usize;
            for _ in 0..k {
                frame_dets.push(uniform_in(&mut rng, &cfg.fov));
            }
            stats.false_positives += k;
        }
        frame_dets.shuffle(&mut rng);
        detections.extend(
            frame_dets
                .into_iter()
                .map(|p| Detection::camera(FrameIndex(f + 1), p)),
        );
    }

    let mut radio = BTreeMap::new();
    for &w in &cfg.tracked_walker_ids {
        radio.insert(
            w,
            radio_samples(
                cfg,
                &truth.positions[w],
                &mut stream(cfg.seed, STREAM_RADIO + w as u64),
            )?,
        );
    }

    Ok(Scene {
        config: cfg.clone(),
        truth,
        detections,
        radio,
        stats,
    })
}

/// RSSI at `rssi_rate_hz` from every basestation; at most one sample per
/// frame and basestation.
fn radio_samples(
    cfg: &SceneConfig,
    track: &[Point2<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RadioMeasurement<f64>>> {
    let shadow = Normal::new(0.0, cfg.radio_model.sigma)
        .map_err(|e| Error::config("scene.radio_model.sigma", e.to_string()))?;
    let mut out = Vec::new();
    let mut last_frame = 0;
    for k in 0.. {
        let t = k as f64 / cfg.rssi_rate_hz;
        let frame = (t * cfg.fps + 1e-9).floor() as usize + 1;
        if frame > track.len() {
            break;
        }
        if frame == last_frame {
            continue;
        }
        last_frame = frame;
        let x = track[frame - 1];
        for b in &cfg.basestations {
            let rssi = expected_rss(&cfg.radio_model, x.distance(b.position)) + shadow.sample(rng);
            out.push(RadioMeasurement {
                frame: FrameIndex(frame),
                basestation: b.id.clone(),
                rssi,
            });
        }
    }
    Ok(out)
}

fn rotate(v: Point2<f64>, angle: f64) -> Point2<f64> {
    let (s, c) = angle.sin_cos();
    Point2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Preset parameters shared by the scripted scenes: low clutter, so the
/// ambiguity comes from the scripted encounter.
fn scripted_base(seed: u64) -> SceneConfig {
    SceneConfig {
        walkers: 0,
        exit_entry: true,
        pause_prob: 0.0,
        detect_miss_prob: 0.03,
        split_prob: 0.0,
        false_positive_rate: 0.0,
        detection_noise_std: 0.05,
        seed,
        ..SceneConfig::default()
    }
}

/// Divergence angle between the two branches of the crossing preset (rad).
pub const CROSSING_DIVERGENCE: f64 = std::f64::consts::PI / 3.0;

/// Walkers 0 (tracked) and 1 approach from different sides, walk side by
/// side 0.3 m apart for 8 frames, then split 60 degrees apart. Which branch
/// walker 0 takes is drawn from the seed.
pub fn make_crossing_scene(seed: u64) -> SceneConfig {
    let mut rng = stream(seed, 0);
    let step = 0.25;
    let center = Point2::new(
        5.5 + rng.random_range(-0.5..0.5),
        4.5 + rng.random_range(-0.5..0.5),
    );
    let axis = rotate(Point2::new(0.0, 1.0), rng.random_range(-0.15..0.15));
    let side = rotate(axis, -std::f64::consts::FRAC_PI_2);
    let half_gap = 0.15;

    let (approach, together, after) = (16usize, 8usize, 20usize);
    let join = approach + 1;
    let split = join + together;
    let end = split + after;
    let split_center = center + axis * (together as f64 * step);

    let walker = |sign: f64, branch: f64| {
        let meet = center + side * (sign * half_gap);
        let from = meet - rotate(axis, sign * 0.6) * (approach as f64 * step);
        let fork = split_center + side * (sign * half_gap);
        let out = rotate(axis, -branch * CROSSING_DIVERGENCE / 2.0);
        ScriptedWalker {
            keyframes: vec![
                Keyframe::new(1, from),
                Keyframe::new(join, meet),
                Keyframe::new(split, fork),
                Keyframe::new(end, fork + out * (after as f64 * step)),
            ],
        }
    };
    let branch = if rng.random::<bool>() { 1.0 } else { -1.0 };
    SceneConfig {
        duration_frames: end,
        scripted: vec![walker(1.0, branch), walker(-1.0, -branch)],
        ..scripted_base(seed)
    }
}

/// Frames at which walker 0 of the exit/re-enter preset leaves and comes back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitReentry {
    pub last_inside: usize,
    pub reentry: usize,
}

const EXIT_STEP: f64 = 0.4;

/// Walker 0 (tracked) walks out through the left edge and comes back
/// through the bottom edge; walker 1, a decoy, enters near the exit point
/// during the absence and walks straight on.
pub fn make_exit_reenter_scene(seed: u64) -> SceneConfig {
    let mut rng = stream(seed, 0);
    let fov = SceneConfig::default().fov;
    let y_exit = rng.random_range(4.0..7.0);
    let x_start = rng.random_range(4.5..6.0);
    let exit_frame = (x_start / EXIT_STEP).ceil() as usize + 1;
    let absent = rng.random_range(12..=16usize);
    let reentry = exit_frame + absent;
    let x_reentry = rng.random_range(3.5..5.5);
    let duration = 60;

    let corner = Point2::new(fov.min_x - 0.9, fov.min_y - 0.9);
    let corner_frame = exit_frame + 2 + (absent - 3) / 2;
    let below = Point2::new(x_reentry, fov.min_y - 0.3);
    let inward = Point2::new(x_reentry, fov.min_y + 2.3 + rng.random_range(0.0..1.0));
    let turn = rng.random_range(0.5..0.8);
    let tracked = ScriptedWalker {
        keyframes: vec![
            Keyframe::new(1, Point2::new(x_start, y_exit)),
            Keyframe::new(exit_frame, Point2::new(fov.min_x - 0.2, y_exit)),
            Keyframe::new(exit_frame + 2, Point2::new(fov.min_x - 0.9, y_exit - 0.5)),
            Keyframe::new(corner_frame, corner),
            Keyframe::new(reentry - 1, below),
            Keyframe::new(reentry + 6, inward),
            Keyframe::new(
                duration,
                inward
                    + rotate(Point2::new(0.0, 1.0), -turn)
                        * (0.3 * (duration - reentry - 6) as f64),
            ),
        ],
    };

    let decoy_in = exit_frame + rng.random_range(2..=4usize);
    let decoy_y = y_exit + rng.random_range(-1.5..1.5);
    let decoy_dir = rotate(Point2::new(1.0, 0.0), rng.random_range(-0.2..0.2));
    let decoy_step = 0.18;
    let decoy_entry = Point2::new(fov.min_x + 0.05, decoy_y);
    let decoy = ScriptedWalker {
        keyframes: vec![
            Keyframe::new(
                1,
                decoy_entry - decoy_dir * (decoy_step * (decoy_in - 1) as f64),
            ),
            Keyframe::new(decoy_in, decoy_entry),
            Keyframe::new(
                duration,
                decoy_entry + decoy_dir * (decoy_step * (duration - decoy_in) as f64),
            ),
        ],
    };

    SceneConfig {
        duration_frames: duration,
        scripted: vec![tracked, decoy],
        ..scripted_base(seed)
    }
}

/// Exit and re-entry frames of walker 0 in a simulated scene: the last
/// in-FOV frame before its first absence, and the first in-FOV frame after.
pub fn exit_reentry(truth: &GroundTruth) -> Option<ExitReentry> {
    let inside: Vec<bool> = (1..=truth.positions[0].len())
        .map(|f| truth.in_fov(0, FrameIndex(f)))
        .collect();
    let gone = inside.iter().position(|&x| !x)?;
    if gone == 0 {
        return None;
    }
    let back = gone + inside[gone..].iter().position(|&x| x)?;
    Some(ExitReentry {
        last_inside: gone,
        reentry: back + 1,
    })
}

/// Pause start and length of the stop-and-turn preset.
pub const STOP_ARRIVAL: usize = 11;
pub const STOP_FRAMES: usize = 12;

/// Walker 0 (tracked) walks in, stands still for 12 frames, then walks
/// back within 30 degrees of where it came from; walker 1 passes within
/// 0.3 m during the pause.
pub fn make_stop_and_turn_scene(seed: u64) -> SceneConfig {
    let mut rng = stream(seed, 0);
    let step = 0.3;
    let stop = Point2::new(
        5.5 + rng.random_range(-1.0..1.0),
        6.0 + rng.random_range(-1.0..1.0),
    );
    let heading = rotate(Point2::new(1.0, 0.0), rng.random_range(-0.5..0.5));
    let back = rotate(heading * -1.0, rng.random_range(-0.35..0.35));
    let leave = STOP_ARRIVAL + STOP_FRAMES;
    let duration = leave + 12;
    let tracked = ScriptedWalker {
        keyframes: vec![
            Keyframe::new(1, stop - heading * (step * (STOP_ARRIVAL - 1) as f64)),
            Keyframe::new(STOP_ARRIVAL, stop),
            Keyframe::new(leave, stop),
            Keyframe::new(duration, stop + back * (step * (duration - leave) as f64)),
        ],
    };
    let across = rotate(heading, std::f64::consts::FRAC_PI_2);
    let closest = STOP_ARRIVAL + STOP_FRAMES / 2;
    let pass_by = stop + heading * 0.3;
    let confuser = ScriptedWalker {
        keyframes: vec![
            Keyframe::new(1, pass_by - across * (step * (closest - 1) as f64)),
            Keyframe::new(closest, pass_by),
            Keyframe::new(
                duration,
                pass_by + across * (step * (duration - closest) as f64),
            ),
        ],
    };
    SceneConfig {
        duration_frames: duration,
        scripted: vec![tracked, confuser],
        ..scripted_base(seed)
    }
}
