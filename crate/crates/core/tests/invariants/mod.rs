//! Property checks shared by `properties.rs` and the acceptance suite.
//!
//! Each check drives a deterministic `TestRunner` and returns the failure
//! message, so callers can either assert or report.

#![allow(dead_code)]

use std::f64::consts::TAU;

use fusetrack::filter::{predict, run_hypothesis_filter, update, FilterConfig, FilterState};
use fusetrack::geom::{Point2, Rect};
use fusetrack::metrics::{offline_location_error, overlap_error};
use fusetrack::radio::{expected_rss, radio_score, PriorConfig, RadioModel};
use fusetrack::search::{score_all, select_best};
use fusetrack::sim::{simulate, SceneConfig};
use fusetrack::tracklet::{direction_cost, generate_tracklets, speed_cost, TrackletGenConfig};
use fusetrack::tree::{build_trees, enumerate_hypotheses, Hypothesis, SegmentRule, TreeConfig};
use fusetrack::types::{
    validate_window_inputs, Basestation, Detection, DetectionKind, FrameIndex, RadioMeasurement,
    WindowConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

type P = Point2<f64>;
pub type Check = fn() -> Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn point(range: f64) -> impl Strategy<Value = P> {
    (-range..range, -range..range).prop_map(|(x, y)| P::new(x, y))
}

fn rotate(p: P, theta: f64) -> P {
    let (s, c) = theta.sin_cos();
    P::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

fn close(a: f64, b: f64, tol: f64) -> Result<(), TestCaseError> {
    prop_assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    Ok(())
}

fn steps_ok(a: P, b: P, c: P) -> bool {
    a.distance(b) > 1e-3 && b.distance(c) > 1e-3
}

pub fn cost_ranges() -> Result<(), String> {
    run(256, (point(50.0), point(50.0), point(50.0)), |(a, b, c)| {
        prop_assume!(steps_ok(a, b, c));
        let d = direction_cost(a, b, c).unwrap();
        let s = speed_cost(a, b, c).unwrap();
        prop_assert!((0.0..=2.0).contains(&d), "direction {d}");
        prop_assert!((0.0..=1.0).contains(&s), "speed {s}");
        Ok(())
    })
}

pub fn cost_isometry_invariance() -> Result<(), String> {
    let s = (
        point(50.0),
        point(50.0),
        point(50.0),
        point(100.0),
        0.0..TAU,
    );
    run(256, s, |(a, b, c, t, theta)| {
        prop_assume!(steps_ok(a, b, c));
        let d = direction_cost(a, b, c).unwrap();
        let s = speed_cost(a, b, c).unwrap();
        let (ta, tb, tc) = (a + t, b + t, c + t);
        close(direction_cost(ta, tb, tc).unwrap(), d, 1e-7)?;
        close(speed_cost(ta, tb, tc).unwrap(), s, 1e-7)?;
        let (ra, rb, rc) = (rotate(a, theta), rotate(b, theta), rotate(c, theta));
        close(direction_cost(ra, rb, rc).unwrap(), d, 1e-7)?;
        close(speed_cost(ra, rb, rc).unwrap(), s, 1e-7)?;
        Ok(())
    })
}

pub fn speed_cost_scale_invariance() -> Result<(), String> {
    run(
        256,
        (point(50.0), point(50.0), point(50.0), 0.1..10.0),
        |(a, b, c, k)| {
            prop_assume!(steps_ok(a, b, c));
            let scaled = speed_cost(a * k, b * k, c * k).unwrap();
            close(scaled, speed_cost(a, b, c).unwrap(), 1e-9)
        },
    )
}

/// Random camera frames: up to `per_frame` points in a `side`-metre square.
fn frames(max_w: usize, per_frame: usize, side: f64) -> impl Strategy<Value = Vec<Vec<P>>> {
    prop::collection::vec(
        prop::collection::vec(
            (0.0..side, 0.0..side).prop_map(|(x, y)| P::new(x, y)),
            0..=per_frame,
        ),
        2..=max_w,
    )
}

fn camera(frames: &[Vec<P>]) -> Vec<Detection<f64>> {
    frames
        .iter()
        .enumerate()
        .flat_map(|(i, f)| {
            f.iter()
                .map(move |&p| Detection::camera(FrameIndex(i + 1), p))
        })
        .collect()
}

fn key(frame: usize, p: P) -> (usize, u64, u64) {
    (frame, p.x.to_bits(), p.y.to_bits())
}

pub fn tracklet_partition() -> Result<(), String> {
    let cfg = TrackletGenConfig::default();
    run(128, frames(30, 4, 6.0), |fr| {
        let dets = camera(&fr);
        let window = WindowConfig::new(fr.len(), 2.0).unwrap();
        let bundle = validate_window_inputs(&dets, &[], window).unwrap();
        let tracklets = generate_tracklets(&bundle, &cfg);

        let total: usize = tracklets.iter().map(|t| t.len()).sum();
        prop_assert_eq!(total, dets.len());
        let mut used: Vec<_> = tracklets
            .iter()
            .flat_map(|t| t.detections().iter())
            .map(|d| key(d.frame().0, d.position().unwrap()))
            .collect();
        let mut input: Vec<_> = dets
            .iter()
            .map(|d| key(d.frame().0, d.position().unwrap()))
            .collect();
        used.sort_unstable();
        input.sort_unstable();
        prop_assert_eq!(used, input);

        for t in &tracklets {
            for (i, d) in t.detections().iter().enumerate() {
                prop_assert_eq!(d.frame().0, t.start().0 + i);
                prop_assert!(d.is_camera());
            }
            for pair in t.detections().windows(2) {
                let (a, b) = (pair[0].position().unwrap(), pair[1].position().unwrap());
                prop_assert!(a.distance(b) < cfg.max_displacement);
            }
        }
        Ok(())
    })
}

fn distance_to_line(p: P, a: P, b: P) -> f64 {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return p.distance(a);
    }
    let ap = p - a;
    (ab.x * ap.y - ab.y * ap.x).abs() / len
}

pub fn hypothesis_structure() -> Result<(), String> {
    let fov = Rect::new(0.0, 0.0, 8.0, 8.0);
    let tree = TreeConfig {
        max_hypotheses: 2_000,
        ..TreeConfig::default()
    };
    let gen = TrackletGenConfig::default();
    run(64, frames(24, 3, 8.0), |fr| {
        let w = fr.len();
        let window = WindowConfig::new(w, 2.0).unwrap();
        let bundle = validate_window_inputs(&camera(&fr), &[], window).unwrap();
        let tracklets = generate_tracklets(&bundle, &gen);
        let forest = build_trees(&tracklets, &fov, &tree);
        let en = enumerate_hypotheses(&forest, &tracklets, &fov, w, &tree).unwrap();
        prop_assert_eq!(en.hypotheses.len(), forest.leaf_count());

        let again = enumerate_hypotheses(
            &build_trees(&tracklets, &fov, &tree),
            &tracklets,
            &fov,
            w,
            &tree,
        )
        .unwrap();
        prop_assert_eq!(&again.hypotheses, &en.hypotheses);

        for h in &en.hypotheses {
            prop_assert_eq!(h.len(), w);
            for (i, d) in h.detections().iter().enumerate() {
                prop_assert_eq!(d.frame().0, i + 1);
            }

            let ids = h.tracklet_ids();
            let expected: Vec<_> = ids
                .iter()
                .flat_map(|id| tracklets[id.0].detections().iter().cloned())
                .collect();
            let cams: Vec<_> = h
                .detections()
                .iter()
                .filter(|d| d.is_camera())
                .cloned()
                .collect();
            prop_assert_eq!(cams, expected);

            for seg in h
                .segments()
                .iter()
                .filter(|s| matches!(s.rule, SegmentRule::Gap(_)))
            {
                let dets = h.detections();
                let a = dets[seg.start.slot() - 1].position().unwrap();
                let b = dets[seg.end.slot() + 1].position().unwrap();
                for d in &dets[seg.start.slot()..=seg.end.slot()] {
                    if let Some(p) = d.position() {
                        prop_assert!(distance_to_line(p, a, b) <= 1e-9);
                    }
                }
            }
        }
        Ok(())
    })
}

fn spd(cov: &[[f64; 4]; 4]) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if (cov[i][j] - cov[j][i]).abs() > 1e-9 {
                return false;
            }
        }
    }
    // Cholesky of `cov + 1e-9 I`; every pivot must stay positive.
    let mut l = [[0.0; 4]; 4];
    for j in 0..4 {
        let d = cov[j][j] + 1e-9 - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 0.0 {
            return false;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..4 {
            l[i][j] = (cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    true
}

pub fn covariance_spd() -> Result<(), String> {
    let s = (
        prop::collection::vec((point(20.0), 0.01..2.0, 0.01..3.0), 1..60),
        0.01..3.0,
    );
    run(128, s, |(steps, accel)| {
        let cfg = FilterConfig {
            process_noise_accel: accel,
            ..FilterConfig::default()
        };
        let mut state = FilterState::initial(steps[0].0, &cfg);
        for (z, dt, r) in steps {
            state = predict(&state, dt, &cfg);
            prop_assert!(spd(&state.cov), "prior {:?}", state.cov);
            state = update(&state, z, r).unwrap().0;
            prop_assert!(spd(&state.cov), "posterior {:?}", state.cov);
        }
        Ok(())
    })
}

pub fn innovation_penalty_monotone() -> Result<(), String> {
    let cfg = FilterConfig::default();
    run(
        256,
        (point(10.0), 0.0..TAU, 0.0..5.0, 0.01..5.0),
        |(c, theta, r1, dr)| {
            let state = predict(&FilterState::initial(c, &cfg), 0.5, &cfg);
            let dir = P::new(theta.cos(), theta.sin());
            let near = update(&state, c + dir * r1, cfg.meas_noise_camera)
                .unwrap()
                .1;
            let far = update(&state, c + dir * (r1 + dr), cfg.meas_noise_camera)
                .unwrap()
                .1;
            prop_assert!(far.mahalanobis_sq > near.mahalanobis_sq);
            prop_assert!(far.log_density < near.log_density);
            Ok(())
        },
    )
}

fn hypothesis_from(items: &[(u8, P)], trailing_empty: usize) -> Hypothesis<f64> {
    let mut dets: Vec<_> = items
        .iter()
        .enumerate()
        .map(|(i, &(kind, p))| {
            let f = FrameIndex(i + 1);
            match kind {
                0 => Detection::camera(f, p),
                1 => Detection::synthetic(f, p),
                _ => Detection::empty(f),
            }
        })
        .collect();
    let n = dets.len();
    dets.extend((1..=trailing_empty).map(|k| Detection::empty(FrameIndex(n + k))));
    Hypothesis::from_detections(dets).unwrap()
}

pub fn visual_score_window_invariance() -> Result<(), String> {
    let cfg = FilterConfig::default();
    let s = (
        prop::collection::vec((0u8..3, point(10.0)), 1..40),
        1usize..60,
    );
    run(128, s, |(items, extra)| {
        prop_assume!(items.iter().any(|(k, _)| *k < 2));
        let short = run_hypothesis_filter(&hypothesis_from(&items, 0), &cfg, 0.5).unwrap();
        let long = run_hypothesis_filter(&hypothesis_from(&items, extra), &cfg, 0.5).unwrap();
        prop_assert_eq!(short.non_empty, long.non_empty);
        close(short.visual_score, long.visual_score, 1e-12)
    })
}

pub fn expected_rss_monotone() -> Result<(), String> {
    run(
        256,
        (-90.0..-30.0, 0.5..5.0, 0.1..100.0, 1e-3..50.0),
        |(p0, n, d, dd)| {
            let m = RadioModel::new(p0, n, 4.0).unwrap();
            prop_assert!(expected_rss(&m, d + dd) < expected_rss(&m, d));
            close(expected_rss(&m, 1.0), p0, 1e-12)
        },
    )
}

fn aps() -> Vec<Basestation<f64>> {
    [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Basestation {
            id: format!("ap{i}").as_str().into(),
            position: P::new(x, y),
        })
        .collect()
}

/// Trajectory over 20 frames with radio samples on a subset of them.
fn radio_case() -> impl Strategy<Value = (Vec<Option<P>>, Vec<RadioMeasurement<f64>>)> {
    let traj = prop::collection::vec(prop::option::weighted(0.8, (0.0..10.0, 0.0..10.0)), 20);
    let samples = prop::collection::btree_set((1usize..=20, 0usize..3), 1..40);
    (traj, samples, prop::collection::vec(-95.0..-40.0, 40)).prop_map(|(t, s, rssi)| {
        let traj = t
            .into_iter()
            .map(|o| o.map(|(x, y)| P::new(x, y)))
            .collect();
        let radio = s
            .into_iter()
            .zip(rssi)
            .map(|((f, ap), r)| RadioMeasurement {
                frame: FrameIndex(f),
                basestation: format!("ap{ap}").as_str().into(),
                rssi: r,
            })
            .collect();
        (traj, radio)
    })
}

pub fn radio_score_permutation_invariance() -> Result<(), String> {
    let prior = PriorConfig::default();
    let model = prior.mode_model();
    let aps = aps();
    let s = radio_case().prop_flat_map(|(t, r)| (Just(t), Just(r.clone()), Just(r).prop_shuffle()));
    run(128, s, |(traj, radio, shuffled)| {
        let h = traj.iter().flatten().count().max(1);
        let a = radio_score(&traj, &radio, &aps, &model, &prior, h).unwrap();
        let b = radio_score(&traj, &shuffled, &aps, &model, &prior, h).unwrap();
        close(a, b, 1e-9 * a.abs().max(1.0))
    })
}

pub fn radio_terms_are_gaussian() -> Result<(), String> {
    let prior = PriorConfig::default();
    let model = prior.mode_model();
    let aps = aps();
    run(128, radio_case(), |(traj, radio)| {
        let h = traj.iter().flatten().count().max(1);
        let (last, rest) = radio.split_last().unwrap();
        let with = radio_score(&traj, &radio, &aps, &model, &prior, h).unwrap();
        let without = radio_score(&traj, rest, &aps, &model, &prior, h).unwrap();
        let added = (with - without) * h as f64;
        let expected = match traj[last.frame.0 - 1] {
            None => 0.0,
            Some(x) => {
                let ap = aps
                    .iter()
                    .find(|a| a.id == last.basestation)
                    .unwrap()
                    .position;
                let mu = expected_rss(&model, x.distance(ap));
                let z = (last.rssi - mu) / model.sigma;
                -0.5 * z * z - (model.sigma * TAU.sqrt()).ln()
            }
        };
        close(added, expected, 1e-8)
    })
}

struct Scored {
    hypotheses: Vec<Hypothesis<f64>>,
    radio: Vec<RadioMeasurement<f64>>,
    basestations: Vec<Basestation<f64>>,
}

fn small_scene(seed: u64) -> Scored {
    let cfg = SceneConfig {
        duration_frames: 24,
        walkers: 2,
        false_positive_rate: 0.05,
        seed,
        ..SceneConfig::default()
    };
    let scene = simulate(&cfg).unwrap();
    let window = WindowConfig::new(cfg.duration_frames, cfg.fps).unwrap();
    let radio = scene.radio[&0].clone();
    let bundle = validate_window_inputs(&scene.detections, &radio, window).unwrap();
    let tree = TreeConfig {
        max_hypotheses: 500,
        ..TreeConfig::default()
    };
    let tracklets = generate_tracklets(&bundle, &TrackletGenConfig::default());
    let forest = build_trees(&tracklets, &cfg.fov, &tree);
    let hypotheses = enumerate_hypotheses(&forest, &tracklets, &cfg.fov, 24, &tree)
        .unwrap()
        .hypotheses;
    Scored {
        hypotheses,
        radio,
        basestations: cfg.basestations,
    }
}

fn models(p0: &[f64], n: &[f64]) -> Vec<RadioModel<f64>> {
    p0.iter()
        .flat_map(|&p| n.iter().map(move |&n| RadioModel::new(p, n, 4.0).unwrap()))
        .collect()
}

pub fn argmax_shift_invariance() -> Result<(), String> {
    let prior = PriorConfig::default();
    let grid = models(&[-70.0, -62.0, -54.0], &[1.6, 2.4, 3.2]);
    run(16, (0u64..10_000, -100.0..100.0), |(seed, shift)| {
        let s = small_scene(seed);
        prop_assume!(!s.hypotheses.is_empty());
        let cfg = FilterConfig::default();
        let scored = score_all(
            &s.hypotheses,
            &s.radio,
            &s.basestations,
            &grid,
            &cfg,
            &prior,
            0.5,
        )
        .unwrap();
        let best = select_best(&scored).unwrap();
        let shifted: Vec<_> = scored
            .iter()
            .cloned()
            .map(|mut h| {
                h.radio_score += shift;
                h.total += shift;
                h
            })
            .collect();
        let moved = select_best(&shifted).unwrap();
        prop_assert_eq!(
            (best.hypothesis_index, best.model_index),
            (moved.hypothesis_index, moved.model_index)
        );
        Ok(())
    })
}

pub fn larger_grid_never_worse() -> Result<(), String> {
    let prior = PriorConfig::default();
    let grid = models(&[-70.0, -58.0], &[1.8, 2.8]);
    run(
        16,
        (0u64..10_000, -100.0..-20.0, 0.5..6.0),
        |(seed, p0, n)| {
            let s = small_scene(seed);
            prop_assume!(!s.hypotheses.is_empty());
            let cfg = FilterConfig::default();
            let mut wider = grid.clone();
            wider.push(RadioModel::new(p0, n, 4.0).unwrap());
            let a = score_all(
                &s.hypotheses,
                &s.radio,
                &s.basestations,
                &grid,
                &cfg,
                &prior,
                0.5,
            )
            .unwrap();
            let b = score_all(
                &s.hypotheses,
                &s.radio,
                &s.basestations,
                &wider,
                &cfg,
                &prior,
                0.5,
            )
            .unwrap();
            prop_assert!(select_best(&b).unwrap().total >= select_best(&a).unwrap().total);
            Ok(())
        },
    )
}

fn trajectory(len: usize) -> impl Strategy<Value = Vec<Option<P>>> {
    prop::collection::vec(prop::option::weighted(0.7, point(20.0)), len)
}

pub fn metric_identities() -> Result<(), String> {
    let s = (1usize..50).prop_flat_map(|w| (trajectory(w), trajectory(w)));
    run(256, s, |(a, b)| {
        let same = offline_location_error(&a, &a).unwrap();
        match a.iter().any(Option::is_some) {
            true => prop_assert_eq!(same, Some(0.0)),
            false => prop_assert_eq!(same, None),
        }
        prop_assert_eq!(overlap_error(&a, &a).unwrap().overlap, 0.0);

        let ov = overlap_error(&a, &b).unwrap();
        close(ov.overlap, ov.fp_ratio + ov.fn_ratio, 1e-15)?;
        let w = a.len() as f64;
        let agree = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| x.is_some() == y.is_some())
            .count() as f64;
        close(ov.fp_ratio * w + ov.fn_ratio * w + agree, w, 1e-9)?;
        Ok(())
    })
}

pub fn offline_triangle() -> Result<(), String> {
    let full = |w| prop::collection::vec(point(20.0).prop_map(Some), w);
    let s = (1usize..40).prop_flat_map(move |w| (full(w), full(w), full(w)));
    run(256, s, |(a, b, c)| {
        let ac = offline_location_error(&a, &c).unwrap().unwrap();
        let ab = offline_location_error(&a, &b).unwrap().unwrap();
        let bc = offline_location_error(&b, &c).unwrap().unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        Ok(())
    })
}

fn scene_config(seed: u64) -> SceneConfig {
    SceneConfig {
        duration_frames: 60,
        walkers: 3,
        seed,
        ..SceneConfig::default()
    }
}

pub fn simulator_determinism() -> Result<(), String> {
    run(8, any::<u64>(), |seed| {
        let a = simulate(&scene_config(seed)).unwrap();
        let b = simulate(&scene_config(seed)).unwrap();
        prop_assert_eq!(&a.truth, &b.truth);
        prop_assert_eq!(&a.detections, &b.detections);
        prop_assert_eq!(&a.radio, &b.radio);
        prop_assert_eq!(a.stats, b.stats);
        Ok(())
    })
}

pub fn simulator_speed_bound() -> Result<(), String> {
    run(8, any::<u64>(), |seed| {
        let cfg = scene_config(seed);
        let scene = simulate(&cfg).unwrap();
        let bound = cfg.speed_range[1] / cfg.fps + 1e-9;
        for walker in &scene.truth.positions {
            for pair in walker.windows(2) {
                prop_assert!(pair[0].distance(pair[1]) <= bound);
            }
        }
        Ok(())
    })
}

pub fn detection_kinds_round_trip() -> Result<(), String> {
    run(64, (0u8..3, point(5.0), 1usize..100), |(kind, p, f)| {
        let f = FrameIndex(f);
        let d = match kind {
            0 => Detection::camera(f, p),
            1 => Detection::synthetic(f, p),
            _ => Detection::empty(f),
        };
        prop_assert_eq!(d.is_empty(), d.kind() == DetectionKind::Empty);
        prop_assert_eq!(d.is_camera(), d.kind() == DetectionKind::Camera);
        prop_assert_eq!(d.position().is_some(), !d.is_empty());
        Ok(())
    })
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("cost ranges", cost_ranges),
        ("cost isometry invariance", cost_isometry_invariance),
        ("speed cost scale invariance", speed_cost_scale_invariance),
        ("tracklet partition and consecutiveness", tracklet_partition),
        (
            "hypothesis length, camera preservation, collinear gaps",
            hypothesis_structure,
        ),
        ("covariance SPD", covariance_spd),
        ("innovation penalty monotone", innovation_penalty_monotone),
        (
            "visual score |H| normalisation",
            visual_score_window_invariance,
        ),
        ("expected_rss monotone, r(1 m) = P0", expected_rss_monotone),
        (
            "radio score permutation invariance",
            radio_score_permutation_invariance,
        ),
        (
            "radio terms are Gaussian log-densities",
            radio_terms_are_gaussian,
        ),
        ("argmax invariant to radio shifts", argmax_shift_invariance),
        ("larger grid never worse", larger_grid_never_worse),
        ("metric identities", metric_identities),
        ("offline error triangle", offline_triangle),
        ("simulator determinism", simulator_determinism),
        ("simulator speed bound", simulator_speed_bound),
        ("detection kinds", detection_kinds_round_trip),
    ]
}
