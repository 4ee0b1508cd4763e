use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use fusetrack::experiment::{
    fitness_csv, learn_model, model_learning_scene, rssi_rate_sweep, sweep_csv, window_size_sweep,
};
use fusetrack::io;
use fusetrack::metrics::{cdf_csv, cdf_series, summarize, window_report, WindowReport};
use fusetrack::search::{track_window_ravel, track_window_vision_only, InitHint};
use fusetrack::sim::simulate;
use fusetrack::tracklet::generate_tracklets;
use fusetrack::types::{FrameIndex, Recording};
use fusetrack::{Point, RunConfig};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{Cli, Command, EvalArgs, Mode, SweepArgs, SweepKind, TrackArgs};

/// `--init-hint` in recording frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalHint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

pub fn parse_hint(s: &str) -> Result<GlobalHint, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [f, x, y] = parts.as_slice() else {
        return Err("expected `frame,x,y`".into());
    };
    let frame: usize = f.parse().map_err(|e| format!("frame: {e}"))?;
    if frame == 0 {
        return Err("frames start at 1".into());
    }
    let x: f64 = x.parse().map_err(|e| format!("x: {e}"))?;
    let y: f64 = y.parse().map_err(|e| format!("y: {e}"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err("position must be finite".into());
    }
    Ok(GlobalHint { frame, x, y })
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let mut cfg = load_config(cli.config.as_deref())?;
    let (dir, mut manifest) = match cli.command {
        Command::Config { print_defaults } => {
            let shown = if print_defaults {
                RunConfig::default()
            } else {
                cfg
            };
            print!("{}", shown.to_toml());
            return Ok(());
        }
        Command::Simulate { out } => {
            if let Some(seed) = cli.seed {
                cfg.scene.seed = seed;
            }
            let m = simulate_cmd(&cfg, &out)?;
            (out, m)
        }
        Command::Track(args) => {
            let m = track_cmd(&mut cfg, &args)?;
            (args.out, m)
        }
        Command::Eval(args) => {
            let m = eval_cmd(&cfg, &args)?;
            (args.out, m)
        }
        Command::Sweep(args) => {
            let m = sweep_cmd(&cfg, &args, cli.seed.unwrap_or(0))?;
            (args.out, m)
        }
    };
    if let Some(c) = cli.config {
        manifest.inputs.insert(0, c);
    }
    manifest.finish(&dir, started.elapsed())?;
    Ok(())
}

fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    cfg.scene.validate()?;
    create_dir(out)?;
    let scene = simulate(&cfg.scene)?;
    let mut outputs = io::write_scene(&scene, out)?;

    let echoed = out.join("scene_config.toml");
    fs::write(&echoed, cfg.to_toml()).with_context(|| format!("writing {}", echoed.display()))?;
    outputs.push(echoed);

    let mut m = RunManifest::new("simulate", &cfg.to_toml());
    m.seeds = vec![cfg.scene.seed];
    m.outputs = outputs;
    Ok(m)
}

fn track_cmd(cfg: &mut RunConfig, args: &TrackArgs) -> Result<RunManifest> {
    if let Some(w) = args.window_frames {
        cfg.window.window_size_frames = w;
    }
    if let Some(s) = args.stride {
        cfg.window.stride_frames = s;
    }
    cfg.validate()?;
    let window = cfg.window.window_config()?;
    let tracker = cfg.tracker();

    let camera = io::read_detections(&args.detections)?;
    let mut inputs = vec![args.detections.clone()];
    let (radio, basestations) = match args.mode {
        Mode::Ravel => {
            let Some(bs) = &args.basestations else {
                bail!("ravel mode needs --basestations");
            };
            let Some(rssi) = &args.rssi else {
                bail!("ravel mode needs --rssi");
            };
            if args.init_hint.is_some() {
                eprintln!("warning: --init-hint only applies to vision mode; ignored");
            }
            inputs.extend([rssi.clone(), bs.clone()]);
            (io::read_radio(rssi)?, io::read_basestations(bs)?)
        }
        Mode::Vision => {
            if args.rssi.is_some() || args.basestations.is_some() {
                eprintln!("warning: vision mode ignores RSSI and basestation inputs");
            }
            (Vec::new(), Vec::new())
        }
    };

    let last_frame = camera
        .iter()
        .map(|d| d.frame().0)
        .chain(radio.iter().map(|m| m.frame.0))
        .max()
        .unwrap_or(0);
    let w = window.window_size_frames;
    let recording = Recording {
        total_frames: last_frame.max(w),
        camera,
        radio,
    };
    let offsets =
        Recording::<f64>::window_offsets(recording.total_frames, w, cfg.window.stride_frames);
    if last_frame > offsets.last().copied().unwrap_or(0) + w {
        eprintln!(
            "warning: frames after {} do not fill a window and are not tracked",
            offsets.last().copied().unwrap_or(0) + w
        );
    }

    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    let mut windows = Vec::new();
    for (k, &offset) in offsets.iter().enumerate() {
        let bundle = recording.window(offset, window)?;
        let result = match args.mode {
            Mode::Ravel => track_window_ravel(&bundle, &basestations, &tracker)?,
            Mode::Vision => {
                let hint = args
                    .init_hint
                    .filter(|h| h.frame > offset && h.frame <= offset + w)
                    .map(|h| InitHint {
                        frame: FrameIndex(h.frame - offset),
                        position: Point::new(h.x, h.y),
                    });
                track_window_vision_only(&bundle, &tracker, hint)?
            }
        };

        let traj = args.out.join(format!("trajectory_{k:03}.jsonl"));
        io::write_jsonl(&traj, io::trajectory_records(&result, offset))?;
        let tracklets = args.out.join(format!("tracklets_{k:03}.jsonl"));
        io::write_tracklets(
            &tracklets,
            &generate_tracklets(&bundle, &tracker.tracklet),
            offset,
        )?;

        let mut diag = serde_json::to_value(&result.diagnostics)?;
        if let Some(h) = &result.diagnostics.hint {
            diag["hint"]["frame"] = json!(h.frame.0 + offset);
        }
        windows.push(json!({
            "window": k,
            "first_frame": offset + 1,
            "last_frame": offset + w,
            "trajectory": traj.file_name().and_then(|n| n.to_str()),
            "diagnostics": diag,
        }));
        outputs.extend([traj, tracklets]);
    }

    let diagnostics = args.out.join("diagnostics.json");
    let mode = match args.mode {
        Mode::Ravel => "ravel",
        Mode::Vision => "vision",
    };
    io::write_json(
        &diagnostics,
        &json!({ "mode": mode, "window_frames": w, "stride_frames": cfg.window.stride_frames, "windows": windows }),
    )?;
    outputs.push(diagnostics);

    let params = serde_json::to_string(&json!({ "mode": mode, "init_hint": args.init_hint }))?;
    let mut m = RunManifest::new("track", &format!("{}\n{params}", cfg.to_toml()));
    m.inputs = inputs;
    m.outputs = outputs;
    Ok(m)
}

fn trajectory_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("trajectory_") && n.ends_with(".jsonl"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    ensure!(!files.is_empty(), "no trajectory files found");
    Ok(files)
}

#[derive(Debug, Serialize)]
struct WindowMetrics {
    file: PathBuf,
    first_frame: usize,
    last_frame: usize,
    #[serde(flatten)]
    report: WindowReport<f64>,
}

fn eval_cmd(cfg: &RunConfig, args: &EvalArgs) -> Result<RunManifest> {
    let files = trajectory_files(&args.est)?;
    let truth = io::read_truth(&args.truth, args.walker)?;

    let mut windows = Vec::new();
    for f in &files {
        let recs = io::read_trajectory(f)?;
        ensure!(!recs.is_empty(), "{}: empty trajectory", f.display());
        let est: Vec<Option<Point>> = recs.iter().map(|r| r.position()).collect();
        let gt = recs
            .iter()
            .map(|r| {
                truth.get(&r.frame).copied().with_context(|| {
                    format!("{}: frame {} has no ground truth", f.display(), r.frame)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        windows.push(WindowMetrics {
            file: f.clone(),
            first_frame: recs[0].frame,
            last_frame: recs[recs.len() - 1].frame,
            report: window_report(&est, &gt)?,
        });
    }

    let reports: Vec<WindowReport<f64>> = windows.iter().map(|w| w.report).collect();
    let summary = summarize(&reports);
    create_dir(&args.out)?;
    let metrics = args.out.join("metrics.json");
    io::write_json(&metrics, &json!({ "summary": summary, "windows": windows }))?;

    let offline: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.offline_location_error)
        .collect();
    let cdf = args.out.join("cdf.csv");
    let text = match cdf_series(&offline) {
        Ok(c) => cdf_csv(&c),
        Err(_) => "error_m,cdf\n".to_string(),
    };
    fs::write(&cdf, text).with_context(|| format!("writing {}", cdf.display()))?;

    let mut m = RunManifest::new(
        "eval",
        &format!("{}\nwalker={}", cfg.to_toml(), args.walker),
    );
    m.inputs = files;
    m.inputs.push(args.truth.clone());
    m.outputs = vec![metrics, cdf];
    Ok(m)
}

fn sweep_cmd(cfg: &RunConfig, args: &SweepArgs, first_seed: u64) -> Result<RunManifest> {
    ensure!(args.seeds > 0, "--seeds must be at least 1");
    let seeds: Vec<u64> = (first_seed..first_seed + args.seeds).collect();
    let window = args.window_frames.unwrap_or(cfg.window.window_size_frames);
    create_dir(&args.out)?;

    let mut outputs = Vec::new();
    let (name, points) = match args.kind {
        SweepKind::WindowSize => {
            let points = args
                .points
                .clone()
                .unwrap_or_else(|| vec![20.0, 60.0, 120.0]);
            ensure!(!points.is_empty(), "empty range");
            let windows = points
                .iter()
                .map(|&p| {
                    ensure!(
                        p >= 1.0 && p.fract() == 0.0,
                        "window sizes must be whole frames, got {p}"
                    );
                    Ok(p as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = window_size_sweep(&windows, &seeds, cfg.scene.rssi_rate_hz)?;
            let path = args.out.join("sweep_window_size.csv");
            fs::write(&path, sweep_csv(&rows, "window_frames"))?;
            outputs.push(path);
            ("window_size", points)
        }
        SweepKind::RssiRate => {
            let points = args
                .points
                .clone()
                .unwrap_or_else(|| vec![0.2, 0.5, 1.0, 2.0]);
            ensure!(!points.is_empty(), "empty range");
            let rows = rssi_rate_sweep(&points, &seeds, window)?;
            let path = args.out.join("sweep_rssi_rate.csv");
            fs::write(&path, sweep_csv(&rows, "rssi_rate_hz"))?;
            outputs.push(path);
            ("rssi_rate", points)
        }
        SweepKind::ModelGrid => {
            if args.points.is_some() {
                eprintln!("warning: --points does not apply to the model_grid sweep");
            }
            let mut learned = String::from("seed,P0,n\n");
            for &seed in &seeds {
                let scene = model_learning_scene(seed);
                let path = args.out.join(format!("fitness_{seed}.csv"));
                fs::write(&path, fitness_csv(&scene)?)?;
                outputs.push(path);
                let m = learn_model(&scene)?;
                learned.push_str(&format!("{seed},{},{}\n", m.p0, m.n));
            }
            let path = args.out.join("learned_models.csv");
            fs::write(&path, learned)?;
            outputs.push(path);
            ("model_grid", Vec::new())
        }
    };

    let params =
        serde_json::to_string(&json!({ "kind": name, "points": points, "window": window }))?;
    let mut m = RunManifest::new(
        &format!("sweep {name}"),
        &format!("{}\n{params}", cfg.to_toml()),
    );
    m.seeds = seeds;
    m.outputs = outputs;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hint_parsing() {
        assert_eq!(
            parse_hint("3, 1.5,2").unwrap(),
            GlobalHint {
                frame: 3,
                x: 1.5,
                y: 2.0
            }
        );
        assert!(parse_hint("0,1,2").is_err());
        assert!(parse_hint("1,2").is_err());
        assert!(parse_hint("1,nan,2").is_err());
    }
}
