use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hemoflow::io::{
    decode_ages, decode_flow, decode_pbm, decode_pgm, encode_ages, encode_flow, encode_pbm, encode_pgm,
    encode_posterior, encode_ppm, encode_trajectory, read_file, write_file,
};
use hemoflow::pipeline::{evaluate, metrics_csv, resolve_scenes, run_scene, Detector, Quartiles, RunOptions};
use hemoflow::sim::simulate;
use hemoflow::{
    clearance_reward, gate_and_emit, plan, scene_by_name, select_endpoints, update_age, AgeCountMap, BloodMask,
    Error, FlowEstimatorKind, Frame, PipelineConfig, PixelTrajectory,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "hemoflow", version, about = "Flowing-liquid detection and suction planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a builtin scene to frames, truth masks and truth flow.
    Simulate {
        scene: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 61)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Detect and track liquid in a directory of frames.
    Detect {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "gt")]
        estimator: FlowEstimatorKind,
        /// Output directory (defaults to the frames directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_posterior: bool,
        #[arg(long)]
        dump_mask: bool,
    },
    /// Plan a suction path over a region mask and its age map.
    Plan {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        ages: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect, plan and execute suction on a builtin scene.
    Run {
        scene: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "gt")]
        estimator: FlowEstimatorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 61)]
        max_frames: usize,
        /// Controller tick budget.
        #[arg(long, default_value_t = 10_000)]
        max_ticks: usize,
    },
    /// Per-frame metrics over a set of scenes.
    Eval {
        #[arg(long)]
        scenes: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "gt")]
        estimator: FlowEstimatorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownScene(_) => Failure::Usage(e.to_string()),
            Error::BudgetExceeded(_) => Failure::Budget(e.to_string()),
            other => Failure::Data(other),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn frame_name(kind: &str, t: usize, ext: &str) -> String {
    format!("{kind}_{t:04}.{ext}")
}

fn simulate_cmd(scene: &str, out: &Path, frames: usize, seed: u64) -> CmdResult {
    let scene = scene_by_name(scene, seed)?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let d = scene.dims();
    let manifest = format!("scene={}\nframes={frames}\nwidth={}\nheight={}\n", scene.name, d.width, d.height);
    write_file(&out.join("manifest.txt"), manifest.as_bytes())?;
    for (t, o) in simulate(&scene, frames)?.iter().enumerate() {
        write_file(&out.join(frame_name("frame", t, "pgm")), &encode_pgm(&o.frame))?;
        write_file(&out.join(frame_name("truth", t, "pbm")), &encode_pbm(&o.truth_mask))?;
        write_file(&out.join(frame_name("flow", t, "raw")), &encode_flow(&o.truth_flow))?;
    }
    println!("{}: {} frames written to {}", scene.name, frames, out.display());
    Ok(())
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".pgm"))
        })
        .collect();
    frames.sort();
    Ok(frames)
}

fn overlay(frame: &Frame, region: &BloodMask) -> Vec<[u8; 3]> {
    let up = region.resample_nearest(frame.dims());
    frame
        .pixels()
        .iter()
        .zip(up.bits())
        .map(|(&v, &b)| {
            let g = (v * 255.0).round() as u8;
            if b {
                [255, g / 2, g / 2]
            } else {
                [g, g, g]
            }
        })
        .collect()
}

fn detect_cmd(
    frames_dir: &Path,
    config: &Path,
    kind: FlowEstimatorKind,
    out: Option<&Path>,
    dump_posterior: bool,
    dump_mask: bool,
) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let out = out.unwrap_or(frames_dir);
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let paths = list_frames(frames_dir)?;
    if paths.is_empty() {
        return Err(Failure::Data(Error::Format(format!("no frame_*.pgm in {}", frames_dir.display()))));
    }

    let mut detector: Option<Detector> = None;
    let mut ages: Option<AgeCountMap> = None;
    let mut last_region = None;
    let mut trace = Vec::new();
    for (t, path) in paths.iter().enumerate() {
        let frame = decode_pgm(&read_file(path)?, t)?;
        let det = match &mut detector {
            Some(d) => d,
            None => detector.insert(Detector::new(frame.dims(), &cfg, kind, hemoflow::flow::DEFAULT_FLOW_FRAMES)?),
        };
        let truth = match kind {
            FlowEstimatorKind::GroundTruth => {
                let flow_path = path.with_file_name(frame_name("flow", t, "raw"));
                Some(decode_flow(&read_file(&flow_path)?)?)
            }
            FlowEstimatorKind::Classical => None,
        };
        let flow_dims = det.flow_dims();
        let Some(d) = det.process(frame.clone(), truth, &mut trace)? else {
            println!("frame {t}: buffering");
            continue;
        };
        let region = d.region.clone().unwrap_or_else(|| BloodMask::empty(flow_dims));
        let counts = ages.get_or_insert_with(|| AgeCountMap::zeros(flow_dims));
        if d.region.is_some() {
            *counts = update_age(counts, &region)?;
            last_region = Some(region.clone());
        }
        println!("frame {t}: detections={} region={}", d.detections.count(), region.count());
        write_file(&out.join(frame_name("detect", t, "pbm")), &encode_pbm(d.detections.as_mask()))?;
        write_file(&out.join(frame_name("estflow", t, "raw")), &encode_flow(&d.flow))?;
        if dump_posterior {
            write_file(&out.join(frame_name("posterior", t, "raw")), &encode_posterior(&d.posterior))?;
        }
        if dump_mask {
            write_file(&out.join(frame_name("mask", t, "pbm")), &encode_pbm(&region))?;
            let rgb = overlay(&frame, &region);
            write_file(&out.join(frame_name("overlay", t, "ppm")), &encode_ppm(frame.dims(), &rgb)?)?;
        }
    }
    if let (Some(region), Some(counts)) = (last_region, ages) {
        write_file(&out.join("region.pbm"), &encode_pbm(&region))?;
        write_file(&out.join("ages.raw"), &encode_ages(&counts))?;
        println!("region of {} pixels written to {}", region.count(), out.display());
    } else {
        println!("no region extracted");
    }
    Ok(())
}

/// Mask in red, path in white, everything else black.
fn path_overlay(mask: &BloodMask, traj: &PixelTrajectory) -> Vec<[u8; 3]> {
    let mut rgb: Vec<[u8; 3]> = mask.bits().iter().map(|&b| if b { [160, 20, 20] } else { [0, 0, 0] }).collect();
    for p in &traj.waypoints {
        rgb[mask.dims().index(*p)] = [255, 255, 255];
    }
    rgb
}

fn plan_cmd(mask: &Path, ages: &Path, config: &Path, out: &Path) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let mask = decode_pbm(&read_file(mask)?)?;
    let ages = decode_ages(&read_file(ages)?)?;
    let (start, end) = select_endpoints(&ages, &mask)?;
    let reward = clearance_reward(&mask, cfg.r, cfg.gamma_r);
    let path = plan(start, end, &mask, &reward, cfg.connectivity)?;
    let len = path.len();
    match gate_and_emit(path, cfg.gamma_t) {
        Some(traj) => {
            write_file(out, encode_trajectory(&traj).as_bytes())?;
            write_file(&out.with_extension("ppm"), &encode_ppm(mask.dims(), &path_overlay(&mask, &traj))?)?;
            println!("trajectory of {len} waypoints written to {}", out.display());
        }
        None => println!("trajectory of {len} waypoints rejected (needs more than {})", cfg.gamma_t),
    }
    Ok(())
}

fn run_cmd(
    scene: &str,
    config: &Path,
    report: &Path,
    kind: FlowEstimatorKind,
    seed: u64,
    max_frames: usize,
    max_ticks: usize,
) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let scene = scene_by_name(scene, seed)?;
    let mut opts = RunOptions {
        max_frames,
        ..Default::default()
    };
    opts.controller.max_ticks = max_ticks;
    let run = run_scene(&scene, &cfg, kind, &opts)?;
    write_file(report, run.report_text().as_bytes())?;
    println!("{}", run.summary_line());
    if let Some(e) = run.execution.as_ref().filter(|e| e.aborted) {
        return Err(Failure::Budget(format!("tick budget exhausted after {} ticks", e.ticks_used())));
    }
    Ok(())
}

fn eval_cmd(scenes: &str, config: &Path, csv: &Path, kind: FlowEstimatorKind, seed: u64) -> CmdResult {
    let cfg = PipelineConfig::load(config)?;
    let names = resolve_scenes(scenes)?;
    let opts = RunOptions::default();
    let records = evaluate(&names, seed, &cfg, kind, &opts)?;
    write_file(csv, metrics_csv(&records).as_bytes())?;
    for name in &names {
        let (f, r): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter(|m| &m.scene == name && m.frame >= opts.warmup)
            .map(|m| (m.iou_filtered, m.iou_raw))
            .unzip();
        if let (Some(f), Some(r)) = (Quartiles::of(&f), Quartiles::of(&r)) {
            println!("{name}: median iou filtered={:.3} raw={:.3}", f.median, r.median);
        }
    }
    Ok(())
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Simulate { scene, out, frames, seed } => simulate_cmd(&scene, &out, frames, seed),
        Command::Detect {
            frames,
            config,
            estimator,
            out,
            dump_posterior,
            dump_mask,
        } => detect_cmd(&frames, &config, estimator, out.as_deref(), dump_posterior, dump_mask),
        Command::Plan { mask, ages, config, out } => plan_cmd(&mask, &ages, &config, &out),
        Command::Run {
            scene,
            config,
            report,
            estimator,
            seed,
            max_frames,
            max_ticks,
        } => run_cmd(&scene, &config, &report, estimator, seed, max_frames, max_ticks),
        Command::Eval {
            scenes,
            config,
            csv,
            estimator,
            seed,
        } => eval_cmd(&scenes, &config, &csv, estimator, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BUDGET)
        }
    }
}
