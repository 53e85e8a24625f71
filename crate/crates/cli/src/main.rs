use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ais_core::engagement::{balloon_approach, sizing_table, SizingMode, SizingScenario, REPORTED_TAIL_CHASE_REQ};
use ais_core::mission::{
    run_avoid, run_fence, run_grab, run_pop, run_track, write_csv, Mission, ScenarioConfig, TraceRow,
};

#[derive(Parser)]
#[command(name = "ais", version, about = "Ball-grabbing and balloon-popping UAV team simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full multi-UAV mission and write telemetry, logs and a summary.
    Mission(RunArgs),
    /// Run one behaviour in isolation and write its trace.
    Scenario {
        kind: ScenarioKind,
        #[command(flatten)]
        run: RunArgs,
        /// Lateral offset between the two tracks (avoid).
        #[arg(long, default_value_t = 0.0)]
        offset_m: f64,
        /// Disable sensor noise (grab).
        #[arg(long)]
        noiseless: bool,
    },
    /// Print the gripper sizing table.
    Size(SizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; the built-in nominal scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Track,
    Grab,
    Pop,
    Avoid,
    Fence,
}

#[derive(Args)]
struct SizeArgs {
    /// Head-on grab: initial range, m.
    #[arg(long, default_value_t = 0.5)]
    r0_m: f64,
    /// Head-on grab: radial closing speed, m/s.
    #[arg(long, default_value_t = 9.96)]
    v_r_mps: f64,
    /// Head-on grab: in-plane transverse speed, m/s.
    #[arg(long, default_value_t = 0.69)]
    v_theta_mps: f64,
    /// Head-on grab: out-of-plane transverse speed, m/s.
    #[arg(long, default_value_t = 0.0)]
    v_phi_mps: f64,
    #[arg(long, default_value_t = 100.0)]
    ball_radius_mm: f64,
    /// Tail-chase equivalent radius, taken as given.
    #[arg(long, default_value_t = REPORTED_TAIL_CHASE_REQ * 1000.0)]
    tail_chase_req_mm: f64,
    #[arg(long, default_value_t = 0.5)]
    balloon_r0_m: f64,
    #[arg(long, default_value_t = 2.0)]
    balloon_speed_mps: f64,
    /// Approach direction off the line of sight.
    #[arg(long, default_value_t = 25.0)]
    balloon_angle_deg: f64,
    #[arg(long, default_value_t = 150.0)]
    balloon_radius_mm: f64,
}

fn config(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::nominal(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = args.duration_s {
        if !(d >= 0.0) {
            bail!("--duration-s must be non-negative, got {d}");
        }
        cfg.duration_s = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn write_trace(dir: &Path, name: &str, rows: &[TraceRow]) -> Result<()> {
    let path = dir.join(format!("{name}_trace.csv"));
    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(f, rows)?;
    Ok(())
}

fn mission(args: &RunArgs) -> Result<()> {
    let cfg = config(args)?;
    let mut m = Mission::new(cfg)?;
    m.run();
    let s = m.write_outputs(&args.out)?;
    println!(
        "{}: t = {:.1} s, grab {} ({}), balloons {}/{}, min separation {:.2} m, fence breaches {}, runtime {:.2} s",
        s.name,
        s.sim_time_s,
        s.grab_success,
        s.grabbed_by.as_deref().unwrap_or("-"),
        s.balloons_popped,
        s.balloons_total,
        s.min_separation_m,
        s.fence_breaches,
        s.runtime_s
    );
    Ok(())
}

fn scenario(kind: ScenarioKind, args: &RunArgs, offset_m: f64, noiseless: bool) -> Result<()> {
    let mut cfg = config(args)?;
    let out = &args.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match kind {
        ScenarioKind::Track => {
            if let Some(d) = args.duration_s {
                cfg.track.duration_s = d;
            }
            let r = run_track(&cfg)?;
            write_trace(out, "track", &r.trace)?;
            write_json(&out.join("track.json"), &r)?;
            println!(
                "track: {:.1}% in distance band, {:.1}% in yaw band, mean error {:.2} m",
                100.0 * r.in_band_fraction,
                100.0 * r.yaw_fraction,
                r.mean_abs_error_m
            );
        }
        ScenarioKind::Grab => {
            if let Some(d) = args.duration_s {
                cfg.grab.timeout_s = d;
            }
            let r = run_grab(&cfg, cfg.seed, !noiseless)?;
            write_trace(out, "grab", &r.trace)?;
            write_json(&out.join("grab.json"), &r)?;
            match r.time_s {
                Some(t) => println!("grab: success at {t:.2} s"),
                None => println!("grab: failed, closest {:.2} m", r.min_distance_m),
            }
        }
        ScenarioKind::Pop => {
            let s = run_pop(&cfg)?;
            write_json(&out.join("pop.json"), &s)?;
            println!("pop: {}/{} balloons by {:.1} s", s.balloons_popped, s.balloons_total, s.sim_time_s);
        }
        ScenarioKind::Avoid => {
            if let Some(d) = args.duration_s {
                cfg.avoid.duration_s = d;
            }
            let r = run_avoid(&cfg, offset_m)?;
            write_trace(out, "avoid", &r.trace)?;
            write_json(&out.join("avoid.json"), &r)?;
            println!("avoid: offset {:.2} m, min distance {:.2} m", r.lateral_offset_m, r.min_distance_m);
        }
        ScenarioKind::Fence => {
            if let Some(d) = args.duration_s {
                cfg.fence.duration_s = d;
            }
            let r = run_fence(&cfg)?;
            write_trace(out, "fence", &r.trace)?;
            write_json(&out.join("fence.json"), &r)?;
            println!("fence: {} breaches, min clearance {:.2} m", r.breaches, r.min_clearance_m);
        }
    }
    Ok(())
}

fn size(a: &SizeArgs) -> Result<()> {
    let started = Instant::now();
    let head_on = SizingScenario {
        r0: a.r0_m,
        v_r0: a.v_r_mps,
        v_theta0: a.v_theta_mps,
        v_phi0: a.v_phi_mps,
        object_radius: a.ball_radius_mm / 1000.0,
        mode: SizingMode::Grab,
    };
    let balloon = balloon_approach(
        a.balloon_r0_m,
        a.balloon_speed_mps,
        a.balloon_angle_deg.to_radians(),
        a.balloon_radius_mm / 1000.0,
    );
    let rows = sizing_table(&head_on, a.tail_chase_req_mm / 1000.0, a.ball_radius_mm / 1000.0, &balloon)?;
    let mm = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
    println!("{:<16} {:>10} {:>12} {:>10}  note", "case", "R_eq mm", "gripper mm", "design mm");
    for r in &rows {
        println!("{:<16} {:>10.1} {:>12} {:>10}  {}", r.case, r.r_eq_mm, mm(r.gripper_mm), mm(r.design_mm), r.note);
    }
    log::debug!("sizing took {:?}", started.elapsed());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AIS_LOG", "warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Mission(args) => mission(args),
        Command::Scenario { kind, run, offset_m, noiseless } => scenario(*kind, run, *offset_m, *noiseless),
        Command::Size(a) => size(a),
    }
}
