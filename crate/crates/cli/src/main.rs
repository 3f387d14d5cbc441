//! Command-line driver for the island energy toolkit.
//!
//! Subcommands: `solve` (one minimization), `sweep` (volume sweep with
//! scaling fits), `corrector` (half-strip constant C_W), `limit`
//! (closed-form limit shapes), `verify` (invariant suite).
//!
//! Configuration comes from an optional JSON file (`--config`) overridden
//! by flags; every run writes a manifest embedding the resolved
//! configuration next to its outputs. Exit codes: 0 success, 1 usage or
//! configuration error, 2 non-convergence / failed checks.

mod verify;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use islands::elastic::{corrector_cw, MeshControl};
use islands::limits::{limit_minimizer, LimitShapeKind};
use islands::optimizer::{default_window_width, kind_name, minimize, FlowConfig, VolumeMode};
use islands::profile::{Grid1D, SurfaceEnergyKind};
use islands::scaling::{concavity_gap, maxheight_law, sweep};
use islands::svg::{line_chart, Series};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "islands", version, about = "Epitaxial island energy minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy at one volume and write the result artifacts.
    Solve(SolveArgs),
    /// Sweep a volume list, fit the scaling law, bracket the wetting
    /// threshold.
    Sweep(SweepArgs),
    /// Estimate the half-strip corrector constant C_W.
    Corrector(CorrectorArgs),
    /// Closed-form limit shape for a corrector constant.
    Limit(LimitArgs),
    /// Run the invariant suite and print pass/fail per check.
    Verify(verify::VerifyArgs),
}

#[derive(Args, Clone, Default, Serialize, Deserialize)]
pub struct CommonOpts {
    /// Surface energy kind: small-slope | large-slope | exact.
    #[arg(long, global = true)]
    kind: Option<String>,
    /// Window width (defaults to the volume-adapted width).
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Profile grid cells.
    #[arg(long, global = true)]
    cells: Option<usize>,
    /// Mesh layers on the tallest column.
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// Relative Euler–Lagrange residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Random restarts beyond the deterministic shape set.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the exact volume penalty μ|∫h − V| instead of projection.
    #[arg(long, global = true)]
    penalty_mu: Option<f64>,
    /// JSON config file; flags override its entries.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Film volume.
    #[arg(long)]
    volume: Option<f64>,
    /// Also write an SVG of the minimizing profile.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated volume list, e.g. 1e2,1e3,1e4.
    #[arg(long)]
    volumes: Option<String>,
    /// Shorthand: logarithmic sweep `start:end:count`.
    #[arg(long)]
    logspace: Option<String>,
}

#[derive(Args, Serialize)]
struct CorrectorArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated strip truncation heights.
    #[arg(long, default_value = "1,2,3")]
    truncations: String,
    /// Strip cells in x.
    #[arg(long, default_value_t = 256)]
    nx: usize,
}

#[derive(Args, Serialize)]
struct LimitArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Corrector constant; computed from a default corrector run when
    /// omitted.
    #[arg(long)]
    cw: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap's help/version exits are successes
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Corrector(a) => run_corrector(a),
        Command::Limit(a) => run_limit(a),
        Command::Verify(a) => verify::run(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Resolved run configuration: config file values overridden by flags.
#[derive(Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub kind: String,
    pub window: Option<f64>,
    pub cells: usize,
    pub layers: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub penalty_mu: Option<f64>,
}

pub fn resolve_common(command: &str, opts: &CommonOpts) -> anyhow::Result<(RunConfig, FlowConfig)> {
    let mut merged = opts.clone();
    if let Some(path) = &opts.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: CommonOpts =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // flags win over file entries
        merged = CommonOpts {
            kind: merged.kind.or(file.kind),
            window: merged.window.or(file.window),
            cells: merged.cells.or(file.cells),
            layers: merged.layers.or(file.layers),
            tol: merged.tol.or(file.tol),
            max_iters: merged.max_iters.or(file.max_iters),
            restarts: merged.restarts.or(file.restarts),
            seed: merged.seed.or(file.seed),
            jobs: merged.jobs.or(file.jobs),
            out: merged.out.or(file.out),
            penalty_mu: merged.penalty_mu.or(file.penalty_mu),
            config: merged.config,
        };
    }
    let kind = parse_kind(merged.kind.as_deref().unwrap_or("small-slope"))?;
    let mut flow = FlowConfig::new(kind);
    if let Some(c) = merged.cells {
        flow.profile_cells = c;
    }
    if let Some(l) = merged.layers {
        flow.mesh.max_layers = l;
    }
    if let Some(t) = merged.tol {
        flow.tol_residual = t;
    }
    if let Some(m) = merged.max_iters {
        flow.max_iters = m;
    }
    if let Some(r) = merged.restarts {
        flow.restarts = r;
    }
    if let Some(s) = merged.seed {
        flow.seed = s;
    }
    if let Some(mu) = merged.penalty_mu {
        flow.volume_mode = VolumeMode::Penalty { mu };
    }
    flow.validate().map_err(|e| anyhow!("{e}"))?;

    let jobs = merged.jobs.unwrap_or(0);
    if jobs > 0 {
        // ignore failure when a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let run = RunConfig {
        command: command.to_string(),
        kind: kind_name(kind).to_string(),
        window: merged.window,
        cells: flow.profile_cells,
        layers: flow.mesh.max_layers,
        tol: flow.tol_residual,
        max_iters: flow.max_iters,
        restarts: flow.restarts,
        seed: flow.seed,
        jobs,
        out: merged.out.unwrap_or_else(|| PathBuf::from("out")),
        penalty_mu: merged.penalty_mu,
    };
    Ok((run, flow))
}

fn parse_kind(s: &str) -> anyhow::Result<SurfaceEnergyKind> {
    match s {
        "small-slope" => Ok(SurfaceEnergyKind::SmallSlope),
        "large-slope" => Ok(SurfaceEnergyKind::large_slope()),
        "exact" => Ok(SurfaceEnergyKind::Exact),
        other => Err(anyhow!("unknown surface energy kind '{other}' (small-slope | large-slope | exact)")),
    }
}

pub fn write_manifest(run: &RunConfig, extra: serde_json::Value) -> anyhow::Result<()> {
    fs::create_dir_all(&run.out)?;
    let manifest = serde_json::json!({ "config": run, "run": extra });
    fs::write(run.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn window_for(run: &RunConfig, flow: &FlowConfig, v: f64) -> anyhow::Result<Grid1D> {
    let width = run.window.unwrap_or_else(|| default_window_width(flow.kind, v));
    Grid1D::symmetric(0.5 * width, flow.profile_cells).map_err(|e| anyhow!("{e}"))
}

fn run_solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let (run, flow) = resolve_common("solve", &args.common)?;
    let v = args.volume.ok_or_else(|| anyhow!("solve needs --volume"))?;
    if !(v > 0.0) {
        return Err(anyhow!("volume must be positive, got {v}"));
    }
    let window = window_for(&run, &flow, v)?;
    let res = minimize(v, &flow, window).map_err(|e| anyhow!("{e}"))?;

    fs::create_dir_all(&run.out)?;
    fs::write(
        run.out.join("result.json"),
        serde_json::to_string_pretty(&res.to_json(flow.kind))?,
    )?;
    let mut csv = Vec::new();
    res.profile.write_csv(&mut csv).map_err(|e| anyhow!("{e}"))?;
    fs::write(run.out.join("profile.csv"), csv)?;
    if args.svg {
        let pts: Vec<(f64, f64)> = res
            .profile
            .heights()
            .iter()
            .enumerate()
            .map(|(i, h)| (res.profile.grid().node_x(i), *h))
            .collect();
        let chart = line_chart(
            &format!("minimizer at V = {v}"),
            "x",
            "h",
            &[Series { label: "h(x)", points: pts, color: "steelblue", markers: false }],
        );
        fs::write(run.out.join("profile.svg"), chart)?;
    }
    write_manifest(&run, serde_json::json!({ "volume": v, "converged": res.converged }))?;

    let b = &res.breakdown;
    println!(
        "V={v} total={:.6} beta={:.4} lambda={:.4} el_residual={:.4} support={:.3} converged={}",
        b.total, b.beta, res.lambda, res.el_residual, res.support_length, res.converged
    );
    if res.is_wetting() {
        println!("wetting: support saturates the window and beta stays at 1");
    }
    Ok(if res.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn parse_volumes(args: &SweepArgs) -> anyhow::Result<Vec<f64>> {
    if let Some(spec) = &args.logspace {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(anyhow!("--logspace expects start:end:count"));
        }
        let a: f64 = parts[0].parse()?;
        let b: f64 = parts[1].parse()?;
        let n: usize = parts[2].parse()?;
        if !(a > 0.0) || !(b > a) || n < 2 {
            return Err(anyhow!("--logspace needs 0 < start < end and count >= 2"));
        }
        let (la, lb) = (a.ln(), b.ln());
        return Ok((0..n)
            .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
            .collect());
    }
    let list = args
        .volumes
        .as_deref()
        .ok_or_else(|| anyhow!("sweep needs --volumes or --logspace"))?;
    let vols: Vec<f64> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad volume '{s}': {e}")))
        .collect::<anyhow::Result<_>>()?;
    if vols.is_empty() {
        return Err(anyhow!("empty volume list"));
    }
    Ok(vols)
}

fn run_sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let (run, flow) = resolve_common("sweep", &args.common)?;
    let volumes = parse_volumes(&args)?;
    let result = sweep(flow.kind, &volumes, &flow).map_err(|e| anyhow!("{e}"))?;

    fs::create_dir_all(&run.out)?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv).map_err(|e| anyhow!("{e}"))?;
    fs::write(run.out.join("sweep.csv"), csv)?;
    fs::write(
        run.out.join("fit.json"),
        serde_json::to_string_pretty(&result.fit_summary())?,
    )?;

    // log-log plot with the fitted line
    let pts: Vec<(f64, f64)> = result
        .points
        .iter()
        .map(|p| (p.volume.log10(), p.result.breakdown.total.log10()))
        .collect();
    let mut series = vec![Series {
        label: "log10 total",
        points: pts.clone(),
        color: "steelblue",
        markers: true,
    }];
    let fitted_line;
    if let Some(expo) = result.fitted_exponent {
        let (x0, y0) = *pts.last().unwrap();
        fitted_line = format!("fit slope {expo:.3}");
        series.push(Series {
            label: &fitted_line,
            points: pts.iter().map(|(x, _)| (*x, y0 + expo * (x - x0))).collect(),
            color: "firebrick",
            markers: false,
        });
    }
    fs::write(
        run.out.join("sweep.svg"),
        line_chart("energy scaling", "log10 V", "log10 F", &series),
    )?;

    write_manifest(
        &run,
        serde_json::json!({
            "volumes": volumes,
            "fitted_exponent": result.fitted_exponent,
            "maxheight_exponent": maxheight_law(&result),
            "concavity_gap": concavity_gap(&result),
        }),
    )?;

    println!(
        "sweep over {} volumes: exponent {:?}, maxh exponent {:?}, vbar {:?}",
        volumes.len(),
        result.fitted_exponent,
        maxheight_law(&result),
        result.vbar_estimate.map(|b| (b.last_wetting, b.first_island)),
    );
    let all_converged = result.points.iter().all(|p| p.result.converged);
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_corrector(args: CorrectorArgs) -> anyhow::Result<ExitCode> {
    let (run, flow) = resolve_common("corrector", &args.common)?;
    let truncations: Vec<f64> = args
        .truncations
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad truncation '{s}': {e}")))
        .collect::<anyhow::Result<_>>()?;
    let mut ctl = MeshControl { max_layers: flow.mesh.max_layers.max(192), ..flow.mesh };
    ctl.max_columns = 0;
    let res = corrector_cw(&truncations, args.nx, &ctl).map_err(|e| anyhow!("{e}"))?;

    fs::create_dir_all(&run.out)?;
    fs::write(run.out.join("corrector.json"), serde_json::to_string_pretty(&res)?)?;
    write_manifest(&run, serde_json::json!({ "truncations": truncations, "nx": args.nx }))?;
    println!(
        "C_W = {:.6} (error estimate {:.2e}) from truncations {:?}",
        res.extrapolated, res.error_estimate, res.truncation_heights
    );
    Ok(ExitCode::SUCCESS)
}

fn run_limit(args: LimitArgs) -> anyhow::Result<ExitCode> {
    let (run, flow) = resolve_common("limit", &args.common)?;
    let cw = match args.cw {
        Some(c) => c,
        None => {
            let ctl = MeshControl { max_layers: 192, max_columns: 0, ..MeshControl::default() };
            corrector_cw(&[1.0, 2.0, 3.0], 192, &ctl)
                .map_err(|e| anyhow!("{e}"))?
                .extrapolated
        }
    };
    let kind = match flow.kind {
        SurfaceEnergyKind::LargeSlope { .. } => LimitShapeKind::Rectangle,
        _ => LimitShapeKind::Parabola,
    };
    let shape = limit_minimizer(kind, cw).map_err(|e| anyhow!("{e}"))?;
    fs::create_dir_all(&run.out)?;
    fs::write(run.out.join("limit_shape.json"), serde_json::to_string_pretty(&shape.to_json())?)?;
    let grid = Grid1D::symmetric(shape.length.max(1.0) * 1.5, flow.profile_cells)
        .map_err(|e| anyhow!("{e}"))?;
    let mut csv = Vec::new();
    shape.sample(grid).write_csv(&mut csv).map_err(|e| anyhow!("{e}"))?;
    fs::write(run.out.join("limit_profile.csv"), csv)?;
    write_manifest(&run, serde_json::json!({ "C_W": cw }))?;
    println!(
        "{} limit shape: length {:.4}, energy {:.4} at C_W = {:.6}",
        run.kind, shape.length, shape.energy, cw
    );
    Ok(ExitCode::SUCCESS)
}

