//! The `rpl` command line.
//!
//! Every command reads optional defaults from a TOML file (`--config`), one
//! table per command; flags override file values. Output goes to `--out`
//! (default `.`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Deserialize;

use crate::dimension::{sweep, theoretical_bounds, DyadicRange};
use crate::error::{Error, Result};
use crate::fractal::{generate_cantor_product, generate_ifs, generate_plane_slice, DiscreteMeasure, IfsSpec};
use crate::geometry::{PlaneHeight, Point3};
use crate::multiplicity::{build_index, default_cell_size, high_multiplicity_scan, ExperimentConfig};
use crate::tangency::{tangency_table, three_circles_probe};
use crate::{io, verify};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rpl", version, about = "Restricted projection experiments")]
pub struct Cli {
    /// TOML file with one table per command.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write an SVG plot where a command supports one.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a discrete measure and write it as CSV plus metadata.
    Generate(GenerateArgs),
    /// Box-counting dimension of the projections over a grid of angles.
    Sweep(SweepArgs),
    /// Mass of the high-multiplicity set over a grid of scales.
    Multiplicity(MultiplicityArgs),
    /// Banded counts of approximately tangent pairs.
    Tangency(TangencyArgs),
    /// Grid search for points near-tangent to three circles.
    Probe3(ProbeArgs),
    /// Lower-bound curves for the projected dimension.
    Bounds(BoundsArgs),
    /// Randomised checks of the projection geometry.
    Verify(VerifyArgs),
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// `cantor`, `plane` or `ifs` (the last only from a config file).
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub sx: Option<f64>,
    #[arg(long)]
    pub sy: Option<f64>,
    #[arg(long)]
    pub sr: Option<f64>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub per_side: Option<u32>,
    #[arg(skip)]
    pub ifs: Option<IfsSpec>,
    /// Output file name inside `--out`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub theta_count: Option<usize>,
    /// Finest scale is `2^-finest`.
    #[arg(long)]
    pub finest: Option<u32>,
    #[arg(long)]
    pub coarsest: Option<u32>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Frostman exponent (default: the measure's nominal dimension).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub theta_samples: Option<usize>,
    /// Also write per-point `h` tables.
    #[arg(long)]
    #[serde(default)]
    pub points: bool,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangencyArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeArgs {
    /// Nine numbers: `x1,x2,r` for each anchor.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub anchors: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsArgs {
    /// A single dimension; without it a grid over [0, 3] is tabulated.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long)]
    pub conjugation_samples: Option<usize>,
    #[arg(long)]
    pub implication_samples: Option<usize>,
    #[arg(long)]
    pub window_pairs: Option<usize>,
    #[arg(long)]
    pub window_resolution: Option<usize>,
    /// Corrupt the projection frame; the run must then fail.
    #[arg(long)]
    #[serde(default)]
    pub inject_fault: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    svg: Option<bool>,
    #[serde(default)]
    generate: GenerateArgs,
    #[serde(default)]
    sweep: SweepArgs,
    #[serde(default)]
    multiplicity: MultiplicityArgs,
    #[serde(default)]
    tangency: TangencyArgs,
    #[serde(default)]
    probe3: ProbeArgs,
    #[serde(default)]
    bounds: BoundsArgs,
    #[serde(default)]
    verify: VerifyArgs,
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// The run completed but an asserted property did not hold.
    Invariant(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

pub fn exit_code(f: &Failure) -> i32 {
    match f {
        Failure::Invariant(_) => EXIT_INVARIANT,
        Failure::Error(Error::InvalidParameter { .. } | Error::Degenerate(_)) => EXIT_VALIDATION,
        Failure::Error(Error::Io(_) | Error::Json(_) | Error::Format { .. }) => EXIT_IO,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Invariant(msg) => eprintln!("rpl: invariant failed: {msg}"),
                Failure::Error(e) => eprintln!("rpl: {e}"),
            }
            exit_code(&f)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::invalid("config", e.to_string()))
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    svg: bool,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        info!("wrote {}", path.display());
        Ok(path)
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let file = load_config(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        svg: cli.svg || file.svg.unwrap_or(false),
    };
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(Error::invalid("threads", "must be positive").into());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a, file.generate),
        Command::Sweep(a) => cmd_sweep(&ctx, a, file.sweep),
        Command::Multiplicity(a) => cmd_multiplicity(&ctx, a, file.multiplicity),
        Command::Tangency(a) => cmd_tangency(&ctx, a, file.tangency),
        Command::Probe3(a) => cmd_probe3(&ctx, a, file.probe3),
        Command::Bounds(a) => cmd_bounds(&ctx, a, file.bounds),
        Command::Verify(a) => cmd_verify(&ctx, a, file.verify),
    })
}

type CmdResult = std::result::Result<(), Failure>;

fn require<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(name, "required (flag or config file)"))
}

fn read_input(path: Option<PathBuf>) -> Result<DiscreteMeasure> {
    let path = require(path, "input")?;
    info!("reading {}", path.display());
    io::read_measure(&path)
}

fn height(t: Option<f64>) -> Result<PlaneHeight> {
    t.map_or(Ok(PlaneHeight::standard()), PlaneHeight::new)
}

fn cmd_generate(ctx: &Ctx, a: GenerateArgs, f: GenerateArgs) -> CmdResult {
    let kind = a.kind.or(f.kind).unwrap_or_else(|| "cantor".into());
    let mu = match kind.as_str() {
        "cantor" => generate_cantor_product(
            a.sx.or(f.sx).unwrap_or(0.5),
            a.sy.or(f.sy).unwrap_or(0.5),
            a.sr.or(f.sr).unwrap_or(0.5),
            a.depth.or(f.depth).unwrap_or(4),
            ctx.seed,
        )?,
        "plane" => generate_plane_slice(a.per_side.or(f.per_side).unwrap_or(256), ctx.seed)?,
        "ifs" => {
            let mut spec = require(f.ifs, "ifs")?;
            if let Some(d) = a.depth {
                spec.depth = d;
            }
            generate_ifs(&spec, ctx.seed)?
        }
        other => {
            return Err(Error::invalid("kind", format!("unknown construction `{other}`")).into())
        }
    };
    let name = a.name.or(f.name).unwrap_or_else(|| "measure.csv".into());
    fs::create_dir_all(&ctx.out)?;
    let path = ctx.out.join(name);
    io::write_measure(&mu, &path)?;
    println!(
        "generated {} atoms, generation scale {:.6e} -> {}",
        mu.len(),
        mu.generation_scale(),
        path.display()
    );
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, a: SweepArgs, f: SweepArgs) -> CmdResult {
    let t = height(a.t.or(f.t))?;
    let range = DyadicRange::new(
        a.finest.or(f.finest).unwrap_or(8),
        a.coarsest.or(f.coarsest).unwrap_or(3),
    )?;
    let theta_count = a.theta_count.or(f.theta_count).unwrap_or(256);
    let mu = read_input(a.input.or(f.input))?;
    let rep = sweep(&mu, t, theta_count, range)?;
    ctx.write("sweep.csv", &io::sweep_csv(&rep))?;
    ctx.write("sweep.json", &io::sweep_json(&rep)?)?;
    if ctx.svg {
        ctx.write("sweep.svg", &io::sweep_svg(&rep))?;
    }
    let p = rep.percentiles;
    println!(
        "t = {:.6}: median dim {:.4} (min {:.4}, p10 {:.4}, max {:.4}); bound new {:.4}, oberlin {:.4}, jjll {:.4}",
        t.value(),
        p.median,
        p.min,
        p.p10,
        p.max,
        rep.bounds.new,
        rep.bounds.oberlin,
        rep.bounds.jjll
    );
    Ok(())
}

fn cmd_multiplicity(ctx: &Ctx, a: MultiplicityArgs, f: MultiplicityArgs) -> CmdResult {
    let t = height(a.t.or(f.t))?;
    let mu = read_input(a.input.or(f.input))?;
    let s = match a.s.or(f.s).or(mu.nominal_dimension()) {
        Some(s) => s,
        None => return Err(Error::invalid("s", "required for measures without a construction record").into()),
    };
    let kappa = a.kappa.or(f.kappa).unwrap_or(0.05);
    let eta = a.eta.or(f.eta).unwrap_or(0.02);
    let deltas = a
        .deltas
        .or(f.deltas)
        .unwrap_or_else(|| vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]);
    let theta_samples = a.theta_samples.or(f.theta_samples);
    let configs: Vec<ExperimentConfig> = deltas
        .iter()
        .map(|&delta| ExperimentConfig { s, kappa, eta, delta, theta_samples })
        .collect();
    for c in &configs {
        c.validate_for(&mu)?;
    }

    let mut summaries = Vec::new();
    let mut table = String::from("delta,theta_samples,z_mass\n");
    for (k, c) in configs.iter().enumerate() {
        info!("scanning delta = {}", c.delta);
        let rep = high_multiplicity_scan(&mu, t, c)?;
        println!(
            "delta = {:.6e}: Z_mass = {:.6} over {} angles (mass threshold {:.4e}, arc threshold {:.4})",
            c.delta, rep.z_mass, rep.theta_samples, rep.mass_threshold, rep.arc_threshold
        );
        table.push_str(&format!("{:.16e},{},{:.16e}\n", c.delta, rep.theta_samples, rep.z_mass));
        if a.points || f.points {
            ctx.write(&format!("multiplicity_points_{k}.csv"), &io::multiplicity_points_csv(&mu, &rep))?;
        }
        summaries.push(io::MultiplicitySummary::from(&rep));
    }
    ctx.write("multiplicity.json", &(serde_json::to_string_pretty(&summaries).map_err(Error::from)? + "\n"))?;
    ctx.write("z_mass.csv", &table)?;
    Ok(())
}

fn cmd_tangency(ctx: &Ctx, a: TangencyArgs, f: TangencyArgs) -> CmdResult {
    let mu = read_input(a.input.or(f.input))?;
    let deltas = a.deltas.or(f.deltas).unwrap_or_else(|| vec![1.0 / 64.0, 1.0 / 128.0]);
    let mut rows = Vec::new();
    let mut broken = Vec::new();
    for &delta in &deltas {
        let index = build_index(&mu, default_cell_size(&mu, delta))?;
        let table = tangency_table(&mu, &index, delta)?;
        let banded: u64 = table.rows.iter().map(|r| r.pair_count).sum();
        let ok = table.partition_holds();
        println!(
            "delta = {:.6e}: {} pairs in bands + {} closer = {} total [{}]",
            delta,
            banded,
            table.below_finest,
            table.total,
            if ok { "partition ok" } else { "PARTITION BROKEN" }
        );
        if !ok {
            broken.push(delta);
        }
        rows.extend(table.rows);
    }
    ctx.write("tangency.csv", &io::tangency_csv(&rows))?;
    if broken.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("band partition fails at delta {broken:?}")))
    }
}

fn cmd_probe3(ctx: &Ctx, a: ProbeArgs, f: ProbeArgs) -> CmdResult {
    let raw = a
        .anchors
        .or(f.anchors)
        .unwrap_or_else(|| vec![0.125, 0.0, 0.75, -0.125, 0.0, 0.75, 0.0, 0.125, 0.75]);
    if raw.len() != 9 {
        return Err(Error::invalid("anchors", format!("need 9 numbers, got {}", raw.len())).into());
    }
    let anchors = [
        Point3::new(raw[0], raw[1], raw[2])?,
        Point3::new(raw[3], raw[4], raw[5])?,
        Point3::new(raw[6], raw[7], raw[8])?,
    ];
    let delta = a.delta.or(f.delta).unwrap_or(1.0 / 128.0);
    let tau = a.tau.or(f.tau).unwrap_or(0.125);
    let eta = a.eta.or(f.eta).unwrap_or(0.1);
    let step = a.grid_step.or(f.grid_step).unwrap_or(delta / 4.0);
    let probe = three_circles_probe(anchors, delta, tau, eta, step)?;
    ctx.write("probe3.json", &io::probe_json(&probe)?)?;
    println!(
        "{} grid hits covered by {} balls of diameter {:.4e}",
        probe.hit_count,
        probe.solution_cells.len(),
        probe.solution_cells.first().map_or(0.0, |b| b.diameter)
    );
    if !probe.is_sound() {
        return Err(Failure::Invariant("a grid hit lies outside the cover".into()));
    }
    Ok(())
}

fn cmd_bounds(ctx: &Ctx, a: BoundsArgs, f: BoundsArgs) -> CmdResult {
    if let Some(s) = a.s.or(f.s) {
        let b = theoretical_bounds(s)?;
        println!("{}", serde_json::to_string_pretty(&b).map_err(Error::from)?);
        return Ok(());
    }
    let n = a.grid.or(f.grid).unwrap_or(301);
    if n < 2 {
        return Err(Error::invalid("grid", "need at least 2 points").into());
    }
    let mut s = String::from("s,new,oberlin,jjll,oberlin_extended\n");
    for k in 0..n {
        let x = 3.0 * k as f64 / (n - 1) as f64;
        let b = theoretical_bounds(x)?;
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            x, b.new, b.oberlin, b.jjll, b.oberlin_extended
        ));
    }
    ctx.write("bounds.csv", &s)?;
    println!("tabulated {n} points on [0, 3]");
    Ok(())
}

fn cmd_verify(ctx: &Ctx, a: VerifyArgs, f: VerifyArgs) -> CmdResult {
    let d = verify::VerifyOptions::default();
    let opts = verify::VerifyOptions {
        seed: ctx.seed,
        conjugation_samples: a.conjugation_samples.or(f.conjugation_samples).unwrap_or(d.conjugation_samples),
        implication_samples: a.implication_samples.or(f.implication_samples).unwrap_or(d.implication_samples),
        window_pairs: a.window_pairs.or(f.window_pairs).unwrap_or(d.window_pairs),
        window_resolution: a.window_resolution.or(f.window_resolution).unwrap_or(d.window_resolution),
        inject_fault: a.inject_fault || f.inject_fault,
    };
    let rep = verify::run(&opts)?;
    for c in &rep.checks {
        println!(
            "[{}] {:<24} value {:.6e} (limit {:.1e}) {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.limit,
            c.detail
        );
    }
    println!("calibrated window constant C = {:.4}", rep.window_constant);
    ctx.write("verify.json", &(serde_json::to_string_pretty(&rep).map_err(Error::from)? + "\n"))?;
    if rep.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Invariant(failed.join(", ")))
    }
}
