//! The `fourier-head` subcommands.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fourier_head::csv::{self, CoefficientRow};
use fourier_head::{
    evaluate_waveforms, load_params, save_params, train_with_progress, Checkpoint, FrequencySet, GridConvention,
    InputEncoding, ModelParams, SampleGrid, TrainConfig, TrainReport, Waveform,
};

use crate::error::{CliError, Result};
use crate::manifest::{self, Manifest};
use crate::svg::{self, Series};

pub const THREADS_ENV: &str = "FOURIER_HEAD_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fourier-head",
    version,
    about = "Train and inspect neural waveforms through their Fourier coefficients"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the identity-coefficient task and write a run directory.
    Train(TrainArgs),
    /// Print Fourier coefficients of one input's waveform from a checkpoint.
    Eval(EvalArgs),
    /// Render SVG plots from a run directory.
    Plot(PlotArgs),
    /// Write sampled waveforms from a checkpoint as CSV.
    ExportWaveforms(ExportArgs),
    /// Check every file listed in a directory's manifest.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` config file; unlisted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub grid_convention: Option<GridConvention>,
    /// Do not report progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

/// Grid overrides for commands that read a checkpoint.
#[derive(Debug, Args)]
pub struct GridArgs {
    /// Sample count; defaults to the checkpoint's grid.
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub grid_convention: Option<GridConvention>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub x: usize,
    /// Comma-separated frequencies and inclusive ranges, e.g. `0,3,16-40`.
    #[arg(long, default_value = "0-15")]
    pub omegas: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated inputs and inclusive ranges.
    #[arg(long, default_value = "0-4")]
    pub x: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot(a),
        Command::ExportWaveforms(a) => export_waveforms(a),
        Command::Verify(a) => {
            let m = manifest::verify_dir(&a.dir)?;
            println!("{}: {} files ok", a.dir.display(), m.files.len());
            Ok(())
        }
    }
}

/// Threads for waveform evaluation: `FOURIER_HEAD_THREADS` or the number of
/// available CPUs.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `0,3,16-40` into a sorted, deduplicated list.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse index list `{text}`"));
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out.into_iter().collect())
}

pub fn waveform_file_name(x: usize) -> String {
    format!("waveform_x{x}.csv")
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn load_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::parse_overrides(&read_text(path)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(n) = args.grid_n {
        cfg.grid_n = n;
    }
    if let Some(c) = args.grid_convention {
        cfg.grid_convention = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn one_hot_inputs(xs: &[usize], n_inputs: usize) -> Result<Vec<InputEncoding>> {
    Ok(xs
        .iter()
        .map(|&x| InputEncoding::one_hot(x, n_inputs))
        .collect::<fourier_head::Result<_>>()?)
}

fn write_waveforms(
    manifest: &mut Manifest,
    dir: &Path,
    params: &ModelParams,
    xs: &[usize],
    grid: &SampleGrid,
) -> Result<Vec<Waveform>> {
    let inputs = one_hot_inputs(xs, params.encoding_dim())?;
    let waveforms = evaluate_waveforms(params, &inputs, grid, thread_count()?)?;
    for (&x, wf) in xs.iter().zip(&waveforms) {
        manifest.write_file(dir, &waveform_file_name(x), csv::write_waveform(wf.points()).as_bytes())?;
    }
    Ok(waveforms)
}

fn coefficient_rows(report: &TrainReport) -> Vec<CoefficientRow> {
    let mut rows = Vec::new();
    for (x, (a_row, b_row)) in report.a.iter().zip(&report.b).enumerate() {
        for (omega, (&a, &b)) in a_row.iter().zip(b_row).enumerate() {
            rows.push(CoefficientRow { x, omega, a, b });
        }
    }
    rows
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    let every = (cfg.steps / 20).max(1);
    let quiet = args.quiet;
    let total = cfg.steps;
    let report = train_with_progress(&cfg, |step, loss| {
        if !quiet && (step % every == 0 || step + 1 == total) {
            eprintln!("step {step:>6}/{total}  loss {loss:.4e}");
        }
    })?;

    let dir = &args.out;
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut m = Manifest::new(dir);
    let checkpoint = Checkpoint {
        params: report.params.clone(),
        grid_n: cfg.grid_n,
        grid_convention: cfg.grid_convention,
    };
    m.write_file(dir, "checkpoint.bin", &save_params(&checkpoint))?;
    m.write_file(dir, "loss.csv", csv::write_losses(&report.losses).as_bytes())?;
    m.write_file(
        dir,
        "coefficients.csv",
        csv::write_coefficients(coefficient_rows(&report)).as_bytes(),
    )?;
    let grid = SampleGrid::with_convention(cfg.grid_n, cfg.grid_convention)?;
    let xs: Vec<usize> = (0..cfg.n_inputs).collect();
    write_waveforms(&mut m, dir, &report.params, &xs, &grid)?;
    let kv = cfg.to_kv_string();
    m.write_file(dir, "config.txt", kv.as_bytes())?;
    m.set_config(&kv);
    m.save(dir)?;

    println!("final loss        {:.6e}", report.final_loss);
    println!("max |A - I|       {:.6e}", report.max_identity_error());
    println!("wall time         {:.1} s", report.wall_time_secs);
    println!("wrote             {}", dir.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(load_params(&bytes)?)
}

fn grid_for(ck: &Checkpoint, args: &GridArgs) -> Result<SampleGrid> {
    Ok(SampleGrid::with_convention(
        args.grid_n.unwrap_or(ck.grid_n),
        args.grid_convention.unwrap_or(ck.grid_convention),
    )?)
}

fn eval(args: EvalArgs) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let grid = grid_for(&ck, &args.grid)?;
    let freqs = FrequencySet::new(parse_index_list(&args.omegas)?)?;
    freqs.check_for(&grid)?;
    let inputs = one_hot_inputs(&[args.x], ck.params.encoding_dim())?;
    let wf = evaluate_waveforms(&ck.params, &inputs, &grid, 1)?.remove(0);
    let set = wf.coefficients(&freqs)?;
    let text = csv::write_coefficients(
        set.iter()
            .map(|(omega, a, b)| CoefficientRow { x: args.x, omega, a, b }),
    );
    match &args.out {
        Some(path) => fs::write(path, text).map_err(CliError::io(path))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::io("<stdout>"))?,
    }
    Ok(())
}

fn export_waveforms(args: ExportArgs) -> Result<()> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let grid = grid_for(&ck, &args.grid)?;
    let xs = parse_index_list(&args.x)?;
    let dir = &args.out;
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut m = Manifest::load_or_new(dir)?;
    write_waveforms(&mut m, dir, &ck.params, &xs, &grid)?;
    m.save(dir)?;
    println!("wrote {} waveforms to {}", xs.len(), dir.display());
    Ok(())
}

fn waveform_chart(dir: &Path, xs: &[usize]) -> Result<String> {
    let mut series = Vec::with_capacity(xs.len());
    for &x in xs {
        let path = dir.join(waveform_file_name(x));
        series.push(Series {
            label: format!("x = {x}"),
            points: csv::parse_waveform(&read_text(&path)?)?,
        });
    }
    let title = format!("Waveforms for x = {}..{}", xs[0], xs[xs.len() - 1]);
    Ok(svg::line_chart(&title, "t", "s_x(t)", &series, false))
}

fn plot(args: PlotArgs) -> Result<()> {
    let dir = &args.run_dir;
    let coeffs = csv::parse_coefficients(&read_text(&dir.join("coefficients.csv"))?)?;
    let losses = csv::parse_losses(&read_text(&dir.join("loss.csv"))?)?;
    if coeffs.is_empty() {
        return Err(CliError::Usage(format!(
            "{} has no rows",
            dir.join("coefficients.csv").display()
        )));
    }

    let n_x = coeffs.iter().map(|r| r.x).max().unwrap_or(0) + 1;
    let n_w = coeffs.iter().map(|r| r.omega).max().unwrap_or(0) + 1;
    let mut grid = vec![vec![0.0; n_w]; n_x];
    for r in &coeffs {
        grid[r.x][r.omega] = r.a;
    }

    let first: Vec<usize> = (0..n_x.min(5)).collect();
    let last: Vec<usize> = (n_x.saturating_sub(5)..n_x).collect();
    let mut outputs = vec![(
        format!("waveforms_{}_{}.svg", first[0], first[first.len() - 1]),
        waveform_chart(dir, &first)?,
    )];
    if last != first {
        outputs.push((
            format!("waveforms_{}_{}.svg", last[0], last[last.len() - 1]),
            waveform_chart(dir, &last)?,
        ));
    }
    outputs.push((
        "coefficients.svg".into(),
        svg::heatmap("Cosine coefficients a(x, omega)", "x", "omega", &grid),
    ));
    let loss_series = Series {
        label: "loss".into(),
        points: losses.iter().map(|&(s, l)| (s as f64, l)).collect(),
    };
    outputs.push((
        "loss.svg".into(),
        svg::line_chart("Training loss", "step", "loss", &[loss_series], true),
    ));

    let mut m = Manifest::load_or_new(dir)?;
    for (name, text) in &outputs {
        m.write_file(dir, name, text.as_bytes())?;
        println!("wrote {}", dir.join(name).display());
    }
    m.save(dir)?;
    Ok(())
}
