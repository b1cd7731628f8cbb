use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use enzsim_core::analytic::{peak_of_curve, ModelTag};
use enzsim_core::harness::{ComparisonReport, SeriesSummary, DEFAULT_PROBE_TIMES};
use enzsim_core::io::{self, presets, LoadedConfig, ResultBundle, SeriesTable, CURVES_FILE};

const NM: f64 = 1e-9;
const US: f64 = 1e-6;

/// Enzyme-assisted molecular communication simulator.
#[derive(Parser)]
#[command(name = "enzsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the per-step parameters derived from a config.
    Derive(Source),
    /// Evaluate the analytical reference curves only.
    Curve {
        #[command(flatten)]
        source: Source,
        /// Directory to write curves.csv into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo experiment and write a result bundle.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "enzsim-out")]
        out: PathBuf,
    },
    /// Report simulation-versus-analytics agreement from a stored bundle.
    Compare { dir: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment description in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_parser = presets::NAMES)]
    preset: Option<String>,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trials; 0 uses every core.
    #[arg(long, env = "ENZSIM_WORKERS")]
    workers: Option<usize>,
}

impl Source {
    fn document(&self) -> Result<io::ConfigDocument> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok(io::ConfigDocument::parse(
                    &text,
                    &path.display().to_string(),
                )?)
            }
            (None, Some(name)) => Ok(presets::document(name)?),
            (None, None) => bail!("one of --config or --preset is required"),
        }
    }

    fn load(&self, overrides: Option<&Overrides>) -> Result<LoadedConfig> {
        let mut doc = self.document()?;
        if let Some(o) = overrides {
            if let Some(trials) = o.trials {
                doc.experiment.trials = trials;
            }
            if let Some(seed) = o.seed {
                doc.experiment.seed = seed;
            }
            if let Some(workers) = o.workers {
                doc.experiment.workers = workers;
            }
        }
        let loaded = doc.resolve()?;
        for warning in loaded.warnings() {
            eprintln!("warning: {warning}");
        }
        Ok(loaded)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Derive(source) => derive(&source.load(None)?),
        Command::Curve { source, out } => curve(&source.load(None)?, out.as_deref()),
        Command::Run {
            source,
            overrides,
            out,
        } => run_experiment(&source.load(Some(&overrides))?, &out),
        Command::Compare { dir } => compare(&dir),
    }
}

fn derive(loaded: &LoadedConfig) -> Result<()> {
    let d = &loaded.derived;
    let cfg = loaded.spec.engine_config();
    println!("D_A = {:.6e} m^2/s", d.diffusion[0]);
    println!("D_E = {:.6e} m^2/s", d.diffusion[1]);
    println!("D_EA = {:.6e} m^2/s", d.diffusion[2]);
    println!("dt = {} us", d.dt / US);
    println!("steps = {}", cfg.steps());
    println!("r_rms = {:.3} nm", d.r_rms / NM);
    println!("r_B = {:.3} nm", d.r_b / NM);
    println!(
        "r_rms / r_B = {:.2} (minimum {}, {})",
        loaded.regime.ratio,
        loaded.regime.min_ratio,
        if loaded.regime.valid {
            "ok"
        } else {
            "violated"
        }
    );
    println!("p_unbind = {:.6}", d.p_unbind);
    println!("p_degrade = {:.6}", d.p_degrade);
    println!("C_E = {:.6e} m^-3", cfg.enzyme_concentration());
    Ok(())
}

fn print_summary(label: &str, s: &SeriesSummary) {
    let probes: Vec<String> = s
        .value_at
        .iter()
        .map(|p| format!("{:.1}us={:.4}", p.time / US, p.value))
        .collect();
    println!(
        "rx{} {label:<20} peak {:.4} at {:.1} us; {}",
        s.receiver,
        s.peak_value,
        s.peak_time / US,
        probes.join(" ")
    );
}

fn curve(loaded: &LoadedConfig, out: Option<&Path>) -> Result<()> {
    let curves = loaded.spec.analytical_curves()?;
    for (r, c) in &curves {
        let summary = enzsim_core::harness::summarize_curve(*r, c, &DEFAULT_PROBE_TIMES)?;
        print_summary(c.model.as_str(), &summary);
        debug_assert_eq!(peak_of_curve(c)?.1, summary.peak_value);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(CURVES_FILE);
        io::write_curves(&path, &loaded.spec.times(), &curves)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_report(label: &str, report: &ComparisonReport) {
    println!(
        "rx{} {label:<34} max|z| (t >= 5 us) {:6.2}; bound violations {:.3}",
        report.receiver,
        report.max_abs_z_from(5.0 * US),
        report.violation_fraction_from(5.0 * US)
    );
}

fn report_table(table: &SeriesTable, name: &str, model: ModelTag) -> Result<()> {
    for r in 0..table.receivers.len() {
        let report = table.compare(r, model)?;
        print_report(&format!("{name} vs {}", model.as_str()), &report);
    }
    Ok(())
}

fn report_bundle(bundle: &ResultBundle) -> Result<()> {
    for entry in &bundle.meta.summary.entries {
        print_summary(&entry.source, entry);
    }
    report_table(&bundle.series, "simulation", ModelTag::EnzymeLowerBound)?;
    if let Some(control) = &bundle.control {
        report_table(control, "control", ModelTag::DiffusionOnly)?;
    }
    Ok(())
}

fn run_experiment(loaded: &LoadedConfig, out: &Path) -> Result<()> {
    let bundle = io::run_bundle(loaded)?;
    let files = bundle.write(out)?;
    report_bundle(&bundle)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn compare(dir: &Path) -> Result<()> {
    let bundle = ResultBundle::read(dir)?;
    let p = &bundle.meta.provenance;
    println!(
        "{} trials, seed {}, mode {:?}, engine {}",
        p.trials, p.seed, p.mode, p.engine_version
    );
    report_bundle(&bundle)
}
