//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 on
//! numerical failures.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fbs_hurst::covmodel::{CovModel, CovModelConfig, LogVarianceModel};
use fbs_hurst::harness::config::resolve_octaves;
use fbs_hurst::harness::experiment::estimate_field;
use fbs_hurst::harness::io::{load_field, logscale_export, save_field, write_matrix_csv, ReportJson};
use fbs_hurst::harness::{run_experiment, EstimatorKind, ExperimentConfig};
use fbs_hurst::synthesis::FbsSynthesizer;
use fbs_hurst::wavelet::make_daubechies;
use fbs_hurst::{Error, HurstVector, Result};

#[derive(Parser)]
#[command(name = "fbs-hurst", version, about = "Fractional Brownian sheet synthesis and Hurst vector estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "3d")]
    ThreeD,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Ols,
    TwoStep,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one fractional Brownian sheet and write it as an FBS1 file.
    Synth {
        /// Experiment config supplying hurst, dims and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated Hurst vector, e.g. 0.3,0.8.
        #[arg(long, value_delimiter = ',')]
        hurst: Option<Vec<f64>>,
        /// Comma-separated sheet shape, e.g. 512,512.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Hurst vector of a field file; writes a JSON report.
    Estimate {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "two-step")]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, value_delimiter = ',')]
        octave_low: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        octave_high: Option<Vec<u32>>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the log-scale diagram as CSV.
        #[arg(long)]
        logscale: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment; writes the summary CSV and raw estimates.
    Mc {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Summary CSV path; falls back to the config, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Raw per-replicate estimates CSV path; falls back to the config.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Evaluate the log-variance covariance model G(H) as CSV.
    Gmatrix {
        #[arg(long, value_delimiter = ',', required = true)]
        hurst: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, value_delimiter = ',')]
        octave_low: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        octave_high: Option<Vec<u32>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, hurst, dims, seed, out } => {
            let base = config.as_deref().map(ExperimentConfig::load).transpose()?;
            let hurst = hurst
                .or_else(|| base.as_ref().map(|c| c.hurst.clone()))
                .ok_or_else(|| Error::Config("--hurst or --config is required".into()))?;
            let dims = dims
                .or_else(|| base.as_ref().map(|c| c.dims.clone()))
                .ok_or_else(|| Error::Config("--dims or --config is required".into()))?;
            let seed = seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0);
            let hurst = HurstVector::new(hurst).map_err(|e| Error::Config(e.to_string()))?;
            let synth = FbsSynthesizer::for_sheet(hurst, &dims)?;
            let (field, _) = synth.sample_pair(seed);
            save_field(&field, &out)
        }
        Command::Estimate { input, estimator, order, octave_low, octave_high, out, logscale } => {
            let field = load_field(&input)?;
            let mut config = ExperimentConfig::new(
                field.hurst_truth().map_or_else(|| vec![0.5; field.ndim()], <[f64]>::to_vec),
                field.dims().to_vec(),
                1,
                0,
            )
            .with_octaves(octave_low, octave_high);
            config.wavelet_order = order;
            let kind = match estimator {
                EstimatorArg::Ols => EstimatorKind::Ols,
                EstimatorArg::TwoStep => EstimatorKind::TwoStep,
            };
            let config = config.with_estimators(vec![kind]);
            let resolved = config.resolve()?;
            let model = CovModel::new(&resolved.filter, resolved.cov)?;
            let est = estimate_field(&field, &resolved, &model, &[kind])?;
            let report = &est.reports[0].1;
            let json = serde_json::to_string_pretty(&ReportJson::new(&est.system, report))
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{json}")?;
            w.flush()?;
            if let Some(p) = logscale {
                logscale_export(&est.system, report, &p)?;
            }
            Ok(())
        }
        Command::Mc { config, preset, seed, threads, out, raw } => {
            let mut cfg = match (config, preset) {
                (Some(p), _) => ExperimentConfig::load(&p)?,
                (None, Some(Preset::TwoD)) => ExperimentConfig::preset_2d(),
                (None, Some(Preset::ThreeD)) => ExperimentConfig::preset_3d(),
                (None, None) => return Err(Error::Config("--config or --preset is required".into())),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_experiment(&cfg, threads)?;
            let summary_path = out.or(cfg.summary_path.clone());
            let mut w = output(summary_path.as_deref())?;
            result.summary.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = raw.or(cfg.raw_path.clone()) {
                let mut w = BufWriter::new(File::create(p)?);
                result.write_raw_csv(cfg.dimension, &mut w)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::Gmatrix { hurst, dims, order, octave_low, octave_high, out } => {
            if hurst.len() != dims.len() {
                return Err(Error::Config("--hurst and --dims must have the same length".into()));
            }
            let hurst = HurstVector::new(hurst).map_err(|e| Error::Config(e.to_string()))?;
            let filter = make_daubechies(order).map_err(|e| Error::Config(e.to_string()))?;
            let octaves = resolve_octaves(&dims, &filter, octave_low.as_deref(), octave_high.as_deref())?;
            let counts = octaves
                .iter()
                .map(|o| o.counts_for(&dims, &filter))
                .collect::<Result<Vec<_>>>()?;
            let model = CovModel::new(&filter, CovModelConfig::default())?;
            let g = model.g_matrix(&hurst, &octaves, &counts)?;
            let mut w = output(out.as_deref())?;
            write_matrix_csv(&g, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}
