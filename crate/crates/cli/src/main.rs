mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Settings, UsageError};

/// Skeleton-aware losses, LineAcc metrics and label deformations.
#[derive(Debug, Parser)]
#[command(name = "skil", version)]
struct Cli {
    /// Flat `key = value` file with default parameters.
    #[arg(long, global = true, env = "SKIL_CONFIG")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Parameter flags; each one overrides the config file.
#[derive(Debug, Default, Args)]
struct Overrides {
    /// Gaussian scale of the position score, in pixels.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Reach of the diffused skeleton halo, in pixels.
    #[arg(long, global = true)]
    s_border: Option<usize>,
    #[arg(long, global = true)]
    n_iter_max: Option<usize>,
    /// Decay factor of the diffusion.
    #[arg(long = "f", global = true)]
    f: Option<f64>,
    /// Sharpness of the smooth threshold applied to predictions.
    #[arg(long, global = true)]
    sharpness: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Selectiveness of the branch cutter.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Cut probability of the branch cutter.
    #[arg(long = "p", global = true)]
    p: Option<f64>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every prediction in a directory against the label of the same stem.
    Metrics {
        pred_dir: PathBuf,
        label_dir: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Evaluate a loss and its mixture components on one image pair.
    Loss {
        pred: PathBuf,
        label: PathBuf,
        /// dice, cl-dice, skil-dice or skil-product.
        #[arg(long = "loss")]
        selector: String,
    },
    /// Write the soft skeleton of an image.
    Skeletonize { input: PathBuf, output: PathBuf },
    /// Write the smooth diffusion of an image.
    Diffuse { input: PathBuf, output: PathBuf },
    /// Deform every mask of a directory.
    Deform {
        in_dir: PathBuf,
        out_dir: PathBuf,
        #[command(flatten)]
        flags: DeformFlags,
    },
    /// Compare analytic loss gradients with central finite differences.
    Gradcheck {
        #[arg(long = "loss")]
        selector: String,
        /// Side of the random square instances (at most 64).
        #[arg(long, default_value_t = 24)]
        size: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
    },
    /// Gradient descent on per-pixel logits towards a label.
    Fit {
        label: PathBuf,
        #[arg(long = "loss")]
        selector: String,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        /// Initial prediction image; logits start at 0 when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Final prediction image.
        #[arg(long)]
        out: PathBuf,
        /// Loss curve CSV; defaults to `<out stem>_loss.csv`.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Args)]
struct DeformFlags {
    /// shift, width, branch or combined.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    shift_max: Option<usize>,
    #[arg(long)]
    apply_probability: Option<f64>,
    #[arg(long)]
    amplitude_low: Option<f64>,
    #[arg(long)]
    amplitude_high: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    octaves: Option<usize>,
    #[arg(long)]
    persistence: Option<f64>,
    #[arg(long)]
    lacunarity: Option<f64>,
}

fn apply_overrides(settings: &mut Settings, cli: &Cli) -> anyhow::Result<()> {
    let o = &cli.overrides;
    let mut pairs: Vec<(&str, String)> = Vec::new();
    let mut push = |key, value: Option<String>| {
        if let Some(v) = value {
            pairs.push((key, v));
        }
    };
    push("sigma", o.sigma.map(|v| v.to_string()));
    push("s_border", o.s_border.map(|v| v.to_string()));
    push("n_iter_max", o.n_iter_max.map(|v| v.to_string()));
    push("f", o.f.map(|v| v.to_string()));
    push("sharpness", o.sharpness.map(|v| v.to_string()));
    push("epsilon", o.epsilon.map(|v| v.to_string()));
    push("alpha", o.alpha.map(|v| v.to_string()));
    push("p", o.p.map(|v| v.to_string()));
    push("seed", o.seed.map(|v| v.to_string()));
    if let Command::Deform { flags, .. } = &cli.command {
        push("kind", flags.kind.clone());
        push("shift_max", flags.shift_max.map(|v| v.to_string()));
        push("apply_probability", flags.apply_probability.map(|v| v.to_string()));
        push("amplitude_low", flags.amplitude_low.map(|v| v.to_string()));
        push("amplitude_high", flags.amplitude_high.map(|v| v.to_string()));
        push("resolution", flags.resolution.map(|v| v.to_string()));
        push("octaves", flags.octaves.map(|v| v.to_string()));
        push("persistence", flags.persistence.map(|v| v.to_string()));
        push("lacunarity", flags.lacunarity.map(|v| v.to_string()));
    }
    for (key, value) in pairs {
        settings.set(key, &value)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    apply_overrides(&mut settings, &cli)?;
    settings.validate()?;

    match cli.command {
        Command::Metrics {
            pred_dir,
            label_dir,
            out,
            format,
        } => commands::metrics(&settings, &pred_dir, &label_dir, out.as_deref(), format == Format::Json),
        Command::Loss {
            pred,
            label,
            selector,
        } => commands::loss(&settings, &pred, &label, &selector),
        Command::Skeletonize { input, output } => commands::skeletonize(&settings, &input, &output),
        Command::Diffuse { input, output } => commands::diffuse(&settings, &input, &output),
        Command::Deform {
            in_dir, out_dir, ..
        } => commands::deform_dir(&settings, &in_dir, &out_dir),
        Command::Gradcheck {
            selector,
            size,
            seeds,
            h,
        } => commands::gradcheck(&settings, &selector, size, seeds, h),
        Command::Fit {
            label,
            selector,
            steps,
            lr,
            init,
            out,
            curve,
        } => commands::fit(
            &settings,
            commands::FitArgs {
                label: &label,
                selector: &selector,
                steps,
                lr,
                init: init.as_deref(),
                out: &out,
                curve: curve.as_deref(),
            },
        ),
    }
}

/// 1 for usage errors, 2 for I/O and input data, 3 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    use skil_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter { .. } => 1,
                E::NonFinite { .. }
                | E::Diverged { .. }
                | E::NonScalarRoot { .. }
                | E::InvalidField(_)
                | E::OutOfRange { .. } => 3,
                E::ShapeMismatch { .. }
                | E::Io { .. }
                | E::Decode { .. }
                | E::UnsupportedBitDepth { .. }
                | E::ColorImage { .. }
                | E::NoPairs
                | E::UnmatchedFiles(_)
                | E::Serialize(_) => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
