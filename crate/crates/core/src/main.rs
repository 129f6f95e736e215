use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spiralface::pipeline::{run, Command, RunConfig};

/// Dynamic facial expression synthesis: hierarchy precomputation, synthetic
/// data, training, generation and evaluation.
#[derive(Parser)]
#[command(name = "spiralface", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Flat TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable), e.g. --set factors=[5,5,5].
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    template: Option<String>,
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true)]
    cache: Option<String>,
    #[arg(long, global = true)]
    checkpoints: Option<String>,
    #[arg(long, global = true)]
    reports: Option<String>,
    #[arg(long, global = true)]
    output: Option<String>,
    /// spiral or baseline.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Neutral mesh for generate/interpolate (default: the template).
    #[arg(long, global = true)]
    neutral: Option<String>,
    #[arg(long, global = true)]
    expression: Option<String>,
    /// Frames to generate.
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// onset,apex_start,apex_end,offset_end
    #[arg(long, global = true, value_delimiter = ',')]
    timestamps: Option<Vec<usize>>,
    /// Apex amplitude in (0, 1].
    #[arg(long, global = true)]
    scale: Option<f64>,
    #[arg(long, global = true)]
    from: Option<String>,
    #[arg(long, global = true)]
    to: Option<String>,
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build the sampling hierarchy and spiral tables cache.
    Precompute,
    /// Write a synthetic labeled dataset with a subject split.
    SynthData,
    /// Train the spiral generator.
    Train,
    /// Write an OBJ frame sequence for one label.
    Generate,
    /// Score checkpoints on held-out subjects and write the report.
    Evaluate,
    /// Train the PCA blendshape baseline.
    Baseline,
    /// Train the expression classifier and report its metrics.
    Classify,
    /// Decode a linear path between two expressions' apex latents.
    Interpolate,
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let s = |v: &Option<String>| v.as_ref().map(|x| toml::Value::String(x.clone()).to_string());
        let pairs = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("template", s(&self.template)),
            ("dataset", s(&self.dataset)),
            ("cache", s(&self.cache)),
            ("checkpoints", s(&self.checkpoints)),
            ("reports", s(&self.reports)),
            ("output", s(&self.output)),
            ("model", s(&self.model)),
            ("neutral", s(&self.neutral)),
            ("expression", s(&self.expression)),
            ("gen_frames", self.frames.map(|v| v.to_string())),
            ("timestamps", self.timestamps.as_ref().map(|t| format!("{t:?}"))),
            ("scale", self.scale.map(|v| format!("{v:?}"))),
            ("interp_from", s(&self.from)),
            ("interp_to", s(&self.to)),
            ("steps", self.steps.map(|v| v.to_string())),
        ];
        let mut out: Vec<String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
            .collect();
        out.extend(self.set.iter().cloned());
        out
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stdout)
        .format_timestamp(None)
        .init();
    let command = match cli.command {
        Cmd::Precompute => Command::Precompute,
        Cmd::SynthData => Command::SynthData,
        Cmd::Train => Command::Train,
        Cmd::Generate => Command::Generate,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Baseline => Command::Baseline,
        Cmd::Classify => Command::Classify,
        Cmd::Interpolate => Command::Interpolate,
    };
    let result = RunConfig::resolve(cli.config.as_deref(), &cli.overrides()).and_then(|cfg| {
        print!("{}", cfg.echo());
        run(command, &cfg)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
