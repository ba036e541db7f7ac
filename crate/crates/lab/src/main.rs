use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochdec_lab::config::{CodeSpec, ExperimentConfig, MomentConfig};
use stochdec_lab::harness::{self, RunOptions};
use stochdec_lab::{alist, verify, LabError};

#[derive(Parser)]
#[command(name = "stochdec", version, about = "LDPC decoding laboratory: SP, MbSD and edge-memory SD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Override the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// BER/FER sweep over decoders and Eb/No.
    Ber {
        #[arg(long)]
        config: PathBuf,
        /// Override frames per point.
        #[arg(long)]
        frames: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// MbSD minus SP BER gap and its log-log slope in K.
    Gap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        frames: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Mean and variance of MbSD marginal estimates on frozen noise.
    Moments {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Property checks, one JSON line each.
    Verify {
        /// Skip the Monte-Carlo moment check.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Structure of a parity-check matrix.
    GraphInfo {
        #[arg(long, conflicts_with = "gallager")]
        alist: Option<PathBuf>,
        /// `n,dv,dc`
        #[arg(long, value_parser = parse_triple)]
        gallager: Option<(usize, usize, usize)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the matrix as alist.
        #[arg(long)]
        write_alist: Option<PathBuf>,
    },
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let v: Vec<usize> =
        s.split(',').map(|t| t.trim().parse().map_err(|_| format!("bad number in {s:?}"))).collect::<Result<_, _>>()?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected n,dv,dc".into()),
    }
}

enum Failure {
    Config(String),
    Checks,
    Runtime(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) | LabError::Format(_) | LabError::Json(_) | LabError::Core(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_experiment(path: &Path, frames: Option<u64>, common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        LabError::Io(io) => Failure::Config(format!("{}: {io}", path.display())),
        other => other.into(),
    })?;
    if let Some(f) = frames {
        cfg.frames = f;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_or(cfg_out: &Option<PathBuf>, default: &str) -> PathBuf {
    cfg_out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ber { config, frames, common } => {
            let cfg = load_experiment(&config, frames, &common)?;
            let graph = cfg.code.build()?;
            let sweep =
                harness::run_ber_sweep(&cfg, &graph, RunOptions { threads: common.threads, ..Default::default() })?;
            let out = output_or(&cfg.output, "ber.csv");
            harness::write_ber_csv(&out, &sweep.records())?;
            harness::write_frames_csv(&harness::sibling(&out, "frames.csv"), &sweep)?;
            harness::write_metadata(&harness::sibling(&out, "meta.json"), &cfg, &graph, &sweep.cells, cfg.early_stop)?;
            for r in sweep.records() {
                println!(
                    "{:>5} {:>6} nds={} {:>5.2} dB  frames={:<6} ber={:.3e} fer={:.3e}",
                    r.decoder, r.param, r.nds as u8, r.ebno_db, r.frames, r.ber, r.fer
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Gap { config, frames, common } => {
            let cfg = load_experiment(&config, frames, &common)?;
            let graph = cfg.code.build()?;
            let sweep =
                harness::run_ber_sweep(&cfg, &graph, RunOptions { threads: common.threads, ..Default::default() })?;
            let (rows, slopes) = harness::gap_study(&sweep)?;
            let out = output_or(&cfg.output, "gap.csv");
            harness::write_gap_csv(&out, &rows)?;
            harness::write_slope_csv(&harness::sibling(&out, "slopes.csv"), &slopes)?;
            harness::write_ber_csv(&harness::sibling(&out, "ber.csv"), &sweep.records())?;
            harness::write_metadata(&harness::sibling(&out, "meta.json"), &cfg, &graph, &sweep.cells, cfg.early_stop)?;
            for s in &slopes {
                let slope = s.slope.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                println!("nds={} {:>5.2} dB  positive gaps={}  slope={slope}", s.nds as u8, s.ebno_db, s.points);
            }
            println!("wrote {}", out.display());
        }
        Command::Moments { config, runs, common } => {
            let mut cfg = MomentConfig::load(&config).map_err(|e| match e {
                LabError::Io(io) => Failure::Config(format!("{}: {io}", config.display())),
                other => other.into(),
            })?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(o) = &common.out {
                cfg.output = Some(o.clone());
            }
            let (graph, study) = harness::run_moment_config(&cfg, common.threads)?;
            let out = output_or(&cfg.output, "moments.csv");
            harness::write_moment_csv(&out, &study.rows)?;
            harness::write_metadata(&harness::sibling(&out, "meta.json"), &cfg, &graph, &[], false)?;
            for (ki, k) in study.ks.iter().enumerate() {
                println!("K={k:<5} max bias={:.4e} mean variance={:.4e}", study.max_bias(ki), study.mean_variance(ki));
            }
            println!("lambda_hat={:.4e} variance slope={:?}", study.lambda_hat, study.variance_slope());
            println!("wrote {}", out.display());
        }
        Command::Verify { quick, common } => {
            let checks = verify::run_suite(common.seed.unwrap_or(1), quick)?;
            let mut lines = String::new();
            for c in &checks {
                let line = serde_json::to_string(c).map_err(|e| Failure::Runtime(e.to_string()))?;
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
            }
            if let Some(o) = &common.out {
                std::fs::write(o, lines).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            if checks.iter().any(|c| !c.pass) {
                return Err(Failure::Checks);
            }
        }
        Command::GraphInfo { alist: path, gallager, seed, write_alist } => {
            let spec = match (path, gallager) {
                (Some(p), None) => CodeSpec::Alist(p),
                (None, Some((n, dv, dc))) => CodeSpec::Gallager { n, dv, dc, seed },
                _ => return Err(Failure::Config("give exactly one of --alist or --gallager".into())),
            };
            let graph = spec.build()?;
            let s = graph.analyze();
            println!("n={}", graph.n_vars());
            println!("m={}", graph.n_chks());
            println!("edges={}", graph.n_edges());
            println!("is_tree={}", s.is_tree);
            println!("components={}", s.components);
            println!("max_var_degree={}", s.max_var_degree);
            println!("max_chk_degree={}", s.max_chk_degree);
            match s.diameter {
                Some(d) => println!("diameter={d}"),
                None => println!("diameter="),
            }
            if let Some(p) = write_alist {
                alist::write(&p, &graph).map_err(Failure::from)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
