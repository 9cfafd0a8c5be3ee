//! `jfcs` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use jfcs_core::config::{Scheduler, Scheme, SimConfig};
use jfcs_core::export::{export_csv, summary_fields};
use jfcs_core::sim::{run_simulation, sweep, RunTrace, SweepParameter};
use jfcs_core::Error;

const OUT_ENV: &str = "JFCS_OUT_DIR";
const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(name = "jfcs", version, about = "Multi-RU traffic steering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its CSV trace.
    Simulate(Common),
    /// Run the proposed scheme and every baseline on the same configuration.
    Benchmark(Common),
    /// Run one simulation per parameter value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// phi, M or lambda.
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Run one simulation and check the drift inequality and split simplex.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting preset (desk or full).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    scheduler: Option<Scheduler>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Parse { .. } => Failure::Config(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

impl Common {
    /// Defaults or preset, then the file, then flags.
    fn load(&self) -> Result<SimConfig, Failure> {
        let mut c = match &self.preset {
            Some(p) => SimConfig::preset(p).map_err(classify)?,
            None => SimConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Config)?;
            c.apply_str(&text, path).map_err(classify)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Config(anyhow::anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
            c.set(k.trim(), v.trim()).map_err(classify)?;
        }
        if let Some(v) = self.phi {
            c.phi = v;
        }
        if let Some(v) = self.scheduler {
            c.scheduler = v;
        }
        if let Some(v) = self.scheme {
            c.scheme = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.frames {
            c.frames = v;
        }
        c.output = Some(self.out_dir(&c));
        c.validate().map_err(classify)?;
        Ok(c)
    }

    fn out_dir(&self, c: &SimConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| c.output.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn out_of(c: &SimConfig) -> &Path {
    c.output.as_deref().unwrap_or(Path::new(DEFAULT_OUT))
}

fn simulate(c: &SimConfig, dir: &Path) -> Result<RunTrace, Failure> {
    log::info!("running {} / {} phi={} seed={}", c.scheme, c.scheduler, c.phi, c.seed);
    let trace = run_simulation(c).map_err(classify)?;
    export_csv(&trace, dir).map_err(|e| Failure::Runtime(e.into()))?;
    log::info!("wrote {}", dir.display());
    Ok(trace)
}

fn print_summary(trace: &RunTrace) {
    for (k, v) in summary_fields(&trace.summary) {
        println!("{k}\t{v}");
    }
}

fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<(), Failure> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::Runtime)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Runtime)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(common) => {
            let c = common.load()?;
            let trace = simulate(&c, out_of(&c))?;
            print_summary(&trace);
        }
        Command::Benchmark(common) => {
            let c = common.load()?;
            let out = out_of(&c);
            let mut rows = Vec::new();
            for scheme in Scheme::ALL {
                let sc = SimConfig { scheme, ..c.clone() };
                let t = simulate(&sc, &out.join(scheme.to_string()))?;
                let s = &t.summary;
                println!(
                    "{scheme}\ta_norm={:.6e}\tqhat_l1={:.6e}\tworst_delay={:.6e}",
                    s.steady_a_norm, s.steady_qhat_l1, s.worst_delay_s
                );
                rows.push(format!("{scheme},{},{},{}", s.steady_a_norm, s.steady_qhat_l1, s.worst_delay_s));
            }
            write_table(
                &out.join("benchmark.csv"),
                "scheme,steady_a_norm_bps,steady_qhat_l1_bits,worst_delay_s",
                &rows,
            )?;
        }
        Command::Sweep { common, param, values } => {
            let c = common.load()?;
            let parameter: SweepParameter = param.parse().map_err(classify)?;
            let outcome = sweep(&c, parameter, &values);
            let out = out_of(&c);
            let mut rows = Vec::new();
            let mut failed = 0;
            for (v, r) in &outcome.runs {
                match r {
                    Ok(t) => {
                        let s = &t.summary;
                        export_csv(t, &out.join(format!("{param}_{v}"))).map_err(|e| Failure::Runtime(e.into()))?;
                        println!(
                            "{param}={v}\ta_norm={:.6e}\tqhat_l1={:.6e}\tconvergence_slot={}",
                            s.steady_a_norm, s.steady_qhat_l1, s.convergence_slot
                        );
                        rows.push(format!("{v},{},{},{},ok", s.steady_a_norm, s.steady_qhat_l1, s.convergence_slot));
                    }
                    Err(e) => {
                        failed += 1;
                        log::error!("{param}={v}: {e}");
                        rows.push(format!("{v},,,,\"{e}\""));
                    }
                }
            }
            write_table(
                &out.join("sweep.csv"),
                "value,steady_a_norm_bps,steady_qhat_l1_bits,convergence_slot,status",
                &rows,
            )?;
            if let Some(Ok(report)) = &outcome.scaling {
                for (phi, q, bound, holds) in &report.bounds {
                    println!("bound phi={phi}\tqhat_l1={q:.6e}\tbound={bound:.6e}\t{}", if *holds { "ok" } else { "VIOLATED" });
                }
                println!("qhat exponent {:.4}", report.exponent);
            } else if let Some(Err(e)) = &outcome.scaling {
                log::warn!("scaling analysis skipped: {e}");
            }
            if failed > 0 {
                return Err(Failure::Runtime(anyhow::anyhow!("{failed} of {} runs failed", outcome.runs.len())));
            }
        }
        Command::Verify(common) => {
            let c = common.load()?;
            let trace = simulate(&c, out_of(&c))?;
            let s = &trace.summary;
            let splits = trace.splits(c.topology.num_ues, c.topology.num_rus());
            let simplex_err = splits
                .iter()
                .flatten()
                .map(|b| (b.iter().sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max);
            println!("drift_violations\t{}", s.drift_violations);
            println!("max_simplex_error\t{simplex_err:e}");
            if s.drift_violations > 0 || simplex_err > 1e-12 {
                return Err(Failure::Runtime(anyhow::anyhow!("verification failed")));
            }
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Config(e) | Failure::Runtime(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
