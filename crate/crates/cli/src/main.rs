//! `holonomy verify <suite>` and `holonomy sample ym|heat`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use holonomy::harness::{observables_csv, run_suite, sample_observables, SampleKind, Suite, SuiteConfig};
use holonomy::topology::GraphSpec;

#[derive(Parser)]
#[command(name = "holonomy", version, about = "Loop observables of lattice gauge fields: verification and sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and emit a JSON report.
    Verify {
        /// sonia, intertwine, gauge-intertwine, deformed-intertwine, haar-sd,
        /// heat-fk, fk-fokker-planck, ym-sd, combinatorics or adjudication
        suite: String,
        #[command(flatten)]
        common: Common,
        /// Gate multiplier for statistical checks.
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        /// Tolerance override for deterministic checks.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Dump raw observables as CSV (trial_index, value_re, value_im).
    Sample {
        #[arg(value_enum)]
        kind: Sampler,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Ym,
    Heat,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    Torus,
    Cycle,
    Complete,
    File,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum)]
    graph: Option<GraphKindArg>,
    /// Torus side length.
    #[arg(long = "L", default_value_t = 3)]
    side: usize,
    /// Torus dimension.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Vertex count for cycle and complete graphs.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// JSON graph description for `--graph file`.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Matrix size; repeat for several.
    #[arg(long)]
    d: Vec<usize>,
    /// Coupling; repeat for several.
    #[arg(long)]
    k: Vec<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (0: one per core).
    #[arg(long, env = "HOLONOMY_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn graph_spec(&self) -> Result<Option<GraphSpec>, String> {
        Ok(match self.graph {
            None => None,
            Some(GraphKindArg::Torus) => Some(GraphSpec::Torus { side: self.side, n: self.n }),
            Some(GraphKindArg::Cycle) => Some(GraphSpec::Cycle { m: self.m }),
            Some(GraphKindArg::Complete) => Some(GraphSpec::Complete { m: self.m }),
            Some(GraphKindArg::File) => {
                let path = self.file.as_ref().ok_or("--graph file needs --file <path>")?;
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                Some(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
            }
        })
    }

    fn config(&self, suite: Suite) -> Result<SuiteConfig, String> {
        let mut cfg = SuiteConfig::new(suite);
        cfg.graph = self.graph_spec()?;
        cfg.d = self.d.clone();
        cfg.k = self.k.clone();
        cfg.t = self.t;
        cfg.trials = self.trials;
        cfg.eps = self.eps;
        cfg.seed = self.seed;
        cfg.threads = self.threads;
        cfg.out = self.out.clone();
        Ok(cfg)
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn verify(suite: &str, common: &Common, sigma: f64, tolerance: Option<f64>) -> Result<bool, String> {
    let suite: Suite = suite.parse().map_err(|e| format!("{e}"))?;
    let mut cfg = common.config(suite)?;
    cfg.sigma = sigma;
    cfg.tolerance = tolerance;
    let report = run_suite(&cfg).map_err(|e| format!("{e}"))?;
    write_output(cfg.out.as_ref(), &report.to_json())?;
    for t in report.failures() {
        eprintln!("FAIL {}", t.name);
    }
    eprintln!(
        "{} {}: {}/{} passed",
        report.suite,
        if report.pass { "PASS" } else { "FAIL" },
        report.tests.iter().filter(|t| t.pass).count(),
        report.tests.len()
    );
    Ok(report.pass)
}

fn sample(kind: Sampler, common: &Common) -> Result<(), String> {
    let kind = match kind {
        Sampler::Ym => SampleKind::Ym,
        Sampler::Heat => SampleKind::Heat,
    };
    let cfg = common.config(Suite::YmSd)?;
    let values = sample_observables(kind, &cfg).map_err(|e| format!("{e}"))?;
    write_output(cfg.out.as_ref(), observables_csv(&values).trim_end())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify { suite, common, sigma, tolerance } => verify(suite, common, *sigma, *tolerance),
        Command::Sample { kind, common } => sample(*kind, common).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
