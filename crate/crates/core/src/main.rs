use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stablemix::config::{parse_config, Method, Problem, RunConfig};
use stablemix::io::parse_field_csv;
use stablemix::run::{run, RunOptions};

#[derive(Parser)]
#[command(name = "stablemix", version, about = "Mixed local-nonlocal operator laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, or a file name whose directory receives all outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write a gnuplot script for the CSV outputs.
    #[arg(long, global = true)]
    gnuplot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Picard,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the mixed symbol and its two-sided bounds.
    Symbol,
    /// Apply L to a field (a Gaussian unless --input is given).
    Apply {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Solve the Dirichlet problem.
    Solve {
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Fixed-point construction for the shifted problem.
    Picard {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Heat kernel H(t, ·) and its bounds.
    Heatkernel {
        #[arg(long)]
        t: Option<f64>,
    },
    /// Random nonnegative sources against the maximum principle.
    MaxprinCheck {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Interior Hölder seminorms of solutions.
    Regularity,
    /// Boundary exponent of the mixed and purely nonlocal problems.
    Boundary,
    /// Heat-kernel smoothing of harmonic fields.
    Liouville,
    /// Barrier search and the v_λ comparison.
    Barrier,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<u8, String> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let path = g.config.ok_or("--config is required")?;
    let mut cfg = parse_config(&path).map_err(|e| e.to_string())?;
    let mut inputs = vec![(file_name(&path), std::fs::read(&path).map_err(|e| e.to_string())?)];
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let mut field = None;
    let problem = match cli.cmd {
        Cmd::Symbol => Problem::Symbol,
        Cmd::Apply { input } => {
            if let Some(p) = input {
                let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                let table = parse_field_csv(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                field = Some(table.into_box_field().map_err(|e| e.to_string())?);
                inputs.push((file_name(&p), text.into_bytes()));
            }
            Problem::Apply
        }
        Cmd::Solve { method } => {
            if let Some(m) = method {
                cfg.method = match m {
                    MethodArg::Direct => Method::Direct,
                    MethodArg::Picard => Method::Picard,
                };
            }
            Problem::Solve
        }
        Cmd::Picard { lambda } => {
            if let Some(l) = lambda {
                if !(l >= 0.0) {
                    return Err("--lambda must be nonnegative".into());
                }
                cfg.lambda = l;
            }
            Problem::Picard
        }
        Cmd::Heatkernel { t } => {
            if let Some(t) = t {
                if !(t > 0.0 && t.is_finite()) {
                    return Err("--t must be positive".into());
                }
                cfg.heat_t = t;
            }
            Problem::Heatkernel
        }
        Cmd::MaxprinCheck { trials } => {
            if let Some(n) = trials {
                cfg.trials = n;
            }
            Problem::Maxprin
        }
        Cmd::Regularity => Problem::Regularity,
        Cmd::Boundary => Problem::Boundary,
        Cmd::Liouville => Problem::Liouville,
        Cmd::Barrier => Problem::Barrier,
    };
    cfg.problem = Some(problem);
    let (out_dir, primary) = resolve_out(g.out.as_deref(), &cfg);
    let opts = RunOptions {
        out_dir,
        primary,
        gnuplot: g.gnuplot,
        inputs,
        field,
    };
    let record = run(&cfg, &opts);
    for c in &record.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(e) = &record.error {
        eprintln!("error: {e}");
    }
    println!("outputs in {}", opts.out_dir.display());
    Ok(record.exit_code() as u8)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// `--out x.csv` or `--out x.json` names the main artifact inside x's directory.
fn resolve_out(out: Option<&Path>, cfg: &RunConfig) -> (PathBuf, Option<String>) {
    let out = out.map_or_else(|| PathBuf::from(&cfg.out), Path::to_path_buf);
    match out.extension().and_then(|e| e.to_str()) {
        Some("csv" | "json") => {
            let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            (dir.to_path_buf(), Some(file_name(&out)))
        }
        _ => (out, None),
    }
}
