//! Command-line front end. Direct subcommands build a one-experiment
//! config and hand it to the same runner as `run`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use chowla_lab::runner::{self, config::MAX_RANGE, Status};

#[derive(Parser)]
#[command(name = "chowla-lab", version, about = "Sieve-backed correlation experiments for multiplicative functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory for CSV/JSON outputs and the manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores); CHOWLA_THREADS overrides.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Sieve segment length.
    #[arg(long)]
    segment: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct Grid {
    /// First scale.
    #[arg(long, default_value_t = 10.0)]
    x0: f64,
    /// Largest scale.
    #[arg(long)]
    max: f64,
    /// Ratio between consecutive scales (default 2^(1/4)).
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Args, Clone)]
struct Query {
    /// Function specs, one per shift, e.g. --fn liouville --fn "char(q=3,index=1)".
    #[arg(long = "fn", required = true)]
    functions: Vec<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    shifts: Vec<i64>,
    /// unweighted, log, loglog, prime_unweighted or prime_log.
    #[arg(long, default_value = "unweighted")]
    scheme: String,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    dilation: i64,
    #[arg(long, default_value_t = 1.0)]
    divisor: f64,
    #[command(flatten)]
    grid: Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run { config: PathBuf },
    /// Check a config file and list every problem.
    Validate { config: PathBuf },
    /// Correlation averages along a grid of scales.
    Correlate {
        #[command(flatten)]
        query: Query,
        #[command(flatten)]
        common: Common,
    },
    /// The table f_d(a) at one scale, with its d^{-it} fit.
    FdTable {
        #[arg(long = "fn", required = true)]
        functions: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        shifts: Vec<i64>,
        #[arg(long, default_value = "unweighted")]
        scheme: String,
        #[arg(long)]
        scale: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        divisors: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        dilations: Vec<i64>,
        #[arg(long, default_value_t = 0.0)]
        t_max: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Residual |S(X) - q^{it} S(X/q)|.
    IsotopyArch {
        #[command(flatten)]
        query: Query,
        /// Positive rational, e.g. 2 or 3/2.
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Residual |S_-(X) - chi(-1) S_+(X)|.
    IsotopyNonarch {
        #[command(flatten)]
        query: Query,
        /// e.g. "char(q=3,index=1)".
        #[arg(long)]
        character: String,
        #[command(flatten)]
        common: Common,
    },
    /// Argument equidistribution statistic for a harmonic mollifier.
    Equidist {
        #[command(flatten)]
        query: Query,
        /// Radial profile knots r:value, e.g. 0.2:0,0.3:1,1.5:1,2:0.
        #[arg(long, value_delimiter = ',', required = true)]
        profile: Vec<String>,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        harmonic: i64,
        /// all_scales or subsampled.
        #[arg(long, default_value = "subsampled")]
        mode: String,
        #[command(flatten)]
        common: Common,
    },
    /// Pretentious distance profile D(f, g; X)^2, or `pretense fit`.
    #[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
    Pretense {
        #[command(subcommand)]
        fit: Option<PretenseSub>,
        #[arg(long, required = true)]
        f: Option<String>,
        #[arg(long, required = true)]
        g: Option<String>,
        /// Largest scale of the profile.
        #[arg(long, alias = "scales", required = true)]
        max: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        x0: f64,
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Nearest twisted character chi(n) n^{it} to g.
    Fit(FitArgs),
    /// Frequency of P+(n) < P+(n+1).
    Race {
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        common: Common,
    },
    /// Joint smoothness of n and n+1 against rho(1/alpha) rho(1/beta).
    Smooth {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 100.0)]
        x0: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Census of length-K value patterns (several K give a growth report).
    Patterns {
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u64>,
        #[arg(long)]
        max: f64,
        #[arg(long = "fn", default_value = "liouville")]
        function: String,
        #[command(flatten)]
        common: Common,
    },
    /// Planted-character recovery trials.
    Straighten {
        #[command(subcommand)]
        mode: StraightenMode,
    },
    /// Doubly logarithmic integer average against logarithmic prime average.
    CompareAvgs {
        #[arg(long = "fn")]
        function: String,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        scales: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Windowed logarithmic three-point correlations.
    ThreePoint {
        #[arg(long = "fn")]
        function: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        shifts: Vec<i64>,
        /// Windows x:omega, e.g. 1e7:1e3.
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    g: String,
    #[arg(long, alias = "qmax")]
    q_max: f64,
    #[arg(long, alias = "tmax", default_value_t = 10.0)]
    t_max: f64,
    #[arg(long)]
    scale: f64,
    #[arg(long)]
    budget: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum PretenseSub {
    /// Nearest twisted character chi(n) n^{it} to g.
    Fit(FitArgs),
}

#[derive(Subcommand)]
enum StraightenMode {
    /// Perturbed characters; fixed modulus with --q, else random moduli up to --q-max.
    Dirichlet {
        /// Default 1 with --q, else 1000.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long, default_value_t = 50)]
        q_max: u64,
        #[arg(long, alias = "noise")]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Perturbed x^{-it0}; fixed with --t0, else uniform in [-t_range, t_range].
    Archimedean {
        /// Default 1 with --t0, else 100.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, allow_negative_numbers = true)]
        t0: Option<f64>,
        #[arg(long, default_value_t = 5.0)]
        t_range: f64,
        #[arg(long, alias = "xmax", default_value_t = 1e6)]
        x_max: f64,
        #[arg(long, alias = "noise")]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn grid_value(x0: f64, max: f64, ratio: Option<f64>) -> Value {
    let mut t = Table::new();
    t.insert("x0".into(), x0.into());
    t.insert("max".into(), max.into());
    if let Some(r) = ratio {
        t.insert("ratio".into(), r.into());
    }
    Value::Table(t)
}

fn strings(v: &[String]) -> Value {
    Value::Array(v.iter().map(|s| Value::String(s.clone())).collect())
}

fn ints(v: &[i64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Integer(x)).collect())
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

/// `"a:b"` pairs as `[[a, b], ...]`.
fn pairs(v: &[String], what: &str) -> Result<Value, String> {
    v.iter()
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("{what} '{p}' is not of the form a:b"))?;
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number in {what} '{p}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number in {what} '{p}'"))?;
            Ok(floats(&[a, b]))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Value::Array)
}

fn query_fields(q: &Query, t: &mut Table) {
    t.insert("functions".into(), strings(&q.functions));
    t.insert("shifts".into(), ints(&q.shifts));
    t.insert("scheme".into(), q.scheme.clone().into());
    t.insert("dilation".into(), q.dilation.into());
    t.insert("divisor".into(), q.divisor.into());
    t.insert("grid".into(), grid_value(q.grid.x0, q.grid.max, q.grid.ratio));
}

/// The config text for a direct subcommand.
fn direct_config(kind: &str, fields: Table, common: &Common) -> Result<String, String> {
    let mut global = Table::new();
    global.insert("max_n".into(), Value::Integer((MAX_RANGE / 2) as i64));
    global.insert("threads".into(), Value::Integer(common.threads as i64));
    global.insert("output_dir".into(), common.out_dir.display().to_string().into());
    global.insert("seed".into(), Value::Integer(common.seed as i64));
    if let Some(s) = common.segment {
        global.insert("segment_size".into(), s.into());
    }
    let mut exp = Table::new();
    exp.insert("name".into(), kind.into());
    exp.insert("kind".into(), kind.into());
    exp.extend(fields);
    let mut root = Table::new();
    root.insert("global".into(), Value::Table(global));
    root.insert("experiment".into(), Value::Array(vec![Value::Table(exp)]));
    toml::to_string(&root).map_err(|e| e.to_string())
}

fn direct(command: Command) -> Result<(String, Common), String> {
    let mut t = Table::new();
    let (kind, common) = match command {
        Command::Run { .. } | Command::Validate { .. } => unreachable!("handled by main"),
        Command::Correlate { query, common } => {
            query_fields(&query, &mut t);
            ("correlate", common)
        }
        Command::FdTable {
            functions,
            shifts,
            scheme,
            scale,
            divisors,
            dilations,
            t_max,
            common,
        } => {
            t.insert("functions".into(), strings(&functions));
            t.insert("shifts".into(), ints(&shifts));
            t.insert("scheme".into(), scheme.into());
            t.insert("scale".into(), scale.into());
            t.insert("divisors".into(), floats(&divisors));
            t.insert("dilations".into(), ints(&dilations));
            t.insert("t_max".into(), t_max.into());
            ("fd_table", common)
        }
        Command::IsotopyArch { query, q, t: tt, common } => {
            query_fields(&query, &mut t);
            t.insert("q".into(), q.into());
            t.insert("t".into(), tt.into());
            ("isotopy_arch", common)
        }
        Command::IsotopyNonarch { query, character, common } => {
            query_fields(&query, &mut t);
            t.insert("character".into(), character.into());
            ("isotopy_nonarch", common)
        }
        Command::Equidist {
            query,
            profile,
            harmonic,
            mode,
            common,
        } => {
            query_fields(&query, &mut t);
            t.insert("profile".into(), pairs(&profile, "profile knot")?);
            t.insert("harmonic".into(), harmonic.into());
            t.insert("mode".into(), mode.into());
            ("equidist", common)
        }
        Command::Pretense {
            fit: Some(PretenseSub::Fit(args)),
            ..
        }
        | Command::Fit(args) => {
            t.insert("g".into(), args.g.into());
            t.insert("q_max".into(), args.q_max.into());
            t.insert("t_max".into(), args.t_max.into());
            t.insert("scale".into(), args.scale.into());
            if let Some(b) = args.budget {
                t.insert("budget".into(), b.into());
            }
            ("fit", args.common)
        }
        Command::Pretense {
            fit: None,
            f,
            g,
            max,
            x0,
            ratio,
            common,
        } => {
            let (Some(f), Some(g), Some(max)) = (f, g, max) else {
                return Err("pretense needs --f, --g and --max".into());
            };
            t.insert("f".into(), f.into());
            t.insert("g".into(), g.into());
            t.insert("grid".into(), grid_value(x0, max, ratio));
            ("pretense", common)
        }
        Command::Race { grid, common } => {
            t.insert("grid".into(), grid_value(grid.x0, grid.max, grid.ratio));
            ("race", common)
        }
        Command::Smooth {
            alpha,
            beta,
            x0,
            max,
            ratio,
            common,
        } => {
            t.insert("alpha".into(), alpha.into());
            t.insert("beta".into(), beta.into());
            t.insert("grid".into(), grid_value(x0, max, ratio));
            ("smooth", common)
        }
        Command::Patterns { k, max, function, common } => {
            t.insert("ks".into(), Value::Array(k.iter().map(|&k| Value::Integer(k as i64)).collect()));
            t.insert("n".into(), max.into());
            t.insert("function".into(), function.into());
            ("patterns", common)
        }
        Command::Straighten { mode } => match mode {
            StraightenMode::Dirichlet {
                trials,
                q,
                q_max,
                epsilon,
                common,
            } => {
                t.insert("mode".into(), "dirichlet".into());
                let trials = trials.unwrap_or(if q.is_some() { 1 } else { 1000 });
                t.insert("trials".into(), Value::Integer(trials as i64));
                t.insert("q_max".into(), Value::Integer(q_max as i64));
                if let Some(q) = q {
                    t.insert("q".into(), Value::Integer(q as i64));
                }
                t.insert("epsilon".into(), epsilon.into());
                ("straighten", common)
            }
            StraightenMode::Archimedean {
                trials,
                t0,
                t_range,
                x_max,
                epsilon,
                common,
            } => {
                t.insert("mode".into(), "archimedean".into());
                let trials = trials.unwrap_or(if t0.is_some() { 1 } else { 100 });
                t.insert("trials".into(), Value::Integer(trials as i64));
                t.insert("t_range".into(), t_range.into());
                if let Some(t0) = t0 {
                    t.insert("t0".into(), t0.into());
                }
                t.insert("x_max".into(), x_max.into());
                t.insert("epsilon".into(), epsilon.into());
                ("straighten", common)
            }
        },
        Command::CompareAvgs {
            function,
            a,
            scales,
            common,
        } => {
            t.insert("function".into(), function.into());
            t.insert("a".into(), a.into());
            t.insert("scales".into(), floats(&scales));
            ("compare_avgs", common)
        }
        Command::ThreePoint {
            function,
            shifts,
            window,
            common,
        } => {
            t.insert("function".into(), function.into());
            t.insert("shifts".into(), ints(&shifts));
            t.insert("windows".into(), pairs(&window, "window")?);
            ("three_point", common)
        }
    };
    Ok((direct_config(kind, t, &common)?, common))
}

/// Exit codes: 0 ok, 1 config diagnostics, 2 runtime failure.
fn execute(text: &str, show_outputs: bool) -> ExitCode {
    let config = match runner::parse_config(text) {
        Ok(c) => c,
        Err(diags) => {
            for d in diags {
                eprintln!("{d}");
            }
            return ExitCode::from(1);
        }
    };
    match runner::run(&config, text) {
        Ok(m) => {
            for e in &m.experiments {
                match e.status {
                    Status::Ok => {
                        println!("{}: {}", e.name, e.summary);
                        if show_outputs {
                            for p in &e.outputs {
                                eprintln!("  wrote {}", p.display());
                            }
                        }
                    }
                    Status::Failed => eprintln!("{}: FAILED: {}", e.name, e.error.as_deref().unwrap_or("")),
                }
            }
            if let Some(s) = &m.sweep {
                eprintln!(
                    "sweep [1, {}]: {} blocks, {:.3e} values/s, {} threads, {:.2} s",
                    s.limit,
                    s.blocks,
                    s.throughput(),
                    s.threads,
                    s.wall_seconds
                );
            }
            eprintln!("manifest: {}", config.global.output_dir.join("manifest.json").display());
            if m.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { config } => match read(&config) {
            Ok(text) => execute(&text, true),
            Err(code) => code,
        },
        Command::Validate { config } => match read(&config) {
            Ok(text) => {
                let diags = runner::validate(&text);
                if diags.is_empty() {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                } else {
                    for d in &diags {
                        println!("{}:{d}", config.display());
                    }
                    ExitCode::from(1)
                }
            }
            Err(code) => code,
        },
        other => match direct(other) {
            Ok((text, _)) => execute(&text, true),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        },
    }
}
