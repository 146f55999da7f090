use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use locasso::config::{self, ConstantsFile, ExperimentConfig, ExperimentKind, SelectionSection};
use locasso::io::{read_dataset, write_records_csv};
use locasso::manifest::{RunManifest, MANIFEST_FILE};
use locasso::simulation::{compliance_report, run_rate_experiment, run_selection_experiment};
use locasso_core::selection::{selection_design, selection_problem};
use locasso_core::{
    fit_local_polynomial, estimate_f, select, solve_from, validate_estimation_kernel,
    validate_selection_kernel, Dataset, KernelFamily, LpeConfig, SelectionConfig, Stage,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "locasso", version, about = "Variable selection and local polynomial estimation at a point")]
struct Cli {
    /// Master seed; drawn at random and reported when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (select, estimate) or directory (experiment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Select the relevant coordinates at a query point.
    Select(SelectArgs),
    /// Estimate f at a query point, selecting coordinates first unless given.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment from a configuration file.
    Experiment(ExperimentArgs),
    /// Check a built-in kernel numerically.
    ValidateKernel(ValidateArgs),
}

#[derive(clap::Args)]
struct InputArgs {
    /// Dataset (CSV `x1..xd,y` or LCSO binary).
    #[arg(long)]
    data: PathBuf,
    /// Query point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
}

#[derive(clap::Args)]
struct SelectionFlags {
    /// plain or translated.
    #[arg(long)]
    procedure: Option<String>,
    #[arg(long, default_value = "uniform")]
    kernel: String,
    /// Constants file (TOML, or JSON by extension).
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Derive λ (and h unless given) from the constants and enforce the bandwidth bound.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    h_fraction: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Cap on coordinate-descent sweeps.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(clap::Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    selection: SelectionFlags,
    /// Write the objective and optimality residual after every sweep as CSV.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    selection: SelectionFlags,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    f_max: f64,
    /// Estimation kernel.
    #[arg(long, default_value = "gaussian_trunc")]
    kernel_star: String,
    /// Overrides h* = n^(-1/(2β+|Ĵ|)).
    #[arg(long)]
    hstar: Option<f64>,
    /// Skip selection and use these one-based coordinates ("" for none).
    #[arg(long)]
    selected: Option<String>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    dim: usize,
    /// Smoothness for estimation kernels.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

/// Exit status 2 marks a solver that stopped before certifying optimality.
enum Failure {
    Usage(anyhow::Error),
    NotConverged,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LOCASSO_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => ExitCode::from(2),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let (seed, generated) = match cli.seed {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| anyhow!("cannot start {j} worker threads: {e}"))?;
    }
    let ctx = Session {
        seed,
        generated,
        jobs: cli.jobs,
        out: cli.out,
        format: cli.format,
    };
    match cli.command {
        Command::Select(a) => cmd_select(&ctx, a),
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Experiment(a) => cmd_experiment(&ctx, a),
        Command::ValidateKernel(a) => cmd_validate(&ctx, a),
    }
}

struct Session {
    seed: u64,
    generated: bool,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    format: OutFormat,
}

impl Session {
    fn announce_seed(&self) {
        if self.generated {
            eprintln!("seed: {}", self.seed);
        }
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.seed, self.generated, self.jobs)
    }

    /// Prints the record to stdout or writes it to `--out` next to a manifest.
    fn emit(&self, command: &str, record: &Value, columns: &[&str]) -> anyhow::Result<()> {
        let text = match self.format {
            OutFormat::Json => serde_json::to_string_pretty(record)? + "\n",
            OutFormat::Csv => csv_line(record, columns),
        };
        match &self.out {
            Some(path) => {
                let manifest_path = sibling(path, ".manifest.json");
                self.manifest(command).write(&manifest_path)?;
                let text = match self.format {
                    OutFormat::Csv => format!("# manifest={}\n{text}", file_name(&manifest_path)),
                    OutFormat::Json => text,
                };
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned())
}

fn csv_line(record: &Value, columns: &[&str]) -> String {
    let cell = |v: &Value| match v {
        Value::Array(items) => items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    let values: Vec<String> = columns.iter().map(|c| cell(&record[*c])).collect();
    format!("{}\n{}\n", columns.join(","), values.join(","))
}

fn load_input(input: &InputArgs) -> anyhow::Result<Dataset> {
    let data = read_dataset(&input.data).with_context(|| format!("reading {}", input.data.display()))?;
    if input.x.len() != data.d() {
        return Err(anyhow!("--x has {} coordinates but the data has d = {}", input.x.len(), data.d()));
    }
    Ok(data)
}

fn selection_setup(flags: &SelectionFlags, default_procedure: &str, d: usize) -> anyhow::Result<(SelectionConfig, KernelFamily)> {
    let family = config::kernel_family(&flags.kernel)?;
    if family.stage() != Stage::Selection {
        return Err(anyhow!("`{}` is not a selection kernel", flags.kernel));
    }
    let kernel = family.build(d)?;
    let file = match &flags.constants {
        Some(p) => config::load::<ConstantsFile>(p).with_context(|| format!("reading constants {}", p.display()))?,
        None if flags.strict => return Err(anyhow!("--strict needs --constants")),
        None => ConstantsFile::default(),
    };
    if flags.strict && flags.lambda.is_some() {
        return Err(anyhow!("--lambda cannot be combined with --strict"));
    }
    if !flags.strict && (flags.lambda.is_none() || flags.h.is_none()) {
        return Err(anyhow!("give --h and --lambda, or --strict with --constants"));
    }
    let section = SelectionSection {
        procedure: flags.procedure.clone().unwrap_or_else(|| default_procedure.into()),
        kernel: flags.kernel.clone(),
        h_fraction: flags.h_fraction,
        h: flags.h,
        lambda: flags.lambda,
    };
    let mut cfg = config::selection_config(&section, &file, None, kernel.moment_bound(), d)?;
    if let Some(m) = flags.max_iter {
        cfg.solver.max_iter = m;
    }
    Ok((cfg, family))
}

fn cmd_select(ctx: &Session, a: SelectArgs) -> Outcome {
    ctx.announce_seed();
    let data = load_input(&a.input)?;
    let (cfg, family) = selection_setup(&a.selection, "translated", data.d())?;
    let kernel = family.build(data.d())?;
    let outcome = select(&data, &a.input.x, &cfg, &kernel)?;
    if let Some(path) = &a.dump_trace {
        dump_trace(path, &data, &a.input.x, &cfg, &kernel)?;
    }
    let record = json!({
        "selected": outcome.selected,
        "theta": outcome.theta_bar,
        "kkt_residual": outcome.solution.kkt_residual,
        "compliant": outcome.compliant,
        "converged": outcome.converged(),
        "procedure": cfg.procedure.name(),
        "h": cfg.bandwidth,
        "lambda": cfg.lambda,
        "window_size": outcome.window_size,
        "iterations": outcome.solution.iterations,
    });
    ctx.emit("select", &record, &["selected", "theta", "kkt_residual", "compliant", "converged"])?;
    if outcome.converged() {
        Ok(())
    } else {
        eprintln!("warning: coordinate descent stopped before the optimality check passed");
        Err(Failure::NotConverged)
    }
}

fn dump_trace(path: &Path, data: &Dataset, x: &[f64], cfg: &SelectionConfig, kernel: &locasso_core::KernelSpec) -> anyhow::Result<()> {
    let ld = selection_design(data, x, cfg, kernel)?;
    let problem = selection_problem(&ld, cfg)?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "sweep,objective,kkt_residual")?;
    let mut io_err = None;
    solve_from(&problem, &cfg.solver, &vec![0.0; problem.p()], |r| {
        if io_err.is_none() {
            if let Err(e) = writeln!(w, "{},{},{}", r.sweep, r.objective, r.kkt_residual) {
                io_err = Some(e);
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

fn parse_selected(text: &str, d: usize) -> anyhow::Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let j: usize = part.parse().with_context(|| format!("bad coordinate `{part}` in --selected"))?;
        if j == 0 || j > d {
            return Err(anyhow!("--selected coordinate {j} outside 1..={d}"));
        }
        out.push(j);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn cmd_estimate(ctx: &Session, a: EstimateArgs) -> Outcome {
    ctx.announce_seed();
    let data = load_input(&a.input)?;
    let star = config::kernel_family(&a.kernel_star)?;
    let mut converged = true;
    let (selected, selection_json) = match &a.selected {
        Some(list) => (parse_selected(list, data.d())?, Value::Null),
        None => {
            let (cfg, family) = selection_setup(&a.selection, "translated", data.d())?;
            let kernel = family.build(data.d())?;
            let s = select(&data, &a.input.x, &cfg, &kernel)?;
            converged = s.converged();
            let info = json!({
                "h": cfg.bandwidth,
                "lambda": cfg.lambda,
                "compliant": s.compliant,
                "converged": converged,
                "kkt_residual": s.solution.kkt_residual,
            });
            (s.selected, info)
        }
    };
    let mut cfg = LpeConfig::new(a.beta, selected.clone(), star, a.f_max)?;
    cfg.bandwidth = a.hstar;
    let fit = fit_local_polynomial(&data, &a.input.x, &cfg)?;
    let record = json!({
        "fhat": estimate_f(&fit, a.f_max),
        "selected": selected,
        "unique": fit.unique,
        "hstar": fit.bandwidth,
        "degree": cfg.degree(),
        "active_points": fit.active_points,
        "selection": selection_json,
    });
    ctx.emit("estimate", &record, &["fhat", "selected", "unique", "hstar"])?;
    if converged {
        Ok(())
    } else {
        eprintln!("warning: coordinate descent stopped before the optimality check passed");
        Err(Failure::NotConverged)
    }
}

fn cmd_experiment(ctx: &Session, a: ExperimentArgs) -> Outcome {
    let cfg: ExperimentConfig = config::load(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let (seed, generated) = match (ctx.generated, cfg.seed) {
        (true, Some(s)) => (s, false),
        _ => (ctx.seed, ctx.generated),
    };
    if generated {
        eprintln!("seed: {seed}");
    }
    let exp = cfg.experiment(seed)?;
    let out = ctx.out.clone().unwrap_or_else(|| PathBuf::from("locasso-out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new("experiment", seed, generated, ctx.jobs);
    manifest.config = Some(serde_json::to_value(&cfg)?);
    manifest.write(&out.join(MANIFEST_FILE)).context("writing the manifest")?;

    let summary = match cfg.kind {
        ExperimentKind::Selection => run_selection_experiment(&exp),
        ExperimentKind::Rate => run_rate_experiment(&exp),
    }
    ?;
    let largest = exp.template.with_n_seed(*exp.n_grid.last().unwrap(), seed);
    let kernel = exp.selection_kernel.build(largest.d)?;
    let compliance = compliance_report(&largest, &exp.selection, &kernel)?;
    for failed in [
        (!compliance.dimension_regime.holds).then_some("dimension regime (d + 2 < ln n / -ln h)"),
        (!compliance.rate_regime.holds).then_some("rate regime (d + 2 <= ln n / -2 ln h)"),
    ]
    .into_iter()
    .flatten()
    {
        log::warn!("hypothesis not met at n = {}: {failed}", largest.n);
    }

    let file = File::create(out.join("replicates.csv")).context("creating replicates.csv")?;
    write_records_csv(BufWriter::new(file), MANIFEST_FILE, &summary.records)?;
    let body = json!({
        "manifest": MANIFEST_FILE,
        "seed": seed,
        "grid": summary.grid,
        "rate_slope": summary.rate.as_ref().map(|r| r.slope),
        "rate": summary.rate,
        "compliance": compliance,
    });
    let text = serde_json::to_string_pretty(&body)? + "\n";
    std::fs::write(out.join("summary.json"), &text).context("writing summary.json")?;
    print!("{text}");
    if summary.grid.iter().any(|g| g.nonconverged > 0) {
        eprintln!("warning: some replicates did not converge");
        return Err(Failure::NotConverged);
    }
    Ok(())
}

fn cmd_validate(ctx: &Session, a: ValidateArgs) -> Outcome {
    let family = config::kernel_family(&a.kernel)?;
    let k = family.build(a.dim)?;
    let result = match family.stage() {
        Stage::Selection => validate_selection_kernel(&k, a.tol).map(|r| {
            json!({
                "kernel": family.name(),
                "dim": a.dim,
                "stage": "selection",
                "quantities": r.quantities,
                "moment_bound": r.moment_bound,
                "bound_holds": r.bound_holds,
                "max_off_diagonal": r.max_off_diagonal,
                "diagonal": r.diagonal,
                "symmetric": r.symmetric,
                "support_ok": r.support_ok,
                "passes": r.passes,
            })
        }),
        Stage::Estimation => validate_estimation_kernel(&k, a.beta, a.tol).map(|r| {
            json!({
                "kernel": family.name(),
                "dim": a.dim,
                "stage": "estimation",
                "beta": a.beta,
                "cap_constant": r.cap_constant,
                "mass": r.mass,
                "weighted_square_integral": r.weighted_square_integral,
                "weighted_sup": r.weighted_sup,
                "tail_bound": r.tail_bound,
                "failures": r.failures,
                "passes": r.passes,
            })
        }),
    };
    let record = match result {
        Ok(v) => v,
        Err(locasso_core::Error::ValidationUnavailable { dim, max_dim }) => json!({
            "kernel": family.name(),
            "dim": dim,
            "passes": Value::Null,
            "unavailable": format!("numerical validation runs only for d <= {max_dim}"),
        }),
        Err(e) => return Err(e.into()),
    };
    ctx.emit("validate-kernel", &record, &["kernel", "dim", "passes"])?;
    Ok(())
}
