use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use pnn_core::catalog::{self, KnownFact};
use pnn_core::dimension::{self, DimOptions, DimensionReport, Method, SweepOptions, SweepRow};
use pnn_core::learning_degree::{self, CensusOptions};
use pnn_core::membership::{self, MembershipVerdict};
use pnn_core::network::CoefficientVector;
use pnn_core::symtensor::parse_polys;
use pnn_core::training::{self, ExperimentConfig, FunctionCensus, TrainedRun};
use pnn_core::{Architecture, Backend, PnnError, Scalar};

const THREADS_ENV: &str = "PNN_THREADS";

#[derive(Parser, Debug)]
#[command(name = "pnn", version, about = "Dimensions, membership and training of polynomial neural networks")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension of the neurovariety of one architecture, e.g. `2-2-3:2`.
    Dim(DimArgs),
    /// Dimension versus expected dimension over a range of architectures.
    Sweep(SweepArgs),
    /// Decide whether polynomials lie on the neuromanifold and neurovariety.
    Member(MemberArgs),
    /// Generic ED degree of the (2,2,k) quadratic network.
    Eddeg(EddegArgs),
    /// Train the (2,2,3) quadratic network and census the learned functions.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Known facts about an architecture.
    Known { arch: Architecture },
    /// Recompute the shallow r = 2 table and compare with the stored values.
    Table1(RankArgs),
}

#[derive(Args, Debug, Clone)]
struct RankArgs {
    /// Number of random weight trials.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value = "ff")]
    backend: Backend,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// auto, interpolate or evaluate.
    #[arg(long, default_value = "auto")]
    method: Method,
}

impl RankArgs {
    fn options(&self) -> DimOptions {
        DimOptions { trials: self.trials, seed: self.seed, backend: self.backend, method: self.method }
    }

    fn header(&self) -> String {
        format!("seed={} backend={} trials={} method={}", self.seed, self.backend, self.trials, self.method)
    }
}

#[derive(Args, Debug)]
struct DimArgs {
    arch: Architecture,
    #[command(flatten)]
    rank: RankArgs,
    /// Also report the smallest recursive upper bound over split layers.
    #[arg(long)]
    bound: bool,
    /// Compare with the catalog and exit with status 3 on disagreement.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    max_width: usize,
    /// Smallest number of weight layers L.
    #[arg(long, default_value_t = 3)]
    min_layers: usize,
    #[arg(long, default_value_t = 4)]
    max_layers: usize,
    #[arg(long, default_value_t = 1)]
    min_r: u32,
    #[arg(long, default_value_t = 5)]
    max_r: u32,
    /// Include width tuples that increase somewhere.
    #[arg(long)]
    all_widths: bool,
    /// Include single-output architectures.
    #[arg(long)]
    single_output: bool,
    /// Exit with status 3 if any architecture is defective.
    #[arg(long)]
    expect_no_defect: bool,
    #[command(flatten)]
    rank: RankArgs,
}

#[derive(Args, Debug)]
struct MemberArgs {
    arch: Architecture,
    /// Coefficient file; `-` reads standard input.
    #[arg(long)]
    input: PathBuf,
    /// Decide in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
    /// Relative tolerance for floating-point decisions.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EddegArgs {
    k: usize,
    /// Also run a multistart census of critical points.
    #[arg(long)]
    census: bool,
    #[arg(long, default_value_t = 500)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Train every run and write runs.csv, census.csv and config.toml to the output directory.
    Run {
        /// TOML file with experiment settings; unset keys take profile values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// desk (500 datasets, 4000 epochs) or full (5000, 15000).
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the census from a directory written by `experiment run`.
    Census {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Computation(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Computation(_) => 2,
            Failure::Mismatch(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Computation(m) | Failure::Mismatch(m) => m,
        }
    }
}

impl From<PnnError> for Failure {
    fn from(e: PnnError) -> Self {
        match e {
            PnnError::InvalidArchitecture(_) | PnnError::InvalidInput(_) | PnnError::Parse { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Computation(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Computation(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message());
        return ExitCode::from(f.code());
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> CliResult {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Computation(e.to_string()))
}

fn run(cli: Cli, out: &mut impl Write) -> CliResult {
    let fmt = cli.format;
    match cli.command {
        Command::Dim(a) => cmd_dim(a, fmt, out),
        Command::Sweep(a) => cmd_sweep(a, fmt, out),
        Command::Member(a) => cmd_member(a, fmt, out),
        Command::Eddeg(a) => cmd_eddeg(a, fmt, out),
        Command::Experiment(ExperimentCommand::Run { config, profile, out: dir, seed }) => {
            cmd_experiment_run(config.as_deref(), &profile, &dir, seed, fmt, out)
        }
        Command::Experiment(ExperimentCommand::Census { input }) => cmd_experiment_census(&input, fmt, out),
        Command::Known { arch } => cmd_known(&arch, fmt, out),
        Command::Table1(a) => cmd_table1(a, fmt, out),
    }
}

fn write_json(out: &mut impl Write, value: &impl Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Computation(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_csv<T: Serialize>(out: &mut impl Write, header: &str, rows: &[T]) -> CliResult {
    writeln!(out, "# {header}")?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Computation(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Computation(e.to_string()))?;
    out.write_all(&bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct DimRecord {
    arch: String,
    r: u32,
    dim: usize,
    edim: usize,
    ambient: usize,
    defect: i64,
    filling: bool,
    certified: bool,
    backend: String,
    method: String,
    seed: u64,
    trials: usize,
    trials_run: usize,
    spectral_gap: Option<f64>,
    recursive_bound: Option<usize>,
    bound_split: Option<usize>,
    known_dim: Option<usize>,
    known_source: Option<String>,
}

fn dim_record(rep: &DimensionReport, bound: Option<(usize, usize)>, known: Option<&KnownFact>) -> DimRecord {
    let row = SweepRow::from(rep);
    DimRecord {
        arch: row.arch,
        r: row.r,
        dim: rep.dim,
        edim: rep.edim,
        ambient: rep.ambient,
        defect: rep.defect,
        filling: rep.filling,
        certified: rep.certified(),
        backend: rep.backend.to_string(),
        method: rep.method.to_string(),
        seed: rep.seed,
        trials: rep.trials,
        trials_run: rep.trials_run,
        spectral_gap: rep.spectral_gap,
        recursive_bound: bound.map(|b| b.0),
        bound_split: bound.map(|b| b.1),
        known_dim: known.and_then(|k| k.dim),
        known_source: known.map(|k| k.source.to_string()),
    }
}

fn cmd_dim(a: DimArgs, fmt: Format, out: &mut impl Write) -> CliResult {
    let opts = a.rank.options();
    let rep = dimension::neurovariety_dim(&a.arch, &opts)?;
    let bound = if a.bound { dimension::best_recursive_bound(&a.arch, &opts)? } else { None };
    let known = catalog::lookup(&a.arch);
    let rec = dim_record(&rep, bound, known.as_ref());
    match fmt {
        Format::Json => write_json(out, &rec)?,
        Format::Csv => write_csv(out, &format!("dim {} {}", a.arch, a.rank.header()), &[&rec])?,
        Format::Text => {
            writeln!(out, "# dim {} {}", a.arch, a.rank.header())?;
            writeln!(out, "dim {}", rep.dim)?;
            writeln!(out, "edim {}", rep.edim)?;
            writeln!(out, "ambient {}", rep.ambient)?;
            writeln!(out, "defect {}", rep.defect)?;
            writeln!(out, "filling {}", rep.filling)?;
            writeln!(out, "certified {}", rep.certified())?;
            if let Some(g) = rep.spectral_gap {
                writeln!(out, "spectral_gap {g:e}")?;
            }
            if let Some((b, split)) = bound {
                writeln!(out, "recursive_bound {b} split {split}")?;
            }
            if let Some(k) = &known {
                if let Some(d) = k.dim {
                    writeln!(out, "known_dim {d} [{}]", k.source)?;
                }
            }
        }
    }
    if a.check {
        if let Some(d) = known.as_ref().and_then(|k| k.dim) {
            if d != rep.dim {
                return Err(Failure::Mismatch(format!("{}: computed dim {} but catalog has {d}", a.arch, rep.dim)));
            }
        }
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, fmt: Format, out: &mut impl Write) -> CliResult {
    let opts = SweepOptions {
        max_width: a.max_width,
        min_layers: a.min_layers,
        max_layers: a.max_layers,
        min_r: a.min_r,
        max_r: a.max_r,
        non_increasing: !a.all_widths,
        multi_output: !a.single_output,
        dim: a.rank.options(),
    };
    let reports = dimension::conjecture_sweep(&opts)?;
    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
    let header = format!(
        "sweep max_width={} layers={}..={} r={}..={} non_increasing={} multi_output={} {}",
        opts.max_width,
        opts.min_layers,
        opts.max_layers,
        opts.min_r,
        opts.max_r,
        opts.non_increasing,
        opts.multi_output,
        a.rank.header()
    );
    match fmt {
        Format::Json => write_json(out, &json!({ "header": header, "seed": opts.dim.seed, "rows": rows }))?,
        _ => write_csv(out, &header, &rows)?,
    }
    let defective: Vec<String> =
        rows.iter().filter(|r| r.defect != 0).map(|r| format!("{}:{}", r.arch, r.r)).collect();
    if a.expect_no_defect && !defective.is_empty() {
        return Err(Failure::Mismatch(format!("defective architectures: {}", defective.join(", "))));
    }
    Ok(())
}

fn read_input(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
    }
}

fn cmd_member(a: MemberArgs, fmt: Format, out: &mut impl Write) -> CliResult {
    let text = read_input(&a.input)?;
    let polys = CoefficientVector::new(parse_polys(&text)?)?;
    let verdict: MembershipVerdict = if a.exact {
        membership::member(&a.arch, &polys, a.tol, a.seed)?
    } else {
        let approx = polys.map(|c| c.to_f64());
        membership::member(&a.arch, &approx, a.tol, a.seed)?
    };
    let mode = if a.exact { "rat" } else { "float" };
    match fmt {
        Format::Json => write_json(out, &json!({ "arch": a.arch.to_string(), "arithmetic": mode, "seed": a.seed, "verdict": verdict }))?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                arch: String,
                in_variety: bool,
                in_manifold: String,
                boundary: bool,
                tolerance: f64,
                certificate: &'a str,
            }
            let row = Row {
                arch: a.arch.to_string(),
                in_variety: verdict.in_variety,
                in_manifold: verdict.in_manifold.to_string(),
                boundary: verdict.boundary,
                tolerance: verdict.tolerance,
                certificate: verdict.certificate.as_deref().unwrap_or(""),
            };
            write_csv(out, &format!("member {} arithmetic={mode} seed={}", a.arch, a.seed), &[row])?;
        }
        Format::Text => {
            writeln!(out, "# member {} arithmetic={mode} tol={} seed={}", a.arch, a.tol, a.seed)?;
            writeln!(out, "in_variety {}", if verdict.in_variety { "yes" } else { "no" })?;
            writeln!(out, "in_manifold {}", verdict.in_manifold)?;
            if verdict.boundary {
                writeln!(out, "boundary yes")?;
            }
            if let Some(c) = &verdict.certificate {
                writeln!(out, "certificate {c}")?;
            }
        }
    }
    Ok(())
}

fn cmd_eddeg(a: EddegArgs, fmt: Format, out: &mut impl Write) -> CliResult {
    let closed = learning_degree::eddeg_closed_form(a.k as u64)?;
    let polar = learning_degree::eddeg_polar_sum(a.k)?;
    let census = if a.census {
        let opts = CensusOptions { starts: a.starts, seed: a.seed, ..CensusOptions::default() };
        Some(learning_degree::random_census(a.k, &opts)?)
    } else {
        None
    };
    match fmt {
        Format::Json => write_json(
            out,
            &json!({
                "k": a.k,
                "seed": a.seed,
                "closed_form": closed,
                "polar_sum": polar.to_string(),
                "census": census,
            }),
        )?,
        Format::Csv => {
            writeln!(out, "# eddeg k={} seed={}", a.k, a.seed)?;
            writeln!(out, "quantity,value")?;
            writeln!(out, "closed_form,{closed}")?;
            writeln!(out, "polar_sum,{polar}")?;
            if let Some(c) = &census {
                writeln!(out, "census_starts,{}", c.starts)?;
                writeln!(out, "census_regular,{}", c.distinct_minima.len())?;
                writeln!(out, "census_singular,{}", c.singular.len())?;
                writeln!(out, "census_non_convergent,{}", c.non_convergent)?;
            }
        }
        Format::Text => {
            writeln!(out, "# eddeg k={} seed={}", a.k, a.seed)?;
            writeln!(out, "closed_form {closed}")?;
            writeln!(out, "polar_sum {polar}")?;
            if let Some(c) = &census {
                writeln!(
                    out,
                    "census starts={} regular={} singular={} non_convergent={} tol={:e}",
                    c.starts,
                    c.distinct_minima.len(),
                    c.singular.len(),
                    c.non_convergent,
                    c.clustering_tolerance
                )?;
                writeln!(out, "point\tloss\tmultiplicity\trank\tsingular_values")?;
                for (i, p) in c.distinct_minima.iter().chain(&c.singular).enumerate() {
                    let sv: Vec<String> = p.singular_values.iter().map(|s| format!("{s:.6e}")).collect();
                    writeln!(out, "{i}\t{:.10e}\t{}\t{}\t{}", p.loss, p.multiplicity, p.rank, sv.join(" "))?;
                }
            }
        }
    }
    if polar != closed.into() {
        return Err(Failure::Mismatch(format!("polar sum {polar} differs from closed form {closed}")));
    }
    Ok(())
}

fn load_config(path: Option<&Path>, profile: &str) -> CliResult<ExperimentConfig> {
    let base = ExperimentConfig::profile(profile)?;
    let Some(path) = path else { return Ok(base) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let toml::Value::Table(mut merged) = toml::Value::try_from(&base).map_err(|e| Failure::Computation(e.to_string()))?
    else {
        return Err(Failure::Computation("configuration does not serialize to a table".into()));
    };
    for (k, v) in std::mem::take(&mut table) {
        if !merged.contains_key(&k) {
            return Err(Failure::Usage(format!("{}: unknown key {k:?}", path.display())));
        }
        merged.insert(k, v);
    }
    let cfg: ExperimentConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Usage(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct CensusSummary {
    seed: u64,
    runs: usize,
    converged: usize,
    failed: usize,
    unconverged_excluded: usize,
    clusters: usize,
    residual_clusters: usize,
    residual_runs: usize,
    rank_two_clusters: usize,
    rank_one_clusters: usize,
    most_frequent_rank: Option<usize>,
    most_frequent_local_min: Option<bool>,
}

fn summarize(runs: &[TrainedRun], census: &FunctionCensus, seed: u64) -> CensusSummary {
    let top = census.clusters.first();
    CensusSummary {
        seed,
        runs: runs.len(),
        converged: runs.iter().filter(|r| r.converged).count(),
        failed: census.failed_runs,
        unconverged_excluded: census.unconverged_runs,
        clusters: census.clusters.len(),
        residual_clusters: census.residual_clusters,
        residual_runs: census.residual_runs,
        rank_two_clusters: census.rank_two().count(),
        rank_one_clusters: census.clusters.iter().filter(|c| c.rank == 1).count(),
        most_frequent_rank: top.map(|c| c.rank),
        most_frequent_local_min: top.and_then(|c| c.local_min.as_ref()).map(|v| v.is_local_min),
    }
}

fn report_census(
    runs: &[TrainedRun],
    census: &FunctionCensus,
    cfg: &ExperimentConfig,
    dir: &Path,
    fmt: Format,
    out: &mut impl Write,
) -> CliResult {
    training::write_census_csv(census, fs::File::create(dir.join("census.csv"))?)?;
    let summary = summarize(runs, census, cfg.seed);
    match fmt {
        Format::Json => write_json(out, &json!({ "summary": summary, "census": census }))?,
        Format::Csv => {
            writeln!(out, "# experiment seed={} datasets={} max_epochs={}", cfg.seed, cfg.num_datasets, cfg.max_epochs)?;
            let mut buf = Vec::new();
            training::write_census_csv(census, &mut buf)?;
            out.write_all(&buf)?;
        }
        Format::Text => {
            writeln!(out, "# experiment seed={} datasets={} max_epochs={}", cfg.seed, cfg.num_datasets, cfg.max_epochs)?;
            writeln!(
                out,
                "runs {} converged {} failed {} excluded {}",
                summary.runs, summary.converged, summary.failed, summary.unconverged_excluded
            )?;
            writeln!(
                out,
                "clusters {} (frequency >= {}) rank2 {} rank1 {} residual {} clusters / {} runs",
                summary.clusters,
                census.frequency_floor,
                summary.rank_two_clusters,
                summary.rank_one_clusters,
                summary.residual_clusters,
                summary.residual_runs
            )?;
            writeln!(out, "cluster\tfrequency\trank\tlocal_min\tsingular_values")?;
            for (i, c) in census.clusters.iter().enumerate() {
                let lm = c.local_min.as_ref().map_or("-".to_string(), |v| {
                    if v.escaped { "false (escaped)".to_string() } else { v.is_local_min.to_string() }
                });
                let sv: Vec<String> = c.singular_values.iter().map(|s| format!("{s:.4e}")).collect();
                writeln!(out, "{i}\t{}\t{}\t{lm}\t{}", c.frequency, c.rank, sv.join(" "))?;
            }
        }
    }
    Ok(())
}

fn cmd_experiment_run(
    config: Option<&Path>,
    profile: &str,
    dir: &Path,
    seed: Option<u64>,
    fmt: Format,
    out: &mut impl Write,
) -> CliResult {
    let mut cfg = load_config(config, profile)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    fs::create_dir_all(dir)?;
    let text = toml::to_string(&cfg).map_err(|e| Failure::Computation(e.to_string()))?;
    fs::write(dir.join("config.toml"), text)?;
    let runs = training::run_experiment(&cfg)?;
    training::write_runs_csv(&runs, fs::File::create(dir.join("runs.csv"))?)?;
    let census = training::census(&runs, &cfg)?;
    report_census(&runs, &census, &cfg, dir, fmt, out)
}

fn cmd_experiment_census(dir: &Path, fmt: Format, out: &mut impl Write) -> CliResult {
    let cfg = load_config(Some(&dir.join("config.toml")), "full")?;
    let file = fs::File::open(dir.join("runs.csv"))
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", dir.join("runs.csv").display())))?;
    let runs = training::read_runs_csv(file)?;
    let census = training::census(&runs, &cfg)?;
    report_census(&runs, &census, &cfg, dir, fmt, out)
}

fn cmd_known(arch: &Architecture, fmt: Format, out: &mut impl Write) -> CliResult {
    let facts = catalog::lookup_all(arch);
    match fmt {
        Format::Json => write_json(out, &json!({ "arch": arch.to_string(), "facts": facts }))?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                source: String,
                dim: Option<usize>,
                edim: usize,
                ambient: usize,
                filling: Option<bool>,
                manifold_equals_variety: Option<bool>,
                normalized: Option<String>,
                note: Option<String>,
            }
            let rows: Vec<Row> = facts
                .iter()
                .map(|f| Row {
                    source: f.source.to_string(),
                    dim: f.dim,
                    edim: f.edim,
                    ambient: f.ambient,
                    filling: f.filling,
                    manifold_equals_variety: f.manifold_equals_variety.map(|c| c.value),
                    normalized: f.normalized.as_ref().map(|a| a.to_string()),
                    note: f.note.clone(),
                })
                .collect();
            write_csv(out, &format!("known {arch}"), &rows)?;
        }
        Format::Text => {
            writeln!(out, "# known {arch}")?;
            if facts.is_empty() {
                writeln!(out, "no known fact")?;
            }
            for f in &facts {
                let dim = f.dim.map_or("?".to_string(), |d| d.to_string());
                write!(out, "[{}] dim {dim} edim {} ambient {}", f.source, f.edim, f.ambient)?;
                if let Some(fill) = f.filling {
                    write!(out, " filling {fill}")?;
                }
                if let Some(c) = f.manifold_equals_variety {
                    write!(out, " M=V {} ({:?})", if c.value { "yes" } else { "no" }, c.confidence)?;
                }
                if let Some(n) = &f.normalized {
                    write!(out, " normalized {n}")?;
                }
                writeln!(out)?;
                if let Some(n) = &f.note {
                    writeln!(out, "  {n}")?;
                }
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Table1Row {
    arch: String,
    r: u32,
    dim: usize,
    edim: usize,
    ambient: usize,
    filling: bool,
    table_dim: usize,
    table_edim: usize,
    table_ambient: usize,
    matches: bool,
}

fn cmd_table1(a: RankArgs, fmt: Format, out: &mut impl Write) -> CliResult {
    let opts = a.options();
    let mut rows = Vec::new();
    for (arch, t) in catalog::table1_architectures().iter().zip(catalog::TABLE1.iter()) {
        let rep = dimension::neurovariety_dim(arch, &opts)?;
        let row = SweepRow::from(&rep);
        rows.push(Table1Row {
            arch: row.arch,
            r: row.r,
            dim: rep.dim,
            edim: rep.edim,
            ambient: rep.ambient,
            filling: rep.filling,
            table_dim: t.3,
            table_edim: t.4,
            table_ambient: t.5,
            matches: (rep.dim, rep.edim, rep.ambient) == (t.3, t.4, t.5),
        });
    }
    let header = format!("table1 {}", a.header());
    match fmt {
        Format::Json => write_json(out, &json!({ "header": header, "seed": a.seed, "rows": rows }))?,
        _ => write_csv(out, &header, &rows)?,
    }
    let bad: Vec<&str> = rows.iter().filter(|r| !r.matches).map(|r| r.arch.as_str()).collect();
    if !bad.is_empty() {
        return Err(Failure::Mismatch(format!("rows differing from the table: {}", bad.join(", "))));
    }
    Ok(())
}
