//! `lru-irm`: machine-readable tables for exact LRU / move-to-front analysis
//! under the independent reference model.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a failing property, 2 on
//! invalid input or configuration.

mod table;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lru_irm::{
    estimate_hit_rate_stationary, hit_rate_pair_square, hit_rate_residual, kernel_split,
    master_identity_derivative, pair_kernel_matrix, phi_psi_quadrature, radial_derivative,
    run_verification, search_cost_distribution, simulate_mtf_chain, ModelParams,
    PopularityVector, QuadratureConfig, SimConfig, VerifyTier,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use table::{Cell, Table};

/// Environment variable naming the default directory for relative `--output`
/// paths.
const OUTPUT_DIR_VAR: &str = "LRU_IRM_OUTPUT_DIR";

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lru-irm",
    version,
    about = "Exact stationary LRU / move-to-front analysis under independent requests",
    after_help = "Popularity sources (exactly one): --p 0.5,0.3,0.2 | --p uniform --n 4 | \
                  --p-file FILE | --zipf N,S. Item indices and depths in tables are 1-based."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Table format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Write the table here instead of stdout. Relative paths resolve under
    /// $LRU_IRM_OUTPUT_DIR when that variable is set.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Hit rate of one (popularity, capacity) instance by every exact route.
    Hitrate {
        #[command(flatten)]
        source: SourceArgs,
        /// Cache capacity C.
        #[arg(long)]
        capacity: usize,
        /// Also run the N!-permutation oracle (N <= 9).
        #[arg(long)]
        brute_force: bool,
    },

    /// Hit rate and both radial-derivative formulas along a theta grid.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        capacity: usize,
        /// Strictly increasing grid of theta values in [0, 1], e.g. 0,0.5,1.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[command(flatten)]
        quad: QuadArgs,
    },

    /// Per-pair coefficients J_ab, kernels K_ab, and their splits, with
    /// quadrature cross-checks.
    Kernel {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        capacity: usize,
        #[command(flatten)]
        quad: QuadArgs,
    },

    /// Per-pair breakdown of the radial derivative at one theta.
    Derivative {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        capacity: usize,
        /// Ray position in [0, 1].
        #[arg(long)]
        theta: f64,
    },

    /// Exact search-cost distribution with an expected-cost footer.
    Searchcost {
        #[command(flatten)]
        source: SourceArgs,
    },

    /// Seeded stochastic estimates from the stationary sampler and the
    /// move-to-front chain.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        capacity: usize,
        #[command(flatten)]
        sim: SimArgs,
        /// Which estimator(s) to run.
        #[arg(long, value_enum, default_value_t = SimMethod::Both)]
        method: SimMethod,
    },

    /// Run the full invariant suite and report pass/fail per property.
    Verify {
        /// quick finishes in seconds; full takes minutes and includes the
        /// exact-rational cross-check at larger N.
        #[arg(long, value_enum, default_value_t = TierArg::Quick)]
        tier: TierArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap every item count in the suite.
        #[arg(long)]
        max_n: Option<usize>,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Inline popularity list ("0.5,0.3,0.2") or the word "uniform"
    /// (requires --n). For ray commands this is the endpoint q.
    #[arg(long, visible_alias = "q")]
    p: Option<String>,

    /// File with one probability per line (# comments allowed), or JSON
    /// {"probs": [...]} when the extension is .json.
    #[arg(long, visible_alias = "q-file")]
    p_file: Option<PathBuf>,

    /// Zipf popularity "N,S": N items with weight i^-S.
    #[arg(long)]
    zipf: Option<String>,

    /// Item count for --p uniform.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct QuadArgs {
    /// Base order of the exponentially weighted t-integrals.
    #[arg(long, default_value_t = 32)]
    t_order: usize,
    /// Order of the fixed y-integral on [0, 1].
    #[arg(long, default_value_t = 32)]
    y_order: usize,
    /// Maximum number of order doublings while refining.
    #[arg(long, default_value_t = 6)]
    refine_limit: usize,
    /// Refinement agreement tolerance.
    #[arg(long, default_value_t = 1e-9)]
    quad_tolerance: f64,
}

impl QuadArgs {
    fn config(&self) -> QuadratureConfig {
        QuadratureConfig {
            t_order: self.t_order,
            y_order: self.y_order,
            refine_limit: self.refine_limit,
            tolerance: self.quad_tolerance,
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stationary-stack draws.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Recorded chain requests per replica.
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    /// Chain warm-up; defaults to the 50*N*max(p)/min(p) heuristic.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            samples: self.samples,
            steps: self.steps,
            burn_in: self.burn_in,
            replicas: self.replicas,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMethod {
    Stationary,
    Chain,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Quick,
    Full,
}

/// A user-facing failure: message plus process exit code.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_INVALID,
        }
    }
}

impl From<lru_irm::Error> for Failure {
    fn from(err: lru_irm::Error) -> Self {
        Failure::invalid(err.to_string())
    }
}

impl SourceArgs {
    fn resolve(&self) -> Result<PopularityVector, Failure> {
        let given = [
            self.p.is_some(),
            self.p_file.is_some(),
            self.zipf.is_some(),
        ]
        .iter()
        .filter(|&&g| g)
        .count();
        if given != 1 {
            return Err(Failure::invalid(
                "exactly one popularity source required: --p, --p-file, or --zipf",
            ));
        }
        if let Some(inline) = &self.p {
            if inline.trim() == "uniform" {
                let n = self
                    .n
                    .ok_or_else(|| Failure::invalid("--p uniform requires --n <items>"))?;
                return Ok(PopularityVector::uniform(n)?);
            }
            let probs =
                parse_float_list(inline).map_err(|e| Failure::invalid(format!("--p: {e}")))?;
            return Ok(PopularityVector::new(&probs)?);
        }
        if let Some(path) = &self.p_file {
            return read_popularity_file(path);
        }
        let zipf = self.zipf.as_ref().expect("one source is set");
        let (n, s) = zipf
            .split_once(',')
            .ok_or_else(|| Failure::invalid("--zipf expects N,S (e.g. 8,1.0)"))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("--zipf: bad item count {n:?}")))?;
        let s: f64 = s
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("--zipf: bad exponent {s:?}")))?;
        Ok(PopularityVector::zipf(n, s)?)
    }
}

fn parse_float_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse {piece:?} as a number"))
        })
        .collect()
}

fn read_popularity_file(path: &Path) -> Result<PopularityVector, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("--p-file {}: {e}", path.display())))?;
    if path.extension().is_some_and(|ext| ext == "json") {
        let parsed: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Failure::invalid(format!("--p-file: invalid JSON: {e}")))?;
        let probs = parsed
            .get("probs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Failure::invalid("--p-file: JSON must look like {\"probs\": [...]}"))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Failure::invalid("--p-file: probs entries must be numbers"))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        return Ok(PopularityVector::new(&probs)?);
    }
    let mut probs = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        probs.push(
            line.parse::<f64>()
                .map_err(|_| Failure::invalid(format!("--p-file: bad line {line:?}")))?,
        );
    }
    Ok(PopularityVector::new(&probs)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let (table, exit) = match &cli.command {
        Command::Hitrate {
            source,
            capacity,
            brute_force,
        } => (
            cmd_hitrate(source, *capacity, *brute_force)?,
            ExitCode::SUCCESS,
        ),
        Command::Sweep {
            source,
            capacity,
            grid,
            quad,
        } => (
            cmd_sweep(source, *capacity, grid, &quad.config())?,
            ExitCode::SUCCESS,
        ),
        Command::Kernel {
            source,
            capacity,
            quad,
        } => (
            cmd_kernel(source, *capacity, &quad.config())?,
            ExitCode::SUCCESS,
        ),
        Command::Derivative {
            source,
            capacity,
            theta,
        } => (cmd_derivative(source, *capacity, *theta)?, ExitCode::SUCCESS),
        Command::Searchcost { source } => (cmd_searchcost(source)?, ExitCode::SUCCESS),
        Command::Simulate {
            source,
            capacity,
            sim,
            method,
        } => (
            cmd_simulate(source, *capacity, &sim.config(), *method)?,
            ExitCode::SUCCESS,
        ),
        Command::Verify { tier, seed, max_n } => cmd_verify(*tier, *seed, *max_n),
    };
    emit(cli, &table)?;
    Ok(exit)
}

fn params_for(p: &PopularityVector, capacity: usize) -> Result<ModelParams, Failure> {
    Ok(ModelParams::new(p.len(), capacity)?)
}

fn cmd_hitrate(source: &SourceArgs, capacity: usize, brute: bool) -> Result<Table, Failure> {
    let p = source.resolve()?;
    let params = params_for(&p, capacity)?;
    let mut table = Table::new(&["method", "n_items", "capacity", "hit_rate"]);
    let mut push = |method: &str, value: f64| {
        table.push_row(vec![
            Cell::Text(method.into()),
            Cell::Int(p.len() as i64),
            Cell::Int(capacity as i64),
            Cell::Float(value),
        ]);
    };
    let residual = hit_rate_residual(&p, &params)?;
    push("residual", residual.value);
    let pair = hit_rate_pair_square(&p, &params)?;
    push("pair_square", pair.value);
    if brute {
        let oracle = lru_irm::brute_force_hit_rate(&p, &params)?;
        push("brute_force", oracle.value);
    }
    if residual.full_capacity {
        table.push_meta("full_capacity", Cell::Bool(true));
    }
    Ok(table)
}

fn validate_grid(grid: &[f64]) -> Result<(), Failure> {
    if grid.is_empty() {
        return Err(Failure::invalid("--grid needs at least one theta"));
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Failure::invalid("--grid must be strictly increasing"));
        }
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Failure::invalid("--grid values must lie in [0, 1]"));
    }
    Ok(())
}

fn cmd_sweep(
    source: &SourceArgs,
    capacity: usize,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<Table, Failure> {
    let q = source.resolve()?;
    let params = params_for(&q, capacity)?;
    validate_grid(grid)?;
    let ray = lru_irm::RayPath::new(q.clone());
    let mut table = Table::new(&["theta", "hit_rate", "derivative", "master_derivative"]);
    let mut warned = false;
    for &theta in grid {
        let point = ray.at(theta)?;
        let hit = hit_rate_residual(&point, &params)?;
        let report = radial_derivative(&q, theta, &params)?;
        if report.poorly_conditioned && !warned {
            warn_conditioning();
            warned = true;
        }
        // The master route carries a 1/theta factor; its theta -> 0 limit is
        // 0, matching the kernel route.
        let master = if theta == 0.0 {
            0.0
        } else {
            master_identity_derivative(&q, theta, &params, quad)?.derivative
        };
        table.push_row(vec![
            Cell::Float(theta),
            Cell::Float(hit.value),
            Cell::Float(report.derivative),
            Cell::Float(master),
        ]);
    }
    Ok(table)
}

fn warn_conditioning() {
    eprintln!(
        "warning: popularity entries below {:.0e}; kernel values may be ill-conditioned",
        lru_irm::kernel::CONDITIONING_MIN_PROB
    );
}

fn cmd_kernel(
    source: &SourceArgs,
    capacity: usize,
    quad: &QuadratureConfig,
) -> Result<Table, Failure> {
    let p = source.resolve()?;
    let params = params_for(&p, capacity)?;
    let matrix = pair_kernel_matrix(&p, &params)?;
    if matrix.poorly_conditioned {
        warn_conditioning();
    }
    let mut table = Table::new(&["a", "b", "j", "k", "phi", "psi", "phi_quad", "psi_quad"]);
    for (a, b) in matrix.pairs() {
        let split = kernel_split(&p, &params, a, b)?;
        let (phi_quad, psi_quad) = phi_psi_quadrature(&p, &params, a, b, quad)?;
        table.push_row(vec![
            Cell::Int(a as i64 + 1),
            Cell::Int(b as i64 + 1),
            Cell::Float(matrix.j(a, b)),
            Cell::Float(matrix.k(a, b)),
            Cell::Float(split.phi),
            Cell::Float(split.psi),
            Cell::Float(phi_quad),
            Cell::Float(psi_quad),
        ]);
    }
    Ok(table)
}

fn cmd_derivative(source: &SourceArgs, capacity: usize, theta: f64) -> Result<Table, Failure> {
    let q = source.resolve()?;
    let params = params_for(&q, capacity)?;
    let report = radial_derivative(&q, theta, &params)?;
    let mut table = Table::new(&["a", "b", "pair_term"]);
    for &(a, b, term) in &report.pair_terms {
        table.push_row(vec![
            Cell::Int(a as i64 + 1),
            Cell::Int(b as i64 + 1),
            Cell::Float(term),
        ]);
    }
    table.push_meta("theta", Cell::Float(theta));
    table.push_meta("derivative", Cell::Float(report.derivative));
    if report.poorly_conditioned {
        table.push_meta("poorly_conditioned", Cell::Bool(true));
    }
    Ok(table)
}

fn cmd_searchcost(source: &SourceArgs) -> Result<Table, Failure> {
    let p = source.resolve()?;
    let dist = search_cost_distribution(&p)?;
    let mut table = Table::new(&["depth", "cdf", "pmf"]);
    for (idx, (&cdf, &pmf)) in dist.cdf.iter().zip(&dist.pmf).enumerate() {
        table.push_row(vec![
            Cell::Int(idx as i64 + 1),
            Cell::Float(cdf),
            Cell::Float(pmf),
        ]);
    }
    table.push_meta("expected_cost", Cell::Float(dist.mean()));
    Ok(table)
}

fn cmd_simulate(
    source: &SourceArgs,
    capacity: usize,
    cfg: &SimConfig,
    method: SimMethod,
) -> Result<Table, Failure> {
    let p = source.resolve()?;
    let params = params_for(&p, capacity)?;
    let mut table = Table::new(&[
        "method",
        "hit_rate_estimate",
        "std_error",
        "samples_used",
        "burn_in_used",
    ]);
    let mut push = |name: &str, result: &lru_irm::SimResult| {
        table.push_row(vec![
            Cell::Text(name.into()),
            Cell::Float(result.hit_rate_estimate),
            Cell::Float(result.std_error),
            Cell::Int(result.samples_used as i64),
            Cell::Int(result.burn_in_used as i64),
        ]);
    };
    if matches!(method, SimMethod::Stationary | SimMethod::Both) {
        let result = estimate_hit_rate_stationary(&p, &params, cfg)?;
        push("stationary", &result);
    }
    if matches!(method, SimMethod::Chain | SimMethod::Both) {
        let result = simulate_mtf_chain(&p, &params, cfg)?;
        push("chain", &result);
        if cfg.burn_in.is_none() {
            table.push_meta("burn_in_heuristic", Cell::Bool(true));
        }
    }
    if p.len() <= lru_irm::exact::DEFAULT_EXACT_CAP {
        let exact = hit_rate_residual(&p, &params)?;
        table.push_meta("exact_hit_rate", Cell::Float(exact.value));
    }
    Ok(table)
}

fn cmd_verify(tier: TierArg, seed: u64, max_n: Option<usize>) -> (Table, ExitCode) {
    let tier = match tier {
        TierArg::Quick => VerifyTier::Quick,
        TierArg::Full => VerifyTier::Full,
    };
    let results = run_verification(tier, seed, max_n);
    let mut table = Table::new(&["property", "passed", "detail"]);
    let mut all_passed = true;
    for result in &results {
        all_passed &= result.passed;
        table.push_row(vec![
            Cell::Text(result.name.into()),
            Cell::Bool(result.passed),
            Cell::Text(result.detail.clone()),
        ]);
    }
    table.push_meta("seed", Cell::Int(seed as i64));
    table.push_meta("all_passed", Cell::Bool(all_passed));
    let exit = if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    };
    (table, exit)
}

fn emit(cli: &Cli, table: &Table) -> Result<(), Failure> {
    let rendered = match cli.format {
        OutputFormat::Csv => table.render_csv(),
        OutputFormat::Json => table.render_json(),
    };
    match &cli.output {
        None => {
            print!("{rendered}");
            Ok(())
        }
        Some(path) => {
            let path = resolve_output_path(path);
            std::fs::write(&path, rendered)
                .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
        }
    }
}

fn resolve_output_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_VAR) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}
