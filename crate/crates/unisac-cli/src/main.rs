//! Experiment driver: array search and verification sweeps over the
//! unsourced ISAC performance-limit library, with deterministic CSV output.
//!
//! Every subcommand reads one declarative configuration (defaults match the
//! reference operating point), applies flag overrides, and emits a table to
//! stdout and optionally to `--out <dir>/<subcommand>.csv`. Fixed seed and
//! thread-count-independent reductions make reruns byte-identical.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rand::Rng;
use std::path::PathBuf;
use unisac_cli::config::{ChannelSection, ExperimentConfig, GainMode};
use unisac_cli::table::{fnv1a64, Cell, ResultTable};
use unisac::bounds::{
    binding_constraint, detection_oracle, min_energy_achievable, p_ks_kc, BoundsError, GainScope,
    PowerAssignment, SystemConfig,
};
use unisac::channel::{avg_channel_gain, ChannelError, ChannelMode, ChannelParams};
use unisac::floor::{min_energy_floor, FloorConfig, FloorError};
use unisac::mra::{check_mra, expected_index_gap, known_patterns, mra_search, MraError, PortPattern};
use unisac::numerics::linalg::LinalgError;
use unisac::numerics::rng::RandomStream;
use unisac::sensing::{
    build_codebook, cosamp_solve, lasso_error_bound, mp_solve, observe_expectation, romp_solve,
    SensingCodebook, SensingError, SparseEstimate,
};
use unisac::Cx;

/// Experiment identifiers feeding the per-call-site substream convention;
/// sweep indices are added so no two Monte Carlo call sites share a stream.
const EXP_GAIN: u32 = 0x1000;
const EXP_SENSE: u32 = 0x2000;
const EXP_ACHIEVABLE: u32 = 0x3000;
const EXP_ANTENNAS: u32 = 0x4000;
const EXP_FLOOR: u32 = 0x5000;
const EXP_ORACLE: u32 = 0x6000;

#[derive(Debug, Parser)]
#[command(name = "unisac", version, about = "Performance limits of fluid-antenna unsourced ISAC")]
struct Cli {
    /// Path to a TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override; wins over UNISAC_SEED and the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo reductions (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving `<subcommand>.csv` in addition to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Search or verify minimum-redundancy port patterns.
    Mra {
        /// Number of activated ports.
        #[arg(long)]
        m: usize,
        /// Aperture cap for the exhaustive search.
        #[arg(long)]
        cap: Option<u32>,
        /// Search even when stored patterns exist (slow for large m).
        #[arg(long)]
        full_search: bool,
    },
    /// Measure the averaged port-selection gain of the fluid surface.
    Gain {
        /// Antenna counts, `lo:hi:step` or comma list.
        #[arg(long)]
        m: Option<String>,
        /// Monte Carlo trials per point.
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Verify sparse-recovery error bounds on the angular codebook.
    SenseVerify {
        /// Antenna counts, `lo:hi:step` or comma list.
        #[arg(long)]
        m: Option<String>,
        /// Observation SNR points in dB; the covariance perturbation is
        /// sigma_z^2 = 10^(-snr/10).
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<String>,
        /// Seeded trials per (m, snr) point.
        #[arg(long)]
        trials: Option<u32>,
        /// Comma subset of mp,cosamp,romp.
        #[arg(long)]
        algorithms: Option<String>,
        /// Add a fixed half-wavelength-array comparison column.
        #[arg(long)]
        ula: bool,
    },
    /// Minimum energy per user meeting both targets, swept over users.
    Achievable {
        /// Total-user points, `lo:hi:step` or comma list.
        #[arg(long)]
        users: Option<String>,
        /// Active antennas.
        #[arg(long)]
        m: Option<u32>,
        /// Channel uses per block.
        #[arg(long)]
        l: Option<u32>,
        /// Array choice: fluid surface or fixed-array baseline.
        #[arg(long, value_enum)]
        gain_mode: Option<GainMode>,
        /// Targets as `pupe,mseaoa`.
        #[arg(long)]
        targets: Option<String>,
    },
    /// Minimum energy per user at fixed users, swept over antenna counts.
    Antennas {
        /// Antenna counts, `lo:hi:step` or comma list.
        #[arg(long)]
        m: Option<String>,
        /// Total users at every point.
        #[arg(long)]
        users: Option<u32>,
        /// Channel uses per block.
        #[arg(long)]
        l: Option<u32>,
        /// Array choice: fluid surface or fixed-array baseline.
        #[arg(long, value_enum)]
        gain_mode: Option<GainMode>,
        /// Targets as `pupe,mseaoa`.
        #[arg(long)]
        targets: Option<String>,
    },
    /// Optimistic energy floor from collisions, capacity, and the
    /// single-user estimation limit.
    Floor {
        /// Total-user points, `lo:hi:step` or comma list.
        #[arg(long)]
        users: Option<String>,
        /// Active antennas.
        #[arg(long)]
        m: Option<u32>,
        /// Channel uses per block.
        #[arg(long)]
        l: Option<u32>,
        /// Channel model for the capacity average.
        #[arg(long, value_enum)]
        gain_mode: Option<GainMode>,
        /// Targets as `pupe,mseaoa`.
        #[arg(long)]
        targets: Option<String>,
        /// Capacity Monte Carlo trials.
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Exhaustive-detector error frequencies against the analytic bound on
    /// a tiny enumerable configuration.
    Oracle {
        /// Trials (default 2000).
        #[arg(long)]
        trials: Option<u32>,
        /// Shared transmit power of the tiny configuration.
        #[arg(long)]
        power: Option<f64>,
        /// Blocklength of the tiny configuration.
        #[arg(long)]
        l: Option<u32>,
    },
}

#[derive(Debug)]
enum RunError {
    /// Bad configuration or flags; exit 3.
    Config(String),
    /// A feasibility search refused; exit 2 with the binding constraint.
    Infeasible(String),
    /// Runtime failure (I/O, numerics); exit 1.
    Failure(String),
}

impl RunError {
    fn code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Infeasible(_) => 2,
            RunError::Failure(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Infeasible(m) | RunError::Failure(m) => m,
        }
    }
}

impl From<BoundsError> for RunError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Infeasible { .. } | BoundsError::CollisionFloor { .. } => {
                RunError::Infeasible(e.to_string())
            }
            BoundsError::Config(_) => RunError::Config(e.to_string()),
            _ => RunError::Failure(e.to_string()),
        }
    }
}

impl From<FloorError> for RunError {
    fn from(e: FloorError) -> Self {
        match e {
            FloorError::CollisionFloor { .. } | FloorError::CapacityInfeasible => {
                RunError::Infeasible(e.to_string())
            }
            FloorError::Config(_) => RunError::Config(e.to_string()),
            FloorError::Bounds(inner) => RunError::from(inner),
            _ => RunError::Failure(e.to_string()),
        }
    }
}

impl From<MraError> for RunError {
    fn from(e: MraError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<SensingError> for RunError {
    fn from(e: SensingError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<ChannelError> for RunError {
    fn from(e: ChannelError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<LinalgError> for RunError {
    fn from(e: LinalgError) -> Self {
        RunError::Failure(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };

    cfg.mc.seed = match (cli.seed, std::env::var("UNISAC_SEED")) {
        (Some(s), _) => s,
        (None, Ok(v)) => v
            .parse::<u64>()
            .map_err(|_| RunError::Config("UNISAC_SEED must be an unsigned integer".into()))?,
        (None, Err(_)) => cfg.mc.seed,
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(RunError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Failure(format!("thread pool: {e}")))?;
    }

    if cli.dump_config {
        print!("{}", cfg.canonical());
        return Ok(());
    }

    let command = cli
        .command
        .ok_or_else(|| RunError::Config("a subcommand is required; see --help".into()))?;
    let stream = RandomStream::new(cfg.mc.seed);

    let (name, mut table) = match &command {
        Cmd::Mra { m, cap, full_search } => ("mra", run_mra(*m, *cap, *full_search)?),
        Cmd::Gain { m, trials } => ("gain", run_gain(&cfg, m, *trials, stream)?),
        Cmd::SenseVerify { m, snr_db, trials, algorithms, ula } => {
            ("sense-verify", run_sense_verify(&cfg, m, snr_db, *trials, algorithms, *ula, stream)?)
        }
        Cmd::Achievable { users, m, l, gain_mode, targets } => {
            ("achievable", run_achievable(&cfg, users, *m, *l, *gain_mode, targets, stream)?)
        }
        Cmd::Antennas { m, users, l, gain_mode, targets } => {
            ("antennas", run_antennas(&cfg, m, *users, *l, *gain_mode, targets, stream)?)
        }
        Cmd::Floor { users, m, l, gain_mode, targets, trials } => {
            ("floor", run_floor(&cfg, users, *m, *l, *gain_mode, targets, *trials, stream)?)
        }
        Cmd::Oracle { trials, power, l } => ("oracle", run_oracle(*trials, *power, *l, stream)?),
    };

    table.meta("config_hash", format!("{:016x}", fnv1a64(cfg.canonical().as_bytes())));
    table.meta("seed", cfg.mc.seed.to_string());
    table.meta("version", env!("CARGO_PKG_VERSION"));
    let text = table.render();
    print!("{text}");
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| RunError::Failure(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, &text)
            .map_err(|e| RunError::Failure(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Parses `lo:hi:step`, a comma list, or a single value.
fn parse_points_f64(spec: &str, what: &str) -> Result<Vec<f64>, RunError> {
    let bad = |m: String| RunError::Config(format!("{what}: {m}"));
    let num =
        |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("cannot parse '{}'", s.trim())));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:step".into()));
        }
        let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if hi < lo {
            return Err(bad("upper end below lower end".into()));
        }
        if lo == hi {
            return Ok(vec![lo]);
        }
        if !(step > 0.0) {
            return Err(bad("step must be positive".into()));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| lo + i as f64 * step).collect());
    }
    let points: Result<Vec<f64>, RunError> = spec.split(',').map(|s| num(s)).collect();
    let points = points?;
    if points.is_empty() {
        return Err(bad("empty point list".into()));
    }
    Ok(points)
}

fn parse_points_u32(spec: &str, what: &str) -> Result<Vec<u32>, RunError> {
    let points = parse_points_f64(spec, what)?;
    points
        .into_iter()
        .map(|x| {
            if x.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&x) {
                Ok(x as u32)
            } else {
                Err(RunError::Config(format!("{what}: '{x}' is not a nonnegative integer")))
            }
        })
        .collect()
}

fn parse_targets(spec: &Option<String>, cfg: &ExperimentConfig) -> Result<(f64, f64), RunError> {
    match spec {
        None => Ok((cfg.targets.pupe, cfg.targets.mseaoa)),
        Some(s) => {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 2 {
                return Err(RunError::Config("targets: expected 'pupe,mseaoa'".into()));
            }
            let p = parts[0]
                .trim()
                .parse::<f64>()
                .map_err(|_| RunError::Config(format!("targets: cannot parse '{}'", parts[0])))?;
            let m = parts[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| RunError::Config(format!("targets: cannot parse '{}'", parts[1])))?;
            Ok((p, m))
        }
    }
}

/// Splits a total user count by the configured class ratio.
fn split_users(total: u32, base_c: u32, base_s: u32) -> (u32, u32) {
    let denom = base_c as u64 + base_s as u64;
    let c = (((total as u64) * (base_c as u64) + denom / 2) / denom) as u32;
    let c = c.min(total);
    (c, total - c)
}

fn surface_span(m: usize) -> f64 {
    (m as f64 - 1.0) / 2.0
}

/// First stored minimum-redundancy pattern for `m` active ports.
fn fas_pattern(m: usize) -> Result<PortPattern, RunError> {
    let list = known_patterns(m).ok_or_else(|| {
        RunError::Config(format!(
            "no stored port pattern for {m} antennas (stored: 3, 5, 7, 9, 10, 11)"
        ))
    })?;
    Ok(PortPattern::new(list[0].to_vec())?)
}

fn fas_params(ch: &ChannelSection, m: usize) -> Result<ChannelParams, RunError> {
    let pattern = fas_pattern(m)?;
    Ok(ChannelParams {
        ports: pattern.aperture() as usize + 1,
        aperture: surface_span(m),
        rice_k: ch.rice_k,
        scatterers: ch.scatterers as usize,
        omega: ch.omega,
    })
}

/// Averaged per-port energy gain of optimal port selection.
fn measured_gain(
    ch: &ChannelSection,
    m: usize,
    trials: u32,
    stream: RandomStream,
) -> Result<f64, RunError> {
    let params = fas_params(ch, m)?;
    Ok(avg_channel_gain(&params, m, trials, stream)?.mean)
}

/// One operating point: the fluid surface runs its stored pattern over the
/// full port set, the baseline runs the filled array; both span the same
/// physical aperture.
fn build_system(
    cfg: &ExperimentConfig,
    m: usize,
    mode: GainMode,
    users_c: u32,
    users_s: u32,
    blocklength: u32,
    gain: f64,
    with_sensing: bool,
) -> Result<SystemConfig, RunError> {
    if m < 2 {
        return Err(RunError::Config("need at least 2 antennas".into()));
    }
    let (pattern, ports) = match mode {
        GainMode::Fas => {
            let p = fas_pattern(m)?;
            let ports = p.aperture() + 1;
            (p, ports)
        }
        GainMode::Los => (PortPattern::ula(m), m as u32),
    };
    let sys = SystemConfig {
        bits_c: cfg.system.bits_c,
        bits_s: cfg.system.bits_s,
        users_c,
        users_s,
        blocklength,
        noise_var: cfg.system.noise_var,
        pattern,
        surface_w: surface_span(m),
        ports,
        gain,
        gain_scope: GainScope::Both,
        gamma_max: 0.0,
        lambda_bar_sq: 0.0,
    };
    if with_sensing {
        Ok(sys.with_sensing_constants(cfg.sensing.grid as usize)?)
    } else {
        Ok(sys)
    }
}

fn fmt_pattern(p: &PortPattern) -> String {
    let inner: Vec<String> = p.indices().iter().map(|i| i.to_string()).collect();
    format!("[{}]", inner.join(","))
}

fn run_mra(m: usize, cap: Option<u32>, full_search: bool) -> Result<ResultTable, RunError> {
    let stored = known_patterns(m);
    let patterns: Vec<PortPattern> = if m >= 9 && !full_search {
        let list = stored.ok_or_else(|| {
            RunError::Config(format!(
                "no stored pattern for {m} elements; pass --full-search to search"
            ))
        })?;
        list.iter()
            .map(|idx| PortPattern::new(idx.to_vec()).map_err(RunError::from))
            .collect::<Result<_, _>>()?
    } else {
        let cap = cap.unwrap_or_else(|| match stored {
            Some(list) => *list[0].last().expect("stored patterns are nonempty"),
            None => (m * m.saturating_sub(1) / 2) as u32,
        });
        mra_search(m, cap)?
    };
    let mut t = ResultTable::new(&["pattern", "aperture", "gap"]);
    for p in &patterns {
        if !check_mra(p) {
            eprintln!(
                "warning: stored pattern {} fails the difference-coarray checks",
                fmt_pattern(p)
            );
        }
        t.push(vec![
            Cell::text(fmt_pattern(p)),
            Cell::Int(p.aperture() as u64),
            Cell::Real(expected_index_gap(p)),
        ]);
    }
    Ok(t)
}

fn run_gain(
    cfg: &ExperimentConfig,
    m_spec: &Option<String>,
    trials: Option<u32>,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let spec = m_spec.clone().or_else(|| cfg.sweep.m.clone());
    let ms = match spec {
        Some(s) => parse_points_u32(&s, "--m")?,
        None => vec![cfg.system.antennas],
    };
    let trials = trials.unwrap_or(cfg.mc.trials);
    let mut t = ResultTable::new(&["m", "ports", "trials", "gain_mean", "gain_stderr"]);
    for (i, &m) in ms.iter().enumerate() {
        let params = fas_params(&cfg.channel, m as usize)?;
        let est = avg_channel_gain(
            &params,
            m as usize,
            trials,
            stream.substream(EXP_GAIN + i as u32, 0),
        )?;
        t.push(vec![
            Cell::Int(m as u64),
            Cell::Int(params.ports as u64),
            Cell::Int(trials as u64),
            Cell::Real(est.mean),
            Cell::Real(est.std_err),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Algo {
    Mp,
    Cosamp,
    Romp,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Mp => "mp",
            Algo::Cosamp => "cosamp",
            Algo::Romp => "romp",
        }
    }

    fn parse_list(spec: &Option<String>) -> Result<Vec<Algo>, RunError> {
        let all = [Algo::Mp, Algo::Cosamp, Algo::Romp];
        match spec {
            None => Ok(all.to_vec()),
            Some(s) => s
                .split(',')
                .map(|tok| match tok.trim() {
                    "mp" => Ok(Algo::Mp),
                    "cosamp" => Ok(Algo::Cosamp),
                    "romp" => Ok(Algo::Romp),
                    other => {
                        Err(RunError::Config(format!("unknown algorithm '{other}'")))
                    }
                })
                .collect(),
        }
    }

    fn solve(self, book: &SensingCodebook, v: &[Cx]) -> Result<SparseEstimate, RunError> {
        Ok(match self {
            Algo::Mp => mp_solve(book, v, 1, 1)?,
            Algo::Cosamp => cosamp_solve(book, v, 1, 6)?,
            Algo::Romp => romp_solve(book, v, 1, 4)?,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sense_verify(
    cfg: &ExperimentConfig,
    m_spec: &Option<String>,
    snr_spec: &Option<String>,
    trials: Option<u32>,
    algorithms: &Option<String>,
    ula: bool,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let ms = match m_spec.clone().or_else(|| cfg.sweep.m.clone()) {
        Some(s) => parse_points_u32(&s, "--m")?,
        None => vec![cfg.system.antennas],
    };
    let snrs = match snr_spec.clone().or_else(|| cfg.sweep.snr_db.clone()) {
        Some(s) => parse_points_f64(&s, "--snr-db")?,
        None => parse_points_f64("-10:20:5", "--snr-db")?,
    };
    let trials = trials.unwrap_or(cfg.mc.trials);
    let algos = Algo::parse_list(algorithms)?;
    let grid = cfg.sensing.grid as usize;

    let mut columns = vec!["algorithm", "m", "snr_db", "trial", "err_l2", "bound"];
    if ula {
        columns.push("err_l2_ula");
    }
    let mut t = ResultTable::new(&columns);

    for (mi, &m) in ms.iter().enumerate() {
        let m = m as usize;
        let pattern = fas_pattern(m)?;
        let ports = pattern.aperture() as usize + 1;
        let book = build_codebook(&pattern, ports, surface_span(m), grid)?;
        let ula_book = if ula {
            Some(build_codebook(&PortPattern::ula(m), m, surface_span(m), grid)?)
        } else {
            None
        };
        for (si, &snr) in snrs.iter().enumerate() {
            let point = (mi * snrs.len() + si) as u32;
            let sigma_z2 = 10f64.powf(-snr / 10.0);
            let bound = lasso_error_bound(sigma_z2, m);
            for trial in 0..trials {
                let mut rng = stream.substream(EXP_SENSE + point, trial).rng();
                let target = rng.gen_range(0..book.len());
                let truth = [(target, Cx::new(1.0, 0.0))];
                let v = observe_expectation(&book, target, 1.0, sigma_z2)?;
                let v_ula = match &ula_book {
                    Some(b) => Some(observe_expectation(b, target, 1.0, sigma_z2)?),
                    None => None,
                };
                for &algo in &algos {
                    let est = algo.solve(&book, &v)?;
                    let mut row = vec![
                        Cell::text(algo.name()),
                        Cell::Int(m as u64),
                        Cell::Real(snr),
                        Cell::Int(trial as u64),
                        Cell::Real(est.recovery_error_l2(&truth)),
                        Cell::Real(bound),
                    ];
                    if let (Some(b), Some(v2)) = (&ula_book, &v_ula) {
                        let est2 = algo.solve(b, v2)?;
                        row.push(Cell::Real(est2.recovery_error_l2(&truth)));
                    }
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_achievable(
    cfg: &ExperimentConfig,
    users_spec: &Option<String>,
    m: Option<u32>,
    l: Option<u32>,
    gain_mode: Option<GainMode>,
    targets: &Option<String>,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let points = match users_spec.clone().or_else(|| cfg.sweep.users.clone()) {
        Some(s) => parse_points_u32(&s, "--users")?,
        None => vec![cfg.system.users_c + cfg.system.users_s],
    };
    let m = m.unwrap_or(cfg.system.antennas) as usize;
    let l = l.unwrap_or(cfg.system.blocklength);
    let mode = gain_mode.unwrap_or(cfg.channel.mode);
    let (pupe_t, mse_t) = parse_targets(targets, cfg)?;
    let gain = match mode {
        GainMode::Los => 1.0,
        GainMode::Fas => {
            measured_gain(&cfg.channel, m, cfg.mc.trials, stream.substream(EXP_ACHIEVABLE, 0))?
        }
    };

    let mut t = ResultTable::new(&[
        "users",
        "e_n0_db",
        "eps_cons",
        "eps_coll",
        "eps_md",
        "mseaoa_bound",
        "binding_constraint",
    ]);
    for &total in &points {
        let (uc, us) = split_users(total, cfg.system.users_c, cfg.system.users_s);
        let sys = build_system(cfg, m, mode, uc, us, l, gain, true)?;
        let (_, b) = min_energy_achievable(&sys, pupe_t, mse_t)
            .map_err(|e| at_point(RunError::from(e), "users", total as u64))?;
        t.push(vec![
            Cell::Int(total as u64),
            Cell::Real(b.e_n0_db),
            Cell::Real(b.eps_cons),
            Cell::Real(b.eps_coll),
            Cell::Real(b.eps_md),
            Cell::Real(b.mseaoa),
            Cell::text(binding_constraint(&b, pupe_t, mse_t).to_string()),
        ]);
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_antennas(
    cfg: &ExperimentConfig,
    m_spec: &Option<String>,
    users: Option<u32>,
    l: Option<u32>,
    gain_mode: Option<GainMode>,
    targets: &Option<String>,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let ms = match m_spec.clone().or_else(|| cfg.sweep.m.clone()) {
        Some(s) => parse_points_u32(&s, "--m")?,
        None => vec![3, 5, 7, 9, 11],
    };
    let total = users.unwrap_or(cfg.system.users_c + cfg.system.users_s);
    let l = l.unwrap_or(cfg.system.blocklength);
    let mode = gain_mode.unwrap_or(cfg.channel.mode);
    let (pupe_t, mse_t) = parse_targets(targets, cfg)?;
    let (uc, us) = split_users(total, cfg.system.users_c, cfg.system.users_s);

    let mut t = ResultTable::new(&[
        "m",
        "e_n0_db",
        "eps_cons",
        "eps_coll",
        "eps_md",
        "mseaoa_bound",
        "binding_constraint",
    ]);
    for (i, &m) in ms.iter().enumerate() {
        let m = m as usize;
        let gain = match mode {
            GainMode::Los => 1.0,
            GainMode::Fas => measured_gain(
                &cfg.channel,
                m,
                cfg.mc.trials,
                stream.substream(EXP_ANTENNAS + i as u32, 0),
            )?,
        };
        let sys = build_system(cfg, m, mode, uc, us, l, gain, true)?;
        let (_, b) = min_energy_achievable(&sys, pupe_t, mse_t)
            .map_err(|e| at_point(RunError::from(e), "m", m as u64))?;
        t.push(vec![
            Cell::Int(m as u64),
            Cell::Real(b.e_n0_db),
            Cell::Real(b.eps_cons),
            Cell::Real(b.eps_coll),
            Cell::Real(b.eps_md),
            Cell::Real(b.mseaoa),
            Cell::text(binding_constraint(&b, pupe_t, mse_t).to_string()),
        ]);
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_floor(
    cfg: &ExperimentConfig,
    users_spec: &Option<String>,
    m: Option<u32>,
    l: Option<u32>,
    gain_mode: Option<GainMode>,
    targets: &Option<String>,
    trials: Option<u32>,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let points = match users_spec.clone().or_else(|| cfg.sweep.users.clone()) {
        Some(s) => parse_points_u32(&s, "--users")?,
        None => vec![cfg.system.users_c + cfg.system.users_s],
    };
    let m = m.unwrap_or(cfg.system.antennas) as usize;
    let l = l.unwrap_or(cfg.system.blocklength);
    let mode = gain_mode.unwrap_or(cfg.channel.mode);
    let (pupe_t, mse_t) = parse_targets(targets, cfg)?;
    let trials = trials.unwrap_or(cfg.mc.trials);
    let channel = match mode {
        GainMode::Fas => ChannelMode::Fluid { params: fas_params(&cfg.channel, m)?, select: m },
        GainMode::Los => ChannelMode::LosUla { elements: m },
    };

    let mut t = ResultTable::new(&[
        "users",
        "e_n0_db",
        "binding_constraint",
        "capacity_mean",
        "capacity_stderr",
    ]);
    for (i, &total) in points.iter().enumerate() {
        let (uc, us) = split_users(total, cfg.system.users_c, cfg.system.users_s);
        let system = build_system(cfg, m, mode, uc, us, l, 1.0, false)?;
        let fc = FloorConfig { system, mode: channel.clone(), capacity_trials: trials };
        let point = min_energy_floor(&fc, pupe_t, mse_t, stream.substream(EXP_FLOOR + i as u32, 0))
            .map_err(|e| at_point(RunError::from(e), "users", total as u64))?;
        t.push(vec![
            Cell::Int(total as u64),
            Cell::Real(point.e_n0_db),
            Cell::text(point.binding.to_string()),
            Cell::Real(point.capacity.mean),
            Cell::Real(point.capacity.std_err),
        ]);
    }
    Ok(t)
}

fn run_oracle(
    trials: Option<u32>,
    power: Option<f64>,
    l: Option<u32>,
    stream: RandomStream,
) -> Result<ResultTable, RunError> {
    let trials = trials.unwrap_or(2000);
    let power = power.unwrap_or(0.1);
    let l = l.unwrap_or(50);
    let sys = SystemConfig {
        bits_c: 3,
        bits_s: 3,
        users_c: 2,
        users_s: 1,
        blocklength: l,
        noise_var: 1.0,
        pattern: PortPattern::ula(2),
        surface_w: 0.5,
        ports: 2,
        gain: 1.0,
        gain_scope: GainScope::Both,
        gamma_max: 0.0,
        lambda_bar_sq: 0.0,
    };
    let powers = PowerAssignment::equal(power, 1.0)?;
    let mode = ChannelMode::LosUla { elements: 2 };
    let table = detection_oracle(&sys, &powers, &mode, trials, stream.substream(EXP_ORACLE, 0))?;

    let mut t = ResultTable::new(&["k_s", "k_c", "count", "frequency", "std_err", "bound"]);
    for k_s in 0..table.rows() {
        for k_c in 0..table.cols() {
            let bound = p_ks_kc(&sys, &powers, k_s as u32, k_c as u32)?;
            t.push(vec![
                Cell::Int(k_s as u64),
                Cell::Int(k_c as u64),
                Cell::Int(table.count(k_s, k_c) as u64),
                Cell::Real(table.frequency(k_s, k_c)),
                Cell::Real(table.std_err(k_s, k_c)),
                Cell::Real(bound),
            ]);
        }
    }
    Ok(t)
}

fn at_point(e: RunError, what: &str, value: u64) -> RunError {
    let tag = |m: &str| format!("{what} = {value}: {m}");
    match e {
        RunError::Config(m) => RunError::Config(tag(&m)),
        RunError::Infeasible(m) => RunError::Infeasible(tag(&m)),
        RunError::Failure(m) => RunError::Failure(tag(&m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing_covers_ranges_lists_and_scalars() {
        assert_eq!(parse_points_u32("100:300:100", "x").unwrap(), vec![100, 200, 300]);
        assert_eq!(parse_points_u32("100,200,400,800,1400", "x").unwrap().len(), 5);
        assert_eq!(parse_points_u32("7", "x").unwrap(), vec![7]);
        assert_eq!(parse_points_f64("0:0:1", "x").unwrap(), vec![0.0]);
        assert_eq!(
            parse_points_f64("-10:20:5", "x").unwrap(),
            vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
        );
        assert!(parse_points_u32("3:1:1", "x").is_err());
        assert!(parse_points_u32("1:9:0", "x").is_err());
        assert!(parse_points_u32("1.5", "x").is_err());
        assert!(parse_points_u32("", "x").is_err());
    }

    #[test]
    fn user_split_follows_the_configured_ratio() {
        assert_eq!(split_users(100, 50, 50), (50, 50));
        assert_eq!(split_users(1400, 50, 50), (700, 700));
        assert_eq!(split_users(90, 2, 1), (60, 30));
        assert_eq!(split_users(0, 50, 50), (0, 0));
    }

    #[test]
    fn fas_geometry_comes_from_the_stored_pattern() {
        let params = fas_params(&ChannelSection::default(), 3).unwrap();
        assert_eq!(params.ports, 4);
        assert_eq!(params.aperture, 1.0);
        assert!(fas_pattern(4).is_err());
    }

    #[test]
    fn algorithm_lists_parse_and_reject_unknowns() {
        let all = Algo::parse_list(&None).unwrap();
        assert_eq!(all, vec![Algo::Mp, Algo::Cosamp, Algo::Romp]);
        let two = Algo::parse_list(&Some("mp, romp".into())).unwrap();
        assert_eq!(two, vec![Algo::Mp, Algo::Romp]);
        assert!(Algo::parse_list(&Some("mp,omp".into())).is_err());
    }
}
