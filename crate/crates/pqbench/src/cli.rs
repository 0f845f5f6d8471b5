//! Command-line surface: `gen-keys`, `compute-bench`, `tls-bench`, `parse`,
//! `report`, and `full-run`.
//!
//! Option precedence is defaults, then the `PQBENCH_OUTPUT_ROOT` environment
//! variable (output root only), then the JSON config file, then flags. The
//! last line on stderr is always machine-readable:
//! `status=<ok|error> code=<...>`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compute::{self, MemoryProfileSource};
use crate::model::{
    self, builtin_registry, load_registry, BenchConfig, CpuOpRecord, HandshakeMode,
    HandshakeRecord, MemOpRecord, Operation, PartialBenchConfig, Registry, Role, SpeedRecord,
};
use crate::provider::{MockCostProfile, MockProviderFactory, ProviderFactory, Substitutions};
use crate::results::{self, FilterSet, ReportInputs, ReportOptions};
use crate::timing::{default_cycle_counter, ClockCycleCounter, CycleCounter, RealClock, TimeSource, VirtualClock};
use crate::tls;

const DEFAULT_MOCK_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "pqbench",
    version,
    about = "Benchmark harness for post-quantum KEM and signature schemes"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GlobalArgs {
    /// Label isolating this machine's results in the output tree.
    #[arg(long, global = true)]
    machine_id: Option<String>,
    /// Number of benchmark runs.
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// JSON config file mirroring the run configuration fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root (default test_data/up_results, or $PQBENCH_OUTPUT_ROOT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Algorithm registry file; the built-in registry when omitted.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Deterministic mock mode: seeded providers and a virtual clock.
    #[arg(long, global = true)]
    mock: bool,
    /// Seed for the mock provider (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// External command template with {alg}/{window}/{out} placeholders.
    #[arg(long, global = true)]
    adapter: Option<String>,
    /// Grant all capabilities to these registry algorithms.
    #[arg(long, global = true, value_delimiter = ',')]
    enable: Vec<String>,
    /// Prompt for missing testing parameters instead of using defaults.
    #[arg(long, global = true)]
    interactive: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoleArg {
    Server,
    Client,
    Standalone,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Server => Role::Server,
            RoleArg::Client => Role::Client,
            RoleArg::Standalone => Role::Standalone,
        }
    }
}

#[derive(Args, Clone, Default)]
struct TlsFlags {
    /// server or client.
    #[arg(long)]
    role: Option<RoleArg>,
    /// Peer address, host or host:control_port.
    #[arg(long)]
    peer: Option<String>,
    #[arg(long)]
    control_port: Option<u16>,
    #[arg(long)]
    data_port: Option<u16>,
    /// TLS measurement window in seconds.
    #[arg(long)]
    window: Option<f64>,
    /// Control-channel timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Run handshake tests only; skip the speed suite.
    #[arg(long)]
    skip_speed: bool,
}

#[derive(Args, Clone, Default)]
struct ComputeFlags {
    /// CPU window in seconds (default 3).
    #[arg(long)]
    cpu_window: Option<f64>,
    /// Directory of pre-captured Massif profiles instead of a live profiler.
    #[arg(long)]
    massif_fixtures: Option<PathBuf>,
    /// Profiler command template writing a Massif profile to {out}.
    #[arg(long)]
    profiler: Option<String>,
    #[arg(long)]
    skip_memory: bool,
    #[arg(long)]
    skip_cpu: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParseKind {
    Massif,
    LiboqsSpeed,
    OpensslSpeed,
    STime,
}

#[derive(Args, Clone)]
struct ParseArgs {
    #[arg(long)]
    kind: ParseKind,
    /// Raw tool output to convert.
    #[arg(long)]
    input: PathBuf,
    /// Algorithm the capture belongs to (massif, liboqs-speed).
    #[arg(long)]
    alg: Option<String>,
    /// Operation the capture belongs to (massif).
    #[arg(long)]
    op: Option<String>,
    /// Run index recorded on the converted rows.
    #[arg(long, default_value_t = 1)]
    run: u32,
    /// Signature algorithm (s-time).
    #[arg(long)]
    sig: Option<String>,
    /// KEM algorithm (s-time).
    #[arg(long)]
    kem: Option<String>,
    /// first or reuse (s-time).
    #[arg(long)]
    mode: Option<String>,
    /// Write the converted CSV here instead of stdout.
    #[arg(long)]
    out_file: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Machine directory to read records from (default <out>/<machine-id>).
    #[arg(long = "in")]
    in_dir: Option<PathBuf>,
    /// Keep the top N algorithms per criterion.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Drop non-standardised variants of standardised schemes.
    #[arg(long)]
    prefer_standardised: bool,
    /// Algorithm ids to exclude from rankings.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Pre-generate handshake certificates and keys.
    GenKeys {
        /// Credentials directory (default <out>/tls_keys).
        #[arg(long)]
        keys_dir: Option<PathBuf>,
    },
    /// CPU and memory benchmarks.
    ComputeBench {
        #[command(flatten)]
        compute: ComputeFlags,
    },
    /// Coordinated TLS handshake benchmark (and client-side speed suite).
    TlsBench {
        #[command(flatten)]
        tls: TlsFlags,
    },
    /// Convert raw external tool output into result CSVs.
    Parse {
        #[command(flatten)]
        parse: ParseArgs,
    },
    /// Average runs, rank, and write the report.
    Report {
        #[command(flatten)]
        report: ReportArgs,
    },
    /// The full pipeline for this machine's role.
    FullRun {
        #[command(flatten)]
        compute: ComputeFlags,
        #[command(flatten)]
        tls: TlsFlags,
        #[command(flatten)]
        report: ReportArgs,
    },
}

struct Failure {
    message: String,
    code: String,
    exit: i32,
}

impl Failure {
    fn user(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: "INVALID_CONFIG".into(),
            exit: 1,
        }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Failure {
        let code = e.code().to_string();
        let exit = if code == "INVALID_CONFIG" || code == "INVALID_ARGUMENT" {
            1
        } else {
            2
        };
        Failure {
            message: e.to_string(),
            code,
            exit,
        }
    }
}

/// Entry point: parse, dispatch, and print the machine-readable status line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            eprintln!("status=error code=USAGE");
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => {
            eprintln!("status=ok code=ok");
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            eprintln!("status=error code={}", f.code);
            f.exit
        }
    }
}

fn prompt(label: &str, default: &str) -> String {
    print!("{label} [{default}]: ");
    let _ = std::io::stdout().flush();
    let mut line = String::new();
    if std::io::stdin().read_line(&mut line).is_ok() {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            return trimmed.to_string();
        }
    }
    default.to_string()
}

fn build_config(global: &GlobalArgs, tls: Option<&TlsFlags>, compute: Option<&ComputeFlags>)
    -> Result<BenchConfig, Failure>
{
    let mut cfg = BenchConfig::default();
    if let Ok(root) = std::env::var("PQBENCH_OUTPUT_ROOT") {
        if !root.is_empty() {
            cfg.output_root = PathBuf::from(root);
        }
    }
    if let Some(path) = &global.config {
        PartialBenchConfig::from_file(path)
            .map_err(crate::Error::from)?
            .apply(&mut cfg);
    }

    let mut flags = PartialBenchConfig {
        machine_id: global.machine_id.clone(),
        num_runs: global.runs,
        output_root: global.out.clone(),
        ..PartialBenchConfig::default()
    };
    if let Some(t) = tls {
        flags.role = t.role.map(Role::from);
        flags.peer_address = t.peer.clone();
        flags.control_port = t.control_port;
        flags.data_port = t.data_port;
        flags.tls_window_seconds = t.window;
        flags.control_timeout_seconds = t.timeout;
        flags.max_retries = t.max_retries;
    }
    if let Some(c) = compute {
        flags.cpu_window_seconds = c.cpu_window;
    }
    flags.apply(&mut cfg);

    if global.interactive {
        cfg.machine_id = prompt("machine identifier", &cfg.machine_id);
        if let Ok(runs) = prompt("number of runs", &cfg.num_runs.to_string()).parse() {
            cfg.num_runs = runs;
        }
    }

    cfg.validate().map_err(crate::Error::from)?;
    Ok(cfg)
}

fn load_reg(global: &GlobalArgs) -> Result<Registry, Failure> {
    let mut reg = match &global.registry {
        Some(path) => load_registry(path).map_err(crate::Error::from)?,
        None => builtin_registry(),
    };
    for id in &global.enable {
        reg.enable(id).map_err(crate::Error::from)?;
    }
    Ok(reg)
}

struct Backend {
    factory: Arc<dyn ProviderFactory>,
    clock: Box<dyn TimeSource>,
    counter: Box<dyn CycleCounter>,
}

fn backend(global: &GlobalArgs) -> Backend {
    let seed = global.seed.unwrap_or(DEFAULT_MOCK_SEED);
    let profile = MockCostProfile::realistic();
    if global.mock {
        // Deterministic mode: the mock provider drives a virtual clock, so
        // iteration counts and recorded timings are reproducible.
        let clock = VirtualClock::new();
        Backend {
            factory: Arc::new(MockProviderFactory::with_clock(seed, profile, clock.clone())),
            counter: Box::new(ClockCycleCounter::new(Box::new(clock.clone()), 1.0)),
            clock: Box::new(clock),
        }
    } else {
        Backend {
            factory: Arc::new(MockProviderFactory::new(seed, profile)),
            clock: Box::new(RealClock::new()),
            counter: default_cycle_counter(),
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command.clone() {
        Command::GenKeys { keys_dir } => {
            let cfg = build_config(&cli.global, None, None)?;
            let reg = load_reg(&cli.global)?;
            let dir = keys_dir.unwrap_or_else(|| default_keys_dir(&cfg));
            let manifest =
                tls::generate_credentials(&reg, &dir).map_err(crate::Error::from)?;
            println!(
                "generated {} credential sets under {}",
                manifest.entries.len(),
                dir.display()
            );
            Ok(())
        }
        Command::ComputeBench { compute } => {
            let cfg = build_config(&cli.global, None, Some(&compute))?;
            let reg = load_reg(&cli.global)?;
            run_compute_bench(&cli.global, &compute, &cfg, &reg)
        }
        Command::TlsBench { tls } => {
            let cfg = build_config(&cli.global, Some(&tls), None)?;
            let reg = load_reg(&cli.global)?;
            run_tls_bench(&cli.global, &tls, &cfg, &reg)
        }
        Command::Parse { parse } => run_parse(&parse),
        Command::Report { report } => {
            let cfg = build_config(&cli.global, None, None)?;
            let reg = load_reg(&cli.global)?;
            run_report(&report, &cfg, &reg)
        }
        Command::FullRun {
            compute,
            tls,
            report,
        } => {
            let cfg = build_config(&cli.global, Some(&tls), Some(&compute))?;
            let reg = load_reg(&cli.global)?;
            match cfg.role {
                Role::Standalone => {
                    println!("stage=compute-bench");
                    run_compute_bench(&cli.global, &compute, &cfg, &reg)?;
                    println!("stage=parse");
                    let loaded = load_machine_records(&cfg.machine_dir())?;
                    println!(
                        "parsed cpu={} memory={} handshake={} speed={} records",
                        loaded.cpu.len(),
                        loaded.memory.len(),
                        loaded.handshake.len(),
                        loaded.speed.len()
                    );
                    println!("stage=report");
                    run_report(&report, &cfg, &reg)
                }
                Role::Client => {
                    println!("stage=tls-bench");
                    run_tls_bench(&cli.global, &tls, &cfg, &reg)?;
                    println!("stage=parse");
                    let loaded = load_machine_records(&cfg.machine_dir())?;
                    println!(
                        "parsed cpu={} memory={} handshake={} speed={} records",
                        loaded.cpu.len(),
                        loaded.memory.len(),
                        loaded.handshake.len(),
                        loaded.speed.len()
                    );
                    println!("stage=report");
                    run_report(&report, &cfg, &reg)
                }
                Role::Server => {
                    println!("stage=tls-bench");
                    run_tls_bench(&cli.global, &tls, &cfg, &reg)
                }
            }
        }
    }
}

fn default_keys_dir(cfg: &BenchConfig) -> PathBuf {
    cfg.output_root.join("tls_keys")
}

fn machine_subdir(cfg: &BenchConfig, parts: &[&str]) -> PathBuf {
    let mut dir = cfg.machine_dir();
    for p in parts {
        dir = dir.join(p);
    }
    dir
}

/// Rewrite the per-run CSV files for everything benchmarked so far; called
/// after each algorithm completes so a crash loses at most one algorithm.
fn persist_cpu_runs(
    dir: &Path,
    by_run: &BTreeMap<u32, Vec<CpuOpRecord>>,
) -> Result<(), Failure> {
    for (run_no, records) in by_run {
        results::write_cpu_csv(&results::csvio::run_file(dir, *run_no), records)
            .map_err(crate::Error::from)?;
    }
    Ok(())
}

fn persist_memory_runs(
    dir: &Path,
    by_run: &BTreeMap<u32, Vec<MemOpRecord>>,
) -> Result<(), Failure> {
    for (run_no, records) in by_run {
        results::write_memory_csv(&results::csvio::run_file(dir, *run_no), records)
            .map_err(crate::Error::from)?;
    }
    Ok(())
}

fn run_compute_bench(
    global: &GlobalArgs,
    compute_flags: &ComputeFlags,
    cfg: &BenchConfig,
    reg: &Registry,
) -> Result<(), Failure> {
    let mut backend = backend(global);

    if !compute_flags.skip_cpu {
        let cpu_dir = machine_subdir(cfg, &["computational", "cpu"]);
        std::fs::create_dir_all(&cpu_dir).map_err(|source| {
            Failure::from(crate::Error::Model(model::ModelError::Io {
                path: cpu_dir.clone(),
                source,
            }))
        })?;
        let offset = results::next_run_number(&cpu_dir);
        let mut by_run: BTreeMap<u32, Vec<CpuOpRecord>> = BTreeMap::new();

        if let Some(template) = &global.adapter {
            // External tool per (algorithm, run); stdout in liboqs CSV form.
            for run in 0..cfg.num_runs {
                let run_no = offset + run;
                for desc in reg.with_capability(model::Capability::CpuBench) {
                    let subs = Substitutions::new()
                        .alg(desc.id.clone())
                        .window(cfg.cpu_window_seconds)
                        .run(run_no)
                        .out("-");
                    let captured = crate::provider::run_command_template(template, &subs)
                        .map_err(crate::Error::from)?;
                    let records =
                        results::parse_liboqs_speed_csv(&captured.stdout, &desc.id, run_no)
                            .map_err(crate::Error::from)?;
                    by_run.entry(run_no).or_default().extend(records);
                    persist_cpu_runs(&cpu_dir, &by_run)?;
                }
            }
        } else {
            for run in 0..cfg.num_runs {
                let run_no = offset + run;
                for desc in reg.with_capability(model::Capability::CpuBench) {
                    let records = compute::bench_cpu_algorithm(
                        desc,
                        backend.factory.as_ref(),
                        cfg.cpu_window_seconds,
                        run_no,
                        backend.clock.as_ref(),
                        backend.counter.as_mut(),
                    )
                    .map_err(crate::Error::from)?;
                    println!(
                        "cpu alg={} run={} iterations={}",
                        desc.id,
                        run_no,
                        records.iter().map(|r| r.iterations).sum::<u64>()
                    );
                    by_run.entry(run_no).or_default().extend(records);
                    persist_cpu_runs(&cpu_dir, &by_run)?;
                }
            }
        }
        println!("cpu results under {}", cpu_dir.display());
    }

    if !compute_flags.skip_memory {
        let mem_dir = machine_subdir(cfg, &["computational", "memory"]);
        std::fs::create_dir_all(&mem_dir).map_err(|source| {
            Failure::from(crate::Error::Model(model::ModelError::Io {
                path: mem_dir.clone(),
                source,
            }))
        })?;
        let source = if let Some(dir) = &compute_flags.massif_fixtures {
            MemoryProfileSource::FixtureDir(dir.clone())
        } else if let Some(template) = &compute_flags.profiler {
            MemoryProfileSource::Command(template.clone())
        } else {
            MemoryProfileSource::Synthetic
        };
        let offset = results::next_run_number(&mem_dir);
        let mut by_run: BTreeMap<u32, Vec<MemOpRecord>> = BTreeMap::new();
        for desc in reg.with_capability(model::Capability::MemBench) {
            let sub_reg = Registry::new(vec![desc.clone()]).map_err(crate::Error::from)?;
            let mut records =
                compute::bench_memory(&sub_reg, &source, cfg).map_err(crate::Error::from)?;
            for r in records.iter_mut() {
                r.run_index = offset + r.run_index - 1;
            }
            for r in records {
                by_run.entry(r.run_index).or_default().push(r);
            }
            persist_memory_runs(&mem_dir, &by_run)?;
        }
        println!("memory results under {}", mem_dir.display());
    }

    Ok(())
}

fn run_tls_bench(
    global: &GlobalArgs,
    tls_flags: &TlsFlags,
    cfg: &BenchConfig,
    reg: &Registry,
) -> Result<(), Failure> {
    let keys_dir = default_keys_dir(cfg);
    let manifest = match tls::load_manifest(&keys_dir) {
        Ok(m) => m,
        Err(_) => tls::generate_credentials(reg, &keys_dir).map_err(crate::Error::from)?,
    };
    let mut backend = backend(global);

    match cfg.role {
        Role::Server => {
            println!(
                "serving handshake session on control port {} / data port {}",
                cfg.control_port, cfg.data_port
            );
            let report =
                tls::run_handshake_server(cfg, reg, &manifest, Arc::clone(&backend.factory))
                    .map_err(crate::Error::from)?;
            println!(
                "session done: completed={} skipped={} retries={} served={} peer={}",
                report.completed.len(),
                report.skipped.len(),
                report.retries,
                report.served_connections,
                report.peer_machine_id
            );
            Ok(())
        }
        Role::Client => {
            let plan =
                tls::TestPlan::from_registry(reg, cfg.tls_window_seconds, cfg.num_runs)
                    .map_err(crate::Error::from)?;
            println!(
                "running {} handshake tests x {} runs against {}",
                plan.entries.len(),
                cfg.num_runs,
                cfg.peer_address.as_deref().unwrap_or("?")
            );
            let report =
                tls::run_handshake_client(cfg, reg, &manifest, &plan, Arc::clone(&backend.factory))
                    .map_err(crate::Error::from)?;
            for outcome in &report.outcomes {
                println!(
                    "test={} run={} connections={} failures={} real={:.3} user_cps={:.3}",
                    outcome.test,
                    outcome.run,
                    outcome.measurement.connections,
                    outcome.measurement.failures,
                    outcome.measurement.real_seconds,
                    outcome.measurement.user_connections_per_sec
                );
            }
            let hs_dir = machine_subdir(cfg, &["tls", "handshake"]);
            let offset = results::next_run_number(&hs_dir);
            let mut by_run: BTreeMap<u32, Vec<HandshakeRecord>> = BTreeMap::new();
            for mut rec in report.records.clone() {
                rec.run_index = offset + rec.run_index - 1;
                by_run.entry(rec.run_index).or_default().push(rec);
            }
            for (run_no, records) in &by_run {
                results::write_handshake_csv(&results::csvio::run_file(&hs_dir, *run_no), records)
                    .map_err(crate::Error::from)?;
            }
            println!("handshake results under {}", hs_dir.display());

            if !tls_flags.skip_speed {
                let records = tls::bench_tls_speed(
                    reg,
                    backend.factory.as_ref(),
                    cfg,
                    backend.clock.as_ref(),
                    backend.counter.as_mut(),
                )
                .map_err(crate::Error::from)?;
                let speed_dir = machine_subdir(cfg, &["tls", "speed"]);
                let offset = results::next_run_number(&speed_dir);
                let mut by_run: BTreeMap<u32, Vec<SpeedRecord>> = BTreeMap::new();
                for mut rec in records {
                    rec.run_index = offset + rec.run_index - 1;
                    by_run.entry(rec.run_index).or_default().push(rec);
                }
                for (run_no, records) in &by_run {
                    results::write_speed_csv(
                        &results::csvio::run_file(&speed_dir, *run_no),
                        records,
                    )
                    .map_err(crate::Error::from)?;
                }
                println!("speed results under {}", speed_dir.display());
            }
            Ok(())
        }
        Role::Standalone => Err(Failure::user(
            "tls-bench requires --role server or --role client",
        )),
    }
}

fn run_parse(args: &ParseArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.input).map_err(|source| {
        Failure::from(crate::Error::Model(model::ModelError::Io {
            path: args.input.clone(),
            source,
        }))
    })?;
    let need = |opt: &Option<String>, name: &str| -> Result<String, Failure> {
        opt.clone()
            .ok_or_else(|| Failure::user(format!("--{name} is required for this --kind")))
    };

    let csv = match args.kind {
        ParseKind::Massif => {
            let alg = need(&args.alg, "alg")?;
            let op_label = need(&args.op, "op")?;
            let op = Operation::from_label(&op_label)
                .ok_or_else(|| Failure::user(format!("unknown operation {op_label:?}")))?;
            let snapshots = compute::parse_massif(&text).map_err(crate::Error::from)?;
            let peak = compute::peak_memory(&snapshots).map_err(crate::Error::from)?;
            let record = MemOpRecord::new(
                alg,
                op,
                args.run,
                peak.mem_heap_bytes,
                peak.mem_heap_extra_bytes,
                peak.mem_stacks_bytes,
            )
            .map_err(crate::Error::from)?;
            results::csvio::memory_csv_string(&[record])
        }
        ParseKind::LiboqsSpeed => {
            let alg = need(&args.alg, "alg")?;
            let records = results::parse_liboqs_speed_csv(&text, &alg, args.run)
                .map_err(crate::Error::from)?;
            results::csvio::cpu_csv_string(&records)
        }
        ParseKind::OpensslSpeed => {
            let records =
                results::parse_openssl_speed(&text, args.run).map_err(crate::Error::from)?;
            results::csvio::speed_csv_string(&records)
        }
        ParseKind::STime => {
            let sig = need(&args.sig, "sig")?;
            let kem = need(&args.kem, "kem")?;
            let mode_label = need(&args.mode, "mode")?;
            let mode = HandshakeMode::from_label(&mode_label)
                .ok_or_else(|| Failure::user(format!("unknown mode {mode_label:?}")))?;
            let (connections, user_cps, real_seconds) =
                tls::parse_s_time(&text).map_err(crate::Error::from)?;
            let record = HandshakeRecord::new(
                sig,
                kem,
                mode,
                args.run,
                connections,
                real_seconds,
                user_cps,
            )
            .map_err(crate::Error::from)?;
            results::csvio::handshake_csv_string(&[record])
        }
    };

    match &args.out_file {
        Some(path) => {
            if let Some(parent) = path.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            std::fs::write(path, &csv).map_err(|source| {
                Failure::from(crate::Error::Model(model::ModelError::Io {
                    path: path.clone(),
                    source,
                }))
            })?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

struct LoadedRecords {
    cpu: Vec<CpuOpRecord>,
    memory: Vec<MemOpRecord>,
    handshake: Vec<HandshakeRecord>,
    speed: Vec<SpeedRecord>,
}

fn run_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().to_string();
            if name.starts_with("run_") && name.ends_with(".csv") {
                files.push(entry.path());
            }
        }
    }
    files.sort();
    files
}

fn load_machine_records(machine_dir: &Path) -> Result<LoadedRecords, Failure> {
    let read = |path: &Path| -> Result<String, Failure> {
        std::fs::read_to_string(path).map_err(|source| {
            Failure::from(crate::Error::Model(model::ModelError::Io {
                path: path.to_path_buf(),
                source,
            }))
        })
    };
    let mut loaded = LoadedRecords {
        cpu: Vec::new(),
        memory: Vec::new(),
        handshake: Vec::new(),
        speed: Vec::new(),
    };
    for path in run_files(&machine_dir.join("computational").join("cpu")) {
        loaded
            .cpu
            .extend(results::read_cpu_csv(&read(&path)?).map_err(crate::Error::from)?);
    }
    for path in run_files(&machine_dir.join("computational").join("memory")) {
        loaded
            .memory
            .extend(results::read_memory_csv(&read(&path)?).map_err(crate::Error::from)?);
    }
    for path in run_files(&machine_dir.join("tls").join("handshake")) {
        loaded
            .handshake
            .extend(results::read_handshake_csv(&read(&path)?).map_err(crate::Error::from)?);
    }
    for path in run_files(&machine_dir.join("tls").join("speed")) {
        loaded
            .speed
            .extend(results::read_speed_csv(&read(&path)?).map_err(crate::Error::from)?);
    }
    Ok(loaded)
}

fn run_report(args: &ReportArgs, cfg: &BenchConfig, reg: &Registry) -> Result<(), Failure> {
    if args.top < 1 {
        return Err(Failure {
            message: "--top must be >= 1".into(),
            code: "INVALID_ARGUMENT".into(),
            exit: 1,
        });
    }
    let machine_dir = args.in_dir.clone().unwrap_or_else(|| cfg.machine_dir());
    let loaded = load_machine_records(&machine_dir)?;
    let inputs = ReportInputs {
        cpu: results::average_cpu(&loaded.cpu).map_err(crate::Error::from)?,
        memory: results::average_memory(&loaded.memory).map_err(crate::Error::from)?,
        handshake: results::average_handshake(&loaded.handshake).map_err(crate::Error::from)?,
        speed: results::average_speed(&loaded.speed).map_err(crate::Error::from)?,
    };
    let opts = ReportOptions {
        top_n: args.top,
        filters: FilterSet {
            prefer_standardised: args.prefer_standardised,
            exclude_ids: args.exclude.clone(),
            require_capability: None,
        },
    };
    let out_dir = machine_dir.join("report");
    let written =
        results::emit_report(&inputs, reg, &opts, &out_dir).map_err(crate::Error::from)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
