use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use burst_bench::{improvement, run_experiment, summarize, ExperimentConfig, RunStats};
use burst_client::{fetch_page, FetchPlan, Mode, ObjectCache};
use burst_core::model::{efficiency_sweep, sweep_to_csv, OverheadParams};
use burst_core::wire::PROTOCOL_REVISION;
use burst_core::{extract_manifest, ObjectRef};
use burst_server::{Server, ServerConfig};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use tracing_subscriber::filter::LevelFilter;

/// GET and BURST page loading: server, client, benchmark and model.
#[derive(Debug, Parser)]
#[command(name = "httpburst", arg_required_else_help = true)]
struct Cli {
    /// error, warn, info, debug, trace or off. Logs go to stderr.
    #[arg(long, global = true, default_value = "warn", value_name = "LEVEL")]
    log_level: LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve a directory over GET and BURST until interrupted.
    Serve(ServeArgs),
    /// Load a page and its objects, printing one status line per object.
    Fetch(FetchArgs),
    /// List the objects an HTML file references, one path per line.
    Extract(ExtractArgs),
    /// Run the GET vs BURST page-load experiment and print CSV.
    Bench(BenchArgs),
    /// Print the analytic efficiency sweep as CSV.
    Model(ModelArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    bind: IpAddr,
    /// Emulated processing time per request.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Charge the delay per object inside a burst instead of per request.
    #[arg(long)]
    per_object_delay: bool,
    #[arg(long, default_value_t = burst_server::DEFAULT_MAX_BURST_PATHS,
          value_parser = positive)]
    max_burst: usize,
    #[arg(long, default_value_t = burst_server::DEFAULT_MAX_CONNECTIONS,
          value_parser = positive)]
    max_connections: usize,
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// http://host[:port]/path of the HTML page.
    #[arg(value_parser = parse_target)]
    url: Target,
    #[arg(long, default_value = "burst")]
    mode: Mode,
    #[arg(long, default_value_t = burst_client::DEFAULT_CONNECTIONS,
          value_parser = positive)]
    connections: usize,
    /// Directory holding cached objects; read before and updated after.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Also print request count and bytes on the wire.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    file: PathBuf,
    /// Server path of the document, used to resolve relative references.
    #[arg(long, default_value = "/index.html")]
    base: String,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Image counts, one page per value.
    #[arg(long, value_delimiter = ',', default_value = "1,10,25,50,100,150")]
    n: Vec<usize>,
    /// mode:connections pairs.
    #[arg(long, value_delimiter = ',', default_value = "get:6,burst:1,burst:6", value_parser = parse_mode_spec)]
    modes: Vec<(Mode, usize)>,
    #[arg(long, default_value_t = burst_bench::DEFAULT_RUNS,
          value_parser = at_least_two)]
    runs: usize,
    #[arg(long, default_value_t = 20)]
    delay_ms: u64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    image_kb: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the fixture; a temporary directory by default.
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the analytic efficiency sweep for the largest N instead of
    /// measuring anything.
    #[arg(long)]
    model_only: bool,
    /// Object payload for --model-only.
    #[arg(long, default_value_t = 1400)]
    payload: u64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 1400)]
    payload: u64,
    #[arg(long, default_value_t = 150, value_parser = positive)]
    max_n: usize,
    /// BURST connection counts.
    #[arg(long = "c", value_delimiter = ',', default_value = "1,6",
          value_parser = positive)]
    connections: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    ip: u64,
    #[arg(long, default_value_t = 20)]
    tcp: u64,
    #[arg(long, default_value_t = 0)]
    http: u64,
}

#[derive(Debug, Clone)]
struct Target {
    host: String,
    port: u16,
    path: ObjectRef,
}

fn parse_target(s: &str) -> Result<Target, String> {
    let url = url::Url::parse(s).map_err(|e| e.to_string())?;
    if url.scheme() != "http" {
        return Err(format!("unsupported scheme {:?}, only http", url.scheme()));
    }
    let host = match url.host() {
        Some(url::Host::Domain(d)) => d.to_owned(),
        Some(url::Host::Ipv4(a)) => a.to_string(),
        Some(url::Host::Ipv6(a)) => a.to_string(),
        None => return Err("URL has no host".into()),
    };
    let port = url.port_or_known_default().unwrap_or(80);
    let path = ObjectRef::new(url.path()).map_err(|e| e.to_string())?;
    Ok(Target { host, port, path })
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected an integer >= 1, got {s:?}")),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        _ => Err(format!("expected an integer >= 2, got {s:?}")),
    }
}

fn parse_mode_spec(s: &str) -> Result<(Mode, usize), String> {
    let (mode, c) = s
        .split_once(':')
        .ok_or_else(|| format!("expected mode:connections, got {s:?}"))?;
    let c: usize = c.parse().map_err(|_| format!("bad connection count in {s:?}"))?;
    if c == 0 {
        return Err(format!("connection count must be at least 1 in {s:?}"));
    }
    Ok((mode.parse()?, c))
}

fn main() -> ExitCode {
    let version = format!(
        "{} (BURST wire revision {PROTOCOL_REVISION})",
        env!("CARGO_PKG_VERSION")
    );
    let parsed = Cli::command()
        .version(version)
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    tracing_subscriber::fmt()
        .with_max_level(cli.log_level)
        .with_writer(std::io::stderr)
        .init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start async runtime")
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Serve(args) => serve(args),
        Command::Fetch(args) => fetch(args),
        Command::Extract(args) => extract(args),
        Command::Bench(args) => bench(args),
        Command::Model(args) => model(args),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut config = ServerConfig::new(&args.root)
        .with_processing_delay(Duration::from_millis(args.delay_ms))
        .with_per_object_delay(args.per_object_delay)
        .with_max_burst_paths(args.max_burst)
        .with_max_connections(args.max_connections);
    config.addr = SocketAddr::new(args.bind, args.port);
    runtime()?.block_on(async {
        let server = Server::bind(config).await?;
        let stats = server.stats();
        eprintln!("listening on http://{}", server.local_addr());
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        eprint!("{}", stats.render());
        Ok(())
    })
}

fn fetch(args: FetchArgs) -> Result<()> {
    let cache = match &args.cache_dir {
        Some(dir) => ObjectCache::load_dir(dir).with_context(|| format!("cannot read cache {}", dir.display()))?,
        None => ObjectCache::new(),
    };
    let target = args.url;
    let plan = FetchPlan::new(args.mode, args.connections, target.path, target.host, target.port)
        .with_timeout(Duration::from_secs(args.timeout_secs));
    let result = runtime()?.block_on(fetch_page(&plan, &cache))?;
    if let Some(dir) = &args.cache_dir {
        cache
            .save_dir(dir)
            .with_context(|| format!("cannot write cache {}", dir.display()))?;
    }

    let mut out = std::io::stdout().lock();
    for path in &result.manifest.objects {
        let outcome = &result.objects[path];
        let len = outcome.bytes().map_or("-".to_owned(), |b| b.len().to_string());
        writeln!(out, "{} {len} {path}", outcome.label())?;
    }
    writeln!(
        out,
        "total_duration_ms={:.3}",
        result.total_duration.as_secs_f64() * 1000.0
    )?;
    if args.timing {
        writeln!(out, "requests={}", result.request_count)?;
        writeln!(out, "bytes_on_wire={}", result.bytes_on_wire)?;
    }
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let base = ObjectRef::new(&args.base).with_context(|| format!("invalid --base {:?}", args.base))?;
    let html = std::fs::read(&args.file).with_context(|| format!("cannot read {}", args.file.display()))?;
    let mut out = std::io::stdout().lock();
    for path in extract_manifest(&html, &base).objects {
        writeln!(out, "{path}")?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.n.is_empty() || args.modes.is_empty() {
        bail!("need at least one --n value and one --modes entry");
    }
    if args.model_only {
        let max_n = args.n.iter().copied().max().unwrap_or(1).max(1);
        let mut cs: Vec<usize> = args
            .modes
            .iter()
            .filter(|(m, _)| *m == Mode::Burst)
            .map(|&(_, c)| c)
            .collect();
        cs.sort_unstable();
        cs.dedup();
        let rows = efficiency_sweep(args.payload, max_n, &OverheadParams::IPV4_TCP, &cs)?;
        return emit(args.out.as_ref(), sweep_to_csv(&rows).as_bytes());
    }

    let mut config = ExperimentConfig {
        image_counts: args.n,
        modes: args.modes,
        runs_per_point: args.runs,
        image_size: args.image_kb * 1024,
        processing_delay: Duration::from_millis(args.delay_ms),
        ..ExperimentConfig::default()
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let scratch;
    let workdir = match args.workdir {
        Some(dir) => dir,
        None => {
            scratch = tempfile::tempdir().context("cannot create a temporary fixture directory")?;
            scratch.path().to_path_buf()
        }
    };
    let stats = runtime()?.block_on(run_experiment(&config, &workdir))?;
    emit(args.out.as_ref(), &summarize(&stats)?)?;
    report_improvements(&stats);

    let failed: Vec<_> = stats.iter().filter(|s| s.is_failed()).collect();
    if !failed.is_empty() {
        for s in &failed {
            eprintln!(
                "failed: n={} {}@{}: {}",
                s.n_objects,
                s.mode,
                s.connections,
                s.failure.as_deref().unwrap_or("")
            );
        }
        bail!("{} of {} points failed", failed.len(), stats.len());
    }
    Ok(())
}

/// BURST means against the GET mean at the same N, on stderr.
fn report_improvements(stats: &[RunStats]) {
    for get in stats.iter().filter(|s| s.mode == Mode::Get && !s.is_failed()) {
        for burst in stats
            .iter()
            .filter(|s| s.mode == Mode::Burst && s.n_objects == get.n_objects && !s.is_failed())
        {
            eprintln!(
                "n={} burst@{} vs get@{}: {:.1}% faster",
                get.n_objects,
                burst.connections,
                get.connections,
                improvement(get.mean, burst.mean) * 100.0
            );
        }
    }
}

fn model(args: ModelArgs) -> Result<()> {
    let params = OverheadParams::new(args.ip, args.tcp, args.http);
    let rows = efficiency_sweep(args.payload, args.max_n, &params, &args.connections)?;
    emit(None, sweep_to_csv(&rows).as_bytes())
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
