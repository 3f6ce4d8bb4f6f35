use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crowdtrace::bench::{self, BenchConfig};
use crowdtrace::input::{read_points, write_points};
use crowdtrace::store::{LogBackend, SegmentStore, StoreBackend};
use crowdtrace::synth::{generate, write_labels, GenConfig};
use crowdtrace::trajectory::{filter_noise, SegmentationConfig, Trajectory};
use crowdtrace::xz::XzConfig;
use crowdtrace::{irjq, irq, QueryParams, SftConfig};

const LOG_FILE: &str = "segments.log";

#[derive(Parser, Debug)]
#[command(name = "crowdtrace", version, about = "Infected-rate queries over stored trajectories")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "CONTACT_STORE_DIR", default_value = "./store")]
    store: PathBuf,
    /// Write CSV output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, global = true, allow_negative_numbers = true, default_value_t = 0.5)]
    theta: f64,
    /// Spatial range, meters.
    #[arg(long = "theta-d", global = true, allow_negative_numbers = true, default_value_t = 50.0)]
    theta_d: f64,
    /// Temporal range, seconds.
    #[arg(long = "theta-t", global = true, allow_negative_numbers = true, default_value_t = 120.0)]
    theta_t: f64,
    /// Index resolution for ingest and bench; SFT resolution for join. Defaults to 15.
    #[arg(long, global = true)]
    resolution: Option<u8>,
    #[arg(long = "leaf-capacity", global = true, default_value_t = 64)]
    leaf_capacity: usize,
    /// Time period length in seconds (ingest only). Defaults to 86400.
    #[arg(long = "period-len", global = true)]
    period_len: Option<i64>,
    /// Number of key shards (ingest only). Defaults to 4.
    #[arg(long, global = true)]
    shards: Option<u8>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Append `#`-prefixed counter lines to query and join output.
    #[arg(long, global = true)]
    explain: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate synthetic trajectories and a labels.csv of ground-truth contacts.
    Gen {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        patients: usize,
        #[arg(long = "contact-fraction", default_value_t = 0.1)]
        contact_fraction: f64,
        #[arg(long = "crosser-fraction", default_value_t = 0.1)]
        crosser_fraction: f64,
        /// Labels file; defaults to labels.csv next to --out.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Load a point CSV (traj_id,lon,lat,unix_seconds) into the store.
    Ingest { input: PathBuf },
    /// Stored trajectories whose infected rate against one query exceeds theta.
    Query {
        /// Point CSV holding exactly one trajectory.
        input: Option<PathBuf>,
        /// Use a stored trajectory as the query.
        #[arg(long, conflicts_with = "input")]
        id: Option<String>,
    },
    /// Infected-rate join of a query-set CSV against the store.
    Join { input: PathBuf },
    /// Timing sweeps: lambda, theta, theta_d, theta_t, resolution, query_size, data_size or all.
    Bench {
        suite: String,
        /// Trajectories in the generated workload.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Query-set size.
        #[arg(long, default_value_t = 10)]
        queries: usize,
    },
}

impl Cli {
    fn params(&self) -> Result<QueryParams> {
        Ok(QueryParams::new(self.lambda, self.theta, self.theta_d, self.theta_t)?)
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn log_path(&self) -> PathBuf {
        self.store.join(LOG_FILE)
    }

    fn open_store(&self) -> Result<SegmentStore<LogBackend>> {
        let path = self.log_path();
        if !path.is_file() {
            bail!("no store at {}", self.store.display());
        }
        let backend = LogBackend::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
        Ok(SegmentStore::open(backend)?)
    }
}

fn read_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let parsed = read_points(BufReader::new(f)).with_context(|| format!("cannot read {}", path.display()))?;
    if parsed.malformed_lines > 0 {
        bail!("{}: {} malformed line(s)", path.display(), parsed.malformed_lines);
    }
    Ok(parsed.trajectories)
}

/// Drops the same noise points ingest would have dropped.
fn clean(t: Trajectory, seg: &SegmentationConfig) -> Result<Trajectory> {
    match filter_noise(&t, seg) {
        Some(c) => Ok(c),
        None => bail!("query trajectory {} has no usable points", t.id),
    }
}

fn cmd_gen(cli: &Cli, n: usize, patients: usize, contact: f64, crosser: f64, labels: Option<&Path>) -> Result<()> {
    let cfg = GenConfig {
        seed: cli.seed,
        n_traj: n,
        n_patients: patients,
        contact_fraction: contact,
        crosser_fraction: crosser,
        theta_d: cli.theta_d,
        theta_t: cli.theta_t,
        ..GenConfig::default()
    };
    let data = generate(&cfg)?;
    let mut out = cli.output()?;
    write_points(&mut out, &data.trajectories)?;
    out.flush()?;
    let labels = labels
        .map(Path::to_path_buf)
        .or_else(|| cli.out.as_ref().map(|p| p.with_file_name("labels.csv")));
    match labels {
        Some(p) => write_labels(File::create(&p).with_context(|| format!("cannot create {}", p.display()))?, &data.contacts)?,
        None => log::warn!("writing to stdout; labels not written (pass --labels)"),
    }
    Ok(())
}

fn cmd_ingest(cli: &Cli, input: &Path) -> Result<()> {
    let trajectories = read_csv(input)?;
    fs::create_dir_all(&cli.store).with_context(|| format!("cannot create {}", cli.store.display()))?;
    let path = cli.log_path();
    let existed = path.is_file();
    let backend = LogBackend::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut store = if existed {
        let store = SegmentStore::open(backend)?;
        let xz = store.xz();
        let differs = cli.resolution.is_some_and(|r| r != xz.resolution)
            || cli.period_len.is_some_and(|p| p != xz.period_len)
            || cli.shards.is_some_and(|s| s != xz.num_shards);
        if differs {
            bail!("store at {} was created with different index settings", cli.store.display());
        }
        store
    } else {
        let d = XzConfig::default();
        let xz = XzConfig {
            resolution: cli.resolution.unwrap_or(d.resolution),
            period_len: cli.period_len.unwrap_or(d.period_len),
            num_shards: cli.shards.unwrap_or(d.num_shards),
            ..d
        };
        SegmentStore::create(backend, xz, SegmentationConfig::default())?
    };
    let report = store.ingest(trajectories)?;
    store.into_backend().flush()?;
    eprintln!(
        "ingested {} trajectories as {} segments ({} rejected, {} noise points dropped)",
        report.trajectories, report.segments, report.rejected_trajectories, report.noise_points
    );
    Ok(())
}

fn cmd_query(cli: &Cli, input: Option<&Path>, id: Option<&str>) -> Result<()> {
    let params = cli.params()?;
    let store = cli.open_store()?;
    let query = match (input, id) {
        (Some(path), _) => {
            let mut ts = read_csv(path)?;
            if ts.len() != 1 {
                bail!("{}: expected one trajectory, found {}", path.display(), ts.len());
            }
            clean(ts.remove(0), store.seg_config())?
        }
        (None, Some(id)) => match store.load_trajectory(id)? {
            Some(t) => t,
            None => bail!("trajectory {id:?} is not in the store"),
        },
        (None, None) => bail!("give a query CSV or --id"),
    };
    let outcome = irq(&store, &query, &params)?;
    let mut out = cli.output()?;
    writeln!(out, "traj_id,ir")?;
    for (id, ir) in &outcome.results {
        writeln!(out, "{id},{ir:.9}")?;
    }
    if cli.explain {
        let c = outcome.counters;
        let (queries, ranges, rows) = store.stats().snapshot();
        writeln!(out, "# candidates {}", outcome.candidates)?;
        writeln!(out, "# pruned_lemma1 {}\n# pruned_lemma2 {}\n# pruned_lemma3 {}\n# pruned_lemma4 {}", c.l1, c.l2, c.l3, c.l4)?;
        writeln!(out, "# range_queries {queries}\n# scan_ranges {ranges}\n# rows_scanned {rows}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_join(cli: &Cli, input: &Path) -> Result<()> {
    let params = cli.params()?;
    let store = cli.open_store()?;
    let seg = *store.seg_config();
    let queries = read_csv(input)?.into_iter().map(|t| clean(t, &seg)).collect::<Result<Vec<_>>>()?;
    if queries.is_empty() {
        bail!("{}: no trajectories", input.display());
    }
    let cfg = SftConfig {
        resolution: cli.resolution.unwrap_or(15),
        leaf_capacity: cli.leaf_capacity,
        max_leaf_span: store.xz().period_secs(),
    };
    if cfg.resolution == 0 || cfg.resolution > crowdtrace::xz::MAX_RESOLUTION || cfg.leaf_capacity == 0 {
        bail!("resolution must be in 1..={} and leaf capacity positive", crowdtrace::xz::MAX_RESOLUTION);
    }
    let outcome = irjq(&store, &queries, &params, &cfg)?;
    let mut out = cli.output()?;
    writeln!(out, "query_traj_id,candidate_traj_id,ir")?;
    for (k, ir) in &outcome.results {
        writeln!(out, "{},{},{ir:.9}", k.query_traj_id, k.candidate_traj_id)?;
    }
    if cli.explain {
        let (_, ranges, rows) = store.stats().snapshot();
        writeln!(out, "# query_segments {}\n# sft_leaves {}", outcome.query_segments, outcome.leaves)?;
        writeln!(out, "# pruned_pairs_lemma2 {}\n# evaluations {}", outcome.pruned_pairs, outcome.evaluations)?;
        writeln!(out, "# scan_ranges {ranges}\n# rows_scanned {rows}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_bench(cli: &Cli, suite: &str, n: usize, reps: usize, queries: usize) -> Result<()> {
    let d = BenchConfig::default();
    let resolution = cli.resolution.unwrap_or(d.xz.resolution);
    let cfg = BenchConfig {
        gen: GenConfig { seed: cli.seed, n_traj: n, n_patients: 20.min(n), ..d.gen },
        query_size: queries,
        reps,
        params: cli.params()?,
        xz: XzConfig { resolution, ..d.xz },
        sft: SftConfig { resolution, leaf_capacity: cli.leaf_capacity, ..d.sft },
        ..d
    };
    let rows = bench::run_suite(suite, &cfg)?;
    let mut out = cli.output()?;
    bench::write_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match &cli.cmd {
        Cmd::Gen { n, patients, contact_fraction, crosser_fraction, labels } => {
            cmd_gen(cli, *n, *patients, *contact_fraction, *crosser_fraction, labels.as_deref())
        }
        Cmd::Ingest { input } => cmd_ingest(cli, input),
        Cmd::Query { input, id } => cmd_query(cli, input.as_deref(), id.as_deref()),
        Cmd::Join { input } => cmd_join(cli, input),
        Cmd::Bench { suite, n, reps, queries } => cmd_bench(cli, suite, *n, *reps, *queries),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
