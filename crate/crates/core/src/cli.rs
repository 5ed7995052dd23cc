//! The `assocpipe` command line.
//!
//! Settings resolve in this order: command-line flag, `--config` file,
//! `ASSOCPIPE_WORK_DIR` (work directory only), built-in default. The data
//! directory defaults to `<work>/data` and the store to `<work>/store`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analytics::{connections_to, degree_distribution, query_via_array, top_k};
use crate::bench::bench;
use crate::packet::{generate_dataset, GenConfig};
use crate::pipeline::{e_files, parse_stages, run, PipelineConfig, DEFAULT_SPLIT_SIZE};
use crate::store::Store;

pub const WORK_DIR_ENV: &str = "ASSOCPIPE_WORK_DIR";

const CONFIG_KEYS: &[&str] = &[
    "data_dir",
    "work_dir",
    "store_dir",
    "workers",
    "split_size",
    "store_shards",
    "stages",
    "seed",
    "packets",
    "files",
    "hosts",
    "heavy_fraction",
    "heavy_count",
    "bench_workers",
    "out_dir",
    "format",
];

#[derive(Parser, Debug)]
#[command(
    name = "assocpipe",
    version,
    about = "Packet capture analytics with associative arrays"
)]
struct Cli {
    /// Read settings from a `key = value` file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic gzip-compressed capture dataset.
    Generate(GenerateArgs),
    /// Run pipeline stages over the data directory.
    Run(RunArgs),
    /// Query an ingested store.
    Query {
        #[command(subcommand)]
        query: QueryCommand,
    },
    /// Time the pipeline at several worker counts.
    Bench(BenchArgs),
    /// Print store contents as TSV.
    Dump(DumpArgs),
}

#[derive(Args, Debug, Default)]
struct Dirs {
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    store_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    dirs: Dirs,
    #[arg(long)]
    packets: Option<u64>,
    /// Number of capture files to cut the stream into.
    #[arg(long)]
    files: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Background host count.
    #[arg(long)]
    hosts: Option<u32>,
    #[arg(long)]
    heavy_fraction: Option<f64>,
    #[arg(long)]
    heavy_count: Option<u32>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    dirs: Dirs,
    #[arg(long)]
    workers: Option<usize>,
    /// Split size in bytes.
    #[arg(long)]
    split_size: Option<u64>,
    /// Stage range, e.g. `1-6` or `3`.
    #[arg(long)]
    stages: Option<String>,
    /// Also write the timing CSV here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Spread ingest over this many stores under the store directory.
    #[arg(long)]
    store_shards: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum QueryCommand {
    /// Packets to or from an IPv4 address.
    Connections {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        ip: String,
        /// Answer from the incidence-array files instead of the store.
        #[arg(long)]
        via_array: bool,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Highest-degree values of a field.
    Topk {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        field: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Degree histogram of a field.
    Degdist {
        #[command(flatten)]
        dirs: Dirs,
        #[arg(long)]
        field: String,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    dirs: Dirs,
    /// Comma-separated worker counts, starting at 1.
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    #[arg(long)]
    split_size: Option<u64>,
    #[arg(long)]
    stages: Option<String>,
    /// Directory for bench.csv and bench.dat.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    dirs: Dirs,
    /// Dump one table as row, col, val; default is every table.
    #[arg(long)]
    table: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Tsv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parsed `key = value` settings.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = match line.find(" #") {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let k = k.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(format!("line {}: unknown key {k:?}", i + 1));
            }
            values.insert(k, v.trim().to_owned());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Failure::Usage(format!("config: bad value {v:?} for {key}")))
            })
            .transpose()
    }

    /// `flag` if given, else the config value.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.typed(key),
        }
    }
}

struct Paths {
    data: PathBuf,
    work: PathBuf,
    store: PathBuf,
}

fn resolve_dirs(d: &Dirs, conf: &ConfigFile) -> Result<Paths, Failure> {
    let work = match conf.pick(d.work_dir.clone(), "work_dir")? {
        Some(w) => w,
        None => std::env::var_os(WORK_DIR_ENV).map_or_else(|| PathBuf::from("work"), PathBuf::from),
    };
    let data = conf
        .pick(d.data_dir.clone(), "data_dir")?
        .unwrap_or_else(|| work.join("data"));
    let store = conf
        .pick(d.store_dir.clone(), "store_dir")?
        .unwrap_or_else(|| work.join("store"));
    Ok(Paths { data, work, store })
}

fn pipeline_config(
    paths: Paths,
    conf: &ConfigFile,
    split_size: Option<u64>,
    stages: Option<String>,
) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::new(paths.data, paths.work, paths.store);
    cfg.split_size = conf.pick(split_size, "split_size")?.unwrap_or(DEFAULT_SPLIT_SIZE);
    cfg.seed = conf.typed("seed")?.unwrap_or(1);
    if let Some(s) = conf.pick(stages, "stages")? {
        cfg.stages = parse_stages(&s).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn open_store(dir: &Path) -> Result<Store, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Runtime(format!("no store at {}", dir.display())));
    }
    Store::open(dir).map_err(runtime)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let conf = match &cli.config {
        Some(p) => ConfigFile::load(p).map_err(Failure::Usage)?,
        None => ConfigFile::default(),
    };
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    match cli.command {
        Command::Generate(a) => {
            let paths = resolve_dirs(&a.dirs, &conf)?;
            let defaults = GenConfig::default();
            let gen = GenConfig {
                packet_count: conf.pick(a.packets, "packets")?.unwrap_or(defaults.packet_count),
                seed: conf.pick(a.seed, "seed")?.unwrap_or(defaults.seed),
                host_count: conf.pick(a.hosts, "hosts")?.unwrap_or(defaults.host_count),
                heavy_hitter_fraction: conf
                    .pick(a.heavy_fraction, "heavy_fraction")?
                    .unwrap_or(defaults.heavy_hitter_fraction),
                heavy_hitter_count: conf
                    .pick(a.heavy_count, "heavy_count")?
                    .unwrap_or(defaults.heavy_hitter_count),
                ..defaults
            };
            let files = conf.pick(a.files, "files")?.unwrap_or(1);
            let caps = generate_dataset(&gen, files, &paths.data).map_err(runtime)?;
            for c in &caps {
                writeln!(out, "{}\t{}", c.path.display(), c.packets).map_err(io)?;
            }
            if let Some(c) = caps.first() {
                let hh: Vec<String> = c.heavy_hitters.iter().map(|a| a.to_string()).collect();
                writeln!(err, "heavy hitters: {}", hh.join(" ")).map_err(io)?;
            }
        }
        Command::Run(a) => {
            let paths = resolve_dirs(&a.dirs, &conf)?;
            let mut cfg = pipeline_config(paths, &conf, a.split_size, a.stages)?;
            cfg.workers = conf.pick(a.workers, "workers")?.unwrap_or(1);
            cfg.store_shards = conf.pick(a.store_shards, "store_shards")?.unwrap_or(1);
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let (report, failure) = match run(&cfg) {
                Ok(r) => (r, None),
                Err(f) => (f.report, Some(f.error)),
            };
            report.write_csv(out).map_err(io)?;
            if let Some(path) = &a.report {
                let mut buf = Vec::new();
                report.write_csv(&mut buf).map_err(io)?;
                fs::write(path, buf).map_err(io)?;
            }
            if let Some(r) = report.stage(3) {
                if r.skipped > 0 {
                    writeln!(err, "skipped {} malformed packets", r.skipped).map_err(io)?;
                }
            }
            if let Some(e) = failure {
                return Err(runtime(e));
            }
        }
        Command::Query { query } => match query {
            QueryCommand::Connections {
                dirs,
                ip,
                via_array,
                format,
            } => {
                let paths = resolve_dirs(&dirs, &conf)?;
                let format = conf.pick(format, "format")?.unwrap_or(Format::Tsv);
                let result = if via_array {
                    let cfg = PipelineConfig::new(paths.data, paths.work, paths.store);
                    let files = e_files(&cfg).map_err(runtime)?;
                    query_via_array(&files, &ip)
                } else {
                    connections_to(&open_store(&paths.store)?, &ip)
                }
                .map_err(runtime)?;
                match format {
                    Format::Tsv => result.write_tsv(out),
                    Format::Jsonl => result.write_jsonl(out),
                }
                .map_err(io)?;
                writeln!(err, "{} packets in {:.6} s", result.packets.len(), result.elapsed).map_err(io)?;
            }
            QueryCommand::Topk { dirs, field, k, format } => {
                let paths = resolve_dirs(&dirs, &conf)?;
                let format = conf.pick(format, "format")?.unwrap_or(Format::Tsv);
                for (v, d) in top_k(&open_store(&paths.store)?, &field, k).map_err(runtime)? {
                    match format {
                        Format::Tsv => writeln!(out, "{v}\t{d}"),
                        Format::Jsonl => writeln!(out, "{}", json!({"value": v, "degree": d})),
                    }
                    .map_err(io)?;
                }
            }
            QueryCommand::Degdist { dirs, field, format } => {
                let paths = resolve_dirs(&dirs, &conf)?;
                let format = conf.pick(format, "format")?.unwrap_or(Format::Tsv);
                for (d, n) in degree_distribution(&open_store(&paths.store)?, &field).map_err(runtime)? {
                    match format {
                        Format::Tsv => writeln!(out, "{d}\t{n}"),
                        Format::Jsonl => writeln!(out, "{}", json!({"degree": d, "values": n})),
                    }
                    .map_err(io)?;
                }
            }
        },
        Command::Bench(a) => {
            let paths = resolve_dirs(&a.dirs, &conf)?;
            let out_dir = conf.pick(a.out_dir, "out_dir")?.unwrap_or_else(|| paths.work.clone());
            let cfg = pipeline_config(paths, &conf, a.split_size, a.stages)?;
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let workers = match a.workers {
                Some(w) => w,
                None => match conf.get("bench_workers") {
                    Some(s) => s
                        .split(',')
                        .map(|x| x.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| Failure::Usage(format!("config: bad bench_workers {s:?}")))?,
                    None => vec![1, 2, 4, 8],
                },
            };
            if workers.first() != Some(&1) || workers.contains(&0) {
                return Err(Failure::Usage("bench worker list must start at 1".into()));
            }
            let (report, failure) = match bench(&cfg, &workers) {
                Ok(r) => (r, None),
                Err(f) => (f.partial, Some(f.error)),
            };
            fs::create_dir_all(&out_dir).map_err(io)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv).map_err(io)?;
            fs::write(out_dir.join("bench.csv"), &csv).map_err(io)?;
            let mut dat = Vec::new();
            report.write_dat(&mut dat).map_err(io)?;
            fs::write(out_dir.join("bench.dat"), &dat).map_err(io)?;
            out.write_all(&csv).map_err(io)?;
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            writeln!(err, "{cores} cores available; reports in {}", out_dir.display()).map_err(io)?;
            if let Some(e) = failure {
                return Err(runtime(e));
            }
        }
        Command::Dump(a) => {
            let paths = resolve_dirs(&a.dirs, &conf)?;
            let store = open_store(&paths.store)?;
            match a.table {
                Some(t) => {
                    let table = store
                        .table(&t)
                        .ok_or_else(|| Failure::Runtime(format!("no table {t}")))?;
                    table.dump_tsv(out).map_err(io)?;
                }
                None => store.dump_all(out).map_err(io)?,
            }
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}
