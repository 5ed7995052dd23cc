//! The six-stage capture pipeline: uncompress → split → parse → sort →
//! sparse → ingest.
//!
//! Directory layout, for an input `<data>/cap0001.pcap.gz` and domain `d`:
//!
//! ```text
//! <work>/d/cap0001.pcap                              stage 1
//! <work>/d/cap0001/cap0001.pcap.NNNN                 stage 2
//! <work>/d/cap0001/cap0001.pcap.NNNN.tsv             stage 3
//! <work>/d/cap0001/cap0001.pcap.NNNN.tsv.A.bin       stage 4
//! <work>/d/cap0001/cap0001.pcap.NNNN.tsv.A.bin.E.bin stage 5
//! <store>/{Tedge,TedgeT,TedgeDeg}/                   stage 6
//! ```
//!
//! Stages run one after another. Within a stage, tasks are dealt
//! round-robin to `workers` threads; the stage ends when all of them finish.

mod stages;

use std::fmt;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::packet::{read_pcap, PacketError};
use crate::store::{EdgeSchema, Store, StoreError};
pub use stages::{
    sortable_time, step1_uncompress, step2_split, step3_parse, step4_sort, step5_sparse, step6_ingest, EXPLODE_SEP,
};

pub const DEFAULT_SPLIT_SIZE: u64 = 5 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Assoc(#[from] crate::assoc::AssocError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("stage {stage} task {input}: {source}")]
    Task {
        stage: u8,
        input: String,
        #[source]
        source: Box<PipelineError>,
    },
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Directory holding the `*.pcap.gz` inputs.
    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
    pub store_dir: PathBuf,
    pub split_size: u64,
    pub workers: usize,
    pub stages: RangeInclusive<u8>,
    /// Number of stores stage 6 spreads the captures over. With more than
    /// one, each original capture goes whole to `store_dir/shard-NN`.
    pub store_shards: usize,
    /// Used only when the CLI generates input data.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(data_dir: impl Into<PathBuf>, work_dir: impl Into<PathBuf>, store_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            data_dir: data_dir.into(),
            work_dir: work_dir.into(),
            store_dir: store_dir.into(),
            split_size: DEFAULT_SPLIT_SIZE,
            workers: 1,
            stages: 1..=6,
            store_shards: 1,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.split_size == 0 {
            return Err(PipelineError::Config("split_size must be positive".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if self.store_shards == 0 || self.store_shards > 100 {
            return Err(PipelineError::Config("store_shards must lie within 1..=100".into()));
        }
        let (a, b) = (*self.stages.start(), *self.stages.end());
        if a < 1 || b > 6 || a > b {
            return Err(PipelineError::Config(format!("stages {a}..={b} must lie within 1..=6")));
        }
        Ok(())
    }

    /// The per-dataset work directory, named after the data directory.
    pub fn domain_dir(&self) -> PathBuf {
        let domain = self
            .data_dir
            .file_name()
            .map_or_else(|| "data".to_owned(), |n| n.to_string_lossy().into_owned());
        self.work_dir.join(domain)
    }

    /// The store directories stage 6 writes: `store_dir` itself, or one
    /// `shard-NN` directory under it per shard.
    pub fn store_dirs(&self) -> Vec<PathBuf> {
        if self.store_shards <= 1 {
            return vec![self.store_dir.clone()];
        }
        (0..self.store_shards)
            .map(|i| self.store_dir.join(format!("shard-{i:02}")))
            .collect()
    }
}

/// Parses a stage list such as `1-6`, `3`, or `2..5`.
pub fn parse_stages(s: &str) -> Result<RangeInclusive<u8>> {
    let bad = || PipelineError::Config(format!("bad stage range {s:?}"));
    let (a, b) = match s.split_once("..").or_else(|| s.split_once('-')) {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    let a: u8 = a.trim().parse().map_err(|_| bad())?;
    let b: u8 = b.trim().parse().map_err(|_| bad())?;
    if a < 1 || b > 6 || a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

/// One unit of work: a single input file of one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileTask {
    pub stage: u8,
    pub input: PathBuf,
    pub outputs: Vec<PathBuf>,
    /// Original capture name, e.g. `cap0001`.
    pub file_id: String,
    /// Split capture name, e.g. `cap0001.pcap.0003`; empty before stage 2.
    pub split_id: String,
    /// First packet time of the original capture (stage 3 only).
    pub t0_us: Option<i64>,
}

impl FileTask {
    /// Retry marker for the degree batch of an ingest task.
    pub fn marker(&self) -> String {
        format!("{}/{}", self.file_id, self.split_id)
    }
}

/// Per-task counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaskOutcome {
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub files: u64,
    /// Stage 1: outputs already present. Stage 3: malformed packets.
    /// Stage 6: degree batches already applied.
    pub skipped: u64,
}

impl std::ops::AddAssign for TaskOutcome {
    fn add_assign(&mut self, o: TaskOutcome) {
        self.bytes_in += o.bytes_in;
        self.bytes_out += o.bytes_out;
        self.files += o.files;
        self.skipped += o.skipped;
    }
}

/// Wall-clock measurement of one stage. Time covers reading inputs,
/// processing, and writing outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub stage: u8,
    pub workers: usize,
    pub seconds: f64,
    pub tasks: usize,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub files: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub records: Vec<TimingRecord>,
}

impl RunReport {
    pub fn stage(&self, stage: u8) -> Option<&TimingRecord> {
        self.records.iter().find(|r| r.stage == stage)
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "stage,workers,seconds,bytes_in,bytes_out,files")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:.6},{},{},{}",
                r.stage, r.workers, r.seconds, r.bytes_in, r.bytes_out, r.files
            )?;
        }
        Ok(())
    }
}

/// A failed run: the error plus timings of the stages that completed.
#[derive(Debug)]
pub struct RunFailure {
    pub error: PipelineError,
    pub report: RunReport,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} completed stages)",
            self.error,
            self.report.records.len()
        )
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Files in `dir` whose names satisfy `keep`, sorted by name.
fn list(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && keep(&name) {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn name_of(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `true` for names ending in `.pcap.NNNN`.
fn is_split_name(name: &str) -> bool {
    name.rsplit_once('.').is_some_and(|(head, tail)| {
        head.ends_with(".pcap") && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit())
    })
}

fn capture_dirs(domain: &Path) -> Result<Vec<PathBuf>> {
    if !domain.is_dir() {
        return Ok(Vec::new());
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(domain)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

/// First packet time of a split directory's `.0000` capture.
fn first_packet_time(dir: &Path, file_id: &str) -> Result<Option<i64>> {
    let first = dir.join(format!("{file_id}.pcap.0000"));
    if !first.is_file() {
        return Ok(None);
    }
    match read_pcap(&first)?.next() {
        Some(p) => Ok(Some(p?.timestamp_micros())),
        None => Ok(None),
    }
}

/// Enumerates the tasks of one stage from what is on disk, sorted by input.
pub fn stage_tasks(cfg: &PipelineConfig, stage: u8) -> Result<Vec<FileTask>> {
    let domain = cfg.domain_dir();
    let task = |input: PathBuf, outputs: Vec<PathBuf>, file_id: String, split_id: String| FileTask {
        stage,
        input,
        outputs,
        file_id,
        split_id,
        t0_us: None,
    };
    let mut tasks = Vec::new();
    match stage {
        1 => {
            for gz in list(&cfg.data_dir, |n| n.ends_with(".pcap.gz"))? {
                let name = name_of(&gz);
                let pcap = name.strip_suffix(".gz").unwrap_or(&name).to_owned();
                let id = pcap.strip_suffix(".pcap").unwrap_or(&pcap).to_owned();
                tasks.push(task(gz, vec![domain.join(&pcap)], id, String::new()));
            }
        }
        2 => {
            for pcap in list(&domain, |n| n.ends_with(".pcap"))? {
                let name = name_of(&pcap);
                let id = name.strip_suffix(".pcap").unwrap_or(&name).to_owned();
                tasks.push(task(pcap, vec![domain.join(&id)], id, String::new()));
            }
        }
        3..=6 => {
            for dir in capture_dirs(&domain)? {
                let id = name_of(&dir);
                let t0 = if stage == 3 {
                    first_packet_time(&dir, &id)?
                } else {
                    None
                };
                let inputs = match stage {
                    3 => list(&dir, is_split_name)?,
                    4 => list(&dir, |n| n.strip_suffix(".tsv").is_some_and(is_split_name))?,
                    5 => list(&dir, |n| n.strip_suffix(".tsv.A.bin").is_some_and(is_split_name))?,
                    _ => list(&dir, |n| n.strip_suffix(".tsv.A.bin.E.bin").is_some_and(is_split_name))?,
                };
                for input in inputs {
                    let name = name_of(&input);
                    let split = name.split(".pcap.").next().unwrap_or_default();
                    let ordinal: String = name[split.len() + 6..]
                        .chars()
                        .take_while(char::is_ascii_digit)
                        .collect();
                    let split_id = format!("{split}.pcap.{ordinal}");
                    let out = match stage {
                        3 => with_suffix(&input, ".tsv"),
                        4 => with_suffix(&input, ".A.bin"),
                        5 => with_suffix(&input, ".E.bin"),
                        _ => input.clone(),
                    };
                    let outputs = if stage == 6 { Vec::new() } else { vec![out] };
                    let mut t = task(input, outputs, id.clone(), split_id);
                    t.t0_us = t0;
                    tasks.push(t);
                }
            }
        }
        _ => return Err(PipelineError::Config(format!("no stage {stage}"))),
    }
    Ok(tasks)
}

/// All incidence-array files currently in the work directory.
pub fn e_files(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    Ok(stage_tasks(cfg, 6)?.into_iter().map(|t| t.input).collect())
}

/// Runs `f` over `tasks` on `workers` threads, task `i` going to worker
/// `i % workers`. Results come back in task order.
pub fn run_parallel<T, R, F>(tasks: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(tasks.len().max(1));
    if workers == 1 {
        return tasks.iter().map(&f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<R>> = (0..tasks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    tasks
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, t)| (i, f(t)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("pipeline worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every task ran")).collect()
}

fn run_task(cfg: &PipelineConfig, schema: Option<&EdgeSchema>, task: &FileTask) -> Result<TaskOutcome> {
    match task.stage {
        1 => step1_uncompress(task),
        2 => step2_split(task, cfg.split_size),
        3 => step3_parse(task),
        4 => step4_sort(task),
        5 => step5_sparse(task),
        _ => step6_ingest(task, schema.expect("store opened for stage 6")),
    }
}

/// Runs one stage to completion and times it. Stage 6 needs one schema per
/// store shard; captures are assigned to shards round-robin in name order.
pub fn run_stage(cfg: &PipelineConfig, stage: u8, schemas: &[EdgeSchema]) -> Result<TimingRecord> {
    let start = Instant::now();
    let tasks = stage_tasks(cfg, stage)?;
    let mut ids: Vec<&str> = tasks.iter().map(|t| t.file_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let shard = |t: &FileTask| {
        let i = ids.binary_search(&t.file_id.as_str()).unwrap_or(0);
        schemas.get(i % schemas.len().max(1))
    };
    let results = run_parallel(&tasks, cfg.workers, |t| run_task(cfg, shard(t), t));
    let mut total = TaskOutcome::default();
    for (t, r) in tasks.iter().zip(results) {
        match r {
            Ok(o) => total += o,
            Err(e) => {
                return Err(PipelineError::Task {
                    stage,
                    input: t.input.display().to_string(),
                    source: Box::new(e),
                })
            }
        }
    }
    if stage == 6 {
        for s in schemas {
            for t in [&s.tedge, &s.tedge_t, &s.tedge_deg] {
                t.flush()?;
            }
        }
    }
    Ok(TimingRecord {
        stage,
        workers: cfg.workers,
        seconds: start.elapsed().as_secs_f64().max(1e-9),
        tasks: tasks.len(),
        bytes_in: total.bytes_in,
        bytes_out: total.bytes_out,
        files: total.files,
        skipped: total.skipped,
    })
}

/// Runs the configured stages in order, opening the stores of
/// [`PipelineConfig::store_dirs`] if stage 6 is included.
pub fn run(cfg: &PipelineConfig) -> std::result::Result<RunReport, Box<RunFailure>> {
    let mut report = RunReport::default();
    let fail = |error, report| Box::new(RunFailure { error, report });
    if let Err(e) = cfg.validate() {
        return Err(fail(e, report));
    }
    let mut schemas = Vec::new();
    if cfg.stages.contains(&6) {
        for dir in cfg.store_dirs() {
            match Store::open(&dir).and_then(|s| EdgeSchema::create(&s)) {
                Ok(s) => schemas.push(s),
                Err(e) => return Err(fail(e.into(), report)),
            }
        }
    }
    for stage in cfg.stages.clone() {
        match run_stage(cfg, stage, &schemas) {
            Ok(r) => report.records.push(r),
            Err(e) => return Err(fail(e, report)),
        }
    }
    Ok(report)
}
