//! Fixed-input scaling benchmark: the same data run at several worker
//! counts, each from a clean work directory and a fresh store.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use crate::pipeline::{run, PipelineConfig, PipelineError, TimingRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub stage: u8,
    pub workers: usize,
    pub seconds: f64,
    /// `T(stage, 1) / T(stage, workers)`.
    pub speedup: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeedupReport {
    pub rows: Vec<SpeedupRow>,
    /// Raw per-point timings, in run order.
    pub timings: Vec<TimingRecord>,
}

impl SpeedupReport {
    /// Builds rows from timings. Every stage needs a 1-worker record.
    pub fn from_timings(timings: Vec<TimingRecord>) -> SpeedupReport {
        let mut rows = Vec::with_capacity(timings.len());
        for t in &timings {
            let base = timings
                .iter()
                .find(|b| b.stage == t.stage && b.workers == 1)
                .map_or(t.seconds, |b| b.seconds);
            let speedup = base / t.seconds;
            rows.push(SpeedupRow {
                stage: t.stage,
                workers: t.workers,
                seconds: t.seconds,
                speedup,
                efficiency: speedup / t.workers as f64,
            });
        }
        rows.sort_by_key(|r| (r.stage, r.workers));
        SpeedupReport { rows, timings }
    }

    pub fn row(&self, stage: u8, workers: usize) -> Option<&SpeedupRow> {
        self.rows.iter().find(|r| r.stage == stage && r.workers == workers)
    }

    /// Summed seconds over `stages` at one worker count, with its speedup.
    pub fn combined(&self, stages: &[u8], workers: usize) -> Option<(f64, f64)> {
        let total = |p: usize| -> Option<f64> { stages.iter().map(|s| self.row(*s, p).map(|r| r.seconds)).sum() };
        let tp = total(workers)?;
        Some((tp, total(1)? / tp))
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "stage,workers,seconds,speedup,efficiency")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.6},{:.4},{:.4}",
                r.stage, r.workers, r.seconds, r.speedup, r.efficiency
            )?;
        }
        Ok(())
    }

    /// Gnuplot data: one line per worker count, one speedup column per
    /// stage. Plot with log-log axes, cores against speedup.
    pub fn write_dat(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mut stages: Vec<u8> = self.rows.iter().map(|r| r.stage).collect();
        stages.dedup();
        let mut workers: Vec<usize> = self.rows.iter().map(|r| r.workers).collect();
        workers.sort_unstable();
        workers.dedup();
        write!(w, "# workers")?;
        for s in &stages {
            write!(w, " stage{s}")?;
        }
        writeln!(w, " ideal")?;
        for p in workers {
            write!(w, "{p}")?;
            for s in &stages {
                match self.row(*s, p) {
                    Some(r) => write!(w, " {:.4}", r.speedup)?,
                    None => write!(w, " NaN")?,
                }
            }
            writeln!(w, " {p}")?;
        }
        writeln!(
            w,
            "# plot: set logscale xy; plot for [c=2:{}] 'bench.dat' using 1:c with linespoints",
            stages.len() + 2
        )?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct BenchFailure {
    pub error: PipelineError,
    pub partial: SpeedupReport,
}

impl fmt::Display for BenchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "benchmark aborted: {}", self.error)
    }
}

impl std::error::Error for BenchFailure {}

/// Where the benchmark point for `workers` keeps its store.
pub fn point_store_dir(cfg: &PipelineConfig, workers: usize) -> PathBuf {
    cfg.work_dir.join(format!("bench-w{workers}")).join("store")
}

/// Runs `cfg.stages` once per entry of `worker_list` (which must start at
/// one worker) on `cfg.data_dir`. Each point gets an empty work directory
/// under `cfg.work_dir/bench-wN/` and a fresh store next to it; the work
/// files are deleted afterwards and the store is kept.
pub fn bench(cfg: &PipelineConfig, worker_list: &[usize]) -> Result<SpeedupReport, Box<BenchFailure>> {
    let fail = |error, timings| {
        Box::new(BenchFailure {
            error,
            partial: SpeedupReport::from_timings(timings),
        })
    };
    if worker_list.first() != Some(&1) || worker_list.contains(&0) {
        let e = PipelineError::Config("worker list must start at 1 and hold positive counts".into());
        return Err(fail(e, Vec::new()));
    }
    let mut timings = Vec::new();
    for &p in worker_list {
        let root = cfg.work_dir.join(format!("bench-w{p}"));
        if root.exists() {
            if let Err(e) = fs::remove_dir_all(&root) {
                return Err(fail(e.into(), timings));
            }
        }
        let point = PipelineConfig {
            work_dir: root.join("work"),
            store_dir: root.join("store"),
            workers: p,
            ..cfg.clone()
        };
        match run(&point) {
            Ok(report) => timings.extend(report.records),
            Err(f) => {
                timings.extend(f.report.records);
                return Err(fail(f.error, timings));
            }
        }
        let _ = fs::remove_dir_all(&point.work_dir);
    }
    Ok(SpeedupReport::from_timings(timings))
}
