#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use assocpipe::packet::{generate_dataset, merge_counts, GenConfig, GeneratedCapture, GroundTruth};
use assocpipe::pipeline::{run, PipelineConfig, RunReport};
use assocpipe::store::{Store, TEDGE_DEG};

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// "2017 Apr 12 07:49:36.18828 UTC" -> "2017-04-12 07:49:36.18828", by table lookup.
pub fn oracle_sortable(raw: &str) -> String {
    let parts: Vec<&str> = raw.split(' ').collect();
    let month = MONTHS.iter().position(|m| *m == parts[1]).expect("month name") + 1;
    format!("{}-{month:02}-{} {}", parts[0], parts[2], parts[3])
}

/// Expected TedgeDeg contents, `field|value` -> count, from generator truth.
pub fn expected_degrees(truth: &GroundTruth) -> BTreeMap<String, u64> {
    truth
        .counts
        .iter()
        .map(|((f, v), n)| {
            let v = if f == "frame.time" {
                oracle_sortable(v)
            } else {
                v.clone()
            };
            (format!("{f}|{v}"), *n)
        })
        .collect()
}

pub fn store_degrees(store: &Store) -> BTreeMap<String, u64> {
    store
        .table(TEDGE_DEG)
        .expect("degree table")
        .scan_all()
        .into_iter()
        .map(|c| {
            assert_eq!(c.col, "degree");
            (c.row, c.val.parse().expect("decimal degree"))
        })
        .collect()
}

/// Compacts every table and returns the full store dump.
pub fn compacted_dump(store_dir: &Path) -> String {
    let s = Store::open(store_dir).unwrap();
    s.compact_all().unwrap();
    let mut out = Vec::new();
    s.dump_all(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

pub struct Dataset {
    pub dir: tempfile::TempDir,
    pub caps: Vec<GeneratedCapture>,
}

impl Dataset {
    pub fn new(packets: u64, files: usize, seed: u64) -> Dataset {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig {
            packet_count: packets,
            seed,
            ..GenConfig::default()
        };
        let caps = generate_dataset(&cfg, files, &dir.path().join("data")).unwrap();
        Dataset { dir, caps }
    }

    pub fn truth(&self) -> GroundTruth {
        merge_counts(self.caps.iter().map(|c| &c.truth))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    /// A config with its own work and store directories under `tag`.
    pub fn config(&self, tag: &str, workers: usize, split_size: u64) -> PipelineConfig {
        let root = self.dir.path().join(tag);
        let mut cfg = PipelineConfig::new(self.data_dir(), root.join("work"), root.join("store"));
        cfg.workers = workers;
        cfg.split_size = split_size;
        cfg
    }

    pub fn run(&self, tag: &str, workers: usize, split_size: u64) -> (PipelineConfig, RunReport) {
        let cfg = self.config(tag, workers, split_size);
        let report = run(&cfg).unwrap_or_else(|f| panic!("pipeline failed: {f}"));
        (cfg, report)
    }
}
