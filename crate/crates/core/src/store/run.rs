//! On-disk formats: sorted run files and the per-table manifest.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Cell, Combiner, Result, StoreError};

const RUN_MAGIC: &[u8; 4] = b"SRT1";
const MANIFEST_VERSION: &str = "assocpipe-table 1";

/// Run layout: `"SRT1"`, u64 LE cell count, then per cell three
/// u32-LE-length-prefixed UTF-8 strings (row, col, val), sorted by (row, col).
pub(crate) fn write_run(path: &Path, cells: &[Cell]) -> Result<()> {
    let tmp = crate::tmp_sibling(path);
    let res = (|| -> Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(RUN_MAGIC)?;
        w.write_all(&(cells.len() as u64).to_le_bytes())?;
        for c in cells {
            for s in [&c.row, &c.col, &c.val] {
                w.write_all(&(s.len() as u32).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_data()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

pub(crate) fn read_run(path: &Path) -> Result<Vec<Cell>> {
    let buf = fs::read(path)?;
    let corrupt = |offset: usize, msg: &str| StoreError::Corrupt {
        path: path.display().to_string(),
        offset: offset as u64,
        msg: msg.to_owned(),
    };
    if buf.len() < 12 || &buf[..4] != RUN_MAGIC {
        return Err(corrupt(0, "bad run header"));
    }
    let n = u64::from_le_bytes(buf[4..12].try_into().expect("8 bytes"));
    if n > buf.len() as u64 {
        return Err(corrupt(4, "cell count exceeds file size"));
    }
    let mut pos = 12;
    let next_str = |pos: &mut usize| -> Result<String> {
        let at = *pos;
        let len_bytes = buf.get(at..at + 4).ok_or_else(|| corrupt(at, "truncated"))?;
        let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        let bytes = buf.get(at + 4..at + 4 + len).ok_or_else(|| corrupt(at, "truncated"))?;
        *pos = at + 4 + len;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt(at, "invalid UTF-8"))
    };
    let mut cells: Vec<Cell> = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let at = pos;
        let cell = Cell {
            row: next_str(&mut pos)?,
            col: next_str(&mut pos)?,
            val: next_str(&mut pos)?,
        };
        if cells.last().is_some_and(|p| p.key() >= cell.key()) {
            return Err(corrupt(at, "cells out of order"));
        }
        cells.push(cell);
    }
    if pos != buf.len() {
        return Err(corrupt(pos, "trailing bytes"));
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Manifest {
    pub name: String,
    pub combiner: Combiner,
    pub runs: Vec<u64>,
    pub markers: BTreeSet<String>,
}

pub(crate) fn run_file_name(id: u64) -> String {
    format!("run-{id:04}.srt")
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "{MANIFEST_VERSION}\nname {}\ncombiner {}\n",
            self.name,
            self.combiner.as_str()
        );
        for id in &self.runs {
            text.push_str(&format!("run {}\n", run_file_name(*id)));
        }
        for m in &self.markers {
            text.push_str(&format!("marker {m}\n"));
        }
        let tmp = crate::tmp_sibling(path);
        let res = (|| -> Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_data()?;
            fs::rename(&tmp, path)?;
            Ok(())
        })();
        if res.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        res
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        let bad = |line: usize, msg: &str| StoreError::Corrupt {
            path: path.display().to_string(),
            offset: line as u64,
            msg: msg.to_owned(),
        };
        let mut lines = text.lines().enumerate();
        if lines.next().map(|l| l.1) != Some(MANIFEST_VERSION) {
            return Err(bad(1, "unknown manifest version"));
        }
        let mut name = None;
        let mut combiner = None;
        let mut runs = Vec::new();
        let mut markers = BTreeSet::new();
        for (i, line) in lines {
            let (key, rest) = line.split_once(' ').ok_or_else(|| bad(i + 1, "malformed line"))?;
            match key {
                "name" => name = Some(rest.to_owned()),
                "combiner" => combiner = Some(Combiner::parse(rest).ok_or_else(|| bad(i + 1, "unknown combiner"))?),
                "run" => {
                    let id = rest
                        .strip_prefix("run-")
                        .and_then(|s| s.strip_suffix(".srt"))
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(i + 1, "bad run name"))?;
                    runs.push(id);
                }
                "marker" => {
                    markers.insert(rest.to_owned());
                }
                _ => return Err(bad(i + 1, "unknown manifest key")),
            }
        }
        Ok(Manifest {
            name: name.ok_or_else(|| bad(0, "missing name"))?,
            combiner: combiner.ok_or_else(|| bad(0, "missing combiner"))?,
            runs,
            markers,
        })
    }
}

/// k-way merge of sorted, duplicate-free sources. Later sources are newer:
/// plain tables keep the newest value, sum tables add all values.
pub(crate) fn merge_sources(sources: &[&[Cell]], combiner: Combiner) -> Vec<Cell> {
    if let [only] = sources {
        return only.to_vec();
    }
    let mut heap = BinaryHeap::new();
    for (s, cells) in sources.iter().enumerate() {
        if let Some(c) = cells.first() {
            heap.push(Reverse((c.row.as_str(), c.col.as_str(), s, 0usize)));
        }
    }
    let mut out: Vec<Cell> = Vec::new();
    while let Some(Reverse((row, col, s, i))) = heap.pop() {
        let val = &sources[s][i].val;
        match out.last_mut() {
            Some(last) if last.row == row && last.col == col => {
                last.val = combiner.merge(&last.val, val);
            }
            _ => out.push(Cell {
                row: row.to_owned(),
                col: col.to_owned(),
                val: val.clone(),
            }),
        }
        if let Some(c) = sources[s].get(i + 1) {
            heap.push(Reverse((c.row.as_str(), c.col.as_str(), s, i + 1)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(r: &str, c: &str, v: &str) -> Cell {
        Cell {
            row: r.into(),
            col: c.into(),
            val: v.into(),
        }
    }

    #[test]
    fn run_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run-0001.srt");
        let cells = vec![cell("a", "x", "1"), cell("a", "y", "2"), cell("b", "x", "")];
        write_run(&p, &cells).unwrap();
        assert_eq!(read_run(&p).unwrap(), cells);
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_run(&p), Err(StoreError::Corrupt { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("MANIFEST");
        let m = Manifest {
            name: "TedgeDeg".into(),
            combiner: Combiner::Sum,
            runs: vec![1, 3],
            markers: ["cap0000.pcap.0001".to_owned()].into(),
        };
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
    }

    #[test]
    fn merge_newest_wins_or_sums() {
        let old = vec![cell("a", "x", "1"), cell("b", "x", "5")];
        let new = vec![cell("a", "x", "2"), cell("c", "x", "7")];
        let plain = merge_sources(&[&old, &new], Combiner::None);
        assert_eq!(
            plain,
            vec![cell("a", "x", "2"), cell("b", "x", "5"), cell("c", "x", "7")]
        );
        let summed = merge_sources(&[&old, &new], Combiner::Sum);
        assert_eq!(summed[0], cell("a", "x", "3"));
    }
}
