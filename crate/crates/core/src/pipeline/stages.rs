//! The six stage bodies. Each takes one [`FileTask`] and is independent of
//! every other task in its stage.

use std::fs;
use std::path::Path;

use chrono::NaiveDateTime;

use super::{FileTask, Result, TaskOutcome};
use crate::assoc::{cat_str, AssocArray, CollisionRule, KeySpec, SumDim, Value};
use crate::packet::{extract_fields, gzip_uncompress_to, read_pcap, read_tsv, split_pcap, write_tsv, PacketError};
use crate::store::{array_cells, EdgeSchema};

/// Separator between field name and value in exploded column keys.
pub const EXPLODE_SEP: &str = "|";

fn file_len(p: &Path) -> u64 {
    fs::metadata(p).map(|m| m.len()).unwrap_or(0)
}

/// Stage 1: decompresses `capNNNN.pcap.gz` into the work directory, keeping
/// the original. An output that already exists is left alone.
pub fn step1_uncompress(task: &FileTask) -> Result<TaskOutcome> {
    let out = &task.outputs[0];
    let bytes_in = file_len(&task.input);
    if out.is_file() {
        return Ok(TaskOutcome {
            bytes_in,
            bytes_out: file_len(out),
            files: 0,
            skipped: 1,
        });
    }
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    let n = gzip_uncompress_to(&task.input, out)?;
    Ok(TaskOutcome {
        bytes_in,
        bytes_out: n,
        files: 1,
        skipped: 0,
    })
}

/// Stage 2: cuts one capture into `split_size`-byte captures under a
/// directory named after it (`cap0001.pcap` → `cap0001/cap0001.pcap.NNNN`).
/// The directory is cleared first so stale splits never survive a re-run.
pub fn step2_split(task: &FileTask, split_size: u64) -> Result<TaskOutcome> {
    let dir = &task.outputs[0];
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    let parts = split_pcap(&task.input, dir, split_size)?;
    Ok(TaskOutcome {
        bytes_in: file_len(&task.input),
        bytes_out: parts.iter().map(|p| file_len(p)).sum(),
        files: parts.len() as u64,
        skipped: 0,
    })
}

/// Stage 3: extracts the header fields of every packet in a split into a
/// TSV file. Relative times count from the first packet of the original
/// capture (`task.t0_us`). Malformed packets are skipped and counted.
pub fn step3_parse(task: &FileTask) -> Result<TaskOutcome> {
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut t0 = task.t0_us;
    for p in read_pcap(&task.input)? {
        let p = p?;
        let t0 = *t0.get_or_insert(p.timestamp_micros());
        match extract_fields(&p, t0) {
            Ok(f) => records.push(f),
            Err(PacketError::Malformed(_)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let bytes_out = write_tsv(&records, &task.outputs[0])?;
    Ok(TaskOutcome {
        bytes_in: file_len(&task.input),
        bytes_out,
        files: 1,
        skipped,
    })
}

/// Rewrites `YYYY Mon DD HH:MM:SS.fffff ZONE` as `YYYY-MM-DD HH:MM:SS.fffff`,
/// which sorts lexicographically in time order.
pub fn sortable_time(t: &str) -> Option<String> {
    let (stamp, _zone) = t.rsplit_once(' ')?;
    let (whole, frac) = stamp.split_once('.')?;
    if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let dt = NaiveDateTime::parse_from_str(whole, "%Y %b %d %H:%M:%S").ok()?;
    Some(format!("{}.{frac}", dt.format("%Y-%m-%d %H:%M:%S")))
}

/// Stage 4: loads a TSV into a dense string array keyed by 7-digit packet
/// ordinal and field name, replaces `frame.time` with its sortable form
/// (`A = (A - At) + At`), appends `.<split>.A.mat` to every row key and
/// saves the array.
pub fn step4_sort(task: &FileTask) -> Result<TaskOutcome> {
    let tsv = read_tsv(&task.input)?;
    let (mut r, mut c, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in tsv.rows.iter().enumerate() {
        for (name, val) in tsv.header.iter().zip(row) {
            if !val.is_empty() {
                r.push(format!("{:07}", i + 1));
                c.push(name.clone());
                v.push(Value::Str(val.clone()));
            }
        }
    }
    let a = AssocArray::from_triples(r, c, v, CollisionRule::Min)?;

    let times = a.select(&KeySpec::All, &KeySpec::keys(["frame.time"]));
    let (mut tr, mut tc, mut tv) = (Vec::new(), Vec::new(), Vec::new());
    for (row, col, val) in times.iter() {
        let old = val.as_str().unwrap_or_default();
        let new = sortable_time(old).ok_or_else(|| PacketError::Tsv {
            path: task.input.display().to_string(),
            line: row.parse::<usize>().map_or(0, |n| n + 1),
            msg: format!("unparseable frame.time {old:?}"),
        })?;
        tr.push(row.to_owned());
        tc.push(col.to_owned());
        tv.push(Value::Str(new));
    }
    let at = AssocArray::from_triples(tr, tc, tv, CollisionRule::Min)?;
    let a = a.subtract(&at)?.add(&at)?;

    let suffix = format!("{}.A.mat", task.split_id);
    let a = a.put_row(cat_str(a.row_keys(), ".", &[suffix])?)?;
    a.save(&task.outputs[0])?;
    Ok(TaskOutcome {
        bytes_in: file_len(&task.input),
        bytes_out: file_len(&task.outputs[0]),
        files: 1,
        skipped: 0,
    })
}

/// Stage 5: explodes the dense array into the packet × `field|value`
/// incidence array `E = val2col(A, '|')`.
pub fn step5_sparse(task: &FileTask) -> Result<TaskOutcome> {
    let a = AssocArray::load(&task.input)?;
    let e = a.val2col(EXPLODE_SEP)?;
    e.save(&task.outputs[0])?;
    Ok(TaskOutcome {
        bytes_in: file_len(&task.input),
        bytes_out: file_len(&task.outputs[0]),
        files: 1,
        skipped: 0,
    })
}

/// Stage 6: writes E into Tedge with value `"1"`, its transpose into
/// TedgeT, and adds the column sums of E (`field|value` degrees) to
/// TedgeDeg. The degree batch carries the task's marker, so a retried task
/// does not count twice; the edge puts are idempotent overwrites.
pub fn step6_ingest(task: &FileTask, schema: &EdgeSchema) -> Result<TaskOutcome> {
    let e = AssocArray::load(&task.input)?;
    schema.tedge.put_array(&e, Some("1"))?;
    schema.tedge_t.put_array(&e.transpose(), Some("1"))?;
    let edeg = if e.is_empty() {
        e.clone()
    } else {
        e.transpose().sum(SumDim::Cols)?.put_col(vec!["degree".to_owned()])?
    };
    let applied = schema.tedge_deg.put_once(&task.marker(), array_cells(&edeg, None))?;
    Ok(TaskOutcome {
        bytes_in: file_len(&task.input),
        bytes_out: 0,
        files: 1,
        skipped: u64::from(!applied),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_rewrite() {
        assert_eq!(
            sortable_time("2017 Apr 12 07:49:36.18828 EDT").as_deref(),
            Some("2017-04-12 07:49:36.18828")
        );
        assert_eq!(
            sortable_time("2017 Dec 01 00:00:00.00000 UTC").as_deref(),
            Some("2017-12-01 00:00:00.00000")
        );
        assert_eq!(sortable_time("garbage"), None);
        assert_eq!(sortable_time("2017 Foo 12 07:49:36.1 UTC"), None);
    }
}
