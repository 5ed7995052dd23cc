use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{PacketError, PacketFields, Result, FIELD_NAMES};

/// A decoded TSV file: header names plus rows of equal width.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Writes a header line of field names, then one line per packet.
pub fn write_tsv(records: &[PacketFields], path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let tmp = crate::tmp_sibling(path);
    let mut w = BufWriter::new(File::create(&tmp)?);
    let mut written = 0u64;
    let header = FIELD_NAMES.join("\t");
    writeln!(w, "{header}")?;
    written += header.len() as u64 + 1;
    for r in records {
        let vals = r.values();
        for v in &vals {
            if v.contains(['\t', '\n', '\r']) {
                return Err(PacketError::Malformed(format!(
                    "field value {v:?} contains a separator"
                )));
            }
        }
        let line = vals.join("\t");
        writeln!(w, "{line}")?;
        written += line.len() as u64 + 1;
    }
    w.into_inner().map_err(|e| e.into_error())?.sync_data()?;
    std::fs::rename(&tmp, path)?;
    Ok(written)
}

pub fn read_tsv(path: impl AsRef<Path>) -> Result<TsvTable> {
    let path = path.as_ref();
    let err = |line: usize, msg: String| PacketError::Tsv {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h?.split('\t').map(str::to_owned).collect(),
        None => return Err(err(1, "missing header line".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if row.len() != header.len() {
            return Err(err(i + 2, format!("{} fields, header has {}", row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok(TsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> PacketFields {
        PacketFields::from_values(&[
            "0.000000000",
            "2017 Apr 12 11:49:36.18828 UTC",
            "63.237.205.194",
            "1500",
            "6",
            "133.40.77.44",
            "55428",
            "0x00000010",
            "80",
        ])
        .unwrap()
    }

    #[test]
    fn header_only_for_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        write_tsv(&[], &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "frame.time_relative\tframe.time\tip.dst\tip.len\tip.proto\tip.src\ttcp.dstport\ttcp.flags\ttcp.srcport\n"
        );
        let t = read_tsv(&p).unwrap();
        assert_eq!(t.header, FIELD_NAMES);
        assert!(t.rows.is_empty());
    }

    #[test]
    fn reference_row_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        write_tsv(&[rec()], &p).unwrap();
        let t = read_tsv(&p).unwrap();
        assert_eq!(PacketFields::from_values(&t.rows[0]).unwrap(), rec());
    }

    #[test]
    fn ragged_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        std::fs::write(&p, "a\tb\n1\t2\n3\n").unwrap();
        match read_tsv(&p) {
            Err(PacketError::Tsv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
