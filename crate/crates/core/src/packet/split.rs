use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::{read_pcap, PacketError, PcapWriter, Result};

/// Splits a capture into standalone captures of at most `max_bytes` of
/// record data each (a single oversized record still gets its own file).
///
/// Outputs go to `out_dir` and are named `<input file name>.NNNN`, so
/// `cap0001.pcap` becomes `cap0001.pcap.0000`, `cap0001.pcap.0001`, ...
/// Records are never bisected. An empty input produces one empty capture.
pub fn split_pcap(input: &Path, out_dir: &Path, max_bytes: u64) -> Result<Vec<PathBuf>> {
    if max_bytes == 0 {
        return Err(PacketError::Format {
            offset: 0,
            msg: "split size must be positive".into(),
        });
    }
    let name = input
        .file_name()
        .ok_or_else(|| PacketError::Format {
            offset: 0,
            msg: format!("{} has no file name", input.display()),
        })?
        .to_string_lossy()
        .into_owned();
    fs::create_dir_all(out_dir)?;
    let reader = read_pcap(input)?;
    let header = *reader.header();

    let mut outputs = Vec::new();
    let open = |outputs: &mut Vec<PathBuf>| -> Result<PcapWriter<BufWriter<File>>> {
        let path = out_dir.join(format!("{name}.{:04}", outputs.len()));
        let w = PcapWriter::new(BufWriter::new(File::create(&path)?), header)?;
        outputs.push(path);
        Ok(w)
    };
    let mut current = open(&mut outputs)?;
    for p in reader {
        let p = p?;
        let len = p.record_len() as u64;
        if current.record_bytes() > 0 && current.record_bytes() + len > max_bytes {
            current.into_inner()?;
            current = open(&mut outputs)?;
        }
        current.write_packet(&p)?;
    }
    current.into_inner()?;
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::{PcapHeader, RawPacket, RECORD_HEADER_LEN};

    fn write_capture(path: &Path, n: u32) -> Vec<RawPacket> {
        let pkts: Vec<RawPacket> = (0..n)
            .map(|i| RawPacket {
                ts_sec: 100 + i / 10,
                ts_usec: (i % 10) * 100,
                orig_len: 1514,
                data: vec![(i % 251) as u8; 54],
            })
            .collect();
        let mut w = PcapWriter::new(File::create(path).unwrap(), PcapHeader::ethernet(96)).unwrap();
        for p in &pkts {
            w.write_packet(p).unwrap();
        }
        w.into_inner().unwrap();
        pkts
    }

    fn read_all(paths: &[PathBuf]) -> Vec<RawPacket> {
        paths
            .iter()
            .flat_map(|p| read_pcap(p).unwrap().map(|r| r.unwrap()).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn small_file_gives_one_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("cap.pcap");
        let pkts = write_capture(&input, 20);
        let out = split_pcap(&input, &dir.path().join("cap"), 1 << 20).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].ends_with("cap/cap.pcap.0000"));
        assert_eq!(read_all(&out), pkts);
    }

    #[test]
    fn concatenation_equals_input() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("cap.pcap");
        let pkts = write_capture(&input, 1000);
        let rec = (RECORD_HEADER_LEN + 54) as u64;
        let out = split_pcap(&input, dir.path(), 100 * rec).unwrap();
        assert_eq!(out.len(), 10);
        for p in &out {
            let size = fs::metadata(p).unwrap().len() - 24;
            assert!(size <= 100 * rec);
        }
        assert_eq!(read_all(&out), pkts);
    }

    #[test]
    fn oversized_record_gets_its_own_file() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("cap.pcap");
        let pkts = write_capture(&input, 3);
        let out = split_pcap(&input, dir.path(), 10).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(read_all(&out), pkts);
    }

    #[test]
    fn empty_input_gives_one_empty_capture() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("cap.pcap");
        write_capture(&input, 0);
        let out = split_pcap(&input, dir.path(), 100).unwrap();
        assert_eq!(out.len(), 1);
        assert!(read_all(&out).is_empty());
    }
}
