use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::bufread::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{PacketError, Result};

/// Compresses `path` to `path.gz`, keeping the original.
pub fn gzip_compress(path: &Path) -> Result<PathBuf> {
    let mut out = path.as_os_str().to_owned();
    out.push(".gz");
    let out = PathBuf::from(out);
    let tmp = crate::tmp_sibling(&out);
    let mut src = BufReader::new(File::open(path)?);
    let mut enc = GzEncoder::new(BufWriter::new(File::create(&tmp)?), Compression::default());
    io::copy(&mut src, &mut enc)?;
    enc.finish()?.into_inner().map_err(|e| e.into_error())?.sync_data()?;
    fs::rename(&tmp, &out)?;
    Ok(out)
}

/// Decompresses `x.gz` next to itself as `x`, keeping the original (`gunzip -k`).
pub fn gzip_uncompress(path: &Path) -> Result<PathBuf> {
    let s = path.to_string_lossy();
    let stem = s.strip_suffix(".gz").ok_or_else(|| PacketError::Integrity {
        path: s.to_string(),
        msg: "file name does not end in .gz".into(),
    })?;
    let out = PathBuf::from(stem);
    gzip_uncompress_to(path, &out)?;
    Ok(out)
}

/// Decompresses `src` into `dst`. Returns the decompressed size.
pub fn gzip_uncompress_to(src: &Path, dst: &Path) -> Result<u64> {
    let integrity = |e: io::Error| PacketError::Integrity {
        path: src.display().to_string(),
        msg: e.to_string(),
    };
    let mut dec = MultiGzDecoder::new(BufReader::new(File::open(src)?));
    let tmp = crate::tmp_sibling(dst);
    let mut w = BufWriter::new(File::create(&tmp)?);
    let copied = io::copy(&mut dec, &mut w);
    let n = match copied {
        Ok(n) => n,
        Err(e) => {
            drop(w);
            let _ = fs::remove_file(&tmp);
            return Err(match e.kind() {
                io::ErrorKind::InvalidData | io::ErrorKind::InvalidInput | io::ErrorKind::UnexpectedEof => integrity(e),
                _ => PacketError::Io(e),
            });
        }
    };
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.sync_data()?;
    fs::rename(&tmp, dst)?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_original() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.pcap");
        let body: Vec<u8> = (0..50_000u32).map(|i| (i % 7) as u8).collect();
        fs::write(&p, &body).unwrap();
        let gz = gzip_compress(&p).unwrap();
        assert!(gz.ends_with("data.pcap.gz"));
        assert!(fs::metadata(&gz).unwrap().len() < body.len() as u64);
        fs::remove_file(&p).unwrap();
        let back = gzip_uncompress(&gz).unwrap();
        assert_eq!(back, p);
        assert_eq!(fs::read(&back).unwrap(), body);
        assert!(gz.exists());
    }

    #[test]
    fn corrupt_stream_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data");
        fs::write(&p, vec![42u8; 10_000]).unwrap();
        let gz = gzip_compress(&p).unwrap();
        let mut bytes = fs::read(&gz).unwrap();
        let n = bytes.len();
        bytes[n - 6] ^= 0xff; // inside the CRC32 trailer
        fs::write(&gz, &bytes).unwrap();
        assert!(matches!(
            gzip_uncompress_to(&gz, &dir.path().join("out")),
            Err(PacketError::Integrity { .. })
        ));
        fs::write(&gz, b"not gzip at all").unwrap();
        assert!(matches!(gzip_uncompress(&gz), Err(PacketError::Integrity { .. })));
    }
}
