//! Binary array files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "AA01"                    magic + format version
//! u8                        value kind (0 numeric, 1 string)
//! u64 n, n × (u64 len, utf8) row keys, strictly ascending
//! u64 m, m × (u64 len, utf8) column keys, strictly ascending
//! u64 nnz, nnz × (u64 row, u64 col, u8 tag, payload)
//!     tag 0: f64 bits        tag 1: u64 len, utf8
//! ```
//!
//! Triples are stored in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AssocArray, AssocError, Entry, Result, Value, ValueKind};

const MAGIC: &[u8; 4] = b"AA01";

impl AssocArray {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.nnz() * 32);
        out.extend_from_slice(MAGIC);
        out.push(match self.kind() {
            ValueKind::Numeric => 0,
            ValueKind::String => 1,
        });
        for keys in [self.row_keys(), self.col_keys()] {
            put_u64(&mut out, keys.len() as u64);
            for k in keys {
                put_str(&mut out, k);
            }
        }
        put_u64(&mut out, self.nnz() as u64);
        for e in self.entries() {
            put_u64(&mut out, e.row as u64);
            put_u64(&mut out, e.col as u64);
            match &e.val {
                Value::Num(x) => {
                    out.push(0);
                    out.extend_from_slice(&x.to_le_bytes());
                }
                Value::Str(s) => {
                    out.push(1);
                    put_str(&mut out, s);
                }
            }
        }
        out
    }

    /// Decodes and validates every array invariant.
    pub fn from_bytes(buf: &[u8]) -> Result<AssocArray> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.err_at(0, "bad magic, expected \"AA01\""));
        }
        let kind = match r.u8()? {
            0 => ValueKind::Numeric,
            1 => ValueKind::String,
            t => return Err(r.err_at(4, &format!("unknown value kind {t}"))),
        };
        let rows = r.keys("row")?;
        let cols = r.keys("column")?;
        let nnz = r.count()?;
        let mut entries = Vec::with_capacity(nnz.min(buf.len() / 17));
        let mut row_used = vec![false; rows.len()];
        let mut col_used = vec![false; cols.len()];
        for _ in 0..nnz {
            let at = r.pos as u64;
            let row = r.index(rows.len(), "row")?;
            let col = r.index(cols.len(), "column")?;
            let val = match r.u8()? {
                0 => {
                    let bits: [u8; 8] = r.take(8)?.try_into().expect("8 bytes");
                    Value::Num(f64::from_le_bytes(bits))
                }
                1 => Value::Str(r.string()?),
                t => return Err(r.err_at(at, &format!("unknown value tag {t}"))),
            };
            if val.kind() != kind {
                return Err(r.err_at(at, "value kind differs from header"));
            }
            if val.is_zero() || val.as_num().is_some_and(f64::is_nan) {
                return Err(r.err_at(at, "stored value is zero or NaN"));
            }
            if let Some(prev) = entries.last() {
                let prev: &Entry = prev;
                if (prev.row, prev.col) >= (row, col) {
                    return Err(r.err_at(at, "triples are not in strict row-major order"));
                }
            }
            row_used[row] = true;
            col_used[col] = true;
            entries.push(Entry { row, col, val });
        }
        if r.pos != buf.len() {
            return Err(r.err_at(r.pos as u64, "trailing bytes after triples"));
        }
        if row_used.iter().chain(&col_used).any(|u| !u) {
            return Err(r.err_at(r.pos as u64, "key without entries"));
        }
        Ok(AssocArray::from_parts(kind, rows, cols, entries))
    }

    /// Writes the array atomically (temporary file, then rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = crate::tmp_sibling(path);
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_data()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AssocArray> {
        AssocArray::from_bytes(&fs::read(path)?)
    }
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u64(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: u64, msg: &str) -> AssocError {
        AssocError::Format {
            offset,
            msg: msg.to_owned(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err_at(self.pos as u64, "truncated file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        let b: [u8; 8] = self.take(8)?.try_into().expect("8 bytes");
        Ok(u64::from_le_bytes(b))
    }

    // A count can never exceed the bytes left, which bounds allocations.
    fn count(&mut self) -> Result<usize> {
        let at = self.pos as u64;
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(self.err_at(at, "count exceeds remaining file size"));
        }
        Ok(n as usize)
    }

    fn index(&mut self, bound: usize, what: &str) -> Result<usize> {
        let at = self.pos as u64;
        let i = self.u64()?;
        if i >= bound as u64 {
            return Err(self.err_at(at, &format!("{what} index {i} out of bounds ({bound})")));
        }
        Ok(i as usize)
    }

    fn string(&mut self) -> Result<String> {
        let at = self.pos as u64;
        let n = self.count()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.err_at(at, "invalid UTF-8"))
    }

    fn keys(&mut self, what: &str) -> Result<Vec<String>> {
        let n = self.count()?;
        let mut keys: Vec<String> = Vec::with_capacity(n);
        for _ in 0..n {
            let at = self.pos as u64;
            let k = self.string()?;
            if keys.last().is_some_and(|prev| prev.as_bytes() >= k.as_bytes()) {
                return Err(self.err_at(at, &format!("{what} keys not strictly ascending")));
            }
            keys.push(k);
        }
        Ok(keys)
    }
}
