//! Associative arrays: two-dimensional sparse arrays whose rows and columns
//! are labeled by sorted strings and whose entries are numbers or strings.
//!
//! Arrays are immutable. Every operation returns a new array, so a loaded
//! array can be shared across worker threads without synchronization.
//!
//! Storage is a coordinate list kept in row-major order over two sorted key
//! dictionaries. Additive identities (`0`, `""`) are never stored, and every
//! row and column label has at least one entry.

mod io;
mod ops;
mod schema;
mod semiring;
mod value;

use std::fmt;

use thiserror::Error;

pub use schema::cat_str;
pub use semiring::Semiring;
pub use value::{format_number, CollisionRule, Value, ValueKind};

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AssocError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub row: usize,
    pub col: usize,
    pub val: Value,
}

#[derive(Debug, Clone)]
pub struct AssocArray {
    rows: Vec<String>,
    cols: Vec<String>,
    entries: Vec<Entry>,
    kind: ValueKind,
}

/// Coordinate form of an array, sorted by row key then column key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triples {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub vals: Vec<Value>,
}

impl Triples {
    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }
}

/// Which row or column keys a [`AssocArray::select`] keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeySpec {
    All,
    Keys(Vec<String>),
    Prefix(String),
    /// Inclusive on both ends.
    Range(String, String),
}

impl KeySpec {
    pub fn keys<I, S>(keys: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        KeySpec::Keys(keys.into_iter().map(Into::into).collect())
    }

    pub fn prefix(p: impl Into<String>) -> Self {
        KeySpec::Prefix(p.into())
    }

    pub(crate) fn matches(&self, key: &str) -> bool {
        match self {
            KeySpec::All => true,
            KeySpec::Keys(ks) => ks.iter().any(|k| k == key),
            KeySpec::Prefix(p) => key.as_bytes().starts_with(p.as_bytes()),
            KeySpec::Range(lo, hi) => key.as_bytes() >= lo.as_bytes() && key.as_bytes() <= hi.as_bytes(),
        }
    }
}

/// Axis collapsed by [`AssocArray::sum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumDim {
    /// `sum(A, 1)`: one row keyed `"1"`, one entry per column.
    Rows,
    /// `sum(A, 2)`: one column keyed `"1"`, one entry per row.
    Cols,
}

impl AssocArray {
    pub fn empty(kind: ValueKind) -> Self {
        AssocArray {
            rows: Vec::new(),
            cols: Vec::new(),
            entries: Vec::new(),
            kind,
        }
    }

    /// Builds an array from parallel row, column and value lists.
    ///
    /// Keys are deduplicated and sorted, repeated (row, col) pairs are
    /// resolved with `rule` in input order, and zero values are dropped.
    pub fn from_triples<R, C, V>(
        rows: impl IntoIterator<Item = R>,
        cols: impl IntoIterator<Item = C>,
        vals: impl IntoIterator<Item = V>,
        rule: CollisionRule,
    ) -> Result<Self>
    where
        R: Into<String>,
        C: Into<String>,
        V: Into<Value>,
    {
        let rows: Vec<String> = rows.into_iter().map(Into::into).collect();
        let cols: Vec<String> = cols.into_iter().map(Into::into).collect();
        let vals: Vec<Value> = vals.into_iter().map(Into::into).collect();
        if rows.len() != cols.len() || rows.len() != vals.len() {
            return Err(AssocError::Argument(format!(
                "triple lists differ in length: {} rows, {} cols, {} vals",
                rows.len(),
                cols.len(),
                vals.len()
            )));
        }
        let kind = vals.first().map_or(ValueKind::Numeric, Value::kind);
        for v in &vals {
            if v.kind() != kind {
                return Err(AssocError::Type("triples mix numeric and string values".into()));
            }
            if let Value::Num(x) = v {
                if x.is_nan() {
                    return Err(AssocError::Argument("NaN is not a storable value".into()));
                }
            }
        }
        let triples = rows
            .into_iter()
            .zip(cols)
            .zip(vals)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        Self::build(kind, triples, rule)
    }

    pub fn from_find(t: Triples, rule: CollisionRule) -> Result<Self> {
        Self::from_triples(t.rows, t.cols, t.vals, rule)
    }

    /// General constructor: sorts, resolves collisions, drops zeros.
    pub(crate) fn build(
        kind: ValueKind,
        mut triples: Vec<(String, String, Value)>,
        rule: CollisionRule,
    ) -> Result<Self> {
        triples.sort_by(|a, b| {
            a.0.as_bytes()
                .cmp(b.0.as_bytes())
                .then_with(|| a.1.as_bytes().cmp(b.1.as_bytes()))
        });
        let mut merged: Vec<(String, String, Value)> = Vec::with_capacity(triples.len());
        for (r, c, v) in triples {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => {
                    let prev = std::mem::replace(&mut last.2, Value::Num(0.0));
                    last.2 = rule.combine(prev, v)?;
                }
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| !t.2.is_zero());
        Ok(Self::from_sorted_unique(kind, merged))
    }

    /// Constructor for triples already sorted row-major, unique and nonzero.
    pub(crate) fn from_sorted_unique(kind: ValueKind, triples: Vec<(String, String, Value)>) -> Self {
        let mut cols: Vec<String> = triples.iter().map(|t| t.1.clone()).collect();
        cols.sort_unstable();
        cols.dedup();
        let mut rows: Vec<String> = Vec::new();
        let mut entries = Vec::with_capacity(triples.len());
        for (r, c, val) in triples {
            debug_assert!(!val.is_zero());
            if rows.last() != Some(&r) {
                rows.push(r);
            }
            let col = cols.binary_search(&c).expect("column collected above");
            entries.push(Entry {
                row: rows.len() - 1,
                col,
                val,
            });
        }
        AssocArray {
            rows,
            cols,
            entries,
            kind,
        }
    }

    pub(crate) fn from_parts(kind: ValueKind, rows: Vec<String>, cols: Vec<String>, entries: Vec<Entry>) -> Self {
        AssocArray {
            rows,
            cols,
            entries,
            kind,
        }
    }

    pub(crate) fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn row_keys(&self) -> &[String] {
        &self.rows
    }

    pub fn col_keys(&self) -> &[String] {
        &self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (row count, column count)
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn get(&self, row: &str, col: &str) -> Option<&Value> {
        let r = self.rows.binary_search_by(|k| k.as_str().cmp(row)).ok()?;
        let c = self.cols.binary_search_by(|k| k.as_str().cmp(col)).ok()?;
        self.entries
            .binary_search_by(|e| (e.row, e.col).cmp(&(r, c)))
            .ok()
            .map(|i| &self.entries[i].val)
    }

    /// Entries in row-major key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &Value)> + '_ {
        self.entries
            .iter()
            .map(|e| (self.rows[e.row].as_str(), self.cols[e.col].as_str(), &e.val))
    }

    pub fn find(&self) -> Triples {
        let mut t = Triples {
            rows: Vec::with_capacity(self.nnz()),
            cols: Vec::with_capacity(self.nnz()),
            vals: Vec::with_capacity(self.nnz()),
        };
        for (r, c, v) in self.iter() {
            t.rows.push(r.to_owned());
            t.cols.push(c.to_owned());
            t.vals.push(v.clone());
        }
        t
    }

    pub(crate) fn require_numeric(&self, op: &str) -> Result<()> {
        if self.kind == ValueKind::String && !self.is_empty() {
            return Err(AssocError::Type(format!("{op} requires a numeric array")));
        }
        Ok(())
    }

    /// Result kind for a binary op; empty operands adapt to the other side.
    pub(crate) fn joint_kind(&self, other: &AssocArray) -> Result<ValueKind> {
        match (self.is_empty(), other.is_empty()) {
            (true, _) => Ok(other.kind),
            (_, true) => Ok(self.kind),
            _ if self.kind == other.kind => Ok(self.kind),
            _ => Err(AssocError::Type("operands mix numeric and string arrays".into())),
        }
    }
}

impl PartialEq for AssocArray {
    // Empty arrays are equal whatever their nominal kind.
    fn eq(&self, other: &Self) -> bool {
        (self.kind == other.kind || (self.is_empty() && other.is_empty()))
            && self.rows == other.rows
            && self.cols == other.cols
            && self.entries == other.entries
    }
}

impl fmt::Display for AssocArray {
    /// One `(row,col)    value` line per entry.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, c, v) in self.iter() {
            writeln!(f, "({r},{c})     {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_packet() -> AssocArray {
        let cols = [
            "frame.time_relative|0.000000000",
            "frame.time|2017 Apr 12 07:49:36.18828 EDT",
            "ip.dst|63.237.205.194",
            "ip.len|1500",
            "ip.proto|6",
            "ip.src|133.40.77.44",
            "tcp.dstport|55428",
            "tcp.flags|0x00000010",
            "tcp.srcport|80",
        ];
        AssocArray::from_triples(["PacketID"; 9], cols, [1.0; 9], CollisionRule::Min).unwrap()
    }

    #[test]
    fn two_rows_no_collision() {
        let a = AssocArray::from_triples(
            ["p1", "p2"],
            ["ip.src", "ip.src"],
            ["133.40.77.44", "63.237.205.194"],
            CollisionRule::Min,
        )
        .unwrap();
        assert_eq!(a.shape(), (2, 1));
        assert_eq!(a.get("p2", "ip.src"), Some(&Value::from("63.237.205.194")));
    }

    #[test]
    fn reference_triples_make_one_row() {
        let a = reference_packet();
        assert_eq!(a.shape(), (1, 9));
        assert_eq!(a.row_keys(), ["PacketID"]);
        assert_eq!(a.find().len(), 9);
    }

    #[test]
    fn duplicate_with_min_keeps_single_entry() {
        let a = AssocArray::from_triples(["p1", "p1"], ["ip.len", "ip.len"], [100, 100], CollisionRule::Min).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get("p1", "ip.len"), Some(&Value::from(100)));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = AssocArray::from_triples(["a", "b"], ["c"], [1, 2], CollisionRule::Min);
        assert!(matches!(err, Err(AssocError::Argument(_))));
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let err = AssocArray::from_triples(
            ["a", "b"],
            ["c", "c"],
            [Value::from(1), Value::from("x")],
            CollisionRule::Min,
        );
        assert!(matches!(err, Err(AssocError::Type(_))));
    }

    #[test]
    fn zeros_are_not_stored() {
        let a = AssocArray::from_triples(["a", "b"], ["c", "c"], [0, 4], CollisionRule::Min).unwrap();
        assert_eq!(a.row_keys(), ["b"]);
        let s = AssocArray::from_triples(["a"], ["c"], [""], CollisionRule::Min).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn keys_sort_bytewise() {
        let a = AssocArray::from_triples(["b", "B", "a"], ["x", "x", "x"], [1, 2, 3], CollisionRule::Min).unwrap();
        assert_eq!(a.row_keys(), ["B", "a", "b"]);
    }

    #[test]
    fn find_of_empty_is_three_empty_lists() {
        let t = AssocArray::empty(ValueKind::String).find();
        assert!(t.rows.is_empty() && t.cols.is_empty() && t.vals.is_empty());
    }

    #[test]
    fn display_layout() {
        let text = reference_packet().to_string();
        assert!(text.starts_with("(PacketID,frame.time_relative|0.000000000)     1\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
