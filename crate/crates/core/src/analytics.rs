//! Graph queries over an ingested store, and the same connection query
//! answered from the incidence arrays directly.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;
use thiserror::Error;

use crate::assoc::{AssocArray, AssocError, KeySpec};
use crate::store::{Cell, Store, TEDGE, TEDGE_DEG, TEDGE_T};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("store has no {0} table")]
    MissingTable(&'static str),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

pub type Result<T, E = QueryError> = std::result::Result<T, E>;

/// Packets matching a query and their full Tedge rows.
#[derive(Debug, Clone, Default)]
pub struct QueryResult {
    /// Sorted, unique packet IDs.
    pub packets: Vec<String>,
    /// Every cell of every matched packet, sorted by (row, col).
    pub cells: Vec<Cell>,
    pub elapsed: f64,
}

impl QueryResult {
    /// Result equality ignoring timing.
    pub fn same_answer(&self, other: &QueryResult) -> bool {
        self.packets == other.packets && self.cells == other.cells
    }

    /// One `packet\tcolumn\tvalue` line per cell.
    pub fn write_tsv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for c in &self.cells {
            writeln!(w, "{}\t{}\t{}", c.row, c.col, c.val)?;
        }
        Ok(())
    }

    /// One JSON object per matched packet: `{"packet": id, "fields": {col: val}}`.
    pub fn write_jsonl(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let mut by_packet: BTreeMap<&str, serde_json::Map<String, serde_json::Value>> = BTreeMap::new();
        for c in &self.cells {
            by_packet
                .entry(&c.row)
                .or_default()
                .insert(c.col.clone(), c.val.clone().into());
        }
        for (p, fields) in by_packet {
            writeln!(w, "{}", json!({ "packet": p, "fields": fields }))?;
        }
        Ok(())
    }
}

/// Canonical dotted-quad form of `ip`.
fn parse_ip(ip: &str) -> Result<String> {
    ip.trim()
        .parse::<Ipv4Addr>()
        .map(|a| a.to_string())
        .map_err(|_| QueryError::Argument(format!("{ip:?} is not an IPv4 address")))
}

fn endpoint_columns(ip: &str) -> [String; 2] {
    [format!("ip.src|{ip}"), format!("ip.dst|{ip}")]
}

/// Packets whose source or destination is `ip`, looked up in TedgeT and
/// expanded to their full Tedge rows.
pub fn connections_to(store: &Store, ip: &str) -> Result<QueryResult> {
    let start = Instant::now();
    let ip = parse_ip(ip)?;
    let tedge = store.table(TEDGE).ok_or(QueryError::MissingTable(TEDGE))?;
    let tedge_t = store.table(TEDGE_T).ok_or(QueryError::MissingTable(TEDGE_T))?;
    // Exact rows: a prefix scan for 1.1.1.1 would also match 1.1.1.10.
    let packets: BTreeSet<String> = endpoint_columns(&ip)
        .iter()
        .flat_map(|col| tedge_t.scan_row(col))
        .map(|c| c.col)
        .collect();
    let cells = packets.iter().flat_map(|p| tedge.scan_row(p)).collect();
    Ok(QueryResult {
        packets: packets.into_iter().collect(),
        cells,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// The same query as [`connections_to`], answered by selecting columns of
/// the incidence arrays `E` instead of scanning the store.
pub fn query_via_array(e_files: &[PathBuf], ip: &str) -> Result<QueryResult> {
    let start = Instant::now();
    let ip = parse_ip(ip)?;
    let wanted = KeySpec::keys(endpoint_columns(&ip));
    let mut packets = BTreeSet::new();
    let mut cells = Vec::new();
    for f in e_files {
        let e = AssocArray::load(f)?;
        let hits = e.select(&KeySpec::All, &wanted);
        if hits.is_empty() {
            continue;
        }
        let rows = e.select(&KeySpec::keys(hits.row_keys().iter().cloned()), &KeySpec::All);
        packets.extend(rows.row_keys().iter().cloned());
        cells.extend(rows.iter().map(|(r, c, v)| Cell::new(r, c, v.to_string())));
    }
    cells.sort();
    Ok(QueryResult {
        packets: packets.into_iter().collect(),
        cells,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// `(value, degree)` pairs of `field` from TedgeDeg, highest degree first,
/// ties by ascending value.
pub fn field_degrees(store: &Store, field: &str) -> Result<Vec<(String, u64)>> {
    let deg = store.table(TEDGE_DEG).ok_or(QueryError::MissingTable(TEDGE_DEG))?;
    let prefix = format!("{field}|");
    let mut out: Vec<(String, u64)> = deg
        .scan_prefix(&prefix)
        .into_iter()
        .filter(|c| c.col == "degree")
        .map(|c| (c.row[prefix.len()..].to_owned(), c.val.parse().unwrap_or(0)))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// The `k` highest-degree values of `field`.
pub fn top_k(store: &Store, field: &str, k: usize) -> Result<Vec<(String, u64)>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut all = field_degrees(store, field)?;
    all.truncate(k);
    Ok(all)
}

/// Histogram degree → number of values of `field` with that degree.
pub fn degree_distribution(store: &Store, field: &str) -> Result<BTreeMap<u64, u64>> {
    let mut hist = BTreeMap::new();
    for (_, d) in field_degrees(store, field)? {
        *hist.entry(d).or_insert(0) += 1;
    }
    Ok(hist)
}
