//! Embedded sorted table store with the edge/degree schema of the pipeline.
//!
//! Each table is a directory holding sorted run files and a `MANIFEST`:
//!
//! ```text
//! <store>/<table>/MANIFEST
//! <store>/<table>/run-NNNN.srt
//! ```
//!
//! Writes land in an in-memory sorted buffer; [`Table::flush`] turns the
//! buffer into a new run, and [`Table::compact`] folds all runs into one.
//! Reads merge the buffer with every run and apply the table's combiner,
//! so neither operation changes what a scan returns.
//!
//! Concurrency contract: any number of threads may write and scan one
//! table. Each put call is applied atomically under the table's write lock,
//! and a scan observes every batch that completed before the scan began and
//! none of a batch still in progress. There is no write-ahead log, so a
//! crash loses the unflushed buffer together with its retry markers.

mod run;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::assoc::{AssocArray, Value};
use run::{merge_sources, read_run, run_file_name, write_run, Manifest};

pub const TEDGE: &str = "Tedge";
pub const TEDGE_T: &str = "TedgeT";
pub const TEDGE_DEG: &str = "TedgeDeg";

const DEFAULT_FLUSH_THRESHOLD: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("corrupt store file {path} at {offset}: {msg}")]
    Corrupt { path: String, offset: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// How values written to the same cell combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    /// The newest value replaces older ones.
    None,
    /// Values are decimal integers and are summed.
    Sum,
}

impl Combiner {
    pub fn as_str(self) -> &'static str {
        match self {
            Combiner::None => "none",
            Combiner::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Combiner> {
        match s {
            "none" => Some(Combiner::None),
            "sum" => Some(Combiner::Sum),
            _ => None,
        }
    }

    pub(crate) fn merge(self, older: &str, newer: &str) -> String {
        match self {
            Combiner::None => newer.to_owned(),
            Combiner::Sum => {
                // Values are validated as integers when put.
                let a: i128 = older.parse().unwrap_or(0);
                let b: i128 = newer.parse().unwrap_or(0);
                (a + b).to_string()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: String,
    pub col: String,
    pub val: String,
}

impl Cell {
    pub fn new(row: impl Into<String>, col: impl Into<String>, val: impl Into<String>) -> Self {
        Cell {
            row: row.into(),
            col: col.into(),
            val: val.into(),
        }
    }

    pub(crate) fn key(&self) -> (&str, &str) {
        (&self.row, &self.col)
    }

    /// The same cell with row and column swapped.
    pub fn transposed(&self) -> Cell {
        Cell::new(self.col.clone(), self.row.clone(), self.val.clone())
    }
}

fn check_cell(c: &Cell, combiner: Combiner) -> Result<()> {
    for (what, s) in [("row", &c.row), ("column", &c.col)] {
        if s.contains(['\0', '\t', '\n']) {
            return Err(StoreError::Argument(format!(
                "{what} key {s:?} contains a reserved byte"
            )));
        }
    }
    if c.val.contains(['\t', '\n']) {
        return Err(StoreError::Argument(format!(
            "value {:?} contains a reserved byte",
            c.val
        )));
    }
    if combiner == Combiner::Sum && c.val.parse::<i64>().is_err() {
        return Err(StoreError::Argument(format!(
            "sum table value {:?} is not a decimal integer",
            c.val
        )));
    }
    Ok(())
}

struct Run {
    id: u64,
    cells: Vec<Cell>,
}

#[derive(Default)]
struct State {
    buffer: BTreeMap<(String, String), String>,
    runs: Vec<Run>,
    markers: BTreeSet<String>,
    pending_markers: bool,
    next_run: u64,
}

pub struct Table {
    name: String,
    combiner: Combiner,
    dir: PathBuf,
    flush_threshold: usize,
    state: RwLock<State>,
}

impl std::fmt::Debug for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Table")
            .field("name", &self.name)
            .field("combiner", &self.combiner)
            .finish_non_exhaustive()
    }
}

impl Table {
    fn create(dir: PathBuf, name: &str, combiner: Combiner) -> Result<Table> {
        fs::create_dir_all(&dir)?;
        let manifest = Manifest {
            name: name.to_owned(),
            combiner,
            runs: Vec::new(),
            markers: BTreeSet::new(),
        };
        manifest.write(&dir.join("MANIFEST"))?;
        Ok(Table {
            name: name.to_owned(),
            combiner,
            dir,
            flush_threshold: DEFAULT_FLUSH_THRESHOLD,
            state: RwLock::new(State {
                next_run: 1,
                ..State::default()
            }),
        })
    }

    fn open(dir: PathBuf) -> Result<Table> {
        let m = Manifest::read(&dir.join("MANIFEST"))?;
        let mut runs = Vec::with_capacity(m.runs.len());
        for &id in &m.runs {
            runs.push(Run {
                id,
                cells: read_run(&dir.join(run_file_name(id)))?,
            });
        }
        let next_run = m.runs.iter().max().map_or(1, |m| m + 1);
        Ok(Table {
            name: m.name,
            combiner: m.combiner,
            dir,
            flush_threshold: DEFAULT_FLUSH_THRESHOLD,
            state: RwLock::new(State {
                buffer: BTreeMap::new(),
                runs,
                markers: m.markers,
                pending_markers: false,
                next_run,
            }),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn combiner(&self) -> Combiner {
        self.combiner
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn apply(&self, st: &mut State, cells: Vec<Cell>) {
        for c in cells {
            let key = (c.row, c.col);
            match st.buffer.get_mut(&key) {
                Some(old) => *old = self.combiner.merge(old, &c.val),
                None => {
                    st.buffer.insert(key, c.val);
                }
            }
        }
    }

    /// Writes a batch atomically. Returns the number of cells written.
    pub fn put(&self, cells: Vec<Cell>) -> Result<usize> {
        for c in &cells {
            check_cell(c, self.combiner)?;
        }
        let n = cells.len();
        let mut st = self.write();
        self.apply(&mut st, cells);
        self.maybe_flush(&mut st)?;
        Ok(n)
    }

    /// Writes the batch unless `marker` was already applied to this table.
    /// Returns whether the batch was applied.
    pub fn put_once(&self, marker: &str, cells: Vec<Cell>) -> Result<bool> {
        if marker.is_empty() || marker.contains(['\n', '\r']) {
            return Err(StoreError::Argument(format!("bad marker {marker:?}")));
        }
        for c in &cells {
            check_cell(c, self.combiner)?;
        }
        let mut st = self.write();
        if st.markers.contains(marker) {
            return Ok(false);
        }
        self.apply(&mut st, cells);
        st.markers.insert(marker.to_owned());
        st.pending_markers = true;
        self.maybe_flush(&mut st)?;
        Ok(true)
    }

    pub fn has_marker(&self, marker: &str) -> bool {
        self.read().markers.contains(marker)
    }

    /// Inserts one cell per array entry. `value_override` replaces every
    /// value (`Some("1")` marks edges); otherwise values are formatted as
    /// decimal strings.
    pub fn put_array(&self, a: &AssocArray, value_override: Option<&str>) -> Result<usize> {
        self.put(array_cells(a, value_override))
    }

    fn maybe_flush(&self, st: &mut State) -> Result<()> {
        if st.buffer.len() >= self.flush_threshold {
            self.flush_locked(st)?;
        }
        Ok(())
    }

    fn manifest(&self, runs: Vec<u64>, markers: &BTreeSet<String>) -> Manifest {
        Manifest {
            name: self.name.clone(),
            combiner: self.combiner,
            runs,
            markers: markers.clone(),
        }
    }

    fn flush_locked(&self, st: &mut State) -> Result<()> {
        if st.buffer.is_empty() && !st.pending_markers {
            return Ok(());
        }
        let mut run_ids: Vec<u64> = st.runs.iter().map(|r| r.id).collect();
        let mut new_run = None;
        if !st.buffer.is_empty() {
            let id = st.next_run;
            let cells: Vec<Cell> = st
                .buffer
                .iter()
                .map(|((r, c), v)| Cell::new(r.clone(), c.clone(), v.clone()))
                .collect();
            let path = self.dir.join(run_file_name(id));
            write_run(&path, &cells)?;
            run_ids.push(id);
            if let Err(e) = self.manifest(run_ids, &st.markers).write(&self.dir.join("MANIFEST")) {
                let _ = fs::remove_file(&path);
                return Err(e);
            }
            new_run = Some(Run { id, cells });
        } else {
            self.manifest(run_ids, &st.markers).write(&self.dir.join("MANIFEST"))?;
        }
        if let Some(run) = new_run {
            st.next_run = run.id + 1;
            st.runs.push(run);
            st.buffer.clear();
        }
        st.pending_markers = false;
        Ok(())
    }

    /// Writes the buffer as a new sorted run.
    pub fn flush(&self) -> Result<()> {
        let mut st = self.write();
        self.flush_locked(&mut st)
    }

    /// Merges every run and the buffer into a single run.
    pub fn compact(&self) -> Result<()> {
        let mut st = self.write();
        if st.runs.len() <= 1 && st.buffer.is_empty() {
            return self.flush_locked(&mut st);
        }
        let merged = self.merged(&st, None);
        let id = st.next_run;
        let path = self.dir.join(run_file_name(id));
        write_run(&path, &merged)?;
        if let Err(e) = self.manifest(vec![id], &st.markers).write(&self.dir.join("MANIFEST")) {
            let _ = fs::remove_file(&path);
            return Err(e);
        }
        for old in &st.runs {
            let _ = fs::remove_file(self.dir.join(run_file_name(old.id)));
        }
        st.runs = vec![Run { id, cells: merged }];
        st.buffer.clear();
        st.next_run = id + 1;
        st.pending_markers = false;
        Ok(())
    }

    /// Number of sorted runs on disk.
    pub fn run_count(&self) -> usize {
        self.read().runs.len()
    }

    fn merged(&self, st: &State, rows: Option<(&str, Option<&str>)>) -> Vec<Cell> {
        // rows: (start row inclusive, end row exclusive)
        let in_range = |r: &str| match rows {
            None => true,
            Some((lo, hi)) => r >= lo && hi.is_none_or(|h| r < h),
        };
        let mut slices: Vec<&[Cell]> = Vec::with_capacity(st.runs.len() + 1);
        for run in &st.runs {
            let cells = &run.cells[..];
            let (a, b) = match rows {
                None => (0, cells.len()),
                Some((lo, hi)) => (
                    cells.partition_point(|c| c.row.as_str() < lo),
                    hi.map_or(cells.len(), |h| cells.partition_point(|c| c.row.as_str() < h)),
                ),
            };
            slices.push(&cells[a..b]);
        }
        let buffered: Vec<Cell> = match rows {
            None => st
                .buffer
                .iter()
                .map(|((r, c), v)| Cell::new(r.clone(), c.clone(), v.clone()))
                .collect(),
            Some((lo, _)) => st
                .buffer
                .range((lo.to_owned(), String::new())..)
                .take_while(|((r, _), _)| in_range(r))
                .map(|((r, c), v)| Cell::new(r.clone(), c.clone(), v.clone()))
                .collect(),
        };
        slices.push(&buffered);
        slices.retain(|s| !s.is_empty());
        merge_sources(&slices, self.combiner)
    }

    pub fn scan_all(&self) -> Vec<Cell> {
        self.merged(&self.read(), None)
    }

    pub fn scan_row(&self, row: &str) -> Vec<Cell> {
        let mut hi = row.to_owned();
        hi.push('\0');
        self.merged(&self.read(), Some((row, Some(&hi))))
    }

    /// Rows in `[start, end)`; `None` leaves the end open.
    pub fn scan_rows(&self, start: &str, end: Option<&str>) -> Vec<Cell> {
        self.merged(&self.read(), Some((start, end)))
    }

    /// Rows starting with `prefix`.
    pub fn scan_prefix(&self, prefix: &str) -> Vec<Cell> {
        match prefix_end(prefix) {
            Some(end) => self.scan_rows(prefix, Some(&end)),
            None => self.scan_rows(prefix, None),
        }
    }

    /// Writes every visible cell as a `row\tcol\tval` line.
    pub fn dump_tsv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for c in self.scan_all() {
            writeln!(w, "{}\t{}\t{}", c.row, c.col, c.val)?;
        }
        Ok(())
    }
}

/// Smallest string greater than every string with this prefix, if any.
fn prefix_end(prefix: &str) -> Option<String> {
    let mut chars: Vec<char> = prefix.chars().collect();
    while let Some(last) = chars.pop() {
        if let Some(next) = char::from_u32(last as u32 + 1) {
            chars.push(next);
            return Some(chars.into_iter().collect());
        }
    }
    None
}

pub(crate) fn array_cells(a: &AssocArray, value_override: Option<&str>) -> Vec<Cell> {
    a.iter()
        .map(|(r, c, v)| {
            let val = match (value_override, v) {
                (Some(o), _) => o.to_owned(),
                (None, Value::Str(s)) => s.clone(),
                (None, v) => v.to_string(),
            };
            Cell::new(r, c, val)
        })
        .collect()
}

/// Column query through the transpose table: cells of the original table
/// whose column starts with `col_prefix`, returned in (row, col) orientation.
pub fn scan_col(transpose: &Table, col_prefix: &str) -> Vec<Cell> {
    let mut cells: Vec<Cell> = transpose.scan_prefix(col_prefix).iter().map(Cell::transposed).collect();
    cells.sort();
    cells
}

/// A directory of tables.
pub struct Store {
    dir: PathBuf,
    tables: Mutex<BTreeMap<String, Arc<Table>>>,
}

impl Store {
    /// Opens (creating if needed) the store at `dir` and loads its tables.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_owned();
        fs::create_dir_all(&dir)?;
        let mut tables = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            if entry.path().join("MANIFEST").is_file() {
                let t = Table::open(entry.path())?;
                tables.insert(t.name.clone(), Arc::new(t));
            }
        }
        Ok(Store {
            dir,
            tables: Mutex::new(tables),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Creates a table, or returns the existing one if the combiner matches.
    pub fn create_table(&self, name: &str, combiner: Combiner) -> Result<Arc<Table>> {
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            || name.starts_with('.')
        {
            return Err(StoreError::Argument(format!("bad table name {name:?}")));
        }
        let mut tables = self.tables.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = tables.get(name) {
            if t.combiner != combiner {
                return Err(StoreError::Schema(format!(
                    "table {name} exists with combiner {}, requested {}",
                    t.combiner.as_str(),
                    combiner.as_str()
                )));
            }
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(Table::create(self.dir.join(name), name, combiner)?);
        tables.insert(name.to_owned(), Arc::clone(&t));
        Ok(t)
    }

    pub fn table(&self, name: &str) -> Option<Arc<Table>> {
        self.tables.lock().unwrap_or_else(|e| e.into_inner()).get(name).cloned()
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    fn all_tables(&self) -> Vec<Arc<Table>> {
        self.tables
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect()
    }

    pub fn flush_all(&self) -> Result<()> {
        self.all_tables().iter().try_for_each(|t| t.flush())
    }

    pub fn compact_all(&self) -> Result<()> {
        self.all_tables().iter().try_for_each(|t| t.compact())
    }

    /// Dumps every table as `table\trow\tcol\tval` lines, tables in name order.
    pub fn dump_all(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for t in self.all_tables() {
            for c in t.scan_all() {
                writeln!(w, "{}\t{}\t{}\t{}", t.name, c.row, c.col, c.val)?;
            }
        }
        Ok(())
    }
}

/// The edge, transpose and degree tables written by ingest.
#[derive(Debug, Clone)]
pub struct EdgeSchema {
    pub tedge: Arc<Table>,
    pub tedge_t: Arc<Table>,
    pub tedge_deg: Arc<Table>,
}

impl EdgeSchema {
    pub fn create(store: &Store) -> Result<EdgeSchema> {
        Ok(EdgeSchema {
            tedge: store.create_table(TEDGE, Combiner::None)?,
            tedge_t: store.create_table(TEDGE_T, Combiner::None)?,
            tedge_deg: store.create_table(TEDGE_DEG, Combiner::Sum)?,
        })
    }
}
