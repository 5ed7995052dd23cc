//! C interface to assocpipe.
//!
//! Every function returns an [`ApStatus`]; on failure a message is kept per
//! thread and read back with `ap_last_error`. Objects are opaque handles
//! released with their `_free` function. Strings returned through `char **`
//! out-parameters are owned by the caller and released with
//! `ap_string_free`. All strings are NUL-terminated UTF-8.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use assocpipe::analytics::{self, QueryError};
use assocpipe::assoc::{AssocArray, AssocError, CollisionRule, Semiring, Value};
use assocpipe::pipeline::{self, PipelineConfig, PipelineError};
use assocpipe::store::{EdgeSchema, Store, StoreError};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApStatus {
    Ok = 0,
    /// A required pointer was NULL.
    NullArgument = 1,
    /// A string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad argument value, such as mismatched lengths or a bad key.
    Argument = 3,
    /// Operation not defined for the value kind.
    Type = 4,
    /// Malformed file or input data.
    Format = 5,
    Io = 6,
    /// Table exists with a different combiner, or is missing.
    Schema = 7,
    /// Internal error; the library caught a panic.
    Internal = 8,
}

/// Semiring selector for array arithmetic.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApSemiring {
    PlusTimes = 0,
    MinPlus = 1,
    MaxPlus = 2,
    MaxMin = 3,
}

impl From<ApSemiring> for Semiring {
    fn from(s: ApSemiring) -> Self {
        match s {
            ApSemiring::PlusTimes => Semiring::PlusTimes,
            ApSemiring::MinPlus => Semiring::MinPlus,
            ApSemiring::MaxPlus => Semiring::MaxPlus,
            ApSemiring::MaxMin => Semiring::MaxMin,
        }
    }
}

/// An associative array.
pub struct ApArray(AssocArray);

/// An open table store.
pub struct ApStore(Store);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(ApStatus, String);

impl From<AssocError> for Fail {
    fn from(e: AssocError) -> Self {
        let code = match e {
            AssocError::Argument(_) => ApStatus::Argument,
            AssocError::Type(_) => ApStatus::Type,
            AssocError::Format { .. } => ApStatus::Format,
            AssocError::Io(_) => ApStatus::Io,
        };
        Fail(code, e.to_string())
    }
}

impl From<StoreError> for Fail {
    fn from(e: StoreError) -> Self {
        let code = match e {
            StoreError::Argument(_) => ApStatus::Argument,
            StoreError::Schema(_) => ApStatus::Schema,
            StoreError::Corrupt { .. } => ApStatus::Format,
            StoreError::Io(_) => ApStatus::Io,
        };
        Fail(code, e.to_string())
    }
}

impl From<QueryError> for Fail {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Assoc(a) => a.into(),
            QueryError::Argument(m) => Fail(ApStatus::Argument, m),
            QueryError::MissingTable(_) => Fail(ApStatus::Schema, e.to_string()),
        }
    }
}

impl From<PipelineError> for Fail {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Config(_) => ApStatus::Argument,
            PipelineError::Io(_) => ApStatus::Io,
            _ => ApStatus::Format,
        };
        Fail(code, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ApStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ApStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal error");
            ApStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ApStatus::NullArgument, format!("{what} is NULL"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ApStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn texts<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|s| text(*s, what))
        .collect()
}

unsafe fn out_ptr<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(ApStatus::Format, "string contains NUL".into()))?;
    out_ptr(out, c.into_raw())
}

unsafe fn array<'a>(a: *const ApArray) -> Result<&'a AssocArray, Fail> {
    a.as_ref().map(|h| &h.0).ok_or_else(|| null("array"))
}

unsafe fn store<'a>(s: *const ApStore) -> Result<&'a Store, Fail> {
    s.as_ref().map(|h| &h.0).ok_or_else(|| null("store"))
}

fn boxed(a: AssocArray) -> *mut ApArray {
    Box::into_raw(Box::new(ApArray(a)))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a numeric array from `n` triples. Repeated cells are summed;
/// zeros are dropped.
#[no_mangle]
pub unsafe extern "C" fn ap_array_from_triples(
    rows: *const *const c_char,
    cols: *const *const c_char,
    vals: *const f64,
    n: usize,
    out: *mut *mut ApArray,
) -> ApStatus {
    guard(|| {
        let r = texts(rows, n, "rows")?;
        let c = texts(cols, n, "cols")?;
        let v: &[f64] = match n {
            0 => &[],
            _ if vals.is_null() => return Err(null("vals")),
            _ => std::slice::from_raw_parts(vals, n),
        };
        let a = AssocArray::from_triples(r, c, v.iter().copied(), CollisionRule::Sum)?;
        out_ptr(out, boxed(a))
    })
}

/// Builds a string-valued array from `n` triples. Repeated cells keep the
/// smallest string; empty strings are dropped.
#[no_mangle]
pub unsafe extern "C" fn ap_array_from_string_triples(
    rows: *const *const c_char,
    cols: *const *const c_char,
    vals: *const *const c_char,
    n: usize,
    out: *mut *mut ApArray,
) -> ApStatus {
    guard(|| {
        let r = texts(rows, n, "rows")?;
        let c = texts(cols, n, "cols")?;
        let v = texts(vals, n, "vals")?;
        let a = AssocArray::from_triples(
            r,
            c,
            v.into_iter().map(|s| Value::Str(s.to_owned())),
            CollisionRule::Min,
        )?;
        out_ptr(out, boxed(a))
    })
}

/// Releases an array. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ap_array_free(a: *mut ApArray) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Number of stored entries.
#[no_mangle]
pub unsafe extern "C" fn ap_array_nnz(a: *const ApArray, out: *mut usize) -> ApStatus {
    guard(|| out_ptr(out, array(a)?.nnz()))
}

/// Looks up a numeric cell. `*found` is set to 0 and `*value` to 0 when the
/// cell is empty.
#[no_mangle]
pub unsafe extern "C" fn ap_array_get(
    a: *const ApArray,
    row: *const c_char,
    col: *const c_char,
    value: *mut f64,
    found: *mut bool,
) -> ApStatus {
    guard(|| {
        let a = array(a)?;
        let (r, c) = (text(row, "row")?, text(col, "col")?);
        let v = match a.get(r, c) {
            None => None,
            Some(Value::Num(x)) => Some(*x),
            Some(Value::Str(_)) => return Err(Fail(ApStatus::Type, "array holds strings".into())),
        };
        out_ptr(found, v.is_some())?;
        out_ptr(value, v.unwrap_or(0.0))
    })
}

/// `a + b` (numeric: sum; strings: minimum).
#[no_mangle]
pub unsafe extern "C" fn ap_array_add(a: *const ApArray, b: *const ApArray, out: *mut *mut ApArray) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.add(array(b)?)?)))
}

/// Element-wise product over a semiring.
#[no_mangle]
pub unsafe extern "C" fn ap_array_element_mul(
    a: *const ApArray,
    b: *const ApArray,
    s: ApSemiring,
    out: *mut *mut ApArray,
) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.element_mul_with(array(b)?, s.into())?)))
}

/// Array product over a semiring.
#[no_mangle]
pub unsafe extern "C" fn ap_array_matmul(
    a: *const ApArray,
    b: *const ApArray,
    s: ApSemiring,
    out: *mut *mut ApArray,
) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.matmul(array(b)?, s.into())?)))
}

#[no_mangle]
pub unsafe extern "C" fn ap_array_transpose(a: *const ApArray, out: *mut *mut ApArray) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.transpose())))
}

/// Explodes a string array: `(r, c, v)` becomes `(r, c<sep>v, 1)`.
#[no_mangle]
pub unsafe extern "C" fn ap_array_val2col(a: *const ApArray, sep: *const c_char, out: *mut *mut ApArray) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.val2col(text(sep, "sep")?)?)))
}

/// Inverse of `ap_array_val2col`.
#[no_mangle]
pub unsafe extern "C" fn ap_array_col2val(a: *const ApArray, sep: *const c_char, out: *mut *mut ApArray) -> ApStatus {
    guard(|| out_ptr(out, boxed(array(a)?.col2val(text(sep, "sep")?)?)))
}

/// Text rendering, one `(row,col)     value` line per entry.
#[no_mangle]
pub unsafe extern "C" fn ap_array_to_string(a: *const ApArray, out: *mut *mut c_char) -> ApStatus {
    guard(|| out_string(out, array(a)?.to_string()))
}

#[no_mangle]
pub unsafe extern "C" fn ap_array_save(a: *const ApArray, path: *const c_char) -> ApStatus {
    guard(|| Ok(array(a)?.save(text(path, "path")?)?))
}

#[no_mangle]
pub unsafe extern "C" fn ap_array_load(path: *const c_char, out: *mut *mut ApArray) -> ApStatus {
    guard(|| out_ptr(out, boxed(AssocArray::load(text(path, "path")?)?)))
}

/// Opens (creating if needed) a store directory and its edge tables.
#[no_mangle]
pub unsafe extern "C" fn ap_store_open(dir: *const c_char, out: *mut *mut ApStore) -> ApStatus {
    guard(|| {
        let s = Store::open(text(dir, "dir")?)?;
        EdgeSchema::create(&s)?;
        out_ptr(out, Box::into_raw(Box::new(ApStore(s))))
    })
}

/// Flushes every table and releases the store. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ap_store_close(s: *mut ApStore) -> ApStatus {
    if s.is_null() {
        return ApStatus::Ok;
    }
    let s = Box::from_raw(s);
    guard(move || Ok(s.0.flush_all()?))
}

/// Inserts every entry of `a` into `table`. A non-NULL `value_override`
/// replaces every value.
#[no_mangle]
pub unsafe extern "C" fn ap_store_put_array(
    s: *const ApStore,
    table: *const c_char,
    a: *const ApArray,
    value_override: *const c_char,
) -> ApStatus {
    guard(|| {
        let s = store(s)?;
        let name = text(table, "table")?;
        let t = s
            .table(name)
            .ok_or_else(|| Fail(ApStatus::Schema, format!("no table {name}")))?;
        let v = if value_override.is_null() {
            None
        } else {
            Some(text(value_override, "value_override")?)
        };
        t.put_array(array(a)?, v)?;
        Ok(())
    })
}

/// Cells of one row as `row\tcol\tval` lines.
#[no_mangle]
pub unsafe extern "C" fn ap_store_scan_row(
    s: *const ApStore,
    table: *const c_char,
    row: *const c_char,
    out: *mut *mut c_char,
) -> ApStatus {
    guard(|| {
        let s = store(s)?;
        let name = text(table, "table")?;
        let t = s
            .table(name)
            .ok_or_else(|| Fail(ApStatus::Schema, format!("no table {name}")))?;
        let mut buf = String::new();
        for c in t.scan_row(text(row, "row")?) {
            buf.push_str(&format!("{}\t{}\t{}\n", c.row, c.col, c.val));
        }
        out_string(out, buf)
    })
}

/// Packets to or from `ip` as `packet\tcolumn\tvalue` lines; `*packets`
/// receives the number of distinct packets.
#[no_mangle]
pub unsafe extern "C" fn ap_connections_to(
    s: *const ApStore,
    ip: *const c_char,
    out: *mut *mut c_char,
    packets: *mut usize,
) -> ApStatus {
    guard(|| {
        let r = analytics::connections_to(store(s)?, text(ip, "ip")?)?;
        let mut buf = Vec::new();
        r.write_tsv(&mut buf).map_err(|e| Fail(ApStatus::Io, e.to_string()))?;
        out_ptr(packets, r.packets.len())?;
        out_string(out, String::from_utf8(buf).unwrap_or_default())
    })
}

/// The `k` highest-degree values of `field` as `value\tdegree` lines.
#[no_mangle]
pub unsafe extern "C" fn ap_top_k(
    s: *const ApStore,
    field: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> ApStatus {
    guard(|| {
        let rows = analytics::top_k(store(s)?, text(field, "field")?, k)?;
        let buf: String = rows.iter().map(|(v, d)| format!("{v}\t{d}\n")).collect();
        out_string(out, buf)
    })
}

/// Runs all six pipeline stages over `data_dir`. `split_size` 0 selects the
/// default of 5 MiB.
#[no_mangle]
pub unsafe extern "C" fn ap_pipeline_run(
    data_dir: *const c_char,
    work_dir: *const c_char,
    store_dir: *const c_char,
    workers: usize,
    split_size: u64,
) -> ApStatus {
    guard(|| {
        let mut cfg = PipelineConfig::new(
            PathBuf::from(text(data_dir, "data_dir")?),
            PathBuf::from(text(work_dir, "work_dir")?),
            PathBuf::from(text(store_dir, "store_dir")?),
        );
        cfg.workers = workers;
        if split_size > 0 {
            cfg.split_size = split_size;
        }
        pipeline::run(&cfg).map_err(|f| Fail::from(f.error))?;
        Ok(())
    })
}

/// Empty array, for callers that need a starting value.
#[no_mangle]
pub extern "C" fn ap_array_new() -> *mut ApArray {
    boxed(AssocArray::empty(assocpipe::assoc::ValueKind::Numeric))
}
