//! Relabeling and the exploded-schema transform.

use std::collections::HashSet;

use super::{AssocArray, AssocError, CollisionRule, Result, Value, ValueKind};

/// Element-wise `a[i] + sep + b[i]`. A one-element `b` is broadcast.
pub fn cat_str<A, B>(a: &[A], sep: &str, b: &[B]) -> Result<Vec<String>>
where
    A: AsRef<str>,
    B: AsRef<str>,
{
    if b.len() != a.len() && b.len() != 1 {
        return Err(AssocError::Argument(format!(
            "cat_str: second list has {} items, expected {} or 1",
            b.len(),
            a.len()
        )));
    }
    Ok(a.iter()
        .enumerate()
        .map(|(i, x)| {
            let y = if b.len() == 1 { &b[0] } else { &b[i] };
            format!("{}{sep}{}", x.as_ref(), y.as_ref())
        })
        .collect())
}

fn check_relabel(old: usize, new: &[String], what: &str) -> Result<()> {
    if new.len() != old {
        return Err(AssocError::Argument(format!(
            "{what}: got {} labels for {old} keys",
            new.len()
        )));
    }
    let mut seen = HashSet::with_capacity(new.len());
    for k in new {
        if !seen.insert(k.as_str()) {
            return Err(AssocError::Argument(format!("{what}: duplicate label {k:?}")));
        }
    }
    Ok(())
}

impl AssocArray {
    /// Replaces row keys positionally: the i-th current row becomes `new_rows[i]`.
    pub fn put_row(&self, new_rows: Vec<String>) -> Result<AssocArray> {
        check_relabel(self.row_keys().len(), &new_rows, "put_row")?;
        let triples = self
            .entries()
            .iter()
            .map(|e| (new_rows[e.row].clone(), self.col_keys()[e.col].clone(), e.val.clone()))
            .collect();
        AssocArray::build(self.kind(), triples, CollisionRule::First)
    }

    /// Replaces column keys positionally.
    pub fn put_col(&self, new_cols: Vec<String>) -> Result<AssocArray> {
        check_relabel(self.col_keys().len(), &new_cols, "put_col")?;
        let triples = self
            .entries()
            .iter()
            .map(|e| (self.row_keys()[e.row].clone(), new_cols[e.col].clone(), e.val.clone()))
            .collect();
        AssocArray::build(self.kind(), triples, CollisionRule::First)
    }

    /// Explodes a string table into an incidence array: every entry
    /// `(r, c, v)` becomes `(r, c + sep + v, 1)`.
    pub fn val2col(&self, sep: &str) -> Result<AssocArray> {
        if sep.is_empty() {
            return Err(AssocError::Argument("val2col separator must be nonempty".into()));
        }
        if self.is_empty() {
            return Ok(AssocArray::empty(ValueKind::Numeric));
        }
        if self.kind() != ValueKind::String {
            return Err(AssocError::Type("val2col requires a string array".into()));
        }
        if let Some(c) = self.col_keys().iter().find(|c| c.contains(sep)) {
            return Err(AssocError::Argument(format!(
                "column key {c:?} contains separator {sep:?}"
            )));
        }
        let mut triples = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            let v = v.as_str().expect("string array");
            if v.contains(sep) {
                return Err(AssocError::Argument(format!(
                    "value {v:?} at ({r},{c}) contains separator {sep:?}"
                )));
            }
            triples.push((r.to_owned(), format!("{c}{sep}{v}"), Value::Num(1.0)));
        }
        AssocArray::build(ValueKind::Numeric, triples, CollisionRule::First)
    }

    /// Inverse of [`AssocArray::val2col`].
    pub fn col2val(&self, sep: &str) -> Result<AssocArray> {
        if sep.is_empty() {
            return Err(AssocError::Argument("col2val separator must be nonempty".into()));
        }
        if self.is_empty() {
            return Ok(AssocArray::empty(ValueKind::String));
        }
        if self.kind() != ValueKind::Numeric {
            return Err(AssocError::Type("col2val requires a numeric array".into()));
        }
        let mut split = Vec::with_capacity(self.col_keys().len());
        for c in self.col_keys() {
            let mut parts = c.splitn(3, sep);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) if !v.is_empty() => split.push((k, v)),
                _ => {
                    return Err(AssocError::Argument(format!(
                        "column key {c:?} must contain {sep:?} exactly once, followed by a value"
                    )))
                }
            }
        }
        let mut triples = Vec::with_capacity(self.nnz());
        for e in self.entries() {
            if e.val != Value::Num(1.0) {
                return Err(AssocError::Argument(format!(
                    "col2val expects all values to be 1, found {}",
                    e.val
                )));
            }
            let (k, v) = split[e.col];
            triples.push((self.row_keys()[e.row].clone(), k.to_owned(), Value::Str(v.to_owned())));
        }
        triples.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        if let Some(w) = triples.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(AssocError::Argument(format!(
                "row {:?} has several values for column {:?}",
                w[0].0, w[0].1
            )));
        }
        Ok(AssocArray::from_sorted_unique(ValueKind::String, triples))
    }
}
