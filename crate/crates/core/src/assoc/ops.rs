use std::cmp::Ordering;

use super::{AssocArray, AssocError, CollisionRule, Entry, KeySpec, Result, Semiring, SumDim, Value, ValueKind};

enum Combine {
    Rule(CollisionRule),
    Semiring(Semiring),
}

impl AssocArray {
    /// Element-wise addition over the key union.
    ///
    /// Numeric arrays add, string arrays resolve collisions with
    /// [`CollisionRule::Min`].
    pub fn add(&self, other: &AssocArray) -> Result<AssocArray> {
        let rule = match self.joint_kind(other)? {
            ValueKind::Numeric => CollisionRule::Sum,
            ValueKind::String => CollisionRule::Min,
        };
        self.add_with(other, rule)
    }

    pub fn add_with(&self, other: &AssocArray, rule: CollisionRule) -> Result<AssocArray> {
        self.union_merge(other, Combine::Rule(rule))
    }

    /// Element-wise addition using the semiring's `add`. Numeric only.
    pub fn add_semiring(&self, other: &AssocArray, s: Semiring) -> Result<AssocArray> {
        self.require_numeric("semiring addition")?;
        other.require_numeric("semiring addition")?;
        self.union_merge(other, Combine::Semiring(s))
    }

    fn union_merge(&self, other: &AssocArray, how: Combine) -> Result<AssocArray> {
        let kind = self.joint_kind(other)?;
        let mut out = Vec::with_capacity(self.nnz() + other.nnz());
        let mut a = self.iter().peekable();
        let mut b = other.iter().peekable();
        loop {
            let ord = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (Some(x), Some(y)) => key_cmp((x.0, x.1), (y.0, y.1)),
            };
            let (r, c, v) = match ord {
                Ordering::Less => {
                    let (r, c, v) = a.next().expect("peeked");
                    (r, c, v.clone())
                }
                Ordering::Greater => {
                    let (r, c, v) = b.next().expect("peeked");
                    (r, c, v.clone())
                }
                Ordering::Equal => {
                    let (r, c, x) = a.next().expect("peeked");
                    let (_, _, y) = b.next().expect("peeked");
                    let v = match &how {
                        Combine::Rule(rule) => rule.combine(x.clone(), y.clone())?,
                        Combine::Semiring(s) => Value::Num(s.add(num(x), num(y))),
                    };
                    (r, c, v)
                }
            };
            if !v.is_zero() {
                out.push((r.to_owned(), c.to_owned(), v));
            }
        }
        Ok(AssocArray::from_sorted_unique(kind, out))
    }

    /// Removes from `self` every coordinate present in `other`, whatever its value.
    pub fn subtract(&self, other: &AssocArray) -> Result<AssocArray> {
        let kind = self.joint_kind(other)?;
        let out = self
            .iter()
            .filter(|(r, c, _)| other.get(r, c).is_none())
            .map(|(r, c, v)| (r.to_owned(), c.to_owned(), v.clone()))
            .collect();
        Ok(AssocArray::from_sorted_unique(kind, out))
    }

    /// Hadamard product with ordinary multiplication.
    pub fn element_mul(&self, other: &AssocArray) -> Result<AssocArray> {
        self.element_mul_with(other, Semiring::PlusTimes)
    }

    pub fn element_mul_with(&self, other: &AssocArray, s: Semiring) -> Result<AssocArray> {
        self.require_numeric("element-wise multiplication")?;
        other.require_numeric("element-wise multiplication")?;
        let out = self
            .iter()
            .filter_map(|(r, c, x)| {
                let y = other.get(r, c)?;
                let v = s.mul(num(x), num(y));
                storable(v, s).then(|| (r.to_owned(), c.to_owned(), Value::Num(v)))
            })
            .collect();
        Ok(AssocArray::from_sorted_unique(ValueKind::Numeric, out))
    }

    /// Array multiplication. `self`'s column keys are matched to `other`'s
    /// row keys by exact string equality.
    pub fn matmul(&self, other: &AssocArray, s: Semiring) -> Result<AssocArray> {
        self.require_numeric("array multiplication")?;
        other.require_numeric("array multiplication")?;
        // CSR row offsets for `other`.
        let mut offsets = vec![0usize; other.rows.len() + 1];
        for e in &other.entries {
            offsets[e.row + 1] += 1;
        }
        for i in 0..other.rows.len() {
            offsets[i + 1] += offsets[i];
        }
        // self column index -> other row index
        let inner: Vec<Option<usize>> = self.cols.iter().map(|k| other.rows.binary_search(k).ok()).collect();

        let mut acc = vec![s.zero(); other.cols.len()];
        let mut touched = vec![false; other.cols.len()];
        let mut touched_list: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.entries.len() {
            let row = self.entries[start].row;
            let mut end = start;
            while end < self.entries.len() && self.entries[end].row == row {
                end += 1;
            }
            for e in &self.entries[start..end] {
                let Some(k) = inner[e.col] else { continue };
                let x = num(&e.val);
                for f in &other.entries[offsets[k]..offsets[k + 1]] {
                    acc[f.col] = s.add(acc[f.col], s.mul(x, num(&f.val)));
                    if !touched[f.col] {
                        touched[f.col] = true;
                        touched_list.push(f.col);
                    }
                }
            }
            touched_list.sort_unstable();
            for &j in &touched_list {
                let v = acc[j];
                if storable(v, s) {
                    out.push((self.rows[row].clone(), other.cols[j].clone(), Value::Num(v)));
                }
                acc[j] = s.zero();
                touched[j] = false;
            }
            touched_list.clear();
            start = end;
        }
        Ok(AssocArray::from_sorted_unique(ValueKind::Numeric, out))
    }

    /// Kronecker product. Result keys are `a_key + sep + b_key`.
    pub fn kron(&self, other: &AssocArray, s: Semiring, sep: &str) -> Result<AssocArray> {
        self.require_numeric("Kronecker product")?;
        other.require_numeric("Kronecker product")?;
        if sep.is_empty() {
            return Err(AssocError::Argument("Kronecker separator must be nonempty".into()));
        }
        for k in self.rows.iter().chain(&self.cols).chain(&other.rows).chain(&other.cols) {
            if k.contains(sep) {
                return Err(AssocError::Argument(format!(
                    "key {k:?} contains separator {sep:?}; Kronecker labels would be ambiguous"
                )));
            }
        }
        let mut out = Vec::with_capacity(self.nnz() * other.nnz());
        for (ar, ac, av) in self.iter() {
            for (br, bc, bv) in other.iter() {
                let v = s.mul(num(av), num(bv));
                if storable(v, s) {
                    out.push((format!("{ar}{sep}{br}"), format!("{ac}{sep}{bc}"), Value::Num(v)));
                }
            }
        }
        AssocArray::build(ValueKind::Numeric, out, CollisionRule::First)
    }

    pub fn transpose(&self) -> AssocArray {
        let mut entries: Vec<Entry> = self
            .entries
            .iter()
            .map(|e| Entry {
                row: e.col,
                col: e.row,
                val: e.val.clone(),
            })
            .collect();
        entries.sort_by_key(|e| (e.row, e.col));
        AssocArray::from_parts(self.kind, self.cols.clone(), self.rows.clone(), entries)
    }

    /// Sub-array restricted to matching keys. Labels left without entries are dropped.
    pub fn select(&self, rows: &KeySpec, cols: &KeySpec) -> AssocArray {
        let row_ok: Vec<bool> = self.rows.iter().map(|k| rows.matches(k)).collect();
        let col_ok: Vec<bool> = self.cols.iter().map(|k| cols.matches(k)).collect();
        let out = self
            .entries
            .iter()
            .filter(|e| row_ok[e.row] && col_ok[e.col])
            .map(|e| (self.rows[e.row].clone(), self.cols[e.col].clone(), e.val.clone()))
            .collect();
        AssocArray::from_sorted_unique(self.kind, out)
    }

    /// Sums along one dimension with ordinary addition.
    pub fn sum(&self, dim: SumDim) -> Result<AssocArray> {
        self.require_numeric("sum")?;
        let out = match dim {
            SumDim::Rows => {
                let mut acc = vec![0.0; self.cols.len()];
                for e in &self.entries {
                    acc[e.col] += num(&e.val);
                }
                self.cols
                    .iter()
                    .zip(acc)
                    .filter(|(_, v)| *v != 0.0)
                    .map(|(c, v)| ("1".to_owned(), c.clone(), Value::Num(v)))
                    .collect()
            }
            SumDim::Cols => {
                let mut acc = vec![0.0; self.rows.len()];
                for e in &self.entries {
                    acc[e.row] += num(&e.val);
                }
                self.rows
                    .iter()
                    .zip(acc)
                    .filter(|(_, v)| *v != 0.0)
                    .map(|(r, v)| (r.clone(), "1".to_owned(), Value::Num(v)))
                    .collect()
            }
        };
        Ok(AssocArray::from_sorted_unique(ValueKind::Numeric, out))
    }
}

fn key_cmp(a: (&str, &str), b: (&str, &str)) -> Ordering {
    a.0.as_bytes()
        .cmp(b.0.as_bytes())
        .then_with(|| a.1.as_bytes().cmp(b.1.as_bytes()))
}

fn num(v: &Value) -> f64 {
    v.as_num().expect("numeric array holds numbers")
}

// Arrays never store 0, and semiring zeros are structural.
fn storable(v: f64, s: Semiring) -> bool {
    v != 0.0 && v != s.zero() && !v.is_nan()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num_array(t: &[(&str, &str, f64)]) -> AssocArray {
        AssocArray::from_triples(
            t.iter().map(|x| x.0),
            t.iter().map(|x| x.1),
            t.iter().map(|x| x.2),
            CollisionRule::Sum,
        )
        .unwrap()
    }

    #[test]
    fn add_with_empty_is_identity() {
        let a = num_array(&[("r1", "c1", 2.0), ("r2", "c3", 4.0)]);
        assert_eq!(a.add(&AssocArray::empty(ValueKind::Numeric)).unwrap(), a);
        assert_eq!(AssocArray::empty(ValueKind::String).add(&a).unwrap(), a);
    }

    #[test]
    fn scalar_add() {
        let a = num_array(&[("r1", "c1", 2.0)]);
        let b = num_array(&[("r1", "c1", 3.0)]);
        assert_eq!(a.add(&b).unwrap().get("r1", "c1"), Some(&Value::Num(5.0)));
    }

    #[test]
    fn add_dropping_to_zero_removes_labels() {
        let a = num_array(&[("r1", "c1", 2.0), ("r2", "c2", 1.0)]);
        let b = num_array(&[("r1", "c1", -2.0)]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.row_keys(), ["r2"]);
        assert_eq!(s.col_keys(), ["c2"]);
    }

    #[test]
    fn add_mixed_kinds_is_type_error() {
        let a = num_array(&[("r", "c", 1.0)]);
        let b = AssocArray::from_triples(["r"], ["c"], ["x"], CollisionRule::Min).unwrap();
        assert!(matches!(a.add(&b), Err(AssocError::Type(_))));
    }

    #[test]
    fn string_add_takes_min() {
        let a = AssocArray::from_triples(["r"], ["c"], ["b"], CollisionRule::Min).unwrap();
        let b = AssocArray::from_triples(["r"], ["c"], ["a"], CollisionRule::Min).unwrap();
        assert_eq!(a.add(&b).unwrap().get("r", "c"), Some(&Value::from("a")));
        assert!(a.add_with(&b, CollisionRule::Sum).is_err());
    }

    #[test]
    fn subtract_self_is_empty() {
        let a = num_array(&[("r1", "c1", 2.0), ("r2", "c3", 4.0)]);
        assert!(a.subtract(&a).unwrap().is_empty());
    }

    #[test]
    fn subtract_ignores_values() {
        let a = num_array(&[("r1", "c1", 2.0), ("r1", "c2", 4.0)]);
        let b = num_array(&[("r1", "c1", 99.0)]);
        let d = a.subtract(&b).unwrap();
        assert_eq!(d.col_keys(), ["c2"]);
    }

    #[test]
    fn element_mul_scalar_and_annihilator() {
        let a = num_array(&[("r", "c", 2.0)]);
        let b = num_array(&[("r", "c", 3.0)]);
        assert_eq!(a.element_mul(&b).unwrap().get("r", "c"), Some(&Value::Num(6.0)));
        assert!(a
            .element_mul(&AssocArray::empty(ValueKind::Numeric))
            .unwrap()
            .is_empty());
        let s = AssocArray::from_triples(["r"], ["c"], ["x"], CollisionRule::Min).unwrap();
        assert!(matches!(s.element_mul(&s), Err(AssocError::Type(_))));
    }

    #[test]
    fn matmul_with_labeled_identity() {
        let a = num_array(&[("r1", "x", 2.0), ("r1", "y", 5.0), ("r2", "y", 7.0)]);
        let eye = num_array(&[("x", "x", 1.0), ("y", "y", 1.0)]);
        assert_eq!(a.matmul(&eye, Semiring::PlusTimes).unwrap(), a);
    }

    #[test]
    fn matmul_disjoint_inner_keys_is_empty() {
        let a = num_array(&[("r1", "x", 2.0)]);
        let b = num_array(&[("z", "c", 2.0)]);
        assert!(a.matmul(&b, Semiring::PlusTimes).unwrap().is_empty());
    }

    #[test]
    fn kron_with_unit_relabels() {
        let a = num_array(&[("r1", "c1", 2.0), ("r2", "c2", 3.0)]);
        let unit = num_array(&[("x", "y", 1.0)]);
        let k = a.kron(&unit, Semiring::PlusTimes, ":").unwrap();
        assert_eq!(k.row_keys(), ["r1:x", "r2:x"]);
        assert_eq!(k.col_keys(), ["c1:y", "c2:y"]);
        assert_eq!(k.get("r2:x", "c2:y"), Some(&Value::Num(3.0)));
        assert!(AssocArray::empty(ValueKind::Numeric)
            .kron(&a, Semiring::PlusTimes, ":")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn kron_rejects_separator_in_keys() {
        let a = num_array(&[("r:1", "c1", 2.0)]);
        assert!(matches!(
            a.kron(&a, Semiring::PlusTimes, ":"),
            Err(AssocError::Argument(_))
        ));
    }

    #[test]
    fn transpose_is_involution() {
        let a = num_array(&[("r1", "c2", 2.0), ("r2", "c1", 3.0), ("r2", "c2", 4.0)]);
        let t = a.transpose();
        assert_eq!(t.get("c1", "r2"), Some(&Value::Num(3.0)));
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn select_specs() {
        let a = num_array(&[("a1", "x", 1.0), ("a2", "y", 2.0), ("b1", "z", 3.0)]);
        assert_eq!(a.select(&KeySpec::All, &KeySpec::All), a);
        let p = a.select(&KeySpec::prefix("a"), &KeySpec::All);
        assert_eq!(p.row_keys(), ["a1", "a2"]);
        assert_eq!(p.col_keys(), ["x", "y"]);
        let r = a.select(&KeySpec::Range("a2".into(), "b1".into()), &KeySpec::All);
        assert_eq!(r.row_keys(), ["a2", "b1"]);
        let k = a.select(&KeySpec::All, &KeySpec::keys(["z", "nope"]));
        assert_eq!(k.row_keys(), ["b1"]);
        assert!(a.select(&KeySpec::keys(["q"]), &KeySpec::All).is_empty());
    }

    #[test]
    fn sum_both_dims() {
        let a = num_array(&[("r1", "c1", 1.0), ("r1", "c2", 1.0), ("r2", "c2", 1.0)]);
        let down = a.sum(SumDim::Rows).unwrap();
        assert_eq!(down.row_keys(), ["1"]);
        assert_eq!(down.get("1", "c2"), Some(&Value::Num(2.0)));
        let across = a.sum(SumDim::Cols).unwrap();
        assert_eq!(across.col_keys(), ["1"]);
        assert_eq!(across.get("r1", "1"), Some(&Value::Num(2.0)));
        assert!(AssocArray::empty(ValueKind::Numeric)
            .sum(SumDim::Rows)
            .unwrap()
            .is_empty());
        let s = AssocArray::from_triples(["r"], ["c"], ["x"], CollisionRule::Min).unwrap();
        assert!(matches!(s.sum(SumDim::Cols), Err(AssocError::Type(_))));
    }
}
