use std::cmp::Ordering;
use std::fmt;

use super::AssocError;

/// Kind of values held by an array. One array holds one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Numeric,
    String,
}

/// A single array entry: a 64-bit number or a string.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Num(_) => ValueKind::Numeric,
            Value::Str(_) => ValueKind::String,
        }
    }

    /// The additive identity of the value's kind: `0` or `""`. These are never stored.
    pub fn is_zero(&self) -> bool {
        match self {
            Value::Num(x) => *x == 0.0,
            Value::Str(s) => s.is_empty(),
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Num(_) => None,
            Value::Str(s) => Some(s),
        }
    }

    /// Total order within a kind: numeric by value, strings by bytes.
    pub(crate) fn cmp_same_kind(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.as_bytes().cmp(b.as_bytes()),
            (Value::Num(_), Value::Str(_)) => Ordering::Less,
            (Value::Str(_), Value::Num(_)) => Ordering::Greater,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Num(x as f64)
    }
}

impl From<i32> for Value {
    fn from(x: i32) -> Self {
        Value::Num(f64::from(x))
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

/// Formats integral numbers without a fractional part, like `num2str`.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => f.write_str(&format_number(*x)),
            Value::Str(s) => f.write_str(s),
        }
    }
}

/// How two values landing on the same (row, col) are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionRule {
    /// Smaller value wins (byte order for strings).
    #[default]
    Min,
    Max,
    /// The value seen first is kept.
    First,
    /// Numeric addition. Not defined for strings.
    Sum,
}

impl CollisionRule {
    pub fn combine(self, first: Value, second: Value) -> Result<Value, AssocError> {
        if first.kind() != second.kind() {
            return Err(AssocError::Type("cannot combine numeric and string values".into()));
        }
        Ok(match self {
            CollisionRule::Min => {
                if second.cmp_same_kind(&first) == Ordering::Less {
                    second
                } else {
                    first
                }
            }
            CollisionRule::Max => {
                if second.cmp_same_kind(&first) == Ordering::Greater {
                    second
                } else {
                    first
                }
            }
            CollisionRule::First => first,
            CollisionRule::Sum => match (first, second) {
                (Value::Num(a), Value::Num(b)) => Value::Num(a + b),
                _ => return Err(AssocError::Type("sum collision rule requires numeric values".into())),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_numbers_print_without_fraction() {
        assert_eq!(format_number(1500.0), "1500");
        assert_eq!(format_number(-3.0), "-3");
        assert_eq!(format_number(0.5), "0.5");
    }

    #[test]
    fn min_max_first_are_idempotent() {
        for rule in [CollisionRule::Min, CollisionRule::Max, CollisionRule::First] {
            let v = Value::from("63.237.205.194");
            assert_eq!(rule.combine(v.clone(), v.clone()).unwrap(), v);
            let n = Value::from(100);
            assert_eq!(rule.combine(n.clone(), n.clone()).unwrap(), n);
        }
    }

    #[test]
    fn string_min_is_bytewise() {
        let got = CollisionRule::Min.combine(Value::from("b"), Value::from("B")).unwrap();
        assert_eq!(got, Value::from("B"));
    }

    #[test]
    fn sum_rejects_strings() {
        assert!(CollisionRule::Sum.combine(Value::from("a"), Value::from("b")).is_err());
        assert_eq!(
            CollisionRule::Sum.combine(Value::from(2), Value::from(3)).unwrap(),
            Value::from(5)
        );
    }
}
