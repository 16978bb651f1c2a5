use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

/// A real score extended with a distinguished "forbidden" value standing in for negative infinity.
///
/// Forbidden absorbs addition and compares below every finite score. It never enters floating
/// point arithmetic, so `forbidden + x` stays identifiable instead of turning into NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtScore {
    Forbidden,
    Finite(f64),
}

impl ExtScore {
    pub const ZERO: ExtScore = ExtScore::Finite(0.0);

    pub fn is_forbidden(self) -> bool {
        matches!(self, ExtScore::Forbidden)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtScore::Finite(v) => Some(v),
            ExtScore::Forbidden => None,
        }
    }
}

impl From<f64> for ExtScore {
    fn from(v: f64) -> Self {
        ExtScore::Finite(v)
    }
}

impl Add for ExtScore {
    type Output = ExtScore;

    fn add(self, rhs: ExtScore) -> ExtScore {
        match (self, rhs) {
            (ExtScore::Finite(a), ExtScore::Finite(b)) => ExtScore::Finite(a + b),
            _ => ExtScore::Forbidden,
        }
    }
}

impl Add<f64> for ExtScore {
    type Output = ExtScore;

    fn add(self, rhs: f64) -> ExtScore {
        self + ExtScore::Finite(rhs)
    }
}

impl PartialOrd for ExtScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtScore::Forbidden, ExtScore::Forbidden) => Some(Ordering::Equal),
            (ExtScore::Forbidden, ExtScore::Finite(_)) => Some(Ordering::Less),
            (ExtScore::Finite(_), ExtScore::Forbidden) => Some(Ordering::Greater),
            (ExtScore::Finite(a), ExtScore::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtScore::Forbidden => f.write_str("-inf"),
            ExtScore::Finite(v) => write!(f, "{v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forbidden_absorbs_addition() {
        assert_eq!(ExtScore::Forbidden + 3.0, ExtScore::Forbidden);
        assert_eq!(ExtScore::Finite(1.5) + ExtScore::Forbidden, ExtScore::Forbidden);
        assert_eq!(ExtScore::Finite(1.5) + 2.0, ExtScore::Finite(3.5));
    }

    #[test]
    fn forbidden_orders_below_finite() {
        assert!(ExtScore::Forbidden < ExtScore::Finite(-1e300));
        assert!(ExtScore::Finite(0.0) > ExtScore::Forbidden);
        assert_eq!(
            ExtScore::Forbidden.partial_cmp(&ExtScore::Forbidden),
            Some(Ordering::Equal)
        );
    }
}
