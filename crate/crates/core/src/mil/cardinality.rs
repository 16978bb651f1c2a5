//! Cardinality clique potentials over the counts of positive/negative instance labels.

use std::fmt;
use std::sync::Arc;

use super::{ExtScore, Label};
use crate::error::{Error, Result};

/// User-supplied pair of cardinality functions `(c_pos, c_neg)`.
///
/// Implementations must be pure: the same counts always map to the same score.
pub trait CardinalityFunctions: Send + Sync {
    /// Score of `m_pos` positive and `m_neg` negative instances inside a positive bag.
    fn c_pos(&self, m_pos: usize, m_neg: usize) -> ExtScore;
    /// Score of `m_pos` positive and `m_neg` negative instances inside a negative bag.
    fn c_neg(&self, m_pos: usize, m_neg: usize) -> ExtScore;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardinalityKind {
    StandardMil,
    Custom,
}

/// Which instance-count combinations are allowed (and how they score) for each bag label.
#[derive(Clone, Default)]
pub enum CardinalityModel {
    /// A positive bag holds at least one positive instance; a negative bag holds none.
    #[default]
    StandardMil,
    Custom(Arc<dyn CardinalityFunctions>),
}

impl fmt::Debug for CardinalityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardinalityModel::StandardMil => f.write_str("StandardMil"),
            CardinalityModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CardinalityModel {
    pub fn kind(&self) -> CardinalityKind {
        match self {
            CardinalityModel::StandardMil => CardinalityKind::StandardMil,
            CardinalityModel::Custom(_) => CardinalityKind::Custom,
        }
    }

    pub fn c_pos(&self, m_pos: usize, m_neg: usize) -> ExtScore {
        match self {
            CardinalityModel::StandardMil => {
                if m_pos == 0 {
                    ExtScore::Forbidden
                } else {
                    ExtScore::ZERO
                }
            }
            CardinalityModel::Custom(f) => f.c_pos(m_pos, m_neg),
        }
    }

    pub fn c_neg(&self, m_pos: usize, m_neg: usize) -> ExtScore {
        match self {
            CardinalityModel::StandardMil => {
                if m_pos == 0 {
                    ExtScore::ZERO
                } else {
                    ExtScore::Forbidden
                }
            }
            CardinalityModel::Custom(f) => f.c_neg(m_pos, m_neg),
        }
    }

    /// Indicator form: `c_pos` for a positive bag label, `c_neg` for a negative one.
    pub fn potential(&self, m_pos: usize, m_neg: usize, bag_label: Label) -> ExtScore {
        match bag_label {
            Label::Positive => self.c_pos(m_pos, m_neg),
            Label::Negative => self.c_neg(m_pos, m_neg),
        }
    }
}

/// Checked entry point taking signed counts, as they arrive from untyped callers.
pub fn cardinality_potential(
    model: &CardinalityModel,
    m_pos: i64,
    m_neg: i64,
    bag_label: Label,
) -> Result<ExtScore> {
    if m_pos < 0 || m_neg < 0 {
        return Err(Error::Contract(format!(
            "instance counts must be non-negative, got ({m_pos}, {m_neg})"
        )));
    }
    if m_pos + m_neg < 1 {
        return Err(Error::Contract("a bag has at least one instance".into()));
    }
    Ok(model.potential(m_pos as usize, m_neg as usize, bag_label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_mil_table() {
        let m = CardinalityModel::StandardMil;
        let pos = Label::Positive;
        let neg = Label::Negative;
        assert_eq!(cardinality_potential(&m, 0, 5, pos).unwrap(), ExtScore::Forbidden);
        assert_eq!(cardinality_potential(&m, 2, 3, pos).unwrap(), ExtScore::ZERO);
        assert_eq!(cardinality_potential(&m, 0, 5, neg).unwrap(), ExtScore::ZERO);
        assert_eq!(cardinality_potential(&m, 1, 4, neg).unwrap(), ExtScore::Forbidden);
    }

    #[test]
    fn standard_mil_all_counts() {
        let m = CardinalityModel::StandardMil;
        for total in 1..20usize {
            for k in 0..=total {
                let expect_pos = if k == 0 { ExtScore::Forbidden } else { ExtScore::ZERO };
                let expect_neg = if k == 0 { ExtScore::ZERO } else { ExtScore::Forbidden };
                assert_eq!(m.c_pos(k, total - k), expect_pos);
                assert_eq!(m.c_neg(k, total - k), expect_neg);
            }
        }
    }

    #[test]
    fn negative_counts_rejected() {
        let m = CardinalityModel::StandardMil;
        assert!(matches!(
            cardinality_potential(&m, -1, 3, Label::Positive),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            cardinality_potential(&m, 0, 0, Label::Positive),
            Err(Error::Contract(_))
        ));
    }

    struct AtLeastTwo;

    impl CardinalityFunctions for AtLeastTwo {
        fn c_pos(&self, m_pos: usize, _m_neg: usize) -> ExtScore {
            if m_pos >= 2 {
                ExtScore::ZERO
            } else {
                ExtScore::Forbidden
            }
        }
        fn c_neg(&self, m_pos: usize, _m_neg: usize) -> ExtScore {
            ExtScore::Finite(-(m_pos as f64))
        }
    }

    #[test]
    fn custom_model_dispatches() {
        let m = CardinalityModel::Custom(Arc::new(AtLeastTwo));
        assert_eq!(m.kind(), CardinalityKind::Custom);
        assert_eq!(m.potential(1, 3, Label::Positive), ExtScore::Forbidden);
        assert_eq!(m.potential(2, 3, Label::Positive), ExtScore::ZERO);
        assert_eq!(m.potential(3, 0, Label::Negative), ExtScore::Finite(-3.0));
    }
}
