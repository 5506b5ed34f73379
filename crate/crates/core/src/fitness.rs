//! Pseudo-Boolean benchmark functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmdaError};
use crate::model::BitString;

/// Fitness function selector, written on the command line as
/// `leading_ones`, `one_max` or `neutral_suffix:<k>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FitnessKind {
    LeadingOnes,
    OneMax,
    /// LeadingOnes on the first `n - k` bits; the last `k` bits are neutral.
    NeutralSuffixLeadingOnes {
        k: usize,
    },
}

impl FitnessKind {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Self::NeutralSuffixLeadingOnes { k } if k < 1 || k >= n => {
                Err(UmdaError::InvalidFitness(format!(
                    "neutral suffix k = {k} must satisfy 1 <= k < n = {n}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, x: &BitString) -> usize {
        match *self {
            Self::LeadingOnes => leading_ones(x),
            Self::OneMax => one_max(x),
            Self::NeutralSuffixLeadingOnes { k } => x.leading_ones().min(x.len() - k),
        }
    }

    /// Largest attainable value on strings of length `n`.
    pub fn optimum_value(&self, n: usize) -> usize {
        match *self {
            Self::LeadingOnes | Self::OneMax => n,
            Self::NeutralSuffixLeadingOnes { k } => n - k,
        }
    }

    /// Length of the prefix that LeadingOnes-type fitness scores, or `None`
    /// when the function is not prefix-based.
    pub fn scored_prefix(&self, n: usize) -> Option<usize> {
        match *self {
            Self::LeadingOnes => Some(n),
            Self::NeutralSuffixLeadingOnes { k } => Some(n - k),
            Self::OneMax => None,
        }
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LeadingOnes => f.write_str("leading_ones"),
            Self::OneMax => f.write_str("one_max"),
            Self::NeutralSuffixLeadingOnes { k } => write!(f, "neutral_suffix:{k}"),
        }
    }
}

impl FromStr for FitnessKind {
    type Err = UmdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading_ones" => Ok(Self::LeadingOnes),
            "one_max" => Ok(Self::OneMax),
            other => {
                let k = other
                    .strip_prefix("neutral_suffix:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| {
                        UmdaError::InvalidFitness(format!("unknown fitness {other:?}"))
                    })?;
                if k == 0 {
                    return Err(UmdaError::InvalidFitness(
                        "neutral suffix needs k >= 1".into(),
                    ));
                }
                Ok(Self::NeutralSuffixLeadingOnes { k })
            }
        }
    }
}

impl TryFrom<String> for FitnessKind {
    type Error = UmdaError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FitnessKind> for String {
    fn from(kind: FitnessKind) -> Self {
        kind.to_string()
    }
}

/// Number of leading 1s. Equals `n` only for the all-ones string.
pub fn leading_ones(x: &BitString) -> usize {
    x.leading_ones()
}

pub fn one_max(x: &BitString) -> usize {
    x.count_ones()
}

pub fn neutral_suffix_leading_ones(x: &BitString, k: usize) -> Result<usize> {
    let kind = FitnessKind::NeutralSuffixLeadingOnes { k };
    kind.validate(x.len())?;
    Ok(kind.evaluate(x))
}

/// Exhaustive check that setting 1-based position `i` from 0 to 1 never
/// lowers the fitness, over all `2^(n-1)` contexts.
pub fn weakly_prefers_one_bruteforce(f: FitnessKind, n: usize, i: usize) -> Result<bool> {
    if n > 16 {
        return Err(UmdaError::InvalidParams(format!(
            "exhaustive preference check limited to n <= 16, got {n}"
        )));
    }
    if n < 2 {
        return Err(UmdaError::InvalidDimension(n));
    }
    if i < 1 || i > n {
        return Err(UmdaError::InvalidParams(format!(
            "position {i} outside [1, {n}]"
        )));
    }
    f.validate(n)?;
    let target = i - 1;
    for context in 0u32..(1 << (n - 1)) {
        let mut with_zero = BitString::zeros(n);
        let mut rest = context;
        for pos in (0..n).filter(|&p| p != target) {
            with_zero.set(pos, rest & 1 == 1);
            rest >>= 1;
        }
        let mut with_one = with_zero.clone();
        with_one.set(target, true);
        if f.evaluate(&with_one) < f.evaluate(&with_zero) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn leading_ones_examples() {
        assert_eq!(leading_ones(&bits("11111")), 5);
        assert_eq!(leading_ones(&bits("01111")), 0);
        assert_eq!(leading_ones(&bits("1101")), 2);
    }

    #[test]
    fn one_max_examples() {
        assert_eq!(one_max(&bits("1101")), 3);
        assert_eq!(one_max(&BitString::zeros(8)), 0);
        assert_eq!(one_max(&BitString::ones(8)), 8);
    }

    #[test]
    fn neutral_suffix_examples() {
        assert_eq!(neutral_suffix_leading_ones(&bits("1110"), 1).unwrap(), 3);
        assert_eq!(neutral_suffix_leading_ones(&bits("0111"), 2).unwrap(), 0);
        for tail in ["00", "01", "10", "11"] {
            assert_eq!(
                neutral_suffix_leading_ones(&bits(&format!("11{tail}")), 2).unwrap(),
                2
            );
        }
        assert!(neutral_suffix_leading_ones(&bits("1110"), 0).is_err());
        assert!(neutral_suffix_leading_ones(&bits("1110"), 4).is_err());
    }

    #[test]
    fn preference_examples() {
        assert!(weakly_prefers_one_bruteforce(FitnessKind::LeadingOnes, 6, 3).unwrap());
        assert!(weakly_prefers_one_bruteforce(FitnessKind::OneMax, 6, 1).unwrap());
        let neutral = FitnessKind::NeutralSuffixLeadingOnes { k: 2 };
        assert!(weakly_prefers_one_bruteforce(neutral, 6, 6).unwrap());
        assert!(weakly_prefers_one_bruteforce(FitnessKind::LeadingOnes, 17, 1).is_err());
    }

    #[test]
    fn leading_ones_prefers_one_everywhere() {
        for n in 2..=10 {
            for i in 1..=n {
                assert!(weakly_prefers_one_bruteforce(FitnessKind::LeadingOnes, n, i).unwrap());
            }
        }
    }

    #[test]
    fn fitness_kind_parses() {
        assert_eq!(
            "leading_ones".parse::<FitnessKind>().unwrap(),
            FitnessKind::LeadingOnes
        );
        assert_eq!(
            "one_max".parse::<FitnessKind>().unwrap(),
            FitnessKind::OneMax
        );
        assert_eq!(
            "neutral_suffix:3".parse::<FitnessKind>().unwrap(),
            FitnessKind::NeutralSuffixLeadingOnes { k: 3 }
        );
        assert!("neutral_suffix:0".parse::<FitnessKind>().is_err());
        assert!("jump".parse::<FitnessKind>().is_err());
        assert!(FitnessKind::NeutralSuffixLeadingOnes { k: 4 }
            .validate(4)
            .is_err());
    }
}
