use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How two value strings are turned into a duplicate prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    /// 1 if the strings are equal, 0 otherwise.
    Exact,
    /// `1 - levenshtein(a, b) / max(|a|, |b|)`, lengths in Unicode scalars.
    #[default]
    Edit,
}

impl FromStr for SimilarityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SimilarityMode::Exact),
            "edit" => Ok(SimilarityMode::Edit),
            other => Err(format!("unknown similarity `{other}` (expected exact or edit)")),
        }
    }
}

impl fmt::Display for SimilarityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityMode::Exact => "exact",
            SimilarityMode::Edit => "edit",
        })
    }
}

/// Unit-cost insert/delete/substitute distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a.is_ascii() && b.is_ascii() {
        distance(a.as_bytes(), b.as_bytes())
    } else {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        distance(&a, &b)
    }
}

fn distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // single row; `diag` holds the previous row's value left of the cursor
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = substitute.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

pub fn string_similarity(a: &str, b: &str, mode: SimilarityMode) -> f64 {
    match mode {
        SimilarityMode::Exact => {
            if a == b {
                1.0
            } else {
                0.0
            }
        }
        SimilarityMode::Edit => {
            if a == b {
                return 1.0;
            }
            let longest = a.chars().count().max(b.chars().count());
            1.0 - levenshtein(a, b) as f64 / longest as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_epcs() {
        for mode in [SimilarityMode::Exact, SimilarityMode::Edit] {
            assert_eq!(string_similarity("urn:epc:1:4.16.36", "urn:epc:1:4.16.36", mode), 1.0);
        }
    }

    #[test]
    fn disjoint_and_empty() {
        assert_eq!(string_similarity("abc", "xyz", SimilarityMode::Edit), 0.0);
        assert_eq!(string_similarity("", "", SimilarityMode::Edit), 1.0);
        assert_eq!(string_similarity("", "abc", SimilarityMode::Edit), 0.0);
        assert_eq!(string_similarity("aa", "ab", SimilarityMode::Edit), 0.5);
    }

    #[test]
    fn unicode_counts_scalars() {
        assert_eq!(levenshtein("né", "ne"), 1);
        assert_eq!(string_similarity("né", "ne", SimilarityMode::Edit), 0.5);
    }

    #[test]
    fn mode_round_trips_through_text() {
        for mode in [SimilarityMode::Exact, SimilarityMode::Edit] {
            assert_eq!(mode.to_string().parse::<SimilarityMode>(), Ok(mode));
        }
        assert!("fuzzy".parse::<SimilarityMode>().is_err());
    }
}
