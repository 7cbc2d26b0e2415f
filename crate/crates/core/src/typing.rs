//! Data-type inference for entity values.
//!
//! Patterns (all case-insensitive), tested in precedence order:
//!
//! | type               | pattern                                                        |
//! |--------------------|----------------------------------------------------------------|
//! | `GUID`             | 8-4-4-4-12 hex digits separated by hyphens                     |
//! | `URI`              | `scheme://rest`, or a rooted path with at least two segments   |
//! | `IP_ADDRESS`       | dotted quad, every octet in 0..=255                            |
//! | `BOOLEAN`          | `true`, `false`, `yes`, `no`                                   |
//! | `NUMERIC`          | optional sign, digits, optional single fractional part         |
//! | `ALPHABETICAL`     | letters and spaces                                             |
//! | `NON_ALPHANUMERIC` | neither letters nor digits                                     |
//! | `ALPHANUMERIC`     | letters and digits only                                        |
//! | `OTHER`            | anything else (e.g. `sab01-98cba-1d`)                          |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DataType {
    Guid,
    Uri,
    IpAddress,
    Boolean,
    Numeric,
    Alphabetical,
    NonAlphanumeric,
    Alphanumeric,
    Other,
}

impl DataType {
    /// Classification precedence; also the tie-break order.
    pub const PRECEDENCE: [DataType; 9] = [
        DataType::Guid,
        DataType::Uri,
        DataType::IpAddress,
        DataType::Boolean,
        DataType::Numeric,
        DataType::Alphabetical,
        DataType::NonAlphanumeric,
        DataType::Alphanumeric,
        DataType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Guid => "GUID",
            DataType::Uri => "URI",
            DataType::IpAddress => "IP_ADDRESS",
            DataType::Boolean => "BOOLEAN",
            DataType::Numeric => "NUMERIC",
            DataType::Alphabetical => "ALPHABETICAL",
            DataType::NonAlphanumeric => "NON_ALPHANUMERIC",
            DataType::Alphanumeric => "ALPHANUMERIC",
            DataType::Other => "OTHER",
        }
    }

    fn rank(self) -> usize {
        Self::PRECEDENCE.iter().position(|&d| d == self).unwrap()
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        DataType::PRECEDENCE
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown data type {s:?}"))
    }
}

static GUID: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$").unwrap()
});
static URI_SCHEME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[a-z][a-z0-9+.\-]*://\S+$").unwrap());
static URI_PATH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^/[^/\s]+/[^/\s]+\S*$").unwrap());
static IP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$").unwrap());
static NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+(\.\d+)?$").unwrap());

fn is_ip(v: &str) -> bool {
    IP.captures(v).is_some_and(|c| {
        (1..=4).all(|i| c[i].parse::<u32>().is_ok_and(|o| o <= 255))
    })
}

/// Classify a single (trimmed, non-empty) value.
pub fn classify_value(value: &str) -> Result<DataType> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::EmptyValue);
    }
    let lower = v.to_ascii_lowercase();
    let has_letter = v.chars().any(char::is_alphabetic);
    let has_digit = v.chars().any(|c| c.is_numeric());
    let ty = if GUID.is_match(v) {
        DataType::Guid
    } else if URI_SCHEME.is_match(v) || URI_PATH.is_match(v) {
        DataType::Uri
    } else if is_ip(v) {
        DataType::IpAddress
    } else if matches!(lower.as_str(), "true" | "false" | "yes" | "no") {
        DataType::Boolean
    } else if NUMERIC.is_match(v) {
        DataType::Numeric
    } else if has_letter && v.chars().all(|c| c.is_alphabetic() || c == ' ') {
        DataType::Alphabetical
    } else if !has_letter && !has_digit {
        DataType::NonAlphanumeric
    } else if v.chars().all(char::is_alphanumeric) {
        DataType::Alphanumeric
    } else {
        DataType::Other
    };
    Ok(ty)
}

/// Most frequent type among instances; ties go to the higher-precedence type.
pub fn resolve_entity_dtype(instances: &[DataType]) -> Result<DataType> {
    if instances.is_empty() {
        return Err(Error::NoInstances);
    }
    let mut counts: HashMap<DataType, usize> = HashMap::new();
    for &d in instances {
        *counts.entry(d).or_default() += 1;
    }
    let best = counts
        .into_iter()
        .max_by(|(da, ca), (db, cb)| ca.cmp(cb).then(db.rank().cmp(&da.rank())))
        .map(|(d, _)| d)
        .unwrap();
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use DataType::*;

    #[test]
    fn reference_value_types() {
        let cases = [
            ("45ea1234-123b-7969-adaf-e0255045569e", Guid),
            ("4536dcd6-e2e1-3465-a22b-d25f62456233", Guid),
            ("198.168.0.1", IpAddress),
            ("500", Numeric),
            ("eastus2", Alphanumeric),
            ("VNet Failure", Alphabetical),
            ("sab01-98cba-1d", Other),
            ("https://supportcenter.cloudx.com/caseoverview?srid=112", Uri),
            (
                "/resource/2aa3abc0-7986-1abc-a98b-443fd7245e6f/resourcegroups/cs-net/providers/network/frontdoor/",
                Uri,
            ),
            ("Create and Mount Volume", Alphabetical),
        ];
        for (v, want) in cases {
            assert_eq!(classify_value(v).unwrap(), want, "{v}");
        }
    }

    #[test]
    fn other_classes() {
        assert_eq!(classify_value("true").unwrap(), Boolean);
        assert_eq!(classify_value("No").unwrap(), Boolean);
        assert_eq!(classify_value("-3.25").unwrap(), Numeric);
        assert_eq!(classify_value("1.2.3").unwrap(), Other);
        assert_eq!(classify_value("256.1.1.1").unwrap(), Other);
        assert_eq!(classify_value("---").unwrap(), NonAlphanumeric);
        assert_eq!(classify_value("/single").unwrap(), Other);
        assert!(matches!(classify_value("  "), Err(Error::EmptyValue)));
    }

    #[test]
    fn resolve_modal() {
        assert_eq!(resolve_entity_dtype(&[IpAddress, IpAddress, Boolean]).unwrap(), IpAddress);
        assert_eq!(resolve_entity_dtype(&[Numeric]).unwrap(), Numeric);
        assert_eq!(resolve_entity_dtype(&[Uri, Guid]).unwrap(), Guid);
        assert!(matches!(resolve_entity_dtype(&[]), Err(Error::NoInstances)));
    }

    #[test]
    fn names_round_trip() {
        for d in DataType::PRECEDENCE {
            assert_eq!(d.as_str().parse::<DataType>().unwrap(), d);
            assert_eq!(serde_json::to_string(&d).unwrap(), format!("\"{}\"", d.as_str()));
        }
    }

    proptest! {
        #[test]
        fn total_and_deterministic(s in "\\PC{1,30}") {
            prop_assume!(!s.trim().is_empty());
            let a = classify_value(&s).unwrap();
            prop_assert_eq!(a, classify_value(&s).unwrap());
        }

        #[test]
        fn guids_never_alphanumeric(g in "[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}") {
            prop_assert_eq!(classify_value(&g).unwrap(), Guid);
        }

        #[test]
        fn resolve_is_permutation_invariant(mut v in proptest::collection::vec(0usize..9, 1..20), seed in any::<u64>()) {
            let types: Vec<DataType> = v.iter().map(|&i| DataType::PRECEDENCE[i]).collect();
            let a = resolve_entity_dtype(&types).unwrap();
            // deterministic shuffle
            let n = v.len();
            let mut x = seed;
            for i in (1..n).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                v.swap(i, (x >> 33) as usize % (i + 1));
            }
            let shuffled: Vec<DataType> = v.iter().map(|&i| DataType::PRECEDENCE[i]).collect();
            prop_assert_eq!(a, resolve_entity_dtype(&shuffled).unwrap());
        }
    }
}
