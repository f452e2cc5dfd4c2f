use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::PanelRow;

/// Column of the close price in every feature layout.
pub const CLOSE_INDEX: usize = 4;

/// Holiday flag plus a Monday..Friday one-hot.
pub const KNOWN_FUTURE_WIDTH: usize = 6;

/// Input composition: market data only, plus the sentiment score, or plus
/// the daily embedding vector of width `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum FeatureSet {
    Hlov,
    Hlovs,
    Hlove { dim: usize },
}

impl FeatureSet {
    pub fn n_features(&self) -> usize {
        match self {
            FeatureSet::Hlov => 5,
            FeatureSet::Hlovs => 6,
            FeatureSet::Hlove { dim } => 5 + dim,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FeatureSet::Hlov => "HLOV",
            FeatureSet::Hlovs => "HLOVS",
            FeatureSet::Hlove { .. } => "HLOVE",
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["high", "low", "open", "volume", "close"].iter().map(|s| s.to_string()).collect();
        match self {
            FeatureSet::Hlov => {}
            FeatureSet::Hlovs => names.push("score".into()),
            FeatureSet::Hlove { dim } => names.extend((0..*dim).map(|j| format!("e{j}"))),
        }
        names
    }

    /// Feature vector of one panel row in this layout.
    pub fn extract(&self, row: &PanelRow) -> Result<Vec<f64>> {
        let mut v = vec![row.high, row.low, row.open, row.volume, row.close];
        match self {
            FeatureSet::Hlov => {}
            FeatureSet::Hlovs => v.push(row.score),
            FeatureSet::Hlove { dim } => {
                if row.embedding.len() != *dim {
                    return Err(Error::validation(
                        "embedding",
                        format!("{}: width {} but feature set expects {dim}", row.date, row.embedding.len()),
                    ));
                }
                v.extend_from_slice(&row.embedding);
            }
        }
        Ok(v)
    }

    /// Parses `HLOV`, `HLOVS` or `HLOVE`; the embedding width comes from
    /// `embedding_dim`.
    pub fn parse_with_dim(s: &str, embedding_dim: usize) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HLOV" => Ok(FeatureSet::Hlov),
            "HLOVS" => Ok(FeatureSet::Hlovs),
            "HLOVE" => Ok(FeatureSet::Hlove { dim: embedding_dim }),
            other => Err(Error::Config(format!("unknown feature set `{other}` (expected HLOV, HLOVS or HLOVE)"))),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_dim(s, crate::text::DEFAULT_EMBEDDING_DIM)
    }
}

pub fn known_future_row(row: &PanelRow) -> [f64; KNOWN_FUTURE_WIDTH] {
    let mut out = [0.0; KNOWN_FUTURE_WIDTH];
    out[0] = f64::from(u8::from(row.holiday));
    if row.dow < 5 {
        out[1 + row.dow] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(FeatureSet::Hlov.n_features(), 5);
        assert_eq!(FeatureSet::Hlovs.n_features(), 6);
        assert_eq!(FeatureSet::Hlove { dim: 384 }.n_features(), 389);
        assert_eq!(FeatureSet::Hlovs.column_names()[CLOSE_INDEX], "close");
    }

    #[test]
    fn parsing() {
        assert_eq!("hlovs".parse::<FeatureSet>().unwrap(), FeatureSet::Hlovs);
        assert_eq!(FeatureSet::parse_with_dim("HLOVE", 16).unwrap(), FeatureSet::Hlove { dim: 16 });
        assert!("HLX".parse::<FeatureSet>().is_err());
    }
}
