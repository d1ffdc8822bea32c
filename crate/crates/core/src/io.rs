//! JSON chain files: `{"n": .., "P": [[..], ..], "pi": [..]?, "labels": [..]?}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{check_len, Distribution, TransitionMatrix};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFile {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ChainFile {
    pub fn from_chain(p: &TransitionMatrix, pi: Option<&Distribution>) -> Self {
        Self {
            n: p.n(),
            p: p.to_rows(),
            pi: pi.map(|d| d.as_slice().to_vec()),
            labels: None,
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Validates shape and builds the typed chain.
    pub fn to_chain(&self) -> Result<(TransitionMatrix, Option<Distribution>)> {
        check_len(self.n, self.p.len())?;
        let p = TransitionMatrix::from_rows(&self.p)?;
        if let Some(labels) = &self.labels {
            check_len(self.n, labels.len())?;
        }
        let pi = match &self.pi {
            Some(w) => {
                check_len(self.n, w.len())?;
                Some(Distribution::new(w.clone())?)
            }
            None => None,
        };
        Ok((p, pi))
    }

    pub fn to_json(&self, pretty: bool) -> String {
        let out = if pretty { serde_json::to_string_pretty(self) } else { serde_json::to_string(self) };
        out.expect("chain files always serialize")
    }
}

/// Reads and parses a chain file; the error string is a user diagnostic.
pub fn read_chain_file(path: &Path) -> std::result::Result<ChainFile, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ChainFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ChainError;

    #[test]
    fn parses_minimal_and_full() {
        let f = ChainFile::parse(r#"{"n": 2, "P": [[0.5, 0.5], [0.5, 0.5]]}"#).unwrap();
        let (p, pi) = f.to_chain().unwrap();
        assert_eq!(p.n(), 2);
        assert!(pi.is_none());

        let f = ChainFile::parse(
            r#"{"n": 2, "P": [[0, 1], [0.5, 0.5]], "pi": [0.3333333333333333, 0.6666666666666666], "labels": ["a", "b"]}"#,
        )
        .unwrap();
        let (_, pi) = f.to_chain().unwrap();
        assert!(pi.is_some());
    }

    #[test]
    fn rejects_inconsistent_sizes() {
        let f = ChainFile::parse(r#"{"n": 3, "P": [[0.5, 0.5], [0.5, 0.5]]}"#).unwrap();
        assert!(matches!(f.to_chain(), Err(ChainError::DimensionMismatch { .. })));
        let f = ChainFile::parse(r#"{"n": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "labels": ["x"]}"#).unwrap();
        assert!(f.to_chain().is_err());
        assert!(ChainFile::parse(r#"{"n": 2}"#).is_err());
    }
}
