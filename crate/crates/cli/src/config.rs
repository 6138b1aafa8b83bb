//! Ladder/norm configuration files.
//!
//! ```json
//! {
//!   "V": [1, 2],
//!   "norm": {"p": 2, "weights": [1.0, 1.0], "basis": [[1,0],[0,1]]},
//!   "levels": [{"gamma": 1.0, "C": 1.0}, {"gamma": 0.001, "C": 1.0}]
//! }
//! ```
//!
//! Levels are listed smallest class first, largest last. `"p": "inf"`
//! selects the max norm. The optional row-major orthonormal `basis` is
//! applied to the data at ingestion (coordinates are re-expressed in that
//! basis before any class computation).

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use adaptci_core::{ClassLadder, HolderClass, IndexSet, MonotoneNorm};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PValue {
    Num(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormSpec {
    p: PValue,
    weights: Vec<f64>,
    #[serde(default)]
    basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelSpec {
    gamma: f64,
    #[serde(rename = "C")]
    c: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LadderSpec {
    #[serde(rename = "V")]
    v: Vec<usize>,
    norm: NormSpec,
    levels: Vec<LevelSpec>,
}

/// Parsed ladder configuration.
pub struct LadderConfig {
    pub ladder: ClassLadder,
    /// Row-major orthonormal basis to express the data in, if any.
    pub basis: Option<Vec<Vec<f64>>>,
}

pub fn parse_ladder(text: &str) -> Result<LadderConfig> {
    let spec: LadderSpec = serde_json::from_str(text).context("parsing ladder config JSON")?;
    let k = spec.norm.weights.len();
    let p = match spec.norm.p {
        PValue::Num(v) => v,
        PValue::Word(w) if w.eq_ignore_ascii_case("inf") => f64::INFINITY,
        PValue::Word(w) => bail!("unrecognized norm exponent {w:?}; use a number or \"inf\""),
    };
    let norm = MonotoneNorm::new(p, spec.norm.weights.clone())?;
    let vset = IndexSet::new(k, &spec.v)?;
    if spec.levels.is_empty() {
        bail!("ladder config needs at least one level");
    }
    let levels = spec
        .levels
        .iter()
        .map(|l| HolderClass::new(l.gamma, l.c, vset.clone(), norm.clone()).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let ladder = ClassLadder::new(levels)
        .context("levels must be ordered smallest class first (gamma down, C up)")?;

    if let Some(basis) = &spec.norm.basis {
        validate_basis(basis, k)?;
    }
    Ok(LadderConfig { ladder, basis: spec.norm.basis })
}

fn validate_basis(basis: &[Vec<f64>], k: usize) -> Result<()> {
    if basis.len() != k || basis.iter().any(|row| row.len() != k) {
        bail!("basis must be a {k}x{k} row-major matrix");
    }
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = (0..k).map(|c| basis[i][c] * basis[j][c]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - expect).abs() > 1e-8 {
                bail!(
                    "basis rows {} and {} are not orthonormal (gram deviation {:.3e})",
                    i + 1,
                    j + 1,
                    (dot - expect).abs()
                );
            }
        }
    }
    Ok(())
}

/// Parses a comma-separated vector such as `--x0 "0.5,1.25"`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .with_context(|| format!("cannot parse {tok:?} as a number"))
        })
        .collect()
}

/// Parses a comma-separated list of sample sizes.
pub fn parse_usizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .replace('_', "")
                .parse::<usize>()
                .with_context(|| format!("cannot parse {tok:?} as an integer"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_level_ladder() {
        let cfg = parse_ladder(
            r#"{"V":[1,2],"norm":{"p":2,"weights":[1,1]},
                "levels":[{"gamma":1.0,"C":1.0},{"gamma":0.001,"C":1.0}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.ladder.len(), 2);
        assert_eq!(cfg.ladder.vset().count(), 2);
        assert!(cfg.basis.is_none());
    }

    #[test]
    fn parses_inf_norm_and_basis() {
        let cfg = parse_ladder(
            r#"{"V":[2],"norm":{"p":"inf","weights":[1,2],
                "basis":[[0.6,0.8],[-0.8,0.6]]},
                "levels":[{"gamma":0.5,"C":2.0}]}"#,
        )
        .unwrap();
        assert!(cfg.ladder.norm().exponent().is_infinite());
        assert!(cfg.basis.is_some());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse_ladder(r#"{"V":[3],"norm":{"p":2,"weights":[1,1]},"levels":[{"gamma":1,"C":1}]}"#).is_err());
        assert!(parse_ladder(r#"{"V":[1],"norm":{"p":2,"weights":[1]},"levels":[]}"#).is_err());
        // Levels out of ladder order.
        assert!(parse_ladder(
            r#"{"V":[1],"norm":{"p":2,"weights":[1]},
                "levels":[{"gamma":0.2,"C":1.0},{"gamma":1.0,"C":1.0}]}"#
        )
        .is_err());
        // Non-orthonormal basis.
        assert!(parse_ladder(
            r#"{"V":[1],"norm":{"p":2,"weights":[1,1],"basis":[[1,1],[0,1]]},
                "levels":[{"gamma":1.0,"C":1.0}]}"#
        )
        .is_err());
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vector("1, 2.5,-3").unwrap(), vec![1.0, 2.5, -3.0]);
        assert!(parse_vector("1,abc").is_err());
        assert_eq!(parse_usizes("100,1_000").unwrap(), vec![100, 1000]);
    }
}
