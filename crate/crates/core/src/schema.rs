//! JSON documents for channels, states, parity/reversing operations, bases
//! and Markov chains.
//!
//! Complex scalars are `[re, im]` pairs and matrices are row-major nested
//! arrays of them.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, DensityMatrix};
use crate::classical::{permutation_from_one_based, MarkovChain};
use crate::linalg::CMatrix;
use crate::parity::{ParityOp, ReversingOp};
use crate::{Error, Result, ToleranceConfig};

/// `{"dim_in", "dim_out", "kraus"}` or `{"choi_std"}` (dimensions optional
/// for a Choi matrix of a channel from a system to itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_out: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<CMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi_std: Option<CMatrix>,
}

impl ChannelDoc {
    pub fn from_channel(ch: &Channel) -> Self {
        Self {
            dim_in: Some(ch.dim_in()),
            dim_out: Some(ch.dim_out()),
            kraus: None,
            choi_std: Some(ch.choi_std().clone()),
        }
    }

    pub fn into_channel(self) -> Result<Channel> {
        let dims = (self.dim_in, self.dim_out);
        match (self.kraus, self.choi_std) {
            (Some(ops), None) => {
                let ch = Channel::from_kraus(&ops)?;
                check_dims(dims, &ch)?;
                Ok(ch)
            }
            (None, Some(choi)) => {
                let (m, n) = match dims {
                    (Some(m), Some(n)) => (m, n),
                    (None, None) => {
                        let m = (choi.rows() as f64).sqrt().round() as usize;
                        (m, m)
                    }
                    _ => {
                        return Err(Error::InvalidInput(
                            "give both dim_in and dim_out or neither".into(),
                        ))
                    }
                };
                Channel::from_choi(m, n, choi)
            }
            _ => Err(Error::InvalidInput(
                "channel needs exactly one of `kraus` and `choi_std`".into(),
            )),
        }
    }
}

fn check_dims((dim_in, dim_out): (Option<usize>, Option<usize>), ch: &Channel) -> Result<()> {
    let ok = dim_in.is_none_or(|m| m == ch.dim_in()) && dim_out.is_none_or(|n| n == ch.dim_out());
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "declared {dim_in:?} -> {dim_out:?}, Kraus operators give {} -> {}",
            ch.dim_in(),
            ch.dim_out()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub rho: CMatrix,
}

impl StateDoc {
    pub fn into_state(self, tol: &ToleranceConfig) -> Result<DensityMatrix> {
        DensityMatrix::new(self.rho, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Parity,
    Reversing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDoc {
    pub matrix: CMatrix,
    pub antiunitary: bool,
    pub kind: OperatorKind,
}

impl OperatorDoc {
    pub fn from_parity(p: &ParityOp) -> Self {
        Self {
            matrix: p.matrix().clone(),
            antiunitary: p.is_antiunitary(),
            kind: OperatorKind::Parity,
        }
    }

    pub fn from_reversing(t: &ReversingOp) -> Self {
        Self {
            matrix: t.matrix().clone(),
            antiunitary: t.is_antiunitary(),
            kind: OperatorKind::Reversing,
        }
    }

    pub fn into_parity(self) -> Result<ParityOp> {
        match self.kind {
            OperatorKind::Parity => ParityOp::new(self.matrix, self.antiunitary),
            OperatorKind::Reversing => Err(Error::InvalidInput(
                "expected a parity, got a reversing operation".into(),
            )),
        }
    }

    pub fn into_reversing(self) -> Result<ReversingOp> {
        match self.kind {
            OperatorKind::Reversing => ReversingOp::new(self.matrix, self.antiunitary),
            OperatorKind::Parity => Err(Error::InvalidInput(
                "expected a reversing operation, got a parity".into(),
            )),
        }
    }
}

/// Orthonormal basis given by its columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisDoc {
    pub basis: CMatrix,
}

/// `{"rho": [...], "tau": [[...], ...], "pi": [...]}` with a 1-based `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    pub rho: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<usize>>,
}

impl ChainDoc {
    pub fn from_chain(mc: &MarkovChain) -> Self {
        Self {
            rho: mc.rho().to_vec(),
            tau: mc.tau().to_vec(),
            pi: None,
        }
    }

    /// The chain and its 0-based permutation, if one was given.
    pub fn into_chain(self) -> Result<(MarkovChain, Option<Vec<usize>>)> {
        let pi = self
            .pi
            .as_deref()
            .map(permutation_from_one_based)
            .transpose()?;
        Ok((MarkovChain::new(self.rho, self.tau)?, pi))
    }
}

/// Parses a document, reporting syntax and shape errors with their position.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        let full = e.to_string();
        let suffix = format!(" at line {line} column {column}");
        Error::Json {
            line,
            column,
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents always serialize")
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    parse::<ChannelDoc>(text)?.into_channel()
}

pub fn parse_state(text: &str, tol: &ToleranceConfig) -> Result<DensityMatrix> {
    parse::<StateDoc>(text)?.into_state(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn channel_both_representations() {
        let (ch, _) = catalog::cycle3(0.5);
        let kraus = r#"{"dim_in":3,"dim_out":3,"kraus":[
            [[[0,0],[0,0],[0.7071067811865476,0]],[[0.7071067811865476,0],[0,0],[0,0]],[[0,0],[0.7071067811865476,0],[0,0]]],
            [[[0,0],[0.7071067811865476,0],[0,0]],[[0,0],[0,0],[0.7071067811865476,0]],[[0.7071067811865476,0],[0,0],[0,0]]]
        ]}"#;
        assert!(parse_channel(kraus).unwrap().distance(&ch) < 1e-15);
        let choi = to_json(&ChannelDoc::from_channel(&ch));
        assert_eq!(parse_channel(&choi).unwrap(), ch);
    }

    #[test]
    fn exactly_one_representation() {
        let both = r#"{"kraus":[[[[1,0]]]],"choi_std":[[[1,0]]]}"#;
        assert!(matches!(parse_channel(both), Err(Error::InvalidInput(_))));
        assert!(matches!(
            parse_channel(r#"{"dim_in":1}"#),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn declared_dims_must_match_kraus() {
        let doc = r#"{"dim_in":2,"dim_out":1,"kraus":[[[[1,0]]]]}"#;
        assert!(matches!(
            parse_channel(doc),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_channel("{\n  \"choi_std\": [[[1, 0]]\n") {
            Err(Error::Json { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_channel(r#"{"choi":[]}"#),
            Err(Error::Json { .. })
        ));
    }

    #[test]
    fn state_and_chain() {
        let tol = ToleranceConfig::default();
        let rho = parse_state(r#"{"rho":[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]}"#, &tol).unwrap();
        assert_eq!(rho.dim(), 2);
        let (mc, pi) = parse::<ChainDoc>(r#"{"rho":[0.5,0.5],"tau":[[0,1],[1,0]],"pi":[2,1]}"#)
            .unwrap()
            .into_chain()
            .unwrap();
        assert_eq!(mc.dim(), 2);
        assert_eq!(pi, Some(vec![1, 0]));
    }

    #[test]
    fn operator_kinds_are_checked() {
        let doc = OperatorDoc::from_parity(&ParityOp::conjugation(2));
        let text = to_json(&doc);
        assert!(text.contains("\"parity\""));
        assert!(parse::<OperatorDoc>(&text)
            .unwrap()
            .into_reversing()
            .is_err());
        assert!(parse::<OperatorDoc>(&text)
            .unwrap()
            .into_parity()
            .unwrap()
            .is_antiunitary());
    }
}
