//! Symbolic descriptions of formally skew-adjoint operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorTerm {
    /// `coef * d^order/dx^order`.
    Derivative { coef: f64, order: usize },
    /// `coef * (u d/dx + d/dx u)`, linear in the state `u`.
    SymmetricPair { coef: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Block {
    Zero,
    /// `scale * identity`.
    Identity {
        scale: f64,
    },
    Operator {
        op: OperatorSpec,
    },
}

/// `m x m` block operator acting on an `m`-field state, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStructure {
    pub size: usize,
    pub blocks: Vec<Block>,
}

impl BlockStructure {
    pub fn get(&self, i: usize, j: usize) -> &Block {
        &self.blocks[i * self.size + j]
    }

    /// `[[0, 1], [-1, 0]]`, the canonical two-field structure.
    pub fn canonical() -> Self {
        Self {
            size: 2,
            blocks: vec![
                Block::Zero,
                Block::Identity { scale: 1.0 },
                Block::Identity { scale: -1.0 },
                Block::Zero,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default)]
    pub terms: Vec<OperatorTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockStructure>,
    /// Admit even-order (self-adjoint) derivative terms.
    #[serde(default)]
    pub symmetric_part_experiment: bool,
}

impl OperatorSpec {
    pub fn new(terms: Vec<OperatorTerm>) -> Result<Self> {
        let spec = Self {
            terms,
            blocks: None,
            symmetric_part_experiment: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Like [`OperatorSpec::new`] but even-order derivative terms are allowed.
    pub fn with_symmetric_part(terms: Vec<OperatorTerm>) -> Result<Self> {
        let spec = Self {
            terms,
            blocks: None,
            symmetric_part_experiment: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn block(blocks: BlockStructure) -> Result<Self> {
        let spec = Self {
            terms: Vec::new(),
            blocks: Some(blocks),
            symmetric_part_experiment: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `d/dx`.
    pub fn dx() -> Self {
        Self::derivative(1.0, 1)
    }

    pub fn derivative(coef: f64, order: usize) -> Self {
        Self {
            terms: vec![OperatorTerm::Derivative { coef, order }],
            blocks: None,
            symmetric_part_experiment: order.is_multiple_of(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(blocks) = &self.blocks {
            if !self.terms.is_empty() {
                return Err(Error::InvalidOperator(
                    "block operators cannot also carry scalar terms".to_string(),
                ));
            }
            return validate_blocks(blocks);
        }
        if self.terms.is_empty() {
            return Err(Error::InvalidOperator("operator has no terms".to_string()));
        }
        for term in &self.terms {
            match *term {
                OperatorTerm::Derivative { coef, order } => {
                    if !coef.is_finite() {
                        return Err(Error::InvalidOperator(format!("coefficient {coef}")));
                    }
                    if order % 2 == 0 && !self.symmetric_part_experiment {
                        return Err(Error::InvalidOperator(format!(
                            "derivative of even order {order} is self-adjoint; enable the symmetric-part experiment to admit it"
                        )));
                    }
                }
                OperatorTerm::SymmetricPair { coef } => {
                    if !coef.is_finite() {
                        return Err(Error::InvalidOperator(format!("coefficient {coef}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when the operator does not depend on the state.
    pub fn is_constant(&self) -> bool {
        match &self.blocks {
            Some(b) => b.blocks.iter().all(|blk| match blk {
                Block::Operator { op } => op.is_constant(),
                _ => true,
            }),
            None => self
                .terms
                .iter()
                .all(|t| matches!(t, OperatorTerm::Derivative { .. })),
        }
    }

    pub fn is_block(&self) -> bool {
        self.blocks.is_some()
    }

    pub fn fields(&self) -> usize {
        self.blocks.as_ref().map_or(1, |b| b.size)
    }

    pub fn max_order(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match *t {
                OperatorTerm::Derivative { order, .. } => order,
                OperatorTerm::SymmetricPair { .. } => 1,
            })
            .max()
            .unwrap_or(0)
    }

    /// Parse a sum of terms such as `dx`, `2*upair + dx3`, `-2*upair - dx3`.
    ///
    /// Atoms: `dx`, `dxx`, `dxxx`, `dx<k>`, `upair`. Even orders are only
    /// admitted when `symmetric_part` is set.
    pub fn parse(text: &str, symmetric_part: bool) -> Result<Self> {
        let normalized = text.replace(" - ", " + -");
        let mut terms = Vec::new();
        for raw in normalized.split('+') {
            let token = raw.trim();
            if token.is_empty() {
                return Err(Error::Parse(format!("empty term in '{text}'")));
            }
            let (coef, atom) = match token.split_once('*') {
                Some((c, a)) => {
                    let coef: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad coefficient '{}'", c.trim())))?;
                    (coef, a.trim())
                }
                None => match token.strip_prefix('-') {
                    Some(rest) => (-1.0, rest.trim()),
                    None => (1.0, token),
                },
            };
            let term = match atom {
                "upair" => OperatorTerm::SymmetricPair { coef },
                "dx" => OperatorTerm::Derivative { coef, order: 1 },
                "dxx" => OperatorTerm::Derivative { coef, order: 2 },
                "dxxx" => OperatorTerm::Derivative { coef, order: 3 },
                other => {
                    let order = other
                        .strip_prefix("dx")
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| Error::Parse(format!("bad token '{other}'")))?;
                    OperatorTerm::Derivative { coef, order }
                }
            };
            terms.push(term);
        }
        if symmetric_part {
            Self::with_symmetric_part(terms)
        } else {
            Self::new(terms)
        }
    }
}

fn validate_blocks(b: &BlockStructure) -> Result<()> {
    if b.size == 0 || b.blocks.len() != b.size * b.size {
        return Err(Error::InvalidOperator(format!(
            "block structure of size {} needs {} blocks, got {}",
            b.size,
            b.size * b.size,
            b.blocks.len()
        )));
    }
    for i in 0..b.size {
        for j in 0..b.size {
            match (b.get(i, j), b.get(j, i)) {
                (Block::Zero, Block::Zero) => {}
                (Block::Identity { scale: s }, Block::Identity { scale: t }) => {
                    if i == j || (s + t).abs() > 1e-14 * s.abs().max(1.0) {
                        return Err(Error::InvalidOperator(format!(
                            "identity blocks must form an antisymmetric matrix (entry ({i},{j}))"
                        )));
                    }
                }
                (Block::Operator { op }, Block::Operator { op: other }) => {
                    op.validate()?;
                    if op.is_block() || !op.is_constant() {
                        return Err(Error::UnsupportedTerm(
                            "operator blocks must be constant scalar operators".to_string(),
                        ));
                    }
                    // A skew scalar block D has adjoint -D, so the mirrored
                    // block must equal D itself.
                    if i != j && op != other {
                        return Err(Error::InvalidOperator(format!(
                            "operator blocks ({i},{j}) and ({j},{i}) must coincide"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidOperator(format!(
                        "blocks ({i},{j}) and ({j},{i}) are not adjoint-compatible"
                    )))
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kdv_second_form() {
        let op = OperatorSpec::parse("-2*upair - dx3", false).unwrap();
        assert_eq!(
            op.terms,
            vec![
                OperatorTerm::SymmetricPair { coef: -2.0 },
                OperatorTerm::Derivative {
                    coef: -1.0,
                    order: 3
                }
            ]
        );
        assert!(!op.is_constant());
    }

    #[test]
    fn parse_errors_name_the_token() {
        match OperatorSpec::parse("dx + dy", false) {
            Err(Error::Parse(msg)) => assert!(msg.contains("dy")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            OperatorSpec::parse("dxx", false),
            Err(Error::InvalidOperator(_))
        ));
        assert!(OperatorSpec::parse("dxx", true).is_ok());
    }

    #[test]
    fn block_validation() {
        assert!(OperatorSpec::block(BlockStructure::canonical()).is_ok());
        let symmetric = BlockStructure {
            size: 2,
            blocks: vec![
                Block::Zero,
                Block::Identity { scale: 1.0 },
                Block::Identity { scale: 1.0 },
                Block::Zero,
            ],
        };
        assert!(OperatorSpec::block(symmetric).is_err());
        let diag = BlockStructure {
            size: 1,
            blocks: vec![Block::Identity { scale: 1.0 }],
        };
        assert!(OperatorSpec::block(diag).is_err());
        assert!(OperatorSpec::new(vec![]).is_err());
    }
}
