//! Function set: the table mapping function ids to arity and semantics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar semantics of a function node. All operations follow IEEE 754:
/// division by zero and tangent poles propagate infinities and NaNs
/// instead of trapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarOp {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Tan,
    Max,
    Min,
}

impl ScalarOp {
    pub fn arity(self) -> u8 {
        match self {
            ScalarOp::Sin | ScalarOp::Cos | ScalarOp::Tan => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarOp::Add => "+",
            ScalarOp::Sub => "-",
            ScalarOp::Mul => "*",
            ScalarOp::Div => "/",
            ScalarOp::Sin => "sin",
            ScalarOp::Cos => "cos",
            ScalarOp::Tan => "tan",
            ScalarOp::Max => "max",
            ScalarOp::Min => "min",
        }
    }

    /// True for operators printed infix (`(a + b)`); `max`/`min` print as calls.
    pub fn is_infix(self) -> bool {
        matches!(
            self,
            ScalarOp::Add | ScalarOp::Sub | ScalarOp::Mul | ScalarOp::Div
        )
    }

    #[inline(always)]
    pub fn apply1(self, a: f64) -> f64 {
        match self {
            ScalarOp::Sin => a.sin(),
            ScalarOp::Cos => a.cos(),
            ScalarOp::Tan => a.tan(),
            _ => unreachable!("binary op applied as unary"),
        }
    }

    #[inline(always)]
    pub fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            ScalarOp::Add => a + b,
            ScalarOp::Sub => a - b,
            ScalarOp::Mul => a * b,
            ScalarOp::Div => a / b,
            ScalarOp::Max => a.max(b),
            ScalarOp::Min => a.min(b),
            _ => unreachable!("unary op applied as binary"),
        }
    }
}

/// Ordered table of functions; a node's function id is its index here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSet {
    ops: Vec<ScalarOp>,
}

impl FunctionSet {
    /// Default set: `{+, -, *, /, sin, cos, tan}` with ids 0..=6.
    pub fn standard() -> Self {
        FunctionSet {
            ops: vec![
                ScalarOp::Add,
                ScalarOp::Sub,
                ScalarOp::Mul,
                ScalarOp::Div,
                ScalarOp::Sin,
                ScalarOp::Cos,
                ScalarOp::Tan,
            ],
        }
    }

    /// Standard set extended with `max` (id 7) and `min` (id 8).
    pub fn with_min_max() -> Self {
        let mut fs = Self::standard();
        fs.ops.push(ScalarOp::Max);
        fs.ops.push(ScalarOp::Min);
        fs
    }

    pub fn from_ops(ops: Vec<ScalarOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::ConfigError("function set is empty".into()));
        }
        Ok(FunctionSet { ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn op(&self, id: usize) -> Option<ScalarOp> {
        self.ops.get(id).copied()
    }

    pub fn ops(&self) -> &[ScalarOp] {
        &self.ops
    }

    pub fn arity(&self, id: usize) -> Option<u8> {
        self.op(id).map(ScalarOp::arity)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.ops.iter().position(|op| op.name() == name)
    }

    /// Ids of all unary functions, in id order.
    pub fn unary_ids(&self) -> Vec<usize> {
        (0..self.ops.len())
            .filter(|&i| self.ops[i].arity() == 1)
            .collect()
    }

    /// Ids of all binary functions, in id order.
    pub fn binary_ids(&self) -> Vec<usize> {
        (0..self.ops.len())
            .filter(|&i| self.ops[i].arity() == 2)
            .collect()
    }
}

impl Default for FunctionSet {
    fn default() -> Self {
        Self::standard()
    }
}
