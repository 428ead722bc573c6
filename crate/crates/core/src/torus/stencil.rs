use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy order of the centered periodic finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    Second,
    #[default]
    Fourth,
    Sixth,
}

impl StencilOrder {
    pub fn from_order(p: usize) -> Result<Self> {
        match p {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            _ => Err(Error::InvalidArgument(format!(
                "stencil order must be 2, 4 or 6, got {p}"
            ))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
        }
    }

    /// `(k, c_k)` for k > 0 with `g'(y) ≈ Σ c_k (g(y+kh) − g(y−kh)) / h`.
    pub fn first(self) -> &'static [(isize, f64)] {
        match self {
            Self::Second => &[(1, 0.5)],
            Self::Fourth => &[(1, 2.0 / 3.0), (2, -1.0 / 12.0)],
            Self::Sixth => &[(1, 0.75), (2, -0.15), (3, 1.0 / 60.0)],
        }
    }

    /// `(k, c_k)` for k > 0 with `g''(y) ≈ Σ c_k (g(y+kh) + g(y−kh) − 2g(y)) / h²`.
    pub fn second(self) -> &'static [(isize, f64)] {
        match self {
            Self::Second => &[(1, 1.0)],
            Self::Fourth => &[(1, 4.0 / 3.0), (2, -1.0 / 12.0)],
            Self::Sixth => &[(1, 1.5), (2, -0.15), (3, 1.0 / 90.0)],
        }
    }

    pub fn radius(self) -> usize {
        self.order() / 2
    }
}
