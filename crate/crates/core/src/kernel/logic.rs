// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};

/// Three-valued logic level. `X` is an unknown / metastable value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Logic {
    L0,
    L1,
    X,
}

impl Logic {
    pub fn from_bool(b: bool) -> Logic {
        if b {
            Logic::L1
        } else {
            Logic::L0
        }
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            Logic::L0 => Some(false),
            Logic::L1 => Some(true),
            Logic::X => None,
        }
    }

    pub fn is_x(self) -> bool {
        self == Logic::X
    }

    /// Kleene conjunction.
    pub fn and(self, rhs: Logic) -> Logic {
        match (self, rhs) {
            (Logic::L0, _) | (_, Logic::L0) => Logic::L0,
            (Logic::L1, Logic::L1) => Logic::L1,
            _ => Logic::X,
        }
    }

    /// Kleene disjunction.
    pub fn or(self, rhs: Logic) -> Logic {
        match (self, rhs) {
            (Logic::L1, _) | (_, Logic::L1) => Logic::L1,
            (Logic::L0, Logic::L0) => Logic::L0,
            _ => Logic::X,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Logic::L0 => '0',
            Logic::L1 => '1',
            Logic::X => 'x',
        }
    }
}

impl Not for Logic {
    type Output = Logic;
    fn not(self) -> Logic {
        match self {
            Logic::L0 => Logic::L1,
            Logic::L1 => Logic::L0,
            Logic::X => Logic::X,
        }
    }
}

impl From<bool> for Logic {
    fn from(b: bool) -> Logic {
        Logic::from_bool(b)
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}
