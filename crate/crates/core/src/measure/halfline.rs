use serde::{Deserialize, Serialize};

/// One of the two closed half-lines of the real axis.
///
/// Index parity selects the half-line: even indices live on `[0, inf)`, odd on `(-inf, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfLine {
    Positive,
    Negative,
}

impl HalfLine {
    pub fn of_index(j: i32) -> Self {
        if j.rem_euclid(2) == 0 {
            HalfLine::Positive
        } else {
            HalfLine::Negative
        }
    }

    pub fn parity(self) -> i32 {
        match self {
            HalfLine::Positive => 0,
            HalfLine::Negative => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            HalfLine::Positive => 1.0,
            HalfLine::Negative => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            HalfLine::Positive => HalfLine::Negative,
            HalfLine::Negative => HalfLine::Positive,
        }
    }

    /// Closed membership; 0 belongs to both half-lines.
    pub fn contains(self, x: f64) -> bool {
        match self {
            HalfLine::Positive => x >= 0.0,
            HalfLine::Negative => x <= 0.0,
        }
    }

    pub fn contains_interior(self, x: f64) -> bool {
        self.sign() * x > 0.0
    }
}
