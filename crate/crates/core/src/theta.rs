use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A positive rational exponent `q/r` kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Theta {
    pub q: u32,
    pub r: u32,
}

impl Theta {
    pub fn new(q: u32, r: u32) -> Result<Theta> {
        if q == 0 || r == 0 {
            return invalid("theta = q/r needs q, r >= 1");
        }
        let g = q.gcd(&r);
        Ok(Theta { q: q / g, r: r / g })
    }

    pub fn one() -> Theta {
        Theta { q: 1, r: 1 }
    }

    pub fn value(&self) -> f64 {
        self.q as f64 / self.r as f64
    }

    /// Best rational with denominator at most `max_den`, accepted if within `tol` of `x`.
    pub fn approximate(x: f64, max_den: u32, tol: f64) -> Result<Theta> {
        if !(x > 0.0) || !x.is_finite() {
            return invalid(format!("theta must be positive, got {x}"));
        }
        for r in 1..=max_den {
            let q = (x * r as f64).round();
            if q >= 1.0 && (q / r as f64 - x).abs() <= tol * x {
                return Theta::new(q as u32, r);
            }
        }
        invalid(format!("theta {x} is not a rational with denominator <= {max_den}"))
    }

    /// Parses `"q/r"` or a decimal number.
    pub fn parse(s: &str) -> Result<Theta> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let q = a.trim().parse::<u32>();
            let r = b.trim().parse::<u32>();
            match (q, r) {
                (Ok(q), Ok(r)) => Theta::new(q, r),
                _ => invalid(format!("cannot parse theta {s:?}")),
            }
        } else {
            match s.parse::<f64>() {
                Ok(x) => Theta::approximate(x, 1000, 1e-12),
                Err(_) => invalid(format!("cannot parse theta {s:?}")),
            }
        }
    }
}

impl std::fmt::Display for Theta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.q, self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_parses() {
        assert_eq!(Theta::new(4, 6).unwrap(), Theta { q: 2, r: 3 });
        assert_eq!(Theta::parse("2/4").unwrap(), Theta { q: 1, r: 2 });
        assert_eq!(Theta::parse("0.5").unwrap(), Theta { q: 1, r: 2 });
        assert_eq!(Theta::parse("2").unwrap(), Theta { q: 2, r: 1 });
        assert!(Theta::parse("0.3333").is_err());
        assert!(Theta::new(0, 3).is_err());
    }
}
