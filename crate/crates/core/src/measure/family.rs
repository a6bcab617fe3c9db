use num_rational::Ratio;

use super::{DiscreteMeasure, HalfLine};
use crate::error::{Error, Result};

/// Measures indexed by consecutive integers, each on the half-line of its index parity.
#[derive(Clone, Debug)]
pub struct VectorFamily {
    first: i32,
    measures: Vec<DiscreteMeasure>,
}

impl VectorFamily {
    pub fn new(first: i32, measures: Vec<DiscreteMeasure>) -> Result<Self> {
        for (k, m) in measures.iter().enumerate() {
            let j = first + k as i32;
            let want = HalfLine::of_index(j);
            if m.half_line() != want {
                return Err(Error::Contract(format!("component {j} must live on {want:?}")));
            }
        }
        Ok(Self { first, measures })
    }

    pub fn first(&self) -> i32 {
        self.first
    }
    pub fn last(&self) -> i32 {
        self.first + self.measures.len() as i32 - 1
    }
    pub fn len(&self) -> usize {
        self.measures.len()
    }
    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }
    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        self.first..=self.last()
    }
    pub fn get(&self, j: i32) -> Option<&DiscreteMeasure> {
        if j < self.first {
            return None;
        }
        self.measures.get((j - self.first) as usize)
    }
    pub fn set(&mut self, j: i32, m: DiscreteMeasure) -> Result<()> {
        if m.half_line() != HalfLine::of_index(j) || self.get(j).is_none() {
            return Err(Error::Contract(format!("cannot place component {j}")));
        }
        let k = (j - self.first) as usize;
        self.measures[k] = m;
        Ok(())
    }
    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }
    pub fn masses(&self) -> Vec<f64> {
        self.measures.iter().map(|m| m.total()).collect()
    }
}

/// Prescribed component masses: `1 - j/r` for `j >= 0`, `1 - |j|/q` for `j <= 0`.
pub fn nikishin_masses(q: u32, r: u32) -> Vec<(i32, Ratio<i64>)> {
    (1 - q as i32..=r as i32 - 1)
        .map(|j| {
            let m = if j >= 0 {
                Ratio::new(r as i64 - j as i64, r as i64)
            } else {
                Ratio::new(q as i64 + j as i64, q as i64)
            };
            (j, m)
        })
        .collect()
}
