use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_rational::Ratio;

/// Tridiagonal Nikishin coupling: 1 on the diagonal, -1/2 next to it, indices `first..first+dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteractionMatrix {
    first: i32,
    dim: usize,
}

impl InteractionMatrix {
    pub fn new(first: i32, dim: usize) -> Self {
        assert!(dim >= 1, "interaction matrix needs dimension >= 1");
        Self { first, dim }
    }

    /// Index range `-q+1 ..= r-1`.
    pub fn nikishin(q: u32, r: u32) -> Self {
        Self::new(1 - q as i32, (q + r - 1) as usize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn first(&self) -> i32 {
        self.first
    }
    pub fn last(&self) -> i32 {
        self.first + self.dim as i32 - 1
    }
    pub fn indices(&self) -> RangeInclusive<i32> {
        self.first..=self.last()
    }
    pub fn contains(&self, j: i32) -> bool {
        self.indices().contains(&j)
    }

    pub fn entry_ratio(&self, i: i32, j: i32) -> Ratio<i64> {
        if !self.contains(i) || !self.contains(j) {
            return Ratio::from_integer(0);
        }
        match (i - j).abs() {
            0 => Ratio::from_integer(1),
            1 => Ratio::new(-1, 2),
            _ => Ratio::from_integer(0),
        }
    }

    pub fn entry(&self, i: i32, j: i32) -> f64 {
        let r = self.entry_ratio(i, j);
        *r.numer() as f64 / *r.denom() as f64
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| self.entry(self.first + a as i32, self.first + b as i32))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_dense().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_two_pattern() {
        let c = InteractionMatrix::nikishin(1, 2);
        assert_eq!(c.indices(), 0..=1);
        assert_eq!(c.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]));
        let d = InteractionMatrix::nikishin(1, 1);
        assert_eq!(d.dim(), 1);
        assert_eq!(d.entry(0, 0), 1.0);
    }

    proptest! {
        #[test]
        fn spectrum_is_positive(d in 1usize..40) {
            let c = InteractionMatrix::new(0, d);
            let m = c.to_dense();
            prop_assert_eq!(m.clone(), m.transpose());
            // known spectrum 1 - cos(k pi/(d+1))
            let want = 1.0 - (std::f64::consts::PI / (d as f64 + 1.0)).cos();
            prop_assert!((c.min_eigenvalue() - want).abs() < 1e-10);
            prop_assert!(c.min_eigenvalue() > 0.0);
        }
    }
}
