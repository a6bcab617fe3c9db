use std::io::{BufRead, Write};
use std::sync::Arc;

use super::grid::{Cell, Grid, MapKind};
use super::HalfLine;
use crate::error::{invalid, Error, Result};
use crate::quad::gl_integrate;

/// Nonnegative masses on the cells of a grid; piecewise-constant density inside each cell.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    grid: Arc<Grid>,
    masses: Vec<f64>,
    total: f64,
}

/// Direction of the power map in [`pushforward_power`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerDirection {
    /// `x -> x^(1/q)`
    Forward,
    /// `x -> x^q`
    Inverse,
}

impl DiscreteMeasure {
    pub fn new(grid: Arc<Grid>, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return invalid(format!("{} masses for {} cells", masses.len(), grid.len()));
        }
        if let Some(k) = masses.iter().position(|&m| !(m >= 0.0) || !m.is_finite()) {
            return invalid(format!("mass {k} is negative or non-finite: {}", masses[k]));
        }
        let total = masses.iter().sum();
        Ok(Self { grid, masses, total })
    }

    /// Clamps tiny negative values produced by linear solves to zero.
    pub fn from_solution(grid: Arc<Grid>, masses: Vec<f64>) -> Result<Self> {
        Self::new(grid, masses.into_iter().map(|m| m.max(0.0)).collect())
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, masses: vec![0.0; n], total: 0.0 }
    }

    /// Mass proportional to cell width.
    pub fn uniform(grid: Arc<Grid>, mass: f64) -> Self {
        let w: f64 = grid.weights().iter().sum();
        let masses = grid.weights().iter().map(|x| mass * x / w).collect();
        Self::new(grid, masses).expect("positive weights")
    }

    /// Cell integrals of a density (atoms take the density value as mass).
    pub fn from_density(grid: Arc<Grid>, density: impl Fn(f64) -> f64) -> Result<Self> {
        let masses = grid
            .cells()
            .iter()
            .map(|c| if c.is_atom() { density(c.lo) } else { gl_integrate(&density, c.lo, c.hi, 8) })
            .collect();
        Self::new(grid, masses)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn total(&self) -> f64 {
        self.total
    }
    pub fn half_line(&self) -> HalfLine {
        self.grid.half_line()
    }
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.masses.iter().map(|m| m * s).collect())
    }

    /// Sum of two measures on the same grid.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::Contract("measures live on different grids".into()));
        }
        Self::new(self.grid.clone(), self.masses.iter().zip(&other.masses).map(|(a, b)| a + b).collect())
    }

    /// Mass divided by cell width (atoms report their mass).
    pub fn densities(&self) -> Vec<f64> {
        self.masses.iter().zip(self.grid.weights()).map(|(m, w)| m / w).collect()
    }

    /// Pointwise density: cell densities placed at midpoints, joined linearly; zero off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let cells = self.grid.cells();
        let n = cells.len();
        if n == 0 || x < cells[0].lo || x > cells[n - 1].hi || self.grid.is_atomic() {
            return 0.0;
        }
        let d = |k: usize| self.masses[k] / cells[k].width();
        let k = cells.partition_point(|c| c.mid() < x);
        if k == 0 {
            return d(0);
        }
        if k == n {
            return d(n - 1);
        }
        let (a, b) = (cells[k - 1].mid(), cells[k].mid());
        let t = (x - a) / (b - a);
        (1.0 - t) * d(k - 1) + t * d(k)
    }

    /// Cumulative mass at each cell edge, ascending in x.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for m in &self.masses {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// Mass of `(-inf, x]`, linear inside cells.
    pub fn cdf(&self, x: f64) -> f64 {
        let cells = self.grid.cells();
        let k = cells.partition_point(|c| c.hi <= x);
        let below: f64 = self.masses[..k].iter().sum();
        if k == cells.len() {
            return below;
        }
        let c = cells[k];
        if x < c.lo {
            below
        } else if c.is_atom() {
            below + self.masses[k]
        } else {
            below + self.masses[k] * (x - c.lo) / c.width()
        }
    }

    /// Cells carrying mass above `floor` times the total, merged into maximal runs.
    pub fn support_intervals(&self, floor: f64) -> Vec<(f64, f64)> {
        let thr = floor * self.total;
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for (c, &m) in self.grid.cells().iter().zip(&self.masses) {
            if m > thr {
                open = Some(match open {
                    Some((lo, _)) => (lo, c.hi),
                    None => (c.lo, c.hi),
                });
            } else if let Some(iv) = open.take() {
                out.push(iv);
            }
        }
        out.extend(open);
        out
    }

    /// Serializes as CSV with a header comment carrying parity, map kind and truncation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let kind = match self.grid.map_kind() {
            MapKind::Truncated => "truncated",
            MapKind::Compactified => "compactified",
            MapKind::Atomic => "atomic",
        };
        writeln!(
            w,
            "# parity={} map_kind={} truncation={:e}",
            self.half_line().parity(),
            kind,
            self.grid.truncation()
        )?;
        writeln!(w, "node,weight,mass")?;
        for ((x, wt), m) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&self.masses) {
            writeln!(w, "{x:e},{wt:e},{m:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty measure file".into()))??;
        let mut parity = None;
        let mut kind = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("parity", v)) => parity = v.parse::<i32>().ok(),
                Some(("map_kind", v)) => kind = Some(v.to_string()),
                _ => {}
            }
        }
        let half_line = HalfLine::of_index(parity.ok_or_else(|| Error::Parse("missing parity".into()))?);
        let map_kind = match kind.as_deref() {
            Some("truncated") => MapKind::Truncated,
            Some("compactified") => MapKind::Compactified,
            Some("atomic") => MapKind::Atomic,
            other => return Err(Error::Parse(format!("unknown map kind {other:?}"))),
        };
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("node") {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns: {line}")));
            }
            rows.push((vals[0], vals[1], vals[2]));
        }
        if rows.is_empty() {
            return Err(Error::Parse("no cells".into()));
        }
        let grid = if map_kind == MapKind::Atomic {
            Grid::atoms(half_line, &rows.iter().map(|r| r.0).collect::<Vec<_>>())?
        } else {
            let mut edges = vec![rows[0].0 - 0.5 * rows[0].1];
            for k in 0..rows.len() {
                let hi = rows[k].0 + 0.5 * rows[k].1;
                let hi = if k + 1 < rows.len() { 0.5 * (hi + rows[k + 1].0 - 0.5 * rows[k + 1].1) } else { hi };
                edges.push(hi);
            }
            if half_line == HalfLine::Positive && edges[0].abs() < 1e-14 * edges[1].abs().max(1e-300) {
                edges[0] = 0.0;
            }
            let last = edges.len() - 1;
            if half_line == HalfLine::Negative && edges[last].abs() < 1e-14 * edges[last - 1].abs() {
                edges[last] = 0.0;
            }
            Grid::from_edges(half_line, &edges, map_kind)?
        };
        Self::new(Arc::new(grid), rows.iter().map(|r| r.2).collect())
    }
}

/// Pushforward under `x -> x^(1/q)` (forward) or `x -> x^q` (inverse); cells map with their edges.
pub fn pushforward_power(m: &DiscreteMeasure, q: u32, direction: PowerDirection) -> Result<DiscreteMeasure> {
    if q == 0 {
        return invalid("q must be positive");
    }
    if m.grid().cells().iter().any(|c| c.lo < 0.0) {
        return invalid("pushforward_power needs a measure on [0, inf)");
    }
    if q == 1 {
        return Ok(m.clone());
    }
    let e = match direction {
        PowerDirection::Forward => 1.0 / q as f64,
        PowerDirection::Inverse => q as f64,
    };
    let grid = m.grid().mapped(HalfLine::Positive, |x| x.powf(e))?;
    DiscreteMeasure::new(Arc::new(grid), m.masses().to_vec())
}

/// Sup distance between the two CDFs, evaluated on the union of cell edges.
pub fn sup_cdf_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut pts = a.grid().edges();
    pts.extend(b.grid().edges());
    pts.iter().map(|&x| (a.cdf(x) - b.cdf(x)).abs()).fold(0.0, f64::max)
}

/// Sup distance between a measure's CDF and an arbitrary CDF, checked on edges and midpoints.
pub fn sup_cdf_distance_to(a: &DiscreteMeasure, cdf: impl Fn(f64) -> f64) -> f64 {
    let cells: &[Cell] = a.grid().cells();
    let mut best: f64 = 0.0;
    for c in cells {
        for x in [c.lo, c.mid(), c.hi] {
            best = best.max((a.cdf(x) - cdf(x)).abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::grid::Clustering;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::clustered(HalfLine::Positive, 4.0, n, Clustering::Cosine).unwrap())
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(DiscreteMeasure::new(grid(2), vec![1.0, -1e-3]).is_err());
        assert!(DiscreteMeasure::new(grid(2), vec![1.0]).is_err());
    }

    #[test]
    fn unit_mass_at_four_maps_to_two() {
        let g = Arc::new(Grid::atoms(HalfLine::Positive, &[4.0]).unwrap());
        let m = DiscreteMeasure::new(g, vec![1.0]).unwrap();
        let f = pushforward_power(&m, 2, PowerDirection::Forward).unwrap();
        assert_eq!(f.grid().nodes(), &[2.0]);
        assert_eq!(f.total(), 1.0);
        let same = pushforward_power(&m, 1, PowerDirection::Forward).unwrap();
        assert_eq!(same.grid().nodes(), m.grid().nodes());
    }

    #[test]
    fn pushforward_rejects_negative_nodes() {
        let g = Arc::new(Grid::uniform(HalfLine::Negative, 1.0, 3).unwrap());
        let m = DiscreteMeasure::uniform(g, 1.0);
        assert!(pushforward_power(&m, 2, PowerDirection::Inverse).is_err());
    }

    #[test]
    fn cdf_and_support() {
        let g = Arc::new(Grid::uniform(HalfLine::Positive, 4.0, 4).unwrap());
        let m = DiscreteMeasure::new(g, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(m.cdf(1.5), 0.25);
        assert_eq!(m.cdf(10.0), 1.0);
        assert_eq!(m.support_intervals(1e-10), vec![(1.0, 3.0)]);
        let mut shifted = m.masses().to_vec();
        shifted[1] -= 0.1;
        shifted[2] += 0.1;
        let s = DiscreteMeasure::new(m.grid_arc().clone(), shifted).unwrap();
        assert!((sup_cdf_distance(&m, &s) - 0.1).abs() < 1e-15);
        assert_eq!(sup_cdf_distance(&m, &m), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = Arc::new(Grid::clustered(HalfLine::Negative, 1e3, 30, Clustering::Geometric { inner: 1e-6 }).unwrap());
        let m = DiscreteMeasure::from_density(g, |x| 1.0 / (1.0 + x * x)).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = DiscreteMeasure::read_csv(&buf[..]).unwrap();
        assert_eq!(back.masses(), m.masses());
        assert_eq!(back.half_line(), HalfLine::Negative);
        for (a, b) in back.grid().nodes().iter().zip(m.grid().nodes()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    proptest! {
        #[test]
        fn pushforward_round_trip(n in 2usize..60, q in 1u32..6, seed in 0u64..1000) {
            let g = grid(n);
            let masses: Vec<f64> = (0..n).map(|k| ((k as u64 * 2654435761 + seed) % 97) as f64 + 0.5).collect();
            let m = DiscreteMeasure::new(g, masses).unwrap();
            let there = pushforward_power(&m, q, PowerDirection::Forward).unwrap();
            let back = pushforward_power(&there, q, PowerDirection::Inverse).unwrap();
            prop_assert!((there.total() - m.total()).abs() <= 1e-12 * m.total());
            prop_assert_eq!(back.masses(), m.masses());
            for (a, b) in back.grid().nodes().iter().zip(m.grid().nodes()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
