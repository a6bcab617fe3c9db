use serde::{Deserialize, Serialize};

use super::HalfLine;
use crate::error::{invalid, Result};

/// How grid cells relate to the underlying half-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    /// Identity on a truncated segment `[0, R]` or `[-R, 0]`.
    Truncated,
    /// Edges are images of a uniform parameter under `t -> s t/(1-t)`.
    Compactified,
    /// Zero-width cells: point masses at the nodes.
    Atomic,
}

/// Placement of cell edges on `[0, R]` before the half-line sign is applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Clustering {
    Uniform,
    /// Chebyshev-like clustering at both ends.
    Cosine,
    /// `R t^gamma`, clustering toward 0.
    Power { gamma: f64 },
    /// First cell `[0, inner]`, then geometric cells up to `R`.
    Geometric { inner: f64 },
}

/// A closed cell `[lo, hi]`; `lo == hi` for atoms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
}

impl Cell {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
    pub fn is_atom(&self) -> bool {
        self.hi == self.lo
    }
}

/// Ordered cells inside one half-line.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    half_line: HalfLine,
    cells: Vec<Cell>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    map_kind: MapKind,
    truncation: f64,
}

impl Grid {
    /// Contiguous cells between ascending `edges`.
    pub fn from_edges(half_line: HalfLine, edges: &[f64], map_kind: MapKind) -> Result<Grid> {
        if edges.len() < 2 {
            return invalid("a grid needs at least two edges");
        }
        if map_kind == MapKind::Atomic {
            return invalid("atomic grids are built from points");
        }
        let cells: Vec<Cell> = edges.windows(2).map(|w| Cell { lo: w[0], hi: w[1] }).collect();
        Self::from_cells(half_line, cells, map_kind)
    }

    /// Point masses at ascending `points`.
    pub fn atoms(half_line: HalfLine, points: &[f64]) -> Result<Grid> {
        let cells = points.iter().map(|&p| Cell { lo: p, hi: p }).collect();
        Self::from_cells(half_line, cells, MapKind::Atomic)
    }

    /// A single tiny cell centred at `x`; a finite-energy stand-in for a point mass.
    pub fn point(x: f64, width: f64) -> Result<Grid> {
        let half_line = if x >= 0.0 { HalfLine::Positive } else { HalfLine::Negative };
        let (mut lo, mut hi) = (x - 0.5 * width, x + 0.5 * width);
        if half_line == HalfLine::Positive && lo < 0.0 {
            lo = 0.0;
            hi = width;
        } else if half_line == HalfLine::Negative && hi > 0.0 {
            hi = 0.0;
            lo = -width;
        }
        Self::from_cells(half_line, vec![Cell { lo, hi }], MapKind::Truncated)
    }

    pub fn from_cells(half_line: HalfLine, cells: Vec<Cell>, map_kind: MapKind) -> Result<Grid> {
        if cells.is_empty() {
            return invalid("empty grid");
        }
        for (k, c) in cells.iter().enumerate() {
            if !(c.lo.is_finite() && c.hi.is_finite()) {
                return invalid(format!("non-finite cell {k}"));
            }
            if map_kind == MapKind::Atomic {
                if c.lo != c.hi {
                    return invalid("atomic cells must have zero width");
                }
            } else if c.hi <= c.lo {
                return invalid(format!("cell {k} has non-positive width"));
            }
            if !half_line.contains(c.lo) || !half_line.contains(c.hi) {
                return invalid(format!("cell {k} leaves the half-line"));
            }
            if k > 0 && c.mid() <= cells[k - 1].mid() {
                return invalid("nodes must be strictly increasing");
            }
            if k > 0 && c.lo < cells[k - 1].hi {
                return invalid("cells overlap");
            }
        }
        let nodes: Vec<f64> = cells.iter().map(Cell::mid).collect();
        let weights = cells
            .iter()
            .map(|c| if map_kind == MapKind::Atomic { 1.0 } else { c.width() })
            .collect();
        let truncation = cells
            .iter()
            .map(|c| c.lo.abs().max(c.hi.abs()))
            .fold(0.0, f64::max);
        Ok(Grid { half_line, cells, nodes, weights, map_kind, truncation })
    }

    /// `n` cells on the truncated half-line of radius `radius`.
    pub fn clustered(half_line: HalfLine, radius: f64, n: usize, clustering: Clustering) -> Result<Grid> {
        if !(radius > 0.0) || n == 0 {
            return invalid("radius and cell count must be positive");
        }
        let t = |k: usize| k as f64 / n as f64;
        let mut e: Vec<f64> = match clustering {
            Clustering::Uniform => (0..=n).map(|k| radius * t(k)).collect(),
            Clustering::Cosine => (0..=n)
                .map(|k| 0.5 * radius * (1.0 - (std::f64::consts::PI * t(k)).cos()))
                .collect(),
            Clustering::Power { gamma } => {
                if !(gamma > 0.0) {
                    return invalid("power clustering needs gamma > 0");
                }
                (0..=n).map(|k| radius * t(k).powf(gamma)).collect()
            }
            Clustering::Geometric { inner } => {
                if !(inner > 0.0 && inner < radius) || n < 2 {
                    return invalid("geometric clustering needs 0 < inner < radius and n >= 2");
                }
                let m = n - 1;
                let ratio = (radius / inner).ln() / m as f64;
                std::iter::once(0.0)
                    .chain((0..=m).map(|k| inner * (ratio * k as f64).exp()))
                    .collect()
            }
        };
        e[0] = 0.0;
        e[n] = radius;
        Self::signed(half_line, e, MapKind::Truncated)
    }

    pub fn uniform(half_line: HalfLine, radius: f64, n: usize) -> Result<Grid> {
        Self::clustered(half_line, radius, n, Clustering::Uniform)
    }

    /// Geometric cells with a variable number of cells per decade.
    ///
    /// `per_decade` applies everywhere except inside the `(lo, hi, per_decade)` bands.
    /// The segment `[0, inner]` is cut into equal cells.
    pub fn log_graded(
        half_line: HalfLine,
        inner: f64,
        radius: f64,
        per_decade: f64,
        bands: &[(f64, f64, f64)],
    ) -> Result<Grid> {
        if !(inner > 0.0 && inner < radius && per_decade > 0.0) {
            return invalid("log grading needs 0 < inner < radius and a positive density");
        }
        let (u0, u1) = (inner.log10(), radius.log10());
        // bands fade out linearly over one decade so that cell sizes never jump
        let density = |u: f64| {
            bands
                .iter()
                .map(|b| {
                    let dist = (b.0.log10() - u).max(u - b.1.log10()).max(0.0);
                    per_decade + (b.2 - per_decade) * (1.0 - dist).max(0.0)
                })
                .fold(per_decade, f64::max)
        };
        // cumulative cell count on a fine parameter mesh, then invert
        let fine = 20_000usize;
        let du = (u1 - u0) / fine as f64;
        let mut cum = vec![0.0; fine + 1];
        for k in 0..fine {
            let um = u0 + du * (k as f64 + 0.5);
            cum[k + 1] = cum[k] + density(um) * du;
        }
        let total = cum[fine].ceil().max(1.0) as usize;
        let scale = cum[fine] / total as f64;
        // [0, inner] is split evenly to match the width of the first geometric cell
        let ratio = 10f64.powf(1.0 / density(u0));
        let m = (1.0 / (ratio - 1.0)).round().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..=m).map(|k| inner * k as f64 / m as f64).collect();
        let mut idx = 0usize;
        for c in 1..total {
            let target = c as f64 * scale;
            while cum[idx + 1] < target {
                idx += 1;
            }
            let frac = (target - cum[idx]) / (cum[idx + 1] - cum[idx]);
            edges.push(10f64.powf(u0 + du * (idx as f64 + frac)));
        }
        edges.push(radius);
        Self::signed(half_line, edges, MapKind::Truncated)
    }

    /// Cells from the map `t -> scale t/(1-t)` on a uniform parameter mesh of `[0, t_max]`.
    pub fn compactified(half_line: HalfLine, n: usize, scale: f64, t_max: f64) -> Result<Grid> {
        if !(t_max > 0.0 && t_max < 1.0 && scale > 0.0) || n == 0 {
            return invalid("compactified grid needs 0 < t_max < 1, scale > 0, n > 0");
        }
        let e = (0..=n)
            .map(|k| {
                let t = t_max * k as f64 / n as f64;
                scale * t / (1.0 - t)
            })
            .collect();
        Self::signed(half_line, e, MapKind::Compactified)
    }

    fn signed(half_line: HalfLine, positive_edges: Vec<f64>, kind: MapKind) -> Result<Grid> {
        let edges: Vec<f64> = match half_line {
            HalfLine::Positive => positive_edges,
            HalfLine::Negative => positive_edges.iter().rev().map(|x| -x).collect(),
        };
        Self::from_edges(half_line, &edges, kind)
    }

    pub fn half_line(&self) -> HalfLine {
        self.half_line
    }
    pub fn map_kind(&self) -> MapKind {
        self.map_kind
    }
    /// Largest distance of a cell endpoint from the origin.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
    pub fn cell(&self, k: usize) -> Cell {
        self.cells[k]
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn is_atomic(&self) -> bool {
        self.map_kind == MapKind::Atomic
    }

    /// Cell edges in ascending order (lo of each cell, then the last hi).
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.cells.iter().map(|c| c.lo).collect();
        e.push(self.cells.last().unwrap().hi);
        e
    }

    /// Index of the cell nearest the origin and farthest from it.
    pub fn inner_outer(&self) -> (usize, usize) {
        match self.half_line {
            HalfLine::Positive => (0, self.len() - 1),
            HalfLine::Negative => (self.len() - 1, 0),
        }
    }

    /// Applies `f` to every cell endpoint; `f` must be monotone on the grid.
    pub fn mapped(&self, half_line: HalfLine, f: impl Fn(f64) -> f64) -> Result<Grid> {
        let mut cells: Vec<Cell> = self
            .cells
            .iter()
            .map(|c| {
                let (a, b) = (f(c.lo), f(c.hi));
                Cell { lo: a.min(b), hi: a.max(b) }
            })
            .collect();
        if cells.len() > 1 && cells[0].mid() > cells[1].mid() {
            cells.reverse();
        }
        Self::from_cells(half_line, cells, self.map_kind)
    }
}
