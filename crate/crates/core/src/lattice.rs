//! Dyadic cells, design samples and occupancy maps.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scaling::dyadic;
use crate::{Error, Result};

/// Cell `2^-j (m + (0,1)^d)` of the level-`j` lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    #[serde(rename = "j")]
    pub level: u32,
    #[serde(rename = "m")]
    pub coords: Vec<i64>,
}

impl CellIndex {
    pub fn new(level: u32, coords: Vec<i64>) -> Self {
        Self { level, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Cell center `2^-j (m + 1/2)`.
    pub fn center(&self) -> Vec<f64> {
        let h = dyadic(self.level).recip();
        self.coords.iter().map(|&m| h * (m as f64 + 0.5)).collect()
    }

    /// Half-open membership `2^-j m <= x < 2^-j (m + 1)` on every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        locate(x, self.level) == *self
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "j={} m={:?}", self.level, self.coords)
    }
}

/// `m = floor(2^j x)` componentwise. A coordinate exactly equal to `1` is
/// pulled into the last cell of the unit cube.
pub fn locate(x: &[f64], level: u32) -> CellIndex {
    let scale = dyadic(level);
    let top = (1i64 << level.min(62)) - 1;
    let coords = x
        .iter()
        .map(|&xi| {
            if xi == 1.0 {
                top
            } else {
                (scale * xi).floor() as i64
            }
        })
        .collect();
    CellIndex::new(level, coords)
}

/// `u - anchor + 2^{-j-1}`: moves `anchor` to the center of `2^-j [0,1]^d`.
pub fn shift(u: &[f64], anchor: &[f64], level: u32) -> Vec<f64> {
    let half = 0.5 * dyadic(level).recip();
    u.iter().zip(anchor).map(|(&ui, &ai)| ui - ai + half).collect()
}

/// Design points and responses, `n` rows in dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSample {
    dim: usize,
    points: Vec<f64>,
    responses: Vec<f64>,
}

impl DesignSample {
    /// `points` is row-major with `dim` coordinates per row.
    pub fn new(dim: usize, points: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if points.len() != dim * responses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not match {} responses in dimension {dim}",
                points.len(),
                responses.len()
            )));
        }
        if let Some(bad) = points.iter().chain(&responses).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample value {bad}")));
        }
        Ok(Self { dim, points, responses })
    }

    /// One-dimensional sample.
    pub fn from_1d(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(1, x, y)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new(), responses: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Same design with new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.points.clone(), responses)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut responses = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            responses.push(self.responses[i]);
        }
        Self { dim: self.dim, points, responses }
    }
}

/// Sample rows grouped by level-`j` cell.
#[derive(Debug, Clone)]
pub struct OccupancyMap {
    level: u32,
    cells: BTreeMap<CellIndex, Vec<usize>>,
}

impl OccupancyMap {
    pub fn build(sample: &DesignSample, level: u32) -> Self {
        let mut cells: BTreeMap<CellIndex, Vec<usize>> = BTreeMap::new();
        for (i, x) in sample.points().enumerate() {
            cells.entry(locate(x, level)).or_default().push(i);
        }
        Self { level, cells }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    pub fn rows(&self, cell: &CellIndex) -> &[usize] {
        self.cells.get(cell).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, &[usize])> {
        self.cells.iter().map(|(c, v)| (c, v.as_slice()))
    }
}
