//! 2D building boundaries from the overhead DSM and from the ground cloud.

mod facade;
pub mod morphology;
mod normals;

pub use facade::{facade_points, ground_segments};
pub use normals::{estimate_normals, estimate_vertical, NormalEstimate};

use crate::error::{Error, Result};
use crate::geom::{Georef, HeightGrid, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub georef: Georef,
    pub cells: Vec<bool>,
}

impl BinaryMask {
    pub fn new(georef: Georef) -> Self {
        let n = georef.len();
        Self { georef, cells: vec![false; n] }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[self.georef.index(row, col)]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Overhead,
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub id: usize,
    pub points2d: Vec<Point2>,
    pub barycenter: Point2,
    pub source: Source,
}

impl BoundarySegment {
    /// Builds a segment; `None` when fewer than three points remain.
    pub fn new(id: usize, points2d: Vec<Point2>, source: Source) -> Option<Self> {
        if points2d.len() < 3 {
            return None;
        }
        let sum = points2d.iter().fold((0.0, 0.0), |a, p| (a.0 + p.x, a.1 + p.y));
        let n = points2d.len() as f64;
        Some(Self {
            id,
            barycenter: Point2::new(sum.0 / n, sum.1 / n),
            points2d,
            source,
        })
    }
}

/// High objects: white top-hat of the height band above `h_min`.
pub fn tophat_mask(dsm: &HeightGrid, se_radius_m: f64, h_min: f64) -> Result<BinaryMask> {
    let height = dsm.require("height")?;
    let g = &dsm.georef;
    if !(se_radius_m >= g.gsd) {
        return Err(Error::Input(format!(
            "structuring element radius {se_radius_m} m is below the GSD {} m",
            g.gsd
        )));
    }
    let opened = morphology::opening(height, g.width, g.height, se_radius_m / g.gsd);
    let cells = height
        .iter()
        .zip(&opened)
        .map(|(h, o)| h.is_finite() && o.is_finite() && h - o > h_min)
        .collect();
    Ok(BinaryMask { georef: *g, cells })
}

/// Grid with a single "ndvi" band.
pub fn ndvi(grid: &HeightGrid) -> Result<HeightGrid> {
    let nir = grid.require("nir")?;
    let red = grid.require("red")?;
    let values = nir
        .iter()
        .zip(red)
        .map(|(n, r)| {
            let s = n + r;
            if s == 0.0 {
                0.0
            } else {
                ((n - r) / s).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(HeightGrid {
        georef: grid.georef,
        bands: vec![("ndvi".into(), values)],
    })
}

pub fn remove_vegetation(mask: &BinaryMask, ndvi: &HeightGrid, ndvi_max: f64) -> Result<BinaryMask> {
    if !mask.georef.same_as(&ndvi.georef) {
        return Err(Error::Input("mask and NDVI grids have different georeferencing".into()));
    }
    let v = ndvi.require("ndvi")?;
    Ok(BinaryMask {
        georef: mask.georef,
        cells: mask.cells.iter().zip(v).map(|(&m, &x)| m && x <= ndvi_max).collect(),
    })
}

/// 8-connected components of `cells`, labelled in scan order. Returns one
/// list of flat indices per component.
pub(crate) fn components8(cells: &[bool], width: usize, height: usize) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; cells.len()];
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..cells.len() {
        if !cells[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (r, c) = ((i / width) as i64, (i % width) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= height as i64 || nc >= width as i64 {
                        continue;
                    }
                    let j = nr as usize * width + nc as usize;
                    if cells[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// True when the cell has a false (or off-grid) 4-neighbor.
pub(crate) fn is_edge_cell(cells: &[bool], width: usize, height: usize, i: usize) -> bool {
    let (r, c) = (i / width, i % width);
    r == 0
        || c == 0
        || r + 1 == height
        || c + 1 == width
        || !cells[i - width]
        || !cells[i + width]
        || !cells[i - 1]
        || !cells[i + 1]
}

/// One overhead segment per 8-connected component with at least `min_cells` cells.
pub fn mask_boundary(mask: &BinaryMask, min_cells: usize) -> Vec<BoundarySegment> {
    let g = &mask.georef;
    let mut out = Vec::new();
    for comp in components8(&mask.cells, g.width, g.height) {
        if comp.len() < min_cells {
            continue;
        }
        let pts = comp
            .iter()
            .filter(|&&i| is_edge_cell(&mask.cells, g.width, g.height, i))
            .map(|&i| g.cell_center(i / g.width, i % g.width))
            .collect();
        if let Some(seg) = BoundarySegment::new(out.len(), pts, Source::Overhead) {
            out.push(seg);
        }
    }
    out
}
