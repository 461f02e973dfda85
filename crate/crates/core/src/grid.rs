//! One-dimensional finite-volume grids on `[0, L]`.

use crate::error::{Result, SheathError};

pub const MIN_CELLS: usize = 16;
pub const MAX_RATIO: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub enum Grading {
    Uniform,
    /// Geometric growth from `first_width` at `x = 0` with factor `ratio`,
    /// then uniform cells of `interior_width`.
    Geometric {
        ratio: f64,
        first_width: f64,
        interior_width: f64,
    },
    /// Every cell of the parent split in two.
    Subdivided(Box<Grading>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
    grading: Grading,
}

impl Grid1D {
    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(SheathError::invalid(format!("grid length must be positive, got {length}")));
        }
        let edges = (0..=cells).map(|i| length * i as f64 / cells as f64).collect();
        Self::from_edges_with(edges, Grading::Uniform)
    }

    /// Geometric refinement toward `x = 0`, uniform once the cell width
    /// reaches `interior_width`.
    pub fn graded(length: f64, first_width: f64, ratio: f64, interior_width: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio <= MAX_RATIO) {
            return Err(SheathError::invalid(format!(
                "grading ratio must lie in (1, {MAX_RATIO}], got {ratio}"
            )));
        }
        if !(first_width > 0.0) || !(interior_width >= first_width) || !(length > interior_width) {
            return Err(SheathError::invalid(format!(
                "need 0 < first_width <= interior_width < length, got {first_width}, {interior_width}, {length}"
            )));
        }
        let mut edges = vec![0.0];
        let mut w = first_width;
        let mut x = 0.0;
        while w < interior_width && x + w < length {
            x += w;
            edges.push(x);
            w *= ratio;
        }
        let rest = length - x;
        let m = (rest / interior_width).ceil().max(1.0) as usize;
        for k in 1..=m {
            edges.push(x + rest * k as f64 / m as f64);
        }
        *edges.last_mut().expect("nonempty") = length;
        Self::from_edges_with(
            edges,
            Grading::Geometric {
                ratio,
                first_width,
                interior_width,
            },
        )
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        Self::from_edges_with(edges, Grading::Uniform)
    }

    fn from_edges_with(edges: Vec<f64>, grading: Grading) -> Result<Self> {
        if edges.len() < MIN_CELLS + 1 {
            return Err(SheathError::invalid(format!(
                "grid needs at least {MIN_CELLS} cells, got {}",
                edges.len().saturating_sub(1)
            )));
        }
        if edges[0] != 0.0 {
            return Err(SheathError::invalid("grid must start at x = 0"));
        }
        let widths: Vec<f64> = edges.windows(2).map(|e| e[1] - e[0]).collect();
        if let Some(k) = widths.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(SheathError::invalid(format!("cell {k} has nonpositive width")));
        }
        let centers = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        Ok(Self {
            edges,
            centers,
            widths,
            grading,
        })
    }

    /// Split every cell in two.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.edges.len() - 1);
        for e in self.edges.windows(2) {
            edges.push(e[0]);
            edges.push(0.5 * (e[0] + e[1]));
        }
        edges.push(self.length());
        Self::from_edges_with(edges, Grading::Subdivided(Box::new(self.grading.clone())))
            .expect("refinement of a valid grid is valid")
    }

    /// Same cell layout with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let edges = self.edges.iter().map(|x| x * factor).collect();
        Self::from_edges_with(edges, self.grading.clone()).expect("scaling keeps a grid valid")
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn length(&self) -> f64 {
        *self.edges.last().expect("nonempty grid")
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell centers with the two end points prepended and appended.
    pub fn nodes_with_boundaries(&self) -> Vec<f64> {
        let mut nodes = Vec::with_capacity(self.len() + 2);
        nodes.push(0.0);
        nodes.extend_from_slice(&self.centers);
        nodes.push(self.length());
        nodes
    }

    /// Number of cells whose center lies in `[0, x]`.
    pub fn cells_below(&self, x: f64) -> usize {
        self.centers.iter().take_while(|c| **c <= x).count()
    }

    /// Cell-width-weighted sum.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.widths).map(|(v, w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_layout() {
        let g = Grid1D::uniform(2.0, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g.widths()[3] - 0.1).abs() < 1e-15);
        assert!((g.centers()[0] - 0.05).abs() < 1e-15);
        assert_eq!(g.length(), 2.0);
    }

    #[test]
    fn graded_grid_grows_then_stays_uniform() {
        let g = Grid1D::graded(1.0, 1e-3, 1.1, 0.01).unwrap();
        let w = g.widths();
        assert!((w[0] - 1e-3).abs() < 1e-15);
        for k in 1..w.len() {
            assert!(w[k] / w[k - 1] <= 1.1 + 1e-12, "cell {k}");
        }
        assert!(w.iter().all(|v| *v <= 0.01 + 1e-12));
        assert!((g.length() - 1.0).abs() < 1e-15);
        assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_grading_and_tiny_grids() {
        assert!(Grid1D::graded(1.0, 1e-3, 1.3, 0.01).is_err());
        assert!(Grid1D::graded(1.0, 1e-3, 1.0, 0.01).is_err());
        assert!(Grid1D::uniform(1.0, 8).is_err());
        assert!(Grid1D::from_edges((0..20).map(|k| if k == 5 { 0.3 } else { k as f64 }).collect()).is_err());
    }

    #[test]
    fn refinement_halves_every_width() {
        let g = Grid1D::graded(1.0, 1e-3, 1.1, 0.02).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 2 * g.len());
        for (k, w) in g.widths().iter().enumerate() {
            assert!((r.widths()[2 * k] - 0.5 * w).abs() < 1e-15);
        }
    }
}
