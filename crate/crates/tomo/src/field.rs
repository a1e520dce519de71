//! Scalar fields sampled on the active pixels of a masked grid.

use std::sync::Arc;

use crate::error::{Result, TomoError};
use crate::geometry::PixelGrid;

/// A scalar quantity (temperature, molar fraction, absorbance density)
/// with one value per active pixel.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<PixelGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<PixelGrid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n_active() {
            return Err(TomoError::Shape(format!(
                "field has {} values for a grid with {} active pixels",
                values.len(),
                grid.n_active()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Arc<PixelGrid>, value: f64) -> Field {
        let n = grid.n_active();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    /// Evaluates `f(x, y)` at every active pixel centre.
    pub fn from_fn(grid: Arc<PixelGrid>, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let values = (0..grid.n_active())
            .map(|j| {
                let (x, y) = grid.cell_center(j);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<PixelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Errors unless `other` lives on an identically shaped grid.
    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(TomoError::Shape("fields live on different grids".into()));
        }
        Ok(())
    }
}
