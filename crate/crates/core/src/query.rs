//! Local bounding-box queries over factor-plane positions.

use crate::ca::CaModel;
use crate::export::FactorRecord;
use crate::{Error, Result};

/// Axis-aligned rectangle in the principal plane, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        for value in [x_min, x_max, y_min, y_max] {
            if !value.is_finite() {
                return Err(Error::Parse("bounding box edge is not finite".into()));
            }
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::Parse(format!(
                "bounding box is empty: [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(BoundingBox { x_min, x_max, y_min, y_max })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }
}

/// Ids of the records inside the box (bounds inclusive), sorted by id.
pub fn bbox_query(records: &[FactorRecord], bbox: &BoundingBox) -> Vec<String> {
    let mut ids: Vec<String> = records
        .iter()
        .filter(|r| bbox.contains(r.xcoord, r.ycoord))
        .map(|r| r.id.clone())
        .collect();
    ids.sort();
    ids
}

/// Box centred on a column's principal-plane position with the given
/// half-extents, for "documents near this term" queries. The model must
/// carry at least two factors.
pub fn center_box(
    model: &CaModel,
    label: &str,
    half_width: f64,
    half_height: f64,
) -> Result<BoundingBox> {
    if model.n_factors() < 2 {
        return Err(Error::Degenerate(format!(
            "planar query needs 2 factors, model has {}",
            model.n_factors()
        )));
    }
    let j = model
        .col_labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let x = model.col_coords[j][0];
    let y = model.col_coords[j][1];
    BoundingBox::new(x - half_width, x + half_width, y - half_height, y + half_height)
}
