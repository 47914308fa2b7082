use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Cell, GCellGrid, Layout, Netlist, Pin};
use crate::error::Result;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    w: f64,
    h: f64,
    #[serde(rename = "macro")]
    is_macro: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PinRecord {
    cell: usize,
    ox: f64,
    oy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    grid: GCellGrid,
    cells: Vec<CellRecord>,
    coords: Vec<[f64; 2]>,
    nets: Vec<Vec<PinRecord>>,
}

impl Layout {
    /// Parses and validates the layout JSON format.
    pub fn from_json(bytes: &[u8]) -> Result<Layout> {
        let file: LayoutFile = serde_json::from_slice(bytes)?;
        let grid = GCellGrid::new(file.grid.w, file.grid.h)?;
        let cells = file
            .cells
            .into_iter()
            .map(|c| Cell { width: c.w, height: c.h, is_macro: c.is_macro })
            .collect();
        let nets = file
            .nets
            .into_iter()
            .map(|net| net.into_iter().map(|p| Pin { cell: p.cell, offset_x: p.ox, offset_y: p.oy }).collect())
            .collect();
        let netlist = Netlist::new(cells, nets)?;
        Layout::new(Arc::new(netlist), file.coords, grid)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let file = LayoutFile {
            grid: self.grid,
            cells: self
                .netlist
                .cells()
                .iter()
                .map(|c| CellRecord { w: c.width, h: c.height, is_macro: c.is_macro })
                .collect(),
            coords: self.coords.clone(),
            nets: self
                .netlist
                .nets()
                .iter()
                .map(|net| net.iter().map(|p| PinRecord { cell: p.cell, ox: p.offset_x, oy: p.offset_y }).collect())
                .collect(),
        };
        Ok(crate::json::to_vec(&file)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{"grid":{"W":2,"H":2},
        "cells":[{"w":0.1,"h":0.1,"macro":false},{"w":0.0,"h":0.0,"macro":false}],
        "coords":[[0.1,0.2],[0.7,0.9]],
        "nets":[[{"cell":0,"ox":0.05,"oy":0.0},{"cell":1,"ox":0.0,"oy":0.0}]]}"#;

    #[test]
    fn parses_reference_document() {
        let l = Layout::from_json(SMALL.as_bytes()).unwrap();
        assert_eq!(l.n_cells(), 2);
        assert_eq!(l.grid(), GCellGrid::new(2, 2).unwrap());
        assert_eq!(l.pin_position(0, 0), (0.15000000000000002, 0.2));
        let again = Layout::from_json(&l.to_json().unwrap()).unwrap();
        assert_eq!(again, l);
    }

    #[test]
    fn rejects_invalid_documents() {
        let bad_pin = SMALL.replace(r#""cell":1"#, r#""cell":5"#);
        assert!(Layout::from_json(bad_pin.as_bytes()).is_err());
        let outside = SMALL.replace("[0.7,0.9]", "[1.7,0.9]");
        assert!(Layout::from_json(outside.as_bytes()).is_err());
        let zero_grid = SMALL.replace(r#""W":2"#, r#""W":0"#);
        assert!(Layout::from_json(zero_grid.as_bytes()).is_err());
        let short_coords = SMALL.replace(",[0.7,0.9]", "");
        assert!(Layout::from_json(short_coords.as_bytes()).is_err());
        let err = Layout::from_json(b"{\"grid\":\n{\"W\": x}}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
