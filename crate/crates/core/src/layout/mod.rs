//! Placement data model: netlist, coordinates, the G-Cell grid and the
//! per-cell boxes a cell may move within without changing any tile
//! assignment.

mod io;
mod synth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use synth::{synth_layout, MacroSpec, SynthParams};

/// Clearance kept from the upper side of a half-open tile (and from the
/// lower side, to absorb rounding in `gx / W`). Far above one ulp at unit
/// scale, far below any tile pitch in use.
pub const TILE_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub width: f64,
    pub height: f64,
    pub is_macro: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub cell: usize,
    pub offset_x: f64,
    pub offset_y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    cells: Vec<Cell>,
    nets: Vec<Vec<Pin>>,
    /// For each cell, the `(net, pin)` positions referencing it.
    cell_pins: Vec<Vec<(usize, usize)>>,
}

impl Netlist {
    pub fn new(cells: Vec<Cell>, nets: Vec<Vec<Pin>>) -> Result<Self> {
        let n = cells.len();
        for (i, c) in cells.iter().enumerate() {
            if !(c.width.is_finite() && c.height.is_finite() && c.width >= 0.0 && c.height >= 0.0) {
                return Err(Error::InvalidLayout(format!("cell {i} has invalid extent")));
            }
        }
        let mut cell_pins = vec![Vec::new(); n];
        for (e, net) in nets.iter().enumerate() {
            if net.len() < 2 {
                return Err(Error::InvalidLayout(format!("net {e} has {} pins, need at least 2", net.len())));
            }
            for (p, pin) in net.iter().enumerate() {
                if pin.cell >= n {
                    return Err(Error::InvalidLayout(format!(
                        "net {e} pin {p} references cell {} of {n}",
                        pin.cell
                    )));
                }
                if !(pin.offset_x.is_finite() && pin.offset_y.is_finite()) {
                    return Err(Error::InvalidLayout(format!("net {e} pin {p} has a non-finite offset")));
                }
                if net[..p].iter().any(|q| {
                    q.cell == pin.cell
                        && q.offset_x.to_bits() == pin.offset_x.to_bits()
                        && q.offset_y.to_bits() == pin.offset_y.to_bits()
                }) {
                    return Err(Error::InvalidLayout(format!("net {e} lists pin {p} twice")));
                }
                cell_pins[pin.cell].push((e, p));
            }
        }
        Ok(Self { cells, nets, cell_pins })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn nets(&self) -> &[Vec<Pin>] {
        &self.nets
    }

    pub fn cell_pins(&self, cell: usize) -> &[(usize, usize)] {
        &self.cell_pins[cell]
    }

    pub fn n_pins(&self) -> usize {
        self.nets.iter().map(Vec::len).sum()
    }
}

/// Uniform `W x H` routing-tile grid over the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GCellGrid {
    #[serde(rename = "W")]
    w: usize,
    #[serde(rename = "H")]
    h: usize,
}

impl GCellGrid {
    pub fn new(w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidLayout(format!("grid must be at least 1x1, got {w}x{h}")));
        }
        Ok(Self { w, h })
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn pitch_x(&self) -> f64 {
        1.0 / self.w as f64
    }

    pub fn pitch_y(&self) -> f64 {
        1.0 / self.h as f64
    }

    /// Tile index of a coordinate along one axis with `count` tiles.
    /// Half-open tiles; the last tile is closed.
    #[inline]
    pub fn tile_index(v: f64, count: usize) -> usize {
        let t = (v * count as f64).floor();
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(count - 1)
        }
    }

    #[inline]
    pub fn tile_of(&self, x: f64, y: f64) -> (usize, usize) {
        (Self::tile_index(x, self.w), Self::tile_index(y, self.h))
    }

    /// `[lo, hi]` of tile `t` along an axis with `count` tiles.
    #[inline]
    pub fn tile_bounds(t: usize, count: usize) -> (f64, f64) {
        (t as f64 / count as f64, (t + 1) as f64 / count as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    netlist: Arc<Netlist>,
    coords: Vec<[f64; 2]>,
    grid: GCellGrid,
}

impl Layout {
    pub fn new(netlist: Arc<Netlist>, coords: Vec<[f64; 2]>, grid: GCellGrid) -> Result<Self> {
        if coords.len() != netlist.n_cells() {
            return Err(Error::InvalidLayout(format!(
                "{} coordinate rows for {} cells",
                coords.len(),
                netlist.n_cells()
            )));
        }
        let layout = Self { netlist, coords, grid };
        layout.validate_domain()?;
        Ok(layout)
    }

    fn validate_domain(&self) -> Result<()> {
        let inside = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        for (i, c) in self.coords.iter().enumerate() {
            if !inside(c[0]) || !inside(c[1]) {
                return Err(Error::InvalidLayout(format!("cell {i} at {c:?} outside [0,1]^2")));
            }
        }
        for (e, net) in self.netlist.nets().iter().enumerate() {
            for (p, _) in net.iter().enumerate() {
                let (x, y) = self.pin_position(e, p);
                if !inside(x) || !inside(y) {
                    return Err(Error::InvalidLayout(format!(
                        "net {e} pin {p} at ({x}, {y}) outside [0,1]^2"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn netlist_arc(&self) -> &Arc<Netlist> {
        &self.netlist
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn grid(&self) -> GCellGrid {
        self.grid
    }

    pub fn n_cells(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn pin_position(&self, net: usize, pin: usize) -> (f64, f64) {
        let p = self.netlist.nets[net][pin];
        let c = self.coords[p.cell];
        (c[0] + p.offset_x, c[1] + p.offset_y)
    }

    pub fn gcell_of(&self, cell: usize) -> Result<(usize, usize)> {
        let c = self
            .coords
            .get(cell)
            .ok_or(Error::IndexOutOfRange { index: cell, len: self.coords.len() })?;
        Ok(self.grid.tile_of(c[0], c[1]))
    }

    /// Same netlist and grid, new coordinates; domain is re-validated.
    pub fn with_coords(&self, coords: Vec<[f64; 2]>) -> Result<Layout> {
        Layout::new(Arc::clone(&self.netlist), coords, self.grid)
    }

    /// Stable 64-bit digest of grid, netlist and coordinates.
    pub fn content_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.grid.w as u64).to_le_bytes());
        h.update((self.grid.h as u64).to_le_bytes());
        for c in self.netlist.cells() {
            h.update(c.width.to_le_bytes());
            h.update(c.height.to_le_bytes());
            h.update([c.is_macro as u8]);
        }
        for net in self.netlist.nets() {
            h.update((net.len() as u64).to_le_bytes());
            for p in net {
                h.update((p.cell as u64).to_le_bytes());
                h.update(p.offset_x.to_le_bytes());
                h.update(p.offset_y.to_le_bytes());
            }
        }
        for c in &self.coords {
            h.update(c[0].to_le_bytes());
            h.update(c[1].to_le_bytes());
        }
        u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
    }

    pub fn feasible_box(&self) -> FeasibleBox {
        FeasibleBox::of(self)
    }

    /// Returns `coords + delta` as a new layout after checking every row
    /// against the feasible box and, when given, the moved-cell budget.
    pub fn apply_perturbation(&self, delta: &[[f64; 2]], eps0: Option<usize>) -> Result<Layout> {
        if delta.len() != self.n_cells() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x2", self.n_cells()),
                actual: format!("{}x2", delta.len()),
            });
        }
        let bx = self.feasible_box();
        let bad: Vec<usize> = (0..delta.len()).filter(|&i| !bx.contains(i, delta[i])).collect();
        if !bad.is_empty() {
            return Err(Error::InvalidPerturbation { reason: "offset outside feasible box".into(), cells: bad });
        }
        let moved: Vec<usize> = (0..delta.len()).filter(|&i| delta[i] != [0.0, 0.0]).collect();
        if let Some(eps0) = eps0 {
            if moved.len() > eps0 {
                return Err(Error::InvalidPerturbation {
                    reason: format!("{} cells moved, budget {eps0}", moved.len()),
                    cells: moved,
                });
            }
        }
        let coords: Vec<[f64; 2]> =
            self.coords.iter().zip(delta).map(|(c, d)| [c[0] + d[0], c[1] + d[1]]).collect();
        let out = self.with_coords(coords)?;
        // Rounding in `coord + delta` must not push anything across a tile edge.
        let crossed: Vec<usize> = moved
            .into_iter()
            .filter(|&i| !self.anchors_keep_tiles(&out, i))
            .collect();
        if !crossed.is_empty() {
            return Err(Error::InvalidPerturbation { reason: "tile assignment changed".into(), cells: crossed });
        }
        Ok(out)
    }

    fn anchors_keep_tiles(&self, other: &Layout, cell: usize) -> bool {
        let g = self.grid;
        let a = self.coords[cell];
        let b = other.coords[cell];
        if g.tile_of(a[0], a[1]) != g.tile_of(b[0], b[1]) {
            return false;
        }
        self.netlist.cell_pins(cell).iter().all(|&(e, p)| {
            let (ax, ay) = self.pin_position(e, p);
            let (bx, by) = other.pin_position(e, p);
            g.tile_of(ax, ay) == g.tile_of(bx, by)
        })
    }
}

/// Per-cell offset bounds `l <= 0 <= u` (per axis) that keep the cell's
/// origin and every one of its pins inside their current tiles.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleBox {
    pub lower: Vec<[f64; 2]>,
    pub upper: Vec<[f64; 2]>,
}

impl FeasibleBox {
    pub fn of(layout: &Layout) -> Self {
        let n = layout.n_cells();
        let grid = layout.grid();
        let counts = [grid.w(), grid.h()];
        let mut lower = vec![[0.0; 2]; n];
        let mut upper = vec![[0.0; 2]; n];
        for i in 0..n {
            if layout.netlist().cells()[i].is_macro {
                continue;
            }
            let c = layout.coords()[i];
            let mut lo = [f64::NEG_INFINITY; 2];
            let mut hi = [f64::INFINITY; 2];
            let mut clip = |anchor: [f64; 2]| {
                for a in 0..2 {
                    let t = GCellGrid::tile_index(anchor[a], counts[a]);
                    let (tlo, thi) = GCellGrid::tile_bounds(t, counts[a]);
                    let upper_edge = if t + 1 == counts[a] { 1.0 } else { thi - TILE_MARGIN };
                    let lower_edge = if t == 0 { 0.0 } else { tlo + TILE_MARGIN };
                    lo[a] = lo[a].max(lower_edge - anchor[a]);
                    hi[a] = hi[a].min(upper_edge - anchor[a]);
                }
            };
            clip(c);
            for &(e, p) in layout.netlist().cell_pins(i) {
                let (x, y) = layout.pin_position(e, p);
                clip([x, y]);
            }
            for a in 0..2 {
                lower[i][a] = lo[a].min(0.0);
                upper[i][a] = hi[a].max(0.0);
            }
        }
        Self { lower, upper }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    #[inline]
    pub fn contains(&self, cell: usize, offset: [f64; 2]) -> bool {
        (0..2).all(|a| {
            offset[a].is_finite() && self.lower[cell][a] <= offset[a] && offset[a] <= self.upper[cell][a]
        })
    }

    /// True when the cell can move at all.
    pub fn is_movable(&self, cell: usize) -> bool {
        (0..2).any(|a| self.lower[cell][a] < 0.0 || self.upper[cell][a] > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_cell(x: f64, y: f64, w: usize, h: usize) -> Layout {
        let cells = vec![
            Cell { width: 0.0, height: 0.0, is_macro: false },
            Cell { width: 0.0, height: 0.0, is_macro: false },
        ];
        let nl = Netlist::new(cells, vec![]).unwrap();
        Layout::new(Arc::new(nl), vec![[x, y], [0.0, 0.0]], GCellGrid::new(w, h).unwrap()).unwrap()
    }

    #[test]
    fn gcell_of_examples() {
        assert_eq!(single_cell(0.0, 0.0, 4, 4).gcell_of(0).unwrap(), (0, 0));
        assert_eq!(single_cell(1.0, 1.0, 4, 4).gcell_of(0).unwrap(), (3, 3));
        assert_eq!(single_cell(0.26, 0.74, 4, 4).gcell_of(0).unwrap(), (1, 2));
        // interior boundary belongs to the higher tile
        assert_eq!(single_cell(0.5, 0.25, 4, 4).gcell_of(0).unwrap(), (2, 1));
        assert!(matches!(
            single_cell(0.0, 0.0, 4, 4).gcell_of(9),
            Err(Error::IndexOutOfRange { index: 9, len: 2 })
        ));
    }

    #[test]
    fn feasible_box_single_tile_spans_unit_square() {
        let l = single_cell(0.3, 0.7, 1, 1);
        let b = l.feasible_box();
        assert_eq!(b.lower[0], [-0.3, -0.7]);
        assert!((b.upper[0][0] - 0.7).abs() < 1e-15 && (b.upper[0][1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn feasible_box_at_tile_corner() {
        let b = single_cell(0.25, 0.5, 4, 4).feasible_box();
        assert_eq!(b.lower[0], [0.0, 0.0]);
        assert!((b.upper[0][0] - 0.25).abs() < 1e-8 && b.upper[0][0] < 0.25);
        assert!((b.upper[0][1] - 0.25).abs() < 1e-8 && b.upper[0][1] < 0.25);
    }

    #[test]
    fn feasible_box_hand_example() {
        // tiles [0.25, 0.5) x [0.5, 1.0]
        let b = single_cell(0.3, 0.6, 4, 2).feasible_box();
        assert!((b.lower[0][0] + 0.05).abs() < 1e-8);
        assert!((b.lower[0][1] + 0.1).abs() < 1e-8);
        assert!((b.upper[0][0] - 0.2).abs() < 1e-8);
        assert!((b.upper[0][1] - 0.4).abs() < 1e-12); // last tile is closed
    }

    #[test]
    fn pins_constrain_the_box() {
        let cells = vec![
            Cell { width: 0.1, height: 0.1, is_macro: false },
            Cell { width: 0.0, height: 0.0, is_macro: false },
        ];
        let nets = vec![vec![
            Pin { cell: 0, offset_x: 0.04, offset_y: 0.0 },
            Pin { cell: 1, offset_x: 0.0, offset_y: 0.0 },
        ]];
        let nl = Arc::new(Netlist::new(cells, nets).unwrap());
        // origin at 0.3 (tile [0.25,0.5)), pin at 0.34 — same tile; pin limits upward motion
        let l = Layout::new(nl, vec![[0.3, 0.1], [0.9, 0.9]], GCellGrid::new(4, 4).unwrap()).unwrap();
        let b = l.feasible_box();
        assert!((b.upper[0][0] - 0.16).abs() < 1e-8);
        assert!((b.lower[0][0] + 0.05).abs() < 1e-8);
    }

    #[test]
    fn macros_are_pinned() {
        let cells = vec![
            Cell { width: 0.2, height: 0.2, is_macro: true },
            Cell { width: 0.0, height: 0.0, is_macro: false },
        ];
        let nl = Arc::new(Netlist::new(cells, vec![]).unwrap());
        let l = Layout::new(nl, vec![[0.1, 0.1], [0.6, 0.6]], GCellGrid::new(4, 4).unwrap()).unwrap();
        let b = l.feasible_box();
        assert_eq!((b.lower[0], b.upper[0]), ([0.0; 2], [0.0; 2]));
        assert!(!b.is_movable(0) && b.is_movable(1));
        let err = l.apply_perturbation(&[[0.01, 0.0], [0.0, 0.0]], None).unwrap_err();
        assert!(matches!(err, Error::InvalidPerturbation { ref cells, .. } if cells == &vec![0]));
    }

    #[test]
    fn apply_perturbation_identity_and_budget() {
        let l = single_cell(0.3, 0.6, 4, 4);
        assert_eq!(l.apply_perturbation(&[[0.0; 2]; 2], Some(0)).unwrap(), l);
        let d = [[0.1, -0.05], [0.1, 0.1]];
        assert!(l.apply_perturbation(&d, Some(1)).is_err());
        let moved = l.apply_perturbation(&d, Some(2)).unwrap();
        assert_eq!(moved.gcell_of(0).unwrap(), l.gcell_of(0).unwrap());
        assert_eq!(l.coords()[0], [0.3, 0.6]);
        // crossing into the next tile is rejected
        assert!(l.apply_perturbation(&[[0.2, 0.0], [0.0, 0.0]], None).is_err());
    }

    #[test]
    fn netlist_invariants_are_enforced() {
        let c = Cell { width: 0.0, height: 0.0, is_macro: false };
        let p = |cell| Pin { cell, offset_x: 0.0, offset_y: 0.0 };
        assert!(Netlist::new(vec![c, c], vec![vec![p(0)]]).is_err());
        assert!(Netlist::new(vec![c, c], vec![vec![p(0), p(2)]]).is_err());
        assert!(Netlist::new(vec![c, c], vec![vec![p(0), p(0)]]).is_err());
        assert!(Netlist::new(vec![c, c], vec![vec![p(0), p(1)]]).is_ok());
        assert!(GCellGrid::new(0, 3).is_err());
    }
}
