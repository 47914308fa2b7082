//! Tile-level routing stand-in.
//!
//! Each net is reduced to the set of tiles its pins occupy, decomposed into
//! a Manhattan MST, and every MST segment is routed as an even split over
//! its two L-shaped paths. Because only tile indices enter the computation,
//! moving cells inside their tiles cannot change the result.

use crate::layout::Layout;
use crate::tensor::Grid;

pub type Tile = (usize, usize);

/// Edge demand on the tile grid plus the normalized per-bin congestion.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandMap {
    /// `(W-1) x H`: edge between `(gx, gy)` and `(gx+1, gy)`.
    pub h_demand: Grid,
    /// `W x (H-1)`: edge between `(gx, gy)` and `(gx, gy+1)`.
    pub v_demand: Grid,
    pub bin_congestion: Grid,
    pub capacity: f64,
}

/// Raw edge demand before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDemand {
    pub w: usize,
    pub h: usize,
    pub h_demand: Vec<f64>,
    pub v_demand: Vec<f64>,
}

impl EdgeDemand {
    pub fn zeros(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            h_demand: vec![0.0; w.saturating_sub(1) * h],
            v_demand: vec![0.0; w * h.saturating_sub(1)],
        }
    }

    #[inline]
    fn add_h(&mut self, ex: usize, gy: usize, v: f64) {
        self.h_demand[ex * self.h + gy] += v;
    }

    #[inline]
    fn add_v(&mut self, gx: usize, ey: usize, v: f64) {
        self.v_demand[gx * (self.h - 1) + ey] += v;
    }

    pub fn total(&self) -> f64 {
        self.h_demand.iter().chain(&self.v_demand).sum()
    }

    /// All edge demands, horizontal first.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.h_demand.iter().chain(&self.v_demand).copied()
    }

    /// Mean demand over the edges incident to each bin.
    pub fn incident_mean(&self) -> Grid {
        let (w, h) = (self.w, self.h);
        Grid::from_fn(w, h, |gx, gy| {
            let mut sum = 0.0;
            let mut count = 0usize;
            if gx > 0 {
                sum += self.h_demand[(gx - 1) * h + gy];
                count += 1;
            }
            if gx + 1 < w {
                sum += self.h_demand[gx * h + gy];
                count += 1;
            }
            if gy > 0 {
                sum += self.v_demand[gx * (h - 1) + gy - 1];
                count += 1;
            }
            if gy + 1 < h {
                sum += self.v_demand[gx * (h - 1) + gy];
                count += 1;
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
    }
}

/// Distinct tiles holding the net's pins, in row-major `(gx, gy)` order.
pub fn pin_tiles(layout: &Layout, net: usize) -> Vec<Tile> {
    let grid = layout.grid();
    let mut tiles: Vec<Tile> = (0..layout.netlist().nets()[net].len())
        .map(|p| {
            let (x, y) = layout.pin_position(net, p);
            grid.tile_of(x, y)
        })
        .collect();
    tiles.sort_unstable();
    tiles.dedup();
    tiles
}

fn manhattan(a: Tile, b: Tile) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Prim's MST under Manhattan distance. `tiles` must be sorted and
/// distinct; the tree grows from `tiles[0]` and ties are broken by the
/// row-major order of the new tile, then of the tree tile.
pub fn decompose_net(tiles: &[Tile]) -> Vec<(Tile, Tile)> {
    let n = tiles.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    // best[j] = (distance to tree, index of the tree tile achieving it)
    let mut best = vec![(usize::MAX, 0usize); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (manhattan(tiles[0], tiles[j]), 0);
    }
    let mut segments = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<usize> = None;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            // indices ascend, so a strict `<` keeps the lowest j on ties
            match pick {
                Some(k) if best[j].0 >= best[k].0 => {}
                _ => pick = Some(j),
            }
        }
        let j = pick.expect("a tile outside the tree");
        in_tree[j] = true;
        segments.push((tiles[best[j].1], tiles[j]));
        for k in 0..n {
            if !in_tree[k] {
                let d = manhattan(tiles[j], tiles[k]);
                // a tie keeps the earlier (lower-index) tree tile
                if d < best[k].0 || (d == best[k].0 && j < best[k].1) {
                    best[k] = (d, j);
                }
            }
        }
    }
    segments
}

fn add_h_run(demand: &mut EdgeDemand, x0: usize, x1: usize, gy: usize, v: f64) {
    for ex in x0.min(x1)..x0.max(x1) {
        demand.add_h(ex, gy, v);
    }
}

fn add_v_run(demand: &mut EdgeDemand, gx: usize, y0: usize, y1: usize, v: f64) {
    for ey in y0.min(y1)..y0.max(y1) {
        demand.add_v(gx, ey, v);
    }
}

/// Adds one segment's demand: 1.0 along a straight run, otherwise 0.5 on
/// each of the horizontal-first and vertical-first L paths.
///
/// # Panics
/// If the endpoints coincide.
pub fn route_lshape(demand: &mut EdgeDemand, a: Tile, b: Tile) {
    assert_ne!(a, b, "zero-length segment");
    if a.1 == b.1 {
        add_h_run(demand, a.0, b.0, a.1, 1.0);
    } else if a.0 == b.0 {
        add_v_run(demand, a.0, a.1, b.1, 1.0);
    } else {
        add_h_run(demand, a.0, b.0, a.1, 0.5);
        add_v_run(demand, b.0, a.1, b.1, 0.5);
        add_v_run(demand, a.0, a.1, b.1, 0.5);
        add_h_run(demand, a.0, b.0, b.1, 0.5);
    }
}

/// Routes every net, in net-index order.
pub fn edge_demand(layout: &Layout) -> EdgeDemand {
    let grid = layout.grid();
    let mut demand = EdgeDemand::zeros(grid.w(), grid.h());
    for e in 0..layout.netlist().nets().len() {
        let tiles = pin_tiles(layout, e);
        for (a, b) in decompose_net(&tiles) {
            route_lshape(&mut demand, a, b);
        }
    }
    demand
}

pub fn demand_map(layout: &Layout, capacity: f64) -> DemandMap {
    assert!(capacity > 0.0, "capacity must be positive");
    let demand = edge_demand(layout);
    let (w, h) = (demand.w, demand.h);
    let bin_congestion = demand.incident_mean().scaled(1.0 / capacity);
    let bin_congestion = Grid::from_vec(w, h, bin_congestion.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .expect("grid-sized");
    DemandMap {
        h_demand: Grid::from_vec(w.saturating_sub(1), h, demand.h_demand).expect("edge grid"),
        v_demand: Grid::from_vec(w, h.saturating_sub(1), demand.v_demand).expect("edge grid"),
        bin_congestion,
        capacity,
    }
}

/// Capacity at the given quantile (0..=1) of all edge demands across the
/// layouts; falls back to 1.0 when that quantile is zero.
pub fn capacity_quantile<'a>(layouts: impl IntoIterator<Item = &'a Layout>, q: f64) -> f64 {
    let mut all: Vec<f64> = layouts.into_iter().flat_map(|l| edge_demand(l).values().collect::<Vec<_>>()).collect();
    if all.is_empty() {
        return 1.0;
    }
    all.sort_by(f64::total_cmp);
    let rank = ((all.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    let c = all[rank];
    if c > 0.0 {
        c
    } else {
        1.0
    }
}

/// Quantile used for the default capacity.
pub const DEFAULT_CAPACITY_QUANTILE: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceReport {
    /// Every net's pin tiles are unchanged and no cell changed tile.
    pub identical: bool,
    /// Raw edge demands compare equal bit for bit.
    pub demand_identical: bool,
    pub moved_tiles: usize,
    /// Cells whose tile changed.
    pub moved_cells: Vec<usize>,
    pub changed_nets: Vec<usize>,
}

/// Compares two placements of the same netlist at tile granularity.
///
/// # Panics
/// If the layouts do not share netlist size and grid.
pub fn invariance_check(a: &Layout, b: &Layout) -> InvarianceReport {
    assert_eq!(a.n_cells(), b.n_cells(), "layouts must share a netlist");
    assert_eq!(a.grid(), b.grid(), "layouts must share a grid");
    assert_eq!(a.netlist().nets().len(), b.netlist().nets().len(), "layouts must share a netlist");
    let grid = a.grid();
    let moved_cells: Vec<usize> = (0..a.n_cells())
        .filter(|&i| {
            let (p, q) = (a.coords()[i], b.coords()[i]);
            grid.tile_of(p[0], p[1]) != grid.tile_of(q[0], q[1])
        })
        .collect();
    let changed_nets: Vec<usize> =
        (0..a.netlist().nets().len()).filter(|&e| pin_tiles(a, e) != pin_tiles(b, e)).collect();
    let da = edge_demand(a);
    let db = edge_demand(b);
    let demand_identical = da.values().zip(db.values()).all(|(x, y)| x.to_bits() == y.to_bits());
    InvarianceReport {
        identical: moved_cells.is_empty() && changed_nets.is_empty(),
        demand_identical,
        moved_tiles: moved_cells.len(),
        moved_cells,
        changed_nets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Cell, GCellGrid, Netlist, Pin};
    use std::sync::Arc;

    fn layout(pts: &[[f64; 2]], nets: Vec<Vec<usize>>, w: usize, h: usize) -> Layout {
        let cells = vec![Cell { width: 0.0, height: 0.0, is_macro: false }; pts.len()];
        let nets = nets
            .into_iter()
            .map(|n| n.into_iter().map(|c| Pin { cell: c, offset_x: 0.0, offset_y: 0.0 }).collect())
            .collect();
        Layout::new(Arc::new(Netlist::new(cells, nets).unwrap()), pts.to_vec(), GCellGrid::new(w, h).unwrap())
            .unwrap()
    }

    #[test]
    fn pin_tiles_examples() {
        let l = layout(&[[0.1, 0.1], [0.2, 0.2]], vec![vec![0, 1]], 4, 4);
        assert_eq!(pin_tiles(&l, 0), vec![(0, 0)]);
        assert!(decompose_net(&pin_tiles(&l, 0)).is_empty());
        assert_eq!(edge_demand(&l).total(), 0.0);

        let l = layout(&[[0.6, 0.1], [0.1, 0.1]], vec![vec![0, 1]], 4, 4);
        assert_eq!(pin_tiles(&l, 0), vec![(0, 0), (2, 0)]);

        let pts = [[0.1, 0.1], [0.2, 0.1], [0.9, 0.9], [0.15, 0.2], [0.95, 0.8]];
        let l = layout(&pts, vec![vec![0, 1, 2, 3, 4]], 4, 4);
        assert_eq!(pin_tiles(&l, 0).len(), 2);
    }

    #[test]
    fn mst_examples() {
        assert!(decompose_net(&[(1, 1)]).is_empty());
        assert_eq!(decompose_net(&[(0, 0), (2, 3)]), vec![((0, 0), (2, 3))]);
        assert_eq!(
            decompose_net(&[(0, 0), (1, 0), (3, 0)]),
            vec![((0, 0), (1, 0)), ((1, 0), (3, 0))]
        );
    }

    #[test]
    fn mst_is_minimal_against_enumeration() {
        // Brute force over all spanning trees of 4 tiles via Prüfer sequences.
        let tiles = [(0, 0), (1, 3), (2, 1), (3, 3)];
        let mut best = usize::MAX;
        for a in 0..4 {
            for b in 0..4 {
                let mut degree = [1usize; 4];
                degree[a] += 1;
                degree[b] += 1;
                let mut weight = 0;
                for &v in &[a, b] {
                    let leaf = (0..4).find(|&i| degree[i] == 1).unwrap();
                    weight += manhattan(tiles[leaf], tiles[v]);
                    degree[leaf] -= 1;
                    degree[v] -= 1;
                }
                let rest: Vec<usize> = (0..4).filter(|&i| degree[i] == 1).collect();
                weight += manhattan(tiles[rest[0]], tiles[rest[1]]);
                best = best.min(weight);
            }
        }
        let mst: usize = decompose_net(&tiles).iter().map(|&(a, b)| manhattan(a, b)).sum();
        assert_eq!(mst, best);
    }

    #[test]
    fn straight_segment() {
        let mut d = EdgeDemand::zeros(4, 4);
        route_lshape(&mut d, (0, 0), (2, 0));
        assert_eq!(d.h_demand[0], 1.0);
        assert_eq!(d.h_demand[4], 1.0);
        assert_eq!(d.total(), 2.0);
    }

    #[test]
    fn diagonal_segment_splits() {
        let mut d = EdgeDemand::zeros(2, 2);
        route_lshape(&mut d, (0, 0), (1, 1));
        assert_eq!(d.h_demand, vec![0.5, 0.5]);
        assert_eq!(d.v_demand, vec![0.5, 0.5]);
    }

    #[test]
    #[should_panic(expected = "zero-length")]
    fn zero_length_segment_rejected() {
        let mut d = EdgeDemand::zeros(2, 2);
        route_lshape(&mut d, (1, 1), (1, 1));
    }

    #[test]
    fn empty_and_single_row() {
        let l = layout(&[[0.1, 0.1], [0.9, 0.9]], vec![], 4, 4);
        assert!(demand_map(&l, 1.0).bin_congestion.data().iter().all(|v| *v == 0.0));

        let l = layout(&[[0.1, 0.6], [0.9, 0.6]], vec![vec![0, 1]], 4, 4);
        let d = demand_map(&l, 1.0);
        for gx in 0..3 {
            for gy in 0..4 {
                assert_eq!(d.h_demand.get(gx, gy) != 0.0, gy == 2);
            }
        }
        assert!(d.v_demand.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wirelength_conservation() {
        let pts = [[0.05, 0.05], [0.9, 0.3], [0.4, 0.95], [0.6, 0.6]];
        let l = layout(&pts, vec![vec![0, 1, 2], vec![1, 3], vec![0, 3]], 8, 8);
        let expected: usize = (0..3)
            .flat_map(|e| decompose_net(&pin_tiles(&l, e)))
            .map(|(a, b)| manhattan(a, b))
            .sum();
        assert!((edge_demand(&l).total() - expected as f64).abs() < 1e-12);
    }

    #[test]
    fn invariance_examples() {
        let l = layout(&[[0.1, 0.1], [0.6, 0.6]], vec![vec![0, 1]], 4, 4);
        let r = invariance_check(&l, &l);
        assert!(r.identical && r.demand_identical && r.moved_tiles == 0);

        let moved = l.with_coords(vec![[0.3, 0.1], [0.6, 0.6]]).unwrap();
        let r = invariance_check(&l, &moved);
        assert!(!r.identical);
        assert_eq!(r.moved_tiles, 1);
        assert_eq!(r.moved_cells, vec![0]);
        assert!(!r.demand_identical);

        let inside = l.with_coords(vec![[0.2, 0.05], [0.7, 0.74]]).unwrap();
        assert!(invariance_check(&l, &inside).identical);
    }
}
