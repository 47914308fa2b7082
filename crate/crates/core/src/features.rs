//! Feature maps fed to the predictors, and their adjoint with respect to
//! cell coordinates.
//!
//! Channels, one bin per G-Cell:
//! - RUDY: each net spreads density `1/max(span_x, pitch_x) + 1/max(span_y, pitch_y)`
//!   over its bounding box, weighted by the fraction of each tile the box covers.
//! - PinRUDY: every pin deposits its net's density into the tile holding it.
//! - MacroRegion: fraction of each tile covered by macro rectangles.
//!
//! Fractional coverage makes RUDY piecewise-linear in the bounding-box edges,
//! which is what lets [`feature_vjp`] push predictor gradients back onto cell
//! positions.

use serde::{Deserialize, Serialize};

use crate::layout::{GCellGrid, Layout};
use crate::tensor::{write_ten, Grid};
use crate::error::Result;

/// Divisors applied to the raw channels before they reach a predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelScale {
    pub rudy: f64,
    pub pin_rudy: f64,
    pub macro_region: f64,
}

impl ChannelScale {
    pub const UNIT: ChannelScale = ChannelScale { rudy: 1.0, pin_rudy: 1.0, macro_region: 1.0 };

    /// Default divisors: 8 for RUDY and 16 for PinRUDY, with densities
    /// measured in tile-pitch units (a net spanning one tile each way has
    /// density 2), so they scale with the grid resolution.
    pub fn for_grid(grid: GCellGrid) -> ChannelScale {
        let per_pitch = 0.5 * (grid.w() + grid.h()) as f64;
        ChannelScale { rudy: 8.0 * per_pitch, pin_rudy: 16.0 * per_pitch, macro_region: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub rudy: Grid,
    pub pin_rudy: Grid,
    pub macro_region: Grid,
}

impl FeatureMap {
    pub fn w(&self) -> usize {
        self.rudy.w()
    }

    pub fn h(&self) -> usize {
        self.rudy.h()
    }

    pub fn channels(&self) -> [&Grid; 3] {
        [&self.rudy, &self.pin_rudy, &self.macro_region]
    }

    /// Channel-major copy: `data[c * W * H + gx * H + gy]`.
    pub fn to_chw(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.rudy.data().len());
        for ch in self.channels() {
            out.extend_from_slice(ch.data());
        }
        out
    }

    pub fn from_chw(w: usize, h: usize, data: &[f64]) -> Result<FeatureMap> {
        let plane = w * h;
        let grid = |c: usize| Grid::from_vec(w, h, data.get(c * plane..(c + 1) * plane).unwrap_or(&[]).to_vec());
        Ok(FeatureMap { rudy: grid(0)?, pin_rudy: grid(1)?, macro_region: grid(2)? })
    }

    /// Writes the `W x H x 3` stack in `TEN` layout (channel fastest).
    pub fn write_ten(&self, out: impl std::io::Write) -> Result<()> {
        let mut data = Vec::with_capacity(3 * self.rudy.data().len());
        for i in 0..self.rudy.data().len() {
            for ch in self.channels() {
                data.push(ch.data()[i]);
            }
        }
        write_ten(out, [self.w(), self.h(), 3], &data)
    }
}

/// Bounding box of a net's pins. The `arg_*` fields are pin indices within
/// the net; ties go to the lowest pin index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetBBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub arg_x_min: usize,
    pub arg_x_max: usize,
    pub arg_y_min: usize,
    pub arg_y_max: usize,
}

impl NetBBox {
    pub fn span_x(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn span_y(&self) -> f64 {
        self.y_max - self.y_min
    }
}

pub fn net_bbox(layout: &Layout, net: usize) -> NetBBox {
    let (x0, y0) = layout.pin_position(net, 0);
    let mut b = NetBBox {
        x_min: x0,
        x_max: x0,
        y_min: y0,
        y_max: y0,
        arg_x_min: 0,
        arg_x_max: 0,
        arg_y_min: 0,
        arg_y_max: 0,
    };
    for p in 1..layout.netlist().nets()[net].len() {
        let (x, y) = layout.pin_position(net, p);
        if x < b.x_min {
            b.x_min = x;
            b.arg_x_min = p;
        }
        if x > b.x_max {
            b.x_max = x;
            b.arg_x_max = p;
        }
        if y < b.y_min {
            b.y_min = y;
            b.arg_y_min = p;
        }
        if y > b.y_max {
            b.y_max = y;
            b.arg_y_max = p;
        }
    }
    b
}

/// Net wire density with spans floored at the tile pitch.
fn density(b: &NetBBox, grid: GCellGrid) -> f64 {
    1.0 / b.span_x().max(grid.pitch_x()) + 1.0 / b.span_y().max(grid.pitch_y())
}

/// Per-tile overlap lengths of `[lo, hi]` along one axis, starting at the
/// tile holding `lo`.
struct Overlap {
    first: usize,
    lens: Vec<f64>,
}

fn overlap(lo: f64, hi: f64, count: usize) -> Overlap {
    let first = GCellGrid::tile_index(lo, count);
    let last = GCellGrid::tile_index(hi, count);
    let lens = (first..=last)
        .map(|t| {
            let (a, b) = GCellGrid::tile_bounds(t, count);
            (hi.min(b) - lo.max(a)).max(0.0)
        })
        .collect();
    Overlap { first, lens }
}

pub fn rudy_map(layout: &Layout) -> Grid {
    let grid = layout.grid();
    let mut out = Grid::zeros(grid.w(), grid.h());
    let inv_area = (grid.w() * grid.h()) as f64;
    for e in 0..layout.netlist().nets().len() {
        let b = net_bbox(layout, e);
        let d = density(&b, grid) * inv_area;
        let ox = overlap(b.x_min, b.x_max, grid.w());
        let oy = overlap(b.y_min, b.y_max, grid.h());
        for (i, lx) in ox.lens.iter().enumerate() {
            if *lx == 0.0 {
                continue;
            }
            for (j, ly) in oy.lens.iter().enumerate() {
                out.add(ox.first + i, oy.first + j, d * lx * ly);
            }
        }
    }
    out
}

pub fn pinrudy_map(layout: &Layout) -> Grid {
    let grid = layout.grid();
    let mut out = Grid::zeros(grid.w(), grid.h());
    for (e, net) in layout.netlist().nets().iter().enumerate() {
        let d = density(&net_bbox(layout, e), grid);
        for p in 0..net.len() {
            let (x, y) = layout.pin_position(e, p);
            let (gx, gy) = grid.tile_of(x, y);
            out.add(gx, gy, d);
        }
    }
    out
}

/// Area of the union of axis-aligned rectangles `[x0, x1] x [y0, y1]`.
fn union_area(rects: &[[f64; 4]]) -> f64 {
    match rects.len() {
        0 => 0.0,
        1 => (rects[0][1] - rects[0][0]) * (rects[0][3] - rects[0][2]),
        _ => {
            let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r[0], r[1]]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut area = 0.0;
            for win in xs.windows(2) {
                let (a, b) = (win[0], win[1]);
                let mut spans: Vec<(f64, f64)> =
                    rects.iter().filter(|r| r[0] <= a && b <= r[1]).map(|r| (r[2], r[3])).collect();
                spans.sort_by(|p, q| p.0.total_cmp(&q.0));
                let mut covered = 0.0;
                let mut cur: Option<(f64, f64)> = None;
                for (s, t) in spans {
                    cur = match cur {
                        Some((cs, ct)) if s <= ct => Some((cs, ct.max(t))),
                        Some((cs, ct)) => {
                            covered += ct - cs;
                            Some((s, t))
                        }
                        None => Some((s, t)),
                    };
                }
                if let Some((cs, ct)) = cur {
                    covered += ct - cs;
                }
                area += (b - a) * covered;
            }
            area
        }
    }
}

pub fn macro_map(layout: &Layout) -> Grid {
    let grid = layout.grid();
    let (w, h) = (grid.w(), grid.h());
    let mut per_tile: Vec<Vec<[f64; 4]>> = vec![Vec::new(); w * h];
    for (i, c) in layout.netlist().cells().iter().enumerate() {
        if !c.is_macro {
            continue;
        }
        let [x, y] = layout.coords()[i];
        let (x1, y1) = ((x + c.width).min(1.0), (y + c.height).min(1.0));
        if x1 <= x || y1 <= y {
            continue;
        }
        for gx in GCellGrid::tile_index(x, w)..=GCellGrid::tile_index(x1, w) {
            let (tx0, tx1) = GCellGrid::tile_bounds(gx, w);
            let (cx0, cx1) = (x.max(tx0), x1.min(tx1));
            if cx1 <= cx0 {
                continue;
            }
            for gy in GCellGrid::tile_index(y, h)..=GCellGrid::tile_index(y1, h) {
                let (ty0, ty1) = GCellGrid::tile_bounds(gy, h);
                let (cy0, cy1) = (y.max(ty0), y1.min(ty1));
                if cy1 > cy0 {
                    per_tile[gx * h + gy].push([cx0, cx1, cy0, cy1]);
                }
            }
        }
    }
    let tile_area = grid.pitch_x() * grid.pitch_y();
    let data = per_tile.iter().map(|r| (union_area(r) / tile_area).clamp(0.0, 1.0)).collect();
    Grid::from_vec(w, h, data).expect("grid-sized")
}

pub fn feature_map(layout: &Layout, scale: &ChannelScale) -> FeatureMap {
    FeatureMap {
        rudy: rudy_map(layout).scaled(1.0 / scale.rudy),
        pin_rudy: pinrudy_map(layout).scaled(1.0 / scale.pin_rudy),
        macro_region: macro_map(layout).scaled(1.0 / scale.macro_region),
    }
}

/// Vector-Jacobian product of [`feature_map`] with respect to cell
/// coordinates: returns `d<gbar, M(X)>/dX` as one `[dx, dy]` row per cell.
///
/// Only the extremal pins recorded in each [`NetBBox`] carry gradient; at
/// tile edges the right-sided derivative is used. MacroRegion contributes
/// nothing since macros never move.
pub fn feature_vjp(layout: &Layout, gbar: [&Grid; 3], scale: &ChannelScale) -> Vec<[f64; 2]> {
    let grid = layout.grid();
    let (w, h) = (grid.w(), grid.h());
    let (px, py) = (grid.pitch_x(), grid.pitch_y());
    let inv_area = (w * h) as f64;
    let g_rudy = gbar[0].scaled(1.0 / scale.rudy);
    let g_pin = gbar[1].scaled(1.0 / scale.pin_rudy);
    let mut grad = vec![[0.0; 2]; layout.n_cells()];
    let nets = layout.netlist().nets();
    let mut t_col = Vec::new();
    let mut u_row = Vec::new();
    for (e, net) in nets.iter().enumerate() {
        let b = net_bbox(layout, e);
        let (sx, sy) = (b.span_x(), b.span_y());
        let d = density(&b, grid);

        // <g_pin, P_e> = d * sum of g_pin over the pins' tiles
        let mut dd: f64 = 0.0;
        for p in 0..net.len() {
            let (x, y) = layout.pin_position(e, p);
            let (gx, gy) = grid.tile_of(x, y);
            dd += g_pin.get(gx, gy);
        }

        // RUDY: R_e(gx, gy) = d * ox(gx) * oy(gy) / tile_area
        let ox = overlap(b.x_min, b.x_max, w);
        let oy = overlap(b.y_min, b.y_max, h);
        t_col.clear();
        t_col.resize(ox.lens.len(), 0.0);
        u_row.clear();
        u_row.resize(oy.lens.len(), 0.0);
        let mut q = 0.0;
        for (i, lx) in ox.lens.iter().enumerate() {
            for (j, ly) in oy.lens.iter().enumerate() {
                let g = g_rudy.get(ox.first + i, oy.first + j);
                t_col[i] += g * ly;
                u_row[j] += g * lx;
            }
            q += lx * t_col[i];
        }
        let rudy_scale = d * inv_area;
        dd += q * inv_area;

        // Overlap lengths: only the first tile moves with the lower edge and
        // only the last tile moves with the upper edge.
        let mut g_xmin = -rudy_scale * t_col[0];
        let mut g_xmax = rudy_scale * t_col[t_col.len() - 1];
        let mut g_ymin = -rudy_scale * u_row[0];
        let mut g_ymax = rudy_scale * u_row[u_row.len() - 1];

        // Density terms are flat where the span is floored at the pitch.
        if sx > px {
            let k = dd / (sx * sx);
            g_xmin += k;
            g_xmax -= k;
        }
        if sy > py {
            let k = dd / (sy * sy);
            g_ymin += k;
            g_ymax -= k;
        }

        grad[net[b.arg_x_min].cell][0] += g_xmin;
        grad[net[b.arg_x_max].cell][0] += g_xmax;
        grad[net[b.arg_y_min].cell][1] += g_ymin;
        grad[net[b.arg_y_max].cell][1] += g_ymax;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Cell, Netlist, Pin};
    use std::sync::Arc;

    fn point_cells(pts: &[[f64; 2]]) -> Vec<Cell> {
        vec![Cell { width: 0.0, height: 0.0, is_macro: false }; pts.len()]
    }

    fn layout(pts: &[[f64; 2]], nets: Vec<Vec<usize>>, w: usize, h: usize) -> Layout {
        let nets = nets
            .into_iter()
            .map(|n| n.into_iter().map(|c| Pin { cell: c, offset_x: 0.0, offset_y: 0.0 }).collect())
            .collect();
        let nl = Netlist::new(point_cells(pts), nets).unwrap();
        Layout::new(Arc::new(nl), pts.to_vec(), GCellGrid::new(w, h).unwrap()).unwrap()
    }

    #[test]
    fn bbox_examples() {
        let l = layout(&[[0.1, 0.2], [0.4, 0.9]], vec![vec![0, 1]], 4, 4);
        let b = net_bbox(&l, 0);
        assert_eq!((b.x_min, b.x_max, b.y_min, b.y_max), (0.1, 0.4, 0.2, 0.9));

        let l = layout(&[[0.3, 0.3], [0.3, 0.3]], vec![vec![0, 1]], 4, 4);
        let b = net_bbox(&l, 0);
        assert_eq!((b.arg_x_min, b.arg_x_max, b.arg_y_min, b.arg_y_max), (0, 0, 0, 0));
        assert_eq!(b.span_x(), 0.0);

        let l = layout(&[[0.2, 0.5], [0.2, 0.1], [0.7, 0.5]], vec![vec![0, 1, 2]], 4, 4);
        let b = net_bbox(&l, 0);
        assert_eq!(b.arg_x_min, 0);
        assert_eq!(b.arg_x_max, 2);
        assert_eq!(b.arg_y_min, 1);
        assert_eq!(b.arg_y_max, 0);
    }

    #[test]
    fn rudy_quarter_box_on_2x2() {
        let l = layout(&[[0.0, 0.0], [0.5, 0.5]], vec![vec![0, 1]], 2, 2);
        let r = rudy_map(&l);
        assert_eq!(r.data(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rudy_full_box_is_two_everywhere() {
        for (w, h) in [(1, 1), (3, 5), (8, 8)] {
            let l = layout(&[[0.0, 0.0], [1.0, 1.0]], vec![vec![0, 1]], w, h);
            assert!(rudy_map(&l).data().iter().all(|v| (v - 2.0).abs() < 1e-12), "{w}x{h}");
        }
    }

    #[test]
    fn empty_netlist_gives_zero_maps() {
        let l = layout(&[[0.1, 0.1], [0.9, 0.9]], vec![], 4, 4);
        assert!(rudy_map(&l).data().iter().all(|v| *v == 0.0));
        assert!(pinrudy_map(&l).data().iter().all(|v| *v == 0.0));
        assert!(macro_map(&l).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pinrudy_examples() {
        let l = layout(&[[0.0, 0.0], [0.4999, 0.4999]], vec![vec![0, 1]], 2, 2);
        let p = pinrudy_map(&l);
        // spans below the pitch are floored at 0.5: d = 2 + 2
        assert_eq!(p.data(), &[8.0, 0.0, 0.0, 0.0]);

        let l = layout(&[[0.1, 0.1], [0.9, 0.9]], vec![vec![0, 1]], 2, 2);
        let p = pinrudy_map(&l);
        let d = 2.0 / 0.8;
        assert!((p.get(0, 0) - d).abs() < 1e-12 && (p.get(1, 1) - d).abs() < 1e-12);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn macro_coverage() {
        let cells = vec![
            Cell { width: 0.25, height: 0.25, is_macro: true },
            Cell { width: 0.125, height: 0.25, is_macro: true },
        ];
        let nl = Netlist::new(cells, vec![]).unwrap();
        let l = Layout::new(Arc::new(nl), vec![[0.25, 0.25], [0.5, 0.0]], GCellGrid::new(4, 4).unwrap()).unwrap();
        let m = macro_map(&l);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(2, 0), 0.5);
        let total: f64 = m.data().iter().sum();
        assert!((total - 1.5).abs() < 1e-12);
    }

    #[test]
    fn overlapping_macros_count_once() {
        let cells = vec![
            Cell { width: 0.5, height: 0.5, is_macro: true },
            Cell { width: 0.5, height: 0.5, is_macro: true },
        ];
        let nl = Netlist::new(cells, vec![]).unwrap();
        let l = Layout::new(Arc::new(nl), vec![[0.0, 0.0], [0.25, 0.0]], GCellGrid::new(1, 1).unwrap()).unwrap();
        assert!((macro_map(&l).get(0, 0) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn vjp_of_zero_is_zero() {
        let l = layout(&[[0.1, 0.2], [0.6, 0.7], [0.3, 0.9]], vec![vec![0, 1, 2]], 4, 4);
        let z = Grid::zeros(4, 4);
        let g = feature_vjp(&l, [&z, &z, &z], &ChannelScale::UNIT);
        assert!(g.iter().all(|r| *r == [0.0, 0.0]));
    }

    #[test]
    fn clamped_density_is_flat() {
        // span_x = 0.1 < pitch 0.25: the x density term has no gradient; only
        // PinRUDY is non-zero in gbar, so the x gradient must vanish.
        let l = layout(&[[0.1, 0.1], [0.2, 0.9]], vec![vec![0, 1]], 4, 4);
        let z = Grid::zeros(4, 4);
        let ones = Grid::filled(4, 4, 1.0);
        let g = feature_vjp(&l, [&z, &ones, &z], &ChannelScale::UNIT);
        assert_eq!(g[0][0], 0.0);
        assert_eq!(g[1][0], 0.0);
        assert!(g[0][1] != 0.0);
    }
}
