//! Seeded synthetic placements with clustered cells and spatially local
//! nets, so that routing demand forms genuine hotspots.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{Cell, GCellGrid, Layout, Netlist, Pin};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroSpec {
    pub count: usize,
    /// Side lengths are drawn uniformly from `[min_size, max_size]`.
    pub min_size: f64,
    pub max_size: f64,
}

impl Default for MacroSpec {
    fn default() -> Self {
        Self { count: 2, min_size: 0.08, max_size: 0.16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_cells: usize,
    pub n_nets: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub macros: MacroSpec,
    /// Number of Gaussian placement clusters.
    pub clusters: usize,
    /// Fraction of standard cells drawn from clusters rather than uniformly.
    pub cluster_fraction: f64,
    /// Multiplies the per-cluster standard deviation.
    pub cluster_scale: f64,
    /// Relative weights of net degrees 2, 3, 4, ...
    pub degree_weights: Vec<f64>,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_cells: 2000,
            n_nets: 3000,
            grid_w: 32,
            grid_h: 32,
            macros: MacroSpec::default(),
            clusters: 5,
            cluster_fraction: 0.6,
            cluster_scale: 1.0,
            degree_weights: vec![0.45, 0.25, 0.13, 0.09, 0.08],
        }
    }
}

const MACRO_ATTEMPTS: usize = 2000;
const CELL_ATTEMPTS: usize = 200;
/// Net "reach" in buckets, with weights; most nets stay within a few tiles.
const REACH: [(usize, f64); 5] = [(0, 0.15), (1, 0.45), (2, 0.25), (3, 0.10), (6, 0.05)];

struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

pub fn synth_layout(params: &SynthParams) -> Result<Layout> {
    let SynthParams { seed, n_cells, n_nets, grid_w, grid_h, .. } = *params;
    if n_cells < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 cells, got {n_cells}")));
    }
    if params.macros.count >= n_cells {
        return Err(Error::InvalidConfig("macro count must leave room for standard cells".into()));
    }
    if params.degree_weights.is_empty() || params.degree_weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidConfig("degree weights must be non-negative".into()));
    }
    let m = params.macros;
    if m.count > 0 && !(0.0 < m.min_size && m.min_size <= m.max_size && m.max_size < 1.0) {
        return Err(Error::InvalidConfig(format!("bad macro size range [{}, {}]", m.min_size, m.max_size)));
    }
    let grid = GCellGrid::new(grid_w, grid_h)?;
    let mut rng = rng::derive(seed, rng::purpose::SYNTH, 0);

    let mut cells = Vec::with_capacity(n_cells);
    let mut coords = Vec::with_capacity(n_cells);
    let mut blocked: Vec<Rect> = Vec::new();

    // Macros first.
    for _ in 0..m.count {
        let mut placed = false;
        for _ in 0..MACRO_ATTEMPTS {
            let w = rng.gen_range(m.min_size..=m.max_size);
            let h = rng.gen_range(m.min_size..=m.max_size);
            let x = rng.gen_range(0.0..=1.0 - w);
            let y = rng.gen_range(0.0..=1.0 - h);
            let r = Rect { x0: x, y0: y, x1: x + w, y1: y + h };
            if blocked.iter().any(|b| b.overlaps(&r)) {
                continue;
            }
            blocked.push(r);
            cells.push(Cell { width: w, height: h, is_macro: true });
            coords.push([x, y]);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::MacroPacking { attempts: MACRO_ATTEMPTS });
        }
    }

    // Standard cells: a mixture of Gaussian clusters and uniform fill.
    let pitch = grid.pitch_x().min(grid.pitch_y());
    let centers: Vec<([f64; 2], f64)> = (0..params.clusters.max(1))
        .map(|_| {
            let c = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
            let sigma = rng.gen_range(0.03..0.08) * params.cluster_scale;
            (c, sigma)
        })
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in m.count..n_cells {
        let w = rng.gen_range(0.05..0.25) * pitch;
        let h = 0.1 * pitch;
        let clustered = rng.gen_bool(params.cluster_fraction.clamp(0.0, 1.0));
        let mut spot = None;
        for attempt in 0..CELL_ATTEMPTS {
            let (x, y) = if clustered && attempt < CELL_ATTEMPTS / 2 {
                let (c, s) = centers[rng.gen_range(0..centers.len())];
                (c[0] + s * unit.sample(&mut rng), c[1] + s * unit.sample(&mut rng))
            } else {
                (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))
            };
            if !(0.0..=1.0 - w).contains(&x) || !(0.0..=1.0 - h).contains(&y) {
                continue;
            }
            let r = Rect { x0: x, y0: y, x1: x + w, y1: y + h };
            if blocked.iter().any(|b| b.overlaps(&r)) {
                continue;
            }
            spot = Some([x, y]);
            break;
        }
        let spot = spot.ok_or(Error::MacroPacking { attempts: CELL_ATTEMPTS })?;
        cells.push(Cell { width: w, height: h, is_macro: false });
        coords.push(spot);
    }

    // Spatial buckets, one per tile, cells in index order.
    let (bw, bh) = (grid.w(), grid.h());
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bw * bh];
    let mut bucket_of = Vec::with_capacity(n_cells);
    for (i, c) in coords.iter().enumerate() {
        let (gx, gy) = grid.tile_of(c[0] + 0.5 * cells[i].width, c[1] + 0.5 * cells[i].height);
        buckets[gx * bh + gy].push(i);
        bucket_of.push((gx, gy));
    }

    let degrees = WeightedIndex::new(&params.degree_weights)
        .map_err(|e| Error::InvalidConfig(format!("degree weights: {e}")))?;
    let reach = WeightedIndex::new(REACH.iter().map(|r| r.1)).expect("static weights");
    let std_cells = n_cells - m.count;
    let mut nets = Vec::with_capacity(n_nets);
    let mut candidates = Vec::new();
    for _ in 0..n_nets {
        let driver = if m.count > 0 && rng.gen_bool(0.02) {
            rng.gen_range(0..m.count)
        } else {
            m.count + rng.gen_range(0..std_cells)
        };
        let degree = (2 + degrees.sample(&mut rng)).min(n_cells);
        let mut radius = REACH[reach.sample(&mut rng)].0;
        let (dx, dy) = bucket_of[driver];
        loop {
            candidates.clear();
            let x0 = dx.saturating_sub(radius);
            let x1 = (dx + radius).min(bw - 1);
            let y0 = dy.saturating_sub(radius);
            let y1 = (dy + radius).min(bh - 1);
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    candidates.extend(buckets[gx * bh + gy].iter().copied().filter(|&c| c != driver));
                }
            }
            if candidates.len() >= degree - 1 || (x0 == 0 && y0 == 0 && x1 == bw - 1 && y1 == bh - 1) {
                break;
            }
            radius += 1;
        }
        let (sinks, _) = candidates.partial_shuffle(&mut rng, degree - 1);
        let mut members = Vec::with_capacity(degree);
        members.push(driver);
        members.extend_from_slice(sinks);
        let net: Vec<Pin> = members
            .into_iter()
            .map(|cell| {
                let c = cells[cell];
                Pin { cell, offset_x: rng.gen_range(0.0..=c.width), offset_y: rng.gen_range(0.0..=c.height) }
            })
            .collect();
        nets.push(net);
    }

    let netlist = Netlist::new(cells, nets)?;
    Layout::new(Arc::new(netlist), coords, grid)
}
