//! Single-layer graph convolution over the star-expanded netlist.
//!
//! Every cell and every net is a node; each net's star node links to the
//! distinct cells it touches. With `A_hat = D^-1/2 (A + I) D^-1/2`:
//!
//! ```text
//! H = ReLU(A_hat X W1 + b1)      z = H w2 + b2      p = sigmoid(z)
//! ```
//!
//! Only cell rows are read out. A bin's prediction is the mean of `p` over
//! the cells whose origin lies in it; bins with no cell read 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{clamp_logit, sigmoid, sigmoid_grad, Parameters};
use crate::features::net_bbox;
use crate::layout::Layout;
use crate::tensor::{Grid, Tensor};

pub const NODE_FEATURES: usize = 4;
pub const HIDDEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    /// `[NODE_FEATURES][HIDDEN]`
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl GcnParams {
    pub fn zeros() -> Self {
        Self {
            w1: Tensor::zeros(&[NODE_FEATURES, HIDDEN]),
            b1: Tensor::zeros(&[HIDDEN]),
            w2: Tensor::zeros(&[HIDDEN]),
            b2: Tensor::zeros(&[1]),
        }
    }

    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros();
        let b = (6.0 / NODE_FEATURES as f64).sqrt();
        for v in p.w1.data_mut() {
            *v = rng.gen_range(-b..b);
        }
        let b = (6.0 / HIDDEN as f64).sqrt();
        for v in p.w2.data_mut() {
            *v = rng.gen_range(-b..b);
        }
        p
    }

    pub fn expected_shapes() -> Vec<(String, Vec<usize>)> {
        GcnParams::zeros().tensors().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect()
    }
}

impl Parameters for GcnParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("gc.weight".into(), &self.w1),
            ("gc.bias".into(), &self.b1),
            ("readout.weight".into(), &self.w2),
            ("readout.bias".into(), &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Star graph of a netlist: which distinct cells each net touches, with
/// normalized degrees.
struct Star {
    net_cells: Vec<Vec<usize>>,
    cell_nets: Vec<Vec<usize>>,
    cell_deg: Vec<f64>,
    net_deg: Vec<f64>,
}

impl Star {
    fn of(layout: &Layout) -> Self {
        let nl = layout.netlist();
        let mut cell_nets = vec![Vec::new(); nl.n_cells()];
        let net_cells: Vec<Vec<usize>> = nl
            .nets()
            .iter()
            .enumerate()
            .map(|(e, pins)| {
                let mut cs: Vec<usize> = pins.iter().map(|p| p.cell).collect();
                cs.sort_unstable();
                cs.dedup();
                for &c in &cs {
                    cell_nets[c].push(e);
                }
                cs
            })
            .collect();
        let cell_deg = cell_nets.iter().map(|v| 1.0 + v.len() as f64).collect();
        let net_deg = net_cells.iter().map(|v| 1.0 + v.len() as f64).collect();
        Star { net_cells, cell_nets, cell_deg, net_deg }
    }
}

struct Tape {
    star: Star,
    /// Cell rows of `A_hat X`.
    ax: Vec<[f64; NODE_FEATURES]>,
    pre: Vec<[f64; HIDDEN]>,
    z: Vec<f64>,
    p: Vec<f64>,
    bins: Vec<usize>,
    counts: Vec<usize>,
    pred: Grid,
}

fn node_features(layout: &Layout, star: &Star) -> (Vec<[f64; NODE_FEATURES]>, Vec<[f64; NODE_FEATURES]>) {
    let nl = layout.netlist();
    let cells = layout
        .coords()
        .iter()
        .enumerate()
        .map(|(i, c)| [c[0], c[1], star.cell_nets[i].len() as f64 / 16.0, nl.cell_pins(i).len() as f64 / 16.0])
        .collect();
    let nets = (0..nl.nets().len())
        .map(|e| {
            let b = net_bbox(layout, e);
            [
                0.5 * (b.x_min + b.x_max),
                0.5 * (b.y_min + b.y_max),
                star.net_cells[e].len() as f64 / 16.0,
                nl.nets()[e].len() as f64 / 16.0,
            ]
        })
        .collect();
    (cells, nets)
}

fn forward_tape(layout: &Layout, params: &GcnParams) -> Tape {
    let star = Star::of(layout);
    let (xc, xn) = node_features(layout, &star);
    let n = layout.n_cells();
    let w1 = params.w1.data();
    let (b1, w2, b2) = (params.b1.data(), params.w2.data(), params.b2.data()[0]);
    let mut ax = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let di = star.cell_deg[i];
        let mut row = xc[i].map(|v| v / di);
        for &e in &star.cell_nets[i] {
            let a = 1.0 / (di * star.net_deg[e]).sqrt();
            for (r, v) in row.iter_mut().zip(&xn[e]) {
                *r += a * v;
            }
        }
        let mut hpre = [0.0; HIDDEN];
        for (k, hk) in hpre.iter_mut().enumerate() {
            *hk = b1[k] + (0..NODE_FEATURES).map(|f| row[f] * w1[f * HIDDEN + k]).sum::<f64>();
        }
        z.push(b2 + hpre.iter().zip(w2).map(|(hk, wk)| hk.max(0.0) * wk).sum::<f64>());
        ax.push(row);
        pre.push(hpre);
    }
    let p: Vec<f64> = z.iter().map(|v| sigmoid(clamp_logit(*v))).collect();
    let grid = layout.grid();
    let bins: Vec<usize> = layout
        .coords()
        .iter()
        .map(|c| {
            let (gx, gy) = grid.tile_of(c[0], c[1]);
            gx * grid.h() + gy
        })
        .collect();
    let mut counts = vec![0usize; grid.w() * grid.h()];
    let mut sums = vec![0.0; grid.w() * grid.h()];
    for (i, &b) in bins.iter().enumerate() {
        counts[b] += 1;
        sums[b] += p[i];
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        if *c > 0 {
            *s /= *c as f64;
        }
    }
    let pred = Grid::from_vec(grid.w(), grid.h(), sums).expect("grid-sized");
    Tape { star, ax, pre, z, p, bins, counts, pred }
}

pub fn gcn_forward(layout: &Layout, params: &GcnParams) -> Grid {
    forward_tape(layout, params).pred
}

/// Hidden-unit activity, clamp state and bin of every cell; the model is
/// smooth in coordinates and parameters while this stays fixed.
pub fn gcn_pattern(layout: &Layout, params: &GcnParams) -> Vec<usize> {
    let t = forward_tape(layout, params);
    let mut out = t.bins.clone();
    out.extend(t.pre.iter().flatten().map(|v| (*v > 0.0) as usize));
    out.extend(t.z.iter().map(|z| (z.abs() < super::LOGIT_CLAMP) as usize));
    out
}

/// Per-cell outputs before binning.
pub fn gcn_node_outputs(layout: &Layout, params: &GcnParams) -> Vec<f64> {
    forward_tape(layout, params).p
}

/// Reverse-mode gradients of `<out_grad, gcn_forward(layout)>`: parameter
/// gradients and one `[dx, dy]` row per cell. Bin membership is piecewise
/// constant and contributes nothing.
pub fn gcn_backward(layout: &Layout, params: &GcnParams, out_grad: &Grid) -> (GcnParams, Vec<[f64; 2]>) {
    gcn_backward_with_pred(layout, params, |_| out_grad.clone()).1
}

/// Like [`gcn_backward`], with the bin gradient computed from the forward
/// prediction.
pub fn gcn_backward_with_pred(
    layout: &Layout,
    params: &GcnParams,
    out_grad: impl FnOnce(&Grid) -> Grid,
) -> (Grid, (GcnParams, Vec<[f64; 2]>)) {
    let t = forward_tape(layout, params);
    let g = out_grad(&t.pred);
    let n = layout.n_cells();
    let m = layout.netlist().nets().len();
    let w1 = params.w1.data();
    let w2 = params.w2.data();
    let mut gp = GcnParams::zeros();
    let mut dxc = vec![[0.0; NODE_FEATURES]; n];
    let mut dxn = vec![[0.0; NODE_FEATURES]; m];
    for i in 0..n {
        let b = t.bins[i];
        let dp = g.data()[b] / t.counts[b] as f64;
        let dz = dp * sigmoid_grad(t.z[i], t.p[i]);
        if dz == 0.0 {
            continue;
        }
        gp.b2.data_mut()[0] += dz;
        let mut dpre = [0.0; HIDDEN];
        for k in 0..HIDDEN {
            let hk = t.pre[i][k];
            if hk > 0.0 {
                gp.w2.data_mut()[k] += dz * hk;
                dpre[k] = dz * w2[k];
            }
        }
        let mut dax = [0.0; NODE_FEATURES];
        for (f, d) in dax.iter_mut().enumerate() {
            for k in 0..HIDDEN {
                gp.w1.data_mut()[f * HIDDEN + k] += t.ax[i][f] * dpre[k];
                *d += w1[f * HIDDEN + k] * dpre[k];
            }
        }
        for (k, v) in dpre.iter().enumerate() {
            gp.b1.data_mut()[k] += v;
        }
        let di = t.star.cell_deg[i];
        for f in 0..NODE_FEATURES {
            dxc[i][f] += dax[f] / di;
        }
        for &e in &t.star.cell_nets[i] {
            let a = 1.0 / (di * t.star.net_deg[e]).sqrt();
            for f in 0..NODE_FEATURES {
                dxn[e][f] += a * dax[f];
            }
        }
    }
    let mut coord = dxc.iter().map(|r| [r[0], r[1]]).collect::<Vec<_>>();
    let nets = layout.netlist().nets();
    for (e, d) in dxn.iter().enumerate() {
        if d[0] == 0.0 && d[1] == 0.0 {
            continue;
        }
        let b = net_bbox(layout, e);
        coord[nets[e][b.arg_x_min].cell][0] += 0.5 * d[0];
        coord[nets[e][b.arg_x_max].cell][0] += 0.5 * d[0];
        coord[nets[e][b.arg_y_min].cell][1] += 0.5 * d[1];
        coord[nets[e][b.arg_y_max].cell][1] += 0.5 * d[1];
    }
    (t.pred, (gp, coord))
}
