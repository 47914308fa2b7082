//! Congestion predictors: a small encoder/decoder FCN over feature maps and a
//! single-layer GCN over the netlist graph.
//!
//! Both map a layout to a `W x H` grid in `(0, 1)` and expose gradients with
//! respect to their parameters and to cell coordinates.

pub mod checkpoint;
pub mod conv;
pub mod fcn;
pub mod gcn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_map, feature_vjp, ChannelScale, FeatureMap};
use crate::layout::{GCellGrid, Layout};
use crate::rng;
use crate::tensor::{Grid, Tensor};

pub use fcn::FcnParams;
pub use gcn::GcnParams;

/// Pre-activation clamp applied before every output sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

pub(crate) fn clamp_logit(z: f64) -> f64 {
    z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of `sigmoid(clamp(z))`, zero where the clamp is active.
pub(crate) fn sigmoid_grad(z: f64, p: f64) -> f64 {
    if z.abs() >= LOGIT_CLAMP {
        0.0
    } else {
        p * (1.0 - p)
    }
}

/// Named parameter tensors in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    /// `self += scale * other`, tensor by tensor.
    fn axpy(&mut self, scale: f64, other: &Self)
    where
        Self: Sized,
    {
        let src: Vec<&[f64]> = other.tensors().into_iter().map(|(_, t)| t.data()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.data_mut().iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.data().iter().all(|v| v.is_finite()))
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|(_, t)| t.data().iter().copied()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fcn,
    Gcn,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcn" => Ok(ModelKind::Fcn),
            "gcn" => Ok(ModelKind::Gcn),
            _ => Err(Error::InvalidConfig(format!("unknown model kind {s:?} (expected fcn or gcn)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Fcn(FcnParams),
    Gcn(GcnParams),
}

impl Parameters for Params {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        match self {
            Params::Fcn(p) => p.tensors(),
            Params::Gcn(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Params::Fcn(p) => p.tensors_mut(),
            Params::Gcn(p) => p.tensors_mut(),
        }
    }
}

impl Params {
    pub fn kind(&self) -> ModelKind {
        match self {
            Params::Fcn(_) => ModelKind::Fcn,
            Params::Gcn(_) => ModelKind::Gcn,
        }
    }

    pub fn zeros(kind: ModelKind) -> Params {
        match kind {
            ModelKind::Fcn => Params::Fcn(FcnParams::zeros()),
            ModelKind::Gcn => Params::Gcn(GcnParams::zeros()),
        }
    }

    pub fn expected_shapes(kind: ModelKind) -> Vec<(String, Vec<usize>)> {
        match kind {
            ModelKind::Fcn => FcnParams::expected_shapes(),
            ModelKind::Gcn => GcnParams::expected_shapes(),
        }
    }
}

/// Quantity differentiated by [`Model::evaluate`].
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// `(1/HW) * sum p^2`
    Score,
    /// Mean pixel-wise binary cross-entropy against a label grid.
    Bce(&'a Grid),
}

pub fn congestion_score(pred: &Grid) -> f64 {
    pred.data().iter().map(|p| p * p).sum::<f64>() / pred.data().len() as f64
}

/// BCE of probabilities, with predictions clamped to the sigmoid range the
/// logit clamp allows.
pub fn bce(pred: &Grid, label: &Grid) -> f64 {
    let (lo, hi) = (sigmoid(-LOGIT_CLAMP), sigmoid(LOGIT_CLAMP));
    let s: f64 = pred
        .data()
        .iter()
        .zip(label.data())
        .map(|(p, y)| {
            let p = p.clamp(lo, hi);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    s / pred.data().len() as f64
}

/// BCE computed from clamped logits in the overflow-free form.
fn bce_logits(logits: &Grid, label: &Grid) -> f64 {
    let s: f64 = logits
        .data()
        .iter()
        .zip(label.data())
        .map(|(z, y)| {
            let z = clamp_logit(*z);
            z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
        })
        .sum();
    s / logits.data().len() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Want {
    pub params: bool,
    pub coords: bool,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub pred: Grid,
    pub param_grad: Option<Params>,
    pub coord_grad: Option<Vec<[f64; 2]>>,
}

/// A predictor and the channel scaling its inputs were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: Params,
    pub scale: ChannelScale,
}

impl Model {
    pub fn init(kind: ModelKind, grid: GCellGrid, seed: u64) -> Model {
        let mut r = rng::derive(seed, rng::purpose::INIT, 0);
        let params = match kind {
            ModelKind::Fcn => Params::Fcn(FcnParams::init(&mut r)),
            ModelKind::Gcn => Params::Gcn(GcnParams::init(&mut r)),
        };
        Model { params, scale: ChannelScale::for_grid(grid) }
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn features(&self, layout: &Layout) -> FeatureMap {
        feature_map(layout, &self.scale)
    }

    pub fn predict(&self, layout: &Layout) -> Result<Grid> {
        match &self.params {
            Params::Fcn(p) => fcn::fcn_forward(&self.features(layout), p),
            Params::Gcn(p) => Ok(gcn::gcn_forward(layout, p)),
        }
    }

    /// Objective value, prediction, and the requested gradients.
    ///
    /// `features` may carry a precomputed feature map of `layout` (FCN only);
    /// it is recomputed otherwise.
    pub fn evaluate(
        &self,
        layout: &Layout,
        features: Option<&FeatureMap>,
        objective: Objective<'_>,
        want: Want,
    ) -> Result<Evaluation> {
        let grid = layout.grid();
        if let Objective::Bce(label) = objective {
            if label.w() != grid.w() || label.h() != grid.h() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{} label", grid.w(), grid.h()),
                    actual: format!("{}x{}", label.w(), label.h()),
                });
            }
        }
        let hw = (grid.w() * grid.h()) as f64;
        match &self.params {
            Params::Fcn(p) => {
                let owned;
                let m = match features {
                    Some(m) => m,
                    None => {
                        owned = self.features(layout);
                        &owned
                    }
                };
                let tape = fcn::fcn_forward_tape(m, p)?;
                let value = match objective {
                    Objective::Score => congestion_score(&tape.prob),
                    Objective::Bce(y) => bce_logits(&tape.logits, y),
                };
                if !want.params && !want.coords {
                    return Ok(Evaluation { value, pred: tape.prob, param_grad: None, coord_grad: None });
                }
                let logit_grad = Grid::from_fn(grid.w(), grid.h(), |x, y| {
                    let z = tape.logits.get(x, y);
                    if z.abs() >= LOGIT_CLAMP {
                        return 0.0;
                    }
                    let pr = tape.prob.get(x, y);
                    match objective {
                        Objective::Score => 2.0 * pr * pr * (1.0 - pr) / hw,
                        Objective::Bce(lab) => (pr - lab.get(x, y)) / hw,
                    }
                });
                let (pg, ig) = fcn::fcn_backward_logits(p, &tape, &logit_grad, want.params);
                let coord_grad = want.coords.then(|| feature_vjp(layout, [&ig[0], &ig[1], &ig[2]], &self.scale));
                Ok(Evaluation { value, pred: tape.prob, param_grad: pg.map(Params::Fcn), coord_grad })
            }
            Params::Gcn(p) => {
                let mut value = 0.0;
                let (pred, (pg, cg)) = gcn::gcn_backward_with_pred(layout, p, |pred| {
                    value = match objective {
                        Objective::Score => congestion_score(pred),
                        Objective::Bce(y) => bce(pred, y),
                    };
                    bin_grad(pred, objective)
                });
                Ok(Evaluation {
                    value,
                    pred,
                    param_grad: want.params.then_some(Params::Gcn(pg)),
                    coord_grad: want.coords.then_some(cg),
                })
            }
        }
    }

    /// Gradient of the objective with respect to cell coordinates.
    pub fn input_gradient(&self, layout: &Layout, objective: Objective<'_>) -> Result<Vec<[f64; 2]>> {
        let e = self.evaluate(layout, None, objective, Want { params: false, coords: true })?;
        Ok(e.coord_grad.expect("coordinate gradient requested"))
    }
}

/// Gradient of the objective with respect to the predicted grid.
pub fn bin_grad(pred: &Grid, objective: Objective<'_>) -> Grid {
    let hw = pred.data().len() as f64;
    let (lo, hi) = (sigmoid(-LOGIT_CLAMP), sigmoid(LOGIT_CLAMP));
    let data = match objective {
        Objective::Score => pred.data().iter().map(|p| 2.0 * p / hw).collect(),
        Objective::Bce(y) => pred
            .data()
            .iter()
            .zip(y.data())
            .map(|(p, y)| if *p <= lo || *p >= hi { 0.0 } else { (p - y) / (p * (1.0 - p)) / hw })
            .collect(),
    };
    Grid::from_vec(pred.w(), pred.h(), data).expect("same shape")
}

/// Gradient of the objective with respect to an FCN's input feature map.
pub fn fcn_map_gradient(params: &FcnParams, m: &FeatureMap, objective: Objective<'_>) -> Result<[Grid; 3]> {
    let tape = fcn::fcn_forward_tape(m, params)?;
    let hw = (m.w() * m.h()) as f64;
    let logit_grad = Grid::from_fn(m.w(), m.h(), |x, y| {
        let z = tape.logits.get(x, y);
        if z.abs() >= LOGIT_CLAMP {
            return 0.0;
        }
        let pr = tape.prob.get(x, y);
        match objective {
            Objective::Score => 2.0 * pr * pr * (1.0 - pr) / hw,
            Objective::Bce(lab) => (pr - lab.get(x, y)) / hw,
        }
    });
    Ok(fcn::fcn_backward_logits(params, &tape, &logit_grad, false).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn score_of_half_grid() {
        assert_eq!(congestion_score(&Grid::filled(2, 2, 0.5)), 0.25);
        assert_eq!(congestion_score(&Grid::zeros(3, 3)), 0.0);
    }

    #[test]
    fn fused_bce_matches_probability_form() {
        let z = Grid::from_vec(2, 1, vec![1.3, -0.4]).unwrap();
        let y = Grid::from_vec(2, 1, vec![0.2, 1.0]).unwrap();
        let p = Grid::from_fn(2, 1, |x, yy| sigmoid(z.get(x, yy)));
        assert!((bce_logits(&z, &y) - bce(&p, &y)).abs() < 1e-14);
    }

    #[test]
    fn bin_grad_matches_central_differences() {
        let p = Grid::from_vec(3, 1, vec![0.2, 0.55, 0.93]).unwrap();
        let y = Grid::from_vec(3, 1, vec![0.0, 1.0, 0.4]).unwrap();
        for obj in [Objective::Score, Objective::Bce(&y)] {
            let g = bin_grad(&p, obj);
            let f = |q: &Grid| match obj {
                Objective::Score => congestion_score(q),
                Objective::Bce(y) => bce(q, y),
            };
            for i in 0..3 {
                let mut a = p.clone();
                let mut b = p.clone();
                a.data_mut()[i] += 1e-6;
                b.data_mut()[i] -= 1e-6;
                let fd = (f(&a) - f(&b)) / 2e-6;
                assert!((fd - g.data()[i]).abs() < 1e-8 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn bce_gradient_vanishes_at_label() {
        let p = Grid::from_vec(3, 1, vec![0.25, 0.5, 0.9]).unwrap();
        let g = bin_grad(&p, Objective::Bce(&p));
        assert!(g.data().iter().all(|v| *v == 0.0));
        // label 1 with prediction at the clamp ceiling: saturated, no gradient
        let top = Grid::filled(1, 1, sigmoid(LOGIT_CLAMP));
        assert_eq!(bin_grad(&top, Objective::Bce(&Grid::filled(1, 1, 1.0))).data()[0], 0.0);
    }
}
