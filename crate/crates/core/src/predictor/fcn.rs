//! Five-layer encoder/decoder FCN:
//!
//! ```text
//! conv 3->8 (3x3) · ReLU · conv 8->16 (3x3, /2) · ReLU · conv 16->16 (3x3) · ReLU
//!   · deconv 16->8 (4x4, x2) · ReLU · conv 8->1 (3x3) · sigmoid
//! ```

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::Relation;
use super::{clamp_logit, sigmoid, Parameters};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::tensor::{Grid, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerSpec {
    name: &'static str,
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    pad: usize,
    transposed: bool,
}

const LAYERS: [LayerSpec; 5] = [
    LayerSpec { name: "conv1", in_ch: 3, out_ch: 8, k: 3, stride: 1, pad: 1, transposed: false },
    LayerSpec { name: "conv2", in_ch: 8, out_ch: 16, k: 3, stride: 2, pad: 1, transposed: false },
    LayerSpec { name: "conv3", in_ch: 16, out_ch: 16, k: 3, stride: 1, pad: 1, transposed: false },
    LayerSpec { name: "deconv4", in_ch: 16, out_ch: 8, k: 4, stride: 2, pad: 1, transposed: true },
    LayerSpec { name: "conv5", in_ch: 8, out_ch: 1, k: 3, stride: 1, pad: 1, transposed: false },
];

impl LayerSpec {
    fn weight_shape(&self) -> [usize; 4] {
        if self.transposed {
            [self.in_ch, self.out_ch, self.k, self.k]
        } else {
            [self.out_ch, self.in_ch, self.k, self.k]
        }
    }

    fn out_dims(&self, (w, h): (usize, usize)) -> (usize, usize) {
        let f = |n: usize| {
            if self.transposed {
                (n - 1) * self.stride + self.k - 2 * self.pad
            } else {
                (n + 2 * self.pad - self.k) / self.stride + 1
            }
        };
        (f(w), f(h))
    }

    fn relation(&self, inp: (usize, usize), out: (usize, usize)) -> Relation {
        let (small_ch, big_ch, small, big) = if self.transposed {
            (self.in_ch, self.out_ch, inp, out)
        } else {
            (self.out_ch, self.in_ch, out, inp)
        };
        Relation { small_ch, big_ch, k: self.k, stride: self.stride, pad: self.pad, small, big }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Weights and biases of the five layers, in forward order.
#[derive(Clone, Debug, PartialEq)]
pub struct FcnParams {
    pub layers: Vec<ConvLayer>,
}

impl FcnParams {
    pub fn zeros() -> Self {
        Self {
            layers: LAYERS
                .iter()
                .map(|s| ConvLayer { weight: Tensor::zeros(&s.weight_shape()), bias: Tensor::zeros(&[s.out_ch]) })
                .collect(),
        }
    }

    /// Uniform He-style initialization: `U(-b, b)` with `b = sqrt(6 / fan_in)`,
    /// zero biases.
    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros();
        for (spec, layer) in LAYERS.iter().zip(&mut p.layers) {
            let fan_in = (spec.in_ch * spec.k * spec.k / (spec.stride * spec.stride)) as f64;
            let bound = (6.0 / fan_in).sqrt();
            for v in layer.weight.data_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn expected_shapes() -> Vec<(String, Vec<usize>)> {
        LAYERS
            .iter()
            .flat_map(|s| {
                [(format!("{}.weight", s.name), s.weight_shape().to_vec()), (format!("{}.bias", s.name), vec![s.out_ch])]
            })
            .collect()
    }
}

impl Parameters for FcnParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        LAYERS
            .iter()
            .zip(&self.layers)
            .flat_map(|(s, l)| [(format!("{}.weight", s.name), &l.weight), (format!("{}.bias", s.name), &l.bias)])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}

/// Activations kept for the backward pass.
pub struct FcnTape {
    dims: Vec<(usize, usize)>,
    /// Layer inputs (post-activation of the previous layer); `inputs[0]` is the feature map.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    pub logits: Grid,
    pub prob: Grid,
}

impl FcnTape {
    /// Which hidden units are active and which logits sit inside the clamp.
    /// The network is smooth in its inputs and parameters while this stays
    /// fixed.
    pub fn pattern(&self) -> Vec<bool> {
        let hidden = self.pre[..self.pre.len() - 1].iter().flatten().map(|z| *z > 0.0);
        hidden.chain(self.logits.data().iter().map(|z| z.abs() < super::LOGIT_CLAMP)).collect()
    }
}

pub fn check_input_dims(w: usize, h: usize) -> Result<()> {
    if w < 8 || h < 8 || w % 2 != 0 || h % 2 != 0 {
        return Err(Error::ShapeMismatch {
            expected: "even W, H >= 8".into(),
            actual: format!("{w}x{h}"),
        });
    }
    Ok(())
}

pub fn fcn_forward_tape(m: &FeatureMap, params: &FcnParams) -> Result<FcnTape> {
    let (w, h) = (m.w(), m.h());
    check_input_dims(w, h)?;
    let mut dims = vec![(w, h)];
    let mut inputs = vec![m.to_chw()];
    let mut pre = Vec::with_capacity(LAYERS.len());
    for (li, (spec, layer)) in LAYERS.iter().zip(&params.layers).enumerate() {
        let din = *dims.last().expect("dims");
        let dout = spec.out_dims(din);
        let rel = spec.relation(din, dout);
        let plane = dout.0 * dout.1;
        let mut z = vec![0.0; spec.out_ch * plane];
        for (o, b) in layer.bias.data().iter().enumerate() {
            z[o * plane..(o + 1) * plane].fill(*b);
        }
        let x = inputs.last().expect("input");
        if spec.transposed {
            rel.scatter(layer.weight.data(), x, &mut z);
        } else {
            rel.gather(layer.weight.data(), x, &mut z);
        }
        if li + 1 < LAYERS.len() {
            inputs.push(z.iter().map(|v| v.max(0.0)).collect());
        }
        pre.push(z);
        dims.push(dout);
    }
    let (ow, oh) = *dims.last().expect("dims");
    let logits = Grid::from_vec(ow, oh, pre.last().expect("logits").clone())?;
    let prob = Grid::from_vec(ow, oh, logits.data().iter().map(|z| sigmoid(clamp_logit(*z))).collect())?;
    Ok(FcnTape { dims, inputs, pre, logits, prob })
}

pub fn fcn_forward(m: &FeatureMap, params: &FcnParams) -> Result<Grid> {
    Ok(fcn_forward_tape(m, params)?.prob)
}

/// Reverse pass from a gradient on the logits. Returns parameter gradients
/// (when requested) and the gradient on the three input channels, each a
/// `W x H` grid.
pub fn fcn_backward_logits(
    params: &FcnParams,
    tape: &FcnTape,
    logit_grad: &Grid,
    want_params: bool,
) -> (Option<FcnParams>, [Grid; 3]) {
    let mut grads = want_params.then(FcnParams::zeros);
    let mut g = logit_grad.data().to_vec();
    for li in (0..LAYERS.len()).rev() {
        let spec = &LAYERS[li];
        let (din, dout) = (tape.dims[li], tape.dims[li + 1]);
        let rel = spec.relation(din, dout);
        if li + 1 < LAYERS.len() {
            for (gv, z) in g.iter_mut().zip(&tape.pre[li]) {
                if *z <= 0.0 {
                    *gv = 0.0;
                }
            }
        }
        let x = &tape.inputs[li];
        if let Some(grads) = grads.as_mut() {
            let layer = &mut grads.layers[li];
            let plane = dout.0 * dout.1;
            for (o, b) in layer.bias.data_mut().iter_mut().enumerate() {
                *b = g[o * plane..(o + 1) * plane].iter().sum();
            }
            if spec.transposed {
                rel.weight_grad(x, &g, layer.weight.data_mut());
            } else {
                rel.weight_grad(&g, x, layer.weight.data_mut());
            }
        }
        let mut gx = vec![0.0; spec.in_ch * din.0 * din.1];
        let wt = params.layers[li].weight.data();
        if spec.transposed {
            rel.gather(wt, &g, &mut gx);
        } else {
            rel.scatter(wt, &g, &mut gx);
        }
        g = gx;
    }
    let (w, h) = tape.dims[0];
    let plane = w * h;
    let ch = |c: usize| Grid::from_vec(w, h, g[c * plane..(c + 1) * plane].to_vec()).expect("input plane");
    (grads, [ch(0), ch(1), ch(2)])
}

/// Reverse-mode gradients of `<out_grad, fcn_forward(m)>`.
pub fn fcn_backward(m: &FeatureMap, params: &FcnParams, out_grad: &Grid) -> Result<(FcnParams, [Grid; 3])> {
    let tape = fcn_forward_tape(m, params)?;
    if out_grad.w() != m.w() || out_grad.h() != m.h() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", m.w(), m.h()),
            actual: format!("{}x{}", out_grad.w(), out_grad.h()),
        });
    }
    let logit_grad = Grid::from_fn(m.w(), m.h(), |x, y| {
        let z = tape.logits.get(x, y);
        let p = tape.prob.get(x, y);
        out_grad.get(x, y) * super::sigmoid_grad(z, p)
    });
    let (p, g) = fcn_backward_logits(params, &tape, &logit_grad, true);
    Ok((p.expect("param grads requested"), g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn map(w: usize, h: usize, seed: u64) -> FeatureMap {
        use rand::Rng;
        let mut r = rng::derive(seed, 99, 0);
        let mut g = || Grid::from_fn(w, h, |_, _| r.gen_range(0.0..1.0));
        FeatureMap { rudy: g(), pin_rudy: g(), macro_region: g() }
    }

    #[test]
    fn zero_params_give_half() {
        let m = FeatureMap { rudy: Grid::zeros(8, 8), pin_rudy: Grid::zeros(8, 8), macro_region: Grid::zeros(8, 8) };
        let out = fcn_forward(&m, &FcnParams::zeros()).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn output_shape_and_range() {
        let p = FcnParams::init(&mut rng::derive(0, rng::purpose::INIT, 0));
        let out = fcn_forward(&map(12, 16, 1), &p).unwrap();
        assert_eq!((out.w(), out.h()), (12, 16));
        assert!(out.data().iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(fcn_forward(&map(9, 16, 1), &p).is_err());
        assert!(fcn_forward(&map(6, 6, 1), &p).is_err());
    }

    #[test]
    fn raising_final_bias_raises_every_output() {
        let mut p = FcnParams::init(&mut rng::derive(0, rng::purpose::INIT, 0));
        p.layers[4].bias.data_mut()[0] = 0.3;
        let m = map(8, 8, 2);
        let before = fcn_forward(&m, &p).unwrap();
        p.layers[4].bias.data_mut()[0] = 0.6;
        let after = fcn_forward(&m, &p).unwrap();
        assert!(before.data().iter().zip(after.data()).all(|(a, b)| b > a));
    }

    #[test]
    fn zero_out_grad_gives_zero_gradients() {
        let p = FcnParams::init(&mut rng::derive(0, rng::purpose::INIT, 0));
        let (gp, gi) = fcn_backward(&map(8, 8, 3), &p, &Grid::zeros(8, 8)).unwrap();
        assert!(gp.tensors().iter().all(|(_, t)| t.data().iter().all(|v| *v == 0.0)));
        assert!(gi.iter().all(|g| g.data().iter().all(|v| *v == 0.0)));
    }
}
