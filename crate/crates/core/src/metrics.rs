//! Map-level metrics and the budget sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::layout::Layout;
use crate::perturb::{Attack, AttackConfig, AttackMode, Perturbation};
use crate::predictor::Model;
use crate::tensor::Grid;

pub use crate::predictor::congestion_score;

/// Root-mean-square error normalized by the range of `truth`.
pub fn nrms(pred: &Grid, truth: &Grid) -> Result<f64> {
    pred.same_shape(truth)?;
    let n = pred.data().len() as f64;
    let mse = pred.data().iter().zip(truth.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    Ok(mse.sqrt() / (truth.max() - truth.min()).max(1e-12))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Mirror index into `0..n` with the edge sample repeated (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur with reflective padding.
fn blur(g: &Grid, k: &[f64; SSIM_WINDOW]) -> Grid {
    let (w, h) = (g.w(), g.h());
    let r = (SSIM_WINDOW / 2) as isize;
    let along_y = Grid::from_fn(w, h, |x, y| {
        (0..SSIM_WINDOW).map(|t| k[t] * g.get(x, reflect(y as isize + t as isize - r, h))).sum()
    });
    Grid::from_fn(w, h, |x, y| {
        (0..SSIM_WINDOW).map(|t| k[t] * along_y.get(reflect(x as isize + t as isize - r, w), y)).sum()
    })
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// dynamic range 1 and reflective padding.
pub fn ssim(pred: &Grid, truth: &Grid) -> Result<f64> {
    pred.same_shape(truth)?;
    let k = gaussian_kernel();
    let prod = |a: &Grid, b: &Grid| Grid::from_fn(a.w(), a.h(), |x, y| a.get(x, y) * b.get(x, y));
    let mu_a = blur(pred, &k);
    let mu_b = blur(truth, &k);
    let aa = blur(&prod(pred, pred), &k);
    let bb = blur(&prod(truth, truth), &k);
    let ab = blur(&prod(pred, truth), &k);
    let n = pred.data().len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let va = aa.data()[i] - ma * ma;
        let vb = bb.data()[i] - mb * mb;
        let cov = ab.data()[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(total / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub layout_id: String,
    pub mode: String,
    pub budget: f64,
    pub score: f64,
    pub nrms: f64,
    pub ssim: f64,
}

impl EvalRecord {
    pub fn new(layout_id: impl Into<String>, mode: impl Into<String>, budget: f64, pred: &Grid, truth: &Grid) -> Result<Self> {
        Ok(Self {
            layout_id: layout_id.into(),
            mode: mode.into(),
            budget,
            score: congestion_score(pred),
            nrms: nrms(pred, truth)?,
            ssim: ssim(pred, truth)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub budget: f64,
    pub mean_score: f64,
}

/// Mean predicted score over `layouts` after the unsupervised attack at each
/// budget. Each budget starts its first chain from the previous budget's best
/// perturbation, so the curve cannot rise.
pub fn robustness_curve(model: &Model, layouts: &[Layout], budgets: &[f64], cfg: AttackConfig) -> Result<Vec<CurvePoint>> {
    if budgets.first() != Some(&0.0) || budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(crate::error::Error::InvalidConfig("budgets must be ascending and start at 0".into()));
    }
    let mut warm: Vec<Option<Perturbation>> = vec![None; layouts.len()];
    let mut out = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let scores = layouts
            .par_iter()
            .zip(warm.par_iter_mut())
            .enumerate()
            .map(|(i, (l, w))| {
                if b == 0.0 {
                    return Ok(congestion_score(&model.predict(l)?));
                }
                let c = AttackConfig { mode: AttackMode::Score, budget_fraction: b, seed: cfg.seed.wrapping_add(i as u64), ..cfg };
                let r = Attack::new(l, model, None, c)?.run(w.as_ref())?;
                *w = Some(r.perturbation);
                Ok(r.objective)
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(CurvePoint { budget: b, mean_score: scores.iter().sum::<f64>() / layouts.len().max(1) as f64 });
    }
    Ok(out)
}

/// Sum of absolute differences between consecutive points.
pub fn total_variation(curve: &[CurvePoint]) -> f64 {
    curve.windows(2).map(|w| (w[1].mean_score - w[0].mean_score).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nrms_examples() {
        let t = Grid::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(nrms(&t, &t).unwrap(), 0.0);
        assert_eq!(nrms(&Grid::filled(2, 1, 0.5), &t).unwrap(), 0.5);
        let a = Grid::from_vec(2, 2, vec![0.1, 0.7, 0.3, 0.9]).unwrap();
        let b = Grid::from_vec(2, 2, vec![0.2, 0.4, 0.3, 1.0]).unwrap();
        let c = 3.7;
        assert!((nrms(&a.scaled(c), &b.scaled(c)).unwrap() - nrms(&a, &b).unwrap()).abs() < 1e-15);
        assert!(nrms(&a, &Grid::zeros(3, 1)).is_err());
    }

    #[test]
    fn nrms_constant_offset() {
        let t = Grid::from_vec(3, 1, vec![0.0, 0.5, 2.0]).unwrap();
        let shifted = Grid::from_fn(3, 1, |x, y| t.get(x, y) + 0.3);
        assert!((nrms(&shifted, &t).unwrap() - 0.3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ssim_examples() {
        let a = Grid::from_fn(12, 9, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let v = ssim(&Grid::zeros(16, 16), &Grid::filled(16, 16, 1.0)).unwrap();
        assert!((v - SSIM_C1 / (1.0 + SSIM_C1)).abs() < 1e-9, "{v}");
        let b = Grid::from_fn(12, 9, |x, y| ((x + y) % 3) as f64 / 2.0);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
        assert!(ssim(&a, &b).unwrap() < 0.99);
    }

    #[test]
    fn reflection_repeats_edges() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-9, 2), 0);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(k[i], k[SSIM_WINDOW - 1 - i]);
        }
    }
}
