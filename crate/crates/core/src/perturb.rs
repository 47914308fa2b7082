//! Routing-invariant perturbations: the feasible set `S(x)`, its projection,
//! steepest-descent directions, momentum PGD with restarts, and a random
//! baseline.
//!
//! `S(x)` holds every offset matrix whose rows lie in the cells'
//! [`FeasibleBox`]es and which moves at most `eps0` cells. Offsets are kept
//! relative to the clean coordinates throughout; the absolute iterate is
//! `x + delta`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{FeasibleBox, Layout};
use crate::predictor::{Model, Objective, Want};
use crate::rng;
use crate::tensor::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub delta: Vec<[f64; 2]>,
    pub moved: Vec<bool>,
    pub eps0: usize,
}

impl Perturbation {
    pub fn zero(n: usize, eps0: usize) -> Self {
        Self { delta: vec![[0.0; 2]; n], moved: vec![false; n], eps0 }
    }

    /// Wraps an offset matrix; a row counts as moved when it is nonzero.
    pub fn from_delta(delta: Vec<[f64; 2]>, eps0: usize) -> Self {
        let moved = delta.iter().map(|d| *d != [0.0, 0.0]).collect();
        Self { delta, moved, eps0 }
    }

    pub fn n_moved(&self) -> usize {
        self.moved.iter().filter(|m| **m).count()
    }

    /// Checks both invariants: budget, zero unmoved rows, rows in their boxes.
    pub fn validate(&self, bx: &FeasibleBox) -> Result<()> {
        if self.delta.len() != bx.len() || self.moved.len() != bx.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", bx.len()),
                actual: format!("{} rows", self.delta.len()),
            });
        }
        if self.n_moved() > self.eps0 {
            return Err(Error::InvalidPerturbation {
                reason: format!("{} cells moved, budget {}", self.n_moved(), self.eps0),
                cells: (0..self.moved.len()).filter(|&i| self.moved[i]).collect(),
            });
        }
        let bad: Vec<usize> = (0..self.delta.len())
            .filter(|&i| (!self.moved[i] && self.delta[i] != [0.0, 0.0]) || !bx.contains(i, self.delta[i]))
            .collect();
        if !bad.is_empty() {
            return Err(Error::InvalidPerturbation { reason: "row outside feasible box or unmasked".into(), cells: bad });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Vec<u8> {
        let rows = (0..self.delta.len())
            .filter(|&i| self.moved[i])
            .map(|i| Row { cell: i, dx: self.delta[i][0], dy: self.delta[i][1] })
            .collect();
        crate::json::to_vec(&PerturbationFile { eps0: self.eps0, rows }).expect("serializable")
    }

    /// Parses `{eps0, rows: [{cell, dx, dy}]}` for a layout with `n_cells`
    /// cells. Structural checks only; box containment is checked by
    /// [`Perturbation::validate`] or [`Layout::apply_perturbation`].
    pub fn from_json(bytes: &[u8], n_cells: usize) -> Result<Self> {
        let file: PerturbationFile = serde_json::from_slice(bytes)?;
        let mut p = Perturbation::zero(n_cells, file.eps0);
        for (k, r) in file.rows.iter().enumerate() {
            if r.cell >= n_cells {
                return Err(Error::IndexOutOfRange { index: r.cell, len: n_cells });
            }
            if !r.dx.is_finite() || !r.dy.is_finite() {
                return Err(Error::InvalidPerturbation { reason: format!("row {k} is not finite"), cells: vec![r.cell] });
            }
            if p.moved[r.cell] {
                return Err(Error::InvalidPerturbation { reason: format!("row {k} repeats a cell"), cells: vec![r.cell] });
            }
            p.delta[r.cell] = [r.dx, r.dy];
            p.moved[r.cell] = [r.dx, r.dy] != [0.0, 0.0];
        }
        if p.n_moved() > p.eps0 {
            return Err(Error::InvalidPerturbation {
                reason: format!("{} rows exceed budget {}", p.n_moved(), p.eps0),
                cells: Vec::new(),
            });
        }
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    cell: usize,
    dx: f64,
    dy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationFile {
    eps0: usize,
    rows: Vec<Row>,
}

/// Number of cells a budget fraction allows.
pub fn budget_cells(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).floor() as usize).min(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    /// Minimize the predicted congestion score.
    Score,
    /// Maximize BCE against the oracle label.
    Loss,
    Random,
}

impl std::str::FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(AttackMode::Score),
            "loss" => Ok(AttackMode::Loss),
            "random" => Ok(AttackMode::Random),
            _ => Err(Error::InvalidConfig(format!("unknown attack mode {s:?} (expected score, loss or random)"))),
        }
    }
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackMode::Score => "score",
            AttackMode::Loss => "loss",
            AttackMode::Random => "random",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    pub budget_fraction: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub alpha: f64,
    /// Initial step, in tile pitches.
    pub eta0: f64,
    /// Final step, in tile pitches; the step decays linearly per iteration.
    pub eta_final: f64,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(mode: AttackMode, budget_fraction: f64) -> Self {
        Self { mode, budget_fraction, iterations: 100, restarts: 5, alpha: 0.75, eta0: 2.0, eta_final: 0.1, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.budget_fraction > 0.0
            && self.budget_fraction <= 1.0
            && (0.0..=1.0).contains(&self.alpha)
            && self.eta_final > 0.0
            && self.eta0 >= self.eta_final
            && self.eta0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "attack config needs 0 < budget <= 1, 0 <= alpha <= 1, eta0 >= eta_final > 0; got {self:?}"
            )))
        }
    }

    /// Step size at iteration `i`, in tile pitches.
    pub fn eta(&self, i: usize) -> f64 {
        if self.iterations <= 1 {
            return self.eta0;
        }
        let t = i as f64 / (self.iterations - 1) as f64;
        self.eta0 + (self.eta_final - self.eta0) * t
    }
}

/// `x + clamp(y - x, l, u)` row by row.
pub fn clamp_box(y: &[[f64; 2]], x: &[[f64; 2]], bx: &FeasibleBox) -> Vec<[f64; 2]> {
    y.iter()
        .zip(x)
        .enumerate()
        .map(|(i, (yi, xi))| {
            let d = clamp_offset(bx, i, [yi[0] - xi[0], yi[1] - xi[1]]);
            [xi[0] + d[0], xi[1] + d[1]]
        })
        .collect()
}

#[inline]
fn clamp_offset(bx: &FeasibleBox, i: usize, d: [f64; 2]) -> [f64; 2] {
    [d[0].clamp(bx.lower[i][0], bx.upper[i][0]), d[1].clamp(bx.lower[i][1], bx.upper[i][1])]
}

/// Euclidean projection of the offsets `d = y - x` onto `S(x)`: every row is
/// clamped into its box, then only the `eps0` rows whose clamping gains the
/// most keep their move. Gain ties go to the lower cell index.
pub fn project_offsets(d: &[[f64; 2]], bx: &FeasibleBox, eps0: usize) -> Perturbation {
    let n = d.len();
    let mut out = Perturbation::zero(n, eps0);
    if eps0 == 0 {
        return out;
    }
    let clamped: Vec<[f64; 2]> = (0..n).map(|i| clamp_offset(bx, i, d[i])).collect();
    let gain = |i: usize| -> f64 {
        (0..2).map(|a| d[i][a] * d[i][a] - (d[i][a] - clamped[i][a]).powi(2)).sum()
    };
    let mut order: Vec<(f64, usize)> =
        (0..n).filter(|&i| clamped[i] != [0.0, 0.0]).map(|i| (gain(i), i)).collect();
    if order.len() > eps0 {
        order.select_nth_unstable_by(eps0 - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        order.truncate(eps0);
    }
    for (_, i) in order {
        out.delta[i] = clamped[i];
        out.moved[i] = true;
    }
    out
}

/// [`project_offsets`] in absolute coordinates.
pub fn project_s(y: &[[f64; 2]], x: &[[f64; 2]], bx: &FeasibleBox, eps0: usize) -> Perturbation {
    let d: Vec<[f64; 2]> = y.iter().zip(x).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
    project_offsets(&d, bx, eps0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L2,
    Inf,
}

/// Maximizer of `<w, delta>` over `|delta|_p <= eps`.
pub fn steepest_dir(w: &[[f64; 2]], p: Norm, eps: f64) -> Vec<[f64; 2]> {
    match p {
        Norm::Inf => {
            let sign = |v: f64| if v > 0.0 { eps } else if v < 0.0 { -eps } else { 0.0 };
            w.iter().map(|r| [sign(r[0]), sign(r[1])]).collect()
        }
        Norm::L2 => {
            let norm = w.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>().sqrt();
            if norm == 0.0 {
                return vec![[0.0; 2]; w.len()];
            }
            w.iter().map(|r| [eps * r[0] / norm, eps * r[1] / norm]).collect()
        }
    }
}

/// Uniformly random `eps0`-subset of movable cells, each placed uniformly in
/// its box.
fn random_init(bx: &FeasibleBox, eps0: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let movable: Vec<usize> = (0..bx.len()).filter(|&i| bx.is_movable(i)).collect();
    let mut d = vec![[0.0; 2]; bx.len()];
    let k = eps0.min(movable.len());
    for j in sample(rng, movable.len(), k) {
        let i = movable[j];
        for a in 0..2 {
            let (l, u) = (bx.lower[i][a], bx.upper[i][a]);
            d[i][a] = if u > l { rng.gen_range(l..=u) } else { l };
        }
    }
    d
}

/// Moves `floor(fraction * n)` uniformly chosen movable cells to a uniformly
/// chosen corner of their boxes.
pub fn random_perturb(layout: &Layout, budget_fraction: f64, seed: u64) -> Perturbation {
    let bx = layout.feasible_box();
    let n = layout.n_cells();
    let eps0 = budget_cells(budget_fraction, n);
    let mut r = rng::derive(seed, rng::purpose::RANDOM_PERTURB, 0);
    let movable: Vec<usize> = (0..n).filter(|&i| bx.is_movable(i)).collect();
    let mut d = vec![[0.0; 2]; n];
    for j in sample(&mut r, movable.len(), eps0.min(movable.len())) {
        let i = movable[j];
        for a in 0..2 {
            d[i][a] = if r.gen::<bool>() { bx.upper[i][a] } else { bx.lower[i][a] };
        }
    }
    Perturbation::from_delta(d, eps0)
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub perturbation: Perturbation,
    /// Objective at the returned perturbation (score, or BCE for `Loss`).
    pub objective: f64,
    /// Objective of the unperturbed layout.
    pub clean_objective: f64,
    /// Objective after initialization and after every iteration of the
    /// winning chain.
    pub trace: Vec<f64>,
    /// Chains re-initialized after a non-finite gradient.
    pub nonfinite_restarts: usize,
}

/// One attack problem: a layout, a model, the objective and a budget.
pub struct Attack<'a> {
    layout: &'a Layout,
    model: &'a Model,
    label: Option<&'a Grid>,
    cfg: AttackConfig,
    bx: FeasibleBox,
    eps0: usize,
    pitch: [f64; 2],
}

struct Chain {
    best: Vec<[f64; 2]>,
    best_value: f64,
    trace: Vec<f64>,
    iterates: Vec<Vec<[f64; 2]>>,
    nonfinite: bool,
}

/// Re-initializations allowed per chain before it is abandoned.
const MAX_CHAIN_RETRIES: usize = 3;

impl<'a> Attack<'a> {
    pub fn new(layout: &'a Layout, model: &'a Model, label: Option<&'a Grid>, cfg: AttackConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode == AttackMode::Loss && label.is_none() {
            return Err(Error::InvalidConfig("loss attack needs a label".into()));
        }
        let grid = layout.grid();
        Ok(Self {
            layout,
            model,
            label,
            cfg,
            bx: layout.feasible_box(),
            eps0: budget_cells(cfg.budget_fraction, layout.n_cells()),
            pitch: [grid.pitch_x(), grid.pitch_y()],
        })
    }

    pub fn eps0(&self) -> usize {
        self.eps0
    }

    pub fn feasible_box(&self) -> &FeasibleBox {
        &self.bx
    }

    fn objective(&self) -> Objective<'a> {
        match self.label {
            Some(y) if self.cfg.mode == AttackMode::Loss => Objective::Bce(y),
            _ => Objective::Score,
        }
    }

    fn perturbed(&self, d: &[[f64; 2]]) -> Layout {
        let coords = self.layout.coords().iter().zip(d).map(|(c, o)| [c[0] + o[0], c[1] + o[1]]).collect();
        self.layout.with_coords(coords).expect("feasible offsets keep pins on the die")
    }

    /// Objective value (to report) and its coordinate gradient.
    fn value_grad(&self, d: &[[f64; 2]]) -> Result<(f64, Vec<[f64; 2]>)> {
        let e = self.model.evaluate(&self.perturbed(d), None, self.objective(), Want { params: false, coords: true })?;
        Ok((e.value, e.coord_grad.expect("requested")))
    }

    pub fn value(&self, d: &[[f64; 2]]) -> Result<f64> {
        Ok(self.model.evaluate(&self.perturbed(d), None, self.objective(), Want::default())?.value)
    }

    /// True when `a` is a better objective value than `b`.
    fn better(&self, a: f64, b: f64) -> bool {
        match self.cfg.mode {
            AttackMode::Loss => a > b,
            _ => a < b,
        }
    }

    fn chain(&self, init: Vec<[f64; 2]>, record: bool) -> Result<Chain> {
        let descend = if self.cfg.mode == AttackMode::Loss { 1.0 } else { -1.0 };
        let alpha = self.cfg.alpha;
        let mut z = project_offsets(&init, &self.bx, self.eps0).delta;
        let mut z_prev = z.clone();
        let (mut value, mut grad) = self.value_grad(&z)?;
        let mut out = Chain {
            best: z.clone(),
            best_value: value,
            trace: vec![value],
            iterates: if record { vec![z.clone()] } else { Vec::new() },
            nonfinite: false,
        };
        for i in 0..self.cfg.iterations {
            if grad.iter().any(|g| !g[0].is_finite() || !g[1].is_finite()) {
                out.nonfinite = true;
                return Ok(out);
            }
            let eta = self.cfg.eta(i);
            let s = steepest_dir(&grad, Norm::Inf, descend * eta);
            let step: Vec<[f64; 2]> =
                (0..z.len()).map(|k| [z[k][0] + s[k][0] * self.pitch[0], z[k][1] + s[k][1] * self.pitch[1]]).collect();
            let u = project_offsets(&step, &self.bx, self.eps0).delta;
            let mixed: Vec<[f64; 2]> = (0..z.len())
                .map(|k| {
                    let m = |a: usize| z[k][a] + alpha * (u[k][a] - z[k][a]) + (1.0 - alpha) * (z[k][a] - z_prev[k][a]);
                    [m(0), m(1)]
                })
                .collect();
            let next = project_offsets(&mixed, &self.bx, self.eps0).delta;
            z_prev = std::mem::replace(&mut z, next);
            (value, grad) = self.value_grad(&z)?;
            out.trace.push(value);
            if record {
                out.iterates.push(z.clone());
            }
            if self.better(value, out.best_value) {
                out.best_value = value;
                out.best = z.clone();
            }
        }
        Ok(out)
    }

    /// Runs `cfg.restarts` chains and keeps the best iterate seen. With
    /// `warm`, the first chain starts from that perturbation.
    pub fn run(&self, warm: Option<&Perturbation>) -> Result<AttackResult> {
        let clean_objective = self.value(&vec![[0.0; 2]; self.layout.n_cells()])?;
        if self.cfg.mode == AttackMode::Random {
            let p = random_perturb(self.layout, self.cfg.budget_fraction, self.cfg.seed);
            let objective = self.value(&p.delta)?;
            return Ok(AttackResult { perturbation: p, objective, clean_objective, trace: vec![objective], nonfinite_restarts: 0 });
        }
        let mut best: Option<Chain> = None;
        let mut nonfinite_restarts = 0;
        let mut draws = 0u64;
        for r in 0..self.cfg.restarts.max(1) {
            let mut tries = 0;
            loop {
                let init = match warm {
                    Some(w) if r == 0 && tries == 0 => w.delta.clone(),
                    _ => {
                        let mut g = rng::derive(self.cfg.seed, rng::purpose::ATTACK, draws);
                        draws += 1;
                        random_init(&self.bx, self.eps0, &mut g)
                    }
                };
                let c = self.chain(init, false)?;
                let retry = c.nonfinite && tries < MAX_CHAIN_RETRIES;
                if best.as_ref().is_none_or(|b| self.better(c.best_value, b.best_value)) {
                    best = Some(c);
                }
                if !retry {
                    break;
                }
                nonfinite_restarts += 1;
                tries += 1;
            }
        }
        let b = best.expect("at least one chain");
        Ok(AttackResult {
            perturbation: Perturbation::from_delta(b.best, self.eps0),
            objective: b.best_value,
            clean_objective,
            trace: b.trace,
            nonfinite_restarts,
        })
    }

    /// Iterates of a single chain from `init`, for inspection.
    pub fn chain_iterates(&self, init: Vec<[f64; 2]>) -> Result<Vec<Vec<[f64; 2]>>> {
        Ok(self.chain(init, true)?.iterates)
    }
}

/// Momentum PGD over `S(x)`; see [`Attack::run`].
pub fn pgd_momentum(layout: &Layout, model: &Model, label: Option<&Grid>, cfg: AttackConfig) -> Result<AttackResult> {
    Attack::new(layout, model, label, cfg)?.run(None)
}
