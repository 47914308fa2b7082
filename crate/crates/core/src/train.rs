//! Datasets, vanilla and adversarial training, and the evaluation table.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::layout::{synth_layout, Layout, SynthParams};
use crate::metrics::EvalRecord;
use crate::oracle::{capacity_quantile, demand_map, invariance_check, DEFAULT_CAPACITY_QUANTILE};
use crate::perturb::{budget_cells, project_offsets, steepest_dir, Attack, AttackConfig, AttackMode, Norm};
use crate::predictor::{Model, ModelKind, Objective, Parameters, Params, Want};
use crate::rng;
use crate::tensor::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub layout: Layout,
    pub label: Grid,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Edge capacity used for every label, frozen from the training split.
    pub capacity: f64,
}

pub const TRAIN_FRACTION: f64 = 0.7;

/// Seeded shuffle of `0..n` cut 70/30; both halves are returned sorted.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::derive(seed, rng::purpose::SPLIT, 0));
    let cut = (TRAIN_FRACTION * n as f64).round() as usize;
    let (mut a, mut b) = (idx[..cut].to_vec(), idx[cut..].to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    id: String,
    split: Split,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetIndex {
    samples: Vec<IndexEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelIndex {
    capacity: f64,
}

pub const INDEX_FILE: &str = "dataset.json";
pub const LABEL_INDEX_FILE: &str = "labels.json";

fn layout_path(id: &str) -> String {
    format!("layouts/{id}.json")
}

fn label_path(id: &str) -> String {
    format!("labels/{id}.ten")
}

fn read_index(dir: &Path) -> Result<DatasetIndex> {
    let index: DatasetIndex = serde_json::from_slice(&fs::read(dir.join(INDEX_FILE))?)?;
    for e in &index.samples {
        if e.id.is_empty() || !e.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::InvalidConfig(format!("sample id {:?} must be alphanumeric", e.id)));
        }
    }
    Ok(index)
}

fn read_layouts(dir: &Path, index: &DatasetIndex) -> Result<Vec<Layout>> {
    index
        .samples
        .iter()
        .map(|e| {
            Layout::from_json(&fs::read(dir.join(layout_path(&e.id)))?)
                .map_err(|err| Error::InvalidConfig(format!("sample {}: {err}", e.id)))
        })
        .collect()
}

/// `count` synthetic layouts, layout `i` drawn with a seed derived from
/// `(template.seed, i)`, with ids and the seeded split.
pub fn generate_layouts(template: &SynthParams, count: usize) -> Result<Vec<(String, Layout, Split)>> {
    let (train, _) = split_indices(count, template.seed);
    (0..count)
        .map(|i| {
            let seed = rng::derive_seed(template.seed, rng::purpose::DATASET, i as u64);
            let layout = synth_layout(&SynthParams { seed, ..template.clone() })?;
            let split = if train.binary_search(&i).is_ok() { Split::Train } else { Split::Test };
            Ok((format!("L{i:04}"), layout, split))
        })
        .collect()
}

/// Writes unlabeled layouts and the split index into `dir`.
pub fn write_layouts(dir: &Path, layouts: &[(String, Layout, Split)]) -> Result<()> {
    fs::create_dir_all(dir.join("layouts"))?;
    let mut samples = Vec::with_capacity(layouts.len());
    for (id, layout, split) in layouts {
        fs::write(dir.join(layout_path(id)), layout.to_json()?)?;
        samples.push(IndexEntry { id: id.clone(), split: *split });
    }
    let index = DatasetIndex { samples };
    check_ids(&index)?;
    fs::write(dir.join(INDEX_FILE), crate::json::to_vec(&index)?)?;
    Ok(())
}

fn check_ids(index: &DatasetIndex) -> Result<()> {
    let mut ids: Vec<&str> = index.samples.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("duplicate sample ids".into()));
    }
    Ok(())
}

/// Labels every layout in `dir` with the oracle, using the given capacity or
/// the training-split quantile. Writes `labels/` and the label index next to
/// the layouts and returns the capacity used.
pub fn label_dir(dir: &Path, capacity: Option<f64>) -> Result<f64> {
    let index = read_index(dir)?;
    let layouts = read_layouts(dir, &index)?;
    let capacity = match capacity {
        Some(c) if c.is_finite() && c > 0.0 => c,
        Some(c) => return Err(Error::InvalidConfig(format!("capacity {c} must be positive"))),
        None => capacity_quantile(
            layouts.iter().zip(&index.samples).filter(|(_, e)| e.split == Split::Train).map(|(l, _)| l),
            DEFAULT_CAPACITY_QUANTILE,
        ),
    };
    fs::create_dir_all(dir.join("labels"))?;
    for (e, l) in index.samples.iter().zip(&layouts) {
        let mut buf = Vec::new();
        demand_map(l, capacity).bin_congestion.write_ten(&mut buf)?;
        fs::write(dir.join(label_path(&e.id)), buf)?;
    }
    fs::write(dir.join(LABEL_INDEX_FILE), crate::json::to_vec(&LabelIndex { capacity })?)?;
    Ok(capacity)
}

impl Dataset {
    /// Layouts from [`generate_layouts`], labeled with the capacity quantile
    /// of the training split.
    pub fn generate(template: &SynthParams, count: usize) -> Result<Dataset> {
        let layouts = generate_layouts(template, count)?;
        let train: Vec<usize> = (0..count).filter(|&i| layouts[i].2 == Split::Train).collect();
        let test: Vec<usize> = (0..count).filter(|&i| layouts[i].2 == Split::Test).collect();
        let capacity = capacity_quantile(train.iter().map(|&i| &layouts[i].1), DEFAULT_CAPACITY_QUANTILE);
        let samples = layouts
            .into_iter()
            .map(|(id, layout, _)| {
                let label = demand_map(&layout, capacity).bin_congestion;
                Sample { id, layout, label }
            })
            .collect();
        Ok(Dataset { samples, train, test, capacity })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let layouts: Vec<(String, Layout, Split)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let split = if self.train.binary_search(&i).is_ok() { Split::Train } else { Split::Test };
                (s.id.clone(), s.layout.clone(), split)
            })
            .collect();
        write_layouts(dir, &layouts)?;
        label_dir(dir, Some(self.capacity))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let index = read_index(dir)?;
        check_ids(&index)?;
        let labels = match fs::read(dir.join(LABEL_INDEX_FILE)) {
            Ok(bytes) => serde_json::from_slice::<LabelIndex>(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::InvalidConfig("dataset is not labeled yet; run `label` first".into()))
            }
            Err(e) => return Err(e.into()),
        };
        let capacity = labels.capacity;
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidConfig(format!("dataset capacity {capacity} must be positive")));
        }
        let layouts = read_layouts(dir, &index)?;
        let mut out = Dataset { samples: Vec::new(), train: Vec::new(), test: Vec::new(), capacity };
        for (i, (e, layout)) in index.samples.iter().zip(layouts).enumerate() {
            let label = Grid::read_ten(&fs::read(dir.join(label_path(&e.id)))?)
                .map_err(|err| Error::InvalidConfig(format!("sample {}: {err}", e.id)))?;
            let g = layout.grid();
            if (label.w(), label.h()) != (g.w(), g.h()) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{} label for {}", g.w(), g.h(), e.id),
                    actual: format!("{}x{}", label.w(), label.h()),
                });
            }
            match e.split {
                Split::Train => out.train.push(i),
                Split::Test => out.test.push(i),
            }
            out.samples.push(Sample { id: e.id.clone(), layout, label });
        }
        Ok(out)
    }

    pub fn split(&self, s: Split) -> impl Iterator<Item = &Sample> {
        let idx = match s {
            Split::Train => &self.train,
            Split::Test => &self.test,
        };
        idx.iter().map(move |&i| &self.samples[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Vanilla,
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvSteps {
    FullPgd { iterations: usize, restarts: usize },
    /// One projected step from a random feasible start.
    FastSingleStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub adv_fraction: f64,
    pub adv_steps: AdvSteps,
    pub attack_mode: AttackMode,
    pub attack_budget: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Fcn,
            mode: TrainMode::Vanilla,
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.5,
            seed: 0,
            adv_fraction: 0.5,
            adv_steps: AdvSteps::FastSingleStep,
            attack_mode: AttackMode::Score,
            attack_budget: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && (0.0..=1.0).contains(&self.adv_fraction)
            && self.attack_budget > 0.0
            && self.attack_budget <= 1.0
            && self.attack_mode != AttackMode::Random;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub model: Model,
    pub history: Vec<EpochLoss>,
    /// Attacked training examples, all verified router-invariant.
    pub attacked: usize,
}

pub fn mean_bce(model: &Model, samples: &[&Sample], features: Option<&[FeatureMap]>) -> Result<f64> {
    let mut total = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let f = features.map(|f| &f[k]);
        total += model.evaluate(&s.layout, f, Objective::Bce(&s.label), Want::default())?.value;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// A perturbed copy of `layout` for training, from the current model.
fn adversarial_layout(model: &Model, s: &Sample, cfg: &TrainConfig, seed: u64) -> Result<Layout> {
    let label = (cfg.attack_mode == AttackMode::Loss).then_some(&s.label);
    let acfg = AttackConfig { seed, ..AttackConfig::new(cfg.attack_mode, cfg.attack_budget) };
    let delta = match cfg.adv_steps {
        AdvSteps::FullPgd { iterations, restarts } => {
            let c = AttackConfig { iterations, restarts, ..acfg };
            Attack::new(&s.layout, model, label, c)?.run(None)?.perturbation.delta
        }
        AdvSteps::FastSingleStep => {
            let attack = Attack::new(&s.layout, model, label, acfg)?;
            let bx = attack.feasible_box();
            let mut r = rng::derive(seed, rng::purpose::ATTACK, 0);
            let n = s.layout.n_cells();
            let movable: Vec<usize> = (0..n).filter(|&i| bx.is_movable(i)).collect();
            let eps0 = budget_cells(cfg.attack_budget, n);
            let mut z = vec![[0.0; 2]; n];
            for j in rand::seq::index::sample(&mut r, movable.len(), eps0.min(movable.len())) {
                let i = movable[j];
                for a in 0..2 {
                    let (l, u) = (bx.lower[i][a], bx.upper[i][a]);
                    z[i][a] = if u > l { r.gen_range(l..=u) } else { l };
                }
            }
            let coords = s.layout.coords().iter().zip(&z).map(|(c, d)| [c[0] + d[0], c[1] + d[1]]).collect();
            let obj = match label {
                Some(y) => Objective::Bce(y),
                None => Objective::Score,
            };
            let g = model.input_gradient(&s.layout.with_coords(coords)?, obj)?;
            let sign = if cfg.attack_mode == AttackMode::Loss { 1.0 } else { -1.0 };
            let grid = s.layout.grid();
            let step = steepest_dir(&g, Norm::Inf, sign * acfg.eta0);
            let y: Vec<[f64; 2]> = z
                .iter()
                .zip(&step)
                .map(|(a, b)| [a[0] + b[0] * grid.pitch_x(), a[1] + b[1] * grid.pitch_y()])
                .collect();
            project_offsets(&y, bx, eps0).delta
        }
    };
    let eps0 = budget_cells(cfg.attack_budget, s.layout.n_cells());
    let out = s.layout.apply_perturbation(&delta, Some(eps0))?;
    if cfg!(debug_assertions) {
        let rep = invariance_check(&s.layout, &out);
        assert!(rep.identical && rep.demand_identical, "attacked sample {} changed routing", s.id);
    }
    Ok(out)
}

/// Mini-batch gradient descent on mean pixel BCE over the training split.
/// In adversarial mode a seeded `adv_fraction` of every batch is replaced by
/// attacked copies (labels kept) before the step.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let train: Vec<&Sample> = data.split(Split::Train).collect();
    let test: Vec<&Sample> = data.split(Split::Test).collect();
    let first = train.first().ok_or_else(|| Error::InvalidConfig("empty training split".into()))?;
    let mut model = Model::init(cfg.kind, first.layout.grid(), cfg.seed);
    let cache = |samples: &[&Sample], model: &Model| -> Option<Vec<FeatureMap>> {
        (cfg.kind == ModelKind::Fcn).then(|| samples.iter().map(|s| model.features(&s.layout)).collect())
    };
    let train_features = cache(&train, &model);
    let test_features = cache(&test, &model);
    let adversarial = cfg.mode == TrainMode::Adversarial && cfg.adv_fraction > 0.0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut attacked = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::derive(cfg.seed, rng::purpose::SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut adv = vec![false; batch.len()];
            if adversarial {
                let k = (cfg.adv_fraction * batch.len() as f64).round() as usize;
                let mut r = rng::derive(cfg.seed, rng::purpose::ATTACK, ((epoch as u64) << 32) | b as u64);
                for j in rand::seq::index::sample(&mut r, batch.len(), k.min(batch.len())) {
                    adv[j] = true;
                }
            }
            let mut grad = Params::zeros(cfg.kind);
            let mut batch_loss = 0.0;
            for (j, &t) in batch.iter().enumerate() {
                let s = train[t];
                let e = if adv[j] {
                    let seed = rng::derive_seed(cfg.seed, rng::purpose::ATTACK, ((epoch as u64) << 32) | (t as u64) | (1 << 31));
                    let l = adversarial_layout(&model, s, cfg, seed)?;
                    attacked += 1;
                    model.evaluate(&l, None, Objective::Bce(&s.label), Want { params: true, coords: false })?
                } else {
                    let f = train_features.as_ref().map(|f| &f[t]);
                    model.evaluate(&s.layout, f, Objective::Bce(&s.label), Want { params: true, coords: false })?
                };
                batch_loss += e.value;
                grad.axpy(1.0, &e.param_grad.expect("requested"));
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() || !grad.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss: batch_loss });
            }
            model.params.axpy(-cfg.learning_rate / batch.len() as f64, &grad);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        let test_loss = mean_bce(&model, &test, test_features.as_deref())?;
        history.push(EpochLoss { epoch, train_loss: epoch_loss / train.len() as f64, test_loss });
    }
    Ok(TrainResult { model, history, attacked })
}

pub fn train_vanilla(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    if cfg.mode != TrainMode::Vanilla {
        return Err(Error::InvalidConfig("train_vanilla needs mode vanilla".into()));
    }
    train(data, cfg)
}

pub fn train_adversarial(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    if cfg.mode != TrainMode::Adversarial {
        return Err(Error::InvalidConfig("train_adversarial needs mode adversarial".into()));
    }
    train(data, cfg)
}

/// One row of the evaluation table: a named attack or none.
#[derive(Clone, Debug, PartialEq)]
pub struct TableAttack {
    pub name: String,
    pub attack: Option<AttackConfig>,
}

/// The six standard rows: clean, random 1%, score attack at 1% and 5%, loss
/// attack at 1% and 5%.
pub fn standard_attacks(base: AttackConfig) -> Vec<TableAttack> {
    let mut out = vec![TableAttack { name: "clean".into(), attack: None }];
    for (mode, budgets) in
        [(AttackMode::Random, &[0.01][..]), (AttackMode::Score, &[0.01, 0.05]), (AttackMode::Loss, &[0.01, 0.05])]
    {
        for &b in budgets {
            let name = format!("{mode}-{}%", b * 100.0);
            out.push(TableAttack { name, attack: Some(AttackConfig { mode, budget_fraction: b, ..base }) });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub model: String,
    pub attack: String,
    pub layouts: usize,
    pub score: f64,
    pub nrms: f64,
    pub ssim: f64,
    pub bce: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub rows: Vec<TableRow>,
    /// Per-layout records, in row order.
    pub records: Vec<(String, EvalRecord)>,
}

/// Runs one attack on one sample and returns the prediction on the attacked
/// layout. The attack seed is derived from `cfg.seed` and `index`.
pub fn attacked_prediction(model: &Model, s: &Sample, cfg: Option<&AttackConfig>, index: usize) -> Result<Grid> {
    let Some(cfg) = cfg else { return model.predict(&s.layout) };
    let c = AttackConfig { seed: rng::derive_seed(cfg.seed, rng::purpose::EVAL, index as u64), ..*cfg };
    let r = Attack::new(&s.layout, model, Some(&s.label), c)?.run(None)?;
    model.predict(&s.layout.apply_perturbation(&r.perturbation.delta, Some(r.perturbation.eps0))?)
}

/// Mean score, NRMS, SSIM and BCE per (model, attack) over the test split.
pub fn evaluate_table(models: &[(String, &Model)], data: &Dataset, attacks: &[TableAttack]) -> Result<Table> {
    let mut table = Table::default();
    let test: Vec<&Sample> = data.split(Split::Test).collect();
    for (name, model) in models {
        for a in attacks {
            let budget = a.attack.as_ref().map_or(0.0, |c| c.budget_fraction);
            let per_layout = test
                .par_iter()
                .enumerate()
                .map(|(k, s)| {
                    let pred = attacked_prediction(model, s, a.attack.as_ref(), data.test[k])?;
                    let rec = EvalRecord::new(s.id.clone(), a.name.clone(), budget, &pred, &s.label)?;
                    Ok((rec, crate::predictor::bce(&pred, &s.label)))
                })
                .collect::<Result<Vec<_>>>()?;
            let (mut score, mut nrms, mut ssim, mut bce) = (0.0, 0.0, 0.0, 0.0);
            for (rec, b) in per_layout {
                score += rec.score;
                nrms += rec.nrms;
                ssim += rec.ssim;
                bce += b;
                table.records.push((name.clone(), rec));
            }
            let n = test.len().max(1) as f64;
            table.rows.push(TableRow {
                model: name.clone(),
                attack: a.name.clone(),
                layouts: test.len(),
                score: score / n,
                nrms: nrms / n,
                ssim: ssim / n,
                bce: bce / n,
            });
        }
    }
    Ok(table)
}

pub const HISTOGRAM_BINS: usize = 20;

/// Counts of per-layout scores in equal bins over `[0, 1]`, per
/// (model, attack).
pub fn score_histograms(table: &Table) -> Vec<(String, String, Vec<usize>)> {
    let mut out: Vec<(String, String, Vec<usize>)> = Vec::new();
    for (model, rec) in &table.records {
        let pos = match out.iter().position(|(m, a, _)| m == model && a == &rec.mode) {
            Some(p) => p,
            None => {
                out.push((model.clone(), rec.mode.clone(), vec![0; HISTOGRAM_BINS]));
                out.len() - 1
            }
        };
        let bin = ((rec.score * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        out[pos].2[bin] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (a, b) = split_indices(200, 3);
        assert_eq!((a.len(), b.len()), (140, 60));
        assert!(a.iter().all(|i| b.binary_search(i).is_err()));
        assert_eq!(split_indices(200, 3), (a.clone(), b));
        assert_ne!(split_indices(200, 4).0, a);
    }

    #[test]
    fn dataset_roundtrip() {
        let t = SynthParams { seed: 2, n_cells: 60, n_nets: 80, grid_w: 8, grid_h: 8, ..SynthParams::default() };
        let d = Dataset::generate(&t, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!((back.train.clone(), back.test.clone(), back.capacity), (d.train.clone(), d.test.clone(), d.capacity));
        for (a, b) in back.samples.iter().zip(&d.samples) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.layout.coords(), b.layout.coords());
            assert_eq!(a.label, b.label);
        }
        // the two-step path gives the same labels
        let dir2 = tempfile::tempdir().unwrap();
        write_layouts(dir2.path(), &generate_layouts(&t, 6).unwrap()).unwrap();
        assert!(Dataset::load(dir2.path()).is_err());
        assert_eq!(label_dir(dir2.path(), None).unwrap(), d.capacity);
        assert_eq!(Dataset::load(dir2.path()).unwrap().samples[3].label, d.samples[3].label);
    }

    #[test]
    fn standard_rows() {
        let names: Vec<String> =
            standard_attacks(AttackConfig::new(AttackMode::Score, 0.01)).into_iter().map(|a| a.name).collect();
        assert_eq!(names, ["clean", "random-1%", "score-1%", "score-5%", "loss-1%", "loss-5%"]);
    }
}
