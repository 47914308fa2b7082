//! `congest`: dataset generation, labeling, training, attacks and reports.

mod manifest;
mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use congest_core::features::{feature_map, ChannelScale};
use congest_core::layout::{Layout, MacroSpec, SynthParams};
use congest_core::metrics::{robustness_curve, total_variation};
use congest_core::oracle::{capacity_quantile, demand_map, invariance_check, DEFAULT_CAPACITY_QUANTILE};
use congest_core::perturb::{Attack, AttackConfig, AttackMode, Perturbation};
use congest_core::predictor::{checkpoint, Model, ModelKind};
use congest_core::tensor::Grid;
use congest_core::train::{
    evaluate_table, generate_layouts, label_dir, score_histograms, standard_attacks, train, write_layouts, AdvSteps,
    Dataset, Split, TrainConfig, TrainMode, HISTOGRAM_BINS,
};

use manifest::RunManifest;

/// Exit status when `verify` finds a routing change.
const EXIT_NOT_IDENTICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "congest", version, about = "Congestion prediction under routing-invariant placement perturbations")]
struct Cli {
    /// Run seed; every random draw is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-layout evaluation loops.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate one synthetic layout, or a dataset directory with --count.
    Gen(GenArgs),
    /// Label a dataset directory, or one layout, with the routing oracle.
    Label(LabelArgs),
    /// Write the three feature channels of a layout.
    Features(FeaturesArgs),
    /// Train a predictor on a labeled dataset.
    Train(TrainArgs),
    /// Predict a congestion map.
    Predict(PredictArgs),
    /// Attack one layout and write the perturbation.
    Attack(AttackArgs),
    /// Per-layout metrics of one model under the standard attacks.
    Eval(EvalArgs),
    /// Mean predicted score against attack budget.
    Curve(CurveArgs),
    /// Summary table and score histograms for one or more models.
    Report(ReportArgs),
    /// Check that a perturbation leaves tile-level routing unchanged.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    cells: usize,
    #[arg(long, default_value_t = 3000)]
    nets: usize,
    /// Grid size as WxH.
    #[arg(long, default_value = "32x32", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value_t = 2)]
    macros: usize,
    /// Generate a dataset of this many layouts; --out is then a directory.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LabelArgs {
    /// Dataset directory written by `gen --count`.
    #[arg(long, conflicts_with_all = ["layout", "out"])]
    data: Option<PathBuf>,
    #[arg(long, requires = "out")]
    layout: Option<PathBuf>,
    /// Edge capacity; defaults to the 0.9 quantile of training-split (or
    /// this layout's) edge demand.
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FeaturesArgs {
    #[arg(long)]
    layout: PathBuf,
    /// Take channel scales from this checkpoint instead of the grid defaults.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum StepsArg {
    Fast,
    Pgd,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "fcn")]
    model_kind: ModelKind,
    #[arg(long, value_enum, default_value = "vanilla")]
    mode: ModeArg,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    /// Share of each batch replaced by attacked copies.
    #[arg(long, default_value_t = 0.5)]
    adv_fraction: f64,
    #[arg(long, value_enum, default_value = "fast")]
    adv_steps: StepsArg,
    #[arg(long, default_value_t = 10)]
    adv_iters: usize,
    #[arg(long, default_value_t = 1)]
    adv_restarts: usize,
    #[arg(long, default_value = "score")]
    attack_mode: AttackMode,
    #[arg(long, default_value_t = 0.05)]
    attack_budget: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Vanilla,
    Adversarial,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone, Copy)]
struct PgdArgs {
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    /// Initial step in tile pitches.
    #[arg(long, default_value_t = 2.0)]
    eta0: f64,
    /// Final step in tile pitches.
    #[arg(long, default_value_t = 0.1)]
    eta_final: f64,
}

impl PgdArgs {
    fn config(&self, mode: AttackMode, budget: f64, seed: u64) -> AttackConfig {
        AttackConfig {
            iterations: self.iters,
            restarts: self.restarts,
            alpha: self.alpha,
            eta0: self.eta0,
            eta_final: self.eta_final,
            seed,
            ..AttackConfig::new(mode, budget)
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    /// Label map, required for --mode loss.
    #[arg(long)]
    label: Option<PathBuf>,
    #[arg(long, default_value = "score")]
    mode: AttackMode,
    /// Fraction of cells allowed to move.
    #[arg(long, default_value_t = 0.01)]
    budget: f64,
    #[command(flatten)]
    pgd: PgdArgs,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration objective of the winning chain, as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Use only the first N test layouts.
    #[arg(long)]
    layouts: Option<usize>,
    #[command(flatten)]
    pgd: PgdArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    /// Checkpoint as NAME=DIR or DIR; repeatable.
    #[arg(long = "model", required = true, value_parser = parse_named)]
    models: Vec<(String, PathBuf)>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.05,0.1")]
    budgets: Vec<f64>,
    #[arg(long)]
    layouts: Option<usize>,
    #[command(flatten)]
    pgd: PgdArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    #[arg(long = "model", required = true, value_parser = parse_named)]
    models: Vec<(String, PathBuf)>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    layouts: Option<usize>,
    #[command(flatten)]
    pgd: PgdArgs,
    /// Summary table CSV.
    #[arg(long)]
    out: PathBuf,
    /// Score histogram CSV.
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    delta: PathBuf,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|e| format!("grid width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("grid height: {e}"))?;
    Ok((w, h))
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        Some(_) => Err(format!("expected NAME=DIR, got {s:?}")),
        None => {
            let p = PathBuf::from(s);
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| s.to_string());
            Ok((name, p))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_layout(path: &Path) -> Result<Layout> {
    Layout::from_json(&read(path)?).with_context(|| format!("parsing layout {}", path.display()))
}

fn read_grid(path: &Path) -> Result<Grid> {
    Grid::read_ten(&read(path)?).with_context(|| format!("parsing tensor {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn load_data(path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let mut d = Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))?;
    if let Some(n) = limit {
        d.test.truncate(n);
    }
    Ok(d)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write(path, &w.into_inner().map_err(|e| anyhow!("{e}"))?)
}

fn ten_bytes(g: &Grid) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    g.write_ten(&mut buf)?;
    Ok(buf)
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn cmd_gen(seed: u64, a: &GenArgs) -> Result<()> {
    let params = SynthParams {
        seed,
        n_cells: a.cells,
        n_nets: a.nets,
        grid_w: a.grid.0,
        grid_h: a.grid.1,
        macros: MacroSpec { count: a.macros, ..MacroSpec::default() },
        ..SynthParams::default()
    };
    let mut m = RunManifest::new("gen", seed, config_json(a));
    match a.count {
        Some(count) => {
            let layouts = generate_layouts(&params, count)?;
            write_layouts(&a.out, &layouts).with_context(|| format!("writing dataset {}", a.out.display()))?;
            let train = layouts.iter().filter(|l| l.2 == Split::Train).count();
            println!("wrote {count} layouts ({train} train, {} test) to {}", count - train, a.out.display());
        }
        None => {
            let layout = congest_core::layout::synth_layout(&params)?;
            write(&a.out, &layout.to_json()?)?;
            println!("wrote {} ({} cells, {} nets)", a.out.display(), layout.n_cells(), layout.netlist().nets().len());
        }
    }
    m.config["params"] = config_json(&params);
    m.write(&[&a.out])
}

fn cmd_label(seed: u64, a: &LabelArgs) -> Result<()> {
    let mut m = RunManifest::new("label", seed, config_json(a));
    if let Some(dir) = &a.data {
        m.input(&dir.join(congest_core::train::INDEX_FILE))?;
        m.input(&dir.join("layouts"))?;
        let capacity = label_dir(dir, a.capacity).with_context(|| format!("labeling {}", dir.display()))?;
        println!("labeled {} with capacity {capacity}", dir.display());
        m.config["capacity_used"] = capacity.into();
        return m.write(&[&dir.join("labels"), &dir.join(congest_core::train::LABEL_INDEX_FILE)]);
    }
    let (Some(layout_path), Some(out)) = (&a.layout, &a.out) else {
        bail!("label needs --data DIR or --layout FILE --out FILE");
    };
    let layout = read_layout(layout_path)?;
    m.input(layout_path)?;
    let capacity = a.capacity.unwrap_or_else(|| capacity_quantile([&layout], DEFAULT_CAPACITY_QUANTILE));
    if !(capacity.is_finite() && capacity > 0.0) {
        bail!(congest_core::Error::InvalidConfig(format!("capacity {capacity} must be positive")));
    }
    write(out, &ten_bytes(&demand_map(&layout, capacity).bin_congestion)?)?;
    m.config["capacity_used"] = capacity.into();
    m.write(&[out])
}

fn cmd_features(seed: u64, a: &FeaturesArgs) -> Result<()> {
    let layout = read_layout(&a.layout)?;
    let mut m = RunManifest::new("features", seed, config_json(a));
    m.input(&a.layout)?;
    let scale = match &a.model {
        Some(p) => {
            m.input(p)?;
            load_model(p)?.scale
        }
        None => ChannelScale::for_grid(layout.grid()),
    };
    let mut buf = Vec::new();
    feature_map(&layout, &scale).write_ten(&mut buf)?;
    write(&a.out, &buf)?;
    m.write(&[&a.out])
}

fn cmd_train(seed: u64, a: &TrainArgs) -> Result<()> {
    let data = load_data(&a.data, None)?;
    let mut m = RunManifest::new("train", seed, config_json(a));
    m.input(&a.data)?;
    let cfg = TrainConfig {
        kind: a.model_kind,
        mode: match a.mode {
            ModeArg::Vanilla => TrainMode::Vanilla,
            ModeArg::Adversarial => TrainMode::Adversarial,
        },
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed,
        adv_fraction: a.adv_fraction,
        adv_steps: match a.adv_steps {
            StepsArg::Fast => AdvSteps::FastSingleStep,
            StepsArg::Pgd => AdvSteps::FullPgd { iterations: a.adv_iters, restarts: a.adv_restarts },
        },
        attack_mode: a.attack_mode,
        attack_budget: a.attack_budget,
    };
    let result = train(&data, &cfg)?;
    checkpoint::save(&result.model, &a.out).with_context(|| format!("saving checkpoint {}", a.out.display()))?;
    write_csv(&a.out.join("history.csv"), &result.history)?;
    if let Some(last) = result.history.last() {
        println!(
            "trained {} epochs: train bce {:.5}, test bce {:.5}, {} attacked samples",
            result.history.len(),
            last.train_loss,
            last.test_loss,
            result.attacked
        );
    }
    m.config["train"] = config_json(&cfg);
    m.write(&[&a.out])
}

fn cmd_predict(seed: u64, a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let layout = read_layout(&a.layout)?;
    let mut m = RunManifest::new("predict", seed, config_json(a));
    m.input(&a.model)?;
    m.input(&a.layout)?;
    let pred = model.predict(&layout)?;
    write(&a.out, &ten_bytes(&pred)?)?;
    println!("score {:.6}", congest_core::metrics::congestion_score(&pred));
    m.write(&[&a.out])
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    objective: f64,
}

fn cmd_attack(seed: u64, a: &AttackArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let layout = read_layout(&a.layout)?;
    let mut m = RunManifest::new("attack", seed, config_json(a));
    m.input(&a.model)?;
    m.input(&a.layout)?;
    let label = match &a.label {
        Some(p) => {
            m.input(p)?;
            Some(read_grid(p)?)
        }
        None => None,
    };
    let cfg = a.pgd.config(a.mode, a.budget, seed);
    let r = Attack::new(&layout, &model, label.as_ref(), cfg)?.run(None)?;
    write(&a.out, &r.perturbation.to_json())?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(t) = &a.trace {
        write_csv(t, r.trace.iter().enumerate().map(|(iteration, &objective)| TraceRow { iteration, objective }))?;
        outputs.push(t);
    }
    println!(
        "{} attack: objective {:.6} -> {:.6}, {} of {} cells moved, {} non-finite restarts",
        a.mode,
        r.clean_objective,
        r.objective,
        r.perturbation.n_moved(),
        r.perturbation.eps0,
        r.nonfinite_restarts
    );
    m.write(&outputs)
}

#[derive(Serialize)]
struct RecordRow<'a> {
    model: &'a str,
    layout_id: &'a str,
    attack: &'a str,
    budget: f64,
    score: f64,
    nrms: f64,
    ssim: f64,
}

fn cmd_eval(seed: u64, a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load_data(&a.data, a.layouts)?;
    let mut m = RunManifest::new("eval", seed, config_json(a));
    m.input(&a.model)?;
    m.input(&a.data)?;
    let name = a.model.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let attacks = standard_attacks(a.pgd.config(AttackMode::Score, 0.01, seed));
    let table = evaluate_table(&[(name, &model)], &data, &attacks)?;
    write_csv(
        &a.out,
        table.records.iter().map(|(model, r)| RecordRow {
            model,
            layout_id: &r.layout_id,
            attack: &r.mode,
            budget: r.budget,
            score: r.score,
            nrms: r.nrms,
            ssim: r.ssim,
        }),
    )?;
    m.write(&[&a.out])
}

#[derive(Serialize)]
struct CurveRow<'a> {
    model: &'a str,
    budget: f64,
    mean_score: f64,
}

fn cmd_curve(seed: u64, a: &CurveArgs) -> Result<()> {
    let data = load_data(&a.data, a.layouts)?;
    let mut m = RunManifest::new("curve", seed, config_json(a));
    m.input(&a.data)?;
    let layouts: Vec<Layout> = data.split(Split::Test).map(|s| s.layout.clone()).collect();
    let mut curves = Vec::new();
    for (name, path) in &a.models {
        let model = load_model(path)?;
        m.input(path)?;
        let curve = robustness_curve(&model, &layouts, &a.budgets, a.pgd.config(AttackMode::Score, 0.01, seed))?;
        println!("{name}: total variation {:.6}", total_variation(&curve));
        curves.push((name.clone(), curve));
    }
    write_csv(
        &a.out,
        curves.iter().flat_map(|(name, c)| {
            c.iter().map(move |p| CurveRow { model: name, budget: p.budget, mean_score: p.mean_score })
        }),
    )?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(svg_path) = &a.svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = curves
            .iter()
            .map(|(n, c)| (n.clone(), c.iter().map(|p| (p.budget, p.mean_score)).collect()))
            .collect();
        write(svg_path, svg::line_chart("Mean predicted score vs budget", "budget", "mean score", &series).as_bytes())?;
        outputs.push(svg_path);
    }
    m.write(&outputs)
}

#[derive(Serialize)]
struct HistRow<'a> {
    model: &'a str,
    attack: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

fn cmd_report(seed: u64, a: &ReportArgs) -> Result<()> {
    let data = load_data(&a.data, a.layouts)?;
    let mut m = RunManifest::new("report", seed, config_json(a));
    m.input(&a.data)?;
    let mut models = Vec::new();
    for (name, path) in &a.models {
        models.push((name.clone(), load_model(path)?));
        m.input(path)?;
    }
    let refs: Vec<(String, &Model)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let table = evaluate_table(&refs, &data, &standard_attacks(a.pgd.config(AttackMode::Score, 0.01, seed)))?;
    write_csv(&a.out, &table.rows)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<12} {:<10} {:>9} {:>9} {:>9} {:>9}", "model", "attack", "score", "nrms", "ssim", "bce")?;
    for r in &table.rows {
        writeln!(
            stdout,
            "{:<12} {:<10} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.model, r.attack, r.score, r.nrms, r.ssim, r.bce
        )?;
    }
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(h) = &a.hist {
        let hists = score_histograms(&table);
        let width = 1.0 / HISTOGRAM_BINS as f64;
        write_csv(
            h,
            hists.iter().flat_map(|(model, attack, counts)| {
                counts.iter().enumerate().map(move |(b, &count)| HistRow {
                    model,
                    attack,
                    bin_lo: b as f64 * width,
                    bin_hi: (b + 1) as f64 * width,
                    count,
                })
            }),
        )?;
        outputs.push(h);
    }
    m.write(&outputs)
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let layout = read_layout(&a.layout)?;
    let p = Perturbation::from_json(&read(&a.delta)?, layout.n_cells())
        .with_context(|| format!("parsing perturbation {}", a.delta.display()))?;
    let moved = p.n_moved();
    let attacked = layout
        .apply_perturbation(&p.delta, Some(p.eps0))
        .with_context(|| format!("applying {}", a.delta.display()))?;
    let r = invariance_check(&layout, &attacked);
    println!(
        "identical={} demand_identical={} moved_cells={moved} eps0={} moved_tiles={} changed_nets={}",
        r.identical,
        r.demand_identical,
        p.eps0,
        r.moved_tiles,
        r.changed_nets.len()
    );
    Ok(r.identical && r.demand_identical)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global()?;
    let seed = cli.seed;
    match &cli.command {
        Command::Gen(a) => cmd_gen(seed, a)?,
        Command::Label(a) => cmd_label(seed, a)?,
        Command::Features(a) => cmd_features(seed, a)?,
        Command::Train(a) => cmd_train(seed, a)?,
        Command::Predict(a) => cmd_predict(seed, a)?,
        Command::Attack(a) => cmd_attack(seed, a)?,
        Command::Eval(a) => cmd_eval(seed, a)?,
        Command::Curve(a) => cmd_curve(seed, a)?,
        Command::Report(a) => cmd_report(seed, a)?,
        Command::Verify(a) => {
            if !cmd_verify(a)? {
                return Ok(ExitCode::from(EXIT_NOT_IDENTICAL));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use congest_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::IndexOutOfRange { .. } => "index_out_of_range",
                E::ShapeMismatch { .. } => "shape_mismatch",
                E::InvalidLayout(_) => "invalid_layout",
                E::InvalidPerturbation { .. } => "invalid_perturbation",
                E::InvalidConfig(_) => "invalid_config",
                E::MacroPacking { .. } => "macro_packing",
                E::MalformedTensor(_) => "malformed_tensor",
                E::MalformedCheckpoint(_) => "malformed_checkpoint",
                E::Diverged { .. } => "diverged",
                E::Json(_) => "malformed_json",
                E::Io(_) => "io",
            };
        }
        if cause.is::<serde_json::Error>() {
            return "malformed_json";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            let report = serde_json::json!({
                "error": {
                    "kind": error_kind(&err),
                    "message": err.to_string(),
                    "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
