#![allow(dead_code)]

use congest_core::features::{feature_map, feature_vjp, net_bbox, ChannelScale, FeatureMap};
use congest_core::layout::{synth_layout, MacroSpec, SynthParams};
use congest_core::layout::{GCellGrid, Layout};
use congest_core::predictor::fcn::{fcn_forward_tape, FcnParams};
use congest_core::predictor::gcn::{gcn_backward, gcn_forward, gcn_pattern};
use congest_core::predictor::{
    fcn_map_gradient, Model, ModelKind, Objective, Parameters, Params, Want,
};
use congest_core::tensor::Grid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub const H: f64 = 1e-5;

pub fn small_layout(seed: u64) -> Layout {
    synth_layout(&SynthParams {
        seed,
        n_cells: 200,
        n_nets: 300,
        grid_w: 16,
        grid_h: 16,
        macros: MacroSpec { count: 1, min_size: 0.1, max_size: 0.2 },
        ..SynthParams::default()
    })
    .expect("synthetic layout")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

fn unit(rng: &mut ChaCha8Rng, n: usize, mask: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| if mask(i) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Grid {
    Grid::from_fn(w, h, |_, _| rng.gen_range(0.0..1.0))
}

fn with_params(base: &Params, v: &[f64], t: f64) -> Params {
    let mut p = base.clone();
    let mut k = 0;
    for tensor in p.tensors_mut() {
        for x in tensor.data_mut() {
            *x += t * v[k];
            k += 1;
        }
    }
    p
}

/// Everything the features depend on discretely: pin tiles, extremal pins
/// and whether each span exceeds the tile pitch.
pub fn feature_pattern(l: &Layout) -> Vec<usize> {
    let g = l.grid();
    let mut out = Vec::new();
    for (e, pins) in l.netlist().nets().iter().enumerate() {
        for p in 0..pins.len() {
            let (x, y) = l.pin_position(e, p);
            let (a, b) = g.tile_of(x, y);
            out.extend([a, b]);
        }
        let b = net_bbox(l, e);
        out.extend([b.arg_x_min, b.arg_x_max, b.arg_y_min, b.arg_y_max]);
        out.extend([(b.span_x() > g.pitch_x()) as usize, (b.span_y() > g.pitch_y()) as usize]);
    }
    for c in l.coords() {
        let (a, b) = g.tile_of(c[0], c[1]);
        out.extend([a, b]);
    }
    out
}

/// Zero biases leave units fed by empty regions sitting exactly on their
/// kink; random biases move them off it.
fn with_random_biases(mut m: Model, rng: &mut ChaCha8Rng) -> Model {
    for t in m.params.tensors_mut() {
        if t.shape().len() == 1 {
            t.data_mut().iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
        }
    }
    m
}

fn shifted(l: &Layout, v: &[f64], t: f64) -> Option<Layout> {
    let coords = l.coords().iter().enumerate().map(|(i, c)| [c[0] + t * v[2 * i], c[1] + t * v[2 * i + 1]]).collect();
    l.with_coords(coords).ok()
}

/// Random coordinate direction over non-macro cells whose central
/// difference stays clear of every feature breakpoint.
fn coord_direction(l: &Layout, rng: &mut ChaCha8Rng, extra: impl Fn(&Layout) -> Vec<usize>) -> Option<Vec<f64>> {
    let cells = l.netlist().cells();
    for _ in 0..20 {
        let v = unit(rng, 2 * l.n_cells(), |k| !cells[k / 2].is_macro);
        let (Some(a), Some(b)) = (shifted(l, &v, H), shifted(l, &v, -H)) else { continue };
        let p0 = (feature_pattern(l), extra(l));
        if (feature_pattern(&a), extra(&a)) == p0 && (feature_pattern(&b), extra(&b)) == p0 {
            return Some(v);
        }
    }
    None
}

fn dot_coords(g: &[[f64; 2]], v: &[f64]) -> f64 {
    g.iter().enumerate().map(|(i, r)| r[0] * v[2 * i] + r[1] * v[2 * i + 1]).sum()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GradErrors {
    pub fcn_params: f64,
    pub fcn_map: f64,
    pub fcn_coords: f64,
    pub gcn_params: f64,
    pub gcn_coords: f64,
    pub feature_vjp: f64,
}

impl GradErrors {
    pub fn max(&self) -> f64 {
        [self.fcn_params, self.fcn_map, self.fcn_coords, self.gcn_params, self.gcn_coords, self.feature_vjp]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Directional finite-difference checks of every gradient path on one
/// random 16x16 instance. `None` when no breakpoint-free direction turned up.
pub fn check_instance(seed: u64) -> Option<GradErrors> {
    let l = small_layout(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let (w, h) = (l.grid().w(), l.grid().h());
    let label = random_grid(&mut rng, w, h);
    let mut out = GradErrors::default();

    // feature adjoint alone
    let scale = ChannelScale::for_grid(l.grid());
    let gbar = [random_grid(&mut rng, w, h), random_grid(&mut rng, w, h), random_grid(&mut rng, w, h)];
    let inner = |l: &Layout| {
        let m = feature_map(l, &scale);
        m.channels().iter().zip(&gbar).map(|(a, b)| a.dot(b)).sum::<f64>()
    };
    let v = coord_direction(&l, &mut rng, |_| Vec::new())?;
    let fd = (inner(&shifted(&l, &v, H)?) - inner(&shifted(&l, &v, -H)?)) / (2.0 * H);
    out.feature_vjp = rel_err(fd, dot_coords(&feature_vjp(&l, [&gbar[0], &gbar[1], &gbar[2]], &scale), &v));

    // FCN
    let fcn = with_random_biases(Model::init(ModelKind::Fcn, l.grid(), seed), &mut rng);
    let Params::Fcn(fp) = &fcn.params else { unreachable!() };
    let m = fcn.features(&l);
    let e = fcn.evaluate(&l, Some(&m), Objective::Bce(&label), Want { params: true, coords: false }).ok()?;
    let pg = e.param_grad?.flat();
    let v = unit(&mut rng, pg.len(), |_| true);
    let at = |t: f64| {
        let model = Model { params: with_params(&fcn.params, &v, t), scale: fcn.scale };
        model.evaluate(&l, Some(&m), Objective::Bce(&label), Want::default()).unwrap().value
    };
    let pat = |t: f64| {
        let Params::Fcn(p) = with_params(&fcn.params, &v, t) else { unreachable!() };
        fcn_forward_tape(&m, &p).unwrap().pattern()
    };
    if pat(H) != pat(0.0) || pat(-H) != pat(0.0) {
        return None;
    }
    out.fcn_params = rel_err((at(H) - at(-H)) / (2.0 * H), pg.iter().zip(&v).map(|(a, b)| a * b).sum());

    let gm = fcn_map_gradient(fp, &m, Objective::Score).ok()?;
    let gm: Vec<f64> = gm.iter().flat_map(|g| g.data().iter().copied()).collect();
    let v = unit(&mut rng, gm.len(), |_| true);
    let map_at = |t: f64| {
        let d: Vec<f64> = m.to_chw().iter().zip(&v).map(|(a, b)| a + t * b).collect();
        FeatureMap::from_chw(w, h, &d).unwrap()
    };
    let score_at = |t: f64| congest_core::predictor::congestion_score(&fcn_forward_tape(&map_at(t), fp).unwrap().prob);
    let mpat = |t: f64| fcn_forward_tape(&map_at(t), fp).unwrap().pattern();
    if mpat(H) != mpat(0.0) || mpat(-H) != mpat(0.0) {
        return None;
    }
    out.fcn_map = rel_err((score_at(H) - score_at(-H)) / (2.0 * H), gm.iter().zip(&v).map(|(a, b)| a * b).sum());

    let fp2 = fp.clone();
    let sc = fcn.scale;
    let v = coord_direction(&l, &mut rng, move |l| {
        let t = fcn_forward_tape(&feature_map(l, &sc), &fp2).unwrap();
        t.pattern().into_iter().map(usize::from).collect()
    })?;
    let g = fcn.input_gradient(&l, Objective::Score).ok()?;
    let s = |l: &Layout| congest_core::predictor::congestion_score(&fcn.predict(l).unwrap());
    let fd = (s(&shifted(&l, &v, H)?) - s(&shifted(&l, &v, -H)?)) / (2.0 * H);
    out.fcn_coords = rel_err(fd, dot_coords(&g, &v));

    // GCN
    let gcn = with_random_biases(Model::init(ModelKind::Gcn, l.grid(), seed), &mut rng);
    // the mean-BCE value is too small for a clean central difference, so the
    // parameter path is checked through a random bin cotangent instead
    let Params::Gcn(gp0) = &gcn.params else { unreachable!() };
    let og = Grid::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0));
    let pg = Params::Gcn(gcn_backward(&l, gp0, &og).0).flat();
    let v = unit(&mut rng, pg.len(), |_| true);
    let at = |t: f64| {
        let Params::Gcn(p) = with_params(&gcn.params, &v, t) else { unreachable!() };
        gcn_forward(&l, &p).dot(&og)
    };
    let gpat = |t: f64| {
        let Params::Gcn(p) = with_params(&gcn.params, &v, t) else { unreachable!() };
        gcn_pattern(&l, &p)
    };
    if gpat(H) != gpat(0.0) || gpat(-H) != gpat(0.0) {
        return None;
    }
    out.gcn_params = rel_err((at(H) - at(-H)) / (2.0 * H), pg.iter().zip(&v).map(|(a, b)| a * b).sum());

    let Params::Gcn(gp) = gcn.params.clone() else { unreachable!() };
    let v = coord_direction(&l, &mut rng, move |l| gcn_pattern(l, &gp))?;
    let g = gcn.input_gradient(&l, Objective::Score).ok()?;
    let s = |l: &Layout| congest_core::predictor::congestion_score(&gcn.predict(l).unwrap());
    let fd = (s(&shifted(&l, &v, H)?) - s(&shifted(&l, &v, -H)?)) / (2.0 * H);
    out.gcn_coords = rel_err(fd, dot_coords(&g, &v));
    Some(out)
}

pub fn zero_fcn() -> FcnParams {
    FcnParams::zeros()
}

pub fn grid16() -> GCellGrid {
    GCellGrid::new(16, 16).unwrap()
}
