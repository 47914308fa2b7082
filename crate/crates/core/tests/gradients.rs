mod common;

use common::{check_instance, rel_err, small_layout, H};
use congest_core::features::FeatureMap;
use congest_core::predictor::fcn::{fcn_backward, fcn_forward, fcn_forward_tape, FcnParams};
use congest_core::predictor::gcn::{gcn_backward, gcn_forward, GcnParams};
use congest_core::predictor::{Model, ModelKind, Objective, Parameters, Params};
use congest_core::rng;
use congest_core::tensor::Grid;
use rand::Rng;

#[test]
fn directional_checks_on_random_instances() {
    let mut done = 0;
    for seed in 0..12 {
        if let Some(e) = check_instance(seed) {
            assert!(e.max() < 1e-5, "seed {seed}: {e:?}");
            done += 1;
        }
    }
    assert!(done >= 8, "only {done} breakpoint-free instances");
}

fn random_map(seed: u64, w: usize, h: usize) -> FeatureMap {
    let mut r = rng::derive(seed, 42, 0);
    let mut g = || Grid::from_fn(w, h, |_, _| r.gen_range(0.0..1.0));
    FeatureMap { rudy: g(), pin_rudy: g(), macro_region: g() }
}

/// Coordinate-wise central differences on a sample of FCN parameters.
#[test]
fn fcn_param_entries_match_central_differences() {
    let m = random_map(5, 16, 16);
    let p = FcnParams::init(&mut rng::derive(5, rng::purpose::INIT, 0));
    let mut r = rng::derive(5, 43, 0);
    let og = Grid::from_fn(16, 16, |_, _| r.gen_range(-1.0..1.0));
    let (gp, _) = fcn_backward(&m, &p, &og).unwrap();
    let base_pattern = fcn_forward_tape(&m, &p).unwrap().pattern();
    let inner = |p: &FcnParams| fcn_forward(&m, p).unwrap().dot(&og);
    let grads = gp.flat();
    let mut checked = 0;
    for k in (0..grads.len()).step_by(37) {
        let bump = |t: f64| {
            let mut q = p.clone();
            let mut i = k;
            for tensor in q.tensors_mut() {
                if i < tensor.len() {
                    tensor.data_mut()[i] += t;
                    break;
                }
                i -= tensor.len();
            }
            q
        };
        let (a, b) = (bump(H), bump(-H));
        if fcn_forward_tape(&m, &a).unwrap().pattern() != base_pattern
            || fcn_forward_tape(&m, &b).unwrap().pattern() != base_pattern
        {
            continue;
        }
        let fd = (inner(&a) - inner(&b)) / (2.0 * H);
        assert!(rel_err(fd, grads[k]) < 1e-6 || (fd - grads[k]).abs() < 1e-12, "param {k}: fd {fd} vs {}", grads[k]);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn fcn_input_entries_match_central_differences() {
    let m = random_map(6, 16, 16);
    let p = FcnParams::init(&mut rng::derive(6, rng::purpose::INIT, 0));
    let mut r = rng::derive(6, 43, 0);
    let og = Grid::from_fn(16, 16, |_, _| r.gen_range(-1.0..1.0));
    let (_, gi) = fcn_backward(&m, &p, &og).unwrap();
    let base = m.to_chw();
    let base_pattern = fcn_forward_tape(&m, &p).unwrap().pattern();
    for k in (0..base.len()).step_by(11) {
        let at = |t: f64| {
            let mut d = base.clone();
            d[k] += t;
            FeatureMap::from_chw(16, 16, &d).unwrap()
        };
        let (a, b) = (at(H), at(-H));
        if fcn_forward_tape(&a, &p).unwrap().pattern() != base_pattern
            || fcn_forward_tape(&b, &p).unwrap().pattern() != base_pattern
        {
            continue;
        }
        let fd = (fcn_forward(&a, &p).unwrap().dot(&og) - fcn_forward(&b, &p).unwrap().dot(&og)) / (2.0 * H);
        let an = gi[k / 256].data()[k % 256];
        assert!(rel_err(fd, an) < 1e-6 || (fd - an).abs() < 1e-12, "input {k}: fd {fd} vs {an}");
    }
}

#[test]
fn zero_weight_models_have_zero_input_gradient() {
    let l = small_layout(3);
    for kind in [ModelKind::Fcn, ModelKind::Gcn] {
        let model = Model { params: Params::zeros(kind), scale: Model::init(kind, l.grid(), 0).scale };
        let g = model.input_gradient(&l, Objective::Score).unwrap();
        assert!(g.iter().all(|r| r == &[0.0, 0.0]), "{kind:?}");
    }
}

#[test]
fn score_gradient_is_two_p_times_jacobian() {
    // d/dM (1/HW)|f|^2 = (2/HW) f . df/dM, assembled from the plain backward pass
    let m = random_map(8, 8, 8);
    let p = FcnParams::init(&mut rng::derive(8, rng::purpose::INIT, 0));
    let f = fcn_forward(&m, &p).unwrap();
    let og = f.scaled(2.0 / 64.0);
    let (_, via_backward) = fcn_backward(&m, &p, &og).unwrap();
    let direct = congest_core::predictor::fcn_map_gradient(&p, &m, Objective::Score).unwrap();
    for (a, b) in via_backward.iter().zip(&direct) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-15 + 1e-12 * y.abs());
        }
    }
}

#[test]
fn gcn_backward_matches_evaluate() {
    let l = small_layout(4);
    let p = GcnParams::init(&mut rng::derive(4, rng::purpose::INIT, 0));
    let pred = gcn_forward(&l, &p);
    let og = pred.scaled(2.0 / 256.0);
    let (gp, gc) = gcn_backward(&l, &p, &og);
    let model = Model { params: Params::Gcn(p), scale: Model::init(ModelKind::Gcn, l.grid(), 0).scale };
    let e = model
        .evaluate(&l, None, Objective::Score, congest_core::predictor::Want { params: true, coords: true })
        .unwrap();
    assert_eq!(e.param_grad.unwrap(), Params::Gcn(gp));
    assert_eq!(e.coord_grad.unwrap(), gc);
}
