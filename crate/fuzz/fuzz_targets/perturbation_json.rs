#![no_main]

use congest_core::perturb::Perturbation;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&n, json)) = data.split_first() else { return };
    let n = n as usize;
    let Ok(p) = Perturbation::from_json(json, n) else { return };
    assert_eq!(p.delta.len(), n);
    assert!(p.n_moved() <= p.eps0);
    let back = Perturbation::from_json(&p.to_json(), n).expect("serialized perturbations parse");
    assert_eq!(back, p);
});
