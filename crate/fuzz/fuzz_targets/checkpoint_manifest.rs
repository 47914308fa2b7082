#![no_main]

use congest_core::predictor::checkpoint::{assemble, Manifest};
use congest_core::tensor::{write_ten, Tensor};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = Manifest::parse(data) else { return };
    // hand back a zero tensor of the declared shape for each file, in order
    let mut next = 0;
    let model = assemble(&m, |_| {
        let t = Tensor::zeros(&m.tensors[next].shape);
        next += 1;
        let mut out = Vec::new();
        write_ten(&mut out, t.ten_dims(), t.data())?;
        Ok(out)
    });
    assert!(model.is_ok(), "{model:?}");
});
