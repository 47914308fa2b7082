#![no_main]

use congest_core::tensor::{read_ten, write_ten, Grid};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((dims, values)) = read_ten(data) {
        assert_eq!(dims.iter().product::<usize>(), values.len());
        let mut out = Vec::new();
        write_ten(&mut out, dims, &values).unwrap();
        let (d2, v2) = read_ten(&out).unwrap();
        assert_eq!(d2, dims);
        assert!(v2.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    if let Ok(g) = Grid::read_ten(data) {
        let mut out = Vec::new();
        g.write_ten(&mut out).unwrap();
        assert_eq!(Grid::read_ten(&out).unwrap().w(), g.w());
    }
});
