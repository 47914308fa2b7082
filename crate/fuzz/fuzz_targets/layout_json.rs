#![no_main]

use congest_core::layout::Layout;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(layout) = Layout::from_json(data) else { return };
    let bytes = layout.to_json().expect("valid layouts serialize");
    let back = Layout::from_json(&bytes).expect("serialized layouts parse");
    assert_eq!(back.coords(), layout.coords());
    assert_eq!(back.grid(), layout.grid());
    assert_eq!(back.to_json().unwrap(), bytes);
});
