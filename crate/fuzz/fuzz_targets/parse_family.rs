#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_holonomy::family::{parse_family, ParameterPoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = parse_family(text) {
        let x = ParameterPoint::new(vec![0.25; f.params().len()]);
        if let Ok(m) = f.evaluate(&x) {
            assert_eq!(m.dim(), f.dim());
        }
    }
});
