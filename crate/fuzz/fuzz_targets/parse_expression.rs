#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_holonomy::family::{parse_expression, Scope};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let names: Vec<String> = ["re_z", "im_z", "c"].iter().map(|s| s.to_string()).collect();
    if let Ok(expr) = parse_expression(text, &Scope::new(&names)) {
        let _ = expr.eval(&[0.5, -1.0, 2.0]);
    }
});
