#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_holonomy::holonomy::{discretize, PathSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<PathSpec>(data) else { return };
    let params: Vec<String> = ["re_z", "im_z", "c"].iter().map(|s| s.to_string()).collect();
    if let Ok(path) = discretize(&spec, &params, 16) {
        assert!(path.len() >= 2);
        if path.is_loop() {
            assert_eq!(path.first(), path.last());
        }
    }
});
