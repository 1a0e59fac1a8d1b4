#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_holonomy::holonomy::Permutation;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for n in 1..=12 {
        if let Ok(p) = Permutation::parse_cycles(text, n) {
            let again = Permutation::parse_cycles(&p.to_string(), n).expect("printed form parses");
            assert_eq!(again, p);
        }
    }
    if let Ok(p) = text.parse::<Permutation>() {
        assert_eq!(p.inverse().inverse(), p);
    }
});
