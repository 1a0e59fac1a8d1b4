#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // anchors run discriminant scans; keep iterations cheap
    if text.contains("anchors") || text.len() > 4096 {
        return;
    }
    let _ = holonomy_cli::config::load(text);
});
