#![no_main]

use libfuzzer_sys::fuzz_target;
use stablemix::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config_str(text, None) {
        assert!(cfg.s > 0.0 && cfg.s < 1.0);
        let _ = cfg.canonical();
    }
});
