#![no_main]

use libfuzzer_sys::fuzz_target;
use stablemix::measure::{parse_measure, validate};

fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else { return };
    let dim = 1 + (first & 1) as usize;
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(m) = parse_measure(text, dim) {
        // accepted measures are valid
        assert!(validate(&m).is_empty());
        assert!(m.total_mass() > 0.0 && m.total_mass().is_finite());
    }
});
