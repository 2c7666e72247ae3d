#![no_main]

use libfuzzer_sys::fuzz_target;
use stablemix::io::{field_to_string, parse_field_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = parse_field_csv(text) else { return };
    let Ok(field) = table.clone().into_box_field() else { return };
    let again = parse_field_csv(&field_to_string(&field)).expect("written fields parse");
    assert_eq!(again.values, table.values);
});
