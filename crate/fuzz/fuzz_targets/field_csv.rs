#![no_main]

use decohere::grids::{read_field_csv, write_field_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok((field, time)) = read_field_csv(data) else {
        return;
    };
    // anything accepted must survive a write/read cycle
    let mut buf = Vec::new();
    write_field_csv(&field, time, &[], &mut buf).unwrap();
    let (again, t2) = read_field_csv(buf.as_slice()).unwrap();
    assert_eq!(again.values.dim(), field.values.dim());
    assert_eq!(again.label, field.label);
    assert_eq!(again.rep, field.rep);
    assert!(t2 == time || (t2.is_nan() && time.is_nan()));
});
