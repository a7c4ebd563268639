#![no_main]

use decohere::observables::{read_series_csv, write_series_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(series) = read_series_csv(data) else {
        return;
    };
    assert!(series.times.windows(2).all(|w| w[1] > w[0]));
    let mut buf = Vec::new();
    write_series_csv(&series, &[], &mut buf).unwrap();
    let again = read_series_csv(buf.as_slice()).unwrap();
    assert_eq!(again.times, series.times);
    assert_eq!(again.label, series.label);
});
