#![no_main]

use ivstat::mixed::{read_rows, write_rows, MixedModelSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_rows(data) else { return };
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows).unwrap();
    assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    if let Ok(spec) = MixedModelSpec::from_rows(&rows) {
        assert_eq!(spec.n_obs(), rows.len());
    }
});
