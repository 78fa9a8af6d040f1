#![no_main]

use ivstat::survey::GroundTruth;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(truth) = GroundTruth::from_csv(data) else { return };
    let mut buf = Vec::new();
    truth.write_csv(&mut buf).unwrap();
    assert_eq!(GroundTruth::from_csv(buf.as_slice()).unwrap(), truth);
});
