#![no_main]

use ivstat::survey::{parse_log, parse_log_line, retain_latest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_log(data) else { return };
    for r in &records {
        let line = serde_json::to_string(r).unwrap();
        assert_eq!(&parse_log_line(&line).unwrap(), r);
    }
    let kept = retain_latest(records.clone());
    assert!(kept.len() <= records.len());
});
