#![no_main]

use ivstat::survey::{export_long, DesignTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(design) = DesignTable::from_csv(data) else { return };
    for k in 0..design.factors.len() {
        let _ = design.factor_levels(k);
    }
    for (q, _) in &design.entries {
        assert!(design.levels(q).is_some());
    }
    assert!(export_long(&[], &design).rows.is_empty());
});
