#![no_main]

use ivstat::mixed::SimulationParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(params) = SimulationParams::from_json(text) else { return };
    let (rows, _) = params.simulate(2, 0).expect("validated parameters must simulate");
    assert_eq!(rows.len(), 2 * params.items().len());
});
