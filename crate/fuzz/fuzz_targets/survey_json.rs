#![no_main]

use ivstat::survey::load_survey;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(survey) = load_survey(text) {
        let again = load_survey(&survey.to_json().unwrap()).expect("serialized survey must reload");
        assert_eq!(survey, again);
    }
});
