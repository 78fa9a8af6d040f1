#![no_main]

use chrono::{TimeZone, Utc};
use ivstat::survey::{load_survey, SubmissionPayload, SurveyDefinition};
use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

fn survey() -> &'static SurveyDefinition {
    static SURVEY: OnceLock<SurveyDefinition> = OnceLock::new();
    SURVEY.get_or_init(|| {
        load_survey(
            r#"{"survey_id":"fuzz","title":"","questions":[
                {"id":"cat","section":"reproduce","scale":{"min":0,"max":40,"left_label":"","right_label":"","ticks":[]}},
                {"id":"m","section":"marbles","scale":{"min":0,"max":7,"left_label":"","right_label":"","ticks":[]}}]}"#,
        )
        .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(payload) = SubmissionPayload::from_json(text) else { return };
    let at = Utc.timestamp_opt(0, 0).unwrap();
    if let Ok(record) = payload.ingest(survey(), at) {
        record.validate(survey()).expect("ingested record must validate");
        assert!(record.interval_norm.lo >= 0.0 && record.interval_norm.hi <= 100.0);
    }
});
