use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use ivstat::mixed::{write_rows, SimulationParams};
use ivstat::survey::{
    load_survey, marble_benchmark, marble_fixture, DesignTable, GroundTruth, ResponseRecord, ResponseStore,
    SurveyDefinition,
};
use ivstat::Interval;
use ivstat_cli::pipeline::{run_pipeline, Analysis, PipelineConfig};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn survey() -> SurveyDefinition {
    load_survey(&fs::read_to_string(data("survey.json")).unwrap()).unwrap()
}

/// Deterministic synthetic answers for every question.
fn write_log(path: &Path, respondents: usize) {
    let s = survey();
    let store = ResponseStore::open(path).unwrap();
    for r in 0..respondents {
        for (k, q) in s.questions.iter().enumerate() {
            let span = q.scale.max - q.scale.min;
            let centre = q.scale.min + span * (((r * 7 + k * 3) % 10) as f64 + 0.5) / 10.0;
            let half = span * (((r + k) % 4) as f64) / 20.0;
            let iv = Interval::new(q.scale.clamp(centre - half), q.scale.clamp(centre + half)).unwrap();
            let at = Utc.timestamp_opt(1_700_000_000 + (r * 100 + k) as i64, 0).unwrap();
            let rec = ResponseRecord::from_interval(&s, &format!("r{r:02}"), &q.id, iv, at).unwrap();
            store.append(&s, &rec).unwrap();
        }
    }
}

fn config(dir: &Path, analyses: Vec<Analysis>) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(dir.join("log.jsonl"), dir.join("out"), 7);
    cfg.survey = Some(data("survey.json"));
    cfg.truth = Some(data("truth.csv"));
    cfg.designs = vec![data("specificity_design.csv"), data("vehicles_design.csv")];
    cfg.analyses = analyses;
    cfg.bootstrap_resamples = 200;
    cfg.permutation_resamples = 200;
    cfg
}

#[test]
fn demo_data_matches_library_fixtures() {
    let s = survey();
    let truth = GroundTruth::from_csv(fs::File::open(data("truth.csv")).unwrap()).unwrap();
    truth.validate(&s).unwrap();
    let design = DesignTable::from_csv(fs::File::open(data("marbles_design.csv")).unwrap()).unwrap();
    assert_eq!(design.factors, ["xB", "xH", "xD"]);
    for (id, stim) in marble_fixture() {
        assert_eq!(truth.intervals[&id], marble_benchmark(&stim), "{id}");
        let c = stim.covariates();
        let levels: Vec<f64> = design.levels(&id).unwrap().iter().map(|v| v.parse().unwrap()).collect();
        assert_eq!(levels, vec![c.blue, c.hidden, c.discrepancy], "{id}");
    }
    for name in ["midpoint_params.json", "width_params.json"] {
        SimulationParams::from_json(&fs::read_to_string(data(name)).unwrap()).unwrap();
    }
}

#[test]
fn iaa_writes_membership_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("log.jsonl"), 40);
    let manifest = run_pipeline(&config(dir.path(), vec![Analysis::Iaa])).unwrap();
    let out = dir.path().join("out");
    let membership = fs::read_to_string(out.join("iaa/cat_membership.csv")).unwrap();
    assert!(membership.starts_with("x,membership\n"));
    assert_eq!(membership.lines().count(), 202);
    let stack = fs::read_to_string(out.join("iaa/cat_intervals.svg")).unwrap();
    assert_eq!(stack.matches("<rect").count() + stack.matches("class=\"tick\"").count(), 40);
    assert!(out.join("iaa/cat_iaa.svg").exists());
    let n_questions = survey().questions.len();
    assert_eq!(manifest.outputs.len(), 3 * n_questions);
    let listed: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(listed["outputs"].as_array().unwrap().len(), 3 * n_questions);
    assert_eq!(listed["seed"], 7);
}

#[test]
fn anova_tables_for_one_and_two_factor_designs() {
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("log.jsonl"), 20);
    run_pipeline(&config(dir.path(), vec![Analysis::Anova, Analysis::McAnova])).unwrap();
    let out = dir.path().join("out");
    let one = fs::read_to_string(out.join("anova/specificity_design_midpoint.csv")).unwrap();
    assert!(one.starts_with("effect,F,df1,df2,p,eta_p_sq,epsilon\nspecificity,"), "{one}");
    let two = fs::read_to_string(out.join("anova/vehicles_design_width.csv")).unwrap();
    for effect in ["\nterm,", "\nimage,", "\nterm:image,"] {
        assert!(two.contains(effect), "{two}");
    }
    let mc = fs::read_to_string(out.join("mc_anova/vehicles_design_midpoint.csv")).unwrap();
    assert_eq!(mc.lines().count(), 4);
    assert!(mc.lines().nth(1).unwrap().ends_with(",200,7"));
}

#[test]
fn results_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("log.jsonl"), 15);
    let all = vec![Analysis::Iaa, Analysis::Corr, Analysis::Anova, Analysis::McAnova];
    let mut a = config(dir.path(), all.clone());
    a.out = dir.path().join("a");
    let mut b = config(dir.path(), all);
    b.out = dir.path().join("b");
    let ma = run_pipeline(&a).unwrap();
    run_pipeline(&b).unwrap();
    for entry in &ma.outputs {
        assert_eq!(
            fs::read(a.out.join(&entry.path)).unwrap(),
            fs::read(b.out.join(&entry.path)).unwrap(),
            "{}",
            entry.path
        );
    }
    assert_eq!(fs::read(a.out.join("manifest.json")).unwrap(), fs::read(b.out.join("manifest.json")).unwrap());
}

#[test]
fn corr_reports_per_respondent_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("log.jsonl"), 10);
    let manifest = run_pipeline(&config(dir.path(), vec![Analysis::Corr])).unwrap();
    let out = dir.path().join("out");
    let table = fs::read_to_string(out.join("corr/respondents.csv")).unwrap();
    assert_eq!(table.lines().count(), 11);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("corr/summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["measure"], "midpoint");
    assert_eq!(summary[0]["r_test"]["resamples"], 200);
    let entry = manifest.outputs.iter().find(|o| o.path == "corr/summary.json").unwrap();
    assert_eq!(entry.resamples, Some(200));
}

#[test]
fn mixed_from_simulated_rows_and_from_log() {
    let dir = tempfile::tempdir().unwrap();
    let params = SimulationParams::from_json(&fs::read_to_string(data("midpoint_params.json")).unwrap()).unwrap();
    let (rows, _) = params.simulate(40, 11).unwrap();
    let csv = dir.path().join("sim.csv");
    write_rows(fs::File::create(&csv).unwrap(), &rows).unwrap();
    let mut cfg = PipelineConfig::new(&csv, dir.path().join("out"), 3);
    cfg.analyses = vec![Analysis::Mixed];
    cfg.vc_replicates = 20;
    run_pipeline(&cfg).unwrap();
    let table = fs::read_to_string(dir.path().join("out/mixed/response.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("term,estimate,se,ci_lo,ci_hi,t,p"));
    let blue: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(blue[0], "Blue Visible");
    let (lo, hi): (f64, f64) = (blue[3].parse().unwrap(), blue[4].parse().unwrap());
    assert!(lo <= 0.979 && 0.979 <= hi, "{lo} {hi}");
    assert!(table.contains("\nNumber of Observations,720\n"));

    write_log(&dir.path().join("log.jsonl"), 12);
    let mut cfg = config(dir.path(), vec![Analysis::Mixed]);
    cfg.designs = vec![data("marbles_design.csv")];
    cfg.out = dir.path().join("from_log");
    run_pipeline(&cfg).unwrap();
    for name in ["midpoint.csv", "width.csv", "midpoint_fit.json"] {
        assert!(cfg.out.join("mixed").join(name).exists(), "{name}");
    }
}

#[test]
fn configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_log(&dir.path().join("log.jsonl"), 3);
    let mut cfg = config(dir.path(), vec![Analysis::Corr]);
    cfg.truth = None;
    assert!(run_pipeline(&cfg).unwrap_err().to_string().contains("truth"));
    let mut cfg = config(dir.path(), vec![Analysis::Anova]);
    cfg.designs.clear();
    assert!(run_pipeline(&cfg).is_err());
    let mut cfg = config(dir.path(), vec![Analysis::Iaa]);
    cfg.bootstrap_resamples = 0;
    assert!(run_pipeline(&cfg).is_err());
    assert!(run_pipeline(&config(dir.path(), vec![])).is_err());

    let clash = dir.path().join("clash.csv");
    fs::write(&clash, "question,term\ncars_image1,cars\nvehicles_image1,cars\n").unwrap();
    let mut cfg = config(dir.path(), vec![Analysis::Anova]);
    cfg.designs = vec![clash];
    assert!(run_pipeline(&cfg).unwrap_err().to_string().contains("same design cell"));
}
