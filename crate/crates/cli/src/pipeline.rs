//! Offline analysis over a response log.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use ivstat::anova::{mc_anova, rm_anova, RmDesign};
use ivstat::iaa::{build_agreement, discretize, round_to_integers, write_samples};
use ivstat::mixed::{self, read_rows, rows_from_export, variance_component_intervals, MixedModelSpec, MixedRow};
use ivstat::plot::{plot_iaa_svg, plot_intervals_svg, PlotSpec, PlotStyle};
use ivstat::stats::{agreement_metrics, bootstrap_ci_mean, bootstrap_one_sample_t, constant_sample_limit, TestResult};
use ivstat::survey::{
    export_long, read_log, retain_latest, DesignTable, GroundTruth, LongExport, Measure, ResponseRecord,
    SurveyDefinition,
};
use ivstat::{Error, Interval, ScaleSpec};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Iaa,
    Corr,
    Anova,
    McAnova,
    Mixed,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Iaa => "iaa",
            Analysis::Corr => "corr",
            Analysis::Anova => "anova",
            Analysis::McAnova => "mc-anova",
            Analysis::Mixed => "mixed",
        }
    }
}

impl FromStr for Analysis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "iaa" => Analysis::Iaa,
            "corr" => Analysis::Corr,
            "anova" => Analysis::Anova,
            "mc-anova" => Analysis::McAnova,
            "mixed" => Analysis::Mixed,
            other => bail!("unknown analysis `{other}`"),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub survey: Option<PathBuf>,
    /// JSON-lines response log, or for `mixed` alone a model-row CSV.
    pub responses: PathBuf,
    pub truth: Option<PathBuf>,
    pub designs: Vec<PathBuf>,
    pub analyses: Vec<Analysis>,
    pub bootstrap_resamples: usize,
    pub permutation_resamples: usize,
    /// Parametric bootstrap replicates for variance-component intervals; 0 skips them.
    pub vc_replicates: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Round normalised intervals to integers before aggregation.
    pub round: bool,
}

impl PipelineConfig {
    pub fn new(responses: impl Into<PathBuf>, out: impl Into<PathBuf>, seed: u64) -> Self {
        PipelineConfig {
            survey: None,
            responses: responses.into(),
            truth: None,
            designs: Vec::new(),
            analyses: Vec::new(),
            bootstrap_resamples: 10_000,
            permutation_resamples: 10_000,
            vc_replicates: 0,
            seed,
            out: out.into(),
            round: false,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.analyses.is_empty() {
            bail!("no analysis selected");
        }
        if self.bootstrap_resamples < 1 || self.permutation_resamples < 1 {
            bail!("resample counts must be at least 1");
        }
        for a in &self.analyses {
            match a {
                Analysis::Corr if self.truth.is_none() => bail!("corr needs a truth table (--truth)"),
                Analysis::Corr if self.survey.is_none() => bail!("corr needs the survey definition (--survey)"),
                Analysis::Anova | Analysis::McAnova if self.designs.is_empty() => {
                    bail!("{} needs at least one design table (--design)", a.name())
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub analysis: &'static str,
    pub seed: u64,
    pub resamples: Option<usize>,
}

/// Index of everything a run wrote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub permutation_resamples: usize,
    pub analyses: Vec<&'static str>,
    pub outputs: Vec<OutputEntry>,
    pub notes: Vec<String>,
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    manifest: Manifest,
}

impl Run<'_> {
    fn create(&mut self, rel: &str, analysis: Analysis, resamples: Option<usize>) -> anyhow::Result<BufWriter<File>> {
        let path = self.cfg.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.manifest.outputs.push(OutputEntry {
            path: rel.to_string(),
            analysis: analysis.name(),
            seed: self.cfg.seed,
            resamples,
        });
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    }

    fn write_text(&mut self, rel: &str, analysis: Analysis, text: &str) -> anyhow::Result<()> {
        let mut f = self.create(rel, analysis, None)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    fn note(&mut self, text: String) {
        self.manifest.notes.push(text);
    }
}

/// File-name-safe form of an identifier.
fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn stem(path: &Path) -> String {
    slug(&path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

fn is_log(path: &Path) -> anyhow::Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.trim_start().starts_with('{') || text.trim().is_empty())
}

/// Runs every selected analysis and writes `manifest.json` into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> anyhow::Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let survey = cfg
        .survey
        .as_ref()
        .map(|p| SurveyDefinition::from_path(p).with_context(|| format!("loading survey {}", p.display())))
        .transpose()?;
    let needs_log = cfg.analyses.iter().any(|a| *a != Analysis::Mixed) || is_log(&cfg.responses)?;
    let records = if needs_log {
        let recs = read_log(&cfg.responses).with_context(|| format!("reading {}", cfg.responses.display()))?;
        if let Some(s) = &survey {
            for r in &recs {
                r.validate(s).with_context(|| format!("record from `{}`", r.respondent_id))?;
            }
        }
        Some(retain_latest(recs))
    } else {
        None
    };
    let designs = cfg
        .designs
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok((stem(p), DesignTable::from_csv(f).with_context(|| format!("reading {}", p.display()))?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut run = Run {
        cfg,
        manifest: Manifest {
            seed: cfg.seed,
            bootstrap_resamples: cfg.bootstrap_resamples,
            permutation_resamples: cfg.permutation_resamples,
            analyses: cfg.analyses.iter().map(|a| a.name()).collect(),
            outputs: Vec::new(),
            notes: Vec::new(),
        },
    };
    for analysis in &cfg.analyses {
        let recs = records.as_deref().unwrap_or_default();
        match analysis {
            Analysis::Iaa => run_iaa(&mut run, recs, survey.as_ref())?,
            Analysis::Corr => run_corr(&mut run, recs, survey.as_ref().expect("validated"))?,
            Analysis::Anova | Analysis::McAnova => {
                for (name, design) in &designs {
                    run_anova(&mut run, *analysis, recs, name, design)?;
                }
            }
            Analysis::Mixed => run_mixed(&mut run, records.as_deref(), &designs)?,
        }
    }
    let mut f = File::create(cfg.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &run.manifest)?;
    f.write_all(b"\n")?;
    Ok(run.manifest)
}

/// Questions in survey order when a survey is given, else first appearance.
fn question_order(records: &[ResponseRecord], survey: Option<&SurveyDefinition>) -> Vec<String> {
    let mut order: Vec<String> = survey.map(|s| s.questions.iter().map(|q| q.id.clone()).collect()).unwrap_or_default();
    for r in records {
        if !order.contains(&r.question_id) {
            order.push(r.question_id.clone());
        }
    }
    order
}

fn run_iaa(run: &mut Run, records: &[ResponseRecord], survey: Option<&SurveyDefinition>) -> anyhow::Result<()> {
    let scale = ScaleSpec::normalized();
    for q in question_order(records, survey) {
        let intervals: Vec<Interval> = records
            .iter()
            .filter(|r| r.question_id == q)
            .map(|r| r.interval_norm)
            .collect();
        if intervals.is_empty() {
            continue;
        }
        let intervals = if run.cfg.round { round_to_integers(&intervals) } else { intervals };
        let af = build_agreement(&intervals)?;
        let samples = discretize(&af, scale.min, scale.max, 0.5)?;
        let base = format!("iaa/{}", slug(&q));
        let mut f = run.create(&format!("{base}_membership.csv"), Analysis::Iaa, None)?;
        write_samples(&mut f, &samples)?;
        f.flush()?;
        let svg = plot_iaa_svg(&af, &scale, &PlotSpec::new(PlotStyle::Iaa))?;
        run.write_text(&format!("{base}_iaa.svg"), Analysis::Iaa, &svg)?;
        let svg = plot_intervals_svg(&intervals, &scale, &PlotSpec::new(PlotStyle::IntervalStack))?;
        run.write_text(&format!("{base}_intervals.svg"), Analysis::Iaa, &svg)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CorrSummary {
    measure: &'static str,
    respondents: usize,
    /// Respondents whose r is undefined because one series is constant.
    excluded: Vec<String>,
    r_test: Option<TestResult>,
    r_test_degenerate: bool,
    mse_mean: Option<f64>,
    mse_ci: Option<(f64, f64)>,
}

fn run_corr(run: &mut Run, records: &[ResponseRecord], survey: &SurveyDefinition) -> anyhow::Result<()> {
    let path = run.cfg.truth.as_ref().expect("validated");
    let truth = GroundTruth::from_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
    truth.validate(survey)?;
    let truth = truth.normalized(survey)?;

    let mut respondents: Vec<&str> = Vec::new();
    for r in records {
        if truth.contains_key(&r.question_id) && !respondents.contains(&r.respondent_id.as_str()) {
            respondents.push(&r.respondent_id);
        }
    }

    let mut table = csv::Writer::from_writer(run.create("corr/respondents.csv", Analysis::Corr, None)?);
    table.write_record(["respondent", "n", "r_midpoint", "mse_midpoint", "r_width", "mse_width"])?;
    let mut per_measure: BTreeMap<&'static str, (Vec<f64>, Vec<f64>, Vec<String>)> = BTreeMap::new();
    for who in &respondents {
        let pairs: Vec<(&Interval, &Interval)> = records
            .iter()
            .filter(|r| r.respondent_id == *who)
            .filter_map(|r| truth.get(&r.question_id).map(|t| (t, &r.interval_norm)))
            .collect();
        if pairs.len() < 2 {
            run.note(format!("corr: respondent `{who}` answered fewer than 2 truth questions"));
            continue;
        }
        let mut rec = vec![who.to_string(), pairs.len().to_string()];
        for m in Measure::BOTH {
            let pick = |iv: &Interval| match m {
                Measure::Midpoint => iv.summarize().midpoint,
                Measure::Width => iv.summarize().width,
            };
            let t: Vec<f64> = pairs.iter().map(|(t, _)| pick(t)).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, y)| pick(y)).collect();
            let metrics = agreement_metrics(&t, &y)?;
            let entry = per_measure.entry(m.name()).or_default();
            match metrics.r {
                Some(r) => entry.0.push(r),
                None => entry.2.push(who.to_string()),
            }
            entry.1.push(metrics.mse);
            rec.push(metrics.r.map(|r| r.to_string()).unwrap_or_default());
            rec.push(metrics.mse.to_string());
        }
        table.write_record(&rec)?;
    }
    table.flush()?;

    let b = run.cfg.bootstrap_resamples;
    let seed = run.cfg.seed;
    let mut summaries = Vec::new();
    for m in Measure::BOTH {
        let (rs, mses, excluded) = per_measure.remove(m.name()).unwrap_or_default();
        let (r_test, degenerate) = match bootstrap_one_sample_t(&rs, 0.0, b, seed) {
            Ok(t) => (Some(t), false),
            Err(Error::DegenerateSample(_)) => (Some(constant_sample_limit(&rs, 0.0, b, seed)?), true),
            Err(Error::InvalidArgument(_)) => (None, false),
            Err(e) => return Err(e.into()),
        };
        if degenerate {
            run.note(format!(
                "corr: every {} r is identical; reporting the constant-sample limit of the bootstrap test",
                m.name()
            ));
        }
        let mse_ci = bootstrap_ci_mean(&mses, b, seed, 0.95).ok();
        summaries.push(CorrSummary {
            measure: m.name(),
            respondents: rs.len(),
            excluded,
            r_test,
            r_test_degenerate: degenerate,
            mse_mean: (!mses.is_empty()).then(|| ivstat::stats::mean(&mses)),
            mse_ci,
        });
    }
    let mut f = run.create("corr/summary.json", Analysis::Corr, Some(b))?;
    serde_json::to_writer_pretty(&mut f, &summaries)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Subject-by-cell matrix for one measure. Cells follow the design's level
/// order with the second factor varying fastest.
fn cell_matrix(
    export: &LongExport,
    design: &DesignTable,
    measure: Measure,
) -> anyhow::Result<(Vec<usize>, Vec<Vec<f64>>, Vec<String>)> {
    let nf = design.factors.len();
    if nf == 0 || nf > 2 {
        bail!("design tables need one or two factor columns, found {nf}");
    }
    let levels: Vec<Vec<String>> = (0..nf).map(|k| design.factor_levels(k)).collect();
    let counts: Vec<usize> = levels.iter().map(Vec::len).collect();
    let cells: usize = counts.iter().product();
    let cell_of = |lv: &[String]| -> usize {
        let idx: Vec<usize> = (0..nf).map(|k| levels[k].iter().position(|l| *l == lv[k]).expect("level")).collect();
        if nf == 1 { idx[0] } else { idx[0] * counts[1] + idx[1] }
    };
    let mut owner = vec![None::<&str>; cells];
    for (q, lv) in &design.entries {
        let c = cell_of(lv);
        if let Some(prev) = owner[c] {
            bail!("questions `{prev}` and `{q}` occupy the same design cell");
        }
        owner[c] = Some(q);
    }
    if owner.iter().any(Option::is_none) {
        bail!("design leaves some factor combinations without a question");
    }
    let mut subjects: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for r in &export.rows {
        let s = match subjects.iter().position(|s| *s == r.respondent) {
            Some(i) => i,
            None => {
                subjects.push(r.respondent.clone());
                rows.push(vec![None; cells]);
                subjects.len() - 1
            }
        };
        rows[s][cell_of(&r.levels)] = Some(r.value(measure));
    }
    let mut complete = Vec::new();
    let mut dropped = Vec::new();
    for (s, row) in subjects.into_iter().zip(rows) {
        match row.into_iter().collect::<Option<Vec<f64>>>() {
            Some(r) => complete.push(r),
            None => dropped.push(s),
        }
    }
    Ok((counts, complete, dropped))
}

fn run_anova(
    run: &mut Run,
    analysis: Analysis,
    records: &[ResponseRecord],
    name: &str,
    design: &DesignTable,
) -> anyhow::Result<()> {
    let export = export_long(records, design);
    if !export.skipped.is_empty() {
        run.note(format!("{}: `{name}` has no design entry for {}", analysis.name(), export.skipped.join(", ")));
    }
    for m in Measure::BOTH {
        let (counts, rows, dropped) = cell_matrix(&export, design, m)?;
        if !dropped.is_empty() && m == Measure::Midpoint {
            run.note(format!(
                "{}: `{name}` drops respondents with missing cells: {}",
                analysis.name(),
                dropped.join(", ")
            ));
        }
        let names: Vec<&str> = design.factors.iter().map(String::as_str).collect();
        let rm = match counts.as_slice() {
            [_] => RmDesign::one_way(&rows)?,
            [a, b] => RmDesign::factorial(*a, *b, &rows)?,
            _ => unreachable!(),
        }
        .with_factor_names(&names)?;
        match analysis {
            Analysis::Anova => {
                let table = rm_anova(&rm).with_context(|| format!("anova on `{name}` {}", m.name()))?;
                let mut f = run.create(&format!("anova/{name}_{}.csv", m.name()), analysis, None)?;
                table.write_csv(&mut f)?;
                f.flush()?;
            }
            _ => {
                let mres = run.cfg.permutation_resamples;
                let res = mc_anova(&rm, mres, run.cfg.seed).with_context(|| format!("mc-anova on `{name}` {}", m.name()))?;
                let mut w = csv::Writer::from_writer(run.create(&format!("mc_anova/{name}_{}.csv", m.name()), analysis, Some(mres))?);
                w.write_record(["effect", "F", "p", "resamples", "seed"])?;
                for e in &res.effects {
                    w.write_record([
                        e.effect.clone(),
                        e.f.to_string(),
                        e.p.to_string(),
                        res.resamples.to_string(),
                        res.seed.to_string(),
                    ])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn run_mixed(run: &mut Run, records: Option<&[ResponseRecord]>, designs: &[(String, DesignTable)]) -> anyhow::Result<()> {
    let datasets: Vec<(String, Vec<MixedRow>)> = match records {
        Some(recs) => {
            let Some((_, design)) = designs
                .iter()
                .find(|(_, d)| ["xB", "xH", "xD"].iter().all(|c| d.factors.iter().any(|f| f == c)))
            else {
                bail!("mixed on a response log needs a design table with xB, xH and xD columns");
            };
            let export = export_long(recs, design);
            Measure::BOTH
                .iter()
                .map(|&m| Ok((m.name().to_string(), rows_from_export(&export, m)?)))
                .collect::<ivstat::Result<_>>()?
        }
        None => {
            let f = File::open(&run.cfg.responses)?;
            vec![("response".to_string(), read_rows(f)?)]
        }
    };
    for (name, rows) in datasets {
        let spec = MixedModelSpec::from_rows(&rows)?;
        let fit = mixed::fit(&spec).with_context(|| format!("fitting the {name} model"))?;
        let intervals = match run.cfg.vc_replicates {
            0 => None,
            n => Some(variance_component_intervals(&fit, &spec, n, run.cfg.seed)?),
        };
        let reps = intervals.as_ref().map(|iv| iv.replicates);
        let mut f = run.create(&format!("mixed/{name}.csv"), Analysis::Mixed, reps)?;
        fit.write_table(&mut f, intervals.as_ref())?;
        f.flush()?;
        if let Some(iv) = &intervals {
            if iv.failed > 0 {
                run.note(format!("mixed: {} of {} bootstrap refits failed for {name}", iv.failed, iv.replicates));
            }
        }
        let mut f = run.create(&format!("mixed/{name}_fit.json"), Analysis::Mixed, reps)?;
        serde_json::to_writer_pretty(&mut f, &fit)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    Ok(())
}
