//! Survey definitions, the append-only response log, benchmarks and
//! long-format export.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{extract_interval, normalize, Interval, ScaleSpec, Stroke};
use crate::mixed::ItemCovariates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Reproduce,
    Marbles,
    Subjective,
    Feedback,
}

impl std::str::FromStr for Section {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reproduce" => Ok(Section::Reproduce),
            "marbles" => Ok(Section::Marbles),
            "subjective" => Ok(Section::Subjective),
            "feedback" => Ok(Section::Feedback),
            other => Err(Error::Validation(format!("unknown section `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub section: Section,
    pub scale: ScaleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus_ref: Option<String>,
}

/// Questions in fixed presentation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDefinition {
    pub survey_id: String,
    pub title: String,
    pub questions: Vec<Question>,
}

#[derive(Deserialize)]
struct RawQuestion {
    id: String,
    #[serde(default)]
    text: String,
    section: String,
    scale: ScaleSpec,
    #[serde(default)]
    stimulus_ref: Option<String>,
}

#[derive(Deserialize)]
struct RawSurvey {
    survey_id: String,
    #[serde(default)]
    title: String,
    questions: Vec<RawQuestion>,
}

/// Parses and validates a survey document (JSON).
pub fn load_survey(document: &str) -> Result<SurveyDefinition> {
    let raw: RawSurvey = serde_json::from_str(document)?;
    if raw.questions.is_empty() {
        return Err(Error::Validation("survey has no questions".into()));
    }
    let mut seen = HashSet::new();
    let mut questions = Vec::with_capacity(raw.questions.len());
    for q in raw.questions {
        if !seen.insert(q.id.clone()) {
            return Err(Error::Validation(format!("duplicate question id `{}`", q.id)));
        }
        let section = q
            .section
            .parse::<Section>()
            .map_err(|_| Error::Validation(format!("question `{}`: unknown section `{}`", q.id, q.section)))?;
        q.scale
            .validate()
            .map_err(|e| Error::Validation(format!("question `{}`: {e}", q.id)))?;
        questions.push(Question {
            id: q.id,
            text: q.text,
            section,
            scale: q.scale,
            stimulus_ref: q.stimulus_ref,
        });
    }
    Ok(SurveyDefinition {
        survey_id: raw.survey_id,
        title: raw.title,
        questions,
    })
}

impl SurveyDefinition {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        load_survey(&std::fs::read_to_string(path)?)
    }

    pub fn question(&self, id: &str) -> Result<&Question> {
        self.questions
            .iter()
            .find(|q| q.id == id)
            .ok_or_else(|| Error::UnknownQuestion(id.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One stored answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub survey_id: String,
    pub respondent_id: String,
    pub question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stroke: Option<Stroke>,
    pub interval_raw: Interval,
    pub interval_norm: Interval,
    #[serde(with = "iso_utc")]
    pub submitted_at: DateTime<Utc>,
}

mod iso_utc {
    use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Micros, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc).trunc_subsecs(6))
            .map_err(serde::de::Error::custom)
    }
}

impl ResponseRecord {
    /// Record from a drawn stroke; the interval is extracted and normalised here.
    pub fn from_stroke(
        survey: &SurveyDefinition,
        respondent_id: &str,
        question_id: &str,
        stroke: Stroke,
        submitted_at: DateTime<Utc>,
    ) -> Result<Self> {
        let q = survey.question(question_id)?;
        let raw = extract_interval(&stroke, &q.scale)?;
        let mut rec = Self::from_interval(survey, respondent_id, question_id, raw, submitted_at)?;
        rec.stroke = Some(stroke);
        Ok(rec)
    }

    /// Record from an interval in scale units.
    pub fn from_interval(
        survey: &SurveyDefinition,
        respondent_id: &str,
        question_id: &str,
        interval_raw: Interval,
        submitted_at: DateTime<Utc>,
    ) -> Result<Self> {
        let q = survey.question(question_id)?;
        Ok(ResponseRecord {
            survey_id: survey.survey_id.clone(),
            respondent_id: respondent_id.to_string(),
            question_id: question_id.to_string(),
            stroke: None,
            interval_raw,
            interval_norm: normalize(&interval_raw, &q.scale)?,
            submitted_at: submitted_at.trunc_subsecs(6),
        })
    }

    /// Checks the record against the survey it claims to answer.
    pub fn validate(&self, survey: &SurveyDefinition) -> Result<()> {
        if self.survey_id != survey.survey_id {
            return Err(Error::Validation(format!(
                "record for survey `{}` offered to survey `{}`",
                self.survey_id, survey.survey_id
            )));
        }
        let q = survey.question(&self.question_id)?;
        if !q.scale.contains(&self.interval_raw) {
            return Err(Error::InvalidInterval(format!(
                "[{}, {}] outside the scale of `{}`",
                self.interval_raw.lo, self.interval_raw.hi, q.id
            )));
        }
        let expected = normalize(&self.interval_raw, &q.scale)?;
        if expected != self.interval_norm {
            return Err(Error::Validation(format!(
                "normalised interval of `{}` does not match its raw interval",
                q.id
            )));
        }
        Ok(())
    }
}

/// Parses one line of the response log.
pub fn parse_log_line(line: &str) -> Result<ResponseRecord> {
    Ok(serde_json::from_str(line)?)
}

/// Position of an appended record in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ack {
    pub sequence: u64,
}

/// Append-only JSON-lines response log.
///
/// Appends are serialised by an internal lock and written as one complete
/// line each. Readers stop at the last newline, so a torn final write is
/// never observed.
#[derive(Debug)]
pub struct ResponseStore {
    path: PathBuf,
    next: Mutex<u64>,
}

impl ResponseStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let existing = if path.exists() { read_log(&path)?.len() as u64 } else { 0 };
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ResponseStore {
            path,
            next: Mutex::new(existing),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, survey: &SurveyDefinition, record: &ResponseRecord) -> Result<Ack> {
        record.validate(survey)?;
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
        let mut file = OpenOptions::new().append(true).open(&self.path)?;
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        let ack = Ack { sequence: *next };
        *next += 1;
        Ok(ack)
    }

    pub fn records(&self) -> Result<Vec<ResponseRecord>> {
        read_log(&self.path)
    }

    /// Latest record per (respondent, question).
    pub fn retained(&self) -> Result<Vec<ResponseRecord>> {
        Ok(retain_latest(self.records()?))
    }
}

/// Reads every complete line of a response log.
pub fn read_log(path: &Path) -> Result<Vec<ResponseRecord>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    parse_log(&buf)
}

/// Parses log bytes, ignoring an unterminated trailing line.
pub fn parse_log(bytes: &[u8]) -> Result<Vec<ResponseRecord>> {
    let complete = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(end) => &bytes[..=end],
        None => &[][..],
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(complete).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_log_line(&line).map_err(|e| Error::Parse(format!("log line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Last-write-wins by `submitted_at`; equal timestamps resolve to the later
/// log position. Output keeps the log position of each winner.
pub fn retain_latest(records: Vec<ResponseRecord>) -> Vec<ResponseRecord> {
    let mut winner: HashMap<(String, String), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = (r.respondent_id.clone(), r.question_id.clone());
        match winner.get(&key) {
            Some(&j) if records[j].submitted_at > r.submitted_at => {}
            _ => {
                winner.insert(key, i);
            }
        }
    }
    let mut keep: Vec<usize> = winner.into_values().collect();
    keep.sort_unstable();
    let mut records: Vec<Option<ResponseRecord>> = records.into_iter().map(Some).collect();
    keep.into_iter().filter_map(|i| records[i].take()).collect()
}

/// Truth intervals in scale units, keyed by question.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intervals: BTreeMap<String, Interval>,
}

#[derive(Deserialize)]
struct TruthRow {
    question: String,
    lo: f64,
    hi: f64,
}

impl GroundTruth {
    /// Reads `question,lo,hi` rows.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut intervals = BTreeMap::new();
        for row in reader.deserialize::<TruthRow>() {
            let row = row?;
            let iv = Interval::new(row.lo, row.hi)?;
            if intervals.insert(row.question.clone(), iv).is_some() {
                return Err(Error::Validation(format!("duplicate truth row for `{}`", row.question)));
            }
        }
        Ok(GroundTruth { intervals })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["question", "lo", "hi"])?;
        for (q, iv) in &self.intervals {
            w.write_record([q.clone(), iv.lo.to_string(), iv.hi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// The three lifespans stated on the animal chart, in years.
    pub fn animal_lifespans() -> Self {
        let mut intervals = BTreeMap::new();
        intervals.insert("cat".to_string(), Interval { lo: 15.0, hi: 20.0 });
        intervals.insert("royal_python".to_string(), Interval { lo: 20.0, hi: 30.0 });
        intervals.insert("large_dog".to_string(), Interval { lo: 8.0, hi: 12.0 });
        GroundTruth { intervals }
    }

    pub fn validate(&self, survey: &SurveyDefinition) -> Result<()> {
        for (q, iv) in &self.intervals {
            let question = survey.question(q)?;
            if !question.scale.contains(iv) {
                return Err(Error::Validation(format!("truth for `{q}` lies outside its scale")));
            }
        }
        Ok(())
    }

    /// Truth intervals mapped onto `[0, 100]`.
    pub fn normalized(&self, survey: &SurveyDefinition) -> Result<BTreeMap<String, Interval>> {
        self.intervals
            .iter()
            .map(|(q, iv)| Ok((q.clone(), normalize(iv, &survey.question(q)?.scale)?)))
            .collect()
    }
}

/// One row of marbles: how many visible marbles are blue, how many are
/// visible, how many are hidden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarbleRow {
    pub visible_blue: u32,
    pub visible_total: u32,
    pub hidden: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarbleStimulus {
    pub rows: Vec<MarbleRow>,
    pub row_size: u32,
}

impl MarbleStimulus {
    pub const ROW_SIZE: u32 = 7;
    pub const ROW_COUNT: usize = 5;

    pub fn new(rows: Vec<MarbleRow>, row_size: u32) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("stimulus has no rows".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.visible_blue > r.visible_total || r.visible_total + r.hidden != row_size {
                return Err(Error::Validation(format!("row {i} is inconsistent: {r:?}")));
            }
        }
        Ok(MarbleStimulus { rows, row_size })
    }

    /// Standard five rows of seven from `(visible_blue, hidden)` pairs.
    pub fn standard(rows: [(u32, u32); 5]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|&(blue, hidden)| MarbleRow {
                visible_blue: blue,
                visible_total: Self::ROW_SIZE.saturating_sub(hidden),
                hidden,
            })
            .collect();
        Self::new(rows, Self::ROW_SIZE)
    }

    /// Stimulus from fully coloured rows written as `B` (blue) and `Y`
    /// (yellow), with the last `hidden` marbles of every row hidden.
    pub fn from_pattern(rows: &[&str], hidden: u32) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        let mut size = None;
        for row in rows {
            let cells: Vec<bool> = row
                .chars()
                .map(|c| match c {
                    'B' => Ok(true),
                    'Y' => Ok(false),
                    other => Err(Error::Parse(format!("unknown marble colour `{other}`"))),
                })
                .collect::<Result<_>>()?;
            let len = cells.len() as u32;
            if *size.get_or_insert(len) != len || hidden > len {
                return Err(Error::Validation(format!("row `{row}` does not fit the stimulus")));
            }
            let visible = (len - hidden) as usize;
            out.push(MarbleRow {
                visible_blue: cells[..visible].iter().filter(|&&b| b).count() as u32,
                visible_total: visible as u32,
                hidden,
            });
        }
        Self::new(out, size.unwrap_or(Self::ROW_SIZE))
    }

    /// Item predictors: pooled proportion of visible marbles that are blue,
    /// proportion hidden, and the visible blue range across rows as a
    /// proportion of the row size.
    pub fn covariates(&self) -> ItemCovariates {
        let visible: u32 = self.rows.iter().map(|r| r.visible_total).sum();
        let blue: u32 = self.rows.iter().map(|r| r.visible_blue).sum();
        let hidden: u32 = self.rows.iter().map(|r| r.hidden).sum();
        let max = self.rows.iter().map(|r| r.visible_blue).max().unwrap_or(0);
        let min = self.rows.iter().map(|r| r.visible_blue).min().unwrap_or(0);
        let size = f64::from(self.row_size);
        ItemCovariates {
            blue: if visible > 0 { f64::from(blue) / f64::from(visible) } else { 0.0 },
            hidden: f64::from(hidden) / (size * self.rows.len() as f64),
            discrepancy: f64::from(max - min) / size,
        }
    }
}

/// Range of blue counts any row could hold once hidden marbles are revealed.
pub fn marble_benchmark(stim: &MarbleStimulus) -> Interval {
    let lo = stim.rows.iter().map(|r| r.visible_blue).min().unwrap_or(0);
    let hi = stim.rows.iter().map(|r| r.visible_blue + r.hidden).max().unwrap_or(0);
    Interval {
        lo: f64::from(lo),
        hi: f64::from(hi),
    }
}

/// Final colourings of the six marble sets, one string per row.
pub const MARBLE_SETS: [[&str; 5]; 6] = [
    ["YYYYBYY", "YYYBYYY", "YBYYYYY", "YYYBYYY", "YBYYYYY"],
    ["YBBBBYY", "YBBBBYY", "YYYYYYY", "YBBBYYY", "BBBBBBB"],
    ["YYYYYYY", "YBBBYBB", "YYYYYYY", "YYYYYYY", "YYYYYYY"],
    ["BBBBBBB", "BBBBBBB", "BBBBBBB", "BBBBBBB", "BBBBBBB"],
    ["YYYYYYY", "YYYYYYY", "YYYYYYY", "YYYYYYY", "YYYYYYY"],
    ["YBYYYYB", "YYYBBYY", "YBBYYYY", "YYYYBYB", "YBBYYYY"],
];

/// Hidden marbles per row, in presentation order within a set.
pub const REVEAL_SEQUENCE: [u32; 3] = [6, 3, 0];

/// The eighteen marble items: each set shown with six, three, then no
/// hidden marbles per row. Ids are `set{s}_hidden{h}`.
pub fn marble_fixture() -> Vec<(String, MarbleStimulus)> {
    let mut out = Vec::with_capacity(18);
    for (s, rows) in MARBLE_SETS.iter().enumerate() {
        for h in REVEAL_SEQUENCE {
            let stim = MarbleStimulus::from_pattern(rows, h).expect("fixture rows are valid");
            out.push((format!("set{}_hidden{h}", s + 1), stim));
        }
    }
    out
}

/// Factor levels per question, read from `question,<factor>...` CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignTable {
    pub factors: Vec<String>,
    /// Question id and its factor levels, in file order.
    pub entries: Vec<(String, Vec<String>)>,
}

impl DesignTable {
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.get(0) != Some("question") {
            return Err(Error::Parse("design table must start with a `question` column".into()));
        }
        let factors: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let q = rec.get(0).unwrap_or_default().to_string();
            if !seen.insert(q.clone()) {
                return Err(Error::Validation(format!("question `{q}` appears twice in the design")));
            }
            entries.push((q, rec.iter().skip(1).map(str::to_string).collect()));
        }
        Ok(DesignTable { factors, entries })
    }

    pub fn levels(&self, question: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(q, _)| q == question)
            .map(|(_, l)| l.as_slice())
    }

    /// Distinct levels of factor `k` in first-appearance order.
    pub fn factor_levels(&self, k: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, l) in &self.entries {
            if !out.contains(&l[k]) {
                out.push(l[k].clone());
            }
        }
        out
    }

    fn position(&self, question: &str) -> Option<usize> {
        self.entries.iter().position(|(q, _)| q == question)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub respondent: String,
    pub question: String,
    pub levels: Vec<String>,
    pub midpoint: f64,
    pub width: f64,
}

/// Which interval summary an analysis uses as its response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Midpoint,
    Width,
}

impl Measure {
    pub const BOTH: [Measure; 2] = [Measure::Midpoint, Measure::Width];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Midpoint => "midpoint",
            Measure::Width => "width",
        }
    }
}

impl LongRow {
    pub fn value(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Midpoint => self.midpoint,
            Measure::Width => self.width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongExport {
    pub factors: Vec<String>,
    pub rows: Vec<LongRow>,
    /// Questions with responses but no design entry.
    pub skipped: Vec<String>,
}

/// One row per retained (respondent, question) with a design entry; midpoint
/// and width in normalised units.
pub fn export_long(records: &[ResponseRecord], design: &DesignTable) -> LongExport {
    let retained = retain_latest(records.to_vec());
    let mut skipped: Vec<String> = Vec::new();
    let mut respondent_order: Vec<&str> = Vec::new();
    let mut rows: Vec<(usize, usize, LongRow)> = Vec::new();
    for r in &retained {
        let Some(pos) = design.position(&r.question_id) else {
            if !skipped.contains(&r.question_id) {
                skipped.push(r.question_id.clone());
            }
            continue;
        };
        let who = match respondent_order.iter().position(|&x| x == r.respondent_id) {
            Some(i) => i,
            None => {
                respondent_order.push(&r.respondent_id);
                respondent_order.len() - 1
            }
        };
        let s = r.interval_norm.summarize();
        rows.push((
            who,
            pos,
            LongRow {
                respondent: r.respondent_id.clone(),
                question: r.question_id.clone(),
                levels: design.entries[pos].1.clone(),
                midpoint: s.midpoint,
                width: s.width,
            },
        ));
    }
    rows.sort_by_key(|(who, pos, _)| (*who, *pos));
    LongExport {
        factors: design.factors.clone(),
        rows: rows.into_iter().map(|(_, _, r)| r).collect(),
        skipped,
    }
}

impl LongExport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["respondent".to_string(), "question".to_string()];
        header.extend(self.factors.iter().cloned());
        header.extend(["midpoint".to_string(), "width".to_string()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.respondent.clone(), r.question.clone()];
            rec.extend(r.levels.iter().cloned());
            rec.push(r.midpoint.to_string());
            rec.push(r.width.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Body of `POST /response`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionPayload {
    pub respondent_id: String,
    pub question_id: String,
    pub stroke: Stroke,
    /// Interval the client extracted, in scale units. Advisory only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_interval: Option<Interval>,
}

/// Largest tolerated gap, in normalised units, between a client's claimed
/// interval and the server's extraction.
pub const CLAIM_TOLERANCE: f64 = 0.5;

#[derive(Debug)]
pub enum IngestError {
    /// The client's interval disagrees with the recomputed one.
    Mismatch { claimed: Interval, recomputed: Interval },
    Invalid(Error),
}

impl From<Error> for IngestError {
    fn from(e: Error) -> Self {
        IngestError::Invalid(e)
    }
}

impl std::fmt::Display for IngestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestError::Mismatch { claimed, recomputed } => write!(
                f,
                "claimed interval [{}, {}] disagrees with extracted [{}, {}]",
                claimed.lo, claimed.hi, recomputed.lo, recomputed.hi
            ),
            IngestError::Invalid(e) => e.fmt(f),
        }
    }
}

impl SubmissionPayload {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Re-extracts the interval from the stroke and builds the record to store.
    pub fn ingest(
        self,
        survey: &SurveyDefinition,
        submitted_at: DateTime<Utc>,
    ) -> std::result::Result<ResponseRecord, IngestError> {
        if self.respondent_id.trim().is_empty() {
            return Err(Error::Validation("respondent_id is empty".into()).into());
        }
        let q = survey.question(&self.question_id)?;
        let recomputed = extract_interval(&self.stroke, &q.scale)?;
        if let Some(claimed) = self.claimed_interval {
            let c = normalize(&Interval::new(q.scale.clamp(claimed.lo), q.scale.clamp(claimed.hi))?, &q.scale)?;
            let r = normalize(&recomputed, &q.scale)?;
            let off_scale = !q.scale.contains(&claimed);
            if off_scale || (c.lo - r.lo).abs() > CLAIM_TOLERANCE || (c.hi - r.hi).abs() > CLAIM_TOLERANCE {
                return Err(IngestError::Mismatch { claimed, recomputed });
            }
        }
        Ok(ResponseRecord::from_stroke(
            survey,
            &self.respondent_id,
            &self.question_id,
            self.stroke,
            submitted_at,
        )?)
    }
}

/// ISO-8601 UTC rendering used throughout the log.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}
