//! Repeated-measures ANOVA with Greenhouse–Geisser corrected degrees of
//! freedom, and within-subject permutation checks.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::special::f_sf;
use crate::stats::{self, TestResult};

/// Midpoint of a 1–5 feedback scale.
pub const SCALE_MIDPOINT: f64 = 3.0;

/// A complete subjects × cells matrix for one dependent variable.
///
/// With two factors the cell for levels `(i, j)` is column `i * b + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmDesign {
    factor_names: Vec<String>,
    levels: Vec<usize>,
    subjects: usize,
    data: Vec<f64>,
}

impl RmDesign {
    pub fn one_way(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        Self::build(vec!["condition".into()], vec![k], rows)
    }

    pub fn factorial(a: usize, b: usize, rows: &[Vec<f64>]) -> Result<Self> {
        Self::build(vec!["A".into(), "B".into()], vec![a, b], rows)
    }

    pub fn with_factor_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.levels.len() {
            return Err(Error::InvalidDesign(format!(
                "{} names for {} factors",
                names.len(),
                self.levels.len()
            )));
        }
        self.factor_names = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    fn build(factor_names: Vec<String>, levels: Vec<usize>, rows: &[Vec<f64>]) -> Result<Self> {
        if levels.iter().any(|&l| l < 2) {
            return Err(Error::InvalidDesign("every factor needs at least 2 levels".into()));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidDesign("need at least 2 subjects".into()));
        }
        let cells: usize = levels.iter().product();
        let mut data = Vec::with_capacity(rows.len() * cells);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != cells {
                return Err(Error::InvalidDesign(format!(
                    "subject {s} has {} cells, expected {cells}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDesign(format!("subject {s} has a non-finite cell")));
            }
            data.extend_from_slice(row);
        }
        Ok(RmDesign {
            factor_names,
            levels,
            subjects: rows.len(),
            data,
        })
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn cells(&self) -> usize {
        self.levels.iter().product()
    }

    /// Cell covariance matrix across subjects (`n - 1` denominator).
    pub fn cell_covariance(&self) -> Vec<Vec<f64>> {
        covariance(&self.data, self.subjects, self.cells())
    }
}

fn covariance(data: &[f64], n: usize, c: usize) -> Vec<Vec<f64>> {
    let means: Vec<f64> = (0..c)
        .map(|j| (0..n).map(|s| data[s * c + j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; c]; c];
    for s in 0..n {
        let row = &data[s * c..(s + 1) * c];
        for i in 0..c {
            let di = row[i] - means[i];
            for j in 0..=i {
                cov[i][j] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..c {
        for j in 0..=i {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// One effect line of an ANOVA table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub effect: String,
    pub ss_effect: f64,
    pub ss_error: f64,
    pub df1: f64,
    pub df2: f64,
    pub epsilon: f64,
    pub df1_corrected: f64,
    pub df2_corrected: f64,
    pub f: f64,
    pub p: f64,
    pub eta_p_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub ss_subjects: f64,
    pub ss_total: f64,
}

impl AnovaTable {
    pub fn row(&self, effect: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.effect == effect)
    }

    /// Sum of every SS component, which equals `ss_total`.
    pub fn ss_components(&self) -> f64 {
        self.ss_subjects + self.rows.iter().map(|r| r.ss_effect + r.ss_error).sum::<f64>()
    }

    /// Writes `effect,F,df1,df2,p,eta_p_sq` rows with corrected dfs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["effect", "F", "df1", "df2", "p", "eta_p_sq", "epsilon"])?;
        for r in &self.rows {
            w.write_record([
                r.effect.clone(),
                r.f.to_string(),
                r.df1_corrected.to_string(),
                r.df2_corrected.to_string(),
                r.p.to_string(),
                r.eta_p_sq.to_string(),
                r.epsilon.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scales both degrees of freedom by `epsilon`.
pub fn corrected_dfs(df1: f64, df2: f64, epsilon: f64) -> (f64, f64) {
    (epsilon * df1, epsilon * df2)
}

/// Greenhouse–Geisser epsilon from a k × k condition covariance matrix.
///
/// The matrix is double-centred and `ε = (Σλ)² / ((k − 1) Σλ²)` over its
/// eigenvalues, computed as `tr(S)² / ((k − 1) ‖S‖²_F)`. The result is
/// clamped to `[1/(k − 1), 1]`; a zero matrix gives 1.
pub fn gg_epsilon(cov: &[Vec<f64>]) -> Result<f64> {
    let k = cov.len();
    if k < 2 || cov.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidArgument("covariance must be square with k >= 2".into()));
    }
    let scale = cov.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..k {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NotSymmetric);
            }
        }
    }
    let row_means: Vec<f64> = cov.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let col_means: Vec<f64> = (0..k).map(|j| cov.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
    let grand = row_means.iter().sum::<f64>() / k as f64;
    let mut trace = 0.0;
    let mut frob = 0.0;
    for i in 0..k {
        for j in 0..k {
            let c = cov[i][j] - row_means[i] - col_means[j] + grand;
            if i == j {
                trace += c;
            }
            frob += c * c;
        }
    }
    Ok(epsilon_from_moments(trace, frob, k - 1))
}

fn epsilon_from_moments(trace: f64, frob: f64, d: usize) -> f64 {
    if !(frob > 0.0) {
        return 1.0;
    }
    (trace * trace / (d as f64 * frob)).clamp(1.0 / d as f64, 1.0)
}

/// Normalised Helmert contrasts: k × (k − 1), orthonormal columns orthogonal to 1.
fn helmert(k: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; k - 1]; k];
    for j in 1..k {
        let norm = ((j * (j + 1)) as f64).sqrt();
        for row in h.iter_mut().take(j) {
            row[j - 1] = 1.0 / norm;
        }
        h[j][j - 1] = -(j as f64) / norm;
    }
    h
}

fn kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ar, ac) = (a.len(), a[0].len());
    let (br, bc) = (b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Epsilon for the effect spanned by orthonormal `contrasts` (cells × d).
fn epsilon_for_contrasts(cov: &[Vec<f64>], contrasts: &[Vec<f64>]) -> f64 {
    let c = cov.len();
    let d = contrasts[0].len();
    // M^T S M
    let mut sm = vec![vec![0.0; d]; c];
    for i in 0..c {
        for j in 0..d {
            sm[i][j] = (0..c).map(|k| cov[i][k] * contrasts[k][j]).sum();
        }
    }
    let mut trace = 0.0;
    let mut frob = 0.0;
    for i in 0..d {
        for j in 0..d {
            let v: f64 = (0..c).map(|k| contrasts[k][i] * sm[k][j]).sum();
            if i == j {
                trace += v;
            }
            frob += v * v;
        }
    }
    epsilon_from_moments(trace, frob, d)
}

struct EffectSs {
    name: String,
    ss_effect: f64,
    ss_error: f64,
    df1: f64,
    df2: f64,
}

struct Decomposition {
    effects: Vec<EffectSs>,
    ss_subjects: f64,
    ss_total: f64,
}

fn decompose_one_way(data: &[f64], n: usize, k: usize, name: &str) -> Decomposition {
    let grand = data.iter().sum::<f64>() / (n * k) as f64;
    let subj: Vec<f64> = (0..n)
        .map(|s| data[s * k..(s + 1) * k].iter().sum::<f64>() / k as f64)
        .collect();
    let cond: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|s| data[s * k + j]).sum::<f64>() / n as f64)
        .collect();
    let ss_subjects = k as f64 * subj.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_effect = n as f64 * cond.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_error = 0.0;
    let mut ss_total = 0.0;
    for s in 0..n {
        for j in 0..k {
            let y = data[s * k + j];
            ss_error += (y - subj[s] - cond[j] + grand).powi(2);
            ss_total += (y - grand).powi(2);
        }
    }
    Decomposition {
        effects: vec![EffectSs {
            name: name.to_string(),
            ss_effect,
            ss_error,
            df1: (k - 1) as f64,
            df2: ((n - 1) * (k - 1)) as f64,
        }],
        ss_subjects,
        ss_total,
    }
}

fn decompose_factorial(data: &[f64], n: usize, a: usize, b: usize, names: &[String]) -> Decomposition {
    let c = a * b;
    let y = |s: usize, i: usize, j: usize| data[s * c + i * b + j];
    let (nf, af, bf) = (n as f64, a as f64, b as f64);
    let grand = data.iter().sum::<f64>() / (n * c) as f64;

    let m_s: Vec<f64> = (0..n).map(|s| data[s * c..(s + 1) * c].iter().sum::<f64>() / c as f64).collect();
    let mut m_a = vec![0.0; a];
    let mut m_b = vec![0.0; b];
    let mut m_ab = vec![vec![0.0; b]; a];
    let mut m_sa = vec![vec![0.0; a]; n];
    let mut m_sb = vec![vec![0.0; b]; n];
    for s in 0..n {
        for i in 0..a {
            for j in 0..b {
                let v = y(s, i, j);
                m_a[i] += v;
                m_b[j] += v;
                m_ab[i][j] += v;
                m_sa[s][i] += v;
                m_sb[s][j] += v;
            }
        }
    }
    m_a.iter_mut().for_each(|v| *v /= nf * bf);
    m_b.iter_mut().for_each(|v| *v /= nf * af);
    m_ab.iter_mut().flatten().for_each(|v| *v /= nf);
    m_sa.iter_mut().flatten().for_each(|v| *v /= bf);
    m_sb.iter_mut().flatten().for_each(|v| *v /= af);

    let sq = |v: f64| v * v;
    let ss_subjects = c as f64 * m_s.iter().map(|m| sq(m - grand)).sum::<f64>();
    let ss_a = nf * bf * m_a.iter().map(|m| sq(m - grand)).sum::<f64>();
    let ss_b = nf * af * m_b.iter().map(|m| sq(m - grand)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += nf * sq(m_ab[i][j] - m_a[i] - m_b[j] + grand);
        }
    }
    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    let mut ss_total = 0.0;
    for s in 0..n {
        for i in 0..a {
            ss_as += bf * sq(m_sa[s][i] - m_s[s] - m_a[i] + grand);
        }
        for j in 0..b {
            ss_bs += af * sq(m_sb[s][j] - m_s[s] - m_b[j] + grand);
        }
        for i in 0..a {
            for j in 0..b {
                let v = y(s, i, j);
                ss_abs += sq(v - m_sa[s][i] - m_sb[s][j] - m_ab[i][j] + m_s[s] + m_a[i] + m_b[j] - grand);
                ss_total += sq(v - grand);
            }
        }
    }
    let (dfa, dfb, dfs) = ((a - 1) as f64, (b - 1) as f64, (n - 1) as f64);
    Decomposition {
        effects: vec![
            EffectSs {
                name: names[0].clone(),
                ss_effect: ss_a,
                ss_error: ss_as,
                df1: dfa,
                df2: dfa * dfs,
            },
            EffectSs {
                name: names[1].clone(),
                ss_effect: ss_b,
                ss_error: ss_bs,
                df1: dfb,
                df2: dfb * dfs,
            },
            EffectSs {
                name: format!("{}:{}", names[0], names[1]),
                ss_effect: ss_ab,
                ss_error: ss_abs,
                df1: dfa * dfb,
                df2: dfa * dfb * dfs,
            },
        ],
        ss_subjects,
        ss_total,
    }
}

fn decompose(design: &RmDesign, data: &[f64]) -> Decomposition {
    match design.levels.as_slice() {
        [k] => decompose_one_way(data, design.subjects, *k, &design.factor_names[0]),
        [a, b] => decompose_factorial(data, design.subjects, *a, *b, &design.factor_names),
        _ => unreachable!("designs have one or two factors"),
    }
}

fn f_ratio(e: &EffectSs) -> Result<f64> {
    if e.ss_error == 0.0 {
        if e.ss_effect == 0.0 {
            return Err(Error::UndefinedF);
        }
        return Ok(f64::INFINITY);
    }
    Ok((e.ss_effect / e.df1) / (e.ss_error / e.df2))
}

fn epsilons(design: &RmDesign) -> Result<Vec<f64>> {
    let cov = design.cell_covariance();
    match design.levels.as_slice() {
        [_] => Ok(vec![gg_epsilon(&cov)?]),
        [a, b] => {
            let ones = |k: usize| vec![vec![1.0 / (k as f64).sqrt()]; k];
            let (ha, hb) = (helmert(*a), helmert(*b));
            Ok(vec![
                epsilon_for_contrasts(&cov, &kron(&ha, &ones(*b))),
                epsilon_for_contrasts(&cov, &kron(&ones(*a), &hb)),
                epsilon_for_contrasts(&cov, &kron(&ha, &hb)),
            ])
        }
        _ => unreachable!(),
    }
}

fn analyse(design: &RmDesign) -> Result<AnovaTable> {
    let dec = decompose(design, &design.data);
    let eps = epsilons(design)?;
    let mut rows = Vec::with_capacity(dec.effects.len());
    for (e, epsilon) in dec.effects.iter().zip(eps) {
        let f = f_ratio(e)?;
        let (df1c, df2c) = corrected_dfs(e.df1, e.df2, epsilon);
        let denom = e.ss_effect + e.ss_error;
        rows.push(AnovaRow {
            effect: e.name.clone(),
            ss_effect: e.ss_effect,
            ss_error: e.ss_error,
            df1: e.df1,
            df2: e.df2,
            epsilon,
            df1_corrected: df1c,
            df2_corrected: df2c,
            f,
            p: f_sf(f, df1c, df2c),
            eta_p_sq: if denom > 0.0 { e.ss_effect / denom } else { 0.0 },
        });
    }
    Ok(AnovaTable {
        rows,
        ss_subjects: dec.ss_subjects,
        ss_total: dec.ss_total,
    })
}

/// One-way repeated-measures ANOVA.
pub fn rm_anova_oneway(design: &RmDesign) -> Result<AnovaTable> {
    if design.levels.len() != 1 {
        return Err(Error::InvalidDesign("expected a single within-subject factor".into()));
    }
    analyse(design)
}

/// Two-way repeated-measures ANOVA: rows A, B and A×B, each tested against
/// its own subject interaction.
pub fn rm_anova_factorial(design: &RmDesign) -> Result<AnovaTable> {
    if design.levels.len() != 2 {
        return Err(Error::InvalidDesign("expected two within-subject factors".into()));
    }
    analyse(design)
}

pub fn rm_anova(design: &RmDesign) -> Result<AnovaTable> {
    analyse(design)
}

/// Permutation p-value for one effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEffect {
    pub effect: String,
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McAnovaResult {
    pub effects: Vec<McEffect>,
    pub resamples: usize,
    pub seed: u64,
}

/// Monte-Carlo permutation check: each resample shuffles every subject's
/// cell vector independently and recomputes F for every effect.
/// `p = (1 + #{F* >= F_obs}) / (M + 1)`.
pub fn mc_anova(design: &RmDesign, resamples: usize, seed: u64) -> Result<McAnovaResult> {
    if resamples < 1 {
        return Err(Error::InvalidArgument("need at least one resample".into()));
    }
    let observed = decompose(design, &design.data);
    let f_obs: Vec<f64> = observed.effects.iter().map(f_ratio).collect::<Result<_>>()?;
    let c = design.cells();
    let mut rng = rng::invocation(seed);
    let mut data = design.data.clone();
    let mut exceed = vec![0usize; f_obs.len()];
    for _ in 0..resamples {
        for row in data.chunks_mut(c) {
            row.shuffle(&mut rng);
        }
        let dec = decompose(design, &data);
        for (k, e) in dec.effects.iter().enumerate() {
            let f = f_ratio(e).unwrap_or(0.0);
            // tolerance for permutations equivalent to the observed labelling
            if f >= f_obs[k] * (1.0 - 1e-12) {
                exceed[k] += 1;
            }
        }
    }
    let effects = observed
        .effects
        .iter()
        .zip(f_obs)
        .zip(exceed)
        .map(|((e, f), x)| McEffect {
            effect: e.name.clone(),
            f,
            p: (1 + x) as f64 / (resamples + 1) as f64,
        })
        .collect();
    Ok(McAnovaResult {
        effects,
        resamples,
        seed,
    })
}

/// Bootstrap test of mean ratings against the scale midpoint 3.00.
pub fn one_sample_scale_midpoint_test(values: &[f64], resamples: usize, seed: u64) -> Result<TestResult> {
    stats::bootstrap_one_sample_t(values, SCALE_MIDPOINT, resamples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::t_two_sided_p;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noisy(n: usize, c: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::invocation(seed);
        (0..n)
            .map(|_| (0..c).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn equal_condition_means_give_zero_effect() {
        // Latin square: every condition sees the same multiset of values
        let rows = vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 3.0, 4.0, 1.0],
            vec![3.0, 4.0, 1.0, 2.0],
            vec![4.0, 1.0, 2.0, 3.0],
        ];
        let t = rm_anova_oneway(&RmDesign::one_way(&rows).unwrap()).unwrap();
        let r = &t.rows[0];
        assert_eq!(r.ss_effect, 0.0);
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
        assert_eq!(r.eta_p_sq, 0.0);
    }

    #[test]
    fn constant_subjects_have_undefined_f() {
        let rows = vec![vec![1.0; 3], vec![5.0; 3], vec![2.0; 3]];
        assert!(matches!(
            rm_anova_oneway(&RmDesign::one_way(&rows).unwrap()),
            Err(Error::UndefinedF)
        ));
    }

    #[test]
    fn design_validation() {
        assert!(RmDesign::one_way(&[vec![1.0], vec![2.0]]).is_err());
        assert!(RmDesign::one_way(&[vec![1.0, 2.0]]).is_err());
        assert!(RmDesign::one_way(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(RmDesign::factorial(2, 3, &[vec![0.0; 6], vec![0.0; 5]]).is_err());
        assert!(RmDesign::one_way(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn two_levels_match_paired_t() {
        let rows = noisy(15, 2, 4)
            .into_iter()
            .map(|r| vec![r[0], r[1] + 0.4])
            .collect::<Vec<_>>();
        let t = rm_anova_oneway(&RmDesign::one_way(&rows).unwrap()).unwrap();
        let r = &t.rows[0];
        assert_eq!(r.epsilon, 1.0);
        assert_eq!((r.df1_corrected, r.df2_corrected), (1.0, 14.0));

        // paired t oracle
        let d: Vec<f64> = rows.iter().map(|r| r[1] - r[0]).collect();
        let tstat = stats::mean(&d) / (stats::variance(&d).sqrt() / 15f64.sqrt());
        assert!((r.f - tstat * tstat).abs() < 1e-10 * r.f);
        assert!((r.p - t_two_sided_p(tstat, 14.0)).abs() < 1e-12);
    }

    #[test]
    fn epsilon_examples() {
        let cs: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 3.0 } else { 1.2 }).collect())
            .collect();
        assert!((gg_epsilon(&cs).unwrap() - 1.0).abs() < 1e-12);

        assert_eq!(gg_epsilon(&[vec![2.0, 0.3], vec![0.3, 5.0]]).unwrap(), 1.0);

        // rank-one after double centring: S = v v^T with v orthogonal to 1
        let v = [1.0, -2.0, 0.5, 0.5];
        let r1: Vec<Vec<f64>> = v.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        assert!((gg_epsilon(&r1).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        assert!(matches!(
            gg_epsilon(&[vec![1.0, 0.2], vec![0.5, 1.0]]),
            Err(Error::NotSymmetric)
        ));
    }

    #[test]
    fn contrast_epsilon_matches_double_centring() {
        let design = RmDesign::one_way(&noisy(12, 5, 8)).unwrap();
        let cov = design.cell_covariance();
        let a = gg_epsilon(&cov).unwrap();
        let b = epsilon_for_contrasts(&cov, &helmert(5));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn helmert_is_orthonormal() {
        let h = helmert(4);
        for i in 0..3 {
            assert!(h.iter().map(|r| r[i]).sum::<f64>().abs() < 1e-15);
            for j in 0..3 {
                let d: f64 = h.iter().map(|r| r[i] * r[j]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn df_arithmetic() {
        let (d1, d2) = corrected_dfs(3.0, 117.0, 0.693);
        assert!((d1 - 2.079).abs() < 1e-12);
        assert!((d2 - 81.081).abs() < 1e-9);
        let (d1, d2) = corrected_dfs(2.0, 78.0, 0.842);
        assert!((d1 - 1.684).abs() < 1e-12);
        assert!((d2 - 65.676).abs() < 1e-9);
    }

    #[test]
    fn factorial_constant_in_b() {
        let mut rng = rng::invocation(3);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let per_a: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                (0..12).map(|c| per_a[c / 3]).collect()
            })
            .collect();
        let t = rm_anova_factorial(&RmDesign::factorial(4, 3, &rows).unwrap()).unwrap();
        assert!(t.rows[1].ss_effect < 1e-24);
        assert!(t.rows[2].ss_effect < 1e-24);
    }

    #[test]
    fn additive_data_has_zero_interaction() {
        let alpha = [1.0, 3.0, -2.0, 0.5];
        let beta = [0.0, 4.0];
        let subj = [10.0, -3.0, 6.5, 2.0];
        let rows: Vec<Vec<f64>> = subj
            .iter()
            .map(|s| {
                (0..8)
                    .map(|c| s + alpha[c / 2] + beta[c % 2])
                    .collect()
            })
            .collect();
        let design = RmDesign::factorial(4, 2, &rows).unwrap();
        let dec = decompose(&design, &design.data);
        assert_eq!(dec.effects[2].ss_effect, 0.0);
        assert_eq!(dec.effects[2].ss_error, 0.0);
        assert!(matches!(rm_anova_factorial(&design), Err(Error::UndefinedF)));
    }

    #[test]
    fn sums_of_squares_add_up() {
        for (a, b) in [(4, 3), (2, 2), (3, 5)] {
            let rows = noisy(9, a * b, 17);
            let t = rm_anova_factorial(&RmDesign::factorial(a, b, &rows).unwrap()).unwrap();
            assert!((t.ss_components() - t.ss_total).abs() < 10.0 * f64::EPSILON * t.ss_total * 40.0);
            for r in &t.rows {
                assert!((0.0..=1.0).contains(&r.eta_p_sq));
                assert!(r.epsilon >= 1.0 / r.df1 - 1e-15 && r.epsilon <= 1.0);
                assert!((r.df1_corrected - r.epsilon * r.df1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f_ignores_subject_offsets() {
        let rows = noisy(10, 6, 2);
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(s, r)| r.iter().map(|v| v + 7.0 * s as f64).collect())
            .collect();
        let t1 = rm_anova_factorial(&RmDesign::factorial(3, 2, &rows).unwrap()).unwrap();
        let t2 = rm_anova_factorial(&RmDesign::factorial(3, 2, &shifted).unwrap()).unwrap();
        for (x, y) in t1.rows.iter().zip(&t2.rows) {
            assert!((x.f - y.f).abs() < 1e-9 * x.f.max(1.0));
        }
    }

    #[test]
    fn permutation_check_is_deterministic_and_bounded() {
        let design = RmDesign::one_way(&noisy(10, 3, 6)).unwrap();
        let a = mc_anova(&design, 200, 4).unwrap();
        assert_eq!(a, mc_anova(&design, 200, 4).unwrap());
        assert!(a.effects[0].p >= 1.0 / 201.0);
    }

    #[test]
    fn permutation_check_detects_large_effect() {
        let rows: Vec<Vec<f64>> = noisy(20, 4, 1)
            .into_iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v + 25.0 * j as f64).collect())
            .collect();
        let res = mc_anova(&RmDesign::one_way(&rows).unwrap(), 500, 1).unwrap();
        assert_eq!(res.effects[0].p, 1.0 / 501.0);
    }

    #[test]
    fn midpoint_test() {
        assert!(matches!(
            one_sample_scale_midpoint_test(&[3.0; 8], 100, 1),
            Err(Error::DegenerateSample(_))
        ));
        let sym = [2.0, 4.0, 1.0, 5.0, 3.0, 3.5, 2.5];
        assert_eq!(one_sample_scale_midpoint_test(&sym, 1000, 1).unwrap().p_value, 1.0);
    }

    #[test]
    fn table_serialization() {
        let t = rm_anova_oneway(&RmDesign::one_way(&noisy(5, 3, 1)).unwrap()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("effect,F,df1,df2,p,eta_p_sq,epsilon\ncondition,"));
    }
}
