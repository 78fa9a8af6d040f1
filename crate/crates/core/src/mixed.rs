//! Linear mixed model with crossed participant and item intercepts, fitted
//! by restricted maximum likelihood.
//!
//! ```text
//! y = X b + Z_p u_p + Z_q u_q + e,   u_p ~ N(0, σ_p² I), u_q ~ N(0, σ_q² I), e ~ N(0, σ² I)
//! ```
//!
//! The marginal covariance is `V = σ² H` with `H = I + Z Λ Λᵀ Zᵀ` and
//! `Λ = diag(σ_p/σ, σ_q/σ)`. All likelihood work happens on the
//! `q × q` matrix `A = Λ Zᵀ Z Λ + I` (q = participants + items) using the
//! determinant lemma and the Woodbury identity, so an evaluation never forms
//! an `n × n` matrix.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::NORMALIZED_MAX;
use crate::linalg::{Cholesky, Mat};
use crate::optim::NelderMead;
use crate::rng;
use crate::special::{t_quantile, t_two_sided_p};
use crate::survey::{LongExport, LongRow, Measure};

/// Fixed-effect terms, in reporting order.
pub const FIXED_EFFECT_NAMES: [&str; 7] = [
    "Intercept",
    "Blue Visible",
    "Hidden",
    "Row Discrepancy",
    "Blue V. * Hidden",
    "Blue V. * Row D.",
    "Row D. * Hidden",
];

/// Item-level predictors of the marble model, each a proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemCovariates {
    /// Proportion of visible marbles that are blue.
    #[serde(rename = "xB")]
    pub blue: f64,
    /// Proportion of marbles hidden.
    #[serde(rename = "xH")]
    pub hidden: f64,
    /// Between-row discrepancy in blue marbles, as a proportion of the row size.
    #[serde(rename = "xD")]
    pub discrepancy: f64,
}

impl ItemCovariates {
    /// Design row: intercept, main effects, then B·H, B·D, D·H.
    pub fn design_row(&self) -> [f64; 7] {
        let (b, h, d) = (self.blue, self.hidden, self.discrepancy);
        [1.0, b, h, d, b * h, b * d, d * h]
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("xB", self.blue), ("xH", self.hidden), ("xD", self.discrepancy)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidDesign(format!("{name} = {v} is not a proportion")));
            }
        }
        Ok(())
    }
}

/// One row of the long-format model input.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedRow {
    pub participant: String,
    pub item: String,
    pub covariates: ItemCovariates,
    pub response: f64,
}

#[derive(Deserialize)]
struct FlatRow {
    participant: String,
    item: String,
    #[serde(rename = "xB")]
    blue: f64,
    #[serde(rename = "xH")]
    hidden: f64,
    #[serde(rename = "xD")]
    discrepancy: f64,
    response: f64,
}

/// Reads `participant,item,xB,xH,xD,response` rows.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<MixedRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut rows = Vec::new();
    for rec in reader.deserialize::<FlatRow>() {
        let r = rec?;
        rows.push(MixedRow {
            participant: r.participant,
            item: r.item,
            covariates: ItemCovariates { blue: r.blue, hidden: r.hidden, discrepancy: r.discrepancy },
            response: r.response,
        });
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(out: W, rows: &[MixedRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "item", "xB", "xH", "xD", "response"])?;
    for r in rows {
        w.write_record([
            r.participant.clone(),
            r.item.clone(),
            r.covariates.blue.to_string(),
            r.covariates.hidden.to_string(),
            r.covariates.discrepancy.to_string(),
            r.response.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Design matrices for a crossed two-intercept model.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedModelSpec {
    x: Mat,
    y: Vec<f64>,
    participant: Vec<usize>,
    item: Vec<usize>,
    participant_ids: Vec<String>,
    item_ids: Vec<String>,
    column_names: Vec<String>,
}

fn index_ids(ids: impl Iterator<Item = String>) -> (Vec<usize>, Vec<String>) {
    let mut map: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let idx = ids
        .map(|id| {
            *map.entry(id.clone()).or_insert_with(|| {
                names.push(id);
                names.len() - 1
            })
        })
        .collect();
    (idx, names)
}

impl MixedModelSpec {
    /// Builds the seven-column marble design from long-format rows.
    pub fn from_rows(rows: &[MixedRow]) -> Result<Self> {
        let mut x = Mat::zeros(rows.len(), FIXED_EFFECT_NAMES.len());
        for (i, r) in rows.iter().enumerate() {
            r.covariates.validate()?;
            x.data[i * 7..(i + 1) * 7].copy_from_slice(&r.covariates.design_row());
        }
        let y = rows.iter().map(|r| r.response).collect();
        let (participant, participant_ids) = index_ids(rows.iter().map(|r| r.participant.clone()));
        let (item, item_ids) = index_ids(rows.iter().map(|r| r.item.clone()));
        Self::assemble(
            x,
            y,
            participant,
            item,
            participant_ids,
            item_ids,
            FIXED_EFFECT_NAMES.iter().map(|s| s.to_string()).collect(),
        )
    }

    /// General constructor: `x` holds one design row per observation.
    pub fn new(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        participants: Vec<String>,
        items: Vec<String>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let p = column_names.len();
        if x.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDesign(format!("every design row needs {p} columns")));
        }
        if participants.len() != y.len() || items.len() != y.len() {
            return Err(Error::InvalidDesign("every observation needs one participant and one item".into()));
        }
        let mut m = Mat::zeros(x.len(), p);
        for (i, r) in x.iter().enumerate() {
            m.data[i * p..(i + 1) * p].copy_from_slice(r);
        }
        let (participant, participant_ids) = index_ids(participants.into_iter());
        let (item, item_ids) = index_ids(items.into_iter());
        Self::assemble(m, y, participant, item, participant_ids, item_ids, column_names)
    }

    fn assemble(
        x: Mat,
        y: Vec<f64>,
        participant: Vec<usize>,
        item: Vec<usize>,
        participant_ids: Vec<String>,
        item_ids: Vec<String>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if x.rows != y.len() {
            return Err(Error::InvalidDesign("design and response lengths differ".into()));
        }
        if y.is_empty() {
            return Err(Error::InvalidDesign("no observations".into()));
        }
        if y.iter().chain(&x.data).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDesign("non-finite value in design or response".into()));
        }
        Ok(MixedModelSpec {
            x,
            y,
            participant,
            item,
            participant_ids,
            item_ids,
            column_names,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.x.cols
    }

    pub fn n_participants(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Copy with the response replaced.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.y.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: self.y.len(),
            });
        }
        let mut s = self.clone();
        s.y = y;
        Ok(s)
    }
}

/// Standard deviations of the three variance components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma_participant: f64,
    pub sigma_item: f64,
    pub sigma_resid: f64,
}

impl VarianceComponents {
    pub fn new(sigma_participant: f64, sigma_item: f64, sigma_resid: f64) -> Result<Self> {
        let vc = VarianceComponents {
            sigma_participant,
            sigma_item,
            sigma_resid,
        };
        vc.validate()?;
        Ok(vc)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_participant >= 0.0 && self.sigma_item >= 0.0) {
            return Err(Error::InvalidArgument("random-effect SDs must be non-negative".into()));
        }
        if !(self.sigma_resid > 0.0) || !self.sigma_resid.is_finite() {
            return Err(Error::InvalidArgument("residual SD must be positive".into()));
        }
        Ok(())
    }
}

/// Sufficient cross products, fixed across likelihood evaluations.
struct CrossProducts {
    n: usize,
    p: usize,
    q_participants: usize,
    xtx: Mat,
    ztz: Mat,
    ztx: Mat,
    spec: MixedModelSpec,
}

struct Evaluation {
    loglik: f64,
    beta: Vec<f64>,
    /// `(Xᵀ H⁻¹ X)⁻¹`; multiply by σ² for the covariance of `beta`.
    xhx_inv: Mat,
}

impl CrossProducts {
    fn new(spec: &MixedModelSpec) -> Result<Self> {
        let n = spec.n_obs();
        let p = spec.n_fixed();
        if n <= p {
            return Err(Error::InvalidDesign(format!(
                "{n} observations cannot support {p} fixed effects"
            )));
        }
        let qp = spec.n_participants();
        let q = qp + spec.n_items();
        let mut xtx = Mat::zeros(p, p);
        let mut ztz = Mat::zeros(q, q);
        let mut ztx = Mat::zeros(q, p);
        for i in 0..n {
            let row = spec.x.row(i);
            for a in 0..p {
                for b in 0..p {
                    *xtx.at_mut(a, b) += row[a] * row[b];
                }
            }
            let (zp, zq) = (spec.participant[i], qp + spec.item[i]);
            *ztz.at_mut(zp, zp) += 1.0;
            *ztz.at_mut(zq, zq) += 1.0;
            *ztz.at_mut(zp, zq) += 1.0;
            *ztz.at_mut(zq, zp) += 1.0;
            for a in 0..p {
                *ztx.at_mut(zp, a) += row[a];
                *ztx.at_mut(zq, a) += row[a];
            }
        }
        if Cholesky::new(&xtx).is_err() || !full_rank(&xtx) {
            return Err(Error::RankDeficient);
        }
        Ok(CrossProducts {
            n,
            p,
            q_participants: qp,
            xtx,
            ztz,
            ztx,
            spec: spec.clone(),
        })
    }

    fn q(&self) -> usize {
        self.ztz.rows
    }

    fn lambda(&self, vc: &VarianceComponents) -> Vec<f64> {
        let tp = vc.sigma_participant / vc.sigma_resid;
        let tq = vc.sigma_item / vc.sigma_resid;
        (0..self.q())
            .map(|k| if k < self.q_participants { tp } else { tq })
            .collect()
    }

    /// `Λ Zᵀ v` for an observation vector `v`.
    fn lambda_zt(&self, lambda: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        for (i, &vi) in v.iter().enumerate() {
            out[self.spec.participant[i]] += vi;
            out[self.q_participants + self.spec.item[i]] += vi;
        }
        out.iter_mut().zip(lambda).for_each(|(o, l)| *o *= l);
        out
    }

    fn evaluate(&self, vc: &VarianceComponents) -> Result<Evaluation> {
        vc.validate()?;
        let (n, p, q) = (self.n, self.p, self.q());
        let lambda = self.lambda(vc);

        let mut a = Mat::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                *a.at_mut(i, j) = lambda[i] * self.ztz.at(i, j) * lambda[j];
            }
            *a.at_mut(i, i) += 1.0;
        }
        let chol_a = Cholesky::new(&a)?;

        // U = L⁻¹ Λ Zᵀ X, column by column
        let mut u = Mat::zeros(q, p);
        let mut col = vec![0.0; q];
        for c in 0..p {
            for k in 0..q {
                col[k] = lambda[k] * self.ztx.at(k, c);
            }
            chol_a.forward(&mut col);
            for k in 0..q {
                *u.at_mut(k, c) = col[k];
            }
        }
        let y = &self.spec.y;
        let mut uy = self.lambda_zt(&lambda, y);
        chol_a.forward(&mut uy);

        let mut xty = vec![0.0; p];
        for i in 0..n {
            for (c, v) in self.spec.x.row(i).iter().enumerate() {
                xty[c] += v * y[i];
            }
        }
        let mut xhx = Mat::zeros(p, p);
        let mut xhy = vec![0.0; p];
        for a_ in 0..p {
            for b_ in 0..p {
                let s: f64 = (0..q).map(|k| u.at(k, a_) * u.at(k, b_)).sum();
                *xhx.at_mut(a_, b_) = self.xtx.at(a_, b_) - s;
            }
            xhy[a_] = xty[a_] - (0..q).map(|k| u.at(k, a_) * uy[k]).sum::<f64>();
        }
        let chol_x = Cholesky::new(&xhx).map_err(|_| Error::RankDeficient)?;
        let beta = chol_x.solve(&xhy);

        // penalised residual sum of squares: |r - ZΛb|² + |b|², b = A⁻¹ΛZᵀr
        let resid: Vec<f64> = (0..n)
            .map(|i| y[i] - self.spec.x.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
            .collect();
        let mut b = self.lambda_zt(&lambda, &resid);
        chol_a.forward(&mut b);
        chol_a.backward(&mut b);
        let mut prss: f64 = b.iter().map(|v| v * v).sum();
        for i in 0..n {
            let fitted = lambda[self.spec.participant[i]] * b[self.spec.participant[i]]
                + lambda[self.q_participants + self.spec.item[i]] * b[self.q_participants + self.spec.item[i]];
            prss += (resid[i] - fitted).powi(2);
        }

        let s2 = vc.sigma_resid * vc.sigma_resid;
        let dof = (n - p) as f64;
        let loglik = -0.5
            * (dof * (2.0 * PI).ln() + dof * s2.ln() + chol_a.log_det() + chol_x.log_det() + prss / s2);
        Ok(Evaluation {
            loglik,
            beta,
            xhx_inv: chol_x.inverse(),
        })
    }
}

fn full_rank(xtx: &Mat) -> bool {
    // relative pivot check on the scaled cross product
    let p = xtx.rows;
    let d: Vec<f64> = (0..p).map(|i| xtx.at(i, i).sqrt()).collect();
    if d.contains(&0.0) {
        return false;
    }
    let mut scaled = xtx.clone();
    for i in 0..p {
        for j in 0..p {
            *scaled.at_mut(i, j) /= d[i] * d[j];
        }
    }
    match Cholesky::new(&scaled) {
        Ok(ch) => ch.log_det() > (1e-12f64).ln() * p as f64 / 2.0 && ch.log_det().is_finite(),
        Err(_) => false,
    }
}

/// Restricted log-likelihood of the response under `vc`, with the fixed
/// effects profiled out by generalised least squares.
pub fn reml_loglik(vc: &VarianceComponents, spec: &MixedModelSpec) -> Result<f64> {
    Ok(CrossProducts::new(spec)?.evaluate(vc)?.loglik)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEffect {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedModelFit {
    pub fixed: Vec<FixedEffect>,
    pub variance: VarianceComponents,
    /// Participant / item SD estimates that sit on the zero boundary.
    pub boundary: [bool; 2],
    pub reml_loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub df_resid: usize,
    pub evaluations: usize,
}

impl MixedModelFit {
    pub fn effect(&self, name: &str) -> Option<&FixedEffect> {
        self.fixed.iter().find(|f| f.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.fixed.iter().map(|f| f.estimate).collect()
    }

    /// Number of estimated parameters: fixed effects plus three variance components.
    pub fn n_params(&self) -> usize {
        self.fixed.len() + 3
    }

    /// Fixed effects in row order, then variance components, then n / AIC / BIC.
    pub fn write_table<W: Write>(&self, out: W, vc_intervals: Option<&VarianceIntervals>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["term", "estimate", "se", "ci_lo", "ci_hi", "t", "p"])?;
        for f in &self.fixed {
            w.write_record([
                f.name.clone(),
                f.estimate.to_string(),
                f.se.to_string(),
                f.ci_lo.to_string(),
                f.ci_hi.to_string(),
                f.t.to_string(),
                f.p.to_string(),
            ])?;
        }
        let v = &self.variance;
        let ci = |k: usize| match vc_intervals {
            Some(iv) => (iv.bounds[k].0.to_string(), iv.bounds[k].1.to_string()),
            None => (String::new(), String::new()),
        };
        for (k, (name, sd)) in [
            ("Participant Intercept", v.sigma_participant),
            ("Question Intercept", v.sigma_item),
            ("Residual", v.sigma_resid),
        ]
        .into_iter()
        .enumerate()
        {
            let (lo, hi) = ci(k);
            w.write_record([name.to_string(), sd.to_string(), String::new(), lo, hi, String::new(), String::new()])?;
        }
        w.write_record(["Number of Observations".to_string(), self.n_obs.to_string()])?;
        w.write_record(["AIC".to_string(), self.aic.to_string()])?;
        w.write_record(["BIC".to_string(), self.bic.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// AIC and BIC from the REML log-likelihood, counting fixed effects plus
/// the three variance parameters.
pub fn information_criteria(fit: &MixedModelFit) -> (f64, f64) {
    criteria(fit.reml_loglik, fit.n_params(), fit.n_obs)
}

fn criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * (n as f64).ln())
}

/// Controls for [`fit_reml`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

// search box: log of random-effect SD relative to the residual SD, and log
// of the residual SD relative to the response SD
const LOG_RATIO_BOUNDS: (f64, f64) = (-12.0, 12.0);
const LOG_RESID_BOUNDS: (f64, f64) = (-25.0, 5.0);
// variance ratio below which a component is reported as zero
const BOUNDARY_RATIO: f64 = 1e-8;

/// Maximises the restricted likelihood with a simplex search, restarted once
/// from a perturbed optimum, then reports GLS fixed effects.
///
/// The search runs over `(ln σ_p/σ, ln σ_q/σ, ln σ)`. Working with the
/// random-effect SDs relative to the residual keeps `A` well conditioned
/// when the residual SD collapses towards zero.
pub fn fit_reml(spec: &MixedModelSpec, tol: f64, max_iter: usize) -> Result<MixedModelFit> {
    let cp = CrossProducts::new(spec)?;
    let y = &spec.y;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1).max(1) as f64).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };

    let to_vc = |phi: &[f64]| {
        let sigma = scale * phi[2].exp();
        VarianceComponents {
            sigma_participant: sigma * phi[0].exp(),
            sigma_item: sigma * phi[1].exp(),
            sigma_resid: sigma,
        }
    };
    let objective = |phi: &[f64]| match cp.evaluate(&to_vc(phi)) {
        Ok(e) => -e.loglik,
        Err(_) => f64::INFINITY,
    };

    let nm = NelderMead {
        initial_step: 1.0,
        f_tol: tol,
        x_tol: 1e-8,
        max_iter,
        ..NelderMead::new(
            vec![LOG_RATIO_BOUNDS.0, LOG_RATIO_BOUNDS.0, LOG_RESID_BOUNDS.0],
            vec![LOG_RATIO_BOUNDS.1, LOG_RATIO_BOUNDS.1, LOG_RESID_BOUNDS.1],
        )
    };
    let start = [(0.4f64).ln(), (0.4f64).ln(), (0.8f64).ln()];
    let first = nm.minimize(objective, &start);
    let restart: Vec<f64> = first.x.iter().map(|v| v + 0.5).collect();
    let second = NelderMead {
        initial_step: 0.5,
        ..nm.clone()
    }
    .minimize(objective, &restart);
    let evaluations = first.evaluations + second.evaluations;
    let best = if second.f <= first.f { &second } else { &first };
    if !second.converged {
        return Err(Error::NotConverged {
            iterations: first.iterations + second.iterations,
            best_loglik: -best.f,
            best_log_sigmas: {
                let v = to_vc(&best.x);
                [v.sigma_participant.ln(), v.sigma_item.ln(), v.sigma_resid.ln()]
            },
        });
    }

    let mut vc = to_vc(&best.x);
    let eval = cp.evaluate(&vc)?;
    let ratio = |s: f64| (s / vc.sigma_resid).powi(2);
    let boundary = [
        ratio(vc.sigma_participant) < BOUNDARY_RATIO,
        ratio(vc.sigma_item) < BOUNDARY_RATIO,
    ];
    if boundary[0] {
        vc.sigma_participant = 0.0;
    }
    if boundary[1] {
        vc.sigma_item = 0.0;
    }
    Ok(assemble_fit(spec, &cp, &eval, vc, boundary, evaluations))
}

fn assemble_fit(
    spec: &MixedModelSpec,
    cp: &CrossProducts,
    eval: &Evaluation,
    vc: VarianceComponents,
    boundary: [bool; 2],
    evaluations: usize,
) -> MixedModelFit {
    let df = cp.n - cp.p;
    let tcrit = t_quantile(0.975, df as f64);
    let s2 = vc.sigma_resid * vc.sigma_resid;
    let fixed = (0..cp.p)
        .map(|j| {
            let b = eval.beta[j];
            let se = (s2 * eval.xhx_inv.at(j, j)).sqrt();
            let t = b / se;
            FixedEffect {
                name: spec.column_names[j].clone(),
                estimate: b,
                se,
                ci_lo: b - tcrit * se,
                ci_hi: b + tcrit * se,
                t,
                p: t_two_sided_p(t, df as f64),
            }
        })
        .collect::<Vec<_>>();
    let (aic, bic) = criteria(eval.loglik, cp.p + 3, cp.n);
    MixedModelFit {
        fixed,
        variance: vc,
        boundary,
        reml_loglik: eval.loglik,
        aic,
        bic,
        n_obs: cp.n,
        df_resid: df,
        evaluations,
    }
}

/// [`fit_reml`] with default tolerances.
pub fn fit(spec: &MixedModelSpec) -> Result<MixedModelFit> {
    let o = FitOptions::default();
    fit_reml(spec, o.tol, o.max_iter)
}

/// Draws a data set from the model.
///
/// Participant intercepts are drawn first, then item intercepts, then
/// residuals in participant-major order. Participants are labelled `p1..`,
/// items `q1..` in the order given.
pub fn simulate_responses(
    b: &[f64; 7],
    vc: &VarianceComponents,
    n_participants: usize,
    items: &[ItemCovariates],
    seed: u64,
) -> Result<Vec<MixedRow>> {
    if !(vc.sigma_participant >= 0.0 && vc.sigma_item >= 0.0 && vc.sigma_resid >= 0.0) {
        return Err(Error::InvalidArgument("SDs must be non-negative".into()));
    }
    for it in items {
        it.validate()?;
    }
    let mut rng = rng::invocation(seed);
    let mut draw = |sd: f64, count: usize| -> Vec<f64> {
        if sd == 0.0 {
            return vec![0.0; count];
        }
        let dist = Normal::new(0.0, sd).expect("finite sd");
        (0..count).map(|_| rng.sample(dist)).collect()
    };
    let u_p = draw(vc.sigma_participant, n_participants);
    let u_q = draw(vc.sigma_item, items.len());
    let e = draw(vc.sigma_resid, n_participants * items.len());

    let mut rows = Vec::with_capacity(n_participants * items.len());
    for i in 0..n_participants {
        for (j, it) in items.iter().enumerate() {
            let fixed: f64 = it.design_row().iter().zip(b).map(|(x, c)| x * c).sum();
            rows.push(MixedRow {
                participant: format!("p{}", i + 1),
                item: format!("q{}", j + 1),
                covariates: *it,
                response: fixed + u_p[i] + u_q[j] + e[i * items.len() + j],
            });
        }
    }
    Ok(rows)
}

/// Input of a simulation run. Items default to the marble fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationParams {
    pub fixed: [f64; 7],
    pub sigma_participant: f64,
    pub sigma_item: f64,
    pub sigma_resid: f64,
    #[serde(default)]
    pub items: Option<Vec<ItemCovariates>>,
    /// Clamp responses into `[0, 1]` after drawing.
    #[serde(default)]
    pub clamp: bool,
}

impl SimulationParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: SimulationParams = serde_json::from_str(text)?;
        if p.fixed.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("fixed effects must be finite".into()));
        }
        VarianceComponents::new(p.sigma_participant, p.sigma_item, p.sigma_resid)?;
        if let Some(items) = &p.items {
            if items.is_empty() {
                return Err(Error::InvalidArgument("items list is empty".into()));
            }
            for it in items {
                it.validate()?;
            }
        }
        Ok(p)
    }

    pub fn items(&self) -> Vec<ItemCovariates> {
        match &self.items {
            Some(items) => items.clone(),
            None => crate::survey::marble_fixture().iter().map(|(_, s)| s.covariates()).collect(),
        }
    }

    pub fn variance(&self) -> Result<VarianceComponents> {
        VarianceComponents::new(self.sigma_participant, self.sigma_item, self.sigma_resid)
    }

    /// Simulated rows, clamped if requested, with the number of clamped rows.
    pub fn simulate(&self, n_participants: usize, seed: u64) -> Result<(Vec<MixedRow>, usize)> {
        let rows = simulate_responses(&self.fixed, &self.variance()?, n_participants, &self.items(), seed)?;
        Ok(if self.clamp { clamp_unit(&rows) } else { (rows, 0) })
    }
}

/// Model rows from a long export whose design table carries numeric `xB`,
/// `xH` and `xD` columns. The response is the chosen measure as a proportion
/// of the scale.
pub fn rows_from_export(export: &LongExport, measure: Measure) -> Result<Vec<MixedRow>> {
    let col = |name: &str| {
        export
            .factors
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::InvalidDesign(format!("design table lacks a `{name}` column")))
    };
    let (kb, kh, kd) = (col("xB")?, col("xH")?, col("xD")?);
    let num = |row: &LongRow, k: usize| -> Result<f64> {
        row.levels[k].parse::<f64>().map_err(|_| {
            Error::InvalidDesign(format!("question `{}`: `{}` is not a number", row.question, row.levels[k]))
        })
    };
    export
        .rows
        .iter()
        .map(|r| {
            let covariates = ItemCovariates {
                blue: num(r, kb)?,
                hidden: num(r, kh)?,
                discrepancy: num(r, kd)?,
            };
            covariates.validate()?;
            Ok(MixedRow {
                participant: r.respondent.clone(),
                item: r.question.clone(),
                covariates,
                response: r.value(measure) / NORMALIZED_MAX,
            })
        })
        .collect()
}

/// Clamps responses into `[0, 1]`, returning how many were moved.
pub fn clamp_unit(rows: &[MixedRow]) -> (Vec<MixedRow>, usize) {
    let mut moved = 0;
    let out = rows
        .iter()
        .map(|r| {
            let c = r.response.clamp(0.0, 1.0);
            if c != r.response {
                moved += 1;
            }
            MixedRow {
                response: c,
                ..r.clone()
            }
        })
        .collect();
    (out, moved)
}

/// Approximate percentile intervals for the three SDs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceIntervals {
    /// Participant, item, residual.
    pub bounds: [(f64, f64); 3],
    pub replicates: usize,
    pub failed: usize,
}

/// Parametric bootstrap: simulate from the fitted model, refit, and take
/// 2.5% / 97.5% quantiles of each SD. Replicate `r` uses stream `r + 1`.
pub fn variance_component_intervals(
    fit: &MixedModelFit,
    spec: &MixedModelSpec,
    replicates: usize,
    seed: u64,
) -> Result<VarianceIntervals> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let beta = fit.estimates();
    let fitted: Vec<f64> = (0..spec.n_obs())
        .map(|i| spec.x.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();
    let v = fit.variance;
    let results: Vec<Option<[f64; 3]>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::replicate(seed, r as u64);
            let mut normal = |sd: f64| {
                if sd > 0.0 {
                    rng.sample(Normal::new(0.0, sd).unwrap())
                } else {
                    0.0
                }
            };
            let up: Vec<f64> = (0..spec.n_participants()).map(|_| normal(v.sigma_participant)).collect();
            let uq: Vec<f64> = (0..spec.n_items()).map(|_| normal(v.sigma_item)).collect();
            let y: Vec<f64> = (0..spec.n_obs())
                .map(|i| fitted[i] + up[spec.participant[i]] + uq[spec.item[i]] + normal(v.sigma_resid))
                .collect();
            let refit = fit_reml(&spec.with_response(y).ok()?, 1e-10, 10_000).ok()?;
            let w = refit.variance;
            Some([w.sigma_participant, w.sigma_item, w.sigma_resid])
        })
        .collect();
    let ok: Vec<[f64; 3]> = results.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(Error::InvalidArgument("too few successful bootstrap refits".into()));
    }
    let quant = |k: usize| {
        let mut v: Vec<f64> = ok.iter().map(|s| s[k]).collect();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        (at(0.025), at(0.975))
    };
    Ok(VarianceIntervals {
        bounds: [quant(0), quant(1), quant(2)],
        replicates,
        failed: replicates - ok.len(),
    })
}
