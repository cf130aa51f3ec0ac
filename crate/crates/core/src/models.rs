//! Frame-level reduction predictors (ridge-stabilized linear regression
//! and k-nearest neighbors), per-conversation holdout and evaluation.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::midlevel::{column_checksum, feature_names, FEATURE_DIM};
use crate::stats::pearson;

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_K: usize = 5;

fn check_width(row: &[f64], dim: usize) -> Result<()> {
    if row.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: row.len(),
        });
    }
    Ok(())
}

/// Column-wise z-scoring fitted on a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns with zero standard deviation; they map to 0.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "standardizer needs 2 rows, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            check_width(row, dim)?;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut ss = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in ss.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = ss.iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        let constant = sd.iter().map(|&s| s == 0.0).collect();
        Ok(Self { mean, sd, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_width(row, self.dim())?;
        Ok((0..self.dim())
            .map(|j| {
                if self.constant[j] {
                    0.0
                } else {
                    (row[j] - self.mean[j]) / self.sd[j]
                }
            })
            .collect())
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }

    /// Inverse of [`apply_row`](Self::apply_row); constant columns come
    /// back as their mean.
    pub fn inverse_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_width(z, self.dim())?;
        Ok((0..self.dim())
            .map(|j| {
                if self.constant[j] {
                    self.mean[j]
                } else {
                    z[j] * self.sd[j] + self.mean[j]
                }
            })
            .collect())
    }
}

/// Provenance stored with a trained model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainingMeta {
    pub language: String,
    pub conversations: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub meta: TrainingMeta,
}

/// Least squares with a ridge term `lambda` on the weights (not the
/// intercept), solved from centered normal equations by Cholesky.
pub fn train_linear(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LinearModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dim = x.first().map_or(0, Vec::len);
    if x.len() <= dim {
        return Err(Error::InsufficientData(format!(
            "linear regression needs more than {dim} rows, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mut xm = vec![0.0; dim];
    for row in x {
        check_width(row, dim)?;
        for (m, v) in xm.iter_mut().zip(row) {
            *m += v;
        }
    }
    xm.iter_mut().for_each(|m| *m /= n);
    let ym = y.iter().sum::<f64>() / n;

    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    let mut c = vec![0.0; dim];
    for (row, &yi) in x.iter().zip(y) {
        for j in 0..dim {
            c[j] = row[j] - xm[j];
        }
        let yc = yi - ym;
        for j in 0..dim {
            let cj = c[j];
            if cj == 0.0 {
                continue;
            }
            b[j] += cj * yc;
            let line = &mut a[j * dim..j * dim + j + 1];
            for (aj, ck) in line.iter_mut().zip(&c[..=j]) {
                *aj += cj * ck;
            }
        }
    }
    for j in 0..dim {
        a[j * dim + j] += lambda;
    }
    let weights = cholesky_solve(&mut a, &b, dim)?;
    let intercept = ym - weights.iter().zip(&xm).map(|(w, m)| w * m).sum::<f64>();
    if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Undefined("non-finite regression solution".into()));
    }
    Ok(LinearModel {
        weights,
        intercept,
        lambda,
        meta: TrainingMeta {
            rows: x.len(),
            ..TrainingMeta::default()
        },
    })
}

/// Solves `A w = b` for symmetric positive definite `A` given by its
/// lower triangle (row-major); `A` is overwritten by its factor.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Undefined("normal equations are not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * z[k];
        }
        z[i] = s / a[i * n + i];
    }
    let mut w = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= a[k * n + i] * w[k];
        }
        w[i] = s / a[i * n + i];
    }
    Ok(w)
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        check_width(row, self.weights.len())?;
        Ok(self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Writes the key=value header and `feature,coefficient` rows.
    /// Coefficients are written in shortest round-trip form.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names = feature_names();
        write_header(&mut out, "linear", &self.meta, self.weights.len())?;
        writeln!(out, "lambda={:e}", self.lambda)?;
        writeln!(out, "feature,coefficient")?;
        writeln!(out, "intercept,{:e}", self.intercept)?;
        for (name, w) in names.iter().zip(&self.weights) {
            writeln!(out, "{name},{w:e}")?;
        }
        Ok(())
    }
}

fn write_header<W: Write>(
    out: &mut W,
    kind: &str,
    meta: &TrainingMeta,
    dim: usize,
) -> std::io::Result<()> {
    writeln!(out, "model={kind}")?;
    writeln!(out, "language={}", meta.language)?;
    writeln!(out, "columns={dim}")?;
    writeln!(out, "column_checksum={}", column_checksum(&feature_names()))?;
    writeln!(out, "rows={}", meta.rows)?;
    writeln!(out, "conversations={}", meta.conversations.join(";"))
}

/// k-nearest-neighbor regressor over standardized rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub standardizer: Standardizer,
    /// Standardized training rows, row-major.
    store: Vec<f64>,
    pub labels: Vec<f64>,
    pub k: usize,
    pub meta: TrainingMeta,
}

pub fn train_knn(x: &[Vec<f64>], y: &[f64], k: usize) -> Result<KnnModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if k == 0 || k > x.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            x.len()
        )));
    }
    let standardizer = Standardizer::fit(x)?;
    let mut store = Vec::with_capacity(x.len() * standardizer.dim());
    for row in x {
        store.extend(standardizer.apply_row(row)?);
    }
    Ok(KnnModel {
        standardizer,
        store,
        labels: y.to_vec(),
        k,
        meta: TrainingMeta {
            rows: x.len(),
            ..TrainingMeta::default()
        },
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Indices of the k nearest training rows, nearest first; equal
    /// distances are ordered by row index.
    pub fn neighbors(&self, row: &[f64]) -> Result<Vec<usize>> {
        let q = self.standardizer.apply_row(row)?;
        let dim = self.dim();
        let mut d: Vec<(f64, usize)> = self
            .store
            .chunks_exact(dim)
            .enumerate()
            .map(|(i, t)| {
                let s: f64 = t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (s, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let nn = self.neighbors(row)?;
        Ok(nn.iter().map(|&i| self.labels[i]).sum::<f64>() / nn.len() as f64)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }

    /// Writes the header with `k` and the standardizer as
    /// `feature,mean,sd` rows. The training rows themselves are not
    /// stored; the model is rebuilt from the listed conversations.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_header(&mut out, "knn", &self.meta, self.dim())?;
        writeln!(out, "k={}", self.k)?;
        writeln!(out, "feature,mean,sd")?;
        for (name, (m, s)) in feature_names()
            .iter()
            .zip(self.standardizer.mean.iter().zip(&self.standardizer.sd))
        {
            writeln!(out, "{name},{m:e},{s:e}")?;
        }
        Ok(())
    }
}

/// Header fields of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub kind: String,
    pub meta: TrainingMeta,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
}

/// A model file read back: the header, plus the linear model when the
/// file holds one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub linear: Option<LinearModel>,
}

pub fn read_model<R: BufRead>(input: R, source: &str) -> Result<ModelFile> {
    let mut header = ModelHeader {
        kind: String::new(),
        meta: TrainingMeta::default(),
        lambda: None,
        k: None,
    };
    let mut checksum = None;
    let mut coefficients: Vec<(String, f64)> = Vec::new();
    let mut in_body = false;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line_no = i + 1;
        let bad = |m: &str| Error::parse(source, line_no, m.to_string());
        if line.trim().is_empty() {
            continue;
        }
        if !in_body {
            if line.starts_with("feature,") {
                in_body = true;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key {
                "model" => header.kind = value.to_string(),
                "language" => header.meta.language = value.to_string(),
                "rows" => header.meta.rows = value.parse().map_err(|_| bad("bad rows"))?,
                "conversations" => {
                    header.meta.conversations = value
                        .split(';')
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "column_checksum" => checksum = Some(value.to_string()),
                "lambda" => header.lambda = Some(value.parse().map_err(|_| bad("bad lambda"))?),
                "k" => header.k = Some(value.parse().map_err(|_| bad("bad k"))?),
                "columns" => {
                    let c: usize = value.parse().map_err(|_| bad("bad columns"))?;
                    if c != FEATURE_DIM {
                        return Err(Error::DimensionMismatch {
                            expected: FEATURE_DIM,
                            got: c,
                        });
                    }
                }
                _ => return Err(bad(&format!("unknown key {key:?}"))),
            }
        } else if header.kind == "linear" {
            let (name, v) = line.split_once(',').ok_or_else(|| bad("expected name,value"))?;
            let v: f64 = v.parse().map_err(|_| bad("bad coefficient"))?;
            coefficients.push((name.to_string(), v));
        }
    }
    let expected = column_checksum(&feature_names());
    match checksum {
        Some(c) if c == expected => {}
        other => {
            return Err(Error::SchemaMismatch {
                expected,
                found: other.unwrap_or_default(),
            })
        }
    }
    let linear = if header.kind == "linear" {
        let names = feature_names();
        let ok = coefficients.len() == FEATURE_DIM + 1
            && coefficients[0].0 == "intercept"
            && coefficients[1..].iter().zip(&names).all(|(c, n)| &c.0 == n);
        if !ok {
            return Err(Error::parse(source, 0, "coefficient rows do not match the feature columns"));
        }
        Some(LinearModel {
            intercept: coefficients[0].1,
            weights: coefficients[1..].iter().map(|c| c.1).collect(),
            lambda: header.lambda.unwrap_or(DEFAULT_RIDGE),
            meta: header.meta.clone(),
        })
    } else if header.kind == "knn" {
        if header.k.is_none() {
            return Err(Error::parse(source, 0, "knn model without k"));
        }
        None
    } else {
        return Err(Error::parse(source, 1, format!("unknown model kind {:?}", header.kind)));
    };
    Ok(ModelFile { header, linear })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `None` when predictions or labels have zero variance.
    pub r: Option<f64>,
    pub n: usize,
    pub holdout: Vec<String>,
}

pub fn evaluate(predictions: &[f64], labels: &[f64], holdout: &[String]) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.len() < 2 {
        return Err(Error::InsufficientData("evaluation needs 2 frames".into()));
    }
    let r = match pearson(predictions, labels) {
        Ok(r) => Some(r),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        r,
        n: labels.len(),
        holdout: holdout.to_vec(),
    })
}

/// Train/test partition of conversations, with frame counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub train_frames: usize,
    pub test_frames: usize,
}

impl SplitPlan {
    /// `conversations` lists each id with its frame count.
    pub fn new(conversations: &[(String, usize)], holdout: &[String]) -> Result<Self> {
        for h in holdout {
            if !conversations.iter().any(|(id, _)| id == h) {
                return Err(Error::UnknownConversation(h.clone()));
            }
        }
        let mut plan = SplitPlan {
            train: Vec::new(),
            test: Vec::new(),
            train_frames: 0,
            test_frames: 0,
        };
        for (id, frames) in conversations {
            if holdout.contains(id) {
                plan.test.push(id.clone());
                plan.test_frames += frames;
            } else {
                plan.train.push(id.clone());
                plan.train_frames += frames;
            }
        }
        if plan.train.is_empty() || plan.train_frames == 0 {
            return Err(Error::EmptyTrainSet(holdout.to_vec()));
        }
        Ok(plan)
    }

    /// Train share of all frames, in percent.
    pub fn train_percent(&self) -> f64 {
        100.0 * self.train_frames as f64 / (self.train_frames + self.test_frames) as f64
    }
}

/// Labeled feature rows of one conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationRows {
    pub conversation: String,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub conversations: Vec<String>,
}

impl Dataset {
    /// Digest of the rows and labels, for checking what a model saw.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (row, y) in self.rows.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_le_bytes());
            }
            h.update(y.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

pub struct Split {
    pub plan: SplitPlan,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn split_by_holdout(conversations: Vec<ConversationRows>, holdout: &[String]) -> Result<Split> {
    let counts: Vec<(String, usize)> = conversations
        .iter()
        .map(|c| (c.conversation.clone(), c.rows.len()))
        .collect();
    let plan = SplitPlan::new(&counts, holdout)?;
    let (mut train, mut test) = (Dataset::default(), Dataset::default());
    for c in conversations {
        if c.rows.len() != c.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: c.rows.len(),
                got: c.labels.len(),
            });
        }
        let target = if holdout.contains(&c.conversation) {
            &mut test
        } else {
            &mut train
        };
        target.conversations.push(c.conversation);
        target.rows.extend(c.rows);
        target.labels.extend(c.labels);
    }
    Ok(Split { plan, train, test })
}
