//! Nearest class-mean classification of Viterbi paths.
//!
//! Paths are compared as real vectors. Every measure is oriented so that a
//! smaller value means more similar; cosine is therefore negated.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound on pooled per-component variances.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    L1,
    L2,
    #[default]
    Mahalanobis,
    Cosine,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::L1, Measure::L2, Measure::Mahalanobis, Measure::Cosine];
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::L1 => "l1",
            Measure::L2 => "l2",
            Measure::Mahalanobis => "mahalanobis",
            Measure::Cosine => "cosine",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Measure::L1),
            "l2" => Ok(Measure::L2),
            "mahalanobis" | "md" => Ok(Measure::Mahalanobis),
            "cosine" | "cos" => Ok(Measure::Cosine),
            other => Err(Error::invalid(format!("unknown distance measure '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Per-component variance pooled over every training path.
    #[default]
    PooledDiagonal,
    /// Full pooled covariance plus `ridge * I`.
    FullRidge,
}

/// Distance between two equal-length vectors. `pooled_var` is required for
/// [`Measure::Mahalanobis`] and ignored otherwise.
pub fn dist(x: &[f64], y: &[f64], measure: Measure, pooled_var: Option<&[f64]>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let pairs = x.iter().zip(y);
    Ok(match measure {
        Measure::L1 => pairs.map(|(a, b)| (a - b).abs()).sum(),
        Measure::L2 => pairs.map(|(a, b)| (a - b) * (a - b)).sum(),
        Measure::Mahalanobis => {
            let var = pooled_var.ok_or_else(|| Error::invalid("Mahalanobis distance needs pooled variances"))?;
            if var.len() != x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} variances for vectors of length {}",
                    var.len(),
                    x.len()
                )));
            }
            pairs.zip(var).map(|((a, b), v)| (a - b) * (a - b) / v).sum()
        }
        Measure::Cosine => {
            let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Err(Error::invalid("cosine distance of a zero vector"));
            }
            -pairs.map(|(a, b)| a * b).sum::<f64>() / (nx * ny)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class_id: String,
    pub mean_path: Vec<f64>,
    pub n_train: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub measure: Measure,
    pub covariance: CovarianceMode,
    pub var_floor: f64,
    /// Diagonal loading for [`CovarianceMode::FullRidge`].
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            measure: Measure::Mahalanobis,
            covariance: CovarianceMode::PooledDiagonal,
            var_floor: DEFAULT_VARIANCE_FLOOR,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState {
    pub classes: Vec<ClassModel>,
    pub pooled_var: Vec<f64>,
    pub measure: Measure,
    pub covariance: CovarianceMode,
    /// Row-major inverse of the regularised covariance, full mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class_index: usize,
    pub class_id: String,
    /// Distance to every class mean, in class order.
    pub scores: Vec<f64>,
}

impl Classification {
    pub fn best_score(&self) -> f64 {
        self.scores[self.class_index]
    }
}

/// Builds class means and pooled statistics from training paths grouped by
/// class. Group order fixes class indices.
pub fn fit(groups: &[(String, Vec<Vec<f64>>)], opts: &FitOptions) -> Result<ClassifierState> {
    if groups.is_empty() {
        return Err(Error::invalid("no classes to fit"));
    }
    let t_len = groups
        .iter()
        .find_map(|(_, paths)| paths.first().map(Vec::len))
        .ok_or_else(|| Error::invalid("no training paths"))?;

    let mut classes = Vec::with_capacity(groups.len());
    for (id, paths) in groups {
        if paths.is_empty() {
            return Err(Error::invalid(format!("class '{id}' has no training paths")));
        }
        let mut mean = vec![0.0; t_len];
        for p in paths {
            if p.len() != t_len {
                return Err(Error::DimensionMismatch(format!(
                    "class '{id}' has a path of length {} (expected {t_len})",
                    p.len()
                )));
            }
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= paths.len() as f64);
        classes.push(ClassModel {
            class_id: id.clone(),
            mean_path: mean,
            n_train: paths.len(),
        });
    }

    let all: Vec<&Vec<f64>> = groups.iter().flat_map(|(_, p)| p).collect();
    let n = all.len() as f64;
    let mut grand = vec![0.0; t_len];
    for p in &all {
        for (g, v) in grand.iter_mut().zip(p.iter()) {
            *g += v;
        }
    }
    grand.iter_mut().for_each(|g| *g /= n);
    let mut pooled_var = vec![0.0; t_len];
    for p in &all {
        for ((acc, v), g) in pooled_var.iter_mut().zip(p.iter()).zip(&grand) {
            *acc += (v - g) * (v - g);
        }
    }
    pooled_var.iter_mut().for_each(|v| *v = (*v / n).max(opts.var_floor));

    let precision = match opts.covariance {
        CovarianceMode::PooledDiagonal => None,
        CovarianceMode::FullRidge => {
            let mut cov = DMatrix::<f64>::zeros(t_len, t_len);
            for p in &all {
                let d = DVector::from_iterator(t_len, p.iter().zip(&grand).map(|(v, g)| v - g));
                cov += &d * d.transpose();
            }
            cov /= n;
            for i in 0..t_len {
                cov[(i, i)] += opts.ridge.max(opts.var_floor);
            }
            let chol = cov
                .cholesky()
                .ok_or_else(|| Error::Numeric("regularised covariance is not positive definite".into()))?;
            let inv = chol.inverse();
            Some((0..t_len).flat_map(|r| (0..t_len).map(move |c| (r, c))).map(|rc| inv[rc]).collect())
        }
    };

    Ok(ClassifierState {
        classes,
        pooled_var,
        measure: opts.measure,
        covariance: opts.covariance,
        precision,
    })
}

impl ClassifierState {
    pub fn path_len(&self) -> usize {
        self.pooled_var.len()
    }

    /// Distance under an explicit measure; Mahalanobis uses the fitted
    /// covariance (diagonal or full).
    pub fn distance_with(&self, x: &[f64], y: &[f64], measure: Measure) -> Result<f64> {
        match (measure, &self.precision) {
            (Measure::Mahalanobis, Some(p)) => {
                let t = self.path_len();
                if x.len() != t || y.len() != t {
                    return Err(Error::DimensionMismatch(format!("expected vectors of length {t}")));
                }
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                Ok((0..t)
                    .map(|r| d[r] * p[r * t..(r + 1) * t].iter().zip(&d).map(|(q, v)| q * v).sum::<f64>())
                    .sum())
            }
            _ => dist(x, y, measure, Some(&self.pooled_var)),
        }
    }

    pub fn classify(&self, path: &[f64]) -> Result<Classification> {
        self.classify_with(path, self.measure)
    }

    /// Argmin over class means; equal scores resolve to the lowest class
    /// index.
    pub fn classify_with(&self, path: &[f64], measure: Measure) -> Result<Classification> {
        if self.classes.is_empty() {
            return Err(Error::invalid("classifier has no classes"));
        }
        if path.len() != self.path_len() {
            return Err(Error::DimensionMismatch(format!(
                "path of length {} for a classifier trained on length {}",
                path.len(),
                self.path_len()
            )));
        }
        let scores = self
            .classes
            .iter()
            .map(|c| self.distance_with(path, &c.mean_path, measure))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s < scores[best] {
                best = i;
            }
        }
        Ok(Classification {
            class_index: best,
            class_id: self.classes[best].class_id.clone(),
            scores,
        })
    }
}
