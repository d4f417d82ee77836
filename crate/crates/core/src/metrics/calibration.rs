//! Reliability curves and Platt scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CALIBRATION_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Bins with the same number of samples after sorting by prediction.
    #[default]
    EqualCount,
    /// Bins of equal width on `[0, 1]`.
    EqualWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub positive_rate: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationCurve {
    pub binning: Binning,
    /// Nonempty bins in increasing order of prediction.
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    /// Largest `|mean_predicted − positive_rate|` over bins.
    pub fn max_deviation(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| (b.mean_predicted - b.positive_rate).abs())
            .fold(0.0, f64::max)
    }
}

pub fn calibration_curve(
    probs: &[f64],
    labels: &[bool],
    nbins: usize,
    binning: Binning,
) -> Result<CalibrationCurve> {
    if labels.is_empty() {
        return Err(Error::MissingLabels);
    }
    if probs.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if nbins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let n = probs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nbins];
    match binning {
        Binning::EqualCount => {
            let (base, extra) = (n / nbins, n % nbins);
            let mut start = 0;
            for (b, bin) in members.iter_mut().enumerate() {
                let len = base + usize::from(b < extra);
                bin.extend_from_slice(&order[start..start + len]);
                start += len;
            }
        }
        Binning::EqualWidth => {
            for &i in &order {
                let b = ((probs[i] * nbins as f64).floor() as usize).min(nbins - 1);
                members[b].push(i);
            }
        }
    }
    let bins = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let c = m.len() as f64;
            CalibrationBin {
                mean_predicted: m.iter().map(|&i| probs[i]).sum::<f64>() / c,
                positive_rate: m.iter().filter(|&&i| labels[i]).count() as f64 / c,
                count: m.len(),
            }
        })
        .collect();
    Ok(CalibrationCurve { binning, bins })
}

/// `P(relevant | s) = σ(a·s + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub fn apply(&self, score: f64) -> f64 {
        sigmoid(self.a * score + self.b)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

const PLATT_MAX_ITER: usize = 100;
const PLATT_GRAD_TOL: f64 = 1e-8;

/// Maximum-likelihood Platt fit with smoothed targets
/// `(N₊+1)/(N₊+2)` and `1/(N₋+2)`, by damped Newton iterations.
pub fn platt_fit(scores: &[f64], labels: &[bool]) -> Result<PlattParams> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    if scores.iter().all(|&s| s == scores[0]) {
        return Err(Error::DegenerateScores);
    }
    let hi = (pos as f64 + 1.0) / (pos as f64 + 2.0);
    let lo = 1.0 / (neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    // Negative log-likelihood: Σ softplus(z) − t·z with z = a·s + b.
    let loss = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                let z = a * s + b;
                softplus(z) - t * z
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((pos as f64 + 1.0) / (neg as f64 + 1.0)).ln();
    let mut f = loss(a, b);
    for _ in 0..PLATT_MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let p = sigmoid(a * s + b);
            let d = p - t;
            ga += d * s;
            gb += d;
            let w = p * (1.0 - p);
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        if ga.hypot(gb) < PLATT_GRAD_TOL {
            break;
        }
        // Small ridge keeps the system solvable when probabilities saturate.
        let ridge = 1e-12;
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        if !(det > 0.0) {
            return Err(Error::NumericalFailure("Platt Hessian is singular".into()));
        }
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = loss(na, nb);
            if nf <= f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return Ok(PlattParams { a, b });
            }
        }
    }
    Ok(PlattParams { a, b })
}

pub fn platt_apply(params: &PlattParams, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| params.apply(s)).collect()
}
