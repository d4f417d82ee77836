//! Relevance-probability generators. Gamma variates are produced in log
//! space so that Beta shapes as small as 1/20 neither underflow nor
//! produce NaN.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{generator, uniform53_open};

pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Beta { alpha: f64, beta: f64 },
    /// Density `∝ p^{η−1}` on `[0, 1]`.
    Powerlaw { eta: f64 },
    /// Every draw equals `p`.
    Point { p: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Beta { alpha, beta } => {
                alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()
            }
            Distribution::Powerlaw { eta } => eta > 0.0 && eta.is_finite(),
            Distribution::Point { p } => (0.0..=1.0).contains(&p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad distribution parameters {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Beta { alpha, beta } => beta_draw(rng, alpha, beta),
            Distribution::Powerlaw { eta } => {
                uniform53_open(rng).powf(1.0 / eta).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
            }
            Distribution::Point { p } => p,
        }
    }

    pub fn sample_n(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = generator(seed);
        Ok((0..n).map(|_| self.sample(&mut rng)).collect())
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`: Marsaglia–Tsang for `shape ≥ 1`;
/// below 1 the boost `G(a) = G(a + 1)·U^{1/a}` is applied in log space.
pub(crate) fn ln_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let ln_u = uniform53_open(rng).ln();
        return ln_gamma_draw(rng, shape + 1.0) + ln_u / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let ln_u = uniform53_open(rng).ln();
        if ln_u < 0.5 * x * x + d - d * v + d * v.ln() {
            return d.ln() + v.ln();
        }
    }
}

fn beta_draw<R: Rng + ?Sized>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    let lx = ln_gamma_draw(rng, alpha);
    let ly = ln_gamma_draw(rng, beta);
    (1.0 / (1.0 + (ly - lx).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `n` i.i.d. `Beta(alpha, beta)` draws, clamped to `[1e-12, 1 − 1e-12]`.
pub fn sample_beta(alpha: f64, beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Distribution::Beta { alpha, beta }.sample_n(n, seed)
}

/// `n` draws `u^{1/η}`.
pub fn sample_powerlaw(eta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Distribution::Powerlaw { eta }.sample_n(n, seed)
}
