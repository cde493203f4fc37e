//! Zero-mean, unit-variance noise with light (Gaussian) and heavy (Weibull,
//! Burr XII) tails.
//!
//! Weibull and Burr draws use closed-form inverse CDFs and are then shifted and
//! scaled so every coordinate has mean 0 and variance 1. A vector of `n` i.i.d.
//! coordinates therefore has `E||xi||^2 = n`.

use std::f64::consts::SQRT_2;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::RngStream;

/// Weibull shape used for the heavy-tailed toy experiments.
pub const WEIBULL_SHAPE: f64 = 0.2;
pub const BURR_C: f64 = 1.0;
pub const BURR_D: f64 = 2.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    Weibull { c: f64 },
    BurrXii { c: f64, d: f64 },
}

impl NoiseFamily {
    pub fn weibull() -> Self {
        NoiseFamily::Weibull { c: WEIBULL_SHAPE }
    }

    pub fn burr() -> Self {
        NoiseFamily::BurrXii {
            c: BURR_C,
            d: BURR_D,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Weibull { .. } => "weibull",
            NoiseFamily::BurrXii { .. } => "burr",
        }
    }

    /// Parses `gaussian`, `weibull` or `burr` with the default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Some(NoiseFamily::Gaussian),
            "weibull" => Some(NoiseFamily::weibull()),
            "burr" | "burr-xii" | "burrxii" => Some(NoiseFamily::burr()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NoiseFamily::Gaussian => Ok(()),
            NoiseFamily::Weibull { c } => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("c", format!("Weibull shape must be positive, got {c}")))
                }
            }
            NoiseFamily::BurrXii { c, d } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid("c", format!("Burr c must be positive, got {c}")));
                }
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::invalid("d", format!("Burr d must be positive, got {d}")));
                }
                if c * d <= 2.0 {
                    return Err(Error::invalid(
                        "c*d",
                        format!("Burr variance needs c*d > 2, got {}", c * d),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Raw (pre shift/scale) quantile function of `family` at `u` in (0, 1).
///
/// * Weibull: `alpha_w * (-ln(1-u))^(1/c)` where `alpha_w` makes the raw
///   variance 1.
/// * Burr XII: `((1-u)^(-1/d) - 1)^(1/c)`.
/// * Gaussian: the standard normal quantile.
pub fn inverse_cdf_sample(family: &NoiseFamily, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("must lie in (0, 1), got {u}")));
    }
    family.validate()?;
    Ok(raw_quantile(family, weibull_scale_or_one(family), u))
}

fn weibull_scale_or_one(family: &NoiseFamily) -> f64 {
    match *family {
        NoiseFamily::Weibull { c } => weibull_unit_scale(c),
        _ => 1.0,
    }
}

#[inline]
fn raw_quantile(family: &NoiseFamily, alpha_w: f64, u: f64) -> f64 {
    match *family {
        NoiseFamily::Gaussian => -SQRT_2 * erfc_inv(2.0 * u),
        NoiseFamily::Weibull { c } => alpha_w * (-(-u).ln_1p()).powf(1.0 / c),
        NoiseFamily::BurrXii { c, d } => {
            let t = (-(-u).ln_1p() / d).exp_m1();
            if c == 1.0 {
                t
            } else {
                t.powf(1.0 / c)
            }
        }
    }
}

/// Scale `alpha` making a Weibull(c, alpha) variable have unit variance:
/// `1 / sqrt(Gamma(1 + 2/c) - Gamma(1 + 1/c)^2)`.
pub fn weibull_unit_scale(c: f64) -> f64 {
    let g1 = gamma(1.0 + 1.0 / c);
    let g2 = gamma(1.0 + 2.0 / c);
    1.0 / (g2 - g1 * g1).sqrt()
}

/// `r`-th raw moment of Burr XII(c, d): `d * B((c d - r)/c, (c + r)/c)`,
/// evaluated through log-gamma.
pub fn burr_moment(c: f64, d: f64, r: u32) -> Result<f64> {
    if !(c > 0.0 && d > 0.0) {
        return Err(Error::invalid("c, d", format!("must be positive, got c = {c}, d = {d}")));
    }
    if r == 0 {
        return Err(Error::invalid("r", "moment order must be positive"));
    }
    let rf = f64::from(r);
    if c * d <= rf {
        return Err(Error::MomentDoesNotExist { c, d, order: r });
    }
    let p = (c * d - rf) / c;
    let q = (c + rf) / c;
    Ok((d.ln() + ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp())
}

/// A coordinate-wise i.i.d. noise generator producing vectors of length
/// `dimension` whose coordinates have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    pub dimension: usize,
    /// Weibull scale `alpha_w` (1 for the other families).
    pub raw_scale: f64,
    /// Added to the raw draw before `scale`.
    pub shift: f64,
    /// Multiplies the shifted draw.
    pub scale: f64,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, dimension: usize) -> Result<Self> {
        family.validate()?;
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be at least 1"));
        }
        let (raw_scale, shift, scale) = match family {
            NoiseFamily::Gaussian => (1.0, 0.0, 1.0),
            NoiseFamily::Weibull { c } => {
                let alpha = weibull_unit_scale(c);
                (alpha, -alpha * gamma(1.0 + 1.0 / c), 1.0)
            }
            NoiseFamily::BurrXii { c, d } => {
                let m1 = burr_moment(c, d, 1)?;
                let m2 = burr_moment(c, d, 2)?;
                (1.0, -m1, 1.0 / (m2 - m1 * m1).sqrt())
            }
        };
        Ok(NoiseModel {
            family,
            dimension,
            raw_scale,
            shift,
            scale,
        })
    }

    /// One standardized scalar draw.
    #[inline]
    pub fn sample_scalar(&self, rng: &mut RngStream) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => rng.sample(StandardNormal),
            _ => {
                let u: f64 = rng.sample(Open01);
                (raw_quantile(&self.family, self.raw_scale, u) + self.shift) * self.scale
            }
        }
    }

    pub fn fill(&self, rng: &mut RngStream, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = self.sample_scalar(rng));
    }

    /// Adds one draw to every coordinate of `acc`.
    pub fn add_to(&self, rng: &mut RngStream, acc: &mut [f64]) {
        acc.iter_mut().for_each(|v| *v += self.sample_scalar(rng));
    }

    pub fn sample_noise(&self, rng: &mut RngStream) -> Vector {
        let mut v = Vector::zeros(self.dimension);
        self.fill(rng, &mut v);
        v
    }

    /// CDF of one standardized coordinate.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => 0.5 * erfc(-x / SQRT_2),
            NoiseFamily::Weibull { c } => {
                let raw = x / self.scale - self.shift;
                if raw <= 0.0 {
                    0.0
                } else {
                    -(-(raw / self.raw_scale).powf(c)).exp_m1()
                }
            }
            NoiseFamily::BurrXii { c, d } => {
                let raw = x / self.scale - self.shift;
                if raw <= 0.0 {
                    0.0
                } else {
                    -(-d * raw.powf(c).ln_1p()).exp_m1()
                }
            }
        }
    }

    /// `P(|X| > t)` for one standardized coordinate.
    pub fn tail_probability(&self, t: f64) -> f64 {
        let upper = match self.family {
            NoiseFamily::Gaussian => 0.5 * erfc(t / SQRT_2),
            NoiseFamily::Weibull { c } => {
                let raw = t / self.scale - self.shift;
                if raw <= 0.0 {
                    1.0
                } else {
                    (-(raw / self.raw_scale).powf(c)).exp()
                }
            }
            NoiseFamily::BurrXii { c, d } => {
                let raw = t / self.scale - self.shift;
                if raw <= 0.0 {
                    1.0
                } else {
                    (-d * raw.powf(c).ln_1p()).exp()
                }
            }
        };
        upper + self.cdf(-t)
    }
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`. Sorts in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
