//! Theorem-driven parameter schedules: the `alpha`/`A` sequences of clipped-SSTM,
//! clipping levels, stepsizes, batchsize policies and restart sizing.
//!
//! Every function here is pure: identical inputs give bit-identical outputs.
//! The numerical constants of the convergence theorems (6000, 10368, 27, 80,
//! 81, 320) are used verbatim, multiplied by [`TheoremConstants::practical_scale`]
//! (default 1), since the theorems are known to be conservative.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `C` in the clipped-SSTM analysis.
pub const SSTM_C: f64 = 2.236_067_977_499_79; // sqrt(5)
/// `C` in the clipped-SGD analysis.
pub const SGD_C: f64 = SQRT_2;

const FIXED_POINT_CAP: usize = 100;
const RESTART_LOG_SLACK: f64 = 1e-12;

/// Global multiplier on the theorems' numerical constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub practical_scale: f64,
}

impl Default for TheoremConstants {
    fn default() -> Self {
        TheoremConstants {
            practical_scale: 1.0,
        }
    }
}

impl TheoremConstants {
    pub fn validate(&self) -> Result<()> {
        if self.practical_scale > 0.0 && self.practical_scale.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("practical_scale", "must be positive and finite"))
        }
    }

    fn k(&self, c: f64) -> f64 {
        c * self.practical_scale
    }
}

/// Per-iteration batchsizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchSchedule {
    Constant(usize),
    PerStep(Vec<usize>),
}

impl BatchSchedule {
    /// Batchsize for 0-based iteration `k`; a per-step list repeats its last
    /// entry beyond its end.
    pub fn at(&self, k: usize) -> usize {
        match self {
            BatchSchedule::Constant(m) => *m,
            BatchSchedule::PerStep(ms) => ms[k.min(ms.len() - 1)],
        }
    }

    pub fn max(&self) -> usize {
        match self {
            BatchSchedule::Constant(m) => *m,
            BatchSchedule::PerStep(ms) => ms.iter().copied().max().unwrap_or(1),
        }
    }

    /// Oracle calls for the first `n` iterations.
    pub fn total(&self, n: usize) -> u64 {
        (0..n).map(|k| self.at(k) as u64).sum()
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BatchSchedule::Constant(m) => *m >= 1,
            BatchSchedule::PerStep(ms) => !ms.is_empty() && ms.iter().all(|&m| m >= 1),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("m", "batch sizes must be at least 1"))
        }
    }
}

/// `ceil(max{1, v})` as a batch size, saturating on overflow.
fn batch_size(v: f64) -> usize {
    let v = v.max(1.0).ceil();
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v as usize
    }
}

/// `ln(4 N / beta)`, required to be at least 2.
pub fn log_term(n: usize, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    let l = (4.0 * n as f64 / beta).ln();
    if l < 2.0 {
        return Err(Error::invalid(
            "N",
            format!("ln(4N/beta) = {l:.4} < 2; increase N or decrease beta"),
        ));
    }
    Ok(l)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("beta", format!("must lie in (0, 1), got {beta}")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be non-negative and finite, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// clipped-SSTM
// ---------------------------------------------------------------------------

/// `(alpha_{k+1}, A_{k+1}) = ((k+2)/(2aL), (k+1)(k+4)/(4aL))`.
#[inline]
pub fn sstm_alpha(k: usize, a: f64, l: f64) -> (f64, f64) {
    let k = k as f64;
    ((k + 2.0) / (2.0 * a * l), (k + 1.0) * (k + 4.0) / (4.0 * a * l))
}

/// Smallest admissible stepsize parameter for the convex clipped-SSTM theorem:
/// `max{1, 16 ln/C, 36 (2 ln + sqrt(4 ln^2 + 2 ln))^2}`.
pub fn sstm_base_a(ln: f64) -> f64 {
    let inner = 2.0 * ln + (4.0 * ln * ln + 2.0 * ln).sqrt();
    1.0_f64.max(16.0 * ln / SSTM_C).max(36.0 * inner * inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum BatchPolicy {
    /// `a` from the theorem, batches growing like `alpha_{k+1}^2`.
    TheoremExact,
    /// `a = N ln(4N/beta)`.
    MediumBatch,
    /// `a = a0 N^{3/2} sqrt(ln(4N/beta))`; `a0 = sigma / (L R0)` by default.
    ConstantBatch { a0: Option<f64> },
    /// `a = max{a', sigma N^{3/2} sqrt(ln(4N/beta)) / (L R0)}`.
    Combined,
}

/// A fully resolved clipped-SSTM schedule. `b = +inf` disables clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SstmSchedule {
    pub a: f64,
    pub l: f64,
    pub b: f64,
    pub n: usize,
    pub beta: Option<f64>,
    pub c: f64,
    pub r0: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub ln_term: Option<f64>,
    pub policy: Option<BatchPolicy>,
    pub batches: BatchSchedule,
    pub provenance: String,
    pub warnings: Vec<String>,
}

impl SstmSchedule {
    /// A hand-set schedule with constant batch `m`.
    pub fn manual(a: f64, l: f64, b: f64, n: usize, m: usize) -> Result<Self> {
        let s = SstmSchedule {
            a,
            l,
            b,
            n,
            beta: None,
            c: SSTM_C,
            r0: None,
            sigma_sq: None,
            ln_term: None,
            policy: None,
            batches: BatchSchedule::Constant(m),
            provenance: "manual".into(),
            warnings: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("a", self.a)?;
        check_positive("L", self.l)?;
        if !(self.b > 0.0) {
            return Err(Error::invalid("B", "must be positive (or +inf for no clipping)"));
        }
        if self.n == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        self.batches.validate()
    }

    /// The same schedule without clipping.
    pub fn unclipped(&self) -> Self {
        SstmSchedule {
            b: f64::INFINITY,
            ..self.clone()
        }
    }

    /// `alpha_{k+1}` for 0-based step `k`.
    pub fn alpha(&self, k: usize) -> f64 {
        sstm_alpha(k, self.a, self.l).0
    }

    /// `A_{k+1}`.
    pub fn big_a(&self, k: usize) -> f64 {
        sstm_alpha(k, self.a, self.l).1
    }

    /// `lambda_{k+1} = B / alpha_{k+1}`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.b / self.alpha(k)
    }

    pub fn batch(&self, k: usize) -> usize {
        self.batches.at(k)
    }

    /// `2 a L C^2 R0^2 / (N (N + 3))` when `R0` is known.
    pub fn bound(&self) -> Option<f64> {
        let n = self.n as f64;
        self.r0
            .map(|r0| 2.0 * self.a * self.l * self.c * self.c * r0 * r0 / (n * (n + 3.0)))
    }
}

/// `m_k = ceil(max{1, k1 s^2 alpha^2 N ln / (C^2 R^2), k2 s^2 alpha^2 N / (C^2 R^2)})`
/// for `k = 0..N`, where `s^2 = scale * sigma^2` carries the restart factor.
fn sstm_batches(
    a: f64,
    l: f64,
    sigma_sq: f64,
    r: f64,
    n: usize,
    ln: f64,
    c: f64,
    consts: &TheoremConstants,
) -> BatchSchedule {
    if sigma_sq == 0.0 {
        return BatchSchedule::Constant(1);
    }
    let denom = c * c * r * r;
    let k1 = consts.k(6000.0) * sigma_sq * n as f64 * ln / denom;
    let k2 = consts.k(10368.0) * sigma_sq * n as f64 / denom;
    let ms = (0..n)
        .map(|k| {
            let alpha = sstm_alpha(k, a, l).0;
            let a2 = alpha * alpha;
            batch_size((k1 * a2).max(k2 * a2))
        })
        .collect();
    BatchSchedule::PerStep(ms)
}

/// Convex clipped-SSTM parameters: `C = sqrt(5)`, `B = C R0 / (8 ln)`,
/// `a = a'(ln)` and the theorem's batchsizes, with `ln = ln(4N/beta)`.
pub fn sstm_theorem_params(
    l: f64,
    sigma_sq: f64,
    r0: f64,
    n: usize,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<SstmSchedule> {
    sstm_batch_policy(BatchPolicy::TheoremExact, l, sigma_sq, r0, n, beta, consts)
}

/// Clipped-SSTM parameters for a batchsize policy. When a policy's `a` falls
/// below the theorem's admissible minimum the theorem-exact schedule is used
/// instead and a warning is recorded.
pub fn sstm_batch_policy(
    policy: BatchPolicy,
    l: f64,
    sigma_sq: f64,
    r0: f64,
    n: usize,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<SstmSchedule> {
    consts.validate()?;
    check_positive("L", l)?;
    check_nonnegative("sigma_sq", sigma_sq)?;
    check_positive("R0", r0)?;
    let ln = log_term(n, beta)?;
    let base = sstm_base_a(ln);
    let nf = n as f64;
    let sigma = sigma_sq.sqrt();
    let mut warnings = Vec::new();

    let candidate = match policy {
        BatchPolicy::TheoremExact => base,
        BatchPolicy::MediumBatch => nf * ln,
        BatchPolicy::ConstantBatch { a0 } => {
            let a0 = a0.unwrap_or(sigma / (l * r0));
            if !(a0 >= 0.0) || !a0.is_finite() {
                return Err(Error::invalid("a0", "must be non-negative and finite"));
            }
            a0 * nf.powf(1.5) * ln.sqrt()
        }
        BatchPolicy::Combined => base.max(sigma * nf.powf(1.5) * ln.sqrt() / (l * r0)),
    };
    let (a, effective) = if candidate >= base {
        (candidate, policy)
    } else {
        warnings.push(format!(
            "{policy:?}: a = {candidate:.6e} is below the admissible minimum {base:.6e}; \
             using the theorem-exact schedule"
        ));
        (base, BatchPolicy::TheoremExact)
    };

    Ok(SstmSchedule {
        a,
        l,
        b: SSTM_C * r0 / (8.0 * ln),
        n,
        beta: Some(beta),
        c: SSTM_C,
        r0: Some(r0),
        sigma_sq: Some(sigma_sq),
        ln_term: Some(ln),
        policy: Some(effective),
        batches: sstm_batches(a, l, sigma_sq, r0, n, ln, SSTM_C, consts),
        provenance: format!("convex clipped-SSTM theorem, {effective:?} batches"),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// clipped-SGD
// ---------------------------------------------------------------------------

/// Clip level as a function of the iteration counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClipPolicy {
    /// Fixed `lambda`; `+inf` disables clipping.
    Constant { lambda: f64 },
    /// `lambda_k = 4 sqrt(L q^k r0)` with `q = 1 - gamma mu`.
    StronglyConvex { smoothness: f64, r0: f64, q: f64 },
    /// `lambda_0` multiplied by `alpha_dec` every `period` iterations.
    DClipped {
        lambda0: f64,
        period: usize,
        alpha_dec: f64,
    },
}

impl ClipPolicy {
    pub fn level(&self, k: usize) -> f64 {
        match *self {
            ClipPolicy::Constant { lambda } => lambda,
            ClipPolicy::StronglyConvex { smoothness, r0, q } => {
                4.0 * (smoothness * q.powf(k as f64) * r0).sqrt()
            }
            ClipPolicy::DClipped {
                lambda0,
                period,
                alpha_dec,
            } => lambda0 * alpha_dec.powf((k / period) as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ClipPolicy::Constant { lambda } => {
                if lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("lambda", "must be positive (or +inf)"))
                }
            }
            ClipPolicy::StronglyConvex { smoothness, r0, q } => {
                check_positive("L", smoothness)?;
                check_positive("r0", r0)?;
                if q > 0.0 && q < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("gamma", "1 - gamma mu must lie in (0, 1)"))
                }
            }
            ClipPolicy::DClipped {
                lambda0,
                period,
                alpha_dec,
            } => {
                check_positive("lambda0", lambda0)?;
                check_alpha_dec(alpha_dec)?;
                if period == 0 {
                    return Err(Error::invalid("period", "must be at least 1"));
                }
                Ok(())
            }
        }
    }
}

fn check_alpha_dec(alpha_dec: f64) -> Result<()> {
    if alpha_dec > 0.0 && alpha_dec < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha_dec", format!("must lie in (0, 1), got {alpha_dec}")))
    }
}

/// One d-clipped-SGD update: at an epoch boundary (`k > 0`, `k % period == 0`)
/// the clip level is multiplied by `alpha_dec`, otherwise it is unchanged.
pub fn d_clipped_update(lambda: f64, k: usize, period: usize, alpha_dec: f64) -> Result<f64> {
    check_alpha_dec(alpha_dec)?;
    if period == 0 {
        return Err(Error::invalid("period", "must be at least 1"));
    }
    Ok(if k > 0 && k % period == 0 {
        lambda * alpha_dec
    } else {
        lambda
    })
}

/// Iterations per d-clipped period of `epochs` epochs: `ceil(r epochs / m)`.
pub fn d_clipped_period(r: usize, epochs: usize, m: usize) -> Result<usize> {
    if r == 0 || epochs == 0 || m == 0 {
        return Err(Error::invalid("period", "r, epochs and m must be at least 1"));
    }
    Ok((r * epochs).div_ceil(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgdVariant {
    ConvexTheorem,
    StronglyConvexTheorem,
    DecayingHeuristic,
    Manual,
}

/// What a clipped-SGD run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgdOutput {
    /// `(1/N) sum_{k<N} x^k`
    Average,
    LastIterate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdSchedule {
    pub gamma: f64,
    pub clip: ClipPolicy,
    pub batches: BatchSchedule,
    pub n: usize,
    pub variant: SgdVariant,
    pub output: SgdOutput,
    pub l: Option<f64>,
    pub c: Option<f64>,
    pub r0: Option<f64>,
    pub beta: Option<f64>,
    pub ln_term: Option<f64>,
    pub provenance: String,
}

impl SgdSchedule {
    /// Constant stepsize, clip level and batch; returns the last iterate.
    pub fn manual(gamma: f64, lambda: f64, m: usize, n: usize) -> Result<Self> {
        let s = SgdSchedule {
            gamma,
            clip: ClipPolicy::Constant { lambda },
            batches: BatchSchedule::Constant(m),
            n,
            variant: SgdVariant::Manual,
            output: SgdOutput::LastIterate,
            l: None,
            c: None,
            r0: None,
            beta: None,
            ln_term: None,
            provenance: "manual".into(),
        };
        s.validate()?;
        Ok(s)
    }

    /// d-clipped-SGD with a clip level decaying every `period` iterations.
    pub fn d_clipped(
        gamma: f64,
        lambda0: f64,
        period: usize,
        alpha_dec: f64,
        m: usize,
        n: usize,
    ) -> Result<Self> {
        let s = SgdSchedule {
            clip: ClipPolicy::DClipped {
                lambda0,
                period,
                alpha_dec,
            },
            variant: SgdVariant::DecayingHeuristic,
            provenance: "d-clipped heuristic".into(),
            ..SgdSchedule::manual(gamma, lambda0, m, n)?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be non-negative and finite"));
        }
        if self.n == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        self.clip.validate()?;
        self.batches.validate()
    }

    /// The same schedule without clipping.
    pub fn unclipped(&self) -> Self {
        SgdSchedule {
            clip: ClipPolicy::Constant {
                lambda: f64::INFINITY,
            },
            ..self.clone()
        }
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.clip.level(k)
    }

    pub fn batch(&self, k: usize) -> usize {
        self.batches.at(k)
    }

    /// Convex theorem bound `80 L C^2 R0^2 ln / N`, when applicable.
    pub fn bound(&self) -> Option<f64> {
        match (self.variant, self.l, self.c, self.r0, self.ln_term) {
            (SgdVariant::ConvexTheorem, Some(l), Some(c), Some(r0), Some(ln)) => {
                Some(80.0 * l * c * c * r0 * r0 * ln / self.n as f64)
            }
            _ => None,
        }
    }
}

/// Convex clipped-SGD parameters: `C = sqrt 2`, `lambda = 2 L C R0`,
/// `gamma = 1 / (80 L ln)`, `m = ceil(max{1, 27 N sigma^2 / (2 C^2 R0^2 L^2 ln)})`.
pub fn sgd_theorem_params(
    l: f64,
    sigma_sq: f64,
    r0: f64,
    n: usize,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<SgdSchedule> {
    consts.validate()?;
    check_positive("L", l)?;
    check_nonnegative("sigma_sq", sigma_sq)?;
    check_positive("R0", r0)?;
    let ln = log_term(n, beta)?;
    let c = SGD_C;
    Ok(SgdSchedule {
        gamma: 1.0 / (consts.k(80.0) * l * ln),
        clip: ClipPolicy::Constant {
            lambda: 2.0 * l * c * r0,
        },
        batches: BatchSchedule::Constant(sgd_batch(sigma_sq, n, c, r0, l, ln, 1.0, consts)),
        n,
        variant: SgdVariant::ConvexTheorem,
        output: SgdOutput::Average,
        l: Some(l),
        c: Some(c),
        r0: Some(r0),
        beta: Some(beta),
        ln_term: Some(ln),
        provenance: "convex clipped-SGD theorem".into(),
    })
}

/// `ceil(max{1, 27 scale N sigma^2 / (2 C^2 R^2 L^2 ln)})`.
#[allow(clippy::too_many_arguments)]
fn sgd_batch(
    sigma_sq: f64,
    n: usize,
    c: f64,
    r: f64,
    l: f64,
    ln: f64,
    scale: f64,
    consts: &TheoremConstants,
) -> usize {
    if sigma_sq == 0.0 {
        return 1;
    }
    batch_size(
        consts.k(27.0) * scale * n as f64 * sigma_sq / (2.0 * c * c * r * r * l * l * ln),
    )
}

/// Strongly convex clipped-SGD: `gamma = 1 / (81 L ln)`,
/// `lambda_k = 4 sqrt(L (1 - gamma mu)^k r0)` and
/// `m_k = ceil(max{1, 27 N sigma^2 / (16 L r0 (1 - gamma mu)^k ln)})`.
/// Returns the last iterate.
pub fn sgd_strongly_convex_params(
    l: f64,
    mu: f64,
    sigma_sq: f64,
    r0: f64,
    n: usize,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<SgdSchedule> {
    consts.validate()?;
    check_positive("L", l)?;
    if !(mu > 0.0) {
        return Err(Error::invalid(
            "mu",
            "strong convexity must be positive; use the convex schedule for mu = 0",
        ));
    }
    check_nonnegative("sigma_sq", sigma_sq)?;
    check_positive("r0", r0)?;
    let ln = log_term(n, beta)?;
    let gamma = 1.0 / (consts.k(81.0) * l * ln);
    let q = 1.0 - gamma * mu;
    let batches = if sigma_sq == 0.0 {
        BatchSchedule::Constant(1)
    } else {
        let base = consts.k(27.0) * n as f64 * sigma_sq / (16.0 * l * r0 * ln);
        BatchSchedule::PerStep(
            (0..n)
                .map(|k| batch_size(base / q.powf(k as f64)))
                .collect(),
        )
    };
    let s = SgdSchedule {
        gamma,
        clip: ClipPolicy::StronglyConvex {
            smoothness: l,
            r0,
            q,
        },
        batches,
        n,
        variant: SgdVariant::StronglyConvexTheorem,
        output: SgdOutput::LastIterate,
        l: Some(l),
        c: None,
        r0: Some(r0),
        beta: Some(beta),
        ln_term: Some(ln),
        provenance: "strongly convex clipped-SGD theorem".into(),
    };
    s.validate()?;
    Ok(s)
}

// ---------------------------------------------------------------------------
// restarts
// ---------------------------------------------------------------------------

/// `R = sqrt(2 (f(x0) - f*) / mu)`.
pub fn radius_from_gap(gap0: f64, mu: f64) -> Result<f64> {
    check_nonnegative("gap0", gap0)?;
    check_positive("mu", mu)?;
    Ok((2.0 * gap0 / mu).sqrt())
}

/// `tau = ceil(log2(mu R^2 / (2 eps)))`, zero when the target is already met.
///
/// Ratios within a few ulps above a power of two round down to it: `R` is
/// usually a square root, and `sqrt(2)^2 = 2 + 4e-16` must not cost a whole
/// extra restart.
pub fn restart_count(mu: f64, r: f64, eps: f64) -> Result<usize> {
    check_positive("mu", mu)?;
    check_nonnegative("R", r)?;
    check_positive("epsilon", eps)?;
    let ratio = mu * r * r / (2.0 * eps);
    let log = ratio.log2();
    Ok(if log <= RESTART_LOG_SLACK {
        0
    } else {
        (log - RESTART_LOG_SLACK).ceil() as usize
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartMethod {
    Sstm,
    Sgd,
}

/// Inner-run parameters for restart `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum RestartStage {
    Sstm(SstmSchedule),
    Sgd(SgdSchedule),
}

impl RestartStage {
    /// `B_t` for SSTM stages, `lambda_t` for SGD stages.
    pub fn clip_scale(&self) -> f64 {
        match self {
            RestartStage::Sstm(s) => s.b,
            RestartStage::Sgd(s) => s.lambda(0),
        }
    }

    pub fn batches(&self) -> &BatchSchedule {
        match self {
            RestartStage::Sstm(s) => &s.batches,
            RestartStage::Sgd(s) => &s.batches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    pub method: RestartMethod,
    pub n0: usize,
    pub tau: usize,
    pub r: f64,
    pub l: f64,
    pub mu: f64,
    pub sigma_sq: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub c: f64,
    /// `ln(4 N0 tau / beta)` at the fixed point.
    pub ln_term: f64,
    /// Stepsize parameter `a` (SSTM) or stepsize `gamma` (SGD).
    pub step: f64,
    pub stages: Vec<RestartStage>,
    pub provenance: String,
}

impl RestartPlan {
    /// Strips clipping from every stage.
    pub fn unclipped(&self) -> Self {
        let stages = self
            .stages
            .iter()
            .map(|s| match s {
                RestartStage::Sstm(x) => RestartStage::Sstm(x.unclipped()),
                RestartStage::Sgd(x) => RestartStage::Sgd(x.unclipped()),
            })
            .collect();
        RestartPlan {
            stages,
            ..self.clone()
        }
    }

    pub fn total_calls(&self) -> u64 {
        self.stages
            .iter()
            .map(|s| s.batches().total(self.n0))
            .sum()
    }

    fn empty(method: RestartMethod, l: f64, mu: f64, sigma_sq: f64, r: f64, eps: f64, beta: f64) -> Self {
        RestartPlan {
            method,
            n0: 0,
            tau: 0,
            r,
            l,
            mu,
            sigma_sq,
            epsilon: eps,
            beta,
            c: match method {
                RestartMethod::Sstm => SSTM_C,
                RestartMethod::Sgd => SGD_C,
            },
            ln_term: f64::NAN,
            step: f64::NAN,
            stages: Vec::new(),
            provenance: "target already met; no restarts".into(),
        }
    }
}

/// Iterates `n0 <- next(ln(4 n0 tau / beta))` from `ln = 2` until `n0` repeats.
fn solve_restart_fixed_point(
    tau: usize,
    beta: f64,
    what: &'static str,
    mut next: impl FnMut(f64) -> f64,
) -> Result<(usize, f64)> {
    let mut ln = 2.0_f64;
    let mut n0 = 0usize;
    for _ in 0..FIXED_POINT_CAP {
        let v = next(ln);
        if !v.is_finite() || v >= usize::MAX as f64 / 8.0 {
            return Err(Error::FixedPointDiverged {
                iterations: FIXED_POINT_CAP,
                what,
            });
        }
        let candidate = (v.ceil() as usize).max(1);
        let new_ln = (4.0 * candidate as f64 * tau as f64 / beta).ln().max(2.0);
        if candidate == n0 {
            return Ok((n0, new_ln));
        }
        n0 = candidate;
        ln = new_ln;
    }
    Err(Error::FixedPointDiverged {
        iterations: FIXED_POINT_CAP,
        what,
    })
}

fn check_restart_inputs(l: f64, mu: f64, sigma_sq: f64, r: f64, eps: f64, beta: f64) -> Result<()> {
    check_positive("L", l)?;
    check_positive("mu", mu)?;
    check_nonnegative("sigma_sq", sigma_sq)?;
    check_positive("R", r)?;
    check_positive("epsilon", eps)?;
    check_beta(beta)
}

/// R-clipped-SSTM plan: `tau = ceil(log2(mu R^2 / (2 eps)))`,
/// `N0 = ceil(C sqrt(8 a L / mu))` with `a = a'(ln(4 N0 tau / beta))` solved
/// jointly, `B_t = C R / (8 2^t ln)` and batches with the `2^t` factor.
pub fn restart_plan_sstm(
    l: f64,
    mu: f64,
    sigma_sq: f64,
    r: f64,
    eps: f64,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<RestartPlan> {
    consts.validate()?;
    check_restart_inputs(l, mu, sigma_sq, r, eps, beta)?;
    let tau = restart_count(mu, r, eps)?;
    if tau == 0 {
        return Ok(RestartPlan::empty(RestartMethod::Sstm, l, mu, sigma_sq, r, eps, beta));
    }
    let c = SSTM_C;
    let (n0, ln) = solve_restart_fixed_point(tau, beta, "R-clipped-SSTM N0", |ln| {
        c * (8.0 * sstm_base_a(ln) * l / mu).sqrt()
    })?;
    let a = sstm_base_a(ln);
    Ok(sstm_restart_plan(
        l,
        mu,
        sigma_sq,
        r,
        eps,
        beta,
        tau,
        n0,
        ln,
        a,
        consts,
        "strongly convex R-clipped-SSTM theorem".into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn sstm_restart_plan(
    l: f64,
    mu: f64,
    sigma_sq: f64,
    r: f64,
    eps: f64,
    beta: f64,
    tau: usize,
    n0: usize,
    ln: f64,
    a: f64,
    consts: &TheoremConstants,
    provenance: String,
) -> RestartPlan {
    let c = SSTM_C;
    let stages = (0..tau)
        .map(|t| {
            let scale = 2f64.powi(t as i32);
            RestartStage::Sstm(SstmSchedule {
                a,
                l,
                b: c * r / (8.0 * scale * ln),
                n: n0,
                beta: Some(beta),
                c,
                r0: None,
                sigma_sq: Some(sigma_sq),
                ln_term: Some(ln),
                policy: None,
                batches: sstm_batches(a, l, scale * sigma_sq, r, n0, ln, c, consts),
                provenance: format!("restart {t}"),
                warnings: Vec::new(),
            })
        })
        .collect();
    RestartPlan {
        method: RestartMethod::Sstm,
        n0,
        tau,
        r,
        l,
        mu,
        sigma_sq,
        epsilon: eps,
        beta,
        c,
        ln_term: ln,
        step: a,
        stages,
        provenance,
    }
}

/// R-clipped-SGD plan: `N0 / ln(4 N0 tau / beta) >= 320 C^2 L / mu` solved by
/// fixed point, `gamma = 1 / (80 L ln)`,
/// `m^t = ceil(max{1, 27 2^t N0 sigma^2 / (2 C^2 R^2 L^2 ln)})` and inner clip
/// level `lambda_t = 2 L C R 2^{-t/2}` (the convex theorem with the radius
/// after `t` halvings of the gap).
pub fn restart_plan_sgd(
    l: f64,
    mu: f64,
    sigma_sq: f64,
    r: f64,
    eps: f64,
    beta: f64,
    consts: &TheoremConstants,
) -> Result<RestartPlan> {
    consts.validate()?;
    check_restart_inputs(l, mu, sigma_sq, r, eps, beta)?;
    let tau = restart_count(mu, r, eps)?;
    if tau == 0 {
        return Ok(RestartPlan::empty(RestartMethod::Sgd, l, mu, sigma_sq, r, eps, beta));
    }
    let c = SGD_C;
    let (n0, ln) = solve_restart_fixed_point(tau, beta, "R-clipped-SGD N0", |ln| {
        consts.k(320.0) * c * c * l / mu * ln
    })?;
    let gamma = 1.0 / (consts.k(80.0) * l * ln);
    let stages = (0..tau)
        .map(|t| {
            let scale = 2f64.powi(t as i32);
            RestartStage::Sgd(SgdSchedule {
                gamma,
                clip: ClipPolicy::Constant {
                    lambda: 2.0 * l * c * r / scale.sqrt(),
                },
                batches: BatchSchedule::Constant(sgd_batch(sigma_sq, n0, c, r, l, ln, scale, consts)),
                n: n0,
                variant: SgdVariant::ConvexTheorem,
                output: SgdOutput::Average,
                l: Some(l),
                c: Some(c),
                r0: Some(r / scale.sqrt()),
                beta: Some(beta),
                ln_term: Some(ln),
                provenance: format!("restart {t}"),
            })
        })
        .collect();
    Ok(RestartPlan {
        method: RestartMethod::Sgd,
        n0,
        tau,
        r,
        l,
        mu,
        sigma_sq,
        epsilon: eps,
        beta,
        c,
        ln_term: ln,
        step: gamma,
        stages,
        provenance: "strongly convex R-clipped-SGD theorem".into(),
    })
}

/// The order constants of the small-batch restart rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBatchThetas {
    pub theta_a: f64,
    pub theta_n: f64,
}

impl Default for SmallBatchThetas {
    fn default() -> Self {
        SmallBatchThetas {
            theta_a: 1.0,
            theta_n: 1.0,
        }
    }
}

/// R-clipped-SSTM with `O(1)` batches: `a = theta_a sigma^4 ln^2(N0 tau / beta) / (L mu eps^2)`
/// and `N0 = theta_n sqrt(a L / mu)`, each raised to the theorem's admissible
/// minimum (`a >= a'`, `N0 >= C sqrt(8 a L / mu)`) and solved jointly by fixed
/// point. With `sigma = 0` this is the theorem plan (all batches 1).
#[allow(clippy::too_many_arguments)]
pub fn small_batch_restart_params(
    l: f64,
    mu: f64,
    sigma_sq: f64,
    eps: f64,
    beta: f64,
    r: f64,
    thetas: SmallBatchThetas,
    consts: &TheoremConstants,
) -> Result<RestartPlan> {
    consts.validate()?;
    check_restart_inputs(l, mu, sigma_sq, r, eps, beta)?;
    check_positive("theta_a", thetas.theta_a)?;
    check_positive("theta_n", thetas.theta_n)?;
    if sigma_sq == 0.0 {
        return restart_plan_sstm(l, mu, sigma_sq, r, eps, beta, consts);
    }
    let tau = restart_count(mu, r, eps)?;
    if tau == 0 {
        return Ok(RestartPlan::empty(RestartMethod::Sstm, l, mu, sigma_sq, r, eps, beta));
    }
    let c = SSTM_C;
    let a_of = |ln: f64| {
        // ln(N0 tau / beta) = ln(4 N0 tau / beta) - ln 4
        let ln_small = (ln - 4f64.ln()).max(f64::MIN_POSITIVE);
        let a = thetas.theta_a * sigma_sq * sigma_sq * ln_small * ln_small / (l * mu * eps * eps);
        a.max(sstm_base_a(ln))
    };
    let (n0, ln) = solve_restart_fixed_point(tau, beta, "small-batch R-clipped-SSTM N0", |ln| {
        let a = a_of(ln);
        (thetas.theta_n * (a * l / mu).sqrt()).max(c * (8.0 * a * l / mu).sqrt())
    })?;
    let a = a_of(ln);
    Ok(sstm_restart_plan(
        l,
        mu,
        sigma_sq,
        r,
        eps,
        beta,
        tau,
        n0,
        ln,
        a,
        consts,
        "small-batch R-clipped-SSTM".into(),
    ))
}
