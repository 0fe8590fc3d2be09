//! Global and in-batch NT-Xent losses, log-sum-exp bounds on their gap, and
//! the two batch objectives (bottleneck and total in-batch similarity).
//!
//! Notation: `s_ij = x_i . y_j`, `tau` the temperature, `B` a batch
//! containing `i`. Per sample,
//!
//! ```text
//! global_i = -s_ii / tau + LSE_j (s_ij / tau)
//! train_i  = -s_ii / tau + LSE_{j in B} (s_ij / tau)
//! ```
//!
//! and the losses are means over samples. When a sample occurs in more than
//! one batch (the hard-negative baseline) its training term is the mean over
//! its occurrences, which keeps `train <= global` per sample.
//!
//! Bounds, all per sample and averaged the same way:
//!
//! ```text
//! ub_global        = (max_j s_ij - s_ii) / tau + ln N
//! lb_train_transl  = (min_{j in B} s_ij - s_ii) / tau + ln |B|
//! lb_train_std     = (max_{j in B} s_ij - s_ii) / tau
//! ub_gap_transl    = (max_j s_ij - min_{j in B} s_ij) / tau + ln (N / |B|)
//! ub_gap_std       = (max_j s_ij - max_{j in B} s_ij) / tau + ln N
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::batching::BatchAssignment;
use crate::error::{Error, Result};
use crate::reduce::{log_sum_exp, pairwise_mean, pairwise_sum};
use crate::tensor_io::EmbeddingPair;

pub const DEFAULT_TEMPERATURE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Temperature(tau))
        } else {
            Err(Error::Parameter(format!(
                "temperature must be positive, got {tau}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature(DEFAULT_TEMPERATURE)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct SampleTerms {
    global: f64,
    train: f64,
    ub_global: f64,
    lb_train_standard: f64,
    lb_train_translation: f64,
    ub_gap_translation: f64,
    ub_gap_standard: f64,
}

/// Every per-sample quantity, reduced with [`pairwise_mean`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEvaluation {
    pub global_loss: f64,
    pub train_loss: f64,
    pub ub_global: f64,
    pub lb_train_standard: f64,
    pub lb_train_translation: f64,
    pub ub_gap_translation: f64,
    pub ub_gap_standard: f64,
}

impl LossEvaluation {
    pub fn gap(&self) -> f64 {
        self.global_loss - self.train_loss
    }
}

fn score_row(pair: &EmbeddingPair, i: usize) -> Vec<f64> {
    (0..pair.len()).map(|j| pair.score(i, j)).collect()
}

fn check_pair(pair: &EmbeddingPair) -> Result<()> {
    if pair.is_empty() {
        return Err(Error::Parameter("empty embedding pair".into()));
    }
    Ok(())
}

/// Global NT-Xent, `-(1/N) sum_i log softmax_j(s_ij / tau)[i]`.
pub fn ntxent_global(pair: &EmbeddingPair, tau: Temperature) -> f64 {
    let t = tau.value();
    let terms: Vec<f64> = (0..pair.len())
        .into_par_iter()
        .map(|i| {
            let row = score_row(pair, i);
            -row[i] / t + log_sum_exp(row.iter().map(|s| s / t))
        })
        .collect();
    pairwise_mean(&terms)
}

/// Evaluates losses and bounds for one assignment in a single pass.
pub fn evaluate(
    pair: &EmbeddingPair,
    b: &BatchAssignment,
    tau: Temperature,
) -> Result<LossEvaluation> {
    check_pair(pair)?;
    b.validate(pair.len())?;
    let n = pair.len();
    let ln_n = (n as f64).ln();
    let t = tau.value();
    let sets = b.contrast_sets();
    let occurrences = b.occurrences();

    let terms: Vec<SampleTerms> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = score_row(pair, i);
            let pos = row[i];
            let max_all = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse_all = log_sum_exp(row.iter().map(|s| s / t));

            let mut acc = SampleTerms {
                global: -pos / t + lse_all,
                ub_global: (max_all - pos) / t + ln_n,
                ..SampleTerms::default()
            };
            let occ = &occurrences[i];
            for &bi in occ {
                let set = &sets[bi];
                let scores = set.iter().map(|&j| row[j]);
                let lse = log_sum_exp(scores.clone().map(|s| s / t));
                let min_b = scores.clone().fold(f64::INFINITY, f64::min);
                let max_b = scores.fold(f64::NEG_INFINITY, f64::max);
                let ln_k = (set.len() as f64).ln();
                acc.train += -pos / t + lse;
                acc.lb_train_translation += (min_b - pos) / t + ln_k;
                acc.lb_train_standard += (max_b - pos) / t;
                acc.ub_gap_translation += (max_all - min_b) / t + (ln_n - ln_k);
                acc.ub_gap_standard += (max_all - max_b) / t + ln_n;
            }
            let m = occ.len() as f64;
            acc.train /= m;
            acc.lb_train_translation /= m;
            acc.lb_train_standard /= m;
            acc.ub_gap_translation /= m;
            acc.ub_gap_standard /= m;
            acc
        })
        .collect();

    let mean = |f: fn(&SampleTerms) -> f64| pairwise_mean(&terms.iter().map(f).collect::<Vec<_>>());
    Ok(LossEvaluation {
        global_loss: mean(|s| s.global),
        train_loss: mean(|s| s.train),
        ub_global: mean(|s| s.ub_global),
        lb_train_standard: mean(|s| s.lb_train_standard),
        lb_train_translation: mean(|s| s.lb_train_translation),
        ub_gap_translation: mean(|s| s.ub_gap_translation),
        ub_gap_standard: mean(|s| s.ub_gap_standard),
    })
}

/// In-batch NT-Xent: the global formula with the denominator restricted to
/// each sample's batch.
pub fn ntxent_train(pair: &EmbeddingPair, b: &BatchAssignment, tau: Temperature) -> Result<f64> {
    Ok(evaluate(pair, b, tau)?.train_loss)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapBounds {
    pub translation: f64,
    pub standard: f64,
}

impl GapBounds {
    pub fn min(&self) -> f64 {
        self.translation.min(self.standard)
    }
}

pub fn gap_upper_bounds(
    pair: &EmbeddingPair,
    b: &BatchAssignment,
    tau: Temperature,
) -> Result<GapBounds> {
    let e = evaluate(pair, b, tau)?;
    Ok(GapBounds {
        translation: e.ub_gap_translation,
        standard: e.ub_gap_standard,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentBounds {
    pub ub_global: f64,
    pub lb_train_standard: f64,
    pub lb_train_translation: f64,
}

pub fn lse_component_bounds(
    pair: &EmbeddingPair,
    b: &BatchAssignment,
    tau: Temperature,
) -> Result<ComponentBounds> {
    let e = evaluate(pair, b, tau)?;
    Ok(ComponentBounds {
        ub_global: e.ub_global,
        lb_train_standard: e.lb_train_standard,
        lb_train_translation: e.lb_train_translation,
    })
}

/// Smallest `Z_ij = min(x_i . y_j, x_j . y_i)` over in-batch pairs `i != j`.
/// Larger is better.
pub fn qbap_objective(pair: &EmbeddingPair, b: &BatchAssignment) -> Result<f64> {
    b.validate(pair.len())?;
    let per_batch: Vec<f64> = b
        .contrast_sets()
        .par_iter()
        .map(|set| {
            let mut m = f64::INFINITY;
            for (a, &i) in set.iter().enumerate() {
                for &j in &set[a + 1..] {
                    m = m.min(pair.score(i, j).min(pair.score(j, i)));
                }
            }
            m
        })
        .collect();
    let value = per_batch.into_iter().fold(f64::INFINITY, f64::min);
    if value == f64::INFINITY {
        return Err(Error::ObjectiveUndefined(
            "every batch is a singleton, there are no in-batch negatives".into(),
        ));
    }
    Ok(value)
}

/// `sum_i sum_{j in B_i, j != i} (x_i . y_j + x_j . y_i)`. A sample that
/// occurs in several batches contributes the mean over its occurrences.
pub fn qap_objective(pair: &EmbeddingPair, b: &BatchAssignment) -> Result<f64> {
    b.validate(pair.len())?;
    let sets = b.contrast_sets();
    let occurrences = b.occurrences();
    let per_sample: Vec<f64> = (0..pair.len())
        .into_par_iter()
        .map(|i| {
            let per_occ: Vec<f64> = occurrences[i]
                .iter()
                .map(|&bi| {
                    let terms: Vec<f64> = sets[bi]
                        .iter()
                        .filter(|&&j| j != i)
                        .map(|&j| pair.score(i, j) + pair.score(j, i))
                        .collect();
                    pairwise_sum(&terms)
                })
                .collect();
            pairwise_mean(&per_occ)
        })
        .collect();
    Ok(pairwise_sum(&per_sample))
}

/// Everything needed to compare a batching strategy against the global loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub n: usize,
    pub k: usize,
    pub tau: f64,
    pub global_loss: f64,
    pub train_loss: f64,
    pub gap: f64,
    pub ub_gap_translation: f64,
    pub ub_gap_standard: f64,
    /// `None` when every batch is a singleton.
    pub qbap_value: Option<f64>,
    pub qap_value: f64,
    pub strategy: String,
    pub quantile: Option<f64>,
}

pub fn gap_report(
    pair: &EmbeddingPair,
    b: &BatchAssignment,
    tau: Temperature,
    strategy: &str,
    quantile: Option<f64>,
) -> Result<GapReport> {
    let e = evaluate(pair, b, tau)?;
    let qbap_value = match qbap_objective(pair, b) {
        Ok(v) => Some(v),
        Err(Error::ObjectiveUndefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(GapReport {
        n: pair.len(),
        k: b.batch_size(),
        tau: tau.value(),
        global_loss: e.global_loss,
        train_loss: e.train_loss,
        gap: e.gap(),
        ub_gap_translation: e.ub_gap_translation,
        ub_gap_standard: e.ub_gap_standard,
        qbap_value,
        qap_value: qap_objective(pair, b)?,
        strategy: strategy.to_string(),
        quantile,
    })
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed,
/// scientific notation for exponents below -4 or above 16. Non-finite values
/// become `null`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();

    let mut out = String::from(sign);
    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        out.push_str(&digits[..1]);
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    } else if exp < 0 {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exp - 1) as usize));
        out.push_str(digits.trim_end_matches('0'));
    } else {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        let frac = digits[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl GapReport {
    /// Single-line JSON object with fixed key order.
    pub fn to_json(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "null".to_string(), format_g17);
        format!(
            "{{\"n\":{},\"k\":{},\"tau\":{},\"global_loss\":{},\"train_loss\":{},\"gap\":{},\
             \"ub_gap_translation\":{},\"ub_gap_standard\":{},\"qbap_value\":{},\"qap_value\":{},\
             \"strategy\":{},\"quantile\":{}}}",
            self.n,
            self.k,
            format_g17(self.tau),
            format_g17(self.global_loss),
            format_g17(self.train_loss),
            format_g17(self.gap),
            format_g17(self.ub_gap_translation),
            format_g17(self.ub_gap_standard),
            opt(self.qbap_value),
            format_g17(self.qap_value),
            json_string(&self.strategy),
            opt(self.quantile),
        )
    }
}
