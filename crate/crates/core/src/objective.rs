//! Clipped policy-gradient surrogates evaluated on logged log-probabilities.
//!
//! Ratios are formed in log space. Log-ratios are clamped to
//! `±LOG_RATIO_CLAMP` before exponentiation and every clamp is counted in the
//! result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_RATIO_CLAMP: f64 = 20.0;
pub const DEFAULT_CLIP_LOW: f64 = 0.2;
pub const DEFAULT_CLIP_HIGH: f64 = 0.28;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenLogProbs {
    pub lp_new: f64,
    pub lp_old: f64,
}

/// One line of the token file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSequence {
    pub traj_id: String,
    pub advantage: f64,
    pub tokens: Vec<TokenLogProbs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenBatch {
    pub sequences: Vec<TokenSequence>,
    pub clip_low: f64,
    pub clip_high: f64,
}

impl TokenBatch {
    pub fn new(sequences: Vec<TokenSequence>, clip_low: f64, clip_high: f64) -> Result<Self> {
        for (name, value) in [("clip_low", clip_low), ("clip_high", clip_high)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        Ok(TokenBatch {
            sequences,
            clip_low,
            clip_high,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sequences.iter().map(|s| s.tokens.len()).sum()
    }

    fn validate(&self) -> Result<()> {
        for seq in &self.sequences {
            if !seq.advantage.is_finite() {
                return Err(Error::NonFinite {
                    traj_id: seq.traj_id.clone(),
                    token: 0,
                    field: "advantage",
                });
            }
            for (t, tok) in seq.tokens.iter().enumerate() {
                for (field, v) in [("lp_new", tok.lp_new), ("lp_old", tok.lp_old)] {
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            traj_id: seq.traj_id.clone(),
                            token: t,
                            field,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// `min(r * A, clip(r, 1 - low, 1 + high) * A)`.
pub fn clipped_term(ratio: f64, advantage: f64, clip_low: f64, clip_high: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_low, 1.0 + clip_high);
    (ratio * advantage).min(clipped * advantage)
}

fn ratio(log_ratio: f64, clamped: &mut usize) -> f64 {
    if log_ratio.abs() > LOG_RATIO_CLAMP {
        *clamped += 1;
        log_ratio.clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP).exp()
    } else {
        log_ratio.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DapoObjective {
    pub value: f64,
    pub token_count: usize,
    /// Per-sequence, per-token surrogate terms.
    pub terms: Vec<Vec<f64>>,
    pub clamped_log_ratios: usize,
    /// Tokens where the clipped branch was strictly smaller.
    pub clipped_tokens: usize,
}

/// Token-level surrogate with decoupled clip bounds, normalized by the total
/// number of tokens across all sequences. Summation is sequential and
/// sequence-major.
pub fn dapo_token_objective(batch: &TokenBatch) -> Result<DapoObjective> {
    batch.validate()?;
    let token_count = batch.token_count();
    if token_count == 0 {
        return Err(Error::Empty("token batch"));
    }
    let mut clamped = 0usize;
    let mut clipped_tokens = 0usize;
    let mut sum = 0.0;
    let mut terms = Vec::with_capacity(batch.sequences.len());
    for seq in &batch.sequences {
        let mut seq_terms = Vec::with_capacity(seq.tokens.len());
        for tok in &seq.tokens {
            let r = ratio(tok.lp_new - tok.lp_old, &mut clamped);
            let term = clipped_term(r, seq.advantage, batch.clip_low, batch.clip_high);
            if term < r * seq.advantage {
                clipped_tokens += 1;
            }
            sum += term;
            seq_terms.push(term);
        }
        terms.push(seq_terms);
    }
    if clamped > 0 {
        log::warn!("{clamped} log-ratio(s) clamped to ±{LOG_RATIO_CLAMP}");
    }
    Ok(DapoObjective {
        value: sum / token_count as f64,
        token_count,
        terms,
        clamped_log_ratios: clamped,
        clipped_tokens,
    })
}

/// Sequence-level clipped surrogate averaged over the group, minus
/// `kl_coefficient` times the mean per-sequence KL.
///
/// The sequence ratio is `exp(sum of token log-ratios)`. The batch must use a
/// symmetric clip range. Each sequence's KL is the mean of its per-token
/// values; per-token KL values are required whenever `kl_coefficient > 0`.
pub fn grpo_clipped_objective(
    batch: &TokenBatch,
    kl_coefficient: f64,
    kl_per_token: Option<&[Vec<f64>]>,
) -> Result<f64> {
    batch.validate()?;
    if batch.clip_low != batch.clip_high {
        return Err(Error::Invalid(format!(
            "symmetric clip range required, got low {} / high {}",
            batch.clip_low, batch.clip_high
        )));
    }
    if !(kl_coefficient >= 0.0 && kl_coefficient.is_finite()) {
        return Err(Error::OutOfRange {
            name: "kl_coefficient",
            value: kl_coefficient,
            range: "[0, inf)",
        });
    }
    if batch.sequences.is_empty() {
        return Err(Error::Empty("token batch"));
    }
    if kl_coefficient > 0.0 && kl_per_token.is_none() {
        return Err(Error::Invalid(
            "kl_coefficient > 0 needs per-token KL values".into(),
        ));
    }
    if let Some(kl) = kl_per_token {
        if kl.len() != batch.sequences.len()
            || kl.iter().zip(&batch.sequences).any(|(k, s)| k.len() != s.tokens.len())
        {
            return Err(Error::Invalid(
                "per-token KL values must match the token batch shape".into(),
            ));
        }
    }

    let mut clamped = 0usize;
    let mut sum = 0.0;
    for (i, seq) in batch.sequences.iter().enumerate() {
        let log_ratio: f64 = seq.tokens.iter().map(|t| t.lp_new - t.lp_old).sum();
        let r = ratio(log_ratio, &mut clamped);
        let mut term = clipped_term(r, seq.advantage, batch.clip_low, batch.clip_high);
        if kl_coefficient > 0.0 {
            let kl = &kl_per_token.expect("checked above")[i];
            let seq_kl = if kl.is_empty() {
                0.0
            } else {
                kl.iter().sum::<f64>() / kl.len() as f64
            };
            term -= kl_coefficient * seq_kl;
        }
        sum += term;
    }
    Ok(sum / batch.sequences.len() as f64)
}
