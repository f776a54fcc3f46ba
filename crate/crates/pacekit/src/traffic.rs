//! Ad request arrival and auction outcome models.
//!
//! Request counts per minute come from one of three shapes: a constant
//! rate, a piecewise profile (also how pre-materialized per-minute counts
//! are fed back in, e.g. one arm of a traffic split), or Poisson arrivals.
//! Poisson counts draw exactly `ceil(rate / CHUNK_RATE)` uniforms per
//! minute regardless of outcome, so the draw position of every later
//! concern is a pure function of the model, not of sampled values.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::Minute;
use crate::Error;

/// Largest Poisson rate sampled in a single inverse-CDF walk; larger rates
/// are split into equal chunks and summed (a Poisson sum of independent
/// Poisson draws), keeping each walk short and numerically tame.
const CHUNK_RATE: f64 = 10.0;

/// Per-minute request arrival model plus the auction win probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficModel {
    /// Same request count every minute.
    Constant {
        requests_per_minute: u32,
        win_probability: f64,
    },
    /// Stepwise profile: `(from_minute, to_minute, requests_per_minute)`
    /// segments, half-open on the right. Minutes outside every segment get
    /// zero requests.
    Profile {
        segments: Vec<(Minute, Minute, u32)>,
        win_probability: f64,
    },
    /// Poisson arrivals at a fixed rate per minute.
    Poisson {
        rate_per_minute: f64,
        win_probability: f64,
    },
}

impl TrafficModel {
    pub fn win_probability(&self) -> f64 {
        match self {
            TrafficModel::Constant {
                win_probability, ..
            }
            | TrafficModel::Profile {
                win_probability, ..
            }
            | TrafficModel::Poisson {
                win_probability, ..
            } => *win_probability,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let p = self.win_probability();
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidSpec {
                field: "traffic.win_probability",
                reason: format!("must lie in [0, 1], got {p}"),
            });
        }
        match self {
            TrafficModel::Constant { .. } => Ok(()),
            TrafficModel::Profile { segments, .. } => {
                for (from, to, _) in segments {
                    if to <= from {
                        return Err(Error::InvalidSpec {
                            field: "traffic.segments",
                            reason: format!("segment [{from}, {to}) is empty or inverted"),
                        });
                    }
                }
                Ok(())
            }
            TrafficModel::Poisson {
                rate_per_minute, ..
            } => {
                if !rate_per_minute.is_finite() || *rate_per_minute < 0.0 {
                    return Err(Error::InvalidSpec {
                        field: "traffic.rate_per_minute",
                        reason: format!("must be finite and >= 0, got {rate_per_minute}"),
                    });
                }
                Ok(())
            }
        }
    }

    /// Builds a profile model from explicit per-minute counts starting at
    /// `offset`, collapsing equal-count runs into segments.
    pub fn from_counts(offset: Minute, counts: &[u32], win_probability: f64) -> TrafficModel {
        let mut segments = Vec::new();
        let mut i = 0;
        while i < counts.len() {
            let mut j = i + 1;
            while j < counts.len() && counts[j] == counts[i] {
                j += 1;
            }
            if counts[i] > 0 {
                segments.push((offset + i as u32, offset + j as u32, counts[i]));
            }
            i = j;
        }
        TrafficModel::Profile {
            segments,
            win_probability,
        }
    }
}

/// Request count for one minute. Poisson is the only variant that consumes
/// randomness; it always draws the same number of uniforms for a given rate.
pub fn requests_at(model: &TrafficModel, minute: Minute, rng: &mut ChaCha8Rng) -> u32 {
    match model {
        TrafficModel::Constant {
            requests_per_minute,
            ..
        } => *requests_per_minute,
        TrafficModel::Profile { segments, .. } => segments
            .iter()
            .find(|(from, to, _)| minute >= *from && minute < *to)
            .map(|(_, _, rate)| *rate)
            .unwrap_or(0),
        TrafficModel::Poisson {
            rate_per_minute, ..
        } => poisson(rng, *rate_per_minute),
    }
}

/// The request wins its auction iff the uniform draw falls under the win
/// probability.
pub fn auction_win(win_probability: f64, u: f64) -> bool {
    u < win_probability
}

/// Poisson sample by inverse-CDF walk, chunked so each walk sees a rate of
/// at most `CHUNK_RATE`. One uniform per chunk, always consumed.
pub fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let chunks = (rate / CHUNK_RATE).ceil() as u32;
    let per_chunk = rate / chunks as f64;
    let mut total = 0;
    for _ in 0..chunks {
        total += poisson_small(rng.random::<f64>(), per_chunk);
    }
    total
}

fn poisson_small(u: f64, rate: f64) -> u32 {
    let mut k = 0u32;
    let mut p = (-rate).exp();
    let mut cum = p;
    while u >= cum {
        k += 1;
        // P(k) = P(k-1) * rate / k
        p *= rate / k as f64;
        cum += p;
        if p < 1e-300 {
            break;
        }
    }
    k
}
