//! Dynamic fast-finish start time.
//!
//! The start fraction is a concave function of the campaign's historical
//! overspend ratio: heavy overdeliverers get pushed almost to the end of the
//! targeting window, while campaigns that bill close to goal keep the
//! earliest allowed start. A monotone update rule keeps the stored start from
//! drifting earlier between periodic refreshes, which would otherwise set up
//! an oscillation (late start -> less overdelivery -> earlier start -> more
//! overdelivery -> ...).

use serde::{Deserialize, Serialize};

use crate::model::{CampaignHistory, Day, SffParams};
use crate::Error;

/// Mean of daily actual-spend / daily-goal ratios over a lookback window.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OverspendRatio(pub f64);

/// How the lookback window is collapsed into one ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMethod {
    /// Arithmetic mean of per-day spend/goal ratios. Every day weighs the
    /// same regardless of its goal.
    #[default]
    MeanOfRatios,
    /// Total spend divided by total goal. Bigger-goal days weigh more.
    RatioOfTotals,
}

/// Collapses the spend history in the `lookback_days` window ending at
/// `as_of` (exclusive) into an overspend ratio. Days with zero recognized
/// spend carry no pacing signal and are skipped.
pub fn compute_overspend_ratio(
    history: &CampaignHistory,
    lookback_days: u32,
    as_of: Day,
    method: RatioMethod,
) -> Result<OverspendRatio, Error> {
    let window = history.window(as_of, lookback_days);
    let usable: Vec<_> = window
        .iter()
        .filter(|o| o.recognized_spend > 0 && o.daily_goal > 0)
        .collect();
    if usable.is_empty() {
        return Err(Error::NoHistory {
            lookback_days,
            as_of: as_of.0,
        });
    }
    let ratio = match method {
        RatioMethod::MeanOfRatios => {
            let sum: f64 = usable
                .iter()
                .map(|o| o.recognized_spend as f64 / o.daily_goal as f64)
                .sum();
            sum / usable.len() as f64
        }
        RatioMethod::RatioOfTotals => {
            let spend: f64 = usable.iter().map(|o| o.recognized_spend as f64).sum();
            let goal: f64 = usable.iter().map(|o| o.daily_goal as f64).sum();
            spend / goal
        }
    };
    Ok(OverspendRatio(ratio))
}

/// Maps an overspend ratio onto a fast-finish start fraction.
///
/// The curve is a square root anchored so the ratio band endpoints hit the
/// start band endpoints exactly: ratios at or below `min_overspend_ratio`
/// return `min_start_fraction`, ratios at or above `max_overspend_ratio`
/// return `max_start_fraction`, and the concave interior moves the start
/// later quickly for small overspend and flattens near the ceiling.
pub fn sff_start_fraction(or: OverspendRatio, p: &SffParams) -> f64 {
    let clamped = or
        .0
        .clamp(p.min_overspend_ratio, p.max_overspend_ratio);
    let scale = (p.max_start_fraction - p.min_start_fraction)
        / (p.max_overspend_ratio - p.min_overspend_ratio).sqrt();
    let raw = scale * (clamped - p.min_overspend_ratio).sqrt() + p.min_start_fraction;
    // Guard against float wobble at the top anchor.
    raw.clamp(p.min_start_fraction, p.max_start_fraction)
}

/// Applies the monotone update rule and refresh bookkeeping to the stored
/// start fraction, returning the fraction now in force.
///
/// On a refresh day (or first adoption) the candidate is taken verbatim and
/// the refresh clock resets. Between refreshes the stored fraction may only
/// move later: an earlier candidate is ignored.
pub fn update_start_fraction(
    history: &mut CampaignHistory,
    candidate: f64,
    today: Day,
    p: &SffParams,
) -> f64 {
    let due_refresh = match history.last_refresh_day {
        Some(last) => today.0 - last.0 >= p.refresh_period_days as i64,
        None => true,
    };
    let adopted = match history.current_start_fraction {
        Some(current) if !due_refresh => current.max(candidate),
        _ => {
            history.last_refresh_day = Some(today);
            candidate
        }
    };
    history.current_start_fraction = Some(adopted);
    adopted
}
