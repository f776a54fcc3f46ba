//! Canonical demo scenarios shared by tests and the bundled scenario files.
//!
//! The default campaign is a deliberately traffic-rich setup: left
//! unthrottled it exhausts its goal within the first few serving hours, so
//! the pacing stages actually have something to do. All values here are
//! synthetic desk-scale configuration, not claims about any real
//! marketplace.

use crate::model::{
    CampaignHistory, CampaignSpec, DailyOutcome, Day, DelayModel, Money, SffParams, MONEY_SCALE,
};
use crate::sim::SimulationOptions;
use crate::traffic::TrafficModel;

/// High-spend reference campaign: $1000 daily goal, $1250 cap, $2 fee per
/// converted click, serving 08:00 to 24:00.
pub fn default_campaign() -> CampaignSpec {
    CampaignSpec {
        id: 1,
        daily_goal: 1_000 * MONEY_SCALE,
        billing_cap: 1_250 * MONEY_SCALE,
        fee_per_click: 2 * MONEY_SCALE,
        targeting_start: 480,
        targeting_end: 1440,
        conversion_rate: 0.2,
        delay_model: DelayModel::Exponential { mean_minutes: 30.0 },
    }
}

pub fn default_params() -> SffParams {
    SffParams::default()
}

/// Static start used by control arms and traditional fast-finish runs.
pub fn default_control_start() -> f64 {
    0.85
}

/// Builds a history from per-day spend/goal ratios, dated so the most
/// recent day is yesterday relative to day 0.
pub fn history_from_ratios(daily_goal: Money, ratios: &[f64]) -> CampaignHistory {
    let n = ratios.len() as i64;
    let mut h = CampaignHistory::new();
    for (i, r) in ratios.iter().enumerate() {
        h.record(DailyOutcome {
            day: Day(i as i64 - n),
            recognized_spend: ((daily_goal as f64) * r).round() as Money,
            daily_goal,
        });
    }
    h
}

/// A week of consistent overdelivery around 25%: the kind of campaign the
/// dynamic start exists for.
pub fn default_history() -> CampaignHistory {
    history_from_ratios(
        default_campaign().daily_goal,
        &[1.22, 1.28, 1.24, 1.26, 1.21, 1.29, 1.25],
    )
}

/// A week of mild underspend; the ratio clamps to the band floor, so the
/// computed start equals the static control start. Useful for isolating
/// the transition window from the dynamic start.
pub fn underspend_history() -> CampaignHistory {
    history_from_ratios(
        default_campaign().daily_goal,
        &[0.88, 0.92, 0.90, 0.91, 0.89, 0.93, 0.87],
    )
}

/// 20 requests a minute at a coin-flip win rate: roughly 4x the traffic
/// needed to hit the default goal across the window.
pub fn default_traffic() -> TrafficModel {
    TrafficModel::Constant {
        requests_per_minute: 20,
        win_probability: 0.5,
    }
}

/// Campaign used to demonstrate the start-fraction feedback loop: long
/// conversion delays and a roomy cap make overdelivery react strongly to
/// the start time.
pub fn oscillation_campaign() -> CampaignSpec {
    CampaignSpec {
        id: 2,
        daily_goal: 1_000 * MONEY_SCALE,
        billing_cap: 1_400 * MONEY_SCALE,
        fee_per_click: 2 * MONEY_SCALE,
        targeting_start: 480,
        targeting_end: 1440,
        conversion_rate: 0.2,
        delay_model: DelayModel::Exponential { mean_minutes: 90.0 },
    }
}

/// Heavy recent overdelivery, enough to start near the top of the band.
pub fn oscillation_history() -> CampaignHistory {
    history_from_ratios(
        oscillation_campaign().daily_goal,
        &[1.38, 1.42, 1.40, 1.39, 1.41],
    )
}

pub fn oscillation_traffic() -> TrafficModel {
    TrafficModel::Constant {
        requests_per_minute: 25,
        win_probability: 0.5,
    }
}

/// Short-memory options for the feedback-loop scenario; the brief lookback
/// makes the daily candidate chase recent outcomes.
pub fn oscillation_options(monotone_rule: bool) -> SimulationOptions {
    SimulationOptions {
        lookback_days: 5,
        monotone_rule,
        ..SimulationOptions::default()
    }
}

/// Deterministic family of high-spend campaigns for multi-campaign
/// experiments. Goals, fees, conversion rates, delays, traffic, and history
/// ratios all vary with the index; every campaign has comfortably more
/// traffic capacity than goal so the pacing policy, not starvation, decides
/// its day.
pub fn synthetic_campaign_set(
    n: usize,
) -> Vec<(CampaignSpec, CampaignHistory, TrafficModel)> {
    // Per-day jitter around each campaign's base ratio; sums to zero so the
    // mean ratio is exactly the base.
    const JITTER: [f64; 7] = [-0.02, 0.01, 0.0, 0.02, -0.01, 0.01, -0.01];
    (0..n)
        .map(|i| {
            let goal_units = 600 + 40 * i as i64;
            let goal = goal_units * MONEY_SCALE;
            let fee = (2 + (i as i64 % 2)) * MONEY_SCALE;
            let conversion_rate = 0.15 + 0.005 * (i % 10) as f64;
            let delay_mean = 20.0 + 5.0 * (i % 9) as f64;
            let rate = 18 + 2 * (i as u32 % 8);
            let win = 0.40 + 0.02 * (i % 6) as f64;
            let spec = CampaignSpec {
                id: (i + 1) as u64,
                daily_goal: goal,
                billing_cap: goal * 5 / 4,
                fee_per_click: fee,
                targeting_start: 480,
                targeting_end: 1440,
                conversion_rate,
                delay_model: DelayModel::Exponential {
                    mean_minutes: delay_mean,
                },
            };
            let capacity_per_minute =
                rate as f64 * win * conversion_rate * (fee as f64 / MONEY_SCALE as f64);
            debug_assert!(
                capacity_per_minute * spec.targeting_span() as f64
                    >= 1.5 * goal_units as f64,
                "campaign {i} would be traffic-starved"
            );
            let base_ratio = 1.10 + 0.03 * (i % 12) as f64;
            let ratios: Vec<f64> = JITTER.iter().map(|j| base_ratio + j).collect();
            let history = history_from_ratios(goal, &ratios);
            let traffic = TrafficModel::Constant {
                requests_per_minute: rate,
                win_probability: win,
            };
            (spec, history, traffic)
        })
        .collect()
}
