//! Budget pacing engine with a dynamic fast-finish schedule, plus the
//! discrete-time simulator and experiment harness used to evaluate it.
//!
//! A campaign-day runs through three stages: an intraday feedback controller
//! paces spend against a plan, a transition window ramps the throttle down
//! linearly, and a fast-finish stage serves unthrottled until the daily goal
//! is recognized. The fast-finish start time is not fixed: it is computed per
//! campaign from the historical overspend ratio, so chronic overdeliverers
//! start later and quiet campaigns keep the early slot. Billing is attributed
//! with delay, which is the whole reason overdelivery exists.

pub mod attribution;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod pacing;
pub mod presets;
pub mod rng;
pub mod sff;
pub mod sim;
pub mod traffic;

pub use attribution::{sample_delay, schedule_click, settle_due, ClickEvent};
pub use experiment::{
    run_budget_split, AbResult, AbRow, ArmOutcome, BudgetSplitConfig, TreatmentMode,
};
pub use metrics::{
    campaign_metrics, live_hours, live_hours_with_basis, overdelivery_rate, summarize,
    summarize_with, CampaignMetrics, HistogramBucket, HistogramConfig, LiveHoursBasis,
    MetricsSummary,
};
pub use model::{
    validate_campaign, BillingLedger, CampaignHistory, CampaignSpec, DailyOutcome, Day,
    DelayModel, Minute, Money, PacingPhase, PendingFee, SffParams, MINUTES_PER_DAY, MONEY_SCALE,
};
pub use pacing::{
    admit_request, intraday_throttle, step_phase, step_phase_with_plan, PacingState, SpendPlan,
    UniformPlan,
};
pub use presets::{
    default_campaign, default_control_start, default_history, default_params, default_traffic,
    history_from_ratios, oscillation_campaign, oscillation_history, oscillation_options,
    oscillation_traffic, synthetic_campaign_set, underspend_history,
};
pub use rng::{derive_seed, DayStreams};
pub use sff::{
    compute_overspend_ratio, sff_start_fraction, update_start_fraction, OverspendRatio,
    RatioMethod,
};
pub use sim::{
    simulate_closed_loop, simulate_closed_loop_with, simulate_day, simulate_day_with,
    ClosedLoopDay, PacingMode, SettlementPolicy, SimulationOptions, SimulationResult, StartBasis,
};
pub use traffic::{auction_win, poisson, requests_at, TrafficModel};

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A campaign or parameter constraint was violated. `field` names the
    /// offending setting in config notation.
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    /// The overspend-ratio lookback window contains no usable day.
    #[error("no usable spend history in the {lookback_days}-day window ending day {as_of}")]
    NoHistory { lookback_days: u32, as_of: i64 },

    /// Summary statistics were requested over an empty group.
    #[error("cannot summarize an empty metrics group")]
    EmptyGroup,

    /// A budget-split experiment was configured with no campaigns.
    #[error("budget split needs at least one campaign")]
    NoCampaigns,
}
