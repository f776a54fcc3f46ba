//! Minute-level throttle decisions for one campaign-day.
//!
//! The day walks through three stages. Before the fast-finish start minute a
//! feedback controller holds spend to a planned cumulative curve. From the
//! start minute the throttle decays linearly to zero across the transition
//! window. After the window the campaign serves unthrottled until the daily
//! goal is recognized, at which point serving stops for good.
//!
//! Throttle rate is the probability a request is BLOCKED from the auction,
//! so 0.0 means serve-as-fast-as-possible and 1.0 means dark.

use crate::model::{BillingLedger, CampaignSpec, Minute, Money, PacingPhase};

/// Largest per-minute multiplicative step the feedback controller may take.
const MAX_STEP: f64 = 0.1;

/// Floor on the pass rate so a heavily throttled campaign keeps probing
/// traffic instead of going fully dark.
const MIN_PASS_RATE: f64 = 0.01;

/// Planned cumulative spend fraction, by minute. The controller compares
/// actual spend against this curve. Implementations must be non-decreasing
/// in `minute` with values in [0, 1].
pub trait SpendPlan {
    /// Fraction of the daily goal planned to be spent before `minute`.
    fn planned_fraction(&self, minute: Minute) -> f64;
}

/// Uniform plan: spend accrues evenly across the targeting window.
#[derive(Debug, Clone, Copy)]
pub struct UniformPlan {
    pub start: Minute,
    pub end: Minute,
}

impl SpendPlan for UniformPlan {
    fn planned_fraction(&self, minute: Minute) -> f64 {
        if minute <= self.start {
            return 0.0;
        }
        let span = (self.end - self.start) as f64;
        (((minute - self.start) as f64) / span).min(1.0)
    }
}

/// Throttle state for one campaign-day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacingState {
    pub phase: PacingPhase,
    /// Probability the next request is blocked.
    pub throttle_rate: f64,
    /// Throttle captured at the moment the transition window began; the
    /// ramp interpolates from this value down to zero.
    pub throttle_at_window_start: f64,
    /// Minute the transition window opens (fast-finish start).
    pub sff_start_minute: Minute,
    /// Minute the ramp bottoms out and unthrottled serving begins. May
    /// exceed the targeting window when the start lands very late; the
    /// unthrottled stage is then simply never reached.
    pub window_end_minute: Minute,
}

impl PacingState {
    pub fn new(sff_start_minute: Minute, window_end_minute: Minute) -> Self {
        debug_assert!(window_end_minute >= sff_start_minute);
        PacingState {
            phase: PacingPhase::IntradayPacing,
            throttle_rate: 0.0,
            throttle_at_window_start: 0.0,
            sff_start_minute,
            window_end_minute,
        }
    }
}

/// Multiplicative feedback update for the intraday stage.
///
/// The pass rate (1 - throttle) is nudged by the ratio of planned to actual
/// spend fraction, clamped to at most a 10% move per minute, and floored at
/// `MIN_PASS_RATE`. With no spend on the books yet the gate opens fully so
/// the controller has a signal to react to.
pub fn intraday_throttle(
    minute: Minute,
    planned_cum_fraction: f64,
    actual_cum_spend: Money,
    daily_goal: Money,
    prev_rate: f64,
) -> f64 {
    debug_assert!(minute < crate::model::MINUTES_PER_DAY);
    debug_assert!((0.0..=1.0).contains(&planned_cum_fraction));
    if actual_cum_spend <= 0 {
        return 0.0;
    }
    let actual_fraction = actual_cum_spend as f64 / daily_goal as f64;
    let ratio = (planned_cum_fraction / actual_fraction).clamp(1.0 - MAX_STEP, 1.0 + MAX_STEP);
    let prev_pass = (1.0 - prev_rate).clamp(0.0, 1.0);
    let pass = (prev_pass * ratio).clamp(MIN_PASS_RATE, 1.0);
    1.0 - pass
}

/// Advances the phase machine for `minute` and returns the updated state.
///
/// Once recognized spend reaches the daily goal the campaign stops serving
/// and stays stopped; conversions already in flight keep billing through the
/// ledger, which is where overdelivery comes from.
pub fn step_phase(
    state: PacingState,
    minute: Minute,
    ledger: &BillingLedger,
    spec: &CampaignSpec,
) -> PacingState {
    let plan = UniformPlan {
        start: spec.targeting_start,
        end: spec.targeting_end,
    };
    step_phase_with_plan(state, minute, ledger, spec, &plan)
}

/// `step_phase` against a caller-supplied spend plan.
pub fn step_phase_with_plan(
    state: PacingState,
    minute: Minute,
    ledger: &BillingLedger,
    spec: &CampaignSpec,
    plan: &dyn SpendPlan,
) -> PacingState {
    let mut next = state;
    if ledger.goal_reached() {
        next.phase = PacingPhase::GoalReached;
        next.throttle_rate = 1.0;
        return next;
    }
    if minute < state.sff_start_minute {
        next.phase = PacingPhase::IntradayPacing;
        next.throttle_rate = intraday_throttle(
            minute,
            plan.planned_fraction(minute),
            ledger.recognized_spend,
            spec.daily_goal,
            state.throttle_rate,
        );
    } else if minute < state.window_end_minute {
        // Snapshot the throttle the moment we enter the window; the ramp
        // runs from that value regardless of what spend does afterwards.
        let p0 = if state.phase == PacingPhase::TransitionWindow {
            state.throttle_at_window_start
        } else {
            state.throttle_rate
        };
        let window_len = (state.window_end_minute - state.sff_start_minute) as f64;
        let elapsed = (minute - state.sff_start_minute) as f64;
        next.phase = PacingPhase::TransitionWindow;
        next.throttle_at_window_start = p0;
        next.throttle_rate = p0 * (1.0 - elapsed / window_len);
    } else {
        next.phase = PacingPhase::FastFinish;
        next.throttle_rate = 0.0;
    }
    next
}

/// Admission gate: the request enters the auction iff the uniform draw
/// clears the throttle and the goal has not been reached.
pub fn admit_request(state: &PacingState, u: f64) -> bool {
    state.phase != PacingPhase::GoalReached && u >= state.throttle_rate
}
