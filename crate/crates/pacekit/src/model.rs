//! Core campaign types shared by the pacing engine, the attribution ledger,
//! and the simulator.
//!
//! Monetary amounts are integer micro-units (`Money`) so ledger identities
//! hold exactly; no floating point touches billed spend.

use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

use crate::Error;

/// Monetary amount in micro-units (1_000_000 micros = 1 currency unit).
pub type Money = i64;

/// Micros per whole currency unit.
pub const MONEY_SCALE: i64 = 1_000_000;

/// Calendar day index. Plain counter, no timezone semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Day(pub i64);

impl Day {
    pub fn next(self) -> Day {
        Day(self.0 + 1)
    }
}

/// Minute-of-day, 0..=1440. Minute 1440 is the end-of-day settlement point.
pub type Minute = u32;

pub const MINUTES_PER_DAY: Minute = 1440;

/// Delay distribution between a billable click and its conversion event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// Every conversion lands in the same minute as its click.
    Immediate,
    /// Exponentially distributed delay with the given mean, rounded to
    /// whole minutes.
    Exponential { mean_minutes: f64 },
    /// Empirical delay histogram: `(delay_minutes, weight)` pairs sampled by
    /// inverse transform. Weights need not be normalized.
    Histogram { bins: Vec<(u32, f64)> },
}

impl DelayModel {
    fn validate(&self) -> Result<(), Error> {
        match self {
            DelayModel::Immediate => Ok(()),
            DelayModel::Exponential { mean_minutes } => {
                if !mean_minutes.is_finite() || *mean_minutes < 0.0 {
                    return Err(Error::InvalidSpec {
                        field: "delay_model.mean_minutes",
                        reason: format!("must be finite and >= 0, got {mean_minutes}"),
                    });
                }
                Ok(())
            }
            DelayModel::Histogram { bins } => {
                if bins.is_empty() {
                    return Err(Error::InvalidSpec {
                        field: "delay_model.bins",
                        reason: "histogram needs at least one bin".into(),
                    });
                }
                let mut total = 0.0;
                for (_, w) in bins {
                    if !w.is_finite() || *w < 0.0 {
                        return Err(Error::InvalidSpec {
                            field: "delay_model.bins",
                            reason: format!("bin weight must be finite and >= 0, got {w}"),
                        });
                    }
                    total += w;
                }
                if total <= 0.0 {
                    return Err(Error::InvalidSpec {
                        field: "delay_model.bins",
                        reason: "bin weights must sum to a positive value".into(),
                    });
                }
                Ok(())
            }
        }
    }
}

/// A campaign as the pacing engine sees it: daily goal, hard cap, unit fee,
/// targeting window, and the billing delay model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub id: u64,
    /// Daily spend goal in micros.
    pub daily_goal: Money,
    /// Hard billing cap in micros; spend never exceeds this.
    pub billing_cap: Money,
    /// Fee billed per converted click, in micros.
    pub fee_per_click: Money,
    /// First minute of the targeting window (inclusive).
    pub targeting_start: Minute,
    /// Last minute of the targeting window (exclusive).
    pub targeting_end: Minute,
    /// Probability a click converts into a billable event.
    pub conversion_rate: f64,
    pub delay_model: DelayModel,
}

impl CampaignSpec {
    /// Targeting window length in minutes.
    pub fn targeting_span(&self) -> u32 {
        self.targeting_end - self.targeting_start
    }

    /// Maps a fraction of the targeting window onto an absolute minute.
    /// Fractions are measured from targeting start, so 0.0 is the first
    /// targeted minute and 1.0 the last.
    pub fn minute_at_fraction(&self, fraction: f64) -> Minute {
        let span = self.targeting_span() as f64;
        let offset = (fraction * span).round() as i64;
        let offset = offset.clamp(0, self.targeting_span() as i64);
        self.targeting_start + offset as u32
    }
}

/// Tuning parameters for the dynamic fast-finish start rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffParams {
    /// Overspend ratio at or below which the start fraction floors.
    pub min_overspend_ratio: f64,
    /// Overspend ratio at or above which the start fraction ceilings.
    pub max_overspend_ratio: f64,
    /// Earliest fast-finish start, as a fraction of the targeting window.
    pub min_start_fraction: f64,
    /// Latest fast-finish start, as a fraction of the targeting window.
    pub max_start_fraction: f64,
    /// Length of the throttle ramp placed at the start fraction.
    pub transition_window_minutes: u32,
    /// Days between unconditional re-adoptions of the computed start.
    pub refresh_period_days: u32,
}

impl Default for SffParams {
    fn default() -> Self {
        SffParams {
            min_overspend_ratio: 1.03,
            max_overspend_ratio: 1.50,
            min_start_fraction: 0.85,
            max_start_fraction: 0.95,
            transition_window_minutes: 60,
            refresh_period_days: 7,
        }
    }
}

impl SffParams {
    pub fn validate(&self) -> Result<(), Error> {
        for (field, v) in [
            ("sff.min_overspend_ratio", self.min_overspend_ratio),
            ("sff.max_overspend_ratio", self.max_overspend_ratio),
            ("sff.min_start_fraction", self.min_start_fraction),
            ("sff.max_start_fraction", self.max_start_fraction),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidSpec {
                    field,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if self.min_overspend_ratio < 1.0 {
            return Err(Error::InvalidSpec {
                field: "sff.min_overspend_ratio",
                reason: format!("must be >= 1.0, got {}", self.min_overspend_ratio),
            });
        }
        if self.max_overspend_ratio <= self.min_overspend_ratio {
            return Err(Error::InvalidSpec {
                field: "sff.max_overspend_ratio",
                reason: format!(
                    "must exceed min_overspend_ratio {}, got {}",
                    self.min_overspend_ratio, self.max_overspend_ratio
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.min_start_fraction) {
            return Err(Error::InvalidSpec {
                field: "sff.min_start_fraction",
                reason: format!("must lie in [0, 1], got {}", self.min_start_fraction),
            });
        }
        if self.max_start_fraction <= self.min_start_fraction || self.max_start_fraction > 1.0 {
            return Err(Error::InvalidSpec {
                field: "sff.max_start_fraction",
                reason: format!(
                    "must lie in (min_start_fraction, 1], got {}",
                    self.max_start_fraction
                ),
            });
        }
        if self.refresh_period_days == 0 {
            return Err(Error::InvalidSpec {
                field: "sff.refresh_period_days",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// Checks the transition window is proportionate to the targeting span:
    /// no longer than the stretch of day that can precede the latest start.
    /// A window this size may still truncate at day end when the computed
    /// start lands very late; the phase machine handles that by never
    /// reaching the unthrottled stage. Span-dependent, so checked where the
    /// campaign is known rather than in `validate`.
    pub fn validate_window_fit(&self, targeting_span: u32) -> Result<(), Error> {
        let latest_start = (self.max_start_fraction * targeting_span as f64).round() as u32;
        if self.transition_window_minutes > latest_start {
            return Err(Error::InvalidSpec {
                field: "sff.transition_window_minutes",
                reason: format!(
                    "window of {} min exceeds the {} min that precede the latest start \
                     (fraction {} of a {} min targeting span)",
                    self.transition_window_minutes,
                    latest_start,
                    self.max_start_fraction,
                    targeting_span
                ),
            });
        }
        Ok(())
    }
}

/// Phase of the pacing day. `GoalReached` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacingPhase {
    /// Feedback controller paces spend against the intraday plan.
    IntradayPacing,
    /// Throttle decays linearly from its snapshot value to zero.
    TransitionWindow,
    /// No throttling; every request is admitted.
    FastFinish,
    /// Goal recognized; serving stops for the rest of the day.
    GoalReached,
}

impl PacingPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            PacingPhase::IntradayPacing => "intraday",
            PacingPhase::TransitionWindow => "transition",
            PacingPhase::FastFinish => "fast_finish",
            PacingPhase::GoalReached => "goal_reached",
        }
    }
}

/// A billable click waiting for its conversion to land.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingFee {
    pub due_minute: Minute,
    /// Insertion order; ties on `due_minute` settle first-scheduled first.
    pub seq: u64,
    pub amount: Money,
}

impl Ord for PendingFee {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; reverse so the earliest due fee pops first.
        other
            .due_minute
            .cmp(&self.due_minute)
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for PendingFee {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Billing state for one campaign-day.
///
/// Invariant: `recognized_spend <= billing_cap`, and every scheduled micro
/// ends up in exactly one of `recognized_spend` or `dropped_spend`.
#[derive(Debug, Clone)]
pub struct BillingLedger {
    pub daily_goal: Money,
    pub billing_cap: Money,
    pub recognized_spend: Money,
    /// Spend recognized beyond the daily goal (but under the cap).
    pub overdelivery_spend: Money,
    /// Spend truncated by the billing cap.
    pub dropped_spend: Money,
    pending: BinaryHeap<PendingFee>,
    pending_total: Money,
    next_seq: u64,
}

impl BillingLedger {
    pub fn new(daily_goal: Money, billing_cap: Money) -> Self {
        BillingLedger {
            daily_goal,
            billing_cap,
            recognized_spend: 0,
            overdelivery_spend: 0,
            dropped_spend: 0,
            pending: BinaryHeap::new(),
            pending_total: 0,
            next_seq: 0,
        }
    }

    /// Queues a fee to bill at `due_minute`. Returns the sequence number
    /// assigned to the fee.
    pub fn schedule(&mut self, due_minute: Minute, amount: Money) -> u64 {
        debug_assert!(amount >= 0);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.push(PendingFee {
            due_minute,
            seq,
            amount,
        });
        self.pending_total += amount;
        seq
    }

    /// Bills every pending fee with `due_minute <= now`, in (due, seq) order,
    /// truncating at the cap. Returns the spend recognized by this call.
    pub fn settle_due(&mut self, now: Minute) -> Money {
        let mut recognized_here = 0;
        while let Some(fee) = self.pending.peek() {
            if fee.due_minute > now {
                break;
            }
            let fee = self.pending.pop().expect("peeked");
            self.pending_total -= fee.amount;
            let room = self.billing_cap - self.recognized_spend;
            let billed = fee.amount.min(room);
            let dropped = fee.amount - billed;
            self.recognized_spend += billed;
            self.dropped_spend += dropped;
            recognized_here += billed;
        }
        self.overdelivery_spend = (self.recognized_spend - self.daily_goal).max(0);
        recognized_here
    }

    /// Bills everything still pending regardless of due time. End-of-day
    /// settlement under the same-day billing policy.
    pub fn settle_all(&mut self) -> Money {
        self.settle_due(Minute::MAX)
    }

    /// Drains fees still pending at end of day without billing them, for the
    /// next-day spill policy. Returns the drained fees in (due, seq) order.
    pub fn drain_pending(&mut self) -> Vec<PendingFee> {
        let mut fees = std::mem::take(&mut self.pending).into_sorted_vec();
        // into_sorted_vec sorts ascending by Ord, which is reversed here;
        // flip to get (due, seq) ascending.
        fees.reverse();
        self.pending_total = 0;
        fees
    }

    /// Total amount scheduled but not yet settled.
    pub fn pending_spend(&self) -> Money {
        self.pending_total
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// True once recognized spend has reached the daily goal.
    pub fn goal_reached(&self) -> bool {
        self.recognized_spend >= self.daily_goal
    }
}

/// One day of historical spend, as consumed by the overspend-ratio estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyOutcome {
    pub day: Day,
    pub recognized_spend: Money,
    pub daily_goal: Money,
}

/// Per-campaign history the start-fraction rule reads and writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignHistory {
    pub outcomes: Vec<DailyOutcome>,
    /// Start fraction currently in force, if one has been computed.
    pub current_start_fraction: Option<f64>,
    /// Day the start fraction was last adopted verbatim.
    pub last_refresh_day: Option<Day>,
}

impl CampaignHistory {
    pub fn new() -> Self {
        CampaignHistory {
            outcomes: Vec::new(),
            current_start_fraction: None,
            last_refresh_day: None,
        }
    }

    pub fn record(&mut self, outcome: DailyOutcome) {
        self.outcomes.push(outcome);
    }

    /// Outcomes within `lookback_days` of `today`, oldest first. `today`
    /// itself is excluded; the ratio must only see completed days.
    pub fn window(&self, today: Day, lookback_days: u32) -> Vec<DailyOutcome> {
        let earliest = today.0 - lookback_days as i64;
        let mut out: Vec<DailyOutcome> = self
            .outcomes
            .iter()
            .copied()
            .filter(|o| o.day.0 >= earliest && o.day.0 < today.0)
            .collect();
        out.sort_by_key(|o| o.day);
        out
    }
}

impl Default for CampaignHistory {
    fn default() -> Self {
        Self::new()
    }
}

/// Validates a campaign spec, returning the first violated constraint.
pub fn validate_campaign(spec: &CampaignSpec) -> Result<(), Error> {
    if spec.daily_goal <= 0 {
        return Err(Error::InvalidSpec {
            field: "campaign.daily_goal",
            reason: format!("must be positive, got {}", spec.daily_goal),
        });
    }
    if spec.billing_cap < spec.daily_goal {
        return Err(Error::InvalidSpec {
            field: "campaign.billing_cap",
            reason: format!(
                "must be >= daily_goal {}, got {}",
                spec.daily_goal, spec.billing_cap
            ),
        });
    }
    if spec.fee_per_click <= 0 {
        return Err(Error::InvalidSpec {
            field: "campaign.fee_per_click",
            reason: format!("must be positive, got {}", spec.fee_per_click),
        });
    }
    if spec.targeting_end <= spec.targeting_start || spec.targeting_end > MINUTES_PER_DAY {
        return Err(Error::InvalidSpec {
            field: "campaign.targeting_window",
            reason: format!(
                "need start < end <= {}, got [{}, {})",
                MINUTES_PER_DAY, spec.targeting_start, spec.targeting_end
            ),
        });
    }
    if !spec.conversion_rate.is_finite() || !(0.0..=1.0).contains(&spec.conversion_rate) {
        return Err(Error::InvalidSpec {
            field: "campaign.conversion_rate",
            reason: format!("must lie in [0, 1], got {}", spec.conversion_rate),
        });
    }
    spec.delay_model.validate()?;
    Ok(())
}
