//! Discrete-time campaign-day simulator.
//!
//! Minutes tick across the targeting window; each minute settles due
//! attributions, advances the pacing phase, then processes that minute's
//! requests. Every request consumes all five of its random draws whether or
//! not it is admitted, wins, or converts, so runs that differ only in pacing
//! policy stay draw-for-draw aligned: common random numbers across paired
//! runs, byte-identical output for a repeated (input, seed) pair.

use crate::attribution::{schedule_click, settle_due, ClickEvent};
use crate::model::{
    validate_campaign, BillingLedger, CampaignHistory, CampaignSpec, DailyOutcome, Day, Minute,
    PacingPhase, PendingFee, SffParams, MINUTES_PER_DAY,
};
use crate::pacing::{admit_request, step_phase, PacingState};
use crate::rng::{uniform, DayStreams};
use crate::sff::{compute_overspend_ratio, sff_start_fraction, update_start_fraction, RatioMethod};
use crate::traffic::{auction_win, requests_at, TrafficModel};
use crate::Error;

use serde::{Deserialize, Serialize};

/// Pacing policy for a simulated day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PacingMode {
    /// Dynamic fast-finish start from spend history, with the transition
    /// window from the parameters.
    Sff,
    /// Fixed start fraction, immediate throttle drop (no window).
    TraditionalFf { start_fraction: f64 },
    /// No throttling at all; serve until the goal is recognized.
    Asap,
}

/// What the start fraction is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartBasis {
    /// Fraction of the targeting window (default).
    #[default]
    TargetingWindow,
    /// Fraction of the 1440-minute calendar day, clamped into the
    /// targeting window.
    CalendarDay,
}

/// What happens to conversions still pending when the day ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlementPolicy {
    /// Everything bills in the end-of-day pass; overdelivery is fully
    /// realized within the day (default).
    #[default]
    SameDay,
    /// Fees due past midnight carry into the next day's ledger.
    NextDaySpill,
}

/// Simulation-level knobs, all defaulted to the canonical configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// The simulated date; history strictly before this day feeds the
    /// overspend ratio.
    pub as_of_day: Day,
    /// How far back the overspend ratio looks.
    pub lookback_days: u32,
    pub ratio_method: RatioMethod,
    pub start_basis: StartBasis,
    /// Shifts the transition window relative to the computed start minute
    /// (SFF mode only). Zero opens the window at the start minute; a
    /// negative offset of one window length instead ends the ramp there, so
    /// unthrottled serving begins exactly at the computed start.
    pub window_offset_minutes: i32,
    /// When false, the closed loop adopts every daily candidate verbatim
    /// instead of holding starts monotone between refreshes. Diagnostic.
    pub monotone_rule: bool,
    /// Half-width of the uniform perturbation applied to the auction win
    /// probability per request.
    pub win_noise_half_width: f64,
    pub settlement: SettlementPolicy,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            as_of_day: Day(0),
            lookback_days: 180,
            ratio_method: RatioMethod::MeanOfRatios,
            start_basis: StartBasis::TargetingWindow,
            window_offset_minutes: 0,
            monotone_rule: true,
            win_noise_half_width: 0.05,
            settlement: SettlementPolicy::SameDay,
        }
    }
}

impl SimulationOptions {
    fn validate(&self) -> Result<(), Error> {
        if self.lookback_days == 0 {
            return Err(Error::InvalidSpec {
                field: "options.lookback_days",
                reason: "must be >= 1".into(),
            });
        }
        if !self.win_noise_half_width.is_finite()
            || !(0.0..=0.5).contains(&self.win_noise_half_width)
        {
            return Err(Error::InvalidSpec {
                field: "options.win_noise_half_width",
                reason: format!("must lie in [0, 0.5], got {}", self.win_noise_half_width),
            });
        }
        Ok(())
    }
}

/// Everything one simulated day produced.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Start fraction in force (0 for ASAP).
    pub start_fraction: f64,
    /// Minute the transition window opened.
    pub start_minute: Minute,
    /// Minute the ramp reaches zero. May lie past the targeting window when
    /// the start lands very late.
    pub window_end_minute: Minute,
    /// Recognized spend after each targeting minute, plus one final entry
    /// after end-of-day settlement. Length = targeting span + 1.
    pub spend_curve: Vec<crate::model::Money>,
    /// Phase in force during each targeting minute.
    pub phase_trace: Vec<PacingPhase>,
    /// Throttle in force during each targeting minute.
    pub throttle_trace: Vec<f64>,
    /// Admitted auction wins, in arrival order.
    pub clicks: Vec<ClickEvent>,
    pub final_ledger: BillingLedger,
    /// First minute at which recognized spend reached the goal; the
    /// targeting-end minute if the crossing happened at end-of-day
    /// settlement; absent if the goal was never reached.
    pub goal_hit_minute: Option<Minute>,
    /// Fees carried to the next day (next-day-spill settlement only),
    /// with due minutes rebased to the next day.
    pub carryover: Vec<PendingFee>,
}

/// One entry of a closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoopDay {
    pub day: Day,
    /// Start fraction in force for this day, after the update rule.
    pub start_fraction: f64,
    /// True when this day re-adopted the candidate verbatim (refresh or
    /// first adoption).
    pub refreshed: bool,
    pub result: SimulationResult,
}

/// Simulates one campaign-day under default options.
pub fn simulate_day(
    spec: &CampaignSpec,
    params: &SffParams,
    history: &CampaignHistory,
    mode: PacingMode,
    traffic: &TrafficModel,
    seed: u64,
) -> Result<SimulationResult, Error> {
    simulate_day_with(
        spec,
        params,
        history,
        mode,
        traffic,
        seed,
        &SimulationOptions::default(),
    )
}

/// Simulates one campaign-day.
///
/// In SFF mode the start fraction is the raw curve output for the history's
/// overspend ratio; the monotone update rule only applies across days, in
/// [`simulate_closed_loop`].
pub fn simulate_day_with(
    spec: &CampaignSpec,
    params: &SffParams,
    history: &CampaignHistory,
    mode: PacingMode,
    traffic: &TrafficModel,
    seed: u64,
    options: &SimulationOptions,
) -> Result<SimulationResult, Error> {
    validate_inputs(spec, params, traffic, options)?;
    let (start_fraction, window_len, apply_offset) = match mode {
        PacingMode::Asap => (0.0, 0, false),
        PacingMode::TraditionalFf { start_fraction } => {
            if !start_fraction.is_finite() || !(0.0..=1.0).contains(&start_fraction) {
                return Err(Error::InvalidSpec {
                    field: "mode.start_fraction",
                    reason: format!("must lie in [0, 1], got {start_fraction}"),
                });
            }
            (start_fraction, 0, false)
        }
        PacingMode::Sff => {
            let or = compute_overspend_ratio(
                history,
                options.lookback_days,
                options.as_of_day,
                options.ratio_method,
            )?;
            (
                sff_start_fraction(or, params),
                params.transition_window_minutes,
                true,
            )
        }
    };
    Ok(run_day(
        spec,
        start_fraction,
        window_len,
        apply_offset,
        traffic,
        seed,
        options,
        &[],
    ))
}

/// Runs the closed loop under default options.
pub fn simulate_closed_loop(
    spec: &CampaignSpec,
    params: &SffParams,
    initial_history: &CampaignHistory,
    days: u32,
    traffic: &TrafficModel,
    seed: u64,
) -> Result<Vec<ClosedLoopDay>, Error> {
    simulate_closed_loop_with(
        spec,
        params,
        initial_history,
        days,
        traffic,
        seed,
        &SimulationOptions::default(),
    )
}

/// Multi-day loop: each day computes the overspend ratio from accumulated
/// history, maps it to a candidate start, applies the update rule (unless
/// the diagnostic flag disables it), simulates the day, and feeds the
/// outcome back into history.
///
/// Day `d` runs on seed `seed + d`, so day 0 of a closed loop reproduces a
/// single-day simulation on the same seed. A campaign with no usable
/// history starts at the latest allowed fraction: an unknown campaign is
/// assumed to overdeliver until it proves otherwise.
pub fn simulate_closed_loop_with(
    spec: &CampaignSpec,
    params: &SffParams,
    initial_history: &CampaignHistory,
    days: u32,
    traffic: &TrafficModel,
    seed: u64,
    options: &SimulationOptions,
) -> Result<Vec<ClosedLoopDay>, Error> {
    if days == 0 {
        return Err(Error::InvalidSpec {
            field: "days",
            reason: "closed loop needs at least one day".into(),
        });
    }
    validate_inputs(spec, params, traffic, options)?;
    let mut history = initial_history.clone();
    let mut carry: Vec<PendingFee> = Vec::new();
    let mut out = Vec::with_capacity(days as usize);
    for d in 0..days {
        let today = Day(options.as_of_day.0 + d as i64);
        let candidate = match compute_overspend_ratio(
            &history,
            options.lookback_days,
            today,
            options.ratio_method,
        ) {
            Ok(or) => sff_start_fraction(or, params),
            Err(Error::NoHistory { .. }) => params.max_start_fraction,
            Err(e) => return Err(e),
        };
        let (start_fraction, refreshed) = if options.monotone_rule {
            let prev_refresh = history.last_refresh_day;
            let adopted = update_start_fraction(&mut history, candidate, today, params);
            (adopted, history.last_refresh_day != prev_refresh)
        } else {
            history.current_start_fraction = Some(candidate);
            (candidate, false)
        };
        let result = run_day(
            spec,
            start_fraction,
            params.transition_window_minutes,
            true,
            traffic,
            seed.wrapping_add(d as u64),
            options,
            &carry,
        );
        carry = result.carryover.clone();
        history.record(DailyOutcome {
            day: today,
            recognized_spend: result.final_ledger.recognized_spend,
            daily_goal: spec.daily_goal,
        });
        out.push(ClosedLoopDay {
            day: today,
            start_fraction,
            refreshed,
            result,
        });
    }
    Ok(out)
}

fn validate_inputs(
    spec: &CampaignSpec,
    params: &SffParams,
    traffic: &TrafficModel,
    options: &SimulationOptions,
) -> Result<(), Error> {
    validate_campaign(spec)?;
    params.validate()?;
    params.validate_window_fit(spec.targeting_span())?;
    traffic.validate()?;
    options.validate()
}

/// The day loop proper. `carry_in` fees are scheduled before the first
/// minute (due minutes already rebased to this day).
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_day(
    spec: &CampaignSpec,
    start_fraction: f64,
    window_len: u32,
    apply_offset: bool,
    traffic: &TrafficModel,
    seed: u64,
    options: &SimulationOptions,
    carry_in: &[PendingFee],
) -> SimulationResult {
    let span = spec.targeting_span() as usize;
    let base = match options.start_basis {
        StartBasis::TargetingWindow => spec.minute_at_fraction(start_fraction),
        StartBasis::CalendarDay => {
            let m = (start_fraction * MINUTES_PER_DAY as f64).round() as i64;
            (m.clamp(spec.targeting_start as i64, spec.targeting_end as i64)) as Minute
        }
    };
    let start_minute = if apply_offset {
        let shifted = base as i64 + options.window_offset_minutes as i64;
        shifted.clamp(spec.targeting_start as i64, spec.targeting_end as i64) as Minute
    } else {
        base
    };
    let window_end = start_minute + window_len;

    let mut streams = DayStreams::new(seed);
    let mut ledger = BillingLedger::new(spec.daily_goal, spec.billing_cap);
    for fee in carry_in {
        ledger.schedule(fee.due_minute, fee.amount);
    }
    let mut state = PacingState::new(start_minute, window_end);
    let win_p = traffic.win_probability();

    let mut spend_curve = Vec::with_capacity(span + 1);
    let mut phase_trace = Vec::with_capacity(span);
    let mut throttle_trace = Vec::with_capacity(span);
    let mut clicks = Vec::new();
    let mut goal_hit_minute = None;

    for minute in spec.targeting_start..spec.targeting_end {
        settle_due(&mut ledger, minute);
        if goal_hit_minute.is_none() && ledger.goal_reached() {
            goal_hit_minute = Some(minute);
        }
        state = step_phase(state, minute, &ledger, spec);
        let n = requests_at(traffic, minute, &mut streams.traffic);
        for _ in 0..n {
            // Every request burns all five draws regardless of outcome so
            // that draw positions depend only on the traffic realization.
            let u_admit = uniform(&mut streams.admission);
            let u_noise = uniform(&mut streams.auction);
            let u_win = uniform(&mut streams.auction);
            let u_convert = uniform(&mut streams.conversion);
            let u_delay = uniform(&mut streams.delay);
            if !admit_request(&state, u_admit) {
                continue;
            }
            let noise = (2.0 * u_noise - 1.0) * options.win_noise_half_width;
            let p_eff = (win_p + noise).clamp(0.0, 1.0);
            if !auction_win(p_eff, u_win) {
                continue;
            }
            let click = schedule_click(minute, spec, u_convert, u_delay);
            if let Some(due) = click.conversion_minute {
                ledger.schedule(due, click.fee);
            }
            clicks.push(click);
        }
        spend_curve.push(ledger.recognized_spend);
        phase_trace.push(state.phase);
        throttle_trace.push(state.throttle_rate);
    }

    // End of day: bill everything due before midnight, then apply the
    // settlement policy to conversions still in flight.
    settle_due(&mut ledger, MINUTES_PER_DAY - 1);
    let carryover = match options.settlement {
        SettlementPolicy::SameDay => {
            ledger.settle_all();
            Vec::new()
        }
        SettlementPolicy::NextDaySpill => ledger
            .drain_pending()
            .into_iter()
            .map(|f| PendingFee {
                due_minute: f.due_minute - MINUTES_PER_DAY,
                seq: f.seq,
                amount: f.amount,
            })
            .collect(),
    };
    if goal_hit_minute.is_none() && ledger.goal_reached() {
        goal_hit_minute = Some(spec.targeting_end);
    }
    spend_curve.push(ledger.recognized_spend);

    SimulationResult {
        start_fraction,
        start_minute,
        window_end_minute: window_end,
        spend_curve,
        phase_trace,
        throttle_trace,
        clicks,
        final_ledger: ledger,
        goal_hit_minute,
        carryover,
    }
}
