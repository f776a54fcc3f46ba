//! Acceptance suite for the pacing engine and simulator.
//!
//! Each test checks one falsifiable claim about the system, prints a single
//! PASS/FAIL line (visible with `--nocapture`, or on failure), and enforces
//! a runtime budget. Numeric tolerances are pinned in each test; money
//! comparisons are exact integer equality.
//!
//! The determinism check for the command-line binary (byte-identical output
//! files across reruns) lives in the CLI crate's own acceptance test.

use pacekit::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

/// Prints the verdict line and fails the test if `pass` is false or the
/// runtime budget was blown.
fn check(name: &str, pass: bool, elapsed: Duration, budget: Duration, detail: String) {
    let in_time = elapsed <= budget;
    let status = if pass && in_time { "PASS" } else { "FAIL" };
    println!("acceptance {name}: {status} ({detail}; {elapsed:.2?} of {budget:.2?} budget)");
    assert!(pass, "{name}: {detail}");
    assert!(
        in_time,
        "{name}: runtime {elapsed:?} exceeded budget {budget:?}"
    );
}

fn canonical_params() -> SffParams {
    SffParams {
        min_overspend_ratio: 1.03,
        max_overspend_ratio: 1.50,
        min_start_fraction: 0.85,
        max_start_fraction: 0.95,
        ..SffParams::default()
    }
}

/// Random valid curve parameters: ratio band and start band both non-empty.
fn random_params(rng: &mut ChaCha8Rng) -> SffParams {
    let min_or = 0.5 + rng.random::<f64>() * 0.9;
    let max_or = min_or + 0.05 + rng.random::<f64>() * 0.95;
    let min_start = 0.3 + rng.random::<f64>() * 0.6;
    let max_start = min_start + 0.01 + rng.random::<f64>() * (0.99 - min_start);
    SffParams {
        min_overspend_ratio: min_or,
        max_overspend_ratio: max_or,
        min_start_fraction: min_start,
        max_start_fraction: max_start,
        ..SffParams::default()
    }
}

#[test]
fn start_curve_matches_frozen_values() {
    let t0 = Instant::now();
    let p = canonical_params();
    let at = |or: f64| sff_start_fraction(OverspendRatio(or), &p);

    // Band endpoints map to the start-fraction endpoints.
    let lo_err = (at(1.03) - 0.85).abs();
    let hi_err = (at(1.50) - 0.95).abs();
    // Frozen from a high-precision evaluation of 0.85 + 0.1 * sqrt(0.5),
    // the curve value at the band midpoint 1.265.
    let mid_err = (at(1.265) - 0.920_710_678_118_654_8).abs();

    let pass = lo_err < 1e-12 && hi_err < 1e-12 && mid_err < 1e-9;
    check(
        "start curve frozen values",
        pass,
        t0.elapsed(),
        Duration::from_secs(1),
        format!("endpoint errors {lo_err:.2e}/{hi_err:.2e} (tol 1e-12), midpoint error {mid_err:.2e} (tol 1e-9)"),
    );
}

#[test]
fn start_curve_is_monotone_bounded_and_concave() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let cases = 10_000;
    let mut worst_chord = f64::INFINITY;
    for _ in 0..cases {
        let p = random_params(&mut rng);
        let at = |or: f64| sff_start_fraction(OverspendRatio(or), &p);

        // Range containment on a wide domain, clamping regions included.
        let lo = p.min_overspend_ratio - 1.0;
        let hi = p.max_overspend_ratio + 1.0;
        for _ in 0..4 {
            let or = lo + rng.random::<f64>() * (hi - lo);
            let f = at(or);
            assert!(
                (p.min_start_fraction..=p.max_start_fraction).contains(&f),
                "start {f} escaped [{}, {}] at or {or}",
                p.min_start_fraction,
                p.max_start_fraction,
            );
        }

        // Monotone: f(a) <= f(b) for a <= b, anywhere on the domain.
        let mut a = lo + rng.random::<f64>() * (hi - lo);
        let mut b = lo + rng.random::<f64>() * (hi - lo);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        assert!(
            at(a) <= at(b) + 1e-12,
            "curve decreased: f({a}) = {} > f({b}) = {}",
            at(a),
            at(b),
        );

        // Concave inside the ratio band: chord slopes non-increasing.
        // Points are kept a minimum distance apart so the slopes are
        // numerically meaningful.
        let band = p.max_overspend_ratio - p.min_overspend_ratio;
        let x0 = p.min_overspend_ratio + rng.random::<f64>() * band * 0.4;
        let x1 = x0 + band * 0.05 + rng.random::<f64>() * band * 0.2;
        let x2 = x1 + band * 0.05 + rng.random::<f64>() * band * 0.2;
        let s01 = (at(x1) - at(x0)) / (x1 - x0);
        let s12 = (at(x2) - at(x1)) / (x2 - x1);
        worst_chord = worst_chord.min(s01 - s12);
        assert!(
            s01 >= s12 - 1e-9,
            "chord slopes increased: {s01} then {s12} at ({x0}, {x1}, {x2})"
        );
    }
    check(
        "start curve shape properties",
        true,
        t0.elapsed(),
        Duration::from_secs(5),
        format!("{cases} random parameter sets; min chord-slope drop {worst_chord:.3e} (must be > -1e-9)"),
    );
}

#[test]
fn update_rule_never_decreases_between_refreshes() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let cases = 10_000;
    let mut refresh_days = 0u64;
    for _ in 0..cases {
        let mut p = SffParams::default();
        p.refresh_period_days = 1 + rng.random_range(0..14u32);
        let mut history = CampaignHistory::new();
        // Half the cases begin mid-stream with a value already in force.
        if rng.random::<bool>() {
            history.current_start_fraction = Some(rng.random::<f64>());
            history.last_refresh_day = Some(Day(0));
        }
        let mut today = Day(rng.random_range(0..3i64));
        for _ in 0..30 {
            let candidate = rng.random::<f64>();
            let prev = history.current_start_fraction;
            let due_refresh = match history.last_refresh_day {
                Some(last) => today.0 - last.0 >= p.refresh_period_days as i64,
                None => true,
            };
            let adopted = update_start_fraction(&mut history, candidate, today, &p);
            if due_refresh || prev.is_none() {
                refresh_days += 1;
                assert_eq!(
                    adopted, candidate,
                    "refresh day must adopt the candidate verbatim"
                );
                assert_eq!(history.last_refresh_day, Some(today));
            } else {
                let prev = prev.unwrap();
                assert_eq!(adopted, prev.max(candidate));
                assert!(
                    adopted >= prev,
                    "stored start decreased between refreshes: {prev} -> {adopted}"
                );
            }
            assert_eq!(history.current_start_fraction, Some(adopted));
            today = Day(today.0 + rng.random_range(1..4i64));
        }
    }
    check(
        "monotone update rule",
        true,
        t0.elapsed(),
        Duration::from_secs(5),
        format!("{cases} random 30-step candidate sequences, {refresh_days} refresh adoptions checked verbatim"),
    );
}

#[test]
fn transition_ramp_is_affine_and_bottoms_at_zero() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let spec = default_campaign();
    let ledger = BillingLedger::new(spec.daily_goal, spec.billing_cap);
    let cases = 2_000;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let p0: f64 = rng.random();
        let window = 1 + rng.random_range(0..240u32);
        let start = spec.targeting_start + rng.random_range(0..spec.targeting_span() - window);
        let mut state = PacingState::new(start, start + window);
        state.throttle_rate = p0;
        for minute in start..start + window {
            state = step_phase(state, minute, &ledger, &spec);
            let elapsed = (minute - start) as f64;
            let expected = p0 * (window as f64 - elapsed) / window as f64;
            let err = (state.throttle_rate - expected).abs();
            worst = worst.max(err);
            assert!(
                err < 1e-9,
                "ramp off affine at minute {minute}: {} vs {expected}",
                state.throttle_rate
            );
            assert_eq!(state.phase, PacingPhase::TransitionWindow);
        }
        state = step_phase(state, start + window, &ledger, &spec);
        assert_eq!(state.phase, PacingPhase::FastFinish);
        assert_eq!(state.throttle_rate, 0.0, "ramp must bottom out exactly");
    }
    check(
        "transition ramp affine decay",
        true,
        t0.elapsed(),
        Duration::from_secs(5),
        format!("{cases} random (p0, window) ramps, worst affine error {worst:.2e} (tol 1e-9), exact 0.0 at window end"),
    );
}

/// Field-by-field equality of two simulation results. f64 comparisons are
/// bitwise, money exact, so this is a byte-level identity check.
fn results_identical(a: &SimulationResult, b: &SimulationResult) -> bool {
    a.start_fraction.to_bits() == b.start_fraction.to_bits()
        && a.start_minute == b.start_minute
        && a.window_end_minute == b.window_end_minute
        && a.spend_curve == b.spend_curve
        && a.phase_trace == b.phase_trace
        && a.throttle_trace.len() == b.throttle_trace.len()
        && a.throttle_trace
            .iter()
            .zip(&b.throttle_trace)
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.clicks == b.clicks
        && a.goal_hit_minute == b.goal_hit_minute
        && a.carryover == b.carryover
        && a.final_ledger.recognized_spend == b.final_ledger.recognized_spend
        && a.final_ledger.overdelivery_spend == b.final_ledger.overdelivery_spend
        && a.final_ledger.dropped_spend == b.final_ledger.dropped_spend
        && a.final_ledger.pending_spend() == b.final_ledger.pending_spend()
}

#[test]
fn zero_window_equals_static_fast_finish() {
    let t0 = Instant::now();
    let campaign = default_campaign();
    let mut params = default_params();
    params.transition_window_minutes = 0;
    let history = default_history();
    let traffic = default_traffic();
    let options = SimulationOptions::default();

    // The start the dynamic mode will compute from this history.
    let or = compute_overspend_ratio(
        &history,
        options.lookback_days,
        options.as_of_day,
        options.ratio_method,
    )
    .unwrap();
    let start = sff_start_fraction(or, &params);

    let mut all_identical = true;
    for seed in 0..20u64 {
        let dynamic = simulate_day(
            &campaign,
            &params,
            &history,
            PacingMode::Sff,
            &traffic,
            seed,
        )
        .unwrap();
        let static_ff = simulate_day(
            &campaign,
            &params,
            &history,
            PacingMode::TraditionalFf {
                start_fraction: start,
            },
            &traffic,
            seed,
        )
        .unwrap();
        all_identical &= results_identical(&dynamic, &static_ff);
    }
    check(
        "zero window equals static fast finish",
        all_identical,
        t0.elapsed(),
        Duration::from_secs(5),
        format!("20 paired days at start fraction {start:.6}, every field bit-identical"),
    );
}

/// Brute-force replay of a day's billing from its recorded click stream:
/// tally every conversion fee in (due, arrival) order against the cap and
/// goal, exactly as integer money.
fn replay_ledger(clicks: &[ClickEvent], goal: Money, cap: Money) -> (Money, Money, Money) {
    let mut fees: Vec<(Minute, usize, Money)> = clicks
        .iter()
        .enumerate()
        .filter(|(_, c)| c.converts)
        .map(|(i, c)| (c.conversion_minute.unwrap(), i, c.fee))
        .collect();
    fees.sort();
    let mut recognized = 0;
    let mut dropped = 0;
    for (_, _, amount) in fees {
        let room = cap - recognized;
        let billed = amount.min(room);
        recognized += billed;
        dropped += amount - billed;
    }
    (recognized, dropped, (recognized - goal).max(0))
}

#[test]
fn ledger_matches_brute_force_replay() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let cases = 1_000;
    let mut total_clicks = 0usize;
    for case in 0..cases {
        let fee = rng.random_range(10_000..=1_000_000i64);
        let goal = fee * rng.random_range(1..=40i64);
        let cap = goal + rng.random_range(0..=goal);
        let start = rng.random_range(0..600u32);
        let span = rng.random_range(20..=100u32);
        let rate = rng.random_range(0..=2u32);
        let delay_model = match rng.random_range(0..3u8) {
            0 => DelayModel::Immediate,
            1 => DelayModel::Exponential {
                mean_minutes: 5.0 + rng.random::<f64>() * 115.0,
            },
            _ => DelayModel::Histogram {
                bins: vec![(0, 0.5), (30, 0.3), (120, 0.2)],
            },
        };
        let spec = CampaignSpec {
            id: case,
            daily_goal: goal,
            billing_cap: cap,
            fee_per_click: fee,
            targeting_start: start,
            targeting_end: start + span,
            conversion_rate: 0.05 + rng.random::<f64>() * 0.9,
            delay_model,
        };
        let traffic = TrafficModel::Constant {
            requests_per_minute: rate,
            win_probability: 0.3 + rng.random::<f64>() * 0.6,
        };
        let mode = match rng.random_range(0..3u8) {
            0 => PacingMode::Asap,
            1 => PacingMode::TraditionalFf {
                start_fraction: rng.random(),
            },
            _ => PacingMode::Sff,
        };
        let history = history_from_ratios(
            goal,
            &[
                0.5 + rng.random::<f64>() * 1.5,
                0.5 + rng.random::<f64>() * 1.5,
                0.5 + rng.random::<f64>() * 1.5,
            ],
        );
        let params = SffParams {
            transition_window_minutes: rng.random_range(0..=span / 4),
            ..SffParams::default()
        };
        let result =
            simulate_day(&spec, &params, &history, mode, &traffic, rng.random()).unwrap();

        assert!(result.clicks.len() <= 200, "day was meant to stay small");
        total_clicks += result.clicks.len();
        let (recognized, dropped, overdelivery) =
            replay_ledger(&result.clicks, goal, cap);
        let ledger = &result.final_ledger;
        assert_eq!(ledger.recognized_spend, recognized, "case {case}");
        assert_eq!(ledger.dropped_spend, dropped, "case {case}");
        assert_eq!(ledger.overdelivery_spend, overdelivery, "case {case}");
        assert_eq!(ledger.pending_spend(), 0, "case {case}: same-day policy");
        assert_eq!(
            *result.spend_curve.last().unwrap(),
            recognized,
            "case {case}: spend curve must end at the settled total"
        );
        assert!(
            result.spend_curve.windows(2).all(|w| w[0] <= w[1]),
            "case {case}: recognized spend must never decrease"
        );
        assert_eq!(
            result.goal_hit_minute.is_some(),
            recognized >= goal,
            "case {case}: goal flag must agree with settled spend"
        );
    }
    check(
        "ledger brute-force replay",
        true,
        t0.elapsed(),
        Duration::from_secs(30),
        format!("{cases} random small days, {total_clicks} clicks re-tallied, all money fields exact"),
    );
}

#[test]
fn dynamic_start_and_window_both_improve_delivery() {
    let t0 = Instant::now();
    let campaign = default_campaign();
    let params = default_params();
    let traffic = default_traffic();
    let overspend = default_history();
    let underspend = underspend_history();
    let control = PacingMode::TraditionalFf {
        start_fraction: default_control_start(),
    };
    let mut no_window = params.clone();
    no_window.transition_window_minutes = 0;

    let seeds = 50u64;
    // Mean deltas, treatment minus control: [dynamic start alone, window
    // alone, full policy] for live hours and for overdelivery rate.
    let mut dlh = [0.0f64; 3];
    let mut dod = [0.0f64; 3];
    let mut gain = 0.0f64;
    for k in 0..seeds {
        let seed = 1000 + k;
        let run = |p: &SffParams, h: &CampaignHistory, mode: PacingMode| {
            let r = simulate_day(&campaign, p, h, mode, &traffic, seed).unwrap();
            (
                live_hours(&r, &campaign),
                overdelivery_rate(&r, &campaign),
            )
        };

        // Dynamic start alone: computed start vs static, both windowless.
        let sff0 = run(&no_window, &overspend, PacingMode::Sff);
        let ff0 = run(&no_window, &overspend, control);
        dlh[0] += sff0.0 - ff0.0;
        dod[0] += sff0.1 - ff0.1;

        // Window alone: an underspending history clamps the computed start
        // to the static value, so the ramp is the only difference.
        let with_window = run(&params, &underspend, PacingMode::Sff);
        let without = run(&no_window, &underspend, PacingMode::Sff);
        dlh[1] += with_window.0 - without.0;
        dod[1] += with_window.1 - without.1;

        // Full policy vs the static baseline.
        let sff = run(&params, &overspend, PacingMode::Sff);
        let ff = run(&params, &overspend, control);
        dlh[2] += sff.0 - ff.0;
        dod[2] += sff.1 - ff.1;
        gain += (sff.0 - ff.0) / ff.0;
    }
    for v in dlh.iter_mut().chain(dod.iter_mut()) {
        *v /= seeds as f64;
    }
    let mean_gain = gain / seeds as f64;

    let direction = dlh.iter().all(|&d| d > 0.0) && dod.iter().all(|&d| d < 0.0);
    let band = (0.02..=0.20).contains(&mean_gain);
    check(
        "dynamic start and window improve delivery",
        direction && band,
        t0.elapsed(),
        Duration::from_secs(120),
        format!(
            "{seeds} paired seeds; live-hour deltas {:+.3}/{:+.3}/{:+.3} h (start alone/window alone/full), \
             overdelivery deltas {:+.4}/{:+.4}/{:+.4}, full-policy gain {:.1}% (band 2%..20%)",
            dlh[0], dlh[1], dlh[2], dod[0], dod[1], dod[2], mean_gain * 100.0
        ),
    );
}

#[test]
fn budget_split_favors_the_dynamic_arm() {
    let t0 = Instant::now();
    let set = synthetic_campaign_set(28);
    let campaigns: Vec<_> = set.iter().map(|(c, _, _)| c.clone()).collect();
    let histories: Vec<_> = set.iter().map(|(_, h, _)| h.clone()).collect();
    let traffic: Vec<_> = set.iter().map(|(_, _, t)| t.clone()).collect();
    let result = run_budget_split(
        &campaigns,
        &histories,
        &default_params(),
        &BudgetSplitConfig::default(),
        &traffic,
        42,
    )
    .unwrap();

    let c = &result.control_summary;
    let t = &result.treatment_summary;
    let pass = t.mean_overdelivery_rate < c.mean_overdelivery_rate
        && t.mean_live_hours > c.mean_live_hours;
    check(
        "budget split favors the dynamic arm",
        pass,
        t0.elapsed(),
        Duration::from_secs(300),
        format!(
            "28 campaigns; overdelivery {:.4} -> {:.4}, live hours {:.2} -> {:.2} (control -> treatment)",
            c.mean_overdelivery_rate, t.mean_overdelivery_rate, c.mean_live_hours, t.mean_live_hours
        ),
    );
}

#[test]
fn closed_loop_oscillates_without_the_monotone_rule() {
    let t0 = Instant::now();
    let campaign = oscillation_campaign();
    let params = default_params();
    let history = oscillation_history();
    let traffic = oscillation_traffic();
    let days = 30;
    let seed = 99;

    let rule_off = simulate_closed_loop_with(
        &campaign,
        &params,
        &history,
        days,
        &traffic,
        seed,
        &oscillation_options(false),
    )
    .unwrap();
    let rule_on = simulate_closed_loop_with(
        &campaign,
        &params,
        &history,
        days,
        &traffic,
        seed,
        &oscillation_options(true),
    )
    .unwrap();

    // Without the rule the feedback loop hunts: the start must fall at some
    // point and rise again afterwards.
    let starts: Vec<f64> = rule_off.iter().map(|d| d.start_fraction).collect();
    let first_drop = starts.windows(2).position(|w| w[1] < w[0]);
    let oscillated = first_drop.is_some_and(|i| {
        starts[i + 1..].windows(2).any(|w| w[1] > w[0])
    });

    // With the rule every non-refresh day is monotone non-decreasing.
    let monotone = rule_on
        .windows(2)
        .all(|w| w[1].refreshed || w[1].start_fraction >= w[0].start_fraction);

    let span = starts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    check(
        "closed loop oscillation and damping",
        oscillated && monotone,
        t0.elapsed(),
        Duration::from_secs(60),
        format!(
            "{days} days; rule off wandered {:.3}..{:.3} with a drop-then-rise, rule on non-decreasing between refreshes",
            span.0, span.1
        ),
    );
}

#[test]
fn asap_exhausts_the_goal_early() {
    let t0 = Instant::now();
    let campaign = default_campaign();
    let params = default_params();
    let history = default_history();
    let traffic = default_traffic();
    let first_third = campaign.targeting_start + campaign.targeting_span() / 3;

    let mut worst = 0;
    for seed in 0..5u64 {
        let result = simulate_day(
            &campaign,
            &params,
            &history,
            PacingMode::Asap,
            &traffic,
            seed,
        )
        .unwrap();
        let hit = result
            .goal_hit_minute
            .expect("unthrottled serving must reach the goal");
        worst = worst.max(hit);
    }
    check(
        "unthrottled serving exhausts the goal early",
        worst <= first_third,
        t0.elapsed(),
        Duration::from_secs(10),
        format!("5 seeds; latest goal hit minute {worst}, first third of the window ends at {first_third}"),
    );
}
