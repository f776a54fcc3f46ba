//! Budget-split A/B harness.
//!
//! Each campaign's goal and cap are halved into a control arm (static
//! fast-finish start, no transition window) and a treatment arm. The
//! campaign's request stream is generated once and dealt to the arms by
//! alternating global request index, and both arms draw from identical
//! random substreams, so the comparison is paired down to the individual
//! request. With the treatment configured identically to control the two
//! arms are the same computation and every delta is exactly zero.

use serde::{Deserialize, Serialize};

use crate::metrics::{campaign_metrics, summarize, CampaignMetrics, MetricsSummary};
use crate::model::{
    CampaignHistory, CampaignSpec, DailyOutcome, Day, Money, PendingFee, SffParams,
};
use crate::rng::{derive_seed, DayStreams};
use crate::sff::{compute_overspend_ratio, sff_start_fraction, update_start_fraction};
use crate::sim::{run_day, SimulationOptions, SimulationResult};
use crate::traffic::{requests_at, TrafficModel};
use crate::Error;

/// Policy the treatment arm runs. The control arm always runs the static
/// start with no window; pointing the treatment at the same static start
/// makes the experiment a self-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreatmentMode {
    Sff,
    TraditionalFf { start_fraction: f64 },
}

/// Experiment-level configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSplitConfig {
    /// Start fraction for the control arm (and window-free drop).
    pub control_start_fraction: f64,
    pub treatment: TreatmentMode,
    /// Days per arm; with more than one day each arm runs its own closed
    /// loop over its half of the traffic.
    pub days: u32,
    pub options: SimulationOptions,
}

impl Default for BudgetSplitConfig {
    fn default() -> Self {
        BudgetSplitConfig {
            control_start_fraction: 0.85,
            treatment: TreatmentMode::Sff,
            days: 1,
            options: SimulationOptions::default(),
        }
    }
}

/// One arm's end state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub daily_goal: Money,
    pub billing_cap: Money,
    /// Mean over days for the rates, total over days for spend.
    pub metrics: CampaignMetrics,
    /// Start fraction in force on the final day.
    pub start_fraction: f64,
}

/// Paired outcome for one campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbRow {
    pub campaign_id: u64,
    pub control: ArmOutcome,
    pub treatment: ArmOutcome,
    /// treatment minus control.
    pub delta_live_hours: f64,
    /// treatment minus control (negative is the direction this engine
    /// exists to produce).
    pub delta_overdelivery: f64,
}

/// Full experiment output. Aggregates are recomputable from the rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbResult {
    pub rows: Vec<AbRow>,
    pub mean_delta_live_hours: f64,
    pub mean_delta_overdelivery: f64,
    pub control_summary: MetricsSummary,
    pub treatment_summary: MetricsSummary,
}

enum ArmMode {
    Static(f64),
    Dynamic,
}

/// Runs the budget-split experiment across `campaigns`.
///
/// `histories` and `traffic` pair up with `campaigns` by index. Every
/// campaign derives its own seed from the master seed and its id, so adding
/// or removing campaigns leaves the others' results untouched.
pub fn run_budget_split(
    campaigns: &[CampaignSpec],
    histories: &[CampaignHistory],
    params: &SffParams,
    config: &BudgetSplitConfig,
    traffic: &[TrafficModel],
    seed: u64,
) -> Result<AbResult, Error> {
    if campaigns.is_empty() {
        return Err(Error::NoCampaigns);
    }
    if histories.len() != campaigns.len() {
        return Err(Error::InvalidSpec {
            field: "abtest.histories",
            reason: format!(
                "{} histories for {} campaigns",
                histories.len(),
                campaigns.len()
            ),
        });
    }
    if traffic.len() != campaigns.len() {
        return Err(Error::InvalidSpec {
            field: "abtest.traffic",
            reason: format!(
                "{} traffic models for {} campaigns",
                traffic.len(),
                campaigns.len()
            ),
        });
    }
    if !config.control_start_fraction.is_finite()
        || !(0.0..=1.0).contains(&config.control_start_fraction)
    {
        return Err(Error::InvalidSpec {
            field: "abtest.control_start_fraction",
            reason: format!("must lie in [0, 1], got {}", config.control_start_fraction),
        });
    }
    if config.days == 0 {
        return Err(Error::InvalidSpec {
            field: "abtest.days",
            reason: "needs at least one day".into(),
        });
    }
    if let TreatmentMode::TraditionalFf { start_fraction } = config.treatment {
        if !start_fraction.is_finite() || !(0.0..=1.0).contains(&start_fraction) {
            return Err(Error::InvalidSpec {
                field: "abtest.treatment.start_fraction",
                reason: format!("must lie in [0, 1], got {start_fraction}"),
            });
        }
    }

    let mut rows = Vec::with_capacity(campaigns.len());
    for ((spec, history), model) in campaigns.iter().zip(histories).zip(traffic) {
        let row = run_campaign(spec, history, params, config, model, seed)
            .map_err(|e| annotate(e, spec.id))?;
        rows.push(row);
    }

    let n = rows.len() as f64;
    let mean_delta_live_hours = rows.iter().map(|r| r.delta_live_hours).sum::<f64>() / n;
    let mean_delta_overdelivery = rows.iter().map(|r| r.delta_overdelivery).sum::<f64>() / n;
    let control_group: Vec<CampaignMetrics> = rows.iter().map(|r| r.control.metrics).collect();
    let treatment_group: Vec<CampaignMetrics> = rows.iter().map(|r| r.treatment.metrics).collect();
    Ok(AbResult {
        control_summary: summarize(&control_group)?,
        treatment_summary: summarize(&treatment_group)?,
        rows,
        mean_delta_live_hours,
        mean_delta_overdelivery,
    })
}

fn annotate(e: Error, campaign_id: u64) -> Error {
    match e {
        Error::InvalidSpec { field, reason } => Error::InvalidSpec {
            field,
            reason: format!("campaign {campaign_id}: {reason}"),
        },
        other => other,
    }
}

fn run_campaign(
    spec: &CampaignSpec,
    history: &CampaignHistory,
    params: &SffParams,
    config: &BudgetSplitConfig,
    traffic: &TrafficModel,
    master_seed: u64,
) -> Result<AbRow, Error> {
    let campaign_seed = derive_seed(master_seed, spec.id);
    traffic.validate()?;

    // Halve the budget; the floor half goes to treatment, the remainder
    // (any odd unit) to control.
    let treatment_goal = spec.daily_goal / 2;
    let control_goal = spec.daily_goal - treatment_goal;
    let treatment_cap = spec.billing_cap / 2;
    let control_cap = spec.billing_cap - treatment_cap;
    let control_spec = CampaignSpec {
        daily_goal: control_goal,
        billing_cap: control_cap,
        ..spec.clone()
    };
    let treatment_spec = CampaignSpec {
        daily_goal: treatment_goal,
        billing_cap: treatment_cap,
        ..spec.clone()
    };

    // Materialize the shared request stream day by day and deal it out by
    // alternating global request index: even indices to control.
    let win_p = traffic.win_probability();
    let mut parity: u64 = 0;
    let mut control_traffic = Vec::with_capacity(config.days as usize);
    let mut treatment_traffic = Vec::with_capacity(config.days as usize);
    for d in 0..config.days {
        let mut streams = DayStreams::new(campaign_seed.wrapping_add(d as u64));
        let mut control_counts = Vec::with_capacity(spec.targeting_span() as usize);
        let mut treatment_counts = Vec::with_capacity(spec.targeting_span() as usize);
        for minute in spec.targeting_start..spec.targeting_end {
            let c = requests_at(traffic, minute, &mut streams.traffic) as u64;
            let evens = if parity % 2 == 0 { c.div_ceil(2) } else { c / 2 };
            control_counts.push(evens as u32);
            treatment_counts.push((c - evens) as u32);
            parity += c;
        }
        control_traffic.push(TrafficModel::from_counts(
            spec.targeting_start,
            &control_counts,
            win_p,
        ));
        treatment_traffic.push(TrafficModel::from_counts(
            spec.targeting_start,
            &treatment_counts,
            win_p,
        ));
    }

    let control = run_arm(
        &control_spec,
        params,
        history,
        ArmMode::Static(config.control_start_fraction),
        &control_traffic,
        campaign_seed,
        config,
    )?;
    let treatment_mode = match config.treatment {
        TreatmentMode::Sff => ArmMode::Dynamic,
        TreatmentMode::TraditionalFf { start_fraction } => ArmMode::Static(start_fraction),
    };
    let treatment = run_arm(
        &treatment_spec,
        params,
        history,
        treatment_mode,
        &treatment_traffic,
        campaign_seed,
        config,
    )?;

    Ok(AbRow {
        campaign_id: spec.id,
        delta_live_hours: treatment.metrics.live_hours - control.metrics.live_hours,
        delta_overdelivery: treatment.metrics.overdelivery_rate
            - control.metrics.overdelivery_rate,
        control,
        treatment,
    })
}

/// Runs one arm over its day-by-day traffic. Both arms use the same seed
/// sequence: identical substreams, paired draws.
fn run_arm(
    spec: &CampaignSpec,
    params: &SffParams,
    initial_history: &CampaignHistory,
    mode: ArmMode,
    traffic_by_day: &[TrafficModel],
    campaign_seed: u64,
    config: &BudgetSplitConfig,
) -> Result<ArmOutcome, Error> {
    crate::model::validate_campaign(spec)?;
    params.validate()?;
    params.validate_window_fit(spec.targeting_span())?;
    let options = &config.options;
    let mut history = initial_history.clone();
    let mut carry: Vec<PendingFee> = Vec::new();
    let mut day_results: Vec<SimulationResult> = Vec::new();
    let mut last_fraction = 0.0;

    for (d, day_traffic) in traffic_by_day.iter().enumerate() {
        let today = Day(options.as_of_day.0 + d as i64);
        let (fraction, window_len) = match mode {
            ArmMode::Static(f) => {
                if !f.is_finite() || !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidSpec {
                        field: "abtest.control_start_fraction",
                        reason: format!("must lie in [0, 1], got {f}"),
                    });
                }
                (f, 0)
            }
            ArmMode::Dynamic => {
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
                let adopted = if options.monotone_rule {
                    update_start_fraction(&mut history, candidate, today, params)
                } else {
                    history.current_start_fraction = Some(candidate);
                    candidate
                };
                (adopted, params.transition_window_minutes)
            }
        };
        let result = run_day(
            spec,
            fraction,
            window_len,
            matches!(mode, ArmMode::Dynamic),
            day_traffic,
            campaign_seed.wrapping_add(d as u64),
            options,
            &carry,
        );
        carry = result.carryover.clone();
        history.record(DailyOutcome {
            day: today,
            recognized_spend: result.final_ledger.recognized_spend,
            daily_goal: spec.daily_goal,
        });
        last_fraction = fraction;
        day_results.push(result);
    }

    let per_day: Vec<CampaignMetrics> = day_results
        .iter()
        .map(|r| campaign_metrics(r, spec))
        .collect();
    let n = per_day.len() as f64;
    let metrics = CampaignMetrics {
        live_hours: per_day.iter().map(|m| m.live_hours).sum::<f64>() / n,
        overdelivery_rate: per_day.iter().map(|m| m.overdelivery_rate).sum::<f64>() / n,
        total_spend: per_day.iter().map(|m| m.total_spend).sum(),
        goal_hit: per_day.iter().all(|m| m.goal_hit),
    };
    Ok(ArmOutcome {
        daily_goal: spec.daily_goal,
        billing_cap: spec.billing_cap,
        metrics,
        start_fraction: last_fraction,
    })
}
