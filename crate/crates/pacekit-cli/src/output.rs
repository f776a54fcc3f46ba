//! Deterministic output files.
//!
//! Every writer produces bytes that are a pure function of its inputs: JSON
//! objects serialize with sorted keys, floats render in shortest-roundtrip
//! form, and files land via write-to-temp-then-rename so a crash never
//! leaves a half-written artifact behind.

use anyhow::{Context, Result};
use pacekit::{
    CampaignSpec, ClosedLoopDay, LiveHoursBasis, MetricsSummary, SimulationResult, MONEY_SCALE,
};
use serde::Serialize;
use std::path::Path;

/// Writes `bytes` to `path` atomically: the content goes to a sibling temp
/// file which is then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

/// Serializes a JSON value with sorted keys, pretty-printed, trailing
/// newline. serde_json maps are B-tree backed, so key order is canonical.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Minute-by-minute spend curve. One row per targeting minute with the
/// recognized spend after that minute, plus a final `settled` row carrying
/// the post-settlement total.
pub fn write_spend_curve(
    path: &Path,
    spec: &CampaignSpec,
    result: &SimulationResult,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["minute", "recognized_spend_micros", "phase", "throttle_rate"])?;
    let span = spec.targeting_span() as usize;
    for i in 0..span {
        w.write_record([
            (spec.targeting_start + i as u32).to_string(),
            result.spend_curve[i].to_string(),
            result.phase_trace[i].as_str().to_string(),
            result.throttle_trace[i].to_string(),
        ])?;
    }
    w.write_record([
        spec.targeting_end.to_string(),
        result.spend_curve[span].to_string(),
        "settled".to_string(),
        String::new(),
    ])?;
    atomic_write(path, &w.into_inner()?)
}

/// Single-day metrics document.
pub fn single_day_metrics(
    spec: &CampaignSpec,
    result: &SimulationResult,
    mode: &pacekit::PacingMode,
    seed: u64,
    basis: LiveHoursBasis,
) -> serde_json::Value {
    let ledger = &result.final_ledger;
    serde_json::json!({
        "currency_scale": MONEY_SCALE,
        "days": 1,
        "seed": seed,
        "mode": mode,
        "campaign_id": spec.id,
        "start_fraction": result.start_fraction,
        "start_minute": result.start_minute,
        "window_end_minute": result.window_end_minute,
        "goal_hit_minute": result.goal_hit_minute,
        "goal_hit": result.goal_hit_minute.is_some(),
        "live_hours": pacekit::live_hours_with_basis(result, spec, basis),
        "overdelivery_rate": pacekit::overdelivery_rate(result, spec),
        "recognized_spend_micros": ledger.recognized_spend,
        "overdelivery_spend_micros": ledger.overdelivery_spend,
        "dropped_spend_micros": ledger.dropped_spend,
        "carryover_fees": result.carryover.len(),
    })
}

/// Closed-loop metrics document: a cross-day summary plus the final state.
pub fn closed_loop_metrics(
    spec: &CampaignSpec,
    days: &[ClosedLoopDay],
    summary: &MetricsSummary,
    mode: &pacekit::PacingMode,
    seed: u64,
) -> serde_json::Value {
    let last = days.last().expect("closed loop yields at least one day");
    let total: i64 = days
        .iter()
        .map(|d| d.result.final_ledger.recognized_spend)
        .sum();
    serde_json::json!({
        "currency_scale": MONEY_SCALE,
        "days": days.len(),
        "seed": seed,
        "mode": mode,
        "campaign_id": spec.id,
        "summary": summary,
        "final_start_fraction": last.start_fraction,
        "total_recognized_spend_micros": total,
    })
}

/// Per-day closed-loop trace.
pub fn write_closed_loop(
    path: &Path,
    spec: &CampaignSpec,
    days: &[ClosedLoopDay],
    basis: LiveHoursBasis,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "day",
        "start_fraction",
        "refreshed",
        "live_hours",
        "overdelivery_rate",
        "recognized_spend_micros",
        "goal_hit_minute",
    ])?;
    for d in days {
        w.write_record([
            d.day.0.to_string(),
            d.start_fraction.to_string(),
            d.refreshed.to_string(),
            pacekit::live_hours_with_basis(&d.result, spec, basis).to_string(),
            pacekit::overdelivery_rate(&d.result, spec).to_string(),
            d.result.final_ledger.recognized_spend.to_string(),
            d.result
                .goal_hit_minute
                .map(|m| m.to_string())
                .unwrap_or_default(),
        ])?;
    }
    atomic_write(path, &w.into_inner()?)
}

/// One abtest.csv row, flattened from a paired experiment row.
#[derive(Serialize)]
pub struct AbCsvRow {
    pub campaign_id: u64,
    pub control_live_hours: f64,
    pub control_overdelivery_rate: f64,
    pub control_spend_micros: i64,
    pub control_start_fraction: f64,
    pub treatment_live_hours: f64,
    pub treatment_overdelivery_rate: f64,
    pub treatment_spend_micros: i64,
    pub treatment_start_fraction: f64,
    pub delta_live_hours: f64,
    pub delta_overdelivery: f64,
}

pub fn write_abtest_csv(path: &Path, rows: &[AbCsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    atomic_write(path, &w.into_inner()?)
}

/// One sweep.csv row: the grid point plus the metrics it produced.
#[derive(Serialize)]
pub struct SweepCsvRow {
    pub min_overspend_ratio: f64,
    pub max_overspend_ratio: f64,
    pub min_start_fraction: f64,
    pub max_start_fraction: f64,
    pub transition_window_minutes: u32,
    pub start_fraction: f64,
    pub start_minute: u32,
    pub live_hours: f64,
    pub overdelivery_rate: f64,
    pub recognized_spend_micros: i64,
    pub goal_hit_minute: Option<u32>,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepCsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    atomic_write(path, &w.into_inner()?)
}
