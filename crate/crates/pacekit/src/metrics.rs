//! Evaluation quantities: campaign live hours, overdelivery rate, and
//! group summaries.

use serde::{Deserialize, Serialize};

use crate::model::{CampaignSpec, Money};
use crate::sim::SimulationResult;
use crate::Error;

/// Per-campaign-day evaluation numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    /// Hours of serving before the goal was hit (full span if never hit).
    pub live_hours: f64,
    /// Recognized spend beyond the goal, as a fraction of the goal.
    pub overdelivery_rate: f64,
    pub total_spend: Money,
    pub goal_hit: bool,
}

/// Where the live-hours clock starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiveHoursBasis {
    /// From the first targeted minute (default): hours of actual serving.
    #[default]
    TargetingStart,
    /// From midnight: wall-clock hours.
    Midnight,
}

/// Hours the campaign served before hitting its goal, measured from the
/// start of the targeting window. A campaign that never hits the goal is
/// live for the whole window.
pub fn live_hours(result: &SimulationResult, spec: &CampaignSpec) -> f64 {
    live_hours_with_basis(result, spec, LiveHoursBasis::TargetingStart)
}

pub fn live_hours_with_basis(
    result: &SimulationResult,
    spec: &CampaignSpec,
    basis: LiveHoursBasis,
) -> f64 {
    let origin = match basis {
        LiveHoursBasis::TargetingStart => spec.targeting_start,
        LiveHoursBasis::Midnight => 0,
    };
    let until = result.goal_hit_minute.unwrap_or(spec.targeting_end);
    (until.max(origin) - origin) as f64 / 60.0
}

/// Spend beyond the goal as a fraction of the goal, floored at zero.
/// Computed from the integer ledger, so the value is exact.
pub fn overdelivery_rate(result: &SimulationResult, spec: &CampaignSpec) -> f64 {
    result.final_ledger.overdelivery_spend as f64 / spec.daily_goal as f64
}

/// Bundles the per-day quantities for one result.
pub fn campaign_metrics(result: &SimulationResult, spec: &CampaignSpec) -> CampaignMetrics {
    CampaignMetrics {
        live_hours: live_hours(result, spec),
        overdelivery_rate: overdelivery_rate(result, spec),
        total_spend: result.final_ledger.recognized_spend,
        goal_hit: result.goal_hit_minute.is_some(),
    }
}

/// Fixed-edge histogram layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub lo: f64,
    pub hi: f64,
    pub buckets: usize,
}

impl HistogramConfig {
    /// Live hours over a full day.
    pub fn live_hours_default() -> Self {
        HistogramConfig {
            lo: 0.0,
            hi: 24.0,
            buckets: 12,
        }
    }

    /// Overdelivery rates up to 50%.
    pub fn overdelivery_default() -> Self {
        HistogramConfig {
            lo: 0.0,
            hi: 0.5,
            buckets: 10,
        }
    }
}

/// One histogram bucket, half-open `[lo, hi)`; out-of-range values are
/// clamped into the end buckets so bucket counts always sum to the group
/// size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub lo: f64,
    pub hi: f64,
    pub count: u32,
}

/// Order-independent summary of a metrics group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub count: usize,
    pub mean_live_hours: f64,
    pub median_live_hours: f64,
    pub mean_overdelivery_rate: f64,
    pub median_overdelivery_rate: f64,
    pub goal_hit_fraction: f64,
    pub live_hours_histogram: Vec<HistogramBucket>,
    pub overdelivery_histogram: Vec<HistogramBucket>,
}

/// Summarizes a group with the default histogram layouts.
pub fn summarize(group: &[CampaignMetrics]) -> Result<MetricsSummary, Error> {
    summarize_with(
        group,
        HistogramConfig::live_hours_default(),
        HistogramConfig::overdelivery_default(),
    )
}

pub fn summarize_with(
    group: &[CampaignMetrics],
    live_hours_cfg: HistogramConfig,
    overdelivery_cfg: HistogramConfig,
) -> Result<MetricsSummary, Error> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let live: Vec<f64> = group.iter().map(|m| m.live_hours).collect();
    let od: Vec<f64> = group.iter().map(|m| m.overdelivery_rate).collect();
    let hits = group.iter().filter(|m| m.goal_hit).count();
    Ok(MetricsSummary {
        count: group.len(),
        mean_live_hours: mean(&live),
        median_live_hours: median(&live),
        mean_overdelivery_rate: mean(&od),
        median_overdelivery_rate: median(&od),
        goal_hit_fraction: hits as f64 / group.len() as f64,
        live_hours_histogram: histogram(&live, live_hours_cfg),
        overdelivery_histogram: histogram(&od, overdelivery_cfg),
    })
}

fn mean(values: &[f64]) -> f64 {
    // Sum in sorted order so the result is a pure function of the multiset,
    // not of row order; summaries feed byte-compared output files.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn histogram(values: &[f64], cfg: HistogramConfig) -> Vec<HistogramBucket> {
    let width = (cfg.hi - cfg.lo) / cfg.buckets as f64;
    let mut buckets: Vec<HistogramBucket> = (0..cfg.buckets)
        .map(|i| HistogramBucket {
            lo: cfg.lo + i as f64 * width,
            hi: cfg.lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for v in values {
        let idx = ((v - cfg.lo) / width).floor() as i64;
        let idx = idx.clamp(0, cfg.buckets as i64 - 1) as usize;
        buckets[idx].count += 1;
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::sim::{simulate_day, PacingMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_result() -> (SimulationResult, CampaignSpec) {
        let spec = presets::default_campaign();
        let params = presets::default_params();
        let history = presets::default_history();
        let traffic = presets::default_traffic();
        let r = simulate_day(&spec, &params, &history, PacingMode::Sff, &traffic, 5).unwrap();
        (r, spec)
    }

    fn metric(live: f64, od: f64) -> CampaignMetrics {
        CampaignMetrics {
            live_hours: live,
            overdelivery_rate: od,
            total_spend: 0,
            goal_hit: true,
        }
    }

    #[test]
    fn live_hours_from_goal_hit_minute() {
        let (mut r, mut spec) = sample_result();
        spec.targeting_start = 0;
        spec.targeting_end = 1440;
        r.goal_hit_minute = Some(1230);
        assert!((live_hours(&r, &spec) - 20.5).abs() < 1e-12);
    }

    #[test]
    fn live_hours_caps_at_full_span_when_goal_unmet() {
        let (mut r, spec) = sample_result();
        r.goal_hit_minute = None;
        assert!((live_hours(&r, &spec) - spec.targeting_span() as f64 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn midnight_basis_counts_from_day_start() {
        let (mut r, spec) = sample_result();
        r.goal_hit_minute = Some(600);
        let from_start = live_hours(&r, &spec);
        let from_midnight = live_hours_with_basis(&r, &spec, LiveHoursBasis::Midnight);
        assert!((from_midnight - 10.0).abs() < 1e-12);
        assert!((from_start - (600 - 480) as f64 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn overdelivery_examples() {
        let (mut r, mut spec) = sample_result();
        spec.daily_goal = 100;
        r.final_ledger = crate::model::BillingLedger::new(100, 200);
        r.final_ledger.schedule(0, 110);
        r.final_ledger.settle_all();
        assert!((overdelivery_rate(&r, &spec) - 0.10).abs() < 1e-12);

        r.final_ledger = crate::model::BillingLedger::new(100, 200);
        r.final_ledger.schedule(0, 95);
        r.final_ledger.settle_all();
        assert_eq!(overdelivery_rate(&r, &spec), 0.0);

        r.final_ledger = crate::model::BillingLedger::new(100, 120);
        r.final_ledger.schedule(0, 500);
        r.final_ledger.settle_all();
        assert!((overdelivery_rate(&r, &spec) - 0.20).abs() < 1e-12);
    }

    #[test]
    fn overdelivery_rate_matches_ledger_identity() {
        let (r, spec) = sample_result();
        let expected = r.final_ledger.overdelivery_spend as f64 / spec.daily_goal as f64;
        assert_eq!(overdelivery_rate(&r, &spec), expected);
        let via_spend =
            (r.final_ledger.recognized_spend as f64 / spec.daily_goal as f64 - 1.0).max(0.0);
        assert!((overdelivery_rate(&r, &spec) - via_spend).abs() < 1e-12);
    }

    #[test]
    fn single_metric_summary_is_that_metric() {
        let m = metric(12.5, 0.07);
        let s = summarize(&[m]).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.mean_live_hours, 12.5);
        assert_eq!(s.median_live_hours, 12.5);
        assert_eq!(s.mean_overdelivery_rate, 0.07);
        assert_eq!(s.median_overdelivery_rate, 0.07);
    }

    #[test]
    fn two_metric_mean() {
        let s = summarize(&[metric(10.0, 0.0), metric(20.0, 0.1)]).unwrap();
        assert!((s.mean_overdelivery_rate - 0.05).abs() < 1e-12);
        assert!((s.mean_live_hours - 15.0).abs() < 1e-12);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyGroup)));
    }

    #[test]
    fn summary_is_permutation_invariant() {
        let mut group: Vec<CampaignMetrics> = (0..10)
            .map(|i| metric(i as f64, i as f64 / 100.0))
            .collect();
        let a = summarize(&group).unwrap();
        group.reverse();
        group.swap(2, 7);
        let b = summarize(&group).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_group_mean_matches_distribution() {
        // 1000 live-hours draws uniform in [8, 16): mean 12, sigma of the
        // sample mean = (8 / sqrt(12)) / sqrt(1000) = 0.073, 3 sigma = 0.22.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let group: Vec<CampaignMetrics> = (0..1000)
            .map(|_| metric(rng.random_range(8.0..16.0), 0.0))
            .collect();
        let replay_mean =
            group.iter().map(|m| m.live_hours).sum::<f64>() / group.len() as f64;
        let s = summarize(&group).unwrap();
        assert!((s.mean_live_hours - replay_mean).abs() < 1e-9);
        assert!((s.mean_live_hours - 12.0).abs() < 0.22);
    }

    #[test]
    fn histogram_counts_cover_the_group() {
        let group: Vec<CampaignMetrics> = vec![
            metric(-5.0, 0.0), // clamps into the first bucket
            metric(3.0, 0.02),
            metric(23.9, 0.49),
            metric(99.0, 2.0), // clamps into the last bucket
        ];
        let s = summarize(&group).unwrap();
        let live_total: u32 = s.live_hours_histogram.iter().map(|b| b.count).sum();
        let od_total: u32 = s.overdelivery_histogram.iter().map(|b| b.count).sum();
        assert_eq!(live_total, 4);
        assert_eq!(od_total, 4);
        // -5 clamps into the first bucket; 3.0 lands in [2, 4).
        assert_eq!(s.live_hours_histogram[0].count, 1);
        assert_eq!(s.live_hours_histogram[1].count, 1);
        // 23.9 is in range; 99 clamps into the last bucket.
        assert_eq!(s.live_hours_histogram.last().unwrap().count, 2);
    }

    #[test]
    fn even_group_median_averages_middle_pair() {
        let s = summarize(&[
            metric(1.0, 0.0),
            metric(2.0, 0.0),
            metric(10.0, 0.0),
            metric(20.0, 0.0),
        ])
        .unwrap();
        assert!((s.median_live_hours - 6.0).abs() < 1e-12);
    }
}
