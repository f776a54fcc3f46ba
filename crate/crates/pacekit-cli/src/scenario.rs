//! Scenario file schema and loading.
//!
//! A scenario is a TOML document carrying everything one run needs: the
//! campaign, curve parameters, spend history, traffic model, simulation
//! options, and per-command sections. Every field a table does not set
//! falls back to the library default, so a minimal file is a campaign
//! plus a history. Money fields are micro-units, spelled out in the key
//! names so golden files and hand-edited configs cannot confuse units.

use pacekit::{
    default_control_start, history_from_ratios, validate_campaign, CampaignHistory, CampaignSpec,
    DailyOutcome, Day, DelayModel, LiveHoursBasis, PacingMode, RatioMethod, SettlementPolicy,
    SffParams, SimulationOptions, StartBasis, TrafficModel,
};
use serde::Deserialize;
use std::path::Path;

/// Configuration problem: bad file, bad field, bad override. Exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw scenario document. Unknown keys are rejected so typos surface as
/// config errors instead of silently falling back to defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// "sff" (default), "fast_finish", or "asap".
    pub mode: Option<String>,
    /// Days to simulate; more than one runs the closed loop.
    pub days: Option<u32>,
    /// Start fraction for mode = "fast_finish".
    pub static_start_fraction: Option<f64>,
    pub campaign: Option<CampaignTable>,
    pub sff: Option<SffTable>,
    pub history: Option<HistoryTable>,
    pub traffic: Option<TrafficModel>,
    pub options: Option<OptionsTable>,
    pub abtest: Option<AbTable>,
    pub sweep: Option<SweepTable>,
    pub output: Option<OutputTable>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignTable {
    pub id: Option<u64>,
    pub daily_goal_micros: Option<i64>,
    pub billing_cap_micros: Option<i64>,
    pub fee_per_click_micros: Option<i64>,
    pub targeting_start_minute: Option<u32>,
    pub targeting_end_minute: Option<u32>,
    pub conversion_rate: Option<f64>,
    pub delay: Option<DelayModel>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SffTable {
    pub min_overspend_ratio: Option<f64>,
    pub max_overspend_ratio: Option<f64>,
    pub min_start_fraction: Option<f64>,
    pub max_start_fraction: Option<f64>,
    pub transition_window_minutes: Option<u32>,
    pub refresh_period_days: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryTable {
    /// Shorthand: per-day spend/goal ratios against the campaign goal, most
    /// recent day last, filling days -n..-1.
    pub ratios: Option<Vec<f64>>,
    /// Explicit day records; wins over `ratios` if both are present.
    pub days: Option<Vec<HistoryDay>>,
    pub current_start_fraction: Option<f64>,
    pub last_refresh_day: Option<i64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryDay {
    pub day: i64,
    pub recognized_spend_micros: i64,
    pub goal_micros: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsTable {
    pub as_of_day: Option<i64>,
    pub lookback_days: Option<u32>,
    pub ratio_method: Option<RatioMethod>,
    pub start_basis: Option<StartBasis>,
    pub window_offset_minutes: Option<i32>,
    pub monotone_rule: Option<bool>,
    pub win_noise_half_width: Option<f64>,
    pub settlement: Option<SettlementPolicy>,
    pub live_hours_basis: Option<LiveHoursBasis>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbTable {
    /// Size of the generated campaign population.
    pub synthetic_campaigns: Option<usize>,
    pub control_start_fraction: Option<f64>,
    /// "sff" (default) or "fast_finish". The latter gives the treatment arm
    /// the same static policy as control, for a known-zero-delta baseline.
    pub treatment: Option<String>,
    pub days: Option<u32>,
}

/// Parameter grid: any axis left out is pinned to the [sff] value. The
/// grid is the cartesian product of the axes, swept in ascending order.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub min_overspend_ratio: Option<Vec<f64>>,
    pub max_overspend_ratio: Option<Vec<f64>>,
    pub min_start_fraction: Option<Vec<f64>>,
    pub max_start_fraction: Option<Vec<f64>>,
    pub transition_window_minutes: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTable {
    pub dir: Option<String>,
}

/// Everything a run needs, validated and in domain types.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub seed: u64,
    pub days: u32,
    pub mode: PacingMode,
    pub campaign: CampaignSpec,
    pub params: SffParams,
    pub history: CampaignHistory,
    pub traffic: TrafficModel,
    pub options: SimulationOptions,
    pub live_hours_basis: LiveHoursBasis,
    pub abtest: AbTable,
    pub sweep: Option<SweepTable>,
    pub output_dir: Option<String>,
}

/// Reads and parses the file, applies `--set` overrides onto the raw TOML
/// tree, and checks the schema version. Field problems come back with the
/// toml crate's line/column rendering.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<ScenarioFile, ConfigError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return config_err(format!("cannot read {}: {e}", path.display())),
    };
    let mut tree: toml::Table = match text.parse() {
        Ok(v) => v,
        Err(e) => return config_err(format!("{}: {e}", path.display())),
    };
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    let file: ScenarioFile = match toml::Value::Table(tree).try_into() {
        Ok(f) => f,
        Err(e) => return config_err(format!("{}: {e}", path.display())),
    };
    if file.schema_version != 1 {
        return config_err(format!(
            "schema_version: expected 1, got {}",
            file.schema_version
        ));
    }
    Ok(file)
}

/// Applies one `key.path=value` override. The value is parsed as TOML when
/// it reads as one (numbers, booleans, arrays) and taken as a string
/// otherwise, so `--set campaign.daily_goal_micros=2000000000` and
/// `--set mode=asap` both work.
fn apply_override(tree: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let Some((path, raw)) = spec.split_once('=') else {
        return config_err(format!("--set {spec}: expected key=value"));
    };
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut table = tree;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return config_err(format!("--set {spec}: empty key segment"));
        }
        if i + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        let node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match node.as_table_mut() {
            Some(t) => t,
            None => {
                return config_err(format!(
                    "--set {spec}: {} is not a table",
                    segments[..=i].join(".")
                ))
            }
        };
    }
    unreachable!("split('.') yields at least one segment");
}

impl ScenarioFile {
    /// Lowers the document into validated domain types. `need_campaign`
    /// is false for the abtest command, which generates its population.
    pub fn resolve(&self, need_campaign: bool) -> Result<ResolvedScenario, ConfigError> {
        let params = self.resolve_params()?;
        let campaign = if need_campaign {
            self.resolve_campaign(&params)?
        } else {
            // Placeholder the abtest path never reads.
            pacekit::default_campaign()
        };
        let history = self.resolve_history(&campaign)?;
        let options = self.resolve_options()?;
        let live_hours_basis = self
            .options
            .as_ref()
            .and_then(|o| o.live_hours_basis)
            .unwrap_or_default();
        let mode = self.resolve_mode()?;
        let days = self.days.unwrap_or(1);
        if days == 0 {
            return config_err("days: must be >= 1");
        }
        let traffic = match &self.traffic {
            Some(t) => {
                if let Err(e) = t.validate() {
                    return config_err(e.to_string());
                }
                t.clone()
            }
            None => pacekit::default_traffic(),
        };
        Ok(ResolvedScenario {
            seed: self.seed,
            days,
            mode,
            campaign,
            params,
            history,
            traffic,
            options,
            live_hours_basis,
            abtest: self.abtest.clone().unwrap_or(AbTable {
                synthetic_campaigns: None,
                control_start_fraction: None,
                treatment: None,
                days: None,
            }),
            sweep: self.sweep.clone(),
            output_dir: self.output.as_ref().and_then(|o| o.dir.clone()),
        })
    }

    fn resolve_mode(&self) -> Result<PacingMode, ConfigError> {
        match self.mode.as_deref().unwrap_or("sff") {
            "sff" => Ok(PacingMode::Sff),
            "asap" => Ok(PacingMode::Asap),
            "fast_finish" => Ok(PacingMode::TraditionalFf {
                start_fraction: self
                    .static_start_fraction
                    .unwrap_or_else(default_control_start),
            }),
            other => config_err(format!(
                "mode: expected sff, fast_finish, or asap, got {other:?}"
            )),
        }
    }

    fn resolve_params(&self) -> Result<SffParams, ConfigError> {
        let d = SffParams::default();
        let t = self.sff.clone().unwrap_or(SffTable {
            min_overspend_ratio: None,
            max_overspend_ratio: None,
            min_start_fraction: None,
            max_start_fraction: None,
            transition_window_minutes: None,
            refresh_period_days: None,
        });
        let params = SffParams {
            min_overspend_ratio: t.min_overspend_ratio.unwrap_or(d.min_overspend_ratio),
            max_overspend_ratio: t.max_overspend_ratio.unwrap_or(d.max_overspend_ratio),
            min_start_fraction: t.min_start_fraction.unwrap_or(d.min_start_fraction),
            max_start_fraction: t.max_start_fraction.unwrap_or(d.max_start_fraction),
            transition_window_minutes: t
                .transition_window_minutes
                .unwrap_or(d.transition_window_minutes),
            refresh_period_days: t.refresh_period_days.unwrap_or(d.refresh_period_days),
        };
        if let Err(e) = params.validate() {
            return config_err(e.to_string());
        }
        Ok(params)
    }

    fn resolve_campaign(&self, params: &SffParams) -> Result<CampaignSpec, ConfigError> {
        let Some(t) = &self.campaign else {
            return config_err("campaign: table is required for this command");
        };
        let Some(goal) = t.daily_goal_micros else {
            return config_err("campaign.daily_goal_micros: field is required");
        };
        let Some(fee) = t.fee_per_click_micros else {
            return config_err("campaign.fee_per_click_micros: field is required");
        };
        let Some(conversion_rate) = t.conversion_rate else {
            return config_err("campaign.conversion_rate: field is required");
        };
        let spec = CampaignSpec {
            id: t.id.unwrap_or(1),
            daily_goal: goal,
            billing_cap: t.billing_cap_micros.unwrap_or(goal * 5 / 4),
            fee_per_click: fee,
            targeting_start: t.targeting_start_minute.unwrap_or(0),
            targeting_end: t.targeting_end_minute.unwrap_or(pacekit::MINUTES_PER_DAY),
            conversion_rate,
            delay_model: t.delay.clone().unwrap_or(DelayModel::Immediate),
        };
        if let Err(e) = validate_campaign(&spec) {
            return config_err(e.to_string());
        }
        if let Err(e) = params.validate_window_fit(spec.targeting_span()) {
            return config_err(e.to_string());
        }
        Ok(spec)
    }

    fn resolve_history(&self, campaign: &CampaignSpec) -> Result<CampaignHistory, ConfigError> {
        let Some(t) = &self.history else {
            return Ok(CampaignHistory::new());
        };
        let mut history = if let Some(days) = &t.days {
            let outcomes = days
                .iter()
                .map(|d| DailyOutcome {
                    day: Day(d.day),
                    recognized_spend: d.recognized_spend_micros,
                    daily_goal: d.goal_micros,
                })
                .collect();
            CampaignHistory {
                outcomes,
                current_start_fraction: None,
                last_refresh_day: None,
            }
        } else if let Some(ratios) = &t.ratios {
            history_from_ratios(campaign.daily_goal, ratios)
        } else {
            CampaignHistory::new()
        };
        history.current_start_fraction = t.current_start_fraction;
        history.last_refresh_day = t.last_refresh_day.map(Day);
        if let Some(f) = t.current_start_fraction {
            if !f.is_finite() || !(0.0..=1.0).contains(&f) {
                return config_err(format!(
                    "history.current_start_fraction: must lie in [0, 1], got {f}"
                ));
            }
        }
        Ok(history)
    }

    fn resolve_options(&self) -> Result<SimulationOptions, ConfigError> {
        let d = SimulationOptions::default();
        let Some(t) = &self.options else {
            return Ok(d);
        };
        Ok(SimulationOptions {
            as_of_day: t.as_of_day.map(Day).unwrap_or(d.as_of_day),
            lookback_days: t.lookback_days.unwrap_or(d.lookback_days),
            ratio_method: t.ratio_method.unwrap_or(d.ratio_method),
            start_basis: t.start_basis.unwrap_or(d.start_basis),
            window_offset_minutes: t.window_offset_minutes.unwrap_or(d.window_offset_minutes),
            monotone_rule: t.monotone_rule.unwrap_or(d.monotone_rule),
            win_noise_half_width: t.win_noise_half_width.unwrap_or(d.win_noise_half_width),
            settlement: t.settlement.unwrap_or(d.settlement),
        })
    }
}

/// One point of the sweep grid, in axis order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub min_overspend_ratio: f64,
    pub max_overspend_ratio: f64,
    pub min_start_fraction: f64,
    pub max_start_fraction: f64,
    pub transition_window_minutes: u32,
}

impl GridPoint {
    pub fn to_params(self, base: &SffParams) -> SffParams {
        SffParams {
            min_overspend_ratio: self.min_overspend_ratio,
            max_overspend_ratio: self.max_overspend_ratio,
            min_start_fraction: self.min_start_fraction,
            max_start_fraction: self.max_start_fraction,
            transition_window_minutes: self.transition_window_minutes,
            refresh_period_days: base.refresh_period_days,
        }
    }
}

/// Expands the sweep table into the full grid, ordered lexicographically by
/// (min_or, max_or, min_start, max_start, window). Every point is validated
/// against the campaign before anything runs, so a sweep either runs whole
/// or not at all.
pub fn expand_grid(
    sweep: &SweepTable,
    base: &SffParams,
    campaign: &CampaignSpec,
) -> Result<Vec<GridPoint>, ConfigError> {
    fn axis_f64(values: &Option<Vec<f64>>, base: f64, name: &str) -> Result<Vec<f64>, ConfigError> {
        let mut v = values.clone().unwrap_or_else(|| vec![base]);
        if v.is_empty() {
            return config_err(format!("sweep.{name}: axis must not be empty"));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
    let min_or = axis_f64(&sweep.min_overspend_ratio, base.min_overspend_ratio, "min_overspend_ratio")?;
    let max_or = axis_f64(&sweep.max_overspend_ratio, base.max_overspend_ratio, "max_overspend_ratio")?;
    let min_start = axis_f64(&sweep.min_start_fraction, base.min_start_fraction, "min_start_fraction")?;
    let max_start = axis_f64(&sweep.max_start_fraction, base.max_start_fraction, "max_start_fraction")?;
    let mut windows = sweep
        .transition_window_minutes
        .clone()
        .unwrap_or_else(|| vec![base.transition_window_minutes]);
    if windows.is_empty() {
        return config_err("sweep.transition_window_minutes: axis must not be empty");
    }
    windows.sort_unstable();

    let mut grid = Vec::new();
    for &a in &min_or {
        for &b in &max_or {
            for &c in &min_start {
                for &d in &max_start {
                    for &w in &windows {
                        let point = GridPoint {
                            min_overspend_ratio: a,
                            max_overspend_ratio: b,
                            min_start_fraction: c,
                            max_start_fraction: d,
                            transition_window_minutes: w,
                        };
                        let params = point.to_params(base);
                        if let Err(e) = params.validate() {
                            return config_err(format!(
                                "sweep point (min_or {a}, max_or {b}, min_start {c}, max_start {d}, window {w}): {e}"
                            ));
                        }
                        if let Err(e) = params.validate_window_fit(campaign.targeting_span()) {
                            return config_err(format!(
                                "sweep point (min_or {a}, max_or {b}, min_start {c}, max_start {d}, window {w}): {e}"
                            ));
                        }
                        grid.push(point);
                    }
                }
            }
        }
    }
    Ok(grid)
}
