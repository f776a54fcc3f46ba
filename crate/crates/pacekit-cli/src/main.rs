//! Scenario runner for the pacing simulator.
//!
//! Three commands share one scenario file format: `simulate` runs a single
//! campaign (one day or a closed loop), `abtest` runs the budget-split
//! experiment over a synthetic campaign population, and `sweep` re-runs the
//! scenario across a parameter grid. All outputs are deterministic functions
//! of (scenario, overrides, seed); rerunning a command never changes a byte.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O), 2 configuration error.

mod output;
mod scenario;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pacekit::{
    campaign_metrics, run_budget_split, simulate_closed_loop_with, simulate_day_with,
    BudgetSplitConfig, PacingMode, TreatmentMode,
};
use scenario::{ConfigError, ResolvedScenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pacekit", version, about = "Budget pacing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign: a single day, or a closed loop with --days > 1.
    Simulate(RunArgs),
    /// Run the budget-split experiment on a synthetic campaign population.
    Abtest(RunArgs),
    /// Re-run the scenario across the parameter grid in [sweep].
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Master seed; overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to $PACEKIT_OUT_DIR, then the
    /// scenario's [output] dir, then the current directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Pacing mode: sff, fast_finish, or asap.
    #[arg(long)]
    mode: Option<String>,
    /// Days to simulate; more than one runs the closed loop.
    #[arg(long)]
    days: Option<u32>,
    /// Override any scenario key, e.g. --set campaign.daily_goal_micros=2000000000.
    /// Repeatable; applied in order after the file is read.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    /// Folds the convenience flags into the same override path as --set so
    /// that flags and overrides cannot disagree.
    fn all_overrides(&self) -> Vec<String> {
        let mut out = self.set.clone();
        if let Some(seed) = self.seed {
            out.push(format!("seed={seed}"));
        }
        if let Some(mode) = &self.mode {
            out.push(format!("mode=\"{mode}\""));
        }
        if let Some(days) = self.days {
            out.push(format!("days={days}"));
        }
        out
    }

    fn out_dir(&self, resolved: Option<&str>) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var("PACEKIT_OUT_DIR") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        resolved.map(PathBuf::from).unwrap_or_else(|| ".".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Abtest(args) => cmd_abtest(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() || e.is::<pacekit::Error>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load(args: &RunArgs, need_campaign: bool) -> Result<ResolvedScenario> {
    let file = scenario::load_scenario(&args.scenario, &args.all_overrides())?;
    Ok(file.resolve(need_campaign)?)
}

fn prepare_out_dir(args: &RunArgs, s: &ResolvedScenario) -> Result<PathBuf> {
    let dir = args.out_dir(s.output_dir.as_deref());
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn cmd_simulate(args: &RunArgs) -> Result<()> {
    let s = load(args, true)?;
    let dir = prepare_out_dir(args, &s)?;
    if s.days == 1 {
        let result = simulate_day_with(
            &s.campaign,
            &s.params,
            &s.history,
            s.mode,
            &s.traffic,
            s.seed,
            &s.options,
        )?;
        output::write_spend_curve(&dir.join("spend_curve.csv"), &s.campaign, &result)?;
        let metrics =
            output::single_day_metrics(&s.campaign, &result, &s.mode, s.seed, s.live_hours_basis);
        output::write_json(&dir.join("metrics.json"), &metrics)?;
        println!("wrote {}", dir.join("spend_curve.csv").display());
        println!("wrote {}", dir.join("metrics.json").display());
        return Ok(());
    }
    if s.mode != PacingMode::Sff {
        return Err(ConfigError(
            "days: a closed loop recomputes the dynamic start daily, so it needs mode = \"sff\""
                .into(),
        )
        .into());
    }
    let days = simulate_closed_loop_with(
        &s.campaign,
        &s.params,
        &s.history,
        s.days,
        &s.traffic,
        s.seed,
        &s.options,
    )?;
    let group: Vec<_> = days
        .iter()
        .map(|d| campaign_metrics(&d.result, &s.campaign))
        .collect();
    let summary = pacekit::summarize(&group)?;
    let last = days.last().expect("days >= 1");
    output::write_spend_curve(&dir.join("spend_curve.csv"), &s.campaign, &last.result)?;
    output::write_closed_loop(
        &dir.join("closed_loop.csv"),
        &s.campaign,
        &days,
        s.live_hours_basis,
    )?;
    let metrics = output::closed_loop_metrics(&s.campaign, &days, &summary, &s.mode, s.seed);
    output::write_json(&dir.join("metrics.json"), &metrics)?;
    println!("wrote {}", dir.join("spend_curve.csv").display());
    println!("wrote {}", dir.join("closed_loop.csv").display());
    println!("wrote {}", dir.join("metrics.json").display());
    Ok(())
}

fn cmd_abtest(args: &RunArgs) -> Result<()> {
    let s = load(args, false)?;
    let dir = prepare_out_dir(args, &s)?;
    let n = s.abtest.synthetic_campaigns.unwrap_or(28);
    if n == 0 {
        return Err(ConfigError("abtest.synthetic_campaigns: must be >= 1".into()).into());
    }
    let set = pacekit::synthetic_campaign_set(n);
    let campaigns: Vec<_> = set.iter().map(|(c, _, _)| c.clone()).collect();
    let histories: Vec<_> = set.iter().map(|(_, h, _)| h.clone()).collect();
    let traffic: Vec<_> = set.iter().map(|(_, _, t)| t.clone()).collect();
    let control_start = s
        .abtest
        .control_start_fraction
        .unwrap_or_else(pacekit::default_control_start);
    let treatment = match s.abtest.treatment.as_deref().unwrap_or("sff") {
        "sff" => TreatmentMode::Sff,
        "fast_finish" => TreatmentMode::TraditionalFf {
            start_fraction: control_start,
        },
        other => {
            return Err(ConfigError(format!(
                "abtest.treatment: expected sff or fast_finish, got {other:?}"
            ))
            .into())
        }
    };
    let config = BudgetSplitConfig {
        control_start_fraction: control_start,
        treatment,
        days: s.abtest.days.unwrap_or(1),
        options: s.options.clone(),
    };
    let result = run_budget_split(&campaigns, &histories, &s.params, &config, &traffic, s.seed)?;

    let rows: Vec<output::AbCsvRow> = result
        .rows
        .iter()
        .map(|r| output::AbCsvRow {
            campaign_id: r.campaign_id,
            control_live_hours: r.control.metrics.live_hours,
            control_overdelivery_rate: r.control.metrics.overdelivery_rate,
            control_spend_micros: r.control.metrics.total_spend,
            control_start_fraction: r.control.start_fraction,
            treatment_live_hours: r.treatment.metrics.live_hours,
            treatment_overdelivery_rate: r.treatment.metrics.overdelivery_rate,
            treatment_spend_micros: r.treatment.metrics.total_spend,
            treatment_start_fraction: r.treatment.start_fraction,
            delta_live_hours: r.delta_live_hours,
            delta_overdelivery: r.delta_overdelivery,
        })
        .collect();
    output::write_abtest_csv(&dir.join("abtest.csv"), &rows)?;

    let summary = serde_json::json!({
        "currency_scale": pacekit::MONEY_SCALE,
        "campaigns": n,
        "days": config.days,
        "seed": s.seed,
        "control_start_fraction": config.control_start_fraction,
        "mean_delta_live_hours": result.mean_delta_live_hours,
        "mean_delta_overdelivery": result.mean_delta_overdelivery,
        "control": result.control_summary,
        "treatment": result.treatment_summary,
    });
    output::write_json(&dir.join("summary.json"), &summary)?;
    println!("wrote {}", dir.join("abtest.csv").display());
    println!("wrote {}", dir.join("summary.json").display());
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<()> {
    let s = load(args, true)?;
    let dir = prepare_out_dir(args, &s)?;
    let Some(sweep) = &s.sweep else {
        return Err(ConfigError("sweep: table is required for this command".into()).into());
    };
    let grid = scenario::expand_grid(sweep, &s.params, &s.campaign)?;
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let params = point.to_params(&s.params);
        // Same seed at every point: paired draws isolate the parameter
        // effect from traffic noise.
        let result = simulate_day_with(
            &s.campaign,
            &params,
            &s.history,
            s.mode,
            &s.traffic,
            s.seed,
            &s.options,
        )?;
        rows.push(output::SweepCsvRow {
            min_overspend_ratio: point.min_overspend_ratio,
            max_overspend_ratio: point.max_overspend_ratio,
            min_start_fraction: point.min_start_fraction,
            max_start_fraction: point.max_start_fraction,
            transition_window_minutes: point.transition_window_minutes,
            start_fraction: result.start_fraction,
            start_minute: result.start_minute,
            live_hours: pacekit::live_hours_with_basis(&result, &s.campaign, s.live_hours_basis),
            overdelivery_rate: pacekit::overdelivery_rate(&result, &s.campaign),
            recognized_spend_micros: result.final_ledger.recognized_spend,
            goal_hit_minute: result.goal_hit_minute,
        });
    }
    output::write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(())
}
