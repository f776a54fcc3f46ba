//! Delayed billing attribution.
//!
//! A click is free at click time; the fee bills when (and if) the click
//! converts, possibly long after the campaign stopped serving. Fees landing
//! after the daily goal was recognized are the overdelivery this whole
//! engine exists to contain, and the billing cap is the hard backstop.

use crate::model::{BillingLedger, CampaignSpec, DelayModel, Minute, Money};

/// An admitted auction win and its (possible) conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickEvent {
    pub minute: Minute,
    pub fee: Money,
    pub converts: bool,
    /// Present iff `converts`; never earlier than the click itself.
    pub conversion_minute: Option<Minute>,
}

/// Draws a conversion outcome for a click at `click_minute`.
///
/// `u_convert` decides conversion against the campaign's conversion rate;
/// `u_delay` feeds the inverse-transform sample of the delay distribution.
/// Both draws are consumed by every call so that callers can keep their
/// random streams positionally aligned across runs.
pub fn schedule_click(
    click_minute: Minute,
    spec: &CampaignSpec,
    u_convert: f64,
    u_delay: f64,
) -> ClickEvent {
    let converts = u_convert < spec.conversion_rate;
    let conversion_minute = if converts {
        Some(click_minute + sample_delay(&spec.delay_model, u_delay))
    } else {
        None
    };
    ClickEvent {
        minute: click_minute,
        fee: spec.fee_per_click,
        converts,
        conversion_minute,
    }
}

/// Inverse-transform sample of a delay distribution, in whole minutes.
pub fn sample_delay(model: &DelayModel, u: f64) -> Minute {
    match model {
        DelayModel::Immediate => 0,
        DelayModel::Exponential { mean_minutes } => {
            if *mean_minutes <= 0.0 {
                return 0;
            }
            let delay = -mean_minutes * (1.0 - u).ln();
            delay.round().min(u32::MAX as f64) as Minute
        }
        DelayModel::Histogram { bins } => {
            let total: f64 = bins.iter().map(|(_, w)| w).sum();
            let target = u * total;
            let mut cum = 0.0;
            for (delay, w) in bins {
                cum += w;
                if target < cum {
                    return *delay;
                }
            }
            // u close to 1 with accumulated rounding: last bin.
            bins.last().map(|(d, _)| *d).unwrap_or(0)
        }
    }
}

/// Bills every pending fee due at or before `minute`, in due order with
/// ties broken by scheduling order, truncating at the billing cap. Returns
/// the spend recognized by this pass.
pub fn settle_due(ledger: &mut BillingLedger, minute: Minute) -> Money {
    ledger.settle_due(minute)
}
