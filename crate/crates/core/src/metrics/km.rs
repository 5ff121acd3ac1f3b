//! Kaplan-Meier product-limit estimation.

use crate::error::{Error, Result};

/// Product-limit curve evaluated at its distinct jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl SurvivalCurve {
    /// Right-continuous step function: `S(t)` including a jump at `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Left limit `S(t-)`: jumps at `t` itself are excluded.
    pub fn before(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

fn validate(times: &[f64], n_flags: usize) -> Result<()> {
    if times.is_empty() {
        return Err(Error::precondition("kaplan_meier: no subjects"));
    }
    if times.len() != n_flags {
        return Err(Error::shape("kaplan_meier: times and events differ in length"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("kaplan_meier: non-finite time".into()));
    }
    Ok(())
}

/// `S(t) = prod_{t_k <= t} (1 - d_k / n_k)` over distinct event times. A
/// subject censored at an event time is still at risk for that event.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<SurvivalCurve> {
    validate(times, events.len())?;
    product_limit(times, events, |_, _| 0)
}

/// Kaplan-Meier estimate of the censoring distribution `G`: censorings are
/// the "events", and subjects who progress at a time are removed before the
/// censorings at that time.
pub fn censoring_km(times: &[f64], events: &[bool]) -> Result<SurvivalCurve> {
    validate(times, events.len())?;
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    // at a shared time, the original events leave the risk set first
    product_limit(times, &flipped, |_, tied_non_events| tied_non_events)
}

/// Shared product-limit loop. `exclude(d, c)` returns how many of the `c`
/// non-event subjects tied at the current time are removed from the risk set
/// before the `d` events there.
fn product_limit(times: &[f64], events: &[bool], exclude: impl Fn(usize, usize) -> usize) -> Result<SurvivalCurve> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut curve = SurvivalCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut s = 1.0;
    let mut remaining = times.len();
    let mut g = 0;
    while g < order.len() {
        let t = times[order[g]];
        let mut end = g;
        let mut d = 0;
        while end < order.len() && times[order[end]] == t {
            d += events[order[end]] as usize;
            end += 1;
        }
        let c = end - g - d;
        if d > 0 {
            let n = remaining - exclude(d, c);
            s *= 1.0 - d as f64 / n as f64;
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(n);
            curve.events.push(d);
        }
        remaining -= end - g;
        g = end;
    }
    Ok(curve)
}
