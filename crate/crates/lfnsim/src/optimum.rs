//! Empirical total-window finder: bisects for the smallest fixed window
//! whose steady goodput reaches the acceptance bar on a lossless
//! single-flow variant of a scenario.

use crate::config::Resolved;
use crate::engine::SimTime;
use crate::policy::CcPolicy;
use crate::transport::FlowKind;
use crate::world::run_with_seed;

/// Fraction of the payload rate a window must sustain to count as optimal.
pub const GOODPUT_BAR: f64 = 0.995;

/// Band factor reported above the optimum; covers rounding and per-site
/// queueing headroom when picking a deployment value.
pub const BAND_FACTOR: f64 = 1.03;

#[derive(Clone, Debug)]
pub struct OptimumResult {
    /// Smallest total window meeting the goodput bar.
    pub optimal: u32,
    /// `[optimal, optimal × BAND_FACTOR]`: the acceptance band a deployed
    /// total window should fall into.
    pub band: (u32, u32),
    pub goodput_at_optimal: f64,
    pub payload_rate: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimumError {
    #[error("search range [{lo}, {hi}] does not bracket the optimum: goodput at {hi} is {achieved:.0} B/s, bar is {bar:.0} B/s")]
    NotBracketing {
        lo: u32,
        hi: u32,
        achieved: f64,
        bar: f64,
    },
    #[error("scenario has no flows")]
    NoFlows,
}

/// Builds the lossless single-flow probe used for each candidate window.
fn probe_scenario(base: &Resolved) -> Result<Resolved, OptimumError> {
    let mut s = base.clone();
    if s.flows.is_empty() {
        return Err(OptimumError::NoFlows);
    }
    s.flows.truncate(1);
    s.plan.clear();
    let wan_rate = s.trunks[s.hosts[s.flows[0].src].trunk].wan.rate_bps;
    let flow = &mut s.flows[0];
    // continuous backlogged source, pre-established connection
    flow.kind = FlowKind::Demand(wan_rate / 4); // bytes/s ≥ link payload rate
    flow.reuse_connection = true;
    flow.start_at = Some(SimTime::ZERO);
    for t in &mut s.trunks {
        t.wan.loss_prob = 0.0;
    }
    for h in &mut s.hosts {
        h.nic.loss_prob = 0.0;
    }
    // long enough for a stable interior plateau at the largest latencies
    let rtt = s.trunks[0].wan.prop_delay + s.trunks[0].wan.prop_delay;
    s.duration = SimTime::from_secs(8).max(SimTime::from_nanos(rtt.as_nanos() * 16));
    s.bin_width = SimTime::from_millis(100);
    Ok(s)
}

fn steady_goodput_at(probe: &Resolved, cwnd: u32, seed: u64) -> f64 {
    let mut s = probe.clone();
    s.flows[0].policy = CcPolicy::fixed(cwnd);
    let result = run_with_seed(&s, seed, false);
    let flow = &result.flows[0];
    // skip two round trips of warmup, take the median of interior bins
    let rtt = s.trunks[s.hosts[s.flows[0].src].trunk].wan.prop_delay.as_nanos() * 2;
    let warmup = SimTime::from_nanos(2 * rtt);
    let first = match flow.first_delivery {
        Some(f) => f + warmup,
        None => return 0.0,
    };
    let last = match flow.last_delivery {
        Some(l) => l,
        None => return 0.0,
    };
    let bw = s.bin_width.as_nanos().max(1);
    let lo = (first.as_nanos() / bw + 1) as usize;
    let hi = (last.as_nanos() / bw) as usize;
    if hi <= lo {
        return 0.0;
    }
    let mut interior: Vec<u64> = flow.bins[lo.min(flow.bins.len())..hi.min(flow.bins.len())]
        .to_vec();
    if interior.is_empty() {
        return 0.0;
    }
    interior.sort_unstable();
    let mid = interior.len() / 2;
    let med = if interior.len().is_multiple_of(2) {
        (interior[mid - 1] + interior[mid]) as f64 / 2.0
    } else {
        interior[mid] as f64
    };
    med / s.bin_width.as_secs_f64()
}

/// Bisects `[lo, hi]` for the smallest total window whose steady goodput is
/// at least [`GOODPUT_BAR`] of the path's payload rate.
pub fn find_optimal_total_cwnd(
    base: &Resolved,
    lo: u32,
    hi: u32,
    seed: u64,
) -> Result<OptimumResult, OptimumError> {
    let probe = probe_scenario(base)?;
    let wan_rate = probe.trunks[probe.hosts[probe.flows[0].src].trunk]
        .wan
        .rate_bps;
    let payload_rate = probe.frame.payload_rate(wan_rate);
    let bar = GOODPUT_BAR * payload_rate;

    let at_hi = steady_goodput_at(&probe, hi, seed);
    if at_hi < bar {
        return Err(OptimumError::NotBracketing {
            lo,
            hi,
            achieved: at_hi,
            bar,
        });
    }
    let mut lo = lo.max(1);
    let mut hi = hi;
    if steady_goodput_at(&probe, lo, seed) >= bar {
        hi = lo;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if steady_goodput_at(&probe, mid, seed) >= bar {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let goodput = steady_goodput_at(&probe, hi, seed);
    Ok(OptimumResult {
        optimal: hi,
        band: (hi, (hi as f64 * BAND_FACTOR).ceil() as u32),
        goodput_at_optimal: goodput,
        payload_rate,
    })
}
