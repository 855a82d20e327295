//! Latency × loss sweep driver: runs a base scenario over a grid of
//! (one-way latency, loss rate) cells with seeded replicates, in parallel,
//! and reduces completion times to per-cell statistics.

use rayon::prelude::*;

use crate::config::Resolved;
use crate::controller::total_cwnd_for;
use crate::engine::{derive_stream_seed, SimTime};
use crate::policy::CcPolicy;
use crate::world::run_with_seed;

/// Grid description. Latencies are one-way; reported tables use the RTT.
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub one_way_ms: Vec<f64>,
    pub loss_rates: Vec<f64>,
    pub replicates: usize,
    /// Resize fixed windows per cell to the bandwidth-delay product of the
    /// cell's RTT (plus this headroom), the way a controller deploying over
    /// that latency would. None keeps the scenario's configured windows,
    /// which under-fills the pipe as soon as the RTT grows past the one the
    /// window was sized for.
    pub window_headroom: Option<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        // round-trip rows 0..800 ms and the loss columns of the reference
        // tables: 0%, 0.001%, 0.01%, 0.1%, 1%
        SweepGrid {
            one_way_ms: vec![
                0.0, 25.0, 50.0, 75.0, 90.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0,
            ],
            loss_rates: vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2],
            replicates: 20,
            window_headroom: Some(0.01),
        }
    }
}

/// Statistics of one (latency, loss) cell over its replicates.
#[derive(Clone, Debug)]
pub struct CellStats {
    pub rtt_ms: f64,
    pub loss: f64,
    pub reps: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub stddev_s: f64,
    pub completions_s: Vec<f64>,
    pub box_widths_s: Vec<f64>,
    pub rto_counts: Vec<u64>,
    pub repeat_retransmits: Vec<u64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Midpoint-of-sorted median; even counts average the two central values.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Sample standard deviation (n − 1); exactly zero for fewer than two
/// values or when every value is identical (deterministic replicates).
pub fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// Per-replicate measurement:
/// (completion, box width, timer expiries, repeat retransmissions).
type RepRecord = (f64, f64, u64, u64);

/// Derives the replicate seed for a grid cell so any single cell can be
/// re-run in isolation bit-identically.
pub fn cell_seed(base_seed: u64, row: usize, col: usize, rep: usize) -> u64 {
    derive_stream_seed(base_seed, &format!("sweep/{row}/{col}/{rep}"))
}

/// Runs `replicates` runs per cell and reduces to statistics. `reuse`
/// selects pre-established connections (no window-scaling ramp).
///
/// Cells and replicates execute concurrently with zero shared mutable
/// state; results merge deterministically by (cell, replicate) key.
pub fn run_sweep(base: &Resolved, grid: &SweepGrid, base_seed: u64, reuse: bool) -> Vec<CellStats> {
    let mut jobs = Vec::new();
    for (row, lat) in grid.one_way_ms.iter().enumerate() {
        for (col, loss) in grid.loss_rates.iter().enumerate() {
            for rep in 0..grid.replicates {
                jobs.push((row, col, rep, *lat, *loss));
            }
        }
    }
    let mut completions: Vec<((usize, usize, usize), RepRecord)> = jobs
        .par_iter()
        .map(|&(row, col, rep, lat, loss)| {
            let mut scenario = base.clone();
            scenario.override_wan(SimTime::from_secs_f64(lat / 1e3), loss);
            scenario.set_all_reuse(reuse);
            if let Some(headroom) = grid.window_headroom {
                let rtt = SimTime::from_secs_f64(lat * 2.0 / 1e3);
                let payload = scenario.frame.payload_rate(scenario.trunks[0].wan.rate_bps);
                let cwnd = total_cwnd_for(payload, rtt, scenario.frame.mss(), headroom).max(100);
                for f in &mut scenario.flows {
                    if f.policy.is_fixed() {
                        f.policy = CcPolicy::fixed(cwnd);
                    }
                }
            }
            let seed = cell_seed(base_seed, row, col, rep);
            let result = run_with_seed(&scenario, seed, false);
            let flow = &result.flows[0];
            let completion = flow
                .completion
                .map(|t| t.as_secs_f64())
                .unwrap_or(f64::INFINITY);
            let box_width = flow.box_width().unwrap_or(f64::NAN);
            (
                (row, col, rep),
                (completion, box_width, flow.rto_count, flow.repeat_retransmits),
            )
        })
        .collect();
    completions.sort_by_key(|(k, _)| *k);

    let mut cells = Vec::new();
    for (row, lat) in grid.one_way_ms.iter().enumerate() {
        for (col, loss) in grid.loss_rates.iter().enumerate() {
            let recs: Vec<RepRecord> = completions
                .iter()
                .filter(|((r, c, _), _)| *r == row && *c == col)
                .map(|(_, v)| *v)
                .collect();
            let xs: Vec<f64> = recs.iter().map(|v| v.0).collect();
            cells.push(CellStats {
                rtt_ms: lat * 2.0,
                loss: *loss,
                reps: xs.len(),
                mean_s: mean(&xs),
                median_s: median(&xs),
                stddev_s: stddev(&xs),
                completions_s: xs,
                box_widths_s: recs.iter().map(|v| v.1).collect(),
                rto_counts: recs.iter().map(|v| v.2).collect(),
                repeat_retransmits: recs.iter().map(|v| v.3).collect(),
            });
        }
    }
    cells
}
