//! Reliable byte-stream transport over the simulated network: cumulative
//! ACKs with bounded selective-ack hints, fast retransmit, selective
//! retransmission with lost-retransmission detection, and a retransmission
//! timer with binary exponential backoff.
//!
//! The congestion window belongs to the connection's [`CcPolicy`]; this
//! module never changes a fixed window. Byte-level payloads are modeled as
//! offsets only; delivery accounting proves coverage.

use std::collections::{BTreeMap, VecDeque};

use crate::engine::SimTime;
use crate::net::{Frame, FrameKind, SackBlocks};
use crate::policy::{CcEvent, CcPolicy, CwndChange, WindowEvent};

/// Host-stack tunables. Defaults mirror a common Linux configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    pub rto_initial: SimTime,
    pub rto_min: SimTime,
    pub rto_max: SimTime,
    /// Variance floor in the RTO formula `srtt + max(4*rttvar, floor)`.
    pub rttvar_floor: SimTime,
    pub dupack_threshold: u32,
    /// Receive window cap in effect on a fresh connection until the first
    /// data ACK returns (window scaling not yet in effect).
    pub ramp_window: u64,
    /// Re-mark a retransmitted segment as lost once later-sent data is
    /// selectively acked (evidence the retransmission itself was dropped).
    pub lost_retrans_detection: bool,
    /// On RTO, queue every previously retransmitted but still-unacked
    /// segment for retransmission along with the head range.
    pub rto_requeues_retransmitted: bool,
    /// After an RTO, pace (re)transmissions with a slow-start-style budget
    /// until the timeout-era data is acked, the way host stacks walk out of
    /// loss recovery. The policy window itself is never touched.
    pub loss_state_pacing: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            rto_initial: SimTime::from_secs(1),
            rto_min: SimTime::from_millis(200),
            rto_max: SimTime::from_secs(60),
            rttvar_floor: SimTime::from_millis(200),
            dupack_threshold: 3,
            ramp_window: 65_535,
            lost_retrans_detection: true,
            rto_requeues_retransmitted: true,
            loss_state_pacing: true,
        }
    }
}

/// RFC 6298-style smoothed RTT state, integer nanoseconds throughout.
#[derive(Clone, Copy, Debug, Default)]
pub struct RttEstimator {
    srtt: Option<SimTime>,
    rttvar: SimTime,
}

impl RttEstimator {
    pub fn sample(&mut self, rtt: SimTime) {
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = SimTime::from_nanos(rtt.as_nanos() / 2);
            }
            Some(srtt) => {
                let err = if srtt > rtt { srtt - rtt } else { rtt - srtt };
                self.rttvar =
                    SimTime::from_nanos((3 * self.rttvar.as_nanos() + err.as_nanos()) / 4);
                self.srtt = Some(SimTime::from_nanos(
                    (7 * srtt.as_nanos() + rtt.as_nanos()) / 8,
                ));
            }
        }
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn base_rto(&self, cfg: &TransportConfig) -> SimTime {
        match self.srtt {
            None => cfg.rto_initial,
            Some(srtt) => {
                let var = SimTime::from_nanos(4 * self.rttvar.as_nanos())
                    .max(cfg.rttvar_floor);
                (srtt + var).max(cfg.rto_min).min(cfg.rto_max)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct SegState {
    len: u32,
    /// Marked missing and queued for retransmission.
    lost: bool,
    retx_count: u32,
    /// snd_nxt snapshot at the last (re)transmission; selective acks beyond
    /// this point prove a lost retransmission.
    retx_marker: u64,
}

/// What the application offers the connection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowKind {
    /// One-shot transfer of exactly this many bytes.
    Volume(u64),
    /// Continuous source accruing bytes at this rate (bytes/second); sends
    /// whole segments only.
    Demand(u64),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AckResult {
    pub progressed: bool,
    pub completed: bool,
}

/// Construction parameters for a [`Connection`].
pub struct FlowEndpoint {
    pub flow: u32,
    pub mss: u32,
    pub access_channel: usize,
    pub kind: FlowKind,
    pub reuse_connection: bool,
    pub start_at: SimTime,
}

/// Sender half of one simulated connection.
pub struct Connection {
    pub flow: u32,
    pub mss: u32,
    pub access_channel: usize,
    pub cfg: TransportConfig,
    pub policy: CcPolicy,
    /// Every window change: control assignments and adaptive-policy
    /// loss/timeout moves (per-ACK growth is not logged).
    pub window_log: Vec<WindowEvent>,

    pub kind: FlowKind,
    pub reuse_connection: bool,
    pub start_at: SimTime,
    pub data_start: Option<SimTime>,

    snd_una: u64,
    snd_nxt: u64,
    /// Unacked ranges. Selectively-acked segments leave the map, so it holds
    /// exactly the ranges still owed to the receiver.
    segs: BTreeMap<u64, SegState>,
    /// Bytes believed in the network: sent, not yet acked/sacked/marked lost.
    pipe: u64,
    /// Highest selectively-acked byte.
    fack: u64,
    scan_cursor: u64,
    retx_queue: VecDeque<u64>,
    retx_watch: Vec<u64>,
    dup_acks: u32,
    dup_ack_fired: bool,
    in_loss_episode: bool,
    recovery_point: u64,
    rwnd_cap: Option<u64>,

    /// Slow-start-paced recovery budget after a timeout:
    /// (budget bytes, sequence point that ends the episode).
    loss_state: Option<(u64, u64)>,
    /// Head range retransmission forced out by the timeout, exempt from the
    /// recovery budget.
    rto_forced: Option<u64>,
    rtt: RttEstimator,
    backoff: u32,
    pub rto_deadline: Option<SimTime>,
    pub rto_event_at: Option<SimTime>,
    pub demand_wake_at: Option<SimTime>,

    pub sent_data_segments: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    /// Segments whose retransmission was itself retransmitted.
    pub repeat_retransmits: u64,
    pub rto_count: u64,
    pub max_pipe_seen: u64,
    pub completed_at: Option<SimTime>,
}

impl Connection {
    pub fn new(endpoint: FlowEndpoint, policy: CcPolicy, cfg: TransportConfig) -> Self {
        Connection {
            flow: endpoint.flow,
            mss: endpoint.mss,
            access_channel: endpoint.access_channel,
            cfg,
            policy,
            window_log: Vec::new(),
            kind: endpoint.kind,
            reuse_connection: endpoint.reuse_connection,
            start_at: endpoint.start_at,
            data_start: None,
            snd_una: 0,
            snd_nxt: 0,
            segs: BTreeMap::new(),
            pipe: 0,
            fack: 0,
            scan_cursor: 0,
            retx_queue: VecDeque::new(),
            retx_watch: Vec::new(),
            dup_acks: 0,
            dup_ack_fired: false,
            in_loss_episode: false,
            recovery_point: 0,
            rwnd_cap: None,
            loss_state: None,
            rto_forced: None,
            rtt: RttEstimator::default(),
            backoff: 0,
            rto_deadline: None,
            rto_event_at: None,
            demand_wake_at: None,
            sent_data_segments: 0,
            retransmits: 0,
            fast_retransmits: 0,
            repeat_retransmits: 0,
            rto_count: 0,
            max_pipe_seen: 0,
            completed_at: None,
        }
    }

    /// Marks the connection ready to move data. On a fresh connection the
    /// effective receive window stays capped until the first data ACK.
    pub fn activate(&mut self, data_start: SimTime) {
        self.data_start = Some(data_start);
        self.rwnd_cap = if self.reuse_connection {
            None
        } else {
            Some(self.cfg.ramp_window)
        };
    }

    pub fn is_active(&self) -> bool {
        self.data_start.is_some() && self.completed_at.is_none()
    }

    pub fn bytes_outstanding(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn pipe_bytes(&self) -> u64 {
        self.pipe
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.rtt.srtt()
    }

    pub fn effective_rto(&self) -> SimTime {
        let base = self.rtt.base_rto(&self.cfg).as_nanos();
        let shifted = base.saturating_shl(self.backoff.min(16));
        SimTime::from_nanos(shifted).min(self.cfg.rto_max)
    }

    /// Completion as reported: sender-side final ACK relative to data start.
    pub fn completion(&self) -> Option<SimTime> {
        Some(self.completed_at? - self.data_start?)
    }

    fn app_available(&self, now: SimTime) -> u64 {
        let Some(start) = self.data_start else {
            return 0;
        };
        match self.kind {
            FlowKind::Volume(v) => v.saturating_sub(self.snd_nxt),
            FlowKind::Demand(bps) => {
                let elapsed = (now.saturating_sub(start)).as_nanos() as u128;
                let accrued = (elapsed * bps as u128 / 1_000_000_000) as u64;
                accrued.saturating_sub(self.snd_nxt)
            }
        }
    }

    /// Time at which the next whole segment of demand data accrues.
    fn next_demand_time(&self) -> Option<SimTime> {
        let FlowKind::Demand(bps) = self.kind else {
            return None;
        };
        let start = self.data_start?;
        let target = (self.snd_nxt + self.mss as u64) as u128;
        let ns = (target * 1_000_000_000).div_ceil(bps as u128) as u64;
        Some(start + SimTime::from_nanos(ns))
    }

    /// Emits every segment the window and application allow right now.
    /// Marked-lost retransmissions take priority over new data.
    pub fn pump(&mut self, now: SimTime, out: &mut Vec<Frame>, data_wire: impl Fn(u32) -> u32) {
        if self.data_start.is_none() || self.completed_at.is_some() {
            return;
        }
        self.demand_wake_at = None;
        let policy_window = self.policy.window_bytes(self.mss);
        let window = match self.loss_state {
            Some((budget, _)) => policy_window.min(budget),
            None => policy_window,
        };

        // retransmissions first
        while let Some(&seq) = self.retx_queue.front() {
            let Some(seg) = self.segs.get(&seq) else {
                self.retx_queue.pop_front();
                continue;
            };
            if !seg.lost {
                self.retx_queue.pop_front();
                continue;
            }
            let len = seg.len;
            let forced = self.rto_forced == Some(seq);
            if !forced && self.pipe + len as u64 > window {
                return;
            }
            if forced {
                self.rto_forced = None;
            }
            self.retx_queue.pop_front();
            let marker = self.snd_nxt;
            let seg = self.segs.get_mut(&seq).unwrap();
            seg.lost = false;
            seg.retx_count += 1;
            if seg.retx_count == 2 {
                self.repeat_retransmits += 1;
            }
            seg.retx_marker = marker;
            self.pipe += len as u64;
            self.max_pipe_seen = self.max_pipe_seen.max(self.pipe);
            self.retransmits += 1;
            // a retransmission restarts the timer, so the timeout races the
            // repair it just sent rather than the original transmission
            self.rto_deadline = Some(now + self.effective_rto());
            if !self.retx_watch.contains(&seq) {
                self.retx_watch.push(seq);
            }
            out.push(Frame {
                flow: self.flow,
                wire: data_wire(len),
                kind: FrameKind::Data {
                    seq,
                    len,
                    ts: now,
                    retx: true,
                },
            });
        }

        // new data
        loop {
            let avail = self.app_available(now);
            let len = match self.kind {
                FlowKind::Volume(_) => (self.mss as u64).min(avail) as u32,
                FlowKind::Demand(_) => {
                    if avail >= self.mss as u64 {
                        self.mss
                    } else {
                        0
                    }
                }
            };
            if len == 0 {
                self.demand_wake_at = self.next_demand_time();
                break;
            }
            if self.pipe + len as u64 > window {
                break;
            }
            if let Some(cap) = self.rwnd_cap {
                if self.snd_nxt + len as u64 - self.snd_una > cap {
                    break;
                }
            }
            let seq = self.snd_nxt;
            self.segs.insert(
                seq,
                SegState {
                    len,
                    lost: false,
                    retx_count: 0,
                    retx_marker: 0,
                },
            );
            self.snd_nxt += len as u64;
            self.pipe += len as u64;
            self.max_pipe_seen = self.max_pipe_seen.max(self.pipe);
            self.sent_data_segments += 1;
            out.push(Frame {
                flow: self.flow,
                wire: data_wire(len),
                kind: FrameKind::Data {
                    seq,
                    len,
                    ts: now,
                    retx: false,
                },
            });
        }

        if !out.is_empty() && self.rto_deadline.is_none() && self.snd_una < self.snd_nxt {
            self.rto_deadline = Some(now + self.effective_rto());
        }
    }

    fn mark_lost(&mut self, seq: u64, now: SimTime) {
        let Some(seg) = self.segs.get_mut(&seq) else {
            return;
        };
        if seg.lost {
            return;
        }
        seg.lost = true;
        self.pipe -= seg.len as u64;
        self.retx_queue.push_back(seq);
        if !self.in_loss_episode {
            self.in_loss_episode = true;
            self.recovery_point = self.snd_nxt;
            let old = self.policy.cwnd_packets();
            if self.policy.on_event(CcEvent::Loss) {
                self.window_log.push(WindowEvent {
                    at: now,
                    old_cwnd: old,
                    new_cwnd: self.policy.cwnd_packets(),
                    cause: CwndChange::Loss,
                });
            }
        }
    }

    /// Oldest range still owed to the receiver, if any.
    fn head_hole(&self) -> Option<u64> {
        self.segs.first_key_value().map(|(&seq, _)| seq)
    }

    pub fn handle_ack(
        &mut self,
        now: SimTime,
        ack: u64,
        sacks: &SackBlocks,
        ts_echo: SimTime,
    ) -> AckResult {
        let mut result = AckResult::default();
        if ack < self.snd_una {
            return result; // stale
        }
        self.rtt.sample(now.saturating_sub(ts_echo));

        if ack > self.snd_una {
            result.progressed = true;
            let acked_bytes = ack - self.snd_una;
            if let Some((budget, point)) = &mut self.loss_state {
                if ack >= *point {
                    self.loss_state = None;
                } else {
                    // slow-start growth out of the timeout
                    *budget += acked_bytes;
                }
            }
            while let Some((&seq, seg)) = self.segs.first_key_value() {
                if seq + seg.len as u64 > ack {
                    break;
                }
                if !seg.lost {
                    self.pipe -= seg.len as u64;
                }
                self.segs.pop_first();
            }
            self.snd_una = ack;
            self.scan_cursor = self.scan_cursor.max(ack);
            self.dup_acks = 0;
            self.dup_ack_fired = false;
            self.backoff = 0;
            self.retx_watch.retain(|&s| s >= ack);
            if self.in_loss_episode && self.snd_una >= self.recovery_point {
                self.in_loss_episode = false;
            }
            if self.rwnd_cap.is_some() {
                // first data ACK: window scaling now in effect
                self.rwnd_cap = None;
            }
            if self.policy.on_event(CcEvent::Ack) {
                // adaptive growth is not logged per ACK; the log records
                // loss/timeout moves and control assignments
            }
            self.rto_deadline = if self.snd_una < self.snd_nxt {
                Some(now + self.effective_rto())
            } else {
                None
            };
            if let FlowKind::Volume(v) = self.kind {
                if self.snd_una >= v {
                    self.completed_at = Some(now);
                    self.rto_deadline = None;
                    result.completed = true;
                }
            }
        } else if self.snd_una < self.snd_nxt {
            self.dup_acks += 1;
        }

        // selective-ack bookkeeping: covered segments leave the inflight
        // map, so each walk only ever touches newly-acked entries
        let mut sack_advanced = false;
        for (s, e) in sacks.iter() {
            let keys: Vec<u64> = self.segs.range(s..e).map(|(&k, _)| k).collect();
            for k in keys {
                let covered = {
                    let seg = &self.segs[&k];
                    k + (seg.len as u64) <= e
                };
                if covered {
                    let seg = self.segs.remove(&k).unwrap();
                    if !seg.lost {
                        self.pipe -= seg.len as u64;
                    }
                }
            }
            if e > self.fack {
                self.fack = e;
                sack_advanced = true;
            }
        }
        self.fack = self.fack.max(self.snd_una);
        if !self.retx_watch.is_empty() {
            let segs = &self.segs;
            self.retx_watch.retain(|s| segs.contains_key(s));
        }

        // loss inference: enough selectively-acked data above a segment
        // means it is missing, not reordered
        let threshold = self.cfg.dupack_threshold as u64 * self.mss as u64;
        if sack_advanced && self.fack > threshold {
            let limit = self.fack - threshold;
            let start = self.scan_cursor.max(self.snd_una);
            if limit > start {
                let candidates: Vec<u64> = self
                    .segs
                    .range(start..limit)
                    .filter(|(_, seg)| !seg.lost && seg.retx_count == 0)
                    .map(|(&k, _)| k)
                    .collect();
                for k in candidates {
                    self.mark_lost(k, now);
                }
                self.scan_cursor = self.scan_cursor.max(limit);
            }
        }

        // lost-retransmission detection: data sent after a retransmission
        // has been selectively acked, so the retransmission itself is gone
        if self.cfg.lost_retrans_detection && sack_advanced && !self.retx_watch.is_empty() {
            let fack = self.fack;
            let to_requeue: Vec<u64> = self
                .retx_watch
                .iter()
                .copied()
                .filter(|&s| {
                    self.segs
                        .get(&s)
                        .map(|seg| !seg.lost && fack > seg.retx_marker)
                        .unwrap_or(false)
                })
                .collect();
            for s in to_requeue {
                let seg = self.segs.get_mut(&s).unwrap();
                seg.lost = true;
                self.pipe -= seg.len as u64;
                self.retx_queue.push_back(s);
            }
        }

        // classic fast retransmit on the duplicate-ACK threshold
        if self.dup_acks == self.cfg.dupack_threshold && !self.dup_ack_fired {
            self.dup_ack_fired = true;
            if let Some(seq) = self.head_hole() {
                if self.segs.get(&seq).map(|s| s.retx_count) == Some(0) {
                    self.fast_retransmits += 1;
                    self.mark_lost(seq, now);
                }
            }
        }

        result
    }

    /// Retransmission timer expiry: retransmit the oldest unacked range and
    /// (optionally) requeue every retransmitted-but-unconfirmed segment;
    /// double the timer and bump the backoff exponent.
    pub fn handle_rto(&mut self, now: SimTime) -> bool {
        if self.snd_una >= self.snd_nxt || self.completed_at.is_some() {
            self.rto_deadline = None;
            return false;
        }
        self.rto_count += 1;
        // oldest unacked range, forced out regardless of budget
        let head = self.segs.first_key_value().map(|(&seq, _)| seq);
        if let Some(seq) = head {
            let seg = self.segs.get_mut(&seq).unwrap();
            if !seg.lost {
                self.pipe -= seg.len as u64;
                seg.lost = true;
                self.retx_queue.push_front(seq);
            }
            self.rto_forced = Some(seq);
        }
        if self.cfg.loss_state_pacing {
            self.loss_state = Some((self.mss as u64, self.snd_nxt));
        }
        if self.cfg.rto_requeues_retransmitted {
            let stale: Vec<u64> = self
                .retx_watch
                .iter()
                .copied()
                .filter(|s| {
                    self.segs
                        .get(s)
                        .map(|seg| !seg.lost)
                        .unwrap_or(false)
                })
                .collect();
            for s in stale {
                let seg = self.segs.get_mut(&s).unwrap();
                seg.lost = true;
                self.pipe -= seg.len as u64;
                self.retx_queue.push_back(s);
            }
        }
        let old = self.policy.cwnd_packets();
        if self.policy.on_event(CcEvent::Timeout) {
            self.window_log.push(WindowEvent {
                at: now,
                old_cwnd: old,
                new_cwnd: self.policy.cwnd_packets(),
                cause: CwndChange::Timeout,
            });
        }
        self.backoff += 1;
        self.rto_deadline = Some(now + self.effective_rto());
        true
    }

    /// Control-plane window assignment (fixed-window policies only).
    pub fn set_cwnd(&mut self, now: SimTime, value: u32) -> Result<u32, crate::policy::PolicyError> {
        let old = self.policy.assign_cwnd(value)?;
        self.window_log.push(WindowEvent {
            at: now,
            old_cwnd: old as f64,
            new_cwnd: value as f64,
            cause: CwndChange::Assigned,
        });
        Ok(old)
    }
}

trait SaturatingShl {
    fn saturating_shl(self, shift: u32) -> Self;
}

impl SaturatingShl for u64 {
    fn saturating_shl(self, shift: u32) -> u64 {
        self.checked_shl(shift).unwrap_or(u64::MAX)
    }
}

/// Receiver half of one flow: reassembly plus first-delivery accounting.
///
/// Every payload byte is counted exactly once, at its first arrival;
/// retransmitted duplicates are excluded from the goodput series. The bulk
/// envelope ("box") is tracked as the span of original-transmission
/// deliveries past the window-scaling spurt, so the retransmission tail and
/// the connection ramp do not stretch it.
pub struct FlowReceiver {
    pub flow: u32,
    ack_wire: u32,
    bin_width: SimTime,
    ramp_window: u64,
    rcv_nxt: u64,
    ooo: BTreeMap<u64, u64>,
    recent: VecDeque<u64>,
    pub bins: Vec<u64>,
    pub first_delivery: Option<SimTime>,
    pub last_delivery: Option<SimTime>,
    /// First original delivery past the ramp spurt.
    pub bulk_start: Option<SimTime>,
    /// Last delivery carried by an original (non-retransmitted) frame.
    pub last_original: Option<SimTime>,
    pub unique_bytes: u64,
    pub duplicate_bytes: u64,
    pub segments_received: u64,
}

impl FlowReceiver {
    pub fn new(flow: u32, ack_wire: u32, bin_width: SimTime, ramp_window: u64) -> Self {
        FlowReceiver {
            flow,
            ack_wire,
            bin_width,
            ramp_window,
            rcv_nxt: 0,
            ooo: BTreeMap::new(),
            recent: VecDeque::new(),
            bins: Vec::new(),
            first_delivery: None,
            last_delivery: None,
            bulk_start: None,
            last_original: None,
            unique_bytes: 0,
            duplicate_bytes: 0,
            segments_received: 0,
        }
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn reassembly_complete(&self) -> bool {
        self.ooo.is_empty()
    }

    fn count_new_bytes(&self, seq: u64, len: u32) -> u64 {
        let end = seq + len as u64;
        let mut new = 0;
        let mut pos = seq.max(self.rcv_nxt);
        while pos < end {
            if pos < self.rcv_nxt {
                pos = self.rcv_nxt;
                continue;
            }
            // find the covering or next out-of-order range
            let covering = self
                .ooo
                .range(..=pos)
                .next_back()
                .filter(|(_, &end)| end > pos);
            if let Some((_, &cov_end)) = covering {
                pos = cov_end;
                continue;
            }
            let next_start = self
                .ooo
                .range(pos..)
                .next()
                .map(|(&s, _)| s)
                .unwrap_or(u64::MAX);
            let gap_end = next_start.min(end);
            new += gap_end - pos;
            pos = gap_end;
        }
        new
    }

    fn insert_range(&mut self, seq: u64, end: u64) -> u64 {
        // returns the start key of the merged range containing [seq, end)
        let mut start = seq;
        let mut stop = end;
        if let Some((&ps, &pe)) = self.ooo.range(..=seq).next_back() {
            if pe >= seq {
                start = ps;
                stop = stop.max(pe);
                self.ooo.remove(&ps);
            }
        }
        let following: Vec<u64> = self
            .ooo
            .range(start..=stop)
            .map(|(&s, _)| s)
            .collect();
        for s in following {
            let e = self.ooo.remove(&s).unwrap();
            stop = stop.max(e);
        }
        self.ooo.insert(start, stop);
        if self.recent.front() != Some(&start) {
            self.recent.push_front(start);
            if self.recent.len() > 12 {
                self.recent.pop_back();
            }
        }
        start
    }

    /// Processes an arriving data segment and produces the ACK to send back.
    pub fn on_data(&mut self, now: SimTime, seq: u64, len: u32, ts: SimTime, retx: bool) -> Frame {
        self.segments_received += 1;
        let new_bytes = self.count_new_bytes(seq, len);
        if new_bytes > 0 {
            let bin = (now.as_nanos() / self.bin_width.as_nanos().max(1)) as usize;
            if self.bins.len() <= bin {
                self.bins.resize(bin + 1, 0);
            }
            self.bins[bin] += new_bytes;
            self.unique_bytes += new_bytes;
            if self.first_delivery.is_none() {
                self.first_delivery = Some(now);
            }
            self.last_delivery = Some(now);
        }
        if !retx {
            self.last_original = Some(now);
            if self.bulk_start.is_none() && seq + len as u64 > self.ramp_window {
                self.bulk_start = Some(now);
            }
        }
        self.duplicate_bytes += len as u64 - new_bytes;

        let end = seq + len as u64;
        let mut trigger_range: Option<u64> = None;
        if seq <= self.rcv_nxt {
            self.rcv_nxt = self.rcv_nxt.max(end);
            // absorb now-contiguous out-of-order ranges
            while let Some((&s, &e)) = self.ooo.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                self.rcv_nxt = self.rcv_nxt.max(e);
                self.ooo.remove(&s);
            }
        } else {
            trigger_range = Some(self.insert_range(seq, end));
        }

        let mut sacks = SackBlocks::default();
        if let Some(t) = trigger_range {
            if let Some(&e) = self.ooo.get(&t) {
                sacks.push(t, e);
            }
        }
        // fill remaining blocks with the most recently updated other ranges
        let mut used: Vec<u64> = trigger_range.into_iter().collect();
        for i in 0..self.recent.len() {
            if used.len() >= 3 {
                break;
            }
            let s = self.recent[i];
            if used.contains(&s) {
                continue;
            }
            if let Some(&e) = self.ooo.get(&s) {
                sacks.push(s, e);
                used.push(s);
            }
        }

        Frame {
            flow: self.flow,
            wire: self.ack_wire,
            kind: FrameKind::Ack {
                ack: self.rcv_nxt,
                sacks,
                ts_echo: ts,
            },
        }
    }

    /// Goodput series binned at the accounting width, bytes/second.
    pub fn goodput_series(&self, until: SimTime) -> Vec<(f64, f64)> {
        let bw = self.bin_width.as_secs_f64();
        let n_bins = (until.as_nanos() / self.bin_width.as_nanos().max(1)) as usize;
        (0..n_bins.max(self.bins.len()))
            .map(|i| {
                let bytes = self.bins.get(i).copied().unwrap_or(0);
                (i as f64 * bw, bytes as f64 / bw)
            })
            .collect()
    }

    /// Time from first to last first-delivery byte.
    pub fn delivery_span(&self) -> Option<SimTime> {
        Some(self.last_delivery? - self.first_delivery?)
    }
}
