//! Glue between the event engine and the model pieces: owns every channel,
//! switch, connection and receiver of one simulation run, dispatches events,
//! executes the control plan, and assembles the run result.

use crate::config::Resolved;
use crate::controller::{ActionLogEntry, ControlAction, Selector, Trigger};
use crate::engine::{Engine, RngStream, SimTime};
use crate::net::{
    serialization_ns, Channel, ChannelStats, Frame, FrameKind, SerOutcome, Sink, Submit, Switch,
    SwitchConfig, SwitchEffects, SwitchStats,
};
use crate::policy::{CwndChange, WindowEvent};
use crate::transport::{Connection, FlowEndpoint, FlowKind, FlowReceiver};

/// Engine-opaque action descriptors for this simulation.
#[derive(Clone, Copy, Debug)]
enum Action {
    SerDone(usize),
    Deliver(usize, Frame),
    SwitchDrain(usize),
    FlowStart(usize),
    FlowWake(usize),
    RtoFire(usize),
    Plan(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Send,
    Retx,
    Rto,
    LossDrop,
    TailDrop,
    Deliver,
    AckRx,
}

impl TraceEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceEvent::Send => "send",
            TraceEvent::Retx => "retx",
            TraceEvent::Rto => "rto",
            TraceEvent::LossDrop => "loss_drop",
            TraceEvent::TailDrop => "tail_drop",
            TraceEvent::Deliver => "deliver",
            TraceEvent::AckRx => "ack_rx",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceRecord {
    pub t: SimTime,
    pub flow: u32,
    pub event: TraceEvent,
    pub seq: u64,
    pub len: u32,
}

struct World {
    scenario: Resolved,
    channels: Vec<Channel>,
    switches: Vec<Switch>,
    conns: Vec<Connection>,
    receivers: Vec<FlowReceiver>,
    /// ACK-path channel per flow.
    rev_channel: Vec<usize>,
    wake_scheduled: Vec<Option<SimTime>>,
    /// (remaining flow indices, plan event index)
    pending_triggers: Vec<(Vec<usize>, usize)>,
    action_log: Vec<ActionLogEntry>,
    data_drops: Vec<u64>,
    ack_drops: Vec<u64>,
    trace: Option<Vec<TraceRecord>>,
    scratch: Vec<Frame>,
}

impl World {
    fn build(scenario: Resolved, seed: u64, trace: bool) -> (World, Engine<Action>) {
        let fmt = scenario.frame;
        let mut engine = Engine::new();
        let mut channels = Vec::new();

        // one access channel per host, then fwd/rev wan channels per trunk
        let n_hosts = scenario.hosts.len();
        let trunk_fwd: Vec<usize> = (0..scenario.trunks.len())
            .map(|t| n_hosts + 2 * t)
            .collect();
        let trunk_rev: Vec<usize> = (0..scenario.trunks.len())
            .map(|t| n_hosts + 2 * t + 1)
            .collect();
        let mut switches = Vec::new();
        let mut trunk_switch: Vec<Option<usize>> = vec![None; scenario.trunks.len()];
        for (t, trunk) in scenario.trunks.iter().enumerate() {
            if let Some(cfg) = trunk.switch {
                let inputs: Vec<usize> = scenario
                    .hosts
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| h.trunk == t)
                    .map(|(i, _)| i)
                    .collect();
                let mut cfg = SwitchConfig { ..cfg };
                if cfg.pause_high == 0 || cfg.pause_low == 0 {
                    let (high, low) = SwitchConfig::default_watermarks(
                        cfg.buffer_bytes,
                        inputs.len() + 1,
                        fmt.max_wire(),
                    );
                    if cfg.pause_high == 0 {
                        cfg.pause_high = high;
                    }
                    if cfg.pause_low == 0 {
                        cfg.pause_low = low;
                    }
                }
                trunk_switch[t] = Some(switches.len());
                switches.push(Switch::new(cfg, inputs, trunk_fwd[t]));
            }
        }

        for (i, host) in scenario.hosts.iter().enumerate() {
            let sink = match trunk_switch[host.trunk] {
                Some(s) => Sink::Switch(s),
                None => Sink::Channel(trunk_fwd[host.trunk]),
            };
            let name = format!("nic/{}", host.name);
            let rng = RngStream::new(seed, &format!("link/{name}"));
            channels.push(Channel::new(name, host.nic, sink, rng));
            debug_assert_eq!(channels.len() - 1, i);
        }
        for (t, trunk) in scenario.trunks.iter().enumerate() {
            let fwd_name = format!("wan/{}/fwd", trunk.name);
            let rev_name = format!("wan/{}/rev", trunk.name);
            let fwd_rng = RngStream::new(seed, &format!("link/{fwd_name}"));
            let rev_rng = RngStream::new(seed, &format!("link/{rev_name}"));
            channels.push(Channel::new(fwd_name, trunk.wan, Sink::Host, fwd_rng));
            debug_assert_eq!(channels.len() - 1, trunk_fwd[t]);
            channels.push(Channel::new(rev_name, trunk.wan, Sink::Host, rev_rng));
            debug_assert_eq!(channels.len() - 1, trunk_rev[t]);
        }

        let mut conns = Vec::new();
        let mut receivers = Vec::new();
        let mut rev_channel = Vec::new();
        for (f, flow) in scenario.flows.iter().enumerate() {
            let mut conn = Connection::new(
                FlowEndpoint {
                    flow: f as u32,
                    mss: fmt.mss(),
                    access_channel: flow.src,
                    kind: flow.kind,
                    reuse_connection: flow.reuse_connection,
                    start_at: flow.start_at.unwrap_or(SimTime::ZERO),
                },
                flow.policy.clone(),
                scenario.transport,
            );
            if conn.policy.is_fixed() {
                // the classifier's template is the first window assignment
                conn.window_log.push(WindowEvent {
                    at: SimTime::ZERO,
                    old_cwnd: conn.policy.cwnd_packets(),
                    new_cwnd: conn.policy.cwnd_packets(),
                    cause: CwndChange::Assigned,
                });
            }
            conns.push(conn);
            receivers.push(FlowReceiver::new(
                f as u32,
                fmt.wire_size(0),
                scenario.bin_width,
                scenario.transport.ramp_window,
            ));
            rev_channel.push(trunk_rev[scenario.hosts[flow.src].trunk]);
        }

        for (f, flow) in scenario.flows.iter().enumerate() {
            if let Some(at) = flow.start_at {
                engine.schedule(at, Action::FlowStart(f));
            }
        }
        let mut pending_triggers = Vec::new();
        for (i, ev) in scenario.plan.iter().enumerate() {
            match &ev.trigger {
                Trigger::At(t) => {
                    engine.schedule(*t, Action::Plan(i));
                }
                Trigger::FlowsComplete(names) => {
                    let idxs: Vec<usize> = names
                        .iter()
                        .map(|n| scenario.flow_index(n).expect("validated flow name"))
                        .collect();
                    pending_triggers.push((idxs, i));
                }
            }
        }

        let n_flows = scenario.flows.len();
        let world = World {
            scenario,
            channels,
            switches,
            conns,
            receivers,
            rev_channel,
            wake_scheduled: vec![None; n_flows],
            pending_triggers,
            action_log: Vec::new(),
            data_drops: vec![0; n_flows],
            ack_drops: vec![0; n_flows],
            trace: if trace { Some(Vec::new()) } else { None },
            scratch: Vec::new(),
        };
        (world, engine)
    }

    fn trace(&mut self, t: SimTime, flow: u32, event: TraceEvent, seq: u64, len: u32) {
        if let Some(log) = &mut self.trace {
            log.push(TraceRecord {
                t,
                flow,
                event,
                seq,
                len,
            });
        }
    }

    /// One-way delay of a small frame along the flow's data path, used to
    /// model the connection handshake without consuming loss draws.
    fn handshake_delay(&self, f: usize) -> SimTime {
        let flow = &self.scenario.flows[f];
        let host = &self.scenario.hosts[flow.src];
        let trunk = &self.scenario.trunks[host.trunk];
        let wire = self.scenario.frame.wire_size(0) as u64;
        let mut fwd = serialization_ns(wire, host.nic.rate_bps)
            + serialization_ns(wire, trunk.wan.rate_bps)
            + trunk.wan.prop_delay.as_nanos();
        if let Some(sw) = &trunk.switch {
            fwd += serialization_ns(wire, sw.egress_rate_bps);
        }
        let rev = serialization_ns(wire, trunk.wan.rate_bps) + trunk.wan.prop_delay.as_nanos();
        SimTime::from_nanos(fwd + rev)
    }

    fn submit(&mut self, eng: &mut Engine<Action>, now: SimTime, ch: usize, frame: Frame) {
        match self.channels[ch].submit(frame) {
            Submit::Started(d) => {
                eng.schedule(now + d, Action::SerDone(ch));
            }
            Submit::Queued => {}
            Submit::Dropped => {
                if let FrameKind::Data { seq, len, .. } = frame.kind {
                    self.trace(now, frame.flow, TraceEvent::TailDrop, seq, len);
                } else {
                    self.trace(now, frame.flow, TraceEvent::TailDrop, 0, 0);
                }
            }
        }
    }

    fn pump_flow(&mut self, eng: &mut Engine<Action>, now: SimTime, f: usize) {
        let fmt = self.scenario.frame;
        let mut frames = std::mem::take(&mut self.scratch);
        frames.clear();
        self.conns[f].pump(now, &mut frames, |len| fmt.wire_size(len));
        let access = self.conns[f].access_channel;
        for frame in frames.drain(..) {
            if self.trace.is_some() {
                if let FrameKind::Data { seq, len, retx, .. } = frame.kind {
                    let ev = if retx { TraceEvent::Retx } else { TraceEvent::Send };
                    self.trace(now, frame.flow, ev, seq, len);
                }
            }
            self.submit(eng, now, access, frame);
        }
        self.scratch = frames;
        // continuous flows wake when the next whole segment has accrued
        if let Some(t) = self.conns[f].demand_wake_at {
            let t = t.max(now);
            let needed = match self.wake_scheduled[f] {
                Some(w) => w > t,
                None => true,
            };
            if needed {
                eng.schedule(t, Action::FlowWake(f));
                self.wake_scheduled[f] = Some(t);
            }
        }
        self.arm_rto(eng, f);
    }

    fn arm_rto(&mut self, eng: &mut Engine<Action>, f: usize) {
        let conn = &mut self.conns[f];
        if let Some(deadline) = conn.rto_deadline {
            let covered = matches!(conn.rto_event_at, Some(at) if at <= deadline);
            if !covered {
                eng.schedule(deadline, Action::RtoFire(f));
                conn.rto_event_at = Some(deadline);
            }
        }
    }

    fn start_flow(&mut self, eng: &mut Engine<Action>, now: SimTime, f: usize) {
        let reuse = self.scenario.flows[f].reuse_connection;
        let data_start = if reuse {
            now
        } else {
            now + self.handshake_delay(f)
        };
        self.conns[f].activate(data_start);
        eng.schedule(data_start, Action::FlowWake(f));
    }

    fn apply_switch_fx(
        &mut self,
        eng: &mut Engine<Action>,
        now: SimTime,
        s: usize,
        fx: SwitchEffects,
    ) {
        if let Some(d) = fx.start_drain {
            eng.schedule(now + d, Action::SwitchDrain(s));
        }
        match fx.pause {
            Some(true) => {
                let inputs = self.switches[s].inputs.clone();
                for ch in inputs {
                    self.channels[ch].set_paused(true);
                }
            }
            Some(false) => {
                let inputs = self.switches[s].inputs.clone();
                for ch in inputs {
                    if let Some(d) = self.channels[ch].set_paused(false) {
                        eng.schedule(now + d, Action::SerDone(ch));
                    }
                }
            }
            None => {}
        }
    }

    fn deliver(&mut self, eng: &mut Engine<Action>, now: SimTime, ch: usize, frame: Frame) {
        self.channels[ch].note_delivered();
        match self.channels[ch].sink {
            Sink::Channel(next) => self.submit(eng, now, next, frame),
            Sink::Switch(s) => {
                let fx = self.switches[s].arrive(frame);
                self.apply_switch_fx(eng, now, s, fx);
            }
            Sink::Host => match frame.kind {
                FrameKind::Data { seq, len, ts, retx } => {
                    let f = frame.flow as usize;
                    self.trace(now, frame.flow, TraceEvent::Deliver, seq, len);
                    let ack = self.receivers[f].on_data(now, seq, len, ts, retx);
                    let rev = self.rev_channel[f];
                    self.submit(eng, now, rev, ack);
                }
                FrameKind::Ack { ack, sacks, ts_echo } => {
                    let f = frame.flow as usize;
                    self.trace(now, frame.flow, TraceEvent::AckRx, ack, 0);
                    let res = self.conns[f].handle_ack(now, ack, &sacks, ts_echo);
                    self.pump_flow(eng, now, f);
                    if res.completed {
                        self.flow_completed(eng, now, f);
                    }
                }
            },
        }
    }

    fn flow_completed(&mut self, eng: &mut Engine<Action>, now: SimTime, f: usize) {
        let mut ready = Vec::new();
        for (remaining, plan_idx) in &mut self.pending_triggers {
            remaining.retain(|&x| x != f);
            if remaining.is_empty() {
                ready.push(*plan_idx);
            }
        }
        self.pending_triggers.retain(|(r, _)| !r.is_empty());
        for idx in ready {
            self.execute_plan_event(eng, now, idx);
        }
    }

    fn execute_plan_event(&mut self, eng: &mut Engine<Action>, now: SimTime, idx: usize) {
        let actions = self.scenario.plan[idx].actions.clone();
        for action in actions {
            match action {
                ControlAction::SetCwnd { selector, value } => {
                    let targets: Vec<usize> = match &selector {
                        Selector::Flow(name) => {
                            vec![self.scenario.flow_index(name).expect("validated")]
                        }
                        Selector::Host(name) => {
                            let host = self
                                .scenario
                                .hosts
                                .iter()
                                .position(|h| &h.name == name)
                                .expect("validated");
                            self.scenario
                                .flows
                                .iter()
                                .enumerate()
                                .filter(|(_, fl)| fl.src == host)
                                .map(|(i, _)| i)
                                .collect()
                        }
                    };
                    for f in targets {
                        let old = self.conns[f]
                            .set_cwnd(now, value)
                            .expect("validation guarantees fixed-window target");
                        self.action_log.push(ActionLogEntry {
                            at: now,
                            flow: self.scenario.flows[f].name.clone(),
                            old_cwnd: old,
                            new_cwnd: value,
                        });
                        // a raised window may open send room immediately
                        self.pump_flow(eng, now, f);
                    }
                }
                ControlAction::StartFlow { flow } => {
                    let f = self.scenario.flow_index(&flow).expect("validated");
                    self.start_flow(eng, now, f);
                }
            }
        }
    }

    fn handle(&mut self, eng: &mut Engine<Action>, now: SimTime, action: Action) {
        match action {
            Action::SerDone(ch) => {
                let (outcome, next) = self.channels[ch].ser_done();
                if let Some(d) = next {
                    eng.schedule(now + d, Action::SerDone(ch));
                }
                match outcome {
                    SerOutcome::Delivered { frame, after } => {
                        if after == SimTime::ZERO {
                            self.deliver(eng, now, ch, frame);
                        } else {
                            eng.schedule(now + after, Action::Deliver(ch, frame));
                        }
                    }
                    SerOutcome::Lost(frame) => match frame.kind {
                        FrameKind::Data { seq, len, .. } => {
                            self.data_drops[frame.flow as usize] += 1;
                            self.trace(now, frame.flow, TraceEvent::LossDrop, seq, len);
                        }
                        FrameKind::Ack { ack, .. } => {
                            self.ack_drops[frame.flow as usize] += 1;
                            self.trace(now, frame.flow, TraceEvent::LossDrop, ack, 0);
                        }
                    },
                }
            }
            Action::Deliver(ch, frame) => self.deliver(eng, now, ch, frame),
            Action::SwitchDrain(s) => {
                let (frame, fx) = self.switches[s].drain_done();
                let egress_to = self.switches[s].egress_to;
                self.apply_switch_fx(eng, now, s, fx);
                self.submit(eng, now, egress_to, frame);
            }
            Action::FlowStart(f) => self.start_flow(eng, now, f),
            Action::FlowWake(f) => {
                self.wake_scheduled[f] = None;
                self.pump_flow(eng, now, f);
            }
            Action::RtoFire(f) => {
                self.conns[f].rto_event_at = None;
                let deadline = self.conns[f].rto_deadline;
                match deadline {
                    None => {}
                    // deadline pushed forward since this event was scheduled
                    Some(d) if d > now => {
                        eng.schedule(d, Action::RtoFire(f));
                        self.conns[f].rto_event_at = Some(d);
                    }
                    Some(_) if self.conns[f].handle_rto(now) => {
                        self.trace(now, f as u32, TraceEvent::Rto, self.conns[f].snd_una(), 0);
                        self.pump_flow(eng, now, f);
                    }
                    Some(_) => {}
                }
                self.arm_rto(eng, f);
            }
            Action::Plan(i) => self.execute_plan_event(eng, now, i),
        }
    }
}

/// Everything measured about one flow in a run.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub name: String,
    pub kind: FlowKind,
    pub fixed_policy: bool,
    pub data_start: Option<SimTime>,
    pub completed_at: Option<SimTime>,
    /// Sender-side final ACK relative to the first data opportunity.
    pub completion: Option<SimTime>,
    pub delivered_bytes: u64,
    pub duplicate_bytes: u64,
    pub reassembly_complete: bool,
    pub receiver_cum: u64,
    pub sent_segments: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    pub repeat_retransmits: u64,
    pub rto_count: u64,
    pub data_drops: u64,
    pub ack_drops: u64,
    pub first_delivery: Option<SimTime>,
    pub last_delivery: Option<SimTime>,
    pub bulk_start: Option<SimTime>,
    pub last_original: Option<SimTime>,
    pub bins: Vec<u64>,
    pub window_log: Vec<WindowEvent>,
    pub max_pipe_seen: u64,
}

impl FlowResult {
    /// Width of the bulk envelope at the receiver: first to last delivery of
    /// original transmissions past the window-scaling spurt. Handshake, ramp
    /// stall, retransmission tail and the final-ACK leg all fall outside it.
    /// Undefined without delivered bytes.
    pub fn box_width(&self) -> Option<f64> {
        let start = self.bulk_start.or(self.first_delivery)?;
        Some((self.last_original? - start).as_secs_f64())
    }

    /// Median goodput over interior bins (partial edge bins excluded).
    pub fn steady_goodput(&self, bin_width: SimTime) -> Option<f64> {
        let first = self.first_delivery?;
        let last = self.last_delivery?;
        let bw = bin_width.as_nanos().max(1);
        let lo = (first.as_nanos() / bw + 1) as usize;
        let hi = (last.as_nanos() / bw) as usize;
        if hi <= lo {
            return None;
        }
        let mut interior: Vec<u64> = self.bins[lo.min(self.bins.len())..hi.min(self.bins.len())]
            .to_vec();
        if interior.is_empty() {
            return None;
        }
        interior.sort_unstable();
        let mid = interior.len() / 2;
        let median_bytes = if interior.len().is_multiple_of(2) {
            (interior[mid - 1] + interior[mid]) as f64 / 2.0
        } else {
            interior[mid] as f64
        };
        Some(median_bytes / bin_width.as_secs_f64())
    }

    /// Mean goodput over bins covering `[from, to)`, bytes/second.
    pub fn goodput_between(&self, bin_width: SimTime, from: SimTime, to: SimTime) -> f64 {
        let bw = bin_width.as_nanos().max(1);
        let lo = (from.as_nanos() / bw) as usize;
        let hi = to.as_nanos().div_ceil(bw) as usize;
        let bytes: u64 = self
            .bins
            .iter()
            .enumerate()
            .filter(|(i, _)| *i >= lo && *i < hi)
            .map(|(_, b)| *b)
            .sum();
        bytes as f64 / (to - from).as_secs_f64()
    }
}

/// Deterministic product of one `(scenario, seed)` execution.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub duration: SimTime,
    pub bin_width: SimTime,
    pub events_processed: u64,
    pub flows: Vec<FlowResult>,
    pub channels: Vec<(String, ChannelStats)>,
    pub switches: Vec<(String, SwitchStats)>,
    pub actions: Vec<ActionLogEntry>,
    pub trace: Vec<TraceRecord>,
}

impl RunResult {
    pub fn flow(&self, name: &str) -> &FlowResult {
        self.flows
            .iter()
            .find(|f| f.name == name)
            .unwrap_or_else(|| panic!("no flow named {name}"))
    }

    /// Sum of all flows' first-delivery bytes per bin.
    pub fn aggregate_bins(&self) -> Vec<u64> {
        let len = self
            .flows
            .iter()
            .map(|f| f.bins.len())
            .max()
            .unwrap_or(0);
        let mut out = vec![0u64; len];
        for f in &self.flows {
            for (i, b) in f.bins.iter().enumerate() {
                out[i] += b;
            }
        }
        out
    }

    pub fn total_switch_drops(&self) -> u64 {
        self.switches.iter().map(|(_, s)| s.tail_dropped).sum()
    }
}

/// Runs one scenario to its configured duration with an explicit seed.
pub fn run_with_seed(scenario: &Resolved, seed: u64, trace: bool) -> RunResult {
    let (mut world, mut engine) = World::build(scenario.clone(), seed, trace);
    let duration = world.scenario.duration;
    let stats = engine.run_until(duration, |eng, now, action| world.handle(eng, now, action));

    let flows = world
        .scenario
        .flows
        .iter()
        .enumerate()
        .map(|(f, spec)| {
            let conn = &world.conns[f];
            let rcv = &world.receivers[f];
            FlowResult {
                name: spec.name.clone(),
                kind: spec.kind,
                fixed_policy: conn.policy.is_fixed(),
                data_start: conn.data_start,
                completed_at: conn.completed_at,
                completion: conn.completion(),
                delivered_bytes: rcv.unique_bytes,
                duplicate_bytes: rcv.duplicate_bytes,
                reassembly_complete: rcv.reassembly_complete(),
                receiver_cum: rcv.rcv_nxt(),
                sent_segments: conn.sent_data_segments,
                retransmits: conn.retransmits,
                fast_retransmits: conn.fast_retransmits,
                repeat_retransmits: conn.repeat_retransmits,
                rto_count: conn.rto_count,
                data_drops: world.data_drops[f],
                ack_drops: world.ack_drops[f],
                first_delivery: rcv.first_delivery,
                last_delivery: rcv.last_delivery,
                bulk_start: rcv.bulk_start,
                last_original: rcv.last_original,
                bins: rcv.bins.clone(),
                window_log: conn.window_log.clone(),
                max_pipe_seen: conn.max_pipe_seen,
            }
        })
        .collect();

    RunResult {
        scenario: world.scenario.name.clone(),
        seed,
        duration,
        bin_width: world.scenario.bin_width,
        events_processed: stats.events_processed,
        flows,
        channels: world
            .channels
            .iter()
            .map(|c| (c.name.clone(), c.stats))
            .collect(),
        switches: world
            .switches
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("switch{i}"), s.stats))
            .collect(),
        actions: world.action_log,
        trace: world.trace.unwrap_or_default(),
    }
}

/// Runs the scenario with its own configured seed.
pub fn run_scenario(scenario: &Resolved, trace: bool) -> RunResult {
    run_with_seed(scenario, scenario.seed, trace)
}
