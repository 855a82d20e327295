//! Network model: frame format, point-to-point impaired channels (rate,
//! delay, loss, bounded FIFO queue) and a multiplexing switch with a finite
//! shared buffer and PAUSE flow control.
//!
//! Links are duplex only by composition: every [`Channel`] is one direction
//! with its own queue, serializer and loss stream. Loss is applied after
//! serialization and before propagation, which is observationally equivalent
//! for the end hosts.

use crate::engine::{RngStream, SimTime};

/// On-wire sizing of a frame carrying one transport segment.
///
/// Defaults model Ethernet with TCP/IPv4 plus timestamps: 1500-byte MTU,
/// 52 bytes of network/transport headers (40 + 12 timestamp option) and
/// 38 bytes of link-level overhead (14 header + 4 check + 8 preamble +
/// 12 inter-frame gap).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameFormat {
    pub mtu: u32,
    pub transport_header: u32,
    pub link_overhead: u32,
}

impl Default for FrameFormat {
    fn default() -> Self {
        FrameFormat {
            mtu: 1500,
            transport_header: 52,
            link_overhead: 38,
        }
    }
}

impl FrameFormat {
    /// Maximum segment payload: mtu minus transport headers (1448 for defaults).
    pub fn mss(&self) -> u32 {
        self.mtu - self.transport_header
    }

    /// Bytes a frame occupies on the wire. Empty segments (pure ACKs) still
    /// carry the full header and link overhead.
    pub fn wire_size(&self, payload_bytes: u32) -> u32 {
        assert!(
            payload_bytes <= self.mss(),
            "payload {payload_bytes} exceeds mss {}",
            self.mss()
        );
        payload_bytes + self.transport_header + self.link_overhead
    }

    /// Wire size of a full-mss segment (1538 for defaults).
    pub fn max_wire(&self) -> u32 {
        self.wire_size(self.mss())
    }

    /// Fraction of wire bytes that is payload for full segments.
    pub fn payload_fraction(&self) -> f64 {
        self.mss() as f64 / self.max_wire() as f64
    }

    /// Payload bytes/second achievable on a link of `rate_bps` when sending
    /// back-to-back full segments.
    pub fn payload_rate(&self, rate_bps: u64) -> f64 {
        self.payload_fraction() * rate_bps as f64 / 8.0
    }
}

/// Integer-nanosecond serialization delay of `wire_bytes` at `rate_bps`,
/// rounded up so the modeled rate never exceeds the configured one.
pub fn serialization_ns(wire_bytes: u64, rate_bps: u64) -> u64 {
    assert!(rate_bps > 0, "link rate must be positive");
    let bits = (wire_bytes as u128) * 8 * 1_000_000_000;
    bits.div_ceil(rate_bps as u128) as u64
}

/// Per-direction link parameters, netem style.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkConfig {
    pub rate_bps: u64,
    pub prop_delay: SimTime,
    pub loss_prob: f64,
    /// FIFO queue ahead of the serializer, in packets; tail-drop beyond.
    pub queue_limit: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            rate_bps: 1_000_000_000,
            prop_delay: SimTime::from_millis(90),
            loss_prob: 0.0001,
            queue_limit: 50_000,
        }
    }
}

/// Compact SACK block list carried by ACK segments (bounded count).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SackBlocks {
    blocks: [(u64, u64); 3],
    len: u8,
}

impl SackBlocks {
    pub fn push(&mut self, start: u64, end: u64) {
        if (self.len as usize) < self.blocks.len() {
            self.blocks[self.len as usize] = (start, end);
            self.len += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.blocks[..self.len as usize].iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// What a frame carries. Data and ACK frames are distinct because the
/// simulated flows are unidirectional byte streams.
#[derive(Clone, Copy, Debug)]
pub enum FrameKind {
    Data {
        seq: u64,
        len: u32,
        /// Send timestamp, echoed back by the receiver for RTT sampling.
        ts: SimTime,
        retx: bool,
    },
    Ack {
        ack: u64,
        sacks: SackBlocks,
        ts_echo: SimTime,
    },
}

/// One frame in flight: flow it belongs to, wire footprint, payload.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub flow: u32,
    pub wire: u32,
    pub kind: FrameKind,
}

/// Where frames go once a channel delivers them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sink {
    /// Enqueue into another channel (store-and-forward hop).
    Channel(usize),
    /// Enter a switch's shared buffer.
    Switch(usize),
    /// Arrived at a host: data frames go to the flow receiver, ACK frames to
    /// the sending connection.
    Host,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ChannelStats {
    pub submitted: u64,
    pub tail_dropped: u64,
    /// Frames that completed serialization.
    pub sent: u64,
    pub loss_dropped: u64,
    pub delivered: u64,
}

/// Outcome of submitting a frame to a channel.
pub enum Submit {
    /// Serializer was idle; caller must schedule serialization completion
    /// after the returned delay.
    Started(SimTime),
    Queued,
    Dropped,
}

/// Fate of a frame whose serialization just completed.
pub enum SerOutcome {
    /// Deliver to the channel sink after the propagation delay.
    Delivered { frame: Frame, after: SimTime },
    /// Consumed by the loss process.
    Lost(Frame),
}

/// One direction of a link: FIFO queue, serializer, loss process, propagation.
pub struct Channel {
    pub name: String,
    pub cfg: LinkConfig,
    pub sink: Sink,
    queue: std::collections::VecDeque<Frame>,
    serializing: Option<Frame>,
    paused: bool,
    rng: RngStream,
    pub stats: ChannelStats,
}

impl Channel {
    pub fn new(name: String, cfg: LinkConfig, sink: Sink, rng: RngStream) -> Self {
        Channel {
            name,
            cfg,
            sink,
            queue: std::collections::VecDeque::new(),
            serializing: None,
            paused: false,
            rng,
            stats: ChannelStats::default(),
        }
    }

    fn ser_time(&self, frame: &Frame) -> SimTime {
        SimTime::from_nanos(serialization_ns(frame.wire as u64, self.cfg.rate_bps))
    }

    /// Offers a frame to this channel. Tail-drops when the queue is full.
    pub fn submit(&mut self, frame: Frame) -> Submit {
        self.stats.submitted += 1;
        if self.serializing.is_none() && !self.paused && self.queue.is_empty() {
            let d = self.ser_time(&frame);
            self.serializing = Some(frame);
            Submit::Started(d)
        } else if self.queue.len() < self.cfg.queue_limit {
            self.queue.push_back(frame);
            Submit::Queued
        } else {
            self.stats.tail_dropped += 1;
            Submit::Dropped
        }
    }

    /// Serialization of the current frame finished. Returns the fate of the
    /// serialized frame and the serialization time of the next frame if one
    /// was started.
    pub fn ser_done(&mut self) -> (SerOutcome, Option<SimTime>) {
        let frame = self
            .serializing
            .take()
            .expect("ser_done without frame in serializer");
        self.stats.sent += 1;
        let outcome = if self.rng.bernoulli(self.cfg.loss_prob) {
            self.stats.loss_dropped += 1;
            SerOutcome::Lost(frame)
        } else {
            SerOutcome::Delivered {
                frame,
                after: self.cfg.prop_delay,
            }
        };
        let next = self.start_next();
        (outcome, next)
    }

    fn start_next(&mut self) -> Option<SimTime> {
        if self.paused || self.serializing.is_some() {
            return None;
        }
        let frame = self.queue.pop_front()?;
        let d = self.ser_time(&frame);
        self.serializing = Some(frame);
        Some(d)
    }

    /// PAUSE control from a downstream switch. A frame already in the
    /// serializer completes (at most one in-flight frame); unpausing may
    /// restart the serializer, in which case the serialization delay of the
    /// restarted frame is returned.
    pub fn set_paused(&mut self, paused: bool) -> Option<SimTime> {
        self.paused = paused;
        if paused {
            None
        } else {
            self.start_next()
        }
    }

    pub fn note_delivered(&mut self) {
        self.stats.delivered += 1;
    }

    pub fn is_idle(&self) -> bool {
        self.serializing.is_none() && self.queue.is_empty()
    }
}

/// Switch parameters: shared output buffer plus PAUSE watermarks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchConfig {
    pub buffer_bytes: u64,
    pub pause_enabled: bool,
    pub pause_high: u64,
    pub pause_low: u64,
    pub egress_rate_bps: u64,
}

impl SwitchConfig {
    /// Default watermarks: high leaves one max frame of headroom per input
    /// port, low is half the buffer.
    pub fn default_watermarks(buffer_bytes: u64, n_ports: usize, max_frame: u32) -> (u64, u64) {
        let slack = n_ports as u64 * max_frame as u64;
        let high = buffer_bytes.saturating_sub(slack).max(1);
        (high, buffer_bytes / 2)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SwitchStats {
    pub forwarded: u64,
    pub tail_dropped: u64,
    pub peak_occupancy: u64,
    pub pause_events: u64,
}

/// Directive emitted by switch state transitions; the caller owns the input
/// channels and the engine, so pause propagation happens there.
#[derive(Debug, Default)]
pub struct SwitchEffects {
    /// Schedule egress completion after this delay.
    pub start_drain: Option<SimTime>,
    /// Some(true) = assert PAUSE on all input ports, Some(false) = release.
    pub pause: Option<bool>,
}

/// Output-buffered multiplexing switch. Occupancy is tracked in wire bytes;
/// a frame leaves the buffer when its egress serialization completes.
pub struct Switch {
    pub cfg: SwitchConfig,
    pub inputs: Vec<usize>,
    /// Channel receiving drained frames.
    pub egress_to: usize,
    queue: std::collections::VecDeque<Frame>,
    occupancy: u64,
    egress_busy: bool,
    pause_asserted: bool,
    pub stats: SwitchStats,
}

impl Switch {
    pub fn new(cfg: SwitchConfig, inputs: Vec<usize>, egress_to: usize) -> Self {
        Switch {
            cfg,
            inputs,
            egress_to,
            queue: std::collections::VecDeque::new(),
            occupancy: 0,
            egress_busy: false,
            pause_asserted: false,
            stats: SwitchStats::default(),
        }
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn pause_asserted(&self) -> bool {
        self.pause_asserted
    }

    /// A frame arrived from an input port.
    pub fn arrive(&mut self, frame: Frame) -> SwitchEffects {
        let mut fx = SwitchEffects::default();
        let wire = frame.wire as u64;
        if !self.cfg.pause_enabled && self.occupancy + wire > self.cfg.buffer_bytes {
            self.stats.tail_dropped += 1;
            return fx;
        }
        // With PAUSE enabled and sane watermarks the buffer bound is never
        // reached; guard anyway so a misconfiguration shows up as drops.
        if self.cfg.pause_enabled && self.occupancy + wire > self.cfg.buffer_bytes {
            self.stats.tail_dropped += 1;
            return fx;
        }
        self.occupancy += wire;
        self.stats.peak_occupancy = self.stats.peak_occupancy.max(self.occupancy);
        self.queue.push_back(frame);
        if self.cfg.pause_enabled && !self.pause_asserted && self.occupancy >= self.cfg.pause_high {
            self.pause_asserted = true;
            self.stats.pause_events += 1;
            fx.pause = Some(true);
        }
        if !self.egress_busy {
            self.egress_busy = true;
            let front = self.queue.front().unwrap();
            fx.start_drain = Some(SimTime::from_nanos(serialization_ns(
                front.wire as u64,
                self.cfg.egress_rate_bps,
            )));
        }
        fx
    }

    /// Egress finished serializing the head frame. Returns the frame to
    /// forward plus follow-up effects.
    pub fn drain_done(&mut self) -> (Frame, SwitchEffects) {
        let frame = self.queue.pop_front().expect("drain_done on empty switch");
        self.occupancy -= frame.wire as u64;
        self.stats.forwarded += 1;
        let mut fx = SwitchEffects::default();
        if let Some(next) = self.queue.front() {
            fx.start_drain = Some(SimTime::from_nanos(serialization_ns(
                next.wire as u64,
                self.cfg.egress_rate_bps,
            )));
        } else {
            self.egress_busy = false;
        }
        if self.pause_asserted && self.occupancy <= self.cfg.pause_low {
            self.pause_asserted = false;
            fx.pause = Some(false);
        }
        (frame, fx)
    }
}

/// Analytic buffer requirement for a synchronized window burst from
/// `n_senders` into one egress port, in bytes.
///
/// Under-subscribed input (aggregate ingress at or below egress) returns 0.
/// `per_sender_rate_bps` may be infinite to model instantaneous arrival.
pub fn min_buffer_required(
    n_senders: u32,
    total_window_pkts: u64,
    frame_wire_bytes: u32,
    per_sender_rate_bps: f64,
    egress_rate_bps: f64,
) -> f64 {
    assert!(n_senders >= 1);
    let burst = total_window_pkts as f64 * frame_wire_bytes as f64;
    let ingress = n_senders as f64 * per_sender_rate_bps;
    if ingress <= egress_rate_bps {
        return 0.0;
    }
    burst * (1.0 - egress_rate_bps / ingress)
}
