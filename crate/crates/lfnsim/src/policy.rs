//! Pluggable congestion-control policies and per-destination policy routing.
//!
//! Guaranteed-bandwidth routes run a fixed congestion window that only an
//! explicit `set_cwnd` control action may change; every other destination
//! falls back to an adaptive policy (Scalable-style by default, Reno as a
//! comparison baseline).

use std::net::Ipv4Addr;

/// Congestion events surfaced by the transport.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcEvent {
    /// An ACK advanced the cumulative point.
    Ack,
    /// Loss detected via duplicate ACKs / selective-ack evidence.
    Loss,
    /// Retransmission timer expired.
    Timeout,
}

/// Why a window value changed; recorded in the per-connection window log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CwndChange {
    Assigned,
    Loss,
    Timeout,
}

/// One entry of a connection's window history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowEvent {
    pub at: crate::engine::SimTime,
    pub old_cwnd: f64,
    pub new_cwnd: f64,
    pub cause: CwndChange,
}

pub const SCALABLE_INCREASE_PER_ACK: f64 = 0.01;
pub const SCALABLE_DECREASE_FACTOR: f64 = 0.875;
pub const SCALABLE_MIN_CWND: f64 = 2.0;

/// A congestion-control policy instance owned by one connection.
#[derive(Clone, Debug, PartialEq)]
pub enum CcPolicy {
    /// Fixed window in whole packets. Never enters slow start, never reacts
    /// to loss; changes only through [`CcPolicy::assign_cwnd`].
    FixedWindow { cwnd: u32 },
    /// Scalable-style adaptive policy with fractional window accumulation.
    ScalableTcp {
        cwnd: f64,
        ssthresh: f64,
        increase_per_ack: f64,
        decrease_factor: f64,
    },
    /// Classic additive-increase/multiplicative-decrease baseline.
    Reno { cwnd: f64, ssthresh: f64 },
}

impl CcPolicy {
    pub fn fixed(cwnd: u32) -> Self {
        CcPolicy::FixedWindow { cwnd }
    }

    pub fn scalable(initial_cwnd: f64) -> Self {
        CcPolicy::ScalableTcp {
            cwnd: initial_cwnd,
            ssthresh: f64::INFINITY,
            increase_per_ack: SCALABLE_INCREASE_PER_ACK,
            decrease_factor: SCALABLE_DECREASE_FACTOR,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, CcPolicy::FixedWindow { .. })
    }

    /// Current window in packets (fractional for adaptive policies).
    pub fn cwnd_packets(&self) -> f64 {
        match self {
            CcPolicy::FixedWindow { cwnd } => *cwnd as f64,
            CcPolicy::ScalableTcp { cwnd, .. } => *cwnd,
            CcPolicy::Reno { cwnd, .. } => *cwnd,
        }
    }

    /// Window in bytes at the given segment size.
    pub fn window_bytes(&self, mss: u32) -> u64 {
        (self.cwnd_packets() * mss as f64).floor() as u64
    }

    /// Applies a congestion event. FixedWindow is untouched by every event;
    /// adaptive policies follow their increase/decrease rules. Returns true
    /// if the window value changed.
    pub fn on_event(&mut self, event: CcEvent) -> bool {
        match self {
            CcPolicy::FixedWindow { .. } => false,
            CcPolicy::ScalableTcp {
                cwnd,
                ssthresh,
                increase_per_ack,
                decrease_factor,
            } => match event {
                CcEvent::Ack => {
                    if *cwnd < *ssthresh {
                        *cwnd += 1.0; // slow start: doubles per RTT
                    } else {
                        *cwnd += *increase_per_ack;
                    }
                    true
                }
                CcEvent::Loss => {
                    *cwnd = (*cwnd * *decrease_factor).max(SCALABLE_MIN_CWND);
                    *ssthresh = *cwnd;
                    true
                }
                CcEvent::Timeout => {
                    *ssthresh = (*cwnd * *decrease_factor).max(SCALABLE_MIN_CWND);
                    *cwnd = SCALABLE_MIN_CWND;
                    true
                }
            },
            CcPolicy::Reno { cwnd, ssthresh } => match event {
                CcEvent::Ack => {
                    if *cwnd < *ssthresh {
                        *cwnd += 1.0;
                    } else {
                        *cwnd += 1.0 / *cwnd;
                    }
                    true
                }
                CcEvent::Loss => {
                    *cwnd = (*cwnd / 2.0).max(2.0);
                    *ssthresh = *cwnd;
                    true
                }
                CcEvent::Timeout => {
                    *ssthresh = (*cwnd / 2.0).max(2.0);
                    *cwnd = 1.0;
                    true
                }
            },
        }
    }

    /// Direct window assignment; only valid for FixedWindow policies.
    pub fn assign_cwnd(&mut self, value: u32) -> Result<u32, PolicyError> {
        match self {
            CcPolicy::FixedWindow { cwnd } => {
                let old = *cwnd;
                *cwnd = value;
                Ok(old)
            }
            _ => Err(PolicyError::NotFixedWindow),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("set_cwnd targets a non-fixed-window policy")]
    NotFixedWindow,
}

/// Inclusive destination match on address and port ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteMatch {
    pub addr_lo: Ipv4Addr,
    pub addr_hi: Ipv4Addr,
    pub port_lo: u16,
    pub port_hi: u16,
}

impl RouteMatch {
    pub fn contains(&self, addr: Ipv4Addr, port: u16) -> bool {
        let a = u32::from(addr);
        (u32::from(self.addr_lo)..=u32::from(self.addr_hi)).contains(&a)
            && (self.port_lo..=self.port_hi).contains(&port)
    }
}

/// Ordered first-match table from destination to policy template, with a
/// traditional default for everything else.
#[derive(Clone, Debug)]
pub struct RoutePolicyMap {
    pub entries: Vec<(RouteMatch, CcPolicy)>,
    pub default: CcPolicy,
}

impl RoutePolicyMap {
    pub fn new(default: CcPolicy) -> Self {
        RoutePolicyMap {
            entries: Vec::new(),
            default,
        }
    }

    /// Deterministic first-match lookup; every destination resolves.
    pub fn classify(&self, dst_addr: Ipv4Addr, dst_port: u16) -> &CcPolicy {
        self.entries
            .iter()
            .find(|(m, _)| m.contains(dst_addr, dst_port))
            .map(|(_, p)| p)
            .unwrap_or(&self.default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn addr(s: &str) -> Ipv4Addr {
        s.parse().unwrap()
    }

    #[test]
    fn fixed_window_ignores_every_event() {
        for initial in [148u32, 6939, 14026] {
            let mut p = CcPolicy::fixed(initial);
            for ev in [CcEvent::Ack, CcEvent::Loss, CcEvent::Timeout] {
                assert!(!p.on_event(ev));
                assert_eq!(p.cwnd_packets(), initial as f64);
            }
        }
        // a million ACKs leave it untouched
        let mut p = CcPolicy::fixed(148);
        for _ in 0..1_000_000 {
            p.on_event(CcEvent::Ack);
        }
        assert_eq!(p.cwnd_packets(), 148.0);
    }

    #[test]
    fn scalable_rules() {
        let mut p = CcPolicy::ScalableTcp {
            cwnd: 100.0,
            ssthresh: 50.0,
            increase_per_ack: SCALABLE_INCREASE_PER_ACK,
            decrease_factor: SCALABLE_DECREASE_FACTOR,
        };
        p.on_event(CcEvent::Ack);
        assert!((p.cwnd_packets() - 100.01).abs() < 1e-9);
        p.on_event(CcEvent::Loss);
        assert!((p.cwnd_packets() - 100.01 * 0.875).abs() < 1e-9);
        // floor at 2 packets
        let mut floor = CcPolicy::ScalableTcp {
            cwnd: 2.0,
            ssthresh: 2.0,
            increase_per_ack: SCALABLE_INCREASE_PER_ACK,
            decrease_factor: SCALABLE_DECREASE_FACTOR,
        };
        floor.on_event(CcEvent::Loss);
        assert_eq!(floor.cwnd_packets(), 2.0);
        // timeout restarts slow start at the floor
        let mut t = CcPolicy::scalable(80.0);
        t.on_event(CcEvent::Timeout);
        assert_eq!(t.cwnd_packets(), 2.0);
    }

    #[test]
    fn scalable_slow_start_doubles_per_window() {
        let mut p = CcPolicy::ScalableTcp {
            cwnd: 10.0,
            ssthresh: 1000.0,
            increase_per_ack: SCALABLE_INCREASE_PER_ACK,
            decrease_factor: SCALABLE_DECREASE_FACTOR,
        };
        for _ in 0..10 {
            p.on_event(CcEvent::Ack);
        }
        assert_eq!(p.cwnd_packets(), 20.0);
    }

    #[test]
    fn assign_cwnd_only_for_fixed() {
        let mut p = CcPolicy::fixed(6939);
        assert_eq!(p.assign_cwnd(148), Ok(6939));
        assert_eq!(p.cwnd_packets(), 148.0);
        let mut s = CcPolicy::scalable(10.0);
        assert_eq!(s.assign_cwnd(100), Err(PolicyError::NotFixedWindow));
    }

    #[test]
    fn classify_first_match_wins() {
        let mut map = RoutePolicyMap::new(CcPolicy::scalable(10.0));
        map.entries.push((
            RouteMatch {
                addr_lo: addr("20.20.20.100"),
                addr_hi: addr("20.20.20.100"),
                port_lo: 5000,
                port_hi: 5999,
            },
            CcPolicy::fixed(6939),
        ));
        map.entries.push((
            RouteMatch {
                addr_lo: addr("20.20.20.0"),
                addr_hi: addr("20.20.20.255"),
                port_lo: 0,
                port_hi: 65535,
            },
            CcPolicy::fixed(148),
        ));
        // inside the guaranteed range → fixed
        assert!(matches!(
            map.classify(addr("20.20.20.100"), 5101),
            CcPolicy::FixedWindow { cwnd: 6939 }
        ));
        // overlapping entries → earlier entry wins
        assert!(matches!(
            map.classify(addr("20.20.20.100"), 3306),
            CcPolicy::FixedWindow { cwnd: 148 }
        ));
        // outside all ranges → traditional default
        assert!(matches!(
            map.classify(addr("10.0.0.1"), 80),
            CcPolicy::ScalableTcp { .. }
        ));
    }

    proptest! {
        #[test]
        fn adaptive_loss_strictly_decreases_ack_increases(cwnd in 2.5f64..10_000.0) {
            let mut p = CcPolicy::ScalableTcp {
                cwnd,
                ssthresh: 2.0, // force congestion avoidance
                increase_per_ack: SCALABLE_INCREASE_PER_ACK,
                decrease_factor: SCALABLE_DECREASE_FACTOR,
            };
            let before = p.cwnd_packets();
            p.on_event(CcEvent::Ack);
            prop_assert!(p.cwnd_packets() > before);
            let mid = p.cwnd_packets();
            p.on_event(CcEvent::Loss);
            prop_assert!(p.cwnd_packets() < mid);
        }
    }
}
