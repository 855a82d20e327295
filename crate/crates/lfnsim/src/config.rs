//! Declarative scenario configuration: TOML schema, validation, and
//! resolution into the index-based form the simulator runs.
//!
//! Validation happens entirely before any simulation starts and reports
//! field-level messages. The formal field list lives in
//! `docs/scenario-format.md`; the canned scenarios under `scenarios/` are
//! normative examples.

use std::net::Ipv4Addr;
use std::path::Path;

use serde::Deserialize;

use crate::controller::{ControlAction, ControlEvent, Selector, Trigger};
use crate::engine::SimTime;
use crate::net::{FrameFormat, LinkConfig, SwitchConfig};
use crate::policy::{CcPolicy, RouteMatch, RoutePolicyMap};
use crate::transport::{FlowKind, TransportConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    pub mtu: Option<u32>,
    pub transport_header: Option<u32>,
    pub link_overhead: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WanSection {
    pub rate_bps: u64,
    pub one_way_delay_ms: f64,
    pub loss_prob: f64,
    pub queue_limit: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    pub buffer_bytes: u64,
    pub pause_enabled: bool,
    pub egress_rate_bps: Option<u64>,
    pub pause_high_bytes: Option<u64>,
    pub pause_low_bytes: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrunkSection {
    pub name: String,
    pub wan: WanSection,
    pub switch: Option<SwitchSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostSection {
    pub name: String,
    pub addr: Option<String>,
    pub nic_rate_bps: Option<u64>,
    pub nic_queue_limit: Option<usize>,
    pub trunk: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyTemplateSection {
    pub kind: String,
    pub cwnd: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSection {
    pub dst_addr: Option<String>,
    pub dst_addr_lo: Option<String>,
    pub dst_addr_hi: Option<String>,
    pub port: Option<u16>,
    pub port_lo: Option<u16>,
    pub port_hi: Option<u16>,
    pub policy: PolicyTemplateSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub default: Option<PolicyTemplateSection>,
    #[serde(default)]
    pub routes: Vec<RouteSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub dst_port: u16,
    pub volume_bytes: Option<u64>,
    pub demand_bytes_per_sec: Option<u64>,
    pub reuse_connection: Option<bool>,
    pub start_at_s: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetCwndSection {
    pub flow: Option<String>,
    pub host: Option<String>,
    pub value: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    pub set_cwnd: Option<SetCwndSection>,
    pub start_flow: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub at_s: Option<f64>,
    pub on_complete: Option<OneOrMany>,
    pub actions: Vec<ActionSection>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub rto_initial_s: Option<f64>,
    pub rto_min_s: Option<f64>,
    pub rto_max_s: Option<f64>,
    pub rttvar_floor_s: Option<f64>,
    pub dupack_threshold: Option<u32>,
    pub ramp_window_bytes: Option<u64>,
    pub lost_retrans_detection: Option<bool>,
    pub rto_requeues_retransmitted: Option<bool>,
    pub loss_state_pacing: Option<bool>,
}

/// Top-level scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub duration_s: f64,
    pub seed: Option<u64>,
    pub bin_width_s: Option<f64>,
    #[serde(default)]
    pub frame: FrameSection,
    pub wan: Option<WanSection>,
    pub switch: Option<SwitchSection>,
    #[serde(default)]
    pub trunks: Vec<TrunkSection>,
    pub hosts: Vec<HostSection>,
    #[serde(default)]
    pub policy: PolicySection,
    pub flows: Vec<FlowSection>,
    #[serde(default)]
    pub plan: Vec<PlanSection>,
    #[serde(default)]
    pub transport: TransportSection,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedTrunk {
    pub name: String,
    pub wan: LinkConfig,
    pub switch: Option<SwitchConfig>,
}

#[derive(Debug, Clone)]
pub struct ResolvedHost {
    pub name: String,
    pub addr: Ipv4Addr,
    pub nic: LinkConfig,
    pub trunk: usize,
}

#[derive(Debug, Clone)]
pub struct ResolvedFlow {
    pub name: String,
    pub src: usize,
    pub dst: usize,
    pub dst_port: u16,
    pub kind: FlowKind,
    pub reuse_connection: bool,
    pub start_at: Option<SimTime>,
    pub policy: CcPolicy,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub duration: SimTime,
    pub seed: u64,
    pub bin_width: SimTime,
    pub frame: FrameFormat,
    pub transport: TransportConfig,
    pub trunks: Vec<ResolvedTrunk>,
    pub hosts: Vec<ResolvedHost>,
    pub flows: Vec<ResolvedFlow>,
    pub plan: Vec<ControlEvent>,
}

impl Resolved {
    pub fn flow_index(&self, name: &str) -> Option<usize> {
        self.flows.iter().position(|f| f.name == name)
    }

    /// Applies a latency/loss override to every trunk (sweep cells).
    pub fn override_wan(&mut self, one_way: SimTime, loss_prob: f64) {
        for t in &mut self.trunks {
            t.wan.prop_delay = one_way;
            t.wan.loss_prob = loss_prob;
        }
    }

    pub fn set_all_reuse(&mut self, reuse: bool) {
        for f in &mut self.flows {
            f.reuse_connection = reuse;
        }
    }
}

fn parse_addr(field: &str, s: &str) -> Result<Ipv4Addr, ConfigError> {
    s.parse()
        .map_err(|_| invalid(field, format!("not an IPv4 address: {s}")))
}

fn template_policy(field: &str, t: &PolicyTemplateSection) -> Result<CcPolicy, ConfigError> {
    match t.kind.as_str() {
        "fixed" => {
            let cwnd = t.cwnd.ok_or_else(|| {
                invalid(field, "fixed policy requires a cwnd value (packets)")
            })?;
            if cwnd < 0.0 || cwnd.fract() != 0.0 {
                return Err(invalid(field, "fixed cwnd must be a whole packet count"));
            }
            Ok(CcPolicy::fixed(cwnd as u32))
        }
        "scalable" => Ok(CcPolicy::scalable(t.cwnd.unwrap_or(10.0))),
        "reno" => Ok(CcPolicy::Reno {
            cwnd: t.cwnd.unwrap_or(10.0),
            ssthresh: f64::INFINITY,
        }),
        other => Err(invalid(
            field,
            format!("unknown policy kind {other:?} (expected fixed, scalable or reno)"),
        )),
    }
}

fn check_prob(field: &str, p: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(invalid(field, format!("probability out of [0,1]: {p}")));
    }
    Ok(())
}

fn resolve_wan(field: &str, w: &WanSection) -> Result<LinkConfig, ConfigError> {
    if w.rate_bps == 0 {
        return Err(invalid(field, "rate_bps must be positive"));
    }
    if w.one_way_delay_ms < 0.0 {
        return Err(invalid(field, "one_way_delay_ms must be non-negative"));
    }
    check_prob(&format!("{field}.loss_prob"), w.loss_prob)?;
    Ok(LinkConfig {
        rate_bps: w.rate_bps,
        prop_delay: SimTime::from_secs_f64(w.one_way_delay_ms / 1e3),
        loss_prob: w.loss_prob,
        queue_limit: w.queue_limit.unwrap_or(50_000),
    })
}

/// Validates the scenario and resolves names to indices. Reports the first
/// problem found with a field-qualified message.
pub fn resolve(file: &ScenarioFile) -> Result<Resolved, ConfigError> {
    if file.duration_s < 0.0 || !file.duration_s.is_finite() {
        return Err(invalid("duration_s", "must be a non-negative number"));
    }
    let bin_width_s = file.bin_width_s.unwrap_or(0.1);
    if bin_width_s <= 0.0 {
        return Err(invalid("bin_width_s", "must be positive"));
    }

    let frame = FrameFormat {
        mtu: file.frame.mtu.unwrap_or(1500),
        transport_header: file.frame.transport_header.unwrap_or(52),
        link_overhead: file.frame.link_overhead.unwrap_or(38),
    };
    if frame.transport_header >= frame.mtu {
        return Err(invalid("frame", "transport_header must be below mtu"));
    }

    let t = &file.transport;
    let transport = TransportConfig {
        rto_initial: t
            .rto_initial_s
            .map(SimTime::from_secs_f64)
            .unwrap_or(TransportConfig::default().rto_initial),
        rto_min: t
            .rto_min_s
            .map(SimTime::from_secs_f64)
            .unwrap_or(TransportConfig::default().rto_min),
        rto_max: t
            .rto_max_s
            .map(SimTime::from_secs_f64)
            .unwrap_or(TransportConfig::default().rto_max),
        rttvar_floor: t
            .rttvar_floor_s
            .map(SimTime::from_secs_f64)
            .unwrap_or(TransportConfig::default().rttvar_floor),
        dupack_threshold: t.dupack_threshold.unwrap_or(3),
        ramp_window: t.ramp_window_bytes.unwrap_or(65_535),
        lost_retrans_detection: t.lost_retrans_detection.unwrap_or(true),
        rto_requeues_retransmitted: t.rto_requeues_retransmitted.unwrap_or(true),
        loss_state_pacing: t.loss_state_pacing.unwrap_or(true),
    };

    // trunks: explicit list, or the [wan]/[switch] single-trunk sugar
    let mut trunk_sections: Vec<TrunkSection> = file.trunks.clone();
    if let Some(wan) = &file.wan {
        trunk_sections.insert(
            0,
            TrunkSection {
                name: "wan".to_string(),
                wan: wan.clone(),
                switch: file.switch.clone(),
            },
        );
    }
    if trunk_sections.is_empty() {
        return Err(invalid("wan", "scenario needs a [wan] table or [[trunks]]"));
    }

    let mut trunks = Vec::new();
    for (i, ts) in trunk_sections.iter().enumerate() {
        let field = format!("trunks[{i}] ({})", ts.name);
        let wan = resolve_wan(&field, &ts.wan)?;
        let switch = match &ts.switch {
            None => None,
            Some(s) => {
                if s.buffer_bytes == 0 {
                    return Err(invalid(&field, "switch buffer_bytes must be positive"));
                }
                let egress = s.egress_rate_bps.unwrap_or(wan.rate_bps);
                // watermark defaults are filled in once the port count is known
                Some(SwitchConfig {
                    buffer_bytes: s.buffer_bytes,
                    pause_enabled: s.pause_enabled,
                    pause_high: s.pause_high_bytes.unwrap_or(0),
                    pause_low: s.pause_low_bytes.unwrap_or(0),
                    egress_rate_bps: egress,
                })
            }
        };
        trunks.push(ResolvedTrunk {
            name: ts.name.clone(),
            wan,
            switch,
        });
    }

    let mut hosts = Vec::new();
    for (i, hs) in file.hosts.iter().enumerate() {
        let field = format!("hosts[{i}] ({})", hs.name);
        if hosts.iter().any(|h: &ResolvedHost| h.name == hs.name) {
            return Err(invalid(&field, "duplicate host name"));
        }
        let trunk = match &hs.trunk {
            None => 0,
            Some(name) => trunks
                .iter()
                .position(|t| &t.name == name)
                .ok_or_else(|| invalid(&field, format!("unknown trunk {name:?}")))?,
        };
        let addr = match &hs.addr {
            Some(a) => parse_addr(&format!("{field}.addr"), a)?,
            None => Ipv4Addr::new(10, 0, 0, (i + 1) as u8),
        };
        let nic_rate = hs.nic_rate_bps.unwrap_or(trunks[trunk].wan.rate_bps);
        if nic_rate == 0 {
            return Err(invalid(&field, "nic_rate_bps must be positive"));
        }
        hosts.push(ResolvedHost {
            name: hs.name.clone(),
            addr,
            nic: LinkConfig {
                rate_bps: nic_rate,
                prop_delay: SimTime::ZERO,
                loss_prob: 0.0,
                queue_limit: hs.nic_queue_limit.unwrap_or(50_000),
            },
            trunk,
        });
    }
    if hosts.iter().map(|h| h.addr).collect::<std::collections::BTreeSet<_>>().len()
        != hosts.len()
    {
        return Err(invalid("hosts", "host addresses must be unique"));
    }

    // per-destination policy table
    let default_policy = match &file.policy.default {
        Some(t) => template_policy("policy.default", t)?,
        None => CcPolicy::scalable(10.0),
    };
    let mut map = RoutePolicyMap::new(default_policy);
    for (i, r) in file.policy.routes.iter().enumerate() {
        let field = format!("policy.routes[{i}]");
        let (lo, hi) = match (&r.dst_addr, &r.dst_addr_lo, &r.dst_addr_hi) {
            (Some(a), None, None) => {
                let a = parse_addr(&field, a)?;
                (a, a)
            }
            (None, Some(lo), Some(hi)) => (parse_addr(&field, lo)?, parse_addr(&field, hi)?),
            _ => {
                return Err(invalid(
                    &field,
                    "give either dst_addr or both dst_addr_lo and dst_addr_hi",
                ))
            }
        };
        let (plo, phi) = match (r.port, r.port_lo, r.port_hi) {
            (Some(p), None, None) => (p, p),
            (None, Some(a), Some(b)) => (a, b),
            (None, None, None) => (0, u16::MAX),
            _ => {
                return Err(invalid(
                    &field,
                    "give either port or both port_lo and port_hi",
                ))
            }
        };
        if u32::from(lo) > u32::from(hi) || plo > phi {
            return Err(invalid(&field, "range lower bound above upper bound"));
        }
        let policy = template_policy(&format!("{field}.policy"), &r.policy)?;
        map.entries.push((
            RouteMatch {
                addr_lo: lo,
                addr_hi: hi,
                port_lo: plo,
                port_hi: phi,
            },
            policy,
        ));
    }

    let mut flows = Vec::new();
    for (i, fs) in file.flows.iter().enumerate() {
        let field = format!("flows[{i}] ({})", fs.id);
        if flows.iter().any(|f: &ResolvedFlow| f.name == fs.id) {
            return Err(invalid(&field, "duplicate flow id"));
        }
        let src = hosts
            .iter()
            .position(|h| h.name == fs.src)
            .ok_or_else(|| invalid(&field, format!("unknown src host {:?}", fs.src)))?;
        let dst = hosts
            .iter()
            .position(|h| h.name == fs.dst)
            .ok_or_else(|| invalid(&field, format!("unknown dst host {:?}", fs.dst)))?;
        if src == dst {
            return Err(invalid(&field, "src and dst must differ"));
        }
        let kind = match (fs.volume_bytes, fs.demand_bytes_per_sec) {
            (Some(v), None) => {
                if v == 0 {
                    return Err(invalid(&field, "volume_bytes must be positive"));
                }
                FlowKind::Volume(v)
            }
            (None, Some(d)) => {
                if d == 0 {
                    return Err(invalid(&field, "demand_bytes_per_sec must be positive"));
                }
                FlowKind::Demand(d)
            }
            _ => {
                return Err(invalid(
                    &field,
                    "exactly one of volume_bytes / demand_bytes_per_sec must be set",
                ))
            }
        };
        let policy = map.classify(hosts[dst].addr, fs.dst_port).clone();
        flows.push(ResolvedFlow {
            name: fs.id.clone(),
            src,
            dst,
            dst_port: fs.dst_port,
            kind,
            reuse_connection: fs.reuse_connection.unwrap_or(false),
            start_at: fs.start_at_s.map(SimTime::from_secs_f64),
            policy,
        });
    }

    // control plan
    let mut plan = Vec::new();
    let mut started_by_plan = vec![false; flows.len()];
    for (i, ps) in file.plan.iter().enumerate() {
        let field = format!("plan[{i}]");
        let trigger = match (&ps.at_s, &ps.on_complete) {
            (Some(t), None) => Trigger::At(SimTime::from_secs_f64(*t)),
            (None, Some(names)) => {
                let names = names.clone().into_vec();
                for n in &names {
                    let idx = flows
                        .iter()
                        .position(|f| &f.name == n)
                        .ok_or_else(|| invalid(&field, format!("unknown flow {n:?}")))?;
                    if !matches!(flows[idx].kind, FlowKind::Volume(_)) {
                        return Err(invalid(
                            &field,
                            format!("flow {n:?} never completes (continuous demand)"),
                        ));
                    }
                }
                Trigger::FlowsComplete(names)
            }
            _ => {
                return Err(invalid(
                    &field,
                    "give exactly one of at_s / on_complete",
                ))
            }
        };
        let mut actions = Vec::new();
        for (j, a) in ps.actions.iter().enumerate() {
            let afield = format!("{field}.actions[{j}]");
            match (&a.set_cwnd, &a.start_flow) {
                (Some(sc), None) => {
                    let selector = match (&sc.flow, &sc.host) {
                        (Some(f), None) => Selector::Flow(f.clone()),
                        (None, Some(h)) => Selector::Host(h.clone()),
                        _ => {
                            return Err(invalid(
                                &afield,
                                "set_cwnd needs exactly one of flow / host",
                            ))
                        }
                    };
                    // the selector must resolve to fixed-window flows only
                    let matched: Vec<&ResolvedFlow> = match &selector {
                        Selector::Flow(name) => {
                            let f = flows
                                .iter()
                                .find(|f| &f.name == name)
                                .ok_or_else(|| {
                                    invalid(&afield, format!("unknown flow {name:?}"))
                                })?;
                            vec![f]
                        }
                        Selector::Host(name) => {
                            let h = hosts
                                .iter()
                                .position(|h| &h.name == name)
                                .ok_or_else(|| {
                                    invalid(&afield, format!("unknown host {name:?}"))
                                })?;
                            flows.iter().filter(|f| f.src == h).collect()
                        }
                    };
                    for f in matched {
                        if !f.policy.is_fixed() {
                            return Err(invalid(
                                &afield,
                                format!(
                                    "set_cwnd would override adaptive policy on flow {:?}",
                                    f.name
                                ),
                            ));
                        }
                    }
                    actions.push(ControlAction::SetCwnd {
                        selector,
                        value: sc.value,
                    });
                }
                (None, Some(name)) => {
                    let idx = flows
                        .iter()
                        .position(|f| &f.name == name)
                        .ok_or_else(|| invalid(&afield, format!("unknown flow {name:?}")))?;
                    if flows[idx].start_at.is_some() {
                        return Err(invalid(
                            &afield,
                            format!("flow {name:?} already has start_at_s"),
                        ));
                    }
                    if started_by_plan[idx] {
                        return Err(invalid(
                            &afield,
                            format!("flow {name:?} started twice by the plan"),
                        ));
                    }
                    started_by_plan[idx] = true;
                    actions.push(ControlAction::StartFlow { flow: name.clone() });
                }
                _ => {
                    return Err(invalid(
                        &afield,
                        "give exactly one of set_cwnd / start_flow",
                    ))
                }
            }
        }
        plan.push(ControlEvent { trigger, actions });
    }

    for (i, f) in flows.iter().enumerate() {
        if f.start_at.is_none() && !started_by_plan[i] {
            return Err(invalid(
                &format!("flows ({})", f.name),
                "flow has no start_at_s and no start_flow plan action",
            ));
        }
    }

    Ok(Resolved {
        name: file
            .name
            .clone()
            .unwrap_or_else(|| "scenario".to_string()),
        duration: SimTime::from_secs_f64(file.duration_s),
        seed: file.seed.unwrap_or(1),
        bin_width: SimTime::from_secs_f64(bin_width_s),
        frame,
        transport,
        trunks,
        hosts,
        flows,
        plan,
    })
}

pub fn load_and_resolve(path: &Path) -> Result<Resolved, ConfigError> {
    resolve(&ScenarioFile::load(path)?)
}
