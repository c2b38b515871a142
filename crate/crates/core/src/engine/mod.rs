//! Per-node HoPP logic: prefix advertisement and DODAG maintenance, the
//! name advertisement daemon with its NAM cache, hop-wise replication,
//! subscriptions and topic queries.

mod config;
mod dodag;
mod nam_cache;
mod topics;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde_json::{json, Value};

pub use config::HoppConfig;
pub use dodag::{DodagState, Uplink};
pub use nam_cache::{NamCache, NcEntry, NcState};
pub use topics::TopicIndex;

use crate::forwarder::{DataOutcome, FaceId, Forwarder, InterestOutcome, Route};
use crate::ndn::{codec, Data, Interest, Nam, Name, Packet, Pam};
use crate::sim::{Command, Ctx, Dest, Protocol};
use crate::time::SimTime;
use crate::trace::TraceKind;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub enum HoppTimer {
    Beacon { dodag: usize, token: u32 },
    ParentWatch { dodag: usize },
    Solicit { dodag: usize, token: u32 },
    SolicitReply { dodag: usize, to: NodeId },
    Nam { name: Name, token: u32 },
    Refresh { name: Name, token: u32 },
}

type Cx<'a> = Ctx<'a, HoppTimer>;

#[derive(Debug, Clone)]
struct Membership {
    state: DodagState,
    beacon_token: u32,
    solicit_token: u32,
    solicit_round: u32,
    soliciting: bool,
    watch_armed: bool,
}

impl Membership {
    fn new(state: DodagState) -> Self {
        Membership {
            state,
            beacon_token: 0,
            solicit_token: 0,
            solicit_round: 0,
            soliciting: false,
            watch_armed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Snapshot {
    parent: Option<NodeId>,
    rank: Option<u8>,
    version: u16,
    routes: Vec<Route>,
}

#[derive(Debug, Clone)]
struct Subscription {
    lifetime_ms: u32,
    refresh: bool,
    token: u32,
}

/// One HoPP node: NDN forwarder plus control plane.
#[derive(Debug, Clone)]
pub struct HoppNode {
    id: NodeId,
    cfg: HoppConfig,
    pub fwd: Forwarder,
    dodags: Vec<Membership>,
    owned: Vec<Name>,
    nc: NamCache,
    topics: TopicIndex,
    stored: BTreeSet<Name>,
    subs: BTreeMap<Name, Subscription>,
    queries: BTreeMap<Name, Name>,
    topic_results: BTreeMap<Name, Vec<Name>>,
    delivered: Vec<Name>,
    /// Last beacon a neighbor could have heard.
    last_beacon: Option<SimTime>,
    linkless: bool,
}

impl HoppNode {
    /// `owned` lists the prefixes this node serves as content proxy.
    pub fn new(id: NodeId, cfg: HoppConfig, owned: Vec<Name>) -> Self {
        let cs_capacity = if owned.is_empty() { cfg.cs_capacity } else { cfg.cp_cs_capacity };
        let mut fwd = Forwarder::new(cs_capacity, cfg.pit_capacity);
        for p in &owned {
            fwd.add_local_prefix(p.clone());
        }
        let dodags = owned
            .iter()
            .map(|p| Membership::new(DodagState::root(p.clone(), id, 1)))
            .collect();
        HoppNode {
            id,
            nc: NamCache::new(cfg.nc_capacity),
            cfg,
            fwd,
            dodags,
            owned,
            topics: TopicIndex::default(),
            stored: BTreeSet::new(),
            subs: BTreeMap::new(),
            queries: BTreeMap::new(),
            topic_results: BTreeMap::new(),
            delivered: Vec::new(),
            last_beacon: None,
            linkless: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &HoppConfig {
        &self.cfg
    }

    pub fn is_cp(&self) -> bool {
        !self.owned.is_empty()
    }

    pub fn dodag(&self, prefix: &Name) -> Option<&DodagState> {
        self.dodags.iter().map(|m| &m.state).find(|d| &d.prefix == prefix)
    }

    pub fn dodags(&self) -> impl Iterator<Item = &DodagState> {
        self.dodags.iter().map(|m| &m.state)
    }

    pub fn nam_cache(&self) -> &NamCache {
        &self.nc
    }

    pub fn topic_index(&self) -> &TopicIndex {
        &self.topics
    }

    /// Names learned from topic replies, by topic.
    pub fn topic_results(&self) -> &BTreeMap<Name, Vec<Name>> {
        &self.topic_results
    }

    /// Content delivered to local subscriptions, in arrival order.
    pub fn delivered(&self) -> &[Name] {
        &self.delivered
    }

    pub fn stored(&self) -> &BTreeSet<Name> {
        &self.stored
    }

    fn owns(&self, name: &Name) -> bool {
        self.owned.iter().any(|p| p.is_prefix_of(name))
    }

    /// Prefix under which `name` is replicated: the longest known DODAG
    /// prefix, else the first name component.
    fn prefix_for(&self, name: &Name) -> Name {
        self.dodags
            .iter()
            .map(|m| &m.state.prefix)
            .filter(|p| p.is_prefix_of(name))
            .max_by_key(|p| p.len())
            .cloned()
            .unwrap_or_else(|| Name::from_components(name.components().iter().take(1).cloned()).unwrap_or_default())
    }

    fn dodag_index(&self, prefix: &Name) -> Option<usize> {
        self.dodags.iter().position(|m| &m.state.prefix == prefix)
    }

    fn rank_for(&self, name: &Name) -> Option<u8> {
        let prefix = self.prefix_for(name);
        self.dodag(&prefix).and_then(|d| d.my_rank)
    }

    fn jittered_pam(&self, ctx: &mut Cx<'_>) -> SimTime {
        let j = self.cfg.pam_jitter;
        let k = if j > 0.0 { ctx.rng().gen_range(1.0 - j..1.0 + j) } else { 1.0 };
        SimTime::from_ms_f64(self.cfg.pam_t_ms * k)
    }

    fn nam_delay(&self, ctx: &mut Cx<'_>) -> SimTime {
        SimTime::from_ms_f64(ctx.rng().gen_range(self.cfg.nam_t_min_ms..self.cfg.nam_t_max_ms))
    }

    /// Free protected slots, counting NAM cache entries still waiting for
    /// their content.
    fn can_admit(&self) -> bool {
        let reserved = self.nc.iter().filter(|e| !self.fwd.cs.contains(&e.name)).count();
        !self.nc.is_full() && self.fwd.cs.protected_count() + reserved < self.fwd.cs.capacity()
    }

    // ---- transmission helpers -------------------------------------------

    fn send_interest(&self, ctx: &mut Cx<'_>, to: NodeId, interest: Interest) {
        ctx.trace(
            TraceKind::IntTx,
            Some(&interest.name),
            [
                ("peer", json!(to)),
                ("nonce", json!(interest.nonce)),
                ("lifetime_ms", json!(interest.lifetime_ms)),
            ],
        );
        ctx.send(Dest::Unicast(to), interest);
    }

    fn send_data(&self, ctx: &mut Cx<'_>, to: NodeId, data: Data) {
        ctx.trace(TraceKind::DataTx, Some(&data.name), [("peer", json!(to))]);
        ctx.send(Dest::Unicast(to), data);
    }

    fn trace_drop(&self, ctx: &mut Cx<'_>, name: Option<&Name>, reason: &str) {
        ctx.trace(TraceKind::Drop, name, [("reason", json!(reason))]);
    }

    // ---- DODAG ------------------------------------------------------------

    fn snapshot(&self, idx: usize) -> Snapshot {
        let d = &self.dodags[idx].state;
        Snapshot {
            parent: d.parent_id(),
            rank: d.my_rank,
            version: d.version,
            routes: d.routes(),
        }
    }

    /// Applies the consequences of a DODAG mutation: FIB sync, tracing,
    /// beacon rescheduling, failure handling and NAM re-dispatch.
    fn after_dodag_change(&mut self, ctx: &mut Cx<'_>, idx: usize, before: Snapshot, reset: bool) {
        let after = self.snapshot(idx);
        let prefix = self.dodags[idx].state.prefix.clone();
        if after.routes != before.routes {
            self.fwd.fib.set_routes(prefix.clone(), after.routes.clone());
        }
        let parent_changed = after.parent != before.parent;
        let rank_changed = after.rank != before.rank || after.version != before.version;
        if !(parent_changed || rank_changed || reset) {
            return;
        }
        let parent_rank = self.dodags[idx].state.parent.as_ref().map(|p| p.rank);
        ctx.trace(
            TraceKind::ParentSet,
            Some(&prefix),
            [
                ("parent", json!(after.parent)),
                ("parent_rank", json!(parent_rank)),
                ("rank", json!(after.rank)),
                ("version", json!(after.version)),
                ("fib_len", json!(self.fwd.fib.len())),
                ("reset", json!(reset)),
            ],
        );
        if after.rank.is_some() && (parent_changed || rank_changed) {
            let m = &mut self.dodags[idx];
            m.beacon_token = m.beacon_token.wrapping_add(1);
            let token = m.beacon_token;
            let at = ctx.now + self.jittered_pam(ctx);
            ctx.set_timer(at, HoppTimer::Beacon { dodag: idx, token });
        }
        if after.parent.is_some() {
            let m = &mut self.dodags[idx];
            m.soliciting = false;
            m.solicit_token = m.solicit_token.wrapping_add(1);
            if !m.watch_armed {
                m.watch_armed = true;
                let at = ctx.now + SimTime::from_ms_f64(self.cfg.parent_timeout_ms());
                ctx.set_timer(at, HoppTimer::ParentWatch { dodag: idx });
            }
            if parent_changed {
                self.redispatch(ctx, &prefix);
            }
        } else if !self.dodags[idx].state.is_root {
            self.start_soliciting(ctx, idx);
        }
    }

    fn dodag_for_pam(&mut self, pam: &Pam) -> Option<usize> {
        if let Some(i) = self.dodag_index(&pam.prefix) {
            return Some(i);
        }
        if self.owns(&pam.prefix) || pam.prefix.is_empty() {
            return None;
        }
        let timeout = SimTime::from_ms_f64(self.cfg.parent_timeout_ms());
        self.dodags.push(Membership::new(DodagState::new(
            pam.prefix.clone(),
            pam.cp_id,
            pam.version,
            timeout,
        )));
        Some(self.dodags.len() - 1)
    }

    fn on_pam(&mut self, ctx: &mut Cx<'_>, from: NodeId, quality: f64, pam: Pam) {
        if ctx.wants(TraceKind::PamRx) {
            ctx.trace(
                TraceKind::PamRx,
                Some(&pam.prefix),
                [("peer", json!(from)), ("rank", json!(pam.rank)), ("version", json!(pam.version))],
            );
        }
        if pam.is_solicitation() {
            self.on_solicitation(ctx, from, &pam);
            return;
        }
        let Some(idx) = self.dodag_for_pam(&pam) else { return };
        let before = self.snapshot(idx);
        self.dodags[idx].state.on_pam(from, &pam, quality, ctx.now);
        self.after_dodag_change(ctx, idx, before, false);
    }

    fn on_solicitation(&mut self, ctx: &mut Cx<'_>, from: NodeId, pam: &Pam) {
        for idx in 0..self.dodags.len() {
            let d = &self.dodags[idx].state;
            if d.my_rank.is_none() || !(pam.prefix.is_empty() || pam.prefix == d.prefix) {
                continue;
            }
            let jitter = if self.cfg.solicit_jitter_ms > 0.0 {
                ctx.rng().gen_range(0.0..self.cfg.solicit_jitter_ms)
            } else {
                0.0
            };
            let at = ctx.now + SimTime::from_ms_f64(jitter);
            ctx.set_timer(at, HoppTimer::SolicitReply { dodag: idx, to: from });
        }
    }

    fn beacon(&mut self, ctx: &mut Cx<'_>, idx: usize) {
        let m = &self.dodags[idx];
        let Some(pam) = m.state.advertisement() else { return };
        let root = m.state.is_root;
        let token = m.beacon_token;
        ctx.trace(
            TraceKind::PamTx,
            Some(&pam.prefix),
            [("rank", json!(pam.rank)), ("version", json!(pam.version)), ("cp", json!(root))],
        );
        ctx.send(Dest::Broadcast, pam);
        if !self.linkless {
            self.last_beacon = Some(ctx.now);
        }
        let at = ctx.now + self.jittered_pam(ctx);
        ctx.set_timer(at, HoppTimer::Beacon { dodag: idx, token });
    }

    fn start_soliciting(&mut self, ctx: &mut Cx<'_>, idx: usize) {
        let m = &mut self.dodags[idx];
        if m.soliciting {
            return;
        }
        m.soliciting = true;
        m.solicit_round = 0;
        m.solicit_token = m.solicit_token.wrapping_add(1);
        let token = m.solicit_token;
        let at = m.state.holddown_until.max(ctx.now);
        if at > ctx.now {
            ctx.set_timer(at, HoppTimer::Solicit { dodag: idx, token });
        } else {
            self.solicit_now(ctx, idx);
        }
    }

    fn solicit_now(&mut self, ctx: &mut Cx<'_>, idx: usize) {
        let delay = self.cfg.backoff_ms(self.dodags[idx].solicit_round);
        let m = &mut self.dodags[idx];
        m.solicit_round += 1;
        m.solicit_token = m.solicit_token.wrapping_add(1);
        let token = m.solicit_token;
        let pam = Pam::solicitation(m.state.prefix.clone());
        ctx.trace(TraceKind::Solicit, Some(&pam.prefix), []);
        ctx.send(Dest::Broadcast, pam);
        ctx.set_timer(ctx.now + SimTime::from_ms_f64(delay), HoppTimer::Solicit { dodag: idx, token });
    }

    fn reset_dodags(&mut self, ctx: &mut Cx<'_>) {
        let holddown = match self.last_beacon {
            Some(t) => t + SimTime::from_ms_f64(self.cfg.parent_timeout_ms() + self.cfg.pam_t_ms),
            None => SimTime::ZERO,
        };
        for idx in 0..self.dodags.len() {
            let m = &mut self.dodags[idx];
            m.watch_armed = false;
            m.soliciting = false;
            m.beacon_token = m.beacon_token.wrapping_add(1);
            if m.state.is_root {
                continue;
            }
            let before = self.snapshot(idx);
            self.dodags[idx].state.reset(holddown);
            self.after_dodag_change(ctx, idx, before, true);
        }
    }

    // ---- NAM daemon ---------------------------------------------------------

    /// Re-dispatches entries that were parked, backing off, or waiting on
    /// an uplink that is no longer routed.
    fn redispatch(&mut self, ctx: &mut Cx<'_>, prefix: &Name) {
        let routed: BTreeSet<NodeId> = self
            .fwd
            .fib
            .entry(prefix)
            .map(|e| e.routes.iter().filter_map(|r| r.face.neighbor()).collect())
            .unwrap_or_default();
        let names: Vec<Name> = self
            .nc
            .iter()
            .filter(|e| &e.prefix == prefix)
            .filter(|e| match e.state {
                NcState::WaitingDispatch => e.is_parked(),
                NcState::Retrying => true,
                NcState::AwaitingPull => e.target.is_none_or(|t| !routed.contains(&t)),
            })
            .map(|e| e.name.clone())
            .collect();
        for name in names {
            let at = ctx.now + self.nam_delay(ctx);
            if let Some(e) = self.nc.get_mut(&name) {
                e.restart();
                let token = e.arm(NcState::WaitingDispatch, at);
                ctx.set_timer(at, HoppTimer::Nam { name, token });
            }
        }
    }

    fn uplinks(&self, prefix: &Name) -> Vec<NodeId> {
        self.fwd
            .fib
            .entry(prefix)
            .map(|e| e.routes.iter().filter_map(|r| r.face.neighbor()).collect())
            .unwrap_or_default()
    }

    fn on_nam_timer(&mut self, ctx: &mut Cx<'_>, name: Name, token: u32) {
        let Some(e) = self.nc.get(&name) else { return };
        if e.token != token {
            return;
        }
        if !self.fwd.cs.contains(&name) && !self.fwd.pull_pending(&name, ctx.now) {
            // Custody never arrived; the downstream still holds the content.
            self.nc.remove(&name);
            self.trace_drop(ctx, Some(&name), "orphan");
            return;
        }
        match e.state {
            NcState::WaitingDispatch | NcState::Retrying => self.dispatch(ctx, &name),
            NcState::AwaitingPull => self.pull_timeout(ctx, &name),
        }
    }

    fn dispatch(&mut self, ctx: &mut Cx<'_>, name: &Name) {
        let Some(e) = self.nc.get(name) else { return };
        let uplinks = self.uplinks(&e.prefix);
        let target = uplinks.iter().copied().find(|t| !e.tried.contains(t));
        match target {
            Some(to) => self.send_nam(ctx, name, to),
            None if uplinks.is_empty() && e.advertised.is_empty() && e.overflow == 0 => {
                if let Some(e) = self.nc.get_mut(name) {
                    e.park();
                }
            }
            None => {
                let delay = self.cfg.backoff_ms(e.overflow);
                let prefix = e.prefix.clone();
                let round = e.overflow;
                let at = ctx.now + SimTime::from_ms_f64(delay);
                let Some(e) = self.nc.get_mut(name) else { return };
                e.overflow += 1;
                e.tried.clear();
                e.attempts = 0;
                e.target = None;
                let token = e.arm(NcState::Retrying, at);
                ctx.trace(
                    TraceKind::Backoff,
                    Some(name),
                    [("delay_ms", json!(delay)), ("round", json!(round))],
                );
                ctx.set_timer(at, HoppTimer::Nam { name: name.clone(), token });
                if let Some(idx) = self.dodag_index(&prefix) {
                    if self.dodags[idx].soliciting {
                        self.solicit_now(ctx, idx);
                    } else {
                        self.start_soliciting(ctx, idx);
                    }
                }
            }
        }
    }

    fn send_nam(&mut self, ctx: &mut Cx<'_>, name: &Name, to: NodeId) {
        let at = ctx.now + SimTime::from_ms_f64(self.cfg.pull_timeout_ms);
        let Some(e) = self.nc.get_mut(name) else { return };
        e.target = Some(to);
        e.advertised.insert(to);
        let token = e.arm(NcState::AwaitingPull, at);
        let nam = Nam {
            name: name.clone(),
            prefix: e.prefix.clone(),
        };
        let attempt = e.attempts;
        ctx.trace(TraceKind::NamTx, Some(name), [("peer", json!(to)), ("attempt", json!(attempt))]);
        ctx.send(Dest::Unicast(to), nam);
        ctx.set_timer(at, HoppTimer::Nam { name: name.clone(), token });
    }

    fn pull_timeout(&mut self, ctx: &mut Cx<'_>, name: &Name) {
        let Some(e) = self.nc.get(name) else { return };
        let uplinks = self.uplinks(&e.prefix);
        let Some(e) = self.nc.get_mut(name) else { return };
        e.attempts += 1;
        match e.target {
            Some(t) if e.attempts <= self.cfg.max_nam_retries && uplinks.contains(&t) => {
                self.send_nam(ctx, name, t);
            }
            target => {
                if let Some(t) = target {
                    e.tried.insert(t);
                }
                e.attempts = 0;
                self.dispatch(ctx, name);
            }
        }
    }

    fn pull(&mut self, ctx: &mut Cx<'_>, from: NodeId, name: &Name) -> bool {
        let nonce = ctx.rng().gen();
        match self.fwd.pull(name, nonce, self.cfg.pull_lifetime_ms, ctx.now) {
            Ok(interest) => {
                self.send_interest(ctx, from, interest);
                true
            }
            Err(reason) => {
                ctx.trace(
                    TraceKind::Backpressure,
                    Some(name),
                    [("peer", json!(from)), ("reason", json!(reason.as_str()))],
                );
                false
            }
        }
    }

    fn on_nam(&mut self, ctx: &mut Cx<'_>, from: NodeId, nam: Nam) {
        ctx.trace(TraceKind::NamRx, Some(&nam.name), [("peer", json!(from))]);
        let name = nam.name;
        if self.owns(&name) {
            if !self.fwd.cs.contains(&name) {
                self.pull(ctx, from, &name);
            }
            return;
        }
        if self.nc.contains(&name) {
            // A repeated advertisement means our earlier pull got lost.
            if !self.fwd.cs.contains(&name) && !self.fwd.pull_pending(&name, ctx.now) {
                self.pull(ctx, from, &name);
            }
            return;
        }
        if !self.can_admit() {
            ctx.trace(
                TraceKind::Backpressure,
                Some(&name),
                [("peer", json!(from)), ("nc", json!(self.nc.len()))],
            );
            return;
        }
        if self.fwd.cs.contains(&name) {
            // Already held: no second pull, but take custody upstream.
            self.fwd.cs.set_protected(&name, true);
        } else if !self.pull(ctx, from, &name) {
            return;
        }
        let prefix = if nam.prefix.is_empty() { self.prefix_for(&name) } else { nam.prefix };
        let mut entry = NcEntry::new(name.clone(), prefix, ctx.now);
        let at = ctx.now + self.nam_delay(ctx);
        let token = entry.arm(NcState::WaitingDispatch, at);
        self.nc.insert(entry);
        ctx.set_timer(at, HoppTimer::Nam { name, token });
    }

    fn release(&mut self, ctx: &mut Cx<'_>, name: &Name, to: NodeId) {
        let freed = self.nc.get(name).is_some_and(|e| e.advertised.contains(&to));
        if freed {
            self.nc.remove(name);
            self.fwd.cs.set_protected(name, false);
            ctx.trace(TraceKind::NcFree, Some(name), [("peer", json!(to))]);
        }
    }

    // ---- data plane -----------------------------------------------------------

    fn on_interest(&mut self, ctx: &mut Cx<'_>, from: NodeId, interest: Interest) {
        ctx.trace(
            TraceKind::IntRx,
            Some(&interest.name),
            [("peer", json!(from)), ("nonce", json!(interest.nonce))],
        );
        if let Some(topic) = interest.name.queried_topic() {
            if self.owns(&topic) {
                let reply = self.topics.reply(&interest.name, &topic);
                self.send_data(ctx, from, reply);
                return;
            }
        }
        let name = &interest.name;
        if self.nc.contains(name) && !self.fwd.cs.contains(name) && !self.fwd.pull_pending(name, ctx.now) {
            self.trace_drop(ctx, Some(name), "not_held");
            return;
        }
        match self.fwd.process_interest(FaceId::Link(from), &interest, ctx.now) {
            InterestOutcome::Satisfied(data) => self.send_data(ctx, from, data),
            InterestOutcome::Forwarded { face: FaceId::Link(to), interest } => self.send_interest(ctx, to, interest),
            InterestOutcome::Forwarded { face: FaceId::App, .. } | InterestOutcome::Aggregated | InterestOutcome::Held => {}
            InterestOutcome::Dropped(reason) => self.trace_drop(ctx, Some(name), reason.as_str()),
        }
    }

    fn on_data(&mut self, ctx: &mut Cx<'_>, from: NodeId, data: Data) {
        let at_cp = self.owns(&data.name) && !data.name.is_topic_query();
        let protect = !at_cp && self.nc.contains(&data.name);
        ctx.trace(
            TraceKind::DataRx,
            Some(&data.name),
            [("peer", json!(from)), ("custody", json!(protect))],
        );
        match self.fwd.process_data(FaceId::Link(from), &data, ctx.now, protect) {
            DataOutcome::Dropped(reason) => self.trace_drop(ctx, Some(&data.name), reason.as_str()),
            DataOutcome::Satisfied { faces, cs } => {
                match cs {
                    Ok(Some(evicted)) => ctx.trace(TraceKind::CsEvict, Some(&evicted), []),
                    Ok(None) => {}
                    Err(_) => ctx.trace(TraceKind::CsFull, Some(&data.name), [("protected", json!(protect))]),
                }
                if at_cp && self.stored.insert(data.name.clone()) {
                    for t in &data.meta_topics {
                        self.topics.add(t.clone(), data.name.clone());
                    }
                    ctx.trace(TraceKind::StoredAtCP, Some(&data.name), [("peer", json!(from))]);
                }
                for face in faces {
                    match face {
                        FaceId::App => self.deliver_local(ctx, &data),
                        FaceId::Link(to) => self.send_data(ctx, to, data.clone()),
                    }
                }
            }
        }
    }

    fn deliver_local(&mut self, ctx: &mut Cx<'_>, data: &Data) {
        if self.subs.remove(&data.name).is_some() {
            self.delivered.push(data.name.clone());
            ctx.trace(TraceKind::Delivered, Some(&data.name), [("op", json!("subscribe"))]);
        } else if let Some(topic) = self.queries.remove(&data.name) {
            self.topic_results.insert(topic, data.meta_names.clone());
            ctx.trace(
                TraceKind::Delivered,
                Some(&data.name),
                [("op", json!("query_topic")), ("names", json!(data.meta_names.len()))],
            );
        }
    }

    // ---- application API --------------------------------------------------------

    fn publish(&mut self, ctx: &mut Cx<'_>, name: Name, payload: Vec<u8>, topics: Vec<Name>) {
        let data = Data {
            name: name.clone(),
            payload,
            meta_topics: topics,
            meta_names: Vec::new(),
        };
        if name.is_empty() || codec::encoded_len(&Packet::Data(data.clone())) > codec::MAX_PACKET_LEN {
            self.trace_drop(ctx, Some(&name), "oversize");
            return;
        }
        if self.fwd.cs.contains(&name) || self.nc.contains(&name) {
            self.trace_drop(ctx, Some(&name), "duplicate");
            return;
        }
        let rank = self.rank_for(&name);
        if self.owns(&name) {
            ctx.trace(TraceKind::Publish, Some(&name), [("rank", json!(0))]);
            let _ = self.fwd.cs_insert(data.clone(), false, ctx.now);
            for t in &data.meta_topics {
                self.topics.add(t.clone(), name.clone());
            }
            self.stored.insert(name.clone());
            ctx.trace(TraceKind::StoredAtCP, Some(&name), [("peer", json!(self.id))]);
            return;
        }
        if !self.can_admit() {
            self.trace_drop(ctx, Some(&name), "nc_full");
            return;
        }
        if self.fwd.cs_insert(data, true, ctx.now).is_err() {
            self.trace_drop(ctx, Some(&name), "nc_full");
            return;
        }
        ctx.trace(TraceKind::Publish, Some(&name), [("rank", json!(rank))]);
        let prefix = self.prefix_for(&name);
        let mut entry = NcEntry::new(name.clone(), prefix, ctx.now);
        let at = ctx.now + self.nam_delay(ctx);
        let token = entry.arm(NcState::WaitingDispatch, at);
        self.nc.insert(entry);
        ctx.set_timer(at, HoppTimer::Nam { name, token });
    }

    fn subscribe(&mut self, ctx: &mut Cx<'_>, name: Name, lifetime_ms: u32, refresh: bool) {
        let lifetime_ms = if lifetime_ms == 0 { self.cfg.sub_lifetime_ms } else { lifetime_ms };
        let token = self.subs.get(&name).map_or(0, |s| s.token.wrapping_add(1));
        self.subs.insert(
            name.clone(),
            Subscription {
                lifetime_ms,
                refresh,
                token,
            },
        );
        self.issue_subscription(ctx, &name);
    }

    fn issue_subscription(&mut self, ctx: &mut Cx<'_>, name: &Name) {
        let Some(sub) = self.subs.get(name).cloned() else { return };
        let interest = Interest {
            name: name.clone(),
            nonce: ctx.rng().gen(),
            lifetime_ms: sub.lifetime_ms,
        };
        match self.fwd.process_interest(FaceId::App, &interest, ctx.now) {
            InterestOutcome::Satisfied(data) => {
                self.deliver_local(ctx, &data);
                return;
            }
            InterestOutcome::Forwarded { face: FaceId::Link(to), interest } => self.send_interest(ctx, to, interest),
            InterestOutcome::Forwarded { .. } | InterestOutcome::Aggregated | InterestOutcome::Held => {}
            InterestOutcome::Dropped(reason) => {
                self.subs.remove(name);
                self.trace_drop(ctx, Some(name), reason.as_str());
                return;
            }
        }
        if sub.refresh {
            let at = ctx.now + SimTime::from_ms_f64(sub.lifetime_ms as f64 * self.cfg.refresh_fraction);
            ctx.set_timer(
                at,
                HoppTimer::Refresh {
                    name: name.clone(),
                    token: sub.token,
                },
            );
        }
    }

    fn query_topic(&mut self, ctx: &mut Cx<'_>, topic: Name) {
        let Ok(query) = topic.topic_query() else {
            self.trace_drop(ctx, Some(&topic), "bad_topic");
            return;
        };
        if self.owns(&topic) {
            let reply = self.topics.reply(&query, &topic);
            self.queries.insert(query, topic);
            self.deliver_local(ctx, &reply);
            return;
        }
        let interest = Interest {
            name: query.clone(),
            nonce: ctx.rng().gen(),
            lifetime_ms: self.cfg.query_lifetime_ms,
        };
        match self.fwd.process_interest(FaceId::App, &interest, ctx.now) {
            InterestOutcome::Forwarded { face: FaceId::Link(to), interest } => {
                self.queries.insert(query, topic);
                self.send_interest(ctx, to, interest);
            }
            InterestOutcome::Aggregated => {
                self.queries.insert(query, topic);
            }
            InterestOutcome::Dropped(reason) => self.trace_drop(ctx, Some(&query), reason.as_str()),
            _ => {}
        }
    }
}

impl Protocol for HoppNode {
    type Timer = HoppTimer;

    fn start(&mut self, ctx: &mut Cx<'_>) {
        for idx in 0..self.dodags.len() {
            if self.dodags[idx].state.is_root {
                self.beacon(ctx, idx);
            }
        }
    }

    fn on_packet(&mut self, ctx: &mut Cx<'_>, from: NodeId, link_quality: f64, packet: Packet) {
        match packet {
            Packet::Interest(i) => self.on_interest(ctx, from, i),
            Packet::Data(d) => self.on_data(ctx, from, d),
            Packet::Pam(p) => self.on_pam(ctx, from, link_quality, p),
            Packet::Nam(n) => self.on_nam(ctx, from, n),
        }
    }

    fn on_timer(&mut self, ctx: &mut Cx<'_>, timer: HoppTimer) {
        match timer {
            HoppTimer::Beacon { dodag, token } => {
                if self.dodags[dodag].beacon_token == token {
                    self.beacon(ctx, dodag);
                }
            }
            HoppTimer::ParentWatch { dodag } => {
                let before = self.snapshot(dodag);
                let m = &mut self.dodags[dodag];
                m.watch_armed = false;
                m.state.check_parent(ctx.now);
                self.after_dodag_change(ctx, dodag, before, false);
                let m = &mut self.dodags[dodag];
                if let Some(p) = &m.state.parent {
                    if !m.watch_armed {
                        m.watch_armed = true;
                        let at = p.last_heard + SimTime::from_ms_f64(self.cfg.parent_timeout_ms());
                        ctx.set_timer(at.max(ctx.now), HoppTimer::ParentWatch { dodag });
                    }
                }
            }
            HoppTimer::Solicit { dodag, token } => {
                let m = &self.dodags[dodag];
                if m.solicit_token == token && m.soliciting && !m.state.is_attached() {
                    self.solicit_now(ctx, dodag);
                }
            }
            HoppTimer::SolicitReply { dodag, to } => {
                if let Some(pam) = self.dodags[dodag].state.advertisement() {
                    ctx.trace(
                        TraceKind::PamTx,
                        Some(&pam.prefix),
                        [("rank", json!(pam.rank)), ("peer", json!(to)), ("cp", json!(false))],
                    );
                    ctx.send(Dest::Unicast(to), pam);
                }
            }
            HoppTimer::Nam { name, token } => self.on_nam_timer(ctx, name, token),
            HoppTimer::Refresh { name, token } => {
                if self.subs.get(&name).is_some_and(|s| s.token == token) {
                    self.issue_subscription(ctx, &name);
                }
            }
        }
    }

    fn on_command(&mut self, ctx: &mut Cx<'_>, cmd: Command) {
        match cmd {
            Command::Publish { name, payload, topics } => self.publish(ctx, name, payload, topics),
            Command::Subscribe {
                name,
                lifetime_ms,
                refresh,
            } => self.subscribe(ctx, name, lifetime_ms, refresh),
            Command::QueryTopic { topic } => self.query_topic(ctx, topic),
        }
    }

    fn on_tx_status(&mut self, ctx: &mut Cx<'_>, to: NodeId, packet: &Packet, delivered: bool) {
        match (packet, delivered) {
            (Packet::Data(d), true) => self.release(ctx, &d.name, to),
            (Packet::Nam(n), false) => {
                let waiting = self
                    .nc
                    .get(&n.name)
                    .is_some_and(|e| e.state == NcState::AwaitingPull && e.target == Some(to));
                if waiting {
                    ctx.trace(TraceKind::Drop, Some(&n.name), [("reason", json!("nam_lost")), ("peer", json!(to))]);
                    self.pull_timeout(ctx, &n.name);
                }
            }
            _ => {}
        }
    }

    fn on_power(&mut self, ctx: &mut Cx<'_>, on: bool) {
        if !on {
            return;
        }
        for m in &mut self.dodags {
            if m.state.is_root {
                m.state.version = m.state.version.wrapping_add(1);
            }
        }
        for e in self.nc.iter_mut() {
            e.park();
        }
        self.reset_dodags(ctx);
        for idx in 0..self.dodags.len() {
            if self.dodags[idx].state.is_root {
                self.beacon(ctx, idx);
            }
        }
        let refreshing: Vec<Name> = self
            .subs
            .iter()
            .filter(|(_, s)| s.refresh)
            .map(|(n, _)| n.clone())
            .collect();
        for name in refreshing {
            self.issue_subscription(ctx, &name);
        }
    }

    fn on_link_change(&mut self, ctx: &mut Cx<'_>, attached: bool) {
        self.linkless = !attached;
        if attached {
            self.reset_dodags(ctx);
            return;
        }
        for idx in 0..self.dodags.len() {
            if self.dodags[idx].state.is_root {
                continue;
            }
            let before = self.snapshot(idx);
            let d = &mut self.dodags[idx].state;
            d.parent = None;
            d.alternates.clear();
            self.after_dodag_change(ctx, idx, before, false);
        }
    }

    fn finish(&mut self, ctx: &mut Cx<'_>) {
        let entries: Vec<(Name, NcState, bool)> = self
            .nc
            .iter()
            .map(|e| (e.name.clone(), e.state, self.fwd.cs.contains(&e.name)))
            .collect();
        for (name, state, held) in entries {
            let state: Value = serde_json::to_value(state).unwrap_or(Value::Null);
            ctx.trace(TraceKind::Buffered, Some(&name), [("state", state), ("held", json!(held))]);
        }
    }
}
