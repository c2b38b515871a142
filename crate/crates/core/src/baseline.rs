//! Interest-notification push over static routes: the notification rides
//! in an Interest forwarded hop by hop toward the consumer. Nothing is
//! cached, acknowledged end to end or retransmitted beyond the link
//! layer's own budget.

use std::collections::BTreeSet;

use rand::Rng;
use serde_json::json;

use crate::ndn::{Interest, Name, Packet};
use crate::sim::{Command, ConfigError, Ctx, Dest, Protocol};
use crate::trace::TraceKind;
use crate::NodeId;

/// Lifetime carried by notification Interests; nothing waits on it.
pub const NOTIFY_LIFETIME_MS: u32 = 1000;

/// Next hop toward the consumer for every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRoutes {
    next_hop: Vec<Option<NodeId>>,
    consumer: NodeId,
}

impl StaticRoutes {
    /// Builds the table from a parent map (e.g. a converged DODAG).
    /// Every node except the consumer must reach it without cycles.
    pub fn from_parents(consumer: NodeId, parents: Vec<Option<NodeId>>) -> Result<Self, ConfigError> {
        let n = parents.len();
        if consumer as usize >= n {
            return Err(ConfigError::new("consumer outside the route table"));
        }
        let routes = StaticRoutes {
            next_hop: parents,
            consumer,
        };
        for node in 0..n as NodeId {
            if node != consumer && routes.hops(node).is_none() {
                return Err(ConfigError::new(format!("node {node} has no loop-free route to {consumer}")));
            }
        }
        Ok(routes)
    }

    pub fn consumer(&self) -> NodeId {
        self.consumer
    }

    pub fn next_hop(&self, node: NodeId) -> Option<NodeId> {
        if node == self.consumer {
            return None;
        }
        self.next_hop.get(node as usize).copied().flatten()
    }

    /// Hop count to the consumer, or `None` when unreachable.
    pub fn hops(&self, node: NodeId) -> Option<u32> {
        let mut at = node;
        let mut hops = 0;
        while at != self.consumer {
            at = self.next_hop(at)?;
            hops += 1;
            if hops as usize > self.next_hop.len() {
                return None;
            }
        }
        Some(hops)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineNode {
    id: NodeId,
    next_hop: Option<NodeId>,
    hops: Option<u32>,
    is_consumer: bool,
    l2_retries: u8,
    received: BTreeSet<Name>,
}

impl BaselineNode {
    pub fn new(id: NodeId, routes: &StaticRoutes, l2_retries: u8) -> Self {
        BaselineNode {
            id,
            next_hop: routes.next_hop(id),
            hops: routes.hops(id),
            is_consumer: routes.consumer() == id,
            l2_retries,
            received: BTreeSet::new(),
        }
    }

    /// Notifications that reached this node as consumer.
    pub fn received(&self) -> &BTreeSet<Name> {
        &self.received
    }

    fn forward(&self, ctx: &mut Ctx<'_, ()>, interest: Interest) {
        let Some(to) = self.next_hop else {
            ctx.trace(TraceKind::Drop, Some(&interest.name), [("reason", json!("no_route"))]);
            return;
        };
        ctx.trace(TraceKind::IntTx, Some(&interest.name), [("peer", json!(to))]);
        ctx.send_with_retries(Dest::Unicast(to), interest, self.l2_retries);
    }

    fn consume(&mut self, ctx: &mut Ctx<'_, ()>, name: &Name) {
        if self.received.insert(name.clone()) {
            ctx.trace(TraceKind::Delivered, Some(name), [("op", json!("notify"))]);
        }
    }
}

impl Protocol for BaselineNode {
    type Timer = ();

    fn start(&mut self, _ctx: &mut Ctx<'_, ()>) {}

    fn on_packet(&mut self, ctx: &mut Ctx<'_, ()>, from: NodeId, _link_quality: f64, packet: Packet) {
        let Packet::Interest(interest) = packet else { return };
        ctx.trace(TraceKind::IntRx, Some(&interest.name), [("peer", json!(from))]);
        if self.is_consumer {
            self.consume(ctx, &interest.name);
        } else {
            self.forward(ctx, interest);
        }
    }

    fn on_timer(&mut self, _ctx: &mut Ctx<'_, ()>, _timer: ()) {}

    fn on_command(&mut self, ctx: &mut Ctx<'_, ()>, cmd: Command) {
        // Only publications exist in the push scheme.
        let Command::Publish { name, .. } = cmd else { return };
        ctx.trace(TraceKind::Publish, Some(&name), [("rank", json!(self.hops))]);
        if self.is_consumer {
            self.consume(ctx, &name);
            return;
        }
        let interest = Interest {
            name,
            nonce: ctx.rng().gen(),
            lifetime_ms: NOTIFY_LIFETIME_MS,
        };
        self.forward(ctx, interest);
    }

    fn on_tx_status(&mut self, ctx: &mut Ctx<'_, ()>, to: NodeId, packet: &Packet, delivered: bool) {
        if !delivered {
            ctx.trace(
                TraceKind::Drop,
                Some(packet.name()),
                [("reason", json!("link_loss")), ("peer", json!(to)), ("node", json!(self.id))],
            );
        }
    }
}
