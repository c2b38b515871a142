use serde::{Deserialize, Serialize};

/// Radio abstraction shared by every link: per-attempt delay plus
/// hardware-style acknowledged retransmission for unicast frames.
/// Broadcasts get a single attempt with independent loss per receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    pub delay_ms: f64,
    pub l2_retries: u8,
    pub l2_ack: bool,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            delay_ms: 5.0,
            l2_retries: 4,
            l2_ack: true,
        }
    }
}

impl LinkModel {
    /// Probability that a unicast frame gets through a link with the given
    /// per-attempt loss.
    pub fn unicast_success(&self, loss: f64, retries: u8) -> f64 {
        let attempts = if self.l2_ack { retries as i32 + 1 } else { 1 };
        1.0 - loss.powi(attempts)
    }
}

/// Per-link loss that makes a unicast with `retries` retransmissions
/// succeed with probability `target`.
pub fn loss_for_success(target: f64, retries: u8) -> f64 {
    (1.0 - target).powf(1.0 / (retries as f64 + 1.0))
}
