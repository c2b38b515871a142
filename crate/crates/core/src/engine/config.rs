use serde::{Deserialize, Serialize};

use crate::forwarder::{DEFAULT_CS_CAPACITY, DEFAULT_PIT_CAPACITY};
use crate::sim::ConfigError;

/// Protocol timers and table sizes. All durations are milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoppConfig {
    /// PAM period and re-broadcast delay after adoption.
    pub pam_t_ms: f64,
    /// Relative jitter applied to every PAM interval.
    pub pam_jitter: f64,
    pub nam_t_min_ms: f64,
    pub nam_t_max_ms: f64,
    pub pull_timeout_ms: f64,
    pub max_nam_retries: u32,
    pub backoff_base_ms: f64,
    pub backoff_factor: f64,
    pub backoff_cap_ms: f64,
    pub sub_lifetime_ms: u32,
    pub nc_capacity: usize,
    pub cs_capacity: usize,
    pub pit_capacity: usize,
    /// Content store size at a content proxy.
    pub cp_cs_capacity: usize,
    /// Lifetime of the one-hop pull Interest.
    pub pull_lifetime_ms: u32,
    pub query_lifetime_ms: u32,
    /// Parent is lost after this many silent PAM periods.
    pub parent_loss_periods: f64,
    pub solicit_jitter_ms: f64,
    /// Subscriptions refresh at this fraction of their lifetime.
    pub refresh_fraction: f64,
}

impl Default for HoppConfig {
    fn default() -> Self {
        HoppConfig {
            pam_t_ms: 100.0,
            pam_jitter: 0.1,
            nam_t_min_ms: 100.0,
            nam_t_max_ms: 150.0,
            pull_timeout_ms: 2000.0,
            max_nam_retries: 3,
            backoff_base_ms: 1000.0,
            backoff_factor: 2.0,
            backoff_cap_ms: 32_000.0,
            sub_lifetime_ms: 60_000,
            nc_capacity: 32,
            cs_capacity: DEFAULT_CS_CAPACITY,
            pit_capacity: DEFAULT_PIT_CAPACITY,
            cp_cs_capacity: 1 << 16,
            pull_lifetime_ms: 1000,
            query_lifetime_ms: 4000,
            parent_loss_periods: 3.0,
            solicit_jitter_ms: 10.0,
            refresh_fraction: 0.9,
        }
    }
}

impl HoppConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("pam_t_ms", self.pam_t_ms),
            ("nam_t_min_ms", self.nam_t_min_ms),
            ("pull_timeout_ms", self.pull_timeout_ms),
            ("backoff_base_ms", self.backoff_base_ms),
            ("backoff_cap_ms", self.backoff_cap_ms),
            ("parent_loss_periods", self.parent_loss_periods),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(format!("{field} must be positive, got {v}")));
            }
        }
        if !(self.nam_t_min_ms < self.nam_t_max_ms) {
            return Err(ConfigError::new("nam_t_min_ms must be below nam_t_max_ms"));
        }
        if !(0.0..1.0).contains(&self.pam_jitter) {
            return Err(ConfigError::new("pam_jitter must be in [0, 1)"));
        }
        if self.backoff_factor < 1.0 {
            return Err(ConfigError::new("backoff_factor must be at least 1"));
        }
        if !(self.solicit_jitter_ms >= 0.0) {
            return Err(ConfigError::new("solicit_jitter_ms must be non-negative"));
        }
        if !(self.refresh_fraction > 0.0 && self.refresh_fraction <= 1.0) {
            return Err(ConfigError::new("refresh_fraction must be in (0, 1]"));
        }
        let sizes = [
            ("nc_capacity", self.nc_capacity),
            ("cs_capacity", self.cs_capacity),
            ("pit_capacity", self.pit_capacity),
            ("cp_cs_capacity", self.cp_cs_capacity),
            ("sub_lifetime_ms", self.sub_lifetime_ms as usize),
            ("pull_lifetime_ms", self.pull_lifetime_ms as usize),
            ("query_lifetime_ms", self.query_lifetime_ms as usize),
        ];
        for (field, v) in sizes {
            if v == 0 {
                return Err(ConfigError::new(format!("{field} must be positive")));
            }
        }
        Ok(())
    }

    /// Back-off delay after `overflow` exhausted rounds (0-based).
    pub fn backoff_ms(&self, overflow: u32) -> f64 {
        let exp = self.backoff_factor.powi(overflow.min(64) as i32);
        (self.backoff_base_ms * exp).min(self.backoff_cap_ms)
    }

    pub fn parent_timeout_ms(&self) -> f64 {
        self.pam_t_ms * self.parent_loss_periods
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        HoppConfig::default().validate().unwrap();
    }

    #[test]
    fn backoff_doubles_to_cap() {
        let c = HoppConfig::default();
        let seq: Vec<f64> = (0..8).map(|k| c.backoff_ms(k)).collect();
        assert_eq!(seq, [1000.0, 2000.0, 4000.0, 8000.0, 16000.0, 32000.0, 32000.0, 32000.0]);
    }

    #[test]
    fn rejects_inverted_nam_window() {
        let c = HoppConfig {
            nam_t_min_ms: 150.0,
            nam_t_max_ms: 100.0,
            ..HoppConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
