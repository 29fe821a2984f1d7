//! Simulation configuration and validation.

use core::fmt;

use alloc::string::String;

/// Knobs shared by every subsystem. Delays and timeouts are integer
/// simulation ticks; there is no wall clock anywhere in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_workers: u16,
    /// `m`: number of switch registers used for aggregation.
    pub num_registers: u32,
    /// `M`: total register slots, `M = m * slots_per_register`.
    pub num_slots: u32,
    /// Upper bound on the hot set actually installed on the switch.
    pub hot_k: u32,
    /// `c`: fraction of switch on-chip memory available for caching.
    pub memory_fraction: f64,
    /// `p`: target fraction of update traffic intercepted by the switch.
    pub traffic_target: f64,
    /// Per-link iid packet loss probability.
    pub loss_rate: f64,
    /// Ticks a sender waits for an ACK before retransmitting.
    pub ack_timeout: u64,
    /// Ticks between controller heartbeat rounds.
    pub heartbeat_interval: u64,
    pub rng_seed: u64,
}

impl SimConfig {
    pub fn slots_per_register(&self) -> u32 {
        self.num_slots / self.num_registers
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_workers: 16,
            num_registers: 64,
            num_slots: 32768,
            hot_k: 30_000,
            memory_fraction: 0.05,
            traffic_target: 0.5,
            loss_rate: 0.0,
            ack_timeout: 40,
            heartbeat_interval: 200,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Names the failing invariant.
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.message)
    }
}

impl core::error::Error for ConfigError {}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !($cond) {
            return Err(ConfigError { message: alloc::format!($($arg)*) });
        }
    };
}

/// Checks every `SimConfig` invariant and reports the first violation.
pub fn validate_config(cfg: &SimConfig) -> Result<(), ConfigError> {
    ensure!(cfg.num_workers >= 1, "num_workers must be >= 1");
    ensure!(cfg.num_registers >= 1, "num_registers must be >= 1");
    ensure!(cfg.num_slots >= 1, "num_slots must be >= 1");
    ensure!(
        cfg.num_slots % cfg.num_registers == 0,
        "num_slots ({}) must be a multiple of num_registers ({})",
        cfg.num_slots,
        cfg.num_registers
    );
    ensure!(
        cfg.hot_k <= cfg.num_slots,
        "hot set exceeds slots: hot_k {} > num_slots {}",
        cfg.hot_k,
        cfg.num_slots
    );
    ensure!(
        cfg.memory_fraction > 0.0 && cfg.memory_fraction < 1.0,
        "c out of (0,1): {}",
        cfg.memory_fraction
    );
    ensure!(
        cfg.traffic_target > 0.0 && cfg.traffic_target < 1.0,
        "p out of (0,1): {}",
        cfg.traffic_target
    );
    ensure!(
        (0.0..1.0).contains(&cfg.loss_rate),
        "loss_rate out of [0,1): {}",
        cfg.loss_rate
    );
    ensure!(cfg.ack_timeout >= 1, "ack_timeout must be >= 1 tick");
    ensure!(cfg.heartbeat_interval >= 1, "heartbeat_interval must be >= 1 tick");
    Ok(())
}
