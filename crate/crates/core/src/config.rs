//! Simulator configuration and its `key=value` file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardingPolicy {
    Baseline,
    /// SLothBear: never forward from a store that has not retired.
    SlothbearStores,
    /// SLothBear: never forward into a load that is still speculative.
    SlothbearLoads,
    /// Forward only between compiler-marked loads and stores.
    SlothMarked,
    /// Forward only into loads whose pc is on the learned whitelist.
    ArcticSloth,
}

impl ForwardingPolicy {
    pub const ALL: [ForwardingPolicy; 5] = [
        ForwardingPolicy::Baseline,
        ForwardingPolicy::SlothbearStores,
        ForwardingPolicy::SlothbearLoads,
        ForwardingPolicy::SlothMarked,
        ForwardingPolicy::ArcticSloth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ForwardingPolicy::Baseline => "baseline",
            ForwardingPolicy::SlothbearStores => "slothbear_stores",
            ForwardingPolicy::SlothbearLoads => "slothbear_loads",
            ForwardingPolicy::SlothMarked => "sloth_marked",
            ForwardingPolicy::ArcticSloth => "arctic_sloth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TlbEnforcement {
    /// Write permission is acted on only when the store retires.
    Lazy,
    /// A store may not forward until its permission check passed.
    Eager,
    /// A store that fails its permission check forwards the value 0.
    ForwardZero,
}

impl TlbEnforcement {
    pub const ALL: [TlbEnforcement; 3] = [
        TlbEnforcement::Lazy,
        TlbEnforcement::Eager,
        TlbEnforcement::ForwardZero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TlbEnforcement::Lazy => "lazy",
            TlbEnforcement::Eager => "eager",
            TlbEnforcement::ForwardZero => "forward_zero",
        }
    }
}

macro_rules! named_enum_parse {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = ConfigError;

            fn from_str(s: &str) -> Result<Self, ConfigError> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| ConfigError::BadValue {
                        key: stringify!($ty).into(),
                        value: s.into(),
                    })
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum_parse!(ForwardingPolicy);
named_enum_parse!(TlbEnforcement);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimConfig {
    pub rob_capacity: usize,
    pub issue_width: usize,
    pub retire_width: usize,
    pub sb_capacity: usize,
    pub mshr_count: usize,
    pub rsb_depth: usize,
    pub bht_size: usize,
    pub forwarding_policy: ForwardingPolicy,
    pub tlb_enforcement: TlbEnforcement,
    pub dram_latency_cycles: u64,
    pub l1_latency_cycles: u64,
    pub timer_granularity_cycles: u64,
    pub cache_sets: usize,
    pub cache_ways: usize,
    pub seed: u64,
    pub cycle_limit: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rob_capacity: 224,
            issue_width: 8,
            retire_width: 4,
            sb_capacity: 56,
            mshr_count: 10,
            rsb_depth: 16,
            bht_size: 1024,
            forwarding_policy: ForwardingPolicy::Baseline,
            tlb_enforcement: TlbEnforcement::Lazy,
            dram_latency_cycles: 300,
            l1_latency_cycles: 4,
            timer_granularity_cycles: 1,
            cache_sets: 64,
            cache_ways: 8,
            seed: 0,
            cycle_limit: 1_000_000,
        }
    }
}

pub const KEYS: [&str; 16] = [
    "rob_capacity",
    "issue_width",
    "retire_width",
    "sb_capacity",
    "mshr_count",
    "rsb_depth",
    "bht_size",
    "forwarding_policy",
    "tlb_enforcement",
    "dram_latency_cycles",
    "l1_latency_cycles",
    "timer_granularity_cycles",
    "cache_sets",
    "cache_ways",
    "seed",
    "cycle_limit",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    let v = value.replace('_', "");
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16)
            .ok()
            .and_then(|n| n.to_string().parse().ok()),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

impl SimConfig {
    /// One logical core's share of a two-thread SMT core: half the ROB.
    pub fn smt_half() -> SimConfig {
        SimConfig {
            rob_capacity: 112,
            ..SimConfig::default()
        }
    }

    pub fn with_policy(mut self, p: ForwardingPolicy) -> SimConfig {
        self.forwarding_policy = p;
        self
    }

    pub fn with_tlb(mut self, t: TlbEnforcement) -> SimConfig {
        self.tlb_enforcement = t;
        self
    }

    /// Sets one field by its name. `preset=smt_half` resets the ROB size.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "rob_capacity" => self.rob_capacity = num(key, value)?,
            "issue_width" => self.issue_width = num(key, value)?,
            "retire_width" => self.retire_width = num(key, value)?,
            "sb_capacity" => self.sb_capacity = num(key, value)?,
            "mshr_count" => self.mshr_count = num(key, value)?,
            "rsb_depth" => self.rsb_depth = num(key, value)?,
            "bht_size" => self.bht_size = num(key, value)?,
            "forwarding_policy" => self.forwarding_policy = value.parse()?,
            "tlb_enforcement" => self.tlb_enforcement = value.parse()?,
            "dram_latency_cycles" => self.dram_latency_cycles = num(key, value)?,
            "l1_latency_cycles" => self.l1_latency_cycles = num(key, value)?,
            "timer_granularity_cycles" => self.timer_granularity_cycles = num(key, value)?,
            "cache_sets" => self.cache_sets = num(key, value)?,
            "cache_ways" => self.cache_ways = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "cycle_limit" => self.cycle_limit = num(key, value)?,
            "preset" => match value {
                "smt_half" => self.rob_capacity = 112,
                "default" => self.rob_capacity = 224,
                _ => {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: value.into(),
                    })
                }
            },
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn from_kv(text: &str) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("rob_capacity", self.rob_capacity),
            ("issue_width", self.issue_width),
            ("retire_width", self.retire_width),
            ("sb_capacity", self.sb_capacity),
            ("mshr_count", self.mshr_count),
            ("rsb_depth", self.rsb_depth),
            ("cache_sets", self.cache_sets),
            ("cache_ways", self.cache_ways),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be at least 1")));
            }
        }
        if !self.bht_size.is_power_of_two() {
            return Err(ConfigError::Invalid(
                "bht_size must be a power of two".into(),
            ));
        }
        if !self.cache_sets.is_power_of_two() {
            return Err(ConfigError::Invalid(
                "cache_sets must be a power of two".into(),
            ));
        }
        if self.l1_latency_cycles == 0 || self.dram_latency_cycles <= self.l1_latency_cycles {
            return Err(ConfigError::Invalid(
                "need 0 < l1_latency_cycles < dram_latency_cycles".into(),
            ));
        }
        if self.timer_granularity_cycles == 0 {
            return Err(ConfigError::Invalid(
                "timer_granularity_cycles must be at least 1".into(),
            ));
        }
        if self.cycle_limit == 0 {
            return Err(ConfigError::Invalid(
                "cycle_limit must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Canonical `key=value` rendering; `from_kv(to_kv())` is the identity.
    pub fn to_kv(&self) -> String {
        let json = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for key in KEYS {
            let v = &json[key];
            let text = v
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| v.to_string());
            out.push_str(&format!("{key}={text}\n"));
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical rendering.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_kv().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.rob_capacity, 224);
        assert_eq!(c.sb_capacity, 56);
        assert_eq!(c.mshr_count, 10);
        assert_eq!(SimConfig::smt_half().rob_capacity, 112);
    }

    #[test]
    fn kv_round_trip_and_digest() {
        let c = SimConfig {
            forwarding_policy: ForwardingPolicy::ArcticSloth,
            tlb_enforcement: TlbEnforcement::ForwardZero,
            rob_capacity: 64,
            ..SimConfig::default()
        };
        let back = SimConfig::from_kv(&c.to_kv()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_ne!(c.digest(), SimConfig::default().digest());
        assert_eq!(c.digest().len(), 16);
    }

    #[test]
    fn kv_errors() {
        assert!(matches!(
            SimConfig::from_kv("frobnicate=1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            SimConfig::from_kv("forwarding_policy=nope"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            SimConfig::from_kv("rob_capacity"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            SimConfig::from_kv("dram_latency_cycles=2"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn kebab_keys_and_comments() {
        let c =
            SimConfig::from_kv("# c\nrob-capacity = 0x40\npreset=default\nmshr_count=3").unwrap();
        assert_eq!(c.rob_capacity, 224);
        assert_eq!(c.mshr_count, 3);
    }
}
