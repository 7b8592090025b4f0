//! Scenario description files (TOML).
//!
//! ```toml
//! name = "my_attack"
//! program = "victim.s"        # relative to this file, or inline `source`
//! attempts = 2
//! secret = { addr = 0x2800, value = 0x2a }
//! probe = { base = 0x100000, amplification = 1 }
//! preset = "smt_half"
//!
//! [config]
//! tlb_enforcement = "eager"
//!
//! [[prime]]
//! call = "main"
//! regs = { r1 = 3, r3 = 0x10000 }
//!
//! [[attack]]
//! flush = [0x1040]
//! call = "main"
//! regs = { r1 = 0x800, r3 = "probe", r9 = "transmit" }
//! ```
//!
//! Within one action table pokes run first, then flushes, then the call. A
//! string register value is `probe` (the current probe plane) or a label.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{Action, MitigationSites, ProbeSpec, Scenario, Secret, Value};
use crate::config::SimConfig;
use crate::isa::{assemble, Reg};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("assembly: {0}")]
    Asm(#[from] crate::isa::AsmError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    name: String,
    program: Option<String>,
    source: Option<String>,
    #[serde(default = "two")]
    attempts: usize,
    secret: SecretSpec,
    #[serde(default)]
    probe: ProbeFileSpec,
    #[serde(default)]
    setup: Vec<ActionSpec>,
    #[serde(default)]
    prime: Vec<ActionSpec>,
    #[serde(default)]
    attack: Vec<ActionSpec>,
    sites: Option<SitesSpec>,
    preset: Option<String>,
    #[serde(default)]
    config: BTreeMap<String, toml::Value>,
}

fn two() -> usize {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretSpec {
    addr: u64,
    value: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ProbeFileSpec {
    base: u64,
    stride: u64,
    entries: usize,
    amplification: usize,
}

impl Default for ProbeFileSpec {
    fn default() -> ProbeFileSpec {
        let d = ProbeSpec::default();
        ProbeFileSpec {
            base: d.base,
            stride: d.stride,
            entries: d.entries,
            amplification: d.amplification,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionSpec {
    #[serde(default)]
    poke: Vec<PokeSpec>,
    #[serde(default)]
    flush: Vec<u64>,
    call: Option<String>,
    #[serde(default)]
    regs: BTreeMap<String, ValueSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PokeSpec {
    addr: u64,
    #[serde(default = "eight")]
    size: u8,
    value: ValueSpec,
}

fn eight() -> u8 {
    8
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValueSpec {
    Int(u64),
    Str(String),
}

impl ValueSpec {
    fn value(&self) -> Value {
        match self {
            ValueSpec::Int(v) => Value::Imm(*v),
            ValueSpec::Str(s) if s == "probe" => Value::ProbePlane,
            ValueSpec::Str(s) => Value::Label(s.clone()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SitesSpec {
    fence_at: String,
    mask_at: String,
    index: String,
    bound: String,
    region_size: u64,
}

fn actions(specs: &[ActionSpec]) -> Result<Vec<Action>, ScenarioFileError> {
    let mut out = Vec::new();
    for a in specs {
        for p in &a.poke {
            if !matches!(p.size, 1 | 2 | 4 | 8) {
                return Err(ScenarioFileError::Invalid(format!(
                    "poke size {} is not 1, 2, 4 or 8",
                    p.size
                )));
            }
            out.push(Action::Poke {
                addr: p.addr,
                size: p.size,
                value: p.value.value(),
            });
        }
        out.extend(a.flush.iter().map(|&addr| Action::Flush { addr }));
        match &a.call {
            Some(entry) => {
                let mut regs = Vec::new();
                for (name, v) in &a.regs {
                    let r: Reg = name.parse().map_err(ScenarioFileError::Invalid)?;
                    regs.push((r, v.value()));
                }
                out.push(Action::Call {
                    entry: entry.clone(),
                    regs,
                });
            }
            None if !a.regs.is_empty() => {
                return Err(ScenarioFileError::Invalid("`regs` without `call`".into()))
            }
            None => {}
        }
    }
    Ok(out)
}

/// Parses a scenario description; `dir` resolves a relative `program` path.
pub fn parse_scenario(text: &str, dir: &Path) -> Result<Scenario, ScenarioFileError> {
    let spec: FileSpec = toml::from_str(text)?;
    let source = match (&spec.program, &spec.source) {
        (Some(path), None) => {
            let path = dir.join(path);
            std::fs::read_to_string(&path)
                .map_err(|source| ScenarioFileError::Io { path, source })?
        }
        (None, Some(src)) => src.clone(),
        _ => {
            return Err(ScenarioFileError::Invalid(
                "exactly one of `program` and `source` is required".into(),
            ))
        }
    };
    let program = assemble(&source)?;
    let sites = match spec.sites {
        None => None,
        Some(s) => Some(MitigationSites {
            fence_at: s.fence_at,
            mask_at: s.mask_at,
            index: s.index.parse().map_err(ScenarioFileError::Invalid)?,
            bound: s.bound.parse().map_err(ScenarioFileError::Invalid)?,
            region_size: s.region_size,
        }),
    };
    let secret = Secret {
        addr: spec.secret.addr,
        value: spec.secret.value,
    };
    let mut setup = vec![Action::Poke {
        addr: secret.addr,
        size: 1,
        value: Value::Imm(u64::from(secret.value)),
    }];
    setup.extend(actions(&spec.setup)?);
    let probe = ProbeSpec {
        base: spec.probe.base,
        stride: spec.probe.stride,
        entries: spec.probe.entries,
        amplification: spec.probe.amplification.max(1),
    };
    if probe.entries == 0 || probe.stride == 0 {
        return Err(ScenarioFileError::Invalid(
            "probe needs entries and a stride".into(),
        ));
    }
    let mut config = Vec::new();
    config.extend(spec.preset.map(|p| ("preset".to_string(), p)));
    for (key, v) in spec.config {
        let text = match v {
            toml::Value::String(s) => s,
            toml::Value::Integer(n) => n.to_string(),
            other => {
                return Err(ScenarioFileError::Invalid(format!(
                    "config `{key}`: unsupported value {other}"
                )))
            }
        };
        config.push((key, text));
    }
    let mut check = SimConfig::default();
    for (k, v) in &config {
        check
            .set(k, v)
            .map_err(|e| ScenarioFileError::Invalid(e.to_string()))?;
    }
    Ok(Scenario {
        name: spec.name,
        program,
        setup,
        prime: actions(&spec.prime)?,
        attack: actions(&spec.attack)?,
        attempts: spec.attempts,
        secret,
        probe,
        sites,
        config,
    })
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(text.as_str(), path.parent().unwrap_or(Path::new(".")))
}
