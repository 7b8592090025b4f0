//! Scenario x policy x mitigation sweep, run in parallel.

use rayon::prelude::*;

use super::benign::{learn_whitelist, run_benign};
use super::{run_scenario, Mitigation, RunOptions, Scenario};
use crate::config::{ForwardingPolicy, SimConfig};
use crate::report::RunReport;

#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub scenarios: Vec<Scenario>,
    pub policies: Vec<ForwardingPolicy>,
    pub mitigations: Vec<Mitigation>,
    /// Append one benchmark row per policy.
    pub benign: bool,
    pub check_arch: bool,
}

impl MatrixSpec {
    pub fn bundled() -> MatrixSpec {
        MatrixSpec {
            scenarios: super::bundled_scenarios(),
            policies: ForwardingPolicy::ALL.to_vec(),
            mitigations: Mitigation::ALL.to_vec(),
            benign: true,
            check_arch: false,
        }
    }
}

/// Rows come back in scenario, policy, mitigation order, then the benchmark
/// rows. Arctic cells run with the whitelist the benchmark learns cold.
pub fn run_matrix(spec: &MatrixSpec, cfg: &SimConfig) -> Vec<RunReport> {
    let arctic = cfg.clone().with_policy(ForwardingPolicy::ArcticSloth);
    let whitelist = if spec.policies.contains(&ForwardingPolicy::ArcticSloth) {
        learn_whitelist(&arctic)
    } else {
        Default::default()
    };
    let mut cells = Vec::new();
    for s in &spec.scenarios {
        for &p in &spec.policies {
            for &m in &spec.mitigations {
                cells.push((Some(s), p, m));
            }
        }
    }
    if spec.benign {
        for &p in &spec.policies {
            cells.push((None, p, Mitigation::None));
        }
    }
    cells
        .par_iter()
        .map(|&(s, p, m)| {
            let cfg = cfg.clone().with_policy(p);
            let opts = RunOptions {
                mitigation: Some(m),
                whitelist: if p == ForwardingPolicy::ArcticSloth {
                    whitelist.clone()
                } else {
                    Default::default()
                },
                trace: false,
                check_arch: spec.check_arch,
            };
            match s {
                Some(s) => run_scenario(s, &cfg, &opts).report,
                None => run_benign(&cfg, &opts).report,
            }
        })
        .collect()
}
