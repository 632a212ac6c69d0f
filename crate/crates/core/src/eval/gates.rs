use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scene::SystemConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ntfe,
    Ls,
    Kf,
    Ml,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ntfe, Method::Ls, Method::Kf, Method::Ml];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ntfe => "ntfe",
            Method::Ls => "ls",
            Method::Kf => "kf",
            Method::Ml => "ml",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected ntfe, ls, kf or ml)")))
    }
}

/// One evaluated inequality `lhs >= rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    pub method: Method,
    pub label: &'static str,
    pub lhs: usize,
    pub rhs: usize,
}

impl Condition {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// Dimension inequalities each requested method needs on the processed
/// group: the BALS pseudoinverses must be right invertible for NTFE and the
/// selection matrix must have at least `N⁴` rows for the least-squares
/// based methods. The grid search has no such requirement.
pub fn identifiability_check(cfg: &SystemConfig, methods: &[Method]) -> Vec<Condition> {
    let n = cfg.processed_group().size;
    let (l, m, q, t) = (cfg.antennas(), cfg.m, cfg.q, cfg.t);
    let groups = cfg.groups().len();
    let mut out = Vec::new();
    for &method in methods {
        let mut push = |label, lhs, rhs| out.push(Condition { method, label, lhs, rhs });
        match method {
            Method::Ntfe => {
                push("LT >= N", l * t, n);
                push("LMQT >= N^2", l * m * q * t, n * n);
                push("NQ >= 1", n * q, 1);
                push("NM >= 1", n * m, 1);
                push("MQ >= K", m * q, groups);
            }
            Method::Ls | Method::Kf => push("T >= N^4", t, n.pow(4)),
            Method::Ml => {}
        }
    }
    out
}

/// Whether every condition of `method` holds.
pub fn is_allowed(conditions: &[Condition], method: Method) -> bool {
    conditions.iter().filter(|c| c.method == method).all(Condition::holds)
}
