//! Serializable application and platform descriptions.
//!
//! These are the types that appear in problem files. They are plain data and
//! are only checked by [`super::validate`]; the compiled, index-based form
//! used by the algorithms is [`super::Problem`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Cycles;

pub const FORMAT_VERSION: u64 = 1;

/// A Kahn process network: tasks connected by FIFO channels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppGraph {
    pub name: String,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub channels: Vec<Channel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    /// Cycles per firing, keyed by processor type tag.
    pub compute_cost: BTreeMap<String, Cycles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_to: Option<String>,
    #[serde(default = "one")]
    pub firings_per_frame: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    pub src: String,
    pub dst: String,
    /// Tokens written per firing of `src`.
    #[serde(default = "one")]
    pub tokens_per_firing: u64,
    /// Tokens read per firing of `dst`; defaults to `tokens_per_firing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consume_per_firing: Option<u64>,
    #[serde(default = "one")]
    pub token_size: u64,
    pub capacity: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub initial_tokens: u64,
    pub cost_local: Cycles,
    pub cost_shared: Cycles,
}

impl Channel {
    pub fn consume(&self) -> u64 {
        self.consume_per_firing.unwrap_or(self.tokens_per_firing)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Processor {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    /// Reserved processors only run tasks pinned to them (e.g. an IO core).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reserved: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arbitration {
    #[default]
    Fcfs,
}

/// A shared-memory MPSoC: processors on one bus to one shared memory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Platform {
    pub processors: Vec<Processor>,
    /// Bus occupancy per token byte transferred between processors.
    #[serde(default)]
    pub bus_word_cycles: Cycles,
    #[serde(default)]
    pub arbitration: Arbitration,
}

impl Platform {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.processors.iter().position(|p| p.id == id)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        let mut seen: Vec<&str> = Vec::new();
        for p in &self.processors {
            if !seen.contains(&p.kind.as_str()) {
                seen.push(&p.kind);
            }
        }
        seen.into_iter()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOptions {
    #[serde(default)]
    pub allow_self_loops: bool,
}

/// Top-level problem file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format: u64,
    pub platform: Platform,
    pub apps: Vec<AppGraph>,
    #[serde(default, skip_serializing_if = "is_default_options")]
    pub options: ValidationOptions,
}

impl ProblemFile {
    pub fn new(apps: Vec<AppGraph>, platform: Platform) -> Self {
        ProblemFile {
            format: FORMAT_VERSION,
            platform,
            apps,
            options: ValidationOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> crate::Result<Self> {
        Self::from_json(&crate::error::read_file(path.as_ref())?)
    }

    /// Pretty JSON with a trailing newline. Key order is fixed, so equal
    /// problems serialize to equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem serializes");
        s.push('\n');
        s
    }
}

fn one() -> u64 {
    1
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn is_default_options(o: &ValidationOptions) -> bool {
    *o == ValidationOptions::default()
}
