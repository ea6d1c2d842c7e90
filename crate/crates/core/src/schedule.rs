//! Stage-by-stage qubit configurations and the versioned JSON schedule file.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Placement of one qubit at one stage. `a = 1` means the atom sits in the
/// AOD trap at column `c`, row `r`; `a = 0` means an SLM trap, with no AOD
/// indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitState {
    pub x: usize,
    pub y: usize,
    pub a: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

impl QubitState {
    pub fn slm(x: usize, y: usize) -> Self {
        Self { x, y, a: 0, c: None, r: None }
    }

    pub fn aod(x: usize, y: usize, c: usize, r: usize) -> Self {
        Self { x, y, a: 1, c: Some(c), r: Some(r) }
    }

    pub fn in_aod(&self) -> bool {
        self.a == 1
    }

    pub fn site(&self) -> (usize, usize) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitRecord {
    pub id: usize,
    #[serde(flatten)]
    pub state: QubitState,
}

/// One movement epoch followed by an optional Rydberg pulse.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stage {
    /// Sorted by qubit id.
    pub qubits: Vec<QubitRecord>,
    /// Sorted gate indices fired at this stage.
    pub fired: Vec<usize>,
}

impl Stage {
    pub fn new(mut qubits: Vec<QubitRecord>, fired: impl IntoIterator<Item = usize>) -> Self {
        qubits.sort_by_key(|r| r.id);
        let fired: BTreeSet<usize> = fired.into_iter().collect();
        Self { qubits, fired: fired.into_iter().collect() }
    }

    pub fn state(&self, q: usize) -> Option<&QubitState> {
        self.qubits
            .binary_search_by_key(&q, |r| r.id)
            .ok()
            .map(|i| &self.qubits[i].state)
    }

    pub fn state_mut(&mut self, q: usize) -> Option<&mut QubitState> {
        self.qubits
            .binary_search_by_key(&q, |r| r.id)
            .ok()
            .map(|i| &mut self.qubits[i].state)
    }

    pub fn fires(&self) -> bool {
        !self.fired.is_empty()
    }

    /// Same placements, nothing fired.
    pub fn idle_copy(&self) -> Self {
        Self { qubits: self.qubits.clone(), fired: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub stages: Vec<Stage>,
}

impl Schedule {
    pub fn depth(&self) -> usize {
        depth(self)
    }

    pub fn last(&self) -> Option<&Stage> {
        self.stages.last()
    }

    pub fn fired_gates(&self) -> impl Iterator<Item = usize> + '_ {
        self.stages.iter().flat_map(|s| s.fired.iter().copied())
    }
}

/// Number of stages that fire at least one gate.
pub fn depth(s: &Schedule) -> usize {
    s.stages.iter().filter(|st| st.fires()).count()
}

/// Where the local phases end inside a merged PAC schedule, and how the
/// qubits were split. Lets the verifier check phase continuity from the file
/// alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseInfo {
    /// Stages `0..local_stages` are joint local stages; the rest are global.
    pub local_stages: usize,
    pub q1: Vec<usize>,
    pub q2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub format_version: u32,
    pub circuit_digest: String,
    pub array: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseInfo>,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Error)]
pub enum ScheduleFileError {
    #[error("malformed schedule file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schedule format version {0}")]
    Version(u32),
}

impl ScheduleFile {
    pub fn new(schedule: &Schedule, circuit_digest: String, array: usize, phases: Option<PhaseInfo>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            circuit_digest,
            array,
            phases,
            stages: schedule.stages.clone(),
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule { stages: self.stages.clone() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schedule serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleFileError> {
        let f: Self = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION {
            return Err(ScheduleFileError::Version(f.format_version));
        }
        Ok(f)
    }
}
