//! Commutable two-qubit-gate circuits.
//!
//! A circuit is a qubit count plus a multiset of interacting pairs. Gate order
//! carries no meaning: every gate commutes with every other, so the list is
//! an edge list of a (multi)graph over the qubits.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Upper bound on configuration-model restarts before giving up.
const MAX_PAIRING_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: qubit {qubit} out of range for {count} qubits")]
    QubitRange { line: usize, qubit: usize, count: usize },
    #[error("line {line}: self-loop on qubit {qubit}")]
    SelfLoop { line: usize, qubit: usize },
    #[error("missing qubit count line")]
    MissingHeader,
    #[error("no 3-regular graph on {0} vertices (need an even count of at least 4)")]
    NoRegularGraph(usize),
    #[error("gave up after {0} pairing attempts")]
    PairingExhausted(usize),
}

/// A two-qubit gate. Endpoint order is preserved as written but is not
/// significant for scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gate(pub usize, pub usize);

impl Gate {
    pub fn touches(&self, q: usize) -> bool {
        self.0 == q || self.1 == q
    }

    /// Endpoints with the smaller id first.
    pub fn sorted(&self) -> (usize, usize) {
        if self.0 <= self.1 {
            (self.0, self.1)
        } else {
            (self.1, self.0)
        }
    }

    pub fn other(&self, q: usize) -> usize {
        if self.0 == q {
            self.1
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    name: String,
}

impl Circuit {
    /// Builds a circuit, checking that every gate has two distinct in-range
    /// endpoints.
    pub fn new(
        num_qubits: usize,
        gates: impl IntoIterator<Item = (usize, usize)>,
        name: impl Into<String>,
    ) -> Result<Self, CircuitError> {
        let mut out = Vec::new();
        for (i, (a, b)) in gates.into_iter().enumerate() {
            for q in [a, b] {
                if q >= num_qubits {
                    return Err(CircuitError::QubitRange { line: i + 1, qubit: q, count: num_qubits });
                }
            }
            if a == b {
                return Err(CircuitError::SelfLoop { line: i + 1, qubit: a });
            }
            out.push(Gate(a, b));
        }
        Ok(Self { num_qubits, gates: out, name: name.into() })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Hex SHA-256 over the canonical serialized form.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serialize_circuit(self).as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// A slice of a parent circuit: a qubit subset plus a subset of its gates,
/// both keyed by the parent's ids so schedules stay in the parent numbering.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubCircuit {
    /// Sorted, distinct parent qubit ids.
    pub qubits: Vec<usize>,
    /// `(parent gate index, gate)`, sorted by index.
    pub gates: Vec<(usize, Gate)>,
}

impl SubCircuit {
    pub fn whole(c: &Circuit) -> Self {
        Self {
            qubits: (0..c.num_qubits()).collect(),
            gates: c.gates().iter().copied().enumerate().collect(),
        }
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// Parses the edge-list format: the first non-comment line is the qubit
/// count, each later line holds two qubit ids. `#` starts a comment; a
/// leading `# name: <label>` comment sets the circuit name. Lines with a
/// single id are single-qubit gates and are dropped with a warning.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut name = String::new();
    let mut count: Option<usize> = None;
    let mut gates = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (body, comment) = match raw.find('#') {
            Some(pos) => (&raw[..pos], Some(&raw[pos + 1..])),
            None => (raw, None),
        };
        if count.is_none() && name.is_empty() {
            if let Some(label) = comment.and_then(|c| c.trim().strip_prefix("name:")) {
                name = label.trim().to_string();
            }
        }
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let ids = tokens
            .iter()
            .map(|t| {
                t.parse::<usize>().map_err(|_| CircuitError::Parse {
                    line,
                    msg: format!("expected a non-negative integer, found {t:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let Some(n) = count else {
            if ids.len() != 1 {
                return Err(CircuitError::Parse { line, msg: "expected the qubit count".into() });
            }
            count = Some(ids[0]);
            continue;
        };
        match ids[..] {
            [q] => {
                if q >= n {
                    return Err(CircuitError::QubitRange { line, qubit: q, count: n });
                }
                log::warn!("line {line}: dropping single-qubit gate on qubit {q}");
            }
            [a, b] => {
                for q in [a, b] {
                    if q >= n {
                        return Err(CircuitError::QubitRange { line, qubit: q, count: n });
                    }
                }
                if a == b {
                    return Err(CircuitError::SelfLoop { line, qubit: a });
                }
                gates.push(Gate(a, b));
            }
            _ => {
                return Err(CircuitError::Parse {
                    line,
                    msg: format!("expected two qubit ids, found {} tokens", ids.len()),
                })
            }
        }
    }

    let num_qubits = count.ok_or(CircuitError::MissingHeader)?;
    Ok(Circuit { num_qubits, gates, name })
}

/// Emits the edge-list format read by [`parse_circuit`].
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    if !c.name.is_empty() {
        let _ = writeln!(out, "# name: {}", c.name);
    }
    let _ = writeln!(out, "{}", c.num_qubits);
    for g in &c.gates {
        let _ = writeln!(out, "{} {}", g.0, g.1);
    }
    out
}

/// Per-qubit gate incidence counts.
pub fn degree_sequence(c: &Circuit) -> Vec<usize> {
    let mut deg = vec![0; c.num_qubits];
    for g in &c.gates {
        deg[g.0] += 1;
        deg[g.1] += 1;
    }
    deg
}

/// Random simple 3-regular graph on `n` vertices via the configuration
/// model: shuffle three stubs per vertex, pair them off, and restart whenever
/// a self-loop or repeated edge appears.
pub fn generate_rand3reg(n: usize, seed: u64) -> Result<Circuit, CircuitError> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(CircuitError::NoRegularGraph(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();

    for _ in 0..MAX_PAIRING_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut seen = std::collections::HashSet::with_capacity(stubs.len() / 2);
        let mut gates = Vec::with_capacity(stubs.len() / 2);
        let simple = stubs.chunks_exact(2).all(|pair| {
            let g = Gate(pair[0], pair[1]);
            let ok = pair[0] != pair[1] && seen.insert(g.sorted());
            gates.push(g);
            ok
        });
        if simple {
            return Ok(Circuit { num_qubits: n, gates, name: String::new() });
        }
    }
    Err(CircuitError::PairingExhausted(MAX_PAIRING_ATTEMPTS))
}
