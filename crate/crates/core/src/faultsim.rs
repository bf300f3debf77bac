// SPDX-License-Identifier: Apache-2.0

//! Single stuck-at fault simulation and the fault dictionary.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::netlist::{Bits, Circuit, NetlistError, Pattern, Response, SignalId};

/// Largest input count for which exhaustive pattern sets are allowed.
pub const MAX_EXHAUSTIVE_INPUTS: usize = 12;

/// A signal permanently fixed at logic 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fault {
    pub signal: SignalId,
    pub stuck_value: bool,
}

impl Fault {
    pub fn new(signal: SignalId, stuck_value: bool) -> Self {
        Fault {
            signal,
            stuck_value,
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}/sa{}", self.signal.0, u8::from(self.stuck_value))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FaultSimError {
    #[error("fault site {0:?} does not exist in the circuit")]
    UnknownSignal(SignalId),
    #[error("pattern list is empty")]
    NoPatterns,
    #[error("exhaustive patterns requested for {0} inputs (limit {MAX_EXHAUSTIVE_INPUTS})")]
    TooManyInputs(usize),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// All single stuck-at faults, ordered by signal id then stuck value 0 before 1.
pub fn enumerate_faults(circuit: &Circuit) -> Vec<Fault> {
    (0..circuit.signal_count())
        .flat_map(|s| [false, true].map(|v| Fault::new(SignalId(s), v)))
        .collect()
}

/// Response of `circuit` to `pattern` with `fault` injected.
pub fn simulate_faulty(
    circuit: &Circuit,
    fault: Fault,
    pattern: &Pattern,
) -> Result<Response, FaultSimError> {
    if fault.signal.0 >= circuit.signal_count() {
        return Err(FaultSimError::UnknownSignal(fault.signal));
    }
    Ok(circuit.evaluate_with_override(pattern, Some((fault.signal, fault.stuck_value)))?)
}

/// `count` uniformly random patterns from a seeded generator.
pub fn random_patterns(num_inputs: usize, count: usize, seed: u64) -> Vec<Pattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Bits((0..num_inputs).map(|_| rng.gen::<bool>()).collect()))
        .collect()
}

/// Every input assignment in counting order, first input as the most significant bit.
pub fn exhaustive_patterns(num_inputs: usize) -> Result<Vec<Pattern>, FaultSimError> {
    if num_inputs > MAX_EXHAUSTIVE_INPUTS {
        return Err(FaultSimError::TooManyInputs(num_inputs));
    }
    Ok((0..1u64 << num_inputs)
        .map(|i| Bits::from_index(i, num_inputs))
        .collect())
}

/// Precomputed response of every fault to every pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultDictionary {
    pub circuit: Arc<Circuit>,
    pub patterns: Vec<Pattern>,
    pub faults: Vec<Fault>,
    pub fault_free: Vec<Response>,
    /// Seed of the pattern generator, `None` for exhaustive or user-supplied sets.
    pub seed: Option<u64>,
    responses: Vec<Response>,
}

impl FaultDictionary {
    pub fn num_patterns(&self) -> usize {
        self.patterns.len()
    }

    pub fn num_faults(&self) -> usize {
        self.faults.len()
    }

    /// Response of fault number `fault` to pattern number `pattern` (both 0-based).
    pub fn response(&self, fault: usize, pattern: usize) -> &Response {
        &self.responses[fault * self.patterns.len() + pattern]
    }

    /// All responses of one fault, in pattern order.
    pub fn fault_row(&self, fault: usize) -> &[Response] {
        let p = self.patterns.len();
        &self.responses[fault * p..(fault + 1) * p]
    }

    pub fn fault_index(&self, fault: Fault) -> Option<usize> {
        self.faults.iter().position(|f| *f == fault)
    }

    pub fn is_detected(&self, fault: usize) -> bool {
        self.fault_row(fault) != self.fault_free.as_slice()
    }

    /// Indices of faults whose response differs from fault-free on some pattern.
    pub fn detected_faults(&self) -> Vec<usize> {
        (0..self.faults.len())
            .filter(|&f| self.is_detected(f))
            .collect()
    }

    /// Write the columnar dictionary export.
    ///
    /// Header: `# circuit <name> faults <F> patterns <P> seed <seed|none>`,
    /// then one `<fault_signal> <stuck_value> <pattern_index> <response_bits>`
    /// line per (fault, pattern) with 1-based pattern indices.
    pub fn write_export<W: Write>(&self, mut out: W) -> io::Result<()> {
        let seed = self
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".into());
        writeln!(
            out,
            "# circuit {} faults {} patterns {} seed {}",
            self.circuit.name,
            self.faults.len(),
            self.patterns.len(),
            seed
        )?;
        for (fi, fault) in self.faults.iter().enumerate() {
            let name = self.circuit.signal_name(fault.signal);
            for (pi, resp) in self.fault_row(fi).iter().enumerate() {
                writeln!(
                    out,
                    "{} {} {} {}",
                    name,
                    u8::from(fault.stuck_value),
                    pi + 1,
                    resp
                )?;
            }
        }
        Ok(())
    }
}

/// Simulate every uncollapsed fault against every pattern.
///
/// Work fans out over faults; rows are assembled by index so the table is
/// identical to a serial build.
pub fn build_fault_dictionary(
    circuit: Arc<Circuit>,
    patterns: Vec<Pattern>,
    seed: Option<u64>,
) -> Result<FaultDictionary, FaultSimError> {
    if patterns.is_empty() {
        return Err(FaultSimError::NoPatterns);
    }
    let fault_free = patterns
        .iter()
        .map(|p| circuit.evaluate(p))
        .collect::<Result<Vec<_>, _>>()?;
    let faults = enumerate_faults(&circuit);
    let rows: Vec<Vec<Response>> = faults
        .par_iter()
        .map(|&fault| {
            let mut values = vec![false; circuit.signal_count()];
            patterns
                .iter()
                .zip(&fault_free)
                .map(|(p, good)| {
                    circuit.simulate_into(p, None, &mut values)?;
                    // unexcited fault: nothing to propagate
                    if values[fault.signal.0] == fault.stuck_value {
                        return Ok(good.clone());
                    }
                    simulate_faulty(&circuit, fault, p)
                })
                .collect::<Result<Vec<_>, FaultSimError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(FaultDictionary {
        circuit,
        patterns,
        faults,
        fault_free,
        seed,
        responses: rows.into_iter().flatten().collect(),
    })
}
