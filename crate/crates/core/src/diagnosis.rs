// SPDX-License-Identifier: Apache-2.0

//! Dictionary-based diagnosis of a failing circuit.
//!
//! The injected fault's pass/fail log is replayed pattern by pattern. After
//! the k-th failing pattern the intermediate candidate set `I_k` holds every
//! fault whose dictionary responses match the observed responses on all
//! patterns applied so far, passing ones included. The golden set is the
//! final `I_K`. For each failing pattern `m_k = |G| / |I_k|` and the label
//! is `y_k = 1` when `m_k = 1`, else `(m_k - m_min) / (1 - m_min)`.

use std::io::{self, Write};

use thiserror::Error;

use crate::faultsim::{Fault, FaultDictionary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagnosisError {
    #[error("fault {0} is not in the dictionary")]
    UnknownFault(Fault),
    #[error("fault {0} is never detected: undiagnosable with this pattern set")]
    Undetected(Fault),
}

/// Faults (as indices into the dictionary's fault list) still consistent with the log.
pub type CandidateSet = Vec<usize>;

/// Per-failing-pattern record of one diagnosis run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosisTrace {
    pub circuit_id: String,
    pub num_inputs: usize,
    pub total_patterns: usize,
    /// 1-based indices of the failing patterns, strictly increasing.
    pub failing_indices: Vec<usize>,
    pub intermediate_sizes: Vec<usize>,
    pub golden_size: usize,
    pub m_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub injected_fault: Fault,
}

impl DiagnosisTrace {
    pub fn len(&self) -> usize {
        self.failing_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.failing_indices.is_empty()
    }

    /// First failing pattern (0-based k) at which diagnosis has converged.
    pub fn convergence_step(&self) -> usize {
        self.m_values
            .iter()
            .position(|&m| m == 1.0)
            .unwrap_or(self.len() - 1)
    }

    /// Assemble a trace from recorded sizes, recomputing `m` and `y`.
    pub fn from_sizes(
        circuit_id: impl Into<String>,
        num_inputs: usize,
        total_patterns: usize,
        failing_indices: Vec<usize>,
        intermediate_sizes: Vec<usize>,
        injected_fault: Fault,
    ) -> Self {
        assert!(!intermediate_sizes.is_empty());
        assert_eq!(failing_indices.len(), intermediate_sizes.len());
        let golden_size = *intermediate_sizes.last().unwrap();
        let m_values: Vec<f64> = intermediate_sizes
            .iter()
            .map(|&s| golden_size as f64 / s as f64)
            .collect();
        let y_values = compute_labels(&m_values);
        DiagnosisTrace {
            circuit_id: circuit_id.into(),
            num_inputs,
            total_patterns,
            failing_indices,
            intermediate_sizes,
            golden_size,
            m_values,
            y_values,
            injected_fault,
        }
    }
}

/// Indices (0-based) of the patterns on which fault `fault` fails.
pub fn failing_patterns(dict: &FaultDictionary, fault: usize) -> Vec<usize> {
    dict.fault_row(fault)
        .iter()
        .zip(&dict.fault_free)
        .enumerate()
        .filter(|(_, (r, good))| r != good)
        .map(|(p, _)| p)
        .collect()
}

/// Intermediate candidate sets `I_1..I_K`, one per failing pattern.
pub fn intermediate_candidates(
    dict: &FaultDictionary,
    injected: Fault,
) -> Result<(Vec<usize>, Vec<CandidateSet>), DiagnosisError> {
    let inj = dict
        .fault_index(injected)
        .ok_or(DiagnosisError::UnknownFault(injected))?;
    let failing = failing_patterns(dict, inj);
    let Some(&last) = failing.last() else {
        return Err(DiagnosisError::Undetected(injected));
    };
    let observed = dict.fault_row(inj);
    let mut candidates: CandidateSet = (0..dict.num_faults()).collect();
    let mut sets = Vec::with_capacity(failing.len());
    let mut next_fail = failing.iter().peekable();
    for (p, seen) in observed.iter().enumerate().take(last + 1) {
        candidates.retain(|&f| dict.response(f, p) == seen);
        if next_fail.next_if_eq(&&p).is_some() {
            sets.push(candidates.clone());
        }
    }
    Ok((failing, sets))
}

/// Replay the injected fault's log against the dictionary.
pub fn trace_diagnosis(
    dict: &FaultDictionary,
    injected: Fault,
) -> Result<DiagnosisTrace, DiagnosisError> {
    let (failing, sets) = intermediate_candidates(dict, injected)?;
    Ok(DiagnosisTrace::from_sizes(
        dict.circuit.name.clone(),
        dict.circuit.num_inputs(),
        dict.num_patterns(),
        failing.iter().map(|p| p + 1).collect(),
        sets.iter().map(Vec::len).collect(),
        injected,
    ))
}

/// Normalized labels from a trace's `m` values; `m_min` is the trace minimum.
pub fn compute_labels(m_values: &[f64]) -> Vec<f64> {
    let m_min = m_values.iter().copied().fold(f64::INFINITY, f64::min);
    m_values
        .iter()
        .map(|&m| {
            if m == 1.0 || m_min >= 1.0 {
                1.0
            } else {
                ((m - m_min) / (1.0 - m_min)).clamp(0.0, 1.0)
            }
        })
        .collect()
}

pub const TRACE_CSV_HEADER: &str =
    "circuit_id,num_inputs,k,failing_index,intermediate_size,golden_size,m,y";

/// Write traces as one comma-separated record per failing pattern.
pub fn write_traces_csv<W: Write>(traces: &[DiagnosisTrace], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for t in traces {
        for k in 0..t.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6}",
                t.circuit_id,
                t.num_inputs,
                k + 1,
                t.failing_indices[k],
                t.intermediate_sizes[k],
                t.golden_size,
                t.m_values[k],
                t.y_values[k]
            )?;
        }
    }
    Ok(())
}
