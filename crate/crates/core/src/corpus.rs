// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic corpus: random combinational netlists, each with one
//! injected stuck-at fault diagnosed against its fault dictionary.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::diagnosis::{trace_diagnosis, DiagnosisError, DiagnosisTrace};
use crate::faultsim::{
    build_fault_dictionary, exhaustive_patterns, random_patterns, Fault, FaultDictionary,
    FaultSimError, MAX_EXHAUSTIVE_INPUTS,
};
use crate::netlist::{Circuit, Gate, GateKind, SignalId};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    FaultSim(#[from] FaultSimError),
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error("circuit `{0}` has no fault detectable by its pattern set")]
    NothingDetectable(String),
    #[error("invalid corpus configuration: {0}")]
    Config(String),
    #[error("no netlists supplied")]
    NoNetlists,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed corpus file: {0}")]
    Malformed(String),
}

/// Shape of generated netlists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub inputs_min: usize,
    pub inputs_max: usize,
    pub gates_min: usize,
    pub gates_max: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            inputs_min: 4,
            inputs_max: 10,
            gates_min: 12,
            gates_max: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub circuits: usize,
    pub patterns_per_circuit: usize,
    /// Apply every input assignment instead of random patterns (≤ 12 inputs).
    pub exhaustive: bool,
    pub seed: u64,
    pub generator: GeneratorConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            circuits: 150,
            patterns_per_circuit: 128,
            exhaustive: false,
            seed: 7,
            generator: GeneratorConfig::default(),
        }
    }
}

impl CorpusConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let g = &self.generator;
        let bad = |m: &str| Err(CorpusError::Config(m.into()));
        if self.circuits == 0 {
            return bad("circuits must be positive");
        }
        if !self.exhaustive && self.patterns_per_circuit == 0 {
            return bad("patterns_per_circuit must be positive");
        }
        if g.inputs_min < 2 || g.inputs_min > g.inputs_max {
            return bad("need 2 <= inputs_min <= inputs_max");
        }
        if g.gates_min == 0 || g.gates_min > g.gates_max {
            return bad("need 1 <= gates_min <= gates_max");
        }
        if self.exhaustive && g.inputs_max > MAX_EXHAUSTIVE_INPUTS {
            return bad("exhaustive patterns need inputs_max <= 12");
        }
        Ok(())
    }
}

/// Per-item generator derived from the corpus seed.
pub fn item_rng(seed: u64, item: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item as u64 + 1);
    rng
}

const BINARY_KINDS: [GateKind; 6] = [
    GateKind::And,
    GateKind::Nand,
    GateKind::Or,
    GateKind::Nor,
    GateKind::Xor,
    GateKind::Xnor,
];

/// Random acyclic netlist with fan-in at most 2.
///
/// The first operand of each gate is the oldest signal without fanout, so
/// every primary input is consumed before gate outputs are; the second
/// operand is uniform over earlier signals. Signals left without fanout
/// become the primary outputs.
pub fn random_circuit<R: Rng>(name: &str, cfg: &GeneratorConfig, rng: &mut R) -> Circuit {
    let num_inputs = rng.gen_range(cfg.inputs_min..=cfg.inputs_max);
    let num_gates = rng.gen_range(cfg.gates_min..=cfg.gates_max);
    let mut names: Vec<String> = (0..num_inputs).map(|i| format!("i{i}")).collect();
    let mut unused: VecDeque<usize> = (0..num_inputs).collect();
    let mut fanout = vec![0usize; num_inputs + num_gates];
    let mut gates = Vec::with_capacity(num_gates);
    for g in 0..num_gates {
        let out = num_inputs + g;
        let first = loop {
            let s = unused.pop_front().expect("pool never drains");
            if fanout[s] == 0 {
                break s;
            }
        };
        let (kind, inputs) = if rng.gen_bool(0.1) {
            (GateKind::Not, vec![first])
        } else {
            let mut second = rng.gen_range(0..out - 1);
            if second >= first {
                second += 1;
            }
            (*BINARY_KINDS.choose(rng).unwrap(), vec![first, second])
        };
        for &s in &inputs {
            fanout[s] += 1;
        }
        unused.push_back(out);
        names.push(format!("n{g}"));
        gates.push(Gate {
            output: SignalId(out),
            kind,
            inputs: inputs.into_iter().map(SignalId).collect(),
        });
    }
    let outputs = (0..num_inputs + num_gates)
        .filter(|&s| fanout[s] == 0)
        .map(SignalId)
        .collect();
    Circuit::from_parts(name, names, num_inputs, outputs, gates)
}

/// One diagnosed circuit of the corpus.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub circuit: Arc<Circuit>,
    pub dictionary: FaultDictionary,
    pub trace: DiagnosisTrace,
}

fn diagnose<R: Rng>(
    circuit: Arc<Circuit>,
    cfg: &CorpusConfig,
    rng: &mut R,
) -> Result<CorpusEntry, CorpusError> {
    let (patterns, seed) = if cfg.exhaustive {
        (exhaustive_patterns(circuit.num_inputs())?, None)
    } else {
        let s: u64 = rng.gen();
        (
            random_patterns(circuit.num_inputs(), cfg.patterns_per_circuit, s),
            Some(s),
        )
    };
    let dictionary = build_fault_dictionary(circuit.clone(), patterns, seed)?;
    let detected = dictionary.detected_faults();
    let &pick = detected
        .choose(rng)
        .ok_or_else(|| CorpusError::NothingDetectable(circuit.name.clone()))?;
    let trace = trace_diagnosis(&dictionary, dictionary.faults[pick])?;
    Ok(CorpusEntry {
        circuit,
        dictionary,
        trace,
    })
}

pub fn circuit_id(index: usize) -> String {
    format!("c{index:04}")
}

/// Generate and diagnose `cfg.circuits` random circuits.
///
/// Each circuit draws from its own stream of the corpus seed, so the result
/// does not depend on scheduling.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<CorpusEntry>, CorpusError> {
    cfg.validate()?;
    (0..cfg.circuits)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(cfg.seed, i);
            let circuit = Arc::new(random_circuit(&circuit_id(i), &cfg.generator, &mut rng));
            diagnose(circuit, cfg, &mut rng)
        })
        .collect()
}

/// Diagnose user-supplied netlists, cycling through them until
/// `cfg.circuits` traces exist. Each trace gets its own injected fault.
pub fn corpus_from_netlists(
    netlists: &[Circuit],
    cfg: &CorpusConfig,
) -> Result<Vec<CorpusEntry>, CorpusError> {
    if netlists.is_empty() {
        return Err(CorpusError::NoNetlists);
    }
    if cfg.circuits == 0 {
        return Err(CorpusError::Config("circuits must be positive".into()));
    }
    (0..cfg.circuits)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(cfg.seed, i);
            let base = &netlists[i % netlists.len()];
            let circuit = Arc::new(base.clone().with_name(format!("{}_{i:04}", base.name)));
            diagnose(circuit, cfg, &mut rng)
        })
        .collect()
}

pub const MANIFEST_HEADER: &str =
    "circuit_id,num_inputs,num_gates,total_patterns,fault_signal,fault_name,stuck_value,pattern_seed";

/// Per-circuit facts that the trace file does not carry.
pub fn write_manifest<W: Write>(entries: &[CorpusEntry], mut out: W) -> io::Result<()> {
    writeln!(out, "{MANIFEST_HEADER}")?;
    for e in entries {
        let f = e.trace.injected_fault;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.trace.circuit_id,
            e.circuit.num_inputs(),
            e.circuit.gates.len(),
            e.trace.total_patterns,
            f.signal.0,
            e.circuit.signal_name(f.signal),
            u8::from(f.stuck_value),
            e.dictionary.seed.map(|s| s.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Rebuild traces from a manifest and a trace file.
pub fn read_traces<M: Read, T: Read>(
    manifest: M,
    traces: T,
) -> Result<Vec<DiagnosisTrace>, CorpusError> {
    struct Partial {
        num_inputs: usize,
        total: usize,
        fault: Fault,
        failing: Vec<usize>,
        sizes: Vec<usize>,
    }
    let field = |rec: &csv::StringRecord, i: usize| -> Result<usize, CorpusError> {
        rec.get(i)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| CorpusError::Malformed(format!("bad field {i} in {rec:?}")))
    };
    let mut order = Vec::new();
    let mut by_id: BTreeMap<String, Partial> = BTreeMap::new();
    for rec in csv::Reader::from_reader(manifest).records() {
        let rec = rec?;
        let id = rec[0].to_string();
        let stuck = field(&rec, 6)?;
        by_id.insert(
            id.clone(),
            Partial {
                num_inputs: field(&rec, 1)?,
                total: field(&rec, 3)?,
                fault: Fault::new(SignalId(field(&rec, 4)?), stuck == 1),
                failing: Vec::new(),
                sizes: Vec::new(),
            },
        );
        order.push(id);
    }
    for rec in csv::Reader::from_reader(traces).records() {
        let rec = rec?;
        let p = by_id.get_mut(&rec[0]).ok_or_else(|| {
            CorpusError::Malformed(format!("trace for unknown circuit `{}`", &rec[0]))
        })?;
        let k = field(&rec, 2)?;
        if k != p.failing.len() + 1 {
            return Err(CorpusError::Malformed(format!(
                "out-of-order trace rows for `{}`",
                &rec[0]
            )));
        }
        p.failing.push(field(&rec, 3)?);
        p.sizes.push(field(&rec, 4)?);
    }
    order
        .into_iter()
        .map(|id| {
            let p = by_id.remove(&id).expect("inserted above");
            if p.failing.is_empty() {
                return Err(CorpusError::Malformed(format!(
                    "circuit `{id}` has no trace rows"
                )));
            }
            Ok(DiagnosisTrace::from_sizes(
                id,
                p.num_inputs,
                p.total,
                p.failing,
                p.sizes,
                p.fault,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::write_traces_csv;
    use crate::netlist::parse_bench;

    #[test]
    fn generated_circuits_are_well_formed() {
        let cfg = GeneratorConfig::default();
        let mut rng = item_rng(3, 0);
        for i in 0..50 {
            let c = random_circuit(&circuit_id(i), &cfg, &mut rng);
            assert!((cfg.inputs_min..=cfg.inputs_max).contains(&c.num_inputs()));
            assert!((cfg.gates_min..=cfg.gates_max).contains(&c.gates.len()));
            assert!(!c.outputs.is_empty());
            assert!(c.gates.iter().all(|g| g.inputs.len() <= 2));
            // the printed netlist parses back to the same structure
            let back = parse_bench(&c.to_bench())
                .unwrap()
                .with_name(c.name.clone());
            assert_eq!(back, c);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = CorpusConfig {
            circuits: 6,
            patterns_per_circuit: 40,
            ..CorpusConfig::default()
        };
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.trace, y.trace);
            assert_eq!(x.dictionary, y.dictionary);
        }
    }

    #[test]
    fn traces_roundtrip_through_files() {
        let cfg = CorpusConfig {
            circuits: 4,
            patterns_per_circuit: 32,
            ..CorpusConfig::default()
        };
        let entries = generate_corpus(&cfg).unwrap();
        let traces: Vec<_> = entries.iter().map(|e| e.trace.clone()).collect();
        let mut manifest = Vec::new();
        write_manifest(&entries, &mut manifest).unwrap();
        let mut tfile = Vec::new();
        write_traces_csv(&traces, &mut tfile).unwrap();
        let back = read_traces(manifest.as_slice(), tfile.as_slice()).unwrap();
        assert_eq!(back, traces);
    }

    #[test]
    fn netlist_corpus_cycles_inputs() {
        let c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = XOR(a, b)")
            .unwrap()
            .with_name("x");
        let cfg = CorpusConfig {
            circuits: 3,
            exhaustive: true,
            ..CorpusConfig::default()
        };
        let entries = corpus_from_netlists(&[c], &cfg).unwrap();
        let ids: Vec<_> = entries
            .iter()
            .map(|e| e.trace.circuit_id.as_str())
            .collect();
        assert_eq!(ids, ["x_0000", "x_0001", "x_0002"]);
        assert!(matches!(
            corpus_from_netlists(&[], &cfg),
            Err(CorpusError::NoNetlists)
        ));
    }

    #[test]
    fn config_validation() {
        let bad = CorpusConfig {
            exhaustive: true,
            generator: GeneratorConfig {
                inputs_max: 14,
                ..GeneratorConfig::default()
            },
            ..CorpusConfig::default()
        };
        assert!(matches!(generate_corpus(&bad), Err(CorpusError::Config(_))));
    }
}
