// SPDX-License-Identifier: Apache-2.0

//! Simulation checked against hand-written and netlist-rewriting oracles.

use std::sync::Arc;

use tvopt_core::corpus::{item_rng, random_circuit, GeneratorConfig};
use tvopt_core::diagnosis::{failing_patterns, intermediate_candidates, trace_diagnosis};
use tvopt_core::faultsim::{
    build_fault_dictionary, enumerate_faults, exhaustive_patterns, random_patterns, simulate_faulty,
};
use tvopt_core::netlist::{parse_bench, Bits, Circuit};
use tvopt_core::Fault;

const C17: &str = include_str!("fixtures/c17.bench");

fn c17() -> Circuit {
    parse_bench(C17).unwrap().with_name("c17")
}

fn nand(a: bool, b: bool) -> bool {
    !(a && b)
}

// Direct transcription of the c17 equations.
fn c17_by_hand(i1: bool, i2: bool, i3: bool, i6: bool, i7: bool) -> [bool; 2] {
    let n10 = nand(i1, i3);
    let n11 = nand(i3, i6);
    let n16 = nand(i2, n11);
    let n19 = nand(n11, i7);
    [nand(n10, n16), nand(n16, n19)]
}

#[test]
fn c17_shape() {
    let c = c17();
    assert_eq!(c.num_inputs(), 5);
    assert_eq!(c.num_outputs(), 2);
    assert_eq!(c.gates.len(), 6);
    assert_eq!(c.signal_count(), 11);
    assert_eq!(enumerate_faults(&c).len(), 22);
}

#[test]
fn c17_matches_truth_table() {
    let c = c17();
    for v in 0..32u64 {
        let p = Bits::from_index(v, 5);
        let b = &p.0;
        let want = c17_by_hand(b[0], b[1], b[2], b[3], b[4]);
        assert_eq!(c.evaluate(&p).unwrap().0, want.to_vec(), "pattern {p}");
    }
}

#[test]
fn bench_text_roundtrips() {
    let c = c17();
    let again = parse_bench(&c.to_bench()).unwrap().with_name("c17");
    assert_eq!(again, c);
}

/// Rebuild the netlist with the fault site driven by a constant built from
/// ordinary gates (`x AND NOT x` or `x OR NOT x`).
fn rewrite_with_stuck_signal(c: &Circuit, fault: Fault) -> Circuit {
    let site = c.signal_name(fault.signal).to_string();
    let orig = format!("{site}__orig");
    let mut lines = Vec::new();
    for line in c.to_bench().lines() {
        if line == format!("INPUT({site})") {
            lines.push(format!("INPUT({orig})"));
        } else if let Some(rest) = line.strip_prefix(&format!("{site} = ")) {
            lines.push(format!("{orig} = {rest}"));
        } else {
            lines.push(line.to_string());
        }
    }
    let kind = if fault.stuck_value { "OR" } else { "AND" };
    lines.push(format!("{site}__n = NOT({orig})"));
    lines.push(format!("{site} = {kind}({orig}, {site}__n)"));
    parse_bench(&lines.join("\n")).unwrap()
}

fn check_against_rewrite(c: &Circuit, patterns: &[Bits]) {
    for fault in enumerate_faults(c) {
        let rewritten = rewrite_with_stuck_signal(c, fault);
        for p in patterns {
            assert_eq!(
                simulate_faulty(c, fault, p).unwrap(),
                rewritten.evaluate(p).unwrap(),
                "fault {fault} pattern {p}"
            );
        }
    }
}

#[test]
fn faulty_simulation_matches_rewritten_netlist_c17() {
    let c = c17();
    check_against_rewrite(&c, &exhaustive_patterns(5).unwrap());
}

#[test]
fn faulty_simulation_matches_rewritten_netlist_random_circuits() {
    let cfg = GeneratorConfig::default();
    for i in 0..8 {
        let c = random_circuit("r", &cfg, &mut item_rng(99, i));
        check_against_rewrite(&c, &random_patterns(c.num_inputs(), 24, i as u64));
    }
}

#[test]
fn dictionary_detection_matches_brute_force() {
    let c = Arc::new(c17());
    let pats = exhaustive_patterns(5).unwrap();
    let dict = build_fault_dictionary(c.clone(), pats.clone(), None).unwrap();
    assert_eq!(dict.num_faults(), 22);
    assert_eq!(dict.num_patterns(), 32);
    for (fi, &fault) in dict.faults.iter().enumerate() {
        let brute: Vec<usize> = (0..pats.len())
            .filter(|&p| {
                simulate_faulty(&c, fault, &pats[p]).unwrap() != c.evaluate(&pats[p]).unwrap()
            })
            .collect();
        assert_eq!(failing_patterns(&dict, fi), brute, "fault {fault}");
        assert_eq!(dict.is_detected(fi), !brute.is_empty());
    }
    // every c17 fault is detectable exhaustively
    assert_eq!(dict.detected_faults().len(), 22);
}

#[test]
fn candidate_sets_match_brute_force() {
    let c = Arc::new(c17());
    let pats = random_patterns(5, 12, 4);
    let dict = build_fault_dictionary(c.clone(), pats.clone(), Some(4)).unwrap();
    let faults = enumerate_faults(&c);
    for &injected in &faults {
        let observed: Vec<Bits> = pats
            .iter()
            .map(|p| simulate_faulty(&c, injected, p).unwrap())
            .collect();
        let failing: Vec<usize> = (0..pats.len())
            .filter(|&p| observed[p] != c.evaluate(&pats[p]).unwrap())
            .collect();
        let result = intermediate_candidates(&dict, injected);
        if failing.is_empty() {
            assert!(result.is_err());
            continue;
        }
        let (got_failing, sets) = result.unwrap();
        assert_eq!(got_failing, failing);
        for (k, &pk) in failing.iter().enumerate() {
            let brute: Vec<usize> = (0..faults.len())
                .filter(|&f| {
                    (0..=pk)
                        .all(|p| simulate_faulty(&c, faults[f], &pats[p]).unwrap() == observed[p])
                })
                .collect();
            assert_eq!(sets[k], brute, "injected {injected} step {k}");
        }
        // the injected fault always survives, and sets shrink
        let inj = dict.fault_index(injected).unwrap();
        assert!(sets.iter().all(|s| s.contains(&inj)));
        assert!(sets.windows(2).all(|w| w[1].len() <= w[0].len()));
    }
}

#[test]
fn parallel_dictionary_equals_serial_rebuild() {
    let cfg = GeneratorConfig::default();
    let c = Arc::new(random_circuit("r", &cfg, &mut item_rng(5, 3)));
    let pats = random_patterns(c.num_inputs(), 64, 8);
    let dict = build_fault_dictionary(c.clone(), pats.clone(), Some(8)).unwrap();
    for (fi, &fault) in dict.faults.iter().enumerate() {
        for (p, pat) in pats.iter().enumerate() {
            assert_eq!(
                dict.response(fi, p),
                &simulate_faulty(&c, fault, pat).unwrap()
            );
        }
    }
}

#[test]
fn trace_golden_size_is_last_intermediate() {
    let c = Arc::new(c17());
    let dict = build_fault_dictionary(c.clone(), exhaustive_patterns(5).unwrap(), None).unwrap();
    for &fault in &dict.faults {
        let t = trace_diagnosis(&dict, fault).unwrap();
        assert_eq!(t.golden_size, *t.intermediate_sizes.last().unwrap());
        assert_eq!(*t.m_values.last().unwrap(), 1.0);
        assert!(t.failing_indices.iter().all(|&i| (1..=32).contains(&i)));
    }
}
