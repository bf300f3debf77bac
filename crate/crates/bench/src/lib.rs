// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the criterion targets.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvopt_core::corpus::{item_rng, random_circuit, GeneratorConfig};
use tvopt_core::faultsim::random_patterns;
use tvopt_core::netlist::{Circuit, Pattern};

/// A generated 10-input circuit with `gates` gates and `patterns` random patterns.
pub fn circuit_fixture(gates: usize, patterns: usize) -> (Arc<Circuit>, Vec<Pattern>) {
    let cfg = GeneratorConfig {
        inputs_min: 10,
        inputs_max: 10,
        gates_min: gates,
        gates_max: gates,
    };
    let circuit = random_circuit("bench", &cfg, &mut item_rng(1, 0));
    let pats = random_patterns(circuit.num_inputs(), patterns, 3);
    (Arc::new(circuit), pats)
}

/// Uniform rows in [-2, 2) with a linearly separable 0/1 label.
pub fn feature_fixture(rows: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| f64::from(u8::from(r[0] + r[1] > 0.0)))
        .collect();
    (x, y)
}
