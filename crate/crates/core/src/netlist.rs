// SPDX-License-Identifier: Apache-2.0

//! Gate-level combinational netlists: bench-style parsing, pretty-printing
//! and fault-free simulation.
//!
//! Grammar, one statement per line, `#` starts a comment:
//!
//! ```text
//! INPUT(<id>)
//! OUTPUT(<id>)
//! <id> = <KIND>(<id>{, <id>})
//! ```
//!
//! Identifiers match `[A-Za-z0-9_]+`; keywords and gate kinds are
//! case-insensitive. Gates may be declared in any order; the parsed circuit
//! stores them topologically sorted.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Dense index of a signal inside one [`Circuit`].
///
/// Primary inputs occupy `0..num_inputs` in declaration order; gate outputs
/// follow in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalId(pub usize);

impl SignalId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
        }
    }

    /// Evaluate the gate function over its input values.
    pub fn eval(self, mut inputs: impl Iterator<Item = bool>) -> bool {
        match self {
            GateKind::And => inputs.all(|v| v),
            GateKind::Nand => !inputs.all(|v| v),
            GateKind::Or => inputs.any(|v| v),
            GateKind::Nor => !inputs.any(|v| v),
            GateKind::Xor => inputs.fold(false, |acc, v| acc ^ v),
            GateKind::Xnor => !inputs.fold(false, |acc, v| acc ^ v),
            GateKind::Not => !inputs.next().unwrap_or(false),
            GateKind::Buf => inputs.next().unwrap_or(false),
        }
    }
}

impl FromStr for GateKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub output: SignalId,
    pub kind: GateKind,
    pub inputs: Vec<SignalId>,
}

/// Fixed-length bit vector used for both test patterns and output responses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(pub Vec<bool>);

/// One assignment of values to a circuit's primary inputs.
pub type Pattern = Bits;
/// Values observed on a circuit's primary outputs.
pub type Response = Bits;

impl Bits {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Bits of `value`, most significant first, `width` wide.
    pub fn from_index(value: u64, width: usize) -> Self {
        Bits(
            (0..width)
                .map(|i| (value >> (width - 1 - i)) & 1 == 1)
                .collect(),
        )
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid bit character {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGateKind { line: usize, kind: String },
    #[error("line {line}: gate {kind} driving `{signal}` has {got} inputs")]
    BadArity {
        line: usize,
        signal: String,
        kind: GateKind,
        got: usize,
    },
    #[error("line {line}: signal `{signal}` is used but never declared or driven")]
    UndeclaredSignal { line: usize, signal: String },
    #[error("line {line}: signal `{signal}` is driven more than once")]
    MultiplyDriven { line: usize, signal: String },
    #[error("line {line}: output `{signal}` declared more than once")]
    DuplicateOutput { line: usize, signal: String },
    #[error("cyclic dependency through signal `{signal}`")]
    Cyclic { signal: String },
    #[error("pattern has {got} bits but the circuit has {expected} inputs")]
    PatternLength { expected: usize, got: usize },
}

/// Gate-level combinational circuit with gates in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub name: String,
    pub inputs: Vec<SignalId>,
    pub outputs: Vec<SignalId>,
    pub gates: Vec<Gate>,
    signal_names: Vec<String>,
}

impl Circuit {
    /// Build a circuit from already-interned parts.
    ///
    /// Signal ids must be dense: inputs `0..inputs.len()`, then one id per
    /// gate in the order the gates are listed, each gate reading only
    /// lower ids.
    pub fn from_parts(
        name: impl Into<String>,
        signal_names: Vec<String>,
        num_inputs: usize,
        outputs: Vec<SignalId>,
        gates: Vec<Gate>,
    ) -> Self {
        assert_eq!(signal_names.len(), num_inputs + gates.len());
        for (pos, g) in gates.iter().enumerate() {
            assert_eq!(g.output.0, num_inputs + pos, "gate ids must be dense");
            assert!(g.inputs.iter().all(|s| s.0 < g.output.0));
            assert!(if g.kind.is_unary() {
                g.inputs.len() == 1
            } else {
                g.inputs.len() >= 2
            });
        }
        assert!(outputs.iter().all(|s| s.0 < signal_names.len()));
        Circuit {
            name: name.into(),
            inputs: (0..num_inputs).map(SignalId).collect(),
            outputs,
            gates,
            signal_names,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn signal_count(&self) -> usize {
        self.signal_names.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.signal_names[id.0]
    }

    pub fn signal_names(&self) -> &[String] {
        &self.signal_names
    }

    pub fn signal_by_name(&self, name: &str) -> Option<SignalId> {
        self.signal_names
            .iter()
            .position(|n| n == name)
            .map(SignalId)
    }

    /// Fault-free response of the circuit to `pattern`.
    pub fn evaluate(&self, pattern: &Pattern) -> Result<Response, NetlistError> {
        self.evaluate_with_override(pattern, None)
    }

    /// Evaluate with one signal forced to a constant before any reader sees it.
    pub fn evaluate_with_override(
        &self,
        pattern: &Pattern,
        forced: Option<(SignalId, bool)>,
    ) -> Result<Response, NetlistError> {
        let mut values = vec![false; self.signal_count()];
        self.simulate_into(pattern, forced, &mut values)?;
        Ok(Bits(self.outputs.iter().map(|o| values[o.0]).collect()))
    }

    /// Compute every signal value into `values` (length `signal_count`).
    pub fn simulate_into(
        &self,
        pattern: &Pattern,
        forced: Option<(SignalId, bool)>,
        values: &mut [bool],
    ) -> Result<(), NetlistError> {
        if pattern.len() != self.num_inputs() {
            return Err(NetlistError::PatternLength {
                expected: self.num_inputs(),
                got: pattern.len(),
            });
        }
        debug_assert_eq!(values.len(), self.signal_count());
        for (id, &bit) in self.inputs.iter().zip(pattern.as_slice()) {
            values[id.0] = bit;
        }
        if let Some((sig, v)) = forced {
            if sig.0 < self.num_inputs() {
                values[sig.0] = v;
            }
        }
        for g in &self.gates {
            let out = g.kind.eval(g.inputs.iter().map(|s| values[s.0]));
            values[g.output.0] = match forced {
                Some((sig, v)) if sig == g.output => v,
                _ => out,
            };
        }
        Ok(())
    }

    /// Render the circuit back into bench text.
    pub fn to_bench(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.name.is_empty() {
            writeln!(f, "# {}", self.name)?;
        }
        for i in &self.inputs {
            writeln!(f, "INPUT({})", self.signal_name(*i))?;
        }
        for o in &self.outputs {
            writeln!(f, "OUTPUT({})", self.signal_name(*o))?;
        }
        for g in &self.gates {
            write!(f, "{} = {}(", self.signal_name(g.output), g.kind)?;
            for (n, s) in g.inputs.iter().enumerate() {
                if n > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(self.signal_name(*s))?;
            }
            writeln!(f, ")")?;
        }
        Ok(())
    }
}

enum Statement {
    Input(String),
    Output(String),
    Gate {
        output: String,
        kind: GateKind,
        inputs: Vec<String>,
    },
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.text[..self.pos].chars().count() + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn ident(&mut self) -> Result<&'a str, NetlistError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += len;
        Ok(&self.text[start..start + len])
    }

    fn expect(&mut self, ch: char) -> Result<(), NetlistError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{ch}`")))
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn finish(&mut self) -> Result<(), NetlistError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }
}

fn parse_statement(line: usize, text: &str) -> Result<Statement, NetlistError> {
    let mut cur = Cursor { line, text, pos: 0 };
    let first = cur.ident()?;
    match cur.peek() {
        Some('(')
            if first.eq_ignore_ascii_case("INPUT") || first.eq_ignore_ascii_case("OUTPUT") =>
        {
            cur.expect('(')?;
            let id = cur.ident()?.to_string();
            cur.expect(')')?;
            cur.finish()?;
            if first.eq_ignore_ascii_case("INPUT") {
                Ok(Statement::Input(id))
            } else {
                Ok(Statement::Output(id))
            }
        }
        Some('=') => {
            cur.expect('=')?;
            let kind_name = cur.ident()?;
            let kind =
                kind_name
                    .parse::<GateKind>()
                    .map_err(|_| NetlistError::UnknownGateKind {
                        line,
                        kind: kind_name.to_string(),
                    })?;
            cur.expect('(')?;
            let mut inputs = vec![cur.ident()?.to_string()];
            loop {
                match cur.peek() {
                    Some(',') => {
                        cur.expect(',')?;
                        inputs.push(cur.ident()?.to_string());
                    }
                    Some(')') => {
                        cur.expect(')')?;
                        break;
                    }
                    _ => return Err(cur.error("expected `,` or `)`")),
                }
            }
            cur.finish()?;
            let arity_ok = if kind.is_unary() {
                inputs.len() == 1
            } else {
                inputs.len() >= 2
            };
            if !arity_ok {
                return Err(NetlistError::BadArity {
                    line,
                    signal: first.to_string(),
                    kind,
                    got: inputs.len(),
                });
            }
            Ok(Statement::Gate {
                output: first.to_string(),
                kind,
                inputs,
            })
        }
        _ => Err(cur.error("expected `(` or `=`")),
    }
}

struct GateDecl {
    line: usize,
    output: String,
    kind: GateKind,
    inputs: Vec<String>,
}

/// Parse bench-format text into a [`Circuit`] with gates in topological order.
pub fn parse_bench(text: &str) -> Result<Circuit, NetlistError> {
    let mut inputs: Vec<String> = Vec::new();
    let mut outputs: Vec<(usize, String)> = Vec::new();
    let mut gates: Vec<GateDecl> = Vec::new();
    // name -> driver: None for a primary input, Some(gate position) otherwise
    let mut drivers: HashMap<String, Option<usize>> = HashMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        match parse_statement(line, body)? {
            Statement::Input(id) => {
                if drivers.insert(id.clone(), None).is_some() {
                    return Err(NetlistError::MultiplyDriven { line, signal: id });
                }
                inputs.push(id);
            }
            Statement::Output(id) => {
                if outputs.iter().any(|(_, o)| *o == id) {
                    return Err(NetlistError::DuplicateOutput { line, signal: id });
                }
                outputs.push((line, id));
            }
            Statement::Gate {
                output,
                kind,
                inputs: ins,
            } => {
                if drivers.insert(output.clone(), Some(gates.len())).is_some() {
                    return Err(NetlistError::MultiplyDriven {
                        line,
                        signal: output,
                    });
                }
                gates.push(GateDecl {
                    line,
                    output,
                    kind,
                    inputs: ins,
                });
            }
        }
    }

    for g in &gates {
        if let Some(missing) = g.inputs.iter().find(|s| !drivers.contains_key(*s)) {
            return Err(NetlistError::UndeclaredSignal {
                line: g.line,
                signal: missing.clone(),
            });
        }
    }
    if let Some((line, missing)) = outputs.iter().find(|(_, o)| !drivers.contains_key(o)) {
        return Err(NetlistError::UndeclaredSignal {
            line: *line,
            signal: missing.clone(),
        });
    }

    // Kahn's algorithm, always releasing the earliest-declared ready gate so
    // that an already sorted netlist keeps its order.
    let mut pending = vec![0usize; gates.len()];
    let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (pos, g) in gates.iter().enumerate() {
        for s in &g.inputs {
            if let Some(Some(src)) = drivers.get(s) {
                pending[pos] += 1;
                fanout[*src].push(pos);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = pending
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(i, _)| Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(Reverse(pos)) = ready.pop() {
        order.push(pos);
        for &next in &fanout[pos] {
            pending[next] -= 1;
            if pending[next] == 0 {
                ready.push(Reverse(next));
            }
        }
    }
    if order.len() != gates.len() {
        let stuck = pending.iter().position(|&n| n > 0).unwrap_or(0);
        return Err(NetlistError::Cyclic {
            signal: gates[stuck].output.clone(),
        });
    }

    let mut ids: HashMap<&str, SignalId> = HashMap::new();
    let mut names = Vec::with_capacity(inputs.len() + gates.len());
    for name in &inputs {
        ids.insert(name, SignalId(names.len()));
        names.push(name.clone());
    }
    for &pos in &order {
        ids.insert(&gates[pos].output, SignalId(names.len()));
        names.push(gates[pos].output.clone());
    }
    let sorted: Vec<Gate> = order
        .iter()
        .map(|&pos| {
            let g = &gates[pos];
            Gate {
                output: ids[g.output.as_str()],
                kind: g.kind,
                inputs: g.inputs.iter().map(|s| ids[s.as_str()]).collect(),
            }
        })
        .collect();

    Ok(Circuit {
        name: String::new(),
        inputs: (0..inputs.len()).map(SignalId).collect(),
        outputs: outputs.iter().map(|(_, o)| ids[o.as_str()]).collect(),
        gates: sorted,
        signal_names: names,
    })
}
