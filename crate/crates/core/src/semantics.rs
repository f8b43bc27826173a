//! Store-buffer operational semantics: enabledness, instruction application,
//! single flushes, the flush closure, and bounded concrete-state exploration.
//!
//! Buffers are kept newest-first: a write pushes at the front (write end) and
//! an update pops at the back (memory end).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::program::{ConcurrentProgram, Instruction, ProcId, StateId, Transition, ValueId, VarId};

/// A pending write message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BufferMessage {
    pub var: VarId,
    pub value: ValueId,
}

/// A TSO configuration: local states, per-process FIFO buffers and memory.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    /// Local state per process, indexed by `ProcId`.
    pub states: Vec<StateId>,
    /// Per-process buffer, front = newest message, back = oldest.
    pub buffers: Vec<VecDeque<BufferMessage>>,
    /// Memory valuation, indexed by `VarId`.
    pub memory: Vec<ValueId>,
}

impl Configuration {
    /// The canonical initial configuration: initial states, empty buffers,
    /// declared initial memory.
    pub fn initial(p: &ConcurrentProgram) -> Self {
        Configuration {
            states: p.processes.iter().map(|proc| proc.initial).collect(),
            buffers: vec![VecDeque::new(); p.processes.len()],
            memory: p.init_memory.clone(),
        }
    }

    pub fn buffers_empty(&self) -> bool {
        self.buffers.iter().all(|b| b.is_empty())
    }

    /// Newest buffered value on `x` for process `proc`, if any.
    pub fn newest_on(&self, proc: ProcId, x: VarId) -> Option<ValueId> {
        self.buffers[proc.0]
            .iter()
            .find(|m| m.var == x)
            .map(|m| m.value)
    }

    /// The value `proc` reads from `x`: newest buffered write, else memory.
    pub fn readable(&self, proc: ProcId, x: VarId) -> ValueId {
        self.newest_on(proc, x).unwrap_or(self.memory[x.0])
    }

    /// Projection onto a single process: its state and buffer, full memory.
    pub fn project(&self, proc: ProcId) -> Configuration {
        Configuration {
            states: vec![self.states[proc.0]],
            buffers: vec![self.buffers[proc.0].clone()],
            memory: self.memory.clone(),
        }
    }
}

/// Which player is to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Turn {
    ProcessPlayer,
    UpdatePlayer,
}

/// Game configuration: a TSO configuration with a turn tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GameConfiguration {
    pub config: Configuration,
    pub turn: Turn,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("transition {0} is not enabled")]
    DisabledTransition(String),
    #[error("cannot update: buffer of process {0} is empty")]
    EmptyBuffer(String),
    #[error("flush closure exceeds cap of {0} configurations")]
    ClosureCapExceeded(usize),
    #[error("exploration exceeds {0} states")]
    MaxStatesExceeded(usize),
}

fn instr_enabled(p: &ConcurrentProgram, c: &Configuration, proc: ProcId, t: &Transition) -> bool {
    if c.states[proc.0] != t.from {
        return false;
    }
    match t.instr {
        Instruction::Write(_, _) | Instruction::Skip => true,
        Instruction::MemFence => c.buffers[proc.0].is_empty(),
        Instruction::Read(x, d) => {
            debug_assert!(x.0 < p.vars.len());
            c.readable(proc, x) == d
        }
    }
}

/// All instruction transitions enabled at `c`, in (process, transition) order.
pub fn enabled_moves(p: &ConcurrentProgram, c: &Configuration) -> Vec<(ProcId, Transition)> {
    let mut moves = Vec::new();
    for proc in p.proc_ids() {
        let process = p.process(proc);
        for t in process.transitions_from(c.states[proc.0]) {
            if instr_enabled(p, c, proc, t) {
                moves.push((proc, *t));
            }
        }
    }
    moves
}

/// Applies an enabled instruction transition of process `proc`.
pub fn apply_instruction(
    p: &ConcurrentProgram,
    c: &Configuration,
    proc: ProcId,
    t: &Transition,
) -> Result<Configuration, SemanticsError> {
    if !instr_enabled(p, c, proc, t) {
        return Err(SemanticsError::DisabledTransition(format!(
            "{}: {} {} {}",
            p.process(proc).name,
            p.process(proc).state_name(t.from),
            p.process(proc).state_name(t.to),
            p.instr_string(&t.instr)
        )));
    }
    let mut next = c.clone();
    next.states[proc.0] = t.to;
    if let Instruction::Write(x, d) = t.instr {
        next.buffers[proc.0].push_front(BufferMessage { var: x, value: d });
    }
    Ok(next)
}

/// Flushes the oldest buffered message of `proc` into memory.
pub fn apply_update(
    p: &ConcurrentProgram,
    c: &Configuration,
    proc: ProcId,
) -> Result<Configuration, SemanticsError> {
    let mut next = c.clone();
    let msg = next.buffers[proc.0]
        .pop_back()
        .ok_or_else(|| SemanticsError::EmptyBuffer(p.process(proc).name.clone()))?;
    next.memory[msg.var.0] = msg.value;
    Ok(next)
}

/// Default resource guard for materialized flush closures.
pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

/// All configurations reachable from `c` by interleaved single flushes across
/// all processes, including `c` itself. Deterministically ordered.
pub fn update_closure(
    p: &ConcurrentProgram,
    c: &Configuration,
    cap: usize,
) -> Result<BTreeSet<Configuration>, SemanticsError> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(c.clone());
    queue.push_back(c.clone());
    while let Some(cur) = queue.pop_front() {
        for proc in p.proc_ids() {
            if cur.buffers[proc.0].is_empty() {
                continue;
            }
            let next = apply_update(p, &cur, proc)?;
            if seen.insert(next.clone()) {
                if seen.len() > cap {
                    return Err(SemanticsError::ClosureCapExceeded(cap));
                }
                queue.push_back(next);
            }
        }
    }
    Ok(seen)
}

/// Flushes every buffered message of every process, oldest first per process,
/// interleaved round-robin. This is one canonical full flush; different
/// interleavings may disagree on variables written by several processes.
pub fn flush_all(p: &ConcurrentProgram, c: &Configuration) -> Configuration {
    let mut cur = c.clone();
    loop {
        let mut progressed = false;
        for proc in p.proc_ids() {
            if !cur.buffers[proc.0].is_empty() {
                cur = apply_update(p, &cur, proc).expect("nonempty buffer");
                progressed = true;
            }
        }
        if !progressed {
            return cur;
        }
    }
}

/// Label of an explored step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepLabel {
    Instr(ProcId, Transition),
    Update(ProcId),
}

/// Result of `bounded_explore`.
#[derive(Debug, Clone)]
pub struct Exploration {
    /// Discovered configurations; index order is discovery order.
    pub configs: Vec<Configuration>,
    /// Steps between discovered configurations.
    pub steps: Vec<(usize, StepLabel, usize)>,
    /// Indices of configurations where an enabled write was suppressed
    /// because it would exceed the buffer bound.
    pub frontier: BTreeSet<usize>,
}

impl Exploration {
    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.configs.iter().position(|x| x == c)
    }
}

/// Explores all configurations reachable from `c0` by instruction and
/// single-flush steps while every buffer stays within `buffer_bound`.
pub fn bounded_explore(
    p: &ConcurrentProgram,
    c0: &Configuration,
    buffer_bound: usize,
    max_states: usize,
) -> Result<Exploration, SemanticsError> {
    let mut index: BTreeMap<Configuration, usize> = BTreeMap::new();
    let mut configs = Vec::new();
    let mut steps = Vec::new();
    let mut frontier = BTreeSet::new();
    let mut queue = VecDeque::new();

    index.insert(c0.clone(), 0);
    configs.push(c0.clone());
    queue.push_back(0usize);

    while let Some(i) = queue.pop_front() {
        let cur = configs[i].clone();
        let mut successors: Vec<(StepLabel, Configuration)> = Vec::new();
        for (proc, t) in enabled_moves(p, &cur) {
            if matches!(t.instr, Instruction::Write(_, _))
                && cur.buffers[proc.0].len() + 1 > buffer_bound
            {
                frontier.insert(i);
                continue;
            }
            let next = apply_instruction(p, &cur, proc, &t)?;
            successors.push((StepLabel::Instr(proc, t), next));
        }
        for proc in p.proc_ids() {
            if !cur.buffers[proc.0].is_empty() {
                let next = apply_update(p, &cur, proc)?;
                successors.push((StepLabel::Update(proc), next));
            }
        }
        for (label, next) in successors {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = configs.len();
                    if j + 1 > max_states {
                        return Err(SemanticsError::MaxStatesExceeded(max_states));
                    }
                    index.insert(next.clone(), j);
                    configs.push(next);
                    queue.push_back(j);
                    j
                }
            };
            steps.push((i, label, j));
        }
    }
    Ok(Exploration {
        configs,
        steps,
        frontier,
    })
}

/// Configuration JSON: `{"state":{"P":"q"},"buffers":{"P":[["x","1"],..]},"memory":{"x":"0"}}`
/// with buffer arrays ordered newest-first.
pub fn config_to_json(p: &ConcurrentProgram, c: &Configuration) -> Json {
    let mut state = serde_json::Map::new();
    let mut buffers = serde_json::Map::new();
    for proc in p.proc_ids() {
        let process = p.process(proc);
        state.insert(
            process.name.clone(),
            json!(process.state_name(c.states[proc.0])),
        );
        let msgs: Vec<Json> = c.buffers[proc.0]
            .iter()
            .map(|m| json!([p.var_name(m.var), p.value_name(m.value)]))
            .collect();
        buffers.insert(process.name.clone(), Json::Array(msgs));
    }
    let mut memory = serde_json::Map::new();
    for (i, x) in p.vars.iter().enumerate() {
        memory.insert(x.clone(), json!(p.value_name(c.memory[i])));
    }
    json!({"state": state, "buffers": buffers, "memory": memory})
}
