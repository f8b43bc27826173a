//! Load-buffer semantics and the three-process divergence example.
//!
//! Under load-buffer semantics the information flow is reversed: writes hit
//! memory immediately (leaving an own-message in the writer's buffer), while
//! reads are served from speculatively propagated messages. Propagation
//! appends the current memory value at the tail; reads and deletes act at the
//! head. No game partition is defined here; the module exposes the semantics
//! plus two scripted checks on the reconstructed example: the update player's
//! flush script forces the store-buffer game, while under load-buffer
//! semantics the process player escapes into a safe loop.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::program::{
    ConcurrentProgram, Instruction, Mode, Objective, ProcId, ProgramBuilder, RawInstr, StateId,
    Transition, ValueId, VarId,
};
use crate::semantics::{self, Configuration};

/// A load-buffer message; own-messages arise from the owning process's writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LbMessage {
    pub var: VarId,
    pub value: ValueId,
    pub own: bool,
}

/// Configuration under load-buffer semantics. Buffers are oldest-first:
/// the head (front) is read and deleted, propagation appends at the tail.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LbConfiguration {
    pub states: Vec<StateId>,
    pub buffers: Vec<VecDeque<LbMessage>>,
    pub memory: Vec<ValueId>,
}

impl LbConfiguration {
    pub fn initial(p: &ConcurrentProgram) -> Self {
        LbConfiguration {
            states: p.processes.iter().map(|proc| proc.initial).collect(),
            buffers: vec![VecDeque::new(); p.processes.len()],
            memory: p.init_memory.clone(),
        }
    }

    fn newest_own_on(&self, proc: ProcId, x: VarId) -> Option<ValueId> {
        self.buffers[proc.0]
            .iter()
            .rev()
            .find(|m| m.own && m.var == x)
            .map(|m| m.value)
    }
}

/// A move in the load-buffer system: an instruction on the process side, or
/// one of the nondeterministic buffer moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LbMove {
    Instr(ProcId, Transition),
    Propagate(ProcId, VarId),
    Delete(ProcId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LbError {
    #[error("move is not enabled: {0}")]
    Disabled(String),
    #[error("exploration exceeds {0} states")]
    MaxStatesExceeded(usize),
}

fn lb_instr_enabled(c: &LbConfiguration, proc: ProcId, t: &Transition) -> bool {
    if c.states[proc.0] != t.from {
        return false;
    }
    match t.instr {
        Instruction::Write(_, _) | Instruction::Skip => true,
        Instruction::MemFence => c.buffers[proc.0].is_empty(),
        Instruction::Read(x, d) => match c.newest_own_on(proc, x) {
            Some(v) => v == d,
            None => matches!(
                c.buffers[proc.0].front(),
                Some(m) if m.var == x && m.value == d
            ),
        },
    }
}

/// All enabled moves: instruction moves, one propagate per process/variable
/// pair, and a delete per process with a nonempty buffer.
pub fn lb_enabled_moves(p: &ConcurrentProgram, c: &LbConfiguration) -> Vec<LbMove> {
    let mut moves = Vec::new();
    for proc in p.proc_ids() {
        for t in p.process(proc).transitions_from(c.states[proc.0]) {
            if lb_instr_enabled(c, proc, t) {
                moves.push(LbMove::Instr(proc, *t));
            }
        }
    }
    for proc in p.proc_ids() {
        for x in 0..p.vars.len() {
            moves.push(LbMove::Propagate(proc, VarId(x)));
        }
        if !c.buffers[proc.0].is_empty() {
            moves.push(LbMove::Delete(proc));
        }
    }
    moves
}

/// Applies an enabled move. A write updates memory immediately and appends
/// the own-message in the same step.
pub fn lb_apply(
    p: &ConcurrentProgram,
    c: &LbConfiguration,
    mv: &LbMove,
) -> Result<LbConfiguration, LbError> {
    let mut next = c.clone();
    match mv {
        LbMove::Instr(proc, t) => {
            if !lb_instr_enabled(c, *proc, t) {
                return Err(LbError::Disabled(p.instr_string(&t.instr)));
            }
            next.states[proc.0] = t.to;
            if let Instruction::Write(x, d) = t.instr {
                next.memory[x.0] = d;
                next.buffers[proc.0].push_back(LbMessage {
                    var: x,
                    value: d,
                    own: true,
                });
            }
        }
        LbMove::Propagate(proc, x) => {
            next.buffers[proc.0].push_back(LbMessage {
                var: *x,
                value: c.memory[x.0],
                own: false,
            });
        }
        LbMove::Delete(proc) => {
            if next.buffers[proc.0].pop_front().is_none() {
                return Err(LbError::Disabled("delete on empty buffer".into()));
            }
        }
    }
    Ok(next)
}

/// Label for explored load-buffer steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbExploration {
    pub configs: Vec<LbConfiguration>,
    pub steps: Vec<(usize, LbMove, usize)>,
    /// Configurations where a propagate was suppressed by the buffer bound.
    pub frontier: BTreeSet<usize>,
}

/// Bounded exploration mirroring `semantics::bounded_explore` for the
/// load-buffer rules; propagations are suppressed (and flagged) once a buffer
/// reaches the bound.
pub fn lb_bounded_explore(
    p: &ConcurrentProgram,
    c0: &LbConfiguration,
    buffer_bound: usize,
    max_states: usize,
) -> Result<LbExploration, LbError> {
    let mut index: BTreeMap<LbConfiguration, usize> = BTreeMap::new();
    let mut configs = vec![c0.clone()];
    let mut steps = Vec::new();
    let mut frontier = BTreeSet::new();
    let mut queue = VecDeque::from([0usize]);
    index.insert(c0.clone(), 0);

    while let Some(i) = queue.pop_front() {
        let cur = configs[i].clone();
        for mv in lb_enabled_moves(p, &cur) {
            if matches!(mv, LbMove::Propagate(proc, _) if cur.buffers[proc.0].len() >= buffer_bound)
            {
                frontier.insert(i);
                continue;
            }
            let next = lb_apply(p, &cur, &mv)?;
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = configs.len();
                    if j + 1 > max_states {
                        return Err(LbError::MaxStatesExceeded(max_states));
                    }
                    index.insert(next.clone(), j);
                    configs.push(next);
                    queue.push_back(j);
                    j
                }
            };
            steps.push((i, mv, j));
        }
    }
    Ok(LbExploration {
        configs,
        steps,
        frontier,
    })
}

/// LB configuration JSON with `["x","1","own"]` / `["x","1"]` buffer entries.
pub fn lb_config_to_json(p: &ConcurrentProgram, c: &LbConfiguration) -> Json {
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
            .map(|m| {
                if m.own {
                    json!([p.var_name(m.var), p.value_name(m.value), "own"])
                } else {
                    json!([p.var_name(m.var), p.value_name(m.value)])
                }
            })
            .collect();
        buffers.insert(process.name.clone(), Json::Array(msgs));
    }
    let mut memory = serde_json::Map::new();
    for (i, x) in p.vars.iter().enumerate() {
        memory.insert(x.clone(), json!(p.value_name(c.memory[i])));
    }
    json!({"state": state, "buffers": buffers, "memory": memory})
}

/// The reconstructed three-process example: two writers of 1 and 2, and a
/// reader that branches between a forced path q2-q4-qF and an escape path
/// q3-q5 with a safe self-loop.
pub fn divergence_example() -> (ConcurrentProgram, Objective) {
    let mut b = ProgramBuilder::new();
    b.value("0").value("1").value("2");
    b.var("x").init("x", "0");
    b.process("Proc1", "q1");
    b.trans("q1", "q2", RawInstr::Write("x".into(), "1".into()));
    b.process("Proc2", "q1");
    b.trans("q1", "q2", RawInstr::Write("x".into(), "2".into()));
    b.process("Proc3", "q1");
    b.trans("q1", "q2", RawInstr::Skip);
    b.trans("q1", "q3", RawInstr::Skip);
    b.trans("q2", "q4", RawInstr::Read("x".into(), "1".into()));
    b.trans("q4", "qF", RawInstr::Read("x".into(), "2".into()));
    b.trans("q3", "q5", RawInstr::Read("x".into(), "2".into()));
    b.trans("q5", "qF", RawInstr::Read("x".into(), "1".into()));
    b.trans("q5", "q5", RawInstr::Skip);
    let program = b.build().expect("divergence example is well-formed");
    let proc3 = program.proc_id("Proc3").unwrap();
    let qf = program.process(proc3).state_id("qF").unwrap();
    let objective = Objective::new(Mode::Safe, vec![(proc3, qf)]);
    (program, objective)
}

/// Pivot choice for the store-buffer forcing check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pivot {
    /// Proc3 took the branch to q2.
    Q2,
    /// Proc3 took the branch to q3.
    Q3,
}

/// Outcome of the forcing search for one pivot and flush order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForcingOutcome {
    /// Every continuation reaches qF or ends up repeating configurations
    /// (the process player is reduced to idling forever).
    Forced { reached_target: usize, confined: usize },
    /// Some continuation escapes: a process-player deadlock or a fresh
    /// configuration beyond the horizon.
    NotForced { witness: Vec<String> },
}

impl ForcingOutcome {
    pub fn is_forced(&self) -> bool {
        matches!(self, ForcingOutcome::Forced { .. })
    }
}

fn divergence_pivot(p: &ConcurrentProgram, pivot: Pivot) -> Configuration {
    let mut c = Configuration::initial(p);
    let x = p.var_id("x").unwrap();
    let one = p.value_id("1").unwrap();
    let two = p.value_id("2").unwrap();
    for (i, name) in ["Proc1", "Proc2"].iter().enumerate() {
        let proc = p.proc_id(name).unwrap();
        let q2 = p.process(proc).state_id("q2").unwrap();
        c.states[proc.0] = q2;
        c.buffers[proc.0].push_front(crate::semantics::BufferMessage {
            var: x,
            value: if i == 0 { one } else { two },
        });
    }
    let proc3 = p.proc_id("Proc3").unwrap();
    let state = match pivot {
        Pivot::Q2 => "q2",
        Pivot::Q3 => "q3",
    };
    c.states[proc3.0] = p.process(proc3).state_id(state).unwrap();
    c
}

/// Adversarial search over all process-player continuations from the pivot,
/// with the update player scripted to flush one pending write per turn in
/// the given order and stay afterwards.
pub fn sb_forcing_with(pivot: Pivot, order: [&str; 2], horizon: usize) -> ForcingOutcome {
    let (p, objective) = divergence_example();
    let proc3 = p.proc_id("Proc3").unwrap();
    let target = objective.targets[0].1;
    let order: Vec<ProcId> = order.iter().map(|n| p.proc_id(n).unwrap()).collect();
    let pivot_config = divergence_pivot(&p, pivot);

    // One search state per process-player turn: configuration plus how many
    // scripted flushes have happened.
    type State = (Configuration, usize);
    fn update_response(
        p: &ConcurrentProgram,
        c: &Configuration,
        order: &[ProcId],
        pos: usize,
    ) -> (Configuration, usize) {
        if pos < order.len() {
            let next = semantics::apply_update(p, c, order[pos]).expect("pending write");
            (next, pos + 1)
        } else {
            (c.clone(), pos)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        p: &ConcurrentProgram,
        proc3: ProcId,
        target: StateId,
        order: &[ProcId],
        state: State,
        fuel: usize,
        seen: &mut BTreeSet<State>,
        stats: &mut (usize, usize),
        trace: &mut Vec<String>,
    ) -> Result<(), Vec<String>> {
        let (c, pos) = &state;
        if c.states[proc3.0] == target {
            stats.0 += 1;
            return Ok(());
        }
        if !seen.insert(state.clone()) {
            stats.1 += 1;
            return Ok(());
        }
        if fuel == 0 {
            trace.push("horizon exceeded".into());
            return Err(trace.clone());
        }
        let enabled = semantics::enabled_moves(p, c);
        if enabled.is_empty() {
            trace.push("process-player deadlock".into());
            return Err(trace.clone());
        }
        for (proc, t) in enabled {
            let after = semantics::apply_instruction(p, c, proc, &t).expect("enabled");
            trace.push(format!(
                "{}: {} -> {} [{}]",
                p.process(proc).name,
                p.process(proc).state_name(t.from),
                p.process(proc).state_name(t.to),
                p.instr_string(&t.instr)
            ));
            if after.states[proc3.0] == target {
                stats.0 += 1;
                trace.pop();
                continue;
            }
            let next = update_response(p, &after, order, *pos);
            search(p, proc3, target, order, next, fuel - 1, seen, stats, trace)?;
            trace.pop();
        }
        Ok(())
    }

    // The pivot is an update-player turn: she performs her first flush.
    let start = update_response(&p, &pivot_config, &order, 0);
    let mut seen = BTreeSet::new();
    let mut stats = (0usize, 0usize);
    let mut trace = Vec::new();
    match search(
        &p, proc3, target, &order, start, horizon, &mut seen, &mut stats, &mut trace,
    ) {
        Ok(()) => ForcingOutcome::Forced {
            reached_target: stats.0,
            confined: stats.1,
        },
        Err(witness) => ForcingOutcome::NotForced { witness },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbForcingReport {
    pub q2: ForcingOutcome,
    pub q3: ForcingOutcome,
}

/// The scripted update strategy of the store-buffer narrative: flush Proc1
/// then Proc2 when Proc3 sits at q2, and the reverse from q3.
pub fn sb_forcing_check(horizon: usize) -> SbForcingReport {
    SbForcingReport {
        q2: sb_forcing_with(Pivot::Q2, ["Proc1", "Proc2"], horizon),
        q3: sb_forcing_with(Pivot::Q3, ["Proc2", "Proc1"], horizon),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbEscapeReport {
    pub states_explored: usize,
    /// Number of configurations at which the q3 -> q5 read fired.
    pub fires_checked: usize,
    /// Number of distinct q5 configurations verified.
    pub q5_configs: usize,
}

/// Exploration options for the escape check; `stale_propagation` injects the
/// fault of propagating the stale value 1 regardless of memory.
#[derive(Debug, Clone, Copy)]
pub struct LbEscapeOptions {
    pub allow_deletes: bool,
    pub stale_propagation: bool,
}

impl Default for LbEscapeOptions {
    fn default() -> Self {
        LbEscapeOptions {
            allow_deletes: true,
            stale_propagation: false,
        }
    }
}

/// Plays the scripted process prefix (Proc1 write, Proc2 write, Proc3 to q3)
/// interleaved with all update-side propagate/delete behaviours on Proc3's
/// buffer, capped at `propagation_bound` messages, and asserts: (a) whenever
/// q3 -> q5 fires, no `<x,1>` message remains in Proc3's buffer; (b) at every
/// reachable q5 configuration, `rd(x,1)` is disabled and the skip self-loop
/// keeps the process player alive.
pub fn lb_escape_check(propagation_bound: usize) -> Result<LbEscapeReport, String> {
    lb_escape_check_with(propagation_bound, LbEscapeOptions::default())
}

pub fn lb_escape_check_with(
    propagation_bound: usize,
    options: LbEscapeOptions,
) -> Result<LbEscapeReport, String> {
    assert!(propagation_bound >= 1);
    let (p, _) = divergence_example();
    let proc1 = p.proc_id("Proc1").unwrap();
    let proc2 = p.proc_id("Proc2").unwrap();
    let proc3 = p.proc_id("Proc3").unwrap();
    let x = p.var_id("x").unwrap();
    let one = p.value_id("1").unwrap();
    let two = p.value_id("2").unwrap();
    let q3 = p.process(proc3).state_id("q3").unwrap();
    let q5 = p.process(proc3).state_id("q5").unwrap();

    let prefix: Vec<(ProcId, &str, &str)> = vec![
        (proc1, "q1", "q2"),
        (proc2, "q1", "q2"),
        (proc3, "q1", "q3"),
    ];
    let scripted_move = |c: &LbConfiguration, phase: usize| -> Option<LbMove> {
        if let Some((proc, from, to)) = prefix.get(phase) {
            let process = p.process(*proc);
            let t = process
                .transitions
                .iter()
                .find(|t| {
                    t.from == process.state_id(from).unwrap()
                        && t.to == process.state_id(to).unwrap()
                })
                .expect("prefix transition exists");
            return Some(LbMove::Instr(*proc, *t));
        }
        if phase == prefix.len() && c.states[proc3.0] == q3 {
            let t = p
                .process(proc3)
                .transitions_from(q3)
                .next()
                .expect("q3 has the read to q5");
            if lb_instr_enabled(c, proc3, t) {
                return Some(LbMove::Instr(proc3, *t));
            }
        }
        None
    };

    let mut seen: BTreeSet<(usize, LbConfiguration)> = BTreeSet::new();
    let mut queue: VecDeque<(usize, LbConfiguration)> = VecDeque::new();
    let start = (0usize, LbConfiguration::initial(&p));
    seen.insert(start.clone());
    queue.push_back(start);
    let mut fires_checked = 0usize;
    let mut q5_configs = BTreeSet::new();

    while let Some((phase, c)) = queue.pop_front() {
        let push = |item: (usize, LbConfiguration),
                    seen: &mut BTreeSet<(usize, LbConfiguration)>,
                    queue: &mut VecDeque<(usize, LbConfiguration)>| {
            if seen.insert(item.clone()) {
                queue.push_back(item);
            }
        };
        // Update-side moves on Proc3's buffer.
        if c.buffers[proc3.0].len() < propagation_bound {
            let mut values = vec![c.memory[x.0]];
            if options.stale_propagation && c.memory[x.0] != one {
                values.push(one);
            }
            for value in values {
                let mut next = c.clone();
                next.buffers[proc3.0].push_back(LbMessage {
                    var: x,
                    value,
                    own: false,
                });
                push((phase, next), &mut seen, &mut queue);
            }
        }
        if options.allow_deletes && !c.buffers[proc3.0].is_empty() {
            let mut next = c.clone();
            next.buffers[proc3.0].pop_front();
            push((phase, next), &mut seen, &mut queue);
        }
        // Scripted process-side move.
        if let Some(mv) = scripted_move(&c, phase) {
            if let LbMove::Instr(_, t) = mv {
                if t.to == q5 {
                    fires_checked += 1;
                    if c.buffers[proc3.0].iter().any(|m| m.var == x && m.value == one) {
                        return Err(format!(
                            "q3->q5 fired with a pending <x,1> message: {}",
                            lb_config_to_json(&p, &c)
                        ));
                    }
                }
            }
            let next = lb_apply(&p, &c, &mv).expect("scripted move enabled");
            push((phase + 1, next), &mut seen, &mut queue);
        }
        // Assertions at q5.
        if c.states[proc3.0] == q5 {
            q5_configs.insert(c.clone());
            let moves = lb_enabled_moves(&p, &c);
            let rd_to_qf = moves.iter().any(|mv| {
                matches!(mv, LbMove::Instr(proc, t)
                    if *proc == proc3 && matches!(t.instr, Instruction::Read(_, d) if d == one))
            });
            if rd_to_qf {
                return Err(format!(
                    "rd(x,1) enabled at q5: {}",
                    lb_config_to_json(&p, &c)
                ));
            }
            let skip_alive = moves.iter().any(|mv| {
                matches!(mv, LbMove::Instr(proc, t)
                    if *proc == proc3 && t.instr == Instruction::Skip && t.from == q5)
            });
            if !skip_alive {
                return Err(format!(
                    "process player deadlocked at q5: {}",
                    lb_config_to_json(&p, &c)
                ));
            }
        }
        let _ = two;
    }
    Ok(LbEscapeReport {
        states_explored: seen.len(),
        fires_checked,
        q5_configs: q5_configs.len(),
    })
}
