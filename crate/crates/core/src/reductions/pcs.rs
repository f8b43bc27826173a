//! Perfect channel systems and their compilation into TSO games.
//!
//! A PCS run is simulated by letting one process buffer the channel messages
//! as pending writes. Receiving needs a second process that rotates a flushed
//! message from `x_wr` to `x_rd`. The rotation protocol (three fences and an
//! auxiliary `y` token per channel message) pins the update player to
//! flushing exactly one channel message per rotation; any violation enables a
//! branch into `q_win2`. The process-fairness variant gates every gadget on a
//! token variable `z` fed by one auxiliary process per PCS transition, and
//! adds escape edges to a safe sink `q_F` that punish rotations without a
//! simulated receive.

use thiserror::Error;

use crate::program::{ConcurrentProgram, Mode, Objective, ProgramBuilder, RawInstr};
use crate::solver::{PlayScript, ScriptMove};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcsOp {
    Send(usize),
    Recv(usize),
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcsTransition {
    pub from: usize,
    pub op: PcsOp,
    pub to: usize,
}

/// A perfect channel system: finite automaton plus a non-lossy FIFO channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcs {
    pub states: Vec<String>,
    pub messages: Vec<String>,
    pub transitions: Vec<PcsTransition>,
    pub initial: usize,
    pub finals: Vec<usize>,
}

/// PCS configuration: state plus channel word, head (oldest) first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcsConfig {
    pub state: usize,
    pub channel: Vec<usize>,
}

impl Pcs {
    pub fn initial_config(&self) -> PcsConfig {
        PcsConfig {
            state: self.initial,
            channel: Vec::new(),
        }
    }

    pub fn state_id(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn message_id(&self, name: &str) -> Option<usize> {
        self.messages.iter().position(|m| m == name)
    }

    /// Transition id `e<i>` used both in run listings and as a domain value.
    pub fn transition_id(&self, index: usize) -> String {
        format!("e{index}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PcsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: unknown message `{name}`")]
    UnknownMessage { line: usize, name: String },
    #[error("step {0}: {1}")]
    IllegalStep(usize, String),
    #[error("name `{0}` clashes with a reserved value")]
    ReservedNameClash(String),
    #[error("PCS does not have the required shape: {0}")]
    UnsupportedShape(String),
}

/// Parses the line-oriented PCS format (`states`, `messages`, `init`,
/// `final`, `trans FROM TO send|recv m` or `trans FROM TO skip`).
pub fn parse_pcs(text: &str) -> Result<Pcs, PcsError> {
    let mut states: Vec<String> = Vec::new();
    let mut messages: Vec<String> = Vec::new();
    let mut transitions = Vec::new();
    let mut initial = None;
    let mut finals = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split_once('#').map(|(b, _)| b).unwrap_or(raw);
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let state_id = |name: &str| {
            states
                .iter()
                .position(|s| s == name)
                .ok_or(PcsError::UnknownState {
                    line,
                    name: name.to_string(),
                })
        };
        match tokens[0] {
            "states" => states.extend(tokens[1..].iter().map(|s| s.to_string())),
            "messages" => messages.extend(tokens[1..].iter().map(|s| s.to_string())),
            "init" => {
                if tokens.len() != 2 {
                    return Err(PcsError::Parse {
                        line,
                        msg: "expected `init STATE`".into(),
                    });
                }
                initial = Some(state_id(tokens[1])?);
            }
            "final" => {
                for t in &tokens[1..] {
                    finals.push(state_id(t)?);
                }
            }
            "trans" => {
                if tokens.len() < 4 {
                    return Err(PcsError::Parse {
                        line,
                        msg: "expected `trans FROM TO send|recv m` or `trans FROM TO skip`".into(),
                    });
                }
                let from = state_id(tokens[1])?;
                let to = state_id(tokens[2])?;
                let op = match (tokens[3], tokens.get(4)) {
                    ("skip", None) => PcsOp::Skip,
                    ("send", Some(m)) => PcsOp::Send(
                        messages
                            .iter()
                            .position(|x| x == m)
                            .ok_or(PcsError::UnknownMessage {
                                line,
                                name: m.to_string(),
                            })?,
                    ),
                    ("recv", Some(m)) => PcsOp::Recv(
                        messages
                            .iter()
                            .position(|x| x == m)
                            .ok_or(PcsError::UnknownMessage {
                                line,
                                name: m.to_string(),
                            })?,
                    ),
                    _ => {
                        return Err(PcsError::Parse {
                            line,
                            msg: format!("bad operation `{}`", tokens[3]),
                        })
                    }
                };
                transitions.push(PcsTransition { from, op, to });
            }
            other => {
                return Err(PcsError::Parse {
                    line,
                    msg: format!("unexpected token `{other}`"),
                })
            }
        }
    }
    let initial = initial.ok_or(PcsError::Parse {
        line: 0,
        msg: "missing `init` line".into(),
    })?;
    Ok(Pcs {
        states,
        messages,
        transitions,
        initial,
        finals,
    })
}

/// Applies one PCS transition: send appends to the tail, receive removes the
/// head, skip only changes state.
pub fn pcs_step(l: &Pcs, c: &PcsConfig, transition: usize) -> Result<PcsConfig, PcsError> {
    let t = l
        .transitions
        .get(transition)
        .ok_or_else(|| PcsError::IllegalStep(transition, "no such transition".into()))?;
    if c.state != t.from {
        return Err(PcsError::IllegalStep(
            transition,
            format!(
                "transition starts at `{}` but the run is at `{}`",
                l.states[t.from], l.states[c.state]
            ),
        ));
    }
    let mut next = PcsConfig {
        state: t.to,
        channel: c.channel.clone(),
    };
    match t.op {
        PcsOp::Send(m) => next.channel.push(m),
        PcsOp::Recv(m) => {
            if next.channel.first() != Some(&m) {
                return Err(PcsError::IllegalStep(
                    transition,
                    format!(
                        "receive of `{}` but channel head is {:?}",
                        l.messages[m],
                        next.channel.first().map(|&h| &l.messages[h])
                    ),
                ));
            }
            next.channel.remove(0);
        }
        PcsOp::Skip => {}
    }
    Ok(next)
}

/// Runs a transition sequence from the initial configuration.
pub fn pcs_run(l: &Pcs, run: &[usize]) -> Result<PcsConfig, PcsError> {
    let mut c = l.initial_config();
    for (i, &t) in run.iter().enumerate() {
        c = pcs_step(l, &c, t).map_err(|e| match e {
            PcsError::IllegalStep(_, msg) => PcsError::IllegalStep(i, msg),
            other => other,
        })?;
    }
    Ok(c)
}

pub const VAR_XWR: &str = "x_wr";
pub const VAR_XRD: &str = "x_rd";
pub const VAR_Y: &str = "y";
pub const VAR_Z: &str = "z";
pub const VAL_BOT: &str = "bot";
pub const PROC1: &str = "Proc1";
pub const PROC2: &str = "Proc2";
pub const Q_WIN2: &str = "q_win2";
pub const Q_SINK: &str = "q_F";

fn u_state(i: usize) -> String {
    format!("u_e{i}")
}
fn h1_state(i: usize) -> String {
    format!("h1_e{i}")
}
fn h2_state(i: usize) -> String {
    format!("h2_e{i}")
}
fn pre_state(i: usize) -> String {
    format!("pre_e{i}")
}
fn p_state(stage: usize, m: &str) -> String {
    if stage == 0 {
        "p0".to_string()
    } else {
        format!("p{stage}_{m}")
    }
}
fn proc_e(i: usize) -> String {
    format!("Proc_e{i}")
}
fn q_e(i: usize) -> String {
    format!("q_e{i}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fairness {
    Update,
    Process,
}

fn check_reserved_names(l: &Pcs, fairness: Fairness) -> Result<(), PcsError> {
    let mut reserved: Vec<String> = vec!["0".into(), "1".into(), VAL_BOT.into()];
    if fairness == Fairness::Process {
        reserved.extend((0..l.transitions.len()).map(|i| l.transition_id(i)));
    }
    for m in &l.messages {
        if reserved.contains(m) {
            return Err(PcsError::ReservedNameClash(m.clone()));
        }
    }
    // Proc1 embeds the PCS states next to the generated gadget states.
    let mut generated: Vec<String> = vec![Q_SINK.into()];
    for i in 0..l.transitions.len() {
        generated.push(u_state(i));
        generated.push(h1_state(i));
        generated.push(h2_state(i));
        generated.push(pre_state(i));
    }
    for s in &l.states {
        if generated.contains(s) {
            return Err(PcsError::ReservedNameClash(s.clone()));
        }
    }
    Ok(())
}

fn declare_values(b: &mut ProgramBuilder, l: &Pcs, fairness: Fairness) {
    b.value("0").value("1").value(VAL_BOT);
    for m in &l.messages {
        b.value(m.clone());
    }
    if fairness == Fairness::Process {
        for i in 0..l.transitions.len() {
            b.value(l.transition_id(i));
        }
    }
}

fn build_proc2(b: &mut ProgramBuilder, l: &Pcs) {
    b.process(PROC2, "p0");
    for m in &l.messages {
        b.trans("p0", p_state(1, m), RawInstr::Read(VAR_XWR.into(), m.clone()));
        b.trans(p_state(1, m), p_state(2, m), RawInstr::Write(VAR_XRD.into(), m.clone()));
        b.trans(p_state(2, m), p_state(3, m), RawInstr::MemFence);
        b.trans(p_state(3, m), p_state(4, m), RawInstr::Write(VAR_XWR.into(), VAL_BOT.into()));
        b.trans(p_state(4, m), p_state(5, m), RawInstr::Read(VAR_Y.into(), "0".into()));
        b.trans(p_state(4, m), Q_WIN2, RawInstr::Read(VAR_Y.into(), "1".into()));
        b.trans(p_state(5, m), p_state(6, m), RawInstr::MemFence);
        b.trans(p_state(6, m), p_state(7, m), RawInstr::Read(VAR_Y.into(), "1".into()));
        b.trans(p_state(7, m), p_state(8, m), RawInstr::Write(VAR_Y.into(), "0".into()));
        b.trans(p_state(8, m), p_state(9, m), RawInstr::Write(VAR_XRD.into(), VAL_BOT.into()));
        b.trans(p_state(9, m), p_state(10, m), RawInstr::MemFence);
        b.trans(p_state(10, m), "p0", RawInstr::Read(VAR_XWR.into(), VAL_BOT.into()));
        for m2 in &l.messages {
            b.trans(p_state(10, m), Q_WIN2, RawInstr::Read(VAR_XWR.into(), m2.clone()));
        }
    }
    b.trans(Q_WIN2, Q_WIN2, RawInstr::Skip);
}

/// Send/receive/skip gadget of Proc1 for transition `i`, starting at `entry`.
fn build_gadget(b: &mut ProgramBuilder, l: &Pcs, i: usize, entry: &str) {
    let t = &l.transitions[i];
    let target = l.states[t.to].clone();
    match t.op {
        PcsOp::Send(m) => {
            let m = l.messages[m].clone();
            b.trans(entry, u_state(i), RawInstr::Write(VAR_XWR.into(), m));
            b.trans(u_state(i), target, RawInstr::Write(VAR_Y.into(), "1".into()));
        }
        PcsOp::Recv(m) => {
            let m = l.messages[m].clone();
            b.trans(entry, h1_state(i), RawInstr::Skip);
            b.trans(h1_state(i), h2_state(i), RawInstr::Read(VAR_XRD.into(), m));
            b.trans(h2_state(i), target, RawInstr::Read(VAR_XRD.into(), VAL_BOT.into()));
        }
        PcsOp::Skip => {
            b.trans(entry, target, RawInstr::Skip);
        }
    }
}

/// Reduction for reachability games with update fairness: two processes,
/// reach targets are the embedded final states plus `q_win2`.
pub fn pcs_to_update_fairness_game(l: &Pcs) -> Result<(ConcurrentProgram, Objective), PcsError> {
    check_reserved_names(l, Fairness::Update)?;
    let mut b = ProgramBuilder::new();
    declare_values(&mut b, l, Fairness::Update);
    b.var(VAR_XWR).var(VAR_XRD).var(VAR_Y);
    b.init(VAR_XWR, VAL_BOT).init(VAR_XRD, VAL_BOT).init(VAR_Y, "0");

    b.process(PROC1, l.states[l.initial].clone());
    for i in 0..l.transitions.len() {
        let from = l.states[l.transitions[i].from].clone();
        build_gadget(&mut b, l, i, &from);
    }
    build_proc2(&mut b, l);

    let program = b.build().expect("generated program is well-formed");
    let proc1 = program.proc_id(PROC1).unwrap();
    let proc2 = program.proc_id(PROC2).unwrap();
    let mut targets = Vec::new();
    for &f in &l.finals {
        if let Some(q) = program.process(proc1).state_id(&l.states[f]) {
            targets.push((proc1, q));
        }
    }
    targets.push((proc2, program.process(proc2).state_id(Q_WIN2).unwrap()));
    Ok((program, Objective::new(Mode::Reach, targets)))
}

/// Reduction for safety games with process fairness: the update player picks
/// transitions via the token variable `z`; one auxiliary process per PCS
/// transition; escape edges to the safe sink `q_F` punish rotations that do
/// not correspond to a simulated receive.
pub fn pcs_to_process_fairness_game(l: &Pcs) -> Result<(ConcurrentProgram, Objective), PcsError> {
    check_reserved_names(l, Fairness::Process)?;
    let mut b = ProgramBuilder::new();
    declare_values(&mut b, l, Fairness::Process);
    b.var(VAR_XWR).var(VAR_XRD).var(VAR_Y).var(VAR_Z);
    b.init(VAR_XWR, VAL_BOT)
        .init(VAR_XRD, VAL_BOT)
        .init(VAR_Y, "0")
        .init(VAR_Z, VAL_BOT);

    b.process(PROC1, l.states[l.initial].clone());
    let mut proc1_states: Vec<String> = l.states.clone();
    for i in 0..l.transitions.len() {
        let from = l.states[l.transitions[i].from].clone();
        b.trans(&from, pre_state(i), RawInstr::Read(VAR_Z.into(), l.transition_id(i)));
        build_gadget(&mut b, l, i, &pre_state(i));
        proc1_states.push(pre_state(i));
        match l.transitions[i].op {
            PcsOp::Send(_) => proc1_states.push(u_state(i)),
            PcsOp::Recv(_) => {
                proc1_states.push(h1_state(i));
                proc1_states.push(h2_state(i));
            }
            PcsOp::Skip => {}
        }
    }
    // Escape edges: for each message m, every Proc1 state except the h1/h2
    // states of m-receives can read the rotated m and move to the sink.
    for (mi, m) in l.messages.iter().enumerate() {
        let shielded: Vec<String> = l
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t.op, PcsOp::Recv(rm) if rm == mi))
            .flat_map(|(i, _)| [h1_state(i), h2_state(i)])
            .collect();
        for q in &proc1_states {
            if !shielded.contains(q) {
                b.trans(q.clone(), Q_SINK, RawInstr::Read(VAR_XRD.into(), m.clone()));
            }
        }
    }
    b.trans(Q_SINK, Q_SINK, RawInstr::Skip);

    build_proc2(&mut b, l);
    for i in 0..l.transitions.len() {
        b.process(proc_e(i), q_e(i));
        b.trans(q_e(i), q_e(i), RawInstr::Write(VAR_Z.into(), l.transition_id(i)));
    }

    let program = b.build().expect("generated program is well-formed");
    let proc1 = program.proc_id(PROC1).unwrap();
    let mut targets = Vec::new();
    for &f in &l.finals {
        if let Some(q) = program.process(proc1).state_id(&l.states[f]) {
            targets.push((proc1, q));
        }
    }
    Ok((program, Objective::new(Mode::Safe, targets)))
}

fn ply(script: &mut PlayScript, proc: &str, from: &str, instr: String, to: &str, flushes: &[&str]) {
    script.push(ScriptMove::Process {
        proc: proc.to_string(),
        from: from.to_string(),
        instr,
        to: to.to_string(),
    });
    script.push(ScriptMove::Update {
        flushes: flushes.iter().map(|s| s.to_string()).collect(),
    });
}

fn rd(var: &str, value: &str) -> String {
    format!("rd({var},{value})")
}
fn wr(var: &str, value: &str) -> String {
    format!("wr({var},{value})")
}

/// Emits the canonical rotation schedule for a receive of message `m` via
/// gadget `i`, starting with Proc1 at `entry`.
fn rotation_plies(script: &mut PlayScript, l: &Pcs, i: usize, entry: &str, m: &str) {
    let h1 = h1_state(i);
    let h2 = h2_state(i);
    let exit = &l.states[l.transitions[i].to];
    ply(script, PROC1, entry, "skip".into(), &h1, &[PROC1]);
    ply(script, PROC2, "p0", rd(VAR_XWR, m), &p_state(1, m), &[]);
    ply(script, PROC2, &p_state(1, m), wr(VAR_XRD, m), &p_state(2, m), &[PROC2]);
    ply(script, PROC2, &p_state(2, m), "mf".into(), &p_state(3, m), &[]);
    ply(script, PROC1, &h1, rd(VAR_XRD, m), &h2, &[]);
    ply(script, PROC2, &p_state(3, m), wr(VAR_XWR, VAL_BOT), &p_state(4, m), &[]);
    ply(script, PROC2, &p_state(4, m), rd(VAR_Y, "0"), &p_state(5, m), &[PROC2]);
    ply(script, PROC2, &p_state(5, m), "mf".into(), &p_state(6, m), &[PROC1]);
    ply(script, PROC2, &p_state(6, m), rd(VAR_Y, "1"), &p_state(7, m), &[]);
    ply(script, PROC2, &p_state(7, m), wr(VAR_Y, "0"), &p_state(8, m), &[]);
    ply(script, PROC2, &p_state(8, m), wr(VAR_XRD, VAL_BOT), &p_state(9, m), &[PROC2, PROC2]);
    ply(script, PROC2, &p_state(9, m), "mf".into(), &p_state(10, m), &[]);
    ply(script, PROC2, &p_state(10, m), rd(VAR_XWR, VAL_BOT), "p0", &[]);
    ply(script, PROC1, &h2, rd(VAR_XRD, VAL_BOT), exit, &[]);
}

/// Emits the token-release plies of the process-fairness protocol for
/// transition `i` and returns the gadget entry state.
fn release_plies(script: &mut PlayScript, l: &Pcs, i: usize, from: &str) -> String {
    let pe = proc_e(i);
    let qe = q_e(i);
    ply(script, &pe, &qe, wr(VAR_Z, &l.transition_id(i)), &qe, &[&pe]);
    let entry = pre_state(i);
    ply(script, PROC1, from, rd(VAR_Z, &l.transition_id(i)), &entry, &[]);
    entry
}

/// Builds the canonical honest play script that simulates `run` inside the
/// generated game. The run must be legal from the initial PCS configuration.
pub fn script_from_pcs_run(
    l: &Pcs,
    run: &[usize],
    fairness: Fairness,
) -> Result<PlayScript, PcsError> {
    pcs_run(l, run)?;
    let mut script = Vec::new();
    for (k, &i) in run.iter().enumerate() {
        let t = &l.transitions[i];
        let from = l.states[t.from].clone();
        let entry = match fairness {
            Fairness::Update => from,
            Fairness::Process => {
                let _ = k;
                release_plies(&mut script, l, i, &from)
            }
        };
        match t.op {
            PcsOp::Send(m) => {
                let m = l.messages[m].clone();
                ply(&mut script, PROC1, &entry, wr(VAR_XWR, &m), &u_state(i), &[]);
                ply(&mut script, PROC1, &u_state(i), wr(VAR_Y, "1"), &l.states[t.to], &[]);
            }
            PcsOp::Recv(m) => {
                let m = l.messages[m].clone();
                rotation_plies(&mut script, l, i, &entry, &m);
            }
            PcsOp::Skip => {
                ply(&mut script, PROC1, &entry, "skip".into(), &l.states[t.to], &[]);
            }
        }
    }
    Ok(script)
}

/// Named cheat: after `sends` (at least two legal send transitions from the
/// initial state), the update player flushes three messages at once, so a
/// second channel message lands in memory during the rotation. Returns the
/// script and the config index at which the `rd(y,1)` branch into `q_win2`
/// is enabled at `p4`.
pub fn cheat_double_flush_script(
    l: &Pcs,
    sends: &[usize],
) -> Result<(PlayScript, usize), PcsError> {
    if sends.len() < 2 {
        return Err(PcsError::UnsupportedShape(
            "need at least two leading sends".into(),
        ));
    }
    let end = pcs_run(l, sends)?;
    let messages: Vec<&str> = sends
        .iter()
        .map(|&i| match l.transitions[i].op {
            PcsOp::Send(m) => l.messages[m].as_str(),
            _ => "",
        })
        .collect();
    if messages.iter().any(|m| m.is_empty()) {
        return Err(PcsError::UnsupportedShape("prefix must be all sends".into()));
    }
    let _ = end;
    let mut script = Vec::new();
    for (k, &i) in sends.iter().enumerate() {
        let t = &l.transitions[i];
        let from = l.states[t.from].clone();
        let m = messages[k];
        ply(&mut script, PROC1, &from, wr(VAR_XWR, m), &u_state(i), &[]);
        // The last update ply of the second send carries the cheat flush:
        // <x_wr,m1>, <y,1> and <x_wr,m2> all reach memory before Proc2 reads.
        let flushes: &[&str] = if k == 1 { &[PROC1, PROC1, PROC1] } else { &[] };
        ply(&mut script, PROC1, &u_state(i), wr(VAR_Y, "1"), &l.states[t.to], flushes);
    }
    // Proc2 now reads the newest flushed message and walks to the y-check.
    let m = messages[1];
    ply(&mut script, PROC2, "p0", rd(VAR_XWR, m), &p_state(1, m), &[]);
    ply(&mut script, PROC2, &p_state(1, m), wr(VAR_XRD, m), &p_state(2, m), &[PROC2]);
    ply(&mut script, PROC2, &p_state(2, m), "mf".into(), &p_state(3, m), &[]);
    ply(&mut script, PROC2, &p_state(3, m), wr(VAR_XWR, VAL_BOT), &p_state(4, m), &[]);
    let audited_ply = script.len();
    ply(&mut script, PROC2, &p_state(4, m), rd(VAR_Y, "1"), Q_WIN2, &[]);
    Ok((script, audited_ply))
}

/// Named cheat: during the rotation of the first receive, the update player
/// flushes the `<y,1>` token together with the next channel message. Returns
/// the script and the config index at which `rd(x_wr, m2)` into `q_win2` is
/// enabled at `p10`.
pub fn cheat_y_window_script(
    l: &Pcs,
    sends: &[usize],
    recv: usize,
) -> Result<(PlayScript, usize), PcsError> {
    if sends.len() < 2 {
        return Err(PcsError::UnsupportedShape(
            "need at least two leading sends".into(),
        ));
    }
    let mut run: Vec<usize> = sends.to_vec();
    run.push(recv);
    pcs_run(l, &run)?;
    let (m1, m2) = match (l.transitions[sends[0]].op, l.transitions[sends[1]].op) {
        (PcsOp::Send(a), PcsOp::Send(b)) => (l.messages[a].clone(), l.messages[b].clone()),
        _ => return Err(PcsError::UnsupportedShape("prefix must be all sends".into())),
    };
    if !matches!(l.transitions[recv].op, PcsOp::Recv(m) if l.messages[m] == m1) {
        return Err(PcsError::UnsupportedShape(
            "receive must consume the first send".into(),
        ));
    }

    let mut script = Vec::new();
    for (k, &i) in sends.iter().enumerate() {
        let t = &l.transitions[i];
        let m = if k == 0 { &m1 } else { &m2 };
        ply(&mut script, PROC1, &l.states[t.from], wr(VAR_XWR, m), &u_state(i), &[]);
        ply(&mut script, PROC1, &u_state(i), wr(VAR_Y, "1"), &l.states[t.to], &[]);
    }
    // Honest rotation start for m1.
    let i = recv;
    let entry = l.states[l.transitions[i].from].clone();
    let h1 = h1_state(i);
    let h2 = h2_state(i);
    ply(&mut script, PROC1, &entry, "skip".into(), &h1, &[PROC1]);
    ply(&mut script, PROC2, "p0", rd(VAR_XWR, &m1), &p_state(1, &m1), &[]);
    ply(&mut script, PROC2, &p_state(1, &m1), wr(VAR_XRD, &m1), &p_state(2, &m1), &[PROC2]);
    ply(&mut script, PROC2, &p_state(2, &m1), "mf".into(), &p_state(3, &m1), &[]);
    ply(&mut script, PROC1, &h1, rd(VAR_XRD, &m1), &h2, &[]);
    ply(&mut script, PROC2, &p_state(3, &m1), wr(VAR_XWR, VAL_BOT), &p_state(4, &m1), &[]);
    ply(&mut script, PROC2, &p_state(4, &m1), rd(VAR_Y, "0"), &p_state(5, &m1), &[PROC2]);
    // Cheat: flush the y token AND the next channel message.
    ply(&mut script, PROC2, &p_state(5, &m1), "mf".into(), &p_state(6, &m1), &[PROC1, PROC1]);
    ply(&mut script, PROC2, &p_state(6, &m1), rd(VAR_Y, "1"), &p_state(7, &m1), &[]);
    ply(&mut script, PROC2, &p_state(7, &m1), wr(VAR_Y, "0"), &p_state(8, &m1), &[]);
    ply(&mut script, PROC2, &p_state(8, &m1), wr(VAR_XRD, VAL_BOT), &p_state(9, &m1), &[PROC2, PROC2]);
    ply(&mut script, PROC2, &p_state(9, &m1), "mf".into(), &p_state(10, &m1), &[]);
    let audited_ply = script.len();
    ply(&mut script, PROC2, &p_state(10, &m1), rd(VAR_XWR, &m2), Q_WIN2, &[]);
    Ok((script, audited_ply))
}

/// Named cheat for the process-fairness game: the update player rotates a
/// channel message while Proc1 sits at an embedded state, so the escape edge
/// into `q_F` becomes enabled. `prefix` must be a legal run whose last
/// transition is a send. Returns the script and the config index at which the
/// escape is enabled.
pub fn cheat_rotation_without_receive_script(
    l: &Pcs,
    prefix: &[usize],
) -> Result<(PlayScript, usize), PcsError> {
    let end = pcs_run(l, prefix)?;
    let last = *prefix.last().ok_or(PcsError::UnsupportedShape(
        "prefix must not be empty".into(),
    ))?;
    if !matches!(l.transitions[last].op, PcsOp::Send(_)) {
        return Err(PcsError::UnsupportedShape(
            "prefix must end with a send".into(),
        ));
    }
    // The rotated message is the oldest pending one, i.e. the channel head.
    let head = *end.channel.first().expect("a send leaves the channel nonempty");
    let m = l.messages[head].clone();

    let mut script = Vec::new();
    for &i in prefix {
        let t = &l.transitions[i];
        let entry = release_plies(&mut script, l, i, &l.states[t.from]);
        match t.op {
            PcsOp::Send(mm) => {
                let mm = l.messages[mm].clone();
                ply(&mut script, PROC1, &entry, wr(VAR_XWR, &mm), &u_state(i), &[]);
                ply(&mut script, PROC1, &u_state(i), wr(VAR_Y, "1"), &l.states[t.to], &[]);
            }
            PcsOp::Recv(mm) => {
                let mm = l.messages[mm].clone();
                rotation_plies(&mut script, l, i, &entry, &mm);
            }
            PcsOp::Skip => {
                ply(&mut script, PROC1, &entry, "skip".into(), &l.states[t.to], &[]);
            }
        }
    }
    let resting = l.states[l.transitions[last].to].clone();
    // A throwaway token write keeps the turn alternation; the update ply
    // after it starts the rotation without any receive being simulated.
    let pe = proc_e(last);
    let qe = q_e(last);
    ply(&mut script, &pe, &qe, wr(VAR_Z, &l.transition_id(last)), &qe, &[PROC1]);
    ply(&mut script, PROC2, "p0", rd(VAR_XWR, &m), &p_state(1, &m), &[]);
    ply(&mut script, PROC2, &p_state(1, &m), wr(VAR_XRD, &m), &p_state(2, &m), &[PROC2]);
    let audited_ply = script.len();
    // The escape at the embedded state is now enabled; the process player
    // takes it and is safe forever.
    ply(&mut script, PROC1, &resting, rd(VAR_XRD, &m), Q_SINK, &[]);
    Ok((script, audited_ply))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::audit_operands;
    use crate::semantics::{enabled_moves, Configuration};
    use crate::solver::{
        check_update_fair_prefix, simulate_script, PlayOutcome, UpdateFairness,
    };

    const SEND_RECV: &str = "states s0 s1 s2\nmessages a\ninit s0\nfinal s2\ntrans s0 s1 send a\ntrans s1 s2 recv a\ntrans s2 s2 skip\n";
    const TWO_SENDS: &str = "states s0 s1 s2 s3\nmessages a1 a2\ninit s0\nfinal s3\ntrans s0 s1 send a1\ntrans s1 s2 send a2\ntrans s2 s3 recv a1\ntrans s3 s3 skip\n";

    #[test]
    fn pcs_step_examples() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let c0 = l.initial_config();
        let c1 = pcs_step(&l, &c0, 0).unwrap();
        assert_eq!(c1.state, 1);
        assert_eq!(c1.channel, vec![0]);
        let c2 = pcs_step(&l, &c1, 1).unwrap();
        assert_eq!(c2.state, 2);
        assert!(c2.channel.is_empty());
        // receive on empty channel
        assert!(matches!(
            pcs_step(&l, &PcsConfig { state: 1, channel: vec![] }, 1),
            Err(PcsError::IllegalStep(_, _))
        ));
    }

    #[test]
    fn channel_is_fifo() {
        let text = "states s0 s1 s2 s3 s4\nmessages a b\ninit s0\ntrans s0 s1 send a\ntrans s1 s2 send b\ntrans s2 s3 recv a\ntrans s3 s4 recv b\n";
        let l = parse_pcs(text).unwrap();
        let end = pcs_run(&l, &[0, 1, 2, 3]).unwrap();
        assert!(end.channel.is_empty());
        // receiving b first is illegal
        assert!(pcs_run(&l, &[0, 1, 3]).is_err());
    }

    #[test]
    fn update_fairness_game_embeds_send_gadget() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let (p, o) = pcs_to_update_fairness_game(&l).unwrap();
        audit_operands(&p).unwrap();
        assert_eq!(p.processes.len(), 2);
        let proc1 = p.process(p.proc_id(PROC1).unwrap());
        let s0 = proc1.state_id("s0").unwrap();
        let gadget: Vec<String> = proc1
            .transitions_from(s0)
            .map(|t| p.instr_string(&t.instr))
            .collect();
        assert_eq!(gadget, vec!["wr(x_wr,a)".to_string()]);
        let u = proc1.state_id("u_e0").unwrap();
        let next: Vec<String> = proc1
            .transitions_from(u)
            .map(|t| p.instr_string(&t.instr))
            .collect();
        assert_eq!(next, vec!["wr(y,1)".to_string()]);
        assert_eq!(o.mode, Mode::Reach);
        assert_eq!(o.targets.len(), 2); // s2 and q_win2
    }

    #[test]
    fn honest_script_simulates_send_recv_fairly() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let (p, o) = pcs_to_update_fairness_game(&l).unwrap();
        let script = script_from_pcs_run(&l, &[0, 1], Fairness::Update).unwrap();
        let (play, outcome) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 1000).unwrap();
        assert!(matches!(outcome, PlayOutcome::TargetVisited { .. }));
        assert_eq!(check_update_fair_prefix(&p, &play), UpdateFairness::Fair);
        // q_win2 never entered
        let proc2 = p.proc_id(PROC2).unwrap();
        let win2 = p.process(proc2).state_id(Q_WIN2).unwrap();
        assert!(play.configs().all(|gc| gc.config.states[proc2.0] != win2));
    }

    #[test]
    fn send_only_script_counts() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let (p, o) = pcs_to_update_fairness_game(&l).unwrap();
        let script = script_from_pcs_run(&l, &[0], Fairness::Update).unwrap();
        assert_eq!(script.len(), 4); // 2 process plies + 2 empty update plies
        for mv in script.iter().skip(1).step_by(2) {
            assert_eq!(mv, &ScriptMove::Update { flushes: vec![] });
        }
        let (play, _) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 100).unwrap();
        let proc1 = p.proc_id(PROC1).unwrap();
        assert_eq!(play.final_config().config.buffers[proc1.0].len(), 2);
    }

    #[test]
    fn double_flush_cheat_enables_q_win2_at_p4() {
        let l = parse_pcs(TWO_SENDS).unwrap();
        let (p, o) = pcs_to_update_fairness_game(&l).unwrap();
        let (script, audited) = cheat_double_flush_script(&l, &[0, 1]).unwrap();
        let (play, outcome) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 1000).unwrap();
        let configs: Vec<_> = play.configs().collect();
        let at = &configs[audited].config;
        let proc2 = p.proc_id(PROC2).unwrap();
        let win2 = p.process(proc2).state_id(Q_WIN2).unwrap();
        assert!(enabled_moves(&p, at)
            .iter()
            .any(|(pr, t)| *pr == proc2 && t.to == win2));
        assert!(matches!(outcome, PlayOutcome::TargetVisited { .. }));
    }

    #[test]
    fn y_window_cheat_enables_q_win2_at_p10() {
        let l = parse_pcs(TWO_SENDS).unwrap();
        let (p, o) = pcs_to_update_fairness_game(&l).unwrap();
        let (script, audited) = cheat_y_window_script(&l, &[0, 1], 2).unwrap();
        let (play, outcome) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 1000).unwrap();
        let configs: Vec<_> = play.configs().collect();
        let at = &configs[audited].config;
        let proc2 = p.proc_id(PROC2).unwrap();
        let win2 = p.process(proc2).state_id(Q_WIN2).unwrap();
        assert!(enabled_moves(&p, at)
            .iter()
            .any(|(pr, t)| *pr == proc2 && t.to == win2));
        assert!(matches!(outcome, PlayOutcome::TargetVisited { .. }));
    }

    #[test]
    fn process_fairness_game_has_one_process_per_transition() {
        let text = "states s0 s1\nmessages a\ninit s0\nfinal s1\ntrans s0 s1 send a\ntrans s1 s1 skip\n";
        let l = parse_pcs(text).unwrap();
        let (p, o) = pcs_to_process_fairness_game(&l).unwrap();
        audit_operands(&p).unwrap();
        assert_eq!(p.processes.len(), 4); // Proc1, Proc2, Proc_e0, Proc_e1
        assert_eq!(o.mode, Mode::Safe);
    }

    #[test]
    fn honest_process_fairness_script_reaches_unsafe_final() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let (p, o) = pcs_to_process_fairness_game(&l).unwrap();
        let script = script_from_pcs_run(&l, &[0, 1], Fairness::Process).unwrap();
        let (play, outcome) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 1000).unwrap();
        assert!(matches!(outcome, PlayOutcome::TargetVisited { .. }));
        let proc1 = p.proc_id(PROC1).unwrap();
        let s2 = p.process(proc1).state_id("s2").unwrap();
        assert_eq!(play.final_config().config.states[proc1.0], s2);
    }

    #[test]
    fn rotation_without_receive_cheat_enables_escape() {
        let l = parse_pcs(SEND_RECV).unwrap();
        let (p, o) = pcs_to_process_fairness_game(&l).unwrap();
        let (script, audited) = cheat_rotation_without_receive_script(&l, &[0]).unwrap();
        let (play, _) =
            simulate_script(&p, &o, &Configuration::initial(&p), &script, 1000).unwrap();
        let configs: Vec<_> = play.configs().collect();
        let at = &configs[audited].config;
        let proc1 = p.proc_id(PROC1).unwrap();
        let sink = p.process(proc1).state_id(Q_SINK).unwrap();
        assert!(enabled_moves(&p, at)
            .iter()
            .any(|(pr, t)| *pr == proc1 && t.to == sink));
        assert_eq!(play.final_config().config.states[proc1.0], sink);
    }

    #[test]
    fn reserved_message_names_rejected() {
        let text = "states s0 s1\nmessages bot\ninit s0\ntrans s0 s1 send bot\n";
        let l = parse_pcs(text).unwrap();
        assert!(matches!(
            pcs_to_update_fairness_game(&l),
            Err(PcsError::ReservedNameClash(_))
        ));
    }
}
