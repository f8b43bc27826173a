//! Decision procedure for concurrent TSO games by per-process decomposition,
//! strategy lifting, on-the-fly play simulation, and fairness prefix checks.
//!
//! The process player wins the concurrent game iff she wins the view game of
//! at least one projection; the witness strategy plays only in that process.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Player;
use crate::program::{
    project, project_objective, ConcurrentProgram, Objective, ProcId, ProgramError, Severity,
    Transition, ValidationIssue,
};
use crate::semantics::{
    apply_instruction, apply_update, enabled_moves, Configuration, GameConfiguration,
    SemanticsError, Turn,
};
use crate::view::{solve_single_process, view_of, SingleProcessSolution, View, ViewError};

/// Winner of a TSO game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    ProcessPlayer,
    UpdatePlayer,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Winner::ProcessPlayer => write!(f, "process"),
            Winner::UpdatePlayer => write!(f, "update"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DecideError {
    #[error("initial configuration must have empty buffers")]
    NonEmptyInitialBuffers,
    #[error("initial configuration is already in the winning set: {0}")]
    InitialInTargets(String),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Witness projection for a process-player win.
#[derive(Debug)]
pub struct Witness {
    pub proc: ProcId,
    pub projected: ConcurrentProgram,
    pub objective: Objective,
    pub solution: SingleProcessSolution,
}

#[derive(Debug)]
pub struct DecideResult {
    pub winner: Winner,
    pub witness: Option<Witness>,
    pub warnings: Vec<ValidationIssue>,
    /// View-game winner per projection, in declaration order.
    pub per_process: Vec<Player>,
}

/// Decides the concurrent game: solves every projection's view game and
/// returns the first process-player-winning projection as witness.
pub fn decide(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
) -> Result<DecideResult, DecideError> {
    if !c0.buffers_empty() {
        return Err(DecideError::NonEmptyInitialBuffers);
    }
    for (proc, state) in &objective.targets {
        if c0.states[proc.0] == *state {
            return Err(DecideError::InitialInTargets(
                p.target_string(*proc, *state),
            ));
        }
    }
    let warnings: Vec<ValidationIssue> = crate::program::validate_for_game(p, objective)
        .into_iter()
        .filter(|i| i.severity == Severity::Warning)
        .collect();

    let mut witness = None;
    let mut per_process = Vec::new();
    for proc in p.proc_ids() {
        let projected = project(p, proc)?;
        let proj_objective = project_objective(objective, proc);
        let solution = solve_single_process(&projected, &proj_objective, &c0.project(proc))?;
        per_process.push(solution.winner);
        if solution.winner == Player::A && witness.is_none() {
            witness = Some(Witness {
                proc,
                projected,
                objective: proj_objective,
                solution,
            });
        }
    }
    let winner = if witness.is_some() {
        Winner::ProcessPlayer
    } else {
        Winner::UpdatePlayer
    };
    Ok(DecideResult {
        winner,
        witness,
        warnings,
        per_process,
    })
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("ply {ply}: illegal move: {msg}")]
    IllegalMove { ply: usize, msg: String },
    #[error("strategy domain error: {msg}")]
    StrategyDomain { msg: String },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    View(#[from] ViewError),
}

/// A process-player strategy lifted from a view solution: at every process
/// turn it plays the view strategy's instruction in its own process and never
/// touches the others.
#[derive(Debug, Clone)]
pub struct LiftedStrategy {
    pub proc: ProcId,
    projected: ConcurrentProgram,
    strategy: BTreeMap<View, Transition>,
}

/// Lifts the witness view strategy into the concurrent game.
pub fn lift_strategy(
    p: &ConcurrentProgram,
    proc: ProcId,
    solution: &SingleProcessSolution,
) -> Result<LiftedStrategy, DecideError> {
    Ok(LiftedStrategy {
        proc,
        projected: project(p, proc)?,
        strategy: solution.strategy.clone(),
    })
}

impl LiftedStrategy {
    pub fn choose(&self, c: &Configuration) -> Result<(ProcId, Transition), SimulationError> {
        let projection = c.project(self.proc);
        let view = view_of(&self.projected, &projection)?;
        match self.strategy.get(&view) {
            Some(t) => Ok((self.proc, *t)),
            None => Err(SimulationError::StrategyDomain {
                msg: format!(
                    "no strategy entry for view of process {}",
                    self.projected.process(ProcId(0)).name
                ),
            }),
        }
    }
}

/// Update-player behaviours for simulation.
#[derive(Debug, Clone)]
pub enum UpdateStrategySpec {
    /// Never flushes anything.
    NeverUpdate,
    /// Flushes every buffered message each turn.
    FlushAll,
    /// Flushes k messages, k uniform over 0..=total, processes uniform per flush.
    Random(u64),
    /// Plays the given flush lists in order, then stays.
    Scripted(Vec<Vec<ProcId>>),
}

/// One move of a play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlayMove {
    Proc(ProcId, Transition),
    Update(Vec<ProcId>),
}

/// An alternating play prefix with the move that produced each step.
#[derive(Debug, Clone)]
pub struct Play {
    pub initial: GameConfiguration,
    pub steps: Vec<(PlayMove, GameConfiguration)>,
}

impl Play {
    /// All game configurations of the play, in order.
    pub fn configs(&self) -> impl Iterator<Item = &GameConfiguration> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|(_, c)| c))
    }

    pub fn final_config(&self) -> &GameConfiguration {
        self.steps.last().map(|(_, c)| c).unwrap_or(&self.initial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlayOutcome {
    /// A target configuration appears at this index of the config sequence.
    TargetVisited { ply: usize },
    /// The process player had no enabled instruction at this index.
    ProcessDeadlock { ply: usize, buffers_empty: bool },
    /// The horizon was exhausted without target or deadlock.
    HorizonReached,
    /// A scripted side ran out of moves.
    ScriptEnded,
}

fn in_targets(objective: &Objective, c: &Configuration) -> bool {
    objective
        .targets
        .iter()
        .any(|(proc, state)| c.states[proc.0] == *state)
}

enum UpdateState {
    Never,
    FlushAll,
    Random(Box<rand::rngs::StdRng>),
    Scripted(Vec<Vec<ProcId>>, usize),
}

impl UpdateState {
    fn new(spec: &UpdateStrategySpec) -> Self {
        match spec {
            UpdateStrategySpec::NeverUpdate => UpdateState::Never,
            UpdateStrategySpec::FlushAll => UpdateState::FlushAll,
            UpdateStrategySpec::Random(seed) => {
                UpdateState::Random(Box::new(rand::rngs::StdRng::seed_from_u64(*seed)))
            }
            UpdateStrategySpec::Scripted(lists) => UpdateState::Scripted(lists.clone(), 0),
        }
    }

    /// Flush list for the current turn; `None` ends a scripted play.
    fn next(&mut self, c: &Configuration) -> Option<Vec<ProcId>> {
        match self {
            UpdateState::Never => Some(Vec::new()),
            UpdateState::FlushAll => {
                let mut flushes = Vec::new();
                let mut remaining: Vec<usize> = c.buffers.iter().map(|b| b.len()).collect();
                loop {
                    let mut progressed = false;
                    for (i, left) in remaining.iter_mut().enumerate() {
                        if *left > 0 {
                            flushes.push(ProcId(i));
                            *left -= 1;
                            progressed = true;
                        }
                    }
                    if !progressed {
                        return Some(flushes);
                    }
                }
            }
            UpdateState::Random(rng) => {
                let total: usize = c.buffers.iter().map(|b| b.len()).sum();
                let k = rng.gen_range(0..=total);
                let mut remaining: Vec<usize> = c.buffers.iter().map(|b| b.len()).collect();
                let mut flushes = Vec::new();
                for _ in 0..k {
                    let nonempty: Vec<usize> = remaining
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(i, _)| i)
                        .collect();
                    let pick = nonempty[rng.gen_range(0..nonempty.len())];
                    remaining[pick] -= 1;
                    flushes.push(ProcId(pick));
                }
                Some(flushes)
            }
            UpdateState::Scripted(lists, pos) => {
                let item = lists.get(*pos).cloned();
                *pos += 1;
                item
            }
        }
    }
}

enum ProcState<'a> {
    Lifted(&'a LiftedStrategy),
    Scripted(Vec<(ProcId, Transition)>, usize),
}

impl ProcState<'_> {
    fn next(
        &mut self,
        c: &Configuration,
    ) -> Result<Option<(ProcId, Transition)>, SimulationError> {
        match self {
            ProcState::Lifted(s) => s.choose(c).map(Some),
            ProcState::Scripted(moves, pos) => {
                let item = moves.get(*pos).copied();
                *pos += 1;
                Ok(item)
            }
        }
    }
}

fn run_play(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
    mut proc_strategy: ProcState<'_>,
    upd_spec: &UpdateStrategySpec,
    horizon: usize,
) -> Result<(Play, PlayOutcome), SimulationError> {
    let mut upd = UpdateState::new(upd_spec);
    let mut play = Play {
        initial: GameConfiguration {
            config: c0.clone(),
            turn: Turn::ProcessPlayer,
        },
        steps: Vec::new(),
    };
    let mut cur = c0.clone();
    let mut turn = Turn::ProcessPlayer;

    loop {
        let ply = play.steps.len();
        if in_targets(objective, &cur) {
            return Ok((play, PlayOutcome::TargetVisited { ply }));
        }
        if ply >= horizon {
            return Ok((play, PlayOutcome::HorizonReached));
        }
        match turn {
            Turn::ProcessPlayer => {
                let enabled = enabled_moves(p, &cur);
                if enabled.is_empty() {
                    return Ok((
                        play,
                        PlayOutcome::ProcessDeadlock {
                            ply,
                            buffers_empty: cur.buffers_empty(),
                        },
                    ));
                }
                let (proc, t) = match proc_strategy.next(&cur)? {
                    Some(mv) => mv,
                    None => return Ok((play, PlayOutcome::ScriptEnded)),
                };
                if !enabled.contains(&(proc, t)) {
                    return Err(SimulationError::IllegalMove {
                        ply,
                        msg: format!(
                            "{}: {} {} {} is not enabled",
                            p.process(proc).name,
                            p.process(proc).state_name(t.from),
                            p.process(proc).state_name(t.to),
                            p.instr_string(&t.instr)
                        ),
                    });
                }
                cur = apply_instruction(p, &cur, proc, &t)?;
                turn = Turn::UpdatePlayer;
                play.steps.push((
                    PlayMove::Proc(proc, t),
                    GameConfiguration {
                        config: cur.clone(),
                        turn,
                    },
                ));
            }
            Turn::UpdatePlayer => {
                let flushes = match upd.next(&cur) {
                    Some(f) => f,
                    None => return Ok((play, PlayOutcome::ScriptEnded)),
                };
                for proc in &flushes {
                    cur = apply_update(p, &cur, *proc).map_err(|e| {
                        SimulationError::IllegalMove {
                            ply,
                            msg: e.to_string(),
                        }
                    })?;
                }
                turn = Turn::ProcessPlayer;
                play.steps.push((
                    PlayMove::Update(flushes),
                    GameConfiguration {
                        config: cur.clone(),
                        turn,
                    },
                ));
            }
        }
    }
}

/// Simulates a lifted process-player strategy against an update behaviour.
pub fn simulate_play(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
    strategy: &LiftedStrategy,
    upd: &UpdateStrategySpec,
    horizon: usize,
) -> Result<(Play, PlayOutcome), SimulationError> {
    run_play(p, objective, c0, ProcState::Lifted(strategy), upd, horizon)
}

/// One move of a serialized play script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "turn", rename_all = "lowercase")]
pub enum ScriptMove {
    Process {
        proc: String,
        from: String,
        instr: String,
        to: String,
    },
    Update {
        flushes: Vec<String>,
    },
}

pub type PlayScript = Vec<ScriptMove>;

/// Resolves a script against a program and simulates it. The script must
/// alternate process and update moves, starting with a process move.
pub fn simulate_script(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
    script: &[ScriptMove],
    horizon: usize,
) -> Result<(Play, PlayOutcome), SimulationError> {
    let mut proc_moves = Vec::new();
    let mut upd_moves = Vec::new();
    for (i, mv) in script.iter().enumerate() {
        let expect_process = i % 2 == 0;
        match (mv, expect_process) {
            (ScriptMove::Process { proc, from, instr, to }, true) => {
                let proc_id = p.proc_id(proc).ok_or_else(|| SimulationError::IllegalMove {
                    ply: i,
                    msg: format!("unknown process `{proc}`"),
                })?;
                let process = p.process(proc_id);
                let resolve_state = |name: &str| {
                    process
                        .state_id(name)
                        .ok_or_else(|| SimulationError::IllegalMove {
                            ply: i,
                            msg: format!("unknown state `{}.{}`", proc, name),
                        })
                };
                let instr = crate::program::parse_instruction(p, instr).map_err(|e| {
                    SimulationError::IllegalMove {
                        ply: i,
                        msg: e.to_string(),
                    }
                })?;
                proc_moves.push((
                    proc_id,
                    Transition {
                        from: resolve_state(from)?,
                        instr,
                        to: resolve_state(to)?,
                    },
                ));
            }
            (ScriptMove::Update { flushes }, false) => {
                let mut list = Vec::new();
                for name in flushes {
                    list.push(p.proc_id(name).ok_or_else(|| SimulationError::IllegalMove {
                        ply: i,
                        msg: format!("unknown process `{name}`"),
                    })?);
                }
                upd_moves.push(list);
            }
            _ => {
                return Err(SimulationError::IllegalMove {
                    ply: i,
                    msg: "script does not alternate process/update turns".into(),
                })
            }
        }
    }
    run_play(
        p,
        objective,
        c0,
        ProcState::Scripted(proc_moves, 0),
        &UpdateStrategySpec::Scripted(upd_moves),
        horizon,
    )
}

/// Renders a play as a script.
pub fn play_to_script(p: &ConcurrentProgram, play: &Play) -> PlayScript {
    play.steps
        .iter()
        .map(|(mv, _)| match mv {
            PlayMove::Proc(proc, t) => ScriptMove::Process {
                proc: p.process(*proc).name.clone(),
                from: p.process(*proc).state_name(t.from).to_string(),
                instr: p.instr_string(&t.instr),
                to: p.process(*proc).state_name(t.to).to_string(),
            },
            PlayMove::Update(flushes) => ScriptMove::Update {
                flushes: flushes
                    .iter()
                    .map(|proc| p.process(*proc).name.clone())
                    .collect(),
            },
        })
        .collect()
}

/// Update-fairness verdict for a play prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateFairness {
    Fair,
    /// Some process-player turn was deadlocked with a nonempty buffer.
    Unfair { ply: usize },
}

/// A play prefix satisfies update fairness iff every process-player turn with
/// no enabled instruction has all buffers empty.
pub fn check_update_fair_prefix(p: &ConcurrentProgram, play: &Play) -> UpdateFairness {
    for (i, gc) in play.configs().enumerate() {
        if gc.turn != Turn::ProcessPlayer {
            continue;
        }
        if enabled_moves(p, &gc.config).is_empty() && !gc.config.buffers_empty() {
            return UpdateFairness::Unfair { ply: i };
        }
    }
    UpdateFairness::Fair
}

/// Per-process scheduling statistics over fixed-size windows of plies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessWindowStats {
    /// Plies (per complete window) at which the process had an enabled instruction.
    pub enabled_per_window: Vec<usize>,
    /// Plies (per complete window) at which the process moved.
    pub moved_per_window: Vec<usize>,
    /// Enabled in every complete window but never scheduled in the play.
    pub starved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessFairnessReport {
    pub window: usize,
    pub per_process: Vec<ProcessWindowStats>,
}

/// Counts, per window, how often each process was enabled at a process turn
/// and how often it moved; flags processes that were enabled in every window
/// yet never scheduled.
pub fn process_fairness_report(
    p: &ConcurrentProgram,
    play: &Play,
    window: usize,
) -> ProcessFairnessReport {
    assert!(window > 0, "window must be positive");
    let configs: Vec<&GameConfiguration> = play.configs().collect();
    let plies = play.steps.len();
    let full_windows = plies / window;
    let mut per_process = Vec::new();
    for proc in p.proc_ids() {
        let mut enabled_per_window = vec![0usize; full_windows];
        let mut moved_per_window = vec![0usize; full_windows];
        let mut moved_total = 0usize;
        for (ply, gc) in configs.iter().enumerate().take(plies) {
            let w = ply / window;
            if gc.turn == Turn::ProcessPlayer
                && enabled_moves(p, &gc.config)
                    .iter()
                    .any(|(pr, _)| *pr == proc)
                && w < full_windows
            {
                enabled_per_window[w] += 1;
            }
            if let (PlayMove::Proc(pr, _), _) = &play.steps[ply] {
                if *pr == proc {
                    moved_total += 1;
                    if w < full_windows {
                        moved_per_window[w] += 1;
                    }
                }
            }
        }
        let starved = full_windows > 0
            && enabled_per_window.iter().all(|&n| n > 0)
            && moved_total == 0;
        per_process.push(ProcessWindowStats {
            enabled_per_window,
            moved_per_window,
            starved,
        });
    }
    ProcessFairnessReport {
        window,
        per_process,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{parse_program, Mode};
    use crate::semantics::update_closure;

    const EX1_P2LOOP: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q2 q2 skip\nprocess P2 init r0\n  r0 r0 skip\nobjective reach P1.q2\n";
    const EX2_TWICE: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init q0\n  q0 q1 wr(x,1)\n  q1 q2 mf\n  q2 q2 skip\nprocess P2 init r0\n  r0 r1 wr(x,1)\n  r1 r2 mf\n  r2 r2 skip\nobjective reach P1.q2 P2.r2\n";

    #[test]
    fn decide_finds_first_winning_projection() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let c0 = Configuration::initial(&p);
        let r = decide(&p, &o.unwrap(), &c0).unwrap();
        assert_eq!(r.winner, Winner::ProcessPlayer);
        assert_eq!(r.witness.as_ref().unwrap().proc, ProcId(0));
    }

    #[test]
    fn decide_update_player_when_all_projections_lose() {
        let (p, o) = parse_program(EX2_TWICE).unwrap();
        let c0 = Configuration::initial(&p);
        let r = decide(&p, &o.unwrap(), &c0).unwrap();
        assert_eq!(r.winner, Winner::UpdatePlayer);
        assert!(r.witness.is_none());
        assert!(r.per_process.iter().all(|w| *w == Player::B));
    }

    #[test]
    fn safe_empty_targets_with_skip_loop_is_process_win() {
        let text = "values 0\nvars\ninit\nprocess P init q\n  q q skip\nobjective safe\n";
        let (p, o) = parse_program(text).unwrap();
        let r = decide(&p, &o.unwrap(), &Configuration::initial(&p)).unwrap();
        assert_eq!(r.winner, Winner::ProcessPlayer);
    }

    #[test]
    fn decide_rejects_nonempty_buffers_and_initial_targets() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let mut c = Configuration::initial(&p);
        c.buffers[0].push_front(crate::semantics::BufferMessage {
            var: crate::program::VarId(0),
            value: crate::program::ValueId(1),
        });
        assert!(matches!(
            decide(&p, &o, &c),
            Err(DecideError::NonEmptyInitialBuffers)
        ));

        let bad = Objective::new(
            Mode::Reach,
            vec![(ProcId(0), p.process(ProcId(0)).initial)],
        );
        assert!(matches!(
            decide(&p, &bad, &Configuration::initial(&p)),
            Err(DecideError::InitialInTargets(_))
        ));
    }

    #[test]
    fn decide_winner_invariant_under_process_reordering() {
        let reordered = "values 0 1\nvars x\ninit x=0\nprocess P2 init r0\n  r0 r0 skip\nprocess P1 init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q2 q2 skip\nobjective reach P1.q2\n";
        let (p1, o1) = parse_program(EX1_P2LOOP).unwrap();
        let (p2, o2) = parse_program(reordered).unwrap();
        let r1 = decide(&p1, &o1.unwrap(), &Configuration::initial(&p1)).unwrap();
        let r2 = decide(&p2, &o2.unwrap(), &Configuration::initial(&p2)).unwrap();
        assert_eq!(r1.winner, r2.winner);
    }

    fn lifted_for(p: &ConcurrentProgram, o: &Objective) -> LiftedStrategy {
        let r = decide(p, o, &Configuration::initial(p)).unwrap();
        let w = r.witness.unwrap();
        lift_strategy(p, w.proc, &w.solution).unwrap()
    }

    #[test]
    fn lifted_strategy_reaches_target_against_never_update() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, outcome) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::NeverUpdate,
            10,
        )
        .unwrap();
        // Two process moves: the write and the read-own-write.
        assert_eq!(outcome, PlayOutcome::TargetVisited { ply: 3 });
        let proc_moves = play
            .steps
            .iter()
            .filter(|(mv, _)| matches!(mv, PlayMove::Proc(_, _)))
            .count();
        assert_eq!(proc_moves, 2);
    }

    #[test]
    fn lifted_strategy_lookup_miss_outside_winning_region() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        // A configuration the strategy never visits: q0 with x already 1.
        let mut stray = Configuration::initial(&p);
        stray.memory[0] = crate::program::ValueId(1);
        assert!(matches!(
            lifted.choose(&stray),
            Err(SimulationError::StrategyDomain { .. })
        ));
    }

    #[test]
    fn lifted_strategy_plays_only_its_process() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        for spec in [
            UpdateStrategySpec::NeverUpdate,
            UpdateStrategySpec::FlushAll,
            UpdateStrategySpec::Random(7),
        ] {
            let (play, _) =
                simulate_play(&p, &o, &Configuration::initial(&p), &lifted, &spec, 20).unwrap();
            for (mv, _) in &play.steps {
                if let PlayMove::Proc(proc, _) = mv {
                    assert_eq!(*proc, lifted.proc);
                }
            }
        }
    }

    #[test]
    fn lifted_strategy_wins_against_flush_all() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (_, outcome) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::FlushAll,
            10,
        )
        .unwrap();
        assert!(matches!(outcome, PlayOutcome::TargetVisited { .. }));
    }

    // Locality: process moves driven by the lifted strategy never change the
    // local states or buffers of other processes.
    #[test]
    fn lifted_plays_keep_other_processes_untouched_on_process_moves() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, _) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::Random(3),
            20,
        )
        .unwrap();
        let mut prev = play.initial.clone();
        for (mv, gc) in &play.steps {
            if matches!(mv, PlayMove::Proc(_, _)) {
                for proc in p.proc_ids() {
                    if proc != lifted.proc {
                        assert_eq!(prev.config.states[proc.0], gc.config.states[proc.0]);
                        assert_eq!(prev.config.buffers[proc.0], gc.config.buffers[proc.0]);
                    }
                }
            }
            prev = gc.clone();
        }
    }

    // Against a never-updating opponent, replaying the witness process's
    // instruction subsequence in the single-process game stays
    // reachable-by-flushes from the projections of the concurrent play.
    #[test]
    fn replay_of_witness_instructions_stays_in_flush_closure() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, _) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::NeverUpdate,
            20,
        )
        .unwrap();
        let projected = project(&p, lifted.proc).unwrap();
        let mut replay = Configuration::initial(&p).project(lifted.proc);
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for (mv, gc) in &play.steps {
            if let PlayMove::Proc(_, t) = mv {
                replay = apply_instruction(&projected, &replay, ProcId(0), t).unwrap();
                // the single-process update player flushes some prefix
                let flushes = rng.gen_range(0..=replay.buffers[0].len());
                for _ in 0..flushes {
                    replay = apply_update(&projected, &replay, ProcId(0)).unwrap();
                }
                let projection = gc.config.project(lifted.proc);
                let closure = update_closure(&projected, &projection, 10_000).unwrap();
                assert!(closure.contains(&replay));
            }
        }
    }

    #[test]
    fn play_alternates_turns() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, _) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::Random(1),
            20,
        )
        .unwrap();
        for (i, gc) in play.configs().enumerate() {
            let expected = if i % 2 == 0 {
                Turn::ProcessPlayer
            } else {
                Turn::UpdatePlayer
            };
            assert_eq!(gc.turn, expected);
        }
    }

    #[test]
    fn scripted_overflush_is_rejected_with_ply() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let script = vec![
            ScriptMove::Process {
                proc: "P1".into(),
                from: "q0".into(),
                instr: "wr(x,1)".into(),
                to: "q1".into(),
            },
            ScriptMove::Update {
                flushes: vec!["P1".into(), "P1".into()],
            },
        ];
        let err = simulate_script(&p, &o, &Configuration::initial(&p), &script, 10).unwrap_err();
        match err {
            SimulationError::IllegalMove { ply, .. } => assert_eq!(ply, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn script_round_trips_through_json() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, _) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::FlushAll,
            10,
        )
        .unwrap();
        let script = play_to_script(&p, &play);
        let text = serde_json::to_string(&script).unwrap();
        let back: PlayScript = serde_json::from_str(&text).unwrap();
        assert_eq!(script, back);
        let (replayed, _) =
            simulate_script(&p, &o, &Configuration::initial(&p), &back, 20).unwrap();
        assert_eq!(replayed.steps.len(), play.steps.len());
    }

    #[test]
    fn update_fairness_examples() {
        let text = "values 0 1\nvars x\ninit x=0\nprocess P init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,0)\n";
        let (p, _) = parse_program(text).unwrap();
        let objective = Objective::new(Mode::Reach, vec![]);
        // P writes x=1; rd(x,0) is then disabled while the write is buffered.
        let script = vec![
            ScriptMove::Process {
                proc: "P".into(),
                from: "q0".into(),
                instr: "wr(x,1)".into(),
                to: "q1".into(),
            },
            ScriptMove::Update { flushes: vec![] },
        ];
        let (play, outcome) =
            simulate_script(&p, &objective, &Configuration::initial(&p), &script, 10).unwrap();
        assert!(matches!(outcome, PlayOutcome::ProcessDeadlock { .. }));
        assert_eq!(
            check_update_fair_prefix(&p, &play),
            UpdateFairness::Unfair { ply: 2 }
        );

        // Flushing the message resolves fairness: the deadlock then has an
        // empty buffer (rd(x,0) stays disabled since memory is 1).
        let script = vec![
            ScriptMove::Process {
                proc: "P".into(),
                from: "q0".into(),
                instr: "wr(x,1)".into(),
                to: "q1".into(),
            },
            ScriptMove::Update {
                flushes: vec!["P".into()],
            },
        ];
        let (play, outcome) =
            simulate_script(&p, &objective, &Configuration::initial(&p), &script, 10).unwrap();
        assert!(matches!(outcome, PlayOutcome::ProcessDeadlock { .. }));
        assert_eq!(check_update_fair_prefix(&p, &play), UpdateFairness::Fair);
    }

    #[test]
    fn update_fairness_vacuous_without_deadlock() {
        let (p, o) = parse_program(EX1_P2LOOP).unwrap();
        let o = o.unwrap();
        let lifted = lifted_for(&p, &o);
        let (play, _) = simulate_play(
            &p,
            &o,
            &Configuration::initial(&p),
            &lifted,
            &UpdateStrategySpec::NeverUpdate,
            10,
        )
        .unwrap();
        assert_eq!(check_update_fair_prefix(&p, &play), UpdateFairness::Fair);
    }

    fn round_robin_play(p: &ConcurrentProgram, plies: usize, only: Option<ProcId>) -> Play {
        let objective = Objective::new(Mode::Reach, vec![]);
        let mut moves = Vec::new();
        let mut cursor = 0usize;
        let mut cur = Configuration::initial(p);
        let mut sim_turn = 0usize;
        while sim_turn < plies {
            let enabled = enabled_moves(p, &cur);
            let pick = match only {
                Some(proc) => enabled.iter().find(|(pr, _)| *pr == proc).copied(),
                None => {
                    let proc = ProcId(cursor % p.processes.len());
                    cursor += 1;
                    enabled.iter().find(|(pr, _)| *pr == proc).copied()
                }
            };
            let (proc, t) = pick.expect("scheduled process enabled");
            cur = apply_instruction(p, &cur, proc, &t).unwrap();
            moves.push((proc, t));
            sim_turn += 2;
        }
        let upd = vec![Vec::new(); moves.len()];
        let (play, _) = run_play(
            p,
            &objective,
            &Configuration::initial(p),
            ProcState::Scripted(moves, 0),
            &UpdateStrategySpec::Scripted(upd),
            plies + 2,
        )
        .unwrap();
        play
    }

    #[test]
    fn fairness_report_round_robin_has_no_flags() {
        let text = "values 0\nvars\ninit\nprocess A init a\n  a a skip\nprocess B init b\n  b b skip\nprocess C init c\n  c c skip\n";
        let (p, _) = parse_program(text).unwrap();
        let play = round_robin_play(&p, 24, None);
        let report = process_fairness_report(&p, &play, 6);
        assert!(report.per_process.iter().all(|s| !s.starved));
    }

    #[test]
    fn fairness_report_flags_starved_process() {
        let text = "values 0\nvars\ninit\nprocess P1 init a\n  a a skip\nprocess P2 init b\n  b b skip\n";
        let (p, _) = parse_program(text).unwrap();
        let play = round_robin_play(&p, 50, Some(ProcId(0)));
        let report = process_fairness_report(&p, &play, 10);
        assert!(!report.per_process[0].starved);
        assert!(report.per_process[1].starved);
    }

    #[test]
    fn fairness_report_ignores_disabled_processes() {
        // P2's only instruction is a read that is never enabled.
        let text = "values 0 1\nvars x\ninit x=0\nprocess P1 init a\n  a a skip\nprocess P2 init b\n  b b rd(x,1)\n";
        let (p, _) = parse_program(text).unwrap();
        let play = round_robin_play(&p, 30, Some(ProcId(0)));
        let report = process_fairness_report(&p, &play, 10);
        assert!(!report.per_process[1].starved);
    }
}
