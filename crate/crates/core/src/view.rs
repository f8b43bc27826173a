//! Views of single-process configurations and the finite view game.
//!
//! A view is the triple (local state, per-variable readable value,
//! fence-enabled flag). It determines exactly which instructions are enabled,
//! which makes the induced view game a finite bisimulation quotient of the
//! infinite single-process store-buffer game. The update player's moves
//! collapse to two: stay, or flush the whole buffer (partial flushes are
//! observationally equal to staying).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::game::{self, ArenaBuilder, Player};
use crate::program::{ConcurrentProgram, Instruction, Mode, Objective, ProcId, StateId, Transition, ValueId};
use crate::semantics::{
    apply_instruction, bounded_explore, enabled_moves, flush_all, update_closure, Configuration,
    SemanticsError,
};

/// Finite abstraction of a single-process configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct View {
    pub state: StateId,
    /// Readable value per variable, indexed by `VarId`.
    pub readable: Vec<ValueId>,
    pub fence_enabled: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ViewError {
    #[error("expected a single-process program, got {0} processes")]
    MultiProcess(usize),
    #[error("initial configuration must have an empty buffer")]
    NonEmptyInitialBuffer,
    #[error("state-space bound overflows")]
    BoundOverflow,
    #[error("configurations do not have equal views")]
    NotEqualViews,
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

fn require_single_process(p: &ConcurrentProgram) -> Result<(), ViewError> {
    if p.processes.len() != 1 {
        return Err(ViewError::MultiProcess(p.processes.len()));
    }
    Ok(())
}

/// The view of a configuration: state copied, readable per variable the
/// newest buffered value if any else memory, fence enabled iff buffer empty.
pub fn view_of(p: &ConcurrentProgram, c: &Configuration) -> Result<View, ViewError> {
    require_single_process(p)?;
    let proc = ProcId(0);
    let readable = (0..p.vars.len())
        .map(|x| c.readable(proc, crate::program::VarId(x)))
        .collect();
    Ok(View {
        state: c.states[0],
        readable,
        fence_enabled: c.buffers[0].is_empty(),
    })
}

/// Canonical vertex key, e.g. `q0|x=1|F=0|A`; variables sorted by name.
pub fn view_key(p: &ConcurrentProgram, v: &View, owner: Player) -> String {
    let mut pairs: Vec<(String, String)> = (0..p.vars.len())
        .map(|x| (p.vars[x].clone(), p.values[v.readable[x].0].clone()))
        .collect();
    pairs.sort();
    let mut key = p.process(ProcId(0)).state_name(v.state).to_string();
    for (x, d) in pairs {
        key.push('|');
        key.push_str(&x);
        key.push('=');
        key.push_str(&d);
    }
    key.push_str(if v.fence_enabled { "|F=1" } else { "|F=0" });
    key.push('|');
    key.push_str(&owner.to_string());
    key
}

/// Update-player move in the view game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UpdateMove {
    Stay,
    Flush,
}

/// Edge label of the view game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViewMove {
    Instr(Transition),
    Update(UpdateMove),
}

#[derive(Debug, Clone)]
pub struct ViewVertex {
    pub view: View,
    pub owner: Player,
}

/// The reachable part of the view game, vertices in canonical key order.
#[derive(Debug, Clone)]
pub struct ViewArena {
    pub vertices: Vec<ViewVertex>,
    pub edges: Vec<Vec<(ViewMove, usize)>>,
    pub initial: usize,
}

impl ViewArena {
    pub fn index_of(&self, view: &View, owner: Player) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| v.view == *view && v.owner == owner)
    }

    /// Lowers the view arena to a generic game arena with canonical ids.
    /// Vertex order is preserved index-for-index.
    pub fn to_game_arena(&self, p: &ConcurrentProgram) -> game::Arena {
        let mut b = ArenaBuilder::new();
        for v in &self.vertices {
            b.vertex(view_key(p, &v.view, v.owner), v.owner);
        }
        for (i, edges) in self.edges.iter().enumerate() {
            let from = view_key(p, &self.vertices[i].view, self.vertices[i].owner);
            for (mv, j) in edges {
                let to = view_key(p, &self.vertices[*j].view, self.vertices[*j].owner);
                let label = match mv {
                    ViewMove::Instr(t) => p.instr_string(&t.instr),
                    ViewMove::Update(UpdateMove::Stay) => "stay".to_string(),
                    ViewMove::Update(UpdateMove::Flush) => "flush".to_string(),
                };
                b.edge(from.clone(), to, Some(label));
            }
        }
        b.initial(view_key(
            p,
            &self.vertices[self.initial].view,
            self.vertices[self.initial].owner,
        ));
        let arena = b.build();
        debug_assert_eq!(arena.len(), self.vertices.len());
        debug_assert!((0..arena.len())
            .all(|i| arena.id(i) == view_key(p, &self.vertices[i].view, self.vertices[i].owner)));
        arena
    }

    /// Indices of vertices whose state is an objective target, in both copies.
    pub fn special_vertices(&self, targets: &[StateId]) -> BTreeSet<usize> {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| targets.contains(&v.view.state))
            .map(|(i, _)| i)
            .collect()
    }
}

fn instr_target_view(v: &View, t: &Transition) -> Option<View> {
    match t.instr {
        Instruction::Skip => Some(View {
            state: t.to,
            readable: v.readable.clone(),
            fence_enabled: v.fence_enabled,
        }),
        Instruction::Write(x, d) => {
            let mut readable = v.readable.clone();
            readable[x.0] = d;
            Some(View {
                state: t.to,
                readable,
                fence_enabled: false,
            })
        }
        Instruction::Read(x, d) => (v.readable[x.0] == d).then(|| View {
            state: t.to,
            readable: v.readable.clone(),
            fence_enabled: v.fence_enabled,
        }),
        Instruction::MemFence => v.fence_enabled.then(|| View {
            state: t.to,
            readable: v.readable.clone(),
            fence_enabled: true,
        }),
    }
}

/// Builds the view arena reachable from `(init_view, A)`.
pub fn build_view_arena(
    p: &ConcurrentProgram,
    init_view: &View,
) -> Result<ViewArena, ViewError> {
    build_view_arena_opts(p, init_view, true)
}

/// Arena construction with the flush edge optionally removed (the update
/// player is then forced to stay).
pub fn build_view_arena_opts(
    p: &ConcurrentProgram,
    init_view: &View,
    with_flush: bool,
) -> Result<ViewArena, ViewError> {
    require_single_process(p)?;
    let process = p.process(ProcId(0));

    let mut index: BTreeMap<(View, Player), usize> = BTreeMap::new();
    let mut vertices: Vec<ViewVertex> = Vec::new();
    let mut edges: Vec<Vec<(ViewMove, usize)>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |view: View,
                      owner: Player,
                      vertices: &mut Vec<ViewVertex>,
                      edges: &mut Vec<Vec<(ViewMove, usize)>>,
                      queue: &mut VecDeque<usize>|
     -> usize {
        if let Some(&i) = index.get(&(view.clone(), owner)) {
            return i;
        }
        let i = vertices.len();
        index.insert((view.clone(), owner), i);
        vertices.push(ViewVertex { view, owner });
        edges.push(Vec::new());
        queue.push_back(i);
        i
    };

    let init = intern(init_view.clone(), Player::A, &mut vertices, &mut edges, &mut queue);
    debug_assert_eq!(init, 0);

    while let Some(i) = queue.pop_front() {
        let ViewVertex { view, owner } = vertices[i].clone();
        match owner {
            Player::A => {
                for t in process.transitions_from(view.state) {
                    if let Some(target) = instr_target_view(&view, t) {
                        let j = intern(target, Player::B, &mut vertices, &mut edges, &mut queue);
                        edges[i].push((ViewMove::Instr(*t), j));
                    }
                }
            }
            Player::B => {
                let j = intern(view.clone(), Player::A, &mut vertices, &mut edges, &mut queue);
                edges[i].push((ViewMove::Update(UpdateMove::Stay), j));
                if with_flush && !view.fence_enabled {
                    let flushed = View {
                        state: view.state,
                        readable: view.readable.clone(),
                        fence_enabled: true,
                    };
                    let j = intern(flushed, Player::A, &mut vertices, &mut edges, &mut queue);
                    edges[i].push((ViewMove::Update(UpdateMove::Flush), j));
                }
            }
        }
    }

    // Canonicalize: sort vertices by key and remap edges.
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by_key(|&i| view_key(p, &vertices[i].view, vertices[i].owner));
    let mut position = vec![0usize; vertices.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let mut new_vertices = Vec::with_capacity(vertices.len());
    let mut new_edges = vec![Vec::new(); vertices.len()];
    for &old in &order {
        new_vertices.push(vertices[old].clone());
    }
    for (old, list) in edges.into_iter().enumerate() {
        let mut list: Vec<(ViewMove, usize)> =
            list.into_iter().map(|(mv, j)| (mv, position[j])).collect();
        list.sort();
        list.dedup();
        new_edges[position[old]] = list;
    }
    Ok(ViewArena {
        vertices: new_vertices,
        edges: new_edges,
        initial: position[0],
    })
}

/// Upper bound on the number of views: |Q| * |Dom|^|Vars| * 2.
pub fn state_space_bound(p: &ConcurrentProgram) -> Result<u64, ViewError> {
    require_single_process(p)?;
    let q = p.process(ProcId(0)).states.len() as u64;
    let dom = p.values.len() as u64;
    let vars = u32::try_from(p.vars.len()).map_err(|_| ViewError::BoundOverflow)?;
    dom.checked_pow(vars)
        .and_then(|d| d.checked_mul(q))
        .and_then(|b| b.checked_mul(2))
        .ok_or(ViewError::BoundOverflow)
}

/// Result of solving the view game of one projected process.
#[derive(Debug, Clone)]
pub struct SingleProcessSolution {
    /// A is the process player, B the update player.
    pub winner: Player,
    pub view_arena: ViewArena,
    pub arena: game::Arena,
    pub special: BTreeSet<usize>,
    pub solution: game::Solution,
    /// Positional process-player strategy at view granularity.
    pub strategy: BTreeMap<View, Transition>,
}

/// Solves the single-process game via the view abstraction. The initial
/// configuration must have an empty buffer so the play starts with F = true.
pub fn solve_single_process(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
) -> Result<SingleProcessSolution, ViewError> {
    require_single_process(p)?;
    if !c0.buffers[0].is_empty() {
        return Err(ViewError::NonEmptyInitialBuffer);
    }
    let init_view = view_of(p, c0)?;
    let view_arena = build_view_arena(p, &init_view)?;
    let targets: Vec<StateId> = objective.targets.iter().map(|(_, q)| *q).collect();
    let special = view_arena.special_vertices(&targets);
    let arena = view_arena.to_game_arena(p);
    let solution = game::solve_game(&arena, objective.mode, &special);
    let winner = solution.winner[view_arena.initial];

    let mut strategy = BTreeMap::new();
    for (i, v) in view_arena.vertices.iter().enumerate() {
        if v.owner != Player::A || solution.winner[i] != Player::A {
            continue;
        }
        if let Some(target) = solution.strategy_a[i] {
            let t = view_arena.edges[i]
                .iter()
                .filter(|(mv, j)| *j == target && matches!(mv, ViewMove::Instr(_)))
                .map(|(mv, _)| match mv {
                    ViewMove::Instr(t) => *t,
                    _ => unreachable!(),
                })
                .min()
                .expect("strategy edge exists in the view arena");
            strategy.insert(v.view.clone(), t);
        }
    }
    Ok(SingleProcessSolution {
        winner,
        view_arena,
        arena,
        special,
        solution,
        strategy,
    })
}

/// Failure report for the view-abstraction checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionFailure {
    pub label: String,
    pub detail: String,
}

/// Verifies that two equal-view configurations enable the same instruction
/// transitions with view-equal successors, and that their flush closures have
/// equal view sets.
pub fn check_view_equivalence(
    p: &ConcurrentProgram,
    c1: &Configuration,
    c2: &Configuration,
) -> Result<Result<(), AbstractionFailure>, ViewError> {
    require_single_process(p)?;
    if view_of(p, c1)? != view_of(p, c2)? {
        return Err(ViewError::NotEqualViews);
    }
    let proc = ProcId(0);
    let enabled1: BTreeSet<Transition> = enabled_moves(p, c1).into_iter().map(|(_, t)| t).collect();
    let enabled2: BTreeSet<Transition> = enabled_moves(p, c2).into_iter().map(|(_, t)| t).collect();
    if enabled1 != enabled2 {
        let diff = enabled1
            .symmetric_difference(&enabled2)
            .next()
            .expect("sets differ");
        return Ok(Err(AbstractionFailure {
            label: p.instr_string(&diff.instr),
            detail: "enabled instruction sets differ".into(),
        }));
    }
    for t in &enabled1 {
        let v3 = view_of(p, &apply_instruction(p, c1, proc, t)?)?;
        let v4 = view_of(p, &apply_instruction(p, c2, proc, t)?)?;
        if v3 != v4 {
            return Ok(Err(AbstractionFailure {
                label: p.instr_string(&t.instr),
                detail: "successor views differ".into(),
            }));
        }
    }
    let views = |c: &Configuration| -> Result<BTreeSet<View>, ViewError> {
        update_closure(p, c, crate::semantics::DEFAULT_CLOSURE_CAP)?
            .iter()
            .map(|u| view_of(p, u))
            .collect()
    };
    if views(c1)? != views(c2)? {
        return Ok(Err(AbstractionFailure {
            label: "up*".into(),
            detail: "closure view sets differ".into(),
        }));
    }
    Ok(Ok(()))
}

/// Statistics of a successful bisimulation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BisimStats {
    pub configs_checked: usize,
    pub zig_checked: usize,
    pub zag_checked: usize,
}

/// Checks the zig-zag clauses between the bounded concrete game and the view
/// arena built from `v(c0)`.
pub fn check_bisimulation(
    p: &ConcurrentProgram,
    c0: &Configuration,
    buffer_bound: usize,
    max_states: usize,
) -> Result<Result<BisimStats, AbstractionFailure>, ViewError> {
    let arena = build_view_arena(p, &view_of(p, c0)?)?;
    check_bisimulation_against(p, c0, buffer_bound, max_states, &arena)
}

/// As `check_bisimulation`, against a caller-supplied arena (used to confirm
/// that injected faults are caught).
pub fn check_bisimulation_against(
    p: &ConcurrentProgram,
    c0: &Configuration,
    buffer_bound: usize,
    max_states: usize,
    arena: &ViewArena,
) -> Result<Result<BisimStats, AbstractionFailure>, ViewError> {
    require_single_process(p)?;
    let proc = ProcId(0);
    let exploration = bounded_explore(p, c0, buffer_bound, max_states)?;
    let mut stats = BisimStats {
        configs_checked: 0,
        zig_checked: 0,
        zag_checked: 0,
    };

    for (ci, c) in exploration.configs.iter().enumerate() {
        stats.configs_checked += 1;
        let v = view_of(p, c)?;
        let is_frontier = exploration.frontier.contains(&ci);

        // Process side.
        let a_idx = match arena.index_of(&v, Player::A) {
            Some(i) => i,
            None => {
                return Ok(Err(AbstractionFailure {
                    label: "reachability".into(),
                    detail: "view of a reachable configuration is missing from the arena".into(),
                }))
            }
        };
        // zag: every arena instruction edge has a matching concrete step.
        for (mv, j) in &arena.edges[a_idx] {
            let t = match mv {
                ViewMove::Instr(t) => t,
                _ => continue,
            };
            stats.zag_checked += 1;
            let concrete = apply_instruction(p, c, proc, t);
            let ok = match concrete {
                Ok(c3) => view_of(p, &c3)? == arena.vertices[*j].view,
                Err(_) => false,
            };
            if !ok {
                return Ok(Err(AbstractionFailure {
                    label: p.instr_string(&t.instr),
                    detail: "zag: arena edge has no concrete counterpart".into(),
                }));
            }
        }
        // zig: every concrete instruction step has a matching arena edge.
        for (_, t) in enabled_moves(p, c) {
            if is_frontier && matches!(t.instr, Instruction::Write(_, _)) {
                continue;
            }
            let target = view_of(p, &apply_instruction(p, c, proc, &t)?)?;
            stats.zig_checked += 1;
            let matched = arena.edges[a_idx].iter().any(|(mv, j)| {
                matches!(mv, ViewMove::Instr(tt) if *tt == t)
                    && arena.vertices[*j].view == target
                    && arena.vertices[*j].owner == Player::B
            });
            if !matched {
                return Ok(Err(AbstractionFailure {
                    label: p.instr_string(&t.instr),
                    detail: "zig: concrete step has no arena counterpart".into(),
                }));
            }
        }

        // Update side, when the B-copy is part of the reachable arena.
        if let Some(b_idx) = arena.index_of(&v, Player::B) {
            let closure = update_closure(p, c, max_states)?;
            for u in &closure {
                let uv = view_of(p, u)?;
                stats.zig_checked += 1;
                let matched = arena.edges[b_idx].iter().any(|(mv, j)| {
                    matches!(mv, ViewMove::Update(_))
                        && arena.vertices[*j].view == uv
                        && arena.vertices[*j].owner == Player::A
                });
                if !matched {
                    return Ok(Err(AbstractionFailure {
                        label: "up*".into(),
                        detail: "zig: flush result view missing from arena".into(),
                    }));
                }
            }
            for (mv, j) in &arena.edges[b_idx] {
                let expected = match mv {
                    ViewMove::Update(UpdateMove::Stay) => view_of(p, c)?,
                    ViewMove::Update(UpdateMove::Flush) => view_of(p, &flush_all(p, c))?,
                    ViewMove::Instr(_) => continue,
                };
                stats.zag_checked += 1;
                if arena.vertices[*j].view != expected {
                    return Ok(Err(AbstractionFailure {
                        label: "up*".into(),
                        detail: "zag: update edge target is not realizable".into(),
                    }));
                }
            }
        }
    }
    Ok(Ok(stats))
}

/// Report of a dummy-update discrepancy: winners with and without the flush
/// edge disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DummyUpdateDiscrepancy {
    pub mode: Mode,
    pub with_flush: Player,
    pub without_flush: Player,
}

/// Solves the view game with and without flush edges, for both objectives
/// over the given target set, and requires identical winners at the initial
/// vertex.
pub fn dummy_update_equivalence(
    p: &ConcurrentProgram,
    objective: &Objective,
    c0: &Configuration,
) -> Result<Result<(), DummyUpdateDiscrepancy>, ViewError> {
    require_single_process(p)?;
    if !c0.buffers[0].is_empty() {
        return Err(ViewError::NonEmptyInitialBuffer);
    }
    let init_view = view_of(p, c0)?;
    let targets: Vec<StateId> = objective.targets.iter().map(|(_, q)| *q).collect();
    for mode in [Mode::Reach, Mode::Safe] {
        let mut winners = Vec::new();
        for with_flush in [true, false] {
            let va = build_view_arena_opts(p, &init_view, with_flush)?;
            let special = va.special_vertices(&targets);
            let arena = va.to_game_arena(p);
            let solution = game::solve_game(&arena, mode, &special);
            winners.push(solution.winner[va.initial]);
        }
        if winners[0] != winners[1] {
            return Ok(Err(DummyUpdateDiscrepancy {
                mode,
                with_flush: winners[0],
                without_flush: winners[1],
            }));
        }
    }
    Ok(Ok(()))
}
