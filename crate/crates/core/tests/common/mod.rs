//! Shared corpus, generators and independent oracles for the integration
//! suites. The oracles here deliberately avoid the library's solver paths.
#![allow(dead_code)] // each test binary uses a different subset

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};

use tso_games::game::{Arena, Player};
use tso_games::program::{
    parse_program, ConcurrentProgram, Mode, Objective, ProcId, VarId, ValueId,
};
use tso_games::reductions::pcs::{Pcs, PcsOp, PcsTransition};
use tso_games::reductions::qbf::{Body, QbfFormula, Quantifier};
use tso_games::semantics::{BufferMessage, Configuration};
use tso_games::view::View;

pub const EX1: &str = "values 0 1\nvars x\ninit x=0\nprocess P init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q2 q2 skip\nobjective reach P.q2\n";

pub const EX2: &str = "values 0 1\nvars x\ninit x=0\nprocess P init q0\n  q0 q1 wr(x,1)\n  q1 q2 mf\n  q2 q2 skip\nobjective reach P.q2\n";

/// Two-variable single-process program with a nondeterministic read.
pub const EX3: &str = "values 0 1\nvars x y\ninit x=0 y=0\nprocess P init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q1 q3 rd(x,1)\n  q2 q4 wr(y,1)\n  q3 q4 skip\n  q4 q4 skip\nobjective reach P.q4\n";

/// EX1 as P1 next to an isolated looping P2; P1 alone wins.
pub const C1: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q2 q2 skip\nprocess P2 init r0\n  r0 r0 skip\nobjective reach P1.q2\n";

/// EX2 duplicated; every projection needs a fence after a write, so the
/// update player wins.
pub const C2: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init q0\n  q0 q1 wr(x,1)\n  q1 q2 mf\n  q2 q2 skip\nprocess P2 init r0\n  r0 r1 wr(x,1)\n  r1 r2 mf\n  r2 r2 skip\nobjective reach P1.q2 P2.r2\n";

/// Handshake that needs real communication; no single projection wins.
pub const C3: &str = "values 0 1\nvars x y\ninit x=0 y=0\nprocess P1 init a0\n  a0 a1 wr(x,1)\n  a1 a2 rd(y,1)\n  a2 a2 skip\nprocess P2 init b0\n  b0 b1 rd(x,1)\n  b1 b2 wr(y,1)\n  b2 b2 skip\nobjective reach P1.a2\n";

/// Safety game the process player wins by idling at a0.
pub const C4: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init a0\n  a0 a0 skip\n  a0 bad rd(x,0)\n  bad bad skip\nprocess P2 init b0\n  b0 b0 wr(x,1)\nobjective safe P1.bad\n";

/// Safety game the update player wins: the only move runs into the unsafe
/// state.
pub const C5: &str = "values 0 1\nvars x\ninit x=0\nprocess P1 init a0\n  a0 a1 wr(x,1)\n  a1 a2 mf\n  a2 a2 skip\nobjective safe P1.a1\n";

pub const CORPUS: &[(&str, &str)] = &[
    ("EX1", EX1),
    ("EX2", EX2),
    ("EX3", EX3),
    ("C1", C1),
    ("C2", C2),
    ("C3", C3),
    ("C4", C4),
    ("C5", C5),
];

pub fn corpus_programs() -> Vec<(String, ConcurrentProgram, Objective)> {
    CORPUS
        .iter()
        .map(|(name, text)| {
            let (p, o) = parse_program(text).expect(name);
            (name.to_string(), p, o.expect("corpus has objectives"))
        })
        .collect()
}

/// Random single-process programs for the abstraction suites.
pub fn random_single_process(seed: u64) -> ConcurrentProgram {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let n_states = rng.gen_range(2..=4);
    let n_vars = rng.gen_range(1..=2);
    let dom = rng.gen_range(2..=3);
    let mut b = tso_games::program::ProgramBuilder::new();
    for d in 0..dom {
        b.value(format!("{d}"));
    }
    for x in 0..n_vars {
        b.var(format!("v{x}"));
        b.init(format!("v{x}"), format!("{}", rng.gen_range(0..dom)));
    }
    b.process("P", "q0");
    let n_trans = rng.gen_range(3..=7);
    for _ in 0..n_trans {
        let from = format!("q{}", rng.gen_range(0..n_states));
        let to = format!("q{}", rng.gen_range(0..n_states));
        let instr = match rng.gen_range(0..5) {
            0 => tso_games::program::RawInstr::Skip,
            1 => tso_games::program::RawInstr::MemFence,
            2 => tso_games::program::RawInstr::Read(
                format!("v{}", rng.gen_range(0..n_vars)),
                format!("{}", rng.gen_range(0..dom)),
            ),
            _ => tso_games::program::RawInstr::Write(
                format!("v{}", rng.gen_range(0..n_vars)),
                format!("{}", rng.gen_range(0..dom)),
            ),
        };
        b.trans(from, to, instr);
    }
    b.build().expect("generated program is well-formed")
}

/// Generates a pair of configurations with equal views: same state, same
/// newest-per-variable buffered values, same fence flag; buffers at most 4
/// messages.
pub fn equal_view_pair(
    p: &ConcurrentProgram,
    rng: &mut impl Rng,
) -> (Configuration, Configuration) {
    assert_eq!(p.processes.len(), 1);
    let process = &p.processes[0];
    let n_vars = p.vars.len();
    let dom = p.values.len();
    let state = tso_games::program::StateId(rng.gen_range(0..process.states.len()));
    let readable: Vec<ValueId> = (0..n_vars)
        .map(|_| ValueId(rng.gen_range(0..dom)))
        .collect();
    let fence = n_vars == 0 || rng.gen_bool(0.3);

    let make = |rng: &mut dyn rand::RngCore| {
        let mut c = Configuration::initial(p);
        c.states[0] = state;
        if fence {
            c.memory.copy_from_slice(&readable);
            return c;
        }
        // Pick a nonempty set of buffered variables; newest message per
        // buffered variable carries the readable value.
        let mut buffered: BTreeSet<usize> = BTreeSet::new();
        buffered.insert(rng.gen_range(0..n_vars));
        for x in 0..n_vars {
            if rng.gen_bool(0.4) {
                buffered.insert(x);
            }
        }
        let mut slots: Vec<usize> = Vec::new();
        for &x in &buffered {
            for _ in 0..rng.gen_range(1..=2usize) {
                slots.push(x);
            }
        }
        while slots.len() > 4 {
            slots.pop();
        }
        // Shuffle variable order, then fill newest-first.
        for i in (1..slots.len()).rev() {
            slots.swap(i, rng.gen_range(0..=i));
        }
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for &x in &slots {
            let value = if seen.insert(x) {
                readable[x]
            } else {
                ValueId(rng.gen_range(0..dom))
            };
            c.buffers[0].push_back(BufferMessage {
                var: VarId(x),
                value,
            });
        }
        for (x, slot) in c.memory.iter_mut().enumerate() {
            *slot = if buffered.contains(&x) {
                ValueId(rng.gen_range(0..dom))
            } else {
                readable[x]
            };
        }
        c
    };
    (make(rng), make(rng))
}

/// Exhaustive prenex formulas with at most two quantifiers over the fixed
/// five-production body grammar
/// `B ::= L | B & B | B "|" B ; L ::= v | !v`
/// with at most three body nodes.
pub fn exhaustive_small_formulas() -> Vec<QbfFormula> {
    fn bodies(n_vars: usize) -> Vec<Body> {
        let mut leaves = Vec::new();
        for v in 0..n_vars {
            leaves.push(Body::Pos(v));
            leaves.push(Body::Neg(v));
        }
        let mut out = leaves.clone();
        for l in &leaves {
            for r in &leaves {
                out.push(Body::And(Box::new(l.clone()), Box::new(r.clone())));
                out.push(Body::Or(Box::new(l.clone()), Box::new(r.clone())));
            }
        }
        out
    }
    let mut formulas = Vec::new();
    for n in 1..=2usize {
        let mut prefixes: Vec<Vec<Quantifier>> = vec![Vec::new()];
        for _ in 0..n {
            prefixes = prefixes
                .into_iter()
                .flat_map(|p| {
                    [Quantifier::Exists, Quantifier::ForAll].into_iter().map(
                        move |q| {
                            let mut p = p.clone();
                            p.push(q);
                            p
                        },
                    )
                })
                .collect();
        }
        for prefix in prefixes {
            for body in bodies(n) {
                formulas.push(QbfFormula {
                    prefix: prefix
                        .iter()
                        .enumerate()
                        .map(|(i, q)| (*q, format!("x{i}")))
                        .collect(),
                    body,
                });
            }
        }
    }
    formulas
}

pub fn random_formula(seed: u64, max_vars: usize) -> QbfFormula {
    fn random_body(rng: &mut impl Rng, n_vars: usize, depth: usize) -> Body {
        if depth == 0 || rng.gen_bool(0.4) {
            let v = rng.gen_range(0..n_vars);
            if rng.gen_bool(0.5) {
                Body::Pos(v)
            } else {
                Body::Neg(v)
            }
        } else if rng.gen_bool(0.5) {
            Body::And(
                Box::new(random_body(rng, n_vars, depth - 1)),
                Box::new(random_body(rng, n_vars, depth - 1)),
            )
        } else {
            Body::Or(
                Box::new(random_body(rng, n_vars, depth - 1)),
                Box::new(random_body(rng, n_vars, depth - 1)),
            )
        }
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    QbfFormula {
        prefix: (0..n)
            .map(|i| {
                let q = if rng.gen_bool(0.5) {
                    Quantifier::Exists
                } else {
                    Quantifier::ForAll
                };
                (q, format!("x{i}"))
            })
            .collect(),
        body: random_body(&mut rng, n, 2),
    }
}

/// Random PCS built around a known legal run: a path of `len` transitions
/// whose ops are channel-consistent, with the designated final state at the
/// end carrying a skip self-loop (so the embedded final state never deadlocks
/// the simulation).
pub fn random_pcs_with_run(seed: u64, max_len: usize) -> (Pcs, Vec<usize>) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let n_messages = rng.gen_range(1..=2);
    let messages: Vec<String> = (0..n_messages).map(|i| format!("m{i}")).collect();
    let len = rng.gen_range(3..=max_len);
    let mut channel: Vec<usize> = Vec::new();
    let mut ops = Vec::new();
    for step in 0..len {
        let op = if step == 0 {
            PcsOp::Send(rng.gen_range(0..n_messages))
        } else {
            match rng.gen_range(0..6) {
                0 | 1 => PcsOp::Send(rng.gen_range(0..n_messages)),
                2 => PcsOp::Skip,
                _ if !channel.is_empty() => PcsOp::Recv(channel[0]),
                _ => PcsOp::Send(rng.gen_range(0..n_messages)),
            }
        };
        match op {
            PcsOp::Send(m) => channel.push(m),
            PcsOp::Recv(_) => {
                channel.remove(0);
            }
            PcsOp::Skip => {}
        }
        ops.push(op);
    }
    let states: Vec<String> = (0..=len).map(|i| format!("s{i}")).collect();
    let mut transitions: Vec<PcsTransition> = ops
        .iter()
        .enumerate()
        .map(|(i, op)| PcsTransition {
            from: i,
            op: *op,
            to: i + 1,
        })
        .collect();
    // keep the final state live
    transitions.push(PcsTransition {
        from: len,
        op: PcsOp::Skip,
        to: len,
    });
    let run: Vec<usize> = (0..len).collect();
    (
        Pcs {
            states,
            messages,
            transitions,
            initial: 0,
            finals: vec![len],
        },
        run,
    )
}

/// Bounded-minimax winner oracle, independent of the attractor solver.
pub fn minimax_winners(arena: &Arena, mode: Mode, special: &BTreeSet<usize>) -> Vec<Player> {
    fn force_visit(
        arena: &Arena,
        special: &BTreeSet<usize>,
        attacker: Player,
        v: usize,
        depth: usize,
        memo: &mut std::collections::HashMap<(usize, usize), bool>,
    ) -> bool {
        if special.contains(&v) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        if let Some(&r) = memo.get(&(v, depth)) {
            return r;
        }
        let succs = arena.successors(v);
        let r = if arena.owner(v) == attacker {
            succs
                .iter()
                .any(|e| force_visit(arena, special, attacker, e.to, depth - 1, memo))
        } else {
            succs
                .iter()
                .all(|e| force_visit(arena, special, attacker, e.to, depth - 1, memo))
        };
        memo.insert((v, depth), r);
        r
    }
    let attacker = match mode {
        Mode::Reach => Player::A,
        Mode::Safe => Player::B,
    };
    let depth = arena.len() + 1;
    let mut memo = std::collections::HashMap::new();
    (0..arena.len())
        .map(|v| {
            if force_visit(arena, special, attacker, v, depth, &mut memo) {
                attacker
            } else {
                attacker.opponent()
            }
        })
        .collect()
}

/// Random bipartite arenas for the generic game tests.
pub fn random_arena(seed: u64, max_side: usize) -> (Arena, BTreeSet<usize>) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let na = rng.gen_range(1..=max_side);
    let nb = rng.gen_range(1..=max_side);
    let mut b = tso_games::game::ArenaBuilder::new();
    for i in 0..na {
        b.vertex(format!("a{i:03}"), Player::A);
    }
    for i in 0..nb {
        b.vertex(format!("b{i:03}"), Player::B);
    }
    for i in 0..na {
        for _ in 0..rng.gen_range(0..3) {
            b.edge(format!("a{i:03}"), format!("b{:03}", rng.gen_range(0..nb)), None);
        }
    }
    for i in 0..nb {
        for _ in 0..rng.gen_range(0..3) {
            b.edge(format!("b{i:03}"), format!("a{:03}", rng.gen_range(0..na)), None);
        }
    }
    b.initial("a000");
    let arena = b.build();
    let mut special = BTreeSet::new();
    for v in 0..arena.len() {
        if rng.gen_bool(0.15) {
            special.insert(v);
        }
    }
    (arena, special)
}

/// View-level trace of one process along a play: the (view, turn) pair at
/// every configuration.
pub fn view_trace(
    p: &ConcurrentProgram,
    proc: ProcId,
    play: &tso_games::solver::Play,
) -> Vec<(View, tso_games::semantics::Turn)> {
    let projected = tso_games::program::project(p, proc).unwrap();
    play.configs()
        .map(|gc| {
            (
                tso_games::view::view_of(&projected, &gc.config.project(proc)).unwrap(),
                gc.turn,
            )
        })
        .collect()
}
