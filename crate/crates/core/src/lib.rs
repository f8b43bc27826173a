//! Games on concurrent programs under TSO store-buffer semantics.
//!
//! The crate decides two-player reachability and safety games between a
//! process player (who executes program instructions) and an update player
//! (who flushes store buffers). Solving goes through per-process
//! decomposition and a finite view-game abstraction with attractor-based
//! strategy extraction. Companion modules generate and validate the QBF and
//! perfect-channel-system reductions and the load-buffer divergence example.
//!
//! ```
//! use tso_games::program::parse_program;
//! use tso_games::semantics::Configuration;
//! use tso_games::solver::{decide, Winner};
//!
//! let text = "values 0 1\nvars x\ninit x=0\nprocess P init q0\n  q0 q1 wr(x,1)\n  q1 q2 rd(x,1)\n  q2 q2 skip\nobjective reach P.q2\n";
//! let (program, objective) = parse_program(text)?;
//! let c0 = Configuration::initial(&program);
//! let result = decide(&program, &objective.unwrap(), &c0)?;
//! assert_eq!(result.winner, Winner::ProcessPlayer);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod game;
pub mod loadbuffer;
pub mod program;
pub mod reductions;
pub mod semantics;
pub mod solver;
pub mod view;
