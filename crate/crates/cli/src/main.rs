//! Command-line surface for the TSO games toolkit.
//!
//! Exit codes: 0 success, 1 usage, 2 parse error, 3 validation error,
//! 4 resource cap exceeded.

use std::collections::BTreeMap;
use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use tso_games::game::{export_dot, export_json};
use tso_games::loadbuffer::{
    lb_bounded_explore, lb_config_to_json, lb_escape_check, sb_forcing_check, sb_forcing_with,
    ForcingOutcome, LbConfiguration, LbError, LbMove, Pivot,
};
use tso_games::program::{
    parse_program, serialize_program, ConcurrentProgram, Mode, Objective, ProgramError, Severity,
};
use tso_games::reductions::pcs::{
    parse_pcs, pcs_to_process_fairness_game, pcs_to_update_fairness_game, script_from_pcs_run,
    Fairness, PcsError,
};
use tso_games::reductions::qbf::{eval_qbf, parse_qbf, qbf_to_program, QbfError};
use tso_games::semantics::{
    bounded_explore, config_to_json, Configuration, SemanticsError, StepLabel,
};
use tso_games::solver::{
    check_update_fair_prefix, decide, simulate_script, DecideError, PlayOutcome, PlayScript,
    SimulationError, UpdateFairness, Winner,
};
use tso_games::view::{build_view_arena, state_space_bound, view_key, view_of, ViewError};

#[derive(Parser)]
#[command(name = "tso-games", version, about = "Reachability and safety games under TSO semantics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reach,
    Safe,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Reach => Mode::Reach,
            ModeArg::Safe => Mode::Safe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FairnessArg {
    Update,
    Process,
}

impl From<FairnessArg> for Fairness {
    fn from(f: FairnessArg) -> Fairness {
        match f {
            FairnessArg::Update => Fairness::Update,
            FairnessArg::Process => Fairness::Process,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Sb,
    Lb,
}

#[derive(Subcommand)]
enum Command {
    /// Decide the winner of the game described by a program file.
    Solve {
        file: String,
        /// Override the file's objective mode.
        #[arg(long)]
        objective: Option<ModeArg>,
        /// Override the file's target list, e.g. `P1.q2,P2.r0`.
        #[arg(long)]
        targets: Option<String>,
    },
    /// Export the view arena of one process.
    ViewArena {
        file: String,
        #[arg(long)]
        process: String,
        #[arg(long, value_enum, default_value = "dot")]
        format: FormatArg,
    },
    /// Compile a QBF formula into a single-process game program.
    FromQbf {
        /// File, `-` for stdin, or an inline formula.
        input: String,
        #[arg(short, long)]
        output: Option<String>,
        #[arg(long, value_enum, default_value = "reach")]
        mode: ModeArg,
    },
    /// Evaluate a QBF formula by brute force.
    EvalQbf {
        /// File, `-` for stdin, or an inline formula.
        input: String,
    },
    /// Compile a perfect channel system into a fairness game program.
    FromPcs {
        file: String,
        #[arg(long, value_enum)]
        fairness: FairnessArg,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Emit the canonical honest play script for a PCS run.
    PcsScript {
        file: String,
        /// Comma-separated transition ids, e.g. `e0,e1,e0`.
        #[arg(long)]
        run: String,
        #[arg(long, value_enum)]
        fairness: FairnessArg,
    },
    /// Simulate a play script against a program.
    Simulate {
        file: String,
        #[arg(long)]
        script: String,
        #[arg(long)]
        check_update_fair: bool,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Explore the bounded concrete state space.
    Explore {
        file: String,
        #[arg(long)]
        buffer_bound: usize,
        #[arg(long, value_enum, default_value = "sb")]
        semantics: SemanticsArg,
        #[arg(long, default_value_t = 100_000)]
        max_states: usize,
    },
    /// Run the store-buffer/load-buffer divergence checks.
    LbDemo {
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, default_value_t = 4)]
        propagation_bound: usize,
    },
    /// Print the view-count bound of one process.
    StateBound {
        file: String,
        #[arg(long)]
        process: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_CAP: u8 = 4;

impl From<ProgramError> for Failure {
    fn from(e: ProgramError) -> Self {
        Failure::new(EXIT_PARSE, e.to_string())
    }
}

impl From<QbfError> for Failure {
    fn from(e: QbfError) -> Self {
        let code = match e {
            QbfError::TooManyVariables(_) => EXIT_VALIDATION,
            _ => EXIT_PARSE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<PcsError> for Failure {
    fn from(e: PcsError) -> Self {
        let code = match e {
            PcsError::Parse { .. } | PcsError::UnknownState { .. } | PcsError::UnknownMessage { .. } => {
                EXIT_PARSE
            }
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SemanticsError> for Failure {
    fn from(e: SemanticsError) -> Self {
        let code = match e {
            SemanticsError::ClosureCapExceeded(_) | SemanticsError::MaxStatesExceeded(_) => EXIT_CAP,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ViewError> for Failure {
    fn from(e: ViewError) -> Self {
        let code = match e {
            ViewError::Semantics(SemanticsError::ClosureCapExceeded(_))
            | ViewError::Semantics(SemanticsError::MaxStatesExceeded(_)) => EXIT_CAP,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<DecideError> for Failure {
    fn from(e: DecideError) -> Self {
        match e {
            DecideError::Program(pe) => pe.into(),
            DecideError::View(ve) => ve.into(),
            other => Failure::new(EXIT_VALIDATION, other.to_string()),
        }
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        Failure::new(EXIT_VALIDATION, e.to_string())
    }
}

impl From<LbError> for Failure {
    fn from(e: LbError) -> Self {
        let code = match e {
            LbError::MaxStatesExceeded(_) => EXIT_CAP,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

fn read_file(path: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read `{path}`: {e}")))
}

/// Reads a QBF source: a file path, `-` for stdin, or an inline formula.
fn read_qbf_input(input: &str) -> Result<String, Failure> {
    if input == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read stdin: {e}")))?;
        return Ok(buf);
    }
    if std::path::Path::new(input).is_file() {
        return read_file(input);
    }
    if input.contains(':') {
        return Ok(input.to_string());
    }
    Err(Failure::new(
        EXIT_PARSE,
        format!("`{input}` is neither a readable file nor an inline formula"),
    ))
}

fn load_program(path: &str) -> Result<(ConcurrentProgram, Option<Objective>), Failure> {
    let text = read_file(path)?;
    Ok(parse_program(&text)?)
}

fn resolve_targets(
    p: &ConcurrentProgram,
    spec: &str,
) -> Result<Vec<(tso_games::program::ProcId, tso_games::program::StateId)>, Failure> {
    let mut targets = Vec::new();
    for item in spec.split(',').filter(|s| !s.is_empty()) {
        let (proc, state) = item.split_once('.').ok_or_else(|| {
            Failure::new(EXIT_USAGE, format!("bad target `{item}`, expected `P.q`"))
        })?;
        let proc_id = p
            .proc_id(proc)
            .ok_or_else(|| Failure::new(EXIT_VALIDATION, format!("unknown process `{proc}`")))?;
        let state_id = p.process(proc_id).state_id(state).ok_or_else(|| {
            Failure::new(EXIT_VALIDATION, format!("unknown state `{proc}.{state}`"))
        })?;
        targets.push((proc_id, state_id));
    }
    Ok(targets)
}

fn write_output(path: &Option<String>, payload: &str) -> Result<String, Failure> {
    match path {
        Some(path) => {
            std::fs::write(path, payload)
                .map_err(|e| Failure::new(EXIT_VALIDATION, format!("cannot write `{path}`: {e}")))?;
            Ok(String::new())
        }
        None => Ok(payload.to_string()),
    }
}

fn forcing_json(outcome: &ForcingOutcome) -> Json {
    match outcome {
        ForcingOutcome::Forced {
            reached_target,
            confined,
        } => json!({"forced": true, "reachedTarget": reached_target, "confined": confined}),
        ForcingOutcome::NotForced { witness } => {
            json!({"forced": false, "witness": witness})
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Solve {
            file,
            objective,
            targets,
        } => {
            let (program, file_objective) = load_program(&file)?;
            let objective = match (objective, targets) {
                (None, None) => file_objective.ok_or_else(|| {
                    Failure::new(
                        EXIT_USAGE,
                        "no objective: the file has no `objective` line and no flags were given",
                    )
                })?,
                (mode, targets) => {
                    let base_mode = mode.map(Mode::from).or(file_objective.as_ref().map(|o| o.mode));
                    let mode = base_mode.ok_or_else(|| {
                        Failure::new(EXIT_USAGE, "`--targets` without a mode: pass `--objective`")
                    })?;
                    let targets = match targets {
                        Some(spec) => resolve_targets(&program, &spec)?,
                        None => file_objective.map(|o| o.targets).unwrap_or_default(),
                    };
                    Objective::new(mode, targets)
                }
            };
            let c0 = Configuration::initial(&program);
            let result = decide(&program, &objective, &c0)?;
            for w in &result.warnings {
                if w.severity == Severity::Warning {
                    eprintln!("warning: {}", w.message);
                }
            }
            let payload = match (&result.winner, &result.witness) {
                (Winner::ProcessPlayer, Some(w)) => {
                    let mut strategy = BTreeMap::new();
                    for (view, t) in &w.solution.strategy {
                        let key = view_key(&w.projected, view, tso_games::game::Player::A);
                        let key = key.trim_end_matches("|A").to_string();
                        strategy.insert(
                            key,
                            json!({
                                "instr": w.projected.instr_string(&t.instr),
                                "to": w.projected.process(tso_games::program::ProcId(0)).state_name(t.to),
                            }),
                        );
                    }
                    json!({
                        "winner": result.winner.to_string(),
                        "witness": program.process(w.proc).name,
                        "strategy": strategy,
                    })
                }
                _ => json!({
                    "winner": result.winner.to_string(),
                    "witness": Json::Null,
                    "strategy": Json::Null,
                }),
            };
            Ok(payload.to_string())
        }
        Command::ViewArena {
            file,
            process,
            format,
        } => {
            let (program, objective) = load_program(&file)?;
            let proc = program
                .proc_id(&process)
                .ok_or_else(|| Failure::new(EXIT_VALIDATION, format!("unknown process `{process}`")))?;
            let projected = tso_games::program::project(&program, proc)?;
            let c0 = Configuration::initial(&projected);
            let arena = build_view_arena(&projected, &view_of(&projected, &c0)?)?;
            let special = match objective {
                Some(o) => {
                    let o = tso_games::program::project_objective(&o, proc);
                    let targets: Vec<_> = o.targets.iter().map(|(_, q)| *q).collect();
                    arena.special_vertices(&targets)
                }
                None => Default::default(),
            };
            let game_arena = arena.to_game_arena(&projected);
            Ok(match format {
                FormatArg::Dot => export_dot(&game_arena, &special),
                FormatArg::Json => export_json(&game_arena, &special).to_string(),
            })
        }
        Command::FromQbf {
            input,
            output,
            mode,
        } => {
            let text = read_qbf_input(&input)?;
            let formula = parse_qbf(&text)?;
            let (program, objective) = qbf_to_program(&formula, mode.into());
            write_output(&output, &serialize_program(&program, Some(&objective)))
        }
        Command::EvalQbf { input } => {
            let text = read_qbf_input(&input)?;
            let formula = parse_qbf(&text)?;
            let value = eval_qbf(&formula)?;
            Ok(json!({ "value": value }).to_string())
        }
        Command::FromPcs {
            file,
            fairness,
            output,
        } => {
            let pcs = parse_pcs(&read_file(&file)?)?;
            let (program, objective) = match Fairness::from(fairness) {
                Fairness::Update => pcs_to_update_fairness_game(&pcs)?,
                Fairness::Process => pcs_to_process_fairness_game(&pcs)?,
            };
            write_output(&output, &serialize_program(&program, Some(&objective)))
        }
        Command::PcsScript {
            file,
            run: run_spec,
            fairness,
        } => {
            let pcs = parse_pcs(&read_file(&file)?)?;
            let mut run = Vec::new();
            for id in run_spec.split(',').filter(|s| !s.is_empty()) {
                let index = id
                    .strip_prefix('e')
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&i| i < pcs.transitions.len())
                    .ok_or_else(|| {
                        Failure::new(EXIT_VALIDATION, format!("unknown transition id `{id}`"))
                    })?;
                run.push(index);
            }
            let script = script_from_pcs_run(&pcs, &run, fairness.into())?;
            Ok(serde_json::to_string_pretty(&script).unwrap())
        }
        Command::Simulate {
            file,
            script,
            check_update_fair,
            horizon,
        } => {
            let (program, objective) = load_program(&file)?;
            let objective = objective.unwrap_or(Objective::new(Mode::Reach, vec![]));
            let script_text = read_file(&script)?;
            let script: PlayScript = serde_json::from_str(&script_text)
                .map_err(|e| Failure::new(EXIT_PARSE, format!("bad script: {e}")))?;
            let c0 = Configuration::initial(&program);
            let (play, outcome) = simulate_script(&program, &objective, &c0, &script, horizon)?;
            let (outcome_name, ply): (&str, Json) = match &outcome {
                PlayOutcome::TargetVisited { ply } => ("target-visited", json!(ply)),
                PlayOutcome::ProcessDeadlock { ply, .. } => ("process-deadlock", json!(ply)),
                PlayOutcome::HorizonReached => ("horizon-reached", Json::Null),
                PlayOutcome::ScriptEnded => ("script-ended", Json::Null),
            };
            let fair = if check_update_fair {
                match check_update_fair_prefix(&program, &play) {
                    UpdateFairness::Fair => json!(true),
                    UpdateFairness::Unfair { ply } => json!({"fair": false, "violation": ply}),
                }
            } else {
                Json::Null
            };
            Ok(json!({
                "outcome": outcome_name,
                "ply": ply,
                "plies": play.steps.len(),
                "updateFair": fair,
                "final": config_to_json(&program, &play.final_config().config),
            })
            .to_string())
        }
        Command::Explore {
            file,
            buffer_bound,
            semantics,
            max_states,
        } => {
            let (program, _) = load_program(&file)?;
            match semantics {
                SemanticsArg::Sb => {
                    let c0 = Configuration::initial(&program);
                    let ex = bounded_explore(&program, &c0, buffer_bound, max_states)?;
                    let states: Vec<Json> =
                        ex.configs.iter().map(|c| config_to_json(&program, c)).collect();
                    let steps: Vec<Json> = ex
                        .steps
                        .iter()
                        .map(|(from, label, to)| {
                            let label = match label {
                                StepLabel::Instr(proc, t) => format!(
                                    "{}@{}",
                                    program.instr_string(&t.instr),
                                    program.process(*proc).name
                                ),
                                StepLabel::Update(proc) => {
                                    format!("up@{}", program.process(*proc).name)
                                }
                            };
                            json!({"from": from, "label": label, "to": to})
                        })
                        .collect();
                    Ok(json!({
                        "semantics": "sb",
                        "states": states,
                        "steps": steps,
                        "frontier": ex.frontier,
                    })
                    .to_string())
                }
                SemanticsArg::Lb => {
                    let c0 = LbConfiguration::initial(&program);
                    let ex = lb_bounded_explore(&program, &c0, buffer_bound, max_states)?;
                    let states: Vec<Json> = ex
                        .configs
                        .iter()
                        .map(|c| lb_config_to_json(&program, c))
                        .collect();
                    let steps: Vec<Json> = ex
                        .steps
                        .iter()
                        .map(|(from, label, to)| {
                            let label = match label {
                                LbMove::Instr(proc, t) => format!(
                                    "{}@{}",
                                    program.instr_string(&t.instr),
                                    program.process(*proc).name
                                ),
                                LbMove::Propagate(proc, x) => format!(
                                    "prop({})@{}",
                                    program.var_name(*x),
                                    program.process(*proc).name
                                ),
                                LbMove::Delete(proc) => {
                                    format!("del@{}", program.process(*proc).name)
                                }
                            };
                            json!({"from": from, "label": label, "to": to})
                        })
                        .collect();
                    Ok(json!({
                        "semantics": "lb",
                        "states": states,
                        "steps": steps,
                        "frontier": ex.frontier,
                    })
                    .to_string())
                }
            }
        }
        Command::LbDemo {
            horizon,
            propagation_bound,
        } => {
            let report = sb_forcing_check(horizon);
            let control = sb_forcing_with(Pivot::Q2, ["Proc2", "Proc1"], horizon);
            let escape = lb_escape_check(propagation_bound);
            let escape_json = match &escape {
                Ok(r) => json!({
                    "pass": true,
                    "statesExplored": r.states_explored,
                    "firesChecked": r.fires_checked,
                    "q5Configs": r.q5_configs,
                }),
                Err(e) => json!({"pass": false, "witness": e}),
            };
            let payload = json!({
                "sbForcing": {
                    "q2": forcing_json(&report.q2),
                    "q3": forcing_json(&report.q3),
                    "wrongOrderControl": forcing_json(&control),
                },
                "lbEscape": escape_json,
            });
            let ok = report.q2.is_forced()
                && report.q3.is_forced()
                && !control.is_forced()
                && escape.is_ok();
            if !ok {
                eprintln!("divergence checks failed");
                return Err(Failure::new(EXIT_VALIDATION, payload.to_string()));
            }
            Ok(payload.to_string())
        }
        Command::StateBound { file, process } => {
            let (program, _) = load_program(&file)?;
            let proc = program
                .proc_id(&process)
                .ok_or_else(|| Failure::new(EXIT_VALIDATION, format!("unknown process `{process}`")))?;
            let projected = tso_games::program::project(&program, proc)?;
            let bound = state_space_bound(&projected)?;
            Ok(json!({
                "process": process,
                "states": projected.process(tso_games::program::ProcId(0)).states.len(),
                "vars": projected.vars.len(),
                "domain": projected.values.len(),
                "bound": bound,
                "arenaUpperBound": bound.saturating_mul(2),
            })
            .to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success; keep that.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(payload) => {
            if !payload.is_empty() {
                println!("{payload}");
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
