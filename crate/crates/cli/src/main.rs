//! `stabsim` command line.
//!
//! Session commands load the session from the state file, run one operation
//! and write it back. Unresolved choices take the first option with a
//! warning; the REPL asks instead.

use std::io::{self, BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use stabsim::session::{ExportFormat, Mode, Op, OpResponse, Session, SessionFile, Status};
use stabsim_core::optics::{
    build_named, compile_circuit_to_lo, extract_kraus, simulate, success_probability, FockState, QuantumCircuit,
};
use stabsim_core::verifier::{check_suite, Suite};
use stabsim_core::{Basis, Branch, GateId};

#[derive(Parser, Debug)]
#[command(
    name = "stabsim",
    version,
    about = "Stabilizer, cluster-graph and linear-optics simulator"
)]
struct Cli {
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Session state file.
    #[arg(long, global = true, env = "STABSIM_STATE", default_value = ".stabsim-session.json")]
    state: PathBuf,
    /// Seed for new sessions and the verifier.
    #[arg(long, global = true, env = "STABSIM_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Start a new session with a graph state.
    NewCluster {
        /// Edges such as `1-2,2-3`.
        #[arg(long, default_value = "")]
        edges: String,
        /// Number of qubits (defaults to the largest id in the edges).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Start a new session from an exported file (`-` reads stdin).
    Import {
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        file: PathBuf,
    },
    /// Apply a Clifford gate.
    Apply {
        #[arg(long, value_parser = parse_gate)]
        gate: GateId,
        /// Comma-separated qubits, control first.
        #[arg(long)]
        qubits: String,
    },
    /// Single-qubit Pauli measurement through the graph rules.
    Measure {
        #[arg(long)]
        qubit: usize,
        #[arg(long, value_parser = parse_basis)]
        basis: Basis,
        /// Post-select the outcome: `+` or `-`.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_outcome)]
        outcome: Option<i8>,
        /// Neighbor that takes the Hadamard after an X measurement.
        #[arg(long)]
        choice: Option<usize>,
    },
    /// Two-qubit fusion, types 1–4.
    Fuse {
        #[arg(long = "type")]
        fusion_type: u8,
        #[arg(long)]
        control: usize,
        #[arg(long)]
        target: usize,
        #[arg(long, value_parser = parse_branch)]
        branch: Branch,
        #[arg(long)]
        choices: Option<String>,
    },
    /// Type-I fusion and its rotated variants 1–4.
    Type1Fuse {
        #[arg(long)]
        variant: u8,
        #[arg(long)]
        control: usize,
        #[arg(long)]
        target: usize,
        #[arg(long, value_parser = parse_branch)]
        branch: Branch,
        #[arg(long)]
        choices: Option<String>,
    },
    /// GHZ projection of one qubit from each cluster.
    Nfuse {
        #[arg(long)]
        qubits: String,
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
    },
    /// Local complementation.
    Lc {
        #[arg(long)]
        qubit: usize,
    },
    /// Read the state back as a graph, applying Hadamards if needed.
    ToGraph {
        #[arg(long)]
        hadamards: Option<String>,
    },
    Export {
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
    },
    /// Print the current snapshot.
    Show,
    /// Drop the last operation.
    Undo,
    /// Linear-optics circuits.
    Lo {
        #[command(subcommand)]
        cmd: LoCommand,
    },
    /// Run verifier suites; exit status 0 iff all pass.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Serve the JSON/HTTP session API.
    Serve {
        #[arg(long, default_value_t = stabsim::server::DEFAULT_PORT)]
        port: u16,
    },
    /// Interactive shell accepting the session commands.
    Repl,
}

#[derive(Subcommand, Debug)]
enum LoCommand {
    /// Kraus operator per detection pattern.
    Kraus {
        #[arg(long)]
        builder: String,
    },
    /// Pattern probabilities for an input state.
    Prob {
        #[arg(long)]
        builder: String,
        /// `plus` or a computational-basis index.
        #[arg(long, default_value = "plus")]
        input: String,
    },
    /// Compile a two-qubit template circuit given as JSON.
    Compile {
        #[arg(long)]
        circuit: String,
    },
}

fn parse_gate(s: &str) -> Result<GateId, String> {
    s.parse().map_err(|e: stabsim_core::Error| e.to_string())
}

fn parse_basis(s: &str) -> Result<Basis, String> {
    s.parse().map_err(|e: stabsim_core::Error| e.to_string())
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    s.parse().map_err(|e: stabsim_core::Error| e.to_string())
}

fn parse_outcome(s: &str) -> Result<i8, String> {
    match s.trim() {
        "+" | "+1" | "1" => Ok(1),
        "-" | "-1" => Ok(-1),
        other => Err(format!("outcome must be + or -, got `{other}`")),
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| format!("`{x}` is not a qubit number")))
        .collect()
}

fn parse_edges(s: &str) -> Result<Vec<[usize; 2]>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|e| {
            let (a, b) = e.split_once('-').ok_or_else(|| format!("edge `{e}` is not `u-v`"))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("edge `{e}` is not `u-v`"))
            };
            Ok([p(a)?, p(b)?])
        })
        .collect()
}

struct Failure {
    code: u8,
    message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

/// Turns a session command into an [`Op`]; `None` for other commands.
fn to_op(cmd: &Command) -> Result<Option<Op>, String> {
    Ok(Some(match cmd {
        Command::NewCluster { edges, n } => Op::NewCluster {
            n: *n,
            edges: parse_edges(edges)?,
        },
        Command::Import { format, file } => Op::Import {
            format: *format,
            data: read_input(file).map_err(|e| format!("{}: {e}", file.display()))?,
        },
        Command::Apply { gate, qubits } => Op::Apply {
            gate: *gate,
            qubits: parse_list(qubits)?,
        },
        Command::Measure {
            qubit,
            basis,
            outcome,
            choice,
        } => Op::Measure {
            qubit: *qubit,
            basis: *basis,
            outcome: *outcome,
            choice: *choice,
        },
        Command::Fuse {
            fusion_type,
            control,
            target,
            branch,
            choices,
        } => Op::Fuse {
            fusion_type: *fusion_type,
            control: *control,
            target: *target,
            branch: *branch,
            choices: choices.as_deref().map(parse_list).transpose()?,
        },
        Command::Type1Fuse {
            variant,
            control,
            target,
            branch,
            choices,
        } => Op::Type1Fuse {
            variant: *variant,
            control: *control,
            target: *target,
            branch: *branch,
            choices: choices.as_deref().map(parse_list).transpose()?,
        },
        Command::Nfuse { qubits, i, j } => Op::Nfuse {
            qubits: parse_list(qubits)?,
            i: *i,
            j: *j,
        },
        Command::Lc { qubit } => Op::Lc { qubit: *qubit },
        Command::ToGraph { hadamards } => Op::ToGraph {
            hadamards: hadamards.as_deref().map(parse_list).transpose()?,
        },
        _ => return Ok(None),
    }))
}

fn read_input(path: &Path) -> io::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

fn load(path: &Path) -> Result<Session, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e} (start with new-cluster)", path.display()),
    })?;
    let file: SessionFile = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Session::from_file(&file)?)
}

fn save(path: &Path, s: &Session) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&s.to_file())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn human(r: &OpResponse) -> String {
    let snap = &r.snapshot;
    let mut out = String::new();
    if let Some(e) = &r.record {
        out.push_str(e.op.name());
        if !e.outcomes.is_empty() {
            let o: Vec<&str> = e.outcomes.iter().map(|&x| if x > 0 { "+1" } else { "-1" }).collect();
            out.push_str(&format!(
                " outcomes [{}]{}",
                o.join(", "),
                if e.forced { " (forced)" } else { "" }
            ));
        }
        if !e.hadamards.is_empty() {
            out.push_str(&format!(" H on {:?}", e.hadamards));
        }
        if e.computed_by_oracle {
            out.push_str(" (via tableau)");
        }
        out.push('\n');
    }
    match &snap.graph {
        Some(g) => {
            let e: Vec<String> = g.edges.iter().map(|[u, v]| format!("{u}-{v}")).collect();
            out.push_str(&format!(
                "n = {}, edges: {}\n",
                snap.n,
                if e.is_empty() { "none".into() } else { e.join(" ") }
            ));
            let c: Vec<String> = snap
                .components
                .iter()
                .map(|c| format!("{{{}}}", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")))
                .collect();
            out.push_str(&format!("components: {}\n", c.join(" ")));
            if !g.self_loops.is_empty() {
                out.push_str(&format!("self-loops: {:?}\n", g.self_loops));
            }
            if !g.phase_tags.is_empty() {
                out.push_str(&format!("phase tags: {:?}\n", g.phase_tags));
            }
        }
        None if snap.n > 0 => out.push_str(&format!("n = {}, not a graph state\n", snap.n)),
        None => out.push_str("empty session\n"),
    }
    if !snap.generators.is_empty() {
        out.push_str(&format!("stabilizers: ⟨{}⟩\n", snap.generators.join(", ")));
    }
    if let (Status::NeedsChoice, Some(opts)) = (r.status, &r.choices) {
        out.push_str("choose one of:\n");
        for (i, o) in opts.iter().enumerate() {
            out.push_str(&format!("  [{i}] {o:?}\n"));
        }
    }
    out
}

fn emit(json_out: bool, value: &serde_json::Value, text: &str) {
    if json_out {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("JSON value serializes")
        );
    } else {
        print!("{text}");
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(op) = to_op(&cli.cmd)? {
        let fresh = matches!(op, Op::NewCluster { .. } | Op::Import { .. });
        let mut s = if fresh {
            Session::new(cli.seed)
        } else {
            load(&cli.state)?
        };
        let r = s.submit(op, Mode::Auto)?;
        for w in s.take_warnings() {
            eprintln!("warning: {w}");
        }
        save(&cli.state, &s)?;
        emit(cli.json, &serde_json::to_value(&r)?, &human(&r));
        return Ok(0);
    }
    match cli.cmd {
        Command::Show => {
            let s = load(&cli.state)?;
            let r = s.respond(Status::Ok, None, None, None);
            emit(cli.json, &serde_json::to_value(&r)?, &human(&r));
        }
        Command::Undo => {
            let mut s = load(&cli.state)?;
            let r = s.undo()?;
            save(&cli.state, &s)?;
            emit(cli.json, &serde_json::to_value(&r)?, &human(&r));
        }
        Command::Export { format } => {
            let s = load(&cli.state)?;
            print!("{}", s.export(format)?);
        }
        Command::Lo { cmd } => lo(cli.json, cmd)?,
        Command::Verify { suite, trials, n } => return verify(cli.json, &suite, trials, n, cli.seed),
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(stabsim::server::serve(port, cli.seed))?;
        }
        Command::Repl => repl(cli.json, cli.seed)?,
        _ => unreachable!("session commands are handled above"),
    }
    Ok(0)
}

fn lo(json_out: bool, cmd: LoCommand) -> Result<(), Failure> {
    match cmd {
        LoCommand::Kraus { builder } => {
            let circ = build_named(&builder)?;
            let map = extract_kraus(&circ)?;
            let ops = map.to_json();
            let mut text = String::new();
            for k in &ops {
                text.push_str(&format!("{} ({})\n", k.pattern, k.classification));
                for (occ, row) in k.rows.iter().zip(&k.matrix) {
                    let cells: Vec<String> = row.iter().map(|[re, im]| fmt_complex(*re, *im)).collect();
                    text.push_str(&format!("  {:?}: [{}]\n", occ, cells.join(", ")));
                }
            }
            text.push_str(&format!("completeness error {:.1e}\n", map.completeness_error()));
            emit(
                json_out,
                &json!({"builder": builder, "kraus": ops, "completeness_error": map.completeness_error()}),
                &text,
            );
        }
        LoCommand::Prob { builder, input } => {
            let circ = build_named(&builder)?;
            let state = if input == "plus" {
                FockState::plus(circ.qubits)
            } else {
                let idx: usize = input
                    .parse()
                    .map_err(|_| format!("input `{input}` is neither `plus` nor an index"))?;
                if idx >= 1 << circ.qubits {
                    return Err(format!("basis index {idx} out of range for {} qubits", circ.qubits).into());
                }
                FockState::basis(circ.qubits, idx)
            };
            let results = simulate(&circ, &state)?;
            let total = success_probability(&circ, &state)?;
            let rows: Vec<_> = results
                .iter()
                .map(|r| json!({"pattern": r.label, "success": r.pattern.is_success(), "probability": r.probability}))
                .collect();
            let mut text: String = results
                .iter()
                .map(|r| {
                    format!(
                        "{:<24} {:.6}{}\n",
                        r.label,
                        r.probability,
                        if r.pattern.is_success() { "  success" } else { "" }
                    )
                })
                .collect();
            text.push_str(&format!("success probability {total:.6}\n"));
            emit(
                json_out,
                &json!({"builder": builder, "patterns": rows, "success_probability": total}),
                &text,
            );
        }
        LoCommand::Compile { circuit } => {
            let qc: QuantumCircuit = serde_json::from_str(&circuit).map_err(|e| format!("circuit JSON: {e}"))?;
            let lo = compile_circuit_to_lo(&qc)?;
            let j = lo.to_json();
            let text: String = lo.elements.iter().map(|e| format!("{e}\n")).collect();
            emit(json_out, &serde_json::to_value(&j)?, &text);
        }
    }
    Ok(())
}

fn fmt_complex(re: f64, im: f64) -> String {
    match (re == 0.0, im == 0.0) {
        (true, true) => "0".into(),
        (false, true) => format!("{re:.4}"),
        (true, false) => format!("{im:.4}i"),
        _ => format!("{re:.4}{im:+.4}i"),
    }
}

fn verify(json_out: bool, suite: &str, trials: usize, n: usize, seed: u64) -> Result<u8, Failure> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse()?]
    };
    let mut reports = Vec::new();
    for s in suites {
        reports.push(check_suite(s, trials, n, seed)?);
    }
    let ok = reports.iter().all(|r| r.passed());
    let text: String = reports.iter().map(|r| r.summary() + "\n").collect();
    emit(json_out, &json!({"passed": ok, "reports": reports}), &text);
    Ok(if ok { 0 } else { 1 })
}

fn prompt(out: &mut impl Write, p: &str) -> io::Result<()> {
    write!(out, "{p}")?;
    out.flush()
}

fn repl(json_out: bool, seed: u64) -> Result<(), Failure> {
    let stdin = io::stdin();
    let lines = stdin.lock().lines();
    let mut stdout = io::stdout();
    let mut s = Session::new(seed);
    let show = |r: &OpResponse| {
        if json_out {
            println!("{}", serde_json::to_string(r).expect("response serializes"));
        } else {
            print!("{}", human(r));
        }
    };
    prompt(&mut stdout, "stabsim> ")?;
    for line in lines {
        let line = line?;
        let words = match shlex::split(line.trim()) {
            Some(w) => w,
            None => {
                eprintln!("error: unbalanced quotes");
                prompt(&mut stdout, "stabsim> ")?;
                continue;
            }
        };
        match words.first().map(String::as_str) {
            None => {}
            Some("quit" | "exit") => break,
            Some("help") => println!(
                "session commands as on the command line (new-cluster, apply, measure, fuse, type1-fuse, nfuse, lc, \
                 to-graph, export, show, undo); `choose <k>` answers a pending choice"
            ),
            Some("choose") => {
                let k = words.get(1).and_then(|k| k.parse().ok());
                match k.map(|k| s.choose(k, Mode::Interactive)) {
                    Some(Ok(r)) => show(&r),
                    Some(Err(e)) => eprintln!("error: {e}"),
                    None => eprintln!("usage: choose <index>"),
                }
            }
            Some(_) => {
                let argv = std::iter::once("stabsim".to_string()).chain(words);
                match Cli::try_parse_from(argv) {
                    Err(e) => eprint!("{e}"),
                    Ok(c) => match c.cmd {
                        Command::Show => show(&s.respond(Status::Ok, None, None, None)),
                        Command::Undo => match s.undo() {
                            Ok(r) => show(&r),
                            Err(e) => eprintln!("error: {e}"),
                        },
                        Command::Export { format } => match s.export(format) {
                            Ok(t) => print!("{t}"),
                            Err(e) => eprintln!("error: {e}"),
                        },
                        ref cmd => match to_op(cmd) {
                            Err(e) => eprintln!("error: {e}"),
                            Ok(None) => eprintln!("error: not available inside the REPL"),
                            Ok(Some(op)) => match s.submit(op, Mode::Interactive) {
                                Ok(r) => show(&r),
                                Err(e) => eprintln!("error: {e}"),
                            },
                        },
                    },
                }
            }
        }
        prompt(&mut stdout, "stabsim> ")?;
    }
    println!();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
