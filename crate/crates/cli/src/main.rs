use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use wtg_core::certificate::{CertificateFile, ProofCertificate};
use wtg_core::checker::check_certificate;
use wtg_core::dpo::enumerate_matches;
use wtg_core::graph::Graph;
use wtg_core::prover::smtlib::{emit_smtlib, smtlib_file_name};
use wtg_core::prover::{parse_strategy, run_strategy, Cancel, Strategy, DEFAULT_STRATEGY};
use wtg_core::sample::spot_check;
use wtg_core::system::GtSystem;

#[derive(Parser)]
#[command(name = "wtg", version, about = "Termination prover for DPO graph transformation using weighted type graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a termination proof and write a certificate.
    Prove {
        file: PathBuf,
        /// Overrides the strategy line of the system file.
        #[arg(long)]
        strategy: Option<String>,
        /// Certificate path; defaults to the system file with extension `.cert`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSON variant of the certificate.
        #[arg(long)]
        json: bool,
        /// Rewrite random hosts and re-verify the weight decomposition of each step.
        #[arg(long)]
        verified: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one SMT-LIB2 script per basic search of the strategy into this directory.
        #[arg(long, value_name = "DIR")]
        emit_smtlib: Option<PathBuf>,
    },
    /// Check a certificate against a system file.
    Check { file: PathBuf, cert: PathBuf },
    /// Enumerate rewrite steps starting from a named graph.
    Steps {
        file: PathBuf,
        #[arg(long)]
        graph: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
}

/// Input problems: exit 1.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<GtSystem, InputError> {
    GtSystem::parse(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn basics(s: &Strategy, out: &mut Vec<(wtg_core::semiring::SemiringKind, usize)>) {
    match s {
        Strategy::Seq(a, b) | Strategy::Par(a, b) => {
            basics(a, out);
            basics(b, out);
        }
        Strategy::Repeat(a) => basics(a, out),
        Strategy::Basic(k, b) => {
            if !out.contains(&(*k, b.size)) {
                out.push((*k, b.size));
            }
        }
    }
}

fn prove(
    file: &Path,
    strategy: Option<String>,
    out: Option<PathBuf>,
    json: bool,
    verified: bool,
    seed: u64,
    smt_dir: Option<PathBuf>,
) -> Result<ExitCode, InputError> {
    let sys = load_system(file)?;
    let text = strategy.or_else(|| sys.strategy.clone()).unwrap_or_else(|| DEFAULT_STRATEGY.to_string());
    let strategy = parse_strategy(&text)?;

    if let Some(dir) = smt_dir {
        std::fs::create_dir_all(&dir)?;
        let rules: Vec<_> = sys.flagged_rules().into_iter().map(|r| r.0).collect();
        let mut nodes = Vec::new();
        basics(&strategy, &mut nodes);
        for (kind, size) in nodes {
            let script = emit_smtlib(&rules, sys.framework, kind, size)?;
            let path = dir.join(smtlib_file_name(kind, size));
            std::fs::write(&path, script)?;
            eprintln!("wrote {}", path.display());
        }
    }

    let run = run_strategy(&strategy, sys.flagged_rules(), sys.framework, &Cancel::default())?;
    for line in &run.log {
        eprintln!("{line}");
    }
    let cert = CertificateFile::from_proof(&sys, &ProofCertificate::from_run(&sys, &run));
    let path = out.unwrap_or_else(|| file.with_extension("cert"));
    std::fs::write(&path, if json { cert.to_json() } else { cert.to_text() })?;
    eprintln!("certificate written to {}", path.display());

    let mut status = ExitCode::SUCCESS;
    if verified {
        let report = spot_check(&sys.flagged_rules(), sys.framework, &run.steps, seed, 30, 8);
        eprintln!(
            "spot check: {} rewrite steps, {} decompositions, {} failures",
            report.rewrite_steps,
            report.decompositions,
            report.failures.len()
        );
        for f in &report.failures {
            eprintln!("  {f}");
        }
        if !report.failures.is_empty() {
            status = ExitCode::from(2);
        }
    }
    println!("{}", run.verdict());
    Ok(status)
}

fn check(file: &Path, cert: &Path) -> Result<ExitCode, InputError> {
    let sys = load_system(file)?;
    let cert = CertificateFile::parse(&read(cert)?).map_err(|e| InputError(format!("{}: {e}", cert.display())))?;
    Ok(match check_certificate(&sys, &cert) {
        Ok(verdict) => {
            println!("accept {verdict}");
            ExitCode::SUCCESS
        }
        Err(reason) => {
            eprintln!("{reason}");
            println!("reject");
            ExitCode::from(2)
        }
    })
}

fn steps(file: &Path, graph: &str, depth: usize) -> Result<ExitCode, InputError> {
    let sys = load_system(file)?;
    let start = sys.graph(graph).ok_or_else(|| InputError(format!("no graph named {graph}")))?;
    let mut frontier: Vec<Arc<Graph>> = vec![start.graph.clone()];
    for d in 1..=depth {
        let mut next: Vec<Arc<Graph>> = Vec::new();
        let mut keys = Vec::new();
        let mut count = 0;
        for g in &frontier {
            for decl in &sys.rules {
                for (_, step) in enumerate_matches(&decl.rule, g, sys.framework) {
                    count += 1;
                    let key = step.h.canonical_key();
                    if !keys.contains(&key) {
                        keys.push(key);
                        next.push(step.h.clone());
                    }
                }
            }
        }
        println!("depth {d}: {count} steps, {} graphs up to isomorphism", next.len());
        for (i, h) in next.iter().enumerate() {
            println!("graph {d}.{i}");
            print!("{h}");
            println!("end");
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // usage errors are input errors; 2 is reserved for rejection
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Prove { file, strategy, out, json, verified, seed, emit_smtlib } => {
            prove(&file, strategy, out, json, verified, seed, emit_smtlib)
        }
        Command::Check { file, cert } => check(&file, &cert),
        Command::Steps { file, graph, depth } => steps(&file, &graph, depth),
    };
    match result {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
