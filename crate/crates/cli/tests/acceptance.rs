//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

#[path = "../../core/tests/props/mod.rs"]
mod props;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use protocompose::canonical::{canonical_independent, canonicalize};
use protocompose::corpus::Corpus;
use protocompose::dsl::{parse_context, parse_protocol};
use protocompose::engine::{
    compose, compose_sequences, context_seed, InterruptReason, ProtocolSequence, SequenceError,
};
use protocompose::model::{Context, ProtocolModel, ENV_PARTICIPANT};
use protocompose::oracle::{enumerate_replays, find_replay, OracleBounds};
use protocompose_cli::{run_captured, ExitStatus};

/// Rows of the published results table that must be reproduced exactly:
/// (file 1, file 2, PE S1/S2, PC S1/S2).
const ANCHORS: [(&str, &str, &str, &str); 8] = [
    ("iso9798.prot", "x509v1.prot", "Y/Y", "Y/Y"),
    ("x509v1.prot", "x509v1c.prot", "Y/Y", "Y/Y"),
    ("loweb.prot", "iso9798.prot", "N/Y", "Y/Y"),
    ("banrpc.prot", "loweb.prot", "Y/Y", "N/N"),
    ("kcv1.prot", "kcv2.prot", "Y/Y", "Y/Y"),
    ("lds.prot", "kcv1.prot", "Y/Y", "N/N"),
    ("hns.prot", "neumans.prot", "Y/Y", "Y/Y"),
    ("yl.prot", "kcv1.prot", "Y/Y", "N/N"),
];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus")
}

fn fixture(name: &str) -> String {
    corpus_dir().join(name).display().to_string()
}

fn cli(args: &[&str]) -> (ExitStatus, String, String) {
    let mut argv = vec!["protocompose"];
    argv.extend_from_slice(args);
    run_captured(&argv)
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn table_parity() -> Outcome {
    let started = Instant::now();
    let corpus = Corpus::load(&corpus_dir()).map_err(|e| e.to_string())?;
    let rows = corpus.run().map_err(|e| e.to_string())?;
    for (p1, p2, pe, pc) in ANCHORS {
        let row = rows
            .iter()
            .find(|r| r.row.p1 == p1 && r.row.p2 == p2)
            .ok_or(format!("no corpus row {p1} / {p2}"))?;
        let got = (row.report.pe(), row.report.pc());
        if got != (pe.to_string(), pc.to_string()) {
            return Err(format!(
                "{p1} / {p2}: got {} {}, want {pe} {pc}",
                got.0, got.1
            ));
        }
    }
    let (status, _, err) = cli(&["check", "--table", corpus_dir().to_str().unwrap()]);
    if status != ExitStatus::OK {
        return Err(format!("check --table exited {}: {err}", status.code));
    }
    let took = within(Duration::from_secs(10), started)?;
    let matched = rows.iter().filter(|r| r.matches()).count();
    Ok(format!(
        "8/8 anchors, {matched}/{} rows match, {took:.2?}",
        rows.len()
    ))
}

fn attack_reproduction() -> Outcome {
    let started = Instant::now();
    let ctx = fixture("std.ctx");
    let (status, out, _) = cli(&[
        "oracle",
        &fixture("yl.prot"),
        &fixture("kcv1.prot"),
        "--ctx",
        &ctx,
    ]);
    if status != ExitStatus::NO || !out.contains("from KCv1.") || !out.contains("into YL.") {
        return Err(format!(
            "no K-Cv1 -> Y-L replay (exit {}): {out}",
            status.code
        ));
    }
    let corpus = Corpus::load(&corpus_dir()).map_err(|e| e.to_string())?;
    let load = |f: &str| corpus.protocol(f).map_err(|e| e.to_string());
    let (yl, kc) = (load("yl.prot")?, load("kcv1.prot")?);
    let bounds = OracleBounds::default();
    let distinct = enumerate_replays(&yl, &kc, &corpus.ctx, &bounds).map_err(|e| e.to_string())?;
    let (fa, fb) = (load("ylfix.prot")?, load("kcv1fix.prot")?);
    let fixed = enumerate_replays(&fa, &fb, &corpus.ctx, &bounds).map_err(|e| e.to_string())?;
    if !fixed.is_empty() {
        return Err(format!("{} replays remain after the fix", fixed.len()));
    }
    let c1 = canonicalize(&fa, &corpus.ctx).map_err(|e| e.to_string())?;
    let c2 = canonicalize(&fb, &corpus.ctx).map_err(|e| e.to_string())?;
    if !canonical_independent(&c1, &c2).0 {
        return Err("fixed pair is not canonically independent".into());
    }
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!(
        "{} distinct replays before the fix, 0 after, {took:.2?}",
        distinct.len()
    ))
}

fn differential_sweep() -> Outcome {
    let started = Instant::now();
    let corpus = Corpus::load(&corpus_dir()).map_err(|e| e.to_string())?;
    let bounds = OracleBounds::default();
    let (mut checked, mut replays, mut stricter) = (0, 0, 0);
    let mut violations = Vec::new();
    for row in &corpus.rows {
        let (a, b) = corpus.pair(row).map_err(|e| e.to_string())?;
        for (x1, x2) in [(&a, &b), (&b, &a)] {
            let trace = find_replay(x1, x2, &corpus.ctx, &bounds).map_err(|e| e.to_string())?;
            let c1 = canonicalize(x1, &corpus.ctx).map_err(|e| e.to_string())?;
            let c2 = canonicalize(x2, &corpus.ctx).map_err(|e| e.to_string())?;
            let independent = canonical_independent(&c1, &c2).0;
            checked += 1;
            match (trace.is_some(), independent) {
                (true, true) => violations.push(format!("{} / {}", x1.name, x2.name)),
                (true, false) => replays += 1,
                (false, false) => stricter += 1,
                (false, true) => {}
            }
        }
    }
    if !violations.is_empty() {
        return Err(format!(
            "replay despite independence: {}",
            violations.join(", ")
        ));
    }
    let took = within(Duration::from_secs(120), started)?;
    Ok(format!(
        "{checked} ordered pairs, {replays} with replays, 0 violations, {stricter} dependent without a replay, {took:.2?}"
    ))
}

fn property_suites() -> Outcome {
    let started = Instant::now();
    let mut failed = Vec::new();
    for (name, suite) in props::SUITES {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    if !failed.is_empty() {
        return Err(failed.join("; "));
    }
    Ok(format!(
        "{} suites, {} cases each, {:.2?}",
        props::SUITES.len(),
        props::cfg().cases,
        started.elapsed()
    ))
}

fn one_message(name: &str, nonce: &str, extra: &str) -> ProtocolModel {
    parse_protocol(&format!(
        "protocol {name} {{
  participant A {{
    generates: {nonce};
    {extra}
    types: TYPE_U(A), TYPE_U(B), TYPE_NA({nonce});
    chain: + {nonce}
  }}
  participant B {{
    types: TYPE_U(A), TYPE_U(B), TYPE_NA({nonce});
    chain: - {nonce}
  }}
}}"
    ))
    .expect("inline fixture parses")
}

fn conf_interrupt() -> Result<(), String> {
    let ctx = Context::new();
    let p = one_message("P", "Np", "effect: CON_CONF(Np);");
    let q = one_message("Q", "Nq", "precondition: CON_TERM(Np);");
    let s1 = ProtocolSequence::new(vec![p], ctx.clone());
    let s2 = ProtocolSequence::new(vec![q], ctx);
    match compose_sequences(&s1, &s2) {
        Err(SequenceError::InterruptedExecution {
            reason: InterruptReason::ConfidentialityLoss { .. },
            ..
        }) => Ok(()),
        other => Err(format!("CON_CONF violation not interrupted: {other:?}")),
    }
}

fn seeded_head() -> Result<(), String> {
    let ctx = parse_context("term A;\nterm B;\ntype TYPE_U(A);\ntype TYPE_U(B);\n")
        .map_err(|e| e.to_string())?;
    let exact = one_message("H", "Nh", "precondition: CON_TERM(A), CON_TERM(B);");
    let more = one_message(
        "G",
        "Ng",
        "precondition: CON_TERM(A), CON_TERM(B), CON_TERM(Kx);",
    );
    let seed = context_seed(&ctx);
    if compose(&seed, &exact, &ctx).is_empty() {
        return Err("context-only preconditions rejected after the seed".into());
    }
    if !compose(&seed, &more, &ctx).is_empty() {
        return Err("preconditions outside the context accepted after the seed".into());
    }
    let out = compose_sequences(
        &ProtocolSequence::new(vec![exact], ctx.clone()),
        &ProtocolSequence::new(vec![], ctx),
    )
    .map_err(|e| e.to_string())?;
    match out.participants.first() {
        Some(v) if v.name() == ENV_PARTICIPANT && out.name == "H" => Ok(()),
        _ => Err(format!("head not placed after the seed: {}", out.name)),
    }
}

fn left_fold() -> Result<(), String> {
    let ctx = Context::new();
    let s1 = ProtocolSequence::new(
        vec![one_message("P", "Np", ""), one_message("R", "Nr", "")],
        ctx.clone(),
    );
    let s2 = ProtocolSequence::new(vec![one_message("Q", "Nq", "")], ctx);
    let out = compose_sequences(&s1, &s2).map_err(|e| e.to_string())?;
    let a = out.participant("A").ok_or("no participant A")?;
    let sent: Vec<String> = a.chain.nodes().iter().map(|n| n.term.to_string()).collect();
    if out.name == "P_Q_R" && sent == ["Np", "Nq", "Nr"] {
        Ok(())
    } else {
        Err(format!("fold gave {} with chain {sent:?}", out.name))
    }
}

fn byte_identical_json() -> Result<(), String> {
    let dir = corpus_dir();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            Command::new(env!("CARGO_BIN_EXE_protocompose"))
                .args(["--json", "check", "--table"])
                .arg(&dir)
                .output()
                .map(|o| o.stdout)
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    if runs[0].is_empty() || runs[0] != runs[1] {
        return Err("JSON differs between runs".into());
    }
    Ok(())
}

fn sequence_pins() -> Outcome {
    conf_interrupt()?;
    seeded_head()?;
    left_fold()?;
    byte_identical_json()?;
    Ok("CON_CONF interrupt, seeded head, P_Q_R fold, byte-identical JSON".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 5] = [
        ("table verdict parity", table_parity),
        ("Y-L / K-Cv1 attack reproduction", attack_reproduction),
        ("differential soundness sweep", differential_sweep),
        ("property suites", property_suites),
        ("sequence composition pins", sequence_pins),
    ];
    let mut all = true;
    for (i, (title, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {title} ({detail})", i + 1),
            Err(why) => {
                all = false;
                println!("criterion {}: FAIL  {title} ({why})", i + 1);
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
