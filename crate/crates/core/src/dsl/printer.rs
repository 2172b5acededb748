//! Deterministic pretty-printer; its output re-parses to an equal model.

use std::fmt::Write;

use crate::model::{Context, ParticipantModel, ProtocolModel};

const INDENT: &str = "  ";

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn participant(out: &mut String, p: &ParticipantModel) {
    let _ = writeln!(out, "{INDENT}participant {} {{", p.name());
    let pad = INDENT.repeat(2);
    if !p.prec.is_empty() {
        let _ = writeln!(out, "{pad}precondition: {};", join(&p.prec));
    }
    if !p.eff.is_empty() {
        let _ = writeln!(out, "{pad}effect: {};", join(&p.eff));
    }
    if !p.gen.is_empty() {
        let _ = writeln!(out, "{pad}generates: {};", join(&p.gen));
    }
    if !p.types.is_empty() {
        let _ = writeln!(out, "{pad}types: {};", join(&p.types));
    }
    if !p.chain.is_empty() {
        let _ = writeln!(out, "{pad}chain:");
        for node in p.chain.nodes() {
            let _ = writeln!(out, "{pad}{INDENT}{node}");
        }
    }
    let _ = writeln!(out, "{INDENT}}}");
}

pub fn serialize_protocol(p: &ProtocolModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "protocol {} {{", p.name);
    if !p.keypairs.is_empty() {
        let _ = writeln!(out, "{INDENT}keypairs {{");
        for (public, private) in p.keypairs.iter() {
            let _ = writeln!(out, "{INDENT}{INDENT}{public} / {private};");
        }
        let _ = writeln!(out, "{INDENT}}}");
    }
    for (i, part) in p.participants.iter().enumerate() {
        if i > 0 || !p.keypairs.is_empty() {
            out.push('\n');
        }
        participant(&mut out, part);
    }
    out.push_str("}\n");
    out
}

pub fn serialize_context(ctx: &Context) -> String {
    let mut out = String::new();
    for t in &ctx.terms {
        let _ = writeln!(out, "term {t};");
    }
    for t in &ctx.types {
        let _ = writeln!(out, "type {t};");
    }
    out
}
