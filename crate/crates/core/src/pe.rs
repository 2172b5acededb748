//! Precondition/effect composition.
//!
//! A participant model `v2` can follow `v1` when every precondition of `v2`
//! is established by an effect of `v1` or by the shared context, and neither
//! side drops the confidentiality the other guarantees.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Context, ParticipantModel, PrecEff, PredKind, ProtocolModel, ENV_PARTICIPANT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("participant names differ: `{0}` vs `{1}`")]
pub struct NameMismatch(pub String, pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum PEFailureKind {
    UnsatisfiedPrecondition,
    ConfidentialityLoss,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PEFailure {
    pub kind: PEFailureKind,
    pub predicate: String,
    pub participant: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PEVerdict {
    pub ok: bool,
    pub failures: Vec<PEFailure>,
}

impl PEVerdict {
    fn from_failures(mut failures: Vec<PEFailure>) -> Self {
        failures.sort();
        failures.dedup();
        PEVerdict {
            ok: failures.is_empty(),
            failures,
        }
    }
}

fn context_facts(ctx: &Context) -> impl Iterator<Item = PrecEff> + '_ {
    ctx.terms.iter().cloned().map(PrecEff::term)
}

fn unsatisfied<'a>(
    ctx: &Context,
    eff1: &BTreeSet<PrecEff>,
    extra: &BTreeSet<PrecEff>,
    prec2: &'a BTreeSet<PrecEff>,
) -> Vec<&'a PrecEff> {
    let facts: BTreeSet<PrecEff> = context_facts(ctx).collect();
    prec2
        .iter()
        .filter(|p| !eff1.contains(p) && !extra.contains(p) && !facts.contains(p))
        .collect()
}

/// True iff every predicate in `prec2` is established by `eff1` or is a
/// `CON_TERM` fact for a context term.
pub fn part_prec(ctx: &Context, eff1: &BTreeSet<PrecEff>, prec2: &BTreeSet<PrecEff>) -> bool {
    unsatisfied(ctx, eff1, &BTreeSet::new(), prec2).is_empty()
}

/// The `CON_CONF` effects of `eff1` whose subject `prec2` mentions while
/// `eff2` does not keep it confidential.
fn destroyed<'a>(
    eff1: &'a BTreeSet<PrecEff>,
    prec2: &BTreeSet<PrecEff>,
    eff2: &BTreeSet<PrecEff>,
) -> Vec<&'a PrecEff> {
    eff1.iter()
        .filter(|e| e.kind == PredKind::Conf)
        .filter(|e| {
            prec2.iter().any(|p| p.subject == e.subject)
                && !eff2.contains(&PrecEff::conf(e.subject.clone()))
        })
        .collect()
}

/// True iff every term kept confidential by `eff1` that the second model
/// depends on is kept confidential by `eff2` too.
pub fn part_nondestr(
    eff1: &BTreeSet<PrecEff>,
    prec2: &BTreeSet<PrecEff>,
    eff2: &BTreeSet<PrecEff>,
) -> bool {
    destroyed(eff1, prec2, eff2).is_empty()
}

/// Effects that the pseudo-participant carrying context knowledge makes
/// available to everyone.
fn env_effects(x: &ProtocolModel) -> BTreeSet<PrecEff> {
    x.participant(ENV_PARTICIPANT)
        .map(|p| p.eff.clone())
        .unwrap_or_default()
}

fn check_pair(
    v1: &ParticipantModel,
    v2: &ParticipantModel,
    ctx: &Context,
    extra: &BTreeSet<PrecEff>,
) -> Vec<PEFailure> {
    let name = v1.name().to_owned();
    let mut out: Vec<PEFailure> = unsatisfied(ctx, &v1.eff, extra, &v2.prec)
        .into_iter()
        .map(|p| PEFailure {
            kind: PEFailureKind::UnsatisfiedPrecondition,
            predicate: p.to_string(),
            participant: name.clone(),
        })
        .collect();
    let lost = destroyed(&v1.eff, &v2.prec, &v2.eff)
        .into_iter()
        .chain(destroyed(&v2.eff, &v1.prec, &v1.eff));
    out.extend(lost.map(|p| PEFailure {
        kind: PEFailureKind::ConfidentialityLoss,
        predicate: p.to_string(),
        participant: name.clone(),
    }));
    out
}

fn merge(
    v1: &ParticipantModel,
    v2: &ParticipantModel,
    ctx: &Context,
    extra: &BTreeSet<PrecEff>,
) -> ParticipantModel {
    let open = unsatisfied(ctx, &v1.eff, extra, &v2.prec);
    ParticipantModel {
        prec: v1.prec.iter().chain(open).cloned().collect(),
        eff: v1.eff.union(&v2.eff).cloned().collect(),
        types: v1.types.union(&v2.types).cloned().collect(),
        gen: v1.gen.union(&v2.gen).cloned().collect(),
        part: v1.part.clone(),
        chain: v1.chain.concat(&v2.chain),
    }
}

fn compose_with(
    v1: &ParticipantModel,
    v2: &ParticipantModel,
    ctx: &Context,
    extra: &BTreeSet<PrecEff>,
) -> Result<ParticipantModel, NameMismatch> {
    if v1.name() != v2.name() {
        return Err(NameMismatch(v1.name().to_owned(), v2.name().to_owned()));
    }
    if check_pair(v1, v2, ctx, extra).is_empty() {
        Ok(merge(v1, v2, ctx, extra))
    } else {
        Ok(ParticipantModel::empty())
    }
}

/// Composes `v1` followed by `v2`, or returns the empty participant model
/// when `v2`'s preconditions are not met or confidentiality is lost.
pub fn pe_compose_participants(
    v1: &ParticipantModel,
    v2: &ParticipantModel,
    ctx: &Context,
) -> Result<ParticipantModel, NameMismatch> {
    compose_with(v1, v2, ctx, &BTreeSet::new())
}

/// Participants paired by name across two protocols, followed by the
/// participants present in only one of them. `ENV` is never paired.
pub(crate) fn pair_participants<'a>(
    x1: &'a ProtocolModel,
    x2: &'a ProtocolModel,
) -> Vec<(Option<&'a ParticipantModel>, Option<&'a ParticipantModel>)> {
    let mut out = Vec::new();
    for v1 in &x1.participants {
        let partner = if v1.name() == ENV_PARTICIPANT {
            None
        } else {
            x2.participant(v1.name())
        };
        out.push((Some(v1), partner));
    }
    for v2 in &x2.participants {
        let paired = v2.name() != ENV_PARTICIPANT && x1.participant(v2.name()).is_some();
        let env_twice = v2.name() == ENV_PARTICIPANT && x1.participant(ENV_PARTICIPANT).is_some();
        if !paired && !env_twice {
            out.push((None, Some(v2)));
        }
    }
    out
}

/// Protocol names are joined with `_` so the composed name stays a valid
/// identifier. An unnamed side contributes nothing.
pub(crate) fn composed_name(x1: &ProtocolModel, x2: &ProtocolModel) -> String {
    match (x1.name.is_empty(), x2.name.is_empty()) {
        (true, _) => x2.name.clone(),
        (_, true) => x1.name.clone(),
        _ => format!("{}_{}", x1.name, x2.name),
    }
}

/// Merges two `ENV` pseudo-participants, keeping the union of their facts.
pub(crate) fn merge_env(a: &ParticipantModel, b: &ParticipantModel) -> ParticipantModel {
    let mut out = a.clone();
    out.eff.extend(b.eff.iter().cloned());
    out.types.extend(b.types.iter().cloned());
    out
}

/// Diagnostic form of [`pe_compose_protocols`]: every unsatisfied
/// precondition and confidentiality loss, per participant pair.
pub fn pe_check_protocols(x1: &ProtocolModel, x2: &ProtocolModel, ctx: &Context) -> PEVerdict {
    let extra: BTreeSet<PrecEff> = env_effects(x1).union(&env_effects(x2)).cloned().collect();
    let failures = pair_participants(x1, x2)
        .into_iter()
        .filter_map(|pair| match pair {
            (Some(v1), Some(v2)) => Some(check_pair(v1, v2, ctx, &extra)),
            (None, Some(v2)) => x1
                .participant(ENV_PARTICIPANT)
                .map(|env| check_pair(env, v2, ctx, &extra)),
            _ => None,
        })
        .flatten()
        .collect();
    PEVerdict::from_failures(failures)
}

/// Composes protocols participant by participant. Returns the empty
/// protocol model if any same-name pair fails to compose. An `ENV` in `x1`
/// stands in as the predecessor of every participant of `x2` without a
/// partner.
pub fn pe_compose_protocols(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
) -> ProtocolModel {
    if x1.is_empty() || x2.is_empty() {
        return ProtocolModel::empty();
    }
    let extra: BTreeSet<PrecEff> = env_effects(x1).union(&env_effects(x2)).cloned().collect();
    let mut participants = Vec::new();
    for pair in pair_participants(x1, x2) {
        let v = match pair {
            (Some(v1), Some(v2)) => match compose_with(v1, v2, ctx, &extra) {
                Ok(v) if !v.is_empty() => v,
                _ => return ProtocolModel::empty(),
            },
            (Some(v1), None) if v1.name() == ENV_PARTICIPANT => {
                match x2.participant(ENV_PARTICIPANT) {
                    Some(v2) => merge_env(v1, v2),
                    None => v1.clone(),
                }
            }
            (None, Some(v2)) => match x1.participant(ENV_PARTICIPANT) {
                Some(env) if !check_pair(env, v2, ctx, &extra).is_empty() => {
                    return ProtocolModel::empty()
                }
                _ => v2.clone(),
            },
            (Some(v), None) => v.clone(),
            (None, None) => unreachable!(),
        };
        participants.push(v);
    }
    ProtocolModel {
        name: composed_name(x1, x2),
        participants,
        keypairs: x1.keypairs.merge(&x2.keypairs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{AtomKind, Chain, Node, Term};

    fn kab() -> Term {
        Term::atom("Kab", AtomKind::SymKey)
    }
    fn pkb() -> Term {
        Term::atom("pkB", AtomKind::PubKey)
    }
    fn set(items: Vec<PrecEff>) -> BTreeSet<PrecEff> {
        items.into_iter().collect()
    }
    fn keyex(t: Term) -> PrecEff {
        PrecEff::new(PredKind::KeyEx, t)
    }

    #[test]
    fn part_prec_examples() {
        let ctx = Context::new();
        assert!(part_prec(&ctx, &set(vec![keyex(kab())]), &set(vec![])));
        assert!(part_prec(
            &ctx,
            &set(vec![keyex(kab())]),
            &set(vec![keyex(kab())])
        ));

        let mut ctx = Context::new();
        ctx.terms.insert(pkb());
        let b = Term::atom("B", AtomKind::User);
        let prec2 = set(vec![
            PrecEff::term(pkb()),
            PrecEff::new(PredKind::PartAuth, b),
        ]);
        assert!(!part_prec(&ctx, &set(vec![]), &prec2));
    }

    #[test]
    fn part_nondestr_examples() {
        let na = Term::atom("Na", AtomKind::Nonce);
        let integ = set(vec![PrecEff::new(PredKind::Integ, na)]);
        assert!(part_nondestr(
            &integ,
            &set(vec![PrecEff::term(kab())]),
            &set(vec![])
        ));

        let conf = set(vec![PrecEff::conf(kab())]);
        let uses = set(vec![PrecEff::term(kab())]);
        assert!(part_nondestr(&conf, &uses, &conf));
        assert!(!part_nondestr(&conf, &uses, &set(vec![])));
    }

    fn with_chain(name: &str, term: &str) -> ParticipantModel {
        let mut v = ParticipantModel::new(name);
        v.chain = Chain::new(vec![Node::send(Term::atom(term, AtomKind::Msg))]);
        v
    }

    #[test]
    fn empty_model_is_right_identity() {
        let mut v = with_chain("A", "M1");
        v.eff.insert(keyex(kab()));
        let mut phi = ParticipantModel::empty();
        phi.part = v.part.clone();
        let out = pe_compose_participants(&v, &phi, &Context::new()).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn composition_is_order_sensitive() {
        let mut v1 = with_chain("A", "M1");
        v1.eff.insert(keyex(kab()));
        v1.prec
            .insert(PrecEff::term(Term::atom("Kas", AtomKind::SymKey)));
        let mut v2 = with_chain("A", "M2");
        v2.prec.insert(keyex(kab()));
        let ctx = Context::new();
        let forward = pe_compose_participants(&v1, &v2, &ctx).unwrap();
        assert!(!forward.is_empty());
        assert_eq!(forward.chain.len(), 2);
        assert!(pe_compose_participants(&v2, &v1, &ctx).unwrap().is_empty());
    }

    #[test]
    fn destroyed_confidentiality_gives_empty_model() {
        let mut v1 = with_chain("A", "M1");
        v1.eff.insert(PrecEff::conf(kab()));
        let mut v2 = with_chain("A", "M2");
        v2.prec.insert(PrecEff::term(kab()));
        v2.eff.insert(keyex(kab()));
        let mut ctx = Context::new();
        ctx.terms.insert(kab());
        assert!(pe_compose_participants(&v1, &v2, &ctx).unwrap().is_empty());
        let verdict = pe_check_protocols(
            &ProtocolModel::new("P", vec![v1]),
            &ProtocolModel::new("Q", vec![v2]),
            &ctx,
        );
        assert_eq!(verdict.failures.len(), 1);
        assert_eq!(verdict.failures[0].kind, PEFailureKind::ConfidentialityLoss);
    }

    #[test]
    fn name_mismatch_is_an_error() {
        let err = pe_compose_participants(
            &with_chain("A", "M"),
            &with_chain("B", "M"),
            &Context::new(),
        );
        assert_eq!(err, Err(NameMismatch("A".into(), "B".into())));
    }

    #[test]
    fn unpaired_participants_are_carried_over() {
        let x1 = ProtocolModel::new("P", vec![with_chain("A", "M1"), with_chain("S", "M2")]);
        let x2 = ProtocolModel::new("Q", vec![with_chain("A", "M3"), with_chain("B", "M4")]);
        let out = pe_compose_protocols(&x1, &x2, &Context::new());
        let names: Vec<_> = out.participants.iter().map(|p| p.name()).collect();
        assert_eq!(names, ["A", "S", "B"]);
        assert_eq!(out.participants[0].chain.len(), 2);
        assert_eq!(out.name, "P_Q");
    }

    #[test]
    fn env_effects_reach_every_participant() {
        let mut env = ParticipantModel::new(ENV_PARTICIPANT);
        env.eff.insert(keyex(kab()));
        let mut a1 = with_chain("A", "M0");
        a1.eff.clear();
        let x1 = ProtocolModel::new("Init", vec![env, a1]);
        let mut a2 = with_chain("A", "M1");
        a2.prec.insert(keyex(kab()));
        let x2 = ProtocolModel::new("Q", vec![a2]);
        assert!(!pe_compose_protocols(&x1, &x2, &Context::new()).is_empty());
    }

    #[test]
    fn env_checks_participants_without_partner() {
        let mut env = ParticipantModel::new(ENV_PARTICIPANT);
        env.eff.insert(PrecEff::term(kab()));
        let seed = ProtocolModel::new("", vec![env]);
        let mut b = with_chain("B", "M1");
        b.prec.insert(PrecEff::term(kab()));
        let ok = ProtocolModel::new("Q", vec![b.clone()]);
        assert!(!pe_compose_protocols(&seed, &ok, &Context::new()).is_empty());
        b.prec.insert(keyex(kab()));
        let needs_more = ProtocolModel::new("R", vec![b]);
        assert!(pe_compose_protocols(&seed, &needs_more, &Context::new()).is_empty());
        let verdict = pe_check_protocols(&seed, &needs_more, &Context::new());
        assert_eq!(verdict.failures.len(), 1);
        assert_eq!(
            verdict.failures[0].kind,
            PEFailureKind::UnsatisfiedPrecondition
        );
    }
}
