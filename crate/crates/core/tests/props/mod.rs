#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::subsequence;
use proptest::test_runner::TestRunner;

use protocompose::canonical::{
    canon_accepts, canon_match, canon_term, pc_compose_participants, BasicType, CanonicalTerm,
};
use protocompose::dsl::{parse_protocol, serialize_protocol};
use protocompose::engine::compose;
use protocompose::model::{
    well_formed, Context, ParticipantModel, PrecEff, PredKind, ProtocolModel, TypeKind,
    TypePredicate,
};
use protocompose::oracle::{dy_close, IntruderKnowledge};
use protocompose::pe::pe_compose_protocols;
use protocompose::term::{key_inverse, AtomKind, Chain, FuncName, KeyPairs, Node, Sign, Term};

pub fn cfg() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(1000)
    }
}

const ATOMS: [(&str, AtomKind); 9] = [
    ("A", AtomKind::User),
    ("B", AtomKind::User),
    ("Na", AtomKind::Nonce),
    ("Nb", AtomKind::Nonce),
    ("Ta", AtomKind::Timestamp),
    ("M", AtomKind::Msg),
    ("Kab", AtomKind::SymKey),
    ("pkB", AtomKind::PubKey),
    ("prvB", AtomKind::PrvKey),
];

fn atom(name: &str) -> Term {
    let kind = ATOMS.iter().find(|(n, _)| *n == name).expect("pool atom").1;
    Term::atom(name, kind)
}

fn pairs() -> KeyPairs {
    let mut kp = KeyPairs::new();
    kp.insert("pkB", "prvB");
    kp
}

fn types() -> BTreeSet<TypePredicate> {
    let mut out: BTreeSet<TypePredicate> = [
        ("A", TypeKind::U),
        ("B", TypeKind::U),
        ("Na", TypeKind::Na),
        ("Nb", TypeKind::Na),
        ("Ta", TypeKind::Nt),
        ("M", TypeKind::Msg),
    ]
    .into_iter()
    .map(|(n, k)| TypePredicate::of(k, n))
    .collect();
    out.insert(TypePredicate::new(
        TypeKind::KSym,
        atom("Kab"),
        vec![atom("A"), atom("B")],
    ));
    out.insert(TypePredicate::new(
        TypeKind::KPub,
        atom("pkB"),
        vec![atom("B")],
    ));
    out.insert(TypePredicate::new(
        TypeKind::KPrv,
        atom("prvB"),
        vec![atom("B")],
    ));
    out
}

fn ctx() -> Context {
    let mut c = Context::new();
    for n in ["A", "B", "pkB"] {
        c.terms.insert(atom(n));
    }
    c.types = types()
        .into_iter()
        .filter(|t| c.terms.contains(&t.subject))
        .collect();
    c
}

fn leaf() -> impl Strategy<Value = Term> {
    proptest::sample::select(ATOMS.iter().map(|(n, _)| *n).collect::<Vec<_>>()).prop_map(atom)
}

fn term() -> impl Strategy<Value = Term> {
    term_upto(3)
}

/// Terms over the atom pool with keys of the right kind for each function.
fn term_upto(depth: u32) -> impl Strategy<Value = Term> {
    leaf().prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Term::pair(l, r)),
            inner
                .clone()
                .prop_map(|b| Term::enc(b, FuncName::Sk, atom("Kab"))),
            (inner.clone(), prop_oneof![Just("pkB"), Just("prvB")]).prop_map(|(b, k)| Term::enc(
                b,
                FuncName::Pk,
                atom(k)
            )),
            inner.clone().prop_map(Term::hash),
            inner.prop_map(|b| Term::enc(b, FuncName::Hmac, atom("Kab"))),
        ]
    })
}

fn facts() -> Vec<PrecEff> {
    vec![
        PrecEff::new(PredKind::Term, atom("Kab")),
        PrecEff::new(PredKind::KeyEx, atom("Kab")),
        PrecEff::new(PredKind::PartAuth, atom("A")),
        PrecEff::new(PredKind::PartAuth, atom("B")),
        PrecEff::new(PredKind::Conf, atom("Na")),
        PrecEff::new(PredKind::Integ, atom("M")),
    ]
}

fn participant(
    name: &str,
    prec: Vec<PrecEff>,
    eff: Vec<PrecEff>,
    gen: &[&str],
    nodes: Vec<Node>,
) -> ParticipantModel {
    let mut v = ParticipantModel::new(name);
    v.prec = prec.into_iter().collect();
    v.eff = eff.into_iter().collect();
    v.types = types();
    v.chain = Chain::new(nodes);
    let sent: BTreeSet<Term> = v
        .chain
        .0
        .iter()
        .filter(|n| n.sign == Sign::Send)
        .flat_map(|n| n.term.atoms())
        .map(Term::Atom)
        .collect();
    v.gen = gen
        .iter()
        .map(|n| atom(n))
        .filter(|t| sent.contains(t))
        .collect();
    v
}

/// Two-party protocols: a list of messages, each sent by A or by B.
fn protocol(name: &'static str) -> impl Strategy<Value = ProtocolModel> {
    (
        prop::collection::vec((any::<bool>(), term()), 1..4),
        subsequence(facts(), 0..3),
        subsequence(facts(), 0..4),
        subsequence(facts(), 0..3),
        subsequence(facts(), 0..4),
    )
        .prop_map(move |(msgs, pa, ea, pb, eb)| {
            let a_nodes = msgs
                .iter()
                .map(|(from_a, t)| {
                    if *from_a {
                        Node::send(t.clone())
                    } else {
                        Node::recv(t.clone())
                    }
                })
                .collect();
            let b_nodes = msgs
                .iter()
                .map(|(from_a, t)| {
                    if *from_a {
                        Node::recv(t.clone())
                    } else {
                        Node::send(t.clone())
                    }
                })
                .collect();
            let mut x = ProtocolModel::new(
                name,
                vec![
                    participant("A", pa, ea, &["Na", "Ta", "M"], a_nodes),
                    participant("B", pb, eb, &["Nb"], b_nodes),
                ],
            );
            x.keypairs = pairs();
            x
        })
}

fn basic() -> impl Strategy<Value = CanonicalTerm> {
    proptest::sample::select(BasicType::ALL.to_vec()).prop_map(CanonicalTerm::Basic)
}

fn canonical() -> impl Strategy<Value = CanonicalTerm> {
    basic().prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| CanonicalTerm::pair(l, r)),
            (
                inner.clone(),
                prop_oneof![Just(FuncName::Sk), Just(FuncName::Pk), Just(FuncName::Hmac)],
                inner
            )
                .prop_map(|(b, f, k)| CanonicalTerm::enc(b, f, k)),
        ]
    })
}

fn knowledge_pair() -> impl Strategy<Value = (BTreeSet<Term>, BTreeSet<Term>)> {
    let names: Vec<&str> = ATOMS.iter().map(|(n, _)| *n).collect();
    (
        subsequence(names.clone(), 0..=names.len()),
        subsequence(names.clone(), 0..=names.len()),
    )
        .prop_map(|(small, extra)| {
            let k1: BTreeSet<Term> = small.iter().map(|n| atom(n)).collect();
            let k2 = k1
                .iter()
                .cloned()
                .chain(extra.iter().map(|n| atom(n)))
                .collect();
            (k1, k2)
        })
}

/// Runs one property over `cfg().cases` generated inputs.
fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    TestRunner::new(cfg())
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn generated_protocols_are_well_formed() -> Result<(), String> {
    check(protocol("P"), |x| {
        prop_assert_eq!(well_formed(&x), vec![]);
        Ok(())
    })
}

pub fn serialize_then_parse_is_identity() -> Result<(), String> {
    check(protocol("P"), |x| {
        let text = serialize_protocol(&x);
        let back = parse_protocol(&text).unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert_eq!(serialize_protocol(&back), text);
        Ok(())
    })
}

pub fn key_inverse_is_an_involution() -> Result<(), String> {
    check(prop_oneof![Just("pkB"), Just("prvB"), Just("Kab")], |k| {
        let k = atom(k);
        let once = key_inverse(&k, &pairs()).unwrap();
        prop_assert_eq!(key_inverse(&once, &pairs()).unwrap(), k);
        Ok(())
    })
}

pub fn dy_close_is_monotone_and_idempotent() -> Result<(), String> {
    check(
        (
            knowledge_pair(),
            prop::collection::vec(term(), 0..2),
            0usize..=2,
        ),
        |((s1, s2), extra, depth)| {
            let pool = ["A", "Na", "Kab", "pkB", "prvB"];
            let keep = |s: BTreeSet<Term>| -> BTreeSet<Term> {
                s.into_iter()
                    .filter(|t| pool.iter().any(|n| Term::atom(*n, AtomKind::Msg) == *t))
                    .collect()
            };
            let (mut s1, mut s2) = (keep(s1), keep(s2));
            s1.extend(extra.iter().cloned());
            s2.extend(extra.iter().cloned());
            let c1 = dy_close(&s1, depth, &pairs()).unwrap();
            let c2 = dy_close(&s2, depth, &pairs()).unwrap();
            prop_assert!(s1.is_subset(&c1));
            prop_assert!(c1.is_subset(&c2));
            prop_assert_eq!(dy_close(&c1, depth, &pairs()).unwrap(), c1);
            Ok(())
        },
    )
}

pub fn dy_close_agrees_with_derivation() -> Result<(), String> {
    check(
        (
            subsequence(vec!["A", "Na", "Kab", "pkB", "prvB", "M"], 0..=6),
            prop::collection::vec(term(), 0..2),
            term_upto(2),
            0usize..=1,
        ),
        |(seed, hidden, t, slack)| {
            let depth = (t.depth() + slack).min(2);
            let seed: BTreeSet<Term> = seed.iter().map(|n| atom(n)).chain(hidden).collect();
            let closed = dy_close(&seed, depth, &pairs()).unwrap();
            let ik = IntruderKnowledge::new(seed, &pairs());
            prop_assert_eq!(closed.contains(&t), ik.can_derive(&t, depth));
            Ok(())
        },
    )
}

pub fn canon_match_is_reflexive_and_symmetric() -> Result<(), String> {
    check((canonical(), canonical()), |(a, b)| {
        prop_assert!(canon_match(&a, &a));
        prop_assert_eq!(canon_match(&a, &b), canon_match(&b, &a));
        Ok(())
    })
}

pub fn more_knowledge_only_refines_unknowns() -> Result<(), String> {
    check((term(), knowledge_pair()), |(t, (k1, k2))| {
        let c1 = canon_term(&t, &k1, &types(), &pairs()).unwrap();
        let c2 = canon_term(&t, &k2, &types(), &pairs()).unwrap();
        prop_assert!(canon_accepts(&c1, &c2), "{} does not accept {}", c1, c2);
        Ok(())
    })
}

pub fn unknown_count_is_antitone_on_atom_tuples() -> Result<(), String> {
    check(
        (prop::collection::vec(leaf(), 1..6), knowledge_pair()),
        |(items, (k1, k2))| {
            let t = Term::tuple(items);
            let c1 = canon_term(&t, &k1, &types(), &pairs()).unwrap();
            let c2 = canon_term(&t, &k2, &types(), &pairs()).unwrap();
            prop_assert!(c2.unknown_count() <= c1.unknown_count());
            Ok(())
        },
    )
}

pub fn composition_accumulates_effects() -> Result<(), String> {
    check((protocol("P"), protocol("Q")), |(x1, x2)| {
        let r = pe_compose_protocols(&x1, &x2, &ctx());
        if !r.is_empty() {
            for v in &r.participants {
                let v1 = x1.participant(v.name()).unwrap();
                let v2 = x2.participant(v.name()).unwrap();
                prop_assert!(v.eff.is_superset(&v1.eff.union(&v2.eff).cloned().collect()));
            }
        }
        Ok(())
    })
}

pub fn chain_lengths_add_up() -> Result<(), String> {
    check((protocol("P"), protocol("Q")), |(x1, x2)| {
        for (v1, v2) in x1.participants.iter().zip(&x2.participants) {
            let v = pc_compose_participants(v1, v2, true).unwrap();
            prop_assert_eq!(v.chain.len(), v1.chain.len() + v2.chain.len());
        }
        let r = compose(&x1, &x2, &ctx());
        if !r.is_empty() {
            prop_assert_eq!(r.node_count(), x1.node_count() + x2.node_count());
        }
        Ok(())
    })
}

pub fn compose_preserves_well_formedness() -> Result<(), String> {
    check((protocol("P"), protocol("Q")), |(x1, x2)| {
        let r = compose(&x1, &x2, &ctx());
        prop_assert!(
            r.is_empty() || well_formed(&r).is_empty(),
            "{:?}",
            well_formed(&r)
        );
        Ok(())
    })
}

pub fn canon_match_is_not_transitive() -> Result<(), String> {
    let na = CanonicalTerm::Basic(BasicType::NA);
    let u = CanonicalTerm::Basic(BasicType::U);
    let k = CanonicalTerm::Basic(BasicType::K);
    assert!(canon_match(&na, &u));
    assert!(canon_match(&u, &k));
    assert!(!canon_match(&na, &k));
    Ok(())
}

pub fn pe_composition_is_not_commutative() -> Result<(), String> {
    // P needs a key exchange and authenticates B; Q only needs B authenticated.
    let p = ProtocolModel::new(
        "P",
        vec![
            participant(
                "A",
                vec![PrecEff::new(PredKind::KeyEx, atom("Kab"))],
                vec![PrecEff::new(PredKind::PartAuth, atom("B"))],
                &["Na"],
                vec![Node::send(atom("Na"))],
            ),
            participant("B", vec![], vec![], &[], vec![Node::recv(atom("Na"))]),
        ],
    );
    let q = ProtocolModel::new(
        "Q",
        vec![
            participant(
                "A",
                vec![PrecEff::new(PredKind::PartAuth, atom("B"))],
                vec![],
                &["M"],
                vec![Node::send(atom("M"))],
            ),
            participant("B", vec![], vec![], &[], vec![Node::recv(atom("M"))]),
        ],
    );
    assert!(!pe_compose_protocols(&p, &q, &ctx()).is_empty());
    assert!(pe_compose_protocols(&q, &p, &ctx()).is_empty());
    Ok(())
}

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    (
        "generated_protocols_are_well_formed",
        generated_protocols_are_well_formed,
    ),
    (
        "serialize_then_parse_is_identity",
        serialize_then_parse_is_identity,
    ),
    ("key_inverse_is_an_involution", key_inverse_is_an_involution),
    (
        "dy_close_is_monotone_and_idempotent",
        dy_close_is_monotone_and_idempotent,
    ),
    (
        "dy_close_agrees_with_derivation",
        dy_close_agrees_with_derivation,
    ),
    (
        "canon_match_is_reflexive_and_symmetric",
        canon_match_is_reflexive_and_symmetric,
    ),
    (
        "more_knowledge_only_refines_unknowns",
        more_knowledge_only_refines_unknowns,
    ),
    (
        "unknown_count_is_antitone_on_atom_tuples",
        unknown_count_is_antitone_on_atom_tuples,
    ),
    (
        "composition_accumulates_effects",
        composition_accumulates_effects,
    ),
    ("chain_lengths_add_up", chain_lengths_add_up),
    (
        "compose_preserves_well_formedness",
        compose_preserves_well_formedness,
    ),
    (
        "canon_match_is_not_transitive",
        canon_match_is_not_transitive,
    ),
    (
        "pe_composition_is_not_commutative",
        pe_composition_is_not_commutative,
    ),
];
