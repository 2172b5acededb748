//! Type-level abstraction of protocol messages and the independence checks
//! built on it.
//!
//! Every atom a participant can validate is replaced by its basic type and
//! every component it cannot validate becomes the unknown type `u`. Two
//! protocols are canonically independent when no encrypted component sent in
//! one of them has the shape of an encrypted component expected in the other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    knowledge_of, Context, ParticipantModel, ProtocolModel, TypeKind, TypePredicate,
};
use crate::pe::{composed_name, merge_env, pair_participants, part_nondestr, NameMismatch};
use crate::term::{analyze, can_decrypt, FuncName, KeyPairs, Sign, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BasicType {
    PDn,
    PUd,
    PIp,
    PU,
    NT,
    NDh,
    NA,
    K,
    M,
    C,
    /// A component the holder cannot validate.
    U,
}

impl BasicType {
    pub const ALL: [BasicType; 11] = [
        BasicType::PDn,
        BasicType::PUd,
        BasicType::PIp,
        BasicType::PU,
        BasicType::NT,
        BasicType::NDh,
        BasicType::NA,
        BasicType::K,
        BasicType::M,
        BasicType::C,
        BasicType::U,
    ];

    pub fn of(kind: TypeKind) -> BasicType {
        match kind {
            TypeKind::Dn => BasicType::PDn,
            TypeKind::Ud => BasicType::PUd,
            TypeKind::Ip => BasicType::PIp,
            TypeKind::U => BasicType::PU,
            TypeKind::Nt => BasicType::NT,
            TypeKind::NDh => BasicType::NDh,
            TypeKind::Na => BasicType::NA,
            TypeKind::KDh | TypeKind::KSym | TypeKind::KPub | TypeKind::KPrv => BasicType::K,
            TypeKind::Cert => BasicType::C,
            TypeKind::Msg => BasicType::M,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BasicType::PDn => "p_DN",
            BasicType::PUd => "p_UD",
            BasicType::PIp => "p_IP",
            BasicType::PU => "p_U",
            BasicType::NT => "n_T",
            BasicType::NDh => "n_DH",
            BasicType::NA => "n_A",
            BasicType::K => "K",
            BasicType::M => "m",
            BasicType::C => "c",
            BasicType::U => "u",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CanonicalTerm {
    Empty,
    Basic(BasicType),
    Pair(Box<CanonicalTerm>, Box<CanonicalTerm>),
    Enc {
        body: Box<CanonicalTerm>,
        func: FuncName,
        key: Box<CanonicalTerm>,
    },
}

impl CanonicalTerm {
    pub const UNKNOWN: CanonicalTerm = CanonicalTerm::Basic(BasicType::U);

    pub fn pair(l: CanonicalTerm, r: CanonicalTerm) -> Self {
        CanonicalTerm::Pair(Box::new(l), Box::new(r))
    }

    pub fn enc(body: CanonicalTerm, func: FuncName, key: CanonicalTerm) -> Self {
        CanonicalTerm::Enc {
            body: Box::new(body),
            func,
            key: Box::new(key),
        }
    }

    pub fn is_unknown(&self) -> bool {
        *self == Self::UNKNOWN
    }

    fn flatten_tuple(&self) -> Vec<&CanonicalTerm> {
        let mut out = Vec::new();
        let mut cur = self;
        while let CanonicalTerm::Pair(l, r) = cur {
            out.push(l.as_ref());
            cur = r;
        }
        out.push(cur);
        out
    }

    pub fn encrypted_subterms(&self) -> Vec<&CanonicalTerm> {
        let mut out = Vec::new();
        self.collect_encrypted(&mut out);
        out
    }

    fn collect_encrypted<'a>(&'a self, out: &mut Vec<&'a CanonicalTerm>) {
        match self {
            CanonicalTerm::Empty | CanonicalTerm::Basic(_) => {}
            CanonicalTerm::Pair(l, r) => {
                l.collect_encrypted(out);
                r.collect_encrypted(out);
            }
            CanonicalTerm::Enc { body, key, .. } => {
                out.push(self);
                body.collect_encrypted(out);
                key.collect_encrypted(out);
            }
        }
    }

    /// Number of `u` leaves.
    pub fn unknown_count(&self) -> usize {
        match self {
            CanonicalTerm::Empty => 0,
            CanonicalTerm::Basic(b) => usize::from(*b == BasicType::U),
            CanonicalTerm::Pair(l, r) => l.unknown_count() + r.unknown_count(),
            CanonicalTerm::Enc { body, key, .. } => body.unknown_count() + key.unknown_count(),
        }
    }
}

impl fmt::Display for CanonicalTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items = |f: &mut fmt::Formatter<'_>, items: Vec<&CanonicalTerm>| {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{item}")?;
            }
            Ok(())
        };
        match self {
            CanonicalTerm::Empty => f.write_str("."),
            CanonicalTerm::Basic(b) => f.write_str(b.symbol()),
            CanonicalTerm::Pair(..) => {
                f.write_str("(")?;
                items(f, self.flatten_tuple())?;
                f.write_str(")")
            }
            CanonicalTerm::Enc { body, func, key } => {
                f.write_str("{")?;
                items(f, body.flatten_tuple())?;
                write!(f, "}}{func}({key})")
            }
        }
    }
}

/// Structural equality where `u` on either side matches anything.
/// Reflexive and symmetric, but not transitive.
pub fn canon_match(c1: &CanonicalTerm, c2: &CanonicalTerm) -> bool {
    use CanonicalTerm::*;
    match (c1, c2) {
        (Basic(BasicType::U), _) | (_, Basic(BasicType::U)) => true,
        (Empty, Empty) => true,
        (Basic(a), Basic(b)) => a == b,
        (Pair(l1, r1), Pair(l2, r2)) => canon_match(l1, l2) && canon_match(r1, r2),
        (
            Enc {
                body: b1,
                func: f1,
                key: k1,
            },
            Enc {
                body: b2,
                func: f2,
                key: k2,
            },
        ) => f1 == f2 && canon_match(b1, b2) && canon_match(k1, k2),
        _ => false,
    }
}

/// One-sided matching: `u` in `pattern` matches anything, but `u` in
/// `actual` only matches `u`. A receiver whose expectation is `pattern`
/// accepts a message it sees as `actual`.
pub fn canon_accepts(pattern: &CanonicalTerm, actual: &CanonicalTerm) -> bool {
    use CanonicalTerm::*;
    match (pattern, actual) {
        (Basic(BasicType::U), _) => true,
        (Empty, Empty) => true,
        (Basic(a), Basic(b)) => a == b,
        (Pair(l1, r1), Pair(l2, r2)) => canon_accepts(l1, l2) && canon_accepts(r1, r2),
        (
            Enc {
                body: b1,
                func: f1,
                key: k1,
            },
            Enc {
                body: b2,
                func: f2,
                key: k2,
            },
        ) => f1 == f2 && canon_accepts(b1, b2) && canon_accepts(k1, k2),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("atom `{0}` is known but has no type predicate")]
    UntypedAtom(String),
}

/// Name-to-type lookup. Earlier sources take precedence.
#[derive(Debug, Clone, Default)]
pub struct TypeIndex(BTreeMap<String, TypeKind>);

impl TypeIndex {
    pub fn new<'t>(sources: impl IntoIterator<Item = &'t TypePredicate>) -> Self {
        let mut map = BTreeMap::new();
        for t in sources {
            if let Some(n) = t.subject_name() {
                map.entry(n.to_owned()).or_insert(t.kind);
            }
        }
        TypeIndex(map)
    }

    pub fn get(&self, name: &str) -> Option<TypeKind> {
        self.0.get(name).copied()
    }
}

/// Canonicalizes with separate sets for validating atoms and for opening
/// encryptions: a receiver may open a ciphertext with a key found in the
/// same message without being able to vouch for that key's value.
pub(crate) fn canon_view(
    t: &Term,
    validate: &BTreeSet<Term>,
    decrypt: &BTreeSet<Term>,
    types: &TypeIndex,
    pairs: &KeyPairs,
) -> Result<CanonicalTerm, CanonError> {
    let rec = |t: &Term| canon_view(t, validate, decrypt, types, pairs);
    Ok(match t {
        Term::Empty => CanonicalTerm::Empty,
        Term::Atom(a) => {
            if validate.contains(t) {
                let kind = types
                    .get(&a.name)
                    .ok_or_else(|| CanonError::UntypedAtom(a.name.clone()))?;
                CanonicalTerm::Basic(BasicType::of(kind))
            } else {
                CanonicalTerm::UNKNOWN
            }
        }
        Term::Pair(l, r) => CanonicalTerm::pair(rec(l)?, rec(r)?),
        Term::Enc { body, func, key } => {
            let body_known = || {
                body.atoms()
                    .iter()
                    .all(|a| validate.contains(&Term::Atom(a.clone())))
            };
            // A public-key encryption whose contents and key are all known can
            // be checked by recomputing it.
            let open = match func {
                FuncName::Sk => can_decrypt(*func, key, decrypt, pairs),
                FuncName::Pk => {
                    can_decrypt(*func, key, decrypt, pairs)
                        || (validate.contains(key.as_ref()) && body_known())
                }
                FuncName::H => body_known(),
                FuncName::Hmac => body_known() && validate.contains(key.as_ref()),
            };
            if open {
                CanonicalTerm::enc(rec(body)?, *func, rec(key)?)
            } else {
                CanonicalTerm::UNKNOWN
            }
        }
    })
}

/// Canonical form of `t` for a holder of `knowledge`. Known atoms map to the
/// basic type of their type predicate, everything else the holder cannot
/// validate or open maps to `u`.
pub fn canon_term(
    t: &Term,
    knowledge: &BTreeSet<Term>,
    types: &BTreeSet<TypePredicate>,
    pairs: &KeyPairs,
) -> Result<CanonicalTerm, CanonError> {
    canon_view(t, knowledge, knowledge, &TypeIndex::new(types), pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalNode {
    pub sign: Sign,
    pub term: CanonicalTerm,
}

impl fmt::Display for CanonicalNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.sign, self.term)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classifier {
    /// The participant's own processing chain.
    ClP,
    /// Received terms as the receiver can check them on arrival.
    ClV,
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classifier::ClP => "CL_P",
            Classifier::ClV => "CL_V",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassifiedChain {
    pub classifier: Classifier,
    pub nodes: Vec<CanonicalNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalParticipantModel {
    pub part: String,
    pub processing: ClassifiedChain,
    pub received: ClassifiedChain,
}

impl CanonicalParticipantModel {
    pub fn chains(&self) -> [&ClassifiedChain; 2] {
        [&self.processing, &self.received]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalProtocolModel {
    pub name: String,
    pub participants: Vec<CanonicalParticipantModel>,
}

impl fmt::Display for CanonicalProtocolModel {
    /// One line per node: `CL_P A + (p_U, {n_A}sk(K))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.participants {
            for chain in p.chains() {
                for node in &chain.nodes {
                    writeln!(f, "{} {} {}", chain.classifier, p.part, node)?;
                }
            }
        }
        Ok(())
    }
}

fn canonicalize_participant(
    v: &ParticipantModel,
    ctx: &Context,
    pairs: &KeyPairs,
) -> Result<CanonicalParticipantModel, CanonError> {
    let types = TypeIndex::new(v.types.iter().chain(&ctx.types));
    let mut known = analyze(knowledge_of(v, ctx), pairs);
    let mut cl_p = Vec::with_capacity(v.chain.len());
    let mut cl_v = Vec::with_capacity(v.chain.len());
    for node in v.chain.nodes() {
        match node.sign {
            Sign::Send => {
                let c = canon_view(&node.term, &known, &known, &types, pairs)?;
                cl_p.push(CanonicalNode {
                    sign: Sign::Send,
                    term: c.clone(),
                });
                cl_v.push(CanonicalNode {
                    sign: Sign::Send,
                    term: c,
                });
            }
            Sign::Recv => {
                let after = analyze(known.iter().cloned().chain([node.term.clone()]), pairs);
                cl_v.push(CanonicalNode {
                    sign: Sign::Recv,
                    term: canon_view(&node.term, &known, &after, &types, pairs)?,
                });
                cl_p.push(CanonicalNode {
                    sign: Sign::Recv,
                    term: canon_view(&node.term, &after, &after, &types, pairs)?,
                });
                known = after;
            }
        }
    }
    Ok(CanonicalParticipantModel {
        part: v.name().to_owned(),
        processing: ClassifiedChain {
            classifier: Classifier::ClP,
            nodes: cl_p,
        },
        received: ClassifiedChain {
            classifier: Classifier::ClV,
            nodes: cl_v,
        },
    })
}

/// Builds the canonical model of a protocol. Knowledge grows message by
/// message: a receiver validates atoms it already held before the message
/// arrived and learns everything it can open afterwards.
pub fn canonicalize(
    x: &ProtocolModel,
    ctx: &Context,
) -> Result<CanonicalProtocolModel, CanonError> {
    Ok(CanonicalProtocolModel {
        name: x.name.clone(),
        participants: x
            .participants
            .iter()
            .map(|v| canonicalize_participant(v, ctx, &x.keypairs))
            .collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NodeRef {
    pub protocol: String,
    pub participant: String,
    pub index: usize,
    pub subterm: String,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}[{}] {}",
            self.protocol, self.participant, self.index, self.subterm
        )
    }
}

/// A sent encrypted component of one protocol that fits an encrypted
/// component expected by the other.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IndependenceWitness {
    pub source: NodeRef,
    pub target: NodeRef,
}

impl fmt::Display for IndependenceWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.target)
    }
}

fn witnesses_from(
    from: &CanonicalProtocolModel,
    into: &CanonicalProtocolModel,
    out: &mut Vec<IndependenceWitness>,
) {
    for sender in &from.participants {
        for (i, p) in sender.processing.nodes.iter().enumerate() {
            if p.sign != Sign::Send {
                continue;
            }
            let sent = p.term.encrypted_subterms();
            if sent.is_empty() {
                continue;
            }
            for receiver in &into.participants {
                for (j, n) in receiver.received.nodes.iter().enumerate() {
                    if n.sign != Sign::Recv {
                        continue;
                    }
                    for e_n in n.term.encrypted_subterms() {
                        for e_p in &sent {
                            if canon_match(e_p, e_n) {
                                out.push(IndependenceWitness {
                                    source: NodeRef {
                                        protocol: from.name.clone(),
                                        participant: sender.part.clone(),
                                        index: i,
                                        subterm: e_p.to_string(),
                                    },
                                    target: NodeRef {
                                        protocol: into.name.clone(),
                                        participant: receiver.part.clone(),
                                        index: j,
                                        subterm: e_n.to_string(),
                                    },
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Checks, in both directions, that no encrypted component sent in one
/// protocol matches an encrypted component received in the other. Returns
/// the verdict and every matching pair found.
pub fn canonical_independent(
    c1: &CanonicalProtocolModel,
    c2: &CanonicalProtocolModel,
) -> (bool, Vec<IndependenceWitness>) {
    let mut out = Vec::new();
    witnesses_from(c1, c2, &mut out);
    witnesses_from(c2, c1, &mut out);
    out.sort();
    out.dedup();
    (out.is_empty(), out)
}

/// Both directions of confidentiality preservation for every same-name
/// participant pair.
pub fn instance_independent(x1: &ProtocolModel, x2: &ProtocolModel) -> bool {
    pair_participants(x1, x2)
        .into_iter()
        .all(|pair| match pair {
            (Some(v1), Some(v2)) => {
                part_nondestr(&v1.eff, &v2.prec, &v2.eff)
                    && part_nondestr(&v2.eff, &v1.prec, &v1.eff)
            }
            _ => true,
        })
}

/// Chain concatenation for same-name participants, guarded by the
/// independence verdict of the enclosing protocols.
pub fn pc_compose_participants(
    v1: &ParticipantModel,
    v2: &ParticipantModel,
    independent: bool,
) -> Result<ParticipantModel, NameMismatch> {
    if v1.name() != v2.name() {
        return Err(NameMismatch(v1.name().to_owned(), v2.name().to_owned()));
    }
    if !independent {
        return Ok(ParticipantModel::empty());
    }
    Ok(ParticipantModel {
        prec: v1.prec.union(&v2.prec).cloned().collect(),
        eff: v1.eff.union(&v2.eff).cloned().collect(),
        types: v1.types.union(&v2.types).cloned().collect(),
        gen: v1.gen.union(&v2.gen).cloned().collect(),
        part: v1.part.clone(),
        chain: v1.chain.concat(&v2.chain),
    })
}

/// Outcome of the independence guard for a protocol pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Independence {
    pub instance: bool,
    pub canonical: bool,
    pub witnesses: Vec<IndependenceWitness>,
}

impl Independence {
    pub fn holds(&self) -> bool {
        self.instance && self.canonical
    }
}

pub fn independence(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
) -> Result<Independence, CanonError> {
    let (canonical, witnesses) =
        canonical_independent(&canonicalize(x1, ctx)?, &canonicalize(x2, ctx)?);
    Ok(Independence {
        instance: instance_independent(x1, x2),
        canonical,
        witnesses,
    })
}

pub(crate) fn pc_merge(x1: &ProtocolModel, x2: &ProtocolModel, independent: bool) -> ProtocolModel {
    if !independent || x1.is_empty() || x2.is_empty() {
        return ProtocolModel::empty();
    }
    let participants = pair_participants(x1, x2)
        .into_iter()
        .map(|pair| match pair {
            (Some(v1), Some(v2)) => pc_compose_participants(v1, v2, true).expect("paired by name"),
            (Some(v1), None) => match x2.participant(v1.name()) {
                Some(v2) => merge_env(v1, v2),
                None => v1.clone(),
            },
            (None, Some(v)) => v.clone(),
            (None, None) => unreachable!(),
        })
        .collect();
    ProtocolModel {
        name: composed_name(x1, x2),
        participants,
        keypairs: x1.keypairs.merge(&x2.keypairs),
    }
}

/// Chain composition of two protocols; the empty protocol model when they
/// are not independent.
pub fn pc_compose_protocols(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
) -> Result<ProtocolModel, CanonError> {
    let guard = independence(x1, x2, ctx)?;
    Ok(pc_merge(x1, x2, guard.holds()))
}
