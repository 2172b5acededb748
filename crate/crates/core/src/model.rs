//! Participant and protocol models, the predicate vocabulary, contexts and
//! well-formedness checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{Atom, AtomKind, Chain, FuncName, KeyPairs, Sign, Sort, Term};

/// Precondition and effect predicate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredKind {
    /// A term that must exist before, or is generated by, the protocol.
    Term,
    /// A participant that must be, or is, authenticated.
    PartAuth,
    /// A term that must be, or is kept, confidential.
    Conf,
    Integ,
    NonRep,
    /// A key exchange yielding the subject term.
    KeyEx,
}

impl PredKind {
    pub const ALL: [PredKind; 6] = [
        PredKind::Term,
        PredKind::PartAuth,
        PredKind::Conf,
        PredKind::Integ,
        PredKind::NonRep,
        PredKind::KeyEx,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            PredKind::Term => "CON_TERM",
            PredKind::PartAuth => "CON_PARTAUTH",
            PredKind::Conf => "CON_CONF",
            PredKind::Integ => "CON_INTEG",
            PredKind::NonRep => "CON_NONREP",
            PredKind::KeyEx => "CON_KEYEX",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrecEff {
    pub kind: PredKind,
    pub subject: Term,
}

impl PrecEff {
    pub fn new(kind: PredKind, subject: Term) -> Self {
        PrecEff { kind, subject }
    }

    pub fn term(subject: Term) -> Self {
        Self::new(PredKind::Term, subject)
    }

    pub fn conf(subject: Term) -> Self {
        Self::new(PredKind::Conf, subject)
    }
}

impl fmt::Display for PrecEff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind.keyword(), self.subject)
    }
}

/// Type predicate kinds. `KDh` is the five-place Diffie-Hellman key
/// predicate; `NDh` is the unary Diffie-Hellman nonce predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeKind {
    Dn,
    Ud,
    Ip,
    U,
    Nt,
    NDh,
    Na,
    KDh,
    KSym,
    KPub,
    KPrv,
    Cert,
    Msg,
}

/// Kind of a positional argument after the subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    Number,
    Participant,
}

impl TypeKind {
    pub const ALL: [TypeKind; 13] = [
        TypeKind::Dn,
        TypeKind::Ud,
        TypeKind::Ip,
        TypeKind::U,
        TypeKind::Nt,
        TypeKind::NDh,
        TypeKind::Na,
        TypeKind::KDh,
        TypeKind::KSym,
        TypeKind::KPub,
        TypeKind::KPrv,
        TypeKind::Cert,
        TypeKind::Msg,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            TypeKind::Dn => "TYPE_DN",
            TypeKind::Ud => "TYPE_UD",
            TypeKind::Ip => "TYPE_IP",
            TypeKind::U => "TYPE_U",
            TypeKind::Nt => "TYPE_NT",
            TypeKind::NDh => "TYPE_NDH",
            TypeKind::Na => "TYPE_NA",
            TypeKind::KDh => "TYPE_KDH",
            TypeKind::KSym => "TYPE_KSYM",
            TypeKind::KPub => "TYPE_KPUB",
            TypeKind::KPrv => "TYPE_KPRV",
            TypeKind::Cert => "TYPE_CERT",
            TypeKind::Msg => "TYPE_MSG",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// The atom kind this predicate assigns to its subject.
    pub fn atom_kind(self) -> AtomKind {
        match self {
            TypeKind::Dn => AtomKind::Dn,
            TypeKind::Ud => AtomKind::Ud,
            TypeKind::Ip => AtomKind::Ip,
            TypeKind::U => AtomKind::User,
            TypeKind::Nt => AtomKind::Timestamp,
            TypeKind::NDh => AtomKind::DhNonce,
            TypeKind::Na => AtomKind::Nonce,
            TypeKind::KDh => AtomKind::DhKey,
            TypeKind::KSym => AtomKind::SymKey,
            TypeKind::KPub => AtomKind::PubKey,
            TypeKind::KPrv => AtomKind::PrvKey,
            TypeKind::Cert => AtomKind::Cert,
            TypeKind::Msg => AtomKind::Msg,
        }
    }

    pub fn params(self) -> &'static [ParamSlot] {
        use ParamSlot::*;
        match self {
            TypeKind::KDh => &[Number, Number, Participant, Participant],
            TypeKind::KSym => &[Participant, Participant],
            TypeKind::KPub | TypeKind::KPrv | TypeKind::Cert => &[Participant],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TypePredicate {
    pub kind: TypeKind,
    pub subject: Term,
    pub params: Vec<Term>,
}

impl TypePredicate {
    pub fn new(kind: TypeKind, subject: Term, params: Vec<Term>) -> Self {
        TypePredicate {
            kind,
            subject,
            params,
        }
    }

    /// Builds the predicate for an atom, with no extra arguments.
    pub fn of(kind: TypeKind, name: &str) -> Self {
        Self::new(kind, Term::atom(name, kind.atom_kind()), Vec::new())
    }

    pub fn subject_name(&self) -> Option<&str> {
        self.subject.as_atom().map(|a| a.name.as_str())
    }

    fn check(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let label = self.to_string();
        match &self.subject {
            Term::Atom(a) if a.kind == self.kind.atom_kind() => {}
            Term::Atom(a) => out.push(Violation::TypeKindMismatch {
                atom: a.name.clone(),
                predicate: label.clone(),
            }),
            _ => out.push(Violation::BadTypePredicate {
                predicate: label.clone(),
                reason: "subject must be an atom".into(),
            }),
        }
        let slots = self.kind.params();
        if slots.len() != self.params.len() {
            out.push(Violation::BadTypePredicate {
                predicate: label,
                reason: format!(
                    "expected {} arguments, found {}",
                    slots.len() + 1,
                    self.params.len() + 1
                ),
            });
            return out;
        }
        for (slot, arg) in slots.iter().zip(&self.params) {
            let ok = match (slot, arg) {
                (ParamSlot::Participant, Term::Atom(a)) => a.sort() == Sort::Participant,
                (ParamSlot::Number, Term::Atom(a)) => a.sort() == Sort::Nonce,
                _ => false,
            };
            if !ok {
                out.push(Violation::BadTypePredicate {
                    predicate: label.clone(),
                    reason: format!("argument `{arg}` has the wrong sort"),
                });
            }
        }
        out
    }
}

impl fmt::Display for TypePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.kind.keyword(), self.subject)?;
        for p in &self.params {
            write!(f, ", {p}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantModel {
    pub prec: BTreeSet<PrecEff>,
    pub eff: BTreeSet<PrecEff>,
    pub types: BTreeSet<TypePredicate>,
    pub gen: BTreeSet<Term>,
    /// `None` only for the empty participant model.
    pub part: Option<Atom>,
    pub chain: Chain,
}

impl ParticipantModel {
    pub fn new(name: &str) -> Self {
        ParticipantModel {
            part: Some(Atom::new(name, AtomKind::User)),
            ..Default::default()
        }
    }

    /// The empty participant model, the failure value of participant
    /// composition.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn name(&self) -> &str {
        self.part.as_ref().map(|a| a.name.as_str()).unwrap_or("")
    }

    /// Name-keyed view of the declared types.
    pub fn type_index(&self) -> BTreeMap<&str, Vec<&TypePredicate>> {
        let mut out: BTreeMap<&str, Vec<&TypePredicate>> = BTreeMap::new();
        for t in &self.types {
            if let Some(n) = t.subject_name() {
                out.entry(n).or_default().push(t);
            }
        }
        out
    }
}

/// Name of the pseudo-participant that carries context knowledge through
/// sequence composition. It never takes part in name pairing.
pub const ENV_PARTICIPANT: &str = "ENV";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolModel {
    pub name: String,
    pub participants: Vec<ParticipantModel>,
    pub keypairs: KeyPairs,
}

impl ProtocolModel {
    pub fn new(name: impl Into<String>, participants: Vec<ParticipantModel>) -> Self {
        ProtocolModel {
            name: name.into(),
            participants,
            keypairs: KeyPairs::new(),
        }
    }

    /// The empty protocol model, the failure value of protocol composition.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn participant(&self, name: &str) -> Option<&ParticipantModel> {
        self.participants.iter().find(|p| p.name() == name)
    }

    pub fn node_count(&self) -> usize {
        self.participants.iter().map(|p| p.chain.len()).sum()
    }

    /// Name-to-kind map over all declared type predicates.
    pub fn atom_kinds(&self) -> BTreeMap<String, AtomKind> {
        let mut out = BTreeMap::new();
        for p in &self.participants {
            for t in &p.types {
                if let Some(a) = t.subject.as_atom() {
                    out.entry(a.name.clone()).or_insert(a.kind);
                }
            }
        }
        out
    }
}

/// Initial knowledge shared by all participants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub terms: BTreeSet<Term>,
    pub types: BTreeSet<TypePredicate>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn union(&self, other: &Context) -> Context {
        Context {
            terms: self.terms.union(&other.terms).cloned().collect(),
            types: self.types.union(&other.types).cloned().collect(),
        }
    }

    /// Checks that every atom in the terms has exactly one covering type.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = self.types.iter().flat_map(TypePredicate::check).collect();
        let atoms: BTreeSet<Atom> = self.terms.iter().flat_map(Term::atoms).collect();
        coverage(None, &atoms, &self.types, &mut out);
        out.sort();
        out.dedup();
        out
    }
}

/// One well-formedness failure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Violation {
    UnmatchedPositiveNode {
        participant: String,
        index: usize,
        term: String,
    },
    UnmatchedNegativeNode {
        participant: String,
        index: usize,
        term: String,
    },
    UntypedAtom {
        participant: Option<String>,
        atom: String,
    },
    AmbiguousType {
        participant: Option<String>,
        atom: String,
    },
    TypeKindMismatch {
        atom: String,
        predicate: String,
    },
    BadTypePredicate {
        predicate: String,
        reason: String,
    },
    BadPredicate {
        participant: String,
        predicate: String,
        reason: String,
    },
    DuplicateParticipant(String),
    MissingParticipantName,
    EmptyChain(String),
    GeneratedTermNotSent {
        participant: String,
        term: String,
    },
    MalformedNode {
        participant: String,
        index: usize,
        reason: String,
    },
    KeyPairMismatch {
        key: String,
        reason: String,
    },
    UnpairedAsymmetricKey {
        participant: String,
        key: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnmatchedPositiveNode {
                participant,
                index,
                term,
            } => write!(
                f,
                "{participant}[{index}]: sent term `{term}` is never received"
            ),
            Violation::UnmatchedNegativeNode {
                participant,
                index,
                term,
            } => write!(
                f,
                "{participant}[{index}]: received term `{term}` is never sent"
            ),
            Violation::UntypedAtom { participant, atom } => match participant {
                Some(p) => write!(f, "{p}: atom `{atom}` has no type predicate"),
                None => write!(f, "atom `{atom}` has no type predicate"),
            },
            Violation::AmbiguousType { participant, atom } => match participant {
                Some(p) => write!(f, "{p}: atom `{atom}` has more than one type predicate"),
                None => write!(f, "atom `{atom}` has more than one type predicate"),
            },
            Violation::TypeKindMismatch { atom, predicate } => {
                write!(f, "atom `{atom}` does not agree with `{predicate}`")
            }
            Violation::BadTypePredicate { predicate, reason } => {
                write!(f, "`{predicate}`: {reason}")
            }
            Violation::BadPredicate {
                participant,
                predicate,
                reason,
            } => write!(f, "{participant}: `{predicate}`: {reason}"),
            Violation::DuplicateParticipant(n) => write!(f, "participant `{n}` declared twice"),
            Violation::MissingParticipantName => f.write_str("participant without a name"),
            Violation::EmptyChain(n) => write!(f, "participant `{n}` has an empty chain"),
            Violation::GeneratedTermNotSent { participant, term } => {
                write!(
                    f,
                    "{participant}: generated `{term}` never appears in a sent node"
                )
            }
            Violation::MalformedNode {
                participant,
                index,
                reason,
            } => write!(f, "{participant}[{index}]: {reason}"),
            Violation::KeyPairMismatch { key, reason } => write!(f, "key pair `{key}`: {reason}"),
            Violation::UnpairedAsymmetricKey { participant, key } => {
                write!(
                    f,
                    "{participant}: asymmetric key `{key}` has no declared partner"
                )
            }
        }
    }
}

fn coverage(
    participant: Option<&str>,
    atoms: &BTreeSet<Atom>,
    types: &BTreeSet<TypePredicate>,
    out: &mut Vec<Violation>,
) {
    for atom in atoms {
        let covering: Vec<&TypePredicate> = types
            .iter()
            .filter(|t| t.subject_name() == Some(atom.name.as_str()))
            .collect();
        match covering.as_slice() {
            [] => out.push(Violation::UntypedAtom {
                participant: participant.map(str::to_owned),
                atom: atom.name.clone(),
            }),
            [t] if t.kind.atom_kind() != atom.kind => out.push(Violation::TypeKindMismatch {
                atom: atom.name.clone(),
                predicate: t.to_string(),
            }),
            [_] => {}
            _ => out.push(Violation::AmbiguousType {
                participant: participant.map(str::to_owned),
                atom: atom.name.clone(),
            }),
        }
    }
}

fn check_participant(p: &ParticipantModel, keypairs: &KeyPairs, out: &mut Vec<Violation>) {
    let name = p.name().to_owned();
    let is_env = name == ENV_PARTICIPANT;
    if p.chain.is_empty() && !is_env {
        out.push(Violation::EmptyChain(name.clone()));
    }
    for pred in p.prec.iter().chain(&p.eff) {
        let reason = match (&pred.kind, &pred.subject) {
            (_, Term::Empty) => Some("subject is empty"),
            (PredKind::PartAuth, Term::Atom(a)) if a.sort() == Sort::Participant => None,
            (PredKind::PartAuth, _) => Some("subject must be a participant"),
            _ => None,
        };
        if let Some(reason) = reason {
            out.push(Violation::BadPredicate {
                participant: name.clone(),
                predicate: pred.to_string(),
                reason: reason.into(),
            });
        }
    }
    out.extend(p.types.iter().flat_map(TypePredicate::check));

    for (index, node) in p.chain.nodes().iter().enumerate() {
        let reason = if node.term.is_empty() {
            Some("node payload is empty".to_owned())
        } else {
            node.term.check_structure().err().map(|e| e.to_string())
        };
        if let Some(reason) = reason {
            out.push(Violation::MalformedNode {
                participant: name.clone(),
                index,
                reason,
            });
        }
        for e in node.term.encrypted_subterms() {
            if let Term::Enc {
                func: FuncName::Pk,
                key,
                ..
            } = &e
            {
                if let Term::Atom(k) = key.as_ref() {
                    let paired = match k.kind {
                        AtomKind::PubKey => keypairs.private_of(&k.name).is_some(),
                        AtomKind::PrvKey => keypairs.public_of(&k.name).is_some(),
                        _ => true,
                    };
                    if !paired {
                        out.push(Violation::UnpairedAsymmetricKey {
                            participant: name.clone(),
                            key: k.name.clone(),
                        });
                    }
                }
            }
        }
    }

    coverage(Some(&name), &p.chain.atoms(), &p.types, out);

    let sent: BTreeSet<Atom> = p
        .chain
        .nodes()
        .iter()
        .filter(|n| n.sign == Sign::Send)
        .flat_map(|n| n.term.atoms())
        .collect();
    for g in &p.gen {
        let ok = match g {
            Term::Atom(a) => sent.contains(a),
            _ => false,
        };
        if !ok {
            out.push(Violation::GeneratedTermNotSent {
                participant: name.clone(),
                term: g.to_string(),
            });
        }
    }
}

/// Checks every protocol-model invariant and returns the failures, sorted.
/// An empty list means the model is well formed.
pub fn well_formed(p: &ProtocolModel) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for part in &p.participants {
        if part.part.is_none() {
            out.push(Violation::MissingParticipantName);
        } else if !seen.insert(part.name()) {
            out.push(Violation::DuplicateParticipant(part.name().to_owned()));
        }
        check_participant(part, &p.keypairs, &mut out);
    }

    // Sent and received payloads must pair up one-to-one. When the counts
    // for a term disagree every node on the larger side is reported.
    type Sites<'a> = Vec<(&'a str, usize)>;
    let mut by_term: BTreeMap<&Term, (Sites, Sites)> = BTreeMap::new();
    for part in &p.participants {
        for (i, node) in part.chain.nodes().iter().enumerate() {
            let entry = by_term.entry(&node.term).or_default();
            match node.sign {
                Sign::Send => entry.0.push((part.name(), i)),
                Sign::Recv => entry.1.push((part.name(), i)),
            }
        }
    }
    for (term, (pos, neg)) in by_term {
        if pos.len() > neg.len() {
            out.extend(pos.iter().map(|(n, i)| Violation::UnmatchedPositiveNode {
                participant: n.to_string(),
                index: *i,
                term: term.to_string(),
            }));
        } else if neg.len() > pos.len() {
            out.extend(neg.iter().map(|(n, i)| Violation::UnmatchedNegativeNode {
                participant: n.to_string(),
                index: *i,
                term: term.to_string(),
            }));
        }
    }

    let mut kinds: BTreeMap<String, AtomKind> = BTreeMap::new();
    for part in &p.participants {
        let typed = part
            .types
            .iter()
            .filter_map(|t| t.subject.as_atom().cloned());
        for a in part.chain.atoms().into_iter().chain(typed) {
            kinds.entry(a.name).or_insert(a.kind);
        }
    }
    for (public, private) in p.keypairs.iter() {
        if public == private {
            out.push(Violation::KeyPairMismatch {
                key: public.to_owned(),
                reason: "a key cannot be its own partner".into(),
            });
        }
        for (name, want) in [(public, AtomKind::PubKey), (private, AtomKind::PrvKey)] {
            if let Some(kind) = kinds.get(name) {
                if *kind != want {
                    out.push(Violation::KeyPairMismatch {
                        key: name.to_owned(),
                        reason: format!("declared in a key pair but typed as {kind:?}"),
                    });
                }
            }
        }
    }

    out.sort();
    out.dedup();
    out
}

/// The terms a participant holds before running: what it generates, the
/// shared context, the subjects of its `CON_TERM` preconditions and its own
/// name.
pub fn knowledge_of(v: &ParticipantModel, ctx: &Context) -> BTreeSet<Term> {
    let mut out: BTreeSet<Term> = v.gen.iter().cloned().collect();
    out.extend(ctx.terms.iter().cloned());
    out.extend(
        v.prec
            .iter()
            .filter(|p| p.kind == PredKind::Term)
            .map(|p| p.subject.clone()),
    );
    if let Some(part) = &v.part {
        out.insert(Term::Atom(part.clone()));
    }
    out
}
