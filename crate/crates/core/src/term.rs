//! Symbolic message terms, signed nodes and participant chains.
//!
//! Terms are purely symbolic: atoms stand for names, nonces, keys,
//! certificates and opaque message components. Encryption, signing and
//! hashing are all represented by a single [`Term::Enc`] constructor tagged
//! with a [`FuncName`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Top-level sort of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sort {
    Participant,
    Nonce,
    Key,
    Certificate,
    Message,
}

/// Refined sort of an atom. Every kind belongs to exactly one [`Sort`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AtomKind {
    /// Distinguished name.
    Dn,
    /// User-domain name.
    Ud,
    /// User-ip name.
    Ip,
    /// Any other participant name.
    User,
    /// Timestamp.
    Timestamp,
    /// Diffie-Hellman random number.
    DhNonce,
    /// Any other random number.
    Nonce,
    SymKey,
    DhKey,
    PubKey,
    PrvKey,
    Cert,
    Msg,
}

impl AtomKind {
    pub const ALL: [AtomKind; 13] = [
        AtomKind::Dn,
        AtomKind::Ud,
        AtomKind::Ip,
        AtomKind::User,
        AtomKind::Timestamp,
        AtomKind::DhNonce,
        AtomKind::Nonce,
        AtomKind::SymKey,
        AtomKind::DhKey,
        AtomKind::PubKey,
        AtomKind::PrvKey,
        AtomKind::Cert,
        AtomKind::Msg,
    ];

    pub fn sort(self) -> Sort {
        match self {
            AtomKind::Dn | AtomKind::Ud | AtomKind::Ip | AtomKind::User => Sort::Participant,
            AtomKind::Timestamp | AtomKind::DhNonce | AtomKind::Nonce => Sort::Nonce,
            AtomKind::SymKey | AtomKind::DhKey | AtomKind::PubKey | AtomKind::PrvKey => Sort::Key,
            AtomKind::Cert => Sort::Certificate,
            AtomKind::Msg => Sort::Message,
        }
    }

    pub fn is_key(self) -> bool {
        self.sort() == Sort::Key
    }
}

/// Function names used to build cryptographic terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuncName {
    /// Symmetric encryption.
    Sk,
    /// Asymmetric encryption (or signing, with a private key).
    Pk,
    /// Hash. The key slot is always [`Term::Empty`].
    H,
    /// Keyed hash.
    Hmac,
}

impl FuncName {
    pub const ALL: [FuncName; 4] = [FuncName::Sk, FuncName::Pk, FuncName::H, FuncName::Hmac];

    pub fn as_str(self) -> &'static str {
        match self {
            FuncName::Sk => "sk",
            FuncName::Pk => "pk",
            FuncName::H => "h",
            FuncName::Hmac => "hmac",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sk" => Some(FuncName::Sk),
            "pk" => Some(FuncName::Pk),
            "h" => Some(FuncName::H),
            "hmac" => Some(FuncName::Hmac),
            _ => None,
        }
    }

    pub fn is_hash(self) -> bool {
        matches!(self, FuncName::H | FuncName::Hmac)
    }
}

impl fmt::Display for FuncName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named atom together with its refined sort. Atoms are identified by
/// name alone; the kind is resolved from type declarations and two atoms
/// with the same name are the same atom whatever their kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub kind: AtomKind,
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for Atom {}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name.cmp(&other.name)
    }
}

impl std::hash::Hash for Atom {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state);
    }
}

impl Atom {
    pub fn new(name: impl Into<String>, kind: AtomKind) -> Self {
        Atom {
            name: name.into(),
            kind,
        }
    }

    pub fn sort(&self) -> Sort {
        self.kind.sort()
    }
}

/// Returns true if `s` is a valid identifier: `[A-Za-z][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    /// The empty term `.`.
    Empty,
    Atom(Atom),
    Pair(Box<Term>, Box<Term>),
    Enc {
        body: Box<Term>,
        func: FuncName,
        key: Box<Term>,
    },
}

impl Term {
    pub fn atom(name: impl Into<String>, kind: AtomKind) -> Term {
        Term::Atom(Atom::new(name, kind))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Box::new(left), Box::new(right))
    }

    /// Builds a right-nested pair from a flat list: `[a, b, c]` becomes
    /// `(a, (b, c))`. A singleton list yields its element and an empty list
    /// yields [`Term::Empty`].
    pub fn tuple(items: Vec<Term>) -> Term {
        let mut iter = items.into_iter().rev();
        let Some(mut acc) = iter.next() else {
            return Term::Empty;
        };
        for item in iter {
            acc = Term::pair(item, acc);
        }
        acc
    }

    pub fn enc(body: Term, func: FuncName, key: Term) -> Term {
        Term::Enc {
            body: Box::new(body),
            func,
            key: Box::new(key),
        }
    }

    pub fn hash(body: Term) -> Term {
        Term::enc(body, FuncName::H, Term::Empty)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Term::Empty)
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Flattens the right spine of nested pairs. Left components are kept
    /// intact, so `((a, b), c)` flattens to `[(a, b), c]`.
    pub fn flatten_tuple(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Term::Pair(l, r) = cur {
            out.push(l.as_ref());
            cur = r;
        }
        out.push(cur);
        out
    }

    /// Number of constructor applications (pairs and encryptions).
    pub fn depth(&self) -> usize {
        match self {
            Term::Empty | Term::Atom(_) => 0,
            Term::Pair(l, r) => 1 + l.depth().max(r.depth()),
            Term::Enc { body, key, .. } => 1 + body.depth().max(key.depth()),
        }
    }

    /// The term itself plus every transitively contained component, body and
    /// key term.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Term::Empty | Term::Atom(_) => {}
            Term::Pair(l, r) => {
                l.collect_subterms(out);
                r.collect_subterms(out);
            }
            Term::Enc { body, key, .. } => {
                body.collect_subterms(out);
                key.collect_subterms(out);
            }
        }
    }

    /// Subterms whose outermost constructor is an encryption.
    pub fn encrypted_subterms(&self) -> BTreeSet<Term> {
        self.subterms()
            .into_iter()
            .filter(|t| matches!(t, Term::Enc { .. }))
            .collect()
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Term::Empty => {}
            Term::Atom(a) => {
                out.insert(a.clone());
            }
            Term::Pair(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Term::Enc { body, key, .. } => {
                body.collect_atoms(out);
                key.collect_atoms(out);
            }
        }
    }

    /// Applies `f` to every atom, rebuilding the term.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Atom) -> Term {
        match self {
            Term::Empty => Term::Empty,
            Term::Atom(a) => Term::Atom(f(a)),
            Term::Pair(l, r) => Term::pair(l.map_atoms(f), r.map_atoms(f)),
            Term::Enc { body, func, key } => Term::enc(body.map_atoms(f), *func, key.map_atoms(f)),
        }
    }

    /// Checks the structural invariants: no empty pair components, hash
    /// terms carry an empty key, keyed hashes carry a key-sorted atom.
    pub fn check_structure(&self) -> Result<(), TermError> {
        match self {
            Term::Empty | Term::Atom(_) => Ok(()),
            Term::Pair(l, r) => {
                if l.is_empty() || r.is_empty() {
                    return Err(TermError::EmptyPairComponent);
                }
                l.check_structure()?;
                r.check_structure()
            }
            Term::Enc { body, func, key } => {
                match func {
                    FuncName::H if !key.is_empty() => {
                        return Err(TermError::HashWithKey(self.to_string()))
                    }
                    FuncName::Hmac | FuncName::Sk | FuncName::Pk => {
                        if key.is_empty() {
                            return Err(TermError::MissingKey(self.to_string()));
                        }
                    }
                    FuncName::H => {}
                }
                if *func == FuncName::Hmac
                    && !matches!(key.as_ref(), Term::Atom(a) if a.kind.is_key())
                {
                    return Err(TermError::NotAKey(key.to_string()));
                }
                body.check_structure()?;
                key.check_structure()
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Empty => f.write_str("."),
            Term::Atom(a) => f.write_str(&a.name),
            Term::Pair(..) => {
                f.write_str("(")?;
                write_items(f, &self.flatten_tuple())?;
                f.write_str(")")
            }
            Term::Enc { body, func, key } => {
                f.write_str("{")?;
                write_items(f, &body.flatten_tuple())?;
                write!(f, "}}{func}({key})")
            }
        }
    }
}

fn write_items(f: &mut fmt::Formatter<'_>, items: &[&Term]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("`{0}` is not a key")]
    NotAKey(String),
    #[error("asymmetric key `{0}` has no declared partner")]
    UnpairedAsymmetricKey(String),
    #[error("empty term used as a pair component")]
    EmptyPairComponent,
    #[error("hash term `{0}` must have an empty key")]
    HashWithKey(String),
    #[error("encryption `{0}` is missing its key")]
    MissingKey(String),
}

/// Declared public/private key pairs, indexed both ways.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPairs {
    pub_to_prv: BTreeMap<String, String>,
    prv_to_pub: BTreeMap<String, String>,
}

impl KeyPairs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a pair. Returns false if either key already has a partner.
    pub fn insert(&mut self, public: impl Into<String>, private: impl Into<String>) -> bool {
        let (public, private) = (public.into(), private.into());
        if self.pub_to_prv.contains_key(&public) || self.prv_to_pub.contains_key(&private) {
            return false;
        }
        self.pub_to_prv.insert(public.clone(), private.clone());
        self.prv_to_pub.insert(private, public);
        true
    }

    /// Pairs in public-key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pub_to_prv
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pub_to_prv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pub_to_prv.is_empty()
    }

    pub fn private_of(&self, public: &str) -> Option<&str> {
        self.pub_to_prv.get(public).map(String::as_str)
    }

    pub fn public_of(&self, private: &str) -> Option<&str> {
        self.prv_to_pub.get(private).map(String::as_str)
    }

    pub fn merge(&self, other: &KeyPairs) -> KeyPairs {
        let mut out = self.clone();
        for (p, s) in other.iter() {
            out.insert(p, s);
        }
        out
    }
}

/// The inverse key used for decryption. Symmetric and DH keys are their own
/// inverse; public and private keys map to their declared partner.
pub fn key_inverse(k: &Term, pairs: &KeyPairs) -> Result<Term, TermError> {
    let atom = match k {
        Term::Empty => return Ok(Term::Empty),
        Term::Atom(a) if a.kind.is_key() => a,
        other => return Err(TermError::NotAKey(other.to_string())),
    };
    match atom.kind {
        AtomKind::PubKey => pairs
            .private_of(&atom.name)
            .map(|n| Term::atom(n, AtomKind::PrvKey))
            .ok_or_else(|| TermError::UnpairedAsymmetricKey(atom.name.clone())),
        AtomKind::PrvKey => pairs
            .public_of(&atom.name)
            .map(|n| Term::atom(n, AtomKind::PubKey))
            .ok_or_else(|| TermError::UnpairedAsymmetricKey(atom.name.clone())),
        _ => Ok(k.clone()),
    }
}

/// True if `k` can open an encryption made with `key` under `func`, given
/// what is known. Hashes cannot be opened.
pub fn can_decrypt(func: FuncName, key: &Term, known: &BTreeSet<Term>, pairs: &KeyPairs) -> bool {
    match func {
        FuncName::Sk => known.contains(key),
        FuncName::Pk => key_inverse(key, pairs).is_ok_and(|inv| known.contains(&inv)),
        FuncName::H | FuncName::Hmac => false,
    }
}

/// Closes a set of terms under unpairing and decryption with known keys.
pub fn analyze(seed: impl IntoIterator<Item = Term>, pairs: &KeyPairs) -> BTreeSet<Term> {
    let mut known: BTreeSet<Term> = seed.into_iter().collect();
    loop {
        let mut new = Vec::new();
        for t in &known {
            match t {
                Term::Pair(l, r) => {
                    for part in [l.as_ref(), r.as_ref()] {
                        if !known.contains(part) {
                            new.push(part.clone());
                        }
                    }
                }
                Term::Enc { body, func, key }
                    if !known.contains(body.as_ref()) && can_decrypt(*func, key, &known, pairs) =>
                {
                    new.push(body.as_ref().clone());
                }
                _ => {}
            }
        }
        if new.is_empty() {
            return known;
        }
        known.extend(new);
    }
}

/// Transmission (`+`) or reception (`-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Send,
    Recv,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Send => '+',
            Sign::Recv => '-',
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Node {
    pub sign: Sign,
    pub term: Term,
}

impl Node {
    pub fn send(term: Term) -> Self {
        Node {
            sign: Sign::Send,
            term,
        }
    }

    pub fn recv(term: Term) -> Self {
        Node {
            sign: Sign::Recv,
            term,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.sign, self.term)
    }
}

/// The ordered nodes executed by one participant.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Chain(pub Vec<Node>);

impl Chain {
    pub fn new(nodes: Vec<Node>) -> Self {
        Chain(nodes)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Chain) -> Chain {
        Chain(self.0.iter().chain(other.0.iter()).cloned().collect())
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.0.iter().flat_map(|n| n.term.atoms()).collect()
    }
}
