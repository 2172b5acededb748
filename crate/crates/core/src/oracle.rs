//! Bounded Dolev-Yao search for cross-protocol replays.
//!
//! One session of each protocol runs against an intruder who sees every
//! message. Honest participants send exactly what their chain says; at each
//! reception the intruder may deliver any term it can build that the
//! receiver cannot tell apart from what it expects. A replay is a ciphertext
//! first sent in one protocol and accepted at an encrypted position of the
//! other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::canonical::{
    canon_accepts, canon_view, canonicalize, CanonError, CanonicalTerm, TypeIndex,
};
use crate::model::{
    knowledge_of, Context, ParticipantModel, PrecEff, ProtocolModel, TypeKind, TypePredicate,
};
use crate::term::{analyze, can_decrypt, Atom, AtomKind, FuncName, KeyPairs, Sign, Term};

/// Largest constructor depth accepted by [`dy_close`].
pub const MAX_CLOSURE_DEPTH: usize = 6;
pub const DEFAULT_CLOSURE_CAP: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{what} exceeded its bound of {limit}")]
    BoundExceeded { what: &'static str, limit: usize },
    #[error("depth {0} is above the supported maximum")]
    DepthTooLarge(usize),
    #[error("only one session per protocol is supported, got {0}")]
    UnsupportedSessions(usize),
    #[error(transparent)]
    Canon(#[from] CanonError),
}

fn key_usable(func: FuncName, key: &Atom) -> bool {
    match func {
        FuncName::Sk => matches!(key.kind, AtomKind::SymKey | AtomKind::DhKey),
        FuncName::Pk => matches!(key.kind, AtomKind::PubKey | AtomKind::PrvKey),
        FuncName::Hmac => key.kind.is_key(),
        FuncName::H => false,
    }
}

/// Dolev-Yao closure with the default cardinality cap.
pub fn dy_close(
    seed: &BTreeSet<Term>,
    depth: usize,
    pairs: &KeyPairs,
) -> Result<BTreeSet<Term>, OracleError> {
    dy_close_capped(seed, depth, pairs, DEFAULT_CLOSURE_CAP)
}

/// Closes `seed` under unpairing and decryption, then adds every term of at
/// most `depth` nested constructors (pairs, encryptions with known keys,
/// hashes) built from what is known.
pub fn dy_close_capped(
    seed: &BTreeSet<Term>,
    depth: usize,
    pairs: &KeyPairs,
    cap: usize,
) -> Result<BTreeSet<Term>, OracleError> {
    if depth > MAX_CLOSURE_DEPTH {
        return Err(OracleError::DepthTooLarge(depth));
    }
    let mut out = analyze(seed.iter().cloned(), pairs);
    let exceeded = || OracleError::BoundExceeded {
        what: "closure",
        limit: cap,
    };
    if out.len() > cap {
        return Err(exceeded());
    }
    let keys: Vec<Atom> = out
        .iter()
        .filter_map(Term::as_atom)
        .filter(|a| a.kind.is_key())
        .cloned()
        .collect();
    for level in 1..=depth {
        let usable: Vec<Term> = out.iter().filter(|t| t.depth() < level).cloned().collect();
        let mut fresh = BTreeSet::new();
        for a in &usable {
            let top = a.depth() + 1 == level;
            for b in &usable {
                if top || b.depth() + 1 == level {
                    fresh.insert(Term::pair(a.clone(), b.clone()));
                }
            }
            if !top {
                continue;
            }
            fresh.insert(Term::hash(a.clone()));
            for k in &keys {
                for func in [FuncName::Sk, FuncName::Pk, FuncName::Hmac] {
                    if key_usable(func, k) {
                        fresh.insert(Term::enc(a.clone(), func, Term::Atom(k.clone())));
                    }
                }
            }
            if out.len() + fresh.len() > cap {
                return Err(exceeded());
            }
        }
        out.extend(fresh);
        if out.len() > cap {
            return Err(exceeded());
        }
    }
    Ok(out)
}

/// What the intruder holds: everything it has seen, opened as far as its
/// keys allow.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntruderKnowledge {
    pub terms: BTreeSet<Term>,
}

impl IntruderKnowledge {
    pub fn new(seed: impl IntoIterator<Item = Term>, pairs: &KeyPairs) -> Self {
        IntruderKnowledge {
            terms: analyze(seed, pairs),
        }
    }

    pub fn learn(&mut self, t: &Term, pairs: &KeyPairs) {
        if !self.terms.contains(t) {
            let seed = std::mem::take(&mut self.terms);
            self.terms = analyze(seed.into_iter().chain([t.clone()]), pairs);
        }
    }

    /// True if `t` is known or can be built with at most `depth` further
    /// constructor applications.
    pub fn can_derive(&self, t: &Term, depth: usize) -> bool {
        if matches!(t, Term::Empty) || self.terms.contains(t) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        match t {
            Term::Pair(l, r) => self.can_derive(l, depth - 1) && self.can_derive(r, depth - 1),
            Term::Enc { body, func, key } => {
                let key_ok = match func {
                    FuncName::H => true,
                    _ => self.terms.contains(key.as_ref()),
                };
                key_ok && self.can_derive(body, depth - 1)
            }
            Term::Atom(_) | Term::Empty => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleBounds {
    pub sessions: usize,
    pub intruder_depth: usize,
    /// Largest number of states the search may expand.
    pub frontier_cap: usize,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds {
            sessions: 1,
            intruder_depth: 4,
            frontier_cap: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Send,
    Intercept,
    Inject,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Event::Send => "send",
            Event::Intercept => "intercept",
            Event::Inject => "inject",
        })
    }
}

/// A node of one of the two protocol runs. `instance` is 1 or 2.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NodeAddr {
    pub instance: usize,
    pub protocol: String,
    pub participant: String,
    pub index: usize,
}

impl fmt::Display for NodeAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}[{}]", self.protocol, self.participant, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub event: Event,
    pub node: NodeAddr,
    pub term: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackTrace {
    pub steps: Vec<TraceStep>,
    pub replayed: Term,
    pub origin: NodeAddr,
    pub target: NodeAddr,
}

#[derive(Serialize)]
struct StepJson<'a> {
    event: Event,
    protocol: &'a str,
    participant: &'a str,
    node: usize,
    term: String,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    steps: Vec<StepJson<'a>>,
    replayed: String,
    from_protocol: &'a str,
    into_protocol: &'a str,
    origin: &'a NodeAddr,
    target: &'a NodeAddr,
}

impl AttackTrace {
    pub fn from_protocol(&self) -> &str {
        &self.origin.protocol
    }

    pub fn into_protocol(&self) -> &str {
        &self.target.protocol
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.json()).expect("trace serializes")
    }

    fn json(&self) -> TraceJson<'_> {
        TraceJson {
            steps: self
                .steps
                .iter()
                .map(|s| StepJson {
                    event: s.event,
                    protocol: &s.node.protocol,
                    participant: &s.node.participant,
                    node: s.node.index,
                    term: s.term.to_string(),
                })
                .collect(),
            replayed: self.replayed.to_string(),
            from_protocol: self.from_protocol(),
            into_protocol: self.into_protocol(),
            origin: &self.origin,
            target: &self.target,
        }
    }
}

impl fmt::Display for AttackTrace {
    /// Numbered step list followed by a summary line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{:>3}. {:<9} {} {}", i + 1, s.event, s.node, s.term)?;
        }
        writeln!(
            f,
            "replayed {} from {} into {}",
            self.replayed, self.origin, self.target
        )
    }
}

/// A distinct replay: where the ciphertext was first sent and where it was
/// accepted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReplayPair {
    pub origin: NodeAddr,
    pub target: NodeAddr,
}

const INTRUDER: &str = "I";
const INTRUDER_NONCE: &str = "Ni";
const INTRUDER_KEY: &str = "Ki";
/// Most candidate terms tried at one reception.
const MAX_CANDIDATES: usize = 256;

fn intruder_atoms() -> [Term; 3] {
    [
        Term::atom(INTRUDER, AtomKind::User),
        Term::atom(INTRUDER_NONCE, AtomKind::Nonce),
        Term::atom(INTRUDER_KEY, AtomKind::SymKey),
    ]
}

fn intruder_types() -> [TypePredicate; 3] {
    let i = Term::atom(INTRUDER, AtomKind::User);
    [
        TypePredicate::of(TypeKind::U, INTRUDER),
        TypePredicate::of(TypeKind::Na, INTRUDER_NONCE),
        TypePredicate::new(
            TypeKind::KSym,
            Term::atom(INTRUDER_KEY, AtomKind::SymKey),
            vec![i.clone(), i],
        ),
    ]
}

/// Renames the atoms generated in a run so the two runs never share fresh
/// values.
fn instantiate(x: &ProtocolModel, instance: usize) -> ProtocolModel {
    let fresh: BTreeSet<String> = x
        .participants
        .iter()
        .flat_map(|v| v.gen.iter())
        .filter_map(|t| t.as_atom().map(|a| a.name.clone()))
        .collect();
    let rename = |t: &Term| {
        t.map_atoms(&mut |a: &Atom| {
            if fresh.contains(&a.name) {
                Atom::new(format!("{}#{instance}", a.name), a.kind)
            } else {
                a.clone()
            }
        })
    };
    let participants = x
        .participants
        .iter()
        .map(|v| ParticipantModel {
            prec: v
                .prec
                .iter()
                .map(|p| PrecEff::new(p.kind, rename(&p.subject)))
                .collect(),
            eff: v
                .eff
                .iter()
                .map(|p| PrecEff::new(p.kind, rename(&p.subject)))
                .collect(),
            types: v
                .types
                .iter()
                .map(|t| {
                    TypePredicate::new(
                        t.kind,
                        rename(&t.subject),
                        t.params.iter().map(rename).collect(),
                    )
                })
                .collect(),
            gen: v.gen.iter().map(rename).collect(),
            part: v.part.clone(),
            chain: crate::term::Chain::new(
                v.chain
                    .nodes()
                    .iter()
                    .map(|n| crate::term::Node {
                        sign: n.sign,
                        term: rename(&n.term),
                    })
                    .collect(),
            ),
        })
        .collect();
    ProtocolModel {
        name: x.name.clone(),
        participants,
        keypairs: x.keypairs.clone(),
    }
}

fn substitute(t: &Term, bound: &BTreeMap<Term, Term>) -> Term {
    if bound.is_empty() {
        return t.clone();
    }
    match t {
        Term::Atom(_) => bound.get(t).cloned().unwrap_or_else(|| t.clone()),
        Term::Pair(l, r) => Term::pair(substitute(l, bound), substitute(r, bound)),
        Term::Enc { body, func, key } => {
            Term::enc(substitute(body, bound), *func, substitute(key, bound))
        }
        Term::Empty => Term::Empty,
    }
}

/// A receiver that holds the key of an expected ciphertext decrypts with
/// that key, so a ciphertext under any other key is rejected there.
fn keys_agree(h: &Term, c: &Term, known: &BTreeSet<Term>) -> bool {
    match (h, c) {
        (Term::Pair(hl, hr), Term::Pair(cl, cr)) => {
            keys_agree(hl, cl, known) && keys_agree(hr, cr, known)
        }
        (
            Term::Enc {
                body: hb, key: hk, ..
            },
            Term::Enc {
                body: cb, key: ck, ..
            },
        ) => {
            if known.contains(hk.as_ref()) && hk != ck {
                return false;
            }
            keys_agree(hb, cb, known)
        }
        _ => true,
    }
}

/// Binds the atoms of the expected term `h` that the receiver did not know
/// to whatever sits at the same position of the delivered term `c`, looking
/// inside ciphertexts the receiver can open.
fn bind(
    h: &Term,
    c: &Term,
    known: &BTreeSet<Term>,
    pairs: &KeyPairs,
    bound: &mut BTreeMap<Term, Term>,
) {
    match (h, c) {
        (Term::Atom(_), _) => {
            if !known.contains(h) && h != c {
                bound.entry(h.clone()).or_insert_with(|| c.clone());
            }
        }
        (Term::Pair(hl, hr), Term::Pair(cl, cr)) => {
            bind(hl, cl, known, pairs, bound);
            bind(hr, cr, known, pairs, bound);
        }
        (
            Term::Enc {
                body: hb, func: hf, ..
            },
            Term::Enc {
                body: cb,
                func: cf,
                key,
            },
        ) => {
            let after = analyze(known.iter().cloned().chain([c.clone()]), pairs);
            if hf == cf && *cf != FuncName::H && can_decrypt(*cf, key, &after, pairs) {
                bind(hb, cb, known, pairs, bound);
            }
        }
        _ => {}
    }
}

/// One participant of one run.
struct Role {
    instance: usize,
    protocol: String,
    participant: String,
    nodes: Vec<(Sign, Term)>,
    /// Expected view of each received term; `None` at sends.
    expected: Vec<Option<CanonicalTerm>>,
    types: TypeIndex,
    base: BTreeSet<Term>,
}

impl Role {
    fn addr(&self, index: usize) -> NodeAddr {
        NodeAddr {
            instance: self.instance,
            protocol: self.protocol.clone(),
            participant: self.participant.clone(),
            index,
        }
    }
}

#[derive(Clone)]
struct State {
    pcs: Vec<usize>,
    accepted: Vec<Vec<Term>>,
    known: Vec<BTreeSet<Term>>,
    /// Values each role bound to atoms it could not check when received.
    bound: Vec<BTreeMap<Term, Term>>,
    intruder: IntruderKnowledge,
    origin: BTreeMap<Term, NodeAddr>,
    trace: Vec<TraceStep>,
}

impl State {
    fn key(&self) -> (Vec<usize>, Vec<Vec<Term>>) {
        (self.pcs.clone(), self.accepted.clone())
    }
}

struct Search<'a> {
    roles: Vec<Role>,
    pairs: KeyPairs,
    bounds: &'a OracleBounds,
}

impl Search<'_> {
    fn new<'b>(
        x1: &ProtocolModel,
        x2: &ProtocolModel,
        ctx: &Context,
        bounds: &'b OracleBounds,
    ) -> Result<Search<'b>, OracleError> {
        let runs = [instantiate(x1, 1), instantiate(x2, 2)];
        let pairs = runs[0].keypairs.merge(&runs[1].keypairs);
        let all_types: Vec<TypePredicate> = runs
            .iter()
            .flat_map(|r| r.participants.iter().flat_map(|v| v.types.iter().cloned()))
            .collect();
        let mut roles = Vec::new();
        for (i, run) in runs.iter().enumerate() {
            let canon = canonicalize(run, ctx)?;
            for (v, c) in run.participants.iter().zip(&canon.participants) {
                if v.chain.is_empty() {
                    continue;
                }
                let intruder = intruder_types();
                let types = TypeIndex::new(
                    v.types
                        .iter()
                        .chain(&ctx.types)
                        .chain(&all_types)
                        .chain(intruder.iter()),
                );
                roles.push(Role {
                    instance: i + 1,
                    protocol: run.name.clone(),
                    participant: v.name().to_owned(),
                    nodes: v
                        .chain
                        .nodes()
                        .iter()
                        .map(|n| (n.sign, n.term.clone()))
                        .collect(),
                    expected: c
                        .received
                        .nodes
                        .iter()
                        .map(|n| (n.sign == Sign::Recv).then(|| n.term.clone()))
                        .collect(),
                    types,
                    base: analyze(knowledge_of(v, ctx), &pairs),
                });
            }
        }
        Ok(Search {
            roles,
            pairs,
            bounds,
        })
    }

    fn initial(&self, ctx: &Context) -> State {
        let mut s = State {
            pcs: vec![0; self.roles.len()],
            accepted: vec![Vec::new(); self.roles.len()],
            known: self.roles.iter().map(|r| r.base.clone()).collect(),
            bound: vec![BTreeMap::new(); self.roles.len()],
            intruder: IntruderKnowledge::new(
                ctx.terms.iter().cloned().chain(intruder_atoms()),
                &self.pairs,
            ),
            origin: BTreeMap::new(),
            trace: Vec::new(),
        };
        self.run_sends(&mut s);
        s
    }

    fn run_sends(&self, s: &mut State) {
        for (r, role) in self.roles.iter().enumerate() {
            while let Some((Sign::Send, term)) = role.nodes.get(s.pcs[r]) {
                let term = &substitute(term, &s.bound[r]);
                let addr = role.addr(s.pcs[r]);
                for sub in term.encrypted_subterms() {
                    s.origin.entry(sub).or_insert_with(|| addr.clone());
                }
                s.intruder.learn(term, &self.pairs);
                s.trace.push(TraceStep {
                    event: Event::Send,
                    node: addr.clone(),
                    term: term.clone(),
                });
                s.trace.push(TraceStep {
                    event: Event::Intercept,
                    node: addr,
                    term: term.clone(),
                });
                s.pcs[r] += 1;
            }
        }
    }

    fn view(&self, r: usize, known: &BTreeSet<Term>, c: &Term) -> Option<CanonicalTerm> {
        let after = analyze(known.iter().cloned().chain([c.clone()]), &self.pairs);
        canon_view(c, known, &after, &self.roles[r].types, &self.pairs).ok()
    }

    /// Terms the intruder could deliver for honest term `h` at a position
    /// the receiver sees as `e`.
    fn shape_candidates(&self, s: &State, r: usize, h: &Term, e: &CanonicalTerm) -> Vec<Term> {
        let ik = &s.intruder;
        let depth = self.bounds.intruder_depth;
        let mut out = Vec::new();
        match (e, h) {
            (CanonicalTerm::Basic(crate::canonical::BasicType::U), _) => {
                if ik.can_derive(h, depth) {
                    out.push(h.clone());
                } else {
                    out.push(Term::atom(INTRUDER_NONCE, AtomKind::Nonce));
                }
                // Unchecked atom slots also take any known atom of the same kind.
                if let Term::Atom(ha) = h {
                    for c in &ik.terms {
                        if let Term::Atom(ca) = c {
                            if ca.kind == ha.kind && ca != ha && out.len() < MAX_CANDIDATES {
                                out.push(c.clone());
                            }
                        }
                    }
                }
            }
            (CanonicalTerm::Pair(el, er), Term::Pair(hl, hr)) => {
                let left = self.shape_candidates(s, r, hl, el);
                let right = self.shape_candidates(s, r, hr, er);
                'outer: for l in &left {
                    for rt in &right {
                        if out.len() >= MAX_CANDIDATES {
                            break 'outer;
                        }
                        out.push(Term::pair(l.clone(), rt.clone()));
                    }
                }
            }
            (CanonicalTerm::Enc { body: eb, .. }, Term::Enc { body, func, key }) => {
                if ik.can_derive(h, depth) {
                    out.push(h.clone());
                }
                for c in &ik.terms {
                    if out.len() >= MAX_CANDIDATES {
                        break;
                    }
                    if let Term::Enc { func: cf, .. } = c {
                        if cf == func && c != h {
                            let fits = self
                                .view(r, &s.known[r], c)
                                .is_some_and(|v| canon_accepts(e, &v));
                            if fits {
                                out.push(c.clone());
                            }
                        }
                    }
                }
                if *func != FuncName::H && ik.terms.contains(key.as_ref()) {
                    for b in self.shape_candidates(s, r, body, eb) {
                        if out.len() >= MAX_CANDIDATES {
                            break;
                        }
                        let made = Term::enc(b, *func, key.as_ref().clone());
                        if made != *h {
                            out.push(made);
                        }
                    }
                }
            }
            _ => {
                if ik.can_derive(h, depth) {
                    out.push(h.clone());
                }
            }
        }
        out
    }

    fn candidates(&self, s: &State, r: usize) -> Vec<(Term, CanonicalTerm)> {
        let role = &self.roles[r];
        let pc = s.pcs[r];
        let h = &substitute(&role.nodes[pc].1, &s.bound[r]);
        let e = role.expected[pc]
            .as_ref()
            .expect("reception has an expected view");
        let mut seen = BTreeSet::new();
        self.shape_candidates(s, r, h, e)
            .into_iter()
            .filter(|c| seen.insert(c.clone()))
            .filter(|c| s.intruder.can_derive(c, self.bounds.intruder_depth))
            .filter(|c| keys_agree(h, c, &s.known[r]))
            .filter(|c| {
                self.view(r, &s.known[r], c)
                    .is_some_and(|v| canon_accepts(e, &v))
            })
            .map(|c| (c, e.clone()))
            .collect()
    }

    /// Foreign ciphertexts in `c` at positions where `e` expects a
    /// ciphertext, outermost first.
    fn replays(
        &self,
        s: &State,
        r: usize,
        c: &Term,
        e: &CanonicalTerm,
        out: &mut Vec<(Term, NodeAddr)>,
    ) {
        match (e, c) {
            (CanonicalTerm::Pair(el, er), Term::Pair(cl, cr)) => {
                self.replays(s, r, cl, el, out);
                self.replays(s, r, cr, er, out);
            }
            (
                CanonicalTerm::Enc {
                    body: eb, key: ek, ..
                },
                Term::Enc { body, key, .. },
            ) => {
                if let Some(o) = s.origin.get(c) {
                    if o.instance != self.roles[r].instance {
                        out.push((c.clone(), o.clone()));
                    }
                }
                self.replays(s, r, body, eb, out);
                self.replays(s, r, key, ek, out);
            }
            _ => {}
        }
    }

    /// Explores the joint runs depth first. `on_replay` sees every replay
    /// found and returns true to stop the search.
    fn explore(
        &self,
        ctx: &Context,
        mut on_replay: impl FnMut(AttackTrace) -> bool,
    ) -> Result<(), OracleError> {
        let mut stack = vec![self.initial(ctx)];
        let mut visited = BTreeSet::new();
        visited.insert(stack[0].key());
        let mut expanded = 0;
        while let Some(s) = stack.pop() {
            expanded += 1;
            if expanded > self.bounds.frontier_cap {
                return Err(OracleError::BoundExceeded {
                    what: "search frontier",
                    limit: self.bounds.frontier_cap,
                });
            }
            let mut children = Vec::new();
            for (r, role) in self.roles.iter().enumerate() {
                let pc = s.pcs[r];
                if !matches!(role.nodes.get(pc), Some((Sign::Recv, _))) {
                    continue;
                }
                for (c, e) in self.candidates(&s, r) {
                    let mut child = s.clone();
                    let target = role.addr(pc);
                    child.trace.push(TraceStep {
                        event: Event::Inject,
                        node: target.clone(),
                        term: c.clone(),
                    });
                    let mut found = Vec::new();
                    self.replays(&s, r, &c, &e, &mut found);
                    for (replayed, origin) in found {
                        let trace = AttackTrace {
                            steps: child.trace.clone(),
                            replayed,
                            origin,
                            target: target.clone(),
                        };
                        if on_replay(trace) {
                            return Ok(());
                        }
                    }
                    let h = substitute(&role.nodes[pc].1, &s.bound[r]);
                    bind(&h, &c, &s.known[r], &self.pairs, &mut child.bound[r]);
                    let known = std::mem::take(&mut child.known[r]);
                    child.known[r] = analyze(known.into_iter().chain([c.clone()]), &self.pairs);
                    child.accepted[r].push(c);
                    child.pcs[r] += 1;
                    self.run_sends(&mut child);
                    if visited.insert(child.key()) {
                        children.push(child);
                    }
                }
            }
            stack.extend(children.into_iter().rev());
        }
        Ok(())
    }
}

fn check_bounds(bounds: &OracleBounds) -> Result<(), OracleError> {
    if bounds.sessions != 1 {
        return Err(OracleError::UnsupportedSessions(bounds.sessions));
    }
    if bounds.intruder_depth > MAX_CLOSURE_DEPTH {
        return Err(OracleError::DepthTooLarge(bounds.intruder_depth));
    }
    Ok(())
}

/// Returns the first trace, in a fixed search order, in which a ciphertext
/// sent in one protocol is accepted at an encrypted position of the other.
pub fn find_replay(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
    bounds: &OracleBounds,
) -> Result<Option<AttackTrace>, OracleError> {
    check_bounds(bounds)?;
    let search = Search::new(x1, x2, ctx, bounds)?;
    let mut first = None;
    search.explore(ctx, |t| {
        first = Some(t);
        true
    })?;
    Ok(first)
}

/// Every distinct (origin, target) replay reachable within the bounds.
pub fn enumerate_replays(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
    bounds: &OracleBounds,
) -> Result<Vec<ReplayPair>, OracleError> {
    check_bounds(bounds)?;
    let search = Search::new(x1, x2, ctx, bounds)?;
    let mut found = BTreeSet::new();
    search.explore(ctx, |t| {
        found.insert(ReplayPair {
            origin: t.origin,
            target: t.target,
        });
        false
    })?;
    Ok(found.into_iter().collect())
}
