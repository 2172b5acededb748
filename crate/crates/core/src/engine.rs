//! Full composition of protocol pairs and of protocol sequences.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::canonical::{independence, CanonError, IndependenceWitness};
use crate::dsl::serialize_protocol;
use crate::model::{Context, ParticipantModel, PrecEff, ProtocolModel, ENV_PARTICIPANT};
use crate::pe::{part_nondestr, pe_check_protocols, pe_compose_protocols, PEFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Y,
    N,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Y
        } else {
            Verdict::N
        }
    }

    pub fn is_yes(self) -> bool {
        self == Verdict::Y
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Y => "Y",
            Verdict::N => "N",
        })
    }
}

/// Composes `x1` followed by `x2`: precondition/effect merge with chains
/// concatenated, or the empty protocol model when either the PE or the PC
/// condition fails. Inputs that cannot be canonicalized do not compose.
pub fn compose(x1: &ProtocolModel, x2: &ProtocolModel, ctx: &Context) -> ProtocolModel {
    let merged = pe_compose_protocols(x1, x2, ctx);
    if merged.is_empty() {
        return merged;
    }
    match independence(x1, x2, ctx) {
        Ok(guard) if guard.holds() => merged,
        _ => ProtocolModel::empty(),
    }
}

/// Which composition order a PE failure was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Order {
    S1,
    S2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderedPEFailure {
    pub order: Order,
    #[serde(flatten)]
    pub failure: PEFailure,
}

/// One row of the composition table for a protocol pair. `S1` is the order
/// `x1` then `x2`, `S2` the reverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionReport {
    pub pair: (String, String),
    pub pe_s1: Verdict,
    pub pe_s2: Verdict,
    pub instance_indep: Verdict,
    pub canonical_indep: Verdict,
    pub pc_s1: Verdict,
    pub pc_s2: Verdict,
    pub overall: Verdict,
    pub witnesses: Vec<IndependenceWitness>,
    pub pe_failures: Vec<OrderedPEFailure>,
    pub composed: Option<ProtocolModel>,
}

#[derive(Serialize)]
struct ReportVerdicts {
    pe_s1: Verdict,
    pe_s2: Verdict,
    instance_indep: Verdict,
    canonical_indep: Verdict,
    pc_s1: Verdict,
    pc_s2: Verdict,
    pe: String,
    pc: String,
    overall: Verdict,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema: u32,
    pair: [&'a str; 2],
    verdicts: ReportVerdicts,
    witnesses: Vec<WitnessJson>,
    pe_failures: &'a [OrderedPEFailure],
    composed: Option<String>,
}

#[derive(Serialize)]
struct WitnessJson {
    source: String,
    target: String,
}

pub const REPORT_SCHEMA: u32 = 1;

impl CompositionReport {
    /// PE column in table form, e.g. `N/Y`.
    pub fn pe(&self) -> String {
        format!("{}/{}", self.pe_s1, self.pe_s2)
    }

    /// PC column in table form.
    pub fn pc(&self) -> String {
        format!("{}/{}", self.pc_s1, self.pc_s2)
    }

    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            schema: REPORT_SCHEMA,
            pair: [&self.pair.0, &self.pair.1],
            verdicts: ReportVerdicts {
                pe_s1: self.pe_s1,
                pe_s2: self.pe_s2,
                instance_indep: self.instance_indep,
                canonical_indep: self.canonical_indep,
                pc_s1: self.pc_s1,
                pc_s2: self.pc_s2,
                pe: self.pe(),
                pc: self.pc(),
                overall: self.overall,
            },
            witnesses: self
                .witnesses
                .iter()
                .map(|w| WitnessJson {
                    source: w.source.to_string(),
                    target: w.target.to_string(),
                })
                .collect(),
            pe_failures: &self.pe_failures,
            composed: self.composed.as_ref().map(serialize_protocol),
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "pair: {} / {}\nPE (S1/S2): {}\nPC (S1/S2): {}\ninstance independent: {}\ncanonical independent: {}\noverall: {}\n",
            self.pair.0,
            self.pair.1,
            self.pe(),
            self.pc(),
            self.instance_indep,
            self.canonical_indep,
            self.overall
        );
        if !self.witnesses.is_empty() {
            out.push_str("witnesses:\n");
            for w in &self.witnesses {
                out.push_str(&format!("  {w}\n"));
            }
        }
        if !self.pe_failures.is_empty() {
            out.push_str("PE failures:\n");
            for f in &self.pe_failures {
                out.push_str(&format!(
                    "  {:?} {}: {:?} {}\n",
                    f.order, f.failure.participant, f.failure.kind, f.failure.predicate
                ));
            }
        }
        out
    }
}

/// Runs PE in both orders, the independence checks and PC in both orders.
/// The composed model is the first order that succeeds.
pub fn analyze_pair(
    x1: &ProtocolModel,
    x2: &ProtocolModel,
    ctx: &Context,
) -> Result<CompositionReport, CanonError> {
    let s1 = pe_check_protocols(x1, x2, ctx);
    let s2 = pe_check_protocols(x2, x1, ctx);
    let pe_s1 = s1.ok && !pe_compose_protocols(x1, x2, ctx).is_empty();
    let pe_s2 = s2.ok && !pe_compose_protocols(x2, x1, ctx).is_empty();
    let guard = independence(x1, x2, ctx)?;
    let reverse = independence(x2, x1, ctx)?;
    let pc_s1 = guard.holds();
    let pc_s2 = reverse.holds();

    let composed = [(pe_s1 && pc_s1, x1, x2), (pe_s2 && pc_s2, x2, x1)]
        .into_iter()
        .filter(|(ok, ..)| *ok)
        .map(|(_, a, b)| compose(a, b, ctx))
        .find(|m| !m.is_empty());

    let mut pe_failures: Vec<OrderedPEFailure> = s1
        .failures
        .into_iter()
        .map(|failure| OrderedPEFailure {
            order: Order::S1,
            failure,
        })
        .collect();
    pe_failures.extend(s2.failures.into_iter().map(|failure| OrderedPEFailure {
        order: Order::S2,
        failure,
    }));

    Ok(CompositionReport {
        pair: (x1.name.clone(), x2.name.clone()),
        pe_s1: Verdict::of(pe_s1),
        pe_s2: Verdict::of(pe_s2),
        instance_indep: Verdict::of(guard.instance),
        canonical_indep: Verdict::of(guard.canonical),
        pc_s1: Verdict::of(pc_s1),
        pc_s2: Verdict::of(pc_s2),
        overall: Verdict::of(composed.is_some()),
        witnesses: guard.witnesses,
        pe_failures,
        composed,
    })
}

/// An ordered list of protocols with the context they run in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProtocolSequence {
    pub protocols: Vec<ProtocolModel>,
    pub ctx: Context,
}

impl ProtocolSequence {
    pub fn new(protocols: Vec<ProtocolModel>, ctx: Context) -> Self {
        ProtocolSequence { protocols, ctx }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum InterruptReason {
    /// `participant` keeps `predicate` confidential and `other` depends on
    /// the term without keeping it so.
    ConfidentialityLoss { predicate: String, other: String },
    /// An encrypted component of one protocol fits a reception in the other.
    Replay(Box<IndependenceWitness>),
    /// The participants are not instance independent.
    NotInstanceIndependent,
}

impl fmt::Display for InterruptReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterruptReason::ConfidentialityLoss { predicate, other } => {
                write!(f, "{predicate} is not preserved by {other}")
            }
            InterruptReason::Replay(w) => write!(f, "replayable component {w}"),
            InterruptReason::NotInstanceIndependent => f.write_str("not instance independent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("execution interrupted on {} / {} at participant {participant}: {reason}", pair.0, pair.1)]
    InterruptedExecution {
        pair: (String, String),
        participant: String,
        reason: InterruptReason,
    },
    /// A protocol left over after interleaving could not be appended.
    /// `sequence` is 1 or 2 and `position` is 1-based.
    #[error("protocol {position} of sequence {sequence} cannot be appended")]
    NonComposablePair { sequence: usize, position: usize },
    #[error(transparent)]
    Canon(#[from] CanonError),
}

fn real_participants(x: &ProtocolModel) -> impl Iterator<Item = &ParticipantModel> {
    x.participants
        .iter()
        .filter(|v| v.name() != ENV_PARTICIPANT)
}

fn first_loss(v1: &ParticipantModel, v2: &ParticipantModel) -> Option<(String, String, String)> {
    for (a, b) in [(v1, v2), (v2, v1)] {
        if !part_nondestr(&a.eff, &b.prec, &b.eff) {
            let predicate = a
                .eff
                .iter()
                .find(|e| {
                    let one = std::iter::once((*e).clone()).collect();
                    !part_nondestr(&one, &b.prec, &b.eff)
                })
                .map(PrecEff::to_string)
                .unwrap_or_default();
            return Some((a.name().to_owned(), b.name().to_owned(), predicate));
        }
    }
    None
}

/// Checks every cross-sequence protocol pair before anything is composed.
fn check_cross_pairs(
    seq1: &[ProtocolModel],
    seq2: &[ProtocolModel],
    ctx: &Context,
) -> Result<(), SequenceError> {
    for x1 in seq1 {
        for x2 in seq2 {
            let pair = (x1.name.clone(), x2.name.clone());
            for v1 in real_participants(x1) {
                for v2 in real_participants(x2) {
                    if let Some((participant, other, predicate)) = first_loss(v1, v2) {
                        return Err(SequenceError::InterruptedExecution {
                            pair,
                            participant,
                            reason: InterruptReason::ConfidentialityLoss { predicate, other },
                        });
                    }
                }
            }
            let guard = independence(x1, x2, ctx)?;
            if let Some(w) = guard.witnesses.first() {
                return Err(SequenceError::InterruptedExecution {
                    pair,
                    participant: w.target.participant.clone(),
                    reason: InterruptReason::Replay(Box::new(w.clone())),
                });
            }
            if !guard.instance {
                let participant = real_participants(x1)
                    .next()
                    .map(|v| v.name().to_owned())
                    .unwrap_or_default();
                return Err(SequenceError::InterruptedExecution {
                    pair,
                    participant,
                    reason: InterruptReason::NotInstanceIndependent,
                });
            }
        }
    }
    Ok(())
}

/// The starting model: a single `ENV` participant whose effects are the
/// context terms and whose types are the context types.
pub fn context_seed(ctx: &Context) -> ProtocolModel {
    let mut env = ParticipantModel::new(ENV_PARTICIPANT);
    env.eff = ctx.terms.iter().cloned().map(PrecEff::term).collect();
    env.types = ctx.types.clone();
    ProtocolModel::new("", vec![env])
}

fn place(xi: &ProtocolModel, next: &ProtocolModel, ctx: &Context) -> Option<ProtocolModel> {
    let after = compose(xi, next, ctx);
    if !after.is_empty() {
        return Some(after);
    }
    let before = compose(next, xi, ctx);
    (!before.is_empty()).then_some(before)
}

/// Composes two protocol sequences. Every cross-sequence pair is checked
/// first; then protocols are placed alternately from each sequence, each
/// after the result so far if possible and before it otherwise. When
/// neither head can be placed, the rest of each sequence is appended in
/// order.
pub fn compose_sequences(
    seq1: &ProtocolSequence,
    seq2: &ProtocolSequence,
) -> Result<ProtocolModel, SequenceError> {
    let ctx = seq1.ctx.union(&seq2.ctx);
    let (p1, p2) = (&seq1.protocols, &seq2.protocols);
    check_cross_pairs(p1, p2, &ctx)?;

    let mut xi = context_seed(&ctx);
    let (mut i, mut j) = (0, 0);
    while i < p1.len() && j < p2.len() {
        let progress = (i, j);
        if let Some(next) = place(&xi, &p1[i], &ctx) {
            xi = next;
            i += 1;
        }
        if let Some(next) = place(&xi, &p2[j], &ctx) {
            xi = next;
            j += 1;
        }
        if (i, j) == progress {
            break;
        }
    }
    for (sequence, rest, start) in [(1, p1, i), (2, p2, j)] {
        for (k, x) in rest.iter().enumerate().skip(start) {
            xi = compose(&xi, x, &ctx);
            if xi.is_empty() {
                return Err(SequenceError::NonComposablePair {
                    sequence,
                    position: k + 1,
                });
            }
        }
    }
    if xi.name.is_empty() {
        xi.name = "Init".into();
    }
    Ok(xi)
}
