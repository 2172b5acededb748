//! Recursive-descent parser for protocol and context files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::lexer::{tokenize, Tok, Token};
use super::DslError;
use crate::model::{
    well_formed, Context, ParamSlot, ParticipantModel, PrecEff, PredKind, ProtocolModel, TypeKind,
    TypePredicate,
};
use crate::term::{Atom, AtomKind, Chain, FuncName, KeyPairs, Node, Sort, Term};

const SECTIONS: [&str; 5] = ["precondition", "effect", "generates", "types", "chain"];

// Atoms are parsed with this placeholder kind and resolved from the type
// declarations once the whole input has been read.
const UNRESOLVED: AtomKind = AtomKind::Msg;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: Option<&'a Path>,
    /// Currently open `(` and `{` tokens, innermost last.
    open: Vec<usize>,
}

type PResult<T> = Result<T, DslError>;

impl<'a> Parser<'a> {
    fn new(text: &str, file: Option<&'a Path>) -> Self {
        Parser {
            toks: tokenize(text),
            pos: 0,
            file,
            open: Vec::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn advance(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> DslError {
        let here = &self.toks[self.pos];
        // Running off the end inside a group is reported at the group's
        // opening delimiter, which is where the mistake usually is.
        if here.tok == Tok::Eof {
            if let Some(&i) = self.open.last() {
                let opener = &self.toks[i];
                return DslError::Syntax {
                    span: opener.span(self.file),
                    expected: expected.iter().map(|s| s.to_string()).collect(),
                    found: format!("unclosed {}", opener.tok.describe()),
                };
            }
        }
        DslError::Syntax {
            span: here.span(self.file),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: here.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, label: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&[label]))
        }
    }

    fn open(&mut self, tok: Tok, label: &str) -> PResult<()> {
        let at = self.pos;
        self.expect(tok, label)?;
        self.open.push(at);
        Ok(())
    }

    fn close(&mut self, tok: Tok, label: &str) -> PResult<()> {
        self.expect(tok, label)?;
        self.open.pop();
        Ok(())
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.advance();
                Ok(())
            }
            _ => Err(self.error(&[&format!("`{kw}`")])),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Dot => {
                self.advance();
                Ok(Term::Empty)
            }
            Tok::Ident(name) => {
                self.advance();
                Ok(Term::atom(name, UNRESOLVED))
            }
            Tok::LParen => {
                self.open(Tok::LParen, "`(`")?;
                let mut items = vec![self.term()?];
                loop {
                    match self.peek() {
                        Tok::Comma => {
                            self.advance();
                            items.push(self.term()?);
                        }
                        Tok::RParen if items.len() >= 2 => {
                            self.close(Tok::RParen, "`)`")?;
                            break;
                        }
                        Tok::RParen => return Err(self.error(&["`,`"])),
                        _ => return Err(self.error(&["`,`", "`)`"])),
                    }
                }
                Ok(Term::tuple(items))
            }
            Tok::LBrace => {
                self.open(Tok::LBrace, "`{`")?;
                let mut items = vec![self.term()?];
                while *self.peek() == Tok::Comma {
                    self.advance();
                    items.push(self.term()?);
                }
                self.close(Tok::RBrace, "`}`")?;
                let func = match self.peek() {
                    Tok::Ident(s) => FuncName::from_name(s),
                    _ => None,
                };
                let Some(func) = func else {
                    return Err(self.error(&["`sk`", "`pk`", "`h`", "`hmac`"]));
                };
                self.advance();
                self.open(Tok::LParen, "`(`")?;
                let key = self.term()?;
                self.close(Tok::RParen, "`)`")?;
                Ok(Term::enc(Term::tuple(items), func, key))
            }
            _ => Err(self.error(&["term"])),
        }
    }

    fn pred(&mut self) -> PResult<PrecEff> {
        let kind = match self.peek() {
            Tok::Ident(s) => PredKind::from_keyword(s),
            _ => None,
        };
        let Some(kind) = kind else {
            return Err(self.error(&[
                "predicate (CON_TERM, CON_PARTAUTH, CON_CONF, CON_INTEG, CON_NONREP, CON_KEYEX)",
            ]));
        };
        self.advance();
        self.open(Tok::LParen, "`(`")?;
        let subject = self.term()?;
        self.close(Tok::RParen, "`)`")?;
        Ok(PrecEff::new(kind, subject))
    }

    fn type_pred(&mut self) -> PResult<TypePredicate> {
        let kind = match self.peek() {
            Tok::Ident(s) => TypeKind::from_keyword(s),
            _ => None,
        };
        let Some(kind) = kind else {
            return Err(self.error(&["type predicate (TYPE_*)"]));
        };
        self.advance();
        self.open(Tok::LParen, "`(`")?;
        let subject = self.term()?;
        let mut params = Vec::new();
        while *self.peek() == Tok::Comma {
            self.advance();
            params.push(Term::atom(self.ident()?, UNRESOLVED));
        }
        self.close(Tok::RParen, "`)`")?;
        Ok(TypePredicate::new(kind, subject, params))
    }

    /// Comma-separated list terminated by `;`; may be empty.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if *self.peek() == Tok::Semi {
            self.advance();
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                Tok::Semi => {
                    self.advance();
                    return Ok(out);
                }
                _ => return Err(self.error(&["`,`", "`;`"])),
            }
        }
    }

    fn participant(&mut self) -> PResult<ParticipantModel> {
        self.keyword("participant")?;
        let name = self.ident()?;
        self.open(Tok::LBrace, "`{`")?;
        let mut p = ParticipantModel::new(&name);
        let mut nodes = Vec::new();
        loop {
            let section = match (self.peek(), self.peek_at(1)) {
                (Tok::RBrace, _) => break,
                (Tok::Ident(s), Tok::Colon) if SECTIONS.contains(&s.as_str()) => s.clone(),
                _ => {
                    return Err(self.error(&[
                        "`precondition:`",
                        "`effect:`",
                        "`generates:`",
                        "`types:`",
                        "`chain:`",
                        "`}`",
                    ]))
                }
            };
            self.advance();
            self.advance();
            match section.as_str() {
                "precondition" => p.prec.extend(self.list(Self::pred)?),
                "effect" => p.eff.extend(self.list(Self::pred)?),
                "types" => p.types.extend(self.list(Self::type_pred)?),
                "generates" => {
                    let names = self.list(|s| s.ident())?;
                    p.gen
                        .extend(names.into_iter().map(|n| Term::atom(n, UNRESOLVED)));
                }
                _ => {
                    let before = nodes.len();
                    loop {
                        let sign = match self.peek() {
                            Tok::Plus => Node::send,
                            Tok::Minus => Node::recv,
                            _ => break,
                        };
                        self.advance();
                        nodes.push(sign(self.term()?));
                    }
                    if nodes.len() == before {
                        return Err(self.error(&["`+`", "`-`"]));
                    }
                }
            }
        }
        self.close(Tok::RBrace, "`}`")?;
        p.chain = Chain::new(nodes);
        Ok(p)
    }

    fn keypairs(&mut self) -> PResult<KeyPairs> {
        self.keyword("keypairs")?;
        self.open(Tok::LBrace, "`{`")?;
        let mut kp = KeyPairs::new();
        while *self.peek() != Tok::RBrace {
            let at = self.pos;
            let public = self.ident()?;
            self.expect(Tok::Slash, "`/`")?;
            let private = self.ident()?;
            self.expect(Tok::Semi, "`;`")?;
            if !kp.insert(public.clone(), private) {
                self.pos = at;
                return Err(DslError::Syntax {
                    span: self.toks[at].span(self.file),
                    expected: vec!["a key not already paired".into()],
                    found: format!("`{public}`"),
                });
            }
        }
        self.close(Tok::RBrace, "`}`")?;
        Ok(kp)
    }

    fn protocol(&mut self) -> PResult<ProtocolModel> {
        self.keyword("protocol")?;
        let name = self.ident()?;
        self.open(Tok::LBrace, "`{`")?;
        let keypairs = if self.at_keyword("keypairs") {
            self.keypairs()?
        } else {
            KeyPairs::new()
        };
        let mut participants = vec![self.participant()?];
        while self.at_keyword("participant") {
            participants.push(self.participant()?);
        }
        self.close(Tok::RBrace, "`}`")?;
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["end of input"]));
        }
        Ok(ProtocolModel {
            name,
            participants,
            keypairs,
        })
    }

    fn context(&mut self) -> PResult<Context> {
        let mut ctx = Context::new();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(ctx),
                Tok::Ident(s) if s == "term" => {
                    self.advance();
                    let name = self.ident()?;
                    self.expect(Tok::Semi, "`;`")?;
                    ctx.terms.insert(Term::atom(name, UNRESOLVED));
                }
                Tok::Ident(s) if s == "type" => {
                    self.advance();
                    let t = self.type_pred()?;
                    self.expect(Tok::Semi, "`;`")?;
                    ctx.types.insert(t);
                }
                _ => return Err(self.error(&["`term`", "`type`", "end of input"])),
            }
        }
    }
}

/// Name-to-kind table built from type predicate subjects. The first
/// declaration wins; conflicting ones surface later as violations.
fn kind_table<'t>(types: impl Iterator<Item = &'t TypePredicate>) -> BTreeMap<String, AtomKind> {
    let mut out = BTreeMap::new();
    for t in types {
        if let Some(a) = t.subject.as_atom() {
            out.entry(a.name.clone()).or_insert(t.kind.atom_kind());
        }
    }
    out
}

struct Resolver<'t> {
    kinds: &'t BTreeMap<String, AtomKind>,
}

impl Resolver<'_> {
    fn atom(&self, a: &Atom) -> Atom {
        Atom::new(
            a.name.clone(),
            self.kinds.get(&a.name).copied().unwrap_or(UNRESOLVED),
        )
    }

    fn term(&self, t: &Term) -> Term {
        t.map_atoms(&mut |a| self.atom(a))
    }

    fn param(&self, slot: Option<&ParamSlot>, t: &Term) -> Term {
        let default = match slot {
            Some(ParamSlot::Number) => AtomKind::DhNonce,
            _ => AtomKind::User,
        };
        t.map_atoms(&mut |a| {
            let kind = self.kinds.get(&a.name).copied().unwrap_or(default);
            Atom::new(a.name.clone(), kind)
        })
    }

    fn type_pred(&self, t: &TypePredicate) -> TypePredicate {
        let subject = t
            .subject
            .map_atoms(&mut |a| Atom::new(a.name.clone(), t.kind.atom_kind()));
        let slots = t.kind.params();
        let params = t
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| self.param(slots.get(i), p))
            .collect();
        TypePredicate::new(t.kind, subject, params)
    }

    fn preds(&self, ps: &BTreeSet<PrecEff>) -> BTreeSet<PrecEff> {
        ps.iter()
            .map(|p| PrecEff::new(p.kind, self.term(&p.subject)))
            .collect()
    }

    fn participant(&self, p: &ParticipantModel) -> ParticipantModel {
        let part = p.part.as_ref().map(|a| {
            let kind = match self.kinds.get(&a.name) {
                Some(k) if k.sort() == Sort::Participant => *k,
                _ => AtomKind::User,
            };
            Atom::new(a.name.clone(), kind)
        });
        ParticipantModel {
            prec: self.preds(&p.prec),
            eff: self.preds(&p.eff),
            types: p.types.iter().map(|t| self.type_pred(t)).collect(),
            gen: p.gen.iter().map(|t| self.term(t)).collect(),
            part,
            chain: Chain::new(
                p.chain
                    .nodes()
                    .iter()
                    .map(|n| Node {
                        sign: n.sign,
                        term: self.term(&n.term),
                    })
                    .collect(),
            ),
        }
    }
}

/// Parses a protocol file, without the well-formedness check.
pub fn parse_protocol_unchecked(
    text: &str,
    file: Option<&Path>,
) -> Result<ProtocolModel, DslError> {
    let raw = Parser::new(text, file).protocol()?;
    let kinds = kind_table(raw.participants.iter().flat_map(|p| p.types.iter()));
    let r = Resolver { kinds: &kinds };
    Ok(ProtocolModel {
        name: raw.name,
        participants: raw.participants.iter().map(|p| r.participant(p)).collect(),
        keypairs: raw.keypairs,
    })
}

pub fn parse_protocol_at(text: &str, file: Option<&Path>) -> Result<ProtocolModel, DslError> {
    let p = parse_protocol_unchecked(text, file)?;
    let violations = well_formed(&p);
    if violations.is_empty() {
        Ok(p)
    } else {
        Err(DslError::Semantic { violations })
    }
}

pub fn parse_context_at(text: &str, file: Option<&Path>) -> Result<Context, DslError> {
    let raw = Parser::new(text, file).context()?;
    let kinds = kind_table(raw.types.iter());
    let r = Resolver { kinds: &kinds };
    let ctx = Context {
        terms: raw.terms.iter().map(|t| r.term(t)).collect(),
        types: raw.types.iter().map(|t| r.type_pred(t)).collect(),
    };
    let violations = ctx.validate();
    if violations.is_empty() {
        Ok(ctx)
    } else {
        Err(DslError::Semantic { violations })
    }
}
