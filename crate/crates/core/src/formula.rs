//! CTL formulas: abstract syntax, a recursive-descent parser for the ASCII
//! surface syntax, a canonical printer, and the core normal form the update
//! engine dispatches on.
//!
//! Surface grammar (lowest to highest precedence):
//!
//! ```text
//! formula := implies
//! implies := or ("->" implies)?
//! or      := and ("|" and)*
//! and     := unary ("&" unary)*
//! unary   := "!" unary | "AX" unary | "EX" unary | "AG" unary | "EG" unary
//!          | "AF" unary | "EF" unary
//!          | "A" "[" formula "U" formula "]" | "E" "[" formula "U" formula "]"
//!          | "(" formula ")" | "true" | "false" | atom
//! ```
//!
//! The Unicode connectives `¬ ∧ ∨ → ⊤ ⊥` are accepted as aliases.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A CTL formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    /// The constant ⊤.
    True,
    /// The constant ⊥.
    False,
    /// An atomic proposition.
    Atom(String),
    /// Negation.
    Not(Box<Formula>),
    /// Conjunction.
    And(Box<Formula>, Box<Formula>),
    /// Disjunction.
    Or(Box<Formula>, Box<Formula>),
    /// Implication.
    Implies(Box<Formula>, Box<Formula>),
    /// On all successors.
    AX(Box<Formula>),
    /// On some successor.
    EX(Box<Formula>),
    /// On all paths, globally.
    AG(Box<Formula>),
    /// On some path, globally.
    EG(Box<Formula>),
    /// On all paths, eventually.
    AF(Box<Formula>),
    /// On some path, eventually.
    EF(Box<Formula>),
    /// On all paths, the first argument holds until the second does.
    AU(Box<Formula>, Box<Formula>),
    /// On some path, the first argument holds until the second does.
    EU(Box<Formula>, Box<Formula>),
}

use Formula::*;

impl Formula {
    /// Atomic proposition `name`.
    pub fn atom(name: &str) -> Formula {
        Atom(name.to_string())
    }

    /// `¬f`.
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Not(Box::new(f))
    }

    /// `a ∧ b`.
    pub fn and(a: Formula, b: Formula) -> Formula {
        And(Box::new(a), Box::new(b))
    }

    /// `a ∨ b`.
    pub fn or(a: Formula, b: Formula) -> Formula {
        Or(Box::new(a), Box::new(b))
    }

    /// `a → b`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Implies(Box::new(a), Box::new(b))
    }

    /// `AX f`.
    pub fn ax(f: Formula) -> Formula {
        AX(Box::new(f))
    }

    /// `EX f`.
    pub fn ex(f: Formula) -> Formula {
        EX(Box::new(f))
    }

    /// `AG f`.
    pub fn ag(f: Formula) -> Formula {
        AG(Box::new(f))
    }

    /// `EG f`.
    pub fn eg(f: Formula) -> Formula {
        EG(Box::new(f))
    }

    /// `AF f`.
    pub fn af(f: Formula) -> Formula {
        AF(Box::new(f))
    }

    /// `EF f`.
    pub fn ef(f: Formula) -> Formula {
        EF(Box::new(f))
    }

    /// `A[a U b]`.
    pub fn au(a: Formula, b: Formula) -> Formula {
        AU(Box::new(a), Box::new(b))
    }

    /// `E[a U b]`.
    pub fn eu(a: Formula, b: Formula) -> Formula {
        EU(Box::new(a), Box::new(b))
    }

    /// True iff the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            True | False | Atom(_) => true,
            Not(f) => f.is_propositional(),
            And(a, b) | Or(a, b) | Implies(a, b) => a.is_propositional() && b.is_propositional(),
            _ => false,
        }
    }

    /// True iff the outermost operator is temporal.
    pub fn is_temporal(&self) -> bool {
        matches!(self, AX(_) | EX(_) | AG(_) | EG(_) | AF(_) | EF(_) | AU(..) | EU(..))
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            True | False | Atom(_) => 1,
            Not(f) | AX(f) | EX(f) | AG(f) | EG(f) | AF(f) | EF(f) => 1 + f.size(),
            And(a, b) | Or(a, b) | Implies(a, b) | AU(a, b) | EU(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Height of the AST; leaves have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            True | False | Atom(_) => 0,
            Not(f) | AX(f) | EX(f) | AG(f) | EG(f) | AF(f) | EF(f) => 1 + f.depth(),
            And(a, b) | Or(a, b) | Implies(a, b) | AU(a, b) | EU(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Atomic propositions occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            True | False => {}
            Atom(p) => {
                out.insert(p.clone());
            }
            Not(f) | AX(f) | EX(f) | AG(f) | EG(f) | AF(f) | EF(f) => f.collect_atoms(out),
            And(a, b) | Or(a, b) | Implies(a, b) | AU(a, b) | EU(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Evaluates a propositional formula against a label (the set of true
    /// atoms); `None` if the formula is temporal.
    pub fn eval_label(&self, label: &BTreeSet<String>) -> Option<bool> {
        Some(match self {
            True => true,
            False => false,
            Atom(p) => label.contains(p),
            Not(f) => !f.eval_label(label)?,
            And(a, b) => a.eval_label(label)? && b.eval_label(label)?,
            Or(a, b) => a.eval_label(label)? || b.eval_label(label)?,
            Implies(a, b) => !a.eval_label(label)? || b.eval_label(label)?,
            _ => return None,
        })
    }

    /// Immediate subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            True | False | Atom(_) => vec![],
            Not(f) | AX(f) | EX(f) | AG(f) | EG(f) | AF(f) | EF(f) => vec![f],
            And(a, b) | Or(a, b) | Implies(a, b) | AU(a, b) | EU(a, b) => vec![a, b],
        }
    }

    /// All subformulas (including `self`), children before parents, without
    /// duplicates.
    pub fn subformulas(&self) -> Vec<Formula> {
        let mut out: Vec<Formula> = Vec::new();
        fn walk(f: &Formula, out: &mut Vec<Formula>) {
            for c in f.children() {
                walk(c, out);
            }
            if !out.contains(f) {
                out.push(f.clone());
            }
        }
        walk(self, &mut out);
        out
    }
}

/// Negation with double-negation elimination: `neg(¬f) = f`.
pub fn neg(f: Formula) -> Formula {
    match f {
        Not(inner) => *inner,
        other => Formula::not(other),
    }
}

/// Rewrites `f` into the core fragment built from propositional connectives,
/// `EX`, `E[ U ]`, `AF` and `¬`, eliminating `→` and double negations.
///
/// The rewrites are `AX φ ≡ ¬EX¬φ`, `A[φ1 U φ2] ≡ ¬(E[¬φ2 U (¬φ1 ∧ ¬φ2)] ∨ EG¬φ2)`,
/// `EF φ ≡ E[⊤ U φ]`, `EG φ ≡ ¬AF¬φ` and `AG φ ≡ ¬E[⊤ U ¬φ]`.
pub fn normalize(f: &Formula) -> Formula {
    match f {
        True | False | Atom(_) => f.clone(),
        Not(g) => neg(normalize(g)),
        And(a, b) => Formula::and(normalize(a), normalize(b)),
        Or(a, b) => Formula::or(normalize(a), normalize(b)),
        Implies(a, b) => Formula::or(neg(normalize(a)), normalize(b)),
        AX(g) => neg(Formula::ex(neg(normalize(g)))),
        EX(g) => Formula::ex(normalize(g)),
        AG(g) => neg(Formula::eu(True, neg(normalize(g)))),
        EG(g) => neg(Formula::af(neg(normalize(g)))),
        AF(g) => Formula::af(normalize(g)),
        EF(g) => Formula::eu(True, normalize(g)),
        AU(a, b) => {
            let (na, nb) = (normalize(a), normalize(b));
            let until = Formula::eu(neg(nb.clone()), Formula::and(neg(na), neg(nb.clone())));
            let never = neg(Formula::af(nb));
            neg(Formula::or(until, never))
        }
        EU(a, b) => Formula::eu(normalize(a), normalize(b)),
    }
}

/// True iff `f` is an atomic member of the class of formulas without nested
/// temporal operators: one temporal operator applied to propositional
/// arguments.
pub fn is_atomic_aeclass(f: &Formula) -> bool {
    match f {
        AX(g) | AG(g) | AF(g) | EX(g) | EG(g) | EF(g) => g.is_propositional(),
        AU(a, b) | EU(a, b) => a.is_propositional() && b.is_propositional(),
        _ => false,
    }
}

/// If `f` is built from atomic members of the nesting-free class by `∧` and
/// `∨` only, returns its atomic members (left to right, without
/// duplicates); otherwise `None`.
pub fn classify_aeclass(f: &Formula) -> Option<Vec<Formula>> {
    fn walk(f: &Formula, out: &mut Vec<Formula>) -> bool {
        match f {
            And(a, b) | Or(a, b) => walk(a, out) && walk(b, out),
            g if is_atomic_aeclass(g) => {
                if !out.contains(g) {
                    out.push(g.clone());
                }
                true
            }
            _ => false,
        }
    }
    let mut out = Vec::new();
    walk(f, &mut out).then_some(out)
}

/// Node count of the AST.
pub fn formula_size(f: &Formula) -> usize {
    f.size()
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn precedence(f: &Formula) -> u8 {
    match f {
        Implies(..) => 1,
        Or(..) => 2,
        And(..) => 3,
        _ => 4,
    }
}

fn write_operand(out: &mut fmt::Formatter<'_>, f: &Formula, parens: bool) -> fmt::Result {
    if parens {
        write!(out, "({f})")
    } else {
        write!(out, "{f}")
    }
}

fn write_unary(out: &mut fmt::Formatter<'_>, op: &str, f: &Formula) -> fmt::Result {
    if precedence(f) < 4 {
        write!(out, "{op}({f})")
    } else {
        write!(out, "{op} {f}")
    }
}

impl fmt::Display for Formula {
    /// Canonical printer; `parse(f.to_string()) == f` for every formula whose
    /// atom names are valid identifiers.
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            True => write!(out, "true"),
            False => write!(out, "false"),
            Atom(p) => write!(out, "{p}"),
            Not(f) => {
                write!(out, "!")?;
                write_operand(out, f, precedence(f) < 4)
            }
            And(a, b) => {
                write_operand(out, a, precedence(a) < 3)?;
                write!(out, " & ")?;
                write_operand(out, b, precedence(b) <= 3)
            }
            Or(a, b) => {
                write_operand(out, a, precedence(a) < 2)?;
                write!(out, " | ")?;
                write_operand(out, b, precedence(b) <= 2)
            }
            Implies(a, b) => {
                write_operand(out, a, precedence(a) <= 1)?;
                write!(out, " -> ")?;
                write_operand(out, b, false)
            }
            AX(f) => write_unary(out, "AX", f),
            EX(f) => write_unary(out, "EX", f),
            AG(f) => write_unary(out, "AG", f),
            EG(f) => write_unary(out, "EG", f),
            AF(f) => write_unary(out, "AF", f),
            EF(f) => write_unary(out, "EF", f),
            AU(a, b) => write!(out, "A[{a} U {b}]"),
            EU(a, b) => write!(out, "E[{a} U {b}]"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Error raised by [`parse`]; `position` is a character offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula syntax error at position {position}: {message}")]
pub struct ParseError {
    /// Character offset of the offending token.
    pub position: usize,
    /// Human-readable description.
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
    LBracket,
    RBracket,
    TrueLit,
    FalseLit,
    Unary(&'static str),
    PathA,
    PathE,
    Until,
    Ident(String),
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Not => write!(f, "'!'"),
            Token::And => write!(f, "'&'"),
            Token::Or => write!(f, "'|'"),
            Token::Arrow => write!(f, "'->'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::LBracket => write!(f, "'['"),
            Token::RBracket => write!(f, "']'"),
            Token::TrueLit => write!(f, "'true'"),
            Token::FalseLit => write!(f, "'false'"),
            Token::Unary(op) => write!(f, "'{op}'"),
            Token::PathA => write!(f, "'A'"),
            Token::PathE => write!(f, "'E'"),
            Token::Until => write!(f, "'U'"),
            Token::Ident(name) => write!(f, "atom '{name}'"),
            Token::End => write!(f, "end of input"),
        }
    }
}

/// Reserved words that cannot be used as atom names.
pub const KEYWORDS: &[&str] = &["AX", "EX", "AG", "EG", "AF", "EF", "A", "E", "U", "true", "false"];

/// True iff `name` is a legal atom name: nonempty, over `[A-Za-z0-9_.]`, and
/// not a keyword.
pub fn is_valid_atom_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !KEYWORDS.contains(&name)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '!' | '¬' => Token::Not,
            '&' | '∧' => Token::And,
            '|' | '∨' => Token::Or,
            '→' => Token::Arrow,
            '⊤' => Token::TrueLit,
            '⊥' => Token::FalseLit,
            '(' => Token::LParen,
            ')' => Token::RParen,
            '[' => Token::LBracket,
            ']' => Token::RBracket,
            '-' if chars.get(i + 1) == Some(&'>') => {
                i += 1;
                Token::Arrow
            }
            c if is_ident_char(c) => {
                while i + 1 < chars.len() && is_ident_char(chars[i + 1]) {
                    i += 1;
                }
                let word: String = chars[start..=i].iter().collect();
                match word.as_str() {
                    "AX" => Token::Unary("AX"),
                    "EX" => Token::Unary("EX"),
                    "AG" => Token::Unary("AG"),
                    "EG" => Token::Unary("EG"),
                    "AF" => Token::Unary("AF"),
                    "EF" => Token::Unary("EF"),
                    "A" => Token::PathA,
                    "E" => Token::PathE,
                    "U" => Token::Until,
                    "true" => Token::TrueLit,
                    "false" => Token::FalseLit,
                    _ => Token::Ident(word),
                }
            }
            other => {
                return Err(ParseError {
                    position: start,
                    message: format!("unknown token '{other}'"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, chars.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            position: self.offset(),
            message: format!("expected {expected}, found {}", self.peek()),
        }
    }

    fn expect(&mut self, tok: Token, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.implies()
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Token::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Token::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Token::And {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Token::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Token::Unary(op) => {
                self.bump();
                let f = self.unary()?;
                Ok(match op {
                    "AX" => Formula::ax(f),
                    "EX" => Formula::ex(f),
                    "AG" => Formula::ag(f),
                    "EG" => Formula::eg(f),
                    "AF" => Formula::af(f),
                    _ => Formula::ef(f),
                })
            }
            tok @ (Token::PathA | Token::PathE) => {
                self.bump();
                self.expect(Token::LBracket, "'[' after path quantifier")?;
                let lhs = self.formula()?;
                self.expect(Token::Until, "'U'")?;
                let rhs = self.formula()?;
                self.expect(Token::RBracket, "']'")?;
                Ok(if tok == Token::PathA { Formula::au(lhs, rhs) } else { Formula::eu(lhs, rhs) })
            }
            Token::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Token::RParen, "')'")?;
                Ok(f)
            }
            Token::TrueLit => {
                self.bump();
                Ok(True)
            }
            Token::FalseLit => {
                self.bump();
                Ok(False)
            }
            Token::Ident(name) => {
                self.bump();
                Ok(Atom(name))
            }
            _ => Err(self.error("a formula")),
        }
    }
}

/// Parses a formula in the surface syntax described in the module docs.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError { position: 0, message: "empty formula".into() });
    }
    let mut parser = Parser { tokens: tokenize(text)?, pos: 0 };
    let f = parser.formula()?;
    if *parser.peek() != Token::End {
        return Err(parser.error("end of input"));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
