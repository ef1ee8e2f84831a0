//! Surface syntax: tokenizer, parser and desugaring.
//!
//! The reader recognizes the core forms (`lambda`, `if`, `define`, `quote`)
//! plus the sugar forms `let`, `cond`, `case` and `(define (f a) e)`, all of
//! which `desugar` rewrites into core forms. Quoted data is parsed into plain
//! list structure and never desugared.

use std::fmt;

use thiserror::Error;

use crate::expr::{CondClause, Expr, ExprKind, Formals, NodeIdGen, Position, Symbol};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TokenKind {
    Open,
    Close,
    QuoteMark,
    Symbol,
    Integer,
    Real,
    Boolean,
    Character,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub pos: Position,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Stage {
    Lex,
    Parse,
    Desugar,
}

#[derive(Error, Debug, Clone)]
#[error("{stage:?} error at {pos}: {message}", stage = stage, pos = pos)]
pub struct ReadError {
    pub stage: Stage,
    pub pos: Position,
    pub message: String,
}

impl ReadError {
    fn lex(pos: Position, message: impl Into<String>) -> Self {
        ReadError { stage: Stage::Lex, pos, message: message.into() }
    }

    fn parse(pos: Position, message: impl Into<String>) -> Self {
        ReadError { stage: Stage::Parse, pos, message: message.into() }
    }

    fn desugar(pos: Position, message: impl Into<String>) -> Self {
        ReadError { stage: Stage::Desugar, pos, message: message.into() }
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '\'' | ';' | '#')
}

fn is_illegal(c: char) -> bool {
    matches!(c, '"' | ',' | '`' | '[' | ']' | '{' | '}')
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ReadError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! advance {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Position { line, col };
        match c {
            _ if c.is_whitespace() => advance!(),
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance!();
                }
            }
            '(' => {
                tokens.push(Token { kind: TokenKind::Open, text: "(".into(), pos });
                advance!();
            }
            ')' => {
                tokens.push(Token { kind: TokenKind::Close, text: ")".into(), pos });
                advance!();
            }
            '\'' => {
                tokens.push(Token { kind: TokenKind::QuoteMark, text: "'".into(), pos });
                advance!();
            }
            '#' => {
                advance!();
                if i >= chars.len() {
                    return Err(ReadError::lex(pos, "dangling '#'"));
                }
                match chars[i] {
                    't' => {
                        tokens.push(Token { kind: TokenKind::Boolean, text: "#t".into(), pos });
                        advance!();
                    }
                    'f' => {
                        tokens.push(Token { kind: TokenKind::Boolean, text: "#f".into(), pos });
                        advance!();
                    }
                    '\\' => {
                        advance!();
                        let start = i;
                        while i < chars.len() && !is_delimiter(chars[i]) && !is_illegal(chars[i]) {
                            advance!();
                        }
                        let name: String = chars[start..i].iter().collect();
                        let text = format!("#\\{}", name);
                        match name.chars().count() {
                            0 => return Err(ReadError::lex(pos, "empty character literal")),
                            1 => tokens.push(Token { kind: TokenKind::Character, text, pos }),
                            _ => match name.as_str() {
                                "space" | "newline" | "tab" => {
                                    tokens.push(Token { kind: TokenKind::Character, text, pos })
                                }
                                other => {
                                    return Err(ReadError::lex(
                                        pos,
                                        format!("unknown character name '{}'", other),
                                    ))
                                }
                            },
                        }
                    }
                    other => {
                        return Err(ReadError::lex(pos, format!("unknown '#' syntax '#{}'", other)))
                    }
                }
            }
            _ if is_illegal(c) => {
                return Err(ReadError::lex(pos, format!("illegal character '{}'", c)));
            }
            _ => {
                let start = i;
                while i < chars.len() && !is_delimiter(chars[i]) {
                    if is_illegal(chars[i]) {
                        return Err(ReadError::lex(
                            Position { line, col },
                            format!("illegal character '{}'", chars[i]),
                        ));
                    }
                    advance!();
                }
                let text: String = chars[start..i].iter().collect();
                let kind = classify_atom(&text, pos)?;
                tokens.push(Token { kind, text, pos });
            }
        }
    }
    Ok(tokens)
}

/// Numbers: optional sign, digits, optional fraction and exponent. Anything
/// that starts like a number but fails to parse as one is a lex error rather
/// than a strange symbol.
fn classify_atom(text: &str, pos: Position) -> Result<TokenKind, ReadError> {
    if text == "true" || text == "false" {
        return Ok(TokenKind::Boolean);
    }
    let body = text.strip_prefix('-').or_else(|| text.strip_prefix('+')).unwrap_or(text);
    let starts_numeric = body.chars().next().map_or(false, |c| c.is_ascii_digit());
    if !starts_numeric {
        return Ok(TokenKind::Symbol);
    }
    if body.chars().all(|c| c.is_ascii_digit()) {
        if text.parse::<i64>().is_err() {
            return Err(ReadError::lex(pos, format!("integer literal out of range: {}", text)));
        }
        return Ok(TokenKind::Integer);
    }
    if text.parse::<f64>().is_ok() {
        return Ok(TokenKind::Real);
    }
    Err(ReadError::lex(pos, format!("malformed number '{}'", text)))
}

pub struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    ids: &'a mut NodeIdGen,
}

impl<'a> Parser<'a> {
    pub fn new(tokens: &'a [Token], ids: &'a mut NodeIdGen) -> Self {
        Parser { tokens, pos: 0, ids }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_pos(&self) -> Position {
        self.tokens.last().map(|t| t.pos).unwrap_or_default()
    }

    fn mk(&mut self, pos: Position, kind: ExprKind) -> Expr {
        Expr::new(self.ids.fresh(), pos, kind)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub fn parse_form(&mut self) -> Result<Expr, ReadError> {
        let token = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(ReadError::parse(self.end_pos(), "unexpected end of input")),
        };
        match token.kind {
            TokenKind::Close => Err(ReadError::parse(token.pos, "unbalanced ')'")),
            TokenKind::QuoteMark => {
                self.next();
                let datum = self.parse_datum()?;
                Ok(self.mk(token.pos, ExprKind::Quote(datum)))
            }
            TokenKind::Open => {
                self.next();
                self.parse_compound(token.pos)
            }
            _ => {
                self.next();
                self.atom(&token)
            }
        }
    }

    fn atom(&mut self, token: &Token) -> Result<Expr, ReadError> {
        let kind = match token.kind {
            TokenKind::Boolean => ExprKind::Bool(token.text == "true" || token.text == "#t"),
            TokenKind::Integer => ExprKind::Int(token.text.parse().unwrap()),
            TokenKind::Real => ExprKind::Real(token.text.parse().unwrap()),
            TokenKind::Character => {
                let name = &token.text[2..];
                let c = match name {
                    "space" => ' ',
                    "newline" => '\n',
                    "tab" => '\t',
                    _ => name.chars().next().unwrap(),
                };
                ExprKind::Char(c)
            }
            TokenKind::Symbol => ExprKind::Var(token.text.as_str().into()),
            _ => unreachable!("atom() called on structural token"),
        };
        Ok(self.mk(token.pos, kind))
    }

    /// After an `(` in expression position.
    fn parse_compound(&mut self, open_pos: Position) -> Result<Expr, ReadError> {
        let head_is = |this: &Self, word: &str| {
            matches!(this.peek(), Some(t) if t.kind == TokenKind::Symbol && t.text == word)
        };

        if head_is(self, "lambda") {
            self.next();
            return self.parse_lambda(open_pos);
        }
        if head_is(self, "if") {
            self.next();
            let cond = self.parse_form()?;
            let then = self.parse_form()?;
            let els = self.parse_form()?;
            self.expect_close(open_pos, "if")?;
            return Ok(self.mk(open_pos, ExprKind::If { cond, then, els }));
        }
        if head_is(self, "define") {
            self.next();
            return self.parse_define(open_pos);
        }
        if head_is(self, "quote") {
            self.next();
            let datum = self.parse_datum()?;
            self.expect_close(open_pos, "quote")?;
            return Ok(self.mk(open_pos, ExprKind::Quote(datum)));
        }
        if head_is(self, "let") {
            if let Some(expr) = self.try_parse_let(open_pos)? {
                return Ok(expr);
            }
        }
        if head_is(self, "cond") {
            if let Some(expr) = self.try_parse_cond(open_pos)? {
                return Ok(expr);
            }
        }
        if head_is(self, "case") {
            if let Some(expr) = self.try_parse_case(open_pos)? {
                return Ok(expr);
            }
        }

        let mut items = Vec::new();
        loop {
            match self.peek() {
                None => return Err(ReadError::parse(open_pos, "unbalanced '(': missing ')'")),
                Some(t) if t.kind == TokenKind::Close => {
                    self.next();
                    break;
                }
                Some(_) => items.push(self.parse_form()?),
            }
        }
        if items.is_empty() {
            return Err(ReadError::parse(open_pos, "empty application '()'"));
        }
        Ok(self.mk(open_pos, ExprKind::App(items)))
    }

    fn expect_close(&mut self, open_pos: Position, what: &str) -> Result<(), ReadError> {
        match self.next() {
            Some(t) if t.kind == TokenKind::Close => Ok(()),
            Some(t) => Err(ReadError::parse(t.pos, format!("malformed {} form", what))),
            None => Err(ReadError::parse(open_pos, "unbalanced '(': missing ')'")),
        }
    }

    fn parse_symbol(&mut self, what: &str) -> Result<(Symbol, Position), ReadError> {
        match self.next() {
            Some(t) if t.kind == TokenKind::Symbol => Ok((t.text.as_str().into(), t.pos)),
            Some(t) => Err(ReadError::parse(t.pos, format!("expected a symbol in {}", what))),
            None => Err(ReadError::parse(self.end_pos(), "unexpected end of input")),
        }
    }

    fn parse_lambda(&mut self, open_pos: Position) -> Result<Expr, ReadError> {
        let formals = match self.peek() {
            Some(t) if t.kind == TokenKind::Open => {
                let list_pos = t.pos;
                self.next();
                let mut names: Vec<Symbol> = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == TokenKind::Close => {
                            self.next();
                            break;
                        }
                        Some(t) if t.kind == TokenKind::Symbol => {
                            let name: Symbol = t.text.as_str().into();
                            if names.contains(&name) {
                                return Err(ReadError::parse(
                                    t.pos,
                                    format!("duplicate formal '{}'", name),
                                ));
                            }
                            names.push(name);
                            self.next();
                        }
                        Some(t) => {
                            return Err(ReadError::parse(t.pos, "formals must be symbols"))
                        }
                        None => {
                            return Err(ReadError::parse(list_pos, "unbalanced formals list"))
                        }
                    }
                }
                Formals::Fixed(names)
            }
            Some(t) if t.kind == TokenKind::Symbol => {
                let name = t.text.as_str().into();
                self.next();
                Formals::Variadic(name)
            }
            Some(t) => return Err(ReadError::parse(t.pos, "malformed lambda formals")),
            None => return Err(ReadError::parse(open_pos, "unexpected end of input")),
        };
        let body = self.parse_form()?;
        self.expect_close(open_pos, "lambda")?;
        Ok(self.mk(open_pos, ExprKind::Lambda { formals, body }))
    }

    fn parse_define(&mut self, open_pos: Position) -> Result<Expr, ReadError> {
        match self.peek() {
            // `(define (f a b) e)` sugar: kept as a Define of a Lambda here so
            // that desugaring has nothing special to do for it.
            Some(t) if t.kind == TokenKind::Open => {
                let sig_pos = t.pos;
                self.next();
                let (name, _) = self.parse_symbol("define signature")?;
                let mut params: Vec<Symbol> = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.kind == TokenKind::Close => {
                            self.next();
                            break;
                        }
                        Some(t) if t.kind == TokenKind::Symbol => {
                            let p: Symbol = t.text.as_str().into();
                            if params.contains(&p) {
                                return Err(ReadError::parse(
                                    t.pos,
                                    format!("duplicate formal '{}'", p),
                                ));
                            }
                            params.push(p);
                            self.next();
                        }
                        Some(t) => {
                            return Err(ReadError::parse(t.pos, "formals must be symbols"))
                        }
                        None => return Err(ReadError::parse(sig_pos, "unbalanced signature")),
                    }
                }
                let body = self.parse_form()?;
                self.expect_close(open_pos, "define")?;
                let lambda = self.mk(
                    sig_pos,
                    ExprKind::Lambda { formals: Formals::Fixed(params), body },
                );
                Ok(self.mk(open_pos, ExprKind::Define { name, value: lambda }))
            }
            Some(t) if t.kind == TokenKind::Symbol => {
                let (name, _) = self.parse_symbol("define")?;
                let value = self.parse_form()?;
                self.expect_close(open_pos, "define")?;
                Ok(self.mk(open_pos, ExprKind::Define { name, value }))
            }
            Some(t) => Err(ReadError::parse(t.pos, "malformed define")),
            None => Err(ReadError::parse(open_pos, "unexpected end of input")),
        }
    }

    /// `let` is only treated as sugar when it has the right shape; otherwise
    /// the form is left as an application so the desugar stage reports it.
    fn try_parse_let(&mut self, open_pos: Position) -> Result<Option<Expr>, ReadError> {
        let save = self.pos;
        self.next(); // let
        let ok = matches!(self.peek(), Some(t) if t.kind == TokenKind::Open);
        if !ok {
            self.pos = save;
            return Ok(None);
        }
        self.next(); // bindings open
        let mut bindings = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Close => {
                    self.next();
                    break;
                }
                Some(t) if t.kind == TokenKind::Open => {
                    self.next();
                    let name = match self.peek() {
                        Some(t) if t.kind == TokenKind::Symbol => {
                            let n: Symbol = t.text.as_str().into();
                            self.next();
                            n
                        }
                        _ => {
                            self.pos = save;
                            return Ok(None);
                        }
                    };
                    let def = self.parse_form()?;
                    match self.next() {
                        Some(t) if t.kind == TokenKind::Close => bindings.push((name, def)),
                        _ => {
                            self.pos = save;
                            return Ok(None);
                        }
                    }
                }
                _ => {
                    self.pos = save;
                    return Ok(None);
                }
            }
        }
        let body = self.parse_form()?;
        match self.next() {
            Some(t) if t.kind == TokenKind::Close => {}
            _ => {
                self.pos = save;
                return Ok(None);
            }
        }
        Ok(Some(self.mk(open_pos, ExprKind::Let { bindings, body })))
    }

    fn try_parse_cond(&mut self, open_pos: Position) -> Result<Option<Expr>, ReadError> {
        let save = self.pos;
        self.next(); // cond
        let mut clauses = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Close => {
                    self.next();
                    break;
                }
                Some(t) if t.kind == TokenKind::Open => {
                    self.next();
                    let is_else =
                        matches!(self.peek(), Some(t) if t.kind == TokenKind::Symbol && t.text == "else");
                    if is_else {
                        self.next();
                        let e = self.parse_form()?;
                        match self.next() {
                            Some(t) if t.kind == TokenKind::Close => {
                                clauses.push(CondClause::Else(e))
                            }
                            _ => {
                                self.pos = save;
                                return Ok(None);
                            }
                        }
                    } else {
                        let test = self.parse_form()?;
                        let e = self.parse_form()?;
                        match self.next() {
                            Some(t) if t.kind == TokenKind::Close => {
                                clauses.push(CondClause::Test(test, e))
                            }
                            _ => {
                                self.pos = save;
                                return Ok(None);
                            }
                        }
                    }
                }
                _ => {
                    self.pos = save;
                    return Ok(None);
                }
            }
        }
        if clauses.is_empty() {
            self.pos = save;
            return Ok(None);
        }
        Ok(Some(self.mk(open_pos, ExprKind::Cond { clauses })))
    }

    fn try_parse_case(&mut self, open_pos: Position) -> Result<Option<Expr>, ReadError> {
        let save = self.pos;
        self.next(); // case
        let key = match self.peek() {
            Some(t) if t.kind != TokenKind::Close => self.parse_form()?,
            _ => {
                self.pos = save;
                return Ok(None);
            }
        };
        let mut clauses = Vec::new();
        let mut default = None;
        loop {
            match self.peek() {
                Some(t) if t.kind == TokenKind::Close => {
                    self.next();
                    break;
                }
                Some(t) if t.kind == TokenKind::Open => {
                    self.next();
                    let is_else =
                        matches!(self.peek(), Some(t) if t.kind == TokenKind::Symbol && t.text == "else");
                    if is_else {
                        self.next();
                        let e = self.parse_form()?;
                        match self.next() {
                            Some(t) if t.kind == TokenKind::Close => default = Some(e),
                            _ => {
                                self.pos = save;
                                return Ok(None);
                            }
                        }
                        continue;
                    }
                    let datums_open =
                        matches!(self.peek(), Some(t) if t.kind == TokenKind::Open);
                    if !datums_open {
                        self.pos = save;
                        return Ok(None);
                    }
                    self.next();
                    let mut datums = Vec::new();
                    loop {
                        match self.peek() {
                            Some(t) if t.kind == TokenKind::Close => {
                                self.next();
                                break;
                            }
                            Some(_) => datums.push(self.parse_datum()?),
                            None => {
                                self.pos = save;
                                return Ok(None);
                            }
                        }
                    }
                    let e = self.parse_form()?;
                    match self.next() {
                        Some(t) if t.kind == TokenKind::Close => clauses.push((datums, e)),
                        _ => {
                            self.pos = save;
                            return Ok(None);
                        }
                    }
                }
                _ => {
                    self.pos = save;
                    return Ok(None);
                }
            }
        }
        if clauses.is_empty() && default.is_none() {
            self.pos = save;
            return Ok(None);
        }
        Ok(Some(self.mk(open_pos, ExprKind::Case { key, clauses, default })))
    }

    /// Quoted data: atoms, symbols and plain lists. Special forms are not
    /// recognized here; `'(lambda (x) x)` is just a list of symbols.
    pub fn parse_datum(&mut self) -> Result<Expr, ReadError> {
        let token = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(ReadError::parse(self.end_pos(), "unexpected end of input")),
        };
        match token.kind {
            TokenKind::Close => Err(ReadError::parse(token.pos, "unbalanced ')'")),
            TokenKind::QuoteMark => {
                self.next();
                let inner = self.parse_datum()?;
                let q = self.mk(token.pos, ExprKind::Var("quote".into()));
                Ok(self.mk(token.pos, ExprKind::App(vec![q, inner])))
            }
            TokenKind::Open => {
                self.next();
                let mut items = Vec::new();
                loop {
                    match self.peek() {
                        None => {
                            return Err(ReadError::parse(token.pos, "unbalanced '(': missing ')'"))
                        }
                        Some(t) if t.kind == TokenKind::Close => {
                            self.next();
                            break;
                        }
                        Some(_) => items.push(self.parse_datum()?),
                    }
                }
                if items.is_empty() {
                    Ok(self.mk(token.pos, ExprKind::Nil))
                } else {
                    Ok(self.mk(token.pos, ExprKind::App(items)))
                }
            }
            _ => {
                self.next();
                self.atom(&token)
            }
        }
    }
}

/// True when `source` tokenizes cleanly but stops in the middle of a form,
/// so further input could complete it. Lets interactive front ends tell a
/// half-typed form from a genuine mistake.
pub fn input_is_incomplete(source: &str) -> bool {
    let Ok(tokens) = tokenize(source) else { return false };
    let mut depth: u32 = 0;
    for t in &tokens {
        match t.kind {
            TokenKind::Open => depth += 1,
            TokenKind::Close => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    depth > 0 || matches!(tokens.last(), Some(t) if t.kind == TokenKind::QuoteMark)
}

/// Parse a whole source string into raw (pre-desugar) top-level forms.
pub fn parse(source: &str, ids: &mut NodeIdGen) -> Result<Vec<Expr>, ReadError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser::new(&tokens, ids);
    let mut forms = Vec::new();
    while !parser.at_end() {
        forms.push(parser.parse_form()?);
    }
    Ok(forms)
}

/// Rewrite sugar into the core forms. Quoted data passes through untouched.
pub fn desugar(expr: &Expr, ids: &mut NodeIdGen) -> Result<Expr, ReadError> {
    let pos = expr.pos();
    let mk = |ids: &mut NodeIdGen, kind| Expr::new(ids.fresh(), pos, kind);
    match expr.kind() {
        ExprKind::Bool(_)
        | ExprKind::Int(_)
        | ExprKind::Real(_)
        | ExprKind::Char(_)
        | ExprKind::Nil
        | ExprKind::Var(_)
        | ExprKind::Quote(_) => Ok(expr.clone()),
        ExprKind::App(items) => {
            if let ExprKind::Var(head) = items[0].kind() {
                if matches!(&**head, "let" | "cond" | "case") {
                    return Err(ReadError::desugar(
                        pos,
                        format!("malformed {} form", head),
                    ));
                }
            }
            let items = items
                .iter()
                .map(|e| desugar(e, ids))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(mk(ids, ExprKind::App(items)))
        }
        ExprKind::Lambda { formals, body } => {
            let body = desugar(body, ids)?;
            Ok(mk(ids, ExprKind::Lambda { formals: formals.clone(), body }))
        }
        ExprKind::If { cond, then, els } => {
            let cond = desugar(cond, ids)?;
            let then = desugar(then, ids)?;
            let els = desugar(els, ids)?;
            Ok(mk(ids, ExprKind::If { cond, then, els }))
        }
        ExprKind::Define { name, value } => {
            let value = desugar(value, ids)?;
            Ok(mk(ids, ExprKind::Define { name: name.clone(), value }))
        }
        ExprKind::Let { bindings, body } => {
            // Simultaneous binding: one application of one lambda.
            let mut names = Vec::new();
            for (name, _) in bindings {
                if names.contains(name) {
                    return Err(ReadError::desugar(
                        pos,
                        format!("duplicate let binding '{}'", name),
                    ));
                }
                names.push(name.clone());
            }
            let body = desugar(body, ids)?;
            let lambda = mk(ids, ExprKind::Lambda { formals: Formals::Fixed(names), body });
            let mut items = vec![lambda];
            for (_, def) in bindings {
                items.push(desugar(def, ids)?);
            }
            Ok(mk(ids, ExprKind::App(items)))
        }
        ExprKind::Cond { clauses } => {
            let mut tail = mk(ids, ExprKind::Var("error".into()));
            let mut saw_else = false;
            for clause in clauses.iter().rev() {
                match clause {
                    CondClause::Else(e) => {
                        if saw_else {
                            return Err(ReadError::desugar(pos, "cond has two else clauses"));
                        }
                        saw_else = true;
                        tail = desugar(e, ids)?;
                    }
                    CondClause::Test(t, e) => {
                        let cond = desugar(t, ids)?;
                        let then = desugar(e, ids)?;
                        tail = mk(ids, ExprKind::If { cond, then, els: tail });
                    }
                }
            }
            Ok(tail)
        }
        ExprKind::Case { key, clauses, default } => {
            // ((lambda (%case-N) if-chain) key), comparing with `=` against
            // each clause datum. A datum written 'x means the symbol x.
            let key = desugar(key, ids)?;
            let var: Symbol = format!("%case-{}", expr.id().0).into();
            let keyref = |ids: &mut NodeIdGen| mk(ids, ExprKind::Var(var.clone()));
            let mut tail = match default {
                Some(e) => desugar(e, ids)?,
                None => mk(ids, ExprKind::Var("error".into())),
            };
            for (datums, e) in clauses.iter().rev() {
                let then = desugar(e, ids)?;
                let mut test: Option<Expr> = None;
                for datum in datums {
                    let datum = strip_datum_quote(datum);
                    let eq = mk(ids, ExprKind::Var("=".into()));
                    let k = keyref(ids);
                    let quoted = mk(ids, ExprKind::Quote(datum));
                    let cmp = mk(ids, ExprKind::App(vec![eq, k, quoted]));
                    test = Some(match test {
                        None => cmp,
                        Some(prev) => {
                            let or = mk(ids, ExprKind::Var("or".into()));
                            mk(ids, ExprKind::App(vec![or, prev, cmp]))
                        }
                    });
                }
                let cond = match test {
                    Some(t) => t,
                    None => continue,
                };
                tail = mk(ids, ExprKind::If { cond, then, els: tail });
            }
            let lambda = mk(
                ids,
                ExprKind::Lambda { formals: Formals::Fixed(vec![var]), body: tail },
            );
            Ok(mk(ids, ExprKind::App(vec![lambda, key])))
        }
    }
}

/// In a case clause, `('rain-str)` and `(rain-str)` both denote the symbol.
fn strip_datum_quote(datum: &Expr) -> Expr {
    if let ExprKind::App(items) = datum.kind() {
        if items.len() == 2 {
            if let ExprKind::Var(head) = items[0].kind() {
                if &**head == "quote" {
                    return items[1].clone();
                }
            }
        }
    }
    datum.clone()
}

/// The whole pipeline: tokenize, parse, desugar every top-level form.
pub fn read_program(source: &str) -> Result<Vec<Expr>, ReadError> {
    let mut ids = NodeIdGen::new();
    read_program_with(source, &mut ids)
}

pub fn read_program_with(source: &str, ids: &mut NodeIdGen) -> Result<Vec<Expr>, ReadError> {
    let raw = parse(source, ids)?;
    raw.iter().map(|form| desugar(form, ids)).collect()
}

/// Read exactly one expression.
pub fn read_expr(source: &str) -> Result<Expr, ReadError> {
    let forms = read_program(source)?;
    match forms.len() {
        1 => Ok(forms.into_iter().next().unwrap()),
        n => Err(ReadError::parse(
            Position::default(),
            format!("expected one expression, found {}", n),
        )),
    }
}
