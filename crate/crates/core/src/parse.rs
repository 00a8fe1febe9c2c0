//! Lexer and recursive-descent parser for `.imp` programs. The type grammar
//! and the token stream are shared with the source-language parser.

use std::fmt;

use crate::syntax::{Expr, Interface, Name, PrimOp, Program, RuleType, Type};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Upper(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Question,
    Backslash,
    Arrow,
    FatArrow,
    Plus,
    AndAnd,
    PlusPlus,
    Equals,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Upper(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Eof => f.write_str("end of input"),
            t => {
                let s = match t {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrack => "[",
                    Tok::RBrack => "]",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Comma => ",",
                    Tok::Dot => ".",
                    Tok::Colon => ":",
                    Tok::Question => "?",
                    Tok::Backslash => "\\",
                    Tok::Arrow => "->",
                    Tok::FatArrow => "=>",
                    Tok::Plus => "+",
                    Tok::AndAnd => "&&",
                    Tok::PlusPlus => "++",
                    _ => "=",
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        "E0101"
    }
}

const KEYWORDS: &[&str] = &[
    "forall", "rule", "with", "implicit", "in", "if", "then", "else", "true", "false", "let", "interface", "nil",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub type Spanned = (Tok, (usize, usize));

pub fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, m: String| ParseError { line, col, message: m };
    while i < chars.len() {
        let c = chars[i];
        let pos = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        let next = chars.get(i + 1).copied();
        if c == '-' && next == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two = |a: char, b: char| c == a && next == Some(b);
        let tok = if two('-', '>') {
            bump(2, &mut i, &mut col);
            Tok::Arrow
        } else if two('=', '>') {
            bump(2, &mut i, &mut col);
            Tok::FatArrow
        } else if two('&', '&') {
            bump(2, &mut i, &mut col);
            Tok::AndAnd
        } else if two('+', '+') {
            bump(2, &mut i, &mut col);
            Tok::PlusPlus
        } else if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            bump(1, &mut i, &mut col);
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump(1, &mut i, &mut col);
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Int(s.parse().map_err(|_| err(pos.0, pos.1, format!("integer literal `{s}` out of range")))?)
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                bump(1, &mut i, &mut col);
            }
            let s: String = chars[start..i].iter().collect();
            if c.is_uppercase() {
                Tok::Upper(s)
            } else {
                Tok::Ident(s)
            }
        } else if c == '"' {
            bump(1, &mut i, &mut col);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(pos.0, pos.1, "unterminated string literal".into())),
                    Some('"') => {
                        bump(1, &mut i, &mut col);
                        break;
                    }
                    Some('\\') => {
                        let esc = chars.get(i + 1).copied();
                        s.push(match esc {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(err(line, col, "unknown escape sequence".into())),
                        });
                        bump(2, &mut i, &mut col);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump(1, &mut i, &mut col);
                    }
                }
            }
            Tok::Str(s)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                '?' => Tok::Question,
                '\\' => Tok::Backslash,
                '+' => Tok::Plus,
                '=' => Tok::Equals,
                _ => return Err(err(pos.0, pos.1, format!("unexpected character `{c}`"))),
            };
            bump(1, &mut i, &mut col);
            t
        };
        out.push((tok, pos));
    }
    out.push((Tok::Eof, (line, col)));
    Ok(out)
}

pub struct Parser {
    toks: Vec<(Tok, (usize, usize))>,
    pos: usize,
    eta: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, pos: 0, eta: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.toks[self.pos].1;
        Err(ParseError { line, col, message: message.into() })
    }

    pub fn unexpected<T>(&self, what: &str) -> Result<T, ParseError> {
        self.error(format!("expected {what}, found {}", self.peek()))
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    pub fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    pub fn upper(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Upper(s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected("a capitalized name"),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    // Types.

    pub fn ty(&mut self) -> Result<Type, ParseError> {
        if self.eat_kw("forall") {
            let mut vars = Vec::new();
            while !matches!(self.peek(), Tok::Dot) {
                vars.push(self.ident()?);
            }
            self.expect(&Tok::Dot)?;
            if vars.is_empty() {
                return self.error("`forall` needs at least one variable");
            }
            let mut dup = vars.clone();
            dup.sort();
            dup.dedup();
            if dup.len() != vars.len() {
                return self.error("repeated quantified variable");
            }
            let (ctx, head) = if *self.peek() == Tok::LBrace {
                self.context_then_head()?
            } else {
                (Vec::new(), self.ty()?)
            };
            return Ok(Type::from_rule(RuleType::new(vars, ctx, head)));
        }
        if *self.peek() == Tok::LBrace {
            let (ctx, head) = self.context_then_head()?;
            return Ok(Type::from_rule(RuleType::new(Vec::new(), ctx, head)));
        }
        let lhs = self.app_ty()?;
        if self.eat(&Tok::Arrow) {
            return Ok(Type::arrow(lhs, self.ty()?));
        }
        Ok(lhs)
    }

    fn context_then_head(&mut self) -> Result<(Vec<RuleType>, Type), ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut ctx = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                ctx.push(RuleType::simple(self.ty()?));
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        self.expect(&Tok::FatArrow)?;
        Ok((ctx, self.ty()?))
    }

    fn starts_atom_ty(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s),
            Tok::Upper(_) | Tok::LParen | Tok::LBrack => true,
            _ => false,
        }
    }

    fn app_ty(&mut self) -> Result<Type, ParseError> {
        if let Tok::Upper(n) = self.peek().clone() {
            if !matches!(n.as_str(), "Int" | "Bool" | "String") {
                self.next();
                let mut args = Vec::new();
                while self.starts_atom_ty() {
                    args.push(self.atom_ty()?);
                }
                return Ok(Type::Con(n, args));
            }
        }
        self.atom_ty()
    }

    pub fn atom_ty(&mut self) -> Result<Type, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.next();
                Ok(Type::Var(s))
            }
            Tok::Upper(s) => {
                self.next();
                Ok(match s.as_str() {
                    "Int" => Type::Int,
                    "Bool" => Type::Bool,
                    "String" => Type::Str,
                    _ => Type::Con(s, Vec::new()),
                })
            }
            Tok::LParen => {
                self.next();
                let a = self.ty()?;
                if self.eat(&Tok::Comma) {
                    let b = self.ty()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Type::pair(a, b));
                }
                self.expect(&Tok::RParen)?;
                Ok(a)
            }
            Tok::LBrack => {
                self.next();
                let a = self.ty()?;
                self.expect(&Tok::RBrack)?;
                Ok(Type::list(a))
            }
            _ => self.unexpected("a type"),
        }
    }

    pub fn type_list(&mut self) -> Result<Vec<Type>, ParseError> {
        self.expect(&Tok::LBrack)?;
        let mut ts = Vec::new();
        if !self.eat(&Tok::RBrack) {
            loop {
                ts.push(self.ty()?);
                if self.eat(&Tok::RBrack) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(ts)
    }

    /// `interface I a b = { f : T, .. }`
    pub fn interface(&mut self) -> Result<Interface, ParseError> {
        self.expect_kw("interface")?;
        let name = self.upper()?;
        let mut params = Vec::new();
        while let Tok::Ident(_) = self.peek() {
            params.push(self.ident()?);
        }
        self.expect(&Tok::Equals)?;
        self.expect(&Tok::LBrace)?;
        let mut fields = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let f = self.ident()?;
                self.expect(&Tok::Colon)?;
                fields.push((f, self.ty()?));
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(Interface { name, params, fields })
    }

    pub fn fresh_eta(&mut self) -> Name {
        self.eta += 1;
        format!("_p{}", self.eta)
    }

    // Core expressions.

    pub fn program(&mut self) -> Result<Program, ParseError> {
        let mut interfaces = Vec::new();
        while self.is_kw("interface") {
            interfaces.push(self.interface()?);
        }
        let body = self.expr()?;
        if !self.at_eof() {
            return self.unexpected("end of input");
        }
        Ok(Program { interfaces, body })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Backslash) {
            let x = self.ident()?;
            self.expect(&Tok::Colon)?;
            let t = self.ty()?;
            self.expect(&Tok::Dot)?;
            return Ok(Expr::Lam(x, t, Box::new(self.expr()?)));
        }
        if self.eat_kw("rule") {
            self.expect(&Tok::LParen)?;
            let r = RuleType::simple(self.ty()?);
            self.expect(&Tok::RParen)?;
            return Ok(Expr::RuleAbs(r, Box::new(self.expr()?)));
        }
        if self.eat_kw("implicit") {
            let args = self.rule_args()?;
            self.expect_kw("in")?;
            let body = self.expr()?;
            self.expect(&Tok::Colon)?;
            let t = self.ty()?;
            return Ok(Expr::implicit(args, body, t));
        }
        if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)));
        }
        self.and_expr()
    }

    fn rule_args(&mut self) -> Result<Vec<(Expr, RuleType)>, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut args = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let e = self.expr()?;
                self.expect(&Tok::Colon)?;
                args.push((e, RuleType::simple(self.ty()?)));
                if self.eat(&Tok::RBrace) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(args)
    }

    fn binary(
        &mut self,
        op: &Tok,
        prim: PrimOp,
        next: fn(&mut Self) -> Result<Expr, ParseError>,
    ) -> Result<Expr, ParseError> {
        let mut lhs = next(self)?;
        while self.eat(op) {
            let rhs = next(self)?;
            lhs = Expr::Prim(prim, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(&Tok::AndAnd, PrimOp::And, Self::concat_expr)
    }

    fn concat_expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(&Tok::PlusPlus, PrimOp::Concat, Self::add_expr)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(&Tok::Plus, PrimOp::Add, Self::with_expr)
    }

    fn with_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.app_expr()?;
        while self.eat_kw("with") {
            let args = self.rule_args()?;
            e = Expr::RuleApp(Box::new(e), args);
        }
        Ok(e)
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s) || matches!(s.as_str(), "true" | "false" | "nil"),
            Tok::Upper(_) | Tok::Int(_) | Tok::Str(_) | Tok::LParen | Tok::Question => true,
            _ => false,
        }
    }

    fn app_expr(&mut self) -> Result<Expr, ParseError> {
        let mut head = match self.peek().clone() {
            Tok::Ident(s) if PrimOp::from_name(&s).is_some() => {
                self.next();
                let op = PrimOp::from_name(&s).unwrap_or(PrimOp::Add);
                let mut args = Vec::new();
                while args.len() < op.arity() && self.starts_atom() {
                    args.push(self.post_expr()?);
                }
                self.saturate(op, args)?
            }
            _ => self.post_expr()?,
        };
        while self.starts_atom() {
            let arg = self.post_expr()?;
            head = Expr::app(head, arg);
        }
        Ok(head)
    }

    /// Builds a primitive application, eta-expanding monomorphic primitives
    /// that are not fully applied.
    fn saturate(&mut self, op: PrimOp, mut args: Vec<Expr>) -> Result<Expr, ParseError> {
        if args.len() == op.arity() {
            return Ok(Expr::Prim(op, args));
        }
        let Some((params, _)) = op.signature() else {
            return self.error(format!("primitive `{}` must be applied to {} arguments", op.name(), op.arity()));
        };
        let mut binders = Vec::new();
        for t in params.iter().skip(args.len()) {
            let x = self.fresh_eta();
            args.push(Expr::Var(x.clone()));
            binders.push((x, t.clone()));
        }
        let mut e = Expr::Prim(op, args);
        for (x, t) in binders.into_iter().rev() {
            e = Expr::Lam(x, t, Box::new(e));
        }
        Ok(e)
    }

    fn post_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom_expr()?;
        loop {
            if *self.peek() == Tok::LBrack {
                let ts = self.type_list()?;
                e = Expr::TyApp(Box::new(e), ts);
            } else if *self.peek() == Tok::Dot && matches!(self.peek_at(1), Tok::Ident(_)) {
                self.next();
                let f = self.ident()?;
                e = Expr::Project(Box::new(e), f);
            } else {
                return Ok(e);
            }
        }
    }

    fn atom_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                Ok(Expr::Int(n))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Expr::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.next();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "nil" => {
                self.next();
                self.expect(&Tok::LBrack)?;
                let t = self.ty()?;
                self.expect(&Tok::RBrack)?;
                Ok(Expr::Nil(t))
            }
            Tok::Ident(s) if PrimOp::from_name(&s).is_some() => {
                self.next();
                let op = PrimOp::from_name(&s).unwrap_or(PrimOp::Add);
                self.saturate(op, Vec::new())
            }
            Tok::Ident(_) => Ok(Expr::Var(self.ident()?)),
            Tok::Question => {
                self.next();
                Ok(Expr::Query(RuleType::simple(self.atom_ty()?)))
            }
            Tok::Upper(name) => {
                self.next();
                let targs = self.type_list()?;
                self.expect(&Tok::LBrace)?;
                let mut fields = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let f = self.ident()?;
                        self.expect(&Tok::Equals)?;
                        fields.push((f, self.expr()?));
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(&Tok::Comma)?;
                    }
                }
                Ok(Expr::Record(name, targs, fields))
            }
            Tok::LParen => {
                self.next();
                let a = self.expr()?;
                if self.eat(&Tok::Comma) {
                    let b = self.expr()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(Expr::pair(a, b));
                }
                self.expect(&Tok::RParen)?;
                Ok(a)
            }
            _ => self.unexpected("an expression"),
        }
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    Parser::new(src)?.program()
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.unexpected("end of input");
    }
    Ok(e)
}

pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.ty()?;
    if !p.at_eof() {
        return p.unexpected("end of input");
    }
    Ok(t)
}

pub fn parse_rule(src: &str) -> Result<RuleType, ParseError> {
    parse_type(src).map(RuleType::simple)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) -> RuleType {
        parse_rule(s).unwrap()
    }

    #[test]
    fn types_parse() {
        let r = rt("forall a. {a} => (a, a)");
        assert_eq!(r.vars, vec!["a".to_string()]);
        assert_eq!(r.context.len(), 1);
        assert_eq!(r.head, Type::pair(Type::var("a"), Type::var("a")));
        assert_eq!(parse_type("{} => Int").unwrap(), Type::Int);
        assert_eq!(parse_type("Int -> Int -> Bool").unwrap().to_string(), "Int -> Int -> Bool");
        assert_eq!(parse_type("(Int -> Int) -> Bool").unwrap().to_string(), "(Int -> Int) -> Bool");
        assert_eq!(parse_type("Eq (Int, Bool)").unwrap(), Type::con("Eq", vec![Type::pair(Type::Int, Type::Bool)]));
        assert_eq!(rt("forall a. a -> a").context.len(), 0);
    }

    #[test]
    fn rule_type_printing_round_trips() {
        for s in [
            "forall a. {a} => (a, a)",
            "{Int, Bool} => Int",
            "forall a b. {Eq a, Eq b} => Eq (a, b)",
            "forall a. {a -> String} => [a] -> String",
            "forall a. {} => {Int} => a",
            "{forall a. {a} => (a, a)} => Int",
            "Int -> (forall a. a -> a)",
        ] {
            let t = parse_type(s).unwrap();
            assert_eq!(parse_type(&t.to_string()).unwrap(), t, "{s}");
        }
    }

    #[test]
    fn implicit_sugar() {
        let e = parse_expr("implicit {1 : Int, true : Bool} in (?Int + 1, not ?Bool) : (Int, Bool)").unwrap();
        let Expr::RuleApp(f, args) = &e else { panic!("{e:?}") };
        assert_eq!(args.len(), 2);
        assert!(matches!(**f, Expr::RuleAbs(_, _)));
        assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn expression_round_trips() {
        for s in [
            "rule (forall a. {a} => (a, a)) (?a, ?a)",
            "(\\x : Int. x + 1) 3",
            "f[Int, Bool] with {1 : Int, true : Bool}",
            "?(forall a. {a} => (a, Int))[Int] with {4 : Int}",
            "fold (\\x : Int. \\acc : Int. x + acc) 0 (cons 1 (cons 2 nil[Int]))",
            "if primEqInt 1 2 then \"a\\n\" else intToString 3 ++ \"b\"",
            "Eq[Int] { eq = primEqInt }.eq 1 2",
            "fst (1, true) + snd (true, 2)",
            "(rule ({Int} => Int) ?Int) with {(rule (Int) 1) : Int}",
            "(\\x : Int. x) -2 + -1",
            "-- comment\n-3",
        ] {
            let e = parse_expr(s).unwrap();
            let printed = e.to_string();
            assert_eq!(parse_expr(&printed).unwrap(), e, "{s} printed as {printed}");
        }
    }

    #[test]
    fn eta_expansion() {
        let e = parse_expr("primEqInt").unwrap();
        assert!(matches!(e, Expr::Lam(_, Type::Int, _)));
        assert!(parse_expr("fst").is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expr("(1, ").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(parse_expr("1 $ 2").is_err());
        assert!(parse_type("forall a a. a").is_err());
    }

    #[test]
    fn comments_are_skipped() {
        let e = parse_expr("-- leading\n1 -- trailing\n + 2").unwrap();
        assert_eq!(e, Expr::Prim(PrimOp::Add, vec![Expr::Int(1), Expr::Int(2)]));
    }

    #[test]
    fn interfaces() {
        let p = parse_program("interface Eq a = { eq : a -> a -> Bool }\n Eq[Int] { eq = primEqInt }").unwrap();
        assert_eq!(p.interfaces.len(), 1);
        assert_eq!(p.interfaces[0].params, vec!["a".to_string()]);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }
}
