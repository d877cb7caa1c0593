//! Recursive-descent parser for the accepted C subset.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::{FrontendError, FrontendErrorKind};

const TYPE_WORDS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "const",
    "volatile",
    "static",
    "extern",
    "register",
    "inline",
    "auto",
    "struct",
    "union",
    "enum",
    "_Bool",
    "bool",
    "_Noreturn",
    "restrict",
    "__restrict",
    "__inline",
    "__attribute__",
];

/// Storage classes and qualifiers: they may precede a typedef name.
const QUALIFIERS: &[&str] = &[
    "const",
    "volatile",
    "static",
    "extern",
    "register",
    "inline",
    "auto",
    "restrict",
    "__restrict",
    "__inline",
];

const BUILTIN_TYPEDEFS: &[&str] = &[
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
    "size_t",
    "ssize_t",
    "off_t",
    "mode_t",
    "intptr_t",
    "uintptr_t",
    "FILE",
    "__u8",
    "__u16",
    "__u32",
    "__u64",
    "__s8",
    "__s16",
    "__s32",
    "__s64",
    "u8",
    "u16",
    "u32",
    "u64",
];

pub fn parse_unit(src: &str) -> Result<Unit, FrontendError> {
    let toks = lex(src).map_err(|e| FrontendError {
        kind: FrontendErrorKind::SyntaxError,
        loc: Loc {
            line: e.line,
            col: e.col,
        },
        message: e.message,
    })?;
    let mut p = Parser {
        toks,
        pos: 0,
        typedefs: BUILTIN_TYPEDEFS.iter().map(|s| s.to_string()).collect(),
        unit: Unit::default(),
    };
    p.unit_items()?;
    Ok(p.unit)
}

/// Parse a standalone expression, as found in a `#define` body.
pub fn parse_expr_text(src: &str, loc: Loc) -> Result<Expr, FrontendError> {
    let toks = lex(src).map_err(|e| FrontendError {
        kind: FrontendErrorKind::SyntaxError,
        loc,
        message: e.message,
    })?;
    let toks = toks
        .into_iter()
        .map(|mut t| {
            t.line = loc.line;
            t.col = loc.col;
            t
        })
        .collect();
    let mut p = Parser {
        toks,
        pos: 0,
        typedefs: BUILTIN_TYPEDEFS.iter().map(|s| s.to_string()).collect(),
        unit: Unit::default(),
    };
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.syntax("unexpected token in macro body"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    typedefs: HashSet<String>,
    unit: Unit,
}

#[derive(Default)]
struct Specifiers {
    noreturn: bool,
    typedef: bool,
}

enum Declarator {
    Object {
        name: String,
        loc: Loc,
    },
    Function {
        name: String,
        params: Vec<String>,
        loc: Loc,
        noreturn: bool,
    },
}

impl Parser {
    fn tok(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn kind(&self) -> &TokenKind {
        &self.tok().kind
    }

    fn peek_kind(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].kind
    }

    fn loc(&self) -> Loc {
        Loc {
            line: self.tok().line,
            col: self.tok().col,
        }
    }

    fn at_eof(&self) -> bool {
        matches!(self.kind(), TokenKind::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, msg: impl Into<String>) -> FrontendError {
        FrontendError {
            kind: FrontendErrorKind::SyntaxError,
            loc: self.loc(),
            message: msg.into(),
        }
    }

    fn unsupported(&self, loc: Loc, what: impl Into<String>) -> FrontendError {
        FrontendError {
            kind: FrontendErrorKind::UnsupportedConstruct,
            loc,
            message: format!("{} is outside the supported C subset", what.into()),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.kind(), TokenKind::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.kind(), TokenKind::Ident(s) if s == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), FrontendError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{p}`, found {}", self.kind())))
        }
    }

    fn ident(&mut self) -> Result<(String, Loc), FrontendError> {
        let loc = self.loc();
        match self.kind().clone() {
            TokenKind::Ident(s) => {
                self.bump();
                Ok((s, loc))
            }
            other => Err(self.syntax(format!("expected identifier, found {other}"))),
        }
    }

    fn starts_type(&self) -> bool {
        match self.kind() {
            TokenKind::Ident(s) => {
                TYPE_WORDS.contains(&s.as_str()) || self.typedefs.contains(s) || s == "typedef"
            }
            _ => false,
        }
    }

    fn unit_items(&mut self) -> Result<(), FrontendError> {
        while !self.at_eof() {
            if let TokenKind::Directive(text) = self.kind().clone() {
                let loc = self.loc();
                self.bump();
                self.directive(&text, loc)?;
                continue;
            }
            if self.eat(";") {
                continue;
            }
            self.external_decl()?;
        }
        Ok(())
    }

    fn directive(&mut self, text: &str, loc: Loc) -> Result<(), FrontendError> {
        let word: String = text
            .chars()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect();
        match word.as_str() {
            "include" | "pragma" => Ok(()),
            "define" => {
                let rest = text["define".len()..].trim_start();
                let name: String = rest
                    .chars()
                    .take_while(|c| *c == '_' || c.is_ascii_alphanumeric())
                    .collect();
                if name.is_empty() {
                    return Err(FrontendError {
                        kind: FrontendErrorKind::SyntaxError,
                        loc,
                        message: "malformed #define".into(),
                    });
                }
                let body = &rest[name.len()..];
                if body.starts_with('(') {
                    return Err(self.unsupported(loc, "function-like macro"));
                }
                let body = body.trim();
                let value = if body.is_empty() {
                    Expr::Int(1)
                } else {
                    parse_expr_text(body, loc)?
                };
                self.unit.defines.push((name, value));
                Ok(())
            }
            other => Err(self.unsupported(loc, format!("preprocessor directive `#{other}`"))),
        }
    }

    /// Skip `__attribute__((...))`; true when it declares `noreturn`.
    fn skip_attribute(&mut self) -> Result<bool, FrontendError> {
        let start = self.pos;
        self.bump();
        self.expect("(")?;
        let mut depth = 1;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.syntax("unterminated attribute"));
            }
            if self.is_punct("(") {
                depth += 1;
            } else if self.is_punct(")") {
                depth -= 1;
            }
            self.bump();
        }
        Ok(self.toks[start..self.pos].iter().any(
            |t| matches!(&t.kind, TokenKind::Ident(s) if s == "noreturn" || s == "__noreturn__"),
        ))
    }

    fn specifiers(&mut self) -> Result<Specifiers, FrontendError> {
        let start = self.pos;
        let mut spec = Specifiers::default();
        let mut any = false;
        while let TokenKind::Ident(w) = self.kind().clone() {
            match w.as_str() {
                "typedef" => {
                    spec.typedef = true;
                    self.bump();
                }
                "_Noreturn" => {
                    spec.noreturn = true;
                    self.bump();
                }
                "__attribute__" => {
                    if self.skip_attribute()? {
                        spec.noreturn = true;
                    }
                }
                "struct" | "union" | "enum" => {
                    any = true;
                    let is_enum = w == "enum";
                    self.bump();
                    if matches!(self.kind(), TokenKind::Ident(_)) {
                        self.bump();
                    }
                    if self.is_punct("{") {
                        if is_enum {
                            self.enum_body()?;
                        } else {
                            self.skip_braces()?;
                        }
                    }
                }
                _ if QUALIFIERS.contains(&w.as_str()) => {
                    self.bump();
                }
                _ if TYPE_WORDS.contains(&w.as_str()) => {
                    any = true;
                    self.bump();
                }
                _ if self.typedefs.contains(&w) && !any => {
                    any = true;
                    self.bump();
                }
                _ => break,
            }
        }
        if !any && !spec.typedef && !spec.noreturn && self.pos == start {
            return Err(self.syntax(format!("expected a type, found {}", self.kind())));
        }
        Ok(spec)
    }

    fn skip_braces(&mut self) -> Result<(), FrontendError> {
        self.expect("{")?;
        let mut depth = 1;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.syntax("unterminated `{`"));
            }
            if self.is_punct("{") {
                depth += 1;
            } else if self.is_punct("}") {
                depth -= 1;
            }
            self.bump();
        }
        Ok(())
    }

    fn enum_body(&mut self) -> Result<(), FrontendError> {
        self.expect("{")?;
        let mut next = Expr::Int(0);
        while !self.eat("}") {
            let (name, _) = self.ident()?;
            let value = if self.eat("=") {
                self.cond_expr()?
            } else {
                next
            };
            next = Expr::Binary(BinOp::Add, Box::new(value.clone()), Box::new(Expr::Int(1)));
            self.unit.defines.push((name, value));
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        Ok(())
    }

    fn declarator(&mut self) -> Result<Declarator, FrontendError> {
        while self.eat("*") {
            while self.is_word("const") || self.is_word("volatile") || self.is_word("restrict") {
                self.bump();
            }
        }
        if self.is_punct("(") {
            return Err(self.unsupported(self.loc(), "function pointer declarator"));
        }
        let (name, loc) = self.ident()?;
        if self.is_punct("(") {
            self.bump();
            let params = self.params()?;
            let mut noreturn = false;
            while self.is_word("__attribute__") {
                noreturn |= self.skip_attribute()?;
            }
            return Ok(Declarator::Function {
                name,
                params,
                loc,
                noreturn,
            });
        }
        while self.eat("[") {
            if !self.is_punct("]") {
                self.cond_expr()?;
            }
            self.expect("]")?;
        }
        Ok(Declarator::Object { name, loc })
    }

    fn params(&mut self) -> Result<Vec<String>, FrontendError> {
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        if self.is_word("void") && matches!(self.peek_kind(1), TokenKind::Punct(")")) {
            self.bump();
            self.bump();
            return Ok(out);
        }
        loop {
            if self.eat("...") {
                self.expect(")")?;
                break;
            }
            self.specifiers()?;
            while self.eat("*") {
                while self.is_word("const") || self.is_word("volatile") || self.is_word("restrict")
                {
                    self.bump();
                }
            }
            if self.is_punct(",") || self.is_punct(")") {
                out.push(format!("$arg{}", out.len()));
            } else {
                match self.declarator()? {
                    Declarator::Object { name, .. } => out.push(name),
                    Declarator::Function { loc, .. } => {
                        return Err(self.unsupported(loc, "function-typed parameter"))
                    }
                }
            }
            if self.eat(")") {
                break;
            }
            self.expect(",")?;
        }
        Ok(out)
    }

    fn initializer(&mut self) -> Result<Expr, FrontendError> {
        if self.eat("{") {
            let mut items = Vec::new();
            while !self.eat("}") {
                if self.eat(".") {
                    self.ident()?;
                    self.expect("=")?;
                }
                items.push(self.initializer()?);
                if !self.eat(",") {
                    self.expect("}")?;
                    break;
                }
            }
            Ok(Expr::InitList(items))
        } else {
            self.assign_expr()
        }
    }

    fn external_decl(&mut self) -> Result<(), FrontendError> {
        let spec = self.specifiers()?;
        if self.eat(";") {
            return Ok(());
        }
        loop {
            match self.declarator()? {
                Declarator::Function {
                    name,
                    params,
                    loc,
                    noreturn,
                } => {
                    if spec.typedef {
                        return Err(self.unsupported(loc, "function typedef"));
                    }
                    if self.is_punct("{") {
                        let body = self.block_items()?;
                        let end = Loc {
                            line: self.toks[self.pos - 1].line,
                            col: self.toks[self.pos - 1].col,
                        };
                        self.unit.functions.push(Function {
                            name,
                            params,
                            body,
                            loc,
                            end,
                        });
                        return Ok(());
                    }
                    self.unit.prototypes.push(Prototype {
                        name,
                        noreturn: spec.noreturn || noreturn,
                    });
                }
                Declarator::Object { name, loc } => {
                    if spec.typedef {
                        self.typedefs.insert(name);
                    } else {
                        let init = if self.eat("=") {
                            Some(self.initializer()?)
                        } else {
                            None
                        };
                        self.unit.globals.push(Global { name, init, loc });
                    }
                }
            }
            if self.eat(";") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn block_items(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.eat("}") {
            if self.at_eof() {
                return Err(self.syntax("expected `}`"));
            }
            self.block_item(&mut out)?;
        }
        Ok(out)
    }

    fn block_item(&mut self, out: &mut Vec<Stmt>) -> Result<(), FrontendError> {
        if let TokenKind::Directive(_) = self.kind() {
            return Err(self.unsupported(self.loc(), "preprocessor directive inside a function"));
        }
        if self.starts_type() && !matches!(self.peek_kind(1), TokenKind::Punct(":")) {
            return self.local_decl(out);
        }
        out.push(self.stmt()?);
        Ok(())
    }

    fn local_decl(&mut self, out: &mut Vec<Stmt>) -> Result<(), FrontendError> {
        let spec = self.specifiers()?;
        if self.eat(";") {
            return Ok(());
        }
        loop {
            match self.declarator()? {
                Declarator::Function { loc, .. } => {
                    return Err(self.unsupported(loc, "local function declaration"))
                }
                Declarator::Object { name, loc } => {
                    if spec.typedef {
                        self.typedefs.insert(name);
                    } else {
                        let init = if self.eat("=") {
                            Some(self.initializer()?)
                        } else {
                            None
                        };
                        out.push(Stmt::Decl { name, init, loc });
                    }
                }
            }
            if self.eat(";") {
                return Ok(());
            }
            self.expect(",")?;
        }
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let loc = self.loc();
        if self.is_punct("{") {
            return Ok(Stmt::Block(self.block_items()?));
        }
        if self.eat(";") {
            return Ok(Stmt::Empty);
        }
        if let TokenKind::Ident(w) = self.kind().clone() {
            if matches!(self.peek_kind(1), TokenKind::Punct(":")) && w != "default" {
                return Err(self.unsupported(loc, "statement label"));
            }
            match w.as_str() {
                "if" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    let then = Box::new(self.stmt()?);
                    let els = if self.is_word("else") {
                        self.bump();
                        Some(Box::new(self.stmt()?))
                    } else {
                        None
                    };
                    return Ok(Stmt::If {
                        cond,
                        then,
                        els,
                        loc,
                    });
                }
                "while" => {
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    let body = Box::new(self.stmt()?);
                    return Ok(Stmt::While { cond, body, loc });
                }
                "do" => {
                    self.bump();
                    let body = Box::new(self.stmt()?);
                    if !self.is_word("while") {
                        return Err(self.syntax("expected `while`"));
                    }
                    self.bump();
                    self.expect("(")?;
                    let cond = self.expr()?;
                    self.expect(")")?;
                    self.expect(";")?;
                    return Ok(Stmt::DoWhile { body, cond, loc });
                }
                "for" => {
                    self.bump();
                    self.expect("(")?;
                    let mut init = Vec::new();
                    if !self.eat(";") {
                        if self.starts_type() {
                            self.local_decl(&mut init)?;
                        } else {
                            let l = self.loc();
                            init.push(Stmt::Expr(self.expr()?, l));
                            self.expect(";")?;
                        }
                    }
                    let cond = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect(";")?;
                    let step = if self.is_punct(")") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect(")")?;
                    let body = Box::new(self.stmt()?);
                    return Ok(Stmt::For {
                        init,
                        cond,
                        step,
                        body,
                        loc,
                    });
                }
                "switch" => {
                    self.bump();
                    self.expect("(")?;
                    let scrutinee = self.expr()?;
                    self.expect(")")?;
                    let arms = self.switch_body()?;
                    return Ok(Stmt::Switch {
                        scrutinee,
                        arms,
                        loc,
                    });
                }
                "break" => {
                    self.bump();
                    self.expect(";")?;
                    return Ok(Stmt::Break(loc));
                }
                "continue" => {
                    self.bump();
                    self.expect(";")?;
                    return Ok(Stmt::Continue(loc));
                }
                "return" => {
                    self.bump();
                    let value = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect(";")?;
                    return Ok(Stmt::Return(value, loc));
                }
                "goto" => return Err(self.unsupported(loc, "`goto`")),
                "asm" | "__asm__" => return Err(self.unsupported(loc, "inline assembly")),
                "case" | "default" => {
                    return Err(self.syntax(format!("`{w}` label outside of a switch")))
                }
                "else" => return Err(self.syntax("`else` without `if`")),
                _ => {}
            }
        }
        let e = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Expr(e, loc))
    }

    fn switch_body(&mut self) -> Result<Vec<SwitchArm>, FrontendError> {
        self.expect("{")?;
        let mut arms: Vec<SwitchArm> = Vec::new();
        while !self.eat("}") {
            if self.at_eof() {
                return Err(self.syntax("expected `}`"));
            }
            let loc = self.loc();
            let label = if self.is_word("case") {
                self.bump();
                let v = self.cond_expr()?;
                self.expect(":")?;
                Some(CaseLabel::Value(v))
            } else if self.is_word("default") {
                self.bump();
                self.expect(":")?;
                Some(CaseLabel::Default)
            } else {
                None
            };
            match label {
                Some(l) => match arms.last_mut() {
                    Some(arm) if arm.body.is_empty() => arm.labels.push(l),
                    _ => arms.push(SwitchArm {
                        labels: vec![l],
                        body: Vec::new(),
                        loc,
                    }),
                },
                None => {
                    let Some(arm) = arms.last_mut() else {
                        return Err(self.syntax("statement before the first `case` label"));
                    };
                    let mut items = Vec::new();
                    self.block_item(&mut items)?;
                    arm.body.extend(items);
                }
            }
        }
        Ok(arms)
    }

    // Expressions

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.assign_expr()?;
        while self.eat(",") {
            let rhs = self.assign_expr()?;
            e = Expr::Comma(Box::new(e), Box::new(rhs));
        }
        Ok(e)
    }

    fn assign_expr(&mut self) -> Result<Expr, FrontendError> {
        let loc = self.loc();
        let lhs = self.cond_expr()?;
        let op = match self.kind() {
            TokenKind::Punct("=") => None,
            TokenKind::Punct("+=") => Some(BinOp::Add),
            TokenKind::Punct("-=") => Some(BinOp::Sub),
            TokenKind::Punct("*=") => Some(BinOp::Mul),
            TokenKind::Punct("/=") => Some(BinOp::Div),
            TokenKind::Punct("%=") => Some(BinOp::Mod),
            TokenKind::Punct("&=") => Some(BinOp::BitAnd),
            TokenKind::Punct("|=") => Some(BinOp::BitOr),
            TokenKind::Punct("^=") => Some(BinOp::BitXor),
            TokenKind::Punct("<<=") => Some(BinOp::Shl),
            TokenKind::Punct(">>=") => Some(BinOp::Shr),
            _ => return Ok(lhs),
        };
        self.bump();
        let value = self.assign_expr()?;
        Ok(Expr::Assign {
            op,
            target: Box::new(lhs),
            value: Box::new(value),
            loc,
        })
    }

    fn cond_expr(&mut self) -> Result<Expr, FrontendError> {
        let c = self.binary(1)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.cond_expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binop(&self) -> Option<(BinOp, u8)> {
        let TokenKind::Punct(p) = self.kind() else {
            return None;
        };
        Some(match *p {
            "||" => (BinOp::Or, 1),
            "&&" => (BinOp::And, 2),
            "|" => (BinOp::BitOr, 3),
            "^" => (BinOp::BitXor, 4),
            "&" => (BinOp::BitAnd, 5),
            "==" => (BinOp::Eq, 6),
            "!=" => (BinOp::Ne, 6),
            "<" => (BinOp::Lt, 7),
            "<=" => (BinOp::Le, 7),
            ">" => (BinOp::Gt, 7),
            ">=" => (BinOp::Ge, 7),
            "<<" => (BinOp::Shl, 8),
            ">>" => (BinOp::Shr, 8),
            "+" => (BinOp::Add, 9),
            "-" => (BinOp::Sub, 9),
            "*" => (BinOp::Mul, 10),
            "/" => (BinOp::Div, 10),
            "%" => (BinOp::Mod, 10),
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn is_cast(&self) -> bool {
        if !self.is_punct("(") {
            return false;
        }
        match self.peek_kind(1) {
            TokenKind::Ident(s) => {
                (TYPE_WORDS.contains(&s.as_str()) || self.typedefs.contains(s))
                    && s != "__attribute__"
            }
            _ => false,
        }
    }

    fn type_name(&mut self) -> Result<(), FrontendError> {
        self.specifiers()?;
        while self.eat("*") {
            while self.is_word("const") || self.is_word("volatile") {
                self.bump();
            }
        }
        while self.eat("[") {
            if !self.is_punct("]") {
                self.cond_expr()?;
            }
            self.expect("]")?;
        }
        Ok(())
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let loc = self.loc();
        if self.is_cast() {
            self.bump();
            self.type_name()?;
            self.expect(")")?;
            if self.is_punct("{") {
                return Err(self.unsupported(loc, "compound literal"));
            }
            return Ok(Expr::Cast(Box::new(self.unary()?)));
        }
        let TokenKind::Punct(p) = self.kind().clone() else {
            if self.is_word("sizeof") {
                self.bump();
                if self.is_cast() {
                    self.bump();
                    self.type_name()?;
                    self.expect(")")?;
                } else {
                    self.unary()?;
                }
                return Ok(Expr::SizeOf);
            }
            return self.postfix();
        };
        let op = match p {
            "-" => Some(UnOp::Neg),
            "!" => Some(UnOp::Not),
            "~" => Some(UnOp::BitNot),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(match (op, e) {
                (UnOp::Neg, Expr::Int(v)) => Expr::Int(v.wrapping_neg()),
                (op, e) => Expr::Unary(op, Box::new(e)),
            });
        }
        match p {
            "+" => {
                self.bump();
                self.unary()
            }
            "&" => {
                self.bump();
                Ok(Expr::AddrOf(Box::new(self.unary()?)))
            }
            "*" => {
                self.bump();
                Ok(Expr::Deref(Box::new(self.unary()?)))
            }
            "++" | "--" => {
                self.bump();
                let target = self.unary()?;
                Ok(Expr::IncDec {
                    target: Box::new(target),
                    delta: if p == "++" { 1 } else { -1 },
                    prefix: true,
                    loc,
                })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, FrontendError> {
        let mut e = self.primary()?;
        loop {
            let loc = self.loc();
            if self.is_punct("(") {
                let Expr::Ident(callee, cloc) = e else {
                    return Err(self.unsupported(loc, "call through an expression"));
                };
                self.bump();
                let mut args = Vec::new();
                if !self.eat(")") {
                    loop {
                        args.push(self.assign_expr()?);
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                e = Expr::Call {
                    callee,
                    args,
                    loc: cloc,
                };
            } else if self.eat("[") {
                let idx = self.expr()?;
                self.expect("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.eat(".") || self.eat("->") {
                let (field, _) = self.ident()?;
                e = Expr::Member(Box::new(e), field);
            } else if self.is_punct("++") || self.is_punct("--") {
                let delta = if self.is_punct("++") { 1 } else { -1 };
                self.bump();
                e = Expr::IncDec {
                    target: Box::new(e),
                    delta,
                    prefix: false,
                    loc,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let loc = self.loc();
        match self.kind().clone() {
            TokenKind::Int(v) | TokenKind::Char(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            TokenKind::Float(_) => {
                self.bump();
                Ok(Expr::Float)
            }
            TokenKind::Str(_) => {
                while matches!(self.kind(), TokenKind::Str(_)) {
                    self.bump();
                }
                Ok(Expr::Str)
            }
            TokenKind::Ident(s) => {
                self.bump();
                Ok(Expr::Ident(s, loc))
            }
            TokenKind::Punct("(") => {
                self.bump();
                if self.is_punct("{") {
                    return Err(self.unsupported(loc, "statement expression"));
                }
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            other => Err(self.syntax(format!("expected expression, found {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_straight_line_main() {
        let u = parse_unit(
            "int main(){ int fd = open(\"/dev/spidev0.0\", O_RDWR); read(fd, buf, 4); return 0; }",
        )
        .unwrap();
        assert_eq!(u.functions.len(), 1);
        assert_eq!(u.functions[0].body.len(), 3);
    }

    #[test]
    fn defines_enums_and_typedefs() {
        let u = parse_unit(
            "#include <stdio.h>\n#define SPEED 500000\n#define DEV \"/dev/x\"\n\
             enum { A = 3, B };\ntypedef unsigned int word;\nword w = 1;\nstatic uint8_t tx[] = {1, 2};\n\
             struct spi { int a; };\n",
        )
        .unwrap();
        let names: Vec<_> = u.defines.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["SPEED", "DEV", "A", "B"]);
        assert_eq!(u.globals.len(), 2);
    }

    #[test]
    fn control_flow_statements() {
        let src = "void f(int c) {
            for (int i = 0; i < 3; i++) { if (c) continue; else break; }
            do { c--; } while (c > 0);
            switch (c) { case 1: case 2: c = 0; break; default: c = 1; }
            while (1) { c += 2; }
        }";
        let u = parse_unit(src).unwrap();
        let body = &u.functions[0].body;
        assert!(matches!(body[0], Stmt::For { .. }));
        let Stmt::Switch { arms, .. } = &body[2] else {
            panic!()
        };
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].labels.len(), 2);
    }

    #[test]
    fn rejects_goto_and_labels() {
        let e = parse_unit("int main(){ goto out; out: return 0; }").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::UnsupportedConstruct);
        assert_eq!((e.loc.line, e.loc.col), (1, 13));
        let e = parse_unit("int main(){ x: return 0; }").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::UnsupportedConstruct);
        let e = parse_unit("#define F(x) x\n").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::UnsupportedConstruct);
        let e = parse_unit("int main(){ (*fp)(1); }").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::UnsupportedConstruct);
        let e = parse_unit("#ifdef X\n#endif\n").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::UnsupportedConstruct);
    }

    #[test]
    fn syntax_errors() {
        let e = parse_unit("int main() { return 0 }").unwrap_err();
        assert_eq!(e.kind, FrontendErrorKind::SyntaxError);
        assert!(parse_unit("int main() {").is_err());
    }

    #[test]
    fn casts_sizeof_and_members() {
        let u = parse_unit(
            "int f(void) { struct spi_ioc_transfer tr; tr.len = sizeof(tr); \
             return ioctl(fd, SPI_IOC_MESSAGE, (unsigned long)&tr) < 1 ? -1 : 0; }",
        )
        .unwrap();
        assert_eq!(u.functions[0].body.len(), 3);
    }

    #[test]
    fn prototypes_record_noreturn() {
        let u = parse_unit("_Noreturn void die(const char *s);\nvoid pabort(const char *s) __attribute__((noreturn));\nint g(int, char **);\n").unwrap();
        assert_eq!(u.prototypes.len(), 3);
        assert!(u.prototypes[0].noreturn && u.prototypes[1].noreturn && !u.prototypes[2].noreturn);
    }
}
