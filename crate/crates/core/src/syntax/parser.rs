use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::diag::{Code, Diagnostic, SrcLoc};
use crate::sema::Hdc;

/// What to do with `__host__`, `__device__` and `__global__`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CudaKeywords {
    #[default]
    Accept,
    /// Parse and drop them, as a header defining them to nothing would.
    Erase,
    /// Treat them as unknown tokens.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    pub cuda_keywords: CudaKeywords,
}

const KEYWORDS: &[&str] = &[
    "struct",
    "class",
    "template",
    "typename",
    "requires",
    "REQUIRES",
    "return",
    "if",
    "else",
    "for",
    "void",
    "int",
    "bool",
    "HDC",
    "auto",
    "const",
    "static",
    "constexpr",
    "inline",
    "true",
    "false",
    "enum",
    "public",
    "private",
    "protected",
    "printf",
    "std",
    "__host__",
    "__device__",
    "__global__",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct PErr {
    line: u32,
    col: u32,
    message: String,
}

type PResult<T> = Result<T, PErr>;

enum Decl {
    Function(FunctionDecl),
    Struct(StructDecl),
    Const(ConstDecl),
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    opts: ParseOptions,
    /// Inside `<...>`: a bare `>` closes the list instead of comparing.
    no_gt: bool,
}

/// Parses preprocessed MiniCU source with CUDA keywords accepted.
pub fn parse(text: &str, file: &str) -> Result<Ast, Diagnostic> {
    parse_with(text, file, ParseOptions::default())
}

pub fn parse_with(text: &str, file: &str, opts: ParseOptions) -> Result<Ast, Diagnostic> {
    let toks = tokenize(text)
        .map_err(|e| Diagnostic::new(Code::E0001, SrcLoc::new(file, e.line, e.col), e.message))?;
    let mut p = Parser {
        toks,
        pos: 0,
        file,
        opts,
        no_gt: false,
    };
    p.unit()
        .map_err(|e| Diagnostic::new(Code::E0001, SrcLoc::new(file, e.line, e.col), e.message))
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> SrcLoc {
        let t = &self.toks[self.pos];
        SrcLoc::new(self.file, t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(PErr {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn expected<T>(&self, what: &str) -> PResult<T> {
        self.err(format!("expected {what}, found {}", self.peek()))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_punct_at(&self, n: usize, p: &str) -> bool {
        matches!(self.peek_at(n), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(i) if i == s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.expected(&format!("`{p}`"))
        }
    }

    fn expect_name(&mut self) -> PResult<(String, SrcLoc)> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok((s, loc))
            }
            _ => self.expected("identifier"),
        }
    }

    fn attempt<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> Option<T> {
        let (pos, no_gt) = (self.pos, self.no_gt);
        match f(self) {
            Ok(v) => Some(v),
            Err(_) => {
                self.pos = pos;
                self.no_gt = no_gt;
                None
            }
        }
    }

    fn with_gt<T>(&mut self, allow: bool, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let saved = self.no_gt;
        self.no_gt = !allow;
        let r = f(self);
        self.no_gt = saved;
        r
    }

    fn is_cuda_keyword(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "__host__" || s == "__device__" || s == "__global__")
    }

    // ---- items ------------------------------------------------------------

    fn unit(&mut self) -> PResult<Ast> {
        let mut ast = Ast::default();
        let mut pragma: Option<SrcLoc> = None;
        while *self.peek() != Tok::Eof {
            if let Some(p) = self.pragma()? {
                pragma = Some(p.loc.clone());
                ast.items.push(Item::Pragma(p));
                continue;
            }
            if self.is_ident("enum") {
                if pragma.is_some() {
                    return self.err("a pragma must precede a function declaration");
                }
                ast.items.push(self.hdc_enum()?);
                continue;
            }
            let decl = self.decl(pragma.take().is_some(), false)?;
            ast.items.push(match decl {
                Decl::Function(f) => {
                    if f.name == "main" {
                        ast.has_main = true;
                    }
                    Item::Function(f)
                }
                Decl::Struct(s) => Item::Struct(s),
                Decl::Const(c) => Item::Const(c),
            });
        }
        if pragma.is_some() {
            return self.err("a pragma must precede a function declaration");
        }
        Ok(ast)
    }

    fn pragma(&mut self) -> PResult<Option<PragmaDirective>> {
        let Tok::Pragma(name) = self.peek().clone() else {
            return Ok(None);
        };
        let kind = match name.as_str() {
            "hd_warning_disable" => PragmaKind::HdWarningDisable,
            "nv_exec_check_disable" => PragmaKind::NvExecCheckDisable,
            other => return self.err(format!("unknown pragma `{other}`")),
        };
        let loc = self.loc();
        self.bump();
        Ok(Some(PragmaDirective { kind, loc }))
    }

    fn hdc_enum(&mut self) -> PResult<Item> {
        let loc = self.loc();
        self.bump();
        if !self.eat_ident("class") || !self.eat_ident("HDC") {
            return self.err("only `enum class HDC { Hst, Dev, HstDev };` is supported");
        }
        self.expect_punct("{")?;
        for (i, v) in ["Hst", "Dev", "HstDev"].iter().enumerate() {
            if i > 0 {
                self.expect_punct(",")?;
            }
            if !self.eat_ident(v) {
                return self.expected(&format!("`{v}`"));
            }
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        Ok(Item::HdcEnum(loc))
    }

    fn decl(&mut self, pragma: bool, in_struct: bool) -> PResult<Decl> {
        let template = if self.is_ident("template") {
            Some(self.template_header()?)
        } else {
            None
        };
        let spec_loc = self.loc();
        let mut specs = self.specifiers()?;
        if self.is_ident("struct") || self.is_ident("class") {
            if in_struct {
                return self.err("nested structs are not supported");
            }
            if pragma {
                return self.err("a pragma must precede a function declaration");
            }
            if specs.global || specs.constexpr_flag || specs.is_static {
                return PErr::at(
                    &spec_loc,
                    "only `__host__`/`__device__` may decorate a struct",
                );
            }
            return Ok(Decl::Struct(self.struct_decl(template, specs)?));
        }
        let ret = self.ty()?;
        let (name, loc) = self.expect_name().or_else(|_| {
            // `main` is not a keyword, but keep the message pointed.
            self.expected("declaration name")
        })?;
        if self.is_punct("(") {
            specs.pragma_suppress = pragma;
            if name == "main" && !in_struct {
                if specs.is_decorated() {
                    return PErr::at(
                        &spec_loc,
                        "`main` must not carry execution space specifiers",
                    );
                }
                if template.is_some() {
                    return PErr::at(&loc, "`main` cannot be a template");
                }
            }
            return Ok(Decl::Function(
                self.function_rest(template, specs, ret, name, loc)?,
            ));
        }
        if self.is_punct("=") {
            if pragma {
                return self.err("a pragma must precede a function declaration");
            }
            if template.is_some() || specs.is_decorated() || !specs.constexpr_flag {
                return PErr::at(&loc, "constants must be declared `static constexpr`");
            }
            if in_struct && !specs.is_static {
                return PErr::at(
                    &loc,
                    "non-static data members are not supported; use `static constexpr`",
                );
            }
            self.bump();
            let value = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Decl::Const(ConstDecl {
                ty: ret,
                name,
                value,
                loc,
            }));
        }
        if in_struct && self.is_punct(";") {
            return PErr::at(
                &loc,
                "non-static data members are not supported; use `static constexpr`",
            );
        }
        self.expected("`(` or `=`")
    }

    fn template_header(&mut self) -> PResult<TemplateHeader> {
        let loc = self.loc();
        self.bump();
        self.expect_punct("<")?;
        let mut params = Vec::new();
        let mut requires: Vec<Expr> = Vec::new();
        if !self.is_punct(">") {
            loop {
                let ploc = self.loc();
                if self.eat_ident("typename") || self.eat_ident("class") {
                    let (name, _) = self.expect_name()?;
                    let default = if self.eat_punct("=") {
                        Some(TemplateArg::Type(self.with_gt(false, |p| p.ty())?))
                    } else {
                        None
                    };
                    params.push(TemplateParam {
                        name,
                        kind: TemplateParamKind::Type,
                        default,
                        loc: ploc,
                    });
                } else if self.is_ident("HDC") {
                    self.bump();
                    // `hdc` is a legal parameter name even though `hdc<T>` is the trait.
                    let name = match self.peek().clone() {
                        Tok::Ident(s) if !is_keyword(&s) => {
                            self.bump();
                            s
                        }
                        _ => return self.expected("template parameter name"),
                    };
                    let default = if self.eat_punct("=") {
                        Some(TemplateArg::Expr(self.with_gt(false, |p| p.expr())?))
                    } else {
                        None
                    };
                    params.push(TemplateParam {
                        name,
                        kind: TemplateParamKind::Hdc,
                        default,
                        loc: ploc,
                    });
                } else if self.eat_ident("REQUIRES") {
                    self.expect_punct("(")?;
                    requires.push(self.with_gt(true, |p| p.expr())?);
                    self.expect_punct(")")?;
                } else {
                    return self.expected("template parameter");
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(">")?;
        if self.eat_ident("requires") {
            requires.push(self.with_gt(true, |p| p.unary())?);
        }
        let requires = requires.into_iter().reduce(|a, b| {
            let loc = a.loc.clone();
            Expr {
                kind: ExprKind::Binary(BinOp::And, Box::new(a), Box::new(b)),
                loc,
            }
        });
        Ok(TemplateHeader {
            params,
            requires,
            loc,
        })
    }

    fn specifiers(&mut self) -> PResult<SpecifierSet> {
        let mut s = SpecifierSet::default();
        loop {
            let loc = self.loc();
            if self.is_cuda_keyword() {
                let Tok::Ident(kw) = self.peek().clone() else {
                    unreachable!()
                };
                match self.opts.cuda_keywords {
                    CudaKeywords::Reject => {
                        return self.err(format!(
                            "unknown identifier `{kw}`: execution space specifiers need a CUDA compiler"
                        ))
                    }
                    CudaKeywords::Erase => {
                        self.bump();
                        if self.is_punct("(") {
                            self.skip_parens()?;
                        }
                        continue;
                    }
                    CudaKeywords::Accept => {}
                }
                self.bump();
                match kw.as_str() {
                    "__global__" => {
                        if s.global {
                            return PErr::at(&loc, "duplicate `__global__`");
                        }
                        s.global = true;
                    }
                    _ => {
                        let predicate = if self.eat_punct("(") {
                            let e = self.with_gt(true, |p| p.expr())?;
                            self.expect_punct(")")?;
                            Some(e)
                        } else {
                            None
                        };
                        let slot = if kw == "__host__" {
                            &mut s.host
                        } else {
                            &mut s.device
                        };
                        if slot.is_some() {
                            return PErr::at(&loc, format!("duplicate `{kw}`"));
                        }
                        *slot = Some(SpaceSpec {
                            predicate,
                            loc: loc.clone(),
                        });
                    }
                }
                if s.global && (s.host.is_some() || s.device.is_some()) {
                    return PErr::at(
                        &loc,
                        "`__global__` cannot be combined with `__host__` or `__device__`",
                    );
                }
                continue;
            }
            if self.eat_ident("constexpr") {
                s.constexpr_flag = true;
            } else if self.eat_ident("static") {
                s.is_static = true;
            } else if self.eat_ident("inline") {
            } else {
                return Ok(s);
            }
        }
    }

    fn skip_parens(&mut self) -> PResult<()> {
        self.expect_punct("(")?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                Tok::Eof => return self.expected("`)`"),
                Tok::Punct("(") => depth += 1,
                Tok::Punct(")") => depth -= 1,
                _ => {}
            }
            self.bump();
        }
        Ok(())
    }

    fn struct_decl(
        &mut self,
        template: Option<TemplateHeader>,
        specs: SpecifierSet,
    ) -> PResult<StructDecl> {
        let keyword = if self.eat_ident("struct") {
            StructKeyword::Struct
        } else {
            self.bump();
            StructKeyword::Class
        };
        let (name, loc) = self.expect_name()?;
        self.expect_punct("{")?;
        let mut members = Vec::new();
        let mut pragma = false;
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.expected("`}`");
            }
            if (self.is_ident("public") || self.is_ident("private") || self.is_ident("protected"))
                && self.is_punct_at(1, ":")
            {
                self.bump();
                self.bump();
                continue;
            }
            if let Some(p) = self.pragma()? {
                pragma = true;
                members.push(Member::Pragma(p));
                continue;
            }
            match self.decl(std::mem::take(&mut pragma), true)? {
                Decl::Function(f) => members.push(Member::Function(f)),
                Decl::Const(c) => members.push(Member::Const(c)),
                Decl::Struct(_) => unreachable!(),
            }
        }
        if pragma {
            return self.err("a pragma must precede a function declaration");
        }
        self.expect_punct("}")?;
        self.expect_punct(";")?;
        Ok(StructDecl {
            name,
            loc,
            keyword,
            template,
            specs,
            members,
        })
    }

    fn function_rest(
        &mut self,
        template: Option<TemplateHeader>,
        specs: SpecifierSet,
        ret: TypeExpr,
        name: String,
        loc: SrcLoc,
    ) -> PResult<FunctionDecl> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.is_ident("void") && self.is_punct_at(1, ")") {
            self.bump();
        }
        if !self.is_punct(")") {
            loop {
                let ty = self.ty()?;
                let ploc = self.loc();
                let pname = match self.peek().clone() {
                    Tok::Ident(s) if !is_keyword(&s) => {
                        self.bump();
                        s
                    }
                    _ => String::new(),
                };
                params.push(Param {
                    ty,
                    name: pname,
                    loc: ploc,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let is_const = self.eat_ident("const");
        let body = if self.eat_punct(";") {
            None
        } else {
            Some(self.block()?)
        };
        Ok(FunctionDecl {
            name,
            loc,
            template,
            specs,
            ret,
            params,
            is_const,
            body,
        })
    }

    // ---- types ------------------------------------------------------------

    fn ty(&mut self) -> PResult<TypeExpr> {
        let loc = self.loc();
        let is_const = self.eat_ident("const");
        let kind = match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "void" => TypeKind::Void,
                "int" => TypeKind::Int,
                "bool" => TypeKind::Bool,
                "HDC" => TypeKind::Hdc,
                "auto" => TypeKind::Auto,
                _ if is_keyword(&s) => return self.expected("type"),
                _ => {
                    self.bump();
                    let args = if self.is_punct("<") {
                        self.template_args()?
                    } else {
                        Vec::new()
                    };
                    let reference = self.reference();
                    let is_const = is_const | self.eat_ident("const");
                    return Ok(TypeExpr {
                        kind: TypeKind::Named { name: s, args },
                        is_const,
                        reference,
                        loc,
                    });
                }
            },
            _ => return self.expected("type"),
        };
        self.bump();
        let reference = self.reference();
        Ok(TypeExpr {
            kind,
            is_const,
            reference,
            loc,
        })
    }

    fn reference(&mut self) -> RefKind {
        if self.eat_punct("&&") {
            RefKind::RValue
        } else if self.eat_punct("&") {
            RefKind::LValue
        } else {
            RefKind::None
        }
    }

    fn template_args(&mut self) -> PResult<Vec<TemplateArg>> {
        self.expect_punct("<")?;
        let mut args = Vec::new();
        if !self.is_punct(">") {
            loop {
                args.push(self.with_gt(false, |p| p.template_arg())?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(">")?;
        Ok(args)
    }

    fn template_arg(&mut self) -> PResult<TemplateArg> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(s) if s == "HDC" && self.is_punct_at(1, "::") => {
                Ok(TemplateArg::Expr(self.expr()?))
            }
            Tok::Ident(s) if s == "hdc" && self.is_punct_at(1, "<") => {
                Ok(TemplateArg::Expr(self.expr()?))
            }
            Tok::Ident(s) if matches!(s.as_str(), "true" | "false") => {
                Ok(TemplateArg::Expr(self.expr()?))
            }
            Tok::Ident(s) if is_keyword(&s) => Ok(TemplateArg::Type(self.ty()?)),
            Tok::Ident(s) => {
                if self.is_punct_at(1, ",") || self.is_punct_at(1, ">") {
                    self.bump();
                    Ok(TemplateArg::Name(s, loc))
                } else if self.is_punct_at(1, "::") {
                    Ok(TemplateArg::Expr(self.expr()?))
                } else if let Some(t) = self.attempt(|p| {
                    let t = p.ty()?;
                    if p.is_punct(",") || p.is_punct(">") {
                        Ok(t)
                    } else {
                        p.expected("`,` or `>`")
                    }
                }) {
                    Ok(TemplateArg::Type(t))
                } else {
                    Ok(TemplateArg::Expr(self.expr()?))
                }
            }
            _ => Ok(TemplateArg::Expr(self.expr()?)),
        }
    }

    /// Template arguments only when they are followed by one of `follow`.
    fn try_template_args(&mut self, follow: &[&str]) -> Option<Vec<TemplateArg>> {
        if !self.is_punct("<") {
            return None;
        }
        self.attempt(|p| {
            let args = p.template_args()?;
            if follow.iter().any(|f| p.is_punct(f)) {
                Ok(args)
            } else {
                p.expected("call after template arguments")
            }
        })
    }

    // ---- statements -------------------------------------------------------

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.expected("`}`");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        if self.is_punct("{") {
            return Ok(Stmt::Block(self.block()?));
        }
        if self.eat_punct(";") {
            return Ok(Stmt::Empty);
        }
        if self.eat_ident("return") {
            let value = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            return Ok(Stmt::Return(value, loc));
        }
        if self.eat_ident("if") {
            self.expect_punct("(")?;
            let cond = self.with_gt(true, |p| p.expr())?;
            self.expect_punct(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_ident("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            return Ok(Stmt::If { cond, then, els });
        }
        if self.eat_ident("for") {
            self.expect_punct("(")?;
            let init = if self.is_punct(";") {
                None
            } else {
                Some(Box::new(self.simple_stmt()?))
            };
            self.expect_punct(";")?;
            let cond = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            let step = if self.is_punct(")") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            return Ok(Stmt::For {
                init,
                cond,
                step,
                body,
            });
        }
        if let Some(launch) = self.try_launch()? {
            self.expect_punct(";")?;
            return Ok(Stmt::Launch(launch));
        }
        let s = self.simple_stmt()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    /// A variable declaration or an expression, without the trailing `;`.
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let decl = self.attempt(|p| {
            let ty = p.ty()?;
            let (name, loc) = p.expect_name()?;
            if p.is_punct("=") || p.is_punct(";") {
                Ok((ty, name, loc))
            } else {
                p.expected("`=` or `;`")
            }
        });
        if let Some((ty, name, loc)) = decl {
            let init = if self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            return Ok(Stmt::VarDecl {
                ty,
                name,
                init,
                loc,
            });
        }
        Ok(Stmt::Expr(self.expr()?))
    }

    fn try_launch(&mut self) -> PResult<Option<Launch>> {
        let loc = self.loc();
        let Tok::Ident(name) = self.peek().clone() else {
            return Ok(None);
        };
        if is_keyword(&name) {
            return Ok(None);
        }
        let start = self.pos;
        self.bump();
        let targs = self.try_template_args(&["<<<"]);
        if !self.is_punct("<<<") {
            self.pos = start;
            return Ok(None);
        }
        if self.opts.cuda_keywords != CudaKeywords::Accept {
            return self.err("kernel launch syntax `<<< >>>` needs a CUDA compiler");
        }
        self.bump();
        let grid = self.with_gt(false, |p| p.expr())?;
        self.expect_punct(",")?;
        let block = self.with_gt(false, |p| p.expr())?;
        self.expect_punct(">>>")?;
        let args = self.call_args()?;
        Ok(Some(Launch {
            callee: name,
            targs,
            grid,
            block,
            args,
            loc,
        }))
    }

    // ---- expressions ------------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        if let Tok::Ident(name) = self.peek().clone() {
            if !is_keyword(&name) {
                let op = match self.peek_at(1) {
                    Tok::Punct("=") => Some(AssignOp::Set),
                    Tok::Punct("+=") => Some(AssignOp::Add),
                    Tok::Punct("-=") => Some(AssignOp::Sub),
                    _ => None,
                };
                if let Some(op) = op {
                    self.bump();
                    self.bump();
                    let rhs = self.expr()?;
                    return Ok(Expr {
                        kind: ExprKind::Assign(op, name, Box::new(rhs)),
                        loc,
                    });
                }
            }
        }
        self.binary(0)
    }

    fn binop(&self, level: usize) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        let op = match (level, *p) {
            (0, "||") => BinOp::Or,
            (1, "&&") => BinOp::And,
            (2, "==") => BinOp::Eq,
            (2, "!=") => BinOp::Ne,
            (3, "<") => BinOp::Lt,
            (3, "<=") => BinOp::Le,
            (3, ">") if !self.no_gt => BinOp::Gt,
            (3, ">=") if !self.no_gt => BinOp::Ge,
            (4, "+") => BinOp::Add,
            (4, "-") => BinOp::Sub,
            (5, "*") => BinOp::Mul,
            (5, "/") => BinOp::Div,
            (5, "%") => BinOp::Rem,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop(level) {
            self.bump();
            let rhs = self.binary(level + 1)?;
            let loc = lhs.loc.clone();
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                loc,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnOp::Not, Box::new(e)),
                loc,
            });
        }
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnOp::Neg, Box::new(e)),
                loc,
            });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let increment = self.is_punct("++");
            self.bump();
            let (name, _) = self.expect_name()?;
            return Ok(Expr {
                kind: ExprKind::IncDec {
                    name,
                    increment,
                    prefix: true,
                },
                loc,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let (method, _) = self.expect_name()?;
                let targs = self.try_template_args(&["("]);
                let args = self.call_args()?;
                let loc = e.loc.clone();
                e = Expr {
                    kind: ExprKind::MemberCall {
                        recv: Box::new(e),
                        method,
                        targs,
                        args,
                    },
                    loc,
                };
                continue;
            }
            if self.is_punct("++") || self.is_punct("--") {
                if let ExprKind::Name(name) = &e.kind {
                    let increment = self.is_punct("++");
                    self.bump();
                    e = Expr {
                        kind: ExprKind::IncDec {
                            name: name.clone(),
                            increment,
                            prefix: false,
                        },
                        loc: e.loc,
                    };
                    continue;
                }
            }
            return Ok(e);
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.with_gt(true, |p| p.expr())?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let tok = self.peek().clone();
        let kind = match tok {
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.with_gt(true, |p| p.expr())?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Bool(s == "true")
                }
                "printf" => {
                    self.bump();
                    self.printf()?
                }
                "HDC" => {
                    self.bump();
                    self.expect_punct("::")?;
                    let v = match self.peek() {
                        Tok::Ident(v) => Hdc::from_name(v),
                        _ => None,
                    };
                    let Some(v) = v else {
                        return self.expected("`Hst`, `Dev` or `HstDev`");
                    };
                    self.bump();
                    ExprKind::HdcConst(v)
                }
                "hdc" if self.is_punct_at(1, "<") => {
                    self.bump();
                    self.expect_punct("<")?;
                    let t = self.with_gt(false, |p| p.ty())?;
                    self.expect_punct(">")?;
                    ExprKind::HdcTrait(t)
                }
                "std" => {
                    self.bump();
                    self.expect_punct("::")?;
                    let (m, _) = self.expect_name()?;
                    let targs = self.try_template_args(&["("]);
                    let args = self.call_args()?;
                    ExprKind::Call {
                        name: format!("std::{m}"),
                        targs,
                        args,
                    }
                }
                "int" | "bool" if self.is_punct_at(1, "{") => {
                    let t = self.ty()?;
                    self.expect_punct("{")?;
                    self.expect_punct("}")?;
                    ExprKind::Temp(t)
                }
                _ if is_keyword(&s) => return self.expected("expression"),
                _ => {
                    self.bump();
                    self.name_expr(s, loc.clone())?
                }
            },
            _ => return self.expected("expression"),
        };
        Ok(Expr { kind, loc })
    }

    fn name_expr(&mut self, name: String, loc: SrcLoc) -> PResult<ExprKind> {
        let targs = self.try_template_args(&["(", "{", "::"]);
        if self.is_punct("(") {
            let args = self.call_args()?;
            return Ok(ExprKind::Call { name, targs, args });
        }
        let ty = TypeExpr::plain(
            TypeKind::Named {
                name: name.clone(),
                args: targs.clone().unwrap_or_default(),
            },
            loc,
        );
        if self.eat_punct("{") {
            self.expect_punct("}")?;
            return Ok(ExprKind::Temp(ty));
        }
        if self.eat_punct("::") {
            let (member, _) = self.expect_name()?;
            if self.is_punct("(") || self.is_punct("<") {
                let mtargs = self.try_template_args(&["("]);
                let args = self.call_args()?;
                return Ok(ExprKind::StaticCall {
                    ty,
                    method: member,
                    targs: mtargs,
                    args,
                });
            }
            return Ok(ExprKind::StaticMember { ty, name: member });
        }
        if targs.is_some() {
            return self.expected("`(` after template arguments");
        }
        Ok(ExprKind::Name(name))
    }

    fn printf(&mut self) -> PResult<ExprKind> {
        self.expect_punct("(")?;
        let mut format = String::new();
        let mut saw = false;
        while let Tok::Str(s) = self.peek().clone() {
            format.push_str(&s);
            saw = true;
            self.bump();
        }
        if !saw {
            return self.expected("format string literal");
        }
        let mut conversions = 0;
        let mut chars = format.chars();
        while let Some(c) = chars.next() {
            if c == '%' {
                match chars.next() {
                    Some('d') => conversions += 1,
                    other => {
                        return self.err(format!(
                            "unsupported printf conversion `%{}`; only `%d` is supported",
                            other.map(String::from).unwrap_or_default()
                        ))
                    }
                }
            }
        }
        let mut args = Vec::new();
        while self.eat_punct(",") {
            args.push(self.with_gt(true, |p| p.expr())?);
        }
        self.expect_punct(")")?;
        if args.len() != conversions {
            return self.err(format!(
                "printf format has {conversions} `%d` conversion(s) but {} argument(s)",
                args.len()
            ));
        }
        Ok(ExprKind::Printf { format, args })
    }
}

impl PErr {
    fn at<T>(loc: &SrcLoc, message: impl Into<String>) -> PResult<T> {
        Err(PErr {
            line: loc.line,
            col: loc.col,
            message: message.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KERNEL: &str = r#"
__device__ void print() {
  printf( "." );
}

__global__ void kernel( int N ) {
  for( int n = 0; n < N; ++n ) {
    print();
  }
}

int main() {
  kernel<<< 4, 3 >>>( 2 );
  return cudaDeviceSynchronize();
}
"#;

    #[test]
    fn kernel_program_items() {
        let ast = parse(KERNEL, "k.mcu").unwrap();
        let names: Vec<_> = ast.functions().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["print", "kernel", "main"]);
        assert!(ast.function("kernel").unwrap().specs.global);
        assert!(ast.has_main);
        let main = ast.function("main").unwrap().body.as_ref().unwrap();
        assert!(matches!(&main[0], Stmt::Launch(l) if l.callee == "kernel"));
    }

    #[test]
    fn empty_unit() {
        let ast = parse("", "e.mcu").unwrap();
        assert!(ast.items.is_empty());
        assert!(!ast.has_main);
    }

    /// Every subset of {host, device, global}; the valid ones are exactly
    /// {}, {H}, {D}, {H,D}, {G}.
    #[test]
    fn specifier_combination_table() {
        let kws = ["__host__", "__device__", "__global__"];
        for mask in 0u8..8 {
            let mut src = String::new();
            for (i, k) in kws.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    src.push_str(k);
                    src.push(' ');
                }
            }
            src.push_str("void f() {}");
            let global = mask & 4 != 0;
            let valid = !global || mask == 4;
            let r = parse(&src, "s.mcu");
            assert_eq!(r.is_ok(), valid, "mask {mask:03b}: {src}");
            if let Err(d) = r {
                assert_eq!(d.code, Code::E0001);
            }
        }
    }

    #[test]
    fn comparison_is_not_template() {
        let ast = parse(
            "void f(int a, int N) { if (a < N) {} for (int n = 0; n < N; n++) {} }",
            "c",
        )
        .unwrap();
        let body = ast.function("f").unwrap().body.as_ref().unwrap();
        let Stmt::If { cond, .. } = &body[0] else {
            panic!()
        };
        assert!(matches!(cond.kind, ExprKind::Binary(BinOp::Lt, _, _)));
    }

    #[test]
    fn sfinae_forms() {
        let src = r#"
template< HDC x, REQUIRES( x == HDC::Hst ) >
__host__ void f1s() {}
template< typename T, HDC hdc = hdc< T > >
requires( hdc == HDC::Dev )
__device__ void func( T && t ) { return func_impl( std::forward<T>(t) ); }
template< HDC hdc_ >
struct S1d {
  template< HDC x = hdc_ > requires( x == HDC::Dev ) __device__ void call() {}
};
void g() { f1s< hdc<H> >(); S1d< HDC::Dev > x; x.call(); }
"#;
        let ast = parse(src, "s").unwrap();
        let f = ast.function("f1s").unwrap();
        assert!(f.template.as_ref().unwrap().requires.is_some());
        let func = ast.function("func").unwrap();
        let t = func.template.as_ref().unwrap();
        assert_eq!(t.params[1].name, "hdc");
        assert!(matches!(
            &t.params[1].default,
            Some(TemplateArg::Expr(Expr {
                kind: ExprKind::HdcTrait(_),
                ..
            }))
        ));
        assert_eq!(func.params[0].ty.reference, RefKind::RValue);
        let s = ast.struct_decl("S1d").unwrap();
        let call = s.functions().next().unwrap();
        assert!(matches!(
            &call.template.as_ref().unwrap().params[0].default,
            Some(TemplateArg::Expr(Expr { kind: ExprKind::Name(n), .. })) if n == "hdc_"
        ));
        let g = ast.function("g").unwrap().body.as_ref().unwrap();
        assert!(matches!(&g[1], Stmt::VarDecl { name, .. } if name == "x"));
    }

    #[test]
    fn conditional_specifiers_and_struct_decoration() {
        let src = "__device__ class S1 { void call(); __host__ void init(); };\n\
                   template< typename T >\n__host__( hdc<T> == HDC::Hst ) __device__( hdc<T> == HDC::Dev )\nvoid wrap() { T{}.call(); }";
        let ast = parse(src, "p").unwrap();
        let s = ast.struct_decl("S1").unwrap();
        assert!(s.specs.device.is_some());
        assert_eq!(s.keyword, StructKeyword::Class);
        assert!(s.functions().all(|f| f.body.is_none()));
        let w = ast.function("wrap").unwrap();
        assert!(w.specs.has_predicates());
    }

    #[test]
    fn erase_and_reject_modes() {
        let src = "__host__ __device__ void f() {}\nint main() { f(); }";
        let erase = ParseOptions {
            cuda_keywords: CudaKeywords::Erase,
        };
        let ast = parse_with(src, "a", erase).unwrap();
        assert!(!ast.function("f").unwrap().specs.is_decorated());
        let reject = ParseOptions {
            cuda_keywords: CudaKeywords::Reject,
        };
        assert_eq!(parse_with(src, "a", reject).unwrap_err().code, Code::E0001);
    }

    #[test]
    fn printf_subset() {
        assert!(parse("void f() { printf(\"%d\", 3); }", "a").is_ok());
        assert_eq!(
            parse("void f() { printf(\"%s\", 3); }", "a")
                .unwrap_err()
                .code,
            Code::E0001
        );
        assert!(parse("void f() { printf(\"%d\"); }", "a").is_err());
    }

    #[test]
    fn pragma_marks_next_function() {
        let ast = parse(
            "#pragma hd_warning_disable\ntemplate<typename T> __host__ __device__ void f() {}",
            "a",
        )
        .unwrap();
        assert!(matches!(ast.items[0], Item::Pragma(_)));
        assert!(ast.function("f").unwrap().specs.pragma_suppress);
        assert!(parse("#pragma hd_warning_disable\nstruct S {};", "a").is_err());
        assert!(parse("#pragma once\n", "a").is_err());
    }

    #[test]
    fn main_without_specifiers() {
        assert!(parse("__device__ int main() {}", "a").is_err());
    }

    #[test]
    fn error_location_points_at_token() {
        let d = parse("void f() {\n  return 1 +;\n}", "x.mcu").unwrap_err();
        assert_eq!((d.loc.line, d.loc.col), (2, 13));
        assert!(
            d.message.starts_with("expected expression"),
            "{}",
            d.message
        );
    }
}
