//! Canonical source form. Every binary, unary and assignment expression is
//! parenthesized so the output never depends on precedence.

use super::ast::*;
use std::fmt::Write;

pub fn print(ast: &Ast) -> String {
    let mut p = Printer::default();
    for item in &ast.items {
        p.item(item);
    }
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    depth: usize,
}

impl Printer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Struct(s) => self.struct_decl(s),
            Item::Function(f) => self.function(f),
            Item::Const(c) => self.line(&const_decl(c)),
            Item::Pragma(p) => self.line(&format!("#pragma {}", p.kind.name())),
            Item::HdcEnum(_) => self.line("enum class HDC { Hst, Dev, HstDev };"),
        }
    }

    fn struct_decl(&mut self, s: &StructDecl) {
        if let Some(t) = &s.template {
            self.line(&template_header(t));
        }
        let kw = match s.keyword {
            StructKeyword::Struct => "struct",
            StructKeyword::Class => "class",
        };
        self.line(&format!("{}{kw} {} {{", specifiers(&s.specs), s.name));
        self.depth += 1;
        for m in &s.members {
            match m {
                Member::Function(f) => self.function(f),
                Member::Const(c) => self.line(&const_decl(c)),
                Member::Pragma(p) => self.line(&format!("#pragma {}", p.kind.name())),
            }
        }
        self.depth -= 1;
        self.line("};");
    }

    fn function(&mut self, f: &FunctionDecl) {
        if let Some(t) = &f.template {
            self.line(&template_header(t));
        }
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| {
                if p.name.is_empty() {
                    type_expr(&p.ty)
                } else {
                    format!("{} {}", type_expr(&p.ty), p.name)
                }
            })
            .collect();
        let head = format!(
            "{}{} {}({}){}",
            specifiers(&f.specs),
            type_expr(&f.ret),
            f.name,
            params.join(", "),
            if f.is_const { " const" } else { "" }
        );
        match &f.body {
            None => self.line(&format!("{head};")),
            Some(body) => {
                self.line(&format!("{head} {{"));
                self.stmts(body);
                self.line("}");
            }
        }
    }

    fn stmts(&mut self, body: &[Stmt]) {
        self.depth += 1;
        for s in body {
            self.stmt(s);
        }
        self.depth -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Block(b) => {
                self.line("{");
                self.stmts(b);
                self.line("}");
            }
            Stmt::Empty => self.line(";"),
            Stmt::Return(None, _) => self.line("return;"),
            Stmt::Return(Some(e), _) => self.line(&format!("return {};", expr(e))),
            Stmt::If { cond, then, els } => {
                self.line(&format!("if ({})", expr(cond)));
                // Braces keep a nested else from rebinding.
                if els.is_some() && !matches!(**then, Stmt::Block(_)) {
                    self.line("{");
                    self.stmts(std::slice::from_ref(then));
                    self.line("}");
                } else {
                    self.nested(then);
                }
                if let Some(e) = els {
                    self.line("else");
                    self.nested(e);
                }
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                let init = init.as_deref().map(simple_stmt).unwrap_or_default();
                let cond = cond.as_ref().map(expr).unwrap_or_default();
                let step = step.as_ref().map(expr).unwrap_or_default();
                self.line(&format!("for ({init}; {cond}; {step})"));
                self.nested(body);
            }
            Stmt::VarDecl { .. } | Stmt::Expr(_) => self.line(&format!("{};", simple_stmt(s))),
            Stmt::Launch(l) => {
                let targs = l.targs.as_deref().map(template_args).unwrap_or_default();
                self.line(&format!(
                    "{}{targs}<<<{}, {}>>>({});",
                    l.callee,
                    expr(&l.grid),
                    expr(&l.block),
                    exprs(&l.args)
                ));
            }
        }
    }

    fn nested(&mut self, s: &Stmt) {
        if matches!(s, Stmt::Block(_)) {
            self.stmt(s);
        } else {
            self.depth += 1;
            self.stmt(s);
            self.depth -= 1;
        }
    }
}

fn simple_stmt(s: &Stmt) -> String {
    match s {
        Stmt::VarDecl { ty, name, init, .. } => match init {
            Some(e) => format!("{} {name} = {}", type_expr(ty), expr(e)),
            None => format!("{} {name}", type_expr(ty)),
        },
        Stmt::Expr(e) => expr(e),
        other => unreachable!("not a simple statement: {other:?}"),
    }
}

fn const_decl(c: &ConstDecl) -> String {
    format!(
        "static constexpr {} {} = {};",
        type_expr(&c.ty),
        c.name,
        expr(&c.value)
    )
}

fn specifiers(s: &SpecifierSet) -> String {
    let mut out = String::new();
    if s.is_static {
        out.push_str("static ");
    }
    if s.constexpr_flag {
        out.push_str("constexpr ");
    }
    for (kw, spec) in [("__host__", &s.host), ("__device__", &s.device)] {
        match spec {
            Some(SpaceSpec {
                predicate: Some(p), ..
            }) => {
                let _ = write!(out, "{kw}({}) ", expr(p));
            }
            Some(_) => {
                let _ = write!(out, "{kw} ");
            }
            None => {}
        }
    }
    if s.global {
        out.push_str("__global__ ");
    }
    out
}

pub(crate) fn template_header(t: &TemplateHeader) -> String {
    let params: Vec<String> = t
        .params
        .iter()
        .map(|p| {
            let kw = match p.kind {
                TemplateParamKind::Type => "typename",
                TemplateParamKind::Hdc => "HDC",
            };
            match &p.default {
                Some(d) => format!("{kw} {} = {}", p.name, template_arg(d)),
                None => format!("{kw} {}", p.name),
            }
        })
        .collect();
    let mut s = format!("template <{}>", params.join(", "));
    if let Some(r) = &t.requires {
        let _ = write!(s, " requires ({})", expr(r));
    }
    s
}

fn template_args(args: &[TemplateArg]) -> String {
    let v: Vec<String> = args.iter().map(template_arg).collect();
    format!("<{}>", v.join(", "))
}

fn template_arg(a: &TemplateArg) -> String {
    match a {
        TemplateArg::Type(t) => type_expr(t),
        TemplateArg::Expr(e) => expr(e),
        TemplateArg::Name(n, _) => n.clone(),
    }
}

pub(crate) fn type_expr(t: &TypeExpr) -> String {
    let base = match &t.kind {
        TypeKind::Void => "void".to_string(),
        TypeKind::Int => "int".to_string(),
        TypeKind::Bool => "bool".to_string(),
        TypeKind::Hdc => "HDC".to_string(),
        TypeKind::Auto => "auto".to_string(),
        TypeKind::Named { name, args } if args.is_empty() => name.clone(),
        TypeKind::Named { name, args } => format!("{name}{}", template_args(args)),
    };
    let r = match t.reference {
        RefKind::None => "",
        RefKind::LValue => "&",
        RefKind::RValue => "&&",
    };
    format!("{}{base}{r}", if t.is_const { "const " } else { "" })
}

fn exprs(es: &[Expr]) -> String {
    es.iter().map(expr).collect::<Vec<_>>().join(", ")
}

fn call(name: &str, targs: &Option<Vec<TemplateArg>>, args: &[Expr]) -> String {
    let targs = targs.as_deref().map(template_args).unwrap_or_default();
    format!("{name}{targs}({})", exprs(args))
}

pub(crate) fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::HdcConst(h) => format!("HDC::{}", h.name()),
        ExprKind::Name(n) => n.clone(),
        ExprKind::Unary(op, x) => {
            let op = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            format!("({op}{})", expr(x))
        }
        ExprKind::Binary(op, a, b) => format!("({} {} {})", expr(a), op.symbol(), expr(b)),
        ExprKind::Assign(op, name, v) => {
            let op = match op {
                AssignOp::Set => "=",
                AssignOp::Add => "+=",
                AssignOp::Sub => "-=",
            };
            format!("({name} {op} {})", expr(v))
        }
        ExprKind::IncDec {
            name,
            increment,
            prefix,
        } => {
            let op = if *increment { "++" } else { "--" };
            if *prefix {
                format!("{op}{name}")
            } else {
                format!("{name}{op}")
            }
        }
        ExprKind::Call { name, targs, args } => call(name, targs, args),
        ExprKind::StaticCall {
            ty,
            method,
            targs,
            args,
        } => format!("{}::{}", type_expr(ty), call(method, targs, args)),
        ExprKind::MemberCall {
            recv,
            method,
            targs,
            args,
        } => format!("{}.{}", expr(recv), call(method, targs, args)),
        ExprKind::StaticMember { ty, name } => format!("{}::{name}", type_expr(ty)),
        ExprKind::Temp(t) => format!("{}{{}}", type_expr(t)),
        ExprKind::HdcTrait(t) => format!("hdc<{}>", type_expr(t)),
        ExprKind::Printf { format, args } => {
            let mut lit = String::from("\"");
            for c in format.chars() {
                match c {
                    '"' => lit.push_str("\\\""),
                    '\\' => lit.push_str("\\\\"),
                    '\n' => lit.push_str("\\n"),
                    '\t' => lit.push_str("\\t"),
                    '\0' => lit.push_str("\\0"),
                    c => lit.push(c),
                }
            }
            lit.push('"');
            if args.is_empty() {
                format!("printf({lit})")
            } else {
                format!("printf({lit}, {})", exprs(args))
            }
        }
    }
}
