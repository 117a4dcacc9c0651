//! Name resolution, the `hdc` trait, requires-clause evaluation and memoized
//! template instantiation, for one compile pass.

mod types;

pub use types::{ExecSpace, Hdc, Side, SpaceSet, StructTy, TArg, Ty};

use std::cell::Cell;
use std::collections::HashMap;

use crate::diag::{Code, Diagnostic, SrcLoc};
use crate::profile::{CompileProfile, Compiler};
use crate::spacecheck::Mode;
use crate::syntax::ast::*;
use crate::syntax::{print_template_header, print_type, PassKind};

pub type FnId = usize;
pub type InstId = usize;

/// Functions provided by the runtime rather than the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    ReleaseAssert,
    Trap,
    Abort,
    DeviceSynchronize,
    Forward,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::ReleaseAssert => "release_assert",
            Builtin::Trap => "__trap",
            Builtin::Abort => "std::abort",
            Builtin::DeviceSynchronize => "cudaDeviceSynchronize",
            Builtin::Forward => "std::forward",
        }
    }

    pub fn spaces(self) -> SpaceSet {
        match self {
            Builtin::ReleaseAssert | Builtin::Forward => SpaceSet::HOST_DEVICE,
            Builtin::Trap => SpaceSet::DEVICE,
            Builtin::Abort | Builtin::DeviceSynchronize => SpaceSet::HOST,
        }
    }

    fn arity(self) -> usize {
        match self {
            Builtin::ReleaseAssert | Builtin::Forward => 1,
            _ => 0,
        }
    }

    fn lookup(name: &str, compiler: Compiler) -> Option<Builtin> {
        let b = match name {
            "release_assert" => Builtin::ReleaseAssert,
            "__trap" => Builtin::Trap,
            "std::abort" => Builtin::Abort,
            "cudaDeviceSynchronize" => Builtin::DeviceSynchronize,
            "std::forward" => Builtin::Forward,
            _ => return None,
        };
        let cuda_only = matches!(b, Builtin::Trap | Builtin::DeviceSynchronize);
        (!cuda_only || compiler == Compiler::Nvcc).then_some(b)
    }
}

/// Compile-time value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstVal {
    Int(i64),
    Bool(bool),
    Hdc(Hdc),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub code: Code,
    pub loc: SrcLoc,
    pub message: String,
}

impl EvalError {
    fn new(code: Code, loc: &SrcLoc, message: impl Into<String>) -> Self {
        EvalError {
            code,
            loc: loc.clone(),
            message: message.into(),
        }
    }

    pub fn into_diagnostic(self) -> Diagnostic {
        Diagnostic::new(self.code, self.loc, self.message)
    }
}

type EResult<T> = Result<T, EvalError>;

/// Template parameter bindings in scope for an instance: the owner struct's
/// parameters first, then the function's own.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    pub owner: Option<StructTy>,
    pub params: Vec<(String, TArg)>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Option<&TArg> {
        self.params
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
    }
}

/// Identifies an instance independently of the compile pass.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstKey {
    pub decl: String,
    pub owner: Option<StructTy>,
    pub targs: Vec<TArg>,
    /// Caller's space set, only for context-dependent instances under proposal2.
    pub context: Option<SpaceSet>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub id: InstId,
    pub fn_id: FnId,
    pub key: InstKey,
    pub bindings: Bindings,
    pub spaces: SpaceSet,
    /// Sides present only because `--relaxed-constexpr` widened a constexpr
    /// function. Calls made from these sides are not graded.
    pub widened: SpaceSet,
    pub constexpr_flag: bool,
    pub pragma_suppress: bool,
    pub ret: Option<Ty>,
    /// Human-readable name such as `wrap<H>`.
    pub display: String,
    pub first_site: SrcLoc,
}

impl Instance {
    /// Spaces without constexpr relaxation.
    pub fn declared_spaces(&self) -> SpaceSet {
        SpaceSet {
            host: self.spaces.host && !self.widened.host,
            device: self.spaces.device && !self.widened.device,
            global: self.spaces.global,
        }
    }
}

#[derive(Debug)]
pub struct FnEntry<'a> {
    pub decl: &'a FunctionDecl,
    pub owner: Option<&'a StructDecl>,
    pub key: String,
}

#[derive(Debug, Clone, Copy)]
pub enum CallShape<'c> {
    /// Unqualified or `std::`-qualified name.
    Free(&'c str),
    /// `recv.f()` or `T::f()`.
    Member(&'c StructTy, &'c str),
}

#[derive(Debug, Clone, Copy)]
pub struct CallSite<'c> {
    pub shape: CallShape<'c>,
    pub targs: Option<&'c [TemplateArg]>,
    pub arg_tys: &'c [Ty],
    pub caller: InstId,
    pub side: Side,
    pub loc: &'c SrcLoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Callee {
    Inst(InstId),
    Builtin(Builtin),
}

const MAX_EVAL_DEPTH: u32 = 64;

pub struct Sema<'a> {
    ast: &'a Ast,
    pass: PassKind,
    profile: CompileProfile,
    mode: Mode,
    fns: Vec<FnEntry<'a>>,
    by_key: HashMap<String, FnId>,
    free: HashMap<&'a str, Vec<FnId>>,
    members: HashMap<(&'a str, &'a str), Vec<FnId>>,
    structs: HashMap<&'a str, &'a StructDecl>,
    globals: HashMap<&'a str, &'a ConstDecl>,
    instances: Vec<Instance>,
    memo: HashMap<InstKey, InstId>,
    diags: Vec<Diagnostic>,
    depth: Cell<u32>,
}

impl<'a> Sema<'a> {
    /// Builds the symbol table. Duplicate and malformed declarations are
    /// reported through [`Sema::take_diagnostics`].
    pub fn new(ast: &'a Ast, pass: PassKind, profile: &CompileProfile, mode: Mode) -> Self {
        let mut s = Sema {
            ast,
            pass,
            profile: *profile,
            mode,
            fns: Vec::new(),
            by_key: HashMap::new(),
            free: HashMap::new(),
            members: HashMap::new(),
            structs: HashMap::new(),
            globals: HashMap::new(),
            instances: Vec::new(),
            memo: HashMap::new(),
            diags: Vec::new(),
            depth: Cell::new(0),
        };
        let mut main_seen = false;
        for item in &ast.items {
            match item {
                Item::Struct(sd) => s.add_struct(sd),
                Item::Function(f) => {
                    if f.name == "main" {
                        if main_seen {
                            s.diags.push(Diagnostic::new(
                                Code::E0102,
                                f.loc.clone(),
                                "redefinition of `main`",
                            ));
                            continue;
                        }
                        main_seen = true;
                    }
                    s.add_function(f, None);
                }
                Item::Const(c) => {
                    if s.globals.contains_key(c.name.as_str()) {
                        s.diags.push(Diagnostic::new(
                            Code::E0102,
                            c.loc.clone(),
                            format!("redefinition of `{}`", c.name),
                        ));
                    } else {
                        s.globals.insert(&c.name, c);
                    }
                }
                Item::Pragma(_) | Item::HdcEnum(_) => {}
            }
        }
        s
    }

    fn add_struct(&mut self, sd: &'a StructDecl) {
        if self.structs.contains_key(sd.name.as_str()) {
            self.diags.push(Diagnostic::new(
                Code::E0102,
                sd.loc.clone(),
                format!("redefinition of struct `{}`", sd.name),
            ));
            return;
        }
        self.structs.insert(&sd.name, sd);
        if sd.specs.has_predicates() {
            self.diags.push(Diagnostic::new(
                Code::E0001,
                sd.loc.clone(),
                "a struct cannot carry conditional execution space specifiers",
            ));
        } else if sd.specs.is_decorated() && self.mode != Mode::Proposal2 {
            self.diags.push(Diagnostic::new(
                Code::E0001,
                sd.loc.clone(),
                "execution space specifiers on a struct need proposal2 semantics",
            ));
        }
        if let Some(c) = sd.constant("hdc") {
            if c.ty.kind != TypeKind::Hdc {
                self.diags
                    .push(bad_hdc_member(&sd.name, &c.loc).into_diagnostic());
            }
        }
        for f in sd.functions() {
            self.add_function(f, Some(sd));
        }
    }

    fn add_function(&mut self, f: &'a FunctionDecl, owner: Option<&'a StructDecl>) {
        if f.specs.has_predicates() && self.mode != Mode::Proposal1 {
            let loc = f
                .specs
                .host
                .iter()
                .chain(f.specs.device.iter())
                .find(|s| s.predicate.is_some())
                .map(|s| s.loc.clone())
                .unwrap_or_else(|| f.loc.clone());
            self.diags.push(Diagnostic::new(
                Code::E0001,
                loc,
                "conditional execution space specifiers need proposal1 semantics",
            ));
        }
        let key = self.decl_key(f, owner);
        if let Some(&prev) = self.by_key.get(&key) {
            let existing = &mut self.fns[prev];
            match (existing.decl.body.is_some(), f.body.is_some()) {
                (true, true) => self.diags.push(Diagnostic::new(
                    Code::E0102,
                    f.loc.clone(),
                    format!("redefinition of `{}`", f.name),
                )),
                (false, true) => existing.decl = f,
                _ => {}
            }
            return;
        }
        let id = self.fns.len();
        self.fns.push(FnEntry {
            decl: f,
            owner,
            key: key.clone(),
        });
        self.by_key.insert(key, id);
        match owner {
            Some(sd) => self
                .members
                .entry((&sd.name, &f.name))
                .or_default()
                .push(id),
            None => self.free.entry(&f.name).or_default().push(id),
        }
    }

    /// Signature string used for duplicate detection and for matching
    /// declarations across passes. Execution spaces only count under proposal2.
    fn decl_key(&self, f: &FunctionDecl, owner: Option<&StructDecl>) -> String {
        let mut k = String::new();
        if let Some(o) = owner {
            k.push_str(&o.name);
            k.push_str("::");
        }
        k.push_str(&f.name);
        if let Some(t) = &f.template {
            k.push_str(&print_template_header(t));
        }
        let params: Vec<String> = f.params.iter().map(|p| print_type(&p.ty)).collect();
        k.push('(');
        k.push_str(&params.join(", "));
        k.push(')');
        if f.is_const {
            k.push_str(" const");
        }
        if self.mode == Mode::Proposal2 {
            let s = &f.specs;
            k.push_str(&format!(
                " [{}{}{}]",
                if s.host.is_some() { "H" } else { "" },
                if s.device.is_some() { "D" } else { "" },
                if s.global { "G" } else { "" }
            ));
        }
        k
    }

    pub fn ast(&self) -> &'a Ast {
        self.ast
    }

    pub fn pass(&self) -> PassKind {
        self.pass
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn profile(&self) -> &CompileProfile {
        &self.profile
    }

    pub fn functions(&self) -> &[FnEntry<'a>] {
        &self.fns
    }

    pub fn decl(&self, id: FnId) -> &'a FunctionDecl {
        self.fns[id].decl
    }

    pub fn instance(&self, id: InstId) -> &Instance {
        &self.instances[id]
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance_decl(&self, id: InstId) -> &'a FunctionDecl {
        self.fns[self.instances[id].fn_id].decl
    }

    pub fn struct_decl(&self, name: &str) -> Option<&'a StructDecl> {
        self.structs.get(name).copied()
    }

    pub fn take_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diags)
    }

    /// Declaration keys of every function in this pass.
    pub fn decl_keys(&self) -> impl Iterator<Item = (&str, &'a FunctionDecl)> {
        self.fns.iter().map(|f| (f.key.as_str(), f.decl))
    }

    /// Non-template functions, including non-template members of non-template
    /// structs. These are compiled whether or not anything calls them.
    pub fn roots(&self) -> Vec<FnId> {
        (0..self.fns.len())
            .filter(|&i| {
                let f = &self.fns[i];
                f.decl.template.is_none() && f.owner.is_none_or(|o| o.template.is_none())
            })
            .collect()
    }

    pub fn main_fn(&self) -> Option<FnId> {
        self.free.get("main").and_then(|v| v.first().copied())
    }

    /// Instantiates a root (non-template) function in its default context.
    pub fn instantiate_root(&mut self, id: FnId) -> InstId {
        let f = &self.fns[id];
        let owner = f.owner.map(|o| StructTy {
            name: o.name.clone(),
            args: Vec::new(),
        });
        let loc = f.decl.loc.clone();
        self.instantiate(
            id,
            Bindings {
                owner,
                params: Vec::new(),
            },
            SpaceSet::HOST,
            &loc,
        )
    }

    // ---- constants and types ---------------------------------------------

    fn struct_bindings(&self, st: &StructTy) -> Bindings {
        let params = self
            .structs
            .get(st.name.as_str())
            .and_then(|sd| sd.template.as_ref())
            .map(|t| {
                t.params
                    .iter()
                    .zip(&st.args)
                    .map(|(p, a)| (p.name.clone(), a.clone()))
                    .collect()
            })
            .unwrap_or_default();
        Bindings {
            owner: Some(st.clone()),
            params,
        }
    }

    fn enter(&self, loc: &SrcLoc) -> EResult<()> {
        let d = self.depth.get();
        if d >= MAX_EVAL_DEPTH {
            return Err(EvalError::new(
                Code::E0001,
                loc,
                "constant evaluation nests too deeply",
            ));
        }
        self.depth.set(d + 1);
        Ok(())
    }

    fn leave(&self) {
        self.depth.set(self.depth.get() - 1);
    }

    /// Evaluates a constant expression under `b`.
    pub fn eval_const(&self, e: &Expr, b: &Bindings) -> EResult<ConstVal> {
        self.enter(&e.loc)?;
        let r = self.eval_inner(e, b);
        self.leave();
        r
    }

    fn eval_inner(&self, e: &Expr, b: &Bindings) -> EResult<ConstVal> {
        use ConstVal::*;
        let loc = &e.loc;
        let mismatch = || EvalError::new(Code::E0001, loc, "operand types do not match");
        Ok(match &e.kind {
            ExprKind::Int(n) => Int(*n),
            ExprKind::Bool(v) => Bool(*v),
            ExprKind::HdcConst(h) => Hdc(*h),
            ExprKind::Name(n) => self.eval_name(n, b, loc)?,
            ExprKind::Unary(op, x) => match (op, self.eval_const(x, b)?) {
                (UnOp::Not, Bool(v)) => Bool(!v),
                (UnOp::Neg, Int(v)) => Int(v.checked_neg().ok_or_else(|| overflow(loc))?),
                _ => return Err(mismatch()),
            },
            ExprKind::Binary(op, l, r) => {
                let lv = self.eval_const(l, b)?;
                match (op, lv) {
                    (BinOp::And, Bool(false)) => return Ok(Bool(false)),
                    (BinOp::Or, Bool(true)) => return Ok(Bool(true)),
                    _ => {}
                }
                let rv = self.eval_const(r, b)?;
                match (op, lv, rv) {
                    (BinOp::And | BinOp::Or, Bool(_), Bool(y)) => Bool(y),
                    (BinOp::Eq, x, y) if same_kind(x, y) => Bool(x == y),
                    (BinOp::Ne, x, y) if same_kind(x, y) => Bool(x != y),
                    (_, Int(x), Int(y)) => int_binop(*op, x, y, loc)?,
                    _ => return Err(mismatch()),
                }
            }
            ExprKind::StaticMember { ty, name } => {
                let Ty::Struct(st) = self.resolve_type(ty, b)? else {
                    return Err(EvalError::new(
                        Code::E0101,
                        loc,
                        format!("`{}` is not a struct", print_type(ty)),
                    ));
                };
                self.struct_const(&st, name, loc)?
            }
            ExprKind::HdcTrait(t) => Hdc(self.compute_hdc(&self.resolve_type(t, b)?)?),
            _ => {
                return Err(EvalError::new(
                    Code::E0001,
                    loc,
                    "expression is not a constant",
                ))
            }
        })
    }

    fn eval_name(&self, n: &str, b: &Bindings, loc: &SrcLoc) -> EResult<ConstVal> {
        match b.get(n) {
            Some(TArg::Hdc(h)) => return Ok(ConstVal::Hdc(*h)),
            Some(TArg::Ty(t)) => {
                return Err(EvalError::new(
                    Code::E0001,
                    loc,
                    format!("type `{t}` used as a value"),
                ))
            }
            None => {}
        }
        if let Some(owner) = &b.owner {
            let has = self
                .structs
                .get(owner.name.as_str())
                .is_some_and(|sd| sd.constant(n).is_some());
            if has {
                return self.struct_const(owner, n, loc);
            }
        }
        if let Some(c) = self.globals.get(n) {
            return self.const_decl_value(c, &Bindings::default());
        }
        if n == "cuda_arch" {
            return Ok(ConstVal::Bool(self.pass == PassKind::DevicePass));
        }
        Err(EvalError::new(
            Code::E0101,
            loc,
            format!("use of undeclared identifier `{n}`"),
        ))
    }

    fn struct_const(&self, st: &StructTy, name: &str, loc: &SrcLoc) -> EResult<ConstVal> {
        let sd = self.structs.get(st.name.as_str()).ok_or_else(|| {
            EvalError::new(Code::E0101, loc, format!("unknown type `{}`", st.name))
        })?;
        let c = sd.constant(name).ok_or_else(|| {
            EvalError::new(
                Code::E0101,
                loc,
                format!("no member named `{name}` in `{st}`"),
            )
        })?;
        if name == "hdc" && c.ty.kind != TypeKind::Hdc {
            return Err(bad_hdc_member(&st.name, &c.loc));
        }
        self.const_decl_value(c, &self.struct_bindings(st))
    }

    fn const_decl_value(&self, c: &ConstDecl, b: &Bindings) -> EResult<ConstVal> {
        let v = self.eval_const(&c.value, b)?;
        let ok = matches!(
            (&c.ty.kind, v),
            (TypeKind::Int, ConstVal::Int(_))
                | (TypeKind::Bool, ConstVal::Bool(_))
                | (TypeKind::Hdc, ConstVal::Hdc(_))
                | (TypeKind::Auto, _)
        );
        if !ok {
            return Err(EvalError::new(
                Code::E0001,
                &c.loc,
                format!("initializer of `{}` does not match its type", c.name),
            ));
        }
        Ok(v)
    }

    /// Declared type of a constant visible by `name`, for typing bodies.
    pub fn name_type(&self, name: &str, b: &Bindings) -> Option<Ty> {
        match b.get(name) {
            Some(TArg::Hdc(_)) => return Some(Ty::Hdc),
            Some(TArg::Ty(_)) => return None,
            None => {}
        }
        let decl = b
            .owner
            .as_ref()
            .and_then(|o| self.structs.get(o.name.as_str()))
            .and_then(|sd| sd.constant(name))
            .or_else(|| self.globals.get(name).copied());
        match decl {
            Some(c) => match c.ty.kind {
                TypeKind::Int => Some(Ty::Int),
                TypeKind::Bool => Some(Ty::Bool),
                TypeKind::Hdc => Some(Ty::Hdc),
                _ => self.resolve_type(&c.ty, b).ok(),
            },
            None if name == "cuda_arch" => Some(Ty::Bool),
            None => None,
        }
    }

    pub fn resolve_type(&self, t: &TypeExpr, b: &Bindings) -> EResult<Ty> {
        let loc = &t.loc;
        Ok(match &t.kind {
            TypeKind::Void => Ty::Void,
            TypeKind::Int => Ty::Int,
            TypeKind::Bool => Ty::Bool,
            TypeKind::Hdc => Ty::Hdc,
            TypeKind::Auto => {
                return Err(EvalError::new(
                    Code::E0001,
                    loc,
                    "`auto` is only allowed for initialized local variables",
                ))
            }
            TypeKind::Named { name, args } => {
                if args.is_empty() {
                    match b.get(name) {
                        Some(TArg::Ty(t)) => return Ok(t.clone()),
                        Some(TArg::Hdc(_)) => {
                            return Err(EvalError::new(
                                Code::E0001,
                                loc,
                                format!("`{name}` is a value, not a type"),
                            ))
                        }
                        None => {}
                    }
                }
                let Some(sd) = self.structs.get(name.as_str()) else {
                    return Err(EvalError::new(
                        Code::E0101,
                        loc,
                        format!("unknown type `{name}`"),
                    ));
                };
                // Inside a struct template its bare name means the current instance.
                if args.is_empty() && sd.template.is_some() {
                    if let Some(o) = b.owner.as_ref().filter(|o| &o.name == name) {
                        return Ok(Ty::Struct(o.clone()));
                    }
                }
                Ty::Struct(self.struct_instance(sd, args, b, loc)?)
            }
        })
    }

    fn struct_instance(
        &self,
        sd: &StructDecl,
        args: &[TemplateArg],
        b: &Bindings,
        loc: &SrcLoc,
    ) -> EResult<StructTy> {
        let params: &[TemplateParam] = sd.template.as_ref().map_or(&[], |t| &t.params);
        if args.len() > params.len() {
            return Err(EvalError::new(
                Code::E0001,
                loc,
                format!("too many template arguments for `{}`", sd.name),
            ));
        }
        let mut partial = Bindings {
            owner: None,
            params: Vec::new(),
        };
        let mut out = Vec::new();
        for (i, p) in params.iter().enumerate() {
            let v = match (args.get(i), &p.default) {
                (Some(a), _) => self.template_arg(a, p.kind, b)?,
                (None, Some(d)) => self.template_arg(d, p.kind, &partial)?,
                (None, None) => {
                    return Err(EvalError::new(
                        Code::E0001,
                        loc,
                        format!("missing template argument `{}` for `{}`", p.name, sd.name),
                    ))
                }
            };
            partial.params.push((p.name.clone(), v.clone()));
            out.push(v);
        }
        let st = StructTy {
            name: sd.name.clone(),
            args: out,
        };
        Ok(st)
    }

    /// Resolves a template argument for a parameter of `kind`.
    pub fn template_arg(
        &self,
        a: &TemplateArg,
        kind: TemplateParamKind,
        b: &Bindings,
    ) -> EResult<TArg> {
        match (kind, a) {
            (TemplateParamKind::Type, TemplateArg::Type(t)) => {
                Ok(TArg::Ty(self.resolve_type(t, b)?))
            }
            (TemplateParamKind::Type, TemplateArg::Name(n, loc)) => {
                let t = TypeExpr::plain(
                    TypeKind::Named {
                        name: n.clone(),
                        args: Vec::new(),
                    },
                    loc.clone(),
                );
                Ok(TArg::Ty(self.resolve_type(&t, b)?))
            }
            (TemplateParamKind::Type, TemplateArg::Expr(e)) => Err(EvalError::new(
                Code::E0001,
                &e.loc,
                "expected a type template argument",
            )),
            (TemplateParamKind::Hdc, a) => {
                let (v, loc) = match a {
                    TemplateArg::Expr(e) => (self.eval_const(e, b)?, &e.loc),
                    TemplateArg::Name(n, loc) => (self.eval_name(n, b, loc)?, loc),
                    TemplateArg::Type(t) => match t.simple_name() {
                        Some(n) => (self.eval_name(n, b, &t.loc)?, &t.loc),
                        None => {
                            return Err(EvalError::new(
                                Code::E0001,
                                &t.loc,
                                "expected an HDC constant",
                            ))
                        }
                    },
                };
                match v {
                    ConstVal::Hdc(h) => Ok(TArg::Hdc(h)),
                    _ => Err(EvalError::new(Code::E0001, loc, "expected an HDC constant")),
                }
            }
        }
    }

    /// The `hdc<T>` trait: the struct's `hdc` constant if it has one, else
    /// `Hst`. Fundamental types give `HstDev` when so configured.
    pub fn compute_hdc(&self, t: &Ty) -> EResult<Hdc> {
        match t {
            Ty::Struct(st) => {
                let has = self
                    .structs
                    .get(st.name.as_str())
                    .is_some_and(|sd| sd.constant("hdc").is_some());
                if !has {
                    return Ok(Hdc::Hst);
                }
                let loc = self.structs[st.name.as_str()].loc.clone();
                match self.struct_const(st, "hdc", &loc)? {
                    ConstVal::Hdc(h) => Ok(h),
                    _ => Err(bad_hdc_member(&st.name, &loc)),
                }
            }
            t if t.is_fundamental() && self.profile.fundamentals_hstdev => Ok(Hdc::HstDev),
            _ => Ok(Hdc::Hst),
        }
    }

    // ---- overload resolution and instantiation ---------------------------

    /// Picks the single viable candidate for a call and instantiates it.
    pub fn resolve_call(&mut self, site: &CallSite) -> Result<Callee, Diagnostic> {
        let caller = &self.instances[site.caller];
        let caller_b = caller.bindings.clone();
        let caller_spaces = caller.declared_spaces();
        let (name, owner, cands) = match site.shape {
            CallShape::Member(recv, m) => {
                let c = self
                    .members
                    .get(&(recv.name.as_str(), m))
                    .cloned()
                    .unwrap_or_default();
                if c.is_empty() {
                    return Err(Diagnostic::new(
                        Code::E0101,
                        site.loc.clone(),
                        format!("no member function named `{m}` in `{recv}`"),
                    ));
                }
                (m, Some(recv.clone()), c)
            }
            CallShape::Free(n) => {
                let own = caller_b.owner.as_ref().and_then(|o| {
                    self.members
                        .get(&(o.name.as_str(), n))
                        .map(|c| (o.clone(), c.clone()))
                });
                match own {
                    Some((o, c)) => (n, Some(o), c),
                    None => match self.free.get(n) {
                        Some(c) => (n, None, c.clone()),
                        None => {
                            return match Builtin::lookup(n, self.profile.compiler) {
                                Some(b) if b.arity() == site.arg_tys.len() => {
                                    Ok(Callee::Builtin(b))
                                }
                                Some(_) => Err(Diagnostic::new(
                                    Code::E1301,
                                    site.loc.clone(),
                                    format!("no matching function for call to `{n}`"),
                                )),
                                None => Err(Diagnostic::new(
                                    Code::E0101,
                                    site.loc.clone(),
                                    format!("use of undeclared function `{n}`"),
                                )),
                            }
                        }
                    },
                }
            }
        };
        let mut viable: Vec<(FnId, Bindings)> = cands
            .iter()
            .filter_map(|&id| {
                self.bind(id, owner.as_ref(), site, &caller_b)
                    .map(|b| (id, b))
            })
            .collect();
        let context = context_of(caller_spaces);
        if self.mode == Mode::Proposal2 {
            // Spaces take part in overload resolution, but a lone mismatching
            // candidate is kept so the stray call gets reported.
            let on_side: Vec<_> = viable
                .iter()
                .filter(|(id, _)| self.candidate_spaces(*id, context).contains(site.side))
                .cloned()
                .collect();
            if !on_side.is_empty() {
                viable = on_side;
            }
        }
        match viable.len() {
            0 => Err(Diagnostic::new(
                Code::E1301,
                site.loc.clone(),
                format!("no matching function for call to `{name}`"),
            )),
            1 => {
                let (id, b) = viable.pop().unwrap();
                Ok(Callee::Inst(self.instantiate(id, b, context, site.loc)))
            }
            n => Err(Diagnostic::new(
                Code::E1302,
                site.loc.clone(),
                format!("call to `{name}` is ambiguous: {n} candidates remain"),
            )),
        }
    }

    /// Binds template parameters of one candidate. `None` means the
    /// candidate is silently discarded.
    fn bind(
        &self,
        id: FnId,
        owner: Option<&StructTy>,
        site: &CallSite,
        caller_b: &Bindings,
    ) -> Option<Bindings> {
        let decl = self.fns[id].decl;
        let params: &[TemplateParam] = decl.template.as_ref().map_or(&[], |t| &t.params);
        let mut slots: Vec<Option<TArg>> = vec![None; params.len()];
        if let Some(targs) = site.targs {
            if decl.template.is_none() || targs.len() > params.len() {
                return None;
            }
            for (i, a) in targs.iter().enumerate() {
                slots[i] = Some(self.template_arg(a, params[i].kind, caller_b).ok()?);
            }
        }
        if decl.params.len() != site.arg_tys.len() {
            return None;
        }
        for (p, at) in decl.params.iter().zip(site.arg_tys) {
            let Some(n) = p.ty.simple_name() else {
                continue;
            };
            let Some(i) = params
                .iter()
                .position(|tp| tp.name == n && tp.kind == TemplateParamKind::Type)
            else {
                continue;
            };
            match &slots[i] {
                None => slots[i] = Some(TArg::Ty(at.clone())),
                Some(TArg::Ty(t)) if t == at => {}
                Some(_) => return None,
            }
        }
        let mut b = owner.map(|o| self.struct_bindings(o)).unwrap_or_default();
        for (i, p) in params.iter().enumerate() {
            let v = match slots[i].take() {
                Some(v) => v,
                None => self.template_arg(p.default.as_ref()?, p.kind, &b).ok()?,
            };
            b.params.push((p.name.clone(), v));
        }
        for (p, at) in decl.params.iter().zip(site.arg_tys) {
            let pt = self.resolve_type(&p.ty, &b).ok()?;
            if !convertible(at, &pt) {
                return None;
            }
        }
        if let Some(r) = decl.template.as_ref().and_then(|t| t.requires.as_ref()) {
            if self.eval_const(r, &b).ok()? != ConstVal::Bool(true) {
                return None;
            }
        }
        Some(b)
    }

    fn owner_decorated(&self, id: FnId) -> Option<&'a SpecifierSet> {
        self.fns[id]
            .owner
            .map(|o| &o.specs)
            .filter(|s| s.is_decorated() && self.mode == Mode::Proposal2)
    }

    fn context_dependent(&self, id: FnId) -> bool {
        let decl = self.fns[id].decl;
        // `main` is host code no matter what.
        let is_main = decl.name == "main" && self.fns[id].owner.is_none();
        self.mode == Mode::Proposal2
            && !is_main
            && !decl.specs.is_decorated()
            && self.owner_decorated(id).is_none()
    }

    /// Spaces of a candidate before instantiation (proposal2 filtering).
    fn candidate_spaces(&self, id: FnId, context: SpaceSet) -> SpaceSet {
        let decl = self.fns[id].decl;
        let s = &decl.specs;
        if s.global {
            SpaceSet::GLOBAL
        } else if s.host.is_some() || s.device.is_some() {
            SpaceSet {
                host: s.host.is_some(),
                device: s.device.is_some(),
                global: false,
            }
        } else if let Some(o) = self.owner_decorated(id) {
            spec_spaces(o)
        } else if self.context_dependent(id) {
            context
        } else {
            SpaceSet::HOST
        }
    }

    /// Memoized instantiation. `context` is the caller's space set; it only
    /// matters for context-dependent functions under proposal2.
    pub fn instantiate(
        &mut self,
        id: FnId,
        bindings: Bindings,
        context: SpaceSet,
        site: &SrcLoc,
    ) -> InstId {
        let entry = &self.fns[id];
        let decl = entry.decl;
        let owner_params = entry
            .owner
            .and_then(|o| o.template.as_ref())
            .map_or(0, |t| t.params.len());
        let context = self.context_dependent(id).then_some(context);
        let key = InstKey {
            decl: entry.key.clone(),
            owner: bindings.owner.clone(),
            targs: bindings.params[owner_params.min(bindings.params.len())..]
                .iter()
                .map(|(_, a)| a.clone())
                .collect(),
            context,
        };
        if let Some(&i) = self.memo.get(&key) {
            return i;
        }
        let declared = self.declared_spaces(id, &bindings, context);
        let spaces = self.widen(id, declared);
        let widened = SpaceSet {
            host: spaces.host && !declared.host,
            device: spaces.device && !declared.device,
            global: false,
        };
        let mut display = String::new();
        if let Some(o) = &bindings.owner {
            display.push_str(&format!("{o}::"));
        }
        display.push_str(&decl.name);
        if !key.targs.is_empty() {
            let _ = types::write_args(&mut display, &key.targs);
        }
        if spaces.is_empty() {
            self.diags.push(Diagnostic::new(
                Code::E1401,
                site.clone(),
                format!("`{display}` has no execution space left after evaluating its conditional specifiers"),
            ));
        }
        let ret = match decl.ret.kind {
            TypeKind::Auto => None,
            _ => self.resolve_type(&decl.ret, &bindings).ok(),
        };
        let id_new = self.instances.len();
        self.instances.push(Instance {
            id: id_new,
            fn_id: id,
            key: key.clone(),
            bindings,
            spaces,
            widened,
            constexpr_flag: decl.specs.constexpr_flag,
            pragma_suppress: decl.specs.pragma_suppress,
            ret,
            display,
            first_site: site.clone(),
        });
        self.memo.insert(key, id_new);
        id_new
    }

    /// Re-creates an instance from its pass-independent key.
    pub fn instantiate_key(&mut self, key: &InstKey, site: &SrcLoc) -> Option<InstId> {
        if let Some(&i) = self.memo.get(key) {
            return Some(i);
        }
        let &id = self.by_key.get(&key.decl)?;
        let decl = self.fns[id].decl;
        let mut b = match &key.owner {
            Some(o) => self.struct_bindings(o),
            None => Bindings::default(),
        };
        let params: &[TemplateParam] = decl.template.as_ref().map_or(&[], |t| &t.params);
        if params.len() != key.targs.len() {
            return None;
        }
        for (p, a) in params.iter().zip(&key.targs) {
            b.params.push((p.name.clone(), a.clone()));
        }
        let ctx = key.context.unwrap_or(SpaceSet::HOST);
        Some(self.instantiate(id, b, ctx, site))
    }

    /// Effective execution spaces under the current mode.
    pub fn effective_spaces(
        &mut self,
        id: FnId,
        b: &Bindings,
        context: Option<SpaceSet>,
    ) -> SpaceSet {
        let set = self.declared_spaces(id, b, context);
        self.widen(id, set)
    }

    fn widen(&self, id: FnId, set: SpaceSet) -> SpaceSet {
        if self.profile.relaxed_constexpr && self.fns[id].decl.specs.constexpr_flag && !set.global {
            set.union(SpaceSet::HOST_DEVICE)
        } else {
            set
        }
    }

    /// Spaces before `--relaxed-constexpr` widening.
    fn declared_spaces(&mut self, id: FnId, b: &Bindings, context: Option<SpaceSet>) -> SpaceSet {
        let decl = self.fns[id].decl;
        let s = &decl.specs;
        if s.global {
            SpaceSet::GLOBAL
        } else if s.host.is_some() || s.device.is_some() {
            if self.mode == Mode::Proposal1 {
                SpaceSet {
                    host: self.predicate(s.host.as_ref(), b),
                    device: self.predicate(s.device.as_ref(), b),
                    global: false,
                }
            } else {
                spec_spaces(s)
            }
        } else if let Some(o) = self.owner_decorated(id) {
            spec_spaces(o)
        } else {
            context.unwrap_or(SpaceSet::HOST)
        }
    }

    fn predicate(&mut self, spec: Option<&SpaceSpec>, b: &Bindings) -> bool {
        let Some(spec) = spec else { return false };
        let Some(p) = &spec.predicate else {
            return true;
        };
        match self.eval_const(p, b) {
            Ok(ConstVal::Bool(v)) => v,
            Ok(_) => {
                self.diags.push(Diagnostic::new(
                    Code::E0001,
                    p.loc.clone(),
                    "execution space predicate must be a boolean constant",
                ));
                false
            }
            Err(e) => {
                self.diags.push(e.into_diagnostic());
                false
            }
        }
    }

    /// Spaces of the member functions of a non-template struct, in
    /// declaration order.
    pub fn member_spaces(&mut self, struct_name: &str) -> Option<Vec<(String, SpaceSet)>> {
        let sd = self.structs.get(struct_name).copied()?;
        if sd.template.is_some() {
            return None;
        }
        let st = StructTy {
            name: sd.name.clone(),
            args: Vec::new(),
        };
        let b = self.struct_bindings(&st);
        let ids: Vec<FnId> = (0..self.fns.len())
            .filter(|&i| self.fns[i].owner.is_some_and(|o| std::ptr::eq(o, sd)))
            .collect();
        Some(
            ids.into_iter()
                .map(|i| {
                    let ctx = self.context_dependent(i).then_some(SpaceSet::HOST);
                    (
                        self.fns[i].decl.name.clone(),
                        self.effective_spaces(i, &b, ctx),
                    )
                })
                .collect(),
        )
    }
}

/// Context handed to callees: kernels call as device code.
pub fn context_of(caller: SpaceSet) -> SpaceSet {
    if caller.global {
        SpaceSet::DEVICE
    } else {
        caller
    }
}

fn spec_spaces(s: &SpecifierSet) -> SpaceSet {
    SpaceSet {
        host: s.host.is_some(),
        device: s.device.is_some(),
        global: s.global,
    }
}

fn convertible(from: &Ty, to: &Ty) -> bool {
    from == to || (matches!(from, Ty::Int | Ty::Bool) && matches!(to, Ty::Int | Ty::Bool))
}

fn same_kind(a: ConstVal, b: ConstVal) -> bool {
    std::mem::discriminant(&a) == std::mem::discriminant(&b)
}

fn overflow(loc: &SrcLoc) -> EvalError {
    EvalError::new(Code::E0001, loc, "integer overflow in constant expression")
}

fn int_binop(op: BinOp, x: i64, y: i64, loc: &SrcLoc) -> EResult<ConstVal> {
    use ConstVal::*;
    Ok(match op {
        BinOp::Lt => Bool(x < y),
        BinOp::Gt => Bool(x > y),
        BinOp::Le => Bool(x <= y),
        BinOp::Ge => Bool(x >= y),
        BinOp::Add => Int(x.checked_add(y).ok_or_else(|| overflow(loc))?),
        BinOp::Sub => Int(x.checked_sub(y).ok_or_else(|| overflow(loc))?),
        BinOp::Mul => Int(x.checked_mul(y).ok_or_else(|| overflow(loc))?),
        BinOp::Div | BinOp::Rem if y == 0 => {
            return Err(EvalError::new(Code::E0001, loc, "division by zero"))
        }
        BinOp::Div => Int(x.checked_div(y).ok_or_else(|| overflow(loc))?),
        BinOp::Rem => Int(x.checked_rem(y).ok_or_else(|| overflow(loc))?),
        _ => {
            return Err(EvalError::new(
                Code::E0001,
                loc,
                "operand types do not match",
            ))
        }
    })
}

fn bad_hdc_member(struct_name: &str, loc: &SrcLoc) -> EvalError {
    EvalError::new(
        Code::E0103,
        loc,
        format!("member `hdc` of `{struct_name}` must be a `static constexpr HDC` constant"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn sema_for(ast: &Ast) -> Sema<'_> {
        Sema::new(
            ast,
            PassKind::HostPass,
            &CompileProfile::nvcc(),
            Mode::Classic,
        )
    }

    fn struct_ty(name: &str) -> Ty {
        Ty::Struct(StructTy {
            name: name.into(),
            args: Vec::new(),
        })
    }

    #[test]
    fn hdc_trait_matches_static_asserts() {
        let ast = parse(
            "struct S {};\nstruct D { static constexpr HDC hdc = HDC::Dev; };",
            "hdc.mcu",
        )
        .unwrap();
        let s = sema_for(&ast);
        assert_eq!(s.compute_hdc(&struct_ty("S")), Ok(Hdc::Hst));
        assert_eq!(s.compute_hdc(&struct_ty("D")), Ok(Hdc::Dev));
        assert_eq!(s.compute_hdc(&Ty::Int), Ok(Hdc::Hst));
        let mut p = CompileProfile::nvcc();
        p.fundamentals_hstdev = true;
        let s = Sema::new(&ast, PassKind::HostPass, &p, Mode::Classic);
        assert_eq!(s.compute_hdc(&Ty::Int), Ok(Hdc::HstDev));
        assert_eq!(s.compute_hdc(&struct_ty("S")), Ok(Hdc::Hst));
    }

    #[test]
    fn bad_hdc_member_is_reported() {
        let ast = parse("struct B { static constexpr int hdc = 1; };", "b.mcu").unwrap();
        let mut s = sema_for(&ast);
        let d = s.take_diagnostics();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, Code::E0103);
        assert_eq!(
            s.compute_hdc(&struct_ty("B")).unwrap_err().code,
            Code::E0103
        );
    }

    #[test]
    fn struct_template_hdc_follows_argument() {
        let ast = parse(
            "template< HDC x > struct S1 { static constexpr HDC hdc = x; };",
            "s.mcu",
        )
        .unwrap();
        let s = sema_for(&ast);
        for h in Hdc::ALL {
            let t = Ty::Struct(StructTy {
                name: "S1".into(),
                args: vec![TArg::Hdc(h)],
            });
            assert_eq!(s.compute_hdc(&t), Ok(h));
        }
    }

    #[test]
    fn duplicates_and_space_only_overloads() {
        let src = "__host__ void f() {}\n__device__ void f() {}\nvoid g() {}\nvoid g() {}";
        let ast = parse(src, "d.mcu").unwrap();
        let mut classic = sema_for(&ast);
        let codes: Vec<_> = classic
            .take_diagnostics()
            .iter()
            .map(|d| (d.code, d.loc.line))
            .collect();
        assert_eq!(codes, [(Code::E0102, 2), (Code::E0102, 4)]);
        let mut p2 = Sema::new(
            &ast,
            PassKind::HostPass,
            &CompileProfile::nvcc(),
            Mode::Proposal2,
        );
        let codes: Vec<_> = p2.take_diagnostics().iter().map(|d| d.loc.line).collect();
        assert_eq!(codes, [4]);
    }

    #[test]
    fn prototype_then_definition_is_not_a_duplicate() {
        let ast = parse("void f();\nvoid f() {}", "p.mcu").unwrap();
        let mut s = sema_for(&ast);
        assert!(s.take_diagnostics().is_empty());
        assert!(s.decl(0).body.is_some());
    }

    #[test]
    fn requires_clause_evaluation() {
        let ast = parse(
            "struct D { static constexpr HDC hdc = HDC::Dev; };",
            "r.mcu",
        )
        .unwrap();
        let s = sema_for(&ast);
        let b = Bindings {
            owner: None,
            params: vec![
                ("T".into(), TArg::Ty(struct_ty("D"))),
                ("x".into(), TArg::Hdc(Hdc::Hst)),
            ],
        };
        let e = |src: &str| {
            let a = parse(&format!("static constexpr bool v = {src};"), "e").unwrap();
            let Item::Const(c) = &a.items[0] else {
                panic!()
            };
            c.value.clone()
        };
        assert_eq!(
            s.eval_const(&e("hdc<T> == HDC::Dev"), &b),
            Ok(ConstVal::Bool(true))
        );
        assert_eq!(
            s.eval_const(&e("x == HDC::Hst && !(T::hdc == HDC::Hst)"), &b),
            Ok(ConstVal::Bool(true))
        );
        // A missing member is an evaluation error, which resolution treats as
        // substitution failure.
        assert!(s.eval_const(&e("T::missing == HDC::Hst"), &b).is_err());
        assert!(s.eval_const(&e("y == HDC::Hst"), &b).is_err());
    }
}
