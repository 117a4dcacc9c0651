//! Per-pass call graph: every instance reachable from the non-template
//! functions, with one edge per call site and side.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use super::legality::CallKind;
use crate::diag::{Code, Diagnostic, SrcLoc};
use crate::profile::CompileProfile;
use crate::sema::{
    Bindings, Builtin, CallShape, CallSite, Callee, ConstVal, InstId, InstKey, Sema, Side,
    SpaceSet, StructTy, Ty,
};
use crate::spacecheck::Mode;
use crate::syntax::ast::*;
use crate::syntax::PassKind;
use crate::PassAst;

#[derive(Debug, Clone)]
pub struct Edge {
    pub caller: InstKey,
    pub caller_spaces: SpaceSet,
    pub caller_pragma: bool,
    /// The caller runs on `side` only through constexpr relaxation.
    pub caller_widened: bool,
    pub side: Side,
    /// `None` for builtins.
    pub callee: Option<InstKey>,
    pub callee_spaces: SpaceSet,
    pub callee_constexpr: bool,
    /// The callee has `side` only through constexpr relaxation.
    pub callee_widened: bool,
    pub kind: CallKind,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone)]
pub struct PassGraph {
    pub pass: PassKind,
    pub edges: Vec<Edge>,
    /// Every instance with its effective spaces and first use site.
    pub instances: BTreeMap<InstKey, (SpaceSet, SrcLoc, String)>,
    pub decls: BTreeMap<String, (SrcLoc, String)>,
    pub roots: Vec<InstKey>,
    pub main: Option<InstKey>,
    /// Name resolution and declaration diagnostics for this pass.
    pub diags: Vec<Diagnostic>,
    by_caller: HashMap<(InstKey, Side), Vec<usize>>,
}

impl PassGraph {
    pub fn edges_from(&self, key: &InstKey, side: Side) -> impl Iterator<Item = &Edge> {
        self.by_caller
            .get(&(key.clone(), side))
            .into_iter()
            .flatten()
            .map(|&i| &self.edges[i])
    }
}

/// The side whose code a pass generates.
pub fn pass_side(p: PassKind) -> Side {
    match p {
        PassKind::HostPass => Side::Host,
        PassKind::DevicePass => Side::Device,
    }
}

pub fn build(pa: &PassAst, profile: &CompileProfile, mode: Mode) -> PassGraph {
    let mut sema = Sema::new(&pa.ast, pa.pass.kind, profile, mode);
    let mut g = PassGraph {
        pass: pa.pass.kind,
        edges: Vec::new(),
        instances: BTreeMap::new(),
        decls: sema
            .decl_keys()
            .map(|(k, d)| (k.to_string(), (d.loc.clone(), d.name.clone())))
            .collect(),
        roots: Vec::new(),
        main: None,
        diags: Vec::new(),
        by_caller: HashMap::new(),
    };
    let main_fn = sema.main_fn();
    for id in sema.roots() {
        let inst = sema.instantiate_root(id);
        let key = sema.instance(inst).key.clone();
        if Some(id) == main_fn {
            g.main = Some(key.clone());
        }
        g.roots.push(key);
    }
    let own_side = pass_side(pa.pass.kind);
    let mut next = 0;
    while next < sema.instances().len() {
        let inst = next;
        next += 1;
        let decl = sema.instance_decl(inst);
        let Some(body) = &decl.body else { continue };
        for side in sema.instance(inst).spaces.sides() {
            let bindings = sema.instance(inst).bindings.clone();
            let mut w = Walker {
                sema: &mut sema,
                inst,
                side,
                emit: side == own_side,
                bindings,
                scopes: Vec::new(),
                graph: &mut g,
            };
            w.function(decl, body);
        }
    }
    for i in sema.instances() {
        g.instances.insert(
            i.key.clone(),
            (i.spaces, i.first_site.clone(), i.display.clone()),
        );
    }
    g.diags.extend(sema.take_diagnostics());
    for (i, e) in g.edges.iter().enumerate() {
        g.by_caller
            .entry((e.caller.clone(), e.side))
            .or_default()
            .push(i);
    }
    g
}

/// Nodes (instance, side) that execution can reach: from `main` on the host,
/// through direct calls that stay on a side the callee supports, and from
/// host launch sites into kernels. Without `main`, every root on every side
/// it supports is an entry.
pub fn reachability(
    host: &PassGraph,
    device: &PassGraph,
    blocked: &HashSet<(InstKey, Side)>,
) -> HashSet<(InstKey, Side)> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    match &host.main {
        Some(m) => queue.push_back((m.clone(), Side::Host)),
        None => {
            for r in &host.roots {
                if let Some((spaces, _, _)) = host.instances.get(r) {
                    for s in spaces.sides() {
                        queue.push_back((r.clone(), s));
                    }
                }
            }
        }
    }
    while let Some(node) = queue.pop_front() {
        if !seen.insert(node.clone()) {
            continue;
        }
        let (key, side) = node;
        for e in graph_for(host, device, side).edges_from(&key, side) {
            let Some(callee) = &e.callee else { continue };
            match e.kind {
                CallKind::Launch if side == Side::Host && e.callee_spaces.global => {
                    queue.push_back((callee.clone(), Side::Device));
                }
                CallKind::Direct
                    if e.callee_spaces.contains(side)
                        && !(e.callee_widened && blocked.contains(&(callee.clone(), side))) =>
                {
                    queue.push_back((callee.clone(), side));
                }
                _ => {}
            }
        }
    }
    seen
}

fn graph_for<'g>(host: &'g PassGraph, device: &'g PassGraph, side: Side) -> &'g PassGraph {
    match side {
        Side::Host => host,
        Side::Device => device,
    }
}

/// Widened (instance, side) pairs that relaxation cannot honor: running the
/// body on that side could reach a call the side cannot make. Calls into
/// them are graded as if `--relaxed-constexpr` were off.
pub fn blocked_widenings(host: &PassGraph, device: &PassGraph) -> HashSet<(InstKey, Side)> {
    // Least fixpoint of "may reach a stray call", over every instance.
    let mut stray: HashSet<(InstKey, Side)> = HashSet::new();
    loop {
        let before = stray.len();
        for side in [Side::Host, Side::Device] {
            for e in graph_for(host, device, side)
                .edges
                .iter()
                .filter(|e| e.side == side)
            {
                let node = (e.caller.clone(), side);
                if stray.contains(&node) {
                    continue;
                }
                let ok = match e.kind {
                    CallKind::Launch => side == Side::Host && e.callee_spaces.global,
                    CallKind::Direct => {
                        !e.callee_spaces.global
                            && e.callee_spaces.contains(side)
                            && e.callee
                                .as_ref()
                                .is_none_or(|c| !stray.contains(&(c.clone(), side)))
                    }
                };
                if !ok {
                    stray.insert(node);
                }
            }
        }
        if stray.len() == before {
            break;
        }
    }
    let widened = |(k, s): &(InstKey, Side)| {
        let g = graph_for(host, device, *s);
        g.edges
            .iter()
            .any(|e| e.callee.as_ref() == Some(k) && e.side == *s && e.callee_widened)
    };
    stray.into_iter().filter(|n| widened(n)).collect()
}

struct Walker<'w, 'a> {
    sema: &'w mut Sema<'a>,
    inst: InstId,
    side: Side,
    emit: bool,
    bindings: Bindings,
    scopes: Vec<HashMap<String, Ty>>,
    graph: &'w mut PassGraph,
}

impl<'w, 'a> Walker<'w, 'a> {
    fn report(&mut self, d: Diagnostic) {
        if self.emit {
            self.graph.diags.push(d);
        }
    }

    fn resolve_type(&mut self, t: &TypeExpr) -> Option<Ty> {
        match self.sema.resolve_type(t, &self.bindings) {
            Ok(t) => Some(t),
            Err(e) => {
                self.report(e.into_diagnostic());
                None
            }
        }
    }

    fn declare(&mut self, name: &str, ty: Option<Ty>) {
        if let (Some(scope), Some(ty)) = (self.scopes.last_mut(), ty) {
            scope.insert(name.to_string(), ty);
        }
    }

    fn local(&self, name: &str) -> Option<&Ty> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn function(&mut self, decl: &'a FunctionDecl, body: &'a [Stmt]) {
        self.scopes.push(HashMap::new());
        for p in &decl.params {
            let t = self.resolve_type(&p.ty);
            if !p.name.is_empty() {
                self.declare(&p.name, t);
            }
        }
        for s in body {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &'a Stmt) {
        match s {
            Stmt::Block(b) => {
                self.scopes.push(HashMap::new());
                for s in b {
                    self.stmt(s);
                }
                self.scopes.pop();
            }
            Stmt::Empty => {}
            Stmt::Return(e, _) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            Stmt::If { cond, then, els } => {
                self.expr(cond);
                self.scoped(then);
                if let Some(e) = els {
                    self.scoped(e);
                }
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                self.scopes.push(HashMap::new());
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.expr(c);
                }
                if let Some(s) = step {
                    self.expr(s);
                }
                self.scoped(body);
                self.scopes.pop();
            }
            Stmt::VarDecl { ty, name, init, .. } => {
                let init_ty = init.as_ref().and_then(|e| self.expr(e));
                let t = match ty.kind {
                    TypeKind::Auto => init_ty,
                    _ => self.resolve_type(ty),
                };
                self.declare(name, t);
            }
            Stmt::Expr(e) => {
                self.expr(e);
            }
            Stmt::Launch(l) => {
                self.expr(&l.grid);
                self.expr(&l.block);
                let Some(arg_tys) = self.args(&l.args) else {
                    return;
                };
                let site = CallSite {
                    shape: CallShape::Free(&l.callee),
                    targs: l.targs.as_deref(),
                    arg_tys: &arg_tys,
                    caller: self.inst,
                    side: self.side,
                    loc: &l.loc,
                };
                self.call(&site, CallKind::Launch);
            }
        }
    }

    fn scoped(&mut self, s: &'a Stmt) {
        self.scopes.push(HashMap::new());
        self.stmt(s);
        self.scopes.pop();
    }

    fn args(&mut self, args: &'a [Expr]) -> Option<Vec<Ty>> {
        let tys: Vec<Option<Ty>> = args.iter().map(|a| self.expr(a)).collect();
        tys.into_iter().collect()
    }

    /// Resolves a call, records its edge and returns the result type.
    fn call(&mut self, site: &CallSite, kind: CallKind) -> Option<Ty> {
        let callee = match self.sema.resolve_call(site) {
            Ok(c) => c,
            Err(d) => {
                self.report(d);
                return None;
            }
        };
        let caller = self.sema.instance(self.inst);
        // Graded as declared: relaxation lets others call in, not this body out.
        let caller_spaces = caller.declared_spaces();
        let (caller_key, caller_pragma) = (caller.key.clone(), caller.pragma_suppress);
        let caller_widened = caller.widened.contains(self.side);
        let mut callee_widened = false;
        let (key, spaces, constexpr_flag, ret) = match callee {
            Callee::Inst(c) => {
                let i = self.sema.instance(c);
                callee_widened = i.widened.contains(self.side);
                (
                    Some(i.key.clone()),
                    i.spaces,
                    i.constexpr_flag,
                    i.ret.clone(),
                )
            }
            Callee::Builtin(b) => {
                let ret = match b {
                    Builtin::DeviceSynchronize => Some(Ty::Int),
                    Builtin::Forward => site.arg_tys.first().cloned(),
                    _ => Some(Ty::Void),
                };
                (None, b.spaces(), false, ret)
            }
        };
        self.graph.edges.push(Edge {
            caller: caller_key,
            caller_spaces,
            caller_pragma,
            caller_widened,
            side: self.side,
            callee: key,
            callee_spaces: spaces,
            callee_constexpr: constexpr_flag,
            callee_widened,
            kind,
            loc: site.loc.clone(),
        });
        ret
    }

    fn expr(&mut self, e: &'a Expr) -> Option<Ty> {
        match &e.kind {
            ExprKind::Int(_) => Some(Ty::Int),
            ExprKind::Bool(_) => Some(Ty::Bool),
            ExprKind::HdcConst(_) => Some(Ty::Hdc),
            ExprKind::Name(n) => {
                if let Some(t) = self.local(n) {
                    return Some(t.clone());
                }
                match self.sema.name_type(n, &self.bindings) {
                    Some(t) => Some(t),
                    None => {
                        self.report(Diagnostic::new(
                            Code::E0101,
                            e.loc.clone(),
                            format!("use of undeclared identifier `{n}`"),
                        ));
                        None
                    }
                }
            }
            ExprKind::Unary(op, x) => {
                self.expr(x);
                Some(match op {
                    UnOp::Not => Ty::Bool,
                    UnOp::Neg => Ty::Int,
                })
            }
            ExprKind::Binary(op, l, r) => {
                self.expr(l);
                self.expr(r);
                Some(match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => Ty::Int,
                    _ => Ty::Bool,
                })
            }
            ExprKind::Assign(_, name, v) => {
                self.expr(v);
                self.assignable(name, &e.loc)
            }
            ExprKind::IncDec { name, .. } => self.assignable(name, &e.loc),
            ExprKind::Call { name, targs, args } => {
                let arg_tys = self.args(args)?;
                let site = CallSite {
                    shape: CallShape::Free(name),
                    targs: targs.as_deref(),
                    arg_tys: &arg_tys,
                    caller: self.inst,
                    side: self.side,
                    loc: &e.loc,
                };
                self.call(&site, CallKind::Direct)
            }
            ExprKind::StaticCall {
                ty,
                method,
                targs,
                args,
            } => {
                let recv = self.struct_type(ty)?;
                let arg_tys = self.args(args)?;
                self.member_call(&recv, method, targs.as_deref(), &arg_tys, &e.loc)
            }
            ExprKind::MemberCall {
                recv,
                method,
                targs,
                args,
            } => {
                let recv_ty = self.expr(recv)?;
                let arg_tys = self.args(args)?;
                let Ty::Struct(st) = recv_ty else {
                    self.report(Diagnostic::new(
                        Code::E0101,
                        e.loc.clone(),
                        format!("member function `{method}` called on non-struct type `{recv_ty}`"),
                    ));
                    return None;
                };
                self.member_call(&st, method, targs.as_deref(), &arg_tys, &e.loc)
            }
            ExprKind::StaticMember { ty, name } => {
                let st = self.struct_type(ty)?;
                let probe = Expr {
                    kind: ExprKind::StaticMember {
                        ty: ty.clone(),
                        name: name.clone(),
                    },
                    loc: e.loc.clone(),
                };
                match self.sema.eval_const(&probe, &self.bindings) {
                    Ok(v) => Some(const_ty(v)),
                    Err(err) => {
                        let _ = st;
                        self.report(err.into_diagnostic());
                        None
                    }
                }
            }
            ExprKind::Temp(t) => self.resolve_type(t),
            ExprKind::HdcTrait(t) => {
                let ty = self.resolve_type(t)?;
                if let Err(err) = self.sema.compute_hdc(&ty) {
                    self.report(err.into_diagnostic());
                }
                Some(Ty::Hdc)
            }
            ExprKind::Printf { args, .. } => {
                for a in args {
                    self.expr(a);
                }
                Some(Ty::Int)
            }
        }
    }

    fn struct_type(&mut self, ty: &TypeExpr) -> Option<StructTy> {
        match self.resolve_type(ty)? {
            Ty::Struct(st) => Some(st),
            other => {
                self.report(Diagnostic::new(
                    Code::E0101,
                    ty.loc.clone(),
                    format!("`{other}` is not a struct type"),
                ));
                None
            }
        }
    }

    fn member_call(
        &mut self,
        recv: &StructTy,
        method: &str,
        targs: Option<&[TemplateArg]>,
        arg_tys: &[Ty],
        loc: &SrcLoc,
    ) -> Option<Ty> {
        let site = CallSite {
            shape: CallShape::Member(recv, method),
            targs,
            arg_tys,
            caller: self.inst,
            side: self.side,
            loc,
        };
        self.call(&site, CallKind::Direct)
    }

    fn assignable(&mut self, name: &str, loc: &SrcLoc) -> Option<Ty> {
        match self.local(name) {
            Some(t) => Some(t.clone()),
            None => {
                self.report(Diagnostic::new(
                    Code::E0101,
                    loc.clone(),
                    format!("`{name}` is not a local variable"),
                ));
                None
            }
        }
    }
}

fn const_ty(v: ConstVal) -> Ty {
    match v {
        ConstVal::Int(_) => Ty::Int,
        ConstVal::Bool(_) => Ty::Bool,
        ConstVal::Hdc(_) => Ty::Hdc,
    }
}
