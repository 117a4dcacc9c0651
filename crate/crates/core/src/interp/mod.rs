//! Deterministic tree-walking interpreter. Host code runs the host pass's
//! instances, kernels run the device pass's, one logical thread at a time.

use std::collections::HashMap;
use std::fmt;

use crate::diag::{Code, Diagnostic, SrcLoc};
use crate::profile::CompileProfile;
use crate::sema::{
    Bindings, Builtin, CallShape, CallSite, Callee, ConstVal, Hdc, InstId, Sema, Side, StructTy, Ty,
};
use crate::spacecheck::Mode;
use crate::syntax::ast::*;
use crate::syntax::PassKind;
use crate::{frontend, PassAst, SourceUnit};

/// Exit code reserved for a halted undefined behavior.
pub const UB_EXIT: i32 = 101;
/// Exit code of `std::abort()`.
pub const ABORT_EXIT: i32 = 134;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Hdc(Hdc),
    /// Structs carry no state, only their type.
    Struct(StructTy),
    Void,
}

impl Value {
    pub fn ty(&self) -> Ty {
        match self {
            Value::Int(_) => Ty::Int,
            Value::Bool(_) => Ty::Bool,
            Value::Hdc(_) => Ty::Hdc,
            Value::Struct(s) => Ty::Struct(s.clone()),
            Value::Void => Ty::Void,
        }
    }

    fn from_const(c: ConstVal) -> Value {
        match c {
            ConstVal::Int(i) => Value::Int(i),
            ConstVal::Bool(b) => Value::Bool(b),
            ConstVal::Hdc(h) => Value::Hdc(h),
        }
    }

    /// Converts to `ty` where C++ would do so implicitly.
    fn convert(self, ty: &Ty) -> Value {
        match (self, ty) {
            (Value::Int(i), Ty::Bool) => Value::Bool(i != 0),
            (Value::Bool(b), Ty::Int) => Value::Int(b as i64),
            (v, _) => v,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Hdc(h) => write!(f, "{h}"),
            Value::Struct(s) => write!(f, "{s}{{}}"),
            Value::Void => f.write_str("void"),
        }
    }
}

/// Interpreter state visible to the program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Machine {
    /// 0 until a kernel traps, then the trap code for good.
    pub sticky_error: i32,
    pub out: Vec<u8>,
    pub exit_status: Option<i32>,
    pub side: Option<Side>,
    pub thread_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub exit_code: i32,
    pub stdout: Vec<u8>,
    /// Set when execution reached undefined behavior and was stopped.
    pub ub_halt: bool,
    pub notes: Vec<Diagnostic>,
}

impl RunResult {
    pub fn stdout_lossy(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("program does not compile")]
    Frontend(Vec<Diagnostic>),
    #[error("{}", .0.message)]
    Static(Diagnostic),
    #[error("program has no `main`")]
    NoMain,
    #[error("`{0}` is called but never defined")]
    Undefined(String),
    #[error("execution exceeded {0} steps")]
    StepLimit(u64),
    #[error("call depth exceeded {0}")]
    DepthLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 10_000_000,
            max_depth: 200,
        }
    }
}

pub fn run(unit: &SourceUnit, profile: &CompileProfile, mode: Mode) -> Result<RunResult, RunError> {
    let passes = frontend(unit, profile).map_err(RunError::Frontend)?;
    run_passes(&passes, profile, mode, Limits::default())
}

/// Stack reserved per interpreted call; the evaluator recurses through
/// several native frames for each one.
const STACK_PER_CALL: usize = 64 * 1024;

/// Runs on a dedicated thread whose stack fits `limits.max_depth` calls, so
/// the depth limit trips before the native stack does.
pub fn run_passes(
    passes: &[PassAst],
    profile: &CompileProfile,
    mode: Mode,
    limits: Limits,
) -> Result<RunResult, RunError> {
    let stack = limits
        .max_depth
        .saturating_mul(STACK_PER_CALL)
        .saturating_add(4 << 20);
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("exspace-interp".into())
            .stack_size(stack)
            .spawn_scoped(s, || run_on_this_thread(passes, profile, mode, limits))
            .expect("cannot spawn interpreter thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

fn run_on_this_thread(
    passes: &[PassAst],
    profile: &CompileProfile,
    mode: Mode,
    limits: Limits,
) -> Result<RunResult, RunError> {
    let sema_for = |kind: PassKind| {
        passes
            .iter()
            .find(|p| p.pass.kind == kind)
            .map(|p| Sema::new(&p.ast, kind, profile, mode))
    };
    let host = sema_for(PassKind::HostPass).ok_or(RunError::NoMain)?;
    let device = sema_for(PassKind::DevicePass);
    let mut it = Interp {
        host,
        device,
        profile,
        machine: Machine::default(),
        notes: Vec::new(),
        steps: 0,
        depth: 0,
        limits,
    };
    let main = it.host.main_fn().ok_or(RunError::NoMain)?;
    let inst = it.host.instantiate_root(main);
    it.machine.side = Some(Side::Host);
    let outcome = it.call_inst(Side::Host, inst, Vec::new());
    let (exit_code, ub_halt) = match outcome {
        Ok(v) => match v {
            Value::Int(i) => (i as i32, false),
            Value::Bool(b) => (b as i32, false),
            _ => (0, false),
        },
        Err(Stop::Abort) => (ABORT_EXIT, false),
        Err(Stop::Ub(loc, msg)) => {
            it.notes.push(Diagnostic::new(
                Code::N2002,
                loc,
                format!("execution stopped at undefined behavior: {msg}"),
            ));
            (UB_EXIT, true)
        }
        Err(Stop::Trap) => unreachable!("traps end at the launch boundary"),
        Err(Stop::Error(e)) => return Err(e),
    };
    it.machine.exit_status = Some(exit_code);
    Ok(RunResult {
        exit_code,
        stdout: it.machine.out,
        ub_halt,
        notes: it.notes,
    })
}

/// Why evaluation stopped early.
enum Stop {
    Ub(SrcLoc, String),
    Abort,
    /// Device trap; caught by the enclosing launch.
    Trap,
    Error(RunError),
}

impl From<RunError> for Stop {
    fn from(e: RunError) -> Self {
        Stop::Error(e)
    }
}

type Flow<T> = Result<T, Stop>;

enum Ctl {
    Next,
    Return(Value),
}

struct Frame {
    inst: InstId,
    side: Side,
    bindings: Bindings,
    ret: Option<Ty>,
    /// `None` marks a declared but uninitialized variable.
    scopes: Vec<HashMap<String, Option<Value>>>,
}

struct Interp<'a, 'p> {
    host: Sema<'a>,
    device: Option<Sema<'a>>,
    profile: &'p CompileProfile,
    machine: Machine,
    notes: Vec<Diagnostic>,
    steps: u64,
    depth: usize,
    limits: Limits,
}

fn ub<T>(loc: &SrcLoc, msg: impl Into<String>) -> Flow<T> {
    Err(Stop::Ub(loc.clone(), msg.into()))
}

impl<'a, 'p> Interp<'a, 'p> {
    fn sema(&mut self, side: Side) -> &mut Sema<'a> {
        match side {
            Side::Device => self.device.as_mut().unwrap_or(&mut self.host),
            Side::Host => &mut self.host,
        }
    }

    fn tick(&mut self) -> Flow<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(RunError::StepLimit(self.limits.max_steps).into());
        }
        Ok(())
    }

    fn call_inst(&mut self, side: Side, inst: InstId, args: Vec<Value>) -> Flow<Value> {
        let sema = self.sema(side);
        let decl = sema.instance_decl(inst);
        let i = sema.instance(inst);
        let Some(body) = &decl.body else {
            return Err(RunError::Undefined(i.display.clone()).into());
        };
        let mut frame = Frame {
            inst,
            side,
            bindings: i.bindings.clone(),
            ret: i.ret.clone(),
            scopes: vec![HashMap::new()],
        };
        for (p, v) in decl.params.iter().zip(args) {
            let v = match sema.resolve_type(&p.ty, &frame.bindings) {
                Ok(t) => v.convert(&t),
                Err(_) => v,
            };
            frame.scopes[0].insert(p.name.clone(), Some(v));
        }
        if self.depth >= self.limits.max_depth {
            return Err(RunError::DepthLimit(self.limits.max_depth).into());
        }
        self.depth += 1;
        let r = self.block(&mut frame, body);
        self.depth -= 1;
        Ok(match r? {
            Ctl::Return(v) => match &frame.ret {
                Some(t) => v.convert(t),
                None => v,
            },
            Ctl::Next => Value::Void,
        })
    }

    fn block(&mut self, f: &mut Frame, stmts: &'a [Stmt]) -> Flow<Ctl> {
        for s in stmts {
            if let Ctl::Return(v) = self.stmt(f, s)? {
                return Ok(Ctl::Return(v));
            }
        }
        Ok(Ctl::Next)
    }

    fn scoped(&mut self, f: &mut Frame, s: &'a Stmt) -> Flow<Ctl> {
        f.scopes.push(HashMap::new());
        let r = self.stmt(f, s);
        f.scopes.pop();
        r
    }

    fn stmt(&mut self, f: &mut Frame, s: &'a Stmt) -> Flow<Ctl> {
        self.tick()?;
        match s {
            Stmt::Block(b) => {
                f.scopes.push(HashMap::new());
                let r = self.block(f, b);
                f.scopes.pop();
                r
            }
            Stmt::Empty => Ok(Ctl::Next),
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.expr(f, e)?,
                    None => Value::Void,
                };
                Ok(Ctl::Return(v))
            }
            Stmt::If { cond, then, els } => {
                if self.truthy(f, cond)? {
                    self.scoped(f, then)
                } else if let Some(e) = els {
                    self.scoped(f, e)
                } else {
                    Ok(Ctl::Next)
                }
            }
            Stmt::For {
                init,
                cond,
                step,
                body,
            } => {
                f.scopes.push(HashMap::new());
                let r = self.for_loop(f, init.as_deref(), cond.as_ref(), step.as_ref(), body);
                f.scopes.pop();
                r
            }
            Stmt::VarDecl { ty, name, init, .. } => {
                let v = match init {
                    Some(e) => Some(self.expr(f, e)?),
                    None => None,
                };
                let v = match (&ty.kind, v) {
                    (TypeKind::Auto, v) => v,
                    (_, v) => {
                        let t = self.resolve_type(f, ty)?;
                        match (v, t) {
                            (Some(v), t) => Some(v.convert(&t)),
                            (None, Ty::Struct(st)) => Some(Value::Struct(st)),
                            (None, _) => None,
                        }
                    }
                };
                f.scopes.last_mut().unwrap().insert(name.clone(), v);
                Ok(Ctl::Next)
            }
            Stmt::Expr(e) => {
                self.expr(f, e)?;
                Ok(Ctl::Next)
            }
            Stmt::Launch(l) => {
                self.launch(f, l)?;
                Ok(Ctl::Next)
            }
        }
    }

    fn for_loop(
        &mut self,
        f: &mut Frame,
        init: Option<&'a Stmt>,
        cond: Option<&'a Expr>,
        step: Option<&'a Expr>,
        body: &'a Stmt,
    ) -> Flow<Ctl> {
        if let Some(i) = init {
            self.stmt(f, i)?;
        }
        loop {
            self.tick()?;
            if let Some(c) = cond {
                if !self.truthy(f, c)? {
                    return Ok(Ctl::Next);
                }
            }
            if let Ctl::Return(v) = self.scoped(f, body)? {
                return Ok(Ctl::Return(v));
            }
            if let Some(s) = step {
                self.expr(f, s)?;
            }
        }
    }

    /// Runs `grid * block` logical threads of a kernel on the device.
    fn launch(&mut self, f: &mut Frame, l: &'a Launch) -> Flow<()> {
        let grid = self.int(f, &l.grid)?;
        let block = self.int(f, &l.block)?;
        let args = l
            .args
            .iter()
            .map(|a| self.expr(f, a))
            .collect::<Flow<Vec<_>>>()?;
        if f.side == Side::Device {
            return ub(&l.loc, "kernel launch from device code");
        }
        let arg_tys: Vec<Ty> = args.iter().map(Value::ty).collect();
        let site = CallSite {
            shape: CallShape::Free(&l.callee),
            targs: l.targs.as_deref(),
            arg_tys: &arg_tys,
            caller: f.inst,
            side: f.side,
            loc: &l.loc,
        };
        let callee = self.host.resolve_call(&site).map_err(RunError::Static)?;
        let Callee::Inst(host_inst) = callee else {
            return ub(&l.loc, "launch of a function that is not a kernel");
        };
        let hi = self.host.instance(host_inst);
        if !hi.spaces.global {
            return ub(
                &l.loc,
                format!("launch of `{}`, which is not a kernel", hi.display),
            );
        }
        let key = hi.key.clone();
        let display = hi.display.clone();
        if self.machine.sticky_error != 0 {
            self.notes.push(Diagnostic::new(
                Code::N2001,
                l.loc.clone(),
                format!(
                    "launch of `{display}` skipped: device error {} is pending",
                    self.machine.sticky_error
                ),
            ));
            return Ok(());
        }
        let Some(dev_inst) = self.sema(Side::Device).instantiate_key(&key, &l.loc) else {
            return ub(
                &l.loc,
                format!("`{display}` is not compiled for the device"),
            );
        };
        let threads = grid.max(0).saturating_mul(block.max(0)) as u64;
        self.machine.side = Some(Side::Device);
        let mut result = Ok(());
        for t in 0..threads {
            self.machine.thread_id = t;
            match self.call_inst(Side::Device, dev_inst, args.clone()) {
                Ok(_) => {}
                Err(Stop::Trap) => {
                    self.machine.sticky_error = self.profile.cuda_version.trap_error_code() as i32;
                    break;
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.machine.side = Some(Side::Host);
        self.machine.thread_id = 0;
        result
    }

    fn truthy(&mut self, f: &mut Frame, e: &'a Expr) -> Flow<bool> {
        match self.expr(f, e)? {
            Value::Bool(b) => Ok(b),
            Value::Int(i) => Ok(i != 0),
            v => Err(static_err(&e.loc, format!("`{v}` is not a condition"))),
        }
    }

    fn int(&mut self, f: &mut Frame, e: &'a Expr) -> Flow<i64> {
        match self.expr(f, e)? {
            Value::Int(i) => Ok(i),
            Value::Bool(b) => Ok(b as i64),
            v => Err(static_err(&e.loc, format!("`{v}` is not an integer"))),
        }
    }

    fn resolve_type(&mut self, f: &Frame, t: &TypeExpr) -> Flow<Ty> {
        self.sema(f.side)
            .resolve_type(t, &f.bindings)
            .map_err(|e| Stop::Error(RunError::Static(e.into_diagnostic())))
    }

    fn constant(&mut self, f: &Frame, e: &Expr) -> Flow<Value> {
        self.sema(f.side)
            .eval_const(e, &f.bindings)
            .map(Value::from_const)
            .map_err(|e| Stop::Error(RunError::Static(e.into_diagnostic())))
    }

    fn lookup<'f>(f: &'f mut Frame, name: &str) -> Option<&'f mut Option<Value>> {
        f.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }

    fn expr(&mut self, f: &mut Frame, e: &'a Expr) -> Flow<Value> {
        match &e.kind {
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::HdcConst(h) => Ok(Value::Hdc(*h)),
            ExprKind::Name(n) => match Self::lookup(f, n) {
                Some(Some(v)) => Ok(v.clone()),
                Some(None) => ub(&e.loc, format!("read of uninitialized variable `{n}`")),
                None => self.constant(f, e),
            },
            ExprKind::Unary(op, x) => {
                let v = self.expr(f, x)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Not, Value::Int(i)) => Ok(Value::Bool(i == 0)),
                    (UnOp::Neg, Value::Int(i)) => match i.checked_neg() {
                        Some(n) => Ok(Value::Int(n)),
                        None => ub(&e.loc, "signed integer overflow"),
                    },
                    (_, v) => Err(static_err(&e.loc, format!("bad operand `{v}`"))),
                }
            }
            ExprKind::Binary(op, l, r) => self.binary(f, *op, l, r, &e.loc),
            ExprKind::Assign(op, name, v) => {
                let rhs = self.expr(f, v)?;
                let cur = match Self::lookup(f, name) {
                    Some(slot) => slot.clone(),
                    None => return Err(static_err(&e.loc, format!("`{name}` is not a variable"))),
                };
                let new = match op {
                    AssignOp::Set => match cur {
                        Some(old) => rhs.convert(&old.ty()),
                        None => rhs,
                    },
                    AssignOp::Add | AssignOp::Sub => {
                        let (Some(Value::Int(a)), Value::Int(b)) = (cur, rhs) else {
                            return ub(&e.loc, format!("compound assignment to `{name}`"));
                        };
                        let r = if *op == AssignOp::Add {
                            a.checked_add(b)
                        } else {
                            a.checked_sub(b)
                        };
                        match r {
                            Some(r) => Value::Int(r),
                            None => return ub(&e.loc, "signed integer overflow"),
                        }
                    }
                };
                *Self::lookup(f, name).unwrap() = Some(new.clone());
                Ok(new)
            }
            ExprKind::IncDec {
                name,
                increment,
                prefix,
            } => {
                let Some(slot) = Self::lookup(f, name) else {
                    return Err(static_err(&e.loc, format!("`{name}` is not a variable")));
                };
                let Some(Value::Int(old)) = slot.clone() else {
                    return ub(
                        &e.loc,
                        format!("increment of `{name}`, which holds no integer"),
                    );
                };
                let new = if *increment {
                    old.checked_add(1)
                } else {
                    old.checked_sub(1)
                };
                let Some(new) = new else {
                    return ub(&e.loc, "signed integer overflow");
                };
                *slot = Some(Value::Int(new));
                Ok(Value::Int(if *prefix { new } else { old }))
            }
            ExprKind::Call { name, targs, args } => {
                let args = self.args(f, args)?;
                self.call(f, CallShape::Free(name), targs.as_deref(), args, &e.loc)
            }
            ExprKind::StaticCall {
                ty,
                method,
                targs,
                args,
            } => {
                let Ty::Struct(st) = self.resolve_type(f, ty)? else {
                    return Err(static_err(&e.loc, "static call on a non-struct type"));
                };
                let args = self.args(f, args)?;
                self.call(
                    f,
                    CallShape::Member(&st, method),
                    targs.as_deref(),
                    args,
                    &e.loc,
                )
            }
            ExprKind::MemberCall {
                recv,
                method,
                targs,
                args,
            } => {
                let Value::Struct(st) = self.expr(f, recv)? else {
                    return Err(static_err(&e.loc, "member call on a non-struct value"));
                };
                let args = self.args(f, args)?;
                self.call(
                    f,
                    CallShape::Member(&st, method),
                    targs.as_deref(),
                    args,
                    &e.loc,
                )
            }
            ExprKind::StaticMember { .. } => self.constant(f, e),
            ExprKind::Temp(t) => Ok(match self.resolve_type(f, t)? {
                Ty::Struct(st) => Value::Struct(st),
                Ty::Int => Value::Int(0),
                Ty::Bool => Value::Bool(false),
                Ty::Hdc => Value::Hdc(Hdc::Hst),
                Ty::Void => Value::Void,
            }),
            ExprKind::HdcTrait(t) => {
                let ty = self.resolve_type(f, t)?;
                self.sema(f.side)
                    .compute_hdc(&ty)
                    .map(Value::Hdc)
                    .map_err(|e| Stop::Error(RunError::Static(e.into_diagnostic())))
            }
            ExprKind::Printf { format, args } => {
                let mut vals = self.args(f, args)?.into_iter();
                let mut text = String::new();
                let mut rest = format.as_str();
                while let Some(i) = rest.find("%d") {
                    text.push_str(&rest[..i]);
                    if let Some(v) = vals.next() {
                        text.push_str(&v.convert(&Ty::Int).to_string());
                    }
                    rest = &rest[i + 2..];
                }
                text.push_str(rest);
                self.machine.out.extend_from_slice(text.as_bytes());
                Ok(Value::Int(text.len() as i64))
            }
        }
    }

    fn args(&mut self, f: &mut Frame, args: &'a [Expr]) -> Flow<Vec<Value>> {
        args.iter().map(|a| self.expr(f, a)).collect()
    }

    fn binary(
        &mut self,
        f: &mut Frame,
        op: BinOp,
        l: &'a Expr,
        r: &'a Expr,
        loc: &SrcLoc,
    ) -> Flow<Value> {
        match op {
            BinOp::And => return Ok(Value::Bool(self.truthy(f, l)? && self.truthy(f, r)?)),
            BinOp::Or => return Ok(Value::Bool(self.truthy(f, l)? || self.truthy(f, r)?)),
            _ => {}
        }
        let a = self.expr(f, l)?;
        let b = self.expr(f, r)?;
        if let (BinOp::Eq | BinOp::Ne, Value::Hdc(x), Value::Hdc(y)) = (op, &a, &b) {
            return Ok(Value::Bool((x == y) == (op == BinOp::Eq)));
        }
        let (Some(x), Some(y)) = (as_int(&a), as_int(&b)) else {
            return Err(static_err(loc, format!("bad operands `{a}` and `{b}`")));
        };
        let arith = |r: Option<i64>| match r {
            Some(v) => Ok(Value::Int(v)),
            None => ub(loc, "signed integer overflow or division by zero"),
        };
        match op {
            BinOp::Add => arith(x.checked_add(y)),
            BinOp::Sub => arith(x.checked_sub(y)),
            BinOp::Mul => arith(x.checked_mul(y)),
            BinOp::Div => arith(x.checked_div(y)),
            BinOp::Rem => arith(x.checked_rem(y)),
            BinOp::Eq => Ok(Value::Bool(x == y)),
            BinOp::Ne => Ok(Value::Bool(x != y)),
            BinOp::Lt => Ok(Value::Bool(x < y)),
            BinOp::Gt => Ok(Value::Bool(x > y)),
            BinOp::Le => Ok(Value::Bool(x <= y)),
            BinOp::Ge => Ok(Value::Bool(x >= y)),
            BinOp::And | BinOp::Or => unreachable!(),
        }
    }

    fn call(
        &mut self,
        f: &mut Frame,
        shape: CallShape,
        targs: Option<&[TemplateArg]>,
        args: Vec<Value>,
        loc: &SrcLoc,
    ) -> Flow<Value> {
        self.tick()?;
        let arg_tys: Vec<Ty> = args.iter().map(Value::ty).collect();
        let site = CallSite {
            shape,
            targs,
            arg_tys: &arg_tys,
            caller: f.inst,
            side: f.side,
            loc,
        };
        let side = f.side;
        let callee = self
            .sema(side)
            .resolve_call(&site)
            .map_err(RunError::Static)?;
        match callee {
            Callee::Builtin(b) => {
                if !b.spaces().contains(side) {
                    return ub(loc, format!("call of `{}` from {side} code", b.name()));
                }
                self.builtin(b, args, side)
            }
            Callee::Inst(id) => {
                let i = self.sema(side).instance(id);
                if i.spaces.global {
                    return ub(loc, format!("direct call of kernel `{}`", i.display));
                }
                if !i.spaces.contains(side) {
                    return ub(
                        loc,
                        format!("call of `{}` ({}) from {side} code", i.display, i.spaces),
                    );
                }
                self.call_inst(side, id, args)
            }
        }
    }

    fn builtin(&mut self, b: Builtin, args: Vec<Value>, side: Side) -> Flow<Value> {
        match b {
            Builtin::ReleaseAssert => {
                let ok = match args.first() {
                    Some(Value::Bool(v)) => *v,
                    Some(Value::Int(i)) => *i != 0,
                    _ => true,
                };
                match (ok, side) {
                    (true, _) => Ok(Value::Void),
                    (false, Side::Device) => Err(Stop::Trap),
                    (false, Side::Host) => Err(Stop::Abort),
                }
            }
            Builtin::Trap => Err(Stop::Trap),
            Builtin::Abort => Err(Stop::Abort),
            Builtin::DeviceSynchronize => Ok(Value::Int(self.machine.sticky_error as i64)),
            Builtin::Forward => Ok(args.into_iter().next().unwrap_or(Value::Void)),
        }
    }
}

fn as_int(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => Some(*i),
        Value::Bool(b) => Some(*b as i64),
        _ => None,
    }
}

fn static_err(loc: &SrcLoc, msg: impl Into<String>) -> Stop {
    Stop::Error(RunError::Static(Diagnostic::new(
        Code::E0001,
        loc.clone(),
        msg,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::CudaVersion;

    fn exec(src: &str, profile: &CompileProfile) -> RunResult {
        run(&SourceUnit::new("t.mcu", src), profile, Mode::Classic).unwrap()
    }

    const DOTS: &str = "__device__ void print() { printf(\".\"); }\n\
        __global__ void kernel(int N) { for (int n = 0; n < N; ++n) { print(); } }\n\
        int main() { kernel<<<4, 3>>>(2); return cudaDeviceSynchronize(); }\n";

    #[test]
    fn kernel_prints_grid_times_block_times_n() {
        let r = exec(DOTS, &CompileProfile::nvcc());
        assert_eq!(r.stdout_lossy(), ".".repeat(24));
        assert_eq!(r.exit_code, 0);
        assert!(!r.ub_halt);
    }

    #[test]
    fn trap_sets_version_dependent_sticky_error() {
        let src = "__global__ void k() { release_assert(false); }\n\
                   int main() { k<<<1, 1>>>(); return cudaDeviceSynchronize(); }\n";
        let p = CompileProfile::nvcc();
        assert_eq!(exec(src, &p.with_version(CudaVersion::V12)).exit_code, 207);
        assert_eq!(exec(src, &p.with_version(CudaVersion::V9)).exit_code, 4);
    }

    #[test]
    fn launch_after_trap_is_skipped() {
        let src = "__global__ void bad() { __trap(); }\n\
                   __global__ void dot() { printf(\".\"); }\n\
                   int main() { bad<<<1, 2>>>(); dot<<<1, 1>>>(); return cudaDeviceSynchronize(); }\n";
        let r = exec(src, &CompileProfile::nvcc());
        assert_eq!(r.stdout, b"");
        assert_eq!(r.exit_code, 207);
        assert_eq!(r.notes.len(), 1);
        assert_eq!(r.notes[0].code, Code::N2001);
    }

    #[test]
    fn host_assert_aborts() {
        let r = exec(
            "int main() { release_assert(false); return 0; }\n",
            &CompileProfile::nvcc(),
        );
        assert_eq!(r.exit_code, ABORT_EXIT);
        let r = exec(
            "int main() { release_assert(true); }\n",
            &CompileProfile::nvcc(),
        );
        assert_eq!(r.exit_code, 0);
    }

    #[test]
    fn stray_call_halts() {
        let src = "__device__ int d() { return 2; }\n\
                   __host__ __device__ int w() { return d(); }\n\
                   int main() { return w(); }\n";
        let r = exec(src, &CompileProfile::nvcc());
        assert!(r.ub_halt);
        assert_eq!(r.exit_code, UB_EXIT);
        assert_eq!(r.notes[0].code, Code::N2002);
    }

    #[test]
    fn uninitialized_read_halts() {
        let r = exec("int main() { int x; return x; }\n", &CompileProfile::nvcc());
        assert!(r.ub_halt);
    }

    #[test]
    fn step_limit_is_an_error() {
        let passes = frontend(
            &SourceUnit::new("t.mcu", "int main() { for (;;) {} }\n"),
            &CompileProfile::nvcc(),
        )
        .unwrap();
        let limits = Limits {
            max_steps: 1000,
            ..Limits::default()
        };
        let e = run_passes(&passes, &CompileProfile::nvcc(), Mode::Classic, limits).unwrap_err();
        assert_eq!(e, RunError::StepLimit(1000));
    }
}
