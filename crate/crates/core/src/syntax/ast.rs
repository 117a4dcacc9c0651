//! Parsed MiniCU program.

use crate::diag::SrcLoc;
use crate::sema::Hdc;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ast {
    pub items: Vec<Item>,
    pub has_main: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Struct(StructDecl),
    Function(FunctionDecl),
    Const(ConstDecl),
    Pragma(PragmaDirective),
    /// `enum class HDC { Hst, Dev, HstDev };` -- accepted and ignored, HDC is built in.
    HdcEnum(SrcLoc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PragmaKind {
    HdWarningDisable,
    NvExecCheckDisable,
}

impl PragmaKind {
    pub fn name(self) -> &'static str {
        match self {
            PragmaKind::HdWarningDisable => "hd_warning_disable",
            PragmaKind::NvExecCheckDisable => "nv_exec_check_disable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PragmaDirective {
    pub kind: PragmaKind,
    pub loc: SrcLoc,
}

/// `__host__`/`__device__` with an optional boolean predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    pub predicate: Option<Expr>,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecifierSet {
    pub host: Option<SpaceSpec>,
    pub device: Option<SpaceSpec>,
    pub global: bool,
    pub constexpr_flag: bool,
    pub is_static: bool,
    pub pragma_suppress: bool,
}

impl SpecifierSet {
    pub fn is_decorated(&self) -> bool {
        self.host.is_some() || self.device.is_some() || self.global
    }

    pub fn has_predicates(&self) -> bool {
        self.host.as_ref().is_some_and(|s| s.predicate.is_some())
            || self.device.as_ref().is_some_and(|s| s.predicate.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateParamKind {
    Type,
    Hdc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateParam {
    pub name: String,
    pub kind: TemplateParamKind,
    pub default: Option<TemplateArg>,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateHeader {
    pub params: Vec<TemplateParam>,
    pub requires: Option<Expr>,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateArg {
    Type(TypeExpr),
    Expr(Expr),
    /// A bare identifier: a type or an HDC constant, decided during name resolution.
    Name(String, SrcLoc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    None,
    LValue,
    RValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeKind {
    Void,
    Int,
    Bool,
    Hdc,
    Auto,
    Named {
        name: String,
        args: Vec<TemplateArg>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeExpr {
    pub kind: TypeKind,
    pub is_const: bool,
    pub reference: RefKind,
    pub loc: SrcLoc,
}

impl TypeExpr {
    pub fn plain(kind: TypeKind, loc: SrcLoc) -> Self {
        TypeExpr {
            kind,
            is_const: false,
            reference: RefKind::None,
            loc,
        }
    }

    /// The name when this is a bare named type without template arguments.
    pub fn simple_name(&self) -> Option<&str> {
        match &self.kind {
            TypeKind::Named { name, args } if args.is_empty() => Some(name),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: TypeExpr,
    pub name: String,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub loc: SrcLoc,
    pub template: Option<TemplateHeader>,
    pub specs: SpecifierSet,
    pub ret: TypeExpr,
    pub params: Vec<Param>,
    pub is_const: bool,
    pub body: Option<Vec<Stmt>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructKeyword {
    Struct,
    Class,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructDecl {
    pub name: String,
    pub loc: SrcLoc,
    pub keyword: StructKeyword,
    pub template: Option<TemplateHeader>,
    /// Class-level `__host__`/`__device__` decoration.
    pub specs: SpecifierSet,
    pub members: Vec<Member>,
}

impl StructDecl {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.members.iter().filter_map(|m| match m {
            Member::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.members.iter().find_map(|m| match m {
            Member::Const(c) if c.name == name => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Member {
    Function(FunctionDecl),
    Const(ConstDecl),
    Pragma(PragmaDirective),
}

/// `static constexpr <type> <name> = <expr>;`
#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub ty: TypeExpr,
    pub name: String,
    pub value: Expr,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    Empty,
    Return(Option<Expr>, SrcLoc),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    VarDecl {
        ty: TypeExpr,
        name: String,
        init: Option<Expr>,
        loc: SrcLoc,
    },
    Expr(Expr),
    Launch(Launch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Launch {
    pub callee: String,
    pub targs: Option<Vec<TemplateArg>>,
    pub grid: Expr,
    pub block: Expr,
    pub args: Vec<Expr>,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SrcLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    HdcConst(Hdc),
    Name(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Assign(AssignOp, String, Box<Expr>),
    IncDec {
        name: String,
        increment: bool,
        prefix: bool,
    },
    /// Unqualified or `std::`-qualified call.
    Call {
        name: String,
        targs: Option<Vec<TemplateArg>>,
        args: Vec<Expr>,
    },
    /// `T::f(...)`
    StaticCall {
        ty: TypeExpr,
        method: String,
        targs: Option<Vec<TemplateArg>>,
        args: Vec<Expr>,
    },
    /// `recv.f(...)`
    MemberCall {
        recv: Box<Expr>,
        method: String,
        targs: Option<Vec<TemplateArg>>,
        args: Vec<Expr>,
    },
    /// `T::name`
    StaticMember {
        ty: TypeExpr,
        name: String,
    },
    /// `T{}`
    Temp(TypeExpr),
    /// `hdc<T>`
    HdcTrait(TypeExpr),
    Printf {
        format: String,
        args: Vec<Expr>,
    },
}

impl Ast {
    pub fn structs(&self) -> impl Iterator<Item = &StructDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Struct(s) => Some(s),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions().find(|f| f.name == name)
    }

    pub fn struct_decl(&self, name: &str) -> Option<&StructDecl> {
        self.structs().find(|s| s.name == name)
    }
}
