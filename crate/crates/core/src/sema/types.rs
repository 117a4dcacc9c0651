use std::fmt;

/// Host-device compatibility of a type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hdc {
    Hst,
    Dev,
    HstDev,
}

impl Hdc {
    pub const ALL: [Hdc; 3] = [Hdc::Hst, Hdc::Dev, Hdc::HstDev];

    pub fn name(self) -> &'static str {
        match self {
            Hdc::Hst => "Hst",
            Hdc::Dev => "Dev",
            Hdc::HstDev => "HstDev",
        }
    }

    pub fn from_name(s: &str) -> Option<Hdc> {
        Hdc::ALL.into_iter().find(|h| h.name() == s)
    }
}

impl fmt::Display for Hdc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HDC::{}", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExecSpace {
    Host,
    Device,
    Global,
    HostDevice,
}

/// The side a body is compiled for or executing on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Host,
    Device,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Host => "host",
            Side::Device => "device",
        })
    }
}

/// Effective execution spaces of a function instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SpaceSet {
    pub host: bool,
    pub device: bool,
    pub global: bool,
}

impl SpaceSet {
    pub const EMPTY: SpaceSet = SpaceSet {
        host: false,
        device: false,
        global: false,
    };
    pub const HOST: SpaceSet = SpaceSet {
        host: true,
        device: false,
        global: false,
    };
    pub const DEVICE: SpaceSet = SpaceSet {
        host: false,
        device: true,
        global: false,
    };
    pub const HOST_DEVICE: SpaceSet = SpaceSet {
        host: true,
        device: true,
        global: false,
    };
    pub const GLOBAL: SpaceSet = SpaceSet {
        host: false,
        device: false,
        global: true,
    };

    pub fn from_space(s: ExecSpace) -> SpaceSet {
        match s {
            ExecSpace::Host => SpaceSet::HOST,
            ExecSpace::Device => SpaceSet::DEVICE,
            ExecSpace::Global => SpaceSet::GLOBAL,
            ExecSpace::HostDevice => SpaceSet::HOST_DEVICE,
        }
    }

    pub fn is_empty(self) -> bool {
        !(self.host || self.device || self.global)
    }

    /// Whether code in this set can run directly on `side`. Kernels run on
    /// the device but are not directly callable there.
    pub fn contains(self, side: Side) -> bool {
        match side {
            Side::Host => self.host,
            Side::Device => self.device,
        }
    }

    pub fn is_host_device(self) -> bool {
        self.host && self.device
    }

    /// Sides a body in this set is compiled for.
    pub fn sides(self) -> impl Iterator<Item = Side> {
        let host = self.host.then_some(Side::Host);
        let device = (self.device || self.global).then_some(Side::Device);
        host.into_iter().chain(device)
    }

    pub fn union(self, o: SpaceSet) -> SpaceSet {
        SpaceSet {
            host: self.host || o.host,
            device: self.device || o.device,
            global: self.global || o.global,
        }
    }

    /// The single lattice point this set corresponds to, if any.
    pub fn exec_space(self) -> Option<ExecSpace> {
        match (self.host, self.device, self.global) {
            (true, false, false) => Some(ExecSpace::Host),
            (false, true, false) => Some(ExecSpace::Device),
            (true, true, false) => Some(ExecSpace::HostDevice),
            (false, false, true) => Some(ExecSpace::Global),
            _ => None,
        }
    }
}

impl fmt::Display for SpaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.host {
            parts.push("host");
        }
        if self.device {
            parts.push("device");
        }
        if self.global {
            parts.push("global");
        }
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// A resolved type. Structs are referred to by name so types compare equal
/// across the two compile passes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ty {
    Void,
    Int,
    Bool,
    Hdc,
    Struct(StructTy),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructTy {
    pub name: String,
    pub args: Vec<TArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TArg {
    Ty(Ty),
    Hdc(Hdc),
}

impl Ty {
    pub fn is_fundamental(&self) -> bool {
        matches!(self, Ty::Int | Ty::Bool | Ty::Hdc)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Void => f.write_str("void"),
            Ty::Int => f.write_str("int"),
            Ty::Bool => f.write_str("bool"),
            Ty::Hdc => f.write_str("HDC"),
            Ty::Struct(s) => s.fmt(f),
        }
    }
}

impl fmt::Display for StructTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write_args(f, &self.args)?;
        }
        Ok(())
    }
}

impl fmt::Display for TArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TArg::Ty(t) => t.fmt(f),
            TArg::Hdc(h) => h.fmt(f),
        }
    }
}

pub(crate) fn write_args(f: &mut impl fmt::Write, args: &[TArg]) -> fmt::Result {
    f.write_char('<')?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_char('>')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sides_of_sets() {
        assert_eq!(SpaceSet::HOST.sides().collect::<Vec<_>>(), [Side::Host]);
        assert_eq!(SpaceSet::GLOBAL.sides().collect::<Vec<_>>(), [Side::Device]);
        assert_eq!(
            SpaceSet::HOST_DEVICE.sides().collect::<Vec<_>>(),
            [Side::Host, Side::Device]
        );
        assert!(!SpaceSet::GLOBAL.contains(Side::Device));
        assert_eq!(SpaceSet::EMPTY.exec_space(), None);
        assert_eq!(SpaceSet::HOST_DEVICE.to_string(), "{host, device}");
    }

    #[test]
    fn type_display() {
        let t = Ty::Struct(StructTy {
            name: "S1d".into(),
            args: vec![TArg::Hdc(Hdc::Dev)],
        });
        assert_eq!(t.to_string(), "S1d<HDC::Dev>");
        assert_eq!(Hdc::from_name("HstDev"), Some(Hdc::HstDev));
        assert_eq!(Hdc::from_name("Hd"), None);
    }
}
