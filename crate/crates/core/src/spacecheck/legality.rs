use super::Mode;
use crate::diag::Code;
use crate::sema::{Side, SpaceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallKind {
    Direct,
    Launch,
}

/// Where a call happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    /// The side the caller's body is being compiled for.
    pub side: Side,
    pub caller: SpaceSet,
    pub kind: CallKind,
    /// Whether (caller, side) is reachable from an entry point.
    pub reachable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalleeInfo {
    pub spaces: SpaceSet,
    pub constexpr_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flags {
    pub relaxed_constexpr: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Warn(Code),
    Err(Code),
}

/// The call-legality matrix. Total over all inputs.
pub fn legality(site: Site, callee: CalleeInfo, flags: Flags) -> Verdict {
    use Verdict::*;
    if site.kind == CallKind::Launch {
        if !callee.spaces.global {
            return Err(Code::E1004);
        }
        if site.side == Side::Device {
            return Err(Code::E1003);
        }
        return Ok;
    }
    if callee.spaces.global {
        return Err(Code::E1004);
    }
    if callee.spaces.contains(site.side) {
        return Ok;
    }
    if flags.relaxed_constexpr && callee.constexpr_flag {
        return Ok;
    }
    if callee.spaces.is_empty() {
        // Already reported as an empty space set.
        return Ok;
    }
    // The callee is one-sided and lives on the other side.
    if !site.caller.is_host_device() {
        return match (flags.mode, site.side) {
            (Mode::Proposal2, _) => Err(Code::E1501),
            (_, Side::Host) => Err(Code::E1001),
            (_, Side::Device) => Err(Code::E1002),
        };
    }
    let (warn, promoted) = match site.side {
        Side::Device => (Code::W1101, Code::E1101),
        Side::Host => (Code::W1102, Code::E1102),
    };
    match flags.mode {
        Mode::Classic | Mode::Proposal1 => Warn(warn),
        Mode::Fidelity if site.side == Side::Host => Ok,
        Mode::Fidelity => Warn(warn),
        Mode::Sound if site.reachable => Err(promoted),
        Mode::Sound => Warn(warn),
        Mode::Proposal2 if site.reachable => Err(Code::E1501),
        Mode::Proposal2 => Warn(Code::W1502),
    }
}

/// Message for a legality verdict. Messages name no functions so identical
/// findings from different instantiations collapse into one.
pub fn message(code: Code, side: Side, kind: CallKind) -> &'static str {
    match (code, side) {
        (Code::E1004, _) if kind == CallKind::Launch => {
            "only a __global__ function can be launched with <<< >>>"
        }
        (Code::E1004, _) => {
            "a __global__ function cannot be called directly; launch it with <<< >>>"
        }
        (Code::E1003, _) => "launching a kernel from device code is not allowed",
        (Code::E1001, _) => "calling a device function from a host function is not allowed",
        (Code::E1002, _) => "calling a host function from a device function is not allowed",
        (Code::W1101 | Code::E1101, _) => {
            "calling a host function from a host device function is not allowed"
        }
        (Code::W1102 | Code::E1102, _) => {
            "calling a device function from a host device function is not allowed"
        }
        (Code::E1501 | Code::W1502, Side::Device) => {
            "calling a host function from device code is not allowed"
        }
        (Code::E1501 | Code::W1502, Side::Host) => {
            "calling a device function from host code is not allowed"
        }
        _ => "call is not allowed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(mode: Mode) -> Flags {
        Flags {
            relaxed_constexpr: false,
            mode,
        }
    }

    #[test]
    fn known_call_patterns() {
        let dev = CalleeInfo {
            spaces: SpaceSet::DEVICE,
            constexpr_flag: false,
        };
        let host_site = Site {
            side: Side::Host,
            caller: SpaceSet::HOST,
            kind: CallKind::Direct,
            reachable: true,
        };
        assert_eq!(
            legality(host_site, dev, flags(Mode::Classic)),
            Verdict::Err(Code::E1001)
        );

        let host_callee = CalleeInfo {
            spaces: SpaceSet::HOST,
            constexpr_flag: false,
        };
        let hd_dev_side = Site {
            side: Side::Device,
            caller: SpaceSet::HOST_DEVICE,
            kind: CallKind::Direct,
            reachable: false,
        };
        let v = legality(hd_dev_side, host_callee, flags(Mode::Classic));
        assert_eq!(v, Verdict::Warn(Code::W1101));
        assert!(message(Code::W1101, Side::Device, CallKind::Direct).contains("is not allowed"));

        let constexpr_host = CalleeInfo {
            spaces: SpaceSet::HOST,
            constexpr_flag: true,
        };
        let kernel_side = Site {
            side: Side::Device,
            caller: SpaceSet::GLOBAL,
            kind: CallKind::Direct,
            reachable: true,
        };
        let relaxed = Flags {
            relaxed_constexpr: true,
            mode: Mode::Classic,
        };
        assert_eq!(legality(kernel_side, constexpr_host, relaxed), Verdict::Ok);
        assert_eq!(
            legality(kernel_side, constexpr_host, flags(Mode::Classic)),
            Verdict::Err(Code::E1002)
        );
    }

    #[test]
    fn fidelity_is_silent_on_device_only_callee() {
        let site = Site {
            side: Side::Host,
            caller: SpaceSet::HOST_DEVICE,
            kind: CallKind::Direct,
            reachable: true,
        };
        let dev = CalleeInfo {
            spaces: SpaceSet::DEVICE,
            constexpr_flag: false,
        };
        assert_eq!(legality(site, dev, flags(Mode::Fidelity)), Verdict::Ok);
        assert_eq!(
            legality(site, dev, flags(Mode::Classic)),
            Verdict::Warn(Code::W1102)
        );
        assert_eq!(
            legality(site, dev, flags(Mode::Sound)),
            Verdict::Err(Code::E1102)
        );
        assert_eq!(
            legality(site, dev, flags(Mode::Proposal2)),
            Verdict::Err(Code::E1501)
        );
        let unreachable = Site {
            reachable: false,
            ..site
        };
        assert_eq!(
            legality(unreachable, dev, flags(Mode::Sound)),
            Verdict::Warn(Code::W1102)
        );
        assert_eq!(
            legality(unreachable, dev, flags(Mode::Proposal2)),
            Verdict::Warn(Code::W1502)
        );
    }
}
