// Independent restatements of expected behavior, shared by test targets.

#![allow(dead_code)]

use exspace_core::sema::{Side, SpaceSet};
use exspace_core::spacecheck::CallKind;
use exspace_core::{Code, Mode};

/// The call rules, restated case by case.
#[allow(clippy::too_many_arguments)]
pub fn legality_oracle(
    side: Side,
    caller: SpaceSet,
    kind: CallKind,
    reachable: bool,
    callee: SpaceSet,
    cx: bool,
    relaxed: bool,
    mode: Mode,
) -> Option<Code> {
    let on_side = |s: SpaceSet| match side {
        Side::Host => s.host,
        Side::Device => s.device,
    };
    if kind == CallKind::Launch {
        return if !callee.global {
            Some(Code::E1004)
        } else if side == Side::Device {
            Some(Code::E1003)
        } else {
            None
        };
    }
    if callee.global {
        return Some(Code::E1004);
    }
    if on_side(callee) || (relaxed && cx) || callee == SpaceSet::EMPTY {
        return None;
    }
    let hd = caller.host && caller.device;
    let host = side == Side::Host;
    match (mode, hd) {
        (Mode::Proposal2, false) => Some(Code::E1501),
        (_, false) if host => Some(Code::E1001),
        (_, false) => Some(Code::E1002),
        (Mode::Classic | Mode::Proposal1, true) if host => Some(Code::W1102),
        (Mode::Classic | Mode::Proposal1, true) => Some(Code::W1101),
        (Mode::Fidelity, true) if host => None,
        (Mode::Fidelity, true) => Some(Code::W1101),
        (Mode::Sound, true) => Some(match (host, reachable) {
            (true, true) => Code::E1102,
            (true, false) => Code::W1102,
            (false, true) => Code::E1101,
            (false, false) => Code::W1101,
        }),
        (Mode::Proposal2, true) if reachable => Some(Code::E1501),
        (Mode::Proposal2, true) => Some(Code::W1502),
    }
}

// Expected stdout for a trap schedule (two threads per launch): dots and
// statuses up to the first trap, then the latched code for every later query.
pub fn schedule_oracle(schedule: &[bool], code: i32) -> String {
    let mut out = String::new();
    let mut sticky = 0;
    for &trap in schedule {
        if sticky == 0 {
            if trap {
                sticky = code;
            } else {
                out.push_str("..");
            }
        }
        out.push_str(&format!("{sticky};"));
    }
    out
}
