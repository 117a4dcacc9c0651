//! Execution-space checking: builds a call graph per compile pass, works out
//! which (function, side) pairs execution can reach, and grades every call.

mod graph;
pub mod legality;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use graph::{blocked_widenings, pass_side, reachability, Edge, PassGraph};
pub use legality::{legality, CallKind, CalleeInfo, Flags, Site, Verdict};

use crate::diag::{self, Code, Diagnostic, SrcLoc};
use crate::par::{self, Exec};
use crate::profile::CompileProfile;
use crate::sema::{InstKey, Sema, Side, SpaceSet};
use crate::syntax::PassKind;
use crate::{frontend, PassAst, SourceUnit};

/// Which rule set grades calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Warnings for cross-space calls out of host device functions.
    #[default]
    Classic,
    /// Like classic, but silent where nvcc is silent.
    Fidelity,
    /// Reachable cross-space calls are errors, and pass divergence is rejected.
    Sound,
    /// Execution space specifiers may carry boolean predicates.
    Proposal1,
    /// Undecorated functions take the space of their caller.
    Proposal2,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Classic,
        Mode::Fidelity,
        Mode::Sound,
        Mode::Proposal1,
        Mode::Proposal2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Classic => "classic",
            Mode::Fidelity => "fidelity",
            Mode::Sound => "sound",
            Mode::Proposal1 => "proposal1",
            Mode::Proposal2 => "proposal2",
        }
    }

    /// Whether the host and device passes must agree on what they compile.
    pub fn rejects_divergence(self) -> bool {
        matches!(self, Mode::Sound | Mode::Proposal1 | Mode::Proposal2)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMode(pub String);

impl fmt::Display for UnknownMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown mode `{}`", self.0)
    }
}

impl std::error::Error for UnknownMode {}

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

/// Checks one unit and returns the diagnostics a user sees.
pub fn check_unit(unit: &SourceUnit, profile: &CompileProfile, mode: Mode) -> Vec<Diagnostic> {
    let mut all = check_unit_all(unit, profile, mode);
    all.retain(|d| !d.suppressed);
    all
}

/// Like [`check_unit`], but keeps pragma-suppressed warnings.
pub fn check_unit_all(unit: &SourceUnit, profile: &CompileProfile, mode: Mode) -> Vec<Diagnostic> {
    match frontend(unit, profile) {
        Ok(passes) => check_passes(&passes, profile, mode),
        Err(diags) => diags,
    }
}

/// Checks already parsed passes. Output is sorted and deduplicated and
/// includes suppressed warnings.
pub fn check_passes(passes: &[PassAst], profile: &CompileProfile, mode: Mode) -> Vec<Diagnostic> {
    let graphs = par::map(Exec::Parallel, passes, |p| graph::build(p, profile, mode));
    let host = graphs.iter().find(|g| g.pass == PassKind::HostPass);
    let device = graphs.iter().find(|g| g.pass == PassKind::DevicePass);
    let mut out: Vec<Diagnostic> = graphs
        .iter()
        .flat_map(|g| g.diags.iter().cloned())
        .collect();
    let Some(host) = host else {
        diag::normalize(&mut out);
        return out;
    };
    let device_or_host = device.unwrap_or(host);
    let blocked = blocked_widenings(host, device_or_host);
    let reach = reachability(host, device_or_host, &blocked);
    let flags = Flags {
        relaxed_constexpr: profile.relaxed_constexpr,
        mode,
    };
    for g in &graphs {
        let side = pass_side(g.pass);
        for e in g
            .edges
            .iter()
            .filter(|e| e.side == side && !e.caller_widened)
        {
            let site = Site {
                side,
                caller: e.caller_spaces,
                kind: e.kind,
                reachable: reach.contains(&(e.caller.clone(), side)),
            };
            let mut callee = CalleeInfo {
                spaces: e.callee_spaces,
                constexpr_flag: e.callee_constexpr,
            };
            if e.callee_widened
                && e.callee
                    .as_ref()
                    .is_some_and(|c| blocked.contains(&(c.clone(), side)))
            {
                callee = CalleeInfo {
                    spaces: without(e.callee_spaces, side),
                    constexpr_flag: false,
                };
            }
            let code = match legality(site, callee, flags) {
                Verdict::Ok => continue,
                Verdict::Warn(c) | Verdict::Err(c) => c,
            };
            let loc = match code {
                Code::E1501 | Code::W1502 => instantiation_site(g, &e.caller).unwrap_or(&e.loc),
                _ => &e.loc,
            };
            let mut d = Diagnostic::new(code, loc.clone(), legality::message(code, side, e.kind));
            d.suppressed = e.caller_pragma && !d.is_error();
            out.push(d);
        }
    }
    if let (Some(device), true) = (device, mode.rejects_divergence()) {
        out.extend(detect_arch_divergence(host, device));
    }
    diag::normalize(&mut out);
    out
}

fn without(mut set: SpaceSet, side: Side) -> SpaceSet {
    match side {
        Side::Host => set.host = false,
        Side::Device => set.device = false,
    }
    set
}

/// For an instance whose spaces were propagated from its caller, the call
/// site outside any propagated instance that brought it into existence.
fn instantiation_site<'g>(g: &'g PassGraph, key: &InstKey) -> Option<&'g SrcLoc> {
    let mut key = key;
    let mut site = None;
    // Bounded so a cyclic chain cannot hang.
    for _ in 0..=g.instances.len() {
        if key.context.is_none() {
            return site;
        }
        let (_, first, _) = g.instances.get(key)?;
        let Some(caller) = g
            .edges
            .iter()
            .find(|e| e.callee.as_ref() == Some(key) && &e.loc == first)
            .map(|e| &e.caller)
        else {
            return site;
        };
        site = Some(first);
        key = caller;
    }
    site
}

/// Reports declarations and template instances that exist in only one of
/// the two passes.
pub fn detect_arch_divergence(host: &PassGraph, device: &PassGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let host_decls: BTreeSet<&String> = host.decls.keys().collect();
    let device_decls: BTreeSet<&String> = device.decls.keys().collect();
    for k in host_decls.symmetric_difference(&device_decls) {
        let (loc, name) = host.decls.get(*k).or_else(|| device.decls.get(*k)).unwrap();
        out.push(Diagnostic::new(
            Code::E1201,
            loc.clone(),
            format!("declaration of `{name}` must not depend on whether __CUDA_ARCH__ is defined"),
        ));
    }
    let templated = |g: &PassGraph| -> BTreeSet<_> {
        g.instances
            .keys()
            .filter(|k| {
                !k.targs.is_empty()
                    || k.owner.as_ref().is_some_and(|o| !o.args.is_empty())
                    || k.context.is_some()
            })
            .cloned()
            .collect()
    };
    let (h, d) = (templated(host), templated(device));
    for k in h.symmetric_difference(&d) {
        let (_, site, display) = host
            .instances
            .get(k)
            .or_else(|| device.instances.get(k))
            .unwrap();
        out.push(Diagnostic::new(
            Code::E1201,
            site.clone(),
            format!(
                "instantiation of `{display}` must not depend on whether __CUDA_ARCH__ is defined"
            ),
        ));
    }
    out
}

/// Effective spaces of the member functions of a non-template struct, as
/// seen by the host pass. `Ok(None)` when there is no such struct.
pub fn member_spaces(
    unit: &SourceUnit,
    profile: &CompileProfile,
    mode: Mode,
    struct_name: &str,
) -> Result<Option<Vec<(String, SpaceSet)>>, Vec<Diagnostic>> {
    let passes = frontend(unit, profile)?;
    let p = &passes[0];
    let mut sema = Sema::new(&p.ast, p.pass.kind, profile, mode);
    Ok(sema.member_spaces(struct_name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(src: &str, mode: Mode) -> Vec<Diagnostic> {
        check_unit(
            &SourceUnit::new("t.mcu", src),
            &CompileProfile::nvcc(),
            mode,
        )
    }

    fn codes(ds: &[Diagnostic]) -> Vec<&'static str> {
        ds.iter().map(|d| d.code.as_str()).collect()
    }

    #[test]
    fn mode_names_roundtrip() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>(), Ok(m));
        }
        assert!("nope".parse::<Mode>().is_err());
    }

    #[test]
    fn host_calling_device_is_an_error() {
        let src = "__device__ int d() { return 1; }\nint main() { d(); return 0; }\n";
        let ds = check(src, Mode::Classic);
        assert_eq!(codes(&ds), ["E1001"]);
        assert_eq!((ds[0].loc.line, ds[0].loc.col), (2, 14));
    }

    #[test]
    fn unreachable_hd_warns_in_sound_mode() {
        let src = "void h() {}\n__host__ __device__ void g() { h(); }\nint main() { return 0; }\n";
        assert_eq!(codes(&check(src, Mode::Classic)), ["W1101"]);
        assert_eq!(codes(&check(src, Mode::Sound)), ["W1101"]);
    }

    #[test]
    fn reachable_hd_is_an_error_in_sound_mode() {
        let src = "void h() {}\n__host__ __device__ void g() { h(); }\n\
                   __global__ void k() { g(); }\nint main() { k<<<1, 1>>>(); return 0; }\n";
        assert_eq!(codes(&check(src, Mode::Classic)), ["W1101"]);
        assert_eq!(codes(&check(src, Mode::Sound)), ["E1101"]);
    }

    #[test]
    fn pragma_hides_the_warning() {
        let src =
            "void h() {}\n#pragma hd_warning_disable\n__host__ __device__ void g() { h(); }\n\
                   int main() { return 0; }\n";
        assert!(check(src, Mode::Classic).is_empty());
        let all = check_unit_all(
            &SourceUnit::new("t.mcu", src),
            &CompileProfile::nvcc(),
            Mode::Classic,
        );
        assert_eq!(all.len(), 1);
        assert!(all[0].suppressed);
    }

    #[test]
    fn arch_dependent_instantiation_diverges() {
        let src = "template <typename T> void f() {}\nstruct S {};\n\
                   int main() {\n#ifndef __CUDA_ARCH__\n  f<S>();\n#endif\n  return 0;\n}\n";
        assert!(check(src, Mode::Classic).is_empty());
        let ds = check(src, Mode::Sound);
        assert_eq!(codes(&ds), ["E1201"]);
        assert!(ds[0].message.contains("f<S>"));
    }

    #[test]
    fn relaxation_only_covers_clean_constexpr_bodies() {
        let relaxed = CompileProfile::nvcc().with_relaxed_constexpr(true);
        let clean = "constexpr int f() { return 1; }\n__global__ void k() { f(); }\n\
                     int main() { k<<<1, 1>>>(); return 0; }\n";
        let unit = SourceUnit::new("t.mcu", clean);
        assert_eq!(codes(&check(clean, Mode::Sound)), ["E1002"]);
        assert!(check_unit(&unit, &relaxed, Mode::Sound).is_empty());

        let dirty = "int h() { return 1; }\nconstexpr int f() { return h(); }\n\
                     __global__ void k() { f(); }\nint main() { k<<<1, 1>>>(); return 0; }\n";
        let unit = SourceUnit::new("t.mcu", dirty);
        let strict = check(dirty, Mode::Sound);
        assert_eq!(codes(&strict), ["E1002"]);
        assert_eq!(check_unit(&unit, &relaxed, Mode::Sound), strict);
    }
}
