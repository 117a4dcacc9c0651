use exspace_core::interp::{self, RunError};
use exspace_core::spacecheck::check_unit;
use exspace_core::{frontend, Code, CompileProfile, Mode, SourceUnit};

fn codes(src: &str, profile: &CompileProfile, mode: Mode) -> Vec<Code> {
    check_unit(&SourceUnit::new("t.mcu", src), profile, mode)
        .iter()
        .map(|d| d.code)
        .collect()
}

fn two_candidates(a: bool, b: bool) -> String {
    format!(
        "template <typename T>\nrequires( {a} )\nint pick() {{ return 1; }}\n\
         template <typename T>\nrequires( {b} == true )\nint pick() {{ return 2; }}\n\
         struct S {{}};\nint main() {{ return pick<S>(); }}\n"
    )
}

#[test]
fn overload_outcome_follows_survivor_count() {
    for a in [false, true] {
        for b in [false, true] {
            let survivors = usize::from(a) + usize::from(b);
            let want: Vec<Code> = match survivors {
                0 => vec![Code::E1301],
                1 => vec![],
                _ => vec![Code::E1302],
            };
            let src = two_candidates(a, b);
            for mode in Mode::ALL {
                assert_eq!(
                    codes(&src, &CompileProfile::nvcc(), mode),
                    want,
                    "a={a} b={b} {mode}"
                );
            }
            if survivors == 1 {
                let r = interp::run(
                    &SourceUnit::new("t.mcu", src.as_str()),
                    &CompileProfile::nvcc(),
                    Mode::Classic,
                )
                .unwrap();
                assert_eq!(r.exit_code, if a { 1 } else { 2 });
            }
        }
    }
}

#[test]
fn plain_compiler_rejects_or_erases_cuda_keywords() {
    let src = "__host__ __device__ int f() { return 5; }\nint main() { return f(); }\n";
    let unit = SourceUnit::new("t.mcu", src);
    assert!(frontend(&unit, &CompileProfile::plain(false)).is_err());
    let erased = CompileProfile::plain(true);
    assert!(check_unit(&unit, &erased, Mode::Classic).is_empty());
    assert_eq!(
        interp::run(&unit, &erased, Mode::Classic)
            .unwrap()
            .exit_code,
        5
    );
}

#[test]
fn undefined_names_are_reported() {
    let src = "int main() { return nope(); }\n";
    assert_eq!(
        codes(src, &CompileProfile::nvcc(), Mode::Classic),
        [Code::E0101]
    );
}

#[test]
fn direct_kernel_call_and_device_launch_are_errors() {
    let src = "__global__ void k() {}\n__global__ void k2() { k<<<1, 1>>>(); }\n\
               int main() { k(); return 0; }\n";
    let mut got = codes(src, &CompileProfile::nvcc(), Mode::Classic);
    got.sort();
    assert_eq!(got, [Code::E1003, Code::E1004]);
}

#[test]
fn runaway_recursion_hits_the_depth_limit() {
    let src = "int f(int n) { return f(n + 1); }\nint main() { return f(0); }\n";
    let unit = SourceUnit::new("t.mcu", src);
    let err = interp::run(&unit, &CompileProfile::nvcc(), Mode::Classic).unwrap_err();
    assert!(matches!(err, RunError::DepthLimit(_)), "{err:?}");
}

#[test]
fn missing_main_is_reported_by_the_interpreter() {
    let unit = SourceUnit::new("t.mcu", "int f() { return 1; }\n");
    assert_eq!(
        interp::run(&unit, &CompileProfile::nvcc(), Mode::Classic).unwrap_err(),
        RunError::NoMain
    );
}
