// Random well-formed MiniCU programs for property tests.
//
// A `GenProgram` is a small program shape (structs with a decorated `call`
// method, a chain of int functions that only call earlier ones, an optional
// `wrap<T>` template, one kernel and `main`). `render` prints it as source.
// Everything generated parses and names only things it declares, so any
// diagnostic is about execution spaces.

#![allow(dead_code)]

use std::fmt::Write as _;

use proptest::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Implicit,
    Host,
    Device,
    HostDevice,
}

impl Space {
    fn prefix(self) -> &'static str {
        match self {
            Space::Implicit => "",
            Space::Host => "__host__ ",
            Space::Device => "__device__ ",
            Space::HostDevice => "__host__ __device__ ",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenStruct {
    /// Space of the `call` method, or `None` for an empty struct.
    pub method: Option<Space>,
}

#[derive(Debug, Clone)]
pub struct GenFn {
    pub space: Space,
    pub constexpr_flag: bool,
    pub pragma: bool,
    /// Indices of earlier functions this one calls.
    pub calls: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GenWrap {
    pub space: Space,
    pub pragma: bool,
    /// Structs `main` instantiates `wrap` with.
    pub from_main: Vec<usize>,
    /// Structs the kernel instantiates `wrap` with.
    pub from_kernel: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GenProgram {
    pub structs: Vec<GenStruct>,
    pub fns: Vec<GenFn>,
    pub wrap: Option<GenWrap>,
    pub kernel_calls: Vec<usize>,
    pub main_calls: Vec<usize>,
    pub grid: u32,
    pub block: u32,
    pub dots: u32,
    /// Print pragmas as blank lines, so removing them keeps line numbers.
    pub blank_pragmas: bool,
}

impl GenProgram {
    pub fn struct_name(i: usize) -> String {
        format!("S{i}")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, st) in self.structs.iter().enumerate() {
            match st.method {
                None => {
                    let _ = writeln!(s, "struct S{i} {{}};");
                }
                Some(sp) => {
                    let _ = writeln!(
                        s,
                        "struct S{i} {{\n  {}int call() {{ return {i}; }}\n}};",
                        sp.prefix()
                    );
                }
            }
        }
        for (i, f) in self.fns.iter().enumerate() {
            if f.pragma {
                s.push_str(self.pragma_line());
            }
            let cx = if f.constexpr_flag { "constexpr " } else { "" };
            let _ = write!(s, "{}{cx}int f{i}() {{ return {i}", f.space.prefix());
            for c in &f.calls {
                let _ = write!(s, " + f{c}()");
            }
            s.push_str("; }\n");
        }
        if let Some(w) = &self.wrap {
            if w.pragma {
                s.push_str(self.pragma_line());
            }
            s.push_str("template <typename T>\n");
            let _ = writeln!(
                s,
                "{}int wrap() {{ return T{{}}.call(); }}",
                w.space.prefix()
            );
        }
        s.push_str("__device__ void dot() { printf(\".\"); }\n");
        s.push_str(
            "__global__ void kernel(int n) {\n  for (int i = 0; i < n; ++i) {\n    dot();\n  }\n",
        );
        for c in &self.kernel_calls {
            let _ = writeln!(s, "  f{c}();");
        }
        for t in self.wrap.iter().flat_map(|w| &w.from_kernel) {
            let _ = writeln!(s, "  wrap<S{t}>();");
        }
        s.push_str("}\nint main() {\n");
        for c in &self.main_calls {
            let _ = writeln!(s, "  f{c}();");
        }
        for t in self.wrap.iter().flat_map(|w| &w.from_main) {
            let _ = writeln!(s, "  wrap<S{t}>();");
        }
        let _ = writeln!(
            s,
            "  kernel<<<{}, {}>>>({});\n  return cudaDeviceSynchronize();\n}}",
            self.grid, self.block, self.dots
        );
        s
    }

    fn pragma_line(&self) -> &'static str {
        if self.blank_pragmas {
            "\n"
        } else {
            "#pragma hd_warning_disable\n"
        }
    }

    /// The same program with every `#pragma hd_warning_disable` line emptied.
    pub fn without_pragmas(&self) -> GenProgram {
        GenProgram {
            blank_pragmas: true,
            ..self.clone()
        }
    }

    pub fn has_pragma(&self) -> bool {
        self.fns.iter().any(|f| f.pragma) || self.wrap.as_ref().is_some_and(|w| w.pragma)
    }
}

pub fn space() -> impl Strategy<Value = Space> {
    prop_oneof![
        Just(Space::Implicit),
        Just(Space::Host),
        Just(Space::Device),
        Just(Space::HostDevice),
    ]
}

fn indices(n: usize, max: usize) -> BoxedStrategy<Vec<usize>> {
    if n == 0 {
        Just(Vec::new()).boxed()
    } else {
        prop::collection::vec(0..n, 0..=max).boxed()
    }
}

fn picks(from: &[usize]) -> BoxedStrategy<Vec<usize>> {
    if from.is_empty() {
        Just(Vec::new()).boxed()
    } else {
        prop::collection::vec(prop::sample::select(from.to_vec()), 0..=2).boxed()
    }
}

pub fn program() -> impl Strategy<Value = GenProgram> {
    let structs =
        prop::collection::vec(prop::option::weighted(0.8, space()), 1..=3).prop_map(|ms| {
            ms.into_iter()
                .map(|method| GenStruct { method })
                .collect::<Vec<_>>()
        });
    let fns = (1usize..=5).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                (
                    space(),
                    any::<bool>(),
                    prop::bool::weighted(0.3),
                    indices(i, 2),
                )
                    .prop_map(|(space, constexpr_flag, pragma, calls)| GenFn {
                        space,
                        constexpr_flag,
                        pragma,
                        calls,
                    })
            })
            .collect::<Vec<_>>()
    });
    (structs, fns).prop_flat_map(|(structs, fns)| {
        let callable: Vec<usize> = (0..structs.len())
            .filter(|&i| structs[i].method.is_some())
            .collect();
        let nf = fns.len();
        let wrap = prop::option::of(
            (space(), any::<bool>(), picks(&callable), picks(&callable)).prop_map(
                |(space, pragma, from_main, from_kernel)| GenWrap {
                    space,
                    pragma,
                    from_main,
                    from_kernel,
                },
            ),
        );
        (
            Just(structs),
            Just(fns),
            wrap,
            indices(nf, 2),
            indices(nf, 2),
            1u32..=3,
            1u32..=3,
            0u32..=3,
        )
            .prop_map(
                |(structs, fns, wrap, kernel_calls, main_calls, grid, block, dots)| GenProgram {
                    structs,
                    fns,
                    wrap,
                    kernel_calls,
                    main_calls,
                    grid,
                    block,
                    dots,
                    blank_pragmas: false,
                },
            )
    })
}

/// Kernels launched in order; `true` traps, `false` prints one `.`.
pub fn trap_schedule() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(0.3), 1..=8)
}

/// A host program that runs `schedule` and prints the status after every launch.
pub fn render_schedule(schedule: &[bool]) -> String {
    let mut s = String::from(
        "__global__ void bad() { __trap(); }\n__global__ void good() { printf(\".\"); }\nint main() {\n",
    );
    for &t in schedule {
        let _ = writeln!(
            s,
            "  {}<<<1, 2>>>();\n  printf(\"%d;\", cudaDeviceSynchronize());",
            if t { "bad" } else { "good" }
        );
    }
    s.push_str("  return 0;\n}\n");
    s
}
