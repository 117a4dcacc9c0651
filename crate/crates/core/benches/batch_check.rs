use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exspace_core::{check_batch, CompileProfile, Exec, Mode, SourceUnit};

/// A unit with a chain of templated host device helpers ending in a kernel.
fn unit(i: usize, depth: usize) -> SourceUnit {
    let mut s = String::from("struct H { static int call() { return 3; } };\n");
    s.push_str("template <typename T> __host__ __device__ int f0(T t) { return T::call(); }\n");
    for d in 1..depth {
        s.push_str(&format!(
            "template <typename T> __host__ __device__ int f{d}(T t) {{ return f{}(t) + {d}; }}\n",
            d - 1
        ));
    }
    s.push_str(&format!(
        "__global__ void k() {{ f{}(H{{}}); }}\nint main() {{ k<<<1, 1>>>(); return f{}(H{{}}) - {i}; }}\n",
        depth - 1,
        depth - 1
    ));
    SourceUnit::new(format!("bench{i}.mcu"), s)
}

fn bench(c: &mut Criterion) {
    let profile = CompileProfile::nvcc();
    let mut group = c.benchmark_group("check_batch");
    for n in [8usize, 64] {
        let units: Vec<SourceUnit> = (0..n).map(|i| unit(i, 24)).collect();
        for (name, exec) in [
            ("sequential", Exec::Sequential),
            ("parallel", Exec::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, n), &units, |b, units| {
                b.iter(|| check_batch(units, &profile, Mode::Sound, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
