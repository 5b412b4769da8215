use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use flatlab_core::dynamics::{FinderOptions, OrbitPolyline};
use flatlab_core::field::ScalarField;
use flatlab_core::flat_trace::{perturbed_measure, TrackedClass};
use flatlab_core::fuchsian::{bolza_generators, enumerate_classes, EnumOptions};
use flatlab_core::metric::{ConformalChart, Law, MetricFamily};
use flatlab_core::par::ExecPolicy;

const POLICIES: [(&str, ExecPolicy); 2] = [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)];

fn enumeration(c: &mut Criterion) {
    let g = bolza_generators();
    let mut group = c.benchmark_group("enumerate_L4.5");
    group.sample_size(10);
    for (name, policy) in POLICIES {
        let opts = EnumOptions { policy, ..Default::default() };
        group.bench_function(name, |b| b.iter(|| enumerate_classes(&g, black_box(4.5), &opts).unwrap()));
    }
    group.finish();
}

fn perturbed_trace(c: &mut Criterion) {
    let g = bolza_generators();
    let recs = enumerate_classes(&g, 3.1, &EnumOptions { unoriented: true, ..Default::default() }).unwrap();
    let classes: Vec<TrackedClass> = recs
        .iter()
        .map(|r| TrackedClass {
            class: r.cls.word.to_string(),
            m: 1,
            primitive: OrbitPolyline::from_axis(&r.matrix, 256, None).unwrap(),
        })
        .collect();
    let fam = MetricFamily::new(ConformalChart::half_plane(), Law::ConformalExp(ScalarField::constant(1.0)));
    let opts = FinderOptions::default();
    let mut group = c.benchmark_group("perturbed_measure_12_orbits");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, policy) in POLICIES {
        group.bench_function(name, |b| b.iter(|| perturbed_measure(&fam, black_box(0.01), &classes, &opts, policy).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, enumeration, perturbed_trace);
criterion_main!(benches);
