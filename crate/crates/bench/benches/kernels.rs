use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qwk_bench::qwk_core::capacity::{classical_csi_capacity, cq_csi_capacity, SolverConfig};
use qwk_bench::qwk_core::channels::{build_tau_net, ClassicalChannel, Channel, CompoundWiretapSpec, Variant, WiretapPair};
use qwk_bench::qwk_core::infotheory::von_neumann_entropy_matrix;
use qwk_bench::qwk_core::qcore::{kron, random};
use qwk_bench::qwk_core::rng::stream;
use qwk_bench::qwk_core::schema::parse_spec;
use qwk_bench::qwk_core::typicality::{typical_projector, TypicalParams};
use qwk_bench::qwk_core::wiretapsim::{build_decoder, eval_error_exact, sample_codebook, DecoderOptions};

fn bsc(p: f64) -> Channel {
    Channel::Classical(ClassicalChannel::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap())
}

fn bsc_pairs(variant: Variant) -> CompoundWiretapSpec {
    let pairs = [(0.05, 0.3), (0.1, 0.25)]
        .iter()
        .enumerate()
        .map(|(i, &(w, v))| WiretapPair { name: format!("t{i}"), legit: bsc(w), wiretap: bsc(v) })
        .collect();
    CompoundWiretapSpec::new(variant, pairs).unwrap()
}

fn entropy(c: &mut Criterion) {
    let mut g = c.benchmark_group("von_neumann_entropy");
    for d in [2usize, 8, 32] {
        let rho = random::density_matrix(d, d, &mut stream(1, 0, &[d as u64]));
        g.bench_with_input(BenchmarkId::from_parameter(d), &rho, |b, r| b.iter(|| von_neumann_entropy_matrix(black_box(r))));
    }
    g.finish();
}

fn projector(c: &mut Criterion) {
    let rho = random::density_matrix(2, 2, &mut stream(2, 0, &[]));
    let mut g = c.benchmark_group("typical_projector");
    for n in [4usize, 8, 10] {
        let params = TypicalParams::new(n, 0.1, 1.0, 2.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &params, |b, &p| b.iter(|| typical_projector(black_box(&rho), p).unwrap()));
    }
    g.finish();
}

fn kron_product(c: &mut Criterion) {
    let a = random::density_matrix(8, 8, &mut stream(3, 0, &[0]));
    let b2 = random::density_matrix(8, 8, &mut stream(3, 0, &[1]));
    c.bench_function("kron_8x8", |b| b.iter(|| kron(black_box(&a), black_box(&b2))));
}

fn capacities(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let classical = bsc_pairs(Variant::Classical);
    c.bench_function("classical_csi_two_pairs", |b| b.iter(|| classical_csi_capacity(black_box(&classical), &cfg).unwrap()));
    let small = SolverConfig { restarts: 2, refine_iters: 50, ..cfg.clone() };
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../specs/cq_pair.json");
    let cq = parse_spec(&std::fs::read_to_string(path).unwrap()).unwrap();
    c.bench_function("cq_csi_pair", |b| b.iter(|| cq_csi_capacity(black_box(&cq), &small).unwrap()));
}

fn decoding(c: &mut Criterion) {
    let spec = bsc_pairs(Variant::Classical);
    let code = sample_codebook(&[0.5, 0.5], 10, 4, &[2], 0.25, 5).unwrap();
    let dec = build_decoder(&spec, &code, &DecoderOptions::default()).unwrap();
    c.bench_function("eval_error_exact_n10", |b| b.iter(|| eval_error_exact(black_box(&spec), &code, &dec).unwrap()));
}

fn net(c: &mut Criterion) {
    c.bench_function("tau_net_qubit_budget64", |b| b.iter(|| build_tau_net(2, 2, black_box(1.0), 64).unwrap()));
}

criterion_group!(benches, entropy, projector, kron_product, capacities, decoding, net);
criterion_main!(benches);
