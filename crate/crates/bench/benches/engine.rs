use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use neurocore::fxp::{self, Fixed};
use neurocore::network::Backend;
use neurocore::neuron::schedule::BlockSchedule;
use neurocore::neuron::{step_fixed, step_float, NeuronState, DT_MS};
use neurocore_bench::{bg_network, rs_neuron};

fn fxp_ops(c: &mut Criterion) {
    let a = Fixed::encode(-63.25, fxp::REG_FMT).unwrap();
    let b = Fixed::encode(0.2, fxp::REG_FMT).unwrap();
    let mut g = c.benchmark_group("fxp");
    g.bench_function("mul_rescale", |bch| {
        bch.iter(|| black_box(a).mul_rescale(black_box(b)))
    });
    g.bench_function("sat_add", |bch| {
        bch.iter(|| black_box(a).sat_add(black_box(b)))
    });
    g.bench_function("shr_round", |bch| bch.iter(|| black_box(a).shr_round(3)));
    g.finish();
}

fn neuron_step(c: &mut Criterion) {
    let (p, words, k) = rs_neuron();
    let da = Fixed::from_raw(40, fxp::DA_FMT);
    let state = NeuronState::reset(&p);
    let schedule = BlockSchedule::izhikevich();
    let mut g = c.benchmark_group("neuron_step");
    g.bench_function("fixed", |bch| {
        bch.iter(|| step_fixed(black_box(words), black_box(da), &k))
    });
    g.bench_function("float", |bch| {
        bch.iter(|| step_float(&p, black_box(&state), black_box(5.0), DT_MS).unwrap())
    });
    g.bench_function("schedule_interpreter", |bch| {
        bch.iter(|| {
            schedule
                .execute(black_box(words), black_box(da), &k)
                .unwrap()
        })
    });
    g.finish();
}

fn bg_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("bg_network");
    g.throughput(Throughput::Elements(1));
    g.sample_size(20);
    for (name, backend, threads) in [
        ("fixed_1t", Backend::Fixed, 1),
        ("float_1t", Backend::Float, 1),
        ("fixed_4t", Backend::Fixed, 4),
    ] {
        let mut net = bg_network(backend, threads);
        // settle past the initial transient
        for _ in 0..800 {
            net.step().unwrap();
        }
        g.bench_function(name, |bch| bch.iter(|| net.step().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, fxp_ops, neuron_step, bg_step);
criterion_main!(benches);
