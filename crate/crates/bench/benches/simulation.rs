use std::hint::black_box;

use afc_core::analysis::{heralded_fidelity, BellSign};
use afc_core::fock::{
    apply_channel, beamsplitter_isometry, gad_channel, measure_and_discard, tensor, tmsv_ket, DensityMatrix, FockSpace,
};
use afc_core::hardware::{BsmStation, Spd};
use afc_core::protocol::{run_cycle, Topology};
use criterion::{criterion_group, criterion_main, Criterion};

fn space() -> FockSpace {
    FockSpace::new(2).unwrap()
}

fn pair_state() -> DensityMatrix {
    DensityMatrix::from_ket(&tmsv_ket(0.1, space()).unwrap())
}

fn fock_kernels(c: &mut Criterion) {
    let pair = pair_state();
    let four = tensor(&pair, &pair).unwrap();
    let loss = gad_channel(0.65, space()).unwrap();
    let spd = Spd::new(0.6, 150.0, 20_000).unwrap();
    let station = BsmStation::new([spd, spd], 0.0, space()).unwrap();

    c.bench_function("gad_on_pair", |b| b.iter(|| apply_channel(black_box(&pair), &loss, 1).unwrap()));
    c.bench_function("bsm_measure_and_discard", |b| {
        b.iter(|| measure_and_discard(black_box(&four), station.povm(), &[1, 3], 0.37).unwrap())
    });
    c.bench_function("beamsplitter_isometry", |b| {
        b.iter(|| beamsplitter_isometry(std::f64::consts::FRAC_PI_4, std::f64::consts::PI, black_box(space())))
    });
    c.bench_function("bsm_station_build", |b| {
        b.iter(|| BsmStation::new([spd, spd], black_box(0.0), space()).unwrap())
    });
    c.bench_function("heralded_fidelity", |b| {
        b.iter(|| heralded_fidelity(black_box(&pair), BellSign::Plus).unwrap())
    });
}

fn protocol_cycle(c: &mut Criterion) {
    let topology = Topology {
        mode_number: 10,
        ..Topology::default()
    };
    let mut trial = 0;
    c.bench_function("cycle_m10", |b| {
        b.iter(|| {
            trial += 1;
            run_cycle(black_box(&topology), 7, trial).unwrap()
        })
    });
}

criterion_group!(benches, fock_kernels, protocol_cycle);
criterion_main!(benches);
