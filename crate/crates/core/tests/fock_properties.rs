use afc_core::fock::{
    apply_channel, beamsplitter_isometry, detector_povm, gad_channel, measure, outcome_probabilities,
    transform_povm_through_bs, with_dark_counts, Complex64, DensityMatrix, FockSpace, Matrix,
};
use proptest::prelude::*;

fn random_state(space: FockSpace, n_modes: usize) -> impl Strategy<Value = DensityMatrix> {
    let dim = space.dim_modes(n_modes);
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |entries| {
        let a = Matrix::from_fn(dim, dim, |r, c| {
            let (re, im) = entries[r * dim + c];
            Complex64::new(re, im)
        });
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        DensityMatrix::new(space, n_modes, rho).unwrap()
    })
}

fn space() -> FockSpace {
    FockSpace::new(2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn channel_preserves_trace_and_hermiticity(rho in random_state(space(), 2), gamma in 0.0f64..=1.0, mode in 0usize..2) {
        let out = apply_channel(&rho, &gad_channel(gamma, space()).unwrap(), mode).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        prop_assert!(out.hermiticity_error() < 1e-10);
        prop_assert!(out.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn measurement_preserves_trace_and_hermiticity(
        rho in random_state(space(), 2),
        eta in 0.0f64..=1.0,
        p_dark in 0.0f64..0.1,
        draw in 0.0f64..1.0,
    ) {
        let povm = with_dark_counts(&detector_povm(eta, space()).unwrap(), p_dark).unwrap();
        let probs = outcome_probabilities(&rho, &povm, &[1]).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let m = measure(&rho, &povm, &[1], draw).unwrap();
        prop_assert!((m.state.trace() - 1.0).abs() < 1e-10);
        prop_assert!(m.state.hermiticity_error() < 1e-10);
        let again = measure(&rho, &povm, &[1], draw).unwrap();
        prop_assert_eq!(m.outcome, again.outcome);
        prop_assert_eq!(m.state.data(), again.state.data());
    }

    #[test]
    fn povm_pullback_matches_state_evolution(
        rho in random_state(space(), 2),
        eta in 0.0f64..=1.0,
        theta in 0.0f64..std::f64::consts::PI,
        phi in -3.2f64..3.2,
    ) {
        let d = detector_povm(eta, space().doubled()).unwrap();
        let out = d.product(&d).unwrap();
        let pulled = transform_povm_through_bs(&out, theta, phi, space()).unwrap();
        prop_assert!(pulled.completeness_error() < 1e-12);
        let v = beamsplitter_isometry(theta, phi, space());
        let evolved = &v * rho.data() * v.adjoint();
        for (a, b) in pulled.elements().iter().zip(out.elements()) {
            let lhs = (a * rho.data()).trace();
            let rhs = (b * &evolved).trace();
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
