use nalgebra::DMatrix;
use proptest::prelude::*;

use cct::evolve::{build_prerotation_set, modified_projectors, PrerotationOptions, PulseTemplate, Setting};
use cct::measure::{apply_confusion, ideal_counts, sample_counts, ConfusionMatrix, CountsTensor};
use cct::model::{mhz_to_angular, AxisPair, ShapeKind, SystemSpec};
use cct::qmath::{hermiticity_error, rho_from_params, unitarity_error, CholeskyParams, ComplexMatrix, DensityMatrix};
use cct::tomo::{expectations_from_counts, linear_inversion};

fn density(dim: usize, values: Vec<f64>) -> DensityMatrix {
    rho_from_params(&CholeskyParams::new(dim, values).unwrap()).unwrap()
}

fn projectors(j_mhz: f64, angle: f64) -> cct::evolve::ProjectorSet {
    let system = SystemSpec::two_qubit(mhz_to_angular(j_mhz));
    let template = PulseTemplate::uniform(2, angle, 50e-9, ShapeKind::Rectangular);
    let set = build_prerotation_set(&system, &template, &[AxisPair::standard(); 2], &PrerotationOptions::default()).unwrap();
    modified_projectors(&set)
}

fn stochastic(raw: &[f64]) -> ConfusionMatrix {
    let mut m = DMatrix::from_column_slice(4, 4, raw);
    for k in 0..4 {
        m[(k, k)] += 4.0;
        let s = m.column(k).sum();
        m.column_mut(k).unscale_mut(s);
    }
    ConfusionMatrix::new(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ideal_rows_are_distributions(
        params in prop::collection::vec(-2.0f64..2.0, 16),
        j in -10.0f64..10.0,
        angle in 0.3f64..3.0,
    ) {
        let rho = density(4, params);
        let counts = ideal_counts(&rho, &projectors(j, angle), 5000).unwrap();
        for row in counts.rows() {
            prop_assert!((row.iter().sum::<f64>() - 5000.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn prerotations_are_unitary_and_frames_complete(j in -10.0f64..10.0, angle in 0.3f64..3.0) {
        let system = SystemSpec::two_qubit(mhz_to_angular(j));
        let template = PulseTemplate::uniform(2, angle, 50e-9, ShapeKind::Rectangular);
        let set = build_prerotation_set(&system, &template, &[AxisPair::standard(); 2], &PrerotationOptions::default()).unwrap();
        for u in set.operators() {
            prop_assert!(unitarity_error(u) < 1e-8);
        }
        let p = modified_projectors(&set);
        for s in 0..p.n_settings() {
            let mut sum = ComplexMatrix::zeros(4, 4);
            for k in 0..4 {
                let v = p.ket(s, k);
                sum += &v * v.adjoint();
            }
            prop_assert!((sum - ComplexMatrix::identity(4, 4)).norm() < 1e-9);
        }
    }

    #[test]
    fn confusion_preserves_totals(raw in prop::collection::vec(0.0f64..1.0, 16), seed in any::<u64>()) {
        let m = stochastic(&raw);
        let rho = DensityMatrix::maximally_mixed(4);
        let counts = sample_counts(&ideal_counts(&rho, &projectors(-4.37, std::f64::consts::FRAC_PI_2), 1000).unwrap(), seed).unwrap();
        let out = apply_confusion(&m, &counts).unwrap();
        for (a, b) in counts.rows().iter().zip(out.rows()) {
            prop_assert!((a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs() < 1e-9);
            prop_assert!(b.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn linear_inversion_is_unit_trace_hermitian(params in prop::collection::vec(-2.0f64..2.0, 16), seed in any::<u64>()) {
        let rho = density(4, params);
        let counts = ideal_counts(&rho, &projectors(0.0, std::f64::consts::FRAC_PI_2), 400).unwrap();
        let sampled = sample_counts(&counts, seed).unwrap();
        let m = linear_inversion(&expectations_from_counts(&sampled).unwrap());
        prop_assert!((m.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(m.trace().im.abs() < 1e-10);
        prop_assert!(hermiticity_error(&m) < 1e-10);
    }

    #[test]
    fn uncoupled_standard_frame_recovers_state(params in prop::collection::vec(-2.0f64..2.0, 16)) {
        let rho = density(4, params);
        let counts = ideal_counts(&rho, &projectors(0.0, std::f64::consts::FRAC_PI_2), 5000).unwrap();
        let m = linear_inversion(&expectations_from_counts(&counts).unwrap());
        prop_assert!((m - rho.matrix()).norm() < 1e-8);
    }

    #[test]
    fn setting_names_round_trip(index in 0usize..81) {
        let settings = cct::evolve::enumerate_settings(4);
        let s = &settings[index];
        prop_assert_eq!(&s.to_string().parse::<Setting>().unwrap(), s);
        prop_assert_eq!(s.index(), index);
    }

    #[test]
    fn counts_csv_round_trip(params in prop::collection::vec(-2.0f64..2.0, 16), seed in any::<u64>()) {
        let rho = density(4, params);
        let counts = sample_counts(&ideal_counts(&rho, &projectors(-3.0, 1.2), 250).unwrap(), seed).unwrap();
        let mut buf = Vec::new();
        counts.write_csv(&mut buf).unwrap();
        let back = CountsTensor::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, counts);
    }
}
