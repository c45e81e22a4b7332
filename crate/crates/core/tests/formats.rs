use nalgebra::DMatrix;
use proptest::prelude::*;
use sadl::data::{load_dataset, save_dataset, save_dataset_binary};
use sadl::{Dataset, Model, StepRule, TrainConfig};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 8.0),
        Just(f64::MAX),
        Just(-f64::MIN_POSITIVE),
    ]
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 1usize..12, 1usize..5).prop_flat_map(|(m, n, c)| {
        (
            proptest::collection::vec(finite(), m * n),
            proptest::collection::vec(0..c, n),
        )
            .prop_map(move |(vals, labels)| Dataset::new(DMatrix::from_vec(m, n, vals), labels, c).unwrap())
    })
}

fn unit_rows(raw: Vec<f64>, r: usize, m: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::from_vec(r, m, raw);
    for mut row in omega.row_iter_mut() {
        if row.norm() < 1e-3 {
            row.fill(0.0);
            row[0] = 1.0;
        }
        let n = row.norm();
        row /= n;
    }
    omega
}

fn model() -> impl Strategy<Value = Model> {
    (1usize..6, 1usize..6, 1usize..6, 1usize..4, any::<u64>(), any::<bool>()).prop_flat_map(|(r, m, s, c, seed, fixed)| {
        (
            proptest::collection::vec(-1.0f64..1.0, r * m),
            proptest::collection::vec(finite(), s * r),
            proptest::collection::vec(finite(), c * s),
        )
            .prop_filter_map("row norms", move |(o, q, w)| {
                let cfg = TrainConfig {
                    seed,
                    step_rule: if fixed {
                        StepRule::Fixed {
                            eta_q: 0.1,
                            eta_wq: 1.0 / 3.0,
                            eta_wu: 2.5,
                            eta_qu: 1e-7,
                        }
                    } else {
                        StepRule::Spectral
                    },
                    ..TrainConfig::default()
                };
                Model::new(unit_rows(o, r, m), DMatrix::from_vec(s, r, q), DMatrix::from_vec(c, s, w), cfg).ok()
            })
    })
}

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dataset_text_round_trip_is_bitwise(d in dataset()) {
        let back = Dataset::from_text(&d.to_text()).unwrap();
        prop_assert_eq!(bits(back.x()), bits(d.x()));
        prop_assert_eq!(back.labels(), d.labels());
        prop_assert_eq!(back.classes(), d.classes());
    }

    #[test]
    fn dataset_binary_round_trip_is_bitwise(d in dataset()) {
        let bytes = d.to_binary();
        let back = Dataset::from_binary(&bytes).unwrap();
        prop_assert_eq!(bits(back.x()), bits(d.x()));
        prop_assert_eq!(back.labels(), d.labels());
        prop_assert_eq!(back.to_binary(), bytes);
    }

    #[test]
    fn model_round_trip_is_bitwise(m in model()) {
        let bytes = m.to_bytes();
        let back = Model::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(bits(back.omega()), bits(m.omega()));
        prop_assert_eq!(bits(back.q()), bits(m.q()));
        prop_assert_eq!(bits(back.w()), bits(m.w()));
        prop_assert_eq!(back.config(), m.config());
    }
}

#[test]
fn files_round_trip_in_both_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let x = DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-300, 3.0, 1.0 / 3.0, 0.0, -7.25]);
    let d = Dataset::new(x, vec![1, 0, 1], 2).unwrap();
    let text = dir.path().join("d.txt");
    let bin = dir.path().join("d.bin");
    save_dataset(&d, &text).unwrap();
    save_dataset_binary(&d, &bin).unwrap();
    assert_eq!(load_dataset(&text).unwrap(), d);
    assert_eq!(load_dataset(&bin).unwrap(), d);

    let omega = DMatrix::from_row_slice(1, 2, &[0.6, 0.8]);
    let m = Model::new(omega, DMatrix::from_element(2, 1, 0.5), DMatrix::from_element(2, 2, -1.0), TrainConfig::default()).unwrap();
    let path = dir.path().join("m.sadl");
    m.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), m.to_bytes());
    assert_eq!(Model::load(&path).unwrap(), m);
}

#[test]
fn corrupt_inputs_are_rejected() {
    assert!(Dataset::from_text("SADL-DS 2 1 2\n0\n1.0\n").is_err());
    assert!(Dataset::from_text("SADL-DS 1 1 2\n5\n1.0\n").is_err());
    assert!(Dataset::from_text("SADL-DS 1 1 2\n0\nnan\n").is_err());
    assert!(Dataset::from_binary(b"SADS").is_err());
    assert!(Model::from_bytes(b"").is_err());
}
