use proptest::prelude::*;

use super::transforms::{yeo_johnson, yeo_johnson_grid, yeo_johnson_log_likelihood};
use super::*;
use crate::data::{Column, ColumnData, ColumnKind};

fn op(id: i64) -> OperatorId {
    OperatorId::new(id).unwrap()
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| (i % 2).to_string()).collect()
}

fn numeric(d: &Dataset, name: &str) -> Vec<Option<f64>> {
    d.column(name).unwrap().as_numeric().unwrap().to_vec()
}

fn one_col(cells: Vec<Option<f64>>) -> Dataset {
    let n = cells.len();
    Dataset::new(vec![Column::numeric("a", cells)], "y", labels(n)).unwrap()
}

#[test]
fn min_max_scaler_example() {
    let d = one_col(vec![Some(0.0), Some(5.0), Some(10.0)]);
    let out = apply_operator(op(6), &d, 0).unwrap();
    assert_eq!(numeric(&out, "a"), vec![Some(0.0), Some(0.5), Some(1.0)]);
}

#[test]
fn imputer_mean_example() {
    let d = one_col(vec![Some(1.0), None, Some(3.0)]);
    let out = apply_operator(op(1), &d, 0).unwrap();
    assert_eq!(numeric(&out, "a"), vec![Some(1.0), Some(2.0), Some(3.0)]);
}

#[test]
fn imputer_median_and_mode() {
    let d = one_col(vec![Some(1.0), Some(1.0), Some(10.0), None]);
    assert_eq!(
        numeric(&apply_operator(op(2), &d, 0).unwrap(), "a")[3],
        Some(1.0)
    );
    assert_eq!(
        numeric(&apply_operator(op(3), &d, 0).unwrap(), "a")[3],
        Some(1.0)
    );
    // all-missing column imputes to 0
    let d = one_col(vec![None, None]);
    assert_eq!(
        numeric(&apply_operator(op(1), &d, 0).unwrap(), "a"),
        vec![Some(0.0); 2]
    );
}

#[test]
fn blank_is_bit_identical() {
    let d = one_col(vec![Some(-0.0), None, Some(3.5)]);
    let out = apply_operator(OperatorId::BLANK, &d, 0).unwrap();
    assert!(out.bit_identical(&d));
}

#[test]
fn variance_threshold_example() {
    let d = Dataset::new(
        vec![
            Column::dense("a", &[1.0, 1.0, 1.0]),
            Column::dense("b", &[1.0, 2.0, 3.0]),
        ],
        "y",
        labels(3),
    )
    .unwrap();
    let out = apply_operator(op(24), &d, 0).unwrap();
    assert_eq!(out.n_cols(), 1);
    assert_eq!(out.columns()[0].name, "b");
    let all_const = Dataset::new(vec![Column::dense("a", &[1.0, 1.0])], "y", labels(2)).unwrap();
    assert!(matches!(
        apply_operator(op(24), &all_const, 0),
        Err(OperatorError::DegenerateOutput { .. })
    ));
}

#[test]
fn pca_on_correlated_pair_yields_one_column() {
    let d = Dataset::new(
        vec![
            Column::dense("a", &[1.0, 2.0, 3.0]),
            Column::dense("b", &[2.0, 4.0, 6.0]),
        ],
        "y",
        labels(3),
    )
    .unwrap();
    for id in 17..=20 {
        let out = apply_operator(op(id), &d, 0).unwrap();
        assert_eq!(out.n_cols(), 1, "operator {id}");
        // scores are the signed distances along (1,2)/sqrt(5) from the mean
        let s = 5f64.sqrt();
        let z = numeric(&out, "pca0");
        for (zi, expected) in z.iter().zip([-s, 0.0, s]) {
            assert!((zi.unwrap() - expected).abs() < 1e-12);
        }
    }
}

fn mixed() -> Dataset {
    Dataset::new(
        vec![
            Column::numeric("a", vec![Some(1.0), None, Some(3.0), Some(4.0)]),
            Column::categorical(
                "c",
                vec![
                    Some("red".into()),
                    Some("blue".into()),
                    None,
                    Some("red".into()),
                ],
            ),
        ],
        "y",
        labels(4),
    )
    .unwrap()
}

#[test]
fn matrix_operators_reject_missing_or_categorical() {
    let d = mixed();
    for id in [13, 15, 16, 17, 18, 19, 20, 21, 22, 23] {
        let err = apply_operator(op(id), &d, 0).unwrap_err();
        assert!(err.is_inapplicable(), "operator {id}: {err}");
    }
}

#[test]
fn scalers_need_numeric_columns() {
    let d = Dataset::new(
        vec![Column::categorical(
            "c",
            vec![Some("x".into()), Some("y".into())],
        )],
        "y",
        labels(2),
    )
    .unwrap();
    for id in [6, 7, 8, 9, 10, 11, 12, 14] {
        assert!(apply_operator(op(id), &d, 0).unwrap_err().is_inapplicable());
    }
}

#[test]
fn label_encoder_uses_lexicographic_codes() {
    let out = apply_operator(op(4), &mixed(), 0).unwrap();
    assert_eq!(
        numeric(&out, "c"),
        vec![Some(1.0), Some(0.0), None, Some(1.0)]
    );
}

#[test]
fn one_hot_expands_categories_in_place() {
    let out = apply_operator(op(5), &mixed(), 0).unwrap();
    let names: Vec<&str> = out.columns().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["a", "c=blue", "c=red"]);
    assert!(!out.has_categorical());
    assert_eq!(
        numeric(&out, "c=red"),
        vec![Some(1.0), Some(0.0), Some(0.0), Some(1.0)]
    );
}

#[test]
fn categorical_imputer_fills_with_mode() {
    let out = apply_operator(op(0), &mixed(), 0).unwrap();
    let c = out.column("c").unwrap().as_categorical().unwrap();
    assert_eq!(c[2].as_deref(), Some("red"));
    // numeric missing untouched
    assert_eq!(numeric(&out, "a")[1], None);
}

#[test]
fn scalers_keep_missing_cells() {
    let d = one_col(vec![Some(1.0), None, Some(3.0), Some(5.0)]);
    for id in [6, 7, 8, 9, 10, 11, 12, 14] {
        let out = apply_operator(op(id), &d, 0).unwrap();
        assert_eq!(numeric(&out, "a")[1], None, "operator {id}");
    }
}

#[test]
fn standard_and_robust_scalers() {
    let d = one_col(vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
    let s = numeric(&apply_operator(op(9), &d, 0).unwrap(), "a");
    let sd = 1.25f64.sqrt();
    assert!((s[0].unwrap() + 1.5 / sd).abs() < 1e-12);
    let r = numeric(&apply_operator(op(8), &d, 0).unwrap(), "a");
    // median 2.5, IQR 3.25 - 1.75 = 1.5
    assert!((r[3].unwrap() - 1.5 / 1.5).abs() < 1e-12);
}

#[test]
fn quantile_transformer_uses_midranks() {
    let d = one_col(vec![
        Some(10.0),
        Some(1.0),
        Some(1.0),
        Some(100.0),
        Some(5.0),
    ]);
    let q = numeric(&apply_operator(op(10), &d, 0).unwrap(), "a");
    // sorted [1,1,5,10,100]: 1 -> rank 0.5, 5 -> 2, 10 -> 3, 100 -> 4, over 4
    assert_eq!(
        q,
        vec![Some(0.75), Some(0.125), Some(0.125), Some(1.0), Some(0.5)]
    );
}

#[test]
fn log_transformer_shifts_negative_columns() {
    let d = one_col(vec![Some(-1.0), Some(0.0), Some(1.0)]);
    let l = numeric(&apply_operator(op(11), &d, 0).unwrap(), "a");
    assert_eq!(l[0], Some(0.0));
    assert!((l[2].unwrap() - 2f64.ln_1p()).abs() < 1e-15);
}

#[test]
fn kbins_produces_five_ordinal_bins() {
    let values: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
    let b = numeric(&apply_operator(op(14), &one_col(values), 0).unwrap(), "a");
    let codes: Vec<f64> = b.into_iter().map(Option::unwrap).collect();
    assert_eq!(
        codes,
        vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]
    );
}

#[test]
fn yeo_johnson_picks_grid_maximiser() {
    let values = [0.1, 0.2, 0.5, 1.0, 3.0, 9.0, 30.0];
    let d = one_col(values.iter().map(|&v| Some(v)).collect());
    let out = numeric(&apply_operator(op(12), &d, 0).unwrap(), "a");
    // Oracle: exhaustive scan of the 41-point grid.
    let (best, _) = yeo_johnson_grid()
        .map(|l| (l, yeo_johnson_log_likelihood(&values, l)))
        .fold((1.0, f64::NEG_INFINITY), |acc, (l, ll)| {
            if ll > acc.1 {
                (l, ll)
            } else {
                acc
            }
        });
    for (o, v) in out.iter().zip(values) {
        assert!((o.unwrap() - yeo_johnson(v, best)).abs() < 1e-12);
    }
    assert!(best < 1.0, "right-skewed data should compress, got {best}");
    assert_eq!(yeo_johnson(3.0, 1.0), 3.0);
    assert_eq!(yeo_johnson(-3.0, 1.0), -3.0);
}

#[test]
fn polynomial_and_interaction_widths() {
    let d = Dataset::new(
        vec![
            Column::dense("a", &[1.0, 2.0]),
            Column::dense("b", &[3.0, 4.0]),
        ],
        "y",
        labels(2),
    )
    .unwrap();
    let p = apply_operator(op(15), &d, 0).unwrap();
    let names: Vec<&str> = p.columns().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["a", "b", "a^2", "a*b", "b^2"]);
    assert_eq!(numeric(&p, "a*b"), vec![Some(3.0), Some(8.0)]);
    let i = apply_operator(op(16), &d, 0).unwrap();
    assert_eq!(i.n_cols(), 3);
}

#[test]
fn wide_expansion_is_inapplicable() {
    let cols = (0..20)
        .map(|c| Column::dense(format!("f{c}"), &[c as f64, 1.0]))
        .collect();
    let d = Dataset::new(cols, "y", labels(2)).unwrap();
    assert!(apply_operator(op(15), &d, 0).unwrap_err().is_inapplicable());
}

#[test]
fn truncated_svd_on_single_column_is_degenerate() {
    let d = one_col(vec![Some(1.0), Some(2.0)]);
    assert!(matches!(
        apply_operator(op(22), &d, 0),
        Err(OperatorError::DegenerateOutput { .. })
    ));
}

#[test]
fn random_trees_embedding_is_one_hot_per_tree() {
    let cols = vec![
        Column::dense("a", &(0..30).map(|i| i as f64).collect::<Vec<_>>()),
        Column::dense(
            "b",
            &(0..30).map(|i| ((i * 7) % 13) as f64).collect::<Vec<_>>(),
        ),
    ];
    let d = Dataset::new(cols, "y", labels(30)).unwrap();
    let out = apply_operator(op(23), &d, 5).unwrap();
    for tree in 0..trees::N_TREES {
        let prefix = format!("rte{tree}_");
        for r in 0..30 {
            let hot: f64 = out
                .columns()
                .iter()
                .filter(|c| c.name.starts_with(&prefix))
                .map(|c| c.as_numeric().unwrap()[r].unwrap())
                .sum();
            assert_eq!(hot, 1.0);
        }
    }
    let again = apply_operator(op(23), &d, 5).unwrap();
    assert!(out.bit_identical(&again));
    let other = apply_operator(op(23), &d, 6).unwrap();
    assert!(!out.bit_identical(&other));
}

#[test]
fn reference_pipeline_applies_in_order() {
    let cols = vec![
        Column::dense(
            "a",
            &(0..40).map(|i| (i as f64).exp2().ln()).collect::<Vec<_>>(),
        ),
        Column::dense(
            "b",
            &(0..40).map(|i| ((i * 11) % 17) as f64).collect::<Vec<_>>(),
        ),
    ];
    let d = Dataset::new(cols, "y", labels(40)).unwrap();
    let p = Pipeline::from_ids(&[10, 23, 18]).unwrap();
    let folded = {
        let a = apply_operator(op(10), &d, 3).unwrap();
        let b = apply_operator(op(23), &a, 4).unwrap();
        apply_operator(op(18), &b, 5).unwrap()
    };
    assert!(apply_pipeline(&p, &d, 3).unwrap().bit_identical(&folded));
    assert!(folded.columns()[0].name.starts_with("pca"));
}

#[test]
fn pipeline_examples() {
    let d = one_col(vec![Some(1.0), None, Some(3.0)]);
    assert!(apply_pipeline(&Pipeline::default(), &d, 0)
        .unwrap()
        .bit_identical(&d));
    let out = apply_pipeline(&Pipeline::from_ids(&[1, 6]).unwrap(), &d, 0).unwrap();
    assert_eq!(numeric(&out, "a"), vec![Some(0.0), Some(0.5), Some(1.0)]);
    // PCA on missing data is skipped, imputer still applies
    let out = apply_pipeline(&Pipeline::from_ids(&[17, 1]).unwrap(), &d, 0).unwrap();
    assert_eq!(numeric(&out, "a"), vec![Some(1.0), Some(2.0), Some(3.0)]);
}

#[test]
fn pair_application_skips_on_either_side() {
    let train = one_col(vec![Some(1.0), None, Some(3.0)]);
    let val = one_col(vec![Some(1.0), Some(2.0), Some(3.0)]);
    let (t, v, status) = apply_operator_pair(op(17), &train, &val, 0).unwrap();
    assert_eq!(status, StepStatus::Skipped);
    assert!(t.bit_identical(&train) && v.bit_identical(&val));
}

// ---- property tests -------------------------------------------------------

prop_compose! {
    fn arb_dataset()(
        n_rows in 3usize..12,
        n_num in 0usize..4,
        with_cat in any::<bool>(),
        seed in any::<u64>(),
        missing_rate in prop_oneof![Just(0.0), Just(0.2)],
    ) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cols = Vec::new();
        for c in 0..n_num.max(usize::from(!with_cat)) {
            let cells = (0..n_rows)
                .map(|_| {
                    if rng.random::<f64>() < missing_rate {
                        None
                    } else {
                        Some((rng.random::<f64>() * 20.0 - 5.0).powi(if c == 0 { 3 } else { 1 }))
                    }
                })
                .collect();
            cols.push(Column::numeric(format!("n{c}"), cells));
        }
        if with_cat {
            let cells = (0..n_rows)
                .map(|_| {
                    if rng.random::<f64>() < missing_rate {
                        None
                    } else {
                        Some(["p", "q", "r"][rng.random_range(0..3)].to_string())
                    }
                })
                .collect();
            cols.push(Column::categorical("cat", cells));
        }
        Dataset::new(cols, "y", labels(n_rows)).unwrap()
    }
}

fn arb_op() -> impl Strategy<Value = OperatorId> {
    (0usize..OperatorId::COUNT).prop_map(|i| OperatorId::from_canonical_index(i).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pipeline_equals_sequential_fold(
        d in arb_dataset(),
        ops in proptest::collection::vec(arb_op(), 0..5),
        seed in 0u64..1000,
    ) {
        let p = Pipeline::new(ops.clone());
        let via_pipeline = apply_pipeline(&p, &d, seed);
        let mut folded = Ok(d.clone());
        let mut applied = 0u64;
        for &o in &ops {
            folded = folded.and_then(|cur| match apply_operator(o, &cur, seed + applied) {
                Err(e) if e.is_inapplicable() => Ok(cur),
                Ok(next) => {
                    applied += 1;
                    Ok(next)
                }
                Err(e) => Err(e),
            });
        }
        match (via_pipeline, folded) {
            (Ok(a), Ok(b)) => prop_assert!(a.bit_identical(&b)),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "mismatch: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn operators_are_deterministic_and_keep_rows(d in arb_dataset(), o in arb_op(), seed in 0u64..50) {
        let a = apply_operator(o, &d, seed);
        let b = apply_operator(o, &d, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a.bit_identical(&b));
                prop_assert_eq!(a.n_rows(), d.n_rows());
                prop_assert_eq!(a.target(), d.target());
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "nondeterministic outcome"),
        }
    }

    #[test]
    fn imputers_clear_their_domain(d in arb_dataset()) {
        for id in [1, 2, 3] {
            let out = apply_operator(op(id), &d, 0).unwrap();
            for c in out.columns() {
                if c.kind() == ColumnKind::Numeric {
                    prop_assert_eq!(c.data.missing_count(), 0);
                }
            }
        }
        let out = apply_operator(op(0), &d, 0).unwrap();
        for c in out.columns() {
            if let ColumnData::Categorical(cells) = &c.data {
                prop_assert!(cells.iter().all(Option::is_some));
            }
        }
    }

    #[test]
    fn one_hot_leaves_no_categorical(d in arb_dataset()) {
        let out = apply_operator(op(5), &d, 0).unwrap();
        prop_assert!(!out.has_categorical());
    }

    #[test]
    fn min_max_stays_in_unit_interval(d in arb_dataset()) {
        if let Ok(out) = apply_operator(op(6), &d, 0) {
            for c in out.columns() {
                if let Some(cells) = c.as_numeric() {
                    prop_assert!(cells.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
                }
            }
        }
    }

    #[test]
    fn normalizer_rows_have_unit_norm(d in arb_dataset()) {
        let d = apply_pipeline(&Pipeline::from_ids(&[1, 5]).unwrap(), &d, 0).unwrap();
        let out = apply_operator(op(13), &d, 0).unwrap();
        for r in 0..out.n_rows() {
            let before: f64 = d.columns().iter().map(|c| c.as_numeric().unwrap()[r].unwrap().powi(2)).sum();
            let norm: f64 = out.columns().iter().map(|c| c.as_numeric().unwrap()[r].unwrap().powi(2)).sum::<f64>().sqrt();
            if before == 0.0 {
                prop_assert_eq!(norm, 0.0);
            } else {
                prop_assert!((norm - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pca_components_are_orthonormal(d in arb_dataset()) {
        let d = apply_pipeline(&Pipeline::from_ids(&[1, 5]).unwrap(), &d, 0).unwrap();
        let (_, m) = super::transforms::dense_matrix(&d, op(17)).unwrap();
        let model = fit_pca(&m, 0.95);
        let g = &model.components * model.components.transpose();
        let eye = nalgebra::DMatrix::<f64>::identity(g.nrows(), g.ncols());
        prop_assert!((g - eye).abs().max() < 1e-8);
    }
}
