use std::collections::BTreeMap;

use proptest::prelude::*;

use locper_core::cell::{build_cell_table, read_cell_table, write_cell_table};
use locper_core::coeff::{builtin_family, CellScheme};
use locper_core::fine::{assemble_fine, Resolvent};
use locper_core::grid::{GridFunction, TorusGrid};
use locper_core::homogenize::effective_matrix;
use locper_core::krylov::SolverOptions;
use locper_core::norm::{operator_norm, PowerOptions};
use locper_core::smoothing::{steklov, SmoothingSpec};

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn cell_table_survives_binary_round_trip() {
    for (id, scheme) in [
        ("smooth_2d_nonsymmetric", CellScheme::Spectral),
        ("laminate_2d", CellScheme::FiniteVolume),
        ("separable_1d", CellScheme::Spectral),
    ] {
        let field = builtin_family(id, &BTreeMap::new()).unwrap();
        let d = field.dim();
        let t = build_cell_table(
            &field,
            TorusGrid::new(d, 4).unwrap(),
            TorusGrid::new(d, 16).unwrap(),
            scheme,
            SolverOptions::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_cell_table(&t, &path).unwrap();
        assert_eq!(read_cell_table(&path).unwrap(), t, "{id}");
    }
}

#[test]
fn truncated_table_is_rejected() {
    let field = builtin_family("separable_1d", &BTreeMap::new()).unwrap();
    let t = build_cell_table(
        &field,
        TorusGrid::new(1, 4).unwrap(),
        TorusGrid::new(1, 16).unwrap(),
        CellScheme::Spectral,
        SolverOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    write_cell_table(&t, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(read_cell_table(&path).is_err());
    std::fs::write(&path, b"nope").unwrap();
    assert!(read_cell_table(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_dimensional_effective_coefficient_is_harmonic_mean(c0 in 1.2f64..4.0, r in -0.9f64..0.9) {
        let c1 = r * c0;
        let field = builtin_family("periodic_only", &params(&[("c0", c0), ("c1", c1)])).unwrap();
        let t = build_cell_table(
            &field,
            TorusGrid::new(1, 4).unwrap(),
            TorusGrid::new(1, 256).unwrap(),
            CellScheme::Spectral,
            SolverOptions::default(),
        )
        .unwrap();
        let hom = effective_matrix(&t, &field).unwrap();
        let exact = (c0 * c0 - c1 * c1).sqrt();
        for a in &hom.a0 {
            prop_assert!((a[0][0] - exact).abs() <= 1e-8 * exact);
        }
    }

    #[test]
    fn laminate_effective_matrix_is_diagonal(
        a1 in 0.5f64..4.0, a2 in 0.5f64..4.0, b1 in 0.5f64..4.0, b2 in 0.5f64..4.0, theta in 0.2f64..0.8,
    ) {
        let field = builtin_family(
            "laminate_2d",
            &params(&[("alpha1", a1), ("alpha2", a2), ("beta1", b1), ("beta2", b2), ("theta", theta)]),
        )
        .unwrap();
        let t = build_cell_table(
            &field,
            TorusGrid::new(2, 4).unwrap(),
            TorusGrid::new(2, 20).unwrap(),
            CellScheme::FiniteVolume,
            SolverOptions::default(),
        )
        .unwrap();
        let hom = effective_matrix(&t, &field).unwrap();
        let a11 = 1.0 / (theta / a1 + (1.0 - theta) / a2);
        let a22 = theta * b1 + (1.0 - theta) * b2;
        let a = hom.a0[0];
        // discrete oracle: a11 is the harmonic mean over y1-faces, a22 the mean over y1-nodes
        let n = 20;
        let phase = |y: f64| if y < theta { 0 } else { 1 };
        let d11 = n as f64 / (0..n).map(|i| 1.0 / [a1, a2][phase((i as f64 + 0.5) / n as f64)]).sum::<f64>();
        let d22 = (0..n).map(|i| [b1, b2][phase(i as f64 / n as f64)]).sum::<f64>() / n as f64;
        prop_assert!((a[0][0] - d11).abs() <= 1e-8 * d11, "{} vs {} ({})", a[0][0], d11, a11);
        prop_assert!((a[1][1] - d22).abs() <= 1e-8 * d22, "{} vs {} ({})", a[1][1], d22, a22);
        prop_assert!(a[0][1].abs() <= 1e-10 && a[1][0].abs() <= 1e-10);
    }

    #[test]
    fn steklov_is_an_l2_contraction(seed in 0u64..1000, k in 2usize..6) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spec = SmoothingSpec::new(2, k, 8, 8, 2).unwrap();
        let g = spec.fine_grid().unwrap();
        let u = GridFunction::new(g, (0..g.len()).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
        prop_assert!(steklov(&u, &spec).unwrap().l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn fine_resolvent_is_a_contraction(k in 2usize..5, seed in 0u64..50) {
        let field = builtin_family("smooth_2d_nonsymmetric", &BTreeMap::new()).unwrap();
        let r = Resolvent::new(assemble_fine(&field, k, 8).unwrap(), 4096, SolverOptions::default()).unwrap();
        let n = operator_norm(&r, PowerOptions { seed, ..PowerOptions::default() }).unwrap();
        prop_assert!(n.value <= 1.0 + 1e-10, "{}", n.value);
    }
}
