use proptest::prelude::*;
use weylat::models::{
    dimerized_chain, gap_midpoint, gauge_transform, hofstadter, inhomogeneous_flux, qwz, stacked_dimers, FluxField,
    ModelKind, ModelSpec,
};
use weylat::moyal::groenewold_residual;
use weylat::response::{
    dirac_operator, fhs_chern, fhs_chern_set, green_symbol, hall_bracket, hall_invariant, hall_momentum_space,
    invariance_probe, local_current, model_chern, model_chern_occupied, sum_local_current, total_current,
    total_current_oracle, BlochHamiltonian, FrequencyQuadrature,
};
use weylat::{weyl_symbol, Complex64, Error, Flavor, LatticeGeometry, LatticeOperator, WeylSymbol};

fn hofstadter_in_gap(n: usize, p: i64, q: i64, gap: usize) -> LatticeOperator {
    let g = LatticeGeometry::square(n, n, 1).unwrap();
    let clean = hofstadter(&g, 1.0, p, q, 0.0).unwrap();
    let (mu, _) = gap_midpoint(&clean, q as usize, gap).unwrap();
    hofstadter(&g, 1.0, p, q, mu).unwrap()
}

fn spec(sites: [usize; 2], model: ModelKind) -> ModelSpec {
    ModelSpec {
        sites: sites.to_vec(),
        half_spacing: None,
        model,
        perturbation: None,
    }
}

#[test]
fn free_green_symbol() {
    let g = LatticeGeometry::square(4, 4, 1).unwrap();
    let h = LatticeOperator::zeros(&g);
    let s = green_symbol(&h, 0.5, 2.0).unwrap();
    let e = WeylSymbol::constant(&g, Flavor::W, Complex64::new(1.0, 0.0) / Complex64::new(0.5, 2.0));
    assert!(s.max_diff(&e) < 1e-14);
}

#[test]
fn hofstadter_groenewold_along_frequencies() {
    let h = hofstadter_in_gap(6, 1, 3, 1);
    for omega in [-3.0, -0.2, 0.0, 0.7, 5.0] {
        let q = weyl_symbol(&dirac_operator(&h, 0.0, omega));
        let gs = green_symbol(&h, 0.0, omega).unwrap();
        assert!(groenewold_residual(&q, &gs).unwrap() < 1e-10);
    }
    let quad = FrequencyQuadrature::tan_legendre(16, 1.0).unwrap();
    let r = hall_invariant(&h, 0.0, &quad, false).unwrap();
    assert!(r.max_groenewold_residual < 1e-10);
    assert!(r.imaginary_part.abs() < 1e-10);
}

#[test]
fn gapless_input_rejected() {
    let g = LatticeGeometry::square(4, 4, 1).unwrap();
    let h = hofstadter(&g, 1.0, 0, 1, 0.0).unwrap();
    let quad = FrequencyQuadrature::tan_legendre(8, 1.0).unwrap();
    assert!(matches!(hall_invariant(&h, 0.0, &quad, false), Err(Error::GapClosed { .. })));
    assert!(matches!(total_current(&h, 0.0, &quad), Err(Error::GapClosed { .. })));
}

#[test]
fn currents_vanish_without_field() {
    let quad = FrequencyQuadrature::tan_legendre(16, 1.0).unwrap();
    let g = LatticeGeometry::square(6, 4, 1).unwrap();
    let h = stacked_dimers(&g, 1.0, 0.4, 0.1, 0.0).unwrap();
    for row in local_current(&h, 0.0, &quad).unwrap() {
        assert!(row.iter().all(|v| v.abs() < 1e-12));
    }
    let c = LatticeGeometry::chain(8, 1).unwrap();
    let d = dimerized_chain(&c, 1.0, 0.5, 0.0).unwrap();
    assert!(local_current(&d, 0.0, &quad).unwrap()[0].iter().all(|v| v.abs() < 1e-12));
    assert!(total_current(&d, 0.0, &quad).unwrap()[0].abs() < 1e-12);
}

#[test]
fn total_current_against_operator_oracle() {
    let g = LatticeGeometry::square(6, 6, 1).unwrap();
    let field = FluxField::modulated(6, 6, 1, 3, 0.05);
    let clean = hofstadter(&g, 1.0, 1, 3, 0.0).unwrap();
    let (mu, _) = gap_midpoint(&clean, 3, 1).unwrap();
    let h = inhomogeneous_flux(&g, 1.0, &field, mu).unwrap();
    let h = h.add(&LatticeOperator::position_function(&g, |x| Complex64::new(0.2 * x[0].sin(), 0.0))).unwrap();
    let quad = FrequencyQuadrature::tan_legendre(64, 1.0).unwrap();
    let total = total_current(&h, 0.0, &quad).unwrap();
    let oracle = total_current_oracle(&h, 0.0).unwrap();
    let local = sum_local_current(&g, &local_current(&h, 0.0, &quad).unwrap());
    for k in 0..2 {
        assert!((total[k] - oracle[k]).abs() < 1e-8, "{total:?} vs {oracle:?}");
        assert!((total[k] - local[k]).abs() < 1e-10, "{total:?} vs {local:?}");
    }
}

#[test]
fn trivial_insulator_has_no_hall_response() {
    let g = LatticeGeometry::square(4, 4, 1).unwrap();
    let h = stacked_dimers(&g, 1.0, 0.3, 0.1, 0.0).unwrap();
    let quad = FrequencyQuadrature::tan_legendre(16, 1.0).unwrap();
    assert!(hall_invariant(&h, 0.0, &quad, false).unwrap().invariant.abs() < 1e-12);
}

#[test]
fn bracket_is_antisymmetric_bitwise() {
    let h = hofstadter_in_gap(6, 1, 3, 1);
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 0, 1)] {
        let a = hall_bracket(&h, 0.0, 0.6, i, j, k).unwrap();
        let b = hall_bracket(&h, 0.0, 0.6, k, j, i).unwrap();
        assert_eq!(a, -b);
    }
    assert_eq!(hall_bracket(&h, 0.0, 0.6, 1, 0, 1).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn homogeneous_reduction_to_momentum_space() {
    let g = LatticeGeometry::square(6, 4, 2).unwrap();
    let quad = FrequencyQuadrature::tan_legendre(24, 1.0).unwrap();
    for m in [-1.2, 0.8, 2.5] {
        let h = qwz(&g, m, 0.0).unwrap();
        let a = hall_invariant(&h, 0.0, &quad, false).unwrap().invariant;
        let b = hall_momentum_space(&h, 0.0, &quad).unwrap();
        assert!((a - b).abs() < 1e-12, "m={m}: {a} vs {b}");
    }
    let inhom = hofstadter_in_gap(6, 1, 3, 1);
    assert!(matches!(hall_momentum_space(&inhom, 0.0, &quad), Err(Error::NotPeriodic(_))));
}

#[test]
fn doubling_nodes_stays_within_error_estimate_and_converges() {
    let g = LatticeGeometry::square(4, 4, 2).unwrap();
    let h = qwz(&g, 1.8, 0.0).unwrap();
    let values: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let quad = FrequencyQuadrature::tan_legendre(n, 1.0).unwrap();
            hall_invariant(&h, 0.0, &quad, false).unwrap().invariant
        })
        .collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
    let quad = FrequencyQuadrature::tan_legendre(64, 1.0).unwrap();
    let est = hall_invariant(&h, 0.0, &quad, true).unwrap().quadrature_error.unwrap();
    assert!(diffs[1] < est);
}

#[test]
fn rounded_invariant_matches_link_variable_chern_number() {
    let quad = FrequencyQuadrature::tan_legendre(32, 1.0).unwrap();
    for m in [-1.0, 1.0, 3.0] {
        let s = spec([8, 8], ModelKind::Qwz { m });
        let h = s.hamiltonian(0.0).unwrap();
        let r = hall_invariant(&h, 0.0, &quad, false).unwrap();
        let c = model_chern_occupied(&s, [24, 24], 1).unwrap();
        assert_eq!(r.nearest_integer, c, "m={m}: {r:?}");
    }
}

#[test]
fn gauge_covariance_of_gauge_invariant_outputs() {
    let h = hofstadter_in_gap(6, 1, 3, 1);
    let h2 = gauge_transform(&h, |s| 0.7 * (s * s) as f64 + (s % 5) as f64);
    let quad = FrequencyQuadrature::tan_legendre(24, 1.0).unwrap();
    let a = hall_invariant(&h, 0.0, &quad, false).unwrap().invariant;
    let b = hall_invariant(&h2, 0.0, &quad, false).unwrap().invariant;
    assert!((a - b).abs() < 1e-10);
    let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ja = norm(total_current(&h, 0.0, &quad).unwrap());
    let jb = norm(total_current(&h2, 0.0, &quad).unwrap());
    assert!((ja - jb).abs() < 1e-10);
}

#[test]
fn link_variable_examples() {
    assert_eq!(model_chern(&spec([4, 4], ModelKind::Hofstadter { t: 1.0, p: 0, q: 1 }), [12, 12]).unwrap(), vec![0]);
    let third = model_chern(&spec([6, 6], ModelKind::Hofstadter { t: 1.0, p: 1, q: 3 }), [24, 24]).unwrap();
    assert_eq!(third, vec![1, -2, 1]);
    let g = LatticeGeometry::square(10, 10, 1).unwrap();
    for (p, q) in [(1, 5), (2, 5)] {
        let h = hofstadter(&g, 1.0, p, q, 0.0).unwrap();
        let b = BlochHamiltonian::from_operator(&h, [q as usize, 1]).unwrap();
        let c = fhs_chern(&b, [24, 24]).unwrap();
        assert_eq!(c.iter().sum::<i64>(), 0);
        assert_eq!(fhs_chern_set(&b, [24, 24], 0..q as usize).unwrap(), 0);
    }
    let quarter = hofstadter(&LatticeGeometry::square(8, 8, 1).unwrap(), 1.0, 1, 4, 0.0).unwrap();
    let b = BlochHamiltonian::from_operator(&quarter, [4, 1]).unwrap();
    assert!(matches!(fhs_chern_set(&b, [24, 24], 0..2), Err(Error::BandCrossing(_))));
}

#[test]
fn probe_without_perturbation_is_exact() {
    let h = hofstadter_in_gap(6, 1, 3, 1);
    let quad = FrequencyQuadrature::tan_legendre(16, 1.0).unwrap();
    let r = invariance_probe(&h, &[0.0], 2, 3, &quad).unwrap();
    assert_eq!(r.max_hall_deviation, 0.0);
    assert_eq!(r.max_current_deviation, 0.0);
    assert_eq!(r.rejections, 0);
}

#[test]
fn probe_records_rejection_once_the_gap_closes() {
    let h = hofstadter_in_gap(6, 1, 3, 1);
    let quad = FrequencyQuadrature::tan_legendre(16, 1.0).unwrap();
    let eps = [0.01, 0.1, 1.0, 10.0];
    let r = invariance_probe(&h, &eps, 2, 11, &quad).unwrap();
    assert_eq!(r.rows.len(), 8);
    let first_rejected = r.rows.iter().position(|row| row.rejection.is_some()).unwrap();
    assert!(r.rows[..first_rejected].iter().all(|row| row.hall.is_some()));
    assert!(r.rows[first_rejected..].iter().all(|row| row.eps >= r.rows[first_rejected].eps));
    assert!(r.rows.iter().filter(|row| row.eps == 10.0).all(|row| row.rejection.is_some()));
    assert!(r.rows.iter().filter(|row| row.eps == 0.01).all(|row| row.rejection.is_none()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quadrature_nodes_symmetric(n in 1usize..80, scale in 0.1f64..5.0) {
        let q = FrequencyQuadrature::tan_legendre(n, scale).unwrap();
        prop_assert_eq!(q.len(), n);
        for i in 0..n {
            prop_assert_eq!(q.nodes[i], -q.nodes[n - 1 - i]);
            prop_assert_eq!(q.weights[i], q.weights[n - 1 - i]);
            prop_assert!(q.weights[i] > 0.0);
        }
    }
}
