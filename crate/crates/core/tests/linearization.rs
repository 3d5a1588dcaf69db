use kinklab_core::linearization::{
    coercivity_check, kernel_residual, spectrum_report, Background, DiscreteOperator,
};
use kinklab_core::{Error, Grid, Model};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single(model: &str, dx: f64, order: u8) -> (Model, DiscreteOperator) {
    let m = Model::builtin(model).unwrap();
    let grid = Grid::with_spacing(-40.0, 40.0, dx).unwrap();
    let op = DiscreteOperator::assemble(&m.kink(), Background::SingleKink { center: 0.0 }, grid, order).unwrap();
    (m, op)
}

#[test]
fn zero_mode_residual_converges_at_the_stencil_order() {
    for order in [2u8, 4] {
        let (m, coarse) = single("phi4", 0.04, order);
        let (_, fine) = single("phi4", 0.02, order);
        let ratio = kernel_residual(&coarse, &m.kink(), 0.0) / kernel_residual(&fine, &m.kink(), 0.0);
        let observed = ratio.log2();
        assert!((observed - order as f64).abs() < 0.25, "order {order}: observed {observed}");
    }
}

#[test]
fn phi4_has_zero_and_internal_modes_below_the_edge() {
    let m = Model::builtin("phi4").unwrap();
    let rep = spectrum_report(&m.kink(), Background::SingleKink { center: 0.0 }, (-40.0, 40.0), 0.02, 2, 4).unwrap();
    assert_eq!(rep.continuum_edge, 2.0);
    assert_eq!(rep.eigenvalues.len(), 2);
    assert!(rep.eigenvalues[0].abs() < 1e-6, "{:?}", rep.eigenvalues);
    assert!((rep.eigenvalues[1] - 1.5).abs() < 1e-4, "{:?}", rep.eigenvalues);
    assert!(rep.zero_mode_residual.unwrap() < 1e-4);
}

#[test]
fn sine_gordon_has_only_the_zero_mode() {
    let m = Model::builtin("sine_gordon").unwrap();
    let rep = spectrum_report(&m.kink(), Background::SingleKink { center: 0.0 }, (-40.0, 40.0), 0.02, 2, 3).unwrap();
    assert_eq!(rep.eigenvalues.len(), 1);
    assert!(rep.eigenvalues[0].abs() < 1e-6);
}

#[test]
fn zero_mode_eigenvector_is_the_translation_mode() {
    let (m, op) = single("phi4", 0.02, 2);
    let lambda = op.spectrum(1).unwrap()[0];
    let v = op.eigenvector(lambda).unwrap();
    let dh = op.grid().sample(|x| m.kink().eval(x, 1));
    let corr = op.inner(&v, &dh).abs() / (op.inner(&v, &v) * op.inner(&dh, &dh)).sqrt();
    assert!(corr >= 1.0 - 1e-6, "{corr}");
}

#[test]
fn far_rows_of_the_pair_operator_are_free() {
    let m = Model::builtin("sine_gordon").unwrap();
    let k = m.normalized_kink();
    let grid = Grid::with_spacing(-45.0, 45.0, 0.02).unwrap();
    let op = DiscreteOperator::assemble(&k, Background::Pair { x1: -15.0, x2: 15.0 }, grid, 2).unwrap();
    for i in 0..grid.n {
        let x = grid.x(i);
        // more than 28 decay lengths from both kinks
        if (x - 15.0).abs() > 28.0 && (x + 15.0).abs() > 28.0 {
            assert!((op.diagonal()[i] - 1.0).abs() <= 1e-10, "x = {x}");
        }
    }
    assert!(op.entry(0, 1) == -1.0 / (grid.dx * grid.dx));
}

#[test]
fn coercivity_quotient_examples() {
    let m = Model::builtin("sine_gordon").unwrap();
    let k = m.kink();
    let bg = Background::Pair { x1: -15.0, x2: 15.0 };
    let op = DiscreteOperator::assemble(&k, bg, Grid::with_spacing(-45.0, 45.0, 0.02).unwrap(), 2).unwrap();
    let report = coercivity_check(&op, &k, bg, 200, 7).unwrap();
    assert!(report.min_quotient > 0.0 && report.mean_quotient >= report.min_quotient);
    // a translation mode before projection is nearly in the kernel
    let mode = op.grid().sample(|x| k.eval(x + 15.0, 1));
    assert!(op.quotient(&mode).abs() <= 1e-4);
    // a wide bump in the vacuum sees the free operator
    let bump = op.grid().sample(|x| (-(x / 3.0).powi(2)).exp());
    assert!(op.quotient(&bump) >= 0.95);
}

#[test]
fn preconditions_are_enforced() {
    let m = Model::builtin("sine_gordon").unwrap();
    let k = m.kink();
    let small = Grid::with_spacing(-5.0, 5.0, 0.02).unwrap();
    assert!(matches!(
        DiscreteOperator::assemble(&k, Background::SingleKink { center: 0.0 }, small, 2),
        Err(Error::Domain(_))
    ));
    let near = Background::Pair { x1: -5.0, x2: 5.0 };
    let op = DiscreteOperator::assemble(&k, near, Grid::with_spacing(-30.0, 30.0, 0.05).unwrap(), 2).unwrap();
    assert!(coercivity_check(&op, &k, near, 200, 1).is_err());
    let far = Background::Pair { x1: -15.0, x2: 15.0 };
    let op = DiscreteOperator::assemble(&k, far, Grid::with_spacing(-45.0, 45.0, 0.05).unwrap(), 2).unwrap();
    assert!(coercivity_check(&op, &k, far, 50, 1).is_err());
    assert!(coercivity_check(&op, &k, Background::SingleKink { center: 0.0 }, 200, 1).is_err());
}

#[test]
fn coercivity_is_reproducible_for_a_seed() {
    let m = Model::builtin("sine_gordon").unwrap();
    let k = m.kink();
    let bg = Background::Pair { x1: -12.0, x2: 12.0 };
    let op = DiscreteOperator::assemble(&k, bg, Grid::with_spacing(-40.0, 40.0, 0.05).unwrap(), 2).unwrap();
    let a = coercivity_check(&op, &k, bg, 100, 3).unwrap();
    let b = coercivity_check(&op, &k, bg, 100, 3).unwrap();
    assert_eq!(a.min_quotient, b.min_quotient);
    assert_eq!(a.mean_quotient, b.mean_quotient);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_is_symmetric(seed in any::<u64>(), order in prop::sample::select(vec![2u8, 4])) {
        let m = Model::builtin("phi4").unwrap();
        let grid = Grid::with_spacing(-30.0, 30.0, 0.05).unwrap();
        let op = DiscreteOperator::assemble(&m.kink(), Background::Pair { x1: -8.0, x2: 8.0 }, grid, order).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let mut v: Vec<f64> = (0..grid.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            v[0] = 0.0;
            v[grid.n - 1] = 0.0;
            v
        };
        let (u, v) = (draw(), draw());
        let lhs = op.inner(&u, &op.apply(&v));
        let rhs = op.inner(&op.apply(&u), &v);
        let scale = op.inner(&u, &op.apply(&u)).abs() + op.inner(&v, &op.apply(&v)).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }
}
