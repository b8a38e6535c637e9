use proptest::prelude::*;
use waitent::exact;
use waitent::linalg::Matrix;
use waitent::model::{self, build_generator, stationary_of, CtmcModel};
use waitent::scgf;

/// Random irreducible chains: every off-diagonal rate positive.
fn chain(n: usize) -> impl Strategy<Value = CtmcModel> {
    prop::collection::vec(0.05f64..5.0, n * n).prop_map(move |r| {
        let m = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { r[i * n + j] });
        CtmcModel::from_rate_matrix((0..n).map(|i| format!("s{i}")).collect(), &m).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (CtmcModel, CtmcModel)> {
    (2usize..5).prop_flat_map(|n| (chain(n), chain(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_invariant((x, _) in pair()) {
        let mu = stationary_of(&x).unwrap();
        let l = build_generator(&x);
        let n = x.num_states();
        prop_assert!((mu.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..n {
            let r: f64 = (0..n).map(|i| mu.prob(i) * l.matrix()[(i, j)]).sum();
            prop_assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn relative_entropy_nonnegative_and_zero_on_diagonal((x, y) in pair()) {
        prop_assert!(exact::relative_entropy_rate(&x, &y).unwrap() >= -1e-12);
        prop_assert!(exact::relative_entropy_rate(&x, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn reversal_is_an_involution((x, _) in pair()) {
        let rr = model::reversed(&model::reversed(&x).unwrap()).unwrap();
        for a in 0..x.num_states() {
            for b in 0..x.num_states() {
                prop_assert!((rr.rate(a, b) - x.rate(a, b)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn entropy_production_is_relative_entropy_to_reversal((x, _) in pair()) {
        let ep = exact::entropy_production_rate(&x).unwrap();
        let s = exact::relative_entropy_rate(&x, &model::reversed(&x).unwrap()).unwrap();
        prop_assert!((ep - s).abs() < 1e-10);
        prop_assert!(ep >= -1e-12);
    }

    #[test]
    fn detailed_balance_chains_produce_no_entropy(
        w in prop::collection::vec(0.1f64..3.0, 4),
        pi in prop::collection::vec(0.1f64..3.0, 4),
    ) {
        // r(x,y) = s(x,y) / pi(x) with symmetric s is reversible w.r.t. pi
        let n = 4;
        let m = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (w[i] + w[j]) / pi[i] });
        let x = CtmcModel::from_rate_matrix((0..n).map(|i| i.to_string()).collect(), &m).unwrap();
        prop_assert!(exact::entropy_production_rate(&x).unwrap().abs() < 1e-10);
    }

    #[test]
    fn discretized_matrix_is_stochastic((x, _) in pair(), delta in 0.01f64..2.0) {
        let p = exact::discretized_transition_matrix(&x, delta).unwrap();
        for i in 0..p.nrows() {
            let s: f64 = p.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-10);
            prop_assert!(p.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn scgf_is_convex_and_vanishes((x, y) in pair()) {
        let grid = scgf::linspace(-0.9, 0.9, 19);
        let c = scgf::continuous_scgf(&x, &y, &grid).unwrap();
        prop_assert!(c.validate().is_ok());
        prop_assert!(scgf::scgf_value(&x, &y, 0.0).unwrap().abs() < 1e-10);
        prop_assert!(scgf::scgf_value(&x, &model::reversed(&x).unwrap(), -1.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn scgf_slope_at_zero_is_relative_entropy((x, y) in pair()) {
        let h = 1e-5;
        let d = (scgf::scgf_value(&x, &y, h).unwrap() - scgf::scgf_value(&x, &y, -h).unwrap()) / (2.0 * h);
        let s = exact::relative_entropy_rate(&x, &y).unwrap();
        prop_assert!((d - s).abs() < 1e-5 * (1.0 + s));
    }
}

#[test]
fn two_state_discretization_closed_form() {
    // P_delta(0,1) = c0/(c0+c1) (1 - e^{-(c0+c1) delta})
    let (c0, c1, d) = (1.0f64, 2.0f64, 0.3f64);
    let x = waitent::fixtures::two_state(c0, c1);
    let p = exact::discretized_transition_matrix(&x, d).unwrap();
    let want = c0 / (c0 + c1) * (1.0 - (-(c0 + c1) * d).exp());
    assert!((p[(0, 1)] - want).abs() < 1e-14);
}

#[test]
fn invalid_models_are_named() {
    let err = CtmcModel::from_rows(&[1.0, 1.0], &[&[0.0, 0.9], &[1.0, 0.0]]).unwrap_err();
    assert!(err.to_string().contains("row-stochastic"), "{err}");
    let err = CtmcModel::from_rows(&[0.0, 1.0], &[&[0.0, 1.0], &[1.0, 0.0]]).unwrap_err();
    assert!(err.to_string().contains("strictly positive"), "{err}");
    let err = CtmcModel::from_rows(&[1.0, 1.0, 1.0], &[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0]]).unwrap_err();
    assert!(err.to_string().contains("irreducible"), "{err}");
}
