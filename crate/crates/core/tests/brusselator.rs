//! Properties of the fitted models on the Brusselator training data.

use std::sync::OnceLock;

use koopman_kkl::dataset::{
    brusselator_scatter_filters, brusselator_trajectory_filters, generate_pairs, generate_scatter, NormalSampler,
    SamplingSpec, ScatterSpec, SnapshotPairs, DEFAULT_MAX_ATTEMPTS,
};
use koopman_kkl::dynamics::{Brusselator, IntegratorConfig, OutputMap};
use koopman_kkl::injection::{build_lattice, eval_dictionary, fit_injection, InjectionModel, DEFAULT_RIDGE};
use koopman_kkl::inverse::{fit_inverse, KernelKind};
use koopman_kkl::{Error, PolyBasis};
use ndarray::Array2;
use proptest::prelude::*;

const EQ: [f64; 2] = [1.0, 3.0];

fn sampling(n_traj: usize, seed: u64) -> SamplingSpec<f64> {
    SamplingSpec {
        n_traj,
        duration: 3.0,
        dt: 0.1,
        init_mean: EQ.to_vec(),
        init_std: 0.75,
        filters: brusselator_trajectory_filters(EQ),
        seed,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    }
}

fn pairs(n_traj: usize, seed: u64) -> SnapshotPairs<f64> {
    generate_pairs(&Brusselator::new(1.0, 3.0), &OutputMap::default(), &sampling(n_traj, seed), &IntegratorConfig::default())
        .unwrap()
}

struct Fixture {
    pairs: SnapshotPairs<f64>,
    model: InjectionModel<f64>,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let pairs = pairs(100, 0);
        let basis = PolyBasis::new(2, 5).unwrap();
        let lattice = build_lattice(-1.0, std::f64::consts::TAU / 7.16, 7, 7).unwrap();
        let model = fit_injection(&basis, &pairs, &lattice, &[0.5, 0.25], DEFAULT_RIDGE).unwrap();
        Fixture { pairs, model }
    })
}

fn sample_region(count: usize, seed: u64) -> Array2<f64> {
    let sampler = NormalSampler {
        mean: EQ.to_vec(),
        std: 0.75,
        filters: brusselator_trajectory_filters(EQ),
        seed,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    };
    let mut x = Array2::zeros((count, 2));
    for i in 0..count {
        let p = sampler.draw(i as u64).unwrap();
        x[[i, 0]] = p[0];
        x[[i, 1]] = p[1];
    }
    x
}

#[test]
fn first_imaginary_factor_is_accurate() {
    let f = &fixture().model.factors;
    assert!(f.imag[1].defect < 0.1, "{}", f.imag[1].defect);
    assert_eq!(f.real[0].defect, 0.0);
    assert_eq!(f.imag[0].defect, 0.0);
}

#[test]
fn factors_have_unit_rms_on_training_states() {
    let fx = fixture();
    for f in fx.model.factors.real.iter().chain(&fx.model.factors.imag) {
        let v = f.eval(fx.pairs.x.view()).unwrap();
        let rms = (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-9, "mu = {}: rms {rms}", f.mu);
    }
}

#[test]
fn negative_frequencies_are_exact_conjugates() {
    let fx = fixture();
    let x = fx.pairs.x.view();
    for n in 1..=7 {
        let pos = fx.model.factors.imag_factor(n).eval(x).unwrap();
        let neg = fx.model.factors.imag_factor(-n).eval(x).unwrap();
        assert!(pos.iter().zip(neg.iter()).all(|(a, b)| a.conj() == *b));
    }
}

#[test]
fn dictionary_is_product_of_factors() {
    let fx = fixture();
    let lat = &fx.model.lattice;
    let x = sample_region(20, 5);
    let d = eval_dictionary(&fx.model.factors, lat, x.view()).unwrap();
    let (c11, c10, c01) = (lat.index_of(1, 1).unwrap(), lat.index_of(1, 0).unwrap(), lat.index_of(0, 1).unwrap());
    for i in 0..x.nrows() {
        let prod = d[[i, c10]] * d[[i, c01]];
        assert!((d[[i, c11]] - prod).norm() <= 1e-12 * (1.0 + prod.norm()));
    }
}

#[test]
fn pde_residual_matches_fit_rmse() {
    let fx = fixture();
    let pde = fx.model.pde_residual(&fx.pairs).unwrap();
    for (r, f) in pde.iter().zip(&fx.model.fit_rmse) {
        assert!(*r <= f + 1e-9, "{r} vs {f}");
    }
}

#[test]
fn residual_generalizes_to_fresh_trajectories() {
    let fx = fixture();
    let fresh = pairs(10, 12345);
    let pde = fx.model.pde_residual(&fresh).unwrap();
    for (r, f) in pde.iter().zip(&fx.model.fit_rmse) {
        assert!(*r <= 3.0 * f, "{r} vs training {f}");
    }
}

#[test]
fn transform_is_real_on_real_states() {
    let fx = fixture();
    let x = sample_region(500, 77);
    for r in fx.model.imag_residue(x.view()).unwrap() {
        assert!(r < 1e-6, "{r}");
    }
}

#[test]
fn inverse_recovers_training_states() {
    let fx = fixture();
    let scatter = generate_scatter(&ScatterSpec {
        count: 1000,
        mean: EQ.to_vec(),
        std: 1.15,
        filters: brusselator_scatter_filters(),
        seed: 1,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    })
    .unwrap();
    let krr = fit_inverse(&fx.model, scatter.points.view(), 2.0, 1e-8, KernelKind::Laplace).unwrap();
    assert!(krr.training_rmse(scatter.points.view()).unwrap() < 0.05);
    let norm = scatter.points.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(krr.first_order_residual(scatter.points.view()) < 1e-8 * norm);
    let mut last = 0.0;
    for xi in [0.0, 1e-8, 1e-4, 1e-2] {
        let m = fit_inverse(&fx.model, scatter.points.view(), 2.0, xi, KernelKind::Laplace).unwrap();
        let rmse = m.training_rmse(scatter.points.view()).unwrap();
        assert!(rmse + 1e-12 >= last, "xi {xi}: {rmse} < {last}");
        last = rmse;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clashing_rates_never_fit(m in 0usize..=7, mu_real in -3.0f64..-0.1, other in 0.01f64..5.0) {
        let lattice = build_lattice(mu_real, 1.0, 7, 2).unwrap();
        let clash = -(m as f64) * mu_real;
        let fx = fixture();
        let basis = PolyBasis::new(2, 1).unwrap();
        let r = fit_injection(&basis, &fx.pairs, &lattice, &[other, clash], DEFAULT_RIDGE);
        if m == 0 {
            prop_assert!(matches!(r, Err(Error::Precondition(_))));
        } else {
            let is_clash = matches!(r, Err(Error::InvalidLambda { m: got, n: 0, .. }) if got == m);
            let earlier = (1..=7).any(|k| ((k as f64) * mu_real + other).abs() < 1e-9);
            prop_assert!(is_clash || earlier);
        }
    }
}
