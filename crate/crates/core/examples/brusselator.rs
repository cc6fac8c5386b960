//! End-to-end Brusselator run with the library defaults, printing the
//! per-stage diagnostics.

use std::time::Instant;

use koopman_kkl::dataset::{
    brusselator_scatter_filters, brusselator_trajectory_filters, generate_pairs, generate_scatter, SamplingSpec,
    ScatterSpec, DEFAULT_MAX_ATTEMPTS,
};
use koopman_kkl::dynamics::{estimate_period, Brusselator, IntegratorConfig, OutputMap};
use koopman_kkl::injection::{build_lattice, fit_injection, DEFAULT_RIDGE};
use koopman_kkl::inverse::{fit_inverse, KernelKind, DEFAULT_XI};
use koopman_kkl::observer::{error_report, run_observer, ObserverConfig};
use koopman_kkl::PolyBasis;
use ndarray::Array2;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> koopman_kkl::Result<()> {
    let start = Instant::now();
    let sys = Brusselator::new(1.0, 3.0);
    let eq = sys.equilibrium();
    let integ = IntegratorConfig::default();
    let out = OutputMap::default();
    let seed = 0;

    let period = estimate_period(&sys, &[2.0, 2.0], 50.0, 60.0, &integ)?;
    println!("estimated period {period:.4}");

    let spec = SamplingSpec {
        n_traj: 100,
        duration: 3.0,
        dt: 0.1,
        init_mean: eq.to_vec(),
        init_std: 0.75,
        filters: brusselator_trajectory_filters(eq),
        seed,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    };
    let pairs = generate_pairs(&sys, &out, &spec, &integ)?;
    let scatter = generate_scatter(&ScatterSpec {
        count: 1000,
        mean: eq.to_vec(),
        std: 1.15,
        filters: brusselator_scatter_filters(),
        seed: seed + 1,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
    })?;
    println!("{} pairs, {} scatter points", pairs.len(), scatter.points.nrows());

    let basis = PolyBasis::new(2, 5)?;
    let lattice = build_lattice(-1.0, std::f64::consts::TAU / 7.16, 7, 7)?;
    let lambdas = [0.5, 0.25];
    let t0 = Instant::now();
    let inj = fit_injection(&basis, &pairs, &lattice, &lambdas, DEFAULT_RIDGE)?;
    println!("injection fit in {:?}", t0.elapsed());
    for (k, f) in inj.factors.real.iter().enumerate() {
        println!("real factor m={k}: defect {:.3e}", f.defect);
    }
    for (k, f) in inj.factors.imag.iter().enumerate() {
        println!("imag factor n={k}: defect {:.3e}", f.defect);
    }
    let rms_y = (pairs.y.iter().map(|v| v * v).sum::<f64>() / pairs.len() as f64).sqrt();
    for (j, r) in inj.fit_rmse.iter().enumerate() {
        println!("component {j}: fit_rmse {r:.6e}, relative {:.6e}", r / rms_y);
    }
    println!("pde residual {:?}", inj.pde_residual(&pairs)?);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let probe = Array2::from_shape_fn((500, 2), |(_, c)| eq[c] + 0.75 * normal.sample(&mut rng));
    let t_probe = inj.eval_t(probe.view())?;
    let resid = inj.imag_residue(probe.view())?;
    for (j, r) in resid.iter().enumerate() {
        let rms_t = (t_probe.column(j).iter().map(|v| v * v).sum::<f64>() / 500.0).sqrt();
        println!("component {j}: imag residue {r:.3e}, rms T {rms_t:.4}");
    }

    let t0 = Instant::now();
    let krr = fit_inverse(&inj, scatter.points.view(), 2.0, DEFAULT_XI, KernelKind::Laplace)?;
    println!("krr fit in {:?}", t0.elapsed());
    println!("krr training rmse {:.6e}", krr.training_rmse(scatter.points.view())?);
    println!("krr first-order residual {:.3e}", krr.first_order_residual(scatter.points.view()));

    let cfg = ObserverConfig {
        lambdas: lambdas.to_vec(),
        x0_true: vec![2.0, 2.0],
        x0_hat: vec![1.5, 1.5],
        duration: 30.0,
        dt: 0.1,
    };
    let run = run_observer(&sys, &out, &inj, &krr, &cfg, &integ)?;
    let rep = error_report(&run);
    println!("{rep:?}");
    for k in (0..run.t.len()).step_by(10) {
        println!(
            "t={:5.1} err_state {:.4} err_z {:.4} hull {:.4}",
            run.t[k], run.err_state[k], run.err_z[k], run.hull_dist[k]
        );
    }
    println!("total {:?}", start.elapsed());
    Ok(())
}
