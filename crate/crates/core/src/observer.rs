//! Running the synthesized observer against a simulated plant.
//!
//! The filter `z' = -Lambda z + 1 y` is advanced with its exact exponential
//! update under a zero-order hold on the sampled output, so the `z` recursion
//! carries no integrator error of its own.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dynamics::{integrate, IntegratorConfig, OutputMap, VectorField};
use crate::error::{Error, Result};
use crate::injection::InjectionModel;
use crate::inverse::KrrModel;
use crate::scalar::Real;

/// Forward map `x -> z` used by the observer.
pub trait Transform<T: Real> {
    /// Filter rates the map was built for.
    fn lambdas(&self) -> &[T];
    /// One output row per input row.
    fn transform(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>>;
}

/// Backward map `z -> x_hat`.
pub trait InverseMap<T: Real> {
    fn recover(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>>;
    /// Distance from each `z` to the inverse map's training support.
    fn support_distance(&self, z: ArrayView2<'_, T>) -> Result<Array1<T>>;
}

impl<T: Real> Transform<T> for InjectionModel<T> {
    fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    fn transform(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.eval_t(x)
    }
}

impl<T: Real> InverseMap<T> for KrrModel<T> {
    fn recover(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.eval(z)
    }

    fn support_distance(&self, z: ArrayView2<'_, T>) -> Result<Array1<T>> {
        self.nearest_distance(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig<T> {
    pub lambdas: Vec<T>,
    pub x0_true: Vec<T>,
    pub x0_hat: Vec<T>,
    pub duration: T,
    pub dt: T,
}

/// One exact step of `z_j' = -lambda_j z_j + y` with `y` held constant.
pub fn observer_step<T: Real>(z: &[T], y: T, lambdas: &[T], dt: T) -> Vec<T> {
    z.iter()
        .zip(lambdas)
        .map(|(&zj, &lambda)| {
            let decay = (-lambda * dt).exp();
            decay * zj + (T::one() - decay) / lambda * y
        })
        .collect()
}

/// Filter states driven by `ys`: row `k` is `z(k dt)`, starting from `z0`.
pub fn filter_response<T: Real>(z0: &[T], ys: ArrayView1<'_, T>, lambdas: &[T], dt: T) -> Array2<T> {
    let n = ys.len();
    let mut out = Array2::zeros((n, z0.len()));
    let mut z = z0.to_vec();
    for k in 0..n {
        out.row_mut(k).iter_mut().zip(&z).for_each(|(d, &v)| *d = v);
        if k + 1 < n {
            z = observer_step(&z, ys[k], lambdas, dt);
        }
    }
    out
}

/// Time series produced by [`run_observer`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRun<T> {
    pub t: Vec<T>,
    pub x_true: Array2<T>,
    pub y: Array1<T>,
    pub z: Array2<T>,
    /// `T(x(t))`.
    pub t_of_x: Array2<T>,
    /// `T(x_hat(t))`.
    pub t_of_xhat: Array2<T>,
    /// `T^+(z(t))`.
    pub x_hat: Array2<T>,
    /// `|x_hat - x|`.
    pub err_state: Array1<T>,
    /// `|z - T(x)|`.
    pub err_z: Array1<T>,
    /// Distance from `z(t)` to the nearest inverse-map training point.
    pub hull_dist: Array1<T>,
}

fn row_norms<T: Real>(a: &Array2<T>, b: &Array2<T>) -> Array1<T> {
    a.rows()
        .into_iter()
        .zip(b.rows())
        .map(|(r, s)| r.iter().zip(s.iter()).map(|(&u, &v)| (u - v) * (u - v)).sum::<T>().sqrt())
        .collect()
}

/// Simulates the plant from `x0_true`, feeds its sampled output to the
/// filter initialized at `T(x0_hat)`, and maps the filter state back.
pub fn run_observer<T, F, M, I>(
    field: &F,
    out: &OutputMap<T>,
    transform: &M,
    inverse: &I,
    cfg: &ObserverConfig<T>,
    integrator: &IntegratorConfig<T>,
) -> Result<ObserverRun<T>>
where
    T: Real,
    F: VectorField<T> + ?Sized,
    M: Transform<T> + ?Sized,
    I: InverseMap<T> + ?Sized,
{
    if cfg.lambdas.as_slice() != transform.lambdas() {
        return Err(Error::Precondition(
            "observer filter rates differ from the injection's rates".into(),
        ));
    }
    if cfg.x0_hat.len() != field.dim() {
        return Err(Error::Dimension(format!(
            "x0_hat has length {}, field dimension is {}",
            cfg.x0_hat.len(),
            field.dim()
        )));
    }
    out.check_dim(field.dim())?;

    let traj = integrate(field, &cfg.x0_true, cfg.duration, cfg.dt, integrator)?;
    let y: Array1<T> = traj
        .states
        .rows()
        .into_iter()
        .map(|r| out.eval(r.as_slice().expect("row-major")))
        .collect();

    let x0_hat = Array2::from_shape_vec((1, cfg.x0_hat.len()), cfg.x0_hat.clone())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let z0 = transform.transform(x0_hat.view())?;
    let z = filter_response(z0.row(0).as_slice().expect("row-major"), y.view(), &cfg.lambdas, cfg.dt);

    let t_of_x = transform.transform(traj.states.view())?;
    let x_hat = inverse.recover(z.view())?;
    let t_of_xhat = transform.transform(x_hat.view())?;
    let err_state = row_norms(&x_hat, &traj.states);
    let err_z = row_norms(&z, &t_of_x);
    let hull_dist = inverse.support_distance(z.view())?;

    Ok(ObserverRun {
        t: traj.times,
        x_true: traj.states,
        y,
        z,
        t_of_x,
        t_of_xhat,
        x_hat,
        err_state,
        err_z,
        hull_dist,
    })
}

/// Summary of an [`ObserverRun`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport<T> {
    /// Start of the post-transient window, `t_end / 2`.
    pub window_start: T,
    pub max_err_state: T,
    pub window_max_err_state: T,
    /// Trapezoidal time average of `err_state` over the window.
    pub window_mean_err_state: T,
    pub max_err_z: T,
    pub max_hull_dist: T,
}

fn max_of<T: Real>(v: impl Iterator<Item = T>) -> T {
    v.fold(T::zero(), T::max)
}

/// Trapezoidal mean of `values` over samples with `t >= start`.
fn window_mean<T: Real>(t: &[T], values: ArrayView1<'_, T>, start: T) -> T {
    let idx: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= start).collect();
    match idx.len() {
        0 => T::zero(),
        1 => values[idx[0]],
        _ => {
            let half = T::lit(0.5);
            let area: T = idx
                .windows(2)
                .map(|w| (t[w[1]] - t[w[0]]) * half * (values[w[0]] + values[w[1]]))
                .sum();
            area / (t[idx[idx.len() - 1]] - t[idx[0]])
        }
    }
}

pub fn error_report<T: Real>(run: &ObserverRun<T>) -> ErrorReport<T> {
    let t_end = run.t.last().copied().unwrap_or_else(T::zero);
    let start = t_end * T::lit(0.5);
    let in_window = |k: usize| run.t[k] >= start;
    ErrorReport {
        window_start: start,
        max_err_state: max_of(run.err_state.iter().copied()),
        window_max_err_state: max_of((0..run.t.len()).filter(|&k| in_window(k)).map(|k| run.err_state[k])),
        window_mean_err_state: window_mean(&run.t, run.err_state.view(), start),
        max_err_z: max_of(run.err_z.iter().copied()),
        max_hull_dist: max_of(run.hull_dist.iter().copied()),
    }
}

/// Least-squares slope of `ln(values)` against `t`.
pub fn log_linear_slope<T: Real>(t: &[T], values: &[T]) -> T {
    let n = T::from_usize_lossy(t.len());
    let logs: Vec<T> = values.iter().map(|v| v.ln()).collect();
    let tm = t.iter().copied().sum::<T>() / n;
    let lm = logs.iter().copied().sum::<T>() / n;
    let cov: T = t.iter().zip(&logs).map(|(&a, &b)| (a - tm) * (b - lm)).sum();
    let var: T = t.iter().map(|&a| (a - tm) * (a - tm)).sum();
    cov / var
}

fn fmt_num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Writes the run as CSV:
/// `t, x1..xn, y, z1..zm, Tx1..Txm, xhat1..xhatn, err_state, err_z, hull_dist`.
pub fn write_run<T: Real, W: Write>(run: &ObserverRun<T>, mut w: W) -> std::io::Result<()> {
    let n_x = run.x_true.ncols();
    let n_z = run.z.ncols();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n_x).map(|i| format!("x{i}")));
    header.push("y".into());
    header.extend((1..=n_z).map(|j| format!("z{j}")));
    header.extend((1..=n_z).map(|j| format!("Tx{j}")));
    header.extend((1..=n_x).map(|i| format!("xhat{i}")));
    header.extend(["err_state", "err_z", "hull_dist"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for k in 0..run.t.len() {
        let mut fields = vec![fmt_num(run.t[k])];
        fields.extend(run.x_true.row(k).iter().map(|&v| fmt_num(v)));
        fields.push(fmt_num(run.y[k]));
        fields.extend(run.z.row(k).iter().map(|&v| fmt_num(v)));
        fields.extend(run.t_of_x.row(k).iter().map(|&v| fmt_num(v)));
        fields.extend(run.x_hat.row(k).iter().map(|&v| fmt_num(v)));
        fields.push(fmt_num(run.err_state[k]));
        fields.push(fmt_num(run.err_z[k]));
        fields.push(fmt_num(run.hull_dist[k]));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn save_run<T: Real>(run: &ObserverRun<T>, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_run(run, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FnField;
    use ndarray::array;

    #[test]
    fn zero_input_decays() {
        let z = observer_step(&[2.0, -1.0], 0.0, &[0.5, 0.25], 0.1);
        assert_eq!(z, vec![2.0 * (-0.05f64).exp(), -(-0.025f64).exp()]);
    }

    #[test]
    fn constant_input_converges_to_ratio() {
        let mut z: Vec<f64> = vec![0.0, 5.0];
        for _ in 0..2000 {
            z = observer_step(&z, 1.5, &[0.5, 0.25], 0.1);
        }
        assert!((z[0] - 3.0).abs() < 1e-12 && (z[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn step_example_values() {
        let z: Vec<f64> = observer_step(&[1.0, 1.0], 1.0, &[0.5, 0.25], 0.1);
        assert!((z[0] - 1.04877).abs() < 1e-5, "{}", z[0]);
        // e^{-0.025} + (1 - e^{-0.025}) / 0.25 = 1.0740703
        assert!((z[1] - 1.07407).abs() < 1e-5, "{}", z[1]);
        let exact0 = (-0.05f64).exp() + (1.0 - (-0.05f64).exp()) / 0.5;
        assert_eq!(z[0], exact0);
    }

    #[test]
    fn composed_steps_match_closed_form() {
        let lambdas = [0.5, 0.25];
        let (dt, c, k) = (0.1, 0.7, 137);
        let mut z = vec![3.0, -2.0];
        for _ in 0..k {
            z = observer_step(&z, c, &lambdas, dt);
        }
        let t = dt * k as f64;
        for (j, &lambda) in lambdas.iter().enumerate() {
            let z0 = [3.0, -2.0][j];
            let exact = c / lambda + (z0 - c / lambda) * (-lambda * t).exp();
            assert!((z[j] - exact).abs() < 1e-13, "{} vs {exact}", z[j]);
        }
    }

    #[test]
    fn homogeneous_error_contracts() {
        let lambdas = [0.5, 0.25];
        let dt = 0.1;
        let ys = Array1::from_shape_fn(201, |k| (0.3 * k as f64).sin() * 2.0 + 1.0);
        let a = filter_response(&[1.0, 1.0], ys.view(), &lambdas, dt);
        let b = filter_response(&[0.0, 0.0], ys.view(), &lambdas, dt);
        let t: Vec<f64> = (0..201).map(|k| k as f64 * dt).collect();
        let diff: Vec<f64> = (0..201)
            .map(|k| ((a[[k, 0]] - b[[k, 0]]).powi(2) + (a[[k, 1]] - b[[k, 1]]).powi(2)).sqrt())
            .collect();
        for k in 0..201 {
            assert!(diff[k] <= 2f64.sqrt() * (-0.25 * t[k]).exp() + 1e-12);
        }
        let slope = log_linear_slope(&t, &diff);
        assert!((slope / -0.25 - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn report_examples() {
        let t: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let zeros = Array1::zeros(11);
        let run = ObserverRun {
            t: t.clone(),
            x_true: Array2::zeros((11, 2)),
            y: zeros.clone(),
            z: Array2::zeros((11, 2)),
            t_of_x: Array2::zeros((11, 2)),
            t_of_xhat: Array2::zeros((11, 2)),
            x_hat: Array2::zeros((11, 2)),
            err_state: zeros.clone(),
            err_z: zeros.clone(),
            hull_dist: zeros.clone(),
        };
        let r = error_report(&run);
        assert_eq!(
            (r.max_err_state, r.window_mean_err_state, r.max_err_z, r.max_hull_dist),
            (0.0, 0.0, 0.0, 0.0)
        );

        let linear = Array1::from_shape_fn(11, |k| 10.0 - k as f64);
        let run = ObserverRun {
            err_state: linear,
            ..run
        };
        let r = error_report(&run);
        assert_eq!(r.window_start, 5.0);
        assert!((r.window_mean_err_state - 2.5).abs() < 1e-15);
        assert!(r.max_err_state >= r.window_max_err_state);
        assert_eq!(r.window_max_err_state, 5.0);
    }

    /// Linear plant `x' = -x`, `h(x) = x`, with the transform `T_j(x) = c_j x`.
    struct LinearOracle {
        lambdas: Vec<f64>,
        gains: Vec<f64>,
    }

    impl LinearOracle {
        /// `T_j = x / (lambda_j - 1)`, the solution of the continuous PDE.
        fn continuous(lambdas: &[f64]) -> Self {
            Self {
                lambdas: lambdas.to_vec(),
                gains: lambdas.iter().map(|l| 1.0 / (l - 1.0)).collect(),
            }
        }

        /// Gains for which `T(x_{k+1}) = e^{-lambda dt} T(x_k) + (1 - e^{-lambda dt}) / lambda * y_k`
        /// holds exactly along the sampled flow.
        fn sampled(lambdas: &[f64], dt: f64) -> Self {
            let gains = lambdas
                .iter()
                .map(|&l| {
                    let e = (-l * dt).exp();
                    (1.0 - e) / (l * ((-dt).exp() - e))
                })
                .collect();
            Self {
                lambdas: lambdas.to_vec(),
                gains,
            }
        }
    }

    impl Transform<f64> for LinearOracle {
        fn lambdas(&self) -> &[f64] {
            &self.lambdas
        }

        fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((x.nrows(), self.gains.len()), |(i, j)| self.gains[j] * x[[i, 0]]))
        }
    }

    impl InverseMap<f64> for LinearOracle {
        fn recover(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
            Ok(Array2::from_shape_fn((z.nrows(), 1), |(i, _)| z[[i, 0]] / self.gains[0]))
        }

        fn support_distance(&self, z: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
            Ok(Array1::zeros(z.nrows()))
        }
    }

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64]) + Send + Sync> {
        FnField::new("decay", 1, |x: &[f64], dx: &mut [f64]| dx[0] = -x[0])
    }

    #[test]
    fn sampled_exact_transform_keeps_err_z_zero() {
        let lambdas = [0.5, 0.25];
        let oracle = LinearOracle::sampled(&lambdas, 0.1);
        let cfg = ObserverConfig {
            lambdas: lambdas.to_vec(),
            x0_true: vec![1.5],
            x0_hat: vec![1.5],
            duration: 10.0,
            dt: 0.1,
        };
        let integ = IntegratorConfig { substep: 0.001 };
        let run = run_observer(&decay(), &OutputMap::default(), &oracle, &oracle, &cfg, &integ).unwrap();
        assert_eq!(run.err_z[0], 0.0);
        // residual is the RK4 error in x(t), not the filter
        assert!(run.err_z.iter().all(|&e| e < 1e-6), "{:?}", run.err_z.iter().fold(0.0f64, |a, &b| a.max(b)));
    }

    #[test]
    fn continuous_transform_shows_only_hold_bias() {
        let lambdas = [0.5, 0.25];
        let oracle = LinearOracle::continuous(&lambdas);
        let cfg = ObserverConfig {
            lambdas: lambdas.to_vec(),
            x0_true: vec![1.5],
            x0_hat: vec![1.5],
            duration: 10.0,
            dt: 0.1,
        };
        let run = run_observer(&decay(), &OutputMap::default(), &oracle, &oracle, &cfg, &Default::default()).unwrap();
        assert_eq!(run.err_z[0], 0.0);
        // zero-order hold lags y by dt/2; |y'| <= 1.5 and 1/lambda <= 4
        assert!(run.err_z.iter().all(|&e| e < 0.05 * 1.5 * 4.0));
    }

    #[test]
    fn continuous_transform_satisfies_flow_pde() {
        // dT/dt along the flow equals -lambda T + y; derivative by central differences on a fine grid
        let lambdas = [0.5, 0.25];
        let oracle = LinearOracle::continuous(&lambdas);
        let h = 1e-3;
        let traj = integrate(&decay(), &[1.7], 5.0, h, &IntegratorConfig { substep: h }).unwrap();
        let t = oracle.transform(traj.states.view()).unwrap();
        let mut sq = 0.0;
        let mut n = 0;
        for k in 1..traj.len() - 1 {
            for j in 0..2 {
                let dtdt = (t[[k + 1, j]] - t[[k - 1, j]]) / (2.0 * h);
                let rhs = -lambdas[j] * t[[k, j]] + traj.states[[k, 0]];
                sq += (dtdt - rhs).powi(2);
                n += 1;
            }
        }
        assert!((sq / n as f64).sqrt() < 1e-6);
    }

    #[test]
    fn mismatched_rates_rejected() {
        let oracle = LinearOracle::continuous(&[0.5]);
        let cfg = ObserverConfig {
            lambdas: vec![0.4],
            x0_true: vec![1.0],
            x0_hat: vec![1.0],
            duration: 1.0,
            dt: 0.1,
        };
        let r = run_observer(&decay(), &OutputMap::default(), &oracle, &oracle, &cfg, &Default::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn run_csv_header() {
        let run = ObserverRun {
            t: vec![0.0],
            x_true: array![[1.0, 2.0]],
            y: array![1.0],
            z: array![[0.1, 0.2]],
            t_of_x: array![[0.1, 0.2]],
            t_of_xhat: array![[0.1, 0.2]],
            x_hat: array![[1.0, 2.0]],
            err_state: array![0.0],
            err_z: array![0.0],
            hull_dist: array![0.0],
        };
        let mut buf = Vec::new();
        write_run(&run, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,x1,x2,y,z1,z2,Tx1,Tx2,xhat1,xhat2,err_state,err_z,hull_dist"
        );
        assert_eq!(text.lines().count(), 2);
    }
}
