//! Continuous-time vector fields, fixed-step RK4 integration and a
//! limit-cycle period probe.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Autonomous right-hand side `x' = f(x)`.
///
/// Implementations must be deterministic: the same input yields the same
/// output bit for bit.
pub trait VectorField<T: Real>: Send + Sync {
    /// State dimension.
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `dx`. Both slices have length [`dim`](Self::dim).
    fn eval(&self, x: &[T], dx: &mut [T]);

    fn name(&self) -> &str;

    /// Named parameters, for reporting.
    fn params(&self) -> Vec<(String, T)> {
        Vec::new()
    }
}

/// Brusselator right-hand side.
pub fn brusselator_rhs<T: Real>(x: [T; 2], a: T, b: T) -> [T; 2] {
    let x1sq_x2 = x[0] * x[0] * x[1];
    [a + x1sq_x2 - (b + T::one()) * x[0], b * x[0] - x1sq_x2]
}

/// The Brusselator chemical oscillator; equilibrium at `(a, b / a)` and a
/// stable limit cycle whenever `b > 1 + a^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brusselator<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Brusselator<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    pub fn equilibrium(&self) -> [T; 2] {
        [self.a, self.b / self.a]
    }
}

impl<T: Real> Default for Brusselator<T> {
    fn default() -> Self {
        Self::new(T::one(), T::lit(3.0))
    }
}

impl<T: Real> VectorField<T> for Brusselator<T> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let f = brusselator_rhs([x[0], x[1]], self.a, self.b);
        dx.copy_from_slice(&f);
    }

    fn name(&self) -> &str {
        "brusselator"
    }

    fn params(&self) -> Vec<(String, T)> {
        vec![("a".into(), self.a), ("b".into(), self.b)]
    }
}

/// A vector field backed by a closure.
pub struct FnField<F> {
    name: String,
    dim: usize,
    rhs: F,
}

impl<F> FnField<F> {
    pub fn new(name: impl Into<String>, dim: usize, rhs: F) -> Self {
        Self {
            name: name.into(),
            dim,
            rhs,
        }
    }
}

impl<T, F> VectorField<T> for FnField<F>
where
    T: Real,
    F: Fn(&[T], &mut [T]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        (self.rhs)(x, dx)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

pub type FieldConstructor<T> = fn(&BTreeMap<String, T>) -> Result<Box<dyn VectorField<T>>>;

/// Name-indexed collection of vector-field constructors, used to resolve the
/// `system.name` entry of a pipeline configuration.
pub struct FieldRegistry<T: Real> {
    ctors: BTreeMap<String, FieldConstructor<T>>,
}

impl<T: Real> FieldRegistry<T> {
    pub fn empty() -> Self {
        Self {
            ctors: BTreeMap::new(),
        }
    }

    /// Registry with the built-in systems (`brusselator`).
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("brusselator", |params| {
            let mut sys = Brusselator::<T>::default();
            for (key, &value) in params {
                match key.as_str() {
                    "a" => sys.a = value,
                    "b" => sys.b = value,
                    other => {
                        return Err(Error::Precondition(format!(
                            "unknown brusselator parameter `{other}`"
                        )))
                    }
                }
            }
            Ok(Box::new(sys))
        });
        reg
    }

    pub fn register(&mut self, name: &str, ctor: FieldConstructor<T>) {
        self.ctors.insert(name.to_owned(), ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ctors.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &BTreeMap<String, T>) -> Result<Box<dyn VectorField<T>>> {
        let ctor = self
            .ctors
            .get(name)
            .ok_or_else(|| Error::Precondition(format!("unknown system `{name}`")))?;
        ctor(params)
    }
}

/// Scalar measurement `y = h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputMap<T> {
    /// `h(x) = x[i]` (zero-based).
    Coordinate(usize),
    /// `h(x) = c . x`.
    Linear(Vec<T>),
}

impl<T> Default for OutputMap<T> {
    fn default() -> Self {
        OutputMap::Coordinate(0)
    }
}

impl<T: Real> OutputMap<T> {
    pub fn eval(&self, x: &[T]) -> T {
        match self {
            OutputMap::Coordinate(i) => x[*i],
            OutputMap::Linear(c) => c.iter().zip(x).map(|(&ci, &xi)| ci * xi).sum(),
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            OutputMap::Coordinate(i) if *i >= dim => Err(Error::Dimension(format!(
                "output coordinate {i} out of range for state dimension {dim}"
            ))),
            OutputMap::Linear(c) if c.len() != dim => Err(Error::Dimension(format!(
                "output functional has {} weights, state dimension is {dim}",
                c.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    /// Requested internal step. Adjusted downward so it divides the sampling
    /// interval exactly.
    pub substep: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            substep: T::lit(0.01),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    /// Number of RK4 steps per sample interval and the resulting step size.
    pub fn substeps(&self, dt: T) -> (usize, T) {
        let ratio = dt / self.substep;
        let slack = T::lit(1e-12);
        let n = (ratio * (T::one() - slack)).ceil().to_usize().unwrap_or(1).max(1);
        (n, dt / T::from_usize_lossy(n))
    }
}

/// Uniformly sampled solution `x(0), x(dt), ..., x(duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// One row per sample.
    pub states: Array2<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

struct Rk4Scratch<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Real> Rk4Scratch<T> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![T::zero(); n],
            k2: vec![T::zero(); n],
            k3: vec![T::zero(); n],
            k4: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }
}

fn rk4_step<T: Real, F: VectorField<T> + ?Sized>(field: &F, x: &mut [T], h: T, s: &mut Rk4Scratch<T>) {
    let half = h * T::lit(0.5);
    let n = x.len();
    field.eval(x, &mut s.k1);
    for i in 0..n {
        s.tmp[i] = x[i] + half * s.k1[i];
    }
    field.eval(&s.tmp, &mut s.k2);
    for i in 0..n {
        s.tmp[i] = x[i] + half * s.k2[i];
    }
    field.eval(&s.tmp, &mut s.k3);
    for i in 0..n {
        s.tmp[i] = x[i] + h * s.k3[i];
    }
    field.eval(&s.tmp, &mut s.k4);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    for i in 0..n {
        x[i] += sixth * (s.k1[i] + two * s.k2[i] + two * s.k3[i] + s.k4[i]);
    }
}

/// Advances `x` in place by `n_steps` RK4 steps of size `h`, failing on the
/// first non-finite state. `t0` is only used for error reporting.
pub(crate) fn advance<T: Real, F: VectorField<T> + ?Sized>(
    field: &F,
    x: &mut [T],
    h: T,
    n_steps: usize,
    t0: T,
) -> Result<()> {
    let mut scratch = Rk4Scratch::new(x.len());
    for step in 0..n_steps {
        rk4_step(field, x, h, &mut scratch);
        if x.iter().any(|v| !v.is_finite()) {
            let t = t0 + h * T::from_usize_lossy(step + 1);
            return Err(Error::IntegrationDiverged { time: t.as_f64() });
        }
    }
    Ok(())
}

/// Number of sample intervals in `duration`, requiring `duration / dt` to be
/// an integer to within `1e-9`.
pub(crate) fn sample_count<T: Real>(duration: T, dt: T) -> Result<usize> {
    if !(duration > T::zero()) || !(dt > T::zero()) {
        return Err(Error::Precondition(format!(
            "duration ({duration}) and dt ({dt}) must be positive"
        )));
    }
    let ratio = duration / dt;
    let n = ratio.round();
    if (ratio - n).abs() > T::lit(1e-9) {
        return Err(Error::Precondition(format!(
            "duration {duration} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(n.to_usize().unwrap_or(0))
}

/// Integrates `field` from `x0`, returning the samples at `k * dt` for
/// `k = 0..=duration/dt`. The first row equals `x0` exactly.
pub fn integrate<T: Real, F: VectorField<T> + ?Sized>(
    field: &F,
    x0: &[T],
    duration: T,
    dt: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let dim = field.dim();
    if x0.len() != dim {
        return Err(Error::Dimension(format!(
            "initial state has length {}, field dimension is {dim}",
            x0.len()
        )));
    }
    let intervals = sample_count(duration, dt)?;
    let (n_sub, h) = cfg.substeps(dt);

    let mut states = Array2::zeros((intervals + 1, dim));
    let mut times = Vec::with_capacity(intervals + 1);
    let mut x = x0.to_vec();
    states.row_mut(0).iter_mut().zip(&x).for_each(|(s, &v)| *s = v);
    times.push(T::zero());
    for k in 1..=intervals {
        let t_prev = dt * T::from_usize_lossy(k - 1);
        advance(field, &mut x, h, n_sub, t_prev)?;
        states.row_mut(k).iter_mut().zip(&x).for_each(|(s, &v)| *s = v);
        times.push(dt * T::from_usize_lossy(k));
    }
    Ok(Trajectory { times, states })
}

/// Mean spacing of successive local maxima of the first coordinate after
/// `settle_time`, sampled at the integrator's substep and refined by a
/// parabola through each maximum and its two neighbours.
pub fn estimate_period<T: Real, F: VectorField<T> + ?Sized>(
    field: &F,
    probe_x0: &[T],
    settle_time: T,
    observe_time: T,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    if probe_x0.len() != field.dim() {
        return Err(Error::Dimension(format!(
            "probe state has length {}, field dimension is {}",
            probe_x0.len(),
            field.dim()
        )));
    }
    if settle_time < T::zero() || !(observe_time > T::zero()) {
        return Err(Error::Precondition(
            "settle_time must be >= 0 and observe_time > 0".into(),
        ));
    }
    let h = cfg.substep;
    let total = settle_time + observe_time;
    let n_steps = (total / h).ceil().to_usize().unwrap_or(0);

    let mut x = probe_x0.to_vec();
    let mut series = Vec::with_capacity(n_steps + 1);
    series.push(x[0]);
    for step in 0..n_steps {
        advance(field, &mut x, h, 1, h * T::from_usize_lossy(step))?;
        series.push(x[0]);
    }

    let half = T::lit(0.5);
    let mut peaks = Vec::new();
    for i in 1..series.len() - 1 {
        let t = h * T::from_usize_lossy(i);
        if t <= settle_time {
            continue;
        }
        let (prev, cur, next) = (series[i - 1], series[i], series[i + 1]);
        if cur > prev && cur >= next {
            let curvature = prev - cur - cur + next;
            let offset = if curvature < T::zero() {
                half * (prev - next) / curvature
            } else {
                T::zero()
            };
            peaks.push(t + offset * h);
        }
    }
    if peaks.len() < 3 {
        return Err(Error::PeriodUndetected { maxima: peaks.len() });
    }
    let span = peaks[peaks.len() - 1] - peaks[0];
    Ok(span / T::from_usize_lossy(peaks.len() - 1))
}
