//! Training ensembles: snapshot pairs from filtered random trajectories,
//! scattered states for the inverse map, and their CSV persistence.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{integrate, IntegratorConfig, OutputMap, VectorField};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_MAX_ATTEMPTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Comparison {
    fn holds<T: Real>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparison::Ge => lhs >= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Lt => lhs < rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
            Comparison::Le => "<=",
            Comparison::Lt => "<",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            ">=" => Comparison::Ge,
            ">" => Comparison::Gt,
            "<=" => Comparison::Le,
            "<" => Comparison::Lt,
            _ => return None,
        })
    }
}

/// Inequality predicate on a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter<T> {
    /// `weights . x  <cmp>  bound`
    Affine {
        weights: Vec<T>,
        cmp: Comparison,
        bound: T,
    },
    /// `|x - center|_2  <cmp>  radius`
    Distance {
        center: Vec<T>,
        cmp: Comparison,
        radius: T,
    },
}

impl<T: Real> Filter<T> {
    /// `x[index] <cmp> bound` in a `dim`-dimensional state.
    pub fn coordinate(dim: usize, index: usize, cmp: Comparison, bound: T) -> Self {
        let mut weights = vec![T::zero(); dim];
        weights[index] = T::one();
        Filter::Affine { weights, cmp, bound }
    }

    pub fn accepts(&self, x: &[T]) -> bool {
        match self {
            Filter::Affine { weights, cmp, bound } => {
                let lhs: T = weights.iter().zip(x).map(|(&w, &v)| w * v).sum();
                cmp.holds(lhs, *bound)
            }
            Filter::Distance { center, cmp, radius } => {
                let d2: T = center.iter().zip(x).map(|(&c, &v)| (v - c) * (v - c)).sum();
                cmp.holds(d2.sqrt(), *radius)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Filter::Affine { weights, .. } => weights.len(),
            Filter::Distance { center, .. } => center.len(),
        }
    }
}

impl<T: Real> fmt::Display for Filter<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Filter::Affine { weights, cmp, bound } => {
                let mut first = true;
                for (i, w) in weights.iter().enumerate() {
                    if w.is_zero() {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    if *w != T::one() {
                        write!(f, "{w}*")?;
                    }
                    write!(f, "x{}", i + 1)?;
                    first = false;
                }
                if first {
                    write!(f, "0")?;
                }
                write!(f, " {} {bound}", cmp.symbol())
            }
            Filter::Distance { center, cmp, radius } => {
                let c: Vec<String> = center.iter().map(|v| v.to_string()).collect();
                write!(f, "|x - ({})| {} {radius}", c.join(", "), cmp.symbol())
            }
        }
    }
}

impl<T: Real> Filter<T> {
    /// Parses the textual form produced by `Display`, e.g. `x1 >= 0.2`,
    /// `x1 + 2*x2 <= 7` or `|x - (1, 3)| >= 0.5`, for a `dim`-dimensional state.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let bad = |why: &str| Error::Schema(format!("filter `{text}`: {why}"));
        let (pos, cmp) = ["<=", ">=", "<", ">"]
            .iter()
            .filter_map(|op| text.find(op).map(|p| (p, *op)))
            .min_by_key(|&(p, op)| (p, std::cmp::Reverse(op.len())))
            .ok_or_else(|| bad("missing comparison"))?;
        let lhs = text[..pos].trim();
        let rhs: f64 = text[pos + cmp.len()..]
            .trim()
            .parse()
            .map_err(|_| bad("right-hand side is not a number"))?;
        let cmp = Comparison::parse(cmp).expect("listed operator");

        if let Some(inner) = lhs.strip_prefix('|').and_then(|r| r.strip_suffix('|')) {
            let center = inner
                .trim()
                .strip_prefix('x')
                .map(str::trim_start)
                .and_then(|r| r.strip_prefix('-'))
                .map(str::trim)
                .and_then(|r| r.strip_prefix('(')?.strip_suffix(')'))
                .ok_or_else(|| bad("expected |x - (c1, ..)|"))?;
            let center = center
                .split(',')
                .map(|c| c.trim().parse::<f64>().map(T::lit))
                .collect::<std::result::Result<Vec<T>, _>>()
                .map_err(|_| bad("center is not numeric"))?;
            if center.len() != dim {
                return Err(bad(&format!("center has {} entries, state has {dim}", center.len())));
            }
            return Ok(Filter::Distance {
                center,
                cmp,
                radius: T::lit(rhs),
            });
        }

        let compact: String = lhs.chars().filter(|c| !c.is_whitespace()).collect();
        let mut terms = Vec::new();
        let mut cur = String::new();
        for ch in compact.chars() {
            let splits = (ch == '+' || ch == '-')
                && cur.chars().any(|c| c != '+' && c != '-')
                && !cur.ends_with(['e', 'E', '*']);
            if splits {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);

        let mut weights = vec![T::zero(); dim];
        let mut bound = T::lit(rhs);
        for term in &terms {
            let body = term.trim_start_matches(['+', '-']);
            let negative = term[..term.len() - body.len()].matches('-').count() % 2 == 1;
            let sign = if negative { -T::one() } else { T::one() };
            let (coef, var) = match body.rsplit_once('*') {
                Some((c, v)) => (c.parse::<f64>().map_err(|_| bad("bad coefficient"))?, v),
                None if body.starts_with('x') => (1.0, body),
                None => {
                    let c: f64 = body.parse().map_err(|_| bad("bad term"))?;
                    bound -= sign * T::lit(c);
                    continue;
                }
            };
            let index: usize = var
                .strip_prefix('x')
                .and_then(|i| i.parse().ok())
                .filter(|&i| (1..=dim).contains(&i))
                .ok_or_else(|| bad(&format!("unknown variable `{var}`")))?;
            weights[index - 1] += sign * T::lit(coef);
        }
        Ok(Filter::Affine { weights, cmp, bound })
    }
}

/// The four initial-state filters used for Brusselator trajectory data,
/// relative to the equilibrium `eq`.
pub fn brusselator_trajectory_filters<T: Real>(eq: [T; 2]) -> Vec<Filter<T>> {
    vec![
        Filter::coordinate(2, 0, Comparison::Ge, T::lit(0.2)),
        Filter::coordinate(2, 1, Comparison::Ge, T::lit(0.1)),
        Filter::Distance {
            center: eq.to_vec(),
            cmp: Comparison::Ge,
            radius: T::lit(0.5),
        },
        Filter::Affine {
            weights: vec![T::one(), T::one()],
            cmp: Comparison::Le,
            bound: T::lit(7.0),
        },
    ]
}

/// Strict positivity margins used for the scattered inverse-map data.
pub fn brusselator_scatter_filters<T: Real>() -> Vec<Filter<T>> {
    vec![
        Filter::coordinate(2, 0, Comparison::Gt, T::lit(0.2)),
        Filter::coordinate(2, 1, Comparison::Gt, T::lit(0.1)),
    ]
}

/// Isotropic normal draws rejected against a filter set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSampler<T> {
    pub mean: Vec<T>,
    pub std: T,
    pub filters: Vec<Filter<T>>,
    pub seed: u64,
    pub max_attempts: usize,
}

impl<T: Real> NormalSampler<T> {
    /// Draw number `index`. Each index owns an independent ChaCha stream, so
    /// draws are reproducible and independent of evaluation order.
    pub fn draw(&self, index: u64) -> Result<Vec<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let dim = self.mean.len();
        let mut rejections = vec![0usize; self.filters.len()];
        let mut x = vec![T::zero(); dim];
        for _ in 0..self.max_attempts {
            for (xi, &mi) in x.iter_mut().zip(&self.mean) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = mi + self.std * T::lit(z);
            }
            match self.filters.iter().position(|f| !f.accepts(&x)) {
                None => return Ok(x),
                Some(k) => rejections[k] += 1,
            }
        }
        let worst = rejections
            .iter()
            .enumerate()
            .max_by_key(|&(_, &count)| count)
            .map(|(k, _)| self.filters[k].to_string())
            .unwrap_or_else(|| "<none>".into());
        Err(Error::SamplingStarved {
            attempts: self.max_attempts,
            filter: worst,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.mean.is_empty() {
            return Err(Error::Precondition("sampling mean is empty".into()));
        }
        if !(self.std >= T::zero()) {
            return Err(Error::Precondition(format!("sampling std must be >= 0, got {}", self.std)));
        }
        if self.max_attempts == 0 {
            return Err(Error::Precondition("max_attempts must be positive".into()));
        }
        if let Some(f) = self.filters.iter().find(|f| f.dim() != self.mean.len()) {
            return Err(Error::Dimension(format!(
                "filter `{f}` has dimension {}, state has {}",
                f.dim(),
                self.mean.len()
            )));
        }
        Ok(())
    }
}

/// How to build the trajectory ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec<T> {
    pub n_traj: usize,
    pub duration: T,
    pub dt: T,
    pub init_mean: Vec<T>,
    pub init_std: T,
    /// Applied to initial states only.
    pub filters: Vec<Filter<T>>,
    pub seed: u64,
    pub max_attempts: usize,
}

impl<T: Real> SamplingSpec<T> {
    pub fn sampler(&self) -> NormalSampler<T> {
        NormalSampler {
            mean: self.init_mean.clone(),
            std: self.init_std,
            filters: self.filters.clone(),
            seed: self.seed,
            max_attempts: self.max_attempts,
        }
    }
}

/// Snapshot pairs `(x_i, x_i^+)` with `x_i^+` the flow of `x_i` after `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPairs<T> {
    pub dt: T,
    pub x: Array2<T>,
    pub x_plus: Array2<T>,
    /// `h(x_i)`.
    pub y: Array1<T>,
    pub traj_id: Vec<usize>,
    /// Sample index of `x_i` within its trajectory.
    pub step: Vec<usize>,
}

impl<T: Real> SnapshotPairs<T> {
    pub fn new(
        dt: T,
        x: Array2<T>,
        x_plus: Array2<T>,
        y: Array1<T>,
        traj_id: Vec<usize>,
        step: Vec<usize>,
    ) -> Result<Self> {
        let d = x.nrows();
        if x.dim() != x_plus.dim() {
            return Err(Error::Dimension(format!("x is {:?} but x_plus is {:?}", x.dim(), x_plus.dim())));
        }
        if y.len() != d || traj_id.len() != d || step.len() != d {
            return Err(Error::Dimension("pair metadata length differs from row count".into()));
        }
        if d == 0 {
            return Err(Error::Precondition("snapshot pairs need at least one row".into()));
        }
        if !(dt > T::zero()) {
            return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
        }
        if x.iter().chain(x_plus.iter()).chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("snapshot pairs contain non-finite values".into()));
        }
        Ok(Self {
            dt,
            x,
            x_plus,
            y,
            traj_id,
            step,
        })
    }

    /// Builds pairs from samples of a single trajectory.
    pub fn from_trajectory(states: ArrayView2<'_, T>, dt: T, out: &OutputMap<T>) -> Result<Self> {
        let n = states.nrows();
        if n < 2 {
            return Err(Error::Precondition("a trajectory needs at least two samples".into()));
        }
        let x = states.slice(ndarray::s![..n - 1, ..]).to_owned();
        let x_plus = states.slice(ndarray::s![1.., ..]).to_owned();
        let y = x.rows().into_iter().map(|r| out.eval(r.as_slice().expect("row-major"))).collect();
        Self::new(dt, x, x_plus, y, vec![0; n - 1], (0..n - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_x(&self) -> usize {
        self.x.ncols()
    }

    /// Rows with `step == 0`, i.e. the sampled initial states.
    pub fn initial_states(&self) -> Array2<T> {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| self.step[i] == 0).collect();
        self.x.select(ndarray::Axis(0), &rows)
    }
}

/// Draws initial states, integrates each trajectory and stacks the
/// per-trajectory `(X_i, X_i^+)` blocks in trajectory order.
pub fn generate_pairs<T: Real, F: VectorField<T> + ?Sized>(
    field: &F,
    out: &OutputMap<T>,
    spec: &SamplingSpec<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<SnapshotPairs<T>> {
    let sampler = spec.sampler();
    sampler.validate()?;
    if spec.n_traj == 0 {
        return Err(Error::Precondition("n_traj must be positive".into()));
    }
    if spec.init_mean.len() != field.dim() {
        return Err(Error::Dimension(format!(
            "sampling mean has length {}, field dimension is {}",
            spec.init_mean.len(),
            field.dim()
        )));
    }
    out.check_dim(field.dim())?;

    let blocks: Vec<Result<Array2<T>>> = (0..spec.n_traj)
        .into_par_iter()
        .map(|k| {
            let x0 = sampler.draw(k as u64)?;
            Ok(integrate(field, &x0, spec.duration, spec.dt, cfg)?.states)
        })
        .collect();

    let n_x = field.dim();
    let per_traj = crate::dynamics::sample_count(spec.duration, spec.dt)?;
    let d = per_traj * spec.n_traj;
    let mut x = Array2::zeros((d, n_x));
    let mut x_plus = Array2::zeros((d, n_x));
    let mut y = Array1::zeros(d);
    let mut traj_id = Vec::with_capacity(d);
    let mut step = Vec::with_capacity(d);
    let mut row = 0;
    for (k, block) in blocks.into_iter().enumerate() {
        let states = block?;
        for s in 0..per_traj {
            x.row_mut(row).assign(&states.row(s));
            x_plus.row_mut(row).assign(&states.row(s + 1));
            y[row] = out.eval(states.row(s).as_slice().expect("row-major"));
            traj_id.push(k);
            step.push(s);
            row += 1;
        }
    }
    SnapshotPairs::new(spec.dt, x, x_plus, y, traj_id, step)
}

/// Filtered i.i.d. normal draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSet<T> {
    pub points: Array2<T>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSpec<T> {
    pub count: usize,
    pub mean: Vec<T>,
    pub std: T,
    pub filters: Vec<Filter<T>>,
    pub seed: u64,
    pub max_attempts: usize,
}

pub fn generate_scatter<T: Real>(spec: &ScatterSpec<T>) -> Result<ScatterSet<T>> {
    let sampler = NormalSampler {
        mean: spec.mean.clone(),
        std: spec.std,
        filters: spec.filters.clone(),
        seed: spec.seed,
        max_attempts: spec.max_attempts,
    };
    sampler.validate()?;
    if spec.count == 0 {
        return Err(Error::Precondition("scatter count must be positive".into()));
    }
    let draws: Vec<Result<Vec<T>>> = (0..spec.count).into_par_iter().map(|i| sampler.draw(i as u64)).collect();
    let n_x = spec.mean.len();
    let mut points = Array2::zeros((spec.count, n_x));
    for (i, draw) in draws.into_iter().enumerate() {
        let p = draw?;
        points.row_mut(i).iter_mut().zip(p).for_each(|(dst, v)| *dst = v);
    }
    Ok(ScatterSet { points, seed: spec.seed })
}

// ---------------------------------------------------------------- CSV

fn fmt_num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn parse_num<T: Real>(s: &str, line: usize) -> Result<T> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number `{}`", s.trim()),
    })?;
    Ok(T::lit(v))
}

fn parse_index(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid index `{}`", s.trim()),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn pairs_header(n_x: usize) -> Vec<String> {
    let mut cols = vec!["traj_id".to_string(), "k".to_string()];
    cols.extend((1..=n_x).map(|i| format!("x{i}")));
    cols.extend((1..=n_x).map(|i| format!("x{i}p")));
    cols.push("y".into());
    cols
}

pub fn write_pairs<T: Real, W: Write>(pairs: &SnapshotPairs<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# dt={}", fmt_num(pairs.dt))?;
    writeln!(w, "{}", pairs_header(pairs.n_x()).join(","))?;
    for i in 0..pairs.len() {
        let mut fields = vec![pairs.traj_id[i].to_string(), pairs.step[i].to_string()];
        fields.extend(pairs.x.row(i).iter().map(|&v| fmt_num(v)));
        fields.extend(pairs.x_plus.row(i).iter().map(|&v| fmt_num(v)));
        fields.push(fmt_num(pairs.y[i]));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Next non-blank line with its 1-based number.
fn next_line<R: BufRead>(lines: &mut std::iter::Enumerate<std::io::Lines<R>>) -> Option<(usize, std::io::Result<String>)> {
    for (i, line) in lines.by_ref() {
        match &line {
            Ok(l) if l.trim().is_empty() => continue,
            _ => return Some((i + 1, line)),
        }
    }
    None
}

pub fn read_pairs<T: Real, R: BufRead>(r: R) -> Result<SnapshotPairs<T>> {
    let mut lines = r.lines().enumerate();
    let read_err = |line: usize, e: std::io::Error| Error::Parse {
        line,
        message: e.to_string(),
    };

    let (ln, first) = next_line(&mut lines).ok_or(Error::Parse {
        line: 1,
        message: "empty file; expected `# dt=<value>`".into(),
    })?;
    let first = first.map_err(|e| read_err(ln, e))?;
    let dt_text = first
        .trim()
        .trim_start_matches('#')
        .trim()
        .strip_prefix("dt=")
        .ok_or_else(|| Error::Parse {
            line: ln,
            message: format!("expected `# dt=<value>`, found `{first}`"),
        })?;
    let dt: T = parse_num(dt_text, ln)?;

    let (ln, header) = next_line(&mut lines).ok_or(Error::Parse {
        line: ln + 1,
        message: "missing column header".into(),
    })?;
    let header = header.map_err(|e| read_err(ln, e))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_x = cols.iter().filter(|c| is_state_col(c)).count();
    if n_x == 0 || cols != pairs_header(n_x).iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Schema(format!(
            "pairs header `{header}` does not match `traj_id,k,x1..xn,x1p..xnp,y`"
        )));
    }
    let width = cols.len();

    let mut x = Vec::new();
    let mut xp = Vec::new();
    let mut y = Vec::new();
    let mut traj_id = Vec::new();
    let mut step = Vec::new();
    while let Some((ln, line)) = next_line(&mut lines) {
        let line = line.map_err(|e| read_err(ln, e))?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Schema(format!(
                "line {ln}: {} fields, header declares {width}",
                fields.len()
            )));
        }
        traj_id.push(parse_index(fields[0], ln)?);
        step.push(parse_index(fields[1], ln)?);
        for f in &fields[2..2 + n_x] {
            x.push(parse_num::<T>(f, ln)?);
        }
        for f in &fields[2 + n_x..2 + 2 * n_x] {
            xp.push(parse_num::<T>(f, ln)?);
        }
        y.push(parse_num::<T>(fields[width - 1], ln)?);
    }
    let d = y.len();
    let shape_err = |e: ndarray::ShapeError| Error::Schema(e.to_string());
    SnapshotPairs::new(
        dt,
        Array2::from_shape_vec((d, n_x), x).map_err(shape_err)?,
        Array2::from_shape_vec((d, n_x), xp).map_err(shape_err)?,
        Array1::from(y),
        traj_id,
        step,
    )
}

fn is_state_col(c: &str) -> bool {
    c.strip_prefix('x')
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

pub fn save_pairs<T: Real>(pairs: &SnapshotPairs<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_pairs(pairs, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn load_pairs<T: Real>(path: &Path) -> Result<SnapshotPairs<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_pairs(BufReader::new(file))
}

pub fn write_scatter<T: Real, W: Write>(points: ArrayView2<'_, T>, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=points.ncols()).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in points.rows() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_scatter<T: Real, R: BufRead>(r: R) -> Result<Array2<T>> {
    let mut lines = r.lines().enumerate();
    let (ln, header) = next_line(&mut lines).ok_or(Error::Parse {
        line: 1,
        message: "empty file; expected header `x1,...,xn`".into(),
    })?;
    let header = header.map_err(|e| Error::Parse {
        line: ln,
        message: e.to_string(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_x = cols.len();
    if cols.iter().enumerate().any(|(i, c)| *c != format!("x{}", i + 1)) {
        return Err(Error::Schema(format!("scatter header `{header}` does not match `x1..xn`")));
    }
    let mut data = Vec::new();
    while let Some((ln, line)) = next_line(&mut lines) {
        let line = line.map_err(|e| Error::Parse {
            line: ln,
            message: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_x {
            return Err(Error::Schema(format!("line {ln}: {} fields, header declares {n_x}", fields.len())));
        }
        for f in fields {
            data.push(parse_num::<T>(f, ln)?);
        }
    }
    let rows = data.len() / n_x;
    if rows == 0 {
        return Err(Error::Schema("scatter file has no rows".into()));
    }
    Array2::from_shape_vec((rows, n_x), data).map_err(|e| Error::Schema(e.to_string()))
}

pub fn save_scatter<T: Real>(points: ArrayView2<'_, T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_scatter(points, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn load_scatter<T: Real>(path: &Path) -> Result<Array2<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_scatter(BufReader::new(file))
}
