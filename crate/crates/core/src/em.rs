//! Expectation-maximization for Gaussian mixtures, the random-projection
//! variant (fit in a random low-dimensional subspace, lift the soft labels,
//! take one high-dimensional step), and the evaluation metrics used to
//! compare them.

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, Mixture};
use crate::linalg::{dist, sq_dist, Matrix};
use crate::projection::ProjectionMatrix;
use crate::random::{child_seed, rng};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceRestriction {
    /// Each component has its own unrestricted covariance.
    FullDistinct,
    /// All components share one full covariance.
    SharedFull,
}

/// Posterior component probabilities, one row per data point.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities<T> {
    matrix: Matrix<T>,
}

impl<T: Scalar> Responsibilities<T> {
    /// Checks that every entry lies in `[0, 1]` and each row sums to one
    /// within `1e-12`.
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        for (r, row) in matrix.rows_iter().enumerate() {
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::ShapeMismatch(format!(
                    "responsibility row {r} has entries outside [0, 1]"
                )));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::ShapeMismatch(format!(
                    "responsibility row {r} sums to {s}"
                )));
            }
        }
        Ok(Responsibilities { matrix })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, r: usize) -> &[T] {
        self.matrix.row(r)
    }

    /// Hard labels: the most responsible component of each point.
    pub fn argmax(&self) -> Vec<usize> {
        self.matrix
            .rows_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |best, (i, &p)| {
                        if p > best.1 {
                            (i, p)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Stop when the relative train log-likelihood improvement drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional ridge: adds `ridge * trace(Σ)/n * I` to every covariance
    /// estimate. Zero disables it.
    pub ridge: f64,
    /// How many times an emptied component may be re-seeded before the run
    /// fails.
    pub max_rescues: usize,
    /// Extra high-dimensional EM iterations after the lifted step in
    /// [`rp_em`]. Zero reproduces the single-step procedure.
    pub extra_high_steps: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-5,
            max_iter: 500,
            ridge: 0.0,
            max_rescues: 2,
            extra_high_steps: 0,
        }
    }
}

/// Outcome of an EM run.
#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub model: Mixture<T>,
    /// Number of M-steps performed.
    pub iterations: usize,
    /// Train log-likelihood of each successive model, starting with the
    /// initial one. Non-decreasing on runs without rescues.
    pub loglik_trace: Vec<T>,
    pub converged: bool,
    /// Times a component lost all mass and was re-seeded.
    pub rescues: usize,
    /// Responsibilities of the final model on the training data.
    pub responsibilities: Responsibilities<T>,
}

impl<T: Scalar> FitResult<T> {
    pub fn final_loglik(&self) -> T {
        *self.loglik_trace.last().expect("trace is never empty")
    }

    /// Log-likelihood trace as a one-column CSV with an `iteration` index.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loglik\n");
        for (i, ll) in self.loglik_trace.iter().enumerate() {
            out.push_str(&format!("{i},{ll}\n"));
        }
        out
    }
}

fn check_fit_inputs<T: Scalar>(data: &Dataset<T>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::BadDims("need at least one component".into()));
    }
    if data.len() < k {
        return Err(Error::NotEnoughData {
            needed: k,
            have: data.len(),
        });
    }
    Ok(())
}

/// Initial model: equal weights, centers drawn without replacement from the
/// data, and spherical covariances with variance
/// `min_{j≠i} ‖μ_j − μ_i‖² / (2n)`. Under [`CovarianceRestriction::SharedFull`]
/// every component gets the smallest of those variances.
///
/// With a single component the variance is the mean per-coordinate data
/// variance instead.
pub fn init_params<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    restriction: CovarianceRestriction,
    seed: u64,
) -> Result<Mixture<T>> {
    check_fit_inputs(data, k)?;
    let n = data.dim();
    let nf = T::from_usize(n).unwrap();
    let mut r = rng(seed);
    let picks = sample_indices(&mut r, data.len(), k).into_vec();
    let centers: Vec<Vec<T>> = picks.iter().map(|&i| data.point(i).to_vec()).collect();

    let mut variances: Vec<T> = if k == 1 {
        vec![data.covariance().trace() / nf]
    } else {
        (0..k)
            .map(|i| {
                let nearest = (0..k)
                    .filter(|&j| j != i)
                    .map(|j| sq_dist(&centers[i], &centers[j]))
                    .fold(T::infinity(), T::min);
                nearest / (T::lit(2.0) * nf)
            })
            .collect()
    };
    if restriction == CovarianceRestriction::SharedFull {
        let smallest = variances.iter().copied().fold(T::infinity(), T::min);
        variances.iter_mut().for_each(|v| *v = smallest);
    }
    if variances.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::DuplicatePoints);
    }
    let kf = T::from_usize(k).unwrap();
    let components = centers
        .into_iter()
        .zip(variances)
        .map(|(c, v)| Gaussian::spherical(c, v))
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(components, vec![T::one() / kf; k])
}

/// Per-point log-densities `log w_i + log N(x | μ_i, Σ_i)`, shape `m x k`.
///
/// Components that share an identical covariance are evaluated by whitening
/// the data once with the shared factor.
pub(crate) fn weighted_log_densities<T: Scalar>(
    model: &Mixture<T>,
    data: &Dataset<T>,
) -> Result<Matrix<T>> {
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    let k = model.k();
    let m = data.len();
    for g in model.components() {
        let cond = g.factor().condition_estimate();
        if !(cond < T::max_condition()) {
            return Err(Error::IllConditioned(cond.to_f64_lossy()));
        }
    }
    // Group components by identical covariance.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..k {
        match groups
            .iter_mut()
            .find(|grp| model.component(grp[0]).covariance() == model.component(i).covariance())
        {
            Some(grp) => grp.push(i),
            None => groups.push(vec![i]),
        }
    }
    let half = T::lit(0.5);
    let mut out = Matrix::zeros(m, k);
    for grp in &groups {
        let factor = model.component(grp[0]).factor();
        let consts: Vec<T> = grp
            .iter()
            .map(|&i| model.weights()[i].ln() + model.component(i).log_norm_const())
            .collect();
        if grp.len() == 1 {
            let i = grp[0];
            let g = model.component(i);
            let mut buf = vec![T::zero(); data.dim()];
            for r in 0..m {
                for ((b, &x), &mu) in buf.iter_mut().zip(data.point(r)).zip(g.mean()) {
                    *b = x - mu;
                }
                factor.solve_lower_in_place(&mut buf);
                out[(r, i)] = consts[0] - half * crate::linalg::dot(&buf, &buf);
            }
        } else {
            let white_means: Vec<Vec<T>> = grp
                .iter()
                .map(|&i| {
                    let mut v = model.component(i).mean().to_vec();
                    factor.solve_lower_in_place(&mut v);
                    v
                })
                .collect();
            let mut buf = vec![T::zero(); data.dim()];
            for r in 0..m {
                buf.copy_from_slice(data.point(r));
                factor.solve_lower_in_place(&mut buf);
                for (slot, &i) in grp.iter().enumerate() {
                    out[(r, i)] = consts[slot] - half * sq_dist(&buf, &white_means[slot]);
                }
            }
        }
    }
    Ok(out)
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let hi = row.iter().copied().fold(T::neg_infinity(), T::max);
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + row.iter().map(|&v| (v - hi).exp()).sum::<T>().ln()
}

/// E-step internals: responsibilities, total log-likelihood, and each point's
/// log mixture density.
fn e_step_detail<T: Scalar>(
    model: &Mixture<T>,
    data: &Dataset<T>,
) -> Result<(Responsibilities<T>, T, Vec<T>)> {
    let mut logp = weighted_log_densities(model, data)?;
    let mut point_ll = Vec::with_capacity(data.len());
    for r in 0..logp.nrows() {
        let row = logp.row_mut(r);
        let lse = log_sum_exp(row);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
        point_ll.push(lse);
    }
    let ll = point_ll.iter().copied().sum();
    Ok((Responsibilities { matrix: logp }, ll, point_ll))
}

/// Posterior component probabilities (normalized in log space) and the total
/// log-likelihood `Σ_r log Σ_i w_i N(x_r | μ_i, Σ_i)`.
pub fn e_step<T: Scalar>(
    model: &Mixture<T>,
    data: &Dataset<T>,
) -> Result<(Responsibilities<T>, T)> {
    e_step_detail(model, data).map(|(r, ll, _)| (r, ll))
}

/// Held-out log-likelihood; zero for an empty set.
pub fn test_loglik<T: Scalar>(model: &Mixture<T>, test: &Dataset<T>) -> Result<T> {
    e_step(model, test).map(|(_, ll)| ll)
}

/// M-step with the default (ridge-free) options.
pub fn m_step<T: Scalar>(
    resp: &Responsibilities<T>,
    data: &Dataset<T>,
    restriction: CovarianceRestriction,
) -> Result<Mixture<T>> {
    m_step_with(resp, data, restriction, 0.0)
}

/// Maximum-likelihood parameters for given soft labels. Shared covariances
/// pool the weighted scatter of every component.
pub fn m_step_with<T: Scalar>(
    resp: &Responsibilities<T>,
    data: &Dataset<T>,
    restriction: CovarianceRestriction,
    ridge: f64,
) -> Result<Mixture<T>> {
    if resp.len() != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} responsibility rows for {} points",
            resp.len(),
            data.len()
        )));
    }
    let (m, n, k) = (data.len(), data.dim(), resp.k());
    let mf = T::from_usize(m).unwrap();
    let mut counts = vec![T::zero(); k];
    let mut means = vec![vec![T::zero(); n]; k];
    for r in 0..m {
        let x = data.point(r);
        for (i, &p) in resp.row(r).iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            counts[i] += p;
            for (acc, &v) in means[i].iter_mut().zip(x) {
                *acc += p * v;
            }
        }
    }
    let floor = T::lit(1e-10) * mf;
    for i in 0..k {
        if !(counts[i] >= floor) || counts[i] == T::zero() {
            return Err(Error::EmptyComponent(i));
        }
        let c = counts[i];
        means[i].iter_mut().for_each(|v| *v /= c);
    }

    let covariances: Vec<Matrix<T>> = match restriction {
        CovarianceRestriction::FullDistinct => (0..k)
            .map(|i| {
                let mut cov = Matrix::zeros(n, n);
                let mut d = vec![T::zero(); n];
                for r in 0..m {
                    let p = resp.row(r)[i];
                    if p == T::zero() {
                        continue;
                    }
                    for ((di, &x), &mu) in d.iter_mut().zip(data.point(r)).zip(&means[i]) {
                        *di = x - mu;
                    }
                    add_rank_one_lower(&mut cov, &d, p);
                }
                finish_covariance(cov, counts[i], ridge)
            })
            .collect(),
        CovarianceRestriction::SharedFull => {
            // Σ_r Σ_i p_ri (x_r − μ_i)(x_r − μ_i)^T
            //   = Σ_r (x_r − x̄)(x_r − x̄)^T − Σ_i N_i (μ_i − x̄)(μ_i − x̄)^T
            let centre = data.mean();
            let mut cov = Matrix::zeros(n, n);
            let mut d = vec![T::zero(); n];
            for x in data.iter() {
                for ((di, &v), &c) in d.iter_mut().zip(x).zip(&centre) {
                    *di = v - c;
                }
                add_rank_one_lower(&mut cov, &d, T::one());
            }
            for i in 0..k {
                for ((di, &v), &c) in d.iter_mut().zip(&means[i]).zip(&centre) {
                    *di = v - c;
                }
                add_rank_one_lower(&mut cov, &d, -counts[i]);
            }
            let shared = finish_covariance(cov, mf, ridge);
            vec![shared; k]
        }
    };
    let components = means
        .into_iter()
        .zip(covariances)
        .map(|(mu, cov)| Gaussian::new(mu, cov))
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(components, counts.into_iter().map(|c| c / mf).collect())
}

fn add_rank_one_lower<T: Scalar>(acc: &mut Matrix<T>, v: &[T], w: T) {
    for (i, &vi) in v.iter().enumerate() {
        let s = w * vi;
        let row = &mut acc.row_mut(i)[..=i];
        for (a, &vj) in row.iter_mut().zip(v) {
            *a += s * vj;
        }
    }
}

fn finish_covariance<T: Scalar>(mut lower: Matrix<T>, count: T, ridge: f64) -> Matrix<T> {
    let n = lower.nrows();
    for i in 0..n {
        for j in 0..=i {
            let v = lower[(i, j)] / count;
            lower[(i, j)] = v;
            lower[(j, i)] = v;
        }
    }
    if ridge > 0.0 {
        let bump = T::lit(ridge) * lower.trace() / T::from_usize(n).unwrap();
        for i in 0..n {
            lower[(i, i)] += bump;
        }
    }
    lower
}

fn annotate(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::EmFailed {
        iteration,
        source: Box::new(e),
    }
}

/// Runs EM from [`init_params`] until the relative log-likelihood gain falls
/// below `opts.tol` or `opts.max_iter` M-steps have been taken.
pub fn run_em<T: Scalar>(
    data: &Dataset<T>,
    k: usize,
    restriction: CovarianceRestriction,
    seed: u64,
    opts: &EmOptions,
) -> Result<FitResult<T>> {
    let model = init_params(data, k, restriction, seed)?;
    run_em_from(model, data, restriction, opts)
}

/// EM from an explicit starting model.
pub fn run_em_from<T: Scalar>(
    mut model: Mixture<T>,
    data: &Dataset<T>,
    restriction: CovarianceRestriction,
    opts: &EmOptions,
) -> Result<FitResult<T>> {
    let tol = T::lit(opts.tol);
    let mut trace: Vec<T> = Vec::new();
    let mut prev: Option<T> = None;
    let mut iterations = 0;
    let mut rescues = 0;
    loop {
        let (resp, ll, point_ll) = e_step_detail(&model, data).map_err(annotate(iterations))?;
        trace.push(ll);
        let converged = prev.is_some_and(|p| ll - p < tol * p.abs());
        if converged || iterations >= opts.max_iter {
            return Ok(FitResult {
                model,
                iterations,
                loglik_trace: trace,
                converged,
                rescues,
                responsibilities: resp,
            });
        }
        match m_step_with(&resp, data, restriction, opts.ridge) {
            Ok(next) => {
                model = next;
                prev = Some(ll);
                iterations += 1;
            }
            Err(Error::EmptyComponent(i)) if rescues < opts.max_rescues => {
                model = reseed_component(&model, i, data, &point_ll)?;
                rescues += 1;
                prev = None;
            }
            Err(e) => return Err(annotate(iterations)(e)),
        }
    }
}

/// Moves component `dead` onto the data point the model explains worst.
fn reseed_component<T: Scalar>(
    model: &Mixture<T>,
    dead: usize,
    data: &Dataset<T>,
    point_ll: &[T],
) -> Result<Mixture<T>> {
    let worst = point_ll
        .iter()
        .enumerate()
        .fold(
            (0, T::infinity()),
            |best, (r, &v)| if v < best.1 { (r, v) } else { best },
        )
        .0;
    let components = model
        .components()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if i == dead {
                Gaussian::new(data.point(worst).to_vec(), g.covariance().clone())
            } else {
                Ok(g.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(components, model.weights().to_vec())
}

/// Result of [`rp_em`].
#[derive(Clone, Debug)]
pub struct RpEmResult<T> {
    /// The random map used for the low-dimensional fit.
    pub projection: ProjectionMatrix<T>,
    /// EM run to convergence on the projected data.
    pub low: FitResult<T>,
    /// High-dimensional parameters obtained by applying the final
    /// low-dimensional soft labels to the original data.
    pub lifted: Mixture<T>,
    /// After the single high-dimensional EM step; `iterations` counts only
    /// high-dimensional steps and `loglik_trace` starts at the lifted model.
    pub high: FitResult<T>,
}

/// Project randomly to `d` dimensions, run EM there to convergence, lift the
/// final soft labels to estimate high-dimensional parameters, then take one
/// EM step in the original space.
pub fn rp_em<T: Scalar>(
    train: &Dataset<T>,
    k: usize,
    d: usize,
    restriction: CovarianceRestriction,
    seed: u64,
    opts: &EmOptions,
) -> Result<RpEmResult<T>> {
    let (projection, low) = rp_em_low(train, k, d, restriction, seed, opts)?;
    let (lifted, high) = rp_em_lift(train, &low, restriction, opts)?;
    Ok(RpEmResult {
        projection,
        low,
        lifted,
        high,
    })
}

/// First half of [`rp_em`]: the random map and the EM fit on projected data.
pub fn rp_em_low<T: Scalar>(
    train: &Dataset<T>,
    k: usize,
    d: usize,
    restriction: CovarianceRestriction,
    seed: u64,
    opts: &EmOptions,
) -> Result<(ProjectionMatrix<T>, FitResult<T>)> {
    check_fit_inputs(train, k)?;
    let projection = ProjectionMatrix::random_orthonormal(train.dim(), d, child_seed(seed, 0))?;
    let low_data = projection.project_data(train)?;
    let low = run_em(&low_data, k, restriction, child_seed(seed, 1), opts)?;
    Ok((projection, low))
}

/// Second half of [`rp_em`]: lifts the low-dimensional soft labels to the
/// original space and takes `1 + opts.extra_high_steps` EM steps there.
/// Returns the lifted model and the refined fit.
pub fn rp_em_lift<T: Scalar>(
    train: &Dataset<T>,
    low: &FitResult<T>,
    restriction: CovarianceRestriction,
    opts: &EmOptions,
) -> Result<(Mixture<T>, FitResult<T>)> {
    let lifted =
        m_step_with(&low.responsibilities, train, restriction, opts.ridge).map_err(annotate(0))?;
    let steps = 1 + opts.extra_high_steps;
    let mut model = lifted.clone();
    let mut trace = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        let (resp, ll) = e_step(&model, train).map_err(annotate(step))?;
        trace.push(ll);
        model = m_step_with(&resp, train, restriction, opts.ridge).map_err(annotate(step))?;
    }
    let (resp, ll) = e_step(&model, train).map_err(annotate(steps))?;
    trace.push(ll);
    let high = FitResult {
        model,
        iterations: steps,
        loglik_trace: trace,
        converged: false,
        rescues: 0,
        responsibilities: resp,
    };
    Ok((lifted, high))
}

/// Matches estimated centers to true ones with the assignment that minimizes
/// the largest radius-normalized error `‖μ̂ − μ_j‖ / radius_j`, and reports
/// success when every matched error is at most a third of that radius.
///
/// Returns the success flag and the raw matched error for each true
/// component, in truth order.
pub fn centers_recovered<T: Scalar>(
    model: &Mixture<T>,
    truth: &Mixture<T>,
) -> Result<(bool, Vec<T>)> {
    if model.k() != truth.k() || model.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} components in R^{}, truth {} in R^{}",
            model.k(),
            model.dim(),
            truth.k(),
            truth.dim()
        )));
    }
    let k = truth.k();
    let raw = Matrix::from_vec(
        k,
        k,
        (0..k)
            .flat_map(|j| {
                (0..k).map(move |i| dist(model.component(i).mean(), truth.component(j).mean()))
            })
            .collect(),
    );
    // scaled[(j, i)]: error of estimate i against truth j, in units of radius_j.
    let radii: Vec<T> = truth.components().iter().map(Gaussian::radius).collect();
    let mut scaled = raw.clone();
    for (j, &r) in radii.iter().enumerate() {
        for v in scaled.row_mut(j) {
            *v /= r;
        }
    }
    let assignment = bottleneck_assignment(&scaled);
    let errors: Vec<T> = (0..k).map(|j| raw[(j, assignment[j])]).collect();
    let third = T::lit(1.0 / 3.0);
    let success = (0..k).all(|j| scaled[(j, assignment[j])] <= third);
    Ok((success, errors))
}

/// Assignment rows -> columns minimizing the maximum selected cost: binary
/// search over the sorted costs with a bipartite matching feasibility test.
pub fn bottleneck_assignment<T: Scalar>(cost: &Matrix<T>) -> Vec<usize> {
    let k = cost.nrows();
    let mut levels: Vec<T> = cost.as_slice().to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(cost, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    perfect_matching(cost, levels[lo]).unwrap_or_else(|| (0..k).collect())
}

/// Kuhn's augmenting-path matching using only edges with cost `<= limit`.
fn perfect_matching<T: Scalar>(cost: &Matrix<T>, limit: T) -> Option<Vec<usize>> {
    let k = cost.nrows();
    let mut owner: Vec<Option<usize>> = vec![None; k];
    fn augment<T: Scalar>(
        row: usize,
        cost: &Matrix<T>,
        limit: T,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for col in 0..cost.ncols() {
            if cost[(row, col)] > limit || seen[col] {
                continue;
            }
            seen[col] = true;
            if owner[col].is_none_or(|other| augment(other, cost, limit, seen, owner)) {
                owner[col] = Some(row);
                return true;
            }
        }
        false
    }
    for row in 0..k {
        let mut seen = vec![false; k];
        if !augment(row, cost, limit, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut assignment = vec![0; k];
    for (col, o) in owner.iter().enumerate() {
        assignment[o.expect("perfect matching")] = col;
    }
    Some(assignment)
}
