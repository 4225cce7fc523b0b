//! Dynamic hypergraph construction.
//!
//! Patch embeddings `X` (N×d) are projected by a learnable `W1` (d×H) and
//! rectified into incidence logits; each patch row is then turned into a soft
//! hyperedge assignment by a Gumbel-softmax draw at temperature τ. The three
//! ablation variants drop the noise, the noise and temperature, or the
//! sampling step entirely.
//!
//! The static k-NN and k-means constructors exist for the construction-time
//! comparison only; the model never uses them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, NumericsError, Rng, Scalar, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Gumbel noise and temperature.
    Full,
    /// Temperature softmax without noise.
    NoGumbel,
    /// Plain softmax.
    NoGumbelNoTemp,
    /// Rectified logits used directly as the incidence matrix.
    NoSampling,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoGumbel,
        Variant::NoGumbelNoTemp,
        Variant::NoSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoGumbel => "no_gumbel",
            Variant::NoGumbelNoTemp => "no_gumbel_no_temp",
            Variant::NoSampling => "no_sampling",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::Full => 0,
            Variant::NoGumbel => 1,
            Variant::NoGumbelNoTemp => 2,
            Variant::NoSampling => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhcmConfig {
    pub num_hyperedges: usize,
    pub temperature: f64,
    pub variant: Variant,
    /// Apply Gumbel noise outside training as well.
    pub eval_noise: bool,
}

impl Default for DhcmConfig {
    fn default() -> Self {
        Self {
            num_hyperedges: 20,
            temperature: 0.1,
            variant: Variant::Full,
            eval_noise: false,
        }
    }
}

impl DhcmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_hyperedges == 0 {
            return Err(Error::config("number of hyperedges must be at least 1"));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::config(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Temperature actually applied: plain softmax ignores the configured τ.
    pub fn effective_temperature(&self) -> f64 {
        match self.variant {
            Variant::NoGumbelNoTemp => 1.0,
            _ => self.temperature,
        }
    }

    /// Whether a forward pass in the given mode adds Gumbel noise.
    pub fn uses_noise(&self, training: bool) -> bool {
        self.variant == Variant::Full && (training || self.eval_noise)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncidenceForm {
    /// Rectified projection, entries ≥ 0.
    Logits,
    /// Row-stochastic soft assignment.
    Assignment,
    /// 0/1 membership from a static constructor.
    Binary,
}

/// N×H patch-to-hyperedge incidence.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceMatrix<T> {
    pub values: Matrix<T>,
    pub form: IncidenceForm,
}

impl<T: Scalar> IncidenceMatrix<T> {
    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn num_hyperedges(&self) -> usize {
        self.values.cols()
    }

    /// Members of hyperedge `h` (nonzero entries of column `h`).
    pub fn members(&self, h: usize) -> Vec<usize> {
        (0..self.values.rows())
            .filter(|&i| self.values[(i, h)] != T::zero())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DhcmParams<T> {
    pub w1: Matrix<T>,
}

/// Where the Gumbel noise for a forward pass comes from.
pub enum Noise<'a, T> {
    /// Draw a fresh N×H matrix from the generator.
    Sample(&'a mut Rng),
    /// Use a pre-drawn N×H matrix.
    Fixed(&'a Matrix<T>),
    /// No noise source. Only valid when the configuration adds none.
    Off,
}

impl<T: Scalar> Noise<'_, T> {
    fn resolve(&mut self, rows: usize, cols: usize) -> Result<Matrix<T>> {
        match self {
            Noise::Sample(rng) => Ok(rng.gumbel_matrix(rows, cols)),
            Noise::Fixed(m) => {
                if m.shape() != (rows, cols) {
                    return Err(NumericsError::ShapeMismatch {
                        op: "gumbel_noise",
                        lhs: m.shape(),
                        rhs: (rows, cols),
                    }
                    .into());
                }
                Ok((*m).clone())
            }
            Noise::Off => Err(Error::config("variant requires Gumbel noise but none was supplied")),
        }
    }
}

/// `ReLU(X·W1)`.
pub fn build_logits<T: Scalar>(x: &Matrix<T>, params: &DhcmParams<T>) -> Result<IncidenceMatrix<T>> {
    Ok(IncidenceMatrix {
        values: x.matmul(&params.w1)?.relu(),
        form: IncidenceForm::Logits,
    })
}

/// Turns rectified logits into the incidence matrix used downstream.
pub fn sample_assignment<T: Scalar>(
    logits: &IncidenceMatrix<T>,
    cfg: &DhcmConfig,
    mut noise: Noise<'_, T>,
    training: bool,
) -> Result<IncidenceMatrix<T>> {
    cfg.validate()?;
    if cfg.variant == Variant::NoSampling {
        return Ok(logits.clone());
    }
    let mut z = logits.values.clone();
    if cfg.uses_noise(training) {
        let g = noise.resolve(z.rows(), z.cols())?;
        z = z.add(&g)?;
    }
    let inv_tau = T::from(1.0 / cfg.effective_temperature()).unwrap();
    Ok(IncidenceMatrix {
        values: z.scale(inv_tau).row_softmax(),
        form: IncidenceForm::Assignment,
    })
}

/// Differentiable `ReLU(X·W1)` on a tape.
pub fn build_logits_on<T: Scalar>(tape: &mut Tape<T>, x: Var, w1: Var) -> Result<Var> {
    let proj = tape.matmul(x, w1)?;
    Ok(tape.relu(proj))
}

/// Differentiable counterpart of [`sample_assignment`]. Noise enters as a
/// constant, so gradients flow only through the logits.
pub fn sample_assignment_on<T: Scalar>(
    tape: &mut Tape<T>,
    logits: Var,
    cfg: &DhcmConfig,
    mut noise: Noise<'_, T>,
    training: bool,
) -> Result<Var> {
    cfg.validate()?;
    if cfg.variant == Variant::NoSampling {
        return Ok(logits);
    }
    let mut z = logits;
    if cfg.uses_noise(training) {
        let (r, c) = tape.value(logits).shape();
        let g = tape.constant(noise.resolve(r, c)?);
        z = tape.add(z, g)?;
    }
    let scaled = tape.scale(z, T::from(1.0 / cfg.effective_temperature()).unwrap());
    Ok(tape.row_softmax(scaled))
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// k-NN hypergraph: hyperedge `i` holds patch `i` plus its `k` nearest
/// patches by exact Euclidean distance (ties go to the lower index).
/// Entry `(j, i)` is 1 when patch `j` belongs to hyperedge `i`.
pub fn knn_hypergraph<T: Scalar>(x: &Matrix<T>, k: usize) -> Result<IncidenceMatrix<T>> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::config(format!("k-NN needs 1 <= k < N, got k={k}, N={n}")));
    }
    let mut inc = Matrix::zeros(n, n);
    let mut cand: Vec<(T, usize)> = Vec::with_capacity(n - 1);
    let order = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    for i in 0..n {
        cand.clear();
        let xi = x.row(i);
        cand.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(xi, x.row(j)), j)));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, order);
        }
        inc[(i, i)] = T::one();
        for &(_, j) in &cand[..k] {
            inc[(j, i)] = T::one();
        }
    }
    Ok(IncidenceMatrix {
        values: inc,
        form: IncidenceForm::Binary,
    })
}

/// Lloyd's k-means with initial centers at `k` distinct seeded points; one
/// hyperedge per cluster. Empty clusters are re-seeded from the point
/// farthest from its current center.
pub fn kmeans_hypergraph<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    iters: usize,
    rng: &mut Rng,
) -> Result<IncidenceMatrix<T>> {
    let labels = kmeans_labels(x, k, iters, rng)?;
    let mut inc = Matrix::zeros(x.rows(), k);
    for (i, &c) in labels.iter().enumerate() {
        inc[(i, c)] = T::one();
    }
    Ok(IncidenceMatrix {
        values: inc,
        form: IncidenceForm::Binary,
    })
}

fn kmeans_labels<T: Scalar>(x: &Matrix<T>, k: usize, iters: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let (n, d) = x.shape();
    if k == 0 || k > n {
        return Err(Error::config(format!("k-means needs 1 <= k <= N, got k={k}, N={n}")));
    }
    let mut centers = Matrix::zeros(k, d);
    for (c, idx) in rng.sample_distinct(n, k).into_iter().enumerate() {
        centers.row_mut(c).copy_from_slice(x.row(idx));
    }
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![T::zero(); n];
    for _ in 0..iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let xi = x.row(i);
            let mut best = (T::infinity(), 0);
            for c in 0..k {
                let dd = sq_dist(xi, centers.row(c));
                if dd < best.0 {
                    best = (dd, c);
                }
            }
            dists[i] = best.0;
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        let mut sums = Matrix::<T>::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(x.row(i)) {
                *s = *s + v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the worst-fit point and move it over.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap();
                centers.row_mut(c).copy_from_slice(x.row(far));
                dists[far] = T::zero();
                labels[far] = c;
                changed = true;
            } else {
                let inv = T::one() / T::from(counts[c]).unwrap();
                for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionMethod {
    Dhcm,
    Knn,
    Kmeans,
}

impl ConstructionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ConstructionMethod::Dhcm => "dhcm",
            ConstructionMethod::Knn => "knn",
            ConstructionMethod::Kmeans => "kmeans",
        }
    }
}

impl FromStr for ConstructionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dhcm" => Ok(Self::Dhcm),
            "knn" => Ok(Self::Knn),
            "kmeans" => Ok(Self::Kmeans),
            _ => Err(Error::config(format!("unknown construction method {s:?}"))),
        }
    }
}

/// Sizes used by each constructor during timing.
#[derive(Clone, Debug)]
pub struct BenchParams {
    pub num_hyperedges: usize,
    pub temperature: f64,
    pub knn_k: usize,
    pub kmeans_k: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            num_hyperedges: 20,
            temperature: 0.1,
            knn_k: 10,
            kmeans_k: 20,
            kmeans_iters: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub method: ConstructionMethod,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub mean_seconds: f64,
}

/// Wall-clock time of hypergraph construction alone on random `N×d` inputs.
/// One untimed warm-up run precedes `reps` timed runs for each `N`.
pub fn time_construction(
    method: ConstructionMethod,
    n_list: &[usize],
    d: usize,
    reps: usize,
    params: &BenchParams,
) -> Result<Vec<TimingRow>> {
    if reps < 3 {
        return Err(Error::config(format!("timing needs at least 3 reps, got {reps}")));
    }
    let base = Rng::seed_from(params.seed);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut rng = base.derive(n as u64);
        let x: Matrix<f32> = rng.uniform_matrix(n, d, -1.0, 1.0);
        let w1 = DhcmParams {
            w1: rng.uniform_matrix(d, params.num_hyperedges, -0.1, 0.1),
        };
        let cfg = DhcmConfig {
            num_hyperedges: params.num_hyperedges,
            temperature: params.temperature,
            variant: Variant::Full,
            eval_noise: false,
        };
        let run = |rng: &mut Rng| -> Result<usize> {
            let inc = match method {
                ConstructionMethod::Dhcm => {
                    let logits = build_logits(&x, &w1)?;
                    sample_assignment(&logits, &cfg, Noise::Sample(rng), true)?
                }
                ConstructionMethod::Knn => knn_hypergraph(&x, params.knn_k)?,
                ConstructionMethod::Kmeans => kmeans_hypergraph(&x, params.kmeans_k, params.kmeans_iters, rng)?,
            };
            Ok(inc.num_hyperedges())
        };
        std::hint::black_box(run(&mut rng)?);
        let mut total = 0.0;
        for _ in 0..reps {
            let start = Instant::now();
            std::hint::black_box(run(&mut rng)?);
            total += start.elapsed().as_secs_f64();
        }
        rows.push(TimingRow {
            method,
            n,
            d,
            reps,
            mean_seconds: total / reps as f64,
        });
    }
    Ok(rows)
}
