//! Gaussian-process regression with a Matérn ν = 5/2 kernel.
//!
//! Observations are centered on their sample mean before fitting and the
//! mean is added back to predictions. All solves go through a Cholesky
//! factorization of the Gram matrix; if it fails the diagonal jitter is
//! raised tenfold up to [`MAX_JITTER`].

use crate::error::{Error, Result};

pub const NU: f64 = 2.5;
pub const DEFAULT_NOISE_VARIANCE: f64 = 1e-6;
pub const DEFAULT_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-4;
pub const MIN_SIGNAL_VARIANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    length_scale: f64,
    signal_variance: f64,
    noise_variance: f64,
    jitter: f64,
}

impl KernelParams {
    pub fn new(
        length_scale: f64,
        signal_variance: f64,
        noise_variance: f64,
        jitter: f64,
    ) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(length_scale) {
            return Err(Error::InvalidKernel(format!("length scale {length_scale}")));
        }
        if !ok(signal_variance) {
            return Err(Error::InvalidKernel(format!(
                "signal variance {signal_variance}"
            )));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "noise variance {noise_variance}"
            )));
        }
        if !ok(jitter) {
            return Err(Error::InvalidKernel(format!("jitter {jitter}")));
        }
        Ok(Self {
            length_scale,
            signal_variance,
            noise_variance,
            jitter,
        })
    }

    /// Scale-aware defaults: ℓ = 0.25·√N and σ² = variance of the
    /// observations (floored at [`MIN_SIGNAL_VARIANCE`]).
    pub fn default_for(dimension: usize, observed_y: &[f64]) -> Self {
        let length_scale = 0.25 * (dimension.max(1) as f64).sqrt();
        let n = observed_y.len().max(1) as f64;
        let mean = observed_y.iter().sum::<f64>() / n;
        let var = observed_y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        Self {
            length_scale,
            signal_variance: var.max(MIN_SIGNAL_VARIANCE),
            noise_variance: DEFAULT_NOISE_VARIANCE,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn matern25_at(r: f64, params: &KernelParams) -> f64 {
    let s = 5f64.sqrt() * r / params.length_scale;
    params.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// `σ²·(1 + √5·r/ℓ + 5r²/(3ℓ²))·exp(−√5·r/ℓ)` with `r = ‖x1 − x2‖`.
pub fn matern25(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::LengthMismatch {
            expected: x1.len(),
            got: x2.len(),
        });
    }
    Ok(matern25_at(distance(x1, x2), params))
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += v;
        }
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points
        .first()
        .ok_or_else(|| Error::InvalidKernel("no points".into()))?
        .len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    Ok(dim)
}

fn kernel_matrix(points: &[Vec<f64>], params: &KernelParams) -> SymMatrix {
    let n = points.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = matern25_at(distance(&points[i], &points[j]), params);
            data[i * n + j] = k;
            data[j * n + i] = k;
        }
    }
    SymMatrix { n, data }
}

/// Gram matrix with `noise_variance + jitter` on the diagonal.
pub fn gram(points: &[Vec<f64>], params: &KernelParams) -> Result<SymMatrix> {
    check_points(points)?;
    let mut k = kernel_matrix(points, params);
    k.add_diagonal(params.noise_variance + params.jitter);
    Ok(k)
}

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn factor(a: &SymMatrix) -> Option<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Self { n, l })
    }

    /// Solves `L·z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            z[i] = (z[i] - s) / self.l[i * n + i];
        }
        z
    }

    /// Solves `Lᵀ·x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }
}

/// Observations of the objective plus the kernel they are modelled with.
#[derive(Debug, Clone, PartialEq)]
pub struct GpState {
    observed_x: Vec<Vec<f64>>,
    observed_y: Vec<f64>,
    params: KernelParams,
}

impl GpState {
    pub fn new(observed_x: Vec<Vec<f64>>, observed_y: Vec<f64>, params: KernelParams) -> Result<Self> {
        if observed_x.len() != observed_y.len() {
            return Err(Error::LengthMismatch {
                expected: observed_x.len(),
                got: observed_y.len(),
            });
        }
        if !observed_x.is_empty() {
            check_points(&observed_x)?;
        }
        if observed_y.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidKernel("non-finite observation".into()));
        }
        Ok(Self {
            observed_x,
            observed_y,
            params,
        })
    }

    /// State with [`KernelParams::default_for`] hyperparameters.
    pub fn with_default_params(observed_x: Vec<Vec<f64>>, observed_y: Vec<f64>) -> Result<Self> {
        let dim = observed_x.first().map_or(1, Vec::len);
        let params = KernelParams::default_for(dim, &observed_y);
        Self::new(observed_x, observed_y, params)
    }

    pub fn observed_x(&self) -> &[Vec<f64>] {
        &self.observed_x
    }

    pub fn observed_y(&self) -> &[f64] {
        &self.observed_y
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn nu(&self) -> f64 {
        NU
    }

    pub fn len(&self) -> usize {
        self.observed_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed_y.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.observed_x.first().map(Vec::len)
    }

    pub fn fit(&self) -> Result<FittedGp<'_>> {
        FittedGp::fit(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpPosterior {
    pub mean: f64,
    pub variance: f64,
}

/// A factorized GP ready for repeated posterior queries.
#[derive(Debug, Clone)]
pub struct FittedGp<'a> {
    state: &'a GpState,
    chol: Cholesky,
    alpha: Vec<f64>,
    y_mean: f64,
    jitter: f64,
}

impl<'a> FittedGp<'a> {
    pub fn fit(state: &'a GpState) -> Result<Self> {
        if state.is_empty() {
            return Err(Error::InvalidKernel("no observations".into()));
        }
        let params = &state.params;
        let base = kernel_matrix(&state.observed_x, params);
        let mut jitter = params.jitter;
        let chol = loop {
            let mut k = base.clone();
            k.add_diagonal(params.noise_variance + jitter);
            if let Some(c) = Cholesky::factor(&k) {
                break c;
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * (1.0 + 1e-9) {
                return Err(Error::IllConditioned { jitter: jitter / 10.0 });
            }
            log::debug!("Gram factorization failed, raising jitter to {jitter:e}");
        };
        let n = state.len() as f64;
        let y_mean = state.observed_y.iter().sum::<f64>() / n;
        let centered: Vec<f64> = state.observed_y.iter().map(|y| y - y_mean).collect();
        let alpha = chol.solve(&centered);
        Ok(Self {
            state,
            chol,
            alpha,
            y_mean,
            jitter,
        })
    }

    /// Jitter actually used for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn prior_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn posterior(&self, query: &[f64]) -> Result<GpPosterior> {
        let dim = self.state.observed_x[0].len();
        if query.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: query.len(),
            });
        }
        let params = &self.state.params;
        let k_star: Vec<f64> = self
            .state
            .observed_x
            .iter()
            .map(|x| matern25_at(distance(x, query), params))
            .collect();
        let mean = self.y_mean + k_star.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = self.chol.forward(&k_star);
        let variance = params.signal_variance - v.iter().map(|x| x * x).sum::<f64>();
        Ok(GpPosterior {
            mean,
            variance: variance.max(0.0),
        })
    }
}

/// Posterior at `query` given all observations in `state`.
pub fn posterior(state: &GpState, query: &[f64]) -> Result<GpPosterior> {
    state.fit()?.posterior(query)
}
