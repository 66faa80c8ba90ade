//! Gaussian fading-matrix laws that respect a zero pattern.
//!
//! The random part of the model lives on the non-zero entries `Z^c`, kept
//! in `(r, t)` order. `CN(μ, σ²)` means independent real and imaginary
//! parts of variance `σ²/2` each around `μ`; covariances are
//! `E[(h − μ)(h − μ)^H]`. All logarithms are natural.

use std::collections::HashMap;
use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::numeric::{self, EULER_MASCHERONI};
use crate::seed;
use crate::topology::Topology;

/// Closest the AR(1) coefficient may get to one.
pub const MAX_AR1_RHO: f64 = 1.0 - 1e-6;

/// A Monte Carlo (or numerical) estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Estimate { value: mean, std_error: (var / n).sqrt() }
    }
}

/// Draws one `CN(0, 1)` sample.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Joint Gaussian law of the fading matrix.
#[derive(Debug, Clone)]
pub struct FadingModel {
    topo: Topology,
    entries: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    means: Vec<Complex64>,
    covariance: CMatrix,
    chol: CMatrix,
    ar1_rho: Option<f64>,
}

impl FadingModel {
    /// `means` and `covariance` are indexed by [`Topology::nonzero_entries`].
    pub fn new(
        topo: Topology,
        means: Vec<Complex64>,
        covariance: CMatrix,
        ar1_rho: Option<f64>,
    ) -> Result<Self> {
        let entries = topo.nonzero_entries();
        let n = entries.len();
        if n == 0 {
            return Err(Error::InvalidParameter("fading model needs at least one non-zero entry".into()));
        }
        if means.len() != n {
            return Err(Error::InvalidParameter(format!("{} means for {n} non-zero entries", means.len())));
        }
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{} but there are {n} non-zero entries",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if let Some(rho) = ar1_rho {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!("ar1_rho = {rho} not in [0, 1)")));
            }
        }
        let chol = linalg::cholesky(&covariance)?;
        let index = entries.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(FadingModel { topo, entries, index, means, covariance, chol, ar1_rho })
    }

    /// IID `CN(0, 1)` on every non-zero entry.
    pub fn rayleigh(topo: Topology) -> Result<Self> {
        let n = topo.nonzero_count();
        Self::new(topo, vec![Complex64::new(0.0, 0.0); n], CMatrix::identity(n, n), None)
    }

    pub fn with_ar1(mut self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("ar1_rho = {rho} not in [0, 1)")));
        }
        self.ar1_rho = Some(rho);
        Ok(self)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Non-zero entries, 1-based `(r, t)`, in model order.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn entry_index(&self, r: usize, t: usize) -> Option<usize> {
        self.index.get(&(r, t)).copied()
    }

    pub(crate) fn require_entry(&self, r: usize, t: usize) -> Result<usize> {
        self.entry_index(r, t).ok_or_else(|| {
            Error::InvalidParameter(format!("entry ({r}, {t}) is a deterministic zero or out of range"))
        })
    }

    pub fn means(&self) -> &[Complex64] {
        &self.means
    }

    pub fn covariance(&self) -> &CMatrix {
        &self.covariance
    }

    pub fn ar1_rho(&self) -> Option<f64> {
        self.ar1_rho
    }

    /// Mean of `H(r, t)`; zero on the zero pattern.
    pub fn mean(&self, r: usize, t: usize) -> Complex64 {
        self.entry_index(r, t).map_or(Complex64::new(0.0, 0.0), |i| self.means[i])
    }

    /// Variance of `H(r, t)`; zero on the zero pattern.
    pub fn variance(&self, r: usize, t: usize) -> f64 {
        self.entry_index(r, t).map_or(0.0, |i| self.covariance[(i, i)].re)
    }

    /// `E[|H(r, t)|²]`.
    pub fn second_moment(&self, r: usize, t: usize) -> f64 {
        self.mean(r, t).norm_sqr() + self.variance(r, t)
    }

    /// `E[‖H‖_F²]`.
    pub fn frobenius_second_moment(&self) -> f64 {
        (0..self.entries.len())
            .map(|i| self.means[i].norm_sqr() + self.covariance[(i, i)].re)
            .sum()
    }

    /// `E[‖H‖_F²]` restricted to the given `(r, t)` pairs (zeros contribute 0).
    pub fn block_second_moment(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, t)| self.second_moment(r, t)).sum()
    }

    /// Covariance of the `target` entries conditioned on the `given` ones.
    pub fn conditional_covariance(
        &self,
        target: &[(usize, usize)],
        given: &[(usize, usize)],
    ) -> Result<CMatrix> {
        let ti = target.iter().map(|&(r, t)| self.require_entry(r, t)).collect::<Result<Vec<_>>>()?;
        let gi = given.iter().map(|&(r, t)| self.require_entry(r, t)).collect::<Result<Vec<_>>>()?;
        linalg::conditional_covariance(&self.covariance, &ti, &gi)
    }

    /// Differential entropy (nats) of the `target` entries given the `given`
    /// entries: `ln det(πe Λ_{t|g})`.
    pub fn conditional_entropy(&self, target: &[(usize, usize)], given: &[(usize, usize)]) -> Result<f64> {
        let c = self.conditional_covariance(target, given)?;
        Ok(target.len() as f64 * (PI * E).ln() + linalg::log_det_hpd(&c)?)
    }

    /// One draw of the non-zero entries, in model order.
    pub fn sample_entries<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let w: Vec<Complex64> = (0..self.entries.len()).map(|_| standard_complex_normal(rng)).collect();
        let w = nalgebra::DVector::from_vec(w);
        let h = &self.chol * w;
        h.iter().zip(&self.means).map(|(z, m)| z + m).collect()
    }

    fn scatter(&self, values: &[Complex64]) -> CMatrix {
        let mut h = CMatrix::zeros(self.topo.n_r(), self.topo.n_t());
        for (&(r, t), &v) in self.entries.iter().zip(values) {
            h[(r - 1, t - 1)] = v;
        }
        h
    }

    /// One `n_r × n_t` fading matrix from `rng`; zero-pattern entries are
    /// exactly zero.
    pub fn sample_matrix_with<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let v = self.sample_entries(rng);
        self.scatter(&v)
    }

    /// One fading matrix, reproducible from `seed`.
    pub fn sample_matrix(&self, seed: u64) -> CMatrix {
        self.sample_matrix_with(&mut seed::rng(seed))
    }

    /// A stationary sequence of fading matrices with per-entry AR(1) memory:
    /// `h_k − μ = ρ (h_{k−1} − μ) + √(1 − ρ²) L w_k`. Without `ar1_rho` the
    /// sequence is IID.
    pub fn sample_sequence(&self, len: usize, seed: u64) -> Vec<CMatrix> {
        let rho = self.ar1_rho.unwrap_or(0.0);
        let innov = (1.0 - rho * rho).sqrt();
        let mut rng = seed::rng(seed);
        let mut out = Vec::with_capacity(len);
        let mut prev: Option<Vec<Complex64>> = None;
        for _ in 0..len {
            let fresh = self.sample_entries(&mut rng);
            let cur: Vec<Complex64> = match &prev {
                None => fresh,
                Some(p) => p
                    .iter()
                    .zip(&fresh)
                    .zip(&self.means)
                    .map(|((&p, &f), &m)| m + (p - m) * rho + (f - m) * innov)
                    .collect(),
            };
            out.push(self.scatter(&cur));
            prev = Some(cur);
        }
        out
    }

    pub fn from_json(topo: Topology, s: &str) -> Result<Self> {
        let doc: FadingModelDoc = serde_json::from_str(s)?;
        doc.into_model(topo)
    }

    pub fn to_doc(&self) -> FadingModelDoc {
        let n = self.entries.len();
        FadingModelDoc {
            means: self
                .entries
                .iter()
                .zip(&self.means)
                .filter(|(_, m)| m.norm() != 0.0)
                .map(|(&(r, t), m)| MeanEntry(r, t, m.re, m.im))
                .collect(),
            covariance: Some(
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        let z = self.covariance[(i, j)];
                        if z.im == 0.0 {
                            CovValue::Real(z.re)
                        } else {
                            CovValue::Complex([z.re, z.im])
                        }
                    })
                    .collect(),
            ),
            ar1_rho: self.ar1_rho,
        }
    }
}

/// JSON form of a fading model. `covariance` is dense row-major over the
/// non-zero entries sorted by `(r, t)`; each element is a number or an
/// `[re, im]` pair. Missing means are zero, a missing covariance is the
/// identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingModelDoc {
    #[serde(default)]
    pub means: Vec<MeanEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<CovValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar1_rho: Option<f64>,
}

/// `[r, t, re, im]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanEntry(pub usize, pub usize, pub f64, pub f64);

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovValue {
    Real(f64),
    Complex([f64; 2]),
}

impl FadingModelDoc {
    pub fn into_model(self, topo: Topology) -> Result<FadingModel> {
        let entries = topo.nonzero_entries();
        let n = entries.len();
        let pos: HashMap<(usize, usize), usize> = entries.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut means = vec![Complex64::new(0.0, 0.0); n];
        let mut seen = vec![false; n];
        for MeanEntry(r, t, re, im) in self.means {
            let i = *pos.get(&(r, t)).ok_or_else(|| {
                Error::InvalidParameter(format!("mean given for ({r}, {t}), which is not a non-zero entry"))
            })?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("mean for ({r}, {t}) given twice")));
            }
            means[i] = Complex64::new(re, im);
        }
        let covariance = match self.covariance {
            None => CMatrix::identity(n, n),
            Some(v) => {
                if v.len() != n * n {
                    return Err(Error::InvalidParameter(format!(
                        "covariance has {} elements, expected {}",
                        v.len(),
                        n * n
                    )));
                }
                CMatrix::from_row_iterator(
                    n,
                    n,
                    v.into_iter().map(|c| match c {
                        CovValue::Real(x) => Complex64::new(x, 0.0),
                        CovValue::Complex([re, im]) => Complex64::new(re, im),
                    }),
                )
            }
        };
        FadingModel::new(topo, means, covariance, self.ar1_rho)
    }
}

/// `E[ln |H|²]` for `H ~ CN(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogMoment {
    pub value: f64,
    /// Zero on the closed-form branch, the quadrature error estimate
    /// otherwise.
    pub abs_error: f64,
}

/// `E[ln |H|²]` for `H ~ CN(mean, variance)`, in nats.
///
/// Zero mean uses the closed form `ln σ² − γ`. Otherwise, averaging over
/// the phase of the random part first (Jensen's formula: the mean of
/// `ln|a + b e^{iθ}|²` over `θ` is `2 ln max(|a|, |b|)`) leaves
/// `E[ln max(|μ|², σ² V)]` with `V ~ Exp(1)`, which is evaluated by
/// adaptive quadrature.
pub fn log_h_squared_mean(mean: Complex64, variance: f64) -> Result<LogMoment> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!("variance {variance} must be positive")));
    }
    let m2 = mean.norm_sqr();
    if m2 == 0.0 {
        return Ok(LogMoment { value: variance.ln() - EULER_MASCHERONI, abs_error: 0.0 });
    }
    let s = m2 / variance;
    // E = (1 − e^{−s}) ln|μ|² + e^{−s} (ln σ² + ∫_0^∞ ln(s + w) e^{−w} dw)
    let tail = numeric::integrate_to_infinity(|w| (s + w).ln() * (-w).exp(), 0.0, 1e-11);
    let es = (-s).exp();
    Ok(LogMoment {
        value: -(-s).exp_m1() * m2.ln() + es * (variance.ln() + tail.value),
        abs_error: es * tail.abs_error,
    })
}

/// Monte Carlo estimate of `E[ln |H|²]` for `H ~ CN(mean, variance)`.
pub fn log_h_squared_mean_mc(mean: Complex64, variance: f64, samples: usize, seed: u64) -> Result<Estimate> {
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter(format!("variance {variance} must be positive")));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let mut rng = seed::rng(seed);
    let sd = variance.sqrt();
    let xs: Vec<f64> = (0..samples)
        .map(|_| (mean + standard_complex_normal(&mut rng) * sd).norm_sqr().ln())
        .collect();
    Ok(Estimate::from_samples(&xs))
}

/// Gaussian mutual information (nats) between two disjoint blocks of
/// non-zero entries: `ln det Λ_a + ln det Λ_b − ln det Λ_ab`. An empty
/// block gives zero.
pub fn block_mutual_information(
    model: &FadingModel,
    block_a: &[(usize, usize)],
    block_b: &[(usize, usize)],
) -> Result<f64> {
    let ia = block_a.iter().map(|&(r, t)| model.require_entry(r, t)).collect::<Result<Vec<_>>>()?;
    let ib = block_b.iter().map(|&(r, t)| model.require_entry(r, t)).collect::<Result<Vec<_>>>()?;
    let mut all: Vec<usize> = ia.iter().chain(&ib).copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("blocks share or repeat an entry".into()));
    }
    if ia.is_empty() || ib.is_empty() {
        return Ok(0.0);
    }
    let joint: Vec<usize> = ia.iter().chain(&ib).copied().collect();
    let cov = model.covariance();
    let la = linalg::log_det_hpd(&linalg::principal_submatrix(cov, &ia))?;
    let lb = linalg::log_det_hpd(&linalg::principal_submatrix(cov, &ib))?;
    let lab = linalg::log_det_hpd(&linalg::principal_submatrix(cov, &joint))
        .map_err(|_| Error::InfiniteMutualInformation("joint covariance of the blocks is singular".into()))?;
    Ok((la + lb - lab).max(0.0))
}

/// `I(H_k; H_1^{k−1})` for per-entry AR(1) memory: `|Z^c| · (−ln(1 − ρ²))`.
pub fn memory_gap_ar1(model: &FadingModel) -> Result<f64> {
    let rho = model
        .ar1_rho()
        .ok_or_else(|| Error::InvalidParameter("model has no ar1_rho".into()))?;
    ar1_gap(rho, model.entries().len())
}

pub(crate) fn ar1_gap(rho: f64, entries: usize) -> Result<f64> {
    if !(0.0..=MAX_AR1_RHO).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "ar1_rho = {rho} outside [0, {MAX_AR1_RHO}]; the memory gap diverges as rho -> 1"
        )));
    }
    Ok(entries as f64 * -(-rho * rho).ln_1p())
}

/// Monte Carlo estimate of the lag-one mutual information `I(H_k; H_{k−1})`
/// of a single entry of `model`, taken along a simulated AR(1) path.
///
/// Each step contributes the log-likelihood ratio of the one-step
/// transition density against the stationary marginal. The standard error
/// comes from 50 batch means.
pub fn ar1_lag_mi_monte_carlo(model: &FadingModel, entry: (usize, usize), len: usize, seed: u64) -> Result<Estimate> {
    let rho = model
        .ar1_rho()
        .ok_or_else(|| Error::InvalidParameter("model has no ar1_rho".into()))?;
    if rho > MAX_AR1_RHO {
        return Err(Error::InvalidParameter(format!("ar1_rho = {rho} too close to 1")));
    }
    if len < 1000 {
        return Err(Error::InvalidParameter("AR(1) path shorter than 1000 steps".into()));
    }
    let (r, t) = entry;
    model.require_entry(r, t)?;
    let mu = model.mean(r, t);
    let var = model.variance(r, t);
    let innov = var * (1.0 - rho * rho);
    let path: Vec<Complex64> = model.sample_sequence(len, seed).iter().map(|h| h[(r - 1, t - 1)]).collect();
    let llr: Vec<f64> = path
        .windows(2)
        .map(|w| {
            let prev = w[0] - mu;
            let cur = w[1] - mu;
            -(innov / var).ln() - (cur - prev * rho).norm_sqr() / innov + cur.norm_sqr() / var
        })
        .collect();
    let batches = 50;
    let per = llr.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| llr[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    Ok(Estimate::from_samples(&means))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn real_cov(n: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(n, n, data.iter().map(|&x| Complex64::new(x, 0.0)))
    }

    #[test]
    fn zero_pattern_entries_are_exactly_zero() {
        let m = FadingModel::rayleigh(Topology::diagonal(2).unwrap()).unwrap();
        for s in 0..20 {
            let h = m.sample_matrix(s);
            assert_eq!(h[(0, 1)], Complex64::new(0.0, 0.0));
            assert_eq!(h[(1, 0)], Complex64::new(0.0, 0.0));
            assert_ne!(h[(0, 0)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = FadingModel::rayleigh(Topology::full(2, 3).unwrap()).unwrap();
        assert_eq!(m.sample_matrix(9), m.sample_matrix(9));
        assert_ne!(m.sample_matrix(9), m.sample_matrix(10));
    }

    #[test]
    fn sample_mean_matches_model_mean() {
        let topo = Topology::full(1, 2).unwrap();
        let means = vec![Complex64::new(1.5, -0.5), Complex64::new(-2.0, 0.25)];
        let m = FadingModel::new(topo, means.clone(), real_cov(2, &[1.0, 0.3, 0.3, 2.0]), None).unwrap();
        let n = 100_000;
        let mut rng = seed::rng(5);
        let mut acc = vec![Complex64::new(0.0, 0.0); 2];
        for _ in 0..n {
            for (a, v) in acc.iter_mut().zip(m.sample_entries(&mut rng)) {
                *a += v;
            }
        }
        for (i, a) in acc.iter().enumerate() {
            let mean = a / n as f64;
            // per-component standard deviation is sqrt(var / 2)
            let tol = 3.0 * (m.covariance()[(i, i)].re / 2.0).sqrt() / (n as f64).sqrt();
            assert!((mean.re - means[i].re).abs() < tol, "re {i}: {mean}");
            assert!((mean.im - means[i].im).abs() < tol, "im {i}: {mean}");
        }
    }

    #[test]
    fn sample_covariance_matches_within_five_standard_errors() {
        let topo = Topology::full(2, 1).unwrap();
        let mut cov = real_cov(2, &[1.0, 0.0, 0.0, 0.5]);
        cov[(0, 1)] = Complex64::new(0.2, 0.3);
        cov[(1, 0)] = Complex64::new(0.2, -0.3);
        let m = FadingModel::new(topo, vec![Complex64::new(0.0, 0.0); 2], cov.clone(), None).unwrap();
        let n = 100_000;
        let mut rng = seed::rng(11);
        let draws: Vec<Vec<Complex64>> = (0..n).map(|_| m.sample_entries(&mut rng)).collect();
        for i in 0..2 {
            for j in 0..2 {
                let prods: Vec<Complex64> = draws.iter().map(|h| h[i] * h[j].conj()).collect();
                let mean = prods.iter().sum::<Complex64>() / n as f64;
                let re = Estimate::from_samples(&prods.iter().map(|z| z.re).collect::<Vec<_>>());
                let im = Estimate::from_samples(&prods.iter().map(|z| z.im).collect::<Vec<_>>());
                assert!((mean.re - cov[(i, j)].re).abs() <= 5.0 * re.std_error.max(1e-12), "({i},{j}) re");
                assert!((mean.im - cov[(i, j)].im).abs() <= 5.0 * im.std_error.max(1e-12), "({i},{j}) im");
            }
        }
    }

    #[test]
    fn rejects_indefinite_covariance_and_bad_shapes() {
        let topo = Topology::full(2, 1).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 2];
        assert!(matches!(
            FadingModel::new(topo.clone(), z.clone(), real_cov(2, &[1.0, 1.0, 1.0, 1.0]), None),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(FadingModel::new(topo.clone(), z.clone(), CMatrix::identity(3, 3), None).is_err());
        assert!(FadingModel::new(topo, z, CMatrix::identity(2, 2), Some(1.0)).is_err());
    }

    #[test]
    fn log_moment_closed_form_and_scaling() {
        let a = log_h_squared_mean(Complex64::new(0.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(a.value, -0.5772156649015329, epsilon = 1e-15);
        let b = log_h_squared_mean(Complex64::new(0.0, 0.0), 4.0).unwrap();
        assert_abs_diff_eq!(b.value - a.value, 4f64.ln(), epsilon = 1e-14);
        assert!(log_h_squared_mean(Complex64::new(0.0, 0.0), 0.0).is_err());
        assert!(log_h_squared_mean(Complex64::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn log_moment_monte_carlo_oracles() {
        let mc = log_h_squared_mean_mc(Complex64::new(0.0, 0.0), 1.0, 1_000_000, 3).unwrap();
        assert!((mc.value + EULER_MASCHERONI).abs() < 0.01);
        let q = log_h_squared_mean(Complex64::new(10.0, 0.0), 1.0).unwrap();
        assert!((q.value - 100f64.ln()).abs() < 0.05);
        let mc = log_h_squared_mean_mc(Complex64::new(10.0, 0.0), 1.0, 1_000_000, 4).unwrap();
        assert!((mc.value - 100f64.ln()).abs() < 0.05);
    }

    #[test]
    fn log_moment_quadrature_agrees_with_monte_carlo_on_grid() {
        let grid = [(0.3, 1.0), (1.0, 1.0), (2.0, 0.5), (0.5, 3.0), (4.0, 2.0)];
        for (k, &(mu, var)) in grid.iter().enumerate() {
            let mean = Complex64::from_polar(mu, 0.7 * k as f64);
            let q = log_h_squared_mean(mean, var).unwrap();
            let mc = log_h_squared_mean_mc(mean, var, 200_000, 100 + k as u64).unwrap();
            let tol = 3.0 * (mc.std_error + q.abs_error);
            assert!((q.value - mc.value).abs() < tol, "({mu}, {var}): {} vs {}", q.value, mc.value);
        }
    }

    #[test]
    fn log_moment_is_continuous_at_zero_mean() {
        let near = log_h_squared_mean(Complex64::new(1e-4, 0.0), 2.0).unwrap();
        let zero = log_h_squared_mean(Complex64::new(0.0, 0.0), 2.0).unwrap();
        assert_abs_diff_eq!(near.value, zero.value, epsilon = 1e-5);
    }

    #[test]
    fn block_mi_examples() {
        let topo = Topology::full(2, 1).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 2];
        let m = FadingModel::new(topo.clone(), z.clone(), real_cov(2, &[1.0, 0.6, 0.6, 1.0]), None).unwrap();
        let mi = block_mutual_information(&m, &[(1, 1)], &[(1, 2)]).unwrap();
        assert_abs_diff_eq!(mi, -(1.0f64 - 0.36).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(mi, 0.4462871026284195, epsilon = 1e-12);
        let rev = block_mutual_information(&m, &[(1, 2)], &[(1, 1)]).unwrap();
        assert_abs_diff_eq!(mi, rev, epsilon = 1e-14);
        assert!(block_mutual_information(&m, &[(1, 1)], &[(1, 1)]).is_err());

        let ind = FadingModel::rayleigh(Topology::full(2, 2).unwrap()).unwrap();
        let mi = block_mutual_information(&ind, &[(1, 1), (1, 2)], &[(2, 1), (2, 2)]).unwrap();
        assert_abs_diff_eq!(mi, 0.0, epsilon = 1e-14);
        assert!(block_mutual_information(&FadingModel::rayleigh(Topology::diagonal(2).unwrap()).unwrap(), &[(1, 2)], &[(1, 1)]).is_err());
    }

    #[test]
    fn block_mi_singular_joint_is_infinite() {
        let topo = Topology::full(2, 1).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 2];
        let almost = real_cov(2, &[1.0, 1.0 - 1e-17, 1.0 - 1e-17, 1.0]);
        // the model itself refuses a singular covariance
        assert!(FadingModel::new(topo, z, almost, None).is_err());
    }

    #[test]
    fn memory_gap_examples() {
        let topo = Topology::full(2, 2).unwrap();
        let m = FadingModel::rayleigh(topo).unwrap();
        assert!(memory_gap_ar1(&m).is_err());
        assert_eq!(memory_gap_ar1(&m.clone().with_ar1(0.0).unwrap()).unwrap(), 0.0);
        let g = memory_gap_ar1(&m.clone().with_ar1(0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(g, 4.0 * (4.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(g, 1.15073, epsilon = 1e-5);
        assert!(ar1_gap(1.0 - 1e-7, 4).is_err());
        assert!(ar1_gap(1.0, 4).is_err());
        assert!(ar1_gap(MAX_AR1_RHO, 4).unwrap().is_finite());
    }

    #[test]
    fn memory_gap_is_monotone() {
        let mut last = -1.0;
        for k in 0..20 {
            let g = ar1_gap(k as f64 * 0.05, 3).unwrap();
            assert!(g > last);
            last = g;
        }
        assert!(ar1_gap(0.5, 5).unwrap() > ar1_gap(0.5, 4).unwrap());
    }

    #[test]
    fn model_json_roundtrip() {
        let topo = Topology::wyner_linear(2).unwrap();
        let json = r#"{"means": [[1, 1, 0.5, -0.5]], "ar1_rho": 0.3}"#;
        let m = FadingModel::from_json(topo.clone(), json).unwrap();
        assert_eq!(m.mean(1, 1), Complex64::new(0.5, -0.5));
        assert_eq!(m.ar1_rho(), Some(0.3));
        let back = serde_json::to_string(&m.to_doc()).unwrap();
        let m2 = FadingModel::from_json(topo.clone(), &back).unwrap();
        assert_eq!(m2.means(), m.means());
        assert_eq!(m2.covariance(), m.covariance());
        assert!(FadingModel::from_json(topo.clone(), r#"{"means": [[1, 2, 1.0, 0.0]]}"#).is_err());
        assert!(FadingModel::from_json(topo, r#"{"covariance": [1.0, 0.0]}"#).is_err());
    }
}
