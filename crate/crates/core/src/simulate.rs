//! Monte Carlo estimates of the single-user rates of the layered scheme and
//! SNR sweeps that compare them with the analytic bounds.
//!
//! Given every input, the output at one receiver is complex Gaussian (the
//! fading is Gaussian and enters linearly), so the fading is integrated out
//! in closed form and only the inputs are sampled.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, PowerAllocation};
use crate::error::{Error, Result};
use crate::fading::{standard_complex_normal, Estimate, FadingModel};
use crate::linalg::{self, CMatrix};
use crate::powerchain::{self, PowerChain};
use crate::seed;
use crate::topology::Topology;

/// Smallest accepted outer and inner sample counts.
pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_OUTER: usize = 20_000;
pub const DEFAULT_INNER: usize = 2_000;

/// Law of the magnitude of one chain component; the phase is always
/// uniform and independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MagnitudeLaw {
    /// `ln |X|²` uniform on `[ln x_min², ln x_max²]`.
    LogUniform { x_min: f64, x_max: f64 },
    Constant(f64),
    /// `a` or `b` with probability one half each.
    TwoPoint { a: f64, b: f64 },
}

impl MagnitudeLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MagnitudeLaw::LogUniform { x_min, x_max } => x_min > 0.0 && x_min < x_max && x_max.is_finite(),
            MagnitudeLaw::Constant(x) => x > 0.0 && x.is_finite(),
            MagnitudeLaw::TwoPoint { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid magnitude law {self:?}")))
        }
    }

    /// Draws `|X|²`.
    fn sample_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MagnitudeLaw::LogUniform { x_min, x_max } => {
                let (lo, hi) = (2.0 * x_min.ln(), 2.0 * x_max.ln());
                (lo + (hi - lo) * rng.random::<f64>()).exp()
            }
            MagnitudeLaw::Constant(x) => x * x,
            MagnitudeLaw::TwoPoint { a, b } => {
                let m = if rng.random::<bool>() { a } else { b };
                m * m
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let p = self.sample_power(rng);
        Complex64::from_polar(p.sqrt(), TAU * rng.random::<f64>())
    }
}

/// Independent inputs on the chain transmitters, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputLaw {
    n_t: usize,
    chain: PowerChain,
    magnitudes: Vec<MagnitudeLaw>,
}

impl InputLaw {
    pub fn new(topo: &Topology, chain: PowerChain, magnitudes: Vec<MagnitudeLaw>) -> Result<Self> {
        PowerChain::new(topo, chain.transmitters().to_vec())?;
        if magnitudes.len() != chain.len() {
            return Err(Error::InvalidParameter(format!(
                "{} magnitude laws for a chain of length {}",
                magnitudes.len(),
                chain.len()
            )));
        }
        for m in &magnitudes {
            m.validate()?;
        }
        Ok(InputLaw { n_t: topo.n_t(), chain, magnitudes })
    }

    /// Log-uniform magnitudes on the allocation's levels.
    pub fn layered(topo: &Topology, chain: PowerChain, alloc: &PowerAllocation) -> Result<Self> {
        if alloc.kappa != chain.len() {
            return Err(Error::InvalidParameter("allocation and chain lengths differ".into()));
        }
        let mags = alloc
            .levels
            .iter()
            .map(|l| MagnitudeLaw::LogUniform { x_min: l.x_min, x_max: l.x_max })
            .collect();
        Self::new(topo, chain, mags)
    }

    pub fn chain(&self) -> &PowerChain {
        &self.chain
    }

    pub fn magnitudes(&self) -> &[MagnitudeLaw] {
        &self.magnitudes
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.n_t];
        for (&t, m) in self.chain.transmitters().iter().zip(&self.magnitudes) {
            x[t - 1] = m.sample(rng);
        }
        x
    }
}

pub fn sample_input(law: &InputLaw, seed: u64) -> Vec<Complex64> {
    law.sample_with(&mut seed::rng(seed))
}

/// `y = H x + z` with a fresh fading draw and unit-variance noise.
pub fn sample_output(model: &FadingModel, x: &[Complex64], seed: u64) -> Result<Vec<Complex64>> {
    let n_t = model.topology().n_t();
    if x.len() != n_t {
        return Err(Error::InvalidParameter(format!("input has length {}, expected {n_t}", x.len())));
    }
    let mut rng = seed::rng(seed);
    let h = model.sample_matrix_with(&mut rng);
    let xv = nalgebra::DVector::from_column_slice(x);
    let hx = h * xv;
    Ok(hx.iter().map(|v| v + standard_complex_normal(&mut rng)).collect())
}

/// Sample counts of the nested estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sampling {
    pub n_outer: usize,
    pub m_inner: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { n_outer: DEFAULT_OUTER, m_inner: DEFAULT_INNER }
    }
}

impl Sampling {
    fn validate(&self) -> Result<()> {
        if self.n_outer < MIN_SAMPLES || self.m_inner < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "sample counts must be at least {MIN_SAMPLES}, got n_outer = {}, m_inner = {}",
                self.n_outer, self.m_inner
            )));
        }
        Ok(())
    }
}

/// Output of receiver `r_ν` seen as a function of the active inputs
/// `x(t_ν), x(t_{ν+1}), …` (first component is the level's own input).
struct ScalarChannel {
    means: Vec<Complex64>,
    cov: CMatrix,
    laws: Vec<MagnitudeLaw>,
}

impl ScalarChannel {
    fn new(model: &FadingModel, law: &InputLaw, nu: usize) -> Result<Self> {
        let chain = law.chain();
        if nu == 0 || nu > chain.len() {
            return Err(Error::IndexOutOfRange { what: "level", index: nu, max: chain.len() });
        }
        if model.topology().n_t() != law.n_t {
            return Err(Error::InvalidParameter("input law and fading model disagree on n_t".into()));
        }
        let r = chain.witnesses()[nu - 1];
        for &t in &chain.transmitters()[..nu - 1] {
            if model.entry_index(r, t).is_some() {
                return Err(Error::InvalidChain(format!(
                    "earlier chain member {t} reaches witness receiver {r} of level {nu}"
                )));
            }
        }
        let own = chain.transmitters()[nu - 1];
        model.require_entry(r, own)?;
        let mut idx = vec![model.require_entry(r, own)?];
        let mut laws = vec![law.magnitudes()[nu - 1]];
        for (&t, m) in chain.transmitters()[nu..].iter().zip(&law.magnitudes()[nu..]) {
            if let Some(i) = model.entry_index(r, t) {
                idx.push(i);
                laws.push(*m);
            }
        }
        Ok(ScalarChannel {
            means: idx.iter().map(|&i| model.means()[i]).collect(),
            cov: linalg::principal_submatrix(model.covariance(), &idx),
            laws,
        })
    }

    fn has_interferers(&self) -> bool {
        self.laws.len() > 1
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64], from: usize) {
        for (o, l) in out[from..].iter_mut().zip(&self.laws[from..]) {
            *o = l.sample(rng);
        }
    }

    /// Mean and variance of the output given the inputs.
    fn moments(&self, x: &[Complex64]) -> (Complex64, f64) {
        let mean = self.means.iter().zip(x).map(|(m, v)| m * v).sum();
        let mut var = 1.0;
        for (i, xi) in x.iter().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                var += (xi * self.cov[(i, j)] * xj.conj()).re;
            }
        }
        (mean, var)
    }

    fn log_density(&self, y: Complex64, x: &[Complex64]) -> f64 {
        let (m, v) = self.moments(x);
        -(PI * v).ln() - (y - m).norm_sqr() / v
    }
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + (xs.iter().map(|x| (x - max).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// Log density of `y` with the inputs from position `from` on replaced by
/// `m` fresh draws.
fn mixture_log_density<R: Rng + ?Sized>(
    ch: &ScalarChannel,
    y: Complex64,
    fixed: &[Complex64],
    from: usize,
    m: usize,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> f64 {
    let mut x = fixed.to_vec();
    buf.clear();
    for _ in 0..m {
        ch.draw(rng, &mut x, from);
        buf.push(ch.log_density(y, &x));
    }
    log_mean_exp(buf)
}

#[derive(Clone, Copy)]
enum Target {
    /// `I(X(t_ν); Y(r_ν))`
    Marginal,
    /// `I(X(t_ν); Y(r_ν) | X(t_η), η > ν)`
    Conditional,
}

fn estimate(
    model: &FadingModel,
    law: &InputLaw,
    nu: usize,
    sampling: Sampling,
    seed: u64,
    target: Target,
) -> Result<Estimate> {
    sampling.validate()?;
    let ch = ScalarChannel::new(model, law, nu)?;
    let m = sampling.m_inner;
    let terms: Vec<f64> = (0..sampling.n_outer)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_at(seed, &[i as u64]);
            let mut x = vec![Complex64::new(0.0, 0.0); ch.laws.len()];
            ch.draw(&mut rng, &mut x, 0);
            let (mean, var) = ch.moments(&x);
            let y = mean + standard_complex_normal(&mut rng) * var.sqrt();
            let mut buf = Vec::with_capacity(m);
            match target {
                Target::Marginal => {
                    let cond = if ch.has_interferers() {
                        mixture_log_density(&ch, y, &x, 1, m, &mut rng, &mut buf)
                    } else {
                        ch.log_density(y, &x)
                    };
                    cond - mixture_log_density(&ch, y, &x, 0, m, &mut rng, &mut buf)
                }
                Target::Conditional => {
                    // fresh own input, interferers held at their drawn values
                    let joint = ch.log_density(y, &x);
                    let mut buf2 = Vec::with_capacity(m);
                    let mut xi = x.clone();
                    buf2.clear();
                    for _ in 0..m {
                        xi[0] = ch.laws[0].sample(&mut rng);
                        buf2.push(ch.log_density(y, &xi));
                    }
                    joint - log_mean_exp(&buf2)
                }
            }
        })
        .collect();
    Ok(Estimate::from_samples(&terms))
}

/// Nested Monte Carlo estimate of `I(X(t_ν); Y(r_ν))` at the witness
/// receiver of level `nu`, with later chain members acting as interferers.
pub fn estimate_pair_mi(
    model: &FadingModel,
    law: &InputLaw,
    nu: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<Estimate> {
    estimate(model, law, nu, sampling, seed, Target::Marginal)
}

/// Like [`estimate_pair_mi`] but with the interferers' inputs known at the
/// receiver.
pub fn estimate_conditional_pair_mi(
    model: &FadingModel,
    law: &InputLaw,
    nu: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<Estimate> {
    estimate(model, law, nu, sampling, seed, Target::Conditional)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub snr: f64,
    pub kappa_star: usize,
    pub loglog: f64,
    pub feasible: bool,
    pub lower: Option<f64>,
    pub mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub mc_levels: Vec<Estimate>,
    pub upper: Option<f64>,
    pub n_outer: usize,
    pub m_inner: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub sampling: Sampling,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    /// Skip the Monte Carlo estimates and report bounds only.
    pub bounds_only: bool,
}

impl SweepConfig {
    pub fn new(seed: u64) -> Self {
        SweepConfig { sampling: Sampling::default(), seed, workers: 1, bounds_only: false }
    }
}

/// One record per grid point. Points below the allocation threshold are
/// marked infeasible and the rest are still computed.
pub fn snr_sweep(topo: &Topology, model: &FadingModel, grid: &[f64], cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty SNR grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|e| !(e.is_finite() && *e > 1.0)) {
        return Err(Error::InvalidParameter("SNR grid must be finite, above 1 and strictly increasing".into()));
    }
    if !cfg.bounds_only {
        cfg.sampling.validate()?;
    }
    if model.topology() != topo {
        return Err(Error::InvalidParameter("fading model was built for a different topology".into()));
    }
    let (kappa, chain) = powerchain::longest_chain(topo)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        grid.par_iter()
            .map(|&snr| sweep_point(topo, model, &chain, kappa, snr, cfg))
            .collect::<Result<Vec<_>>>()
    })
}

fn sweep_point(
    topo: &Topology,
    model: &FadingModel,
    chain: &PowerChain,
    kappa: usize,
    snr: f64,
    cfg: &SweepConfig,
) -> Result<SweepRecord> {
    let mut rec = SweepRecord {
        snr,
        kappa_star: kappa,
        loglog: kappa as f64 * snr.ln().ln(),
        feasible: false,
        lower: None,
        mc: None,
        mc_stderr: None,
        mc_levels: Vec::new(),
        upper: None,
        n_outer: cfg.sampling.n_outer,
        m_inner: cfg.sampling.m_inner,
        seed: cfg.seed,
        error: None,
    };
    let alloc = match bounds::allocation(snr, kappa) {
        Ok(a) => a,
        Err(e @ Error::InfeasibleAllocation { .. }) => {
            rec.error = Some(e.to_string());
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    let report = bounds::bound_report(topo, chain, model, snr)?;
    rec.feasible = true;
    rec.lower = Some(report.lower_bound);
    rec.upper = report.upper_bound;
    if !cfg.bounds_only {
        let law = InputLaw::layered(topo, chain.clone(), &alloc)?;
        rec.mc_levels = (1..=kappa)
            .map(|nu| {
                let s = seed::derive(cfg.seed, &[snr.to_bits(), nu as u64]);
                estimate_pair_mi(model, &law, nu, cfg.sampling, s)
            })
            .collect::<Result<Vec<_>>>()?;
        rec.mc = Some(rec.mc_levels.iter().map(|e| e.value).sum());
        rec.mc_stderr = Some(rec.mc_levels.iter().map(|e| e.std_error.powi(2)).sum::<f64>().sqrt());
    }
    Ok(rec)
}

/// Least-squares fit of `value = intercept + slope · ln ln E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoglogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Fits `(E, value)` pairs.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LoglogFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(e, v)| !(e > 1.0) || !v.is_finite()) {
        return Err(Error::Fit("points need E > 1 and finite values".into()));
    }
    let xs: Vec<f64> = points.iter().map(|&(e, _)| e.ln().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-12 * mx.abs().max(1.0) {
        return Err(Error::Fit("all E values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(points).map(|(x, p)| (p.1 - intercept - slope * x).powi(2)).sum();
    Ok(LoglogFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// `(E, mc)` of the feasible records that carry an estimate.
pub fn mc_points(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    records.iter().filter_map(|r| r.mc.filter(|_| r.feasible).map(|v| (r.snr, v))).collect()
}

/// `(E, lower)` of the feasible records.
pub fn lower_points(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    records.iter().filter_map(|r| r.lower.filter(|_| r.feasible).map(|v| (r.snr, v))).collect()
}

#[derive(Serialize)]
struct CsvRow {
    #[serde(rename = "E")]
    e: f64,
    kappa_star: usize,
    loglog: f64,
    lower: Option<f64>,
    mc: Option<f64>,
    mc_stderr: Option<f64>,
    upper: Option<f64>,
    feasible: bool,
}

/// Columns `E,kappa_star,loglog,lower,mc,mc_stderr,upper,feasible`; missing
/// values are empty fields.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["E", "kappa_star", "loglog", "lower", "mc", "mc_stderr", "upper", "feasible"])?;
    }
    for r in records {
        w.serialize(CsvRow {
            e: r.snr,
            kappa_star: r.kappa_star,
            loglog: r.loglog,
            lower: r.lower,
            mc: r.mc,
            mc_stderr: r.mc_stderr,
            upper: r.upper,
            feasible: r.feasible,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)?;
    Ok(())
}
