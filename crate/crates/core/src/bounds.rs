//! Analytic capacity bounds: the layered power allocation, the per-level
//! achievable-rate bound with its interference correction, and the
//! duality-based upper bounds.
//!
//! `E` is the SNR budget. The scheme's peak magnitudes reach `E` itself,
//! so its average power `Σ_ν E|X(t_ν)|²` (see [`PowerAllocation::input_power`])
//! is what the upper bounds are evaluated at when they are compared with
//! the scheme.

use std::collections::BTreeSet;
use std::f64::consts::{E as EULER, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fading::{self, FadingModel};
use crate::numeric::{self, digamma, ln_gamma};
use crate::powerchain::{self, PowerChain};
use crate::topology::Topology;

pub use crate::fading::memory_gap_ar1;

/// Bracket, in `ln ρ`, searched for the supremum over the dominant input
/// power.
const LOG_RHO_BRACKET: (f64, f64) = (-300.0, 300.0);
const SUP_TOL: f64 = 1e-6;

/// Smallest `E₀` such that the allocation has `x_min,ν < x_max,ν` at every
/// level for all `E ≥ E₀`.
pub fn min_valid_snr(kappa: usize) -> Result<f64> {
    if kappa == 0 {
        return Err(Error::InvalidParameter("kappa must be at least 1".into()));
    }
    // The binding level is ν = κ: E^{1/(κ(κ+1))} > ln E.
    let k = (kappa * (kappa + 1)) as f64;
    Ok(match numeric::upper_root_exp_vs_identity(k) {
        Some(u) => u.exp(),
        None => EULER,
    })
}

/// Magnitude interval of one level of the layered input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub x_min: f64,
    pub x_max: f64,
}

impl Level {
    /// `E|X|²` when `ln |X|²` is uniform on `[ln x_min², ln x_max²]`.
    pub fn mean_power(&self) -> f64 {
        let (a, b) = (self.x_min * self.x_min, self.x_max * self.x_max);
        (b - a) / (b / a).ln()
    }

    /// `h(ln |X|²) = ln ln(x_max² / x_min²)`.
    pub fn log_magnitude_entropy(&self) -> f64 {
        (2.0 * (self.x_max / self.x_min).ln()).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    pub snr: f64,
    pub kappa: usize,
    pub levels: Vec<Level>,
}

/// `x_max,ν = E^{1/ν}`, `x_min,ν = E^{1/(ν+1)} ln E`.
pub fn allocation(snr: f64, kappa: usize) -> Result<PowerAllocation> {
    let threshold = min_valid_snr(kappa)?;
    if !(snr >= threshold) || !snr.is_finite() {
        return Err(Error::InfeasibleAllocation { snr, threshold });
    }
    let ln_e = snr.ln();
    let levels = (1..=kappa)
        .map(|nu| Level {
            x_min: (ln_e / (nu + 1) as f64).exp() * ln_e,
            x_max: (ln_e / nu as f64).exp(),
        })
        .collect();
    Ok(PowerAllocation { snr, kappa, levels })
}

impl PowerAllocation {
    /// Level `nu`, 1-based.
    pub fn level(&self, nu: usize) -> Result<Level> {
        self.check_level(nu)?;
        Ok(self.levels[nu - 1])
    }

    fn check_level(&self, nu: usize) -> Result<()> {
        if nu == 0 || nu > self.kappa {
            return Err(Error::IndexOutOfRange { what: "level", index: nu, max: self.kappa });
        }
        Ok(())
    }

    /// `max_{ν<η≤κ} x_max,η²`, zero at the last level.
    pub fn interferer_peak(&self, nu: usize) -> Result<f64> {
        self.check_level(nu)?;
        Ok(self.levels[nu..].iter().map(|l| l.x_max * l.x_max).fold(0.0, f64::max))
    }

    /// `x_min,ν² / max_{η>ν} x_max,η²` for `ν < κ`; equals `(ln E)²`.
    pub fn separation_ratios(&self) -> Vec<f64> {
        (1..self.kappa)
            .map(|nu| {
                let l = self.levels[nu - 1];
                l.x_min * l.x_min / self.interferer_peak(nu).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// `x_min,ν > x_max,ν+1` for every `ν < κ`.
    pub fn is_nested(&self) -> bool {
        self.levels.windows(2).all(|w| w[0].x_min > w[1].x_max)
    }

    /// `E‖X‖²` of the layered input.
    pub fn input_power(&self) -> f64 {
        self.levels.iter().map(Level::mean_power).sum()
    }
}

/// `1 + frob2 · (κ − ν) · max_{η>ν} x_max,η²`.
pub fn effective_noise_variance(nu: usize, alloc: &PowerAllocation, frob2: f64) -> Result<f64> {
    check_positive("frob2", frob2)?;
    let peak = alloc.interferer_peak(nu)?;
    Ok(1.0 + frob2 * (alloc.kappa - nu) as f64 * peak)
}

/// Achievable rate of `Y = H X + W` for circularly symmetric log-uniform
/// `|X| ∈ [x_min, x_max]`, where `σ_H²`, `σ_W²` are the variances of `H`
/// and `W` and `e_log_h2 = E[ln |H|²]`.
pub fn lemma5_lower_bound(x_min: f64, x_max: f64, sigma_h: f64, sigma_w: f64, e_log_h2: f64) -> Result<f64> {
    if !(x_min > 0.0 && x_min < x_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < x_min < x_max, got x_min = {x_min}, x_max = {x_max}"
        )));
    }
    check_positive("sigma_h", sigma_h)?;
    if !(sigma_w >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_w = {sigma_w} is negative")));
    }
    let h_log = Level { x_min, x_max }.log_magnitude_entropy();
    let spread = sigma_h + sigma_w / x_min;
    Ok(h_log + PI.ln() + e_log_h2 - (PI * EULER * spread * spread).ln())
}

/// Rate lost by a single-user detector at level `ν` that ignores the
/// interferers: `ln(1 + frob2 (κ−ν) max_{η>ν} x_max,η² / (1 + ε² x_min,ν²))`.
pub fn interference_penalty(nu: usize, alloc: &PowerAllocation, frob2: f64, eps2: f64) -> Result<f64> {
    check_positive("frob2", frob2)?;
    check_positive("eps2", eps2)?;
    let peak = alloc.interferer_peak(nu)?;
    let x_min = alloc.levels[nu - 1].x_min;
    Ok((frob2 * (alloc.kappa - nu) as f64 * peak / (1.0 + eps2 * x_min * x_min)).ln_1p())
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} = {v} must be positive and finite")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTerms {
    pub level: usize,
    pub transmitter: usize,
    pub receiver: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub noise_variance: f64,
    pub e_log_h2: f64,
    pub lemma5: f64,
    pub eps2: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeLowerBound {
    pub total: f64,
    pub levels: Vec<LevelTerms>,
}

/// Sum over the chain of the per-level achievable rates, each with the
/// interferers folded into the noise, plus the single-user penalties.
pub fn scheme_rate_lower_bound(
    topo: &Topology,
    chain: &PowerChain,
    model: &FadingModel,
    snr: f64,
) -> Result<SchemeLowerBound> {
    check_same_topology(topo, model)?;
    powerchain::PowerChain::new(topo, chain.transmitters().to_vec())?;
    let kappa = chain.len();
    let alloc = allocation(snr, kappa)?;
    let frob2 = model.frobenius_second_moment();
    let mut levels = Vec::with_capacity(kappa);
    for nu in 1..=kappa {
        let t = chain.transmitters()[nu - 1];
        let r = chain.witnesses()[nu - 1];
        let lvl = alloc.levels[nu - 1];
        let var_h = model.variance(r, t);
        let e_log_h2 = fading::log_h_squared_mean(model.mean(r, t), var_h)?.value;
        let noise_variance = effective_noise_variance(nu, &alloc, frob2)?;
        let lemma5 = lemma5_lower_bound(lvl.x_min, lvl.x_max, var_h.sqrt(), noise_variance.sqrt(), e_log_h2)?;
        let interferers: Vec<(usize, usize)> = chain.transmitters()[nu..]
            .iter()
            .filter(|&&te| model.entry_index(r, te).is_some())
            .map(|&te| (r, te))
            .collect();
        let eps2 = model.conditional_covariance(&[(r, t)], &interferers)?[(0, 0)].re;
        let penalty = interference_penalty(nu, &alloc, frob2, eps2)?;
        levels.push(LevelTerms {
            level: nu,
            transmitter: t,
            receiver: r,
            x_min: lvl.x_min,
            x_max: lvl.x_max,
            noise_variance,
            e_log_h2,
            lemma5,
            eps2,
            penalty,
        });
    }
    Ok(SchemeLowerBound { total: levels.iter().map(|l| l.lemma5).sum(), levels })
}

fn check_same_topology(topo: &Topology, model: &FadingModel) -> Result<()> {
    if model.topology() != topo {
        return Err(Error::InvalidParameter("fading model was built for a different topology".into()));
    }
    Ok(())
}

/// Breakdown of the duality bound on one block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityBound {
    pub value: f64,
    pub dominant_transmitter: usize,
    pub n_receivers: usize,
    pub n_transmitters: usize,
    pub frob2: f64,
    /// `n_R ln π − ln Γ(n_R)`.
    pub base: f64,
    /// Supremum over the dominant input power `ρ = |x(t*)|²`.
    pub sup_term: f64,
    pub sup_argmax_rho: f64,
    pub sup_iterations: usize,
    /// Entropy of the dominant column given the rest of the block.
    pub h_cond: f64,
    pub alpha: f64,
    /// Constant `c` with `value ≤ ln(1 + ln(1 + power)) + c` for every power.
    pub constant: f64,
}

/// Duality bound on `I(X; Y)` for the sub-network on `receivers ×
/// transmitters`, where every receiver hears `dominant` and inputs satisfy
/// `|x(dominant)| = max_t |x(t)|` and `E‖X‖² ≤ power`.
pub fn lemma3_block_bound(
    model: &FadingModel,
    receivers: &BTreeSet<usize>,
    transmitters: &BTreeSet<usize>,
    dominant: usize,
    power: f64,
) -> Result<DualityBound> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::InvalidParameter(format!("power = {power} must be finite and non-negative")));
    }
    if receivers.is_empty() || !transmitters.contains(&dominant) {
        return Err(Error::InvalidParameter("block needs receivers and must contain the dominant transmitter".into()));
    }
    let column: Vec<(usize, usize)> = receivers.iter().map(|&r| (r, dominant)).collect();
    for &(r, t) in &column {
        model.require_entry(r, t)?;
    }
    let others: Vec<(usize, usize)> = receivers
        .iter()
        .flat_map(|&r| transmitters.iter().map(move |&t| (r, t)))
        .filter(|&(r, t)| t != dominant && model.entry_index(r, t).is_some())
        .collect();
    let pairs: Vec<(usize, usize)> = column.iter().chain(&others).copied().collect();
    let frob2 = model.block_second_moment(&pairs);
    let n_r = receivers.len() as f64;
    let n_t = transmitters.len() as f64;
    let h_cond = model.conditional_entropy(&column, &others)?;
    let ln_pie = (PI * EULER).ln();

    let objective = |log_rho: f64| {
        let rho = log_rho.exp();
        n_r * (frob2 * n_t * rho + n_r).ln() - (n_r * ln_pie).max(n_r * log_rho + h_cond)
    };
    // Both tails are flat, so a unit-step scan locates the peak before the
    // golden-section refinement.
    let (lo, hi) = LOG_RHO_BRACKET;
    let steps = (hi - lo) as usize;
    let best = (0..=steps)
        .map(|i| (i, objective(lo + i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if best.0 == 0 || best.0 == steps {
        return Err(Error::NonConvergence(format!(
            "supremum at ln rho = {} sits on the search bracket [{lo}, {hi}]",
            lo + best.0 as f64
        )));
    }
    let centre = lo + best.0 as f64;
    let sup = numeric::golden_section_max(objective, centre - 1.0, centre + 1.0, SUP_TOL, SUP_TOL, 10_000)?;

    let base = n_r * PI.ln() - ln_gamma(n_r);
    let e_log_y = digamma(n_r);
    let gap = 1.0 + (frob2 * power + n_r).ln() - e_log_y;
    let alpha = 1.0 / gap;
    let value = base + sup.value + alpha * gap + ln_gamma(alpha) - alpha * alpha.ln();

    // ln Γ(α) ≤ −ln α on (0, 1], −α ln α ≤ 1/e, and
    // gap ≤ a (1 + ln(1 + power)) with a = 1 + ln max(frob2, n_R) − ψ(n_R) ≥ 1.
    let a = 1.0 + frob2.max(n_r).ln() - e_log_y;
    let constant = base + sup.value + 1.0 + 1.0 / EULER + a.ln();

    Ok(DualityBound {
        value,
        dominant_transmitter: dominant,
        n_receivers: receivers.len(),
        n_transmitters: transmitters.len(),
        frob2,
        base,
        sup_term: sup.value,
        sup_argmax_rho: sup.argmax.exp(),
        sup_iterations: sup.iterations,
        h_cond,
        alpha,
        constant,
    })
}

/// Duality bound with the whole network as one block. The dominant
/// transmitter is the smallest one heard by every receiver.
pub fn duality_upper_bound(topo: &Topology, model: &FadingModel, power: f64) -> Result<DualityBound> {
    check_same_topology(topo, model)?;
    topo.require_pruned()?;
    let receivers: BTreeSet<usize> = (1..=topo.n_r()).collect();
    let transmitters: BTreeSet<usize> = (1..=topo.n_t()).collect();
    let dominant = (1..=topo.n_t())
        .find(|&t| topo.hearers(t).map(|h| h.len() == topo.n_r()).unwrap_or(false))
        .ok_or_else(|| Error::InvalidTopology("no transmitter is heard by every receiver".into()))?;
    lemma3_block_bound(model, &receivers, &transmitters, dominant, power)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopePhase {
    pub phase: usize,
    pub receivers: Vec<usize>,
    pub transmitters: Vec<usize>,
    pub block: DualityBound,
    pub cross_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseEnvelope {
    pub value: f64,
    pub kappa: usize,
    pub constant: f64,
    pub ln_permutations: f64,
    pub phases: Vec<EnvelopePhase>,
}

/// `κ · ln(1 + ln(1 + power)) + c` along the identity-permutation chain.
///
/// Phase `ν` covers the fresh receivers `B_ν` and the transmitters
/// `A_ν ∪ … ∪ A_κ` with `t_ν` dominant. `c` collects the per-phase block
/// constants, the fading information shared between `B_ν` and the later
/// receivers, and `ln n_T!` for the ordering of the inputs.
pub fn converse_envelope(topo: &Topology, model: &FadingModel, power: f64) -> Result<ConverseEnvelope> {
    check_same_topology(topo, model)?;
    let identity: Vec<usize> = (1..=topo.n_t()).collect();
    let dec = powerchain::decompose(topo, &identity)?;
    let kappa = dec.kappa();
    let mut phases = Vec::with_capacity(kappa);
    for nu in 0..kappa {
        let receivers = &dec.receiver_blocks[nu];
        let transmitters: BTreeSet<usize> = dec.transmitter_blocks[nu..].iter().flatten().copied().collect();
        let dominant = dec.chain.transmitters()[nu];
        let block = lemma3_block_bound(model, receivers, &transmitters, dominant, power)?;
        let later: BTreeSet<usize> = dec.receiver_blocks[nu + 1..].iter().flatten().copied().collect();
        let entries = |rows: &BTreeSet<usize>| -> Vec<(usize, usize)> {
            rows.iter()
                .flat_map(|&r| transmitters.iter().map(move |&t| (r, t)))
                .filter(|&(r, t)| model.entry_index(r, t).is_some())
                .collect()
        };
        let cross_information = fading::block_mutual_information(model, &entries(receivers), &entries(&later))?;
        phases.push(EnvelopePhase {
            phase: nu + 1,
            receivers: receivers.iter().copied().collect(),
            transmitters: transmitters.into_iter().collect(),
            block,
            cross_information,
        });
    }
    let ln_permutations = numeric::ln_factorial(topo.n_t());
    let constant = phases.iter().map(|p| p.block.constant + p.cross_information).sum::<f64>() + ln_permutations;
    Ok(ConverseEnvelope {
        value: kappa as f64 * (1.0 + power.ln_1p()).ln() + constant,
        kappa,
        constant,
        ln_permutations,
        phases,
    })
}

/// Everything known analytically at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub snr: f64,
    pub kappa: usize,
    pub loglog_term: f64,
    pub input_power: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub levels: Vec<LevelTerms>,
    pub duality: Option<DualityBound>,
    pub envelope: Option<ConverseEnvelope>,
    pub memory_gap: Option<f64>,
}

/// Lower bound of the layered scheme along `chain`, and the upper bounds
/// evaluated at the scheme's average input power. Upper bounds are only
/// produced on pruned topologies; the reported `upper_bound` is the
/// smaller of the two when both apply.
pub fn bound_report(topo: &Topology, chain: &PowerChain, model: &FadingModel, snr: f64) -> Result<BoundReport> {
    let lower = scheme_rate_lower_bound(topo, chain, model, snr)?;
    let alloc = allocation(snr, chain.len())?;
    let power = alloc.input_power();
    let (duality, envelope) = if topo.is_pruned() {
        let duality = match duality_upper_bound(topo, model, power) {
            Ok(d) => Some(d),
            Err(Error::InvalidTopology(_)) => None,
            Err(e) => return Err(e),
        };
        (duality, Some(converse_envelope(topo, model, power)?))
    } else {
        (None, None)
    };
    let upper_bound = duality
        .iter()
        .map(|d| d.value)
        .chain(envelope.iter().map(|e| e.value))
        .reduce(f64::min);
    let memory_gap = model.ar1_rho().map(|_| memory_gap_ar1(model)).transpose()?;
    Ok(BoundReport {
        snr,
        kappa: chain.len(),
        loglog_term: chain.len() as f64 * snr.ln().ln(),
        input_power: power,
        lower_bound: lower.total,
        upper_bound,
        levels: lower.levels,
        duality,
        envelope,
        memory_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::FadingModel;
    use crate::linalg::CMatrix;
    use crate::numeric::EULER_MASCHERONI;
    use crate::powerchain::longest_chain;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(min_valid_snr(1).unwrap(), EULER);
        let e2 = min_valid_snr(2).unwrap();
        assert!((2.0e7..3.0e7).contains(&e2), "{e2}");
        // the defining equation holds at the threshold
        assert_abs_diff_eq!(e2.ln() / 6.0, e2.ln().ln(), epsilon = 1e-9);
        assert!(min_valid_snr(0).is_err());
        assert!(min_valid_snr(3).unwrap() > e2);
    }

    #[test]
    fn kappa_one_allocation_is_valid_everywhere_above_e() {
        let mut e = EULER * 1.0001;
        while e < 1e4 {
            assert!(e.sqrt() > e.ln());
            allocation(e, 1).unwrap();
            e *= 1.37;
        }
    }

    #[test]
    fn allocation_examples() {
        let a = allocation(1e8, 2).unwrap();
        let ln_e = 1e8f64.ln();
        assert_relative_eq!(a.levels[0].x_max, 1e8, max_relative = 1e-12);
        assert_relative_eq!(a.levels[1].x_max, 1e4, max_relative = 1e-12);
        assert_relative_eq!(a.levels[0].x_min, 1e4 * ln_e, max_relative = 1e-12);
        assert_relative_eq!(a.levels[1].x_min, 1e8f64.cbrt() * ln_e, max_relative = 1e-12);
        assert_abs_diff_eq!(a.levels[1].x_min, 8550.1, epsilon = 0.1);
        assert!(a.is_nested());
        let a1 = allocation(1e8, 1).unwrap();
        assert_relative_eq!(a1.levels[0].x_min, 1e4 * 18.420680743952367, max_relative = 1e-12);
        match allocation(1e6, 2) {
            Err(Error::InfeasibleAllocation { snr, threshold }) => {
                assert_eq!(snr, 1e6);
                assert!((2.0e7..3.0e7).contains(&threshold));
            }
            other => panic!("{other:?}"),
        }
        // at 1e6 the second level would be inverted
        assert!(1e6f64.cbrt() * 1e6f64.ln() > 1e3);
    }

    #[test]
    fn separation_ratio_is_log_squared() {
        for &e in &[1e8, 1e12, 1e16] {
            let a = allocation(e, 3).unwrap_or_else(|_| allocation(1e40, 3).unwrap());
            let ln_e = a.snr.ln();
            for r in a.separation_ratios() {
                assert_relative_eq!(r, ln_e * ln_e, max_relative = 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn nesting_above_scaled_threshold(kappa in 1usize..5, scale in 0.0f64..30.0) {
            let e = EULER * min_valid_snr(kappa).unwrap() * 10f64.powf(scale);
            let a = allocation(e, kappa).unwrap();
            prop_assert!(a.is_nested());
            for l in &a.levels {
                prop_assert!(0.0 < l.x_min && l.x_min < l.x_max);
            }
        }

        #[test]
        fn lemma5_monotonicity(
            x_min in 1.0f64..1e3,
            ratio in 1.5f64..1e6,
            sh in 0.1f64..3.0,
            sw in 0.0f64..10.0,
            el in -3.0f64..3.0,
        ) {
            let x_max = x_min * ratio;
            let base = lemma5_lower_bound(x_min, x_max, sh, sw, el).unwrap();
            prop_assert!(lemma5_lower_bound(x_min, x_max * 2.0, sh, sw, el).unwrap() > base);
            prop_assert!(lemma5_lower_bound(x_min, x_max, sh, sw, el + 0.1).unwrap() > base);
            prop_assert!(lemma5_lower_bound(x_min, x_max, sh, sw + 0.5, el).unwrap() < base);
        }
    }

    #[test]
    fn noise_variance_examples() {
        let a = allocation(1e8, 2).unwrap();
        assert_eq!(effective_noise_variance(2, &a, 4.0).unwrap(), 1.0);
        assert_relative_eq!(effective_noise_variance(1, &a, 4.0).unwrap(), 4.00000001e8, max_relative = 1e-12);
        assert!(effective_noise_variance(3, &a, 4.0).is_err());
        assert!(effective_noise_variance(0, &a, 4.0).is_err());
        let a = allocation(1e50, 4).unwrap();
        let v: Vec<f64> = (1..=4).map(|nu| effective_noise_variance(nu, &a, 2.0).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn lemma5_examples() {
        let v = lemma5_lower_bound(1e3, 1e6, 1.0, 1.0, -EULER_MASCHERONI).unwrap();
        let oracle = (1e6f64.ln()).ln() + PI.ln() - EULER_MASCHERONI - (PI * EULER * (1.0 + 1e-3f64).powi(2)).ln();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.047, epsilon = 1e-3);
        let limit = lemma5_lower_bound(1e3, 1e6, 1.0, 0.0, -0.3).unwrap();
        assert_abs_diff_eq!(limit, (1e6f64.ln()).ln() - 0.3 - 1.0, epsilon = 1e-12);
        assert!(lemma5_lower_bound(5.0, 5.0, 1.0, 1.0, 0.0).is_err());
        assert!(lemma5_lower_bound(5.0, 6.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn penalty_examples() {
        let a = allocation(1e8, 2).unwrap();
        assert_eq!(interference_penalty(2, &a, 4.0, 1.0).unwrap(), 0.0);
        let x = 1e4 * 1e8f64.ln();
        let oracle = (1.0 + 4e8 / (1.0 + x * x)).ln();
        let p = interference_penalty(1, &a, 4.0, 1.0).unwrap();
        assert_abs_diff_eq!(p, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(p, 0.01172, epsilon = 1e-5);
        assert!(interference_penalty(1, &a, 4.0, 0.0).is_err());
        let mut last = f64::INFINITY;
        for k in 8..=20 {
            let p = interference_penalty(1, &allocation(10f64.powi(k), 2).unwrap(), 4.0, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn scalar_scheme_matches_lemma5() {
        let topo = Topology::full(1, 1).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        let (_, chain) = longest_chain(&topo).unwrap();
        let lb = scheme_rate_lower_bound(&topo, &chain, &model, 1e8).unwrap();
        let a = allocation(1e8, 1).unwrap();
        let direct = lemma5_lower_bound(a.levels[0].x_min, a.levels[0].x_max, 1.0, 1.0, -EULER_MASCHERONI).unwrap();
        assert_abs_diff_eq!(lb.total, direct, epsilon = 1e-12);
        assert!(scheme_rate_lower_bound(&Topology::diagonal(2).unwrap(), &longest_chain(&Topology::diagonal(2).unwrap()).unwrap().1, &FadingModel::rayleigh(Topology::diagonal(2).unwrap()).unwrap(), 1e6).is_err());
    }

    #[test]
    fn penalty_uses_conditional_variance() {
        // r1 hears t1 and t2, r2 hears t2 only; chain (1, 2) with witnesses (1, 2)
        let topo = Topology::new(2, 2, [(2, 1)]).unwrap();
        let mut cov = CMatrix::identity(3, 3);
        cov[(0, 1)] = Complex64::new(0.6, 0.0);
        cov[(1, 0)] = Complex64::new(0.6, 0.0);
        let model = FadingModel::new(topo.clone(), vec![Complex64::new(0.0, 0.0); 3], cov, None).unwrap();
        let chain = PowerChain::new(&topo, vec![1, 2]).unwrap();
        let lb = scheme_rate_lower_bound(&topo, &chain, &model, 1e10).unwrap();
        assert_abs_diff_eq!(lb.levels[0].eps2, 1.0 - 0.36, epsilon = 1e-12);
        assert_eq!(lb.levels[1].eps2, 1.0);
        assert_eq!(lb.levels[1].penalty, 0.0);
    }

    #[test]
    fn supremum_matches_crossover() {
        // the objective rises until n_R ln ρ + h_cond = n_R ln πe and falls after
        let topo = Topology::full(2, 2).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        let d = duality_upper_bound(&topo, &model, 1e6).unwrap();
        let n_r = 2.0;
        let rho_c = (PI * EULER) * (-d.h_cond / n_r).exp();
        let oracle = n_r * (d.frob2 * 2.0 * rho_c + n_r).ln() - n_r * (PI * EULER).ln();
        assert_abs_diff_eq!(d.sup_term, oracle, epsilon = 1e-6);
        assert_relative_eq!(d.sup_argmax_rho, rho_c, max_relative = 1e-3);
        assert_abs_diff_eq!(d.h_cond, 2.0 * (PI * EULER).ln(), epsilon = 1e-12);
    }

    #[test]
    fn alpha_one_contribution_vanishes() {
        assert_abs_diff_eq!(ln_gamma(1.0) - 1.0 * 1f64.ln(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn duality_bound_tracks_loglog_and_its_constant() {
        let topo = Topology::full(1, 1).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        let gaps: Vec<f64> = [1e8, 1e10, 1e12, 1e14]
            .iter()
            .map(|&e| duality_upper_bound(&topo, &model, e).unwrap().value - e.ln().ln())
            .collect();
        let spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 2.0, "{gaps:?}");
        for &p in &[0.0, 1.0, 1e3, 1e9, 1e30, 1e200] {
            let d = duality_upper_bound(&topo, &model, p).unwrap();
            assert!(d.value <= (1.0 + p.ln_1p()).ln() + d.constant + 1e-9, "power {p}");
            assert!(d.alpha > 0.0 && d.alpha <= 1.0);
        }
    }

    #[test]
    fn duality_needs_a_common_transmitter() {
        let topo = Topology::diagonal(2).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        assert!(matches!(duality_upper_bound(&topo, &model, 1e8), Err(Error::InvalidTopology(_))));
    }

    #[test]
    fn envelope_examples() {
        let topo = Topology::full(2, 2).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        let env = converse_envelope(&topo, &model, 0.0).unwrap();
        assert_eq!(env.kappa, 1);
        assert_abs_diff_eq!(env.value, env.constant, epsilon = 1e-12);
        let gaps: Vec<f64> = (8..=16)
            .step_by(2)
            .map(|k| {
                let e = 10f64.powi(k);
                converse_envelope(&topo, &model, e).unwrap().value - e.ln().ln()
            })
            .collect();
        assert!(gaps.iter().all(|g| g.is_finite()));
        let spread = gaps.iter().cloned().fold(f64::MIN, f64::max) - gaps.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.5, "{gaps:?}");

        let diag = Topology::diagonal(3).unwrap();
        let env = converse_envelope(&diag, &FadingModel::rayleigh(diag.clone()).unwrap(), 1e10).unwrap();
        assert_eq!(env.kappa, 3);
        assert!(env.phases.iter().all(|p| p.cross_information == 0.0));
        assert_abs_diff_eq!(env.ln_permutations, 6f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn correlated_rows_add_cross_information() {
        let topo = Topology::diagonal(2).unwrap();
        let mut cov = CMatrix::identity(2, 2);
        cov[(0, 1)] = Complex64::new(0.6, 0.0);
        cov[(1, 0)] = Complex64::new(0.6, 0.0);
        let model = FadingModel::new(topo.clone(), vec![Complex64::new(0.0, 0.0); 2], cov, None).unwrap();
        let env = converse_envelope(&topo, &model, 1e8).unwrap();
        assert_abs_diff_eq!(env.phases[0].cross_information, -(0.64f64).ln(), epsilon = 1e-12);
        assert_eq!(env.phases[1].cross_information, 0.0);
    }

    #[test]
    fn report_orders_bounds() {
        for topo in [Topology::full(1, 1).unwrap(), Topology::diagonal(2).unwrap(), Topology::full(2, 2).unwrap(), Topology::wyner_linear(2).unwrap()] {
            let model = FadingModel::rayleigh(topo.clone()).unwrap();
            let (_, chain) = longest_chain(&topo).unwrap();
            for k in [8, 12, 16] {
                let e = 10f64.powi(k);
                let rep = bound_report(&topo, &chain, &model, e).unwrap();
                let upper = rep.upper_bound.unwrap();
                assert!(rep.lower_bound <= upper, "{topo:?} at {e}: {} > {upper}", rep.lower_bound);
            }
        }
    }

    #[test]
    fn report_serializes_in_declared_order() {
        let topo = Topology::full(1, 1).unwrap();
        let model = FadingModel::rayleigh(topo.clone()).unwrap();
        let (_, chain) = longest_chain(&topo).unwrap();
        let json = serde_json::to_string(&bound_report(&topo, &chain, &model, 1e8).unwrap()).unwrap();
        let keys = ["\"snr\"", "\"kappa\"", "\"loglog_term\"", "\"input_power\"", "\"lower_bound\"", "\"upper_bound\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
    }

    #[test]
    fn input_power_of_log_uniform_level() {
        let l = Level { x_min: 1.0, x_max: EULER };
        // |X|² = e^U with U uniform on [0, 2]
        assert_abs_diff_eq!(l.mean_power(), (EULER * EULER - 1.0) / 2.0, epsilon = 1e-12);
    }
}
