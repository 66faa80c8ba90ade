//! Power chains: ordered transmitter tuples in which every member reaches a
//! receiver untouched by all earlier members.
//!
//! The longest chain length κ* is computed exactly by dynamic programming
//! over the set of receivers already covered by the chain: whether a
//! transmitter may extend a chain depends only on that set, not on the
//! order in which it was built, so
//!
//! ```text
//! κ*(covered) = max over t with R_t ⊄ covered of 1 + κ*(covered ∪ R_t)
//! ```
//!
//! with κ*(covered) = 0 when no transmitter qualifies.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Default limit on `n_r` for [`longest_chain`]; the memo has up to
/// `2^n_r` states.
pub const DEFAULT_RECEIVER_GUARD: usize = 24;

/// Hard limit for the brute-force enumeration in [`brute_force_kappa`].
pub const BRUTE_FORCE_GUARD: usize = 7;

/// Transmitters `t_1..t_κ` together with witness receivers `r_1..r_κ`,
/// where `r_ν` hears `t_ν` and none of `t_1..t_{ν-1}`. All indices are
/// 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PowerChain {
    transmitters: Vec<usize>,
    witnesses: Vec<usize>,
}

impl PowerChain {
    /// Validates `transmitters` as a power chain and assigns each level the
    /// smallest admissible witness receiver.
    pub fn new(topo: &Topology, transmitters: Vec<usize>) -> Result<Self> {
        check_tuple(topo, &transmitters)?;
        let mut covered = vec![false; topo.n_r()];
        let mut witnesses = Vec::with_capacity(transmitters.len());
        for (level, &t) in transmitters.iter().enumerate() {
            let witness = (0..topo.n_r())
                .find(|&r| !covered[r] && topo.hears0(r, t - 1))
                .ok_or_else(|| {
                    Error::InvalidChain(format!(
                        "transmitter {t} at level {} reaches no receiver left uncovered by earlier members",
                        level + 1
                    ))
                })?;
            witnesses.push(witness + 1);
            for (r, c) in covered.iter_mut().enumerate() {
                *c |= topo.hears0(r, t - 1);
            }
        }
        Ok(PowerChain { transmitters, witnesses })
    }

    pub fn transmitters(&self) -> &[usize] {
        &self.transmitters
    }

    pub fn witnesses(&self) -> &[usize] {
        &self.witnesses
    }

    pub fn len(&self) -> usize {
        self.transmitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmitters.is_empty()
    }

    /// Re-indexes the chain through the maps reported by
    /// [`Topology::prune`].
    pub fn remap(&self, transmitter_map: &[usize], receiver_map: &[usize]) -> PowerChain {
        PowerChain {
            transmitters: self.transmitters.iter().map(|&t| transmitter_map[t - 1]).collect(),
            witnesses: self.witnesses.iter().map(|&r| receiver_map[r - 1]).collect(),
        }
    }
}

fn check_tuple(topo: &Topology, tuple: &[usize]) -> Result<()> {
    if tuple.is_empty() {
        return Err(Error::InvalidChain("empty transmitter tuple".into()));
    }
    let mut seen = BTreeSet::new();
    for &t in tuple {
        topo.check_transmitter(t)?;
        if !seen.insert(t) {
            return Err(Error::Duplicate { what: "transmitter", index: t });
        }
    }
    Ok(())
}

/// Permutation (1-based) listing transmitters by decreasing `|x(t)|`, equal
/// magnitudes in increasing index order.
pub fn order_permutation(x: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    // stable sort keeps ties in ascending index order
    idx.sort_by(|&a, &b| x[b].norm().total_cmp(&x[a].norm()));
    idx.into_iter().map(|i| i + 1).collect()
}

/// Whether the 1-based tuple satisfies the power-chain conditions.
pub fn is_power_chain(topo: &Topology, tuple: &[usize]) -> Result<bool> {
    check_tuple(topo, tuple)?;
    let mut covered: BTreeSet<usize> = BTreeSet::new();
    for &t in tuple {
        let reach = topo.hearers(t)?;
        if reach.is_subset(&covered) {
            return Ok(false);
        }
        covered.extend(reach);
    }
    Ok(true)
}

/// κ* and one maximal chain, with the default receiver guard.
pub fn longest_chain(topo: &Topology) -> Result<(usize, PowerChain)> {
    longest_chain_with_guard(topo, DEFAULT_RECEIVER_GUARD)
}

/// κ* and one maximal chain. `max_receivers` may be raised up to 64.
///
/// The chain is rebuilt greedily from the memo, always taking the smallest
/// transmitter index that still attains the optimum.
pub fn longest_chain_with_guard(topo: &Topology, max_receivers: usize) -> Result<(usize, PowerChain)> {
    if topo.is_empty() {
        return Err(Error::Degenerate);
    }
    let limit = max_receivers.min(64);
    if topo.n_r() > limit {
        return Err(Error::SizeGuard { what: "n_r", value: topo.n_r(), limit });
    }
    let reach: Vec<u64> = (0..topo.n_t())
        .map(|t| {
            (0..topo.n_r())
                .filter(|&r| topo.hears0(r, t))
                .fold(0u64, |m, r| m | (1u64 << r))
        })
        .collect();

    let mut memo: HashMap<u64, usize> = HashMap::new();
    let best = chain_value(0, &reach, &mut memo);
    if best == 0 {
        return Err(Error::Degenerate);
    }

    let mut covered = 0u64;
    let mut chain = Vec::with_capacity(best);
    let mut remaining = best;
    while remaining > 0 {
        let t = (0..reach.len())
            .find(|&t| {
                reach[t] & !covered != 0 && 1 + chain_value(covered | reach[t], &reach, &mut memo) == remaining
            })
            .expect("memo is consistent");
        chain.push(t + 1);
        covered |= reach[t];
        remaining -= 1;
    }
    Ok((best, PowerChain::new(topo, chain)?))
}

fn chain_value(covered: u64, reach: &[u64], memo: &mut HashMap<u64, usize>) -> usize {
    if let Some(&v) = memo.get(&covered) {
        return v;
    }
    let mut best = 0;
    for &m in reach {
        if m & !covered != 0 {
            best = best.max(1 + chain_value(covered | m, reach, memo));
        }
    }
    memo.insert(covered, best);
    best
}

/// κ* by exhaustive enumeration of ordered tuples. Test oracle for
/// [`longest_chain`]; limited to `n_t <= 7`.
pub fn brute_force_kappa(topo: &Topology) -> Result<usize> {
    if topo.is_empty() {
        return Err(Error::Degenerate);
    }
    if topo.n_t() > BRUTE_FORCE_GUARD {
        return Err(Error::SizeGuard { what: "n_t", value: topo.n_t(), limit: BRUTE_FORCE_GUARD });
    }
    let max_len = topo.n_t().min(topo.n_r());
    let mut best = 0;
    let mut tuple = Vec::with_capacity(max_len);
    let mut used = vec![false; topo.n_t()];
    enumerate(topo, max_len, &mut tuple, &mut used, &mut best)?;
    Ok(best)
}

fn enumerate(
    topo: &Topology,
    max_len: usize,
    tuple: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut usize,
) -> Result<()> {
    if !tuple.is_empty() && is_power_chain(topo, tuple)? {
        *best = (*best).max(tuple.len());
    }
    if tuple.len() == max_len {
        return Ok(());
    }
    for t in 0..topo.n_t() {
        if !used[t] {
            used[t] = true;
            tuple.push(t + 1);
            enumerate(topo, max_len, tuple, used, best)?;
            tuple.pop();
            used[t] = false;
        }
    }
    Ok(())
}

/// The chain, receiver blocks `B_ν` and transmitter blocks `A_ν` induced by
/// an ordering permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainDecomposition {
    pub permutation: Vec<usize>,
    /// Positions `j_1..j_κ` (1-based) into `permutation`.
    pub j_indices: Vec<usize>,
    pub chain: PowerChain,
    pub receiver_blocks: Vec<BTreeSet<usize>>,
    pub transmitter_blocks: Vec<BTreeSet<usize>>,
}

impl ChainDecomposition {
    pub fn kappa(&self) -> usize {
        self.j_indices.len()
    }
}

fn check_permutation(n: usize, tau: &[usize]) -> Result<()> {
    if tau.len() != n {
        return Err(Error::InvalidPermutation(format!("length {} but n_t = {n}", tau.len())));
    }
    let mut seen = vec![false; n];
    for &t in tau {
        if t == 0 || t > n {
            return Err(Error::InvalidPermutation(format!("entry {t} outside 1..={n}")));
        }
        if std::mem::replace(&mut seen[t - 1], true) {
            return Err(Error::InvalidPermutation(format!("entry {t} repeated")));
        }
    }
    Ok(())
}

/// Walks `tau` from strongest to weakest, starting a new chain level at
/// every transmitter that reaches a receiver not yet covered.
pub fn decompose(topo: &Topology, tau: &[usize]) -> Result<ChainDecomposition> {
    topo.require_pruned()?;
    check_permutation(topo.n_t(), tau)?;

    let mut covered: BTreeSet<usize> = BTreeSet::new();
    let mut j_indices = Vec::new();
    let mut receiver_blocks = Vec::new();
    for (pos, &t) in tau.iter().enumerate() {
        let reach = topo.hearers(t)?;
        let fresh: BTreeSet<usize> = reach.difference(&covered).copied().collect();
        if !fresh.is_empty() {
            j_indices.push(pos + 1);
            covered.extend(fresh.iter().copied());
            receiver_blocks.push(fresh);
        }
    }

    let kappa = j_indices.len();
    let transmitter_blocks = (0..kappa)
        .map(|nu| {
            let start = j_indices[nu] - 1;
            let end = j_indices.get(nu + 1).map_or(tau.len(), |&j| j - 1);
            tau[start..end].iter().copied().collect()
        })
        .collect();
    let chain = PowerChain::new(topo, j_indices.iter().map(|&j| tau[j - 1]).collect())?;
    Ok(ChainDecomposition {
        permutation: tau.to_vec(),
        j_indices,
        chain,
        receiver_blocks,
        transmitter_blocks,
    })
}
