//! Deterministic-zero patterns of the fading matrix and the hearing
//! relations they induce.
//!
//! Indices are 1-based at the public surface and in every serialized form.
//! Internally the boolean hearing matrix (row = receiver, column =
//! transmitter, 0-based) is the source of truth; the explicit zero set is
//! kept alongside it for serialization.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Transmitter/receiver counts plus the set of `(receiver, transmitter)`
/// pairs whose fading entry is deterministically zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    n_t: usize,
    n_r: usize,
    zeros: BTreeSet<(usize, usize)>,
    hears: Vec<bool>,
}

/// On-disk JSON form: `{"n_t": 2, "n_r": 2, "zeros": [[r, t], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub n_t: usize,
    pub n_r: usize,
    pub zeros: Vec<[usize; 2]>,
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Self> {
        Topology::new(doc.n_t, doc.n_r, doc.zeros.into_iter().map(|[r, t]| (r, t)))
    }
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        TopologyDoc {
            n_t: t.n_t,
            n_r: t.n_r,
            zeros: t.zeros.iter().map(|&(r, t)| [r, t]).collect(),
        }
    }
}

impl Topology {
    /// Builds a topology from 1-based `(r, t)` zero pairs. Rejects zero
    /// counts, out-of-range pairs and duplicates.
    pub fn new(n_t: usize, n_r: usize, zeros: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::InvalidTopology(format!(
                "need at least one transmitter and one receiver (n_t = {n_t}, n_r = {n_r})"
            )));
        }
        let mut set = BTreeSet::new();
        for (r, t) in zeros {
            if r == 0 || r > n_r {
                return Err(Error::IndexOutOfRange { what: "receiver", index: r, max: n_r });
            }
            if t == 0 || t > n_t {
                return Err(Error::IndexOutOfRange { what: "transmitter", index: t, max: n_t });
            }
            if !set.insert((r, t)) {
                return Err(Error::InvalidTopology(format!("duplicate zero pair ({r}, {t})")));
            }
        }
        Ok(Self::from_zero_set(n_t, n_r, set))
    }

    fn from_zero_set(n_t: usize, n_r: usize, zeros: BTreeSet<(usize, usize)>) -> Self {
        let mut hears = vec![true; n_t * n_r];
        for &(r, t) in &zeros {
            hears[(r - 1) * n_t + (t - 1)] = false;
        }
        Topology { n_t, n_r, zeros, hears }
    }

    /// Builds a topology from a 0-based hearing predicate.
    fn from_hearing(n_t: usize, n_r: usize, hear: impl Fn(usize, usize) -> bool) -> Self {
        let zeros = (0..n_r)
            .flat_map(|r| (0..n_t).map(move |t| (r, t)))
            .filter(|&(r, t)| !hear(r, t))
            .map(|(r, t)| (r + 1, t + 1))
            .collect();
        Self::from_zero_set(n_t, n_r, zeros)
    }

    /// No deterministic zeros.
    pub fn full(n_t: usize, n_r: usize) -> Result<Self> {
        Self::new(n_t, n_r, std::iter::empty())
    }

    /// `n` transmitters and `n` receivers, receiver `i` hears transmitter `i` only.
    pub fn diagonal(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self::from_hearing(n, n, |r, t| r == t))
    }

    /// Wyner's linear cell layout: transmitter `t` is heard by receivers
    /// `t` and `t + 1`. Uses `n + 1` receivers so that every transmitter,
    /// including the two at the ends, has exactly two hearers.
    pub fn wyner_linear(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self::from_hearing(n, n + 1, |r, t| r == t || r == t + 1))
    }

    /// Wyner's layout on a ring: transmitter `t` is heard by receivers `t`
    /// and `(t mod n) + 1`.
    pub fn wyner_cyclic(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self::from_hearing(n, n, |r, t| r == t || r == (t + 1) % n))
    }

    /// Each pair is a deterministic zero independently with probability `p`;
    /// the result is then pruned. Fails with [`Error::Degenerate`] when
    /// pruning removes everything.
    pub fn random(n_t: usize, n_r: usize, p: f64, seed: u64) -> Result<Self> {
        check_size(n_t)?;
        check_size(n_r)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("zero probability {p} not in [0, 1]")));
        }
        let mut rng = seed::rng(seed);
        let draws: Vec<bool> = (0..n_t * n_r).map(|_| rng.random::<f64>() >= p).collect();
        let raw = Self::from_hearing(n_t, n_r, |r, t| draws[r * n_t + t]);
        let pruned = raw.prune();
        if pruned.degenerate {
            return Err(Error::Degenerate);
        }
        Ok(pruned.topology)
    }

    pub fn generate(spec: &GeneratorSpec) -> Result<Self> {
        match *spec {
            GeneratorSpec::Full { n_t, n_r } => Self::full(n_t, n_r),
            GeneratorSpec::Diagonal { n } => Self::diagonal(n),
            GeneratorSpec::WynerLinear { n } => Self::wyner_linear(n),
            GeneratorSpec::WynerCyclic { n } => Self::wyner_cyclic(n),
            GeneratorSpec::Random { n_t, n_r, p, seed } => Self::random(n_t, n_r, p, seed),
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// The zero set, 1-based `(r, t)` pairs in lexicographic order.
    pub fn zeros(&self) -> &BTreeSet<(usize, usize)> {
        &self.zeros
    }

    /// Number of entries that are not deterministically zero, `|Z^c|`.
    pub fn nonzero_count(&self) -> usize {
        self.n_t * self.n_r - self.zeros.len()
    }

    /// The non-zero entries as 1-based `(r, t)`, sorted by `(r, t)`.
    pub fn nonzero_entries(&self) -> Vec<(usize, usize)> {
        (1..=self.n_r)
            .flat_map(|r| (1..=self.n_t).map(move |t| (r, t)))
            .filter(|&(r, t)| self.hears0(r - 1, t - 1))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.n_t == 0 || self.n_r == 0
    }

    /// 0-based hearing test; no range checks.
    #[inline]
    pub(crate) fn hears0(&self, r: usize, t: usize) -> bool {
        self.hears[r * self.n_t + t]
    }

    /// Whether receiver `r` hears transmitter `t` (both 1-based).
    pub fn hears(&self, r: usize, t: usize) -> Result<bool> {
        self.check_receiver(r)?;
        self.check_transmitter(t)?;
        Ok(self.hears0(r - 1, t - 1))
    }

    pub(crate) fn check_transmitter(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.n_t {
            return Err(Error::IndexOutOfRange { what: "transmitter", index: t, max: self.n_t });
        }
        Ok(())
    }

    pub(crate) fn check_receiver(&self, r: usize) -> Result<()> {
        if r == 0 || r > self.n_r {
            return Err(Error::IndexOutOfRange { what: "receiver", index: r, max: self.n_r });
        }
        Ok(())
    }

    /// `R_t`: the receivers that hear transmitter `t`.
    pub fn hearers(&self, t: usize) -> Result<BTreeSet<usize>> {
        self.check_transmitter(t)?;
        Ok((1..=self.n_r).filter(|&r| self.hears0(r - 1, t - 1)).collect())
    }

    /// `T_r`: the transmitters heard by receiver `r`.
    pub fn heard(&self, r: usize) -> Result<BTreeSet<usize>> {
        self.check_receiver(r)?;
        Ok((1..=self.n_t).filter(|&t| self.hears0(r - 1, t - 1)).collect())
    }

    /// True when every transmitter has a hearer and every receiver hears
    /// someone.
    pub fn is_pruned(&self) -> bool {
        !self.is_empty()
            && (0..self.n_t).all(|t| (0..self.n_r).any(|r| self.hears0(r, t)))
            && (0..self.n_r).all(|r| (0..self.n_t).any(|t| self.hears0(r, t)))
    }

    pub(crate) fn require_pruned(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Degenerate);
        }
        if let Some(t) = (0..self.n_t).find(|&t| !(0..self.n_r).any(|r| self.hears0(r, t))) {
            return Err(Error::NotPruned(format!("transmitter {} has no hearer", t + 1)));
        }
        if let Some(r) = (0..self.n_r).find(|&r| !(0..self.n_t).any(|t| self.hears0(r, t))) {
            return Err(Error::NotPruned(format!("receiver {} hears nobody", r + 1)));
        }
        Ok(())
    }

    /// Removes silent receivers and unheard transmitters until neither is
    /// left, re-compacting the indices.
    pub fn prune(&self) -> Pruned {
        let mut keep_t: Vec<bool> = vec![true; self.n_t];
        let mut keep_r: Vec<bool> = vec![true; self.n_r];
        loop {
            let mut changed = false;
            for r in 0..self.n_r {
                if keep_r[r] && !(0..self.n_t).any(|t| keep_t[t] && self.hears0(r, t)) {
                    keep_r[r] = false;
                    changed = true;
                }
            }
            for t in 0..self.n_t {
                if keep_t[t] && !(0..self.n_r).any(|r| keep_r[r] && self.hears0(r, t)) {
                    keep_t[t] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let transmitter_map: Vec<usize> = (0..self.n_t).filter(|&t| keep_t[t]).map(|t| t + 1).collect();
        let receiver_map: Vec<usize> = (0..self.n_r).filter(|&r| keep_r[r]).map(|r| r + 1).collect();
        let removed_transmitters = (0..self.n_t).filter(|&t| !keep_t[t]).map(|t| t + 1).collect();
        let removed_receivers = (0..self.n_r).filter(|&r| !keep_r[r]).map(|r| r + 1).collect();
        let degenerate = transmitter_map.is_empty() || receiver_map.is_empty();
        let topology = if degenerate {
            Topology { n_t: 0, n_r: 0, zeros: BTreeSet::new(), hears: Vec::new() }
        } else {
            Self::from_hearing(transmitter_map.len(), receiver_map.len(), |r, t| {
                self.hears0(receiver_map[r] - 1, transmitter_map[t] - 1)
            })
        };
        Pruned {
            topology,
            removed_transmitters,
            removed_receivers,
            transmitter_map,
            receiver_map,
            degenerate,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("topology serializes")
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidParameter("generator size must be at least 1".into()));
    }
    Ok(())
}

/// Outcome of [`Topology::prune`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub topology: Topology,
    /// Original (1-based) indices that were dropped.
    pub removed_transmitters: Vec<usize>,
    pub removed_receivers: Vec<usize>,
    /// `transmitter_map[i]` is the original index of new transmitter `i + 1`.
    pub transmitter_map: Vec<usize>,
    pub receiver_map: Vec<usize>,
    /// Everything was removed; `topology` is empty.
    pub degenerate: bool,
}

/// Parsed `--gen` argument, e.g. `full:3,3`, `diagonal:4`, `random:5,5,0.5,7`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Full { n_t: usize, n_r: usize },
    Diagonal { n: usize },
    WynerLinear { n: usize },
    WynerCyclic { n: usize },
    Random { n_t: usize, n_r: usize, p: f64, seed: u64 },
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("generator spec `{s}` must look like kind:args")))?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let int = |i: usize| -> Result<usize> {
            args.get(i)
                .ok_or_else(|| Error::Parse(format!("`{s}`: missing argument {}", i + 1)))?
                .parse()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        let arity = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::Parse(format!("`{s}`: expected {n} arguments, got {}", args.len())));
            }
            Ok(())
        };
        match kind {
            "full" => {
                arity(2)?;
                Ok(GeneratorSpec::Full { n_t: int(0)?, n_r: int(1)? })
            }
            "diagonal" => {
                arity(1)?;
                Ok(GeneratorSpec::Diagonal { n: int(0)? })
            }
            "wyner_linear" => {
                arity(1)?;
                Ok(GeneratorSpec::WynerLinear { n: int(0)? })
            }
            "wyner_cyclic" => {
                arity(1)?;
                Ok(GeneratorSpec::WynerCyclic { n: int(0)? })
            }
            "random" => {
                arity(4)?;
                let p = args[2].parse().map_err(|e| Error::Parse(format!("`{s}`: {e}")))?;
                let seed = args[3].parse().map_err(|e| Error::Parse(format!("`{s}`: {e}")))?;
                Ok(GeneratorSpec::Random { n_t: int(0)?, n_r: int(1)?, p, seed })
            }
            other => Err(Error::Parse(format!("unknown generator `{other}`"))),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Full { n_t, n_r } => write!(f, "full:{n_t},{n_r}"),
            GeneratorSpec::Diagonal { n } => write!(f, "diagonal:{n}"),
            GeneratorSpec::WynerLinear { n } => write!(f, "wyner_linear:{n}"),
            GeneratorSpec::WynerCyclic { n } => write!(f, "wyner_cyclic:{n}"),
            GeneratorSpec::Random { n_t, n_r, p, seed } => write!(f, "random:{n_t},{n_r},{p},{seed}"),
        }
    }
}
