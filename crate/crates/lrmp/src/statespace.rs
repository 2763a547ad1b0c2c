//! Configurations of indistinguishable particles on a ring and the indexed
//! state space `Omega_{L,N}`.
//!
//! A configuration is the occupation vector `(eta_1, ..., eta_L)`; sites are
//! numbered 1..=L in the public API and wrap modulo L. Ranks enumerate the
//! weak compositions of N into L parts in colexicographic order, computed
//! through the combinatorial number system so no lookup tables are needed.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Binomial coefficient in u128, `None` on overflow.
pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128)?;
        acc /= i as u128;
    }
    Some(acc)
}

/// Occupation vector on a ring lattice.
///
/// Site `s` (1-based) holds `occupations[s-1]` particles.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    occupations: Vec<usize>,
}

impl Configuration {
    pub fn new(occupations: Vec<usize>) -> Self {
        Self { occupations }
    }

    /// Number of sites L.
    pub fn len(&self) -> usize {
        self.occupations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    /// Total particle count N.
    pub fn total(&self) -> usize {
        self.occupations.iter().sum()
    }

    /// Occupation of 1-based site `s`.
    pub fn occupation(&self, site: usize) -> usize {
        self.occupations[site - 1]
    }

    pub fn occupations(&self) -> &[usize] {
        &self.occupations
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= 1 && site <= self.len() {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange {
                site,
                l: self.len(),
            })
        }
    }

    /// 1-based site to the right of `site`, wrapping.
    pub fn next_site(&self, site: usize) -> usize {
        site % self.len() + 1
    }

    /// 1-based site to the left of `site`, wrapping.
    pub fn prev_site(&self, site: usize) -> usize {
        if site == 1 {
            self.len()
        } else {
            site - 1
        }
    }

    /// Move one particle from site `k` to site `l` (both 1-based).
    pub fn apply_move(&self, k: usize, l: usize) -> Result<Configuration> {
        self.check_site(k)?;
        self.check_site(l)?;
        if k == l {
            return Err(Error::SelfMove { site: k });
        }
        if self.occupations[k - 1] == 0 {
            return Err(Error::EmptyDeparture { site: k });
        }
        let mut occ = self.occupations.clone();
        occ[k - 1] -= 1;
        occ[l - 1] += 1;
        Ok(Configuration::new(occ))
    }

    /// Add one particle at site `l`, yielding a configuration with N+1 particles.
    pub fn add_particle(&self, l: usize) -> Result<Configuration> {
        self.check_site(l)?;
        let mut occ = self.occupations.clone();
        occ[l - 1] += 1;
        Ok(Configuration::new(occ))
    }

    /// Strictly increasing list of occupied sites (1-based).
    pub fn occupied_sites(&self) -> Vec<usize> {
        self.occupations
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Drop all empty sites, keeping the occupied ones in order.
    ///
    /// The returned carrier lists the original sites, so per-site rate
    /// parameters can follow the particles.
    pub fn compress(&self) -> Result<Compressed> {
        let sites = self.occupied_sites();
        if sites.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        let occ = sites.iter().map(|&s| self.occupation(s)).collect();
        Ok(Compressed {
            config: Configuration::new(occ),
            sites,
        })
    }

    /// Like [`compress`](Self::compress) but keep one trailing empty site,
    /// carrying the rate parameter of site L.
    ///
    /// Requires site L to be empty (so the trailing slot is well defined).
    pub fn compress_with_empty(&self) -> Result<Compressed> {
        let l = self.len();
        if self.occupations[l - 1] != 0 {
            return Err(Error::Precondition(format!(
                "compress_with_empty requires site {l} to be empty, found {}",
                self.occupations[l - 1]
            )));
        }
        let mut sites = self.occupied_sites();
        let mut occ: Vec<usize> = sites.iter().map(|&s| self.occupation(s)).collect();
        occ.push(0);
        sites.push(l);
        Ok(Compressed {
            config: Configuration::new(occ),
            sites,
        })
    }

    /// Cyclic right rotation by one: `(a, b, ..., z) -> (z, a, ..., y)`.
    pub fn shift(&self) -> Configuration {
        let l = self.len();
        let mut occ = Vec::with_capacity(l);
        occ.push(self.occupations[l - 1]);
        occ.extend_from_slice(&self.occupations[..l - 1]);
        Configuration::new(occ)
    }

    /// Cyclic left rotation by one (inverse of [`shift`](Self::shift)).
    pub fn shift_left(&self) -> Configuration {
        let mut occ = self.occupations[1..].to_vec();
        occ.push(self.occupations[0]);
        Configuration::new(occ)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.occupations)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.occupations.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// Result of dropping empty sites: the shorter configuration plus the
/// original 1-based sites whose rate parameters carry over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compressed {
    pub config: Configuration,
    pub sites: Vec<usize>,
}

/// The state space `Omega_{L,N}` with a rank/unrank bijection in
/// colexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    l: usize,
    n: usize,
    size: usize,
}

impl StateSpace {
    /// Set up `Omega_{L,N}`. The size is `C(L+N-1, N)`.
    pub fn enumerate(l: usize, n: usize) -> Result<StateSpace> {
        if l == 0 {
            return Err(Error::InvalidLattice);
        }
        let size = binomial(l + n - 1, n)
            .filter(|&s| s <= usize::MAX as u128)
            .ok_or(Error::StateSpaceOverflow { l, n })? as usize;
        Ok(StateSpace { l, n, size })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of configurations.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Colexicographic rank of a configuration.
    pub fn rank(&self, cfg: &Configuration) -> Result<usize> {
        if cfg.len() != self.l {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} sites, state space has {}",
                cfg.len(),
                self.l
            )));
        }
        if cfg.total() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} particles, state space has {}",
                cfg.total(),
                self.n
            )));
        }
        let mut rank: u128 = 0;
        let mut mass = self.n;
        for level in (2..=self.l).rev() {
            let k = cfg.occupations[level - 1];
            // Configurations whose last coordinate is below k at this level
            // come first; the hockey-stick identity collapses their count.
            let whole = binomial(level - 1 + mass, level - 1).unwrap();
            let above = binomial(level - 1 + mass - k, level - 1).unwrap();
            rank += whole - above;
            mass -= k;
        }
        Ok(rank as usize)
    }

    /// Configuration at colexicographic rank `i`.
    pub fn unrank(&self, mut rank: usize) -> Configuration {
        assert!(rank < self.size, "rank {rank} out of range {}", self.size);
        let mut occ = vec![0usize; self.l];
        let mut mass = self.n;
        for level in (2..=self.l).rev() {
            let mut k = 0usize;
            loop {
                // Size of the block with last coordinate exactly k.
                let block = binomial(level - 2 + mass - k, level - 2).unwrap() as usize;
                if rank < block {
                    break;
                }
                rank -= block;
                k += 1;
            }
            occ[level - 1] = k;
            mass -= k;
        }
        occ[0] = mass;
        Configuration::new(occ)
    }

    /// All configurations in rank order.
    pub fn configurations(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.size).map(|i| self.unrank(i))
    }
}
