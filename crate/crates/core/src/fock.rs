//! Bosonic occupation-number basis on an open or closed chain.
//!
//! States with `N` particles on `L` sites are enumerated in lexicographically
//! descending order of their occupation vectors, so `|N,0,...,0>` is index 0 and
//! `|0,...,0,N>` is the last state. Ranking uses the combinatorial number system
//! and costs `O(L)`.

#[cfg(any(test, debug_assertions))]
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occupation numbers `n_j` of every site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationState {
    occupations: Vec<usize>,
}

/// Result of applying `a†_to a_from` to a basis state.
#[derive(Clone, Debug, PartialEq)]
pub struct Hop {
    pub target: OccupationState,
    /// Bosonic matrix element `sqrt(n_from * (n_to + 1))` on the source state.
    pub amplitude: f64,
}

impl OccupationState {
    pub fn new(occupations: Vec<usize>) -> Self {
        Self { occupations }
    }

    /// `N` particles stacked on one site of an `sites`-site chain.
    pub fn stacked(sites: usize, site: usize, particles: usize) -> Self {
        let mut occupations = vec![0; sites];
        occupations[site] = particles;
        Self { occupations }
    }

    /// One particle on each listed site (repeats add up).
    pub fn from_positions(sites: usize, positions: &[usize]) -> Self {
        let mut occupations = vec![0; sites];
        for &p in positions {
            occupations[p] += 1;
        }
        Self { occupations }
    }

    pub fn occupations(&self) -> &[usize] {
        &self.occupations
    }

    pub fn occupation(&self, site: usize) -> usize {
        self.occupations[site]
    }

    pub fn sites(&self) -> usize {
        self.occupations.len()
    }

    pub fn particles(&self) -> usize {
        self.occupations.iter().sum()
    }

    /// Sites holding at least one particle, in increasing order.
    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupations.iter().enumerate().filter(|(_, &n)| n > 0).map(|(j, _)| j)
    }

    /// Apply `a†_to a_from`. Returns `None` when site `from` is empty.
    pub fn hop(&self, from: usize, to: usize) -> Option<Hop> {
        let n_from = self.occupations[from];
        if n_from == 0 {
            return None;
        }
        let n_to = self.occupations[to];
        let mut occupations = self.occupations.clone();
        occupations[from] -= 1;
        occupations[to] += 1;
        let amplitude = if from == to { n_from as f64 } else { ((n_from * (n_to + 1)) as f64).sqrt() };
        Some(Hop { target: OccupationState { occupations }, amplitude })
    }

    /// Cyclic translation by `shift` sites (`n_j -> n_{j+shift}`).
    pub fn translated(&self, shift: usize) -> Self {
        let l = self.occupations.len();
        let mut occupations = vec![0; l];
        for (j, &n) in self.occupations.iter().enumerate() {
            occupations[(j + shift) % l] = n;
        }
        Self { occupations }
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (j, n) in self.occupations.iter().enumerate() {
            if j > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// The full `N`-boson basis on `L` sites.
#[derive(Clone, Debug)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<OccupationState>,
    /// `counts[s][p]` = number of ways to place `p` bosons on `s` sites.
    counts: Vec<Vec<usize>>,
    #[cfg(any(test, debug_assertions))]
    lookup: HashMap<OccupationState, usize>,
}

impl FockBasis {
    /// Enumerate every occupation vector with `particles` bosons on `sites` sites.
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::invalid("a chain needs at least one site"));
        }
        let counts = distribution_counts(sites, particles);
        let dim = counts[sites][particles];
        let mut states = Vec::with_capacity(dim);
        let mut current = vec![0; sites];
        enumerate_descending(0, particles, &mut current, &mut states);
        debug_assert_eq!(states.len(), dim);

        #[cfg(any(test, debug_assertions))]
        let lookup = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();

        Ok(Self {
            sites,
            particles,
            states,
            counts,
            #[cfg(any(test, debug_assertions))]
            lookup,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn iter(&self) -> std::slice::Iter<'_, OccupationState> {
        self.states.iter()
    }

    pub fn unrank(&self, index: usize) -> Option<&OccupationState> {
        self.states.get(index)
    }

    /// Index of `state`, or `None` if it does not belong to this basis.
    pub fn rank(&self, state: &OccupationState) -> Option<usize> {
        let occ = state.occupations();
        if occ.len() != self.sites || state.particles() != self.particles {
            return None;
        }
        // Count states that are lexicographically larger: at each site, every
        // larger occupation m > n_j followed by any arrangement of the rest.
        let mut index = 0;
        let mut remaining = self.particles;
        for (j, &n) in occ.iter().enumerate() {
            let rest = self.sites - j - 1;
            if n < remaining {
                // sum_{m=n+1}^{remaining} counts[rest][remaining-m] = counts[rest+1][remaining-n-1]
                index += self.counts[rest + 1][remaining - n - 1];
            }
            remaining -= n;
        }
        #[cfg(any(test, debug_assertions))]
        debug_assert_eq!(self.lookup.get(state), Some(&index));
        Some(index)
    }
}

impl<'a> IntoIterator for &'a FockBasis {
    type Item = &'a OccupationState;
    type IntoIter = std::slice::Iter<'a, OccupationState>;

    fn into_iter(self) -> Self::IntoIter {
        self.states.iter()
    }
}

/// Stars-and-bars table `C(s + p - 1, p)` with `counts[0][0] = 1`.
fn distribution_counts(sites: usize, particles: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0usize; particles + 1]; sites + 2];
    counts[0][0] = 1;
    for s in 1..sites + 2 {
        counts[s][0] = 1;
        for p in 1..=particles {
            counts[s][p] = counts[s - 1][p] + counts[s][p - 1];
        }
    }
    counts
}

fn enumerate_descending(site: usize, remaining: usize, current: &mut Vec<usize>, out: &mut Vec<OccupationState>) {
    if site + 1 == current.len() {
        current[site] = remaining;
        out.push(OccupationState::new(current.clone()));
        return;
    }
    for n in (0..=remaining).rev() {
        current[site] = n;
        enumerate_descending(site + 1, remaining - n, current, out);
    }
    current[site] = 0;
}
