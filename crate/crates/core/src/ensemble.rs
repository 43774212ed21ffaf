//! Implicit binary code matrices: which bins a ball lands in.
//!
//! Neither ensemble stores the M x n matrix. Balls-and-bins derives each
//! ball's bins from a keyed hash, the CRT ensemble from residues modulo the
//! stage heights.

use crate::error::{param, Error, Result};
use crate::signal::{splitmix64, RngSeed};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleKind {
    BallsAndBins,
    Crt,
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    BallsAndBins { seed: RngSeed },
    Crt { coprimes: Vec<u64>, alpha: usize, heights: Vec<u64>, offsets: Vec<u64> },
    Explicit { columns: Vec<Vec<u64>> },
}

/// Implicit description of the code matrix H.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeEnsemble {
    n: u64,
    m: usize,
    d: usize,
    repr: Repr,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl CodeEnsemble {
    /// d-left-regular ensemble: every ball occupies d distinct bins drawn by
    /// a keyed hash of (seed, ball, attempt).
    pub fn balls_and_bins(n: u64, m: usize, d: usize, seed: RngSeed) -> Result<Self> {
        if n == 0 || m == 0 || d == 0 {
            return param("n, M and d must be positive");
        }
        if d > m {
            return param(format!("left degree d = {d} exceeds bin count M = {m}"));
        }
        Ok(Self { n, m, d, repr: Repr::BallsAndBins { seed } })
    }

    /// CRT ensemble over pairwise coprime moduli with stages of alpha
    /// cyclically consecutive moduli multiplied together.
    pub fn crt(coprimes: &[u64], alpha: usize) -> Result<Self> {
        let d = coprimes.len();
        if d == 0 {
            return param("at least one modulus is required");
        }
        if alpha == 0 || alpha > d {
            return param(format!("alpha = {alpha} must lie in [1, {d}]"));
        }
        if coprimes.iter().any(|&f| f < 2) {
            return param("moduli must be at least 2");
        }
        for i in 0..d {
            for j in i + 1..d {
                if gcd(coprimes[i], coprimes[j]) != 1 {
                    return param(format!("moduli {} and {} are not coprime", coprimes[i], coprimes[j]));
                }
            }
        }
        let n = coprimes
            .iter()
            .try_fold(1u64, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::Parameter("product of moduli overflows u64".into()))?;
        let heights: Vec<u64> = (0..d)
            .map(|i| (0..alpha).map(|t| coprimes[(i + t) % d]).product())
            .collect();
        let mut offsets = Vec::with_capacity(d);
        let mut acc = 0u64;
        for &h in &heights {
            offsets.push(acc);
            acc += h;
        }
        let m = usize::try_from(acc).map_err(|_| Error::Parameter("too many bins".into()))?;
        Ok(Self {
            n,
            m,
            d,
            repr: Repr::Crt { coprimes: coprimes.to_vec(), alpha, heights, offsets },
        })
    }

    /// Arbitrary small code given as one list of 1-based bins per ball.
    /// Used for hand-built toy graphs.
    pub fn explicit(m: usize, columns: Vec<Vec<u64>>) -> Result<Self> {
        if columns.is_empty() || m == 0 {
            return param("explicit ensemble needs at least one ball and one bin");
        }
        let mut d = 0;
        for (l, col) in columns.iter().enumerate() {
            let mut c = col.clone();
            c.sort_unstable();
            c.dedup();
            if c.len() != col.len() {
                return param(format!("ball {} lists a bin twice", l + 1));
            }
            if col.iter().any(|&b| b == 0 || b as usize > m) {
                return param(format!("ball {} has a bin outside [1, {m}]", l + 1));
            }
            d = d.max(col.len());
        }
        Ok(Self { n: columns.len() as u64, m, d, repr: Repr::Explicit { columns } })
    }

    /// Explicit ensemble from bin rows (the 1-based balls of each bin).
    pub fn from_bins(n: u64, bins: &[Vec<u64>]) -> Result<Self> {
        let len = usize::try_from(n).map_err(|_| Error::Parameter("n too large".into()))?;
        let mut cols = vec![Vec::new(); len];
        for (b, members) in bins.iter().enumerate() {
            for &l in members {
                if l == 0 || l > n {
                    return param(format!("ball {l} outside [1, {n}]"));
                }
                cols[(l - 1) as usize].push(b as u64 + 1);
            }
        }
        Self::explicit(bins.len(), cols)
    }

    pub fn kind(&self) -> EnsembleKind {
        match self.repr {
            Repr::BallsAndBins { .. } => EnsembleKind::BallsAndBins,
            Repr::Crt { .. } => EnsembleKind::Crt,
            Repr::Explicit { .. } => EnsembleKind::Explicit,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Left degree (the maximum degree for explicit codes).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<RngSeed> {
        match self.repr {
            Repr::BallsAndBins { seed } => Some(seed),
            _ => None,
        }
    }

    /// Stage heights of a CRT ensemble.
    pub fn stage_heights(&self) -> Option<&[u64]> {
        match &self.repr {
            Repr::Crt { heights, .. } => Some(heights),
            _ => None,
        }
    }

    /// First 0-based global slot of each CRT stage.
    pub fn stage_offsets(&self) -> Option<&[u64]> {
        match &self.repr {
            Repr::Crt { offsets, .. } => Some(offsets),
            _ => None,
        }
    }

    pub fn coprimes(&self) -> Option<(&[u64], usize)> {
        match &self.repr {
            Repr::Crt { coprimes, alpha, .. } => Some((coprimes, *alpha)),
            _ => None,
        }
    }

    fn check_ball(&self, l: u64) -> Result<()> {
        if l == 0 || l > self.n {
            return param(format!("ball index {l} outside [1, {}]", self.n));
        }
        Ok(())
    }

    /// The 1-based bins of ball `l`, in stage order for CRT codes.
    pub fn bins_of(&self, l: u64) -> Result<Vec<u64>> {
        self.check_ball(l)?;
        let mut out = Vec::with_capacity(self.d);
        self.slots_into(l, &mut out);
        Ok(out.into_iter().map(|s| s as u64 + 1).collect())
    }

    /// Writes the 0-based slots of a valid ball into `out`, clearing it first.
    pub(crate) fn slots_into(&self, l: u64, out: &mut Vec<usize>) {
        out.clear();
        match &self.repr {
            Repr::BallsAndBins { seed } => {
                let key = splitmix64(seed.0 ^ splitmix64(l));
                let m = self.m as u64;
                let mut attempt = 0u64;
                while out.len() < self.d {
                    let h = splitmix64(key ^ attempt.wrapping_mul(0xD6E8_FEB8_6659_FD93));
                    attempt += 1;
                    let slot = ((h as u128 * m as u128) >> 64) as usize;
                    if !out.contains(&slot) {
                        out.push(slot);
                    }
                }
            }
            Repr::Crt { heights, offsets, .. } => {
                for (h, o) in heights.iter().zip(offsets) {
                    out.push((o + (l - 1) % h) as usize);
                }
            }
            Repr::Explicit { columns } => {
                out.extend(columns[(l - 1) as usize].iter().map(|&b| (b - 1) as usize));
            }
        }
    }

    /// Whether ball `l` lands in 0-based slot `slot`. Out-of-range balls
    /// are never members.
    pub(crate) fn contains(&self, l: u64, slot: usize, scratch: &mut Vec<usize>) -> bool {
        if l == 0 || l > self.n {
            return false;
        }
        match &self.repr {
            Repr::Crt { heights, offsets, .. } => {
                let s = slot as u64;
                match offsets.iter().rposition(|&o| o <= s) {
                    Some(j) => s - offsets[j] == (l - 1) % heights[j],
                    None => false,
                }
            }
            _ => {
                self.slots_into(l, scratch);
                scratch.contains(&slot)
            }
        }
    }

    /// Recovers a ball index from its per-stage residues via the CRT.
    pub fn index_from_residues(&self, residues: &[u64]) -> Result<u64> {
        let Repr::Crt { coprimes, .. } = &self.repr else {
            return Err(Error::Unsupported("residue inversion needs a CRT ensemble".into()));
        };
        if residues.len() != coprimes.len() {
            return Err(Error::Dimension(format!(
                "{} residues for {} stages",
                residues.len(),
                coprimes.len()
            )));
        }
        let n = self.n as u128;
        let mut acc: u128 = 0;
        for (&r, &f) in residues.iter().zip(coprimes) {
            let f = f as u128;
            let r = r as u128 % f;
            let rest = n / f;
            let inv = mod_inverse((rest % f) as i128, f as i128)
                .ok_or_else(|| Error::Parameter("moduli are not coprime".into()))?;
            acc = (acc + r * rest % n * inv as u128) % n;
        }
        Ok(acc as u64 + 1)
    }

    /// Dense 0/1 matrix, rows are bins. Debug aid for small n only.
    pub fn to_dense(&self) -> Result<Vec<Vec<u8>>> {
        if self.n > 10_000 {
            return Err(Error::Unsupported(format!("dense export of n = {} > 10^4", self.n)));
        }
        let mut h = vec![vec![0u8; self.n as usize]; self.m];
        let mut buf = Vec::new();
        for l in 1..=self.n {
            self.slots_into(l, &mut buf);
            for &s in &buf {
                h[s][(l - 1) as usize] = 1;
            }
        }
        Ok(h)
    }
}

fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

/// Bipartite graph between the support and the bins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedGraph {
    /// Member balls of each bin, in support order.
    pub bins: Vec<Vec<u64>>,
}

impl InducedGraph {
    pub fn edge_count(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    /// Number of bins holding exactly `k` balls, for k = 0..=max.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let max = self.bins.iter().map(Vec::len).max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for b in &self.bins {
            h[b.len()] += 1;
        }
        h
    }
}

/// Restricts the code to the given support.
pub fn induce_graph(ensemble: &CodeEnsemble, support: &[u64]) -> Result<InducedGraph> {
    let mut bins = vec![Vec::new(); ensemble.m()];
    let mut buf = Vec::new();
    for &l in support {
        ensemble.check_ball(l)?;
        ensemble.slots_into(l, &mut buf);
        for &s in &buf {
            bins[s].push(l);
        }
    }
    Ok(InducedGraph { bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_degree_fills_every_bin() {
        let e = CodeEnsemble::balls_and_bins(10, 3, 3, RngSeed(5)).unwrap();
        for l in 1..=10 {
            let mut b = e.bins_of(l).unwrap();
            b.sort_unstable();
            assert_eq!(b, vec![1, 2, 3]);
        }
    }

    #[test]
    fn degree_above_bins_is_rejected() {
        assert!(CodeEnsemble::balls_and_bins(10, 3, 4, RngSeed(0)).is_err());
    }

    #[test]
    fn huge_n_queries_need_no_tables() {
        let e = CodeEnsemble::balls_and_bins(10_000_000_000, 14_000, 8, RngSeed(1)).unwrap();
        let b = e.bins_of(9_999_999_999).unwrap();
        assert_eq!(b.len(), 8);
        assert!(std::mem::size_of_val(&e) < 128);
    }

    #[test]
    fn crt_small_example_matrix() {
        let e = CodeEnsemble::crt(&[2, 3], 1).unwrap();
        let h = e.to_dense().unwrap();
        let expect: Vec<Vec<u8>> = vec![
            vec![1, 0, 1, 0, 1, 0],
            vec![0, 1, 0, 1, 0, 1],
            vec![1, 0, 0, 1, 0, 0],
            vec![0, 1, 0, 0, 1, 0],
            vec![0, 0, 1, 0, 0, 1],
        ];
        assert_eq!(h, expect);
    }

    #[test]
    fn crt_seven_stage_parameters() {
        let e = CodeEnsemble::crt(&[47, 49, 50, 53, 57, 59, 61], 1).unwrap();
        assert_eq!(e.m(), 376);
        assert_eq!(e.n(), 47 * 49 * 50 * 53 * 57 * 59 * 61);
        let first = e.bins_of(1).unwrap();
        let offsets: Vec<u64> = e.stage_offsets().unwrap().iter().map(|o| o + 1).collect();
        assert_eq!(first, offsets);
    }

    #[test]
    fn crt_rejects_common_factors() {
        assert!(CodeEnsemble::crt(&[4, 6], 1).is_err());
        assert!(CodeEnsemble::crt(&[3, 5], 3).is_err());
    }

    #[test]
    fn tall_stages_are_cyclic_products() {
        let e = CodeEnsemble::crt(&[3, 5, 7], 2).unwrap();
        assert_eq!(e.stage_heights().unwrap(), &[15, 35, 21]);
        assert_eq!(e.m(), 71);
        assert_eq!(e.n(), 105);
        for l in 1..=105 {
            let b = e.bins_of(l).unwrap();
            assert_eq!(b[1], 16 + (l - 1) % 35);
        }
    }

    #[test]
    fn crt_residue_round_trip() {
        let e = CodeEnsemble::crt(&[7, 8, 9, 11], 1).unwrap();
        for l in 1..=e.n() {
            let b = e.bins_of(l).unwrap();
            let offs = e.stage_offsets().unwrap();
            let r: Vec<u64> = b.iter().zip(offs).map(|(b, o)| b - 1 - o).collect();
            assert_eq!(e.index_from_residues(&r).unwrap(), l);
        }
    }

    #[test]
    fn crt_membership_matches_slots() {
        let e = CodeEnsemble::crt(&[5, 6, 7], 1).unwrap();
        let mut buf = Vec::new();
        for l in 1..=e.n() {
            let slots: Vec<usize> = e.bins_of(l).unwrap().iter().map(|&b| b as usize - 1).collect();
            for s in 0..e.m() {
                assert_eq!(e.contains(l, s, &mut buf), slots.contains(&s));
            }
        }
    }

    #[test]
    fn out_of_range_ball() {
        let e = CodeEnsemble::balls_and_bins(10, 5, 2, RngSeed(1)).unwrap();
        assert!(e.bins_of(0).is_err());
        assert!(e.bins_of(11).is_err());
        assert!(induce_graph(&e, &[11]).is_err());
    }

    #[test]
    fn induced_graph_basics() {
        let e = CodeEnsemble::balls_and_bins(1000, 50, 4, RngSeed(2)).unwrap();
        let g = induce_graph(&e, &[]).unwrap();
        assert!(g.bins.iter().all(Vec::is_empty));
        let g = induce_graph(&e, &[17]).unwrap();
        assert_eq!(g.bins.iter().filter(|b| b.len() == 1).count(), 4);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn toy_graph_from_bin_rows() {
        let bins = vec![vec![1, 4], vec![3], vec![2, 3, 4], vec![1, 3]];
        let e = CodeEnsemble::from_bins(4, &bins).unwrap();
        let g = induce_graph(&e, &[1, 2, 3, 4]).unwrap();
        assert_eq!(g.bins, bins);
        let g = induce_graph(&e, &[1, 3]).unwrap();
        assert_eq!(g.bins, vec![vec![1], vec![3], vec![3], vec![1, 3]]);
    }
}
