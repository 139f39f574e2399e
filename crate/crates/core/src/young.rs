//! Young subgroups of `S_{2^n}` stabilising the sponge's A- and B-blocks,
//! double-coset signatures, and exhaustive census for `2^n ≤ 8`.
//!
//! A-blocks: `A_x = { x ‖ y }`, one per rate value, each of size `2^c`.
//! B-blocks: singletons `B_z = { z ‖ 0^c }` followed by their complement `B_⊥`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::bitdomain::{shuffled_positions, PermutationTable, Seed, SpongeParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PartitionKind {
    A,
    B,
}

/// A block partition of `{0,1}^n`. Blocks are implicit: membership and
/// in-block positions are arithmetic, and [`BlockPartition::blocks`]
/// materialises the sorted index lists on request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockPartition {
    params: SpongeParams,
    kind: PartitionKind,
}

impl BlockPartition {
    pub fn a(params: SpongeParams) -> Self {
        BlockPartition { params, kind: PartitionKind::A }
    }

    pub fn b(params: SpongeParams) -> Self {
        BlockPartition { params, kind: PartitionKind::B }
    }

    pub fn params(&self) -> SpongeParams {
        self.params
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.params.n()
    }

    pub fn block_count(&self) -> usize {
        match self.kind {
            PartitionKind::A => self.params.rate_size(),
            PartitionKind::B => self.params.rate_size() + 1,
        }
    }

    /// Index of `B_⊥` in a B-partition.
    pub fn bottom_block(&self) -> usize {
        self.params.rate_size()
    }

    pub fn block_len(&self, block: usize) -> usize {
        match self.kind {
            PartitionKind::A => self.params.capacity_size(),
            PartitionKind::B if block < self.params.rate_size() => 1,
            PartitionKind::B => self.params.domain_size() - self.params.rate_size(),
        }
    }

    #[inline]
    pub fn block_of(&self, w: u32) -> usize {
        match self.kind {
            PartitionKind::A => self.params.top(w) as usize,
            PartitionKind::B => {
                if w & self.params.capacity_mask() == 0 {
                    self.params.top(w) as usize
                } else {
                    self.params.rate_size()
                }
            }
        }
    }

    /// Position of `w` inside its block (blocks are sorted ascending).
    #[inline]
    pub fn position(&self, w: u32) -> usize {
        match self.kind {
            PartitionKind::A => (w & self.params.capacity_mask()) as usize,
            PartitionKind::B => {
                let low = w & self.params.capacity_mask();
                if low == 0 {
                    0
                } else {
                    // skip the multiples of 2^c at or below w
                    (w - (w >> self.params.c()) - 1) as usize
                }
            }
        }
    }

    /// The element at `position` of `block`.
    #[inline]
    pub fn member(&self, block: usize, position: usize) -> u32 {
        let c = self.params.c();
        match self.kind {
            PartitionKind::A => ((block as u32) << c) | position as u32,
            PartitionKind::B if block < self.params.rate_size() => (block as u32) << c,
            PartitionKind::B => {
                let width = self.params.capacity_mask() as usize;
                let hi = (position / width) as u32;
                let low = (position % width) as u32 + 1;
                (hi << c) | low
            }
        }
    }

    /// Sorted element lists, one per block (B_⊥ last).
    pub fn blocks(&self) -> Vec<Vec<u32>> {
        (0..self.block_count()).map(|b| (0..self.block_len(b)).map(|p| self.member(b, p)).collect()).collect()
    }
}

/// `S_{B_1} × … × S_{B_l}` for a block partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct YoungSubgroup {
    partition: BlockPartition,
}

impl YoungSubgroup {
    pub fn new(partition: BlockPartition) -> Self {
        YoungSubgroup { partition }
    }

    /// `H`, stabiliser of the A-blocks.
    pub fn h(params: SpongeParams) -> Self {
        YoungSubgroup::new(BlockPartition::a(params))
    }

    /// `K`, stabiliser of the B-blocks.
    pub fn k(params: SpongeParams) -> Self {
        YoungSubgroup::new(BlockPartition::b(params))
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn order(&self) -> BigUint {
        (0..self.partition.block_count()).map(|b| factorial(self.partition.block_len(b) as u64)).product()
    }

    pub fn contains(&self, pi: &PermutationTable) -> bool {
        pi.bits() == self.partition.n()
            && pi
                .forward_entries()
                .iter()
                .enumerate()
                .all(|(w, &v)| self.partition.block_of(w as u32) == self.partition.block_of(v))
    }

    /// Every element, for `2^n ≤ 8`.
    pub fn elements(&self) -> Result<Vec<PermutationTable>> {
        self.partition.params.ensure_enumeration_mode()?;
        let blocks = self.partition.blocks();
        let size = self.partition.params.domain_size();
        let mut out = vec![(0..size as u32).collect::<Vec<u32>>()];
        for block in &blocks {
            let mut next = Vec::new();
            for base in &out {
                for arrangement in Lexicographic::new(block.len()) {
                    let mut f = base.clone();
                    for (p, &q) in arrangement.iter().enumerate() {
                        f[block[p] as usize] = block[q as usize];
                    }
                    next.push(f);
                }
            }
            out = next;
        }
        out.into_iter().map(|f| PermutationTable::from_forward(self.partition.n(), f)).collect()
    }
}

/// The arrangement used for one block: position `p` goes to position
/// `perm[p]`. Shared by dense sampling and lazy point evaluation.
pub fn block_permutation(seed: &Seed, block: usize, size: usize) -> Vec<u32> {
    shuffled_positions(&seed.derive_index("block", block as u64), size)
}

/// Uniform member of `g`: an independent shuffle inside each block.
pub fn sample_member(g: &YoungSubgroup, seed: &Seed) -> Result<PermutationTable> {
    let part = g.partition;
    part.params.ensure_table_mode()?;
    let mut forward: Vec<u32> = (0..part.params.domain_size() as u32).collect();
    for block in 0..part.block_count() {
        let size = part.block_len(block);
        if size < 2 {
            continue;
        }
        let perm = block_permutation(seed, block, size);
        for (p, &q) in perm.iter().enumerate() {
            forward[part.member(block, p) as usize] = part.member(block, q as usize);
        }
    }
    PermutationTable::from_forward(part.n(), forward)
}

/// `|A_i ∩ π(B_j)|`, rows indexed by A-blocks, columns by B-blocks
/// (`B_⊥` last), stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CosetSignature {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl CosetSignature {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn matrix(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.entries.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    /// For an (A, B) signature: the sponge hash shared by the coset, read
    /// off the singleton columns.
    pub fn sponge_table(&self) -> Vec<u32> {
        (0..self.rows)
            .map(|z| {
                (0..self.rows).find(|&i| self.get(i, z) == 1).expect("singleton column holds exactly one 1")
                    as u32
            })
            .collect()
    }
}

impl Serialize for CosetSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix().serialize(s)
    }
}

impl fmt::Display for CosetSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.matrix())
    }
}

pub fn signature(pi: &PermutationTable, a: &BlockPartition, b: &BlockPartition) -> Result<CosetSignature> {
    if a.n() != b.n() || pi.bits() != a.n() {
        return Err(Error::Parameter(format!(
            "signature needs a common width: π has {} bits, partitions {} and {}",
            pi.bits(),
            a.n(),
            b.n()
        )));
    }
    Ok(signature_of_slice(pi.forward_entries(), a, b))
}

pub(crate) fn signature_of_slice(forward: &[u32], a: &BlockPartition, b: &BlockPartition) -> CosetSignature {
    let rows = a.block_count();
    let cols = b.block_count();
    let mut entries = vec![0u64; rows * cols];
    for (w, &v) in forward.iter().enumerate() {
        entries[a.block_of(v) * cols + b.block_of(w as u32)] += 1;
    }
    CosetSignature { rows, cols, entries }
}

pub fn same_double_coset(
    pi1: &PermutationTable,
    pi2: &PermutationTable,
    a: &BlockPartition,
    b: &BlockPartition,
) -> Result<bool> {
    Ok(signature(pi1, a, b)? == signature(pi2, a, b)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusEntry {
    pub signature: CosetSignature,
    pub size: u64,
    /// `|x⁻¹Hx ∩ K|` for the representative `x`.
    pub factorizations: u64,
    /// Direct count of `(h, k) ∈ H × K` with `h x k = x`, when `|H||K|` is
    /// small enough to enumerate.
    pub factorizations_brute_force: Option<u64>,
    /// `|H||K| / size`.
    pub factorizations_from_size: u64,
    pub example_f: Vec<u32>,
    pub representative: Vec<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Census {
    pub params: SpongeParams,
    pub group_order: u64,
    pub h_order: u64,
    pub k_order: u64,
    pub cosets: Vec<CensusEntry>,
}

impl Census {
    /// Every Wildon-style cross-check holds.
    pub fn consistent(&self) -> bool {
        let hk = self.h_order * self.k_order;
        self.cosets.iter().map(|c| c.size).sum::<u64>() == self.group_order
            && self.cosets.iter().all(|c| {
                c.size * c.factorizations == hk
                    && c.factorizations == c.factorizations_from_size
                    && c.factorizations_brute_force.is_none_or(|b| b == c.factorizations)
            })
    }
}

const BRUTE_FORCE_LIMIT: u64 = 1 << 20;

/// Enumerates `S_{2^n}`, groups it into (H, K) double cosets by signature and
/// counts factorizations of each representative.
pub fn coset_census(params: SpongeParams) -> Result<Census> {
    params.ensure_enumeration_mode()?;
    let a = BlockPartition::a(params);
    let b = BlockPartition::b(params);
    let points = params.domain_size();
    let total = factorial_u64(points);

    let chunk = 720u64.min(total);
    let classes: BTreeMap<CosetSignature, (u64, Vec<u32>)> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut local: BTreeMap<CosetSignature, (u64, Vec<u32>)> = BTreeMap::new();
            let start = c * chunk;
            let end = (start + chunk).min(total);
            let mut perm = nth_permutation(points, start);
            for _ in start..end {
                let sig = signature_of_slice(&perm, &a, &b);
                local.entry(sig).and_modify(|e| e.0 += 1).or_insert_with(|| (1, perm.clone()));
                next_permutation(&mut perm);
            }
            local
        })
        .reduce(BTreeMap::new, |mut acc, part| {
            for (sig, (count, rep)) in part {
                acc.entry(sig)
                    .and_modify(|e| {
                        e.0 += count;
                        if rep < e.1 {
                            e.1 = rep.clone();
                        }
                    })
                    .or_insert((count, rep));
            }
            acc
        });

    let h = YoungSubgroup::h(params).elements()?;
    let k = YoungSubgroup::k(params).elements()?;
    let (h_order, k_order) = (h.len() as u64, k.len() as u64);
    let brute = h_order * k_order <= BRUTE_FORCE_LIMIT;

    let cosets = classes
        .into_iter()
        .map(|(sig, (size, rep))| {
            let x = PermutationTable::from_forward(params.n(), rep.clone())?;
            let x_inv = x.inverse();
            // k ∈ K with x k x⁻¹ ∈ H
            let factorizations = k
                .iter()
                .filter(|kk| {
                    let conj: Vec<u32> =
                        (0..points as u32).map(|w| x.forward(kk.forward(x_inv.forward(w)))).collect();
                    conj.iter().enumerate().all(|(w, &v)| a.block_of(w as u32) == a.block_of(v))
                })
                .count() as u64;
            let factorizations_brute_force = brute.then(|| {
                h.par_iter()
                    .map(|hh| {
                        k.iter()
                            .filter(|kk| {
                                (0..points).all(|w| hh.forward(x.forward(kk.forward(w as u32))) == rep[w])
                            })
                            .count() as u64
                    })
                    .sum()
            });
            Ok(CensusEntry {
                example_f: sig.sponge_table(),
                factorizations_from_size: h_order * k_order / size,
                signature: sig,
                size,
                factorizations,
                factorizations_brute_force,
                representative: rep,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Census { params, group_order: total, h_order, k_order, cosets })
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// `n!` for `n ≤ 20`.
pub fn factorial_u64(n: usize) -> u64 {
    assert!(n <= 20, "{n}! overflows u64");
    (1..=n as u64).product()
}

/// Advances `perm` to its lexicographic successor; returns `false` (and
/// leaves the last permutation in place) when there is none.
pub fn next_permutation(perm: &mut [u32]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&v| v > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// The `rank`-th permutation of `0..points` in lexicographic order.
pub fn nth_permutation(points: usize, mut rank: u64) -> Vec<u32> {
    let mut pool: Vec<u32> = (0..points as u32).collect();
    let mut out = Vec::with_capacity(points);
    for i in (0..points).rev() {
        let f = factorial_u64(i);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(idx));
    }
    out
}

/// Lexicographic rank (Lehmer code) of a permutation of `0..len`.
pub fn permutation_rank(perm: &[u32]) -> u64 {
    let n = perm.len();
    (0..n)
        .map(|i| {
            let smaller = perm[i + 1..].iter().filter(|&&v| v < perm[i]).count() as u64;
            smaller * factorial_u64(n - 1 - i)
        })
        .sum()
}

/// All permutations of `0..points` in lexicographic order.
pub struct Lexicographic {
    current: Option<Vec<u32>>,
}

impl Lexicographic {
    pub fn new(points: usize) -> Self {
        Lexicographic { current: Some((0..points as u32).collect()) }
    }
}

impl Iterator for Lexicographic {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let mut succ = out.clone();
        if next_permutation(&mut succ) {
            self.current = Some(succ);
        }
        Some(out)
    }
}
