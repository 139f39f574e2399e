//! The transversal `π_f`, offline symmetrization `ω ∘ π_f ∘ σ`, and the
//! stateless simulator answering `φ̂` / `φ̂⁻¹` with one `f`-query per call.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::bitdomain::{FunctionTable, PermutationTable, Seed, SpongeParams, Word};
use crate::sponge::{Direction, FunctionOracle, Interface, PermutationOracle};
use crate::young::{block_permutation, sample_member, BlockPartition, YoungSubgroup};
use crate::{Error, Result};

/// `π_f(x ‖ g ‖ y) = (y ⊕ f(x)) ‖ g ‖ x`.
#[derive(Clone, Debug)]
pub struct Transversal<F> {
    params: SpongeParams,
    f: F,
}

impl<F: FunctionOracle> Transversal<F> {
    pub fn new(params: SpongeParams, f: F) -> Self {
        Transversal { params, f }
    }

    pub fn params(&self) -> SpongeParams {
        self.params
    }

    pub fn oracle(&self) -> &F {
        &self.f
    }

    #[inline]
    pub fn forward(&self, w: u32) -> u32 {
        let p = &self.params;
        let (x, g, y) = (p.top(w), p.middle(w), p.bottom(w));
        p.join(y ^ self.f.eval(x), g, x)
    }

    /// `π_f⁻¹(a ‖ g ‖ b) = b ‖ g ‖ (a ⊕ f(b))`.
    #[inline]
    pub fn inverse(&self, w: u32) -> u32 {
        let p = &self.params;
        let (a, g, b) = (p.top(w), p.middle(w), p.bottom(w));
        p.join(b, g, a ^ self.f.eval(b))
    }

    pub fn table(&self) -> Result<PermutationTable> {
        self.params.ensure_table_mode()?;
        let forward = (0..self.params.domain_size() as u32).map(|w| self.forward(w)).collect();
        PermutationTable::from_forward(self.params.n(), forward)
    }
}

fn check_word(w: Word, params: &SpongeParams) -> Result<u32> {
    if w.width() != params.n() {
        return Err(Error::Parameter(format!(
            "expected an n = {}-bit word, got width {}",
            params.n(),
            w.width()
        )));
    }
    Ok(w.value())
}

pub fn transversal_fwd<F: FunctionOracle>(t: &Transversal<F>, w: Word) -> Result<Word> {
    let v = check_word(w, &t.params)?;
    Word::new(t.forward(v), t.params.n())
}

pub fn transversal_inv<F: FunctionOracle>(t: &Transversal<F>, w: Word) -> Result<Word> {
    let v = check_word(w, &t.params)?;
    Word::new(t.inverse(v), t.params.n())
}

/// A function oracle that counts its evaluations.
#[derive(Debug)]
pub struct CountingOracle<F> {
    inner: F,
    count: AtomicU64,
}

impl<F: FunctionOracle> CountingOracle<F> {
    pub fn new(inner: F) -> Self {
        CountingOracle { inner, count: AtomicU64::new(0) }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: FunctionOracle> FunctionOracle for CountingOracle<F> {
    fn eval(&self, x: u32) -> u32 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Role {
    Sigma,
    Omega,
}

/// Cached block arrangements (forward and inverse) keyed by role and block.
struct BlockCache {
    entries: HashMap<(Role, usize), Arc<BlockArrangement>>,
    words: usize,
}

struct BlockArrangement {
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl BlockArrangement {
    fn new(forward: Vec<u32>) -> Self {
        let mut inverse = vec![0u32; forward.len()];
        for (p, &q) in forward.iter().enumerate() {
            inverse[q as usize] = p as u32;
        }
        BlockArrangement { forward, inverse }
    }
}

/// Words of cached arrangement data kept before the cache is cleared.
const CACHE_CAP_WORDS: usize = 1 << 24;

/// The simulator's coins: a 256-bit seed with domain-separated sub-seeds
/// for `σ` and `ω`. Clones share one block cache.
#[derive(Clone)]
pub struct SharedRandomness {
    seed: Seed,
    cache: Arc<Mutex<BlockCache>>,
}

impl std::fmt::Debug for SharedRandomness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SharedRandomness").field("seed", &self.seed).finish()
    }
}

impl PartialEq for SharedRandomness {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
    }
}

impl SharedRandomness {
    pub fn new(seed: Seed) -> Self {
        SharedRandomness {
            seed,
            cache: Arc::new(Mutex::new(BlockCache { entries: HashMap::new(), words: 0 })),
        }
    }

    /// Member of the restricted 16-bit SR space used for exhaustive sweeps.
    pub fn from_u16(index: u16) -> Self {
        SharedRandomness::new(Seed::from_u64(index as u64).derive("sr16"))
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn sigma_seed(&self) -> Seed {
        self.seed.derive("sigma")
    }

    pub fn omega_seed(&self) -> Seed {
        self.seed.derive("omega")
    }

    /// `σ ∈ K` as a dense table.
    pub fn sigma(&self, params: SpongeParams) -> Result<PermutationTable> {
        sample_member(&YoungSubgroup::k(params), &self.sigma_seed())
    }

    /// `ω ∈ H` as a dense table.
    pub fn omega(&self, params: SpongeParams) -> Result<PermutationTable> {
        sample_member(&YoungSubgroup::h(params), &self.omega_seed())
    }

    fn arrangement(&self, role: Role, block: usize, size: usize) -> Arc<BlockArrangement> {
        if let Some(a) = self.cache.lock().expect("block cache").entries.get(&(role, block)) {
            return Arc::clone(a);
        }
        let seed = match role {
            Role::Sigma => self.sigma_seed(),
            Role::Omega => self.omega_seed(),
        };
        let arrangement = Arc::new(BlockArrangement::new(block_permutation(&seed, block, size)));
        if 2 * size <= CACHE_CAP_WORDS {
            let mut cache = self.cache.lock().expect("block cache");
            if cache.words + 2 * size > CACHE_CAP_WORDS {
                cache.entries.clear();
                cache.words = 0;
            }
            cache.words += 2 * size;
            cache.entries.insert((role, block), Arc::clone(&arrangement));
        }
        arrangement
    }

    fn eval(&self, role: Role, part: &BlockPartition, w: u32, direction: Direction) -> u32 {
        let block = part.block_of(w);
        let size = part.block_len(block);
        if size == 1 {
            return w;
        }
        let arrangement = self.arrangement(role, block, size);
        let pos = part.position(w);
        let moved = match direction {
            Direction::Forward => arrangement.forward[pos],
            Direction::Inverse => arrangement.inverse[pos],
        };
        part.member(block, moved as usize)
    }
}

/// One point of the seeded block arrangement of `block` under `partition`,
/// recomputed from `seed` (no cache). Value-identical to the dense table
/// from [`sample_member`] with the same seed.
pub fn point_eval_block_perm(
    seed: &Seed,
    partition: &BlockPartition,
    block: usize,
    point: u32,
    direction: Direction,
) -> Result<u32> {
    if block >= partition.block_count() || point >> partition.n() != 0 || partition.block_of(point) != block {
        return Err(Error::Parameter(format!("point {point} is not in block {block}")));
    }
    let size = partition.block_len(block);
    if size == 1 {
        return Ok(point);
    }
    let perm = block_permutation(seed, block, size);
    let pos = partition.position(point) as u32;
    let moved = match direction {
        Direction::Forward => perm[pos as usize],
        Direction::Inverse => perm.iter().position(|&q| q == pos).expect("bijection") as u32,
    };
    Ok(partition.member(block, moved as usize))
}

/// `ω ∘ π_f ∘ σ` with `σ ~ K`, `ω ~ H` drawn from `sr`.
pub fn symmetrize(f: &FunctionTable, sr: &SharedRandomness) -> Result<PermutationTable> {
    let params = f.params();
    params.ensure_table_mode()?;
    symmetrize_with(f, &sr.sigma(params)?, &sr.omega(params)?)
}

/// `ω ∘ π_f ∘ σ` for explicit `σ`, `ω`.
pub fn symmetrize_with(
    f: &FunctionTable,
    sigma: &PermutationTable,
    omega: &PermutationTable,
) -> Result<PermutationTable> {
    let params = f.params();
    if params.r() > params.c() {
        return Err(Error::UnsupportedRegime { r: params.r(), c: params.c() });
    }
    let pi = Transversal::new(params, f).table()?;
    omega.compose(&pi.compose(sigma)?)
}

/// Stateless query access to `φ̂ = ω ∘ π_f ∘ σ`: `σ` and `ω` are evaluated
/// lazily per block from the shared randomness and every call makes exactly
/// one query to `f`.
pub struct SimOracle<F> {
    transversal: Transversal<F>,
    sr: SharedRandomness,
    a: BlockPartition,
    b: BlockPartition,
    f_queries: AtomicU64,
    block_evals: AtomicU64,
}

impl<F: FunctionOracle> SimOracle<F> {
    pub fn new(params: SpongeParams, f: F, sr: SharedRandomness) -> Result<Self> {
        if params.r() > params.c() {
            return Err(Error::UnsupportedRegime { r: params.r(), c: params.c() });
        }
        Ok(SimOracle {
            transversal: Transversal::new(params, f),
            sr,
            a: BlockPartition::a(params),
            b: BlockPartition::b(params),
            f_queries: AtomicU64::new(0),
            block_evals: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> SpongeParams {
        self.transversal.params
    }

    pub fn shared_randomness(&self) -> &SharedRandomness {
        &self.sr
    }

    /// `f`-queries made so far.
    pub fn f_queries(&self) -> u64 {
        self.f_queries.load(Ordering::Relaxed)
    }

    /// `σ`/`ω` point evaluations made so far (two per query).
    pub fn block_evaluations(&self) -> u64 {
        self.block_evals.load(Ordering::Relaxed)
    }

    pub fn sim_query(&self, direction: Direction, w: u32) -> u32 {
        self.f_queries.fetch_add(1, Ordering::Relaxed);
        self.block_evals.fetch_add(2, Ordering::Relaxed);
        match direction {
            Direction::Forward => {
                let s = self.sr.eval(Role::Sigma, &self.b, w, Direction::Forward);
                let t = self.transversal.forward(s);
                self.sr.eval(Role::Omega, &self.a, t, Direction::Forward)
            }
            Direction::Inverse => {
                let t = self.sr.eval(Role::Omega, &self.a, w, Direction::Inverse);
                let s = self.transversal.inverse(t);
                self.sr.eval(Role::Sigma, &self.b, s, Direction::Inverse)
            }
        }
    }

    pub fn sim_query_word(&self, direction: Direction, w: Word) -> Result<Word> {
        let v = check_word(w, &self.transversal.params)?;
        Word::new(self.sim_query(direction, v), self.transversal.params.n())
    }
}

/// A simulator instance: a permutation oracle that may report extra work.
pub trait SimInstance: PermutationOracle {
    /// Point evaluations of `σ`/`ω` (or comparable internal work).
    fn block_evaluations(&self) -> u64 {
        0
    }
}

impl<F: FunctionOracle> SimInstance for SimOracle<F> {
    fn block_evaluations(&self) -> u64 {
        SimOracle::block_evaluations(self)
    }
}

impl<F: FunctionOracle> PermutationOracle for SimOracle<F> {
    fn bits(&self) -> u32 {
        self.transversal.params.n()
    }

    fn apply(&self, direction: Direction, w: u32) -> u32 {
        self.sim_query(direction, w)
    }
}

/// Binds a simulator over the interface's private function as its public
/// side (the ideal world `D[f, Sim[f, SR]]`).
pub fn attach_simulator(
    iface: &mut Interface,
    sr: SharedRandomness,
) -> Result<Arc<SimOracle<Arc<dyn FunctionOracle>>>> {
    let sim = Arc::new(SimOracle::new(iface.params(), iface.private_oracle(), sr)?);
    iface.bind_permutation(Arc::clone(&sim) as Arc<dyn PermutationOracle>)?;
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::bitdomain::sample_function;
    use crate::sponge::{random_oracle_world, sponge_truth_table};

    fn p(r: u32, c: u32) -> SpongeParams {
        SpongeParams::new(r, c).unwrap()
    }

    #[test]
    fn zero_function_gives_a_swap() {
        let params = p(2, 3);
        let t = Transversal::new(params, FunctionTable::constant(params, 0).unwrap());
        for w in 0..32u32 {
            let (x, g, y) = (params.top(w), params.middle(w), params.bottom(w));
            assert_eq!(t.forward(w), params.join(y, g, x));
            assert_eq!(t.inverse(t.inverse(w)), w);
        }
    }

    #[test]
    fn identity_function_by_hand() {
        let params = p(1, 1);
        let t = Transversal::new(params, FunctionTable::identity(params));
        let fwd: Vec<u32> = (0..4).map(|w| t.forward(w)).collect();
        assert_eq!(fwd, vec![0b00, 0b10, 0b11, 0b01]);
        assert_eq!(t.inverse(0b10), 0b01);
        let w = Word::new(0b01, 2).unwrap();
        assert_eq!(transversal_fwd(&t, w).unwrap().value(), 0b10);
        assert!(transversal_fwd(&t, Word::new(0, 3).unwrap()).is_err());
    }

    #[test]
    fn transversal_round_trip_exhaustive() {
        for n in 2..=12u32 {
            for r in 1..=n / 2 {
                let params = p(r, n - r);
                let f = sample_function(params, &Seed::from_u64(n as u64 * 7 + r as u64));
                let t = Transversal::new(params, &f);
                for w in 0..1u32 << n {
                    assert_eq!(t.inverse(t.forward(w)), w);
                }
            }
        }
    }

    #[test]
    fn transversal_hashes_to_f() {
        let params = p(2, 3);
        for s in 0..100 {
            let f = sample_function(params, &Seed::from_u64(s));
            let table = Transversal::new(params, &f).table().unwrap();
            assert_eq!(sponge_truth_table(&table, &params), f);
        }
    }

    #[test]
    fn one_query_per_transversal_call() {
        let params = p(2, 2);
        let f = CountingOracle::new(FunctionTable::identity(params));
        let t = Transversal::new(params, &f);
        t.forward(3);
        t.inverse(5);
        assert_eq!(f.count(), 2);
    }

    #[test]
    fn identity_symmetrizers_give_the_transversal() {
        let params = p(1, 2);
        let f = sample_function(params, &Seed::from_u64(1));
        let id = PermutationTable::identity(3);
        let out = symmetrize_with(&f, &id, &id).unwrap();
        assert_eq!(out, Transversal::new(params, &f).table().unwrap());
    }

    #[test]
    fn symmetrize_hashes_to_f() {
        let params = p(1, 1);
        for code in 0..4 {
            let f = FunctionTable::from_code(params, code).unwrap();
            for s in 0..1000 {
                let phi = symmetrize(&f, &SharedRandomness::new(Seed::from_u64(s))).unwrap();
                assert_eq!(sponge_truth_table(&phi, &params), f);
            }
        }
    }

    #[test]
    fn constant_zero_multiplicities() {
        let params = p(1, 1);
        let f = FunctionTable::constant(params, 0).unwrap();
        let h = YoungSubgroup::h(params).elements().unwrap();
        let k = YoungSubgroup::k(params).elements().unwrap();
        let mut counts: HashMap<Vec<u32>, u32> = HashMap::new();
        for omega in &h {
            for sigma in &k {
                let phi = symmetrize_with(&f, sigma, omega).unwrap();
                *counts.entry(phi.forward_entries().to_vec()).or_default() += 1;
            }
        }
        assert_eq!(counts.len(), 4);
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn simulator_matches_dense_symmetrization() {
        for n in 2..=12u32 {
            for r in 1..=n / 2 {
                let params = p(r, n - r);
                for s in 0..50u64 {
                    if n > 8 && s >= 5 {
                        break;
                    }
                    let seed = Seed::from_u64(1000 * n as u64 + 10 * r as u64 + s);
                    let f = sample_function(params, &seed.derive("f"));
                    let sr = SharedRandomness::new(seed.derive("sr"));
                    let dense = symmetrize(&f, &sr).unwrap();
                    let sim = SimOracle::new(params, &f, sr).unwrap();
                    for w in 0..1u32 << n {
                        assert_eq!(sim.sim_query(Direction::Forward, w), dense.forward(w));
                        assert_eq!(sim.sim_query(Direction::Inverse, w), dense.backward(w));
                    }
                }
            }
        }
    }

    #[test]
    fn simulator_is_stateless_and_counts() {
        let params = p(2, 4);
        let f = sample_function(params, &Seed::from_u64(5));
        let sim = SimOracle::new(params, &f, SharedRandomness::new(Seed::from_u64(6))).unwrap();
        let first = sim.sim_query(Direction::Forward, 17);
        for w in 0..40 {
            sim.sim_query(Direction::Inverse, w);
        }
        assert_eq!(sim.sim_query(Direction::Forward, 17), first);
        assert_eq!(sim.f_queries(), 42);

        let fresh = SimOracle::new(params, &f, SharedRandomness::new(Seed::from_u64(6))).unwrap();
        for i in 0..12 {
            let dir = if i < 7 { Direction::Forward } else { Direction::Inverse };
            fresh.sim_query(dir, i);
        }
        assert_eq!(fresh.f_queries(), 12);
        assert_eq!(fresh.block_evaluations(), 24);
    }

    #[test]
    fn point_eval_edge_cases() {
        let params = p(2, 8);
        let b = BlockPartition::b(params);
        let seed = Seed::from_u64(1);
        assert_eq!(point_eval_block_perm(&seed, &b, 1, 1 << 8, Direction::Forward).unwrap(), 1 << 8);
        assert!(point_eval_block_perm(&seed, &b, 0, 5, Direction::Forward).is_err());
        let a = BlockPartition::a(params);
        let dense = sample_member(&YoungSubgroup::h(params), &seed).unwrap();
        let mut rng = Seed::from_u64(2).rng();
        for _ in 0..10_000 {
            let w = rand::Rng::random_range(&mut rng, 0..1u32 << 10);
            let blk = a.block_of(w);
            let v = point_eval_block_perm(&seed, &a, blk, w, Direction::Forward).unwrap();
            assert_eq!(v, dense.forward(w));
            assert_eq!(point_eval_block_perm(&seed, &a, blk, v, Direction::Inverse).unwrap(), w);
        }
    }

    #[test]
    fn attached_simulator_is_consistent_with_private_side() {
        let params = p(3, 5);
        let mut iface = random_oracle_world(params, &Seed::from_u64(11));
        let sim = attach_simulator(&mut iface, SharedRandomness::new(Seed::from_u64(12))).unwrap();
        for x in 0..8 {
            let y = iface.pub_eval(Direction::Forward, params.absorb(x)).unwrap();
            assert_eq!(params.top(y), iface.priv_eval(x));
            assert_eq!(iface.pub_eval(Direction::Inverse, y).unwrap(), params.absorb(x));
        }
        assert_eq!(sim.f_queries(), 16);
        assert_eq!(iface.counts().public, 16);
    }

    #[test]
    fn wide_simulator_round_trip() {
        let params = p(10, 12);
        let f = crate::bitdomain::KeystreamFunction::new(Seed::from_u64(3), 10, 10).unwrap();
        let sim = SimOracle::new(params, f, SharedRandomness::new(Seed::from_u64(4))).unwrap();
        let mut rng = Seed::from_u64(5).rng();
        for _ in 0..2000 {
            let w = rand::Rng::random_range(&mut rng, 0..1u32 << 22);
            let y = sim.sim_query(Direction::Forward, w);
            assert_eq!(sim.sim_query(Direction::Inverse, y), w);
        }
    }
}
