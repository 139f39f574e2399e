//! The one-round sponge and the private/public interface shared by every
//! game in the crate.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitdomain::{
    sample_function, sample_permutation, FunctionTable, KeystreamFunction, PermutationTable, Seed,
    SpongeParams, Word,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[serde(rename = "fwd")]
    Forward,
    #[serde(rename = "inv")]
    Inverse,
}

/// Query access to a function.
pub trait FunctionOracle: Send + Sync {
    fn eval(&self, x: u32) -> u32;

    /// The backing truth table, when one is stored.
    fn dense(&self) -> Option<&FunctionTable> {
        None
    }
}

/// Query access to a permutation and its inverse.
pub trait PermutationOracle: Send + Sync {
    fn bits(&self) -> u32;

    fn apply(&self, direction: Direction, w: u32) -> u32;

    fn dense(&self) -> Option<&PermutationTable> {
        None
    }
}

impl FunctionOracle for FunctionTable {
    #[inline]
    fn eval(&self, x: u32) -> u32 {
        self.get(x)
    }

    fn dense(&self) -> Option<&FunctionTable> {
        Some(self)
    }
}

impl FunctionOracle for KeystreamFunction {
    fn eval(&self, x: u32) -> u32 {
        KeystreamFunction::eval(self, x)
    }
}

impl PermutationOracle for PermutationTable {
    fn bits(&self) -> u32 {
        PermutationTable::bits(self)
    }

    #[inline]
    fn apply(&self, direction: Direction, w: u32) -> u32 {
        match direction {
            Direction::Forward => self.forward(w),
            Direction::Inverse => self.backward(w),
        }
    }

    fn dense(&self) -> Option<&PermutationTable> {
        Some(self)
    }
}

impl<T: FunctionOracle + ?Sized> FunctionOracle for Arc<T> {
    fn eval(&self, x: u32) -> u32 {
        (**self).eval(x)
    }

    fn dense(&self) -> Option<&FunctionTable> {
        (**self).dense()
    }
}

impl<T: FunctionOracle + ?Sized> FunctionOracle for &T {
    fn eval(&self, x: u32) -> u32 {
        (**self).eval(x)
    }

    fn dense(&self) -> Option<&FunctionTable> {
        (**self).dense()
    }
}

impl<T: PermutationOracle + ?Sized> PermutationOracle for Arc<T> {
    fn bits(&self) -> u32 {
        (**self).bits()
    }

    fn apply(&self, direction: Direction, w: u32) -> u32 {
        (**self).apply(direction, w)
    }

    fn dense(&self) -> Option<&PermutationTable> {
        (**self).dense()
    }
}

/// `Sp^φ(x)`: the top `r` bits of `φ(x ‖ 0^c)`. One forward query to `φ`.
pub fn sponge_eval<P: PermutationOracle + ?Sized>(phi: &P, x: Word, params: &SpongeParams) -> Result<Word> {
    if x.width() != params.r() {
        return Err(Error::Parameter(format!(
            "sponge input must have r = {} bits, got {}",
            params.r(),
            x.width()
        )));
    }
    if phi.bits() != params.n() {
        return Err(Error::Parameter(format!(
            "permutation has {} bits, params need n = {}",
            phi.bits(),
            params.n()
        )));
    }
    Word::new(sponge_eval_raw(phi, x.value(), params), params.r())
}

#[inline]
pub(crate) fn sponge_eval_raw<P: PermutationOracle + ?Sized>(phi: &P, x: u32, params: &SpongeParams) -> u32 {
    params.top(phi.apply(Direction::Forward, params.absorb(x)))
}

/// Full truth table of `Sp^φ`.
pub fn sponge_truth_table<P: PermutationOracle + ?Sized>(phi: &P, params: &SpongeParams) -> FunctionTable {
    let table = (0..params.rate_size() as u32).map(|x| sponge_eval_raw(phi, x, params)).collect();
    FunctionTable::new(*params, table).expect("sponge outputs are r-bit")
}

/// Truth table of any `r → r` oracle.
pub fn function_truth_table<F: FunctionOracle + ?Sized>(f: &F, params: &SpongeParams) -> FunctionTable {
    if let Some(t) = f.dense() {
        return t.clone();
    }
    let table = (0..params.rate_size() as u32).map(|x| f.eval(x)).collect();
    FunctionTable::new(*params, table).expect("oracle outputs are r-bit")
}

/// Full table of any permutation oracle.
pub fn permutation_truth_table<P: PermutationOracle + ?Sized>(phi: &P) -> Result<PermutationTable> {
    if let Some(t) = phi.dense() {
        return Ok(t.clone());
    }
    let forward = (0..1u32 << phi.bits()).map(|w| phi.apply(Direction::Forward, w)).collect();
    PermutationTable::from_forward(phi.bits(), forward)
}

/// Uniform random permutation sampled on demand: each fresh query draws an
/// unused image (or preimage) uniformly. Adaptive query access to it is
/// distributed exactly like access to a dense uniform table; the values
/// depend on query order, not just on the seed.
pub struct LazyPermutation {
    bits: u32,
    state: Mutex<LazyState>,
}

struct LazyState {
    forward: HashMap<u32, u32>,
    backward: HashMap<u32, u32>,
    rng: ChaCha8Rng,
}

impl LazyPermutation {
    pub fn new(bits: u32, seed: &Seed) -> Result<Self> {
        if bits > crate::bitdomain::MAX_BITS {
            return Err(Error::Parameter(format!("{bits}-bit permutation too wide")));
        }
        Ok(LazyPermutation {
            bits,
            state: Mutex::new(LazyState {
                forward: HashMap::new(),
                backward: HashMap::new(),
                rng: seed.rng(),
            }),
        })
    }

    /// Number of points fixed so far.
    pub fn defined_points(&self) -> usize {
        self.state.lock().expect("lazy permutation lock").forward.len()
    }
}

impl LazyState {
    fn fresh(rng: &mut ChaCha8Rng, bits: u32, taken: &HashMap<u32, u32>) -> u32 {
        let mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
        loop {
            let v = rng.next_u32() & mask;
            if !taken.contains_key(&v) {
                return v;
            }
        }
    }
}

impl PermutationOracle for LazyPermutation {
    fn bits(&self) -> u32 {
        self.bits
    }

    fn apply(&self, direction: Direction, w: u32) -> u32 {
        let mut guard = self.state.lock().expect("lazy permutation lock");
        let LazyState { forward, backward, rng } = &mut *guard;
        let (map, other) = match direction {
            Direction::Forward => (forward, backward),
            Direction::Inverse => (backward, forward),
        };
        if let Some(&v) = map.get(&w) {
            return v;
        }
        let v = LazyState::fresh(rng, self.bits, other);
        map.insert(w, v);
        other.insert(v, w);
        v
    }
}

/// The private side of the real world: `Sp^φ` evaluated on its own copy of
/// `φ`, so private calls never touch the public counter.
struct SpongePrivate {
    params: SpongeParams,
    phi: Arc<dyn PermutationOracle>,
}

impl FunctionOracle for SpongePrivate {
    fn eval(&self, x: u32) -> u32 {
        sponge_eval_raw(&*self.phi, x, &self.params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PublicKind {
    Permutation,
    Function,
}

#[derive(Clone)]
enum PublicBinding {
    Unbound,
    Permutation(Arc<dyn PermutationOracle>),
    Function(Arc<dyn FunctionOracle>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryCounts {
    pub private: u64,
    pub public: u64,
}

impl std::ops::Sub for QueryCounts {
    type Output = QueryCounts;
    fn sub(self, rhs: QueryCounts) -> QueryCounts {
        QueryCounts { private: self.private - rhs.private, public: self.public - rhs.public }
    }
}

/// Public-interface access as seen by an adversary or distinguisher.
pub trait PublicAccess: Send + Sync {
    fn params(&self) -> SpongeParams;

    fn public_kind(&self) -> Option<PublicKind>;

    fn permutation(&self, direction: Direction, w: u32) -> Result<u32>;

    fn function(&self, x: u32) -> Result<u32>;

    /// The `r → r` function reachable through the public side: `Sp^φ` via
    /// one forward query when the public side is a permutation, or a direct
    /// call when it is a function.
    fn target(&self, x: u32) -> Result<u32> {
        let params = self.params();
        match self.public_kind() {
            Some(PublicKind::Permutation) => {
                Ok(params.top(self.permutation(Direction::Forward, params.absorb(x))?))
            }
            Some(PublicKind::Function) => self.function(x),
            None => Err(Error::Configuration("public interface is unbound".into())),
        }
    }
}

/// Private oracle, public oracle and their query counters.
///
/// Counters only grow; a game reads phase costs as differences of
/// [`Interface::counts`] snapshots.
pub struct Interface {
    params: SpongeParams,
    private: Arc<dyn FunctionOracle>,
    public: PublicBinding,
    private_queries: AtomicU64,
    public_queries: AtomicU64,
}

impl fmt::Debug for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Interface")
            .field("params", &self.params)
            .field("public", &self.public_kind())
            .field("counts", &self.counts())
            .finish()
    }
}

impl Interface {
    pub fn new(params: SpongeParams, private: Arc<dyn FunctionOracle>) -> Self {
        Interface {
            params,
            private,
            public: PublicBinding::Unbound,
            private_queries: AtomicU64::new(0),
            public_queries: AtomicU64::new(0),
        }
    }

    pub fn with_public_permutation(mut self, public: Arc<dyn PermutationOracle>) -> Result<Self> {
        self.bind_permutation(public)?;
        Ok(self)
    }

    /// Attaches a simulator (or any permutation) as the public side.
    pub fn bind_permutation(&mut self, public: Arc<dyn PermutationOracle>) -> Result<()> {
        if public.bits() != self.params.n() {
            return Err(Error::Configuration(format!(
                "public permutation has {} bits, expected n = {}",
                public.bits(),
                self.params.n()
            )));
        }
        self.public = PublicBinding::Permutation(public);
        Ok(())
    }

    /// Makes the public side the private function itself (`pub R = priv R = f`).
    pub fn bind_private_as_public(&mut self) {
        self.public = PublicBinding::Function(Arc::clone(&self.private));
    }

    pub fn params(&self) -> SpongeParams {
        self.params
    }

    pub fn public_kind(&self) -> Option<PublicKind> {
        match self.public {
            PublicBinding::Unbound => None,
            PublicBinding::Permutation(_) => Some(PublicKind::Permutation),
            PublicBinding::Function(_) => Some(PublicKind::Function),
        }
    }

    pub fn priv_eval(&self, x: u32) -> u32 {
        self.private_queries.fetch_add(1, Ordering::Relaxed);
        self.private.eval(x)
    }

    pub fn pub_eval(&self, direction: Direction, w: u32) -> Result<u32> {
        match &self.public {
            PublicBinding::Permutation(p) => {
                self.public_queries.fetch_add(1, Ordering::Relaxed);
                Ok(p.apply(direction, w))
            }
            PublicBinding::Function(_) => {
                Err(Error::Configuration("public interface is a function; use pub_call".into()))
            }
            PublicBinding::Unbound => {
                Err(Error::Configuration("public interface is unbound (attach a simulator first)".into()))
            }
        }
    }

    pub fn pub_call(&self, x: u32) -> Result<u32> {
        match &self.public {
            PublicBinding::Function(f) => {
                self.public_queries.fetch_add(1, Ordering::Relaxed);
                Ok(f.eval(x))
            }
            PublicBinding::Permutation(_) => {
                Err(Error::Configuration("public interface is a permutation; use pub_eval".into()))
            }
            PublicBinding::Unbound => {
                Err(Error::Configuration("public interface is unbound (attach a simulator first)".into()))
            }
        }
    }

    pub fn counts(&self) -> QueryCounts {
        QueryCounts {
            private: self.private_queries.load(Ordering::Relaxed),
            public: self.public_queries.load(Ordering::Relaxed),
        }
    }

    /// Uncounted handle on the private oracle, for unbounded offline parties.
    pub fn private_oracle(&self) -> Arc<dyn FunctionOracle> {
        Arc::clone(&self.private)
    }

    /// Uncounted handle on the public permutation, if bound.
    pub fn public_permutation(&self) -> Option<Arc<dyn PermutationOracle>> {
        match &self.public {
            PublicBinding::Permutation(p) => Some(Arc::clone(p)),
            _ => None,
        }
    }

    /// Uncounted handle on the public function, if bound.
    pub fn public_function(&self) -> Option<Arc<dyn FunctionOracle>> {
        match &self.public {
            PublicBinding::Function(f) => Some(Arc::clone(f)),
            _ => None,
        }
    }

    /// Full private truth table (offline read access).
    pub fn private_table(&self) -> FunctionTable {
        function_truth_table(&*self.private, &self.params)
    }

    /// Full public permutation table (offline read access).
    pub fn public_table(&self) -> Result<PermutationTable> {
        match &self.public {
            PublicBinding::Permutation(p) => permutation_truth_table(&**p),
            _ => Err(Error::Configuration("public interface is not a permutation".into())),
        }
    }

    /// A second interface over the same oracles with fresh counters.
    pub fn fork(&self) -> Interface {
        Interface {
            params: self.params,
            private: Arc::clone(&self.private),
            public: self.public.clone(),
            private_queries: AtomicU64::new(0),
            public_queries: AtomicU64::new(0),
        }
    }
}

impl PublicAccess for Interface {
    fn params(&self) -> SpongeParams {
        self.params
    }

    fn public_kind(&self) -> Option<PublicKind> {
        Interface::public_kind(self)
    }

    fn permutation(&self, direction: Direction, w: u32) -> Result<u32> {
        self.pub_eval(direction, w)
    }

    fn function(&self, x: u32) -> Result<u32> {
        self.pub_call(x)
    }
}

/// How the real world stores `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backing {
    /// Dense seeded table.
    Dense,
    /// Sampled on demand.
    Lazy,
    /// Dense up to 16 bits, lazy above.
    Auto,
}

const AUTO_DENSE_MAX_BITS: u32 = 16;

/// Real world: uniform `φ`, `priv = Sp^φ`, `pub = (φ, φ⁻¹)`.
pub fn real_world(params: SpongeParams, seed: &Seed) -> Result<Interface> {
    real_world_with(params, seed, Backing::Dense)
}

pub fn real_world_with(params: SpongeParams, seed: &Seed, backing: Backing) -> Result<Interface> {
    let seed = seed.derive("phi");
    let dense = match backing {
        Backing::Dense => true,
        Backing::Lazy => false,
        Backing::Auto => params.n() <= AUTO_DENSE_MAX_BITS,
    };
    let phi: Arc<dyn PermutationOracle> = if dense {
        Arc::new(sample_permutation(params.n(), &seed)?)
    } else {
        Arc::new(LazyPermutation::new(params.n(), &seed)?)
    };
    sponge_world(params, phi)
}

/// An interface with `priv = Sp^φ` and `pub = (φ, φ⁻¹)` for a given `φ`.
pub fn sponge_world(params: SpongeParams, phi: Arc<dyn PermutationOracle>) -> Result<Interface> {
    let private = Arc::new(SpongePrivate { params, phi: Arc::clone(&phi) });
    Interface::new(params, private).with_public_permutation(phi)
}

/// Random-oracle world: `priv = f` for a sampled `f`; the public side stays
/// unbound until a simulator is attached.
pub fn random_oracle_world(params: SpongeParams, seed: &Seed) -> Interface {
    let f = sample_function(params, &seed.derive("f"));
    Interface::new(params, Arc::new(f))
}

/// The function-inversion model: `priv R = pub R = f`.
pub fn random_function_model(params: SpongeParams, seed: &Seed) -> Interface {
    let mut iface = random_oracle_world(params, seed);
    iface.bind_private_as_public();
    iface
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: u32, c: u32) -> SpongeParams {
        SpongeParams::new(r, c).unwrap()
    }

    #[test]
    fn identity_sponge_is_identity() {
        let params = p(2, 3);
        let id = PermutationTable::identity(5);
        for x in 0..4 {
            let w = Word::new(x, 2).unwrap();
            assert_eq!(sponge_eval(&id, w, &params).unwrap(), w);
        }
    }

    #[test]
    fn hand_evaluated_sponge() {
        // 00→10, 01→00, 10→01, 11→11
        let params = p(1, 1);
        let phi = PermutationTable::from_forward(2, vec![0b10, 0b00, 0b01, 0b11]).unwrap();
        let eval = |x| sponge_eval(&phi, Word::new(x, 1).unwrap(), &params).unwrap().value();
        assert_eq!(eval(0), 1);
        assert_eq!(eval(1), 0);
    }

    #[test]
    fn sponge_eval_checks_widths() {
        let params = p(1, 1);
        let id = PermutationTable::identity(2);
        assert!(sponge_eval(&id, Word::new(0, 2).unwrap(), &params).is_err());
        assert!(sponge_eval(&PermutationTable::identity(3), Word::new(0, 1).unwrap(), &params).is_err());
    }

    #[test]
    fn truth_table_matches_restriction_exhaustively() {
        for n in 2..=12u32 {
            for r in 1..=n / 2 {
                let params = p(r, n - r);
                let phi = sample_permutation(n, &Seed::from_u64(n as u64 * 31 + r as u64)).unwrap();
                let t = sponge_truth_table(&phi, &params);
                for x in 0..params.rate_size() as u32 {
                    assert_eq!(t.get(x), phi.forward(x << params.c()) >> params.c());
                }
            }
        }
    }

    #[test]
    fn real_world_consistency_and_accounting() {
        let params = p(2, 3);
        let iface = real_world(params, &Seed::from_u64(4)).unwrap();
        for x in 0..4 {
            let via_pub = iface.pub_eval(Direction::Forward, x << 3).unwrap() >> 3;
            assert_eq!(iface.priv_eval(x), via_pub);
        }
        for w in 0..32 {
            let y = iface.pub_eval(Direction::Forward, w).unwrap();
            assert_eq!(iface.pub_eval(Direction::Inverse, y).unwrap(), w);
        }
        let before = iface.counts();
        iface.priv_eval(1);
        assert_eq!(iface.counts() - before, QueryCounts { private: 1, public: 0 });
    }

    #[test]
    fn scripted_accounting_is_exact() {
        let params = p(1, 2);
        let iface = real_world(params, &Seed::from_u64(8)).unwrap();
        for i in 0..7 {
            iface.priv_eval(i % 2);
        }
        for i in 0..5 {
            iface.pub_eval(Direction::Inverse, i).unwrap();
        }
        assert_eq!(iface.counts(), QueryCounts { private: 7, public: 5 });
    }

    #[test]
    fn random_oracle_world_behaviour() {
        let params = p(2, 2);
        let a = random_oracle_world(params, &Seed::from_u64(10));
        let b = random_oracle_world(params, &Seed::from_u64(10));
        assert_eq!(a.priv_eval(3), a.priv_eval(3));
        assert_eq!(a.private_table(), b.private_table());
        assert_eq!(a.private_table().entries().len(), 4);
        assert!(a.private_table().entries().iter().all(|&v| v < 4));
        assert!(matches!(a.pub_eval(Direction::Forward, 0), Err(Error::Configuration(_))));
        assert!(matches!(a.pub_call(0), Err(Error::Configuration(_))));
    }

    #[test]
    fn function_model_exposes_f_publicly() {
        let params = p(2, 2);
        let iface = random_function_model(params, &Seed::from_u64(2));
        for x in 0..4 {
            assert_eq!(iface.pub_call(x).unwrap(), iface.priv_eval(x));
            assert_eq!(iface.target(x).unwrap(), iface.priv_eval(x));
        }
        assert!(iface.pub_eval(Direction::Forward, 0).is_err());
    }

    #[test]
    fn lazy_permutation_is_a_consistent_bijection() {
        let lazy = LazyPermutation::new(4, &Seed::from_u64(1)).unwrap();
        let image: Vec<u32> = (0..16).map(|w| lazy.apply(Direction::Forward, w)).collect();
        let mut sorted = image.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        for w in 0..16 {
            assert_eq!(lazy.apply(Direction::Inverse, image[w as usize]), w);
        }
        let wide = LazyPermutation::new(22, &Seed::from_u64(2)).unwrap();
        let y = wide.apply(Direction::Inverse, 12345);
        assert_eq!(wide.apply(Direction::Forward, y), 12345);
        assert_eq!(wide.defined_points(), 1);
    }

    #[test]
    fn lazy_real_world_keeps_sponge_consistent() {
        let params = p(10, 12);
        let iface = real_world_with(params, &Seed::from_u64(3), Backing::Lazy).unwrap();
        for x in [0u32, 5, 1023] {
            let a = iface.priv_eval(x);
            assert_eq!(iface.target(x).unwrap(), a);
        }
    }
}
