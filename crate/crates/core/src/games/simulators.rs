//! Simulator pairs `(S₀, S₁)`: lifting a stateless simulator, removing its
//! shared randomness, and the pass-through simulator.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Advice, LatchedPublic};
use crate::bitdomain::{sample_function, Seed, SpongeParams};
use crate::sponge::{Direction, FunctionOracle, Interface, PermutationOracle, PublicAccess, PublicKind};
use crate::symsim::{SharedRandomness, SimInstance, SimOracle};
use crate::{Error, Result};

/// A stateless simulator `Sim^f(·; SR)`.
pub trait ResetSimulator: Send + Sync {
    fn name(&self) -> String;

    /// `f`-queries per simulator call.
    fn queries_per_call(&self) -> u64;

    fn instantiate<'a>(
        &self,
        params: SpongeParams,
        f: Arc<dyn FunctionOracle + 'a>,
        sr: &SharedRandomness,
    ) -> Result<Box<dyn SimInstance + 'a>>;
}

/// The symmetrizing sponge simulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpongeSimulator;

impl ResetSimulator for SpongeSimulator {
    fn name(&self) -> String {
        "sponge-symmetrizer".into()
    }

    fn queries_per_call(&self) -> u64 {
        1
    }

    fn instantiate<'a>(
        &self,
        params: SpongeParams,
        f: Arc<dyn FunctionOracle + 'a>,
        sr: &SharedRandomness,
    ) -> Result<Box<dyn SimInstance + 'a>> {
        Ok(Box::new(SimOracle::new(params, f, sr.clone())?))
    }
}

impl SimInstance for Arc<LatchedPublic<'_>> {}

/// Online simulator `S₁` bound to the ideal object's public interface.
/// Errors raised by that interface (budget, binding) surface on the call
/// that triggered them.
pub struct OnlineSimulator<'a> {
    params: SpongeParams,
    oracle: Box<dyn SimInstance + 'a>,
    link: Arc<LatchedPublic<'a>>,
}

impl<'a> OnlineSimulator<'a> {
    /// Queries made to the ideal object's public interface.
    pub fn r_queries(&self) -> u64 {
        self.link.queries()
    }

    pub fn block_evaluations(&self) -> u64 {
        self.oracle.block_evaluations()
    }
}

impl PublicAccess for OnlineSimulator<'_> {
    fn params(&self) -> SpongeParams {
        self.params
    }

    fn public_kind(&self) -> Option<PublicKind> {
        Some(PublicKind::Permutation)
    }

    fn permutation(&self, direction: Direction, w: u32) -> Result<u32> {
        if w >> self.params.n() != 0 {
            return Err(Error::Parameter(format!("query {w} outside the {}-bit domain", self.params.n())));
        }
        let v = self.oracle.apply(direction, w);
        self.link.check()?;
        Ok(v)
    }

    fn function(&self, _x: u32) -> Result<u32> {
        Err(Error::Configuration("simulated public interface is a permutation".into()))
    }
}

/// A pre-computation simulator pair `(S₀, S₁)`.
pub trait SimulatorPair: Send + Sync {
    fn name(&self) -> String;

    /// `S_sim`.
    fn advice_bits(&self) -> u64;

    /// Queries to the ideal object per simulated query; `T_sim = T ×` this.
    fn queries_per_call(&self) -> u64;

    fn uses_shared_randomness(&self) -> bool;

    /// `S₀`: the public interface offered to the offline distinguisher, and
    /// the advice for `S₁`.
    fn offline(
        &self,
        r: &Interface,
        sr: Option<&SharedRandomness>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Arc<dyn PermutationOracle>, Advice)>;

    /// `S₁` over the ideal object's (counted) public interface.
    fn online<'a>(
        &self,
        r_pub: &'a dyn PublicAccess,
        sr: Option<&SharedRandomness>,
        advice: &Advice,
    ) -> Result<OnlineSimulator<'a>>;
}

fn require_sr(sr: Option<&SharedRandomness>) -> Result<&SharedRandomness> {
    sr.ok_or_else(|| Error::Configuration("this simulator needs shared randomness".into()))
}

fn r_function(r: &Interface) -> Result<Arc<dyn FunctionOracle>> {
    r.public_function().ok_or_else(|| Error::Configuration("ideal object has no public function".into()))
}

fn bind_online<'a, S: ResetSimulator + ?Sized>(
    base: &S,
    r_pub: &'a dyn PublicAccess,
    sr: &SharedRandomness,
) -> Result<OnlineSimulator<'a>> {
    let params = r_pub.params();
    let link = Arc::new(LatchedPublic::new(r_pub));
    let oracle = base.instantiate(params, Arc::clone(&link) as Arc<dyn FunctionOracle + 'a>, sr)?;
    Ok(OnlineSimulator { params, oracle, link })
}

/// `S₀ = S₁ = Sim` with no simulator advice.
#[derive(Clone)]
pub struct LiftedSimulator {
    base: Arc<dyn ResetSimulator>,
}

impl LiftedSimulator {
    pub fn base(&self) -> &Arc<dyn ResetSimulator> {
        &self.base
    }
}

const REPLAY_POINTS: u32 = 64;

/// Wraps a stateless simulator as a pre-computation pair with `S_sim = 0`
/// after a replay test: answers must not depend on query history or on the
/// instance.
pub fn lift_reset_to_precomp(sim: Arc<dyn ResetSimulator>, params: SpongeParams) -> Result<LiftedSimulator> {
    let seed = Seed::from_u64(0x5eed).derive("replay");
    let f: Arc<dyn FunctionOracle> = Arc::new(sample_function(params, &seed.derive("f")));
    let sr = SharedRandomness::new(seed.derive("sr"));
    let mut rng = seed.derive("points").rng();
    let domain = 1u64 << params.n();
    let script: Vec<(Direction, u32)> = (0..REPLAY_POINTS)
        .map(|i| {
            let dir = if i % 3 == 2 { Direction::Inverse } else { Direction::Forward };
            (dir, rng.random_range(0..domain) as u32)
        })
        .collect();

    let first = sim.instantiate(params, Arc::clone(&f), &sr)?;
    let answers: Vec<u32> = script.iter().map(|&(d, w)| first.apply(d, w)).collect();
    // interleave unrelated traffic and replay in reverse order
    for (i, &(d, w)) in script.iter().enumerate().rev() {
        first.apply(Direction::Inverse, rng.random_range(0..domain) as u32);
        if first.apply(d, w) != answers[i] {
            return Err(Error::Contract(format!("{} answered {w} differently on replay", sim.name())));
        }
    }
    let second = sim.instantiate(params, f, &sr)?;
    for (i, &(d, w)) in script.iter().enumerate() {
        if second.apply(d, w) != answers[i] {
            return Err(Error::Contract(format!(
                "{} answered {w} differently in a fresh instance",
                sim.name()
            )));
        }
    }
    Ok(LiftedSimulator { base: sim })
}

impl SimulatorPair for LiftedSimulator {
    fn name(&self) -> String {
        format!("lifted({})", self.base.name())
    }

    fn advice_bits(&self) -> u64 {
        0
    }

    fn queries_per_call(&self) -> u64 {
        self.base.queries_per_call()
    }

    fn uses_shared_randomness(&self) -> bool {
        true
    }

    fn offline(
        &self,
        r: &Interface,
        sr: Option<&SharedRandomness>,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(Arc<dyn PermutationOracle>, Advice)> {
        let inst = self.base.instantiate(r.params(), r_function(r)?, require_sr(sr)?)?;
        Ok((Arc::from(inst as Box<dyn PermutationOracle>), Advice::new()))
    }

    fn online<'a>(
        &self,
        r_pub: &'a dyn PublicAccess,
        sr: Option<&SharedRandomness>,
        _advice: &Advice,
    ) -> Result<OnlineSimulator<'a>> {
        bind_online(&*self.base, r_pub, require_sr(sr)?)
    }
}

/// Pass-through simulator for the degenerate composition `R = C`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentitySimulator;

impl SimulatorPair for IdentitySimulator {
    fn name(&self) -> String {
        "identity".into()
    }

    fn advice_bits(&self) -> u64 {
        0
    }

    fn queries_per_call(&self) -> u64 {
        1
    }

    fn uses_shared_randomness(&self) -> bool {
        false
    }

    fn offline(
        &self,
        r: &Interface,
        _sr: Option<&SharedRandomness>,
        _rng: &mut ChaCha8Rng,
    ) -> Result<(Arc<dyn PermutationOracle>, Advice)> {
        let p = r
            .public_permutation()
            .ok_or_else(|| Error::Configuration("identity simulator needs a permutation".into()))?;
        Ok((p, Advice::new()))
    }

    fn online<'a>(
        &self,
        r_pub: &'a dyn PublicAccess,
        _sr: Option<&SharedRandomness>,
        _advice: &Advice,
    ) -> Result<OnlineSimulator<'a>> {
        let link = Arc::new(LatchedPublic::new(r_pub));
        Ok(OnlineSimulator { params: r_pub.params(), oracle: Box::new(Arc::clone(&link)), link })
    }
}

/// How the shared-randomness space is explored.
#[derive(Clone, Debug)]
pub enum SrSpace {
    /// All `2^16` members of the restricted space, exhaustively.
    Enumerable16,
    /// `count` seeds derived from `seed`, treated as the SR law.
    Sampled { count: u64, seed: Seed },
}

impl SrSpace {
    pub fn size(&self) -> u64 {
        match self {
            SrSpace::Enumerable16 => 1 << 16,
            SrSpace::Sampled { count, .. } => *count,
        }
    }

    pub fn member(&self, index: u64) -> SharedRandomness {
        match self {
            SrSpace::Enumerable16 => SharedRandomness::from_u16(index as u16),
            SrSpace::Sampled { seed, .. } => SharedRandomness::new(seed.derive_index("sr", index)),
        }
    }
}

/// `p(SR) = Pr[D outputs 1 | SR]`, exactly or as an estimate.
#[derive(Clone, Debug)]
pub enum Acceptance {
    Exact(BigRational),
    Estimated { p: f64, radius: f64 },
}

impl Acceptance {
    fn value(&self) -> f64 {
        match self {
            Acceptance::Exact(v) => v.to_f64().unwrap_or(f64::NAN),
            Acceptance::Estimated { p, .. } => *p,
        }
    }
}

/// The hard-coded randomness of the constructed simulator.
#[derive(Clone, Debug)]
pub enum SrCase {
    /// Some `SR*` has `p(SR*) = p`.
    Single { sr: SharedRandomness, index: u64 },
    /// `p(SR₀) < p < p(SR₁)`; `s = 1` with probability `bias`.
    Pair {
        sr0: SharedRandomness,
        sr1: SharedRandomness,
        index0: u64,
        index1: u64,
        bias: f64,
        bias_exact: Option<BigRational>,
    },
}

/// Result of [`remove_shared_randomness`].
#[derive(Clone)]
pub struct SrRemoval {
    pub case: SrCase,
    /// SR-averaged acceptance `p`.
    pub p: f64,
    pub p_exact: Option<BigRational>,
    pub p0: f64,
    pub p1: f64,
    /// `(1 − bias)·p₀ + bias·p₁` (equals `p(SR*)` in the single case).
    pub reconstructed: f64,
    pub reconstructed_exact: Option<BigRational>,
    /// Radius of the estimates (zero when exact).
    pub estimation_radius: f64,
    pub sim_advice_bits: u64,
    pub candidates_examined: u64,
    pub space_size: u64,
    base: Arc<dyn ResetSimulator>,
}

#[derive(Serialize)]
struct SrRemovalView<'a> {
    case: &'static str,
    sr_indices: Vec<u64>,
    p: f64,
    p_exact: Option<String>,
    p0: f64,
    p1: f64,
    bias: Option<f64>,
    bias_exact: Option<String>,
    reconstructed: f64,
    reconstructed_exact: Option<String>,
    estimation_radius: f64,
    sim_advice_bits: u64,
    candidates_examined: u64,
    space_size: u64,
    simulator: &'a str,
}

fn rational_text(v: &BigRational) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

impl Serialize for SrRemoval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let name = self.base.name();
        let (case, sr_indices, bias, bias_exact) = match &self.case {
            SrCase::Single { index, .. } => ("single", vec![*index], None, None),
            SrCase::Pair { index0, index1, bias, bias_exact, .. } => {
                ("pair", vec![*index0, *index1], Some(*bias), bias_exact.as_ref().map(rational_text))
            }
        };
        SrRemovalView {
            case,
            sr_indices,
            p: self.p,
            p_exact: self.p_exact.as_ref().map(rational_text),
            p0: self.p0,
            p1: self.p1,
            bias,
            bias_exact,
            reconstructed: self.reconstructed,
            reconstructed_exact: self.reconstructed_exact.as_ref().map(rational_text),
            estimation_radius: self.estimation_radius,
            sim_advice_bits: self.sim_advice_bits,
            candidates_examined: self.candidates_examined,
            space_size: self.space_size,
            simulator: &name,
        }
        .serialize(s)
    }
}

impl SrRemoval {
    pub fn simulator(&self) -> HardcodedSrSimulator {
        HardcodedSrSimulator { base: Arc::clone(&self.base), case: self.case.clone() }
    }
}

/// Builds a simulator without shared randomness from one that has it,
/// for a fixed distinguisher whose per-SR acceptance is given by
/// `acceptance`. The average `p` is taken over the whole space; only the
/// first `search_budget` members are considered as hard-coded candidates.
pub fn remove_shared_randomness<F>(
    base: Arc<dyn ResetSimulator>,
    space: SrSpace,
    search_budget: u64,
    acceptance: F,
) -> Result<SrRemoval>
where
    F: Fn(&SharedRandomness) -> Result<Acceptance> + Sync,
{
    let size = space.size();
    if size == 0 {
        return Err(Error::Parameter("empty shared-randomness space".into()));
    }
    let values: Vec<Acceptance> =
        (0..size).into_par_iter().map(|i| acceptance(&space.member(i))).collect::<Result<_>>()?;

    let all_exact = values.iter().all(|v| matches!(v, Acceptance::Exact(_)));
    let p_exact = all_exact.then(|| {
        let sum: BigRational = values
            .iter()
            .map(|v| match v {
                Acceptance::Exact(r) => r.clone(),
                Acceptance::Estimated { .. } => unreachable!(),
            })
            .sum();
        sum / BigRational::from_integer(BigInt::from(size))
    });
    let p = match &p_exact {
        Some(e) => e.to_f64().unwrap_or(f64::NAN),
        None => values.iter().map(Acceptance::value).sum::<f64>() / size as f64,
    };
    let radius_of = |v: &Acceptance| match v {
        Acceptance::Exact(_) => 0.0,
        Acceptance::Estimated { radius, .. } => *radius,
    };
    let estimation_radius = values.iter().map(radius_of).fold(0.0, f64::max);

    let equals_p = |v: &Acceptance| match (v, &p_exact) {
        (Acceptance::Exact(r), Some(e)) => r == e,
        _ => (v.value() - p).abs() <= radius_of(v),
    };

    let budget = search_budget.min(size);
    let mut below: Option<u64> = None;
    let mut above: Option<u64> = None;
    for i in 0..budget {
        let v = &values[i as usize];
        if equals_p(v) {
            let pi = v.value();
            return Ok(SrRemoval {
                case: SrCase::Single { sr: space.member(i), index: i },
                p,
                reconstructed_exact: match v {
                    Acceptance::Exact(r) => Some(r.clone()),
                    _ => None,
                },
                p_exact,
                p0: pi,
                p1: pi,
                reconstructed: pi,
                estimation_radius,
                sim_advice_bits: 0,
                candidates_examined: i + 1,
                space_size: size,
                base,
            });
        }
        let is_below = match (v, &p_exact) {
            (Acceptance::Exact(r), Some(e)) => r < e,
            _ => v.value() < p,
        };
        if is_below {
            below.get_or_insert(i);
        } else {
            above.get_or_insert(i);
        }
        if let (Some(i0), Some(i1)) = (below, above) {
            let (v0, v1) = (&values[i0 as usize], &values[i1 as usize]);
            let (p0, p1) = (v0.value(), v1.value());
            let bias = (p - p0) / (p1 - p0);
            let (bias_exact, reconstructed_exact) = match (v0, v1, &p_exact) {
                (Acceptance::Exact(a), Acceptance::Exact(b), Some(e)) => {
                    let bias = (e - a) / (b - a);
                    let one = BigRational::from_integer(1.into());
                    let rec = (&one - &bias) * a + &bias * b;
                    (Some(bias), Some(rec))
                }
                _ => (None, None),
            };
            return Ok(SrRemoval {
                case: SrCase::Pair {
                    sr0: space.member(i0),
                    sr1: space.member(i1),
                    index0: i0,
                    index1: i1,
                    bias,
                    bias_exact,
                },
                p,
                p_exact,
                p0,
                p1,
                reconstructed: (1.0 - bias) * p0 + bias * p1,
                reconstructed_exact,
                estimation_radius,
                sim_advice_bits: 1,
                candidates_examined: i + 1,
                space_size: size,
                base,
            });
        }
    }
    Err(Error::SearchFailure(format!(
        "no shared randomness matching or bracketing p = {p:.6} among the first {budget} of {size} candidates"
    )))
}

/// A simulator with its shared randomness hard-coded: one fixed `SR*`, or
/// a biased choice between `SR₀` and `SR₁` made offline and passed to the
/// online stage as a single advice bit.
#[derive(Clone)]
pub struct HardcodedSrSimulator {
    base: Arc<dyn ResetSimulator>,
    case: SrCase,
}

impl HardcodedSrSimulator {
    pub fn case(&self) -> &SrCase {
        &self.case
    }

    /// `(probability, SR)` of each branch, exact when known.
    pub fn branches(&self) -> Vec<(BigRational, SharedRandomness)> {
        let one = BigRational::from_integer(1.into());
        match &self.case {
            SrCase::Single { sr, .. } => vec![(one, sr.clone())],
            SrCase::Pair { sr0, sr1, bias, bias_exact, .. } => {
                let b = bias_exact
                    .clone()
                    .or_else(|| BigRational::from_float(*bias))
                    .unwrap_or_else(BigRational::zero);
                vec![(&one - &b, sr0.clone()), (b, sr1.clone())]
            }
        }
    }

    pub fn base(&self) -> &Arc<dyn ResetSimulator> {
        &self.base
    }

    fn choose(&self, s: bool) -> &SharedRandomness {
        match &self.case {
            SrCase::Single { sr, .. } => sr,
            SrCase::Pair { sr0, sr1, .. } => {
                if s {
                    sr1
                } else {
                    sr0
                }
            }
        }
    }
}

impl SimulatorPair for HardcodedSrSimulator {
    fn name(&self) -> String {
        match self.case {
            SrCase::Single { .. } => format!("hardcoded-sr({})", self.base.name()),
            SrCase::Pair { .. } => format!("hardcoded-sr-pair({})", self.base.name()),
        }
    }

    fn advice_bits(&self) -> u64 {
        match self.case {
            SrCase::Single { .. } => 0,
            SrCase::Pair { .. } => 1,
        }
    }

    fn queries_per_call(&self) -> u64 {
        self.base.queries_per_call()
    }

    fn uses_shared_randomness(&self) -> bool {
        false
    }

    fn offline(
        &self,
        r: &Interface,
        _sr: Option<&SharedRandomness>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Arc<dyn PermutationOracle>, Advice)> {
        let mut advice = Advice::new();
        let s = match self.case {
            SrCase::Single { .. } => false,
            SrCase::Pair { bias, .. } => {
                let s = rng.random_bool(bias.clamp(0.0, 1.0));
                advice.push_bit(s);
                s
            }
        };
        let inst = self.base.instantiate(r.params(), r_function(r)?, self.choose(s))?;
        Ok((Arc::from(inst as Box<dyn PermutationOracle>), advice))
    }

    fn online<'a>(
        &self,
        r_pub: &'a dyn PublicAccess,
        _sr: Option<&SharedRandomness>,
        advice: &Advice,
    ) -> Result<OnlineSimulator<'a>> {
        let s = match self.case {
            SrCase::Single { .. } => false,
            SrCase::Pair { .. } => advice.bit(0)?,
        };
        bind_online(&*self.base, r_pub, self.choose(s))
    }
}
