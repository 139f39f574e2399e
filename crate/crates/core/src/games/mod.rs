//! Indifferentiability with pre-computation, simulator transforms, and the
//! offline/online security-game framework.
//!
//! Every party is split into an unbounded offline stage, which sees an
//! [`Interface`] with full table access, and a query-bounded online stage,
//! which sees budgeted access and the advice the offline stage produced.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::bitdomain::SpongeParams;
use crate::sponge::{Direction, FunctionOracle, PermutationOracle, PublicAccess, PublicKind};
use crate::{Error, Result};

mod indiff;
mod security;
mod simulators;

pub use indiff::{
    estimate_ideal_acceptance, exact_ideal_acceptance, exact_real_acceptance, run_indiff_experiment,
    ConstantDistinguisher, IndiffReport, InverseConsistency, ReaderRule, ScriptedDistinguisher,
    TruthTableReader,
};
pub use security::{
    compose_adversary, run_security_game, Adversary, ComposedAdversary, Cryptosystem, Environment,
    GameDistinguisher, InversionGame, Message, Model, OutputBit, SecurityGame, Session,
};
pub use simulators::{
    lift_reset_to_precomp, remove_shared_randomness, Acceptance, HardcodedSrSimulator, IdentitySimulator,
    LiftedSimulator, OnlineSimulator, ResetSimulator, SimulatorPair, SpongeSimulator, SrCase, SrRemoval,
    SrSpace,
};

/// Declared resources `(S, T, S_sim, T_sim, ε)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ResourceBudget {
    /// Distinguisher / adversary advice bits.
    pub s: u64,
    /// Online query bound.
    pub t: u64,
    /// Simulator advice bits.
    pub s_sim: u64,
    /// Simulator query bound.
    pub t_sim: u64,
    pub epsilon: f64,
}

/// Advice string passed from an offline stage to its online stage.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Advice {
    words: Vec<u64>,
    len: u64,
}

impl Advice {
    pub fn new() -> Self {
        Advice::default()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        let (word, offset) = ((self.len / 64) as usize, self.len % 64);
        if word == self.words.len() {
            self.words.push(0);
        }
        self.words[word] |= (bit as u64) << offset;
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        for i in 0..width {
            self.push_bit(value >> i & 1 == 1);
        }
    }

    pub fn bit(&self, index: u64) -> Result<bool> {
        if index >= self.len {
            return Err(Error::Protocol(format!("advice read at bit {index} of {}", self.len)));
        }
        Ok(self.words[(index / 64) as usize] >> (index % 64) & 1 == 1)
    }

    pub fn read_bits(&self, offset: u64, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for i in 0..width {
            v |= (self.bit(offset + i as u64)? as u64) << i;
        }
        Ok(v)
    }

    /// `self ‖ other`.
    pub fn concat(&self, other: &Advice) -> Advice {
        let mut out = self.clone();
        for i in 0..other.len {
            out.push_bit(other.bit(i).expect("in range"));
        }
        out
    }

    /// Splits into the first `at` bits and the rest.
    pub fn split_at(&self, at: u64) -> Result<(Advice, Advice)> {
        if at > self.len {
            return Err(Error::Protocol(format!("advice split at {at} of {}", self.len)));
        }
        let mut head = Advice::new();
        let mut tail = Advice::new();
        for i in 0..self.len {
            let b = self.bit(i)?;
            if i < at {
                head.push_bit(b);
            } else {
                tail.push_bit(b);
            }
        }
        Ok((head, tail))
    }

    pub(crate) fn check_limit(&self, limit: u64) -> Result<()> {
        if self.len > limit {
            return Err(Error::AdviceExceeded { used: self.len, limit });
        }
        Ok(())
    }
}

/// Query-budgeted access for an online stage: private oracle plus a public
/// side. Private and public queries share one budget; the first query past
/// it fails with [`Error::BudgetExceeded`].
pub struct OnlineAccess<'a> {
    params: SpongeParams,
    private: Option<&'a dyn FunctionOracle>,
    public: &'a dyn PublicAccess,
    role: &'static str,
    limit: u64,
    private_used: AtomicU64,
    public_used: AtomicU64,
}

impl<'a> OnlineAccess<'a> {
    pub fn new(
        params: SpongeParams,
        private: Option<&'a dyn FunctionOracle>,
        public: &'a dyn PublicAccess,
        role: &'static str,
        limit: u64,
    ) -> Self {
        OnlineAccess {
            params,
            private,
            public,
            role,
            limit,
            private_used: AtomicU64::new(0),
            public_used: AtomicU64::new(0),
        }
    }

    fn charge(&self, counter: &AtomicU64) -> Result<()> {
        counter.fetch_add(1, Ordering::Relaxed);
        if self.used() > self.limit {
            return Err(Error::BudgetExceeded { role: self.role, limit: self.limit });
        }
        Ok(())
    }

    pub fn priv_eval(&self, x: u32) -> Result<u32> {
        let f =
            self.private.ok_or_else(|| Error::Configuration("no private interface in this stage".into()))?;
        self.charge(&self.private_used)?;
        Ok(f.eval(x))
    }

    pub fn used(&self) -> u64 {
        self.private_used.load(Ordering::Relaxed) + self.public_used.load(Ordering::Relaxed)
    }

    pub fn private_used(&self) -> u64 {
        self.private_used.load(Ordering::Relaxed)
    }

    pub fn public_used(&self) -> u64 {
        self.public_used.load(Ordering::Relaxed)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

impl PublicAccess for OnlineAccess<'_> {
    fn params(&self) -> SpongeParams {
        self.params
    }

    fn public_kind(&self) -> Option<PublicKind> {
        self.public.public_kind()
    }

    fn permutation(&self, direction: Direction, w: u32) -> Result<u32> {
        self.charge(&self.public_used)?;
        self.public.permutation(direction, w)
    }

    fn function(&self, x: u32) -> Result<u32> {
        self.charge(&self.public_used)?;
        self.public.function(x)
    }
}

/// Infallible oracle view of a fallible public access. The first error is
/// latched and later reported through [`LatchedPublic::check`]; answers after
/// an error are meaningless.
pub(crate) struct LatchedPublic<'a> {
    access: &'a dyn PublicAccess,
    error: Mutex<Option<Error>>,
    queries: AtomicU64,
}

impl<'a> LatchedPublic<'a> {
    pub(crate) fn new(access: &'a dyn PublicAccess) -> Self {
        LatchedPublic { access, error: Mutex::new(None), queries: AtomicU64::new(0) }
    }

    fn latch<T: Default>(&self, r: Result<T>) -> T {
        self.queries.fetch_add(1, Ordering::Relaxed);
        r.unwrap_or_else(|e| {
            let mut slot = self.error.lock().expect("latch lock");
            slot.get_or_insert(e);
            T::default()
        })
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self.error.lock().expect("latch lock").take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub(crate) fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

impl FunctionOracle for LatchedPublic<'_> {
    fn eval(&self, x: u32) -> u32 {
        self.latch(self.access.function(x))
    }
}

impl PermutationOracle for LatchedPublic<'_> {
    fn bits(&self) -> u32 {
        self.access.params().n()
    }

    fn apply(&self, direction: Direction, w: u32) -> u32 {
        self.latch(self.access.permutation(direction, w))
    }
}

/// The two-stage distinguisher `(D₀, D₁)`.
pub trait Distinguisher: Send + Sync {
    fn name(&self) -> String;

    /// Declared advice size `S`.
    fn advice_bits(&self) -> u64;

    /// Declared online query bound `T` (private plus public).
    fn online_queries(&self) -> u64;

    /// Unbounded offline stage.
    fn offline(&self, iface: &crate::sponge::Interface, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Advice>;

    /// Online stage; returns the output bit.
    fn online(
        &self,
        access: &OnlineAccess<'_>,
        advice: &Advice,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<bool>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum World {
    Real,
    Ideal,
    CModel,
    RModel,
}

/// Largest resources actually used in any completed trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MeasuredBudgets {
    pub advice_bits: u64,
    pub online_queries: u64,
    pub sim_advice_bits: u64,
    pub sim_queries: u64,
    pub private_queries: u64,
}

impl MeasuredBudgets {
    pub(crate) fn max(self, other: MeasuredBudgets) -> MeasuredBudgets {
        MeasuredBudgets {
            advice_bits: self.advice_bits.max(other.advice_bits),
            online_queries: self.online_queries.max(other.online_queries),
            sim_advice_bits: self.sim_advice_bits.max(other.sim_advice_bits),
            sim_queries: self.sim_queries.max(other.sim_queries),
            private_queries: self.private_queries.max(other.private_queries),
        }
    }
}

/// Failure probability of each two-sided Hoeffding radius.
pub const REPORT_DELTA: f64 = 1e-6;

/// `3 · sqrt(ln(2/δ) / (2n))` with `δ = 10⁻⁶`.
pub fn hoeffding_radius(trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    3.0 * ((2.0 / REPORT_DELTA).ln() / (2.0 * trials as f64)).sqrt()
}

/// One world's outcome over many trials.
#[derive(Clone, Debug, Serialize)]
pub struct GameReport {
    pub world: World,
    pub label: String,
    pub params: SpongeParams,
    pub trials: u64,
    /// Completed trials that output 1.
    pub successes: u64,
    /// Trials aborted by a budget or protocol violation.
    pub aborted: u64,
    /// `successes / (trials − aborted)`.
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub std_error: f64,
    pub radius: f64,
    pub declared: ResourceBudget,
    pub measured: MeasuredBudgets,
    /// Total `σ`/`ω` point evaluations (simulator work beyond `f`-queries).
    pub sim_block_evaluations: u64,
    /// First abort reason, if any.
    pub abort_reason: Option<String>,
}

impl GameReport {
    pub fn completed(&self) -> u64 {
        self.trials - self.aborted
    }

    /// Measured budgets within the declared ones.
    pub fn within_budget(&self) -> bool {
        let d = &self.declared;
        self.measured.advice_bits <= d.s
            && self.measured.online_queries <= d.t
            && self.measured.sim_advice_bits <= d.s_sim
            && self.measured.sim_queries <= d.t_sim
    }
}

/// Per-trial outcome folded into a [`GameReport`].
#[derive(Clone, Debug, Default)]
pub(crate) struct Tally {
    pub trials: u64,
    pub successes: u64,
    pub aborted: u64,
    pub measured: MeasuredBudgets,
    pub block_evals: u64,
    pub abort_reason: Option<String>,
}

pub(crate) struct TrialOutcome {
    pub bit: bool,
    pub measured: MeasuredBudgets,
    pub block_evals: u64,
}

impl Tally {
    pub fn from_result(r: Result<TrialOutcome>) -> Tally {
        match r {
            Ok(o) => Tally {
                trials: 1,
                successes: o.bit as u64,
                aborted: 0,
                measured: o.measured,
                block_evals: o.block_evals,
                abort_reason: None,
            },
            Err(e) => Tally { trials: 1, aborted: 1, abort_reason: Some(e.to_string()), ..Tally::default() },
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            trials: self.trials + other.trials,
            successes: self.successes + other.successes,
            aborted: self.aborted + other.aborted,
            measured: self.measured.max(other.measured),
            block_evals: self.block_evals + other.block_evals,
            abort_reason: self.abort_reason.or(other.abort_reason),
        }
    }

    pub fn report(
        self,
        world: World,
        label: String,
        params: SpongeParams,
        declared: ResourceBudget,
    ) -> GameReport {
        let done = self.trials - self.aborted;
        let rate = if done == 0 { 0.0 } else { self.successes as f64 / done as f64 };
        let std_error = if done == 0 { f64::INFINITY } else { (rate * (1.0 - rate) / done as f64).sqrt() };
        GameReport {
            world,
            label,
            params,
            trials: self.trials,
            successes: self.successes,
            aborted: self.aborted,
            rate,
            std_error,
            radius: hoeffding_radius(done),
            declared,
            measured: self.measured,
            sim_block_evaluations: self.block_evals,
            abort_reason: self.abort_reason,
        }
    }
}
