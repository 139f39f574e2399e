//! Security games with pre-computation: a cryptosystem talking to an online
//! adversary under a strict alternating schedule, an environment reading
//! the outcome, and the composition of adversaries with simulators.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    Advice, Distinguisher, GameReport, MeasuredBudgets, OnlineAccess, ResourceBudget, SimulatorPair, Tally,
    TrialOutcome, World,
};
use crate::bitdomain::{Seed, SpongeParams};
use crate::sponge::{random_function_model, real_world_with, Backing, Interface, PublicAccess};
use crate::{Error, Result};

/// What a cryptosystem session emits after each step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    ToAdversary(Vec<u32>),
    ToEnvironment(Vec<u32>),
}

/// One run of a cryptosystem. `step` is first called with `None`, then
/// once with each adversary reply.
pub trait Session {
    fn step(
        &mut self,
        private: &dyn Fn(u32) -> Result<u32>,
        incoming: Option<&[u32]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Message>;
}

/// The cryptosystem `P`, making at most `private_queries()` (`T₂`) queries
/// to the private interface per run.
pub trait Cryptosystem: Send + Sync {
    fn name(&self) -> String;

    fn private_queries(&self) -> u64;

    fn start(&self, params: SpongeParams) -> Box<dyn Session>;
}

/// The environment `E`.
pub trait Environment: Send + Sync {
    fn decide(&self, output: &[u32]) -> bool;
}

/// Outputs the first word of `P`'s output, read as a bit.
#[derive(Clone, Copy, Debug, Default)]
pub struct OutputBit;

impl Environment for OutputBit {
    fn decide(&self, output: &[u32]) -> bool {
        output.first().is_some_and(|&v| v != 0)
    }
}

/// The two-stage adversary `(A₀, A₁)`.
pub trait Adversary: Send + Sync {
    fn name(&self) -> String;

    /// `S`.
    fn advice_bits(&self) -> u64;

    /// `T₁`: public queries per online run.
    fn online_queries(&self) -> u64;

    fn offline(&self, iface: &Interface, rng: &mut ChaCha8Rng) -> Result<Advice>;

    /// Answers one cryptosystem message.
    fn online(
        &self,
        public: &dyn PublicAccess,
        advice: &Advice,
        message: &[u32],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<u32>>;
}

#[derive(Clone)]
pub struct SecurityGame {
    pub cryptosystem: Arc<dyn Cryptosystem>,
    pub environment: Arc<dyn Environment>,
    pub adversary: Arc<dyn Adversary>,
}

impl SecurityGame {
    pub fn new(
        cryptosystem: Arc<dyn Cryptosystem>,
        environment: Arc<dyn Environment>,
        adversary: Arc<dyn Adversary>,
    ) -> Self {
        SecurityGame { cryptosystem, environment, adversary }
    }

    pub fn with_adversary(&self, adversary: Arc<dyn Adversary>) -> Self {
        SecurityGame { adversary, ..self.clone() }
    }
}

/// Rounds allowed before a session is declared non-terminating.
const MAX_ROUNDS: usize = 64;

/// Alternates `P` and `A₁` until `P` addresses the environment. Returns
/// `E`'s bit and the number of private queries `P` made.
fn play_rounds(
    game: &SecurityGame,
    params: SpongeParams,
    private: &dyn Fn(u32) -> Result<u32>,
    public: &dyn PublicAccess,
    advice: &Advice,
    rng_p: &mut ChaCha8Rng,
    rng_a: &mut ChaCha8Rng,
) -> Result<(bool, u64)> {
    let limit = game.cryptosystem.private_queries();
    let used = AtomicU64::new(0);
    let counted = |x: u32| {
        if used.fetch_add(1, Ordering::Relaxed) + 1 > limit {
            return Err(Error::BudgetExceeded { role: "cryptosystem", limit });
        }
        private(x)
    };
    let mut session = game.cryptosystem.start(params);
    let mut message = session.step(&counted, None, rng_p)?;
    for _ in 0..MAX_ROUNDS {
        match message {
            Message::ToEnvironment(out) => {
                return Ok((game.environment.decide(&out), used.load(Ordering::Relaxed)))
            }
            Message::ToAdversary(m) => {
                let reply = game.adversary.online(public, advice, &m, rng_a)?;
                message = session.step(&counted, Some(&reply), rng_p)?;
            }
        }
    }
    Err(Error::Protocol(format!(
        "{} did not address the environment within {MAX_ROUNDS} rounds",
        game.cryptosystem.name()
    )))
}

/// How each trial's world is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `priv = Sp^φ`, `pub = (φ, φ⁻¹)`.
    Sponge(Backing),
    /// `priv = pub = f`.
    RandomFunction,
}

impl Model {
    pub fn build(&self, params: SpongeParams, seed: &Seed) -> Result<Interface> {
        match self {
            Model::Sponge(backing) => real_world_with(params, seed, *backing),
            Model::RandomFunction => Ok(random_function_model(params, seed)),
        }
    }

    pub fn world(&self) -> World {
        match self {
            Model::Sponge(_) => World::CModel,
            Model::RandomFunction => World::RModel,
        }
    }
}

fn security_trial(game: &SecurityGame, iface: &Interface, ts: &Seed) -> Result<TrialOutcome> {
    let params = iface.params();
    let adv = &game.adversary;
    let advice = adv.offline(iface, &mut ts.derive("adversary-offline").rng())?;
    advice.check_limit(adv.advice_bits())?;
    let online = iface.fork();
    let public = OnlineAccess::new(params, None, &online, "adversary", adv.online_queries());
    let private = |x: u32| Ok(online.priv_eval(x));
    let (bit, p_queries) = play_rounds(
        game,
        params,
        &private,
        &public,
        &advice,
        &mut ts.derive("cryptosystem").rng(),
        &mut ts.derive("adversary-online").rng(),
    )?;
    Ok(TrialOutcome {
        bit,
        measured: MeasuredBudgets {
            advice_bits: advice.len(),
            online_queries: public.used(),
            private_queries: p_queries,
            ..MeasuredBudgets::default()
        },
        block_evals: 0,
    })
}

/// Runs the game `trials` times; trial `i` derives the world, the
/// cryptosystem's coins and the adversary's coins from
/// `seed.derive_index("trial", i)`, so two models run with one seed see
/// matched challenges.
pub fn run_security_game(
    game: &SecurityGame,
    model: Model,
    params: SpongeParams,
    trials: u64,
    seed: &Seed,
) -> Result<GameReport> {
    let tally = (0..trials)
        .into_par_iter()
        .map(|i| {
            let ts = seed.derive_index("trial", i);
            Tally::from_result(
                model.build(params, &ts.derive("model")).and_then(|iface| security_trial(game, &iface, &ts)),
            )
        })
        .reduce(Tally::default, Tally::merge);
    let declared = ResourceBudget {
        s: game.adversary.advice_bits(),
        t: game.adversary.online_queries(),
        ..ResourceBudget::default()
    };
    Ok(tally.report(model.world(), game.adversary.name(), params, declared))
}

/// The inversion game: `P` samples `x`, sends `y = priv(x)`, receives `x'`
/// and reports whether `priv(x') = y`. `T₂ = 2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct InversionGame;

enum InversionState {
    Start,
    Waiting(u32),
    Done,
}

struct InversionSession {
    params: SpongeParams,
    state: InversionState,
}

impl Session for InversionSession {
    fn step(
        &mut self,
        private: &dyn Fn(u32) -> Result<u32>,
        incoming: Option<&[u32]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Message> {
        match (&self.state, incoming) {
            (InversionState::Start, None) => {
                let x = rng.random_range(0..self.params.rate_size() as u32);
                let y = private(x)?;
                self.state = InversionState::Waiting(y);
                Ok(Message::ToAdversary(vec![y]))
            }
            (InversionState::Waiting(y), Some([x])) if *x < self.params.rate_size() as u32 => {
                let y = *y;
                self.state = InversionState::Done;
                Ok(Message::ToEnvironment(vec![(private(*x)? == y) as u32]))
            }
            (InversionState::Waiting(_), Some(reply)) => {
                Err(Error::Protocol(format!("inversion expects one r-bit word, got {reply:?}")))
            }
            _ => Err(Error::Protocol("inversion session driven out of order".into())),
        }
    }
}

impl Cryptosystem for InversionGame {
    fn name(&self) -> String {
        "inversion".into()
    }

    fn private_queries(&self) -> u64 {
        2
    }

    fn start(&self, params: SpongeParams) -> Box<dyn Session> {
        Box::new(InversionSession { params, state: InversionState::Start })
    }
}

impl InversionGame {
    pub fn game(adversary: Arc<dyn Adversary>) -> SecurityGame {
        SecurityGame::new(Arc::new(InversionGame), Arc::new(OutputBit), adversary)
    }
}

/// `A'` for the `R`-model built from `A` for the `C`-model and a simulator
/// pair without shared randomness. Its advice is `α_S ‖ α_A`, with `α_S`
/// padded to exactly `S_sim` bits.
#[derive(Clone)]
pub struct ComposedAdversary {
    inner: Arc<dyn Adversary>,
    sim: Arc<dyn SimulatorPair>,
}

pub fn compose_adversary(
    adversary: Arc<dyn Adversary>,
    sim: Arc<dyn SimulatorPair>,
) -> Result<ComposedAdversary> {
    if sim.uses_shared_randomness() {
        return Err(Error::Configuration(format!(
            "{} uses shared randomness; remove it before composing",
            sim.name()
        )));
    }
    Ok(ComposedAdversary { inner: adversary, sim })
}

impl Adversary for ComposedAdversary {
    fn name(&self) -> String {
        format!("{} via {}", self.inner.name(), self.sim.name())
    }

    fn advice_bits(&self) -> u64 {
        self.inner.advice_bits() + self.sim.advice_bits()
    }

    fn online_queries(&self) -> u64 {
        self.inner.online_queries() * self.sim.queries_per_call()
    }

    fn offline(&self, iface: &Interface, rng: &mut ChaCha8Rng) -> Result<Advice> {
        let (pub0, sim_advice) = self.sim.offline(iface, None, rng)?;
        sim_advice.check_limit(self.sim.advice_bits())?;
        let simulated =
            Interface::new(iface.params(), iface.private_oracle()).with_public_permutation(pub0)?;
        let adv_advice = self.inner.offline(&simulated, rng)?;
        adv_advice.check_limit(self.inner.advice_bits())?;
        let mut padded = sim_advice;
        while padded.len() < self.sim.advice_bits() {
            padded.push_bit(false);
        }
        Ok(padded.concat(&adv_advice))
    }

    fn online(
        &self,
        public: &dyn PublicAccess,
        advice: &Advice,
        message: &[u32],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<u32>> {
        let (sim_advice, adv_advice) = advice.split_at(self.sim.advice_bits())?;
        let online_sim = self.sim.online(public, None, &sim_advice)?;
        let bounded =
            OnlineAccess::new(public.params(), None, &online_sim, "adversary", self.inner.online_queries());
        self.inner.online(&bounded, &adv_advice, message, rng)
    }
}

/// The distinguisher induced by a game and an adversary: `D₀ = A₀`, and
/// `D₁` plays `P` on the private interface and `A₁` on the public one,
/// outputting `E`'s bit.
#[derive(Clone)]
pub struct GameDistinguisher {
    pub game: SecurityGame,
}

impl Distinguisher for GameDistinguisher {
    fn name(&self) -> String {
        format!("game({}, {})", self.game.cryptosystem.name(), self.game.adversary.name())
    }

    fn advice_bits(&self) -> u64 {
        self.game.adversary.advice_bits()
    }

    fn online_queries(&self) -> u64 {
        self.game.adversary.online_queries() + self.game.cryptosystem.private_queries()
    }

    fn offline(&self, iface: &Interface, rng: &mut ChaCha8Rng) -> Result<Advice> {
        self.game.adversary.offline(iface, rng)
    }

    fn online(&self, access: &OnlineAccess<'_>, advice: &Advice, rng: &mut ChaCha8Rng) -> Result<bool> {
        let public = OnlineAccess::new(
            access.params(),
            None,
            access,
            "adversary",
            self.game.adversary.online_queries(),
        );
        let private = |x: u32| access.priv_eval(x);
        let mut rng_p = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let mut rng_a = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let (bit, _) =
            play_rounds(&self.game, access.params(), &private, &public, advice, &mut rng_p, &mut rng_a)?;
        Ok(bit)
    }
}
