//! The indifferentiability experiment with pre-computation, reference
//! distinguishers, and exact (enumerative) acceptance probabilities.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    Acceptance, Advice, Distinguisher, GameReport, MeasuredBudgets, OnlineAccess, ResourceBudget,
    SimulatorPair, Tally, TrialOutcome, World,
};
use crate::bitdomain::{FunctionTable, PermutationTable, Seed, SpongeParams};
use crate::sponge::{
    random_function_model, real_world_with, sponge_world, Backing, Direction, FunctionOracle, Interface,
    PublicAccess,
};
use crate::symsim::SharedRandomness;
use crate::young::{factorial_u64, nth_permutation};
use crate::{Error, Result};

fn run_distinguisher(
    d: &dyn Distinguisher,
    d_iface: &Interface,
    private: &dyn FunctionOracle,
    public: &dyn PublicAccess,
    coins: &Seed,
) -> Result<(bool, Advice, u64, u64)> {
    let params = d_iface.params();
    let advice = d.offline(d_iface, &mut coins.derive("d0").rng())?;
    advice.check_limit(d.advice_bits())?;
    let access = OnlineAccess::new(params, Some(private), public, "distinguisher", d.online_queries());
    let bit = d.online(&access, &advice, &mut coins.derive("d1").rng())?;
    Ok((bit, advice, access.used(), access.private_used()))
}

/// `D[Sp^φ, (φ, φ⁻¹)]` on a given real-world interface.
pub(crate) fn real_trial(d: &dyn Distinguisher, iface: &Interface, coins: &Seed) -> Result<TrialOutcome> {
    let private = iface.private_oracle();
    let online = iface.fork();
    let (bit, advice, used, private_used) = run_distinguisher(d, iface, &*private, &online, coins)?;
    Ok(TrialOutcome {
        bit,
        measured: MeasuredBudgets {
            advice_bits: advice.len(),
            online_queries: used,
            private_queries: private_used,
            ..MeasuredBudgets::default()
        },
        block_evals: 0,
    })
}

/// `D[f, S[f]]` on an ideal object whose private and public sides are `f`.
pub(crate) fn ideal_trial(
    d: &dyn Distinguisher,
    sim: &dyn SimulatorPair,
    r: &Interface,
    sr: Option<&SharedRandomness>,
    coins: &Seed,
) -> Result<TrialOutcome> {
    let params = r.params();
    let (pub0, sim_advice) = sim.offline(r, sr, &mut coins.derive("s0").rng())?;
    sim_advice.check_limit(sim.advice_bits())?;
    let d_iface = Interface::new(params, r.private_oracle()).with_public_permutation(pub0)?;
    let r_online = r.fork();
    let online_sim = sim.online(&r_online, sr, &sim_advice)?;
    let private = r.private_oracle();
    let (bit, advice, used, private_used) = run_distinguisher(d, &d_iface, &*private, &online_sim, coins)?;
    Ok(TrialOutcome {
        bit,
        measured: MeasuredBudgets {
            advice_bits: advice.len(),
            online_queries: used,
            sim_advice_bits: sim_advice.len(),
            sim_queries: r_online.counts().public,
            private_queries: private_used,
        },
        block_evals: online_sim.block_evaluations(),
    })
}

/// Real and ideal reports of one indifferentiability experiment.
#[derive(Clone, Debug, Serialize)]
pub struct IndiffReport {
    pub distinguisher: String,
    pub simulator: String,
    pub real: GameReport,
    pub ideal: GameReport,
    /// `Pr[1 | real] − Pr[1 | ideal]`.
    pub advantage: f64,
    /// Standard error of `advantage`.
    pub std_error: f64,
    /// Sum of the two Hoeffding radii.
    pub radius: f64,
}

/// Runs `D` against the real world and against `(f, S)` for `trials`
/// independent trials each. Trial `i` draws everything from
/// `seed.derive_index("trial", i)`.
pub fn run_indiff_experiment(
    params: SpongeParams,
    d: &dyn Distinguisher,
    sim: &dyn SimulatorPair,
    trials: u64,
    seed: &Seed,
    backing: Backing,
) -> Result<IndiffReport> {
    let real = (0..trials)
        .into_par_iter()
        .map(|i| {
            let ts = seed.derive_index("trial", i);
            Tally::from_result(
                real_world_with(params, &ts.derive("real"), backing)
                    .and_then(|iface| real_trial(d, &iface, &ts.derive("coins"))),
            )
        })
        .reduce(Tally::default, Tally::merge);
    let ideal = (0..trials)
        .into_par_iter()
        .map(|i| {
            let ts = seed.derive_index("trial", i);
            let r = random_function_model(params, &ts.derive("ideal"));
            let sr = sim.uses_shared_randomness().then(|| SharedRandomness::new(ts.derive("sr")));
            Tally::from_result(ideal_trial(d, sim, &r, sr.as_ref(), &ts.derive("coins")))
        })
        .reduce(Tally::default, Tally::merge);

    let declared_real =
        ResourceBudget { s: d.advice_bits(), t: d.online_queries(), ..ResourceBudget::default() };
    let declared_ideal = ResourceBudget {
        s_sim: sim.advice_bits(),
        t_sim: d.online_queries() * sim.queries_per_call(),
        ..declared_real
    };
    let real = real.report(World::Real, d.name(), params, declared_real);
    let ideal = ideal.report(World::Ideal, d.name(), params, declared_ideal);
    Ok(IndiffReport {
        distinguisher: d.name(),
        simulator: sim.name(),
        advantage: real.rate - ideal.rate,
        std_error: (real.std_error.powi(2) + ideal.std_error.powi(2)).sqrt(),
        radius: real.radius + ideal.radius,
        real,
        ideal,
    })
}

/// Monte Carlo estimate of `Pr[D = 1]` in the ideal world with a fixed
/// `SR`. The worlds and coins depend only on `seed`, so estimates for
/// different `SR` share their random numbers.
pub fn estimate_ideal_acceptance(
    params: SpongeParams,
    d: &dyn Distinguisher,
    sim: &dyn SimulatorPair,
    sr: Option<&SharedRandomness>,
    trials: u64,
    seed: &Seed,
) -> Result<Acceptance> {
    let tally = (0..trials)
        .into_par_iter()
        .map(|i| {
            let ts = seed.derive_index("trial", i);
            let r = random_function_model(params, &ts.derive("ideal"));
            Tally::from_result(ideal_trial(d, sim, &r, sr, &ts.derive("coins")))
        })
        .reduce(Tally::default, Tally::merge);
    if let Some(reason) = tally.abort_reason {
        return Err(Error::Contract(format!("{} of {trials} ideal trials aborted: {reason}", tally.aborted)));
    }
    let report = tally.report(World::Ideal, d.name(), params, ResourceBudget::default());
    Ok(Acceptance::Estimated { p: report.rate, radius: report.radius })
}

/// `Pr[D = 1]` in the real world, exactly, by enumerating `S_{2^n}`.
/// `D`'s coins are fixed by `coins`.
pub fn exact_real_acceptance(
    params: SpongeParams,
    d: &dyn Distinguisher,
    coins: &Seed,
) -> Result<BigRational> {
    params.ensure_enumeration_mode()?;
    let points = params.domain_size();
    let total = factorial_u64(points);
    let ones = (0..total)
        .into_par_iter()
        .map(|rank| -> Result<u64> {
            let phi = PermutationTable::from_forward(params.n(), nth_permutation(points, rank))?;
            let iface = sponge_world(params, Arc::new(phi))?;
            Ok(real_trial(d, &iface, coins)?.bit as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(BigRational::new(BigInt::from(ones), BigInt::from(total)))
}

/// `Pr[D = 1]` in the ideal world with a fixed `SR`, exactly, by enumerating
/// every `f`. `D`'s and the simulator's coins are fixed by `coins`.
pub fn exact_ideal_acceptance(
    params: SpongeParams,
    d: &dyn Distinguisher,
    sim: &dyn SimulatorPair,
    sr: Option<&SharedRandomness>,
    coins: &Seed,
) -> Result<BigRational> {
    let bits = params.r() as u64 * params.rate_size() as u64;
    if bits > 20 {
        return Err(Error::Parameter(format!("2^{bits} functions are too many to enumerate")));
    }
    let total = 1u64 << bits;
    let ones = (0..total)
        .into_par_iter()
        .map(|code| -> Result<u64> {
            let f = FunctionTable::from_code(params, code)?;
            let mut r = Interface::new(params, Arc::new(f));
            r.bind_private_as_public();
            Ok(ideal_trial(d, sim, &r, sr, coins)?.bit as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(BigRational::new(BigInt::from(ones), BigInt::from(total)))
}

/// Always outputs `bit`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDistinguisher(pub bool);

impl Distinguisher for ConstantDistinguisher {
    fn name(&self) -> String {
        format!("constant-{}", self.0 as u8)
    }

    fn advice_bits(&self) -> u64 {
        0
    }

    fn online_queries(&self) -> u64 {
        0
    }

    fn offline(&self, _iface: &Interface, _rng: &mut ChaCha8Rng) -> Result<Advice> {
        Ok(Advice::new())
    }

    fn online(&self, _a: &OnlineAccess<'_>, _adv: &Advice, _rng: &mut ChaCha8Rng) -> Result<bool> {
        Ok(self.0)
    }
}

/// Makes a fixed number of private and forward public queries, declaring
/// `declared` as its bound; outputs 1.
#[derive(Clone, Copy, Debug)]
pub struct ScriptedDistinguisher {
    pub private_calls: u64,
    pub public_calls: u64,
    pub declared: u64,
}

impl Distinguisher for ScriptedDistinguisher {
    fn name(&self) -> String {
        format!("scripted-{}-{}", self.private_calls, self.public_calls)
    }

    fn advice_bits(&self) -> u64 {
        0
    }

    fn online_queries(&self) -> u64 {
        self.declared
    }

    fn offline(&self, _iface: &Interface, _rng: &mut ChaCha8Rng) -> Result<Advice> {
        Ok(Advice::new())
    }

    fn online(&self, access: &OnlineAccess<'_>, _adv: &Advice, _rng: &mut ChaCha8Rng) -> Result<bool> {
        let params = access.params();
        for i in 0..self.private_calls {
            access.priv_eval(i as u32 & params.rate_mask())?;
        }
        for i in 0..self.public_calls {
            access.permutation(Direction::Forward, i as u32 & (params.domain_size() as u32 - 1))?;
        }
        Ok(true)
    }
}

/// Checks `pub(inv, pub(fwd, w)) = w` and `priv(x) = top_r(pub(fwd, x ‖ 0^c))`
/// at `points` random points each; outputs 1 iff everything agrees.
#[derive(Clone, Copy, Debug)]
pub struct InverseConsistency {
    pub points: u64,
}

impl Default for InverseConsistency {
    fn default() -> Self {
        InverseConsistency { points: 10 }
    }
}

impl Distinguisher for InverseConsistency {
    fn name(&self) -> String {
        format!("inverse-consistency-{}", self.points)
    }

    fn advice_bits(&self) -> u64 {
        0
    }

    fn online_queries(&self) -> u64 {
        4 * self.points
    }

    fn offline(&self, _iface: &Interface, _rng: &mut ChaCha8Rng) -> Result<Advice> {
        Ok(Advice::new())
    }

    fn online(&self, access: &OnlineAccess<'_>, _adv: &Advice, rng: &mut ChaCha8Rng) -> Result<bool> {
        let params = access.params();
        let mut ok = true;
        for _ in 0..self.points {
            let w = rng.random_range(0..params.domain_size() as u32);
            let y = access.permutation(Direction::Forward, w)?;
            ok &= access.permutation(Direction::Inverse, y)? == w;
            let x = rng.random_range(0..params.rate_size() as u32);
            let via_pub = params.top(access.permutation(Direction::Forward, params.absorb(x))?);
            ok &= access.priv_eval(x)? == via_pub;
        }
        Ok(ok)
    }
}

/// Decision rule of a [`TruthTableReader`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReaderRule {
    /// Reads the private truth table and outputs 1 iff it is more likely as
    /// the sponge hash of a uniform permutation than as a uniform function.
    SpongeLikelihood,
    /// Reads the public table and outputs 1 iff it maps `input` to `output`.
    PublicPoint { input: u32, output: u32 },
}

/// Unbounded offline distinguisher that reads whole truth tables and
/// passes its verdict as one advice bit; the online stage makes no queries.
#[derive(Clone, Copy, Debug)]
pub struct TruthTableReader {
    pub rule: ReaderRule,
}

impl TruthTableReader {
    pub fn new(rule: ReaderRule) -> Self {
        TruthTableReader { rule }
    }
}

/// `ln Pr[Sp^φ = g]` for uniform `φ`: the images of the `2^r` absorbed
/// points are a uniform ordered sample without replacement, so the law is
/// `Π_v (2^c)_{k_v} / (2^n)_{2^r}` with `k_v` the multiplicity of `v` in `g`.
pub(crate) fn log_sponge_likelihood(table: &FunctionTable) -> f64 {
    let params = table.params();
    let mut counts = vec![0u64; params.rate_size()];
    for &v in table.entries() {
        counts[v as usize] += 1;
    }
    let log_falling = |base: f64, k: u64| (0..k).map(|i| (base - i as f64).ln()).sum::<f64>();
    let cap = params.capacity_size() as f64;
    let num: f64 = counts.iter().map(|&k| log_falling(cap, k)).sum();
    num - log_falling(params.domain_size() as f64, params.rate_size() as u64)
}

impl Distinguisher for TruthTableReader {
    fn name(&self) -> String {
        match self.rule {
            ReaderRule::SpongeLikelihood => "truth-table-reader(sponge-likelihood)".into(),
            ReaderRule::PublicPoint { input, output } => {
                format!("truth-table-reader(public {input}->{output})")
            }
        }
    }

    fn advice_bits(&self) -> u64 {
        1
    }

    fn online_queries(&self) -> u64 {
        0
    }

    fn offline(&self, iface: &Interface, _rng: &mut ChaCha8Rng) -> Result<Advice> {
        let params = iface.params();
        let verdict = match self.rule {
            ReaderRule::SpongeLikelihood => {
                let uniform = -(params.r() as f64) * params.rate_size() as f64 * 2f64.ln();
                log_sponge_likelihood(&iface.private_table()) > uniform + 1e-12
            }
            ReaderRule::PublicPoint { input, output } => iface.public_table()?.forward(input) == output,
        };
        let mut advice = Advice::new();
        advice.push_bit(verdict);
        Ok(advice)
    }

    fn online(&self, _a: &OnlineAccess<'_>, advice: &Advice, _rng: &mut ChaCha8Rng) -> Result<bool> {
        advice.bit(0)
    }
}
