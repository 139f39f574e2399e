//! Pre-computation attacks: the trapdoor counterexample separating reset
//! indifferentiability from pre-computation security, and Hellman tables
//! for inverting `r`-bit functions (a random `f`, or `Sp^φ` through the
//! sponge interfaces).

use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitdomain::{KeystreamFunction, Seed, SpongeParams, MAX_BITS};
use crate::games::{
    compose_adversary, estimate_ideal_acceptance, lift_reset_to_precomp, remove_shared_randomness,
    run_indiff_experiment, run_security_game, Adversary, Advice, GameDistinguisher, GameReport,
    InversionGame, Model, SpongeSimulator, SrCase, SrSpace,
};
use crate::sponge::{Backing, FunctionOracle, Interface, PublicAccess};
use crate::symsim::CountingOracle;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Trapdoor separation

/// `g : {0,1}^{2n} → {0,1}^n`, uniform except `g(x‖s) = x`. Inputs are
/// laid out with `x` in the high `n` bits. Without a trapdoor this is the
/// plain random function `h`.
#[derive(Clone, Debug)]
pub struct TrapdoorFunction {
    n: u32,
    trapdoor: Option<u32>,
    table: KeystreamFunction,
}

/// Which of the two constructions a trial runs against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationWorld {
    /// `C`: both interfaces are `O_g`.
    Trapdoor,
    /// `R`: both interfaces are `O_h`.
    Random,
}

impl TrapdoorFunction {
    pub fn sample(n: u32, world: SeparationWorld, seed: &Seed) -> Result<Self> {
        if n == 0 || 2 * n > MAX_BITS {
            return Err(Error::Parameter(format!("trapdoor width n = {n} needs 1 ≤ n ≤ {}", MAX_BITS / 2)));
        }
        let table = KeystreamFunction::new(seed.derive("table"), 2 * n, n)?;
        let trapdoor = match world {
            SeparationWorld::Trapdoor => Some(seed.derive("trapdoor").rng().random_range(0..1u32 << n)),
            SeparationWorld::Random => None,
        };
        Ok(TrapdoorFunction { n, trapdoor, table })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn trapdoor(&self) -> Option<u32> {
        self.trapdoor
    }

    pub fn world(&self) -> SeparationWorld {
        match self.trapdoor {
            Some(_) => SeparationWorld::Trapdoor,
            None => SeparationWorld::Random,
        }
    }

    pub fn join(&self, x: u32, u: u32) -> u32 {
        (x << self.n) | u
    }
}

impl FunctionOracle for TrapdoorFunction {
    fn eval(&self, w: u32) -> u32 {
        let low = w & ((1u32 << self.n) - 1);
        match self.trapdoor {
            Some(s) if low == s => w >> self.n,
            _ => self.table.eval(w),
        }
    }
}

/// Offline stage of the separating adversary: the least `u` with
/// `g(x‖u) = x` for every `x`, found by exhaustive search with early
/// rejection.
pub fn find_trapdoor(oracle: &dyn FunctionOracle, n: u32) -> Option<u32> {
    (0..1u32 << n).find(|&u| (0..1u32 << n).all(|x| oracle.eval((x << n) | u) == x))
}

/// The `n`-bit advice: the trapdoor when one exists, else `0`.
pub fn trapdoor_advice(oracle: &dyn FunctionOracle, n: u32) -> Advice {
    let mut advice = Advice::new();
    advice.push_bits(find_trapdoor(oracle, n).unwrap_or(0) as u64, n);
    advice
}

/// Online stage: `y ↦ y‖s`. Takes the oracle only to show that it is never
/// queried.
pub fn trapdoor_attack(_oracle: &dyn FunctionOracle, advice: &Advice, n: u32, y: u32) -> Result<u32> {
    let s = advice.read_bits(0, n)? as u32;
    Ok((y << n) | s)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub n: u32,
    pub world: SeparationWorld,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub std_error: f64,
    pub advice_bits: u64,
    /// Largest online query count over all trials.
    pub online_queries: u64,
    pub mean_offline_queries: f64,
}

/// The inversion game against `C` or `R`: sample `x ∈ {0,1}^{2n}`, hand
/// the adversary `y = g(x)`, and check `g(x') = y`.
pub fn run_separation(n: u32, world: SeparationWorld, trials: u64, seed: &Seed) -> Result<SeparationReport> {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, u64, u64, u64)> {
            let ts = seed.derive_index("trial", i);
            let g = TrapdoorFunction::sample(n, world, &ts.derive("oracle"))?;
            let offline = CountingOracle::new(&g);
            let advice = trapdoor_advice(&offline, n);
            let x = ts.derive("challenge").rng().random_range(0..1u32 << (2 * n));
            let y = g.eval(x);
            let online = CountingOracle::new(&g);
            let guess = trapdoor_attack(&online, &advice, n, y)?;
            Ok((g.eval(guess) == y, online.count(), offline.count(), advice.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count() as u64;
    let rate = successes as f64 / trials.max(1) as f64;
    Ok(SeparationReport {
        n,
        world,
        trials,
        successes,
        rate,
        std_error: (rate * (1.0 - rate) / trials.max(1) as f64).sqrt(),
        advice_bits: outcomes.iter().map(|o| o.3).max().unwrap_or(0),
        online_queries: outcomes.iter().map(|o| o.1).max().unwrap_or(0),
        mean_offline_queries: outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / trials.max(1) as f64,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistinguishReport {
    pub n: u32,
    pub queries: u64,
    pub trials: u64,
    pub p_trapdoor: f64,
    pub p_random: f64,
    pub advantage: f64,
    pub std_error: f64,
    /// Exact advantage of this distinguisher, `q^T − q^{2T}` with
    /// `q = 1 − 2^{-n}`.
    pub analytic: f64,
}

/// Exact advantage of the hit-probability distinguisher with `T` queries.
/// A query `x‖u` hits with probability `2^{-n}` under `h`, and with
/// probability `1 − q²` under `g` (trapdoor or coincidence).
pub fn hit_distinguisher_advantage(n: u32, queries: u64) -> f64 {
    let q = 1.0 - (-(n as f64)).exp2();
    let t = queries as f64;
    q.powf(t) - q.powf(2.0 * t)
}

/// Queries `T` uniform points `x‖u` and outputs 1 iff some `g(x‖u) = x`.
/// Both worlds and every `T` reuse the same query points for a trial.
pub fn trapdoor_distinguish(n: u32, queries: u64, trials: u64, seed: &Seed) -> Result<DistinguishReport> {
    let run = |world: SeparationWorld, ts: &Seed| -> Result<bool> {
        let g = TrapdoorFunction::sample(
            n,
            world,
            &ts.derive(match world {
                SeparationWorld::Trapdoor => "g",
                SeparationWorld::Random => "h",
            }),
        )?;
        let mut rng = ts.derive("queries").rng();
        Ok((0..queries).any(|_| {
            let x = rng.random_range(0..1u32 << n);
            let u = rng.random_range(0..1u32 << n);
            g.eval(g.join(x, u)) == x
        }))
    };
    let (ones_g, ones_h) = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(u64, u64)> {
            let ts = seed.derive_index("trial", i);
            Ok((run(SeparationWorld::Trapdoor, &ts)? as u64, run(SeparationWorld::Random, &ts)? as u64))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n_t = trials.max(1) as f64;
    let (pg, ph) = (ones_g as f64 / n_t, ones_h as f64 / n_t);
    Ok(DistinguishReport {
        n,
        queries,
        trials,
        p_trapdoor: pg,
        p_random: ph,
        advantage: pg - ph,
        std_error: ((pg * (1.0 - pg) + ph * (1.0 - ph)) / n_t).sqrt(),
        analytic: hit_distinguisher_advantage(n, queries),
    })
}

// ---------------------------------------------------------------------------
// Hellman tables

/// Shape of a Hellman table set: `k` tables of `m` chains of length `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HellmanConfig {
    pub m: u64,
    pub t: u64,
    pub k: u64,
}

impl HellmanConfig {
    pub fn new(m: u64, t: u64, k: u64) -> Result<Self> {
        if m == 0 || t == 0 || k == 0 {
            return Err(Error::Parameter(format!("Hellman shape ({m}, {t}, {k}) has a zero")));
        }
        Ok(HellmanConfig { m, t, k })
    }

    /// Stored start and end points: `k·m·2r` bits.
    pub fn advice_bits(&self, r: u32) -> u64 {
        self.k * self.m * 2 * r as u64
    }

    /// Online queries in the worst case: per table, `t − 1` chain steps and
    /// at most one candidate walk of `t − i` evaluations at step `i`.
    pub fn worst_case_queries(&self) -> u64 {
        self.k * (self.t - 1 + self.t * (self.t + 1) / 2)
    }
}

/// `y ↦ (a·y) ⊕ b mod 2^r` with `a` odd; a bijection on `r` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Reduction {
    pub a: u32,
    pub b: u32,
    mask: u32,
}

impl Reduction {
    fn sample(r: u32, seed: &Seed) -> Self {
        let mask = ((1u64 << r) - 1) as u32;
        let mut rng = seed.rng();
        Reduction { a: (rng.next_u32() | 1) & mask | 1, b: rng.next_u32() & mask, mask }
    }

    pub fn apply(&self, y: u32) -> u32 {
        (self.a.wrapping_mul(y) ^ self.b) & self.mask
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HellmanTable {
    pub reduction: Reduction,
    /// `(start, end)` in chain order, as stored in the advice.
    pub chains: Vec<(u32, u32)>,
    /// Sorted by end point; one start per end point.
    lookup: Vec<(u32, u32)>,
}

impl HellmanTable {
    fn new(reduction: Reduction, chains: Vec<(u32, u32)>) -> Self {
        let mut lookup: Vec<(u32, u32)> = chains.iter().map(|&(s, e)| (e, s)).collect();
        lookup.sort_by_key(|&(e, _)| e);
        lookup.dedup_by_key(|&mut (e, _)| e);
        HellmanTable { reduction, chains, lookup }
    }

    fn start_for(&self, end: u32) -> Option<u32> {
        self.lookup.binary_search_by_key(&end, |&(e, _)| e).ok().map(|i| self.lookup[i].1)
    }

    /// Distinct end points.
    pub fn distinct_ends(&self) -> usize {
        self.lookup.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HellmanTables {
    pub r: u32,
    pub config: HellmanConfig,
    pub tables: Vec<HellmanTable>,
    /// Target evaluations spent building the tables.
    pub offline_queries: u64,
}

fn reductions(r: u32, k: u64, seed: &Seed) -> Vec<Reduction> {
    (0..k).map(|j| Reduction::sample(r, &seed.derive_index("reduction", j))).collect()
}

/// Builds `k` tables of `m` chains `x₀ → R_j(f(x₀)) → …` of length `t`.
/// Start points and reductions come from `seed`.
pub fn build_tables(
    target: &dyn FunctionOracle,
    r: u32,
    config: HellmanConfig,
    seed: &Seed,
) -> Result<HellmanTables> {
    if r == 0 || r > MAX_BITS {
        return Err(Error::Parameter(format!("Hellman target width {r} out of range")));
    }
    let mask = ((1u64 << r) - 1) as u32;
    let tables = reductions(r, config.k, seed)
        .into_iter()
        .enumerate()
        .map(|(j, red)| {
            let mut rng = seed.derive_index("starts", j as u64).rng();
            let starts: Vec<u32> = (0..config.m).map(|_| rng.next_u32() & mask).collect();
            let chains = starts
                .into_par_iter()
                .map(|s| {
                    let mut x = s;
                    for _ in 0..config.t {
                        x = red.apply(target.eval(x));
                    }
                    (s, x)
                })
                .collect();
            HellmanTable::new(red, chains)
        })
        .collect();
    Ok(HellmanTables { r, config, tables, offline_queries: config.k * config.m * config.t })
}

impl HellmanTables {
    pub fn to_advice(&self) -> Advice {
        let mut advice = Advice::new();
        for table in &self.tables {
            for &(s, e) in &table.chains {
                advice.push_bits(s as u64, self.r);
                advice.push_bits(e as u64, self.r);
            }
        }
        advice
    }

    /// Inverse of [`to_advice`](Self::to_advice); reductions are re-derived
    /// from `seed`.
    pub fn from_advice(advice: &Advice, r: u32, config: HellmanConfig, seed: &Seed) -> Result<Self> {
        if advice.len() != config.advice_bits(r) {
            return Err(Error::Format(format!(
                "Hellman advice has {} bits, expected {}",
                advice.len(),
                config.advice_bits(r)
            )));
        }
        let mut offset = 0u64;
        let mut next = || -> Result<u32> {
            let v = advice.read_bits(offset, r)? as u32;
            offset += r as u64;
            Ok(v)
        };
        let mut tables = Vec::with_capacity(config.k as usize);
        for red in reductions(r, config.k, seed) {
            let chains = (0..config.m).map(|_| Ok((next()?, next()?))).collect::<Result<Vec<_>>>()?;
            tables.push(HellmanTable::new(red, chains));
        }
        Ok(HellmanTables { r, config, tables, offline_queries: 0 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Inversion {
    pub preimage: Option<u32>,
    pub queries: u64,
    pub false_alarms: u64,
}

/// Chain walking against the public side's `r → r` target. Every candidate
/// is checked with a target evaluation before it is returned.
pub fn invert_with_tables(tables: &HellmanTables, access: &dyn PublicAccess, y: u32) -> Result<Inversion> {
    let t = tables.config.t;
    let mut queries = 0u64;
    let mut false_alarms = 0u64;
    let mut eval = |x: u32| -> Result<u32> {
        queries += 1;
        access.target(x)
    };
    for table in &tables.tables {
        let red = table.reduction;
        let mut z = red.apply(y);
        for i in 0..t {
            if let Some(start) = table.start_for(z) {
                // y would be f of the (t − 1 − i)-th point of this chain
                let mut x = start;
                let mut found = None;
                for _ in 0..t - i {
                    let fx = eval(x)?;
                    if fx == y {
                        found = Some(x);
                        break;
                    }
                    x = red.apply(fx);
                }
                match found {
                    Some(x) => return Ok(Inversion { preimage: Some(x), queries, false_alarms }),
                    None => false_alarms += 1,
                }
            }
            if i + 1 < t {
                z = red.apply(eval(z)?);
            }
        }
    }
    Ok(Inversion { preimage: None, queries, false_alarms })
}

/// Hellman tables as a two-stage inversion adversary. `A₀` reads the full
/// private table and builds the chains; `A₁` walks them on the public side
/// and answers `0` when no preimage is found.
#[derive(Clone, Debug)]
pub struct HellmanAdversary {
    pub r: u32,
    pub config: HellmanConfig,
    pub seed: Seed,
}

impl HellmanAdversary {
    pub fn new(r: u32, config: HellmanConfig, seed: Seed) -> Self {
        HellmanAdversary { r, config, seed }
    }
}

impl Adversary for HellmanAdversary {
    fn name(&self) -> String {
        format!("hellman(m={}, t={}, k={})", self.config.m, self.config.t, self.config.k)
    }

    fn advice_bits(&self) -> u64 {
        self.config.advice_bits(self.r)
    }

    fn online_queries(&self) -> u64 {
        self.config.worst_case_queries()
    }

    fn offline(&self, iface: &Interface, _rng: &mut ChaCha8Rng) -> Result<Advice> {
        if iface.params().r() != self.r {
            return Err(Error::Configuration(format!(
                "adversary built for r = {}, interface has r = {}",
                self.r,
                iface.params().r()
            )));
        }
        let table = iface.private_table();
        Ok(build_tables(&table, self.r, self.config, &self.seed)?.to_advice())
    }

    fn online(
        &self,
        public: &dyn PublicAccess,
        advice: &Advice,
        message: &[u32],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<u32>> {
        let tables = HellmanTables::from_advice(advice, self.r, self.config, &self.seed)?;
        let y = *message.first().ok_or_else(|| Error::Protocol("empty inversion challenge".into()))?;
        Ok(vec![invert_with_tables(&tables, public, y)?.preimage.unwrap_or(0)])
    }
}

/// One row of a trade-off sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TradeoffRow {
    pub r: u32,
    pub c: u32,
    pub m: u64,
    pub t: u64,
    pub k: u64,
    /// Advice bits.
    pub s: u64,
    /// Largest measured online query count.
    pub t_measured: u64,
    pub trials: u64,
    pub successes: u64,
    pub eps: f64,
    /// `3σ` half-width.
    pub ci: f64,
}

impl TradeoffRow {
    fn from_report(params: SpongeParams, config: HellmanConfig, report: &GameReport) -> Self {
        TradeoffRow {
            r: params.r(),
            c: params.c(),
            m: config.m,
            t: config.t,
            k: config.k,
            s: report.measured.advice_bits,
            t_measured: report.measured.online_queries,
            trials: report.trials,
            successes: report.successes,
            eps: report.rate,
            ci: 3.0 * report.std_error,
        }
    }

    /// `S·T / 2^r`.
    pub fn st_over_domain(&self) -> f64 {
        self.s as f64 * self.t_measured as f64 / (self.r as f64).exp2()
    }
}

fn require_completed(report: &GameReport) -> Result<()> {
    match &report.abort_reason {
        Some(reason) => Err(Error::Contract(format!(
            "{} of {} trials of {} aborted: {reason}",
            report.aborted, report.trials, report.label
        ))),
        None => Ok(()),
    }
}

/// Hellman inversion against `Sp^φ` (model `Sponge`) or against `f`
/// (model `RandomFunction`, adversary talking to `f` directly).
pub fn run_tradeoff(
    params: SpongeParams,
    model: Model,
    config: HellmanConfig,
    trials: u64,
    seed: &Seed,
) -> Result<TradeoffRow> {
    let adversary = HellmanAdversary::new(params.r(), config, seed.derive("hellman"));
    let report = run_security_game(&InversionGame::game(Arc::new(adversary)), model, params, trials, seed)?;
    require_completed(&report)?;
    Ok(TradeoffRow::from_report(params, config, &report))
}

/// Smallest `K` with `ε ≤ K·S·T/2^r` on every row.
pub fn upper_curve_constant(rows: &[TradeoffRow]) -> f64 {
    rows.iter().map(|row| row.eps / row.st_over_domain()).fold(0.0, f64::max)
}

/// Sponge-versus-function transfer for one Hellman shape.
#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub sponge: TradeoffRow,
    /// The composed adversary (Hellman through the simulator) in the
    /// random-function model.
    pub function: TradeoffRow,
    /// `|Pr[D = 1 | real] − Pr[D = 1 | ideal]|` for the distinguisher
    /// induced by the inversion game and the Hellman adversary.
    pub eps_indiff: f64,
    pub eps_indiff_std_error: f64,
    pub sim_advice_bits: u64,
    pub sr_case: String,
    /// `|ε_sponge − ε_function|`.
    pub gap: f64,
    /// `3·sqrt(σ_sponge² + σ_function² + σ_indiff²)`.
    pub joint_ci: f64,
    pub holds: bool,
}

/// Measures `ε_sponge`, `ε_function` for the composed adversary and the
/// induced indifferentiability advantage, and checks
/// `|ε_sponge − ε_function| ≤ ε_indiff + joint CI`.
///
/// The simulator is the sponge simulator with its shared randomness
/// removed, estimated over `sr_samples` sampled `SR` values with
/// `sr_trials` trials each.
pub fn composition_transfer(
    params: SpongeParams,
    config: HellmanConfig,
    trials: u64,
    sr_samples: u64,
    sr_trials: u64,
    seed: &Seed,
) -> Result<TransferReport> {
    let hellman: Arc<dyn Adversary> =
        Arc::new(HellmanAdversary::new(params.r(), config, seed.derive("hellman")));
    let game = InversionGame::game(Arc::clone(&hellman));
    let induced = GameDistinguisher { game: game.clone() };

    let sponge =
        run_security_game(&game, Model::Sponge(Backing::Auto), params, trials, &seed.derive("sponge"))?;
    require_completed(&sponge)?;

    let lifted = Arc::new(lift_reset_to_precomp(Arc::new(SpongeSimulator), params)?);
    let crn = seed.derive("sr-estimates");
    let removal = remove_shared_randomness(
        lifted.base().clone(),
        SrSpace::Sampled { count: sr_samples, seed: seed.derive("sr-space") },
        sr_samples,
        |sr| estimate_ideal_acceptance(params, &induced, &*lifted, Some(sr), sr_trials, &crn),
    )?;
    let sim = Arc::new(removal.simulator());
    let composed = compose_adversary(hellman, sim.clone())?;
    let function = run_security_game(
        &game.with_adversary(Arc::new(composed)),
        Model::RandomFunction,
        params,
        trials,
        &seed.derive("function"),
    )?;
    require_completed(&function)?;

    let indiff =
        run_indiff_experiment(params, &induced, &*sim, trials, &seed.derive("indiff"), Backing::Auto)?;
    require_completed(&indiff.real)?;
    require_completed(&indiff.ideal)?;

    let gap = (sponge.rate - function.rate).abs();
    let eps_indiff = indiff.advantage.abs();
    let joint_ci =
        3.0 * (sponge.std_error.powi(2) + function.std_error.powi(2) + indiff.std_error.powi(2)).sqrt();
    Ok(TransferReport {
        sponge: TradeoffRow::from_report(params, config, &sponge),
        function: TradeoffRow::from_report(params, config, &function),
        eps_indiff,
        eps_indiff_std_error: indiff.std_error,
        sim_advice_bits: removal.sim_advice_bits,
        sr_case: match removal.case {
            SrCase::Single { .. } => "single".into(),
            SrCase::Pair { .. } => "pair".into(),
        },
        gap,
        joint_ci,
        holds: gap <= eps_indiff + joint_ci,
    })
}
