//! Validation and dispatch of the experiments.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use spongelab::attacks::{
    composition_transfer, run_separation, run_tradeoff, trapdoor_distinguish, upper_curve_constant,
    HellmanConfig, SeparationWorld, TradeoffRow,
};
use spongelab::bitdomain::{sample_function, FunctionTable, PermutationTable, Seed, SpongeParams, MAX_BITS};
use spongelab::games::{
    estimate_ideal_acceptance, exact_ideal_acceptance, lift_reset_to_precomp, remove_shared_randomness,
    run_indiff_experiment, Acceptance, Distinguisher, InverseConsistency, Model, ReaderRule, SpongeSimulator,
    SrSpace, TruthTableReader,
};
use spongelab::sponge::{sponge_truth_table, Backing, Direction};
use spongelab::stats::truncation_advantage_curve;
use spongelab::symsim::{symmetrize, symmetrize_with, CountingOracle, SharedRandomness, SimOracle};
use spongelab::young::{coset_census, YoungSubgroup};

use crate::config::{
    CensusArgs, DistinguisherKind, Experiment, IndiffArgs, RemoveSrArgs, RunConfig, SeparationArgs,
    SrSpaceArg, TradeoffArgs, TradeoffModel, TruncationArgs, VerifyArgs,
};
use crate::report::{to_value, Report, Table};

/// Largest `n` for the dense checks of `verify`.
const VERIFY_MAX_BITS: u32 = 16;
/// Largest `r·2^r` for exhaustive enumeration of functions.
const FUNCTION_CODE_MAX_BITS: u64 = 20;

fn params(r: u32, c: u32) -> Result<SpongeParams, String> {
    SpongeParams::new(r, c).map_err(|e| format!("--r {r} --c {c}: {e}"))
}

fn positive(name: &str, v: u64) -> Result<(), String> {
    if v == 0 {
        Err(format!("--{name} must be positive"))
    } else {
        Ok(())
    }
}

/// A grid cell of a trade-off sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub r: u32,
    pub c: u32,
    pub m: u64,
    pub t: u64,
    pub k: u64,
    pub trials: u64,
}

fn read_grid(path: &Path) -> Result<Vec<GridCell>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("--grid {}: {e}", path.display()))?;
    let cells = reader
        .deserialize()
        .collect::<Result<Vec<GridCell>, _>>()
        .map_err(|e| format!("--grid {}: {e}", path.display()))?;
    if cells.is_empty() {
        return Err(format!("--grid {}: no cells", path.display()));
    }
    Ok(cells)
}

fn tradeoff_cells(a: &TradeoffArgs) -> Result<Vec<GridCell>, String> {
    match &a.grid {
        Some(path) => read_grid(path),
        None => Ok(vec![GridCell { r: a.r, c: a.c, m: a.m, t: a.t, k: a.k, trials: a.trials }]),
    }
}

fn check_point(name: &str, v: u32, params: SpongeParams) -> Result<(), String> {
    if (v as usize) < params.domain_size() {
        Ok(())
    } else {
        Err(format!("--{name} {v} is not an {}-bit word", params.n()))
    }
}

/// Field diagnostics for everything that can be checked before work starts.
pub fn validate(config: &RunConfig) -> Result<(), String> {
    match &config.experiment {
        Experiment::Verify(a) => {
            let p = params(a.r, a.c)?;
            if p.n() > VERIFY_MAX_BITS {
                return Err(format!("verify needs n = r + c <= {VERIFY_MAX_BITS} (got {})", p.n()));
            }
            positive("functions", a.functions)
        }
        Experiment::CosetCensus(a) => params(a.r, a.c)?.ensure_enumeration_mode().map_err(|e| e.to_string()),
        Experiment::Indiff(a) => {
            let p = params(a.r, a.c)?;
            positive("trials", a.trials)?;
            positive("points", a.points)?;
            check_point("input", a.input, p)?;
            check_point("target", a.target, p)
        }
        Experiment::RemoveSr(a) => {
            let p = params(a.r, a.c)?;
            check_point("input", a.input, p)?;
            check_point("target", a.target, p)?;
            positive("points", a.points)?;
            match a.space {
                SrSpaceArg::Enum16 => {
                    let bits = p.r() as u64 * p.rate_size() as u64;
                    if bits > FUNCTION_CODE_MAX_BITS {
                        return Err(format!(
                            "--space enum16 enumerates 2^{bits} functions; needs r*2^r <= {FUNCTION_CODE_MAX_BITS}"
                        ));
                    }
                    Ok(())
                }
                SrSpaceArg::Sampled => {
                    positive("samples", a.samples)?;
                    positive("sr-trials", a.sr_trials)
                }
            }
        }
        Experiment::Tradeoff(a) => {
            for cell in tradeoff_cells(a)? {
                params(cell.r, cell.c)?;
                HellmanConfig::new(cell.m, cell.t, cell.k).map_err(|e| e.to_string())?;
                positive("trials", cell.trials)?;
            }
            if a.model == TradeoffModel::Transfer {
                positive("sr-samples", a.sr_samples)?;
                positive("sr-trials", a.sr_trials)?;
            }
            Ok(())
        }
        Experiment::Separation(a) => {
            if a.n == 0 || 2 * a.n > MAX_BITS {
                return Err(format!("--n {} must lie in 1..={}", a.n, MAX_BITS / 2));
            }
            positive("trials", a.trials)
        }
        Experiment::TruncationCurve(a) => {
            if a.m == 0 || a.m > a.n || a.n > 20 {
                return Err(format!("needs 1 <= m <= n <= 20 (got n = {}, m = {})", a.n, a.m));
            }
            if let Some(q) = a.q.iter().find(|&&q| q > 1u64 << a.n) {
                return Err(format!("--q {q} exceeds 2^{}", a.n));
            }
            positive("trials", a.trials)
        }
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<Report> {
    let seed = Seed::from_u64(config.seed);
    match &config.experiment {
        Experiment::Verify(a) => verify(a, &seed),
        Experiment::CosetCensus(a) => census(a),
        Experiment::Indiff(a) => indiff(a, &seed),
        Experiment::RemoveSr(a) => remove_sr(a, &seed),
        Experiment::Tradeoff(a) => tradeoff(a, &seed),
        Experiment::Separation(a) => separation(a, &seed),
        Experiment::TruncationCurve(a) => truncation(a, &seed),
    }
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verify(a: &VerifyArgs, seed: &Seed) -> anyhow::Result<Report> {
    let p = SpongeParams::new(a.r, a.c)?;
    let mut checks = Vec::new();

    let mut mismatches = 0u64;
    for i in 0..a.functions {
        let f = sample_function(p, &seed.derive_index("verify-f", i));
        let sr = SharedRandomness::new(seed.derive_index("verify-sr", i));
        let phi = symmetrize(&f, &sr)?;
        let sim = SimOracle::new(p, &f, sr)?;
        let lazy_agrees =
            (0..p.domain_size() as u32).all(|w| sim.sim_query(Direction::Forward, w) == phi.forward(w));
        if sponge_truth_table(&phi, &p) != f || !lazy_agrees {
            mismatches += 1;
        }
    }
    checks.push(Check {
        name: "sponge-match",
        passed: mismatches == 0,
        detail: format!("{} functions, {mismatches} mismatches", a.functions),
    });

    let f = CountingOracle::new(sample_function(p, &seed.derive("verify-single")));
    let sim = SimOracle::new(p, &f, SharedRandomness::new(seed.derive("verify-single-sr")))?;
    let calls = 1000u64;
    let mut rng = seed.derive("verify-single-calls").rng();
    for _ in 0..calls {
        let dir = if rng.random_bool(0.5) { Direction::Forward } else { Direction::Inverse };
        let w = rng.random_range(0..p.domain_size() as u32);
        sim.sim_query(dir, w);
    }
    checks.push(Check {
        name: "single-query",
        passed: sim.f_queries() == calls && f.count() == calls,
        detail: format!("{calls} calls, {} f-queries", f.count()),
    });

    if p.ensure_enumeration_mode().is_ok() {
        let census = coset_census(p)?;
        let expected = 1u64 << (p.r() as u64 * p.rate_size() as u64);
        checks.push(Check {
            name: "coset-census",
            passed: census.consistent() && census.cosets.len() as u64 == expected,
            detail: format!("{} cosets of S_{}", census.cosets.len(), p.domain_size()),
        });

        let h = YoungSubgroup::h(p).elements()?;
        let k = YoungSubgroup::k(p).elements()?;
        let hk = (h.len() * k.len()) as u64;
        let mut uniform = true;
        for entry in &census.cosets {
            let f = FunctionTable::new(p, entry.example_f.clone())?;
            let mut mult: HashMap<Vec<u32>, u64> = HashMap::new();
            for omega in &h {
                for sigma in &k {
                    let phi = symmetrize_with(&f, sigma, omega)?;
                    *mult.entry(phi.forward_entries().to_vec()).or_default() += 1;
                }
            }
            let hashes_to_f = mult.keys().all(|v| {
                PermutationTable::from_forward(p.n(), v.clone())
                    .map(|phi| sponge_truth_table(&phi, &p) == f)
                    .unwrap_or(false)
            });
            uniform &= hashes_to_f
                && mult.len() as u64 == entry.size
                && mult.values().all(|&m| m * entry.size == hk);
        }
        checks.push(Check {
            name: "fiber-uniformity",
            passed: uniform,
            detail: format!("|H||K| = {hk} over {} cosets", census.cosets.len()),
        });
    } else {
        for name in ["coset-census", "fiber-uniformity"] {
            checks.push(Check {
                name,
                passed: true,
                detail: format!("skipped: 2^{} points exceed the enumeration limit", p.n()),
            });
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    let mut table = Table::new(&["check", "passed", "detail"]);
    for c in &checks {
        table.push([c.name.to_string(), c.passed.to_string(), c.detail.clone()]);
    }
    Ok(Report {
        passed,
        summary: format!("{}/{} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len()),
        result: json!({ "checks": checks }),
        table,
    })
}

fn census(a: &CensusArgs) -> anyhow::Result<Report> {
    let p = SpongeParams::new(a.r, a.c)?;
    let census = coset_census(p)?;
    let mut table = Table::new(&[
        "signature",
        "size",
        "factorizations",
        "factorizations_from_size",
        "factorizations_brute_force",
        "example_f",
    ]);
    for e in &census.cosets {
        table.push([
            format!("{:?}", e.signature.matrix()),
            e.size.to_string(),
            e.factorizations.to_string(),
            e.factorizations_from_size.to_string(),
            e.factorizations_brute_force.map(|v| v.to_string()).unwrap_or_default(),
            format!("{:?}", e.example_f),
        ]);
    }
    Ok(Report {
        passed: census.consistent(),
        summary: format!(
            "{} cosets, sizes {:?}",
            census.cosets.len(),
            census.cosets.iter().map(|c| c.size).collect::<Vec<_>>()
        ),
        result: to_value(&census)?,
        table,
    })
}

fn distinguisher(kind: DistinguisherKind, points: u64, input: u32, target: u32) -> Box<dyn Distinguisher> {
    match kind {
        DistinguisherKind::InverseConsistency => Box::new(InverseConsistency { points }),
        DistinguisherKind::SpongeLikelihood => Box::new(TruthTableReader::new(ReaderRule::SpongeLikelihood)),
        DistinguisherKind::PublicPoint => {
            Box::new(TruthTableReader::new(ReaderRule::PublicPoint { input, output: target }))
        }
    }
}

fn indiff(a: &IndiffArgs, seed: &Seed) -> anyhow::Result<Report> {
    let p = SpongeParams::new(a.r, a.c)?;
    let d = distinguisher(a.distinguisher, a.points, a.input, a.target);
    let sim = lift_reset_to_precomp(Arc::new(SpongeSimulator), p)?;
    let rep = run_indiff_experiment(p, &*d, &sim, a.trials, seed, Backing::from(a.backing))?;
    let passed = [&rep.real, &rep.ideal].iter().all(|w| w.aborted == 0 && w.within_budget());
    let mut table = Table::new(&[
        "world",
        "trials",
        "successes",
        "aborted",
        "rate",
        "std_error",
        "radius",
        "advice_bits",
        "online_queries",
        "sim_queries",
        "sim_block_evaluations",
    ]);
    for w in [&rep.real, &rep.ideal] {
        table.push([
            to_value(&w.world)?.as_str().unwrap_or_default().to_string(),
            w.trials.to_string(),
            w.successes.to_string(),
            w.aborted.to_string(),
            w.rate.to_string(),
            w.std_error.to_string(),
            w.radius.to_string(),
            w.measured.advice_bits.to_string(),
            w.measured.online_queries.to_string(),
            w.measured.sim_queries.to_string(),
            w.sim_block_evaluations.to_string(),
        ]);
    }
    Ok(Report {
        passed,
        summary: format!("advantage {:.5} ± {:.5}", rep.advantage, rep.radius),
        result: to_value(&rep)?,
        table,
    })
}

fn remove_sr(a: &RemoveSrArgs, seed: &Seed) -> anyhow::Result<Report> {
    let p = SpongeParams::new(a.r, a.c)?;
    let d = distinguisher(a.distinguisher, a.points, a.input, a.target);
    let lifted = Arc::new(lift_reset_to_precomp(Arc::new(SpongeSimulator), p)?);
    let base = lifted.base().clone();
    let removal = match a.space {
        SrSpaceArg::Enum16 => {
            let coins = seed.derive("coins");
            remove_shared_randomness(base, SrSpace::Enumerable16, 1 << 16, |sr| {
                Ok(Acceptance::Exact(exact_ideal_acceptance(p, &*d, &*lifted, Some(sr), &coins)?))
            })?
        }
        SrSpaceArg::Sampled => {
            let crn = seed.derive("sr-estimates");
            let space = SrSpace::Sampled { count: a.samples, seed: seed.derive("sr-space") };
            remove_shared_randomness(base, space, a.samples, |sr| {
                estimate_ideal_acceptance(p, &*d, &*lifted, Some(sr), a.sr_trials, &crn)
            })?
        }
    };
    let passed = match (&removal.p_exact, &removal.reconstructed_exact) {
        (Some(pe), Some(re)) => pe == re,
        // an estimated candidate counts as p(SR*) = p within its radius
        _ => (removal.reconstructed - removal.p).abs() <= 1e-9 + removal.estimation_radius,
    };
    let value = to_value(&removal)?;
    let mut table = Table::new(&["field", "value"]);
    if let Some(obj) = value.as_object() {
        for (k, v) in obj {
            let text = v.as_str().map_or_else(|| v.to_string(), str::to_string);
            table.push([k.clone(), text]);
        }
    }
    Ok(Report {
        passed,
        summary: format!(
            "p = {:.6}, reconstructed {:.6}, S_sim = {}",
            removal.p, removal.reconstructed, removal.sim_advice_bits
        ),
        result: value,
        table,
    })
}

fn push_row(table: &mut Table, row: &TradeoffRow, model: &str) {
    table.push([
        row.r.to_string(),
        row.c.to_string(),
        row.s.to_string(),
        row.t_measured.to_string(),
        row.trials.to_string(),
        row.successes.to_string(),
        row.eps.to_string(),
        row.ci.to_string(),
        row.m.to_string(),
        row.t.to_string(),
        row.k.to_string(),
        model.to_string(),
    ]);
}

fn tradeoff(a: &TradeoffArgs, seed: &Seed) -> anyhow::Result<Report> {
    let cells = tradeoff_cells(a).map_err(anyhow::Error::msg)?;
    let mut table =
        Table::new(&["r", "c", "S", "T", "trials", "successes", "eps", "ci", "m", "t", "k", "model"]);
    let mut rows = Vec::new();
    let mut transfers = Vec::new();
    let mut passed = true;
    for (i, cell) in cells.iter().enumerate() {
        let p = SpongeParams::new(cell.r, cell.c)?;
        let config = HellmanConfig::new(cell.m, cell.t, cell.k)?;
        let cell_seed = seed.derive_index("cell", i as u64);
        match a.model {
            TradeoffModel::Sponge | TradeoffModel::Function => {
                let (model, label) = match a.model {
                    TradeoffModel::Sponge => (Model::Sponge(Backing::Auto), "sponge"),
                    _ => (Model::RandomFunction, "function"),
                };
                let row = run_tradeoff(p, model, config, cell.trials, &cell_seed)
                    .with_context(|| format!("cell {i}"))?;
                push_row(&mut table, &row, label);
                rows.push(row);
            }
            TradeoffModel::Transfer => {
                let rep = composition_transfer(p, config, cell.trials, a.sr_samples, a.sr_trials, &cell_seed)
                    .with_context(|| format!("cell {i}"))?;
                push_row(&mut table, &rep.sponge, "sponge");
                push_row(&mut table, &rep.function, "function");
                passed &= rep.holds;
                rows.push(rep.sponge.clone());
                rows.push(rep.function.clone());
                transfers.push(rep);
            }
        }
    }
    let fitted = upper_curve_constant(&rows);
    Ok(Report {
        passed,
        summary: format!("{} cells, fitted K = {fitted:.4}", cells.len()),
        result: json!({ "rows": rows, "transfers": transfers, "fitted_k": fitted }),
        table,
    })
}

fn separation(a: &SeparationArgs, seed: &Seed) -> anyhow::Result<Report> {
    let c = run_separation(a.n, SeparationWorld::Trapdoor, a.trials, &seed.derive("trapdoor"))?;
    let r = run_separation(a.n, SeparationWorld::Random, a.trials, &seed.derive("random"))?;
    let q = (-(a.n as f64)).exp2();
    let limit = q + 3.0 * (q * (1.0 - q) / a.trials as f64).sqrt();
    let sweep = a
        .queries
        .iter()
        .map(|&t| trapdoor_distinguish(a.n, t, a.trials, &seed.derive("distinguish")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&[
        "world",
        "n",
        "trials",
        "successes",
        "rate",
        "std_error",
        "advice_bits",
        "online_queries",
    ]);
    for rep in [&c, &r] {
        table.push([
            to_value(&rep.world)?.as_str().unwrap_or_default().to_string(),
            rep.n.to_string(),
            rep.trials.to_string(),
            rep.successes.to_string(),
            rep.rate.to_string(),
            rep.std_error.to_string(),
            rep.advice_bits.to_string(),
            rep.online_queries.to_string(),
        ]);
    }
    Ok(Report {
        passed: c.rate == 1.0 && c.online_queries == 0 && r.rate <= limit,
        summary: format!("trapdoor world {:.4}, random world {:.2e} (limit {limit:.2e})", c.rate, r.rate),
        result: json!({ "trapdoor": c, "random": r, "random_limit": limit, "distinguisher": sweep }),
        table,
    })
}

fn truncation(a: &TruncationArgs, seed: &Seed) -> anyhow::Result<Report> {
    let grid: Vec<u64> = if a.q.is_empty() {
        let birthday = (a.n + a.m) / 2;
        (0..=7u32).rev().filter(|&j| j < birthday).map(|j| 1u64 << (birthday - j)).collect()
    } else {
        a.q.clone()
    };
    let points = truncation_advantage_curve(a.n, a.m, &grid, a.trials, seed)?;
    let mut table = Table::new(&[
        "q",
        "trials",
        "p_permutation",
        "p_function",
        "advantage",
        "std_error",
        "collision_threshold",
    ]);
    for pt in &points {
        table.push([
            pt.q.to_string(),
            pt.trials.to_string(),
            pt.p_permutation.to_string(),
            pt.p_function.to_string(),
            pt.advantage.to_string(),
            pt.std_error.to_string(),
            pt.collision_threshold.to_string(),
        ]);
    }
    Ok(Report {
        passed: true,
        summary: format!("{} points", points.len()),
        result: json!({ "points": points }),
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Format;

    fn config(experiment: Experiment) -> RunConfig {
        RunConfig { experiment, seed: 0, format: Format::Json, output: None }
    }

    #[test]
    fn defaults_validate() {
        for e in [
            Experiment::Verify(Default::default()),
            Experiment::CosetCensus(Default::default()),
            Experiment::Indiff(Default::default()),
            Experiment::RemoveSr(Default::default()),
            Experiment::Tradeoff(Default::default()),
            Experiment::Separation(Default::default()),
            Experiment::TruncationCurve(Default::default()),
        ] {
            assert_eq!(validate(&config(e.clone())), Ok(()), "{}", e.id());
        }
    }

    #[test]
    fn enumeration_space_is_bounded() {
        let a = RemoveSrArgs { r: 3, c: 3, ..Default::default() };
        let err = validate(&config(Experiment::RemoveSr(a))).unwrap_err();
        assert!(err.contains("r*2^r"), "{err}");
    }

    #[test]
    fn default_truncation_grid_ends_at_the_birthday_bound() {
        let a = TruncationArgs { n: 12, m: 6, trials: 50, ..Default::default() };
        let report = truncation(&a, &Seed::from_u64(1)).unwrap();
        let q: Vec<&str> = report.table.rows.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(q, ["4", "8", "16", "32", "64", "128", "256", "512"]);
    }
}
