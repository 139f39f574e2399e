//! Exact laws, total variation, chi-square uniformity and the
//! truncated-permutation advantage curve.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bitdomain::{FunctionTable, PermutationTable, Seed, SpongeParams};
use crate::sponge::sponge_truth_table;
use crate::symsim::symmetrize_with;
use crate::young::{factorial_u64, next_permutation, nth_permutation, permutation_rank, YoungSubgroup};
use crate::{Error, Result};

/// Float weights must sum to one within this.
pub const FLOAT_MASS_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

/// A law on a finite support of integer labels (function codes,
/// permutation ranks, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    support: Vec<u64>,
    weights: Weights,
}

impl Distribution {
    pub fn exact(support: Vec<u64>, weights: Vec<BigRational>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::Parameter("support and weights differ in length".into()));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::Parameter("negative weight".into()));
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Distribution { support, weights: Weights::Exact(weights) })
    }

    pub fn float(support: Vec<u64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::Parameter("support and weights differ in length".into()));
        }
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::Parameter("negative or NaN weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > FLOAT_MASS_TOLERANCE {
            return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Distribution { support, weights: Weights::Float(weights) })
    }

    /// Exact law from integer counts over `support`.
    pub fn from_counts(support: Vec<u64>, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Parameter("no mass".into()));
        }
        let weights =
            counts.iter().map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total))).collect();
        Distribution::exact(support, weights)
    }

    pub fn uniform_exact(support: Vec<u64>) -> Result<Self> {
        let counts = vec![1u64; support.len()];
        Distribution::from_counts(support, &counts)
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.weights, Weights::Exact(_))
    }

    /// Weight of the label `x`, zero when absent.
    pub fn weight_of(&self, x: u64) -> f64 {
        match self.support.iter().position(|&s| s == x) {
            None => 0.0,
            Some(i) => match &self.weights {
                Weights::Exact(w) => w[i].to_f64().unwrap_or(f64::NAN),
                Weights::Float(w) => w[i],
            },
        }
    }

    pub fn exact_weight_of(&self, x: u64) -> Option<BigRational> {
        let Weights::Exact(w) = &self.weights else {
            return None;
        };
        Some(self.support.iter().position(|&s| s == x).map_or_else(BigRational::zero, |i| w[i].clone()))
    }

    pub fn float_weights(&self) -> Vec<f64> {
        match &self.weights {
            Weights::Exact(w) => w.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            Weights::Float(w) => w.clone(),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Distribution", 2)?;
        st.serialize_field("support", &self.support)?;
        match &self.weights {
            Weights::Exact(w) => {
                let text: Vec<String> = w.iter().map(|v| format!("{}/{}", v.numer(), v.denom())).collect();
                st.serialize_field("weights", &text)?;
            }
            Weights::Float(w) => st.serialize_field("weights", w)?,
        }
        st.end()
    }
}

fn check_supports(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.support != q.support {
        return Err(Error::Parameter("distributions have different supports".into()));
    }
    Ok(())
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_supports(p, q)?;
    if p.is_exact() && q.is_exact() {
        return tv_distance_exact(p, q).map(|v| v.to_f64().unwrap_or(f64::NAN));
    }
    let (a, b) = (p.float_weights(), q.float_weights());
    Ok(0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

pub fn tv_distance_exact(p: &Distribution, q: &Distribution) -> Result<BigRational> {
    check_supports(p, q)?;
    match (&p.weights, &q.weights) {
        (Weights::Exact(a), Weights::Exact(b)) => {
            let sum: BigRational = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            Ok(sum / BigRational::from_integer(BigInt::from(2)))
        }
        _ => Err(Error::Parameter("exact distance needs exact weights".into())),
    }
}

fn function_codes(params: &SpongeParams) -> Result<u64> {
    let bits = params.r() as u64 * params.rate_size() as u64;
    if bits > 20 {
        return Err(Error::Parameter(format!("{bits}-bit function codes are too many to enumerate")));
    }
    Ok(1u64 << bits)
}

/// Labels `0..N!` of a permutation support, applied in parallel chunks.
fn for_each_permutation_chunked<T, F, M>(points: usize, init: T, visit: F, merge: M) -> T
where
    T: Send + Clone + Sync,
    F: Fn(&mut T, &[u32]) + Sync,
    M: Fn(T, T) -> T + Sync + Send,
{
    let total = factorial_u64(points);
    let chunk = 720u64.min(total);
    (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut local = init.clone();
            let start = c * chunk;
            let mut perm = nth_permutation(points, start);
            for _ in start..(start + chunk).min(total) {
                visit(&mut local, &perm);
                next_permutation(&mut perm);
            }
            local
        })
        .reduce(|| init.clone(), merge)
}

/// Exact law of the truth table of `Sp^φ` for uniform `φ`, labelled by
/// function code. Enumerates all of `S_{2^n}`.
pub fn sponge_truthtable_law(params: SpongeParams) -> Result<Distribution> {
    params.ensure_enumeration_mode()?;
    let codes = function_codes(&params)?;
    let points = params.domain_size();
    let counts = for_each_permutation_chunked(
        points,
        vec![0u64; codes as usize],
        |acc, perm| {
            let code = (0..params.rate_size())
                .map(|x| (perm[params.absorb(x as u32) as usize] >> params.c()) as u64)
                .enumerate()
                .fold(0u64, |code, (x, v)| code | (v << (params.r() as usize * x)));
            acc[code as usize] += 1;
        },
        add_counts,
    );
    Distribution::from_counts((0..codes).collect(), &counts)
}

/// Uniform law on all `2^{r·2^r}` functions, labelled by code.
pub fn uniform_function_law(params: SpongeParams) -> Result<Distribution> {
    Distribution::uniform_exact((0..function_codes(&params)?).collect())
}

/// Uniform law on `S_{2^n}`, labelled by lexicographic rank.
pub fn uniform_permutation_law(params: SpongeParams) -> Result<Distribution> {
    params.ensure_enumeration_mode()?;
    Distribution::uniform_exact((0..factorial_u64(params.domain_size())).collect())
}

/// Exact law of `ω ∘ π_f ∘ σ` for uniform `f`, `ω ∈ H`, `σ ∈ K`, over
/// permutation ranks. Enumerates every triple.
pub fn symmetrized_permutation_law(params: SpongeParams) -> Result<Distribution> {
    params.ensure_enumeration_mode()?;
    let codes = function_codes(&params)?;
    let h = YoungSubgroup::h(params).elements()?;
    let k = YoungSubgroup::k(params).elements()?;
    let total = factorial_u64(params.domain_size());
    let counts = (0..codes)
        .into_par_iter()
        .map(|code| -> Result<Vec<u64>> {
            let f = FunctionTable::from_code(params, code)?;
            let mut counts = vec![0u64; total as usize];
            for omega in &h {
                for sigma in &k {
                    let phi = symmetrize_with(&f, sigma, omega)?;
                    counts[permutation_rank(phi.forward_entries()) as usize] += 1;
                }
            }
            Ok(counts)
        })
        .try_reduce(|| vec![0u64; total as usize], |a, b| Ok(add_counts(a, b)))?;
    Distribution::from_counts((0..total).collect(), &counts)
}

/// Exact law of `Sp` applied to a law on permutations given by rank.
pub fn pushforward_to_sponge(params: SpongeParams, law: &Distribution) -> Result<Distribution> {
    let Weights::Exact(w) = law.weights() else {
        return Err(Error::Parameter("pushforward needs exact weights".into()));
    };
    let codes = function_codes(&params)?;
    let mut out = vec![BigRational::zero(); codes as usize];
    for (&rank, weight) in law.support().iter().zip(w) {
        let phi = PermutationTable::from_forward(params.n(), nth_permutation(params.domain_size(), rank))?;
        let code = sponge_truth_table(&phi, &params).code().expect("small code");
        out[code as usize] += weight;
    }
    Distribution::exact((0..codes).collect(), out)
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Chi-square goodness-of-fit p-value of `samples` (values in
/// `0..support`) against the uniform law.
pub fn chi_square_uniformity(samples: &[usize], support: usize) -> Result<f64> {
    let mut counts = vec![0u64; support];
    for &s in samples {
        *counts
            .get_mut(s)
            .ok_or_else(|| Error::Parameter(format!("sample {s} outside a support of {support}")))? += 1;
    }
    chi_square_from_counts(&counts)
}

pub fn chi_square_from_counts(counts: &[u64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::Parameter("chi-square needs at least two cells".into()));
    }
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    if expected < 5.0 {
        return Err(Error::Parameter(format!("expected count per cell is {expected:.2}, below 5")));
    }
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64)
        .map_err(|e| Error::Parameter(format!("chi-square: {e}")))?;
    Ok(dist.sf(stat))
}

/// One point of the truncation curve.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationPoint {
    pub q: u64,
    pub trials: u64,
    /// Pr[output 1 | truncated permutation].
    pub p_permutation: f64,
    /// Pr[output 1 | random function].
    pub p_function: f64,
    pub advantage: f64,
    /// Standard error of `advantage`.
    pub std_error: f64,
    pub collision_threshold: f64,
}

/// Expected collisions among `q` outputs: `(random function, truncated permutation)`.
pub fn expected_collisions(n: u32, m: u32, q: u64) -> (f64, f64) {
    let pairs = q as f64 * (q as f64 - 1.0) / 2.0;
    let random = pairs / 2f64.powi(m as i32);
    let truncated = pairs * (2f64.powi(n as i32 - m as i32) - 1.0) / (2f64.powi(n as i32) - 1.0);
    (random, truncated)
}

/// Collision-count distinguisher between a random `m`-bit function and the
/// top `m` bits of a random `n`-bit permutation, queried on `q` distinct
/// points. It answers "permutation" when the number of colliding output
/// pairs falls below the midpoint of the two expectations.
pub fn truncation_advantage_curve(
    n: u32,
    m: u32,
    q_grid: &[u64],
    trials: u64,
    seed: &Seed,
) -> Result<Vec<TruncationPoint>> {
    if n > 20 || m == 0 || m > n {
        return Err(Error::Parameter(format!(
            "truncation curve needs 1 <= m <= n <= 20 (got n = {n}, m = {m})"
        )));
    }
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    q_grid
        .iter()
        .map(|&q| {
            if q > 1u64 << n {
                return Err(Error::Parameter(format!("q = {q} exceeds 2^{n}")));
            }
            let (e_rand, e_perm) = expected_collisions(n, m, q);
            let threshold = (e_rand + e_perm) / 2.0;
            let qseed = seed.derive_index("truncation-q", q);
            let (hits_perm, hits_func) = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = qseed.derive_index("trial", t).rng();
                    let perm = truncated_collisions(&mut rng, n, m, q, true) < threshold;
                    let func = truncated_collisions(&mut rng, n, m, q, false) < threshold;
                    (perm as u64, func as u64)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            let pp = hits_perm as f64 / trials as f64;
            let pf = hits_func as f64 / trials as f64;
            Ok(TruncationPoint {
                q,
                trials,
                p_permutation: pp,
                p_function: pf,
                advantage: pp - pf,
                std_error: ((pp * (1.0 - pp) + pf * (1.0 - pf)) / trials as f64).sqrt(),
                collision_threshold: threshold,
            })
        })
        .collect()
}

fn truncated_collisions(rng: &mut impl RngCore, n: u32, m: u32, q: u64, permutation: bool) -> f64 {
    let mut buckets = vec![0u32; 1usize << m];
    let mask = (1u32 << n) - 1;
    if permutation {
        // q distinct n-bit images, i.e. q fresh points of a uniform permutation
        let mut used = vec![0u64; (1usize << n).div_ceil(64)];
        for _ in 0..q {
            let v = loop {
                let v = rng.next_u32() & mask;
                let (word, bit) = ((v >> 6) as usize, v & 63);
                if used[word] >> bit & 1 == 0 {
                    used[word] |= 1 << bit;
                    break v;
                }
            };
            buckets[(v >> (n - m)) as usize] += 1;
        }
    } else {
        let mmask = ((1u64 << m) - 1) as u32;
        for _ in 0..q {
            buckets[(rng.next_u32() & mmask) as usize] += 1;
        }
    }
    buckets.iter().map(|&b| b as f64 * (b as f64 - 1.0) / 2.0).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(r: u32, c: u32) -> SpongeParams {
        SpongeParams::new(r, c).unwrap()
    }

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn tv_basics() {
        let u = Distribution::uniform_exact(vec![0, 1]).unwrap();
        let point = Distribution::from_counts(vec![0, 1], &[1, 0]).unwrap();
        let other = Distribution::from_counts(vec![0, 1], &[0, 1]).unwrap();
        assert_eq!(tv_distance_exact(&u, &u).unwrap(), BigRational::zero());
        assert_eq!(tv_distance_exact(&point, &other).unwrap(), BigRational::one());
        assert_eq!(tv_distance_exact(&u, &point).unwrap(), rat(1, 2));
        assert_eq!(tv_distance(&u, &point).unwrap(), 0.5);
        let elsewhere = Distribution::uniform_exact(vec![0, 2]).unwrap();
        assert!(tv_distance(&u, &elsewhere).is_err());
    }

    #[test]
    fn weights_must_be_a_law() {
        assert!(Distribution::exact(vec![0, 1], vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(Distribution::exact(vec![0, 1], vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(Distribution::float(vec![0, 1], vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(Distribution::float(vec![0, 1], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn sponge_law_at_four_points() {
        let params = p(1, 1);
        let law = sponge_truthtable_law(params).unwrap();
        // code = f(0) + 2 f(1): const0 = 0, id = 2, not = 1, const1 = 3
        assert_eq!(law.exact_weight_of(2).unwrap(), rat(8, 24));
        assert_eq!(law.exact_weight_of(1).unwrap(), rat(8, 24));
        assert_eq!(law.exact_weight_of(0).unwrap(), rat(4, 24));
        assert_eq!(law.exact_weight_of(3).unwrap(), rat(4, 24));
        let u = uniform_function_law(params).unwrap();
        assert_eq!(tv_distance_exact(&law, &u).unwrap(), rat(1, 6));
    }

    #[test]
    fn sponge_law_at_eight_points() {
        // Pr[f(0) = a, f(1) = b] for a uniform φ on 8 points: the two
        // images φ(000), φ(100) are a uniform ordered pair of distinct
        // points, and each half holds 4 of them: (4·4)/(8·7) for a ≠ b,
        // (4·3)/(8·7) for a = b.
        let params = p(1, 2);
        let law = sponge_truthtable_law(params).unwrap();
        for code in 0..4u64 {
            let (a, b) = (code & 1, code >> 1);
            let expect = if a == b { rat(12, 56) } else { rat(16, 56) };
            assert_eq!(law.exact_weight_of(code).unwrap(), expect);
        }
        let u = uniform_function_law(params).unwrap();
        assert_eq!(tv_distance_exact(&law, &u).unwrap(), rat(1, 14));
    }

    #[test]
    fn symmetrized_law_matches_coset_formula() {
        // Pr[φ] = Pr[f = Sp^φ] / |coset of φ| = 2^{-r 2^r} / |{ψ : Sp^ψ = Sp^φ}|
        let params = p(1, 1);
        let law = symmetrized_permutation_law(params).unwrap();
        let sp = sponge_truthtable_law(params).unwrap();
        for rank in 0..24u64 {
            let phi = PermutationTable::from_forward(2, nth_permutation(4, rank)).unwrap();
            let code = sponge_truth_table(&phi, &params).code().unwrap();
            let coset = sp.exact_weight_of(code).unwrap() * BigRational::from_integer(24.into());
            let expect = rat(1, 4) / coset;
            assert_eq!(law.exact_weight_of(rank).unwrap(), expect);
        }
        let pushed = pushforward_to_sponge(params, &law).unwrap();
        assert_eq!(pushed, uniform_function_law(params).unwrap());
    }

    #[test]
    fn enumeration_order_does_not_change_exact_law() {
        let params = p(1, 1);
        let law = sponge_truthtable_law(params).unwrap();
        let mut counts = vec![0u64; 4];
        for rank in (0..24u64).rev() {
            let phi = PermutationTable::from_forward(2, nth_permutation(4, rank)).unwrap();
            counts[sponge_truth_table(&phi, &params).code().unwrap() as usize] += 1;
        }
        assert_eq!(Distribution::from_counts((0..4).collect(), &counts).unwrap(), law);
    }

    #[test]
    fn chi_square_extremes() {
        let balanced: Vec<usize> = (0..2400).map(|i| i % 24).collect();
        assert!(chi_square_uniformity(&balanced, 24).unwrap() > 0.999);
        let lumped = vec![3usize; 1000];
        assert!(chi_square_uniformity(&lumped, 24).unwrap() < 1e-9);
        assert!(chi_square_uniformity(&[0, 1], 2).is_err());
        assert!(chi_square_uniformity(&[5; 100], 2).is_err());
    }

    #[test]
    fn truncation_curve_small() {
        let curve = truncation_advantage_curve(12, 6, &[0, 1 << 9], 2000, &Seed::from_u64(1)).unwrap();
        assert_eq!(curve[0].advantage, 0.0);
        assert!(curve[1].advantage > 0.1, "{:?}", curve[1]);
        assert!(truncation_advantage_curve(21, 6, &[1], 1, &Seed::from_u64(1)).is_err());
    }

    #[test]
    fn expected_collision_formulas() {
        let (r, p) = expected_collisions(16, 8, 1 << 12);
        assert!((r - 32760.0).abs() < 1e-6);
        assert!((p - 8386560.0 * 255.0 / 65535.0).abs() < 1e-6);
    }

    fn arb_law(len: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(1u64..20, len)
            .prop_map(move |c| Distribution::from_counts((0..len as u64).collect(), &c).unwrap())
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(a in arb_law(5), b in arb_law(5), c in arb_law(5)) {
            let ab = tv_distance_exact(&a, &b).unwrap();
            let ba = tv_distance_exact(&b, &a).unwrap();
            let bc = tv_distance_exact(&b, &c).unwrap();
            let ac = tv_distance_exact(&a, &c).unwrap();
            prop_assert_eq!(&ab, &ba);
            prop_assert!(ac <= ab.clone() + bc);
            prop_assert!(ab >= BigRational::zero() && ab <= BigRational::one());
        }
    }
}
