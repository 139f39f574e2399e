//! Fixed-width bitstrings, sponge parameters, seeds and dense truth tables.
//!
//! Bit order: the "first" `r` bits of an `n`-bit word are its most
//! significant bits, so `x ‖ 0^c` is `x << c`.

use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Largest `n` accepted anywhere.
pub const MAX_BITS: u32 = 30;
/// Largest `n` for which dense permutation tables are materialised.
pub const TABLE_MAX_BITS: u32 = 28;
/// Largest domain size `2^n` for exhaustive enumeration of `S_{2^n}`.
pub const ENUMERATION_MAX_POINTS: usize = 8;
/// Above this width permutation inverses are spot-checked instead of
/// checked exhaustively.
const EXHAUSTIVE_CHECK_BITS: u32 = 20;

const FUNCTION_MAGIC: &[u8; 8] = b"SPLFUNC1";
const PERMUTATION_MAGIC: &[u8; 8] = b"SPLPERM1";

/// Rate and capacity of a one-round sponge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SpongeParams {
    r: u32,
    c: u32,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    r: u32,
    c: u32,
}

impl TryFrom<RawParams> for SpongeParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        SpongeParams::new(raw.r, raw.c)
    }
}

impl From<SpongeParams> for RawParams {
    fn from(p: SpongeParams) -> Self {
        RawParams { r: p.r, c: p.c }
    }
}

impl SpongeParams {
    pub fn new(r: u32, c: u32) -> Result<Self> {
        if r == 0 || c == 0 {
            return Err(Error::Parameter(format!(
                "rate and capacity must be positive (got r = {r}, c = {c})"
            )));
        }
        if r > c {
            return Err(Error::UnsupportedRegime { r, c });
        }
        if r + c > MAX_BITS {
            return Err(Error::Parameter(format!("n = r + c = {} exceeds the {MAX_BITS}-bit limit", r + c)));
        }
        Ok(SpongeParams { r, c })
    }

    #[inline]
    pub fn r(&self) -> u32 {
        self.r
    }

    #[inline]
    pub fn c(&self) -> u32 {
        self.c
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.r + self.c
    }

    #[inline]
    pub fn lambda(&self) -> u32 {
        self.r.min(self.c)
    }

    /// Width of the middle segment `g` in `x ‖ g ‖ y`, i.e. `n - 2r`.
    #[inline]
    pub fn middle_bits(&self) -> u32 {
        self.c - self.r
    }

    #[inline]
    pub fn domain_size(&self) -> usize {
        1usize << self.n()
    }

    #[inline]
    pub fn rate_size(&self) -> usize {
        1usize << self.r
    }

    #[inline]
    pub fn capacity_size(&self) -> usize {
        1usize << self.c
    }

    #[inline]
    pub fn rate_mask(&self) -> u32 {
        (1u32 << self.r) - 1
    }

    #[inline]
    pub fn capacity_mask(&self) -> u32 {
        (1u32 << self.c) - 1
    }

    /// Top `r` bits of an `n`-bit word.
    #[inline]
    pub fn top(&self, w: u32) -> u32 {
        w >> self.c
    }

    /// Bottom `r` bits of an `n`-bit word.
    #[inline]
    pub fn bottom(&self, w: u32) -> u32 {
        w & self.rate_mask()
    }

    #[inline]
    pub fn middle(&self, w: u32) -> u32 {
        (w >> self.r) & ((1u32 << self.middle_bits()) - 1)
    }

    /// `x ‖ g ‖ y` with widths `(r, n - 2r, r)`.
    #[inline]
    pub fn join(&self, x: u32, g: u32, y: u32) -> u32 {
        (x << self.c) | (g << self.r) | y
    }

    /// `x ‖ 0^c`.
    #[inline]
    pub fn absorb(&self, x: u32) -> u32 {
        x << self.c
    }

    pub fn ensure_table_mode(&self) -> Result<()> {
        ensure_table_bits(self.n())
    }

    pub fn ensure_enumeration_mode(&self) -> Result<()> {
        ensure_enumeration_bits(self.n())
    }
}

impl fmt::Display for SpongeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r={}, c={})", self.r, self.c)
    }
}

pub fn ensure_table_bits(bits: u32) -> Result<()> {
    if bits > TABLE_MAX_BITS {
        return Err(Error::Parameter(format!(
            "{bits}-bit tables exceed the {TABLE_MAX_BITS}-bit table-mode limit"
        )));
    }
    Ok(())
}

pub fn ensure_enumeration_bits(bits: u32) -> Result<()> {
    if bits >= usize::BITS || (1usize << bits) > ENUMERATION_MAX_POINTS {
        return Err(Error::Parameter(format!(
            "exhaustive enumeration needs 2^n <= {ENUMERATION_MAX_POINTS} (got n = {bits})"
        )));
    }
    Ok(())
}

/// A bitstring of declared width, stored in the low bits of a `u32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    value: u32,
    width: u32,
}

impl Word {
    pub fn new(value: u32, width: u32) -> Result<Self> {
        if width > 32 {
            return Err(Error::Parameter(format!("width {width} exceeds 32 bits")));
        }
        if width < 32 && value >> width != 0 {
            return Err(Error::Parameter(format!("value {value:#x} does not fit in {width} bits")));
        }
        Ok(Word { value, width })
    }

    /// The empty word `ε`.
    pub const fn empty() -> Self {
        Word { value: 0, width: 0 }
    }

    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    /// `self ‖ low`, with `self` in the high bits.
    pub fn concat(&self, low: Word) -> Result<Word> {
        let width = self.width + low.width;
        if width > 32 {
            return Err(Error::Parameter(format!("concatenation width {width} exceeds 32 bits")));
        }
        let high = if low.width == 32 { 0 } else { self.value << low.width };
        Word::new(high | low.value, width)
    }

    pub fn xor(&self, other: Word) -> Result<Word> {
        if self.width != other.width {
            return Err(Error::Parameter(format!(
                "xor of mismatched widths {} and {}",
                self.width, other.width
            )));
        }
        Ok(Word { value: self.value ^ other.value, width: self.width })
    }

    /// Splits into `(high, low)` where `high` has `high_width` bits.
    pub fn split_at(&self, high_width: u32) -> Result<(Word, Word)> {
        if high_width > self.width {
            return Err(Error::Parameter(format!(
                "cannot take {high_width} high bits of a {}-bit word",
                self.width
            )));
        }
        let low_width = self.width - high_width;
        let low_mask = if low_width == 32 { u32::MAX } else { (1u32 << low_width) - 1 };
        let high = if low_width == 32 { 0 } else { self.value >> low_width };
        Ok((Word { value: high, width: high_width }, Word { value: self.value & low_mask, width: low_width }))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 0 {
            return write!(f, "ε");
        }
        write!(f, "{:0width$b}", self.value, width = self.width as usize)
    }
}

/// Decomposes an `n`-bit word into `(x, g, y)` of widths `(r, n - 2r, r)`.
pub fn split3(w: Word, params: &SpongeParams) -> Result<(Word, Word, Word)> {
    if w.width() != params.n() {
        return Err(Error::Parameter(format!(
            "split3 expects an {}-bit word, got {} bits",
            params.n(),
            w.width()
        )));
    }
    let (x, rest) = w.split_at(params.r())?;
    let (g, y) = rest.split_at(params.middle_bits())?;
    Ok((x, g, y))
}

/// Inverse of [`split3`].
pub fn join3(x: Word, g: Word, y: Word, params: &SpongeParams) -> Result<Word> {
    if x.width() != params.r() || y.width() != params.r() || g.width() != params.middle_bits() {
        return Err(Error::Parameter(format!(
            "join3 expects widths ({}, {}, {}), got ({}, {}, {})",
            params.r(),
            params.middle_bits(),
            params.r(),
            x.width(),
            g.width(),
            y.width()
        )));
    }
    x.concat(g)?.concat(y)
}

/// 256-bit experiment seed. Every logical role (f, σ, ω, adversary coins,
/// trial index, ...) gets its own child seed through [`Seed::derive`].
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; 32]);

impl Seed {
    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    pub fn from_u64(value: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&value.to_le_bytes());
        Seed(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Domain-separated child seed.
    pub fn derive(&self, label: &str) -> Seed {
        let mut h = Sha256::new();
        h.update(b"spongelab.seed.v1");
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Seed(h.finalize().into())
    }

    /// Child seed for the `index`-th member of a labelled family.
    pub fn derive_index(&self, label: &str, index: u64) -> Seed {
        let mut h = Sha256::new();
        h.update(b"spongelab.seed.v1/indexed");
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Seed(h.finalize().into())
    }

    /// Counter-based generator keyed by this seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", &self.to_hex()[..16])
    }
}

impl Serialize for Seed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

/// A uniformly shuffled arrangement of `0..size`, fully determined by `seed`.
///
/// This is the single block-shuffle primitive: dense Young-subgroup samples
/// and the lazy per-block evaluation in the simulator both go through it, so
/// they agree value for value.
pub fn shuffled_positions(seed: &Seed, size: usize) -> Vec<u32> {
    let mut positions: Vec<u32> = (0..size as u32).collect();
    positions.shuffle(&mut seed.rng());
    positions
}

/// Random function `{0,1}^in_bits → {0,1}^out_bits` evaluated lazily from the
/// keystream: entry `x` is keystream word `x` masked to `out_bits`. It equals
/// the dense table produced by [`sample_function`] from the same seed.
#[derive(Clone, Debug)]
pub struct KeystreamFunction {
    seed: Seed,
    in_bits: u32,
    out_bits: u32,
}

impl KeystreamFunction {
    pub fn new(seed: Seed, in_bits: u32, out_bits: u32) -> Result<Self> {
        if in_bits > MAX_BITS || out_bits > 32 {
            return Err(Error::Parameter(format!(
                "keystream function widths ({in_bits}, {out_bits}) out of range"
            )));
        }
        Ok(KeystreamFunction { seed, in_bits, out_bits })
    }

    pub fn in_bits(&self) -> u32 {
        self.in_bits
    }

    pub fn out_bits(&self) -> u32 {
        self.out_bits
    }

    pub fn eval(&self, x: u32) -> u32 {
        debug_assert!(self.in_bits == 32 || x >> self.in_bits == 0);
        let mut rng = self.seed.rng();
        rng.set_word_pos(x as u128);
        mask_to(rng.next_u32(), self.out_bits)
    }
}

#[inline]
fn mask_to(v: u32, bits: u32) -> u32 {
    if bits >= 32 {
        v
    } else {
        v & ((1u32 << bits) - 1)
    }
}

/// Dense truth table of `f : {0,1}^r → {0,1}^r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionTable {
    params: SpongeParams,
    table: Vec<u32>,
}

impl FunctionTable {
    pub fn new(params: SpongeParams, table: Vec<u32>) -> Result<Self> {
        if table.len() != params.rate_size() {
            return Err(Error::Parameter(format!(
                "function table needs {} entries, got {}",
                params.rate_size(),
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&v| v > params.rate_mask()) {
            return Err(Error::Parameter(format!("entry {bad} does not fit in r = {} bits", params.r())));
        }
        Ok(FunctionTable { params, table })
    }

    /// The function with truth-table code `code = Σ f(x)·2^{r·x}`.
    pub fn from_code(params: SpongeParams, code: u64) -> Result<Self> {
        let r = params.r();
        if (r as usize) * params.rate_size() > 64 {
            return Err(Error::Parameter(format!("truth-table codes need r·2^r <= 64 (r = {r})")));
        }
        let table = (0..params.rate_size())
            .map(|x| ((code >> (r as usize * x)) & params.rate_mask() as u64) as u32)
            .collect();
        FunctionTable::new(params, table)
    }

    pub fn constant(params: SpongeParams, value: u32) -> Result<Self> {
        FunctionTable::new(params, vec![value; params.rate_size()])
    }

    pub fn identity(params: SpongeParams) -> Self {
        FunctionTable { params, table: (0..params.rate_size() as u32).collect() }
    }

    pub fn params(&self) -> SpongeParams {
        self.params
    }

    #[inline]
    pub fn get(&self, x: u32) -> u32 {
        self.table[x as usize]
    }

    pub fn entries(&self) -> &[u32] {
        &self.table
    }

    /// Truth-table code `Σ f(x)·2^{r·x}`, defined when `r·2^r <= 64`.
    pub fn code(&self) -> Option<u64> {
        let r = self.params.r() as usize;
        if r * self.table.len() > 64 {
            return None;
        }
        Some(self.table.iter().enumerate().fold(0u64, |acc, (x, &v)| acc | ((v as u64) << (r * x))))
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(FUNCTION_MAGIC)?;
        out.write_all(&self.params.r().to_le_bytes())?;
        out.write_all(&self.params.c().to_le_bytes())?;
        for v in &self.table {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let (r, c) = read_header(&mut input, FUNCTION_MAGIC)?;
        let params = SpongeParams::new(r, c)?;
        let table = read_entries(&mut input, params.rate_size())?;
        FunctionTable::new(params, table)
    }
}

/// Draws every entry uniformly and independently: entry `x` is keystream
/// word `x` masked to `r` bits.
pub fn sample_function(params: SpongeParams, seed: &Seed) -> FunctionTable {
    let mut rng = seed.rng();
    let table = (0..params.rate_size()).map(|_| mask_to(rng.next_u32(), params.r())).collect();
    FunctionTable { params, table }
}

/// Dense permutation of `{0,1}^bits` with its inverse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PermutationTable {
    bits: u32,
    forward: Vec<u32>,
    #[serde(skip)]
    backward: Vec<u32>,
}

impl PermutationTable {
    /// Builds the table from its forward map, verifying bijectivity.
    pub fn from_forward(bits: u32, forward: Vec<u32>) -> Result<Self> {
        ensure_table_bits(bits)?;
        let size = 1usize << bits;
        if forward.len() != size {
            return Err(Error::Parameter(format!(
                "permutation on {bits} bits needs {size} entries, got {}",
                forward.len()
            )));
        }
        let mut backward = vec![u32::MAX; size];
        for (i, &v) in forward.iter().enumerate() {
            let slot = backward
                .get_mut(v as usize)
                .ok_or_else(|| Error::Parameter(format!("entry {v} outside the {bits}-bit domain")))?;
            if *slot != u32::MAX {
                return Err(Error::Parameter(format!("value {v} appears twice")));
            }
            *slot = i as u32;
        }
        let table = PermutationTable { bits, forward, backward };
        table.check_inverse()?;
        Ok(table)
    }

    pub fn identity(bits: u32) -> Self {
        let forward: Vec<u32> = (0..1u32 << bits).collect();
        PermutationTable { bits, backward: forward.clone(), forward }
    }

    /// `backward ∘ forward = id`: exhaustive up to 20 bits, 2^12 seeded
    /// spot checks above.
    fn check_inverse(&self) -> Result<()> {
        let ok = if self.bits <= EXHAUSTIVE_CHECK_BITS {
            (0..self.forward.len()).all(|i| self.backward[self.forward[i] as usize] as usize == i)
        } else {
            let mut rng = Seed::from_u64(self.bits as u64).derive("spot-check").rng();
            (0..1 << 12).all(|_| {
                let i = mask_to(rng.next_u32(), self.bits) as usize;
                self.backward[self.forward[i] as usize] as usize == i
            })
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("permutation inverse check failed".into()))
        }
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    #[inline]
    pub fn forward(&self, w: u32) -> u32 {
        self.forward[w as usize]
    }

    #[inline]
    pub fn backward(&self, w: u32) -> u32 {
        self.backward[w as usize]
    }

    pub fn forward_entries(&self) -> &[u32] {
        &self.forward
    }

    pub fn backward_entries(&self) -> &[u32] {
        &self.backward
    }

    /// `self ∘ inner`, i.e. `w ↦ self(inner(w))`.
    pub fn compose(&self, inner: &PermutationTable) -> Result<PermutationTable> {
        if self.bits != inner.bits {
            return Err(Error::Parameter(format!(
                "cannot compose {}-bit and {}-bit permutations",
                self.bits, inner.bits
            )));
        }
        let forward: Vec<u32> = inner.forward.iter().map(|&v| self.forward[v as usize]).collect();
        let mut backward = vec![0u32; forward.len()];
        for (i, &v) in forward.iter().enumerate() {
            backward[v as usize] = i as u32;
        }
        Ok(PermutationTable { bits: self.bits, forward, backward })
    }

    pub fn inverse(&self) -> PermutationTable {
        PermutationTable { bits: self.bits, forward: self.backward.clone(), backward: self.forward.clone() }
    }

    /// Writes the binary form. `params` records the sponge split, if any;
    /// bare permutations are written with `r = 0, c = bits`.
    pub fn write_binary<W: Write>(&self, params: Option<SpongeParams>, mut out: W) -> Result<()> {
        let (r, c) = match params {
            Some(p) if p.n() == self.bits => (p.r(), p.c()),
            Some(p) => {
                return Err(Error::Parameter(format!(
                    "params {p} do not match a {}-bit permutation",
                    self.bits
                )))
            }
            None => (0, self.bits),
        };
        out.write_all(PERMUTATION_MAGIC)?;
        out.write_all(&r.to_le_bytes())?;
        out.write_all(&c.to_le_bytes())?;
        for v in &self.forward {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<(Self, Option<SpongeParams>)> {
        let (r, c) = read_header(&mut input, PERMUTATION_MAGIC)?;
        let bits = r
            .checked_add(c)
            .filter(|&b| b <= TABLE_MAX_BITS)
            .ok_or_else(|| Error::Format(format!("header widths ({r}, {c}) out of range")))?;
        let params = if r == 0 { None } else { Some(SpongeParams::new(r, c)?) };
        let forward = read_entries(&mut input, 1usize << bits)?;
        Ok((PermutationTable::from_forward(bits, forward)?, params))
    }
}

fn read_header<R: Read>(input: &mut R, magic: &[u8; 8]) -> Result<(u32, u32)> {
    let mut head = [0u8; 16];
    input.read_exact(&mut head)?;
    if &head[..8] != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let r = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
    let c = u32::from_le_bytes(head[12..16].try_into().expect("4 bytes"));
    Ok((r, c))
}

fn read_entries<R: Read>(input: &mut R, count: usize) -> Result<Vec<u32>> {
    let mut bytes = vec![0u8; count * 4];
    input.read_exact(&mut bytes)?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after table".into()));
    }
    Ok(bytes.chunks_exact(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes"))).collect())
}

/// Uniform permutation of `{0,1}^bits` by an unbiased shuffle.
pub fn sample_permutation(bits: u32, seed: &Seed) -> Result<PermutationTable> {
    ensure_table_bits(bits)?;
    PermutationTable::from_forward(bits, shuffled_positions(seed, 1usize << bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: u32, c: u32) -> SpongeParams {
        SpongeParams::new(r, c).unwrap()
    }

    #[test]
    fn split3_examples() {
        let (x, g, y) = split3(Word::new(0b10, 2).unwrap(), &p(1, 1)).unwrap();
        assert_eq!((x.value(), g, y.value()), (1, Word::empty(), 0));

        let (x, g, y) = split3(Word::new(0b101, 3).unwrap(), &p(1, 2)).unwrap();
        assert_eq!((x.value(), g.value(), g.width(), y.value()), (1, 0, 1, 1));

        let (x, g, y) = split3(Word::new(0b1101, 4).unwrap(), &p(2, 2)).unwrap();
        assert_eq!((x.value(), g.width(), y.value()), (0b11, 0, 0b01));
    }

    #[test]
    fn split3_rejects_wrong_width() {
        assert!(matches!(split3(Word::new(1, 3).unwrap(), &p(1, 1)), Err(Error::Parameter(_))));
    }

    #[test]
    fn split3_round_trip_exhaustive() {
        for n in 2..=12u32 {
            for r in 1..=n / 2 {
                let params = p(r, n - r);
                for v in 0..1u32 << n {
                    let w = Word::new(v, n).unwrap();
                    let (x, g, y) = split3(w, &params).unwrap();
                    assert_eq!(join3(x, g, y, &params).unwrap(), w);
                    assert_eq!(params.join(x.value(), g.value(), y.value()), v);
                    assert_eq!(params.top(v), x.value());
                    assert_eq!(params.middle(v), g.value());
                    assert_eq!(params.bottom(v), y.value());
                }
            }
        }
    }

    #[test]
    fn word_checks_widths() {
        assert!(Word::new(4, 2).is_err());
        let a = Word::new(1, 1).unwrap();
        assert!(a.xor(Word::new(1, 2).unwrap()).is_err());
        assert_eq!(a.concat(Word::empty()).unwrap(), a);
        assert_eq!(format!("{}", Word::new(0b0101, 4).unwrap()), "0101");
    }

    #[test]
    fn params_guardrails() {
        assert!(matches!(SpongeParams::new(3, 2), Err(Error::UnsupportedRegime { .. })));
        assert!(SpongeParams::new(0, 2).is_err());
        assert!(SpongeParams::new(15, 16).is_err());
        let params = p(2, 5);
        assert_eq!((params.n(), params.lambda(), params.middle_bits()), (7, 2, 3));
        assert!(p(1, 2).ensure_enumeration_mode().is_ok());
        assert!(p(2, 2).ensure_enumeration_mode().is_err());
        assert!(sample_permutation(29, &Seed::from_u64(0)).is_err());
    }

    #[test]
    fn sample_function_is_deterministic_and_shaped() {
        let params = p(1, 3);
        let s = Seed::from_u64(7);
        let f = sample_function(params, &s);
        assert_eq!(f, sample_function(params, &s));
        assert_eq!(f.entries().len(), 2);
        assert!(f.entries().iter().all(|&v| v < 2));
    }

    #[test]
    fn keystream_function_matches_dense_table() {
        let params = p(6, 6);
        let seed = Seed::from_u64(99);
        let dense = sample_function(params, &seed);
        let lazy = KeystreamFunction::new(seed, 6, 6).unwrap();
        for x in 0..64 {
            assert_eq!(lazy.eval(x), dense.get(x));
        }
    }

    #[test]
    fn sample_function_entry_zero_is_uniform() {
        // 10^5 seeds at r = 1: count of ones is Binomial(10^5, 1/2).
        let params = p(1, 1);
        let trials = 100_000u64;
        let ones: u64 = (0..trials).map(|i| sample_function(params, &Seed::from_u64(i)).get(0) as u64).sum();
        let mean = trials as f64 / 2.0;
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((ones as f64 - mean).abs() <= 3.0 * sigma, "ones = {ones}");
    }

    #[test]
    fn sample_permutation_is_bijective_and_deterministic() {
        for s in 0..50 {
            let perm = sample_permutation(2, &Seed::from_u64(s)).unwrap();
            let mut seen = perm.forward_entries().to_vec();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2, 3]);
        }
        let a = sample_permutation(12, &Seed::from_u64(3)).unwrap();
        let b = sample_permutation(12, &Seed::from_u64(3)).unwrap();
        assert_eq!(a, b);
        for w in 0..a.len() as u32 {
            assert_eq!(a.backward(a.forward(w)), w);
        }
    }

    #[test]
    fn from_forward_rejects_non_bijections() {
        assert!(PermutationTable::from_forward(2, vec![0, 1, 1, 3]).is_err());
        assert!(PermutationTable::from_forward(2, vec![0, 1, 2]).is_err());
        assert!(PermutationTable::from_forward(2, vec![0, 1, 2, 4]).is_err());
    }

    #[test]
    fn compose_and_inverse() {
        let a = sample_permutation(5, &Seed::from_u64(1)).unwrap();
        let b = sample_permutation(5, &Seed::from_u64(2)).unwrap();
        let ab = a.compose(&b).unwrap();
        for w in 0..32 {
            assert_eq!(ab.forward(w), a.forward(b.forward(w)));
        }
        assert_eq!(a.compose(&a.inverse()).unwrap(), PermutationTable::identity(5));
    }

    #[test]
    fn binary_format_layout() {
        let params = p(1, 2);
        let f = FunctionTable::new(params, vec![1, 0]).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"SPLFUNC1");
        assert_eq!(&buf[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&buf[16..], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(FunctionTable::read_binary(&buf[..]).unwrap(), f);

        let perm = sample_permutation(3, &Seed::from_u64(5)).unwrap();
        let mut buf = Vec::new();
        perm.write_binary(Some(params), &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 4);
        let (back, back_params) = PermutationTable::read_binary(&buf[..]).unwrap();
        assert_eq!((back, back_params), (perm.clone(), Some(params)));

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(PermutationTable::read_binary(&bad[..]), Err(Error::Format(_))));
        // a non-bijective payload is rejected on load
        let mut dup = buf;
        dup.copy_within(20..24, 16);
        assert!(PermutationTable::read_binary(&dup[..]).is_err());
    }

    #[test]
    fn json_debug_form() {
        let f = FunctionTable::new(p(1, 1), vec![1, 0]).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"params":{"r":1,"c":1},"table":[1,0]}"#);
        let back: FunctionTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn function_codes() {
        let params = p(1, 1);
        for code in 0..4 {
            assert_eq!(FunctionTable::from_code(params, code).unwrap().code(), Some(code));
        }
    }

    #[test]
    fn seed_derivation_separates_labels() {
        let s = Seed::from_u64(1);
        assert_ne!(s.derive("sigma"), s.derive("omega"));
        assert_ne!(s.derive_index("block", 0), s.derive_index("block", 1));
        assert_eq!(s.derive("f"), s.derive("f"));
    }
}
