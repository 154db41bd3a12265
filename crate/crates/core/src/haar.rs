//! Finite binary words, cylinder step functions, the Haar transform on the
//! binary Cantor set, variations, Lipschitz constants for decreasing modulus
//! sequences, and the weighted tail bounds used by certification.
//!
//! Functions on {0,1}^N that are constant on level-n cylinders are stored as
//! dense vectors of exact rationals, indexed by the lexicographic order of
//! the defining words. The Haar basis h_w = (indicator[w0] - indicator[w1])/2
//! gives a second, equivalent view: a mean value plus one coefficient per
//! word of length < n. Both views convert exactly in both directions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::brick::GaugeSpec;
use crate::magnitude::{LogVal, Magnitude, Round};
use crate::rat::{format_rat, parse_rat, rat_string, rat_vec_string, Rat};
use crate::{Error, Result};

/// Hard cap on step-function levels: values are stored dense (2^level
/// rationals), so this bounds memory, not mathematics.
pub const MAX_LEVEL: u32 = 16;

/// A finite binary word, possibly empty; also the address of the cylinder
/// set of all infinite sequences starting with it. Letters are kept
/// most-significant-first in `bits`, so words of equal length sort
/// lexicographically by their numeric index.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    bits: u64,
    len: u32,
}

impl Word {
    pub const MAX_LEN: u32 = 60;

    pub fn empty() -> Self {
        Word { bits: 0, len: 0 }
    }

    pub fn from_bits(bits: u64, len: u32) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::cap(format!("word length {len} exceeds {}", Self::MAX_LEN)));
        }
        if len < 64 && bits >> len != 0 {
            return Err(Error::invalid(format!(
                "bit pattern {bits:#b} does not fit in {len} letters"
            )));
        }
        Ok(Word { bits, len })
    }

    /// The word of length `len` with lexicographic index `index`.
    pub fn from_index(index: usize, len: u32) -> Result<Self> {
        Word::from_bits(index as u64, len)
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Lexicographic index among words of the same length.
    pub fn index(&self) -> usize {
        self.bits as usize
    }

    /// The i-th letter, 0-based from the start of the word.
    pub fn bit(&self, i: u32) -> u8 {
        assert!(i < self.len, "letter index {i} out of range");
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn push(&self, b: u8) -> Result<Word> {
        assert!(b <= 1, "letters are 0 or 1");
        Word::from_bits(self.bits << 1 | b as u64, self.len + 1)
    }

    /// First k letters.
    pub fn prefix(&self, k: u32) -> Word {
        assert!(k <= self.len, "prefix longer than word");
        Word {
            bits: self.bits >> (self.len - k),
            len: k,
        }
    }

    /// Last k letters.
    pub fn suffix(&self, k: u32) -> Word {
        assert!(k <= self.len, "suffix longer than word");
        Word {
            bits: if k == 0 { 0 } else { self.bits & (u64::MAX >> (64 - k)) },
            len: k,
        }
    }

    pub fn starts_with(&self, w: &Word) -> bool {
        w.len <= self.len && self.prefix(w.len) == *w
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        Word::from_bits(self.bits << other.len | other.bits, self.len + other.len)
    }

    pub fn rotate_left(&self, k: u32) -> Word {
        if self.len == 0 {
            return *self;
        }
        let k = k % self.len;
        let head = self.prefix(k);
        self.suffix(self.len - k).concat(&head).expect("same length")
    }

    pub fn letters(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }

    /// All words of a given length in lexicographic order.
    pub fn all_of_len(len: u32) -> Result<Vec<Word>> {
        if len > Self::MAX_LEN {
            return Err(Error::cap(format!("word length {len} exceeds {}", Self::MAX_LEN)));
        }
        (0..1usize << len).map(|i| Word::from_index(i, len)).collect()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.letters() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut w = Word::empty();
        for ch in s.chars() {
            let b = match ch {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::parse(format!("invalid letter {ch:?} in word {s:?}"))),
            };
            w = w.push(b)?;
        }
        Ok(w)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.len, self.bits).cmp(&(other.len, other.bits))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e| D::Error::custom(format!("{e}")))
    }
}

/// The Haar function h_w evaluated at the cylinder of x: +1/2 on [w0],
/// -1/2 on [w1], 0 off [w]. x must be strictly longer than w to decide.
pub fn haar_eval(omega: &Word, x: &Word) -> Result<Rat> {
    if x.len() <= omega.len() {
        return Err(Error::invalid(format!(
            "insufficient depth: point word of length {} cannot decide the level-{} Haar function",
            x.len(),
            omega.len()
        )));
    }
    if !x.starts_with(omega) {
        return Ok(Rat::zero());
    }
    Ok(if x.bit(omega.len()) == 0 {
        crate::rat::rat(1, 2)
    } else {
        crate::rat::rat(-1, 2)
    })
}

/// A function constant on each level-n cylinder, stored as 2^n exact
/// rational values in lexicographic cylinder order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    level: u32,
    values: Vec<Rat>,
}

impl StepFunction {
    pub fn new(level: u32, values: Vec<Rat>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::cap(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        if values.len() != 1usize << level {
            return Err(Error::invalid(format!(
                "level {level} needs {} values, got {}",
                1usize << level,
                values.len()
            )));
        }
        Ok(StepFunction { level, values })
    }

    pub fn constant(c: Rat, level: u32) -> Result<Self> {
        StepFunction::new(level, vec![c; 1usize << level])
    }

    pub fn zero(level: u32) -> Result<Self> {
        StepFunction::constant(Rat::zero(), level)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    /// Value on the cylinder [w]; w must pin down a level cell (|w| >= level).
    pub fn value_on(&self, w: &Word) -> Result<&Rat> {
        if w.len() < self.level {
            return Err(Error::invalid(format!(
                "insufficient depth: word of length {} against level {}",
                w.len(),
                self.level
            )));
        }
        Ok(&self.values[w.prefix(self.level).index()])
    }

    /// Average of the function over the cylinder [w]; |w| <= level.
    pub fn cylinder_mean(&self, w: &Word) -> Result<Rat> {
        if w.len() > self.level {
            return Err(Error::invalid(format!(
                "cylinder of level {} is below the function's resolution {}",
                w.len(),
                self.level
            )));
        }
        let block = 1usize << (self.level - w.len());
        let start = w.index() << (self.level - w.len());
        let sum: Rat = self.values[start..start + block].iter().sum();
        Ok(sum / Rat::from(BigInt::from(block as u64)))
    }

    /// Integral against the unbiased Bernoulli measure.
    pub fn mean(&self) -> Rat {
        self.cylinder_mean(&Word::empty()).expect("empty word fits")
    }

    /// Cylinder averages at every level k <= level; entry k has 2^k means.
    fn level_means(&self, k: u32) -> Vec<Rat> {
        assert!(k <= self.level);
        let mut cur = self.values.clone();
        for _ in k..self.level {
            cur = cur
                .chunks(2)
                .map(|p| (&p[0] + &p[1]) / Rat::from(BigInt::from(2)))
                .collect();
        }
        cur
    }

    /// The same function re-expressed at a finer level (values duplicate).
    pub fn at_level(&self, level: u32) -> Result<StepFunction> {
        if level < self.level {
            return Err(Error::invalid(format!(
                "cannot lower level {} to {level} without averaging; use truncate",
                self.level
            )));
        }
        let dup = 1usize << (level - self.level);
        let mut values = Vec::with_capacity(1usize << level);
        for v in &self.values {
            for _ in 0..dup {
                values.push(v.clone());
            }
        }
        StepFunction::new(level, values)
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        let level = self.level.max(other.level);
        let a = self.at_level(level)?;
        let b = other.at_level(level)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + y)
            .collect();
        StepFunction::new(level, values)
    }

    pub fn scale(&self, r: &Rat) -> StepFunction {
        StepFunction {
            level: self.level,
            values: self.values.iter().map(|v| v * r).collect(),
        }
    }

    pub fn add_constant(&self, r: &Rat) -> StepFunction {
        StepFunction {
            level: self.level,
            values: self.values.iter().map(|v| v + r).collect(),
        }
    }

    pub fn sup_norm(&self) -> Rat {
        self.values
            .iter()
            .map(crate::rat::rat_abs)
            .max()
            .expect("nonempty values")
    }
}

/// The Haar-side view of a level-n step function: the mean plus one
/// coefficient per word of length < n, stored level by level in
/// lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HaarCoefficients {
    mean: Rat,
    levels: Vec<Vec<Rat>>,
}

impl HaarCoefficients {
    pub fn new(mean: Rat, levels: Vec<Vec<Rat>>) -> Result<Self> {
        if levels.len() as u32 > MAX_LEVEL {
            return Err(Error::cap(format!(
                "coefficient depth {} exceeds {MAX_LEVEL}",
                levels.len()
            )));
        }
        for (k, row) in levels.iter().enumerate() {
            if row.len() != 1usize << k {
                return Err(Error::invalid(format!(
                    "coefficient level {k} needs {} entries, got {}",
                    1usize << k,
                    row.len()
                )));
            }
        }
        Ok(HaarCoefficients { mean, levels })
    }

    /// Level of the step function this data reconstructs.
    pub fn level(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn mean(&self) -> &Rat {
        &self.mean
    }

    pub fn coeff(&self, w: &Word) -> Result<&Rat> {
        self.levels
            .get(w.len() as usize)
            .map(|row| &row[w.index()])
            .ok_or_else(|| {
                Error::invalid(format!(
                    "no coefficient for word of length {} at depth {}",
                    w.len(),
                    self.level()
                ))
            })
    }

    pub fn coeffs_at_level(&self, k: u32) -> Option<&[Rat]> {
        self.levels.get(k as usize).map(|r| r.as_slice())
    }

    pub fn max_abs_at_level(&self, k: u32) -> Rat {
        self.levels
            .get(k as usize)
            .map(|row| row.iter().map(crate::rat::rat_abs).max().expect("nonempty"))
            .unwrap_or_else(Rat::zero)
    }

    /// All (word, coefficient) pairs, shallow levels first.
    pub fn iter_words(&self) -> impl Iterator<Item = (Word, &Rat)> + '_ {
        self.levels.iter().enumerate().flat_map(|(k, row)| {
            row.iter().enumerate().map(move |(i, c)| {
                (
                    Word::from_index(i, k as u32).expect("valid index"),
                    c,
                )
            })
        })
    }

    /// Keep only coefficients of words shorter than n.
    pub fn truncated(&self, n: u32) -> HaarCoefficients {
        HaarCoefficients {
            mean: self.mean.clone(),
            levels: self.levels[..(n as usize).min(self.levels.len())].to_vec(),
        }
    }

    /// Same data extended with zero coefficients out to the given level.
    pub fn padded_to_level(&self, level: u32) -> Result<HaarCoefficients> {
        if level > MAX_LEVEL {
            return Err(Error::cap(format!(
                "coefficient depth {level} exceeds {MAX_LEVEL}"
            )));
        }
        let mut levels = self.levels.clone();
        for k in levels.len()..level as usize {
            levels.push(vec![Rat::zero(); 1usize << k]);
        }
        Ok(HaarCoefficients {
            mean: self.mean.clone(),
            levels,
        })
    }
}

/// Haar analysis: mean plus, for each word w below the top level, the
/// difference of cylinder means c_w = mean(f|[w0]) - mean(f|[w1]). This
/// equals the normalized inner product 2^(|w|+2) * integral(f * h_w).
pub fn forward_transform(f: &StepFunction) -> HaarCoefficients {
    let n = f.level() as usize;
    let mut means: Vec<Vec<Rat>> = Vec::with_capacity(n + 1);
    means.push(f.values().to_vec());
    for _ in 0..n {
        let prev = means.last().expect("nonempty");
        let next: Vec<Rat> = prev
            .chunks(2)
            .map(|p| (&p[0] + &p[1]) / Rat::from(BigInt::from(2)))
            .collect();
        means.push(next);
    }
    means.reverse(); // means[k] now holds the 2^k level-k cylinder means
    let mean = means[0][0].clone();
    let levels = (0..n)
        .map(|k| {
            (0..1usize << k)
                .map(|i| &means[k + 1][2 * i] - &means[k + 1][2 * i + 1])
                .collect()
        })
        .collect();
    HaarCoefficients { mean, levels }
}

/// Haar synthesis: descend the dyadic tree, splitting each cylinder mean
/// into child means via m ± c_w/2.
pub fn inverse_transform(h: &HaarCoefficients) -> StepFunction {
    let mut values = vec![h.mean.clone()];
    let two = Rat::from(BigInt::from(2));
    for row in &h.levels {
        let mut next = Vec::with_capacity(values.len() * 2);
        for (m, c) in values.iter().zip(row) {
            let d = c / &two;
            next.push(m + &d);
            next.push(m - &d);
        }
        values = next;
    }
    StepFunction {
        level: h.levels.len() as u32,
        values,
    }
}

/// A_n f: the level-n averaging of f. Computed both as cylinder means and
/// as the synthesis of the coefficients below level n; the two must agree
/// exactly, which is asserted on every call.
pub fn truncate(f: &StepFunction, n: u32) -> Result<StepFunction> {
    if n > f.level() {
        return Err(Error::invalid(format!(
            "cannot truncate level-{} function at level {n}",
            f.level()
        )));
    }
    let averaged = StepFunction::new(n, f.level_means(n))?;
    let synthesized = inverse_transform(&forward_transform(f).truncated(n));
    assert_eq!(
        averaged, synthesized,
        "cylinder averaging and truncated synthesis disagree"
    );
    Ok(averaged)
}

/// n-th variation: the largest oscillation of f within a single level-n
/// cylinder. Zero at and beyond the function's own level.
pub fn variation(f: &StepFunction, n: u32) -> Rat {
    if n >= f.level() {
        return Rat::zero();
    }
    let block = 1usize << (f.level() - n);
    f.values()
        .chunks(block)
        .map(|b| {
            let mx = b.iter().max().expect("nonempty");
            let mn = b.iter().min().expect("nonempty");
            mx - mn
        })
        .max()
        .expect("nonempty")
}

/// Best Lipschitz constant of f for the metric induced by the modulus
/// sequence a: max over n < level of variation_n / a_n. Exact whenever every
/// log2(a_n) is an integer; otherwise an upper bound (a_n taken from the
/// lower end of its 64-bit dyadic bracket).
pub fn lipschitz_constant(f: &StepFunction, a: &SequenceSpec) -> Result<Magnitude> {
    let mut best = Magnitude::zero();
    for n in 0..f.level() {
        let v = variation(f, n);
        if v.is_zero() {
            continue;
        }
        let an = a.log_val(n as usize)?.to_magnitude(Round::Down)?;
        best = best.max_mag(Magnitude::from_rat(&v).div(&an));
    }
    Ok(best)
}

/// A strictly decreasing positive modulus sequence given through exact
/// log2 values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSpec {
    /// a_n = 2^-(e0 + 4(2^n - 1)): consecutive log2 steps of -2^(n+2).
    DoublyExponential { e0: u64 },
    /// a_n = theta^n for theta = 2^log2_theta, log2_theta < 0.
    Geometric {
        #[serde(with = "rat_string")]
        log2_theta: Rat,
    },
    /// Explicit log2(a_n) table, at least two entries, strictly decreasing;
    /// extended beyond the table geometrically with the last step's ratio.
    Table {
        #[serde(with = "rat_vec_string")]
        log2_values: Vec<Rat>,
    },
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec::DoublyExponential { e0: 0 }
    }
}

impl SequenceSpec {
    /// Exact log2(a_n).
    pub fn log2_a(&self, n: usize) -> Result<Rat> {
        match self {
            SequenceSpec::DoublyExponential { e0 } => {
                if n > 4096 {
                    return Err(Error::cap(format!("sequence index {n} beyond cap 4096")));
                }
                let e = BigInt::from(*e0) + ((BigInt::one() << n) - BigInt::one()) * BigInt::from(4);
                Ok(Rat::from(-e))
            }
            SequenceSpec::Geometric { log2_theta } => {
                Ok(log2_theta * Rat::from(BigInt::from(n as u64)))
            }
            SequenceSpec::Table { log2_values } => {
                if log2_values.len() < 2 {
                    return Err(Error::invalid("sequence table needs at least two entries"));
                }
                let m = log2_values.len();
                if n < m {
                    Ok(log2_values[n].clone())
                } else {
                    let ext = &log2_values[m - 1] - &log2_values[m - 2];
                    Ok(&log2_values[m - 1] + ext * Rat::from(BigInt::from((n - m + 1) as u64)))
                }
            }
        }
    }

    /// a_n as an exact scaled power of two.
    pub fn log_val(&self, n: usize) -> Result<LogVal> {
        Ok(LogVal::pow2(self.log2_a(n)?))
    }

    /// Upper bound on log2(a_{k+1}/a_k) over all k >= h.
    pub fn ratio_log2_sup_from(&self, h: usize) -> Result<Rat> {
        match self {
            SequenceSpec::DoublyExponential { .. } => {
                if h > 4094 {
                    return Err(Error::cap(format!("sequence index {h} beyond cap 4096")));
                }
                Ok(Rat::from(-(BigInt::one() << (h + 2))))
            }
            SequenceSpec::Geometric { log2_theta } => Ok(log2_theta.clone()),
            SequenceSpec::Table { log2_values } => {
                if log2_values.len() < 2 {
                    return Err(Error::invalid("sequence table needs at least two entries"));
                }
                let m = log2_values.len();
                let ext = &log2_values[m - 1] - &log2_values[m - 2];
                let mut sup = ext;
                for k in h..m.saturating_sub(1) {
                    let r = &log2_values[k + 1] - &log2_values[k];
                    if r > sup {
                        sup = r;
                    }
                }
                Ok(sup)
            }
        }
    }

    /// Checks the defining requirements: strictly decreasing log2 values at
    /// every index, and a strictly negative per-step ratio bound, which for
    /// these parametric families also forces sum(n * a_n) to converge.
    pub fn validate(&self) -> Result<()> {
        let table_len = match self {
            SequenceSpec::Table { log2_values } => log2_values.len(),
            _ => 0,
        };
        let sup = self.ratio_log2_sup_from(0)?;
        if !sup.is_negative() {
            return Err(Error::validation(
                "sequence-summable",
                format!(
                    "per-step log2 ratio bound {} is not negative; a_n does not decay",
                    format_rat(&sup)
                ),
            ));
        }
        for k in 0..table_len.max(2) {
            let step = &self.log2_a(k + 1)? - &self.log2_a(k)?;
            if !step.is_negative() {
                return Err(Error::validation(
                    "sequence-decreasing",
                    format!("log2(a_n) does not strictly decrease at n = {k}"),
                ));
            }
        }
        Ok(())
    }
}

/// Weighted tail bound sum((k-n+1) * (a_k * lip + bbar_k), k >= n): the
/// quantity a level-n gap must exceed for certification. Terms up to the
/// horizon (default 3n+8, always stretched past any gauge overrides) are
/// summed in upper-bounded magnitude arithmetic; the remainder is dominated
/// by a geometric series once the per-step decay ratio is at most 1/4,
/// contributing at most 4 * ratio * (last term).
pub fn tail_bound(
    lip: &Magnitude,
    a: &SequenceSpec,
    gauge: &GaugeSpec,
    n: usize,
    horizon: Option<usize>,
) -> Result<Magnitude> {
    weighted_tail_bound(lip, a, gauge, n, n, horizon)
}

/// The same weighted sum with the weight origin and the summation start
/// decoupled: sum((k-origin+1) * (a_k * lip + bbar_k), k >= start). Used
/// when sampled coefficients already account for levels below `start` and
/// only the unseen levels need the analytic bound.
pub fn weighted_tail_bound(
    lip: &Magnitude,
    a: &SequenceSpec,
    gauge: &GaugeSpec,
    origin: usize,
    start: usize,
    horizon: Option<usize>,
) -> Result<Magnitude> {
    let n = origin;
    if start < origin {
        return Err(Error::invalid(format!(
            "tail start {start} below weight origin {origin}"
        )));
    }
    let h = horizon
        .unwrap_or(3 * n + 8)
        .max(start)
        .max(gauge.max_override_level().map_or(0, |l| l + 1));
    let mut total = Magnitude::zero();
    let mut last_term = Magnitude::zero();
    for k in start..=h {
        let mut term = Magnitude::zero();
        if !lip.is_zero() {
            term = term.add(&a.log_val(k)?.to_magnitude(Round::Up)?.mul(lip));
        }
        if let Some(b) = gauge.upper_log_val(a, k)? {
            term = term.add(&b.to_magnitude(Round::Up)?);
        }
        let weighted = term.mul_u64((k - n + 1) as u64);
        total = total.add(&weighted);
        if k == h {
            last_term = weighted;
        }
    }
    let mut ratios: Vec<Rat> = Vec::new();
    if !lip.is_zero() {
        ratios.push(a.ratio_log2_sup_from(h)?);
    }
    if let Some(r) = gauge.ratio_log2_sup_from(a, h)? {
        ratios.push(r);
    }
    let Some(ratio_log2) = ratios.into_iter().max() else {
        return Ok(total); // every term is identically zero
    };
    if ratio_log2 > crate::rat::rat(-2, 1) {
        return Err(Error::TailDiverges(format!(
            "per-step decay ratio 2^{} at horizon {h} exceeds 1/4; the weighted remainder \
             cannot be certified by a geometric majorant",
            format_rat(&ratio_log2)
        )));
    }
    let ratio = Magnitude::from_log2(&ratio_log2, Round::Up)?;
    let remainder = last_term.mul(&ratio).mul_u64(4);
    Ok(total.add(&remainder))
}

// ---------------------------------------------------------------------------
// Serialization: {"level": n, "values": ["p/q", ...]} for step functions and
// {"mean": "p/q", "coeffs": {"word": "p/q", ...}} for coefficient data.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StepFunctionWire {
    level: u32,
    #[serde(with = "rat_vec_string")]
    values: Vec<Rat>,
}

impl Serialize for StepFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StepFunctionWire {
            level: self.level,
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = StepFunctionWire::deserialize(d)?;
        StepFunction::new(wire.level, wire.values).map_err(|e| D::Error::custom(format!("{e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct HaarCoefficientsWire {
    mean: String,
    coeffs: BTreeMap<String, String>,
}

impl Serialize for HaarCoefficients {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .iter_words()
            .map(|(w, c)| (w.to_string(), format_rat(c)))
            .collect();
        HaarCoefficientsWire {
            mean: format_rat(&self.mean),
            coeffs,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HaarCoefficients {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = HaarCoefficientsWire::deserialize(d)?;
        let mean = parse_rat(&wire.mean).map_err(|e| D::Error::custom(format!("{e}")))?;
        let count = wire.coeffs.len() + 1;
        if !count.is_power_of_two() {
            return Err(D::Error::custom(format!(
                "coefficient count {} is not of the form 2^level - 1",
                wire.coeffs.len()
            )));
        }
        let level = count.trailing_zeros();
        let mut levels: Vec<Vec<Option<Rat>>> = (0..level)
            .map(|k| vec![None; 1usize << k])
            .collect();
        for (key, val) in &wire.coeffs {
            let w: Word = key.parse().map_err(|e| D::Error::custom(format!("{e}")))?;
            let c = parse_rat(val).map_err(|e| D::Error::custom(format!("{e}")))?;
            let row = levels.get_mut(w.len() as usize).ok_or_else(|| {
                D::Error::custom(format!("coefficient word {key:?} is too long for depth {level}"))
            })?;
            if row[w.index()].replace(c).is_some() {
                return Err(D::Error::custom(format!("duplicate coefficient for {key:?}")));
            }
        }
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(k, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.ok_or_else(|| {
                            D::Error::custom(format!(
                                "missing coefficient for word {} of length {k}",
                                Word::from_index(i, k as u32).expect("valid").to_string()
                            ))
                        })
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        HaarCoefficients::new(mean, levels).map_err(|e| D::Error::custom(format!("{e}")))
    }
}
