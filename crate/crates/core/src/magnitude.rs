//! Exact nonnegative magnitudes `num/den · 2^exp` with a big power-of-two
//! exponent.
//!
//! Tail and probability bounds mix ordinary rationals with gauge values like
//! 2^(-2^(n+2)) that underflow binary64 around level 10, so the exponent is
//! carried as a `BigInt` instead of being folded into the mantissa.
//! Multiplication, division, and comparison are always exact. Addition is
//! exact while aligning the two mantissas stays below a width limit;
//! otherwise the dominant term is rounded up by one unit in the last place,
//! so every sum computed here is a correct upper bound of the true sum (and
//! `sub_lower` correspondingly rounds down). Certification only ever
//! compares an exact gap against such an upper bound, which keeps rounding
//! on the conservative side.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rat::Rat;
use crate::{Error, Result};

/// Aligned-mantissa width (bits) up to which addition stays exact.
/// The default doubly-exponential sequence needs ~4.2e6 bits at depth-4
/// horizons, well inside; a level-6 horizon (2.7e8 bits) crosses it and
/// falls back to ulp rounding for the far tail terms.
const EXACT_ADD_BITS: u64 = 1 << 23;

/// Mantissa width kept when a value must be reduced via gcd.
const REDUCE_BITS: u64 = 4096;

/// Directed rounding selector for operations that bracket irrational powers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// Exact nonnegative value `num/den * 2^exp`; zero is `0/1 * 2^0`.
#[derive(Clone, Debug)]
pub struct Magnitude {
    num: BigUint,
    den: BigUint,
    exp: BigInt,
}

impl Magnitude {
    fn normalized(mut num: BigUint, mut den: BigUint, mut exp: BigInt) -> Self {
        assert!(!den.is_zero(), "magnitude denominator must be nonzero");
        if num.is_zero() {
            return Magnitude {
                num: BigUint::zero(),
                den: BigUint::one(),
                exp: BigInt::zero(),
            };
        }
        let tz = num.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            num >>= tz;
            exp += tz;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            den >>= tz;
            exp -= tz;
        }
        if !den.is_one() && num.bits() <= REDUCE_BITS && den.bits() <= REDUCE_BITS {
            let g = num_integer::gcd(num.clone(), den.clone());
            if !g.is_one() {
                num /= &g;
                den /= &g;
            }
        }
        Magnitude { num, den, exp }
    }

    pub fn zero() -> Self {
        Magnitude::normalized(BigUint::zero(), BigUint::one(), BigInt::zero())
    }

    pub fn one() -> Self {
        Magnitude::normalized(BigUint::one(), BigUint::one(), BigInt::zero())
    }

    pub fn from_u64(v: u64) -> Self {
        Magnitude::normalized(BigUint::from(v), BigUint::one(), BigInt::zero())
    }

    /// Exact power of two 2^e.
    pub fn pow2(e: BigInt) -> Self {
        Magnitude {
            num: BigUint::one(),
            den: BigUint::one(),
            exp: e,
        }
    }

    pub fn pow2_i64(e: i64) -> Self {
        Magnitude::pow2(BigInt::from(e))
    }

    /// Exact conversion of a nonnegative rational.
    pub fn from_rat(r: &Rat) -> Self {
        assert!(
            !r.is_negative(),
            "magnitude from negative rational {r}"
        );
        Magnitude::normalized(
            r.numer().magnitude().clone(),
            r.denom().magnitude().clone(),
            BigInt::zero(),
        )
    }

    /// 2^r for rational r: exact when r is an integer, otherwise a directed
    /// dyadic bracket with a 64-bit mantissa.
    pub fn from_log2(r: &Rat, round: Round) -> Result<Self> {
        if r.is_integer() {
            return Ok(Magnitude::pow2(r.to_integer()));
        }
        let (lo, hi) = pow2_bracket(r, 64)?;
        Ok(match round {
            Round::Down => lo,
            Round::Up => hi,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Strict dyadic bracket exponents: the value lies in
    /// (2^log2_lo, 2^log2_hi) when nonzero.
    fn log2_lo(&self) -> BigInt {
        &self.exp + BigInt::from(self.num.bits()) - 1 - BigInt::from(self.den.bits())
    }

    fn log2_hi(&self) -> BigInt {
        &self.exp + BigInt::from(self.num.bits()) - BigInt::from(self.den.bits()) + 1
    }

    /// Width gap beyond which the smaller addend is absorbed into one ulp.
    fn ulp_threshold(&self) -> BigInt {
        let mantissa = self.num.bits() + self.den.bits() + 8;
        BigInt::from(mantissa.max(EXACT_ADD_BITS))
    }

    /// value * (1 + 2^-64), a strict upper bound of self plus any quantity
    /// below the ulp threshold (which is always far wider than 64 bits).
    fn bump_up(&self) -> Magnitude {
        let num = (&self.num << 64u32) + &self.num;
        Magnitude::normalized(num, self.den.clone(), &self.exp - 64)
    }

    /// value * (1 - 2^-64), a strict lower bound of self minus any quantity
    /// below the ulp threshold.
    fn bump_down(&self) -> Magnitude {
        let num = (&self.num << 64u32) - &self.num;
        Magnitude::normalized(num, self.den.clone(), &self.exp - 64)
    }

    /// Upper-bounded addition: exact below the alignment limit, otherwise
    /// the dominant term rounded up by one ulp.
    pub fn add(&self, other: &Magnitude) -> Magnitude {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.log2_lo() - other.log2_hi() > self.ulp_threshold() {
            return self.bump_up();
        }
        if other.log2_lo() - self.log2_hi() > other.ulp_threshold() {
            return other.bump_up();
        }
        let exp = self.exp.clone().min(other.exp.clone());
        let sa = (&self.exp - &exp).to_u64().expect("alignment shift") as usize;
        let sb = (&other.exp - &exp).to_u64().expect("alignment shift") as usize;
        let num = (&self.num << sa) * &other.den + (&other.num << sb) * &self.den;
        Magnitude::normalized(num, &self.den * &other.den, exp)
    }

    /// Lower-bounded subtraction; requires self >= other.
    pub fn sub_lower(&self, other: &Magnitude) -> Magnitude {
        debug_assert!(self.cmp_mag(other) != Ordering::Less, "sub_lower underflow");
        if other.is_zero() {
            return self.clone();
        }
        if self.log2_lo() - other.log2_hi() > self.ulp_threshold() {
            return self.bump_down();
        }
        let exp = self.exp.clone().min(other.exp.clone());
        let sa = (&self.exp - &exp).to_u64().expect("alignment shift") as usize;
        let sb = (&other.exp - &exp).to_u64().expect("alignment shift") as usize;
        let lhs = (&self.num << sa) * &other.den;
        let rhs = (&other.num << sb) * &self.den;
        Magnitude::normalized(lhs - rhs, &self.den * &other.den, exp)
    }

    /// Exact product.
    pub fn mul(&self, other: &Magnitude) -> Magnitude {
        Magnitude::normalized(
            &self.num * &other.num,
            &self.den * &other.den,
            &self.exp + &other.exp,
        )
    }

    pub fn mul_u64(&self, k: u64) -> Magnitude {
        Magnitude::normalized(&self.num * k, self.den.clone(), self.exp.clone())
    }

    /// Exact quotient; divisor must be nonzero.
    pub fn div(&self, other: &Magnitude) -> Magnitude {
        assert!(!other.is_zero(), "magnitude division by zero");
        Magnitude::normalized(
            &self.num * &other.den,
            &self.den * &other.num,
            &self.exp - &other.exp,
        )
    }

    /// Exact comparison (dyadic brackets first, cross-multiplication when
    /// the brackets overlap).
    pub fn cmp_mag(&self, other: &Magnitude) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        if self.log2_lo() >= other.log2_hi() {
            return Ordering::Greater;
        }
        if self.log2_hi() <= other.log2_lo() {
            return Ordering::Less;
        }
        let exp = self.exp.clone().min(other.exp.clone());
        let sa = (&self.exp - &exp).to_u64().expect("alignment shift") as usize;
        let sb = (&other.exp - &exp).to_u64().expect("alignment shift") as usize;
        let lhs = (&self.num << sa) * &other.den;
        let rhs = (&other.num << sb) * &self.den;
        lhs.cmp(&rhs)
    }

    pub fn min_mag(self, other: Magnitude) -> Magnitude {
        if self.cmp_mag(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn max_mag(self, other: Magnitude) -> Magnitude {
        if self.cmp_mag(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    /// Exact rational value when the exponent is small enough to expand.
    pub fn to_rat(&self) -> Option<Rat> {
        if self.is_zero() {
            return Some(Rat::zero());
        }
        let e = self.exp.to_i64()?;
        if e.unsigned_abs() > 1 << 22 {
            return None;
        }
        let num = BigInt::from(self.num.clone());
        let den = BigInt::from(self.den.clone());
        Some(if e >= 0 {
            Rat::new(num << e as usize, den)
        } else {
            Rat::new(num, den << (-e) as usize)
        })
    }

    /// log2 of the value as a reporting rational: exact for powers of two,
    /// otherwise the integer part is exact and the mantissa's fractional
    /// log2 is appended at 2^-32 resolution. Never used in comparisons.
    /// None for zero (log2 undefined).
    pub fn log2_report(&self) -> Option<Rat> {
        if self.is_zero() {
            return None;
        }
        if self.num.is_one() && self.den.is_one() {
            return Some(Rat::from(self.exp.clone()));
        }
        let (ntop, ns) = top_bits(&self.num);
        let (dtop, ds) = top_bits(&self.den);
        let int_part = &self.exp + BigInt::from(ns) - BigInt::from(ds);
        let frac = (ntop as f64).log2() - (dtop as f64).log2();
        let frac32 = (frac * (1u64 << 32) as f64).round() as i64;
        Some(Rat::from(int_part) + Rat::new(BigInt::from(frac32), BigInt::from(1u64 << 32)))
    }
}

impl PartialEq for Magnitude {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_mag(other) == Ordering::Equal
    }
}

impl Eq for Magnitude {}

impl PartialOrd for Magnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_mag(other))
    }
}

impl Ord for Magnitude {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_mag(other)
    }
}

/// Top <= 53 bits of a BigUint plus the dropped bit count.
fn top_bits(v: &BigUint) -> (u64, u64) {
    let bits = v.bits();
    if bits <= 53 {
        (v.to_u64().unwrap(), 0)
    } else {
        let shift = bits - 53;
        ((v >> shift).to_u64().unwrap(), shift)
    }
}

/// Positive value `scale * 2^log2` with exact rational scale and exact
/// rational log2 exponent. Gauge and modulus sequences live here: their
/// defining data are log2 exponents (possibly non-integer) and small
/// rational prefactors such as 1/n. Comparisons are exact — `s1*2^(p1/q) <=
/// s2*2^(p2/q)` reduces to an integer-power inequality — so admissibility
/// and evanescence checks never round.
#[derive(Clone, Debug)]
pub struct LogVal {
    scale: Rat,
    log2: Rat,
}

impl LogVal {
    pub fn new(scale: Rat, log2: Rat) -> Self {
        assert!(scale.is_positive(), "LogVal scale must be positive");
        LogVal { scale, log2 }
    }

    pub fn pow2(log2: Rat) -> Self {
        LogVal::new(Rat::one(), log2)
    }

    pub fn from_rat(r: &Rat) -> Self {
        LogVal::new(r.clone(), Rat::zero())
    }

    pub fn scale(&self) -> &Rat {
        &self.scale
    }

    pub fn log2_exponent(&self) -> &Rat {
        &self.log2
    }

    pub fn mul(&self, other: &LogVal) -> LogVal {
        LogVal::new(&self.scale * &other.scale, &self.log2 + &other.log2)
    }

    pub fn div(&self, other: &LogVal) -> LogVal {
        LogVal::new(&self.scale / &other.scale, &self.log2 - &other.log2)
    }

    pub fn mul_rat(&self, r: &Rat) -> LogVal {
        LogVal::new(&self.scale * r, self.log2.clone())
    }

    /// Strict dyadic bracket exponents for the whole value.
    fn bracket(&self) -> (Rat, Rat) {
        let nb = BigInt::from(self.scale.numer().magnitude().bits());
        let db = BigInt::from(self.scale.denom().magnitude().bits());
        let lo = Rat::from(&nb - 1 - &db) + &self.log2;
        let hi = Rat::from(nb - db + 1) + &self.log2;
        (lo, hi)
    }

    /// Exact comparison. Errors only when the exponent denominators are too
    /// large to raise to a common power (cap 4096).
    pub fn cmp_exact(&self, other: &LogVal) -> Result<Ordering> {
        let (alo, ahi) = self.bracket();
        let (blo, bhi) = other.bracket();
        if alo >= bhi {
            return Ok(Ordering::Greater);
        }
        if ahi <= blo {
            return Ok(Ordering::Less);
        }
        let q = num_integer::lcm(
            self.log2.denom().clone(),
            other.log2.denom().clone(),
        );
        let q = q
            .to_u64()
            .filter(|&q| q <= 4096)
            .ok_or_else(|| Error::cap("log2 exponent denominator beyond exact-compare cap"))?
            as u32;
        let e1 = (&self.log2 * BigInt::from(q)).to_integer();
        let e2 = (&other.log2 * BigInt::from(q)).to_integer();
        let d = e1 - e2;
        // Brackets overlap, so |d| is at most q * (scale-width + 2) bits.
        let dmag = d
            .magnitude()
            .to_u64()
            .ok_or_else(|| Error::cap("aligned exponent too large in exact compare"))?
            as usize;
        let mut lhs = self.scale.pow(q as i32);
        let mut rhs = other.scale.pow(q as i32);
        if d.is_positive() {
            lhs *= Rat::from(BigInt::one() << dmag);
        } else if d.is_negative() {
            rhs *= Rat::from(BigInt::one() << dmag);
        }
        Ok(lhs.cmp(&rhs))
    }

    pub fn le(&self, other: &LogVal) -> Result<bool> {
        Ok(self.cmp_exact(other)? != Ordering::Greater)
    }

    pub fn cmp_rat(&self, r: &Rat) -> Result<Ordering> {
        if !r.is_positive() {
            return Ok(Ordering::Greater);
        }
        self.cmp_exact(&LogVal::from_rat(r))
    }

    /// Directed conversion: exact when the exponent is an integer, otherwise
    /// a 64-bit dyadic bracket rounded in the requested direction.
    pub fn to_magnitude(&self, round: Round) -> Result<Magnitude> {
        let pow = Magnitude::from_log2(&self.log2, round)?;
        Ok(Magnitude::from_rat(&self.scale).mul(&pow))
    }

    /// Exact rational value when the exponent is an integer (the only case
    /// sampling is allowed to consume).
    pub fn to_rat_exact(&self) -> Option<Rat> {
        if !self.log2.is_integer() {
            return None;
        }
        let e = self.log2.to_integer().to_i64()?;
        if e.unsigned_abs() > 1 << 22 {
            return None;
        }
        Some(if e >= 0 {
            &self.scale * Rat::from(BigInt::one() << e as usize)
        } else {
            &self.scale / Rat::from(BigInt::one() << (-e) as usize)
        })
    }

    /// Reporting-grade log2 (exact integer part plus the scale's log2 at
    /// 2^-32 resolution); never used in decisions.
    pub fn log2_report(&self) -> Rat {
        let scale_log2 = Magnitude::from_rat(&self.scale)
            .log2_report()
            .expect("positive scale");
        scale_log2 + &self.log2
    }
}

/// Directed dyadic bracket of 2^r for rational r: returns (lo, hi) with
/// lo <= 2^r <= hi and hi/lo <= 1 + 2^(2-prec). The fractional part s/q is
/// bracketed by the largest mantissa m with m^q <= 2^(s + q(prec-1)), an
/// exact integer comparison.
pub fn pow2_bracket(r: &Rat, prec: u32) -> Result<(Magnitude, Magnitude)> {
    let floor = r.floor().to_integer();
    let frac = r - Rat::from(floor.clone());
    if frac.is_zero() {
        return Ok((Magnitude::pow2(floor.clone()), Magnitude::pow2(floor)));
    }
    let s = frac.numer().to_u64().expect("fraction in [0,1)");
    let q = frac
        .denom()
        .to_u64()
        .filter(|&q| q <= 1 << 16)
        .ok_or_else(|| Error::invalid("log2 denominator too large to bracket"))?;
    let shift = s + q * (prec as u64 - 1);
    let bound = BigUint::one() << shift;
    let (mut lo, mut hi) = (BigUint::one() << (prec - 1), BigUint::one() << prec);
    // Invariant: lo^q <= bound < hi^q; the fractional mantissa is in [1, 2).
    while &hi - &lo > BigUint::one() {
        let mid = (&lo + &hi) >> 1u32;
        if mid.pow(q as u32) <= bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = floor - BigInt::from(prec - 1);
    Ok((
        Magnitude::normalized(lo.clone(), BigUint::one(), scale.clone()),
        Magnitude::normalized(lo + 1u32, BigUint::one(), scale),
    ))
}
