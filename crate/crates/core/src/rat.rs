//! Exact rational scalars and their `"p/q"` wire form.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::{Error, Result};

/// Arbitrary-precision rational, the scalar type of every cylinder value,
/// frequency vector, and gap in the crate.
pub type Rat = Ratio<BigInt>;

/// Rational from an integer pair; panics on q = 0 (test/construction helper).
pub fn rat(p: i64, q: i64) -> Rat {
    Ratio::new(BigInt::from(p), BigInt::from(q))
}

/// Rational from an integer.
pub fn rint(p: i64) -> Rat {
    Rat::from(BigInt::from(p))
}

/// Canonical wire form `p/q`, reduced, q > 0 (so `-1/2`, `7/1`, `0/1`).
pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p` or `p/q` with optional sign; rejects q = 0.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let mk_err = || Error::Parse(format!("expected rational `p` or `p/q`, got `{s}`"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let p: BigInt = p.trim().parse().map_err(|_| mk_err())?;
    let q: BigInt = q.trim().parse().map_err(|_| mk_err())?;
    if q.is_zero() {
        return Err(Error::Parse(format!("zero denominator in `{s}`")));
    }
    Ok(Ratio::new(p, q))
}

/// |r| as a new rational.
pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

/// serde adapter: a `Rat` field as a `"p/q"` string.
pub mod rat_string {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Rat, D::Error> {
        let s = String::deserialize(de)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

/// serde adapter: a `Vec<Rat>` field as a vector of `"p/q"` strings.
pub mod rat_vec_string {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_seq(v.iter().map(format_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<Vec<Rat>, D::Error> {
        let strings = Vec::<String>::deserialize(de)?;
        strings
            .iter()
            .map(|s| parse_rat(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
