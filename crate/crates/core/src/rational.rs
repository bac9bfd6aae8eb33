//! Exact fractions for scores and weights.

use num_rational::Ratio;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

/// Most decimal places accepted when reading a number as an exact fraction.
const MAX_DECIMALS: usize = 9;

/// Parses a plain decimal literal such as `2`, `0.25` or `1.5e-1` exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let scale = frac_part.len() as i32 - exp;
    if scale > MAX_DECIMALS as i32 || scale < -(MAX_DECIMALS as i32) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let n: i64 = if all.is_empty() { 0 } else { all.parse().ok()? };
    let n = if neg { -n } else { n };
    let pow = 10i64.checked_pow(scale.unsigned_abs())?;
    Some(if scale >= 0 {
        Ratio::new(n, pow)
    } else {
        Ratio::from_integer(n.checked_mul(pow)?)
    })
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `"5/6"`, or `"1"` for integers.
pub fn format(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_fraction(text: &str) -> Option<Rational> {
    match text.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Ratio::new(n, d))
        }
        None => text.trim().parse().ok().map(Ratio::from_integer),
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    exact: String,
    value: f64,
}

/// Serde adapter writing `{"exact": "5/6", "value": 0.8333…}`.
pub mod exact {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Repr { exact: format(r), value: to_f64(r) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let repr = Repr::deserialize(d)?;
        parse_fraction(&repr.exact).ok_or_else(|| D::Error::custom(format!("bad fraction `{}`", repr.exact)))
    }
}

/// Serde adapter for a map of exact fractions.
pub mod exact_map {
    use std::collections::BTreeMap;

    use super::*;

    pub fn serialize<K: Serialize + Ord, S: Serializer>(
        m: &BTreeMap<K, Rational>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&K, Repr> = m
            .iter()
            .map(|(k, r)| (k, Repr { exact: format(r), value: to_f64(r) }))
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, K, D>(d: D) -> Result<BTreeMap<K, Rational>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        D: Deserializer<'de>,
    {
        let raw: BTreeMap<K, Repr> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, r)| {
                parse_fraction(&r.exact)
                    .map(|v| (k, v))
                    .ok_or_else(|| D::Error::custom(format!("bad fraction `{}`", r.exact)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("0.1"), Some(Ratio::new(1, 10)));
        assert_eq!(parse_decimal("2"), Some(Ratio::from_integer(2)));
        assert_eq!(parse_decimal("-1.25"), Some(Ratio::new(-5, 4)));
        assert_eq!(parse_decimal("1.5e-1"), Some(Ratio::new(3, 20)));
        assert_eq!(parse_decimal("3e2"), Some(Ratio::from_integer(300)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal("0.0000000001"), None);
    }

    #[test]
    fn fractions_format_and_parse() {
        let r = Ratio::new(25, 30);
        assert_eq!(format(&r), "5/6");
        assert_eq!(parse_fraction("5/6"), Some(r));
        assert_eq!(format(&Ratio::from_integer(1)), "1");
        assert_eq!(parse_fraction("1/0"), None);
    }
}
