//! Quantities with SI-unit suffixes, e.g. `"1.46 MHz"`, `"0.4 us"`, `"2 fF"`.
//! Bare numbers are taken in the base unit (Hz, s, F).

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Capacitance,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Dimension::Capacitance => &[("F", 1.0), ("pF", 1e-12), ("fF", 1e-15)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Capacitance => "capacitance",
        }
    }
}

/// Parses `"<number> <unit>"` into base units. `inf` is accepted for times.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    if dim == Dimension::Time && matches!(text, "inf" | "infinite" | "none") {
        return Ok(f64::INFINITY);
    }
    let split = text.trim_end_matches(|c: char| c.is_alphabetic()).len();
    let (number, unit) = (text[..split].trim(), text[split..].trim());
    let value: f64 = number.parse().map_err(|_| format!("`{text}` is not a {} (expected e.g. {})", dim.name(), example(dim)))?;
    if unit.is_empty() {
        return Ok(value);
    }
    dim.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, scale)| value * scale)
        .ok_or_else(|| {
            let known: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
            format!("unknown {} unit `{unit}` (known: {})", dim.name(), known.join(", "))
        })
}

fn example(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Frequency => "\"1.46 MHz\"",
        Dimension::Time => "\"0.4 us\"",
        Dimension::Capacitance => "\"2.8 fF\"",
    }
}

struct QuantityVisitor(Dimension);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a {} such as {}", self.0.name(), example(self.0))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

/// Ordinary frequency in Hz (a "/2 pi" quantity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hz(pub f64);

/// Time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seconds(pub f64);

/// Capacitance in farads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Farads(pub f64);

impl<'de> Deserialize<'de> for Hz {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(QuantityVisitor(Dimension::Frequency)).map(Hz)
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(QuantityVisitor(Dimension::Time)).map(Seconds)
    }
}

impl<'de> Deserialize<'de> for Farads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(QuantityVisitor(Dimension::Capacitance)).map(Farads)
    }
}

impl Hz {
    pub fn angular(self) -> f64 {
        kpo_core::TWO_PI * self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_quantity("1.46 MHz", Dimension::Frequency).unwrap(), 1.46e6);
        assert_eq!(parse_quantity("0.4us", Dimension::Time).unwrap(), 0.4e-6);
        assert_eq!(parse_quantity("0.4 µs", Dimension::Time).unwrap(), 0.4e-6);
        assert_eq!(parse_quantity("2.5e3", Dimension::Frequency).unwrap(), 2.5e3);
        assert_eq!(parse_quantity("-10 MHz", Dimension::Frequency).unwrap(), -10e6);
        assert_eq!(parse_quantity("1e-6 s", Dimension::Time).unwrap(), 1e-6);
        assert_eq!(parse_quantity("inf", Dimension::Time).unwrap(), f64::INFINITY);
        assert!((parse_quantity("400 fF", Dimension::Capacitance).unwrap() - 400e-15).abs() < 1e-27);
        assert!(parse_quantity("3 MHz", Dimension::Time).unwrap_err().contains("unknown time unit"));
        assert!(parse_quantity("fast", Dimension::Time).is_err());
    }
}
