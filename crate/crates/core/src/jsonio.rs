//! JSON serialization with fixed-width floating point.
//!
//! Every float is written in scientific notation with 17 significant
//! digits, which round-trips any f64 exactly and produces identical bytes
//! across platforms. Use these helpers for all artifacts that must be
//! byte-reproducible.

use std::io;

use serde::Serialize;

struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes `value` as compact JSON with 17-significant-digit floats.
pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value.serialize(&mut ser)?;
    // Sig17Formatter writes only valid UTF-8.
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

/// Writes `value` as compact JSON with 17-significant-digit floats,
/// followed by a trailing newline.
pub fn write_file<T: Serialize>(path: &std::path::Path, value: &T) -> io::Result<()> {
    let mut text = to_string(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Reads a JSON file written by [`write_file`].
pub fn read_file<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> io::Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Sample {
        x: f64,
        v: Vec<f64>,
        n: u32,
    }

    #[test]
    fn floats_use_17_significant_digits() {
        let s = to_string(&Sample {
            x: 112.0,
            v: vec![0.1, -0.25],
            n: 3,
        })
        .unwrap();
        assert_eq!(
            s,
            "{\"x\":1.1200000000000000e2,\"v\":[1.0000000000000001e-1,-2.5000000000000000e-1],\"n\":3}"
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals = [
            0.1,
            -1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            -0.0,
            123456789.123456789,
        ];
        for &x in &vals {
            let s = to_string(&x).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "failed for {x} -> {s}");
        }
    }

    #[test]
    fn reserialization_is_stable() {
        let sample = Sample {
            x: std::f64::consts::E,
            v: vec![1.0 / 7.0, 2.0 / 7.0],
            n: 9,
        };
        let s1 = to_string(&sample).unwrap();
        let back: Sample = serde_json::from_str(&s1).unwrap();
        let s2 = to_string(&back).unwrap();
        assert_eq!(s1, s2);
    }
}
