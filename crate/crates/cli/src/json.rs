//! Compact JSON with every float printed to 17 significant digits.
//!
//! Non-finite values are written as `null`.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// One line, newline-terminated.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits_and_round_trip() {
        let xs = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23];
        let s = to_string(&xs).unwrap();
        assert_eq!(s.lines().count(), 1);
        assert!(s.starts_with("[1.0000000000000001e-1,"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(
            to_string(&[f64::INFINITY, f64::NAN]).unwrap(),
            "[null,null]\n"
        );
    }
}
