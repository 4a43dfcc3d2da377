//! Numeric lexeme handling: grammar checks, exact decimal values and
//! shortest round-trip rendering of binary floats.

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;

/// Byte ranges of the parts of a numeric token that matched the JSON
/// number grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NumberShape {
    pub negative: bool,
    pub int_start: usize,
    pub int_end: usize,
    pub frac: Option<(usize, usize)>,
    pub exp: Option<(usize, usize)>,
}

impl NumberShape {
    pub fn is_integral(&self) -> bool {
        self.frac.is_none() && self.exp.is_none()
    }
}

/// Scans the longest prefix of `bytes` that matches the number grammar.
///
/// Returns the shape and the end offset, or the offset of the first byte
/// that breaks the grammar.
pub(crate) fn scan_number(bytes: &[u8]) -> Result<(NumberShape, usize), usize> {
    let mut pos = 0;
    let negative = bytes.first() == Some(&b'-');
    if negative {
        pos += 1;
    }
    let int_start = pos;
    match bytes.get(pos) {
        Some(b'0') => pos += 1,
        Some(b'1'..=b'9') => {
            while matches!(bytes.get(pos), Some(b'0'..=b'9')) {
                pos += 1;
            }
        }
        _ => return Err(pos),
    }
    let int_end = pos;

    let mut frac = None;
    if bytes.get(pos) == Some(&b'.') {
        pos += 1;
        let start = pos;
        while matches!(bytes.get(pos), Some(b'0'..=b'9')) {
            pos += 1;
        }
        if pos == start {
            return Err(pos);
        }
        frac = Some((start, pos));
    }

    let mut exp = None;
    if matches!(bytes.get(pos), Some(b'e' | b'E')) {
        pos += 1;
        let start = pos;
        if matches!(bytes.get(pos), Some(b'+' | b'-')) {
            pos += 1;
        }
        let digits = pos;
        while matches!(bytes.get(pos), Some(b'0'..=b'9')) {
            pos += 1;
        }
        if pos == digits {
            return Err(pos);
        }
        exp = Some((start, pos));
    }

    Ok((
        NumberShape {
            negative,
            int_start,
            int_end,
            frac,
            exp,
        },
        pos,
    ))
}

/// True when the whole of `text` is one JSON number token.
pub fn is_json_number(text: &str) -> bool {
    matches!(scan_number(text.as_bytes()), Ok((_, end)) if end == text.len())
}

/// True when `text` is a number token with neither fraction nor exponent.
pub fn is_integral_lexeme(text: &str) -> bool {
    matches!(scan_number(text.as_bytes()), Ok((shape, end)) if end == text.len() && shape.is_integral())
}

/// The exact mathematical value of a decimal numeral, normalized so that
/// two numerals denoting the same value compare equal.
///
/// Value is `(-1)^negative * coefficient * 10^exponent`. The coefficient
/// carries no trailing zeros; zero is stored unsigned with exponent 0.
/// The exponent is unbounded, so numerals far outside any binary float
/// range are still represented exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactDecimal {
    negative: bool,
    coefficient: BigUint,
    exponent: BigInt,
}

impl ExactDecimal {
    /// Parses a numeral in JSON number syntax. Returns `None` for anything
    /// else.
    pub fn from_lexeme(lexeme: &str) -> Option<Self> {
        let bytes = lexeme.as_bytes();
        let (shape, end) = scan_number(bytes).ok()?;
        if end != bytes.len() {
            return None;
        }
        let mut digits = Vec::with_capacity(end);
        digits.extend_from_slice(&bytes[shape.int_start..shape.int_end]);
        let mut frac_len = 0usize;
        if let Some((s, e)) = shape.frac {
            digits.extend_from_slice(&bytes[s..e]);
            frac_len = e - s;
        }
        let mut exponent = match shape.exp {
            Some((s, e)) => BigInt::parse_bytes(&bytes[s..e], 10)?,
            None => BigInt::zero(),
        };
        exponent -= frac_len;

        let trailing = digits.iter().rev().take_while(|d| **d == b'0').count();
        if trailing == digits.len() {
            return Some(Self::zero());
        }
        digits.truncate(digits.len() - trailing);
        exponent += trailing;
        let coefficient = BigUint::parse_bytes(&digits, 10)?;
        Some(Self {
            negative: shape.negative,
            coefficient,
            exponent,
        })
    }

    /// Exact value of a finite binary float, taken from its shortest
    /// round-trip decimal rendering.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Self::from_lexeme(&format!("{value:e}"))
    }

    pub fn zero() -> Self {
        Self {
            negative: false,
            coefficient: BigUint::zero(),
            exponent: BigInt::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficient.is_zero()
    }
}

/// True when parsing `lexeme` as a 64-bit float keeps its exact decimal
/// value, in the sense that the float's shortest rendering denotes the
/// same number as the lexeme. Overflow to infinity and underflow of a
/// non-zero value both count as lossy.
pub fn f64_is_lossless(lexeme: &str, value: f64) -> bool {
    match (ExactDecimal::from_lexeme(lexeme), ExactDecimal::from_f64(value)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

/// Renders a finite float as the shortest decimal string that reads back
/// to the same bits.
///
/// The output always carries a fraction or an exponent, so it re-parses as
/// a floating-point token rather than an integer. Magnitudes in
/// `[1e-6, 1e21)` are written positionally, the rest in scientific form
/// using `marker` as the exponent character.
pub fn format_f64(value: f64, marker: char) -> String {
    assert!(value.is_finite(), "non-finite floats have no JSON form");
    let sci = format!("{:e}", value.abs());
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    let mut out = String::with_capacity(digits.len() + 8);
    if value.is_sign_negative() {
        out.push('-');
    }
    if (-6..21).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(&digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
                out.push_str(".0");
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        } else {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(&digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push(marker);
        out.push_str(&exp.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        for ok in ["0", "-0", "1", "-12", "0.5", "1e5", "1E+5", "1.5e-7", "123.456E789"] {
            assert!(is_json_number(ok), "{ok}");
        }
        for bad in ["", "-", "01", "1.", ".5", "+1", "1e", "1e+", "0x14", "1.5.2", " 1", "NaN"] {
            assert!(!is_json_number(bad), "{bad}");
        }
        assert!(is_integral_lexeme("-0"));
        assert!(!is_integral_lexeme("1e2"));
        assert!(!is_integral_lexeme("1.0"));
    }

    #[test]
    fn exact_values_normalize() {
        let d = |s| ExactDecimal::from_lexeme(s).unwrap();
        assert_eq!(d("1E22"), d("1e+22"));
        assert_eq!(d("1e22"), d("10000000000000000000000"));
        assert_eq!(d("100"), d("1e+2"));
        assert_eq!(d("1.50"), d("15e-1"));
        assert_eq!(d("-0"), d("0.000"));
        assert_eq!(d("-0e5"), ExactDecimal::zero());
        assert_ne!(d("1"), d("-1"));
        assert_ne!(d("0.1"), d("0.10000000000000001"));
    }

    #[test]
    fn huge_exponents_are_exact() {
        let lexeme = "0.4e00669999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999999969999999006";
        let d = ExactDecimal::from_lexeme(lexeme).unwrap();
        assert!(!d.is_zero());
        let f: f64 = lexeme.parse().unwrap();
        assert!(f.is_infinite());
        assert!(!f64_is_lossless(lexeme, f));
    }

    #[test]
    fn lossless_float_detection() {
        for s in ["0.1", "1E22", "1e+2", "2.2250738585072014E-308", "1.7976931348623157E308", "-0.0"] {
            assert!(f64_is_lossless(s, s.parse().unwrap()), "{s}");
        }
        for s in ["4.9E-324", "0.10000000000000000001", "1e400", "1e-400"] {
            assert!(!f64_is_lossless(s, s.parse().unwrap()), "{s}");
        }
    }

    #[test]
    fn float_rendering() {
        assert_eq!(format_f64(1e22, 'e'), "1e22");
        assert_eq!(format_f64(1e22, 'E'), "1E22");
        assert_eq!(format_f64(100.0, 'e'), "100.0");
        assert_eq!(format_f64(-0.0, 'e'), "-0.0");
        assert_eq!(format_f64(0.0, 'e'), "0.0");
        assert_eq!(format_f64(1.5, 'e'), "1.5");
        assert_eq!(format_f64(0.001, 'e'), "0.001");
        assert_eq!(format_f64(1.5e-7, 'e'), "1.5e-7");
        assert_eq!(format_f64(1.25e-6, 'e'), "0.00000125");
        assert_eq!(format_f64(123456.789, 'e'), "123456.789");
        assert_eq!(format_f64(f64::MAX, 'e'), "1.7976931348623157e308");
        assert_eq!(format_f64(5e-324, 'e'), "5e-324");
        assert_eq!(format_f64(9.223372036854776e18, 'e'), "9223372036854776000.0");
    }

    #[test]
    fn rendering_round_trips_bits() {
        for f in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 1e21, 9.999999999999999e20, 1e-7, 9.9e-8] {
            let s = format_f64(f, 'e');
            assert!(is_json_number(&s), "{s}");
            assert!(!is_integral_lexeme(&s), "{s}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), f.to_bits(), "{s}");
        }
    }
}
