//! Shell-safe literals: complex numbers `a+bi`, ranges `start..end` and
//! polylines `v0:v1:...`.

use isomon_core::C64;

/// Parse a sum of real and imaginary terms: `1`, `-0.5`, `i`, `-2i`,
/// `0.3+0.8i`, `1e-3-2.5e-1i`, `i+0.1i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("`{s}` is not a complex literal like 0.3+0.8i");
    let bytes = t.as_bytes();
    let mut cuts = vec![0];
    for k in 1..bytes.len() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            cuts.push(k);
        }
    }
    cuts.push(bytes.len());
    let mut z = C64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let term = &t[w[0]..w[1]];
        match term.strip_suffix('i') {
            Some(coef) => {
                z.im += match coef {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    _ => coef.parse::<f64>().map_err(|_| bad())?,
                }
            }
            None => z.re += term.parse::<f64>().map_err(|_| bad())?,
        }
    }
    if t.is_empty() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(bad());
    }
    Ok(z)
}

/// Canonical literal, shortest round-trip form of each part.
pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        return format!("{}", z.re);
    }
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

pub fn parse_range(s: &str) -> Result<(C64, C64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("`{s}` is not a range like 0..1"))?;
    Ok((parse_complex(a)?, parse_complex(b)?))
}

/// Vertices separated by `:`.
pub fn parse_polyline(s: &str) -> Result<Vec<C64>, String> {
    let v = s.split(':').map(parse_complex).collect::<Result<Vec<_>, _>>()?;
    if v.len() < 2 {
        return Err(format!("`{s}` needs at least two vertices separated by `:`"));
    }
    Ok(v)
}

/// Comma-separated complex list.
pub fn parse_complex_list(s: &str) -> Result<Vec<C64>, String> {
    s.split(',').map(parse_complex).collect()
}
