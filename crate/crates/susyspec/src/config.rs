//! Line-oriented profile documents.
//!
//! ```text
//! # sign profile, c = 1
//! [problem] m=1 x0=0
//! [tails] left=-1 right=1
//! [segment] from=-1 to=0 kind=constant data=-1
//! [segment] from=0 to=1 kind=constant data=1
//! [numerics] tol_ode=1e-10
//! ```
//!
//! Keys may follow the section header on the same line or sit on their own
//! `key = value` lines below it. Matrices are written row by row with `;`
//! between rows and `,` between entries (`1, 0.5-2i; 0.5+2i, 3`); a bracketed
//! form `[[1, i], [-i, 1]]` is accepted too. A single number stands for a
//! multiple of the identity. Sampled segments list their matrices separated by `|`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::matcore::{scalar, CMatrix};
use crate::numerics::Numerics;
use crate::potential::{PotentialProfile, Segment, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub profile: PotentialProfile,
    pub numerics: Numerics,
}

pub fn parse_profile(text: &str) -> Result<PotentialProfile> {
    Ok(parse_config(text)?.profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Problem,
    Tails,
    Segment,
    Numerics,
}

#[derive(Default)]
struct RawSegment {
    line: usize,
    from: Option<(f64, usize)>,
    to: Option<(f64, usize)>,
    kind: Option<(String, usize)>,
    data: Option<(String, usize)>,
}

pub fn parse_config(text: &str) -> Result<Config> {
    let mut section = Section::None;
    let mut m: Option<(usize, usize)> = None;
    let mut x0: Option<f64> = None;
    let mut left: Option<(String, usize)> = None;
    let mut right: Option<(String, usize)> = None;
    let mut segments: Vec<RawSegment> = Vec::new();
    let mut numerics = Numerics::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let rest = if let Some(after) = content.strip_prefix('[') {
            let close = after.find(']').ok_or_else(|| parse_err(line, "unterminated section header"))?;
            let name = after[..close].trim().to_ascii_lowercase();
            section = match name.as_str() {
                "problem" => Section::Problem,
                "tails" => Section::Tails,
                "segment" => {
                    segments.push(RawSegment { line, ..Default::default() });
                    Section::Segment
                }
                "numerics" => Section::Numerics,
                other => return Err(parse_err(line, &format!("unknown section [{other}]"))),
            };
            &after[close + 1..]
        } else {
            content
        };
        for (key, value) in split_assignments(rest, line)? {
            match section {
                Section::None => {
                    return Err(parse_err(line, &format!("key '{key}' appears before any section header")))
                }
                Section::Problem => match key.as_str() {
                    "m" => {
                        let v: usize = value
                            .parse()
                            .map_err(|_| parse_err(line, &format!("m must be a positive integer, got '{value}'")))?;
                        m = Some((v, line));
                    }
                    "x0" => x0 = Some(parse_real(&value, line)?),
                    _ => return Err(parse_err(line, &format!("unknown key '{key}' in [problem]"))),
                },
                Section::Tails => match key.as_str() {
                    "left" => left = Some((value, line)),
                    "right" => right = Some((value, line)),
                    _ => return Err(parse_err(line, &format!("unknown key '{key}' in [tails]"))),
                },
                Section::Segment => {
                    let seg = segments.last_mut().expect("segment section opened");
                    match key.as_str() {
                        "from" => seg.from = Some((parse_real(&value, line)?, line)),
                        "to" => seg.to = Some((parse_real(&value, line)?, line)),
                        "kind" => seg.kind = Some((value.to_ascii_lowercase(), line)),
                        "data" => seg.data = Some((value, line)),
                        _ => return Err(parse_err(line, &format!("unknown key '{key}' in [segment]"))),
                    }
                }
                Section::Numerics => set_numeric(&mut numerics, &key, &value, line)?,
            }
        }
    }

    let (m, m_line) = m.ok_or_else(|| Error::Validation {
        line: None,
        msg: "[problem] must declare m".into(),
    })?;
    if m == 0 {
        return Err(Error::Validation { line: Some(m_line), msg: "m must be at least 1".into() });
    }
    let zero_tail = || (String::from("0"), 0usize);
    let (left_text, left_line) = left.unwrap_or_else(zero_tail);
    let (right_text, right_line) = right.unwrap_or_else(zero_tail);
    let tail_left = parse_matrix(&left_text, m, left_line)?;
    let tail_right = parse_matrix(&right_text, m, right_line)?;

    let mut segs = Vec::with_capacity(segments.len());
    for raw in segments {
        let need = |what: &str| Error::Validation {
            line: Some(raw.line),
            msg: format!("segment is missing '{what}'"),
        };
        let (from, _) = raw.from.ok_or_else(|| need("from"))?;
        let (to, _) = raw.to.ok_or_else(|| need("to"))?;
        let (kind, kind_line) = raw.kind.clone().unwrap_or_else(|| ("constant".into(), raw.line));
        let (data, data_line) = raw.data.ok_or_else(|| need("data"))?;
        let shape = match kind.as_str() {
            "constant" => Shape::Constant(parse_matrix(&data, m, data_line)?),
            "linear" => {
                let list = parse_matrix_list(&data, m, data_line)?;
                if list.len() != 2 {
                    return Err(parse_err(
                        data_line,
                        &format!("linear segment needs 'H0 | H1', got {} matrices", list.len()),
                    ));
                }
                let mut it = list.into_iter();
                Shape::Linear { h0: it.next().unwrap(), h1: it.next().unwrap() }
            }
            "samples" => Shape::Samples(parse_matrix_list(&data, m, data_line)?),
            other => {
                return Err(parse_err(
                    kind_line,
                    &format!("unknown segment kind '{other}' (expected constant, linear or samples)"),
                ))
            }
        };
        segs.push(Segment { from, to, shape, line: Some(raw.line) });
    }

    let profile = PotentialProfile {
        m,
        x0: x0.unwrap_or(0.0),
        segments: segs,
        tail_left,
        tail_right,
    };
    profile.validate()?;
    numerics
        .validate()
        .map_err(|msg| Error::Validation { line: None, msg: format!("[numerics]: {msg}") })?;
    Ok(Config { profile, numerics })
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

/// Splits `a=1 b = 2, 3; 4 c=x` into key/value pairs. A key is an identifier
/// directly followed (up to blanks) by `=`; values run to the next key.
fn split_assignments(text: &str, line: usize) -> Result<Vec<(String, String)>> {
    let bytes = text.as_bytes();
    let mut keys: Vec<(usize, usize, usize)> = Vec::new(); // (key start, key end, value start)
    let mut i = 0;
    while i < bytes.len() {
        let at_word_start = i == 0 || bytes[i - 1].is_ascii_whitespace();
        if at_word_start && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
            let mut k = i;
            while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                k += 1;
            }
            let mut e = k;
            while e < bytes.len() && bytes[e] == b' ' {
                e += 1;
            }
            if e < bytes.len() && bytes[e] == b'=' {
                keys.push((i, k, e + 1));
                i = e + 1;
                continue;
            }
        }
        i += 1;
    }
    let mut out = Vec::with_capacity(keys.len());
    if let Some(&(first, _, _)) = keys.first() {
        if !text[..first].trim().is_empty() {
            return Err(parse_err(line, &format!("unexpected text '{}'", text[..first].trim())));
        }
    } else if !text.trim().is_empty() {
        return Err(parse_err(line, &format!("expected key=value, got '{}'", text.trim())));
    }
    for (n, &(ks, ke, vs)) in keys.iter().enumerate() {
        let ve = keys.get(n + 1).map(|k| k.0).unwrap_or(text.len());
        let value = text[vs..ve].trim().to_string();
        if value.is_empty() {
            return Err(parse_err(line, &format!("key '{}' has an empty value", &text[ks..ke])));
        }
        out.push((text[ks..ke].to_ascii_lowercase(), value));
    }
    Ok(out)
}

fn parse_real(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, &format!("expected a real number, got '{s}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, &format!("number '{s}' is not finite")));
    }
    Ok(v)
}

/// Parses `3`, `-2.5`, `i`, `-i`, `2i`, `1+2i`, `1e-3-4.5e2i`, `(1-i)`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(&t).to_string();
    if t.is_empty() {
        return None;
    }
    let finite = |z: C64| if z.is_finite() { Some(z) } else { None };
    let body = match t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        None => return t.parse::<f64>().ok().map(|r| C64::new(r, 0.0)).and_then(finite),
        Some(b) => b,
    };
    // Find the sign that separates the real and imaginary parts.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let imag = |txt: &str| -> Option<f64> {
        match txt {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => txt.parse().ok(),
        }
    };
    let z = match split {
        Some(k) => C64::new(body[..k].parse().ok()?, imag(&body[k..])?),
        None => C64::new(0.0, imag(body)?),
    };
    finite(z)
}

/// Parses one `m x m` matrix.
pub fn parse_matrix(text: &str, m: usize, line: usize) -> Result<CMatrix> {
    let normalized = text.replace("],[", ";").replace("], [", ";").replace(['[', ']'], "");
    let rows: Vec<&str> = normalized.split(';').map(str::trim).filter(|r| !r.is_empty()).collect();
    let entries: Vec<Vec<&str>> = rows.iter().map(|r| r.split(',').map(str::trim).collect()).collect();
    let value = |s: &str| -> Result<C64> {
        parse_complex(s).ok_or_else(|| parse_err(line, &format!("invalid complex number '{s}'")))
    };
    if entries.len() == 1 && entries[0].len() == 1 {
        return Ok(scalar(m, value(entries[0][0])?));
    }
    if entries.len() != m || entries.iter().any(|r| r.len() != m) {
        return Err(parse_err(line, &format!("matrix '{text}' is not {m}x{m}")));
    }
    let mut out = CMatrix::zeros(m, m);
    for (i, row) in entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            out[(i, j)] = value(e)?;
        }
    }
    Ok(out)
}

pub fn parse_matrix_list(text: &str, m: usize, line: usize) -> Result<Vec<CMatrix>> {
    text.split('|').map(|part| parse_matrix(part, m, line)).collect()
}

fn set_numeric(n: &mut Numerics, key: &str, value: &str, line: usize) -> Result<()> {
    match key {
        "tol_ode" => n.tol_ode = parse_real(value, line)?,
        "tol_psd" => n.tol_psd = parse_real(value, line)?,
        "delta_spec" => n.delta_spec = parse_real(value, line)?,
        "cond_max" => n.cond_max = parse_real(value, line)?,
        "overflow" => n.overflow = parse_real(value, line)?,
        "tail_decay_lengths" => n.tail_decay_lengths = parse_real(value, line)?,
        "suite_tol" => n.suite_tol = parse_real(value, line)?,
        "eps_schedule" | "eps" => {
            n.eps_schedule = value
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| parse_real(s, line))
                .collect::<Result<_>>()?
        }
        _ => return Err(parse_err(line, &format!("unknown key '{key}' in [numerics]"))),
    }
    Ok(())
}

/// Applies `key=value` overrides on top of a document. Keys may be qualified
/// as `section.key`; unqualified `m`/`x0` go to `[problem]`, `left`/`right`
/// to `[tails]`, anything else to `[numerics]`.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String> {
    let mut out = text.to_string();
    if !out.ends_with('\n') {
        out.push('\n');
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override '{o}' is not key=value")))?;
        let k = k.trim();
        let (section, key) = match k.split_once('.') {
            Some((s, key)) => (s.to_string(), key.to_string()),
            None => {
                let s = match k {
                    "m" | "x0" => "problem",
                    "left" | "right" => "tails",
                    _ => "numerics",
                };
                (s.to_string(), k.to_string())
            }
        };
        if !matches!(section.as_str(), "problem" | "tails" | "numerics") {
            return Err(Error::InvalidArgument(format!("cannot override keys of [{section}]")));
        }
        out.push_str(&format!("[{section}]\n{key}={}\n", v.trim()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIGN: &str = "[problem] m=1 x0=0\n[tails] left=-1 right=1\n[segment] from=-1 to=0 kind=constant data=-1\n[segment] from=0 to=1 kind=constant data=1\n";

    #[test]
    fn single_constant_segment() {
        let p = parse_profile("[problem] m=1 x0=0\n[tails] left=0 right=0\n[segment] from=-1 to=1 kind=constant data=1.0\n").unwrap();
        assert_eq!(p.segments.len(), 1);
        assert_eq!(p.m, 1);
    }

    #[test]
    fn keys_on_separate_lines() {
        let text = "[problem]\nm = 2\nx0 = 0.5\n[tails]\nleft = 1, 0; 0, -1\nright = 0\n[segment]\nfrom = -1\nto = 1\nkind = linear\ndata = 0 | 1, 0; 0, 1\n";
        let p = parse_profile(text).unwrap();
        assert_eq!(p.m, 2);
        assert_eq!(p.x0, 0.5);
        assert_eq!(p.tail_left[(1, 1)].re, -1.0);
        assert!(matches!(p.segments[0].shape, Shape::Linear { .. }));
    }

    #[test]
    fn gap_is_a_validation_error_on_the_second_segment() {
        let text = "[problem] m=1\n[segment] from=0 to=1 data=1\n[segment] from=2 to=3 data=1\n";
        match parse_profile(text) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_hermitian_matrix_rejected() {
        let text = "[problem] m=2\n[segment] from=0 to=1 data=[[1, i],[i, 1]]\n";
        match parse_profile(text) {
            Err(Error::Validation { line, msg }) => {
                assert_eq!(line, Some(2));
                assert!(msg.contains("Hermitian"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hermitian_complex_matrix_accepted() {
        let text = "[problem] m=2\n[segment] from=0 to=1 data=1, 2-0.5i; 2+0.5i, -3\n";
        let p = parse_profile(text).unwrap();
        assert_eq!(p.eval_phi(0.5)[(0, 1)], C64::new(2.0, -0.5));
    }

    #[test]
    fn malformed_numbers_are_parse_errors() {
        assert!(matches!(
            parse_profile("[problem] m=1\n[segment] from=zero to=1 data=1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_profile("[problem] m=1\n[segment] from=0 to=1 data=1+\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_profile("[bogus]\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("i"), Some(C64::new(0.0, 1.0)));
        assert_eq!(parse_complex("-i"), Some(C64::new(0.0, -1.0)));
        assert_eq!(parse_complex("2.5i"), Some(C64::new(0.0, 2.5)));
        assert_eq!(parse_complex("1-i"), Some(C64::new(1.0, -1.0)));
        assert_eq!(parse_complex("1e-3+2e-4i"), Some(C64::new(1e-3, 2e-4)));
        assert_eq!(parse_complex("-1e+2-3E-1i"), Some(C64::new(-100.0, -0.3)));
        assert_eq!(parse_complex("-4"), Some(C64::new(-4.0, 0.0)));
        assert_eq!(parse_complex("abc"), None);
    }

    #[test]
    fn numerics_section_and_overrides() {
        let text = format!("{SIGN}[numerics] tol_ode=1e-9 eps_schedule=1e-2, 5e-3, 2.5e-3\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.numerics.tol_ode, 1e-9);
        let over = apply_overrides(&text, &["tol_ode=1e-8".into(), "x0=0.25".into()]).unwrap();
        let cfg = parse_config(&over).unwrap();
        assert_eq!(cfg.numerics.tol_ode, 1e-8);
        assert_eq!(cfg.profile.x0, 0.25);
    }

    #[test]
    fn bad_eps_schedule_rejected() {
        let text = format!("{SIGN}[numerics] eps=1e-2, 2e-2, 1e-3\n");
        assert!(matches!(parse_config(&text), Err(Error::Validation { .. })));
    }
}
