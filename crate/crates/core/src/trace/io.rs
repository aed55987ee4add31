//! Plain-text trace files.
//!
//! One trace per line, positions separated by `;`, each position a
//! comma-separated 0/1 vector over the alphabet. A `---` line ends the
//! positive block; anything after a second `---` is ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{Alphabet, Character, Specification, Trace, MAX_TRACE_LEN};
use crate::Error;

pub fn parse_spec(text: &str) -> Result<(Specification, Alphabet), Error> {
    let mut width: Option<usize> = None;
    let mut blocks: [Vec<Trace>; 2] = [Vec::new(), Vec::new()];
    let mut block = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "---" {
            block += 1;
            if block == 2 {
                log::warn!("ignoring trailing sections from line {lineno} on");
                break;
            }
            continue;
        }
        let mut chars = Vec::new();
        for pos in line.split(';') {
            let bits: Vec<&str> = pos.split(',').map(str::trim).collect();
            match width {
                None => width = Some(bits.len()),
                Some(w) if w != bits.len() => {
                    return Err(Error::Malformed {
                        line: lineno,
                        msg: format!("expected {w} values per position, found {}", bits.len()),
                    })
                }
                Some(_) => {}
            }
            if bits.len() > Alphabet::MAX_PROPS {
                return Err(Error::Malformed {
                    line: lineno,
                    msg: format!("more than {} propositions", Alphabet::MAX_PROPS),
                });
            }
            let mut c = 0u64;
            for (p, b) in bits.iter().enumerate() {
                match *b {
                    "1" => c |= 1 << p,
                    "0" => {}
                    other => {
                        return Err(Error::Malformed {
                            line: lineno,
                            msg: format!("expected 0 or 1, found `{other}`"),
                        })
                    }
                }
            }
            chars.push(Character(c));
        }
        if chars.len() > MAX_TRACE_LEN {
            return Err(Error::Malformed {
                line: lineno,
                msg: format!("trace of length {} exceeds {MAX_TRACE_LEN}", chars.len()),
            });
        }
        blocks[block].push(Trace::new(chars));
    }
    if block == 0 {
        return Err(Error::Malformed {
            line: text.lines().count().max(1),
            msg: "missing `---` separator".into(),
        });
    }
    let width = width.ok_or(Error::Malformed {
        line: 1,
        msg: "no traces".into(),
    })?;
    let [p, n] = blocks;
    let spec = Specification::new(p, n)?;
    Ok((spec, Alphabet::indexed(width)?))
}

/// Normalized text form; `parse_spec(format_spec(..))` returns the same spec.
pub fn format_spec(spec: &Specification, alphabet: &Alphabet) -> Result<String, Error> {
    let mut out = String::new();
    let emit = |traces: &[Trace], out: &mut String| -> Result<(), Error> {
        for tr in traces {
            if tr.is_empty() {
                return Err(Error::Unrepresentable("the empty trace".into()));
            }
            let line = tr
                .chars()
                .iter()
                .map(|c| {
                    (0..alphabet.len())
                        .map(|p| if (c.0 >> p) & 1 == 1 { "1" } else { "0" })
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";");
            writeln!(out, "{line}").unwrap();
        }
        Ok(())
    };
    emit(spec.positives(), &mut out)?;
    out.push_str("---\n");
    emit(spec.negatives(), &mut out)?;
    Ok(out)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<(Specification, Alphabet), Error> {
    let text = std::fs::read_to_string(path)?;
    parse_spec(&text)
}

pub fn save_spec(spec: &Specification, alphabet: &Alphabet, path: impl AsRef<Path>) -> Result<(), Error> {
    std::fs::write(path, format_spec(spec, alphabet)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_the_reference_example() {
        let (spec, alphabet) = parse_spec("1,0;0,1\n---\n0,0").unwrap();
        assert_eq!(alphabet.len(), 2);
        assert_eq!(
            spec.positives(),
            &[Trace::new(vec![Character(0b01), Character(0b10)])]
        );
        assert_eq!(spec.negatives(), &[Trace::new(vec![Character(0)])]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_spec("1,0\n1;0\n---\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }), "{err}");
        let err = parse_spec("1,0\n---\n0,2").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_overlap() {
        let err = parse_spec("1;0\n0\n---\n1\n0").unwrap_err();
        assert!(matches!(
            err,
            Error::OverlappingTrace {
                positive: 1,
                negative: 1
            }
        ));
    }

    #[test]
    fn ignores_extra_sections() {
        let (spec, _) = parse_spec("1\n---\n0\n---\nF,G\n---\n2\n").unwrap();
        assert_eq!(spec.len(), 2);
    }

    #[test]
    fn rejects_long_traces() {
        let line = vec!["1"; 64].join(";");
        assert!(parse_spec(&format!("{line}\n---\n0\n")).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = (Specification, Alphabet)> {
        (1usize..4).prop_flat_map(|props| {
            let tr = prop::collection::vec(0..(1u64 << props), 1..8)
                .prop_map(|cs| Trace::new(cs.into_iter().map(Character).collect()));
            (
                prop::collection::vec(tr.clone(), 0..6),
                prop::collection::vec(tr, 0..6),
            )
                .prop_map(move |(p, n)| {
                    let n: Vec<Trace> = n.into_iter().filter(|t| !p.contains(t)).collect();
                    (
                        Specification::new(p, n).unwrap(),
                        Alphabet::indexed(props).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn normalized_files_round_trip((spec, alphabet) in arb_spec()) {
            prop_assume!(!spec.is_empty());
            let text = format_spec(&spec, &alphabet).unwrap();
            let (back, back_alpha) = parse_spec(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back_alpha, alphabet.clone());
            prop_assert_eq!(format_spec(&back, &alphabet).unwrap(), text);
        }
    }
}
