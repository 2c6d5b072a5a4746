use super::{CycleRecord, Label};
use crate::error::{Error, Result};

/// Patient identifier of a recording stem: its first `_`-delimited token.
pub fn patient_id(recording_id: &str) -> Result<String> {
    let stem = recording_id.rsplit(['/', '\\']).next().unwrap_or(recording_id);
    let stem = stem.strip_suffix(".wav").or_else(|| stem.strip_suffix(".txt")).unwrap_or(stem);
    match stem.split('_').next() {
        Some(p) if !p.is_empty() => Ok(p.to_string()),
        _ => Err(Error::Config(format!("cannot derive a patient id from `{recording_id}`"))),
    }
}

fn flag(token: &str, line: usize, what: &str) -> Result<bool> {
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            line,
            message: format!("{what} flag must be 0 or 1, got `{other}`"),
        }),
    }
}

/// Parse an annotation file: one `onset offset crackle wheeze` row per cycle.
///
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_annotations(text: &str, recording_id: &str) -> Result<Vec<CycleRecord>> {
    let patient = patient_id(recording_id)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let time = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("{what} `{s}` is not a number"),
                })
        };
        let onset = time(cols[0], "onset")?;
        let offset = time(cols[1], "offset")?;
        if onset < 0.0 || offset <= onset {
            return Err(Error::Parse {
                line,
                message: format!("need 0 <= onset < offset, got {onset} .. {offset}"),
            });
        }
        let crackle = flag(cols[2], line, "crackle")?;
        let wheeze = flag(cols[3], line, "wheeze")?;
        out.push(CycleRecord {
            recording_id: recording_id.to_string(),
            patient_id: patient.clone(),
            index: out.len(),
            onset,
            offset,
            crackle,
            wheeze,
            label: Label::from_flags(crackle, wheeze),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rows() {
        let r = parse_annotations("0.5 2.1 0 0", "101_1b1_Al_sc_Meditron").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].onset, r[0].offset, r[0].label), (0.5, 2.1, Label::Normal));
        assert_eq!(r[0].patient_id, "101");
        let r = parse_annotations("1.0 3.0 1 1", "101_1b1_Al_sc_Meditron").unwrap();
        assert_eq!(r[0].label, Label::Both);
    }

    #[test]
    fn tab_separated_file_keeps_order() {
        // Layout of the public release: tab-separated, trailing newline.
        let text = "0.036\t0.579\t0\t0\n0.579\t2.45\t0\t0\n2.45\t3.893\t0\t1\n3.893\t5.793\t1\t0\n";
        let r = parse_annotations(text, "104_1b1_Al_sc_Litt3200").unwrap();
        assert_eq!(r.len(), text.lines().count());
        let labels: Vec<_> = r.iter().map(|c| c.label).collect();
        assert_eq!(labels, [Label::Normal, Label::Normal, Label::Wheeze, Label::Crackle]);
        assert_eq!(r[3].index, 3);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("0 1 0 0\n0.5 2.1 0\n", 2),
            ("0 1 0 0\n\nx 2 0 0\n", 3),
            ("2.0 1.0 0 0\n", 1),
            ("0 1 0 2\n", 1),
        ];
        for (text, line) in cases {
            match parse_annotations(text, "101_x") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn patient_ids_from_release_filenames() {
        for (stem, p) in [
            ("101_1b1_Al_sc_Meditron", "101"),
            ("226_1b1_Pl_sc_LittC2SE.wav", "226"),
            ("data/158_1p3_Pl_mc_AKGC417L", "158"),
        ] {
            assert_eq!(patient_id(stem).unwrap(), p);
        }
        assert!(patient_id("_abc").is_err());
    }
}
