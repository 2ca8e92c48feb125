//! CSV ingestion for chart data.
//!
//! Schema: header `role,sample_id,value`; role is `ref` or `test`. Reference
//! rows are pooled into one phase-I sample regardless of their sample_id
//! (subgroup structure carries no information for this chart). Test rows are
//! grouped by sample_id; groups must be contiguous and equally sized.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mw_stat::{ReferenceSample, TestSample};

pub fn ingest_csv(path: &Path) -> Result<(ReferenceSample, Vec<TestSample>)> {
    let text = std::fs::read_to_string(path)?;
    ingest_csv_str(&text, &path.display().to_string())
}

pub fn ingest_csv_str(text: &str, origin: &str) -> Result<(ReferenceSample, Vec<TestSample>)> {
    let bad = |line: usize, msg: String| Error::invalid(format!("{origin}:{line}: {msg}"));

    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, raw)) => {
                let t = raw.trim_end_matches('\r').trim();
                if t.is_empty() {
                    continue;
                }
                break (i + 1, t.to_string());
            }
            None => return Err(Error::invalid(format!("{origin}: empty file"))),
        }
    };
    let header_fields: Vec<String> = header
        .1
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(|f| f.trim().to_ascii_lowercase())
        .collect();
    if header_fields != ["role", "sample_id", "value"] {
        return Err(bad(
            header.0,
            format!("expected header 'role,sample_id,value', got '{}'", header.1),
        ));
    }

    let mut reference = Vec::new();
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    let mut closed: Vec<String> = Vec::new();

    for (i, raw) in lines {
        let line_no = i + 1;
        let t = raw.trim_end_matches('\r').trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(|f| f.trim()).collect();
        if fields.len() != 3 {
            return Err(bad(
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| bad(line_no, format!("bad numeric value '{}'", fields[2])))?;
        if !value.is_finite() {
            return Err(bad(line_no, format!("non-finite value '{}'", fields[2])));
        }
        match fields[0].to_ascii_lowercase().as_str() {
            "ref" => reference.push(value),
            "test" => {
                let id = fields[1].to_string();
                match groups.last_mut() {
                    Some((current, values)) if *current == id => values.push(value),
                    _ => {
                        if closed.contains(&id) {
                            return Err(bad(
                                line_no,
                                format!("test sample id '{id}' appears in non-contiguous rows"),
                            ));
                        }
                        if let Some((done, _)) = groups.last() {
                            closed.push(done.clone());
                        }
                        groups.push((id, vec![value]));
                    }
                }
            }
            other => return Err(bad(line_no, format!("unknown role '{other}'"))),
        }
    }

    if reference.len() < 2 {
        return Err(Error::invalid(format!(
            "{origin}: need at least 2 reference rows, got {}",
            reference.len()
        )));
    }
    let reference = ReferenceSample::new(reference)?;

    let mut tests = Vec::with_capacity(groups.len());
    let mut n: Option<usize> = None;
    for (idx, (id, values)) in groups.into_iter().enumerate() {
        match n {
            None => n = Some(values.len()),
            Some(expected) if expected != values.len() => {
                return Err(Error::invalid(format!(
                    "{origin}: test sample '{id}' has {} observations, expected {expected}",
                    values.len()
                )));
            }
            _ => {}
        }
        tests.push(TestSample::new(values, idx + 1)?);
    }

    Ok((reference, tests))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_round_trip() {
        let csv = "role,sample_id,value\nref,1,74.0\nref,1,74.1\ntest,a,73.9\ntest,a,74.2\ntest,b,74.3\ntest,b,74.4\n";
        let (r, t) = ingest_csv_str(csv, "mem").unwrap();
        assert_eq!(r.m(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].n(), 2);
        assert_eq!(t[0].index(), 1);
        assert_eq!(t[1].values(), &[74.3, 74.4]);
    }

    #[test]
    fn crlf_and_blank_lines_tolerated() {
        let csv = "role,sample_id,value\r\nref,1,1.0\r\nref,1,2.0\r\n\r\ntest,g1,1.5\r\n";
        let (r, t) = ingest_csv_str(csv, "mem").unwrap();
        assert_eq!(r.m(), 2);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn reference_only_is_fine() {
        let csv = "role,sample_id,value\nref,1,1.0\nref,1,2.0\n";
        let (r, t) = ingest_csv_str(csv, "mem").unwrap();
        assert_eq!(r.m(), 2);
        assert!(t.is_empty());
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let csv = "role,sample_id,value\nref,1,1.0\nref,1,oops\n";
        let err = ingest_csv_str(csv, "mem").unwrap_err();
        assert!(err.to_string().contains("mem:3"), "{err}");
    }

    #[test]
    fn non_contiguous_group_rejected() {
        let csv =
            "role,sample_id,value\nref,1,1.0\nref,1,2.0\ntest,a,1.0\ntest,b,2.0\ntest,a,3.0\n";
        let err = ingest_csv_str(csv, "mem").unwrap_err();
        assert!(err.to_string().contains("non-contiguous"), "{err}");
    }

    #[test]
    fn unequal_group_sizes_rejected() {
        let csv =
            "role,sample_id,value\nref,1,1.0\nref,1,2.0\ntest,a,1.0\ntest,a,2.0\ntest,b,3.0\n";
        let err = ingest_csv_str(csv, "mem").unwrap_err();
        assert!(err.to_string().contains("expected 2"), "{err}");
    }

    #[test]
    fn bad_header_rejected() {
        let err = ingest_csv_str("x,y,z\nref,1,1\n", "mem").unwrap_err();
        assert!(err.to_string().contains("header"));
    }
}
