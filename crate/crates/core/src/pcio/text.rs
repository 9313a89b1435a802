//! Whitespace-separated point records: `x y z [r g b] label`, one point per
//! line, one file per sample. Blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Parses one sample. `file` is only used in error messages.
pub fn parse_text_sample(
    file: &Path,
    content: &str,
    id: &str,
    num_classes: Option<usize>,
) -> Result<PointCloud> {
    let malformed = |line: usize, msg: String| Error::MalformedRecord {
        file: file.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    let mut colors: Vec<Point3> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 && fields.len() != 7 {
            return Err(malformed(
                lineno,
                format!("expected 4 or 7 fields, found {}", fields.len()),
            ));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(malformed(
                    lineno,
                    format!("record has {} fields but earlier records have {w}", fields.len()),
                ))
            }
            _ => {}
        }
        let mut nums = [0.0; 6];
        for (slot, tok) in nums.iter_mut().zip(&fields[..fields.len() - 1]) {
            *slot = tok
                .parse::<f64>()
                .map_err(|e| malformed(lineno, format!("bad number {tok:?}: {e}")))?;
        }
        let tok = fields[fields.len() - 1];
        let label: u32 = tok
            .parse()
            .map_err(|e| malformed(lineno, format!("bad label {tok:?}: {e}")))?;
        if let Some(c) = num_classes {
            if label as usize >= c {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes: c,
                    context: format!("{}:{lineno}", file.display()),
                });
            }
        }
        points.push([nums[0], nums[1], nums[2]]);
        if fields.len() == 7 {
            colors.push([nums[3], nums[4], nums[5]]);
        }
        labels.push(label);
    }
    if points.is_empty() {
        return Err(Error::EmptySample(id.to_string()));
    }
    let colors = (!colors.is_empty()).then_some(colors);
    PointCloud::new(id, points, colors, labels, None)
}

/// Renders a sample in the text format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_text_sample(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for i in 0..cloud.len() {
        let p = cloud.points()[i];
        let _ = write!(out, "{} {} {}", p[0], p[1], p[2]);
        if let Some(c) = cloud.colors() {
            let _ = write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        let _ = writeln!(out, " {}", cloud.labels()[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, c: Option<usize>) -> Result<PointCloud> {
        parse_text_sample(Path::new("t.txt"), s, "t", c)
    }

    #[test]
    fn three_rows() {
        let c = parse("0 0 0 0\n1 0 0 0\n0 1 0 1\n", Some(2)).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.labels(), &[0, 0, 1]);
        assert!(c.colors().is_none());
    }

    #[test]
    fn empty_file_is_an_error() {
        let err = parse("", Some(2)).unwrap_err();
        assert!(err.to_string().contains("empty sample"));
        assert!(matches!(parse("\n  \n", None), Err(Error::EmptySample(_))));
    }

    #[test]
    fn label_out_of_range() {
        let err = parse("0 0 0 5\n", Some(2)).unwrap_err();
        assert!(err.to_string().contains("label out of range"));
    }

    #[test]
    fn malformed_reports_line() {
        match parse("0 0 0 0\n0 0 x 0\n", None) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("0 0 0 0\n0 0 0 0.1 0.1 0.1 0\n", None),
            Err(Error::MalformedRecord { line: 2, .. })
        ));
        assert!(matches!(parse("0 0 0\n", None), Err(Error::MalformedRecord { .. })));
    }

    #[test]
    fn colors_parse() {
        let c = parse("0 0 0 0.5 0.25 1 1\n", None).unwrap();
        assert_eq!(c.colors().unwrap(), &[[0.5, 0.25, 1.0]]);
        assert_eq!(write_text_sample(&c), "0 0 0 0.5 0.25 1 1\n");
    }
}
