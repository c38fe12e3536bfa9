use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rowsplit::Matrix;

use crate::config::Format;
use crate::CliError;

pub fn load_matrix(path: &Path, format: Format) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let parsed = match format {
        Format::Csv => parse_csv(&text),
        Format::Json => parse_json(&text),
    };
    parsed.map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// One row per line, comma-separated decimals. Blank lines are skipped and
/// `−` (U+2212) is read as a minus sign.
pub fn parse_csv(text: &str) -> Result<Matrix, CliError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for (f, field) in line.split(',').enumerate() {
            let token = field.trim().replace('\u{2212}', "-");
            let v: f64 = token.parse().map_err(|_| {
                CliError::Input(format!("line {}, field {}: not a number: {:?}", ln + 1, f + 1, field.trim()))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "line {}, field {}: non-finite value {:?}",
                    ln + 1,
                    f + 1,
                    field.trim()
                )));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(CliError::Input(format!(
                    "line {}: expected {c} fields, found {count}",
                    ln + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Input("no rows".into()))?;
    Matrix::new(rows, cols, data).map_err(|e| CliError::Input(e.to_string()))
}

/// `{"rows": N, "cols": n, "data": [row-major entries]}`.
pub fn parse_json(text: &str) -> Result<Matrix, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))
}

/// Scientific notation with the shortest digits that read back exactly.
pub fn to_csv(a: &Matrix) -> String {
    let mut s = String::new();
    for row in a.rows_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v:e}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn to_json(a: &Matrix) -> String {
    serde_json::to_string(a).expect("matrices serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_identity() {
        assert_eq!(parse_csv("1,0\n0,1").unwrap(), Matrix::identity(2).unwrap());
        assert_eq!(parse_csv("1, 0\n\n0 ,1\n").unwrap(), Matrix::identity(2).unwrap());
    }

    #[test]
    fn csv_errors_name_the_spot() {
        let e = parse_csv("1,2\n3,x\n").unwrap_err().to_string();
        assert!(e.contains("line 2, field 2"), "{e}");
        let e = parse_csv("1,2\n3\n").unwrap_err().to_string();
        assert!(e.contains("line 2: expected 2 fields, found 1"), "{e}");
        let e = parse_csv("1,inf\n").unwrap_err().to_string();
        assert!(e.contains("line 1, field 2"), "{e}");
        assert!(parse_csv("\n\n").is_err());
    }

    #[test]
    fn csv_scientific() {
        let a = parse_csv("1e-3,2.5E2\n\u{2212}4e\u{2212}1,0").unwrap();
        assert_eq!(a.data(), &[1e-3, 250.0, -0.4, 0.0]);
    }

    #[test]
    fn json_shapes() {
        let a = parse_json(r#"{"rows":2,"cols":2,"data":[1,0,0,1]}"#).unwrap();
        assert_eq!(a, Matrix::identity(2).unwrap());
        let e = parse_json(r#"{"rows":2,"cols":2,"data":[1,0,0]}"#).unwrap_err();
        assert!(e.to_string().contains("expected 4 entries"), "{e}");
        let e = parse_json("{\"rows\":2,\n\"cols\":").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
