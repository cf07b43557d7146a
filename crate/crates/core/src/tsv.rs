use crate::error::Error;

/// Splits a tab-separated line into exactly `expected` fields.
pub(crate) fn fields(line: &str, expected: usize, line_no: usize) -> Result<Vec<&str>, Error> {
    let parts: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
    if parts.len() != expected {
        return Err(Error::Parse {
            line: line_no,
            message: format!(
                "expected {expected} tab-separated fields, found {}",
                parts.len()
            ),
        });
    }
    Ok(parts)
}

pub(crate) fn parse_f64(field: &str, what: &str, line_no: usize) -> Result<f64, Error> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("invalid {what} {field:?}"),
        })
}

pub(crate) fn parse_date(field: &str, line_no: usize) -> Result<chrono::NaiveDate, Error> {
    chrono::NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d").map_err(|_| Error::Parse {
        line: line_no,
        message: format!("invalid date {field:?}"),
    })
}

pub(crate) fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}
