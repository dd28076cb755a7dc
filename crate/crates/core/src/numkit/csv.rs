use super::NumError;
use crate::Mat;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_machine(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// 4 significant digits, `n/a` for NaN.
pub fn fmt_human(x: f64) -> String {
    if x.is_nan() {
        return "n/a".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..6).contains(&mag) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Row-major matrix CSV: one matrix row per line, `,` separated.
pub fn write_matrix_csv(a: &Mat) -> String {
    let mut out = String::new();
    for r in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|c| fmt_machine(a[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(text: &str) -> Result<Mat, NumError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| NumError::Csv(format!("line {}: `{}` is not a number", line_no + 1, cell.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NumError::Csv(format!(
                    "line {}: {} fields, expected {}",
                    line_no + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Mat::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}
