use super::{Branch, Bus, BusKind, CaseError, Generator, NetworkCase};

const BUS_COLS: usize = 10;
const GEN_COLS: usize = 8;
const BRANCH_COLS: usize = 11;

/// Parses the MATLAB subset used by MATPOWER case files: `mpc.<field> = ...;`
/// assignments of scalars and numeric matrices. Other fields (gencost, cell
/// arrays of names, ...) are skipped.
pub fn parse_matpower_case(text: &str) -> Result<NetworkCase, CaseError> {
    let src = strip_comments(text);
    let mut base_mva = None;
    let mut bus = None;
    let mut gen = None;
    let mut branch = None;
    let mut name = String::new();

    for line in src.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("function") {
            if let Some((_, fname)) = rest.split_once('=') {
                name = fname.trim().trim_end_matches(';').to_string();
            }
        }
    }

    let bytes = src.as_bytes();
    let mut pos = 0;
    while let Some(off) = src[pos..].find("mpc.") {
        let start = pos + off + 4;
        // reject matches inside identifiers such as `xmpc.`
        if pos + off > 0 && is_ident(bytes[pos + off - 1]) {
            pos = start;
            continue;
        }
        let mut end = start;
        while end < bytes.len() && is_ident(bytes[end]) {
            end += 1;
        }
        let field = &src[start..end];
        let mut k = skip_ws(bytes, end);
        if k >= bytes.len() || bytes[k] != b'=' {
            pos = end;
            continue;
        }
        k = skip_ws(bytes, k + 1);
        let (value, next) = take_value(&src, k)?;
        pos = next;
        match field {
            "baseMVA" => {
                let v = parse_number(value.trim().trim_end_matches(';').trim())
                    .ok_or_else(|| malformed(format!("baseMVA value `{}`", value.trim())))?;
                base_mva = Some(v);
            }
            "bus" => bus = Some(parse_matrix("bus", value)?),
            "gen" => gen = Some(parse_matrix("gen", value)?),
            "branch" => branch = Some(parse_matrix("branch", value)?),
            _ => {}
        }
    }

    let base_mva = base_mva.ok_or(CaseError::MissingMatrix("baseMVA"))?;
    let bus = bus.ok_or(CaseError::MissingMatrix("bus"))?;
    let gen = gen.ok_or(CaseError::MissingMatrix("gen"))?;
    let branch = branch.ok_or(CaseError::MissingMatrix("branch"))?;

    let buses = bus
        .iter()
        .enumerate()
        .map(|(r, row)| {
            require_cols("bus", r, row, BUS_COLS)?;
            let kind = match row[1] as i64 {
                3 => BusKind::Slack,
                2 => BusKind::Pv,
                1 => BusKind::Pq,
                other => return Err(malformed(format!("bus row {}: unsupported bus type {other}", r + 1))),
            };
            Ok(Bus {
                id: as_id("bus", r, row[0])?,
                kind,
                p_load: row[2],
                q_load: row[3],
                g_shunt: row[4],
                b_shunt: row[5],
                v_init: row[7],
                theta_init: row[8],
                base_kv: row[9],
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let gens = gen
        .iter()
        .enumerate()
        .map(|(r, row)| {
            require_cols("gen", r, row, GEN_COLS)?;
            Ok(Generator {
                bus: as_id("gen", r, row[0])?,
                p_gen: row[1],
                q_gen: row[2],
                v_set: row[5],
                status: row[7] > 0.0,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let branches = branch
        .iter()
        .enumerate()
        .map(|(r, row)| {
            require_cols("branch", r, row, BRANCH_COLS)?;
            Ok(Branch {
                from_bus: as_id("branch", r, row[0])?,
                to_bus: as_id("branch", r, row[1])?,
                r: row[2],
                x: row[3],
                b_charging: row[4],
                tap: row[8],
                shift: row[9],
                status: row[10] > 0.0,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    NetworkCase::new(name, base_mva, buses, branches, gens)
}

fn malformed(msg: String) -> CaseError {
    CaseError::MalformedCase(msg)
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn skip_ws(bytes: &[u8], mut k: usize) -> usize {
    while k < bytes.len() && (bytes[k] == b' ' || bytes[k] == b'\t') {
        k += 1;
    }
    k
}

/// Drops `%` comments, leaving `%` inside single-quoted strings alone.
fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_str = false;
        let mut prev: Option<char> = None;
        for c in line.chars() {
            if c == '\'' {
                // a quote right after an identifier or bracket is a transpose
                let transpose = matches!(prev, Some(p) if p.is_alphanumeric() || p == ']' || p == ')');
                if in_str || !transpose {
                    in_str = !in_str;
                }
            }
            if c == '%' && !in_str {
                break;
            }
            out.push(c);
            prev = Some(c);
        }
        out.push('\n');
    }
    out
}

/// Returns the raw text of the value starting at `k` and the position after it.
fn take_value(src: &str, k: usize) -> Result<(&str, usize), CaseError> {
    let bytes = src.as_bytes();
    if k >= bytes.len() {
        return Err(malformed("assignment without a value".into()));
    }
    let close = match bytes[k] {
        b'[' => Some(b']'),
        b'{' => Some(b'}'),
        _ => None,
    };
    if let Some(close) = close {
        let open = bytes[k];
        let mut depth = 0usize;
        for (j, &b) in bytes.iter().enumerate().skip(k) {
            if b == open {
                depth += 1;
            } else if b == close {
                depth -= 1;
                if depth == 0 {
                    return Ok((&src[k..=j], j + 1));
                }
            }
        }
        return Err(malformed(format!("unterminated `{}`", open as char)));
    }
    let end = src[k..].find([';', '\n']).map(|e| k + e).unwrap_or(src.len());
    Ok((&src[k..end], end))
}

fn parse_matrix(field: &str, value: &str) -> Result<Vec<Vec<f64>>, CaseError> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| malformed(format!("mpc.{field} is not a numeric matrix")))?;
    let inner = inner.replace("...\n", " ");
    let mut rows = Vec::new();
    for raw in inner.split([';', '\n']) {
        let cells: Vec<&str> = raw.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if cells.is_empty() {
            continue;
        }
        let row = cells
            .iter()
            .map(|s| {
                parse_number(s)
                    .ok_or_else(|| malformed(format!("mpc.{field} row {}: bad number `{s}`", rows.len() + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if let Some(first) = rows.first() {
        let width = first.len();
        if let Some((r, _)) = rows.iter().enumerate().find(|(_, row)| row.len() != width) {
            return Err(malformed(format!(
                "mpc.{field} row {} has {} columns, expected {width}",
                r + 1,
                rows[r].len()
            )));
        }
    }
    Ok(rows)
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        "NaN" | "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

fn require_cols(field: &str, r: usize, row: &[f64], min: usize) -> Result<(), CaseError> {
    if row.len() < min {
        return Err(malformed(format!("mpc.{field} row {} has {} columns, need at least {min}", r + 1, row.len())));
    }
    Ok(())
}

fn as_id(field: &str, r: usize, x: f64) -> Result<i64, CaseError> {
    if x.fract() != 0.0 || !x.is_finite() {
        return Err(malformed(format!("mpc.{field} row {}: bus id {x} is not an integer", r + 1)));
    }
    Ok(x as i64)
}
