//! Plain-text matrix format.
//!
//! ```text
//! 2
//! 1    3
//! -inf 1/3
//! ```
//!
//! The first line holds the dimension `d`, followed by `d` rows of `d`
//! whitespace-separated tokens. Blank lines and lines starting with `#` are
//! skipped. Tokens are `-inf`, integers, rationals `p/q` or decimals.

use super::matrix::MpMatrix;
use super::scalar::MaxPlus;
use crate::error::{Error, Result};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Tokens of a line with their 1-based starting columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (idx, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(idx),
            (true, Some(s)) => {
                out.push((s, &line[s..idx]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

/// Parses a matrix. `line_offset` is added to reported line numbers so that
/// matrices embedded in larger files point at the right place.
pub fn parse_matrix_at(text: &str, line_offset: usize) -> Result<MpMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1 + line_offset, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });

    let (dim_line, header) = lines
        .next()
        .ok_or_else(|| parse_err(line_offset + 1, 1, "missing dimension line"))?;
    let header_toks = tokens(header);
    if header_toks.len() != 1 {
        let col = header_toks.get(1).map_or(1, |t| t.0);
        return Err(parse_err(dim_line, col, "dimension line must hold one integer"));
    }
    let (col, tok) = header_toks[0];
    let dim: usize = tok
        .parse()
        .map_err(|_| parse_err(dim_line, col, format!("invalid dimension `{tok}`")))?;
    if dim == 0 {
        return Err(parse_err(dim_line, col, "dimension must be positive"));
    }

    let mut entries = Vec::with_capacity(dim * dim);
    let mut last_line = dim_line;
    for r in 0..dim {
        let (lineno, line) = lines.next().ok_or_else(|| {
            parse_err(
                last_line + 1,
                1,
                format!("expected {dim} rows, found {r}"),
            )
        })?;
        last_line = lineno;
        let toks = tokens(line);
        if toks.len() != dim {
            let col = toks.get(dim).map_or(line.chars().count() + 1, |t| t.0);
            return Err(parse_err(
                lineno,
                col,
                format!("expected {dim} entries, found {}", toks.len()),
            ));
        }
        for (col, tok) in toks {
            let v: MaxPlus = tok
                .parse()
                .map_err(|_| parse_err(lineno, col, format!("invalid entry `{tok}`")))?;
            entries.push(v);
        }
    }
    if let Some((lineno, line)) = lines.next() {
        let col = tokens(line).first().map_or(1, |t| t.0);
        return Err(parse_err(lineno, col, "unexpected content after matrix"));
    }
    MpMatrix::new(dim, entries)
}

pub fn parse_matrix(text: &str) -> Result<MpMatrix> {
    parse_matrix_at(text, 0)
}

/// Inverse of [`parse_matrix`]; rationals and floats round-trip bit-exactly.
pub fn format_matrix(m: &MpMatrix) -> String {
    let d = m.dim();
    let cells: Vec<String> = m.entries().iter().map(ToString::to_string).collect();
    let width = cells.iter().map(String::len).max().unwrap_or(1);
    let mut out = format!("{d}\n");
    for i in 0..d {
        let row: Vec<String> = cells[i * d..(i + 1) * d]
            .iter()
            .map(|c| format!("{c:>width$}"))
            .collect();
        out.push_str(row.join(" ").trim_start());
        out.push('\n');
    }
    out
}
