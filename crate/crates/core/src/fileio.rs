//! Line-oriented text formats.
//!
//! Instance file: a header `n d n0`, then `n0` lines `i j lower_sq upper_sq`
//! with 1-based node labels. Positions file (ground truth or estimates):
//! `n` lines `i x y`, 1-based, one per node. Reals are written in
//! scientific notation with 11 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Configuration, Edge, NetworkInstance, DIMENSION};

/// Formats a real for any emitted file.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.10e}")
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(
    token: Option<&str>,
    path: &str,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = token.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} from {tok:?}")))
}

/// Serializes an instance to the text format.
pub fn instance_to_string(net: &NetworkInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        net.node_count(),
        net.dimension(),
        net.edge_count()
    );
    for e in net.edges() {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            e.i + 1,
            e.j + 1,
            fmt_real(e.lower_sq),
            fmt_real(e.upper_sq)
        );
    }
    out
}

/// Parses an instance from text; `path` labels errors.
pub fn instance_from_str(text: &str, path: &str) -> Result<NetworkInstance> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut toks = header.split_whitespace();
    let n: usize = parse_field(toks.next(), path, line_no + 1, "node count")?;
    let d: usize = parse_field(toks.next(), path, line_no + 1, "dimension")?;
    let n0: usize = parse_field(toks.next(), path, line_no + 1, "edge count")?;
    if d != DIMENSION {
        return Err(parse_err(
            path,
            line_no + 1,
            format!("unsupported dimension {d}, expected {DIMENSION}"),
        ));
    }
    let mut edges = Vec::with_capacity(n0);
    for _ in 0..n0 {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("expected {n0} edge lines")))?;
        let mut toks = line.split_whitespace();
        let i: usize = parse_field(toks.next(), path, line_no + 1, "node index i")?;
        let j: usize = parse_field(toks.next(), path, line_no + 1, "node index j")?;
        let lower_sq: f64 = parse_field(toks.next(), path, line_no + 1, "lower_sq")?;
        let upper_sq: f64 = parse_field(toks.next(), path, line_no + 1, "upper_sq")?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(parse_err(
                path,
                line_no + 1,
                format!("node label out of range 1..={n}"),
            ));
        }
        edges.push(Edge {
            i: i - 1,
            j: j - 1,
            lower_sq,
            upper_sq,
        });
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(parse_err(path, line_no + 1, "trailing content after edges"));
    }
    NetworkInstance::new(n, edges)
        .map_err(|e| parse_err(path, 0, format!("invalid instance: {e}")))
}

/// Serializes node positions to the text format.
pub fn positions_to_string(x: &Configuration) -> String {
    let mut out = String::new();
    for (i, (px, py)) in x.points().enumerate() {
        let _ = writeln!(out, "{} {} {}", i + 1, fmt_real(px), fmt_real(py));
    }
    out
}

/// Parses node positions; labels may appear in any order but must cover
/// `1..=n` exactly once.
pub fn positions_from_str(text: &str, path: &str) -> Result<Configuration> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let i: usize = parse_field(toks.next(), path, line_no + 1, "node label")?;
        let x: f64 = parse_field(toks.next(), path, line_no + 1, "x coordinate")?;
        let y: f64 = parse_field(toks.next(), path, line_no + 1, "y coordinate")?;
        rows.push((i, x, y));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty positions file"));
    }
    let n = rows.len();
    let mut coords = vec![f64::NAN; DIMENSION * n];
    let mut seen = vec![false; n];
    for (i, x, y) in rows {
        if i == 0 || i > n {
            return Err(parse_err(path, 0, format!("node label {i} out of range 1..={n}")));
        }
        if seen[i - 1] {
            return Err(parse_err(path, 0, format!("duplicate node label {i}")));
        }
        seen[i - 1] = true;
        coords[DIMENSION * (i - 1)] = x;
        coords[DIMENSION * (i - 1) + 1] = y;
    }
    Configuration::new(coords)
        .map_err(|e| parse_err(path, 0, format!("invalid positions: {e}")))
}

/// Reads an instance file from disk.
pub fn read_instance(path: &Path) -> Result<NetworkInstance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_str(&text, &path.display().to_string())
}

/// Writes an instance file to disk.
pub fn write_instance(path: &Path, net: &NetworkInstance) -> Result<()> {
    std::fs::write(path, instance_to_string(net))?;
    Ok(())
}

/// Reads a positions file from disk.
pub fn read_positions(path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path)?;
    positions_from_str(&text, &path.display().to_string())
}

/// Writes a positions file to disk.
pub fn write_positions(path: &Path, x: &Configuration) -> Result<()> {
    std::fs::write(path, positions_to_string(x))?;
    Ok(())
}
