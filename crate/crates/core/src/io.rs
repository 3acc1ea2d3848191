//! Plain-text formats for fields, RPS lists and fitted potentials.
//!
//! * field: first line `n1 n2 C`, then `n1` lines of `n2` labels;
//! * RPS: one `dr1 dr2` pair per line (`#` starts a comment);
//! * potentials: CSV `dr1,dr2,a,b,value` with a header line;
//! * PGM: ASCII `P2` with `maxval = C`, for image viewers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{pair_index, pair_of_index, Field, Position, PotentialVector, Rps};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn field_to_string(field: &Field) -> String {
    let mut out = String::with_capacity(field.num_sites() * 2 + 16);
    let _ = writeln!(out, "{} {} {}", field.n1(), field.n2(), field.max_label());
    for row in field.values().chunks(field.n2()) {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_field(text: &str, path: &Path) -> Result<Field> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty field file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, hl, format!("bad header: {e}")))?;
    let [n1, n2, c] = dims[..] else {
        return Err(Error::parse(path, hl, "header must be `n1 n2 C`"));
    };
    let mut values = Vec::with_capacity(n1 * n2);
    let mut rows = 0;
    for (ln, line) in lines {
        let row: Vec<u8> = line
            .split_whitespace()
            .map(|t| t.parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, ln, format!("bad label: {e}")))?;
        if row.len() != n2 {
            return Err(Error::parse(
                path,
                ln,
                format!("expected {n2} labels, found {}", row.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n1 {
        return Err(Error::parse(path, hl, format!("expected {n1} rows, found {rows}")));
    }
    Field::new(n1, n2, c, values).map_err(|e| Error::parse(path, hl, e.to_string()))
}

pub fn read_field(path: &Path) -> Result<Field> {
    parse_field(&read(path)?, path)
}

pub fn rps_to_string(rps: &Rps) -> String {
    rps.iter().map(|p| format!("{} {}\n", p.dr1, p.dr2)).collect()
}

pub fn parse_rps(text: &str, path: &Path) -> Result<Rps> {
    let mut positions = Vec::new();
    for (ln, line) in content_lines(text) {
        let nums: Vec<i32> = line
            .split_whitespace()
            .map(|t| t.parse::<i32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, ln, format!("bad offset: {e}")))?;
        let [dr1, dr2] = nums[..] else {
            return Err(Error::parse(path, ln, "expected `dr1 dr2`"));
        };
        positions.push(Position::new(dr1, dr2));
    }
    Rps::new(positions)
}

pub fn read_rps(path: &Path) -> Result<Rps> {
    parse_rps(&read(path)?, path)
}

pub fn theta_to_csv(theta: &PotentialVector) -> String {
    let k = theta.num_labels();
    let mut out = String::from("dr1,dr2,a,b,value\n");
    for (p, block) in theta.blocks() {
        for (idx, v) in block.iter().enumerate() {
            let (a, b) = pair_of_index(idx, k);
            let _ = writeln!(out, "{},{},{},{},{}", p.dr1, p.dr2, a, b, v);
        }
    }
    out
}

/// Reads potentials written by [`theta_to_csv`]. Every free pair of every
/// listed position must be present.
pub fn parse_theta_csv(text: &str, path: &Path, num_labels: usize) -> Result<PotentialVector> {
    let d = num_labels * num_labels - 1;
    let mut blocks: std::collections::BTreeMap<Position, Vec<Option<f64>>> = Default::default();
    for (ln, line) in content_lines(text) {
        if line.starts_with("dr1") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(Error::parse(path, ln, "expected `dr1,dr2,a,b,value`"));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|e| Error::parse(path, ln, e.to_string()));
        let (dr1, dr2, a, b) = (int(cols[0])?, int(cols[1])?, int(cols[2])?, int(cols[3])?);
        let value: f64 = cols[4]
            .parse()
            .map_err(|e| Error::parse(path, ln, format!("bad value: {e}")))?;
        let k = num_labels as i64;
        if !(0..k).contains(&a) || !(0..k).contains(&b) {
            return Err(Error::parse(path, ln, format!("pair ({a},{b}) outside alphabet")));
        }
        let Some(idx) = pair_index(a as usize, b as usize, num_labels) else {
            return Err(Error::parse(path, ln, "reference pair (0,0) is fixed at 0"));
        };
        let p = Position::new(dr1 as i32, dr2 as i32);
        let slot = &mut blocks.entry(p).or_insert_with(|| vec![None; d])[idx];
        if slot.replace(value).is_some() {
            return Err(Error::parse(path, ln, format!("duplicate entry for {p} ({a},{b})")));
        }
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (p, block) in blocks {
        let filled: Option<Vec<f64>> = block.into_iter().collect();
        let filled =
            filled.ok_or_else(|| Error::parse(path, 0, format!("missing pairs for position {p}")))?;
        out.push((p, filled));
    }
    PotentialVector::from_blocks(num_labels, out)
}

pub fn read_theta_csv(path: &Path, num_labels: usize) -> Result<PotentialVector> {
    parse_theta_csv(&read(path)?, path, num_labels)
}

pub fn field_to_pgm(field: &Field) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "P2\n{} {}\n{}", field.n2(), field.n1(), field.max_label());
    for row in field.values().chunks(field.n2()) {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
