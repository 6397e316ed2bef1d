//! Extended XYZ frames.
//!
//! ```text
//! 2
//! Lattice="10 0 0 0 10 0 0 0 10" Properties=species:S:1:pos:R:3 pbc="T T T" step=0
//! Cu 0 0 0
//! Cu 1.8 1.8 0
//! ```
//! Numbers use the shortest representation that reads back to the same f64,
//! so write -> read -> write is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{AtomicConfig, Cell, Mat3, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct XyzFrame {
    pub config: AtomicConfig,
    /// Extra `key=value` pairs of the comment line, in order.
    pub info: Vec<(String, String)>,
}

impl XyzFrame {
    pub fn new(config: AtomicConfig) -> Self {
        XyzFrame { config, info: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.info.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.info.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn format_frame(frame: &XyzFrame, names: &[String], out: &mut String) -> Result<()> {
    let c = &frame.config;
    let h = c.cell.matrix();
    writeln!(out, "{}", c.n_atoms()).unwrap();
    let lattice: Vec<String> = (0..3).flat_map(|i| (0..3).map(move |k| h[(i, k)].to_string())).collect();
    let pbc: Vec<&str> = c.cell.periodic.iter().map(|&p| if p { "T" } else { "F" }).collect();
    write!(
        out,
        "Lattice=\"{}\" Properties=species:S:1:pos:R:3 pbc=\"{}\"",
        lattice.join(" "),
        pbc.join(" ")
    )
    .unwrap();
    for (k, v) in &frame.info {
        if k.is_empty() || k.contains([' ', '=', '"']) || v.contains(['"', '\n']) {
            return Err(Error::Format(format!("cannot write comment entry {k}={v}")));
        }
        if v.is_empty() || v.contains(' ') {
            write!(out, " {k}=\"{v}\"").unwrap();
        } else {
            write!(out, " {k}={v}").unwrap();
        }
    }
    out.push('\n');
    for (r, &s) in c.positions.iter().zip(&c.species) {
        let name = names
            .get(s)
            .ok_or_else(|| Error::Format(format!("no name for species {s}")))?;
        writeln!(out, "{name} {} {} {}", r[0], r[1], r[2]).unwrap();
    }
    Ok(())
}

/// Splits a comment line into `key=value` pairs, honoring double quotes.
fn parse_comment(line: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut rest = line.trim();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| Error::Format(format!("expected key=value in comment near '{rest}'")))?;
        let key = rest[..eq].trim().to_string();
        rest = &rest[eq + 1..];
        let value;
        if let Some(stripped) = rest.strip_prefix('"') {
            let close = stripped
                .find('"')
                .ok_or_else(|| Error::Format(format!("unterminated quote for key {key}")))?;
            value = stripped[..close].to_string();
            rest = &stripped[close + 1..];
        } else {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            value = rest[..end].to_string();
            rest = &rest[end..];
        }
        pairs.push((key, value));
        rest = rest.trim_start();
    }
    Ok(pairs)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("bad number '{s}' in {what}")))
}

/// Parses every frame of an extended XYZ text. `names` maps species names to
/// indices.
pub fn parse_xyz(text: &str, names: &[String]) -> Result<Vec<XyzFrame>> {
    let mut lines = text.lines().enumerate();
    let mut frames = Vec::new();
    while let Some((ln, count_line)) = lines.next() {
        if count_line.trim().is_empty() {
            continue;
        }
        let n: usize = count_line
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("line {}: expected atom count", ln + 1)))?;
        let (cl, comment) = lines
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing comment line", ln + 2)))?;
        let mut lattice = None;
        let mut pbc = [true; 3];
        let mut info = Vec::new();
        for (k, v) in parse_comment(comment).map_err(|e| Error::Format(format!("line {}: {e}", cl + 1)))? {
            match k.as_str() {
                "Lattice" => {
                    let vals: Vec<f64> =
                        v.split_whitespace().map(|s| parse_f64(s, "Lattice")).collect::<Result<_>>()?;
                    if vals.len() != 9 {
                        return Err(Error::Format(format!("line {}: Lattice needs 9 numbers", cl + 1)));
                    }
                    lattice = Some(Mat3::from_row_slice(&vals));
                }
                "pbc" => {
                    let flags: Vec<bool> = v.split_whitespace().map(|s| s == "T" || s == "True").collect();
                    if flags.len() != 3 {
                        return Err(Error::Format(format!("line {}: pbc needs 3 flags", cl + 1)));
                    }
                    pbc = [flags[0], flags[1], flags[2]];
                }
                "Properties" => {
                    if !v.starts_with("species:S:1:pos:R:3") {
                        return Err(Error::Format(format!("line {}: unsupported Properties {v}", cl + 1)));
                    }
                }
                _ => info.push((k, v)),
            }
        }
        let lattice =
            lattice.ok_or_else(|| Error::Format(format!("line {}: comment has no Lattice", cl + 1)))?;
        let mut positions = Vec::with_capacity(n);
        let mut species = Vec::with_capacity(n);
        for _ in 0..n {
            let (al, atom) = lines
                .next()
                .ok_or_else(|| Error::Format(format!("frame truncated, expected {n} atoms")))?;
            let mut f = atom.split_whitespace();
            let name = f.next().unwrap_or("");
            let s = names
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| Error::Format(format!("line {}: unknown species '{name}'", al + 1)))?;
            let xyz: Vec<f64> = f.take(3).map(|v| parse_f64(v, "position")).collect::<Result<_>>()?;
            if xyz.len() != 3 {
                return Err(Error::Format(format!("line {}: expected 3 coordinates", al + 1)));
            }
            species.push(s);
            positions.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
        }
        let config = AtomicConfig::new(positions, species, Cell::new(lattice, pbc)?)?;
        frames.push(XyzFrame { config, info });
    }
    Ok(frames)
}

pub fn write_xyz(path: impl AsRef<Path>, frames: &[XyzFrame], names: &[String]) -> Result<()> {
    let mut s = String::new();
    for f in frames {
        format_frame(f, names, &mut s)?;
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_xyz(path: impl AsRef<Path>, names: &[String]) -> Result<Vec<XyzFrame>> {
    parse_xyz(&fs::read_to_string(path)?, names)
}
