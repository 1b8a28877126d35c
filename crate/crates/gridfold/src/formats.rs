//! On-disk formats.
//!
//! Graph files are plain text:
//!
//! ```text
//! # optional comment lines
//! L k seed
//! x1 y1 x2 y2
//! ...
//! ```
//!
//! with one long-range shortcut per line, in the order the generator
//! produced them, so dumping and reloading is byte-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use gridfold_core::transport::DiscreteMeasure;
use gridfold_core::{GridGraph, NodeId};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::RunError;

/// Version of every JSON and table schema written by the CLI.
pub const SCHEMA_VERSION: u32 = 1;

pub fn graph_to_string(g: &GridGraph) -> String {
    let mut s = String::new();
    writeln!(s, "{} {} {}", g.side(), g.shortcuts_per_node(), g.seed()).unwrap();
    for (a, b) in g.shortcuts() {
        writeln!(s, "{} {} {} {}", a.x, a.y, b.x, b.y).unwrap();
    }
    s
}

pub fn graph_from_str(text: &str) -> Result<GridGraph, RunError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| RunError::invalid("graph_file", "missing `L k seed` header"))?;
    let nums = |line_no: usize, line: &str, want: usize| -> Result<Vec<u64>, RunError> {
        let v: Result<Vec<u64>, _> = line.split_whitespace().map(str::parse).collect();
        match v {
            Ok(v) if v.len() == want => Ok(v),
            _ => Err(RunError::invalid(
                "graph_file",
                format!("line {}: expected {want} non-negative integers", line_no + 1),
            )),
        }
    };
    let h = nums(0, header, 3)?;
    let side = u32::try_from(h[0]).map_err(|_| RunError::invalid("graph_file", "L out of range"))?;
    let k = u32::try_from(h[1]).map_err(|_| RunError::invalid("graph_file", "k out of range"))?;
    let mut pairs = Vec::new();
    for (i, line) in lines {
        let v = nums(i, line, 4)?;
        let c = |x: u64| u32::try_from(x).map_err(|_| RunError::invalid("graph_file", format!("line {}: coordinate out of range", i + 1)));
        pairs.push((NodeId::new(c(v[0])?, c(v[1])?), NodeId::new(c(v[2])?, c(v[3])?)));
    }
    Ok(GridGraph::from_parts(side, k, h[2], pairs)?)
}

pub fn save_graph(g: &GridGraph, path: &Path) -> Result<(), RunError> {
    write_text(path, &graph_to_string(g))
}

pub fn load_graph(path: &Path) -> Result<GridGraph, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    graph_from_str(&text)
}

/// Identity of a bounds query: grid side, seed, and a hash of the atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureDigest {
    #[serde(rename = "L")]
    pub side: u32,
    pub seed: u64,
    /// SHA-256 over `x y mass-bits` lines for each atom, then the sink.
    pub atoms_sha256: String,
}

pub fn measure_digest(m: &DiscreteMeasure, side: u32, seed: u64) -> MeasureDigest {
    let mut h = Sha256::new();
    for (v, a) in m.atoms() {
        h.update(format!("{} {} {:016x}\n", v.x, v.y, a.to_bits()));
    }
    h.update(format!("sink {} {}\n", m.sink().x, m.sink().y));
    MeasureDigest {
        side,
        seed,
        atoms_sha256: hex::encode(h.finalize()),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, RunError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| RunError::io(path, e))?))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| RunError::io(path, e))?;
    w.flush().map_err(|e| RunError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// One compact JSON object per line.
pub fn write_json_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| RunError::io(path, e))?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// Checks that every row is a flat record with the same columns and only
/// finite numbers.
pub fn validate_rows<T: Serialize>(stem: &str, rows: &[T]) -> Result<(), RunError> {
    let mut columns: Option<Vec<String>> = None;
    for (i, row) in rows.iter().enumerate() {
        let serde_json::Value::Object(map) = serde_json::to_value(row)? else {
            return Err(RunError::Format(format!("{stem}: row {i} is not a record")));
        };
        for (key, v) in &map {
            let ok = match v {
                serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
                serde_json::Value::Bool(_) | serde_json::Value::String(_) => true,
                _ => false,
            };
            if !ok {
                return Err(RunError::Format(format!("{stem}: row {i} column `{key}` is {v}")));
            }
        }
        let keys: Vec<String> = map.keys().cloned().collect();
        match &columns {
            None => columns = Some(keys),
            Some(c) if *c != keys => {
                return Err(RunError::Format(format!("{stem}: row {i} has columns {keys:?}, expected {c:?}")));
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Validates `rows`, writes them to `<dir>/<stem>.<ext>` in the chosen
/// format and returns the path.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, format: Format, rows: &[T]) -> Result<std::path::PathBuf, RunError> {
    validate_rows(stem, rows)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&path, rows)?,
        Format::JsonLines => write_json_lines(&path, rows)?,
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gridfold_core::grid::{augment_smallworld, build_grid};

    #[test]
    fn graph_text_round_trips() {
        let g = augment_smallworld(&build_grid(8).unwrap(), 2, 17).unwrap();
        let text = graph_to_string(&g);
        let back = graph_from_str(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(graph_to_string(&back), text);
    }

    #[test]
    fn malformed_graph_is_rejected() {
        assert!(graph_from_str("").is_err());
        assert!(graph_from_str("4 1 0\n0 0 9 9\n").is_err());
        assert!(graph_from_str("4 1 0\n0 0 1\n").is_err());
        assert!(graph_from_str("# c\n4 0 0\n").is_ok());
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        #[derive(Serialize)]
        struct Row {
            x: f64,
        }
        assert!(validate_rows("t", &[Row { x: 1.0 }, Row { x: 2.0 }]).is_ok());
        assert!(validate_rows("t", &[Row { x: f64::NAN }]).is_err());
    }

    #[test]
    fn digest_depends_on_masses() {
        let nodes = [NodeId::new(1, 1), NodeId::new(2, 0)];
        let a = DiscreteMeasure::uniform(&nodes, NodeId::new(0, 0)).unwrap();
        let b = DiscreteMeasure::new(vec![(nodes[0], 0.25), (nodes[1], 0.75)], NodeId::new(0, 0)).unwrap();
        assert_ne!(measure_digest(&a, 4, 0), measure_digest(&b, 4, 0));
        assert_eq!(measure_digest(&a, 4, 0), measure_digest(&a, 4, 0));
    }
}
