//! VM catalog CSV: `name,memory_gib,compute_power,price_on_demand,price_reserved`.

use std::io::{Read, Write};
use std::path::Path;

use dcd_core::VmTypeSpec;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, parse_err, Result};

pub const CATALOG_HEADER: [&str; 5] = [
    "name",
    "memory_gib",
    "compute_power",
    "price_on_demand",
    "price_reserved",
];

/// The shipped catalog file.
pub const DEFAULT_CATALOG_CSV: &str = include_str!("../data/catalog.csv");

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    name: String,
    memory_gib: f64,
    compute_power: f64,
    price_on_demand: f64,
    price_reserved: f64,
}

pub(crate) fn check_header(
    file: &str,
    headers: &csv::StringRecord,
    expected: &[&str],
) -> Result<()> {
    for (i, want) in expected.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h.trim() == *want => {}
            Some(h) => {
                return Err(parse_err(
                    file,
                    1,
                    format!("column {} is `{h}`, expected `{want}`", i + 1),
                ))
            }
            None => return Err(parse_err(file, 1, format!("missing column `{want}`"))),
        }
    }
    Ok(())
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn read_catalog(reader: impl Read, file: &str) -> Result<Vec<VmTypeSpec>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(file, 1, e.to_string()))?
        .clone();
    check_header(file, &headers, &CATALOG_HEADER)?;
    let mut out: Vec<VmTypeSpec> = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| parse_err(file, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&rec);
        let row: Row = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(file, line, e.to_string()))?;
        if out.iter().any(|s| s.name == row.name) {
            return Err(parse_err(
                file,
                line,
                format!("duplicate VM type `{}`", row.name),
            ));
        }
        let spec = VmTypeSpec::new(
            row.name,
            row.memory_gib,
            row.compute_power,
            row.price_on_demand,
            row.price_reserved,
        )
        .map_err(|e| parse_err(file, line, e.to_string()))?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(parse_err(file, 1, "catalog has no VM types"));
    }
    Ok(out)
}

pub fn load_catalog(path: &Path) -> Result<Vec<VmTypeSpec>> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_catalog(f, &path.display().to_string())
}

pub fn default_catalog() -> Vec<VmTypeSpec> {
    read_catalog(DEFAULT_CATALOG_CSV.as_bytes(), "catalog.csv").expect("shipped catalog is valid")
}

pub fn write_catalog(catalog: &[VmTypeSpec], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in catalog {
        w.serialize(Row {
            name: s.name.clone(),
            memory_gib: s.memory,
            compute_power: s.compute_power,
            price_on_demand: s.price_on_demand,
            price_reserved: s.price_reserved,
        })?;
    }
    w.flush()?;
    Ok(())
}
