//! Spot price trace CSV: `timestamp,vm_type,spot_price,available`.
//!
//! Rows may interleave types; per type, timestamps must strictly increase.
//! Available prices at or above the on-demand price are clipped just below it.

use std::io::{Read, Write};
use std::path::Path;

use dcd_core::pricing::SpotSample;
use dcd_core::{SpotTrace, VmTypeSpec};
use serde::{Deserialize, Serialize};

use crate::catalog::{check_header, line_of};
use crate::error::{io_err, parse_err, Result};

pub const SPOT_HEADER: [&str; 4] = ["timestamp", "vm_type", "spot_price", "available"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    timestamp: f64,
    vm_type: String,
    spot_price: f64,
    available: u8,
}

/// Parses a trace against `catalog`; returns it with the number of clipped samples.
pub fn read_spot_trace(
    reader: impl Read,
    file: &str,
    catalog: &[VmTypeSpec],
) -> Result<(SpotTrace, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(file, 1, e.to_string()))?
        .clone();
    check_header(file, &headers, &SPOT_HEADER)?;
    let mut series: Vec<Vec<SpotSample>> = vec![Vec::new(); catalog.len()];
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| parse_err(file, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = line_of(&rec);
        let row: Row = rec
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(file, line, e.to_string()))?;
        let Some(ty) = catalog.iter().position(|s| s.name == row.vm_type) else {
            return Err(parse_err(
                file,
                line,
                format!("unknown vm_type `{}`", row.vm_type),
            ));
        };
        if !row.timestamp.is_finite() || row.timestamp < 0.0 {
            return Err(parse_err(
                file,
                line,
                format!("bad timestamp {}", row.timestamp),
            ));
        }
        if !(row.spot_price > 0.0 && row.spot_price.is_finite()) {
            return Err(parse_err(
                file,
                line,
                format!("spot_price must be positive (got {})", row.spot_price),
            ));
        }
        if row.available > 1 {
            return Err(parse_err(
                file,
                line,
                format!("available must be 0 or 1 (got {})", row.available),
            ));
        }
        let s = &mut series[ty];
        if let Some(prev) = s.last() {
            if row.timestamp <= prev.time {
                return Err(parse_err(
                    file,
                    line,
                    format!(
                        "timestamp {} for `{}` does not follow {}",
                        row.timestamp, row.vm_type, prev.time
                    ),
                ));
            }
        }
        s.push(SpotSample {
            time: row.timestamp,
            price: row.spot_price,
            available: row.available == 1,
        });
    }
    let names: Vec<&str> = catalog.iter().map(|s| s.name.as_str()).collect();
    let mut trace = SpotTrace::new(series, &names)?;
    let clipped = trace.clip_to_catalog(catalog);
    if clipped > 0 {
        log::warn!("{file}: clipped {clipped} spot prices to just below the on-demand price");
    }
    Ok((trace, clipped))
}

pub fn load_spot_trace(path: &Path, catalog: &[VmTypeSpec]) -> Result<(SpotTrace, usize)> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    read_spot_trace(f, &path.display().to_string(), catalog)
}

/// Writes samples in time order, types in catalog order at equal times.
pub fn write_spot_trace(
    trace: &SpotTrace,
    catalog: &[VmTypeSpec],
    writer: impl Write,
) -> Result<()> {
    let mut rows: Vec<(f64, usize, SpotSample)> = (0..trace.types())
        .flat_map(|ty| trace.series(ty).iter().map(move |s| (s.time, ty, *s)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut w = csv::Writer::from_writer(writer);
    for (_, ty, s) in rows {
        w.serialize(Row {
            timestamp: s.time,
            vm_type: catalog[ty].name.clone(),
            spot_price: s.price,
            available: u8::from(s.available),
        })?;
    }
    w.flush()?;
    Ok(())
}
