//! Count tables as CSV: header `x,y,a,b,count`, one row per nonzero cell.

use std::io::{Read, Write};

use bellfit_core::bell::cells;
use bellfit_core::DataTable;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const HEADER: [&str; 5] = ["x", "y", "a", "b", "count"];

#[derive(Serialize, Deserialize)]
struct Row {
    x: u8,
    y: u8,
    a: u8,
    b: u8,
    count: u64,
}

pub fn write_table<W: Write>(table: &DataTable, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    // serializing the first row emits the header; an empty table still needs one
    if table.total() == 0 {
        w.write_record(HEADER)?;
    }
    for (x, y, a, b) in cells() {
        let count = table.get(x, y, a, b);
        if count > 0 {
            w.serialize(Row {
                x: x as u8,
                y: y as u8,
                a: a as u8,
                b: b as u8,
                count,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn table_to_string(table: &DataTable) -> String {
    let mut buf = Vec::new();
    write_table(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

/// Parses a count table. Missing cells count as zero; repeated cells,
/// indices outside {0, 1} and a wrong header are rejected.
pub fn read_table<R: Read>(input: R) -> CliResult<DataTable> {
    let mut r = csv::ReaderBuilder::new().from_reader(input);
    let header = r.headers().map_err(|e| CliError::config("table", e))?;
    if header.iter().ne(HEADER) {
        return Err(CliError::Config(format!(
            "table: expected header x,y,a,b,count, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = DataTable::default();
    let mut seen = [false; 16];
    for (line, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CliError::config("table", e))?;
        if row.x > 1 || row.y > 1 || row.a > 1 || row.b > 1 {
            return Err(CliError::Config(format!("table: row {} has an index outside {{0, 1}}", line + 1)));
        }
        let (x, y, a, b) = (row.x as usize, row.y as usize, row.a as usize, row.b as usize);
        let idx = bellfit_core::bell::cell(x, y, a, b);
        if std::mem::replace(&mut seen[idx], true) {
            return Err(CliError::Config(format!("table: cell x={x} y={y} a={a} b={b} appears twice")));
        }
        table.add(x, y, a, b, row.count);
    }
    Ok(table)
}
