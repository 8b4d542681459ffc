use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::{Common, FormatArg};

pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_csv<R: Serialize>(w: &mut dyn Write, rows: &[R]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(w: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Rows as CSV, or `{"rows": …, "summary": …}` as JSON.
pub fn emit<R: Serialize, S: Serialize>(common: &Common, rows: &[R], summary: Option<&S>) -> Result<()> {
    let mut w = sink(common.out.as_deref())?;
    match common.format {
        FormatArg::Csv => write_csv(&mut *w, rows)?,
        FormatArg::Json => {
            #[derive(Serialize)]
            struct Doc<'a, R, S> {
                rows: &'a [R],
                #[serde(skip_serializing_if = "Option::is_none")]
                summary: Option<&'a S>,
            }
            write_json(&mut *w, &Doc { rows, summary })?;
        }
    }
    w.flush()?;
    Ok(())
}
