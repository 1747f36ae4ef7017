//! `t_us,x,y,p` text interchange.
//!
//! The text carries no geometry, so readers supply it.

use thiserror::Error;

use crate::event::{Event, EventStream, Polarity, SensorGeometry, Violation};

pub const HEADER: &str = "t_us,x,y,p";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {violation}")]
    Invalid { line: u64, violation: Violation },
}

pub fn write_csv(stream: &EventStream) -> String {
    let mut out = String::with_capacity(HEADER.len() + 1 + stream.len() * 16);
    out.push_str(HEADER);
    out.push('\n');
    for e in &stream.events {
        use std::fmt::Write;
        let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.sign());
    }
    out
}

pub fn read_csv(text: &str, geometry: SensorGeometry) -> Result<EventStream, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();

    match records.next() {
        Some(Ok(h)) if h.iter().eq(HEADER.split(',')) => {}
        Some(Err(e)) => return Err(csv_err(e)),
        _ => {
            return Err(CsvError::Parse {
                line: 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
    }

    let mut events = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str, CsvError> {
            rec.get(i).ok_or_else(|| CsvError::Parse {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            })
        };
        if rec.len() != 4 {
            return Err(CsvError::Parse {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let parse_err = |name: &str, v: &str| CsvError::Parse {
            line,
            message: format!("bad {name} `{v}`"),
        };
        let t: u64 = field(0)?.parse().map_err(|_| parse_err("t_us", &rec[0]))?;
        let x: u16 = field(1)?.parse().map_err(|_| parse_err("x", &rec[1]))?;
        let y: u16 = field(2)?.parse().map_err(|_| parse_err("y", &rec[2]))?;
        let p = field(3)?
            .parse::<i64>()
            .ok()
            .and_then(Polarity::from_sign)
            .ok_or_else(|| parse_err("p", &rec[3]))?;
        events.push((line, Event { t, x, y, p }));
    }

    let lines: Vec<u64> = events.iter().map(|(l, _)| *l).collect();
    let stream = EventStream::new(geometry, events.into_iter().map(|(_, e)| e).collect());
    if let Some(violation) = stream.validate().violation {
        return Err(CsvError::Invalid {
            line: lines[violation.index()],
            violation,
        });
    }
    Ok(stream)
}

fn csv_err(e: csv::Error) -> CsvError {
    let line = e.position().map_or(0, |p| p.line());
    CsvError::Parse {
        line,
        message: e.to_string(),
    }
}
