//! Conversion of raw records (text, IPv4 addresses, decimals, timestamps)
//! into item streams over a declared integer domain.

use std::io::BufRead;
use std::net::Ipv4Addr;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::error::{bad_params, Error, Result};
use crate::stream::VecStream;

#[derive(Debug, Clone, PartialEq)]
pub enum IngestMode {
    /// Every word (ASCII letters only, lowercased) of at least `len` letters
    /// contributes its `len`-letter prefix, encoded base 26 in lexicographic order.
    TextPrefix { len: u32 },
    /// The top three bytes of an IPv4 address.
    Ipv4Prefix,
    /// A decimal value rounded to the nearest multiple of `step`, bucketed over `[min, max]`.
    DecimalBucket { step: f64, min: f64, max: f64 },
    /// A timestamp's (day of week, hour, minute, second), in seconds since Monday 00:00:00.
    Timestamp,
}

const WEEK_SECONDS: u64 = 7 * 24 * 3600;

impl IngestMode {
    pub fn domain_size(&self) -> Result<u64> {
        match self {
            IngestMode::TextPrefix { len } => {
                if *len == 0 || *len > 13 {
                    return Err(bad_params("prefix length must lie in [1..13]"));
                }
                Ok(26u64.pow(*len))
            }
            IngestMode::Ipv4Prefix => Ok(1 << 24),
            IngestMode::DecimalBucket { step, min, max } => {
                if !(*step > 0.0) || !(min < max) {
                    return Err(bad_params("need step > 0 and min < max"));
                }
                Ok(((max - min) / step).round() as u64 + 1)
            }
            IngestMode::Timestamp => Ok(WEEK_SECONDS),
        }
    }
}

fn text_prefix_items(line: &str, len: usize, out: &mut Vec<u64>) {
    for word in line.split(|c: char| !c.is_ascii_alphabetic()) {
        if word.len() < len {
            continue;
        }
        let item = word.bytes().take(len).fold(0u64, |acc, b| acc * 26 + (b.to_ascii_lowercase() - b'a') as u64);
        out.push(item + 1);
    }
}

fn parse_record(mode: &IngestMode, field: &str, line: usize) -> Result<u64> {
    let err = |msg: String| Error::Parse { line, msg };
    match mode {
        IngestMode::Ipv4Prefix => {
            let ip: Ipv4Addr = field.parse().map_err(|_| err(format!("bad IPv4 address {field:?}")))?;
            let [a, b, c, _] = ip.octets();
            Ok(((a as u64) << 16 | (b as u64) << 8 | c as u64) + 1)
        }
        IngestMode::DecimalBucket { step, min, max } => {
            let v: f64 = field.parse().map_err(|_| err(format!("bad number {field:?}")))?;
            if !v.is_finite() || v < *min - step / 2.0 || v > *max + step / 2.0 {
                return Err(err(format!("value {v} outside [{min}, {max}]")));
            }
            let bucket = (v / step).round() as i64 - (min / step).round() as i64;
            Ok(bucket.max(0) as u64 + 1)
        }
        IngestMode::Timestamp => {
            let ts = NaiveDateTime::parse_from_str(field, "%Y-%m-%d %H:%M:%S")
                .or_else(|_| NaiveDateTime::parse_from_str(field, "%Y-%m-%dT%H:%M:%S"))
                .map_err(|_| err(format!("bad timestamp {field:?}")))?;
            let dow = ts.weekday().num_days_from_monday() as u64;
            Ok(((dow * 24 + ts.hour() as u64) * 60 + ts.minute() as u64) * 60 + ts.second() as u64 + 1)
        }
        IngestMode::TextPrefix { .. } => unreachable!("text is tokenized per line"),
    }
}

/// Reads records and maps each to an item. For the per-record modes,
/// `column` selects a comma-separated field (whole line when `None`); blank
/// lines and lines starting with `#` are skipped.
pub fn ingest<R: BufRead>(reader: R, mode: &IngestMode, column: Option<usize>) -> Result<VecStream> {
    let n = mode.domain_size()?;
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if let IngestMode::TextPrefix { len } = mode {
            text_prefix_items(&line, *len as usize, &mut items);
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let field = match column {
            None => trimmed,
            Some(c) => trimmed
                .split(',')
                .nth(c)
                .map(str::trim)
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("missing column {c}"),
                })?,
        };
        let item = parse_record(mode, field, lineno)?;
        if item > n {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("item {item} outside domain [1..{n}]"),
            });
        }
        items.push(item);
    }
    VecStream::from_items(n, items)
}

pub fn ingest_file(path: impl AsRef<Path>, mode: &IngestMode, column: Option<usize>) -> Result<VecStream> {
    let f = std::fs::File::open(path)?;
    ingest(std::io::BufReader::new(f), mode, column)
}
