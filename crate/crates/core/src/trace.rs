//! On-disk formats: JSON-lines traces and results, CSV ground truth.
//!
//! Every float written here is first rounded to 9 significant digits, so a
//! file read back and written again is byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::rti::RssSample;
use crate::sim::TruthRecord;
use crate::uwb::CirFrame;

pub const RSS_FILE: &str = "rss.jsonl";
pub const CIR_FILE: &str = "cir.jsonl";
pub const TRUTH_FILE: &str = "truth.csv";
pub const CONFIG_FILE: &str = "resolved-config.json";
pub const ESTIMATES_FILE: &str = "estimates.jsonl";
pub const ESTIMATES_CSV: &str = "estimates.csv";
pub const TRACKS_FILE: &str = "tracks.jsonl";

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceRecord {
    Rss { t: f64, link: usize, channel: u8, dbm: f64 },
    Cir { t: f64, energies: Vec<f64> },
}

impl From<&RssSample> for TraceRecord {
    fn from(s: &RssSample) -> Self {
        TraceRecord::Rss { t: s.t, link: s.link, channel: s.channel, dbm: s.rss }
    }
}

impl From<&CirFrame> for TraceRecord {
    fn from(f: &CirFrame) -> Self {
        TraceRecord::Cir { t: f.t, energies: f.energies.clone() }
    }
}

/// `v` rounded to 9 significant digits.
pub fn canonical(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(c) = n.as_f64().and_then(|f| serde_json::Number::from_f64(canonical(f))) {
                *n = c;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Compact JSON of `value` with canonical floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Data(e.to_string()))?;
    canonicalize(&mut v);
    Ok(v.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes one canonical JSON object per line.
pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = create(path)?;
    let mut n = 0;
    for item in items {
        writeln!(w, "{}", to_canonical_json(item)?).map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}

/// Reads one JSON object per line; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item =
            serde_json::from_str(&line).map_err(|source| Error::Parse { path: path.into(), line: i + 1, source })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_rss(path: &Path, samples: &[RssSample]) -> Result<usize> {
    let records: Vec<TraceRecord> = samples.iter().map(TraceRecord::from).collect();
    write_jsonl(path, &records)
}

pub fn write_cir(path: &Path, frames: &[CirFrame]) -> Result<usize> {
    let records: Vec<TraceRecord> = frames.iter().map(TraceRecord::from).collect();
    write_jsonl(path, &records)
}

/// Splits trace records into the two streams, keeping file order.
pub fn split(records: Vec<TraceRecord>) -> (Vec<RssSample>, Vec<CirFrame>) {
    let mut rss = Vec::new();
    let mut cir = Vec::new();
    for r in records {
        match r {
            TraceRecord::Rss { t, link, channel, dbm } => rss.push(RssSample { t, link, channel, rss: dbm }),
            TraceRecord::Cir { t, energies } => cir.push(CirFrame { t, energies }),
        }
    }
    (rss, cir)
}

/// Reads `rss.jsonl` and `cir.jsonl` from a trace directory.
pub fn read_traces(dir: &Path) -> Result<(Vec<RssSample>, Vec<CirFrame>)> {
    let (rss, _) = split(read_jsonl(&dir.join(RSS_FILE))?);
    let (_, cir) = split(read_jsonl(&dir.join(CIR_FILE))?);
    Ok((rss, cir))
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    t: f64,
    x: Option<f64>,
    y: Option<f64>,
    k_star: Option<usize>,
}

pub fn write_truth(path: &Path, records: &[TruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(TruthRow {
            t: canonical(r.t),
            x: r.position.map(|p| canonical(p.x)),
            y: r.position.map(|p| canonical(p.y)),
            k_star: r.k_star,
        })
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: TruthRow = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let position = match (row.x, row.y) {
            (Some(x), Some(y)) => Some(Point::new(x, y)),
            (None, None) => None,
            _ => return Err(Error::Data(format!("{}: t={} has only one coordinate", path.display(), row.t))),
        };
        out.push(TruthRecord { t: row.t, position, k_star: row.k_star });
    }
    Ok(out)
}
