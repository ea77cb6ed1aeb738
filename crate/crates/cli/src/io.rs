//! Event, edge-list and split handling.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blockstream::{EdgeList, Error, Event};

/// Where events come from and how they are encoded.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSource {
    /// `src,dst,t` with a header, sorted by `t`; read as a stream.
    Csv(PathBuf),
    /// Whitespace-separated `src dst unix-time`, any order; loaded, sorted and
    /// shifted so the first event is at 0.
    Snap(PathBuf),
}

pub type EventIter = Box<dyn Iterator<Item = Result<Event, Error>>>;

impl EventSource {
    pub fn new(path: PathBuf, format: &str) -> Result<Self> {
        match format {
            "csv" => Ok(EventSource::Csv(path)),
            "snap" => Ok(EventSource::Snap(path)),
            other => bail!("unknown event format `{other}` (expected csv or snap)"),
        }
    }

    pub fn open(&self) -> Result<EventIter> {
        match self {
            EventSource::Csv(path) => Ok(Box::new(CsvEvents::open(path)?)),
            EventSource::Snap(path) => Ok(Box::new(read_snap(path)?.into_iter().map(Ok))),
        }
    }
}

struct CsvEvents {
    reader: csv::Reader<File>,
    record: csv::StringRecord,
    position: usize,
    last: f64,
    done: bool,
}

impl CsvEvents {
    fn open(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .with_context(|| format!("opening events {}", path.display()))?;
        let headers = reader.headers().with_context(|| format!("reading header of {}", path.display()))?;
        if headers.iter().collect::<Vec<_>>() != ["src", "dst", "t"] {
            bail!("{}: expected header `src,dst,t`, got `{}`", path.display(), headers.iter().collect::<Vec<_>>().join(","));
        }
        Ok(Self {
            reader,
            record: csv::StringRecord::new(),
            position: 0,
            last: f64::NEG_INFINITY,
            done: false,
        })
    }

    fn parse(&self) -> Result<Event, Error> {
        let line = self.record.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::invalid(format!("line {line}: {what}"));
        if self.record.len() != 3 {
            return Err(bad(&format!("expected 3 fields, got {}", self.record.len())));
        }
        let src = self.record[0].parse::<u32>().map_err(|_| bad(&format!("bad source id `{}`", &self.record[0])))?;
        let dst = self.record[1].parse::<u32>().map_err(|_| bad(&format!("bad target id `{}`", &self.record[1])))?;
        let t = self.record[2].parse::<f64>().map_err(|_| bad(&format!("bad timestamp `{}`", &self.record[2])))?;
        if !t.is_finite() {
            return Err(bad("timestamp is not finite"));
        }
        Ok(Event::new(src, dst, t))
    }
}

impl Iterator for CsvEvents {
    type Item = Result<Event, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.reader.read_record(&mut self.record) {
            Ok(false) => {
                self.done = true;
                return None;
            }
            Err(e) => Err(Error::invalid(e.to_string())),
            Ok(true) => self.parse().and_then(|e| {
                if e.t < self.last {
                    Err(Error::Unsorted {
                        position: self.position,
                        t: e.t,
                        previous: self.last,
                    })
                } else {
                    Ok(e)
                }
            }),
        };
        match &item {
            Ok(e) => {
                self.last = e.t;
                self.position += 1;
            }
            Err(_) => self.done = true,
        }
        Some(item)
    }
}

/// Reads a SNAP-style temporal edge file; self-loops are dropped.
pub fn read_snap(path: &Path) -> Result<Vec<Event>> {
    let file = File::open(path).with_context(|| format!("opening events {}", path.display()))?;
    let mut events = Vec::new();
    let mut loops = 0usize;
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            bail!("line {}: expected `src dst time`, got `{line}`", no + 1);
        }
        let parse_id = |s: &str| s.parse::<u32>().with_context(|| format!("line {}: bad node id `{s}`", no + 1));
        let (src, dst) = (parse_id(fields[0])?, parse_id(fields[1])?);
        let t: f64 = fields[2].parse().with_context(|| format!("line {}: bad timestamp `{}`", no + 1, fields[2]))?;
        if src == dst {
            loops += 1;
            continue;
        }
        events.push(Event::new(src, dst, t));
    }
    if loops > 0 {
        log::warn!("dropped {loops} self-loop events");
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    if let Some(t0) = events.first().map(|e| e.t) {
        for e in &mut events {
            e.t -= t0;
        }
    }
    Ok(events)
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["src", "dst", "t"])?;
    for e in events {
        w.write_record([e.src.to_string(), e.dst.to_string(), e.t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges(path: &Path, edges: &EdgeList) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["src", "dst"])?;
    for &(s, d) in edges.pairs() {
        w.write_record([s.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edges(path: &Path) -> Result<Vec<(u32, u32)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening edge list {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["src", "dst"] {
        bail!("{}: expected header `src,dst`", path.display());
    }
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            bail!("{}: line {line}: expected 2 fields", path.display());
        }
        let s = rec[0].parse().with_context(|| format!("line {line}: bad source id"))?;
        let d = rec[1].parse().with_context(|| format!("line {line}: bad target id"))?;
        pairs.push((s, d));
    }
    Ok(pairs)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Train/test split at an event-count quantile, plus the edge list the fit uses.
#[derive(Debug, Clone)]
pub struct Split {
    pub n_total: usize,
    /// Events with `t <= t_split` (ties at the boundary go to training).
    pub n_train: usize,
    pub t_split: f64,
    /// Timestamp of the last event.
    pub t_max: f64,
    pub edges: EdgeList,
}

impl Split {
    pub fn n_test(&self) -> usize {
        self.n_total - self.n_train
    }
}

/// `t_split` is the time of the `ceil(fraction * N)`-th event. Without an explicit
/// edge list, `A` is the set of pairs seen in training and `m = 1 + max id`.
pub fn split_train_test(
    source: &EventSource,
    fraction: f64,
    edge_file: Option<&Path>,
    m_override: Option<usize>,
) -> Result<Split> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        bail!("train fraction must lie in (0, 1], got {fraction}");
    }
    let mut n_total = 0;
    let mut t_max = 0.0;
    for e in source.open()? {
        t_max = e?.t;
        n_total += 1;
    }
    if n_total == 0 {
        bail!("event stream is empty");
    }
    // 0.85 * 100 = 85.00000000000001 must not round up to 86
    let x = fraction * n_total as f64;
    let x = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    let n_quantile = (x as usize).clamp(1, n_total);

    let mut pairs = BTreeSet::new();
    let mut t_split = f64::NAN;
    let mut n_train = 0;
    for (i, e) in source.open()?.enumerate() {
        let e = e?;
        if i + 1 == n_quantile {
            t_split = e.t;
        } else if i + 1 > n_quantile && e.t > t_split {
            break;
        }
        pairs.insert(e.pair());
        n_train += 1;
    }
    if n_train == n_total && fraction < 1.0 {
        log::warn!("test split is empty: every event falls at or before t_split = {t_split}");
    }

    let pairs: Vec<(u32, u32)> = match edge_file {
        Some(p) => read_edges(p)?,
        None => pairs.into_iter().collect(),
    };
    let max_id = pairs.iter().map(|&(s, d)| s.max(d) as usize + 1).max().unwrap_or(0);
    let m = m_override.unwrap_or(max_id);
    let edges = EdgeList::new(m, pairs)?;
    Ok(Split {
        n_total,
        n_train,
        t_split,
        t_max,
        edges,
    })
}

/// Streams the training prefix `t <= t_split`.
pub fn train_events(source: &EventSource, t_split: f64) -> Result<EventIter> {
    Ok(Box::new(source.open()?.take_while(move |e| e.as_ref().map_or(true, |e| e.t <= t_split))))
}

/// Streams the test suffix `t > t_split`.
pub fn test_events(source: &EventSource, t_split: f64) -> Result<EventIter> {
    Ok(Box::new(source.open()?.filter(move |e| e.as_ref().map_or(true, |e| e.t > t_split))))
}
