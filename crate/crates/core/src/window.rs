//! Splitting a sorted event stream into consecutive time windows.

use crate::error::{Error, Result};
use crate::model::{Event, WindowConfig};

/// One window of a partitioned stream, borrowing its events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSlice<'a> {
    /// 1-based window index.
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub events: &'a [Event],
}

/// Partitions `events` into `cfg.n_windows` slices; empty windows are kept.
pub fn partition_windows<'a>(events: &'a [Event], cfg: &WindowConfig) -> Result<Vec<WindowSlice<'a>>> {
    crate::model::check_sorted(events)?;
    if let Some(e) = events.iter().find(|e| e.t < 0.0 || e.t > cfg.horizon) {
        return Err(Error::TimeOutOfRange {
            t: e.t,
            horizon: cfg.horizon,
        });
    }
    let mut out = Vec::with_capacity(cfg.n_windows);
    let mut lo = 0;
    for n in 1..=cfg.n_windows {
        let (start, end) = cfg.bounds(n);
        let hi = if n == cfg.n_windows {
            events.len()
        } else {
            lo + events[lo..].partition_point(|e| e.t < end)
        };
        out.push(WindowSlice {
            index: n,
            start,
            end,
            events: &events[lo..hi],
        });
        lo = hi;
    }
    Ok(out)
}

/// An owned window produced by [`WindowStream`].
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedWindow {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub events: Vec<Event>,
}

/// Groups a fallible, sorted event iterator into windows without buffering
/// more than one window of events.
pub struct WindowStream<I> {
    inner: I,
    cfg: WindowConfig,
    next_index: usize,
    pending: Option<Event>,
    last_t: f64,
    position: usize,
    failed: bool,
}

impl<I, E> WindowStream<I>
where
    I: Iterator<Item = std::result::Result<Event, E>>,
    E: Into<crate::Error>,
{
    pub fn new(inner: I, cfg: WindowConfig) -> Self {
        Self {
            inner,
            cfg,
            next_index: 1,
            pending: None,
            last_t: f64::NEG_INFINITY,
            position: 0,
            failed: false,
        }
    }

    fn pull(&mut self) -> Option<Result<Event>> {
        if let Some(e) = self.pending.take() {
            return Some(Ok(e));
        }
        let item = self.inner.next()?;
        let e = match item {
            Ok(e) => e,
            Err(err) => return Some(Err(err.into())),
        };
        if e.t < self.last_t || e.t.is_nan() {
            return Some(Err(Error::Unsorted {
                position: self.position,
                t: e.t,
                previous: self.last_t,
            }));
        }
        if e.t < 0.0 || e.t > self.cfg.horizon {
            return Some(Err(Error::TimeOutOfRange {
                t: e.t,
                horizon: self.cfg.horizon,
            }));
        }
        self.last_t = e.t;
        self.position += 1;
        Some(Ok(e))
    }
}

impl<I, E> Iterator for WindowStream<I>
where
    I: Iterator<Item = std::result::Result<Event, E>>,
    E: Into<crate::Error>,
{
    type Item = Result<OwnedWindow>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_index > self.cfg.n_windows {
            return None;
        }
        let n = self.next_index;
        let (start, end) = self.cfg.bounds(n);
        let last = n == self.cfg.n_windows;
        let mut events = Vec::new();
        while let Some(item) = self.pull() {
            match item {
                Ok(e) if last || e.t < end => events.push(e),
                Ok(e) => {
                    self.pending = Some(e);
                    break;
                }
                Err(err) => {
                    self.failed = true;
                    return Some(Err(err));
                }
            }
        }
        self.next_index += 1;
        Some(Ok(OwnedWindow {
            index: n,
            start,
            end,
            events,
        }))
    }
}
