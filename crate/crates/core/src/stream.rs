//! Node-arrival streams, the pass scheduler and pass/space accounting.
//!
//! A [`PassConsumer`] declares a window of passes; [`run_multiplexed`] drives
//! several consumers over shared physical passes so that the total pass count
//! is the largest window end rather than the sum. Consumers report the words
//! of state they hold through [`Meter::census`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::similarity::NodeId;

/// Replayable stream `σ_1..σ_n`; every replay yields the same sequence.
#[derive(Clone, Debug)]
pub struct NodeStream {
    n: usize,
    order: Option<Arc<[NodeId]>>,
}

impl NodeStream {
    /// Nodes arrive as `0, 1, .., n-1`.
    pub fn sequential(n: usize) -> Self {
        NodeStream { n, order: None }
    }

    /// Explicit arrival order; must be a permutation of `[0, n)`.
    pub fn with_order(order: Vec<NodeId>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &u in &order {
            if u.index() >= n || std::mem::replace(&mut seen[u.index()], true) {
                return Err(Error::arg(format!("arrival order is not a permutation (node {u})")));
            }
        }
        Ok(NodeStream {
            n,
            order: Some(order.into()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay {
            stream: self,
            pos: 0,
        }
    }
}

pub struct Replay<'a> {
    stream: &'a NodeStream,
    pos: usize,
}

impl Iterator for Replay<'_> {
    type Item = NodeId;

    #[inline]
    fn next(&mut self) -> Option<NodeId> {
        if self.pos >= self.stream.n {
            return None;
        }
        let i = self.pos;
        self.pos += 1;
        Some(match &self.stream.order {
            Some(order) => order[i],
            None => NodeId::from(i),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.stream.n - self.pos;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for Replay<'_> {}

/// Live-word census. One word holds a node id, a rank key, a counter or a
/// list slot.
#[derive(Debug, Default, Clone)]
pub struct Meter {
    live: u64,
    peak: u64,
}

impl Meter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adjusts the live count by `words` (negative on release).
    pub fn census(&mut self, words: i64) -> Result<()> {
        let live = self.live as i64 + words;
        if live < 0 {
            return Err(Error::Accounting(format!(
                "live words would drop to {live} (released {} with {} live)",
                -words, self.live
            )));
        }
        self.live = live as u64;
        self.peak = self.peak.max(self.live);
        Ok(())
    }

    pub fn live(&self) -> u64 {
        self.live
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }
}

/// Resources used by one run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Accounting {
    pub passes_used: usize,
    pub peak_words: u64,
    pub oracle_calls: u64,
}

/// A multi-pass streaming computation.
///
/// The consumer is active for passes `first_pass() .. first_pass() + passes()`
/// of its parent's schedule. Callbacks receive the consumer-local pass number,
/// starting at 1.
pub trait PassConsumer {
    fn name(&self) -> &str;

    fn passes(&self) -> usize;

    fn first_pass(&self) -> usize {
        1
    }

    fn begin_pass(&mut self, _pass: usize, _meter: &mut Meter) -> Result<()> {
        Ok(())
    }

    fn on_item(&mut self, item: NodeId, meter: &mut Meter) -> Result<()>;

    fn end_pass(&mut self, _pass: usize, _meter: &mut Meter) -> Result<()> {
        Ok(())
    }
}

/// Last pass (in the parent's numbering) a consumer is active for.
pub fn last_pass(c: &dyn PassConsumer) -> usize {
    c.first_pass() + c.passes() - 1
}

fn local_pass(c: &dyn PassConsumer, pass: usize) -> Option<usize> {
    let first = c.first_pass();
    (pass >= first && pass < first + c.passes()).then(|| pass - first + 1)
}

fn blame(c: &dyn PassConsumer, e: Error) -> Error {
    Error::Consumer {
        name: c.name().to_string(),
        source: Box::new(e),
    }
}

/// Forwarding helpers for consumers that fan out to sub-consumers sharing
/// their passes. `pass` is in the caller's numbering.
pub mod forward {
    use super::*;

    pub fn begin(c: &mut dyn PassConsumer, pass: usize, meter: &mut Meter) -> Result<()> {
        match local_pass(c, pass) {
            Some(p) => c.begin_pass(p, meter).map_err(|e| blame(c, e)),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn item(c: &mut dyn PassConsumer, pass: usize, item: NodeId, meter: &mut Meter) -> Result<()> {
        match local_pass(c, pass) {
            Some(_) => c.on_item(item, meter).map_err(|e| blame(c, e)),
            None => Ok(()),
        }
    }

    pub fn end(c: &mut dyn PassConsumer, pass: usize, meter: &mut Meter) -> Result<()> {
        match local_pass(c, pass) {
            Some(p) => c.end_pass(p, meter).map_err(|e| blame(c, e)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RunOptions {
    /// Prepend one pass that counts the stream, for headerless input.
    pub count_pass: bool,
}

/// Drives all consumers over shared physical passes.
///
/// `oracle_calls` in the returned accounting is left at zero; callers that
/// own a counting oracle fill it in.
pub fn run_multiplexed(
    stream: &NodeStream,
    consumers: &mut [&mut dyn PassConsumer],
    options: RunOptions,
) -> Result<Accounting> {
    if consumers.is_empty() {
        return Err(Error::arg("no consumers to run"));
    }
    if let Some(c) = consumers.iter().find(|c| c.passes() == 0 || c.first_pass() == 0) {
        return Err(Error::arg(format!("consumer `{}` declares an empty pass window", c.name())));
    }
    let mut meter = Meter::new();
    let mut passes_used = 0;
    if options.count_pass {
        let counted = stream.replay().count();
        if counted != stream.n() {
            return Err(Error::Format(format!(
                "counting pass saw {counted} items, header declares {}",
                stream.n()
            )));
        }
        passes_used += 1;
    }
    let last = consumers.iter().map(|c| last_pass(&**c)).max().unwrap_or(0);
    for pass in 1..=last {
        for c in consumers.iter_mut() {
            forward::begin(&mut **c, pass, &mut meter)?;
        }
        for item in stream.replay() {
            for c in consumers.iter_mut() {
                forward::item(&mut **c, pass, item, &mut meter)?;
            }
        }
        for c in consumers.iter_mut() {
            forward::end(&mut **c, pass, &mut meter)?;
        }
    }
    passes_used += last;
    Ok(Accounting {
        passes_used,
        peak_words: meter.peak(),
        oracle_calls: 0,
    })
}
