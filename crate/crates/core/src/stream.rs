//! Strict turnstile streams, replayable sources and the exact empirical
//! distribution they induce.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use num_rational::Ratio;

use crate::error::{Error, Result};

/// A single signed count change for a domain item in `[1..n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamUpdate {
    pub item: u64,
    pub delta: i64,
}

impl StreamUpdate {
    pub fn new(item: u64, delta: i64) -> Self {
        Self { item, delta }
    }

    pub fn insert(item: u64) -> Self {
        Self { item, delta: 1 }
    }
}

/// A replayable sequence of updates over a fixed domain.
///
/// Every call to [`StreamSource::replay`] must deliver the same sequence.
/// Multi-pass algorithms rely on this.
pub trait StreamSource: Sync {
    fn domain_size(&self) -> u64;

    fn total_updates(&self) -> u64;

    /// Feeds every update, in order, to `sink`.
    fn replay(&self, sink: &mut dyn FnMut(StreamUpdate)) -> Result<()>;

    fn is_replayable(&self) -> bool {
        true
    }
}

/// Replays `source` into a fallible sink; the first error stops further
/// processing and is returned once the replay ends.
pub(crate) fn replay_with(
    source: &dyn StreamSource,
    mut sink: impl FnMut(StreamUpdate) -> Result<()>,
) -> Result<()> {
    let mut err = None;
    source.replay(&mut |u| {
        if err.is_none() {
            if let Err(e) = sink(u) {
                err = Some(e);
            }
        }
    })?;
    err.map_or(Ok(()), Err)
}

/// In-memory stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VecStream {
    n: u64,
    updates: Vec<StreamUpdate>,
}

impl VecStream {
    /// Builds a stream after checking domain bounds and strictness of every prefix.
    pub fn new(n: u64, updates: Vec<StreamUpdate>) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("domain size must be positive".into()));
        }
        let mut check = ExactDistribution::new(n);
        for u in &updates {
            check.apply_update(*u)?;
        }
        Ok(Self { n, updates })
    }

    pub fn from_items(n: u64, items: impl IntoIterator<Item = u64>) -> Result<Self> {
        Self::new(n, items.into_iter().map(StreamUpdate::insert).collect())
    }

    pub fn updates(&self) -> &[StreamUpdate] {
        &self.updates
    }

    pub fn into_updates(self) -> Vec<StreamUpdate> {
        self.updates
    }
}

impl StreamSource for VecStream {
    fn domain_size(&self) -> u64 {
        self.n
    }

    fn total_updates(&self) -> u64 {
        self.updates.len() as u64
    }

    fn replay(&self, sink: &mut dyn FnMut(StreamUpdate)) -> Result<()> {
        for &u in &self.updates {
            sink(u);
        }
        Ok(())
    }
}

/// Stream file read from disk on every replay.
#[derive(Debug, Clone)]
pub struct FileStream {
    path: PathBuf,
    n: u64,
    total: u64,
}

impl FileStream {
    /// Opens and fully validates a stream file (domain bounds and strictness).
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut n = 0;
        let mut total = 0u64;
        let mut check: Option<ExactDistribution> = None;
        parse_stream(BufReader::new(File::open(&path)?), |header, u| {
            if let Some(h) = header {
                n = h;
                check = Some(ExactDistribution::new(h));
            }
            if let (Some(u), Some(c)) = (u, check.as_mut()) {
                c.apply_update(u)?;
                total += 1;
            }
            Ok(())
        })?;
        Ok(Self { path, n, total })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Loads the whole file into memory.
    pub fn load(&self) -> Result<VecStream> {
        let mut updates = Vec::with_capacity(self.total as usize);
        self.replay(&mut |u| updates.push(u))?;
        Ok(VecStream { n: self.n, updates })
    }
}

impl StreamSource for FileStream {
    fn domain_size(&self) -> u64 {
        self.n
    }

    fn total_updates(&self) -> u64 {
        self.total
    }

    fn replay(&self, sink: &mut dyn FnMut(StreamUpdate)) -> Result<()> {
        parse_stream(BufReader::new(File::open(&self.path)?), |_, u| {
            if let Some(u) = u {
                sink(u);
            }
            Ok(())
        })
    }
}

/// Wraps a source so that only its first replay succeeds.
pub struct SinglePass<S> {
    inner: S,
    used: AtomicBool,
}

impl<S: StreamSource> SinglePass<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            used: AtomicBool::new(false),
        }
    }
}

impl<S: StreamSource> StreamSource for SinglePass<S> {
    fn domain_size(&self) -> u64 {
        self.inner.domain_size()
    }

    fn total_updates(&self) -> u64 {
        self.inner.total_updates()
    }

    fn replay(&self, sink: &mut dyn FnMut(StreamUpdate)) -> Result<()> {
        if self.used.swap(true, Ordering::SeqCst) {
            return Err(Error::NonReplayableSource);
        }
        self.inner.replay(sink)
    }

    fn is_replayable(&self) -> bool {
        false
    }
}

/// Parses the stream text format. `visit` receives `(Some(n), None)` once for
/// the header and `(None, Some(update))` for each update line.
fn parse_stream<R: BufRead>(
    reader: R,
    mut visit: impl FnMut(Option<u64>, Option<StreamUpdate>) -> Result<()>,
) -> Result<()> {
    let mut n: Option<u64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        match n {
            None => {
                let value = line
                    .strip_prefix("n=")
                    .ok_or_else(|| parse_err(format!("expected header `n=<int>`, got `{line}`")))?;
                let value: u64 = value
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(format!("bad domain size: {e}")))?;
                if value == 0 {
                    return Err(parse_err("domain size must be positive".into()));
                }
                n = Some(value);
                visit(Some(value), None)?;
            }
            Some(domain) => {
                let (item, delta) = match line.split_once(',') {
                    Some((i, d)) => (i.trim(), d.trim()),
                    None => (line, "1"),
                };
                let item: u64 = item
                    .parse()
                    .map_err(|e| parse_err(format!("bad item `{item}`: {e}")))?;
                let delta: i64 = delta
                    .parse()
                    .map_err(|e| parse_err(format!("bad delta `{delta}`: {e}")))?;
                if item == 0 || item > domain {
                    return Err(parse_err(format!("item {item} outside [1..{domain}]")));
                }
                visit(None, Some(StreamUpdate { item, delta }))?;
            }
        }
    }
    if n.is_none() {
        return Err(Error::Parse {
            line: 0,
            msg: "missing `n=<int>` header".into(),
        });
    }
    Ok(())
}

/// Writes `source` in the stream text format.
pub fn write_stream<W: Write>(source: &dyn StreamSource, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "n={}", source.domain_size())?;
    let mut io_err = None;
    source.replay(&mut |u| {
        if io_err.is_some() {
            return;
        }
        let r = if u.delta == 1 {
            writeln!(w, "{}", u.item)
        } else {
            writeln!(w, "{},{}", u.item, u.delta)
        };
        if let Err(e) = r {
            io_err = Some(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

pub fn write_stream_file(source: &dyn StreamSource, path: impl AsRef<Path>) -> Result<()> {
    write_stream(source, File::create(path)?)
}

/// Ground-truth counts `m_i` and total `m` of a strict turnstile stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDistribution {
    n: u64,
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl ExactDistribution {
    pub fn new(n: u64) -> Self {
        Self {
            n,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Builds a distribution directly from `(item, count)` pairs; zero counts are skipped.
    pub fn from_counts(n: u64, counts: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut d = Self::new(n);
        for (item, c) in counts {
            if c > 0 {
                d.apply_update(StreamUpdate::new(item, c as i64))?;
            }
        }
        Ok(d)
    }

    /// Folds a whole replay of `source`.
    pub fn from_source(source: &dyn StreamSource) -> Result<Self> {
        let mut d = Self::new(source.domain_size());
        replay_with(source, |u| d.apply_update(u))?;
        Ok(d)
    }

    pub fn apply_update(&mut self, u: StreamUpdate) -> Result<()> {
        if u.item == 0 || u.item > self.n {
            return Err(Error::DomainViolation { item: u.item, n: self.n });
        }
        let current = self.counts.get(&u.item).copied().unwrap_or(0);
        let next = current as i128 + u.delta as i128;
        if next < 0 {
            return Err(Error::NegativeCount { item: u.item });
        }
        let next = next as u64;
        if next == 0 {
            self.counts.remove(&u.item);
        } else {
            self.counts.insert(u.item, next);
        }
        self.total = (self.total as i128 + u.delta as i128) as u64;
        Ok(())
    }

    pub fn domain_size(&self) -> u64 {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, item: u64) -> u64 {
        self.counts.get(&item).copied().unwrap_or(0)
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    /// Supported items with their counts, in increasing item order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    /// Supported items in `[a, b]`.
    pub fn range(&self, a: u64, b: u64) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.range(a..=b).map(|(&i, &c)| (i, c))
    }

    /// Total count over `[a, b]`.
    pub fn range_count(&self, a: u64, b: u64) -> u64 {
        self.range(a, b).map(|(_, c)| c).sum()
    }

    /// `p_i = m_i / m`.
    pub fn mass(&self, item: u64) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(self.count(item) as f64 / self.total as f64)
    }

    /// `p_i` as an exact rational.
    pub fn mass_ratio(&self, item: u64) -> Result<Ratio<u64>> {
        if self.total == 0 {
            return Err(Error::EmptyStream);
        }
        Ok(Ratio::new(self.count(item), self.total))
    }

    /// One update per supported item carrying its final count. Any linear
    /// sketch ends in the same state on this stream as on the original.
    pub fn to_stream(&self) -> VecStream {
        VecStream {
            n: self.n,
            updates: self
                .iter()
                .map(|(i, c)| StreamUpdate::new(i, c as i64))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_insertion() {
        let mut d = ExactDistribution::new(10);
        d.apply_update(StreamUpdate::new(3, 2)).unwrap();
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![(3, 2)]);
        assert_eq!(d.total(), 2);
    }

    #[test]
    fn full_deletion_removes_entry() {
        let mut d = ExactDistribution::from_counts(10, [(3, 2)]).unwrap();
        d.apply_update(StreamUpdate::new(3, -2)).unwrap();
        assert_eq!(d.support_size(), 0);
        assert_eq!(d.total(), 0);
    }

    #[test]
    fn strictness_violation() {
        let mut d = ExactDistribution::from_counts(10, [(3, 2)]).unwrap();
        assert_eq!(
            d.apply_update(StreamUpdate::new(3, -3)),
            Err(Error::NegativeCount { item: 3 })
        );
        // failed update leaves the state untouched
        assert_eq!(d.count(3), 2);
    }

    #[test]
    fn out_of_domain() {
        let mut d = ExactDistribution::new(10);
        assert!(matches!(
            d.apply_update(StreamUpdate::insert(11)),
            Err(Error::DomainViolation { item: 11, n: 10 })
        ));
        assert!(matches!(
            d.apply_update(StreamUpdate::insert(0)),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn masses() {
        let d = ExactDistribution::from_counts(10, [(1, 1), (2, 3)]).unwrap();
        assert_eq!(d.mass(2).unwrap(), 0.75);
        assert_eq!(d.mass_ratio(2).unwrap(), Ratio::new(3, 4));
        assert_eq!(d.mass(5).unwrap(), 0.0);
        assert_eq!(ExactDistribution::new(10).mass(1), Err(Error::EmptyStream));
    }

    #[test]
    fn file_round_trip_with_comments() {
        let dir = std::env::temp_dir().join(format!("suphist-stream-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.txt");
        std::fs::write(&path, "# comment\nn=8\n3\n5,4\n# mid\n3,-1\n\n8\n").unwrap();
        let fs = FileStream::open(&path).unwrap();
        assert_eq!(fs.domain_size(), 8);
        assert_eq!(fs.total_updates(), 4);
        let v = fs.load().unwrap();
        assert_eq!(
            v.updates(),
            &[
                StreamUpdate::new(3, 1),
                StreamUpdate::new(5, 4),
                StreamUpdate::new(3, -1),
                StreamUpdate::new(8, 1)
            ]
        );
        let out = dir.join("o.txt");
        write_stream_file(&v, &out).unwrap();
        assert_eq!(FileStream::open(&out).unwrap().load().unwrap(), v);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let dir = std::env::temp_dir().join(format!("suphist-stream-err-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.txt");
        std::fs::write(&path, "n=4\n1\nx\n").unwrap();
        assert!(matches!(FileStream::open(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, "n=4\n1\n9\n").unwrap();
        assert!(matches!(FileStream::open(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, "n=4\n1\n2,-1\n").unwrap();
        assert!(matches!(FileStream::open(&path), Err(Error::NegativeCount { item: 2 })));
        std::fs::write(&path, "1\n").unwrap();
        assert!(matches!(FileStream::open(&path), Err(Error::Parse { line: 1, .. })));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn single_pass_refuses_second_replay() {
        let s = SinglePass::new(VecStream::from_items(4, [1, 2]).unwrap());
        assert!(s.replay(&mut |_| {}).is_ok());
        assert_eq!(s.replay(&mut |_| {}), Err(Error::NonReplayableSource));
    }
}
