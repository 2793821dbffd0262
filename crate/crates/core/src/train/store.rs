use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub validation_loss: f64,
    pub epoch: u32,
    pub path: PathBuf,
}

/// The `capacity` lowest-validation-loss checkpoints seen so far, ascending
/// by loss; equal losses keep the earlier epoch first.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStore {
    capacity: usize,
    entries: Vec<StoreEntry>,
}

pub const DEFAULT_STORE_CAPACITY: usize = 5;

impl Default for CheckpointStore {
    fn default() -> Self {
        Self::new(DEFAULT_STORE_CAPACITY)
    }
}

impl CheckpointStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `entry` if it ranks among the best `capacity`. Returns the
    /// entry that dropped out, which may be `entry` itself.
    pub fn offer(&mut self, entry: StoreEntry) -> Result<Option<StoreEntry>> {
        if !entry.validation_loss.is_finite() {
            return Err(Error::numeric("validation loss"));
        }
        let key = (entry.validation_loss, entry.epoch);
        let pos = self.entries.partition_point(|e| (e.validation_loss, e.epoch) <= key);
        self.entries.insert(pos, entry);
        if self.entries.len() > self.capacity {
            Ok(self.entries.pop())
        } else {
            Ok(None)
        }
    }

    /// One `epoch<TAB>validation_loss<TAB>path` line per entry. Paths are
    /// written as given.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.epoch, e.validation_loss, e.path.display()))
            .collect()
    }

    pub fn from_tsv(text: &str, capacity: usize) -> Result<Self> {
        let mut store = Self::new(capacity);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("store line {}: {line:?}", i + 1));
            let mut parts = line.splitn(3, '\t');
            let epoch = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let validation_loss = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let path = parts.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
            let dropped = store.offer(StoreEntry {
                validation_loss,
                epoch,
                path: PathBuf::from(path),
            })?;
            if dropped.is_some() {
                return Err(Error::Format(format!("store holds more than {capacity} entries")));
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    /// Reads a store file. Relative checkpoint paths are resolved against
    /// the store file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut store = Self::from_tsv(&fs::read_to_string(path)?, DEFAULT_STORE_CAPACITY)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut store.entries {
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(loss: f64, epoch: u32) -> StoreEntry {
        StoreEntry {
            validation_loss: loss,
            epoch,
            path: PathBuf::from(format!("ckpt_epoch_{epoch}.mebm")),
        }
    }

    fn run(losses: &[f64], cap: usize) -> CheckpointStore {
        let mut s = CheckpointStore::new(cap);
        for (i, &l) in losses.iter().enumerate() {
            s.offer(entry(l, i as u32 + 1)).unwrap();
        }
        s
    }

    #[test]
    fn keeps_five_lowest() {
        let s = run(&[0.9, 0.5, 0.7, 0.4, 0.6, 0.3, 0.8], 5);
        let epochs: Vec<u32> = s.entries().iter().map(|e| e.epoch).collect();
        let losses: Vec<f64> = s.entries().iter().map(|e| e.validation_loss).collect();
        assert_eq!(epochs, vec![6, 4, 2, 5, 3]);
        assert_eq!(losses, vec![0.3, 0.4, 0.5, 0.6, 0.7]);
    }

    #[test]
    fn under_capacity_keeps_everything() {
        assert_eq!(run(&[0.3, 0.1, 0.2], 5).len(), 3);
    }

    #[test]
    fn ties_prefer_earlier_epoch() {
        let s = run(&[0.5, 0.5, 0.5], 2);
        let epochs: Vec<u32> = s.entries().iter().map(|e| e.epoch).collect();
        assert_eq!(epochs, vec![1, 2]);
    }

    #[test]
    fn offer_reports_dropped_entry() {
        let mut s = run(&[0.1, 0.2], 2);
        assert_eq!(s.offer(entry(0.3, 3)).unwrap(), Some(entry(0.3, 3)));
        assert_eq!(s.offer(entry(0.05, 4)).unwrap(), Some(entry(0.2, 2)));
        assert!(s.offer(entry(f64::NAN, 5)).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let s = run(&[0.9, 0.123_456_789_012_345, 0.7, 1e-9], 5);
        let text = s.to_tsv();
        assert!(text.starts_with("4\t0.000000001\tckpt_epoch_4.mebm\n"));
        let back = CheckpointStore::from_tsv(&text, 5).unwrap();
        assert_eq!(back, s);
        assert!(CheckpointStore::from_tsv("1\tx\tp\n", 5).is_err());
    }

    proptest! {
        #[test]
        fn matches_sort_and_truncate(
            losses in prop::collection::vec(0u32..50, 0..30),
            cap in 1usize..8,
        ) {
            let losses: Vec<f64> = losses.iter().map(|&l| f64::from(l) / 10.0).collect();
            let s = run(&losses, cap);
            let mut expect: Vec<(f64, u32)> = losses
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, i as u32 + 1))
                .collect();
            expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
            expect.truncate(cap);
            let got: Vec<(f64, u32)> = s.entries().iter().map(|e| (e.validation_loss, e.epoch)).collect();
            prop_assert_eq!(got, expect);
        }
    }
}
