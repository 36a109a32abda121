//! External sort of byte records with spill-to-disk runs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

pub(crate) struct ExternalSorter {
    arena: Vec<u8>,
    recs: Vec<(usize, u16)>,
    budget: usize,
    dir: PathBuf,
    dir_created: bool,
    runs: Vec<PathBuf>,
}

impl ExternalSorter {
    /// `dir` is created on the first spill and removed on drop.
    pub(crate) fn new(dir: PathBuf, budget: usize) -> Self {
        ExternalSorter {
            arena: Vec::new(),
            recs: Vec::new(),
            budget: budget.max(1024),
            dir,
            dir_created: false,
            runs: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, rec: &[u8]) -> io::Result<()> {
        self.recs.push((self.arena.len(), rec.len() as u16));
        self.arena.extend_from_slice(rec);
        if self.arena.len() + self.recs.len() * 16 >= self.budget {
            self.spill()?;
        }
        Ok(())
    }

    pub(crate) fn runs(&self) -> usize {
        self.runs.len()
    }

    fn sorted_unique(&mut self) -> Vec<(usize, u16)> {
        let arena = &self.arena;
        let slice = |&(s, l): &(usize, u16)| &arena[s..s + l as usize];
        let mut recs = std::mem::take(&mut self.recs);
        recs.sort_unstable_by(|a, b| slice(a).cmp(slice(b)));
        recs.dedup_by(|a, b| slice(a) == slice(b));
        recs
    }

    fn spill(&mut self) -> io::Result<()> {
        if self.recs.is_empty() {
            return Ok(());
        }
        if !self.dir_created {
            fs::create_dir_all(&self.dir)?;
            self.dir_created = true;
        }
        let recs = self.sorted_unique();
        let path = self.dir.join(format!("run-{:05}", self.runs.len()));
        let mut w = BufWriter::new(File::create(&path)?);
        for (s, l) in recs {
            w.write_all(&l.to_le_bytes())?;
            w.write_all(&self.arena[s..s + l as usize])?;
        }
        w.flush()?;
        self.runs.push(path);
        self.arena.clear();
        Ok(())
    }

    /// Feeds every distinct record to `f` in ascending byte order.
    pub(crate) fn finish<E, F>(mut self, mut f: F) -> Result<(), E>
    where
        E: From<io::Error>,
        F: FnMut(&[u8]) -> Result<(), E>,
    {
        if self.runs.is_empty() {
            for (s, l) in self.sorted_unique() {
                f(&self.arena[s..s + l as usize])?;
            }
            return Ok(());
        }
        self.spill()?;
        let mut readers = self
            .runs
            .iter()
            .map(|p| File::open(p).map(|f| BufReader::with_capacity(1 << 16, f)))
            .collect::<io::Result<Vec<_>>>()?;
        let mut heap = BinaryHeap::new();
        for (i, r) in readers.iter_mut().enumerate() {
            if let Some(rec) = read_rec(r)? {
                heap.push(Reverse((rec, i)));
            }
        }
        let mut last: Option<Vec<u8>> = None;
        while let Some(Reverse((rec, i))) = heap.pop() {
            if let Some(next) = read_rec(&mut readers[i])? {
                heap.push(Reverse((next, i)));
            }
            if last.as_deref() != Some(&rec[..]) {
                f(&rec)?;
                last = Some(rec);
            }
        }
        Ok(())
    }
}

fn read_rec(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 2];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut rec = vec![0u8; u16::from_le_bytes(len) as usize];
    r.read_exact(&mut rec)?;
    Ok(Some(rec))
}

impl Drop for ExternalSorter {
    fn drop(&mut self) {
        if self.dir_created {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
