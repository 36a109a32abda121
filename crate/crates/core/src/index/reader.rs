use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::sync::{Arc, Mutex};

use super::codec::{decode_posting, DeltaState, MAX_POSTING_BYTES, SKIP_BLOCK};
use super::{CodingScheme, IndexError, Posting, PostingList};
use crate::subtrees::{LabelTable, SubtreeKey};

pub(crate) const MAGIC: &[u8; 8] = b"SIDXINDX";
pub(crate) const VERSION: u32 = 2;
pub(crate) const HEADER_LEN: usize = 64;
pub(crate) const PAGE_SIZE: usize = 4096;

const STREAM_CHUNK: usize = 64 << 10;
const SEEK_CHUNK: usize = 1 << 10;
const CACHED_PAGES: usize = 1024;

fn corrupt(msg: impl Into<String>) -> IndexError {
    IndexError::Corrupt(msg.into())
}

/// Directory record of one key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirEntry {
    pub key: SubtreeKey,
    pub offset: u64,
    pub bytes: u64,
    pub count: u64,
}

/// A read-only index file. Lookups use positional reads, so a shared
/// reference may be used from many threads.
#[derive(Debug)]
pub struct SubtreeIndex {
    file: File,
    file_len: u64,
    scheme: CodingScheme,
    mss: usize,
    key_count: u64,
    posting_count: u64,
    labels: LabelTable,
    dir_off: u64,
    fences: Vec<Vec<u8>>,
    pages: Mutex<HashMap<usize, Arc<Vec<DirEntry>>>>,
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

impl SubtreeIndex {
    pub fn open(path: &Path) -> Result<Self, IndexError> {
        let mut file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let mut h = [0u8; HEADER_LEN];
        file.read_exact(&mut h).map_err(|_| corrupt("truncated header"))?;
        if &h[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        if u32_at(&h, 8) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let scheme = CodingScheme::from_tag(h[12]).ok_or_else(|| corrupt("unknown scheme tag"))?;
        let mss = h[13] as usize;
        if !crate::check_mss(mss) {
            return Err(corrupt("mss out of range"));
        }
        let key_count = u64_at(&h, 16);
        let posting_count = u64_at(&h, 24);
        let label_off = u64_at(&h, 32);
        let dir_off = u64_at(&h, 40);
        let page_count = u64_at(&h, 48);
        let fence_off = u64_at(&h, 56);
        if label_off < HEADER_LEN as u64
            || dir_off < label_off
            || dir_off + page_count * PAGE_SIZE as u64 != fence_off
            || fence_off > file_len
        {
            return Err(corrupt("inconsistent header"));
        }

        let mut lb = vec![0u8; (dir_off - label_off) as usize];
        file.read_exact_at(&mut lb, label_off)?;
        let mut labels = Vec::new();
        let mut p = 4;
        for _ in 0..u32_at(&lb, 0) {
            let len = u32_at(&lb, p) as usize;
            p += 4;
            let s = lb
                .get(p..p + len)
                .and_then(|b| std::str::from_utf8(b).ok())
                .ok_or_else(|| corrupt("bad label table"))?;
            labels.push(s.to_string());
            p += len;
        }

        let mut fb = vec![0u8; (file_len - fence_off) as usize];
        file.read_exact_at(&mut fb, fence_off)?;
        let mut fences = Vec::with_capacity(page_count as usize);
        let mut p = 0;
        for _ in 0..page_count {
            let len = *fb.get(p).ok_or_else(|| corrupt("truncated fences"))? as usize;
            let k = fb.get(p + 1..p + 1 + len).ok_or_else(|| corrupt("truncated fences"))?;
            fences.push(k.to_vec());
            p += 1 + len;
        }
        Ok(SubtreeIndex {
            file,
            file_len,
            scheme,
            mss,
            key_count,
            posting_count,
            labels: LabelTable::new(labels),
            dir_off,
            fences,
            pages: Mutex::default(),
        })
    }

    pub fn scheme(&self) -> CodingScheme {
        self.scheme
    }

    pub fn mss(&self) -> usize {
        self.mss
    }

    pub fn key_count(&self) -> u64 {
        self.key_count
    }

    pub fn posting_count(&self) -> u64 {
        self.posting_count
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn page_count(&self) -> usize {
        self.fences.len()
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    fn read_page(&self, no: usize) -> Result<Vec<DirEntry>, IndexError> {
        let mut page = vec![0u8; PAGE_SIZE];
        self.file
            .read_exact_at(&mut page, self.dir_off + (no * PAGE_SIZE) as u64)?;
        let bad = || IndexError::CorruptPage(no as u64);
        if crc32fast::hash(&page[..PAGE_SIZE - 4]) != u32_at(&page, PAGE_SIZE - 4) {
            return Err(bad());
        }
        let n = u16::from_le_bytes([page[0], page[1]]) as usize;
        let mut out = Vec::with_capacity(n);
        let mut p = 2;
        for _ in 0..n {
            let klen = page[p] as usize;
            if p + 1 + klen + 16 > PAGE_SIZE - 4 {
                return Err(bad());
            }
            let key = SubtreeKey::from_bytes(page[p + 1..p + 1 + klen].to_vec()).map_err(|_| bad())?;
            p += 1 + klen;
            out.push(DirEntry {
                key,
                offset: u64_at(&page, p),
                bytes: u32_at(&page, p + 8) as u64,
                count: u32_at(&page, p + 12) as u64,
            });
            p += 16;
        }
        Ok(out)
    }

    fn cached_page(&self, no: usize) -> Result<Arc<Vec<DirEntry>>, IndexError> {
        if let Some(p) = self.pages.lock().unwrap().get(&no) {
            return Ok(p.clone());
        }
        let page = Arc::new(self.read_page(no)?);
        let mut cache = self.pages.lock().unwrap();
        if cache.len() >= CACHED_PAGES {
            cache.clear();
        }
        cache.insert(no, page.clone());
        Ok(page)
    }

    /// Directory entry of `key`, if present.
    pub fn entry(&self, key: &SubtreeKey) -> Result<Option<DirEntry>, IndexError> {
        let kb = key.as_bytes();
        // last page whose first key is <= key
        let idx = self.fences.partition_point(|f| f.as_slice() <= kb);
        if idx == 0 {
            return Ok(None);
        }
        let page = self.cached_page(idx - 1)?;
        Ok(page
            .binary_search_by(|e| e.key.as_bytes().cmp(kb))
            .ok()
            .map(|i| page[i].clone()))
    }

    /// Number of postings stored under `key` (0 when absent).
    pub fn posting_len(&self, key: &SubtreeKey) -> Result<u64, IndexError> {
        Ok(self.entry(key)?.map_or(0, |e| e.count))
    }

    /// Streams the postings of `key` in stored order.
    pub fn stream(&self, key: &SubtreeKey) -> Result<PostingStream<'_>, IndexError> {
        let (count, offset, bytes) = self.entry(key)?.map_or((0, 0, 0), |e| (e.count, e.offset, e.bytes));
        let skip_bytes = 8 * skip_entries(count) as u64;
        if skip_bytes > bytes {
            return Err(corrupt("skip table overruns posting list"));
        }
        Ok(PostingStream {
            index: self,
            m: key.size(),
            count,
            remaining: count,
            skip_off: offset,
            skips: None,
            start: offset + skip_bytes,
            next_off: offset + skip_bytes,
            chunk: STREAM_CHUNK,
            end: offset + bytes,
            buf: Vec::new(),
            pos: 0,
            st: DeltaState::default(),
            vals: Vec::new(),
        })
    }

    /// Materialized posting list; empty when the key is absent.
    pub fn lookup(&self, key: &SubtreeKey) -> Result<PostingList, IndexError> {
        let entries = self.stream(key)?.collect::<Result<Vec<_>, _>>()?;
        Ok(PostingList {
            key: key.clone(),
            scheme: self.scheme,
            entries,
        })
    }

    /// Every directory entry in key order.
    pub fn entries(&self) -> Result<Vec<DirEntry>, IndexError> {
        let mut out = Vec::with_capacity(self.key_count as usize);
        for p in 0..self.fences.len() {
            out.extend(self.read_page(p)?);
        }
        Ok(out)
    }
}

fn skip_entries(count: u64) -> usize {
    (count as usize).saturating_sub(1) / SKIP_BLOCK
}

/// Sequential decoder over one posting list, reading the file in chunks.
pub struct PostingStream<'a> {
    index: &'a SubtreeIndex,
    m: usize,
    count: u64,
    remaining: u64,
    skip_off: u64,
    /// (first tid, byte offset) of every block after the first; loaded on
    /// the first seek.
    skips: Option<Vec<(u32, u32)>>,
    start: u64,
    next_off: u64,
    chunk: usize,
    end: u64,
    buf: Vec<u8>,
    pos: usize,
    st: DeltaState,
    vals: Vec<u32>,
}

impl PostingStream<'_> {
    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    fn refill(&mut self) -> Result<(), IndexError> {
        if self.buf.len() - self.pos >= MAX_POSTING_BYTES || self.next_off >= self.end {
            return Ok(());
        }
        self.buf.drain(..self.pos);
        self.pos = 0;
        let take = ((self.end - self.next_off) as usize).min(self.chunk);
        // after a seek, grow back towards full chunks while reading on
        self.chunk = (self.chunk * 2).min(STREAM_CHUNK);
        let old = self.buf.len();
        self.buf.resize(old + take, 0);
        self.index.file.read_exact_at(&mut self.buf[old..], self.next_off)?;
        self.next_off += take as u64;
        Ok(())
    }

    /// Moves forward to the block that may hold the first posting with
    /// tid >= `tid`. Postings before it are skipped unread; the stream
    /// never moves backwards.
    pub fn seek(&mut self, tid: u32) -> Result<(), IndexError> {
        let n = skip_entries(self.count);
        if n == 0 {
            return Ok(());
        }
        if self.skips.is_none() {
            let mut raw = vec![0u8; 8 * n];
            self.index.file.read_exact_at(&mut raw, self.skip_off)?;
            self.skips = Some(raw.chunks_exact(8).map(|c| (u32_at(c, 0), u32_at(c, 4))).collect());
        }
        let skips = self.skips.as_ref().unwrap();
        let block = skips.partition_point(|s| s.0 < tid);
        let first = (block * SKIP_BLOCK) as u64;
        if block == 0 || first <= self.count - self.remaining {
            return Ok(());
        }
        let off = self.start + skips[block - 1].1 as u64;
        if off >= self.end {
            return Err(corrupt("skip entry past end of list"));
        }
        let buf_start = self.next_off - self.buf.len() as u64;
        if off >= buf_start + self.pos as u64 && off < self.next_off {
            self.pos = (off - buf_start) as usize;
        } else {
            self.next_off = off;
            self.buf.clear();
            self.pos = 0;
            self.chunk = SEEK_CHUNK;
        }
        self.st = DeltaState::default();
        self.remaining = self.count - first;
        Ok(())
    }

    /// Decodes the next posting as flat values, avoiding allocation.
    pub(crate) fn next_values(&mut self) -> Result<Option<&[u32]>, IndexError> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.refill()?;
        let scheme = self.index.scheme;
        if (self.count - self.remaining) as usize % SKIP_BLOCK == 0 {
            self.st = DeltaState::default();
        }
        decode_posting(scheme, self.m, &mut self.st, &self.buf, &mut self.pos, &mut self.vals)
            .ok_or_else(|| corrupt("truncated posting list"))?;
        self.remaining -= 1;
        Ok(Some(&self.vals))
    }
}

impl Iterator for PostingStream<'_> {
    type Item = Result<Posting, IndexError>;

    fn next(&mut self) -> Option<Self::Item> {
        let scheme = self.index.scheme;
        match self.next_values() {
            Ok(Some(v)) => Some(Ok(Posting::from_values(scheme, v))),
            Ok(None) => None,
            Err(e) => {
                self.remaining = 0;
                Some(Err(e))
            }
        }
    }
}
