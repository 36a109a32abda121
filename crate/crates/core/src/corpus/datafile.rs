//! Flat random-access tree storage.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header   magic "SIDXDATA" | version u32 | reserved u32 | tree_count u64
//!          | string_table_offset u64 | offset_table_offset u64      (40 bytes)
//! records  per tree: tid u32 | node_count u32
//!          | node_count x (node_id u32, parent_id i32, label_id u32,
//!                          pre u32, post u32, level u32)
//!          | crc32 u32 over everything before it in the record
//! strings  count u32 | count x (len u32, utf-8 bytes), sorted
//! offsets  tree_count x (tid u32, record_offset u64), tid ascending
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::Path;

use super::{Corpus, CorpusError, ParseTree, TreeId, TreeNode, ROOT_PARENT};

const MAGIC: &[u8; 8] = b"SIDXDATA";
const VERSION: u32 = 1;
const HEADER_LEN: u64 = 40;
const NODE_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataFileSummary {
    pub trees: u64,
    pub nodes: u64,
    pub bytes: u64,
}

fn corrupt(msg: impl Into<String>) -> CorpusError {
    CorpusError::Corrupt(msg.into())
}

/// Writes `trees` (numbered, strictly increasing tids) to `path`.
pub fn write_trees<'a, I>(trees: I, path: &Path) -> Result<DataFileSummary, CorpusError>
where
    I: IntoIterator<Item = &'a ParseTree> + Clone,
{
    let mut labels = BTreeMap::new();
    let mut prev: Option<TreeId> = None;
    for t in trees.clone() {
        if prev.is_some_and(|p| t.tid <= p) {
            return Err(CorpusError::TidOrder(t.tid));
        }
        prev = Some(t.tid);
        if t.nodes.is_empty() || !t.is_numbered() {
            return Err(CorpusError::NotNumbered(t.tid));
        }
        for n in &t.nodes {
            labels.entry(n.label.as_str()).or_insert(0u32);
        }
    }
    for (i, v) in labels.values_mut().enumerate() {
        *v = i as u32;
    }

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&[0u8; HEADER_LEN as usize])?;
    let mut pos = HEADER_LEN;
    let mut offsets = Vec::new();
    let mut node_total = 0u64;
    let mut rec = Vec::new();
    for t in trees {
        rec.clear();
        rec.extend_from_slice(&t.tid.to_le_bytes());
        rec.extend_from_slice(&(t.nodes.len() as u32).to_le_bytes());
        for n in &t.nodes {
            let parent = n.parent.map_or(ROOT_PARENT, |p| p as i32);
            rec.extend_from_slice(&n.id.to_le_bytes());
            rec.extend_from_slice(&parent.to_le_bytes());
            rec.extend_from_slice(&labels[n.label.as_str()].to_le_bytes());
            rec.extend_from_slice(&n.pre.to_le_bytes());
            rec.extend_from_slice(&n.post.to_le_bytes());
            rec.extend_from_slice(&n.level.to_le_bytes());
        }
        let crc = crc32fast::hash(&rec);
        rec.extend_from_slice(&crc.to_le_bytes());
        w.write_all(&rec)?;
        offsets.push((t.tid, pos));
        pos += rec.len() as u64;
        node_total += t.nodes.len() as u64;
    }

    let string_off = pos;
    w.write_all(&(labels.len() as u32).to_le_bytes())?;
    pos += 4;
    for l in labels.keys() {
        w.write_all(&(l.len() as u32).to_le_bytes())?;
        w.write_all(l.as_bytes())?;
        pos += 4 + l.len() as u64;
    }
    let offset_off = pos;
    for (tid, off) in &offsets {
        w.write_all(&tid.to_le_bytes())?;
        w.write_all(&off.to_le_bytes())?;
        pos += 12;
    }

    let mut f = w.into_inner().map_err(|e| e.into_error())?;
    f.seek(SeekFrom::Start(0))?;
    let mut hdr = Vec::with_capacity(HEADER_LEN as usize);
    hdr.extend_from_slice(MAGIC);
    hdr.extend_from_slice(&VERSION.to_le_bytes());
    hdr.extend_from_slice(&0u32.to_le_bytes());
    hdr.extend_from_slice(&(offsets.len() as u64).to_le_bytes());
    hdr.extend_from_slice(&string_off.to_le_bytes());
    hdr.extend_from_slice(&offset_off.to_le_bytes());
    f.write_all(&hdr)?;
    f.sync_all()?;
    Ok(DataFileSummary {
        trees: offsets.len() as u64,
        nodes: node_total,
        bytes: pos,
    })
}

pub fn write_data_file(corpus: &Corpus, path: &Path) -> Result<DataFileSummary, CorpusError> {
    write_trees(corpus.trees(), path)
}

/// Reads one tree. Opens the file on every call; use [`DataFile`] for
/// repeated access.
pub fn read_tree(path: &Path, tid: TreeId) -> Result<ParseTree, CorpusError> {
    DataFile::open(path)?.get(tid)
}

/// An open data file. Reads go through positional I/O, so one handle can
/// serve concurrent readers.
#[derive(Debug)]
pub struct DataFile {
    file: File,
    labels: Vec<String>,
    offsets: Vec<(TreeId, u64)>,
    /// true when tids are exactly 0..n, which allows direct indexing
    dense: bool,
    record_end: u64,
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

impl DataFile {
    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        let mut file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut hdr = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut hdr)
            .map_err(|_| corrupt("truncated header"))?;
        if &hdr[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        if u32_at(&hdr, 8) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let count = u64_at(&hdr, 16);
        let string_off = u64_at(&hdr, 24);
        let offset_off = u64_at(&hdr, 32);
        if string_off < HEADER_LEN
            || offset_off < string_off
            || count.checked_mul(12).and_then(|b| b.checked_add(offset_off)) != Some(len)
        {
            return Err(corrupt("inconsistent header"));
        }

        let mut tail = vec![0u8; (len - string_off) as usize];
        file.read_exact_at(&mut tail, string_off)?;
        let nlabels = u32_at(&tail, 0) as usize;
        let mut labels = Vec::with_capacity(nlabels);
        let mut p = 4usize;
        let table_end = (offset_off - string_off) as usize;
        for _ in 0..nlabels {
            if p + 4 > table_end {
                return Err(corrupt("truncated string table"));
            }
            let l = u32_at(&tail, p) as usize;
            p += 4;
            if p + l > table_end {
                return Err(corrupt("truncated string table"));
            }
            let s = std::str::from_utf8(&tail[p..p + l]).map_err(|_| corrupt("label not utf-8"))?;
            labels.push(s.to_string());
            p += l;
        }
        let mut offsets = Vec::with_capacity(count as usize);
        for i in 0..count as usize {
            let at = table_end + i * 12;
            offsets.push((u32_at(&tail, at), u64_at(&tail, at + 4)));
        }
        if offsets.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(corrupt("offset table not sorted"));
        }
        let dense = offsets.iter().enumerate().all(|(i, &(t, _))| t as usize == i);
        Ok(DataFile {
            file,
            labels,
            offsets,
            dense,
            record_end: string_off,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Interned labels in sorted order; the position is the label id.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tids(&self) -> impl Iterator<Item = TreeId> + '_ {
        self.offsets.iter().map(|&(t, _)| t)
    }

    fn offset_of(&self, tid: TreeId) -> Option<u64> {
        if self.dense {
            return self.offsets.get(tid as usize).map(|&(_, o)| o);
        }
        self.offsets
            .binary_search_by_key(&tid, |&(t, _)| t)
            .ok()
            .map(|i| self.offsets[i].1)
    }

    /// Fetches a tree by tid, verifying the record checksum.
    pub fn get(&self, tid: TreeId) -> Result<ParseTree, CorpusError> {
        let off = self.offset_of(tid).ok_or(CorpusError::UnknownTid(tid))?;
        let mut head = [0u8; 8];
        self.file.read_exact_at(&mut head, off)?;
        let (rtid, count) = (u32_at(&head, 0), u32_at(&head, 4) as u64);
        let body_len = 8 + count * NODE_LEN as u64 + 4;
        if rtid != tid || off + body_len > self.record_end {
            return Err(corrupt(format!("record length mismatch for tid {tid}")));
        }
        let mut rec = vec![0u8; body_len as usize];
        self.file.read_exact_at(&mut rec, off)?;
        let split = rec.len() - 4;
        if crc32fast::hash(&rec[..split]) != u32_at(&rec, split) {
            return Err(corrupt(format!("checksum mismatch for tid {tid}")));
        }
        let mut nodes = Vec::with_capacity(count as usize);
        for i in 0..count as usize {
            let b = &rec[8 + i * NODE_LEN..];
            let parent = u32_at(b, 4) as i32;
            let label = self
                .labels
                .get(u32_at(b, 8) as usize)
                .ok_or_else(|| corrupt("label id out of range"))?;
            nodes.push(TreeNode {
                id: u32_at(b, 0),
                parent: (parent != ROOT_PARENT).then_some(parent as u32),
                label: label.clone(),
                pre: u32_at(b, 12),
                post: u32_at(b, 16),
                level: u32_at(b, 20),
            });
        }
        Ok(ParseTree { tid, nodes })
    }

    /// Reads every tree in tid order.
    pub fn iter(&self) -> impl Iterator<Item = Result<ParseTree, CorpusError>> + '_ {
        self.offsets.iter().map(move |&(t, _)| self.get(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn corpus(text: &str) -> Corpus {
        Corpus::from_bracketed(text).unwrap()
    }

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d");
        let s = write_data_file(&Corpus::default(), &p).unwrap();
        assert_eq!((s.trees, s.nodes), (0, 0));
        let df = DataFile::open(&p).unwrap();
        assert!(df.is_empty());
        assert!(matches!(df.get(0), Err(CorpusError::UnknownTid(0))));
    }

    #[test]
    fn round_trip_two_trees() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d");
        let c = corpus("(S (NP (NNS agouti)) (VP (VBZ is) (NP (DT a) (NN))))\n(A (B) (C))\n");
        let s = write_data_file(&c, &p).unwrap();
        assert_eq!((s.trees, s.nodes), (2, 14));
        assert_eq!(s.bytes, std::fs::metadata(&p).unwrap().len());
        for t in c.trees() {
            assert_eq!(&read_tree(&p, t.tid).unwrap(), t);
        }
        assert!(matches!(read_tree(&p, 2), Err(CorpusError::UnknownTid(2))));
    }

    #[test]
    fn sparse_tids() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d");
        let mut trees = corpus("(A)\n(B (C))\n").into_trees();
        trees[0].tid = 5;
        trees[1].tid = 9;
        let c = Corpus::new(trees).unwrap();
        write_data_file(&c, &p).unwrap();
        assert_eq!(read_tree(&p, 5).unwrap(), c.trees()[0]);
        assert_eq!(read_tree(&p, 9).unwrap(), c.trees()[1]);
        assert!(read_tree(&p, 6).is_err());
    }

    #[test]
    fn out_of_order_rejected_at_write() {
        let dir = tempfile::tempdir().unwrap();
        let mut trees = corpus("(A)\n(B)\n").into_trees();
        trees[0].tid = 4;
        let r = write_trees(trees.iter(), &dir.path().join("d"));
        assert!(matches!(r, Err(CorpusError::TidOrder(1))));
    }

    #[test]
    fn unnumbered_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = crate::corpus::parse_bracketed("(A (B))").unwrap();
        let r = write_trees([&t], &dir.path().join("d"));
        assert!(matches!(r, Err(CorpusError::NotNumbered(0))));
    }

    #[test]
    fn checksum_detects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d");
        write_data_file(&corpus("(A (B) (C))\n"), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[HEADER_LEN as usize + 8 + 12] ^= 0xff;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_tree(&p, 0), Err(CorpusError::Corrupt(_))));
        std::fs::write(&p, b"nonsense").unwrap();
        assert!(matches!(DataFile::open(&p), Err(CorpusError::Corrupt(_))));
    }
}
