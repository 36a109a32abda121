use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::codec::{encode_posting, DeltaState, SKIP_BLOCK};
use super::reader::{HEADER_LEN, MAGIC, PAGE_SIZE, VERSION};
use super::sort::ExternalSorter;
use super::{CodingScheme, IndexError};
use crate::corpus::DataFile;
use crate::subtrees::{for_each_rooted_subtree, LabelTable};

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub mss: usize,
    pub scheme: CodingScheme,
    /// In-memory budget of the external sort before it spills a run.
    pub sort_budget: usize,
}

impl BuildOptions {
    pub fn new(mss: usize, scheme: CodingScheme) -> Self {
        BuildOptions {
            mss,
            scheme,
            sort_budget: 256 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSummary {
    pub keys: u64,
    pub postings: u64,
    pub bytes: u64,
    pub elapsed: Duration,
    pub spill_runs: usize,
}

pub fn build_index(data: &Path, mss: usize, scheme: CodingScheme, out: &Path) -> Result<BuildSummary, IndexError> {
    build_index_with(data, &BuildOptions::new(mss, scheme), out)
}

fn sort_dir(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".sort-{}", std::process::id()));
    out.with_file_name(name)
}

pub fn build_index_with(data: &Path, opts: &BuildOptions, out: &Path) -> Result<BuildSummary, IndexError> {
    let start = Instant::now();
    if !crate::check_mss(opts.mss) {
        return Err(IndexError::MssRange(opts.mss));
    }
    let scheme = opts.scheme;
    let df = DataFile::open(data)?;
    let table = LabelTable::new(df.labels().iter().cloned());

    let mut sorter = ExternalSorter::new(sort_dir(out), opts.sort_budget);
    let mut rec = Vec::with_capacity(64);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    for tree in df.iter() {
        let tree = tree?;
        if !tree.is_numbered() {
            return Err(IndexError::Corrupt(format!("tree {} not in pre order", tree.tid)));
        }
        let labels: Vec<u32> = tree
            .nodes
            .iter()
            .map(|n| table.id(&n.label).expect("data file labels are interned"))
            .collect();
        let kids = tree.child_positions();
        let mut err = None;
        seen.clear();
        for_each_rooted_subtree(&labels, &kids, 0, opts.mss, |code, pos| {
            if err.is_some() {
                return;
            }
            rec.clear();
            for &(s, l) in code {
                rec.push(s);
                rec.extend_from_slice(&l.to_be_bytes());
            }
            rec.extend_from_slice(&tree.tid.to_be_bytes());
            let node_vals = |rec: &mut Vec<u8>, p: u32, with_o: bool| {
                let n = &tree.nodes[p as usize];
                rec.extend_from_slice(&n.pre.to_be_bytes());
                rec.extend_from_slice(&n.post.to_be_bytes());
                rec.extend_from_slice(&n.level.to_be_bytes());
                if with_o {
                    rec.extend_from_slice(&n.pre.to_be_bytes());
                }
            };
            match scheme {
                CodingScheme::FilterBased => {}
                CodingScheme::RootSplit => node_vals(&mut rec, pos[0], false),
                CodingScheme::SubtreeInterval => {
                    for &p in pos {
                        node_vals(&mut rec, p, true);
                    }
                }
            }
            // Filter and root-split postings repeat within a tree; drop
            // them before they reach the sorter.
            if scheme != CodingScheme::SubtreeInterval && !seen.insert(rec.clone()) {
                return;
            }
            if let Err(e) = sorter.push(&rec) {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
    }
    let spill_runs = sorter.runs();

    let mut w = BufWriter::new(File::create(out)?);
    w.write_all(&[0u8; HEADER_LEN])?;
    let mut pos = HEADER_LEN as u64;
    let mut dir: Vec<(Vec<u8>, u64, u32, u32)> = Vec::new();
    let mut cur_key: Vec<u8> = Vec::new();
    let mut list = Vec::new();
    let mut count = 0u32;
    let mut skips: Vec<u8> = Vec::new();
    let mut st = DeltaState::default();
    let mut vals = Vec::new();
    let mut postings = 0u64;

    let mut flush = |key: &[u8], list: &mut Vec<u8>, skips: &mut Vec<u8>, count: u32, w: &mut BufWriter<File>, pos: &mut u64| -> std::io::Result<()> {
        if count > 0 {
            w.write_all(skips)?;
            w.write_all(list)?;
            let bytes = skips.len() + list.len();
            dir.push((key.to_vec(), *pos, bytes as u32, count));
            *pos += bytes as u64;
        }
        list.clear();
        skips.clear();
        Ok(())
    };
    sorter.finish(|r: &[u8]| -> Result<(), IndexError> {
        let klen = r[0] as usize * 5;
        let key = &r[..klen];
        if key != cur_key.as_slice() {
            flush(&cur_key, &mut list, &mut skips, count, &mut w, &mut pos)?;
            cur_key.clear();
            cur_key.extend_from_slice(key);
            count = 0;
            st = DeltaState::default();
        }
        vals.clear();
        vals.extend(r[klen..].chunks_exact(4).map(|c| u32::from_be_bytes(c.try_into().unwrap())));
        if count > 0 && count as usize % SKIP_BLOCK == 0 {
            skips.extend_from_slice(&vals[0].to_le_bytes());
            skips.extend_from_slice(&(list.len() as u32).to_le_bytes());
            st = DeltaState::default();
        }
        encode_posting(scheme, &mut st, &vals, &mut list);
        count += 1;
        postings += 1;
        Ok(())
    })?;
    flush(&cur_key, &mut list, &mut skips, count, &mut w, &mut pos)?;

    let label_off = pos;
    w.write_all(&(table.len() as u32).to_le_bytes())?;
    pos += 4;
    for l in table.labels() {
        w.write_all(&(l.len() as u32).to_le_bytes())?;
        w.write_all(l.as_bytes())?;
        pos += 4 + l.len() as u64;
    }

    let dir_off = pos;
    let mut fences: Vec<&[u8]> = Vec::new();
    let mut page = Vec::with_capacity(PAGE_SIZE);
    let mut in_page = 0u16;
    let write_page = |page: &mut Vec<u8>, in_page: &mut u16, w: &mut BufWriter<File>| -> std::io::Result<()> {
        page[..2].copy_from_slice(&in_page.to_le_bytes());
        page.resize(PAGE_SIZE - 4, 0);
        let crc = crc32fast::hash(page);
        page.extend_from_slice(&crc.to_le_bytes());
        w.write_all(page)?;
        page.clear();
        *in_page = 0;
        Ok(())
    };
    for (key, off, bytes, count) in &dir {
        let need = 1 + key.len() + 16;
        if in_page > 0 && page.len() + need > PAGE_SIZE - 4 {
            write_page(&mut page, &mut in_page, &mut w)?;
        }
        if in_page == 0 {
            page.extend_from_slice(&[0, 0]);
            fences.push(key);
        }
        page.push(key.len() as u8);
        page.extend_from_slice(key);
        page.extend_from_slice(&off.to_le_bytes());
        page.extend_from_slice(&bytes.to_le_bytes());
        page.extend_from_slice(&count.to_le_bytes());
        in_page += 1;
    }
    if in_page > 0 {
        write_page(&mut page, &mut in_page, &mut w)?;
    }
    let page_count = fences.len() as u64;
    pos += page_count * PAGE_SIZE as u64;

    let fence_off = pos;
    for k in &fences {
        w.write_all(&[k.len() as u8])?;
        w.write_all(k)?;
        pos += 1 + k.len() as u64;
    }

    let mut f = w.into_inner().map_err(|e| e.into_error())?;
    f.seek(SeekFrom::Start(0))?;
    let mut hdr = Vec::with_capacity(HEADER_LEN);
    hdr.extend_from_slice(MAGIC);
    hdr.extend_from_slice(&VERSION.to_le_bytes());
    hdr.push(scheme.tag());
    hdr.push(opts.mss as u8);
    hdr.extend_from_slice(&[0, 0]);
    for v in [dir.len() as u64, postings, label_off, dir_off, page_count, fence_off] {
        hdr.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&hdr)?;
    f.sync_all()?;
    Ok(BuildSummary {
        keys: dir.len() as u64,
        postings,
        bytes: pos,
        elapsed: start.elapsed(),
        spill_runs,
    })
}
