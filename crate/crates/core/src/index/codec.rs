//! Varint delta coding of posting lists.

use super::CodingScheme;
use crate::varint;

/// Postings per skip block. Lists longer than this start with a skip
/// table and restart delta coding at every block.
pub(crate) const SKIP_BLOCK: usize = 32;

/// Upper bound on the encoded size of one posting.
pub(crate) const MAX_POSTING_BYTES: usize = 5 * (2 + 4 * crate::MAX_MSS);

#[derive(Debug, Clone, Default)]
pub(crate) struct DeltaState {
    tid: u32,
    l: u32,
}

/// Appends one posting given as its flat values (see [`CodingScheme::width`]).
pub(crate) fn encode_posting(scheme: CodingScheme, st: &mut DeltaState, vals: &[u32], out: &mut Vec<u8>) {
    let tid = vals[0];
    let dt = tid - st.tid;
    varint::put(out, dt as u64);
    if dt != 0 {
        st.l = 0;
    }
    st.tid = tid;
    if scheme == CodingScheme::FilterBased {
        return;
    }
    let (l1, r1, v1) = (vals[1], vals[2], vals[3]);
    varint::put(out, (l1 - st.l) as u64);
    st.l = l1;
    varint::put(out, r1 as u64);
    varint::put(out, v1 as u64);
    if scheme == CodingScheme::RootSplit {
        return;
    }
    varint::put(out, (vals[4] - l1) as u64);
    for c in vals[5..].chunks_exact(4) {
        varint::put(out, (c[0] - l1) as u64);
        varint::put(out, (r1 - c[1]) as u64);
        varint::put(out, (c[2] - v1) as u64);
        varint::put(out, (c[3] - c[0]) as u64);
    }
}

/// Decodes one posting of a key with `m` nodes into `vals`.
pub(crate) fn decode_posting(
    scheme: CodingScheme,
    m: usize,
    st: &mut DeltaState,
    buf: &[u8],
    pos: &mut usize,
    vals: &mut Vec<u32>,
) -> Option<()> {
    let mut next = || varint::get(buf, pos).and_then(|x| u32::try_from(x).ok());
    vals.clear();
    let dt = next()?;
    if dt != 0 {
        st.l = 0;
    }
    st.tid = st.tid.checked_add(dt)?;
    vals.push(st.tid);
    if scheme == CodingScheme::FilterBased {
        return Some(());
    }
    let l1 = st.l.checked_add(next()?)?;
    st.l = l1;
    let (r1, v1) = (next()?, next()?);
    vals.extend([l1, r1, v1]);
    if scheme == CodingScheme::RootSplit {
        return Some(());
    }
    vals.push(l1.checked_add(next()?)?);
    for _ in 1..m {
        let l = l1.checked_add(next()?)?;
        let r = r1.checked_sub(next()?)?;
        let v = v1.checked_add(next()?)?;
        let o = l.checked_add(next()?)?;
        vals.extend([l, r, v, o]);
    }
    Some(())
}
