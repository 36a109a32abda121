//! Unordered labeled subtrees: canonical form, keys, enumeration.

mod enumerate;
mod key;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub use enumerate::{enumerate_subtrees, for_each_rooted_subtree, SubtreeInstance};
pub use key::{decode_key, encode_key, reference_key_bits, KeyError, LabelTable, SubtreeKey};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubtreeShape {
    pub label: String,
    pub children: Vec<SubtreeShape>,
}

impl SubtreeShape {
    pub fn leaf(label: impl Into<String>) -> Self {
        SubtreeShape {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn new(label: impl Into<String>, children: Vec<SubtreeShape>) -> Self {
        SubtreeShape {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    /// Pre-order (size, label) sequence.
    pub fn preorder(&self) -> Vec<(usize, &str)> {
        fn go<'a>(s: &'a SubtreeShape, out: &mut Vec<(usize, &'a str)>) -> usize {
            let at = out.len();
            out.push((0, &s.label));
            let size = 1 + s.children.iter().map(|c| go(c, out)).sum::<usize>();
            out[at].0 = size;
            size
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn is_canonical(&self) -> bool {
        self.children.windows(2).all(|w| canon_cmp(&w[0], &w[1]) != Ordering::Greater)
            && self.children.iter().all(|c| c.is_canonical())
    }

    pub fn canonical(&self) -> SubtreeShape {
        canonicalize(self.clone())
    }
}

/// Sibling order: label first, then the pre-order serialization.
pub fn canon_cmp(a: &SubtreeShape, b: &SubtreeShape) -> Ordering {
    a.label
        .cmp(&b.label)
        .then_with(|| a.preorder().cmp(&b.preorder()))
}

pub fn canonicalize(mut shape: SubtreeShape) -> SubtreeShape {
    shape.children = shape.children.into_iter().map(canonicalize).collect();
    shape.children.sort_by(canon_cmp);
    shape
}

/// True iff `a` embeds into `b` injectively, preserving labels and
/// parent-child edges.
pub fn is_subtree_of(a: &SubtreeShape, b: &SubtreeShape) -> bool {
    embeds_at(a, b) || b.children.iter().any(|c| is_subtree_of(a, c))
}

fn embeds_at(a: &SubtreeShape, x: &SubtreeShape) -> bool {
    fn assign(a: &[SubtreeShape], x: &[SubtreeShape], used: &mut [bool]) -> bool {
        let Some((first, rest)) = a.split_first() else {
            return true;
        };
        for (j, c) in x.iter().enumerate() {
            if !used[j] && embeds_at(first, c) {
                used[j] = true;
                if assign(rest, x, used) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    a.label == x.label
        && a.children.len() <= x.children.len()
        && assign(&a.children, &x.children, &mut vec![false; x.children.len()])
}

impl fmt::Display for SubtreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        for c in &self.children {
            write!(f, "({c})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad subtree syntax at {pos}: {msg}")]
pub struct ShapeSyntaxError {
    pub pos: usize,
    pub msg: &'static str,
}

fn is_label_byte(b: u8) -> bool {
    !b.is_ascii_whitespace() && b != b'(' && b != b')'
}

impl FromStr for SubtreeShape {
    type Err = ShapeSyntaxError;

    /// Parses the `A(B)(C(D))` notation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        fn node(s: &[u8], src: &str, pos: &mut usize) -> Result<SubtreeShape, ShapeSyntaxError> {
            let start = *pos;
            while *pos < s.len() && is_label_byte(s[*pos]) {
                *pos += 1;
            }
            if start == *pos {
                return Err(ShapeSyntaxError { pos: start, msg: "expected label" });
            }
            let mut shape = SubtreeShape::leaf(&src[start..*pos]);
            while s.get(*pos) == Some(&b'(') {
                *pos += 1;
                shape.children.push(node(s, src, pos)?);
                if s.get(*pos) != Some(&b')') {
                    return Err(ShapeSyntaxError { pos: *pos, msg: "expected ')'" });
                }
                *pos += 1;
            }
            Ok(shape)
        }
        let compact: String = s.split_whitespace().collect();
        let mut pos = 0;
        let shape = node(compact.as_bytes(), &compact, &mut pos)?;
        if pos != compact.len() {
            return Err(ShapeSyntaxError { pos, msg: "trailing input" });
        }
        Ok(shape)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: &str) -> SubtreeShape {
        x.parse().unwrap()
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(s("A(C)(B)")).to_string(), "A(B)(C)");
        assert_eq!(canonicalize(s("A(B(D))(B(C))")).to_string(), "A(B(C))(B(D))");
        assert_eq!(canonicalize(s("A")).to_string(), "A");
        // equal labels, smaller subtree first by size then label
        assert_eq!(canonicalize(s("A(B(C)(C))(B(C))")).to_string(), "A(B(C))(B(C)(C))");
    }

    #[test]
    fn parse_and_size() {
        let x = s("S(NP(NNS(agouti)))(VP(VBZ(is))(NP(DT(a))(NN)))");
        assert_eq!(x.size(), 11);
        assert_eq!(x.to_string(), "S(NP(NNS(agouti)))(VP(VBZ(is))(NP(DT(a))(NN)))");
        assert!("A((B)".parse::<SubtreeShape>().is_err());
        assert!("A(B".parse::<SubtreeShape>().is_err());
        assert!("".parse::<SubtreeShape>().is_err());
        assert_eq!(s(" A ( B ) "), s("A(B)"));
    }

    #[test]
    fn subtree_relation() {
        assert!(is_subtree_of(&s("NP"), &s("NP(NN)")));
        assert!(!is_subtree_of(&s("A(B)"), &s("A(C)")));
        assert!(is_subtree_of(&s("B(C)"), &s("A(B(C)(D))")));
        assert!(!is_subtree_of(&s("A(B)(B)"), &s("A(B)")));
        assert!(is_subtree_of(&s("A(B)(B(C))"), &s("A(B(C))(B(D))")));
        assert!(!is_subtree_of(&s("A(B(C))(B(C))"), &s("A(B(C))(B(D))")));
    }

    pub(crate) fn arb_shape(max_size: usize, labels: &'static [&'static str]) -> BoxedStrategy<SubtreeShape> {
        // Build from a random parent sequence to keep sizes bounded.
        (1..=max_size)
            .prop_flat_map(move |n| {
                (
                    proptest::collection::vec(0usize..labels.len(), n),
                    proptest::collection::vec(any::<prop::sample::Index>(), n),
                )
            })
            .prop_map(move |(ls, ps)| {
                let n = ls.len();
                let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
                for i in 1..n {
                    kids[ps[i].index(i)].push(i);
                }
                fn build(i: usize, kids: &[Vec<usize>], ls: &[usize], labels: &[&str]) -> SubtreeShape {
                    SubtreeShape::new(
                        labels[ls[i]],
                        kids[i].iter().map(|&c| build(c, kids, ls, labels)).collect(),
                    )
                }
                build(0, &kids, &ls, labels)
            })
            .boxed()
    }

    fn shuffle(x: &SubtreeShape, seed: &mut u64) -> SubtreeShape {
        let mut kids: Vec<_> = x.children.iter().map(|c| shuffle(c, seed)).collect();
        for i in (1..kids.len()).rev() {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            kids.swap(i, (*seed >> 33) as usize % (i + 1));
        }
        SubtreeShape::new(x.label.clone(), kids)
    }

    proptest! {
        #[test]
        fn canonical_idempotent_and_permutation_invariant(x in arb_shape(8, &["A", "B", "C"]), seed: u64) {
            let c = x.canonical();
            prop_assert!(c.is_canonical());
            prop_assert_eq!(c.canonical(), c.clone());
            prop_assert_eq!(shuffle(&x, &mut seed.clone()).canonical(), c);
        }

        #[test]
        fn render_parse_round_trip(x in arb_shape(8, &["A", "B", "NP", "x"])) {
            prop_assert_eq!(x.to_string().parse::<SubtreeShape>().unwrap(), x);
        }

        #[test]
        fn subtree_relation_is_reflexive_and_transitive(
            a in arb_shape(3, &["A", "B"]),
            b in arb_shape(5, &["A", "B"]),
            c in arb_shape(7, &["A", "B"]),
        ) {
            prop_assert!(is_subtree_of(&a, &a));
            if is_subtree_of(&a, &b) && is_subtree_of(&b, &c) {
                prop_assert!(is_subtree_of(&a, &c));
            }
        }
    }
}
