//! Synthetic parse-tree corpora and frequency-classed query sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{number_nodes, Corpus, CorpusError, ParseTree, TreeNode};
use crate::query::{Axis, QueryNode};

#[derive(Debug, thiserror::Error)]
pub enum TestkitError {
    #[error("bad generator config: {0}")]
    Config(String),
    #[error("cannot draw queries from an empty corpus")]
    EmptyCorpus,
    #[error("no {class} query of size {size} found in the corpus")]
    Unsatisfiable { class: QueryClass, size: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Parse-tree phrase and part-of-speech tags used as internal labels.
pub const TAGS: &[&str] = &[
    "S", "NP", "VP", "PP", "DT", "NN", "NNS", "NNP", "JJ", "IN", "VBZ", "VBD", "VB", "RB", "ADJP",
    "ADVP", "SBAR", "CC", "PRP", "CD", "TO", "MD", "VBN", "VBG", "WHNP", "PRN", "QP", "POS",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub tree_count: usize,
    /// Nodes at this depth are always words.
    pub max_depth: usize,
    /// Probability that a child of the root is a phrase rather than a word;
    /// multiplied by `phrase_decay` per level.
    pub phrase_prob: f64,
    pub phrase_decay: f64,
    /// Relative weight of 1, 2, 3, ... children for a phrase node. Tags
    /// over words always have one child, so the corpus-wide mean ends up
    /// well below the phrase mean.
    pub branching: Vec<f64>,
    pub tags: usize,
    pub words: usize,
    /// Zipf exponent for label choice.
    pub zipf: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            tree_count: 1000,
            max_depth: 9,
            phrase_prob: 0.8,
            phrase_decay: 0.8,
            branching: vec![30.0, 44.0, 16.0, 5.0, 2.5, 1.0, 0.6, 0.4, 0.3, 0.2],
            tags: TAGS.len(),
            words: 400,
            zipf: 1.1,
        }
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64, tree_count: usize) -> Self {
        GeneratorConfig {
            seed,
            tree_count,
            ..Default::default()
        }
    }

    /// Mean children per phrase node implied by `branching`.
    pub fn phrase_branching(&self) -> f64 {
        let total: f64 = self.branching.iter().sum();
        self.branching
            .iter()
            .enumerate()
            .map(|(i, w)| (i + 1) as f64 * w)
            .sum::<f64>()
            / total
    }

    fn validate(&self) -> Result<(), TestkitError> {
        let bad = |m: &str| Err(TestkitError::Config(m.to_string()));
        if self.branching.is_empty() || self.branching.iter().any(|w| !(*w >= 0.0)) || self.branching.iter().sum::<f64>() <= 0.0 {
            return bad("branching weights must be non-negative with a positive sum");
        }
        if self.tags == 0 || self.tags > TAGS.len() {
            return bad("tag count out of range");
        }
        if self.words == 0 {
            return bad("word pool is empty");
        }
        if self.max_depth < 2 {
            return bad("max_depth must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.phrase_prob) || !(0.0..=1.0).contains(&self.phrase_decay) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.zipf >= 0.0) {
            return bad("zipf exponent must be non-negative");
        }
        Ok(())
    }
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(s))).expect("n > 0")
}

struct TreeGen<'a> {
    cfg: &'a GeneratorConfig,
    rng: ChaCha8Rng,
    branching: WeightedIndex<f64>,
    tags: WeightedIndex<f64>,
    words: WeightedIndex<f64>,
    word_names: Vec<String>,
}

impl TreeGen<'_> {
    fn tree(&mut self, tid: u32) -> Result<ParseTree, CorpusError> {
        let mut nodes = vec![TreeNode {
            id: 0,
            parent: None,
            label: "S".to_string(),
            pre: 0,
            post: 0,
            level: 0,
        }];
        self.grow(0, 0, &mut nodes);
        number_nodes(ParseTree { tid, nodes })
    }

    fn push(&self, nodes: &mut Vec<TreeNode>, parent: u32, label: String) -> u32 {
        let id = nodes.len() as u32;
        nodes.push(TreeNode {
            id,
            parent: Some(parent),
            label,
            pre: 0,
            post: 0,
            level: 0,
        });
        id
    }

    fn grow(&mut self, v: u32, depth: usize, nodes: &mut Vec<TreeNode>) {
        let k = self.branching.sample(&mut self.rng) + 1;
        let p = self.cfg.phrase_prob * self.cfg.phrase_decay.powi(depth as i32);
        for _ in 0..k {
            if depth + 2 < self.cfg.max_depth && self.rng.gen_bool(p) {
                let tag = TAGS[self.tags.sample(&mut self.rng)].to_string();
                let c = self.push(nodes, v, tag);
                self.grow(c, depth + 1, nodes);
            } else {
                // a part-of-speech tag over a word
                let tag = TAGS[self.tags.sample(&mut self.rng)].to_string();
                let c = self.push(nodes, v, tag);
                let w = self.word_names[self.words.sample(&mut self.rng)].clone();
                self.push(nodes, c, w);
            }
        }
    }
}

/// Deterministic synthetic corpus; tree ids are `0..tree_count`.
pub fn gen_corpus(cfg: &GeneratorConfig) -> Result<Corpus, TestkitError> {
    cfg.validate()?;
    let mut g = TreeGen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        branching: WeightedIndex::new(&cfg.branching).map_err(|e| TestkitError::Config(e.to_string()))?,
        tags: zipf(cfg.tags, cfg.zipf),
        words: zipf(cfg.words, cfg.zipf),
        word_names: (0..cfg.words).map(|i| format!("w{i}")).collect(),
    };
    let trees = (0..cfg.tree_count)
        .map(|t| g.tree(t as u32))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(trees)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Freq {
    High,
    Medium,
    Low,
}

/// Which frequency terciles a query's labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryClass {
    H,
    M,
    L,
    HM,
    HL,
    ML,
    HML,
}

impl QueryClass {
    pub const ALL: [QueryClass; 7] = [
        QueryClass::H,
        QueryClass::M,
        QueryClass::L,
        QueryClass::HM,
        QueryClass::HL,
        QueryClass::ML,
        QueryClass::HML,
    ];

    pub fn tiers(self) -> BTreeSet<Freq> {
        use Freq::*;
        let t: &[Freq] = match self {
            QueryClass::H => &[High],
            QueryClass::M => &[Medium],
            QueryClass::L => &[Low],
            QueryClass::HM => &[High, Medium],
            QueryClass::HL => &[High, Low],
            QueryClass::ML => &[Medium, Low],
            QueryClass::HML => &[High, Medium, Low],
        };
        t.iter().copied().collect()
    }
}

impl fmt::Display for QueryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for QueryClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryClass::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown query class {s:?}"))
    }
}

/// Label frequency terciles by document frequency (number of trees using
/// the label). Labels are ranked by frequency and cut where the running
/// total passes one and two thirds of all label occurrences, so the few
/// ubiquitous tags form the high class. Ties break by label.
pub fn frequency_tiers(corpus: &Corpus) -> BTreeMap<String, Freq> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for t in corpus.trees() {
        let labels: BTreeSet<&str> = t.nodes.iter().map(|n| n.label.as_str()).collect();
        for l in labels {
            *df.entry(l).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let total: usize = ranked.iter().map(|r| r.1).sum();
    let mut seen = 0;
    ranked
        .into_iter()
        .map(|(l, n)| {
            let tier = match seen * 3 / total.max(1) {
                0 => Freq::High,
                1 => Freq::Medium,
                _ => Freq::Low,
            };
            seen += n;
            (l.to_string(), tier)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub seed: u64,
    pub class: QueryClass,
    pub min_size: usize,
    pub max_size: usize,
    pub per_size: usize,
    /// Chance that a query edge is turned into `//` by skipping levels.
    pub descendant_prob: f64,
    pub max_tries: usize,
}

impl QuerySpec {
    pub fn new(seed: u64, class: QueryClass, min_size: usize, max_size: usize) -> Self {
        QuerySpec {
            seed,
            class,
            min_size,
            max_size,
            per_size: 1,
            descendant_prob: 0.0,
            max_tries: 4000,
        }
    }
}

/// Queries drawn from the trees of `corpus`, classed by its own label
/// frequencies.
pub fn gen_queries(corpus: &Corpus, spec: &QuerySpec) -> Result<Vec<QueryNode>, TestkitError> {
    gen_queries_from(corpus, corpus, spec)
}

/// Queries drawn as subtrees of `source` trees (typically held out from
/// the indexed corpus), classed by label frequencies in `reference`.
pub fn gen_queries_from(reference: &Corpus, source: &Corpus, spec: &QuerySpec) -> Result<Vec<QueryNode>, TestkitError> {
    if reference.is_empty() || source.is_empty() {
        return Err(TestkitError::EmptyCorpus);
    }
    let tiers = frequency_tiers(reference);
    let want = spec.class.tiers();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kids: Vec<Vec<Vec<usize>>> = source.trees().iter().map(|t| t.child_positions()).collect();
    let mut out = Vec::new();
    for size in spec.min_size..=spec.max_size {
        for _ in 0..spec.per_size {
            let q = (0..spec.max_tries)
                .find_map(|_| draw(&mut rng, source, &kids, &tiers, &want, size, spec.descendant_prob))
                .ok_or(TestkitError::Unsatisfiable { class: spec.class, size })?;
            out.push(q);
        }
    }
    Ok(out)
}

fn draw(
    rng: &mut ChaCha8Rng,
    source: &Corpus,
    kids: &[Vec<Vec<usize>>],
    tiers: &BTreeMap<String, Freq>,
    want: &BTreeSet<Freq>,
    size: usize,
    desc_prob: f64,
) -> Option<QueryNode> {
    if size == 0 || want.len() > size {
        return None;
    }
    let ti = rng.gen_range(0..source.len());
    let t = &source.trees()[ti];
    let kids = &kids[ti];
    let tier = |v: usize| tiers.get(&t.nodes[v].label).copied();
    let ok = |v: usize| tier(v).is_some_and(|f| want.contains(&f));
    let root = rng.gen_range(0..t.size());
    if !ok(root) {
        return None;
    }
    // chosen nodes with their query parent and axis
    let mut chosen: Vec<(usize, Option<usize>, Axis)> = vec![(root, None, Axis::Child)];
    while chosen.len() < size {
        let taken = |x: usize| chosen.iter().any(|c| c.0 == x);
        let mut front: Vec<(usize, usize, Axis)> = Vec::new();
        for (i, &(v, _, _)) in chosen.iter().enumerate() {
            for &c in &kids[v] {
                if !taken(c) && ok(c) {
                    front.push((c, i, Axis::Child));
                }
            }
        }
        if front.is_empty() {
            return None;
        }
        let (mut c, p, mut axis) = front[rng.gen_range(0..front.len())];
        if desc_prob > 0.0 && rng.gen_bool(desc_prob) {
            let below: Vec<usize> = kids[c].iter().copied().filter(|&g| !taken(g) && ok(g)).collect();
            if !below.is_empty() {
                c = below[rng.gen_range(0..below.len())];
                axis = Axis::Descendant;
            }
        }
        chosen.push((c, Some(p), axis));
    }
    let got: BTreeSet<Freq> = chosen.iter().filter_map(|c| tier(c.0)).collect();
    if &got != want {
        return None;
    }
    fn build(i: usize, chosen: &[(usize, Option<usize>, Axis)], t: &ParseTree) -> QueryNode {
        QueryNode {
            label: t.nodes[chosen[i].0].label.clone(),
            children: (0..chosen.len())
                .filter(|&j| chosen[j].1 == Some(i))
                .map(|j| (chosen[j].2, build(j, chosen, t)))
                .collect(),
        }
    }
    Some(build(0, &chosen, t))
}
