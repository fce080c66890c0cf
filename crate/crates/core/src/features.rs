//! Sparse feature extraction from tagged tweets.
//!
//! Five template families are emitted, each under its own namespace prefix:
//! entity context windows (`ctx:`), entity-to-keyword context (`kwctx:`),
//! target-pair context (`pair:`), keyword distance (`dist:`), punctuation
//! (`punct:`), dependency paths (`dep:`) and negated keyword (`neg:`).
//! Entity tokens are always replaced by their tag placeholder, so no feature
//! string ever contains a contender surface name and the classifier
//! generalizes across contests.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagging::{EntityTag, TaggedTweet};

/// Maximum context window width on each side of an entity.
const MAX_CONTEXT_WINDOW: usize = 4;
/// Keyword-context sequences longer than this are not emitted; uncapped gaps
/// create singleton features.
const MAX_KEYWORD_GAP: usize = 6;
/// Fallback negation window (tokens to the left of the keyword) when no
/// dependency parse is available.
const NEGATION_WINDOW: usize = 2;

pub const NEGATION_WORDS: &[&str] = &[
    "not", "never", "n't", "won't", "don't", "doesn't", "can't", "no",
];

fn expand_contraction(token: &str) -> Option<(&'static str, &'static str)> {
    match token {
        "doesn't" => Some(("does", "not")),
        "won't" => Some(("will", "not")),
        "can't" => Some(("can", "not")),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Sparse vectors and the feature vocabulary
// ---------------------------------------------------------------------------

/// Feature-indexed values. Binary template features are stored as 1.0;
/// zero-valued entries are never kept.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<u32, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: u32, value: f64) {
        if value != 0.0 {
            self.entries.insert(index, value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.keys().next_back().copied()
    }

    /// Dot product against a dense weight slice (bias not included here).
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter().map(|(i, v)| weights[i as usize] * v).sum()
    }
}

/// Bijective feature-string <-> index map. Grows during the training
/// pre-pass; once frozen, unseen strings are dropped rather than added.
#[derive(Debug, Clone, Default)]
pub struct FeatureVocabulary {
    by_name: HashMap<String, u32>,
    names: Vec<String>,
    frozen: bool,
}

impl FeatureVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuild from an index-ordered name list (model deserialization).
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if by_name.insert(name.clone(), i as u32).is_some() {
                return Err(Error::VocabularyMismatch(format!(
                    "duplicate feature string `{name}`"
                )));
            }
        }
        Ok(Self {
            by_name,
            names,
            frozen: true,
        })
    }

    /// Intern a feature string. Returns its index, or `None` when the
    /// vocabulary is frozen and the string is unseen.
    pub fn intern(&mut self, name: &str) -> Option<u32> {
        if let Some(&idx) = self.by_name.get(name) {
            return Some(idx);
        }
        if self.frozen {
            return None;
        }
        let idx = self.names.len() as u32;
        self.by_name.insert(name.to_string(), idx);
        self.names.push(name.to_string());
        Some(idx)
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, index: u32) -> Option<&str> {
        self.names.get(index as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Dependency parse side data
// ---------------------------------------------------------------------------

/// Dependency heads for one tweet, from an external parse side file.
/// Indices refer to this pipeline's tokenization; -1 marks the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseInfo {
    pub tweet_id: String,
    pub heads: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deprels: Option<Vec<String>>,
}

impl ParseInfo {
    /// Heads must cover every token exactly and contain no cycles.
    pub fn validate(&self, token_count: usize) -> Result<()> {
        if self.heads.len() != token_count {
            return Err(Error::InvalidArgument(format!(
                "parse for tweet `{}` has {} heads for {} tokens",
                self.tweet_id,
                self.heads.len(),
                token_count
            )));
        }
        for (i, &h) in self.heads.iter().enumerate() {
            if h != -1 && (h < 0 || h as usize >= token_count) {
                return Err(Error::InvalidArgument(format!(
                    "parse for tweet `{}`: head {h} of token {i} out of range",
                    self.tweet_id
                )));
            }
        }
        for start in 0..self.heads.len() {
            let mut seen = vec![false; self.heads.len()];
            let mut cur = start;
            loop {
                if seen[cur] {
                    return Err(Error::InvalidArgument(format!(
                        "parse for tweet `{}` contains a cycle through token {cur}",
                        self.tweet_id
                    )));
                }
                seen[cur] = true;
                match self.heads[cur] {
                    -1 => break,
                    h => cur = h as usize,
                }
            }
        }
        Ok(())
    }

    /// Chain of ancestors of `token` (nearest first), excluding the token.
    fn ancestors(&self, token: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = token;
        let mut guard = 0;
        while self.heads[cur] != -1 && guard <= self.heads.len() {
            cur = self.heads[cur] as usize;
            out.push(cur);
            guard += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

/// The five template groups of the ablation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Context,
    Distance,
    Punctuation,
    Dependency,
    Negation,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::Context,
        FeatureGroup::Distance,
        FeatureGroup::Punctuation,
        FeatureGroup::Dependency,
        FeatureGroup::Negation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::Context => "context",
            FeatureGroup::Distance => "distance",
            FeatureGroup::Punctuation => "punctuation",
            FeatureGroup::Dependency => "dependency",
            FeatureGroup::Negation => "negation",
        }
    }

    /// Group a feature string belongs to, by namespace prefix.
    pub fn of_feature(feature: &str) -> Option<FeatureGroup> {
        let prefix = feature.split(':').next()?;
        match prefix {
            "ctx" | "kwctx" | "pair" => Some(FeatureGroup::Context),
            "dist" => Some(FeatureGroup::Distance),
            "punct" => Some(FeatureGroup::Punctuation),
            "dep" => Some(FeatureGroup::Dependency),
            "neg" => Some(FeatureGroup::Negation),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "context" => Ok(FeatureGroup::Context),
            "distance" => Ok(FeatureGroup::Distance),
            "punctuation" => Ok(FeatureGroup::Punctuation),
            "dependency" => Ok(FeatureGroup::Dependency),
            "negation" => Ok(FeatureGroup::Negation),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature group `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Drops features of the named groups before training or inference.
#[derive(Debug, Clone, Default)]
pub struct AblationFilter {
    removed: BTreeSet<FeatureGroup>,
}

impl AblationFilter {
    pub fn keeps(&self, feature: &str) -> bool {
        match FeatureGroup::of_feature(feature) {
            Some(group) => !self.removed.contains(&group),
            None => true,
        }
    }

    pub fn apply(&self, features: Vec<String>) -> Vec<String> {
        if self.removed.is_empty() {
            return features;
        }
        features.into_iter().filter(|f| self.keeps(f)).collect()
    }

    pub fn removed(&self) -> impl Iterator<Item = FeatureGroup> + '_ {
        self.removed.iter().copied()
    }
}

/// Build a filter from group names; unknown names are rejected.
pub fn ablate<I, S>(groups: I) -> Result<AblationFilter>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut removed = BTreeSet::new();
    for g in groups {
        removed.insert(g.as_ref().parse::<FeatureGroup>()?);
    }
    Ok(AblationFilter { removed })
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ItemKind {
    Word,
    Entity { tag: EntityTag, span_idx: usize },
}

/// One position of the collapsed view: entity spans shrink to a single
/// placeholder token so windows and distances count entities as one word.
struct Item {
    render: String,
    kind: ItemKind,
    is_keyword: bool,
}

fn collapse(tagged: &TaggedTweet) -> Vec<Item> {
    let keyword_at = |i: usize| tagged.keyword_positions.contains(&i);
    let mut items = Vec::new();
    let mut i = 0;
    let mut span_iter = tagged.spans.iter().enumerate().peekable();
    while i < tagged.tokens.len() {
        if let Some((sidx, span)) = span_iter.peek().copied() {
            if span.start == i {
                items.push(Item {
                    render: span.tag.placeholder().to_string(),
                    kind: ItemKind::Entity {
                        tag: span.tag,
                        span_idx: sidx,
                    },
                    is_keyword: false,
                });
                i = span.end;
                span_iter.next();
                continue;
            }
        }
        items.push(Item {
            render: tagged.tokens[i].to_lowercase(),
            kind: ItemKind::Word,
            is_keyword: keyword_at(i),
        });
        i += 1;
    }
    items
}

fn join_renders(items: &[Item]) -> String {
    items
        .iter()
        .map(|it| it.render.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn distance_bucket(d: usize) -> &'static str {
    match d {
        0 | 1 => "1",
        2 => "2",
        3 => "3",
        4..=6 => "4-6",
        _ => "7+",
    }
}

/// Extract the full feature-string set for one tagged tweet.
///
/// Requires at least one TARGET span; tweets without one are the caller's
/// problem to skip and count.
pub fn extract_feature_strings(
    tagged: &TaggedTweet,
    parse: Option<&ParseInfo>,
) -> Result<Vec<String>> {
    if tagged.target_spans().next().is_none() {
        return Err(Error::NoTarget(tagged.tweet_id.clone()));
    }

    let items = collapse(tagged);
    let mut feats = Vec::new();

    let entity_positions: Vec<(usize, EntityTag, usize)> = items
        .iter()
        .enumerate()
        .filter_map(|(pos, it)| match it.kind {
            ItemKind::Entity { tag, span_idx } => Some((pos, tag, span_idx)),
            ItemKind::Word => None,
        })
        .collect();
    let keyword_positions: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, it)| it.is_keyword)
        .map(|(pos, _)| pos)
        .collect();

    // Context windows around TARGET and OPPONENT, each (direction, width)
    // emitted as its own feature. Only full windows are emitted so that the
    // width-w string is always a sub-span of the width-(w+1) string.
    for &(pos, tag, _) in &entity_positions {
        if tag == EntityTag::Entity {
            continue;
        }
        let placeholder = tag.placeholder();
        for w in 1..=MAX_CONTEXT_WINDOW {
            if pos >= w {
                let window = join_renders(&items[pos - w..pos]);
                feats.push(format!("ctx:{window} {placeholder}"));
            }
            if pos + w < items.len() {
                let window = join_renders(&items[pos + 1..=pos + w]);
                feats.push(format!("ctx:{placeholder} {window}"));
            }
        }
    }

    // Tokens strictly between each TARGET/OPPONENT span and each keyword.
    for &(pos, tag, _) in &entity_positions {
        if tag == EntityTag::Entity {
            continue;
        }
        let placeholder = tag.placeholder();
        for &k in &keyword_positions {
            let (lo, hi) = if pos < k { (pos, k) } else { (k, pos) };
            let gap = &items[lo + 1..hi];
            if gap.len() > MAX_KEYWORD_GAP {
                continue;
            }
            let mut parts: Vec<&str> = Vec::with_capacity(gap.len() + 2);
            let mid = join_renders(gap);
            if pos < k {
                parts.push(placeholder);
                if !mid.is_empty() {
                    parts.push(&mid);
                }
                parts.push("KEYWORD");
            } else {
                parts.push("KEYWORD");
                if !mid.is_empty() {
                    parts.push(&mid);
                }
                parts.push(placeholder);
            }
            feats.push(format!("kwctx:{}", parts.join(" ")));
        }
    }

    // Tokens between the first two TARGET spans (election-style queries put
    // the contender and the state in one gazetteer entry set).
    let targets: Vec<usize> = entity_positions
        .iter()
        .filter(|(_, tag, _)| *tag == EntityTag::Target)
        .map(|(pos, _, _)| *pos)
        .collect();
    if targets.len() >= 2 {
        let (a, b) = (targets[0], targets[1]);
        let mid = join_renders(&items[a + 1..b]);
        if mid.is_empty() {
            feats.push("pair:TARGET1 TARGET2".to_string());
        } else {
            feats.push(format!("pair:TARGET1 {mid} TARGET2"));
        }
    }

    // Keyword distance: which entity kind is nearer, plus a bucketed
    // TARGET-to-keyword distance. An absence indicator keeps tweets without
    // the keyword from producing empty vectors.
    if keyword_positions.is_empty() {
        feats.push("dist:KEYWORD absent".to_string());
    } else {
        let min_dist = |tag: EntityTag| -> Option<usize> {
            entity_positions
                .iter()
                .filter(|(_, t, _)| *t == tag)
                .flat_map(|(pos, _, _)| {
                    keyword_positions.iter().map(move |&k| pos.abs_diff(k))
                })
                .min()
        };
        let d_target = min_dist(EntityTag::Target).expect("target span checked above");
        let d_opponent = min_dist(EntityTag::Opponent);
        match d_opponent {
            Some(d_opp) if d_opp < d_target => {
                feats.push("dist:OPPONENT closer to KEYWORD".to_string());
            }
            Some(d_opp) if d_opp == d_target => {}
            _ => feats.push("dist:TARGET closer to KEYWORD".to_string()),
        }
        feats.push(format!(
            "dist:TARGET to KEYWORD={}",
            distance_bucket(d_target)
        ));
    }

    // Punctuation binaries over the raw token sequence.
    let tokens = &tagged.tokens;
    if tokens.iter().any(|t| t == "!") {
        feats.push("punct:!".to_string());
    }
    if tokens.iter().any(|t| t == "?") {
        feats.push("punct:?".to_string());
    }
    match tokens.last().map(String::as_str) {
        Some("!") => feats.push("punct:ends:!".to_string()),
        Some("?") => feats.push("punct:ends:?".to_string()),
        Some(".") => feats.push("punct:ends:.".to_string()),
        _ => {}
    }

    // Dependency paths and keyword negation.
    let mut negated = false;
    if let Some(parse) = parse {
        feats.extend(dependency_path_features(tagged, parse));
        negated = tagged
            .keyword_positions
            .iter()
            .any(|&k| keyword_dominated_by_negation(parse, k, tokens));
    } else {
        // Adjacency fallback: a negation word within two tokens to the left.
        negated = tagged.keyword_positions.iter().any(|&k| {
            (1..=NEGATION_WINDOW).any(|back| {
                k.checked_sub(back)
                    .map(|i| NEGATION_WORDS.contains(&tokens[i].to_lowercase().as_str()))
                    .unwrap_or(false)
            })
        });
    }
    if negated {
        feats.push("neg:keyword negated".to_string());
    }

    Ok(feats)
}

/// Convert strings to a binary SparseVector through the vocabulary, dropping
/// strings the vocabulary does not know (the frozen-vocabulary contract).
pub fn vectorize(features: &[String], vocab: &FeatureVocabulary) -> SparseVector {
    let mut sv = SparseVector::new();
    for f in features {
        if let Some(idx) = vocab.index_of(f) {
            sv.insert(idx, 1.0);
        }
    }
    sv
}

/// Full extraction against a (normally frozen) vocabulary.
pub fn extract_features(
    tagged: &TaggedTweet,
    parse: Option<&ParseInfo>,
    vocab: &FeatureVocabulary,
) -> Result<SparseVector> {
    let strings = extract_feature_strings(tagged, parse)?;
    Ok(vectorize(&strings, vocab))
}

// --- dependency path machinery ---

/// Span-internal root: the token whose head lies outside the span.
fn span_head(parse: &ParseInfo, start: usize, end: usize) -> usize {
    for i in start..end {
        let h = parse.heads[i];
        if h == -1 || (h as usize) < start || (h as usize) >= end {
            return i;
        }
    }
    end - 1
}

/// Tree path from `a` to `b` as (nodes, first_upward_steps). Nodes run
/// a .. lca .. b; the step from node i to node i+1 is upward while i is
/// below the LCA and downward after it.
fn tree_path(parse: &ParseInfo, a: usize, b: usize) -> Option<(Vec<usize>, usize)> {
    if a == b {
        return None;
    }
    let anc_a = parse.ancestors(a);
    let anc_b = parse.ancestors(b);
    let mut chain_a = vec![a];
    chain_a.extend(&anc_a);
    let mut chain_b = vec![b];
    chain_b.extend(&anc_b);
    let set_a: HashMap<usize, usize> = chain_a.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let lca_pos_b = chain_b.iter().position(|n| set_a.contains_key(n))?;
    let lca = chain_b[lca_pos_b];
    let lca_pos_a = set_a[&lca];
    let mut nodes: Vec<usize> = chain_a[..=lca_pos_a].to_vec();
    for i in (0..lca_pos_b).rev() {
        nodes.push(chain_b[i]);
    }
    Some((nodes, lca_pos_a))
}

/// Render a path node: placeholders for entity tokens, contraction expansion
/// for negative auxiliaries, lowercased surface otherwise. Expansions yield
/// two node texts joined later by a downward arrow.
fn render_node(tagged: &TaggedTweet, token: usize, endpoint: Option<&str>) -> Vec<String> {
    if let Some(label) = endpoint {
        return vec![label.to_string()];
    }
    if let Some(span) = tagged
        .spans
        .iter()
        .find(|s| s.start <= token && token < s.end)
    {
        return vec![span.tag.placeholder().to_string()];
    }
    let lower = tagged.tokens[token].to_lowercase();
    match expand_contraction(&lower) {
        Some((a, b)) => vec![a.to_string(), b.to_string()],
        None => vec![lower],
    }
}

fn render_path(
    tagged: &TaggedTweet,
    parse: &ParseInfo,
    a: usize,
    b: usize,
    label_a: &str,
    label_b: &str,
) -> Option<String> {
    let (nodes, up_steps) = tree_path(parse, a, b)?;
    let mut out = String::new();
    for (i, &node) in nodes.iter().enumerate() {
        let endpoint = if i == 0 {
            Some(label_a)
        } else if i == nodes.len() - 1 {
            Some(label_b)
        } else {
            None
        };
        let parts = render_node(tagged, node, endpoint);
        if i > 0 {
            let arrow = if i <= up_steps { "<-" } else { "->" };
            out.push_str(&format!(" {arrow} "));
        }
        out.push_str(&parts.join(" -> "));
    }
    Some(out)
}

/// TARGET<->KEYWORD paths (every pair) and the path between the first two
/// TARGET spans.
fn dependency_path_features(tagged: &TaggedTweet, parse: &ParseInfo) -> Vec<String> {
    let mut feats = Vec::new();
    let target_heads: Vec<usize> = tagged
        .target_spans()
        .map(|s| span_head(parse, s.start, s.end))
        .collect();

    for &th in &target_heads {
        for &k in &tagged.keyword_positions {
            if let Some(p) = render_path(tagged, parse, th, k, "TARGET", "KEYWORD") {
                feats.push(format!("dep:{p}"));
            }
        }
    }
    if target_heads.len() >= 2 {
        if let Some(p) = render_path(
            tagged,
            parse,
            target_heads[0],
            target_heads[1],
            "TARGET1",
            "TARGET2",
        ) {
            feats.push(format!("dep:{p}"));
        }
    }
    feats
}

/// With a parse: the keyword is negated when a negation word dominates it
/// (appears among its ancestors, contractions counted).
fn keyword_dominated_by_negation(parse: &ParseInfo, keyword: usize, tokens: &[String]) -> bool {
    parse.ancestors(keyword).into_iter().any(|anc| {
        let lower = tokens[anc].to_lowercase();
        NEGATION_WORDS.contains(&lower.as_str())
            || expand_contraction(&lower).is_some_and(|(_, b)| b == "not")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Contender, Contest, DateWindow, EventCategory};
    use crate::tagging::{tag_entities, tokenize, KeywordMatcher};
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use std::collections::BTreeSet as Set;

    fn contest() -> Contest {
        let mut c = Contest {
            id: "test".into(),
            category: EventCategory::Oscars,
            event_prefix: "Oscars".into(),
            contenders: vec![
                Contender {
                    id: "leo".into(),
                    display_name: "Leonardo DiCaprio".into(),
                    aliases: vec![],
                },
                Contender {
                    id: "bryan".into(),
                    display_name: "Bryan Cranston".into(),
                    aliases: vec![],
                },
            ],
            date_window: DateWindow {
                start: NaiveDate::from_ymd_opt(2016, 2, 22).unwrap(),
                end: NaiveDate::from_ymd_opt(2016, 2, 28).unwrap(),
            },
            winner: None,
        };
        c.validate().unwrap();
        c
    }

    fn extract(text: &str) -> Vec<String> {
        let c = contest();
        let tokens = tokenize(text);
        let tagged = tag_entities(
            "t",
            &tokens,
            &c,
            "leo",
            None,
            &KeywordMatcher::new("win", true),
        )
        .unwrap();
        extract_feature_strings(&tagged, None).unwrap()
    }

    #[test]
    fn keyword_context_window() {
        let feats = extract("DiCaprio will win");
        assert!(feats.contains(&"kwctx:TARGET will KEYWORD".to_string()), "{feats:?}");
        assert!(feats.contains(&"ctx:TARGET will".to_string()));
        assert!(feats.contains(&"ctx:TARGET will win".to_string()));
        assert!(feats.contains(&"dist:TARGET closer to KEYWORD".to_string()));
        assert!(feats.contains(&"dist:TARGET to KEYWORD=2".to_string()));
    }

    #[test]
    fn negated_contraction_kept_in_context() {
        let feats = extract("DiCaprio won't win");
        assert!(feats.contains(&"kwctx:TARGET won't KEYWORD".to_string()), "{feats:?}");
        assert!(feats.contains(&"neg:keyword negated".to_string()));
    }

    #[test]
    fn bare_target_yields_absence_indicator_only() {
        let feats = extract("DiCaprio");
        assert_eq!(feats, vec!["dist:KEYWORD absent".to_string()]);
    }

    #[test]
    fn no_target_is_an_error() {
        let c = contest();
        let tokens = tokenize("Bryan Cranston will win");
        let tagged = tag_entities(
            "t",
            &tokens,
            &c,
            "leo",
            None,
            &KeywordMatcher::new("win", true),
        )
        .unwrap();
        assert!(matches!(
            extract_feature_strings(&tagged, None),
            Err(Error::NoTarget(_))
        ));
    }

    #[test]
    fn opponent_tokens_are_placeholder_substituted() {
        let feats = extract("Bryan Cranston loses DiCaprio wins");
        for f in &feats {
            let lower = f.to_lowercase();
            for surface in ["dicaprio", "leonardo", "bryan", "cranston"] {
                assert!(
                    !lower.contains(surface),
                    "feature `{f}` leaks a surface name"
                );
            }
        }
        assert!(feats.contains(&"ctx:OPPONENT loses".to_string()), "{feats:?}");
    }

    #[test]
    fn punctuation_features() {
        let feats = extract("will DiCaprio win ?");
        assert!(feats.contains(&"punct:?".to_string()));
        assert!(feats.contains(&"punct:ends:?".to_string()));
        let feats = extract("DiCaprio will win !");
        assert!(feats.contains(&"punct:!".to_string()));
        assert!(feats.contains(&"punct:ends:!".to_string()));
    }

    #[test]
    fn opponent_closer_feature() {
        // OPPONENT at distance 1, TARGET at distance 3
        let feats = extract("DiCaprio loses and Cranston will win");
        assert!(
            feats.contains(&"dist:OPPONENT closer to KEYWORD".to_string()),
            "{feats:?}"
        );
        assert!(!feats.iter().any(|f| f == "dist:TARGET closer to KEYWORD"));
    }

    #[test]
    fn keyword_gap_cap_suppresses_long_contexts() {
        let feats = extract("DiCaprio a b c d e f g h i j k will certainly win");
        assert!(!feats.iter().any(|f| f.starts_with("kwctx:")), "{feats:?}");
    }

    #[test]
    fn ablation_set_difference() {
        let all: Set<String> = extract("DiCaprio will win !").into_iter().collect();
        let filter = ablate(["context"]).unwrap();
        let kept: Set<String> = filter
            .apply(all.iter().cloned().collect())
            .into_iter()
            .collect();
        let dropped: Set<String> = all.difference(&kept).cloned().collect();
        assert!(dropped.iter().all(|f| {
            f.starts_with("ctx:") || f.starts_with("kwctx:") || f.starts_with("pair:")
        }));
        assert!(kept.contains("punct:!"));
        assert!(!kept.iter().any(|f| f.starts_with("ctx:") || f.starts_with("kwctx:")));
    }

    #[test]
    fn ablate_rejects_unknown_group() {
        assert!(ablate(["nonsense"]).is_err());
        assert!(ablate(Vec::<String>::new()).unwrap().apply(vec!["ctx:x".into()]).len() == 1);
    }

    #[test]
    fn ablate_all_groups_empties_vector() {
        let filter = ablate(FeatureGroup::ALL.iter().map(|g| g.as_str())).unwrap();
        let feats = extract("DiCaprio will win !");
        assert!(filter.apply(feats).is_empty());
    }

    #[test]
    fn dependency_path_rendering() {
        // "DiCaprio will win": win(2) is root, will(1) under win, DiCaprio(0) under will
        let c = contest();
        let tokens = tokenize("DiCaprio will win");
        let tagged = tag_entities(
            "t",
            &tokens,
            &c,
            "leo",
            None,
            &KeywordMatcher::new("win", true),
        )
        .unwrap();
        let parse = ParseInfo {
            tweet_id: "t".into(),
            heads: vec![1, 2, -1],
            deprels: None,
        };
        parse.validate(3).unwrap();
        let feats = extract_feature_strings(&tagged, Some(&parse)).unwrap();
        assert!(
            feats.contains(&"dep:TARGET <- will <- KEYWORD".to_string()),
            "{feats:?}"
        );
    }

    #[test]
    fn contraction_expansion_in_path_and_negation() {
        // "DiCaprio won't win": won't(1) root, DiCaprio(0) and win(2) under it
        let c = contest();
        let tokens = tokenize("DiCaprio won't win");
        let tagged = tag_entities(
            "t",
            &tokens,
            &c,
            "leo",
            None,
            &KeywordMatcher::new("win", true),
        )
        .unwrap();
        let parse = ParseInfo {
            tweet_id: "t".into(),
            heads: vec![1, -1, 1],
            deprels: None,
        };
        let feats = extract_feature_strings(&tagged, Some(&parse)).unwrap();
        assert!(
            feats.contains(&"dep:TARGET <- will -> not -> KEYWORD".to_string()),
            "{feats:?}"
        );
        assert!(feats.contains(&"neg:keyword negated".to_string()));
    }

    #[test]
    fn pair_context_between_first_two_targets() {
        let mut c = contest();
        c.contenders[0].aliases = vec!["clinton".into(), "ohio".into()];
        let tokens = tokenize("Clinton will win Ohio");
        let tagged = tag_entities(
            "t",
            &tokens,
            &c,
            "leo",
            None,
            &KeywordMatcher::new("win", true),
        )
        .unwrap();
        let feats = extract_feature_strings(&tagged, None).unwrap();
        assert!(
            feats.contains(&"pair:TARGET1 will win TARGET2".to_string()),
            "{feats:?}"
        );
    }

    #[test]
    fn frozen_vocabulary_drops_unseen() {
        let mut vocab = FeatureVocabulary::new();
        vocab.intern("ctx:TARGET will");
        vocab.freeze();
        assert_eq!(vocab.intern("ctx:TARGET loses"), None);
        let sv = vectorize(
            &["ctx:TARGET will".to_string(), "ctx:TARGET loses".to_string()],
            &vocab,
        );
        assert_eq!(sv.len(), 1);
        assert!(sv.max_index().unwrap() < vocab.len() as u32);
    }

    #[test]
    fn parse_validation_catches_mismatch_and_cycles() {
        let p = ParseInfo {
            tweet_id: "t".into(),
            heads: vec![1, 0],
            deprels: None,
        };
        assert!(p.validate(2).is_err(), "cycle not caught");
        let p = ParseInfo {
            tweet_id: "t".into(),
            heads: vec![-1],
            deprels: None,
        };
        assert!(p.validate(2).is_err(), "length mismatch not caught");
        assert!(p.validate(1).is_ok());
    }

    proptest! {
        /// Context windows of width w cover a sub-span of width w+1 windows.
        #[test]
        fn window_prefix_consistency(tail in "[a-c]{1,2}( [a-c]{1,2}){0,6}") {
            let feats = extract(&format!("DiCaprio {tail} win"));
            let rights: Vec<&String> = feats
                .iter()
                .filter(|f| f.starts_with("ctx:TARGET "))
                .collect();
            let mut sorted = rights.clone();
            sorted.sort_by_key(|f| f.len());
            for pair in sorted.windows(2) {
                prop_assert!(
                    pair[1].starts_with(pair[0].as_str()),
                    "`{}` not a prefix of `{}`",
                    pair[0],
                    pair[1]
                );
            }
        }

        /// Same inputs, same output, and no surface-name leakage.
        #[test]
        fn extraction_pure_and_placeholder_total(text in "(DiCaprio|Cranston)( (will|wont|not|[a-b]{1,3}))*( win| wins)?") {
            let c = contest();
            let tokens = tokenize(&text);
            let tagged = tag_entities(
                "t", &tokens, &c, "leo", None, &KeywordMatcher::new("win", true),
            ).unwrap();
            let first = extract_feature_strings(&tagged, None);
            let second = extract_feature_strings(&tagged, None);
            match (first, second) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(&a, &b);
                    for f in &a {
                        prop_assert!(!f.to_lowercase().contains("dicaprio"));
                        prop_assert!(!f.to_lowercase().contains("cranston"));
                    }
                }
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "nondeterministic result: {other:?}"),
            }
        }
    }
}
