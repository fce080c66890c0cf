//! Tokenization and entity tagging relative to a queried contender.
//!
//! Matching is gazetteer driven: alias token sequences from the contest
//! definition are matched longest-first, left to right. Spans of the queried
//! contender become TARGET, spans of any other contender OPPONENT, and
//! optional externally supplied named-entity spans that touch no gazetteer
//! match become ENTITY.

use serde::{Deserialize, Serialize};

use crate::corpus::Contest;
use crate::error::{Error, Result};

/// Tag assigned to a token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityTag {
    Target,
    Opponent,
    Entity,
}

impl EntityTag {
    pub fn placeholder(&self) -> &'static str {
        match self {
            EntityTag::Target => "TARGET",
            EntityTag::Opponent => "OPPONENT",
            EntityTag::Entity => "ENTITY",
        }
    }
}

/// A half-open token range `[start, end)` with its tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub tag: EntityTag,
    /// The matched contender for TARGET/OPPONENT spans; absent for ENTITY.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contender_id: Option<String>,
}

/// A token range from an external NER side file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// Tokenized tweet with entity spans and keyword positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedTweet {
    pub tweet_id: String,
    pub tokens: Vec<String>,
    pub spans: Vec<EntitySpan>,
    pub keyword_positions: Vec<usize>,
}

impl TaggedTweet {
    pub fn target_spans(&self) -> impl Iterator<Item = &EntitySpan> {
        self.spans.iter().filter(|s| s.tag == EntityTag::Target)
    }
}

const SPLIT_PUNCT: &[char] = &['!', '?', '.', ',', '…'];

/// Whitespace tokenization with terminal punctuation (`! ? . , …`) split off
/// into its own tokens. Hashtags and @mentions stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut tail = Vec::new();
        let mut head = word;
        while let Some(last) = head.chars().last() {
            if SPLIT_PUNCT.contains(&last) {
                tail.push(last);
                head = &head[..head.len() - last.len_utf8()];
            } else {
                break;
            }
        }
        if !head.is_empty() {
            tokens.push(head.to_string());
        }
        tokens.extend(tail.into_iter().rev().map(String::from));
    }
    tokens
}

/// Case-insensitive keyword matcher with an optional fold of the common
/// inflections of "win" (queries use "win" but tweets inflect).
#[derive(Debug, Clone)]
pub struct KeywordMatcher {
    keyword: String,
    fold_inflections: bool,
}

impl KeywordMatcher {
    pub fn new(keyword: &str, fold_inflections: bool) -> Self {
        Self {
            keyword: keyword.to_lowercase(),
            fold_inflections,
        }
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn matches(&self, token: &str) -> bool {
        let lower = token.to_lowercase();
        if lower == self.keyword {
            return true;
        }
        if self.fold_inflections {
            let folded = match lower.as_str() {
                "wins" | "winning" | "won" => "win",
                other => other,
            };
            return folded == self.keyword;
        }
        false
    }
}

/// A gazetteer match: token range plus the contender it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasMatch {
    pub start: usize,
    pub end: usize,
    pub contender_id: String,
}

/// Longest-match, left-to-right alias matching over the contest gazetteer.
/// On overlap the longest span wins; ties go to the leftmost start, then to
/// contest contender order. Matches never overlap.
pub fn find_alias_matches(tokens: &[String], contest: &Contest) -> Vec<AliasMatch> {
    let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let gazetteer: Vec<(usize, Vec<Vec<&str>>)> = contest
        .contenders
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            (
                idx,
                c.aliases
                    .iter()
                    .map(|a| a.split_whitespace().collect::<Vec<_>>())
                    .collect(),
            )
        })
        .collect();

    let mut matches = Vec::new();
    let mut i = 0;
    while i < lowered.len() {
        let mut best: Option<(usize, usize)> = None; // (length, contender index)
        for (cidx, aliases) in &gazetteer {
            for alias in aliases {
                let len = alias.len();
                if len == 0 || i + len > lowered.len() {
                    continue;
                }
                if alias
                    .iter()
                    .zip(&lowered[i..i + len])
                    .all(|(a, t)| *a == t.as_str())
                {
                    let better = match best {
                        None => true,
                        Some((blen, bidx)) => len > blen || (len == blen && *cidx < bidx),
                    };
                    if better {
                        best = Some((len, *cidx));
                    }
                }
            }
        }
        if let Some((len, cidx)) = best {
            matches.push(AliasMatch {
                start: i,
                end: i + len,
                contender_id: contest.contenders[cidx].id.clone(),
            });
            i += len;
        } else {
            i += 1;
        }
    }
    matches
}

/// Assign TARGET/OPPONENT/ENTITY spans and keyword positions for one tweet.
///
/// `ner_spans`, when given, come from an external NER side file in this
/// module's token indices; spans that overlap a gazetteer match are already
/// covered and are dropped, as are out-of-bounds or mutually overlapping
/// ones.
pub fn tag_entities(
    tweet_id: &str,
    tokens: &[String],
    contest: &Contest,
    target_id: &str,
    ner_spans: Option<&[TokenSpan]>,
    keyword: &KeywordMatcher,
) -> Result<TaggedTweet> {
    if contest.contender(target_id).is_none() {
        return Err(Error::InvalidArgument(format!(
            "target `{target_id}` is not a contender of contest `{}`",
            contest.id
        )));
    }

    let mut spans: Vec<EntitySpan> = find_alias_matches(tokens, contest)
        .into_iter()
        .map(|m| EntitySpan {
            start: m.start,
            end: m.end,
            tag: if m.contender_id == target_id {
                EntityTag::Target
            } else {
                EntityTag::Opponent
            },
            contender_id: Some(m.contender_id),
        })
        .collect();

    if let Some(ner) = ner_spans {
        for ns in ner {
            if ns.start >= ns.end || ns.end > tokens.len() {
                log::warn!(
                    "tweet {tweet_id}: dropping out-of-bounds NER span {}..{}",
                    ns.start,
                    ns.end
                );
                continue;
            }
            let overlaps = spans.iter().any(|s| ns.start < s.end && s.start < ns.end);
            if !overlaps {
                spans.push(EntitySpan {
                    start: ns.start,
                    end: ns.end,
                    tag: EntityTag::Entity,
                    contender_id: None,
                });
            }
        }
    }
    spans.sort_by_key(|s| (s.start, s.end));

    let keyword_positions = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| keyword.matches(t))
        .map(|(i, _)| i)
        .collect();

    Ok(TaggedTweet {
        tweet_id: tweet_id.to_string(),
        tokens: tokens.to_vec(),
        spans,
        keyword_positions,
    })
}
