//! Offline corpus handling: contest definitions, query generation,
//! text normalization, near-duplicate removal and contender-mention
//! filtering.
//!
//! Ingestion is file based (JSONL for tweets, JSON for contests). Query
//! strings are still generated so a corpus can be re-collected externally,
//! but nothing here touches the network.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagging::{self, find_alias_matches};

/// Event families covered by the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCategory {
    Oscars,
    Primaries,
    BallonDor,
    Eurovision,
    Tennis,
    RugbyWc,
    CricketWc,
    FootballWc,
    UsElection,
    IndianElection,
    Custom,
}

impl EventCategory {
    /// Stable identifier used in CSV reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            EventCategory::Oscars => "oscars",
            EventCategory::Primaries => "primaries",
            EventCategory::BallonDor => "ballon_dor",
            EventCategory::Eurovision => "eurovision",
            EventCategory::Tennis => "tennis",
            EventCategory::RugbyWc => "rugby_wc",
            EventCategory::CricketWc => "cricket_wc",
            EventCategory::FootballWc => "football_wc",
            EventCategory::UsElection => "us_election",
            EventCategory::IndianElection => "indian_election",
            EventCategory::Custom => "custom",
        }
    }
}

impl std::fmt::Display for EventCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscars" => Ok(Self::Oscars),
            "primaries" => Ok(Self::Primaries),
            "ballon_dor" => Ok(Self::BallonDor),
            "eurovision" => Ok(Self::Eurovision),
            "tennis" => Ok(Self::Tennis),
            "rugby_wc" => Ok(Self::RugbyWc),
            "cricket_wc" => Ok(Self::CricketWc),
            "football_wc" => Ok(Self::FootballWc),
            "us_election" => Ok(Self::UsElection),
            "indian_election" => Ok(Self::IndianElection),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown event category `{other}`"
            ))),
        }
    }
}

/// A candidate in a contest, with the surface forms it may appear under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contender {
    pub id: String,
    pub display_name: String,
    /// Lowercased, whitespace-normalized surface forms. When absent in the
    /// contest file this defaults to the full display name plus its last
    /// token (surname-style).
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl Contender {
    /// Fill in default aliases and normalize the alias list.
    fn normalize(&mut self) {
        if self.aliases.is_empty() {
            let full = self.display_name.clone();
            self.aliases.push(full);
            if let Some(last) = self.display_name.split_whitespace().last() {
                self.aliases.push(last.to_string());
            }
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for alias in &self.aliases {
            let norm = alias
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_lowercase();
            if !norm.is_empty() && seen.insert(norm.clone()) {
                out.push(norm);
            }
        }
        self.aliases = out;
    }
}

/// An inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// An event planned to occur on a specific date, with a known contender set
/// and (once it has happened) a single winner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contest {
    pub id: String,
    pub category: EventCategory,
    /// Query prefix, e.g. "Oscars" or a state name.
    pub event_prefix: String,
    pub contenders: Vec<Contender>,
    pub date_window: DateWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<String>,
}

impl Contest {
    /// Check the type invariants, normalizing contender aliases in place.
    pub fn validate(&mut self) -> Result<()> {
        if self.contenders.is_empty() {
            return Err(Error::InvalidContest {
                id: self.id.clone(),
                reason: "contender list is empty".into(),
            });
        }
        let mut ids = HashSet::new();
        for c in &mut self.contenders {
            if c.display_name.trim().is_empty() {
                return Err(Error::InvalidContest {
                    id: self.id.clone(),
                    reason: format!("contender `{}` has an empty display name", c.id),
                });
            }
            if !ids.insert(c.id.clone()) {
                return Err(Error::InvalidContest {
                    id: self.id.clone(),
                    reason: format!("duplicate contender id `{}`", c.id),
                });
            }
            c.normalize();
        }
        if let Some(w) = &self.winner {
            if !ids.contains(w) {
                return Err(Error::InvalidContest {
                    id: self.id.clone(),
                    reason: format!("winner `{w}` is not a contender"),
                });
            }
        }
        if self.date_window.start > self.date_window.end {
            return Err(Error::InvalidContest {
                id: self.id.clone(),
                reason: "date window start is after end".into(),
            });
        }
        Ok(())
    }

    pub fn contender(&self, id: &str) -> Option<&Contender> {
        self.contenders.iter().find(|c| c.id == id)
    }
}

/// A search query string for one contender of one contest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub contest_id: String,
    pub contender_id: String,
    pub since: NaiveDate,
    pub until: NaiveDate,
}

/// A raw message with the contender it was retrieved for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub author: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub contest_id: String,
    pub queried_contender_id: String,
}

/// Dates inside queries are rendered without zero padding
/// ("2016-2-18", not "2016-02-18").
fn query_date(date: NaiveDate) -> String {
    use chrono::Datelike;
    format!("{}-{}-{}", date.year(), date.month(), date.day())
}

/// Build one query per contender:
/// `<event_prefix> <display_name> <keyword> since:<start> until:<end>`.
pub fn generate_queries(contest: &Contest, keyword: &str) -> Result<Vec<Query>> {
    if contest.contenders.is_empty() {
        return Err(Error::InvalidContest {
            id: contest.id.clone(),
            reason: "contender list is empty".into(),
        });
    }
    if keyword.trim().is_empty() {
        return Err(Error::InvalidArgument("keyword is empty".into()));
    }
    let (since, until) = (contest.date_window.start, contest.date_window.end);
    Ok(contest
        .contenders
        .iter()
        .map(|c| Query {
            text: format!(
                "{} {} {} since:{} until:{}",
                contest.event_prefix,
                c.display_name,
                keyword,
                query_date(since),
                query_date(until),
            ),
            contest_id: contest.id.clone(),
            contender_id: c.id.clone(),
            since,
            until,
        })
        .collect())
}

fn is_url_token(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://")
        || lower.starts_with("https://")
        || lower.starts_with("www.")
        || lower.starts_with("t.co/")
        || lower.contains("//t.co/")
}

/// Strip URL tokens, collapse whitespace runs and trim. Casing is preserved;
/// tagging lowercases internally where it matters.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .filter(|tok| !is_url_token(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Token set used for near-duplicate detection: lowercased unigrams split on
/// whitespace and punctuation.
pub fn dedup_tokens(text: &str) -> HashSet<String> {
    text.to_lowercase()
        .split(|ch: char| !ch.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// |A∩B| / |A∪B| over [`dedup_tokens`] sets; 1.0 when both sets are empty.
pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    let sa = dedup_tokens(a);
    let sb = dedup_tokens(b);
    jaccard_of_sets(&sa, &sb)
}

fn jaccard_of_sets(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Greedy single-pass dedup: a tweet is dropped iff its similarity to some
/// earlier kept tweet is >= `threshold`. Keeps the earliest duplicate, so
/// prediction timing is preserved; output order follows input order.
pub fn deduplicate(tweets: Vec<Tweet>, threshold: f64) -> Vec<Tweet> {
    debug_assert!(threshold > 0.0 && threshold <= 1.0);
    let mut kept: Vec<Tweet> = Vec::new();
    let mut kept_sets: Vec<HashSet<String>> = Vec::new();
    for tweet in tweets {
        let set = dedup_tokens(&tweet.text);
        let dup = kept_sets
            .iter()
            .any(|k| jaccard_of_sets(k, &set) >= threshold);
        if !dup {
            kept.push(tweet);
            kept_sets.push(set);
        }
    }
    kept
}

/// Keep tweets whose text contains at least one alias of at least one
/// contender (case-insensitive token-sequence match).
pub fn filter_mentions(tweets: Vec<Tweet>, contest: &Contest) -> Vec<Tweet> {
    tweets
        .into_iter()
        .filter(|t| mentions_any_contender(&t.text, contest))
        .collect()
}

/// True when any contender alias occurs in the text as a token sequence.
pub fn mentions_any_contender(text: &str, contest: &Contest) -> bool {
    let tokens = tagging::tokenize(text);
    !find_alias_matches(&tokens, contest).is_empty()
}

/// Read tweets from a JSONL file; unknown fields are ignored.
pub fn load_tweets(path: &Path) -> Result<Vec<Tweet>> {
    let file = File::open(path).map_err(|_| Error::MissingInput(path.to_path_buf()))?;
    let reader = BufReader::new(file);
    let mut tweets = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tweet: Tweet = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        tweets.push(tweet);
    }
    Ok(tweets)
}

/// Load contest definitions from a JSON file (single object or array) or a
/// directory of `*.json` files, one contest per document. Directory entries
/// are read in sorted filename order so downstream reports are stable.
pub fn load_contests(path: &Path) -> Result<Vec<Contest>> {
    let mut contests = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        entries.sort();
        for entry in entries {
            contests.push(parse_contest_file(&entry)?);
        }
    } else if path.is_file() {
        let raw = std::fs::read_to_string(path)?;
        let trimmed = raw.trim_start();
        if trimmed.starts_with('[') {
            let list: Vec<Contest> = serde_json::from_str(&raw).map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                line: 0,
                reason: e.to_string(),
            })?;
            contests.extend(list);
        } else {
            contests.push(parse_contest_str(&raw, path)?);
        }
    } else {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    for contest in &mut contests {
        contest.validate()?;
    }
    Ok(contests)
}

fn parse_contest_file(path: &Path) -> Result<Contest> {
    let raw = std::fs::read_to_string(path)?;
    parse_contest_str(&raw, path)
}

fn parse_contest_str(raw: &str, path: &Path) -> Result<Contest> {
    serde_json::from_str(raw).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn contest_2016_best_actor() -> Contest {
        let mut contest = Contest {
            id: "oscars-2016-best-actor".into(),
            category: EventCategory::Oscars,
            event_prefix: "Oscars".into(),
            contenders: vec![
                Contender {
                    id: "dicaprio".into(),
                    display_name: "Leonardo DiCaprio".into(),
                    aliases: vec![],
                },
                Contender {
                    id: "cranston".into(),
                    display_name: "Bryan Cranston".into(),
                    aliases: vec![],
                },
            ],
            date_window: DateWindow {
                start: NaiveDate::from_ymd_opt(2016, 2, 22).unwrap(),
                end: NaiveDate::from_ymd_opt(2016, 2, 28).unwrap(),
            },
            winner: Some("dicaprio".into()),
        };
        contest.validate().unwrap();
        contest
    }

    fn tweet(id: &str, text: &str) -> Tweet {
        Tweet {
            id: id.into(),
            author: "someone".into(),
            created_at: "2016-02-23T10:00:00Z".parse().unwrap(),
            text: text.into(),
            contest_id: "oscars-2016-best-actor".into(),
            queried_contender_id: "dicaprio".into(),
        }
    }

    #[test]
    fn query_matches_published_format() {
        let contest = contest_2016_best_actor();
        let queries = generate_queries(&contest, "win").unwrap();
        assert_eq!(queries.len(), 2);
        assert_eq!(
            queries[0].text,
            "Oscars Leonardo DiCaprio win since:2016-2-22 until:2016-2-28"
        );
    }

    #[test]
    fn query_dates_unpadded() {
        let mut contest = contest_2016_best_actor();
        contest.event_prefix = "Minnesota".into();
        contest.contenders = vec![Contender {
            id: "rubio".into(),
            display_name: "Rubio".into(),
            aliases: vec![],
        }];
        contest.winner = None;
        contest.date_window = DateWindow {
            start: NaiveDate::from_ymd_opt(2016, 2, 18).unwrap(),
            end: NaiveDate::from_ymd_opt(2016, 3, 1).unwrap(),
        };
        contest.validate().unwrap();
        let queries = generate_queries(&contest, "win").unwrap();
        assert_eq!(
            queries[0].text,
            "Minnesota Rubio win since:2016-2-18 until:2016-3-1"
        );
    }

    #[test]
    fn single_contender_yields_single_query() {
        let mut contest = contest_2016_best_actor();
        contest.contenders.truncate(1);
        contest.winner = None;
        let queries = generate_queries(&contest, "win").unwrap();
        assert_eq!(queries.len(), 1);
    }

    #[test]
    fn empty_contender_list_rejected() {
        let mut contest = contest_2016_best_actor();
        contest.contenders.clear();
        contest.winner = None;
        assert!(matches!(
            generate_queries(&contest, "win"),
            Err(Error::InvalidContest { .. })
        ));
    }

    #[test]
    fn default_aliases_are_name_and_surname() {
        let contest = contest_2016_best_actor();
        assert_eq!(
            contest.contenders[0].aliases,
            vec!["leonardo dicaprio".to_string(), "dicaprio".to_string()]
        );
    }

    #[test]
    fn normalize_strips_urls_and_whitespace() {
        assert_eq!(
            normalize_text("Leo will win http://t.co/abc"),
            "Leo will win"
        );
        assert_eq!(normalize_text("a   b"), "a b");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("check www.example.com out"), "check out");
        assert_eq!(normalize_text("https://t.co/xyz"), "");
    }

    #[test]
    fn jaccard_analytic_cases() {
        assert_eq!(jaccard_similarity("a b c", "a b c"), 1.0);
        assert_eq!(jaccard_similarity("a b c", "a b d"), 0.5);
        assert_eq!(jaccard_similarity("a b", "c d"), 0.0);
        assert_eq!(jaccard_similarity("", ""), 1.0);
    }

    #[test]
    fn dedup_drops_identical_keeps_first() {
        let tweets = vec![tweet("1", "Leo will win"), tweet("2", "Leo will win")];
        let kept = deduplicate(tweets, 0.7);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "1");
    }

    #[test]
    fn dedup_keeps_distinct() {
        let tweets = vec![tweet("1", "alpha beta"), tweet("2", "gamma delta")];
        assert_eq!(deduplicate(tweets, 0.7).len(), 2);
    }

    #[test]
    fn dedup_triple_against_pairwise_oracle() {
        // #2 ~ #1 above threshold, #3 ~ #1 below: expect {#1, #3}.
        let t1 = "leo will win the oscar tonight for sure everyone";
        let t2 = "leo will win the oscar tonight for sure folks";
        let t3 = "leo will win maybe";
        let s12 = jaccard_similarity(t1, t2);
        let s13 = jaccard_similarity(t1, t3);
        assert!(s12 >= 0.7, "fixture drift: s12={s12}");
        assert!(s13 < 0.7, "fixture drift: s13={s13}");
        let kept = deduplicate(vec![tweet("1", t1), tweet("2", t2), tweet("3", t3)], 0.7);
        let ids: Vec<_> = kept.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["1", "3"]);
    }

    #[test]
    fn filter_keeps_contender_and_opponent_mentions() {
        let contest = contest_2016_best_actor();
        let tweets = vec![
            tweet("1", "DiCaprio takes it"),
            tweet("2", "great ceremony tonight"),
            tweet("3", "Bryan Cranston was robbed"),
        ];
        let kept = filter_mentions(tweets, &contest);
        let ids: Vec<_> = kept.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, vec!["1", "3"]);
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_bounded(a in "[a-d ]{0,24}", b in "[a-d ]{0,24}") {
            let ab = jaccard_similarity(&a, &b);
            let ba = jaccard_similarity(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            let equal_sets = dedup_tokens(&a) == dedup_tokens(&b);
            prop_assert_eq!(ab == 1.0, equal_sets);
        }

        #[test]
        fn dedup_idempotent_and_order_preserving(
            texts in prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,5}", 0..12),
            threshold in 0.1f64..=1.0,
        ) {
            let tweets: Vec<Tweet> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| tweet(&format!("{i}"), t))
                .collect();
            let once = deduplicate(tweets.clone(), threshold);
            prop_assert!(once.len() <= tweets.len());
            let ids_once: Vec<_> = once.iter().map(|t| t.id.clone()).collect();
            let mut sorted = ids_once.clone();
            sorted.sort_by_key(|id| id.parse::<usize>().unwrap());
            prop_assert_eq!(&ids_once, &sorted, "order not preserved");
            let twice = deduplicate(once, threshold);
            let ids_twice: Vec<_> = twice.iter().map(|t| t.id.clone()).collect();
            prop_assert_eq!(ids_once, ids_twice, "not idempotent");
        }

        #[test]
        fn filter_mentions_is_a_subset_projection(
            texts in prop::collection::vec("(dicaprio|cranston|nothing|blah) [a-c]{1,4}", 0..10)
        ) {
            let contest = contest_2016_best_actor();
            let tweets: Vec<Tweet> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| tweet(&format!("{i}"), t))
                .collect();
            let once = filter_mentions(tweets.clone(), &contest);
            prop_assert!(once.len() <= tweets.len());
            let twice = filter_mentions(once.clone(), &contest);
            prop_assert_eq!(once.len(), twice.len());
        }
    }
}
