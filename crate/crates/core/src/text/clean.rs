//! Tweet text cleaning and corpus filtering.

use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::tweet::TweetRecord;

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static CASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$[A-Za-z][A-Za-z0-9._]*").unwrap());
static NON_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\p{L}\p{N}\s]").unwrap());
static SPACES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Strips links, mentions, cashtags and punctuation, then normalises
/// whitespace and case.
pub fn clean_tweet(body: &str) -> String {
    let s = URL.replace_all(body, " ");
    let s = MENTION.replace_all(&s, " ");
    let s = CASHTAG.replace_all(&s, " ");
    let s = NON_WORD.replace_all(&s, "");
    let s = SPACES.replace_all(&s, " ");
    s.trim().to_lowercase()
}

/// Distinct known tickers mentioned in a raw body, as `$TICKER` or as a bare
/// word, case-insensitively.
pub fn mentioned_tickers(body: &str, known: &HashSet<String>) -> BTreeSet<String> {
    body.split(|c: char| !(c.is_alphanumeric() || c == '.'))
        .map(|tok| tok.trim_matches('.').to_uppercase())
        .filter(|tok| !tok.is_empty() && known.contains(tok))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: usize,
    pub missing_writer: usize,
    pub multi_ticker: usize,
    pub exact_duplicates: usize,
    pub cleaned_duplicates: usize,
    pub kept: usize,
}

/// Drops author-less tweets, multi-ticker tweets, and intra-day duplicates
/// (first on the raw body, then on the cleaned body), keeping the earliest
/// post of each duplicate group. Survivors keep their input order.
pub fn filter_corpus(tweets: &[TweetRecord], known_tickers: &HashSet<String>) -> (Vec<TweetRecord>, FilterStats) {
    let known: HashSet<String> = known_tickers.iter().map(|t| t.to_uppercase()).collect();
    let mut stats = FilterStats {
        input: tweets.len(),
        ..Default::default()
    };

    let mut alive: Vec<usize> = Vec::with_capacity(tweets.len());
    for (i, t) in tweets.iter().enumerate() {
        if t.writer.trim().is_empty() {
            stats.missing_writer += 1;
        } else if mentioned_tickers(&t.body, &known).len() >= 2 {
            stats.multi_ticker += 1;
        } else {
            alive.push(i);
        }
    }

    // Earliest post wins; ties fall back to input order.
    let mut by_time = alive.clone();
    by_time.sort_by_key(|&i| (tweets[i].post_date, i));

    let mut seen_raw = HashSet::new();
    let mut after_raw = Vec::with_capacity(by_time.len());
    for &i in &by_time {
        let t = &tweets[i];
        if seen_raw.insert((t.ticker.clone(), t.day(), t.body.clone())) {
            after_raw.push(i);
        } else {
            stats.exact_duplicates += 1;
        }
    }

    let mut seen_clean = HashSet::new();
    let mut keep = vec![false; tweets.len()];
    for &i in &after_raw {
        let t = &tweets[i];
        if seen_clean.insert((t.ticker.clone(), t.day(), clean_tweet(&t.body))) {
            keep[i] = true;
        } else {
            stats.cleaned_duplicates += 1;
        }
    }

    let kept: Vec<TweetRecord> = tweets
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| t.clone())
        .collect();
    stats.kept = kept.len();
    (kept, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tweet::parse_timestamp;

    fn tweet(id: &str, ts: &str, ticker: &str, body: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            writer: "w".into(),
            post_date: parse_timestamp(ts).unwrap(),
            ticker: ticker.into(),
            body: body.into(),
            sentiment: None,
            embedding: None,
        }
    }

    fn known() -> HashSet<String> {
        ["AAPL", "TSLA", "AMZN"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn clean_examples() {
        assert_eq!(clean_tweet("Check $AAPL https://t.co/x @user!!"), "check");
        assert_eq!(clean_tweet("Big news today"), "big news today");
        assert_eq!(clean_tweet("$TSLA $TSLA up up"), "up up");
        assert_eq!(clean_tweet("see www.example.com/a?b=1 now"), "see now");
        assert_eq!(clean_tweet("!!!"), "");
    }

    #[test]
    fn multi_ticker_dropped() {
        let t = vec![tweet("1", "2020-01-02T10:00:00", "AAPL", "$AAPL and $TSLA")];
        let (kept, stats) = filter_corpus(&t, &known());
        assert!(kept.is_empty());
        assert_eq!(stats.multi_ticker, 1);
    }

    #[test]
    fn bare_word_ticker_counts() {
        let k = known();
        assert_eq!(mentioned_tickers("aapl beats amzn", &k).len(), 2);
        assert_eq!(mentioned_tickers("$AAPL $aapl AAPL", &k).len(), 1);
    }

    #[test]
    fn duplicate_keeps_earlier() {
        let t = vec![
            tweet("late", "2020-01-02T15:00:00", "AAPL", "to the moon"),
            tweet("early", "2020-01-02T09:00:00", "AAPL", "to the moon"),
            tweet("other_day", "2020-01-03T09:00:00", "AAPL", "to the moon"),
        ];
        let (kept, stats) = filter_corpus(&t, &known());
        let ids: Vec<_> = kept.iter().map(|t| t.tweet_id.as_str()).collect();
        assert_eq!(ids, ["early", "other_day"]);
        assert_eq!(stats.exact_duplicates, 1);
    }

    #[test]
    fn cleaned_duplicates_second_stage() {
        let t = vec![
            tweet("a", "2020-01-02T09:00:00", "AAPL", "To the moon! https://x.co/1"),
            tweet("b", "2020-01-02T10:00:00", "AAPL", "to the moon https://x.co/2"),
        ];
        let (kept, stats) = filter_corpus(&t, &known());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tweet_id, "a");
        assert_eq!(stats.exact_duplicates, 0);
        assert_eq!(stats.cleaned_duplicates, 1);
    }

    #[test]
    fn missing_writer_and_determinism() {
        let mut t = vec![
            tweet("1", "2020-01-02T09:00:00", "AAPL", "x"),
            tweet("2", "2020-01-02T09:00:00", "TSLA", "y"),
        ];
        t[1].writer = String::new();
        let (k1, s1) = filter_corpus(&t, &known());
        let (k2, s2) = filter_corpus(&t, &known());
        assert_eq!(k1, k2);
        assert_eq!(s1, s2);
        assert_eq!(s1.missing_writer, 1);
        assert_eq!(s1.kept, 1);
        assert_eq!(s1.input, 2);
    }
}
