use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentence-encoder width used when nothing else is declared.
pub const DEFAULT_EMBEDDING_DIM: usize = 384;

pub const TWEETS_HEADER: [&str; 6] = ["tweet_id", "writer", "post_date", "ticker", "body", "sentiment"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sentiment {
    Negative,
    Positive,
}

impl Sentiment {
    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Sentiment::Negative),
            1 => Some(Sentiment::Positive),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Sentiment::Negative => 0,
            Sentiment::Positive => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub tweet_id: String,
    /// Empty when the author account is missing.
    pub writer: String,
    /// UTC, second resolution.
    pub post_date: NaiveDateTime,
    pub ticker: String,
    pub body: String,
    pub sentiment: Option<Sentiment>,
    pub embedding: Option<Vec<f64>>,
}

impl TweetRecord {
    pub fn day(&self) -> NaiveDate {
        self.post_date.date()
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M:%S%z", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.naive_utc());
        }
    }
    None
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

#[derive(Debug, Deserialize)]
struct RawTweet {
    tweet_id: String,
    writer: String,
    post_date: String,
    ticker: String,
    body: String,
    sentiment: String,
}

pub fn read_tweets_csv(path: &Path) -> Result<Vec<TweetRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tweets(file, &path.display().to_string())
}

pub fn read_tweets<R: std::io::Read>(reader: R, source: &str) -> Result<Vec<TweetRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TWEETS_HEADER {
        return Err(parse_err(1, format!("expected header `{}`", TWEETS_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawTweet>().enumerate() {
        let line = i + 2;
        let raw = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let post_date = parse_timestamp(&raw.post_date)
            .ok_or_else(|| parse_err(line, format!("bad post_date `{}`", raw.post_date)))?;
        let sentiment = match raw.sentiment.trim() {
            "" => None,
            "0" => Some(Sentiment::Negative),
            "1" => Some(Sentiment::Positive),
            other => return Err(parse_err(line, format!("sentiment must be blank, 0 or 1, got `{other}`"))),
        };
        out.push(TweetRecord {
            tweet_id: raw.tweet_id,
            writer: raw.writer.trim().to_string(),
            post_date,
            ticker: raw.ticker.trim().to_uppercase(),
            body: raw.body,
            sentiment,
            embedding: None,
        });
    }
    Ok(out)
}

pub fn write_tweets_csv(path: &Path, tweets: &[TweetRecord]) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(TWEETS_HEADER).map_err(io)?;
    for t in tweets {
        let sentiment = t.sentiment.map(|s| s.label().to_string()).unwrap_or_default();
        w.write_record([
            t.tweet_id.as_str(),
            t.writer.as_str(),
            &format_timestamp(&t.post_date),
            t.ticker.as_str(),
            t.body.as_str(),
            &sentiment,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-tweet vectors keyed by tweet id, all of width `dim`.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

pub fn read_embeddings_csv(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(file, &path.display().to_string())
}

pub fn read_embeddings<R: std::io::Read>(reader: R, source: &str) -> Result<EmbeddingTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.get(0) != Some("tweet_id") || header.len() < 2 {
        return Err(parse_err(1, "expected header `tweet_id,v0,v1,...`".into()));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("v{j}") {
            return Err(parse_err(1, format!("column {} should be `v{j}`, found `{name}`", j + 1)));
        }
    }
    let dim = header.len() - 1;
    let mut vectors = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != dim + 1 {
            return Err(Error::validation(
                "embedding",
                format!("{source}:{line}: expected {dim} components, found {}", rec.len().saturating_sub(1)),
            ));
        }
        let v = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, e.to_string()))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("embedding", format!("{source}:{line}: non-finite component")));
        }
        vectors.insert(rec[0].to_string(), v);
    }
    Ok(EmbeddingTable { dim, vectors })
}

pub fn write_embeddings_csv(path: &Path, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["tweet_id".to_string()];
    header.extend((0..dim).map(|j| format!("v{j}")));
    w.write_record(&header).map_err(io)?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Attaches vectors by tweet id; tweets without a vector keep `None`.
pub fn attach_embeddings(tweets: &mut [TweetRecord], table: &EmbeddingTable) {
    for t in tweets {
        if let Some(v) = table.vectors.get(&t.tweet_id) {
            t.embedding = Some(v.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_formats() {
        let a = parse_timestamp("2019-03-04T10:11:12").unwrap();
        let b = parse_timestamp("2019-03-04 10:11:12").unwrap();
        let c = parse_timestamp("2019-03-04T10:11:12Z").unwrap();
        let d = parse_timestamp("2019-03-04T12:11:12+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn reads_tweets_with_blank_sentiment() {
        let text = "tweet_id,writer,post_date,ticker,body,sentiment\n1,bob,2020-01-02T09:00:00,aapl,\"hi, there\",1\n2,,2020-01-02T10:00:00,TSLA,x,\n";
        let t = read_tweets(text.as_bytes(), "mem").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].ticker, "AAPL");
        assert_eq!(t[0].body, "hi, there");
        assert_eq!(t[0].sentiment, Some(Sentiment::Positive));
        assert_eq!(t[1].writer, "");
        assert_eq!(t[1].sentiment, None);
    }

    #[test]
    fn bad_sentiment_label() {
        let text = "tweet_id,writer,post_date,ticker,body,sentiment\n1,bob,2020-01-02T09:00:00,AAPL,x,2\n";
        assert!(matches!(read_tweets(text.as_bytes(), "mem"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn embeddings_must_be_uniform() {
        let ok = "tweet_id,v0,v1\na,1,2\nb,3,4\n";
        let t = read_embeddings(ok.as_bytes(), "mem").unwrap();
        assert_eq!(t.dim, 2);
        assert_eq!(t.vectors["b"], vec![3.0, 4.0]);
        let ragged = "tweet_id,v0,v1\na,1,2\nb,3\n";
        assert!(matches!(read_embeddings(ragged.as_bytes(), "mem"), Err(Error::Validation { .. })));
    }
}
