//! Tweet corpus cleaning, daily sentiment/embedding aggregation, and the
//! join with market data into aligned panels.

pub mod clean;
pub mod daily;
pub mod panel;
pub mod tweet;

pub use clean::{clean_tweet, filter_corpus, mentioned_tickers, FilterStats};
pub use daily::{aggregate_daily_text, sentiment_scores, DailyTextFeatures};
pub use panel::{align_panel, read_panel_csv, write_panel_csv, AlignedPanel, PanelRow};
pub use tweet::{
    attach_embeddings, read_embeddings, read_embeddings_csv, read_tweets, read_tweets_csv, write_embeddings_csv,
    write_tweets_csv, EmbeddingTable, Sentiment, TweetRecord, DEFAULT_EMBEDDING_DIM,
};
