//! Market data: OHLCV ingestion, the business-day calendar and price-derived
//! indicators.

pub mod calendar;
pub mod indicators;
pub mod ohlcv;

pub use calendar::{day_of_week_index, is_weekend, BusinessCalendar};
pub use indicators::{
    atr, daily_returns_sigma, ewma, min_max_scale, rolling_mean, smooth, ReturnStats, Smoothed, SmoothingMethod,
    DEFAULT_ATR_PERIOD, DEFAULT_SMOOTHING_SPAN,
};
pub use ohlcv::{parse_ohlcv_csv, parse_ohlcv_reader, write_ohlcv_csv, OhlcvBar, PriceSeries, OHLCV_HEADER};
