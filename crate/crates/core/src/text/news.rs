use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    pub timestamp: DateTime<FixedOffset>,
    pub source: String,
    pub text: String,
}

impl NewsItem {
    pub fn new(
        timestamp: DateTime<FixedOffset>,
        source: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let item = Self {
            timestamp,
            source: source.into(),
            text: text.into(),
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::invalid("news text is empty"));
        }
        Ok(())
    }

    /// Calendar date in the timestamp's own offset.
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }
}

/// The news bag of one trading day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub items: Vec<NewsItem>,
}

impl DayRecord {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One record per calendar day; each item joins the first trading day on or
/// after its publication date.
pub fn align_news_to_days(news: &[NewsItem], calendar: &[NaiveDate]) -> Result<Vec<DayRecord>> {
    if calendar.is_empty() {
        return Err(Error::invalid("trading calendar is empty"));
    }
    if calendar.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("trading calendar must be strictly ascending"));
    }
    let mut records: Vec<DayRecord> = calendar
        .iter()
        .map(|d| DayRecord {
            date: *d,
            items: Vec::new(),
        })
        .collect();
    for item in news {
        let date = item.date();
        let idx = calendar.partition_point(|d| *d < date);
        let Some(rec) = records.get_mut(idx) else {
            return Err(Error::invalid(format!(
                "news item dated {date} falls after the last trading day {}",
                calendar[calendar.len() - 1]
            )));
        };
        rec.items.push(item.clone());
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyPrediction {
    pub value: f64,
    /// True when the day had no news and the previous value was reused.
    pub carried: bool,
}

/// Mean of per-item predictions for each day; empty days repeat the
/// previous prediction, starting from `initial` if given.
pub fn predict_daily_with<F>(records: &[DayRecord], initial: Option<f64>, mut predict: F) -> Result<Vec<DailyPrediction>>
where
    F: FnMut(&NewsItem) -> Result<f64>,
{
    let mut prev = initial;
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let p = if rec.is_empty() {
            let value = prev.ok_or_else(|| {
                Error::invalid(format!("no news on {} and no previous prediction to carry", rec.date))
            })?;
            DailyPrediction { value, carried: true }
        } else {
            let mut sum = 0.0;
            for item in &rec.items {
                sum += predict(item)?;
            }
            DailyPrediction {
                value: sum / rec.items.len() as f64,
                carried: false,
            }
        };
        prev = Some(p.value);
        out.push(p);
    }
    Ok(out)
}

pub fn predict_daily(
    model: &super::TextRegressor,
    records: &[DayRecord],
    initial: Option<f64>,
) -> Result<Vec<DailyPrediction>> {
    predict_daily_with(records, initial, |item| model.predict_text(&item.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(ts: &str, text: &str) -> NewsItem {
        NewsItem::new(DateTime::parse_from_rfc3339(ts).unwrap(), "CNBC", text).unwrap()
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn weekend_item_moves_to_monday() {
        // 2020-03-14 is a Saturday
        let cal = [d(2020, 3, 13), d(2020, 3, 16), d(2020, 3, 17)];
        let recs = align_news_to_days(&[item("2020-03-14T10:00:00Z", "weekend")], &cal).unwrap();
        assert!(recs[0].is_empty());
        assert_eq!(recs[1].items.len(), 1);
        assert!(recs[2].is_empty());
    }

    #[test]
    fn same_day_items_share_a_bag() {
        let cal = [d(2020, 3, 16)];
        let news = [item("2020-03-16T09:00:00Z", "a"), item("2020-03-16T15:00:00Z", "b")];
        let recs = align_news_to_days(&news, &cal).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].items.len(), 2);
    }

    #[test]
    fn alignment_errors() {
        let cal = [d(2020, 3, 16)];
        assert!(align_news_to_days(&[item("2020-03-17T09:00:00Z", "late")], &cal).is_err());
        assert!(align_news_to_days(&[], &[]).is_err());
        assert!(NewsItem::new(DateTime::parse_from_rfc3339("2020-03-17T09:00:00Z").unwrap(), "x", "  ").is_err());
    }

    #[test]
    fn local_date_is_used() {
        let cal = [d(2020, 3, 16), d(2020, 3, 17)];
        let recs = align_news_to_days(&[item("2020-03-16T23:30:00-05:00", "late evening")], &cal).unwrap();
        assert_eq!(recs[0].items.len(), 1);
    }

    #[test]
    fn daily_mean_and_carry_forward() {
        let cal = [d(2020, 3, 16), d(2020, 3, 17), d(2020, 3, 18)];
        let news = [
            item("2020-03-16T09:00:00Z", "one"),
            item("2020-03-17T09:00:00Z", "two"),
            item("2020-03-17T10:00:00Z", "three"),
        ];
        let recs = align_news_to_days(&news, &cal).unwrap();
        let out = predict_daily_with(&recs, None, |i| {
            Ok(match i.text.as_str() {
                "one" => 0.01,
                "two" => 0.01,
                _ => 0.03,
            })
        })
        .unwrap();
        assert_eq!(out[0], DailyPrediction { value: 0.01, carried: false });
        assert!((out[1].value - 0.02).abs() < 1e-15);
        assert_eq!(out[2], DailyPrediction { value: out[1].value, carried: true });
    }

    #[test]
    fn empty_first_day_needs_a_seed() {
        let recs = [DayRecord { date: d(2020, 1, 2), items: vec![] }];
        assert!(predict_daily_with(&recs, None, |_| Ok(0.0)).is_err());
        let out = predict_daily_with(&recs, Some(0.5), |_| Ok(0.0)).unwrap();
        assert_eq!(out[0], DailyPrediction { value: 0.5, carried: true });
    }

    #[test]
    fn json_round_trip() {
        let line = r#"{"timestamp":"2020-03-16T14:00:00Z","source":"CNBC","text":"Markets plunge"}"#;
        let parsed: NewsItem = serde_json::from_str(line).unwrap();
        assert_eq!(parsed.text, "Markets plunge");
        let back: NewsItem = serde_json::from_str(&serde_json::to_string(&parsed).unwrap()).unwrap();
        assert_eq!(back, parsed);
    }
}
