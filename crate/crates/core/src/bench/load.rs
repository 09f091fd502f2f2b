use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::PriceSeries;
use crate::text::NewsItem;

const DATE_FORMATS: [&str; 4] = ["%Y-%m-%d", "%b %d, %Y", "%B %d, %Y", "%m/%d/%Y"];
const PRICE_COLUMNS: [&str; 4] = ["close", "price", "adj close", "close/last"];

fn parse_error(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message,
    }
}

/// Accepts ISO (`2020-12-31`) and quote-site (`Dec 31, 2020`) dates.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim().trim_matches('"').trim();
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
}

fn parse_number(s: &str) -> Option<f64> {
    let cleaned: String = s
        .trim()
        .chars()
        .filter(|c| !matches!(c, '"' | ',' | '$' | ' '))
        .collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a daily price CSV. Rows may come in any order; the result is
/// sorted oldest first. Row numbers in errors count the header as row 1.
pub fn load_prices(path: &Path) -> Result<PriceSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let text = text.trim_start_matches('\u{feff}');
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, format!("row 1: {e}")))?
        .clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h.trim().to_ascii_lowercase().as_str()))
    };
    let date_col = find(&["date"]).ok_or_else(|| parse_error(path, "missing date column".into()))?;
    let price_col = find(&PRICE_COLUMNS)
        .ok_or_else(|| parse_error(path, "missing close/price column".into()))?;

    let mut rows: Vec<(NaiveDate, f64, usize)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_error(path, format!("row {row}: {e}")))?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let date_cell = record.get(date_col).unwrap_or("");
        let date = parse_date(date_cell)
            .ok_or_else(|| parse_error(path, format!("row {row}: unparseable date {date_cell:?}")))?;
        let price_cell = record.get(price_col).unwrap_or("");
        let close = parse_number(price_cell).ok_or_else(|| {
            if price_cell.trim().is_empty() {
                parse_error(path, format!("row {row}: missing close value"))
            } else {
                parse_error(path, format!("row {row}: unparseable close {price_cell:?}"))
            }
        })?;
        if close <= 0.0 {
            return Err(parse_error(path, format!("row {row}: close must be positive")));
        }
        rows.push((date, close, row));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        let (a, b) = (w[0].2.min(w[1].2), w[0].2.max(w[1].2));
        return Err(parse_error(
            path,
            format!("rows {a} and {b}: duplicate date {}", w[0].0),
        ));
    }
    if rows.is_empty() {
        return Err(parse_error(path, "no data rows".into()));
    }
    PriceSeries::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
    )
}

/// Reads JSON Lines news records; blank lines are skipped.
pub fn load_news(path: &Path) -> Result<Vec<NewsItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let item: NewsItem = serde_json::from_str(line)
            .map_err(|e| parse_error(path, format!("line {line_no}: {e}")))?;
        item.validate()
            .map_err(|e| parse_error(path, format!("line {line_no}: {e}")))?;
        out.push(item);
    }
    Ok(out)
}

/// One sentence per non-blank line.
pub fn load_corpus(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}
