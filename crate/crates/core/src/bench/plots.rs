use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::series::ReturnSeries;
use crate::synth::write_file;
use crate::training::TrainingHistory;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let lo = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        let hi = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        let (mut x_min, mut x_max) = (lo(&mut xs.clone()), hi(&mut xs.clone()));
        let (mut y_min, mut y_max) = (lo(&mut ys.clone()), hi(&mut ys.clone()));
        if x_max <= x_min {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if y_max <= y_min {
            y_min -= 0.5;
            y_max += 0.5;
        }
        Self { x_min, x_max, y_min, y_max }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&self, points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
        let mut pts = String::new();
        for (i, (x, y)) in points.enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", self.px(x), self.py(y));
        }
        format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{pts}\"/>\n")
    }
}

fn open(title: &str, frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"25\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        WIDTH / 2.0
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{text}</text>"
        );
    };
    label(&mut s, x0 - 4.0, y0, "end", &format!("{:.4}", frame.y_min));
    label(&mut s, x0 - 4.0, y1 + 4.0, "end", &format!("{:.4}", frame.y_max));
    label(&mut s, WIDTH / 2.0, HEIGHT - 12.0, "middle", x_label);
    label(&mut s, 12.0, HEIGHT / 2.0, "start", y_label);
    s
}

pub fn returns_csv(returns: &ReturnSeries) -> String {
    let mut s = String::from("date,return\n");
    for (d, r) in returns.dates().iter().zip(returns.values()) {
        let _ = writeln!(s, "{d},{r}");
    }
    s
}

pub fn returns_svg(returns: &ReturnSeries) -> Result<String> {
    if returns.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let v = returns.values();
    let frame = Frame::new((0..v.len()).map(|i| i as f64), v.iter().copied());
    let mut s = open("Daily return", &frame, "trading day", "return");
    s.push_str(&frame.polyline(v.iter().enumerate().map(|(i, r)| (i as f64, *r)), "steelblue"));
    s.push_str("</svg>\n");
    Ok(s)
}

fn check_history(history: &TrainingHistory) -> Result<()> {
    if history.train_loss.is_empty() || history.train_loss.len() != history.val_loss.len() {
        return Err(Error::invalid("loss history is empty or ragged"));
    }
    Ok(())
}

pub fn loss_csv(history: &TrainingHistory) -> Result<String> {
    check_history(history)?;
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        let _ = writeln!(s, "{},{t},{v}", i + 1);
    }
    Ok(s)
}

/// Train and validation curves: exactly two polylines.
pub fn loss_svg(model: &str, history: &TrainingHistory) -> Result<String> {
    check_history(history)?;
    let n = history.train_loss.len();
    let frame = Frame::new(
        (1..=n).map(|i| i as f64),
        history.train_loss.iter().chain(&history.val_loss).copied(),
    );
    let mut s = open(&format!("{model} loss"), &frame, "epoch", "MSE");
    let curve = |l: &[f64]| l.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect::<Vec<_>>();
    s.push_str(&frame.polyline(curve(&history.train_loss).into_iter(), "steelblue"));
    s.push_str(&frame.polyline(curve(&history.val_loss).into_iter(), "darkorange"));
    let legend_x = WIDTH - MARGIN - 120.0;
    let _ = writeln!(
        s,
        "<text x=\"{legend_x}\" y=\"{}\" fill=\"steelblue\" font-family=\"sans-serif\" font-size=\"12\">train</text>",
        MARGIN + 10.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{legend_x}\" y=\"{}\" fill=\"darkorange\" font-family=\"sans-serif\" font-size=\"12\">validation</text>",
        MARGIN + 26.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `returns.csv`/`.svg` and a `loss_<model>.csv`/`.svg` pair per
/// history.
pub fn emit_plots(
    returns: &ReturnSeries,
    histories: &[(String, TrainingHistory)],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let svg = returns_svg(returns)?;
    let mut rendered = Vec::new();
    for (name, h) in histories {
        rendered.push((name, loss_csv(h)?, loss_svg(name, h)?));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    put("returns.csv".into(), &returns_csv(returns))?;
    put("returns.svg".into(), &svg)?;
    for (name, csv, svg) in rendered {
        put(format!("loss_{name}.csv"), &csv)?;
        put(format!("loss_{name}.svg"), &svg)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(n: usize) -> TrainingHistory {
        TrainingHistory {
            epochs: n,
            train_loss: (0..n).map(|i| 1.0 / (i + 1) as f64).collect(),
            val_loss: (0..n).map(|i| 1.5 / (i + 1) as f64).collect(),
            diverged_at: None,
        }
    }

    #[test]
    fn loss_csv_has_one_row_per_epoch() {
        let csv = loss_csv(&history(100)).unwrap();
        assert_eq!(csv.lines().count(), 101);
        assert!(csv.starts_with("epoch,train_loss,val_loss\n1,1,1.5\n"));
    }

    #[test]
    fn loss_svg_has_two_polylines() {
        let svg = loss_svg("lstm", &history(100)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(loss_csv(&history(0)).is_err());
        assert!(loss_svg("x", &history(0)).is_err());
        let dir = tempfile::tempdir().unwrap();
        let r = ReturnSeries::new(
            vec![chrono::NaiveDate::from_ymd_opt(2020, 1, 2).unwrap()],
            vec![0.01],
            Default::default(),
        )
        .unwrap();
        assert!(emit_plots(&r, &[("lstm".into(), history(0))], dir.path()).is_err());
        let files = emit_plots(&r, &[("lstm".into(), history(3))], dir.path()).unwrap();
        assert_eq!(files.len(), 4);
    }
}
