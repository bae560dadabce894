//! Minimal SVG line charts: per-interval mean rewards by mode, and tank
//! level traces over a single episode.

use std::path::{Path, PathBuf};

use crate::config::Mode;
use crate::report::{parse_intervals_csv, parse_steps_csv, read_file};
use crate::run::StepRecord;
use crate::HarnessError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One polyline of a chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders labelled series into a self-contained SVG document.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x_min, x_max) = bounds(points.iter().map(|p| p.0));
    let (y_min, y_max) = bounds(points.iter().map(|p| p.1));
    let x_span = (x_max - x_min).max(1e-12);
    let y_span = (y_max - y_min).max(1e-12);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let map_x = |x: f64| MARGIN_LEFT + (x - x_min) / x_span * plot_w;
    let map_y = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / y_span) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{MARGIN_TOP}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));
    for (value, position) in [(x_min, x0), (x_max, WIDTH - MARGIN_RIGHT)] {
        svg.push_str(&format!(
            "<text x=\"{position}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{value:.3}</text>\n",
            y0 + 16.0
        ));
    }
    for (value, position) in [(y_min, y0), (y_max, MARGIN_TOP)] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{position}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{value:.3}</text>\n",
            x0 - 6.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", map_x(*x), map_y(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_RIGHT - 150.0,
            MARGIN_TOP + 14.0 * (idx as f64 + 1.0),
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min > max {
        (0.0, 1.0)
    } else {
        (min, max)
    }
}

/// The last complete-or-truncated episode in a step log.
fn final_episode(steps: &[StepRecord]) -> &[StepRecord] {
    if steps.is_empty() {
        return steps;
    }
    let end = steps.len();
    // Skip a terminal marker on the very last record, then scan back to the
    // previous episode boundary.
    let last = end - 1;
    let mut start = last;
    while start > 0 && !steps[start - 1].done && steps[start - 1].episode == steps[last].episode {
        start -= 1;
    }
    &steps[start..end]
}

/// Renders `rewards.svg` (interval means per mode) and one
/// `tanks_<mode>.svg` per step log found in `in_dir`. Returns the files
/// written.
pub fn plot_directory(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.display().to_string(), source })?;
    let mut written = Vec::new();

    let mut reward_series = Vec::new();
    for mode in Mode::ALL {
        let path = in_dir.join(crate::report::intervals_file_name(mode));
        if !path.exists() {
            continue;
        }
        let intervals = parse_intervals_csv(&read_file(&path)?, &path.display().to_string())?;
        reward_series.push(Series {
            label: mode.to_string(),
            points: intervals.iter().map(|m| (f64::from(m.interval), m.mean_reward)).collect(),
        });
    }
    if !reward_series.is_empty() {
        let svg = line_chart_svg("Mean reward per interval", "interval", "mean reward", &reward_series);
        let path = out_dir.join("rewards.svg");
        std::fs::write(&path, svg)
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        written.push(path);
    }

    for mode in Mode::ALL {
        let path = in_dir.join(crate::report::steps_file_name(mode));
        if !path.exists() {
            continue;
        }
        let steps = parse_steps_csv(&read_file(&path)?, &path.display().to_string())?;
        let episode = final_episode(&steps);
        let series: Vec<Series> = (0..6)
            .map(|tank| Series {
                label: format!("tank {}", tank + 1),
                points: episode
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i as f64, s.state.levels[tank]))
                    .collect(),
            })
            .collect();
        let svg = line_chart_svg(
            &format!("Tank levels, final episode ({mode})"),
            "step",
            "level",
            &series,
        );
        let out_path = out_dir.join(format!("tanks_{mode}.svg"));
        std::fs::write(&out_path, svg)
            .map_err(|source| HarnessError::Io { path: out_path.display().to_string(), source })?;
        written.push(out_path);
    }

    Ok(written)
}
