//! Deterministic SVG rendering of the benchmark's mean-absolute-error bars:
//! one group per parameter, one bar per method, no plotting dependencies.

use std::path::Path;

use crate::bench::GridResult;
use crate::error::{Error, Result};
use crate::report::Method;
use crate::util::atomic_write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PLOT_W: f64 = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
const PLOT_H: f64 = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
const GROUP_FILL: f64 = 0.8;

const PARAM_LABELS: [&str; 3] = ["\u{03bc}", "\u{03b8}", "\u{03c3}"];

fn method_color(method: Method) -> &'static str {
    match method {
        Method::Ols => "#4c78a8",
        Method::Kalman => "#f58518",
        Method::Nn => "#54a24b",
    }
}

fn method_label(method: Method) -> &'static str {
    match method {
        Method::Ols => "OLS",
        Method::Kalman => "Kalman",
        Method::Nn => "NN",
    }
}

/// Builds the chart as an SVG string; byte-identical for identical results.
pub fn error_plot_svg(result: &GridResult) -> Result<String> {
    if result.summaries.is_empty() {
        return Err(Error::EmptyResult {
            what: "plot summaries",
        });
    }
    let maes: Vec<[f64; 3]> = result
        .summaries
        .iter()
        .map(|s| s.mae.unwrap_or([0.0; 3]))
        .collect();
    let max_mae = maes
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);
    let axis_max = if max_mae > 0.0 { max_mae * 1.1 } else { 1.0 };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{MARGIN_LEFT}\" y=\"24\" font-size=\"16\" fill=\"#333333\">\
         Mean absolute estimation error by method</text>\n"
    ));

    let base_y = MARGIN_TOP + PLOT_H;
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let value = axis_max * frac;
        let y = base_y - PLOT_H * frac;
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT + PLOT_W
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"#333333\" \
             text-anchor=\"end\">{value:.3}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{base_y}\" \
         stroke=\"#333333\" stroke-width=\"1\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" \
         stroke=\"#333333\" stroke-width=\"1\"/>\n",
        MARGIN_LEFT + PLOT_W
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"13\" fill=\"#333333\" \
         transform=\"rotate(-90 20 {})\" text-anchor=\"middle\">mean absolute error</text>\n",
        MARGIN_TOP + PLOT_H / 2.0,
        MARGIN_TOP + PLOT_H / 2.0
    ));

    let n_methods = result.summaries.len() as f64;
    let group_w = PLOT_W / 3.0;
    let bar_w = group_w * GROUP_FILL / n_methods;
    for (param, label) in PARAM_LABELS.iter().enumerate() {
        let group_x = MARGIN_LEFT + param as f64 * group_w;
        let inner_x = group_x + group_w * (1.0 - GROUP_FILL) / 2.0;
        for (m, summary) in result.summaries.iter().enumerate() {
            let mae = maes[m][param];
            let h = mae / axis_max * PLOT_H;
            let x = inner_x + m as f64 * bar_w;
            let y = base_y - h;
            svg.push_str(&format!(
                "<rect class=\"bar\" x=\"{x}\" y=\"{y}\" width=\"{bar_w}\" height=\"{h}\" \
                 fill=\"{}\"/>\n",
                method_color(summary.method)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"16\" fill=\"#333333\" \
             text-anchor=\"middle\">{label}</text>\n",
            group_x + group_w / 2.0,
            base_y + 28.0
        ));
    }

    for (m, summary) in result.summaries.iter().enumerate() {
        let x = MARGIN_LEFT + PLOT_W - (result.summaries.len() - m) as f64 * 90.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"14\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            method_color(summary.method)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-size=\"12\" fill=\"#333333\">{}</text>\n",
            x + 16.0,
            method_label(summary.method)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the chart atomically to `path`.
pub fn render_error_plot(result: &GridResult, path: &Path) -> Result<()> {
    let svg = error_plot_svg(result)?;
    atomic_write(path, |w| {
        w.write_all(svg.as_bytes())?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{GridRow, MethodSummary, RowOutcome};
    use approx::assert_relative_eq;

    fn result_with(summaries: Vec<MethodSummary>) -> GridResult {
        let rows = summaries
            .iter()
            .map(|s| GridRow {
                paths: 1,
                n_steps: 10,
                horizon: 1.0,
                replicate: 0,
                method: s.method,
                outcome: RowOutcome::Ok {
                    mu_hat: 0.5,
                    theta_hat: 3.0,
                    sigma_hat: 0.5,
                },
            })
            .collect();
        GridResult { rows, summaries }
    }

    fn summary(method: Method, mae: [f64; 3]) -> MethodSummary {
        MethodSummary {
            method,
            n_ok: 1,
            n_failed: 0,
            mean: Some([0.5, 3.0, 0.5]),
            mae: Some(mae),
        }
    }

    fn bar_heights(svg: &str) -> Vec<f64> {
        svg.split("<rect class=\"bar\"")
            .skip(1)
            .map(|frag| {
                let start = frag.find("height=\"").unwrap() + 8;
                let end = frag[start..].find('"').unwrap() + start;
                frag[start..end].parse().unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_error_bars_have_zero_height() {
        let result = result_with(vec![summary(Method::Ols, [0.0, 0.0, 0.0])]);
        let svg = error_plot_svg(&result).unwrap();
        let heights = bar_heights(&svg);
        assert_eq!(heights.len(), 3);
        assert!(heights.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn bar_heights_are_proportional_to_errors() {
        let result = result_with(vec![
            summary(Method::Ols, [0.1, 0.1, 0.1]),
            summary(Method::Kalman, [0.2, 0.2, 0.2]),
        ]);
        let svg = error_plot_svg(&result).unwrap();
        let heights = bar_heights(&svg);
        // Three groups, two bars each, interleaved (OLS, Kalman) per group.
        assert_eq!(heights.len(), 6);
        for group in heights.chunks(2) {
            assert_relative_eq!(group[1], 2.0 * group[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn identical_results_render_identical_bytes() {
        let result = result_with(vec![summary(Method::Nn, [0.05, 0.3, 0.02])]);
        let a = error_plot_svg(&result).unwrap();
        let b = error_plot_svg(&result).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("</svg>"));
        assert!(a.contains("\u{03b8}"));
    }

    #[test]
    fn empty_summaries_are_rejected() {
        let empty = GridResult {
            rows: vec![],
            summaries: vec![],
        };
        assert!(matches!(
            error_plot_svg(&empty),
            Err(Error::EmptyResult { .. })
        ));
    }

    #[test]
    fn all_failed_method_renders_zero_bars() {
        let s = MethodSummary {
            method: Method::Kalman,
            n_ok: 0,
            n_failed: 3,
            mean: None,
            mae: None,
        };
        let svg = error_plot_svg(&GridResult {
            rows: vec![],
            summaries: vec![s],
        })
        .unwrap();
        assert!(bar_heights(&svg).iter().all(|&h| h == 0.0));
    }
}
