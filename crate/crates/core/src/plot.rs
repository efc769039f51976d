//! Static SVG line charts for sweep aggregates.
//!
//! One chart per detector per metric family: the bias knob on the x axis, one
//! line per group (or a single line for overall metrics), with a translucent
//! band of one standard deviation around each mean. Charts are pure functions
//! of the aggregate table; undefined cells leave gaps in the line.

/// One plotted line: label, color, and `(x, mean, std)` points where `None`
/// marks an undefined cell.
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, Option<(f64, f64)>)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders one line chart as a standalone SVG document.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 440.0;
    const H: f64 = 320.0;
    const ML: f64 = 58.0; // left margin
    const MR: f64 = 14.0;
    const MT: f64 = 34.0;
    const MB: f64 = 46.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, v) in &s.points {
            xs.push(x);
            if let Some((mean, std)) = v {
                ys.push(mean - std);
                ys.push(mean + std);
            }
        }
    }
    let (x_min, x_max) = bounds(&xs, 0.0);
    let (y_min, y_max) = bounds(&ys, 0.05);
    let sx = move |x: f64| ML + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MT + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));

    // Axes with five ticks each.
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MT + plot_h,
        W - MR,
        MT + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        MT + plot_h
    ));
    for t in 0..=4 {
        let fx = x_min + (x_max - x_min) * t as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * t as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"10\">{label}</text>\n",
            x = fmt(sx(fx)),
            y0 = fmt(MT + plot_h),
            y1 = fmt(MT + plot_h + 4.0),
            ty = fmt(MT + plot_h + 16.0),
            label = tick_label(fx)
        ));
        svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{tyy}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"10\">{label}</text>\n",
            x0 = fmt(ML - 4.0),
            x1 = fmt(ML),
            y = fmt(sy(fy)),
            tx = fmt(ML - 6.0),
            tyy = fmt(sy(fy) + 3.0),
            label = tick_label(fy)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"11\">{}</text>\n",
        ML + plot_w / 2.0,
        H - 10.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"11\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        MT + plot_h / 2.0,
        MT + plot_h / 2.0,
        escape(y_label)
    ));

    for s in series {
        // Split on undefined cells so gaps stay gaps.
        let mut runs: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new()];
        for &(x, v) in &s.points {
            match v {
                Some((mean, std)) => runs.last_mut().expect("non-empty").push((x, mean, std)),
                None => {
                    if !runs.last().expect("non-empty").is_empty() {
                        runs.push(Vec::new());
                    }
                }
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            if run.len() > 1 {
                let mut band = String::new();
                for (x, mean, std) in run.iter() {
                    band.push_str(&format!("{},{} ", fmt(sx(*x)), fmt(sy(mean + std))));
                }
                for (x, mean, std) in run.iter().rev() {
                    band.push_str(&format!("{},{} ", fmt(sx(*x)), fmt(sy(mean - std))));
                }
                svg.push_str(&format!(
                    "<polygon points=\"{}\" fill=\"{}\" opacity=\"0.15\"/>\n",
                    band.trim_end(),
                    s.color
                ));
                let line: Vec<String> =
                    run.iter().map(|(x, m, _)| format!("{},{}", fmt(sx(*x)), fmt(sy(*m)))).collect();
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
                    line.join(" "),
                    s.color
                ));
            }
            for (x, mean, _) in run.iter() {
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2.6\" fill=\"{}\"/>\n",
                    fmt(sx(*x)),
                    fmt(sy(*mean)),
                    s.color
                ));
            }
        }
    }

    // Legend in the top-right corner.
    for (i, s) in series.iter().enumerate() {
        let ly = MT + 6.0 + i as f64 * 14.0;
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            fmt(W - MR - 86.0),
            fmt(ly),
            s.color,
            fmt(W - MR - 72.0),
            fmt(ly + 9.0),
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: &[f64], pad_frac: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        // Degenerate single-value chart still needs a finite scale.
        return (min - 0.5, max + 0.5);
    }
    let pad = (max - min) * pad_frac;
    (min - pad, max + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_chart_is_valid_svg() {
        let s = Series {
            label: "group a".into(),
            color: "#c0392b",
            points: vec![(0.1, Some((0.5, 0.0)))],
        };
        let svg = line_chart("one point", "beta", "rate", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("circle"));
    }

    #[test]
    fn undefined_cells_leave_gaps() {
        let s = Series {
            label: "group b".into(),
            color: "#2980b9",
            points: vec![
                (0.0, Some((0.1, 0.01))),
                (0.2, None),
                (0.4, Some((0.3, 0.02))),
                (0.6, Some((0.4, 0.02))),
            ],
        };
        let svg = line_chart("gaps", "beta", "rate", &[s]);
        // One polyline for the trailing run; the isolated first point draws
        // as a marker only.
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn chart_output_is_deterministic() {
        let mk = || Series {
            label: "x".into(),
            color: "#000000",
            points: vec![(0.0, Some((1.0, 0.1))), (1.0, Some((2.0, 0.1)))],
        };
        assert_eq!(line_chart("t", "x", "y", &[mk()]), line_chart("t", "x", "y", &[mk()]));
    }
}
