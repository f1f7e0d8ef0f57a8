//! Minimal static SVG line plots for run reports.

/// Renders labeled series as an SVG line chart. X is the 1-based sample
/// index (layer number); output is deterministic for identical input.
pub fn line_plot_svg(series: &[(String, Vec<f64>)], title: &str, y_label: &str) -> String {
    const W: f64 = 840.0;
    const H: f64 = 520.0;
    const ML: f64 = 70.0; // left margin
    const MR: f64 = 24.0;
    const MT: f64 = 44.0;
    const MB: f64 = 52.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];

    let n_max = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let x_span = (n_max.max(2) - 1) as f64;

    let x_of = |i: usize| ML + (W - ML - MR) * i as f64 / x_span;
    let y_of = |v: f64| H - MB - (H - MT - MB) * (v / y_max);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"26\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));

    // Ticks.
    for t in 0..=5 {
        let frac = t as f64 / 5.0;
        let y_val = y_max * frac;
        let y = y_of(y_val);
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{ML}\" y2=\"{y:.1}\" stroke=\"black\"/>\n",
            ML - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{y_val:.3}</text>\n",
            ML - 8.0,
            y + 4.0
        ));
        let x_val = 1.0 + x_span * frac;
        let x = x_of((x_span * frac) as usize);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{x_val:.0}</text>\n",
            H - MB + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">layer</text>\n",
        (ML + W - MR) / 2.0,
        H - 14.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{y_label}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));

    // Series.
    for (s, (label, values)) in series.iter().enumerate() {
        let color = COLORS[s % COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i), y_of(v.min(y_max))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = MT + 18.0 * s as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>\n",
            ML + 12.0,
            ML + 40.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" \
             font-size=\"12\">{label}</text>\n",
            ML + 46.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
