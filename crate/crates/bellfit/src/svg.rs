//! Grouped bar chart of median train and test error per model, written as
//! plain SVG.

use std::fmt::Write;

use bellfit_core::traintest::ModelMedians;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const TRAIN_FILL: &str = "#4c72b0";
const TEST_FILL: &str = "#dd8452";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rounds `max` up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(max: f64) -> f64 {
    if !max.is_finite() || max <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(max.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|v| *v >= max)
        .unwrap_or(10.0 * mag)
}

pub fn error_chart(title: &str, medians: &[ModelMedians], manifest: &str) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let top = nice_ceiling(
        medians
            .iter()
            .flat_map(|m| [m.median_train_error, m.median_test_error])
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
    );
    let y_of = |v: f64| TOP + plot_h * (1.0 - (v / top).clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<desc>manifest: {}</desc>", escape(manifest));
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3e}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">median error (nats/trial)</text>"#,
        TOP + plot_h / 2.0
    );

    let group_w = plot_w / medians.len().max(1) as f64;
    let bar_w = group_w * 0.3;
    for (i, m) in medians.iter().enumerate() {
        let x0 = LEFT + group_w * i as f64 + group_w * 0.2;
        for (j, (v, fill)) in [(m.median_train_error, TRAIN_FILL), (m.median_test_error, TEST_FILL)]
            .into_iter()
            .enumerate()
        {
            let x = x0 + bar_w * j as f64;
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{:.2}" fill="{fill}"><title>{v:e}</title></rect>"#,
                TOP + plot_h - y
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x0 + bar_w,
            TOP + plot_h + 18.0,
            escape(&m.spec.label())
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );

    let lx = WIDTH - RIGHT - 130.0;
    for (j, (name, fill)) in [("train", TRAIN_FILL), ("test", TEST_FILL)].into_iter().enumerate() {
        let y = TOP + 16.0 * j as f64;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{y}" width="12" height="12" fill="{fill}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 18.0, y + 10.0);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellfit_core::{ModelClass, ModelSpec};

    #[test]
    fn ceilings() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(0.013), 0.02);
        assert_eq!(nice_ceiling(3.0), 5.0);
        assert_eq!(nice_ceiling(7.0), 10.0);
    }

    #[test]
    fn one_bar_pair_per_model() {
        let m = |class, train, test| ModelMedians {
            spec: ModelSpec::new(class),
            median_train_error: train,
            median_test_error: test,
            median_fitted_ns_delta: 0.0,
            median_fitted_chsh_max: 0.0,
        };
        let svg = error_chart("E2 <dephased>", &[m(ModelClass::Ccc, 1e-4, 2e-4), m(ModelClass::Cce0, 5e-5, 3e-4)], "manifest.json");
        assert_eq!(svg.matches("<title>").count(), 4);
        assert!(svg.contains("E2 &lt;dephased&gt;"));
        assert!(svg.contains(">cCE0<"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
