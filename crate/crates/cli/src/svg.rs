//! Hand-rolled SVG line charts: polyline series, an optional confidence
//! band, and dashed reference rules. No external renderer; every number is
//! formatted with a fixed precision so identical inputs give identical
//! bytes.

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 4] = ["#1f6fb4", "#c23b22", "#2a8a44", "#8a56b0"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A shaded (x, lo, hi) band, drawn behind the series.
pub struct Band {
    pub points: Vec<(f64, f64, f64)>,
}

/// A dashed reference line with a label: horizontal at a y level, or
/// vertical at an x position.
pub struct Rule {
    pub value: f64,
    pub label: String,
    pub vertical: bool,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub band: Option<Band>,
    pub rules: Vec<Rule>,
}

impl Chart {
    pub fn render(&self) -> String {
        let (x_min, x_max, y_min, y_max) = self.extent();
        let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        let sy = |y: f64| {
            HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
        };

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // axes and ticks
        let x0 = sx(x_min);
        let x1 = sx(x_max);
        let y0 = sy(y_min);
        let y1 = sy(y_max);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            x0, y0, x1, y0
        ));
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            x0, y0, x0, y1
        ));
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = x_min + t * (x_max - x_min);
            let yv = y_min + t * (y_max - y_min);
            let xp = sx(xv);
            let yp = sy(yv);
            out.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
                xp,
                y0,
                xp,
                y0 + 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
                xp,
                y0 + 18.0,
                tick(xv)
            ));
            out.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
                x0 - 4.0,
                yp,
                x0,
                yp
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
                x0 - 8.0,
                yp + 4.0,
                tick(yv)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            (x0 + x1) / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        ));

        if let Some(band) = &self.band {
            if band.points.len() >= 2 {
                let mut d = String::from("M");
                for (x, lo, _) in &band.points {
                    d.push_str(&format!(" {:.2} {:.2}", sx(*x), sy(*lo)));
                }
                for (x, _, hi) in band.points.iter().rev() {
                    d.push_str(&format!(" L {:.2} {:.2}", sx(*x), sy(*hi)));
                }
                d.push_str(" Z");
                out.push_str(&format!(
                    "<path d=\"{d}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                    PALETTE[0]
                ));
            }
        }

        for rule in &self.rules {
            let (p1, p2) = if rule.vertical {
                let xp = sx(rule.value);
                ((xp, y0), (xp, y1))
            } else {
                let yp = sy(rule.value);
                ((x0, yp), (x1, yp))
            };
            out.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#777\" \
                 stroke-dasharray=\"5 4\"/>\n",
                p1.0, p1.1, p2.0, p2.1
            ));
            let (tx, ty, anchor) = if rule.vertical {
                (p2.0 + 4.0, y1 + 12.0, "start")
            } else {
                (x1, p1.1 - 5.0, "end")
            };
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"{}\" fill=\"#555\">{}</text>\n",
                tx,
                ty,
                anchor,
                escape(&rule.label)
            ));
        }

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if series.points.len() == 1 {
                let (x, y) = series.points[0];
                out.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                    sx(x),
                    sy(y),
                    color
                ));
            } else {
                let pts: Vec<String> = series
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
                    pts.join(" "),
                    color
                ));
            }
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{}\">{}</text>\n",
                MARGIN_L + 8.0,
                MARGIN_T + 14.0 * (i + 1) as f64,
                color,
                escape(&series.name)
            ));
        }

        out.push_str("</svg>\n");
        out
    }

    /// Data extent over series, band, and rules, padded 5% per side; a
    /// degenerate axis widens to a unit box around the single value.
    fn extent(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
        }
        if let Some(b) = &self.band {
            for &(x, lo, hi) in &b.points {
                xs.push(x);
                ys.push(lo);
                ys.push(hi);
            }
        }
        for r in &self.rules {
            if r.vertical {
                xs.push(r.value);
            } else {
                ys.push(r.value);
            }
        }
        let span = |vals: &[f64]| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in vals {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !lo.is_finite() || !hi.is_finite() {
                return (0.0, 1.0);
            }
            if hi - lo < 1e-12 {
                return (lo - 0.5, hi + 0.5);
            }
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        };
        let (x_min, x_max) = span(&xs);
        let (y_min, y_max) = span(&ys);
        (x_min, x_max, y_min, y_max)
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
