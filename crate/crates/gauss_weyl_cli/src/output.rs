use std::path::{Path, PathBuf};

use gauss_weyl::{GwError, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Header written into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self { tool: "gauss-weyl", version: gauss_weyl::VERSION, command: command.into(), config_hash: cfg.hash(), seed: cfg.seed() }
    }

    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("tool={} version={}", self.tool, self.version),
            format!("command={}", self.command),
            format!("config_hash={}", self.config_hash),
            format!("seed={}", self.seed),
        ]
    }
}

pub struct OutDir {
    pub root: PathBuf,
    pub meta: Metadata,
    pub written: Vec<PathBuf>,
}

fn io_err(path: &Path, e: std::io::Error) -> GwError {
    GwError::Input(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn create(root: PathBuf, meta: Metadata) -> Result<Self> {
        std::fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root, meta, written: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        self.written.push(p.clone());
        Ok(p)
    }

    /// Writes `{"metadata": …, …body}`; `body` must be a JSON object.
    pub fn json(&mut self, name: &str, body: Value) -> Result<PathBuf> {
        let mut obj = serde_json::Map::new();
        obj.insert("metadata".into(), json!(self.meta));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
        self.write(name, &(text + "\n"))
    }

    /// CSV with `# key=value` header lines; `extra` lines are appended to the header.
    pub fn csv(&mut self, name: &str, extra: &[String], body: &str) -> Result<PathBuf> {
        let text = format!("{}{body}", self.csv_header(extra));
        self.write(name, &text)
    }

    pub fn csv_header(&self, extra: &[String]) -> String {
        self.meta.comment_lines().iter().chain(extra).map(|l| format!("# {l}\n")).collect()
    }

    pub fn header_text(&self) -> String {
        self.meta.comment_lines().join("\n")
    }

    /// CSV whose body already carries `#` lines (they follow the metadata lines).
    pub fn raw(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, text)
    }

    pub fn svg(&mut self, name: &str, plot: &LinePlot) -> Result<PathBuf> {
        let text = plot.render(&self.meta.comment_lines().join(" "));
        self.write(name, &text)
    }
}

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

/// A plain line plot; `log_y` plots `log10 y` and drops non-positive values.
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace("--", "- -")
}

impl LinePlot {
    pub fn render(&self, comment: &str) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
        let series: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| {
                        let y = if self.log_y { if y > 0.0 { y.log10() } else { f64::NAN } } else { y };
                        (x.is_finite() && y.is_finite()).then_some((x, y))
                    })
                    .collect()
            })
            .collect();
        let all: Vec<&(f64, f64)> = series.iter().flatten().collect();
        let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |a, p| {
            (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1))
        });
        if all.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pw = w - left - right;
        let ph = h - top - bottom;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str(&format!("<!-- {} -->\n", escape(comment)));
        s.push_str(&format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"));
        s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
        s.push_str(&format!("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", left + pw / 2.0, escape(&self.title)));
        s.push_str(&format!("<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"));
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let ylab = if self.log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
            s.push_str(&format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{fx:.2}</text>\n", sx(fx), top + ph + 18.0));
            s.push_str(&format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{ylab}</text>\n", left - 6.0, sy(fy) + 4.0));
            s.push_str(&format!("<line x1=\"{left}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n", left + pw, sy(fy), sy(fy)));
        }
        s.push_str(&format!("<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2.0, h - 10.0, escape(&self.x_label)));
        s.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            top + ph / 2.0,
            top + ph / 2.0,
            escape(&self.y_label)
        ));
        for (k, (meta, pts)) in self.series.iter().zip(&series).enumerate() {
            let dash = if meta.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                s.push_str(&format!("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{dash} points=\"{}\"/>\n", meta.color, path.join(" ")));
            }
            for &(x, y) in pts {
                s.push_str(&format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n", sx(x), sy(y), meta.color));
            }
            let ly = top + 14.0 + 18.0 * k as f64;
            s.push_str(&format!("<line x1=\"{:.1}\" x2=\"{:.1}\" y1=\"{ly:.1}\" y2=\"{ly:.1}\" stroke=\"{}\" stroke-width=\"2\"{dash}/>\n", left + pw + 10.0, left + pw + 34.0, meta.color));
            s.push_str(&format!("<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n", left + pw + 40.0, ly + 4.0, escape(&meta.name)));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_skips_nonpositive_on_log_axis() {
        let p = LinePlot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![Series { name: "a".into(), color: "red", dashed: false, points: vec![(1.0, 0.0), (2.0, 1e-3), (3.0, 1e-2)] }],
        };
        let s = p.render("seed=1");
        assert!(s.starts_with("<?xml"));
        assert!(s.contains("<!-- seed=1 -->"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert!(s.trim_end().ends_with("</svg>"));
    }
}
