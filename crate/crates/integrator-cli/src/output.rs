//! CSV documents with a provenance header, and the plot-series splitter.

use crate::config::ExperimentConfig;
use anyhow::{bail, Context, Result};

/// A rendered experiment result: one provenance comment, one header line,
/// data rows. Built fully in memory so a failing run writes nothing.
#[derive(Debug, Clone)]
pub struct CsvDoc {
    provenance: String,
    header: String,
    rows: Vec<String>,
}

impl CsvDoc {
    pub fn new(provenance: String, header: &str) -> CsvDoc {
        CsvDoc {
            provenance,
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    /// Join cells with commas. Cells never contain commas here: every
    /// schema is numeric plus fixed enum words.
    pub fn push_row(&mut self, cells: &[String]) {
        self.rows.push(cells.join(","));
    }

    /// Append an already-joined row.
    pub fn push_raw(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.provenance);
        out.push('\n');
        out.push_str(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

/// First line of every output: tool version, hash of the canonical
/// physics config, and the seed (empty for deterministic runs). Enough to
/// reproduce the file bit for bit.
pub fn provenance_line(cfg: &ExperimentConfig) -> Result<String> {
    let seed = cfg.seed.map(|s| s.to_string()).unwrap_or_default();
    Ok(format!(
        "# intlab {} config_sha256={} seed={}",
        env!("CARGO_PKG_VERSION"),
        cfg.sha256_hex()?,
        seed
    ))
}

/// A CSV file split back into header and raw string cells, comment lines
/// dropped.
#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header_line = lines.next().context("input has no header line")?;
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect();
    Ok(ParsedCsv { header, rows })
}

/// One gnuplot-style series: whitespace-separated `x y [se]` lines.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub x_name: String,
    pub y_name: String,
    pub content: String,
}

/// Split a parsed CSV into one series per plottable column.
///
/// The x column is `x_name` if given (error if absent), else the first
/// column. Every other column becomes a y series except `*_se` columns,
/// which instead ride along as the third field of their partner series
/// (`foo_se` pairs with `foo_mean`, or with `foo`). Rows whose x or y
/// cell is empty or non-numeric are skipped: mixed schemas keep blank
/// cells where a quantity does not apply.
pub fn plot_series(parsed: &ParsedCsv, x_name: Option<&str>) -> Result<Vec<PlotSeries>> {
    let x_idx = match x_name {
        Some(name) => parsed
            .header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column named {name:?} in the input header"))?,
        None => 0,
    };
    if parsed.header.is_empty() {
        bail!("input header is empty");
    }
    let x_col = &parsed.header[x_idx];

    let se_partner = |y: &str| -> Option<usize> {
        let stem = y.strip_suffix("_mean").unwrap_or(y);
        parsed.header.iter().position(|h| h == &format!("{stem}_se"))
    };

    let mut out = Vec::new();
    for (y_idx, y_col) in parsed.header.iter().enumerate() {
        if y_idx == x_idx || y_col.ends_with("_se") {
            continue;
        }
        let se_idx = se_partner(y_col);
        let mut content = String::new();
        for row in &parsed.rows {
            let x = row.get(x_idx).and_then(|c| c.parse::<f64>().ok());
            let y = row.get(y_idx).and_then(|c| c.parse::<f64>().ok());
            let (Some(x), Some(y)) = (x, y) else { continue };
            match se_idx.and_then(|i| row.get(i)).and_then(|c| c.parse::<f64>().ok()) {
                Some(se) => content.push_str(&format!("{x} {y} {se}\n")),
                None => content.push_str(&format!("{x} {y}\n")),
            }
        }
        out.push(PlotSeries {
            x_name: x_col.clone(),
            y_name: y_col.clone(),
            content,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_puts_provenance_then_header_then_rows() {
        let mut doc = CsvDoc::new("# intlab test".into(), "a,b");
        doc.push_row(&["1".into(), "2".into()]);
        assert_eq!(doc.render(), "# intlab test\na,b\n1,2\n");
    }

    #[test]
    fn provenance_embeds_the_config_hash_and_seed() {
        let cfg = ExperimentConfig {
            seed: Some(42),
            ..ExperimentConfig::default()
        };
        let line = provenance_line(&cfg).unwrap();
        assert!(line.starts_with("# intlab "));
        assert!(line.contains(&format!("config_sha256={}", cfg.sha256_hex().unwrap())));
        assert!(line.ends_with("seed=42"));
        let blank = provenance_line(&ExperimentConfig::default()).unwrap();
        assert!(blank.ends_with("seed="));
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let parsed = parse_csv("# prov\n\nx,y\n1,2\n# mid\n3,4\n").unwrap();
        assert_eq!(parsed.header, ["x", "y"]);
        assert_eq!(parsed.rows.len(), 2);
        assert!(parse_csv("# only a comment\n").is_err());
    }

    #[test]
    fn series_pair_means_with_their_errors_and_skip_blank_cells() {
        let parsed = parse_csv(
            "a,exact,mc_mean,mc_se\n1,0.5,0.49,0.01\n2,,0.25,0.02\n3,0.1,,\n",
        )
        .unwrap();
        let series = plot_series(&parsed, None).unwrap();
        assert_eq!(series.len(), 2); // exact and mc_mean; mc_se rides along
        let exact = series.iter().find(|s| s.y_name == "exact").unwrap();
        assert_eq!(exact.content, "1 0.5\n3 0.1\n");
        let mc = series.iter().find(|s| s.y_name == "mc_mean").unwrap();
        assert_eq!(mc.content, "1 0.49 0.01\n2 0.25 0.02\n");
    }

    #[test]
    fn explicit_x_column_is_honored_and_missing_names_fail() {
        let parsed = parse_csv("n,value\n8,1.5\n").unwrap();
        let series = plot_series(&parsed, Some("value")).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].y_name, "n");
        assert_eq!(series[0].content, "1.5 8\n");
        assert!(plot_series(&parsed, Some("nope")).is_err());
    }
}
