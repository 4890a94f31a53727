//! Cross-cell comparison tables: rows are methods, column groups are noise
//! ratios, each carrying fMR / fMRR / AUC with the best value per column
//! flagged. Layout follows the usual error-detection result tables.

use anyhow::{bail, Result};
use prge_core::eval::MetricsReport;

pub struct Comparison {
    /// Aligned human-readable table.
    pub text: String,
    /// Machine-readable TSV, one row per (method, ratio).
    pub tsv: String,
}

struct Cell {
    fmr: f64,
    fmrr: f64,
    auc: f64,
}

pub fn emit_comparison(reports: &[MetricsReport]) -> Result<Comparison> {
    if reports.is_empty() {
        bail!("no reports to compare");
    }
    let dataset = &reports[0].dataset;
    if let Some(other) = reports.iter().find(|r| &r.dataset != dataset) {
        bail!(
            "mixed datasets in one table: {dataset:?} and {:?}",
            other.dataset
        );
    }

    let mut ratios: Vec<f64> = reports.iter().map(|r| r.noise_ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    ratios.dedup();
    let mut methods: Vec<String> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }

    let cell = |method: &str, ratio: f64| -> Option<Cell> {
        reports
            .iter()
            .find(|r| r.method == method && r.noise_ratio == ratio)
            .map(|r| Cell {
                fmr: r.fmr,
                fmrr: r.fmrr,
                auc: r.auc,
            })
    };

    // best per (ratio, metric) column: fMR lower is better, the others higher
    let mut best: Vec<(f64, f64, f64)> = Vec::with_capacity(ratios.len());
    for &ratio in &ratios {
        let cells: Vec<Cell> = methods.iter().filter_map(|m| cell(m, ratio)).collect();
        let fmr = cells.iter().map(|c| c.fmr).fold(f64::INFINITY, f64::min);
        let fmrr = cells
            .iter()
            .map(|c| c.fmrr)
            .fold(f64::NEG_INFINITY, f64::max);
        let auc = cells
            .iter()
            .map(|c| c.auc)
            .fold(f64::NEG_INFINITY, f64::max);
        best.push((fmr, fmrr, auc));
    }

    let flag = |is_best: bool| if is_best { "*" } else { " " };
    let mut text = String::new();
    text.push_str(&format!("{:<12}", dataset));
    for &ratio in &ratios {
        text.push_str(&format!(
            " | {:>33}",
            format!("{}% noise", trim_float(ratio * 100.0))
        ));
    }
    text.push('\n');
    text.push_str(&format!("{:<12}", "method"));
    for _ in &ratios {
        text.push_str(&format!(" | {:>11} {:>9} {:>9}", "fMR", "fMRR", "AUC"));
    }
    text.push('\n');
    for method in &methods {
        text.push_str(&format!("{:<12}", method));
        for (i, &ratio) in ratios.iter().enumerate() {
            match cell(method, ratio) {
                Some(c) => {
                    let (bf, bm, ba) = best[i];
                    text.push_str(&format!(
                        " | {:>10.1}{} {:>8.4}{} {:>8.4}{}",
                        c.fmr,
                        flag(c.fmr == bf),
                        c.fmrr,
                        flag(c.fmrr == bm),
                        c.auc,
                        flag(c.auc == ba),
                    ));
                }
                None => text.push_str(&format!(" | {:>11} {:>9} {:>9}", "-", "-", "-")),
            }
        }
        text.push('\n');
    }

    let mut tsv = String::from(
        "dataset\tmethod\tnoise_ratio\tfmr\tfmrr\tauc\tbest_fmr\tbest_fmrr\tbest_auc\n",
    );
    for method in &methods {
        for (i, &ratio) in ratios.iter().enumerate() {
            if let Some(c) = cell(method, ratio) {
                let (bf, bm, ba) = best[i];
                tsv.push_str(&format!(
                    "{dataset}\t{method}\t{ratio}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    c.fmr,
                    c.fmrr,
                    c.auc,
                    c.fmr == bf,
                    c.fmrr == bm,
                    c.auc == ba,
                ));
            }
        }
    }

    Ok(Comparison { text, tsv })
}

pub fn trim_float(v: f64) -> String {
    let rounded = (v * 1e6).round() / 1e6;
    let mut s = format!("{rounded}");
    if s.ends_with(".0") {
        s.truncate(s.len() - 2);
    }
    s
}
