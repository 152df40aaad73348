use std::fmt::Write as _;

use super::{Method, StudyResult, StudyRow};

/// Shortest decimal string that parses back to the same `f64`.
/// Very large or small magnitudes use exponent notation.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn cell(mean: f64, sd: f64) -> String {
    format!("{mean:.3} ({sd:.3})")
}

pub fn study_csv(result: &StudyResult) -> String {
    let s0 = result.s0;
    let mut header: Vec<String> = [
        "n",
        "ratio",
        "method",
        "rel_bias_mean",
        "rel_bias_sd",
        "abs_bias_mean",
        "abs_bias_sd",
        "failures",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=s0).map(|k| format!("comp_mean_{k}")));
    header.extend((1..=s0).map(|k| format!("comp_sd_{k}")));
    let mut out = header.join(",");
    out.push('\n');
    for row in &result.rows {
        let mut fields = vec![
            row.n.to_string(),
            format_number(row.ratio),
            row.method.to_string(),
            format_number(row.rel_bias_mean),
            format_number(row.rel_bias_sd),
            format_number(row.abs_bias_mean),
            format_number(row.abs_bias_sd),
            row.failures.to_string(),
        ];
        fields.extend(row.component_means.iter().map(|&v| format_number(v)));
        fields.extend(row.component_sds.iter().map(|&v| format_number(v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn render(header: Vec<String>, body: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = String::new();
    writeln!(out, "{}", line(&header)).unwrap();
    let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
    writeln!(out, "{}", "-".repeat(total)).unwrap();
    for row in &body {
        writeln!(out, "{}", line(row)).unwrap();
    }
    out
}

/// Aligned table with `mean (sd)` cells, one line per scenario and method.
pub fn study_table(result: &StudyResult) -> String {
    let mut header: Vec<String> =
        ["n", "p/n", "p", "method", "RelBias", "AbsBias"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=result.s0).map(|k| format!("w11_{k}")));
    header.push("failures".into());
    let body = result
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.n.to_string(),
                format_number(r.ratio),
                r.p.to_string(),
                r.method.to_string(),
                cell(r.rel_bias_mean, r.rel_bias_sd),
                cell(r.abs_bias_mean, r.abs_bias_sd),
            ];
            cells.extend(r.component_means.iter().zip(&r.component_sds).map(|(&m, &s)| cell(m, s)));
            cells.push(r.failures.to_string());
            cells
        })
        .collect();
    render(header, body)
}

/// Side-by-side RelBias/AbsBias of the proposed method and TIGER per scenario.
pub fn comparison_table(result: &StudyResult) -> String {
    let header: Vec<String> =
        ["n", "p/n", "p", "proposed RelBias", "proposed AbsBias", "tiger RelBias", "tiger AbsBias", "failures"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let mut scenarios: Vec<(usize, f64, usize)> = Vec::new();
    for r in &result.rows {
        if !scenarios.iter().any(|&(n, ratio, _)| n == r.n && ratio == r.ratio) {
            scenarios.push((r.n, r.ratio, r.p));
        }
    }
    let find = |n: usize, ratio: f64, m: Method| -> Option<&StudyRow> {
        result.rows.iter().find(|r| r.n == n && r.ratio == ratio && r.method == m)
    };
    let body = scenarios
        .into_iter()
        .map(|(n, ratio, p)| {
            let mut cells = vec![n.to_string(), format_number(ratio), p.to_string()];
            let mut failures = Vec::new();
            for m in [Method::Proposed, Method::Tiger] {
                match find(n, ratio, m) {
                    Some(r) => {
                        cells.push(cell(r.rel_bias_mean, r.rel_bias_sd));
                        cells.push(cell(r.abs_bias_mean, r.abs_bias_sd));
                        failures.push(r.failures.to_string());
                    }
                    None => {
                        cells.extend(["-".to_string(), "-".to_string()]);
                        failures.push("-".into());
                    }
                }
            }
            cells.push(failures.join("/"));
            cells
        })
        .collect();
    render(header, body)
}
