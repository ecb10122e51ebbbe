use std::fmt::Write as _;

/// One line of a metrics table. `eer` is a fraction; reports print percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub id: String,
    pub tdcf: f64,
    pub eer: f64,
}

impl ReportRow {
    pub fn new(id: impl Into<String>, tdcf: f64, eer: f64) -> Self {
        Self {
            id: id.into(),
            tdcf,
            eer,
        }
    }

    pub fn eer_percent(&self) -> f64 {
        self.eer * 100.0
    }
}

/// Aligned text table with a header line.
pub fn format_table(rows: &[ReportRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.id.len())
        .chain(std::iter::once(2))
        .max()
        .unwrap_or(2);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}", "id", "t-DCF", "EER(%)");
    for r in rows {
        let _ = writeln!(out, "{:<width$}  {:>8.4}  {:>8.3}", r.id, r.tdcf, r.eer_percent());
    }
    out
}

/// `id,tdcf,eer_percent`, six decimals each.
pub fn format_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("id,tdcf,eer_percent\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6}", r.id, r.tdcf, r.eer_percent());
    }
    out
}
