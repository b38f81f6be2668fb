//! Tabular output as CSV (LF line endings, 17 significant digits) or JSON
//! with run metadata, plus an optional gnuplot script.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::args::{CommonArgs, Format};
use crate::CliError;

/// Run metadata carried in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: &'static str,
    pub version: &'static str,
    pub coupling: f64,
    pub trajectory: String,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub window: f64,
    pub max_subdivisions: usize,
}

impl Metadata {
    pub fn new(command: &'static str, c: &CommonArgs, trajectory: String) -> Self {
        Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            coupling: c.a,
            trajectory,
            tolerances: Tolerances {
                rel_tol: c.rel_tol,
                abs_tol: c.abs_tol,
                window: c.window,
                max_subdivisions: c.max_subdivisions,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self, meta: &Metadata) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            meta: &'a Metadata,
            columns: &'a [&'static str],
            samples: Vec<serde_json::Map<String, serde_json::Value>>,
        }
        let samples = self
            .rows
            .iter()
            .map(|row| self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), serde_json::json!(v))).collect())
            .collect();
        let doc = Doc { meta, columns: &self.columns, samples };
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }
}

/// Parses CSV written by [`Table::to_csv`].
pub fn read_series_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty input")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| format!("line {}: `{c}`: {e}", n + 2)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("line {}: {} cells, expected {}", n + 2, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes the table in the requested format to `--out` or standard output,
/// and the plot script when asked for.
pub fn emit(table: &Table, meta: &Metadata, c: &CommonArgs) -> Result<(), CliError> {
    let text = match c.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(meta),
    };
    match &c.out {
        Some(path) => std::fs::write(path, text).map_err(io_err(path))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    if let Some(script) = &c.emit_plot_script {
        std::fs::write(script, plot_script(table, c)?).map_err(io_err(script))?;
    }
    Ok(())
}

fn plot_script(table: &Table, c: &CommonArgs) -> Result<String, CliError> {
    let data = match (&c.out, c.format) {
        (Some(p), Format::Csv) => p.display().to_string(),
        _ => return Err(CliError::Usage("--emit-plot-script needs --out with CSV format".into())),
    };
    let x = table.columns[0];
    let mut s = format!(
        "# gnuplot script for {data}\nset datafile separator ','\nset key autotitle columnhead\nset xlabel '{x}'\nset grid\n"
    );
    let curves: Vec<String> =
        (2..=table.columns.len()).filter(|&i| table.columns[i - 1] != "err").map(|i| format!("'{data}' using 1:{i} with lines")).collect();
    s.push_str("plot ");
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(&["tau", "mu"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![-2.5e-300, std::f64::consts::PI]);
        let (h, rows) = read_series_csv(&t.to_csv()).unwrap();
        assert_eq!(h, ["tau", "mu"]);
        assert_eq!(rows, t.rows);
    }
}
