//! CSV tables: `# fockflow v1` header, LF line endings, 12 significant digits.

use std::fmt::Write as _;
use std::path::Path;

pub const MAGIC: &str = "# fockflow v1";

/// Shortest %g-style rendering with 12 significant digits.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_g(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Numeric columns of a fockflow table. Rows whose `status` column is
/// present and not `ok` are dropped.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or("table has no header row")?.split(',').map(|s| s.trim().to_string()).collect();
    let status = header.iter().position(|h| h == "status");
    let mut cols = vec![Vec::new(); header.len()];
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, header has {}", k + 1, cells.len(), header.len()));
        }
        if status.is_some_and(|s| cells[s] != "ok") {
            continue;
        }
        for (j, c) in cells.iter().enumerate() {
            if Some(j) == status {
                cols[j].push(f64::NAN);
                continue;
            }
            cols[j].push(c.parse::<f64>().map_err(|_| format!("row {}: '{c}' is not a number", k + 1))?);
        }
    }
    Ok((header, cols))
}
