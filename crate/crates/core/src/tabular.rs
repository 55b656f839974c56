//! Reader for the small delimited data assets (key table, chart, weight and
//! count tables). Files carry a header row, `#` comment lines and either tab
//! or comma separators; the separator is sniffed from the header.

use crate::error::{Error, Result};

pub(crate) struct Table {
    pub header: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(usize, Vec<String>)>,
    pub source: String,
}

impl Table {
    pub fn parse(text: &str, source: &str) -> Result<Table> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            });
        let (_, header_line) = lines
            .next()
            .ok_or_else(|| Error::load(source, "empty file (no header row)"))?;
        let delim = if header_line.contains('\t') { '\t' } else { ',' };
        let split = |l: &str| l.split(delim).map(|f| f.trim().to_string()).collect::<Vec<_>>();
        let header = split(header_line);
        let mut rows = Vec::new();
        for (no, line) in lines {
            let fields = split(line);
            if fields.len() != header.len() {
                return Err(Error::load(
                    source,
                    format!(
                        "line {no}: expected {} fields, found {}",
                        header.len(),
                        fields.len()
                    ),
                ));
            }
            rows.push((no, fields));
        }
        Ok(Table {
            header,
            rows,
            source: source.to_string(),
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::load(&self.source, format!("missing column `{name}`")))
    }

    pub fn err(&self, line: usize, message: impl std::fmt::Display) -> Error {
        Error::load(&self.source, format!("line {line}: {message}"))
    }

    pub fn parse_field<T: std::str::FromStr>(&self, line: usize, col: &str, raw: &str) -> Result<T> {
        raw.parse()
            .map_err(|_| self.err(line, format!("invalid {col} `{raw}`")))
    }
}

pub(crate) fn parse_flag(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}
