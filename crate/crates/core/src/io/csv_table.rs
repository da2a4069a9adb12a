use std::path::Path;

/// Shortest decimal that parses back to the same `f64`. Non-finite values
/// are written as `nan`, `inf` and `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// A header row plus string cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Appends a row of numbers.
    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_f64(x)));
    }

    /// Three-column `tau_ns,value,error` curve.
    pub fn curve(tau: &[f64], value: &[f64], error: &[f64]) -> Self {
        let mut t = Self::new(["tau_ns", "value", "error"]);
        for ((a, b), c) in tau.iter().zip(value).zip(error) {
            t.push_f64(&[*a, *b, *c]);
        }
        t
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, csv::Error> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    /// Column `name` parsed as numbers.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[k].parse().ok()).collect()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        super::write_atomic(path, &self.to_bytes())
    }
}
