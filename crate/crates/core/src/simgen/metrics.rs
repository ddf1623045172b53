//! Tabular experiment output.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// One estimate of one metric for one `(method, n, k)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub metric: String,
    pub value: f64,
    /// Monte Carlo standard error, when one applies.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, method: impl Into<String>, n: usize, k: usize, metric: impl Into<String>, value: f64, stderr: Option<f64>) {
        self.rows.push(MetricRow {
            method: method.into(),
            n,
            k,
            metric: metric.into(),
            value,
            stderr,
        });
    }

    pub fn extend(&mut self, other: MetricTable) {
        self.rows.extend(other.rows);
    }

    /// First row matching all three keys.
    pub fn get(&self, method: &str, n: usize, k: usize, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n && r.k == k && r.metric == metric)
    }

    pub fn value(&self, method: &str, n: usize, k: usize, metric: &str) -> Option<f64> {
        self.get(method, n, k, metric).map(|r| r.value)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with header `method,n,k,metric,value,stderr`; a missing stderr is
    /// an empty field.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "n", "k", "metric", "value", "stderr"])?;
        for r in &self.rows {
            out.write_record([
                r.method.clone(),
                r.n.to_string(),
                r.k.to_string(),
                r.metric.clone(),
                r.value.to_string(),
                r.stderr.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = MetricTable::new();
        t.push("dopt", 1000, 100, "mse_slope", 0.25, Some(0.01));
        t.push("full", 1000, 1000, "seconds_p5", 1.5, None);
        assert_eq!(
            t.to_csv_string(),
            "method,n,k,metric,value,stderr\ndopt,1000,100,mse_slope,0.25,0.01\nfull,1000,1000,seconds_p5,1.5,\n"
        );
        assert_eq!(t.value("dopt", 1000, 100, "mse_slope"), Some(0.25));
    }

    #[test]
    fn mean_and_error() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s.unwrap() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0]), (3.0, None));
    }
}
