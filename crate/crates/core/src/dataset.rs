//! Synthetic labeled point clouds and CSV ingestion.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// What to generate (or read).
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// Isotropic Gaussian clusters on a circle.
    GaussianBlobs,
    /// Two interleaved half-circles, two classes.
    TwoMoons,
    /// Comma-separated floats, last column an integer label, no header.
    Csv(String),
}

/// Reproducible dataset description.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub kind: DatasetKind,
    pub n: usize,
    pub classes: usize,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn blobs(n: usize, classes: usize, seed: u64) -> Self {
        Self {
            kind: DatasetKind::GaussianBlobs,
            n,
            classes,
            seed,
        }
    }
}

/// Materialize a dataset. Generated sets are pure functions of the spec.
pub fn make_dataset(spec: &SyntheticDataset) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    match &spec.kind {
        DatasetKind::GaussianBlobs => {
            if spec.n < spec.classes || spec.classes == 0 {
                return Err(Error::Config(format!(
                    "need n >= classes, got n={} classes={}",
                    spec.n, spec.classes
                )));
            }
            let mut rng = Rng::new(spec.seed);
            let radius = 1.0;
            let std = 0.24;
            let mut features = Vec::with_capacity(spec.n);
            let mut labels = Vec::with_capacity(spec.n);
            for i in 0..spec.n {
                let class = i % spec.classes;
                let angle = 2.0 * std::f64::consts::PI * class as f64 / spec.classes as f64;
                features.push(vec![
                    radius * angle.cos() + std * rng.gaussian(),
                    radius * angle.sin() + std * rng.gaussian(),
                ]);
                labels.push(class);
            }
            Ok((features, labels))
        }
        DatasetKind::TwoMoons => {
            if spec.n < 2 {
                return Err(Error::Config("two moons needs n >= 2".into()));
            }
            let mut rng = Rng::new(spec.seed);
            let noise = 0.15;
            let mut features = Vec::with_capacity(spec.n);
            let mut labels = Vec::with_capacity(spec.n);
            for i in 0..spec.n {
                let class = i % 2;
                let phase = std::f64::consts::PI * rng.next_f64();
                let (x, y) = if class == 0 {
                    (phase.cos(), phase.sin())
                } else {
                    (1.0 - phase.cos(), 0.5 - phase.sin())
                };
                features.push(vec![
                    x + noise * rng.gaussian(),
                    y + noise * rng.gaussian(),
                ]);
                labels.push(class);
            }
            Ok((features, labels))
        }
        DatasetKind::Csv(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_csv(&text)
        }
    }
}

/// Parse CSV rows of floats with a trailing integer label.
pub fn parse_csv(text: &str) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: "need at least one feature and a label".into(),
            });
        }
        let (feat_fields, label_field) = fields.split_at(fields.len() - 1);
        let row: Vec<f64> = feat_fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad float {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let label = label_field[0].parse::<usize>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label {:?}", label_field[0]),
        })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("row width {} differs from {}", row.len(), w),
                })
            }
            _ => {}
        }
        features.push(row);
        labels.push(label);
    }
    Ok((features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_reproducible() {
        let spec = SyntheticDataset::blobs(600, 3, 7);
        let (f1, l1) = make_dataset(&spec).unwrap();
        let (f2, l2) = make_dataset(&spec).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(l1, l2);
        assert_eq!(f1.len(), 600);
        assert!(l1.iter().all(|&l| l < 3));
    }

    #[test]
    fn csv_round() {
        let (f, l) = parse_csv("1.0,2.0,1\n").unwrap();
        assert_eq!(f, vec![vec![1.0, 2.0]]);
        assert_eq!(l, vec![1]);
    }

    #[test]
    fn csv_bad_float_reports_line() {
        match parse_csv("1.0,x,1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_csv("1.0,2.0,0\n3.0,oops,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
