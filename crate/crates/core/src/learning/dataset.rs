//! Sample tables stored as tab-separated text with a header row.

use std::io::{Read, Write};

use super::LearningError;

const KEY_COLUMNS: [&str; 4] = ["run_id", "iteration", "neighborhood_index", "y"];

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub run_id: String,
    pub iteration: usize,
    /// 1-based index of the neighborhood within its iteration.
    pub neighborhood_index: usize,
    pub features: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self { feature_names, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<(), LearningError> {
        if sample.features.len() != self.feature_names.len() {
            return Err(LearningError::DimensionMismatch {
                expected: self.feature_names.len(),
                actual: sample.features.len(),
            });
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Appends another dataset with the same manifest.
    pub fn extend(&mut self, other: Dataset) -> Result<(), LearningError> {
        if self.feature_names.is_empty() && self.samples.is_empty() {
            self.feature_names = other.feature_names;
        } else if self.feature_names != other.feature_names {
            return Err(LearningError::ManifestMismatch);
        }
        self.samples.extend(other.samples);
        Ok(())
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn improvements(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Samples grouped by (run, iteration), each group ordered by
    /// neighborhood index. Groups are ordered by first appearance.
    pub fn iteration_groups(&self) -> Vec<Vec<&Sample>> {
        let mut keys: Vec<(&str, usize)> = Vec::new();
        let mut groups: Vec<Vec<&Sample>> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        for s in &self.samples {
            let key = (s.run_id.as_str(), s.iteration);
            let g = *lookup.entry(key).or_insert_with(|| {
                keys.push(key);
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(s);
        }
        for g in &mut groups {
            g.sort_by_key(|s| s.neighborhood_index);
        }
        groups
    }

    pub fn write_tsv<W: Write>(&self, out: W) -> Result<(), LearningError> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        let header = KEY_COLUMNS.iter().map(|s| s.to_string()).chain(self.feature_names.iter().cloned());
        w.write_record(header).map_err(csv_error)?;
        for s in &self.samples {
            let mut row = vec![s.run_id.clone(), s.iteration.to_string(), s.neighborhood_index.to_string(), s.y.to_string()];
            row.extend(s.features.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<Self, LearningError> {
        let mut r = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(true).from_reader(input);
        let header = r.headers().map_err(csv_error)?.clone();
        if header.len() < KEY_COLUMNS.len() || header.iter().zip(KEY_COLUMNS).any(|(a, b)| a != b) {
            return Err(LearningError::Format { line: 1, message: "unexpected header".into() });
        }
        let mut data = Dataset::new(header.iter().skip(KEY_COLUMNS.len()).map(str::to_string).collect());
        for record in r.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |message: String| LearningError::Format { line, message };
            let number = |i: usize| -> Result<f64, LearningError> {
                record[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", header.get(i).unwrap_or("?"))))
            };
            let index = |i: usize| -> Result<usize, LearningError> {
                record[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", header.get(i).unwrap_or("?"))))
            };
            let y = number(3)?;
            if !(y >= 0.0) {
                return Err(bad(format!("negative improvement {y}")));
            }
            let features = (KEY_COLUMNS.len()..record.len()).map(number).collect::<Result<Vec<_>, _>>()?;
            data.samples.push(Sample {
                run_id: record[0].to_string(),
                iteration: index(1)?,
                neighborhood_index: index(2)?,
                features,
                y,
            });
        }
        Ok(data)
    }
}

fn csv_error(e: csv::Error) -> LearningError {
    let line = e.position().map_or(0, |p| p.line());
    LearningError::Format { line, message: e.to_string() }
}
