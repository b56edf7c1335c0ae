//! Recordings, windows and the flat CSV formats used on disk.
//!
//! A recording CSV has a header row of channel ids followed by one row per
//! sample, one column per channel. Matrices (adjacency, lags) are headerless
//! square CSVs. Barcodes and Betti trajectories carry a header row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel, uniformly sampled recording. `samples[c]` is channel `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub channels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 3]>>,
}

impl Recording {
    pub fn new(channels: Vec<String>, samples: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        let rec = Recording {
            channels,
            samples,
            sample_rate,
            positions: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.channels.len() {
            return Err(Error::Shape(format!(
                "{} positions for {} channels",
                positions.len(),
                self.channels.len()
            )));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.channels.len() != self.samples.len() {
            return Err(Error::Shape(format!(
                "{} channel ids for {} sample rows",
                self.channels.len(),
                self.samples.len()
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::Shape("recording has no channels".into()));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        let len = self.samples[0].len();
        if len < 2 {
            return Err(Error::InsufficientLength {
                needed: 1,
                available: len,
            });
        }
        for (c, row) in self.samples.iter().enumerate() {
            if row.len() != len {
                return Err(Error::Shape(format!(
                    "channel {:?} has {} samples, expected {}",
                    self.channels[c],
                    row.len(),
                    len
                )));
            }
            if let Some(t) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: t,
                    channel: self.channels[c].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel_index(&self, id: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::UnknownChannel(id.to_string()))
    }

    pub fn channel(&self, id: &str) -> Result<&[f64]> {
        Ok(&self.samples[self.channel_index(id)?])
    }
}

/// Sample-indexed window `[start, start + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub start: usize,
    pub length: usize,
}

impl WindowSpec {
    pub fn new(start: usize, length: usize) -> Self {
        WindowSpec { start, length }
    }

    /// Converts a time span to samples, flooring both ends.
    pub fn from_seconds(start_s: f64, length_s: f64, sample_rate: f64) -> Self {
        WindowSpec {
            start: (start_s * sample_rate).floor().max(0.0) as usize,
            length: (length_s * sample_rate).floor().max(0.0) as usize,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

/// Parses a recording CSV. The sample rate is not stored in the file.
pub fn read_recording<R: Read>(reader: R, sample_rate: f64) -> Result<Recording> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let channels: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if channels.is_empty() || channels.iter().any(String::is_empty) {
        return Err(Error::Parse {
            row: 0,
            message: "empty channel id in header".into(),
        });
    }
    let mut samples = vec![Vec::new(); channels.len()];
    for (i, record) in rdr.records().enumerate() {
        // header is row 0
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != channels.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", channels.len(), record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    channel: channels[c].clone(),
                });
            }
            samples[c].push(v);
        }
    }
    Recording::new(channels, samples, sample_rate)
}

pub fn load_recording(path: impl AsRef<Path>, sample_rate: f64) -> Result<Recording> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_recording(file, sample_rate)
}

pub fn write_recording<W: Write>(writer: W, rec: &Recording) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Parse {
        row: 0,
        message: e.to_string(),
    };
    wtr.write_record(&rec.channels).map_err(csv_err)?;
    for t in 0..rec.len() {
        wtr.write_record(rec.samples.iter().map(|ch| ch[t].to_string()))
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn save_recording(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_recording(file, rec)
}

/// Copies the samples in `w` into a new recording.
pub fn slice_window(rec: &Recording, w: WindowSpec) -> Result<Recording> {
    if w.length < 2 || w.end() > rec.len() {
        return Err(Error::Bounds {
            start: w.start,
            end: w.end(),
            len: rec.len(),
        });
    }
    Ok(Recording {
        channels: rec.channels.clone(),
        samples: rec
            .samples
            .iter()
            .map(|ch| ch[w.start..w.end()].to_vec())
            .collect(),
        sample_rate: rec.sample_rate,
        positions: rec.positions.clone(),
    })
}

/// Mean and sample standard deviation (ddof = 1).
pub(crate) fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Standardizes every channel to mean 0 and unit sample standard deviation.
pub fn zscore(rec: &Recording) -> Result<Recording> {
    let mut samples = Vec::with_capacity(rec.n_channels());
    for (c, ch) in rec.samples.iter().enumerate() {
        let (mean, sd) = mean_sd(ch);
        if !(sd > 0.0) || sd < 1e-300 {
            return Err(Error::DegenerateChannel(rec.channels[c].clone()));
        }
        samples.push(ch.iter().map(|v| (v - mean) / sd).collect());
    }
    Ok(Recording {
        channels: rec.channels.clone(),
        samples,
        sample_rate: rec.sample_rate,
        positions: rec.positions.clone(),
    })
}

/// Headerless square matrix of reals.
pub fn write_matrix<W: Write>(writer: W, m: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in m {
        wtr.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_int_matrix<W: Write>(writer: W, m: &[Vec<usize>]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for row in m {
        wtr.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

/// Reads a headerless square matrix of reals.
pub fn read_matrix<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut m = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let mut vals = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    channel: c.to_string(),
                });
            }
            vals.push(v);
        }
        m.push(vals);
    }
    let n = m.len();
    if let Some((i, r)) = m.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Parse {
            row: i + 1,
            message: format!("expected {} columns in a square matrix, found {}", n, r.len()),
        });
    }
    Ok(m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec2x4() -> Recording {
        let csv = "a,b\n1,5\n2,6\n3,7\n4,8\n";
        read_recording(csv.as_bytes(), 100.0).unwrap()
    }

    #[test]
    fn loads_channel_major_samples() {
        let rec = rec2x4();
        assert_eq!(rec.channels, vec!["a", "b"]);
        assert_eq!(rec.samples, vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]);
    }

    #[test]
    fn rejects_nan_cell() {
        let err = read_recording("a,b\n1,2\n3,NaN\n".as_bytes(), 1.0).unwrap_err();
        match err {
            Error::NonFinite { row, channel } => {
                assert_eq!(row, 2);
                assert_eq!(channel, "b");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_short_row() {
        let err = read_recording("a,b\n1,2\n3\n".as_bytes(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn one_second_at_200hz() {
        let mut csv = String::new();
        csv.push_str(&(0..204).map(|c| format!("g{c}")).collect::<Vec<_>>().join(","));
        csv.push('\n');
        for t in 0..200 {
            csv.push_str(&(0..204).map(|c| format!("{}", (t * c) as f64 * 0.01)).collect::<Vec<_>>().join(","));
            csv.push('\n');
        }
        let rec = read_recording(csv.as_bytes(), 200.0).unwrap();
        assert_eq!(rec.n_channels(), 204);
        assert_eq!(rec.len(), 200);
        assert_eq!(rec.duration(), 1.0);
    }

    #[test]
    fn full_window_is_identity() {
        let rec = rec2x4();
        assert_eq!(slice_window(&rec, WindowSpec::new(0, 4)).unwrap(), rec);
    }

    #[test]
    fn sixty_ms_at_1khz() {
        let w = WindowSpec::from_seconds(0.0, 0.060, 1000.0);
        assert_eq!(w, WindowSpec::new(0, 60));
        let rec = Recording::new(vec!["a".into()], vec![(0..1000).map(f64::from).collect()], 1000.0).unwrap();
        let s = slice_window(&rec, w).unwrap();
        assert_eq!(s.len(), 60);
        assert!((s.duration() - 0.060).abs() < 1e-12);
    }

    #[test]
    fn window_past_end_is_bounds_error() {
        let rec = rec2x4();
        assert!(matches!(
            slice_window(&rec, WindowSpec::new(3, 2)),
            Err(Error::Bounds { .. })
        ));
    }

    #[test]
    fn slice_does_not_alias() {
        let rec = rec2x4();
        let mut s = slice_window(&rec, WindowSpec::new(1, 2)).unwrap();
        s.samples[0][0] = 99.0;
        assert_eq!(rec.samples[0][1], 2.0);
    }

    #[test]
    fn zscore_definition() {
        let rec = Recording::new(vec!["a".into()], vec![vec![1.0, 2.0, 3.0]], 1.0).unwrap();
        let z = zscore(&rec).unwrap();
        let (m, sd) = mean_sd(&z.samples[0]);
        assert!(m.abs() < 1e-15);
        assert!((sd - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zscore_constant_channel() {
        let rec = Recording::new(
            vec!["a".into(), "flat".into()],
            vec![vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]],
            1.0,
        )
        .unwrap();
        match zscore(&rec) {
            Err(Error::DegenerateChannel(c)) => assert_eq!(c, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_round_trip() {
        let m = vec![vec![0.0, 0.25], vec![1.0 / 3.0, 0.0]];
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }
}
