//! Input/target sample sequences and their CSV interchange format.
//!
//! ```text
//! # nominal_input=-1.098 nominal_output=1 sample_period=1
//! u,y
//! -1.098,1
//! ...
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::Nominal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// Control-rod position (m).
    pub inputs: Vec<f64>,
    /// Thermal power scaled by its nominal value.
    pub targets: Vec<f64>,
    pub nominal_input: f64,
    pub nominal_output: f64,
    /// Seconds between samples.
    pub sample_period: f64,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        nominal: Nominal,
        sample_period: f64,
    ) -> Result<Self> {
        let d = Self {
            name: name.into(),
            inputs,
            targets,
            nominal_input: nominal.input,
            nominal_output: nominal.output,
            sample_period,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn nominal(&self) -> Nominal {
        Nominal {
            input: self.nominal_input,
            output: self.nominal_output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::Contract(format!(
                "dataset `{}`: {} inputs but {} targets",
                self.name,
                self.inputs.len(),
                self.targets.len()
            )));
        }
        if self.inputs.is_empty() {
            return Err(Error::Contract(format!("dataset `{}` is empty", self.name)));
        }
        if let Some(i) = self
            .inputs
            .iter()
            .chain(&self.targets)
            .position(|v| !v.is_finite())
        {
            return Err(Error::Contract(format!(
                "dataset `{}`: non-finite value at sample {}",
                self.name,
                i % self.inputs.len()
            )));
        }
        if !(self.nominal_output > 0.0 && self.nominal_output.is_finite()) {
            return Err(Error::Contract(format!(
                "dataset `{}`: nominal output must be positive",
                self.name
            )));
        }
        if !self.nominal_input.is_finite() {
            return Err(Error::Contract(format!("dataset `{}`: nominal input must be finite", self.name)));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::Contract(format!(
                "dataset `{}`: sample period must be positive",
                self.name
            )));
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(24 * (self.len() + 2));
        let _ = writeln!(
            s,
            "# nominal_input={} nominal_output={} sample_period={}",
            self.nominal_input, self.nominal_output, self.sample_period
        );
        s.push_str("u,y\n");
        for (u, y) in self.inputs.iter().zip(&self.targets) {
            let _ = writeln!(s, "{u},{y}");
        }
        s
    }

    /// Parses the CSV format; `name` labels the dataset and error messages.
    pub fn from_csv_str(text: &str, name: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines
            .next()
            .ok_or_else(|| err(1, "empty file".into()))?;
        let meta = header
            .strip_prefix('#')
            .ok_or_else(|| err(hline, "expected `# nominal_input=.. nominal_output=.. sample_period=..`".into()))?;
        let (mut nominal_input, mut nominal_output, mut sample_period) = (None, None, None);
        for tok in meta.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(hline, format!("malformed metadata `{tok}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| err(hline, format!("metadata `{k}` is not a number: `{v}`")))?;
            match k {
                "nominal_input" => nominal_input = Some(v),
                "nominal_output" => nominal_output = Some(v),
                "sample_period" => sample_period = Some(v),
                other => return Err(err(hline, format!("unknown metadata key `{other}`"))),
            }
        }
        let missing = |k: &str| err(hline, format!("metadata `{k}` missing"));
        let nominal_input = nominal_input.ok_or_else(|| missing("nominal_input"))?;
        let nominal_output = nominal_output.ok_or_else(|| missing("nominal_output"))?;
        let sample_period = sample_period.ok_or_else(|| missing("sample_period"))?;

        let (cline, columns) = lines
            .next()
            .ok_or_else(|| err(hline + 1, "missing `u,y` column header".into()))?;
        let cols: Vec<&str> = columns.split(',').map(str::trim).collect();
        if cols != ["u", "y"] {
            return Err(err(cline, format!("expected columns `u,y`, got `{columns}`")));
        }

        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (line, row) in lines {
            let mut fields = row.split(',').map(str::trim);
            let (Some(u), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err(line, format!("expected 2 columns in `{row}`")));
            };
            let parse = |s: &str, col: &str| -> Result<f64> {
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(line, format!("column {col}: `{s}` is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(line, format!("column {col}: non-finite value `{s}`")))
                }
            };
            inputs.push(parse(u, "u")?);
            targets.push(parse(y, "y")?);
        }
        let d = Self {
            name: name.to_string(),
            inputs,
            targets,
            nominal_input,
            nominal_output,
            sample_period,
        };
        d.validate().map_err(|e| err(cline, e.to_string()))?;
        Ok(d)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Reads a dataset; its name is the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::from_csv_str(&text, &name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::new(
            "learning",
            vec![-1.098, -0.7, 0.1 + 0.2],
            vec![1.0, 1.0000000000000002, 1.0 / 3.0],
            Nominal {
                input: -1.098,
                output: 1.0,
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("learning.csv");
        let d = sample();
        d.save(&path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back, d);
        for (a, b) in d.targets.iter().zip(&back.targets) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn three_rows() {
        let text = "# nominal_input=0 nominal_output=1 sample_period=0.5\nu,y\n0,1\n1,2\n2,3\n";
        let d = Dataset::from_csv_str(text, "t").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.targets, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.sample_period, 0.5);
    }

    #[test]
    fn malformed_cell_reports_its_line() {
        let mut text = String::from("# nominal_input=0 nominal_output=1 sample_period=1\nu,y\n");
        for i in 0..4 {
            text.push_str(&format!("{i},1\n"));
        }
        text.push_str("0.5,abc\n");
        match Dataset::from_csv_str(&text, "t") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 7);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nan_missing_columns_and_metadata() {
        let nan = "# nominal_input=0 nominal_output=1 sample_period=1\nu,y\n0,NaN\n";
        assert!(matches!(Dataset::from_csv_str(nan, "t"), Err(Error::Parse { line: 3, .. })));
        let cols = "# nominal_input=0 nominal_output=1 sample_period=1\nu\n0\n";
        assert!(matches!(Dataset::from_csv_str(cols, "t"), Err(Error::Parse { line: 2, .. })));
        let short = "# nominal_input=0 nominal_output=1 sample_period=1\nu,y\n0,1\n1\n";
        assert!(matches!(Dataset::from_csv_str(short, "t"), Err(Error::Parse { line: 4, .. })));
        let meta = "# nominal_input=0 sample_period=1\nu,y\n0,1\n";
        assert!(matches!(Dataset::from_csv_str(meta, "t"), Err(Error::Parse { line: 1, .. })));
        let empty = "# nominal_input=0 nominal_output=1 sample_period=1\nu,y\n";
        assert!(Dataset::from_csv_str(empty, "t").is_err());
        let neg = "# nominal_input=0 nominal_output=-1 sample_period=1\nu,y\n0,1\n";
        assert!(Dataset::from_csv_str(neg, "t").is_err());
    }
}
