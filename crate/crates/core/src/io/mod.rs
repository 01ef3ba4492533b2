//! CSV ingestion and export, JSON helpers and run manifests.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ExperimentDataset, Matrix};
use crate::error::{Error, Result};

/// Serde adapter for `f64` fields that may be infinite or NaN.
///
/// Finite values are plain JSON numbers; `+inf`, `-inf` and NaN are the
/// strings `"inf"`, `"-inf"` and `"nan"`.
pub mod json_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct F64Visitor;

    impl Visitor<'_> for F64Visitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("unexpected float token '{other}'"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(F64Visitor)
    }
}

/// Same as [`json_f64`] for `Option<f64>`; `None` is `null`.
pub mod json_opt_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::json_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

fn default_na_tokens() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

/// Which CSV columns hold the outcome, treatment, response flag and
/// covariates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub outcome_col: String,
    pub treatment_col: String,
    pub response_col: String,
    pub covariate_cols: Vec<String>,
    #[serde(default = "default_na_tokens")]
    pub na_tokens: Vec<String>,
}

impl ColumnMapping {
    /// Mapping for files written by [`write_dataset_csv`].
    pub fn standard(k: usize) -> Self {
        Self {
            outcome_col: "y".into(),
            treatment_col: "d".into(),
            response_col: "r".into(),
            covariate_cols: (1..=k).map(|j| format!("x{j}")).collect(),
            na_tokens: default_na_tokens(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariate_cols.is_empty() {
            return Err(Error::Config("mapping lists no covariate columns".into()));
        }
        let mut seen = HashSet::new();
        for name in self.all_columns() {
            if !seen.insert(name) {
                return Err(Error::Config(format!("column '{name}' is mapped twice")));
            }
        }
        Ok(())
    }

    fn all_columns(&self) -> impl Iterator<Item = &str> {
        [&self.outcome_col, &self.treatment_col, &self.response_col]
            .into_iter()
            .chain(&self.covariate_cols)
            .map(String::as_str)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

fn parse_flag(raw: &str, row: usize, col: &str) -> Result<u8> {
    match raw.trim() {
        "0" | "0.0" => Ok(0),
        "1" | "1.0" => Ok(1),
        other => Err(Error::Csv {
            row,
            msg: format!("column '{col}' must be 0 or 1, got '{other}'"),
        }),
    }
}

fn parse_number(raw: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Csv {
        row,
        msg: format!("column '{col}' is not numeric: '{raw}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            row,
            msg: format!("column '{col}' is not finite: '{raw}'"),
        });
    }
    Ok(v)
}

/// Read a dataset from a headed CSV file. Rows are numbered from 1 after
/// the header in error messages.
pub fn load_csv(path: &Path, mapping: &ColumnMapping) -> Result<ExperimentDataset> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("column '{name}' not found in header")))
    };
    let y_at = locate(&mapping.outcome_col)?;
    let d_at = locate(&mapping.treatment_col)?;
    let r_at = locate(&mapping.response_col)?;
    let x_at = mapping
        .covariate_cols
        .iter()
        .map(|c| locate(c))
        .collect::<Result<Vec<_>>>()?;
    let is_na = |s: &str| mapping.na_tokens.iter().any(|t| t == s.trim());

    let k = x_at.len();
    let (mut xs, mut d, mut r, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            msg: e.to_string(),
        })?;
        let field = |at: usize| record.get(at).unwrap_or("");
        let ri = parse_flag(field(r_at), row, &mapping.response_col)?;
        let di = parse_flag(field(d_at), row, &mapping.treatment_col)?;
        let raw_y = field(y_at);
        let yi = if is_na(raw_y) {
            if ri == 1 {
                return Err(Error::Csv {
                    row,
                    msg: format!(
                        "outcome '{}' is missing but response is 1",
                        mapping.outcome_col
                    ),
                });
            }
            None
        } else if ri == 0 {
            // Outcomes recorded for attrited units are ignored.
            None
        } else {
            Some(parse_number(raw_y, row, &mapping.outcome_col)?)
        };
        for (&at, name) in x_at.iter().zip(&mapping.covariate_cols) {
            xs.push(parse_number(field(at), row, name)?);
        }
        d.push(di);
        r.push(ri);
        y.push(yi);
    }
    if d.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    let x = Matrix::new(d.len(), k, xs)?;
    ExperimentDataset::new(x, d, r, y)
}

/// Write a dataset with columns `y,d,r,x1..xk`; unobserved outcomes are
/// `NA`. Floats use the shortest representation that round-trips.
pub fn write_dataset_csv(ds: &ExperimentDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["y".to_string(), "d".into(), "r".into()];
    header.extend((1..=ds.k()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..ds.n() {
        let mut rec = vec![
            ds.y[i].map_or_else(|| "NA".to_string(), |v| v.to_string()),
            ds.d[i].to_string(),
            ds.r[i].to_string(),
        ];
        rec.extend(ds.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration
/// order, so identical values give identical bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Digest of a value's compact JSON form.
pub fn json_digest<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}

pub const RNG_DESCRIPTION: &str = "SplitMix64: state += 0x9E3779B97F4A7C15; \
z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; \
output z ^ (z >> 31). Uniforms use the top 53 bits; normals use Box-Muller with the spare cached. \
Child seeds: derive_seed(seed, i) = mix64(seed ^ mix64(i + 0x9E3779B97F4A7C15)), where mix64 is \
the output function above. Replication i of a Monte Carlo run uses derive_seed(seed, i).";

/// Written next to every output. `started_at` and `finished_at` are Unix
/// seconds and are the only fields that vary between identical runs; set
/// `SOURCE_DATE_EPOCH` to pin them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub input_digest: Option<String>,
    pub output_digests: Vec<(String, String)>,
    pub rng: String,
    pub started_at: u64,
    pub finished_at: u64,
}

/// Current Unix time, or `SOURCE_DATE_EPOCH` when that is set.
pub fn unix_now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: None,
            output_digests: Vec::new(),
            rng: RNG_DESCRIPTION.to_string(),
            started_at: unix_now(),
            finished_at: 0,
        }
    }

    /// Record the digest of a written output file.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.output_digests.push((name, file_digest(path)?));
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_at = unix_now();
        write_json(path, &self)
    }
}
