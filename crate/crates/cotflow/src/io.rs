//! File formats: versioned JSON checkpoints, CSV point sets and sample
//! tables, loss traces, and JSON sidecars.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{DenseLayer, Standardizer, TrainConfig, TrainedModel, VectorFieldParams};
use crate::measure::DiscreteMeasure;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerData<F> {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

/// Self-describing snapshot of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "F: Scalar")]
pub struct Checkpoint<F> {
    pub format_version: u32,
    pub d_y: usize,
    pub d_u: usize,
    pub layers: Vec<LayerData<F>>,
    pub standardizer: Standardizer<F>,
    pub config: TrainConfig<F>,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn from_model(model: &TrainedModel<F>) -> Self {
        let layers = model
            .params
            .layers()
            .iter()
            .map(|l| LayerData {
                rows: l.w.nrows(),
                cols: l.w.ncols(),
                w: l.w.iter().copied().collect(),
                b: l.b.to_vec(),
            })
            .collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            d_y: model.params.d_y(),
            d_u: model.params.d_u(),
            layers,
            standardizer: model.standardizer.clone(),
            config: model.config.clone(),
        }
    }

    pub fn into_model(self) -> Result<TrainedModel<F>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "checkpoint format {} not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            if l.w.len() != l.rows * l.cols || l.b.len() != l.cols {
                return Err(Error::InvalidConfig(format!("layer {i} has inconsistent shapes")));
            }
            let w = Array2::from_shape_vec((l.rows, l.cols), l.w)
                .map_err(|e| Error::InvalidConfig(format!("layer {i}: {e}")))?;
            layers.push(DenseLayer { w, b: Array1::from_vec(l.b) });
        }
        if self.standardizer.dim() != self.d_y + self.d_u {
            return Err(Error::InvalidConfig("standardizer does not match dimensions".into()));
        }
        let params = VectorFieldParams::from_layers(self.d_y, self.d_u, layers);
        Ok(TrainedModel {
            params,
            standardizer: self.standardizer,
            config: self.config,
            loss_trace: Vec::new(),
            validation_trace: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn save_model<F: Scalar>(model: &TrainedModel<F>, path: &Path) -> Result<()> {
    Checkpoint::from_model(model).save(path)
}

pub fn load_model<F: Scalar>(path: &Path) -> Result<TrainedModel<F>> {
    Checkpoint::<F>::load(path)?.into_model()
}

/// Header `y0,…,u0,…` followed by one row per atom.
pub fn write_points_csv<F: Scalar, W: Write>(
    mut w: W,
    points: &ArrayView2<'_, F>,
    d_y: usize,
    d_u: usize,
) -> Result<()> {
    if points.ncols() != d_y + d_u {
        return Err(Error::DimensionMismatch("points do not match the coordinate split".into()));
    }
    let header: Vec<String> = (0..d_y)
        .map(|k| format!("y{k}"))
        .chain((0..d_u).map(|k| format!("u{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for row in points.rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{}", x.to_f64_lossy())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Read a points CSV back; the split is recovered from the header names.
pub fn read_points_csv<F: Scalar, R: Read>(r: R) -> Result<DiscreteMeasure<F>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("empty points file".into()))??;
    let names: Vec<&str> = header.split(',').collect();
    let d_y = names.iter().take_while(|n| n.starts_with('y')).count();
    let d_u = names.len() - d_y;
    if d_y == 0 || d_u == 0 || !names[d_y..].iter().all(|n| n.starts_with('u')) {
        return Err(Error::InvalidConfig(format!("unrecognized points header '{header}'")));
    }
    let mut values: Vec<F> = Vec::new();
    let mut rows = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::InvalidConfig(format!(
                "row {rows} has {} fields, expected {}",
                fields.len(),
                names.len()
            )));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad number '{f}': {e}")))?;
            values.push(F::cast(v));
        }
        rows += 1;
    }
    let points = Array2::from_shape_vec((rows, names.len()), values)
        .map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    DiscreteMeasure::uniform(points, d_y, d_u)
}

/// Sample table: `sample_id,y…,u…` with the conditioning y repeated per row.
pub fn write_samples_csv<F: Scalar, W: Write>(
    mut w: W,
    y: &Array1<F>,
    u_samples: &ArrayView2<'_, F>,
) -> Result<()> {
    let header: Vec<String> = std::iter::once("sample_id".to_string())
        .chain((0..y.len()).map(|k| format!("y{k}")))
        .chain((0..u_samples.ncols()).map(|k| format!("u{k}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in u_samples.rows().into_iter().enumerate() {
        let mut line = vec![format!("{i}")];
        line.extend(y.iter().map(|x| format!("{}", x.to_f64_lossy())));
        line.extend(row.iter().map(|x| format!("{}", x.to_f64_lossy())));
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_loss_csv<F: Scalar, W: Write>(mut w: W, trace: &[F]) -> Result<()> {
    writeln!(w, "step,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{i},{}", l.to_f64_lossy())?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
