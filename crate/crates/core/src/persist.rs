//! On-disk model files.
//!
//! A model file is a JSON envelope holding the model, the ids of rows deleted
//! since the source dataset was loaded, and the fingerprint of the live data
//! the model describes. Loading checks the fingerprint so a model is never
//! applied to data it was not trained on.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BaselineModel;
use crate::dataset::{DataMatrix, RowId};
use crate::{DcModel, Error, QkModel, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "model", rename_all = "lowercase")]
pub enum AnyModel {
    Baseline(BaselineModel<f64>),
    Qkmeans(QkModel<f64>),
    Dckmeans(DcModel<f64>),
}

impl AnyModel {
    pub fn name(&self) -> &'static str {
        match self {
            AnyModel::Baseline(_) => "baseline",
            AnyModel::Qkmeans(_) => "qkmeans",
            AnyModel::Dckmeans(_) => "dckmeans",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub dataset_fingerprint: String,
    pub n_rows: usize,
    pub deleted: Vec<RowId>,
    #[serde(flatten)]
    pub model: AnyModel,
}

impl ModelFile {
    pub fn new(model: AnyModel, data: &DataMatrix<f64>) -> Self {
        let mut file = Self {
            format_version: MODEL_FORMAT_VERSION,
            dataset_fingerprint: String::new(),
            n_rows: 0,
            deleted: vec![],
            model,
        };
        file.sync(data);
        file
    }

    /// Replays the recorded deletions on a freshly loaded dataset and checks
    /// that the result is the data the model describes.
    pub fn attach(&self, data: &mut DataMatrix<f64>) -> Result<()> {
        if data.n_rows() != self.n_rows {
            return Err(Error::ModelMismatch(format!(
                "model expects {} rows, dataset has {}",
                self.n_rows,
                data.n_rows()
            )));
        }
        for &id in &self.deleted {
            if data.is_live(id) {
                data.delete_row(id)?;
            }
        }
        if data.fingerprint() != self.dataset_fingerprint {
            return Err(Error::ModelMismatch("dataset fingerprint differs from the one recorded in the model".into()));
        }
        Ok(())
    }

    /// Refreshes the deletion list and fingerprint after the model changed.
    pub fn sync(&mut self, data: &DataMatrix<f64>) {
        self.dataset_fingerprint = data.fingerprint();
        self.n_rows = data.n_rows();
        self.deleted = (0..data.n_rows()).map(RowId).filter(|&id| !data.is_live(id)).collect();
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelMismatch(format!("unsupported model format version {}", file.format_version)));
        }
        Ok(file)
    }

    /// Writes to a temporary file in the target directory, then renames it
    /// over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let tmp = dir.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("model"),
            std::process::id()
        ));
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer(&mut out, self)?;
            out.flush()?;
            out.get_ref().sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}
