//! Versioned model persistence.
//!
//! The file stores, per component, the selection matrix, kernel
//! hyperparameters, applied jitter, retained training inputs and the weight
//! vector; plus the schedule, scaler metadata and training history. Numbers
//! are written in shortest round-trip form, and the Cholesky factor is
//! deterministically recomputed from the stored inputs on load, so a
//! save/load cycle leaves predictions (mean and standard deviation)
//! bit-identical.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datasets::Scaler;
use crate::error::{Error, Result};
use crate::gpr::{GprModel, KernelParams};
use crate::hdmr::{HdmrModel, TrainingSchedule};
use crate::projection::SelectionMatrix;

const FORMAT_NAME: &str = "hdmr-gpr-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    schedule: TrainingSchedule,
    scaler: Option<Scaler>,
    train_rmse_history: Vec<f64>,
    components: Vec<ComponentRecord>,
}

#[derive(Serialize, Deserialize)]
struct ComponentRecord {
    selection: SelectionMatrix,
    kernel: KernelParams,
    jitter: f64,
    train_inputs: DMatrix<f64>,
    weights: DVector<f64>,
}

pub fn save_model(model: &HdmrModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        schedule: *model.schedule(),
        scaler: model.scaler().cloned(),
        train_rmse_history: model.train_rmse_history().to_vec(),
        components: model
            .components()
            .iter()
            .map(|(selection, gpr)| ComponentRecord {
                selection: selection.clone(),
                kernel: *gpr.params(),
                jitter: gpr.jitter(),
                train_inputs: gpr.train_inputs().clone(),
                weights: gpr.weights().clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Numerical(format!("model serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HdmrModel> {
    let path = path.as_ref();
    let json = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&json)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    if file.format != FORMAT_NAME {
        return Err(Error::parse(format!(
            "{}: not a model file (format '{}')",
            path.display(),
            file.format
        )));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::parse(format!(
            "{}: unsupported model version {} (this build reads {})",
            path.display(),
            file.version,
            FORMAT_VERSION
        )));
    }
    let components = file
        .components
        .into_iter()
        .map(|rec| {
            let gpr = GprModel::from_parts(rec.train_inputs, rec.kernel, rec.weights, rec.jitter)?;
            Ok((rec.selection, gpr))
        })
        .collect::<Result<Vec<_>>>()?;
    HdmrModel::from_parts(
        components,
        file.schedule,
        file.scaler,
        file.train_rmse_history,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_coupled;
    use crate::hdmr::train;
    use crate::projection::one_d;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_identical() {
        let data = gen_coupled(80, 13).unwrap();
        let kernel = KernelParams::new(0.6, 1e-10).unwrap();
        let schedule = TrainingSchedule::new(20, 0.1, 1.0).unwrap();
        let (model, _) = train(&data, one_d(3).unwrap(), kernel, schedule).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(loaded.train_rmse_history(), model.train_rmse_history());
        assert_eq!(loaded.scaler(), model.scaler());

        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let xq = DMatrix::from_fn(50, 3, |_, _| rng.gen::<f64>());
        assert_eq!(model.predict(&xq).unwrap(), loaded.predict(&xq).unwrap());
        assert_eq!(
            model.predict_std(&xq).unwrap(),
            loaded.predict_std(&xq).unwrap()
        );
    }

    #[test]
    fn rejects_foreign_and_future_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");

        std::fs::write(&path, "{\"hello\": 1}").unwrap();
        assert!(load_model(&path).is_err());

        std::fs::write(
            &path,
            format!(
                "{{\"format\":\"{FORMAT_NAME}\",\"version\":99,\"schedule\":{{\"cycles\":1,\
                 \"scale_start\":0.1,\"scale_rate\":1.0}},\"scaler\":null,\
                 \"train_rmse_history\":[],\"components\":[]}}"
            ),
        )
        .unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
