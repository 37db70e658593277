//! Comparison estimators sharing one prediction contract with the GBM.

mod gp;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::gbm::{self, GbmModel};

pub use gp::{gp_fit, gp_fit_with_history, Expr, GpConfig, GpModel};

pub const BASELINE_FORMAT: &str = "refactor-effort-baseline/1";

/// Anything that maps a feature row to person-hours.
pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn predict(&self, x: &[f64]) -> Result<f64>;

    /// Schema the estimator was fitted on, when it depends on one.
    fn schema(&self) -> Option<&FeatureSchema> {
        None
    }

    fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.rows.iter().map(|r| self.predict(&r.features.values)).collect()
    }
}

impl Estimator for GbmModel {
    fn name(&self) -> &'static str {
        "GBM"
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        GbmModel::predict(self, x)
    }

    fn schema(&self) -> Option<&FeatureSchema> {
        Some(&self.schema)
    }

    fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        GbmModel::predict_dataset(self, ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub mean_hours: f64,
}

pub fn mean_fit(train: &Dataset) -> Result<MeanModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    let targets = train.targets();
    Ok(MeanModel {
        mean_hours: targets.iter().sum::<f64>() / targets.len() as f64,
    })
}

impl Estimator for MeanModel {
    fn name(&self) -> &'static str {
        "Mean"
    }

    fn predict(&self, _x: &[f64]) -> Result<f64> {
        Ok(self.mean_hours)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocomoConfig {
    pub a_coeff: f64,
    pub b_exponent_base: f64,
    pub scale_factor_sum: f64,
    pub effort_multiplier_product: f64,
    pub hours_per_person_month: f64,
}

impl Default for CocomoConfig {
    fn default() -> Self {
        Self {
            a_coeff: 2.94,
            b_exponent_base: 0.91,
            scale_factor_sum: 18.97,
            effort_multiplier_product: 1.0,
            hours_per_person_month: 152.0,
        }
    }
}

impl CocomoConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_coeff,
            self.b_exponent_base,
            self.scale_factor_sum,
            self.effort_multiplier_product,
            self.hours_per_person_month,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("COCOMO parameters must be positive"))
        }
    }

    pub fn exponent(&self) -> f64 {
        self.b_exponent_base + 0.01 * self.scale_factor_sum
    }
}

/// Post-architecture effort in person-hours for `size_ksloc` thousand lines.
pub fn cocomo_predict(size_ksloc: f64, cfg: &CocomoConfig) -> Result<f64> {
    cfg.validate()?;
    if !(size_ksloc > 0.0 && size_ksloc.is_finite()) {
        return Err(Error::contract(format!("COCOMO size must be positive, got {size_ksloc}")));
    }
    let pm = cfg.a_coeff * size_ksloc.powf(cfg.exponent()) * cfg.effort_multiplier_product;
    Ok(pm * cfg.hours_per_person_month)
}

/// COCOMO applied to dataset rows. The per-op size is the commit's changed
/// lines shared evenly among its ops, since rows carry no per-op line count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocomoEstimator {
    pub config: CocomoConfig,
}

impl CocomoEstimator {
    pub fn size_ksloc(x: &[f64]) -> Result<f64> {
        let schema = FeatureSchema::standard();
        if x.len() != schema.len() {
            return Err(Error::contract(format!(
                "feature vector has {} values, expected {}",
                x.len(),
                schema.len()
            )));
        }
        let cloc = x[schema.index_of("cloc").expect("cloc column")];
        let ops = x[schema.index_of("ops_in_commit").expect("ops column")].max(1.0);
        Ok(cloc / ops / 1000.0)
    }
}

impl Estimator for CocomoEstimator {
    fn name(&self) -> &'static str {
        "COCOMOII"
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        cocomo_predict(Self::size_ksloc(x)?, &self.config)
    }
}

/// Persisted form of a non-GBM estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "lowercase")]
pub enum BaselineModel {
    Mean(MeanModel),
    Cocomo(CocomoEstimator),
    Gp(GpModel),
}

impl BaselineModel {
    pub fn estimator(&self) -> &dyn Estimator {
        match self {
            BaselineModel::Mean(m) => m,
            BaselineModel::Cocomo(c) => c,
            BaselineModel::Gp(g) => g,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BaselineFile {
    format: String,
    model: BaselineModel,
}

pub fn save_baseline(model: &BaselineModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&BaselineFile {
        format: BASELINE_FORMAT.into(),
        model: model.clone(),
    })
    .map_err(|e| Error::ModelFormat(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Loads either a GBM or a baseline model file, dispatching on its format tag.
pub fn load_estimator(path: &Path) -> Result<Box<dyn Estimator>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read model {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(BASELINE_FORMAT) => {
            let file: BaselineFile =
                serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
            Ok(match file.model {
                BaselineModel::Mean(m) => Box::new(m),
                BaselineModel::Cocomo(c) => {
                    c.config.validate()?;
                    Box::new(c)
                }
                BaselineModel::Gp(g) => Box::new(g),
            })
        }
        _ => Ok(Box::new(gbm::model_from_str(&text)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbm::{evaluate, tests::synthetic};

    #[test]
    fn mean_examples() {
        let mut ds = synthetic(2, 1, |_, _| 0.0);
        ds.rows[0].target_hours = 2.0;
        ds.rows[1].target_hours = 4.0;
        let m = mean_fit(&ds).unwrap();
        assert_eq!(m.predict(&[1.0; 5]).unwrap(), 3.0);
        ds.rows.truncate(1);
        ds.rows[0].target_hours = 7.0;
        assert_eq!(mean_fit(&ds).unwrap().mean_hours, 7.0);
        ds.rows.clear();
        assert!(mean_fit(&ds).is_err());
    }

    #[test]
    fn mean_on_own_training_set_has_zero_r2() {
        let ds = synthetic(40, 2, |x, _| x[0] + 1.0);
        let m = mean_fit(&ds).unwrap();
        let r = evaluate(&m.predict_dataset(&ds).unwrap(), &ds.targets()).unwrap();
        assert!(r.r2.abs() < 1e-12, "{}", r.r2);
    }

    #[test]
    fn cocomo_examples() {
        let cfg = CocomoConfig::default();
        assert!((cocomo_predict(1.0, &cfg).unwrap() - 446.88).abs() < 1e-9);
        let small = cocomo_predict(0.025, &cfg).unwrap();
        // 2.94 × 0.025^1.0997 × 152
        assert!((small - 7.734_024_5).abs() < 1e-6, "{small}");
        let doubled = CocomoConfig { effort_multiplier_product: 2.0, ..cfg.clone() };
        assert!((cocomo_predict(3.0, &doubled).unwrap() - 2.0 * cocomo_predict(3.0, &cfg).unwrap()).abs() < 1e-9);
        assert!(cocomo_predict(0.0, &cfg).is_err());
        assert!(cocomo_predict(-1.0, &cfg).is_err());
        let mut previous = 0.0;
        for i in 1..200 {
            let v = cocomo_predict(i as f64 * 0.01, &cfg).unwrap();
            assert!(v > previous);
            previous = v;
        }
    }

    #[test]
    fn cocomo_row_size_shares_commit_lines() {
        let schema = FeatureSchema::standard();
        let mut x = vec![0.0; schema.len()];
        x[schema.index_of("cloc").unwrap()] = 50.0;
        x[schema.index_of("ops_in_commit").unwrap()] = 2.0;
        let est = CocomoEstimator { config: CocomoConfig::default() };
        assert_eq!(CocomoEstimator::size_ksloc(&x).unwrap(), 0.025);
        assert!((est.predict(&x).unwrap() - cocomo_predict(0.025, &est.config).unwrap()).abs() < 1e-12);
        x[schema.index_of("cloc").unwrap()] = 0.0;
        assert!(est.predict(&x).is_err());
    }

    #[test]
    fn baseline_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mean.json");
        save_baseline(&BaselineModel::Mean(MeanModel { mean_hours: 2.5 }), &path).unwrap();
        let est = load_estimator(&path).unwrap();
        assert_eq!(est.name(), "Mean");
        assert_eq!(est.predict(&[0.0]).unwrap(), 2.5);

        let path = dir.path().join("cocomo.json");
        save_baseline(&BaselineModel::Cocomo(CocomoEstimator { config: CocomoConfig::default() }), &path).unwrap();
        assert_eq!(load_estimator(&path).unwrap().name(), "COCOMOII");

        std::fs::write(&path, "{\"format\": \"refactor-effort-gbm/9\"}").unwrap();
        assert!(matches!(load_estimator(&path), Err(Error::ModelVersion { .. })));
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(load_estimator(&path), Err(Error::ModelFormat(_))));
    }
}
