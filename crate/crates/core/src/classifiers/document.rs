//! Self-describing JSON document for trained models.
//!
//! ```json
//! {
//!   "format": "clonevet-model",
//!   "version": "1",
//!   "feature_names": ["lineSimT1", ...],
//!   "feature_fingerprint": "<sha-256 hex>",
//!   "model": { "kind": "neural_net", ... }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a loaded model predicts
//! bit-identically to the one that was saved.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Model;
use crate::features::{feature_names, FEATURE_NAMES};
use crate::Error;

pub const MODEL_FORMAT: &str = "clonevet-model";
pub const MODEL_FORMAT_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: String,
    feature_names: Vec<String>,
    feature_fingerprint: String,
    model: serde_json::Value,
}

/// Feature names a model of the given input width reads.
pub fn input_names(dim: usize) -> Vec<String> {
    if dim == FEATURE_NAMES.len() {
        feature_names(false).into_iter().map(String::from).collect()
    } else if dim == FEATURE_NAMES.len() + 2 {
        feature_names(true).into_iter().map(String::from).collect()
    } else {
        (0..dim).map(|i| format!("x{i}")).collect()
    }
}

pub fn feature_fingerprint(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn serialize_model(model: &Model) -> Result<String, Error> {
    let names = input_names(model.input_dim());
    let doc = Document {
        format: MODEL_FORMAT.into(),
        version: MODEL_FORMAT_VERSION.into(),
        feature_fingerprint: feature_fingerprint(&names),
        feature_names: names,
        model: serde_json::to_value(model)?,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn deserialize_model(text: &str) -> Result<Model, Error> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::MalformedDocument(format!("unknown format {:?}", doc.format)));
    }
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch { expected: MODEL_FORMAT_VERSION.into(), found: doc.version });
    }
    let model: Model = serde_json::from_value(doc.model).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    let expected = input_names(model.input_dim());
    if doc.feature_names != expected || doc.feature_fingerprint != feature_fingerprint(&expected) {
        return Err(Error::FeatureOrderMismatch);
    }
    match &model {
        Model::NeuralNet(m) => m.check_invariants()?,
        Model::NaiveBayes(m) => m.check_invariants()?,
        Model::TfIdf(_) => {}
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{Activation, NeuralNetModel};

    #[test]
    fn zero_network_round_trip() {
        let model = Model::NeuralNet(NeuralNetModel::zeros(&[8, 107, 2], Activation::Sigmoid));
        let text = serialize_model(&model).unwrap();
        let back = deserialize_model(&text).unwrap();
        assert_eq!(back, model);
        let p = back.predict(&vec![0.25; 8].into()).unwrap();
        assert_eq!(p.probs, [0.5, 0.5]);
    }

    #[test]
    fn tampered_documents() {
        let model = Model::NeuralNet(NeuralNetModel::zeros(&[8, 3, 2], Activation::Relu));
        let text = serialize_model(&model).unwrap();

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["feature_fingerprint"] = "00".into();
        assert!(matches!(deserialize_model(&v.to_string()), Err(Error::FeatureOrderMismatch)));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["feature_names"][0] = "tokSimT1".into();
        assert!(matches!(deserialize_model(&v.to_string()), Err(Error::FeatureOrderMismatch)));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["version"] = "0".into();
        assert!(matches!(deserialize_model(&v.to_string()), Err(Error::VersionMismatch { .. })));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["model"]["layers"][0]["weights"] = serde_json::json!([1.0]);
        assert!(matches!(deserialize_model(&v.to_string()), Err(Error::MalformedDocument(_))));

        assert!(matches!(deserialize_model("{"), Err(Error::MalformedDocument(_))));
    }
}
