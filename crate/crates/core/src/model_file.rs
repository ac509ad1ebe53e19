//! Strict JSON model files: `{"kernel": {...}, "mixing": {...}, "meta": {...}}`.

use serde::{Deserialize, Serialize};

use crate::construction::{build_model, MrpModel};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MixingMeasure};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Set on models that are known not to be exchangeable.
    #[serde(default)]
    pub expects_rejection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kernel: KernelSpec,
    pub mixing: MixingMeasure,
    #[serde(default)]
    pub meta: ModelMeta,
}

impl ModelFile {
    /// Parses the schema; errors name the JSON path and the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text, "model file")
    }

    pub fn build(&self) -> Result<MrpModel> {
        build_model(self.kernel.clone(), self.mixing.clone())
    }
}

/// Deserializes `text`, reporting the JSON path of the first failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path.is_empty() || path == "." { String::new() } else { format!(" at `{path}`") };
        // the inner message already carries "at line L column C"
        Error::Config(format!("{what}{at}: {inner}"))
    })
}

pub const GAMMA_HALF: &str = include_str!("../models/gamma_half.json");
pub const BIVARIATE: &str = include_str!("../models/bivariate.json");
pub const EXAMPLE16: &str = include_str!("../models/example16.json");
pub const EXP_GAMMA: &str = include_str!("../models/exp_gamma.json");

/// Bundled models by file stem.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "gamma_half" => Some(GAMMA_HALF),
        "bivariate" => Some(BIVARIATE),
        "example16" => Some(EXAMPLE16),
        "exp_gamma" => Some(EXP_GAMMA),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Family;

    #[test]
    fn bundled_models_build() {
        for name in ["gamma_half", "bivariate", "example16", "exp_gamma"] {
            let f = ModelFile::parse(bundled(name).unwrap()).unwrap();
            let m = f.build().unwrap();
            assert_eq!(f.meta.expects_rejection, !m.is_proper_mrp, "{name}");
        }
        let f = ModelFile::parse(EXAMPLE16).unwrap();
        assert_eq!(f.kernel.family, Family::Exponential);
        assert!(f.meta.expects_rejection);
    }

    #[test]
    fn unknown_field_located() {
        let text = r#"{
  "kernel": {"family": "exponential"},
  "mixing": {"kind": "gamma", "rate": 1.0, "shape": 2.0, "colour": 3}
}"#;
        let err = ModelFile::parse(text).unwrap_err().to_string();
        assert!(err.contains("`mixing`") && err.contains("line 4"), "{err}");
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn unknown_top_level_field() {
        let text = r#"{"kernel": {"family": "exponential"}, "mixing": {"kind": "dirac", "theta": [1.0]}, "extra": 1}"#;
        assert!(matches!(ModelFile::parse(text), Err(Error::Config(_))));
    }

    #[test]
    fn malformed_json() {
        let err = ModelFile::parse("{\"kernel\": ").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn round_trip() {
        let f = ModelFile::parse(BIVARIATE).unwrap();
        let again = ModelFile::parse(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(f, again);
    }
}
