//! Signed attestations: an in-toto Statement wrapped in a DSSE envelope,
//! wrapped in a bundle carrying the verification key.

mod bundle;
mod keys;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use bundle::{
    check_subjects, pae, sign_bundle, verify_bundle, verify_signature, Bundle, Envelope, PublicKeyMaterial, Signature,
    VerificationMaterial, Verdict, VerifyReport, BUNDLE_EXTENSION, BUNDLE_MEDIA_TYPE, PAYLOAD_TYPE,
};
pub use keys::{key_id, KeyPair, PublicKey};

use crate::artifact::{ArtifactDigest, LATTICE_ALG_NAME};
use crate::compression::CompressionAlg;
use crate::dataset::SampleCoverage;
use crate::error::{Error, Result};
use crate::model::{Construction, HashConfig, IndexEncoding, ModelDigestResult, Strategy};

pub const STATEMENT_TYPE: &str = "https://in-toto.io/Statement/v1";
pub const PREDICATE_TYPE: &str = "urn:sentinel:predicate:artifact-digest:v1";

pub const KIND_MODEL: &str = "model";
pub const KIND_DATASET: &str = "dataset";

/// Subject name used for a data provider's share of a dataset.
pub fn source_subject_name(source_id: u32) -> String {
    format!("source:{source_id}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subject {
    pub name: String,
    /// Algorithm name to lowercase hex digest.
    pub digest: BTreeMap<String, String>,
}

impl Subject {
    pub fn new(name: impl Into<String>, digest: &ArtifactDigest) -> Self {
        let mut map = BTreeMap::new();
        map.insert(digest.alg_name().to_string(), digest.to_hex());
        Subject {
            name: name.into(),
            digest: map,
        }
    }
}

/// Everything a verifier needs to replay the hashing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub artifact: String,
    pub construction: String,
    pub compression: String,
    pub index_encoding: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordered_per_layer: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_digests: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_coverage: Option<bool>,
}

impl Predicate {
    pub fn for_model(result: &ModelDigestResult) -> Self {
        let cfg = &result.config;
        Predicate {
            artifact: KIND_MODEL.into(),
            construction: cfg.construction.name().into(),
            compression: cfg.alg.name().into(),
            index_encoding: cfg.index_encoding().name().into(),
            strategy: Some(cfg.strategy.name().into()),
            block_size: Some(cfg.block_size as u64),
            ordered_per_layer: Some(cfg.ordered_per_layer),
            block_count: Some(result.block_count),
            layer_digests: result
                .layer_digests
                .as_ref()
                .map(|layers| layers.iter().map(|(n, d)| (n.clone(), d.to_hex())).collect()),
            source_id: None,
            sample_count: None,
            label_coverage: None,
        }
    }

    pub fn for_dataset_source(source_id: u32, sample_count: u64, coverage: SampleCoverage) -> Self {
        Predicate {
            artifact: KIND_DATASET.into(),
            construction: Construction::Lattice.name().into(),
            compression: CompressionAlg::Blake2b.name().into(),
            index_encoding: coverage.index_encoding().name().into(),
            strategy: None,
            block_size: None,
            ordered_per_layer: None,
            block_count: None,
            layer_digests: None,
            source_id: Some(source_id),
            sample_count: Some(sample_count),
            label_coverage: Some(coverage.include_label),
        }
    }

    fn require_kind(&self, kind: &str) -> Result<()> {
        if self.artifact != kind {
            return Err(Error::Validation(format!(
                "attestation is for a {}, not a {kind}",
                self.artifact
            )));
        }
        Ok(())
    }

    /// The hashing configuration recorded for a model.
    pub fn model_config(&self) -> Result<HashConfig> {
        self.require_kind(KIND_MODEL)?;
        let missing = |f: &str| Error::Format(format!("model predicate lacks `{f}`"));
        let cfg = HashConfig {
            construction: self.construction.parse()?,
            alg: self.compression.parse()?,
            strategy: self.strategy.as_deref().ok_or_else(|| missing("strategy"))?.parse::<Strategy>()?,
            block_size: usize::try_from(self.block_size.ok_or_else(|| missing("block_size"))?)
                .map_err(|_| Error::Config("block size does not fit in memory".into()))?,
            ordered_per_layer: self.ordered_per_layer.unwrap_or(false),
        };
        cfg.validate()?;
        let recorded: IndexEncoding = self.index_encoding.parse()?;
        if recorded != cfg.index_encoding() {
            return Err(Error::Config(format!(
                "index encoding `{recorded}` does not match {} {}",
                cfg.construction, cfg.strategy
            )));
        }
        Ok(cfg)
    }

    /// The sample coverage recorded for a dataset source.
    pub fn dataset_coverage(&self) -> Result<SampleCoverage> {
        self.require_kind(KIND_DATASET)?;
        if self.construction != Construction::Lattice.name() || self.compression != CompressionAlg::Blake2b.name() {
            return Err(Error::Config(format!(
                "dataset digests are lattice/blake2b, predicate says {}/{}",
                self.construction, self.compression
            )));
        }
        let coverage = SampleCoverage {
            include_label: self.label_coverage.unwrap_or(false),
        };
        let recorded: IndexEncoding = self.index_encoding.parse()?;
        if recorded != coverage.index_encoding() {
            return Err(Error::Config(format!(
                "index encoding `{recorded}` does not match label coverage {}",
                coverage.include_label
            )));
        }
        Ok(coverage)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    #[serde(rename = "_type")]
    pub type_uri: String,
    pub subject: Vec<Subject>,
    #[serde(rename = "predicateType")]
    pub predicate_type: String,
    pub predicate: Predicate,
}

impl Statement {
    pub fn new(subject: Vec<Subject>, predicate: Predicate) -> Self {
        Statement {
            type_uri: STATEMENT_TYPE.into(),
            subject,
            predicate_type: PREDICATE_TYPE.into(),
            predicate,
        }
    }

    pub fn for_model(subject_name: impl Into<String>, result: &ModelDigestResult) -> Self {
        Statement::new(
            vec![Subject::new(subject_name, &result.model_digest)],
            Predicate::for_model(result),
        )
    }

    /// One statement per data provider.
    pub fn for_dataset_source(
        source_id: u32,
        digest: &crate::lattice::LatticeDigest,
        sample_count: u64,
        coverage: SampleCoverage,
    ) -> Self {
        Statement::new(
            vec![Subject::new(source_subject_name(source_id), &ArtifactDigest::Lattice(*digest))],
            Predicate::for_dataset_source(source_id, sample_count, coverage),
        )
    }

    /// Type URIs known, at least one subject, every digest the right length
    /// for its algorithm, layer digests well-formed.
    pub fn validate(&self) -> Result<()> {
        if self.type_uri != STATEMENT_TYPE {
            return Err(Error::format(format!("unsupported statement type `{}`", self.type_uri)));
        }
        if self.predicate_type != PREDICATE_TYPE {
            return Err(Error::format(format!("unsupported predicate type `{}`", self.predicate_type)));
        }
        if self.subject.is_empty() {
            return Err(Error::format("statement has no subjects"));
        }
        for s in &self.subject {
            if s.digest.is_empty() {
                return Err(Error::format(format!("subject `{}` has no digests", s.name)));
            }
            for (alg, hex_digest) in &s.digest {
                ArtifactDigest::parse(alg, hex_digest)?;
            }
        }
        if let Some(layers) = &self.predicate.layer_digests {
            let alg = match self.predicate.construction.as_str() {
                "lattice" => LATTICE_ALG_NAME,
                _ => self.predicate.compression.as_str(),
            };
            for hex_digest in layers.values() {
                ArtifactDigest::parse(alg, hex_digest)?;
            }
        }
        Ok(())
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let stmt: Statement = serde_json::from_slice(bytes)?;
        stmt.validate()?;
        Ok(stmt)
    }
}

/// Compact JSON with object keys sorted, UTF-8. Floats are rejected so the
/// output never depends on number formatting.
pub fn canonical_json(value: &Value) -> Result<Vec<u8>> {
    fn check(v: &Value) -> Result<()> {
        match v {
            Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
                Err(Error::format(format!("non-integer number {n} has no canonical form")))
            }
            Value::Array(items) => items.iter().try_for_each(check),
            Value::Object(map) => map.values().try_for_each(check),
            _ => Ok(()),
        }
    }
    check(value)?;
    // serde_json's map is ordered by key, so plain compact output is canonical.
    Ok(serde_json::to_vec(value)?)
}

pub fn canonicalize(stmt: &Statement) -> Result<Vec<u8>> {
    stmt.validate()?;
    canonical_json(&serde_json::to_value(stmt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::lt_zero;
    use crate::model::hash_model;
    use crate::synthetic;

    #[test]
    fn keys_are_sorted() {
        let v: Value = serde_json::from_str(r#"{"b":1,"a":{"z":[true,null],"y":"s"}}"#).unwrap();
        assert_eq!(canonical_json(&v).unwrap(), br#"{"a":{"y":"s","z":[true,null]},"b":1}"#);
        let float: Value = serde_json::from_str(r#"{"x":1.5}"#).unwrap();
        assert!(matches!(canonical_json(&float), Err(Error::Format(_))));
    }

    #[test]
    fn model_predicate_replays_config() {
        let model = synthetic::random_model(5, 1, 3000, 3);
        for cfg in [
            HashConfig::merkle(CompressionAlg::Sha3_256, Strategy::InPlace).with_block_size(1024),
            HashConfig::lattice(Strategy::PerLayer).ordered(true),
            HashConfig::lattice(Strategy::Coalesced).with_block_size(64),
        ] {
            let result = hash_model(&cfg, &model).unwrap();
            let stmt = Statement::for_model("m.bin", &result);
            let bytes = canonicalize(&stmt).unwrap();
            let back = Statement::from_slice(&bytes).unwrap();
            assert_eq!(back, stmt);
            assert_eq!(canonicalize(&back).unwrap(), bytes);
            assert_eq!(back.predicate.model_config().unwrap(), cfg);
            assert!(back.predicate.dataset_coverage().is_err());
        }
    }

    #[test]
    fn per_layer_predicate_lists_every_tensor() {
        let model = synthetic::shaped_model(synthetic::VGG19, 1.0 / 4096.0, 1);
        let result = hash_model(&HashConfig::lattice(Strategy::PerLayer), &model).unwrap();
        let stmt = Statement::for_model("vgg.bin", &result);
        assert_eq!(stmt.predicate.layer_digests.as_ref().unwrap().len(), 38);
        stmt.validate().unwrap();
    }

    #[test]
    fn dataset_predicate() {
        let cov = SampleCoverage { include_label: true };
        let stmt = Statement::for_dataset_source(4, &lt_zero(), 10, cov);
        assert_eq!(stmt.subject[0].name, "source:4");
        assert_eq!(stmt.predicate.dataset_coverage().unwrap(), cov);
        assert!(stmt.predicate.model_config().is_err());
    }

    #[test]
    fn invalid_statements_rejected() {
        let mut stmt = Statement::for_dataset_source(0, &lt_zero(), 0, SampleCoverage::default());
        stmt.subject[0].digest.insert("lthash".into(), "abcd".into());
        assert!(canonicalize(&stmt).is_err());
        stmt.subject.clear();
        assert!(stmt.validate().is_err());
        let mut wrong_type = Statement::for_dataset_source(0, &lt_zero(), 0, SampleCoverage::default());
        wrong_type.type_uri = "x".into();
        assert!(wrong_type.validate().is_err());
        let mut mismatch = Statement::for_dataset_source(0, &lt_zero(), 0, SampleCoverage::default());
        mismatch.predicate.index_encoding = IndexEncoding::SampleIdLabel.name().into();
        assert!(mismatch.predicate.dataset_coverage().is_err());
    }

    #[test]
    fn unknown_predicate_fields_rejected() {
        let stmt = Statement::for_dataset_source(0, &lt_zero(), 0, SampleCoverage::default());
        let mut v = serde_json::to_value(&stmt).unwrap();
        v["predicate"]["surprise"] = Value::Bool(true);
        assert!(Statement::from_slice(&serde_json::to_vec(&v).unwrap()).is_err());
    }
}
