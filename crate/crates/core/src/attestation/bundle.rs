use std::collections::BTreeMap;
use std::fmt;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use p256::ecdsa::signature::{Signer, Verifier};
use p256::ecdsa::Signature as EcdsaSignature;
use serde::{Deserialize, Serialize};

use super::keys::{KeyPair, PublicKey};
use super::{canonicalize, Statement};
use crate::artifact::ArtifactDigest;
use crate::error::Result;

pub const PAYLOAD_TYPE: &str = "application/vnd.in-toto+json";
pub const BUNDLE_MEDIA_TYPE: &str = "application/vnd.sentinel.bundle+json;version=1";
pub const BUNDLE_EXTENSION: &str = ".bundle.json";

/// DSSE v1 pre-authentication encoding:
/// `"DSSEv1" SP len(type) SP type SP len(body) SP body`, lengths in ASCII
/// decimal.
pub fn pae(payload_type: &str, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + payload_type.len() + 32);
    out.extend_from_slice(b"DSSEv1 ");
    out.extend_from_slice(payload_type.len().to_string().as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload_type.as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload.len().to_string().as_bytes());
    out.push(b' ');
    out.extend_from_slice(payload);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub keyid: String,
    /// Base64 of the DER-encoded ECDSA signature.
    pub sig: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    /// Base64 of the canonical Statement.
    pub payload: String,
    #[serde(rename = "payloadType")]
    pub payload_type: String,
    pub signatures: Vec<Signature>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeyMaterial {
    pub keyid: String,
    /// Uncompressed SEC1 point, lowercase hex.
    pub point: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationMaterial {
    #[serde(rename = "publicKey")]
    pub public_key: PublicKeyMaterial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    #[serde(rename = "mediaType")]
    pub media_type: String,
    #[serde(rename = "verificationMaterial")]
    pub verification_material: VerificationMaterial,
    #[serde(rename = "dsseEnvelope")]
    pub envelope: Envelope,
}

impl Bundle {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn payload_bytes(&self) -> Result<Vec<u8>> {
        B64.decode(&self.envelope.payload)
            .map_err(|e| crate::error::Error::Format(format!("payload base64: {e}")))
    }

    /// The embedded statement, without checking any signature.
    pub fn statement_unverified(&self) -> Result<Statement> {
        Statement::from_slice(&self.payload_bytes()?)
    }
}

/// Signs the canonical statement (SHA-256 over its PAE, RFC 6979 nonces)
/// and embeds the public key.
pub fn sign_bundle(stmt: &Statement, key: &KeyPair) -> Result<Bundle> {
    let payload = canonicalize(stmt)?;
    let sig: EcdsaSignature = key.signing.sign(&pae(PAYLOAD_TYPE, &payload));
    let public = key.public();
    let keyid = public.key_id();
    Ok(Bundle {
        media_type: BUNDLE_MEDIA_TYPE.into(),
        verification_material: VerificationMaterial {
            public_key: PublicKeyMaterial {
                keyid: keyid.clone(),
                point: public.to_hex(),
            },
        },
        envelope: Envelope {
            payload: B64.encode(&payload),
            payload_type: PAYLOAD_TYPE.into(),
            signatures: vec![Signature {
                keyid,
                sig: B64.encode(sig.to_der().as_bytes()),
            }],
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Ok,
    SignatureInvalid,
    DigestMismatch,
    Malformed,
}

impl Verdict {
    pub const fn as_str(self) -> &'static str {
        match self {
            Verdict::Ok => "OK",
            Verdict::SignatureInvalid => "SIGNATURE_INVALID",
            Verdict::DigestMismatch => "DIGEST_MISMATCH",
            Verdict::Malformed => "MALFORMED",
        }
    }

    pub fn is_ok(self) -> bool {
        self == Verdict::Ok
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub detail: String,
    /// The signed statement, once the signature has checked out.
    pub statement: Option<Statement>,
}

impl VerifyReport {
    fn fail(verdict: Verdict, detail: impl Into<String>) -> Self {
        VerifyReport {
            verdict,
            detail: detail.into(),
            statement: None,
        }
    }
}

/// Checks bundle structure and the envelope signature, then parses the
/// signed statement. The signature is checked over the raw payload before
/// the payload is interpreted, so any change to signed bytes reports
/// SIGNATURE_INVALID. With `trusted`, the embedded key must match it.
pub fn verify_signature(bundle_bytes: &[u8], trusted: Option<&PublicKey>) -> std::result::Result<Statement, VerifyReport> {
    use Verdict::*;
    let bundle = Bundle::from_slice(bundle_bytes).map_err(|e| VerifyReport::fail(Malformed, e.to_string()))?;
    if bundle.media_type != BUNDLE_MEDIA_TYPE {
        return Err(VerifyReport::fail(Malformed, format!("unknown media type `{}`", bundle.media_type)));
    }
    if bundle.envelope.payload_type != PAYLOAD_TYPE {
        return Err(VerifyReport::fail(
            Malformed,
            format!("unexpected payload type `{}`", bundle.envelope.payload_type),
        ));
    }
    if bundle.envelope.signatures.is_empty() {
        return Err(VerifyReport::fail(Malformed, "envelope carries no signatures"));
    }
    let embedded = PublicKey::from_hex(&bundle.verification_material.public_key.point)
        .map_err(|e| VerifyReport::fail(Malformed, e.to_string()))?;
    let payload = bundle.payload_bytes().map_err(|e| VerifyReport::fail(Malformed, e.to_string()))?;
    let sigs = bundle
        .envelope
        .signatures
        .iter()
        .map(|s| B64.decode(&s.sig))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| VerifyReport::fail(Malformed, format!("signature base64: {e}")))?;

    if let Some(t) = trusted {
        if *t != embedded {
            return Err(VerifyReport::fail(SignatureInvalid, "bundle was not signed by the trusted key"));
        }
    }
    let message = pae(&bundle.envelope.payload_type, &payload);
    let valid = sigs.iter().any(|der| {
        EcdsaSignature::from_der(der).is_ok_and(|sig| embedded.0.verify(&message, &sig).is_ok())
    });
    if !valid {
        return Err(VerifyReport::fail(SignatureInvalid, "no signature verifies over the payload"));
    }
    Statement::from_slice(&payload).map_err(|e| VerifyReport::fail(Malformed, format!("signed payload: {e}")))
}

/// Every subject must have a recomputed digest under the same algorithm,
/// and they must all be equal.
pub fn check_subjects(stmt: &Statement, recomputed: &BTreeMap<String, ArtifactDigest>) -> VerifyReport {
    let mut problems = Vec::new();
    for s in &stmt.subject {
        match recomputed.get(&s.name) {
            None => problems.push(format!("{}: no recomputed digest", s.name)),
            Some(d) => match s.digest.get(d.alg_name()) {
                None => problems.push(format!("{}: no {} digest in statement", s.name, d.alg_name())),
                Some(expected) if *expected != d.to_hex() => {
                    problems.push(format!("{}: signed {expected}, recomputed {}", s.name, d.to_hex()))
                }
                Some(_) => {}
            },
        }
    }
    let (verdict, detail) = if problems.is_empty() {
        (Verdict::Ok, format!("{} subject(s) verified", stmt.subject.len()))
    } else {
        (Verdict::DigestMismatch, problems.join("; "))
    };
    VerifyReport {
        verdict,
        detail,
        statement: Some(stmt.clone()),
    }
}

/// Total over its inputs: MALFORMED, then SIGNATURE_INVALID, then
/// DIGEST_MISMATCH, then OK.
pub fn verify_bundle(
    bundle_bytes: &[u8],
    recomputed: &BTreeMap<String, ArtifactDigest>,
    trusted: Option<&PublicKey>,
) -> VerifyReport {
    match verify_signature(bundle_bytes, trusted) {
        Ok(stmt) => check_subjects(&stmt, recomputed),
        Err(report) => report,
    }
}
