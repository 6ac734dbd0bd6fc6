use std::fs;
use std::path::{Path, PathBuf};

use p256::ecdsa::{SigningKey, VerifyingKey};
use p256::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey, LineEnding};
use rand_core::OsRng;
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

/// P-256 verification key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey(pub(crate) VerifyingKey);

impl PublicKey {
    /// SEC1 uncompressed point (65 bytes).
    pub fn to_uncompressed(&self) -> Vec<u8> {
        self.0.to_encoded_point(false).as_bytes().to_vec()
    }

    pub fn from_sec1(bytes: &[u8]) -> Result<Self> {
        VerifyingKey::from_sec1_bytes(bytes)
            .map(PublicKey)
            .map_err(|_| Error::Key("not a valid P-256 public point".into()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_uncompressed())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Key(format!("public key hex: {e}")))?;
        PublicKey::from_sec1(&bytes)
    }

    pub fn key_id(&self) -> String {
        key_id(&self.to_uncompressed())
    }

    /// SubjectPublicKeyInfo PEM.
    pub fn to_pem(&self) -> Result<String> {
        self.0
            .to_public_key_pem(LineEnding::LF)
            .map_err(|e| Error::Key(format!("encoding public key: {e}")))
    }

    pub fn from_pem(pem: &str) -> Result<Self> {
        VerifyingKey::from_public_key_pem(pem)
            .map(PublicKey)
            .map_err(|e| Error::Key(format!("decoding public key: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        PublicKey::from_pem(&fs::read_to_string(path)?)
    }
}

/// Hex SHA-256 of the uncompressed public point.
pub fn key_id(uncompressed_point: &[u8]) -> String {
    hex::encode(Sha256::digest(uncompressed_point))
}

/// P-256 signing key and its public point.
#[derive(Clone)]
pub struct KeyPair {
    pub(crate) signing: SigningKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public().to_hex()).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate() -> Self {
        KeyPair {
            signing: SigningKey::random(&mut OsRng),
        }
    }

    /// From a big-endian 32-byte scalar in `[1, n-1]`.
    pub fn from_scalar_bytes(bytes: &[u8]) -> Result<Self> {
        SigningKey::from_slice(bytes)
            .map(|signing| KeyPair { signing })
            .map_err(|_| Error::Key("scalar is not in [1, n-1]".into()))
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(*self.signing.verifying_key())
    }

    pub fn scalar_bytes(&self) -> Vec<u8> {
        self.signing.to_bytes().to_vec()
    }

    /// PKCS#8 PEM.
    pub fn to_pem(&self) -> Result<String> {
        self.signing
            .to_pkcs8_pem(LineEnding::LF)
            .map(|pem| pem.to_string())
            .map_err(|e| Error::Key(format!("encoding private key: {e}")))
    }

    pub fn from_pem(pem: &str) -> Result<Self> {
        SigningKey::from_pkcs8_pem(pem)
            .map(|signing| KeyPair { signing })
            .map_err(|e| Error::Key(format!("decoding private key: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        KeyPair::from_pem(&fs::read_to_string(path)?)
    }

    pub fn key_paths(prefix: &Path) -> (PathBuf, PathBuf) {
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        (with(".key"), with(".pub"))
    }

    /// Writes `<prefix>.key` and `<prefix>.pub`. Refuses to replace existing
    /// files unless `force`.
    pub fn store(&self, prefix: &Path, force: bool) -> Result<(PathBuf, PathBuf)> {
        let (private_path, public_path) = KeyPair::key_paths(prefix);
        if !force {
            for p in [&private_path, &public_path] {
                if p.exists() {
                    return Err(Error::Io(std::io::Error::new(
                        std::io::ErrorKind::AlreadyExists,
                        format!("{} already exists", p.display()),
                    )));
                }
            }
        }
        write_private(&private_path, self.to_pem()?.as_bytes())?;
        fs::write(&public_path, self.public().to_pem()?)?;
        Ok((private_path, public_path))
    }
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}
