use anyhow::{Context, Result};
use sentinel_core::attestation::KeyPair;
use serde_json::json;

use crate::{KeygenArgs, Status};

pub fn keygen(args: &KeygenArgs, json: bool) -> Result<Status> {
    let kp = KeyPair::generate();
    let (private_path, public_path) = kp
        .store(&args.out, args.force)
        .context("writing key pair (use --force to overwrite)")?;
    let keyid = kp.public().key_id();
    if json {
        println!(
            "{}",
            json!({"private_key": private_path, "public_key": public_path, "keyid": keyid})
        );
    } else {
        println!("private key: {}", private_path.display());
        println!("public key:  {}", public_path.display());
        println!("key id:      {keyid}");
    }
    Ok(Status::Success)
}
