use std::fs;

use anyhow::{Context, Result};
use sentinel_core::attestation::Bundle;
use serde_json::json;

use crate::{InspectArgs, Status};

/// Shows the payload as-is. Nothing here is verified.
pub fn run(args: &InspectArgs, json: bool) -> Result<Status> {
    let bytes = fs::read(&args.bundle).with_context(|| format!("reading {}", args.bundle.display()))?;
    let bundle = Bundle::from_slice(&bytes).context("parsing bundle")?;
    let payload: serde_json::Value =
        serde_json::from_slice(&bundle.payload_bytes()?).context("payload is not JSON")?;
    if json {
        println!(
            "{}",
            json!({
                "mediaType": bundle.media_type,
                "keyid": bundle.verification_material.public_key.keyid,
                "payloadType": bundle.envelope.payload_type,
                "signatures": bundle.envelope.signatures.len(),
                "statement": payload,
            })
        );
    } else {
        println!("media type:   {}", bundle.media_type);
        println!("key id:       {}", bundle.verification_material.public_key.keyid);
        println!("payload type: {}", bundle.envelope.payload_type);
        println!("signatures:   {}", bundle.envelope.signatures.len());
        println!("(unverified)");
        println!("{}", serde_json::to_string_pretty(&payload)?);
    }
    Ok(Status::Success)
}
