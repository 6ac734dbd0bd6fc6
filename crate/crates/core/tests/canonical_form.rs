use std::collections::BTreeMap;

use sentinel_core::attestation::{canonical_json, canonicalize, Predicate, Statement, Subject};
use sentinel_core::dataset::SampleCoverage;
use sentinel_core::{compress_block, lt_zero, CompressionAlg};
use serde_json::Value;

/// A second serializer: sorted keys by byte order, no whitespace, minimal
/// string escapes.
fn reference_serialize(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::String(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\r' => out.push_str("\\r"),
                    '\t' => out.push_str("\\t"),
                    '\u{8}' => out.push_str("\\b"),
                    '\u{c}' => out.push_str("\\f"),
                    c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                reference_serialize(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                reference_serialize(&Value::String(k.clone()), out);
                out.push(':');
                reference_serialize(&map[k], out);
            }
            out.push('}');
        }
    }
}

fn reference(v: &Value) -> String {
    let mut s = String::new();
    reference_serialize(v, &mut s);
    s
}

fn model_statement() -> Statement {
    let digest = compress_block(CompressionAlg::Sha256, b"abc");
    let layers = BTreeMap::from([
        ("b.weight".to_string(), compress_block(CompressionAlg::Sha256, b"").to_hex()),
        ("a.bias".to_string(), digest.to_hex()),
    ]);
    Statement::new(
        vec![Subject::new("model.bin", &digest.into())],
        Predicate {
            artifact: "model".into(),
            construction: "merkle".into(),
            compression: "sha256".into(),
            index_encoding: "none".into(),
            strategy: Some("per-layer".into()),
            block_size: Some(8192),
            ordered_per_layer: Some(false),
            block_count: Some(2),
            layer_digests: Some(layers),
            source_id: None,
            sample_count: None,
            label_coverage: None,
        },
    )
}

const GOLDEN_DATASET: &str = concat!(
    r#"{"_type":"https://in-toto.io/Statement/v1","#,
    r#""predicate":{"artifact":"dataset","compression":"blake2b","construction":"lattice","#,
    r#""index_encoding":"le64-sample-id-prefix","label_coverage":false,"sample_count":42,"source_id":3},"#,
    r#""predicateType":"urn:sentinel:predicate:artifact-digest:v1","#,
    r#""subject":[{"digest":{"lthash":""#,
    "00000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000000",
    r#""},"name":"source:3"}]}"#
);

const GOLDEN_MODEL: &str = concat!(
    r#"{"_type":"https://in-toto.io/Statement/v1","#,
    r#""predicate":{"artifact":"model","block_count":2,"block_size":8192,"compression":"sha256","#,
    r#""construction":"merkle","index_encoding":"none","#,
    r#""layer_digests":{"a.bias":"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad","#,
    r#""b.weight":"e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"},"#,
    r#""ordered_per_layer":false,"strategy":"per-layer"},"#,
    r#""predicateType":"urn:sentinel:predicate:artifact-digest:v1","#,
    r#""subject":[{"digest":{"sha256":"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"},"name":"model.bin"}]}"#
);

#[test]
fn golden_dataset_statement() {
    let stmt = Statement::for_dataset_source(3, &lt_zero(), 42, SampleCoverage::default());
    let bytes = canonicalize(&stmt).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), GOLDEN_DATASET);
}

#[test]
fn golden_model_statement() {
    let bytes = canonicalize(&model_statement()).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), GOLDEN_MODEL);
}

#[test]
fn both_serializers_agree() {
    for stmt in [model_statement(), Statement::for_dataset_source(9, &lt_zero(), 0, SampleCoverage { include_label: true })] {
        let v = serde_json::to_value(&stmt).unwrap();
        assert_eq!(String::from_utf8(canonicalize(&stmt).unwrap()).unwrap(), reference(&v));
    }
    let tricky: Value = serde_json::json!({
        "z": "quote\" slash\\ nl\n tab\t bell\u{7} snow\u{2603}",
        "a": [1, -2, {"y": null, "x": true}],
        "\u{e9}": 0,
        "B": u64::MAX,
    });
    assert_eq!(String::from_utf8(canonical_json(&tricky).unwrap()).unwrap(), reference(&tricky));
}

#[test]
fn reparse_is_idempotent() {
    let bytes = canonicalize(&model_statement()).unwrap();
    let back = Statement::from_slice(&bytes).unwrap();
    assert_eq!(canonicalize(&back).unwrap(), bytes);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(canonical_json(&v).unwrap(), bytes);
}
