mod support;

use std::collections::BTreeSet;

use sentinel_core::dataset::{iterate_batches, run_pipeline, DatasetManifest, SampleCoverage};
use sentinel_core::synthetic;
use support::oracle;

#[test]
fn stream_matches_oracle_and_isolates_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = synthetic::dataset(1000, 6, 1, 200, 77);
    let declared: BTreeSet<u32> = (0..6).collect();
    let expected = oracle::dataset_digests(records.iter().map(|r| (r.sample_id, r.source_id, r.data.as_slice())));

    let path = DatasetManifest::write(&records, &declared, dir.path(), "clean").unwrap();
    let manifest = DatasetManifest::load(&path).unwrap();
    let clean = run_pipeline(iterate_batches(&manifest, 64, 3).unwrap(), &declared, SampleCoverage::default())
        .unwrap()
        .finalize();
    for (s, (bytes, n)) in &expected {
        assert_eq!(clean[s].digest.to_bytes().as_slice(), bytes.as_slice());
        assert_eq!(clean[s].count, *n);
    }

    let victim = 417;
    records[victim].data[0] ^= 0x10;
    let path = DatasetManifest::write(&records, &declared, dir.path(), "tampered").unwrap();
    let manifest = DatasetManifest::load(&path).unwrap();
    let tampered = run_pipeline(iterate_batches(&manifest, 100, 8).unwrap(), &declared, SampleCoverage::default())
        .unwrap()
        .finalize();
    let changed: Vec<u32> = declared.iter().copied().filter(|s| tampered[s] != clean[s]).collect();
    assert_eq!(changed, [records[victim].source_id]);
}
