use proptest::prelude::*;
use rebalance_core::io::{decode_binary, encode_binary, fingerprint, load_dataset, parse_csv, save_dataset, to_csv, Format, FormatError};
use rebalance_core::{EmbeddingDataset, EmbeddingVector, LabeledEmbedding, Origin};
use rebalance_core::dataset::SyntheticKind;

fn arb_dataset(synthetic: bool) -> impl Strategy<Value = EmbeddingDataset> {
    (1usize..6, 2u32..5).prop_flat_map(move |(dim, classes)| {
        let row = (prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), dim), 0..classes, any::<bool>());
        prop::collection::vec(row, 0..30).prop_map(move |rows| {
            let samples = rows
                .into_iter()
                .map(|(v, label, syn)| {
                    let vector = EmbeddingVector::new(v.into_iter().map(f64::from).collect()).unwrap();
                    let origin = if synthetic && syn { Origin::Synthetic(SyntheticKind::Unspecified) } else { Origin::Real };
                    LabeledEmbedding { vector, label, origin }
                })
                .collect();
            EmbeddingDataset::new(dim, classes, samples).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn binary_round_trip_is_exact(ds in arb_dataset(true)) {
        let bytes = encode_binary(&ds).unwrap();
        let back = decode_binary(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode_binary(&back).unwrap(), bytes);
    }

    #[test]
    fn csv_round_trip_is_exact(ds in arb_dataset(false)) {
        prop_assume!(!ds.is_empty());
        let back = parse_csv(&to_csv(&ds), Some(ds.class_count())).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn every_truncation_is_reported(ds in arb_dataset(true)) {
        let bytes = encode_binary(&ds).unwrap();
        for cut in 0..bytes.len() {
            match decode_binary(&bytes[..cut]) {
                Err(FormatError::Truncated { offset, needed, .. }) => {
                    prop_assert!(offset <= cut && needed > 0);
                }
                other => prop_assert!(false, "cut at {} gave {:?}", cut, other.map(|d| d.len())),
            }
        }
    }
}

#[test]
fn trailing_bytes_and_bad_magic_are_rejected() {
    let ds = EmbeddingDataset::from_rows(2, 2, vec![(vec![1.0, 2.0], 0), (vec![3.0, 4.0], 1)]).unwrap();
    let mut bytes = encode_binary(&ds).unwrap();
    let end = bytes.len();
    bytes.push(0);
    assert!(matches!(decode_binary(&bytes), Err(FormatError::TrailingBytes { offset, extra: 1 }) if offset == end));
    bytes[0] = b'X';
    assert!(matches!(decode_binary(&bytes), Err(FormatError::BadMagic(_))));
}

#[test]
fn synthetic_origin_survives_as_a_flag() {
    let mut samples = vec![LabeledEmbedding::real(EmbeddingVector::new(vec![0.5]).unwrap(), 0)];
    samples.push(LabeledEmbedding { vector: EmbeddingVector::new(vec![1.5]).unwrap(), label: 1, origin: Origin::Synthetic(SyntheticKind::Smote) });
    let ds = EmbeddingDataset::new(1, 2, samples).unwrap();
    let back = decode_binary(&encode_binary(&ds).unwrap()).unwrap();
    assert_eq!(back.samples()[0].origin, Origin::Real);
    assert_eq!(back.samples()[1].origin, Origin::Synthetic(SyntheticKind::Unspecified));
    assert_eq!(fingerprint(&ds).unwrap(), fingerprint(&back).unwrap());
}

#[test]
fn files_dispatch_on_extension() {
    let dir = tempfile::tempdir().unwrap();
    let ds = EmbeddingDataset::from_rows(3, 2, vec![(vec![0.25, -1.0, 7.0], 0), (vec![1.0, 2.0, 3.0], 1)]).unwrap();
    for name in ["d.emb", "d.csv"] {
        let path = dir.path().join(name);
        save_dataset(&ds, &path, Format::from_path(&path)).unwrap();
        assert_eq!(load_dataset(&path, Format::from_path(&path)).unwrap(), ds);
    }
    let missing = dir.path().join("missing.emb");
    assert!(matches!(load_dataset(&missing, Format::Binary), Err(FormatError::Io { .. })));
}
