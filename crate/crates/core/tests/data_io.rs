use foliate::data::{
    encode_idx_images, encode_idx_labels, load_idx_images, load_idx_labels, make_dataset, parse_idx_images,
    parse_idx_labels, synth_blobs, synth_glyphs, write_idx_images, write_idx_labels, DataError, IdxImages,
    GLYPH_SIDE,
};
use foliate::net::{Activation, NetParams};
use foliate::train::{accuracy, TrainConfig, Trainer};
use proptest::prelude::*;

fn images(count: usize, rows: usize, cols: usize, pixels: Vec<u8>) -> IdxImages {
    IdxImages { count, rows, cols, pixels }
}

proptest! {
    #[test]
    fn idx_round_trip(count in 0usize..6, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let pixels: Vec<u8> = (0..count * rows * cols)
            .map(|k| (seed.wrapping_mul(6364136223846793005).wrapping_add(k as u64) >> 56) as u8)
            .collect();
        let img = images(count, rows, cols, pixels);
        let back = parse_idx_images(&encode_idx_images(&img)).unwrap();
        prop_assert_eq!(back, img);
        let labels: Vec<u8> = (0..count as u8).collect();
        prop_assert_eq!(parse_idx_labels(&encode_idx_labels(&labels)).unwrap(), labels);
    }
}

#[test]
fn header_layout_is_big_endian() {
    let bytes = encode_idx_images(&images(1, 2, 3, vec![9; 6]));
    assert_eq!(&bytes[..16], &[0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3]);
    assert_eq!(&encode_idx_labels(&[4, 5])[..], &[0, 0, 8, 1, 0, 0, 0, 2, 4, 5]);
}

#[test]
fn empty_files() {
    let img = parse_idx_images(&[0, 0, 8, 3, 0, 0, 0, 0, 0, 0, 0, 28, 0, 0, 0, 28]).unwrap();
    assert_eq!((img.count, img.pixels_per_image()), (0, 784));
    assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 0]).unwrap().is_empty());
}

#[test]
fn label_magic_is_rejected_for_images() {
    let mut bytes = encode_idx_images(&images(1, 1, 1, vec![0]));
    bytes[3] = 1;
    let e = parse_idx_images(&bytes).unwrap_err();
    assert!(e.to_string().contains("wrong magic for image file"), "{e}");
}

#[test]
fn files_round_trip_and_missing_file_is_io() {
    let dir = tempfile::tempdir().unwrap();
    let img = images(2, 2, 2, vec![0, 64, 128, 255, 1, 2, 3, 4]);
    write_idx_images(dir.path().join("i"), &img).unwrap();
    write_idx_labels(dir.path().join("l"), &[3, 12]).unwrap();
    assert_eq!(load_idx_images(dir.path().join("i")).unwrap(), img);
    let labels = load_idx_labels(dir.path().join("l")).unwrap();
    assert_eq!(labels, vec![3, 12]);
    assert!(matches!(load_idx_images(dir.path().join("nope")), Err(DataError::Io { .. })));
    // 12 is a legal byte for the label file but not for a 10-class dataset
    assert!(matches!(make_dataset(&img, &labels, 10), Err(DataError::LabelOutOfRange { index: 1, .. })));
}

#[test]
fn pixel_scaling_endpoints_and_count_mismatch() {
    let img = images(3, 1, 2, vec![0, 255, 128, 0, 255, 255]);
    let ds = make_dataset(&img, &[0, 1, 2], 3).unwrap();
    assert_eq!(ds.images[0], vec![0.0, 1.0]);
    assert_eq!(ds.n, 2);
    ds.validate().unwrap();
    assert!(matches!(make_dataset(&img, &[0, 1], 3), Err(DataError::CountMismatch { images: 3, labels: 2 })));
}

#[test]
fn blob_fixture_cases() {
    assert!(matches!(synth_blobs(3, 10, 2, 0.05, 1), Err(DataError::TooManyClasses { .. })));
    let exact = synth_blobs(2, 1, 4, 0.0, 7).unwrap();
    assert_eq!(exact.images[0], vec![0.8, 0.5, 0.5, 0.5]);
    assert_eq!(exact.images[1], vec![0.5, 0.8, 0.5, 0.5]);
    assert_eq!(exact.labels, vec![0, 1]);
    let ds = synth_blobs(3, 100, 8, 0.05, 1).unwrap();
    assert_eq!(ds.len(), 300);
    assert_eq!(ds, synth_blobs(3, 100, 8, 0.05, 1).unwrap());
    ds.validate().unwrap();
}

#[test]
fn linear_classifier_separates_blobs() {
    let ds = synth_blobs(3, 100, 8, 0.05, 1).unwrap();
    let config = TrainConfig { learning_rate: 0.5, batch_size: 10, epochs: 20, seed: 1, trace_every: 0 };
    let mut t = Trainer::new(NetParams::zeros(&[8, 3], Activation::Relu).unwrap(), config);
    for _ in 0..20 {
        t.run_epoch(&ds).unwrap();
    }
    assert!(accuracy(&t.params, &ds).unwrap() > 0.95);
}

#[test]
fn glyphs_are_deterministic_and_balanced() {
    let (a, la) = synth_glyphs(50, 3);
    let (b, lb) = synth_glyphs(50, 3);
    assert_eq!((&a, &la), (&b, &lb));
    assert_eq!((a.rows, a.cols), (GLYPH_SIDE, GLYPH_SIDE));
    for d in 0..10u8 {
        assert_eq!(la.iter().filter(|&&l| l == d).count(), 5);
    }
    assert_ne!(synth_glyphs(50, 4).0, a);
    // some ink, some background in every image
    for i in 0..a.count {
        let img = a.image(i);
        assert!(img.iter().any(|&p| p > 200) && img.iter().filter(|&&p| p == 0).count() > 300);
    }
}

#[test]
fn dataset_helpers() {
    let (img, labels) = synth_glyphs(20, 1);
    let mut ds = make_dataset(&img, &labels, 10).unwrap();
    let (back, back_labels) = ds.to_idx(28, 28).unwrap();
    assert_eq!((back, back_labels), (img, labels));
    let fp = ds.fingerprint();
    assert_eq!(ds.truncated(5).len(), 5);
    assert_ne!(ds.truncated(5).fingerprint(), fp);
    ds.standardize(0.5, 0.25).unwrap();
    assert!(ds.images[0].iter().all(|v| (-2.0..=2.0).contains(v)));
    assert!(ds.images[0].contains(&-2.0));
    assert_ne!(ds.fingerprint(), fp);
    assert!(ds.standardize(0.0, 0.0).is_err());
}
