//! Procedural digits written as IDX bytes, parsed back, turned into a dataset.
use foliate::data::{self, encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels};
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let (images, labels) = data::synth_glyphs(1000, 1);
    let (img_bytes, lbl_bytes) = (encode_idx_images(&images), encode_idx_labels(&labels));
    let back = parse_idx_images(&img_bytes)?;
    assert_eq!(back, images);
    assert_eq!(parse_idx_labels(&lbl_bytes)?, labels);
    let mut ds = data::make_dataset(&back, &labels, 10)?;
    println!("{} images {}x{}, {} + {} bytes", back.count, back.rows, back.cols, img_bytes.len(), lbl_bytes.len());
    println!("fingerprint {}", hex(&ds.fingerprint()));
    ds.standardize(data::MNIST_MEAN, data::MNIST_STD)?;
    let (lo, hi) = ds.images.iter().flatten().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("standardized pixel range [{lo:.4}, {hi:.4}]");
    let mut counts = [0usize; 10];
    labels.iter().for_each(|&l| counts[l as usize] += 1);
    println!("labels per class {counts:?}");
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
