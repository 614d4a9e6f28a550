use super::{DataError, Dataset};
use crate::rng;
use rand_distr::{Distribution, Normal};

/// Gaussian blobs around `0.5 + 0.3 e_i`, clipped to `[0,1]`.
///
/// Examples are class-major: all of class 0 first, then class 1, and so on.
pub fn synth_blobs(
    classes: usize,
    per_class: usize,
    n: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if classes > n {
        return Err(DataError::TooManyClasses { classes, n });
    }
    if per_class == 0 || classes == 0 {
        return Err(DataError::Invalid(
            "need at least one class and one example per class".into(),
        ));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(DataError::Invalid(format!("spread must be >= 0, got {spread}")));
    }
    let mut rng = rng::stream(seed, "blobs");
    // spread = 0 is a valid degenerate normal
    let noise = Normal::new(0.0, spread).expect("finite non-negative spread");
    let mut images = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        for _ in 0..per_class {
            let x = (0..n)
                .map(|j| {
                    let mean = if j == class { 0.8 } else { 0.5 };
                    (mean + noise.sample(&mut rng)).clamp(0.0, 1.0)
                })
                .collect();
            images.push(x);
            labels.push(class);
        }
    }
    Ok(Dataset {
        images,
        labels,
        n,
        classes,
    })
}
