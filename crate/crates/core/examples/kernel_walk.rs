//! Walk across leaves on an MNIST-sized net: the input drifts far from the
//! start while the prediction barely moves.
use foliate::data;
use foliate::paths::{kernel_walk, path_to_strip};
use foliate::train::{TrainConfig, Trainer};
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let (images, labels) = data::synth_glyphs(2000, 1);
    let mut ds = data::make_dataset(&images, &labels, 10)?;
    ds.standardize(data::MNIST_MEAN, data::MNIST_STD)?;
    let config = TrainConfig { epochs: 12, trace_every: 0, ..TrainConfig::default() };
    let mut trainer = Trainer::from_seed(&[784, 128, 10], config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch(&ds)?;
    }
    let rec = kernel_walk(&trainer.params, &ds.images[0], 0, 0.1, 1000)?;
    let start = rec.steps[0].pred;
    let kept = rec.steps.iter().filter(|s| s.pred == start).count();
    let confident = rec.steps.iter().filter(|s| s.max_prob >= 0.9).count();
    println!(
        "{} steps: class {start} kept on {kept}, maxp >= 0.9 on {confident}, |x_T - x_0| = {:.2}",
        rec.steps.len(),
        rec.final_dist()
    );
    let median_kl = {
        let mut k: Vec<f64> = rec.steps[1..].iter().map(|s| s.step_kl).collect();
        k.sort_by(f64::total_cmp);
        k[k.len() / 2]
    };
    println!("median per-step KL {median_kl:.2e}");
    let mut shown = rec.clone();
    for p in &mut shown.points {
        p.iter_mut().for_each(|v| *v = *v * data::MNIST_STD + data::MNIST_MEAN);
    }
    let out = std::env::temp_dir().join("kernel_walk.pgm");
    std::fs::write(&out, path_to_strip(&shown, 100, None)?.to_pgm())?;
    println!("strip: {}", out.display());
    Ok(())
}
