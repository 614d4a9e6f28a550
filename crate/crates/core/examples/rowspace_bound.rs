//! Why horizontal paths in a dense net stall: every input gradient is
//! W1ᵀ(...), so a path from s never leaves s + rowspace(W1). The part of
//! d - s outside that row space is a floor on the reachable distance.
use foliate::data;
use foliate::geometry::RowSpace;
use foliate::paths::horizontal_path;
use foliate::train::{TrainConfig, Trainer};
use std::error::Error;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn main() -> Result<(), Box<dyn Error>> {
    let (images, labels) = data::synth_glyphs(2000, 1);
    let mut ds = data::make_dataset(&images, &labels, 10)?;
    ds.standardize(data::MNIST_MEAN, data::MNIST_STD)?;
    let hidden = 32;
    let config = TrainConfig { epochs: 3, trace_every: 0, ..TrainConfig::default() };
    let mut trainer = Trainer::from_seed(&[784, hidden, 10], config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch(&ds)?;
    }
    let rows: Vec<Vec<f64>> = trainer.params.weights[0].chunks(784).map(<[f64]>::to_vec).collect();
    let space = RowSpace::new(&rows);
    println!("rowspace(W1) has dimension {} of 784", space.rank());
    for (s, d) in [(0, 1), (2, 3)] {
        let (xs, xd) = (&ds.images[s], &ds.images[d]);
        let diff: Vec<f64> = xd.iter().zip(xs).map(|(a, b)| a - b).collect();
        let floor = norm(&space.project_complement(&diff));
        let rec = horizontal_path(&trainer.params, xs, xd, 0.1, 3000, 0.0)?;
        println!(
            "{s} -> {d}: distance {:.3}, floor {floor:.3}, path ends at {:.3} ({})",
            norm(&diff),
            rec.final_dist(),
            rec.status
        );
    }
    Ok(())
}
