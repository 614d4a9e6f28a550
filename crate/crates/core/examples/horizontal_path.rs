//! Train on Gaussian blobs, then follow the distribution from one example
//! toward another and write the trajectory as a PGM strip.
use foliate::data::synth_blobs;
use foliate::paths::{horizontal_path, path_to_strip};
use foliate::train::{self, TrainConfig, Trainer};
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let ds = synth_blobs(3, 100, 8, 0.05, 1)?;
    let config = TrainConfig { epochs: 20, trace_every: 0, ..TrainConfig::default() };
    let mut trainer = Trainer::from_seed(&[8, 128, 3], config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch(&ds)?;
    }
    println!("train accuracy {:.3}", train::accuracy(&trainer.params, &ds)?);
    let (s, d) = (&ds.images[0], &ds.images[150]);
    let initial = s.iter().zip(d).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rec = horizontal_path(&trainer.params, s, d, 0.01, 2000, 0.1 * initial)?;
    println!(
        "{} after {} steps, distance {initial:.3} -> {:.3}, {} monotonicity violations, {} rank changes",
        rec.status,
        rec.num_steps(),
        rec.final_dist(),
        rec.monotonicity_violations.len(),
        rec.rank_changes.len()
    );
    for st in rec.steps.iter().step_by(rec.steps.len().div_ceil(8).max(1)) {
        println!("  t {:>4} dist {:.4} class {} maxp {:.3}", st.t, st.dist, st.pred, st.max_prob);
    }
    let strip = path_to_strip(&rec, 200, Some((2, 4)))?;
    let out = std::env::temp_dir().join("horizontal_path.pgm");
    std::fs::write(&out, strip.to_pgm())?;
    println!("strip of {} frames: {}", strip.frames.len(), out.display());
    Ok(())
}
