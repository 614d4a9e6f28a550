//! SGD on procedural digits while watching the mean trace of G.
//!
//!     cargo run --release --example train_trace -- [images] [epochs]
use foliate::data;
use foliate::train::{self, rise_then_fall, TrainConfig, Trainer};
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(Ok(3000), |a| a.parse())?;
    let epochs: usize = args.next().map_or(Ok(8), |a| a.parse())?;
    let (images, labels) = data::synth_glyphs(count, 1);
    let mut ds = data::make_dataset(&images, &labels, 10)?;
    ds.standardize(data::MNIST_MEAN, data::MNIST_STD)?;
    let config = TrainConfig { epochs, trace_every: 5, ..TrainConfig::default() };
    let mut trainer = Trainer::from_seed(&[784, 128, 10], config)?;
    let mut ends = Vec::new();
    for _ in 0..epochs {
        let s = trainer.run_epoch(&ds)?;
        ends.push(s.step - 1);
        println!(
            "epoch {:>2}  loss {:.4}  acc {:.4}  trace_ema {:.4}",
            s.epoch,
            s.mean_loss,
            train::accuracy(&trainer.params, &ds)?,
            trainer.trace.ema_at(s.step - 1).unwrap_or(f64::NAN)
        );
    }
    let (rose, fell, peak) = rise_then_fall(&trainer.trace, 0.5);
    println!("rose {rose}, fell below half the peak {fell}, peak at step {peak:?}");
    if let Some(e) = train::select_checkpoint(&trainer.trace, &ends) {
        println!("selected checkpoint: epoch {}", e + 1);
    }
    Ok(())
}
