//! Spectrum of G at a few inputs of an MNIST-sized net: at most C-1 nonzero
//! eigenvalues out of 784, found from the 10x10 Gram matrix.
use foliate::data;
use foliate::geometry::{self, spectrum};
use foliate::net::{Activation, NetParams};
use foliate::rng;
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let params = NetParams::init(&[784, 128, 10], Activation::Relu, &mut rng::stream(3, "init"))?;
    let (images, labels) = data::synth_glyphs(5, 2);
    let ds = data::make_dataset(&images, &labels, 10)?;
    for (x, y) in ds.images.iter().zip(&ds.labels) {
        let g = geometry::local_data_matrix(&params, x)?;
        let s = spectrum(&g);
        let top: Vec<String> = s.eigenvalues.iter().take(4).map(|l| format!("{l:.3e}")).collect();
        println!(
            "digit {y}: stored {} of {} entries, trace {:.4e}, soft rank {}, top [{}]",
            g.stored_len(),
            784 * 784,
            s.trace,
            s.soft_rank,
            top.join(", ")
        );
    }
    Ok(())
}
