//! Lie brackets of the fields ∇_x log p_i: in span for ReLU, with a
//! parameter-space and a tanh contrast.
use foliate::geometry::{involutivity_residual, param_involutivity_residual, DEFAULT_BRACKET_STEP};
use foliate::net::{Activation, NetParams};
use foliate::rng;
use rand::Rng as _;
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let h = DEFAULT_BRACKET_STEP;
    let mut r = rng::stream(0, "points");
    for act in [Activation::Relu, Activation::Tanh] {
        let params = NetParams::init(&[12, 16, 4], act, &mut rng::stream(5, "init"))?;
        let (mut worst, mut worst_w, mut skipped) = (0.0f64, 0.0f64, 0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..12).map(|_| r.random()).collect();
            for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
                match involutivity_residual(&params, &x, i, j, h) {
                    Ok(res) => worst = worst.max(res.relative),
                    Err(_) => skipped += 1,
                }
                if let Ok(res) = param_involutivity_residual(&params, &x, i, j, h) {
                    worst_w = worst_w.max(res.relative);
                }
            }
        }
        println!("{act:?}: input space max relative residual {worst:.2e} ({skipped} near a kink), parameter space {worst_w:.2e}");
    }
    Ok(())
}
