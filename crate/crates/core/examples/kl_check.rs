//! KL along a short step against ½ t² uᵀGu: the gap shrinks like t³, and
//! vanishes along kernel directions.
use foliate::geometry::{kl_quadratic_check, project_onto_kernel};
use foliate::net::{self, Activation, NetParams};
use foliate::paths::random_direction;
use foliate::rng;
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let params = NetParams::init(&[20, 30, 5], Activation::Relu, &mut rng::stream(1, "init"))?;
    let x = vec![0.5; 20];
    let u = random_direction(20, 7);
    for t in [8e-3, 4e-3, 2e-3, 1e-3] {
        match kl_quadratic_check(&params, &x, &u, t) {
            Ok(c) => println!("t {t:.0e}: measured {:.4e} predicted {:.4e} gap {:.3e}", c.measured, c.predicted, c.abs_error),
            Err(e) => println!("t {t:.0e}: {e}"),
        }
    }
    let jac = net::input_jacobian(&params, &x)?;
    let k = project_onto_kernel(&u, &jac);
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    let k: Vec<f64> = k.iter().map(|v| v / norm).collect();
    let c = kl_quadratic_check(&params, &x, &k, 1e-3)?;
    println!("kernel direction, t 1e-3: measured {:.3e}", c.measured);
    Ok(())
}
