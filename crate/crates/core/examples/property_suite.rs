//! PSD, rank, kernel, zero-mean, trace and projection checks on a random net.
use foliate::net::{Activation, NetParams};
use foliate::rng;
use foliate::suite::{self, SuiteOptions};
use std::error::Error;

fn main() -> Result<(), Box<dyn Error>> {
    let params = NetParams::init(&[64, 32, 10], Activation::Relu, &mut rng::stream(0, "init"))?;
    let mut r = rng::stream(0, "points");
    let points = suite::uniform_points(64, 50, &mut r);
    let report = suite::run_suites(&params, &points, SuiteOptions::default(), &mut r);
    print!("{}", report.to_csv());
    println!("all passed: {}", report.passed());
    Ok(())
}
