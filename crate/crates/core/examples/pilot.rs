//! Reruns the calibration pilot and prints the values to freeze.

use lilfield::calibration::{run_pilot, PILOT_SEED};

fn main() {
    let seed = std::env::args().nth(1).map_or(PILOT_SEED, |s| s.parse().expect("seed"));
    let start = std::time::Instant::now();
    let v = run_pilot(seed).expect("pilot");
    println!("{v:#?}");
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
}
