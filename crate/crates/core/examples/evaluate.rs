//! Minimal library walkthrough: synthesize reference velocity, associate,
//! and score an estimate. Expects `ref.tum` and `est.tum` in the working
//! directory.

use stateval::metrics::{ase, AlignMode};
use stateval::trajectory::{associate, parse_tum, FitOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = parse_tum::<f64>(&std::fs::read_to_string("ref.tum")?, false)?
        .synthesize_velocity(128, &FitOptions::default())?;
    let estimate = parse_tum::<f64>(&std::fs::read_to_string("est.tum")?, true)?;
    let pairing = associate(&estimate, &reference, 0.01)?;
    let (report, alignment) = ase(&estimate, &reference, &pairing, AlignMode::Sim3)?;
    println!("ASE rmse {:.6} (s = {:.4})", report.rmse, alignment.scale);
    Ok(())
}
