//! Persona-level (cluster) bootstrap intervals. Resampling whole personas
//! keeps each persona's trials together, so the interval reflects both trial
//! noise and persona-to-persona spread.
//!
//!     cargo run --example bootstrap_ci

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use userdrift::estimate::{bootstrap_ci, mean, BootstrapConfig};

fn main() -> userdrift::Result<()> {
    // 40 personas, each with a mean outcome per arm over 30 trials.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let units: Vec<[f64; 2]> = (0..40)
        .map(|_| {
            let base: f64 = rng.random_range(0.2..0.6);
            let arm = |p: f64, rng: &mut ChaCha8Rng| (0..30).filter(|_| rng.random_bool(p)).count() as f64 / 30.0;
            [arm(base, &mut rng), arm(base + 0.15, &mut rng)]
        })
        .collect();

    let effect = |sample: &[&[f64; 2]]| -> Option<f64> {
        let n = sample.len() as f64;
        Some(sample.iter().map(|u| u[1] - u[0]).sum::<f64>() / n)
    };
    let all: Vec<&[f64; 2]> = units.iter().collect();
    let point = effect(&all).unwrap();

    for level in [0.8, 0.9, 0.95, 0.99] {
        let cfg = BootstrapConfig { resamples: 2000, level };
        let ci = bootstrap_ci(&units, effect, cfg, 11)?.including(point);
        println!("effect {point:.3}  {:>3.0}% CI [{:.3}, {:.3}]", level * 100.0, ci.lo, ci.hi);
    }

    let arm1: Vec<f64> = units.iter().map(|u| u[1]).collect();
    let ci = bootstrap_ci(&arm1, mean, BootstrapConfig::default(), 11)?;
    println!("arm-1 mean {:.3}  95% CI [{:.3}, {:.3}]", mean(&arm1.iter().collect::<Vec<_>>()).unwrap(), ci.lo, ci.hi);
    Ok(())
}
