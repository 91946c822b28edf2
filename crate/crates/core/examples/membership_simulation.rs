//! Full watermark, train, verify loop on synthetic data, comparing the three
//! selection strategies on the same seed.
//!
//! `cargo run --release --example membership_simulation [SEED]`

use spectra::pipeline::{run_simulation, SimulationConfig};
use spectra::sampler::Strategy;

fn main() -> spectra::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(1234), |s| s.parse()).expect("seed must be an integer");
    println!("{:<10}{:>16}{:>20}", "strategy", "member log10 p", "non-member log10 p");
    for strategy in [Strategy::Spectra, Strategy::Random, Strategy::Maximum] {
        let cfg = SimulationConfig {
            seed,
            strategy,
            ..SimulationConfig::default()
        };
        let out = run_simulation(&cfg)?;
        println!(
            "{:<10}{:>16.2}{:>20.2}",
            format!("{strategy:?}"),
            out.member.log10_p,
            out.non_member.log10_p
        );
    }
    Ok(())
}
