//! Monte Carlo estimate of the semiparametric efficiency bound for each
//! simulation design.
//!
//! ```text
//! cargo run --release --example efficiency_bound -- [draws] [seed]
//! ```

use did_cbps::simulation::{efficiency_bound, DgpConfig, StandardizationConstants};

fn main() -> did_cbps::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: usize = args.next().map_or(1_000_000, |s| s.parse().expect("draws"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let consts = StandardizationConstants::shipped();
    for id in 1..=5 {
        let cfg = DgpConfig::new(id, 1000)?;
        let b = efficiency_bound(&cfg, draws, seed, &consts)?;
        println!("DGP{id}: {:.3} (MC se {:.3})  {}", b.value, b.mc_se, cfg.description());
    }
    Ok(())
}
