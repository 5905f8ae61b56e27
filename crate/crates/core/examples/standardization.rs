//! Recomputes the covariate standardization constants by Monte Carlo and
//! compares them with the shipped values.
//!
//! ```text
//! cargo run --release --example standardization -- [draws] [seed] [x2+x4|x1+x4]
//! ```

use did_cbps::simulation::{compute_standardization, constants_checksum, StandardizationConstants, Z4Form};

fn main() -> did_cbps::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: u64 = args.next().map_or(10_000_000, |s| s.parse().expect("draws"));
    let seed: u64 = args.next().map_or(20240101, |s| s.parse().expect("seed"));
    let form = match args.next().as_deref() {
        None | Some("x2+x4") => Z4Form::X2X4,
        Some("x1+x4") => Z4Form::X1X4,
        Some(other) => panic!("unknown form {other}"),
    };

    let fresh = compute_standardization(draws, seed, form)?;
    let shipped = StandardizationConstants::shipped_for(form);
    println!("# recomputed with {draws} draws, seed {seed}");
    print!("{}", fresh.to_toml());
    println!();
    println!("shipped sha256 {}", constants_checksum(&shipped.to_toml()));
    for j in 0..4 {
        println!(
            "z{}: mean {:>12.6} (shipped {:>12.6})  sd {:>10.6} (shipped {:>10.6})",
            j + 1,
            fresh.mean[j],
            shipped.mean[j],
            fresh.sd[j],
            shipped.sd[j]
        );
    }
    Ok(())
}
