//! Non-experimental comparison on the NSW/CPS data: a pseudo-treatment
//! group drawn from the experimental controls is compared with CPS
//! households, so every estimate should be close to zero.
//!
//! The data are not bundled. Supply a CSV with columns `treat`, `re75`,
//! `re78` and the covariates named in the specification file (see
//! `docs/empirical.md`).
//!
//! ```text
//! cargo run --release --example empirical_lalonde -- PATH.csv [SPEC]
//! ```

use did_cbps::estimators::{estimate, Method};
use did_cbps::panel::{build_design, load_csv, ColumnMap, CovariateSpec};

fn main() -> did_cbps::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(data) = args.next().or_else(|| std::env::var("DID_CBPS_NSW_CPS").ok()) else {
        eprintln!("usage: empirical_lalonde PATH.csv [SPEC]  (or set DID_CBPS_NSW_CPS)");
        return Ok(());
    };
    let spec_path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/lalonde_lin.spec").to_string());

    let map = ColumnMap { y0: "re75".into(), y1: "re78".into(), d: "treat".into() };
    let ds = load_csv(&data, &map)?;
    let x = build_design(&ds, &CovariateSpec::load(&spec_path)?)?;
    let dy = ds.delta_y();
    println!("{} units ({} pseudo-treated), {} design columns", ds.n(), ds.n_treated(), x.ncols());
    for m in Method::ALL {
        match estimate(m, &x, &dy, ds.d()) {
            Ok(r) => println!("{:<5} {:>10.0} ({:.0})", m, r.tau, r.se),
            Err(e) => println!("{:<5} failed: {e}", m),
        }
    }
    Ok(())
}
