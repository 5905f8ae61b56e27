//! All four estimators on a four-unit panel with an intercept-only
//! specification, where each reduces to the difference in mean outcome
//! changes between treated and control units.
//!
//! ```text
//! cargo run --example estimate_toy
//! ```

use did_cbps::estimators::{estimate, Method};
use did_cbps::panel::{build_design, load_csv, ColumnMap, CovariateSpec};

fn main() -> did_cbps::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data");
    let ds = load_csv(format!("{dir}/toy.csv"), &ColumnMap::default())?;
    let spec = CovariateSpec::load(format!("{dir}/intercept.spec"))?;
    let x = build_design(&ds, &spec)?;
    let dy = ds.delta_y();
    println!("dy = {dy:?}, d = {:?}", ds.d());
    for m in Method::ALL {
        let r = estimate(m, &x, &dy, ds.d())?;
        println!("{:<5} tau = {:.3}  se = {:.3}  95% CI [{:.3}, {:.3}]", m, r.tau, r.se, r.ci_low, r.ci_high);
    }
    Ok(())
}
