//! Building design matrices from a covariate specification with squared and
//! interaction terms, and the errors raised for unknown or collinear terms.
//!
//! ```text
//! cargo run --example design_matrix
//! ```

use did_cbps::panel::{build_design, CovariateSpec, PanelDataset};

fn main() -> did_cbps::Result<()> {
    let age = vec![23.0, 31.0, 45.0, 28.0, 52.0, 37.0];
    let educ = vec![10.0, 12.0, 16.0, 11.0, 8.0, 14.0];
    let twice_age = age.iter().map(|a| 2.0 * a).collect();
    let ds = PanelDataset::new(
        vec![0.0, 1.0, 2.0, 0.5, 1.5, 3.0],
        vec![1.0, 2.0, 2.5, 1.0, 2.0, 3.5],
        vec![true, false, true, false, false, true],
        vec![("age".into(), age), ("educ".into(), educ), ("age2x".into(), twice_age)],
    )?;

    let spec = CovariateSpec::parse("raw age\nraw educ\nsquare age\ninteract age educ\n")?;
    let x = build_design(&ds, &spec)?;
    println!("columns: {:?}", x.column_names());
    println!("{}", x.matrix());

    let unknown = CovariateSpec::parse("raw income\n")?;
    println!("unknown term: {}", build_design(&ds, &unknown).unwrap_err());
    let collinear = CovariateSpec::parse("raw age\nraw age2x\n")?;
    println!("collinear terms: {}", build_design(&ds, &collinear).unwrap_err());
    println!("bad syntax: {}", CovariateSpec::parse("raw age\ncube age\n").unwrap_err());
    Ok(())
}
