//! Monte Carlo study of the four estimators under one design, printed as a
//! table with the efficiency bound.
//!
//! ```text
//! cargo run --release --example simulate_table -- [dgp] [n] [reps] [seed] [x2+x4|x1+x4]
//! ```

use did_cbps::simulation::{run_study, DgpConfig, StandardizationConstants, StudyConfig, Z4Form};

fn main() -> did_cbps::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: u64| args.get(i).map_or(default, |s| s.parse().expect("integer argument"));
    let dgp = DgpConfig::new(arg(0, 1) as u8, arg(1, 1000) as usize)?;
    let mut cfg = StudyConfig::new(dgp, arg(2, 1000) as usize, arg(3, 2024));
    cfg.bound_draws = Some(1_000_000);

    let form = if args.get(4).map(String::as_str) == Some("x1+x4") { Z4Form::X1X4 } else { Z4Form::X2X4 };

    let report = run_study(&cfg, &StandardizationConstants::shipped_for(form))?;
    println!("DGP{} ({}), n = {}, {} replications", dgp.dgp_id, dgp.description(), dgp.n, cfg.reps);
    println!("{:<6}{:>10}{:>10}{:>10}{:>12}{:>8}{:>10}{:>6}", "", "Av.Bias", "Med.Bias", "RMSE", "Asy.V", "Cover", "CIL", "fail");
    for r in &report.rows {
        println!(
            "{:<6}{:>10.3}{:>10.3}{:>10.3}{:>12.3}{:>8.3}{:>10.3}{:>6}",
            r.method.label(),
            r.av_bias,
            r.med_bias,
            r.rmse,
            r.asy_v,
            r.cover,
            r.cil,
            r.failures
        );
    }
    if let Some(b) = &report.efficiency_bound {
        println!("efficiency bound {:.3} (MC se {:.3}, {} draws)", b.value, b.mc_se, b.draws);
    }
    println!("mean treated share {:.4}", report.mean_treated_share);
    Ok(())
}
