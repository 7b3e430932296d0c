//! CSV writers. Floats carry 17 significant digits so re-parsing is
//! lossless; undefined values are written as `NaN`.

use std::io::{self, Write};

use super::mixing::{CutoffRow, MixingCurveRow, ReplicaFarm};

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    fmt17(v.unwrap_or(f64::NAN))
}

pub fn write_mixing_curve<W: Write>(mut out: W, rows: &[MixingCurveRow]) -> io::Result<()> {
    writeln!(out, "L,lambda,t,d_upper,d_upper_ci,d_lower,d_lower_ci")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.length,
            fmt17(r.lambda),
            fmt17(r.t),
            fmt17(r.d_upper),
            fmt17(r.d_upper_ci),
            fmt17(r.d_lower),
            fmt17(r.d_lower_ci)
        )?;
    }
    Ok(())
}

/// `tau`, `tau1`, `tau2` are `NaN` when right-censored at the horizon.
pub fn write_tau_samples<'a, W: Write>(mut out: W, farms: impl IntoIterator<Item = &'a ReplicaFarm>) -> io::Result<()> {
    writeln!(out, "L,lambda,replica,tau,tau1,tau2,censored_flag")?;
    for f in farms {
        for r in &f.replicas {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f.length,
                fmt17(f.lambda),
                r.replica,
                opt(r.tau),
                opt(r.tau1),
                opt(r.tau2),
                r.tau.is_none() as u8
            )?;
        }
    }
    Ok(())
}

pub fn write_cutoff_table<W: Write>(mut out: W, rows: &[CutoffRow]) -> io::Result<()> {
    writeln!(out, "L,lambda,eps,t_hat_upper,t_hat_lower,normalized_location,cutoff_ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.length,
            fmt17(r.lambda),
            fmt17(r.eps),
            opt(r.t_hat_upper),
            opt(r.t_hat_lower),
            opt(r.normalized_location),
            opt(r.cutoff_ratio)
        )?;
    }
    Ok(())
}
