//! CSV and JSON outputs reproducing the case-study figures as data files.

use std::fs;
use std::io::Write;
use std::path::Path;

use aid_core::analysis::OdeSample;
use aid_core::design::{Autocorrelation, InputFilter};
use aid_core::{Error, Result};

use crate::montecarlo::McSummary;
use crate::runner::RunTrace;

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::Shape(format!("mkdir {parent:?}: {e}")))?;
    }
    fs::File::create(path).map_err(|e| Error::Shape(format!("create {path:?}: {e}")))
}

fn wline(f: &mut fs::File, line: &str) -> Result<()> {
    writeln!(f, "{line}").map_err(|e| Error::Shape(format!("write: {e}")))
}

/// `fig1_thetaB.csv`: per-step estimates of the B block.
pub fn write_fig1(dir: &Path, trace: &RunTrace, pb: usize) -> Result<()> {
    let mut f = create(&dir.join("fig1_thetaB.csv"))?;
    let header: Vec<String> = (1..=pb).map(|i| format!("b{i}")).collect();
    wline(&mut f, &format!("n,{}", header.join(",")))?;
    for r in &trace.records {
        let vals: Vec<String> = r.theta[..pb].iter().map(|v| format!("{v:.12e}")).collect();
        wline(&mut f, &format!("{},{}", r.n, vals.join(",")))?;
    }
    Ok(())
}

/// `fig2_thetaD_sigma.csv`: per-step noise-model estimates and the noise
/// variance estimate.
pub fn write_fig2(dir: &Path, trace: &RunTrace, pb: usize, pd: usize) -> Result<()> {
    let mut f = create(&dir.join("fig2_thetaD_sigma.csv"))?;
    let header: Vec<String> = (1..=pd).map(|i| format!("d{i}")).collect();
    wline(&mut f, &format!("n,{},sigma2", header.join(",")))?;
    for r in &trace.records {
        let vals: Vec<String> =
            r.theta[pb..pb + pd].iter().map(|v| format!("{v:.12e}")).collect();
        wline(&mut f, &format!("{},{},{:.12e}", r.n, vals.join(","), r.sigma2))?;
    }
    Ok(())
}

/// `fig5_r0.csv`: the designed input power along the run, with the
/// truth-design power as reference column.
pub fn write_fig5(dir: &Path, trace: &RunTrace, optimal_r0: Option<f64>) -> Result<()> {
    let mut f = create(&dir.join("fig5_r0.csv"))?;
    wline(&mut f, "n,r0,r0_optimal")?;
    for r in &trace.records {
        let opt = optimal_r0.map_or(String::from(""), |v| format!("{v:.12e}"));
        wline(&mut f, &format!("{},{:.12e},{opt}", r.n, r.r0))?;
    }
    Ok(())
}

/// `fig6_variance.csv`: Monte Carlo variance of the squared-gain estimate
/// per experiment length (one row per checkpoint).
pub fn write_fig6(dir: &Path, entries: &[(String, u64, &McSummary)]) -> Result<()> {
    let mut f = create(&dir.join("fig6_variance.csv"))?;
    wline(&mut f, "mode,runs,n,variance")?;
    for (mode, runs, mc) in entries {
        for (n, v) in &mc.checkpoint_variances {
            wline(&mut f, &format!("{mode},{runs},{n},{v:.12e}"))?;
        }
    }
    Ok(())
}

/// `spectrum.csv`: `(tau, r_tau, f_tau)` rows of a design/factor pair.
pub fn write_spectrum(dir: &Path, r: &Autocorrelation, filter: &InputFilter) -> Result<()> {
    let mut f = create(&dir.join("spectrum.csv"))?;
    wline(&mut f, "tau,r_tau,f_tau")?;
    for tau in 0..=r.m() {
        let ft = filter.f.get(tau).copied().unwrap_or(0.0);
        wline(&mut f, &format!("{tau},{:.12e},{ft:.12e}", r.r[tau]))?;
    }
    Ok(())
}

pub fn write_matrix(path: &Path, m: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut f = create(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.12e}", m[(i, j)])).collect();
        wline(&mut f, &row.join(","))?;
    }
    Ok(())
}

/// ODE path: `t`, parameter components, eigenvalue bounds of `R_t`, cost
/// and gradient norm.
pub fn write_ode(path: &Path, samples: &[OdeSample]) -> Result<()> {
    let mut f = create(path)?;
    let p = samples.first().map_or(0, |s| s.theta.len());
    let header: Vec<String> = (1..=p).map(|i| format!("theta{i}")).collect();
    wline(&mut f, &format!("t,{},r_eig_min,r_eig_max,w,grad_norm", header.join(",")))?;
    for s in samples {
        let th: Vec<String> = s.theta.iter().map(|v| format!("{v:.12e}")).collect();
        wline(
            &mut f,
            &format!(
                "{:.6},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                s.t,
                th.join(","),
                s.r_eig_min,
                s.r_eig_max,
                s.w,
                s.grad_norm
            ),
        )?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = create(path)?;
    wline(&mut f, &serde_json::to_string_pretty(value).expect("json"))
}
