//! CSV writers. Every number is printed with 17 significant digits so that
//! identical runs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use egf_core::{CheckReport64, ProductState, Trajectory64};

pub const DIAGNOSTIC_COLUMNS: [&str; 7] = [
    "t",
    "vol",
    "intH2",
    "maxDivH",
    "r",
    "umbilicalResidual",
    "dThetaH",
];

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn diagnostic_rows(traj: &Trajectory64) -> Vec<[f64; 7]> {
    traj.diagnostics
        .iter()
        .map(|d| {
            [
                d.t,
                d.volume,
                d.int_h2,
                d.max_div_h,
                d.r,
                d.umbilical_residual,
                d.dtheta_h,
            ]
        })
        .collect()
}

fn csv_line(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let line: Vec<String> = cells.into_iter().collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

pub fn diagnostics_csv(traj: &Trajectory64) -> String {
    let mut out = String::new();
    csv_line(&mut out, DIAGNOSTIC_COLUMNS.iter().map(|s| s.to_string()));
    for row in diagnostic_rows(traj) {
        csv_line(&mut out, row.iter().map(|&x| num(x)));
    }
    out
}

/// One row per base point, one column per fiber point in row-major order.
pub fn phi_csv(state: &ProductState<f64>) -> String {
    let mut out = String::new();
    for b in 0..state.grid().base_len() {
        csv_line(&mut out, state.phi().fiber_values(b).iter().map(|&x| num(x)));
    }
    out
}

pub fn checks_csv(reports: &[CheckReport64]) -> String {
    let mut out = String::from("check,sample_time,residual,tolerance,pass\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            num(r.sample_time),
            num(r.residual),
            num(r.tolerance),
            r.pass
        );
    }
    out
}

pub fn snapshot_name(i: usize) -> String {
    format!("phi_{i:04}.csv")
}

pub fn write_all(
    dir: &Path,
    traj: &Trajectory64,
    reports: &[CheckReport64],
    snapshots: bool,
    svg: Option<String>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("diagnostics.csv"), diagnostics_csv(traj))?;
    std::fs::write(dir.join("checks.csv"), checks_csv(reports))?;
    if snapshots {
        let snap = dir.join("snapshots");
        std::fs::create_dir_all(&snap)?;
        let mut index = String::from("file,t\n");
        for (i, s) in traj.states.iter().enumerate() {
            std::fs::write(snap.join(snapshot_name(i)), phi_csv(s))?;
            let _ = writeln!(index, "{},{}", snapshot_name(i), num(s.t()));
        }
        std::fs::write(snap.join("index.csv"), index)?;
    }
    if let Some(svg) = svg {
        std::fs::write(dir.join("diagnostics.svg"), svg)?;
    }
    Ok(())
}
