//! Workload-mix model: overall time as a weighted sum of GEMM and Non-GEMM
//! work, and the GEMM fraction at which device-side memory overtakes a PCIe
//! system.

use crate::error::{Error, Result};
use crate::system::SimReport;

/// Grid step of the threshold scan, as a fraction.
pub const GRID_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixModel {
    /// Seconds.
    pub t_other: f64,
    pub w_gemm: f64,
    /// Workload fraction per second.
    pub p_gemm: f64,
    pub p_nongemm: f64,
}

impl MixModel {
    pub fn w_nongemm(&self) -> f64 {
        1.0 - self.w_gemm
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_gemm) {
            return Err(Error::InvalidArgument(format!("w_gemm {} outside [0, 1]", self.w_gemm)));
        }
        for (name, p) in [("p_gemm", self.p_gemm), ("p_nongemm", self.p_nongemm)] {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {p}")));
            }
        }
        if !(self.t_other.is_finite() && self.t_other >= 0.0) {
            return Err(Error::InvalidArgument(format!("t_other must be non-negative, got {}", self.t_other)));
        }
        Ok(())
    }

    pub fn with_w_gemm(self, w_gemm: f64) -> Self {
        MixModel { w_gemm, ..self }
    }

    /// Performance measures of `report` for a reference workload whose GEMM
    /// fraction is `ref_w_gemm`.
    pub fn from_report(report: &SimReport, ref_w_gemm: f64) -> Result<Self> {
        let g = report.gemm_ns as f64 * 1e-9;
        let n = report.nongemm_ns as f64 * 1e-9;
        if g <= 0.0 || n <= 0.0 {
            return Err(Error::InvalidArgument(
                "mix model needs a run with both GEMM and Non-GEMM time".into(),
            ));
        }
        let m = MixModel {
            t_other: report.other_ns as f64 * 1e-9,
            w_gemm: ref_w_gemm,
            p_gemm: ref_w_gemm / g,
            p_nongemm: (1.0 - ref_w_gemm) / n,
        };
        m.validate()?;
        Ok(m)
    }
}

/// GEMM share of a run's op time, used as the reference workload fraction.
pub fn gemm_fraction(report: &SimReport) -> f64 {
    let g = report.gemm_ns as f64;
    let n = report.nongemm_ns as f64;
    if g + n == 0.0 {
        0.0
    } else {
        g / (g + n)
    }
}

pub fn mix_time(model: &MixModel) -> Result<f64> {
    model.validate()?;
    Ok(model.t_other + model.w_gemm / model.p_gemm + model.w_nongemm() / model.p_nongemm)
}

/// Time at each Non-GEMM fraction in `0, step, .., 1`.
pub fn mix_curve(model: &MixModel, points: usize) -> Result<Vec<(f64, f64)>> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let w_ng = i as f64 / (points - 1) as f64;
            Ok((w_ng, mix_time(&model.with_w_gemm(1.0 - w_ng))?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// DevMem wins for GEMM fractions on one side of `w_gemm`.
    Crossing {
        w_gemm: f64,
        w_gemm_grid: f64,
        devmem_preferred_above: bool,
    },
    DevMemDominates,
    PcieDominates,
    Tie,
}

impl Threshold {
    pub fn w_gemm(&self) -> Option<f64> {
        match self {
            Threshold::Crossing { w_gemm, .. } => Some(*w_gemm),
            _ => None,
        }
    }

    /// Non-GEMM fraction below which DevMem is preferred.
    pub fn w_nongemm(&self) -> Option<f64> {
        self.w_gemm().map(|w| 1.0 - w)
    }
}

/// Solves `mix_time(dev, w) = mix_time(pcie, w)` in closed form and checks it
/// against a scan of `w` on a 0.01% grid.
pub fn devmem_threshold(dev: &MixModel, pcie: &MixModel) -> Result<Threshold> {
    dev.validate()?;
    pcie.validate()?;
    // dev(w) - pcie(w) = a + b w
    let inv_ng = 1.0 / dev.p_nongemm - 1.0 / pcie.p_nongemm;
    let a = dev.t_other - pcie.t_other + inv_ng;
    let b = 1.0 / dev.p_gemm - 1.0 / pcie.p_gemm - inv_ng;
    let diff = |w: f64| a + b * w;
    let scale = [a, b, dev.t_other, 1.0 / dev.p_gemm, 1.0 / dev.p_nongemm]
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);

    if b.abs() <= eps {
        return Ok(if a.abs() <= eps {
            Threshold::Tie
        } else if a < 0.0 {
            Threshold::DevMemDominates
        } else {
            Threshold::PcieDominates
        });
    }
    let w = -a / b;
    if !(0.0..=1.0).contains(&w) {
        return Ok(if diff(0.5) < 0.0 {
            Threshold::DevMemDominates
        } else {
            Threshold::PcieDominates
        });
    }
    Ok(Threshold::Crossing {
        w_gemm: w,
        w_gemm_grid: grid_scan(&diff).unwrap_or(w),
        devmem_preferred_above: b < 0.0,
    })
}

fn grid_scan(diff: &dyn Fn(f64) -> f64) -> Option<f64> {
    let n = (1.0 / GRID_STEP).round() as u64;
    let at = |i: u64| i as f64 * GRID_STEP;
    let mut prev = diff(0.0);
    if prev == 0.0 {
        return Some(0.0);
    }
    for i in 1..=n {
        let cur = diff(at(i));
        if cur == 0.0 || cur.signum() != prev.signum() {
            return Some(if cur.abs() <= prev.abs() { at(i) } else { at(i - 1) });
        }
        prev = cur;
    }
    None
}
