//! Constitutive model and its linearization about the current configuration.
//!
//! The material is a compressible Mooney-Rivlin solid with a Voigt-type viscous
//! overlay. With B = F F^T the left Cauchy-Green tensor and D the stretching,
//! the Cauchy stress is
//!
//!   T = -p I + s1 B + s2 B^{-1}
//!       + lambda (tr D) I + 2 mu1 D + mu2 (D B + B D) + mu3 (D B^{-1} + B^{-1} D)
//!
//! and the pressure follows the volume change, dp = -beta d(tr H).
//!
//! Each global step works on the current (deformed) configuration: H is the
//! gradient of the displacement increment with respect to current coordinates,
//! and the stress at the end of the increment is approximated by
//!
//!   T = T_e + K(F, T_e)[H] + M(F)[H / dt]
//!
//! with the two linear kernels implemented here:
//!
//!   L(F)[H] = beta (tr H) I + s1 (H B + B H^T) - s2 (B^{-1} H + H^T B^{-1})
//!   K(F, T_e)[H] = (tr H) T_e - T_e H^T + L(F)[H]
//!   M(F)[Hd] = lambda (tr Hd) I + M0 (Hd + Hd^T) + (Hd + Hd^T) M0,
//!       M0 = (mu1 I + mu2 B + mu3 B^{-1}) / 2
//!
//! K is the transported-stress derivative (volume and lattice rotation carried
//! by (tr H) T_e - T_e H^T) plus the material tangent L; M reproduces the
//! viscous stress exactly when Hd is the rate of H.

use crate::error::{Error, Result};
use crate::tensor::Tensor2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Reference density, kg/m^3.
    pub rho0: f64,
    /// Mooney-Rivlin modulus on B, Pa.
    #[serde(default)]
    pub s1: f64,
    /// Mooney-Rivlin modulus on B^{-1}, Pa (normally negative).
    #[serde(default)]
    pub s2: f64,
    /// Volumetric viscosity, Pa s.
    #[serde(default)]
    pub lambda: f64,
    /// Shear viscosities, Pa s.
    #[serde(default)]
    pub mu1: f64,
    #[serde(default)]
    pub mu2: f64,
    #[serde(default)]
    pub mu3: f64,
    /// Pressure-volume modulus, Pa. Large: the material is near-incompressible.
    pub beta: f64,
}

/// Per-quadrature-point history carried across steps.
///
/// Invariants maintained by `update_point_state`: det F > 0, rho = rho0 / det F,
/// T_e symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    /// Deformation gradient with respect to the initial configuration.
    pub f: Tensor2,
    /// Elastic part of the Cauchy stress at the start of the increment.
    pub t_e: Tensor2,
    /// Pressure, Pa.
    pub p: f64,
    /// Current density, kg/m^3.
    pub rho: f64,
    /// Displacement gradient of the previous increment (drives the viscous
    /// right-hand-side term).
    pub h_prev: Tensor2,
}

/// How T_e is carried to the next step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeUpdate {
    /// T_e += L(F)[H], evaluated at the pre-update F. First order in H.
    Increment,
    /// T_e rebuilt from the constitutive law at the updated F and p.
    Recompute,
}

pub fn left_cauchy_green(f: Tensor2) -> Tensor2 {
    f * f.transpose()
}

/// Elastic Cauchy stress -p I + s1 B + s2 B^{-1}.
pub fn elastic_stress(p: f64, b: Tensor2, m: &MaterialParams) -> Result<Tensor2> {
    Ok(Tensor2::IDENTITY * (-p) + b * m.s1 + b.inverse()? * m.s2)
}

/// Cached per-point quantities shared by the kernel applications. Building one
/// of these once per element and reusing it across the 6 basis directions is
/// what keeps assembly cheap.
pub(crate) struct Kernels {
    b: Tensor2,
    b_inv: Tensor2,
    m0: Tensor2,
    lambda: f64,
    beta: f64,
    s1: f64,
    s2: f64,
}

impl Kernels {
    pub fn new(f: Tensor2, m: &MaterialParams) -> Result<Self> {
        let b = left_cauchy_green(f);
        let b_inv = b.inverse()?;
        let m0 = (Tensor2::IDENTITY * m.mu1 + b * m.mu2 + b_inv * m.mu3) * 0.5;
        Ok(Kernels {
            b,
            b_inv,
            m0,
            lambda: m.lambda,
            beta: m.beta,
            s1: m.s1,
            s2: m.s2,
        })
    }

    /// L(F)[H], the tangent of the elastic stress.
    pub fn elasticity(&self, h: Tensor2) -> Tensor2 {
        Tensor2::IDENTITY * (self.beta * h.trace())
            + (h * self.b + self.b * h.transpose()) * self.s1
            - (self.b_inv * h + h.transpose() * self.b_inv) * self.s2
    }

    /// M(F)[Hd], the viscous stress at increment rate Hd.
    pub fn viscosity(&self, hdot: Tensor2) -> Tensor2 {
        let sym2 = hdot + hdot.transpose();
        Tensor2::IDENTITY * (self.lambda * hdot.trace()) + self.m0 * sym2 + sym2 * self.m0
    }

    /// K(F, T_e)[H], the full quasi-static tangent including stress transport.
    pub fn piola(&self, t_e: Tensor2, h: Tensor2) -> Tensor2 {
        t_e * h.trace() - t_e * h.transpose() + self.elasticity(h)
    }
}

pub fn elasticity_apply(f: Tensor2, h: Tensor2, m: &MaterialParams) -> Result<Tensor2> {
    Ok(Kernels::new(f, m)?.elasticity(h))
}

pub fn viscosity_apply(f: Tensor2, hdot: Tensor2, m: &MaterialParams) -> Result<Tensor2> {
    Ok(Kernels::new(f, m)?.viscosity(hdot))
}

pub fn piola_apply(f: Tensor2, t_e: Tensor2, h: Tensor2, m: &MaterialParams) -> Result<Tensor2> {
    Ok(Kernels::new(f, m)?.piola(t_e, h))
}

/// p(tau) = p(t) - beta tr H.
pub fn pressure_update(p: f64, h: Tensor2, beta: f64) -> f64 {
    p - beta * h.trace()
}

/// rho(tau) = rho(t) / det(I + H). Fails if the increment inverts the element.
pub fn density_update(rho: f64, h: Tensor2) -> Result<f64> {
    let d = (Tensor2::IDENTITY + h).det();
    if d <= 0.0 {
        return Err(Error::ElementInverted {
            det: d,
            context: String::new(),
        });
    }
    Ok(rho / d)
}

/// Advance one quadrature point through a converged increment H.
pub fn update_point_state(
    state: &PointState,
    h: Tensor2,
    m: &MaterialParams,
    mode: TeUpdate,
) -> Result<PointState> {
    let fh = Tensor2::IDENTITY + h;
    let d = fh.det();
    if d <= 0.0 {
        return Err(Error::ElementInverted {
            det: d,
            context: String::new(),
        });
    }
    let p = pressure_update(state.p, h, m.beta);
    let rho = state.rho / d;
    let f_new = fh * state.f;
    let t_e = match mode {
        // sym() guards the T_e symmetry invariant against roundoff drift over
        // thousands of increments.
        TeUpdate::Increment => (state.t_e + elasticity_apply(state.f, h, m)?).sym(),
        TeUpdate::Recompute => elastic_stress(p, left_cauchy_green(f_new), m)?,
    };
    Ok(PointState {
        f: f_new,
        t_e,
        p,
        rho,
        h_prev: h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Elasticity,
    Viscosity,
}

/// Difference-quotient oracle for the two kernels.
///
/// Elasticity: central difference of the nonlinear elastic stress along the
/// deformation path F(s) = (I + s H) F, with the pressure following the exact
/// volume change -beta ln det(I + s H). The log argument is evaluated through
/// ln_1p(s tr H + s^2 det H), the exact 2x2 expansion of det(I + s H) - 1;
/// forming det(I + s H) and subtracting 1 instead loses ~11 digits when
/// |s tr H| is near roundoff and would wreck the comparison for traceless H.
///
/// Viscosity: central difference of the viscous constitutive sum written in
/// its plain product form, an independent evaluation path from the M0 form
/// used by `viscosity_apply`.
pub fn fd_oracle(
    f: Tensor2,
    h: Tensor2,
    m: &MaterialParams,
    step: f64,
    kind: KernelKind,
) -> Result<Tensor2> {
    let b = left_cauchy_green(f);
    let eval = |s: f64| -> Result<Tensor2> {
        match kind {
            KernelKind::Elasticity => {
                let fs = Tensor2::IDENTITY + h * s;
                let bs = fs * b * fs.transpose();
                let vol = m.beta * (s * h.trace() + s * s * h.det()).ln_1p();
                Ok(bs * m.s1 + bs.inverse()? * m.s2 + Tensor2::IDENTITY * vol)
            }
            KernelKind::Viscosity => {
                let dd = (h * s).sym();
                let b_inv = b.inverse()?;
                Ok(Tensor2::IDENTITY * (m.lambda * dd.trace())
                    + dd * (2.0 * m.mu1)
                    + (dd * b + b * dd) * m.mu2
                    + (dd * b_inv + b_inv * dd) * m.mu3)
            }
        }
    };
    let plus = eval(step)?;
    let minus = eval(-step)?;
    Ok((plus - minus) * (0.5 / step))
}

/// Frobenius-relative disagreement, 0 when both vanish.
pub fn rel_err(a: Tensor2, b: Tensor2) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).frobenius_norm() / scale
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_rel_err_elasticity: f64,
    pub max_rel_err_viscosity: f64,
}

impl ValidationReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_rel_err_elasticity.max(self.max_rel_err_viscosity)
    }
}

/// Check both analytic kernels against the difference-quotient oracle on
/// random states with ||F - I||_F <= 0.5, for every supplied material.
pub fn kernel_validation_suite(
    materials: &[MaterialParams],
    samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport {
        samples: 0,
        max_rel_err_elasticity: 0.0,
        max_rel_err_viscosity: 0.0,
    };
    for m in materials {
        for _ in 0..samples {
            let f = loop {
                let r = Tensor2::new(
                    rng.random_range(-0.25..0.25),
                    rng.random_range(-0.25..0.25),
                    rng.random_range(-0.25..0.25),
                    rng.random_range(-0.25..0.25),
                );
                let cand = Tensor2::IDENTITY + r;
                if cand.det() > 0.3 {
                    break cand;
                }
            };
            let h = Tensor2::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let e_err = rel_err(
                elasticity_apply(f, h, m)?,
                fd_oracle(f, h, m, 1e-6, KernelKind::Elasticity)?,
            );
            let v_err = rel_err(
                viscosity_apply(f, h, m)?,
                fd_oracle(f, h, m, 1e-6, KernelKind::Viscosity)?,
            );
            report.max_rel_err_elasticity = report.max_rel_err_elasticity.max(e_err);
            report.max_rel_err_viscosity = report.max_rel_err_viscosity.max(v_err);
            report.samples += 1;
        }
    }
    Ok(report)
}
