use serde::{Deserialize, Serialize};

use crate::params::ModelParams;

/// Diffusion coefficient ψ of `du = b(u) dt + ψ(u) dB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiSpec {
    /// `√κ u²√(u−1)` for `u > 1`, zero otherwise.
    Collapse { kappa: f64 },
    Constant { sigma: f64 },
    /// `exp(rate·x)`.
    Exponential { rate: f64 },
    /// `x − root`.
    Linear { root: f64 },
    /// `|x − center|^exponent + offset`.
    AbsPower { center: f64, exponent: f64, offset: f64 },
    /// `alpha + u²`.
    Riccati { alpha: f64 },
}

impl PsiSpec {
    pub fn collapse(params: &ModelParams) -> Self {
        Self::Collapse { kappa: params.kappa }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Self::Collapse { kappa } => {
                if u <= 1.0 {
                    0.0
                } else {
                    kappa.sqrt() * u * u * (u - 1.0).sqrt()
                }
            }
            Self::Constant { sigma } => sigma,
            Self::Exponential { rate } => (rate * u).exp(),
            Self::Linear { root } => u - root,
            Self::AbsPower {
                center,
                exponent,
                offset,
            } => (u - center).abs().powf(exponent) + offset,
            Self::Riccati { alpha } => alpha + u * u,
        }
    }

    pub fn sq(&self, u: f64) -> f64 {
        match *self {
            Self::Collapse { kappa } => {
                if u <= 1.0 {
                    0.0
                } else {
                    kappa * u.powi(4) * (u - 1.0)
                }
            }
            _ => {
                let v = self.value(u);
                v * v
            }
        }
    }

    /// Analytic derivative ψ'(u).
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Self::Collapse { kappa } => {
                if u <= 1.0 {
                    f64::INFINITY
                } else {
                    let s = (u - 1.0).sqrt();
                    kappa.sqrt() * (2.0 * u * s + u * u / (2.0 * s))
                }
            }
            Self::Constant { .. } => 0.0,
            Self::Exponential { rate } => rate * (rate * u).exp(),
            Self::Linear { .. } => 1.0,
            Self::AbsPower {
                center, exponent, ..
            } => {
                let d = u - center;
                if d == 0.0 {
                    if exponent > 1.0 {
                        0.0
                    } else {
                        f64::NAN
                    }
                } else {
                    exponent * d.abs().powf(exponent - 1.0) * d.signum()
                }
            }
            Self::Riccati { .. } => 2.0 * u,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Self::Collapse { kappa } => format!("sqrt({kappa})*u^2*sqrt(u-1)"),
            Self::Constant { sigma } => format!("{sigma}"),
            Self::Exponential { rate } => format!("exp({rate}*x)"),
            Self::Linear { root } => format!("x-{root}"),
            Self::AbsPower {
                center,
                exponent,
                offset,
            } => format!("|x-{center}|^{exponent}+{offset}"),
            Self::Riccati { alpha } => format!("{alpha}+u^2"),
        }
    }
}

/// Drift `b(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftSpec {
    #[default]
    Zero,
    Constant { b: f64 },
    /// `ψψ'`, the Itô drift equivalent to the Stratonovich equation in the convention
    /// `b = ψψ'`.
    PsiPsiPrime,
    /// `½ψψ'`, the classical Stratonovich-to-Itô correction.
    HalfPsiPsiPrime,
}

impl DriftSpec {
    pub fn value(&self, psi: &PsiSpec, u: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { b } => b,
            Self::PsiPsiPrime => psi_psi_prime(psi, u),
            Self::HalfPsiPsiPrime => 0.5 * psi_psi_prime(psi, u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero) || matches!(self, Self::Constant { b } if *b == 0.0)
    }
}

fn psi_psi_prime(psi: &PsiSpec, u: f64) -> f64 {
    match *psi {
        // polynomial form, finite down to u = 1
        PsiSpec::Collapse { kappa } => 0.5 * kappa * u.powi(3) * (5.0 * u - 4.0),
        _ => psi.value(u) * psi.derivative(u),
    }
}

/// Itô drift equivalent to the Stratonovich collapse equation: `ψψ' = κu³(5u−4)/2`.
pub fn ito_stratonovich_drift(params: &ModelParams, u: f64) -> f64 {
    DriftSpec::PsiPsiPrime.value(&PsiSpec::collapse(params), u)
}
