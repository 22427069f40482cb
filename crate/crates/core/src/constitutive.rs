//! Membrane constitutive laws in curvilinear components.
//!
//! Stresses are returned as surface Kirchhoff components `τ^{αβ} = J σ^{αβ}`
//! (force per unit reference length) together with the moduli
//! `c^{αβγδ}` that give `Δτ^{αβ} = c^{αβγδ} a_γ · Δa_δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeformationMeasures, Mat2, SurfaceFrame};

/// Constitutive choice for a membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialModel {
    /// Incompressible Neo-Hooke membrane with stiffness `μT`.
    NeoHooke {
        #[serde(rename = "muT")]
        mu_t: f64,
    },
    /// Constant isotropic surface tension `γ`.
    Liquid { gamma: f64 },
    /// Surface tension plus an in-plane-only Neo-Hooke regularization.
    StabilizedLiquid { gamma: f64, mu_stab: f64 },
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            MaterialModel::NeoHooke { mu_t } if !ok(mu_t) => Err(Error::InvalidMaterial(format!(
                "muT must be positive, got {mu_t}"
            ))),
            MaterialModel::Liquid { gamma } if !ok(gamma) => Err(Error::InvalidMaterial(format!(
                "gamma must be positive, got {gamma}"
            ))),
            MaterialModel::StabilizedLiquid { gamma, mu_stab } => {
                if !ok(gamma) {
                    return Err(Error::InvalidMaterial(format!(
                        "gamma must be positive, got {gamma}"
                    )));
                }
                if !(mu_stab.is_finite() && mu_stab >= 0.0) {
                    return Err(Error::InvalidMaterial(format!(
                        "mu_stab must be non-negative, got {mu_stab}"
                    )));
                }
                if mu_stab > 0.1 * gamma {
                    log::warn!(
                        "stabilization stiffness {mu_stab} exceeds 0.1*gamma; results may be biased"
                    );
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Characteristic stiffness (μT or γ), used to scale penalties.
    pub fn stiffness_scale(&self) -> f64 {
        match *self {
            MaterialModel::NeoHooke { mu_t } => mu_t,
            MaterialModel::Liquid { gamma } | MaterialModel::StabilizedLiquid { gamma, .. } => {
                gamma
            }
        }
    }

    pub fn surface_tension(&self) -> Option<f64> {
        match *self {
            MaterialModel::NeoHooke { .. } => None,
            MaterialModel::Liquid { gamma } | MaterialModel::StabilizedLiquid { gamma, .. } => {
                Some(gamma)
            }
        }
    }

    pub fn is_stabilized(&self) -> bool {
        matches!(self, MaterialModel::StabilizedLiquid { .. })
    }
}

/// Rank-4 moduli with major and minor symmetry, stored in Voigt order
/// `(11, 22, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moduli(pub [[f64; 3]; 3]);

#[inline]
fn voigt(a: usize, b: usize) -> usize {
    if a == b {
        a
    } else {
        2
    }
}

impl Moduli {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.0[voigt(a, b)][voigt(c, d)]
    }

    fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        const IDX: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
        let mut m = [[0.0; 3]; 3];
        for (i, &(a, b)) in IDX.iter().enumerate() {
            for (j, &(c, d)) in IDX.iter().enumerate() {
                m[i][j] = f(a, b, c, d);
            }
        }
        Moduli(m)
    }

    pub fn add(&self, other: &Moduli) -> Moduli {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += other.0[i][j];
            }
        }
        Moduli(m)
    }
}

/// Stress and tangent state at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressState {
    /// Kirchhoff components routed into the full internal force.
    pub tau: Mat2,
    /// Stabilization part routed only into the in-plane force.
    pub tau_stab: Mat2,
    /// Moduli of `tau`.
    pub c: Moduli,
    /// Moduli of `tau_stab`.
    pub c_stab: Moduli,
    pub j: f64,
    /// Current-to-reference thickness `t/T` (Neo-Hooke only).
    pub thickness_ratio: Option<f64>,
    /// Strain energy per unit reference area.
    pub energy_density: f64,
}

impl StressState {
    pub fn c_total(&self) -> Moduli {
        self.c.add(&self.c_stab)
    }

    pub fn tau_total(&self) -> Mat2 {
        let mut t = self.tau;
        for a in 0..2 {
            for b in 0..2 {
                t[a][b] += self.tau_stab[a][b];
            }
        }
        t
    }

    /// Mixed Cauchy components `σ^α_β = τ^{αγ} a_{γβ} / J` of the total stress.
    pub fn cauchy_mixed(&self, frame: &SurfaceFrame) -> Mat2 {
        let t = self.tau_total();
        let mut s = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                s[a][b] = (0..2).map(|g| t[a][g] * frame.a_cov[g][b]).sum::<f64>() / self.j;
            }
        }
        s
    }
}

/// Unit alternator `e^{αβ}`.
const ALT: Mat2 = [[0.0, 1.0], [-1.0, 0.0]];

fn neo_hooke(mu: f64, def: &DeformationMeasures, frame: &SurfaceFrame) -> (Mat2, Moduli, f64) {
    let j = def.j;
    let jm2 = 1.0 / (j * j);
    let big = &def.a_con_push;
    let small = &frame.a_con;
    let mut tau = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            tau[a][b] = mu * (big[a][b] - small[a][b] * jm2);
        }
    }
    let inv_det = 1.0 / frame.det();
    let c = Moduli::from_fn(|a, b, g, d| {
        mu * jm2
            * (4.0 * small[a][b] * small[g][d]
                - inv_det * (ALT[a][g] * ALT[b][d] + ALT[a][d] * ALT[b][g]))
    });
    let trace: f64 = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| big[a][b] * frame.a_cov[a][b])
        .sum();
    let energy = 0.5 * mu * (trace + jm2 - 3.0);
    (tau, c, energy)
}

fn liquid(gamma: f64, def: &DeformationMeasures, frame: &SurfaceFrame) -> (Mat2, Moduli, f64) {
    let j = def.j;
    let small = &frame.a_con;
    let mut tau = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            tau[a][b] = gamma * j * small[a][b];
        }
    }
    let inv_det = 1.0 / frame.det();
    let c = Moduli::from_fn(|a, b, g, d| {
        gamma
            * j
            * (inv_det * (ALT[a][g] * ALT[b][d] + ALT[a][d] * ALT[b][g])
                - small[a][b] * small[g][d])
    });
    (tau, c, gamma * j)
}

/// Evaluate stresses and moduli for `model` at one point.
pub fn evaluate(
    model: &MaterialModel,
    def: &DeformationMeasures,
    cur_frame: &SurfaceFrame,
) -> Result<StressState> {
    if !(def.j.is_finite() && def.j > 0.0) {
        return Err(Error::NonPositiveStretch(def.j));
    }
    let zero = [[0.0; 2]; 2];
    Ok(match *model {
        MaterialModel::NeoHooke { mu_t } => {
            let (tau, c, energy_density) = neo_hooke(mu_t, def, cur_frame);
            StressState {
                tau,
                tau_stab: zero,
                c,
                c_stab: Moduli::default(),
                j: def.j,
                thickness_ratio: Some(1.0 / def.j),
                energy_density,
            }
        }
        MaterialModel::Liquid { gamma } => {
            let (tau, c, energy_density) = liquid(gamma, def, cur_frame);
            StressState {
                tau,
                tau_stab: zero,
                c,
                c_stab: Moduli::default(),
                j: def.j,
                thickness_ratio: None,
                energy_density,
            }
        }
        MaterialModel::StabilizedLiquid { gamma, mu_stab } => {
            let (tau, c, e_liq) = liquid(gamma, def, cur_frame);
            let (tau_stab, c_stab, e_stab) = neo_hooke(mu_stab, def, cur_frame);
            StressState {
                tau,
                tau_stab,
                c,
                c_stab,
                j: def.j,
                thickness_ratio: None,
                energy_density: e_liq + e_stab,
            }
        }
    })
}

/// Minimum principal stress and whether it signals in-plane compression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinPrincipal {
    pub sigma_min: f64,
    pub compression: bool,
}

/// `σ_min = I₁/2 − √(I₁²/4 − I₂)` from mixed components `σ^α_β`.
pub fn min_principal_stress(sigma_mixed: &Mat2) -> Result<MinPrincipal> {
    let s = sigma_mixed;
    if s.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonSymmetrizableStress(f64::NAN));
    }
    let i1 = s[0][0] + s[1][1];
    let i2 = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let mut disc = 0.25 * i1 * i1 - i2;
    let scale = (0.25 * i1 * i1).max(i2.abs()).max(1.0);
    if disc < 0.0 {
        if disc < -1e-12 * scale {
            return Err(Error::NonSymmetrizableStress(disc));
        }
        disc = 0.0;
    }
    let sigma_min = 0.5 * i1 - disc.sqrt();
    Ok(MinPrincipal {
        sigma_min,
        compression: sigma_min < 0.0,
    })
}

/// First invariant `I₁ = σ^α_α`.
pub fn first_invariant(sigma_mixed: &Mat2) -> f64 {
    sigma_mixed[0][0] + sigma_mixed[1][1]
}
