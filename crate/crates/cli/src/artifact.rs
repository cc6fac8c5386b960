//! Versioned JSON model artifact holding everything needed to evaluate `T`
//! and `T^+` without refitting.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle reproduces every coefficient bit for bit.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use koopman_kkl::eigfit::Eigenfunction;
use koopman_kkl::injection::{EigenLattice, Factors, InjectionModel, LatticeNode};
use koopman_kkl::inverse::{KernelKind, KrrModel};
use koopman_kkl::{Cplx, PolyBasis};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ARTIFACT_VERSION: &str = "kkl-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub version: String,
    pub basis: BasisRecord,
    pub lattice: LatticeRecord,
    pub factors: FactorsRecord,
    pub injection: InjectionRecord,
    pub krr: KrrRecord,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisRecord {
    pub exponents: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub m: usize,
    pub n: i64,
    pub mu_re: f64,
    pub mu_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeRecord {
    pub mu_real: f64,
    pub omega: f64,
    pub m_max: usize,
    pub n_max: usize,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenRecord {
    /// `m` for a real factor, `n` for an imaginary one.
    pub index: usize,
    pub mu_re: f64,
    pub mu_im: f64,
    pub beta_re: Vec<f64>,
    pub beta_im: Vec<f64>,
    pub rms_scale: f64,
    pub defect: f64,
    pub lambda_min: f64,
    /// Absent when infinite (exact constant factors).
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorsRecord {
    pub real: Vec<EigenRecord>,
    pub imag: Vec<EigenRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionRecord {
    pub dt: f64,
    pub lambdas: Vec<f64>,
    /// One row per filter rate.
    pub coeffs_re: Vec<Vec<f64>>,
    pub coeffs_im: Vec<Vec<f64>>,
    pub fit_rmse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrrRecord {
    pub z_points: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub length_scale: f64,
    pub xi: f64,
    pub kernel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub created: u64,
}

impl Provenance {
    pub fn now(config_sha256: String, seed: u64) -> Self {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            config_sha256,
            seed,
            created,
        }
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn eigen_record(index: usize, f: &Eigenfunction<f64>) -> EigenRecord {
    EigenRecord {
        index,
        mu_re: f.mu.re,
        mu_im: f.mu.im,
        beta_re: f.beta.iter().map(|z| z.re).collect(),
        beta_im: f.beta.iter().map(|z| z.im).collect(),
        rms_scale: f.rms_scale,
        defect: f.defect,
        lambda_min: f.lambda_min,
        gap: f.gap.is_finite().then_some(f.gap),
    }
}

impl ModelArtifact {
    pub fn new(injection: &InjectionModel<f64>, krr: &KrrModel<f64>, provenance: Provenance) -> Self {
        let lattice = &injection.lattice;
        Self {
            version: ARTIFACT_VERSION.into(),
            basis: BasisRecord {
                exponents: injection.factors.basis().exponents().to_vec(),
            },
            lattice: LatticeRecord {
                mu_real: lattice.mu_real,
                omega: lattice.omega,
                m_max: lattice.m_max,
                n_max: lattice.n_max,
                nodes: lattice
                    .nodes
                    .iter()
                    .map(|n| NodeRecord {
                        m: n.m,
                        n: n.n,
                        mu_re: n.mu.re,
                        mu_im: n.mu.im,
                    })
                    .collect(),
            },
            factors: FactorsRecord {
                real: injection.factors.real.iter().enumerate().map(|(i, f)| eigen_record(i, f)).collect(),
                imag: injection.factors.imag.iter().enumerate().map(|(i, f)| eigen_record(i, f)).collect(),
            },
            injection: InjectionRecord {
                dt: injection.dt,
                lambdas: injection.lambdas.clone(),
                coeffs_re: injection.coeffs.rows().into_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
                coeffs_im: injection.coeffs.rows().into_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
                fit_rmse: injection.fit_rmse.clone(),
            },
            krr: KrrRecord {
                z_points: rows(&krr.z_points),
                alpha: rows(&krr.alpha),
                length_scale: krr.length_scale,
                xi: krr.xi,
                kernel: krr.kernel.name().into(),
            },
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let art: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if art.version != ARTIFACT_VERSION {
            return Err(format!("unsupported version `{}`, expected `{ARTIFACT_VERSION}`", art.version));
        }
        Ok(art)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|message| CliError::Artifact {
            path: path.display().to_string(),
            message,
        })
    }

    /// Rebuilds the fitted models.
    pub fn models(&self) -> Result<(InjectionModel<f64>, KrrModel<f64>), String> {
        let basis = PolyBasis::from_exponents(self.basis.exponents.clone()).map_err(|e| e.to_string())?;
        let eigen = |r: &EigenRecord| -> Result<Eigenfunction<f64>, String> {
            if r.beta_re.len() != basis.len() || r.beta_im.len() != basis.len() {
                return Err(format!("eigenfunction {} has the wrong coefficient count", r.index));
            }
            Ok(Eigenfunction {
                mu: Cplx::new(r.mu_re, r.mu_im),
                beta: r.beta_re.iter().zip(&r.beta_im).map(|(&a, &b)| Cplx::new(a, b)).collect(),
                basis: basis.clone(),
                rms_scale: r.rms_scale,
                defect: r.defect,
                lambda_min: r.lambda_min,
                gap: r.gap.unwrap_or(f64::INFINITY),
            })
        };
        let factors = Factors {
            real: self.factors.real.iter().map(eigen).collect::<Result<_, _>>()?,
            imag: self.factors.imag.iter().map(eigen).collect::<Result<_, _>>()?,
        };
        let l = &self.lattice;
        if factors.real.len() != l.m_max + 1 || factors.imag.len() != l.n_max + 1 {
            return Err("factor counts do not match the lattice".into());
        }
        let lattice = EigenLattice {
            mu_real: l.mu_real,
            omega: l.omega,
            m_max: l.m_max,
            n_max: l.n_max,
            nodes: l
                .nodes
                .iter()
                .map(|n| LatticeNode {
                    m: n.m,
                    n: n.n,
                    mu: Cplx::new(n.mu_re, n.mu_im),
                })
                .collect(),
        };
        let inj = &self.injection;
        let n_z = inj.lambdas.len();
        let k = lattice.nodes.len();
        if inj.coeffs_re.len() != n_z || inj.coeffs_im.len() != n_z {
            return Err("coefficient rows do not match the filter rates".into());
        }
        let mut coeffs = Array2::zeros((n_z, k));
        for j in 0..n_z {
            if inj.coeffs_re[j].len() != k || inj.coeffs_im[j].len() != k {
                return Err(format!("coefficient row {j} does not match the lattice size"));
            }
            for i in 0..k {
                coeffs[[j, i]] = Cplx::new(inj.coeffs_re[j][i], inj.coeffs_im[j][i]);
            }
        }
        let injection = InjectionModel {
            lattice,
            factors,
            lambdas: inj.lambdas.clone(),
            coeffs,
            fit_rmse: inj.fit_rmse.clone(),
            dt: inj.dt,
        };

        let matrix = |v: &[Vec<f64>], name: &str| -> Result<Array2<f64>, String> {
            let cols = v.first().map_or(0, Vec::len);
            if v.iter().any(|r| r.len() != cols) {
                return Err(format!("ragged {name}"));
            }
            Array2::from_shape_vec((v.len(), cols), v.concat()).map_err(|e| e.to_string())
        };
        let z_points = matrix(&self.krr.z_points, "z_points")?;
        let alpha = matrix(&self.krr.alpha, "alpha")?;
        if z_points.nrows() != alpha.nrows() || z_points.ncols() != n_z {
            return Err("krr block is inconsistent with the injection".into());
        }
        let kernel = KernelKind::parse(&self.krr.kernel).ok_or_else(|| format!("unknown kernel `{}`", self.krr.kernel))?;
        let krr = KrrModel {
            z_points,
            alpha,
            length_scale: self.krr.length_scale,
            xi: self.krr.xi,
            kernel,
        };
        Ok((injection, krr))
    }
}
