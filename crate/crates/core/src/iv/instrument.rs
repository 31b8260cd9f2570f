use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lcf::{xi_f, CoprimeFactors};
use crate::error::{Error, Result};
use crate::hankel::HankelBundle;
use crate::linalg::{pinv, rank, vstack, DEFAULT_PINV_TOL};
use crate::schema;

/// Which data blocks make up the instrument matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvVariant {
    /// `col(Z_p, U_f)`; recovers the least-squares SPC predictor.
    OpenLoop,
    /// `col(Z_p, R_f)`
    RefOnly,
    /// `col(Z_p, Ξ_f)`
    LcfOnly,
    /// `col(Z_p, Ξ_f, R_f)`
    Combined,
    /// `col(Z_p)`: independent of the future reference.
    PastOnly,
}

impl IvVariant {
    pub const ALL: [IvVariant; 5] = [
        IvVariant::OpenLoop,
        IvVariant::RefOnly,
        IvVariant::LcfOnly,
        IvVariant::Combined,
        IvVariant::PastOnly,
    ];

    pub fn blocks(self) -> &'static [IvBlock] {
        use IvBlock::*;
        match self {
            IvVariant::OpenLoop => &[PastData, FutureInput],
            IvVariant::RefOnly => &[PastData, FutureReference],
            IvVariant::LcfOnly => &[PastData, ControllerInstrument],
            IvVariant::Combined => &[PastData, ControllerInstrument, FutureReference],
            IvVariant::PastOnly => &[PastData],
        }
    }

    pub fn needs_factors(self) -> bool {
        self.blocks().contains(&IvBlock::ControllerInstrument)
    }

    pub fn needs_reference(self) -> bool {
        self.blocks().contains(&IvBlock::FutureReference)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IvVariant::OpenLoop => "open_loop",
            IvVariant::RefOnly => "ref_only",
            IvVariant::LcfOnly => "lcf_only",
            IvVariant::Combined => "combined",
            IvVariant::PastOnly => "past_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvBlock {
    PastData,
    FutureInput,
    FutureReference,
    ControllerInstrument,
}

/// Instrument matrix `Φ` (already scaled by `1/N̄`) with the quantities
/// derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSet {
    pub variant: IvVariant,
    #[serde(with = "schema::matrix")]
    pub phi: DMatrix<f64>,
    /// Multi-step predictor `Ω* = Y_f Φ^T (col(Z_p, U_f) Φ^T)^†`.
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub omega: Option<DMatrix<f64>>,
    /// Oblique projection `Π`; only materialized on request (it is `N̄ x N̄`).
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub pi: Option<DMatrix<f64>>,
    /// Output injection used to build `Ξ_f`, if any.
    #[serde(default, with = "schema::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub l_c: Option<DMatrix<f64>>,
    /// Relative singular-value threshold of the pseudo-inverses.
    pub pinv_tol: f64,
}

/// Assemble `Φ` for `variant` from the bundle.
pub fn build_iv(
    bundle: &HankelBundle,
    variant: IvVariant,
    factors: Option<&CoprimeFactors>,
) -> Result<InstrumentSet> {
    let xi = if variant.needs_factors() {
        let f = factors.ok_or_else(|| {
            Error::MissingBlock(format!("{} needs coprime factors of the controller", variant.as_str()))
        })?;
        Some(xi_f(f, bundle)?)
    } else {
        None
    };
    let mut parts: Vec<&DMatrix<f64>> = Vec::new();
    for blk in variant.blocks() {
        match blk {
            IvBlock::PastData => parts.push(&bundle.z_p),
            IvBlock::FutureInput => parts.push(&bundle.u_f),
            IvBlock::FutureReference => parts.push(bundle.r_f()?),
            IvBlock::ControllerInstrument => parts.push(xi.as_ref().expect("xi built above")),
        }
    }
    let phi = vstack(&parts)? / bundle.columns() as f64;
    Ok(InstrumentSet {
        variant,
        phi,
        omega: None,
        pi: None,
        l_c: if variant.needs_factors() {
            factors.map(|f| f.l_c.clone())
        } else {
            None
        },
        pinv_tol: DEFAULT_PINV_TOL,
    })
}

impl InstrumentSet {
    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn with_pinv_tol(mut self, tol: f64) -> Self {
        self.pinv_tol = tol;
        self
    }

    /// Compute and store `Ω*`.
    pub fn attach_predictor(&mut self, bundle: &HankelBundle) -> Result<&DMatrix<f64>> {
        let omega = predictor(bundle, self)?;
        Ok(self.omega.insert(omega))
    }

    /// Compute and store `Π`.
    pub fn attach_projection(&mut self, bundle: &HankelBundle) -> Result<&DMatrix<f64>> {
        let pi = projection(bundle, self)?;
        Ok(self.pi.insert(pi))
    }

    pub fn omega(&self) -> Result<&DMatrix<f64>> {
        self.omega
            .as_ref()
            .ok_or_else(|| Error::MissingBlock("instrument set has no predictor attached".into()))
    }

    /// Pseudo-inverse of `col(Z_p, U_f) Φ^T`, checking that its numerical
    /// rank is full.
    pub fn regressor_pinv(&self, bundle: &HankelBundle) -> Result<DMatrix<f64>> {
        if self.phi.ncols() != bundle.columns() {
            return Err(Error::dim(format!(
                "Φ has {} columns, bundle has {}",
                self.phi.ncols(),
                bundle.columns()
            )));
        }
        let w = bundle.regressor();
        let m = &w * self.phi.transpose();
        let (m_pinv, r) = pinv(&m, self.pinv_tol);
        let required = m.nrows().min(m.ncols());
        if r < required {
            let zp = rank(&(&bundle.z_p * self.phi.transpose()), self.pinv_tol);
            let block = if zp < bundle.z_p.nrows().min(self.phi.nrows()) {
                "Z_p Φ^T"
            } else {
                "U_f Φ^T"
            };
            return Err(Error::RankDeficient {
                block: format!("col(Z_p, U_f) Φ^T ({block} for {})", self.variant.as_str()),
                rank: r,
                required,
            });
        }
        Ok(m_pinv)
    }
}

/// Weighted least-squares multi-step predictor
/// `Ω* = Y_f Φ^T (col(Z_p, U_f) Φ^T)^†`.
pub fn predictor(bundle: &HankelBundle, iv: &InstrumentSet) -> Result<DMatrix<f64>> {
    let m_pinv = iv.regressor_pinv(bundle)?;
    Ok(&bundle.y_f * iv.phi.transpose() * m_pinv)
}

/// `Π = Φ^T (col(Z_p, U_f) Φ^T)^† col(Z_p, U_f)` (an `N̄ x N̄` matrix).
pub fn projection(bundle: &HankelBundle, iv: &InstrumentSet) -> Result<DMatrix<f64>> {
    let m_pinv = iv.regressor_pinv(bundle)?;
    Ok(iv.phi.transpose() * m_pinv * bundle.regressor())
}

/// `||E_f Φ^T||_F`: sample cross-moment between future innovations and the
/// instrument.
pub fn iv_noise_correlation(e_f: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<f64> {
    if e_f.ncols() != phi.ncols() {
        return Err(Error::dim("E_f and Φ column counts differ"));
    }
    Ok((e_f * phi.transpose()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_instrument_has_zero_correlation() {
        let e = DMatrix::from_element(2, 5, 1.0);
        let phi = DMatrix::zeros(3, 5);
        assert_eq!(iv_noise_correlation(&e, &phi).unwrap(), 0.0);
        assert!(iv_noise_correlation(&e, &DMatrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn variant_requirements() {
        assert!(IvVariant::Combined.needs_factors());
        assert!(IvVariant::Combined.needs_reference());
        assert!(!IvVariant::OpenLoop.needs_reference());
        assert!(!IvVariant::RefOnly.needs_factors());
    }
}
