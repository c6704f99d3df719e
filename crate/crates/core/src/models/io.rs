//! Assembling systems from Matrix Market files and node-coordinate CSVs.

use std::path::{Path, PathBuf};

use crate::dynamics::LtiSystem;
use crate::error::{Error, Result};
use crate::linalg::{mm, CsrMatrix, DenseMatrix, Vector};
use crate::optimizer::CostSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct SystemPaths {
    pub a: PathBuf,
    pub e: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub x0: Option<PathBuf>,
    /// node coordinates (CSV, one value per line) for profile-built x0
    pub coords: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub r: Option<PathBuf>,
}

/// Closed-form initial profile exp(-beta^2 xi^2) - exp(-beta^2 L^2),
/// evaluated on coordinates loaded from file.
#[derive(Debug, Clone, Copy)]
pub struct ProfileParams<T> {
    pub beta: T,
    pub half_length: T,
}

pub fn read_coords_csv<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let pathstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pathstr, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .map_err(|_| Error::parse(&pathstr, idx + 1, format!("bad coordinate '{trimmed}'")))?;
        out.push(T::of(v));
    }
    if out.is_empty() {
        return Err(Error::parse(&pathstr, 1, "no coordinates found"));
    }
    Ok(out)
}

/// Load (E, A, B, x0) and, when the weight files are present, the cost data.
/// x0 comes either from a vector file or from the profile on loaded
/// coordinates; absent both, it is zero.
pub fn load_system<T: Scalar>(
    paths: &SystemPaths,
    profile: Option<ProfileParams<T>>,
    horizon: Option<T>,
) -> Result<(LtiSystem<T>, Option<CostSpec<T>>)> {
    let a: CsrMatrix<T> = mm::read_csr(&paths.a)?;
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "{}: system matrix is {}x{}",
            paths.a.display(),
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();

    let b: DenseMatrix<T> = match &paths.b {
        Some(p) => mm::read_dense(p)?,
        None => DenseMatrix::zeros(n, 1),
    };

    let x0: Vector<T> = if let Some(p) = &paths.x0 {
        Vector::from_vec(mm::read_vector(p)?)
    } else if let Some(p) = &paths.coords {
        let coords = read_coords_csv::<T>(p)?;
        if coords.len() != n {
            return Err(Error::Dimension(format!(
                "{}: {} coordinates for state dimension {}",
                p.display(),
                coords.len(),
                n
            )));
        }
        let prof = profile.ok_or_else(|| {
            Error::InvalidArgument("coordinate file given without profile parameters".into())
        })?;
        let b2 = prof.beta * prof.beta;
        let offset = (-b2 * prof.half_length * prof.half_length).exp();
        Vector::from_vec(
            coords
                .iter()
                .map(|&xi| (-b2 * xi * xi).exp() - offset)
                .collect(),
        )
    } else {
        Vector::zeros(n)
    };

    let mut sys = LtiSystem::new(a, b, x0)?;
    if let Some(p) = &paths.e {
        sys = sys.with_mass_matrix(mm::read_csr(p)?)?;
    }

    let cost = match (&paths.q, &paths.r) {
        (Some(qp), Some(rp)) => {
            let q: CsrMatrix<T> = mm::read_csr(qp)?;
            let r: DenseMatrix<T> = mm::read_dense(rp)?;
            let horizon = horizon.ok_or_else(|| {
                Error::InvalidArgument("cost weights given without a horizon".into())
            })?;
            Some(CostSpec::new(q, r, horizon))
        }
        (None, None) => None,
        _ => {
            return Err(Error::InvalidArgument(
                "state and control weight files must be given together".into(),
            ))
        }
    };
    Ok((sys, cost))
}
