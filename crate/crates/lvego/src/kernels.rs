//! Covariance functions on continuous, latent and categorical inputs, and
//! their product composition.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Anisotropic parameters of the continuous kernel factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousKernelParams {
    /// One positive lengthscale per continuous dimension.
    pub lengthscales: Vec<f64>,
    /// Process variance sigma^2.
    pub variance: f64,
}

impl ContinuousKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive, got {}",
                self.variance
            )));
        }
        for (i, &l) in self.lengthscales.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "lengthscale[{i}] must be positive, got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// Continuous kernel family. Matern 5/2 is the default; the squared
/// exponential sits behind a config switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ContinuousFamily {
    Matern52,
    SquaredExponential,
}

fn scaled_sq_distance(x: &[f64], y: &[f64], params: &ContinuousKernelParams) -> Result<f64> {
    if x.len() != y.len() || x.len() != params.lengthscales.len() {
        return Err(Error::InvalidArgument(format!(
            "kernel input lengths do not match: {} vs {} vs {} lengthscales",
            x.len(),
            y.len(),
            params.lengthscales.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .zip(&params.lengthscales)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum())
}

/// Matern 5/2: `sigma^2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r)` with `r` the
/// anisotropic scaled Euclidean distance.
pub fn matern52(x: &[f64], y: &[f64], params: &ContinuousKernelParams) -> Result<f64> {
    params.validate()?;
    let r2 = scaled_sq_distance(x, y, params)?;
    Ok(params.variance * matern52_of_r2(r2))
}

#[inline]
pub(crate) fn matern52_of_r2(r2: f64) -> f64 {
    let r = r2.sqrt();
    let sqrt5r = f64::sqrt(5.0) * r;
    (1.0 + sqrt5r + 5.0 * r2 / 3.0) * (-sqrt5r).exp()
}

/// Squared exponential: `sigma^2 exp(-r^2 / 2)`.
pub fn squared_exponential(x: &[f64], y: &[f64], params: &ContinuousKernelParams) -> Result<f64> {
    params.validate()?;
    let r2 = scaled_sq_distance(x, y, params)?;
    Ok(params.variance * sqexp_of_r2(r2))
}

#[inline]
pub(crate) fn sqexp_of_r2(r2: f64) -> f64 {
    (-0.5 * r2).exp()
}

#[inline]
pub(crate) fn family_of_r2(family: ContinuousFamily, r2: f64) -> f64 {
    match family {
        ContinuousFamily::Matern52 => matern52_of_r2(r2),
        ContinuousFamily::SquaredExponential => sqexp_of_r2(r2),
    }
}

/// Continuous kernel of the configured family.
pub fn continuous_kernel(
    family: ContinuousFamily,
    x: &[f64],
    y: &[f64],
    params: &ContinuousKernelParams,
) -> Result<f64> {
    match family {
        ContinuousFamily::Matern52 => matern52(x, y, params),
        ContinuousFamily::SquaredExponential => squared_exponential(x, y, params),
    }
}

/// Dot-product kernel on latent coordinates.
pub fn dot_latent(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "latent vectors of different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Compound-symmetry parameters: one shared off-diagonal correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundSymmetryParams {
    pub variance: f64,
    pub correlation: f64,
}

impl CompoundSymmetryParams {
    /// Validity for a variable with `m` levels: `v > 0` and
    /// `c in (-1/(m-1), 1)`, which keeps `v [(1-c) I + c 11^T]` PSD.
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "compound symmetry variance must be positive, got {}",
                self.variance
            )));
        }
        let lower = -1.0 / (m as f64 - 1.0);
        if !(self.correlation > lower && self.correlation < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "compound symmetry correlation {} outside ({lower}, 1)",
                self.correlation
            )));
        }
        Ok(())
    }
}

/// Compound-symmetry kernel value: `v` on the diagonal, `v c` off it.
pub fn compound_symmetry(
    u: usize,
    v: usize,
    m: usize,
    params: &CompoundSymmetryParams,
) -> Result<f64> {
    params.validate(m)?;
    if u < 1 || u > m || v < 1 || v > m {
        return Err(Error::InvalidArgument(format!(
            "levels ({u}, {v}) outside 1..={m}"
        )));
    }
    Ok(if u == v {
        params.variance
    } else {
        params.variance * params.correlation
    })
}

/// A symmetric positive semidefinite categorical covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalCovMatrix {
    matrix: DMatrix<f64>,
}

impl CategoricalCovMatrix {
    /// Validates symmetry and PSD-ness (minimum eigenvalue above
    /// `-1e-10 * trace`).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument("covariance matrix must be square".into()));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * (1.0 + matrix[(i, j)].abs()) {
                    return Err(Error::InvalidArgument(format!(
                        "covariance matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let trace = matrix.trace();
        let min_eig = nalgebra::SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .min();
        if min_eig < -1e-10 * trace.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "covariance matrix not PSD: min eigenvalue {min_eig:.3e} (trace {trace:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Realize from compound-symmetry parameters for `m` levels.
    pub fn from_compound_symmetry(m: usize, params: &CompoundSymmetryParams) -> Result<Self> {
        params.validate(m)?;
        let mut t = DMatrix::from_element(m, m, params.variance * params.correlation);
        for k in 0..m {
            t[(k, k)] = params.variance;
        }
        Self::new(t)
    }

    /// Realize as the dot-product Gram of level coordinates (rows of `phi`).
    pub fn from_latent_rows(phi: &DMatrix<f64>) -> Result<Self> {
        Self::new(phi * phi.transpose())
    }

    pub fn entry(&self, k: usize, l: usize) -> Result<f64> {
        let m = self.matrix.nrows();
        if k < 1 || k > m || l < 1 || l > m {
            return Err(Error::InvalidArgument(format!(
                "levels ({k}, {l}) outside 1..={m}"
            )));
        }
        Ok(self.matrix[(k - 1, l - 1)])
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_levels(&self) -> usize {
        self.matrix.nrows()
    }
}

/// One categorical kernel factor of the product composition.
#[derive(Debug, Clone)]
pub enum CategoricalKernelPart {
    /// Covariance realized through level coordinates (rows) and the
    /// dot-product kernel.
    Latent(DMatrix<f64>),
    /// Compound symmetry with the given parameters.
    CompoundSymmetry(CompoundSymmetryParams),
}

impl CategoricalKernelPart {
    fn value(&self, u: usize, v: usize) -> Result<f64> {
        match self {
            CategoricalKernelPart::Latent(phi) => {
                let m = phi.nrows();
                if u < 1 || u > m || v < 1 || v > m {
                    return Err(Error::InvalidArgument(format!(
                        "levels ({u}, {v}) outside 1..={m}"
                    )));
                }
                dot_latent(
                    phi.row(u - 1).transpose().as_slice(),
                    phi.row(v - 1).transpose().as_slice(),
                )
            }
            CategoricalKernelPart::CompoundSymmetry(p) => {
                // Level bounds are unknown here beyond the pair itself; the
                // caller supplies m through the owning map when building T.
                Ok(if u == v {
                    p.variance
                } else {
                    p.variance * p.correlation
                })
            }
        }
    }
}

/// Product composition across the continuous kernel and one categorical
/// factor per discrete variable.
pub fn product_mixed_kernel(
    x: &[f64],
    y: &[f64],
    u: &[usize],
    v: &[usize],
    family: ContinuousFamily,
    cont: &ContinuousKernelParams,
    parts: &[CategoricalKernelPart],
) -> Result<f64> {
    if u.len() != parts.len() || v.len() != parts.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} categorical coordinates, got {} and {}",
            parts.len(),
            u.len(),
            v.len()
        )));
    }
    let mut k = continuous_kernel(family, x, y, cont)?;
    for (j, part) in parts.iter().enumerate() {
        k *= part.value(u[j], v[j])?;
    }
    Ok(k)
}
