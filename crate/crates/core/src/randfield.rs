//! Gaussian random fields with exponential covariance, their log-Gaussian
//! exponentials, closed-form mean surfaces and thinning weights.
//!
//! Synthesis uses circulant embedding: the covariance of the pixel lattice
//! is embedded in a periodic covariance on a torus at least twice the grid
//! size, whose eigenvalues are a 2-D FFT of its first row. When the embedding
//! is non-negative definite the samples are exact in distribution.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::seed::SeedKey;

/// Largest grid handed to the dense Cholesky fallback.
pub const DENSE_MAX_PIXELS: usize = 4096;
/// Negative eigenvalues above `-CLIP_REL * max` are set to zero.
pub const CLIP_REL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 3;

/// Covariance `σ² exp(-β ‖x - y‖)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpCovariance {
    pub sigma2: f64,
    pub beta: f64,
}

impl ExpCovariance {
    pub fn new(sigma2: f64, beta: f64) -> Result<Self> {
        let c = Self { sigma2, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponential covariance needs sigma2 > 0 and beta > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn at(&self, lag: f64) -> f64 {
        self.sigma2 * (-self.beta * lag).exp()
    }
}

/// Closed-form deterministic surface on the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeanSurface {
    /// `c`
    Constant { value: f64 },
    /// `(x + y) / scale`
    Planar { scale: f64 },
    /// `y / scale`
    Ramp { scale: f64 },
}

impl MeanSurface {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            MeanSurface::Constant { value } => value,
            MeanSurface::Planar { scale } => (x + y) / scale,
            MeanSurface::Ramp { scale } => y / scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MeanSurface::Constant { value } => value.is_finite(),
            MeanSurface::Planar { scale } | MeanSurface::Ramp { scale } => scale.is_finite() && scale != 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("degenerate surface {self:?}")))
        }
    }

    /// Exact infimum and supremum over a rectangle (all forms are affine).
    pub fn bounds(&self, rect: &crate::grid::Rect) -> (f64, f64) {
        let corners = [
            self.eval(rect.x0, rect.y0),
            self.eval(rect.x1, rect.y0),
            self.eval(rect.x0, rect.y1),
            self.eval(rect.x1, rect.y1),
        ];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Values at the pixel centers.
    pub fn raster(&self, spec: &GridSpec) -> Vec<f64> {
        spec.centers().map(|[x, y]| self.eval(x, y)).collect()
    }
}

enum Method {
    Circulant {
        rows: usize,
        cols: usize,
        sqrt_eig: Vec<f64>,
        row_fft: Arc<dyn Fft<f64>>,
        col_fft: Arc<dyn Fft<f64>>,
    },
    Dense {
        chol: Vec<f64>,
    },
}

/// Reusable sampler for one grid and covariance. Construction does the
/// eigen-decomposition; [`GaussianFieldSampler::sample`] is one FFT.
pub struct GaussianFieldSampler {
    spec: GridSpec,
    cov: ExpCovariance,
    method: Method,
    clipped: usize,
}

impl std::fmt::Debug for GaussianFieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let method = match &self.method {
            Method::Circulant { rows, cols, .. } => format!("circulant {rows}x{cols}"),
            Method::Dense { .. } => "dense".to_string(),
        };
        f.debug_struct("GaussianFieldSampler")
            .field("spec", &self.spec)
            .field("cov", &self.cov)
            .field("method", &method)
            .field("clipped", &self.clipped)
            .finish()
    }
}

fn fft2(data: &mut [Complex<f64>], rows: usize, cols: usize, row_fft: &dyn Fft<f64>, col_fft: &dyn Fft<f64>) {
    row_fft.process(data);
    let mut column = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

impl GaussianFieldSampler {
    pub fn new(spec: &GridSpec, cov: ExpCovariance) -> Result<Self> {
        cov.validate()?;
        let (ny, nx) = (spec.ny(), spec.nx());
        let (mut rows, mut cols) = (2 * ny, 2 * nx);
        let mut planner = FftPlanner::new();
        let mut worst = 0.0;
        for _ in 0..=MAX_DOUBLINGS {
            let mut base = vec![Complex::new(0.0, 0.0); rows * cols];
            for r in 0..rows {
                let dr = r.min(rows - r) as f64;
                for c in 0..cols {
                    let dc = c.min(cols - c) as f64;
                    base[r * cols + c] = Complex::new(cov.at(spec.h * (dr * dr + dc * dc).sqrt()), 0.0);
                }
            }
            let row_fft = planner.plan_fft_forward(cols);
            let col_fft = planner.plan_fft_forward(rows);
            fft2(&mut base, rows, cols, row_fft.as_ref(), col_fft.as_ref());
            let max = base.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let min = base.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min >= -CLIP_REL * max {
                let n = (rows * cols) as f64;
                let clipped = base.iter().filter(|z| z.re < 0.0).count();
                let sqrt_eig = base.iter().map(|z| (z.re.max(0.0) / n).sqrt()).collect();
                return Ok(Self {
                    spec: *spec,
                    cov,
                    method: Method::Circulant { rows, cols, sqrt_eig, row_fft, col_fft },
                    clipped,
                });
            }
            worst = min;
            rows *= 2;
            cols *= 2;
        }
        if spec.len() > DENSE_MAX_PIXELS {
            return Err(Error::EmbeddingFailure { min_eigenvalue: worst, cap: DENSE_MAX_PIXELS });
        }
        Self::dense(spec, cov)
    }

    /// Dense Cholesky sampler; only for grids up to [`DENSE_MAX_PIXELS`].
    pub fn dense(spec: &GridSpec, cov: ExpCovariance) -> Result<Self> {
        cov.validate()?;
        let n = spec.len();
        if n > DENSE_MAX_PIXELS {
            return Err(Error::EmbeddingFailure { min_eigenvalue: f64::NAN, cap: DENSE_MAX_PIXELS });
        }
        let pts: Vec<[f64; 2]> = spec.centers().collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                a[i * n + j] = cov.at(d);
            }
        }
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if d <= 0.0 {
                return Err(Error::EmbeddingFailure { min_eigenvalue: d, cap: DENSE_MAX_PIXELS });
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = 0.0;
            }
        }
        Ok(Self { spec: *spec, cov, method: Method::Dense { chol: a }, clipped: 0 })
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Number of embedding eigenvalues clipped to zero.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Zero-mean deviations at the pixel centers.
    pub fn sample_deviations(&self, seed: SeedKey) -> Vec<f64> {
        let mut rng = seed.rng();
        let (ny, nx) = (self.spec.ny(), self.spec.nx());
        match &self.method {
            Method::Circulant { rows, cols, sqrt_eig, row_fft, col_fft } => {
                let mut data: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft2(&mut data, *rows, *cols, row_fft.as_ref(), col_fft.as_ref());
                let mut out = Vec::with_capacity(nx * ny);
                for r in 0..ny {
                    out.extend(data[r * cols..r * cols + nx].iter().map(|z| z.re));
                }
                out
            }
            Method::Dense { chol } => {
                let n = nx * ny;
                let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..n).map(|i| (0..=i).map(|k| chol[i * n + k] * eps[k]).sum()).collect()
            }
        }
    }

    /// One realization `mean + deviation`, flagged as signed.
    pub fn sample(&self, mean: &MeanSurface, seed: SeedKey) -> Result<ScalarField<f64>> {
        let dev = self.sample_deviations(seed);
        let values = dev.into_iter().zip(mean.raster(&self.spec)).map(|(d, m)| d + m).collect();
        ScalarField::signed(self.spec, values)
    }
}

/// Samples one Gaussian field realization.
pub fn sample_gaussian_field(
    spec: &GridSpec,
    mean: &MeanSurface,
    cov: ExpCovariance,
    seed: SeedKey,
) -> Result<ScalarField<f64>> {
    mean.validate()?;
    GaussianFieldSampler::new(spec, cov)?.sample(mean, seed)
}

/// Pointwise `exp`, producing the log-Gaussian intensity field.
pub fn exp_transform(field: &ScalarField<f64>) -> Result<ScalarField<f64>> {
    ScalarField::new(*field.spec(), field.values().iter().map(|v| v.exp()).collect())
}

/// Retention fields `(r₁, 1 - r₁)` for the thinning model.
pub fn thinning_weights(spec: &GridSpec, r1: &MeanSurface) -> Result<(ScalarField<f64>, ScalarField<f64>)> {
    let mut w1 = Vec::with_capacity(spec.len());
    let mut w2 = Vec::with_capacity(spec.len());
    for [x, y] in spec.centers() {
        let v = r1.eval(x, y);
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::RangeViolation { x, y, value: v });
        }
        w1.push(v);
        w2.push(1.0 - v);
    }
    Ok((ScalarField::new(*spec, w1)?, ScalarField::new(*spec, w2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Stream;

    fn small() -> GridSpec {
        GridSpec::new(0.0, 6.0, 0.0, 6.0, 0.25, 0.0).unwrap()
    }

    #[test]
    fn degenerate_variance_returns_mean() {
        let spec = GridSpec::standard(0.1).unwrap();
        let mean = MeanSurface::Planar { scale: 10.0 };
        let f = sample_gaussian_field(&spec, &mean, ExpCovariance::new(1e-12, 0.8).unwrap(), SeedKey::new(1, 0, Stream::Field)).unwrap();
        let dev = f.values().iter().zip(mean.raster(&spec)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-4, "{dev}");
        assert!(f.is_signed());
    }

    #[test]
    fn variance_and_lag_correlation() {
        let spec = small();
        let cov = ExpCovariance::new(1.0, 0.8).unwrap();
        let s = GaussianFieldSampler::new(&spec, cov).unwrap();
        assert!(s.is_circulant());
        let (nx, ny) = (spec.nx(), spec.ny());
        let (mut var, mut c1, mut c2, mut nv, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for rep in 0..200 {
            let z = s.sample_deviations(SeedKey::new(5, rep, Stream::Field));
            for j in 0..ny {
                for i in 0..nx {
                    let v = z[j * nx + i];
                    var += v * v;
                    nv += 1.0;
                    // lag 1.0 = 4 pixels, horizontally and vertically
                    if i + 4 < nx {
                        c1 += v * z[j * nx + i + 4];
                        n1 += 1.0;
                    }
                    if j + 4 < ny {
                        c2 += v * z[(j + 4) * nx + i];
                        n2 += 1.0;
                    }
                }
            }
        }
        let (var, c1, c2) = (var / nv, c1 / n1, c2 / n2);
        assert!((var - 1.0).abs() < 0.05, "var {var}");
        let target = (-0.8f64).exp();
        assert!((c1 - target).abs() < 0.05, "c1 {c1}");
        assert!((c2 - target).abs() < 0.05, "c2 {c2}");
    }

    #[test]
    fn covariance_depends_only_on_lag() {
        // Diagonal lag sqrt(2)*0.5 checked at two different base locations.
        let spec = small();
        let s = GaussianFieldSampler::new(&spec, ExpCovariance::new(1.0, 0.8).unwrap()).unwrap();
        let nx = spec.nx();
        let (mut a, mut b) = (0.0, 0.0);
        for rep in 0..400 {
            let z = s.sample_deviations(SeedKey::new(9, rep, Stream::Field));
            a += z[2 * nx + 2] * z[4 * nx + 4];
            b += z[15 * nx + 18] * z[17 * nx + 20];
        }
        let target = (-0.8 * 0.5 * 2f64.sqrt()).exp();
        assert!((a / 400.0 - target).abs() < 0.15);
        assert!((b / 400.0 - target).abs() < 0.15);
    }

    #[test]
    fn dense_fallback_matches_covariance() {
        let spec = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.25, 0.0).unwrap();
        let s = GaussianFieldSampler::dense(&spec, ExpCovariance::new(2.0, 1.0).unwrap()).unwrap();
        assert!(!s.is_circulant());
        let (mut var, mut c) = (0.0, 0.0);
        let reps = 4000;
        for rep in 0..reps {
            let z = s.sample_deviations(SeedKey::new(3, rep, Stream::Field));
            var += z[0] * z[0];
            c += z[0] * z[4];
        }
        assert!((var / reps as f64 - 2.0).abs() < 0.15);
        assert!((c / reps as f64 - 2.0 * (-1.0f64).exp()).abs() < 0.15);
    }

    #[test]
    fn reproducible() {
        let spec = small();
        let cov = ExpCovariance::new(1.0, 0.8).unwrap();
        let mean = MeanSurface::Constant { value: 0.0 };
        let k = SeedKey::new(11, 2, Stream::Field);
        assert_eq!(
            sample_gaussian_field(&spec, &mean, cov, k).unwrap(),
            sample_gaussian_field(&spec, &mean, cov, k).unwrap()
        );
    }

    #[test]
    fn exp_transform_values() {
        let spec = small();
        let zero = ScalarField::<f64>::signed(spec, vec![0.0; spec.len()]).unwrap();
        assert!(exp_transform(&zero).unwrap().values().iter().all(|&v| v == 1.0));
        let ln2 = ScalarField::<f64>::signed(spec, vec![2f64.ln(); spec.len()]).unwrap();
        assert!(exp_transform(&ln2).unwrap().values().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn lognormal_mean() {
        let spec = small();
        let s = GaussianFieldSampler::new(&spec, ExpCovariance::new(1.0, 0.8).unwrap()).unwrap();
        let mean = MeanSurface::Constant { value: 0.3 };
        let mut acc = 0.0;
        let reps = 2000;
        for rep in 0..reps {
            let f = exp_transform(&s.sample(&mean, SeedKey::new(21, rep, Stream::Field)).unwrap()).unwrap();
            acc += f.get(7, 7);
        }
        let want = (0.3f64 + 0.5).exp();
        // sd of a lognormal(0.3, 1) draw is about 2.9; 4 standard errors
        assert!((acc / reps as f64 - want).abs() < 4.0 * 2.9 / (reps as f64).sqrt());
    }

    #[test]
    fn thinning_weights_cover_window() {
        let spec = GridSpec::standard(0.05).unwrap();
        let (a, b) = thinning_weights(&spec, &MeanSurface::Constant { value: 0.5 }).unwrap();
        assert!(a.values().iter().chain(b.values()).all(|&v| v == 0.5));
        let (r1, r2) = thinning_weights(&spec, &MeanSurface::Ramp { scale: 20.0 }).unwrap();
        let top = r1.get(0, spec.ny() - 1);
        assert_eq!(top, (20.0 - 0.025) / 20.0);
        for (x, y) in r1.values().iter().zip(r2.values()) {
            assert_eq!(x + y, 1.0);
        }
        assert!(matches!(
            thinning_weights(&spec, &MeanSurface::Ramp { scale: 10.0 }),
            Err(Error::RangeViolation { .. })
        ));
    }
}
