//! Raster-window geometry: pixel layout, erosion, ball masks and the
//! Riemann-sum kernels every estimator is built on.
//!
//! Pixels are squares of side `h` laid out row-major with row index `j`
//! along `y` and column index `i` along `x`. A pixel belongs to the ball
//! `B(x, t)` iff its center lies within Euclidean distance `t` of `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

const REL_TOL: f64 = 1e-9;

/// Closed-ball membership test shared by every mask so that single-center
/// sums and whole-field sums select the same pixels.
#[inline]
pub(crate) fn within(dist2: f64, t: f64) -> bool {
    dist2 <= t * t * (1.0 + REL_TOL) + 1e-18
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

/// Observation window, pixel side and simulation margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub h: f64,
    #[serde(default)]
    pub margin: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, h: f64, margin: f64) -> Result<Self> {
        let spec = Self { x_min, x_max, y_min, y_max, h, margin };
        spec.validate()?;
        Ok(spec)
    }

    /// The `[0,10] × [0,20]` window with a one-unit margin.
    pub fn standard(h: f64) -> Result<Self> {
        Self::new(0.0, 10.0, 0.0, 20.0, h, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x_min, self.x_max, self.y_min, self.y_max, self.h, self.margin];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bound".into()));
        }
        if self.h <= 0.0 {
            return Err(Error::InvalidGrid(format!("pixel side h = {} must be positive", self.h)));
        }
        if self.margin < 0.0 {
            return Err(Error::InvalidGrid(format!("margin {} must be non-negative", self.margin)));
        }
        for (name, extent) in [("x", self.x_max - self.x_min), ("y", self.y_max - self.y_min)] {
            if extent <= 0.0 {
                return Err(Error::InvalidGrid(format!("{name}-extent {extent} must be positive")));
            }
            let ratio = extent / self.h;
            if (ratio - ratio.round()).abs() > REL_TOL * ratio.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "{name}-extent {extent} is not an integer multiple of h = {}",
                    self.h
                )));
            }
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.h).round() as usize
    }

    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.h).round() as usize
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn area(&self) -> f64 {
        self.len() as f64 * self.pixel_area()
    }

    pub fn window(&self) -> Rect {
        Rect::new(self.x_min, self.x_max, self.y_min, self.y_max)
    }

    /// Window expanded by the margin on every side.
    pub fn sim_window(&self) -> Rect {
        let m = self.margin;
        Rect::new(self.x_min - m, self.x_max + m, self.y_min - m, self.y_max + m)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x_min + (i as f64 + 0.5) * self.h,
            self.y_min + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Pixel centers in row-major order.
    pub fn centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let nx = self.nx();
        (0..self.len()).map(move |k| self.center(k % nx, k / nx))
    }

    /// Same pixel lattice, ignoring the margin.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.nx() == other.nx()
            && self.ny() == other.ny()
            && (self.h - other.h).abs() <= REL_TOL * self.h
            && (self.x_min - other.x_min).abs() <= REL_TOL * self.h
            && (self.y_min - other.y_min).abs() <= REL_TOL * self.h
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

/// Real-valued raster field. Values are non-negative unless the field was
/// built with [`ScalarField::signed`] (raw Gaussian fields).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    spec: GridSpec,
    values: Vec<T>,
    signed: bool,
}

impl<T: Real> ScalarField<T> {
    /// Non-negative field; rejects negative or non-finite values.
    pub fn new(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        Self::check_len(&spec, values.len())?;
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < T::zero()) {
            return Err(Error::InvalidField(format!("value {v} at pixel {k} is negative or non-finite")));
        }
        Ok(Self { spec, values, signed: false })
    }

    /// Field whose values may be negative; only finiteness is checked.
    pub fn signed(spec: GridSpec, values: Vec<T>) -> Result<Self> {
        Self::check_len(&spec, values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at pixel {k}")));
        }
        Ok(Self { spec, values, signed: true })
    }

    fn check_len(spec: &GridSpec, len: usize) -> Result<()> {
        if len != spec.len() {
            return Err(Error::InvalidField(format!("{len} values for a {} pixel grid", spec.len())));
        }
        Ok(())
    }

    pub fn constant(spec: GridSpec, c: T) -> Result<Self> {
        Self::new(spec, vec![c; spec.len()])
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![T::zero(); spec.len()], signed: false }
    }

    /// Evaluates `f` at every pixel center.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = spec.centers().map(|[x, y]| T::of(f(x, y))).collect();
        Self::new(spec, values)
    }

    pub(crate) fn from_parts_unchecked(spec: GridSpec, values: Vec<T>, signed: bool) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values, signed }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.spec.index(i, j)]
    }

    /// Riemann sum `h² Σ values` over the whole window.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * T::of(self.spec.pixel_area())
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of(self.values.len() as f64)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Pointwise map; the result must be a valid non-negative field.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with a field on the same lattice.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.spec.check_same(&other.spec, "zip_with")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.spec, values)
    }

    pub fn cast<U: Real>(&self) -> ScalarField<U> {
        ScalarField {
            spec: self.spec,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            signed: self.signed,
        }
    }
}

/// Rasterized set: `true` where the pixel center is covered.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryField {
    spec: GridSpec,
    values: Vec<bool>,
}

impl BinaryField {
    pub fn new(spec: GridSpec, values: Vec<bool>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidField(format!("{} values for a {} pixel grid", values.len(), spec.len())));
        }
        Ok(Self { spec, values })
    }

    pub fn filled(spec: GridSpec, value: bool) -> Self {
        Self { spec, values: vec![value; spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [bool] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.values[self.spec.index(i, j)]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.count() as f64 / self.values.len() as f64
    }

    /// 0/1 field.
    pub fn to_field<T: Real>(&self) -> ScalarField<T> {
        let values = self.values.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
        ScalarField::from_parts_unchecked(self.spec, values, false)
    }
}

/// Pixels of `W ⊖ t`. The erosion of a rectangle is a rectangle of whole
/// pixel columns and rows, stored as index ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    spec: GridSpec,
    t: f64,
    cols: std::ops::Range<usize>,
    rows: std::ops::Range<usize>,
}

impl RegionMask {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.cols.clone()
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.rows.clone()
    }

    pub fn pixel_count(&self) -> usize {
        self.cols.len() * self.rows.len()
    }

    pub fn area(&self) -> f64 {
        self.pixel_count() as f64 * self.spec.pixel_area()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cols.contains(&i) && self.rows.contains(&j)
    }

    /// Row-major `(i, j)` pixel indices.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.clone().flat_map(move |j| self.cols.clone().map(move |i| (i, j)))
    }

    /// Per-pixel inclusion flags over the full grid.
    pub fn included(&self) -> Vec<bool> {
        let nx = self.spec.nx();
        (0..self.spec.len()).map(|k| self.contains(k % nx, k / nx)).collect()
    }
}

/// `W ⊖ t`: pixels whose center `c` satisfies `B(c, t) ⊆ W`.
pub fn erode(spec: &GridSpec, t: f64) -> Result<RegionMask> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("erosion radius {t} must be finite and >= 0")));
    }
    let eps = REL_TOL * spec.h;
    let range = |n: usize, lo: f64, hi: f64| {
        let ok = |k: usize| {
            let c = lo + (k as f64 + 0.5) * spec.h;
            c - t >= lo - eps && c + t <= hi + eps
        };
        let first = (0..n).find(|&k| ok(k));
        match first {
            Some(a) => {
                let b = (a..n).rev().find(|&k| ok(k)).unwrap_or(a);
                a..b + 1
            }
            None => 0..0,
        }
    };
    let cols = range(spec.nx(), spec.x_min, spec.x_max);
    let rows = range(spec.ny(), spec.y_min, spec.y_max);
    if cols.is_empty() || rows.is_empty() {
        return Err(Error::EmptyErosion { t });
    }
    Ok(RegionMask { spec: *spec, t, cols, rows })
}

/// Pixel-offset mask of `B(0, t)` on a lattice of side `h`, stored as one
/// horizontal run `[-w, w]` per row offset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallMask {
    radius: usize,
    half_widths: Vec<usize>,
}

impl BallMask {
    pub fn new(t: f64, h: f64) -> Self {
        assert!(t >= 0.0 && h > 0.0, "ball radius must be >= 0 and pixel side > 0");
        let radius = (0..)
            .take_while(|&k: &usize| within((k as f64 * h).powi(2), t))
            .last()
            .unwrap_or(0);
        let half_widths = (0..=2 * radius)
            .map(|r| {
                let dj = r as i64 - radius as i64;
                let dy2 = (dj as f64 * h).powi(2);
                (0..=radius)
                    .take_while(|&di| within(dy2 + (di as f64 * h).powi(2), t))
                    .last()
                    .unwrap_or(0)
            })
            .collect();
        Self { radius, half_widths }
    }

    /// Largest row/column offset in pixels.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// `(dj, w)`: row offset and half-width of the run in that row.
    pub fn runs(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        let r = self.radius as i64;
        self.half_widths.iter().enumerate().map(move |(k, &w)| (k as i64 - r, w))
    }

    /// All `(di, dj)` offsets inside the ball.
    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.runs().flat_map(|(dj, w)| (-(w as i64)..=w as i64).map(move |di| (di, dj)))
    }

    pub fn pixel_count(&self) -> usize {
        self.half_widths.iter().map(|w| 2 * w + 1).sum()
    }

    /// Pixel-count approximation `count · h²` of the ball area.
    pub fn area(&self, h: f64) -> f64 {
        self.pixel_count() as f64 * h * h
    }
}

/// Riemann-sum approximation of `∫_{B(center, t)} field`.
///
/// The ball must lie inside the window; callers normally guarantee this by
/// restricting centers to [`erode`]`(spec, t)`.
pub fn ball_mass<T: Real>(field: &ScalarField<T>, center: [f64; 2], t: f64) -> Result<T> {
    let s = field.spec();
    let eps = REL_TOL * s.h;
    let [cx, cy] = center;
    if cx - t < s.x_min - eps || cx + t > s.x_max + eps || cy - t < s.y_min - eps || cy + t > s.y_max + eps {
        return Err(Error::BallOutsideWindow { x: cx, y: cy, t });
    }
    let lo = |c: f64, min: f64| (((c - t - min) / s.h - 0.5).floor().max(0.0)) as usize;
    let hi = |c: f64, min: f64, n: usize| ((((c + t - min) / s.h - 0.5).ceil()) as usize).min(n - 1);
    let (i0, i1) = (lo(cx, s.x_min), hi(cx, s.x_min, s.nx()));
    let (j0, j1) = (lo(cy, s.y_min), hi(cy, s.y_min, s.ny()));
    let mut acc = T::zero();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let [px, py] = s.center(i, j);
            if within((px - cx).powi(2) + (py - cy).powi(2), t) {
                acc += field.values()[s.index(i, j)];
            }
        }
    }
    Ok(acc * T::of(s.pixel_area()))
}

/// Per-row prefix sums, the shared kernel behind whole-field ball sums.
#[derive(Clone, Debug)]
pub struct RowPrefix<T> {
    nx: usize,
    sums: Vec<T>,
}

impl<T: Real> RowPrefix<T> {
    pub fn new(field: &ScalarField<T>) -> Self {
        let nx = field.spec().nx();
        let mut sums = Vec::with_capacity(field.values().len() + field.spec().ny());
        for row in field.values().chunks_exact(nx) {
            let mut acc = T::zero();
            sums.push(acc);
            for &v in row {
                acc += v;
                sums.push(acc);
            }
        }
        Self { nx, sums }
    }

    /// Sum of row `j` over columns `a..=b`.
    #[inline]
    fn run(&self, j: usize, a: usize, b: usize) -> T {
        let base = j * (self.nx + 1);
        self.sums[base + b + 1] - self.sums[base + a]
    }

    /// Unscaled pixel sum of the ball mask centered at pixel `(i, j)`.
    #[inline]
    pub fn ball_sum(&self, mask: &BallMask, i: usize, j: usize) -> T {
        mask.runs()
            .map(|(dj, w)| {
                let jj = (j as i64 + dj) as usize;
                self.run(jj, i - w, i + w)
            })
            .sum()
    }
}

fn check_mask_fits(region: &RegionMask, mask: &BallMask) -> Result<()> {
    let s = region.spec();
    let r = mask.radius();
    let fits = region.cols().start >= r
        && region.cols().end + r <= s.nx()
        && region.rows().start >= r
        && region.rows().end + r <= s.ny();
    if fits {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "ball mask of radius {r} px does not fit the erosion by t = {}",
            region.t()
        )))
    }
}

/// `∫_{B(x, t)} field` for every pixel center `x` of `region`, row-major
/// over the region. Selects exactly the pixels [`ball_mass`] would.
pub fn ball_mass_map<T: Real>(prefix: &RowPrefix<T>, region: &RegionMask, mask: &BallMask) -> Result<Vec<T>> {
    check_mask_fits(region, mask)?;
    let scale = T::of(region.spec().pixel_area());
    Ok(region.pixels().map(|(i, j)| prefix.ball_sum(mask, i, j) * scale).collect())
}

/// Integer prefix sums for binary fields; hit tests are exact.
#[derive(Clone, Debug)]
pub struct CountPrefix {
    nx: usize,
    sums: Vec<u32>,
}

impl CountPrefix {
    pub fn new(field: &BinaryField) -> Self {
        let nx = field.spec().nx();
        let mut sums = Vec::with_capacity(field.values().len() + field.spec().ny());
        for row in field.values().chunks_exact(nx) {
            let mut acc = 0u32;
            sums.push(acc);
            for &v in row {
                acc += v as u32;
                sums.push(acc);
            }
        }
        Self { nx, sums }
    }

    /// Number of covered pixels in the ball mask centered at pixel `(i, j)`.
    #[inline]
    pub fn ball_count(&self, mask: &BallMask, i: usize, j: usize) -> u32 {
        mask.runs()
            .map(|(dj, w)| {
                let base = (j as i64 + dj) as usize * (self.nx + 1);
                self.sums[base + i + w + 1] - self.sums[base + i - w]
            })
            .sum()
    }
}

/// For every pixel of `region`: does `B(x, t)` contain a covered pixel?
pub fn hit_map(prefix: &CountPrefix, region: &RegionMask, mask: &BallMask) -> Result<Vec<bool>> {
    check_mask_fits(region, mask)?;
    Ok(region.pixels().map(|(i, j)| prefix.ball_count(mask, i, j) > 0).collect())
}

/// Volume `κ_d t^d` of the `d`-dimensional ball, `d ∈ {1, 2, 3}`.
pub fn lebesgue_ball(t: f64, d: u32) -> f64 {
    let kappa = match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("lebesgue_ball: dimension {d} not in {{1, 2, 3}}"),
    };
    kappa * t.powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(h: f64) -> GridSpec {
        GridSpec::standard(h).unwrap()
    }

    #[test]
    fn erosion_areas() {
        let s = w(0.05);
        assert!((erode(&s, 1.0).unwrap().area() - 144.0).abs() < 1e-9);
        assert!((erode(&s, 0.0).unwrap().area() - 200.0).abs() < 1e-9);
        assert!(matches!(erode(&s, 5.0), Err(Error::EmptyErosion { .. })));
    }

    #[test]
    fn erosion_zero_keeps_everything() {
        let s = w(0.1);
        assert!(erode(&s, 0.0).unwrap().included().iter().all(|&b| b));
    }

    #[test]
    fn erosion_is_monotone() {
        let s = w(0.1);
        let mut last = f64::INFINITY;
        let mut prev: Option<Vec<bool>> = None;
        for k in 0..50 {
            let t = k as f64 * 0.097;
            let m = erode(&s, t).unwrap();
            assert!(m.area() <= last);
            let inc = m.included();
            if let Some(p) = &prev {
                assert!(inc.iter().zip(p).all(|(&a, &b)| !a || b));
            }
            last = m.area();
            prev = Some(inc);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, 10.0, 0.0, 20.0, 0.3, 0.0).is_err());
        assert!(GridSpec::new(0.0, 10.0, 0.0, 20.0, -1.0, 0.0).is_err());
        assert!(GridSpec::new(1.0, 1.0, 0.0, 20.0, 0.1, 0.0).is_err());
        assert!(GridSpec::new(0.0, 10.0, 0.0, 20.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn ball_mass_of_unit_field() {
        let s = w(0.05);
        let ones = ScalarField::<f64>::constant(s, 1.0).unwrap();
        let m = ball_mass(&ones, s.center(100, 200), 1.0).unwrap();
        // Gauss circle count for radius 20 lattice units is 1257.
        assert!((m - 1257.0 * 0.0025).abs() < 1e-12);
        assert!((m - PI).abs() < 0.01);
        assert_eq!(ball_mass(&ScalarField::<f64>::zeros(s), [5.0, 10.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ball_mass_half_plane() {
        let s = w(0.05);
        let half = ScalarField::<f64>::from_fn(s, |x, _| if x < 5.0 { 1.0 } else { 0.0 }).unwrap();
        let ones = ScalarField::<f64>::constant(s, 1.0).unwrap();
        let c = [5.0, 10.0];
        let m = ball_mass(&half, c, 1.0).unwrap();
        assert!((m - ball_mass(&ones, c, 1.0).unwrap() / 2.0).abs() < 1e-12);
        assert!((m - PI / 2.0).abs() < 0.02);
    }

    #[test]
    fn ball_outside_window_is_rejected() {
        let s = w(0.1);
        let f = ScalarField::<f64>::zeros(s);
        assert!(matches!(ball_mass(&f, [0.5, 10.0], 1.0), Err(Error::BallOutsideWindow { .. })));
    }

    #[test]
    fn small_radius_mask_is_the_center_pixel() {
        let m = BallMask::new(0.03, 0.05);
        assert_eq!(m.pixel_count(), 1);
        assert_eq!(BallMask::new(0.0, 0.05).pixel_count(), 1);
        assert_eq!(BallMask::new(0.05, 0.05).pixel_count(), 5);
    }

    #[test]
    fn mask_map_matches_direct_sum() {
        let s = GridSpec::new(0.0, 4.0, 0.0, 3.0, 0.1, 0.0).unwrap();
        let f = ScalarField::<f64>::from_fn(s, |x, y| (x * 3.1).sin().abs() + y).unwrap();
        let prefix = RowPrefix::new(&f);
        for t in [0.0, 0.04, 0.1, 0.37, 1.0] {
            let region = erode(&s, t).unwrap();
            let mask = BallMask::new(t, s.h);
            let map = ball_mass_map(&prefix, &region, &mask).unwrap();
            for ((i, j), v) in region.pixels().zip(&map) {
                let direct = ball_mass(&f, s.center(i, j), t).unwrap();
                assert!((direct - v).abs() < 1e-10 * (1.0 + direct), "t={t} ({i},{j})");
            }
        }
    }

    #[test]
    fn hit_map_agrees_with_counts() {
        let s = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.1, 0.0).unwrap();
        let mut b = BinaryField::filled(s, false);
        b.values_mut()[s.index(10, 10)] = true;
        let region = erode(&s, 0.3).unwrap();
        let mask = BallMask::new(0.3, s.h);
        let hits = hit_map(&CountPrefix::new(&b), &region, &mask).unwrap();
        for ((i, j), hit) in region.pixels().zip(hits) {
            let d2 = ((i as f64 - 10.0).powi(2) + (j as f64 - 10.0).powi(2)) * 0.01;
            assert_eq!(hit, within(d2, 0.3));
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((lebesgue_ball(1.0, 2) - PI).abs() < 1e-15);
        assert_eq!(lebesgue_ball(0.0, 2), 0.0);
        assert!((lebesgue_ball(2.0, 3) - 32.0 * PI / 3.0).abs() < 1e-12);
        assert_eq!(lebesgue_ball(1.5, 1), 3.0);
    }

    #[test]
    fn riemann_error_shrinks_with_h() {
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| (BallMask::new(1.0, h).area(h) - PI).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn field_validation() {
        let s = GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.5, 0.0).unwrap();
        assert!(ScalarField::<f64>::new(s, vec![1.0, -1.0, 0.0, 0.0]).is_err());
        assert!(ScalarField::<f64>::new(s, vec![1.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ScalarField::<f64>::new(s, vec![1.0; 3]).is_err());
        let g = ScalarField::<f64>::signed(s, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(g.is_signed());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ball_mass_is_additive(seed in 0u64..1000, t in 0.0f64..0.9) {
                let s = GridSpec::new(0.0, 2.0, 0.0, 2.0, 0.125, 0.0).unwrap();
                // Dyadic values and pixel area keep the sums exact.
                let f = ScalarField::<f64>::from_fn(s, |x, y| ((x * 7.0 + y * 13.0 + seed as f64) as u64 % 8) as f64 / 4.0).unwrap();
                let g = ScalarField::<f64>::from_fn(s, |x, y| ((x * 5.0 + y * 3.0 + seed as f64) as u64 % 4) as f64 / 2.0).unwrap();
                let fg = f.zip_with(&g, |a, b| a + b).unwrap();
                let c = [1.0, 1.0];
                let lhs = ball_mass(&fg, c, t).unwrap();
                let rhs = ball_mass(&f, c, t).unwrap() + ball_mass(&g, c, t).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
