//! Daubechies father functions on a dyadic table.
//!
//! The order-`r` scaling function is supported on `[-(r-1), r]` and
//! reproduces polynomials of degree `r-1`. Filters come from the spectral
//! factorization of the Daubechies polynomial; values at the integers are the
//! unit-eigenvector of the integer refinement matrix, and the dyadic points
//! in between are filled by the cascade
//! `phi(x) = sqrt(2) * sum_t h_t phi(2x - t)`.
//!
//! Off-table points are read by linear interpolation (piecewise constant for
//! Haar, which keeps `r = 1` an exact indicator of `[0, 1)`).

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};

use crate::lattice::CellIndex;
use crate::{Error, Result};

/// Largest supported order.
pub const MAX_ORDER: usize = 10;

/// Default dyadic refinement depth of the value table.
pub const DEFAULT_DEPTH: u32 = 12;

/// Tabulated Daubechies scaling function of order `r`.
#[derive(Debug, Clone)]
pub struct ScalingBasis {
    order: usize,
    depth: u32,
    /// `h_t` for `t = -(r-1) ..= r`.
    filter: Vec<f64>,
    /// `phi(-(r-1) + m 2^-depth)` for `m = 0 ..= (2r-1) 2^depth`.
    values: Vec<f64>,
    steps_per_unit: f64,
}

impl ScalingBasis {
    /// Builds the order-`r` basis tabulated at depth `depth`.
    pub fn new(order: usize, depth: u32) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "scaling order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(6..=24).contains(&depth) {
            return Err(Error::InvalidArgument(format!(
                "table depth must be in 6..=24, got {depth}"
            )));
        }
        let filter = daubechies_filter(order)?;
        let values = if order == 1 {
            haar_table(depth)
        } else {
            // phi vanishes at both ends of its support
            let mut v = cascade_table(&filter, depth)?;
            let last = v.len() - 1;
            v[0] = 0.0;
            v[last] = 0.0;
            v
        };
        Ok(Self {
            order,
            depth,
            filter,
            values,
            steps_per_unit: (1u64 << depth) as f64,
        })
    }

    pub fn haar() -> Self {
        Self::new(1, DEFAULT_DEPTH).expect("haar basis is always constructible")
    }

    /// Order `r`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `R = 2r - 1`, the number of translates meeting one cell per axis.
    pub fn span(&self) -> usize {
        2 * self.order - 1
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Refinement coefficients `h_t`, `t = -(r-1) ..= r`.
    pub fn filter(&self) -> &[f64] {
        &self.filter
    }

    /// Left end of the support, `-(r-1)`.
    pub fn support_start(&self) -> i64 {
        1 - self.order as i64
    }

    /// Abscissae and values of the table.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let start = self.support_start() as f64;
        self.values
            .iter()
            .enumerate()
            .map(move |(m, &v)| (start + m as f64 / self.steps_per_unit, v))
    }

    /// `phi(x)` in one dimension; exactly zero outside `[-(r-1), r)`.
    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        let t = (x - self.support_start() as f64) * self.steps_per_unit;
        if !(t >= 0.0) {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let i = t.floor() as usize;
        if i >= last {
            return 0.0;
        }
        if self.order == 1 {
            return self.values[i];
        }
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// `phi_{j,k}(x) = 2^{jd/2} prod_i phi(2^j x_i - k_i)`.
    pub fn eval(&self, level: u32, k: &[i64], x: &[f64]) -> f64 {
        debug_assert_eq!(k.len(), x.len());
        let scale = dyadic(level);
        let mut value = scale.powf(0.5 * x.len() as f64);
        for (&ki, &xi) in k.iter().zip(x) {
            value *= self.phi(scale * xi - ki as f64);
            if value == 0.0 {
                return 0.0;
            }
        }
        value
    }

    /// Values of the `R^d` active functions of `cell` at `x`, in the order of
    /// [`active_indices`]. The cell indicator is not applied.
    pub fn local_values(&self, cell: &CellIndex, x: &[f64], out: &mut [f64]) {
        let span = self.span();
        let d = x.len();
        debug_assert_eq!(cell.coords.len(), d);
        debug_assert_eq!(out.len(), span.pow(d as u32));
        let scale = dyadic(cell.level);
        let reach = self.order as i64 - 1;

        let mut axes = [[0.0f64; 2 * MAX_ORDER - 1]; 4];
        let mut heap_axes;
        let axes: &mut [[f64; 2 * MAX_ORDER - 1]] = if d <= 4 {
            &mut axes[..d]
        } else {
            heap_axes = vec![[0.0f64; 2 * MAX_ORDER - 1]; d];
            &mut heap_axes[..]
        };
        for (axis, (&xi, &mi)) in axes.iter_mut().zip(x.iter().zip(&cell.coords)) {
            let u = scale * xi - mi as f64;
            for (slot, offset) in axis.iter_mut().zip(-reach..=reach) {
                *slot = self.phi(u - offset as f64);
            }
        }

        let norm = scale.powf(0.5 * d as f64);
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rest = flat;
            let mut v = norm;
            for axis in axes.iter().rev() {
                v *= axis[rest % span];
                rest /= span;
            }
            *slot = v;
        }
    }

    /// Writes the table as CSV with columns `x,phi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,phi")?;
        for (x, v) in self.table() {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }
}

/// `2^level` as a float.
#[inline]
pub fn dyadic(level: u32) -> f64 {
    (level as f64).exp2()
}

/// Axis-aligned box `2^-j (k + [-(r-1), r]^d)`, one `[lo, hi]` per axis.
pub fn support(order: usize, level: u32, k: &[i64]) -> Vec<[f64; 2]> {
    let h = dyadic(level).recip();
    let r = order as f64;
    k.iter()
        .map(|&ki| [h * (ki as f64 - (r - 1.0)), h * (ki as f64 + r)])
        .collect()
}

/// `S_j(H)`: translates whose support covers the open cell, last axis fastest.
pub fn active_indices(order: usize, cell: &CellIndex) -> Vec<Vec<i64>> {
    let reach = order as i64 - 1;
    let span = (2 * reach + 1) as usize;
    let d = cell.coords.len();
    let count = span.pow(d as u32);
    (0..count)
        .map(|flat| {
            let mut rest = flat;
            let mut nu = vec![0i64; d];
            for axis in (0..d).rev() {
                nu[axis] = cell.coords[axis] - reach + (rest % span) as i64;
                rest /= span;
            }
            nu
        })
        .collect()
}

/// Daubechies low-pass filter of order `r` (length `2r`, sum `sqrt 2`),
/// in the usual minimum-phase ordering.
pub fn daubechies_filter(order: usize) -> Result<Vec<f64>> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "scaling order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    // Roots in z of the half-band factor, one per root of the Daubechies
    // polynomial P(y) = sum_k C(r-1+k, k) y^k with y = (2 - z - 1/z) / 4.
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for _ in 0..order {
        poly = multiply_linear(&poly, Complex::new(-1.0, 0.0));
    }
    for y in daubechies_polynomial_roots(order)? {
        let w = Complex::new(2.0, 0.0) - y * 4.0;
        let disc = (w * w - Complex::new(4.0, 0.0)).sqrt();
        let a = (w + disc) * 0.5;
        let b = (w - disc) * 0.5;
        let inside = if a.norm() < b.norm() { a } else { b };
        poly = multiply_linear(&poly, inside);
    }

    // poly holds ascending coefficients with the extra roots inside the unit
    // circle; reversing mirrors them outside, which is the standard phase.
    let mut h: Vec<f64> = poly.iter().rev().map(|c| c.re).collect();
    let imag = poly.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag > 1e-8 {
        return Err(Error::BasisConstruction(format!(
            "spectral factor of order {order} is not real (|im| = {imag:e})"
        )));
    }
    let sum: f64 = h.iter().sum();
    let norm = std::f64::consts::SQRT_2 / sum;
    h.iter_mut().for_each(|c| *c *= norm);
    Ok(h)
}

fn multiply_linear(poly: &[Complex<f64>], root: Complex<f64>) -> Vec<Complex<f64>> {
    // (sum c_i z^i) * (z - root)
    let mut out = vec![Complex::new(0.0, 0.0); poly.len() + 1];
    for (i, &c) in poly.iter().enumerate() {
        out[i + 1] += c;
        out[i] -= c * root;
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn daubechies_polynomial_roots(order: usize) -> Result<Vec<Complex<f64>>> {
    let degree = order - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let coeffs: Vec<f64> = (0..=degree).map(|k| binomial(degree + k, k)).collect();
    let lead = coeffs[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -coeffs[i] / lead;
    }
    let eval = |y: Complex<f64>| -> (Complex<f64>, Complex<f64>) {
        let mut p = Complex::new(0.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * y + p;
            p = p * y + c;
        }
        (p, dp)
    };
    let mut roots: Vec<Complex<f64>> = companion.complex_eigenvalues().iter().copied().collect();
    for y in roots.iter_mut() {
        for _ in 0..50 {
            let (p, dp) = eval(*y);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *y -= step;
            if step.norm() <= 1e-16 * y.norm().max(1.0) {
                break;
            }
        }
        let (p, _) = eval(*y);
        let scale: f64 = coeffs.iter().enumerate().map(|(k, c)| c * y.norm().powi(k as i32)).sum();
        if !(p.norm() <= 1e-9 * scale) {
            return Err(Error::BasisConstruction(format!(
                "root polishing did not converge for order {order}"
            )));
        }
    }
    Ok(roots)
}

fn haar_table(depth: u32) -> Vec<f64> {
    let steps = 1usize << depth;
    let mut values = vec![1.0; steps + 1];
    values[steps] = 0.0;
    values
}

fn cascade_table(filter: &[f64], depth: u32) -> Result<Vec<f64>> {
    let taps = filter.len();
    let length = taps - 1;
    let steps = 1usize << depth;
    let sqrt2 = std::f64::consts::SQRT_2;

    // phi at 0..=length solves phi(n) = sqrt2 * sum_m h_{2n-m} phi(m), sum = 1.
    let mut system = DMatrix::<f64>::zeros(length + 2, length + 1);
    for n in 0..=length {
        for m in 0..=length {
            let t = 2 * n as i64 - m as i64;
            if (0..taps as i64).contains(&t) {
                system[(n, m)] = sqrt2 * filter[t as usize];
            }
        }
        system[(n, n)] -= 1.0;
    }
    for m in 0..=length {
        system[(length + 1, m)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(length + 2);
    rhs[length + 1] = 1.0;
    let integer_values = system
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::BasisConstruction(format!("integer eigenvector: {e}")))?;
    let residual = (&system * &integer_values - &rhs).amax();
    if !(residual < 1e-10) {
        return Err(Error::BasisConstruction(format!(
            "integer eigenvector did not converge (residual {residual:e})"
        )));
    }

    let size = length * steps + 1;
    let mut values = vec![0.0; size];
    for n in 0..=length {
        values[n * steps] = integer_values[n];
    }
    for level in 1..=depth {
        let stride = 1usize << (depth - level);
        let mut idx = stride;
        while idx < size {
            let mut acc = 0.0;
            for (t, &h) in filter.iter().enumerate() {
                let src = 2 * idx as i64 - (t * steps) as i64;
                if src >= 0 && (src as usize) < size {
                    acc += h * values[src as usize];
                }
            }
            values[idx] = sqrt2 * acc;
            idx += 2 * stride;
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(level: u32, coords: &[i64]) -> CellIndex {
        CellIndex::new(level, coords.to_vec())
    }

    #[test]
    fn haar_is_an_indicator() {
        let b = ScalingBasis::haar();
        assert_eq!(b.phi(0.5), 1.0);
        assert_eq!(b.phi(-0.1), 0.0);
        assert_eq!(b.phi(1.0), 0.0);
        assert_eq!(b.phi(0.0), 1.0);
        assert_eq!(b.phi(1.0 - 1e-9), 1.0);
        assert_eq!(b.filter(), &[std::f64::consts::FRAC_1_SQRT_2; 2]);
    }

    #[test]
    fn order_two_filter_matches_closed_form() {
        let s3 = 3f64.sqrt();
        let denom = 4.0 * std::f64::consts::SQRT_2;
        let expected = [(1.0 + s3) / denom, (3.0 + s3) / denom, (3.0 - s3) / denom, (1.0 - s3) / denom];
        let h = daubechies_filter(2).unwrap();
        for (a, b) in h.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    // Independent check of the factorization: orthonormal shifts and r
    // vanishing moments of the companion high-pass filter.
    #[test]
    fn filters_are_orthonormal_with_vanishing_moments() {
        for r in 1..=MAX_ORDER {
            let h = daubechies_filter(r).unwrap();
            assert_eq!(h.len(), 2 * r);
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12, "r={r} sum={sum}");
            for shift in 0..r {
                let dot: f64 = (0..h.len() - 2 * shift).map(|t| h[t] * h[t + 2 * shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "r={r} shift={shift} dot={dot}");
            }
            for p in 0..r {
                let moment: f64 = h
                    .iter()
                    .enumerate()
                    .map(|(t, &c)| {
                        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                        sign * c * (t as f64).powi(p as i32)
                    })
                    .sum();
                let scale: f64 = h.iter().enumerate().map(|(t, c)| c.abs() * (t as f64).powi(p as i32)).sum();
                assert!(moment.abs() < 1e-9 * scale.max(1.0), "r={r} p={p} moment={moment}");
            }
        }
    }

    #[test]
    fn order_two_integer_values() {
        let b = ScalingBasis::new(2, 8).unwrap();
        let s3 = 3f64.sqrt();
        assert!((b.phi(0.0) - (1.0 + s3) / 2.0).abs() < 1e-12);
        assert!((b.phi(1.0) - (1.0 - s3) / 2.0).abs() < 1e-12);
        assert_eq!(b.phi(-1.0), 0.0);
        assert_eq!(b.phi(2.0), 0.0);
    }

    #[test]
    fn partition_of_unity_at_fixed_point() {
        for r in 1..=MAX_ORDER {
            let b = ScalingBasis::new(r, DEFAULT_DEPTH).unwrap();
            // brute force over every translate that can reach 0.37
            let total: f64 = (-(r as i64) - 1..=r as i64 + 1).map(|k| b.phi(0.37 - k as f64)).sum();
            assert!((total - 1.0).abs() < 1e-6, "r={r} total={total}");
        }
    }

    #[test]
    fn refinement_holds_on_table() {
        for r in 2..=MAX_ORDER {
            let b = ScalingBasis::new(r, 10).unwrap();
            let h = b.filter();
            let start = b.support_start();
            let worst = b
                .table()
                .map(|(x, v)| {
                    let rhs: f64 = h
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * b.phi(2.0 * x - (start + i as i64) as f64))
                        .sum();
                    (v - std::f64::consts::SQRT_2 * rhs).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst <= 1e-9, "r={r} residual={worst}");
        }
    }

    #[test]
    fn eval_examples() {
        let haar = ScalingBasis::haar();
        assert_eq!(haar.eval(0, &[0], &[0.3]), 1.0);
        assert!((haar.eval(2, &[1], &[0.3]) - 2.0).abs() < 1e-15);
        let b3 = ScalingBasis::new(3, DEFAULT_DEPTH).unwrap();
        // support of phi_{2,1} is [-0.25, 1.0]
        assert_eq!(b3.eval(2, &[1], &[-0.26]), 0.0);
        assert_eq!(b3.eval(2, &[1], &[1.01]), 0.0);
        assert_ne!(b3.eval(2, &[1], &[0.3]), 0.0);
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(1, 0, &[0]), vec![[0.0, 1.0]]);
        assert_eq!(support(3, 2, &[0]), vec![[-0.5, 0.75]]);
        assert_eq!(support(2, 1, &[1, 1]), vec![[0.0, 1.5], [0.0, 1.5]]);
    }

    #[test]
    fn active_index_examples() {
        assert_eq!(active_indices(1, &cell(4, &[4])), vec![vec![4]]);
        assert_eq!(active_indices(3, &cell(2, &[1])).len(), 5);
        assert_eq!(active_indices(2, &cell(3, &[1, 5])).len(), 9);
        assert_eq!(active_indices(2, &cell(3, &[1, 5]))[1], vec![0, 5]);
    }

    #[test]
    fn local_values_match_eval() {
        let b = ScalingBasis::new(2, DEFAULT_DEPTH).unwrap();
        let c = cell(3, &[2, 5]);
        let x = [0.3, 0.7];
        let mut out = vec![0.0; 9];
        b.local_values(&c, &x, &mut out);
        for (v, nu) in out.iter().zip(active_indices(2, &c)) {
            assert!((v - b.eval(3, &nu, &x)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(ScalingBasis::new(0, 12), Err(Error::InvalidArgument(_))));
        assert!(matches!(ScalingBasis::new(11, 12), Err(Error::InvalidArgument(_))));
        assert!(matches!(ScalingBasis::new(2, 5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let b = ScalingBasis::new(2, 6).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,phi\n-1,0\n"));
        assert_eq!(text.lines().count(), 3 * 64 + 2);
    }
}
