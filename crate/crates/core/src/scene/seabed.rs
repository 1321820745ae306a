//! Power-law random seabed sampled on a regular grid.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Heights on a square lattice, bilinearly interpolated in between and
/// clamped to the border outside.
#[derive(Debug, Clone)]
pub struct HeightGrid {
    origin: f64,
    cell: f64,
    n: usize,
    z: Vec<f64>,
}

/// Highest spatial frequency index of the synthesis; the shortest wavelength
/// is `span / MAX_WAVENUMBER`.
const MAX_WAVENUMBER: i64 = 40;

impl HeightGrid {
    pub fn flat(half_span: f64, cell: f64) -> Self {
        let n = (2.0 * half_span / cell).ceil() as usize + 1;
        Self {
            origin: -half_span,
            cell,
            n,
            z: vec![0.0; n * n],
        }
    }

    /// Zero-mean field with power spectrum `∝ |k|^exponent` and RMS height
    /// `amplitude`, periodic over the grid span.
    pub fn spectral(half_span: f64, cell: f64, amplitude: f64, exponent: f64, seed: u64) -> Self {
        let mut grid = Self::flat(half_span, cell);
        if amplitude == 0.0 {
            return grid;
        }
        let n = grid.n;
        let span = (n - 1) as f64 * cell;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kmax = MAX_WAVENUMBER;
        let side = (2 * kmax + 1) as usize;
        // Complex coefficients c[kx][ky]; the real part of the sum is kept.
        let mut coef = vec![(0.0, 0.0); side * side];
        for kx in -kmax..=kmax {
            for ky in -kmax..=kmax {
                if kx == 0 && ky == 0 {
                    continue;
                }
                let k = ((kx * kx + ky * ky) as f64).sqrt();
                let a = k.powf(exponent / 2.0);
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                coef[(kx + kmax) as usize * side + (ky + kmax) as usize] = (a * re, a * im);
            }
        }
        let w = 2.0 * PI / span;
        let phase = |k: i64, i: usize| {
            let t = w * k as f64 * i as f64 * cell;
            (t.cos(), t.sin())
        };
        // g[kx][iy] = Σ_ky c[kx][ky] e^{i w ky y}
        let mut g = vec![(0.0, 0.0); side * n];
        for iy in 0..n {
            let ey: Vec<(f64, f64)> = (-kmax..=kmax).map(|ky| phase(ky, iy)).collect();
            for ix in 0..side {
                let (mut re, mut im) = (0.0, 0.0);
                for (iky, &(c, s)) in ey.iter().enumerate() {
                    let (a, b) = coef[ix * side + iky];
                    re += a * c - b * s;
                    im += a * s + b * c;
                }
                g[ix * n + iy] = (re, im);
            }
        }
        for ix in 0..n {
            let ex: Vec<(f64, f64)> = (-kmax..=kmax).map(|kx| phase(kx, ix)).collect();
            for iy in 0..n {
                let mut h = 0.0;
                for (ikx, &(c, s)) in ex.iter().enumerate() {
                    let (a, b) = g[ikx * n + iy];
                    h += a * c - b * s;
                }
                grid.z[ix * n + iy] = h;
            }
        }
        let mean = grid.z.iter().sum::<f64>() / grid.z.len() as f64;
        let rms = (grid.z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / grid.z.len() as f64).sqrt();
        grid.z.iter_mut().for_each(|v| *v = (*v - mean) * amplitude / rms);
        grid
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let last = (self.n - 1) as f64;
        let u = ((x - self.origin) / self.cell).clamp(0.0, last);
        let v = ((y - self.origin) / self.cell).clamp(0.0, last);
        let (i, j) = ((u as usize).min(self.n - 2), (v as usize).min(self.n - 2));
        let (fu, fv) = (u - i as f64, v - j as f64);
        let z = |a: usize, b: usize| self.z[a * self.n + b];
        (1.0 - fu) * ((1.0 - fv) * z(i, j) + fv * z(i, j + 1)) + fu * ((1.0 - fv) * z(i + 1, j) + fv * z(i + 1, j + 1))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
