//! Periodically time-varying impulse responses of the overlap-save filter.
//!
//! With frequency-sampled coefficients the inverse DFT `d(q)` of `H(k)` has
//! full length `N`, so the block engine is an `M`-periodic system. Output
//! sample `n` of every block (`n = 0..M−1`) sees its own time-invariant
//! response
//!
//! ```text
//! h_n(q) = d((q − M + 1) mod N)   for n <= q < n + N, zero otherwise,
//! ```
//!
//! all of them windows of one circularly extended `d`. `d_n(q) = h_n(q + n)`
//! is the same window re-indexed from zero.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::coeffs::DftCoefficientSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance on the imaginary residue of an inverse DFT that should be real.
pub(crate) fn real_residue_tolerance<T: Real>() -> T {
    if T::epsilon() < T::lit(1e-10) {
        T::lit(1e-12)
    } else {
        T::lit(1e3) * T::epsilon()
    }
}

fn symmetry_tolerance<T: Real>() -> T {
    if T::epsilon() < T::lit(1e-10) {
        T::lit(1e-9)
    } else {
        T::lit(1e3) * T::epsilon()
    }
}

/// Real inverse DFT of a conjugate-symmetric spectrum.
pub fn base_response_from_spectrum<T: Real>(spectrum: &[Complex<T>]) -> Result<Vec<T>> {
    let n = spectrum.len();
    if n == 0 {
        return Err(Error::Input("empty spectrum".into()));
    }
    let scale = spectrum.iter().fold(T::one(), |m, c| m.max(c.norm()));
    for k in 1..n {
        if (spectrum[n - k] - spectrum[k].conj()).norm() > symmetry_tolerance::<T>() * scale {
            return Err(Error::Input(format!(
                "spectrum is not conjugate-symmetric at bin {k}"
            )));
        }
    }
    if spectrum[0].im.abs() > symmetry_tolerance::<T>() * scale {
        return Err(Error::Input("DC bin is not real".into()));
    }
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let inv_n = T::one() / T::from_index(n);
    let residue = buf.iter().fold(T::zero(), |m, c| m.max(c.im.abs())) * inv_n;
    if residue > real_residue_tolerance::<T>() * scale {
        return Err(Error::Input(format!(
            "inverse DFT has imaginary residue {residue:e}"
        )));
    }
    Ok(buf.iter().map(|c| c.re * inv_n).collect())
}

/// `d_{M−1}(q)`, the inverse DFT of `H(k, b)`.
pub fn base_response<T: Real>(coeffs: &DftCoefficientSet<T>) -> Result<Vec<T>> {
    base_response_from_spectrum(&coeffs.complex_coeffs())
}

/// The `M` time-invariant responses of one coefficient set.
#[derive(Debug, Clone, PartialEq)]
pub struct PtvirSet<T> {
    d_base: Vec<T>,
    block_advance: usize,
    b_bin: i64,
}

impl<T: Real> PtvirSet<T> {
    pub fn new(coeffs: &DftCoefficientSet<T>, block_advance: usize) -> Result<Self> {
        Self::from_base(base_response(coeffs)?, block_advance, coeffs.b_bin())
    }

    pub fn from_base(d_base: Vec<T>, block_advance: usize, b_bin: i64) -> Result<Self> {
        if block_advance == 0 || block_advance > d_base.len() {
            return Err(Error::Input(format!(
                "block advance {block_advance} incompatible with DFT length {}",
                d_base.len()
            )));
        }
        Ok(Self {
            d_base,
            block_advance,
            b_bin,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.d_base.len()
    }

    pub fn block_advance(&self) -> usize {
        self.block_advance
    }

    pub fn b_bin(&self) -> i64 {
        self.b_bin
    }

    /// `d_{M−1}`.
    pub fn base(&self) -> &[T] {
        &self.d_base
    }

    /// Length of every `h_n` as a dense vector: `N + M − 1`.
    pub fn impulse_len(&self) -> usize {
        self.n_fft() + self.block_advance - 1
    }

    fn check_phase(&self, n: usize) -> Result<()> {
        if n >= self.block_advance {
            return Err(Error::Range {
                what: "phase",
                value: n as i64,
                lo: 0,
                hi: self.block_advance as i64 - 1,
            });
        }
        Ok(())
    }

    #[inline]
    fn circular(&self, i: i64) -> T {
        self.d_base[i.rem_euclid(self.n_fft() as i64) as usize]
    }

    /// `d_n(q) = d_{M−1}((q + n − M + 1) mod N)`.
    pub fn phase_response(&self, n: usize) -> Result<Vec<T>> {
        self.check_phase(n)?;
        let shift = n as i64 - self.block_advance as i64 + 1;
        Ok((0..self.n_fft() as i64)
            .map(|q| self.circular(q + shift))
            .collect())
    }

    /// `h_n(q)` for `q = 0..N+M−2`.
    pub fn impulse_response(&self, n: usize) -> Result<Vec<T>> {
        self.check_phase(n)?;
        Ok(self.shifted_window(n, self.impulse_len()))
    }

    /// The window `h_n` without the `n < M` restriction, `len` samples long.
    pub(crate) fn shifted_window(&self, n: usize, len: usize) -> Vec<T> {
        let n_fft = self.n_fft();
        let lag = self.block_advance as i64 - 1;
        (0..len)
            .map(|q| {
                if q >= n && q < n + n_fft {
                    self.circular(q as i64 - lag)
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    /// `H_n(e^{jω}) = Σ_q h_n(q)·e^{−jωq}` by direct summation.
    pub fn frequency_response(&self, n: usize, grid: &ResponseGrid<T>) -> Result<Vec<Complex<T>>> {
        let h = self.impulse_response(n)?;
        Ok(grid.omega().iter().map(|&w| dtft(&h, w)).collect())
    }

    /// `H_n` on `points` uniformly spaced frequencies covering `[0, π]`, by a
    /// zero-padded FFT of length `2(points − 1)`.
    pub fn frequency_response_uniform(&self, n: usize, points: usize) -> Result<Vec<Complex<T>>> {
        self.check_phase(n)?;
        let plan = UniformSpectrum::new(points, self.impulse_len())?;
        Ok(plan.evaluate(&self.shifted_window(n, self.impulse_len())))
    }
}

/// Direct DTFT `Σ_q h(q)·e^{−jωq}`.
pub(crate) fn dtft<T: Real>(h: &[T], omega: T) -> Complex<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    for (q, &x) in h.iter().enumerate() {
        if x != T::zero() {
            let (s, c) = (omega * T::from_index(q)).sin_cos();
            re = re + x * c;
            im = im - x * s;
        }
    }
    Complex::new(re, im)
}

/// Zero-padded FFT evaluation of a DTFT on a uniform `[0, π]` grid.
#[derive(Clone)]
pub(crate) struct UniformSpectrum<T: Real> {
    points: usize,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> UniformSpectrum<T> {
    pub(crate) fn new(points: usize, support: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Input("a frequency grid needs at least two points".into()));
        }
        let len = 2 * (points - 1);
        if len < support {
            return Err(Error::Input(format!(
                "grid of {points} points too coarse for a response of length {support}"
            )));
        }
        Ok(Self {
            points,
            fft: FftPlanner::new().plan_fft_forward(len),
        })
    }

    pub(crate) fn step(&self) -> T {
        T::PI() / T::from_index(self.points - 1)
    }

    pub(crate) fn evaluate(&self, h: &[T]) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft.len()];
        for (b, &x) in buf.iter_mut().zip(h) {
            b.re = x;
        }
        self.fft.process(&mut buf);
        buf.truncate(self.points);
        buf
    }
}

/// Strictly increasing frequencies in `[0, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid<T> {
    omega: Vec<T>,
}

impl<T: Real> ResponseGrid<T> {
    pub fn new(omega: Vec<T>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Input("empty frequency grid".into()));
        }
        if omega.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("frequency grid is not increasing".into()));
        }
        if omega[0] < T::zero() || *omega.last().unwrap() > T::PI() {
            return Err(Error::Input("frequency grid leaves [0, π]".into()));
        }
        Ok(Self { omega })
    }

    /// `points` equally spaced frequencies from 0 to π inclusive.
    pub fn uniform(points: usize) -> Self {
        let points = points.max(2);
        let step = T::PI() / T::from_index(points - 1);
        let mut omega: Vec<T> = (0..points).map(|i| step * T::from_index(i)).collect();
        omega[points - 1] = T::PI();
        Self { omega }
    }

    /// Uniform grid with `density·N` intervals.
    pub fn with_density(n_fft: usize, density: usize) -> Self {
        Self::uniform(density * n_fft + 1)
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Ideal delayed lowpass `e^{−jωD}` on `[0, edge]`, zero elsewhere.
pub fn desired_response<T: Real>(omega: T, passband_edge: T, delay: usize) -> Complex<T> {
    if omega <= passband_edge {
        Complex::from_polar(T::one(), -omega * T::from_index(delay))
    } else {
        Complex::new(T::zero(), T::zero())
    }
}
