//! Frequency-sampled DFT coefficients of the variable-bandwidth filter.
//!
//! For bandwidth bin `b_N` the magnitude samples are ones up to `k1 − 1`,
//! the shared transition values `V(0..K)` on `k1..=k2`, and zeros above,
//! mirrored so that `H_R(N − k) = H_R(k)`. The complex coefficients carry the
//! linear phase `e^{−j2πk·D1/N}`.

use std::ops::RangeInclusive;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spec::DiscretizedSpec;

/// The `K` optimised transition-band magnitudes, shared by every bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct TransitionCoeffs<T> {
    values: Vec<T>,
}

impl<T: Real> TransitionCoeffs<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("transition value is not finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cast<U: Real>(&self) -> TransitionCoeffs<U> {
        TransitionCoeffs {
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    fn check_len(&self, disc: &DiscretizedSpec) -> Result<()> {
        if self.values.len() != disc.k_transition_count {
            return Err(Error::Dimension {
                expected: disc.k_transition_count,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// First and last transition bins `(k1, k2)` for bandwidth bin `b_bin`.
pub fn transition_edges(disc: &DiscretizedSpec, b_bin: i64) -> Result<(usize, usize)> {
    disc.check_bin(b_bin)?;
    let half = (disc.delta_bins / 2) as i64;
    let k1 = b_bin - half + 1;
    let k2 = b_bin + half - 1;
    Ok((k1 as usize, k2 as usize))
}

/// Passband / transition / stopband index sets of one coefficient set.
///
/// Each band is the union of a lower range and its mirror image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bands {
    pub passband: [RangeInclusive<usize>; 2],
    pub transition: [RangeInclusive<usize>; 2],
    pub stopband: RangeInclusive<usize>,
}

impl Bands {
    fn new(n: usize, k1: usize, k2: usize) -> Self {
        Self {
            // The upper passband image is empty when k1 == 1; N..=N-1 is an
            // empty inclusive range.
            passband: [0..=k1 - 1, n - k1 + 1..=n - 1],
            transition: [k1..=k2, n - k2..=n - k1],
            stopband: k2 + 1..=n - k2 - 1,
        }
    }
}

/// Length-`N` DFT coefficients for one bandwidth bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct DftCoefficientSet<T> {
    b_bin: i64,
    delay_design: usize,
    k1: usize,
    k2: usize,
    magnitude: Vec<T>,
}

impl<T: Real> DftCoefficientSet<T> {
    pub fn b_bin(&self) -> i64 {
        self.b_bin
    }

    pub fn n_fft(&self) -> usize {
        self.magnitude.len()
    }

    pub fn delay_design(&self) -> usize {
        self.delay_design
    }

    /// Real magnitude samples `H_R(k)`.
    pub fn magnitude(&self) -> &[T] {
        &self.magnitude
    }

    pub fn transition_edges(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    pub fn bands(&self) -> Bands {
        Bands::new(self.n_fft(), self.k1, self.k2)
    }

    /// `H(k) = H_R(k)·e^{−j2πk·D1/N}`.
    pub fn complex_coeffs(&self) -> Vec<Complex<T>> {
        let n = self.n_fft();
        let two_pi = T::lit(2.0) * T::PI();
        self.magnitude
            .iter()
            .enumerate()
            .map(|(k, &h)| {
                // Reduce k·D1 mod N before scaling so large k keeps full precision.
                let turns = (k * self.delay_design) % n;
                let phase = -two_pi * T::from_index(turns) / T::from_index(n);
                Complex::from_polar(h, phase)
            })
            .collect()
    }

    /// Real multiplications needed to apply this set to one half-spectrum
    /// (two per transition bin; unit and zero bins are free).
    pub fn general_multiplications(&self) -> usize {
        2 * (self.k2 - self.k1 + 1)
    }

    /// Moves this set to `new_bin` in place. Only the old and new transition
    /// regions are rewritten, by copying constants and the stored values.
    pub fn retune_in_place(
        &mut self,
        disc: &DiscretizedSpec,
        new_bin: i64,
        v: &TransitionCoeffs<T>,
    ) -> Result<()> {
        v.check_len(disc)?;
        let (k1, k2) = transition_edges(disc, new_bin)?;
        if new_bin == self.b_bin {
            return Ok(());
        }
        let n = self.n_fft();
        let (old1, old2) = (self.k1, self.k2);
        for k in old1..=old2 {
            let fill = if k < k1 { T::one() } else { T::zero() };
            self.magnitude[k] = fill;
            self.magnitude[n - k] = fill;
        }
        // Bins between the old and new regions change band too.
        for k in old2 + 1..k1 {
            self.magnitude[k] = T::one();
            self.magnitude[n - k] = T::one();
        }
        for k in k2 + 1..old1 {
            self.magnitude[k] = T::zero();
            self.magnitude[n - k] = T::zero();
        }
        write_transition(&mut self.magnitude, k1, v.values());
        self.k1 = k1;
        self.k2 = k2;
        self.b_bin = new_bin;
        Ok(())
    }

    /// Checks the structural invariants: band partition, mirror symmetry and a
    /// zero Nyquist bin.
    pub fn check_invariants(&self, v: &TransitionCoeffs<T>) -> Result<()> {
        let n = self.n_fft();
        let bands = self.bands();
        for k in 1..n {
            if self.magnitude[k] != self.magnitude[n - k] {
                return Err(Error::Input(format!("magnitude not mirrored at bin {k}")));
            }
        }
        for k in 0..=n / 2 {
            let want = if bands.passband[0].contains(&k) {
                T::one()
            } else if bands.transition[0].contains(&k) {
                v.values()[k - self.k1]
            } else {
                T::zero()
            };
            if self.magnitude[k] != want {
                return Err(Error::Input(format!("bin {k} has the wrong band value")));
            }
        }
        if !bands.stopband.contains(&(n / 2)) || self.magnitude[n / 2] != T::zero() {
            return Err(Error::Input("Nyquist bin is not in the stopband".into()));
        }
        let covered = bands.passband.iter().map(|r| r.clone().count()).sum::<usize>()
            + bands.transition.iter().map(|r| r.clone().count()).sum::<usize>()
            + bands.stopband.clone().count();
        if covered != n {
            return Err(Error::Input(format!("bands cover {covered} of {n} bins")));
        }
        Ok(())
    }
}

fn write_transition<T: Real>(magnitude: &mut [T], k1: usize, values: &[T]) {
    let n = magnitude.len();
    for (r, &value) in values.iter().enumerate() {
        magnitude[k1 + r] = value;
        magnitude[n - k1 - r] = value;
    }
}

/// Assembles the coefficient set for `b_bin`.
pub fn build_coefficients<T: Real>(
    disc: &DiscretizedSpec,
    v: &TransitionCoeffs<T>,
    b_bin: i64,
) -> Result<DftCoefficientSet<T>> {
    v.check_len(disc)?;
    let (k1, k2) = transition_edges(disc, b_bin)?;
    let n = disc.n_fft;
    let mut magnitude = vec![T::zero(); n];
    magnitude[0] = T::one();
    for k in 1..k1 {
        magnitude[k] = T::one();
        magnitude[n - k] = T::one();
    }
    write_transition(&mut magnitude, k1, v.values());
    debug_assert_eq!(magnitude[n / 2], T::zero());
    Ok(DftCoefficientSet {
        b_bin,
        delay_design: disc.delay_design,
        k1,
        k2,
        magnitude,
    })
}

/// Coefficients for `new_bin`, derived from `coeffs` by index-shifted copies.
pub fn retune<T: Real>(
    coeffs: &DftCoefficientSet<T>,
    disc: &DiscretizedSpec,
    new_bin: i64,
    v: &TransitionCoeffs<T>,
) -> Result<DftCoefficientSet<T>> {
    let mut out = coeffs.clone();
    out.retune_in_place(disc, new_bin, v)?;
    Ok(out)
}
