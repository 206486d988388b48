//! Streaming overlap-save engine with per-block bandwidth changes.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::coeffs::{build_coefficients, DftCoefficientSet, TransitionCoeffs};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spec::{BinAssignment, DiscretizedSpec};

/// Real-input block transform: `N` real samples to `N/2 + 1` bins and back.
/// The inverse is unnormalized.
pub trait BlockTransform<T>: Send {
    fn len(&self) -> usize;
    fn forward(&mut self, time: &mut [T], spectrum: &mut [Complex<T>]) -> Result<()>;
    fn inverse(&mut self, spectrum: &mut [Complex<T>], time: &mut [T]) -> Result<()>;
}

/// [`BlockTransform`] backed by `realfft`.
pub struct RealFft<T: Real> {
    forward: Arc<dyn RealToComplex<T>>,
    inverse: Arc<dyn ComplexToReal<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> RealFft<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = RealFftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward.get_scratch_len().max(inverse.get_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
        }
    }
}

impl<T: Real> BlockTransform<T> for RealFft<T> {
    fn len(&self) -> usize {
        self.forward.len()
    }

    fn forward(&mut self, time: &mut [T], spectrum: &mut [Complex<T>]) -> Result<()> {
        self.forward
            .process_with_scratch(time, spectrum, &mut self.scratch)
            .map_err(|e| Error::Domain(e.to_string()))
    }

    fn inverse(&mut self, spectrum: &mut [Complex<T>], time: &mut [T]) -> Result<()> {
        // Real signals have real DC and Nyquist bins; clear rounding residue.
        let last = spectrum.len() - 1;
        spectrum[0].im = T::zero();
        spectrum[last].im = T::zero();
        self.inverse
            .process_with_scratch(spectrum, time, &mut self.scratch)
            .map_err(|e| Error::Domain(e.to_string()))
    }
}

/// How the spectrum is weighted per block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    /// Complex `H(k)` on every bin, output from the last `M` samples.
    Conventional,
    /// Real `H_R(k)` on transition bins only, output window shifted by `D1`.
    #[default]
    Symmetric,
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineMode::Conventional => "conventional",
            EngineMode::Symmetric => "symmetric",
        })
    }
}

/// What [`OlsEngine::flush`] emits after the last input sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailPolicy {
    /// Output length is input length plus `L − 1`.
    #[default]
    Full,
    /// Output length equals input length.
    None,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EngineStats {
    pub blocks: u64,
    pub retunes: u64,
    /// Real multiplications spent on spectral weighting.
    pub weighting_multiplications: u64,
    pub samples_in: u64,
    pub samples_out: u64,
}

enum Kernel<T: Real> {
    /// Variable-bandwidth coefficients from a design.
    Designed {
        disc: DiscretizedSpec,
        values: TransitionCoeffs<T>,
        coeffs: DftCoefficientSet<T>,
        /// Half-spectrum `H(k)`, conventional mode only.
        complex: Vec<Complex<T>>,
        pending_bin: Option<i64>,
    },
    /// Fixed half-spectrum of a zero-padded FIR filter.
    Fixed { complex: Vec<Complex<T>> },
}

pub struct OlsEngine<T: Real> {
    n_fft: usize,
    block_advance: usize,
    filter_length: usize,
    group_delay: Option<usize>,
    mode: EngineMode,
    kernel: Kernel<T>,
    transform: Box<dyn BlockTransform<T>>,
    window: Vec<T>,
    time: Vec<T>,
    spectrum: Vec<Complex<T>>,
    /// Input samples not yet forming a full block.
    staged: Vec<T>,
    stats: EngineStats,
}

fn half_spectrum<T: Real>(coeffs: &DftCoefficientSet<T>) -> Vec<Complex<T>> {
    let mut h = coeffs.complex_coeffs();
    h.truncate(coeffs.n_fft() / 2 + 1);
    h
}

impl<T: Real> OlsEngine<T> {
    pub fn new(disc: &DiscretizedSpec, values: &TransitionCoeffs<T>, bin: i64, mode: EngineMode) -> Result<Self> {
        Self::with_transform(disc, values, bin, mode, Box::new(RealFft::new(disc.n_fft)))
    }

    pub fn with_transform(
        disc: &DiscretizedSpec,
        values: &TransitionCoeffs<T>,
        bin: i64,
        mode: EngineMode,
        transform: Box<dyn BlockTransform<T>>,
    ) -> Result<Self> {
        let coeffs = build_coefficients(disc, values, bin)?;
        let complex = match mode {
            EngineMode::Conventional => half_spectrum(&coeffs),
            EngineMode::Symmetric => Vec::new(),
        };
        let kernel = Kernel::Designed {
            disc: disc.clone(),
            values: values.clone(),
            coeffs,
            complex,
            pending_bin: None,
        };
        Self::assemble(
            disc.n_fft,
            disc.filter_length,
            Some(disc.delay_design),
            mode,
            kernel,
            transform,
        )
    }

    /// Classical overlap-save of a fixed FIR filter `h` (length `L ≤ N`),
    /// zero-padded to `N`. Output is the plain linear convolution.
    pub fn from_impulse_response(h: &[T], n_fft: usize) -> Result<Self> {
        if h.is_empty() || h.len() > n_fft {
            return Err(Error::Input(format!(
                "impulse response of length {} does not fit N = {n_fft}",
                h.len()
            )));
        }
        let mut transform: Box<dyn BlockTransform<T>> = Box::new(RealFft::new(n_fft));
        let mut padded = vec![T::zero(); n_fft];
        padded[..h.len()].copy_from_slice(h);
        let mut complex = vec![Complex::new(T::zero(), T::zero()); n_fft / 2 + 1];
        transform.forward(&mut padded, &mut complex)?;
        Self::assemble(
            n_fft,
            h.len(),
            None,
            EngineMode::Conventional,
            Kernel::Fixed { complex },
            transform,
        )
    }

    fn assemble(
        n_fft: usize,
        filter_length: usize,
        group_delay: Option<usize>,
        mode: EngineMode,
        kernel: Kernel<T>,
        transform: Box<dyn BlockTransform<T>>,
    ) -> Result<Self> {
        if transform.len() != n_fft {
            return Err(Error::Dimension {
                expected: n_fft,
                got: transform.len(),
            });
        }
        let block_advance = n_fft - filter_length + 1;
        Ok(Self {
            n_fft,
            block_advance,
            filter_length,
            group_delay,
            mode,
            kernel,
            transform,
            window: vec![T::zero(); n_fft],
            time: vec![T::zero(); n_fft],
            spectrum: vec![Complex::new(T::zero(), T::zero()); n_fft / 2 + 1],
            staged: Vec::with_capacity(block_advance),
            stats: EngineStats::default(),
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_advance
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    /// Bin currently applied (ignores a staged change); `None` for a fixed
    /// filter.
    pub fn bin(&self) -> Option<i64> {
        match &self.kernel {
            Kernel::Designed { coeffs, .. } => Some(coeffs.b_bin()),
            Kernel::Fixed { .. } => None,
        }
    }

    pub fn coefficients(&self) -> Option<&DftCoefficientSet<T>> {
        match &self.kernel {
            Kernel::Designed { coeffs, .. } => Some(coeffs),
            Kernel::Fixed { .. } => None,
        }
    }

    /// Delay of the designed response, `D1` samples: output sample `j`
    /// approximates the filtered input around `j − D1`.
    pub fn group_delay(&self) -> Option<usize> {
        self.group_delay
    }

    /// Time from an input sample entering a block to the end of the block
    /// that carries its delayed response, `D1 + M − 1` samples.
    pub fn system_delay(&self) -> usize {
        self.group_delay.unwrap_or(0) + self.block_advance - 1
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Stages `bin` for the next block.
    pub fn set_bin(&mut self, bin: i64) -> Result<()> {
        match &mut self.kernel {
            Kernel::Designed {
                disc,
                coeffs,
                pending_bin,
                ..
            } => {
                disc.check_bin(bin)?;
                *pending_bin = if bin == coeffs.b_bin() { None } else { Some(bin) };
                Ok(())
            }
            Kernel::Fixed { .. } => Err(Error::Config("a fixed filter has no bandwidth to set".into())),
        }
    }

    /// Stages the bin nearest to `b_rad` (clamped to the design range).
    pub fn set_bandwidth(&mut self, b_rad: f64) -> Result<BinAssignment> {
        let assignment = match &self.kernel {
            Kernel::Designed { disc, .. } => disc.bin_for(b_rad),
            Kernel::Fixed { .. } => {
                return Err(Error::Config("a fixed filter has no bandwidth to set".into()))
            }
        };
        self.set_bin(assignment.bin)?;
        Ok(assignment)
    }

    fn apply_pending(&mut self) -> Result<()> {
        if let Kernel::Designed {
            disc,
            values,
            coeffs,
            complex,
            pending_bin,
        } = &mut self.kernel
        {
            if let Some(bin) = pending_bin.take() {
                coeffs.retune_in_place(disc, bin, values)?;
                if self.mode == EngineMode::Conventional {
                    *complex = half_spectrum(coeffs);
                }
                self.stats.retunes += 1;
            }
        }
        Ok(())
    }

    /// Filters exactly `M` new samples into `M` output samples.
    pub fn process_block(&mut self, input: &[T], output: &mut [T]) -> Result<()> {
        self.filter_block(input, output)?;
        self.stats.samples_in += input.len() as u64;
        Ok(())
    }

    fn filter_block(&mut self, input: &[T], output: &mut [T]) -> Result<()> {
        let (n, m) = (self.n_fft, self.block_advance);
        for len in [input.len(), output.len()] {
            if len != m {
                return Err(Error::Dimension { expected: m, got: len });
            }
        }
        self.apply_pending()?;
        let history = n - m;
        self.window.copy_within(m.., 0);
        self.window[history..].copy_from_slice(input);
        self.time.copy_from_slice(&self.window);
        self.transform.forward(&mut self.time, &mut self.spectrum)?;

        let start = match (&self.kernel, self.mode) {
            (Kernel::Fixed { complex }, _) | (Kernel::Designed { complex, .. }, EngineMode::Conventional) => {
                for (x, h) in self.spectrum.iter_mut().zip(complex) {
                    *x = *x * h;
                }
                self.stats.weighting_multiplications += 4 * self.spectrum.len() as u64;
                history
            }
            (Kernel::Designed { coeffs, .. }, EngineMode::Symmetric) => {
                let (k1, k2) = coeffs.transition_edges();
                let magnitude = coeffs.magnitude();
                for k in k1..=k2 {
                    self.spectrum[k] = self.spectrum[k] * magnitude[k];
                }
                for x in &mut self.spectrum[k2 + 1..] {
                    *x = Complex::new(T::zero(), T::zero());
                }
                self.stats.weighting_multiplications += coeffs.general_multiplications() as u64;
                // Zero-phase weighting: the wanted samples sit D1 = (L−1)/2
                // earlier than in the conventional layout.
                history / 2
            }
        };
        self.transform.inverse(&mut self.spectrum, &mut self.time)?;
        let scale = T::one() / T::from_index(n);
        for (y, &t) in output.iter_mut().zip(&self.time[start..start + m]) {
            *y = t * scale;
        }
        self.stats.blocks += 1;
        self.stats.samples_out += m as u64;
        Ok(())
    }

    /// Buffers `input` and appends the output of every completed block.
    pub fn push(&mut self, input: &[T], output: &mut Vec<T>) -> Result<()> {
        let m = self.block_advance;
        let mut rest = input;
        let mut block = vec![T::zero(); m];
        while !rest.is_empty() {
            let take = (m - self.staged.len()).min(rest.len());
            self.staged.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.staged.len() == m {
                let staged = std::mem::take(&mut self.staged);
                self.process_block(&staged, &mut block)?;
                self.staged = staged;
                self.staged.clear();
                output.extend_from_slice(&block);
            }
        }
        Ok(())
    }

    /// Ends the stream: zero-pads the staged samples and emits the tail
    /// selected by `policy`. History and counters are reset afterwards.
    pub fn flush(&mut self, policy: TailPolicy, output: &mut Vec<T>) -> Result<()> {
        let m = self.block_advance;
        let consumed = self.stats.samples_in as usize + self.staged.len();
        let target = match policy {
            TailPolicy::Full => consumed + self.filter_length - 1,
            TailPolicy::None => consumed,
        };
        let mut emitted = self.stats.samples_in as usize;
        let mut block = vec![T::zero(); m];
        while emitted < target {
            let mut input = std::mem::take(&mut self.staged);
            input.resize(m, T::zero());
            self.filter_block(&input, &mut block)?;
            let keep = (target - emitted).min(m);
            output.extend_from_slice(&block[..keep]);
            emitted += keep;
        }
        self.reset();
        Ok(())
    }

    /// Clears history, staged input and counters; keeps the current bin.
    pub fn reset(&mut self) {
        self.window.iter_mut().for_each(|x| *x = T::zero());
        self.staged.clear();
        self.stats = EngineStats::default();
    }

    /// Filters a whole signal with a per-block bin schedule
    /// `(sample_index, bin)`; indices must be multiples of `M`.
    pub fn run(
        &mut self,
        input: &[T],
        schedule: &[(usize, i64)],
        policy: TailPolicy,
    ) -> Result<Vec<T>> {
        let m = self.block_advance;
        let mut events = schedule.to_vec();
        events.sort_by_key(|e| e.0);
        for &(index, _) in &events {
            if index % m != 0 {
                return Err(Error::Input(format!(
                    "retune at sample {index} is not on a block boundary (M = {m})"
                )));
            }
        }
        let mut output = Vec::with_capacity(input.len() + self.filter_length);
        let mut next = events.iter().peekable();
        let mut position = 0;
        while position < input.len() {
            while let Some(&&(index, bin)) = next.peek() {
                if index > position {
                    break;
                }
                self.set_bin(bin)?;
                next.next();
            }
            let end = (position + m).min(input.len());
            self.push(&input[position..end], &mut output)?;
            position = end;
        }
        for &(_, bin) in next {
            self.set_bin(bin)?;
        }
        self.flush(policy, &mut output)?;
        Ok(output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{discretize, FilterSpec};

    fn toy() -> (DiscretizedSpec, TransitionCoeffs<f64>) {
        let d = discretize(&FilterSpec::new(0.5, 0.26, 0.6).with_length(7), 7, 16).unwrap();
        (d, TransitionCoeffs::new(vec![0.8, 0.5, 0.2]).unwrap())
    }

    fn signal(len: usize) -> Vec<f64> {
        (0..len).map(|i| ((i * 37 % 101) as f64 - 50.0) / 50.0).collect()
    }

    #[test]
    fn modes_agree() {
        let (d, v) = toy();
        let x = signal(83);
        let mut a = OlsEngine::new(&d, &v, 3, EngineMode::Conventional).unwrap();
        let mut b = OlsEngine::new(&d, &v, 3, EngineMode::Symmetric).unwrap();
        let schedule = [(20, 4), (40, 2), (50, 5)];
        let ya = a.run(&x, &schedule, TailPolicy::Full).unwrap();
        let yb = b.run(&x, &schedule, TailPolicy::Full).unwrap();
        assert_eq!(ya.len(), x.len() + d.filter_length - 1);
        for (p, q) in ya.iter().zip(&yb) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_mode_counts_two_per_transition_bin() {
        let (d, v) = toy();
        let mut e = OlsEngine::new(&d, &v, 3, EngineMode::Symmetric).unwrap();
        let mut out = vec![0.0; d.block_advance];
        e.process_block(&vec![1.0; d.block_advance], &mut out).unwrap();
        assert_eq!(e.stats().weighting_multiplications, 2 * d.k_transition_count as u64);
    }

    #[test]
    fn push_granularity_does_not_matter() {
        let (d, v) = toy();
        let x = signal(57);
        let mut whole = OlsEngine::new(&d, &v, 4, EngineMode::Symmetric).unwrap();
        let mut out_whole = Vec::new();
        whole.push(&x, &mut out_whole).unwrap();
        whole.flush(TailPolicy::None, &mut out_whole).unwrap();

        let mut pieces = OlsEngine::new(&d, &v, 4, EngineMode::Symmetric).unwrap();
        let mut out_pieces = Vec::new();
        for chunk in x.chunks(3) {
            pieces.push(chunk, &mut out_pieces).unwrap();
        }
        pieces.flush(TailPolicy::None, &mut out_pieces).unwrap();
        assert_eq!(out_whole.len(), x.len());
        assert_eq!(out_whole, out_pieces);
    }

    #[test]
    fn empty_stream_tail() {
        let (d, v) = toy();
        let mut e = OlsEngine::new(&d, &v, 4, EngineMode::Symmetric).unwrap();
        let mut out = Vec::new();
        e.flush(TailPolicy::Full, &mut out).unwrap();
        assert_eq!(out, vec![0.0; d.filter_length - 1]);
        let mut out = Vec::new();
        e.flush(TailPolicy::None, &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn impulse_appears_after_group_delay() {
        // All-pass design (v = 1) reduces to a pure delay of D1 samples.
        let (d, _) = toy();
        let v = TransitionCoeffs::new(vec![1.0; 3]).unwrap();
        let mut e = OlsEngine::new(&d, &v, d.b_bins_upper, EngineMode::Symmetric).unwrap();
        let mut x = vec![0.0f64; 30];
        x[5] = 1.0;
        let y = e.run(&x, &[], TailPolicy::Full).unwrap();
        let peak = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(peak, 5 + d.delay_design);
    }

    #[test]
    fn setting_same_bin_is_not_a_retune() {
        let (d, v) = toy();
        let mut e = OlsEngine::new(&d, &v, 3, EngineMode::Symmetric).unwrap();
        e.set_bin(3).unwrap();
        let mut out = vec![0.0; d.block_advance];
        e.process_block(&vec![0.0; d.block_advance], &mut out).unwrap();
        assert_eq!(e.stats().retunes, 0);
        assert!(e.set_bin(99).is_err());
    }

    #[test]
    fn fir_matches_direct_convolution() {
        let h = [0.5, -0.25, 0.125, 1.0, 0.0625];
        let x = signal(61);
        let mut e = OlsEngine::from_impulse_response(&h, 16).unwrap();
        let y = e.run(&x, &[], TailPolicy::Full).unwrap();
        assert_eq!(y.len(), x.len() + h.len() - 1);
        for (j, &yj) in y.iter().enumerate() {
            let direct: f64 = (0..h.len())
                .filter(|&i| j >= i && j - i < x.len())
                .map(|i| h[i] * x[j - i])
                .sum();
            assert!((yj - direct).abs() < 1e-12, "sample {j}");
        }
        assert!(e.set_bin(1).is_err());
    }

    #[test]
    fn schedule_off_block_boundary_is_rejected() {
        let (d, v) = toy();
        let mut e = OlsEngine::new(&d, &v, 3, EngineMode::Symmetric).unwrap();
        assert!(e.run(&signal(40), &[(3, 4)], TailPolicy::Full).is_err());
    }

    #[test]
    fn wrong_block_size_is_dimension_error() {
        let (d, v) = toy();
        let mut e = OlsEngine::new(&d, &v, 3, EngineMode::Symmetric).unwrap();
        let mut out = vec![0.0; d.block_advance];
        assert!(matches!(
            e.process_block(&[1.0], &mut out),
            Err(Error::Dimension { .. })
        ));
    }
}
