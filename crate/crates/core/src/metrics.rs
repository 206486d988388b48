//! Stopband quality of the time-varying filter and the dense-grid error
//! energy used to cross-check the closed-form design.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{build_coefficients, TransitionCoeffs};
use crate::design::PhaseLimitMode;
use crate::error::{Error, Result};
use crate::lptv::{desired_response, dtft, PtvirSet, UniformSpectrum};
use crate::scalar::{magnitude_db, power_db, Real};
use crate::spec::{DiscretizedSpec, FilterSpec};

/// Grid intervals per DFT bin for the stopband metrics.
pub const METRIC_GRID_DENSITY: usize = 16;
/// Base grid intervals per DFT bin for the error-energy quadrature.
pub const ENERGY_GRID_DENSITY: usize = 64;

/// Stopband energies of every phase for one bandwidth, plus the peak level.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStopband<T> {
    /// `(1/π)∫|H_n|²` over the stopband, one entry per phase.
    pub energies: Vec<T>,
    /// `max |H_n|` over phases and stopband grid points.
    pub peak: T,
}

impl<T: Real> PhaseStopband<T> {
    pub fn sbml_db(&self) -> f64 {
        magnitude_db(self.peak)
    }

    pub fn summary(&self) -> StopbandSummary {
        StopbandSummary::from_energies(self.energies.iter().copied(), self.peak)
    }
}

/// Aggregate stopband figures in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopbandSummary {
    /// Peak stopband magnitude over all responses.
    pub sbml_db: f64,
    /// Mean over responses of the per-response stopband energy in dB.
    pub sbe_db: f64,
    /// Mean linear stopband energy, in dB.
    pub sbe_linear_db: f64,
    pub sbe_max_db: f64,
    pub sbe_min_db: f64,
}

impl StopbandSummary {
    fn from_energies<T: Real>(energies: impl Iterator<Item = T>, peak: T) -> Self {
        let mut count = 0usize;
        let (mut db_sum, mut lin_sum) = (0.0, 0.0);
        let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
        for e in energies {
            let db = power_db(e);
            count += 1;
            db_sum += db;
            lin_sum += e.as_f64();
            max = max.max(db);
            min = min.min(db);
        }
        let count = count.max(1) as f64;
        Self {
            sbml_db: magnitude_db(peak),
            sbe_db: db_sum / count,
            sbe_linear_db: power_db(lin_sum / count),
            sbe_max_db: max,
            sbe_min_db: min,
        }
    }
}

/// Trapezoid over samples `values[0..]` spaced `step`, preceded by a partial
/// interval of width `lead` whose left end has value `edge`.
fn trapezoid_with_lead<T: Real>(edge: T, lead: T, values: &[T], step: T) -> T {
    let half = T::lit(0.5);
    let mut acc = if lead > T::zero() && !values.is_empty() {
        half * lead * (edge + values[0])
    } else {
        T::zero()
    };
    for w in values.windows(2) {
        acc = acc + half * step * (w[0] + w[1]);
    }
    acc
}

/// Stopband energies and peak of all `M` phases, for stopband `[edge, π]`.
///
/// The edge does not have to lie on the `density·N`-interval grid; the
/// partial first interval is integrated with the response evaluated at the
/// edge itself.
pub fn stopband_at<T: Real>(set: &PtvirSet<T>, stopband_edge: T, density: usize) -> Result<PhaseStopband<T>> {
    let plan = UniformSpectrum::new(density.max(1) * set.n_fft() + 1, set.impulse_len())?;
    stopband_with(set, stopband_edge, &plan)
}

fn stopband_with<T: Real>(
    set: &PtvirSet<T>,
    stopband_edge: T,
    plan: &UniformSpectrum<T>,
) -> Result<PhaseStopband<T>> {
    if !(stopband_edge < T::PI()) {
        return Err(Error::Input("empty stopband".into()));
    }
    let step = plan.step();
    let pos = stopband_edge / step;
    let mut first = pos.ceil();
    let snapped = (first - pos).abs() < T::lit(1e-9) || (pos - pos.floor()) < T::lit(1e-9);
    if snapped {
        first = pos.round();
    }
    let first = first.as_f64() as usize;
    let lead = T::from_index(first) * step - stopband_edge;
    let len = set.impulse_len();
    let mut energies = Vec::with_capacity(set.block_advance());
    let mut peak = T::zero();
    for n in 0..set.block_advance() {
        let h = set.shifted_window(n, len);
        let spectrum = plan.evaluate(&h);
        let power: Vec<T> = spectrum[first..].iter().map(Complex::norm_sqr).collect();
        let edge = if snapped { T::zero() } else { dtft(&h, stopband_edge).norm_sqr() };
        peak = power.iter().fold(peak.max(edge.sqrt()), |m, p| m.max(p.sqrt()));
        energies.push(trapezoid_with_lead(edge, lead, &power, step) / T::PI());
    }
    Ok(PhaseStopband { energies, peak })
}

/// Design-domain stopband metrics of one coefficient set: stopband edge at
/// the bin-centred `b + Δ_D/2`.
pub fn stopband_metrics<T: Real>(
    set: &PtvirSet<T>,
    disc: &DiscretizedSpec,
    density: usize,
) -> Result<PhaseStopband<T>> {
    let edge = disc.bin_to_rad::<T>(set.b_bin()) + disc.delta_rad::<T>() / T::lit(2.0);
    stopband_at(set, edge, density)
}

/// Where the stopband metrics are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evaluation {
    /// Every design bin, edges from `Δ_D` and the bin-centred `b`.
    Design,
    /// `b` sampled uniformly over the original `[b_lower, b_upper]`, each
    /// sample filtered with its rounded bin and judged against the original
    /// `Δ`.
    Specification { spec: FilterSpec, samples: usize },
}

impl Evaluation {
    /// Specification evaluation with four samples per bin of the range.
    pub fn specification(spec: &FilterSpec, disc: &DiscretizedSpec) -> Self {
        let span = (disc.b_bins_upper - disc.b_bins_lower) as usize;
        let samples = if spec.b_lower_over_pi == spec.b_upper_over_pi {
            1
        } else {
            4 * span.max(1) + 1
        };
        Evaluation::Specification {
            spec: spec.clone(),
            samples,
        }
    }

    fn points(&self, disc: &DiscretizedSpec) -> Vec<(i64, f64, f64)> {
        match self {
            Evaluation::Design => {
                let half_delta = disc.delta_bins as f64 / disc.n_fft as f64;
                disc.bins()
                    .map(|bin| {
                        let b_over_pi = 2.0 * bin as f64 / disc.n_fft as f64;
                        (bin, b_over_pi, b_over_pi + half_delta)
                    })
                    .collect()
            }
            Evaluation::Specification { spec, samples } => {
                let count = (*samples).max(1);
                (0..count)
                    .map(|i| {
                        let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                        let b = spec.b_lower_over_pi + t * (spec.b_upper_over_pi - spec.b_lower_over_pi);
                        let bin = disc.bin_for_over_pi(b).bin;
                        (bin, b, b + spec.delta_over_pi / 2.0)
                    })
                    .collect()
            }
        }
    }
}

/// Stopband figures at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub b_bin: i64,
    pub b_over_pi: f64,
    pub stopband_edge_over_pi: f64,
    #[serde(flatten)]
    pub summary: StopbandSummary,
}

/// Stopband metrics of a design over a set of bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub evaluation: Evaluation,
    pub aggregate: StopbandSummary,
    pub points: Vec<PointMetrics>,
    /// Linear stopband energy, `profile[n][point]`.
    pub profile: Vec<Vec<f64>>,
}

/// Evaluates all phases at every evaluation point.
pub fn evaluate<T: Real>(
    disc: &DiscretizedSpec,
    v: &TransitionCoeffs<T>,
    evaluation: &Evaluation,
    density: usize,
) -> Result<DesignMetrics> {
    let points = evaluation.points(disc);
    let plan = UniformSpectrum::<T>::new(
        density.max(1) * disc.n_fft + 1,
        disc.n_fft + disc.block_advance - 1,
    )?;
    let per_point: Vec<PhaseStopband<T>> = points
        .par_iter()
        .map(|&(bin, _, edge_over_pi)| {
            let set = PtvirSet::new(&build_coefficients(disc, v, bin)?, disc.block_advance)?;
            stopband_with(&set, T::lit(edge_over_pi) * T::PI(), &plan)
        })
        .collect::<Result<_>>()?;

    let peak = per_point.iter().fold(T::zero(), |m, p| m.max(p.peak));
    let aggregate =
        StopbandSummary::from_energies(per_point.iter().flat_map(|p| p.energies.iter().copied()), peak);
    let phases = disc.block_advance;
    let profile = (0..phases)
        .map(|n| per_point.iter().map(|p| p.energies[n].as_f64()).collect())
        .collect();
    let points = points
        .iter()
        .zip(&per_point)
        .map(|(&(b_bin, b_over_pi, edge), p)| PointMetrics {
            b_bin,
            b_over_pi,
            stopband_edge_over_pi: edge,
            summary: p.summary(),
        })
        .collect();
    Ok(DesignMetrics {
        evaluation: evaluation.clone(),
        aggregate,
        points,
        profile,
    })
}

/// Phase × bin matrix of linear stopband energies (design evaluation).
pub fn sbe_profile<T: Real>(
    disc: &DiscretizedSpec,
    v: &TransitionCoeffs<T>,
    density: usize,
) -> Result<Vec<Vec<T>>> {
    let metrics = evaluate(disc, v, &Evaluation::Design, density)?;
    Ok(metrics
        .profile
        .iter()
        .map(|row| row.iter().map(|&e| T::lit(e)).collect())
        .collect())
}

/// Error energy `Σ_b Σ_n (1/π)∫_{Ω(b)} |H_n − e^{−jωD2}|²` evaluated on a
/// dense grid.
///
/// Trapezoid sums on grids with `density·N`, `2·density·N` and
/// `4·density·N` intervals are combined by two Richardson steps. All band
/// edges are multiples of `2π/N` and therefore grid points.
pub fn numeric_error_energy<T: Real>(
    v: &TransitionCoeffs<T>,
    disc: &DiscretizedSpec,
    mode: PhaseLimitMode,
    density: usize,
) -> Result<T> {
    let density = density.max(1);
    let n_fft = disc.n_fft;
    let phases = mode.phase_count(disc);
    let fine_intervals = 4 * density * n_fft;
    let len = n_fft + phases - 1;
    let plan = UniformSpectrum::<T>::new(fine_intervals + 1, len)?;
    let step = plan.step();
    // Grid index of bin frequency 2πk/N on the finest grid.
    let per_bin = 8 * density;
    let d2 = disc.delay_system;

    let per_bin_energy: Vec<T> = disc
        .bins()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&bin| -> Result<T> {
            let coeffs = build_coefficients(disc, v, bin)?;
            let set = PtvirSet::new(&coeffs, disc.block_advance)?;
            let half = (disc.delta_bins / 2) as i64;
            let pass_end = (bin - half) as usize * per_bin;
            let stop_start = (bin + half) as usize * per_bin;
            let pass_edge = T::from_index(pass_end) * step;
            let mut total = T::zero();
            for n in 0..phases {
                let spectrum = plan.evaluate(&set.shifted_window(n, len));
                let err: Vec<T> = spectrum
                    .iter()
                    .enumerate()
                    .map(|(i, h)| {
                        let w = T::from_index(i) * step;
                        if i <= pass_end {
                            (h - desired_response(w, pass_edge, d2)).norm_sqr()
                        } else {
                            h.norm_sqr()
                        }
                    })
                    .collect();
                let pass = romberg(&err[..=pass_end], step);
                let stop = romberg(&err[stop_start..], step);
                total = total + (pass + stop) / T::PI();
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    Ok(per_bin_energy.into_iter().sum())
}

/// Trapezoid with two Richardson steps; `samples.len() − 1` must be a
/// multiple of 4.
fn romberg<T: Real>(samples: &[T], step: T) -> T {
    if samples.len() < 2 {
        return T::zero();
    }
    let trap = |stride: usize| {
        let pts: Vec<T> = samples.iter().step_by(stride).copied().collect();
        let h = step * T::from_index(stride);
        pts.windows(2)
            .map(|w| (w[0] + w[1]) * h * T::lit(0.5))
            .sum::<T>()
    };
    let (t4, t2, t1) = (trap(4), trap(2), trap(1));
    let r2 = (T::lit(4.0) * t2 - t4) / T::lit(3.0);
    let r1 = (T::lit(4.0) * t1 - t2) / T::lit(3.0);
    (T::lit(16.0) * r1 - r2) / T::lit(15.0)
}
