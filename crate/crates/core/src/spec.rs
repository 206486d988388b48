//! Continuous variable-bandwidth specification and its mapping onto DFT bins.
//!
//! A [`FilterSpec`] describes the lowpass family in radians (stored as
//! fractions of π, which is how it is written in JSON). [`discretize`] turns
//! it into a [`DiscretizedSpec`] on an `N`-point grid: even transition width
//! `Δ_N`, bandwidth bin range and the block/delay bookkeeping of the
//! overlap-save realization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Slack applied before `floor`/`ceil` so that exact bin multiples written in
/// decimal (0.75, 110/128, ...) do not fall one bin short.
const BIN_SLACK: f64 = 1e-9;

/// Variable-bandwidth lowpass specification.
///
/// Passband `[0, b − Δ/2]`, stopband `[b + Δ/2, π]`, with `b` anywhere in
/// `[b_lower, b_upper]`. All angular values are stored divided by π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub delta_over_pi: f64,
    pub b_lower_over_pi: f64,
    pub b_upper_over_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_override: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_passband: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple_stopband: Option<f64>,
}

impl FilterSpec {
    pub fn new(delta_over_pi: f64, b_lower_over_pi: f64, b_upper_over_pi: f64) -> Self {
        Self {
            delta_over_pi,
            b_lower_over_pi,
            b_upper_over_pi,
            length_override: None,
            ripple_passband: None,
            ripple_stopband: None,
        }
    }

    pub fn with_length(mut self, length: usize) -> Self {
        self.length_override = Some(length);
        self
    }

    pub fn with_ripples(mut self, passband: f64, stopband: f64) -> Self {
        self.ripple_passband = Some(passband);
        self.ripple_stopband = Some(stopband);
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta_over_pi * PI
    }

    pub fn b_lower(&self) -> f64 {
        self.b_lower_over_pi * PI
    }

    pub fn b_upper(&self) -> f64 {
        self.b_upper_over_pi * PI
    }

    pub fn validate(&self) -> Result<()> {
        let (d, lo, hi) = (self.delta_over_pi, self.b_lower_over_pi, self.b_upper_over_pi);
        if !(d.is_finite() && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config("non-finite frequency value".into()));
        }
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Config(format!(
                "transition width {d}π must lie in (0, π)"
            )));
        }
        if lo > hi {
            return Err(Error::Config(format!(
                "b_lower {lo}π exceeds b_upper {hi}π"
            )));
        }
        if lo - d / 2.0 < -1e-12 {
            return Err(Error::Config(format!(
                "passband edge b_lower − Δ/2 = {}π is negative",
                lo - d / 2.0
            )));
        }
        if hi + d / 2.0 >= 1.0 {
            return Err(Error::Config(format!(
                "stopband edge b_upper + Δ/2 = {}π reaches π",
                hi + d / 2.0
            )));
        }
        if let Some(l) = self.length_override {
            check_length(l)?;
        }
        for (name, r) in [
            ("ripple_passband", self.ripple_passband),
            ("ripple_stopband", self.ripple_stopband),
        ] {
            if let Some(r) = r {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Config(format!("{name} {r} must lie in (0, 1)")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("spec serializes"))
    }
}

fn check_length(l: usize) -> Result<()> {
    if l < 3 || l % 2 == 0 {
        return Err(Error::Config(format!(
            "filter length {l} must be odd and at least 3"
        )));
    }
    Ok(())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Filter-order estimate from transition width and ripples.
pub trait OrderEstimator {
    /// Estimated order `N_D` (not yet rounded).
    fn order(&self, delta_rad: f64, ripple_passband: f64, ripple_stopband: f64) -> f64;
}

/// Bellanger's estimate `N_D ≈ (2/3)·log10(1/(10·δp·δs))·(2π/Δ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bellanger;

impl OrderEstimator for Bellanger {
    fn order(&self, delta_rad: f64, dp: f64, ds: f64) -> f64 {
        (2.0 / 3.0) * (1.0 / (10.0 * dp * ds)).log10() * (2.0 * PI / delta_rad)
    }
}

/// Filter length `L` for the spec: the override when present, otherwise the
/// Bellanger estimate at the spec's own Δ.
pub fn estimate_filter_length(spec: &FilterSpec) -> Result<usize> {
    estimate_filter_length_with(spec, spec.delta(), &Bellanger)
}

/// As [`estimate_filter_length`] but for an explicit transition width and
/// estimator. The result is `ceil(N_D) + 1`, bumped to the next odd integer.
pub fn estimate_filter_length_with(
    spec: &FilterSpec,
    delta_rad: f64,
    estimator: &dyn OrderEstimator,
) -> Result<usize> {
    if let Some(l) = spec.length_override {
        check_length(l)?;
        return Ok(l);
    }
    let (Some(dp), Some(ds)) = (spec.ripple_passband, spec.ripple_stopband) else {
        return Err(Error::Config(
            "either length_override or both ripples are required".into(),
        ));
    };
    if !(dp > 0.0 && dp < 1.0 && ds > 0.0 && ds < 1.0) {
        return Err(Error::Config(format!("ripples ({dp}, {ds}) must lie in (0, 1)")));
    }
    let order = estimator.order(delta_rad, dp, ds);
    if !order.is_finite() || order < 1.0 {
        return Err(Error::Config(format!("order estimate {order} is not usable")));
    }
    let mut length = order.ceil() as usize + 1;
    if length % 2 == 0 {
        length += 1;
    }
    Ok(length.max(3))
}

/// DFT length: the power of two nearest to `0.9·L·log2(L)`.
///
/// When that power of two would leave a block advance shorter than `L`
/// (`N < 2L − 1`), the smallest power of two `≥ 2L − 1` is used instead, so
/// the result is always strictly greater than `L`.
pub fn estimate_fft_length(length: usize) -> usize {
    let l = length.max(3) as f64;
    let target = 0.9 * l * l.log2();
    let below = 1usize << (target.log2().floor() as u32);
    let above = below << 1;
    let nearest = if target - (below as f64) < (above as f64) - target {
        below
    } else {
        above
    };
    let floor = 2 * length.max(3) - 1;
    if nearest < floor {
        floor.next_power_of_two()
    } else {
        nearest
    }
}

/// Bin-domain specification for one DFT length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizedSpec {
    pub n_fft: usize,
    pub filter_length: usize,
    pub block_advance: usize,
    pub delta_bins: usize,
    /// `Δ_D` in radians.
    #[serde(with = "ordered_f64")]
    pub delta_truncated: OrderedF64,
    pub k_transition_count: usize,
    pub b_bins_lower: i64,
    pub b_bins_upper: i64,
    pub delay_design: usize,
    pub delay_system: usize,
}

/// `f64` wrapper that lets [`DiscretizedSpec`] derive `Eq`; the value is
/// always a finite multiple of 2π/N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedF64(pub f64);

impl Eq for OrderedF64 {}

mod ordered_f64 {
    use super::OrderedF64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &OrderedF64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OrderedF64, D::Error> {
        f64::deserialize(d).map(OrderedF64)
    }
}

/// Result of mapping a continuous bandwidth onto the design's bin range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinAssignment {
    pub bin: i64,
    /// The rounded bin fell outside the design range and was clamped.
    pub clamped: bool,
}

impl DiscretizedSpec {
    pub fn delta_rad<T: Real>(&self) -> T {
        T::lit(2.0) * T::PI() * T::from_index(self.delta_bins) / T::from_index(self.n_fft)
    }

    /// Bin-centred bandwidth `b_N·2π/N` in radians.
    pub fn bin_to_rad<T: Real>(&self, bin: i64) -> T {
        T::lit(2.0) * T::PI() * T::from_int(bin) / T::from_index(self.n_fft)
    }

    pub fn bins(&self) -> std::ops::RangeInclusive<i64> {
        self.b_bins_lower..=self.b_bins_upper
    }

    pub fn bin_count(&self) -> usize {
        (self.b_bins_upper - self.b_bins_lower + 1) as usize
    }

    pub fn contains_bin(&self, bin: i64) -> bool {
        (self.b_bins_lower..=self.b_bins_upper).contains(&bin)
    }

    pub fn check_bin(&self, bin: i64) -> Result<()> {
        if self.contains_bin(bin) {
            Ok(())
        } else {
            Err(Error::Range {
                what: "bandwidth bin",
                value: bin,
                lo: self.b_bins_lower,
                hi: self.b_bins_upper,
            })
        }
    }

    /// Rounds `b` (radians) to its bin and clamps to the design range.
    pub fn bin_for(&self, b_rad: f64) -> BinAssignment {
        let raw = bandwidth_to_bin(b_rad, self.n_fft);
        let bin = raw.clamp(self.b_bins_lower, self.b_bins_upper);
        BinAssignment {
            bin,
            clamped: bin != raw,
        }
    }

    pub fn bin_for_over_pi(&self, b_over_pi: f64) -> BinAssignment {
        self.bin_for(b_over_pi * PI)
    }

    pub fn fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("disc serializes"))
    }
}

/// `round(b·N/(2π))`, halves away from zero.
pub fn bandwidth_to_bin(b_rad: f64, n_fft: usize) -> i64 {
    (b_rad * n_fft as f64 / (2.0 * PI)).round() as i64
}

/// Maps `spec` onto an `N`-point grid for filter length `L`.
///
/// An odd `⌊Δ·N/(2π)⌋` is decremented; when that happens and the spec has no
/// length override, `L` is re-estimated from the truncated width.
pub fn discretize(spec: &FilterSpec, length: usize, n_fft: usize) -> Result<DiscretizedSpec> {
    spec.validate()?;
    check_length(length)?;
    if n_fft < 4 || !n_fft.is_power_of_two() {
        return Err(Error::Config(format!(
            "DFT length {n_fft} must be a power of two >= 4"
        )));
    }
    let half = n_fft as f64 / 2.0;
    let mut delta_bins = (spec.delta_over_pi * half + BIN_SLACK).floor() as usize;
    let mut length = length;
    if delta_bins % 2 == 1 {
        delta_bins -= 1;
        if spec.length_override.is_none() {
            let delta_d = 2.0 * PI * delta_bins as f64 / n_fft as f64;
            if delta_bins > 0 {
                length = estimate_filter_length_with(spec, delta_d, &Bellanger)?;
            }
        }
    }
    if delta_bins < 2 {
        return Err(Error::Infeasible(format!(
            "transition width {}π spans fewer than two bins at N = {n_fft}",
            spec.delta_over_pi
        )));
    }
    if length >= n_fft {
        return Err(Error::Infeasible(format!(
            "filter length {length} does not fit DFT length {n_fft}"
        )));
    }
    let lower = (spec.b_lower_over_pi * half + BIN_SLACK).floor() as i64;
    let upper = (spec.b_upper_over_pi * half - BIN_SLACK).ceil() as i64;
    let lo_limit = (delta_bins / 2) as i64;
    let hi_limit = (n_fft / 2 - delta_bins / 2) as i64 - 1;
    if lower < lo_limit || upper > hi_limit || lower > upper {
        return Err(Error::Infeasible(format!(
            "bandwidth bins [{lower}, {upper}] outside admissible [{lo_limit}, {hi_limit}] for Δ_N = {delta_bins}"
        )));
    }
    let block_advance = n_fft - length + 1;
    let delay_design = (length - 1) / 2;
    Ok(DiscretizedSpec {
        n_fft,
        filter_length: length,
        block_advance,
        delta_bins,
        delta_truncated: OrderedF64(2.0 * PI * delta_bins as f64 / n_fft as f64),
        k_transition_count: delta_bins - 1,
        b_bins_lower: lower,
        b_bins_upper: upper,
        delay_design,
        delay_system: delay_design + block_advance - 1,
    })
}

/// Full front half of the pipeline: estimate `L`, then `N`, then discretize.
pub fn plan(spec: &FilterSpec) -> Result<DiscretizedSpec> {
    spec.validate()?;
    let length = estimate_filter_length(spec)?;
    discretize(spec, length, estimate_fft_length(length))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn discretization_invariants(
            delta in 0.05f64..0.4,
            lo in 0.0f64..1.0,
            span in 0.0f64..1.0,
            log_n in 6u32..10,
        ) {
            let n = 1usize << log_n;
            let b_lo = delta / 2.0 + 0.02 + lo * (0.9 - delta);
            let b_hi = b_lo + span * (1.0 - delta / 2.0 - 0.01 - b_lo).max(0.0);
            let spec = FilterSpec::new(delta, b_lo, b_hi).with_length(7);
            prop_assume!(spec.validate().is_ok());
            if let Ok(d) = discretize(&spec, 7, n) {
                prop_assert!(d.delta_bins % 2 == 0 && d.delta_bins >= 2);
                prop_assert_eq!(d.k_transition_count, d.delta_bins - 1);
                prop_assert!(d.delta_truncated.0 <= spec.delta() + 1e-12);
                prop_assert_eq!(d.block_advance, n - 7 + 1);
                prop_assert_eq!(d.delay_system, d.delay_design + d.block_advance - 1);
                prop_assert!(d.b_bins_lower >= (d.delta_bins / 2) as i64);
                prop_assert!(d.b_bins_upper <= (n / 2 - d.delta_bins / 2) as i64 - 1);

                // Re-discretizing at the truncated width is a fixed point.
                let tight = FilterSpec::new(d.delta_bins as f64 * 2.0 / n as f64, b_lo, b_hi)
                    .with_length(7);
                if tight.validate().is_ok() {
                    let again = discretize(&tight, 7, n).unwrap();
                    prop_assert_eq!(again, d);
                }
            }
        }
    }
}
