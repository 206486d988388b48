//! On-disk formats: design artifacts (JSON), raw sample streams, retune
//! schedules and response grids (CSV).

use std::io::{Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::coeffs::{build_coefficients, TransitionCoeffs};
use crate::design::PhaseLimitMode;
use crate::error::{Error, Result};
use crate::lptv::{PtvirSet, ResponseGrid};
use crate::metrics::DesignMetrics;
use crate::pipeline::Design;
use crate::scalar::magnitude_db;
use crate::spec::{plan, DiscretizedSpec, FilterSpec};

pub const ARTIFACT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub created_unix: u64,
    pub spec_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetrics {
    /// On the design bins with `Δ_D`.
    pub design: DesignMetrics,
    /// Over the original bandwidth range with the original `Δ`.
    pub specification: DesignMetrics,
}

/// Everything needed to analyze or run a design without redoing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArtifact {
    pub format: u32,
    pub spec: FilterSpec,
    pub disc: DiscretizedSpec,
    pub phase_limit_mode: PhaseLimitMode,
    pub transition_values: Vec<f64>,
    #[serde(default)]
    pub weights_sha256: Option<String>,
    pub metrics: ArtifactMetrics,
    pub provenance: Provenance,
}

impl DesignArtifact {
    pub fn from_design(design: &Design<f64>, mode: PhaseLimitMode) -> Result<Self> {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            format: ARTIFACT_FORMAT,
            spec: design.spec.clone(),
            disc: design.disc.clone(),
            phase_limit_mode: mode,
            transition_values: design.values.values().to_vec(),
            weights_sha256: design.weights.as_ref().map(|w| w.fingerprint()),
            metrics: ArtifactMetrics {
                design: design.design_metrics()?,
                specification: design.specification_metrics()?,
            },
            provenance: Provenance {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix,
                spec_sha256: design.spec.fingerprint(),
            },
        })
    }

    pub fn values(&self) -> Result<TransitionCoeffs<f64>> {
        TransitionCoeffs::new(self.transition_values.clone())
    }

    /// Checks internal consistency: format, spec hash, discretization and
    /// value count.
    pub fn validate(&self) -> Result<()> {
        if self.format != ARTIFACT_FORMAT {
            return Err(Error::Input(format!(
                "artifact format {} is not supported (expected {ARTIFACT_FORMAT})",
                self.format
            )));
        }
        if self.spec.fingerprint() != self.provenance.spec_sha256 {
            return Err(Error::Input("artifact spec does not match its recorded hash".into()));
        }
        let disc = plan(&self.spec)?;
        if disc != self.disc {
            return Err(Error::Input(
                "artifact discretization does not follow from its spec".into(),
            ));
        }
        if self.transition_values.len() != self.disc.k_transition_count {
            return Err(Error::Dimension {
                expected: self.disc.k_transition_count,
                got: self.transition_values.len(),
            });
        }
        self.values().map(|_| ())
    }

    /// True when `Δ`, `b_lower` and `b_upper` all sit on the DFT grid, so the
    /// design bins are exactly the specified family.
    pub fn is_bin_aligned(&self) -> bool {
        let n = self.disc.n_fft as f64;
        let on_grid = |x_over_pi: f64| ((x_over_pi * n / 2.0) - (x_over_pi * n / 2.0).round()).abs() < 1e-9;
        on_grid(self.spec.b_lower_over_pi)
            && on_grid(self.spec.b_upper_over_pi)
            && (self.spec.delta_over_pi * n / 2.0 - self.disc.delta_bins as f64).abs() < 1e-9
    }

    /// Metrics that describe the specified family: the design bins when the
    /// spec is bin-aligned, otherwise the sampled original range.
    pub fn reported_metrics(&self) -> &DesignMetrics {
        if self.is_bin_aligned() {
            &self.metrics.design
        } else {
            &self.metrics.specification
        }
    }

    /// Refuses an artifact designed from a different spec.
    pub fn check_spec(&self, spec: &FilterSpec) -> Result<()> {
        if spec.fingerprint() != self.provenance.spec_sha256 {
            return Err(Error::Input(format!(
                "spec hash {} does not match the artifact's {}",
                spec.fingerprint(),
                self.provenance.spec_sha256
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: Self = serde_json::from_str(text)?;
        artifact.validate()?;
        Ok(artifact)
    }
}

/// Parses a spec file; the error names line and column of a syntax fault.
pub fn read_spec(text: &str) -> Result<FilterSpec> {
    let spec: FilterSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Reads little-endian `f64` samples until end of input.
pub fn read_f64_le(mut reader: impl Read) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Input(format!(
            "sample stream of {} bytes is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_f64_le(mut writer: impl Write, samples: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for x in samples {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

/// One retune request from a schedule file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetuneEvent {
    pub line: usize,
    pub sample_index: usize,
    pub b_over_pi: f64,
    pub bin: i64,
    pub clamped: bool,
}

/// Parses `sample_index,b_over_pi` lines. A header line, blank lines and
/// `#` comments are skipped. Indices must fall on block boundaries.
pub fn parse_schedule(text: &str, disc: &DiscretizedSpec) -> Result<Vec<RetuneEvent>> {
    let m = disc.block_advance;
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || content.starts_with("sample_index") {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Input(format!(
                "schedule line {line}: expected `sample_index,b_over_pi`, got `{content}`"
            )));
        }
        let sample_index: usize = fields[0]
            .parse()
            .map_err(|_| Error::Input(format!("schedule line {line}: bad sample index `{}`", fields[0])))?;
        let b_over_pi: f64 = fields[1]
            .parse()
            .map_err(|_| Error::Input(format!("schedule line {line}: bad bandwidth `{}`", fields[1])))?;
        if !b_over_pi.is_finite() {
            return Err(Error::Input(format!("schedule line {line}: bandwidth is not finite")));
        }
        if sample_index % m != 0 {
            return Err(Error::Input(format!(
                "schedule line {line}: sample {sample_index} is not on a block boundary (M = {m})"
            )));
        }
        let assignment = disc.bin_for_over_pi(b_over_pi);
        events.push(RetuneEvent {
            line,
            sample_index,
            b_over_pi,
            bin: assignment.bin,
            clamped: assignment.clamped,
        });
    }
    Ok(events)
}

/// Magnitude responses of every phase at each bin in `bins`, as CSV rows
/// `omega_over_pi,n,b_bin,magnitude_db`.
pub fn response_grid_csv(
    disc: &DiscretizedSpec,
    v: &TransitionCoeffs<f64>,
    bins: &[i64],
    grid: &ResponseGrid<f64>,
    mut out: impl Write,
) -> Result<()> {
    writeln!(out, "omega_over_pi,n,b_bin,magnitude_db")?;
    for &bin in bins {
        let set = PtvirSet::new(&build_coefficients(disc, v, bin)?, disc.block_advance)?;
        for n in 0..disc.block_advance {
            let h = set.frequency_response(n, grid)?;
            for (w, x) in grid.omega().iter().zip(&h) {
                writeln!(
                    out,
                    "{},{n},{bin},{}",
                    w / std::f64::consts::PI,
                    magnitude_db(x.norm())
                )?;
            }
        }
    }
    Ok(())
}

/// Stopband-energy profile as CSV rows `n,b_over_pi,b_bin,sbe_db`.
pub fn profile_csv(metrics: &DesignMetrics, mut out: impl Write) -> Result<()> {
    writeln!(out, "n,b_over_pi,b_bin,sbe_db")?;
    for (n, row) in metrics.profile.iter().enumerate() {
        for (e, point) in row.iter().zip(&metrics.points) {
            writeln!(
                out,
                "{n},{},{},{}",
                point.b_over_pi,
                point.b_bin,
                crate::scalar::power_db(*e)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{design, DesignOptions};

    fn toy_spec() -> FilterSpec {
        FilterSpec::new(0.5, 0.26, 0.6).with_length(7)
    }

    #[test]
    fn artifact_round_trip() {
        let d = design::<f64>(&toy_spec(), DesignOptions::default()).unwrap();
        let a = DesignArtifact::from_design(&d, PhaseLimitMode::Block).unwrap();
        let back = DesignArtifact::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
        assert!(back.check_spec(&toy_spec()).is_ok());
        assert!(!back.is_bin_aligned());
        assert_eq!(back.reported_metrics(), &back.metrics.specification);
        assert!(back.check_spec(&FilterSpec::new(0.5, 0.26, 0.5).with_length(7)).is_err());
    }

    #[test]
    fn tampered_artifact_is_refused() {
        let d = design::<f64>(&toy_spec(), DesignOptions::default()).unwrap();
        let mut a = DesignArtifact::from_design(&d, PhaseLimitMode::Block).unwrap();
        a.spec.b_upper_over_pi = 0.5;
        assert!(DesignArtifact::from_json(&a.to_json().unwrap()).is_err());
        let mut a = DesignArtifact::from_design(&d, PhaseLimitMode::Block).unwrap();
        a.transition_values.pop();
        assert!(DesignArtifact::from_json(&a.to_json().unwrap()).is_err());
    }

    #[test]
    fn sample_stream_round_trip() {
        let x = [0.0, -1.5, f64::MIN_POSITIVE, 3.25e10];
        let mut bytes = Vec::new();
        write_f64_le(&mut bytes, &x).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(read_f64_le(&bytes[..]).unwrap(), x);
        assert!(read_f64_le(&bytes[..31]).is_err());
    }

    #[test]
    fn schedule_parsing() {
        let disc = plan(&toy_spec()).unwrap();
        let m = disc.block_advance;
        let text = format!("sample_index,b_over_pi\n0,0.3\n\n# comment\n{},0.5\n{},0.95\n", m, 2 * m);
        let events = parse_schedule(&text, &disc).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[1].line, 5);
        assert!(events[2].clamped);
        assert_eq!(events[2].bin, disc.b_bins_upper);

        let err = parse_schedule(&format!("0,0.3\n{},0.4\n", m + 1), &disc).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_schedule("0;0.3\n", &disc).is_err());
    }

    #[test]
    fn malformed_spec_reports_position() {
        let err = read_spec("{\n  \"delta_over_pi\": 0.25,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_spec(r#"{"delta_over_pi": 0.25, "b_lower_over_pi": 0.75, "b_upper_over_pi": 0.7}"#).is_err());
    }
}
