//! End-to-end design: plan, assemble, solve, optionally reweight once.

use serde::{Deserialize, Serialize};

use crate::coeffs::TransitionCoeffs;
use crate::design::{assemble, assemble_weighted, derive_weights, solve, DesignWeights, LsSystem, PhaseLimitMode};
use crate::error::Result;
use crate::metrics::{evaluate, sbe_profile, DesignMetrics, Evaluation, METRIC_GRID_DENSITY};
use crate::scalar::Real;
use crate::spec::{plan, DiscretizedSpec, FilterSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Re-solve once with weights derived from the unweighted stopband
    /// energy profile.
    pub weighted: bool,
    pub mode: PhaseLimitMode,
}

#[derive(Debug, Clone)]
pub struct Design<T> {
    pub spec: FilterSpec,
    pub disc: DiscretizedSpec,
    pub system: LsSystem<T>,
    pub values: TransitionCoeffs<T>,
    pub weights: Option<DesignWeights<T>>,
}

impl<T: Real> Design<T> {
    /// Metrics on the design bins.
    pub fn design_metrics(&self) -> Result<DesignMetrics> {
        evaluate(&self.disc, &self.values, &Evaluation::Design, METRIC_GRID_DENSITY)
    }

    /// Metrics over the original bandwidth range and transition width.
    pub fn specification_metrics(&self) -> Result<DesignMetrics> {
        evaluate(
            &self.disc,
            &self.values,
            &Evaluation::specification(&self.spec, &self.disc),
            METRIC_GRID_DENSITY,
        )
    }
}

pub fn design<T: Real>(spec: &FilterSpec, options: DesignOptions) -> Result<Design<T>> {
    let disc = plan(spec)?;
    design_discretized(spec, disc, options)
}

pub fn design_discretized<T: Real>(
    spec: &FilterSpec,
    disc: DiscretizedSpec,
    options: DesignOptions,
) -> Result<Design<T>> {
    let system = assemble::<T>(&disc, options.mode);
    let values = solve(&system)?;
    if !options.weighted {
        return Ok(Design {
            spec: spec.clone(),
            disc,
            system,
            values,
            weights: None,
        });
    }
    let profile = sbe_profile(&disc, &values, METRIC_GRID_DENSITY)?;
    let weights = match options.mode {
        PhaseLimitMode::Block => derive_weights(&profile)?,
        // The profile only covers the M produced phases; extend with the
        // phase-wrapped rows for the remaining ones.
        PhaseLimitMode::Full => {
            let m = profile.len();
            let rows: Vec<Vec<T>> = (0..disc.n_fft).map(|n| profile[n % m].clone()).collect();
            derive_weights(&rows)?
        }
    };
    let system = assemble_weighted(&disc, &weights, options.mode)?;
    let values = solve(&system)?;
    Ok(Design {
        spec: spec.clone(),
        disc,
        system,
        values,
        weights: Some(weights),
    })
}
