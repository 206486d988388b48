//! Slow, direct reference computations for testing `fcvbw`.
//!
//! Everything here is written from the defining sums (O(N²) transforms,
//! explicit time-varying convolution, Gauss–Legendre quadrature of the
//! response error) and shares no code with the library under test.

use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleError(pub String);

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OracleError {}

/// Deterministic settings shared by oracle checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Quadrature panels per DFT bin width (at least 64 nodes per bin overall).
    pub grid_density: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_density: 64,
            seed: 0x5eed_0f_0c1e,
        }
    }
}

impl OracleConfig {
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Uniform white noise in `[-1, 1)`.
pub fn random_signal(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `X(k) = Σ x(t)·e^{−j2πkt/N}`.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// `x(t) = (1/N)·Σ X(k)·e^{j2πkt/N}`.
pub fn naive_idft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|t| {
            x.iter()
                .enumerate()
                .map(|(k, &v)| v * Complex64::from_polar(1.0, 2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// `y(j) = Σ_i h(i)·x(j − i)`, full length `|x| + |h| − 1`.
pub fn direct_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &hi) in h.iter().enumerate() {
        for (t, &xt) in x.iter().enumerate() {
            y[i + t] += hi * xt;
        }
    }
    y
}

/// Bin geometry of a variable-bandwidth design, restated from scratch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    pub n_fft: usize,
    pub filter_length: usize,
    /// Even transition width in bins.
    pub delta_bins: usize,
    pub bins: RangeInclusive<i64>,
}

impl Geometry {
    pub fn block_advance(&self) -> usize {
        self.n_fft - self.filter_length + 1
    }

    pub fn group_delay(&self) -> usize {
        (self.filter_length - 1) / 2
    }

    pub fn system_delay(&self) -> usize {
        self.group_delay() + self.block_advance() - 1
    }

    pub fn transition_count(&self) -> usize {
        self.delta_bins - 1
    }

    /// Sampled magnitude: ones up to the transition band, the values `v`
    /// across it, zeros after, mirrored about `N/2`.
    pub fn magnitude(&self, v: &[f64], bin: i64) -> Vec<f64> {
        let n = self.n_fft;
        let first = (bin - self.delta_bins as i64 / 2 + 1) as usize;
        let mut h = vec![0.0; n];
        for k in 0..=n / 2 {
            h[k] = if k < first {
                1.0
            } else if k - first < v.len() {
                v[k - first]
            } else {
                0.0
            };
        }
        for k in n / 2 + 1..n {
            h[k] = h[n - k];
        }
        h
    }

    /// Base impulse response: real part of the inverse DFT of
    /// `H_R(k)·e^{−j2πk·D1/N}`.
    pub fn base_response(&self, v: &[f64], bin: i64) -> Vec<f64> {
        let n = self.n_fft;
        let d1 = self.group_delay();
        let spectrum: Vec<Complex64> = self
            .magnitude(v, bin)
            .iter()
            .enumerate()
            .map(|(k, &a)| Complex64::from_polar(a, -2.0 * PI * ((k * d1) % n) as f64 / n as f64))
            .collect();
        naive_idft(&spectrum).iter().map(|c| c.re).collect()
    }
}

/// `h_n(q) = d((q − M + 1) mod N)` for `n ≤ q < n + N`, zero elsewhere on
/// `q = 0..N+M−2`; `n` may exceed `M − 1`, in which case the window keeps
/// sliding.
pub fn phase_impulse_response(d: &[f64], m: usize, n: usize) -> Vec<f64> {
    let big_n = d.len();
    let len = big_n + n.max(m - 1);
    (0..len)
        .map(|q| {
            if q >= n && q < n + big_n {
                d[((q + big_n * 2) - (m - 1)) % big_n]
            } else {
                0.0
            }
        })
        .collect()
}

/// Time-varying convolution of the overlap-save system.
///
/// `schedule` lists `(sample_index, d)` switches, the first at index 0, each
/// on a multiple of `m`. Output sample `j` of the block starting at `s`
/// uses phase `n = j − s` and the response active at `s`:
/// `y(j) = Σ_{q=n}^{n+N−1} d((q − M + 1) mod N)·x(j + M − 1 − q)`.
/// The input is treated as zero outside `0..|x|`.
pub fn lptv_convolve(
    x: &[f64],
    m: usize,
    schedule: &[(usize, Vec<f64>)],
    out_len: usize,
) -> Result<Vec<f64>, OracleError> {
    if schedule.is_empty() || schedule[0].0 != 0 {
        return Err(OracleError("schedule must start at sample 0".into()));
    }
    for (i, (index, d)) in schedule.iter().enumerate() {
        if index % m != 0 {
            return Err(OracleError(format!("switch at {index} is inside a block")));
        }
        if i > 0 && *index <= schedule[i - 1].0 {
            return Err(OracleError("schedule is not increasing".into()));
        }
        if d.len() != schedule[0].1.len() {
            return Err(OracleError("responses differ in length".into()));
        }
    }
    let big_n = schedule[0].1.len();
    let sample = |t: i64| -> f64 {
        if t >= 0 && (t as usize) < x.len() {
            x[t as usize]
        } else {
            0.0
        }
    };
    let mut y = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let start = j - j % m;
        let n = j - start;
        let d = &schedule
            .iter()
            .rev()
            .find(|(index, _)| *index <= start)
            .expect("first entry at 0")
            .1;
        let mut acc = 0.0;
        for q in n..n + big_n {
            let coeff = d[(q + 2 * big_n - (m - 1)) % big_n];
            acc += coeff * sample(j as i64 + m as i64 - 1 - q as i64);
        }
        y.push(acc);
    }
    Ok(y)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            let pm1 = if order == 1 { 1.0 } else { p0 };
            dp = order as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn dtft(h: &[f64], w: f64) -> Complex64 {
    h.iter()
        .enumerate()
        .map(|(q, &x)| Complex64::from_polar(x, -w * q as f64))
        .sum()
}

/// `∫_a^b f` by composite Gauss–Legendre over `panels` equal panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + width / 2.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            total += w * f(mid + x * width / 2.0) * width / 2.0;
        }
    }
    total
}

/// Error energy `Σ_b Σ_n (1/π)∫ |H_n(ω) − e^{−jωD2}|²` over passband
/// `[0, b − Δ/2]` plus `(1/π)∫|H_n|²` over stopband `[b + Δ/2, π]`, with
/// `b` and `Δ` at bin centres, for phases `n = 0..phases`.
pub fn grid_energy(v: &[f64], geometry: &Geometry, phases: usize, config: &OracleConfig) -> f64 {
    let n_fft = geometry.n_fft;
    let m = geometry.block_advance();
    let d2 = geometry.system_delay() as f64;
    let bin_width = 2.0 * PI / n_fft as f64;
    let rule = gauss_legendre(16);
    let mut total = 0.0;
    for bin in geometry.bins.clone() {
        let d = geometry.base_response(v, bin);
        let half = geometry.delta_bins as f64 / 2.0;
        let pass_edge = (bin as f64 - half) * bin_width;
        let stop_edge = (bin as f64 + half) * bin_width;
        let panels = |a: f64, b: f64| (((b - a) / bin_width).ceil() as usize * config.grid_density / 16).max(1);
        for n in 0..phases {
            let h = phase_impulse_response(&d, m, n);
            let pass = integrate(
                |w| (dtft(&h, w) - Complex64::from_polar(1.0, -w * d2)).norm_sqr(),
                0.0,
                pass_edge,
                panels(0.0, pass_edge),
                &rule,
            );
            let stop = integrate(|w| dtft(&h, w).norm_sqr(), stop_edge, PI, panels(stop_edge, PI), &rule);
            total += (pass + stop) / PI;
        }
    }
    total
}

/// Gradient and Hessian of [`grid_energy`] by central differences.
pub fn energy_derivatives(
    v: &[f64],
    geometry: &Geometry,
    phases: usize,
    config: &OracleConfig,
    step: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = v.len();
    let e = |dv: &[(usize, f64)]| {
        let mut w = v.to_vec();
        for &(i, d) in dv {
            w[i] += d;
        }
        grid_energy(&w, geometry, phases, config)
    };
    let gradient = (0..k)
        .map(|r| (e(&[(r, step)]) - e(&[(r, -step)])) / (2.0 * step))
        .collect();
    let e0 = e(&[]);
    let mut hessian = vec![vec![0.0; k]; k];
    for r in 0..k {
        hessian[r][r] = (e(&[(r, step)]) - 2.0 * e0 + e(&[(r, -step)])) / (step * step);
        for s in r + 1..k {
            let x = (e(&[(r, step), (s, step)]) - e(&[(r, step), (s, -step)]) - e(&[(r, -step), (s, step)])
                + e(&[(r, -step), (s, -step)]))
                / (4.0 * step * step);
            hessian[r][s] = x;
            hessian[s][r] = x;
        }
    }
    (gradient, hessian)
}
