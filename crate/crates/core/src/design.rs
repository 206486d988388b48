//! Closed-form least-squares design of the shared transition values.
//!
//! The error energy between every time-invariant response `H_n(e^{jω}, b)` of
//! the overlap-save system and the delayed ideal lowpass, summed over the
//! bandwidth bins, is a quadratic `vᵀQv + 2vᵀc + c0` in the transition values
//! `v`. [`assemble`] builds `Q` and `c`; [`solve`] returns `v = −Q⁻¹c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::Cholesky;
use crate::coeffs::TransitionCoeffs;
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};
use crate::spec::DiscretizedSpec;

/// Which output phases enter the error sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseLimitMode {
    /// `n = 0..M−1`: the `M` responses the block engine actually produces.
    #[default]
    Block,
    /// `n = 0..N−1`.
    Full,
}

impl PhaseLimitMode {
    pub fn phase_count(self, disc: &DiscretizedSpec) -> usize {
        match self {
            PhaseLimitMode::Block => disc.block_advance,
            PhaseLimitMode::Full => disc.n_fft,
        }
    }
}

/// Cosine of `2π·i/N` for integer `i`, tabulated over one period.
#[derive(Debug, Clone)]
pub(crate) struct CosTable<T> {
    n: i64,
    table: Vec<T>,
}

impl<T: Real> CosTable<T> {
    pub(crate) fn new(n: usize) -> Self {
        let two_pi = T::lit(2.0) * T::PI();
        let table = (0..n)
            .map(|i| (two_pi * T::from_index(i) / T::from_index(n)).cos())
            .collect();
        Self {
            n: n as i64,
            table,
        }
    }

    #[inline]
    pub(crate) fn at(&self, i: i64) -> T {
        self.table[i.rem_euclid(self.n) as usize]
    }
}

/// `f(k, q, n) = cos(2πk/N·(D2 − (q + n)))`.
pub fn kernel_f<T: Real>(k: i64, q: i64, n: i64, disc: &DiscretizedSpec) -> T {
    let n_fft = disc.n_fft as i64;
    let arg = (k * (disc.delay_system as i64 - (q + n))).rem_euclid(n_fft);
    (T::lit(2.0) * T::PI() * T::from_int(arg) / T::from_int(n_fft)).cos()
}

/// `(1/π)∫` of `cos(ω(q − p))` over passband and stopband of `[0, π]`.
pub fn kernel_i1<T: Real>(q: i64, p: i64, b_rad: T, delta_rad: T) -> T {
    let m = q - p;
    if m == 0 {
        (T::PI() - delta_rad) / T::PI()
    } else {
        let m = T::from_int(m);
        -T::lit(2.0) * (delta_rad * m / T::lit(2.0)).sin() * (b_rad * m).cos() / (T::PI() * m)
    }
}

/// `(1/π)∫` of `cos(ω(D2 − (p + n)))` over the passband `[0, b − Δ/2]`.
pub fn kernel_i2<T: Real>(p: i64, n: i64, b_rad: T, delta_rad: T, disc: &DiscretizedSpec) -> T {
    let edge = b_rad - delta_rad / T::lit(2.0);
    let m = disc.delay_system as i64 - (p + n);
    if m == 0 {
        edge / T::PI()
    } else {
        let m = T::from_int(m);
        (edge * m).sin() / (T::PI() * m)
    }
}

/// Normal equations `Q·v = −c` of the transition-value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSystem<T> {
    dim: usize,
    q: Vec<T>,
    c: Vec<T>,
    /// Largest `|Q(r,s) − Q(s,r)|` relative to `max |Q|` before symmetrisation.
    asymmetry: f64,
    disc_fingerprint: String,
}

impl<T: Real> LsSystem<T> {
    pub fn from_parts(dim: usize, q: Vec<T>, c: Vec<T>) -> Result<Self> {
        if q.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: q.len(),
            });
        }
        if c.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: c.len(),
            });
        }
        Ok(Self {
            dim,
            q,
            c,
            asymmetry: 0.0,
            disc_fingerprint: String::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `K × K` matrix.
    pub fn q_matrix(&self) -> &[T] {
        &self.q
    }

    pub fn q(&self, r: usize, s: usize) -> T {
        self.q[r * self.dim + s]
    }

    pub fn c_vector(&self) -> &[T] {
        &self.c
    }

    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn disc_fingerprint(&self) -> &str {
        &self.disc_fingerprint
    }

    /// `vᵀQv + 2vᵀc` (the energy without its constant term).
    pub fn quadratic_form(&self, v: &[T]) -> T {
        let k = self.dim;
        let mut acc = CompensatedSum::new();
        for r in 0..k {
            let row: T = (0..k).map(|s| self.q[r * k + s] * v[s]).sum();
            acc.add(v[r] * row + T::lit(2.0) * v[r] * self.c[r]);
        }
        acc.value()
    }

    /// `2(Qv + c)`.
    pub fn gradient(&self, v: &[T]) -> Vec<T> {
        let k = self.dim;
        (0..k)
            .map(|r| {
                let row: T = (0..k).map(|s| self.q[r * k + s] * v[s]).sum();
                T::lit(2.0) * (row + self.c[r])
            })
            .collect()
    }

    /// Little-endian `f64` dump: `K`, then `Q` row-major, then `c`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (1 + self.dim * (self.dim + 1)));
        out.extend_from_slice(&(self.dim as f64).to_le_bytes());
        for x in self.q.iter().chain(&self.c) {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 || bytes.is_empty() {
            return Err(Error::Input(format!(
                "system dump of {} bytes is not a float64 array",
                bytes.len()
            )));
        }
        let words: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let dim = words[0];
        if dim.fract() != 0.0 || dim < 1.0 {
            return Err(Error::Input(format!("bad system dimension {dim}")));
        }
        let dim = dim as usize;
        if words.len() != 1 + dim * (dim + 1) {
            return Err(Error::Dimension {
                expected: 1 + dim * (dim + 1),
                got: words.len(),
            });
        }
        let q = words[1..1 + dim * dim].iter().map(|&x| T::lit(x)).collect();
        let c = words[1 + dim * dim..].iter().map(|&x| T::lit(x)).collect();
        Self::from_parts(dim, q, c)
    }
}

/// Per-phase, per-bin weights `W_n(b)`; rows are phases, columns are bins in
/// ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct DesignWeights<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> DesignWeights<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 {
            return Err(Error::Domain("empty weight matrix".into()));
        }
        for row in &rows {
            if row.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    got: row.len(),
                });
            }
            if let Some(w) = row.iter().find(|w| !(**w > T::zero() && w.is_finite())) {
                return Err(Error::Domain(format!("weight {w} is not positive")));
            }
        }
        Ok(Self { rows })
    }

    pub fn uniform(phases: usize, bins: usize) -> Self {
        Self {
            rows: vec![vec![T::one(); bins]; phases],
        }
    }

    pub fn phases(&self) -> usize {
        self.rows.len()
    }

    pub fn bins(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, phase: usize, bin_index: usize) -> T {
        self.rows[phase][bin_index]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn fingerprint(&self) -> String {
        let bytes: Vec<u8> = self
            .rows
            .iter()
            .flatten()
            .flat_map(|w| w.as_f64().to_le_bytes())
            .collect();
        crate::spec::sha256_hex(&bytes)
    }
}

/// `W_n(b) = sqrt(E_n(b) / min E)` from a phase × bin matrix of linear
/// stopband energies.
pub fn derive_weights<T: Real>(profile: &[Vec<T>]) -> Result<DesignWeights<T>> {
    let min = profile
        .iter()
        .flatten()
        .copied()
        .fold(T::infinity(), T::min);
    if profile.iter().flatten().any(|e| !(*e > T::zero())) || !min.is_finite() {
        return Err(Error::Domain(
            "stopband energies must be strictly positive".into(),
        ));
    }
    DesignWeights::new(
        profile
            .iter()
            .map(|row| row.iter().map(|&e| (e / min).sqrt()).collect())
            .collect(),
    )
}

/// Assembles `Q` and `c`, summing bins `b_bins_lower..=b_bins_upper` and the
/// phases selected by `mode`.
pub fn assemble<T: Real>(disc: &DiscretizedSpec, mode: PhaseLimitMode) -> LsSystem<T> {
    assemble_inner(disc, None, mode).expect("unweighted assembly has no failure modes")
}

/// Weighted assembly: each `(n, b)` term of the error is scaled by `W_n(b)²`.
pub fn assemble_weighted<T: Real>(
    disc: &DiscretizedSpec,
    weights: &DesignWeights<T>,
    mode: PhaseLimitMode,
) -> Result<LsSystem<T>> {
    assemble_inner(disc, Some(weights), mode)
}

fn assemble_inner<T: Real>(
    disc: &DiscretizedSpec,
    weights: Option<&DesignWeights<T>>,
    mode: PhaseLimitMode,
) -> Result<LsSystem<T>> {
    let phases = mode.phase_count(disc);
    if let Some(w) = weights {
        if w.phases() != phases {
            return Err(Error::Dimension {
                expected: phases,
                got: w.phases(),
            });
        }
        if w.bins() != disc.bin_count() {
            return Err(Error::Dimension {
                expected: disc.bin_count(),
                got: w.bins(),
            });
        }
    }
    let k = disc.k_transition_count;
    let table = CosTable::<T>::new(disc.n_fft);

    // Per-bin partial sums in parallel, reduced in bin order below.
    let bins: Vec<i64> = disc.bins().collect();
    let partials: Vec<(Vec<T>, Vec<T>)> = bins
        .par_iter()
        .enumerate()
        .map(|(bin_index, &bin)| {
            let column = weights.map(|w| (w, bin_index));
            bin_contribution(disc, &table, bin, phases, column)
        })
        .collect();

    let mut q_acc = vec![CompensatedSum::new(); k * k];
    let mut c_acc = vec![CompensatedSum::new(); k];
    for (qb, cb) in &partials {
        for (acc, &x) in q_acc.iter_mut().zip(qb) {
            acc.add(x);
        }
        for (acc, &x) in c_acc.iter_mut().zip(cb) {
            acc.add(x);
        }
    }
    let mut q: Vec<T> = q_acc.iter().map(CompensatedSum::value).collect();
    let c = c_acc.iter().map(CompensatedSum::value).collect();

    let scale = q.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let mut asymmetry = T::zero();
    for r in 0..k {
        for s in r + 1..k {
            let (a, b) = (q[r * k + s], q[s * k + r]);
            asymmetry = asymmetry.max((a - b).abs());
            let mean = (a + b) / T::lit(2.0);
            q[r * k + s] = mean;
            q[s * k + r] = mean;
        }
    }
    let asymmetry = if scale > T::zero() {
        (asymmetry / scale).as_f64()
    } else {
        0.0
    };
    Ok(LsSystem {
        dim: k,
        q,
        c,
        asymmetry,
        disc_fingerprint: disc.fingerprint(),
    })
}

/// Contribution of one bandwidth bin to `(Q, c)`.
fn bin_contribution<T: Real>(
    disc: &DiscretizedSpec,
    table: &CosTable<T>,
    bin: i64,
    phases: usize,
    weights: Option<(&DesignWeights<T>, usize)>,
) -> (Vec<T>, Vec<T>) {
    let n_fft = disc.n_fft;
    let k = disc.k_transition_count;
    let d2 = disc.delay_system as i64;
    let b_rad: T = disc.bin_to_rad(bin);
    let delta: T = disc.delta_rad();
    let k1 = bin - (disc.delta_bins / 2) as i64 + 1;
    let inv_n = T::one() / T::from_index(n_fft);
    let two_inv_n = T::lit(2.0) * inv_n;

    // I1 depends on q − p only.
    let i1_lag: Vec<T> = (0..n_fft as i64)
        .map(|m| kernel_i1(m, 0, b_rad, delta))
        .collect();
    let i1: Vec<T> = (0..n_fft * n_fft)
        .map(|idx| {
            let (q, p) = ((idx / n_fft) as i64, (idx % n_fft) as i64);
            i1_lag[(q - p).unsigned_abs() as usize]
        })
        .collect();

    // g_r and a depend on q + n only: tabulate over u = q + n.
    let span = n_fft + phases - 1;
    let g_u: Vec<Vec<T>> = (0..k as i64)
        .map(|r| {
            (0..span as i64)
                .map(|u| two_inv_n * table.at((r + k1) * (d2 - u)))
                .collect()
        })
        .collect();
    let a_u: Vec<T> = (0..span as i64)
        .map(|u| {
            let mut s = CompensatedSum::new();
            s.add(T::one());
            for kk in 1..k1 {
                s.add(T::lit(2.0) * table.at(kk * (d2 - u)));
            }
            s.value() * inv_n
        })
        .collect();
    let i2_u: Vec<T> = (0..span as i64)
        .map(|u| kernel_i2(u, 0, b_rad, delta, disc))
        .collect();

    let mut q_acc = vec![CompensatedSum::new(); k * k];
    let mut c_acc = vec![CompensatedSum::new(); k];
    let mut t = vec![vec![T::zero(); n_fft]; k];
    for n in 0..phases {
        let w2 = weights.map_or(T::one(), |(w, col)| {
            let x = w.get(n, col);
            x * x
        });
        let g: Vec<&[T]> = g_u.iter().map(|row| &row[n..n + n_fft]).collect();
        let a = &a_u[n..n + n_fft];
        let i2 = &i2_u[n..n + n_fft];
        // t_r = g_r · I1
        for (t_r, g_r) in t.iter_mut().zip(&g) {
            t_r.iter_mut().for_each(|x| *x = T::zero());
            for (q, &gq) in g_r.iter().enumerate() {
                let row = &i1[q * n_fft..(q + 1) * n_fft];
                for (x, &i) in t_r.iter_mut().zip(row) {
                    *x = *x + gq * i;
                }
            }
        }
        for r in 0..k {
            for s in r..k {
                let dot: T = t[r].iter().zip(g[s]).map(|(&x, &y)| x * y).sum();
                q_acc[r * k + s].add(w2 * dot);
                if s != r {
                    let dot: T = t[s].iter().zip(g[r]).map(|(&x, &y)| x * y).sum();
                    q_acc[s * k + r].add(w2 * dot);
                }
            }
            let ta: T = t[r].iter().zip(a).map(|(&x, &y)| x * y).sum();
            let gi2: T = g[r].iter().zip(i2).map(|(&x, &y)| x * y).sum();
            c_acc[r].add(w2 * (ta - gi2));
        }
    }
    (
        q_acc.iter().map(CompensatedSum::value).collect(),
        c_acc.iter().map(CompensatedSum::value).collect(),
    )
}

/// `v = −Q⁻¹c` via Cholesky, with one step of iterative refinement.
pub fn solve<T: Real>(sys: &LsSystem<T>) -> Result<TransitionCoeffs<T>> {
    let chol = Cholesky::factor(&sys.q, sys.dim)?;
    let rhs: Vec<T> = sys.c.iter().map(|&x| -x).collect();
    let mut v = chol.solve(&rhs);
    let k = sys.dim;
    let residual: Vec<T> = (0..k)
        .map(|r| rhs[r] - (0..k).map(|s| sys.q[r * k + s] * v[s]).sum::<T>())
        .collect();
    let delta = chol.solve(&residual);
    for (x, d) in v.iter_mut().zip(delta) {
        *x = *x + d;
    }
    TransitionCoeffs::new(v)
}
