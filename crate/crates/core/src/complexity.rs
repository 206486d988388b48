//! Arithmetic cost model of the symmetric overlap-save filter, kept as exact
//! rationals, and comparison tables against published baseline rows.

use std::fmt::Write as _;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rate = Ratio<i64>;

/// Real multiplications and additions of one split-radix real FFT of length `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FftCosts {
    pub multiplications: i64,
    pub additions: i64,
}

fn log2_exact(n: usize) -> Result<i64> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::Input(format!("FFT length {n} is not a power of two ≥ 4")));
    }
    Ok(n.trailing_zeros() as i64)
}

/// `C_mf = N·log2N/2 − 3N/2 + 2`, `C_a = 3N·log2N/2 − 5N/2 + 4`.
pub fn fft_costs(n: usize) -> Result<FftCosts> {
    let q = log2_exact(n)?;
    let n = n as i64;
    // N is even, so both halves are integers.
    Ok(FftCosts {
        multiplications: n * q / 2 - 3 * n / 2 + 2,
        additions: 3 * n * q / 2 - 5 * n / 2 + 4,
    })
}

fn ratio_string<S: Serializer>(r: &Rate, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Per-output-sample costs of one configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    pub n_fft: usize,
    pub filter_length: usize,
    pub transition_count: usize,
    pub block_advance: usize,
    pub fft: FftCosts,
    /// Fixed multiplications, `2·C_mf/M`.
    #[serde(serialize_with = "ratio_string")]
    pub r_mf: Rate,
    /// Variable-coefficient multiplications, `2K/M`.
    #[serde(serialize_with = "ratio_string")]
    pub r_mv: Rate,
    /// Additions, `2·C_a/M`.
    #[serde(serialize_with = "ratio_string")]
    pub r_a: Rate,
    /// Reconfiguration multiplications, worst case one per block.
    #[serde(serialize_with = "ratio_string")]
    pub reconfig_mults_per_sample: Rate,
    /// Stored values needed to reconfigure.
    pub memory_words: usize,
}

impl ComplexityReport {
    /// Reconfiguration rates as tabulated: `1/M` rounds to zero.
    pub fn r_md(&self) -> Rate {
        Rate::zero()
    }

    pub fn r_ad(&self) -> Rate {
        Rate::zero()
    }
}

pub fn rates(n_fft: usize, filter_length: usize, transition_count: usize) -> Result<ComplexityReport> {
    let fft = fft_costs(n_fft)?;
    if filter_length == 0 || filter_length > n_fft {
        return Err(Error::Input(format!(
            "filter length {filter_length} leaves no block advance for N = {n_fft}"
        )));
    }
    let m = (n_fft - filter_length + 1) as i64;
    Ok(ComplexityReport {
        n_fft,
        filter_length,
        transition_count,
        block_advance: m as usize,
        fft,
        r_mf: Rate::new(2 * fft.multiplications, m),
        r_mv: Rate::new(2 * transition_count as i64, m),
        r_a: Rate::new(2 * fft.additions, m),
        reconfig_mults_per_sample: Rate::new(1, m),
        memory_words: transition_count,
    })
}

/// One decimal, half away from zero.
pub fn round_one_decimal(r: Rate) -> f64 {
    let tenths = (r * Rate::from_integer(10)).round();
    tenths.to_f64().unwrap_or(f64::NAN) / 10.0
}

/// A row of a comparison table. Optional fields print as `-`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    pub filter_length: usize,
    pub n_fft: Option<usize>,
    pub block_advance: Option<usize>,
    /// Farrow subfilter count, for time-domain rows.
    pub subfilters: Option<usize>,
    pub r_mf: f64,
    pub r_mv: f64,
    pub r_a: f64,
    pub r_md: f64,
    pub r_ad: f64,
    pub memory: f64,
    pub sbml_db: Option<f64>,
    pub sbe_db: Option<f64>,
}

impl TableRow {
    pub fn from_report(label: &str, report: &ComplexityReport, sbml_db: Option<f64>, sbe_db: Option<f64>) -> Self {
        Self {
            label: label.to_string(),
            filter_length: report.filter_length,
            n_fft: Some(report.n_fft),
            block_advance: Some(report.block_advance),
            subfilters: None,
            r_mf: round_one_decimal(report.r_mf),
            r_mv: round_one_decimal(report.r_mv),
            r_a: round_one_decimal(report.r_a),
            r_md: round_one_decimal(report.r_md()),
            r_ad: round_one_decimal(report.r_ad()),
            memory: report.memory_words as f64,
            sbml_db,
            sbe_db,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn published(
    label: &str,
    l: usize,
    n: Option<usize>,
    m: Option<usize>,
    p: Option<usize>,
    rates: [f64; 6],
    sbml: f64,
    sbe: f64,
) -> TableRow {
    TableRow {
        label: label.to_string(),
        filter_length: l,
        n_fft: n,
        block_advance: m,
        subfilters: p,
        r_mf: rates[0],
        r_mv: rates[1],
        r_a: rates[2],
        r_md: rates[3],
        r_ad: rates[4],
        memory: rates[5],
        sbml_db: Some(sbml),
        sbe_db: Some(sbe),
    }
}

/// Reference baselines for `Δ = 0.25π`, `b ∈ [96π/128, 110π/128]`.
pub fn baseline_rows_narrow() -> Vec<TableRow> {
    vec![
        published("TD/TD", 29, None, None, Some(4), [75.0, 4.0, 145.0, 0.0, 1.0, 1.0], -61.9, -78.3),
        published("TD/FD", 29, Some(128), Some(100), None, [5.2, 1.9, 23.8, 5.2, 5.1, 640.0], -61.9, -78.3),
        published("FD/FD minimax", 31, Some(128), Some(98), None, [5.3, 0.3, 21.0, 0.0, 0.0, 15.0], -61.2, -83.6),
    ]
}

/// Reference baselines for `Δ = 0.27π`, `b ∈ [0.76π, 0.85π]`.
pub fn baseline_rows_wide() -> Vec<TableRow> {
    vec![
        published("TD/TD", 27, None, None, Some(4), [70.0, 4.0, 135.0, 0.0, 1.0, 1.0], -63.1, -81.3),
        published("TD/FD", 27, Some(128), Some(102), None, [5.1, 1.9, 23.3, 5.0, 5.0, 640.0], -63.1, -81.3),
        published("FD/FD minimax", 31, Some(128), Some(98), None, [5.3, 0.3, 21.0, 0.0, 0.0, 15.0], -61.2, -86.9),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Markdown,
    Csv,
}

const COLUMNS: [&str; 14] = [
    "design", "L", "N", "M", "P", "R_mf", "R_mv", "R_a", "R_md", "R_ad", "Mem", "SBML_dB", "SBE_dB", "",
];

fn cells(row: &TableRow) -> Vec<String> {
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
    let db = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
    vec![
        row.label.clone(),
        row.filter_length.to_string(),
        opt(row.n_fft),
        opt(row.block_advance),
        opt(row.subfilters),
        format!("{:.1}", row.r_mf),
        format!("{:.1}", row.r_mv),
        format!("{:.1}", row.r_a),
        format!("{:.1}", row.r_md),
        format!("{:.1}", row.r_ad),
        format!("{}", row.memory),
        db(row.sbml_db),
        db(row.sbe_db),
    ]
}

pub fn comparison_table(rows: &[TableRow], format: TableFormat) -> String {
    let header = &COLUMNS[..13];
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                let c: Vec<String> = cells(row)
                    .into_iter()
                    .map(|s| if s.contains(',') { format!("\"{s}\"") } else { s })
                    .collect();
                out.push_str(&c.join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", cells(row).join(" | "));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_cost_values() {
        assert_eq!(fft_costs(128).unwrap(), FftCosts { multiplications: 258, additions: 1028 });
        assert_eq!(fft_costs(4).unwrap().multiplications, 0);
        assert!(fft_costs(96).is_err());
        assert!(fft_costs(2).is_err());
    }

    #[test]
    fn narrow_example_rates() {
        let r = rates(128, 31, 15).unwrap();
        assert_eq!(r.block_advance, 98);
        assert_eq!(round_one_decimal(r.r_mf), 5.3);
        assert_eq!(round_one_decimal(r.r_mv), 0.3);
        assert_eq!(round_one_decimal(r.r_a), 21.0);
        assert_eq!(r.memory_words, 15);
        assert_eq!(r.r_mv * Rate::from_integer(98), Rate::from_integer(30));
    }

    #[test]
    fn baseline_length_29() {
        let r = rates(128, 29, 0).unwrap();
        assert_eq!(r.r_mf, Rate::new(516, 100));
        assert_eq!(round_one_decimal(r.r_mf), 5.2);
        assert!(r.r_mv.is_zero());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_one_decimal(Rate::new(5, 100)), 0.1);
        assert_eq!(round_one_decimal(Rate::new(-5, 100)), -0.1);
        assert_eq!(round_one_decimal(Rate::new(4, 100)), 0.0);
    }

    #[test]
    fn rates_fall_with_block_advance() {
        for n in [16usize, 32, 64, 128, 256] {
            let mut prev: Option<ComplexityReport> = None;
            for l in (3..n / 2).rev() {
                let r = rates(n, l, 3).unwrap();
                if let Some(p) = &prev {
                    assert!(r.r_mf < p.r_mf || r.r_mf.is_zero());
                    assert!(r.r_a < p.r_a);
                }
                prev = Some(r);
            }
        }
    }

    #[test]
    fn empty_table_has_header_only() {
        let md = comparison_table(&[], TableFormat::Markdown);
        assert_eq!(md.lines().count(), 2);
        let csv = comparison_table(&[], TableFormat::Csv);
        assert_eq!(csv.trim(), COLUMNS[..13].join(","));
    }

    #[test]
    fn table_rows() {
        let r = rates(128, 31, 15).unwrap();
        let mut rows = baseline_rows_narrow();
        rows.push(TableRow::from_report("LS", &r, Some(-56.1), Some(-89.0)));
        let csv = comparison_table(&rows, TableFormat::Csv);
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().last().unwrap(), "LS,31,128,98,-,5.3,0.3,21.0,0.0,0.0,15,-56.1,-89.0");
        assert!(csv.contains("TD/TD,29,-,-,4,"));
    }

    #[test]
    fn too_long_filter_is_rejected() {
        assert!(rates(16, 17, 1).is_err());
        assert!(rates(16, 0, 1).is_err());
    }
}
