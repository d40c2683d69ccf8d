//! Evaluation reports.
//!
//! One row per (sample, speaker), written as CSV with every numeric field
//! rendered at six significant digits so that reports from identical runs
//! diff cleanly byte-for-byte.

use std::fs;
use std::path::Path;

use crate::error::{MetricsError, Result};

/// One evaluated speaker within one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Corpus-relative identifier of the sample (may carry a speaker suffix).
    pub sample_id: String,
    /// Task tag under which the sample was generated.
    pub task: String,
    /// SDR of the raw mixture against this speaker, dB.
    pub sdr_in_db: f64,
    /// SDR of the separated estimate against this speaker, dB.
    pub sdr_out_db: f64,
    /// `sdr_out_db − sdr_in_db`.
    pub sdr_improvement_db: f64,
    /// Mean patch similarity of the separated spectrogram.
    pub nsim_mean: f64,
}

pub const EVAL_CSV_HEADER: &str =
    "sample_id,task,sdr_in_db,sdr_out_db,sdr_improvement_db,nsim_mean";

/// Render `x` with six significant digits in the shortest of fixed or
/// scientific notation, like C's `%.6g`.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = trim_zeros(&format!("{x:.decimals$}"));
        // Rounding can promote an extra leading digit (e.g. 999999.5); such
        // values fall through to scientific notation.
        if significant_digits(&fixed) <= 6 {
            return fixed;
        }
    }
    let sci = format!("{x:.5e}");
    let (mant, ex) = sci.split_once('e').expect("exponential format");
    let (mant, ex) = renormalize(mant, ex);
    format!("{}e{ex}", trim_zeros(&mant))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn significant_digits(s: &str) -> usize {
    s.chars()
        .skip_while(|c| !c.is_ascii_digit() || *c == '0')
        .filter(|c| c.is_ascii_digit())
        .count()
}

/// Guard against a mantissa that rounding pushed to 10.0 or beyond.
fn renormalize(mant: &str, ex: &str) -> (String, i32) {
    let m: f64 = mant.parse().expect("mantissa");
    let e: i32 = ex.parse().expect("exponent");
    if m.abs() >= 10.0 {
        (format!("{:.5}", m / 10.0), e + 1)
    } else {
        (mant.to_string(), e)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render rows to CSV text with a header line.
pub fn render_eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&r.sample_id),
            csv_field(&r.task),
            fmt6(r.sdr_in_db),
            fmt6(r.sdr_out_db),
            fmt6(r.sdr_improvement_db),
            fmt6(r.nsim_mean),
        ));
    }
    out
}

/// Write rows as CSV to `path`.
pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    fs::write(path, render_eval_csv(rows)).map_err(|e| MetricsError::io(path, e))
}

/// Mean of a per-row statistic over `rows`; NaN for an empty slice.
pub fn mean_over<F: Fn(&EvalRow) -> f64>(rows: &[EvalRow], stat: F) -> f64 {
    rows.iter().map(stat).sum::<f64>() / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt6_renders_plain_values() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(-0.0), "0");
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6(-2.5), "-2.5");
        assert_eq!(fmt6(100.0), "100");
        assert_eq!(fmt6(3.14159265), "3.14159");
        assert_eq!(fmt6(10.45761), "10.4576");
        assert_eq!(fmt6(123456.7), "123457");
    }

    #[test]
    fn fmt6_switches_to_scientific_outside_the_window() {
        assert_eq!(fmt6(1234567.0), "1.23457e6");
        assert_eq!(fmt6(0.000123456), "0.000123456");
        assert_eq!(fmt6(0.0000123456), "1.23456e-5");
        assert_eq!(fmt6(1e-7), "1e-7");
        assert_eq!(fmt6(2.5e8), "2.5e8");
        assert_eq!(fmt6(-3.25e-9), "-3.25e-9");
    }

    #[test]
    fn fmt6_handles_non_finite_values() {
        assert_eq!(fmt6(f64::NAN), "nan");
        assert_eq!(fmt6(f64::INFINITY), "inf");
        assert_eq!(fmt6(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_rendering_matches_golden_text() {
        let rows = vec![
            EvalRow {
                sample_id: "2s-clean/00012#s0".into(),
                task: "2S-clean".into(),
                sdr_in_db: 0.0512345,
                sdr_out_db: 9.876543,
                sdr_improvement_db: 9.8253085,
                nsim_mean: 0.912345678,
            },
            EvalRow {
                sample_id: "2s-clean/00012#s1".into(),
                task: "2S-clean".into(),
                sdr_in_db: -1.25,
                sdr_out_db: 7.5,
                sdr_improvement_db: 8.75,
                nsim_mean: 0.875,
            },
        ];
        let text = render_eval_csv(&rows);
        let expected = "sample_id,task,sdr_in_db,sdr_out_db,sdr_improvement_db,nsim_mean\n\
                        2s-clean/00012#s0,2S-clean,0.0512345,9.87654,9.82531,0.912346\n\
                        2s-clean/00012#s1,2S-clean,-1.25,7.5,8.75,0.875\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn csv_round_trips_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        let rows = vec![EvalRow {
            sample_id: "1s-noise/00000#s0".into(),
            task: "1S+Noise".into(),
            sdr_in_db: 3.0,
            sdr_out_db: 12.0,
            sdr_improvement_db: 9.0,
            nsim_mean: 0.75,
        }];
        write_eval_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, render_eval_csv(&rows));
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        let rows = vec![EvalRow {
            sample_id: "a,b".into(),
            task: "t".into(),
            sdr_in_db: 0.0,
            sdr_out_db: 0.0,
            sdr_improvement_db: 0.0,
            nsim_mean: 0.0,
        }];
        let text = render_eval_csv(&rows);
        assert!(text.contains("\"a,b\""));
    }

    #[test]
    fn mean_over_averages_a_column() {
        let mk = |imp: f64| EvalRow {
            sample_id: "x".into(),
            task: "t".into(),
            sdr_in_db: 0.0,
            sdr_out_db: imp,
            sdr_improvement_db: imp,
            nsim_mean: 0.5,
        };
        let rows = vec![mk(1.0), mk(2.0), mk(6.0)];
        assert_eq!(mean_over(&rows, |r| r.sdr_improvement_db), 3.0);
    }
}
