//! Closed-loop trace records and CSV export (17 significant digits).

use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Per-phase monotonic stamps asserting the in-step ordering
/// reference -> OCP -> actuation -> observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseStamps {
    pub reference: u64,
    pub ocp: u64,
    pub actuation: u64,
    pub observer: u64,
}

/// One closed-loop step: everything the benchmark figures are built from.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub d_hat: DVector<f64>,
    pub x_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
    pub err_state_norm: f64,
    pub err_output_norm: f64,
    pub ocp_iters: usize,
    pub ocp_stationarity: f64,
    /// Newton iterations of the reference calculator, when it ran.
    pub refcalc_iters: Option<usize>,
    pub stamps: PhaseStamps,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub records: Vec<StepRecord>,
    /// Resampled points during inline data generation (0 when a prefitted
    /// model was supplied).
    pub resamples: usize,
}

fn fmt_float(v: f64) -> String {
    // 17 significant digits round-trip any f64 exactly.
    format!("{v:.16e}")
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_err_state(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.err_state_norm)
    }

    pub fn final_err_output(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.err_output_norm)
    }

    pub fn err_state_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.err_state_norm).collect()
    }

    pub fn err_output_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.err_output_norm).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.records.first() else {
            return out;
        };
        let mut header = vec!["k".to_string()];
        let extend = |header: &mut Vec<String>, prefix: &str, len: usize| {
            for i in 1..=len {
                header.push(format!("{prefix}_{i}"));
            }
        };
        extend(&mut header, "x", first.x.len());
        extend(&mut header, "u", first.u.len());
        extend(&mut header, "dhat", first.d_hat.len());
        extend(&mut header, "xref", first.x_ref.len());
        extend(&mut header, "uref", first.u_ref.len());
        header.push("err_state_norm".into());
        header.push("err_output_norm".into());
        header.push("ocp_iters".into());
        header.push("ocp_stationarity".into());
        out.push_str(&header.join(","));
        out.push('\n');

        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            for series in [&r.x, &r.u, &r.d_hat, &r.x_ref, &r.u_ref] {
                row.extend(series.iter().map(|&v| fmt_float(v)));
            }
            row.push(fmt_float(r.err_state_norm));
            row.push(fmt_float(r.err_output_norm));
            row.push(r.ocp_iters.to_string());
            row.push(fmt_float(r.ocp_stationarity));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Small gnuplot script plotting the error columns of the exported traces on
/// a log scale, one curve per CSV.
pub fn gnuplot_script(csv_names: &[String], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set xlabel 'k'");
    let _ = writeln!(s, "set ylabel 'error norm'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set key outside");
    let mut first = true;
    for name in csv_names {
        let cmd = if first { "plot" } else { "    " };
        let cont = if first { " \\" } else { " \\" };
        let stem = name.trim_end_matches(".csv");
        let _ = writeln!(
            s,
            "{cmd} '{name}' using 1:'err_output_norm' with lines title '{stem}',{cont}"
        );
        first = false;
    }
    // Trim the trailing continuation.
    let trimmed = s.trim_end_matches(|c| c == '\\' || c == ' ' || c == ',' || c == '\n');
    let mut out = trimmed.to_string();
    out.push('\n');
    out.push_str("pause -1\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize) -> StepRecord {
        StepRecord {
            k,
            x: DVector::from_column_slice(&[1.0 / 3.0, -2.0]),
            u: DVector::from_column_slice(&[0.5]),
            d_hat: DVector::from_column_slice(&[0.0, 1e-17]),
            x_ref: DVector::zeros(2),
            u_ref: DVector::zeros(1),
            err_state_norm: 2.0_f64.sqrt(),
            err_output_norm: 0.1,
            ocp_iters: 7,
            ocp_stationarity: 1e-9,
            refcalc_iters: None,
            stamps: PhaseStamps {
                reference: 4 * k as u64,
                ocp: 4 * k as u64 + 1,
                actuation: 4 * k as u64 + 2,
                observer: 4 * k as u64 + 3,
            },
        }
    }

    #[test]
    fn csv_has_the_documented_header_and_row_shape() {
        let trace = ClosedLoopTrace {
            records: vec![record(0), record(1)],
            resamples: 0,
        };
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,x_1,x_2,u_1,dhat_1,dhat_2,xref_1,xref_2,uref_1,\
             err_state_norm,err_output_norm,ocp_iters,ocp_stationarity"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 13);
        assert_eq!(row[0], "0");
        assert_eq!(row[11], "7");
    }

    #[test]
    fn floats_round_trip_through_the_csv_format() {
        let values = [1.0 / 3.0, -2.0, 1e-17, 2.0_f64.sqrt(), 6.02e23];
        for v in values {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn gnuplot_script_lists_every_csv() {
        let script = gnuplot_script(
            &["a.csv".to_string(), "b.csv".to_string()],
            "demo",
        );
        assert!(script.contains("'a.csv'"));
        assert!(script.contains("'b.csv'"));
        assert!(script.contains("logscale"));
    }
}
