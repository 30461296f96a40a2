//! Trajectory tables in CSV form.
//!
//! Columns are `t, x1 … xn, H, balance_residual`. Numbers are written with
//! 17 significant digits, so reading a table back recovers `t`, `x` and `H`
//! bit for bit. The residual of row 0 is empty.

use std::io::{Read, Write};

use phnet::nalgebra::DVector;
use phnet::{EnergyReport, Trajectory};

use crate::error::Failure;

/// Columns recovered from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
    /// One entry per step; `None` where the column is empty.
    pub residuals: Vec<Option<f64>>,
}

pub fn header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.push("H".into());
    h.push("balance_residual".into());
    h
}

/// Seventeen significant digits in exponent form, enough to parse back to
/// the same value.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::input(format!("CSV: {e}"))
}

/// Writes `traj` with residuals from `report`, which must describe the same
/// run. An empty trajectory needs a state dimension for the header.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory, report: &EnergyReport, n: usize) -> Result<(), Failure> {
    if report.steps() != traj.steps() {
        return Err(Failure::usage(format!("report has {} steps, trajectory {}", report.steps(), traj.steps())));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n)).map_err(csv_err)?;
    for (k, ((t, x), h)) in traj.times().iter().zip(traj.states()).zip(traj.energy()).enumerate() {
        let mut row = Vec::with_capacity(n + 3);
        row.push(format_number(*t));
        row.extend(x.iter().map(|v| format_number(*v)));
        row.push(format_number(*h));
        row.push(if k == 0 { String::new() } else { format_number(report.residuals[k - 1]) });
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn number(field: &str, row: usize, col: &str) -> Result<f64, Failure> {
    field
        .trim()
        .parse()
        .map_err(|_| Failure::input(format!("CSV line {}: column {col}: {field:?} is not a number", row + 2)))
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Table, Failure> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if head.len() < 3 {
        return Err(Failure::input("CSV header: expected t, x1..xn, H, balance_residual"));
    }
    let n = head.len() - 3;
    if head != header(n) {
        return Err(Failure::input(format!("CSV header: expected {}", header(n).join(","))));
    }
    let mut table = Table { times: Vec::new(), states: Vec::new(), energy: Vec::new(), residuals: Vec::new() };
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        table.times.push(number(&rec[0], row, "t")?);
        let x = (0..n).map(|i| number(&rec[i + 1], row, &head[i + 1])).collect::<Result<Vec<_>, _>>()?;
        table.states.push(DVector::from_vec(x));
        table.energy.push(number(&rec[n + 1], row, "H")?);
        let res = &rec[n + 2];
        if row > 0 {
            table.residuals.push(if res.trim().is_empty() {
                None
            } else {
                Some(number(res, row, "balance_residual")?)
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip() {
        for v in [0.0, -0.0, 1e-18, 0.1, 1.0 / 3.0, -2.5e20, 123456.789, f64::MIN_POSITIVE] {
            let back: f64 = format_number(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
        assert_eq!(format_number(0.01), "1.0000000000000000e-2");
    }

    #[test]
    fn header_layout() {
        assert_eq!(header(2).join(","), "t,x1,x2,H,balance_residual");
    }

    #[test]
    fn rejects_bad_numbers_with_line() {
        let text = "t,x1,H,balance_residual\n0,1,0.5,\n0.1,abc,0.5,0\n";
        let err = read_trajectory(text.as_bytes()).unwrap_err();
        assert!(err.message.contains("line 3") && err.message.contains("x1"), "{}", err.message);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_trajectory("t,y1,H,balance_residual\n".as_bytes()).is_err());
    }
}
