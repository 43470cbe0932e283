//! Diagnostics CSV writer: fixed 12-column schema, full double precision.

use crate::diagnostics::DiagnosticsRecord;
use std::io;
use std::path::Path;

pub const CSV_HEADER: &str = "step,time,mass_u,mass_w,mass_z,mass_wz,combined_mass,g_residual_cum,comp_gap,min_w,max_u_trace,fb_measure";

pub fn format_row(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.step,
        r.time,
        r.mass_u,
        r.mass_w,
        r.mass_z,
        r.mass_wz,
        r.combined_mass,
        r.g_residual_cum,
        r.comp_gap,
        r.min_w,
        r.max_u_trace,
        r.fb_measure
    )
}

pub fn render_diag_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::with_capacity(64 + 256 * records.len());
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format_row(r));
        s.push('\n');
    }
    s
}

pub fn write_diag_csv(path: &Path, records: &[DiagnosticsRecord]) -> io::Result<()> {
    std::fs::write(path, render_diag_csv(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize) -> DiagnosticsRecord {
        DiagnosticsRecord {
            step,
            time: step as f64 * 0.1,
            mass_u: 1.0 / 3.0,
            mass_w: 2.0,
            mass_z: 0.5,
            mass_wz: 2.5,
            combined_mass: 2.0 / 3.0,
            g_residual_cum: 1e-5,
            comp_gap: 0.25,
            min_w: -1e-12,
            max_u_trace: 1.000001,
            fb_measure: 0.75,
        }
    }

    #[test]
    fn empty_list_gives_header_only() {
        let s = render_diag_csv(&[]);
        assert_eq!(s, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn two_records_three_lines() {
        let s = render_diag_csv(&[rec(0), rec(1)]);
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn every_row_has_twelve_columns() {
        let s = render_diag_csv(&[rec(0), rec(7), rec(123)]);
        for line in s.lines() {
            assert_eq!(line.split(',').count(), 12, "line: {line}");
        }
    }

    #[test]
    fn values_roundtrip_at_full_precision() {
        let r = rec(3);
        let row = format_row(&r);
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), 3);
        assert_eq!(cols[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(cols[9].parse::<f64>().unwrap(), -1e-12);
    }
}
