//! Plain-text emission for external plotting tools (gnuplot `splot` and
//! `plot ... index` layouts).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mech_wigner::backaction::{TRAJECTORY_COLUMNS, TRAJECTORY_FORMAT};
use mech_wigner::tomography::io::{
    fmt_f64, read_char_fn, read_records, read_wigner, split_header, CHARFN_FORMAT, RECORDS_FORMAT, WIGNER_FORMAT,
};

use crate::error::CliError;

fn corrupt(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Render the artifact at `path` according to its `format` header.
pub fn render(path: &Path) -> Result<String, CliError> {
    let data = std::fs::read(path).map_err(|e| corrupt(path, e))?;
    let (meta, _) = split_header(data.as_slice()).map_err(|e| corrupt(path, e))?;
    match meta.get("format") {
        Some(WIGNER_FORMAT) => {
            let (w, _) = read_wigner(data.as_slice()).map_err(|e| corrupt(path, e))?;
            let mut s = String::from("# x p W\n");
            for (i, x) in w.x.iter().enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                for (j, p) in w.p.iter().enumerate() {
                    let _ = writeln!(s, "{} {} {}", fmt_f64(*x), fmt_f64(*p), fmt_f64(w.values[(i, j)]));
                }
            }
            Ok(s)
        }
        Some(RECORDS_FORMAT) => {
            let (records, _) = read_records(data.as_slice()).map_err(|e| corrupt(path, e))?;
            // one gnuplot index per (φ, I), sorted numerically
            let mut series: BTreeMap<(u64, u64), Vec<(f64, f64, Option<f64>)>> = BTreeMap::new();
            for r in &records {
                let key = (ordered_bits(r.point.phi), ordered_bits(r.point.intensity));
                series.entry(key).or_default().push((r.point.tau, r.p_e, r.p_e_sampled));
            }
            let mut s = String::from("# tau_s p_e [p_e_sampled], one block per (phi, intensity)\n");
            for (n, ((phi, intensity), mut rows)) in series.into_iter().enumerate() {
                if n > 0 {
                    s.push_str("\n\n");
                }
                rows.sort_by(|a, b| a.0.total_cmp(&b.0));
                let _ = writeln!(
                    s,
                    "# phi = {} intensity = {}",
                    fmt_f64(from_ordered_bits(phi)),
                    fmt_f64(from_ordered_bits(intensity))
                );
                for (tau, p, sampled) in rows {
                    match sampled {
                        Some(q) => writeln!(s, "{} {} {}", fmt_f64(tau), fmt_f64(p), fmt_f64(q)),
                        None => writeln!(s, "{} {}", fmt_f64(tau), fmt_f64(p)),
                    }
                    .expect("string write");
                }
            }
            Ok(s)
        }
        Some(TRAJECTORY_FORMAT) => {
            let (_, body) = split_header(data.as_slice()).map_err(|e| corrupt(path, e))?;
            let mut lines = body.iter();
            let header: Vec<&str> = lines.next().map(|h| h.split_whitespace().collect()).unwrap_or_default();
            if header != TRAJECTORY_COLUMNS {
                return Err(corrupt(path, "unexpected trajectory columns"));
            }
            let mut s = String::from("# step purity mean_phonon edge_population\n");
            for line in lines {
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols.len() != TRAJECTORY_COLUMNS.len() {
                    return Err(corrupt(path, format!("malformed row {line:?}")));
                }
                let _ = writeln!(s, "{} {} {} {}", cols[0], cols[10], cols[11], cols[12]);
            }
            Ok(s)
        }
        Some(CHARFN_FORMAT) => {
            let (cf, _) = read_char_fn(data.as_slice()).map_err(|e| corrupt(path, e))?;
            let mut s = String::from("# mu_re mu_im c_re c_im\n");
            for (m, c) in cf.mu_values.iter().zip(&cf.c_values) {
                let _ = writeln!(s, "{} {} {} {}", fmt_f64(m.re), fmt_f64(m.im), fmt_f64(c.re), fmt_f64(c.im));
            }
            Ok(s)
        }
        other => Err(corrupt(path, format!("unsupported artifact format {other:?}"))),
    }
}

/// Map an f64 to a u64 with the same ordering.
fn ordered_bits(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_bits_sort_like_floats() {
        let xs = [-3.5, -0.0, 0.0, 1e-300, 2.0, f64::MAX];
        for w in xs.windows(2) {
            assert!(ordered_bits(w[0]) <= ordered_bits(w[1]));
        }
        for x in xs {
            assert_eq!(from_ordered_bits(ordered_bits(x)), if x == 0.0 { 0.0 } else { x });
        }
    }
}
