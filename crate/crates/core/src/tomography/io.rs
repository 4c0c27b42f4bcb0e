//! Plain-text artifacts: `#`-prefixed `key = value` metadata lines followed
//! by a table. Floats are written with 17 significant digits, so reading a
//! file back reproduces every value bit for bit.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::inversion::{CharFnGrid, CharFnSource};
use super::probe::ProbePoint;
use super::records::ProbeRecord;
use super::wigner::{uniform_axis, WignerGrid, NORMALIZATION};
use crate::dynamics::AtomMixture;
use crate::error::{Error, Result};

pub const RECORDS_FORMAT: &str = "mech-wigner records v1";
pub const CHARFN_FORMAT: &str = "mech-wigner charfn v1";
pub const WIGNER_FORMAT: &str = "mech-wigner wigner v1";

/// Record file columns, in order.
pub const RECORD_COLUMNS: [&str; 7] = ["tau_s", "phi_rad", "intensity", "rho_e", "p_e", "shots", "p_e_sampled"];

/// Lossless float formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Ordered `key = value` pairs from the `#` header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse(format!("missing header key {key:?}")))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.require(key)?)
    }

    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    }

    fn check_format(&self, expected: &str) -> Result<()> {
        match self.get("format") {
            Some(f) if f == expected => Ok(()),
            other => Err(Error::Parse(format!("expected format {expected:?}, found {other:?}"))),
        }
    }
}

/// Split a document into its metadata and the remaining non-comment lines.
pub fn split_header(r: impl BufRead) -> Result<(Metadata, Vec<String>)> {
    let mut meta = Metadata::default();
    let mut body = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.push(k.trim(), v.trim());
            }
        } else if !line.trim().is_empty() {
            body.push(line);
        }
    }
    Ok((meta, body))
}

pub fn write_records(w: &mut impl Write, records: &[ProbeRecord], g: f64, extra: &Metadata) -> Result<()> {
    let mut meta = Metadata::default();
    meta.push("format", RECORDS_FORMAT);
    meta.push("g_rad_s", fmt_f64(g));
    meta.0.extend(extra.0.iter().cloned());
    let io = |e: io::Error| Error::Parse(e.to_string());
    meta.write(w).map_err(io)?;
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    csv.write_record(RECORD_COLUMNS).map_err(err)?;
    for r in records {
        csv.write_record([
            fmt_f64(r.point.tau),
            fmt_f64(r.point.phi),
            fmt_f64(r.point.intensity),
            fmt_f64(r.atom.rho_e()),
            fmt_f64(r.p_e),
            r.shots.map(|s| s.to_string()).unwrap_or_default(),
            r.p_e_sampled.map(fmt_f64).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    csv.flush().map_err(io)
}

/// Read a record file; returns the records and the header.
pub fn read_records(r: impl io::Read) -> Result<(Vec<ProbeRecord>, Metadata)> {
    let (meta, body) = split_header(io::BufReader::new(r))?;
    meta.check_format(RECORDS_FORMAT)?;
    let g = meta.require_f64("g_rad_s")?;
    let joined = body.join("\n");
    let mut csv = csv::Reader::from_reader(joined.as_bytes());
    let headers = csv.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::Parse(format!("unexpected columns {headers:?}")));
    }
    let mut out = Vec::new();
    for (line, row) in csv.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let at = |e: Error| Error::Parse(format!("record {}: {e}", line + 1));
        let num = |i: usize| parse_f64(&row[i]).map_err(at);
        let point = ProbePoint::new(g, num(0)?, num(1)?, num(2)?).map_err(at)?;
        let atom = AtomMixture::from_excited(num(3)?).map_err(at)?;
        let shots = match row[5].trim() {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|_| at(Error::Parse(format!("bad shots {s:?}"))))?),
        };
        let p_e_sampled = match row[6].trim() {
            "" => None,
            _ => Some(num(6)?),
        };
        if shots.is_some() != p_e_sampled.is_some() {
            return Err(at(Error::Parse("shots and p_e_sampled must appear together".into())));
        }
        out.push(ProbeRecord { point, atom, p_e: num(4)?, shots, p_e_sampled });
    }
    Ok((out, meta))
}

pub fn write_char_fn(w: &mut impl Write, cf: &CharFnGrid, extra: &Metadata) -> io::Result<()> {
    let mut meta = Metadata::default();
    meta.push("format", CHARFN_FORMAT);
    meta.push("source", cf.source.as_str());
    if let Some(d) = cf.origin_deviation {
        meta.push("origin_deviation", fmt_f64(d));
    }
    meta.0.extend(extra.0.iter().cloned());
    meta.write(w)?;
    writeln!(w, "mu_re mu_im c_re c_im condition")?;
    for ((m, c), k) in cf.mu_values.iter().zip(&cf.c_values).zip(&cf.condition) {
        writeln!(w, "{} {} {} {} {}", fmt_f64(m.re), fmt_f64(m.im), fmt_f64(c.re), fmt_f64(c.im), fmt_f64(*k))?;
    }
    Ok(())
}

pub fn read_char_fn(r: impl io::Read) -> Result<(CharFnGrid, Metadata)> {
    let (meta, body) = split_header(io::BufReader::new(r))?;
    meta.check_format(CHARFN_FORMAT)?;
    let source = match meta.require("source")? {
        "direct" => CharFnSource::Direct,
        "reconstructed" => CharFnSource::Reconstructed,
        s => return Err(Error::Parse(format!("unknown source {s:?}"))),
    };
    let origin_deviation = meta.get("origin_deviation").map(parse_f64).transpose()?;
    let mut cf = CharFnGrid { mu_values: vec![], c_values: vec![], source, condition: vec![], origin_deviation };
    for line in body.iter().skip(1) {
        let v = line.split_whitespace().map(parse_f64).collect::<Result<Vec<_>>>()?;
        if v.len() != 5 {
            return Err(Error::Parse(format!("expected 5 columns: {line:?}")));
        }
        cf.mu_values.push(C64::new(v[0], v[1]));
        cf.c_values.push(C64::new(v[2], v[3]));
        cf.condition.push(v[4]);
    }
    Ok((cf, meta))
}

/// Matrix layout: one line per `x`, one column per `p`.
pub fn write_wigner(w: &mut impl Write, grid: &WignerGrid, extra: &Metadata) -> io::Result<()> {
    let mut meta = Metadata::default();
    meta.push("format", WIGNER_FORMAT);
    meta.push("normalization", NORMALIZATION);
    meta.push("x_axis", format!("{} {} {}", fmt_f64(grid.x[0]), fmt_f64(*grid.x.last().unwrap()), grid.x.len()));
    meta.push("p_axis", format!("{} {} {}", fmt_f64(grid.p[0]), fmt_f64(*grid.p.last().unwrap()), grid.p.len()));
    meta.push("imag_residue", fmt_f64(grid.imag_residue));
    for warning in &grid.warnings {
        meta.push("warning", warning);
    }
    meta.0.extend(extra.0.iter().cloned());
    meta.write(w)?;
    for i in 0..grid.x.len() {
        let row: Vec<String> = (0..grid.p.len()).map(|j| fmt_f64(grid.values[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("axis header {spec:?}")));
    }
    let n = parts[2].parse().map_err(|_| Error::Parse(format!("axis count {:?}", parts[2])))?;
    uniform_axis(parse_f64(parts[0])?, parse_f64(parts[1])?, n)
}

pub fn read_wigner(r: impl io::Read) -> Result<(WignerGrid, Metadata)> {
    let (meta, body) = split_header(io::BufReader::new(r))?;
    meta.check_format(WIGNER_FORMAT)?;
    let x = parse_axis(meta.require("x_axis")?)?;
    let p = parse_axis(meta.require("p_axis")?)?;
    if body.len() != x.len() {
        return Err(Error::Parse(format!("expected {} rows, found {}", x.len(), body.len())));
    }
    let mut values = DMatrix::zeros(x.len(), p.len());
    for (i, line) in body.iter().enumerate() {
        let row = line.split_whitespace().map(parse_f64).collect::<Result<Vec<_>>>()?;
        if row.len() != p.len() {
            return Err(Error::Parse(format!("row {} has {} values, expected {}", i + 1, row.len(), p.len())));
        }
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    let imag_residue = meta.require_f64("imag_residue")?;
    let warnings = meta.0.iter().filter(|(k, _)| k == "warning").map(|(_, v)| v.clone()).collect();
    Ok((WignerGrid { x, p, values, imag_residue, warnings }, meta))
}
