//! CSV, JSON and binary exports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a CSV
//! read back yields the same bits and identical runs produce identical bytes.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::Serialize;

use crate::cocycle::BandSet;
use crate::experiments::CurveRecord;
use crate::resolvent::ExactTreeResult;
use crate::{Complex64, Error, Result};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::arg(format!("csv: {other:?}")),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// `re,im` rows.
pub fn write_samples_csv<W: Write>(w: W, samples: &[Complex64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["re", "im"]).map_err(csv_error)?;
    for g in samples {
        out.write_record([fmt(g.re), fmt(g.im)]).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<Complex64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize::<(f64, f64)>() {
        let (re, im) = row.map_err(csv_error)?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// Flat little-endian `f64` pairs `(re, im)`, no header.
pub fn write_samples_binary<W: Write>(mut w: W, samples: &[Complex64]) -> Result<()> {
    for g in samples {
        w.write_all(&g.re.to_le_bytes())?;
        w.write_all(&g.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_binary<R: Read>(mut r: R) -> Result<Vec<Complex64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::arg("binary sample dump is not a whole number of (re, im) pairs"));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// `vertex_id,re,im`, with ids as child-index paths (`r` for the root).
pub fn write_exact_tree_csv<W: Write>(w: W, tree: &ExactTreeResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["vertex_id", "re", "im"]).map_err(csv_error)?;
    for (v, g) in tree.iter() {
        out.write_record([v.label(tree.branching()), fmt(g.re), fmt(g.im)])
            .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// `lo,hi` rows.
pub fn write_bands_csv<W: Write>(w: W, bands: &BandSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lo", "hi"]).map_err(csv_error)?;
    for &(lo, hi) in &bands.intervals {
        out.write_record([fmt(lo), fmt(hi)]).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_bands_csv<R: Read>(r: R) -> Result<BandSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let intervals = rdr
        .deserialize::<(f64, f64)>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_error)?;
    Ok(BandSet { intervals })
}

/// `abscissa,value,std_error` followed by the sorted union of metadata keys;
/// missing keys are left empty.
pub fn write_curve_csv<W: Write>(w: W, records: &[CurveRecord]) -> Result<()> {
    let keys: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.metadata.keys().map(String::as_str))
        .collect();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["abscissa", "value", "std_error"];
    header.extend(keys.iter().copied());
    out.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![fmt(r.abscissa), fmt(r.value), fmt(r.std_error)];
        row.extend(keys.iter().map(|k| r.metadata.get(*k).cloned().unwrap_or_default()));
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EvaluationPoint, PotentialSpec, TreeParams};
    use crate::resolvent::exact_tree_gamma;

    fn samples() -> Vec<Complex64> {
        vec![
            Complex64::new(0.1, std::f64::consts::FRAC_1_SQRT_2),
            Complex64::new(-1e-300, 3.0),
            Complex64::new(2.5, f64::MIN_POSITIVE),
        ]
    }

    #[test]
    fn samples_round_trip_bit_exact() {
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &samples()).unwrap();
        assert!(buf.starts_with(b"re,im\n"));
        assert_eq!(read_samples_csv(buf.as_slice()).unwrap(), samples());
        let mut bin = Vec::new();
        write_samples_binary(&mut bin, &samples()).unwrap();
        assert_eq!(bin.len(), 48);
        assert_eq!(read_samples_binary(bin.as_slice()).unwrap(), samples());
        assert!(read_samples_binary(&bin[..47]).is_err());
    }

    #[test]
    fn exact_tree_rows() {
        let params = TreeParams::new(2, 1, 1).unwrap();
        let point = EvaluationPoint::new(0.0, 1.0, 1).unwrap();
        let tree = exact_tree_gamma(&params, &PotentialSpec::free(), &point, 0).unwrap();
        let mut buf = Vec::new();
        write_exact_tree_csv(&mut buf, &tree).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vertex_id,re,im");
        assert!(lines[1].starts_with("r,"));
        assert!(lines[2].starts_with("0,"));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn bands_round_trip() {
        let bands = BandSet {
            intervals: vec![(-2.8284271247461903, -1.0), (1.0, 2.8284271247461903)],
        };
        let mut buf = Vec::new();
        write_bands_csv(&mut buf, &bands).unwrap();
        assert_eq!(read_bands_csv(buf.as_slice()).unwrap(), bands);
    }

    #[test]
    fn curve_header_unions_metadata() {
        let recs = vec![
            CurveRecord::new(0.5, 1.0, 0.1).with("mode", "iid"),
            CurveRecord::new(0.25, 0.5, 0.0).with("eta", 0.001),
        ];
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "abscissa,value,std_error,eta,mode\n0.5,1,0.1,,iid\n0.25,0.5,0,0.001,\n");
    }
}
