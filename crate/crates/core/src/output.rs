//! CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::grid::GridField;
use crate::random::{CdfTable, LatticeRealization};

/// `printf("%.12g")`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header plus numeric rows.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_g(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with keys in sorted order.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// `<stem>.csv` with coordinates and values of active nodes, plus a
/// `<stem>.json` sidecar holding geometry and `meta`.
pub fn write_field(dir: &Path, stem: &str, field: &GridField, meta: serde_json::Value) -> Result<()> {
    let header: &[&str] = if field.dim == 1 { &["x", "value"] } else { &["x", "y", "value"] };
    let rows = field.active_indices().map(|i| {
        let x = field.coords(i);
        let mut r = x[..field.dim].to_vec();
        r.push(field.values[i]);
        r
    });
    write_csv(&dir.join(format!("{stem}.csv")), header, rows)?;
    let sidecar = serde_json::json!({
        "geometry": field.geometry,
        "dim": field.dim,
        "h": field.h,
        "nodes_per_axis": field.n,
        "active_nodes": field.active_indices().count(),
        "meta": meta,
    });
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}

/// One row per site of the window: index, indicator.
pub fn write_realization(path: &Path, real: &LatticeRealization) -> Result<()> {
    let dim = real.window.dim;
    let header: &[&str] = if dim == 1 { &["k", "x"] } else { &["k0", "k1", "x"] };
    let rows = real.window.iter().zip(&real.indicators).map(|(k, x)| {
        let mut r: Vec<f64> = k[..dim].iter().map(|v| *v as f64).collect();
        r.push(if *x { 1.0 } else { 0.0 });
        r
    });
    write_csv(path, header, rows)
}

pub fn write_cdf(path: &Path, table: &CdfTable) -> Result<()> {
    let mut header = vec!["t", "empirical", "exact"];
    if table.limit.is_some() {
        header.push("limit");
    }
    let rows = (0..table.t.len()).map(|k| {
        let mut r = vec![table.t[k], table.empirical[k], table.exact[k]];
        if let Some(l) = &table.limit {
            r.push(l[k]);
        }
        r
    });
    write_csv(path, &header, rows)
}
