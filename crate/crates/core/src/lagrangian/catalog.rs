use super::{LagrangianMeta, RadialLagrangian, SharedLagrangian};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

/// Catalog reference as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Overrides the catalog value of r.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Overrides the catalog value of ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Two-column CSV `t,F(t)` for `tabulated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl LagrangianSpec {
    pub fn named(name: &str) -> Self {
        LagrangianSpec { name: name.to_string(), ..Default::default() }
    }

    pub fn pnorm(c: f64, p: f64) -> Self {
        LagrangianSpec { name: "pnorm".into(), c: Some(c), p: Some(p), ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub params: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry { name: "quadratic", formula: "|xi|^2 / 2", params: "r=0, eps=1" },
        CatalogEntry {
            name: "torsion",
            formula: "|xi| for |xi|<=1, (|xi|^2+1)/2 otherwise",
            params: "r=1, eps=0.25",
        },
        CatalogEntry { name: "pnorm", formula: "c |xi|^p", params: "c (default 1), p (default 2); r=0, eps=c for p>=2" },
        CatalogEntry {
            name: "double_well",
            formula: "(|xi|^2-1)^2, convexification ((|xi|^2-1)_+)^2",
            params: "r=1, eps=1 (for the convexification)",
        },
        CatalogEntry {
            name: "tabulated",
            formula: "radial profile F(|xi|) read from a CSV of (t, F(t)) samples",
            params: "file, r, eps",
        },
    ]
}

fn meta(name: &str, r: f64, eps: f64, p_growth: Option<(f64, f64)>, spec: &LagrangianSpec) -> LagrangianMeta {
    LagrangianMeta {
        name: name.to_string(),
        r: spec.r.unwrap_or(r),
        eps: spec.eps.unwrap_or(eps),
        p_growth,
    }
}

fn radial(
    m: LagrangianMeta,
    v: impl Fn(f64) -> f64 + Send + Sync + 'static,
    d: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> RadialLagrangian {
    RadialLagrangian::new(m, Arc::new(v), Arc::new(d))
}

pub fn build(spec: &LagrangianSpec) -> Result<SharedLagrangian> {
    let f: SharedLagrangian = match spec.name.as_str() {
        "quadratic" => Arc::new(radial(meta("quadratic", 0.0, 1.0, Some((0.5, 2.0)), spec), |t| 0.5 * t * t, |t| t)),
        "torsion" => Arc::new(radial(
            meta("torsion", 1.0, 0.25, Some((0.5, 2.0)), spec),
            |t| if t <= 1.0 { t } else { 0.5 * t * t + 0.5 },
            |t| if t < 1.0 { 1.0 } else { t },
        )),
        "pnorm" => {
            let c = spec.c.unwrap_or(1.0);
            let p = spec.p.unwrap_or(2.0);
            if !(c > 0.0 && p > 1.0) {
                return Err(Error::InvalidArgument(format!("pnorm needs c > 0 and p > 1, got c={c}, p={p}")));
            }
            // Conservative modulus: pairs with one endpoint near the origin, where
            // the Hessian of c|ξ|^p degenerates for p > 2, still satisfy it.
            let eps = if p >= 2.0 { c } else { 0.0 };
            Arc::new(radial(
                meta("pnorm", 0.0, eps, Some((c, p)), spec),
                move |t| c * t.powf(p),
                move |t| c * p * t.powf(p - 1.0),
            ))
        }
        "double_well" => {
            let m = meta("double_well", 1.0, 1.0, None, spec);
            let hull = radial(
                LagrangianMeta { name: "double_well**".into(), ..m.clone() },
                |t| {
                    let s = (t * t - 1.0).max(0.0);
                    s * s
                },
                |t| 4.0 * t * (t * t - 1.0).max(0.0),
            );
            Arc::new(
                radial(m, |t| (t * t - 1.0).powi(2), |t| 4.0 * t * (t * t - 1.0))
                    .with_convexification(Arc::new(hull)),
            )
        }
        "tabulated" => {
            let path = spec
                .file
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("tabulated lagrangian needs `file`".into()))?;
            let (ts, fs) = read_profile(path)?;
            Arc::new(tabulated(meta("tabulated", 0.0, 0.0, None, spec), ts, fs)?)
        }
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(f)
}

fn read_profile(path: &std::path::Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path).map_err(|e| {
        Error::Scenario(format!("cannot read {}: {e}", path.display()))
    })?;
    let mut ts = Vec::new();
    let mut fs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(t), Some(v)) => {
                ts.push(t);
                fs.push(v);
            }
            // a non-numeric first row is a header
            _ if ts.is_empty() => continue,
            _ => return Err(Error::Scenario(format!("{}: malformed row {:?}", path.display(), rec))),
        }
    }
    Ok((ts, fs))
}

/// Radial Lagrangian interpolating samples `(t_i, F_i)` piecewise linearly and
/// extending the last segment linearly beyond the table.
pub fn tabulated(meta: LagrangianMeta, ts: Vec<f64>, fs: Vec<f64>) -> Result<RadialLagrangian> {
    if ts.len() < 2 || ts.len() != fs.len() {
        return Err(Error::InvalidArgument("tabulated profile needs at least two samples".into()));
    }
    if ts[0] != 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("tabulated profile must start at t=0 and increase strictly".into()));
    }
    let ts = Arc::new(ts);
    let fs = Arc::new(fs);
    let seg = {
        let ts = ts.clone();
        move |t: f64| -> usize {
            let i = ts.partition_point(|&x| x <= t);
            i.clamp(1, ts.len() - 1) - 1
        }
    };
    let seg2 = seg.clone();
    let (tv, fv) = (ts.clone(), fs.clone());
    let value = move |t: f64| {
        let i = seg(t);
        let s = (fv[i + 1] - fv[i]) / (tv[i + 1] - tv[i]);
        fv[i] + s * (t - tv[i])
    };
    let deriv = move |t: f64| {
        let i = seg2(t);
        (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i])
    };
    Ok(radial(meta, value, deriv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;

    #[test]
    fn catalog_lists_required_names() {
        let names: Vec<_> = catalog_entries().iter().map(|e| e.name).collect();
        for n in ["quadratic", "torsion", "pnorm", "double_well", "tabulated"] {
            assert!(names.contains(&n));
        }
    }

    #[test]
    fn every_entry_vanishes_at_origin() {
        for spec in [
            LagrangianSpec::named("quadratic"),
            LagrangianSpec::named("torsion"),
            LagrangianSpec::pnorm(2.0, 3.0),
        ] {
            assert_eq!(build(&spec).unwrap().value(Vec2::ZERO), 0.0);
        }
        // the double well is positive at 0; only its convexification vanishes
        let dw = build(&LagrangianSpec::named("double_well")).unwrap();
        assert_eq!(dw.value(Vec2::ZERO), 1.0);
        assert_eq!(dw.convexification().unwrap().value(Vec2::new(0.5, 0.5)), 0.0);
    }

    #[test]
    fn torsion_values() {
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        assert_eq!(f.value(Vec2::new(0.6, 0.8)), 1.0);
        assert!((f.value(Vec2::new(2.0, 0.0)) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(build(&LagrangianSpec::named("cubic")), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn tabulated_reads_csv_and_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "t,F\n0,0\n1,0.5\n2,2\n").unwrap();
        let spec = LagrangianSpec { name: "tabulated".into(), file: Some(p), ..Default::default() };
        let f = build(&spec).unwrap();
        assert!((f.value(Vec2::new(1.5, 0.0)) - 1.25).abs() < 1e-15);
        assert!((f.value(Vec2::new(0.0, 3.0)) - 3.5).abs() < 1e-15);
        assert!((f.gradient(Vec2::new(0.5, 0.0)).x - 0.5).abs() < 1e-15);
    }
}
