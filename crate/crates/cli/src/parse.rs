//! Flag values: tables, kernels, phase points, grids, initial laws.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use billiard_mc_core::chain::InitialLaw;
use billiard_mc_core::geometry::TableKind;
use billiard_mc_core::kernel::{CustomSupport, PiecewiseLinear};
use billiard_mc_core::math::PI;
use billiard_mc_core::{Kernel, KernelFamily, PhasePoint, Table, TableSpec};
use serde::Deserialize;

/// A malformed flag value. Reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn numbers(list: &str, what: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| UsageError(format!("{what}: '{t}' is not a number")).into()))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TableJson {
    Circle {
        radius: f64,
        resolution: Option<usize>,
    },
    Ellipse {
        semi_axis_a: f64,
        semi_axis_b: f64,
        resolution: Option<usize>,
    },
    Superellipse {
        semi_axis_a: f64,
        semi_axis_b: f64,
        exponent: f64,
        resolution: Option<usize>,
    },
    PolarFourier {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        resolution: Option<usize>,
    },
}

impl TableJson {
    fn into_spec(self) -> TableSpec {
        let (spec, res) = match self {
            TableJson::Circle { radius, resolution } => (TableSpec::circle(radius), resolution),
            TableJson::Ellipse { semi_axis_a, semi_axis_b, resolution } => {
                (TableSpec::ellipse(semi_axis_a, semi_axis_b), resolution)
            }
            TableJson::Superellipse { semi_axis_a, semi_axis_b, exponent, resolution } => {
                (TableSpec::superellipse(semi_axis_a, semi_axis_b, exponent), resolution)
            }
            TableJson::PolarFourier { cos, sin, resolution } => (TableSpec::polar_fourier(cos, sin), resolution),
        };
        match res {
            Some(n) => spec.with_resolution(n),
            None => spec,
        }
    }
}

/// `circle:R`, `ellipse:A,B`, `superellipse:A,B,P` or a path to a JSON spec.
pub fn table_spec(arg: &str) -> Result<TableSpec> {
    if let Some((kind, params)) = arg.split_once(':') {
        let v = numbers(params, "--table")?;
        let spec = match (kind, v.as_slice()) {
            ("circle", &[r]) => TableSpec::circle(r),
            ("ellipse", &[a, b]) => TableSpec::ellipse(a, b),
            ("superellipse", &[a, b, p]) => TableSpec::superellipse(a, b, p),
            ("circle" | "ellipse" | "superellipse", _) => {
                return usage(format!("--table {arg}: wrong number of parameters for {kind}"))
            }
            _ => return usage(format!("--table {arg}: unknown table kind '{kind}'")),
        };
        return Ok(spec);
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return usage(format!("--table {arg}: not a shorthand (circle:R, ellipse:A,B, superellipse:A,B,P) or a file"));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading table spec {arg}"))?;
    let json: TableJson = serde_json::from_str(&text).map_err(|e| UsageError(format!("table spec {arg}: {e}")))?;
    Ok(json.into_spec())
}

pub fn table(arg: &str) -> Result<Table> {
    let spec = table_spec(arg)?;
    Table::build(&spec).with_context(|| format!("building table {arg}"))
}

/// The resolved table as JSON, for manifests and reports.
pub fn spec_json(spec: &TableSpec) -> serde_json::Value {
    let mut v = match &spec.kind {
        TableKind::Circle { radius } => serde_json::json!({ "kind": "circle", "radius": radius }),
        TableKind::Ellipse { semi_axis_a, semi_axis_b } => {
            serde_json::json!({ "kind": "ellipse", "semi_axis_a": semi_axis_a, "semi_axis_b": semi_axis_b })
        }
        TableKind::Superellipse { semi_axis_a, semi_axis_b, exponent } => serde_json::json!({
            "kind": "superellipse", "semi_axis_a": semi_axis_a, "semi_axis_b": semi_axis_b, "exponent": exponent
        }),
        TableKind::PolarFourier { cos, sin } => serde_json::json!({ "kind": "polar_fourier", "cos": cos, "sin": sin }),
    };
    v["resolution"] = spec.resolution.into();
    v
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomJson {
    lo: Vec<(f64, f64)>,
    hi: Vec<(f64, f64)>,
}

/// `example1`, `example2`, `example3` or a path to `{"lo": [[θ, v], …], "hi": […]}`.
pub fn kernel(arg: &str, epsilon: f64) -> Result<Kernel> {
    let family = match arg {
        "example1" => KernelFamily::Example1,
        "example2" => KernelFamily::Example2,
        "example3" => KernelFamily::Example3,
        _ => {
            let path = Path::new(arg);
            if !path.is_file() {
                return usage(format!("--kernel {arg}: expected example1, example2, example3 or a JSON file"));
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading kernel {arg}"))?;
            let json: CustomJson = serde_json::from_str(&text).map_err(|e| UsageError(format!("kernel {arg}: {e}")))?;
            let lo = PiecewiseLinear::new(json.lo).map_err(|e| UsageError(format!("kernel {arg}: {e}")))?;
            let hi = PiecewiseLinear::new(json.hi).map_err(|e| UsageError(format!("kernel {arg}: {e}")))?;
            KernelFamily::Custom(CustomSupport { lo, hi })
        }
    };
    Kernel::new(family, epsilon).map_err(|e| UsageError(format!("--kernel {arg} --epsilon {epsilon}: {e}")).into())
}

/// `s,theta` with `θ ∈ [0, π]`.
pub fn point(arg: &str, flag: &str) -> Result<PhasePoint> {
    match *numbers(arg, flag)?.as_slice() {
        [s, theta] if s.is_finite() && (0.0..=PI).contains(&theta) => Ok(PhasePoint::new(s, theta)),
        [_, _] => usage(format!("{flag} {arg}: theta must lie in [0, pi]")),
        _ => usage(format!("{flag} {arg}: expected s,theta")),
    }
}

/// `s,theta;s,theta;…`
pub fn points(arg: &str, flag: &str) -> Result<Vec<PhasePoint>> {
    let pts = arg.split(';').filter(|p| !p.trim().is_empty()).map(|p| point(p, flag)).collect::<Result<Vec<_>>>()?;
    if pts.is_empty() {
        return usage(format!("{flag}: no points given"));
    }
    Ok(pts)
}

/// `n_s,n_theta`
pub fn grid(arg: &str, flag: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(a), Ok(b)) if a >= 2 && b >= 2 => Ok((a, b)),
            _ => usage(format!("{flag} {arg}: both dimensions must be integers >= 2")),
        },
        _ => usage(format!("{flag} {arg}: expected n_s,n_theta")),
    }
}

/// `s,theta`, `uniform` or `nu`.
pub fn initial(arg: &str, table: &Table) -> Result<InitialLaw> {
    match arg {
        "uniform" => Ok(InitialLaw::Uniform),
        "nu" => Ok(InitialLaw::Nu),
        _ => {
            let p = point(arg, "--init")?;
            Ok(InitialLaw::Point(table.phase_point(p.s, p.theta)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands() {
        assert_eq!(table_spec("circle:1").unwrap(), TableSpec::circle(1.0));
        assert_eq!(table_spec("ellipse:2,1").unwrap(), TableSpec::ellipse(2.0, 1.0));
        assert_eq!(table_spec("superellipse:1,1,4").unwrap(), TableSpec::superellipse(1.0, 1.0, 4.0));
        for bad in ["circle:1,2", "ellipse:2", "torus:1", "circle:x"] {
            assert!(table_spec(bad).unwrap_err().is::<UsageError>(), "{bad}");
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = TableSpec::superellipse(1.0, 2.0, 6.0).with_resolution(512);
        let v = spec_json(&spec);
        let back: TableJson = serde_json::from_value(v).unwrap();
        assert_eq!(back.into_spec(), spec);
    }

    #[test]
    fn points_and_grids() {
        assert_eq!(point("0, 1.5", "--x").unwrap(), PhasePoint::new(0.0, 1.5));
        assert!(point("0,4", "--x").is_err());
        assert!(point("0", "--x").is_err());
        assert_eq!(points("0,1;2,0.5;", "--p").unwrap().len(), 2);
        assert_eq!(grid("16,8", "--g").unwrap(), (16, 8));
        assert!(grid("1,8", "--g").is_err());
        assert!(grid("16", "--g").is_err());
    }

    #[test]
    fn kernels() {
        assert!(matches!(kernel("example2", 0.3).unwrap().family(), KernelFamily::Example2));
        assert!(kernel("example1", 2.0).unwrap_err().is::<UsageError>());
        assert!(kernel("gaussian", 0.3).unwrap_err().is::<UsageError>());
    }
}
