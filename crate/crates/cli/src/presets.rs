//! Named scenarios, stored as TOML and overridable with dotted `key=value` pairs.

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "cylinder-case-a",
        summary: "unit cylinder, radial cross force, φ₀ = A cos s, z₀ = B sin s (A = 1, B = 0.5); converges to ((A−B)/2)e^{−is}",
        toml: r#"
output_dir = "runs/cylinder-case-a"
[model]
kind = "cylinder"
radius = 1.0
[force]
kind = "radial-cross"
[initial]
kind = "cylinder-case-a"
a = 1.0
b = 0.5
[flow]
nodes = 64
scheme = "spectral"
stepper = "rk4"
t_end = 5.0
record_every = 40
[monitors]
energy = true
oracle = true
residual = true
"#,
    },
    Preset {
        name: "cylinder-case-b",
        summary: "unit cylinder, radial cross force, φ₀ = s, z₀ = μ cos s (μ = 0.5); drifts vertically and never becomes a magnetic geodesic",
        toml: r#"
output_dir = "runs/cylinder-case-b"
[model]
kind = "cylinder"
radius = 1.0
[force]
kind = "radial-cross"
[initial]
kind = "cylinder-case-b"
mu = 0.5
[flow]
nodes = 64
scheme = "spectral"
stepper = "rk4"
t_end = 12.566370614359172
record_every = 100
[monitors]
energy = true
oracle = true
"#,
    },
    Preset {
        name: "flat-torus-3-constant-B",
        summary: "flat 3-torus, Z(v) = v × B with B = e_z, tilted ellipse",
        toml: r#"
output_dir = "runs/flat-torus-3-constant-B"
[model]
kind = "flat-torus"
dim = 3
[force]
kind = "constant-cross"
b = [0.0, 0.0, 1.0]
[initial]
kind = "fourier"
terms = [
  { component = 0, mode = 1, cos = 1.0 },
  { component = 1, mode = 1, sin = 0.5 },
  { component = 2, mode = 2, sin = 0.3 },
]
[flow]
nodes = 64
t_end = 3.0
record_every = 50
"#,
    },
    Preset {
        name: "flat-torus-2-rotation",
        summary: "flat 2-torus, Z = c·J with c = 1, ellipse (cos s, 0.5 sin s)",
        toml: r#"
output_dir = "runs/flat-torus-2-rotation"
[model]
kind = "flat-torus"
dim = 2
[force]
kind = "parallel-rotation"
c = 1.0
[initial]
kind = "fourier"
terms = [
  { component = 0, mode = 1, cos = 1.0 },
  { component = 1, mode = 1, sin = 0.5 },
]
[flow]
nodes = 64
t_end = 5.0
record_every = 50
"#,
    },
    Preset {
        name: "sphere-zero-force-geodesic",
        summary: "unit sphere, no force, a bent great circle flowing toward a geodesic",
        toml: r#"
output_dir = "runs/sphere-zero-force-geodesic"
[model]
kind = "sphere"
radius = 1.0
[force]
kind = "zero"
[initial]
kind = "fourier"
project = true
terms = [
  { component = 0, mode = 1, cos = 1.0 },
  { component = 1, mode = 1, sin = 1.0 },
  { component = 2, mode = 2, sin = 0.2 },
]
[flow]
nodes = 64
t_end = 2.0
record_every = 50
"#,
    },
    Preset {
        name: "blow-up-line",
        summary: "the line with Z_s(v) = −s·v, data s/T on [−L, L] with exact boundary values; blows up before T = 1",
        toml: r#"
experiment = "blow-up-line"
output_dir = "runs/blow-up-line"
[force]
kind = "linear-scalar"
[line]
blow_up_time = 1.0
half_width = 1.0
intervals = 64
dt_factor = 0.25
t_end = 2.0
stepper = "rk4"
record_every = 100
"#,
    },
    Preset {
        name: "stability-pair",
        summary: "two flat-torus rotation runs differing by a δ = 1e-3 mode (variant = initial), a force scale 1 + 1e-3 (force), or nothing (identical)",
        toml: r#"
experiment = "stability-pair"
output_dir = "runs/stability-pair"
seed = 7
[model]
kind = "flat-torus"
dim = 2
[force]
kind = "parallel-rotation"
c = 1.0
[initial]
kind = "fourier"
terms = [
  { component = 0, mode = 1, cos = 1.0 },
  { component = 1, mode = 1, sin = 0.5 },
]
[flow]
nodes = 64
t_end = 1.0
record_every = 10
[stability]
variant = "initial"
delta = 1e-3
force_scale = 1.001
mode = 2
window = [0.05, 1.0]
"#,
    },
];

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))
}

/// Parses `value` as a TOML value, falling back to a plain string.
fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key just written"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies `section.key=value` overrides to a TOML table.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), CliError> {
    for item in overrides {
        let (path, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(CliError::Config(format!("bad override key {path:?}")));
        }
        let mut cur = &mut *table;
        for k in &keys[..keys.len() - 1] {
            cur = cur
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("override path {path:?} crosses a non-table value")))?;
        }
        cur.insert(keys[keys.len() - 1].to_string(), parse_value(value.trim()));
    }
    Ok(())
}

/// The preset's configuration with overrides applied.
pub fn load(name: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let preset = find(name)?;
    let mut table: toml::Table = preset.toml.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    apply_overrides(&mut table, overrides)?;
    RunConfig::from_table(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_the_seven_scenarios() {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        assert_eq!(
            names,
            [
                "cylinder-case-a",
                "cylinder-case-b",
                "flat-torus-3-constant-B",
                "flat-torus-2-rotation",
                "sphere-zero-force-geodesic",
                "blow-up-line",
                "stability-pair"
            ]
        );
        for p in PRESETS {
            load(p.name, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn case_b_default_mu() {
        let cfg = load("cylinder-case-b", &[]).unwrap();
        assert_eq!(cfg.initial.unwrap().mu, Some(0.5));
    }

    #[test]
    fn overrides_apply_and_validate() {
        let cfg = load("cylinder-case-a", &["initial.b=0.25".into(), "flow.t_end=0".into()]).unwrap();
        assert_eq!(cfg.initial.unwrap().b, Some(0.25));
        assert_eq!(cfg.flow.t_end, 0.0);
        let cfg = load("stability-pair", &["stability.variant=force".into()]).unwrap();
        assert_eq!(cfg.stability.unwrap().variant, crate::config::StabilityVariant::Force);
        assert!(load("cylinder-case-a", &["flow.colour=1".into()]).is_err());
        assert!(load("cylinder-case-a", &["novalue".into()]).is_err());
        assert!(matches!(load("no-such-preset", &[]), Err(CliError::Config(_))));
    }
}
