//! Flat `key = value` run configuration with dotted sections.
//!
//! ```text
//! # comment
//! model.kind = l2            # l2 | h1 | bv
//! model.gamma_f = 1.0
//! model.gamma_w = 1.0
//! kernel.sigma_e = 0.5
//! kernel.sigma_t = 1.0
//! kernel.sigma_f = 1.0
//! descent.max_iters = 500
//! gamma.levels = 0.4, 0.2, 0.1, 0.05
//! source.surface = sphere_cap
//! source.max_polar = 1.0
//! source.signal = sin(3*u)*cos(2*v)
//! target.surface = sphere_cap
//! target.tx = 0.1
//! output.dir = out
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::expr::Expr;
use crate::matching::{DescentConfig, EnergyModel, Penalty};
use crate::surface::{builtin_surface, AnalyticSurface, OracleOptions};
use crate::varifold::KernelParams;

/// A named builtin surface with its parameters and an optional signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub signal: Option<Expr>,
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<AnalyticSurface> {
        builtin_surface(&self.name, &self.params)
    }

    /// The signal expression, or the constant zero.
    pub fn signal_or_zero(&self) -> Expr {
        self.signal.clone().unwrap_or_else(|| Expr::parse("0").expect("valid literal"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: EnergyModel,
    pub descent: DescentConfig,
    pub levels: Vec<f64>,
    pub lift_cells: usize,
    pub lift_order: usize,
    pub oracle: OracleOptions,
    pub source: Option<SurfaceSpec>,
    pub target: Option<SurfaceSpec>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.take(key) {
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("line {line}: {key} must be a finite number, got '{v}'"))),
            None => default.ok_or_else(|| Error::Config(format!("missing required field {key}"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::Config(format!("line {line}: {key} must be a nonnegative integer, got '{v}'"))),
            None => Ok(default),
        }
    }

    fn surface(&mut self, section: &str) -> Result<Option<SurfaceSpec>> {
        let prefix = format!("{section}.");
        let keys: Vec<String> = self.map.keys().filter(|k| k.starts_with(&prefix)).cloned().collect();
        if keys.is_empty() {
            return Ok(None);
        }
        let (_, name) = self
            .take(&format!("{section}.surface"))
            .ok_or_else(|| Error::Config(format!("missing required field {section}.surface")))?;
        let signal = match self.take(&format!("{section}.signal")) {
            Some((line, text)) => Some(
                Expr::parse(&text).map_err(|e| Error::Config(format!("line {line}: {section}.signal: {e}")))?,
            ),
            None => None,
        };
        let mut params = BTreeMap::new();
        for key in keys {
            if let Some((line, v)) = self.take(&key) {
                let param = key[prefix.len()..].to_string();
                let value = v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Config(format!("line {line}: {key} must be a finite number, got '{v}'"))
                })?;
                params.insert(param, value);
            }
        }
        let spec = SurfaceSpec { name, params, signal };
        spec.build().map_err(|e| Error::Config(format!("{section}: {e}")))?;
        Ok(Some(spec))
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::parse(&text)?;
        // Relative output directories are resolved against the config file.
        if let (Some(dir), Some(parent)) = (&config.output_dir, path.parent()) {
            if dir.is_relative() {
                config.output_dir = Some(parent.join(dir));
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value', found '{content}'")))?;
            let key = key.trim().to_string();
            if key.is_empty() || key.split('.').count() > 2 {
                return Err(Error::Config(format!("line {line}: invalid key '{key}'")));
            }
            if map.insert(key.clone(), (line, value.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {line}: duplicate key {key}")));
            }
        }
        let mut e = Entries { map };

        let kernel = KernelParams {
            sigma_e: e.f64("kernel.sigma_e", None)?,
            sigma_t: e.f64("kernel.sigma_t", None)?,
            sigma_f: e.f64("kernel.sigma_f", None)?,
        };
        kernel.validate().map_err(|err| Error::Config(err.to_string()))?;
        let (kind_line, kind) = e
            .take("model.kind")
            .ok_or_else(|| Error::Config("missing required field model.kind".into()))?;
        let gamma_w = e.f64("model.gamma_w", None)?;
        let penalty = match kind.as_str() {
            "l2" => Penalty::L2 {
                gamma_f: e.f64("model.gamma_f", None)?,
                gamma_w,
            },
            "h1" => Penalty::H1 {
                alpha: e.f64("model.alpha", None)?,
                beta: e.f64("model.beta", None)?,
                gamma_w,
            },
            "bv" => Penalty::Bv {
                alpha: e.f64("model.alpha", None)?,
                beta: e.f64("model.beta", None)?,
                gamma_w,
                epsilon: e.f64("model.epsilon", Some(1e-3))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "line {kind_line}: model.kind must be l2, h1 or bv, got '{other}'"
                )))
            }
        };
        let model = EnergyModel { penalty, kernel };
        model.validate().map_err(|err| match err {
            Error::NonsmoothEnergy => Error::Config("model.epsilon must be positive for the bv model".into()),
            other => Error::Config(other.to_string()),
        })?;

        let d = DescentConfig::default();
        let descent = DescentConfig {
            max_iters: e.usize("descent.max_iters", d.max_iters)?,
            grad_tol: e.f64("descent.grad_tol", Some(d.grad_tol))?,
            initial_step: e.f64("descent.initial_step", Some(d.initial_step))?,
            shrink: e.f64("descent.shrink", Some(d.shrink))?,
            grow: e.f64("descent.grow", Some(d.grow))?,
            armijo: e.f64("descent.armijo", Some(d.armijo))?,
            min_step: e.f64("descent.min_step", Some(d.min_step))?,
        };
        descent.validate().map_err(|err| Error::Config(err.to_string()))?;

        let levels = match e.take("gamma.levels") {
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|h| *h > 0.0 && h.is_finite())
                        .ok_or_else(|| Error::Config(format!("line {line}: gamma.levels entry '{}' is not a positive number", s.trim())))
                })
                .collect::<Result<Vec<f64>>>()?,
            None => vec![0.4, 0.2, 0.1, 0.05],
        };
        if levels.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("gamma.levels must be strictly decreasing".into()));
        }
        let lift_cells = e.usize("gamma.lift_cells", 24)?;
        let lift_order = e.usize("gamma.lift_order", 4)?;
        if lift_cells == 0 || lift_order == 0 {
            return Err(Error::Config("gamma.lift_cells and gamma.lift_order must be positive".into()));
        }
        let od = OracleOptions::default();
        let oracle = OracleOptions {
            initial_order: e.usize("oracle.initial_order", od.initial_order)?,
            tolerance: e.f64("oracle.tolerance", Some(od.tolerance))?,
            max_order: e.usize("oracle.max_order", od.max_order)?,
        };
        if oracle.initial_order < 4 {
            return Err(Error::Config("oracle.initial_order must be at least 4".into()));
        }

        let source = e.surface("source")?;
        let target = e.surface("target")?;
        let output_dir = e.take("output.dir").map(|(_, v)| PathBuf::from(v));
        let seed = match e.take("seed") {
            Some((line, v)) => v
                .parse()
                .map_err(|_| Error::Config(format!("line {line}: seed must be a nonnegative integer, got '{v}'")))?,
            None => 0,
        };
        if let Some((key, (line, _))) = e.map.iter().next() {
            return Err(Error::Config(format!("line {line}: unknown field {key}")));
        }
        Ok(RunConfig {
            model,
            descent,
            levels,
            lift_cells,
            lift_order,
            oracle,
            source,
            target,
            output_dir,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "kernel.sigma_e = 0.5\nkernel.sigma_t = 1\nkernel.sigma_f = 1\nmodel.kind = l2\nmodel.gamma_f = 1\nmodel.gamma_w = 2\n";

    #[test]
    fn minimal_config() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.model.penalty, Penalty::L2 { gamma_f: 1.0, gamma_w: 2.0 });
        assert_eq!(c.levels, vec![0.4, 0.2, 0.1, 0.05]);
        assert!(c.source.is_none());
    }

    #[test]
    fn surfaces_and_levels() {
        let text = format!(
            "{BASE}gamma.levels = 0.3, 0.15\nsource.surface = sphere_cap\nsource.max_polar = 1.0 # radians\nsource.signal = sin(3*u)\ntarget.surface = monge_patch\ntarget.a = 0.5\nseed = 9\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.levels, vec![0.3, 0.15]);
        let s = c.source.unwrap();
        assert_eq!(s.params["max_polar"], 1.0);
        assert_eq!(s.signal.unwrap().source(), "sin(3*u)");
        assert_eq!(c.target.unwrap().params["a"], 0.5);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("kernel.sigma_e = -1\n", "sigma_e"),
            ("model.gamma_w = x\n", "model.gamma_w"),
            ("model.color = 3\n", "model.color"),
            ("source.radius = 2\n", "source.surface"),
            ("source.surface = sphere_cap\nsource.radius = -2\n", "source"),
            ("gamma.levels = 0.1, 0.2\n", "gamma.levels"),
            ("descent.shrink = 2\n", "descent.shrink"),
        ];
        for (extra, field) in cases {
            let text = format!("{BASE}{extra}").replace("kernel.sigma_e = 0.5\n", if extra.starts_with("kernel.sigma_e") { "" } else { "kernel.sigma_e = 0.5\n" });
            let msg = RunConfig::parse(&text).unwrap_err().to_string();
            assert!(msg.contains(field), "{msg} should mention {field}");
        }
        let msg = RunConfig::parse("model.kind = l2\n").unwrap_err().to_string();
        assert!(msg.contains("kernel.sigma_e"));
    }

    #[test]
    fn bv_needs_positive_epsilon() {
        let text = BASE.replace("model.kind = l2\nmodel.gamma_f = 1\n", "model.kind = bv\nmodel.alpha = 1\nmodel.beta = 1\nmodel.epsilon = 0\n");
        let msg = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("model.epsilon"));
    }
}
