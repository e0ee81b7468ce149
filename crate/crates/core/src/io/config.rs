//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::{InitialData, StepperConfig};
use crate::equilibrium::StationaryOptions;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{Kernel, KernelFamily, KernelParams};
use crate::potential::PotentialParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub edge_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSection {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSection {
    pub alpha_bar: f64,
    pub alpha0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialMode {
    Constant,
    Tanh,
    Snapshot,
}

impl InitialMode {
    fn name(&self) -> &'static str {
        match self {
            InitialMode::Constant => "constant",
            InitialMode::Tanh => "tanh",
            InitialMode::Snapshot => "snapshot",
        }
    }
}

impl FromStr for InitialMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "constant" => Ok(InitialMode::Constant),
            "tanh" => Ok(InitialMode::Tanh),
            "snapshot" => Ok(InitialMode::Snapshot),
            other => Err(format!("unknown mode `{other}` (constant, tanh, snapshot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSection {
    pub mode: InitialMode,
    pub m: f64,
    pub noise_amplitude: f64,
    pub seed: u64,
    pub delta0: f64,
    /// Tanh profile amplitude and interface width.
    pub amplitude: f64,
    pub width: f64,
    pub snapshot: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            mode: InitialMode::Constant,
            m: 0.0,
            noise_amplitude: 0.05,
            seed: 42,
            delta0: 0.05,
            amplitude: 0.5,
            width: 0.2,
            snapshot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_stride: usize,
    pub csv_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            snapshot_stride: 0,
            csv_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSection {
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeGiorgiSection {
    pub delta: f64,
    pub n_max: usize,
    /// Window length `τ_w`; the measurement covers `[T − 3τ_w, T]`. When
    /// unset the whole stored trajectory is used.
    pub window: Option<f64>,
}

impl Default for DeGiorgiSection {
    fn default() -> Self {
        Self {
            delta: 0.05,
            n_max: 20,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub kernel: KernelSection,
    pub potential: PotentialSection,
    pub initial: InitialSection,
    pub stepper: StepperConfig,
    pub output: OutputSection,
    pub run: RunSection,
    pub degiorgi: DeGiorgiSection,
    pub equilibrium: StationaryOptions,
}

struct Entry {
    line: usize,
    value: String,
}

struct Table(BTreeMap<String, Entry>);

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line,
                reason: format!("expected `section.key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let well_formed = key.split_once('.').is_some_and(|(s, k)| {
                let ident = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                ident(s) && ident(k)
            });
            if !well_formed {
                return Err(Error::ConfigSyntax {
                    line,
                    reason: format!("malformed key `{key}` (expected `section.key`)"),
                });
            }
            if value.is_empty() {
                return Err(Error::ConfigSyntax {
                    line,
                    reason: format!("missing value for `{key}`"),
                });
            }
            let entry = Entry {
                line,
                value: value.to_string(),
            };
            if let Some(prev) = map.insert(key.to_string(), entry) {
                return Err(Error::ConfigSyntax {
                    line,
                    reason: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
        }
        Ok(Table(map))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.0.remove(key) {
            None => Ok(None),
            Some(entry) => entry.value.parse().map(Some).map_err(|e: T::Err| Error::ConfigValue {
                key: key.to_string(),
                reason: format!("cannot parse `{}`: {e}", entry.value),
            }),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.take(key)?.ok_or_else(|| Error::ConfigValue {
            key: key.to_string(),
            reason: "required key missing".into(),
        })
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn reject_leftovers(self) -> Result<()> {
        match self.0.into_iter().next() {
            None => Ok(()),
            Some((key, entry)) => Err(Error::ConfigValue {
                key,
                reason: format!("unknown key (line {})", entry.line),
            }),
        }
    }
}

/// Re-labels a module validation error with the config key it came from.
fn keyed(section: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => Error::ConfigValue {
            key: if name.contains('.') {
                name.to_string()
            } else {
                format!("{section}.{name}")
            },
            reason,
        },
        Error::InvalidGrid(reason) => Error::ConfigValue {
            key: section.to_string(),
            reason,
        },
        other => other,
    }
}

fn value_error(key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut t = Table::parse(text)?;
    let d_init = InitialSection::default();
    let d_step = StepperConfig::default();
    let d_out = OutputSection::default();
    let d_dg = DeGiorgiSection::default();
    let d_eq = StationaryOptions::default();

    let config = RunConfig {
        grid: GridSection {
            dim: t.required("grid.dim")?,
            n: t.required("grid.n")?,
            edge_length: t.required("grid.edge_length")?,
        },
        kernel: KernelSection {
            family: t.required("kernel.family")?,
            amplitude: t.required("kernel.amplitude")?,
            width: t.required("kernel.width")?,
        },
        potential: PotentialSection {
            alpha_bar: t.required("potential.alpha_bar")?,
            alpha0: t.required("potential.alpha0")?,
        },
        initial: InitialSection {
            mode: t.or("initial.mode", d_init.mode)?,
            m: t.or("initial.m", d_init.m)?,
            noise_amplitude: t.or("initial.noise_amplitude", d_init.noise_amplitude)?,
            seed: t.or("initial.seed", d_init.seed)?,
            delta0: t.or("initial.delta0", d_init.delta0)?,
            amplitude: t.or("initial.amplitude", d_init.amplitude)?,
            width: t.or("initial.width", d_init.width)?,
            snapshot: t.take("initial.snapshot")?,
        },
        stepper: StepperConfig {
            dt: t.or("stepper.dt", d_step.dt)?,
            dt_min: t.or("stepper.dt_min", d_step.dt_min)?,
            inner_tol: t.or("stepper.inner_tol", d_step.inner_tol)?,
            inner_max_iters: t.or("stepper.inner_max_iters", d_step.inner_max_iters)?,
            epsilon_safe: t.or("stepper.epsilon_safe", d_step.epsilon_safe)?,
        },
        output: OutputSection {
            directory: t.or("output.directory", d_out.directory)?,
            snapshot_stride: t.or("output.snapshot_stride", d_out.snapshot_stride)?,
            csv_stride: t.or("output.csv_stride", d_out.csv_stride)?,
        },
        run: RunSection {
            t_end: t.required("run.t_end")?,
        },
        degiorgi: DeGiorgiSection {
            delta: t.or("degiorgi.delta", d_dg.delta)?,
            n_max: t.or("degiorgi.n_max", d_dg.n_max)?,
            window: t.take("degiorgi.window")?,
        },
        equilibrium: StationaryOptions {
            tol: t.or("equilibrium.tol", d_eq.tol)?,
            max_iters: t.or("equilibrium.max_iters", d_eq.max_iters)?,
            omega: t.or("equilibrium.omega", d_eq.omega)?,
        },
    };
    t.reject_leftovers()?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Cross-field checks of every section.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        KernelParams {
            amplitude: self.kernel.amplitude,
            width: self.kernel.width,
        }
        .validate(self.kernel.family, &grid)
        .map_err(|e| keyed("kernel", e))?;
        self.potential()?;

        let init = &self.initial;
        let probe = match init.mode {
            InitialMode::Constant => InitialData::Constant {
                m: init.m,
                noise_amplitude: init.noise_amplitude,
                seed: init.seed,
            },
            InitialMode::Tanh => InitialData::Tanh {
                m: init.m,
                amplitude: init.amplitude,
                width: init.width,
            },
            InitialMode::Snapshot => {
                if init.snapshot.is_none() {
                    return Err(value_error("initial.snapshot", "required when initial.mode = snapshot"));
                }
                if !(init.delta0 > 0.0 && init.delta0 < 1.0) {
                    return Err(value_error("initial.delta0", format!("{} not in (0, 1)", init.delta0)));
                }
                if !(init.m.abs() < 1.0) {
                    return Err(value_error("initial.m", format!("pure phase mean {}", init.m)));
                }
                InitialData::Snapshot(crate::grid::Field::zeros(grid))
            }
        };
        probe.validate(init.delta0).map_err(|e| keyed("initial", e))?;

        self.stepper.validate().map_err(|e| keyed("stepper", e))?;
        if self.output.csv_stride == 0 {
            return Err(value_error("output.csv_stride", "must be at least 1"));
        }
        if !(self.run.t_end.is_finite() && self.run.t_end > 0.0) {
            return Err(value_error("run.t_end", format!("{} must be positive", self.run.t_end)));
        }
        let dg = &self.degiorgi;
        if !(dg.delta > 0.0 && dg.delta < 0.25) {
            return Err(value_error("degiorgi.delta", format!("{} not in (0, 1/4)", dg.delta)));
        }
        if dg.n_max == 0 {
            return Err(value_error("degiorgi.n_max", "must be at least 1"));
        }
        if let Some(w) = dg.window {
            if !(w.is_finite() && w > 0.0) {
                return Err(value_error("degiorgi.window", format!("{w} must be positive")));
            }
        }
        let eq = &self.equilibrium;
        if !(eq.tol > 0.0) {
            return Err(value_error("equilibrium.tol", "must be positive"));
        }
        if eq.max_iters == 0 {
            return Err(value_error("equilibrium.max_iters", "must be at least 1"));
        }
        if !(eq.omega > 0.0 && eq.omega <= 1.0) {
            return Err(value_error("equilibrium.omega", format!("{} not in (0, 1]", eq.omega)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.edge_length).map_err(|e| keyed("grid", e))
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let params = KernelParams {
            amplitude: self.kernel.amplitude,
            width: self.kernel.width,
        };
        Kernel::build(self.kernel.family, params, self.grid()?).map_err(|e| keyed("kernel", e))
    }

    pub fn potential(&self) -> Result<PotentialParams> {
        PotentialParams::new(self.potential.alpha_bar, self.potential.alpha0).map_err(|e| keyed("potential", e))
    }

    /// Builds the initial data, reading the snapshot file in snapshot mode.
    pub fn initial_data(&self) -> Result<InitialData> {
        let init = &self.initial;
        Ok(match init.mode {
            InitialMode::Constant => InitialData::Constant {
                m: init.m,
                noise_amplitude: init.noise_amplitude,
                seed: init.seed,
            },
            InitialMode::Tanh => InitialData::Tanh {
                m: init.m,
                amplitude: init.amplitude,
                width: init.width,
            },
            InitialMode::Snapshot => {
                let path = init
                    .snapshot
                    .as_ref()
                    .ok_or_else(|| value_error("initial.snapshot", "missing"))?;
                let (field, _) = super::snapshot::read_snapshot_on(path, &self.grid()?)?;
                InitialData::Snapshot(field)
            }
        })
    }

    /// Canonical text form; `parse_config(&c.serialize())` returns `c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("grid.dim", self.grid.dim.to_string());
        put("grid.n", self.grid.n.to_string());
        put("grid.edge_length", format!("{:?}", self.grid.edge_length));
        put("kernel.family", self.kernel.family.to_string());
        put("kernel.amplitude", format!("{:?}", self.kernel.amplitude));
        put("kernel.width", format!("{:?}", self.kernel.width));
        put("potential.alpha_bar", format!("{:?}", self.potential.alpha_bar));
        put("potential.alpha0", format!("{:?}", self.potential.alpha0));
        put("initial.mode", self.initial.mode.name().to_string());
        put("initial.m", format!("{:?}", self.initial.m));
        put("initial.noise_amplitude", format!("{:?}", self.initial.noise_amplitude));
        put("initial.seed", self.initial.seed.to_string());
        put("initial.delta0", format!("{:?}", self.initial.delta0));
        put("initial.amplitude", format!("{:?}", self.initial.amplitude));
        put("initial.width", format!("{:?}", self.initial.width));
        if let Some(p) = &self.initial.snapshot {
            put("initial.snapshot", p.display().to_string());
        }
        put("stepper.dt", format!("{:?}", self.stepper.dt));
        put("stepper.dt_min", format!("{:?}", self.stepper.dt_min));
        put("stepper.inner_tol", format!("{:?}", self.stepper.inner_tol));
        put("stepper.inner_max_iters", self.stepper.inner_max_iters.to_string());
        put("stepper.epsilon_safe", format!("{:?}", self.stepper.epsilon_safe));
        put("output.directory", self.output.directory.display().to_string());
        put("output.snapshot_stride", self.output.snapshot_stride.to_string());
        put("output.csv_stride", self.output.csv_stride.to_string());
        put("run.t_end", format!("{:?}", self.run.t_end));
        put("degiorgi.delta", format!("{:?}", self.degiorgi.delta));
        put("degiorgi.n_max", self.degiorgi.n_max.to_string());
        if let Some(w) = self.degiorgi.window {
            put("degiorgi.window", format!("{w:?}"));
        }
        put("equilibrium.tol", format!("{:?}", self.equilibrium.tol));
        put("equilibrium.max_iters", self.equilibrium.max_iters.to_string());
        put("equilibrium.omega", format!("{:?}", self.equilibrium.omega));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# smallest accepted file
grid.dim = 1
grid.n = 64
grid.edge_length = 1.0
kernel.family = gaussian
kernel.amplitude = 20.0
kernel.width = 0.05
potential.alpha_bar = 1.0
potential.alpha0 = 2.0   # inline comment
run.t_end = 0.5
";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(
            c.grid,
            GridSection {
                dim: 1,
                n: 64,
                edge_length: 1.0
            }
        );
        assert_eq!(c.initial, InitialSection::default());
        assert_eq!(c.stepper, StepperConfig::default());
        assert_eq!(c.output, OutputSection::default());
        assert_eq!(c.degiorgi, DeGiorgiSection::default());
        assert_eq!(c.equilibrium, StationaryOptions::default());
        assert_eq!(c.run.t_end, 0.5);
    }

    #[test]
    fn round_trip_is_fixed_point() {
        let text = format!(
            "{MINIMAL}initial.mode = tanh\ninitial.m = 0.1\nstepper.dt = 0.000123456789\ndegiorgi.window = 0.3\n\
             initial.snapshot = snaps/s.bin\n"
        );
        let c = parse_config(&text).unwrap();
        let once = c.serialize();
        let again = parse_config(&once).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.serialize(), once);
    }

    #[test]
    fn pure_phase_mean_rejected() {
        let err = parse_config(&format!("{MINIMAL}initial.m = 1.0\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("initial.m") && msg.contains("pure phase mean"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config(&format!("{MINIMAL}this is not a pair\n")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 11, .. }), "{err}");
        let err = parse_config(&format!("{MINIMAL}grid.n = 32\n")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 11, .. }), "{err}");
        let err = parse_config(&format!("{MINIMAL}novalue.x =\n")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 11, .. }), "{err}");
        let err = parse_config("dim = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn value_errors_name_the_key() {
        let cases = [
            ("grid.colour = red\n", "grid.colour"),
            ("stepper.epsilon_safe = 0.1\n", "stepper.epsilon_safe"),
            ("degiorgi.delta = 0.3\n", "degiorgi.delta"),
            ("initial.noise_amplitude = 0.99\n", "initial.noise_amplitude"),
            ("initial.mode = snapshot\n", "initial.snapshot"),
            ("equilibrium.omega = 1.5\n", "equilibrium.omega"),
        ];
        for (extra, key) in cases {
            match parse_config(&format!("{MINIMAL}{extra}")).unwrap_err() {
                Error::ConfigValue { key: k, .. } => assert_eq!(k, key, "{extra}"),
                other => panic!("{extra}: {other}"),
            }
        }
        let missing = MINIMAL.replace("run.t_end = 0.5\n", "");
        assert!(matches!(parse_config(&missing), Err(Error::ConfigValue { key, .. }) if key == "run.t_end"));
        let word = MINIMAL.replace("kernel.width = 0.05", "kernel.width = wide");
        assert!(matches!(parse_config(&word), Err(Error::ConfigValue { key, .. }) if key == "kernel.width"));
        let wide = MINIMAL.replace("kernel.width = 0.05", "kernel.width = 0.5");
        assert!(matches!(parse_config(&wide), Err(Error::ConfigValue { key, .. }) if key == "kernel.width"));
        let bad_grid = MINIMAL.replace("grid.n = 64", "grid.n = 60");
        assert!(matches!(parse_config(&bad_grid), Err(Error::ConfigValue { key, .. }) if key == "grid"));
        let bad_pot = MINIMAL.replace("potential.alpha0 = 2.0", "potential.alpha0 = 0.5");
        assert!(matches!(parse_config(&bad_pot), Err(Error::ConfigValue { key, .. }) if key == "potential.alpha0"));
    }
}
