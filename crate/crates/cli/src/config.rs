//! Flat `section.key = value` run configuration.
//!
//! Lines are trimmed, `#` starts a comment, blank lines are skipped. Every key
//! is validated before anything is computed and unknown keys are rejected.
//! Several files may be layered; later files override earlier keys.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use grwflow_core::fiber::FiberKind;
use grwflow_core::flow::{FlowConfig, Integrator};
use grwflow_core::verify::{DEFAULT_DELTA, DEFAULT_MARKERS};
use grwflow_core::warping::Family;
use grwflow_core::{FiberGrid, WarpingFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const KNOWN_KEYS: &[&str] = &[
    "warping.family",
    "warping.a",
    "warping.b",
    "warping.params",
    "fiber.kind",
    "fiber.resolution",
    "fiber.side_lengths",
    "flow.integrator",
    "flow.cfl",
    "flow.t_max",
    "flow.tol_osc",
    "flow.tol_speed",
    "flow.eps_v",
    "flow.record_every",
    "iso.tol",
    "verify.strict",
    "verify.markers",
    "verify.delta",
    "verify.resolutions",
    "verify.corrupt_stencil",
    "initial.slice",
    "initial.modes",
    "initial.profile",
    "initial.random_modes",
    "initial.random_amplitude",
    "output.dir",
    "run.seed",
    "profile.samples",
];

/// Raw key/value pairs, remembering where each came from.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
    base_dir: Option<PathBuf>,
}

impl RawConfig {
    #[cfg(test)]
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        raw.merge_text(text, origin)?;
        Ok(raw)
    }

    pub fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut raw = RawConfig::default();
        for path in paths {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            raw.merge_text(&text, &path.display().to_string())?;
            raw.base_dir = path.parent().map(Path::to_path_buf);
        }
        Ok(raw)
    }

    fn merge_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `section.key = value`", lineno + 1))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                bail!("{origin}:{}: unknown key `{key}`", lineno + 1);
            }
            self.entries
                .insert(key.to_string(), (value.trim().to_string(), format!("{origin}:{}", lineno + 1)));
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&(String, String)> {
        self.entries.get(key)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, at)) => v.parse::<T>().map(Some).map_err(|e| anyhow!("{at}: invalid value for `{key}`: {e}")),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, at)) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| anyhow!("{at}: invalid entry `{s}` in `{key}`: {e}")))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// One Fourier-type mode of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    pub kind: ModeKind,
    pub amplitude: f64,
    pub k: [i64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Sin,
    Cos,
    SinSin,
    SinCos,
    CosSin,
    CosCos,
}

impl std::str::FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "sin" => ModeKind::Sin,
            "cos" => ModeKind::Cos,
            "sinsin" => ModeKind::SinSin,
            "sincos" => ModeKind::SinCos,
            "cossin" => ModeKind::CosSin,
            "coscos" => ModeKind::CosCos,
            other => return Err(format!("unknown mode kind `{other}`")),
        })
    }
}

impl Mode {
    /// `kind:amplitude:k1[:k2]`
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("mode `{s}` must look like kind:amplitude:k1[:k2]"));
        }
        let kind = parts[0].parse()?;
        let amplitude = parts[1].parse::<f64>().map_err(|e| format!("mode `{s}`: {e}"))?;
        let k1 = parts[2].parse::<i64>().map_err(|e| format!("mode `{s}`: {e}"))?;
        let k2 = match parts.get(3) {
            Some(p) => p.parse::<i64>().map_err(|e| format!("mode `{s}`: {e}"))?,
            None => 0,
        };
        if !amplitude.is_finite() {
            return Err(format!("mode `{s}`: amplitude must be finite"));
        }
        Ok(Mode { kind, amplitude, k: [k1, k2] })
    }

    fn eval(&self, phase: [f64; 2]) -> f64 {
        let (a, b) = (self.k[0] as f64 * phase[0], self.k[1] as f64 * phase[1]);
        self.amplitude
            * match self.kind {
                ModeKind::Sin => (a + b).sin(),
                ModeKind::Cos => (a + b).cos(),
                ModeKind::SinSin => a.sin() * b.sin(),
                ModeKind::SinCos => a.sin() * b.cos(),
                ModeKind::CosSin => a.cos() * b.sin(),
                ModeKind::CosCos => a.cos() * b.cos(),
            }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialData {
    Modes { slice: f64, modes: Vec<Mode> },
    Profile { path: PathBuf },
}

#[derive(Debug, Clone, Serialize)]
pub struct WarpingSpec {
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberSpec {
    pub kind: FiberKind,
    pub resolution: [usize; 2],
    pub side_lengths: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySpec {
    pub strict: bool,
    pub markers: usize,
    pub delta: f64,
    pub resolutions: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt_stencil: Option<f64>,
}

/// A fully validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub warping: WarpingSpec,
    pub fiber: FiberSpec,
    pub flow: FlowConfig,
    pub iso_tol: f64,
    pub verify: VerifySpec,
    pub initial: InitialData,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub profile_samples: usize,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let family: Family = raw.parsed("warping.family")?.unwrap_or(Family::Gaussian);
        if family == Family::Custom {
            bail!("warping.family = custom is only available through the library API");
        }
        let a = raw.parsed("warping.a")?.unwrap_or(-1.0);
        let b = raw.parsed("warping.b")?.unwrap_or(2.0);
        let params: Vec<f64> = raw.list("warping.params")?.unwrap_or_default();
        WarpingFactor::new(family, a, b, &params).context("invalid warping section")?;

        let kind: FiberKind = raw.parsed("fiber.kind")?.unwrap_or(FiberKind::Torus2);
        let res: Vec<usize> = raw.list("fiber.resolution")?.unwrap_or_else(|| vec![64]);
        let resolution = match (kind, res.as_slice()) {
            (FiberKind::Torus2, [n]) => [*n, *n],
            (FiberKind::Torus2, [n1, n2]) => [*n1, *n2],
            (_, [n]) => [*n, 1],
            _ => bail!("fiber.resolution: expected one value (or two for torus2), got {res:?}"),
        };
        let sides: Vec<f64> = raw.list("fiber.side_lengths")?.unwrap_or_else(|| vec![2.0 * PI]);
        let side_lengths = match (kind, sides.as_slice()) {
            (FiberKind::Sphere2Axisym, _) if raw.get("fiber.side_lengths").is_some() => {
                bail!("fiber.side_lengths does not apply to sphere2_axisym")
            }
            (FiberKind::Torus2, [l]) => [*l, *l],
            (FiberKind::Torus2, [l1, l2]) => [*l1, *l2],
            (_, [l]) => [*l, 0.0],
            _ => bail!("fiber.side_lengths: expected one value (or two for torus2), got {sides:?}"),
        };

        let d = FlowConfig::default();
        let integrator: Integrator = raw.parsed("flow.integrator")?.unwrap_or(d.integrator);
        let flow = FlowConfig {
            integrator,
            cfl: raw.parsed("flow.cfl")?.unwrap_or(d.cfl),
            t_max: raw.parsed("flow.t_max")?.unwrap_or(d.t_max),
            tol_osc: raw.parsed("flow.tol_osc")?.unwrap_or(d.tol_osc),
            tol_speed: raw.parsed("flow.tol_speed")?.unwrap_or(d.tol_speed),
            eps_v: raw.parsed("flow.eps_v")?.unwrap_or(d.eps_v),
            record_every: raw.parsed("flow.record_every")?.unwrap_or(d.record_every),
            max_halvings: d.max_halvings,
        };
        flow.validate().context("invalid flow section")?;

        let iso_tol: f64 = raw.parsed("iso.tol")?.unwrap_or(grwflow_core::isoperimetric::DEFAULT_TOL);
        if !(iso_tol >= 0.0) {
            bail!("iso.tol must be nonnegative");
        }

        let verify = VerifySpec {
            strict: raw.parsed("verify.strict")?.unwrap_or(false),
            markers: raw.parsed("verify.markers")?.unwrap_or(DEFAULT_MARKERS),
            delta: raw.parsed("verify.delta")?.unwrap_or(DEFAULT_DELTA),
            resolutions: raw.list("verify.resolutions")?.unwrap_or_else(|| vec![32, 64, 128]),
            corrupt_stencil: raw.parsed("verify.corrupt_stencil")?,
        };
        if verify.markers == 0 || !(verify.delta > 0.0) || verify.resolutions.is_empty() {
            bail!("verify.markers and verify.delta must be positive and verify.resolutions nonempty");
        }

        let seed: u64 = raw.parsed("run.seed")?.unwrap_or(0);
        let initial = initial_data(raw, kind, a, b, seed)?;

        let profile_samples: usize = raw.parsed("profile.samples")?.unwrap_or(201);
        if profile_samples < 2 {
            bail!("profile.samples must be at least 2");
        }

        let cfg = RunConfig {
            warping: WarpingSpec { family, a, b, params },
            fiber: FiberSpec { kind, resolution, side_lengths },
            flow,
            iso_tol,
            verify,
            initial,
            output_dir: raw.get("output.dir").map(|(v, _)| PathBuf::from(v)),
            seed,
            profile_samples,
        };
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn warping(&self) -> WarpingFactor {
        WarpingFactor::new(self.warping.family, self.warping.a, self.warping.b, &self.warping.params)
            .expect("validated in from_raw")
    }

    pub fn grid(&self) -> Result<FiberGrid> {
        self.grid_at(self.fiber.resolution)
    }

    /// The configured fiber at another resolution.
    pub fn grid_at(&self, resolution: [usize; 2]) -> Result<FiberGrid> {
        let f = &self.fiber;
        let grid = match f.kind {
            FiberKind::Torus1 => FiberGrid::torus1(resolution[0], f.side_lengths[0]),
            FiberKind::Torus2 => FiberGrid::torus2(resolution[0], resolution[1], f.side_lengths[0], f.side_lengths[1]),
            FiberKind::Sphere2Axisym => FiberGrid::sphere2_axisym(resolution[0]),
        }
        .context("invalid fiber section")?;
        Ok(match self.verify.corrupt_stencil {
            Some(factor) => grid.with_corrupted_second_differences(factor),
            None => grid,
        })
    }

    /// Initial graph sampled on `grid`.
    pub fn initial_rho(&self, grid: &FiberGrid) -> Result<Vec<f64>> {
        match &self.initial {
            InitialData::Modes { slice, modes } => Ok(sample_modes(grid, *slice, modes)),
            InitialData::Profile { path } => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read initial profile {}", path.display()))?;
                let values = text
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().with_context(|| format!("invalid value `{s}` in {}", path.display())))
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() != grid.len() {
                    bail!("initial profile {} has {} values, grid has {} nodes", path.display(), values.len(), grid.len());
                }
                Ok(values)
            }
        }
    }
}

fn sample_modes(grid: &FiberGrid, slice: f64, modes: &[Mode]) -> Vec<f64> {
    let sides = grid.side_lengths();
    (0..grid.len())
        .map(|k| {
            let x = grid.coords(k);
            let phase = match grid.kind() {
                FiberKind::Sphere2Axisym => [x[0], 0.0],
                _ => [
                    2.0 * PI * x[0] / sides[0],
                    if sides[1] > 0.0 { 2.0 * PI * x[1] / sides[1] } else { 0.0 },
                ],
            };
            slice + modes.iter().map(|m| m.eval(phase)).sum::<f64>()
        })
        .collect()
}

fn initial_data(raw: &RawConfig, kind: FiberKind, a: f64, b: f64, seed: u64) -> Result<InitialData> {
    let has_modes = ["initial.slice", "initial.modes", "initial.random_modes", "initial.random_amplitude"]
        .iter()
        .any(|k| raw.get(k).is_some());
    if let Some((path, _)) = raw.get("initial.profile") {
        if has_modes {
            bail!("initial.profile cannot be combined with initial.slice or initial.*modes");
        }
        let path = PathBuf::from(path);
        let path = match (&raw.base_dir, path.is_relative()) {
            (Some(base), true) => base.join(path),
            _ => path,
        };
        return Ok(InitialData::Profile { path });
    }
    let slice: f64 = raw.parsed("initial.slice")?.unwrap_or(0.5 * (a + b));
    if !(slice >= a && slice < b) {
        bail!("initial.slice = {slice} lies outside [{a}, {b})");
    }
    let mut modes = match raw.get("initial.modes") {
        None => Vec::new(),
        Some((v, at)) => v
            .split_whitespace()
            .map(|s| Mode::parse(s).map_err(|e| anyhow!("{at}: {e}")))
            .collect::<Result<Vec<Mode>>>()?,
    };
    let random: usize = raw.parsed("initial.random_modes")?.unwrap_or(0);
    let amp: f64 = raw.parsed("initial.random_amplitude")?.unwrap_or(0.05);
    if random > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        modes.extend((0..random).map(|_| random_mode(&mut rng, kind, amp)));
    }
    for m in &modes {
        let sphere_ok = matches!(m.kind, ModeKind::Cos) && m.k[1] == 0;
        if kind == FiberKind::Sphere2Axisym && !sphere_ok {
            bail!("sphere2_axisym only accepts cos:amplitude:l modes (cos(l theta) is smooth at the poles)");
        }
        let two_d = matches!(m.kind, ModeKind::SinSin | ModeKind::SinCos | ModeKind::CosSin | ModeKind::CosCos);
        if kind == FiberKind::Torus1 && (two_d || m.k[1] != 0) {
            bail!("torus1 only accepts sin|cos:amplitude:k modes");
        }
    }
    Ok(InitialData::Modes { slice, modes })
}

fn random_mode(rng: &mut ChaCha8Rng, kind: FiberKind, amp: f64) -> Mode {
    let amplitude = amp * rng.gen_range(-1.0..1.0);
    match kind {
        FiberKind::Sphere2Axisym => Mode { kind: ModeKind::Cos, amplitude, k: [rng.gen_range(1..=4), 0] },
        FiberKind::Torus1 => {
            let kind = if rng.gen_bool(0.5) { ModeKind::Sin } else { ModeKind::Cos };
            Mode { kind, amplitude, k: [rng.gen_range(1..=3), 0] }
        }
        FiberKind::Torus2 => {
            let kinds = [ModeKind::SinSin, ModeKind::SinCos, ModeKind::CosSin, ModeKind::CosCos];
            Mode { kind: kinds[rng.gen_range(0..4)], amplitude, k: [rng.gen_range(1..=3), rng.gen_range(1..=3)] }
        }
    }
}
