//! Run configuration: defaults, file loading, flag overrides and hashing.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use snls_core::FilterProfile;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Datum {
    /// Unit soliton `Ψ₁`.
    Soliton,
    /// Zero field (no soliton sent).
    Null,
    /// `c √2 sech x` with `c = datum_scale`.
    Blowup,
    /// Soliton with a linear shift gadget, for shift rates.
    Gadget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_points: 1024, half_width: 20.0 * PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this configuration was resolved for.
    pub command: String,
    pub master_seed: u64,
    pub out_dir: String,
    /// Resolved per command when absent: 2 for `mc-blowup`, 1 otherwise.
    pub sigma: Option<f64>,
    pub lambda: f64,
    pub gamma: f64,
    /// Resolved per command when absent.
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub phi_norm: f64,
    pub eps: f64,
    pub eps_grid: Vec<f64>,
    pub window_l: f64,
    /// Blow-up level `R` for blow-up aware error estimates.
    pub level: Option<f64>,
    pub blowup_aware: bool,
    pub levels: Vec<f64>,
    /// Start `S` of the blow-up interval.
    pub s: f64,
    pub n_samples: usize,
    /// Resolved per command when absent.
    pub dt: Option<f64>,
    pub coarse_dt: f64,
    /// Resolved per command when absent: on for `mc-blowup`.
    pub adaptive: Option<bool>,
    pub output_every: usize,
    pub points: usize,
    pub mesh_n: usize,
    /// Resolved per command when absent: blow-up datum for `mc-blowup`,
    /// soliton otherwise.
    pub datum: Option<Datum>,
    pub datum_scale: f64,
    pub branch: u8,
    pub r_grid: Vec<f64>,
    /// Target shift for the gadget rate.
    pub y: f64,
    pub n_times: usize,
    /// Resolved per command when absent.
    pub grid: Option<GridConfig>,
    pub phi: FilterProfile,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            master_seed: 0,
            out_dir: "snls-out".into(),
            sigma: None,
            lambda: 1.0,
            gamma: 0.5,
            horizon: None,
            phi_norm: 1.0,
            eps: 1e-2,
            eps_grid: vec![5e-2, 2e-2, 1e-2],
            window_l: 10.0,
            level: None,
            blowup_aware: false,
            levels: vec![10.0, 50.0],
            s: 0.0,
            n_samples: 1000,
            dt: None,
            coarse_dt: 1e-2,
            adaptive: None,
            output_every: 10,
            points: 21,
            mesh_n: 256,
            datum: None,
            datum_scale: 1.2,
            branch: 2,
            r_grid: vec![0.5, 1.0, 2.0],
            y: 1.0,
            n_times: 201,
            grid: None,
            phi: FilterProfile::NearIdentity { k_max: 10.0, rolloff: 4.0 },
        }
    }
}

/// Flags that override the configuration file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub phi_norm: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub n_samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub datum: Option<Datum>,
    #[arg(long, global = true)]
    pub datum_scale: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true)]
    pub window_l: Option<f64>,
    #[arg(long, global = true)]
    pub level: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub blowup_aware: bool,
    #[arg(long = "S", global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub mesh_n: Option<usize>,
    #[arg(long, global = true)]
    pub branch: Option<u8>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub n_grid: Option<usize>,
    #[arg(long, global = true)]
    pub half_width: Option<f64>,
    #[arg(long, global = true)]
    pub y: Option<f64>,
    #[arg(long, global = true)]
    pub n_times: Option<usize>,
    /// Cut-off of the noise filter (`bandwidth` for the Gaussian profile).
    #[arg(long, global = true)]
    pub k_max: Option<f64>,
}

impl RunConfig {
    /// Reads a run configuration, or the `[config]` table of a manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut table: toml::Table = text.parse().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if table.contains_key("manifest") {
            let cfg = table.remove("config").ok_or_else(|| CliError::config("manifest has no [config] table"))?;
            return cfg.try_into().map_err(|e| CliError::config(format!("{}: {e}", path.display())));
        }
        toml::Value::Table(table).try_into().map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = o.$field.clone() { $target = v; })*
            };
        }
        set! {
            gamma => self.gamma,
            phi_norm => self.phi_norm,
            eps => self.eps,
            eps_grid => self.eps_grid,
            n_samples => self.n_samples,
            datum_scale => self.datum_scale,
            points => self.points,
            window_l => self.window_l,
            levels => self.levels,
            s => self.s,
            mesh_n => self.mesh_n,
            branch => self.branch,
            y => self.y,
            n_times => self.n_times,
        }
        if o.datum.is_some() {
            self.datum = o.datum;
        }
        if let Some(k) = o.k_max {
            match &mut self.phi {
                FilterProfile::Gaussian { bandwidth } => *bandwidth = k,
                FilterProfile::BandIdeal { k_max } | FilterProfile::NearIdentity { k_max, .. } => *k_max = k,
            }
        }
        if o.horizon.is_some() {
            self.horizon = o.horizon;
        }
        if o.dt.is_some() {
            self.dt = o.dt;
        }
        if o.n_grid.is_some() || o.half_width.is_some() {
            // Applied after `resolve`, so command defaults are already in place.
            let g = self.grid.get_or_insert_with(GridConfig::default);
            g.n_points = o.n_grid.unwrap_or(g.n_points);
            g.half_width = o.half_width.unwrap_or(g.half_width);
        }
        if o.level.is_some() {
            self.level = o.level;
        }
        if o.sigma.is_some() {
            self.sigma = o.sigma;
        }
        if o.blowup_aware {
            self.blowup_aware = true;
        }
    }

    /// Fills command-dependent defaults so the echoed config is complete.
    pub fn resolve(&mut self, command: &str) -> Result<(), CliError> {
        if !self.command.is_empty() && self.command != command {
            return Err(CliError::config(format!(
                "configuration was written for `{}`, not `{command}`",
                self.command
            )));
        }
        self.command = command.to_string();
        let blowup = command == "mc-blowup";
        self.sigma.get_or_insert(if blowup { 2.0 } else { 1.0 });
        self.adaptive.get_or_insert(blowup);
        self.datum.get_or_insert(if blowup { Datum::Blowup } else { Datum::Soliton });
        let (t, dt) = match command {
            "soliton-check" => (1.0, 1e-4),
            "mc-blowup" => (0.3, 1e-3),
            "mc-error" | "mc-shift" | "report" => (2.0, 1e-3),
            _ => (10.0, 1e-3),
        };
        self.horizon.get_or_insert(t);
        self.dt.get_or_insert(dt);
        self.grid.get_or_insert(if blowup {
            GridConfig { n_points: 2048, half_width: 4.0 * PI }
        } else {
            GridConfig::default()
        });
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(1.0)
    }

    pub fn datum(&self) -> Datum {
        self.datum.unwrap_or(Datum::Soliton)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(10.0)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(1e-3)
    }

    pub fn grid(&self) -> GridConfig {
        self.grid.unwrap_or_default()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// SHA-256 of the canonical TOML with the output directory blanked, so
    /// relocated reruns hash the same.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.out_dir.clear();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let mut c = RunConfig::default();
        c.resolve("bounds").unwrap();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.sha256(), c.sha256());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("gamma = 0.5\nbogus = 1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[grid]\nn = 3\n").is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig { out_dir: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.sha256(), b.sha256());
        let c = RunConfig { gamma: 0.25, ..a.clone() };
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn command_defaults() {
        let mut c = RunConfig::default();
        c.resolve("mc-blowup").unwrap();
        assert_eq!(c.sigma, Some(2.0));
        assert_eq!(c.adaptive, Some(true));
        assert_eq!(c.grid.unwrap().n_points, 2048);
        let mut d = RunConfig { horizon: Some(3.0), ..RunConfig::default() };
        d.resolve("soliton-check").unwrap();
        assert_eq!((d.horizon, d.dt), (Some(3.0), Some(1e-4)));
        assert!(c.resolve("bounds").is_err());
    }
}
