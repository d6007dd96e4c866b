//! JSON run configuration. Every section is optional; absent keys take the
//! documented defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thermotopo::mesh::GeometrySpec;
use thermotopo::paramopt::{generate_fin_layout, LayoutOverrides, Raster, Setup, SweepRange};
use thermotopo::teg::TegParams;
use thermotopo::topopt::{ObjectiveMode, ObjectiveSpec, OptConfig};
use thermotopo::{MaterialPair, Mesh, RegionMap, ThermalBC};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            nx: 64,
            ny: 64,
            lx: 8.0,
            ly: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoptSection {
    pub volfrac: f64,
    pub move_limit: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub theta_min: f64,
    pub q: f64,
    pub mode: ObjectiveMode,
    /// Detail size (m); one element width when absent.
    pub h0: Option<f64>,
    /// Mesh size (m); one element width when absent.
    pub h_max: Option<f64>,
    /// Filter radius (m); two element widths when absent.
    pub r_min: Option<f64>,
}

impl Default for TopoptSection {
    fn default() -> Self {
        let o = OptConfig::default();
        TopoptSection {
            volfrac: o.volfrac,
            move_limit: o.move_limit,
            damping: o.damping,
            max_iter: o.max_iter,
            tol: o.tol,
            theta_min: o.theta_min,
            q: 0.5,
            mode: ObjectiveMode::Combined,
            h0: None,
            h_max: None,
            r_min: None,
        }
    }
}

impl TopoptSection {
    pub fn opt_config(&self) -> OptConfig {
        OptConfig {
            volfrac: self.volfrac,
            move_limit: self.move_limit,
            damping: self.damping,
            max_iter: self.max_iter,
            tol: self.tol,
            theta_min: self.theta_min,
        }
    }

    pub fn objective(&self, mesh: &Mesh) -> ObjectiveSpec {
        let base = ObjectiveSpec::for_mesh(mesh);
        ObjectiveSpec {
            q: self.q,
            h0: self.h0.unwrap_or(base.h0),
            h_max: self.h_max.unwrap_or(base.h_max),
            area: mesh.area(),
            mode: self.mode,
        }
    }

    pub fn filter_radius(&self, mesh: &Mesh) -> f64 {
        self.r_min.unwrap_or(2.0 * mesh.dx().max(mesh.dy()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamoptSection {
    pub setup: String,
    /// Objective evaluations for the parameter search; ten per parameter when absent.
    pub budget: Option<usize>,
    pub sweep: SweepRange,
    pub raster: Raster,
    pub overrides: LayoutOverrides,
}

impl Default for ParamoptSection {
    fn default() -> Self {
        ParamoptSection {
            setup: "1C".into(),
            budget: None,
            sweep: SweepRange::default(),
            raster: Raster::Coverage,
            overrides: LayoutOverrides::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TegSection {
    pub params: TegParams,
    pub t_hot: f64,
    pub t_cold: f64,
    /// Device ZT; evaluated from `params` at the mean temperature when absent.
    pub zt_avg: Option<f64>,
    /// Summary written by `transient`; its `t_cold` replaces the value above.
    pub summary: Option<PathBuf>,
}

impl Default for TegSection {
    fn default() -> Self {
        TegSection {
            params: TegParams::default(),
            t_hot: 1000.0,
            t_cold: 548.29,
            zt_avg: None,
            summary: None,
        }
    }
}

/// Steady solve of a fixed design, optionally with prescribed flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Uniform density used when no layout is named.
    pub theta: f64,
    /// Setup label whose default fin layout replaces the uniform density.
    pub layout: Option<String>,
    /// Uniform velocity (m/s).
    pub velocity: [f64; 2],
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            theta: 0.0,
            layout: None,
            velocity: [0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransientSection {
    pub theta: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Initial temperature (K); ambient when absent.
    pub t0: Option<f64>,
}

impl Default for TransientSection {
    fn default() -> Self {
        TransientSection {
            theta: 0.0,
            dt: 600.0,
            t_end: 86_400.0,
            t0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Vtk,
    Csv,
    Png,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            formats: vec![Format::Vtk, Format::Csv, Format::Png],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub geometry: GeometrySpec,
    pub material: MaterialPair,
    pub bc: ThermalBC,
    pub topopt: TopoptSection,
    pub paramopt: ParamoptSection,
    pub teg: TegSection,
    pub solve: SolveSection,
    pub transient: TransientSection,
    pub output: OutputSection,
}

fn check(ok: bool, key: &str, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation {
            key: key.to_string(),
            message: msg.into(),
        })
    }
}

fn unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, so defaults and formatting do not matter.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn mesh(&self) -> Result<Mesh, CliError> {
        let m = &self.mesh;
        Mesh::build_grid(m.nx, m.ny, m.lx, m.ly).map_err(|e| CliError::Validation {
            key: "mesh".into(),
            message: e.to_string(),
        })
    }

    pub fn regions(&self, mesh: &Mesh) -> Result<RegionMap, CliError> {
        RegionMap::classify(mesh, &self.geometry).map_err(|e| CliError::Validation {
            key: "geometry".into(),
            message: e.to_string(),
        })
    }

    /// Checks every section before any solve starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.mesh;
        check(m.nx >= 2, "mesh.nx", "must be at least 2")?;
        check(m.ny >= 2, "mesh.ny", "must be at least 2")?;
        check(
            m.lx > 0.0 && m.lx.is_finite(),
            "mesh.lx",
            "must be positive",
        )?;
        check(
            m.ly > 0.0 && m.ly.is_finite(),
            "mesh.ly",
            "must be positive",
        )?;
        let mesh = self.mesh()?;
        self.regions(&mesh)?;

        let mat = &self.material;
        check(mat.k_fluid > 0.0, "material.k_fluid", "must be positive")?;
        check(
            mat.k_solid > mat.k_fluid,
            "material.k_solid",
            "must exceed material.k_fluid",
        )?;
        check(mat.c_fluid > 0.0, "material.c_fluid", "must be positive")?;
        check(mat.c_solid > 0.0, "material.c_solid", "must be positive")?;
        check(mat.penal >= 1.0, "material.penal", "must be at least 1")?;

        let bc = &self.bc;
        check(bc.t_amb >= 0.0, "bc.t_amb", "must be non-negative")?;
        check(bc.t_hot > bc.t_amb, "bc.t_hot", "must exceed bc.t_amb")?;
        check(bc.h_sink >= 0.0, "bc.h_sink", "must be non-negative")?;
        check(bc.q_source.is_finite(), "bc.q_source", "must be finite")?;

        let t = &self.topopt;
        check(
            t.volfrac > 0.0 && t.volfrac <= 1.0,
            "topopt.volfrac",
            "must lie in (0, 1]",
        )?;
        check(
            t.move_limit > 0.0 && t.move_limit <= 1.0,
            "topopt.move_limit",
            "must lie in (0, 1]",
        )?;
        check(t.damping > 0.0, "topopt.damping", "must be positive")?;
        check(t.max_iter >= 1, "topopt.max_iter", "must be at least 1")?;
        check(t.tol > 0.0, "topopt.tol", "must be positive")?;
        check(
            t.theta_min > 0.0 && t.theta_min < 1.0,
            "topopt.theta_min",
            "must lie in (0, 1)",
        )?;
        check(
            t.volfrac >= t.theta_min,
            "topopt.volfrac",
            "must not be below topopt.theta_min",
        )?;
        check(unit(t.q), "topopt.q", "must lie in [0, 1]")?;
        check(
            t.h0.is_none_or(|v| v > 0.0),
            "topopt.h0",
            "must be positive",
        )?;
        check(
            t.h_max.is_none_or(|v| v > 0.0),
            "topopt.h_max",
            "must be positive",
        )?;
        check(
            t.r_min.is_none_or(|v| v >= 0.0 && v.is_finite()),
            "topopt.r_min",
            "must be >= 0",
        )?;

        let p = &self.paramopt;
        let setup = p.setup.parse::<Setup>().map_err(|_| CliError::Validation {
            key: "paramopt.setup".into(),
            message: format!(
                "unknown setup `{}`, expected one of {:?}",
                p.setup,
                Setup::ALL
            ),
        })?;
        let layout =
            generate_fin_layout(&setup.to_string(), &p.overrides, m.lx, m.ly).map_err(|e| {
                CliError::Validation {
                    key: "paramopt.overrides".into(),
                    message: e.to_string(),
                }
            })?;
        if let Some(b) = p.budget {
            let dim = layout.thickness.len() + if layout.post.is_some() { 4 } else { 0 };
            check(
                b >= 10 * dim,
                "paramopt.budget",
                format!("must be at least 10 x {dim} parameters"),
            )?;
        }
        let s = &p.sweep;
        check(s.step > 0, "paramopt.sweep.step", "must be positive")?;
        check(
            s.end >= s.start,
            "paramopt.sweep.end",
            "must not be below paramopt.sweep.start",
        )?;
        check(
            (s.end - s.start).is_multiple_of(s.step),
            "paramopt.sweep.step",
            "must divide the range",
        )?;
        check(
            s.base_thickness > 0.0,
            "paramopt.sweep.base_thickness",
            "must be positive",
        )?;

        let g = &self.teg;
        let tp = &g.params;
        check(tp.sigma > 0.0, "teg.params.sigma", "must be positive")?;
        check(tp.k_total > 0.0, "teg.params.k_total", "must be positive")?;
        check(
            tp.seebeck.is_finite(),
            "teg.params.seebeck",
            "must be finite",
        )?;
        check(
            tp.leg_length > 0.0,
            "teg.params.leg_length",
            "must be positive",
        )?;
        check(
            tp.contact_resistivity >= 0.0,
            "teg.params.contact_resistivity",
            "must be >= 0",
        )?;
        check(
            tp.pulse_gain >= 0.0,
            "teg.params.pulse_gain",
            "must be >= 0",
        )?;
        if let Some(c) = tp.k_components {
            check(
                (c.iter().sum::<f64>() - tp.k_total).abs() <= 1e-9,
                "teg.params.k_components",
                "must sum to teg.params.k_total",
            )?;
        }
        check(g.t_cold > 0.0, "teg.t_cold", "must be positive")?;
        check(g.t_hot > g.t_cold, "teg.t_hot", "must exceed teg.t_cold")?;
        check(
            g.zt_avg.is_none_or(|z| z >= 0.0),
            "teg.zt_avg",
            "must be >= 0",
        )?;

        let sv = &self.solve;
        check(unit(sv.theta), "solve.theta", "must lie in [0, 1]")?;
        check(
            sv.velocity.iter().all(|v| v.is_finite()),
            "solve.velocity",
            "must be finite",
        )?;
        if let Some(l) = &sv.layout {
            check(
                l.parse::<Setup>().is_ok(),
                "solve.layout",
                format!("unknown setup `{l}`"),
            )?;
        }

        let tr = &self.transient;
        check(unit(tr.theta), "transient.theta", "must lie in [0, 1]")?;
        check(
            tr.dt > 0.0 && tr.dt.is_finite(),
            "transient.dt",
            "must be positive",
        )?;
        check(
            tr.t_end >= tr.dt,
            "transient.t_end",
            "must be at least transient.dt",
        )?;
        check(
            tr.t0.is_none_or(|v| v.is_finite()),
            "transient.t0",
            "must be finite",
        )?;

        check(
            !self.output.dir.as_os_str().is_empty(),
            "output.dir",
            "must not be empty",
        )?;
        Ok(())
    }
}
