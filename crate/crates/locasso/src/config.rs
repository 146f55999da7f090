//! Constants files and experiment configurations (TOML or JSON).

use std::path::Path;

use locasso_core::{
    choose_parameters, EstimationOptions, KernelFamily, Procedure, ProblemConstants,
    SelectionConfig,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulation::{Design, DesignConstants, Experiment, FunctionFamily, GeneratorSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing constant `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] locasso_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for `.json`, TOML otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

/// Deserializes with the offending field path in the error.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, format: Format) -> Result<T, ConfigError> {
    match format {
        Format::Json => {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de).map_err(path_error)
        }
        Format::Toml => {
            let de = toml::Deserializer::new(text);
            serde_path_to_error::deserialize(de).map_err(path_error)
        }
    }
}

fn path_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> ConfigError {
    let path = e.path().to_string();
    ConfigError::Parse {
        path: if path == "." { "<root>".into() } else { path },
        message: e.into_inner().to_string(),
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse(&text, Format::from_path(path))
}

/// Problem constants as written by a user; any may be left out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    #[serde(rename = "L")]
    pub lipschitz: Option<f64>,
    pub beta: Option<f64>,
    pub mu_m: Option<f64>,
    #[serde(rename = "mu_M")]
    pub mu_max: Option<f64>,
    #[serde(rename = "L_mu")]
    pub mu_lipschitz: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "M_K")]
    pub kernel_bound: Option<f64>,
    #[serde(rename = "C")]
    pub separation: Option<f64>,
    pub d0: Option<usize>,
    pub sigma: Option<f64>,
    pub f_max: Option<f64>,
}

impl ConstantsFile {
    /// Fills gaps from the design and the kernel, then insists on the rest.
    /// `beta` defaults to 2 and `sigma` to 0; they do not enter the
    /// selection stage.
    pub fn resolve(
        &self,
        design: Option<DesignConstants>,
        kernel_bound: Option<f64>,
    ) -> Result<ProblemConstants, ConfigError> {
        fn need<T>(v: Option<T>, name: &'static str) -> Result<T, ConfigError> {
            v.ok_or(ConfigError::Missing(name))
        }
        let c = ProblemConstants {
            lipschitz: need(self.lipschitz, "L")?,
            beta: self.beta.unwrap_or(2.0),
            mu_min: need(self.mu_m.or(design.map(|d| d.mu_min)), "mu_m")?,
            mu_max: need(self.mu_max.or(design.map(|d| d.mu_max)), "mu_M")?,
            mu_lipschitz: need(self.mu_lipschitz.or(design.map(|d| d.mu_lipschitz)), "L_mu")?,
            eta: need(self.eta.or(design.map(|d| d.eta)), "eta")?,
            kernel_bound: need(self.kernel_bound.or(kernel_bound), "M_K")?,
            separation: need(self.separation, "C")?,
            d0: need(self.d0, "d0")?,
            sigma: self.sigma.unwrap_or(0.0),
            f_max: need(self.f_max, "f_max")?,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Selection,
    Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub d: usize,
    pub support: Vec<usize>,
    #[serde(default = "unit_box")]
    pub design: Design,
    pub function: FunctionFamily,
    pub sigma: f64,
    /// Defaults to the centre of the box.
    pub x_query: Option<Vec<f64>>,
}

fn unit_box() -> Design {
    Design::UniformBox { lo: -0.5, hi: 0.5 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub procedure: String,
    #[serde(default = "default_selection_kernel")]
    pub kernel: String,
    /// Fraction of the bandwidth bound; used when neither `h` nor `lambda`
    /// is given (default 0.9).
    pub h_fraction: Option<f64>,
    pub h: Option<f64>,
    /// An explicit `λ` makes the run exploratory (non-compliant).
    pub lambda: Option<f64>,
}

fn default_selection_kernel() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    pub beta: f64,
    #[serde(default = "default_estimation_kernel")]
    pub kernel: String,
    pub f_max: Option<f64>,
    pub bandwidth: Option<f64>,
}

fn default_estimation_kernel() -> String {
    "gaussian_trunc".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    pub seed: Option<u64>,
    pub generator: GeneratorSection,
    #[serde(default)]
    pub constants: ConstantsFile,
    pub selection: SelectionSection,
    pub estimation: Option<EstimationSection>,
}

pub fn kernel_family(name: &str) -> Result<KernelFamily, ConfigError> {
    KernelFamily::from_name(name).ok_or_else(|| ConfigError::Invalid(format!("unknown kernel `{name}`")))
}

pub fn procedure(name: &str) -> Result<Procedure, ConfigError> {
    Procedure::from_name(name).ok_or_else(|| {
        ConfigError::Invalid(format!("unknown procedure `{name}` (expected plain or translated)"))
    })
}

/// Selection settings from explicit values or from the constants.
///
/// With an explicit `λ` the run is exploratory: constants are optional
/// (the translated procedure still needs `f_max` and `C`) and a missing
/// `d0` falls back to `d`. Otherwise every constant must resolve.
pub fn selection_config(
    section: &SelectionSection,
    file: &ConstantsFile,
    design: Option<DesignConstants>,
    kernel_bound: Option<f64>,
    d: usize,
) -> Result<SelectionConfig, ConfigError> {
    let proc = procedure(&section.procedure)?;
    if let Some(lambda) = section.lambda {
        let h = section
            .h
            .ok_or_else(|| ConfigError::Invalid("an explicit lambda needs an explicit h".into()))?;
        let mut file = file.clone();
        if file.d0.is_none() {
            log::warn!("d0 not given; using d0 = d = {d}, which loosens the bandwidth bound");
            file.d0 = Some(d);
        }
        let constants = file.resolve(design, kernel_bound);
        let constants = match proc {
            Procedure::Translated => Some(constants?),
            Procedure::Plain => constants.ok(),
        };
        return Ok(SelectionConfig::exploratory(h, lambda, proc, constants)?);
    }
    let constants = file.resolve(design, kernel_bound)?;
    Ok(match section.h {
        Some(h) => SelectionConfig::strict_with_bandwidth(constants, h, proc)?,
        None => choose_parameters(&constants, section.h_fraction.unwrap_or(0.9), proc)?,
    })
}

impl ExperimentConfig {
    pub fn generator_spec(&self, seed: u64) -> GeneratorSpec {
        let g = &self.generator;
        let Design::UniformBox { lo, hi } = g.design;
        GeneratorSpec {
            n: self.n_grid.first().copied().unwrap_or(1),
            d: g.d,
            support: g.support.clone(),
            design: g.design.clone(),
            function: g.function.clone(),
            sigma: g.sigma,
            seed,
            x_query: g.x_query.clone().unwrap_or_else(|| vec![0.5 * (lo + hi); g.d]),
        }
    }

    /// The constants section with `sigma`, `beta` and `f_max` taken from the
    /// generator and estimation sections when left out.
    fn constants_file(&self, spec: &GeneratorSpec) -> ConstantsFile {
        let mut file = self.constants.clone();
        file.sigma = file.sigma.or(Some(spec.sigma));
        if let Some(e) = &self.estimation {
            file.beta = file.beta.or(Some(e.beta));
            file.f_max = file.f_max.or(e.f_max);
        }
        file
    }

    pub fn experiment(&self, seed: u64) -> Result<Experiment, ConfigError> {
        let template = self.generator_spec(seed);
        template.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let file = self.constants_file(&template);
        let family = kernel_family(&self.selection.kernel)?;
        let kernel = family.build(template.d)?;
        let selection = selection_config(
            &self.selection,
            &file,
            Some(template.design_constants()),
            kernel.moment_bound(),
            template.d,
        )?;
        let estimation = match &self.estimation {
            Some(e) => Some(EstimationOptions {
                beta: e.beta,
                kernel: kernel_family(&e.kernel)?,
                f_max: e
                    .f_max
                    .or(file.f_max)
                    .ok_or(ConfigError::Missing("f_max"))?,
                bandwidth: e.bandwidth,
            }),
            None => None,
        };
        if self.kind == ExperimentKind::Rate && estimation.is_none() {
            return Err(ConfigError::Invalid("a rate experiment needs an [estimation] section".into()));
        }
        Ok(Experiment {
            template,
            n_grid: self.n_grid.clone(),
            replicates: self.replicates,
            selection,
            selection_kernel: family,
            estimation,
        })
    }
}
