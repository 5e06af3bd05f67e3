//! JSON model files. Matrices are row-major nested arrays.

use std::path::Path;

use lqgvar::{CostSpec, Horizon, LqgPlant, LtiSystem, Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    System,
    Plant,
}

/// A horizon is a positive number of seconds or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonField {
    Finite(f64),
    Named(String),
}

impl HorizonField {
    pub fn to_horizon(&self) -> Result<Horizon, CliError> {
        match self {
            HorizonField::Finite(t) => Ok(Horizon::Finite(*t)),
            HorizonField::Named(s) if is_infinite_word(s) => Ok(Horizon::Infinite),
            HorizonField::Named(s) => Err(CliError::Input(format!(
                "horizon must be a number or \"inf\", got \"{s}\""
            ))),
        }
    }

    pub fn from_horizon(h: Horizon) -> Self {
        match h {
            Horizon::Finite(t) => HorizonField::Finite(t),
            Horizon::Infinite => HorizonField::Named("inf".into()),
        }
    }
}

fn is_infinite_word(s: &str) -> bool {
    matches!(s, "inf" | "infinite" | "Infinite")
}

/// Parses a command-line horizon: a number or `inf`.
pub fn parse_horizon(s: &str) -> Result<Horizon, String> {
    if is_infinite_word(s) {
        return Ok(Horizon::Infinite);
    }
    s.parse::<f64>()
        .map(Horizon::Finite)
        .map_err(|_| format!("expected a number or \"inf\", got \"{s}\""))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    #[serde(rename = "Q")]
    pub q: Rows,
    pub alpha: f64,
    pub horizon: HorizonField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: Kind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "V")]
    pub v: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    #[serde(rename = "Sigma0", default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBlock>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Rows>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Rows>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Plant files only; defaults to infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<HorizonField>,
}

/// A plant together with its initial-state moments and cost horizon.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub plant: LqgPlant,
    pub mu0: Vector,
    pub sigma0: Matrix,
    pub horizon: Horizon,
}

pub fn to_matrix(rows: &Rows, r: usize, c: usize, what: &str) -> Result<Matrix, CliError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        let got_cols = rows.first().map_or(0, Vec::len);
        return Err(CliError::Input(format!(
            "{what} must be {r}x{c}, got {} rows of {got_cols}",
            rows.len()
        )));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_vector(v: &[f64], n: usize, what: &str) -> Result<Vector, CliError> {
    if v.len() != n {
        return Err(CliError::Input(format!(
            "{what} must have {n} entries, got {}",
            v.len()
        )));
    }
    Ok(Vector::from_column_slice(v))
}

pub fn rows(m: &Matrix) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn require<'a, T>(field: &'a Option<T>, name: &str, kind: &str) -> Result<&'a T, CliError> {
    field
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("{kind} model needs field {name}")))
}

fn forbid<T>(field: &Option<T>, name: &str, kind: &str) -> Result<(), CliError> {
    match field {
        Some(_) => Err(CliError::Input(format!("field {name} is not allowed in a {kind} model"))),
        None => Ok(()),
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let model: ModelFile =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid model file: {e}")))?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                model.schema_version
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    fn initial_moments(&self) -> Result<(Vector, Matrix), CliError> {
        let n = self.n;
        let mu0 = match &self.mu0 {
            Some(v) => to_vector(v, n, "mu0")?,
            None => Vector::zeros(n),
        };
        let sigma0 = match &self.sigma0 {
            Some(s) => to_matrix(s, n, n, "Sigma0")?,
            None => Matrix::zeros(n, n),
        };
        Ok((mu0, sigma0))
    }

    /// The system and cost of a `system` model.
    pub fn to_system(&self) -> Result<(LtiSystem, CostSpec), CliError> {
        let kind = "system";
        if self.kind != Kind::System {
            return Err(CliError::Input(
                "expected a system model; plant models go through synthesize or tune".into(),
            ));
        }
        for (present, name) in [
            (self.m.is_some(), "m"),
            (self.p.is_some(), "p"),
            (self.b.is_some(), "B"),
            (self.c.is_some(), "C"),
            (self.q.is_some(), "Q"),
            (self.r.is_some(), "R"),
            (self.w.is_some(), "W"),
            (self.alpha.is_some(), "alpha"),
            (self.horizon.is_some(), "horizon"),
        ] {
            forbid(&present.then_some(()), name, kind)?;
        }
        require(&self.mu0, "mu0", kind)?;
        require(&self.sigma0, "Sigma0", kind)?;
        let cost = require(&self.cost, "cost", kind)?;
        let n = self.n;
        let a = to_matrix(&self.a, n, n, "A")?;
        let v = to_matrix(&self.v, n, n, "V")?;
        let (mu0, sigma0) = self.initial_moments()?;
        let sys = LtiSystem::new(a, v, mu0, sigma0)?;
        let spec = CostSpec::new(to_matrix(&cost.q, n, n, "cost.Q")?, cost.alpha, cost.horizon.to_horizon()?)?;
        Ok((sys, spec))
    }

    /// The plant of a `plant` model; `C` and `W` are optional together.
    pub fn to_plant(&self) -> Result<PlantModel, CliError> {
        let kind = "plant";
        if self.kind != Kind::Plant {
            return Err(CliError::Input("expected a plant model".into()));
        }
        forbid(&self.cost, "cost", kind)?;
        let n = self.n;
        let m = *require(&self.m, "m", kind)?;
        let a = to_matrix(&self.a, n, n, "A")?;
        let b = to_matrix(require(&self.b, "B", kind)?, n, m, "B")?;
        let q = to_matrix(require(&self.q, "Q", kind)?, n, n, "Q")?;
        let r = to_matrix(require(&self.r, "R", kind)?, m, m, "R")?;
        let v = to_matrix(&self.v, n, n, "V")?;
        let alpha = *require(&self.alpha, "alpha", kind)?;
        let mut plant = LqgPlant::new(a, b, q, r, v, alpha)?;
        match (&self.c, &self.w) {
            (Some(c), Some(w)) => {
                let p = *require(&self.p, "p", kind)?;
                plant = plant.with_output(to_matrix(c, p, n, "C")?, to_matrix(w, p, p, "W")?)?;
            }
            (None, None) => forbid(&self.p, "p (without C and W)", kind)?,
            _ => return Err(CliError::Input("C and W must be given together".into())),
        }
        let (mu0, sigma0) = self.initial_moments()?;
        let horizon = match &self.horizon {
            Some(h) => h.to_horizon()?,
            None => Horizon::Infinite,
        };
        Ok(PlantModel {
            plant,
            mu0,
            sigma0,
            horizon,
        })
    }

    pub fn from_system(sys: &LtiSystem, cost: &CostSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: Kind::System,
            n: sys.dim(),
            m: None,
            p: None,
            a: rows(sys.a()),
            v: rows(sys.v()),
            mu0: Some(sys.mu0().iter().copied().collect()),
            sigma0: Some(rows(sys.sigma0())),
            cost: Some(CostBlock {
                q: rows(cost.q()),
                alpha: cost.alpha(),
                horizon: HorizonField::from_horizon(cost.horizon()),
            }),
            b: None,
            c: None,
            q: None,
            r: None,
            w: None,
            alpha: None,
            horizon: None,
        }
    }

    pub fn from_plant(model: &PlantModel) -> Self {
        let p = &model.plant;
        Self {
            schema_version: SCHEMA_VERSION,
            kind: Kind::Plant,
            n: p.dim(),
            m: Some(p.inputs()),
            p: p.c().map(|c| c.nrows()),
            a: rows(p.a()),
            v: rows(p.v()),
            mu0: Some(model.mu0.iter().copied().collect()),
            sigma0: Some(rows(&model.sigma0)),
            cost: None,
            b: Some(rows(p.b())),
            c: p.c().map(rows),
            q: Some(rows(p.q())),
            r: Some(rows(p.r())),
            w: p.w().map(rows),
            alpha: Some(p.alpha()),
            horizon: Some(HorizonField::from_horizon(model.horizon)),
        }
    }
}
