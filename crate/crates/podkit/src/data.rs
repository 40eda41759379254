//! Domain data model: probabilistic input descriptions, simulation datasets
//! with CSV persistence, and the derived defect-size column.
//!
//! The dataset format is CSV with a mandatory header row, decimal points and
//! no thousands separators. The standard column set is
//! `E,h1,h2,P1,P2,ebav1,ebav2,ProjY` plus the optional flaw indicator `i_P2`;
//! an empty cell marks an absent value (one-flaw rows leave the second-flaw
//! columns empty). Geometry is carried in millimeters and the response in
//! millivolts, stored as-is.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::special::norm_ppf;

/// Distribution family of one input parameter.
///
/// `ConditionalUniform` is uniform on the row-wise interval
/// `[-x_src + lo_offset, hi]`, where `x_src` is the realized value of the
/// named source input on the same row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    ConditionalUniform {
        source: String,
        lo_offset: f64,
        hi: f64,
    },
}

/// Whether an input contributes to the defect size or is a nuisance
/// parameter integrated out by the POD definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    DefectSize,
    Nuisance,
}

/// Probabilistic description of one model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub family: Family,
    pub role: Role,
    /// True for columns that exist only when a second flaw is present
    /// (`P2`, `h2`, `ebav2` in the standard set).
    #[serde(default)]
    pub second_flaw: bool,
}

/// Ordered, validated collection of input specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSet {
    specs: Vec<InputSpec>,
}

impl InputSet {
    /// Validates every spec: positive standard deviations, non-empty
    /// intervals, and conditional sources that exist earlier in the set and
    /// cannot realize an empty interval.
    pub fn new(specs: Vec<InputSpec>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, spec) in specs.iter().enumerate() {
            if seen.insert(spec.name.as_str(), i).is_some() {
                return Err(Error::Spec(format!("duplicate input name `{}`", spec.name)));
            }
        }
        for (i, spec) in specs.iter().enumerate() {
            match &spec.family {
                Family::Gaussian { sd, .. } => {
                    if !(*sd > 0.0) {
                        return Err(Error::Spec(format!(
                            "input `{}`: Gaussian sd must be > 0, got {sd}",
                            spec.name
                        )));
                    }
                }
                Family::Uniform { lo, hi } => {
                    if !(lo < hi) {
                        return Err(Error::Spec(format!(
                            "input `{}`: Uniform needs lo < hi, got [{lo}, {hi}]",
                            spec.name
                        )));
                    }
                }
                Family::ConditionalUniform { source, lo_offset, hi } => {
                    let src_idx = *seen.get(source.as_str()).ok_or_else(|| {
                        Error::Spec(format!(
                            "input `{}`: conditional source `{source}` not found",
                            spec.name
                        ))
                    })?;
                    if src_idx >= i {
                        return Err(Error::Spec(format!(
                            "input `{}`: conditional source `{source}` must be declared earlier",
                            spec.name
                        )));
                    }
                    // When the source range is bounded, the realized interval
                    // [-x + lo_offset, hi] must be non-empty for every x.
                    if let Family::Uniform { lo: src_lo, .. } = &specs[src_idx].family {
                        if -src_lo + lo_offset > *hi {
                            return Err(Error::Spec(format!(
                                "input `{}`: interval empty for source value {src_lo}",
                                spec.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[InputSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Names of inputs, in declaration order.
    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }
}

/// Column mapping used when reading a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Input columns, in the order they should be stored.
    pub inputs: Vec<String>,
    /// Response column; `None` for pure designs.
    pub response: Option<String>,
    /// Optional flaw-count indicator column (values 1 or 2).
    pub flaw_indicator: Option<String>,
}

impl CsvSchema {
    /// The standard seven-input layout with `ProjY` response and `i_P2`
    /// indicator.
    pub fn standard() -> Self {
        Self {
            inputs: ["E", "h1", "h2", "P1", "P2", "ebav1", "ebav2"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            response: Some("ProjY".into()),
            flaw_indicator: Some("i_P2".into()),
        }
    }

    /// Input columns plus response, no flaw indicator.
    pub fn with_inputs(inputs: &[&str], response: Option<&str>) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            response: response.map(|s| s.to_string()),
            flaw_indicator: None,
        }
    }
}

/// N rows of input values plus an optional scalar response column.
///
/// Immutable after construction; absent cells (one-flaw rows) are carried as
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationDataset {
    input_names: Vec<String>,
    response_name: Option<String>,
    rows: Vec<Vec<Option<f64>>>,
    response: Option<Vec<f64>>,
    flaw_count: Option<Vec<u8>>,
}

impl SimulationDataset {
    /// Builds a dataset and checks the type invariants: at least three rows,
    /// consistent column counts, all present values finite.
    pub fn new(
        input_names: Vec<String>,
        rows: Vec<Vec<Option<f64>>>,
        response_name: Option<String>,
        response: Option<Vec<f64>>,
        flaw_count: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = rows.len();
        if n < 3 {
            return Err(Error::InsufficientData {
                op: "dataset construction",
                needed: 3,
                got: n,
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != input_names.len() {
                return Err(Error::Data(format!(
                    "row {i} has {} columns, expected {}",
                    row.len(),
                    input_names.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    if !v.is_finite() {
                        return Err(Error::Data(format!(
                            "non-finite value at row {i}, column `{}`",
                            input_names[j]
                        )));
                    }
                }
            }
        }
        if let Some(resp) = &response {
            if resp.len() != n {
                return Err(Error::Data(format!(
                    "response has {} values for {} rows",
                    resp.len(),
                    n
                )));
            }
            if let Some(bad) = resp.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite response at row {bad}")));
            }
        }
        if let Some(fc) = &flaw_count {
            if fc.len() != n {
                return Err(Error::Data(format!(
                    "flaw_count has {} values for {} rows",
                    fc.len(),
                    n
                )));
            }
            if let Some(bad) = fc.iter().position(|&c| c != 1 && c != 2) {
                return Err(Error::Data(format!(
                    "flaw_count must be 1 or 2, got {} at row {bad}",
                    fc[bad]
                )));
            }
        }
        Ok(Self {
            input_names,
            response_name,
            rows,
            response,
            flaw_count,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response_name.as_deref()
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn response(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }

    pub fn flaw_count(&self) -> Option<&[u8]> {
        self.flaw_count.as_deref()
    }

    /// Returns the dataset with `response` replaced (same length required).
    pub fn with_response(&self, name: &str, response: Vec<f64>) -> Result<Self> {
        Self::new(
            self.input_names.clone(),
            self.rows.clone(),
            Some(name.to_string()),
            Some(response),
            self.flaw_count.clone(),
        )
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.input_names.iter().position(|n| n == name)
    }

    /// One input column; absent cells stay `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Per-row flaw count. Uses the explicit indicator when present, and
    /// otherwise infers two flaws from a present `P2` cell.
    pub fn effective_flaw_count(&self) -> Vec<u8> {
        if let Some(fc) = &self.flaw_count {
            return fc.clone();
        }
        match self.column_index("P2") {
            Some(idx) => self
                .rows
                .iter()
                .map(|r| if r[idx].is_some() { 2 } else { 1 })
                .collect(),
            None => vec![1; self.rows.len()],
        }
    }
}

/// Defect sizes `a_i = max(P1_i, P2_i)` (or `P1_i` on one-flaw rows), in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectSizeColumn {
    pub a: Vec<f64>,
}

impl DefectSizeColumn {
    pub fn min(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Derives the defect-size parameter of interest from the flaw depths.
pub fn derive_defect_size(ds: &SimulationDataset) -> Result<DefectSizeColumn> {
    let p1 = ds.column("P1")?;
    let p2 = ds.column_index("P2").map(|idx| {
        ds.rows().iter().map(|r| r[idx]).collect::<Vec<_>>()
    });
    let flaws = ds.effective_flaw_count();

    let mut a = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let p1_i = p1[i]
            .ok_or_else(|| Error::Data(format!("row {i}: P1 is absent")))?;
        let a_i = if flaws[i] == 2 {
            let p2_i = p2
                .as_ref()
                .and_then(|c| c[i])
                .ok_or_else(|| Error::Data(format!("row {i}: two flaws but P2 is absent")))?;
            p1_i.max(p2_i)
        } else {
            p1_i
        };
        if !(a_i > 0.0) {
            return Err(Error::Data(format!(
                "row {i}: defect size must be positive, got {a_i}"
            )));
        }
        a.push(a_i);
    }
    Ok(DefectSizeColumn { a })
}

/// Loads a dataset from CSV, checking the declared schema.
///
/// Row order is preserved; every declared column must exist and every
/// non-empty cell must parse as a number.
pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SimulationDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };

    let input_idx: Vec<usize> = schema
        .inputs
        .iter()
        .map(|n| col(n))
        .collect::<Result<_>>()?;
    let response_idx = schema.response.as_deref().map(col).transpose()?;
    let flaw_idx = schema.flaw_indicator.as_deref().and_then(|n| {
        // flaw indicator is optional even when declared in the schema
        headers.iter().position(|h| h == n)
    });

    let parse_cell = |raw: &str, row: usize, column: &str| -> Result<Option<f64>> {
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::ParseCell {
                row,
                column: column.to_string(),
                value: raw.to_string(),
            })
    };

    let mut rows = Vec::new();
    let mut response = response_idx.map(|_| Vec::new());
    let mut flaws = flaw_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(input_idx.len());
        for (k, &idx) in input_idx.iter().enumerate() {
            row.push(parse_cell(&record[idx], i, &schema.inputs[k])?);
        }
        rows.push(row);
        if let (Some(resp), Some(idx)) = (&mut response, response_idx) {
            let name = schema.response.as_deref().unwrap_or("response");
            let v = parse_cell(&record[idx], i, name)?
                .ok_or_else(|| Error::Data(format!("row {i}: empty response cell")))?;
            resp.push(v);
        }
        if let (Some(fc), Some(idx)) = (&mut flaws, flaw_idx) {
            let name = schema.flaw_indicator.as_deref().unwrap_or("i_P2");
            let v = parse_cell(&record[idx], i, name)?;
            fc.push(v.map(|x| x as u8).unwrap_or(1));
        }
    }

    SimulationDataset::new(
        schema.inputs.clone(),
        rows,
        schema.response.clone(),
        response,
        flaws,
    )
}

/// Writes a dataset back to CSV in the standard layout (inputs, response,
/// flaw indicator). Values round-trip exactly through [`load_dataset`].
pub fn write_dataset(path: impl AsRef<Path>, ds: &SimulationDataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = ds.input_names().to_vec();
    if let Some(name) = ds.response_name() {
        header.push(name.to_string());
    }
    if ds.flaw_count().is_some() {
        header.push("i_P2".into());
    }
    writer.write_record(&header)?;
    for i in 0..ds.len() {
        let mut record: Vec<String> = ds.rows()[i]
            .iter()
            .map(|c| c.map(|v| format!("{v}")).unwrap_or_default())
            .collect();
        if let Some(resp) = ds.response() {
            record.push(format!("{}", resp[i]));
        }
        if let Some(fc) = ds.flaw_count() {
            record.push(format!("{}", fc[i]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Marginal law of one metamodel coordinate.
///
/// Conditional-uniform inputs enter the metamodels through their quantile
/// `u` inside the row-wise realized interval, which makes all coordinates
/// independent; such coordinates carry the `Unit` law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalLaw {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Unit,
}

impl MarginalLaw {
    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            MarginalLaw::Gaussian { mean, sd } => mean + sd * norm_ppf(u),
            MarginalLaw::Uniform { lo, hi } => lo + u * (hi - lo),
            MarginalLaw::Unit => u,
        }
    }

    /// Median of the law.
    pub fn median(&self) -> f64 {
        match self {
            MarginalLaw::Gaussian { mean, .. } => *mean,
            MarginalLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            MarginalLaw::Unit => 0.5,
        }
    }
}

/// One metamodel coordinate: its name and marginal law.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVar {
    pub name: String,
    pub law: MarginalLaw,
}

/// Fixed input parameterization shared by the chaos and kriging metamodels
/// and by the sensitivity estimators.
///
/// Coordinate 0 is the defect size `a`; the remaining coordinates are the
/// nuisance inputs in declaration order, with conditional-uniform inputs
/// replaced by their independent `u`-quantile. In the standard seven-input
/// case this reproduces the six-dimensional parameterization
/// `(a, E, h1, h2, u_ebav1, u_ebav2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetamodelFrame {
    vars: Vec<FrameVar>,
    /// For each nuisance var: index of the source dataset column and, for
    /// conditional inputs, the (source column, lo_offset, hi) triple.
    bindings: Vec<ColumnBinding>,
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnBinding {
    Direct(String),
    Conditional {
        column: String,
        source: String,
        lo_offset: f64,
        hi: f64,
    },
}

impl MetamodelFrame {
    /// Builds the frame from an input set; `a_law` is the marginal law
    /// attributed to the defect size (typically uniform over its observed or
    /// designed range).
    pub fn from_input_set(specs: &InputSet, a_law: MarginalLaw) -> Self {
        let mut vars = vec![FrameVar {
            name: "a".into(),
            law: a_law,
        }];
        let mut bindings = Vec::new();
        for spec in specs.specs() {
            if spec.role != Role::Nuisance {
                continue;
            }
            match &spec.family {
                Family::Gaussian { mean, sd } => {
                    vars.push(FrameVar {
                        name: spec.name.clone(),
                        law: MarginalLaw::Gaussian {
                            mean: *mean,
                            sd: *sd,
                        },
                    });
                    bindings.push(ColumnBinding::Direct(spec.name.clone()));
                }
                Family::Uniform { lo, hi } => {
                    vars.push(FrameVar {
                        name: spec.name.clone(),
                        law: MarginalLaw::Uniform { lo: *lo, hi: *hi },
                    });
                    bindings.push(ColumnBinding::Direct(spec.name.clone()));
                }
                Family::ConditionalUniform { source, lo_offset, hi } => {
                    vars.push(FrameVar {
                        name: format!("u_{}", spec.name),
                        law: MarginalLaw::Unit,
                    });
                    bindings.push(ColumnBinding::Conditional {
                        column: spec.name.clone(),
                        source: source.clone(),
                        lo_offset: *lo_offset,
                        hi: *hi,
                    });
                }
            }
        }
        Self { vars, bindings }
    }

    /// A frame with only the defect size (no nuisance inputs).
    pub fn defect_only(a_law: MarginalLaw) -> Self {
        Self {
            vars: vec![FrameVar {
                name: "a".into(),
                law: a_law,
            }],
            bindings: Vec::new(),
        }
    }

    /// Total coordinate count (defect size included).
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[FrameVar] {
        &self.vars
    }

    /// Laws of the nuisance coordinates (everything but `a`).
    pub fn nuisance_laws(&self) -> Vec<MarginalLaw> {
        self.vars[1..].iter().map(|v| v.law).collect()
    }

    /// Names of the nuisance coordinates.
    pub fn nuisance_names(&self) -> Vec<String> {
        self.vars[1..].iter().map(|v| v.name.clone()).collect()
    }

    /// Full coordinate row for defect size `a` and nuisance vector `x`.
    pub fn row(&self, a: f64, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + x.len());
        out.push(a);
        out.extend_from_slice(x);
        out
    }

    /// Converts a dataset into metamodel coordinate rows `[a, nuisance...]`.
    ///
    /// Absent second-flaw cells are imputed at the marginal median (u = 0.5
    /// for conditional inputs), so one-flaw rows stay usable under the fixed
    /// parameterization.
    pub fn assemble(
        &self,
        ds: &SimulationDataset,
        a: &DefectSizeColumn,
    ) -> Result<Vec<Vec<f64>>> {
        if a.a.len() != ds.len() {
            return Err(Error::Data(format!(
                "defect-size column has {} rows, dataset has {}",
                a.a.len(),
                ds.len()
            )));
        }
        // resolve dataset columns once
        let mut resolved: Vec<(usize, Option<(usize, f64, f64)>)> = Vec::new();
        for binding in &self.bindings {
            match binding {
                ColumnBinding::Direct(name) => {
                    let idx = ds.column_index(name).ok_or_else(|| Error::MissingColumn {
                        column: name.clone(),
                    })?;
                    resolved.push((idx, None));
                }
                ColumnBinding::Conditional {
                    column,
                    source,
                    lo_offset,
                    hi,
                } => {
                    let idx = ds.column_index(column).ok_or_else(|| Error::MissingColumn {
                        column: column.clone(),
                    })?;
                    let src = ds.column_index(source).ok_or_else(|| Error::MissingColumn {
                        column: source.clone(),
                    })?;
                    resolved.push((idx, Some((src, *lo_offset, *hi))));
                }
            }
        }

        let mut rows = Vec::with_capacity(ds.len());
        for (i, raw) in ds.rows().iter().enumerate() {
            let mut row = Vec::with_capacity(self.dim());
            row.push(a.a[i]);
            for (k, (idx, cond)) in resolved.iter().enumerate() {
                let law = self.vars[k + 1].law;
                let value = match cond {
                    None => match raw[*idx] {
                        Some(v) => v,
                        None => law.median(),
                    },
                    Some((src_idx, lo_offset, hi)) => match raw[*idx] {
                        None => 0.5,
                        Some(v) => {
                            let src = raw[*src_idx].ok_or_else(|| {
                                Error::Spec(format!(
                                    "row {i}: conditional input present but source absent"
                                ))
                            })?;
                            let lo = -src + lo_offset;
                            if !(lo < *hi) {
                                return Err(Error::Spec(format!(
                                    "row {i}: realized interval [{lo}, {hi}] is empty"
                                )));
                            }
                            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                        }
                    },
                };
                row.push(value);
            }
            rows.push(row);
        }
        Ok(rows)
    }
}
