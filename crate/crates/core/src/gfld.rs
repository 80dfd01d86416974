//! GFLD field files: the line `GFLD 1`, one line of JSON metadata, then
//! little-endian `f64` data, field after field, row-major over grid points
//! with components fastest-varying.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cauchy::{CauchyState, Fields};
use crate::error::{Error, Result};
use crate::field::{Form, Scalar, SymTensor};
use crate::grid::Grid;

const MAGIC: &str = "GFLD 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Sym,
    Antisym,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub name: String,
    pub rank: usize,
    pub symmetry: Symmetry,
    pub components: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub n: usize,
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
    pub fields: Vec<FieldMeta>,
    /// Slice time of a Cauchy state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

/// One named field with its components stored as separate arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub meta: FieldMeta,
    pub comps: Vec<Vec<f64>>,
}

impl Record {
    pub fn scalar(name: &str, f: &Scalar) -> Record {
        Record {
            meta: FieldMeta { name: name.into(), rank: 0, symmetry: Symmetry::None, components: 1 },
            comps: vec![f.data().to_vec()],
        }
    }

    pub fn form(name: &str, f: &Form) -> Record {
        Record {
            meta: FieldMeta {
                name: name.into(),
                rank: f.degree(),
                symmetry: Symmetry::Antisym,
                components: f.comps().len(),
            },
            comps: f.comps().to_vec(),
        }
    }

    pub fn sym(name: &str, t: &SymTensor) -> Record {
        Record {
            meta: FieldMeta { name: name.into(), rank: 2, symmetry: Symmetry::Sym, components: t.comps().len() },
            comps: t.comps().to_vec(),
        }
    }
}

/// A decoded file: the periodic grid, optional τ and the records in order.
#[derive(Clone, Debug)]
pub struct GfldFile {
    pub grid: Arc<Grid>,
    pub tau: Option<f64>,
    pub records: Vec<Record>,
}

impl GfldFile {
    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.meta.name == name)
    }

    fn require(&self, name: &str) -> Result<&Record> {
        self.get(name).ok_or_else(|| Error::Format(format!("missing field `{name}`")))
    }
}

pub fn write(out: &mut impl Write, grid: &Grid, tau: Option<f64>, records: &[Record]) -> Result<()> {
    if grid.tau_axis().is_some() {
        return Err(Error::Format("only periodic grids are stored".into()));
    }
    let header = Header {
        n: grid.dim(),
        shape: grid.shape(),
        lengths: grid.lengths(),
        fields: records.iter().map(|r| r.meta.clone()).collect(),
        tau,
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{json}")?;
    let mut buf = Vec::with_capacity(8 * grid.len() * records.iter().map(|r| r.comps.len()).sum::<usize>());
    for r in records {
        if r.comps.len() != r.meta.components || r.comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Format(format!("field `{}` does not match the grid", r.meta.name)));
        }
        for p in 0..grid.len() {
            for c in &r.comps {
                buf.extend_from_slice(&c[p].to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read(input: &mut impl BufRead) -> Result<GfldFile> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end_matches(['\n', '\r']) != MAGIC {
        return Err(Error::Format(format!("bad magic line {:?}", line.trim_end())));
    }
    line.clear();
    input.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    if header.shape.len() != header.n || header.lengths.len() != header.n {
        return Err(Error::Format("shape and lengths must have n entries".into()));
    }
    let grid = Arc::new(Grid::torus(&header.shape, &header.lengths)?);
    let points = grid.len();
    let mut records = Vec::with_capacity(header.fields.len());
    for meta in header.fields {
        let mut bytes = vec![0u8; 8 * points * meta.components];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("field `{}` truncated: {e}", meta.name)))?;
        let mut comps = vec![Vec::with_capacity(points); meta.components];
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("chunk of eight bytes"));
            comps[i % meta.components].push(v);
        }
        records.push(Record { meta, comps });
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(GfldFile { grid, tau: header.tau, records })
}

/// Records for `h, K, phi, rho, psi, theta` and, if present, `flux0`.
pub fn state_records(s: &CauchyState) -> Vec<Record> {
    let f = &s.fields;
    let mut out = vec![
        Record::sym("h", &f.h),
        Record::sym("K", &f.k),
        Record::scalar("phi", &f.phi),
        Record::scalar("rho", &f.rho),
        Record::form("psi", &f.psi),
        Record::form("theta", &f.theta),
    ];
    if let Some(flux) = &s.flux0 {
        out.push(Record::form("flux0", flux));
    }
    out
}

pub fn write_state(out: &mut impl Write, s: &CauchyState) -> Result<()> {
    write(out, s.grid(), Some(s.tau), &state_records(s))
}

pub fn read_state(input: &mut impl BufRead) -> Result<CauchyState> {
    let file = read(input)?;
    let grid = &file.grid;
    let sym = |name: &str| -> Result<SymTensor> { SymTensor::new(grid.clone(), file.require(name)?.comps.clone()) };
    let scalar = |name: &str| -> Result<Scalar> {
        let r = file.require(name)?;
        Scalar::new(grid.clone(), r.comps.first().cloned().unwrap_or_default())
    };
    let form = |r: &Record| Form::new(grid.clone(), r.meta.rank, r.comps.clone());
    let fields = Fields {
        h: sym("h")?,
        k: sym("K")?,
        phi: scalar("phi")?,
        rho: scalar("rho")?,
        psi: form(file.require("psi")?)?,
        theta: form(file.require("theta")?)?,
    };
    let flux0 = file.get("flux0").map(form).transpose()?;
    CauchyState::new(fields, flux0, file.tau.unwrap_or(0.0))
}
