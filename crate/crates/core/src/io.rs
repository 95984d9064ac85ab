//! CSV convergence histories and JSON mesh snapshots.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::{ConvergenceHistory, LevelRecord};
use crate::mesh::Mesh;
use crate::{Error, Point, Result};

pub const HISTORY_HEADER: [&str; 13] = [
    "level",
    "cells",
    "dofs",
    "error_energy",
    "eta_total",
    "eta1",
    "eta2",
    "eta3",
    "eta_pos",
    "eta_contact",
    "efficiency",
    "pdas_iters",
    "seconds",
];

/// 17 significant digits, enough to reproduce every `f64`.
fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Writes the history as CSV. Timings are left empty unless `timings` is
/// set, so the output is a pure function of the run configuration.
pub fn write_history<W: Write>(history: &ConvergenceHistory, out: W, timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER)?;
    for l in &history.levels {
        w.write_record([
            l.level.to_string(),
            l.cells.to_string(),
            l.dofs.to_string(),
            format_opt(l.error_energy),
            format_float(l.eta_total),
            format_float(l.eta1),
            format_float(l.eta2),
            format_float(l.eta3),
            format_float(l.eta_pos),
            format_float(l.eta_contact),
            format_opt(l.efficiency),
            l.pdas_iters.to_string(),
            if timings { format_opt(l.seconds) } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn history_to_string(history: &ConvergenceHistory, timings: bool) -> Result<String> {
    let mut buf = Vec::new();
    write_history(history, &mut buf, timings)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn export_history(history: &ConvergenceHistory, path: &Path, timings: bool) -> Result<()> {
    write_history(history, BufWriter::new(File::create(path)?), timings)
}

/// Parses a history written by [`write_history`].
pub fn parse_history<R: Read>(input: R) -> Result<ConvergenceHistory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(Error::InvalidInput(format!("unexpected history header {header:?}")));
    }
    let mut levels = Vec::new();
    for row in r.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("column {}: {e}", HISTORY_HEADER[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            match field(i) {
                "" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|e| Error::InvalidInput(format!("column {}: {e}", HISTORY_HEADER[i]))),
            }
        };
        let float =
            |i: usize| opt(i)?.ok_or_else(|| Error::InvalidInput(format!("column {} is empty", HISTORY_HEADER[i])));
        levels.push(LevelRecord {
            level: int(0)?,
            cells: int(1)?,
            dofs: int(2)?,
            error_energy: opt(3)?,
            eta_total: float(4)?,
            eta1: float(5)?,
            eta2: float(6)?,
            eta3: float(7)?,
            eta_pos: float(8)?,
            eta_contact: float(9)?,
            efficiency: opt(10)?,
            pdas_iters: int(11)?,
            seconds: opt(12)?,
            extra: None,
        });
    }
    Ok(ConvergenceHistory { levels })
}

/// JSON layout of a mesh snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    /// Local index of each cell's refinement edge (the edge opposite that vertex).
    pub refinement_edge: Vec<u8>,
    pub boundary_faces: Vec<[usize; 2]>,
}

impl MeshDocument {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        Self {
            vertices: mesh.vertices().to_vec(),
            cells: mesh.cells().to_vec(),
            refinement_edge: mesh.refinement_edges().to_vec(),
            boundary_faces: mesh.boundary_faces().map(|(_, f)| f.vertices).collect(),
        }
    }

    /// Rebuilds the mesh and checks the stored boundary against it.
    pub fn to_mesh(&self) -> Result<Mesh> {
        let mesh =
            Mesh::with_refinement_edges(self.vertices.clone(), self.cells.clone(), self.refinement_edge.clone())?;
        let mut stored: Vec<[usize; 2]> = self
            .boundary_faces
            .iter()
            .map(|&[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        stored.sort_unstable();
        let mut actual: Vec<[usize; 2]> = mesh.boundary_faces().map(|(_, f)| f.vertices).collect();
        actual.sort_unstable();
        if stored != actual {
            return Err(Error::Mismatch("boundary_faces do not match the cells".into()));
        }
        Ok(mesh)
    }
}

pub fn mesh_to_json(mesh: &Mesh) -> Result<String> {
    Ok(serde_json::to_string(&MeshDocument::from_mesh(mesh))?)
}

pub fn mesh_from_json(json: &str) -> Result<Mesh> {
    serde_json::from_str::<MeshDocument>(json)?.to_mesh()
}

pub fn export_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &MeshDocument::from_mesh(mesh))?;
    w.flush()?;
    Ok(())
}

pub fn import_mesh(path: &Path) -> Result<Mesh> {
    mesh_from_json(&std::fs::read_to_string(path)?)
}
