//! Legacy ASCII VTK unstructured grids of quadratic quads (cell type 23).
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! frame read back reproduces its arrays bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hefrac_core::coupling::SimState;
use hefrac_core::diffusion::{effective_diffusivity, molar_to_ppm};
use hefrac_core::fem::Mesh;
use hefrac_core::mechanics::hydrostatic_stress;
use hefrac_core::MaterialParams;

use crate::error::{Error, Result};

/// VTK_QUADRATIC_QUAD; its node order (corners, then mid-sides 0-1, 1-2,
/// 2-3, 3-0) is the mesh's own.
pub const CELL_TYPE: u8 = 23;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub title: String,
    /// Simulated time, s.
    pub time: f64,
    pub cycle: usize,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 8]>,
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

impl Grid {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        Self {
            points: mesh.nodes.clone(),
            cells: mesh.elements.clone(),
            ..Self::default()
        }
    }

    pub fn point_scalar(&self, name: &str) -> Option<&[f64]> {
        self.point_scalars.iter().find(|a| a.0 == name).map(|a| &a.1[..])
    }

    pub fn point_vector(&self, name: &str) -> Option<&[[f64; 2]]> {
        self.point_vectors.iter().find(|a| a.0 == name).map(|a| &a.1[..])
    }

    pub fn cell_scalar(&self, name: &str) -> Option<&[f64]> {
        self.cell_scalars.iter().find(|a| a.0 == name).map(|a| &a.1[..])
    }

    fn check(&self) -> Result<()> {
        let (np, nc) = (self.points.len(), self.cells.len());
        let bad_point = self.point_scalars.iter().any(|a| a.1.len() != np) || self.point_vectors.iter().any(|a| a.1.len() != np);
        let bad_cell = self.cell_scalars.iter().any(|a| a.1.len() != nc);
        if bad_point || bad_cell || self.cells.iter().flatten().any(|&n| n >= np) {
            return Err(Error::Invalid("VTK array lengths do not match the mesh".into()));
        }
        Ok(())
    }

    pub fn to_vtk(&self) -> Result<String> {
        self.check()?;
        let mut s = String::new();
        let title = self.title.replace('\n', " ");
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "FIELD FieldData 2\nTIME 1 1 double\n{}\nCYCLE 1 1 int\n{}", self.time, self.cycle);
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{} {} 0", p[0], p[1]);
        }
        let nc = self.cells.len();
        let _ = writeln!(s, "CELLS {nc} {}", nc * 9);
        for c in &self.cells {
            let _ = writeln!(s, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]);
        }
        let _ = writeln!(s, "CELL_TYPES {nc}");
        for _ in 0..nc {
            let _ = writeln!(s, "{CELL_TYPE}");
        }
        if !self.cell_scalars.is_empty() {
            let _ = writeln!(s, "CELL_DATA {nc}");
            for (name, v) in &self.cell_scalars {
                scalars(&mut s, name, v);
            }
        }
        if !self.point_scalars.is_empty() || !self.point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
            for (name, v) in &self.point_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{} {} 0", x[0], x[1]);
                }
            }
            for (name, v) in &self.point_scalars {
                scalars(&mut s, name, v);
            }
        }
        Ok(s)
    }

    /// Writes through a temporary file so that a failed write leaves nothing
    /// behind.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_vtk()?;
        let tmp = path.with_extension("vtk.partial");
        if let Err(e) = fs::write(&tmp, text) {
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(&tmp, e));
        }
        fs::rename(&tmp, path).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses the subset written by [`Grid::to_vtk`].
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let mut grid = Grid::default();
        let head = lines.next().unwrap_or_default();
        if !head.starts_with("# vtk DataFile") {
            return Err("not a legacy VTK file".into());
        }
        grid.title = lines.next().unwrap_or_default().to_string();
        if lines.next().map(str::trim) != Some("ASCII") {
            return Err("only ASCII files are supported".into());
        }
        let mut tok = lines.flat_map(str::split_whitespace);
        let mut next = move || tok.next().map(str::to_string).ok_or_else(|| "unexpected end of file".to_string());
        fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad number '{s}'"))
        }
        let mut section = "point";
        while let Ok(word) = next() {
            match word.as_str() {
                "DATASET" => {
                    let kind = next()?;
                    if kind != "UNSTRUCTURED_GRID" {
                        return Err(format!("unsupported dataset {kind}"));
                    }
                }
                "FIELD" => {
                    let _name = next()?;
                    let n: usize = num(&next()?)?;
                    for _ in 0..n {
                        let name = next()?;
                        let (comps, tuples): (usize, usize) = (num(&next()?)?, num(&next()?)?);
                        let _ty = next()?;
                        let mut vals = Vec::with_capacity(comps * tuples);
                        for _ in 0..comps * tuples {
                            vals.push(num::<f64>(&next()?)?);
                        }
                        match name.as_str() {
                            "TIME" => grid.time = vals.first().copied().unwrap_or(0.0),
                            "CYCLE" => grid.cycle = vals.first().copied().unwrap_or(0.0) as usize,
                            _ => {}
                        }
                    }
                }
                "POINTS" => {
                    let n: usize = num(&next()?)?;
                    let _ty = next()?;
                    for _ in 0..n {
                        let (x, y, _z): (f64, f64, f64) = (num(&next()?)?, num(&next()?)?, num(&next()?)?);
                        grid.points.push([x, y]);
                    }
                }
                "CELLS" => {
                    let n: usize = num(&next()?)?;
                    let _size = next()?;
                    for _ in 0..n {
                        let k: usize = num(&next()?)?;
                        if k != 8 {
                            return Err(format!("cell with {k} nodes; only 8-node quads are supported"));
                        }
                        let mut c = [0; 8];
                        for v in &mut c {
                            *v = num(&next()?)?;
                        }
                        grid.cells.push(c);
                    }
                }
                "CELL_TYPES" => {
                    let n: usize = num(&next()?)?;
                    for _ in 0..n {
                        let t: u8 = num(&next()?)?;
                        if t != CELL_TYPE {
                            return Err(format!("cell type {t}; expected {CELL_TYPE}"));
                        }
                    }
                }
                "CELL_DATA" => {
                    let _n = next()?;
                    section = "cell";
                }
                "POINT_DATA" => {
                    let _n = next()?;
                    section = "point";
                }
                "SCALARS" => {
                    let name = next()?;
                    let _ty = next()?;
                    let comps = next()?;
                    if comps != "1" {
                        return Err(format!("array {name} has {comps} components"));
                    }
                    if next()? != "LOOKUP_TABLE" {
                        return Err(format!("array {name} lacks a lookup table line"));
                    }
                    let _table = next()?;
                    let n = if section == "cell" { grid.cells.len() } else { grid.points.len() };
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..n {
                        v.push(num(&next()?)?);
                    }
                    if section == "cell" {
                        grid.cell_scalars.push((name, v));
                    } else {
                        grid.point_scalars.push((name, v));
                    }
                }
                "VECTORS" => {
                    let name = next()?;
                    let _ty = next()?;
                    let mut v = Vec::with_capacity(grid.points.len());
                    for _ in 0..grid.points.len() {
                        let (x, y, _z): (f64, f64, f64) = (num(&next()?)?, num(&next()?)?, num(&next()?)?);
                        v.push([x, y]);
                    }
                    grid.point_vectors.push((name, v));
                }
                other => return Err(format!("unexpected token '{other}'")),
            }
        }
        grid.check().map_err(|e| e.to_string())?;
        Ok(grid)
    }
}

fn scalars(s: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for x in v {
        let _ = writeln!(s, "{x}");
    }
}

/// Field frame of a simulation state: nodal u, φ and C (ppm); cell means of
/// σ_h, equivalent plastic strain, history and effective diffusivity.
pub fn frame_grid(mesh: &Mesh, state: &SimState, params: &MaterialParams) -> Grid {
    let nqp = mesh.points_per_element();
    let mut sigma_h = Vec::with_capacity(mesh.n_elements());
    let mut eps_p = Vec::with_capacity(mesh.n_elements());
    let mut history = Vec::with_capacity(mesh.n_elements());
    let mut d_eff = Vec::with_capacity(mesh.n_elements());
    for (e, conn) in mesh.elements.iter().enumerate() {
        let pts = &state.points[e * nqp..(e + 1) * nqp];
        let mean = |f: &dyn Fn(usize) -> f64| (0..nqp).map(f).sum::<f64>() / nqp as f64;
        sigma_h.push(mean(&|k| hydrostatic_stress(&pts[k].stress)));
        eps_p.push(mean(&|k| pts[k].eq_plastic_strain));
        history.push(mean(&|k| pts[k].history));
        let quads = mesh.quad_points(e);
        d_eff.push(mean(&|k| {
            let phi: f64 = conn.iter().enumerate().map(|(a, &n)| quads[k].n[a] * state.phi[n]).sum();
            effective_diffusivity(phi.clamp(0.0, 1.0), params)
        }));
    }
    let displacement = state.u.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Grid {
        title: format!("hefrac frame step {} t = {} h", state.step, state.time / 3600.0),
        time: state.time,
        cycle: state.step,
        point_vectors: vec![("displacement".into(), displacement)],
        point_scalars: vec![
            ("phi".into(), state.phi.clone()),
            ("conc_ppm".into(), state.conc.iter().map(|&c| molar_to_ppm(c)).collect()),
        ],
        cell_scalars: vec![
            ("sigma_h".into(), sigma_h),
            ("eq_plastic_strain".into(), eps_p),
            ("history".into(), history),
            ("d_eff".into(), d_eff),
        ],
        ..Grid::from_mesh(mesh)
    }
}

/// `frame_00012_t0024.5000h.vtk`
pub fn frame_name(index: usize, seconds: f64) -> String {
    format!("frame_{index:05}_t{:09.4}h.vtk", seconds / 3600.0)
}

pub fn frame_path(dir: &Path, index: usize, seconds: f64) -> PathBuf {
    dir.join(frame_name(index, seconds))
}
