//! Mapping of nodal field components to equation numbers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Where a nodal component lives in the global system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Unknown with the given equation number. Several slots may share one
    /// equation (rigid-body ties).
    Free(usize),
    /// Prescribed value, eliminated from the system.
    Fixed,
}

/// Equation numbering for one field with `ncomp` components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    ncomp: usize,
    slots: Vec<Slot>,
    n_eq: usize,
    prescribed: Vec<f64>,
    fixed: Vec<usize>,
}

impl DofMap {
    pub fn builder(mesh: &Mesh, ncomp: usize) -> DofMapBuilder<'_> {
        DofMapBuilder {
            mesh,
            ncomp,
            fixed: vec![None; mesh.n_nodes() * ncomp],
            tied: Vec::new(),
        }
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Number of free equations.
    pub fn n_eq(&self) -> usize {
        self.n_eq
    }

    /// Total number of slots (nodes × components).
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    pub fn slot(&self, node: usize, comp: usize) -> Slot {
        self.slots[node * self.ncomp + comp]
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Slot indices with prescribed values.
    pub fn fixed_slots(&self) -> &[usize] {
        &self.fixed
    }

    pub fn prescribed(&self, slot: usize) -> f64 {
        self.prescribed[slot]
    }

    /// Changes the value of every prescribed slot.
    pub fn set_all_prescribed(&mut self, value: f64) {
        for &s in &self.fixed {
            self.prescribed[s] = value;
        }
    }

    pub fn set_prescribed(&mut self, node: usize, comp: usize, value: f64) -> Result<()> {
        let s = node * self.ncomp + comp;
        match self.slots.get(s) {
            Some(Slot::Fixed) => {
                self.prescribed[s] = value;
                Ok(())
            }
            _ => Err(Error::Config(format!("node {node} component {comp} is not constrained"))),
        }
    }

    /// Writes prescribed values into a slot-indexed field vector.
    pub fn impose(&self, field: &mut [f64]) {
        for &s in &self.fixed {
            field[s] = self.prescribed[s];
        }
    }

    /// Equation numbers of an element's slots (`None` when fixed), in
    /// node-major order.
    pub fn element_equations(&self, conn: &[usize; 8], out: &mut [Option<usize>]) {
        for (a, &n) in conn.iter().enumerate() {
            for c in 0..self.ncomp {
                out[a * self.ncomp + c] = match self.slots[n * self.ncomp + c] {
                    Slot::Free(eq) => Some(eq),
                    Slot::Fixed => None,
                };
            }
        }
    }

    /// Gathers equation values into a slot vector (free slots only).
    pub fn scatter_solution(&self, eq_values: &[f64], field: &mut [f64]) {
        for (s, slot) in self.slots.iter().enumerate() {
            if let Slot::Free(eq) = *slot {
                field[s] = eq_values[eq];
            }
        }
    }

    /// Adds equation increments to every free slot.
    pub fn add_increment(&self, eq_values: &[f64], field: &mut [f64]) {
        for (s, slot) in self.slots.iter().enumerate() {
            if let Slot::Free(eq) = *slot {
                field[s] += eq_values[eq];
            }
        }
    }

    /// Sums slot values into equations (tied slots accumulate).
    pub fn gather_to_equations(&self, slot_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_eq];
        for (s, slot) in self.slots.iter().enumerate() {
            if let Slot::Free(eq) = *slot {
                out[eq] += slot_values[s];
            }
        }
        out
    }
}

pub struct DofMapBuilder<'m> {
    mesh: &'m Mesh,
    ncomp: usize,
    fixed: Vec<Option<f64>>,
    tied: Vec<(usize, Vec<usize>)>,
}

impl DofMapBuilder<'_> {
    pub fn fix(mut self, node: usize, comp: usize, value: f64) -> Self {
        self.fixed[node * self.ncomp + comp] = Some(value);
        self
    }

    pub fn fix_nodes(mut self, nodes: &[usize], comp: usize, value: f64) -> Self {
        for &n in nodes {
            self.fixed[n * self.ncomp + comp] = Some(value);
        }
        self
    }

    /// Ties component `comp` of all `nodes` to one shared unknown.
    pub fn tie(mut self, nodes: &[usize], comp: usize) -> Self {
        self.tied.push((comp, nodes.to_vec()));
        self
    }

    /// Numbers free slots following the mesh node order; tied groups come
    /// last. Fails if a slot is both fixed and tied or tied twice.
    pub fn build(self) -> Result<DofMap> {
        let nslots = self.fixed.len();
        let mut group_of = vec![usize::MAX; nslots];
        for (g, (comp, nodes)) in self.tied.iter().enumerate() {
            for &n in nodes {
                let s = n * self.ncomp + comp;
                if self.fixed[s].is_some() {
                    return Err(Error::Config(format!(
                        "node {n} component {comp} is both prescribed and tied"
                    )));
                }
                if group_of[s] != usize::MAX {
                    return Err(Error::Config(format!("node {n} component {comp} is tied twice")));
                }
                group_of[s] = g;
            }
        }
        let mut slots = vec![Slot::Fixed; nslots];
        let mut n_eq = 0;
        for &node in self.mesh.node_order() {
            for c in 0..self.ncomp {
                let s = node * self.ncomp + c;
                if self.fixed[s].is_none() && group_of[s] == usize::MAX {
                    slots[s] = Slot::Free(n_eq);
                    n_eq += 1;
                }
            }
        }
        for g in 0..self.tied.len() {
            let (comp, nodes) = &self.tied[g];
            if nodes.is_empty() {
                continue;
            }
            for &n in nodes {
                slots[n * self.ncomp + comp] = Slot::Free(n_eq);
            }
            n_eq += 1;
        }
        let prescribed: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        let fixed = (0..nslots).filter(|&s| self.fixed[s].is_some()).collect();
        Ok(DofMap {
            ncomp: self.ncomp,
            slots,
            n_eq,
            prescribed,
            fixed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Quadrature;

    fn mesh() -> Mesh {
        Mesh::structured(&[0.0, 1.0, 2.0], &[0.0, 1.0], Quadrature::Reduced).unwrap()
    }

    #[test]
    fn free_and_fixed_partition_slots() {
        let m = mesh();
        let top = m.sets.top.clone();
        let bottom = m.sets.ligament.clone();
        let d = DofMap::builder(&m, 2)
            .fix_nodes(&bottom, 1, 0.0)
            .fix(bottom[0], 0, 0.0)
            .tie(&top, 1)
            .build()
            .unwrap();
        let n_fixed = d.fixed_slots().len();
        let n_free = d.slots().iter().filter(|s| matches!(s, Slot::Free(_))).count();
        assert_eq!(n_fixed + n_free, d.n_slots());
        // tied slots share one equation
        assert_eq!(d.n_eq(), n_free - top.len() + 1);
        let mut eqs: Vec<usize> = d
            .slots()
            .iter()
            .filter_map(|s| match s {
                Slot::Free(e) => Some(*e),
                Slot::Fixed => None,
            })
            .collect();
        eqs.sort_unstable();
        eqs.dedup();
        assert_eq!(eqs, (0..d.n_eq()).collect::<Vec<_>>());
    }

    #[test]
    fn fixed_and_tied_conflict() {
        let m = mesh();
        let top = m.sets.top.clone();
        let r = DofMap::builder(&m, 2).fix(top[0], 1, 0.0).tie(&top, 1).build();
        assert!(r.is_err());
    }
}
