use crate::grid::{
    admittance_from_topology, build_incidence, AdmittanceMatrix, GridTopology, IncidenceMatrix,
};

/// A grid together with its incidence and admittance matrices, built once
/// and shared by the simulator and the diagnosis pipeline.
#[derive(Debug, Clone)]
pub struct GridModel {
    pub grid: GridTopology,
    pub incidence: IncidenceMatrix,
    pub admittance: AdmittanceMatrix,
    pub reactances: Vec<f64>,
}

impl GridModel {
    pub fn new(grid: GridTopology) -> Self {
        let incidence = build_incidence(&grid);
        let admittance = admittance_from_topology(&grid);
        let reactances = grid.reactances();
        GridModel {
            grid,
            incidence,
            admittance,
            reactances,
        }
    }

    pub fn n_buses(&self) -> usize {
        self.grid.n_buses()
    }

    pub fn n_lines(&self) -> usize {
        self.grid.n_lines()
    }
}
