//! Fixtures shared by the benchmarks.

use propset_core::catalog;
use propset_core::pde::{self, DiscreteOperator};
use propset_core::{CellSet, DomainSpec, Grid, OperatorSpec};

pub struct Case {
    pub name: &'static str,
    pub op: OperatorSpec,
    pub dom: DomainSpec,
    pub x0: Vec<f64>,
}

pub fn heat() -> Case {
    Case {
        name: "heat",
        op: catalog::heat_form(),
        dom: catalog::unit_square(),
        x0: vec![0.0, 0.0],
    }
}

pub fn ou() -> Case {
    Case {
        name: "ou",
        op: catalog::ornstein_uhlenbeck(),
        dom: catalog::ou_domain(-1.0, 1.0, 1.0),
        x0: vec![0.0, 0.0],
    }
}

pub fn mumford() -> Case {
    Case {
        name: "mumford",
        op: catalog::mumford(),
        dom: catalog::mumford_domain(1.5 * std::f64::consts::PI, 1.0),
        x0: vec![0.0, 0.0, 0.0],
    }
}

impl Case {
    pub fn grid(&self, h: f64) -> Grid {
        Grid::anchored(&self.dom, h, &self.x0).expect("bench grid")
    }

    /// Discretization, node of `x0` and the cells of a box `K` around `center`.
    pub fn discrete(&self, h: f64, center: &[f64], half: f64) -> (DiscreteOperator, usize, CellSet) {
        let l = pde::discretize(&self.op, &self.grid(h)).expect("bench discretization");
        let node = l.node_at(&self.x0).expect("x0 is a node");
        let bounds: Vec<(f64, f64)> = center.iter().map(|c| (c - half, c + half)).collect();
        let k = pde::cells_in_box(l.grid(), &bounds);
        (l, node, k)
    }
}
