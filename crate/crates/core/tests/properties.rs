//! Randomized invariants across operator families and domains.

use proptest::prelude::*;
use propset_core::operator::Block;
use propset_core::path::{mumford_path, ou_path_in, validate, CHAIN_TOL};
use propset_core::pde::{self, SolveMethod};
use propset_core::reach::{compute, ReachConfig};
use propset_core::{parse, DomainSpec, Grid, OperatorSpec};

/// `a ∂₁² + (α x₁ + β) ∂₂`
fn kolmogorov(a: f64, alpha: f64, beta: f64) -> OperatorSpec {
    let c = |s: String| parse(&s, 2).unwrap();
    OperatorSpec::diagonal(
        vec![c(format!("{a}")), c("0".into())],
        vec![c("0".into()), c(format!("{alpha}*x1 + {beta}"))],
    )
    .unwrap()
}

fn arb_box() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.5f64..-0.4, 0.4f64..1.5), 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inside_centers_satisfy_the_domain(
        bounds in prop::collection::vec((-2.0f64..-0.3, 0.3f64..2.0), 1..4),
        ball in prop::option::of(0.3f64..1.2),
        h in 0.08f64..0.3,
    ) {
        let mut blocks: Vec<Block> = bounds.iter().map(|&(lo, hi)| Block::Interval { lo, hi }).collect();
        if let Some(radius) = ball {
            blocks.push(Block::Ball { center: vec![0.0, 0.0], radius });
        }
        let dom = DomainSpec::new(blocks).unwrap();
        let grid = Grid::new(&dom, h).unwrap();
        prop_assert!(grid.counts().iter().all(|&c| c >= 3));
        prop_assert!(grid.inside_count() > 0);
        for cell in grid.inside_cells() {
            prop_assert!(dom.contains(&grid.center(cell)));
        }
    }

    #[test]
    fn auto_dt_keeps_hops_within_two_cells(
        a in 0.2f64..3.0, alpha in -3.0f64..3.0, beta in -2.0f64..2.0, h in 0.02f64..0.2,
    ) {
        let op = kolmogorov(a, alpha, beta);
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let grid = Grid::new(&dom, h).unwrap();
        let dt = ReachConfig::auto_dt(&op, &grid);
        let vmax = dom
            .sample_points(50)
            .iter()
            .map(|p| a.max((alpha * p[0] + beta).abs()))
            .fold(0.0, f64::max);
        prop_assert!(dt * vmax <= 2.0 * h * (1.0 + 1e-12), "dt {dt} vmax {vmax}");
    }

    #[test]
    fn parent_chains_end_at_the_start(
        alpha in -2.0f64..2.0, beta in -1.0f64..1.0, bounds in arb_box(),
        x0 in prop::collection::vec(-0.3f64..0.3, 2),
    ) {
        let op = kolmogorov(1.0, alpha, beta);
        let dom = DomainSpec::boxed(&bounds).unwrap();
        let grid = Grid::anchored(&dom, 0.1, &x0).unwrap();
        let rs = compute(&op, &grid, &x0, &ReachConfig::default()).unwrap();
        let start = rs.start_cell();
        prop_assert!(rs.is_reached(start));
        prop_assert!(rs.parent(start).is_none());
        for cell in rs.cells().iter() {
            prop_assert!(grid.is_inside(cell));
            let mut c = cell;
            let mut steps = 0;
            while let Some(hop) = rs.parent(c) {
                c = hop.from;
                steps += 1;
                prop_assert!(steps <= rs.cells().len());
            }
            prop_assert_eq!(c, start);
        }
    }

    #[test]
    fn closed_form_ou_paths_are_admissible(
        lo in -1.0f64..0.6, width in 0.4f64..1.5, b in 0.3f64..1.5,
        f0 in 0.05f64..0.95, g0 in -0.95f64..0.95, f1 in 0.05f64..0.95, g1 in -0.95f64..0.95,
    ) {
        let hi = lo + width;
        let x0 = [lo + f0 * width, g0 * b];
        let z = [lo + f1 * width, g1 * b];
        let op = kolmogorov(1.0, 1.0, 0.0);
        let dom = DomainSpec::boxed(&[(lo, hi), (-b, b)]).unwrap();
        match ou_path_in((lo, hi), b, &x0, &z, 1e-3) {
            Ok(p) => {
                let r = validate(&p, &op, &dom, 1e-3);
                prop_assert!(r.passed(), "{r:?}");
                prop_assert!(r.chained);
                prop_assert!(p.segments().iter().all(|s| s.mu >= 0.0));
                let first = &p.samples()[0].x;
                prop_assert!(first.iter().zip(&x0).all(|(a, b)| (a - b).abs() <= CHAIN_TOL));
                prop_assert!(r.endpoint_error < 1e-9);
            }
            // only a target on the wrong side of a one-signed strip is refused
            Err(_) => prop_assert!((z[1] > x0[1] && hi <= 0.0) || (z[1] < x0[1] && lo >= 0.0)),
        }
    }

    #[test]
    fn closed_form_mumford_paths_are_admissible(
        z1 in -4.6f64..4.6, rho in 0.0f64..0.95, theta in -3.1f64..3.1,
    ) {
        let a = 1.5 * std::f64::consts::PI;
        let z = [z1, rho * theta.sin(), rho * theta.cos()];
        let p = mumford_path(a, 1.0, &z, 1e-3).unwrap();
        let op = propset_core::catalog::mumford();
        let dom = propset_core::catalog::mumford_domain(a, 1.0);
        let r = validate(&p, &op, &dom, 1e-3);
        prop_assert!(r.passed(), "{r:?}");
        prop_assert!(r.endpoint_error < 1e-9);
    }

    #[test]
    fn solutions_keep_data_and_obey_the_maximum_principle(
        alpha in -2.0f64..2.0, beta in -1.0f64..1.0, k1 in -1.0f64..1.0, k2 in -1.0f64..1.0,
    ) {
        let op = kolmogorov(1.0, alpha, beta);
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let grid = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let l = pde::discretize(&op, &grid).unwrap();
        let g = l.boundary_values(|x| (k1 * x[0] + k2 * x[1]).sin());
        for method in [SolveMethod::Jacobi, SolveMethod::Direct] {
            let u = pde::solve_with(&l, &g, 1e-10, 1_000_000, method).unwrap();
            prop_assert!(u.residual <= 1e-10);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (&k, &gk) in l.boundary_nodes().iter().zip(&g) {
                prop_assert_eq!(u.values[k], gk);
                lo = lo.min(gk);
                hi = hi.max(gk);
            }
            for &k in l.interior_nodes() {
                prop_assert!(u.values[k] >= lo - 1e-9 && u.values[k] <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn harmonic_measures_are_probabilities(
        alpha in -2.0f64..2.0, beta in -1.0f64..1.0, pick in 0usize..1000,
    ) {
        let op = kolmogorov(1.0, alpha, beta);
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let grid = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let l = pde::discretize(&op, &grid).unwrap();
        let node = l.interior_nodes()[pick % l.interior_nodes().len()];
        let row = pde::harmonic_measure(&l, node).unwrap();
        prop_assert!(row.weights.iter().all(|&w| w >= -1e-10));
        prop_assert!((row.sum - 1.0).abs() <= 1e-8, "sum {}", row.sum);
    }

    #[test]
    fn ratio_is_at_least_one_when_k_holds_x0(
        alpha in -2.0f64..2.0, beta in -1.0f64..1.0, half in 0.05f64..0.4,
    ) {
        let op = kolmogorov(1.0, alpha, beta);
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let grid = Grid::anchored(&dom, 0.1, &[0.0, 0.0]).unwrap();
        let l = pde::discretize(&op, &grid).unwrap();
        let x0 = l.node_at(&[0.0, 0.0]).unwrap();
        let k = pde::cells_in_box(l.grid(), &[(-half, half), (-half, half)]);
        prop_assert!(k.contains(l.cell(x0)));
        let est = pde::harnack_ratio(&l, x0, &k, 1e-12).unwrap();
        prop_assert!(est.ratio.value() >= 1.0 - 1e-12);
    }

    #[test]
    fn barriers_are_positive_supersolutions(
        a in 0.3f64..2.0, alpha in -2.0f64..2.0, beta in -1.0f64..1.0,
    ) {
        let op = kolmogorov(a, alpha, beta);
        let dom = DomainSpec::boxed(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let bp = op.barrier_params(&dom, 1000).unwrap();
        let grid = Grid::anchored(&dom, 0.05, &[0.0, 0.0]).unwrap();
        let l = pde::discretize(&op, &grid).unwrap();
        let r = pde::check_barrier(&l, &bp);
        prop_assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn domains_reject_bad_factors(lo in -1.0f64..1.0, r in -1.0f64..0.0) {
        let empty = DomainSpec::new(vec![Block::Interval { lo, hi: lo }]);
        let flat = DomainSpec::new(vec![Block::Ball { center: vec![0.0], radius: r }]);
        prop_assert!(empty.is_err());
        prop_assert!(flat.is_err());
    }
}
