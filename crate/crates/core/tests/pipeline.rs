//! Library-level runs through the public API on coarse grids.

use pdebs_core::actuation::min_modes_square;
use pdebs_core::control::{control_square_full, LawKind};
use pdebs_core::experiments::{run_scenario, ActuatorSpec, Geometry, LawSpec, Scenario};
use pdebs_core::kernels::{KernelGeometry, KernelTable, PlantParams};
use pdebs_core::sim::{ControlledEdge, Field2D, RectGrid, RectStepper};

fn plant(lambda: f64, c: f64) -> PlantParams {
    PlantParams::new(1.0, lambda, c).unwrap()
}

#[test]
fn hand_rolled_loop_decays() {
    // the same closed loop the scenario runner builds, assembled by hand
    let p = plant(12.0, 1.0);
    let grid = RectGrid::unit(24, 24).unwrap();
    let edge = ControlledEdge::East;
    let pi = std::f64::consts::PI;
    let mut u = Field2D::from_fn(grid, edge, |x, y| (pi * x).sin() * (pi * y).sin());
    let stepper = RectStepper::new(grid, edge, &p, 1e-3).unwrap();
    let table =
        KernelTable::on_abscissae(&p, KernelGeometry::Square { extent: 1.0 }, grid.xs()).unwrap();
    let start = pdebs_core::sim::l2_norm(&u);
    for _ in 0..3000 {
        let profile = control_square_full(&u, &table).unwrap();
        stepper.step(&mut u, &profile).unwrap();
    }
    let end = pdebs_core::sim::l2_norm(&u);
    // rate at least 0.9 over t = 3, allowing a transient factor of 3
    assert!(
        end < 3.0 * start * (-0.9 * 3.0f64).exp(),
        "{start} -> {end}"
    );
}

#[test]
fn open_loop_grows_where_closed_loop_decays() {
    let p = plant(25.0, 2.0);
    let mut s = Scenario::new(
        "ordering",
        p,
        Geometry::Square {
            extent: 1.0,
            nx: 20,
            ny: 20,
        },
    );
    s.compare_open_loop = true;
    let r = run_scenario(&s).unwrap();
    let open = r.open_loop.expect("open-loop fit");
    assert!(
        r.rate.unwrap() > 0.0 && open.rate < 0.0,
        "{:?} {open:?}",
        r.rate
    );
    assert!(r.pass);
}

#[test]
fn findim_law_with_fewer_actuators_than_needed_is_rejected() {
    let p = plant(25.0, 1.0);
    assert_eq!(min_modes_square(&p).n, 2);
    let mut s = Scenario::new(
        "underactuated",
        p,
        Geometry::Square {
            extent: 1.0,
            nx: 16,
            ny: 16,
        },
    );
    s.law = LawSpec::new(LawKind::SquareFindim);
    s.law.actuators = Some(ActuatorSpec::Piecewise { m: 1 });
    let err = run_scenario(&s).unwrap_err().to_string();
    assert!(err.contains("underactuated"), "{err}");
}
