//! Piano domain embedded in an extended square `[0, L]²`.
//!
//! The physical domain `Ω` is the square with one corner triangle removed by a
//! straight cut from `(0, a)` on the left edge to `(b, L)` on the top edge. The
//! removed triangle `Ω_e` is simulated with the same PDE; the extended solution
//! is read back on the cut as the physical actuation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::cn::{CrankNicolson, SparseOperator};
use super::rect::{l2_squared_masked, ControlledEdge, Field2D, RectGrid, RectStepper};
use crate::kernels::PlantParams;
use crate::{Error, Result};

/// Grid node as `(i, j)`.
type Node = (usize, usize);

/// Straight cut from `start = (0, a)` to `end = (b, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PianoGeometry {
    pub extent: f64,
    /// `None` means `Ω` is the whole square.
    pub cut: Option<Cut>,
}

impl PianoGeometry {
    /// Unit square with the upper-left triangle cut from `(0, ½)` to `(½, 1)`.
    pub fn standard() -> Self {
        PianoGeometry {
            extent: 1.0,
            cut: Some(Cut {
                start: [0.0, 0.5],
                end: [0.5, 1.0],
            }),
        }
    }

    pub fn full(extent: f64) -> Self {
        PianoGeometry { extent, cut: None }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.extent;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::config(format!("piano extent must be > 0, got {l}")));
        }
        if let Some(cut) = self.cut {
            let [sx, sy] = cut.start;
            let [ex, ey] = cut.end;
            if sx != 0.0 || !(sy > 0.0 && sy < l) {
                return Err(Error::config(format!(
                    "cut must start on the left edge strictly inside (0, {l}), got ({sx}, {sy})"
                )));
            }
            if ey != l || !(ex > 0.0 && ex < l) {
                return Err(Error::config(format!(
                    "cut must end on the top edge strictly inside (0, {l}), got ({ex}, {ey})"
                )));
            }
        }
        Ok(())
    }

    /// Vertices of `Ω`, counter-clockwise.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        let l = self.extent;
        match self.cut {
            Some(c) => vec![[0.0, 0.0], [l, 0.0], [l, l], c.end, c.start],
            None => vec![[0.0, 0.0], [l, 0.0], [l, l], [0.0, l]],
        }
    }

    /// Signed distance-like side test: positive towards the removed corner.
    fn cut_side(&self, x: f64, y: f64) -> f64 {
        match self.cut {
            None => f64::NEG_INFINITY,
            Some(c) => {
                let (dx, dy) = (c.end[0] - c.start[0], c.end[1] - c.start[1]);
                // the removed corner (0, L) lies on the left of start → end
                dx * (y - c.start[1]) - dy * (x - c.start[0])
            }
        }
    }

    fn beyond_cut(&self, x: f64, y: f64) -> bool {
        self.cut_side(x, y) > 1e-14 * self.extent
    }

    fn on_or_beyond_cut(&self, x: f64, y: f64) -> bool {
        self.cut_side(x, y) >= -1e-12 * self.extent * self.extent
    }
}

/// Even-odd ray casting.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// A grid link from an `Ω` node to a node outside `Ω` that meets the cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub node: (usize, usize),
    pub neighbour: (usize, usize),
    /// Fraction of the link, measured from `node`, at which the cut is met.
    pub theta: f64,
    pub point: [f64; 2],
    /// Arclength along the cut from its start.
    pub s: f64,
}

/// Extended-square grid together with the `Ω`/`Ω_e` partition.
#[derive(Debug, Clone)]
pub struct MaskedGrid {
    pub parent: RectGrid,
    pub geometry: PianoGeometry,
    /// Per interior node: `true` in `Ω`.
    pub mask: Vec<bool>,
    /// Per grid node (boundary included), row-major over `(nx+2) × (ny+2)`:
    /// `true` when the node lies in the closure of `Ω`.
    closure: Vec<bool>,
    pub crossings: Vec<Crossing>,
}

fn segment_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<(f64, f64)> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    let ap = [a[0] - p[0], a[1] - p[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    let tol = 1e-12;
    if t > tol && t <= 1.0 + tol && (-tol..=1.0 + tol).contains(&u) {
        Some((t.min(1.0), u.clamp(0.0, 1.0)))
    } else {
        None
    }
}

impl MaskedGrid {
    pub fn new(parent: RectGrid, geometry: PianoGeometry) -> Result<Self> {
        geometry.validate()?;
        if (parent.extent - geometry.extent).abs() > 1e-12 * geometry.extent {
            return Err(Error::config(format!(
                "grid extent {} differs from piano extent {}",
                parent.extent, geometry.extent
            )));
        }
        let poly = geometry.polygon();
        let mut mask = vec![false; parent.n_interior()];
        for j in 1..=parent.ny {
            for i in 1..=parent.nx {
                // nodes sitting on the cut belong to the virtual region, so
                // every link leaving Ω meets the cut strictly past its origin
                let (x, y) = (parent.x(i), parent.y(j));
                mask[parent.index(i, j)] =
                    point_in_polygon(&poly, x, y) && !geometry.on_or_beyond_cut(x, y);
            }
        }
        let width = parent.nx + 2;
        let mut closure = vec![false; width * (parent.ny + 2)];
        for j in 0..=parent.ny + 1 {
            for i in 0..=parent.nx + 1 {
                closure[j * width + i] = if parent.is_interior(i, j) {
                    mask[parent.index(i, j)]
                } else {
                    !geometry.beyond_cut(parent.x(i), parent.y(j))
                };
            }
        }
        let mut grid = MaskedGrid {
            parent,
            geometry,
            mask,
            closure,
            crossings: Vec::new(),
        };
        grid.crossings = grid.find_crossings();
        Ok(grid)
    }

    pub fn in_omega(&self, i: usize, j: usize) -> bool {
        self.parent.is_interior(i, j) && self.mask[self.parent.index(i, j)]
    }

    pub fn in_closure(&self, i: usize, j: usize) -> bool {
        self.closure[j * (self.parent.nx + 2) + i]
    }

    /// Interior `Ω_e` nodes adjacent to `Ω`.
    pub fn interface_nodes(&self) -> Vec<(usize, usize)> {
        let mut nodes: Vec<(usize, usize)> = self
            .crossings
            .iter()
            .map(|c| c.neighbour)
            .filter(|&(i, j)| self.parent.is_interior(i, j))
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    fn find_crossings(&self) -> Vec<Crossing> {
        let Some(cut) = self.geometry.cut else {
            return Vec::new();
        };
        let g = &self.parent;
        let length =
            ((cut.end[0] - cut.start[0]).powi(2) + (cut.end[1] - cut.start[1]).powi(2)).sqrt();
        let mut out = Vec::new();
        for j in 1..=g.ny {
            for i in 1..=g.nx {
                if !self.in_omega(i, j) {
                    continue;
                }
                for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                    if self.in_omega(a, b) {
                        continue;
                    }
                    let p = [g.x(i), g.y(j)];
                    let q = [g.x(a), g.y(b)];
                    let hit = segment_intersection(p, q, cut.start, cut.end);
                    let (theta, u) = match hit {
                        Some(h) => h,
                        // interior Ω_e neighbour sitting on the cut line
                        None if g.is_interior(a, b) => (1.0, {
                            let d = [q[0] - cut.start[0], q[1] - cut.start[1]];
                            ((d[0] * d[0] + d[1] * d[1]).sqrt() / length).clamp(0.0, 1.0)
                        }),
                        None => continue,
                    };
                    let point = [p[0] + theta * (q[0] - p[0]), p[1] + theta * (q[1] - p[1])];
                    out.push(Crossing {
                        node: (i, j),
                        neighbour: (a, b),
                        theta,
                        point,
                        s: u * length,
                    });
                }
            }
        }
        out.sort_by(|x, y| {
            x.s.total_cmp(&y.s)
                .then(x.node.cmp(&y.node))
                .then(x.neighbour.cmp(&y.neighbour))
        });
        out
    }
}

/// Dirichlet data read off the extended solution along the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

impl InterfaceTrace {
    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }
}

/// Linear interpolation of the extended solution at every cut crossing.
pub fn interface_trace(grid: &MaskedGrid, field: &Field2D) -> InterfaceTrace {
    let (s, values) = grid
        .crossings
        .iter()
        .map(|c| {
            let a = field.value(c.node.0, c.node.1);
            let b = field.value(c.neighbour.0, c.neighbour.1);
            (c.s, (1.0 - c.theta) * a + c.theta * b)
        })
        .unzip();
    InterfaceTrace { s, values }
}

/// Advances the whole extended square with the ordinary square stencil; real
/// and virtual nodes move together and the mask plays no role.
pub fn step_masked(
    stepper: &RectStepper,
    grid: &MaskedGrid,
    state: &mut Field2D,
    profile: &[f64],
) -> Result<()> {
    if *stepper.grid() != grid.parent {
        return Err(Error::config(
            "stepper grid differs from the masked grid's parent",
        ));
    }
    stepper.step(state, profile)
}

/// Trapezoid `L²` norm restricted to the closure of `Ω`.
pub fn masked_l2_norm(grid: &MaskedGrid, field: &Field2D) -> f64 {
    l2_squared_masked(field, |i, j| grid.in_closure(i, j)).sqrt()
}

/// Standalone simulation on `Ω` only, driven by Dirichlet data on the cut
/// (Shortley–Weller stencil at cut-adjacent nodes) and on the controlled edge.
///
/// Boundary inputs are ordered as the grid's crossings, followed by the
/// controlled-edge profile.
#[derive(Debug, Clone)]
pub struct OmegaReplay {
    grid: MaskedGrid,
    edge: ControlledEdge,
    nodes: Vec<(usize, usize)>,
    cn: CrankNicolson,
}

impl OmegaReplay {
    pub fn new(grid: &MaskedGrid, edge: ControlledEdge, p: &PlantParams, dt: f64) -> Result<Self> {
        let g = grid.parent;
        let nodes: Vec<(usize, usize)> = (1..=g.ny)
            .flat_map(|j| (1..=g.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| grid.in_omega(i, j))
            .collect();
        if nodes.is_empty() {
            return Err(Error::config("Ω contains no grid nodes"));
        }
        let local: HashMap<(usize, usize), usize> =
            nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
        let crossing_of: HashMap<(Node, Node), usize> = grid
            .crossings
            .iter()
            .enumerate()
            .map(|(k, c)| ((c.node, c.neighbour), k))
            .collect();
        let n_cross = grid.crossings.len();
        let mut op = SparseOperator::new(nodes.len(), n_cross + edge.len(&g));
        let eps = p.epsilon();

        enum Side {
            Unknown(usize),
            Input(usize),
            Zero,
        }
        let classify = |node: (usize, usize), nb: (usize, usize), h: f64| -> (f64, Side) {
            if let Some(&k) = crossing_of.get(&(node, nb)) {
                return (grid.crossings[k].theta * h, Side::Input(k));
            }
            if let Some(&k) = local.get(&nb) {
                return (h, Side::Unknown(k));
            }
            let slot = match edge {
                ControlledEdge::East if nb.0 == g.nx + 1 && (1..=g.ny).contains(&nb.1) => {
                    Some(nb.1 - 1)
                }
                ControlledEdge::North if nb.1 == g.ny + 1 && (1..=g.nx).contains(&nb.0) => {
                    Some(nb.0 - 1)
                }
                _ => None,
            };
            match slot {
                Some(s) => (h, Side::Input(n_cross + s)),
                None => (h, Side::Zero),
            }
        };

        for (row, &(i, j)) in nodes.iter().enumerate() {
            op.add(row, row, p.lambda());
            let axes = [
                ((i - 1, j), (i + 1, j), g.hx()),
                ((i, j - 1), (i, j + 1), g.hy()),
            ];
            for (minus, plus, h) in axes {
                let (hm, side_m) = classify((i, j), minus, h);
                let (hp, side_p) = classify((i, j), plus, h);
                let cm = 2.0 * eps / (hm * (hm + hp));
                let cp = 2.0 * eps / (hp * (hm + hp));
                op.add(row, row, -(cm + cp));
                for (side, coef) in [(side_m, cm), (side_p, cp)] {
                    match side {
                        Side::Unknown(k) => op.add(row, k, coef),
                        Side::Input(k) => op.add_input(row, k, coef),
                        Side::Zero => {}
                    }
                }
            }
        }
        Ok(OmegaReplay {
            grid: grid.clone(),
            edge,
            nodes,
            cn: CrankNicolson::new(op, dt)?,
        })
    }

    pub fn n_unknowns(&self) -> usize {
        self.nodes.len()
    }

    /// Restriction of an extended field to the `Ω` unknowns.
    pub fn restrict(&self, field: &Field2D) -> Vec<f64> {
        self.nodes.iter().map(|&(i, j)| field.value(i, j)).collect()
    }

    /// Boundary-input vector from a cut trace and a controlled-edge profile.
    pub fn inputs(&self, trace: &InterfaceTrace, edge_profile: &[f64]) -> Result<Vec<f64>> {
        if trace.len() != self.grid.crossings.len() {
            return Err(Error::config(format!(
                "trace has {} samples, the cut has {} crossings",
                trace.len(),
                self.grid.crossings.len()
            )));
        }
        if edge_profile.len() != self.edge.len(&self.grid.parent) {
            return Err(Error::config("edge profile length does not match the grid"));
        }
        let mut v = trace.values.clone();
        v.extend_from_slice(edge_profile);
        Ok(v)
    }

    pub fn step(&self, u: &mut [f64], inputs_old: &[f64], inputs_new: &[f64]) -> Result<()> {
        self.cn.step(u, inputs_old, inputs_new)
    }

    /// As [`step`](Self::step) with two backward Euler half steps.
    pub fn damped_step(&self, u: &mut [f64], inputs_old: &[f64], inputs_new: &[f64]) -> Result<()> {
        self.cn.damped_step(u, inputs_old, inputs_new)
    }

    /// `(‖u − v|_Ω‖, ‖v|_Ω‖)` in the unweighted Euclidean norm over the `Ω`
    /// unknowns.
    pub fn discrepancy_parts(&self, u: &[f64], field: &Field2D) -> (f64, f64) {
        let reference = self.restrict(field);
        let num: f64 = u
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = reference.iter().map(|b| b * b).sum();
        (num.sqrt(), den.sqrt())
    }

    /// `‖u − v|_Ω‖ / ‖v|_Ω‖` over the `Ω` unknowns.
    pub fn relative_discrepancy(&self, u: &[f64], field: &Field2D) -> f64 {
        let (num, den) = self.discrepancy_parts(u, field);
        if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    }
}
