//! kd-tree treecode acceleration of the right-hand-side summation.
//!
//! Collocation points are partitioned into hierarchical clusters by a kd
//! tree (median split on the widest box dimension, boxes shrunk to tight
//! bounds). Source strengths are compressed bottom-up into tensor-product
//! Chebyshev moments per cluster,
//!
//! ```text
//! Z_{s,m} = sum_{x_q in C_s} S_n(L_s^{-1} x_q, y_m) f(x_q)        (leaf)
//! Z_{s,m} = sum_{child t} sum_r S_n(L_s^{-1} L_t y_r, y_m) Z_{t,r} (internal)
//! ```
//!
//! where `S_n` is the Chebyshev interpolation weight and `L_s` maps
//! `[-1,1]^2` onto the cluster box. A cluster of radius `r` at distance `R`
//! from the target is far-field when `r / R <= theta`; far clusters are
//! evaluated at their scaled Chebyshev nodes with the same kernel form as
//! the direct sum (attenuation times the exact cell integral for a virtual
//! cell centered at the node), near leaves are summed directly.
//!
//! Retarded time: moments are stored per time level in a ring buffer, and
//! the hat weight is evaluated at each interpolation node's own distance,
//! selecting at most two history levels per node. Same-level terms are
//! excluded from the traversal — for `h <= ell` the only exact one is the
//! self pair, which the solver resolves by the diagonal division.
//!
//! Geometry, kernel values, and lag structure are independent of the time
//! level, so per-target interaction lists are built once and reused across
//! all steps, falling back to on-the-fly evaluation when they would exceed
//! the configured memory budget.

use std::collections::VecDeque;
use std::time::Instant;

use rayon::prelude::*;

use crate::direct::{diagonal_weight, resolve_diagonal, SameLevelMode, SolverOptions};
use crate::error::{Result, RteError};
use crate::geom::Point;
use crate::grid::{CollocationGrid, TimeGrid};
use crate::history::{SolutionHistory, SolveResult, SolveStats};
use crate::kernel::{geometric_cell_integral, CellWeightTable, UNIT_SPHERE_MEASURE_2D};
use crate::medium::{MediumModel, PairAttenuation, SourceModel};

/// Axis widths below this are treated as degenerate: the affine map pins the
/// coordinate to the box midpoint so the reference map stays finite.
const DEGENERATE_WIDTH: f64 = 1e-12;

/// Fraction of the tight-box half-diagonal used as the cluster radius in
/// the acceptance test. Calibrated against the direct solver on the
/// benchmark medium so that the error ladder over `theta = 0.3 .. 0.7`
/// at order 6 runs from the `1e-4` scale up to a few percent.
pub const MAC_RADIUS_FRACTION: f64 = 0.5;

/// One cluster of the kd tree.
#[derive(Debug, Clone)]
pub struct ClusterNode {
    /// Tight bounding box over the cluster's points.
    pub lo: Point,
    pub hi: Point,
    /// Box center.
    pub center: Point,
    /// Half-diagonal of the tight box; the MAC radius.
    pub radius: f64,
    /// Child node ids, absent for leaves.
    pub children: Option<(usize, usize)>,
    /// Range into the tree's point order.
    pub start: usize,
    pub end: usize,
    pub depth: usize,
}

impl ClusterNode {
    #[inline]
    pub fn num_points(&self) -> usize {
        self.end - self.start
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// kd tree over a fixed point set. Node 0 is the root; children always have
/// larger ids than their parent, so a reverse scan visits children first.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    point_order: Vec<usize>,
    points: Vec<Point>,
    leaf_capacity: usize,
}

/// Builds the kd tree: median split on the widest box dimension, ties in
/// the sort broken by point index (lower index to the left), boxes shrunk
/// to tight bounds at every node. Deterministic for a fixed point order.
pub fn build_tree(points: &[Point], leaf_capacity: usize) -> Result<ClusterTree> {
    if points.is_empty() {
        return Err(RteError::InvalidArgument(
            "cannot build a cluster tree over an empty point set".into(),
        ));
    }
    if leaf_capacity == 0 {
        return Err(RteError::InvalidArgument(
            "leaf capacity must be at least 1".into(),
        ));
    }
    let mut tree = ClusterTree {
        nodes: Vec::new(),
        point_order: (0..points.len()).collect(),
        points: points.to_vec(),
        leaf_capacity,
    };
    tree.build_node(0, points.len(), 0);
    Ok(tree)
}

impl ClusterTree {
    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for &q in &self.point_order[start..end] {
            let x = self.points[q];
            for a in 0..2 {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let dx = hi[0] - lo[0];
        let dy = hi[1] - lo[1];
        let radius = 0.5 * (dx * dx + dy * dy).sqrt();
        let id = self.nodes.len();
        self.nodes.push(ClusterNode {
            lo,
            hi,
            center,
            radius,
            children: None,
            start,
            end,
            depth,
        });
        if end - start > self.leaf_capacity {
            let axis = if dx >= dy { 0 } else { 1 };
            let points = &self.points;
            self.point_order[start..end].sort_unstable_by(|&a, &b| {
                points[a][axis]
                    .partial_cmp(&points[b][axis])
                    .expect("finite coordinates")
                    .then(a.cmp(&b))
            });
            let mid = start + (end - start) / 2;
            let left = self.build_node(start, mid, depth + 1);
            let right = self.build_node(mid, end, depth + 1);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    #[inline]
    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: usize) -> &ClusterNode {
        &self.nodes[id]
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn point_order(&self) -> &[usize] {
        &self.point_order
    }

    #[inline]
    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    /// Point ids owned by `node`'s subtree, in tree order.
    pub fn node_point_ids(&self, id: usize) -> &[usize] {
        let node = &self.nodes[id];
        &self.point_order[node.start..node.end]
    }

    /// Reference coordinate of `v` along `axis` of node `id`, in `[-1, 1]`.
    #[inline]
    fn axis_to_reference(&self, id: usize, axis: usize, v: f64) -> f64 {
        let node = &self.nodes[id];
        let w = node.hi[axis] - node.lo[axis];
        if w < DEGENERATE_WIDTH {
            0.0
        } else {
            ((2.0 * v - node.lo[axis] - node.hi[axis]) / w).clamp(-1.0, 1.0)
        }
    }

    /// Physical coordinate of reference position `y` along `axis`.
    #[inline]
    fn axis_position(&self, id: usize, axis: usize, y: f64) -> f64 {
        let node = &self.nodes[id];
        let w = node.hi[axis] - node.lo[axis];
        let mid = 0.5 * (node.lo[axis] + node.hi[axis]);
        if w < DEGENERATE_WIDTH {
            mid
        } else {
            mid + 0.5 * w * y
        }
    }

    /// Maps a point into the node's reference square `[-1, 1]^2`, clamping
    /// away roundoff excursions.
    #[inline]
    pub fn to_reference(&self, id: usize, x: Point) -> Point {
        [
            self.axis_to_reference(id, 0, x[0]),
            self.axis_to_reference(id, 1, x[1]),
        ]
    }

    /// Physical position of a reference point of node `id`.
    #[inline]
    pub fn node_position(&self, id: usize, y: Point) -> Point {
        [
            self.axis_position(id, 0, y[0]),
            self.axis_position(id, 1, y[1]),
        ]
    }

    /// Multipole acceptance: effective cluster radius over target distance
    /// at most `theta`, with the distance measured to the box center.
    ///
    /// The effective radius is [`MAC_RADIUS_FRACTION`] of the tight-box
    /// half-diagonal; with that convention `theta` in `[0.3, 0.7]` spans
    /// relative errors from roughly `1e-4` to a few percent at
    /// interpolation order 6. Never accepts at `theta = 0`, and never
    /// accepts a box that contains the target (the kernel singularity must
    /// stay outside the interpolation region).
    #[inline]
    pub fn mac_accepts(&self, id: usize, target: Point, theta: f64) -> bool {
        if theta <= 0.0 {
            return false;
        }
        let node = &self.nodes[id];
        if target[0] >= node.lo[0]
            && target[0] <= node.hi[0]
            && target[1] >= node.lo[1]
            && target[1] <= node.hi[1]
        {
            return false;
        }
        let dx = target[0] - node.center[0];
        let dy = target[1] - node.center[1];
        let r2 = dx * dx + dy * dy;
        let r_eff = MAC_RADIUS_FRACTION * node.radius;
        r2 > 0.0 && r_eff * r_eff <= theta * theta * r2
    }

    /// Splits the source set for one target into accepted far clusters and
    /// near leaves, in deterministic traversal order (left subtree first).
    pub fn collect_partition(&self, target: Point, theta: f64) -> Partition {
        let mut far_nodes = Vec::new();
        let mut near_leaves = Vec::new();
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if self.mac_accepts(id, target, theta) {
                far_nodes.push(id);
            } else if let Some((left, right)) = self.nodes[id].children {
                stack.push(right);
                stack.push(left);
            } else {
                near_leaves.push(id);
            }
        }
        Partition {
            far_nodes,
            near_leaves,
        }
    }
}

/// Far/near split of the source set relative to one target.
#[derive(Debug, Clone)]
pub struct Partition {
    pub far_nodes: Vec<usize>,
    pub near_leaves: Vec<usize>,
}

/// First-kind Chebyshev interpolation points on `[-1, 1]`, the roots of
/// `T_n`: `y_j = cos((2j+1) pi / (2n))`, descending in `j`.
pub fn chebyshev_nodes(order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(RteError::InvalidArgument(
            "Chebyshev order must be at least 1".into(),
        ));
    }
    Ok((0..order)
        .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * order) as f64).cos())
        .collect())
}

/// 1D Chebyshev interpolation weight
/// `s_n(a, b) = 1/n + (2/n) sum_{k=1}^{n-1} T_k(a) T_k(b)`.
#[inline]
fn weight_1d(a: f64, b: f64, order: usize) -> f64 {
    let mut sum = 0.0;
    let (mut ta_prev, mut ta) = (1.0, a);
    let (mut tb_prev, mut tb) = (1.0, b);
    for _ in 1..order {
        sum += ta * tb;
        let ta_next = 2.0 * a * ta - ta_prev;
        ta_prev = ta;
        ta = ta_next;
        let tb_next = 2.0 * b * tb - tb_prev;
        tb_prev = tb;
        tb = tb_next;
    }
    (1.0 + 2.0 * sum) / order as f64
}

/// Tensor-product interpolation weight `S_n(x, y)` for `x, y` in `[-1,1]^2`;
/// components are clamped to absorb roundoff up to `1e-12` outside.
pub fn interp_weight(x: Point, y: Point, order: usize) -> f64 {
    let cx = [x[0].clamp(-1.0, 1.0), x[1].clamp(-1.0, 1.0)];
    weight_1d(cx[0], y[0], order) * weight_1d(cx[1], y[1], order)
}

/// Per-axis child-to-parent transfer matrices for one internal node.
#[derive(Debug, Clone)]
struct NodeTransfers {
    /// `[child][axis]`, each `order x order` with entry
    /// `[r * order + m] = s_n(parent_ref(child node r), y_m)`.
    axis: [[Vec<f64>; 2]; 2],
}

/// Chebyshev machinery bound to one tree and interpolation order: the 1D
/// node set and the precomputed child-to-parent transfer matrices.
#[derive(Debug, Clone)]
pub struct ChebyshevPlan {
    order: usize,
    nodes_1d: Vec<f64>,
    transfers: Vec<Option<NodeTransfers>>,
}

impl ChebyshevPlan {
    pub fn new(tree: &ClusterTree, order: usize) -> Result<Self> {
        let nodes_1d = chebyshev_nodes(order)?;
        let mut transfers = Vec::with_capacity(tree.num_nodes());
        for id in 0..tree.num_nodes() {
            let entry = tree.nodes[id].children.map(|(left, right)| {
                let build_axis = |child: usize, axis: usize| -> Vec<f64> {
                    let mut mat = Vec::with_capacity(order * order);
                    for &y in &nodes_1d {
                        let pos = tree.axis_position(child, axis, y);
                        let xi = tree.axis_to_reference(id, axis, pos);
                        for &ym in &nodes_1d {
                            mat.push(weight_1d(xi, ym, order));
                        }
                    }
                    mat
                };
                NodeTransfers {
                    axis: [
                        [build_axis(left, 0), build_axis(left, 1)],
                        [build_axis(right, 0), build_axis(right, 1)],
                    ],
                }
            });
            transfers.push(entry);
        }
        Ok(ChebyshevPlan {
            order,
            nodes_1d,
            transfers,
        })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes_1d
    }

    /// Entries per cluster, `order^2`.
    #[inline]
    pub fn moments_per_node(&self) -> usize {
        self.order * self.order
    }

    /// Reference position of tensor node `m = m0 * order + m1`.
    #[inline]
    pub fn tensor_node(&self, m: usize) -> Point {
        [self.nodes_1d[m / self.order], self.nodes_1d[m % self.order]]
    }
}

/// Anterpolates per-point strengths into Chebyshev moments for every
/// cluster, bottom-up. Returns a flat vector indexed by
/// `node_id * order^2 + m`.
pub fn upward_pass(tree: &ClusterTree, plan: &ChebyshevPlan, strengths: &[f64]) -> Vec<f64> {
    let n = plan.order;
    let nn = n * n;
    let mut moments = vec![0.0f64; tree.num_nodes() * nn];
    let mut wx = vec![0.0f64; n];
    let mut wy = vec![0.0f64; n];
    let mut tmp = vec![0.0f64; nn];

    for id in (0..tree.num_nodes()).rev() {
        let node = &tree.nodes[id];
        match node.children {
            None => {
                for &q in tree.node_point_ids(id) {
                    let f = strengths[q];
                    if f == 0.0 {
                        continue;
                    }
                    let xi = tree.to_reference(id, tree.points[q]);
                    for j in 0..n {
                        wx[j] = weight_1d(xi[0], plan.nodes_1d[j], n);
                        wy[j] = weight_1d(xi[1], plan.nodes_1d[j], n);
                    }
                    let z = &mut moments[id * nn..(id + 1) * nn];
                    for m0 in 0..n {
                        let wf = wx[m0] * f;
                        for m1 in 0..n {
                            z[m0 * n + m1] += wf * wy[m1];
                        }
                    }
                }
            }
            Some((left, right)) => {
                let transfers = plan.transfers[id]
                    .as_ref()
                    .expect("internal node has transfer matrices");
                for (child_slot, child) in [(0usize, left), (1usize, right)] {
                    let a0 = &transfers.axis[child_slot][0];
                    let a1 = &transfers.axis[child_slot][1];
                    let (child_z, parent_z) = {
                        // Children have larger ids; split to borrow both.
                        let (head, tail) = moments.split_at_mut(child * nn);
                        (&tail[..nn], &mut head[id * nn..(id + 1) * nn])
                    };
                    // tmp[r0, m1] = sum_r1 child_z[r0, r1] a1[r1, m1]
                    for r0 in 0..n {
                        for m1 in 0..n {
                            let mut acc = 0.0;
                            for r1 in 0..n {
                                acc += child_z[r0 * n + r1] * a1[r1 * n + m1];
                            }
                            tmp[r0 * n + m1] = acc;
                        }
                    }
                    // parent_z[m0, m1] += sum_r0 a0[r0, m0] tmp[r0, m1]
                    for m0 in 0..n {
                        for m1 in 0..n {
                            let mut acc = 0.0;
                            for r0 in 0..n {
                                acc += a0[r0 * n + m0] * tmp[r0 * n + m1];
                            }
                            parent_z[m0 * n + m1] += acc;
                        }
                    }
                }
            }
        }
    }
    moments
}

/// Ring buffer of per-level cluster moments.
#[derive(Debug, Clone)]
pub struct MomentRing {
    entries_per_level: usize,
    window: usize,
    slots: VecDeque<(usize, Vec<f64>)>,
}

impl MomentRing {
    pub fn new(entries_per_level: usize, window: usize) -> Self {
        MomentRing {
            entries_per_level,
            window: window.max(1),
            slots: VecDeque::new(),
        }
    }

    /// Stores the moments for the next level; evicts the oldest slot once
    /// the window is full.
    pub fn push(&mut self, level: usize, moments: Vec<f64>) {
        debug_assert_eq!(moments.len(), self.entries_per_level);
        debug_assert_eq!(level, self.slots.back().map_or(0, |(l, _)| l + 1));
        self.slots.push_back((level, moments));
        if self.slots.len() > self.window {
            self.slots.pop_front();
        }
    }

    /// Moments for `level`, if still retained.
    pub fn get(&self, level: usize) -> Option<&[f64]> {
        let front = self.slots.front()?.0;
        if level < front {
            return None;
        }
        self.slots.get(level - front).map(|(_, m)| m.as_slice())
    }

    #[inline]
    pub fn window(&self) -> usize {
        self.window
    }
}

/// Treecode tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct TreecodeParams {
    /// Multipole acceptance parameter in `[0, 1)`; smaller is more accurate.
    pub theta: f64,
    /// Chebyshev interpolation order `n >= 2`.
    pub order: usize,
    /// Maximum points per kd leaf.
    pub leaf_capacity: usize,
    /// Byte budget for per-target interaction lists reused across steps;
    /// 0 disables the caches (everything is recomputed every step).
    pub plan_memory_budget: usize,
}

impl Default for TreecodeParams {
    fn default() -> Self {
        TreecodeParams {
            theta: 0.3,
            order: 6,
            leaf_capacity: 64,
            plan_memory_budget: 1 << 30,
        }
    }
}

/// One cached interaction term. `idx` addresses a moment (far terms) or a
/// source point (near terms); `coeff` is the kernel weight `E * G` before
/// the `1/nu_1` normalization; `lag = floor(distance / h)` selects the
/// retarded levels `l - lag` (weight `v1`, skipped as the same-level term
/// when `lag = 0`) and `l - lag - 1` (weight `v2`).
#[derive(Debug, Clone, Copy)]
struct PlanTerm {
    idx: u32,
    lag: u32,
    coeff: f64,
    v1: f64,
    v2: f64,
}

#[derive(Debug, Clone, Default)]
struct FlatLists<T> {
    offsets: Vec<usize>,
    data: Vec<T>,
}

impl<T> FlatLists<T> {
    fn from_parts(parts: Vec<Vec<T>>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        offsets.push(0);
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let mut data = Vec::with_capacity(total);
        for mut part in parts {
            data.append(&mut part);
            offsets.push(data.len());
        }
        FlatLists { offsets, data }
    }

    #[inline]
    fn get(&self, i: usize) -> &[T] {
        &self.data[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Per-target far/near interaction structure, step-independent.
struct InteractionPlans {
    far_nodes: FlatLists<u32>,
    near_leaves: FlatLists<u32>,
    far_terms: Option<FlatLists<PlanTerm>>,
    near_terms: Option<FlatLists<PlanTerm>>,
}

/// Everything fixed over the march that evaluation needs.
struct EvalContext<'a> {
    tree: &'a ClusterTree,
    plan: &'a ChebyshevPlan,
    table: &'a CellWeightTable,
    attenuation: PairAttenuation<'a>,
    points_per_side: usize,
    cell_size: f64,
    step: f64,
    theta: f64,
}

impl<'a> EvalContext<'a> {
    fn new(
        tree: &'a ClusterTree,
        plan: &'a ChebyshevPlan,
        table: &'a CellWeightTable,
        medium: &'a MediumModel,
        grid: &CollocationGrid,
        step: f64,
        theta: f64,
    ) -> Self {
        EvalContext {
            tree,
            plan,
            table,
            attenuation: PairAttenuation::new(medium),
            points_per_side: grid.points_per_side(),
            cell_size: grid.cell_size(),
            step,
            theta,
        }
    }

    /// Far-field term for one (target, node, tensor-node) triple.
    #[inline]
    fn far_term(&self, target: Point, node_id: usize, m: usize) -> PlanTerm {
        let pos = self.tree.node_position(node_id, self.plan.tensor_node(m));
        let dx = target[0] - pos[0];
        let dy = target[1] - pos[1];
        let distance = (dx * dx + dy * dy).sqrt();
        let coeff = self.attenuation.eval_points(target, pos, distance)
            * geometric_cell_integral(target, pos, self.cell_size);
        let d = distance / self.step;
        let lag = d.floor();
        let frac = d - lag;
        PlanTerm {
            idx: (node_id * self.plan.moments_per_node() + m) as u32,
            lag: lag as u32,
            coeff,
            v1: 1.0 - frac,
            v2: frac,
        }
    }

    /// Near-field term for one (target, source point) pair.
    #[inline]
    fn near_term(&self, p: usize, target: Point, q: usize) -> PlanTerm {
        let xq = self.tree.points()[q];
        let dx = target[0] - xq[0];
        let dy = target[1] - xq[1];
        let distance = (dx * dx + dy * dy).sqrt();
        let mps = self.points_per_side;
        let coeff = self.attenuation.eval_pair(p, q, target, xq, distance)
            * self.table.get(
                (p % mps) as isize - (q % mps) as isize,
                (p / mps) as isize - (q / mps) as isize,
            );
        let d = distance / self.step;
        let lag = d.floor();
        let frac = d - lag;
        PlanTerm {
            idx: q as u32,
            lag: lag as u32,
            coeff,
            v1: 1.0 - frac,
            v2: frac,
        }
    }
}

/// Accumulates one cached term against per-lag value slices.
///
/// `values_by_lag[lag]` holds the level `l - lag` values (moments or
/// strengths). The `lag = 0` branch of a term is the same-level part and is
/// skipped: for `h <= ell` the only exact same-level contribution is the
/// self pair, resolved by the solver's diagonal division.
#[inline]
fn accumulate_term(
    term: &PlanTerm,
    level: usize,
    values_by_lag: &[Option<&[f64]>],
    acc: &mut f64,
) -> Result<()> {
    let lag = term.lag as usize;
    if lag >= 1 && lag <= level {
        let values = values_by_lag
            .get(lag)
            .copied()
            .flatten()
            .ok_or_else(|| missing_level(level, lag))?;
        *acc += term.coeff * term.v1 * values[term.idx as usize];
    }
    if term.v2 > 0.0 && lag < level {
        let values = values_by_lag
            .get(lag + 1)
            .copied()
            .flatten()
            .ok_or_else(|| missing_level(level, lag + 1))?;
        *acc += term.coeff * term.v2 * values[term.idx as usize];
    }
    Ok(())
}

fn missing_level(level: usize, lag: usize) -> RteError {
    RteError::Internal(format!(
        "level {} needed at step {level} was evicted from the ring buffer",
        level - lag
    ))
}

/// Per-step view of the retained levels, indexed by lag.
struct LagViews<'a> {
    moments: Vec<Option<&'a [f64]>>,
    strengths: Vec<Option<&'a [f64]>>,
}

fn lag_views<'a>(
    level: usize,
    window: usize,
    ring: &'a MomentRing,
    history: &'a SolutionHistory,
) -> LagViews<'a> {
    let depth = level.min(window + 1);
    let mut moments = Vec::with_capacity(depth + 1);
    let mut strengths = Vec::with_capacity(depth + 1);
    for lag in 0..=depth {
        moments.push(ring.get(level - lag));
        strengths.push(history.strength(level - lag));
    }
    LagViews { moments, strengths }
}

/// Treecode right-hand side for a single target: far clusters through their
/// Chebyshev moments, near leaves by direct summation, divided by `nu_1`.
/// The same-level self term is excluded and must be resolved by the caller's
/// diagonal division.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_rhs(
    level: usize,
    target: usize,
    tree: &ClusterTree,
    plan: &ChebyshevPlan,
    ring: &MomentRing,
    table: &CellWeightTable,
    medium: &MediumModel,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    theta: f64,
) -> Result<f64> {
    let ctx = EvalContext::new(tree, plan, table, medium, grid, history.step(), theta);
    let views = lag_views(level, ring.window(), ring, history);
    let partition = tree.collect_partition(tree.points()[target], theta);
    eval_partition(&ctx, level, target, &partition.far_nodes, &partition.near_leaves, &views)
}

fn eval_partition(
    ctx: &EvalContext,
    level: usize,
    p: usize,
    far_nodes: &[usize],
    near_leaves: &[usize],
    views: &LagViews,
) -> Result<f64> {
    let target = ctx.tree.points()[p];
    let nn = ctx.plan.moments_per_node();
    let mut acc = 0.0;
    for &id in far_nodes {
        for m in 0..nn {
            let term = ctx.far_term(target, id, m);
            accumulate_term(&term, level, &views.moments, &mut acc)?;
        }
    }
    for &id in near_leaves {
        for &q in ctx.tree.node_point_ids(id) {
            let term = ctx.near_term(p, target, q);
            accumulate_term(&term, level, &views.strengths, &mut acc)?;
        }
    }
    Ok(acc / UNIT_SPHERE_MEASURE_2D)
}

fn eval_cached(
    ctx: &EvalContext,
    plans: &InteractionPlans,
    level: usize,
    p: usize,
    views: &LagViews,
) -> Result<f64> {
    let mut acc = 0.0;
    match &plans.far_terms {
        Some(terms) => {
            for term in terms.get(p) {
                accumulate_term(term, level, &views.moments, &mut acc)?;
            }
        }
        None => {
            let target = ctx.tree.points()[p];
            let nn = ctx.plan.moments_per_node();
            for &id in plans.far_nodes.get(p) {
                for m in 0..nn {
                    let term = ctx.far_term(target, id as usize, m);
                    accumulate_term(&term, level, &views.moments, &mut acc)?;
                }
            }
        }
    }
    match &plans.near_terms {
        Some(terms) => {
            for term in terms.get(p) {
                accumulate_term(term, level, &views.strengths, &mut acc)?;
            }
        }
        None => {
            let target = ctx.tree.points()[p];
            for &id in plans.near_leaves.get(p) {
                for &q in ctx.tree.node_point_ids(id as usize) {
                    let term = ctx.near_term(p, target, q);
                    accumulate_term(&term, level, &views.strengths, &mut acc)?;
                }
            }
        }
    }
    Ok(acc / UNIT_SPHERE_MEASURE_2D)
}

fn build_plans(ctx: &EvalContext, budget: usize) -> InteractionPlans {
    let num_targets = ctx.tree.points().len();
    let partitions: Vec<Partition> = (0..num_targets)
        .into_par_iter()
        .map(|p| ctx.tree.collect_partition(ctx.tree.points()[p], ctx.theta))
        .collect();

    let nn = ctx.plan.moments_per_node();
    let far_total: usize = partitions.iter().map(|p| p.far_nodes.len() * nn).sum();
    let near_total: usize = partitions
        .iter()
        .flat_map(|p| p.near_leaves.iter())
        .map(|&id| ctx.tree.node(id).num_points())
        .sum();
    let term_size = std::mem::size_of::<PlanTerm>();
    let cache_far = far_total * term_size <= budget;
    let cache_near = near_total * term_size <= budget.saturating_sub(if cache_far {
        far_total * term_size
    } else {
        0
    });

    let far_terms = cache_far.then(|| {
        FlatLists::from_parts(
            partitions
                .par_iter()
                .enumerate()
                .map(|(p, part)| {
                    let target = ctx.tree.points()[p];
                    let mut terms = Vec::with_capacity(part.far_nodes.len() * nn);
                    for &id in &part.far_nodes {
                        for m in 0..nn {
                            terms.push(ctx.far_term(target, id, m));
                        }
                    }
                    terms
                })
                .collect(),
        )
    });
    let near_terms = cache_near.then(|| {
        FlatLists::from_parts(
            partitions
                .par_iter()
                .enumerate()
                .map(|(p, part)| {
                    let target = ctx.tree.points()[p];
                    let mut terms = Vec::new();
                    for &id in &part.near_leaves {
                        for &q in ctx.tree.node_point_ids(id) {
                            terms.push(ctx.near_term(p, target, q));
                        }
                    }
                    terms
                })
                .collect(),
        )
    });

    let far_nodes = FlatLists::from_parts(
        partitions
            .iter()
            .map(|p| p.far_nodes.iter().map(|&v| v as u32).collect())
            .collect(),
    );
    let near_leaves = FlatLists::from_parts(
        partitions
            .iter()
            .map(|p| p.near_leaves.iter().map(|&v| v as u32).collect())
            .collect(),
    );

    InteractionPlans {
        far_nodes,
        near_leaves,
        far_terms,
        near_terms,
    }
}

/// Marches the scheme with the treecode evaluator.
///
/// Requires `theta in [0, 1)`, `order >= 2`, and `h <= ell` (the treecode
/// has no iterative same-level mode). At `theta = 0` the acceptance
/// criterion never fires and the result matches the direct solver up to
/// summation order.
pub fn solve_treecode(
    grid: &CollocationGrid,
    time_grid: &TimeGrid,
    medium: &MediumModel,
    source: &SourceModel,
    params: &TreecodeParams,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let start = Instant::now();
    if !(0.0..1.0).contains(&params.theta) {
        return Err(RteError::InvalidArgument(format!(
            "theta must lie in [0, 1), got {}",
            params.theta
        )));
    }
    if params.order < 2 {
        return Err(RteError::InvalidArgument(format!(
            "interpolation order must be at least 2, got {}",
            params.order
        )));
    }
    if !matches!(options.same_level, SameLevelMode::Explicit) {
        return Err(RteError::InvalidArgument(
            "the treecode solver supports explicit same-level mode only".into(),
        ));
    }
    if time_grid.step() > grid.cell_size() * (1.0 + 1e-12) {
        return Err(RteError::NeedsIterativeMode {
            step: time_grid.step(),
            cell_size: grid.cell_size(),
        });
    }
    let report = medium.assumption_report(grid);
    if !report.pass {
        return Err(RteError::AssumptionViolated(
            report.failure.unwrap_or_else(|| "coefficient check failed".into()),
        ));
    }

    let table = CellWeightTable::build(grid);
    let tree = build_tree(grid.points(), params.leaf_capacity)?;
    let plan = ChebyshevPlan::new(&tree, params.order)?;
    let ctx = EvalContext::new(
        &tree,
        &plan,
        &table,
        medium,
        grid,
        time_grid.step(),
        params.theta,
    );
    let plans = build_plans(&ctx, params.plan_memory_budget);

    let m = grid.num_points();
    let sigma_s_pts: Vec<f64> = grid.points().iter().map(|&x| medium.sigma_s(x)).collect();
    let a_diag = diagonal_weight(&table);
    let mut history = SolutionHistory::new(m, time_grid, options.keep_all_levels);
    let window = history.window();
    let mut ring = MomentRing::new(tree.num_nodes() * plan.moments_per_node(), window);
    let mut per_step = Vec::with_capacity(time_grid.num_steps() + 1);

    for level in 0..=time_grid.num_steps() {
        let tick = Instant::now();
        let t = time_grid.node(level);
        let source_l: Vec<f64> = grid.points().par_iter().map(|&x| source.eval(t, x)).collect();
        if level == 0 {
            let worst = source_l.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if worst > 0.0 {
                return Err(RteError::AssumptionViolated(format!(
                    "source must vanish at t = 0; max |f(0, x_p)| = {worst:e}"
                )));
            }
        }
        let views = lag_views(level, window, &ring, &history);
        let w: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|p| {
                let rhs = eval_cached(&ctx, &plans, level, p, &views)?;
                resolve_diagonal(p, rhs, source_l[p], sigma_s_pts[p], a_diag)
            })
            .collect::<Result<Vec<f64>>>()?;
        let strength: Vec<f64> = w
            .iter()
            .zip(&sigma_s_pts)
            .zip(&source_l)
            .map(|((w, s), c)| s * w + c)
            .collect();
        let moments = upward_pass(&tree, &plan, &strength);
        ring.push(level, moments);
        history.push_level(w, source_l, strength);
        per_step.push(tick.elapsed().as_secs_f64());
    }

    Ok(SolveResult {
        history,
        stats: SolveStats {
            per_step_secs: per_step,
            total_secs: start.elapsed().as_secs_f64(),
        },
    })
}
