//! SubMDP induction and dynamics aggregation.
//!
//! A [`Partition`] splits the state space into subMDPs. An
//! [`AggregationScheme`] maps every subMDP `i` onto an aggregated subMDP `n`
//! through a state map `ψ^{i→(n)}` defined on the subMDP's internal and exit
//! states. Aggregated state indices are local to their aggregate: internal
//! states occupy `0..internal`, exit placeholders `internal..internal+exits`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{EpisodicMdp, ROW_SUM_TOLERANCE};

/// Disjoint cover of `0..S` by subMDP cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    cells: usize,
}

impl Partition {
    /// `assignment[s]` is the cell of state `s`. Cells must be numbered
    /// `0..L` with none left empty.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let cells = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; cells];
        for &c in &assignment {
            seen[c] = true;
        }
        if let Some(empty) = seen.iter().position(|&x| !x) {
            return Err(Error::InvalidPartition(format!("cell {empty} is empty")));
        }
        Ok(Self { assignment, cells })
    }

    pub fn singletons(states: usize) -> Self {
        Self {
            assignment: (0..states).collect(),
            cells: states,
        }
    }

    pub fn whole(states: usize) -> Self {
        Self {
            assignment: vec![0; states],
            cells: 1,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cell_of(&self, s: usize) -> usize {
        self.assignment[s]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// States of cell `i` in ascending order.
    pub fn members(&self, i: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == i)
            .map(|(s, _)| s)
            .collect()
    }

    fn check_covers(&self, mdp: &EpisodicMdp) -> Result<()> {
        if self.assignment.len() != mdp.states() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} states, MDP has {}",
                self.assignment.len(),
                mdp.states()
            )));
        }
        Ok(())
    }
}

/// Exit set of a cell: outside states reachable in one step from inside,
/// under any action and step.
fn exit_set(mdp: &EpisodicMdp, partition: &Partition, cell: usize, internal: &[usize]) -> Vec<usize> {
    let mut exits = BTreeSet::new();
    for h in 0..mdp.horizon() {
        for &s in internal {
            for a in 0..mdp.actions() {
                for (next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
                    if p > 0.0 && partition.cell_of(next) != cell {
                        exits.insert(next);
                    }
                }
            }
        }
    }
    exits.into_iter().collect()
}

/// Borrowed view of one induced subMDP.
#[derive(Debug, Clone)]
pub struct SubMdpView<'a> {
    mdp: &'a EpisodicMdp,
    pub index: usize,
    pub internal: Vec<usize>,
    pub exits: Vec<usize>,
}

impl<'a> SubMdpView<'a> {
    pub fn is_internal(&self, s: usize) -> bool {
        self.internal.binary_search(&s).is_ok()
    }

    /// Reward restricted to the internal states; `None` outside them.
    pub fn reward(&self, h: usize, s: usize, a: usize) -> Option<f64> {
        self.is_internal(s).then(|| self.mdp.reward(h, s, a))
    }

    /// Kernel row restricted to the internal states; `None` outside them.
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> Option<&'a [f64]> {
        self.is_internal(s).then(|| self.mdp.transition_row(h, s, a))
    }
}

/// Splits `mdp` into its induced subMDPs.
pub fn induce_submdps<'a>(mdp: &'a EpisodicMdp, partition: &Partition) -> Result<Vec<SubMdpView<'a>>> {
    partition.check_covers(mdp)?;
    Ok((0..partition.cells())
        .map(|i| {
            let internal = partition.members(i);
            let exits = exit_set(mdp, partition, i, &internal);
            SubMdpView {
                mdp,
                index: i,
                internal,
                exits,
            }
        })
        .collect())
}

/// Sizes of one aggregated subMDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateShape {
    pub internal: usize,
    pub exits: usize,
}

impl AggregateShape {
    pub fn total(&self) -> usize {
        self.internal + self.exits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SubMdpMap {
    aggregate: usize,
    internal: Vec<usize>,
    exits: Vec<usize>,
    image: BTreeMap<usize, usize>,
    /// Concrete exit state behind each exit placeholder, indexed by
    /// `local - internal`.
    exit_preimage: Vec<Option<usize>>,
}

/// Validated dynamics aggregation over a fixed MDP partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationScheme {
    partition: Partition,
    shapes: Vec<AggregateShape>,
    maps: Vec<SubMdpMap>,
    offsets: Vec<usize>,
    /// subMDPs mapped to each aggregate
    groups: Vec<Vec<usize>>,
}

impl AggregationScheme {
    /// Builds and validates a scheme.
    ///
    /// `aggregate_of[i]` is the aggregate of subMDP `i`; `images` lists
    /// `(i, s, s̄)` triples defining `ψ^{i→(n)}(s) = s̄`.
    pub fn new(
        mdp: &EpisodicMdp,
        partition: Partition,
        shapes: Vec<AggregateShape>,
        aggregate_of: Vec<usize>,
        images: &[(usize, usize, usize)],
    ) -> Result<Self> {
        partition.check_covers(mdp)?;
        let subs = partition.cells();
        if aggregate_of.len() != subs {
            return Err(Error::scheme(
                "aggregate-index",
                format!("{} subMDPs but {} aggregate assignments", subs, aggregate_of.len()),
            ));
        }
        if let Some((i, &n)) = aggregate_of.iter().enumerate().find(|(_, &n)| n >= shapes.len()) {
            return Err(Error::scheme(
                "aggregate-index",
                format!("subMDP {i} maps to aggregate {n}, but N={}", shapes.len()),
            ));
        }

        let mut maps: Vec<SubMdpMap> = (0..subs)
            .map(|i| {
                let internal = partition.members(i);
                let exits = exit_set(mdp, &partition, i, &internal);
                let n = aggregate_of[i];
                SubMdpMap {
                    aggregate: n,
                    internal,
                    exits,
                    image: BTreeMap::new(),
                    exit_preimage: vec![None; shapes[n].exits],
                }
            })
            .collect();

        for &(i, s, image) in images {
            let map = maps
                .get_mut(i)
                .ok_or_else(|| Error::scheme("aggregate-index", format!("triple names subMDP {i}, but L={subs}")))?;
            let shape = shapes[map.aggregate];
            let internal = map.internal.binary_search(&s).is_ok();
            let exit = map.exits.binary_search(&s).is_ok();
            if !internal && !exit {
                return Err(Error::scheme(
                    "psi-domain",
                    format!("state {s} is neither internal nor exit of subMDP {i}"),
                ));
            }
            if internal && image >= shape.internal {
                return Err(Error::scheme(
                    "psi-range",
                    format!("internal state {s} of subMDP {i} maps to {image}, not an internal aggregated state"),
                ));
            }
            if exit && (image < shape.internal || image >= shape.total()) {
                return Err(Error::scheme(
                    "psi-range",
                    format!("exit state {s} of subMDP {i} maps to {image}, not an exit placeholder"),
                ));
            }
            if map.image.insert(s, image).is_some() {
                return Err(Error::scheme(
                    "psi-function",
                    format!("state {s} mapped twice in subMDP {i}"),
                ));
            }
            if exit {
                let slot = &mut map.exit_preimage[image - shape.internal];
                if let Some(other) = slot {
                    return Err(Error::scheme(
                        "exit-injective",
                        format!("exit states {other} and {s} of subMDP {i} share placeholder {image}"),
                    ));
                }
                *slot = Some(s);
            }
        }

        for (i, map) in maps.iter().enumerate() {
            if let Some(s) = map
                .internal
                .iter()
                .chain(&map.exits)
                .find(|s| !map.image.contains_key(s))
            {
                return Err(Error::scheme(
                    "psi-total",
                    format!("state {s} of subMDP {i} has no image"),
                ));
            }
        }

        let mut groups = vec![Vec::new(); shapes.len()];
        for (i, map) in maps.iter().enumerate() {
            groups[map.aggregate].push(i);
        }
        for (n, shape) in shapes.iter().enumerate() {
            for local in 0..shape.internal {
                let covered = groups[n].iter().any(|&i| {
                    maps[i]
                        .image
                        .iter()
                        .any(|(s, &img)| img == local && maps[i].internal.binary_search(s).is_ok())
                });
                if !covered {
                    return Err(Error::scheme(
                        "aggregate-coverage",
                        format!("aggregated state {local} of aggregate {n} has no preimage"),
                    ));
                }
            }
        }

        let mut offsets = Vec::with_capacity(shapes.len());
        let mut acc = 0;
        for shape in &shapes {
            offsets.push(acc);
            acc += shape.total();
        }

        Ok(Self {
            partition,
            shapes,
            maps,
            offsets,
            groups,
        })
    }

    /// Every subMDP is its own aggregate (`N = L`): internal states keep
    /// their ascending order and each exit state gets its own placeholder.
    pub fn identity(mdp: &EpisodicMdp, partition: Partition) -> Result<Self> {
        partition.check_covers(mdp)?;
        let mut shapes = Vec::new();
        let mut images = Vec::new();
        for i in 0..partition.cells() {
            let internal = partition.members(i);
            let exits = exit_set(mdp, &partition, i, &internal);
            for (k, &s) in internal.iter().chain(&exits).enumerate() {
                images.push((i, s, k));
            }
            shapes.push(AggregateShape {
                internal: internal.len(),
                exits: exits.len(),
            });
        }
        let aggregate_of = (0..partition.cells()).collect();
        Self::new(mdp, partition, shapes, aggregate_of, &images)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// `L`
    pub fn submdps(&self) -> usize {
        self.maps.len()
    }

    /// `N`
    pub fn aggregates(&self) -> usize {
        self.shapes.len()
    }

    pub fn shape(&self, n: usize) -> AggregateShape {
        self.shapes[n]
    }

    pub fn shapes(&self) -> &[AggregateShape] {
        &self.shapes
    }

    pub fn aggregate_of(&self, i: usize) -> usize {
        self.maps[i].aggregate
    }

    /// subMDPs mapped onto aggregate `n`, ascending.
    pub fn group(&self, n: usize) -> &[usize] {
        &self.groups[n]
    }

    pub fn submdp_of(&self, s: usize) -> usize {
        self.partition.cell_of(s)
    }

    pub fn internal_states(&self, i: usize) -> &[usize] {
        &self.maps[i].internal
    }

    pub fn exit_states(&self, i: usize) -> &[usize] {
        &self.maps[i].exits
    }

    /// `ψ^{i→(n)}(s)` as a local aggregated index.
    pub fn image(&self, i: usize, s: usize) -> Option<usize> {
        self.maps[i].image.get(&s).copied()
    }

    /// Concrete exit state of subMDP `i` behind local placeholder `local`.
    pub fn exit_preimage(&self, i: usize, local: usize) -> Option<usize> {
        let internal = self.shapes[self.maps[i].aggregate].internal;
        local
            .checked_sub(internal)
            .and_then(|k| self.maps[i].exit_preimage.get(k).copied().flatten())
    }

    /// Width of the global aggregated index space `Σ_n |S^{(n)} ∪ Ē^{(n)}|`.
    pub fn global_width(&self) -> usize {
        self.shapes.iter().map(AggregateShape::total).sum()
    }

    pub fn global_index(&self, n: usize, local: usize) -> usize {
        self.offsets[n] + local
    }

    /// `M = max_n |S^{(n)} ∪ Ē^{(n)}|`
    pub fn max_aggregate_size(&self) -> usize {
        self.shapes.iter().map(AggregateShape::total).max().unwrap_or(0)
    }

    /// Internal preimages `(i, s)` of aggregated internal state `local` of
    /// aggregate `n`, in ascending state order.
    pub fn preimages(&self, n: usize, local: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.groups[n]
            .iter()
            .flat_map(|&i| {
                self.maps[i]
                    .internal
                    .iter()
                    .filter(move |&&s| self.maps[i].image[&s] == local)
                    .map(move |&s| (i, s))
            })
            .collect();
        out.sort_by_key(|&(_, s)| s);
        out
    }

    /// Concrete state whose reward stands in for `r_h(s̄, a)` when planning
    /// for subMDP `i`: its lowest-index preimage of `s̄`, or the lowest
    /// preimage among all subMDPs of the aggregate if `i` has none.
    pub fn reward_representative(&self, i: usize, local: usize) -> usize {
        let own = self.maps[i].internal.iter().find(|&&s| self.maps[i].image[&s] == local);
        match own {
            Some(&s) => s,
            None => self.preimages(self.maps[i].aggregate, local)[0].1,
        }
    }

    /// `(i, s, s̄)` triples in ascending `(i, s)` order.
    pub fn image_triples(&self) -> Vec<(usize, usize, usize)> {
        self.maps
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.image.iter().map(move |(&s, &img)| (i, s, img)))
            .collect()
    }
}

/// `Ψ^{i→(n)}` as an `S × S̄′` 0/1 matrix over the global aggregated index
/// space. Rows outside `S^i ∪ E^i` are zero.
pub fn build_kernel(scheme: &AggregationScheme, i: usize) -> DMatrix<f64> {
    let n = scheme.aggregate_of(i);
    let mut psi = DMatrix::zeros(scheme.partition().len(), scheme.global_width());
    for &s in scheme.internal_states(i).iter().chain(scheme.exit_states(i)) {
        let local = scheme.image(i, s).expect("validated scheme is total");
        psi[(s, scheme.global_index(n, local))] = 1.0;
    }
    psi
}

/// `P^i_h Ψ^{i→(n)}(· | s, a)` over the aggregate's local columns, summed
/// in ascending successor order.
pub fn collapsed_row(
    mdp: &EpisodicMdp,
    scheme: &AggregationScheme,
    i: usize,
    h: usize,
    s: usize,
    a: usize,
) -> Vec<f64> {
    let n = scheme.aggregate_of(i);
    let mut row = vec![0.0; scheme.shape(n).total()];
    for (next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
        if p > 0.0 {
            let col = scheme.image(i, next).expect("successors lie in S^i ∪ E^i");
            row[col] += p;
        }
    }
    row
}

/// Worst reward gap and worst L1 gap between collapsed transition rows.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregationError {
    pub eps_r: f64,
    pub eps_p: f64,
}

/// Exhaustive `(ε_r, ε_p)` over all steps, subMDP pairs sharing an
/// aggregate, state pairs with equal images, and actions.
pub fn aggregation_error(mdp: &EpisodicMdp, scheme: &AggregationScheme) -> AggregationError {
    let mut err = AggregationError::default();
    for n in 0..scheme.aggregates() {
        for local in 0..scheme.shape(n).internal {
            let pre = scheme.preimages(n, local);
            for h in 0..mdp.horizon() {
                for a in 0..mdp.actions() {
                    let rows: Vec<Vec<f64>> = pre
                        .iter()
                        .map(|&(i, s)| collapsed_row(mdp, scheme, i, h, s, a))
                        .collect();
                    for x in 0..pre.len() {
                        for y in x + 1..pre.len() {
                            let gap_r = (mdp.reward(h, pre[x].1, a) - mdp.reward(h, pre[y].1, a)).abs();
                            let gap_p: f64 = rows[x].iter().zip(&rows[y]).map(|(p, q)| (p - q).abs()).sum();
                            err.eps_r = err.eps_r.max(gap_r);
                            err.eps_p = err.eps_p.max(gap_p);
                        }
                    }
                }
            }
        }
    }
    err
}

/// Distributions over the internal preimages of every aggregated internal
/// state: `weights[n][s̄]` is a list of `(state, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseWeights(pub Vec<Vec<Vec<(usize, f64)>>>);

impl CollapseWeights {
    pub fn uniform(scheme: &AggregationScheme) -> Self {
        Self::from_preimages(scheme, |pre| {
            let w = 1.0 / pre.len() as f64;
            pre.iter().map(|&(_, s)| (s, w)).collect()
        })
    }

    /// All mass on the lowest-index preimage.
    pub fn point_mass(scheme: &AggregationScheme) -> Self {
        Self::from_preimages(scheme, |pre| vec![(pre[0].1, 1.0)])
    }

    /// All mass on the highest-index preimage.
    pub fn last_point_mass(scheme: &AggregationScheme) -> Self {
        Self::from_preimages(scheme, |pre| vec![(pre[pre.len() - 1].1, 1.0)])
    }

    pub fn from_preimages(
        scheme: &AggregationScheme,
        mut f: impl FnMut(&[(usize, usize)]) -> Vec<(usize, f64)>,
    ) -> Self {
        Self(
            (0..scheme.aggregates())
                .map(|n| {
                    (0..scheme.shape(n).internal)
                        .map(|local| f(&scheme.preimages(n, local)))
                        .collect()
                })
                .collect(),
        )
    }
}

/// Aggregated kernels `P̄^{(n)}_h` obtained by averaging collapsed rows of
/// the preimages under `weights`. Result is indexed `[n][h]`; each matrix
/// has rows `s̄ * A + a` over internal `s̄` and columns over the local
/// aggregated space.
pub fn collapse_transitions(
    mdp: &EpisodicMdp,
    scheme: &AggregationScheme,
    weights: &CollapseWeights,
) -> Result<Vec<Vec<DMatrix<f64>>>> {
    if weights.0.len() != scheme.aggregates() {
        return Err(Error::InvalidWeights(format!(
            "weights cover {} aggregates, scheme has {}",
            weights.0.len(),
            scheme.aggregates()
        )));
    }
    let actions = mdp.actions();
    let mut out = Vec::with_capacity(scheme.aggregates());
    for n in 0..scheme.aggregates() {
        let shape = scheme.shape(n);
        if weights.0[n].len() != shape.internal {
            return Err(Error::InvalidWeights(format!(
                "aggregate {n}: {} weight vectors for {} internal states",
                weights.0[n].len(),
                shape.internal
            )));
        }
        let mut per_step = Vec::with_capacity(mdp.horizon());
        for h in 0..mdp.horizon() {
            let mut kernel = DMatrix::zeros(shape.internal * actions, shape.total());
            for (local, dist) in weights.0[n].iter().enumerate() {
                let total: f64 = dist.iter().map(|&(_, w)| w).sum();
                if (total - 1.0).abs() > ROW_SUM_TOLERANCE || dist.iter().any(|&(_, w)| w < 0.0) {
                    return Err(Error::InvalidWeights(format!(
                        "weights for aggregated state {local} of aggregate {n} sum to {total}"
                    )));
                }
                for &(s, w) in dist {
                    let i = scheme.submdp_of(s);
                    if scheme.aggregate_of(i) != n
                        || scheme.image(i, s) != Some(local)
                        || !scheme.internal_states(i).contains(&s)
                    {
                        return Err(Error::InvalidWeights(format!(
                            "state {s} is not a preimage of aggregated state {local} of aggregate {n}"
                        )));
                    }
                    for a in 0..actions {
                        let row = collapsed_row(mdp, scheme, i, h, s, a);
                        for (col, p) in row.into_iter().enumerate() {
                            kernel[(local * actions + a, col)] += w * p;
                        }
                    }
                }
            }
            per_step.push(kernel);
        }
        out.push(per_step);
    }
    Ok(out)
}
