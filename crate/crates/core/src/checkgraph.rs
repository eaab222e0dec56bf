//! Compilation of a protocol into its pair of check graphs.
//!
//! Time uses a doubled coordinate: stabilizer round `r` sits at `2r`, the data
//! error layer `ℓ` (between rounds ℓ−1 and ℓ) at `2ℓ−1`. A qubit alive in rounds
//! `first..=last` has error layers `first..=last+1`; the extra layer sits
//! between its last round and its readout. A check node compares two items of
//! the record (outcomes and readouts) and lives at the midpoint of the slab
//! it spans.
//!
//! Each fault flips a set of items; its edge joins the nodes that see an odd
//! number of them, and its signature records which logical observables it
//! flips. Signatures fix a potential φ over nodes (sig = φ(u) ⊕ φ(v) along
//! every edge), and a boundary edge's label `sig ⊕ φ(u)` tells which boundary
//! component it ends on.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Coord, Pauli};
use crate::noise::NoiseParams;
use crate::protocol::{Item, ProtocolKind, ProtocolSpec, QubitLife};

pub const NO_NODE: u32 = u32::MAX;
/// Matching weights are fixed-point with this many fractional bits.
pub const WEIGHT_BITS: u32 = 16;
pub(crate) const UNREACHABLE: i64 = i64::MAX / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Spacelike,
    Timelike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    /// Data-qubit error in layer `layer`.
    Data { qubit: Coord, layer: usize },
    /// Outcome error of the face at `face` in `round`.
    Measurement { face: Coord, round: usize },
}

impl Location {
    /// (doubled time, x, y).
    pub fn coord(&self) -> (i32, i32, i32) {
        match *self {
            Location::Data { qubit, layer } => (2 * layer as i32 - 1, qubit.0, qubit.1),
            Location::Measurement { face, round } => (2 * round as i32, face.0, face.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckNode {
    pub id: usize,
    pub kind: Pauli,
    /// Doubled time coordinate.
    pub t: i32,
    pub position: Coord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultEdge {
    pub id: usize,
    /// Zero, one or two check nodes. Zero-endpoint edges are undetectable
    /// logical faults.
    pub endpoints: Vec<usize>,
    /// Boundary component of a one-endpoint edge.
    pub boundary: Option<usize>,
    pub kind: EdgeKind,
    pub p: f64,
    pub weight: f64,
    /// All fault locations merged into this edge, sorted.
    pub locations: Vec<Location>,
    /// Logical observables flipped (bit i = i-th observable of this graph).
    pub signature: u32,
    /// Opposite-graph edge of the same data-qubit location (Y correlation).
    pub partner: Option<usize>,
}

impl FaultEdge {
    pub fn coord(&self) -> (i32, i32, i32) {
        self.locations[0].coord()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryComponent {
    pub name: String,
    /// Logical label: the observables flipped by a string from a component
    /// with label 0 to this one.
    pub label: u32,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckGraph {
    pub kind: Pauli,
    pub nodes: Vec<CheckNode>,
    pub edges: Vec<FaultEdge>,
    pub boundaries: Vec<BoundaryComponent>,
    pub observables: Vec<String>,
    /// Undetectable edges with the component pair they connect, if unique.
    pub logical_edges: Vec<(usize, Option<(usize, usize)>)>,
    pub(crate) adj_start: Vec<u32>,
    /// (edge id, neighbour or `NO_NODE` for a boundary edge).
    pub(crate) adj: Vec<(u32, u32)>,
    pub(crate) qweight: Vec<i64>,
    /// Quantized distance from each node to the nearest boundary edge's far
    /// end (`UNREACHABLE` if none), and the first edge of such a path.
    pub(crate) boundary_dist: Vec<i64>,
    pub(crate) boundary_pred: Vec<u32>,
}

/// A data-qubit location with the edge it toggles in each graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceLocation {
    pub qubit: Coord,
    pub layer: usize,
    pub z_edge: Option<u32>,
    pub x_edge: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct CheckGraphPair {
    /// Z checks; hosts X-error strings.
    pub z: CheckGraph,
    /// X checks; hosts Z-error strings.
    pub x: CheckGraph,
    pub spacelike: Vec<SpaceLocation>,
    pub z_timelike: Vec<Option<u32>>,
    pub x_timelike: Vec<Option<u32>>,
    /// (z edge, x edge) pairs sharing a data-qubit location.
    pub correlation_links: Vec<(usize, usize)>,
    pub spec: ProtocolSpec,
    pub noise: NoiseParams,
}

impl CheckGraphPair {
    pub fn graph(&self, kind: Pauli) -> &CheckGraph {
        match kind {
            Pauli::Z => &self.z,
            Pauli::X => &self.x,
        }
    }
}

pub fn weight_of(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

fn quantize(w: f64) -> i64 {
    (w * f64::from(1u32 << WEIGHT_BITS)).round() as i64
}

fn merge_p(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Raw per-check-kind structure before probabilities are attached.
struct Skeleton {
    nodes: Vec<CheckNode>,
    /// fault location → (endpoints, signature); None if it flips nothing.
    faults: Vec<(Location, Vec<usize>, u32)>,
}

fn build_skeleton(spec: &ProtocolSpec, kind: Pauli) -> Result<Skeleton> {
    let lives: Vec<QubitLife> = spec.qubits();
    let life_of: HashMap<Coord, QubitLife> = lives.iter().map(|l| (l.pos, *l)).collect();

    // Faces of this kind per round, and which faces each qubit belongs to.
    let mut support: Vec<BTreeMap<Coord, Vec<Coord>>> = Vec::with_capacity(spec.rounds);
    let mut member: Vec<HashMap<Coord, Vec<Coord>>> = Vec::with_capacity(spec.rounds);
    for r in 0..spec.rounds {
        let mut faces = BTreeMap::new();
        let mut m: HashMap<Coord, Vec<Coord>> = HashMap::new();
        for f in spec.faces_at(r).into_iter().filter(|f| f.kind == kind) {
            let mut c = f.corners.clone();
            c.sort();
            for q in &c {
                m.entry(*q).or_default().push(f.position);
            }
            faces.insert(f.position, c);
        }
        support.push(faces);
        member.push(m);
    }

    // Items: outcomes, and readouts of qubits measured in a basis fixing `kind`.
    let mut item_index: HashMap<Item, usize> = HashMap::new();
    let mut intern = |it: Item| {
        let n = item_index.len();
        *item_index.entry(it).or_insert(n)
    };
    let has_readout = |q: &Coord| life_of[q].readout.fixes(kind);

    // Check nodes, built from runs of each face position.
    let mut detectors: Vec<(CheckNode, Vec<usize>)> = Vec::new();
    let positions: std::collections::BTreeSet<Coord> = support.iter().flat_map(|m| m.keys().copied()).collect();
    for &pos in &positions {
        let mut r = 0;
        while r < spec.rounds {
            if !support[r].contains_key(&pos) {
                r += 1;
                continue;
            }
            let r0 = r;
            while r + 1 < spec.rounds && support[r + 1].contains_key(&pos) {
                r += 1;
            }
            let r1 = r;
            r += 1;
            let first = &support[r0][&pos];
            if first.iter().all(|q| life_of[q].first == r0 && life_of[q].init.fixes(kind)) {
                let items = vec![intern(Item::Outcome { face: pos, round: r0 })];
                detectors.push((node(kind, 2 * r0 as i32 - 1, pos), items));
            }
            for t in r0 + 1..=r1 {
                let prev = &support[t - 1][&pos];
                let cur = &support[t][&pos];
                let fresh_ok = cur
                    .iter()
                    .filter(|q| !prev.contains(q))
                    .all(|q| life_of[q].first == t && life_of[q].init.fixes(kind));
                let gone: Vec<Coord> = prev.iter().filter(|q| !cur.contains(q)).copied().collect();
                let gone_ok = gone.iter().all(|q| life_of[q].last == t - 1 && has_readout(q));
                if fresh_ok && gone_ok {
                    let mut items = vec![
                        intern(Item::Outcome { face: pos, round: t }),
                        intern(Item::Outcome { face: pos, round: t - 1 }),
                    ];
                    items.extend(gone.iter().map(|q| intern(Item::Readout(*q))));
                    detectors.push((node(kind, 2 * t as i32 - 1, pos), items));
                }
            }
            let last = &support[r1][&pos];
            if last.iter().all(|q| life_of[q].last == r1 && has_readout(q)) {
                let mut items = vec![intern(Item::Outcome { face: pos, round: r1 })];
                items.extend(last.iter().map(|q| intern(Item::Readout(*q))));
                detectors.push((node(kind, 2 * r1 as i32 + 1, pos), items));
            }
        }
    }
    detectors.sort_by_key(|(n, _)| (n.t, n.position.1, n.position.0));
    let mut item_dets: Vec<Vec<usize>> = vec![Vec::new(); item_index.len()];
    let mut nodes = Vec::with_capacity(detectors.len());
    for (id, (mut n, items)) in detectors.into_iter().enumerate() {
        n.id = id;
        for it in items {
            item_dets[it].push(id);
        }
        nodes.push(n);
    }

    // Observable bits by item.
    let mut item_obs: HashMap<Item, u32> = HashMap::new();
    for (bit, obs) in spec.observables.iter().filter(|o| o.check == kind).enumerate() {
        for it in &obs.items {
            if let Item::Readout(q) = it {
                if !life_of.get(q).is_some_and(|l| l.readout.fixes(kind)) {
                    return Err(Error::Validation(format!(
                        "observable {} reads {q:?}, which is not measured in a compatible basis",
                        obs.name
                    )));
                }
            }
            *item_obs.entry(*it).or_insert(0) ^= 1 << bit;
        }
    }

    let mut faults = Vec::new();
    let mut resolve = |loc: Location, items: &[Item]| -> Result<()> {
        let mut parity: BTreeMap<usize, bool> = BTreeMap::new();
        let mut sig = 0u32;
        for it in items {
            sig ^= item_obs.get(it).copied().unwrap_or(0);
            if let Some(&ix) = item_index.get(it) {
                for &d in &item_dets[ix] {
                    *parity.entry(d).or_insert(false) ^= true;
                }
            }
        }
        let ends: Vec<usize> = parity.into_iter().filter(|&(_, odd)| odd).map(|(d, _)| d).collect();
        if ends.len() > 2 {
            return Err(Error::Consistency(format!(
                "fault {loc:?} triggers {} checks; the graph would not be a matching graph",
                ends.len()
            )));
        }
        if !ends.is_empty() || sig != 0 {
            faults.push((loc, ends, sig));
        }
        Ok(())
    };

    for life in &lives {
        let q = life.pos;
        for layer in life.first..=life.last + 1 {
            let mut items = Vec::new();
            for (r, m) in member.iter().enumerate().take(life.last + 1).skip(layer) {
                for &face in m.get(&q).into_iter().flatten() {
                    items.push(Item::Outcome { face, round: r });
                }
            }
            if has_readout(&q) {
                items.push(Item::Readout(q));
            }
            resolve(Location::Data { qubit: q, layer }, &items)?;
        }
    }
    for (r, faces) in support.iter().enumerate() {
        for &face in faces.keys() {
            resolve(Location::Measurement { face, round: r }, &[Item::Outcome { face, round: r }])?;
        }
    }
    Ok(Skeleton { nodes, faults })
}

fn node(kind: Pauli, t: i32, position: Coord) -> CheckNode {
    CheckNode { id: 0, kind, t, position }
}

/// Measurement locations of one check kind, in the order used for sampling.
fn measurement_locations(spec: &ProtocolSpec, kind: Pauli) -> Vec<Location> {
    let mut out = Vec::new();
    for r in 0..spec.rounds {
        for f in spec.faces_at(r).into_iter().filter(|f| f.kind == kind) {
            out.push(Location::Measurement { face: f.position, round: r });
        }
    }
    out
}

struct Built {
    graph: CheckGraph,
    edge_of: HashMap<Location, usize>,
}

fn assemble(spec: &ProtocolSpec, kind: Pauli, noise: &NoiseParams) -> Result<Built> {
    let sk = build_skeleton(spec, kind)?;
    let space_p = match kind {
        Pauli::Z => noise.x_flip(),
        Pauli::X => noise.z_flip(),
    };

    // Merge parallel faults. Two-endpoint edges are keyed by endpoints alone:
    // parallel faults with different signatures would differ by an
    // undetectable logical operator, which is rejected.
    type Acc = (Vec<Location>, f64, EdgeKind, u32);
    let mut by_key: BTreeMap<(Vec<usize>, u32), Acc> = BTreeMap::new();
    for (loc, ends, sig) in sk.faults {
        let (p, ek) = match loc {
            Location::Data { .. } => (space_p, EdgeKind::Spacelike),
            Location::Measurement { .. } => (noise.q, EdgeKind::Timelike),
        };
        if p <= 0.0 {
            continue;
        }
        let key_sig = if ends.len() == 2 { 0 } else { sig };
        let entry = by_key.entry((ends, key_sig)).or_insert((Vec::new(), 0.0, ek, sig));
        if entry.3 != sig {
            return Err(Error::Consistency(format!(
                "parallel faults at {loc:?} and {:?} differ by a logical operator",
                entry.0[0]
            )));
        }
        entry.0.push(loc);
        entry.1 = merge_p(entry.1, p);
        if ek == EdgeKind::Spacelike {
            entry.2 = EdgeKind::Spacelike;
        }
    }

    let mut raw: Vec<(Vec<usize>, Acc)> = by_key
        .into_iter()
        .map(|((ends, _), mut acc)| {
            acc.0.sort();
            (ends, acc)
        })
        .collect();
    raw.sort_by(|a, b| a.1 .0[0].coord().cmp(&b.1 .0[0].coord()).then(a.1 .0[0].cmp(&b.1 .0[0])));
    let mut edges: Vec<FaultEdge> = Vec::new();
    let mut edge_of = HashMap::new();
    for (ends, (locs, p, ek, sig)) in raw {
        if p >= 0.5 {
            return Err(Error::Validation(format!("edge probability {p} is not below 1/2")));
        }
        let id = edges.len();
        for l in &locs {
            edge_of.insert(*l, id);
        }
        edges.push(FaultEdge {
            id,
            endpoints: ends,
            boundary: None,
            kind: ek,
            p,
            weight: weight_of(p),
            locations: locs,
            signature: sig,
            partner: None,
        });
    }
    let mut graph = CheckGraph {
        kind,
        nodes: sk.nodes,
        edges,
        boundaries: Vec::new(),
        observables: spec.observables.iter().filter(|o| o.check == kind).map(|o| o.name.clone()).collect(),
        logical_edges: Vec::new(),
        adj_start: Vec::new(),
        adj: Vec::new(),
        qweight: Vec::new(),
        boundary_dist: Vec::new(),
        boundary_pred: Vec::new(),
    };
    graph.finish_adjacency();
    Ok(Built { graph, edge_of })
}

impl CheckGraph {
    /// A graph from explicit parts (tests, external cross-checks). Each edge
    /// is (endpoints, weight); one-endpoint edges end on a single boundary.
    pub fn from_parts(kind: Pauli, num_nodes: usize, parts: &[(Vec<usize>, f64)]) -> CheckGraph {
        let nodes = (0..num_nodes).map(|id| CheckNode { id, kind, t: 0, position: (id as i32, 0) }).collect();
        let mut boundary = BoundaryComponent { name: "boundary".into(), label: 0, edges: Vec::new() };
        let edges = parts
            .iter()
            .enumerate()
            .map(|(id, (ends, w))| {
                if ends.len() == 1 {
                    boundary.edges.push(id);
                }
                FaultEdge {
                    id,
                    endpoints: ends.clone(),
                    boundary: (ends.len() == 1).then_some(0),
                    kind: EdgeKind::Spacelike,
                    p: 1.0 / (1.0 + w.exp()),
                    weight: *w,
                    locations: vec![Location::Data { qubit: (id as i32, 0), layer: 0 }],
                    signature: 0,
                    partner: None,
                }
            })
            .collect();
        let mut g = CheckGraph {
            kind,
            nodes,
            edges,
            boundaries: if boundary.edges.is_empty() { vec![] } else { vec![boundary] },
            observables: vec![],
            logical_edges: vec![],
            adj_start: vec![],
            adj: vec![],
            qweight: vec![],
            boundary_dist: vec![],
            boundary_pred: vec![],
        };
        g.finish_adjacency();
        g
    }

    fn finish_adjacency(&mut self) {
        let n = self.nodes.len();
        let mut deg = vec![0u32; n + 1];
        for e in &self.edges {
            for &u in &e.endpoints {
                deg[u] += 1;
            }
        }
        let mut start = vec![0u32; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + deg[i];
        }
        let mut fill = start.clone();
        let mut adj = vec![(0u32, 0u32); start[n] as usize];
        for e in &self.edges {
            match e.endpoints.as_slice() {
                [u] => {
                    adj[fill[*u] as usize] = (e.id as u32, NO_NODE);
                    fill[*u] += 1;
                }
                [u, v] => {
                    adj[fill[*u] as usize] = (e.id as u32, *v as u32);
                    fill[*u] += 1;
                    adj[fill[*v] as usize] = (e.id as u32, *u as u32);
                    fill[*v] += 1;
                }
                _ => {}
            }
        }
        self.adj_start = start;
        self.adj = adj;
        self.qweight = self.edges.iter().map(|e| quantize(e.weight)).collect();
        self.boundary_field();
    }

    /// Multi-source Dijkstra seeded by every boundary edge.
    fn boundary_field(&mut self) {
        let n = self.nodes.len();
        let mut dist = vec![UNREACHABLE; n];
        let mut pred = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        for e in &self.edges {
            if let [u] = e.endpoints.as_slice() {
                let w = self.qweight[e.id];
                if w < dist[*u] {
                    dist[*u] = w;
                    pred[*u] = e.id as u32;
                }
            }
        }
        for (u, &d) in dist.iter().enumerate() {
            if d < UNREACHABLE {
                heap.push(Reverse((d, u)));
            }
        }
        while let Some(Reverse((du, u))) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for &(e, v) in self.neighbours(u) {
                if v == NO_NODE {
                    continue;
                }
                let nd = du + self.qweight[e as usize];
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    pred[v as usize] = e;
                    heap.push(Reverse((nd, v as usize)));
                }
            }
        }
        self.boundary_dist = dist;
        self.boundary_pred = pred;
    }

    #[inline]
    pub(crate) fn neighbours(&self, u: usize) -> &[(u32, u32)] {
        &self.adj[self.adj_start[u] as usize..self.adj_start[u + 1] as usize]
    }

    pub fn boundary_by_name(&self, name: &str) -> Option<usize> {
        self.boundaries.iter().position(|b| b.name == name)
    }

    /// Line-oriented dump: `node id t x y` and
    /// `edge id u v|B<comp>|L p weight kind t x y signature`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "graph {:?} nodes {} edges {}", self.kind, self.nodes.len(), self.edges.len());
        for (i, b) in self.boundaries.iter().enumerate() {
            let _ = writeln!(s, "boundary {i} {} label {} edges {}", b.name, b.label, b.edges.len());
        }
        for n in &self.nodes {
            let _ = writeln!(s, "node {} {} {} {}", n.id, n.t, n.position.0, n.position.1);
        }
        for e in &self.edges {
            let ends = match (e.endpoints.as_slice(), e.boundary) {
                ([u, v], _) => format!("{u} {v}"),
                ([u], Some(b)) => format!("{u} B{b}"),
                ([u], None) => format!("{u} B?"),
                _ => "L L".to_string(),
            };
            let (t, x, y) = e.coord();
            let _ = writeln!(
                s,
                "edge {} {ends} {:.10e} {:.10e} {:?} {t} {x} {y} {}",
                e.id, e.p, e.weight, e.kind, e.signature
            );
        }
        s
    }
}

/// Potential φ over nodes with sig(e) = φ(u) ⊕ φ(v) on two-endpoint edges.
fn potential(g: &CheckGraph) -> Result<Vec<u32>> {
    let n = g.nodes.len();
    let mut phi = vec![u32::MAX; n];
    for root in 0..n {
        if phi[root] != u32::MAX {
            continue;
        }
        phi[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(e, v) in g.neighbours(u) {
                if v == NO_NODE {
                    continue;
                }
                let want = phi[u] ^ g.edges[e as usize].signature;
                let v = v as usize;
                if phi[v] == u32::MAX {
                    phi[v] = want;
                    queue.push_back(v);
                } else if phi[v] != want {
                    return Err(Error::Consistency(format!(
                        "observable signatures are inconsistent around edge {e}; an observable is not deterministic"
                    )));
                }
            }
        }
    }
    Ok(phi)
}

/// Groups boundary edges by label, orders components canonically and names
/// them from the protocol's expected labels.
fn label_boundaries(g: &mut CheckGraph, spec: &ProtocolSpec) -> Result<()> {
    let phi = potential(g)?;
    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for e in &g.edges {
        if let [u] = e.endpoints.as_slice() {
            by_label.entry(e.signature ^ phi[*u]).or_default().push(e.id);
        }
    }
    let mut comps: Vec<(u32, Vec<usize>)> = by_label.into_iter().collect();
    comps.sort_by_key(|(_, es)| es.iter().map(|&e| g.edges[e].coord()).min());
    let expected: Vec<(&str, u32)> =
        spec.boundary_names.iter().filter(|b| b.check == g.kind).map(|b| (b.name.as_str(), b.label)).collect();
    let labels: Vec<u32> = comps.iter().map(|c| c.0).collect();
    let shift = resolve_shift(&labels, &expected);
    if shift.is_none() && !labels.is_empty() && !expected.is_empty() {
        return Err(Error::Consistency(format!(
            "{:?}-check boundary labels {labels:?} do not match the protocol's {expected:?}",
            g.kind
        )));
    }
    g.boundaries = comps
        .into_iter()
        .enumerate()
        .map(|(i, (label, edges))| {
            let (name, label) = match shift {
                Some(c) => {
                    let l = label ^ c;
                    (expected.iter().find(|x| x.1 == l).unwrap().0.to_string(), l)
                }
                None => (format!("b{i}"), label),
            };
            BoundaryComponent { name, label, edges }
        })
        .collect();
    for (ci, b) in g.boundaries.clone().iter().enumerate() {
        for &e in &b.edges {
            g.edges[e].boundary = Some(ci);
        }
    }
    for e in &g.edges {
        if e.endpoints.is_empty() {
            let mut pairs = Vec::new();
            for i in 0..g.boundaries.len() {
                for j in i + 1..g.boundaries.len() {
                    if g.boundaries[i].label ^ g.boundaries[j].label == e.signature {
                        pairs.push((i, j));
                    }
                }
            }
            g.logical_edges.push((e.id, (pairs.len() == 1).then(|| pairs[0])));
        }
    }
    Ok(())
}

/// Global XOR mapping the observed labels into the expected set. Components
/// whose edges all have zero probability are absent, so the observed labels
/// may be a subset. Ties go to the assignment that keeps declared order
/// aligned with canonical order.
fn resolve_shift(labels: &[u32], expected: &[(&str, u32)]) -> Option<u32> {
    if labels.is_empty() || labels.len() > expected.len() {
        return None;
    }
    let mut best: Option<(Vec<Option<usize>>, u32)> = None;
    for &l in labels {
        for &(_, x) in expected {
            let c = l ^ x;
            if !labels.iter().all(|v| expected.iter().any(|e| e.1 == v ^ c)) {
                continue;
            }
            let order: Vec<Option<usize>> =
                expected.iter().map(|(_, x)| labels.iter().position(|v| v ^ c == *x)).collect();
            if best.as_ref().is_none_or(|(o, _)| order < *o) {
                best = Some((order, c));
            }
        }
    }
    best.map(|b| b.1)
}

/// Builds both check graphs of a protocol with edge probabilities from `noise`.
pub fn compile(spec: &ProtocolSpec, noise: &NoiseParams) -> Result<CheckGraphPair> {
    spec.validate()?;
    noise.validate_for_decoding()?;
    let mut parts = Vec::new();
    for kind in [Pauli::Z, Pauli::X] {
        let Built { mut graph, edge_of } = assemble(spec, kind, noise)?;
        label_boundaries(&mut graph, spec)?;
        parts.push((graph, edge_of));
    }
    let (mut x, x_of) = parts.pop().unwrap();
    let (mut z, z_of) = parts.pop().unwrap();

    let mut spacelike = Vec::new();
    let mut links = std::collections::BTreeSet::new();
    for life in spec.qubits() {
        for layer in life.first..=life.last + 1 {
            let loc = Location::Data { qubit: life.pos, layer };
            let ze = z_of.get(&loc).copied();
            let xe = x_of.get(&loc).copied();
            if let (Some(a), Some(b)) = (ze, xe) {
                links.insert((a, b));
            }
            spacelike.push(SpaceLocation {
                qubit: life.pos,
                layer,
                z_edge: ze.map(|e| e as u32),
                x_edge: xe.map(|e| e as u32),
            });
        }
    }
    for e in z.edges.iter_mut() {
        e.partner = x_of.get(&e.locations[0]).copied();
    }
    for e in x.edges.iter_mut() {
        e.partner = z_of.get(&e.locations[0]).copied();
    }
    let timelike = |kind, of: &HashMap<Location, usize>| {
        measurement_locations(spec, kind).into_iter().map(|l| of.get(&l).map(|&e| e as u32)).collect::<Vec<_>>()
    };
    Ok(CheckGraphPair {
        z_timelike: timelike(Pauli::Z, &z_of),
        x_timelike: timelike(Pauli::X, &x_of),
        z,
        x,
        spacelike,
        correlation_links: links.into_iter().collect(),
        spec: spec.clone(),
        noise: *noise,
    })
}

/// Outcome of a fault-distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultDistance {
    Finite(usize),
    /// Fewer than two boundary components, or none connected.
    NoLogicalClass,
}

/// Fewest faults forming a string between two distinct boundary components.
pub fn fault_distance(g: &CheckGraph) -> FaultDistance {
    let k = g.boundaries.len();
    if k < 2 {
        return FaultDistance::NoLogicalClass;
    }
    let mut best = usize::MAX;
    for &(_, pair) in &g.logical_edges {
        if pair.is_some() {
            best = 1;
        }
    }
    let n = g.nodes.len();
    for a in 0..k {
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &e in &g.boundaries[a].edges {
            let u = g.edges[e].endpoints[0];
            if dist[u] == usize::MAX {
                dist[u] = 1;
                queue.push_back(u);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &(_, v) in g.neighbours(u) {
                if v != NO_NODE && dist[v as usize] == usize::MAX {
                    dist[v as usize] = dist[u] + 1;
                    queue.push_back(v as usize);
                }
            }
        }
        for b in g.boundaries.iter().skip(a + 1) {
            for &e in &b.edges {
                let u = g.edges[e].endpoints[0];
                if dist[u] != usize::MAX {
                    best = best.min(dist[u] + 1);
                }
            }
        }
    }
    if best == usize::MAX {
        FaultDistance::NoLogicalClass
    } else {
        FaultDistance::Finite(best)
    }
}

/// Protocol fault distance: the smaller of the two graphs' distances.
pub fn pair_fault_distance(pair: &CheckGraphPair) -> FaultDistance {
    match (fault_distance(&pair.z), fault_distance(&pair.x)) {
        (FaultDistance::Finite(a), FaultDistance::Finite(b)) => FaultDistance::Finite(a.min(b)),
        (FaultDistance::Finite(a), _) | (_, FaultDistance::Finite(a)) => FaultDistance::Finite(a),
        _ => FaultDistance::NoLogicalClass,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryReport {
    pub holds: bool,
    /// Z-graph node i ↦ X-graph node `node_map[i]` (empty if not a CNOT or
    /// the node sets cannot correspond).
    pub node_map: Vec<usize>,
    pub diagnostic: Option<String>,
}

impl SymmetryReport {
    fn fail(node_map: Vec<usize>, msg: String) -> SymmetryReport {
        SymmetryReport { holds: false, node_map, diagnostic: Some(msg) }
    }
}

/// The CNOT spacetime map: time reversal, reflection through the ancilla's
/// diagonal that swaps the two merge sides, and X ↔ Z.
fn cnot_point_map(spec: &ProtocolSpec) -> impl Fn(i32, Coord) -> (i32, Coord) {
    let d = spec.params.d as i32;
    let xa = spec.patches[1].region.origin.0;
    let total = 2 * spec.rounds as i32 - 2;
    move |t, (x, y)| (total - t, (xa + 2 * d - 2 - y, 2 * d - 2 - (x - xa)))
}

/// Checks that the CNOT symmetry maps the Z-check graph onto the X-check
/// graph, edge for edge with equal probabilities and matching boundaries.
pub fn verify_symmetry(pair: &CheckGraphPair) -> SymmetryReport {
    let (z, x) = (&pair.z, &pair.x);
    if pair.spec.kind != ProtocolKind::Cnot {
        return SymmetryReport::fail(vec![], "symmetry is defined for CNOT protocols only".into());
    }
    if z.boundaries.len() != x.boundaries.len() {
        return SymmetryReport::fail(
            vec![],
            format!("boundary component counts differ: {} vs {}", z.boundaries.len(), x.boundaries.len()),
        );
    }
    if z.nodes.len() != x.nodes.len() || z.edges.len() != x.edges.len() {
        return SymmetryReport::fail(
            vec![],
            format!(
                "graph sizes differ: {} nodes/{} edges vs {} nodes/{} edges",
                z.nodes.len(),
                z.edges.len(),
                x.nodes.len(),
                x.edges.len()
            ),
        );
    }
    let map = cnot_point_map(&pair.spec);
    let x_index: HashMap<(i32, Coord), usize> = x.nodes.iter().map(|n| ((n.t, n.position), n.id)).collect();
    let mut node_map = Vec::with_capacity(z.nodes.len());
    for n in &z.nodes {
        match x_index.get(&map(n.t, n.position)) {
            Some(&m) => node_map.push(m),
            None => {
                return SymmetryReport::fail(
                    vec![],
                    format!("Z-check node {} at t={} {:?} has no X-check image", n.id, n.t, n.position),
                )
            }
        }
    }
    let mut seen = vec![false; x.nodes.len()];
    for &m in &node_map {
        if std::mem::replace(&mut seen[m], true) {
            return SymmetryReport::fail(node_map.clone(), format!("X-check node {m} is hit twice"));
        }
    }
    let x_edges: HashMap<Vec<usize>, Vec<usize>> = x.edges.iter().fold(HashMap::new(), |mut acc, e| {
        let mut k = e.endpoints.clone();
        k.sort_unstable();
        acc.entry(k).or_default().push(e.id);
        acc
    });
    let mut comp_map: Vec<Option<usize>> = vec![None; z.boundaries.len()];
    for e in &z.edges {
        let mut k: Vec<usize> = e.endpoints.iter().map(|&u| node_map[u]).collect();
        k.sort_unstable();
        let cands = x_edges.get(&k).cloned().unwrap_or_default();
        let hit = cands.iter().find(|&&c| {
            let f = &x.edges[c];
            let same_p = (f.p - e.p).abs() <= 1e-12 * e.p.max(f.p);
            let same_comp = match (e.boundary, f.boundary) {
                (Some(a), Some(b)) => comp_map[a].is_none_or(|m| m == b),
                (None, None) => true,
                _ => false,
            };
            same_p && same_comp && (!e.endpoints.is_empty() || f.signature.count_ones() == e.signature.count_ones())
        });
        match hit {
            Some(&c) => {
                if let (Some(a), Some(b)) = (e.boundary, x.edges[c].boundary) {
                    comp_map[a] = Some(b);
                }
            }
            None => {
                let (t, px, py) = e.coord();
                return SymmetryReport::fail(
                    node_map,
                    format!("Z-check edge {} at (t={t}, {px}, {py}) p={:.6e} has no matching image", e.id, e.p),
                );
            }
        }
    }
    SymmetryReport { holds: true, node_map, diagnostic: None }
}
