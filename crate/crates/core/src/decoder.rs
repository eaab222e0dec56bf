//! Exact minimum-weight matching decoder.
//!
//! Defects are paired with each other or sent to the boundary. The reduction
//! gives every defect a boundary surrogate: defect–surrogate edges cost the
//! defect's boundary distance, defect–defect edges their path length, and
//! surrogate–surrogate edges are free. Only defect pairs closer to each other
//! than to the boundary can appear in an optimal solution, so the matching
//! graph stays sparse and splits into small independent components.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::checkgraph::{CheckGraph, NO_NODE, UNREACHABLE as INF};
use crate::error::{Error, Result};
use crate::matching::max_weight_matching;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Syndrome {
    /// Sorted node ids.
    pub defects: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correction {
    /// Sorted edge ids.
    pub edges: Vec<u32>,
    pub total_weight: f64,
}

/// Nodes touched by an odd number of flipped edges.
pub fn extract_syndrome(g: &CheckGraph, flips: &[u32]) -> Syndrome {
    let hits: Vec<u32> = flips.iter().flat_map(|&e| g.edges[e as usize].endpoints.iter().map(|&u| u as u32)).collect();
    let defects = crate::noise::odd_ids(hits).into_iter().map(|u| u as usize).collect();
    Syndrome { defects }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    node: u32,
    dist: i64,
    /// Edge towards the ball's centre; `NONE` at the centre.
    pred: u32,
}

/// Where the shortest path between two defects passes from one ball into
/// the other: entry `a` of the first ball, entry `b` of the second, and the
/// edge joining them (`NONE` if they are the same node).
#[derive(Debug, Clone, Copy)]
struct Meet {
    i: u32,
    j: u32,
    dist: i64,
    a: u32,
    b: u32,
    edge: u32,
}

/// Per-worker scratch space; reusable across shots and graphs.
#[derive(Debug, Default)]
pub struct Decoder {
    dist: Vec<i64>,
    pred: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
    entries: Vec<Entry>,
    owner: Vec<u32>,
    balls: Vec<(usize, usize)>,
    head: Vec<u32>,
    head_stamp: Vec<u32>,
    next: Vec<u32>,
    meets: Vec<Meet>,
}

impl Decoder {
    pub fn new() -> Decoder {
        Decoder::default()
    }

    fn prepare(&mut self, n: usize) {
        if self.dist.len() < n {
            self.dist.resize(n, INF);
            self.pred.resize(n, NONE);
            self.stamp.resize(n, 0);
            self.head.resize(n, NONE);
            self.head_stamp.resize(n, 0);
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.head_stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    #[inline]
    fn d(&self, u: usize) -> i64 {
        if self.stamp[u] == self.epoch {
            self.dist[u]
        } else {
            INF
        }
    }

    /// Dijkstra over bulk edges from `src`, recording every node settled
    /// within `radius` as an entry of a new ball (sorted by node).
    fn grow(&mut self, g: &CheckGraph, src: usize, radius: i64) {
        let epoch = self.next_epoch();
        let start = self.entries.len();
        self.heap.clear();
        self.stamp[src] = epoch;
        self.dist[src] = 0;
        self.pred[src] = NONE;
        self.heap.push(Reverse((0, src as u32)));
        while let Some(Reverse((du, u))) = self.heap.pop() {
            let u = u as usize;
            if du > radius {
                break;
            }
            if du > self.d(u) {
                continue;
            }
            self.entries.push(Entry { node: u as u32, dist: du, pred: self.pred[u] });
            for &(e, v) in g.neighbours(u) {
                if v == NO_NODE {
                    continue;
                }
                let v = v as usize;
                let nd = du + g.qweight[e as usize];
                if nd < self.d(v) {
                    self.stamp[v] = epoch;
                    self.dist[v] = nd;
                    self.pred[v] = e;
                    self.heap.push(Reverse((nd, v as u32)));
                }
            }
        }
        self.entries[start..].sort_unstable_by_key(|e| e.node);
        self.balls.push((start, self.entries.len()));
    }

    fn entry_in(&self, ball: usize, node: usize) -> &Entry {
        let (s, e) = self.balls[ball];
        let slice = &self.entries[s..e];
        let k = slice.binary_search_by_key(&(node as u32), |x| x.node).expect("path stays inside its ball");
        &slice[k]
    }

    /// Edges from `node` back to the centre of `ball`.
    fn walk(&self, g: &CheckGraph, ball: usize, mut node: usize, out: &mut Vec<u32>) {
        loop {
            let pred = self.entry_in(ball, node).pred;
            if pred == NONE {
                return;
            }
            out.push(pred);
            let ends = &g.edges[pred as usize].endpoints;
            node = if ends[0] == node { ends[1] } else { ends[0] };
        }
    }

    /// Candidate defect pairs: every node shared by two balls and every edge
    /// joining them. A pair closer than the sum of its boundary distances has
    /// a shortest path that leaves one ball exactly where it enters the other,
    /// so the minimum candidate is its exact distance.
    fn meet(&mut self, g: &CheckGraph, bd: &[i64]) {
        let epoch = self.epoch;
        self.owner.clear();
        for (i, &(s, e)) in self.balls.iter().enumerate() {
            self.owner.extend(std::iter::repeat_n(i as u32, e - s));
        }
        self.next.clear();
        self.next.resize(self.entries.len(), NONE);
        for (idx, en) in self.entries.iter().enumerate() {
            let x = en.node as usize;
            if self.head_stamp[x] == epoch {
                self.next[idx] = self.head[x];
            }
            self.head_stamp[x] = epoch;
            self.head[x] = idx as u32;
        }
        let head = |x: usize| if self.head_stamp[x] == epoch { self.head[x] } else { NONE };
        let k = self.balls.len();
        self.meets.clear();
        // Best meeting of the current ball with each later ball.
        let mut best: Vec<Option<Meet>> = vec![None; k];
        let mut touched: Vec<u32> = Vec::new();
        for (i, &(s, e)) in self.balls.iter().enumerate() {
            for a in s..e {
                let en = self.entries[a];
                let x = en.node as usize;
                let mut consider = |b: u32, w: i64, edge: u32| {
                    let j = self.owner[b as usize] as usize;
                    if j <= i {
                        return;
                    }
                    let dist = en.dist + w + self.entries[b as usize].dist;
                    let (bi, bj) = (bd[i], bd[j]);
                    if !(bi >= INF || bj >= INF || dist < bi + bj) {
                        return;
                    }
                    match &mut best[j] {
                        Some(m) if m.dist <= dist => {}
                        slot => {
                            if slot.is_none() {
                                touched.push(j as u32);
                            }
                            *slot = Some(Meet { i: i as u32, j: j as u32, dist, a: a as u32, b, edge });
                        }
                    }
                };
                let mut b = head(x);
                while b != NONE {
                    consider(b, 0, NONE);
                    b = self.next[b as usize];
                }
                for &(edge, y) in g.neighbours(x) {
                    if y == NO_NODE {
                        continue;
                    }
                    let mut b = head(y as usize);
                    while b != NONE {
                        consider(b, g.qweight[edge as usize], edge);
                        b = self.next[b as usize];
                    }
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                self.meets.extend(best[j as usize].take());
            }
            touched.clear();
        }
    }

    pub fn decode(&mut self, g: &CheckGraph, syndrome: &Syndrome) -> Result<Correction> {
        let defects = &syndrome.defects;
        let k = defects.len();
        if k == 0 {
            return Ok(Correction::default());
        }
        let n = g.nodes.len();
        if let Some(&u) = defects.iter().find(|&&u| u >= n) {
            return Err(Error::Validation(format!("defect {u} is not a node of the graph")));
        }
        self.prepare(n);
        let bd: Vec<i64> = defects.iter().map(|&u| g.boundary_dist[u]).collect();
        self.entries.clear();
        self.balls.clear();
        for (i, &u) in defects.iter().enumerate() {
            self.grow(g, u, bd[i]);
        }
        self.next_epoch();
        self.meet(g, &bd);
        let pairs: Vec<(usize, usize, i64)> = self.meets.iter().map(|m| (m.i as usize, m.j as usize, m.dist)).collect();

        let mate = match_components(k, &bd, &pairs)?;

        let mut path = Vec::new();
        for i in 0..k {
            match mate[i] {
                m if m == i + k => {
                    let mut v = defects[i];
                    loop {
                        let e = g.boundary_pred[v];
                        path.push(e);
                        match g.edges[e as usize].endpoints.as_slice() {
                            [a, b] => v = if *a == v { *b } else { *a },
                            _ => break,
                        }
                    }
                }
                m if m < k && m > i => {
                    let at = self.meets.partition_point(|x| (x.i as usize, x.j as usize) < (i, m));
                    let meet = self.meets[at];
                    let (a, b) = (self.entries[meet.a as usize].node, self.entries[meet.b as usize].node);
                    self.walk(g, i, a as usize, &mut path);
                    if meet.edge != NONE {
                        path.push(meet.edge);
                    }
                    self.walk(g, m, b as usize, &mut path);
                }
                _ => {}
            }
        }
        let edges = crate::noise::odd_ids(path);
        let total_weight = edges.iter().map(|&e| g.edges[e as usize].weight).sum();
        Ok(Correction { edges, total_weight })
    }
}

/// Minimum-weight perfect matching on the sparse surrogate graph, component by
/// component. Returns mate of each of the 2k vertices (surrogate of i is k+i).
fn match_components(k: usize, bd: &[i64], pairs: &[(usize, usize, i64)]) -> Result<Vec<usize>> {
    let mut edges: Vec<(usize, usize, i64)> = Vec::with_capacity(k + 2 * pairs.len());
    for (i, &b) in bd.iter().enumerate() {
        if b < INF {
            edges.push((i, k + i, b));
        }
    }
    for &(i, j, d) in pairs {
        edges.push((i, j, d));
        edges.push((k + i, k + j, 0));
    }
    // Union-find over the 2k vertices.
    let mut parent: Vec<usize> = (0..2 * k).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b, _) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..2 * k).map(|v| find(&mut parent, v)).collect();
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_unstable_by_key(|&v| (roots[v], v));
    edges.sort_unstable_by_key(|e| roots[e.0]);

    let mut mate = vec![usize::MAX; 2 * k];
    let mut local = vec![usize::MAX; 2 * k];
    let (mut vs, mut es) = (0, 0);
    while vs < order.len() {
        let root = roots[order[vs]];
        let ve = vs + order[vs..].iter().take_while(|&&v| roots[v] == root).count();
        let ee = es + edges[es..].iter().take_while(|e| roots[e.0] == root).count();
        let verts = &order[vs..ve];
        match *verts {
            // An isolated surrogate whose defect matched elsewhere is fine;
            // an isolated defect is not.
            [v] if v < k => return Err(Error::Consistency(format!("defect {v} cannot be matched"))),
            [_] => {}
            // Connected, so the two vertices share an edge.
            [a, b] => {
                mate[a] = b;
                mate[b] = a;
            }
            _ if verts.iter().filter(|&&v| v < k).count() <= DP_MAX => {
                pair_by_dp(k, bd, verts, &edges[es..ee], &mut local, &mut mate)?;
            }
            _ => {
                for (li, &v) in verts.iter().enumerate() {
                    local[v] = li;
                }
                let comp = &edges[es..ee];
                let cmax = comp.iter().map(|e| e.2).max().unwrap_or(0) + 1;
                let mapped: Vec<(usize, usize, i64)> =
                    comp.iter().map(|&(a, b, w)| (local[a], local[b], 2 * (cmax - w))).collect();
                let m = max_weight_matching(verts.len(), &mapped, true);
                for (li, &v) in verts.iter().enumerate() {
                    if let Some(o) = m[li] {
                        mate[v] = verts[o];
                    }
                }
            }
        }
        (vs, es) = (ve, ee);
    }
    if let Some(i) = mate[..k].iter().position(|&m| m == usize::MAX) {
        return Err(Error::Consistency(format!("defect {i} left unmatched; odd residue")));
    }
    Ok(mate)
}

/// Components with at most this many defects are matched by exhaustive DP.
const DP_MAX: usize = 12;

/// Exact matching of one component: every defect either pairs with another
/// along a candidate edge or goes to the boundary, which is what a perfect
/// matching of the surrogate graph amounts to. Sets `mate` for the defects.
fn pair_by_dp(
    k: usize,
    bd: &[i64],
    verts: &[usize],
    edges: &[(usize, usize, i64)],
    local: &mut [usize],
    mate: &mut [usize],
) -> Result<()> {
    let real: Vec<usize> = verts.iter().copied().filter(|&v| v < k).collect();
    let m = real.len();
    if m == 0 {
        return Ok(());
    }
    for (li, &v) in real.iter().enumerate() {
        local[v] = li;
    }
    let mut w = vec![INF; m * m];
    for &(a, b, d) in edges {
        if a < k && b < k {
            let (la, lb) = (local[a], local[b]);
            w[la * m + lb] = w[la * m + lb].min(d);
            w[lb * m + la] = w[la * m + lb];
        }
    }
    let full = (1usize << m) - 1;
    let mut f = vec![INF; full + 1];
    // Partner of the lowest defect in each mask; `m` means the boundary.
    let mut choice = vec![0u8; full + 1];
    f[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let (mut best, mut pick) = (INF, m);
        if bd[real[i]] < INF && f[rest] < INF {
            best = f[rest] + bd[real[i]];
        }
        let mut js = rest;
        while js != 0 {
            let j = js.trailing_zeros() as usize;
            js &= js - 1;
            let (wij, sub) = (w[i * m + j], f[rest & !(1 << j)]);
            if wij < INF && sub < INF && wij + sub < best {
                (best, pick) = (wij + sub, j);
            }
        }
        f[mask] = best;
        choice[mask] = pick as u8;
    }
    if f[full] >= INF {
        return Err(Error::Consistency(format!("defect {} cannot be matched", real[0])));
    }
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask] as usize;
        let (a, b) = if j == m { (real[i], real[i] + k) } else { (real[i], real[j]) };
        mate[a] = b;
        mate[b] = a;
        mask &= !(1 << i);
        if j < m {
            mask &= !(1 << j);
        }
    }
    Ok(())
}

/// Convenience wrapper with fresh scratch space.
pub fn decode(g: &CheckGraph, syndrome: &Syndrome) -> Result<Correction> {
    Decoder::new().decode(g, syndrome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkgraph::compile;
    use crate::geometry::Pauli;
    use crate::noise::{sample_faults, shot_rng, NoiseParams};
    use crate::protocol::{build_cnot, build_memory, TimeBoundary};
    use rand::Rng;

    type Parts = Vec<(Vec<usize>, f64)>;

    fn graph(n: usize, parts: &Parts) -> CheckGraph {
        CheckGraph::from_parts(Pauli::Z, n, parts)
    }

    /// Oracle: all-pairs shortest paths (boundary as an extra node), then the
    /// cheapest pairing/boundary assignment by DP over defect subsets.
    fn brute_force(n: usize, parts: &Parts, defects: &[usize]) -> Option<f64> {
        let m = n + 1;
        let mut d = vec![vec![f64::INFINITY; m]; m];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (ends, w) in parts {
            let (a, b) = (ends[0], if ends.len() == 2 { ends[1] } else { n });
            if *w < d[a][b] {
                d[a][b] = *w;
                d[b][a] = *w;
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let k = defects.len();
        let mut f = vec![f64::INFINITY; 1 << k];
        f[0] = 0.0;
        for mask in 1usize..1 << k {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let mut best = d[defects[i]][n] + f[rest];
            for j in 0..k {
                if rest & (1 << j) != 0 {
                    best = best.min(d[defects[i]][defects[j]] + f[rest & !(1 << j)]);
                }
            }
            f[mask] = best;
        }
        let v = f[(1 << k) - 1];
        v.is_finite().then_some(v)
    }

    fn residual(g: &CheckGraph, faults: &[u32], c: &Correction) -> Vec<usize> {
        let mut all = faults.to_vec();
        all.extend_from_slice(&c.edges);
        extract_syndrome(g, &crate::noise::odd_ids(all)).defects
    }

    #[test]
    fn single_edge_between_two_defects() {
        // 0 -3.5- 1, detour 0 -2- 2 -2- 1, boundaries at weight 5 each.
        let parts: Parts =
            vec![(vec![0, 1], 3.5), (vec![0, 2], 2.0), (vec![2, 1], 2.0), (vec![0], 5.0), (vec![1], 5.0)];
        let g = graph(3, &parts);
        let c = decode(&g, &Syndrome { defects: vec![0, 1] }).unwrap();
        assert_eq!(c.edges, vec![0]);
        assert_eq!(c.total_weight, 3.5);
        assert_eq!(brute_force(3, &parts, &[0, 1]), Some(3.5));
    }

    #[test]
    fn two_boundary_matches() {
        let parts: Parts = vec![(vec![0], 2.0), (vec![0, 1], 3.0), (vec![1, 2], 3.0), (vec![2], 2.0)];
        let g = graph(3, &parts);
        let c = decode(&g, &Syndrome { defects: vec![0, 2] }).unwrap();
        assert_eq!(c.edges, vec![0, 3]);
        assert_eq!(c.total_weight, 4.0);
    }

    #[test]
    fn empty_syndrome_and_bad_defect() {
        let g = graph(2, &vec![(vec![0, 1], 1.0)]);
        assert!(decode(&g, &Syndrome::default()).unwrap().edges.is_empty());
        assert!(decode(&g, &Syndrome { defects: vec![0] }).is_err());
        assert!(decode(&g, &Syndrome { defects: vec![7] }).is_err());
    }

    fn random_instance(rng: &mut impl Rng) -> (usize, Parts, Vec<usize>) {
        let n = rng.gen_range(2..=30);
        let mut parts: Parts = Vec::new();
        let w = |rng: &mut _| f64::from(Rng::gen_range(rng, 1..=40u32)) / 4.0;
        for v in 1..n {
            let u = rng.gen_range(0..v);
            parts.push((vec![u, v], w(rng)));
        }
        for _ in 0..rng.gen_range(0..=n) {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                parts.push((vec![a, b], w(rng)));
            }
        }
        let with_boundary = rng.gen_bool(0.8);
        if with_boundary {
            for _ in 0..rng.gen_range(1..=3) {
                parts.push((vec![rng.gen_range(0..n)], w(rng)));
            }
        }
        let mut k = rng.gen_range(0..=n.min(10));
        if !with_boundary {
            k &= !1;
        }
        let mut nodes: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.gen_range(i..n);
            nodes.swap(i, j);
        }
        let mut defects = nodes[..k].to_vec();
        defects.sort_unstable();
        (n, parts, defects)
    }

    #[test]
    fn exact_on_random_graphs() {
        let mut rng = shot_rng(2024, 0);
        let mut dec = Decoder::new();
        for case in 0..600 {
            let (n, parts, defects) = random_instance(&mut rng);
            let g = graph(n, &parts);
            let syn = Syndrome { defects: defects.clone() };
            let c = dec.decode(&g, &syn).unwrap();
            let best = brute_force(n, &parts, &defects).unwrap();
            assert_eq!(c.total_weight, best, "case {case}: n={n} defects={defects:?}");
            assert!(residual(&g, &[], &c) == defects, "case {case}: correction does not explain syndrome");
        }
    }

    #[test]
    fn unused_heavy_edge_changes_nothing() {
        let mut rng = shot_rng(77, 0);
        for _ in 0..200 {
            let (n, mut parts, defects) = random_instance(&mut rng);
            let syn = Syndrome { defects };
            let before = decode(&graph(n, &parts), &syn).unwrap().total_weight;
            let heavy: f64 = parts.iter().map(|p| p.1).sum::<f64>() + 1.0;
            parts.push((vec![rng.gen_range(0..n), rng.gen_range(0..n)], heavy));
            if parts.last().unwrap().0[0] == parts.last().unwrap().0[1] {
                parts.pop();
            }
            assert_eq!(decode(&graph(n, &parts), &syn).unwrap().total_weight, before);
        }
    }

    #[test]
    fn corrections_annihilate_sampled_faults() {
        let noise = NoiseParams::independent(0.04);
        let specs = [
            build_memory(5, 5, TimeBoundary::Perfect, TimeBoundary::Perfect).unwrap(),
            build_cnot(3, 1, 2, 3, 2).unwrap(),
        ];
        let mut dec = Decoder::new();
        for spec in &specs {
            let pair = compile(spec, &noise).unwrap();
            for shot in 0..300 {
                let f = sample_faults(&pair, &noise, 11, shot);
                for (g, flips) in [(&pair.z, &f.z_flips), (&pair.x, &f.x_flips)] {
                    let c = dec.decode(g, &extract_syndrome(g, flips)).unwrap();
                    assert!(residual(g, flips, &c).is_empty());
                }
            }
        }
    }
}
