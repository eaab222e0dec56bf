//! Logical error classes from boundary-ending parities of closed chains.
//!
//! A chain (faults ⊕ correction) with even incidence at every check node is a
//! union of strings running between boundary components. Its class is fixed
//! by which components see an odd number of string ends.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::checkgraph::{CheckGraph, CheckGraphPair};
use crate::error::{Error, Result};
use crate::protocol::ProtocolKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryParities {
    /// (component name, odd number of ends), in the graph's component order.
    pub parities: Vec<(String, bool)>,
    /// Observables flipped by the chain: XOR of the odd components' labels.
    pub flips: u32,
}

impl BoundaryParities {
    pub fn get(&self, name: &str) -> Option<bool> {
        self.parities.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    /// A component without edges (all of zero probability) is never odd.
    fn bit(&self, name: &str) -> u8 {
        self.get(name).map_or(0, u8::from)
    }

    pub fn any_odd(&self) -> bool {
        self.parities.iter().any(|p| p.1)
    }
}

pub fn boundary_parities(g: &CheckGraph, chain: &[u32]) -> Result<BoundaryParities> {
    let mut node_odd = vec![false; g.nodes.len()];
    let mut comp_odd = vec![false; g.boundaries.len()];
    for &e in chain {
        let edge = g.edges.get(e as usize).ok_or_else(|| Error::Validation(format!("edge {e} is not in the graph")))?;
        for &u in &edge.endpoints {
            node_odd[u] ^= true;
        }
        if let Some(b) = edge.boundary {
            comp_odd[b] ^= true;
        }
        if edge.endpoints.is_empty() {
            match g.logical_edges.iter().find(|l| l.0 == edge.id) {
                Some((_, Some((i, j)))) => {
                    comp_odd[*i] ^= true;
                    comp_odd[*j] ^= true;
                }
                _ => return Err(Error::Consistency(format!("undetectable edge {e} has no unique boundary pair"))),
            }
        }
    }
    if let Some(u) = node_odd.iter().position(|&o| o) {
        return Err(Error::Consistency(format!("chain leaves check node {u} with odd incidence")));
    }
    let flips = g.boundaries.iter().zip(&comp_odd).filter(|(_, &o)| o).fold(0, |acc, (b, _)| acc ^ b.label);
    let parities = g.boundaries.iter().zip(comp_odd).map(|(b, o)| (b.name.clone(), o)).collect();
    Ok(BoundaryParities { parities, flips })
}

/// Logical X part of a CNOT error; bit 0 = X1, bit 1 = X2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum XPart {
    I,
    X1,
    X2,
    X1X2,
}

/// Logical Z part of a CNOT error; bit 0 = Z1, bit 1 = Z2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZPart {
    I,
    Z1,
    Z2,
    Z1Z2,
}

const XPARTS: [XPart; 4] = [XPart::I, XPart::X1, XPart::X2, XPart::X1X2];
const ZPARTS: [ZPart; 4] = [ZPart::I, ZPart::Z1, ZPart::Z2, ZPart::Z1Z2];

impl XPart {
    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(b: u8) -> XPart {
        XPARTS[(b & 3) as usize]
    }
}

impl ZPart {
    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(b: u8) -> ZPart {
        ZPARTS[(b & 3) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CnotClass {
    pub x: XPart,
    pub z: ZPart,
}

impl CnotClass {
    pub const IDENTITY: CnotClass = CnotClass { x: XPart::I, z: ZPart::I };

    pub fn new(x: XPart, z: ZPart) -> CnotClass {
        CnotClass { x, z }
    }

    /// 0..16, X part major.
    pub fn index(self) -> usize {
        4 * self.x.bits() as usize + self.z.bits() as usize
    }

    pub fn from_index(i: usize) -> CnotClass {
        CnotClass { x: XPart::from_bits((i / 4) as u8), z: ZPart::from_bits((i % 4) as u8) }
    }

    pub fn all() -> impl Iterator<Item = CnotClass> {
        (0..16).map(CnotClass::from_index)
    }

    /// Pauli product up to phase.
    pub fn product(self, o: CnotClass) -> CnotClass {
        CnotClass { x: XPart::from_bits(self.x.bits() ^ o.x.bits()), z: ZPart::from_bits(self.z.bits() ^ o.z.bits()) }
    }
}

impl fmt::Display for CnotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}⊗{:?}", self.x, self.z)
    }
}

impl std::str::FromStr for CnotClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<CnotClass> {
        CnotClass::all()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Validation(format!("unknown CNOT class '{s}'")))
    }
}

/// Maps an even triple of ending parities to one of four classes.
fn triple(a: u8, b: u8, c: u8) -> Result<u8> {
    match (a, b, c) {
        (0, 0, 0) => Ok(0),
        (1, 1, 0) => Ok(1),
        (1, 0, 1) => Ok(3),
        (0, 1, 1) => Ok(2),
        _ => Err(Error::Consistency(format!("odd boundary parities ({a},{b},{c})"))),
    }
}

/// `px`: parities on the Z-check graph (components A, B, C);
/// `pz`: parities on the X-check graph (components D, E, F).
pub fn classify_cnot(px: &BoundaryParities, pz: &BoundaryParities) -> Result<CnotClass> {
    let x = triple(px.bit("A"), px.bit("B"), px.bit("C"))?;
    // (1,0,1) on D/E/F is Z2 and (0,1,1) is Z1Z2: swap codes 2 and 3.
    let z = match triple(pz.bit("D"), pz.bit("E"), pz.bit("F"))? {
        2 => 3,
        3 => 2,
        v => v,
    };
    Ok(CnotClass { x: XPart::from_bits(x), z: ZPart::from_bits(z) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ZzClass {
    /// Wrong Z̄Z̄ outcome: both bridge components odd.
    pub timelike: bool,
    /// Logical X̄ on the left patch.
    pub spacelike_left: bool,
    /// Logical X̄ on the right patch.
    pub spacelike_right: bool,
    /// Logical Z̄ error seen by the X-check graph.
    pub z_error: bool,
}

impl ZzClass {
    pub fn is_identity(&self) -> bool {
        *self == ZzClass::default()
    }

    pub fn spacelike(&self) -> bool {
        self.spacelike_left || self.spacelike_right
    }
}

pub fn classify_zz(pzg: &BoundaryParities, pxg: &BoundaryParities) -> Result<ZzClass> {
    let (l, bl, bu, r) = (pzg.bit("left"), pzg.bit("bridge-lower"), pzg.bit("bridge-upper"), pzg.bit("right"));
    if (l + bl + bu + r) % 2 == 1 {
        return Err(Error::Consistency("odd total parity on the Z-check graph".into()));
    }
    let (t, b) = (pxg.bit("top"), pxg.bit("bottom"));
    if t != b {
        return Err(Error::Consistency("odd total parity on the X-check graph".into()));
    }
    Ok(ZzClass { timelike: bl == 1 && bu == 1, spacelike_left: l == 1, spacelike_right: r == 1, z_error: t == 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MemoryClass {
    I,
    X,
    Z,
    Y,
}

/// Graphs without an observable (measured time boundaries) contribute no class.
pub fn classify_memory(pzg: &BoundaryParities, pxg: &BoundaryParities) -> Result<MemoryClass> {
    for p in [pzg, pxg] {
        if p.parities.iter().filter(|q| q.1).count() % 2 == 1 {
            return Err(Error::Consistency("odd total boundary parity".into()));
        }
    }
    Ok(match (pzg.any_odd(), pxg.any_odd()) {
        (false, false) => MemoryClass::I,
        (true, false) => MemoryClass::X,
        (false, true) => MemoryClass::Z,
        (true, true) => MemoryClass::Y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalClass {
    Memory(MemoryClass),
    Zz(ZzClass),
    Cnot(CnotClass),
}

impl LogicalClass {
    pub fn is_identity(&self) -> bool {
        match self {
            LogicalClass::Memory(m) => *m == MemoryClass::I,
            LogicalClass::Zz(z) => z.is_identity(),
            LogicalClass::Cnot(c) => *c == CnotClass::IDENTITY,
        }
    }
}

impl fmt::Display for MemoryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl fmt::Display for ZzClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.timelike, "timelike"),
            (self.spacelike_left, "spacelike-left"),
            (self.spacelike_right, "spacelike-right"),
            (self.z_error, "Z"),
        ]
        .iter()
        .filter(|p| p.0)
        .map(|p| p.1)
        .collect();
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

impl fmt::Display for LogicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicalClass::Memory(m) => m.fmt(f),
            LogicalClass::Zz(z) => z.fmt(f),
            LogicalClass::Cnot(c) => c.fmt(f),
        }
    }
}

/// Classifies the residual chains of both graphs of a protocol.
pub fn classify(pair: &CheckGraphPair, z_chain: &[u32], x_chain: &[u32]) -> Result<LogicalClass> {
    let pzg = boundary_parities(&pair.z, z_chain)?;
    let pxg = boundary_parities(&pair.x, x_chain)?;
    Ok(match pair.spec.kind {
        ProtocolKind::Memory => LogicalClass::Memory(classify_memory(&pzg, &pxg)?),
        ProtocolKind::Zz => LogicalClass::Zz(classify_zz(&pzg, &pxg)?),
        ProtocolKind::Cnot => LogicalClass::Cnot(classify_cnot(&pzg, &pxg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkgraph::{compile, EdgeKind, NO_NODE};
    use crate::decoder::{extract_syndrome, Decoder};
    use crate::noise::{odd_ids, sample_faults, NoiseParams};
    use crate::protocol::{build_cnot, build_memory, build_zz, TimeBoundary};
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn noise() -> NoiseParams {
        NoiseParams::independent(0.01)
    }

    /// Fewest-edge string from component `a` to component `b`.
    fn string(g: &CheckGraph, a: usize, b: usize) -> Vec<u32> {
        let n = g.nodes.len();
        let mut pred: Vec<Option<u32>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for &e in &g.boundaries[a].edges {
            let u = g.edges[e].endpoints[0];
            if !seen[u] {
                seen[u] = true;
                pred[u] = Some(e as u32);
                queue.push_back(u);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &(e, v) in g.neighbours(u) {
                if v == NO_NODE {
                    if g.edges[e as usize].boundary == Some(b) {
                        let mut chain = vec![e];
                        let mut w = u;
                        loop {
                            let pe = pred[w].unwrap();
                            chain.push(pe);
                            let ends = &g.edges[pe as usize].endpoints;
                            if ends.len() == 1 {
                                return chain;
                            }
                            w = if ends[0] == w { ends[1] } else { ends[0] };
                        }
                    }
                    continue;
                }
                let v = v as usize;
                if !seen[v] {
                    seen[v] = true;
                    pred[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        panic!("components {a} and {b} are not connected");
    }

    fn by_name(g: &CheckGraph, name: &str) -> usize {
        g.boundary_by_name(name).unwrap()
    }

    fn cnot_pair() -> CheckGraphPair {
        compile(&build_cnot(3, 1, 2, 2, 2).unwrap(), &noise()).unwrap()
    }

    #[test]
    fn empty_chain_has_even_parities() {
        let pair = cnot_pair();
        let p = boundary_parities(&pair.z, &[]).unwrap();
        assert!(!p.any_odd());
        assert_eq!(p.flips, 0);
        assert_eq!(classify(&pair, &[], &[]).unwrap(), LogicalClass::Cnot(CnotClass::IDENTITY));
    }

    #[test]
    fn open_chain_is_rejected() {
        let pair = cnot_pair();
        let bulk = pair.z.edges.iter().find(|e| e.endpoints.len() == 2).unwrap().id as u32;
        assert!(matches!(boundary_parities(&pair.z, &[bulk]), Err(Error::Consistency(_))));
    }

    #[test]
    fn string_between_two_components_marks_both() {
        let pair = cnot_pair();
        let (a, b) = (by_name(&pair.z, "A"), by_name(&pair.z, "B"));
        let p = boundary_parities(&pair.z, &string(&pair.z, a, b)).unwrap();
        assert_eq!((p.get("A"), p.get("B"), p.get("C")), (Some(true), Some(true), Some(false)));
    }

    #[test]
    fn bulk_loop_is_trivial() {
        let pair = cnot_pair();
        let g = &pair.z;
        // Two spacelike edges of one qubit in consecutive layers plus the two
        // timelike edges joining their ends close a loop.
        let e = g.edges.iter().find(|e| e.endpoints.len() == 2 && e.kind == EdgeKind::Spacelike).unwrap();
        let (u, v) = (e.endpoints[0], e.endpoints[1]);
        // Breadth-first search from u to v that avoids e closes a cycle.
        let n = g.nodes.len();
        let mut pred = vec![None; n];
        let mut seen = vec![false; n];
        seen[u] = true;
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            for &(f, y) in g.neighbours(x) {
                if f as usize == e.id || y == NO_NODE || seen[y as usize] {
                    continue;
                }
                seen[y as usize] = true;
                pred[y as usize] = Some((f, x));
                queue.push_back(y as usize);
            }
        }
        let mut chain = vec![e.id as u32];
        let mut w = v;
        while let Some((f, x)) = pred[w] {
            chain.push(f);
            w = x;
        }
        assert!(chain.len() >= 4);
        let p = boundary_parities(g, &chain).unwrap();
        assert!(!p.any_odd());
    }

    #[test]
    fn cnot_table() {
        let p = |names: [&str; 3], bits: [bool; 3]| BoundaryParities {
            parities: names.iter().zip(bits).map(|(n, b)| (n.to_string(), b)).collect(),
            flips: 0,
        };
        let abc = ["A", "B", "C"];
        let def = ["D", "E", "F"];
        let cls = |x: [bool; 3], z: [bool; 3]| classify_cnot(&p(abc, x), &p(def, z)).unwrap();
        assert_eq!(cls([true, true, false], [false; 3]), CnotClass::new(XPart::X1, ZPart::I));
        assert_eq!(cls([true, false, true], [true, false, true]), CnotClass::new(XPart::X1X2, ZPart::Z2));
        assert_eq!(cls([false, true, true], [true, true, false]), CnotClass::new(XPart::X2, ZPart::Z1));
        assert_eq!(cls([false; 3], [false, true, true]), CnotClass::new(XPart::I, ZPart::Z1Z2));
        assert_eq!(cls([false; 3], [false; 3]), CnotClass::IDENTITY);
        assert!(classify_cnot(&p(abc, [true, false, false]), &p(def, [false; 3])).is_err());
    }

    #[test]
    fn class_names_round_trip() {
        for c in CnotClass::all() {
            assert_eq!(c.to_string().parse::<CnotClass>().unwrap(), c);
            assert_eq!(CnotClass::from_index(c.index()), c);
        }
        assert_eq!(CnotClass::new(XPart::X1X2, ZPart::Z2).to_string(), "X1X2⊗Z2");
    }

    #[test]
    fn cnot_calibration_strings() {
        let pair = cnot_pair();
        let expect_x = [("A", "B", XPart::X1), ("A", "C", XPart::X1X2), ("B", "C", XPart::X2)];
        for (a, b, x) in expect_x {
            let chain = string(&pair.z, by_name(&pair.z, a), by_name(&pair.z, b));
            let c = classify(&pair, &chain, &[]).unwrap();
            assert_eq!(c, LogicalClass::Cnot(CnotClass::new(x, ZPart::I)), "{a}-{b}");
        }
        let expect_z = [("D", "E", ZPart::Z1), ("D", "F", ZPart::Z2), ("E", "F", ZPart::Z1Z2)];
        for (a, b, z) in expect_z {
            let chain = string(&pair.x, by_name(&pair.x, a), by_name(&pair.x, b));
            let c = classify(&pair, &[], &chain).unwrap();
            assert_eq!(c, LogicalClass::Cnot(CnotClass::new(XPart::I, z)), "{a}-{b}");
        }
    }

    #[test]
    fn zz_calibration_strings() {
        let (d, h2) = (3, 3);
        let pair = compile(&build_zz(d, 1, 2, h2, 2).unwrap(), &noise()).unwrap();
        let z = &pair.z;
        let timelike = string(z, by_name(z, "bridge-lower"), by_name(z, "bridge-upper"));
        assert_eq!(timelike.len(), h2);
        assert!(timelike.iter().all(|&e| z.edges[e as usize].kind == EdgeKind::Timelike));
        let c = classify(&pair, &timelike, &[]).unwrap();
        assert_eq!(c, LogicalClass::Zz(ZzClass { timelike: true, ..Default::default() }));

        let left = string(z, by_name(z, "left"), by_name(z, "bridge-lower"));
        assert_eq!(left.len(), d);
        let c = classify(&pair, &left, &[]).unwrap();
        assert_eq!(c, LogicalClass::Zz(ZzClass { spacelike_left: true, ..Default::default() }));

        let right = string(z, by_name(z, "right"), by_name(z, "bridge-upper"));
        let c = classify(&pair, &right, &[]).unwrap();
        assert_eq!(c, LogicalClass::Zz(ZzClass { spacelike_right: true, ..Default::default() }));

        let x = &pair.x;
        let zs = string(x, by_name(x, "top"), by_name(x, "bottom"));
        let c = classify(&pair, &[], &zs).unwrap();
        assert_eq!(c, LogicalClass::Zz(ZzClass { z_error: true, ..Default::default() }));
    }

    #[test]
    fn memory_classes() {
        let pair =
            compile(&build_memory(3, 3, TimeBoundary::Perfect, TimeBoundary::Perfect).unwrap(), &noise()).unwrap();
        let xs = string(&pair.z, 0, 1);
        let zs = string(&pair.x, 0, 1);
        assert_eq!(classify(&pair, &xs, &[]).unwrap(), LogicalClass::Memory(MemoryClass::X));
        assert_eq!(classify(&pair, &[], &zs).unwrap(), LogicalClass::Memory(MemoryClass::Z));
        assert_eq!(classify(&pair, &xs, &zs).unwrap(), LogicalClass::Memory(MemoryClass::Y));
        let measured = compile(&build_memory(3, 3, TimeBoundary::Z, TimeBoundary::Z).unwrap(), &noise()).unwrap();
        assert!(measured.x.boundaries.len() <= 1);
        let xs = string(&measured.z, 0, 1);
        assert_eq!(classify(&measured, &xs, &[]).unwrap(), LogicalClass::Memory(MemoryClass::X));
    }

    #[test]
    fn decoder_output_always_classifies() {
        let noise = NoiseParams::independent(0.05);
        let pair = compile(&build_cnot(3, 1, 2, 2, 2).unwrap(), &noise).unwrap();
        let mut dec = Decoder::new();
        let mut nontrivial = 0;
        for shot in 0..400 {
            let f = sample_faults(&pair, &noise, 3, shot);
            let mut residual = Vec::new();
            for (g, flips) in [(&pair.z, &f.z_flips), (&pair.x, &f.x_flips)] {
                let c = dec.decode(g, &extract_syndrome(g, flips)).unwrap();
                let mut all = flips.clone();
                all.extend(c.edges);
                residual.push(odd_ids(all));
            }
            let c = classify(&pair, &residual[0], &residual[1]).unwrap();
            nontrivial += usize::from(!c.is_identity());
        }
        assert!(nontrivial > 0);
    }

    fn cnot_strings(g: &CheckGraph) -> Vec<Vec<u32>> {
        let k = g.boundaries.len();
        let mut out = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                out.push(string(g, a, b));
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn classes_are_additive(picks in proptest::collection::vec((0usize..3, 0usize..3), 1..5),
                                other in proptest::collection::vec((0usize..3, 0usize..3), 1..5)) {
            let pair = cnot_pair();
            let zs = cnot_strings(&pair.z);
            let xs = cnot_strings(&pair.x);
            let build = |ps: &[(usize, usize)]| {
                let mut z = Vec::new();
                let mut x = Vec::new();
                for &(i, j) in ps {
                    z.extend(&zs[i]);
                    x.extend(&xs[j]);
                }
                (odd_ids(z), odd_ids(x))
            };
            let (z1, x1) = build(&picks);
            let (z2, x2) = build(&other);
            let c1 = classify(&pair, &z1, &x1).unwrap();
            let c2 = classify(&pair, &z2, &x2).unwrap();
            let mut z = z1.clone();
            z.extend(&z2);
            let mut x = x1.clone();
            x.extend(&x2);
            let c = classify(&pair, &odd_ids(z), &odd_ids(x)).unwrap();
            match (c, c1, c2) {
                (LogicalClass::Cnot(c), LogicalClass::Cnot(a), LogicalClass::Cnot(b)) => {
                    prop_assert_eq!(c, a.product(b));
                }
                _ => prop_assert!(false),
            }
        }
    }
}
