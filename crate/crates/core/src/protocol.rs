//! Protocols as timed schedules of patch regions and merge windows.
//!
//! Rounds are numbered 0..rounds. A patch lives for a contiguous range of
//! rounds; a bridge is alive only during its merge window, when the faces of
//! the merged rectangle replace those of the patches it joins. Every data
//! qubit is prepared before its first round and read out after its last one,
//! in a basis given by the timelike boundary kind.
//!
//! Each protocol also declares its logical observables (sets of readouts and
//! stabilizer outcomes whose parity is fixed in the absence of faults) and the
//! names of the boundary components they induce.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{validate_distance, Coord, Pauli, Rect, StabilizerFace};

/// Lower/upper end of a region in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBoundary {
    /// Noiseless reference layer: stabilizers of both kinds are known.
    Perfect,
    /// Prepared in |+⟩ or read out in the X basis.
    X,
    /// Prepared in |0⟩ or read out in the Z basis.
    Z,
}

impl TimeBoundary {
    /// Whether this preparation/readout fixes stabilizers of kind `check`.
    pub fn fixes(self, check: Pauli) -> bool {
        match self {
            TimeBoundary::Perfect => true,
            TimeBoundary::X => check == Pauli::X,
            TimeBoundary::Z => check == Pauli::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Memory,
    Zz,
    Cnot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    pub w: usize,
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub name: String,
    pub region: Rect,
    pub first_round: usize,
    pub last_round: usize,
    pub lower: TimeBoundary,
    pub upper: TimeBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub name: String,
    pub region: Rect,
    /// Full rectangle measured while merged (bridge plus the joined patches).
    pub merged: Rect,
    /// Rounds `[start, end)`.
    pub window: (usize, usize),
    pub init: TimeBoundary,
    pub readout: TimeBoundary,
}

/// A single classical bit of the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Item {
    /// Final single-qubit readout of a data qubit.
    Readout(Coord),
    /// Stabilizer outcome of the face at `face` in `round`.
    Outcome { face: Coord, round: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub name: String,
    /// Check kind whose graph sees this observable (Z checks see X errors).
    pub check: Pauli,
    pub items: Vec<Item>,
}

/// Expected label of a named boundary component, up to a global XOR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryName {
    pub name: String,
    pub check: Pauli,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub params: Params,
    pub rounds: usize,
    pub patches: Vec<PatchSpec>,
    pub bridges: Vec<BridgeSpec>,
    pub observables: Vec<ObservableSpec>,
    pub boundary_names: Vec<BoundaryName>,
}

/// Data-qubit lifetime and its preparation/readout bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitLife {
    pub pos: Coord,
    pub first: usize,
    pub last: usize,
    pub init: TimeBoundary,
    pub readout: TimeBoundary,
}

fn readouts(qubits: impl IntoIterator<Item = Coord>) -> Vec<Item> {
    qubits.into_iter().map(Item::Readout).collect()
}

fn column(rect: &Rect, x: i32) -> Vec<Coord> {
    (0..rect.rows).map(|j| (x, rect.origin.1 + 2 * j)).collect()
}

fn row(rect: &Rect, y: i32) -> Vec<Coord> {
    (0..rect.cols).map(|i| (rect.origin.0 + 2 * i, y)).collect()
}

/// Faces of `merged` of the given kind whose positions carry no face of that
/// kind in any of `patches`; their product is the joint logical outcome.
pub fn intermediate_faces(merged: &Rect, patches: &[Rect], kind: Pauli) -> Vec<Coord> {
    let patch_faces: Vec<StabilizerFace> = patches.iter().flat_map(|p| p.faces()).collect();
    merged
        .faces()
        .into_iter()
        .filter(|f| f.kind == kind)
        .filter(|f| !patch_faces.iter().any(|g| g.kind == kind && g.position == f.position))
        .map(|f| f.position)
        .collect()
}

fn outcomes(faces: Vec<Coord>, round: usize) -> Vec<Item> {
    faces.into_iter().map(|face| Item::Outcome { face, round }).collect()
}

fn name(s: &str, check: Pauli, label: u32) -> BoundaryName {
    BoundaryName { name: s.to_string(), check, label }
}

pub fn build_memory(d: usize, rounds: usize, lower: TimeBoundary, upper: TimeBoundary) -> Result<ProtocolSpec> {
    validate_distance(d)?;
    if rounds < 1 {
        return invalid("memory needs at least one round");
    }
    let rect = Rect::new((0, 0), d as i32, d as i32);
    let mut observables = Vec::new();
    let mut boundary_names = Vec::new();
    if lower.fixes(Pauli::Z) && upper.fixes(Pauli::Z) {
        observables.push(ObservableSpec { name: "Z".into(), check: Pauli::Z, items: readouts(column(&rect, 0)) });
        boundary_names.push(name("left", Pauli::Z, 0));
        boundary_names.push(name("right", Pauli::Z, 1));
    }
    if lower.fixes(Pauli::X) && upper.fixes(Pauli::X) {
        observables.push(ObservableSpec { name: "X".into(), check: Pauli::X, items: readouts(row(&rect, 0)) });
        boundary_names.push(name("top", Pauli::X, 0));
        boundary_names.push(name("bottom", Pauli::X, 1));
    }
    Ok(ProtocolSpec {
        kind: ProtocolKind::Memory,
        params: Params { d, w: 0, h1: 0, h2: rounds, h3: 0 },
        rounds,
        patches: vec![PatchSpec {
            name: "patch".into(),
            region: rect,
            first_round: 0,
            last_round: rounds - 1,
            lower,
            upper,
        }],
        bridges: vec![],
        observables,
        boundary_names,
    })
}

fn validate_surgery(d: usize, w: usize, h2: usize) -> Result<()> {
    validate_distance(d)?;
    if w < 1 {
        return invalid("bridge width w must be at least 1");
    }
    if h2 < 1 {
        return invalid("merge duration h2 must be at least 1");
    }
    Ok(())
}

/// Joint Z̄Z̄ measurement of two patches through a bridge of `w` columns.
pub fn build_zz(d: usize, w: usize, h1: usize, h2: usize, h3: usize) -> Result<ProtocolSpec> {
    validate_surgery(d, w, h2)?;
    let (di, wi) = (d as i32, w as i32);
    let rounds = h1 + h2 + h3;
    let p1 = Rect::new((0, 0), di, di);
    let bridge = Rect::new((2 * di, 0), wi, di);
    let p2 = Rect::new((2 * (di + wi), 0), di, di);
    let merged = Rect::new((0, 0), 2 * di + wi, di);
    let patch = |n: &str, region| PatchSpec {
        name: n.into(),
        region,
        first_round: 0,
        last_round: rounds - 1,
        lower: TimeBoundary::Perfect,
        upper: TimeBoundary::Perfect,
    };
    let observables = vec![
        ObservableSpec { name: "Z1".into(), check: Pauli::Z, items: readouts(column(&p1, 0)) },
        ObservableSpec { name: "Z2".into(), check: Pauli::Z, items: readouts(column(&p2, p2.x_max())) },
        ObservableSpec {
            name: "ZZ".into(),
            check: Pauli::Z,
            items: outcomes(intermediate_faces(&merged, &[p1, p2], Pauli::Z), h1),
        },
        ObservableSpec { name: "X1X2".into(), check: Pauli::X, items: readouts(row(&merged, 0)) },
    ];
    let boundary_names = vec![
        name("left", Pauli::Z, 0b000),
        name("bridge-lower", Pauli::Z, 0b101),
        name("bridge-upper", Pauli::Z, 0b001),
        name("right", Pauli::Z, 0b011),
        name("top", Pauli::X, 0),
        name("bottom", Pauli::X, 1),
    ];
    Ok(ProtocolSpec {
        kind: ProtocolKind::Zz,
        params: Params { d, w, h1, h2, h3 },
        rounds,
        patches: vec![patch("patch1", p1), patch("patch2", p2)],
        bridges: vec![BridgeSpec {
            name: "bridge".into(),
            region: bridge,
            merged,
            window: (h1, h1 + h2),
            init: TimeBoundary::X,
            readout: TimeBoundary::X,
        }],
        observables,
        boundary_names,
    })
}

/// CNOT by a Z̄Z̄ merge of control and ancilla followed by an X̄X̄ merge of
/// ancilla and target. Control sits west of the ancilla, target south of it.
pub fn build_cnot(d: usize, w: usize, h1: usize, h2: usize, h3: usize) -> Result<ProtocolSpec> {
    validate_surgery(d, w, h2)?;
    let (di, wi) = (d as i32, w as i32);
    let rounds = h1 + 2 * h2 + h3;
    let off = 2 * (di + wi);
    let control = Rect::new((0, 0), di, di);
    let ancilla = Rect::new((off, 0), di, di);
    let target = Rect::new((off, off), di, di);
    let bridge1 = Rect::new((2 * di, 0), wi, di);
    let bridge2 = Rect::new((off, 2 * di), di, wi);
    let merged1 = Rect::new((0, 0), 2 * di + wi, di);
    let merged2 = Rect::new((off, 0), di, 2 * di + wi);
    let (w1, w2) = ((h1, h1 + h2), (h1 + h2, h1 + 2 * h2));
    let perfect = |n: &str, region| PatchSpec {
        name: n.into(),
        region,
        first_round: 0,
        last_round: rounds - 1,
        lower: TimeBoundary::Perfect,
        upper: TimeBoundary::Perfect,
    };

    // X errors: Z̄_c, and the corrected Z̄_t = Z̄_t ⊕ m(Z̄cZ̄a) ⊕ split/readout of
    // the ancilla column continued through bridge 2 into the target.
    let xa = ancilla.origin.0;
    let mut zt = readouts(column(&target, xa));
    zt.extend(readouts(column(&bridge2, xa)));
    zt.extend(readouts(column(&ancilla, xa)));
    zt.extend(outcomes(intermediate_faces(&merged1, &[control, ancilla], Pauli::Z), w1.0));
    // Z errors: corrected X̄_c = X̄_c ⊕ m(X̄aX̄t) ⊕ bridge-1 readout on the
    // shared bottom row, and X̄_t.
    let yb = control.y_max();
    let mut xc = readouts(row(&control, yb));
    xc.extend(readouts(row(&bridge1, yb)));
    xc.extend(outcomes(intermediate_faces(&merged2, &[ancilla, target], Pauli::X), w2.0));
    let observables = vec![
        ObservableSpec { name: "X1".into(), check: Pauli::Z, items: readouts(column(&control, 0)) },
        ObservableSpec { name: "X2".into(), check: Pauli::Z, items: zt },
        ObservableSpec { name: "Z1".into(), check: Pauli::X, items: xc },
        ObservableSpec { name: "Z2".into(), check: Pauli::X, items: readouts(row(&target, target.y_max())) },
    ];
    let boundary_names = vec![
        name("A", Pauli::Z, 0b00),
        name("B", Pauli::Z, 0b01),
        name("C", Pauli::Z, 0b11),
        // D and E are told apart by the partner structure of the connection (A–B ~ D–F,
        // A–C ~ E–F): Z parts read in the gate's input frame, X parts in its
        // output frame.
        name("D", Pauli::X, 0b01),
        name("E", Pauli::X, 0b00),
        name("F", Pauli::X, 0b10),
    ];
    Ok(ProtocolSpec {
        kind: ProtocolKind::Cnot,
        params: Params { d, w, h1, h2, h3 },
        rounds,
        patches: vec![
            perfect("control", control),
            PatchSpec {
                name: "ancilla".into(),
                region: ancilla,
                first_round: w1.0,
                last_round: w2.1 - 1,
                lower: TimeBoundary::X,
                upper: TimeBoundary::Z,
            },
            perfect("target", target),
        ],
        bridges: vec![
            BridgeSpec {
                name: "bridge1".into(),
                region: bridge1,
                merged: merged1,
                window: w1,
                init: TimeBoundary::X,
                readout: TimeBoundary::X,
            },
            BridgeSpec {
                name: "bridge2".into(),
                region: bridge2,
                merged: merged2,
                window: w2,
                init: TimeBoundary::Z,
                readout: TimeBoundary::Z,
            },
        ],
        observables,
        boundary_names,
    })
}

impl ProtocolSpec {
    /// Structural validation: windows in range, lifetimes consistent, and no
    /// data qubit claimed by two regions at once.
    pub fn validate(&self) -> Result<()> {
        validate_distance(self.params.d)?;
        if self.rounds == 0 {
            return invalid("protocol has no rounds");
        }
        for p in &self.patches {
            if p.first_round > p.last_round || p.last_round >= self.rounds {
                return invalid(format!("patch {} lifetime out of range", p.name));
            }
        }
        for b in &self.bridges {
            if b.window.0 >= b.window.1 || b.window.1 > self.rounds {
                return invalid(format!("bridge {} window out of range", b.name));
            }
            if b.init == TimeBoundary::Perfect || b.readout == TimeBoundary::Perfect {
                return invalid(format!("bridge {} needs physical init/readout bases", b.name));
            }
        }
        let lives = self.qubits();
        let mut seen = std::collections::HashSet::new();
        for q in &lives {
            if !seen.insert(q.pos) {
                return invalid(format!("data qubit {:?} belongs to two regions", q.pos));
            }
        }
        for r in 0..self.rounds {
            for f in self.faces_at(r) {
                for c in &f.corners {
                    let alive = lives.iter().any(|q| q.pos == *c && q.first <= r && r <= q.last);
                    if !alive {
                        return invalid(format!("face {:?} in round {r} touches idle qubit {c:?}", f.position));
                    }
                }
            }
        }
        Ok(())
    }

    /// Data-qubit lifetimes, patches first, in region order.
    pub fn qubits(&self) -> Vec<QubitLife> {
        let mut out = Vec::new();
        for p in &self.patches {
            for pos in p.region.data_qubits() {
                out.push(QubitLife { pos, first: p.first_round, last: p.last_round, init: p.lower, readout: p.upper });
            }
        }
        for b in &self.bridges {
            for pos in b.region.data_qubits() {
                out.push(QubitLife { pos, first: b.window.0, last: b.window.1 - 1, init: b.init, readout: b.readout });
            }
        }
        out
    }

    /// Faces measured in round `r`: merged rectangles of the active windows,
    /// plus alive patches not absorbed by any of them.
    pub fn faces_at(&self, r: usize) -> Vec<StabilizerFace> {
        let merges: Vec<&BridgeSpec> = self.bridges.iter().filter(|b| b.window.0 <= r && r < b.window.1).collect();
        let mut out = Vec::new();
        for b in &merges {
            out.extend(b.merged.faces());
        }
        for p in &self.patches {
            if p.first_round <= r && r <= p.last_round {
                let absorbed = merges.iter().any(|b| b.merged.contains(p.region.origin));
                if !absorbed {
                    out.extend(p.region.faces());
                }
            }
        }
        out.sort_by_key(|f| (f.position.1, f.position.0));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("protocol specs always serialize")
    }

    pub fn from_json(text: &str) -> Result<ProtocolSpec> {
        let spec: ProtocolSpec = serde_json::from_str(text).map_err(|e| crate::Error::Validation(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}
