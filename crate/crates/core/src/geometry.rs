//! Rotated surface-code layouts.
//!
//! Data qubits live at even-even lattice points, faces at odd-odd points. The
//! face colouring is one global checkerboard, so any rectangle of data qubits
//! (a single patch or a merged region) gets its faces from the same rule:
//! every interior face position carries a weight-4 stabilizer, the left/right
//! edges carry weight-2 X faces and the top/bottom edges weight-2 Z faces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Coord = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

impl Pauli {
    pub fn dual(self) -> Pauli {
        match self {
            Pauli::X => Pauli::Z,
            Pauli::Z => Pauli::X,
        }
    }
}

/// Colour of the face at an odd-odd position under the global checkerboard.
pub fn face_kind(pos: Coord) -> Pauli {
    let (x, y) = pos;
    if ((x + 1).div_euclid(2) + (y + 1).div_euclid(2)) % 2 == 0 {
        Pauli::X
    } else {
        Pauli::Z
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerFace {
    pub kind: Pauli,
    pub position: Coord,
    pub corners: Vec<Coord>,
}

/// Axis-aligned block of data qubits: `cols` × `rows` qubits with the top-left
/// one at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub origin: Coord,
    pub cols: i32,
    pub rows: i32,
}

impl Rect {
    pub fn new(origin: Coord, cols: i32, rows: i32) -> Rect {
        Rect { origin, cols, rows }
    }

    pub fn x_max(&self) -> i32 {
        self.origin.0 + 2 * (self.cols - 1)
    }

    pub fn y_max(&self) -> i32 {
        self.origin.1 + 2 * (self.rows - 1)
    }

    pub fn contains(&self, q: Coord) -> bool {
        q.0 >= self.origin.0
            && q.0 <= self.x_max()
            && q.1 >= self.origin.1
            && q.1 <= self.y_max()
            && (q.0 - self.origin.0) % 2 == 0
            && (q.1 - self.origin.1) % 2 == 0
    }

    /// Data qubits in row-major order (y outer, x inner).
    pub fn data_qubits(&self) -> Vec<Coord> {
        let mut out = Vec::with_capacity((self.cols * self.rows) as usize);
        for j in 0..self.rows {
            for i in 0..self.cols {
                out.push((self.origin.0 + 2 * i, self.origin.1 + 2 * j));
            }
        }
        out
    }

    /// Stabilizer faces of the rectangle, sorted by position (y, then x).
    pub fn faces(&self) -> Vec<StabilizerFace> {
        let (x0, y0) = self.origin;
        let (x1, y1) = (self.x_max(), self.y_max());
        let mut out = Vec::new();
        let mut fy = y0 - 1;
        while fy <= y1 + 1 {
            let mut fx = x0 - 1;
            while fx <= x1 + 1 {
                let pos = (fx, fy);
                let kind = face_kind(pos);
                let horiz_edge = fy == y0 - 1 || fy == y1 + 1;
                let vert_edge = fx == x0 - 1 || fx == x1 + 1;
                let keep = match (horiz_edge, vert_edge) {
                    (false, false) => true,
                    (true, true) => false,
                    (false, true) => kind == Pauli::X,
                    (true, false) => kind == Pauli::Z,
                };
                if keep {
                    let corners: Vec<Coord> = [(-1, -1), (1, -1), (-1, 1), (1, 1)]
                        .iter()
                        .map(|&(dx, dy)| (fx + dx, fy + dy))
                        .filter(|&q| self.contains(q))
                        .collect();
                    if corners.len() >= 2 {
                        out.push(StabilizerFace { kind, position: pos, corners });
                    }
                }
                fx += 2;
            }
            fy += 2;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    pub d: usize,
    pub n: usize,
    pub data_qubits: Vec<Coord>,
    pub faces: Vec<StabilizerFace>,
}

pub fn validate_distance(d: usize) -> Result<()> {
    if d < 3 || d.is_multiple_of(2) {
        return invalid(format!("code distance must be odd and at least 3, got {d}"));
    }
    Ok(())
}

/// Distance-`d` patch with data qubits at (2i, 2j), 0 ≤ i, j < d.
pub fn build_patch(d: usize) -> Result<PatchLayout> {
    validate_distance(d)?;
    let rect = Rect::new((0, 0), d as i32, d as i32);
    Ok(PatchLayout { d, n: d * d, data_qubits: rect.data_qubits(), faces: rect.faces() })
}

impl PatchLayout {
    pub fn faces_of(&self, kind: Pauli) -> impl Iterator<Item = &StabilizerFace> {
        self.faces.iter().filter(move |f| f.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn shared(a: &StabilizerFace, b: &StabilizerFace) -> usize {
        a.corners.iter().filter(|q| b.corners.contains(q)).count()
    }

    fn brute_force_counts(d: i32) -> (usize, usize) {
        // Every odd-odd position with ≥ 2 in-patch corners, filtered by the
        // boundary rule, counted independently of `Rect::faces`.
        let (mut nx, mut nz) = (0, 0);
        for fx in (-1..=2 * d - 1).step_by(2) {
            for fy in (-1..=2 * d - 1).step_by(2) {
                let inside = [(-1, -1), (1, -1), (-1, 1), (1, 1)]
                    .iter()
                    .filter(|(dx, dy)| {
                        let (x, y) = (fx + dx, fy + dy);
                        (0..=2 * d - 2).contains(&x) && (0..=2 * d - 2).contains(&y)
                    })
                    .count();
                let on_lr = fx == -1 || fx == 2 * d - 1;
                let on_tb = fy == -1 || fy == 2 * d - 1;
                let k = face_kind((fx, fy));
                let ok = match inside {
                    4 => true,
                    2 => (on_lr && k == Pauli::X) || (on_tb && k == Pauli::Z),
                    _ => false,
                };
                if ok {
                    if k == Pauli::X {
                        nx += 1
                    } else {
                        nz += 1
                    }
                }
            }
        }
        (nx, nz)
    }

    #[test]
    fn d5_counts() {
        let p = build_patch(5).unwrap();
        assert_eq!(p.n, 25);
        assert_eq!(p.data_qubits.len(), 25);
        assert_eq!(p.faces_of(Pauli::X).count(), 12);
        assert_eq!(p.faces_of(Pauli::Z).count(), 12);
    }

    #[test]
    fn d3_counts_match_enumeration() {
        let p = build_patch(3).unwrap();
        assert_eq!(p.faces_of(Pauli::X).count(), 4);
        assert_eq!(p.faces_of(Pauli::Z).count(), 4);
        assert_eq!(brute_force_counts(3), (4, 4));
    }

    #[test]
    fn rejects_even_or_small() {
        for d in [0, 1, 2, 4, 6] {
            assert!(build_patch(d).is_err());
        }
    }

    #[test]
    fn boundary_faces_have_expected_kind() {
        let d = 7;
        let p = build_patch(d).unwrap();
        let edge = 2 * d as i32 - 1;
        for f in &p.faces {
            let (x, y) = f.position;
            if x == -1 || x == edge {
                assert_eq!(f.kind, Pauli::X);
                assert_eq!(f.corners.len(), 2);
            } else if y == -1 || y == edge {
                assert_eq!(f.kind, Pauli::Z);
                assert_eq!(f.corners.len(), 2);
            } else {
                assert_eq!(f.corners.len(), 4);
            }
        }
    }

    #[test]
    fn logical_representatives_commute() {
        // Z on a column commutes with all X faces, X on a row with all Z faces,
        // and the two overlap on exactly one qubit.
        let d = 5;
        let p = build_patch(d).unwrap();
        let column: HashSet<Coord> = (0..d as i32).map(|j| (0, 2 * j)).collect();
        let row: HashSet<Coord> = (0..d as i32).map(|i| (2 * i, 0)).collect();
        for f in &p.faces {
            let set = if f.kind == Pauli::X { &column } else { &row };
            assert_eq!(f.corners.iter().filter(|q| set.contains(q)).count() % 2, 0);
        }
        assert_eq!(column.intersection(&row).count(), 1);
    }

    #[test]
    fn merged_rectangles_commute() {
        for &(cols, rows, ox, oy) in &[(11, 5, 0, 0), (5, 13, 14, 2), (7, 7, 6, 0)] {
            let faces = Rect::new((ox, oy), cols, rows).faces();
            let nx = faces.iter().filter(|f| f.kind == Pauli::X).count();
            let nz = faces.len() - nx;
            let n = (cols * rows) as usize;
            assert_eq!(nx + nz, n - 1);
            for a in faces.iter().filter(|f| f.kind == Pauli::X) {
                for b in faces.iter().filter(|f| f.kind == Pauli::Z) {
                    assert_eq!(shared(a, b) % 2, 0);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn patch_invariants(k in 1usize..7) {
            let d = 2 * k + 1;
            let p = build_patch(d).unwrap();
            let half = (d * d - 1) / 2;
            proptest::prop_assert_eq!(p.faces_of(Pauli::X).count(), half);
            proptest::prop_assert_eq!(p.faces_of(Pauli::Z).count(), half);
            for a in p.faces_of(Pauli::X) {
                for b in p.faces_of(Pauli::Z) {
                    let s = shared(a, b);
                    proptest::prop_assert!(s == 0 || s == 2);
                }
            }
        }
    }
}
