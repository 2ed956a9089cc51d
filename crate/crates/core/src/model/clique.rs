use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::tensor::{shape_len, strides_for};

/// Index arithmetic for one edge `e`: the shape of `V_e`, the shapes of its
/// faces and, for every point of `V_e`, its projection onto each face.
#[derive(Debug, PartialEq, Eq)]
pub struct EdgeGeometry {
    shape: Vec<usize>,
    face_shapes: Vec<Vec<usize>>,
    /// `projection[k][x]` is the flat index of `x_f` in face `k` (which omits axis `k`).
    projection: Vec<Vec<u32>>,
}

impl EdgeGeometry {
    pub fn new(shape: &[usize]) -> Arc<Self> {
        let r = shape.len();
        let len = shape_len(shape);
        let strides = strides_for(shape);
        let mut face_shapes = Vec::with_capacity(r);
        let mut projection = Vec::with_capacity(r);
        for skip in 0..r {
            let fshape: Vec<usize> = shape
                .iter()
                .enumerate()
                .filter(|&(a, _)| a != skip)
                .map(|(_, &n)| n)
                .collect();
            let fstrides = strides_for(&fshape);
            let proj = (0..len)
                .map(|flat| {
                    let mut out = 0;
                    let mut fa = 0;
                    for axis in 0..r {
                        if axis == skip {
                            continue;
                        }
                        let coord = (flat / strides[axis]) % shape[axis];
                        out += coord * fstrides[fa];
                        fa += 1;
                    }
                    out as u32
                })
                .collect();
            face_shapes.push(fshape);
            projection.push(proj);
        }
        Arc::new(EdgeGeometry {
            shape: shape.to_vec(),
            face_shapes,
            projection,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn r(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        shape_len(&self.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn face_shape(&self, face: usize) -> &[usize] {
        &self.face_shapes[face]
    }

    pub fn face_len(&self, face: usize) -> usize {
        shape_len(&self.face_shapes[face])
    }

    /// Flat index of the projection of point `x` onto face `face`.
    #[inline]
    pub fn project(&self, face: usize, x: usize) -> usize {
        self.projection[face][x] as usize
    }

    pub fn projections(&self, face: usize) -> &[u32] {
        &self.projection[face]
    }

    /// Flat index of a multi-index in `V_e`.
    pub fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }
}

/// A subset of `V_e` cut out by one set `B_f ⊆ V_f` per face `f ∈ ∂e`:
/// `x_e` belongs to it iff `x_f ∈ B_f` for every face.
#[derive(Clone, Debug)]
pub struct CliqueSet {
    geometry: Arc<EdgeGeometry>,
    faces: Vec<FixedBitSet>,
}

impl PartialEq for CliqueSet {
    fn eq(&self, other: &Self) -> bool {
        self.geometry.shape == other.geometry.shape && self.faces == other.faces
    }
}

impl CliqueSet {
    /// The whole of `V_e` (every `B_f = V_f`).
    pub fn full(geometry: Arc<EdgeGeometry>) -> Self {
        let faces = (0..geometry.r())
            .map(|k| {
                let mut b = FixedBitSet::with_capacity(geometry.face_len(k));
                b.insert_range(..);
                b
            })
            .collect();
        CliqueSet { geometry, faces }
    }

    /// The empty set (every `B_f = ∅`).
    pub fn empty(geometry: Arc<EdgeGeometry>) -> Self {
        let faces = (0..geometry.r())
            .map(|k| FixedBitSet::with_capacity(geometry.face_len(k)))
            .collect();
        CliqueSet { geometry, faces }
    }

    /// The singleton `{x_e}` (every `B_f = {x_f}`).
    pub fn singleton(geometry: Arc<EdgeGeometry>, x: usize) -> Self {
        let faces = (0..geometry.r())
            .map(|k| {
                let mut b = FixedBitSet::with_capacity(geometry.face_len(k));
                b.insert(geometry.project(k, x));
                b
            })
            .collect();
        CliqueSet { geometry, faces }
    }

    pub fn from_faces(geometry: Arc<EdgeGeometry>, faces: Vec<FixedBitSet>) -> Result<Self> {
        if faces.len() != geometry.r() {
            return Err(Error::structural(format!(
                "clique set needs {} faces, got {}",
                geometry.r(),
                faces.len()
            )));
        }
        for (k, b) in faces.iter().enumerate() {
            if b.len() != geometry.face_len(k) {
                return Err(Error::structural(format!(
                    "face {k} bitset has length {}, expected {}",
                    b.len(),
                    geometry.face_len(k)
                )));
            }
        }
        Ok(CliqueSet { geometry, faces })
    }

    /// Builds a clique set from face membership predicates over flat face indices.
    pub fn from_predicates(
        geometry: Arc<EdgeGeometry>,
        mut member: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let faces = (0..geometry.r())
            .map(|k| {
                let mut b = FixedBitSet::with_capacity(geometry.face_len(k));
                for y in 0..geometry.face_len(k) {
                    b.set(y, member(k, y));
                }
                b
            })
            .collect();
        CliqueSet { geometry, faces }
    }

    pub fn geometry(&self) -> &Arc<EdgeGeometry> {
        &self.geometry
    }

    pub fn faces(&self) -> &[FixedBitSet] {
        &self.faces
    }

    pub fn face(&self, k: usize) -> &FixedBitSet {
        &self.faces[k]
    }

    /// Membership of the point with flat index `x`.
    #[inline]
    pub fn contains_flat(&self, x: usize) -> bool {
        self.faces
            .iter()
            .enumerate()
            .all(|(k, b)| b.contains(self.geometry.project(k, x)))
    }

    /// Membership of the point with multi-index `x_e`.
    pub fn contains(&self, x: &[usize]) -> bool {
        self.contains_flat(self.geometry.flat(x))
    }

    /// Indicator of the set as a dense vector over `V_e`.
    pub fn indicator(&self) -> Vec<bool> {
        (0..self.geometry.len()).map(|x| self.contains_flat(x)).collect()
    }

    pub fn count(&self) -> usize {
        (0..self.geometry.len()).filter(|&x| self.contains_flat(x)).count()
    }

    /// `E[1_S]` under the uniform measure on `V_e`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 / self.geometry.len() as f64
    }

    pub fn is_empty_set(&self) -> bool {
        !(0..self.geometry.len()).any(|x| self.contains_flat(x))
    }

    /// Face-wise intersection; its membership is the AND of both memberships.
    pub fn intersect(&self, other: &CliqueSet) -> CliqueSet {
        debug_assert_eq!(self.geometry.shape, other.geometry.shape);
        let faces = self
            .faces
            .iter()
            .zip(&other.faces)
            .map(|(a, b)| {
                let mut c = a.clone();
                c.intersect_with(b);
                c
            })
            .collect();
        CliqueSet {
            geometry: self.geometry.clone(),
            faces,
        }
    }

    /// Partition of `V_e` into at most `2^r` clique sets, one per sign vector
    /// `σ ∈ {0,1}^{∂e}` (`B_f` where `σ_f = 1`, `V_f \ B_f` otherwise).
    /// Empty cells are dropped; the first cell is `self` whenever it is nonempty.
    pub fn split(&self) -> Vec<CliqueSet> {
        let r = self.geometry.r();
        let complements: Vec<FixedBitSet> = self
            .faces
            .iter()
            .map(|b| {
                let mut c = b.clone();
                c.toggle_range(..);
                c
            })
            .collect();
        let mut cells = Vec::with_capacity(1 << r);
        for sigma in (0..(1usize << r)).rev() {
            let faces = (0..r)
                .map(|k| {
                    if (sigma >> k) & 1 == 1 {
                        self.faces[k].clone()
                    } else {
                        complements[k].clone()
                    }
                })
                .collect();
            let cell = CliqueSet {
                geometry: self.geometry.clone(),
                faces,
            };
            if !cell.is_empty_set() {
                cells.push(cell);
            }
        }
        cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_clique(geom: &Arc<EdgeGeometry>, rng: &mut ChaCha8Rng, p: f64) -> CliqueSet {
        CliqueSet::from_predicates(geom.clone(), |_, _| rng.gen_bool(p))
    }

    #[test]
    fn projections_drop_one_axis() {
        let g = EdgeGeometry::new(&[2, 3, 4]);
        let x = g.flat(&[1, 2, 3]);
        assert_eq!(g.project(0, x), 2 * 4 + 3);
        assert_eq!(g.project(1, x), 4 + 3);
        assert_eq!(g.project(2, x), 3 + 2);
    }

    #[test]
    fn representable_extremes() {
        let g = EdgeGeometry::new(&[3, 4]);
        assert_eq!(CliqueSet::full(g.clone()).count(), 12);
        assert_eq!(CliqueSet::empty(g.clone()).count(), 0);
        for x in 0..12 {
            let s = CliqueSet::singleton(g.clone(), x);
            assert_eq!(s.indicator().iter().filter(|&&b| b).count(), 1);
            assert!(s.contains_flat(x));
        }
    }

    #[test]
    fn full_set_splits_into_itself() {
        let g = EdgeGeometry::new(&[4, 4]);
        let cells = CliqueSet::full(g.clone()).split();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0], CliqueSet::full(g));
    }

    #[test]
    fn proper_rectangle_splits_into_four() {
        let g = EdgeGeometry::new(&[4, 4]);
        // Face 0 omits axis 0 so it constrains the column; face 1 constrains the row.
        let rows = [true, true, false, false];
        let cols = [true, false, true, false];
        let rect = CliqueSet::from_predicates(g.clone(), |k, y| if k == 1 { rows[y] } else { cols[y] });
        let cells = rect.split();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0], rect);
        for c in &cells {
            assert_eq!(c.count(), 4);
        }
    }

    fn check_partition(cs: &CliqueSet) {
        let cells = cs.split();
        assert!(cells.len() <= 1 << cs.geometry().r());
        for x in 0..cs.geometry().len() {
            let hits = cells.iter().filter(|c| c.contains_flat(x)).count();
            assert_eq!(hits, 1, "point {x} covered {hits} times");
        }
        if !cs.is_empty_set() {
            assert_eq!(cells[0], *cs);
        }
    }

    #[test]
    fn random_three_uniform_split_is_partition() {
        let g = EdgeGeometry::new(&[4, 4, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            check_partition(&random_clique(&g, &mut rng, 0.6));
        }
    }

    proptest! {
        #[test]
        fn split_cells_partition_v_e(seed in 0u64..10_000, a in 1usize..5, b in 1usize..5, c in 1usize..4, r3 in any::<bool>()) {
            let shape: Vec<usize> = if r3 { vec![a, b, c] } else { vec![a, b] };
            let g = EdgeGeometry::new(&shape);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            check_partition(&random_clique(&g, &mut rng, 0.5));
        }

        #[test]
        fn intersection_is_pointwise_and(seed in 0u64..10_000, a in 1usize..5, b in 1usize..5, c in 1usize..4) {
            let g = EdgeGeometry::new(&[a, b, c]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_clique(&g, &mut rng, 0.7);
            let t = random_clique(&g, &mut rng, 0.7);
            let st = s.intersect(&t);
            for x in 0..g.len() {
                prop_assert_eq!(st.contains_flat(x), s.contains_flat(x) && t.contains_flat(x));
            }
        }
    }
}
