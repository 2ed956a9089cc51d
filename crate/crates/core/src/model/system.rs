use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex-class label as it appears in interchange files.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(v: &str) -> Self {
        Label::Str(v.to_string())
    }
}

/// Which 2-blow-up to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlowUpMode {
    /// Every edge `e^(ω)` for every `ω ∈ {0,1}^e`.
    Full,
    /// Only the `e^(ω)` whose `ω` is constant on `e \ e1`; holds the edge id of `e1`.
    Weak(usize),
}

/// A hypergraph system: vertex classes with their sizes, a uniformity `r`
/// and an `r`-uniform edge set on the classes.
///
/// Classes are canonicalized to `0..J` in the order the labels were given.
/// Every edge is stored as a sorted list of class indices, and tensors on an
/// edge use that axis order.
#[derive(Clone, Debug, PartialEq)]
pub struct HypergraphSystem {
    labels: Vec<Label>,
    sizes: Vec<usize>,
    r: usize,
    edges: Vec<Vec<usize>>,
    skeletons: Vec<Vec<Vec<usize>>>,
}

fn skeleton_of(edge: &[usize]) -> Vec<Vec<usize>> {
    (0..edge.len())
        .map(|skip| {
            edge.iter()
                .enumerate()
                .filter(|&(pos, _)| pos != skip)
                .map(|(_, &j)| j)
                .collect()
        })
        .collect()
}

impl HypergraphSystem {
    /// Validates and builds a system from labelled data.
    pub fn build(
        labels: Vec<Label>,
        vertex_sizes: &BTreeMap<Label, usize>,
        r: usize,
        edges: &[Vec<Label>],
    ) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::structural(format!("duplicate class label {label}")));
            }
        }
        let sizes = labels
            .iter()
            .map(|l| {
                vertex_sizes
                    .get(l)
                    .copied()
                    .ok_or_else(|| Error::structural(format!("no vertex size for class {l}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = edges
            .iter()
            .map(|e| {
                e.iter()
                    .map(|l| {
                        index
                            .get(l)
                            .copied()
                            .ok_or_else(|| Error::structural(format!("unknown class label {l}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_labels(labels, sizes, r, edges)
    }

    /// Builds a system on classes `0..sizes.len()` labelled by their index.
    pub fn new(sizes: Vec<usize>, r: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let labels = (0..sizes.len() as i64).map(Label::Int).collect();
        Self::with_labels(labels, sizes, r, edges)
    }

    fn with_labels(
        labels: Vec<Label>,
        sizes: Vec<usize>,
        r: usize,
        edges: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if r == 0 {
            return Err(Error::structural("uniformity r must be at least 1"));
        }
        if let Some(j) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::structural(format!(
                "vertex class {} is empty",
                labels[j]
            )));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for e in edges {
            if e.len() != r {
                return Err(Error::structural(format!(
                    "edge {e:?} has {} classes but r = {r}",
                    e.len()
                )));
            }
            if let Some(&j) = e.iter().find(|&&j| j >= sizes.len()) {
                return Err(Error::structural(format!("unknown class index {j}")));
            }
            let mut sorted = e.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != r {
                return Err(Error::structural(format!("edge {e:?} repeats a class")));
            }
            if canonical.contains(&sorted) {
                return Err(Error::structural(format!("edge {e:?} listed twice")));
            }
            canonical.push(sorted);
        }
        let skeletons = canonical.iter().map(|e| skeleton_of(e)).collect();
        Ok(HypergraphSystem {
            labels,
            sizes,
            r,
            edges: canonical,
            skeletons,
        })
    }

    /// All `r`-subsets of `classes` classes of equal size `n`, in lexicographic order.
    pub fn complete(classes: usize, n: usize, r: usize) -> Result<Self> {
        let edges = k_subsets(classes, r);
        Self::new(vec![n; classes], r, edges)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, class: usize) -> usize {
        self.sizes[class]
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &[usize] {
        &self.edges[id]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `∂e`: the `r` faces of edge `id`. Face `k` omits the `k`-th class of the edge.
    pub fn skeleton(&self, id: usize) -> &[Vec<usize>] {
        &self.skeletons[id]
    }

    /// Shape `(|V_j|)_{j ∈ e}` of tensors on edge `id`.
    pub fn edge_shape(&self, id: usize) -> Vec<usize> {
        self.edges[id].iter().map(|&j| self.sizes[j]).collect()
    }

    pub fn edge_id(&self, classes: &[usize]) -> Option<usize> {
        let mut sorted = classes.to_vec();
        sorted.sort_unstable();
        self.edges.iter().position(|e| *e == sorted)
    }

    /// Interchange key of an edge: its labels in canonical order joined by `-`.
    pub fn edge_key(&self, id: usize) -> String {
        self.edges[id]
            .iter()
            .map(|&j| self.labels[j].to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn class_of_label(&self, label: &Label) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `|V_J|`, the number of points of the full product space.
    pub fn total_points(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Same classes and edges, ignoring labels.
    pub fn same_shape(&self, other: &HypergraphSystem) -> bool {
        self.sizes == other.sizes && self.r == other.r && self.edges == other.edges
    }

    /// The 2-blow-up: class `j` becomes `j^(0)` (index `2j`) and `j^(1)`
    /// (index `2j+1`), and edge `e` becomes the edges `e^(ω)`.
    ///
    /// Edges are listed per original edge, with `ω` enumerated as binary
    /// counters whose first class is the most significant bit.
    pub fn blow_up(&self, mode: BlowUpMode) -> Result<HypergraphSystem> {
        if let BlowUpMode::Weak(e1) = mode {
            if e1 >= self.edges.len() {
                return Err(Error::structural(format!("edge id {e1} is not in H")));
            }
        }
        let mut labels = Vec::with_capacity(2 * self.labels.len());
        let mut sizes = Vec::with_capacity(2 * self.sizes.len());
        for (label, &n) in self.labels.iter().zip(&self.sizes) {
            for copy in 0..2 {
                labels.push(Label::Str(format!("{label}^{copy}")));
                sizes.push(n);
            }
        }
        let mut edges = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            for omega in blow_up_patterns(self, id, mode) {
                edges.push(e.iter().zip(&omega).map(|(&j, &w)| 2 * j + w as usize).collect());
            }
        }
        Self::with_labels(labels, sizes, self.r, edges)
    }
}

/// The copy patterns `ω ∈ {0,1}^e` kept for edge `id` under `mode`.
pub(crate) fn blow_up_patterns(
    system: &HypergraphSystem,
    id: usize,
    mode: BlowUpMode,
) -> Vec<Vec<u8>> {
    let e = &system.edges[id];
    let r = e.len();
    let mut out = Vec::new();
    for bits in 0..(1u32 << r) {
        let omega: Vec<u8> = (0..r).map(|pos| ((bits >> (r - 1 - pos)) & 1) as u8).collect();
        let keep = match mode {
            BlowUpMode::Full => true,
            BlowUpMode::Weak(e1) => {
                let base = &system.edges[e1];
                let outside: Vec<u8> = e
                    .iter()
                    .zip(&omega)
                    .filter(|(j, _)| !base.contains(j))
                    .map(|(_, &w)| w)
                    .collect();
                outside.windows(2).all(|w| w[0] == w[1])
            }
        };
        if keep {
            out.push(omega);
        }
    }
    out
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(j: &[i64], n: usize) -> (Vec<Label>, BTreeMap<Label, usize>) {
        let labels: Vec<Label> = j.iter().map(|&v| Label::Int(v)).collect();
        let sizes = labels.iter().map(|l| (l.clone(), n)).collect();
        (labels, sizes)
    }

    #[test]
    fn triangle_system_skeletons_are_endpoints() {
        let (labels, sizes) = labelled(&[1, 2, 3], 4);
        let edges: Vec<Vec<Label>> = vec![
            vec![1.into(), 2.into()],
            vec![1.into(), 3.into()],
            vec![2.into(), 3.into()],
        ];
        let sys = HypergraphSystem::build(labels, &sizes, 2, &edges).unwrap();
        assert_eq!(sys.num_edges(), 3);
        // {1,2} has canonical classes {0,1}; its faces are the two endpoints.
        assert_eq!(sys.skeleton(0), &[vec![1], vec![0]]);
        assert_eq!(sys.edge_key(2), "2-3");
    }

    #[test]
    fn three_uniform_edge_has_three_faces() {
        let sys = HypergraphSystem::new(vec![2, 2, 2], 3, vec![vec![0, 1, 2]]).unwrap();
        let mut faces = sys.skeleton(0).to_vec();
        faces.sort();
        assert_eq!(faces, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn wrong_edge_size_is_structural() {
        let err = HypergraphSystem::new(vec![2, 2, 2], 3, vec![vec![0, 1]]).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn unknown_label_is_structural() {
        let (labels, sizes) = labelled(&[1, 2], 3);
        let edges = vec![vec![Label::Int(1), Label::Int(7)]];
        let err = HypergraphSystem::build(labels, &sizes, 2, &edges).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn empty_class_rejected() {
        assert!(HypergraphSystem::new(vec![2, 0], 1, vec![vec![0]]).is_err());
    }

    #[test]
    fn triangle_blow_up_is_octahedron() {
        let k3 = HypergraphSystem::complete(3, 2, 2).unwrap();
        let b = k3.blow_up(BlowUpMode::Full).unwrap();
        assert_eq!(b.num_classes(), 6);
        assert_eq!(b.num_edges(), 12);
        // K_{2,2,2}: every vertex has degree 4, no edge inside a part.
        for v in 0..6 {
            let deg = b.edges().iter().filter(|e| e.contains(&v)).count();
            assert_eq!(deg, 4);
        }
        assert!(b.edges().iter().all(|e| e[0] / 2 != e[1] / 2));
    }

    #[test]
    fn single_edge_blow_up_has_two_to_the_r_edges() {
        for r in 1..=4 {
            let sys = HypergraphSystem::complete(r, 2, r).unwrap();
            assert_eq!(sys.blow_up(BlowUpMode::Full).unwrap().num_edges(), 1 << r);
        }
    }

    #[test]
    fn weak_blow_up_requires_edge_in_h() {
        let k3 = HypergraphSystem::complete(3, 2, 2).unwrap();
        assert!(k3.blow_up(BlowUpMode::Weak(3)).is_err());
    }

    /// Independent count: enumerate ω and test the "constant off e1" rule directly.
    fn brute_weak_count(sys: &HypergraphSystem, e1: usize) -> usize {
        let base = sys.edge(e1).to_vec();
        let mut count = 0;
        for e in sys.edges() {
            for bits in 0..(1usize << e.len()) {
                let outside: Vec<usize> = (0..e.len())
                    .filter(|&p| !base.contains(&e[p]))
                    .map(|p| (bits >> p) & 1)
                    .collect();
                if outside.iter().all(|&w| w == outside.first().copied().unwrap_or(0)) {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn weak_blow_up_counts_match_enumeration() {
        // K_3: every edge meets e1 in a vertex, so nothing is dropped.
        let k3 = HypergraphSystem::complete(3, 2, 2).unwrap();
        let weak = k3.blow_up(BlowUpMode::Weak(0)).unwrap();
        assert_eq!(weak.num_edges(), brute_weak_count(&k3, 0));
        assert_eq!(weak.num_edges(), 12);
        // K_4: the edge disjoint from e1 keeps only its two constant patterns.
        let k4 = HypergraphSystem::complete(4, 2, 2).unwrap();
        let weak = k4.blow_up(BlowUpMode::Weak(0)).unwrap();
        assert_eq!(weak.num_edges(), brute_weak_count(&k4, 0));
        assert_eq!(weak.num_edges(), 22);
        // 3-uniform on 5 classes: edges sharing one class with e1 lose patterns.
        let h = HypergraphSystem::complete(5, 2, 3).unwrap();
        let weak = h.blow_up(BlowUpMode::Weak(0)).unwrap();
        assert_eq!(weak.num_edges(), brute_weak_count(&h, 0));
        let full = h.blow_up(BlowUpMode::Full).unwrap();
        assert!(weak.edges().iter().all(|e| full.edges().contains(e)));
    }
}
