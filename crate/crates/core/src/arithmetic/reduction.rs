use std::sync::Arc;

use serde::Serialize;

use crate::arithmetic::group::{differences_generate, CyclicProduct, Homomorphism};
use crate::arithmetic::measure::MeasureZn;
use crate::error::{Error, Result};
use crate::model::{HypergraphSystem, WeightedHypergraph};
use crate::removal::RemovalResult;
use crate::tensor::Tensor;

/// Sweeps over `V_J` larger than this are skipped.
const SWEEP_LIMIT: usize = 1 << 24;

/// Outcome of the full sweep over `V_J`.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionCheck {
    pub points: usize,
    /// `ψ_j(x_{e_j}) = a + φ_j(d)` for every `x` and `j`.
    pub psi_identity: bool,
    /// `∏_j g_{e_j}(x_{e_j}) = ∏_j f_j(a + φ_j(d))` for every `x`.
    pub product_identity: bool,
    pub fiber_min: usize,
    pub fiber_max: usize,
    /// Every `(a, d) ∈ Z' × Z` is hit equally often.
    pub uniform: bool,
}

impl ReductionCheck {
    pub fn exact(&self) -> bool {
        self.psi_identity && self.product_identity && self.uniform
    }
}

/// The hypergraph system, weights and maps of the arithmetic reduction.
/// Classes are `J = {0, …, |J|−1}`, each `V_j = Z`, and `e_j = J ∖ {j}`.
#[derive(Clone, Debug)]
pub struct ReductionBundle {
    pub z: CyclicProduct,
    pub z_prime: CyclicProduct,
    pub phis: Vec<Homomorphism>,
    /// `phi_tables[j][x] = φ_j(x)`.
    pub phi_tables: Vec<Vec<usize>>,
    pub system: Arc<HypergraphSystem>,
    /// `edge_of[j]` is the id of `e_j`.
    pub edge_of: Vec<usize>,
    /// `psi_tables[j]` maps flat indices of `V_{e_j}` to `Z'`.
    pub psi_tables: Vec<Vec<usize>>,
    pub nu_h: WeightedHypergraph,
    pub g_h: WeightedHypergraph,
    pub f_values: Vec<Vec<f64>>,
    pub check: Option<ReductionCheck>,
}

fn odometer(index: &mut [usize], n: usize) -> bool {
    for slot in index.iter_mut().rev() {
        *slot += 1;
        if *slot < n {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Builds the reduction for homomorphisms `φ_j: Z → Z'`, a majorant `ν` on
/// `Z'` and functions `0 ≤ f_j ≤ ν`, and verifies it by a full sweep when
/// `|V_J| ≤ 2^24`.
pub fn reduce_multidim(
    z: &CyclicProduct,
    z_prime: &CyclicProduct,
    phis: &[Homomorphism],
    nu: &[f64],
    f_list: &[Vec<f64>],
) -> Result<ReductionBundle> {
    let k = phis.len();
    if k < 2 {
        return Err(Error::Input("the reduction needs at least two homomorphisms".into()));
    }
    if f_list.len() != k {
        return Err(Error::structural(format!("{} functions for {k} homomorphisms", f_list.len())));
    }
    let zp = z_prime.size();
    if nu.len() != zp || f_list.iter().any(|f| f.len() != zp) {
        return Err(Error::structural(format!("functions on Z' need {zp} values")));
    }
    for f in f_list {
        if f.iter().zip(nu).any(|(&a, &b)| !(a >= 0.0) || a > b) {
            return Err(Error::contract("each f_j must satisfy 0 ≤ f_j ≤ ν"));
        }
    }
    for phi in phis {
        phi.validate(z, z_prime)?;
    }
    let phi_tables: Vec<Vec<usize>> = phis.iter().map(|p| p.table(z, z_prime)).collect();
    if !differences_generate(z, z_prime, &phi_tables) {
        return Err(Error::contract(
            "the differences φ_i(d) − φ_j(d) do not generate Z'; coset foliation is not supported",
        ));
    }

    let n = z.size();
    let r = k - 1;
    let system = Arc::new(HypergraphSystem::complete(k, n, r)?);
    let mut edge_of = Vec::with_capacity(k);
    let mut psi_tables = Vec::with_capacity(k);
    for j in 0..k {
        let e: Vec<usize> = (0..k).filter(|&i| i != j).collect();
        edge_of.push(system.edge_id(&e).expect("complete system"));
        // ψ_j(x) = Σ_{i ∈ e_j} (φ_i(x_i) − φ_j(x_i))
        let diff: Vec<Vec<usize>> = e
            .iter()
            .map(|&i| (0..n).map(|x| z_prime.add(phi_tables[i][x], z_prime.neg(phi_tables[j][x]))).collect())
            .collect();
        let mut table = Vec::with_capacity(n.pow(r as u32));
        let mut index = vec![0usize; r];
        loop {
            table.push(index.iter().zip(&diff).fold(0, |acc, (&x, t)| z_prime.add(acc, t[x])));
            if !odometer(&mut index, n) {
                break;
            }
        }
        psi_tables.push(table);
    }

    let mut nu_w = vec![None; k];
    let mut g_w = vec![None; k];
    for j in 0..k {
        let shape = vec![n; r];
        nu_w[edge_of[j]] = Some(Tensor::new(shape.clone(), psi_tables[j].iter().map(|&z| nu[z]).collect())?);
        g_w[edge_of[j]] = Some(Tensor::new(shape, psi_tables[j].iter().map(|&z| f_list[j][z]).collect())?);
    }
    let nu_h = WeightedHypergraph::new(system.clone(), nu_w.into_iter().map(Option::unwrap).collect())?;
    let g_h = WeightedHypergraph::new(system.clone(), g_w.into_iter().map(Option::unwrap).collect())?;

    let mut bundle = ReductionBundle {
        z: z.clone(),
        z_prime: z_prime.clone(),
        phis: phis.to_vec(),
        phi_tables,
        system,
        edge_of,
        psi_tables,
        nu_h,
        g_h,
        f_values: f_list.to_vec(),
        check: None,
    };
    if (n as f64).powi(k as i32) <= SWEEP_LIMIT as f64 {
        bundle.check = Some(bundle.sweep());
    }
    Ok(bundle)
}

impl ReductionBundle {
    pub fn k(&self) -> usize {
        self.phis.len()
    }

    /// Flat index of `x_{e_j}` inside `V_{e_j}`.
    fn edge_index(&self, x: &[usize], j: usize) -> usize {
        let n = self.z.size();
        x.iter().enumerate().filter(|&(i, _)| i != j).fold(0, |acc, (_, &v)| acc * n + v)
    }

    /// Checks the pointwise identities and the uniform cover of `Z' × Z`.
    pub fn sweep(&self) -> ReductionCheck {
        let (zp, k, n) = (&self.z_prime, self.k(), self.z.size());
        let mut fibers = vec![0usize; zp.size() * n];
        let mut psi_identity = true;
        let mut product_identity = true;
        let mut x = vec![0usize; k];
        let mut points = 0;
        loop {
            points += 1;
            let a = (0..k).fold(0, |acc, i| zp.add(acc, self.phi_tables[i][x[i]]));
            let d = self.z.neg(x.iter().fold(0, |acc, &v| self.z.add(acc, v)));
            fibers[a * n + d] += 1;
            let mut lhs = 1.0;
            let mut rhs = 1.0;
            for j in 0..k {
                let target = zp.add(a, self.phi_tables[j][d]);
                let e = self.edge_index(&x, j);
                psi_identity &= self.psi_tables[j][e] == target;
                lhs *= self.g_h.weight(self.edge_of[j]).data()[e];
                rhs *= self.f_values[j][target];
            }
            product_identity &= lhs == rhs;
            if !odometer(&mut x, n) {
                break;
            }
        }
        let fiber_min = *fibers.iter().min().expect("nonempty");
        let fiber_max = *fibers.iter().max().expect("nonempty");
        ReductionCheck { points, psi_identity, product_identity, fiber_min, fiber_max, uniform: fiber_min == fiber_max }
    }

    /// `E[∏_j f_j(a + φ_j(d)) | a ∈ Z', d ∈ Z]` by a direct double loop.
    pub fn pattern_density(&self) -> f64 {
        let (zp, n) = (&self.z_prime, self.z.size());
        let mut total = 0.0;
        for a in 0..zp.size() {
            for d in 0..n {
                total += (0..self.k()).map(|j| self.f_values[j][zp.add(a, self.phi_tables[j][d])]).product::<f64>();
            }
        }
        total / (zp.size() * n) as f64
    }
}

/// `Z = Z' = Z_N`, `φ_j(d) = j d` for `j = 0, …, k−1`.
pub fn reduce_ap(nu: &MeasureZn, fs: &[&MeasureZn]) -> Result<ReductionBundle> {
    let n = nu.n() as u64;
    let z = CyclicProduct::cyclic(n)?;
    let phis: Vec<Homomorphism> = (0..fs.len()).map(|j| Homomorphism { matrix: vec![vec![j as i64]] }).collect();
    let f_list: Vec<Vec<f64>> = fs.iter().map(|f| f.values().to_vec()).collect();
    reduce_multidim(&z, &z, &phis, nu.values(), &f_list)
}

/// `Z = Z_N`, `Z' = Z_N²`, `φ_0 = 0`, `φ_1(d) = (d, 0)`, `φ_2(d) = (0, d)`.
/// Functions on `Z_N²` are indexed by `x N + y`.
pub fn reduce_corner(n: usize, nu: &[f64], f_list: &[Vec<f64>]) -> Result<ReductionBundle> {
    let z = CyclicProduct::cyclic(n as u64)?;
    let z2 = CyclicProduct::new(vec![n as u64, n as u64])?;
    let phis = vec![
        Homomorphism { matrix: vec![vec![0], vec![0]] },
        Homomorphism { matrix: vec![vec![1], vec![0]] },
        Homomorphism { matrix: vec![vec![0], vec![1]] },
    ];
    reduce_multidim(&z, &z2, &phis, nu, f_list)
}

/// The sets `A_j` recovered from a removal on the reduced system.
#[derive(Clone, Debug, Serialize)]
pub struct DeletedSets {
    /// Elements of `A_j`, as `Z'` indices.
    pub sets: Vec<Vec<usize>>,
    /// `∏_j 1_{A_j}(a + φ_j(d)) = 0` for all `a, d`.
    pub pattern_free: bool,
    /// `E[f_j 1_{Z' ∖ A_j}]`.
    pub removed_f: Vec<f64>,
    /// `E[g_{e_j} 1_{V_{e_j} ∖ E'_j}]`.
    pub removed_g: Vec<f64>,
    /// `removed_f[j] ≤ (r+1) removed_g[j]` for every `j`.
    pub transfer_holds: bool,
}

/// `A_j = {z' : |ψ_j^{-1}(z') ∩ E'_j| > r/(r+1) |ψ_j^{-1}(z')|}`, with both
/// conclusions checked by sweeps.
pub fn extract_deleted_sets(bundle: &ReductionBundle, removal: &RemovalResult) -> Result<DeletedSets> {
    let k = bundle.k();
    let r = k - 1;
    let zp = &bundle.z_prime;
    if removal.kept_sets.len() != bundle.system.num_edges() {
        return Err(Error::structural("removal result does not belong to this system"));
    }
    let mut sets = Vec::with_capacity(k);
    let mut members = Vec::with_capacity(k);
    let mut removed_f = Vec::with_capacity(k);
    let mut removed_g = Vec::with_capacity(k);
    for j in 0..k {
        let e = bundle.edge_of[j];
        let kept = &removal.kept_sets[e];
        let mut fiber = vec![0usize; zp.size()];
        let mut inside = vec![0usize; zp.size()];
        for (x, &z) in bundle.psi_tables[j].iter().enumerate() {
            fiber[z] += 1;
            inside[z] += usize::from(kept.contains(x));
        }
        if let Some(z) = fiber.iter().position(|&c| c == 0) {
            return Err(Error::Invariant(format!("ψ_{j} misses {z} although the differences generate Z'")));
        }
        let member: Vec<bool> = (0..zp.size()).map(|z| (r + 1) * inside[z] > r * fiber[z]).collect();
        sets.push((0..zp.size()).filter(|&z| member[z]).collect::<Vec<_>>());
        let f = &bundle.f_values[j];
        removed_f.push((0..zp.size()).filter(|&z| !member[z]).map(|z| f[z]).sum::<f64>() / zp.size() as f64);
        let g = bundle.g_h.weight(e).data();
        removed_g.push((0..g.len()).filter(|&x| !kept.contains(x)).map(|x| g[x]).sum::<f64>() / g.len() as f64);
        members.push(member);
    }
    let mut pattern_free = true;
    'outer: for a in 0..zp.size() {
        for d in 0..bundle.z.size() {
            if (0..k).all(|j| members[j][zp.add(a, bundle.phi_tables[j][d])]) {
                pattern_free = false;
                break 'outer;
            }
        }
    }
    let transfer_holds =
        removed_f.iter().zip(&removed_g).all(|(&f, &g)| f <= (r + 1) as f64 * g + 1e-12 * (1.0 + f));
    Ok(DeletedSets { sets, pattern_free, removed_f, removed_g, transfer_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::measure::{ap_density, random_measure};
    use crate::counting::h_density;
    use crate::removal::dense_remove;

    #[test]
    fn ap_reduction_is_exact() {
        for k in [3usize, 4] {
            let nu = random_measure(13, 0.5, k as u64).unwrap();
            let f = MeasureZn::new(nu.values().iter().map(|v| v * 0.5).collect()).unwrap();
            let b = reduce_ap(&nu, &vec![&f; k]).unwrap();
            let c = b.check.clone().unwrap();
            assert!(c.exact(), "{c:?}");
            assert_eq!(c.fiber_min, 13usize.pow(k as u32) / 169);
            let lhs = h_density(&b.g_h).unwrap();
            let rhs = ap_density(&f, k).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            assert!((b.pattern_density() - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn f_equal_to_nu_gives_nu() {
        let nu = random_measure(7, 0.6, 2).unwrap();
        let b = reduce_ap(&nu, &[&nu, &nu, &nu]).unwrap();
        for e in 0..3 {
            assert_eq!(b.g_h.weight(e), b.nu_h.weight(e));
        }
    }

    #[test]
    fn corner_reduction_is_exact() {
        let n = 7;
        let nu = vec![1.0; n * n];
        let f: Vec<f64> = (0..n * n).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let b = reduce_corner(n, &nu, &[f.clone(), f.clone(), f]).unwrap();
        let c = b.check.clone().unwrap();
        assert!(c.exact() && c.fiber_min == 1, "{c:?}");
        assert!((h_density(&b.g_h).unwrap() - b.pattern_density()).abs() < 1e-12);
    }

    #[test]
    fn non_generating_maps_are_rejected() {
        let z = CyclicProduct::cyclic(6).unwrap();
        let phis: Vec<Homomorphism> = [0, 2, 4].iter().map(|&a| Homomorphism { matrix: vec![vec![a]] }).collect();
        let one = vec![1.0; 6];
        let err = reduce_multidim(&z, &z, &phis, &one, &[one.clone(), one.clone(), one.clone()]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn extreme_removals_give_extreme_sets() {
        let nu = MeasureZn::ones(5).unwrap();
        let b = reduce_ap(&nu, &[&nu, &nu, &nu]).unwrap();
        // keeping everything: nothing removed, every A_j = Z'
        let mut kept = dense_remove(&WeightedHypergraph::constant(b.system.clone(), 0.0).unwrap(), 0.5).unwrap();
        for k in kept.kept_sets.iter_mut() {
            k.insert_range(..);
        }
        let all = extract_deleted_sets(&b, &kept).unwrap();
        assert!(all.sets.iter().all(|s| s.len() == 5));
        assert!(!all.pattern_free);
        let none = dense_remove(&WeightedHypergraph::constant(b.system.clone(), 0.0).unwrap(), 0.5).unwrap();
        let empty = extract_deleted_sets(&b, &none).unwrap();
        assert!(empty.sets.iter().all(|s| s.is_empty()));
        assert!(empty.pattern_free && empty.transfer_holds);
    }

    #[test]
    fn removal_on_a_planted_corner_gives_corner_free_sets() {
        let n = 7;
        let nu = vec![1.0; n * n];
        // A = {(0,0), (1,0), (0,1)} ∪ a few scattered points
        let mut f = vec![0.0; n * n];
        for (x, y) in [(0, 0), (1, 0), (0, 1), (3, 5), (5, 2)] {
            f[x * n + y] = 1.0;
        }
        let b = reduce_corner(n, &nu, &[f.clone(), f.clone(), f.clone()]).unwrap();
        let removal = dense_remove(&b.g_h, 0.5).unwrap();
        let sets = extract_deleted_sets(&b, &removal).unwrap();
        assert!(sets.pattern_free);
        assert!(sets.transfer_holds);
        // direct check of the first conclusion over all (a, d)
        for a in 0..n * n {
            for d in 0..n {
                let pts = [a, b.z_prime.add(a, b.phi_tables[1][d]), b.z_prime.add(a, b.phi_tables[2][d])];
                assert!(!(0..3).all(|j| sets.sets[j].contains(&pts[j])));
            }
        }
    }
}
