//! Subset-enumeration reference for the Prohorov distance; exponential in the atom count.

use super::{AtomicMeasure, DistanceTable};

/// Largest atom count accepted by [`prohorov_brute`].
pub const MAX_ATOMS: usize = 20;

/// Smallest `eps` with `mu(A) <= nu(A^eps) + eps` for every subset `A` of the support of `mu`.
fn one_sided(mu: &AtomicMeasure, nu: &AtomicMeasure, dist: &DistanceTable) -> f64 {
    let k = mu.atoms().len();
    assert!(k <= MAX_ATOMS, "brute force limited to {MAX_ATOMS} atoms");
    let mut worst: f64 = 0.0;
    for subset in 1u32..(1u32 << k) {
        let chosen: Vec<usize> = (0..k).filter(|i| subset & (1 << i) != 0).collect();
        let mass: f64 = chosen.iter().map(|&i| mu.atoms()[i].1).sum();
        let mut reach: Vec<(f64, f64)> = nu
            .atoms()
            .iter()
            .map(|&(q, m)| (chosen.iter().map(|&i| dist.get(mu.atoms()[i].0, q)).fold(f64::INFINITY, f64::min), m))
            .collect();
        reach.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Halo A^eps for eps just above reach[k].0 holds the first k+1 atoms.
        let mut best = mass;
        let mut covered = 0.0;
        let mut i = 0;
        while i < reach.len() {
            let r = reach[i].0;
            while i < reach.len() && reach[i].0 == r {
                covered += reach[i].1;
                i += 1;
            }
            best = best.min(r.max(mass - covered));
        }
        worst = worst.max(best);
    }
    worst
}

/// Prohorov distance by enumerating every subset in both directions.
pub fn prohorov_brute(mu: &AtomicMeasure, nu: &AtomicMeasure, dist: &DistanceTable) -> f64 {
    one_sided(mu, nu, dist).max(one_sided(nu, mu, dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_space() {
        for &d in &[0.3, 1.0, 2.5] {
            let table = DistanceTable::from_fn(2, |_, _| d);
            let a = AtomicMeasure::new(vec![(0, 1.0)]).unwrap();
            let b = AtomicMeasure::new(vec![(1, 1.0)]).unwrap();
            assert!((prohorov_brute(&a, &b, &table) - d.min(1.0)).abs() < 1e-15);
        }
        let table = DistanceTable::from_fn(2, |_, _| 2.0);
        let a = AtomicMeasure::new(vec![(0, 0.5), (1, 0.5)]).unwrap();
        let b = AtomicMeasure::new(vec![(0, 1.0)]).unwrap();
        assert!((prohorov_brute(&a, &b, &table) - 0.5).abs() < 1e-15);
    }
}
