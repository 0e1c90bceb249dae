mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdhelm::femspace::{build_space, project_s, project_u, PmlField};
use tdhelm::fourier::{chi_e, FineGrid};
use tdhelm::hierarchy::{get_child_elements, get_parent_elements};

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn chi_is_a_partition_of_unity(seed in any::<u64>(), density in 0.0f64..1.0, dim in 1usize..=2) {
        let (spec, hier) = small_hierarchy(dim);
        let mesh = random_mesh(&hier, seed, density);
        let grid = FineGrid::new(hier.clone(), 2, &spec);
        for x in grid.positions() {
            let n = mesh.leaves().iter().filter(|e| chi_e(&hier, e, &x)).count();
            prop_assert_eq!(n, 1, "point {:?}", x);
        }
    }

    #[test]
    fn leaves_tile_the_lattice(seed in any::<u64>(), density in 0.0f64..1.0, dim in 1usize..=2) {
        let (_, hier) = small_hierarchy(dim);
        let mesh = random_mesh(&hier, seed, density);
        let cells: u64 = mesh
            .leaves()
            .iter()
            .map(|e| {
                let (lo, hi) = hier.lattice_box(e);
                (0..dim).map(|a| (hi[a] - lo[a]) as u64).product::<u64>()
            })
            .sum();
        prop_assert_eq!(cells as usize, hier.finest_cell_count());
        for (k, e) in mesh.leaves().iter().enumerate() {
            let (lo, hi) = hier.lattice_box(e);
            let hi1 = if dim == 2 { hi[1] } else { 1 };
            for j in lo[1]..hi1 {
                for i in lo[0]..hi[0] {
                    prop_assert_eq!(mesh.owner_of_cell([i, j]), k);
                }
            }
            // Every leaf box is a union of boxes of the next finer level.
            if let Some(p) = hier.parent(e) {
                let (plo, phi) = hier.lattice_box(&p);
                prop_assert!((0..dim).all(|a| plo[a] <= lo[a] && hi[a] <= phi[a]));
            }
        }
    }

    #[test]
    fn parents_and_children_round_trip(seed in any::<u64>(), density in 0.0f64..1.0, dim in 1usize..=2) {
        let (_, hier) = small_hierarchy(dim);
        let mesh = random_mesh(&hier, seed, density);
        let parents = get_parent_elements(&mesh);
        for e in mesh.leaves() {
            if let Some(p) = hier.parent(e) {
                prop_assert!(parents.contains(&p));
            }
        }
        let back = get_child_elements(&hier, &parents).unwrap();
        prop_assert!(back.same_leaves(&mesh));
    }

    #[test]
    fn projection_onto_same_mesh_is_identity(seed in any::<u64>(), density in 0.0f64..1.0, dim in 1usize..=2) {
        let (spec, hier) = small_hierarchy(dim);
        let mesh = random_mesh(&hier, seed, density);
        let a = build_space(&mesh, 2, &spec).unwrap();
        let b = build_space(&mesh.clone(), 2, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u = random_field(&a, &mut rng);
        let v = project_u(&a, &u, &b);
        for (x, y) in u.iter().zip(&v) {
            prop_assert!((x - y).abs() <= 1e-14);
        }
        let mut s = PmlField::zeros(&a);
        for slot in 0..s.slots() {
            let (x, y) = s.element_mut(slot);
            x.iter_mut().chain(y.iter_mut()).for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let ps = project_s(&a, &s, &b);
        prop_assert_eq!(ps.data(), s.data());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn projection_is_linear_and_keeps_constants(seed in any::<u64>(), d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, dim in 1usize..=2) {
        let (spec, hier) = small_hierarchy(dim);
        let old = build_space(&random_mesh(&hier, seed, d1), 2, &spec).unwrap();
        let new = build_space(&random_mesh(&hier, seed.wrapping_add(7), d2), 2, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&old, &mut rng);
        let v = random_field(&old, &mut rng);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let (pu, pv, pw) = (project_u(&old, &u, &new), project_u(&old, &v, &new), project_u(&old, &w, &new));
        for i in 0..new.num_nodes() {
            prop_assert!((pw[i] - a * pu[i] - b * pv[i]).abs() <= 1e-12);
        }
        let one = vec![1.0; old.num_nodes()];
        let p1 = project_u(&old, &one, &new);
        for i in (0..new.num_nodes()).filter(|&i| !new.is_boundary(i)) {
            prop_assert!((p1[i] - 1.0).abs() <= 1e-12, "node {} gives {}", i, p1[i]);
        }
    }
}
