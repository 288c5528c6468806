use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wplap_core::energies::truncated_energy_pairs;
use wplap_core::funcspace::{EnergySpec, Setup};
use wplap_core::geometry::{build_grid, sample_uniform, Domain, Label, LabeledSet, Region};
use wplap_core::numerics::{dist, Point};
use wplap_core::transport::*;

/// O(n³) Hungarian method on a square cost matrix; returns the optimal cost.
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

fn sq(a: &Point, b: &Point) -> f64 {
    dist(a, b).powi(2)
}

#[test]
fn auction_matches_hungarian_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..12 {
        let n = 3 + trial % 5;
        let m_per = 4 + trial % 3;
        let m = n * m_per;
        let persons: Vec<Point> = (0..m).map(|_| [rng.gen(), rng.gen(), 0.0]).collect();
        let objects: Vec<Point> = (0..n).map(|_| [rng.gen(), rng.gen(), 0.0]).collect();
        let caps = capacities(m, n).unwrap();
        let a = auction_assign(&persons, &objects, &caps, 2, AuctionOptions::default()).unwrap();
        let mut counts = vec![0; n];
        a.iter().for_each(|&j| counts[j] += 1);
        assert_eq!(counts, caps);
        let got: f64 = a.iter().enumerate().map(|(i, &j)| sq(&persons[i], &objects[j])).sum();
        let slots: Vec<usize> = (0..n).flat_map(|j| std::iter::repeat_n(j, caps[j])).collect();
        let matrix: Vec<Vec<f64>> = persons.iter().map(|x| slots.iter().map(|&j| sq(x, &objects[j])).collect()).collect();
        let best = hungarian(&matrix);
        assert!((got - best).abs() <= 1e-8 * best.max(1e-12), "trial {trial}: {got} vs {best}");
    }
}

#[test]
fn unequal_capacities_are_within_one() {
    let caps = capacities(10, 3).unwrap();
    assert_eq!(caps, vec![4, 3, 3]);
    assert!(capacities(2, 3).is_err());
}

#[test]
fn too_few_cells_is_a_config_error() {
    let grid = build_grid(&Domain::unit_box(2), &LabeledSet::empty(2), 4).unwrap();
    let s = sample_uniform(&Domain::unit_box(2), 5, 1).unwrap();
    assert!(transport_map(&grid, &s).is_err());
}

#[test]
fn single_sample_reaches_the_corners() {
    let grid = build_grid(&Domain::unit_box(2), &LabeledSet::empty(2), 16).unwrap();
    let plan = transport_map(&grid, &[[0.5, 0.5, 0.0]]).unwrap();
    let circum = 0.5f64.sqrt();
    let disp = plan.max_displacement(&grid);
    assert!(disp <= circum && disp > circum - grid.h());
    assert!((plan.zeta - 2.0 * disp).abs() < 1e-14);
}

#[test]
fn block_samples_stay_inside_blocks() {
    let res = 8;
    let grid = build_grid(&Domain::unit_box(2), &LabeledSet::empty(2), res).unwrap();
    let h = grid.h();
    let mut samples = Vec::new();
    for bx in 0..res / 2 {
        for by in 0..res / 2 {
            samples.push([(2 * bx) as f64 * h + 0.5 * h, (2 * by) as f64 * h + 0.5 * h, 0.0]);
        }
    }
    let plan = transport_map(&grid, &samples).unwrap();
    assert_eq!(plan.counts(), vec![4; samples.len()]);
    assert!(plan.max_displacement(&grid) <= 2f64.sqrt() * h + 1e-12);
}

#[test]
fn zeta_shrinks_with_n() {
    let dom = Domain::unit_box(2);
    let mut medians = Vec::new();
    for n in [64usize, 256, 1024] {
        let grid = build_grid(&dom, &LabeledSet::empty(2), transport_resolution(n, 2)).unwrap();
        let mut z: Vec<f64> = (0..5).map(|s| transport_map(&grid, &sample_uniform(&dom, n, 100 + s).unwrap()).unwrap().zeta).collect();
        z.sort_by(f64::total_cmp);
        medians.push(z[2]);
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

fn center_region() -> Region {
    let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 0.0)], 0.05).unwrap();
    Region::new(Domain::unit_box(2), g).unwrap()
}

#[test]
fn identity_plan_reduces_to_the_pair_energy() {
    let setup = Setup::new(center_region(), 32).unwrap();
    let spec = EnergySpec::standard(2, 2.0, 1.0, 0.3, 0.1).unwrap().with_tau(0.05);
    let vals: Vec<f64> = setup.grid.nodes.iter().map(|x| x[0] * x[1] + x[0].sin()).collect();
    let plan = TransportPlan::identity(&setup.grid);
    let a = pushforward_energy(&setup, &vals, &plan, &spec).unwrap();
    let b = truncated_energy_pairs(&setup, &vals, &spec).unwrap();
    assert!((a - b).abs() <= 1e-10 * b);
    let zero = pushforward_energy(&setup, &vec![3.0; setup.grid.len()], &plan, &spec).unwrap();
    assert_eq!(zero, 0.0);
    let rep = sandwich_check(&setup, &vals, &plan, &spec).unwrap();
    assert_eq!((rep.q, rep.big_q), (1.0, 1.0));
    assert!(rep.holds && (rep.lower - rep.value).abs() <= 1e-12 * rep.value);
}

#[test]
fn sandwich_on_random_fields() {
    let region = center_region();
    let n = 1024;
    // 64² cells, four per sample.
    let setup = Setup::new(region.clone(), 64).unwrap();
    let samples = sample_uniform(&region.domain, n, 11).unwrap();
    let plan = transport_map(&setup.grid, &samples).unwrap();
    let base = EnergySpec::standard(2, 2.0, 1.0, 0.3, 0.5).unwrap();
    let k1 = comparison_kappa(&base);
    // τ large enough that q > 0.
    let tau = tau_schedule(plan.zeta, TauRule::Fixed(plan.zeta * (k1 + 1.0 / 0.3) * 4.0)).unwrap();
    let spec = base.with_tau(tau);
    let cmp = comparison_lemma_check(&setup, &plan, &spec).unwrap();
    assert!(cmp.holds, "{cmp:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0));
        let vals: Vec<f64> = setup.grid.nodes.iter().map(|x| (a * x[0] + c).sin() * (b * x[1]).cos()).collect();
        let rep = sandwich_check(&setup, &vals, &plan, &spec).unwrap();
        assert!(rep.q > 0.0 && rep.holds, "{rep:?}");
    }
}

#[test]
fn q_nonpositive_is_rejected() {
    let region = center_region();
    let setup = Setup::new(region.clone(), 32).unwrap();
    let samples = sample_uniform(&region.domain, 64, 3).unwrap();
    let plan = transport_map(&setup.grid, &samples).unwrap();
    let spec = EnergySpec::standard(2, 2.0, 1.0, 0.3, 0.1).unwrap().with_tau(plan.zeta.sqrt());
    let vals = vec![0.0; setup.grid.len()];
    assert!(matches!(sandwich_check(&setup, &vals, &plan, &spec), Err(wplap_core::error::Error::Admissibility(_))));
}
