use std::collections::BTreeSet;

use proptest::prelude::*;
use vnembed::fixtures::{self, running_prices, running_request, running_substrate, A, B, C, D, E, G, X, XY, XZ, Y, Z};
use vnembed::milp::{solve_bip, BipOptions, Status};
use vnembed::model::{build_augmented, SubstrateLink, SubstrateNetwork, SubstrateNode};
use vnembed::pathgen::dijkstra::{dijkstra_capacitated, path_cost};
use vnembed::pathgen::init::lp_n_model;
use vnembed::pathgen::master::{dual_feasibility, relaxation};
use vnembed::pathgen::weights::weighted_average;
use vnembed::pathgen::*;
use vnembed::topogen::rng;

fn star(bws: &[u32]) -> SubstrateNetwork {
    let nodes = (0..=bws.len()).map(|k| SubstrateNode { cpu: 10, x: k as f64, y: 0.0 }).collect();
    let links = bws.iter().enumerate().map(|(k, &bw)| SubstrateLink { u: 0, v: k + 1, bw }).collect();
    SubstrateNetwork::new(nodes, links).unwrap()
}

#[test]
fn worked_example_weights() {
    let w = weight_virtual(X, &running_request()).unwrap();
    assert!((w - 16.67).abs() <= 0.005, "W_X = {w}");
    let w = weight_substrate(C, &running_substrate()).unwrap();
    assert!((w - 61.11).abs() <= 0.005, "W_C = {w}");
    let hi = weight_substrate(0, &star(&[80, 10])).unwrap();
    let lo = weight_substrate(0, &star(&[60, 70])).unwrap();
    assert!((hi - 72.22).abs() <= 0.005 && (lo - 65.38).abs() <= 0.005);
    assert!(hi > lo);
    assert_eq!(weight_substrate(0, &star(&[40, 40, 40])).unwrap(), 40.0);
    assert_eq!(weighted_average([7]), Some(7.0));
    assert_eq!(weighted_average([5, 5, 5]), Some(5.0));
}

#[test]
fn table_three_lengths() {
    let sn = running_substrate();
    let vn = running_request();
    let aug = build_augmented(&sn, &vn).unwrap();
    assert_eq!(aug.candidates(X), &[A, C]);
    assert_eq!(aug.candidates(Y), &[C, G]);
    assert_eq!(aug.candidates(Z), &[B, D, E]);
    let combos = price_combinations(&aug, XZ, &running_prices(&sn), false);
    assert_eq!(combos.len(), 6);
    let expect = [
        ((A, B), 4.5, vec![A, B]),
        ((A, D), 7.0, vec![A, B, D]),
        ((A, E), 11.0, vec![A, B, E]),
        ((C, B), 9.5, vec![C, A, B]),
        ((C, D), 9.0, vec![C, D]),
        ((C, E), 16.0, vec![C, A, B, E]),
    ];
    for (c, (ends, len, nodes)) in combos.iter().zip(expect) {
        assert_eq!((c.u, c.v), ends);
        let (p, l) = c.path.as_ref().unwrap();
        assert_eq!(*l, len, "{}{}", fixtures::node_name(c.u), fixtures::node_name(c.v));
        assert_eq!(p.nodes(), nodes.as_slice());
    }
}

#[test]
fn running_example_pipeline() {
    let sn = running_substrate();
    let vn = running_request();
    let aug = build_augmented(&sn, &vn).unwrap();
    let init = init_sol(&aug, None).unwrap();
    assert_eq!(init.pool.len(), 2);
    let a = final_sol(&sn, &vn, &PathGenOptions::default());
    let e = a.result.unwrap();
    e.validate(&sn, &vn).unwrap();
    let mut sn2 = sn.clone();
    sn2.allocate(&vn, &e).unwrap();
}

#[test]
fn coherence_forces_shared_meta_link() {
    let sn = running_substrate();
    let vn = running_request();
    let aug = build_augmented(&sn, &vn).unwrap();
    let path = |v: Vec<usize>| sn.path_from_nodes(v).unwrap();
    let pool = vec![
        AugPath { virtual_link: XZ, path: path(vec![A, B]) },
        AugPath { virtual_link: XZ, path: path(vec![C, D]) },
        AugPath { virtual_link: XY, path: path(vec![C, G]) },
    ];
    let pm = build_primal(&aug, &pool).unwrap();
    let sol = solve_restricted_primal(&pm, &aug, &pool, None).unwrap().embedding;
    assert_eq!(sol.node_map[X], C);
    assert_eq!(sol.link_map[XZ].nodes(), &[C, D]);
    assert_eq!(sol.node_map[Z], D);

    let only_a = vec![pool[0].clone(), pool[2].clone()];
    let pm = build_primal(&aug, &only_a).unwrap();
    assert!(solve_restricted_primal(&pm, &aug, &only_a, None).is_err());
}

#[test]
fn primal_counts_match_closed_form() {
    let mut r = rng(11, 0);
    let mut checked = 0;
    while checked < 30 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let Ok(init) = init_sol(&aug, None) else { continue };
        let pool = init.pool;
        let pm = build_primal(&aug, &pool).unwrap();
        let cand_total: usize = (0..vn.nodes().len()).map(|i| aug.candidates(i).len()).sum();
        let hosts: BTreeSet<usize> = (0..vn.nodes().len()).flat_map(|i| aug.candidates(i).to_vec()).collect();
        let used: BTreeSet<usize> = pool.iter().flat_map(|p| p.path.links().to_vec()).collect();
        assert_eq!(pm.model.var_count(), pool.len() + cand_total);
        assert_eq!(
            pm.model.constraint_count(),
            vn.nodes().len() + hosts.len() + vn.links().len() + used.len() + 2 * pool.len()
        );
        assert!(matches!(build_primal(&aug, &[]), Err(MissingPaths { virtual_link: 0 })));
        checked += 1;
    }
}

#[test]
fn init_paths_pass_independent_walk() {
    let mut r = rng(12, 0);
    let mut checked = 0;
    while checked < 100 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let Ok(init) = init_sol(&aug, None) else { continue };
        let mut load = vec![0u32; sn.link_count()];
        let hosts: BTreeSet<usize> = init.node_map.iter().copied().collect();
        assert_eq!(hosts.len(), vn.nodes().len());
        for (i, &u) in init.node_map.iter().enumerate() {
            assert!(aug.is_candidate(i, u));
        }
        for (k, p) in init.pool.iter().enumerate() {
            assert_eq!(p.virtual_link, k);
            let vl = vn.links()[k];
            let nodes = p.path.nodes();
            assert_eq!((nodes[0], *nodes.last().unwrap()), (init.node_map[vl.i], init.node_map[vl.j]));
            assert_eq!(nodes.iter().collect::<BTreeSet<_>>().len(), nodes.len(), "simple");
            for (w, &l) in nodes.windows(2).zip(p.path.links()) {
                let link = sn.links()[l];
                assert!((link.u, link.v) == (w[0], w[1]) || (link.v, link.u) == (w[0], w[1]));
                load[l] += vl.bw;
            }
        }
        for (l, &x) in load.iter().enumerate() {
            assert!(x <= sn.residual_bw(l));
        }
        checked += 1;
    }
}

#[test]
fn lp_n_matches_assignment_enumeration() {
    let mut r = rng(13, 0);
    let mut checked = 0;
    while checked < 40 {
        let sn = fixtures::random_substrate(8, &mut r);
        let vn = fixtures::random_request(4, 30.0..120.0, &mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let w = NodeWeights::compute(&sn, &vn);
        let cost = |i: usize, u: usize| (w.w_substrate[u] > 0.0).then(|| w.w_virtual[i] / w.w_substrate[u]);
        let mut best: Option<f64> = None;
        let c = &aug.candidate_sets;
        for &a in &c[0] {
            for &b in &c[1] {
                for &cc in &c[2] {
                    for &d in &c[3] {
                        let m = [a, b, cc, d];
                        if m.iter().collect::<BTreeSet<_>>().len() < 4 {
                            continue;
                        }
                        let Some(total) = m.iter().enumerate().map(|(i, &u)| cost(i, u)).sum::<Option<f64>>() else {
                            continue;
                        };
                        if best.is_none_or(|b| total < b) {
                            best = Some(total);
                        }
                    }
                }
            }
        }
        let (model, vars) = lp_n_model(&aug, &w);
        let s = solve_bip(&model, &BipOptions::default()).unwrap();
        match best {
            None => assert_ne!(s.status, Status::Optimal),
            Some(b) => {
                assert_eq!(s.status, Status::Optimal);
                assert!((s.objective - b).abs() <= 1e-9 * b.max(1.0), "{} vs {b}", s.objective);
                let map = solve_lp_n(&aug, &w, None).unwrap();
                let total: f64 = map.iter().enumerate().map(|(i, &u)| cost(i, u).unwrap()).sum();
                assert!((total - b).abs() <= 1e-9 * b.max(1.0));
                assert_eq!(vars.len(), 4);
                checked += 1;
            }
        }
    }
}

#[test]
fn lp_n_shared_candidate_goes_to_larger_advantage() {
    // Both virtual nodes can use hub 0; leaf 1 is well connected, leaf 2 is not.
    let nodes = vec![
        SubstrateNode { cpu: 50, x: 50.0, y: 50.0 },
        SubstrateNode { cpu: 50, x: 0.0, y: 50.0 },
        SubstrateNode { cpu: 50, x: 100.0, y: 50.0 },
    ];
    let links = vec![SubstrateLink { u: 0, v: 1, bw: 90 }, SubstrateLink { u: 0, v: 2, bw: 30 }];
    let sn = SubstrateNetwork::new(nodes, links).unwrap();
    use vnembed::model::{VirtualLink, VirtualNode, VnRequest};
    let vn = VnRequest::new(
        0,
        vec![VirtualNode { cpu: 1, x: 25.0, y: 50.0, dev: 30.0 }, VirtualNode { cpu: 1, x: 75.0, y: 50.0, dev: 30.0 }],
        vec![VirtualLink { i: 0, j: 1, bw: 30 }],
        0.0,
        1.0,
    )
    .unwrap();
    let aug = build_augmented(&sn, &vn).unwrap();
    assert_eq!(aug.candidates(0), &[0, 1]);
    assert_eq!(aug.candidates(1), &[0, 2]);
    let w = NodeWeights::compute(&sn, &vn);
    let map = solve_lp_n(&aug, &w, None).unwrap();
    let by_enum = [[0usize, 2], [1, 0]]
        .into_iter()
        .min_by(|a, b| {
            let c = |m: &[usize; 2]| w.w_virtual[0] / w.w_substrate[m[0]] + w.w_virtual[1] / w.w_substrate[m[1]];
            c(a).partial_cmp(&c(b)).unwrap().then(a.cmp(b))
        })
        .unwrap();
    let c = |m: &[usize]| w.w_virtual[0] / w.w_substrate[m[0]] + w.w_virtual[1] / w.w_substrate[m[1]];
    assert_eq!(c(&map), c(&by_enum));
    assert_eq!(map, vec![1, 0]);
}

#[test]
fn dijkstra_matches_simple_path_enumeration() {
    let mut r = rng(14, 0);
    use rand::Rng;
    for _ in 0..60 {
        let sn = fixtures::random_substrate(10, &mut r);
        let costs: Vec<f64> = (0..sn.link_count()).map(|_| r.random_range(0.1..5.0)).collect();
        let s = r.random_range(0..10);
        let t = (s + r.random_range(1..10)) % 10;
        let demand = r.random_range(1..=20);
        let all = fixtures::simple_paths(&sn, s, t, demand);
        let best = all.iter().map(|p| path_cost(p, &costs)).fold(f64::INFINITY, f64::min);
        match dijkstra_capacitated(&sn, s, t, demand, &costs) {
            None => assert!(all.is_empty()),
            Some((p, c)) => {
                assert!((c - best).abs() <= 1e-9 * best.max(1.0), "{c} vs {best}");
                assert!((path_cost(&p, &costs) - c).abs() <= 1e-12 * c.max(1.0));
                assert!(p.links().iter().all(|&l| sn.residual_bw(l) >= demand));
            }
        }
    }
}

#[test]
fn dijkstra_prefers_direct_link_on_ties() {
    let sn = running_substrate();
    let costs = vec![1.0; sn.link_count()];
    let (p, c) = dijkstra_capacitated(&sn, A, B, 10, &costs).unwrap();
    assert_eq!((p.nodes(), c), (&[A, B][..], 1.0));
    assert_eq!(dijkstra_capacitated(&sn, A, D, 55, &costs).unwrap().0.nodes(), &[A, B, D]);
    assert!(dijkstra_capacitated(&sn, A, D, 65, &costs).is_none());
    assert!(dijkstra_capacitated(&sn, A, E, 100, &costs).is_none());
}

/// Instances with their initial pool and master program.
fn restricted_instances(
    seed: u64,
    count: usize,
    mut f: impl FnMut(&vnembed::model::AugmentedNetwork, &[AugPath], &PrimalModel),
) {
    let mut r = rng(seed, 0);
    let mut done = 0;
    while done < count {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let Ok(init) = init_sol(&aug, None) else { continue };
        let mut pool = init.pool;
        let pm = build_primal(&aug, &pool).unwrap();
        // Widen the pool once so degenerate single-path programs are not the only case.
        if let Ok(p) = solve_dual(&aug, &pool, &pm, None) {
            pool.extend(price_paths(&aug, &p, &pool));
        }
        let pm = build_primal(&aug, &pool).unwrap();
        f(&aug, &pool, &pm);
        done += 1;
    }
}

#[test]
fn dual_routes_agree() {
    restricted_instances(15, 60, |aug, pool, pm| {
        let primal = vnembed::milp::solve_lp(&relaxation(pm)).unwrap();
        let explicit = solve_dual(aug, pool, pm, None).unwrap();
        let read_off = duals_from_primal(aug, pool, pm, None).unwrap();
        let tol = 1e-6 * primal.objective.abs().max(1.0);
        assert!((primal.objective - explicit.objective).abs() <= tol, "strong duality");
        assert!((read_off.objective - explicit.objective).abs() <= tol);
        for prices in [&explicit, &read_off] {
            let (obj, worst) = dual_feasibility(aug, pool, pm, prices);
            assert!(worst <= 1e-7, "dual violation {worst}");
            assert!((obj - explicit.objective).abs() <= tol);
            let nonneg = prices.eta.iter().chain(&prices.gamma).chain(&prices.sigma_path).chain(&prices.tau_path);
            assert!(nonneg.into_iter().all(|&v| v >= -1e-9));
        }
    });
}

#[test]
fn pool_columns_price_out_and_priced_lengths_are_exact() {
    restricted_instances(16, 40, |aug, pool, pm| {
        let prices = solve_dual(aug, pool, pm, None).unwrap();
        // Each pool column satisfies its dual constraint.
        for (k, p) in pool.iter().enumerate() {
            let g: f64 = p.path.links().iter().map(|&l| prices.gamma[l]).sum();
            let inv: f64 = p.path.links().iter().map(|&l| 1.0 / aug.base.residual_bw(l) as f64).sum();
            let lhs = prices.mu[p.virtual_link] - g - prices.sigma_path[k] - prices.tau_path[k];
            assert!(lhs <= inv + 1e-7, "column {k}: {lhs} > {inv}");
        }
        // Each priced path is the shortest for its combination and its length is the
        // reduced cost plus mu.
        for k in 0..aug.vn.links().len() {
            let vl = aug.vn.links()[k];
            let costs: Vec<f64> = (0..aug.base.link_count())
                .map(|l| prices.gamma[l] + 1.0 / aug.base.residual_bw(l).max(1) as f64)
                .collect();
            for c in price_combinations(aug, k, &prices, true) {
                let all = fixtures::simple_paths(aug.base, c.u, c.v, vl.bw);
                let Some((p, len)) = c.path else {
                    assert!(all.is_empty());
                    continue;
                };
                let best = all.iter().map(|q| path_cost(q, &costs)).fold(f64::INFINITY, f64::min);
                let ends = len - path_cost(&p, &costs);
                assert!((len - ends - best).abs() <= 1e-9 * best.max(1.0));
                let ap = AugPath { virtual_link: k, path: p };
                let rc = reduced_cost(aug, &prices, &ap);
                assert!((rc + prices.mu[k] - len).abs() <= 1e-9 * len.abs().max(1.0));
                if (prices.mu[k] - len).abs() > 1e-9 {
                    assert_eq!(rc < 0.0, prices.mu[k] > len);
                }
            }
        }
    });
}

#[test]
fn tightened_master_keeps_the_integer_optimum() {
    restricted_instances(19, 60, |aug, pool, pm| {
        let plain = solve_bip(&pm.model, &BipOptions::default()).unwrap();
        let tight = solve_bip(&master::tightened(pm, aug, pool), &BipOptions::default()).unwrap();
        assert_eq!(plain.status, tight.status);
        if plain.status == Status::Optimal {
            assert!((plain.objective - tight.objective).abs() <= 1e-7 * plain.objective.abs().max(1.0));
            let lp_plain = vnembed::milp::solve_lp(&pm.model.relaxed()).unwrap().objective;
            let lp_tight = vnembed::milp::solve_lp(&master::tightened(pm, aug, pool).relaxed()).unwrap().objective;
            assert!(lp_tight >= lp_plain - 1e-7 * lp_plain.abs().max(1.0));
        }
    });
}

#[test]
fn enlarged_pool_never_worsens_the_master() {
    let mut r = rng(17, 0);
    let mut checked = 0;
    while checked < 60 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let Ok(init) = init_sol(&aug, None) else { continue };
        let pm = build_primal(&aug, &init.pool).unwrap();
        let base = solve_restricted_primal(&pm, &aug, &init.pool, None).unwrap().embedding.objective;
        for iterations in 1..=2 {
            let e = final_sol(&sn, &vn, &PathGenOptions { iterations, ..Default::default() }).result.unwrap();
            assert!(e.objective <= base + 1e-9, "{} > {base}", e.objective);
        }
        checked += 1;
    }
}

#[test]
fn final_sol_is_deterministic() {
    let mut r = rng(18, 0);
    for _ in 0..20 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let a = final_sol(&sn, &vn, &PathGenOptions::default()).result;
        let b = final_sol(&sn, &vn, &PathGenOptions::default()).result;
        assert_eq!(a, b);
    }
}

#[test]
fn aug_paths_respect_residuals_at_creation() {
    restricted_instances(19, 40, |aug, pool, _| {
        for p in pool {
            let d = aug.vn.links()[p.virtual_link].bw;
            assert!(p.path.links().iter().all(|&l| aug.base.residual_bw(l) >= d));
            assert!(aug.is_candidate(aug.vn.links()[p.virtual_link].i, p.path.source()));
            assert!(aug.is_candidate(aug.vn.links()[p.virtual_link].j, p.path.target()));
        }
    });
}

proptest! {
    #[test]
    fn weights_scale_linearly(d in prop::collection::vec(1u32..1000, 1..6), c in 1u32..50) {
        let w = weighted_average(d.iter().copied()).unwrap();
        let ws = weighted_average(d.iter().map(|&x| x * c)).unwrap();
        prop_assert!((ws - c as f64 * w).abs() <= 1e-12 * ws);
        // Same identity in exact integer arithmetic: sum (cd)^2 * sum d == c * sum d^2 * sum cd.
        let sq: u128 = d.iter().map(|&x| (x as u128).pow(2)).sum();
        let s: u128 = d.iter().map(|&x| x as u128).sum();
        let c = c as u128;
        prop_assert_eq!(c * c * sq * s, c * sq * (c * s));
    }

    #[test]
    fn uniform_weights_are_the_value(v in 1u32..10_000, n in 1usize..8) {
        prop_assert_eq!(weighted_average(std::iter::repeat_n(v, n)), Some(v as f64));
    }
}
