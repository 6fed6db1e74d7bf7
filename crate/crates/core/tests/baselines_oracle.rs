use vnembed::baselines::{build_link_flow, gnmsp, host_rank, vine_opt};
use vnembed::fixtures::{self, exhaustive_optimum, simple_paths};
use vnembed::model::{
    build_augmented, SubstrateLink, SubstrateNetwork, SubstrateNode, VirtualLink, VirtualNode, VnRequest,
};
use vnembed::pathgen::{build_primal, final_sol, solve_restricted_primal, AugPath, PathGenOptions};
use vnembed::topogen::rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn vine_opt_matches_enumeration() {
    let mut r = rng(21, 0);
    let mut feasible = 0;
    for _ in 0..100 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let oracle = exhaustive_optimum(&sn, &vn);
        let got = vine_opt(&sn, &vn, None).result;
        match (oracle, got) {
            (None, Err(_)) => {}
            (Some(o), Ok(e)) => {
                feasible += 1;
                e.validate(&sn, &vn).unwrap();
                sn.clone().allocate(&vn, &e).unwrap();
                assert!(close(e.objective, o.objective), "{} vs {}", e.objective, o.objective);
                if let Ok(p) = final_sol(&sn, &vn, &PathGenOptions::default()).result {
                    assert!(p.objective >= e.objective - 1e-9);
                }
            }
            (o, g) => panic!("oracle {o:?} vs vine_opt {g:?}"),
        }
    }
    assert!(feasible >= 30, "only {feasible} feasible instances");
}

#[test]
fn full_pool_master_equals_vine_opt() {
    let mut r = rng(22, 0);
    let mut checked = 0;
    while checked < 40 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let Ok(opt) = vine_opt(&sn, &vn, None).result else { continue };
        let mut pool = Vec::new();
        for (k, vl) in vn.links().iter().enumerate() {
            for &u in aug.candidates(vl.i) {
                for &v in aug.candidates(vl.j) {
                    if u != v {
                        pool.extend(
                            simple_paths(&sn, u, v, vl.bw).into_iter().map(|path| AugPath { virtual_link: k, path }),
                        );
                    }
                }
            }
        }
        let pm = build_primal(&aug, &pool).unwrap();
        let e = solve_restricted_primal(&pm, &aug, &pool, None).unwrap().embedding;
        assert!(close(e.objective, opt.objective));
        checked += 1;
    }
}

#[test]
fn link_flow_variable_count() {
    let mut r = rng(23, 0);
    let mut checked = 0;
    while checked < 20 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        let Ok(aug) = build_augmented(&sn, &vn) else { continue };
        let lf = build_link_flow(&aug);
        let chi: usize = (0..vn.nodes().len()).map(|i| aug.candidates(i).len()).sum();
        let arcs: usize =
            vn.links().iter().map(|vl| 2 * (0..sn.link_count()).filter(|&l| sn.residual_bw(l) >= vl.bw).count()).sum();
        let meta: usize = vn.links().iter().map(|vl| aug.candidates(vl.i).len() + aug.candidates(vl.j).len()).sum();
        assert_eq!(lf.model.var_count(), chi + arcs + meta);
        checked += 1;
    }
}

fn line(bws: &[u32], cpus: &[u32]) -> SubstrateNetwork {
    let nodes = cpus.iter().enumerate().map(|(k, &cpu)| SubstrateNode { cpu, x: 10.0 * k as f64, y: 0.0 }).collect();
    let links = bws.iter().enumerate().map(|(k, &bw)| SubstrateLink { u: k, v: k + 1, bw }).collect();
    SubstrateNetwork::new(nodes, links).unwrap()
}

fn pair(xi: f64, xj: f64, dev: f64, bw: u32) -> VnRequest {
    let node = |x| VirtualNode { cpu: 2, x, y: 0.0, dev };
    VnRequest::new(0, vec![node(xi), node(xj)], vec![VirtualLink { i: 0, j: 1, bw }], 0.0, 1.0).unwrap()
}

#[test]
fn forced_instances() {
    // Ends only fit at nodes 0 and 3 of a path.
    let sn = line(&[20, 20, 20], &[10, 10, 10, 10]);
    let vn = pair(0.0, 30.0, 1.0, 5);
    for e in [
        vine_opt(&sn, &vn, None).result.unwrap(),
        gnmsp(&sn, &vn).result.unwrap(),
        final_sol(&sn, &vn, &PathGenOptions::default()).result.unwrap(),
    ] {
        assert_eq!(e.node_map, vec![0, 3]);
        assert_eq!(e.link_map[0].nodes(), &[0, 1, 2, 3]);
    }
    let tight = pair(0.0, 30.0, 1.0, 25);
    assert!(vine_opt(&sn, &tight, None).result.is_err());
    assert!(gnmsp(&sn, &tight).result.is_err());
}

#[test]
fn gnmsp_prefers_dominant_candidate() {
    // Node 1 and node 3 are both candidates for the second virtual node; node 3 has
    // more CPU and more incident bandwidth.
    let nodes = vec![
        SubstrateNode { cpu: 10, x: 0.0, y: 0.0 },
        SubstrateNode { cpu: 10, x: 10.0, y: 0.0 },
        SubstrateNode { cpu: 10, x: 50.0, y: 0.0 },
        SubstrateNode { cpu: 40, x: 10.0, y: 1.0 },
    ];
    let links = vec![
        SubstrateLink { u: 0, v: 1, bw: 20 },
        SubstrateLink { u: 0, v: 3, bw: 50 },
        SubstrateLink { u: 1, v: 2, bw: 10 },
    ];
    let sn = SubstrateNetwork::new(nodes, links).unwrap();
    assert!(host_rank(&sn, 3) > host_rank(&sn, 1));
    let vn = pair(0.0, 10.0, 2.0, 5);
    let e = gnmsp(&sn, &vn).result.unwrap();
    assert_eq!(e.node_map, vec![0, 3]);
    e.validate(&sn, &vn).unwrap();
}

#[test]
fn baselines_produce_allocatable_embeddings() {
    let mut r = rng(24, 0);
    for _ in 0..100 {
        let (sn, vn) = fixtures::random_tiny_instance(&mut r);
        for e in [vine_opt(&sn, &vn, None).result, gnmsp(&sn, &vn).result].into_iter().flatten() {
            e.validate(&sn, &vn).unwrap();
            let mut s = sn.clone();
            s.allocate(&vn, &e).unwrap();
            s.release(&vn, &e).unwrap();
            assert_eq!(s.residual_bw_table(), sn.residual_bw_table());
        }
    }
}
