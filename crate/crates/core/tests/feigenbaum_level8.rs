use std::sync::OnceLock;

use ahpl_core::ahpl::*;
use ahpl_core::extension::{extend, Polynomial};
use ahpl_core::puzzles::*;
use ahpl_core::unimodal::*;
use num_complex::Complex64 as C64;

struct Fixture {
    f: UnimodalMap,
    tower: RenormalizationTower,
    g: AHPLMap<UnimodalMap>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let a = feigenbaum_parameter(2, 1e-12).unwrap();
        let f = UnimodalMap::quadratic(a);
        let tower = build_tower(&f, 12, TowerOptions::default()).unwrap();
        let g = build_domains(&extend(f, 3).unwrap(), Some(f.into()), &tower, 8, 2, &DomainOptions::default()).unwrap();
        Fixture { f, tower, g }
    })
}

#[test]
fn domains_have_degree_two_and_positive_modulus() {
    let g = &fixture().g;
    assert_eq!(g.winding, 2);
    assert!(g.modulus_estimate() >= 0.05, "{:?}", g.modulus_bounds);
    assert!(g.symmetry_residual < 1e-8);
    assert!(g.u_curve.iter().all(|z| g.in_v(*z)));
}

#[test]
fn periodic_points_up_to_period_four_are_expanding() {
    let Fixture { tower, g, .. } = fixture();
    let real = real_seeds(tower, 8, 2, g.c_v).unwrap();
    let grid = grid_seeds(g.c_v, 64, &real);
    let mut counts = Vec::new();
    for p in 1..=4 {
        let mut seeds = grid.clone();
        seeds.extend(g.branch_seeds(p, 30));
        let rep = g.find_periodic(p, &seeds).unwrap();
        assert!(rep.points.iter().all(|q| q.classification == Classification::Expanding));
        assert!(rep.points.iter().all(|q| q.residual < 1e-10 * g.c_v));
        counts.push(rep.points.len());
    }
    // 2^p points of period dividing p: the degree-2 count with no attracting cycle.
    assert_eq!(counts, vec![2, 4, 8, 16]);
}

#[test]
fn expansion_corpus_has_positive_floor_and_growing_tails() {
    let Fixture { tower, g, .. } = fixture();
    let beta = (beta_fixed_point(tower, 8).unwrap().0 / g.lambda).abs();
    let corpus = g.expansion_corpus(beta, 64, 24, 7).unwrap();
    assert_eq!(corpus.len(), 64);
    for r in &corpus {
        assert!(r.eta_hat > 0.0);
        assert!(r.tail_increasing, "{:?}", r.ratios);
    }
}

#[test]
fn equipotential_increments_shrink_geometrically() {
    let g = &fixture().g;
    let nest = equipotential_nest(g, C64::new(0.0, 0.0), 7, 1024).unwrap();
    assert!(nest.euclid_diam.windows(2).all(|w| w[1] <= w[0]));
    let ratios = nest.increment_ratios();
    assert!(ratios.len() >= 6);
    assert!(ratios.iter().all(|r| *r < 0.7), "{ratios:?}");
}

#[test]
fn pieces_shrink_at_precritical_points() {
    let Fixture { tower, g, .. } = fixture();
    let rep = shrinking_diagnostic(g, tower, 64, 4, 96, 11).unwrap();
    assert_eq!(rep.samples.len(), 64);
    assert!(rep.max_ratio() < 0.95, "{}", rep.max_ratio());
    assert!(rep.samples.iter().all(|s| s.z.im.abs() > 0.0));
}

#[test]
fn real_trace_is_conjugate_to_the_polynomial() {
    let Fixture { f, g, .. } = fixture();
    let poly: Polynomial = (*f).into();
    assert_eq!(conjugacy_evidence(g, &poly, 2048).unwrap().first_disagreement, None);
    let off: Polynomial = UnimodalMap::quadratic(f.a + 1e-3).into();
    assert!(conjugacy_evidence(g, &off, 2048).unwrap().first_disagreement.is_some());
}

#[test]
fn escape_field_is_nested_and_interior_vanishes() {
    let g = &fixture().g;
    let coarse = filled_julia(g, Grid::covering(g.c_v, 129, 129), 16);
    let deeper = filled_julia(g, Grid::covering(g.c_v, 129, 129), 32);
    assert!(coarse.times.iter().zip(&deeper.times).all(|(a, b)| *a == 16 || a == b));
    let fine = filled_julia(g, Grid::covering(g.c_v, 257, 257), 32);
    let finer = filled_julia(g, Grid::covering(g.c_v, 513, 513), 64);
    let fr = [coarse.interior_fraction(), fine.interior_fraction(), finer.interior_fraction()];
    assert!(fr[0] > fr[1] && fr[1] > fr[2], "{fr:?}");
}

#[test]
fn beta_is_repelling_at_every_level() {
    let tower = &fixture().tower;
    for n in 0..=10 {
        let (_, mult) = beta_fixed_point(tower, n).unwrap();
        assert!(mult > 1.0, "level {n}: {mult}");
    }
}
