mod common;

use rand::Rng;
use rpl_core::geometry::{Angle, PlaneHeight};
use rpl_core::multiplicity::{build_index, m_pi, m_pi_restricted, Band};

use common::OracleBand;

#[test]
fn tube_masses_match_double_loop() {
    let t = PlaneHeight::standard();
    for (round, n) in [1000usize, 3000].into_iter().enumerate() {
        let mu = common::random_measure(n, 40 + round as u64);
        let mut r = common::rng(7 + round as u64);
        for cfg in 0..120 {
            let delta = 10f64.powf(r.random_range(-3.0..-0.7));
            let index = build_index(&mu, if cfg % 2 == 0 { 2.0 * delta } else { 0.05 }).unwrap();
            let theta = Angle::new(r.random_range(0.0..std::f64::consts::TAU));
            let z = if cfg % 3 == 0 {
                common::region_point(&mut r)
            } else {
                mu.points()[r.random_range(0..n)]
            };
            let fast = m_pi(&mu, &index, t, theta, &z, delta).unwrap();
            assert_eq!(fast, common::m_pi(&mu, t, theta, &z, delta), "config {cfg}");

            let tau = 0.5f64.powi(r.random_range(0..8));
            for (band, ob) in [
                (Band::Annulus(tau), OracleBand::Annulus(tau)),
                (Band::Ball(tau), OracleBand::Ball(tau)),
                (Band::TangencyOnly, OracleBand::TangencyOnly),
            ] {
                let fast = m_pi_restricted(&mu, &index, t, theta, &z, delta, band).unwrap();
                assert_eq!(fast, common::m_pi_restricted(&mu, t, theta, &z, delta, ob), "{band:?}");
            }
        }
    }
}

#[test]
fn other_heights_match_double_loop() {
    let mu = common::random_measure(2000, 5);
    let mut r = common::rng(99);
    for _ in 0..60 {
        let t = PlaneHeight::new(r.random_range(-0.95..0.95)).unwrap();
        let delta = 10f64.powf(r.random_range(-2.5..-1.0));
        let index = build_index(&mu, 2.0 * delta).unwrap();
        let theta = Angle::new(r.random_range(0.0..6.3));
        let z = mu.points()[r.random_range(0..mu.len())];
        assert_eq!(
            m_pi(&mu, &index, t, theta, &z, delta).unwrap(),
            common::m_pi(&mu, t, theta, &z, delta)
        );
    }
}

#[test]
fn tangency_only_restriction_is_the_whole_tube() {
    let t = PlaneHeight::standard();
    let mu = common::random_measure(3000, 11);
    let mut r = common::rng(12);
    for _ in 0..200 {
        let delta = 10f64.powf(r.random_range(-3.0..-0.5));
        let index = build_index(&mu, 2.0 * delta).unwrap();
        let theta = Angle::new(r.random_range(0.0..6.3));
        let z = mu.points()[r.random_range(0..mu.len())];
        let full = m_pi(&mu, &index, t, theta, &z, delta).unwrap();
        let tang = m_pi_restricted(&mu, &index, t, theta, &z, delta, Band::TangencyOnly).unwrap();
        assert_eq!(full, tang);
    }
}

#[test]
fn ordering_monotonicity_and_covering() {
    let t = PlaneHeight::standard();
    let mu = common::random_measure(2000, 21);
    let mut r = common::rng(22);
    for _ in 0..60 {
        let delta = 0.5f64.powi(r.random_range(4..9));
        let index = build_index(&mu, 2.0 * delta).unwrap();
        let theta = Angle::new(r.random_range(0.0..6.3));
        let i = r.random_range(0..mu.len());
        let z = mu.points()[i];
        let full = m_pi(&mu, &index, t, theta, &z, delta).unwrap();
        assert!(full >= mu.weights()[i]);
        assert!(m_pi(&mu, &index, t, theta, &z, 2.0 * delta).unwrap() >= full);

        let mut annuli = 0.0;
        let mut tau = 1.0;
        while tau >= delta {
            let a = m_pi_restricted(&mu, &index, t, theta, &z, delta, Band::Annulus(tau)).unwrap();
            let b = m_pi_restricted(&mu, &index, t, theta, &z, delta, Band::Ball(tau)).unwrap();
            assert!(a <= full && b <= full);
            annuli += a;
            tau *= 0.5;
        }
        let finest = tau * 2.0;
        let near = common::ball(&mu, &z, 2.0 * finest)
            .iter()
            .map(|&j| mu.weights()[j as usize])
            .sum::<f64>();
        assert!(annuli + near >= full * (1.0 - 1e-12), "{annuli} + {near} < {full}");
    }
}

#[test]
fn wide_tube_swallows_everything() {
    let mu = common::random_measure(500, 3);
    let index = build_index(&mu, 0.1).unwrap();
    let z = mu.points()[0];
    for th in [0.0, 1.0, 4.0] {
        let m = m_pi(&mu, &index, PlaneHeight::new(0.3).unwrap(), Angle::new(th), &z, 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empty_band_has_no_mass() {
    let mu = common::random_measure(200, 8);
    let index = build_index(&mu, 0.1).unwrap();
    let z = mu.points()[0];
    let t = PlaneHeight::standard();
    // no two points of the standard region are a unit apart
    let m = m_pi_restricted(&mu, &index, t, Angle::new(0.4), &z, 0.5, Band::Annulus(1.0)).unwrap();
    assert_eq!(m, 0.0);
    assert!(m_pi_restricted(&mu, &index, t, Angle::new(0.4), &z, 0.5, Band::Annulus(0.3)).is_err());
}
