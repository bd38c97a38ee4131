mod common;

use approx::assert_relative_eq;
use veriflow::adversary::{
    craft_stealth_attack, message_rng, perturb_outgoing_state, stealth_certificate,
    stealth_feasibility, AttackSpec, AttackStrategy,
};
use veriflow::linalg::l2_norm;
use veriflow::partition::view_of;

#[test]
fn stealth_room_per_interface_matches_the_feeder_structure() {
    let (_net, _space, _assignment, views, graph) = common::feeder_setup();
    for (i, j) in graph.edges() {
        let vi = view_of(&views, i).unwrap();
        let vj = view_of(&views, j).unwrap();
        let expected = if (i, j) == (1, 2) { 10 } else { 5 };
        assert_eq!(
            stealth_feasibility(vi, j).unwrap().dim(),
            expected,
            "interface {i}->{j}"
        );
        assert_eq!(
            stealth_feasibility(vj, i).unwrap().dim(),
            expected,
            "interface {j}->{i}"
        );
    }
}

#[test]
fn crafted_attacks_pass_their_certificates_on_every_interface() {
    let (_net, _space, _assignment, views, graph) = common::feeder_setup();
    for (i, j) in graph.edges() {
        for (src, dst) in [(i, j), (j, i)] {
            let view = view_of(&views, src).unwrap();
            let mut rng = message_rng(11, "stealth-fdi", 1, src, dst, 0);
            let a = craft_stealth_attack(view, dst, 0.5, &mut rng)
                .unwrap()
                .expect("every feeder interface has stealth room");
            let len = view.shared_with(dst).unwrap().len();
            assert_relative_eq!(l2_norm(&a), 0.5 * (len as f64).sqrt(), epsilon = 1e-12);
            let cert = stealth_certificate(view, dst, &a).unwrap();
            assert!(cert < 1e-8, "{src}->{dst} certificate {cert:.3e}");
        }
    }
}

#[test]
fn random_state_attack_norm_scales_with_the_interface_size() {
    let (_net, _space, _assignment, views, _graph) = common::feeder_setup();
    let spec = AttackSpec {
        attacker: 1,
        strategy: AttackStrategy::RandomState {
            rho: 0.5,
            start_round: 1,
        },
        targets: None,
        seed: 11,
    };
    let view = view_of(&views, 1).unwrap();
    let wide = view.shared_with(2).unwrap().len();
    let narrow = view.shared_with(4).unwrap().len();
    assert_eq!((wide, narrow), (20, 10));
    for (dst, len) in [(2, wide), (4, narrow)] {
        let mut msg = vec![vec![0.0; len]];
        let norms = perturb_outgoing_state(&spec, view, 1, dst, &[0], &mut msg).unwrap();
        assert_relative_eq!(norms[0], 0.5 * (len as f64).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(l2_norm(&msg[0]), norms[0], epsilon = 1e-12);
    }
}
