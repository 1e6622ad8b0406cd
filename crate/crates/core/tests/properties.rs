use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;

use meminv::circuit::{
    build_inversion_circuit, clamp_instance, export_netlist, import_netlist, reg, Level, Netlist,
};
use meminv::embedding::{oracle_divide, EmbeddedInstance, EmbeddingLayout};
use meminv::linear::build_signed_product;
use meminv::verify::brute_force_sat;

fn instance(a: u64, c: u64, n: usize, n_b: usize) -> EmbeddedInstance {
    EmbeddedInstance::from_ints(a, c, EmbeddingLayout::new(n, n_b)).unwrap()
}

/// `(b, b_f, c_f)` of every satisfying assignment.
fn solutions(net: &Netlist) -> BTreeSet<(BigUint, BigUint, BigUint)> {
    brute_force_sat(net)
        .unwrap()
        .iter()
        .map(|s| {
            let bits = s.expand(net);
            assert!(net.is_consistent(&bits));
            (
                net.read_register(reg::B, &bits).unwrap(),
                net.read_register(reg::B_F, &bits).unwrap(),
                net.read_register(reg::C_F, &bits).unwrap(),
            )
        })
        .collect()
}

fn operands() -> impl Strategy<Value = (usize, usize, u64, u64)> {
    (2usize..=4)
        .prop_flat_map(|n| (Just(n), 0..=n, 1..(1u64 << n), 1..(1u64 << n)))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn oracle_satisfies_identity((n, n_b, a, c) in operands()) {
        let inst = instance(a, c, n, n_b);
        match oracle_divide(&inst) {
            Ok(sol) => {
                let a_int = BigUint::from(a);
                prop_assert_eq!(&a_int * &sol.b_hat, inst.dividend() + &sol.c_f);
                prop_assert!(sol.c_f < a_int);
                prop_assert!(sol.c_f.bits() as usize <= n_b);
                prop_assert!(sol.b_hat.bits() as usize <= n + n_b);
            }
            // only possible when the minimal slack needs more than n_b bits
            Err(_) => prop_assert!(n_b < n),
        }
    }

    #[test]
    fn netlist_text_round_trips((n, n_b, a, c) in operands()) {
        let layout = EmbeddingLayout::new(n, n_b);
        let net = clamp_instance(&build_inversion_circuit(layout).unwrap(), &instance(a, c, n, n_b)).unwrap();
        let text = export_netlist(&net);
        let back = import_netlist(&text).unwrap();
        prop_assert_eq!(export_netlist(&back), text);
        prop_assert_eq!(back.gates(), net.gates());
        prop_assert_eq!(back.clamps(), net.clamps());
        prop_assert_eq!(back.registers(), net.registers());
    }

    #[test]
    fn simplify_keeps_register_solutions((n, n_b, a, c) in operands().prop_filter("small", |o| o.0 <= 3)) {
        let layout = EmbeddingLayout::new(n, n_b);
        let net = clamp_instance(&build_inversion_circuit(layout).unwrap(), &instance(a, c, n, n_b)).unwrap();
        let before = solutions(&net);
        let mut simple = net.clone();
        match simple.simplify() {
            Ok(_) => {
                prop_assert!(simple.gates().len() <= net.gates().len());
                prop_assert_eq!(solutions(&simple), before);
            }
            Err(_) => prop_assert!(before.is_empty()),
        }
    }

    #[test]
    fn signed_product_matches_integers(
        a in -7i64..=7,
        x in -7i64..=7,
        width in 6usize..=8,
    ) {
        let mut net = Netlist::new();
        let zero = net.add_node();
        net.clamp(zero, Level::Low).unwrap();
        let a_mag = net.add_nodes(3);
        let x_mag = net.add_nodes(3);
        let (a_sign, x_sign) = (net.add_node(), net.add_node());
        let word = build_signed_product(&mut net, &a_mag, a_sign, &x_mag, x_sign, width, zero).unwrap();
        net.clamp_bits(&a_mag, &BigUint::from(a.unsigned_abs())).unwrap();
        net.clamp_bits(&x_mag, &BigUint::from(x.unsigned_abs())).unwrap();
        net.clamp(a_sign, Level::from_bool(a < 0)).unwrap();
        net.clamp(x_sign, Level::from_bool(x < 0)).unwrap();
        net.set_register("p", word).unwrap();

        let sols = brute_force_sat(&net).unwrap();
        prop_assert_eq!(sols.len(), 1);
        let bits = sols[0].expand(&net);
        let p = net.read_register("p", &bits).unwrap();
        let expected = (a * x).rem_euclid(1 << width) as u64;
        prop_assert_eq!(p, BigUint::from(expected));
    }

    #[test]
    fn propagation_keeps_solutions((n, n_b, a, c) in operands().prop_filter("small", |o| o.0 <= 3)) {
        let layout = EmbeddingLayout::new(n, n_b);
        let net = clamp_instance(&build_inversion_circuit(layout).unwrap(), &instance(a, c, n, n_b)).unwrap();
        let mut propagated = net.clone();
        match propagated.propagate_clamps() {
            Ok(_) => prop_assert_eq!(solutions(&propagated), solutions(&net)),
            Err(_) => prop_assert!(solutions(&net).is_empty()),
        }
    }
}
