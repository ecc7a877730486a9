use proptest::prelude::*;
use qkdlab_core::analysis::{fidelity, project_simplex, DensityMatrix1Q, PauliExpectations};
use qkdlab_core::histogram::sample_counts;
use qkdlab_core::protocol::{run_session, sift_bb84, BasisSpec, KeyMode, Protocol, SessionConfig};
use qkdlab_core::qasm::{emit, parse};
use qkdlab_core::{Circuit, Exec, GateKind, GateOp, RngSeed, StateVector};

fn gate_kind() -> impl Strategy<Value = GateKind> {
    prop_oneof![
        Just(GateKind::X),
        Just(GateKind::Y),
        Just(GateKind::Z),
        Just(GateKind::H),
        Just(GateKind::S),
        Just(GateKind::Sdg),
        Just(GateKind::T),
        Just(GateKind::Tdg),
        (-7.0f64..7.0).prop_map(GateKind::P),
    ]
}

fn circuit(max_qubits: usize) -> impl Strategy<Value = Circuit> {
    (1..=max_qubits).prop_flat_map(|n| {
        let op = (gate_kind(), 0..n, proptest::option::of(0..n)).prop_map(move |(k, t, c)| match c {
            Some(c) if c != t && matches!(k, GateKind::X | GateKind::Y | GateKind::Z) => {
                GateOp::controlled(k, c, t).unwrap()
            }
            _ => GateOp::new(k, t),
        });
        (Just(n), proptest::collection::vec(op, 0..30), proptest::collection::vec(any::<bool>(), n))
    })
    .prop_map(|(n, ops, measured)| {
        let mut c = Circuit::new(n).unwrap();
        c.extend(ops).unwrap();
        for (q, m) in measured.into_iter().enumerate() {
            if m {
                c.measure(q).unwrap();
            }
        }
        c
    })
}

fn basis() -> impl Strategy<Value = BasisSpec> {
    prop_oneof![
        Just(BasisSpec::Z),
        Just(BasisSpec::X),
        Just(BasisSpec::Y),
        Just(BasisSpec::HT),
        Just(BasisSpec::HZ),
    ]
}

fn bloch() -> impl Strategy<Value = DensityMatrix1Q> {
    (0.0f64..=1.0, -1.0f64..=1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, z, phi)| {
        let s = (1.0 - z * z).sqrt();
        DensityMatrix1Q::from_bloch(PauliExpectations::new(r * s * phi.cos(), r * s * phi.sin(), r * z))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_the_norm(c in circuit(6)) {
        let mut s = StateVector::new(c.n_qubits()).unwrap();
        s.apply_all(c.gates()).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn qasm_roundtrip(c in circuit(8)) {
        let text = emit(&c);
        prop_assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn sampling_conserves_shots(c in circuit(5), shots in 1u64..5000, seed in any::<u64>()) {
        let mut s = StateVector::new(c.n_qubits()).unwrap();
        s.apply_all(c.gates()).unwrap();
        let probs = s.probabilities();
        let a = sample_counts(&probs, c.n_qubits(), shots, RngSeed(seed), Exec::Sequential).unwrap();
        let b = sample_counts(&probs, c.n_qubits(), shots, RngSeed(seed), Exec::Parallel).unwrap();
        prop_assert_eq!(a.shots(), shots);
        prop_assert_eq!(&a, &b);
        for (&k, _) in a.counts() {
            prop_assert!(probs[k] > 0.0);
        }
    }

    #[test]
    fn sifting_keeps_exactly_the_matching_positions(pairs in proptest::collection::vec((basis(), basis()), 1..40)) {
        let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let s = sift_bb84(&a, &b).unwrap();
        let want: Vec<usize> = (0..a.len()).filter(|&i| a[i].same_as(&b[i])).collect();
        prop_assert_eq!(s.accepted, want);
    }

    #[test]
    fn session_invariants(n in 1usize..120, seed in any::<u64>(), frac in 0.0f64..0.9, four in any::<bool>()) {
        let mut cfg = SessionConfig::new(if four { Protocol::Bb84Four } else { Protocol::Bb84Two });
        cfg.n_bits = Some(n);
        cfg.mode = Some(KeyMode::SingleShot);
        cfg.check_fraction = frac;
        cfg.seed = RngSeed(seed);
        let r = run_session(&cfg).unwrap();
        prop_assert_eq!(r.alice_key.len(), r.bob_key.len());
        prop_assert_eq!(r.alice_key.len(), r.accepted.len());
        prop_assert_eq!(&r.alice_key, &r.bob_key);
        prop_assert_eq!(r.final_key_alice.len(), r.accepted.len() - r.check_indices.len());
        prop_assert_eq!(r.check_indices.len(), (frac * r.accepted.len() as f64).ceil() as usize);
        prop_assert!(r.check_indices.iter().all(|i| r.accepted.contains(i)));
        if let Some(q) = r.check_qber {
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }

    #[test]
    fn simplex_projection_lands_on_the_simplex(v in proptest::collection::vec(-3.0f64..3.0, 1..20)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(project_simplex(&p).len(), p.len());
        let again = project_simplex(&p);
        prop_assert!(again.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn fidelity_bounds_and_symmetry(a in bloch(), b in bloch()) {
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-12);
    }
}
