mod common;

use lexrl::alphabet::Alphabet;
use lexrl::automata::{parse_hoa, SafetyAutomaton};
use lexrl::fixtures;
use lexrl::learn::*;
use lexrl::oracle::*;
use lexrl::product::{build_product, ProductMdp, ProductPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn example1_product() -> ProductMdp {
    let ab = Alphabet::new(["b"]).unwrap();
    build_product(
        &fixtures::example1(0.99),
        &SafetyAutomaton::trivial(ab),
        &parse_hoa(fixtures::INF_B_DET_HOA).unwrap(),
    )
    .unwrap()
}

fn toy() -> ProductMdp {
    build_product(
        &fixtures::toy_mdp(),
        &fixtures::toy_safety(),
        &fixtures::toy_ldba(),
    )
    .unwrap()
}

#[test]
fn zero_episodes_leave_tables_untouched() {
    let p = toy();
    let mut tr = Trainer::new(&p, fixtures::toy_hyper(), 200, 5).unwrap();
    tr.train_until(0, |_, _| unreachable!());
    assert_eq!(tr.q, QTriple::zeros(&p));
    assert!(tr.visits.iter().all(|&v| v == 0));
}

#[test]
fn same_seed_gives_identical_tables_and_checkpoints() {
    let p = toy();
    let run = || {
        let mut tr = Trainer::new(&p, fixtures::toy_hyper(), 200, 11).unwrap();
        tr.train_until(50, |_, _| {});
        serde_json::to_string(&tr.checkpoint()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let p = toy();
    let dir = std::env::temp_dir().join(format!("lexrl-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ck.json");

    let mut a = Trainer::new(&p, fixtures::toy_hyper(), 200, 3).unwrap();
    a.train_until(40, |_, _| {});

    let mut b = Trainer::new(&p, fixtures::toy_hyper(), 200, 3).unwrap();
    b.train_until(15, |_, _| {});
    b.checkpoint().save(&path).unwrap();
    let mut c = Trainer::resume(&p, Checkpoint::load(&path).unwrap()).unwrap();
    c.train_until(40, |_, _| {});

    assert_eq!(a.q, c.q);
    assert_eq!(a.visits, c.visits);
    assert!(!dir.join("ck.json.tmp").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn checkpoint_for_another_product_is_rejected() {
    let p = toy();
    let other = example1_product();
    let ck = Trainer::new(&p, fixtures::toy_hyper(), 200, 3)
        .unwrap()
        .checkpoint();
    assert!(matches!(
        Trainer::resume(&other, ck.clone()),
        Err(CheckpointError::Fingerprint { .. })
    ));
    let mut bad = ck;
    bad.version = 99;
    assert!(matches!(
        Trainer::resume(&p, bad),
        Err(CheckpointError::Version(99))
    ));
}

#[test]
fn stats_rows_aggregate_blocks() {
    let p = toy();
    let mut tr = Trainer::new(&p, fixtures::toy_hyper(), 200, 3).unwrap();
    let mut csv = StatsCsv::new(10);
    let mut rows = Vec::new();
    tr.train_until(30, |_, s| rows.extend(csv.push(s)));
    assert_eq!(rows.len(), 3);
    let fields: Vec<&str> = rows[2].split(',').collect();
    assert_eq!(fields.len(), StatsCsv::HEADER.split(',').count());
    assert_eq!(fields[0], "30");
}

/// Deterministic sweeps of the update rule on a two-state chain reach the
/// fixed point computed by policy iteration.
#[test]
fn sweeps_reach_exact_crafted_fixed_point() {
    let p = example1_product();
    let r = analyze(&p);
    let h = Params {
        gamma: 0.99,
        r_psi: 0.1,
        r_phi: 0.1,
        alpha: 0.5,
        epsilon: 0.0,
        upsilon: 0.0,
        tau_psi: 1e-3,
        tau_phi: 1e-3,
        ltl_bootstrap_in_safe_set: true,
    };
    let mut q = QTriple::zeros(&p);
    for _ in 0..5000 {
        for x in 0..p.num_states() {
            for k in 0..p.num_actions(x) {
                let y = p.transition(x, k)[0].0;
                let t = Transition {
                    x,
                    k,
                    r: p.reward(x),
                    next: y,
                    next_k: 0,
                    next_safe: p.in_safe(y),
                    next_accepting: p.in_accepting(y),
                };
                update_qs(&mut q, &p, &t, &h);
            }
        }
    }
    let s = exact_crafted_q(&p, Crafted::Safety, 0.1, &all_actions(&p));
    let b = exact_crafted_q(&p, Crafted::Buchi, 0.1, &r.a_psi);
    assert!(sup_gap(&q.psi, &s.q) < 1e-3);
    assert!(sup_gap(&q.psi_phi, &b.q) < 1e-3);
}

/// Harmonic per-pair step sizes with ε fixed at 0.2 drive `Q_ψ` to the
/// exact crafted values.
#[test]
fn harmonic_steps_converge_on_small_products() {
    for (i, p) in random_products(21, 4, 10).iter().enumerate() {
        let r_psi = 0.3;
        let exact = exact_crafted_q(p, Crafted::Safety, r_psi, &all_actions(p));
        let mut q = QTriple::zeros(p);
        let mut counts = vec![0u64; p.num_pairs()];
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let base = Params {
            gamma: 0.9,
            r_psi,
            r_phi: 0.3,
            alpha: 1.0,
            epsilon: 0.2,
            upsilon: 0.0,
            tau_psi: 0.01,
            tau_phi: 0.01,
            ltl_bootstrap_in_safe_set: true,
        };
        for _ in 0..400 {
            let mut x = p.initial();
            let mut k = choose_action(&q, p, x, &base, &mut rng);
            for _ in 0..200 {
                let st = p.step(x, k, &mut rng).unwrap();
                let next_k = choose_action(&q, p, st.next, &base, &mut rng);
                let j = p.pair(x, k);
                counts[j] += 1;
                let h = Params {
                    alpha: 1.0 / counts[j] as f64,
                    ..base
                };
                let t = Transition {
                    x,
                    k,
                    r: p.reward(x),
                    next: st.next,
                    next_k,
                    next_safe: st.in_safe,
                    next_accepting: st.in_accepting,
                };
                update_qs(&mut q, p, &t, &h);
                x = st.next;
                k = next_k;
            }
        }
        for j in (0..p.num_pairs()).filter(|&j| counts[j] >= 200) {
            assert!(
                (q.psi[j] - exact.q[j]).abs() < 1e-2,
                "product {i} pair {j}: {} vs {}",
                q.psi[j],
                exact.q[j]
            );
        }
    }
}

/// Exact crafted tables plugged into the chooser reproduce the oracle sets
/// on the case study.
#[test]
fn exact_tables_reproduce_oracle_sets() {
    let p = build_product(
        &fixtures::case_study_mdp(),
        &fixtures::case_study_safety(),
        &fixtures::case_study_ldba(),
    )
    .unwrap();
    let r = analyze(&p);
    let s = exact_crafted_q(&p, Crafted::Safety, 1e-4, &all_actions(&p));
    let b = exact_crafted_q(&p, Crafted::Buchi, 1e-2, &r.a_psi);
    let q = QTriple {
        psi: s.q,
        psi_phi: b.q,
        reward: vec![0.0; p.num_pairs()],
    };
    for x in 0..p.num_states() {
        let (a_psi, a_pp) = action_sets(&q, &p, x, 1e-2, 1e-2);
        assert_eq!(a_psi, r.a_psi[x], "{}", p.state_name(x));
        assert_eq!(a_pp, r.a_psi_phi[x], "{}", p.state_name(x));
    }
}

#[test]
fn greedy_policy_shapes() {
    let p = toy();
    let mut tr = Trainer::new(&p, fixtures::toy_hyper(), 200, 1).unwrap();
    tr.train_until(200, |_, _| {});
    let h = Params {
        upsilon: 0.0,
        ..tr.params()
    };
    let pure = greedy_policy(&tr.q, &p, &h);
    assert!((0..p.num_states()).all(|x| !pure.is_randomized(x)));

    let h = Params {
        upsilon: 0.3,
        ..tr.params()
    };
    let mixed = greedy_policy(&tr.q, &p, &h);
    assert!(mixed.validate(&p).is_ok());
    for x in 0..p.num_states() {
        let (_, set) = action_sets(&tr.q, &p, x, h.tau_psi, h.tau_phi);
        assert_eq!(mixed.is_randomized(x), set.len() > 1);
    }
}

#[test]
fn evaluation_on_all_accepting_product_is_safe() {
    let p = example1_product();
    let pi = ProductPolicy::uniform(&p, &all_actions(&p));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let e = evaluate(
        &p,
        &pi,
        &EvalOptions {
            episodes: 200,
            horizon: 50,
            start_after: None,
        },
        &mut rng,
    );
    assert_eq!(e.safety_freq, 1.0);
    assert_eq!(e.counted, 200);
}

#[test]
fn example1_empirical_returns_track_exact_values() {
    let p = example1_product();
    let r = analyze(&p);
    let v = max_qoc_return(&p, &r.a_psi_phi);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut prev = f64::NEG_INFINITY;
    for ups in [0.5, 0.2, 0.1, 0.05] {
        let pi = ProductPolicy::mixed(&v.policy, &r.a_psi_phi, ups);
        let exact = exact_policy_value(&p, &pi, Objective::QocReturn)[p.initial()];
        let e = evaluate(
            &p,
            &pi,
            &EvalOptions {
                episodes: 4000,
                horizon: 1500,
                start_after: None,
            },
            &mut rng,
        );
        assert!(
            (e.mean_return - exact).abs() <= 2.0 * e.stderr,
            "ups {ups}: {} vs {exact}",
            e.mean_return
        );
        assert!(e.mean_return > prev);
        assert_eq!(e.buchi_freq, 1.0);
        prev = e.mean_return;
    }
}
